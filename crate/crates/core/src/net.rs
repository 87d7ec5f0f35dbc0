//! The four-layer GeLU network, its exact backward pass, and parameter-space
//! interpolation.
//!
//! Layers are `in → h → h → h → out`. GeLU follows the first three layers; the
//! output layer is linear. Each layer carries a boolean mask of frozen weight
//! positions. Gradients at masked positions are zeroed in [`Network::backward`]
//! and the optimizer writes the recorded frozen values back after every step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{gemm, DenseMatrix, MatView};

pub const NUM_LAYERS: usize = 4;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Exact GeLU, `x·Φ(x)`.
#[inline]
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    normal_cdf(x) + x * FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NetMode {
    #[serde(alias = "mlp")]
    Mlp,
    #[serde(alias = "wmlp")]
    Wmlp,
}

impl NetMode {
    pub fn label(self) -> &'static str {
        match self {
            NetMode::Mlp => "MLP",
            NetMode::Wmlp => "WMLP",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetSpec {
    pub in_features: usize,
    pub hidden_dim: usize,
    pub out_features: usize,
    pub mode: NetMode,
}

impl NetSpec {
    pub fn new(in_features: usize, hidden_dim: usize, out_features: usize, mode: NetMode) -> Self {
        NetSpec {
            in_features,
            hidden_dim,
            out_features,
            mode,
        }
    }

    /// `(fan_in, fan_out)` of layers 1..=4.
    pub fn layer_dims(&self) -> [(usize, usize); NUM_LAYERS] {
        let h = self.hidden_dim;
        [
            (self.in_features, h),
            (h, h),
            (h, h),
            (h, self.out_features),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrozenWeight {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// `fan_out × fan_in`.
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
    /// Row-major, same shape as `weight`; `true` marks a frozen position.
    pub mask: Vec<bool>,
    pub frozen: Vec<FrozenWeight>,
}

impl LayerParams {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        LayerParams {
            weight: DenseMatrix::zeros(fan_out, fan_in),
            bias: vec![0.0; fan_out],
            mask: vec![false; fan_in * fan_out],
            frozen: Vec::new(),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.rows()
    }

    #[inline]
    pub fn is_frozen(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.fan_in() + col]
    }

    pub fn mask_row_sums(&self) -> Vec<usize> {
        self.mask
            .chunks(self.fan_in().max(1))
            .map(|r| r.iter().filter(|&&b| b).count())
            .collect()
    }

    /// Freeze `(row, col)` at `value`, writing it into the weight matrix.
    pub fn freeze(&mut self, row: usize, col: usize, value: f64) {
        let idx = row * self.fan_in() + col;
        debug_assert!(!self.mask[idx]);
        self.mask[idx] = true;
        self.weight.set(row, col, value);
        self.frozen.push(FrozenWeight { row, col, value });
    }

    /// Write the recorded frozen values back into the weight matrix.
    pub fn restore_frozen(&mut self) {
        for f in &self.frozen {
            self.weight.set(f.row, f.col, f.value);
        }
    }

    fn validate(&self, layer: usize, fan_in: usize, fan_out: usize) -> Result<()> {
        if self.weight.shape() != (fan_out, fan_in)
            || self.bias.len() != fan_out
            || self.mask.len() != fan_in * fan_out
        {
            return Err(Error::dim(
                "LayerParams",
                format!("layer {layer} {fan_out}x{fan_in}"),
                format!(
                    "weight {:?}, bias {}, mask {}",
                    self.weight.shape(),
                    self.bias.len(),
                    self.mask.len()
                ),
            ));
        }
        let masked = self.mask.iter().filter(|&&b| b).count();
        if masked != self.frozen.len() {
            return Err(Error::InvalidArgument(format!(
                "layer {layer}: {masked} masked positions but {} frozen values",
                self.frozen.len()
            )));
        }
        for f in &self.frozen {
            if f.row >= fan_out || f.col >= fan_in || !self.is_frozen(f.row, f.col) {
                return Err(Error::InvalidArgument(format!(
                    "layer {layer}: frozen entry ({}, {}) not in mask",
                    f.row, f.col
                )));
            }
            if self.weight.get(f.row, f.col).to_bits() != f.value.to_bits() {
                return Err(Error::InvalidArgument(format!(
                    "layer {layer}: weight at frozen ({}, {}) differs from its recorded value",
                    f.row, f.col
                )));
            }
        }
        Ok(())
    }
}

/// Activations recorded by [`Network::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: DenseMatrix,
    /// Pre-activations of all four layers.
    pre: Vec<DenseMatrix>,
    /// Φ(pre) for the three hidden layers.
    cdf: Vec<DenseMatrix>,
    /// GeLU outputs of the three hidden layers.
    act: Vec<DenseMatrix>,
    spec: NetSpec,
}

impl ForwardCache {
    pub fn output(&self) -> &DenseMatrix {
        &self.pre[NUM_LAYERS - 1]
    }

    pub fn batch(&self) -> usize {
        self.input.rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGrad {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros(spec: &NetSpec) -> Self {
        Gradients {
            layers: spec
                .layer_dims()
                .iter()
                .map(|&(i, o)| LayerGrad {
                    weight: DenseMatrix::zeros(o, i),
                    bias: vec![0.0; o],
                })
                .collect(),
        }
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.axpy(factor, &b.weight);
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += factor * y;
            }
        }
    }

    /// Same ordering as [`Network::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    pub fn is_zero(&self) -> bool {
        self.flat().iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetSpec,
    pub layers: Vec<LayerParams>,
}

impl Network {
    /// All-zero parameters with empty masks.
    pub fn zeros(spec: NetSpec) -> Self {
        Network {
            spec,
            layers: spec
                .layer_dims()
                .iter()
                .map(|&(i, o)| LayerParams::zeros(i, o))
                .collect(),
        }
    }

    pub fn from_layers(spec: NetSpec, layers: Vec<LayerParams>) -> Result<Self> {
        let net = Network { spec, layers };
        net.validate()?;
        Ok(net)
    }

    /// Check shapes and that every frozen entry agrees with mask and weights.
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != NUM_LAYERS {
            return Err(Error::dim("Network layers", NUM_LAYERS, self.layers.len()));
        }
        for (l, (layer, &(i, o))) in self.layers.iter().zip(&self.spec.layer_dims()).enumerate() {
            layer.validate(l + 1, i, o)?;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    pub fn frozen_count(&self) -> usize {
        self.layers.iter().map(|l| l.frozen.len()).sum()
    }

    pub fn restore_frozen(&mut self) {
        self.layers.iter_mut().for_each(LayerParams::restore_frozen);
    }

    /// Flatten as `[W1 (row-major), b1, W2, b2, ...]`.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Inverse of [`Network::params_flat`]. Frozen positions are overwritten
    /// like any other entry; call [`Network::restore_frozen`] to reset them.
    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::dim("set_params_flat", self.param_count(), flat.len()));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let w = l.weight.as_mut_slice();
            w.copy_from_slice(&flat[off..off + w.len()]);
            off += w.len();
            let b = l.bias.len();
            l.bias.copy_from_slice(&flat[off..off + b]);
            off += b;
        }
        Ok(())
    }

    /// Positions in [`Network::params_flat`] order that are frozen.
    pub fn frozen_mask_flat(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.mask);
            out.extend(std::iter::repeat_n(false, l.bias.len()));
        }
        out
    }

    pub fn check_input(&self, x: &DenseMatrix) -> Result<()> {
        if x.cols() != self.spec.in_features {
            return Err(Error::dim("network input", self.spec.in_features, x.cols()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &DenseMatrix) -> Result<(DenseMatrix, ForwardCache)> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(NUM_LAYERS);
        let mut cdf = Vec::with_capacity(NUM_LAYERS - 1);
        let mut act: Vec<DenseMatrix> = Vec::with_capacity(NUM_LAYERS - 1);
        for (l, layer) in self.layers.iter().enumerate() {
            let input = if l == 0 { x } else { &act[l - 1] };
            let z = affine(input, layer);
            if l + 1 < NUM_LAYERS {
                let phi = DenseMatrix::from_vec(
                    z.rows(),
                    z.cols(),
                    z.as_slice().iter().map(|&v| normal_cdf(v)).collect(),
                )?;
                let a = DenseMatrix::from_vec(
                    z.rows(),
                    z.cols(),
                    z.as_slice()
                        .iter()
                        .zip(phi.as_slice())
                        .map(|(v, p)| v * p)
                        .collect(),
                )?;
                cdf.push(phi);
                act.push(a);
            }
            pre.push(z);
        }
        let out = pre[NUM_LAYERS - 1].clone();
        Ok((
            out,
            ForwardCache {
                input: x.clone(),
                pre,
                cdf,
                act,
                spec: self.spec,
            },
        ))
    }

    /// Forward pass without keeping a cache.
    pub fn predict(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_input(x)?;
        let mut h = affine(x, &self.layers[0]);
        for layer in &self.layers[1..] {
            h.as_mut_slice().iter_mut().for_each(|v| *v = gelu(*v));
            h = affine(&h, layer);
        }
        Ok(h)
    }

    /// Reverse-mode gradients of the loss given `loss_grad = dL/d(output)`.
    /// Frozen positions come back as exactly zero.
    pub fn backward(&self, cache: &ForwardCache, loss_grad: &DenseMatrix) -> Result<Gradients> {
        if cache.spec != self.spec {
            return Err(Error::StaleCache(format!(
                "cache for {:?}, network is {:?}",
                cache.spec, self.spec
            )));
        }
        let out_shape = cache.output().shape();
        if loss_grad.shape() != out_shape {
            return Err(Error::dim(
                "loss gradient",
                format!("{out_shape:?}"),
                format!("{:?}", loss_grad.shape()),
            ));
        }
        let mut grads = Vec::with_capacity(NUM_LAYERS);
        let mut dz = loss_grad.clone();
        for l in (0..NUM_LAYERS).rev() {
            let layer = &self.layers[l];
            let input = if l == 0 { &cache.input } else { &cache.act[l - 1] };
            let mut dw = dz.t_matmul(input)?;
            for (g, &m) in dw.as_mut_slice().iter_mut().zip(&layer.mask) {
                if m {
                    *g = 0.0;
                }
            }
            let db = dz.column_sums();
            if l > 0 {
                let mut da = dz.matmul(&layer.weight)?;
                let z = cache.pre[l - 1].as_slice();
                let phi = cache.cdf[l - 1].as_slice();
                for ((d, &zv), &p) in da.as_mut_slice().iter_mut().zip(z).zip(phi) {
                    *d *= p + zv * FRAC_1_SQRT_2PI * (-0.5 * zv * zv).exp();
                }
                dz = da;
            }
            grads.push(LayerGrad {
                weight: dw,
                bias: db,
            });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Same spec and identical masks.
    pub fn check_compatible(&self, other: &Network) -> Result<()> {
        if self.spec.layer_dims() != other.spec.layer_dims() {
            return Err(Error::IncompatibleModels(format!(
                "layer shapes differ: {:?} vs {:?}",
                self.spec.layer_dims(),
                other.spec.layer_dims()
            )));
        }
        for (l, (a, b)) in self.layers.iter().zip(&other.layers).enumerate() {
            if a.mask != b.mask {
                return Err(Error::IncompatibleModels(format!(
                    "frozen masks differ in layer {}",
                    l + 1
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: Network = serde_json::from_str(s)?;
        net.validate()?;
        Ok(net)
    }
}

/// `x · Wᵀ + b`.
fn affine(x: &DenseMatrix, layer: &LayerParams) -> DenseMatrix {
    let mut z = DenseMatrix::zeros(x.rows(), layer.fan_out());
    for r in 0..z.rows() {
        z.row_mut(r).copy_from_slice(&layer.bias);
    }
    gemm(
        1.0,
        MatView::new(x),
        MatView::new(&layer.weight).t(),
        1.0,
        &mut z,
    );
    z
}

/// `Σᵢ αᵢ·θᵢ` over every weight and bias. Masks must match; a frozen position
/// whose value is shared by all sets keeps that value bit-for-bit.
pub fn interpolate_params(sets: &[&Network], weights: &[f64]) -> Result<Network> {
    let first = sets
        .first()
        .ok_or_else(|| Error::IncompatibleModels("no parameter sets".into()))?;
    if sets.len() != weights.len() {
        return Err(Error::dim("interpolation weights", sets.len(), weights.len()));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite interpolation weight {w}")));
    }
    for s in &sets[1..] {
        first.check_compatible(s)?;
    }
    let mut out = (*first).clone();
    interpolate_into(&mut out, sets, weights);
    Ok(out)
}

/// Unchecked core of [`interpolate_params`]; `dst` must share the sets' shapes
/// and masks.
pub(crate) fn interpolate_into(dst: &mut Network, sets: &[&Network], weights: &[f64]) {
    for l in 0..NUM_LAYERS {
        {
            let w = dst.layers[l].weight.as_mut_slice();
            w.iter_mut().for_each(|v| *v = 0.0);
            for (s, &a) in sets.iter().zip(weights) {
                for (d, v) in w.iter_mut().zip(s.layers[l].weight.as_slice()) {
                    *d += a * v;
                }
            }
        }
        {
            let b = &mut dst.layers[l].bias;
            b.iter_mut().for_each(|v| *v = 0.0);
            for (s, &a) in sets.iter().zip(weights) {
                for (d, v) in b.iter_mut().zip(&s.layers[l].bias) {
                    *d += a * v;
                }
            }
        }
        let fan_in = dst.layers[l].fan_in();
        let mut frozen = Vec::with_capacity(dst.layers[l].frozen.len());
        for f in &sets[0].layers[l].frozen {
            let shared = sets[1..].iter().all(|s| {
                s.layers[l].weight.as_slice()[f.row * fan_in + f.col].to_bits() == f.value.to_bits()
            });
            let value = if shared {
                dst.layers[l].weight.set(f.row, f.col, f.value);
                f.value
            } else {
                dst.layers[l].weight.get(f.row, f.col)
            };
            frozen.push(FrozenWeight { value, ..*f });
        }
        dst.layers[l].frozen = frozen;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    /// erf by its Maclaurin series; independent of libm.
    fn erf_series(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut term = x; // (-1)^n x^(2n+1) / n!
        for n in 0..60 {
            sum += term / (2 * n + 1) as f64;
            term *= -x * x / (n + 1) as f64;
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(0.0), 0.0);
        let oracle = 1.0 * 0.5 * (1.0 + erf_series(1.0 / 2f64.sqrt()));
        assert!((oracle - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((gelu(1.0) - oracle).abs() < 1e-15);
        assert!(gelu(-10.0).abs() < 1e-20);
        for x in [-3.0, -0.7, 0.2, 1.5, 2.5] {
            let oracle = x * 0.5 * (1.0 + erf_series(x / 2f64.sqrt()));
            assert!((gelu(x) - oracle).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn gelu_grad_matches_finite_difference() {
        for x in [-4.0, -1.3, -0.2, 0.0, 0.4, 2.2] {
            let h = 1e-6;
            let num = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_grad(x) - num).abs() < 1e-8);
        }
    }

    fn random_net(spec: NetSpec, seed: u64) -> Network {
        let mut rng = RngStream::new(seed);
        let mut net = Network::zeros(spec);
        let flat: Vec<f64> = (0..net.param_count())
            .map(|_| rng.uniform(-1.0, 1.0).unwrap())
            .collect();
        net.set_params_flat(&flat).unwrap();
        net
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Network::zeros(NetSpec::new(3, 4, 2, NetMode::Mlp));
        let x = DenseMatrix::from_fn(5, 3, |i, j| (i + j) as f64 - 2.5);
        let (y, _) = net.forward(&x).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_path_net_at_zero() {
        let spec = NetSpec::new(1, 1, 1, NetMode::Mlp);
        let mut net = Network::zeros(spec);
        net.set_params_flat(&[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0])
            .unwrap();
        let y = net.predict(&DenseMatrix::zeros(1, 1)).unwrap();
        assert_eq!(y.get(0, 0), 0.0);
    }

    /// Straight-line evaluator written against the flat parameter layout.
    fn straight_line(net: &Network, x: &[f64]) -> Vec<f64> {
        let dims = net.spec.layer_dims();
        let flat = net.params_flat();
        let mut off = 0;
        let mut h = x.to_vec();
        for (l, &(fi, fo)) in dims.iter().enumerate() {
            let w = &flat[off..off + fi * fo];
            let b = &flat[off + fi * fo..off + fi * fo + fo];
            off += fi * fo + fo;
            let mut z = vec![0.0; fo];
            for o in 0..fo {
                let mut s = b[o];
                for i in 0..fi {
                    s += w[o * fi + i] * h[i];
                }
                z[o] = s;
            }
            if l < 3 {
                for v in &mut z {
                    let x = *v;
                    *v = x * 0.5 * (1.0 + erf_series(x / 2f64.sqrt()));
                }
            }
            h = z;
        }
        h
    }

    #[test]
    fn forward_matches_straight_line_evaluator() {
        let net = random_net(NetSpec::new(3, 4, 2, NetMode::Mlp), 17);
        let x = DenseMatrix::from_fn(6, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.4 - 1.0);
        let (y, _) = net.forward(&x).unwrap();
        for r in 0..x.rows() {
            let expected = straight_line(&net, x.row(r));
            for (a, b) in y.row(r).iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(y.max_abs_diff(&net.predict(&x).unwrap()) == 0.0);
    }

    #[test]
    fn forward_rejects_bad_width() {
        let net = Network::zeros(NetSpec::new(3, 4, 2, NetMode::Mlp));
        assert!(matches!(
            net.forward(&DenseMatrix::zeros(2, 4)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn backward_rejects_stale_cache() {
        let a = Network::zeros(NetSpec::new(3, 4, 2, NetMode::Mlp));
        let b = Network::zeros(NetSpec::new(3, 5, 2, NetMode::Mlp));
        let (y, cache) = a.forward(&DenseMatrix::zeros(2, 3)).unwrap();
        assert!(matches!(b.backward(&cache, &y), Err(Error::StaleCache(_))));
        assert!(a.backward(&cache, &DenseMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let net = random_net(NetSpec::new(3, 4, 2, NetMode::Mlp), 3);
        let x = DenseMatrix::from_fn(4, 3, |i, j| i as f64 - j as f64);
        let (y, cache) = net.forward(&x).unwrap();
        let g = net
            .backward(&cache, &DenseMatrix::zeros(y.rows(), y.cols()))
            .unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn frozen_positions_get_zero_gradient() {
        let mut net = random_net(NetSpec::new(3, 4, 2, NetMode::Wmlp), 5);
        let v = net.layers[1].weight.get(2, 1);
        net.layers[1].freeze(2, 1, v);
        let v = net.layers[0].weight.get(0, 2);
        net.layers[0].freeze(0, 2, v);
        net.validate().unwrap();
        let x = DenseMatrix::from_fn(4, 3, |i, j| (i as f64 - j as f64) * 0.3);
        let (y, cache) = net.forward(&x).unwrap();
        let g = net.backward(&cache, &y).unwrap();
        assert_eq!(g.layers[1].weight.get(2, 1), 0.0);
        assert_eq!(g.layers[0].weight.get(0, 2), 0.0);
        assert_ne!(g.layers[1].weight.get(2, 0), 0.0);
    }

    #[test]
    fn interpolation_identity_and_affine_cases() {
        let spec = NetSpec::new(2, 3, 1, NetMode::Mlp);
        let a = random_net(spec, 1);
        let b = random_net(spec, 2);
        let out = interpolate_params(&[&a, &b], &[1.0, 0.0]).unwrap();
        assert_eq!(out, a);
        let out = interpolate_params(&[&a, &a, &a], &[0.2, 0.5, 0.3]).unwrap();
        for (x, y) in out.params_flat().iter().zip(a.params_flat()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn interpolation_keeps_shared_frozen_values() {
        let spec = NetSpec::new(2, 3, 1, NetMode::Wmlp);
        let mut a = random_net(spec, 1);
        let mut b = random_net(spec, 2);
        a.layers[2].freeze(1, 1, 0.123_456_789);
        b.layers[2].freeze(1, 1, 0.123_456_789);
        let third = 1.0 / 3.0;
        let out = interpolate_params(&[&a, &b, &a], &[third, third, third]).unwrap();
        assert_eq!(out.layers[2].weight.get(1, 1).to_bits(), 0.123_456_789f64.to_bits());
        out.validate().unwrap();
    }

    #[test]
    fn interpolation_rejects_mismatched_masks() {
        let spec = NetSpec::new(2, 3, 1, NetMode::Wmlp);
        let mut a = random_net(spec, 1);
        let b = random_net(spec, 2);
        a.layers[0].freeze(0, 0, 1.0);
        assert!(matches!(
            interpolate_params(&[&a, &b], &[0.5, 0.5]),
            Err(Error::IncompatibleModels(_))
        ));
        let c = random_net(NetSpec::new(2, 4, 1, NetMode::Mlp), 3);
        assert!(interpolate_params(&[&b, &c], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut net = random_net(NetSpec::new(3, 4, 2, NetMode::Wmlp), 9);
        net.layers[0].freeze(1, 1, -0.1 / 3.0);
        let back = Network::from_json(&net.to_json().unwrap()).unwrap();
        let a: Vec<u64> = net.params_flat().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.params_flat().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        assert_eq!(back, net);
    }
}
