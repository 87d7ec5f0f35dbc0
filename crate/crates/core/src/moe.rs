//! Mixture of Experts and Mixture of Interpolated Experts.
//!
//! A logistic-regression gate maps each input row to convex weights `α(x)`
//! over `k` experts. [`Combine::OutputAverage`] mixes expert outputs;
//! [`Combine::WeightInterpolation`] mixes expert *parameters* per row and runs
//! the shared architecture once on the mixed parameters. The gate activation
//! is a softmax or a Gumbel-softmax sample; Gumbel-gated inference averages
//! several sampled forward passes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{build_linear, build_network, FixSchedule};
use crate::loss::{loss_and_grad, loss_value, softmax_into, Predictions, Targets, Task};
use crate::matrix::{gemm, DenseMatrix, MatView};
use crate::net::{interpolate_into, ForwardCache, Gradients, NetSpec, Network};
use crate::optim::{network_slots, ParamSlot, StepCoords, Trainable};
use crate::rng::{derive_seed, Purpose, RngStream, SeedKey};

/// Seed-coordinate layer index of the gate; experts use 1..=4.
pub const GATE_SEED_LAYER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKind {
    Softmax,
    GumbelSoftmax,
}

/// What Gumbel-gated inference averages over its samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InferenceAverage {
    Outputs,
    GateVectors,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub kind: GateKind,
    pub temperature: f64,
    pub inference_samples: usize,
    pub average: InferenceAverage,
}

impl GateSpec {
    pub fn softmax() -> Self {
        GateSpec {
            kind: GateKind::Softmax,
            temperature: 1.0,
            inference_samples: 1,
            average: InferenceAverage::Outputs,
        }
    }

    pub fn gumbel(temperature: f64) -> Self {
        GateSpec {
            kind: GateKind::GumbelSoftmax,
            temperature,
            inference_samples: 10,
            average: InferenceAverage::Outputs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Combine {
    OutputAverage,
    WeightInterpolation,
}

/// Linear gate, `logits = x·Wᵀ + b` with `W` of shape `k × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

/// Source of Gumbel noise for one gate evaluation.
pub enum GateNoise<'a> {
    Sample(&'a mut RngStream),
    /// Noise identically zero; Gumbel-softmax reduces to softmax(logits/τ).
    Zero,
    /// Caller-supplied `batch × k` noise matrix.
    Fixed(&'a DenseMatrix),
}

#[derive(Debug, Clone)]
pub struct GateOutput {
    pub logits: DenseMatrix,
    pub alpha: DenseMatrix,
}

impl Gate {
    pub fn experts(&self) -> usize {
        self.weight.rows()
    }

    pub fn logits(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.weight.cols() {
            return Err(Error::dim("gate input", self.weight.cols(), x.cols()));
        }
        let mut z = DenseMatrix::zeros(x.rows(), self.experts());
        for r in 0..z.rows() {
            z.row_mut(r).copy_from_slice(&self.bias);
        }
        gemm(1.0, MatView::new(x), MatView::new(&self.weight).t(), 1.0, &mut z);
        Ok(z)
    }

    /// Rows of `α` are non-negative and sum to one.
    pub fn forward(&self, spec: &GateSpec, x: &DenseMatrix, noise: GateNoise<'_>) -> Result<GateOutput> {
        let logits = self.logits(x)?;
        let (b, k) = logits.shape();
        let noise = match (spec.kind, noise) {
            (GateKind::Softmax, _) | (_, GateNoise::Zero) => None,
            (_, GateNoise::Fixed(m)) => {
                if m.shape() != (b, k) {
                    return Err(Error::dim(
                        "gate noise",
                        format!("{:?}", (b, k)),
                        format!("{:?}", m.shape()),
                    ));
                }
                Some(m.clone())
            }
            (_, GateNoise::Sample(rng)) => Some(DenseMatrix::from_fn(b, k, |_, _| rng.gumbel())),
        };
        let mut alpha = DenseMatrix::zeros(b, k);
        let mut scores = vec![0.0; k];
        for r in 0..b {
            scores.copy_from_slice(logits.row(r));
            if spec.kind == GateKind::GumbelSoftmax {
                if let Some(g) = &noise {
                    scores.iter_mut().zip(g.row(r)).for_each(|(s, g)| *s += g);
                }
                scores.iter_mut().for_each(|s| *s /= spec.temperature);
            }
            softmax_into(&scores, alpha.row_mut(r));
        }
        Ok(GateOutput { logits, alpha })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoeModel {
    pub experts: Vec<Network>,
    pub gate: Gate,
    pub gate_spec: GateSpec,
    pub combine: Combine,
    /// Seed coordinates for training-time and inference-time gate noise.
    pub repetition: usize,
    pub run: usize,
}

/// Everything [`MoeModel::backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct MoeCache {
    x: DenseMatrix,
    alpha: DenseMatrix,
    /// `false` when `α` was supplied by the caller; the gate then gets no gradient.
    gate_active: bool,
    expert_outputs: Vec<DenseMatrix>,
    /// One cache per expert (output averaging) or per input row (interpolation).
    caches: Vec<ForwardCache>,
    combine: Combine,
    experts: usize,
}

impl MoeCache {
    pub fn alpha(&self) -> &DenseMatrix {
        &self.alpha
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoeGradients {
    pub experts: Vec<Gradients>,
    pub gate_weight: DenseMatrix,
    pub gate_bias: Vec<f64>,
}

impl MoeGradients {
    /// Same ordering as [`MoeModel::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.experts.iter().flat_map(|g| g.flat()).collect();
        out.extend_from_slice(self.gate_weight.as_slice());
        out.extend_from_slice(&self.gate_bias);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.experts.iter().all(Gradients::is_finite)
            && self.gate_weight.is_finite()
            && self.gate_bias.iter().all(|v| v.is_finite())
    }
}

/// Inference-time noise for [`MoeModel::predict_output_with`].
pub enum InferenceNoise<'a> {
    Sampled(&'a mut RngStream),
    Zero,
}

impl MoeModel {
    pub fn new(experts: Vec<Network>, gate: Gate, gate_spec: GateSpec, combine: Combine) -> Result<Self> {
        let first = experts
            .first()
            .ok_or_else(|| Error::InvalidArgument("mixture needs at least one expert".into()))?;
        for e in &experts[1..] {
            if e.spec != first.spec {
                return Err(Error::IncompatibleModels("experts have different specs".into()));
            }
            if combine == Combine::WeightInterpolation {
                first.check_compatible(e)?;
                if first.layers.iter().zip(&e.layers).any(|(a, b)| a.frozen != b.frozen) {
                    return Err(Error::IncompatibleModels(
                        "interpolated experts must share frozen values".into(),
                    ));
                }
            }
        }
        if gate.weight.shape() != (experts.len(), first.spec.in_features)
            || gate.bias.len() != experts.len()
        {
            return Err(Error::dim(
                "gate",
                format!("{}x{}", experts.len(), first.spec.in_features),
                format!("{:?}", gate.weight.shape()),
            ));
        }
        if !(gate_spec.temperature > 0.0) || gate_spec.inference_samples == 0 {
            return Err(Error::InvalidArgument(
                "gate temperature must be > 0 and inference_samples >= 1".into(),
            ));
        }
        Ok(MoeModel {
            experts,
            gate,
            gate_spec,
            combine,
            repetition: 0,
            run: 0,
        })
    }

    /// Seeded mixture: expert `j` uses estimator index `j`; the gate is a
    /// Kaiming-uniform linear layer.
    pub fn build(
        spec: NetSpec,
        schedule: &FixSchedule,
        k: usize,
        gate_spec: GateSpec,
        combine: Combine,
        repetition: usize,
        run: usize,
    ) -> Result<Self> {
        let experts = (0..k)
            .map(|j| build_network(spec, schedule, repetition, j))
            .collect::<Result<Vec<_>>>()?;
        let (weight, bias) = build_linear(spec.in_features, k, repetition, 0, GATE_SEED_LAYER);
        let mut model = MoeModel::new(experts, Gate { weight, bias }, gate_spec, combine)?;
        model.repetition = repetition;
        model.run = run;
        Ok(model)
    }

    pub fn restore_frozen_values(&mut self) {
        self.experts.iter_mut().for_each(Network::restore_frozen);
    }

    pub fn spec(&self) -> NetSpec {
        self.experts[0].spec
    }

    pub fn k(&self) -> usize {
        self.experts.len()
    }

    pub fn gate_forward(&self, x: &DenseMatrix, noise: GateNoise<'_>) -> Result<GateOutput> {
        self.gate.forward(&self.gate_spec, x, noise)
    }

    /// Mixture output. `forced_alpha` replaces the gate (test hook).
    pub fn forward(
        &self,
        x: &DenseMatrix,
        noise: GateNoise<'_>,
        forced_alpha: Option<&DenseMatrix>,
    ) -> Result<(DenseMatrix, MoeCache)> {
        self.experts[0].check_input(x)?;
        let (alpha, gate_active) = match forced_alpha {
            Some(a) => {
                if a.shape() != (x.rows(), self.k()) {
                    return Err(Error::dim(
                        "forced alpha",
                        format!("{:?}", (x.rows(), self.k())),
                        format!("{:?}", a.shape()),
                    ));
                }
                (a.clone(), false)
            }
            None => (self.gate_forward(x, noise)?.alpha, true),
        };
        let out_dim = self.spec().out_features;
        let mut out = DenseMatrix::zeros(x.rows(), out_dim);
        let mut caches = Vec::new();
        let mut expert_outputs = Vec::new();
        match self.combine {
            Combine::OutputAverage => {
                for (i, e) in self.experts.iter().enumerate() {
                    let (y, c) = e.forward(x)?;
                    for r in 0..x.rows() {
                        let a = alpha.get(r, i);
                        out.row_mut(r).iter_mut().zip(y.row(r)).for_each(|(o, v)| *o += a * v);
                    }
                    expert_outputs.push(y);
                    caches.push(c);
                }
            }
            Combine::WeightInterpolation => {
                let sets: Vec<&Network> = self.experts.iter().collect();
                let mut scratch = self.experts[0].clone();
                for r in 0..x.rows() {
                    interpolate_into(&mut scratch, &sets, alpha.row(r));
                    let xr = x.select_rows(&[r]);
                    let (y, c) = scratch.forward(&xr)?;
                    out.row_mut(r).copy_from_slice(y.row(0));
                    caches.push(c);
                }
            }
        }
        Ok((
            out,
            MoeCache {
                x: x.clone(),
                alpha,
                gate_active,
                expert_outputs,
                caches,
                combine: self.combine,
                experts: self.k(),
            },
        ))
    }

    pub fn backward(&self, cache: &MoeCache, dout: &DenseMatrix) -> Result<MoeGradients> {
        let b = cache.x.rows();
        if cache.combine != self.combine || cache.experts != self.k() {
            return Err(Error::StaleCache("mixture layout changed since forward".into()));
        }
        if dout.shape() != (b, self.spec().out_features) {
            return Err(Error::dim(
                "mixture output gradient",
                format!("{:?}", (b, self.spec().out_features)),
                format!("{:?}", dout.shape()),
            ));
        }
        let k = self.k();
        let mut d_alpha = DenseMatrix::zeros(b, k);
        let mut expert_grads = Vec::with_capacity(k);
        match self.combine {
            Combine::OutputAverage => {
                for (i, e) in self.experts.iter().enumerate() {
                    let y = &cache.expert_outputs[i];
                    let mut dy = dout.clone();
                    for r in 0..b {
                        let a = cache.alpha.get(r, i);
                        dy.row_mut(r).iter_mut().for_each(|v| *v *= a);
                        d_alpha.set(r, i, dot(dout.row(r), y.row(r)));
                    }
                    expert_grads.push(e.backward(&cache.caches[i], &dy)?);
                }
            }
            Combine::WeightInterpolation => {
                if cache.caches.len() != b {
                    return Err(Error::StaleCache("row caches do not match batch".into()));
                }
                let sets: Vec<&Network> = self.experts.iter().collect();
                let flats: Vec<Vec<f64>> = self.experts.iter().map(Network::params_flat).collect();
                let spec = self.spec();
                expert_grads = vec![Gradients::zeros(&spec); k];
                let mut scratch = self.experts[0].clone();
                for r in 0..b {
                    interpolate_into(&mut scratch, &sets, cache.alpha.row(r));
                    let dr = dout.select_rows(&[r]);
                    let g = scratch.backward(&cache.caches[r], &dr)?;
                    let gf = g.flat();
                    for i in 0..k {
                        expert_grads[i].axpy(cache.alpha.get(r, i), &g);
                        d_alpha.set(r, i, dot(&gf, &flats[i]));
                    }
                }
            }
        }

        let mut gate_weight = DenseMatrix::zeros(k, self.spec().in_features);
        let mut gate_bias = vec![0.0; k];
        if cache.gate_active {
            let scale = match self.gate_spec.kind {
                GateKind::Softmax => 1.0,
                GateKind::GumbelSoftmax => 1.0 / self.gate_spec.temperature,
            };
            let mut d_logits = DenseMatrix::zeros(b, k);
            for r in 0..b {
                let a = cache.alpha.row(r);
                let da = d_alpha.row(r);
                let inner = dot(a, da);
                for (j, d) in d_logits.row_mut(r).iter_mut().enumerate() {
                    *d = scale * a[j] * (da[j] - inner);
                }
            }
            gate_weight = d_logits.t_matmul(&cache.x)?;
            gate_bias = d_logits.column_sums();
        }
        Ok(MoeGradients {
            experts: expert_grads,
            gate_weight,
            gate_bias,
        })
    }

    /// Raw inference output using the configured number of gate samples.
    pub fn predict_output(&self, x: &DenseMatrix, rng: &mut RngStream) -> Result<DenseMatrix> {
        self.predict_output_with(x, self.gate_spec.inference_samples, InferenceNoise::Sampled(rng))
    }

    /// Raw inference output. Softmax gates run once; Gumbel gates average
    /// `samples` draws of either the outputs or the gate vectors.
    pub fn predict_output_with(
        &self,
        x: &DenseMatrix,
        samples: usize,
        mut noise: InferenceNoise<'_>,
    ) -> Result<DenseMatrix> {
        if self.gate_spec.kind == GateKind::Softmax {
            return Ok(self.forward(x, GateNoise::Zero, None)?.0);
        }
        let samples = samples.max(1);
        let mut draw = |model: &MoeModel| -> Result<GateOutput> {
            match &mut noise {
                InferenceNoise::Sampled(rng) => model.gate_forward(x, GateNoise::Sample(rng)),
                InferenceNoise::Zero => model.gate_forward(x, GateNoise::Zero),
            }
        };
        match self.gate_spec.average {
            InferenceAverage::Outputs => {
                let mut mean: Option<DenseMatrix> = None;
                for s in 0..samples {
                    let alpha = draw(self)?.alpha;
                    let (y, _) = self.forward(x, GateNoise::Zero, Some(&alpha))?;
                    running_mean(&mut mean, y, s);
                }
                Ok(mean.expect("samples >= 1"))
            }
            InferenceAverage::GateVectors => {
                let mut mean: Option<DenseMatrix> = None;
                for s in 0..samples {
                    running_mean(&mut mean, draw(self)?.alpha, s);
                }
                let alpha = mean.expect("samples >= 1");
                Ok(self.forward(x, GateNoise::Zero, Some(&alpha))?.0)
            }
        }
    }

    /// Task-head predictions (argmax for classification).
    pub fn predict(&self, x: &DenseMatrix, rng: &mut RngStream, task: Task) -> Result<Predictions> {
        Ok(Predictions::from_output(self.predict_output(x, rng)?, task))
    }

    /// Stream used for validation and test inference.
    pub fn inference_stream(&self) -> RngStream {
        SeedKey {
            layer: 2,
            ..SeedKey::new(Purpose::GumbelNoise).with_run(self.repetition, self.run)
        }
        .stream()
    }

    fn training_stream(&self, at: StepCoords) -> RngStream {
        RngStream::new(derive_seed(
            SeedKey::new(Purpose::GumbelNoise)
                .with_run(self.repetition, self.run)
                .with_cell(at.epoch as u64, at.batch as u64),
        ))
    }

    /// Experts in order, then gate weight, then gate bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.experts.iter().flat_map(|e| e.params_flat()).collect();
        out.extend_from_slice(self.gate.weight.as_slice());
        out.extend_from_slice(&self.gate.bias);
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total = self.params_flat().len();
        if flat.len() != total {
            return Err(Error::dim("MoeModel::set_params_flat", total, flat.len()));
        }
        let mut off = 0;
        for e in &mut self.experts {
            let n = e.param_count();
            e.set_params_flat(&flat[off..off + n])?;
            off += n;
        }
        let w = self.gate.weight.as_mut_slice();
        let n = w.len();
        w.copy_from_slice(&flat[off..off + n]);
        off += n;
        self.gate.bias.copy_from_slice(&flat[off..]);
        Ok(())
    }

    pub fn frozen_mask_flat(&self) -> Vec<bool> {
        let mut out: Vec<bool> = self.experts.iter().flat_map(|e| e.frozen_mask_flat()).collect();
        out.extend(std::iter::repeat_n(false, self.gate.weight.as_slice().len() + self.k()));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: MoeModel = serde_json::from_str(s)?;
        for e in &m.experts {
            e.validate()?;
        }
        let (repetition, run) = (m.repetition, m.run);
        let mut checked = MoeModel::new(m.experts, m.gate, m.gate_spec, m.combine)?;
        checked.repetition = repetition;
        checked.run = run;
        Ok(checked)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Incremental mean; identical samples reproduce the sample exactly.
fn running_mean(mean: &mut Option<DenseMatrix>, sample: DenseMatrix, index: usize) {
    match mean {
        None => *mean = Some(sample),
        Some(m) => {
            let inv = 1.0 / (index + 1) as f64;
            for (a, b) in m.as_mut_slice().iter_mut().zip(sample.as_slice()) {
                *a += (b - *a) * inv;
            }
        }
    }
}

impl Trainable for MoeModel {
    type Grads = MoeGradients;

    fn batch_loss_grad(&self, x: &DenseMatrix, y: &Targets, at: StepCoords) -> Result<(f64, MoeGradients)> {
        let mut rng = self.training_stream(at);
        let (out, cache) = self.forward(x, GateNoise::Sample(&mut rng), None)?;
        let (loss, dout) = loss_and_grad(&out, y)?;
        Ok((loss, self.backward(&cache, &dout)?))
    }

    fn eval_loss(&self, x: &DenseMatrix, y: &Targets) -> Result<f64> {
        let mut rng = self.inference_stream();
        loss_value(&self.predict_output(x, &mut rng)?, y)
    }

    fn param_slots<'a>(&'a mut self, grads: &'a MoeGradients) -> Vec<ParamSlot<'a>> {
        let mut slots: Vec<ParamSlot<'a>> = Vec::new();
        for (e, g) in self.experts.iter_mut().zip(&grads.experts) {
            slots.extend(network_slots(e, g));
        }
        slots.push(ParamSlot {
            values: self.gate.weight.as_mut_slice(),
            grads: grads.gate_weight.as_slice(),
            frozen: None,
            decay: true,
        });
        slots.push(ParamSlot {
            values: &mut self.gate.bias,
            grads: &grads.gate_bias,
            frozen: None,
            decay: false,
        });
        slots
    }

    fn grads_finite(grads: &MoeGradients) -> bool {
        grads.is_finite()
    }

    fn restore_frozen(&mut self) {
        self.restore_frozen_values();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{gelu, NetMode};

    fn tiny(mode: NetMode, k: usize, combine: Combine, gate: GateSpec) -> MoeModel {
        let spec = NetSpec::new(2, 3, 1, mode);
        MoeModel::build(spec, &FixSchedule::for_hidden(3), k, gate, combine, 0, 0).unwrap()
    }

    fn inputs() -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![0.4, -1.1], vec![1.3, 0.2], vec![-0.7, 0.9]]).unwrap()
    }

    /// Straight loops over an explicit parameter list.
    fn eval_by_hand(net: &Network, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for (l, layer) in net.layers.iter().enumerate() {
            let mut next = Vec::new();
            for o in 0..layer.weight.rows() {
                let mut s = layer.bias[o];
                for (i, v) in h.iter().enumerate() {
                    s += layer.weight.get(o, i) * v;
                }
                next.push(if l < 3 { gelu(s) } else { s });
            }
            h = next;
        }
        h
    }

    #[test]
    fn zero_gate_is_uniform() {
        let mut m = tiny(NetMode::Mlp, 4, Combine::OutputAverage, GateSpec::softmax());
        m.gate.weight = DenseMatrix::zeros(4, 2);
        m.gate.bias = vec![0.0; 4];
        let a = m.gate_forward(&inputs(), GateNoise::Zero).unwrap().alpha;
        assert!(a.as_slice().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn softmax_closed_form() {
        let gate = Gate {
            weight: DenseMatrix::zeros(2, 1),
            bias: vec![std::f64::consts::LN_2, 0.0],
        };
        let a = gate
            .forward(&GateSpec::softmax(), &DenseMatrix::zeros(1, 1), GateNoise::Zero)
            .unwrap()
            .alpha;
        assert!((a.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((a.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_gumbel_noise_is_tempered_softmax() {
        let m = tiny(NetMode::Mlp, 3, Combine::OutputAverage, GateSpec::gumbel(0.7));
        let x = inputs();
        let g = m.gate_forward(&x, GateNoise::Zero).unwrap();
        let mut expect = vec![0.0; 3];
        for r in 0..x.rows() {
            let scaled: Vec<f64> = g.logits.row(r).iter().map(|v| v / 0.7).collect();
            softmax_into(&scaled, &mut expect);
            for j in 0..3 {
                assert!((g.alpha.get(r, j) - expect[j]).abs() < 1e-15);
            }
        }
        let zeros = DenseMatrix::zeros(x.rows(), 3);
        assert_eq!(m.gate_forward(&x, GateNoise::Fixed(&zeros)).unwrap().alpha, g.alpha);
    }

    #[test]
    fn gate_rows_sum_to_one() {
        let m = tiny(NetMode::Wmlp, 3, Combine::OutputAverage, GateSpec::gumbel(1.0));
        let mut rng = RngStream::new(3);
        for _ in 0..20 {
            let a = m.gate_forward(&inputs(), GateNoise::Sample(&mut rng)).unwrap().alpha;
            for r in 0..a.rows() {
                assert!(a.row(r).iter().all(|&v| v >= 0.0));
                assert!((a.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_hot_alpha_selects_expert() {
        let x = inputs();
        for combine in [Combine::OutputAverage, Combine::WeightInterpolation] {
            let m = tiny(NetMode::Wmlp, 3, combine, GateSpec::softmax());
            let mut alpha = DenseMatrix::zeros(x.rows(), 3);
            (0..x.rows()).for_each(|r| alpha.set(r, 1, 1.0));
            let (y, _) = m.forward(&x, GateNoise::Zero, Some(&alpha)).unwrap();
            let e = m.experts[1].predict(&x).unwrap();
            assert!(y.max_abs_diff(&e) < 1e-12, "{combine:?}");
        }
    }

    #[test]
    fn identical_experts_reproduce_the_expert() {
        let x = inputs();
        for combine in [Combine::OutputAverage, Combine::WeightInterpolation] {
            let mut m = tiny(NetMode::Mlp, 3, combine, GateSpec::softmax());
            let e0 = m.experts[0].clone();
            m.experts = vec![e0.clone(); 3];
            let (y, _) = m.forward(&x, GateNoise::Zero, None).unwrap();
            assert!(y.max_abs_diff(&e0.predict(&x).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn interpolated_forward_matches_hand_mix() {
        let m = tiny(NetMode::Mlp, 2, Combine::WeightInterpolation, GateSpec::softmax());
        let x = inputs();
        let alpha = DenseMatrix::from_fn(x.rows(), 2, |_, j| [0.25, 0.75][j]);
        let (y, _) = m.forward(&x, GateNoise::Zero, Some(&alpha)).unwrap();
        let (a, b) = (m.experts[0].params_flat(), m.experts[1].params_flat());
        let mixed: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.25 * p + 0.75 * q).collect();
        let mut net = m.experts[0].clone();
        net.set_params_flat(&mixed).unwrap();
        for r in 0..x.rows() {
            let want = eval_by_hand(&net, x.row(r));
            assert!((y.get(r, 0) - want[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_alpha_starves_other_experts() {
        let m = tiny(NetMode::Mlp, 3, Combine::OutputAverage, GateSpec::softmax());
        let x = inputs();
        let mut alpha = DenseMatrix::zeros(x.rows(), 3);
        (0..x.rows()).for_each(|r| alpha.set(r, 2, 1.0));
        let (_, cache) = m.forward(&x, GateNoise::Zero, Some(&alpha)).unwrap();
        let g = m.backward(&cache, &DenseMatrix::from_fn(3, 1, |r, _| 1.0 + r as f64)).unwrap();
        assert!(g.experts[0].is_zero() && g.experts[1].is_zero());
        assert!(!g.experts[2].is_zero());
        assert!(g.gate_weight.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_interpolated_experts_give_no_gate_gradient() {
        let mut m = tiny(NetMode::Wmlp, 3, Combine::WeightInterpolation, GateSpec::softmax());
        m.experts = vec![m.experts[0].clone(); 3];
        let x = inputs();
        let (_, cache) = m.forward(&x, GateNoise::Zero, None).unwrap();
        let g = m.backward(&cache, &DenseMatrix::from_fn(3, 1, |r, _| r as f64 - 0.5)).unwrap();
        assert!(g.gate_weight.as_slice().iter().all(|v| v.abs() < 1e-12));
        assert!(g.gate_bias.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn single_expert_moe_equals_moie() {
        let x = inputs();
        let a = tiny(NetMode::Wmlp, 1, Combine::OutputAverage, GateSpec::softmax());
        let mut b = a.clone();
        b.combine = Combine::WeightInterpolation;
        let ya = a.forward(&x, GateNoise::Zero, None).unwrap().0;
        let yb = b.forward(&x, GateNoise::Zero, None).unwrap().0;
        assert_eq!(ya, yb);
    }

    #[test]
    fn softmax_prediction_is_deterministic() {
        let m = tiny(NetMode::Mlp, 4, Combine::WeightInterpolation, GateSpec::softmax());
        let x = inputs();
        let p1 = m.predict_output(&x, &mut RngStream::new(1)).unwrap();
        let p2 = m.predict_output(&x, &mut RngStream::new(2)).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn sample_count_irrelevant_without_noise() {
        let x = inputs();
        for combine in [Combine::OutputAverage, Combine::WeightInterpolation] {
            for average in [InferenceAverage::Outputs, InferenceAverage::GateVectors] {
                let mut m = tiny(NetMode::Wmlp, 3, combine, GateSpec::gumbel(1.0));
                m.gate_spec.average = average;
                let one = m.predict_output_with(&x, 1, InferenceNoise::Zero).unwrap();
                let ten = m.predict_output_with(&x, 10, InferenceNoise::Zero).unwrap();
                assert_eq!(one, ten);
            }
        }
    }

    #[test]
    fn cold_gumbel_gate_picks_dominant_expert() {
        let mut m = tiny(NetMode::Mlp, 3, Combine::OutputAverage, GateSpec::gumbel(0.01));
        m.gate.weight = DenseMatrix::zeros(3, 2);
        m.gate.bias = vec![0.0, 10.0, 0.0];
        let x = inputs();
        let got = m.predict_output(&x, &mut RngStream::new(11)).unwrap();
        assert!(got.max_abs_diff(&m.experts[1].predict(&x).unwrap()) < 1e-9);
    }

    #[test]
    fn json_round_trip() {
        let m = tiny(NetMode::Wmlp, 2, Combine::WeightInterpolation, GateSpec::gumbel(0.5));
        assert_eq!(MoeModel::from_json(&m.to_json().unwrap()).unwrap(), m);
    }

    #[test]
    fn mismatched_specs_rejected() {
        let a = tiny(NetMode::Mlp, 1, Combine::OutputAverage, GateSpec::softmax());
        let other = build_network(NetSpec::new(2, 4, 1, NetMode::Mlp), &FixSchedule::for_hidden(4), 0, 1).unwrap();
        let gate = Gate {
            weight: DenseMatrix::zeros(2, 2),
            bias: vec![0.0; 2],
        };
        let r = MoeModel::new(vec![a.experts[0].clone(), other], gate, GateSpec::softmax(), Combine::OutputAverage);
        assert!(matches!(r, Err(Error::IncompatibleModels(_))));
    }
}
