//! Seeded initialization of MLPs and W-asymmetric MLPs.
//!
//! For a WMLP, every output unit of layer `l` gets `n_fix(l)` frozen incoming
//! weights. Their positions are keyed by `(l, row)` and their values, drawn
//! from N(0, 1), by `(l, row, col)`, so all ensemble members and repetitions
//! share them. Free weights (Kaiming-uniform, `a = √5`) and biases
//! (uniform in ±1/√fan_in) are keyed by `(rep, estimator, l, row, col)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::net::{LayerParams, NetMode, NetSpec, Network, NUM_LAYERS};
use crate::rng::SeedKey;

pub const KAIMING_A: f64 = 2.236_067_977_499_79; // √5

/// Frozen weights per output unit of layer `layer` (1-based).
pub fn n_fix(layer: usize, hidden_dim: usize) -> usize {
    if layer <= 1 {
        2
    } else if hidden_dim == 256 {
        4
    } else {
        3
    }
}

/// `gain · √(3 / fan_in)` with `gain = √(2 / (1 + a²))`.
pub fn kaiming_uniform_bound(fan_in: usize, a: f64) -> f64 {
    let gain = (2.0 / (1.0 + a * a)).sqrt();
    gain * (3.0 / fan_in as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixSchedule {
    pub first: usize,
    pub later: usize,
    /// Explicit per-layer counts; takes precedence when set.
    pub overrides: Option<[usize; NUM_LAYERS]>,
}

impl FixSchedule {
    pub fn for_hidden(hidden_dim: usize) -> Self {
        FixSchedule {
            first: n_fix(1, hidden_dim),
            later: n_fix(2, hidden_dim),
            overrides: None,
        }
    }

    pub fn with_overrides(counts: [usize; NUM_LAYERS]) -> Self {
        FixSchedule {
            first: counts[0],
            later: counts[1],
            overrides: Some(counts),
        }
    }

    pub fn count(&self, layer: usize) -> usize {
        match self.overrides {
            Some(c) => c[layer - 1],
            None if layer == 1 => self.first,
            None => self.later,
        }
    }
}

fn uniform_from(key: SeedKey, bound: f64) -> f64 {
    key.stream()
        .uniform(-bound, bound)
        .expect("bound is positive and finite")
}

fn bias_vector(rep: usize, est: usize, layer: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..fan_out)
        .map(|i| uniform_from(SeedKey::bias(rep, est, layer, i), bound))
        .collect()
}

/// One dense layer with Kaiming-uniform weights and the standard bias range.
/// `layer` is the seed coordinate; it need not be 1..=4.
pub fn build_linear(
    fan_in: usize,
    fan_out: usize,
    rep: usize,
    est: usize,
    layer: usize,
) -> (DenseMatrix, Vec<f64>) {
    let bound = kaiming_uniform_bound(fan_in, KAIMING_A);
    let weight = DenseMatrix::from_fn(fan_out, fan_in, |i, j| {
        uniform_from(SeedKey::free_weight(rep, est, layer, i, j), bound)
    });
    (weight, bias_vector(rep, est, layer, fan_in, fan_out))
}

pub fn build_mlp(spec: NetSpec, rep: usize, est: usize) -> Result<Network> {
    if spec.mode != NetMode::Mlp {
        return Err(Error::InvalidArgument("build_mlp needs an MLP spec".into()));
    }
    let layers = spec
        .layer_dims()
        .iter()
        .enumerate()
        .map(|(idx, &(fan_in, fan_out))| {
            let (weight, bias) = build_linear(fan_in, fan_out, rep, est, idx + 1);
            LayerParams {
                weight,
                bias,
                mask: vec![false; fan_in * fan_out],
                frozen: Vec::new(),
            }
        })
        .collect();
    Network::from_layers(spec, layers)
}

pub fn build_wmlp(spec: NetSpec, schedule: &FixSchedule, rep: usize, est: usize) -> Result<Network> {
    if spec.mode != NetMode::Wmlp {
        return Err(Error::InvalidArgument("build_wmlp needs a WMLP spec".into()));
    }
    let mut layers = Vec::with_capacity(NUM_LAYERS);
    for (idx, &(fan_in, fan_out)) in spec.layer_dims().iter().enumerate() {
        let l = idx + 1;
        let fixed = schedule.count(l);
        if fixed > fan_in {
            return Err(Error::Construction {
                layer: l,
                n_fix: fixed,
                fan_in,
            });
        }
        let bound = kaiming_uniform_bound(fan_in, KAIMING_A);
        let mut layer = LayerParams::zeros(fan_in, fan_out);
        for i in 0..fan_out {
            let mut cols = SeedKey::mask(l, i)
                .stream()
                .sample_without_replacement(fan_in, fixed)?;
            cols.sort_unstable();
            for j in 0..fan_in {
                if cols.binary_search(&j).is_err() {
                    let w = uniform_from(SeedKey::free_weight(rep, est, l, i, j), bound);
                    layer.weight.set(i, j, w);
                }
            }
            for j in cols {
                let v = SeedKey::frozen(l, i, j).stream().standard_normal();
                layer.freeze(i, j, v);
            }
        }
        layer.bias = bias_vector(rep, est, l, fan_in, fan_out);
        layers.push(layer);
    }
    Network::from_layers(spec, layers)
}

/// Dispatch on `spec.mode`.
pub fn build_network(spec: NetSpec, schedule: &FixSchedule, rep: usize, est: usize) -> Result<Network> {
    match spec.mode {
        NetMode::Mlp => build_mlp(spec, rep, est),
        NetMode::Wmlp => build_wmlp(spec, schedule, rep, est),
    }
}
