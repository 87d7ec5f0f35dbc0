//! Quick invariant checks behind the `selftest` CLI command.

use crate::data::{split, split_sizes, synth_dataset, FeatureScaler, SynthOptions};
use crate::ensemble::DeepEnsemble;
use crate::error::Result;
use crate::init::{build_network, n_fix, FixSchedule};
use crate::loss::{Targets, Task};
use crate::matrix::DenseMatrix;
use crate::moe::{Combine, GateNoise, GateSpec, MoeModel};
use crate::net::{NetMode, NetSpec, Network};
use crate::optim::{train, TrainConfig, TrainData};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, result: Result<std::result::Result<(), String>>) -> CheckOutcome {
    match result {
        Ok(Ok(())) => CheckOutcome {
            name,
            passed: true,
            detail: String::new(),
        },
        Ok(Err(detail)) => CheckOutcome {
            name,
            passed: false,
            detail,
        },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn split_invariants() -> Result<std::result::Result<(), String>> {
    let mut rng = RngStream::new(17);
    for n in [10, 11, 97, 1000, 4321, 100_000] {
        let classes = 2 + rng.below(5.min(n / 3 - 1));
        let labels: Vec<usize> = (0..n).map(|i| if i < 3 * classes { i % classes } else { rng.below(classes) }).collect();
        let targets = Targets::Labels { labels: labels.clone(), classes };
        let s = split(&targets, n as u64)?;
        let sizes = split_sizes(n);
        if [s.train.len(), s.val.len(), s.test.len()] != sizes {
            return Ok(Err(format!("n={n}: sizes {:?}", sizes)));
        }
        let mut seen = vec![false; n];
        for &i in s.train.iter().chain(&s.val).chain(&s.test) {
            if std::mem::replace(&mut seen[i], true) {
                return Ok(Err(format!("n={n}: row {i} in two splits")));
            }
        }
        for c in 0..classes {
            let total = labels.iter().filter(|&&l| l == c).count() as f64;
            for (part, size) in [(&s.train, sizes[0]), (&s.val, sizes[1]), (&s.test, sizes[2])] {
                let got = part.iter().filter(|&&i| labels[i] == c).count() as f64;
                let quota = total * size as f64 / n as f64;
                if (got - quota).abs() > 1.0 + 1e-9 {
                    return Ok(Err(format!("n={n} class {c}: {got} vs quota {quota}")));
                }
            }
        }
        if split(&targets, n as u64)? != s {
            return Ok(Err(format!("n={n}: split not deterministic")));
        }
    }
    Ok(Ok(()))
}

fn scaler_invariants() -> Result<std::result::Result<(), String>> {
    let ds = synth_dataset(Task::Regression, 500, 6, 3, &SynthOptions::default())?;
    let x = DenseMatrix::from_fn(500, 6, |r, c| 7.0 * ds.features.get(r, c) + c as f64 * 100.0);
    let (_, t) = FeatureScaler::fit_transform(&x);
    let refit = FeatureScaler::fit(&t);
    for c in 0..6 {
        if refit.mean[c].abs() > 1e-9 || (refit.std[c] - 1.0).abs() > 1e-9 {
            return Ok(Err(format!("column {c}: mean {} std {}", refit.mean[c], refit.std[c])));
        }
    }
    let again = refit.transform(&t)?;
    Ok(ensure(again.max_abs_diff(&t) < 1e-9, || "refit scaling changed values".into()))
}

fn asymmetric_init() -> Result<std::result::Result<(), String>> {
    for hidden in [64, 128, 256] {
        let spec = NetSpec::new(10, hidden, 3, NetMode::Wmlp);
        let schedule = FixSchedule::for_hidden(hidden);
        let reference = build_network(spec, &schedule, 0, 0)?;
        for (l, layer) in reference.layers.iter().enumerate() {
            let want = n_fix(l + 1, hidden);
            if layer.mask_row_sums().iter().any(|&s| s != want) {
                return Ok(Err(format!("hidden {hidden} layer {}: row sums differ from {want}", l + 1)));
            }
        }
        for (rep, est) in [(0, 3), (2, 0), (5, 7)] {
            let other = build_network(spec, &schedule, rep, est)?;
            let same = reference
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.mask == b.mask && a.frozen == b.frozen);
            if !same {
                return Ok(Err(format!("hidden {hidden}: member ({rep},{est}) differs in frozen weights")));
            }
        }
    }
    Ok(Ok(()))
}

fn frozen_survive_training() -> Result<std::result::Result<(), String>> {
    let ds = synth_dataset(Task::Regression, 200, 4, 1, &SynthOptions::default())?;
    let y = ds.targets.clone();
    let spec = NetSpec::new(4, 16, 1, NetMode::Wmlp);
    let net = build_network(spec, &FixSchedule::for_hidden(16), 0, 0)?;
    let before = net.clone();
    let cfg = TrainConfig {
        max_epochs: 5,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let data = TrainData {
        train_x: &ds.features,
        train_y: &y,
        val_x: &ds.features,
        val_y: &y,
    };
    let (after, _) = train(net, data, &cfg)?;
    let same = before.layers.iter().zip(&after.layers).all(|(a, b)| {
        a.frozen
            .iter()
            .all(|f| b.weight.get(f.row, f.col).to_bits() == f.value.to_bits())
    });
    Ok(ensure(same, || "a frozen weight moved during training".into()))
}

fn mixture_invariants() -> Result<std::result::Result<(), String>> {
    let spec = NetSpec::new(3, 8, 2, NetMode::Wmlp);
    let schedule = FixSchedule::for_hidden(8);
    let x = DenseMatrix::from_fn(5, 3, |r, c| (r as f64 - 2.0) * 0.7 + c as f64 * 0.3);
    let mut rng = RngStream::new(4);
    let gumbel = MoeModel::build(spec, &schedule, 3, GateSpec::gumbel(1.0), Combine::WeightInterpolation, 0, 0)?;
    for _ in 0..10 {
        let a = gumbel.gate_forward(&x, GateNoise::Sample(&mut rng))?.alpha;
        for r in 0..a.rows() {
            let sum: f64 = a.row(r).iter().sum();
            if (sum - 1.0).abs() > 1e-12 || a.row(r).iter().any(|&v| v < 0.0) {
                return Ok(Err(format!("gate row sums to {sum}")));
            }
        }
    }
    let moe = MoeModel::build(spec, &schedule, 1, GateSpec::softmax(), Combine::OutputAverage, 0, 0)?;
    let mut moie = moe.clone();
    moie.combine = Combine::WeightInterpolation;
    let a = moe.forward(&x, GateNoise::Zero, None)?.0;
    let b = moie.forward(&x, GateNoise::Zero, None)?.0;
    Ok(ensure(a == b, || "k=1 MoE and MoIE disagree".into()))
}

fn ensemble_identity() -> Result<std::result::Result<(), String>> {
    let spec = NetSpec::new(3, 8, 2, NetMode::Mlp);
    let pool: Vec<Network> = vec![build_network(spec, &FixSchedule::for_hidden(8), 0, 0)?];
    let x = DenseMatrix::from_fn(4, 3, |r, c| r as f64 - c as f64);
    let e = DeepEnsemble::new(&pool, Task::Classification)?;
    let same_out = e.mean_output(&x)? == pool[0].predict(&x)?;
    let same_params = e.interpolated_model()? == pool[0];
    Ok(ensure(same_out && same_params, || "single-member ensemble is not the member".into()))
}

pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        outcome("stratified split: sizes, coverage, proportions, determinism", split_invariants()),
        outcome("scaler: standardized columns and refit idempotence", scaler_invariants()),
        outcome("asymmetric init: schedule row sums and shared frozen weights", asymmetric_init()),
        outcome("training leaves frozen weights bit-identical", frozen_survive_training()),
        outcome("gates sum to one; k=1 MoE equals MoIE", mixture_invariants()),
        outcome("one-member ensemble is the member", ensemble_identity()),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
