//! Central finite-difference checks of the analytic gradients.
//!
//! The numeric side only calls forward passes and loss values; it never
//! touches backward code. Used by the test suites and the `gradcheck` CLI
//! command.

use crate::error::Result;
use crate::init::{build_network, FixSchedule};
use crate::loss::{loss_and_grad, loss_value, Targets};
use crate::matrix::DenseMatrix;
use crate::moe::{Combine, GateKind, GateNoise, GateSpec, MoeModel};
use crate::net::{NetMode, NetSpec, Network};
use crate::rng::RngStream;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOLERANCE: f64 = 1e-4;
/// Denominator floor of the relative error, per unit of loss. Central
/// differences carry a rounding error of about `ε·|L|/h ≈ 2e-11·|L|`, so
/// entries whose true gradient is below `1e-6·max(1, |L|)` are judged on
/// absolute error instead.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64, loss: f64) -> f64 {
    let floor = REL_FLOOR * loss.abs().max(1.0);
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    /// Largest |analytic| over frozen positions (must be exactly 0).
    pub frozen_max_abs: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < REL_TOLERANCE && self.frozen_max_abs == 0.0
    }
}

fn compare(
    analytic: &[f64],
    frozen: &[bool],
    params: &[f64],
    mut loss_at: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<GradCheckReport> {
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        worst_index: 0,
        frozen_max_abs: 0.0,
    };
    let base = loss_at(params)?;
    let mut p = params.to_vec();
    for i in 0..params.len() {
        if frozen[i] {
            report.frozen_max_abs = report.frozen_max_abs.max(analytic[i].abs());
            continue;
        }
        p[i] = params[i] + FD_STEP;
        let up = loss_at(&p)?;
        p[i] = params[i] - FD_STEP;
        let down = loss_at(&p)?;
        p[i] = params[i];
        let numeric = (up - down) / (2.0 * FD_STEP);
        let err = relative_error(analytic[i], numeric, base);
        if err > report.max_rel_err {
            report.max_rel_err = err;
            report.worst_index = i;
        }
        report.checked += 1;
    }
    Ok(report)
}

pub fn check_network(net: &Network, x: &DenseMatrix, targets: &Targets) -> Result<GradCheckReport> {
    let (out, cache) = net.forward(x)?;
    let (_, dout) = loss_and_grad(&out, targets)?;
    let analytic = net.backward(&cache, &dout)?.flat();
    let mut probe = net.clone();
    compare(&analytic, &net.frozen_mask_flat(), &net.params_flat(), |p| {
        probe.set_params_flat(p)?;
        loss_value(&probe.predict(x)?, targets)
    })
}

/// `noise` fixes the Gumbel perturbation so the loss is deterministic.
pub fn check_moe(
    model: &MoeModel,
    x: &DenseMatrix,
    targets: &Targets,
    noise: &DenseMatrix,
) -> Result<GradCheckReport> {
    let (out, cache) = model.forward(x, GateNoise::Fixed(noise), None)?;
    let (_, dout) = loss_and_grad(&out, targets)?;
    let analytic = model.backward(&cache, &dout)?.flat();
    let mut probe = model.clone();
    compare(&analytic, &model.frozen_mask_flat(), &model.params_flat(), |p| {
        probe.set_params_flat(p)?;
        probe.restore_frozen_values();
        loss_value(&probe.forward(x, GateNoise::Fixed(noise), None)?.0, targets)
    })
}

/// A random small network problem: dims ≤ 8, batch ≤ 8.
#[derive(Debug, Clone)]
pub struct NetCase {
    pub net: Network,
    pub x: DenseMatrix,
    pub targets: Targets,
}

fn random_inputs(rng: &mut RngStream, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| 1.5 * rng.standard_normal())
}

fn random_targets(rng: &mut RngStream, rows: usize, out: usize, classify: bool) -> Targets {
    if classify {
        Targets::Labels {
            labels: (0..rows).map(|_| rng.below(out)).collect(),
            classes: out,
        }
    } else {
        Targets::Values(DenseMatrix::from_fn(rows, out, |_, _| rng.standard_normal()))
    }
}

/// Random configuration drawn from `seed`. Parameters are
/// re-drawn from N(0, 0.5²) so hidden units sit in GeLU's curved region.
pub fn random_net_case(seed: u64, mode: NetMode, classify: bool) -> Result<NetCase> {
    let mut rng = RngStream::new(seed);
    let in_f = 2 + rng.below(7);
    let hidden = 3 + rng.below(6);
    let out = if classify { 2 + rng.below(7) } else { 1 + rng.below(8) };
    let batch = 1 + rng.below(8);
    let spec = NetSpec::new(in_f, hidden, out, mode);
    let mut net = build_network(spec, &FixSchedule::for_hidden(hidden), rng.below(10), rng.below(10))?;
    let flat: Vec<f64> = (0..net.param_count())
        .map(|_| 0.5 * rng.standard_normal())
        .collect();
    net.set_params_flat(&flat)?;
    net.restore_frozen();
    let x = random_inputs(&mut rng, batch, in_f);
    let targets = random_targets(&mut rng, batch, out, classify);
    Ok(NetCase { net, x, targets })
}

#[derive(Debug, Clone)]
pub struct MoeCase {
    pub model: MoeModel,
    pub x: DenseMatrix,
    pub targets: Targets,
    pub noise: DenseMatrix,
}

/// Random mixture with dims ≤ 4 and k ∈ {2, 3}.
pub fn random_moe_case(
    seed: u64,
    mode: NetMode,
    combine: Combine,
    gate: GateKind,
    classify: bool,
) -> Result<MoeCase> {
    let mut rng = RngStream::new(seed);
    let in_f = 2 + rng.below(3);
    let hidden = 3 + rng.below(2);
    let out = if classify { 2 + rng.below(3) } else { 1 + rng.below(4) };
    let batch = 1 + rng.below(4);
    let k = 2 + rng.below(2);
    let spec = NetSpec::new(in_f, hidden, out, mode);
    let gate_spec = match gate {
        GateKind::Softmax => GateSpec::softmax(),
        GateKind::GumbelSoftmax => GateSpec::gumbel(0.5 + rng.next_f64()),
    };
    let mut model = MoeModel::build(
        spec,
        &FixSchedule::for_hidden(hidden),
        k,
        gate_spec,
        combine,
        rng.below(10),
        0,
    )?;
    let n = model.params_flat().len();
    let flat: Vec<f64> = (0..n).map(|_| 0.5 * rng.standard_normal()).collect();
    model.set_params_flat(&flat)?;
    model.restore_frozen_values();
    let x = random_inputs(&mut rng, batch, in_f);
    let targets = random_targets(&mut rng, batch, out, classify);
    let noise = DenseMatrix::from_fn(batch, k, |_, _| rng.gumbel());
    Ok(MoeCase {
        model,
        x,
        targets,
        noise,
    })
}

/// `cases` network configurations cycling through both modes and both losses.
pub fn network_suite(cases: u64) -> Result<Vec<(String, GradCheckReport)>> {
    (0..cases)
        .map(|seed| {
            let mode = if seed % 2 == 0 { NetMode::Mlp } else { NetMode::Wmlp };
            let classify = (seed / 2) % 2 == 1;
            let c = random_net_case(seed, mode, classify)?;
            let label = format!(
                "net seed {seed} {} {}",
                mode.label(),
                if classify { "cross-entropy" } else { "mse" }
            );
            Ok((label, check_network(&c.net, &c.x, &c.targets)?))
        })
        .collect()
}

/// Every (combine, gate, expert mode) triple, `per_combo` seeds each.
pub fn moe_suite(per_combo: u64) -> Result<Vec<(String, GradCheckReport)>> {
    let mut out = Vec::new();
    for combine in [Combine::OutputAverage, Combine::WeightInterpolation] {
        for gate in [GateKind::Softmax, GateKind::GumbelSoftmax] {
            for mode in [NetMode::Mlp, NetMode::Wmlp] {
                for seed in 0..per_combo {
                    let classify = seed % 2 == 1;
                    let c = random_moe_case(seed, mode, combine, gate, classify)?;
                    let label = format!(
                        "moe seed {seed} {combine:?} {gate:?} {} k={}",
                        mode.label(),
                        c.model.k()
                    );
                    out.push((label, check_moe(&c.model, &c.x, &c.targets, &c.noise)?));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn network_cases_pass() {
        for seed in 0..8 {
            for mode in [NetMode::Mlp, NetMode::Wmlp] {
                for classify in [false, true] {
                    let c = random_net_case(seed, mode, classify).unwrap();
                    let r = check_network(&c.net, &c.x, &c.targets).unwrap();
                    assert!(r.passed(), "seed {seed} {mode:?} {classify}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn moe_cases_pass() {
        for seed in 0..4 {
            for combine in [Combine::OutputAverage, Combine::WeightInterpolation] {
                for gate in [GateKind::Softmax, GateKind::GumbelSoftmax] {
                    for mode in [NetMode::Mlp, NetMode::Wmlp] {
                        let c = random_moe_case(seed, mode, combine, gate, seed % 2 == 0).unwrap();
                        let r = check_moe(&c.model, &c.x, &c.targets, &c.noise).unwrap();
                        assert!(r.passed(), "seed {seed} {combine:?} {gate:?} {mode:?}: {r:?}");
                    }
                }
            }
        }
    }
}
