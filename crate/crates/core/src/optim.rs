//! AdamW with decoupled weight decay and the early-stopped mini-batch loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{loss_and_grad, loss_value, Targets};
use crate::matrix::DenseMatrix;
use crate::net::{Gradients, Network};
use crate::rng::{Purpose, SeedKey};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Shuffle-seed coordinates.
    pub repetition: usize,
    pub estimator: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            weight_decay: 3e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 256,
            max_epochs: 1000,
            patience: 16,
            repetition: 0,
            estimator: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "patience, batch_size and max_epochs must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::Config(
                "learning_rate and epsilon must be > 0, weight_decay >= 0".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("betas must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn for_run(mut self, repetition: usize, estimator: usize) -> Self {
        self.repetition = repetition;
        self.estimator = estimator;
        self
    }
}

/// One parameter tensor paired with its gradient.
pub struct ParamSlot<'a> {
    pub values: &'a mut [f64],
    pub grads: &'a [f64],
    /// `true` entries are never updated.
    pub frozen: Option<&'a [bool]>,
    pub decay: bool,
}

/// Where in training a batch sits; used to key per-batch randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepCoords {
    pub epoch: usize,
    pub batch: usize,
}

/// A model the training loop can drive.
pub trait Trainable: Clone {
    type Grads;

    /// Mean loss over the batch and its gradient.
    fn batch_loss_grad(
        &self,
        x: &DenseMatrix,
        y: &Targets,
        at: StepCoords,
    ) -> Result<(f64, Self::Grads)>;

    /// Mean loss in inference mode.
    fn eval_loss(&self, x: &DenseMatrix, y: &Targets) -> Result<f64>;

    fn param_slots<'a>(&'a mut self, grads: &'a Self::Grads) -> Vec<ParamSlot<'a>>;

    fn grads_finite(grads: &Self::Grads) -> bool;

    /// Reset frozen positions to their recorded values.
    fn restore_frozen(&mut self);
}

impl Trainable for Network {
    type Grads = Gradients;

    fn batch_loss_grad(&self, x: &DenseMatrix, y: &Targets, _: StepCoords) -> Result<(f64, Gradients)> {
        let (out, cache) = self.forward(x)?;
        let (loss, dout) = loss_and_grad(&out, y)?;
        Ok((loss, self.backward(&cache, &dout)?))
    }

    fn eval_loss(&self, x: &DenseMatrix, y: &Targets) -> Result<f64> {
        loss_value(&self.predict(x)?, y)
    }

    fn param_slots<'a>(&'a mut self, grads: &'a Gradients) -> Vec<ParamSlot<'a>> {
        network_slots(self, grads)
    }

    fn grads_finite(grads: &Gradients) -> bool {
        grads.is_finite()
    }

    fn restore_frozen(&mut self) {
        Network::restore_frozen(self);
    }
}

pub(crate) fn network_slots<'a>(net: &'a mut Network, grads: &'a Gradients) -> Vec<ParamSlot<'a>> {
    let mut slots = Vec::with_capacity(net.layers.len() * 2);
    for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
        slots.push(ParamSlot {
            values: layer.weight.as_mut_slice(),
            grads: g.weight.as_slice(),
            frozen: Some(&layer.mask),
            decay: true,
        });
        slots.push(ParamSlot {
            values: &mut layer.bias,
            grads: &g.bias,
            frozen: None,
            decay: false,
        });
    }
    slots
}

#[derive(Debug, Clone, Default)]
pub struct OptimizerState {
    pub step: u64,
    /// `(m, v)` per parameter slot, allocated on first use.
    pub moments: Vec<(Vec<f64>, Vec<f64>)>,
}

/// One AdamW update. Frozen entries keep their value and zero moments; biases
/// are not decayed.
pub fn adamw_step<M: Trainable>(
    model: &mut M,
    grads: &M::Grads,
    state: &mut OptimizerState,
    cfg: &TrainConfig,
) -> Result<()> {
    if !M::grads_finite(grads) {
        return Err(Error::NumericFailure {
            epoch: 0,
            batch: state.step as usize,
            what: "non-finite gradient".into(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let lr = cfg.learning_rate;
    let decay = lr * cfg.weight_decay;
    {
        let slots = model.param_slots(grads);
        if state.moments.len() < slots.len() {
            state.moments.resize_with(slots.len(), Default::default);
        }
        for (slot, (m, v)) in slots.into_iter().zip(state.moments.iter_mut()) {
            if m.len() != slot.values.len() {
                *m = vec![0.0; slot.values.len()];
                *v = vec![0.0; slot.values.len()];
            }
            for i in 0..slot.values.len() {
                if slot.frozen.is_some_and(|f| f[i]) {
                    continue;
                }
                let g = slot.grads[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                let theta = slot.values[i];
                let mut next = theta - lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
                if slot.decay {
                    next -= decay * theta;
                }
                slot.values[i] = next;
            }
        }
    }
    model.restore_frozen();
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Wait,
    Stop,
}

/// Patience counter on a monitored loss. Improvement means strictly lower.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    epoch: usize,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            epoch: 0,
            wait: 0,
        }
    }

    pub fn observe(&mut self, loss: f64) -> StopDecision {
        self.epoch += 1;
        if loss < self.best {
            self.best = loss;
            self.best_epoch = self.epoch;
            self.wait = 0;
            StopDecision::Improved
        } else {
            self.wait += 1;
            if self.wait >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Wait
            }
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// 1-based epoch of the best loss; 0 before any improvement.
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Train/validation data for one run.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub train_x: &'a DenseMatrix,
    pub train_y: &'a Targets,
    pub val_x: &'a DenseMatrix,
    pub val_y: &'a Targets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub wall_time_s: f64,
    pub val_losses: Vec<f64>,
    /// Mean training-batch loss per epoch.
    pub train_losses: Vec<f64>,
    /// Filled in by callers that evaluate on a test split.
    pub test_metric: Option<f64>,
}

/// Mini-batch AdamW with per-epoch validation and early stopping. The
/// returned model holds the parameters of the best validation epoch.
pub fn train<M: Trainable>(mut model: M, data: TrainData<'_>, cfg: &TrainConfig) -> Result<(M, TrainReport)> {
    cfg.validate()?;
    let n = data.train_x.rows();
    if n == 0 || data.val_x.rows() == 0 {
        return Err(Error::InvalidArgument("empty train or validation split".into()));
    }
    if data.train_y.len() != n || data.val_y.len() != data.val_x.rows() {
        return Err(Error::dim("train targets", n, data.train_y.len()));
    }
    let start = Instant::now();
    let mut state = OptimizerState::default();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut val_losses = Vec::new();
    let mut train_losses = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=cfg.max_epochs {
        order.iter_mut().enumerate().for_each(|(i, v)| *v = i);
        SeedKey::new(Purpose::Shuffle)
            .with_run(cfg.repetition, cfg.estimator)
            .with_cell(epoch as u64, 0)
            .stream()
            .shuffle(&mut order);

        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let bx = data.train_x.select_rows(idx);
            let by = data.train_y.select(idx);
            let at = StepCoords { epoch, batch };
            let (loss, grads) = model.batch_loss_grad(&bx, &by, at)?;
            if !loss.is_finite() || !M::grads_finite(&grads) {
                return Err(Error::NumericFailure {
                    epoch,
                    batch,
                    what: format!("training loss {loss}"),
                });
            }
            adamw_step(&mut model, &grads, &mut state, cfg)?;
            loss_sum += loss;
            batches += 1;
        }
        train_losses.push(loss_sum / batches as f64);

        let val = model.eval_loss(data.val_x, data.val_y)?;
        if !val.is_finite() {
            return Err(Error::NumericFailure {
                epoch,
                batch: batches,
                what: format!("validation loss {val}"),
            });
        }
        val_losses.push(val);
        match stopper.observe(val) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Wait => {}
            StopDecision::Stop => break,
        }
    }

    let report = TrainReport {
        epochs_run: val_losses.len(),
        best_epoch: stopper.best_epoch(),
        best_val_loss: stopper.best(),
        wall_time_s: start.elapsed().as_secs_f64(),
        val_losses,
        train_losses,
        test_metric: None,
    };
    Ok((best, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{build_network, FixSchedule};
    use crate::net::{NetMode, NetSpec};

    #[test]
    fn adamw_single_step_matches_hand_computation() {
        let spec = NetSpec::new(1, 1, 1, NetMode::Mlp);
        let mut net = Network::zeros(spec);
        net.set_params_flat(&[1.0; 8]).unwrap();
        let mut g = Gradients::zeros(&spec);
        g.layers[0].weight.set(0, 0, 1.0);
        let cfg = TrainConfig::default();
        let mut state = OptimizerState::default();
        adamw_step(&mut net, &g, &mut state, &cfg).unwrap();
        let expected = 1.0 - 0.001 * (1.0 / (1.0 + 1e-8)) - 0.001 * 0.03;
        assert!((net.layers[0].weight.get(0, 0) - expected).abs() < 1e-15);
        assert!((expected - 0.99897).abs() < 1e-8);
        // zero gradient: decay only on weights, biases untouched
        assert!((net.layers[1].weight.get(0, 0) - (1.0 - 0.001 * 0.03)).abs() < 1e-15);
        assert_eq!(net.layers[1].bias[0], 1.0);
    }

    #[test]
    fn adamw_leaves_frozen_entries_alone() {
        let spec = NetSpec::new(2, 2, 1, NetMode::Wmlp);
        let mut net = Network::zeros(spec);
        net.set_params_flat(&vec![0.5; spec.param_count()]).unwrap();
        net.layers[0].freeze(1, 0, 0.5);
        // deliberately unmasked gradient at the frozen slot
        let mut g = Gradients::zeros(&spec);
        g.layers[0].weight.as_mut_slice().fill(3.0);
        let mut state = OptimizerState::default();
        for _ in 0..5 {
            adamw_step(&mut net, &g, &mut state, &TrainConfig::default()).unwrap();
        }
        assert_eq!(net.layers[0].weight.get(1, 0).to_bits(), 0.5f64.to_bits());
        assert_eq!(state.moments[0].0[2], 0.0);
        assert_eq!(state.moments[0].1[2], 0.0);
        assert!(net.layers[0].weight.get(0, 0) < 0.5);
    }

    #[test]
    fn adamw_rejects_non_finite_gradient() {
        let spec = NetSpec::new(1, 1, 1, NetMode::Mlp);
        let mut net = Network::zeros(spec);
        let mut g = Gradients::zeros(&spec);
        g.layers[2].bias[0] = f64::NAN;
        let err = adamw_step(&mut net, &g, &mut OptimizerState::default(), &TrainConfig::default());
        assert!(matches!(err, Err(Error::NumericFailure { .. })));
    }

    #[test]
    fn early_stopping_counts_patience() {
        let mut es = EarlyStopping::new(16);
        assert_eq!(es.observe(1.0), StopDecision::Improved);
        for e in 2..=16 {
            assert_eq!(es.observe(1.0 + e as f64 * 0.01), StopDecision::Wait);
        }
        assert_eq!(es.observe(1.0), StopDecision::Stop);
        assert_eq!(es.best_epoch(), 1);
    }

    fn linear_toy() -> (DenseMatrix, Targets, DenseMatrix, Targets) {
        let x = DenseMatrix::from_fn(200, 1, |i, _| i as f64 / 100.0 - 1.0);
        let y = DenseMatrix::from_fn(200, 1, |i, _| 2.0 * x.get(i, 0));
        let vx = DenseMatrix::from_fn(50, 1, |i, _| i as f64 / 25.0 - 1.0 + 0.01);
        let vy = DenseMatrix::from_fn(50, 1, |i, _| 2.0 * vx.get(i, 0));
        (x, Targets::Values(y), vx, Targets::Values(vy))
    }

    #[test]
    fn max_epochs_one_runs_exactly_one_epoch() {
        let (x, y, vx, vy) = linear_toy();
        let net = build_network(NetSpec::new(1, 8, 1, NetMode::Mlp), &FixSchedule::for_hidden(8), 0, 0).unwrap();
        let cfg = TrainConfig { max_epochs: 1, ..Default::default() };
        let data = TrainData { train_x: &x, train_y: &y, val_x: &vx, val_y: &vy };
        let (_, report) = train(net, data, &cfg).unwrap();
        assert_eq!(report.epochs_run, 1);
        assert_eq!(report.best_epoch, 1);
    }

    #[test]
    fn learns_linear_map() {
        let (x, y, vx, vy) = linear_toy();
        let net = build_network(NetSpec::new(1, 16, 1, NetMode::Mlp), &FixSchedule::for_hidden(16), 0, 0).unwrap();
        let cfg = TrainConfig { batch_size: 32, ..Default::default() };
        let data = TrainData { train_x: &x, train_y: &y, val_x: &vx, val_y: &vy };
        let (net, report) = train(net, data, &cfg).unwrap();
        let Targets::Values(t) = &y else { unreachable!() };
        let rmse = crate::loss::rmse(&net.predict(&x).unwrap(), t).unwrap();
        assert!(rmse < 0.05, "rmse {rmse} after {} epochs", report.epochs_run);
        assert!(report.epochs_run <= 1000);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = TrainConfig { patience: 0, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
