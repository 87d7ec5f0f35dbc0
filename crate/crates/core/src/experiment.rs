//! Experiment grids: deep-ensemble pools and mixture-of-experts sweeps,
//! repetition aggregation, and the results table.
//!
//! Result rows follow one convention for every family. A row with `size = 1`
//! is a single trained network (deep ensembles record one per pool member,
//! in estimator order). Other rows are ensembles of `size` members or
//! mixtures of `size` experts. Relative improvement is measured per
//! repetition against the smallest size recorded for the family: the mean
//! single network for deep ensembles, the two-expert mixture for MoE/MoIE.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_dataset, prepare, synth_dataset, DatasetName, PreparedData, SynthOptions};
use crate::ensemble::DeepEnsemble;
use crate::error::{Error, Result};
use crate::init::{build_network, FixSchedule};
use crate::loss::{score, Predictions, Task};
use crate::moe::{Combine, GateKind, GateSpec, InferenceAverage, MoeModel};
use crate::net::{NetMode, NetSpec, Network};
use crate::optim::{train, TrainConfig, TrainData, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DeepEnsemble,
    Moe,
    GgMoe,
    Moie,
}

impl ExperimentKind {
    /// Combine rule and gate of the mixture kinds.
    fn mixture(self) -> Option<(Combine, GateKind)> {
        match self {
            ExperimentKind::DeepEnsemble => None,
            ExperimentKind::Moe => Some((Combine::OutputAverage, GateKind::Softmax)),
            ExperimentKind::GgMoe => Some((Combine::OutputAverage, GateKind::GumbelSoftmax)),
            ExperimentKind::Moie => Some((Combine::WeightInterpolation, GateKind::Softmax)),
        }
    }
}

/// Family label written to the results table.
pub fn family_label(kind: ExperimentKind, mode: NetMode, moie_gate: GateKind) -> String {
    let prefix = match kind {
        ExperimentKind::DeepEnsemble => return mode.label().to_owned(),
        ExperimentKind::Moe => "MoE",
        ExperimentKind::GgMoe => "GGMoE",
        ExperimentKind::Moie if moie_gate == GateKind::GumbelSoftmax => "GGMoIE",
        ExperimentKind::Moie => "MoIE",
    };
    format!("{prefix}-{}", mode.label())
}

/// Synthetic data parameters, used when `dataset` names a generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub options: SynthOptions,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 4000,
            d: 8,
            seed: 0,
            options: SynthOptions::default(),
        }
    }
}

pub const SYNTH_REGRESSION: &str = "synth-regression";
pub const SYNTH_CLASSIFICATION: &str = "synth-classification";

/// One JSON document; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// A dataset name (`churn`, `otto`, `adult`, `california`, `mnist`) or
    /// `synth-regression` / `synth-classification`.
    pub dataset: String,
    pub data_dir: PathBuf,
    pub synth: SynthConfig,
    pub kind: ExperimentKind,
    pub modes: Vec<NetMode>,
    /// Deep-ensemble widths. Mixtures use `expert_hidden`.
    pub hidden_dims: Vec<usize>,
    /// Ensemble sizes or expert counts, strictly ascending, each ≥ 2.
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub train: TrainConfig,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub split_seed: u64,
    /// When false the wall-time column is written as 0 so that result files
    /// are byte-reproducible.
    pub record_wall_time: bool,
    pub expert_hidden: usize,
    /// Frozen weights per unit for WMLP experts, per layer.
    pub expert_fix: [usize; 4],
    pub gumbel_temperature: f64,
    pub inference_average: InferenceAverage,
    pub moie_gate: GateKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: SYNTH_REGRESSION.into(),
            data_dir: PathBuf::from("data"),
            synth: SynthConfig::default(),
            kind: ExperimentKind::DeepEnsemble,
            modes: vec![NetMode::Mlp, NetMode::Wmlp],
            hidden_dims: vec![64, 128, 256],
            sizes: vec![2, 4, 8, 16, 32, 64],
            repetitions: 10,
            train: TrainConfig::default(),
            workers: 1,
            out_dir: PathBuf::from("results"),
            split_seed: 0,
            record_wall_time: true,
            expert_hidden: 64,
            expert_fix: [2, 3, 3, 3],
            gumbel_temperature: 1.0,
            inference_average: InferenceAverage::Outputs,
            moie_gate: GateKind::Softmax,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.sizes.is_empty() || self.sizes[0] < 2 {
            return bad(format!("sizes must be non-empty and >= 2, got {:?}", self.sizes));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("sizes must be strictly ascending, got {:?}", self.sizes));
        }
        if self.repetitions == 0 || self.workers == 0 {
            return bad("repetitions and workers must be >= 1".into());
        }
        if self.modes.is_empty() {
            return bad("modes must not be empty".into());
        }
        if self.kind == ExperimentKind::DeepEnsemble && (self.hidden_dims.is_empty() || self.hidden_dims.contains(&0)) {
            return bad("hidden_dims must be non-empty and positive".into());
        }
        if !(self.gumbel_temperature > 0.0) {
            return bad("gumbel_temperature must be > 0".into());
        }
        if self.kind.mixture().is_some() && self.sizes[0] != 2 {
            return bad("mixture sweeps need the two-expert baseline: sizes must start at 2".into());
        }
        if self.dataset != SYNTH_REGRESSION && self.dataset != SYNTH_CLASSIFICATION {
            self.dataset.parse::<DatasetName>()?;
        }
        self.train.validate()
    }

    /// Widths trained by this configuration.
    fn widths(&self) -> Vec<usize> {
        match self.kind {
            ExperimentKind::DeepEnsemble => self.hidden_dims.clone(),
            _ => vec![self.expert_hidden],
        }
    }

    fn gate_spec(&self, gate: GateKind) -> GateSpec {
        let mut g = match gate {
            GateKind::Softmax => GateSpec::softmax(),
            GateKind::GumbelSoftmax => GateSpec::gumbel(self.gumbel_temperature),
        };
        g.average = self.inference_average;
        g
    }
}

/// Load or generate the configured dataset and split/scale it.
pub fn load_prepared(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let ds = match cfg.dataset.as_str() {
        SYNTH_REGRESSION => synth_dataset(Task::Regression, cfg.synth.n, cfg.synth.d, cfg.synth.seed, &cfg.synth.options)?,
        SYNTH_CLASSIFICATION => {
            synth_dataset(Task::Classification, cfg.synth.n, cfg.synth.d, cfg.synth.seed, &cfg.synth.options)?
        }
        name => load_dataset(name.parse()?, &cfg.data_dir)?,
    };
    prepare(&ds, cfg.split_seed)
}

/// One line of `results.csv`; field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub dataset: String,
    pub family: String,
    pub hidden_dim: usize,
    pub size: usize,
    pub repetition: usize,
    pub metric_name: String,
    pub metric_value: f64,
    /// Deep ensembles only: metric of the parameter-averaged model.
    pub interpolated_metric_value: Option<f64>,
    pub epochs: usize,
    pub wall_time_s: f64,
}

pub const RESULT_COLUMNS: [&str; 10] = [
    "dataset",
    "family",
    "hidden_dim",
    "size",
    "repetition",
    "metric_name",
    "metric_value",
    "interpolated_metric_value",
    "epochs",
    "wall_time_s",
];

fn test_metric(pred: Predictions, data: &PreparedData) -> Result<f64> {
    score(&pred, &data.test.y)
}

fn train_data(data: &PreparedData) -> TrainData<'_> {
    TrainData {
        train_x: &data.train.x,
        train_y: &data.train.y,
        val_x: &data.val.x,
        val_y: &data.val.y,
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// Dispatch on `cfg.kind`.
pub fn run_experiment(cfg: &ExperimentConfig, data: &PreparedData) -> Result<Vec<ExperimentResult>> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::DeepEnsemble => run_deep_ensemble_experiment(cfg, data),
        _ => run_moe_experiment(cfg, data),
    }
}

struct Member {
    net: Network,
    report: TrainReport,
}

/// Per repetition, width and mode: train a pool of `max(sizes)` networks
/// (estimators `0..`), then score every member and every prefix ensemble.
pub fn run_deep_ensemble_experiment(cfg: &ExperimentConfig, data: &PreparedData) -> Result<Vec<ExperimentResult>> {
    let pool_size = *cfg.sizes.last().expect("validated");
    let metric_name = data.task.metric_name().to_owned();
    let workers = thread_pool(cfg.workers)?;
    let wall = |t: f64| if cfg.record_wall_time { t } else { 0.0 };
    let mut rows = Vec::new();

    for &hidden in &cfg.widths() {
        for &mode in &cfg.modes {
            let family = family_label(cfg.kind, mode, cfg.moie_gate);
            let spec = NetSpec::new(data.in_features(), hidden, data.out_features(), mode);
            let schedule = FixSchedule::for_hidden(hidden);
            for rep in 0..cfg.repetitions {
                let members: Vec<Member> = workers.install(|| {
                    (0..pool_size)
                        .into_par_iter()
                        .map(|est| {
                            let run = || -> Result<Member> {
                                let net = build_network(spec, &schedule, rep, est)?;
                                let (net, report) = train(net, train_data(data), &cfg.train.for_run(rep, est))?;
                                Ok(Member { net, report })
                            };
                            run().map_err(|e| {
                                e.with_context(format!(
                                    "{} {family} hidden {hidden} repetition {rep} estimator {est}",
                                    data.name
                                ))
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })?;
                let nets: Vec<Network> = members.iter().map(|m| m.net.clone()).collect();
                let row = |size: usize, metric: f64, interp: f64, epochs: usize, secs: f64| ExperimentResult {
                    dataset: data.name.clone(),
                    family: family.clone(),
                    hidden_dim: hidden,
                    size,
                    repetition: rep,
                    metric_name: metric_name.clone(),
                    metric_value: metric,
                    interpolated_metric_value: Some(interp),
                    epochs,
                    wall_time_s: wall(secs),
                };
                for m in &members {
                    let metric = test_metric(Predictions::from_output(m.net.predict(&data.test.x)?, data.task), data)?;
                    rows.push(row(1, metric, metric, m.report.epochs_run, m.report.wall_time_s));
                }
                for &size in &cfg.sizes {
                    let ens = DeepEnsemble::new(&nets[..size], data.task)?;
                    let metric = test_metric(ens.predict(&data.test.x)?, data)?;
                    let interp_net = ens.interpolated_model()?;
                    let interp = test_metric(Predictions::from_output(interp_net.predict(&data.test.x)?, data.task), data)?;
                    let used = &members[..size];
                    rows.push(row(
                        size,
                        metric,
                        interp,
                        used.iter().map(|m| m.report.epochs_run).sum(),
                        used.iter().map(|m| m.report.wall_time_s).sum(),
                    ));
                }
            }
        }
    }
    Ok(rows)
}

/// Per repetition and expert count `k ∈ sizes`: train one mixture jointly
/// (experts of width `expert_hidden`, WMLP experts with `expert_fix`).
pub fn run_moe_experiment(cfg: &ExperimentConfig, data: &PreparedData) -> Result<Vec<ExperimentResult>> {
    let (combine, default_gate) = cfg
        .kind
        .mixture()
        .ok_or_else(|| Error::Config("not a mixture experiment".into()))?;
    let gate = if cfg.kind == ExperimentKind::Moie {
        cfg.moie_gate
    } else {
        default_gate
    };
    let gate_spec = cfg.gate_spec(gate);
    let hidden = cfg.expert_hidden;
    let schedule = FixSchedule::with_overrides(cfg.expert_fix);
    let metric_name = data.task.metric_name().to_owned();
    let workers = thread_pool(cfg.workers)?;

    let mut jobs = Vec::new();
    for &mode in &cfg.modes {
        for rep in 0..cfg.repetitions {
            for &k in &cfg.sizes {
                jobs.push((mode, rep, k));
            }
        }
    }
    workers.install(|| {
        jobs.par_iter()
            .map(|&(mode, rep, k)| {
                let family = family_label(cfg.kind, mode, cfg.moie_gate);
                let run = || -> Result<ExperimentResult> {
                    let spec = NetSpec::new(data.in_features(), hidden, data.out_features(), mode);
                    let model = MoeModel::build(spec, &schedule, k, gate_spec, combine, rep, k)?;
                    let (model, report) = train(model, train_data(data), &cfg.train.for_run(rep, k))?;
                    let mut rng = model.inference_stream();
                    let metric = test_metric(model.predict(&data.test.x, &mut rng, data.task)?, data)?;
                    Ok(ExperimentResult {
                        dataset: data.name.clone(),
                        family: family.clone(),
                        hidden_dim: hidden,
                        size: k,
                        repetition: rep,
                        metric_name: metric_name.clone(),
                        metric_value: metric,
                        interpolated_metric_value: None,
                        epochs: report.epochs_run,
                        wall_time_s: if cfg.record_wall_time { report.wall_time_s } else { 0.0 },
                    })
                };
                run().map_err(|e| {
                    e.with_context(format!("{} {family} repetition {rep} experts {k}", data.name))
                })
            })
            .collect()
    })
}

/// Signed so that positive means better than `baseline`.
pub fn relative_improvement(metric_name: &str, baseline: f64, value: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "relative improvement needs a positive baseline, got {baseline}"
        )));
    }
    match metric_name {
        "accuracy" => Ok(100.0 * (value - baseline) / baseline),
        "rmse" => Ok(100.0 * (baseline - value) / baseline),
        other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
    }
}

/// Sample mean and standard deviation (n − 1 denominator, 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Across-repetition statistics for one (dataset, family, width, size).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub family: String,
    pub hidden_dim: usize,
    pub size: usize,
    pub metric_name: String,
    pub repetitions: usize,
    pub metric_mean: f64,
    pub metric_std: f64,
    pub relative_mean: f64,
    pub relative_std: f64,
    pub interpolated_mean: Option<f64>,
    pub interpolated_std: Option<f64>,
    pub interpolated_relative_mean: Option<f64>,
    pub interpolated_relative_std: Option<f64>,
}

type GroupKey = (String, String, usize);

/// Per repetition first (rows sharing a repetition are averaged), then
/// mean and sample std across repetitions. Groups keep first-seen order.
pub fn aggregate(results: &[ExperimentResult]) -> Result<Vec<AggregateRow>> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no results to aggregate".into()));
    }
    // (group, size) → repetition → (metric values, interpolated values)
    let mut order: Vec<(GroupKey, usize)> = Vec::new();
    let mut cells: HashMap<(GroupKey, usize), Vec<(usize, Vec<f64>, Vec<f64>)>> = HashMap::new();
    let mut metric: HashMap<GroupKey, String> = HashMap::new();
    for r in results {
        let g: GroupKey = (r.dataset.clone(), r.family.clone(), r.hidden_dim);
        match metric.get(&g) {
            Some(m) if *m != r.metric_name => {
                return Err(Error::InvalidArgument(format!("mixed metrics in group {g:?}")));
            }
            Some(_) => {}
            None => {
                metric.insert(g.clone(), r.metric_name.clone());
            }
        }
        let key = (g, r.size);
        let reps = cells.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            Vec::new()
        });
        let slot = match reps.iter_mut().position(|(rep, ..)| *rep == r.repetition) {
            Some(i) => &mut reps[i],
            None => {
                reps.push((r.repetition, Vec::new(), Vec::new()));
                reps.last_mut().expect("just pushed")
            }
        };
        slot.1.push(r.metric_value);
        slot.2.extend(r.interpolated_metric_value);
    }
    let per_rep = |vals: &[f64]| vals.iter().sum::<f64>() / vals.len() as f64;

    let mut out = Vec::new();
    for key in &order {
        let (g, size) = key;
        let baseline_size = order
            .iter()
            .filter(|(h, _)| h == g)
            .map(|(_, s)| *s)
            .min()
            .expect("group has a row");
        let baseline: HashMap<usize, f64> = cells[&(g.clone(), baseline_size)]
            .iter()
            .map(|(rep, v, _)| (*rep, per_rep(v)))
            .collect();
        let name = &metric[g];
        let mut metric_vals = Vec::new();
        let mut rel_vals = Vec::new();
        let mut interp_vals = Vec::new();
        let mut interp_rel = Vec::new();
        for (rep, vals, interps) in &cells[key] {
            let b = *baseline.get(rep).ok_or_else(|| {
                Error::InvalidArgument(format!("repetition {rep} of {g:?} lacks a size-{baseline_size} baseline"))
            })?;
            let v = per_rep(vals);
            metric_vals.push(v);
            rel_vals.push(relative_improvement(name, b, v)?);
            if !interps.is_empty() {
                let iv = per_rep(interps);
                interp_vals.push(iv);
                interp_rel.push(relative_improvement(name, b, iv)?);
            }
        }
        let (metric_mean, metric_std) = mean_std(&metric_vals);
        let (relative_mean, relative_std) = mean_std(&rel_vals);
        let opt = |v: &[f64]| {
            if v.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(v);
                (Some(m), Some(s))
            }
        };
        let (interpolated_mean, interpolated_std) = opt(&interp_vals);
        let (interpolated_relative_mean, interpolated_relative_std) = opt(&interp_rel);
        out.push(AggregateRow {
            dataset: g.0.clone(),
            family: g.1.clone(),
            hidden_dim: g.2,
            size: *size,
            metric_name: name.clone(),
            repetitions: metric_vals.len(),
            metric_mean,
            metric_std,
            relative_mean,
            relative_std,
            interpolated_mean,
            interpolated_std,
            interpolated_relative_mean,
            interpolated_relative_std,
        });
    }
    Ok(out)
}

pub fn write_results_csv(results: &[ExperimentResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if results.is_empty() {
        w.write_record(RESULT_COLUMNS)?;
    }
    for r in results {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ExperimentResult>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_owned()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let headers: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if headers != RESULT_COLUMNS {
        return Err(Error::Data(format!("{}: unexpected columns {headers:?}", path.display())));
    }
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(family: &str, size: usize, rep: usize, v: f64) -> ExperimentResult {
        ExperimentResult {
            dataset: "d".into(),
            family: family.into(),
            hidden_dim: 64,
            size,
            repetition: rep,
            metric_name: "accuracy".into(),
            metric_value: v,
            interpolated_metric_value: None,
            epochs: 3,
            wall_time_s: 0.5,
        }
    }

    #[test]
    fn relative_improvement_arithmetic() {
        let acc = relative_improvement("accuracy", 0.88, 0.90).unwrap();
        assert!((acc - 2.272727).abs() < 1e-5);
        let rmse = relative_improvement("rmse", 0.50, 0.45).unwrap();
        assert!((rmse - 10.0).abs() < 1e-12);
        assert_eq!(relative_improvement("rmse", 0.3, 0.3).unwrap(), 0.0);
        assert!(relative_improvement("rmse", 0.0, 0.3).is_err());
        assert!(relative_improvement("f1", 1.0, 0.3).is_err());
    }

    #[test]
    fn mean_std_hand_values() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
        assert_eq!(mean_std(&[0.7; 5]).1, 0.0);
    }

    #[test]
    fn aggregation_uses_per_repetition_baselines() {
        let rows = vec![
            result("MLP", 1, 0, 0.80),
            result("MLP", 1, 0, 0.90),
            result("MLP", 2, 0, 0.94),
            result("MLP", 1, 1, 0.50),
            result("MLP", 2, 1, 0.55),
        ];
        let agg = aggregate(&rows).unwrap();
        assert_eq!(agg.len(), 2);
        let single = &agg[0];
        assert_eq!((single.size, single.repetitions), (1, 2));
        assert!((single.metric_mean - 0.675).abs() < 1e-12);
        assert_eq!(single.relative_mean, 0.0);
        let pair = &agg[1];
        // rep 0: 0.94 vs 0.85; rep 1: 0.55 vs 0.50
        let r0 = 100.0 * (0.94 - 0.85) / 0.85;
        let r1 = 10.0;
        assert!((pair.relative_mean - (r0 + r1) / 2.0).abs() < 1e-9);
        assert!(pair.interpolated_mean.is_none());
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg.train.patience, 16);
        assert_eq!(cfg.sizes, vec![2, 4, 8, 16, 32, 64]);
        assert!(ExperimentConfig::from_json(r#"{"sizes":[4,2]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"repetitions":0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"dataset":"iris"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"kind":"moe","sizes":[4,8]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus":1}"#).is_err());
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn family_labels() {
        assert_eq!(family_label(ExperimentKind::DeepEnsemble, NetMode::Wmlp, GateKind::Softmax), "WMLP");
        assert_eq!(family_label(ExperimentKind::GgMoe, NetMode::Mlp, GateKind::Softmax), "GGMoE-MLP");
        assert_eq!(family_label(ExperimentKind::Moie, NetMode::Wmlp, GateKind::Softmax), "MoIE-WMLP");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let mut rows = vec![result("MLP", 1, 0, 0.1 + 0.2), result("MoE-WMLP", 2, 1, 1.0 / 3.0)];
        rows[0].interpolated_metric_value = Some(std::f64::consts::PI);
        write_results_csv(&rows, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&RESULT_COLUMNS.join(",")));
        assert_eq!(read_results_csv(&path).unwrap(), rows);
    }
}
