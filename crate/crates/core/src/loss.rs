//! Losses, their gradients with respect to the network output, and the
//! evaluation metrics that go with each task.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn loss_kind(self) -> LossKind {
        match self {
            Task::Regression => LossKind::Mse,
            Task::Classification => LossKind::CrossEntropy,
        }
    }

    pub fn metric_name(self) -> &'static str {
        match self {
            Task::Regression => "rmse",
            Task::Classification => "accuracy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

/// Supervision for a batch: real targets (n×out) or class indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Values(DenseMatrix),
    Labels { labels: Vec<usize>, classes: usize },
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Values(m) => m.rows(),
            Targets::Labels { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Targets::Values(_) => Task::Regression,
            Targets::Labels { .. } => Task::Classification,
        }
    }

    /// Width of the network output this supervision expects.
    pub fn output_width(&self) -> usize {
        match self {
            Targets::Values(m) => m.cols(),
            Targets::Labels { classes, .. } => *classes,
        }
    }

    pub fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Values(m) => Targets::Values(m.select_rows(idx)),
            Targets::Labels { labels, classes } => Targets::Labels {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                classes: *classes,
            },
        }
    }
}

pub fn mse_loss(pred: &DenseMatrix, target: &DenseMatrix) -> Result<f64> {
    check_same_shape(pred, target)?;
    let n = pred.as_slice().len().max(1) as f64;
    Ok(pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

pub fn mse_grad(pred: &DenseMatrix, target: &DenseMatrix) -> Result<DenseMatrix> {
    check_same_shape(pred, target)?;
    let n = pred.as_slice().len().max(1) as f64;
    let data = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    DenseMatrix::from_vec(pred.rows(), pred.cols(), data)
}

fn check_same_shape(a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(
            "loss",
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    Ok(())
}

fn check_labels(logits: &DenseMatrix, labels: &[usize]) -> Result<()> {
    if logits.rows() != labels.len() {
        return Err(Error::dim("cross_entropy", logits.rows(), labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= logits.cols()) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            classes: logits.cols(),
        });
    }
    Ok(())
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Row-wise softmax of `row` into `out`.
pub fn softmax_into(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, v) in out.iter_mut().zip(row) {
        *o = (v - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

pub fn cross_entropy_loss(logits: &DenseMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(logits, labels)?;
    let b = labels.len().max(1) as f64;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(r, &l)| {
            let row = logits.row(r);
            log_sum_exp(row) - row[l]
        })
        .sum::<f64>()
        / b)
}

pub fn cross_entropy_grad(logits: &DenseMatrix, labels: &[usize]) -> Result<DenseMatrix> {
    check_labels(logits, labels)?;
    let b = labels.len().max(1) as f64;
    let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
    for (r, &l) in labels.iter().enumerate() {
        let out = grad.row_mut(r);
        softmax_into(logits.row(r), out);
        out[l] -= 1.0;
        out.iter_mut().for_each(|g| *g /= b);
    }
    Ok(grad)
}

pub fn loss_value(pred: &DenseMatrix, targets: &Targets) -> Result<f64> {
    match targets {
        Targets::Values(t) => mse_loss(pred, t),
        Targets::Labels { labels, .. } => cross_entropy_loss(pred, labels),
    }
}

pub fn loss_and_grad(pred: &DenseMatrix, targets: &Targets) -> Result<(f64, DenseMatrix)> {
    match targets {
        Targets::Values(t) => Ok((mse_loss(pred, t)?, mse_grad(pred, t)?)),
        Targets::Labels { labels, .. } => Ok((
            cross_entropy_loss(pred, labels)?,
            cross_entropy_grad(pred, labels)?,
        )),
    }
}

pub fn rmse(pred: &DenseMatrix, target: &DenseMatrix) -> Result<f64> {
    Ok(mse_loss(pred, target)?.sqrt())
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    assert_eq!(predicted.len(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}

/// Task-head output: real values or class indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Values(DenseMatrix),
    Classes(Vec<usize>),
}

impl Predictions {
    /// Identity for regression, row-wise argmax (lowest index on ties) for
    /// classification.
    pub fn from_output(output: DenseMatrix, task: Task) -> Self {
        match task {
            Task::Regression => Predictions::Values(output),
            Task::Classification => Predictions::Classes(output.argmax_rows()),
        }
    }
}

/// RMSE for regression, accuracy for classification.
pub fn score(pred: &Predictions, targets: &Targets) -> Result<f64> {
    match (pred, targets) {
        (Predictions::Values(p), Targets::Values(t)) => rmse(p, t),
        (Predictions::Classes(p), Targets::Labels { labels, .. }) => {
            if p.len() != labels.len() {
                return Err(Error::dim("score", labels.len(), p.len()));
            }
            Ok(accuracy(p, labels))
        }
        _ => Err(Error::InvalidArgument(
            "prediction kind does not match targets".into(),
        )),
    }
}
