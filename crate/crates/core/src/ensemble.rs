//! Deep ensembles: output/logit averaging and the weight-averaged model.

use crate::error::{Error, Result};
use crate::loss::{Predictions, Task};
use crate::matrix::DenseMatrix;
use crate::net::{interpolate_params, Network};

/// A borrowed set of trained members sharing one architecture.
#[derive(Debug, Clone, Copy)]
pub struct DeepEnsemble<'a> {
    members: &'a [Network],
    task: Task,
}

impl<'a> DeepEnsemble<'a> {
    pub fn new(members: &'a [Network], task: Task) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
        for m in &members[1..] {
            if m.spec != first.spec {
                return Err(Error::IncompatibleModels(format!(
                    "member spec {:?} differs from {:?}",
                    m.spec, first.spec
                )));
            }
            first.check_compatible(m)?;
            for (a, b) in first.layers.iter().zip(&m.layers) {
                if a.frozen != b.frozen {
                    return Err(Error::IncompatibleModels(
                        "members disagree on frozen values".into(),
                    ));
                }
            }
        }
        Ok(DeepEnsemble { members, task })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &'a [Network] {
        self.members
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Elementwise mean of member outputs (raw logits for classification).
    pub fn mean_output(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut sum = self.members[0].predict(x)?;
        for m in &self.members[1..] {
            sum.axpy(1.0, &m.predict(x)?);
        }
        sum.scale(1.0 / self.members.len() as f64);
        Ok(sum)
    }

    /// Mean output for regression; mean logits then argmax for classification.
    pub fn predict(&self, x: &DenseMatrix) -> Result<Predictions> {
        Ok(Predictions::from_output(self.mean_output(x)?, self.task))
    }

    /// The single network whose parameters are the uniform member average.
    pub fn interpolated_model(&self) -> Result<Network> {
        let sets: Vec<&Network> = self.members.iter().collect();
        let w = vec![1.0 / sets.len() as f64; sets.len()];
        interpolate_params(&sets, &w)
    }
}

/// Prefix ensembles: size `s` uses pool members `[0, s)`.
pub fn subsets_for_sizes<'a>(
    pool: &'a [Network],
    sizes: &[usize],
    task: Task,
) -> Result<Vec<DeepEnsemble<'a>>> {
    sizes
        .iter()
        .map(|&s| {
            if s == 0 || s > pool.len() {
                return Err(Error::InvalidArgument(format!(
                    "ensemble size {s} not available from a pool of {}",
                    pool.len()
                )));
            }
            DeepEnsemble::new(&pool[..s], task)
        })
        .collect()
}
