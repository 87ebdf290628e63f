use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion matrix and accuracies over a set of predictions.
///
/// `confusion[t][p]` counts pixels of true class `t+1` predicted as `p+1`.
/// `per_class[c]` is `None` when class `c+1` has no samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: Vec<Vec<usize>>,
    pub oa: f64,
    pub aa: f64,
    pub per_class: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    pub total: usize,
}

impl MetricsReport {
    pub fn from_predictions(truth: &[u16], predicted: &[u16], classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::dim(format!(
                "{} labels against {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t == 0 || p == 0 || t as usize > classes || p as usize > classes {
                return Err(Error::Range(format!("class pair ({t}, {p}) outside 1..={classes}")));
            }
            confusion[t as usize - 1][p as usize - 1] += 1;
        }
        Ok(Self::from_confusion(confusion))
    }

    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Self {
        let counts: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
        let total: usize = counts.iter().sum();
        let correct: usize = (0..confusion.len()).map(|i| confusion[i][i]).sum();
        let per_class: Vec<Option<f64>> = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| (counts[i] > 0).then(|| row[i] as f64 / counts[i] as f64))
            .collect();
        let present: Vec<f64> = per_class.iter().flatten().copied().collect();
        let aa = if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        let oa = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
        Self {
            confusion,
            oa,
            aa,
            per_class,
            counts,
            total,
        }
    }
}
