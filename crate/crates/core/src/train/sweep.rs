use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::pipeline::run_experiment;
use super::trainer::TrainConfig;
use crate::data::{HsiCube, LabelMap};
use crate::error::{Error, Result};
use crate::model::ModelConfig;

/// The single hyper-parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    PatchSize,
    Views,
    Components,
    Heads,
    TrainFraction,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [
        SweepAxis::PatchSize,
        SweepAxis::Views,
        SweepAxis::Components,
        SweepAxis::Heads,
        SweepAxis::TrainFraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PatchSize => "patch_size",
            SweepAxis::Views => "views",
            SweepAxis::Components => "components",
            SweepAxis::Heads => "heads",
            SweepAxis::TrainFraction => "train_fraction",
        }
    }

    /// Copies of the base configs with this axis set to `value`.
    pub fn apply(self, model: &ModelConfig, train: &TrainConfig, value: f64) -> Result<(ModelConfig, TrainConfig)> {
        let (mut m, mut t) = (model.clone(), train.clone());
        let whole = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::config(format!("{} needs a positive integer, got {value}", self.name())))
            }
        };
        match self {
            SweepAxis::PatchSize => m.patch_size = whole()?,
            SweepAxis::Views => m.views = whole()?,
            SweepAxis::Components => m.view_components = whole()?,
            SweepAxis::Heads => m.heads = whole()?,
            SweepAxis::TrainFraction => {
                if !(value > 0.0 && value + t.val_fraction <= 1.0) {
                    return Err(Error::config(format!("train fraction {value} out of range")));
                }
                t.train_fraction = value;
            }
        }
        m.validate()?;
        Ok((m, t))
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown sweep axis {s:?}")))
    }
}

/// One line of a sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub oa: f64,
    pub aa: f64,
    pub test_samples: usize,
    pub seconds: f64,
}

/// Train and evaluate once per value, varying only `axis`.
pub fn sweep(
    cube: &HsiCube,
    labels: &LabelMap,
    model: &ModelConfig,
    train: &TrainConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    let configs = values
        .iter()
        .map(|&v| axis.apply(model, train, v))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(values.len());
    for (&value, (m, t)) in values.iter().zip(configs) {
        log::info!("sweep {axis}={value}");
        let (report, _, seconds) = run_experiment(cube, labels, &m, &t, false)?;
        rows.push(SweepRow {
            axis,
            value,
            oa: report.test.oa,
            aa: report.test.aa,
            test_samples: report.test.total,
            seconds,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_names_round_trip() {
        for a in SweepAxis::ALL {
            assert_eq!(a.name().parse::<SweepAxis>().unwrap(), a);
        }
        assert!("depth".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn apply_changes_one_field() {
        let (m, t) = (ModelConfig::default(), TrainConfig::default());
        let (m2, t2) = SweepAxis::PatchSize.apply(&m, &t, 7.0).unwrap();
        assert_eq!(m2, ModelConfig { patch_size: 7, ..m.clone() });
        assert_eq!(t2, t);
        let (_, t3) = SweepAxis::TrainFraction.apply(&m, &t, 0.15).unwrap();
        assert_eq!(t3.train_fraction, 0.15);
        assert!(SweepAxis::PatchSize.apply(&m, &t, 4.0).is_err());
        assert!(SweepAxis::Heads.apply(&m, &t, 7.0).is_err());
        assert!(SweepAxis::Views.apply(&m, &t, 2.5).is_err());
    }
}
