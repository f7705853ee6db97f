//! Error metrics over paired predicted/actual series.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Mae,
    Mse,
    Rmse,
    Rmsle,
    Maxe,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Mae,
        MetricKind::Mse,
        MetricKind::Rmse,
        MetricKind::Rmsle,
        MetricKind::Maxe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Mae => "mae",
            MetricKind::Mse => "mse",
            MetricKind::Rmse => "rmse",
            MetricKind::Rmsle => "rmsle",
            MetricKind::Maxe => "maxe",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidInput(format!("unknown metric {s:?}")))
    }
}

/// Per-point label carried alongside a pressure pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointLabel {
    pub temperature: f64,
    pub z_co2: f64,
    pub kind: String,
}

/// Predicted and actual values, in MPa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSeries {
    pub predicted: Vec<f64>,
    pub actual: Vec<f64>,
    pub labels: Option<Vec<PointLabel>>,
}

impl PairedSeries {
    pub fn new(predicted: Vec<f64>, actual: Vec<f64>) -> Result<Self> {
        let s = PairedSeries {
            predicted,
            actual,
            labels: None,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.predicted.len() != self.actual.len() {
            return Err(Error::InvalidInput(format!(
                "series lengths differ: {} predicted vs {} actual",
                self.predicted.len(),
                self.actual.len()
            )));
        }
        if self.predicted.is_empty() {
            return Err(Error::InvalidInput("series are empty".into()));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.predicted.len() {
                return Err(Error::InvalidInput("label count differs from series length".into()));
            }
        }
        let bad = self
            .predicted
            .iter()
            .chain(&self.actual)
            .position(|v| !v.is_finite());
        if let Some(i) = bad {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at index {}",
                i % self.predicted.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub rmsle: f64,
    pub maxe: f64,
    pub unit: String,
}

impl MetricReport {
    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Mae => self.mae,
            MetricKind::Mse => self.mse,
            MetricKind::Rmse => self.rmse,
            MetricKind::Rmsle => self.rmsle,
            MetricKind::Maxe => self.maxe,
        }
    }

    /// Values rescaled for a shared radar chart: MSE ÷ 10, RMSLE × 10.
    pub fn spider_scaled(&self) -> [(MetricKind, f64); 5] {
        [
            (MetricKind::Mae, self.mae),
            (MetricKind::Mse, self.mse / 10.0),
            (MetricKind::Rmse, self.rmse),
            (MetricKind::Rmsle, self.rmsle * 10.0),
            (MetricKind::Maxe, self.maxe),
        ]
    }
}

/// All five metrics. RMSLE uses the natural logarithm.
pub fn evaluate(s: &PairedSeries) -> Result<MetricReport> {
    s.validate()?;
    for (i, (p, a)) in s.predicted.iter().zip(&s.actual).enumerate() {
        if *p <= -1.0 || *a <= -1.0 {
            return Err(Error::Domain(format!(
                "RMSLE undefined at index {i}: predicted {p}, actual {a} (both must exceed -1)"
            )));
        }
    }
    let n = s.predicted.len() as f64;
    let diffs = s.predicted.iter().zip(&s.actual).map(|(p, a)| p - a);
    let mae = diffs.clone().map(f64::abs).sum::<f64>() / n;
    let mse = diffs.clone().map(|d| d * d).sum::<f64>() / n;
    let maxe = diffs.map(f64::abs).fold(0.0, f64::max);
    let msle = s
        .predicted
        .iter()
        .zip(&s.actual)
        .map(|(p, a)| (p.ln_1p() - a.ln_1p()).powi(2))
        .sum::<f64>()
        / n;
    Ok(MetricReport {
        mae,
        mse,
        rmse: mse.sqrt(),
        rmsle: msle.sqrt(),
        maxe,
        unit: "MPa".to_string(),
    })
}
