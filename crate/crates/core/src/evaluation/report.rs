//! JSON and CSV output of evaluation results.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::montecarlo::{BoundCheck, OutageReport};
use super::overhead::OverheadLedger;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scheme: String,
    pub outage: OutageReport,
    pub interference: Option<BoundCheck>,
    pub overhead: Option<OverheadLedger>,
    pub sigma_e: f64,
    pub seed: u64,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    /// One row per user.
    pub fn users_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "user".to_string(),
            "epsilon".into(),
            "target_sinr".into(),
            "satisfaction".into(),
            "stderr".into(),
            "sinr_at_epsilon".into(),
            "outage_throughput".into(),
            "interference_bound".into(),
            "bound_violation_rate".into(),
        ];
        if let Some(u) = self.outage.users.first() {
            header.extend(u.quantiles.iter().map(|(q, _)| format!("q{q}")));
        }
        w.write_record(&header).map_err(csv_err)?;
        for u in &self.outage.users {
            let (bound, rate) = match &self.interference {
                Some(b) => (b.bounds[u.user].to_string(), b.violation_rates[u.user].to_string()),
                None => (String::new(), String::new()),
            };
            let mut row = vec![
                u.user.to_string(),
                u.epsilon.to_string(),
                u.target.to_string(),
                u.satisfaction.to_string(),
                u.stderr.to_string(),
                u.sinr_at_epsilon.to_string(),
                u.outage_throughput.to_string(),
                bound,
                rate,
            ];
            row.extend(u.quantiles.iter().map(|(_, v)| v.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        finish(w)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Equal-width bin counts over `[lo, hi]`; values outside are clamped into the end bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(Error::Config(format!("bad histogram range [{lo}, {hi}] with {bins} bins")));
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0; bins];
        for v in values {
            let i = ((v - lo) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
            counts[i] += 1;
        }
        Ok(Self {
            edges: (0..=bins).map(|i| lo + width * i as f64).collect(),
            counts,
        })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["lower", "upper", "count"]).map_err(csv_err)?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([self.edges[i].to_string(), self.edges[i + 1].to_string(), c.to_string()])
                .map_err(csv_err)?;
        }
        finish(w)
    }
}
