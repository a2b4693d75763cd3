use serde::{Deserialize, Serialize};

use crate::failure::{Failure, Outcome};
use crate::provenance::Provenance;
use crate::stages::Evaluation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scheme: String,
    /// Restriction level the precoder was designed for.
    pub gamma: Option<f64>,
    pub achieved_gamma: f64,
    pub min_satisfaction: f64,
    pub mean_outage_throughput: f64,
    pub min_outage_throughput: f64,
    pub tightness_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub provenance: Provenance,
    pub scenario_hash: String,
    pub draws: usize,
    pub draw_seed: u64,
    pub rows: Vec<ComparisonRow>,
}

/// One row per evaluation; all of them must share the scenario and draws.
pub fn compare_report(evals: &[Evaluation], plan: Option<&str>) -> Outcome<Comparison> {
    let first = evals.first().ok_or_else(|| Failure::config("nothing to compare"))?;
    for e in &evals[1..] {
        if e.scenario_hash != first.scenario_hash {
            return Err(Failure::config(format!(
                "mismatched scenarios: '{}' used {}, '{}' used {}",
                first.scheme, first.scenario_hash, e.scheme, e.scenario_hash
            )));
        }
        if (e.draw_seed, e.draws) != (first.draw_seed, first.draws) {
            return Err(Failure::config(format!(
                "mismatched draws: '{}' has seed {} x {}, '{}' has seed {} x {}",
                first.scheme, first.draw_seed, first.draws, e.scheme, e.draw_seed, e.draws
            )));
        }
    }
    let rows = evals
        .iter()
        .map(|e| {
            let tp: Vec<f64> = e.report.outage.users.iter().map(|u| u.outage_throughput).collect();
            ComparisonRow {
                scheme: e.scheme.clone(),
                gamma: e.design_gamma,
                achieved_gamma: e.achieved_gamma,
                min_satisfaction: e.report.outage.min_satisfaction,
                mean_outage_throughput: tp.iter().sum::<f64>() / tp.len() as f64,
                min_outage_throughput: tp.iter().copied().fold(f64::INFINITY, f64::min),
                tightness_residual: e.tightness_residual,
            }
        })
        .collect();
    let mut prov = Provenance::new("compare", &(), Some(first.draw_seed))?.plan(plan);
    for e in evals {
        prov = prov.input(&e.scheme, &crate::provenance::json_hash(e)?);
    }
    Ok(Comparison {
        provenance: prov,
        scenario_hash: first.scenario_hash.clone(),
        draws: first.draws,
        draw_seed: first.draw_seed,
        rows,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into())
}

impl Comparison {
    pub fn to_csv(&self) -> Outcome<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Failure::config(e.to_string());
        w.write_record([
            "scheme",
            "gamma",
            "achieved_gamma",
            "min_satisfaction",
            "mean_outage_throughput",
            "min_outage_throughput",
            "tightness_residual",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.scheme.clone(),
                r.gamma.map(|v| v.to_string()).unwrap_or_default(),
                r.achieved_gamma.to_string(),
                r.min_satisfaction.to_string(),
                r.mean_outage_throughput.to_string(),
                r.min_outage_throughput.to_string(),
                r.tightness_residual.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Failure::config(e.to_string()))
    }

    /// Fixed-width table for the terminal.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<20} {:>13} {:>13} {:>9} {:>10} {:>10} {:>10}\n",
            "scheme", "gamma", "achieved", "min sat", "mean tput", "min tput", "tightness"
        );
        for r in &self.rows {
            out += &format!(
                "{:<20} {:>13} {:>13.6e} {:>9.4} {:>10.4} {:>10.4} {:>10}\n",
                r.scheme,
                opt(r.gamma),
                r.achieved_gamma,
                r.min_satisfaction,
                r.mean_outage_throughput,
                r.min_outage_throughput,
                r.tightness_residual.map(|v| format!("{v:.1e}")).unwrap_or_else(|| "-".into())
            );
        }
        out
    }
}
