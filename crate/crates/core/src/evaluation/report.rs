//! Stable CSV / JSON layouts for downstream plotting.
//!
//! * calibration grid: `train_gamma,eval_<Γ_1>,…,eval_<Γ_K>`, one row per
//!   training Γ;
//! * regret curves: long format `method,gamma,rep,regret`;
//! * odds-ratio audit: one column `drop_<name>` per dropped covariate, one
//!   row per unit;
//! * summaries: JSON array of `{method, gamma, mean_regret, stderr, n_reps}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::CalibrationMatrix;
use crate::error::{Error, Result};

pub fn write_calibration_csv<W: Write>(matrix: &CalibrationMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["train_gamma".to_string()];
    header.extend(matrix.gammas.iter().map(|g| format!("eval_{g}")));
    w.write_record(&header)?;
    for (g, row) in matrix.gammas.iter().zip(&matrix.values) {
        let mut rec = vec![g.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_odds_ratio_csv<W: Write>(columns: &[String], ratios: &[Vec<f64>], out: W) -> Result<()> {
    if columns.len() != ratios.len() {
        return Err(Error::domain("one column name per audited covariate required"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns.iter().map(|c| format!("drop_{c}")))?;
    let n = ratios.first().map_or(0, Vec::len);
    for i in 0..n {
        w.write_record(ratios.iter().map(|col| col[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Per-replication regret of one method along a Γ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub method: String,
    pub gammas: Vec<f64>,
    /// `values[rep][k]`: regret in replication `rep` at `gammas[k]`.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSummary {
    pub method: String,
    pub gamma: f64,
    pub mean_regret: f64,
    /// Standard error of the mean across replications (0 for one rep).
    pub stderr: f64,
    pub n_reps: usize,
}

impl RegretCurve {
    pub fn summaries(&self) -> Vec<RegretSummary> {
        let reps = self.values.len();
        (0..self.gammas.len())
            .map(|k| {
                let col: Vec<f64> = self.values.iter().map(|row| row[k]).collect();
                let mean = col.iter().sum::<f64>() / reps.max(1) as f64;
                let stderr = if reps > 1 {
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
                    (var / reps as f64).sqrt()
                } else {
                    0.0
                };
                RegretSummary {
                    method: self.method.clone(),
                    gamma: self.gammas[k],
                    mean_regret: mean,
                    stderr,
                    n_reps: reps,
                }
            })
            .collect()
    }
}

pub fn write_regret_curves_csv<W: Write>(curves: &[RegretCurve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "gamma", "rep", "regret"])?;
    for c in curves {
        for (rep, row) in c.values.iter().enumerate() {
            for (g, v) in c.gammas.iter().zip(row) {
                w.write_record([c.method.clone(), g.to_string(), rep.to_string(), v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
