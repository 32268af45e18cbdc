//! Side-by-side metrics for runs over identical initial conditions.

use serde::{Deserialize, Serialize};

use super::metrics::RunMetrics;
use super::scenario::ScenarioResult;
use super::HarnessError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub metrics: RunMetrics,
}

/// Pairwise differences (b - a) for the headline metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseDelta {
    pub a: String,
    pub b: String,
    pub settling_time: [Option<f64>; 3],
    pub control_tv: [f64; 3],
    pub altitude_loss: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub deltas: Vec<PairwiseDelta>,
}

/// Aligned metrics plus pairwise deltas. All runs must start from the same
/// initial state and targets.
pub fn compare_controllers(
    runs: &[(String, &ScenarioResult)],
) -> Result<ComparisonTable, HarnessError> {
    if runs.len() < 2 {
        return Err(HarnessError::Mismatch("need at least two runs".into()));
    }
    let (_, first) = &runs[0];
    for (label, run) in runs.iter().skip(1) {
        if run.initial != first.initial {
            return Err(HarnessError::Mismatch(format!(
                "run {label} starts from a different initial state"
            )));
        }
        if run.config.targets != first.config.targets {
            return Err(HarnessError::Mismatch(format!("run {label} uses different targets")));
        }
    }

    let rows: Vec<ComparisonRow> = runs
        .iter()
        .map(|(label, run)| ComparisonRow { label: label.clone(), metrics: run.metrics.clone() })
        .collect();

    let mut deltas = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (ma, mb) = (&rows[i].metrics, &rows[j].metrics);
            let settling = std::array::from_fn(|k| match (ma.settling_time[k], mb.settling_time[k])
            {
                (Some(a), Some(b)) => Some(b - a),
                _ => None,
            });
            let tv = std::array::from_fn(|k| mb.control_tv[k] - ma.control_tv[k]);
            let altitude = match (ma.altitude_loss, mb.altitude_loss) {
                (Some(a), Some(b)) => Some(b - a),
                _ => None,
            };
            deltas.push(PairwiseDelta {
                a: rows[i].label.clone(),
                b: rows[j].label.clone(),
                settling_time: settling,
                control_tv: tv,
                altitude_loss: altitude,
            });
        }
    }
    Ok(ComparisonTable { rows, deltas })
}
