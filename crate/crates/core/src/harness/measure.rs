use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::InferenceReport;

/// One (instance, method) cell of a benchmark.
///
/// CSV columns appear in field order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance_id: String,
    pub method_id: String,
    pub wall_time_s: f64,
    pub final_energy: f64,
    pub labeled_fraction: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub epochs: usize,
    /// Certificate statements, `; `-separated.
    pub certificate: Option<String>,
    pub error: Option<String>,
}

impl BenchRecord {
    pub fn from_report(instance_id: &str, method_id: &str, r: &InferenceReport) -> Self {
        let certificate = (!r.certificates.is_empty())
            .then(|| r.certificates.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "));
        BenchRecord {
            instance_id: instance_id.into(),
            method_id: method_id.into(),
            wall_time_s: r.wall_time_s,
            final_energy: r.energy,
            labeled_fraction: r.labeled_fraction,
            precision: r.precision,
            recall: r.recall,
            epochs: r.epochs,
            certificate,
            error: None,
        }
    }

    pub fn failed(instance_id: &str, method_id: &str, error: String) -> Self {
        BenchRecord {
            instance_id: instance_id.into(),
            method_id: method_id.into(),
            wall_time_s: 0.0,
            final_energy: f64::NAN,
            labeled_fraction: None,
            precision: None,
            recall: None,
            epochs: 0,
            certificate: None,
            error: Some(error),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Relative energy difference `(candidate − baseline) / |baseline|`, zero when
/// both are zero.
pub fn energy_change(baseline: f64, candidate: f64) -> f64 {
    let diff = candidate - baseline;
    if diff == 0.0 {
        0.0
    } else {
        diff / baseline.abs()
    }
}

/// `(speedup, energy change)` of `candidate` over `baseline`.
pub fn measure(baseline: &BenchRecord, candidate: &BenchRecord) -> Result<(f64, f64)> {
    if baseline.instance_id != candidate.instance_id {
        return Err(Error::InstanceMismatch(baseline.instance_id.clone(), candidate.instance_id.clone()));
    }
    Ok((baseline.wall_time_s / candidate.wall_time_s, energy_change(baseline.final_energy, candidate.final_energy)))
}

/// Per-method averages against a baseline method.
///
/// `mean_*` fields average per-instance ratios; `pooled_*` fields take the
/// ratio of totals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method_id: String,
    pub instances: usize,
    pub failures: usize,
    pub mean_speedup: Option<f64>,
    pub pooled_speedup: Option<f64>,
    pub mean_energy_change: Option<f64>,
    pub pooled_energy_change: Option<f64>,
    pub mean_labeled_fraction: Option<f64>,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn aggregate(records: &[BenchRecord], baseline_method: &str) -> Vec<MethodSummary> {
    let baseline: BTreeMap<&str, &BenchRecord> = records
        .iter()
        .filter(|r| r.method_id == baseline_method && r.is_ok())
        .map(|r| (r.instance_id.as_str(), r))
        .collect();
    let mut by_method: BTreeMap<&str, Vec<&BenchRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(r.method_id.as_str()).or_default().push(r);
    }
    by_method
        .into_iter()
        .map(|(method, rs)| {
            let ok: Vec<&BenchRecord> = rs.iter().copied().filter(|r| r.is_ok()).collect();
            let paired: Vec<(&BenchRecord, &BenchRecord)> = ok
                .iter()
                .filter_map(|r| baseline.get(r.instance_id.as_str()).map(|b| (*b, *r)))
                .collect();
            let measured: Vec<(f64, f64)> = paired.iter().filter_map(|(b, c)| measure(b, c).ok()).collect();
            let (tb, tc, eb, ec) = paired.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, (b, c)| {
                (acc.0 + b.wall_time_s, acc.1 + c.wall_time_s, acc.2 + b.final_energy, acc.3 + c.final_energy)
            });
            MethodSummary {
                method_id: method.to_string(),
                instances: ok.len(),
                failures: rs.len() - ok.len(),
                mean_speedup: mean(measured.iter().map(|m| m.0)),
                pooled_speedup: (!paired.is_empty()).then(|| tb / tc),
                mean_energy_change: mean(measured.iter().map(|m| m.1)),
                pooled_energy_change: (!paired.is_empty()).then(|| energy_change(eb, ec)),
                mean_labeled_fraction: mean(ok.iter().filter_map(|r| r.labeled_fraction)),
                mean_precision: mean(ok.iter().filter_map(|r| r.precision)),
                mean_recall: mean(ok.iter().filter_map(|r| r.recall)),
            }
        })
        .collect()
}
