use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eval::{DepthMetrics, ScaleMode};

use super::IoError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerImageMetrics {
    pub name: String,
    #[serde(flatten)]
    pub metrics: DepthMetrics,
}

/// Depth-evaluation report: per-image records plus the aggregate block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scale_mode: ScaleMode,
    pub units: String,
    pub per_image: Vec<PerImageMetrics>,
    pub aggregate: DepthMetrics,
}

pub fn write_metrics_json(path: &Path, report: &MetricsReport) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(report).expect("report serialize");
    std::fs::write(path, text + "\n").map_err(|e| IoError::file(path, e))
}

/// CSV export, one row per image in table column order:
/// Abs Rel, Sq Rel, RMSE, RMSE_log, delta1, delta2, delta3.
pub fn write_metrics_csv(path: &Path, report: &MetricsReport) -> Result<(), IoError> {
    let mut out = Vec::new();
    writeln!(
        out,
        "name,abs_rel,sq_rel,rmse,rmse_log,delta1,delta2,delta3,n_pixels"
    )
    .unwrap();
    let mut row = |name: &str, m: &DepthMetrics| {
        writeln!(
            out,
            "{name},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{}",
            m.abs_rel, m.sq_rel, m.rmse, m.rmse_log, m.delta1, m.delta2, m.delta3, m.n_pixels
        )
        .unwrap();
    };
    for rec in &report.per_image {
        row(&rec.name, &rec.metrics);
    }
    row("aggregate", &report.aggregate);
    std::fs::write(path, out).map_err(|e| IoError::file(path, e))
}
