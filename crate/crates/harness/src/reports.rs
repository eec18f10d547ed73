//! CSV and JSON writers. CSV for curves (diff-able, plot-ready), JSON
//! for structured results; every CLI subcommand can emit both.

use std::fmt::Write as _;
use std::path::Path;

use feedbacklab::channel::Transcript;
use feedbacklab::mac_bounds::RateRegion;
use feedbacklab::{Error, Result};
use serde::Serialize;

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Parameter(format!("cannot write {}: {e}", path.display()))
}

/// One row of a single-user bound curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurveRow {
    pub n: u64,
    pub lower: f64,
    pub upper: f64,
    pub lower_per_n: f64,
    pub upper_per_n: f64,
    pub eps_capacity: f64,
}

/// Columns: `n,lower,upper,lower_per_n,upper_per_n,eps_capacity`
/// (log-message-size bounds; `upper` is empty where vacuous).
pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from("n,lower,upper,lower_per_n,upper_per_n,eps_capacity\n");
    for r in rows {
        let (up, up_n) = if r.upper.is_finite() {
            (format!("{:.9}", r.upper), format!("{:.9}", r.upper_per_n))
        } else {
            (String::new(), String::new())
        };
        let _ = writeln!(
            s,
            "{},{:.9},{},{:.9},{},{:.9}",
            r.n, r.lower, up, r.lower_per_n, up_n, r.eps_capacity
        );
    }
    s
}

/// Columns: `rho,r1_max,r2_max,sum_max`, one row per grid correlation
/// (the sum-splitting correlation is always among them).
pub fn region_csv(region: &RateRegion) -> String {
    let mut s = String::from("rho,r1_max,r2_max,sum_max\n");
    for p in &region.pentagons {
        let _ = writeln!(s, "{:.12},{:.12},{:.12},{:.12}", p.rho, p.r1_max, p.r2_max, p.sum_max);
    }
    s
}

/// Columns: `r1,r2` along the outer boundary, ascending in `r1`.
pub fn boundary_csv(region: &RateRegion) -> String {
    let mut s = String::from("r1,r2\n");
    for &(r1, r2) in &region.boundary {
        let _ = writeln!(s, "{r1:.12},{r2:.12}");
    }
    s
}

/// Columns: `trial,k,x1,x2,z,y`; `x2` is empty for single-user codes.
pub fn transcript_csv(transcripts: &[Transcript]) -> String {
    let mut s = String::from("trial,k,x1,x2,z,y\n");
    for (trial, tr) in transcripts.iter().enumerate() {
        for k in 0..tr.y.len() {
            let x2 = tr
                .x
                .get(1)
                .map(|x| format!("{:.12}", x[k]))
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "{trial},{k},{:.12},{x2},{:.12},{:.12}",
                tr.x[0][k], tr.z[k], tr.y[k]
            );
        }
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Pretty-printed JSON mirror of a result payload.
pub fn write_json<T: Serialize>(path: &Path, payload: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(payload)
        .map_err(|e| Error::Parameter(format!("serialization failed: {e}")))?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}
