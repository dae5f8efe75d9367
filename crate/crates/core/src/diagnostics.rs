//! Per-record measurements of a run and their delimited-text tables.

use std::fmt::Write as _;

/// One row of the geodesic diagnostics table.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub energy: f64,
    pub energy_drift_rel: f64,
    pub det_min: f64,
    pub det_max: f64,
    pub div_u_norm: f64,
    pub sobolev_norm_u: f64,
    pub strategy: String,
    pub dt: f64,
}

pub const DIAGNOSTICS_HEADER: &str =
    "time\tenergy\tenergy_drift_rel\tdet_min\tdet_max\tdiv_u_norm\tsobolev_norm_u\tstrategy\tdt";

/// Writes records as a tab-separated table with 17 significant digits.
pub fn diagnostics_table(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            num(r.time),
            num(r.energy),
            num(r.energy_drift_rel),
            num(r.det_min),
            num(r.det_max),
            num(r.div_u_norm),
            num(r.sobolev_norm_u),
            r.strategy,
            num(r.dt)
        );
    }
    out
}

/// Full-precision decimal rendering used by every numeric table.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Relative change `|x - x0| / |x0|`, or the absolute change when `x0 == 0`.
pub fn relative_drift(x: f64, x0: f64) -> f64 {
    if x0 == 0.0 {
        (x - x0).abs()
    } else {
        ((x - x0) / x0).abs()
    }
}

/// Generic tab-separated table from a header and rows of numbers.
pub fn numeric_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| num(*v)).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}
