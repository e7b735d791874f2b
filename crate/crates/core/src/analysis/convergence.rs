//! Convergence tables and observed rates.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub nno: usize,
    pub ndof: usize,
    pub error: f64,
    /// Rate against the previous row; `None` on the first row.
    pub rate: Option<f64>,
}

/// `ln(e_prev / e) / ln(h_prev / h)`.
pub fn rate(h_prev: f64, e_prev: f64, h: f64, e: f64) -> f64 {
    (e_prev / e).ln() / (h_prev / h).ln()
}

/// Fills `rate` of every row from its predecessor.
pub fn fill_rates(rows: &mut [ConvergenceRow]) {
    for i in 0..rows.len() {
        rows[i].rate = (i > 0).then(|| rate(rows[i - 1].h, rows[i - 1].error, rows[i].h, rows[i].error));
    }
}

/// Least-squares slope of `ln e` against `ln h`.
pub fn fitted_rate(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len() as f64;
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn to_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("h,nno,ndof,error,rate\n");
    for r in rows {
        let rate = r.rate.map(|v| format!("{v:.6}")).unwrap_or_default();
        writeln!(s, "{:.6},{},{},{:.6e},{}", r.h, r.nno, r.ndof, r.error, rate).unwrap();
    }
    s
}

pub fn write_csv(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    std::fs::write(path, to_csv(rows))?;
    Ok(())
}

pub fn format_table(rows: &[ConvergenceRow]) -> String {
    let mut s = format!("{:>8} {:>9} {:>9} {:>12} {:>8}\n", "h", "nno", "ndof", "error", "rate");
    for r in rows {
        let rate = r.rate.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        writeln!(s, "{:>8.4} {:>9} {:>9} {:>12.4e} {:>8}", r.h, r.nno, r.ndof, r.error, rate).unwrap();
    }
    s
}
