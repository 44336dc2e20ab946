use std::io::Write;

use crate::diagnostics::MetricsLog;
use crate::error::Result;

use super::experiment::ComparisonSummary;

pub const METRICS_HEADER: &str = "iter,opt_gap,consensus_err,grad_norm,tracking_drift,lyapunov";
pub const SUMMARY_HEADER: &str = "algorithm,epsilon,iterations_to_target,final_gap,rate,r_squared";

/// 17 significant digits, enough to round-trip any f64.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_metrics_csv<W: Write>(log: &MetricsLog, mut out: W) -> Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in &log.records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iteration,
            fmt_f64(r.opt_gap),
            fmt_f64(r.consensus_err),
            fmt_f64(r.grad_norm),
            fmt_f64(r.tracking_drift),
            fmt_f64(r.lyapunov)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(summary: &ComparisonSummary, mut out: W) -> Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for row in &summary.rows {
        let iters = row
            .iterations_to_target
            .map_or_else(|| "not-reached".to_string(), |k| k.to_string());
        let (rate, r2) = row
            .rate
            .map_or(("NaN".to_string(), "NaN".to_string()), |r| (fmt_f64(r.rate), fmt_f64(r.r_squared)));
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.algorithm,
            fmt_f64(row.epsilon),
            iters,
            fmt_f64(row.final_gap),
            rate,
            r2
        )?;
    }
    out.flush()?;
    Ok(())
}
