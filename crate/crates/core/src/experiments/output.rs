//! Plot-ready CSV tables. Floating-point fields carry 6 significant digits.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::monte_carlo::{Aggregate, SweepPoint, TrialResult};
use crate::experiments::scenario::Method;
use crate::online::StepRecord;

/// `%.6g`-style formatting.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(File::create(path)?))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `snr_db, method, mean_d, sd_d`.
pub fn write_delay_table(path: &Path, aggregates: &[Aggregate]) -> Result<()> {
    write_rows(
        path,
        &["snr_db", "method", "mean_d", "sd_d"],
        aggregates.iter().map(|a| {
            vec![sig6(a.snr_db), a.method.to_string(), sig6(a.mean_d), sig6(a.sd_d)]
        }),
    )
}

/// `snr_db, mean_d, mean_m, rmse` of the relative-entropy estimator.
pub fn write_joint_table(path: &Path, aggregates: &[Aggregate]) -> Result<()> {
    write_rows(
        path,
        &["snr_db", "mean_d", "mean_m", "rmse"],
        aggregates.iter().filter(|a| a.method == Method::Re).map(|a| {
            vec![sig6(a.snr_db), sig6(a.mean_d), sig6(a.mean_m), sig6(a.mean_rmse)]
        }),
    )
}

/// `snr_db, method, mean_m, rmse`.
pub fn write_order_table(path: &Path, aggregates: &[Aggregate]) -> Result<()> {
    write_rows(
        path,
        &["snr_db", "method", "mean_m", "rmse"],
        aggregates.iter().map(|a| {
            vec![sig6(a.snr_db), a.method.to_string(), sig6(a.mean_m), sig6(a.mean_rmse)]
        }),
    )
}

/// `N, d_star, m_star, ratio, stopped`; steps without a feasible candidate
/// leave `d_star` and `m_star` empty.
pub fn write_online_trace(path: &Path, trace: &[StepRecord]) -> Result<()> {
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    write_rows(
        path,
        &["N", "d_star", "m_star", "ratio", "stopped"],
        trace.iter().map(|r| {
            vec![
                r.n.to_string(),
                opt(r.d_star()),
                opt(r.m_star()),
                sig6(r.ratio),
                r.stopped.to_string(),
            ]
        }),
    )
}

/// Per-trial dump.
pub fn write_trials(path: &Path, trials: &[TrialResult]) -> Result<()> {
    write_rows(
        path,
        &["trial", "snr_db", "method", "d", "m", "sigma_w2_hat", "sigma_w2", "rmse"],
        trials.iter().map(|t| {
            vec![
                t.trial.to_string(),
                sig6(t.snr_db),
                t.method.to_string(),
                t.d.to_string(),
                t.m.to_string(),
                t.noise_var.map(sig6).unwrap_or_default(),
                sig6(t.true_noise_var),
                sig6(t.rmse),
            ]
        }),
    )
}

/// `N, delay_rmse, trials, low_rank_risk`.
pub fn write_delay_sweep(path: &Path, points: &[SweepPoint]) -> Result<()> {
    write_rows(
        path,
        &["N", "delay_rmse", "trials", "low_rank_risk"],
        points.iter().map(|p| {
            vec![
                p.n.to_string(),
                sig6(p.delay_rmse),
                p.trials_used.to_string(),
                p.low_rank_risk.to_string(),
            ]
        }),
    )
}

/// Generic numeric table with a header.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_rows(path, header, rows.iter().map(|r| r.iter().map(|v| sig6(*v)).collect()))
}
