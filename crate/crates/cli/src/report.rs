//! Report files: CSV tables with fixed headers and a JSON summary.

use std::fs;
use std::path::Path;

use serde::Serialize;

use saarb_core::harness::{ReplicationRecord, TightnessRow};
use saarb_core::TailRow;

use crate::CliError;

pub const REPLICATIONS_HEADER: [&str; 10] =
    ["n", "rep", "value", "error", "theta_star", "b_event", "a_event", "x_star", "x_in_interval", "theta_distance"];
pub const TAILS_HEADER: [&str; 11] =
    ["n", "eps", "p_hat", "se", "bound", "t", "threshold", "min_n", "remainder", "status", "verdict"];
pub const TIGHTNESS_HEADER: [&str; 4] = ["n", "q50", "q90", "q99"];

/// `%.12g`: 12 significant digits, trailing zeros trimmed.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn opt_f(x: Option<f64>) -> String {
    x.map(fmt_g).unwrap_or_default()
}

fn opt_b(x: Option<bool>) -> String {
    x.map(|b| b.to_string()).unwrap_or_default()
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_replications(path: &Path, records: &[ReplicationRecord]) -> Result<(), CliError> {
    write_csv(
        path,
        &REPLICATIONS_HEADER,
        records.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.rep.to_string(),
                fmt_g(r.value),
                fmt_g(r.error),
                r.theta_star.iter().map(|&t| fmt_g(t)).collect::<Vec<_>>().join(";"),
                opt_b(r.b_event),
                opt_b(r.a_event),
                opt_f(r.x_star),
                opt_b(r.x_in_interval),
                opt_f(r.theta_distance),
            ]
        }),
    )
}

pub fn write_tails(path: &Path, rows: &[TailRow]) -> Result<(), CliError> {
    write_csv(
        path,
        &TAILS_HEADER,
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                fmt_g(r.eps),
                fmt_g(r.p_hat),
                fmt_g(r.se),
                fmt_g(r.bound.bound_value),
                fmt_g(r.bound.t),
                fmt_g(r.bound.threshold_eps),
                fmt_g(r.bound.min_n),
                fmt_g(r.bound.remainder),
                r.bound.status.as_str().into(),
                r.verdict.as_str().into(),
            ]
        }),
    )
}

pub fn write_tightness(path: &Path, rows: &[TightnessRow]) -> Result<(), CliError> {
    write_csv(
        path,
        &TIGHTNESS_HEADER,
        rows.iter().map(|r| vec![r.n.to_string(), fmt_g(r.q50), fmt_g(r.q90), fmt_g(r.q99)]),
    )
}

/// One row per `(n, ε, t)`; components follow the fixed columns in the order the bound reports them.
pub fn write_bound_grid(path: &Path, rows: &[crate::commands::BoundGridRow]) -> Result<(), CliError> {
    let comp_names: Vec<String> =
        rows.first().map(|r| r.bound.components.iter().map(|c| c.name.clone()).collect()).unwrap_or_default();
    let mut header = vec!["n", "eps", "t", "best", "status", "bound", "threshold", "min_n", "remainder"];
    header.extend(comp_names.iter().map(String::as_str));
    write_csv(
        path,
        &header,
        rows.iter().map(|r| {
            let mut v = vec![
                r.n.to_string(),
                fmt_g(r.eps),
                fmt_g(r.bound.t),
                r.best.to_string(),
                r.bound.status.as_str().into(),
                fmt_g(r.bound.bound_value),
                fmt_g(r.bound.threshold_eps),
                fmt_g(r.bound.min_n),
                fmt_g(r.bound.remainder),
            ];
            v.extend(r.bound.components.iter().map(|c| fmt_g(c.value)));
            v
        }),
    )
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
