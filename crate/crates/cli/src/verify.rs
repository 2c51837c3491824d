//! Batch numeric self-checks against independent oracles.

use std::f64::consts::{E, LN_2};

use rand::Rng;
use serde::Serialize;

use saarb_core::bounds::eta_threshold;
use saarb_core::dist::stream_rng;
use saarb_core::entropy::{
    entropy_integral_lhs, entropy_integral_upper, j_hoelder, j_numeric, j_pl, vc_covering_bound, vc_log_covering,
    vc_majorant,
};
use saarb_core::goal::check_envelope_domination;
use saarb_core::problems;
use saarb_core::risk::{apply, avar_closed_form, mean_upper_semideviation};
use saarb_core::{EmpiricalDistribution, PhiFamily, RiskFunctional, SemideviationParams};

use crate::CliError;

pub const CHECKS: [&str; 7] = [
    "integral_majorant",
    "vc_majorant",
    "oce_avar",
    "oce_entropic",
    "semideviation_sum",
    "envelope_domination",
    "closed_form_regressions",
];

/// Added to the measured discrepancy of the corrupted check.
const CORRUPTION: f64 = 1.0;
const SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    /// Largest discrepancy against the oracle (or excess over the bound).
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
}

struct Measure {
    worst: f64,
    tolerance: f64,
    cases: usize,
}

impl Measure {
    fn new(tolerance: f64) -> Self {
        Self { worst: f64::NEG_INFINITY, tolerance, cases: 0 }
    }

    fn add(&mut self, d: f64) {
        self.worst = self.worst.max(d);
        self.cases += 1;
    }
}

pub fn run(names: Option<&[String]>, corrupt: Option<&str>) -> Result<Vec<CheckResult>, CliError> {
    let selected: Vec<String> = match names {
        Some(n) => n.to_vec(),
        None => CHECKS.iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) =
        selected.iter().chain(corrupt.map(str::to_string).as_ref()).find(|n| !CHECKS.contains(&n.as_str()))
    {
        return Err(CliError::Config(format!("unknown check {bad:?}; known checks: {}", CHECKS.join(", "))));
    }
    selected
        .iter()
        .map(|name| {
            let mut m = match name.as_str() {
                "integral_majorant" => integral_majorant()?,
                "vc_majorant" => vc_majorant_check()?,
                "oce_avar" => oce_avar()?,
                "oce_entropic" => oce_entropic()?,
                "semideviation_sum" => semideviation_sum()?,
                "envelope_domination" => envelope_domination()?,
                "closed_form_regressions" => closed_form_regressions()?,
                _ => unreachable!("validated above"),
            };
            if corrupt == Some(name.as_str()) {
                m.worst += CORRUPTION;
            }
            Ok(CheckResult {
                name: name.clone(),
                pass: m.worst <= m.tolerance,
                worst: m.worst,
                tolerance: m.tolerance,
                cases: m.cases,
            })
        })
        .collect()
}

// ∫₀¹√(v ln(K/ε))dε ≤ 2√(v ln K); excess of the left side over the right.
fn integral_majorant() -> Result<Measure, CliError> {
    let mut m = Measure::new(0.0);
    for v in [1.0, 2.0, 4.0, 8.0] {
        for k in [E, E * E, 10.0] {
            m.add(entropy_integral_lhs(v, k, 1e-6)? - entropy_integral_upper(v, k)?);
        }
    }
    Ok(m)
}

fn vc_majorant_check() -> Result<Measure, CliError> {
    let mut m = Measure::new(0.0);
    for v in [2, 3, 5] {
        for delta in [0.05, 0.25, 0.5, 1.0] {
            m.add(j_numeric(vc_log_covering(v), delta)?.value - vc_majorant(v, delta)?);
        }
    }
    Ok(m)
}

fn random_samples(stream: u64, count: usize, spread: f64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(SEED, stream);
    (0..count)
        .map(|_| {
            let len = rng.random_range(1..=50);
            (0..len).map(|_| rng.random_range(-spread..spread)).collect()
        })
        .collect()
}

fn var_avar(values: &[f64], alpha: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let k = (0..v.len()).find(|&k| (k as f64 + 1.0) / n >= alpha).unwrap_or(v.len() - 1);
    let var = v[k];
    var + v.iter().map(|x| (x - var).max(0.0)).sum::<f64>() / n / (1.0 - alpha)
}

fn oce_avar() -> Result<Measure, CliError> {
    let mut m = Measure::new(1e-8);
    for s in random_samples(1, 1000, 10.0) {
        let ed = EmpiricalDistribution::new(s.clone())?;
        for alpha in [0.1, 0.5, 0.9] {
            let oce = apply(&RiskFunctional::Divergence(PhiFamily::avar(alpha, 1.05)?), &ed)?;
            m.add((oce - avar_closed_form(&ed, alpha)?).abs());
            m.add((oce - var_avar(&s, alpha)).abs());
        }
    }
    Ok(m)
}

fn oce_entropic() -> Result<Measure, CliError> {
    let mut m = Measure::new(1e-9);
    let risk = RiskFunctional::Divergence(PhiFamily::entropic(1.5)?);
    for s in random_samples(2, 1000, 3.0) {
        let mx = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let oracle = mx + (s.iter().map(|v| (v - mx).exp()).sum::<f64>() / s.len() as f64).ln();
        m.add((apply(&risk, &EmpiricalDistribution::new(s)?)? - oracle).abs());
    }
    Ok(m)
}

fn semideviation_sum() -> Result<Measure, CliError> {
    let mut m = Measure::new(1e-10);
    for (i, s) in random_samples(3, 1000, 10.0).iter().enumerate() {
        let (p, a) = ([1.0, 1.5, 2.0, 3.0][i % 4], [0.25, 0.5, 1.0][i % 3]);
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let dev = s.iter().map(|v| if *v > mean { (v - mean).powf(p) } else { 0.0 }).sum::<f64>() / n;
        let oracle = mean + a * dev.powf(1.0 / p);
        let got = mean_upper_semideviation(&EmpiricalDistribution::new(s.clone())?, SemideviationParams::new(p, a)?);
        m.add((got - oracle).abs());
    }
    Ok(m)
}

// Worst `|G| − ξ` over random probes of both bundled problems.
fn envelope_domination() -> Result<Measure, CliError> {
    let mut m = Measure::new(1e-12);
    for b in
        [problems::bounded_product(RiskFunctional::Expectation)?, problems::quadratic(RiskFunctional::Expectation)?]
    {
        let r = check_envelope_domination(
            &b.problem.goal,
            &b.envelope,
            &b.problem.param_box,
            &b.problem.source,
            10_000,
            SEED,
        )?;
        m.worst = m.worst.max(r.worst_excess);
        m.cases += r.probes;
    }
    Ok(m)
}

// Closed forms against values computed with 30-digit arithmetic.
fn closed_form_regressions() -> Result<Measure, CliError> {
    let mut m = Measure::new(1e-9);
    let rel = |got: f64, want: f64| ((got - want) / want).abs();
    m.add(rel(j_hoelder(1, 1.0, 0.5)?.value, 2.039_333_980_337_618));
    m.add(rel(j_pl(1, &[1], 1.0)?.value, 11.265_147_530_751_262));
    m.add(rel(eta_threshold(1.0, 100, 1.0, 2.03934), 18.557_998_632_255_665));
    m.add(rel(vc_covering_bound(2, 0.5)?, 945.799_180_663_123_2));
    m.add(rel(entropy_integral_lhs(1.0, E, 1e-10)?, 1.378_936_078_070_656));
    m.add(rel(j_hoelder(1, 1.0, 0.5)?.value, (6.0 * LN_2).sqrt()));
    Ok(m)
}
