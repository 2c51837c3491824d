//! Replicated Monte Carlo experiments: error tails, bound dominance and
//! √n-tightness.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{BoundContext, CompactInterval, TailBoundResult};
use crate::dist::{expectation, quantile, replication_stream, sample_stream, EmpiricalDistribution, Sample};
use crate::error::{config, Error, Result};
use crate::goal::EnvelopeSpec;
use crate::risk::{PhiFamily, RiskFunctional};
use crate::saa::{solve_empirical, solve_true, GridSpec, SaaProblem, TrueSolution};

/// Slack, in binomial standard errors, of the dominance verdict.
pub const DOMINANCE_SE_SLACK: f64 = 3.0;
/// Quantile levels of the tightness diagnostic.
pub const TIGHTNESS_LEVELS: [f64; 3] = [0.5, 0.9, 0.99];
/// Largest allowed max/min ratio of a tightness quantile across n.
pub const TIGHTNESS_FACTOR: f64 = 3.0;
/// Quantiles at or below this are treated as exactly zero.
pub const TIGHTNESS_ZERO: f64 = 1e-12;

/// Population quantities behind the sample events `B_n^ξ` and `A_{n,δ}^ξ`.
#[derive(Debug, Clone)]
pub struct EventSpec {
    pub envelope: EnvelopeSpec,
    /// `E ξ(Z)²`.
    pub second_moment: f64,
    pub a_event: Option<AEventSpec>,
}

#[derive(Debug, Clone)]
pub struct AEventSpec {
    pub phi: PhiFamily,
    pub mean_xi: f64,
    pub mean_phi_star_xi: f64,
    pub delta: f64,
    pub interval: CompactInterval,
}

impl EventSpec {
    /// Moments under the source law; the A event only for divergence risks.
    pub fn build(problem: &SaaProblem, envelope: &EnvelopeSpec, delta: f64) -> Result<Self> {
        let src = &problem.source;
        let (m1, m2) = match envelope.constant_value() {
            Some(c) => (c, c * c),
            None => {
                (expectation(src, |z| envelope.eval(z))?.value, expectation(src, |z| envelope.eval(z).powi(2))?.value)
            }
        };
        let a_event = match &problem.risk {
            RiskFunctional::Divergence(phi) => {
                let mps = match envelope.constant_value() {
                    Some(c) => phi.phi_star(c),
                    None => expectation(src, |z| phi.phi_star(envelope.eval(z)))?.value,
                };
                let interval = crate::bounds::compactification_interval(phi, phi.x0, m1, mps, delta)?;
                Some(AEventSpec { phi: phi.clone(), mean_xi: m1, mean_phi_star_xi: mps, delta, interval })
            }
            _ => None,
        };
        Ok(Self { envelope: envelope.clone(), second_moment: m2, a_event })
    }

    /// `(1/n)Σξ(Z_j)² ≤ 2E ξ²`.
    pub fn b_holds(&self, samples: &Sample) -> bool {
        let n = samples.len() as f64;
        let s: f64 = samples.rows().map(|z| self.envelope.eval(z).powi(2)).sum();
        s / n <= 2.0 * self.second_moment
    }

    /// Both sample means of ξ and Φ*(ξ) within δ above their expectations.
    pub fn a_holds(&self, samples: &Sample) -> Option<bool> {
        let a = self.a_event.as_ref()?;
        let n = samples.len() as f64;
        let (mut s1, mut s2) = (0.0, 0.0);
        for z in samples.rows() {
            let x = self.envelope.eval(z);
            s1 += x;
            s2 += a.phi.phi_star(x);
        }
        Some(s1 / n <= a.mean_xi + a.delta && s2 / n <= a.mean_phi_star_xi + a.delta)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: SaaProblem,
    pub grid: GridSpec,
    /// Grid for the quadrature oracle of the true optimum.
    pub true_grid: GridSpec,
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub eps_list: Vec<f64>,
    pub seed: u64,
    /// Worker count; `None` uses rayon's default.
    pub threads: Option<usize>,
    pub events: Option<EventSpec>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.grid.validate()?;
        if self.replications == 0 {
            return Err(config("replications must be at least 1"));
        }
        if self.n_list.is_empty() || self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config("n_list must be nonempty, positive and strictly ascending"));
        }
        if self.eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(config("eps_list entries must be positive"));
        }
        if self.threads == Some(0) {
            return Err(config("thread count must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub n: usize,
    pub rep: usize,
    pub value: f64,
    pub error: f64,
    pub theta_star: Vec<f64>,
    pub b_event: Option<bool>,
    pub a_event: Option<bool>,
    pub x_star: Option<f64>,
    pub x_in_interval: Option<bool>,
    /// Distance of θ* to the population minimizer, when the oracle reports one.
    pub theta_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSet {
    pub truth: TrueSolution,
    pub n_list: Vec<usize>,
    pub replications: usize,
    /// Ordered by `(n, rep)`.
    pub records: Vec<ReplicationRecord>,
}

impl ReplicationSet {
    pub fn errors(&self, n: usize) -> Vec<f64> {
        self.records.iter().filter(|r| r.n == n).map(|r| r.error).collect()
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        b = b.num_threads(k);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// R replications per n, each on its own RNG stream `(n << 32) | rep`.
pub fn run_replications(cfg: &ExperimentConfig) -> Result<ReplicationSet> {
    cfg.validate()?;
    let truth = solve_true(&cfg.problem, cfg.true_grid)?;
    let tasks: Vec<(usize, usize)> =
        cfg.n_list.iter().flat_map(|&n| (0..cfg.replications).map(move |rep| (n, rep))).collect();
    let run = |&(n, rep): &(usize, usize)| -> Result<ReplicationRecord> {
        let s = sample_stream(&cfg.problem.source, n, cfg.seed, replication_stream(n, rep))?;
        let r = solve_empirical(&cfg.problem, &s, cfg.grid)?;
        let (b_event, a_event, x_in_interval) = match &cfg.events {
            Some(ev) => {
                let a = ev.a_holds(&s);
                let inside = match (&ev.a_event, r.x_star) {
                    (Some(spec), Some(x)) => Some(spec.interval.contains(x)),
                    _ => None,
                };
                (Some(ev.b_holds(&s)), a, inside)
            }
            None => (None, None, None),
        };
        let theta_distance = truth
            .theta_star
            .as_ref()
            .map(|t| t.iter().zip(&r.theta_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
        Ok(ReplicationRecord {
            n,
            rep,
            value: r.value,
            error: (r.value - truth.value).abs(),
            theta_star: r.theta_star,
            b_event,
            a_event,
            x_star: r.x_star,
            x_in_interval,
            theta_distance,
        })
    };
    let records = pool(cfg.threads)?.install(|| tasks.par_iter().map(run).collect::<Result<Vec<_>>>())?;
    Ok(ReplicationSet { truth, n_list: cfg.n_list.clone(), replications: cfg.replications, records })
}

/// `p̂ = #{e ≥ ε}/R` and its binomial standard error.
pub fn empirical_tail(errors: &[f64], eps: f64) -> Result<(f64, f64)> {
    if errors.is_empty() {
        return Err(config("empirical tail needs at least one error"));
    }
    let r = errors.len() as f64;
    let p = errors.iter().filter(|&&e| e >= eps).count() as f64 / r;
    Ok((p, (p * (1.0 - p) / r).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Dominated,
    Violated,
    BoundNotApplicable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dominated => "dominated",
            Self::Violated => "violated",
            Self::BoundNotApplicable => "bound-not-applicable",
        }
    }
}

/// A bound evaluated at one `(n, ε)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCell {
    pub n: usize,
    pub eps: f64,
    pub bound: TailBoundResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub n: usize,
    pub eps: f64,
    pub p_hat: f64,
    pub se: f64,
    pub bound: TailBoundResult,
    pub verdict: Verdict,
}

/// `optimize_t` over every `(n, ε)`; `scale` multiplies the results (1 outside test fixtures).
pub fn bound_table(
    ctx: &BoundContext,
    n_list: &[usize],
    eps_list: &[f64],
    t_grid: &[f64],
    scale: f64,
) -> Result<Vec<BoundCell>> {
    let mut cells = Vec::with_capacity(n_list.len() * eps_list.len());
    for &n in n_list {
        for &eps in eps_list {
            let (_, bound) = ctx.best_over_t(n, eps, t_grid)?;
            let bound = if scale == 1.0 { bound } else { bound.scaled(scale, eps) };
            cells.push(BoundCell { n, eps, bound });
        }
    }
    Ok(cells)
}

/// Verdicts `p̂ ≤ bound + 3·SE` on applicable cells.
///
/// Errors within the oracle tolerance of ε are not counted as exceedances.
pub fn compare_bounds(reps: &ReplicationSet, cells: &[BoundCell]) -> Result<Vec<TailRow>> {
    cells
        .iter()
        .map(|c| {
            let errors = reps.errors(c.n);
            if errors.is_empty() {
                return Err(config(format!("no replications recorded for n = {}", c.n)));
            }
            let (p_hat, se) = empirical_tail(&errors, c.eps + reps.truth.tolerance)?;
            let verdict = if !c.bound.is_applicable() {
                Verdict::BoundNotApplicable
            } else if p_hat <= c.bound.bound_value + DOMINANCE_SE_SLACK * se {
                Verdict::Dominated
            } else {
                Verdict::Violated
            };
            Ok(TailRow { n: c.n, eps: c.eps, p_hat, se, bound: c.bound.clone(), verdict })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessRow {
    pub n: usize,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessReport {
    pub rows: Vec<TightnessRow>,
    /// max/min across n for each level; 1 when the quantile is identically zero.
    pub ratios: [f64; 3],
    pub pass: bool,
}

/// Quantiles of `√n·|error|` per n; passes when each level varies by less than a factor 3.
pub fn tightness_diagnostic(reps: &ReplicationSet) -> Result<TightnessReport> {
    let ns = &reps.n_list;
    if ns.len() < 3 {
        return Err(config("tightness diagnostic needs at least 3 sample sizes"));
    }
    if reps.replications < 500 {
        return Err(config("tightness diagnostic needs at least 500 replications"));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let scaled: Vec<f64> = reps.errors(n).iter().map(|e| (n as f64).sqrt() * e).collect();
        let ed = EmpiricalDistribution::new(scaled)?;
        let q = |u| quantile(&ed, u);
        rows.push(TightnessRow { n, q50: q(0.5)?, q90: q(0.9)?, q99: q(0.99)? });
    }
    let mut ratios = [1.0; 3];
    let mut pass = true;
    for (k, ratio) in ratios.iter_mut().enumerate() {
        let vals: Vec<f64> = rows.iter().map(|r| [r.q50, r.q90, r.q99][k]).collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if max <= TIGHTNESS_ZERO {
            continue;
        }
        *ratio = if min > 0.0 { max / min } else { f64::INFINITY };
        pass &= *ratio < TIGHTNESS_FACTOR;
    }
    Ok(TightnessReport { rows, ratios, pass })
}
