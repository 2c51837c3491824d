//! Sources of randomness, empirical distributions and envelope moments.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{config, domain, Error, Result};
use crate::goal::EnvelopeSpec;
use crate::quad;

/// Sample size of the Monte Carlo moment fallback.
pub const MC_MOMENT_SAMPLES: usize = 1_000_000;
/// Fixed seed of the Monte Carlo moment fallback.
pub const MC_MOMENT_SEED: u64 = 0x6d6f_6d65_6e74;
/// Relative tolerance of quadrature-based moments.
pub const MOMENT_QUAD_TOL: f64 = 1e-10;

const MAX_ATOM_ENUMERATION: usize = 1 << 20;

/// Marginal law of each coordinate of Z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    Uniform { lo: f64, hi: f64 },
    Discrete { points: Vec<f64>, weights: Vec<f64> },
    TruncatedNormal { mu: f64, sigma: f64, lo: f64, hi: f64 },
}

/// Law of the random vector Z: `dim` independent coordinates with identical marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDistribution {
    #[serde(flatten)]
    pub kind: SourceKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_dim() -> usize {
    1
}

impl SourceDistribution {
    pub fn new(kind: SourceKind, dim: usize) -> Result<Self> {
        let d = Self { kind, dim };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(SourceKind::Uniform { lo, hi }, 1)
    }

    pub fn discrete(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::new(SourceKind::Discrete { points, weights }, 1)
    }

    pub fn truncated_normal(mu: f64, sigma: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(SourceKind::TruncatedNormal { mu, sigma, lo, hi }, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(config("source dimension must be positive"));
        }
        match &self.kind {
            SourceKind::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(config(format!("uniform source needs lo < hi, got ({lo}, {hi})")));
                }
            }
            SourceKind::Discrete { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(config("discrete source needs equally many points and weights (at least one)"));
                }
                if points.iter().any(|p| !p.is_finite()) {
                    return Err(config("discrete source points must be finite"));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(config("discrete source weights must be nonnegative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(config(format!("discrete source weights sum to {total}, not 1")));
                }
            }
            SourceKind::TruncatedNormal { mu, sigma, lo, hi } => {
                if !(mu.is_finite() && sigma.is_finite() && *sigma > 0.0) {
                    return Err(config("truncated normal needs finite mu and sigma > 0"));
                }
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(config(format!("truncated normal needs lo < hi, got ({lo}, {hi})")));
                }
                let std = std_normal();
                let mass = std.cdf((hi - mu) / sigma) - std.cdf((lo - mu) / sigma);
                if !(mass > 1e-300) {
                    return Err(config("truncation interval carries no normal mass"));
                }
            }
        }
        Ok(())
    }

    /// Smallest interval containing the support of one coordinate.
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            SourceKind::Uniform { lo, hi } | SourceKind::TruncatedNormal { lo, hi, .. } => (*lo, *hi),
            SourceKind::Discrete { points, .. } => {
                let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.kind, SourceKind::Discrete { .. })
    }

    fn draw_coordinate(&self, rng: &mut ChaCha8Rng, sampler: &Marginal) -> f64 {
        match (&self.kind, sampler) {
            (SourceKind::Uniform { lo, hi }, _) => lo + (hi - lo) * rng.random::<f64>(),
            (SourceKind::Discrete { points, .. }, Marginal::Weighted(w)) => points[w.sample(rng)],
            (SourceKind::TruncatedNormal { mu, sigma, .. }, Marginal::Truncated { lo, hi }) => {
                let std = std_normal();
                let u = lo + (hi - lo) * rng.random::<f64>();
                let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                mu + sigma * std.inverse_cdf(u)
            }
            _ => unreachable!("marginal sampler does not match source kind"),
        }
    }

    fn marginal(&self) -> Result<Marginal> {
        Ok(match &self.kind {
            SourceKind::Uniform { .. } => Marginal::Plain,
            SourceKind::Discrete { weights, .. } => {
                Marginal::Weighted(WeightedIndex::new(weights).map_err(|e| config(format!("discrete weights: {e}")))?)
            }
            SourceKind::TruncatedNormal { mu, sigma, lo, hi } => {
                let std = std_normal();
                Marginal::Truncated { lo: std.cdf((lo - mu) / sigma), hi: std.cdf((hi - mu) / sigma) }
            }
        })
    }

    /// Density of one coordinate on its support (continuous kinds only).
    fn density(&self, z: f64) -> Option<f64> {
        match &self.kind {
            SourceKind::Uniform { lo, hi } => Some(1.0 / (hi - lo)),
            SourceKind::TruncatedNormal { mu, sigma, lo, hi } => {
                let std = std_normal();
                let mass = std.cdf((hi - mu) / sigma) - std.cdf((lo - mu) / sigma);
                Some(std.pdf((z - mu) / sigma) / (sigma * mass))
            }
            SourceKind::Discrete { .. } => None,
        }
    }
}

enum Marginal {
    Plain,
    Weighted(WeightedIndex<f64>),
    Truncated { lo: f64, hi: f64 },
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal parameters are valid")
}

/// Generator for one independent stream under a top-level seed.
///
/// Replication tasks use `stream = (n << 32) | replication`, so a replication
/// draws the same numbers whichever worker runs it.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn replication_stream(n: usize, replication: usize) -> u64 {
    ((n as u64) << 32) | (replication as u64 & 0xffff_ffff)
}

/// An i.i.d. sample of d-vectors stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    dim: usize,
    data: Vec<f64>,
}

impl Sample {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or_else(|| config("sample must be nonempty"))?;
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(config("sample rows must share a positive dimension"));
        }
        Ok(Self { dim, data: rows.concat() })
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(config("sample must be nonempty"));
        }
        Ok(Self { dim: 1, data: values.to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

/// Draws `n` i.i.d. copies of Z; a pure function of `(dist, n, seed)`.
pub fn sample(dist: &SourceDistribution, n: usize, seed: u64) -> Result<Sample> {
    sample_stream(dist, n, seed, 0)
}

pub fn sample_stream(dist: &SourceDistribution, n: usize, seed: u64, stream: u64) -> Result<Sample> {
    dist.validate()?;
    if n == 0 {
        return Err(config("sample size must be at least 1"));
    }
    let marginal = dist.marginal()?;
    let mut rng = stream_rng(seed, stream);
    let data = (0..n * dist.dim).map(|_| dist.draw_coordinate(&mut rng, &marginal)).collect();
    Ok(Sample { dim: dist.dim, data })
}

/// Sorted sample of real outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(config("empirical distribution needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain("empirical distribution values must be finite"));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `F^←(u) = inf{t : F(t) ≥ u}` for the empirical F.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        quantile(self, u)
    }
}

/// Left-continuous empirical quantile: `values[k]` for the smallest `k` with `(k+1)/n ≥ u`.
pub fn quantile(ed: &EmpiricalDistribution, u: f64) -> Result<f64> {
    Ok(ed.values[quantile_index(ed.len(), u)?])
}

pub(crate) fn quantile_index(n: usize, u: f64) -> Result<usize> {
    if !(u > 0.0 && u < 1.0) {
        return Err(domain(format!("quantile level must lie in (0,1), got {u}")));
    }
    let nf = n as f64;
    let mut k = ((u * nf).ceil() as usize).saturating_sub(1).min(n - 1);
    // Repair rounding in u*n so the result agrees with the defining inequality.
    while k > 0 && (k as f64) / nf >= u {
        k -= 1;
    }
    while k + 1 < n && ((k + 1) as f64) / nf < u {
        k += 1;
    }
    Ok(k)
}

/// How an expectation under the law of Z was computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MomentMethod {
    ClosedForm,
    Quadrature { rel_tol: f64 },
    MonteCarlo { samples: usize, seed: u64 },
}

/// An expectation with its provenance and, for Monte Carlo, a standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub method: MomentMethod,
}

/// `E[f(Z)]` under the source law.
///
/// Exact finite sums for discrete sources, adaptive quadrature for
/// one-dimensional continuous sources, and Monte Carlo otherwise.
pub fn expectation<F: Fn(&[f64]) -> f64>(dist: &SourceDistribution, f: F) -> Result<Estimate> {
    dist.validate()?;
    let finite = |v: f64| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Divergence("expectation is not finite".into()))
        }
    };
    match &dist.kind {
        SourceKind::Discrete { points, weights } => {
            let atoms = points.len();
            if atoms.checked_pow(dist.dim as u32).is_some_and(|c| c <= MAX_ATOM_ENUMERATION) {
                let mut idx = vec![0usize; dist.dim];
                let mut z = vec![0.0; dist.dim];
                let mut total = 0.0;
                loop {
                    let mut w = 1.0;
                    for (k, &i) in idx.iter().enumerate() {
                        z[k] = points[i];
                        w *= weights[i];
                    }
                    if w > 0.0 {
                        total += w * f(&z);
                    }
                    // odometer increment
                    let mut k = dist.dim;
                    loop {
                        if k == 0 {
                            return Ok(Estimate {
                                value: finite(total)?,
                                std_error: 0.0,
                                method: MomentMethod::ClosedForm,
                            });
                        }
                        k -= 1;
                        idx[k] += 1;
                        if idx[k] < atoms {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
            }
            monte_carlo(dist, f)
        }
        _ if dist.dim == 1 => {
            let (lo, hi) = dist.support();
            let q = quad::integrate(|z| f(&[z]) * dist.density(z).unwrap_or(0.0), lo, hi, MOMENT_QUAD_TOL, 1e-300)?;
            Ok(Estimate {
                value: finite(q.value)?,
                std_error: 0.0,
                method: MomentMethod::Quadrature { rel_tol: MOMENT_QUAD_TOL },
            })
        }
        _ => monte_carlo(dist, f),
    }
}

fn monte_carlo<F: Fn(&[f64]) -> f64>(dist: &SourceDistribution, f: F) -> Result<Estimate> {
    let s = sample(dist, MC_MOMENT_SAMPLES, MC_MOMENT_SEED)?;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for z in s.rows() {
        let v = f(z);
        if !v.is_finite() {
            return Err(Error::Divergence("integrand is not finite on a sampled point".into()));
        }
        sum += v;
        sum_sq += v * v;
    }
    let n = MC_MOMENT_SAMPLES as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok(Estimate {
        value: mean,
        std_error: (var / n).sqrt(),
        method: MomentMethod::MonteCarlo { samples: MC_MOMENT_SAMPLES, seed: MC_MOMENT_SEED },
    })
}

/// Norms `‖ξ‖_{P^Z,q} = E[ξ(Z)^q]^{1/q}` of an envelope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    pub l1: f64,
    pub l2: f64,
    /// Absent when the table was built by hand without a fourth moment.
    pub l4: Option<f64>,
    pub lp: Vec<(f64, f64)>,
    pub method: MomentMethod,
    /// Largest relative standard error across entries (zero unless Monte Carlo).
    pub rel_std_error: f64,
}

impl MomentTable {
    /// Table of a constant envelope `ξ ≡ value`.
    pub fn constant(value: f64) -> Self {
        Self {
            l1: value,
            l2: value,
            l4: Some(value),
            lp: Vec::new(),
            method: MomentMethod::ClosedForm,
            rel_std_error: 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.l1
    }

    pub fn second_moment(&self) -> f64 {
        self.l2 * self.l2
    }

    pub fn variance(&self) -> f64 {
        (self.second_moment() - self.l1 * self.l1).max(0.0)
    }

    /// `Var[ξ(Z)²] = E ξ⁴ − (E ξ²)²`; needs the fourth-order entry.
    pub fn variance_of_square(&self) -> Result<f64> {
        let l4 = self.l4.ok_or_else(|| config("fourth moment of the envelope is missing"))?;
        Ok((l4.powi(4) - self.second_moment().powi(2)).max(0.0))
    }

    pub fn order(&self, q: f64) -> Option<f64> {
        match q {
            _ if q == 1.0 => Some(self.l1),
            _ if q == 2.0 => Some(self.l2),
            _ if q == 4.0 => self.l4,
            _ => self.lp.iter().find(|(o, _)| *o == q).map(|(_, v)| *v),
        }
    }
}

/// Moments of the envelope under the source law for orders 1, 2, 4 and `orders`.
pub fn envelope_moments(xi: &EnvelopeSpec, dist: &SourceDistribution, orders: &[f64]) -> Result<MomentTable> {
    if let Some(&bad) = orders.iter().find(|q| !(q.is_finite() && **q >= 1.0)) {
        return Err(domain(format!("moment order must be a finite real >= 1, got {bad}")));
    }
    if let Some(c) = xi.constant_value() {
        let mut t = MomentTable::constant(c);
        t.lp = orders.iter().map(|&q| (q, c)).collect();
        return Ok(t);
    }
    let norm = |q: f64| -> Result<(f64, Estimate)> {
        let est = expectation(dist, |z| xi.eval(z).powf(q))?;
        let v = est.value.max(0.0).powf(1.0 / q);
        if !v.is_finite() {
            return Err(Error::Divergence(format!("moment of order {q} is infinite")));
        }
        Ok((v, est))
    };
    let (l1, e1) = norm(1.0)?;
    let (l2, e2) = norm(2.0)?;
    let (l4, e4) = norm(4.0)?;
    let mut rel = [e1, e2, e4].iter().map(rel_se).fold(0.0, f64::max);
    let mut lp = Vec::with_capacity(orders.len());
    for &q in orders {
        let (v, e) = norm(q)?;
        rel = rel.max(rel_se(&e));
        lp.push((q, v));
    }
    Ok(MomentTable { l1, l2, l4: Some(l4), lp, method: e1.method, rel_std_error: rel })
}

fn rel_se(e: &Estimate) -> f64 {
    if e.value != 0.0 {
        e.std_error / e.value.abs()
    } else {
        0.0
    }
}
