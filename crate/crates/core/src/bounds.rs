//! Deviation bounds, applicability thresholds, remainder probabilities and the
//! OCE compactification interval.

use std::f64::consts::{LN_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::dist::{envelope_moments, expectation, MomentTable, SourceDistribution};
use crate::entropy::EntropySource;
use crate::error::{config, domain, Result};
use crate::goal::EnvelopeSpec;
use crate::risk::{PhiFamily, RiskFunctional, SemideviationParams};

/// Relative slack when comparing n against a real-valued sample-size requirement.
const MIN_N_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundStatus {
    Applicable,
    BelowThreshold,
    NTooSmall,
}

impl BoundStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Applicable => "applicable",
            Self::BelowThreshold => "below-threshold",
            Self::NTooSmall => "n-too-small",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub name: String,
    pub value: f64,
}

fn comp(name: &str, value: f64) -> Component {
    Component { name: name.into(), value }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBoundResult {
    pub t: f64,
    pub status: BoundStatus,
    /// Exponential terms plus remainders, clamped at 1.
    pub bound_value: f64,
    pub threshold_eps: f64,
    /// Real-valued sample-size requirement; see [`TailBoundResult::min_n_count`].
    pub min_n: f64,
    pub remainder: f64,
    pub components: Vec<Component>,
}

impl TailBoundResult {
    pub fn is_applicable(&self) -> bool {
        self.status == BoundStatus::Applicable
    }

    /// Smallest integer n meeting the requirement.
    pub fn min_n_count(&self) -> u64 {
        (self.min_n * (1.0 - MIN_N_SLACK)).ceil().max(1.0) as u64
    }

    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|c| c.name == name).map(|c| c.value)
    }

    /// Multiplies the bound and its threshold and re-derives the status at `eps`;
    /// a test fixture for forced violations.
    pub fn scaled(mut self, factor: f64, eps: f64) -> Self {
        self.bound_value *= factor;
        self.threshold_eps *= factor;
        if self.status != BoundStatus::NTooSmall {
            self.status = if eps <= self.threshold_eps { BoundStatus::BelowThreshold } else { BoundStatus::Applicable };
        }
        self
    }
}

fn status(n: usize, min_n: f64, eps: f64, threshold: f64) -> BoundStatus {
    if (n as f64) < min_n * (1.0 - MIN_N_SLACK) {
        BoundStatus::NTooSmall
    } else if eps <= threshold {
        BoundStatus::BelowThreshold
    } else {
        BoundStatus::Applicable
    }
}

/// `(n, t, ε)` for one bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    pub t: f64,
    pub eps: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !(self.t > 0.0) || !(self.eps > 0.0) {
            return Err(domain(format!("need n >= 1, t > 0, eps > 0, got {self:?}")));
        }
        Ok(())
    }
}

/// `16√2‖ξ‖J(1/2)/√n`, the bound on the expected uniform deviation.
pub fn expected_error_bound(n: usize, norm_xi_2: f64, j_half: f64) -> f64 {
    16.0 * SQRT_2 * norm_xi_2 * j_half / (n as f64).sqrt()
}

/// `η_{t,n} = ‖ξ‖/√n + 32√2(1+t)‖ξ‖J(1/4)/√n`.
pub fn eta_threshold(t: f64, n: usize, norm_xi_2: f64, j_quarter: f64) -> f64 {
    let sn = (n as f64).sqrt();
    norm_xi_2 / sn + 32.0 * SQRT_2 * (1.0 + t) * norm_xi_2 * j_quarter / sn
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RemainderMode {
    /// Zero for constant envelopes, Chebyshev otherwise.
    #[default]
    Auto,
    /// Zero; only valid for a constant envelope.
    Bounded,
    Chebyshev,
}

/// `P(Ω∖B_n)` as `coefficient/n`, clamped to [0,1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Remainder {
    pub coefficient: f64,
}

impl Remainder {
    pub const ZERO: Self = Self { coefficient: 0.0 };

    pub fn at(&self, n: usize) -> f64 {
        (self.coefficient / n as f64).clamp(0.0, 1.0)
    }

    /// `Var[ξ²]/E[ξ²]²` or zero, by mode.
    pub fn from_moments(moments: &MomentTable, mode: RemainderMode, constant_envelope: bool) -> Result<Self> {
        match mode {
            RemainderMode::Bounded if !constant_envelope => {
                Err(config("bounded remainder mode needs a constant envelope"))
            }
            RemainderMode::Bounded => Ok(Self::ZERO),
            RemainderMode::Auto if constant_envelope => Ok(Self::ZERO),
            RemainderMode::Auto | RemainderMode::Chebyshev => {
                let m2 = moments.second_moment();
                if m2 <= 0.0 {
                    return Err(domain("envelope has zero second moment"));
                }
                Ok(Self { coefficient: moments.variance_of_square()? / (m2 * m2) })
            }
        }
    }
}

/// `P(Ω∖B_n^ξ)`: zero when bounded, else `Var[ξ²]/(nE[ξ²]²)` clamped to [0,1].
pub fn remainder_prob(moments: &MomentTable, n: usize, mode: RemainderMode) -> Result<f64> {
    let m = if mode == RemainderMode::Auto { RemainderMode::Chebyshev } else { mode };
    Ok(Remainder::from_moments(moments, m, true)?.at(n))
}

/// Everything the expectation bound needs besides `(n, t, ε)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskNeutralContext {
    pub norm_xi: f64,
    pub j_quarter: f64,
    pub j_half: f64,
    pub remainder: Remainder,
}

impl RiskNeutralContext {
    pub fn new(norm_xi: f64, j_quarter: f64, j_half: f64, remainder: Remainder) -> Result<Self> {
        if !(norm_xi > 0.0 && j_quarter >= 0.0 && j_half >= 0.0) {
            return Err(domain("envelope norm must be positive and J values nonnegative"));
        }
        Ok(Self { norm_xi, j_quarter, j_half, remainder })
    }

    pub fn build(
        xi: &EnvelopeSpec,
        source: &SourceDistribution,
        entropy: &EntropySource,
        mode: RemainderMode,
    ) -> Result<Self> {
        let m = envelope_moments(xi, source, &[])?;
        let rem = Remainder::from_moments(&m, mode, xi.constant_value().is_some())?;
        Self::new(m.l2, entropy.j_value(0.25)?, entropy.j_value(0.5)?, rem)
    }

    pub fn min_n(&self) -> f64 {
        self.norm_xi * self.norm_xi / 2.0
    }
}

/// `exp(−t²√nε/(8(t+1)(t+28)‖ξ‖)) + P(Ω∖B_n^ξ)`, applicable for ε > η_{t,n} and n ≥ ‖ξ‖²/2.
pub fn risk_neutral_tail_bound(ctx: &RiskNeutralContext, inp: BoundInputs) -> Result<TailBoundResult> {
    inp.validate()?;
    let BoundInputs { n, t, eps } = inp;
    let threshold = eta_threshold(t, n, ctx.norm_xi, ctx.j_quarter);
    let expo = (-t * t * (n as f64).sqrt() * eps / (8.0 * (t + 1.0) * (t + 28.0) * ctx.norm_xi)).exp();
    let rem = ctx.remainder.at(n);
    let min_n = ctx.min_n();
    Ok(TailBoundResult {
        t,
        status: status(n, min_n, eps, threshold),
        bound_value: (expo + rem).min(1.0),
        threshold_eps: threshold,
        min_n,
        remainder: rem,
        components: vec![
            comp("exp_term", expo),
            comp("remainder_b", rem),
            comp("eta", threshold),
            comp("expected_error_bound", expected_error_bound(n, ctx.norm_xi, ctx.j_half)),
        ],
    })
}

/// Inputs of the two-term semideviation bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemidevContext {
    pub params: SemideviationParams,
    pub norm_xi: f64,
    /// `‖ξ_p‖` with `ξ_p = [ξ + (E ξ ∨ 1)]^{p+1}`.
    pub norm_xi_p: f64,
    pub j_quarter: f64,
    /// J at `δ = 1/2^{p+4}`.
    pub j_small: f64,
    pub remainder_xi: Remainder,
    pub remainder_xi_p: Remainder,
}

impl SemidevContext {
    pub fn build(
        params: SemideviationParams,
        xi: &EnvelopeSpec,
        source: &SourceDistribution,
        entropy: &EntropySource,
        mode: RemainderMode,
    ) -> Result<Self> {
        params.validate()?;
        let m = envelope_moments(xi, source, &[])?;
        let xi_p = semidev_envelope(xi, m.mean(), params.p);
        let mp = envelope_moments(&xi_p, source, &[])?;
        let constant = xi.constant_value().is_some();
        Ok(Self {
            params,
            norm_xi: m.l2,
            norm_xi_p: mp.l2,
            j_quarter: entropy.j_value(0.25)?,
            j_small: entropy.j_value(2f64.powf(-(params.p + 4.0)))?,
            remainder_xi: Remainder::from_moments(&m, mode, constant)?,
            remainder_xi_p: Remainder::from_moments(&mp, mode, constant)?,
        })
    }

    pub fn min_n(&self) -> f64 {
        let a = self.norm_xi_p * self.norm_xi_p / 2.0;
        let b = (1.0 + 32.0 * SQRT_2 * self.j_quarter).powi(2);
        a.max(b)
    }

    pub fn threshold(&self, t: f64, n: usize) -> f64 {
        let SemideviationParams { p, a } = self.params;
        let inner = 1.0 + (p + 6.0).sqrt() + 2f64.powf(p + 3.0) * self.j_small;
        2.0 * (1.0 + a) * 32f64.powf(1.0 / p) * (t + 1.0).powf(1.0 / p) * self.norm_xi_p.powf(1.0 / p)
            / (n as f64).powf(1.0 / (2.0 * p))
            * inner.powf(1.0 / p)
    }
}

/// `ξ_p = [ξ + (E ξ ∨ 1)]^{p+1}`.
pub fn semidev_envelope(xi: &EnvelopeSpec, mean_xi: f64, p: f64) -> EnvelopeSpec {
    let shift = mean_xi.max(1.0);
    xi.compose(move |v| (v + shift).powf(p + 1.0))
}

/// Two exponential terms plus the remainders for ξ and ξ_p.
pub fn semidev_tail_bound(ctx: &SemidevContext, inp: BoundInputs) -> Result<TailBoundResult> {
    inp.validate()?;
    let BoundInputs { n, t, eps } = inp;
    let SemideviationParams { p, a } = ctx.params;
    let sn = (n as f64).sqrt();
    let tt = (t + 1.0) * (t + 28.0);
    let e1 = (-t * t * sn * eps / (16.0 * tt * ctx.norm_xi)).exp();
    let e2 = (-t * t * sn * eps.powf(p) / (2f64.powf(p + 3.0) * a.powf(p) * tt * ctx.norm_xi_p)).exp();
    let r1 = ctx.remainder_xi.at(n);
    let r2 = ctx.remainder_xi_p.at(n);
    let threshold = ctx.threshold(t, n);
    let min_n = ctx.min_n();
    Ok(TailBoundResult {
        t,
        status: status(n, min_n, eps, threshold),
        bound_value: (e1 + e2 + r1 + r2).min(1.0),
        threshold_eps: threshold,
        min_n,
        remainder: r1 + r2,
        components: vec![
            comp("exp_term", e1),
            comp("exp_term_p", e2),
            comp("remainder_b", r1),
            comp("remainder_b_p", r2),
            comp("norm_xi_p", ctx.norm_xi_p),
        ],
    })
}

/// `I = [x_l, x_u]` containing the OCE shift minimizers on the good event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompactInterval {
    pub x_l: f64,
    pub x_u: f64,
    pub x0: f64,
    pub delta: f64,
}

impl CompactInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.x_l <= x && x <= self.x_u
    }
}

/// `x_l = −Φ(0) − δ − E Φ*(ξ)` and
/// `x_u = (Φ(x₀) + (1+x₀)δ + E Φ*(ξ) + x₀ E ξ)/(x₀−1) + Φ(0)`.
pub fn compactification_interval(
    phi: &PhiFamily,
    x0: f64,
    mean_xi: f64,
    mean_phi_star_xi: f64,
    delta: f64,
) -> Result<CompactInterval> {
    if !(x0 > 1.0) {
        return Err(config(format!("x0 must exceed 1, got {x0}")));
    }
    let phi_x0 = phi.phi(x0);
    if !phi_x0.is_finite() {
        return Err(config(format!("Phi(x0) is infinite at x0 = {x0}")));
    }
    if !(delta > 0.0) {
        return Err(domain(format!("delta must be positive, got {delta}")));
    }
    let phi0 = phi.phi(0.0);
    let x_l = -phi0 - delta - mean_phi_star_xi;
    let x_u = (phi_x0 + (1.0 + x0) * delta + mean_phi_star_xi + x0 * mean_xi) / (x0 - 1.0) + phi0;
    if !(x_l.is_finite() && x_u.is_finite()) {
        return Err(domain("compactification interval is not finite"));
    }
    Ok(CompactInterval { x_l, x_u, x0, delta })
}

/// `ξ' = [Φ*'₊(ξ + x_u) + 1]√(ξ² + x_u²)`.
pub fn divergence_envelope(xi: &EnvelopeSpec, phi: &PhiFamily, x_u: f64) -> EnvelopeSpec {
    let phi = phi.clone();
    xi.compose(move |v| (phi.phi_star_rd(v + x_u) + 1.0) * (v * v + x_u * x_u).sqrt())
}

/// Inputs of the divergence bound.
#[derive(Debug, Clone, Serialize)]
pub struct DivergenceContext {
    pub interval: CompactInterval,
    pub mean_xi: f64,
    pub mean_phi_star_xi: f64,
    pub second_moment_xi: f64,
    pub norm_xi_prime: f64,
    pub j_quarter: f64,
    /// `(Var ξ + Var Φ*(ξ))/δ²`, the Chebyshev coefficient of `P(Ω∖A_{n,δ})`.
    pub remainder_a: Remainder,
    pub remainder_b: Remainder,
}

impl DivergenceContext {
    pub fn build(
        phi: &PhiFamily,
        delta: f64,
        xi: &EnvelopeSpec,
        source: &SourceDistribution,
        entropy: &EntropySource,
        mode: RemainderMode,
    ) -> Result<Self> {
        let x0 = phi.x0;
        if !(x0 > 1.0 && x0 < 2.0) {
            return Err(domain(format!("the divergence bound needs x0 in (1,2), got {x0}")));
        }
        let m = envelope_moments(xi, source, &[])?;
        let constant = xi.constant_value();
        let (e_ps, e_ps2) = match constant {
            Some(c) => (phi.phi_star(c), phi.phi_star(c).powi(2)),
            None => {
                let a = expectation(source, |z| phi.phi_star(xi.eval(z)))?.value;
                let b = expectation(source, |z| phi.phi_star(xi.eval(z)).powi(2))?.value;
                (a, b)
            }
        };
        let interval = compactification_interval(phi, x0, m.mean(), e_ps, delta)?;
        let xi_prime = divergence_envelope(xi, phi, interval.x_u);
        let mp = envelope_moments(&xi_prime, source, &[])?;
        let remainder_a = match (mode, constant) {
            (RemainderMode::Bounded, None) => return Err(config("bounded remainder mode needs a constant envelope")),
            (RemainderMode::Bounded, _) | (RemainderMode::Auto, Some(_)) => Remainder::ZERO,
            _ => Remainder { coefficient: (m.variance() + (e_ps2 - e_ps * e_ps).max(0.0)) / (delta * delta) },
        };
        Ok(Self {
            interval,
            mean_xi: m.mean(),
            mean_phi_star_xi: e_ps,
            second_moment_xi: m.second_moment(),
            norm_xi_prime: mp.l2,
            j_quarter: entropy.j_value(0.25)?,
            remainder_a,
            remainder_b: Remainder::from_moments(&mp, mode, constant.is_some())?,
        })
    }

    pub fn min_n(&self) -> f64 {
        2.0 * self.norm_xi_prime * self.norm_xi_prime
    }

    pub fn threshold(&self, t: f64, n: usize) -> f64 {
        self.norm_xi_prime / (n as f64).sqrt() * (2.0 + 32.0 * (t + 1.0) * (4.0 * self.j_quarter + 5.0 * LN_2.sqrt()))
    }
}

/// `exp(−t²√nε/(16(t+1)(t+28)‖ξ'‖)) + P(Ω∖A_{n,δ}) + P(Ω∖B_n^{2ξ'})`.
pub fn divergence_tail_bound(ctx: &DivergenceContext, inp: BoundInputs) -> Result<TailBoundResult> {
    inp.validate()?;
    let BoundInputs { n, t, eps } = inp;
    let expo = (-t * t * (n as f64).sqrt() * eps / (16.0 * (t + 1.0) * (t + 28.0) * ctx.norm_xi_prime)).exp();
    let ra = ctx.remainder_a.at(n);
    let rb = ctx.remainder_b.at(n);
    let threshold = ctx.threshold(t, n);
    let min_n = ctx.min_n();
    Ok(TailBoundResult {
        t,
        status: status(n, min_n, eps, threshold),
        bound_value: (expo + ra + rb).min(1.0),
        threshold_eps: threshold,
        min_n,
        remainder: (ra + rb).min(1.0),
        components: vec![
            comp("exp_term", expo),
            comp("remainder_a", ra),
            comp("remainder_b", rb),
            comp("x_l", ctx.interval.x_l),
            comp("x_u", ctx.interval.x_u),
            comp("norm_xi_prime", ctx.norm_xi_prime),
        ],
    })
}

/// 20 log-spaced values in [0.1, 100].
pub fn default_t_grid() -> Vec<f64> {
    (0..20).map(|k| 10f64.powf(-1.0 + 3.0 * k as f64 / 19.0)).collect()
}

/// The grid t with the smallest applicable bound; without any applicable t,
/// the result at the t with the smallest threshold.
pub fn optimize_t<F>(bound_fn: F, t_grid: &[f64]) -> Result<(f64, TailBoundResult)>
where
    F: Fn(f64) -> Result<TailBoundResult>,
{
    if t_grid.is_empty() {
        return Err(config("t grid must be nonempty"));
    }
    let results = t_grid.iter().map(|&t| bound_fn(t).map(|r| (t, r))).collect::<Result<Vec<_>>>()?;
    let best_applicable = results.iter().filter(|(_, r)| r.is_applicable()).fold(
        None::<&(f64, TailBoundResult)>,
        |best, cur| match best {
            Some(b) if b.1.bound_value <= cur.1.bound_value => Some(b),
            _ => Some(cur),
        },
    );
    if let Some(b) = best_applicable {
        return Ok(b.clone());
    }
    let fallback = results
        .iter()
        .fold(None::<&(f64, TailBoundResult)>, |best, cur| match best {
            Some(b) if b.1.threshold_eps <= cur.1.threshold_eps => Some(b),
            _ => Some(cur),
        })
        .expect("nonempty grid");
    Ok(fallback.clone())
}

/// A prepared bound for one risk family.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BoundContext {
    RiskNeutral(RiskNeutralContext),
    Semideviation(SemidevContext),
    Divergence(DivergenceContext),
}

impl BoundContext {
    /// Moments, J values and remainder coefficients for the given risk.
    pub fn build(
        risk: &RiskFunctional,
        xi: &EnvelopeSpec,
        source: &SourceDistribution,
        entropy: &EntropySource,
        mode: RemainderMode,
        delta: f64,
    ) -> Result<Self> {
        entropy.validate()?;
        Ok(match risk {
            RiskFunctional::Expectation => Self::RiskNeutral(RiskNeutralContext::build(xi, source, entropy, mode)?),
            RiskFunctional::Semideviation(p) => {
                Self::Semideviation(SemidevContext::build(*p, xi, source, entropy, mode)?)
            }
            RiskFunctional::Divergence(phi) => {
                Self::Divergence(DivergenceContext::build(phi, delta, xi, source, entropy, mode)?)
            }
        })
    }

    pub fn evaluate(&self, inp: BoundInputs) -> Result<TailBoundResult> {
        match self {
            Self::RiskNeutral(c) => risk_neutral_tail_bound(c, inp),
            Self::Semideviation(c) => semidev_tail_bound(c, inp),
            Self::Divergence(c) => divergence_tail_bound(c, inp),
        }
    }

    pub fn min_n(&self) -> f64 {
        match self {
            Self::RiskNeutral(c) => c.min_n(),
            Self::Semideviation(c) => c.min_n(),
            Self::Divergence(c) => c.min_n(),
        }
    }

    pub fn interval(&self) -> Option<CompactInterval> {
        match self {
            Self::Divergence(c) => Some(c.interval),
            _ => None,
        }
    }

    /// `optimize_t` at one `(n, ε)`.
    pub fn best_over_t(&self, n: usize, eps: f64, t_grid: &[f64]) -> Result<(f64, TailBoundResult)> {
        optimize_t(|t| self.evaluate(BoundInputs { n, t, eps }), t_grid)
    }
}
