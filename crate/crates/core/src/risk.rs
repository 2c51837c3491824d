//! Risk functionals on empirical distributions.
//!
//! The `*_of` kernels take unsorted slices so the SAA inner loop can skip the
//! copy into an [`EmpiricalDistribution`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bounds::compactification_interval;
use crate::dist::EmpiricalDistribution;
use crate::error::{config, domain, Result};

/// Golden-section stopping width in x.
pub const GOLDEN_TOL: f64 = 1e-10;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Parameters of the mean upper semideviation `E[X] + a‖(X − E X)⁺‖_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemideviationParams {
    pub p: f64,
    pub a: f64,
}

impl SemideviationParams {
    pub fn new(p: f64, a: f64) -> Result<Self> {
        let s = Self { p, a };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p >= 1.0) {
            return Err(config(format!("semideviation order p must be >= 1, got {}", self.p)));
        }
        if !(self.a > 0.0 && self.a <= 1.0) {
            return Err(config(format!("semideviation weight a must lie in (0,1], got {}", self.a)));
        }
        Ok(())
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Which divergence generates the OCE.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PhiKind {
    Avar { alpha: f64 },
    Entropic,
    User { label: String },
}

#[derive(Clone)]
struct UserPhi {
    phi: RealFn,
    phi_star: RealFn,
    phi_star_rd: RealFn,
    piecewise_linear: bool,
}

/// Divergence generator Φ with its conjugate Φ* and the right derivative of Φ*.
#[derive(Clone)]
pub struct PhiFamily {
    pub kind: PhiKind,
    /// A point `x₀ > 1` where Φ is finite.
    pub x0: f64,
    user: Option<UserPhi>,
}

impl fmt::Debug for PhiFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhiFamily").field("kind", &self.kind).field("x0", &self.x0).finish()
    }
}

impl PhiFamily {
    /// `Φ*(y) = y⁺/(1−α)`, generating AVaR at level α.
    pub fn avar(alpha: f64, x0: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(config(format!("AVaR level must lie in (0,1), got {alpha}")));
        }
        let f = Self { kind: PhiKind::Avar { alpha }, x0, user: None };
        f.check_x0()?;
        Ok(f)
    }

    /// `Φ*(y) = e^y − 1`, generating the entropic risk `ln E e^X`.
    pub fn entropic(x0: f64) -> Result<Self> {
        let f = Self { kind: PhiKind::Entropic, x0, user: None };
        f.check_x0()?;
        Ok(f)
    }

    /// A caller-supplied family; checked on grids by [`PhiFamily::validate`].
    pub fn user<A, B, C>(
        label: impl Into<String>,
        phi: A,
        phi_star: B,
        phi_star_rd: C,
        x0: f64,
        piecewise_linear: bool,
    ) -> Result<Self>
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64) -> f64 + Send + Sync + 'static,
        C: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let f = Self {
            kind: PhiKind::User { label: label.into() },
            x0,
            user: Some(UserPhi {
                phi: Arc::new(phi),
                phi_star: Arc::new(phi_star),
                phi_star_rd: Arc::new(phi_star_rd),
                piecewise_linear,
            }),
        };
        f.validate()?;
        Ok(f)
    }

    fn check_x0(&self) -> Result<()> {
        if !(self.x0 > 1.0 && self.phi(self.x0).is_finite()) {
            return Err(config(format!("x0 = {} must exceed 1 and lie in the effective domain of Phi", self.x0)));
        }
        Ok(())
    }

    /// Φ on `[0, ∞)`; `+∞` outside the effective domain.
    pub fn phi(&self, x: f64) -> f64 {
        if x < 0.0 {
            return f64::INFINITY;
        }
        match (&self.kind, &self.user) {
            (_, Some(u)) => (u.phi)(x),
            (PhiKind::Avar { alpha }, _) => {
                if x <= 1.0 / (1.0 - alpha) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            (PhiKind::Entropic, _) => {
                if x == 0.0 {
                    1.0
                } else {
                    x * x.ln() - x + 1.0
                }
            }
            (PhiKind::User { .. }, None) => unreachable!("user family without maps"),
        }
    }

    #[inline]
    pub fn phi_star(&self, y: f64) -> f64 {
        match (&self.kind, &self.user) {
            (_, Some(u)) => (u.phi_star)(y),
            (PhiKind::Avar { alpha }, _) => y.max(0.0) / (1.0 - alpha),
            (PhiKind::Entropic, _) => y.exp_m1(),
            (PhiKind::User { .. }, None) => unreachable!("user family without maps"),
        }
    }

    /// Right derivative `Φ*'₊`.
    pub fn phi_star_rd(&self, y: f64) -> f64 {
        match (&self.kind, &self.user) {
            (_, Some(u)) => (u.phi_star_rd)(y),
            (PhiKind::Avar { alpha }, _) => {
                if y >= 0.0 {
                    1.0 / (1.0 - alpha)
                } else {
                    0.0
                }
            }
            (PhiKind::Entropic, _) => y.exp(),
            (PhiKind::User { .. }, None) => unreachable!("user family without maps"),
        }
    }

    /// Whether Φ* is piecewise linear, so OCE minima sit on kinks.
    pub fn is_piecewise_linear(&self) -> bool {
        match (&self.kind, &self.user) {
            (_, Some(u)) => u.piecewise_linear,
            (PhiKind::Avar { .. }, _) => true,
            _ => false,
        }
    }

    /// Grid checks of `Φ*(0) = 0`, monotonicity and convexity of Φ*, and of the right derivative.
    pub fn validate(&self) -> Result<()> {
        self.check_x0()?;
        if !self.phi(0.0).is_finite() {
            return Err(config("Phi(0) must be finite"));
        }
        if self.phi_star(0.0).abs() > 1e-12 {
            return Err(config(format!("Phi*(0) must vanish, got {}", self.phi_star(0.0))));
        }
        let grid: Vec<f64> = (0..=400).map(|k| -10.0 + 0.05 * k as f64).collect();
        let ys: Vec<f64> = grid.iter().map(|&y| self.phi_star(y)).collect();
        let ds: Vec<f64> = grid.iter().map(|&y| self.phi_star_rd(y)).collect();
        for w in ys.windows(2) {
            if w[1] < w[0] - 1e-12 * (1.0 + w[0].abs()) {
                return Err(config("Phi* must be nondecreasing"));
            }
        }
        for w in ys.windows(3) {
            if w[1] > 0.5 * (w[0] + w[2]) + 1e-9 * (1.0 + w[1].abs()) {
                return Err(config("Phi* must be convex"));
            }
        }
        if ds.iter().any(|&d| d < 0.0) || ds.windows(2).any(|w| w[1] < w[0] - 1e-12 * (1.0 + w[0].abs())) {
            return Err(config("right derivative of Phi* must be nonnegative and nondecreasing"));
        }
        Ok(())
    }
}

/// A law-invariant risk functional ρ.
#[derive(Debug, Clone)]
pub enum RiskFunctional {
    Expectation,
    Semideviation(SemideviationParams),
    Divergence(PhiFamily),
}

impl RiskFunctional {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Expectation => Ok(()),
            Self::Semideviation(s) => s.validate(),
            Self::Divergence(phi) => phi.validate(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Expectation => "expectation".into(),
            Self::Semideviation(s) => format!("semideviation(p={}, a={})", s.p, s.a),
            Self::Divergence(phi) => match &phi.kind {
                PhiKind::Avar { alpha } => format!("avar(alpha={alpha})"),
                PhiKind::Entropic => "entropic".into(),
                PhiKind::User { label } => format!("divergence({label})"),
            },
        }
    }
}

pub fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `m̂ + a((1/n)Σ((v_j − m̂)⁺)^p)^{1/p}`.
pub fn semideviation_of(values: &[f64], params: SemideviationParams) -> f64 {
    let m = mean_of(values);
    let n = values.len() as f64;
    let dev = if params.p == 1.0 {
        values.iter().map(|v| (v - m).max(0.0)).sum::<f64>() / n
    } else {
        (values.iter().map(|v| (v - m).max(0.0).powf(params.p)).sum::<f64>() / n).powf(1.0 / params.p)
    };
    m + params.a * dev
}

pub fn mean_upper_semideviation(ed: &EmpiricalDistribution, params: SemideviationParams) -> f64 {
    semideviation_of(ed.values(), params)
}

/// `h(x) = (1/n)Σ Φ*(v_j + x) − x`; `+∞` when Φ* overflows.
pub fn oce_objective(values: &[f64], phi: &PhiFamily, x: f64) -> Result<f64> {
    let mut s = 0.0;
    for v in values {
        let y = phi.phi_star(v + x);
        if y.is_nan() || y == f64::NEG_INFINITY {
            return Err(domain(format!("Phi* is not finite at {}", v + x)));
        }
        s += y;
    }
    Ok(s / values.len() as f64 - x)
}

/// Minimum and leftmost minimizer of the OCE objective over the bracket.
pub fn oce_of(values: &[f64], phi: &PhiFamily, bracket: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = bracket;
    if values.is_empty() {
        return Err(config("OCE needs at least one value"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(domain(format!("invalid OCE bracket [{lo}, {hi}]")));
    }
    let (value, x) =
        if phi.is_piecewise_linear() { oce_kinks(values, phi, lo, hi)? } else { oce_golden(values, phi, lo, hi)? };
    if !value.is_finite() {
        return Err(domain("OCE objective is not finite anywhere in the bracket"));
    }
    Ok((value, x))
}

pub fn oce_value(ed: &EmpiricalDistribution, phi: &PhiFamily, bracket: (f64, f64)) -> Result<(f64, f64)> {
    oce_of(ed.values(), phi, bracket)
}

fn oce_kinks(values: &[f64], phi: &PhiFamily, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let mut cands: Vec<f64> = values.iter().map(|v| -v).filter(|x| *x > lo && *x < hi).collect();
    cands.push(lo);
    cands.push(hi);
    cands.sort_unstable_by(f64::total_cmp);
    cands.dedup();
    if let PhiKind::Avar { alpha } = phi.kind {
        if phi.user.is_none() {
            return Ok(avar_kinks(values, alpha, &cands));
        }
    }
    let vals = cands.iter().map(|&x| oce_objective(values, phi, x)).collect::<Result<Vec<_>>>()?;
    Ok(leftmost_min(&cands, &vals))
}

// h(x) = c/n Σ_{v_j > −x}(v_j + x) − x evaluated with suffix sums.
fn avar_kinks(values: &[f64], alpha: f64, cands: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + sorted[k];
    }
    let c = 1.0 / ((1.0 - alpha) * n as f64);
    let vals: Vec<f64> = cands
        .iter()
        .map(|&x| {
            let k = sorted.partition_point(|&v| v + x <= 0.0);
            c * (suffix[k] + (n - k) as f64 * x) - x
        })
        .collect();
    leftmost_min(cands, &vals)
}

fn leftmost_min(xs: &[f64], vals: &[f64]) -> (f64, f64) {
    let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = 1e-12 * (1.0 + best.abs());
    let k = vals.iter().position(|&v| v <= best + slack).unwrap_or(0);
    (best, xs[k])
}

fn oce_golden(values: &[f64], phi: &PhiFamily, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let h = |x: f64| oce_objective(values, phi, x);
    let (x, _) = golden_section(h, lo, hi, GOLDEN_TOL)?;
    // endpoints guard against a boundary minimum missed by the interior probes
    let cands = [lo, x, hi];
    let vals = [h(lo)?, h(x)?, h(hi)?];
    Ok(leftmost_min(&cands, &vals))
}

/// Golden-section search for a convex function; ties and `+∞` pairs shrink to the left.
pub fn golden_section<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        if b - a <= tol || c == d {
            break;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// `(1/(1−α))∫_α^1 F^←(u)du` with the α-quantile atom weighted fractionally.
pub fn avar_closed_form(ed: &EmpiricalDistribution, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("AVaR level must lie in (0,1), got {alpha}")));
    }
    Ok(avar_sorted(ed.values(), alpha))
}

pub(crate) fn avar_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len() as f64;
    let mut total = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        let w = (k as f64 + 1.0) / n - (k as f64 / n).max(alpha);
        if w > 0.0 {
            total += w * v;
        }
    }
    total / (1.0 - alpha)
}

/// Bracket containing an OCE minimizer, from the compactification interval
/// with δ = 1 and the constant envelope `max_j |v_j|`.
pub fn oce_bracket(values: &[f64], phi: &PhiFamily) -> Result<(f64, f64)> {
    let xi = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(crate::goal::ENVELOPE_FLOOR);
    let ci = compactification_interval(phi, phi.x0, xi, phi.phi_star(xi), 1.0)?;
    Ok((ci.x_l, ci.x_u))
}

/// ρ applied to an unsorted sample of outcomes.
pub fn apply_to(risk: &RiskFunctional, values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(config("risk functional needs at least one value"));
    }
    match risk {
        RiskFunctional::Expectation => Ok(mean_of(values)),
        RiskFunctional::Semideviation(s) => Ok(semideviation_of(values, *s)),
        RiskFunctional::Divergence(phi) => {
            let bracket = oce_bracket(values, phi)?;
            Ok(oce_of(values, phi, bracket)?.0)
        }
    }
}

pub fn apply(risk: &RiskFunctional, ed: &EmpiricalDistribution) -> Result<f64> {
    apply_to(risk, ed.values())
}
