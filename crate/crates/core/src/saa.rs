//! Grid minimization of empirical and population risk objectives over Θ.

use serde::{Deserialize, Serialize};

use crate::bounds::{compactification_interval, CompactInterval};
use crate::dist::{expectation, Sample, SourceDistribution, SourceKind};
use crate::error::{config, Error, Result};
use crate::goal::{GoalSpec, ParamBox, ENVELOPE_FLOOR};
use crate::risk::{apply_to, golden_section, oce_bracket, oce_of, PhiFamily, RiskFunctional, GOLDEN_TOL};

/// Largest supported parameter dimension.
pub const MAX_DIM: usize = 3;

/// `tol_opt = 1e-6(1 + |v|)`.
pub fn tol_opt(value: f64) -> f64 {
    1e-6 * (1.0 + value.abs())
}

/// Dense grid followed by local refinements around the incumbent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_dim: usize,
    pub refinements: usize,
}

impl GridSpec {
    pub fn default_for(m: usize) -> Self {
        let points_per_dim = if m <= 2 { 1025 } else { 65 };
        Self { points_per_dim, refinements: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_dim < 2 {
            return Err(config("grid needs at least 2 points per dimension"));
        }
        Ok(())
    }
}

/// How the population optimum is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrueOptimum {
    ClosedForm {
        value: f64,
    },
    /// Grid minimization of the population objective computed by quadrature.
    Quadrature,
}

#[derive(Debug, Clone)]
pub struct SaaProblem {
    pub goal: GoalSpec,
    pub param_box: ParamBox,
    pub source: SourceDistribution,
    pub risk: RiskFunctional,
    pub true_optimum: Option<TrueOptimum>,
}

impl SaaProblem {
    pub fn validate(&self) -> Result<()> {
        self.param_box.validate()?;
        self.source.validate()?;
        self.risk.validate()?;
        let m = self.param_box.dim();
        if m > MAX_DIM {
            return Err(Error::Unsupported(format!("parameter dimension {m} exceeds the supported maximum {MAX_DIM}")));
        }
        self.goal.check_dims(m, self.source.dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub theta_star: Vec<f64>,
    pub value: f64,
    /// Final grid spacing (largest over coordinates).
    pub grid_resolution: f64,
    pub refinement_depth: usize,
    pub evaluations: usize,
    /// OCE shift minimizer at θ* for divergence risks.
    pub x_star: Option<f64>,
    /// Set when the joint OCE minimizer sits on the end of a supplied interval.
    pub at_interval_boundary: bool,
}

fn axis(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let step = (hi - lo) / (k - 1) as f64;
    (0..k).map(|i| if i + 1 == k { hi } else { lo + step * i as f64 }).collect()
}

struct GridOutcome {
    theta: Vec<f64>,
    value: f64,
    resolution: f64,
    depth: usize,
    evaluations: usize,
}

/// Lexicographic grid scan with strict improvement, then refinements on
/// `[θ* − h, θ* + h] ∩ Θ` with the same point count.
fn grid_minimize<F>(param_box: &ParamBox, grid: GridSpec, mut f: F) -> Result<GridOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    grid.validate()?;
    let m = param_box.dim();
    if m > MAX_DIM {
        return Err(Error::Unsupported(format!("parameter dimension {m} exceeds the supported maximum {MAX_DIM}")));
    }
    let k = grid.points_per_dim;
    let mut lo = param_box.lower.clone();
    let mut hi = param_box.upper.clone();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluations = 0;
    let mut resolution = 0.0;
    let mut theta = vec![0.0; m];
    for depth in 0..=grid.refinements {
        let axes: Vec<Vec<f64>> = (0..m).map(|d| axis(lo[d], hi[d], k)).collect();
        let mut idx = vec![0usize; m];
        'scan: loop {
            for d in 0..m {
                theta[d] = axes[d][idx[d]];
            }
            let v = f(&theta)?;
            if v.is_nan() {
                return Err(Error::Divergence(format!("objective is NaN at {theta:?}")));
            }
            evaluations += 1;
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((theta.clone(), v));
            }
            let mut d = m;
            loop {
                if d == 0 {
                    break 'scan;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
        let steps: Vec<f64> =
            (0..m).map(|d| if axes[d].len() > 1 { (hi[d] - lo[d]) / (k - 1) as f64 } else { 0.0 }).collect();
        resolution = steps.iter().copied().fold(0.0, f64::max);
        if depth == grid.refinements || resolution == 0.0 {
            let (theta, value) = best.expect("grid has at least one point");
            return Ok(GridOutcome { theta, value, resolution, depth, evaluations });
        }
        let center = &best.as_ref().expect("grid has at least one point").0;
        for d in 0..m {
            lo[d] = (center[d] - steps[d]).max(param_box.lower[d]);
            hi[d] = (center[d] + steps[d]).min(param_box.upper[d]);
        }
    }
    let (theta, value) = best.expect("grid has at least one point");
    Ok(GridOutcome { theta, value, resolution, depth: grid.refinements, evaluations })
}

fn fill(goal: &GoalSpec, theta: &[f64], samples: &Sample, buf: &mut Vec<f64>) -> Result<()> {
    buf.clear();
    for z in samples.rows() {
        let v = goal.eval_unchecked(theta, z);
        if !v.is_finite() {
            return Err(Error::Domain(format!("goal is not finite at theta={theta:?}, z={z:?}")));
        }
        buf.push(v);
    }
    Ok(())
}

/// `inf_θ ρ(F̂_{n,θ})` on the grid scheme.
pub fn solve_empirical(problem: &SaaProblem, samples: &Sample, grid: GridSpec) -> Result<SolveResult> {
    problem.validate()?;
    check_samples(problem, samples)?;
    let mut buf = Vec::with_capacity(samples.len());
    let out = grid_minimize(&problem.param_box, grid, |theta| {
        fill(&problem.goal, theta, samples, &mut buf)?;
        apply_to(&problem.risk, &buf)
    })?;
    let x_star = match &problem.risk {
        RiskFunctional::Divergence(phi) => {
            fill(&problem.goal, &out.theta, samples, &mut buf)?;
            let bracket = oce_bracket(&buf, phi)?;
            Some(oce_of(&buf, phi, bracket)?.1)
        }
        _ => None,
    };
    Ok(SolveResult {
        theta_star: out.theta,
        value: out.value,
        grid_resolution: out.resolution,
        refinement_depth: out.depth,
        evaluations: out.evaluations,
        x_star,
        at_interval_boundary: false,
    })
}

fn check_samples(problem: &SaaProblem, samples: &Sample) -> Result<()> {
    if samples.is_empty() {
        return Err(config("samples must be nonempty"));
    }
    if samples.dim() != problem.source.dim {
        return Err(config(format!("samples have dimension {}, source has {}", samples.dim(), problem.source.dim)));
    }
    Ok(())
}

/// `inf_{(θ,x) ∈ Θ×I} (1/n)Σ[Φ*(G(θ,Z_j) + x) − x]`.
pub fn solve_oce_joint(
    problem: &SaaProblem,
    samples: &Sample,
    interval: (f64, f64),
    grid: GridSpec,
) -> Result<SolveResult> {
    problem.validate()?;
    check_samples(problem, samples)?;
    let RiskFunctional::Divergence(phi) = &problem.risk else {
        return Err(config("joint OCE solve needs a divergence risk"));
    };
    let mut buf = Vec::with_capacity(samples.len());
    let out = grid_minimize(&problem.param_box, grid, |theta| {
        fill(&problem.goal, theta, samples, &mut buf)?;
        Ok(oce_of(&buf, phi, interval)?.0)
    })?;
    fill(&problem.goal, &out.theta, samples, &mut buf)?;
    let (_, x) = oce_of(&buf, phi, interval)?;
    Ok(SolveResult {
        theta_star: out.theta,
        value: out.value,
        grid_resolution: out.resolution,
        refinement_depth: out.depth,
        evaluations: out.evaluations,
        x_star: Some(x),
        at_interval_boundary: x <= interval.0 || x >= interval.1,
    })
}

/// Population optimum with the tolerance to charge against it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueSolution {
    pub value: f64,
    pub theta_star: Option<Vec<f64>>,
    pub tolerance: f64,
}

/// `inf_θ ρ(G(θ, Z))` from the problem's oracle.
pub fn solve_true(problem: &SaaProblem, grid: GridSpec) -> Result<TrueSolution> {
    problem.validate()?;
    match &problem.true_optimum {
        None => Err(Error::Unsupported("problem has no true-optimum oracle".into())),
        Some(TrueOptimum::ClosedForm { value }) => {
            Ok(TrueSolution { value: *value, theta_star: None, tolerance: 1e-12 * (1.0 + value.abs()) })
        }
        Some(TrueOptimum::Quadrature) => {
            if problem.source.dim > 1 && !matches!(problem.source.kind, SourceKind::Discrete { .. }) {
                return Err(Error::Unsupported("quadrature oracle needs a one-dimensional or discrete source".into()));
            }
            let out = grid_minimize(&problem.param_box, grid, |theta| population_risk(problem, theta))?;
            Ok(TrueSolution { value: out.value, theta_star: Some(out.theta), tolerance: tol_opt(out.value) })
        }
    }
}

/// `ρ(G(θ, Z))` under the source law.
pub fn population_risk(problem: &SaaProblem, theta: &[f64]) -> Result<f64> {
    let src = &problem.source;
    let g = |z: &[f64]| problem.goal.eval_unchecked(theta, z);
    match &problem.risk {
        RiskFunctional::Expectation => Ok(expectation(src, g)?.value),
        RiskFunctional::Semideviation(s) => {
            let m = expectation(src, g)?.value;
            let dev = expectation(src, |z| (g(z) - m).max(0.0).powf(s.p))?.value.max(0.0).powf(1.0 / s.p);
            Ok(m + s.a * dev)
        }
        RiskFunctional::Divergence(phi) => population_oce(src, phi, &g),
    }
}

fn population_oce<G: Fn(&[f64]) -> f64>(src: &SourceDistribution, phi: &PhiFamily, g: &G) -> Result<f64> {
    let mean_abs = expectation(src, |z| g(z).abs().max(ENVELOPE_FLOOR))?.value;
    let mean_ps = expectation(src, |z| phi.phi_star(g(z).abs().max(ENVELOPE_FLOOR)))?.value;
    let CompactInterval { x_l, x_u, .. } = compactification_interval(phi, phi.x0, mean_abs, mean_ps, 1.0)?;
    let h = |x: f64| -> Result<f64> {
        let v = expectation(src, |z| phi.phi_star(g(z) + x))?.value - x;
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    };
    let (_, v) = golden_section(h, x_l, x_u, GOLDEN_TOL)?;
    Ok([h(x_l)?, v, h(x_u)?].iter().copied().fold(f64::INFINITY, f64::min))
}
