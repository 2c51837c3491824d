//! Bundled test problems with known optima.

use crate::dist::SourceDistribution;
use crate::entropy::EntropySource;
use crate::error::Result;
use crate::goal::{build_envelope_hoelder, EnvelopeSpec, GoalSpec, HoelderForm, HoelderGoal, ParamBox};
use crate::risk::{PhiKind, RiskFunctional};
use crate::saa::{SaaProblem, TrueOptimum};

/// A problem together with its envelope and entropy source.
#[derive(Debug, Clone)]
pub struct BundledProblem {
    pub name: &'static str,
    pub problem: SaaProblem,
    pub envelope: EnvelopeSpec,
    pub entropy: EntropySource,
}

/// `G(θ, z) = θz` on `Θ = [0, 1]`, `Z ~ U(−1, 1)`, envelope `ξ ≡ 1`.
///
/// The optimal value is 0 for every supported risk: `ρ(θZ) = θρ(Z)` and `ρ(Z) ≥ E Z = 0`.
pub fn bounded_product(risk: RiskFunctional) -> Result<BundledProblem> {
    let hoelder = HoelderGoal::new(HoelderForm::Product).with_base_point(vec![0.0]).with_constant_coeff(1.0);
    let param_box = ParamBox::interval(0.0, 1.0)?;
    let envelope = build_envelope_hoelder(&hoelder, &param_box)?;
    Ok(BundledProblem {
        name: "bounded_product",
        problem: SaaProblem {
            goal: GoalSpec::Hoelder(hoelder),
            param_box,
            source: SourceDistribution::uniform(-1.0, 1.0)?,
            risk,
            true_optimum: Some(TrueOptimum::ClosedForm { value: 0.0 }),
        },
        envelope,
        entropy: EntropySource::Hoelder { m: 1, beta: 1.0 },
    })
}

/// `G(θ, z) = (θ − z)²` on `Θ = [0, 1]`, `Z ~ U(0, 1)`.
///
/// θ = 1/2 minimizes every convex law-invariant risk by symmetry; closed forms
/// are used where known, quadrature otherwise.
pub fn quadratic(risk: RiskFunctional) -> Result<BundledProblem> {
    let hoelder = HoelderGoal::new(HoelderForm::Quadratic).with_base_point(vec![0.0]);
    let param_box = ParamBox::interval(0.0, 1.0)?;
    let envelope = build_envelope_hoelder(&hoelder, &param_box)?;
    let value = match &risk {
        RiskFunctional::Expectation => Some(1.0 / 12.0),
        RiskFunctional::Semideviation(s) if s.p == 1.0 => Some(1.0 / 12.0 + s.a / (18.0 * 3f64.sqrt())),
        RiskFunctional::Divergence(phi) => match phi.kind {
            PhiKind::Avar { alpha: 0.5 } => Some(7.0 / 48.0),
            _ => None,
        },
        _ => None,
    };
    Ok(BundledProblem {
        name: "quadratic",
        problem: SaaProblem {
            goal: GoalSpec::Hoelder(hoelder),
            param_box,
            source: SourceDistribution::uniform(0.0, 1.0)?,
            risk,
            true_optimum: Some(value.map_or(TrueOptimum::Quadrature, |value| TrueOptimum::ClosedForm { value })),
        },
        envelope,
        entropy: EntropySource::Hoelder { m: 1, beta: 1.0 },
    })
}

pub fn by_name(name: &str, risk: RiskFunctional) -> Option<Result<BundledProblem>> {
    match name {
        "bounded_product" => Some(bounded_product(risk)),
        "quadratic" => Some(quadratic(risk)),
        _ => None,
    }
}
