//! Experiment configuration: one JSON document plus `--set key=value` overrides.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use saarb_core::goal::{build_envelope_hoelder, build_envelope_pl, CustomGoal};
use saarb_core::problems::{self, BundledProblem};
use saarb_core::saa::MAX_DIM;
use saarb_core::{
    EntropySource, EnvelopeSpec, GoalSpec, GridSpec, HoelderForm, HoelderGoal, ParamBox, PhiFamily, PlGoal,
    RemainderMode, RiskFunctional, SaaProblem, SemideviationParams, SourceDistribution, TrueOptimum,
};

use crate::CliError;

/// Short keys accepted by `--set` in place of full dotted paths.
const ALIASES: &[(&str, &str)] = &[
    ("n", "mc.n"),
    ("seed", "mc.seed"),
    ("replications", "mc.replications"),
    ("R", "mc.replications"),
    ("n_list", "mc.n_list"),
    ("eps_list", "bounds.eps_list"),
    ("t_grid", "bounds.t_grid"),
    ("delta", "bounds.delta"),
    ("x0", "risk.x0"),
    ("alpha", "risk.alpha"),
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemSection,
    #[serde(default)]
    pub risk: RiskSection,
    #[serde(default)]
    pub grids: GridsSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub verify: VerifySection,
}

/// Either a bundled problem by name or an explicit goal, box and source.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub bundled: Option<String>,
    pub goal: Option<GoalSection>,
    #[serde(rename = "box")]
    pub param_box: Option<ParamBox>,
    pub source: Option<SourceDistribution>,
    pub entropy: Option<EntropySource>,
    pub true_optimum: Option<TrueOptimum>,
    /// Replaces the constructed envelope with `ξ ≡ c`.
    pub envelope_constant: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GoalSection {
    Hoelder {
        form: HoelderForm,
        base_point: Option<Vec<f64>>,
        coeff: Option<f64>,
    },
    Pl(PlGoal),
    /// `G ≡ value`; convenient for smoke tests.
    Constant {
        value: f64,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RiskSection {
    #[default]
    Expectation,
    Semideviation {
        p: f64,
        a: f64,
    },
    Avar {
        alpha: f64,
        x0: f64,
    },
    Entropic {
        x0: f64,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsSection {
    pub points_per_dim: Option<usize>,
    pub refinements: Option<usize>,
    pub true_points_per_dim: Option<usize>,
    pub true_refinements: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    pub n_list: Vec<usize>,
    pub eps_list: Vec<f64>,
    pub t_grid: Option<Vec<f64>>,
    pub delta: f64,
    pub remainder: RemainderMode,
    /// δ values at which the J table is printed.
    pub j_deltas: Vec<f64>,
    /// Multiplies every bound; a fixture for forced violations.
    pub scale: f64,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            n_list: vec![100, 1000],
            eps_list: vec![0.1, 1.0, 10.0],
            t_grid: None,
            delta: 1.0,
            remainder: RemainderMode::Auto,
            j_deltas: vec![0.25, 0.5],
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    /// Sample size of `solve`.
    pub n: usize,
    /// Sample sizes of `mc`; defaults to `bounds.n_list`.
    pub n_list: Option<Vec<usize>>,
    pub replications: usize,
    pub seed: u64,
}

impl Default for McSection {
    fn default() -> Self {
        Self { n: 100, n_list: None, replications: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Checks to run; `None` runs all of them.
    pub checks: Option<Vec<String>>,
    /// Name of a check whose computed value is perturbed; a test fixture.
    pub corrupt: Option<String>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Reads the config file and applies overrides in order.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config, CliError> {
    let mut doc = match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str::<Value>(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?
        }
        None => serde_json::json!({ "problem": { "bundled": "quadratic" } }),
    };
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: Config = serde_json::from_value(doc).map_err(|e| config_err(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// `key=value` with a dotted key; the value is parsed as JSON, else taken as a string.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| config_err(format!("override {spec:?} is not key=value")))?;
    let key = ALIASES.iter().find(|(a, _)| *a == key).map_or(key, |(_, full)| full);
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(config_err(format!("override key {key:?} has an empty segment")));
        }
        let obj = match node {
            Value::Object(m) => m,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().expect("just set")
            }
            _ => return Err(config_err(format!("override key {key:?} walks into a non-object"))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split yields at least one segment")
}

impl Config {
    pub fn validate(&self) -> Result<(), CliError> {
        let b = &self.bounds;
        if b.n_list.is_empty() || b.n_list.contains(&0) {
            return Err(config_err("bounds.n_list must be nonempty with positive entries"));
        }
        if b.eps_list.is_empty() || b.eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(config_err("bounds.eps_list must be nonempty with positive entries"));
        }
        if b.t_grid.as_ref().is_some_and(|g| g.is_empty() || g.iter().any(|t| !(t.is_finite() && *t > 0.0))) {
            return Err(config_err("bounds.t_grid must be nonempty with positive entries"));
        }
        if !(b.delta > 0.0 && b.delta.is_finite()) {
            return Err(config_err("bounds.delta must be positive"));
        }
        if !(b.scale > 0.0 && b.scale.is_finite()) {
            return Err(config_err("bounds.scale must be positive"));
        }
        if self.mc.n == 0 {
            return Err(config_err("mc.n must be at least 1"));
        }
        if self.mc.replications == 0 {
            return Err(config_err("mc.replications must be at least 1"));
        }
        let p = &self.problem;
        if p.bundled.is_some() == p.goal.is_some() {
            return Err(config_err("problem needs exactly one of `bundled` or `goal`"));
        }
        if p.bundled.is_some() && (p.param_box.is_some() || p.source.is_some()) {
            return Err(config_err("bundled problems fix their own box and source"));
        }
        if let Some(pts) = self.grids.points_per_dim {
            if pts < 2 {
                return Err(config_err("grids.points_per_dim must be at least 2"));
            }
        }
        Ok(())
    }

    pub fn risk(&self) -> Result<RiskFunctional, CliError> {
        Ok(match self.risk {
            RiskSection::Expectation => RiskFunctional::Expectation,
            RiskSection::Semideviation { p, a } => RiskFunctional::Semideviation(SemideviationParams::new(p, a)?),
            RiskSection::Avar { alpha, x0 } => RiskFunctional::Divergence(PhiFamily::avar(alpha, x0)?),
            RiskSection::Entropic { x0 } => RiskFunctional::Divergence(PhiFamily::entropic(x0)?),
        })
    }

    /// The problem with its envelope and entropy source.
    pub fn problem(&self) -> Result<BundledProblem, CliError> {
        let risk = self.risk()?;
        let p = &self.problem;
        let mut out = match (&p.bundled, &p.goal) {
            (Some(name), _) => problems::by_name(name, risk)
                .ok_or_else(|| config_err(format!("unknown bundled problem {name:?}")))??,
            (None, Some(goal)) => self.explicit_problem(goal, risk)?,
            (None, None) => unreachable!("checked by validate"),
        };
        if let Some(e) = &p.entropy {
            out.entropy = e.clone();
        }
        if let Some(t) = &p.true_optimum {
            out.problem.true_optimum = Some(t.clone());
        }
        if let Some(c) = p.envelope_constant {
            if !(c > 0.0 && c.is_finite()) {
                return Err(config_err("problem.envelope_constant must be positive"));
            }
            out.envelope = EnvelopeSpec::constant(c);
        }
        out.problem.validate()?;
        Ok(out)
    }

    fn explicit_problem(&self, goal: &GoalSection, risk: RiskFunctional) -> Result<BundledProblem, CliError> {
        let p = &self.problem;
        let param_box =
            p.param_box.clone().ok_or_else(|| config_err("problem.box is required with an explicit goal"))?;
        param_box.validate()?;
        if param_box.dim() > MAX_DIM {
            return Err(CliError::Core(saarb_core::Error::Unsupported(format!(
                "parameter dimension {} exceeds the supported maximum {MAX_DIM}",
                param_box.dim()
            ))));
        }
        let source = p.source.clone().ok_or_else(|| config_err("problem.source is required with an explicit goal"))?;
        let m = param_box.dim();
        let quadrature = Some(TrueOptimum::Quadrature);
        let (goal, envelope, entropy, true_optimum) = match goal {
            GoalSection::Hoelder { form, base_point, coeff } => {
                let mut g = HoelderGoal::new(form.clone());
                if let Some(b) = base_point {
                    g = g.with_base_point(b.clone());
                }
                if let Some(c) = coeff {
                    g = g.with_constant_coeff(*c);
                }
                let env = build_envelope_hoelder(&g, &param_box)?;
                let beta = g.beta();
                (GoalSpec::Hoelder(g), env, EntropySource::Hoelder { m, beta }, quadrature)
            }
            GoalSection::Pl(pl) => {
                let env = build_envelope_pl(pl, &param_box)?;
                let s = pl.cell_counts();
                (GoalSpec::Pl(pl.clone()), env, EntropySource::Pl { s }, quadrature)
            }
            GoalSection::Constant { value } => {
                let v = *value;
                let goal = GoalSpec::Custom(CustomGoal::new("constant", move |_, _| v));
                let env = EnvelopeSpec::constant(v.abs().max(saarb_core::goal::ENVELOPE_FLOOR));
                // every supported risk is translation equivariant with ρ(0) = 0
                (goal, env, EntropySource::Hoelder { m, beta: 1.0 }, Some(TrueOptimum::ClosedForm { value: v }))
            }
        };
        Ok(BundledProblem {
            name: "custom",
            problem: SaaProblem { goal, param_box, source, risk, true_optimum },
            envelope,
            entropy,
        })
    }

    pub fn grid(&self, m: usize) -> GridSpec {
        let d = GridSpec::default_for(m);
        GridSpec {
            points_per_dim: self.grids.points_per_dim.unwrap_or(d.points_per_dim),
            refinements: self.grids.refinements.unwrap_or(d.refinements),
        }
    }

    pub fn true_grid(&self, m: usize) -> GridSpec {
        let d = GridSpec::default_for(m);
        GridSpec {
            points_per_dim: self.grids.true_points_per_dim.unwrap_or(d.points_per_dim),
            refinements: self.grids.true_refinements.unwrap_or(d.refinements),
        }
    }

    pub fn mc_n_list(&self) -> Vec<usize> {
        self.mc.n_list.clone().unwrap_or_else(|| self.bounds.n_list.clone())
    }

    pub fn t_grid(&self) -> Vec<f64> {
        self.bounds.t_grid.clone().unwrap_or_else(saarb_core::bounds::default_t_grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Value {
        serde_json::json!({ "problem": { "bundled": "bounded_product" } })
    }

    #[test]
    fn overrides_and_aliases() {
        let mut v = base();
        apply_override(&mut v, "n=250").unwrap();
        apply_override(&mut v, "risk.kind=avar").unwrap();
        apply_override(&mut v, "alpha=0.5").unwrap();
        apply_override(&mut v, "x0=1.5").unwrap();
        apply_override(&mut v, "bounds.eps_list=[1, 2]").unwrap();
        let cfg: Config = serde_json::from_value(v).unwrap();
        assert_eq!(cfg.mc.n, 250);
        assert_eq!(cfg.bounds.eps_list, vec![1.0, 2.0]);
        assert!(matches!(cfg.risk, RiskSection::Avar { alpha, x0 } if alpha == 0.5 && x0 == 1.5));
        assert!(matches!(cfg.risk().unwrap(), RiskFunctional::Divergence(_)));
    }

    #[test]
    fn bad_overrides() {
        let mut v = base();
        assert!(apply_override(&mut v, "novalue").is_err());
        assert!(apply_override(&mut v, "problem.bundled.x=1").is_err());
        assert!(apply_override(&mut v, "a..b=1").is_err());
    }

    #[test]
    fn validation() {
        let mut v = base();
        apply_override(&mut v, "n=0").unwrap();
        let cfg: Config = serde_json::from_value(v).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));

        let cfg: Config = serde_json::from_value(serde_json::json!({ "problem": {} })).unwrap();
        assert!(cfg.validate().is_err());

        let unknown = serde_json::json!({ "problem": { "bundled": "quadratic" }, "extra": 1 });
        assert!(serde_json::from_value::<Config>(unknown).is_err());
    }

    #[test]
    fn explicit_goal_builds() {
        let v = serde_json::json!({
            "problem": {
                "goal": { "type": "hoelder", "form": { "kind": "abs_diff" } },
                "box": { "lower": [0.0], "upper": [1.0] },
                "source": { "kind": "uniform", "lo": 0.0, "hi": 1.0 }
            },
            "risk": { "kind": "semideviation", "p": 2.0, "a": 0.5 }
        });
        let cfg: Config = serde_json::from_value(v).unwrap();
        cfg.validate().unwrap();
        let b = cfg.problem().unwrap();
        assert_eq!(b.entropy, EntropySource::Hoelder { m: 1, beta: 1.0 });
        assert_eq!(b.problem.true_optimum, Some(TrueOptimum::Quadrature));
    }

    #[test]
    fn too_many_dimensions_is_unsupported() {
        let v = serde_json::json!({
            "problem": {
                "goal": { "type": "hoelder", "form": { "kind": "abs_diff" } },
                "box": { "lower": [0.0, 0.0, 0.0, 0.0], "upper": [1.0, 1.0, 1.0, 1.0] },
                "source": { "kind": "uniform", "lo": 0.0, "hi": 1.0, "dim": 4 }
            }
        });
        let cfg: Config = serde_json::from_value(v).unwrap();
        assert!(matches!(cfg.problem(), Err(CliError::Core(saarb_core::Error::Unsupported(_)))));
    }
}
