//! Goal-function families `G(θ, z)` and their envelopes.
//!
//! Two structured families carry explicit entropy bounds: goals that are
//! Hölder continuous in θ with a z-dependent coefficient, and piecewise-linear
//! goals built from affine pieces selected by half-space indicators. Anything
//! else is a [`CustomGoal`] whose envelope and entropy bound the caller supplies;
//! the measurability conditions needed by the deviation bounds are assumed for
//! custom goals, not checked.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{sample, stream_rng, SourceDistribution, SourceKind};
use crate::error::{config, domain, Result};

/// Envelopes are floored here so they stay strictly positive.
pub const ENVELOPE_FLOOR: f64 = 1e-12;

/// Compact box Θ ⊂ ℝ^m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(config("parameter box needs matching nonempty lower/upper corners"));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(config(format!("parameter box needs finite lower <= upper, got [{l}, {u}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Euclidean diameter Δ(Θ).
    pub fn diameter(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| (u - l).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().zip(self.lower.iter().zip(&self.upper)).all(|(t, (l, u))| l <= t && t <= u)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    /// All 2^m corners.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        (0..1usize << m)
            .map(|mask| (0..m).map(|k| if mask >> k & 1 == 1 { self.upper[k] } else { self.lower[k] }).collect())
            .collect()
    }

    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| l + (u - l) * rng.random::<f64>()).collect()
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

type GoalFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
type ZFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Closed-form goals with a known Hölder exponent and coefficient.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HoelderForm {
    /// `⟨θ, z⟩`, coefficient `‖z‖`.
    Product,
    /// `‖θ − z‖²`, coefficient `2·max_{c corner} ‖c − z‖`.
    Quadratic,
    /// `‖θ − z‖`, coefficient 1.
    AbsDiff,
    /// `‖θ − z‖^{1/2}`, exponent 1/2, coefficient 1.
    SqrtAbsDiff,
    /// `G ≡ c`; the coefficient is the positivity floor.
    Constant { c: f64 },
    /// `⟨u, θ⟩ + ⟨w, z⟩ + b`, coefficient `‖u‖`.
    Affine { theta_coef: Vec<f64>, z_coef: Vec<f64>, offset: f64 },
    #[serde(skip)]
    Closure { beta: f64, eval: GoalFn, coeff: ZFn },
}

impl fmt::Debug for HoelderForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Product => write!(f, "Product"),
            Self::Quadratic => write!(f, "Quadratic"),
            Self::AbsDiff => write!(f, "AbsDiff"),
            Self::SqrtAbsDiff => write!(f, "SqrtAbsDiff"),
            Self::Constant { c } => write!(f, "Constant({c})"),
            Self::Affine { theta_coef, z_coef, offset } => {
                write!(f, "Affine({theta_coef:?}, {z_coef:?}, {offset})")
            }
            Self::Closure { beta, .. } => write!(f, "Closure(beta={beta})"),
        }
    }
}

/// A goal satisfying `|G(θ,z) − G(ϑ,z)| ≤ C(z)·‖θ − ϑ‖^β`.
#[derive(Debug, Clone)]
pub struct HoelderGoal {
    pub form: HoelderForm,
    /// θ̄ used by the envelope construction; defaults to the box's lower corner.
    pub base_point: Option<Vec<f64>>,
    /// Replaces the form's coefficient by a constant (must still be a valid coefficient on the support).
    pub coeff_override: Option<f64>,
}

impl HoelderGoal {
    pub fn new(form: HoelderForm) -> Self {
        Self { form, base_point: None, coeff_override: None }
    }

    pub fn closure<G, C>(beta: f64, eval: G, coeff: C) -> Result<Self>
    where
        G: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        C: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(config(format!("Hoelder exponent must lie in (0,1], got {beta}")));
        }
        Ok(Self::new(HoelderForm::Closure { beta, eval: Arc::new(eval), coeff: Arc::new(coeff) }))
    }

    pub fn with_base_point(mut self, theta: Vec<f64>) -> Self {
        self.base_point = Some(theta);
        self
    }

    pub fn with_constant_coeff(mut self, c: f64) -> Self {
        self.coeff_override = Some(c);
        self
    }

    pub fn beta(&self) -> f64 {
        match &self.form {
            HoelderForm::SqrtAbsDiff => 0.5,
            HoelderForm::Closure { beta, .. } => *beta,
            _ => 1.0,
        }
    }

    fn value(&self, theta: &[f64], z: &[f64]) -> f64 {
        match &self.form {
            HoelderForm::Product => dot(theta, z),
            HoelderForm::Quadratic => dist2(theta, z).powi(2),
            HoelderForm::AbsDiff => dist2(theta, z),
            HoelderForm::SqrtAbsDiff => dist2(theta, z).sqrt(),
            HoelderForm::Constant { c } => *c,
            HoelderForm::Affine { theta_coef, z_coef, offset } => dot(theta_coef, theta) + dot(z_coef, z) + offset,
            HoelderForm::Closure { eval, .. } => eval(theta, z),
        }
    }

    /// Hölder coefficient C(z) on the given box.
    pub fn coeff(&self, z: &[f64], param_box: &ParamBox) -> f64 {
        if let Some(c) = self.coeff_override {
            return c;
        }
        match &self.form {
            HoelderForm::Product => z.iter().map(|v| v * v).sum::<f64>().sqrt(),
            HoelderForm::Quadratic => 2.0 * param_box.corners().iter().map(|c| dist2(c, z)).fold(0.0, f64::max),
            HoelderForm::AbsDiff | HoelderForm::SqrtAbsDiff => 1.0,
            HoelderForm::Constant { .. } => ENVELOPE_FLOOR,
            HoelderForm::Affine { theta_coef, .. } => {
                theta_coef.iter().map(|v| v * v).sum::<f64>().sqrt().max(ENVELOPE_FLOOR)
            }
            HoelderForm::Closure { coeff, .. } => coeff(z),
        }
    }

    fn check_dims(&self, m: usize, d: usize) -> Result<()> {
        let ok = match &self.form {
            HoelderForm::Product | HoelderForm::Quadratic | HoelderForm::AbsDiff | HoelderForm::SqrtAbsDiff => m == d,
            HoelderForm::Affine { theta_coef, z_coef, .. } => theta_coef.len() == m && z_coef.len() == d,
            HoelderForm::Constant { .. } | HoelderForm::Closure { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(config(format!("goal {:?} does not fit parameter dimension {m} and source dimension {d}", self.form)))
        }
    }
}

/// Whether a cell constraint uses `(0,∞)` or `[0,∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalType {
    Open,
    Closed,
}

impl IntervalType {
    pub fn contains(self, x: f64) -> bool {
        match self {
            Self::Open => x > 0.0,
            Self::Closed => x >= 0.0,
        }
    }
}

/// One constraint `L(T θ + z) + a ∈ I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlConstraint {
    pub l: Vec<f64>,
    pub a: f64,
    pub interval: IntervalType,
}

/// A cell: the affine piece `Λ(Tθ + z) + b` active where all constraints hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlCell {
    pub lambda: Vec<f64>,
    pub b: f64,
    pub constraints: Vec<PlConstraint>,
}

/// Piecewise-linear goal `Σ_i f^i(θ,z)·(Λ_i(Tθ + z) + b_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlGoal {
    pub cells: Vec<PlCell>,
    /// Linear map T: ℝ^m → ℝ^d as d rows of length m.
    pub transform: Vec<Vec<f64>>,
}

impl PlGoal {
    pub fn new(cells: Vec<PlCell>, transform: Vec<Vec<f64>>) -> Result<Self> {
        let g = Self { cells, transform };
        g.validate_shape()?;
        Ok(g)
    }

    pub fn validate_shape(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(config("piecewise-linear goal needs at least one cell"));
        }
        let d = self.transform.len();
        let m = self.transform.first().map_or(0, Vec::len);
        if d == 0 || m == 0 || self.transform.iter().any(|r| r.len() != m) {
            return Err(config("transform must be a nonempty d x m matrix"));
        }
        for (i, c) in self.cells.iter().enumerate() {
            if c.lambda.len() != d {
                return Err(config(format!("cell {i}: lambda has length {}, expected {d}", c.lambda.len())));
            }
            if c.constraints.is_empty() {
                return Err(config(format!("cell {i}: needs at least one constraint")));
            }
            if c.constraints.iter().any(|k| k.l.len() != d) {
                return Err(config(format!("cell {i}: constraint vectors must have length {d}")));
            }
        }
        Ok(())
    }

    pub fn param_dim(&self) -> usize {
        self.transform.first().map_or(0, Vec::len)
    }

    pub fn source_dim(&self) -> usize {
        self.transform.len()
    }

    pub fn cell_counts(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c.constraints.len()).collect()
    }

    fn shifted(&self, theta: &[f64], z: &[f64]) -> Vec<f64> {
        self.transform.iter().zip(z).map(|(row, zi)| dot(row, theta) + zi).collect()
    }

    /// Cell indicator values `f^i(θ, z)`.
    pub fn indicators(&self, theta: &[f64], z: &[f64]) -> Vec<bool> {
        let x = self.shifted(theta, z);
        self.cells.iter().map(|c| cell_active(c, &x)).collect()
    }

    fn value(&self, theta: &[f64], z: &[f64]) -> f64 {
        let x = self.shifted(theta, z);
        self.cells.iter().filter(|c| cell_active(c, &x)).map(|c| dot(&c.lambda, &x) + c.b).sum()
    }

    /// `η_i^G = sup_θ |Λ_i(Tθ) + b_i|`, replaced by 1 when that sup is zero.
    pub fn eta(&self, param_box: &ParamBox) -> Vec<f64> {
        let corners = param_box.corners();
        self.cells
            .iter()
            .map(|c| {
                let sup = corners
                    .iter()
                    .map(|th| {
                        let t: Vec<f64> = self.transform.iter().map(|row| dot(row, th)).collect();
                        (dot(&c.lambda, &t) + c.b).abs()
                    })
                    .fold(0.0, f64::max);
                if sup == 0.0 {
                    1.0
                } else {
                    sup
                }
            })
            .collect()
    }
}

fn cell_active(cell: &PlCell, x: &[f64]) -> bool {
    cell.constraints.iter().all(|k| k.interval.contains(dot(&k.l, x) + k.a))
}

/// A goal with no exploitable structure.
#[derive(Clone)]
pub struct CustomGoal {
    pub name: String,
    eval: GoalFn,
}

impl CustomGoal {
    pub fn new<G>(name: impl Into<String>, eval: G) -> Self
    where
        G: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), eval: Arc::new(eval) }
    }
}

impl fmt::Debug for CustomGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomGoal({})", self.name)
    }
}

/// Parameterized goal function G: Θ × ℝ^d → ℝ.
#[derive(Debug, Clone)]
pub enum GoalSpec {
    Hoelder(HoelderGoal),
    Pl(PlGoal),
    Custom(CustomGoal),
}

impl GoalSpec {
    /// Evaluation without the box check, for hot loops that already validated θ.
    #[inline]
    pub fn eval_unchecked(&self, theta: &[f64], z: &[f64]) -> f64 {
        match self {
            Self::Hoelder(h) => h.value(theta, z),
            Self::Pl(p) => p.value(theta, z),
            Self::Custom(c) => (c.eval)(theta, z),
        }
    }

    pub fn check_dims(&self, m: usize, d: usize) -> Result<()> {
        match self {
            Self::Hoelder(h) => h.check_dims(m, d),
            Self::Pl(p) => {
                p.validate_shape()?;
                if p.param_dim() == m && p.source_dim() == d {
                    Ok(())
                } else {
                    Err(config(format!(
                        "piecewise-linear goal is {}x{} but box has dimension {m} and source {d}",
                        p.source_dim(),
                        p.param_dim()
                    )))
                }
            }
            Self::Custom(_) => Ok(()),
        }
    }
}

/// `G(θ, z)` for θ inside the box.
pub fn evaluate(goal: &GoalSpec, param_box: &ParamBox, theta: &[f64], z: &[f64]) -> Result<f64> {
    if !param_box.contains(theta) {
        return Err(domain(format!("parameter {theta:?} lies outside the box")));
    }
    let v = goal.eval_unchecked(theta, z);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(format!("goal is not finite at theta={theta:?}, z={z:?}")))
    }
}

/// Where an envelope came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeProvenance {
    HoelderBuilt,
    PlBuilt,
    User,
    Derived,
}

/// Strictly positive map ξ with `sup_θ |G(θ, z)| ≤ ξ(z)`.
#[derive(Clone)]
pub struct EnvelopeSpec {
    map: ZFn,
    constant: Option<f64>,
    pub provenance: EnvelopeProvenance,
}

impl fmt::Debug for EnvelopeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnvelopeSpec").field("provenance", &self.provenance).field("constant", &self.constant).finish()
    }
}

impl EnvelopeSpec {
    pub fn constant(value: f64) -> Self {
        let v = value.max(ENVELOPE_FLOOR);
        Self { map: Arc::new(move |_| v), constant: Some(v), provenance: EnvelopeProvenance::User }
    }

    pub fn user<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { map: Arc::new(f), constant: None, provenance: EnvelopeProvenance::User }
    }

    #[inline]
    pub fn eval(&self, z: &[f64]) -> f64 {
        (self.map)(z)
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    /// The envelope `z ↦ g(ξ(z))`, still constant when ξ is.
    pub fn compose<F>(&self, g: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        match self.constant {
            Some(c) => {
                let v = g(c);
                Self { map: Arc::new(move |_| v), constant: Some(v), provenance: EnvelopeProvenance::Derived }
            }
            None => {
                let inner = Arc::clone(&self.map);
                Self { map: Arc::new(move |z| g(inner(z))), constant: None, provenance: EnvelopeProvenance::Derived }
            }
        }
    }
}

/// `ξ = C·Δ(Θ)^β + |G(θ̄, ·)|`, floored at [`ENVELOPE_FLOOR`].
pub fn build_envelope_hoelder(goal: &HoelderGoal, param_box: &ParamBox) -> Result<EnvelopeSpec> {
    let base = goal.base_point.clone().unwrap_or_else(|| param_box.lower.clone());
    if !param_box.contains(&base) {
        return Err(domain(format!("base point {base:?} lies outside the box")));
    }
    let scale = param_box.diameter().powf(goal.beta());
    let coeff = match (&goal.form, goal.coeff_override) {
        (_, Some(k)) => Some(k),
        (HoelderForm::Constant { .. }, None) => Some(ENVELOPE_FLOOR),
        (HoelderForm::AbsDiff | HoelderForm::SqrtAbsDiff, None) => Some(1.0),
        (HoelderForm::Affine { theta_coef, .. }, None) => Some(dot(theta_coef, theta_coef).sqrt().max(ENVELOPE_FLOOR)),
        _ => None,
    };
    let base_value = match &goal.form {
        HoelderForm::Constant { c } => Some(c.abs()),
        HoelderForm::Product if base.iter().all(|&t| t == 0.0) => Some(0.0),
        HoelderForm::Affine { theta_coef, z_coef, offset } if z_coef.iter().all(|&w| w == 0.0) => {
            Some((dot(theta_coef, &base) + offset).abs())
        }
        _ => None,
    };
    let constant = coeff.zip(base_value).map(|(k, b)| k * scale + b);
    let g = goal.clone();
    let b = param_box.clone();
    let mut env = EnvelopeSpec::user(move |z| (g.coeff(z, &b) * scale + g.value(&base, z).abs()).max(ENVELOPE_FLOOR));
    if let Some(c) = constant {
        env = EnvelopeSpec::constant(c);
    }
    env.provenance = EnvelopeProvenance::HoelderBuilt;
    Ok(env)
}

/// `ξ = Σ_i (|Λ_i| + η_i^G)` with bounded cell envelopes `ξ_i ≡ 1`.
pub fn build_envelope_pl(goal: &PlGoal, param_box: &ParamBox) -> Result<EnvelopeSpec> {
    goal.validate_shape()?;
    if goal.param_dim() != param_box.dim() {
        return Err(config("piecewise-linear goal and box dimensions differ"));
    }
    let eta = goal.eta(param_box);
    let mut env = if goal.cells.iter().all(|c| c.lambda.iter().all(|&v| v == 0.0)) {
        EnvelopeSpec::constant(eta.iter().sum())
    } else {
        let lambdas: Vec<Vec<f64>> = goal.cells.iter().map(|c| c.lambda.clone()).collect();
        EnvelopeSpec::user(move |z| lambdas.iter().zip(&eta).map(|(l, e)| dot(l, z).abs() + e).sum())
    };
    env.provenance = EnvelopeProvenance::PlBuilt;
    Ok(env)
}

/// Outcome of probing the partition conditions of a piecewise-linear goal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub probes: usize,
    /// (probe index, first cell, second cell) where two indicators fire together.
    pub disjointness_violations: Vec<(usize, usize, usize)>,
    /// (probe index, number of active cells) where the indicators do not sum to one.
    pub partition_violations: Vec<(usize, usize)>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.disjointness_violations.is_empty() && self.partition_violations.is_empty()
    }
}

/// Checks disjointness and partition of unity of the cell indicators on every probe.
pub fn validate_pl(goal: &PlGoal, probes: &[(Vec<f64>, Vec<f64>)]) -> ValidationReport {
    let mut report = ValidationReport {
        probes: probes.len(),
        disjointness_violations: Vec::new(),
        partition_violations: Vec::new(),
    };
    for (k, (theta, z)) in probes.iter().enumerate() {
        let active: Vec<usize> =
            goal.indicators(theta, z).iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i).collect();
        for (a, &i) in active.iter().enumerate() {
            for &j in &active[a + 1..] {
                report.disjointness_violations.push((k, i, j));
            }
        }
        if active.len() != 1 {
            report.partition_violations.push((k, active.len()));
        }
    }
    report
}

/// Random probes plus probes pushed onto every constraint boundary.
pub fn default_pl_probes(
    goal: &PlGoal,
    param_box: &ParamBox,
    source: &SourceDistribution,
    count: usize,
    seed: u64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut rng = stream_rng(seed, 0x706c);
    let zs = sample(source, count.max(1), seed)?;
    let constraints: Vec<&PlConstraint> = goal.cells.iter().flat_map(|c| &c.constraints).collect();
    let mut probes = Vec::with_capacity(count);
    for (k, z) in zs.rows().enumerate() {
        let theta = param_box.sample_point(&mut rng);
        // every other probe is projected onto a boundary hyperplane
        if k % 2 == 1 && !constraints.is_empty() {
            let con = constraints[(k / 2) % constraints.len()];
            let norm2 = dot(&con.l, &con.l);
            if norm2 > 0.0 {
                let x = goal.shifted(&theta, z);
                let s = (dot(&con.l, &x) + con.a) / norm2;
                let zz: Vec<f64> = z.iter().zip(&con.l).map(|(zi, li)| zi - s * li).collect();
                probes.push((theta, zz));
                continue;
            }
        }
        probes.push((theta, z.to_vec()));
    }
    Ok(probes)
}

/// Warnings for atoms of a discrete source that can sit on a closed cell boundary.
///
/// Such atoms break the null-set condition under which the piecewise-linear
/// entropy bound applies.
pub fn pl_atom_warnings(goal: &PlGoal, param_box: &ParamBox, source: &SourceDistribution) -> Vec<String> {
    let SourceKind::Discrete { points, weights } = &source.kind else {
        return Vec::new();
    };
    let atoms: Vec<f64> = points.iter().zip(weights).filter(|(_, &w)| w > 0.0).map(|(p, _)| *p).collect();
    let d = source.dim;
    if atoms.len().checked_pow(d as u32).is_none_or(|c| c > 1 << 16) {
        return vec!["too many atoms to check closed cell boundaries".into()];
    }
    let corners = param_box.corners();
    let mut warnings = Vec::new();
    for (i, cell) in goal.cells.iter().enumerate() {
        for (l, con) in cell.constraints.iter().enumerate() {
            if con.interval != IntervalType::Closed {
                continue;
            }
            // range of −L(Tθ) − a over the box
            let vals: Vec<f64> = corners
                .iter()
                .map(|th| {
                    let t: Vec<f64> = goal.transform.iter().map(|row| dot(row, th)).collect();
                    -dot(&con.l, &t) - con.a
                })
                .collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut idx = vec![0usize; d];
            'atoms: loop {
                let z: Vec<f64> = idx.iter().map(|&k| atoms[k]).collect();
                let lz = dot(&con.l, &z);
                if lz >= lo && lz <= hi {
                    warnings.push(format!("cell {i}, constraint {l}: atom {z:?} can lie on the closed boundary"));
                    break 'atoms;
                }
                let mut k = d;
                loop {
                    if k == 0 {
                        break 'atoms;
                    }
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < atoms.len() {
                        break;
                    }
                    idx[k] = 0;
                }
            }
        }
    }
    warnings
}

/// Probe failures of a structural property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub probes: usize,
    pub violations: usize,
    pub worst_excess: f64,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Spot-checks `|G(θ, z)| ≤ ξ(z) + 1e-12` on random (θ, z).
pub fn check_envelope_domination(
    goal: &GoalSpec,
    envelope: &EnvelopeSpec,
    param_box: &ParamBox,
    source: &SourceDistribution,
    probes: usize,
    seed: u64,
) -> Result<ProbeReport> {
    let mut rng = stream_rng(seed, 0x656e76);
    let zs = sample(source, probes.max(1), seed)?;
    let mut report = ProbeReport { probes, violations: 0, worst_excess: f64::NEG_INFINITY };
    for z in zs.rows() {
        let theta = param_box.sample_point(&mut rng);
        let excess = goal.eval_unchecked(&theta, z).abs() - envelope.eval(z);
        report.worst_excess = report.worst_excess.max(excess);
        if excess > 1e-12 {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Spot-checks the Hölder inequality with slack 1e-9 on random (θ, ϑ, z).
pub fn check_hoelder_certificate(
    goal: &HoelderGoal,
    param_box: &ParamBox,
    source: &SourceDistribution,
    probes: usize,
    seed: u64,
) -> Result<ProbeReport> {
    let mut rng = stream_rng(seed, 0x686f6c);
    let zs = sample(source, probes.max(1), seed)?;
    let beta = goal.beta();
    let mut report = ProbeReport { probes, violations: 0, worst_excess: f64::NEG_INFINITY };
    for z in zs.rows() {
        let a = param_box.sample_point(&mut rng);
        let b = param_box.sample_point(&mut rng);
        let lhs = (goal.value(&a, z) - goal.value(&b, z)).abs();
        let rhs = goal.coeff(z, param_box) * dist2(&a, &b).powf(beta);
        let excess = lhs - rhs;
        report.worst_excess = report.worst_excess.max(excess);
        if excess > 1e-9 {
            report.violations += 1;
        }
    }
    Ok(report)
}
