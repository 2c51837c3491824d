//! `solve`, `bounds` and `mc`.

use std::fs;
use std::path::Path;

use serde::Serialize;

use saarb_core::dist::sample;
use saarb_core::entropy::EntropyBound;
use saarb_core::harness::{bound_table, compare_bounds, run_replications, tightness_diagnostic, EventSpec};
use saarb_core::saa::{solve_empirical, TrueSolution};
use saarb_core::{
    BoundContext, BoundInputs, CompactInterval, ExperimentConfig, TailBoundResult, TightnessReport, Verdict,
};

use crate::config::Config;
use crate::report;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct SolveOutput {
    pub problem: String,
    pub risk: String,
    pub n: usize,
    pub seed: u64,
    pub theta_star: Vec<f64>,
    pub value: f64,
    pub grid_points_per_dim: usize,
    pub grid_resolution: f64,
    pub refinement_depth: usize,
    pub evaluations: usize,
    pub x_star: Option<f64>,
}

pub fn solve(cfg: &Config) -> Result<SolveOutput, CliError> {
    let b = cfg.problem()?;
    let grid = cfg.grid(b.problem.param_box.dim());
    let s = sample(&b.problem.source, cfg.mc.n, cfg.mc.seed)?;
    let r = solve_empirical(&b.problem, &s, grid)?;
    Ok(SolveOutput {
        problem: b.name.into(),
        risk: b.problem.risk.name(),
        n: cfg.mc.n,
        seed: cfg.mc.seed,
        theta_star: r.theta_star,
        value: r.value,
        grid_points_per_dim: grid.points_per_dim,
        grid_resolution: r.grid_resolution,
        refinement_depth: r.refinement_depth,
        evaluations: r.evaluations,
        x_star: r.x_star,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundGridRow {
    pub n: usize,
    pub eps: f64,
    /// Set on the t chosen by the optimizer for this `(n, ε)`.
    pub best: bool,
    pub bound: TailBoundResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsOutput {
    pub problem: String,
    pub risk: String,
    pub min_n: f64,
    pub interval: Option<CompactInterval>,
    pub entropy: Vec<EntropyBound>,
    pub context: BoundContext,
    pub rows: Vec<BoundGridRow>,
}

fn bound_context(cfg: &Config, b: &saarb_core::problems::BundledProblem) -> Result<BoundContext, CliError> {
    Ok(BoundContext::build(
        &b.problem.risk,
        &b.envelope,
        &b.problem.source,
        &b.entropy,
        cfg.bounds.remainder,
        cfg.bounds.delta,
    )?)
}

pub fn bounds(cfg: &Config) -> Result<BoundsOutput, CliError> {
    let b = cfg.problem()?;
    let entropy = cfg.bounds.j_deltas.iter().map(|&d| b.entropy.j(d)).collect::<Result<Vec<_>, _>>()?;
    let ctx = bound_context(cfg, &b)?;
    let t_grid = cfg.t_grid();
    let scale = cfg.bounds.scale;
    let mut rows = Vec::new();
    for &n in &cfg.bounds.n_list {
        for &eps in &cfg.bounds.eps_list {
            let (t_best, _) = ctx.best_over_t(n, eps, &t_grid)?;
            for &t in &t_grid {
                let r = ctx.evaluate(BoundInputs { n, t, eps })?;
                let bound = if scale == 1.0 { r } else { r.scaled(scale, eps) };
                rows.push(BoundGridRow { n, eps, best: t == t_best, bound });
            }
        }
    }
    Ok(BoundsOutput {
        problem: b.name.into(),
        risk: b.problem.risk.name(),
        min_n: ctx.min_n(),
        interval: ctx.interval(),
        entropy,
        context: ctx,
        rows,
    })
}

pub fn write_bounds(out: &BoundsOutput, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    report::write_bound_grid(&dir.join("bounds.csv"), &out.rows)?;
    report::write_json(&dir.join("bounds.json"), out)
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictCounts {
    pub dominated: usize,
    pub violated: usize,
    pub bound_not_applicable: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EventSummary {
    pub b_held: usize,
    pub a_held: Option<usize>,
    /// Replications with the A event whose x* fell outside `[x_l, x_u]`.
    pub x_outside_when_a_held: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TightnessSummary {
    Evaluated { pass: bool, ratios: [f64; 3] },
    Skipped { reason: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub problem: String,
    pub risk: String,
    pub seed: u64,
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub truth: TrueSolution,
    pub min_n: f64,
    pub interval: Option<CompactInterval>,
    pub verdicts: VerdictCounts,
    pub violated: bool,
    pub events: EventSummary,
    pub tightness: TightnessSummary,
}

/// Runs the experiment and writes the four report files into `dir`.
pub fn mc(cfg: &Config, threads: Option<usize>, dir: &Path) -> Result<McSummary, CliError> {
    let b = cfg.problem()?;
    let m = b.problem.param_box.dim();
    let n_list = cfg.mc_n_list();
    let exp = ExperimentConfig {
        problem: b.problem.clone(),
        grid: cfg.grid(m),
        true_grid: cfg.true_grid(m),
        n_list: n_list.clone(),
        replications: cfg.mc.replications,
        eps_list: cfg.bounds.eps_list.clone(),
        seed: cfg.mc.seed,
        threads,
        events: Some(EventSpec::build(&b.problem, &b.envelope, cfg.bounds.delta)?),
    };
    let ctx = bound_context(cfg, &b)?;
    let reps = run_replications(&exp)?;
    let cells = bound_table(&ctx, &n_list, &cfg.bounds.eps_list, &cfg.t_grid(), cfg.bounds.scale)?;
    let rows = compare_bounds(&reps, &cells)?;
    let tightness: Option<TightnessReport> =
        if n_list.len() >= 3 && cfg.mc.replications >= 500 { Some(tightness_diagnostic(&reps)?) } else { None };

    fs::create_dir_all(dir)?;
    report::write_replications(&dir.join("replications.csv"), &reps.records)?;
    report::write_tails(&dir.join("tails.csv"), &rows)?;
    report::write_tightness(&dir.join("tightness.csv"), tightness.as_ref().map_or(&[][..], |t| &t.rows))?;

    let count = |v: Verdict| rows.iter().filter(|r| r.verdict == v).count();
    let verdicts = VerdictCounts {
        dominated: count(Verdict::Dominated),
        violated: count(Verdict::Violated),
        bound_not_applicable: count(Verdict::BoundNotApplicable),
    };
    let recs = &reps.records;
    let has_a = recs.iter().any(|r| r.a_event.is_some());
    let events = EventSummary {
        b_held: recs.iter().filter(|r| r.b_event == Some(true)).count(),
        a_held: has_a.then(|| recs.iter().filter(|r| r.a_event == Some(true)).count()),
        x_outside_when_a_held: has_a
            .then(|| recs.iter().filter(|r| r.a_event == Some(true) && r.x_in_interval == Some(false)).count()),
    };
    let summary = McSummary {
        problem: b.name.into(),
        risk: b.problem.risk.name(),
        seed: cfg.mc.seed,
        n_list,
        replications: cfg.mc.replications,
        truth: reps.truth.clone(),
        min_n: ctx.min_n(),
        interval: ctx.interval(),
        violated: verdicts.violated > 0,
        verdicts,
        events,
        tightness: match tightness {
            Some(t) => TightnessSummary::Evaluated { pass: t.pass, ratios: t.ratios },
            None => TightnessSummary::Skipped { reason: "needs at least 3 sample sizes and 500 replications".into() },
        },
    };
    report::write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}
