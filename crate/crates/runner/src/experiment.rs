//! The learning loop: seed, then per iteration sample, build the safe set,
//! run the closed loop, solve the full-horizon benchmark and check the
//! cost inequalities.

use plmpc_core::controller::{check_successor_plan, closed_loop_iteration, solve_full_horizon, CandidateStats, IterationResult};
use plmpc_core::disturbance::{iteration_seed, sample_theta, ThetaDomain, ThetaSample};
use plmpc_core::learning::{build_safe_set, construct_seed, HistoryEntry, HistoryStore, OffsetBox, SafeSet, SafeSetSummary, SeedStrategy};
use plmpc_core::linalg::{Matrix, Vector};
use plmpc_core::model::DynamicsDeviation;
use plmpc_core::problem::{IterationTarget, NominalProblem};
use plmpc_core::scenarios::ScenarioSpec;
use plmpc_core::tube::{lqr_gains, monodromy_radius, rpi_outer_approx, tighten_constraints, tightening_reductions, TubeArtifacts};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::report::TubeDocument;
use crate::RunError;

const THETA_STREAM: u64 = 0;
const RESIDUAL_STREAM: u64 = 1;
const OFFSET_STREAM: u64 = 2;
const DEVIATION_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Stop at the first failed cost inequality instead of recording it.
    pub strict: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { strict: true }
    }
}

/// Outcome of the checks run after one iteration. Worst values are the
/// largest left-minus-right gap of each inequality; at most the tolerance
/// when it holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationChecks {
    /// `J^j <= J_LMPC(z_0)`.
    pub closed_loop_vs_lmpc: f64,
    /// `J_LMPC(z_0) <=` every feasible shifted cost from `t = 0`; `None`
    /// when no shift from `t = 0` is feasible.
    pub lmpc_vs_shifted: Option<f64>,
    /// `J_LMPC(z_{t+1}) - J_LMPC(z_t) + l_t`; `None` with a single LMPC step.
    pub descent: Option<f64>,
    pub successor_failures: usize,
    /// Largest relative error between `J^j` and the resummed stage costs.
    pub cost_resum: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub optimal_cost: f64,
    /// Closed-loop nominal cost `J^j`.
    pub lmpc_cost: f64,
    /// `J* - J_LMPC`.
    pub difference: f64,
    pub true_cost: f64,
    /// `J_LMPC(z_t)` for `t = 0..=T-N`.
    pub lmpc_values: Vec<f64>,
    /// Stage costs of the nominal closed loop.
    pub stage_costs: Vec<f64>,
    /// Cost of each source iteration shifted from `t = 0`; `None` if the
    /// shift is infeasible.
    pub shifted_costs: Vec<(usize, Option<f64>)>,
    pub feasible_shift_count: usize,
    pub safe_set_entries: usize,
    pub stats: CandidateStats,
    pub final_input_fallback: bool,
    pub true_worst_violation: f64,
    pub checks: IterationChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub strategy: SeedStrategy,
    pub robust_failure: Option<String>,
    pub center_cost: f64,
}

/// Everything one iteration produced, kept for the writers.
#[derive(Debug, Clone)]
pub struct IterationOutput {
    pub metrics: IterationMetrics,
    pub result: IterationResult,
    pub safe_set_summary: SafeSetSummary,
    pub safe_set: Option<SafeSet>,
    pub initial_offset: Option<Vector>,
}

/// Experiment state after a run, complete or not.
#[derive(Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub scenario: ScenarioSpec,
    pub tube: Option<TubeArtifacts>,
    /// Written even when tightening fails, to show why.
    pub tube_document: Option<TubeDocument>,
    pub seed: Option<SeedSummary>,
    pub iterations: Vec<IterationOutput>,
    /// Why the run stopped early.
    pub failure: Option<RunError>,
    /// Cost pairs `(earlier, later)` of iterations sharing theta, with the
    /// largest increase seen.
    pub repeated_theta_increase: Option<f64>,
}

impl Experiment {
    pub fn complete(&self) -> bool {
        self.failure.is_none() && self.iterations.len() == self.config.iterations
    }
}

fn theta_for(cfg: &ExperimentConfig, domain: &ThetaDomain, j: usize) -> ThetaSample {
    match &cfg.theta.fixed {
        Some(v) => ThetaSample::from_slice(v),
        None => sample_theta(domain, iteration_seed(cfg.seed, j as u64, THETA_STREAM)),
    }
}

fn sample_box(lower: &[f64], upper: &[f64], seed: u64) -> Result<Vector, RunError> {
    let domain = ThetaDomain::new(Vector::from_column_slice(lower), Vector::from_column_slice(upper))?;
    Ok(sample_theta(&domain, seed).0)
}

fn sample_deviation(spec: &ScenarioSpec, a_scale: f64, b_scale: f64, seed: u64) -> Result<DynamicsDeviation, RunError> {
    let (n, m) = (spec.model.state_dim(), spec.model.input_dim());
    let count = n * n + n * m;
    let mut lo = vec![-a_scale; n * n];
    lo.extend(vec![-b_scale; n * m]);
    let hi: Vec<f64> = lo.iter().map(|v| -v).collect();
    let draw = sample_box(&lo, &hi, seed)?;
    debug_assert_eq!(draw.len(), count);
    // One deviation for the whole iteration.
    let da = Matrix::from_column_slice(n, n, &draw.as_slice()[..n * n]);
    let db = Matrix::from_column_slice(n, m, &draw.as_slice()[n * n..]);
    let k = spec.period() + 1;
    Ok(DynamicsDeviation { da: vec![da; k], db: vec![db; k] })
}

/// Runs the configured experiment. Failures are recorded in the returned
/// [`Experiment`] together with the iterations completed before them.
pub fn run_experiment(config: &ExperimentConfig, options: RunOptions) -> Result<Experiment, RunError> {
    let scenario = config.resolve_scenario()?;
    let mut exp = Experiment {
        config: config.clone(),
        scenario,
        tube: None,
        tube_document: None,
        seed: None,
        iterations: Vec::new(),
        failure: None,
        repeated_theta_increase: None,
    };
    if let Err(e) = drive(&mut exp, options) {
        exp.failure = Some(e);
    }
    Ok(exp)
}

fn drive(exp: &mut Experiment, options: RunOptions) -> Result<(), RunError> {
    let cfg = exp.config.clone();
    let spec = exp.scenario.clone();
    let gains = lqr_gains(&spec.model, &spec.tube.q_lqr, &spec.tube.r_lqr)?;
    let radius = monodromy_radius(&spec.model, &gains);
    let rpi = rpi_outer_approx(
        &gains.closed_loop(&spec.model),
        spec.model.c_schedule(),
        spec.basis.residual_bounds(),
        spec.tube.alpha_target,
        spec.tube.max_horizon,
    )?;
    let reductions = tightening_reductions(&spec.constraints, &gains, &rpi)?;
    exp.tube_document = Some(TubeDocument::from_parts(&gains, radius, &rpi, &spec.constraints, &reductions));
    let tightened = tighten_constraints(&spec.constraints, &gains, &rpi)?;
    let tube = TubeArtifacts { gains, monodromy_radius: radius, rpi, tightened };
    exp.tube = Some(tube.clone());
    let problem = NominalProblem::new(&spec.model, &spec.basis, &tube.gains, &tube.tightened.schedule, &spec.costs);
    let offsets = cfg
        .extensions
        .initial_offset
        .as_ref()
        .map(|b| OffsetBox { lower: Vector::from_column_slice(&b.lower), upper: Vector::from_column_slice(&b.upper) });
    if let Some(o) = &offsets {
        if o.lower.len() != spec.model.state_dim() {
            return Err(RunError::Usage("extensions.initial_offset must have one entry per state".into()));
        }
    }
    let seed = construct_seed(&problem, &spec.domain, offsets.as_ref(), spec.seed_strategy, &spec.lmpc.qp)?;
    exp.seed = Some(SeedSummary { strategy: seed.strategy, robust_failure: seed.robust_failure.clone(), center_cost: seed.center_cost });
    let mut history = HistoryStore::new(seed.seed);
    let tol = cfg.tolerances.invariant;
    let mut past: Vec<(ThetaSample, f64)> = Vec::new();

    for j in 1..=cfg.iterations {
        let theta = theta_for(&cfg, &spec.domain, j);
        if !spec.domain.contains(&theta) {
            return Err(RunError::Usage(format!("theta {:?} lies outside the scenario domain", theta.0.as_slice())));
        }
        let residual = spec.basis.sample_residual(iteration_seed(cfg.seed, j as u64, RESIDUAL_STREAM));
        let offset = match &offsets {
            Some(o) => Some(sample_box(o.lower.as_slice(), o.upper.as_slice(), iteration_seed(cfg.seed, j as u64, OFFSET_STREAM))?),
            None => None,
        };
        let deviation = match cfg.extensions.deviation {
            Some(d) => {
                let dev = sample_deviation(&spec, d.a_scale, d.b_scale, iteration_seed(cfg.seed, j as u64, DEVIATION_STREAM))?;
                let radius = monodromy_radius(&spec.model.with_deviation(&dev)?, &tube.gains);
                if radius >= 1.0 {
                    return Err(plmpc_core::Error::GainsNotStabilizing { spectral_radius: radius }.into());
                }
                Some(dev)
            }
            None => None,
        };
        let target = IterationTarget::new(&theta).with_offset(offset.as_ref()).with_deviation(deviation.as_ref());

        let build = build_safe_set(&problem, &history, &target, spec.lmpc.match_tolerance)?;
        let mut result = closed_loop_iteration(&problem, &spec.constraints, &target, j, &residual, &build.safe_set, &spec.lmpc)?;
        let optimum = solve_full_horizon(&problem, &target, &spec.lmpc.qp)?;
        result.optimal_cost = Some(optimum.cost);

        let mut successor_failures = 0;
        for step in &result.steps {
            if step.t + spec.lmpc.horizon < spec.period() {
                let chk = check_successor_plan(&problem, &target, step, &build.safe_set)?;
                if !chk.feasible {
                    successor_failures += 1;
                }
            }
        }
        let checks = evaluate_checks(&result, &build.start_costs, successor_failures, tol);
        let safe_set_summary = build.safe_set.summary();
        let metrics = IterationMetrics {
            iteration: j,
            theta: theta.0.as_slice().to_vec(),
            optimal_cost: optimum.cost,
            lmpc_cost: result.cost,
            difference: optimum.cost - result.cost,
            true_cost: result.true_trajectory.cumulative_cost,
            lmpc_values: result.lmpc_values.clone(),
            stage_costs: result.nominal.stage_costs.clone(),
            shifted_costs: build.start_costs.clone(),
            feasible_shift_count: build.feasible_shifts.iter().filter(|s| s.2).count(),
            safe_set_entries: safe_set_summary.total_entries,
            stats: result.stats,
            final_input_fallback: result.final_input_fallback,
            true_worst_violation: result.true_worst_violation,
            checks,
        };

        for (th, cost) in &past {
            if *th == theta {
                let inc = result.cost - cost;
                exp.repeated_theta_increase = Some(exp.repeated_theta_increase.map_or(inc, |m: f64| m.max(inc)));
            }
        }
        past.push((theta.clone(), result.cost));

        let mut entry = HistoryEntry::from_trajectory(&result.nominal);
        entry.initial_offset = offset.clone();
        entry.deviation = deviation;
        history.push(entry)?;
        let failed = !checks.passed;
        exp.iterations.push(IterationOutput {
            metrics,
            result,
            safe_set_summary,
            safe_set: cfg.output.dump_safe_sets.then_some(build.safe_set),
            initial_offset: offset,
        });
        if failed && options.strict {
            return Err(RunError::Invariant(format!("iteration {j}: {}", describe(&checks, tol))));
        }
    }
    if let Some(inc) = exp.repeated_theta_increase {
        if inc > tol && options.strict {
            return Err(RunError::Invariant(format!("cost rose by {inc:e} between iterations with the same theta")));
        }
    }
    Ok(())
}

pub(crate) fn evaluate_checks(result: &IterationResult, shifted: &[(usize, Option<f64>)], successor_failures: usize, tol: f64) -> IterationChecks {
    let v0 = result.lmpc_values.first().copied().unwrap_or(f64::NAN);
    let closed_loop_vs_lmpc = result.cost - v0;
    let lmpc_vs_shifted = shifted.iter().filter_map(|s| s.1).map(|c| v0 - c).reduce(f64::max);
    let descent = descent_gap(&result.lmpc_values, &result.nominal.stage_costs);
    let resum: f64 = result.nominal.stage_costs.iter().sum();
    let cost_resum = (resum - result.cost).abs() / resum.abs().max(1.0);
    let passed = closed_loop_vs_lmpc <= tol
        && lmpc_vs_shifted.is_none_or(|g| g <= tol)
        && descent.is_none_or(|g| g <= tol)
        && successor_failures == 0
        && cost_resum <= 1e-9;
    IterationChecks { closed_loop_vs_lmpc, lmpc_vs_shifted, descent, successor_failures, cost_resum, passed }
}

/// Largest `V(t+1) - V(t) + l_t` over consecutive LMPC values.
pub fn descent_gap(values: &[f64], stage_costs: &[f64]) -> Option<f64> {
    values.windows(2).enumerate().map(|(t, w)| w[1] - w[0] + stage_costs[t]).reduce(f64::max)
}

fn describe(c: &IterationChecks, tol: f64) -> String {
    let mut parts = Vec::new();
    if c.closed_loop_vs_lmpc > tol {
        parts.push(format!("closed-loop cost exceeds J_LMPC(z_0) by {:e}", c.closed_loop_vs_lmpc));
    }
    if let Some(g) = c.lmpc_vs_shifted.filter(|g| *g > tol) {
        parts.push(format!("J_LMPC(z_0) exceeds a shifted cost by {g:e}"));
    }
    if let Some(g) = c.descent.filter(|g| *g > tol) {
        parts.push(format!("LMPC value descent fails by {g:e}"));
    }
    if c.successor_failures > 0 {
        parts.push(format!("{} successor plans infeasible", c.successor_failures));
    }
    if c.cost_resum > 1e-9 {
        parts.push(format!("cost resummation error {:e}", c.cost_resum));
    }
    parts.join("; ")
}
