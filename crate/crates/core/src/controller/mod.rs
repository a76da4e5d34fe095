//! LMPC controller: the safe-set-terminated finite-horizon problem, the
//! closed-loop rule with tube feedback, and the full-horizon optimum.

mod horizon;

use alloc::string::ToString;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::disturbance::ThetaSample;
use crate::error::{check_len, Error, Result};
use crate::learning::{SafeSet, SafeSetEntry, DEFAULT_MATCH_TOLERANCE};
use crate::linalg::{max_abs_diff, serde_vectors, Vector};
use crate::model::{PolytopicConstraintSchedule, Trajectory};
use crate::problem::{injected_disturbance, start_state, IterationDynamics, IterationTarget, NominalProblem};
use crate::qp::{QpSettings, QpSolver, QpStatus};

pub(crate) use horizon::{CondensedHorizon, HorizonSpec};
pub use crate::qp::{solve_qp, QpProblem, QpSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmpcConfig {
    pub horizon: usize,
    pub qp: QpSettings,
    /// Only the cheapest `cap` terminal candidates are considered.
    pub candidate_cap: Option<usize>,
    pub match_tolerance: f64,
    /// Use value-function cuts from solved candidates to skip others.
    pub dual_pruning: bool,
}

impl LmpcConfig {
    pub fn new(horizon: usize) -> Self {
        Self { horizon, qp: QpSettings::default(), candidate_cap: None, match_tolerance: DEFAULT_MATCH_TOLERANCE, dual_pruning: true }
    }
    pub fn validate(&self, period: usize) -> Result<()> {
        if self.horizon == 0 || self.horizon > period {
            return Err(Error::InvalidArgument(alloc::format!("horizon {} must lie in [1, {period}]", self.horizon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CandidateStats {
    pub solved: usize,
    /// Skipped by the cost bound.
    pub pruned: usize,
    /// Solved and found infeasible.
    pub infeasible: usize,
    /// Skipped by a cached infeasibility certificate.
    pub certified_infeasible: usize,
    pub numeric_failures: usize,
}

impl CandidateStats {
    pub fn add(&mut self, o: &CandidateStats) {
        self.solved += o.solved;
        self.pruned += o.pruned;
        self.infeasible += o.infeasible;
        self.certified_infeasible += o.certified_infeasible;
        self.numeric_failures += o.numeric_failures;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmpcStep {
    pub t: usize,
    /// `v_{t|t}`.
    #[serde(with = "crate::linalg::serde_vector")]
    pub input: Vector,
    #[serde(with = "serde_vectors")]
    pub plan_inputs: Vec<Vector>,
    /// `z_{t..t+N|t}` simulated from the plan.
    #[serde(with = "serde_vectors")]
    pub plan_states: Vec<Vector>,
    /// Horizon stage costs plus the terminal Q value.
    pub value: f64,
    pub horizon_cost: f64,
    pub terminal: SafeSetEntry,
    pub terminal_index: usize,
    pub stats: CandidateStats,
}

struct Cut {
    base: f64,
    y: Vector,
    rhs: Vector,
    margin: f64,
}

struct Certificate {
    z: Vector,
    y: Vector,
    slack: f64,
}

/// Solves the LMPC problem at `(t, z_t)` by enumerating terminal candidates
/// at level `t + N` in ascending cost order.
pub fn lmpc_step(
    problem: &NominalProblem<'_>,
    target: &IterationTarget<'_>,
    z_t: &Vector,
    t: usize,
    safe_set: &SafeSet,
    config: &LmpcConfig,
) -> Result<LmpcStep> {
    let theta = target.theta.ok_or_else(|| Error::InvalidArgument("LMPC needs the iteration's theta".into()))?;
    let injected = injected_disturbance(problem.model, problem.basis, theta)?;
    let dynamics = IterationDynamics::new(problem.model, target.deviation);
    lmpc_step_with(problem, &dynamics, &injected, z_t, t, safe_set, config)
}

fn lmpc_step_with(
    problem: &NominalProblem<'_>,
    dynamics: &IterationDynamics<'_>,
    injected: &[Vector],
    z_t: &Vector,
    t: usize,
    safe_set: &SafeSet,
    config: &LmpcConfig,
) -> Result<LmpcStep> {
    let period = problem.period();
    let n = config.horizon;
    if t + n > period {
        return Err(Error::InvalidArgument(alloc::format!("LMPC step at t = {t} needs t + N <= T")));
    }
    let level = t + n;
    let entries = safe_set.level(level);
    if entries.is_empty() {
        return Err(Error::EmptySafeSet { level });
    }
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&entries[a], &entries[b]);
        ea.cost_to_go
            .total_cmp(&eb.cost_to_go)
            .then(ea.source_iteration.cmp(&eb.source_iteration))
            .then(ea.shift_start.cmp(&eb.shift_start))
            .then(a.cmp(&b))
    });
    if let Some(cap) = config.candidate_cap {
        order.truncate(cap.max(1));
    }

    let horizon = CondensedHorizon::build(&HorizonSpec {
        problem,
        dynamics,
        injected,
        constraints: problem.constraints,
        start: t,
        stages: n,
        z0: z_t,
        terminal: true,
    })?;
    let mut stats = CandidateStats::default();
    if horizon.trivially_infeasible {
        return Err(Error::RecursiveFeasibility { t, candidates: order.len() });
    }

    // Lower bound shared by every candidate: the horizon cost without the
    // terminal condition.
    let relaxed = horizon.relaxed();
    let free = QpSolver::new(&relaxed, config.qp).solve(None);
    stats.solved += 1;
    let free_bound = match free.status {
        s if s.is_optimal() => free.objective - 1e-9 * (1.0 + free.objective.abs()),
        QpStatus::PrimalInfeasible => return Err(Error::RecursiveFeasibility { t, candidates: order.len() }),
        _ => f64::NEG_INFINITY,
    };

    let solver = QpSolver::new(&horizon.qp, config.qp);
    let mut best: Option<(f64, usize, Vector)> = None;
    let mut cuts: Vec<Cut> = Vec::new();
    let mut certs: Vec<Certificate> = Vec::new();
    for &idx in &order {
        let cand = &entries[idx];
        let q_f = cand.cost_to_go;
        if let Some((inc, _, _)) = &best {
            if q_f + horizon.constant + free_bound.max(0.0 - horizon.constant) > *inc {
                stats.pruned += order.len() - order.iter().position(|&i| i == idx).unwrap_or(0);
                break;
            }
        }
        let rhs = &cand.state - &horizon.free_terminal;
        if certs.iter().any(|c| horizon_cert_holds(&horizon, c, &rhs)) {
            stats.certified_infeasible += 1;
            continue;
        }
        if let (Some((inc, _, _)), true) = (&best, config.dual_pruning) {
            let lb = cuts
                .iter()
                .map(|c| c.base - c.y.dot(&(&rhs - &c.rhs)) - c.margin)
                .fold(f64::NEG_INFINITY, f64::max);
            if q_f + horizon.constant + lb > *inc {
                stats.pruned += 1;
                continue;
            }
        }
        let sol = solver.solve(Some(&rhs));
        stats.solved += 1;
        match sol.status {
            s if s.is_optimal() => {
                let total = sol.objective + horizon.constant + q_f;
                if config.dual_pruning {
                    if let Some(r) = &horizon.ranges {
                        let drift: f64 = sol.dual_residual.iter().zip(r.iter()).map(|(d, w)| d.abs() * w).sum();
                        let primal_gap = (sol.objective - sol.dual_objective).abs();
                        let base = lagrangian(&horizon, &sol, &rhs);
                        cuts.push(Cut { base, y: sol.y.clone(), rhs: rhs.clone(), margin: drift + primal_gap + 1e-9 * (1.0 + base.abs()) });
                    }
                }
                if best.as_ref().map_or(true, |(inc, _, _)| total < *inc) {
                    best = Some((total, idx, sol.x));
                }
            }
            QpStatus::PrimalInfeasible => {
                stats.infeasible += 1;
                if let Some(mag) = &horizon.magnitude {
                    let resid = horizon.qp.ineq.tr_mul(&sol.z) + horizon.qp.eq.tr_mul(&sol.y);
                    let slack: f64 = resid.iter().zip(mag.iter()).map(|(r, m)| r.abs() * m).sum();
                    certs.push(Certificate { z: sol.z, y: sol.y, slack });
                }
            }
            _ => stats.numeric_failures += 1,
        }
    }
    let Some((_, idx, x)) = best else {
        return Err(Error::RecursiveFeasibility { t, candidates: order.len() });
    };
    let terminal = entries[idx].clone();
    let plan_inputs = horizon.inputs(&x);
    let mut plan_states = Vec::with_capacity(n + 1);
    let mut z = z_t.clone();
    let mut horizon_cost = 0.0;
    for (s, v) in plan_inputs.iter().enumerate() {
        let k = t + s;
        horizon_cost += problem.costs.evaluate(k, &z, v)?;
        let next = &dynamics.a[k] * &z + &dynamics.b[k] * v + &injected[k];
        plan_states.push(core::mem::replace(&mut z, next));
    }
    plan_states.push(z);
    Ok(LmpcStep {
        t,
        input: plan_inputs[0].clone(),
        value: horizon_cost + terminal.cost_to_go,
        horizon_cost,
        plan_inputs,
        plan_states,
        terminal,
        terminal_index: idx,
        stats,
    })
}

/// `L(x, z, y)` at the equality right-hand side the solution was computed for.
fn lagrangian(h: &CondensedHorizon, sol: &QpSolution, rhs: &Vector) -> f64 {
    let q = &h.qp;
    let ax_b = &q.ineq * &sol.x - &q.ineq_rhs;
    let ex_e = &q.eq * &sol.x - rhs;
    q.objective(&sol.x) + sol.z.dot(&ax_b) + sol.y.dot(&ex_e)
}

/// Farkas certificate `(z, y)` proves `{A v <= b, E v = rhs}` empty.
fn horizon_cert_holds(h: &CondensedHorizon, c: &Certificate, rhs: &Vector) -> bool {
    let value = h.qp.ineq_rhs.dot(&c.z) + rhs.dot(&c.y);
    value < -c.slack - 1e-12 * (1.0 + c.z.amax())
}

/// Optimal open-loop trajectory over the whole task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullHorizonSolution {
    pub trajectory: Trajectory,
    pub cost: f64,
    /// Largest tightened-constraint row value along the trajectory.
    pub worst_violation: f64,
}

/// Solves the nominal problem over `t = 0..=T` in one QP.
pub fn solve_full_horizon(problem: &NominalProblem<'_>, target: &IterationTarget<'_>, settings: &QpSettings) -> Result<FullHorizonSolution> {
    solve_full_horizon_with(problem, problem.constraints, target, settings)
}

pub(crate) fn solve_full_horizon_with(
    problem: &NominalProblem<'_>,
    constraints: &PolytopicConstraintSchedule,
    target: &IterationTarget<'_>,
    settings: &QpSettings,
) -> Result<FullHorizonSolution> {
    let theta = target.theta.ok_or_else(|| Error::InvalidArgument("full-horizon solve needs theta".into()))?;
    let period = problem.period();
    let injected = injected_disturbance(problem.model, problem.basis, theta)?;
    let dynamics = IterationDynamics::new(problem.model, target.deviation);
    let z0 = start_state(problem.model, target.initial_offset);
    let horizon = CondensedHorizon::build(&HorizonSpec {
        problem,
        dynamics: &dynamics,
        injected: &injected,
        constraints,
        start: 0,
        stages: period + 1,
        z0: &z0,
        terminal: false,
    })?;
    if horizon.trivially_infeasible {
        return Err(Error::Infeasible("full-horizon problem: initial state violates the constraints".into()));
    }
    let sol = QpSolver::new(&horizon.qp, *settings).solve(None).require_optimal("full-horizon problem")?;
    let inputs = horizon.inputs(&sol.x);
    let traj = simulate_inputs(problem, &dynamics, &injected, &z0, &inputs, theta, constraints)?;
    let worst = traj.violations.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let worst_row = (0..=period)
        .map(|t| constraints.check(t, &traj.states[t], &traj.inputs[t], 0.0).map(|c| c.worst))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(worst, f64::max);
    Ok(FullHorizonSolution { cost: traj.cumulative_cost, trajectory: traj, worst_violation: worst_row })
}

fn simulate_inputs(
    problem: &NominalProblem<'_>,
    dynamics: &IterationDynamics<'_>,
    injected: &[Vector],
    z0: &Vector,
    inputs: &[Vector],
    theta: &ThetaSample,
    constraints: &PolytopicConstraintSchedule,
) -> Result<Trajectory> {
    let period = problem.period();
    let mut states = Vec::with_capacity(period + 1);
    let mut costs = Vec::with_capacity(period + 1);
    let mut violations = Vec::new();
    let mut z = z0.clone();
    for t in 0..=period {
        let v = &inputs[t];
        costs.push(problem.costs.evaluate(t, &z, v)?);
        let chk = constraints.check(t, &z, v, problem.margin)?;
        if !chk.satisfied {
            violations.push((t, chk.worst));
        }
        let next = if t < period { Some(&dynamics.a[t] * &z + &dynamics.b[t] * v + &injected[t]) } else { None };
        states.push(z.clone());
        if let Some(nx) = next {
            z = nx;
        }
    }
    let disturbances = problem.basis.correlated_sequence(theta)?;
    Ok(Trajectory {
        iteration: 0,
        theta: theta.clone(),
        states,
        inputs: inputs.to_vec(),
        disturbances,
        cumulative_cost: costs.iter().sum(),
        stage_costs: costs,
        violations,
    })
}

/// Outcome of one learning iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationResult {
    pub iteration: usize,
    pub theta: ThetaSample,
    pub nominal: Trajectory,
    /// True state `x`, input `u = v + K (x - z)` and full disturbance.
    pub true_trajectory: Trajectory,
    /// `J_LMPC(z_t)` for `t = 0..=T-N`.
    pub lmpc_values: Vec<f64>,
    /// `(source iteration, shift start)` of each step's terminal point.
    pub terminal_provenance: Vec<(usize, usize)>,
    pub steps: Vec<LmpcStep>,
    pub cost: f64,
    pub optimal_cost: Option<f64>,
    pub stats: CandidateStats,
    /// Whether `v_T` fell back to the successor input from the safe set.
    pub final_input_fallback: bool,
    /// Largest original-constraint row value met by the true state.
    pub true_worst_violation: f64,
}

/// Runs one iteration: LMPC until `T - N`, plan replay afterwards, and a
/// one-step optimization of `v_T`. The true system is driven by
/// `u = v + K (x - z)` and `w = w_theta + w_r`.
pub fn closed_loop_iteration(
    problem: &NominalProblem<'_>,
    original: &PolytopicConstraintSchedule,
    target: &IterationTarget<'_>,
    iteration: usize,
    residual: &[Vector],
    safe_set: &SafeSet,
    config: &LmpcConfig,
) -> Result<IterationResult> {
    let model = problem.model;
    let period = model.period();
    config.validate(period)?;
    check_len("residual sequence", period + 1, residual.len())?;
    let theta = target.theta.ok_or_else(|| Error::InvalidArgument("closed loop needs theta".into()))?;
    let injected = injected_disturbance(model, problem.basis, theta)?;
    let w_theta = problem.basis.correlated_sequence(theta)?;
    let dynamics = IterationDynamics::new(model, target.deviation);
    let n = config.horizon;

    let mut z = start_state(model, target.initial_offset);
    let mut x = z.clone();
    let (mut zs, mut vs, mut zc) = (Vec::new(), Vec::new(), Vec::new());
    let (mut xs, mut us, mut xc, mut ws) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut lmpc_values = Vec::new();
    let mut provenance = Vec::new();
    let mut steps: Vec<LmpcStep> = Vec::new();
    let mut stats = CandidateStats::default();
    let mut nominal_violations = Vec::new();
    let mut true_violations = Vec::new();
    let mut true_worst = f64::NEG_INFINITY;
    let mut final_input_fallback = false;

    for t in 0..=period {
        let v = if t + n <= period {
            let step = lmpc_step_with(problem, &dynamics, &injected, &z, t, safe_set, config)?;
            stats.add(&step.stats);
            lmpc_values.push(step.value);
            provenance.push((step.terminal.source_iteration, step.terminal.shift_start));
            let v = step.input.clone();
            steps.push(step);
            v
        } else if t < period {
            let last = steps.last().expect("at least one LMPC step runs since N <= T");
            last.plan_inputs[t - last.t].clone()
        } else {
            let last = steps.last().expect("at least one LMPC step runs since N <= T");
            match final_input(problem, &dynamics, &injected, &z, config) {
                Some(v) => v,
                None => {
                    final_input_fallback = true;
                    last.terminal.input.clone()
                }
            }
        };
        let gain = problem.gains.gain(t);
        let u = &v + gain * (&x - &z);
        let w = &w_theta[t] + &residual[t];

        let chk_nom = problem.constraints.check(t, &z, &v, problem.margin)?;
        if !chk_nom.satisfied {
            nominal_violations.push((t, chk_nom.worst));
        }
        let chk = original.check(t, &x, &u, problem.margin)?;
        true_worst = true_worst.max(chk.worst);
        if !chk.satisfied {
            true_violations.push((t, chk.worst));
            return Err(Error::TubeViolation { t, violation: chk.worst });
        }
        zc.push(problem.costs.evaluate(t, &z, &v)?);
        xc.push(problem.costs.evaluate(t, &x, &u)?);
        if t < period {
            let nz = &dynamics.a[t] * &z + &dynamics.b[t] * &v + &injected[t];
            let nx = &dynamics.a[t] * &x + &dynamics.b[t] * &u + model.c(t) * &w;
            zs.push(core::mem::replace(&mut z, nz));
            xs.push(core::mem::replace(&mut x, nx));
        } else {
            zs.push(z.clone());
            xs.push(x.clone());
        }
        vs.push(v);
        us.push(u);
        ws.push(w);
    }
    let nominal = Trajectory {
        iteration,
        theta: theta.clone(),
        states: zs,
        inputs: vs,
        disturbances: w_theta,
        cumulative_cost: zc.iter().sum(),
        stage_costs: zc,
        violations: nominal_violations,
    };
    let true_trajectory = Trajectory {
        iteration,
        theta: theta.clone(),
        states: xs,
        inputs: us,
        disturbances: ws,
        cumulative_cost: xc.iter().sum(),
        stage_costs: xc,
        violations: true_violations,
    };
    Ok(IterationResult {
        iteration,
        theta: theta.clone(),
        cost: nominal.cumulative_cost,
        nominal,
        true_trajectory,
        lmpc_values,
        terminal_provenance: provenance,
        steps,
        optimal_cost: None,
        stats,
        final_input_fallback,
        true_worst_violation: true_worst,
    })
}

/// `argmin_v l_T(z_T, v)` subject to the tightened constraints at `T`.
fn final_input(
    problem: &NominalProblem<'_>,
    dynamics: &IterationDynamics<'_>,
    injected: &[Vector],
    z: &Vector,
    config: &LmpcConfig,
) -> Option<Vector> {
    let period = problem.period();
    let h = CondensedHorizon::build(&HorizonSpec {
        problem,
        dynamics,
        injected,
        constraints: problem.constraints,
        start: period,
        stages: 1,
        z0: z,
        terminal: false,
    })
    .ok()?;
    if h.trivially_infeasible {
        return None;
    }
    let sol = QpSolver::new(&h.qp, config.qp).solve(None);
    if !sol.status.is_optimal() {
        return None;
    }
    let v = h.inputs(&sol.x).remove(0);
    problem.constraints.check(period, z, &v, problem.margin).ok()?.satisfied.then_some(v)
}

/// Feasibility of the plan used in the recursive-feasibility argument:
/// the tail of the step-`t` plan followed by the terminal entry's input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessorPlanCheck {
    pub feasible: bool,
    pub worst_violation: f64,
    /// Distance from the plan's end state to a safe-set point at `t + N + 1`.
    pub terminal_gap: f64,
}

pub fn check_successor_plan(
    problem: &NominalProblem<'_>,
    target: &IterationTarget<'_>,
    step: &LmpcStep,
    safe_set: &SafeSet,
) -> Result<SuccessorPlanCheck> {
    let n = step.plan_inputs.len();
    let t = step.t;
    let period = problem.period();
    if t + n + 1 > period {
        return Err(Error::InvalidArgument("successor plan needs t + N + 1 <= T".to_string()));
    }
    let theta = target.theta.ok_or_else(|| Error::InvalidArgument("successor plan needs theta".into()))?;
    let injected = injected_disturbance(problem.model, problem.basis, theta)?;
    let dynamics = IterationDynamics::new(problem.model, target.deviation);
    let mut inputs: Vec<Vector> = step.plan_inputs[1..].to_vec();
    inputs.push(step.terminal.input.clone());
    let mut z = step.plan_states[1].clone();
    let mut worst = f64::NEG_INFINITY;
    for (s, v) in inputs.iter().enumerate() {
        let k = t + 1 + s;
        worst = worst.max(problem.constraints.check(k, &z, v, 0.0)?.worst);
        z = &dynamics.a[k] * &z + &dynamics.b[k] * v + &injected[k];
    }
    let level = t + n + 1;
    let gap = safe_set
        .level(level)
        .iter()
        .map(|e| max_abs_diff(&e.state, &z))
        .fold(f64::INFINITY, f64::min);
    Ok(SuccessorPlanCheck { feasible: worst <= problem.margin && gap <= 1e-6, worst_violation: worst, terminal_gap: gap })
}
