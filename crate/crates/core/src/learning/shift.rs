use alloc::vec::Vec;

use super::HistoryEntry;
use crate::error::{check_len, Error, Result};
use crate::linalg::Vector;
use crate::model::tail_sums;
use crate::problem::{IterationDynamics, IterationTarget, NominalProblem};

/// Shift of a historical trajectory to new parameters from `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedTrajectory {
    pub source_iteration: usize,
    pub start: usize,
    /// `z_{k|start}` for `k = start..=T` (index `k - start`).
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub stage_costs: Vec<f64>,
    /// `J_{k|start}`, same indexing.
    pub tail_costs: Vec<f64>,
    pub feasible: bool,
    /// First step whose tightened constraints fail, if any.
    pub first_violation: Option<usize>,
    pub worst_violation: f64,
}

/// Propagates the error `e_{k+1} = Phi_k e_k + C_k (w_new - w_old)` (plus
/// deviation terms) from `e_start` and returns `z^i + e`, `v^i + K e`.
///
/// When `stop_on_violation` is set, the result is truncated at the first
/// infeasible step.
pub fn shift_trajectory(
    problem: &NominalProblem<'_>,
    source: &HistoryEntry,
    target: &IterationTarget<'_>,
    start: usize,
    stop_on_violation: bool,
) -> Result<ShiftedTrajectory> {
    let model = problem.model;
    let period = model.period();
    if start > period {
        return Err(Error::TimeIndex { t: start, period });
    }
    check_len("history length", period + 1, source.states.len())?;
    let theta_new = target.theta.unwrap_or(&source.theta);
    let basis = problem.basis;
    let dyn_new = IterationDynamics::new(model, target.deviation);
    let mut e = Vector::zeros(model.state_dim());
    if start == 0 {
        if let Some(o) = target.initial_offset {
            e += o;
        }
        if let Some(o) = &source.initial_offset {
            e -= o;
        }
    }
    let same_theta = theta_new == &source.theta;
    let dyn_old = (target.deviation.is_some() || source.deviation.is_some())
        .then(|| IterationDynamics::new(model, source.deviation.as_ref()));
    let mut states = Vec::with_capacity(period + 1 - start);
    let mut inputs = Vec::with_capacity(period + 1 - start);
    let mut stage_costs = Vec::with_capacity(period + 1 - start);
    let mut first_violation = None;
    let mut worst_violation = f64::NEG_INFINITY;
    for k in start..=period {
        let k_gain = problem.gains.gain(k);
        let z = &source.states[k] + &e;
        let v = &source.inputs[k] + k_gain * &e;
        let chk = problem.constraints.check(k, &z, &v, problem.margin)?;
        worst_violation = worst_violation.max(chk.worst);
        stage_costs.push(problem.costs.evaluate(k, &z, &v)?);
        states.push(z);
        inputs.push(v);
        if !chk.satisfied && first_violation.is_none() {
            first_violation = Some(k);
            if stop_on_violation {
                break;
            }
        }
        if k < period {
            let phi = &dyn_new.a[k] + &dyn_new.b[k] * k_gain;
            let mut next = phi * &e;
            if !same_theta {
                let dw = basis.evaluate_correlated(theta_new, k)? - basis.evaluate_correlated(&source.theta, k)?;
                next += model.c(k) * dw;
            }
            if let Some(dyn_old) = &dyn_old {
                next += (&dyn_new.a[k] - &dyn_old.a[k]) * &source.states[k] + (&dyn_new.b[k] - &dyn_old.b[k]) * &source.inputs[k];
            }
            e = next;
        }
    }
    let tail_costs = tail_sums(&stage_costs);
    Ok(ShiftedTrajectory {
        source_iteration: source.iteration,
        start,
        states,
        inputs,
        stage_costs,
        tail_costs,
        feasible: first_violation.is_none(),
        first_violation,
        worst_violation,
    })
}
