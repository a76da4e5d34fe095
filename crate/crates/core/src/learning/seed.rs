//! Construction of the iteration-0 seed whose shifts stay feasible for every
//! admissible disturbance parameter.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{shift_trajectory, HistoryEntry, SeedRecord};
use crate::controller::solve_full_horizon_with;
use crate::disturbance::{ThetaDomain, ThetaSample};
use crate::error::{Error, Result};
use crate::linalg::{serde_vector, Matrix, Vector};
use crate::problem::{IterationTarget, NominalProblem};
use crate::qp::QpSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedStrategy {
    /// Robust tightening first, vertex interpolation when that fails.
    Auto,
    /// One trajectory at the domain center, planned against the worst-case
    /// shift error and verified at the domain vertices.
    RobustTightened,
    /// Optimal trajectories at every domain vertex, blended per target.
    VertexInterpolation,
}

/// Seed family: one feasible trajectory per vertex of the parameter box.
/// For a target inside the box, the multilinear blend of the vertex
/// trajectories is feasible by linearity of the dynamics and convexity of
/// the constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexSeed {
    /// Parameter box: `theta`, followed by the initial-state offset when
    /// offsets vary.
    #[serde(with = "serde_vector")]
    pub lower: Vector,
    #[serde(with = "serde_vector")]
    pub upper: Vector,
    pub theta_dim: usize,
    pub vertices: Vec<HistoryEntry>,
}

impl VertexSeed {
    fn params(&self, theta: &ThetaSample, offset: Option<&Vector>) -> Vector {
        let mut p = Vector::zeros(self.lower.len());
        p.rows_mut(0, self.theta_dim).copy_from(theta.as_vector());
        if self.lower.len() > self.theta_dim {
            if let Some(o) = offset {
                p.rows_mut(self.theta_dim, o.len()).copy_from(o);
            }
        }
        p
    }

    fn free(&self) -> Vec<usize> {
        (0..self.lower.len()).filter(|&i| self.upper[i] > self.lower[i]).collect()
    }

    /// Interpolated seed trajectory for the target parameters.
    pub fn materialize(&self, target: &IterationTarget<'_>) -> Result<HistoryEntry> {
        let theta = target.theta.ok_or_else(|| Error::Seed("vertex seed needs a target theta".into()))?;
        let p = self.params(theta, target.initial_offset);
        let free = self.free();
        let mut lambda = Vec::with_capacity(free.len());
        for &i in &free {
            let l = (p[i] - self.lower[i]) / (self.upper[i] - self.lower[i]);
            if !(-1e-12..=1.0 + 1e-12).contains(&l) {
                return Err(Error::Seed(alloc::format!("target parameter {i} = {} lies outside the seed box", p[i])));
            }
            lambda.push(l.clamp(0.0, 1.0));
        }
        let first = &self.vertices[0];
        let mut states = alloc::vec![Vector::zeros(first.states[0].len()); first.states.len()];
        let mut inputs = alloc::vec![Vector::zeros(first.inputs[0].len()); first.inputs.len()];
        for (mask, vert) in self.vertices.iter().enumerate() {
            let w: f64 = lambda.iter().enumerate().map(|(bit, &l)| if mask >> bit & 1 == 1 { l } else { 1.0 - l }).product();
            if w == 0.0 {
                continue;
            }
            for (s, vs) in states.iter_mut().zip(&vert.states) {
                s.axpy(w, vs, 1.0);
            }
            for (u, vu) in inputs.iter_mut().zip(&vert.inputs) {
                u.axpy(w, vu, 1.0);
            }
        }
        Ok(HistoryEntry {
            iteration: 0,
            theta: theta.clone(),
            states,
            inputs,
            // Costs depend on the schedule; shifting recomputes them.
            stage_costs: Vec::new(),
            initial_offset: target.initial_offset.cloned(),
            deviation: None,
        })
    }
}

/// Optional box of initial-state offsets sampled per iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetBox {
    #[serde(with = "serde_vector")]
    pub lower: Vector,
    #[serde(with = "serde_vector")]
    pub upper: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: SeedRecord,
    pub strategy: SeedStrategy,
    /// Why the robust construction was abandoned, when it was.
    pub robust_failure: Option<String>,
    /// Cost of the seed at the domain center.
    pub center_cost: f64,
}

/// Builds the iteration-0 seed.
pub fn construct_seed(
    problem: &NominalProblem<'_>,
    domain: &ThetaDomain,
    offsets: Option<&OffsetBox>,
    strategy: SeedStrategy,
    settings: &QpSettings,
) -> Result<SeedReport> {
    match strategy {
        SeedStrategy::RobustTightened => robust_seed(problem, domain, offsets, settings),
        SeedStrategy::VertexInterpolation => vertex_seed(problem, domain, offsets, settings, None),
        SeedStrategy::Auto => match robust_seed(problem, domain, offsets, settings) {
            Ok(r) => Ok(r),
            Err(e) => vertex_seed(problem, domain, offsets, settings, Some(alloc::format!("{e}"))),
        },
    }
}

fn offset_center(offsets: Option<&OffsetBox>) -> Option<Vector> {
    offsets.map(|o| (&o.lower + &o.upper) * 0.5)
}

fn robust_seed(problem: &NominalProblem<'_>, domain: &ThetaDomain, offsets: Option<&OffsetBox>, settings: &QpSettings) -> Result<SeedReport> {
    let model = problem.model;
    let period = model.period();
    let n = model.state_dim();
    let theta0 = domain.center();
    let half = domain.half_widths();
    let off0 = offset_center(offsets);
    let off_half = offsets.map(|o| (&o.upper - &o.lower) * 0.5);
    let phis = problem.gains.closed_loop(model);

    // Injection of a parameter deviation at step r: C_r R_r diag(half).
    let inj: Vec<Matrix> = (0..=period).map(|r| model.c(r) * problem.basis.regressor(r) * Matrix::from_diagonal(&half)).collect();
    let mut extra: Vec<Vec<f64>> = (0..=period).map(|k| alloc::vec![0.0; problem.constraints.at(k).rows()]).collect();
    for k in 0..=period {
        let set = problem.constraints.at(k);
        let dirs = &set.f + &set.g * problem.gains.gain(k);
        // M_{k,t'} = sum_{r=t'}^{k-1} Phi(k, r+1) C_r R_r, built backwards in t'.
        let mut acc = Matrix::zeros(n, half.len());
        let mut trans = Matrix::identity(n, n);
        for start in (0..=k).rev() {
            if start < k {
                acc += &trans * &inj[start];
                trans = &trans * &phis[start];
            }
            let mut contrib = &dirs * &acc;
            let mut bound: Vec<f64> = (0..set.rows()).map(|i| contrib.row_mut(i).iter().map(|v| v.abs()).sum()).collect();
            if start == 0 {
                if let Some(oh) = &off_half {
                    let off = &dirs * &trans * Matrix::from_diagonal(oh);
                    for (i, b) in bound.iter_mut().enumerate() {
                        *b += off.row(i).iter().map(|v| v.abs()).sum::<f64>();
                    }
                }
            }
            for (e, b) in extra[k].iter_mut().zip(bound) {
                *e = e.max(b);
            }
        }
    }
    let rhs: Vec<Vector> = (0..=period)
        .map(|k| {
            let set = problem.constraints.at(k);
            Vector::from_iterator(set.rows(), (0..set.rows()).map(|i| set.rhs[i] - extra[k][i]))
        })
        .collect();
    let robust = problem.constraints.with_rhs(rhs)?;
    let target = IterationTarget::new(&theta0).with_offset(off0.as_ref());
    let sol = solve_full_horizon_with(problem, &robust, &target, settings)
        .map_err(|e| Error::Seed(alloc::format!("robustly tightened full-horizon problem: {e}")))?;
    let mut entry = HistoryEntry::from_trajectory(&sol.trajectory);
    entry.iteration = 0;
    entry.initial_offset = off0.clone();

    // Vertex verification over theta and the offset box.
    let thetas = domain.vertices();
    let offs: Vec<Option<Vector>> = match offsets {
        None => alloc::vec![None],
        Some(o) => {
            let b = ThetaDomain::new(o.lower.clone(), o.upper.clone())?;
            b.vertices().into_iter().map(|v| Some(v.0)).collect()
        }
    };
    for th in &thetas {
        for off in &offs {
            let tgt = IterationTarget::new(th).with_offset(off.as_ref());
            for start in 0..=period {
                if start > 0 && off.is_some() && offs.len() > 1 && off != &offs[0] {
                    // Offsets only act on the shift from t = 0.
                    continue;
                }
                let sh = shift_trajectory(problem, &entry, &tgt, start, true)?;
                if !sh.feasible {
                    return Err(Error::Seed(alloc::format!(
                        "seed shift from t = {start} violates the constraints at t = {} for a domain vertex",
                        sh.first_violation.unwrap_or(start)
                    )));
                }
            }
        }
    }
    Ok(SeedReport { center_cost: sol.cost, seed: SeedRecord::Trajectory(entry), strategy: SeedStrategy::RobustTightened, robust_failure: None })
}

fn vertex_seed(
    problem: &NominalProblem<'_>,
    domain: &ThetaDomain,
    offsets: Option<&OffsetBox>,
    settings: &QpSettings,
    robust_failure: Option<String>,
) -> Result<SeedReport> {
    let p = domain.dim();
    let (lower, upper) = match offsets {
        None => (domain.lower().clone(), domain.upper().clone()),
        Some(o) => {
            let mut lo = Vector::zeros(p + o.lower.len());
            let mut hi = lo.clone();
            lo.rows_mut(0, p).copy_from(domain.lower());
            hi.rows_mut(0, p).copy_from(domain.upper());
            lo.rows_mut(p, o.lower.len()).copy_from(&o.lower);
            hi.rows_mut(p, o.lower.len()).copy_from(&o.upper);
            (lo, hi)
        }
    };
    let joint = ThetaDomain::new(lower.clone(), upper.clone())?;
    let mut vertices = Vec::new();
    for v in joint.vertices() {
        let theta = ThetaSample(v.0.rows(0, p).into_owned());
        let off = offsets.map(|o| v.0.rows(p, o.lower.len()).into_owned());
        let target = IterationTarget::new(&theta).with_offset(off.as_ref());
        let sol = solve_full_horizon_with(problem, problem.constraints, &target, settings)
            .map_err(|e| Error::Seed(alloc::format!("full-horizon problem at a domain vertex: {e}")))?;
        let mut entry = HistoryEntry::from_trajectory(&sol.trajectory);
        entry.initial_offset = off;
        vertices.push(entry);
    }
    let seed = VertexSeed { lower, upper, theta_dim: p, vertices };
    let center = domain.center();
    let off0 = offset_center(offsets);
    let center_entry = seed.materialize(&IterationTarget::new(&center).with_offset(off0.as_ref()))?;
    let mut center_cost = 0.0;
    for t in 0..center_entry.states.len() {
        center_cost += problem.costs.evaluate(t, &center_entry.states[t], &center_entry.inputs[t])?;
    }
    Ok(SeedReport { seed: SeedRecord::VertexFamily(seed), strategy: SeedStrategy::VertexInterpolation, robust_failure, center_cost })
}
