//! Learning from history: trajectory shifting, the sampled safe set and its
//! Q-function, and construction of the initial feasible seed.

mod safe_set;
pub mod seed;
mod shift;

pub use safe_set::{build_safe_set, query_q, QValue, SafeSet, SafeSetBuild, SafeSetEntry, SafeSetSummary, LevelSummary, DEFAULT_MATCH_TOLERANCE};
pub use seed::{construct_seed, OffsetBox, SeedReport, SeedStrategy, VertexSeed};
pub use shift::{shift_trajectory, ShiftedTrajectory};

use alloc::borrow::Cow;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::disturbance::ThetaSample;
use crate::error::{Error, Result};
use crate::linalg::{serde_vectors, Vector};
use crate::model::{DynamicsDeviation, Trajectory};
use crate::problem::IterationTarget;

/// Nominal trajectory of one completed iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub theta: ThetaSample,
    #[serde(with = "serde_vectors")]
    pub states: Vec<Vector>,
    #[serde(with = "serde_vectors")]
    pub inputs: Vec<Vector>,
    pub stage_costs: Vec<f64>,
    #[serde(with = "crate::linalg::serde_opt_vector")]
    pub initial_offset: Option<Vector>,
    pub deviation: Option<DynamicsDeviation>,
}

impl HistoryEntry {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        Self {
            iteration: traj.iteration,
            theta: traj.theta.clone(),
            states: traj.states.clone(),
            inputs: traj.inputs.clone(),
            stage_costs: traj.stage_costs.clone(),
            initial_offset: None,
            deviation: None,
        }
    }
    pub fn cost(&self) -> f64 {
        self.stage_costs.iter().sum()
    }
}

/// Iteration-0 record: a single trajectory, or a family interpolated per
/// target parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeedRecord {
    Trajectory(HistoryEntry),
    VertexFamily(VertexSeed),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryStore {
    seed: SeedRecord,
    iterations: Vec<HistoryEntry>,
}

impl HistoryStore {
    pub fn new(seed: SeedRecord) -> Self {
        Self { seed, iterations: Vec::new() }
    }
    pub fn seed(&self) -> &SeedRecord {
        &self.seed
    }
    /// Completed LMPC iterations, indexed from 1.
    pub fn iterations(&self) -> &[HistoryEntry] {
        &self.iterations
    }
    /// Number of stored iterations including the seed.
    pub fn len(&self) -> usize {
        self.iterations.len() + 1
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn push(&mut self, entry: HistoryEntry) -> Result<()> {
        if entry.iteration != self.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "history iteration {} arrives out of order (expected {})",
                entry.iteration,
                self.len()
            )));
        }
        self.iterations.push(entry);
        Ok(())
    }
    /// Source trajectories for a target, the seed materialized if needed.
    pub fn sources(&self, target: &IterationTarget<'_>) -> Result<Vec<Cow<'_, HistoryEntry>>> {
        let mut out = Vec::with_capacity(self.len());
        match &self.seed {
            SeedRecord::Trajectory(e) => out.push(Cow::Borrowed(e)),
            SeedRecord::VertexFamily(v) => out.push(Cow::Owned(v.materialize(target)?)),
        }
        out.extend(self.iterations.iter().map(Cow::Borrowed));
        Ok(out)
    }
}
