//! Borrowed bundle of the nominal problem data used by shifting, safe-set
//! construction and the controller.

use alloc::borrow::Cow;
use alloc::vec::Vec;

use crate::disturbance::{DisturbanceBasis, ThetaSample};
use crate::error::Result;
use crate::linalg::{Matrix, Vector};
use crate::model::{DynamicsDeviation, PeriodicLtvModel, PolytopicConstraintSchedule, StageCostSchedule, DEFAULT_CONSTRAINT_MARGIN};
use crate::tube::FeedbackGainSchedule;

#[derive(Debug, Clone, Copy)]
pub struct NominalProblem<'a> {
    /// Nominal plant; per-iteration deviations are applied on top.
    pub model: &'a PeriodicLtvModel,
    pub basis: &'a DisturbanceBasis,
    pub gains: &'a FeedbackGainSchedule,
    /// Tightened constraints the nominal trajectory must satisfy.
    pub constraints: &'a PolytopicConstraintSchedule,
    pub costs: &'a StageCostSchedule,
    pub margin: f64,
}

impl<'a> NominalProblem<'a> {
    pub fn new(
        model: &'a PeriodicLtvModel,
        basis: &'a DisturbanceBasis,
        gains: &'a FeedbackGainSchedule,
        constraints: &'a PolytopicConstraintSchedule,
        costs: &'a StageCostSchedule,
    ) -> Self {
        Self { model, basis, gains, constraints, costs, margin: DEFAULT_CONSTRAINT_MARGIN }
    }

    pub fn period(&self) -> usize {
        self.model.period()
    }
}

/// What a trajectory is shifted to: the new iteration's parameters.
#[derive(Debug, Clone, Copy, Default)]
pub struct IterationTarget<'a> {
    pub theta: Option<&'a ThetaSample>,
    /// Initial-state offset `w_s`; the start state is `x_s + w_s`.
    pub initial_offset: Option<&'a Vector>,
    pub deviation: Option<&'a DynamicsDeviation>,
}

impl<'a> IterationTarget<'a> {
    pub fn new(theta: &'a ThetaSample) -> Self {
        Self { theta: Some(theta), initial_offset: None, deviation: None }
    }
    pub fn with_offset(mut self, offset: Option<&'a Vector>) -> Self {
        self.initial_offset = offset;
        self
    }
    pub fn with_deviation(mut self, deviation: Option<&'a DynamicsDeviation>) -> Self {
        self.deviation = deviation;
        self
    }
}

/// Dynamics matrices of one iteration, with the deviation folded in.
pub(crate) struct IterationDynamics<'a> {
    pub a: Cow<'a, [Matrix]>,
    pub b: Cow<'a, [Matrix]>,
}

impl<'a> IterationDynamics<'a> {
    pub fn new(model: &'a PeriodicLtvModel, deviation: Option<&DynamicsDeviation>) -> Self {
        match deviation {
            None => Self { a: Cow::Borrowed(model.a_schedule()), b: Cow::Borrowed(model.b_schedule()) },
            Some(d) => Self {
                a: Cow::Owned(model.a_schedule().iter().zip(&d.da).map(|(a, da)| a + da).collect()),
                b: Cow::Owned(model.b_schedule().iter().zip(&d.db).map(|(b, db)| b + db).collect()),
            },
        }
    }
}

/// Start state `x_s + w_s`.
pub fn start_state(model: &PeriodicLtvModel, offset: Option<&Vector>) -> Vector {
    match offset {
        Some(o) => model.initial_state() + o,
        None => model.initial_state().clone(),
    }
}

/// `C_t w_theta(t)` for `t = 0..=T`.
pub fn injected_disturbance(model: &PeriodicLtvModel, basis: &DisturbanceBasis, theta: &ThetaSample) -> Result<Vec<Vector>> {
    let w = basis.correlated_sequence(theta)?;
    Ok(w.iter().enumerate().map(|(t, w)| model.c(t) * w).collect())
}
