#![allow(dead_code)]

pub mod oracles;

use plmpc_core::disturbance::{Atom, DisturbanceBasis, Interval, ThetaSample};
use plmpc_core::linalg::{Matrix, Vector};
use plmpc_core::model::{ConstraintSet, PeriodicLtvModel, PolytopicConstraintSchedule, StageCost, StageCostSchedule};
use plmpc_core::problem::NominalProblem;
use plmpc_core::scenarios::ScenarioSpec;
use plmpc_core::tube::{build_tube, FeedbackGainSchedule, TubeArtifacts};

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

pub fn m1(x: f64) -> Matrix {
    Matrix::from_element(1, 1, x)
}

/// Scenario plus its tube, owning everything a `NominalProblem` borrows.
pub struct Built {
    pub spec: ScenarioSpec,
    pub tube: TubeArtifacts,
}

impl Built {
    pub fn new(spec: ScenarioSpec) -> Self {
        let tube = build_tube(&spec.model, &spec.constraints, spec.basis.residual_bounds(), &spec.tube).unwrap();
        Self { spec, tube }
    }
    pub fn problem(&self) -> NominalProblem<'_> {
        NominalProblem::new(&self.spec.model, &self.spec.basis, &self.tube.gains, &self.tube.tightened.schedule, &self.spec.costs)
    }
}

/// Hand-built scalar problem `x' = a x + b u + w`, constant basis, no tube.
pub struct Scalar {
    pub model: PeriodicLtvModel,
    pub basis: DisturbanceBasis,
    pub gains: FeedbackGainSchedule,
    pub constraints: PolytopicConstraintSchedule,
    pub costs: StageCostSchedule,
}

impl Scalar {
    pub fn new(period: usize, a: f64, b: f64, x0: f64, gain: f64, bound: f64, cost: StageCost) -> Self {
        let model = PeriodicLtvModel::time_invariant(period, m1(a), m1(b), m1(1.0), v(&[x0])).unwrap();
        let basis = DisturbanceBasis::new(period, vec![vec![Atom::Constant]], vec![Interval::new(0.0, 0.0)]).unwrap();
        let gains = FeedbackGainSchedule::from_gains(vec![m1(gain); period + 1], m1(1.0), m1(1.0));
        let set = ConstraintSet::from_boxes(&[-bound], &[bound], &[-bound], &[bound]).unwrap();
        let constraints = PolytopicConstraintSchedule::new(vec![set; period + 1]).unwrap();
        let costs = StageCostSchedule::new(vec![cost; period + 1]).unwrap();
        Self { model, basis, gains, constraints, costs }
    }
    pub fn problem(&self) -> NominalProblem<'_> {
        NominalProblem::new(&self.model, &self.basis, &self.gains, &self.constraints, &self.costs)
    }
}

pub fn quadratic(wx: f64, wu: f64) -> StageCost {
    StageCost::new(v(&[wx]), v(&[0.0]), v(&[wu]), v(&[0.0])).unwrap()
}

pub fn theta(xs: &[f64]) -> ThetaSample {
    ThetaSample::from_slice(xs)
}
