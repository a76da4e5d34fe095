//! Built-in benchmark systems: the periodic spring-mass task, the single
//! zone building and a one-dimensional system small enough for brute-force
//! oracles.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use crate::controller::LmpcConfig;
use crate::disturbance::{Atom, DisturbanceBasis, Interval, PeriodFraction, ThetaDomain};
use crate::error::Result;
use crate::learning::SeedStrategy;
use crate::linalg::{matrix_from_rows, vec_of, Matrix};
use crate::model::{ConstraintSet, PeriodicLtvModel, PolytopicConstraintSchedule, StageCost, StageCostSchedule};
use crate::tube::{TubeDesign, DEFAULT_ALPHA_TARGET, DEFAULT_RPI_MAX_HORIZON};

/// Everything needed to run a learning experiment on one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub model: PeriodicLtvModel,
    pub constraints: PolytopicConstraintSchedule,
    pub costs: StageCostSchedule,
    pub basis: DisturbanceBasis,
    pub domain: ThetaDomain,
    pub tube: TubeDesign,
    pub lmpc: LmpcConfig,
    pub seed_strategy: SeedStrategy,
}

impl ScenarioSpec {
    pub fn period(&self) -> usize {
        self.model.period()
    }

    /// Cross-checks dimensions between the parts.
    pub fn validate(&self) -> Result<()> {
        use crate::error::check_len;
        let t = self.period();
        check_len("constraint schedule period", t, self.constraints.period())?;
        check_len("cost schedule period", t, self.costs.period())?;
        check_len("basis period", t, self.basis.period())?;
        check_len("constraint state dimension", self.model.state_dim(), self.constraints.state_dim())?;
        check_len("constraint input dimension", self.model.input_dim(), self.constraints.input_dim())?;
        check_len("basis channel count", self.model.disturbance_dim(), self.basis.channel_count())?;
        check_len("theta domain dimension", self.basis.coefficient_count(), self.domain.dim())?;
        self.lmpc.validate(t)
    }
}

pub const SPRING_MASS: &str = "spring-mass";
pub const BUILDING: &str = "building";
pub const TINY: &str = "tiny";

/// Looks up a built-in scenario by its CLI name.
pub fn by_name(name: &str) -> Option<Result<ScenarioSpec>> {
    match name {
        SPRING_MASS => Some(spring_mass_scenario()),
        BUILDING => Some(building_scenario()),
        TINY => Some(tiny_scenario()),
        _ => None,
    }
}

fn uniform_cost(weight: &[f64], target: &[f64], input_weight: &[f64], price: &[f64]) -> Result<StageCost> {
    StageCost::new(vec_of(weight), vec_of(target), vec_of(input_weight), vec_of(price))
}

/// Periodic spring-mass: `T = 50`, switching boxes and set-point at `T/2`.
pub fn spring_mass_scenario() -> Result<ScenarioSpec> {
    let period = 50;
    let a: Vec<Matrix> = (0..=period)
        .map(|t| {
            let s = libm::sin(2.0 * PI * t as f64 / period as f64);
            matrix_from_rows(&[&[1.0, 0.1], &[0.1 * (1.0 - s), 1.0]])
        })
        .collect();
    let b = vec![matrix_from_rows(&[&[0.0], &[0.1]]); period + 1];
    let c = vec![Matrix::identity(2, 2); period + 1];
    let model = PeriodicLtvModel::new(a, b, c, vec_of(&[3.0, 0.0]))?;

    let first = ConstraintSet::from_boxes(&[-1.0, -3.0], &[4.0, 3.0], &[-10.0], &[10.0])?;
    let second = ConstraintSet::from_boxes(&[-4.0, -3.0], &[1.0, 3.0], &[-10.0], &[10.0])?;
    let constraints =
        PolytopicConstraintSchedule::new_checked((0..=period).map(|t| if 2 * t < period { first.clone() } else { second.clone() }).collect())?;
    let up = uniform_cost(&[1.0, 0.0], &[2.0, 0.0], &[1.0], &[0.0])?;
    let down = uniform_cost(&[1.0, 0.0], &[-2.0, 0.0], &[1.0], &[0.0])?;
    let costs = StageCostSchedule::new((0..=period).map(|t| if 2 * t < period { up.clone() } else { down.clone() }).collect())?;

    let channel = vec![Atom::Constant, Atom::Sine { harmonic: 1 }];
    let basis = DisturbanceBasis::new(period, vec![channel.clone(), channel], vec![Interval::new(0.0, 0.0); 2])?;
    let domain = ThetaDomain::from_intervals(&[Interval::new(-0.1, 0.1); 4])?;
    Ok(ScenarioSpec {
        name: SPRING_MASS.into(),
        model,
        constraints,
        costs,
        basis,
        domain,
        tube: TubeDesign {
            q_lqr: Matrix::identity(2, 2),
            r_lqr: Matrix::identity(1, 1),
            alpha_target: DEFAULT_ALPHA_TARGET,
            max_horizon: DEFAULT_RPI_MAX_HORIZON,
        },
        lmpc: LmpcConfig::new(4),
        seed_strategy: SeedStrategy::Auto,
    })
}

/// Single zone building, one day of ten-minute steps.
pub fn building_scenario() -> Result<ScenarioSpec> {
    let period = 144;
    let a = matrix_from_rows(&[&[0.8511, 0.0541, 0.0707], &[0.1293, 0.8635, 0.0055], &[0.0989, 0.0032, 0.7541]]);
    let b = matrix_from_rows(&[&[0.0035], &[0.0003], &[0.0002]]);
    let c = matrix_from_rows(&[&[22.2170, 1.7912, 42.2123], &[1.5376, 0.6944, 2.9214], &[103.1813, 0.1032, 196.0444]]) * 1e-3;
    let model = PeriodicLtvModel::time_invariant(period, a, b, c, vec_of(&[19.0, 19.0, 15.0]))?;

    let inf = f64::INFINITY;
    // Comfort band for T/3 <= t <= 3T/4, endpoints included.
    let work = |t: usize| 3 * t >= period && 4 * t <= 3 * period;
    let steps = (0..=period)
        .map(|t| {
            let (lo, hi) = if work(t) { (22.0, 26.0) } else { (18.0, 30.0) };
            ConstraintSet::from_boxes(&[lo, -inf, -inf], &[hi, inf, inf], &[-30.0], &[30.0])
        })
        .collect::<Result<Vec<_>>>()?;
    let constraints = PolytopicConstraintSchedule::new_checked(steps)?;
    let costs = StageCostSchedule::new(
        (0..=period)
            .map(|t| {
                let r = if 3 * t >= period && 4 * t < 3 * period { 24.0 } else { 20.0 };
                let cp = if 12 * t >= 5 * period && 3 * t < 2 * period { 2.0 } else { 1.0 };
                uniform_cost(&[1.0, 0.0, 0.0], &[r, 0.0, 0.0], &[0.0], &[cp])
            })
            .collect::<Result<Vec<_>>>()?,
    )?;
    let basis = DisturbanceBasis::new(
        period,
        vec![
            vec![Atom::Constant, Atom::Sine { harmonic: 1 }],
            vec![Atom::Triangle { start: PeriodFraction::new(1, 4), peak: PeriodFraction::new(1, 2), end: PeriodFraction::new(3, 4) }],
            vec![Atom::Constant, Atom::Square { start: PeriodFraction::new(1, 3), end: PeriodFraction::new(3, 4) }],
        ],
        vec![Interval::new(-3.0, 3.0), Interval::new(-5.0, 5.0), Interval::new(-2.0, 2.0)],
    )?;
    let domain = ThetaDomain::from_intervals(&[
        Interval::new(10.0, 14.0),
        Interval::new(-6.0, -2.0),
        Interval::new(0.0, 16.0),
        Interval::new(0.0, 2.0),
        Interval::new(6.0, 7.0),
    ])?;
    Ok(ScenarioSpec {
        name: BUILDING.into(),
        model,
        constraints,
        costs,
        basis,
        domain,
        tube: TubeDesign {
            q_lqr: Matrix::identity(3, 3) * 10.0,
            r_lqr: Matrix::identity(1, 1),
            alpha_target: DEFAULT_ALPHA_TARGET,
            // Large enough that the RPI approximation completes; the failure
            // then shows up where it belongs, in the tightened band.
            max_horizon: 1000,
        },
        lmpc: LmpcConfig::new(16),
        seed_strategy: SeedStrategy::Auto,
    })
}

/// One-dimensional periodic plant with `T = 6`. The transition into `t = T`
/// resets the state to the disturbance, so every iteration under the same
/// theta ends in the same state.
pub fn tiny_scenario() -> Result<ScenarioSpec> {
    let period = 6;
    let reset = period - 1;
    let a = (0..=period).map(|t| Matrix::from_element(1, 1, if t == reset { 0.0 } else { 0.5 })).collect();
    let b = (0..=period).map(|t| Matrix::from_element(1, 1, if t == reset { 0.0 } else { 1.0 })).collect();
    let c = vec![Matrix::identity(1, 1); period + 1];
    let model = PeriodicLtvModel::new(a, b, c, vec_of(&[0.0]))?;
    let set = ConstraintSet::from_boxes(&[-1.5], &[1.5], &[-1.0], &[1.0])?;
    let constraints = PolytopicConstraintSchedule::new_checked(vec![set; period + 1])?;
    let costs = StageCostSchedule::new(
        (0..=period)
            .map(|t| uniform_cost(&[1.0], &[if t < period / 2 { 1.2 } else { -0.8 }], &[0.5], &[0.0]))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let basis = DisturbanceBasis::new(period, vec![vec![Atom::Constant]], vec![Interval::new(-0.05, 0.05)])?;
    let domain = ThetaDomain::from_intervals(&[Interval::new(-0.1, 0.1)])?;
    Ok(ScenarioSpec {
        name: TINY.into(),
        model,
        constraints,
        costs,
        basis,
        domain,
        tube: TubeDesign {
            q_lqr: Matrix::identity(1, 1),
            r_lqr: Matrix::identity(1, 1),
            alpha_target: DEFAULT_ALPHA_TARGET,
            max_horizon: DEFAULT_RPI_MAX_HORIZON,
        },
        lmpc: LmpcConfig::new(2),
        seed_strategy: SeedStrategy::Auto,
    })
}
