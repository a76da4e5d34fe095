mod common;

use approx::assert_abs_diff_eq;
use common::*;
use plmpc_core::linalg::{matrix_from_rows, Matrix};
use plmpc_core::model::{rollout, ConstraintSet, PeriodicLtvModel, PolytopicConstraintSchedule, StageCostSchedule};
use plmpc_core::scenarios::{building_scenario, spring_mass_scenario};
use proptest::prelude::*;

#[test]
fn identity_dynamics_keep_state() {
    let model = PeriodicLtvModel::time_invariant(3, Matrix::identity(2, 2), Matrix::zeros(2, 1), Matrix::zeros(2, 2), v(&[3.0, 0.0])).unwrap();
    let x = model.step(0, &v(&[3.0, 0.0]), &v(&[1.0]), &v(&[0.0, 0.0])).unwrap();
    assert_eq!(x, v(&[3.0, 0.0]));
}

#[test]
fn spring_mass_step_at_zero() {
    let s = spring_mass_scenario().unwrap();
    let x = s.model.step(0, &v(&[3.0, 0.0]), &v(&[0.0]), &v(&[0.0, 0.0])).unwrap();
    assert_abs_diff_eq!(x[0], 3.0, epsilon = 1e-15);
    assert_abs_diff_eq!(x[1], 0.3, epsilon = 1e-15);
}

#[test]
fn building_step_matches_scripted_matvec() {
    let s = building_scenario().unwrap();
    let x = s.model.step(0, &v(&[19.0, 19.0, 15.0]), &v(&[0.0]), &v(&[12.0, 0.0, 1.0])).unwrap();
    let expected = [18.5681163, 18.9670726, 14.68562];
    for i in 0..3 {
        assert_abs_diff_eq!(x[i], expected[i], epsilon = 1e-12);
    }
}

#[test]
fn boundary_point_is_feasible_with_zero_margin() {
    let set = ConstraintSet::from_boxes(&[-1.0], &[1.0], &[-1.0], &[1.0]).unwrap();
    let sched = PolytopicConstraintSchedule::new(vec![set; 2]).unwrap();
    let chk = sched.check(0, &v(&[1.0]), &v(&[0.0]), 0.0).unwrap();
    assert!(chk.satisfied);
    assert_eq!(chk.worst, 0.0);
}

#[test]
fn scenario_constraint_examples() {
    let s = spring_mass_scenario().unwrap();
    assert!(!s.constraints.check(10, &v(&[4.5, 0.0]), &v(&[0.0]), 1e-8).unwrap().satisfied);
    let b = building_scenario().unwrap();
    assert!(!b.constraints.check(60, &v(&[21.0, 20.0, 20.0]), &v(&[0.0]), 1e-8).unwrap().satisfied);
}

#[test]
fn stage_cost_examples() {
    let s = spring_mass_scenario().unwrap();
    assert_eq!(s.costs.evaluate(0, &v(&[3.0, 0.0]), &v(&[1.0])).unwrap(), 2.0);
    assert_eq!(s.costs.evaluate(0, &v(&[2.0, 5.0]), &v(&[0.0])).unwrap(), 0.0);
    let b = building_scenario().unwrap();
    assert_eq!(b.costs.evaluate(70, &v(&[24.0, 0.0, 0.0]), &v(&[3.0])).unwrap(), 6.0);
}

#[test]
fn zero_model_rollout_is_zero() {
    let model = PeriodicLtvModel::time_invariant(4, Matrix::zeros(1, 1), Matrix::zeros(1, 1), Matrix::zeros(1, 1), v(&[0.0])).unwrap();
    let set = ConstraintSet::from_boxes(&[-1.0], &[1.0], &[-1.0], &[1.0]).unwrap();
    let sched = PolytopicConstraintSchedule::new(vec![set; 5]).unwrap();
    let costs = StageCostSchedule::new(vec![quadratic(1.0, 1.0); 5]).unwrap();
    let traj = rollout(&model, &sched, &costs, |_, _| Ok(v(&[0.0])), &vec![v(&[0.0]); 5], &v(&[0.0])).unwrap();
    assert!(traj.states.iter().all(|x| x[0] == 0.0));
    assert_eq!(traj.cumulative_cost, 0.0);
}

#[test]
fn constant_policy_rollout_hand_recursion() {
    let model = PeriodicLtvModel::time_invariant(3, m1(1.0), m1(1.0), m1(1.0), v(&[1.0])).unwrap();
    let set = ConstraintSet::from_boxes(&[-10.0], &[10.0], &[-10.0], &[10.0]).unwrap();
    let sched = PolytopicConstraintSchedule::new(vec![set; 4]).unwrap();
    let costs = StageCostSchedule::new(vec![quadratic(1.0, 1.0); 4]).unwrap();
    let traj = rollout(&model, &sched, &costs, |_, _| Ok(v(&[-1.0])), &vec![v(&[0.0]); 4], &v(&[1.0])).unwrap();
    let xs: Vec<f64> = traj.states.iter().map(|x| x[0]).collect();
    assert_eq!(xs, vec![1.0, 0.0, -1.0, -2.0]);
    // (1+1) + (0+1) + (1+1) + (4+1)
    assert_eq!(traj.cumulative_cost, 10.0);
    assert!(traj.violations.is_empty());
}

#[test]
fn rollout_records_violations() {
    let model = PeriodicLtvModel::time_invariant(2, m1(1.0), m1(1.0), m1(1.0), v(&[0.0])).unwrap();
    let set = ConstraintSet::from_boxes(&[-1.0], &[1.0], &[-5.0], &[5.0]).unwrap();
    let sched = PolytopicConstraintSchedule::new(vec![set; 3]).unwrap();
    let costs = StageCostSchedule::new(vec![quadratic(1.0, 0.0); 3]).unwrap();
    let traj = rollout(&model, &sched, &costs, |_, _| Ok(v(&[2.0])), &vec![v(&[0.0]); 3], &v(&[0.0])).unwrap();
    assert_eq!(traj.violations.len(), 2);
    assert_eq!(traj.violations[0], (1, 1.0));
}

#[test]
fn mismatched_dimensions_are_rejected() {
    assert!(PeriodicLtvModel::time_invariant(3, Matrix::identity(2, 2), Matrix::zeros(3, 1), Matrix::zeros(2, 2), v(&[0.0, 0.0])).is_err());
    let model = PeriodicLtvModel::time_invariant(3, m1(1.0), m1(1.0), m1(1.0), v(&[0.0])).unwrap();
    assert!(model.step(0, &v(&[0.0, 1.0]), &v(&[0.0]), &v(&[0.0])).is_err());
    assert!(model.step(4, &v(&[0.0]), &v(&[0.0]), &v(&[0.0])).is_err());
}

#[test]
fn empty_constraint_set_is_rejected() {
    let bad = ConstraintSet::from_boxes(&[1.0], &[0.0], &[-1.0], &[1.0]).unwrap();
    let good = ConstraintSet::from_boxes(&[-1.0], &[1.0], &[-1.0], &[1.0]).unwrap();
    assert!(PolytopicConstraintSchedule::new_checked(vec![good, bad]).is_err());
}

fn random_model() -> impl Strategy<Value = (PeriodicLtvModel, usize)> {
    (prop::collection::vec(-1.0f64..1.0, 3 * (4 + 2 + 4)), 0usize..3).prop_map(|(vals, t)| {
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut c = Vec::new();
        for k in 0..3 {
            let s = &vals[k * 10..(k + 1) * 10];
            a.push(matrix_from_rows(&[&s[0..2], &s[2..4]]));
            b.push(matrix_from_rows(&[&s[4..5], &s[5..6]]));
            c.push(matrix_from_rows(&[&s[6..8], &s[8..10]]));
        }
        (PeriodicLtvModel::new(a, b, c, v(&[0.0, 0.0])).unwrap(), t)
    })
}

proptest! {
    #[test]
    fn step_is_linear(
        (model, t) in random_model(),
        x in prop::array::uniform2(-5.0f64..5.0), y in prop::array::uniform2(-5.0f64..5.0),
        u in -5.0f64..5.0, w in prop::array::uniform2(-5.0f64..5.0),
        s in -3.0f64..3.0,
    ) {
        let (x, y, u, w) = (v(&x), v(&y), v(&[u]), v(&w));
        let z = v(&[0.0]);
        let zw = v(&[0.0, 0.0]);
        let lhs = model.step(t, &(&x * s + &y), &(&u * s), &(&w * s)).unwrap();
        let rhs = model.step(t, &x, &u, &w).unwrap() * s + model.step(t, &y, &z, &zw).unwrap();
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }

    #[test]
    fn check_agrees_with_rowwise_comparison(
        rows in prop::collection::vec((prop::array::uniform2(-2.0f64..2.0), -2.0f64..2.0, -3.0f64..3.0), 1..6),
        x in prop::array::uniform2(-2.0f64..2.0), u in -2.0f64..2.0,
    ) {
        let f = Matrix::from_fn(rows.len(), 2, |i, j| rows[i].0[j]);
        let g = Matrix::from_fn(rows.len(), 1, |i, _| rows[i].1);
        let rhs = v(&rows.iter().map(|r| r.2).collect::<Vec<_>>());
        let set = ConstraintSet::new(f, g, rhs).unwrap();
        let sched = PolytopicConstraintSchedule::new(vec![set; 2]).unwrap();
        let chk = sched.check(1, &v(&x), &v(&[u]), 1e-8).unwrap();
        let worst = rows.iter().map(|r| r.0[0] * x[0] + r.0[1] * x[1] + r.1 * u - r.2).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((chk.worst - worst).abs() <= 1e-12);
        prop_assert_eq!(chk.satisfied, rows.iter().all(|r| r.0[0] * x[0] + r.0[1] * x[1] + r.1 * u <= r.2 + 1e-8));
    }

    #[test]
    fn stage_cost_is_nonnegative(t in 0usize..=50, x in prop::array::uniform2(-5.0f64..5.0), u in -10.0f64..10.0) {
        let s = spring_mass_scenario().unwrap();
        prop_assert!(s.costs.evaluate(t, &v(&x), &v(&[u])).unwrap() >= 0.0);
    }
}
