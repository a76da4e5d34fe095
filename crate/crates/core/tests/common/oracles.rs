//! Reference computations that share no code with the library's solvers.
#![allow(dead_code)]

use plmpc_core::disturbance::{uniform_in, Interval};
use plmpc_core::learning::{build_safe_set, query_q, HistoryEntry, HistoryStore};
use plmpc_core::linalg::{Matrix, Vector};
use plmpc_core::model::PolytopicConstraintSchedule;
use plmpc_core::problem::{IterationTarget, NominalProblem};
use plmpc_core::tube::{tighten_constraints, FeedbackGainSchedule, RpiSet, Zonotope};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn s(x: f64) -> Vector {
    Vector::from_element(1, x)
}

/// Nominal trajectory of `x' = a x + b u + c theta` under the given inputs.
pub fn scalar_history(p: &NominalProblem<'_>, iteration: usize, th: f64, inputs: &[f64]) -> HistoryEntry {
    let period = p.period();
    let mut states = vec![p.model.initial_state()[0]];
    for t in 0..period {
        let x = states[t];
        states.push(p.model.a(t)[(0, 0)] * x + p.model.b(t)[(0, 0)] * inputs[t] + p.model.c(t)[(0, 0)] * th);
    }
    let stage_costs = (0..=period).map(|t| p.costs.evaluate(t, &s(states[t]), &s(inputs[t])).unwrap()).collect();
    HistoryEntry {
        iteration,
        theta: plmpc_core::disturbance::ThetaSample::from_slice(&[th]),
        states: states.iter().map(|x| s(*x)).collect(),
        inputs: inputs.iter().map(|u| s(*u)).collect(),
        stage_costs,
        initial_offset: None,
        deviation: None,
    }
}

fn box_bounds(p: &NominalProblem<'_>, t: usize) -> ([f64; 2], [f64; 2]) {
    let set = p.constraints.at(t);
    let mut x = [f64::NEG_INFINITY, f64::INFINITY];
    let mut u = [f64::NEG_INFINITY, f64::INFINITY];
    for i in 0..set.rows() {
        let (f, g, r) = (set.f[(i, 0)], set.g[(i, 0)], set.rhs[i] + p.margin);
        assert!(f == 0.0 || g == 0.0, "box rows only");
        let (target, c) = if f != 0.0 { (&mut x, f) } else { (&mut u, g) };
        if c > 0.0 {
            target[1] = target[1].min(r / c);
        } else {
            target[0] = target[0].max(r / c);
        }
    }
    (x, u)
}

/// Value iteration for a scalar problem with box rows on a state grid of
/// spacing `h` over `[-1.5, 1.5]` containing `x_s = 0`. Inputs follow from
/// consecutive grid states; the input-free step into `T` uses an input grid.
pub fn dp_grid(p: &NominalProblem<'_>, th: f64, h: f64) -> f64 {
    let period = p.period();
    let n = (1.5 / h).round() as i64;
    let xs: Vec<f64> = (-n..=n).map(|i| i as f64 * h).collect();
    let us: Vec<f64> = (-1000..=1000).map(|i| i as f64 * 1e-3).collect();
    let inside = |b: [f64; 2], y: f64| y >= b[0] && y <= b[1];
    let cost = |t: usize, x: f64, u: f64| -> f64 {
        let c = p.costs.at(t);
        c.state_weight[0] * (x - c.state_target[0]).powi(2) + c.input_weight[0] * u * u + (c.input_price[0] * u).abs()
    };
    let best_over_inputs = |t: usize, x: f64, next: f64| -> f64 {
        let (bx, bu) = box_bounds(p, t);
        if !inside(bx, x) {
            return f64::INFINITY;
        }
        us.iter().filter(|u| inside(bu, **u)).map(|&u| cost(t, x, u) + next).fold(f64::INFINITY, f64::min)
    };
    let terminal = |x: f64| best_over_inputs(period, x, 0.0);
    let mut value: Vec<f64> = xs.iter().map(|&x| terminal(x)).collect();
    for t in (0..period).rev() {
        let (a, b) = (p.model.a(t)[(0, 0)], p.model.b(t)[(0, 0)]);
        let c = p.model.c(t)[(0, 0)];
        let (bx, bu) = box_bounds(p, t);
        let next_value = value.clone();
        value = xs
            .iter()
            .map(|&x| {
                if !inside(bx, x) {
                    return f64::INFINITY;
                }
                if b == 0.0 {
                    assert_eq!(t + 1, period, "input-free step must precede T");
                    return best_over_inputs(t, x, terminal(a * x + c * th));
                }
                let mut best = f64::INFINITY;
                for (j, &xn) in xs.iter().enumerate() {
                    let u = (xn - a * x - c * th) / b;
                    if inside(bu, u) && next_value[j].is_finite() {
                        best = best.min(cost(t, x, u) + next_value[j]);
                    }
                }
                best
            })
            .collect();
    }
    value[n as usize]
}

/// `(k, z_k, J_k)` of a scalar shift when every step is feasible, computed
/// from the error recursion directly.
pub fn scalar_shift(p: &NominalProblem<'_>, src: &HistoryEntry, th_new: f64, start: usize) -> Option<Vec<(usize, f64, f64)>> {
    let period = p.period();
    let th_old = src.theta.0[0];
    let mut e = 0.0;
    let mut pts = Vec::new();
    for k in start..=period {
        let kg = p.gains.gain(k)[(0, 0)];
        let z = src.states[k][0] + e;
        let u = src.inputs[k][0] + kg * e;
        let set = p.constraints.at(k);
        for i in 0..set.rows() {
            if set.f[(i, 0)] * z + set.g[(i, 0)] * u > set.rhs[i] + p.margin {
                return None;
            }
        }
        let c = p.costs.at(k);
        let l = c.state_weight[0] * (z - c.state_target[0]).powi(2) + c.input_weight[0] * u * u + (c.input_price[0] * u).abs();
        pts.push((k, z, l));
        if k < period {
            let phi = p.model.a(k)[(0, 0)] + p.model.b(k)[(0, 0)] * kg;
            e = phi * e + p.model.c(k)[(0, 0)] * (th_new - th_old);
        }
    }
    let mut acc = 0.0;
    let mut out: Vec<(usize, f64, f64)> = pts
        .iter()
        .rev()
        .map(|&(k, z, l)| {
            acc += l;
            (k, z, acc)
        })
        .collect();
    out.reverse();
    Some(out)
}

/// Compares the scalar safe set with brute-force enumeration of every
/// `(iteration, start)` shift. Returns the number of infeasible shifts.
pub fn check_safe_set_enumeration(p: &NominalProblem<'_>, store: &HistoryStore, th_new: f64, tol: f64) -> Result<usize, String> {
    let period = p.period();
    let th = plmpc_core::disturbance::ThetaSample::from_slice(&[th_new]);
    let target = IterationTarget::new(&th);
    let built = build_safe_set(p, store, &target, tol).map_err(|e| e.to_string())?;
    let mut oracle: Vec<Vec<(f64, f64)>> = vec![Vec::new(); period + 1];
    let mut infeasible = 0;
    for src in store.sources(&target).map_err(|e| e.to_string())? {
        for start in 0..=period {
            match scalar_shift(p, &src, th_new, start) {
                Some(pts) => pts.into_iter().for_each(|(k, z, j)| oracle[k].push((z, j))),
                None => infeasible += 1,
            }
        }
    }
    for k in 0..=period {
        for (z, _) in &oracle[k] {
            let best = oracle[k].iter().filter(|(y, _)| (y - z).abs() <= tol).map(|(_, j)| *j).fold(f64::INFINITY, f64::min);
            let q = query_q(&built.safe_set, k, &s(*z)).ok_or_else(|| format!("level {k}: state {z} missing"))?;
            if (q.cost - best).abs() > 1e-9 * best.max(1.0) {
                return Err(format!("level {k}: Q {} vs enumerated {best}", q.cost));
            }
        }
        for e in built.safe_set.level(k) {
            if !oracle[k].iter().any(|(y, _)| (y - e.state[0]).abs() <= tol) {
                return Err(format!("level {k}: unexpected entry {}", e.state[0]));
            }
        }
    }
    Ok(infeasible)
}

fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    uniform_in(rng, lo, hi)
}

pub fn random_point(rng: &mut ChaCha8Rng, z: &Zonotope) -> Vector {
    let lambda: Vec<f64> = (0..z.num_generators()).map(|_| draw(rng, -1.0, 1.0)).collect();
    z.point(&lambda)
}

/// Exact membership in a full-dimensional zonotope through its facet normals.
pub fn contains(z: &Zonotope, normals: &[Vector], x: &Vector, tol: f64) -> bool {
    normals.iter().all(|eta| eta.dot(x) <= z.support(eta) + tol && -eta.dot(x) <= z.support(eta) + tol)
}

/// Samples tightened-feasible nominal points `(z, v)` with `e` in the tube and
/// returns the largest original-constraint row value of `(z + e, v + K e)`.
pub fn tightening_soundness(
    original: &PolytopicConstraintSchedule,
    gains: &FeedbackGainSchedule,
    rpi: &RpiSet,
    residual: &[Interval],
    phis: &[Matrix],
    c: &[Matrix],
    range: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    let tight = tighten_constraints(original, gains, rpi).unwrap();
    let (n, m) = (original.state_dim(), original.input_dim());
    let period = original.period();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0;
    let mut worst = f64::NEG_INFINITY;
    while accepted < samples {
        let t = draw(&mut rng, 0.0, period as f64 + 0.999) as usize;
        let z = Vector::from_fn(n, |_, _| draw(&mut rng, -range, range));
        let u = Vector::from_fn(m, |_, _| draw(&mut rng, -range, range));
        if !tight.schedule.check(t, &z, &u, 0.0).unwrap().satisfied {
            continue;
        }
        accepted += 1;
        let e = random_point(&mut rng, rpi.phase(t));
        let chk = original.check(t, &(&z + &e), &(&u + gains.gain(t) * &e), 0.0).unwrap();
        worst = worst.max(chk.worst);
        if t < period {
            let w = Vector::from_fn(residual.len(), |i, _| draw(&mut rng, residual[i].lower, residual[i].upper));
            let e_next = &phis[t] * &e + &c[t] * &w;
            for eta in [Vector::from_element(n, 1.0), Vector::from_element(n, -1.0)] {
                assert!(eta.dot(&e_next) <= rpi.support(t + 1, &eta) + 1e-9);
            }
        }
    }
    worst
}

/// Propagates sampled tube points one step and counts images leaving the
/// next phase's set.
pub fn point_invariance_failures(rpi: &RpiSet, phis: &[Matrix], c: &[Matrix], residual: &[Interval], samples: usize, seed: u64) -> usize {
    let period = phis.len() - 1;
    let normals: Vec<Vec<Vector>> = rpi.phases().iter().map(|z| z.facet_normals(None)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for i in 0..samples {
        let t = i % period;
        let e = random_point(&mut rng, rpi.phase(t));
        let w = Vector::from_fn(residual.len(), |j, _| draw(&mut rng, residual[j].lower, residual[j].upper));
        let next = &phis[t] * &e + &c[t] * &w;
        let p = (t + 1) % rpi.phase_count;
        if !contains(rpi.phase(p), &normals[p], &next, 1e-10) {
            failures += 1;
        }
    }
    failures
}

/// Checks `h(Phi' eta) + h_{CW}(eta) <= h(eta)` in sampled directions, which
/// is set containment when it holds for all directions. Time-invariant loops.
pub fn support_invariance_failures(rpi: &RpiSet, phi: &Matrix, c: &Matrix, residual: &[Interval], samples: usize, seed: u64) -> usize {
    let n = phi.nrows();
    let half: Vec<f64> = residual.iter().map(|i| i.half_width_symmetric()).collect();
    let eps = rpi.phase(0);
    let mapped = eps.transformed(phi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..samples {
        let eta = Vector::from_fn(n, |_, _| draw(&mut rng, -1.0, 1.0));
        let hw: f64 = (0..c.ncols()).map(|j| c.column(j).dot(&eta).abs() * half[j]).sum();
        let rhs = eps.support(&eta);
        if mapped.support(&eta) + hw > rhs * (1.0 + 1e-9) + 1e-12 {
            failures += 1;
        }
    }
    failures
}
