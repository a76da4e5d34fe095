//! Dense convex QP solver.
//!
//! Solves `min 1/2 x'Px + q'x  s.t.  A x <= b,  E x = e` with a homogeneous
//! self-dual interior-point method (Mehrotra predictor-corrector). The
//! embedding yields primal or dual infeasibility certificates instead of
//! diverging, which the LMPC candidate search relies on.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{inf_norm, Matrix, Vector};
use crate::model::ConstraintSet;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub cost: Matrix,
    pub linear: Vector,
    pub ineq: Matrix,
    pub ineq_rhs: Vector,
    pub eq: Matrix,
    pub eq_rhs: Vector,
}

impl QpProblem {
    /// Validates shapes and symmetrizes the cost matrix.
    pub fn new(cost: Matrix, linear: Vector, ineq: Matrix, ineq_rhs: Vector, eq: Matrix, eq_rhs: Vector) -> Result<Self> {
        let n = linear.len();
        check_len("cost rows", n, cost.nrows())?;
        check_len("cost cols", n, cost.ncols())?;
        check_len("inequality cols", n, ineq.ncols())?;
        check_len("inequality rhs", ineq.nrows(), ineq_rhs.len())?;
        check_len("equality cols", n, eq.ncols())?;
        check_len("equality rhs", eq.nrows(), eq_rhs.len())?;
        let finite = cost.iter().chain(linear.iter()).chain(ineq.iter()).chain(eq.iter()).chain(eq_rhs.iter()).all(|v| v.is_finite())
            && ineq_rhs.iter().all(|v| !v.is_nan());
        if !finite {
            return Err(Error::InvalidArgument("QP data must be finite".into()));
        }
        let cost = (&cost + cost.transpose()) * 0.5;
        Ok(Self { cost, linear, ineq, ineq_rhs, eq, eq_rhs })
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.cost * x)) + self.linear.dot(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpSettings {
    pub max_iterations: usize,
    /// Relative primal and dual residual tolerance.
    pub feasibility_tol: f64,
    /// Absolute and relative duality gap tolerances.
    pub gap_abs_tol: f64,
    pub gap_rel_tol: f64,
    /// Certificate tolerance for infeasibility detection.
    pub infeasibility_tol: f64,
    pub step_fraction: f64,
    pub regularization: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            feasibility_tol: 1e-10,
            gap_abs_tol: 1e-10,
            gap_rel_tol: 1e-10,
            infeasibility_tol: 1e-9,
            step_fraction: 0.99,
            regularization: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    /// Residuals reached 1e3 times the requested tolerances only.
    ReducedAccuracy,
    PrimalInfeasible,
    DualInfeasible,
    NumericFailure,
}

impl QpStatus {
    pub fn is_optimal(self) -> bool {
        matches!(self, QpStatus::Optimal | QpStatus::ReducedAccuracy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: Vector,
    /// Inequality multipliers (nonnegative).
    pub z: Vector,
    /// Equality multipliers.
    pub y: Vector,
    pub objective: f64,
    pub dual_objective: f64,
    /// `P x + q + A'z + E'y` at the returned point.
    pub dual_residual: Vector,
    pub iterations: usize,
}

/// Row of `A` stored by its nonzeros, used to assemble `A' D A` cheaply.
#[derive(Debug, Clone)]
struct SparseRow(Vec<(usize, f64)>);

pub struct QpSolver<'a> {
    problem: &'a QpProblem,
    settings: QpSettings,
    rows: Vec<SparseRow>,
}

struct Kkt {
    m_chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    minv_et: Matrix,
    s_chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    d: Vector,
}

struct Iterate {
    x: Vector,
    z: Vector,
    y: Vector,
    s: Vector,
    tau: f64,
    kappa: f64,
}

struct Direction {
    x: Vector,
    z: Vector,
    y: Vector,
    s: Vector,
    tau: f64,
    kappa: f64,
}

pub fn solve_qp(problem: &QpProblem, settings: &QpSettings) -> QpSolution {
    QpSolver::new(problem, *settings).solve(None)
}

impl<'a> QpSolver<'a> {
    pub fn new(problem: &'a QpProblem, settings: QpSettings) -> Self {
        let rows = (0..problem.ineq.nrows())
            .map(|i| {
                SparseRow(
                    (0..problem.ineq.ncols())
                        .filter_map(|j| {
                            let v = problem.ineq[(i, j)];
                            (v != 0.0).then_some((j, v))
                        })
                        .collect(),
                )
            })
            .collect();
        Self { problem, settings, rows }
    }

    pub fn problem(&self) -> &QpProblem {
        self.problem
    }

    fn a_mul(&self, x: &Vector) -> Vector {
        Vector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.0.iter().map(|&(j, v)| v * x[j]).sum()))
    }

    fn at_mul(&self, z: &Vector) -> Vector {
        let mut out = Vector::zeros(self.problem.num_vars());
        for (i, r) in self.rows.iter().enumerate() {
            let zi = z[i];
            if zi != 0.0 {
                for &(j, v) in &r.0 {
                    out[j] += v * zi;
                }
            }
        }
        out
    }

    fn factor(&self, d: &Vector) -> Option<Kkt> {
        let p = self.problem;
        let n = p.num_vars();
        let mut reg = self.settings.regularization;
        for _ in 0..8 {
            let pscale = (0..n).fold(1.0f64, |acc, i| acc.max(p.cost[(i, i)].abs()));
            let mut m = p.cost.clone();
            for (i, r) in self.rows.iter().enumerate() {
                let w = 1.0 / d[i];
                for &(j, vj) in &r.0 {
                    for &(k, vk) in &r.0 {
                        m[(j, k)] += w * vj * vk;
                    }
                }
            }
            for i in 0..n {
                m[(i, i)] += reg * pscale;
            }
            let Some(m_chol) = m.cholesky() else {
                reg *= 100.0;
                continue;
            };
            if p.eq.nrows() == 0 {
                return Some(Kkt { m_chol, minv_et: Matrix::zeros(n, 0), s_chol: None, d: d.clone() });
            }
            let minv_et = m_chol.solve(&p.eq.transpose());
            let mut s = &p.eq * &minv_et;
            for i in 0..s.nrows() {
                s[(i, i)] += reg;
            }
            let Some(s_chol) = s.cholesky() else {
                reg *= 100.0;
                continue;
            };
            return Some(Kkt { m_chol, minv_et, s_chol: Some(s_chol), d: d.clone() });
        }
        None
    }

    /// Solves `[P E' A'; E 0 0; A 0 -D] [dx; dy; dz] = [r1; r2; r3]`.
    fn kkt_solve_once(&self, k: &Kkt, r1: &Vector, r2: &Vector, r3: &Vector) -> (Vector, Vector, Vector) {
        let dinv_r3 = r3.component_div(&k.d);
        let r1t = r1 + self.at_mul(&dinv_r3);
        let (dx, dy) = match &k.s_chol {
            None => (k.m_chol.solve(&r1t), Vector::zeros(0)),
            Some(sc) => {
                let minv_r1 = k.m_chol.solve(&r1t);
                let dy = sc.solve(&(&self.problem.eq * &minv_r1 - r2));
                let dx = minv_r1 - &k.minv_et * &dy;
                (dx, dy)
            }
        };
        let dz = (self.a_mul(&dx) - r3).component_div(&k.d);
        (dx, dy, dz)
    }

    fn kkt_solve(&self, k: &Kkt, r1: &Vector, r2: &Vector, r3: &Vector) -> (Vector, Vector, Vector) {
        let p = self.problem;
        let (mut dx, mut dy, mut dz) = self.kkt_solve_once(k, r1, r2, r3);
        let rhs_norm = inf_norm(r1).max(inf_norm(r2)).max(inf_norm(r3));
        for _ in 0..6 {
            let e1 = r1 - (&p.cost * &dx + p.eq.tr_mul(&dy) + self.at_mul(&dz));
            let e2 = r2 - &p.eq * &dx;
            let e3 = r3 - (self.a_mul(&dx) - dz.component_mul(&k.d));
            let err = inf_norm(&e1).max(inf_norm(&e2)).max(inf_norm(&e3));
            if err <= 1e-14 * (1.0 + rhs_norm) {
                break;
            }
            let (cx, cy, cz) = self.kkt_solve_once(k, &e1, &e2, &e3);
            dx += cx;
            dy += cy;
            dz += cz;
        }
        (dx, dy, dz)
    }

    /// Solves the problem, optionally replacing the equality right-hand side.
    pub fn solve(&self, eq_rhs: Option<&Vector>) -> QpSolution {
        let p = self.problem;
        let e_rhs = eq_rhs.unwrap_or(&p.eq_rhs);
        let (n, m, neq) = (p.num_vars(), p.ineq.nrows(), p.eq.nrows());
        let b = &p.ineq_rhs;
        let q = &p.linear;
        let st = &self.settings;

        let mut it = Iterate {
            x: Vector::zeros(n),
            z: Vector::from_element(m, 1.0),
            y: Vector::zeros(neq),
            s: Vector::from_element(m, 1.0),
            tau: 1.0,
            kappa: 1.0,
        };
        let b_norm = inf_norm(b);
        let e_norm = inf_norm(e_rhs);
        let q_norm = inf_norm(q);

        let mut last_good: Option<QpSolution> = None;
        for iter in 0..st.max_iterations {
            let px = &p.cost * &it.x;
            let ax = self.a_mul(&it.x);
            let ex = &p.eq * &it.x;
            let atz = self.at_mul(&it.z);
            let ety = p.eq.tr_mul(&it.y);
            let xpx = it.x.dot(&px);

            let r_x = &px + &atz + &ety + q * it.tau;
            let r_z = &ax + &it.s - b * it.tau;
            let r_y = &ex - e_rhs * it.tau;
            let r_tau = it.kappa + q.dot(&it.x) + b.dot(&it.z) + e_rhs.dot(&it.y) + xpx / it.tau;

            // Convergence of the de-homogenized point.
            let inv = 1.0 / it.tau;
            let xh = &it.x * inv;
            let pobj = 0.5 * xpx * inv * inv + q.dot(&xh);
            let dobj = -0.5 * xpx * inv * inv - (b.dot(&it.z) + e_rhs.dot(&it.y)) * inv;
            let pres = (inf_norm(&r_z).max(inf_norm(&r_y))) * inv;
            let pres_scale = 1.0 + b_norm.max(e_norm).max(inf_norm(&ax) * inv).max(inf_norm(&it.s) * inv).max(inf_norm(&ex) * inv);
            let dres = inf_norm(&r_x) * inv;
            let dres_scale = 1.0 + q_norm.max(inf_norm(&px) * inv).max(inf_norm(&atz) * inv).max(inf_norm(&ety) * inv);
            let gap = (pobj - dobj).abs();
            let gap_ok = |scale: f64| gap <= scale * (st.gap_abs_tol + st.gap_rel_tol * pobj.abs().min(dobj.abs()));
            let make_solution = |status: QpStatus| QpSolution {
                status,
                x: xh.clone(),
                z: &it.z * inv,
                y: &it.y * inv,
                objective: pobj,
                dual_objective: dobj,
                dual_residual: &r_x * inv,
                iterations: iter,
            };
            if pres <= st.feasibility_tol * pres_scale && dres <= st.feasibility_tol * dres_scale && gap_ok(1.0) {
                return make_solution(QpStatus::Optimal);
            }
            if pres <= 1e3 * st.feasibility_tol * pres_scale && dres <= 1e3 * st.feasibility_tol * dres_scale && gap_ok(1e3) {
                last_good = Some(make_solution(QpStatus::ReducedAccuracy));
            }

            // Infeasibility certificates on the homogeneous variables.
            let bz_ey = b.dot(&it.z) + e_rhs.dot(&it.y);
            if bz_ey < 0.0 {
                let cert = (&atz + &ety).abs().max();
                let zn = inf_norm(&it.z).max(inf_norm(&it.y));
                if cert <= st.infeasibility_tol * (-bz_ey).max(1e-300) && zn > 0.0 && it.tau < 1e-6 * zn.max(1.0) {
                    return self.certificate(QpStatus::PrimalInfeasible, &it, iter);
                }
            }
            let qx = q.dot(&it.x);
            if qx < 0.0 {
                let xn = inf_norm(&it.x);
                let bound = st.infeasibility_tol * (-qx);
                let ax_s = &ax + &it.s;
                if inf_norm(&px) <= bound && inf_norm(&ax_s) <= bound * 1e3 && inf_norm(&ex) <= bound * 1e3 && it.tau < 1e-6 * xn.max(1.0) {
                    return self.certificate(QpStatus::DualInfeasible, &it, iter);
                }
            }

            let d = it.s.component_div(&it.z);
            let Some(kkt) = self.factor(&d) else {
                break;
            };
            let mu = (it.s.dot(&it.z) + it.tau * it.kappa) / (m as f64 + 1.0);

            let (dx2, dy2, dz2) = self.kkt_solve(&kkt, &(-q), e_rhs, b);
            let w = &dx2 - &it.x * inv;
            let den = -it.kappa / it.tau - w.dot(&(&p.cost * &w)) - dz2.dot(&dz2.component_mul(&d));
            let c_x = q + &px * (2.0 * inv);

            let direction = |eta: f64, xi_s: &Vector, xi_k: f64| -> Direction {
                let r1 = -&r_x * eta;
                let r2 = -&r_y * eta;
                let r3 = -&r_z * eta + xi_s.component_div(&it.z);
                let (dx1, dy1, dz1) = self.kkt_solve(&kkt, &r1, &r2, &r3);
                let c_sol1 = c_x.dot(&dx1) + b.dot(&dz1) + e_rhs.dot(&dy1);
                let dtau = (-eta * r_tau + xi_k / it.tau - c_sol1) / den;
                let dx = dx1 + &dx2 * dtau;
                let dy = dy1 + &dy2 * dtau;
                let dz = dz1 + &dz2 * dtau;
                let ds = -(xi_s + it.s.component_mul(&dz)).component_div(&it.z);
                let dkappa = -(xi_k + it.kappa * dtau) / it.tau;
                Direction { x: dx, z: dz, y: dy, s: ds, tau: dtau, kappa: dkappa }
            };

            let xi_aff = it.s.component_mul(&it.z);
            let aff = direction(1.0, &xi_aff, it.tau * it.kappa);
            let alpha_aff = max_step(&it, &aff).min(1.0);
            let sigma = libm::pow(1.0 - alpha_aff, 3.0);
            let xi_cc = &xi_aff - Vector::from_element(m, sigma * mu) + aff.s.component_mul(&aff.z);
            let xi_k_cc = it.tau * it.kappa - sigma * mu + aff.tau * aff.kappa;
            let dir = direction(1.0 - sigma, &xi_cc, xi_k_cc);
            let alpha = (st.step_fraction * max_step(&it, &dir)).min(1.0);
            if !(alpha.is_finite()) || alpha < 1e-12 {
                break;
            }
            it.x += &dir.x * alpha;
            it.z += &dir.z * alpha;
            it.y += &dir.y * alpha;
            it.s += &dir.s * alpha;
            it.tau += dir.tau * alpha;
            it.kappa += dir.kappa * alpha;
            if !(it.tau.is_finite() && it.kappa.is_finite()) || it.x.iter().any(|v| !v.is_finite()) {
                break;
            }
            // Keep the homogeneous variables within a sane range.
            let scale = it.tau.max(it.kappa).max(inf_norm(&it.x)).max(inf_norm(&it.z)).max(inf_norm(&it.y));
            if scale > 1e12 {
                let f = 1.0 / scale;
                it.x *= f;
                it.z *= f;
                it.y *= f;
                it.s *= f;
                it.tau *= f;
                it.kappa *= f;
            }
        }
        last_good.unwrap_or_else(|| QpSolution {
            status: QpStatus::NumericFailure,
            x: &it.x / it.tau,
            z: &it.z / it.tau,
            y: &it.y / it.tau,
            objective: f64::NAN,
            dual_objective: f64::NAN,
            dual_residual: Vector::zeros(n),
            iterations: st.max_iterations,
        })
    }

    fn certificate(&self, status: QpStatus, it: &Iterate, iter: usize) -> QpSolution {
        let zn = inf_norm(&it.z).max(inf_norm(&it.y)).max(inf_norm(&it.x)).max(1e-300);
        QpSolution {
            status,
            x: &it.x / zn,
            z: &it.z / zn,
            y: &it.y / zn,
            objective: if status == QpStatus::PrimalInfeasible { f64::INFINITY } else { f64::NEG_INFINITY },
            dual_objective: f64::NAN,
            dual_residual: Vector::zeros(self.problem.num_vars()),
            iterations: iter,
        }
    }
}

fn max_step(it: &Iterate, d: &Direction) -> f64 {
    let mut a = f64::INFINITY;
    for (v, dv) in it.s.iter().zip(d.s.iter()).chain(it.z.iter().zip(d.z.iter())) {
        if *dv < 0.0 {
            a = a.min(-v / dv);
        }
    }
    if d.tau < 0.0 {
        a = a.min(-it.tau / d.tau);
    }
    if d.kappa < 0.0 {
        a = a.min(-it.kappa / d.kappa);
    }
    a
}

impl QpSolution {
    /// Error unless the solve reached an optimum.
    pub fn require_optimal(self, context: &str) -> Result<Self> {
        match self.status {
            QpStatus::Optimal | QpStatus::ReducedAccuracy => Ok(self),
            QpStatus::PrimalInfeasible | QpStatus::DualInfeasible => Err(Error::Infeasible(context.into())),
            QpStatus::NumericFailure => Err(Error::NumericFailure { context: context.into(), iterations: self.iterations }),
        }
    }
}

/// Whether `{(x, u) : F x + G u <= f}` is nonempty.
pub fn polytope_nonempty(set: &ConstraintSet) -> Result<bool> {
    let (n, m) = (set.f.ncols(), set.g.ncols());
    let nv = n + m;
    let mut a = Matrix::zeros(set.rows(), nv);
    a.columns_mut(0, n).copy_from(&set.f);
    a.columns_mut(n, m).copy_from(&set.g);
    if set.rhs.iter().any(|v| *v == f64::NEG_INFINITY) {
        return Ok(false);
    }
    // Infinite right-hand sides impose nothing.
    let keep: Vec<usize> = (0..set.rows()).filter(|&i| set.rhs[i].is_finite()).collect();
    let a = Matrix::from_fn(keep.len(), nv, |i, j| a[(keep[i], j)]);
    let b = Vector::from_iterator(keep.len(), keep.iter().map(|&i| set.rhs[i]));
    // A tiny proximal term keeps the problem bounded without changing feasibility.
    let problem = QpProblem::new(Matrix::identity(nv, nv) * 1e-6, Vector::zeros(nv), a, b, Matrix::zeros(0, nv), Vector::zeros(0))?;
    let sol = solve_qp(&problem, &QpSettings::default());
    match sol.status {
        QpStatus::Optimal | QpStatus::ReducedAccuracy => Ok(true),
        QpStatus::PrimalInfeasible => Ok(false),
        QpStatus::DualInfeasible | QpStatus::NumericFailure => Err(Error::NumericFailure {
            context: "constraint set feasibility check".into(),
            iterations: sol.iterations,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix_from_rows;
    use rand_chacha::rand_core::{RngCore, SeedableRng};

    fn vecf(v: &[f64]) -> Vector {
        Vector::from_column_slice(v)
    }

    #[test]
    fn square_above_one() {
        let p = QpProblem::new(
            matrix_from_rows(&[&[2.0]]),
            vecf(&[0.0]),
            matrix_from_rows(&[&[-1.0]]),
            vecf(&[-1.0]),
            Matrix::zeros(0, 1),
            Vector::zeros(0),
        )
        .unwrap();
        let s = solve_qp(&p, &QpSettings::default());
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-9);
        assert!((s.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn split_abs_value() {
        // u = p - q with u fixed to -2; min p + q.
        let p = QpProblem::new(
            Matrix::zeros(2, 2),
            vecf(&[1.0, 1.0]),
            matrix_from_rows(&[&[-1.0, 0.0], &[0.0, -1.0]]),
            vecf(&[0.0, 0.0]),
            matrix_from_rows(&[&[1.0, -1.0]]),
            vecf(&[-2.0]),
        )
        .unwrap();
        let s = solve_qp(&p, &QpSettings::default());
        assert!(s.status.is_optimal(), "{:?}", s.status);
        assert!((s.objective - 2.0).abs() < 1e-8);
    }

    #[test]
    fn detects_primal_infeasibility() {
        let p = QpProblem::new(
            matrix_from_rows(&[&[1.0]]),
            vecf(&[0.0]),
            matrix_from_rows(&[&[1.0], &[-1.0]]),
            vecf(&[1.0, -2.0]),
            Matrix::zeros(0, 1),
            Vector::zeros(0),
        )
        .unwrap();
        assert_eq!(solve_qp(&p, &QpSettings::default()).status, QpStatus::PrimalInfeasible);
        let q = QpProblem::new(
            matrix_from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]),
            vecf(&[0.0, 0.0]),
            matrix_from_rows(&[&[1.0, 0.0], &[-1.0, 0.0]]),
            vecf(&[1.0, 1.0]),
            matrix_from_rows(&[&[1.0, 0.0]]),
            vecf(&[3.0]),
        )
        .unwrap();
        assert_eq!(solve_qp(&q, &QpSettings::default()).status, QpStatus::PrimalInfeasible);
    }

    #[test]
    fn detects_unboundedness() {
        let p = QpProblem::new(
            Matrix::zeros(1, 1),
            vecf(&[1.0]),
            Matrix::zeros(0, 1),
            Vector::zeros(0),
            Matrix::zeros(0, 1),
            Vector::zeros(0),
        )
        .unwrap();
        assert_eq!(solve_qp(&p, &QpSettings::default()).status, QpStatus::DualInfeasible);
    }

    /// Projected gradient on a box; converges linearly for strongly convex P.
    fn projected_gradient(p: &Matrix, q: &Vector, lo: &Vector, hi: &Vector) -> Vector {
        let l = p.clone().symmetric_eigenvalues().max();
        let mut x = Vector::zeros(q.len());
        for _ in 0..200_000 {
            let g = p * &x + q;
            let nx = (&x - g / l).zip_zip_map(lo, hi, |v, a, b| v.clamp(a, b));
            if (&nx - &x).amax() < 1e-15 {
                return nx;
            }
            x = nx;
        }
        x
    }

    #[test]
    fn random_box_qps_match_projected_gradient() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut u = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
        for _ in 0..20 {
            let n = 6;
            let g = Matrix::from_fn(n, n, |_, _| u());
            let p = &g * g.transpose() + Matrix::identity(n, n) * 0.5;
            let q = Vector::from_fn(n, |_, _| 3.0 * u());
            let lo = Vector::from_fn(n, |_, _| -0.2 - u().abs());
            let hi = Vector::from_fn(n, |_, _| 0.2 + u().abs());
            let mut a = Matrix::zeros(2 * n, n);
            let mut b = Vector::zeros(2 * n);
            for i in 0..n {
                a[(2 * i, i)] = 1.0;
                b[2 * i] = hi[i];
                a[(2 * i + 1, i)] = -1.0;
                b[2 * i + 1] = -lo[i];
            }
            let prob = QpProblem::new(p.clone(), q.clone(), a, b, Matrix::zeros(0, n), Vector::zeros(0)).unwrap();
            let s = solve_qp(&prob, &QpSettings::default());
            assert_eq!(s.status, QpStatus::Optimal);
            let x_ref = projected_gradient(&p, &q, &lo, &hi);
            let f_ref = prob.objective(&x_ref);
            assert!((s.x.clone() - &x_ref).amax() < 1e-6, "{} vs {}", s.x, x_ref);
            assert!((s.objective - f_ref).abs() <= 1e-9 * (1.0 + f_ref.abs()));
        }
    }

    #[test]
    fn empty_and_nonempty_polytopes() {
        let ok = ConstraintSet::from_boxes(&[-1.0], &[1.0], &[-1.0], &[1.0]).unwrap();
        assert!(polytope_nonempty(&ok).unwrap());
        let bad = ConstraintSet::from_boxes(&[2.0], &[1.0], &[-1.0], &[1.0]).unwrap();
        assert!(!polytope_nonempty(&bad).unwrap());
    }
}
