//! Condensed finite-horizon QP: inputs (and L1 auxiliaries) are the only
//! variables; states are affine in the inputs.

use alloc::vec::Vec;

use crate::error::{check_len, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::PolytopicConstraintSchedule;
use crate::problem::{IterationDynamics, NominalProblem};
use crate::qp::QpProblem;

pub(crate) struct HorizonSpec<'a> {
    pub problem: &'a NominalProblem<'a>,
    pub dynamics: &'a IterationDynamics<'a>,
    /// `C_k w_theta(k)` for `k = 0..=T`.
    pub injected: &'a [Vector],
    /// Constraint schedule to impose (usually `problem.constraints`).
    pub constraints: &'a PolytopicConstraintSchedule,
    pub start: usize,
    pub stages: usize,
    pub z0: &'a Vector,
    pub terminal: bool,
}

pub(crate) struct CondensedHorizon {
    pub qp: QpProblem,
    pub constant: f64,
    /// Free response at the terminal step, `a_{start+stages}`.
    pub free_terminal: Vector,
    pub input_dim: usize,
    pub stages: usize,
    /// Per-variable width of the feasible range, when every variable is boxed.
    pub ranges: Option<Vector>,
    /// Largest magnitude any variable can take, when boxed.
    pub magnitude: Option<Vector>,
    /// A row with no decision variables is violated.
    pub trivially_infeasible: bool,
}

impl CondensedHorizon {
    pub fn build(spec: &HorizonSpec<'_>) -> Result<Self> {
        let p = spec.problem;
        let model = p.model;
        let (n, m) = (model.state_dim(), model.input_dim());
        let h = spec.stages;
        check_len("initial nominal state", n, spec.z0.len())?;
        let nv_in = h * m;

        // Auxiliary variables for priced inputs.
        let mut aux: Vec<(usize, usize, f64)> = Vec::new();
        for s in 0..h {
            let c = p.costs.at(spec.start + s);
            for j in 0..m {
                if c.input_price[j] != 0.0 {
                    aux.push((s, j, c.input_price[j].abs()));
                }
            }
        }
        let nv = nv_in + aux.len();

        let mut cost = Matrix::zeros(nv, nv);
        let mut lin = Vector::zeros(nv);
        let mut constant = 0.0;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        let mut trivially_infeasible = false;

        let mut a = spec.z0.clone();
        let mut gamma = Matrix::zeros(n, nv_in);
        for s in 0..h {
            let k = spec.start + s;
            let c = p.costs.at(k);
            for i in 0..n {
                let w = c.state_weight[i];
                if w == 0.0 {
                    continue;
                }
                let off = a[i] - c.state_target[i];
                let g = gamma.row(i);
                for r in 0..nv_in {
                    if g[r] == 0.0 {
                        continue;
                    }
                    lin[r] += 2.0 * w * off * g[r];
                    for q in 0..nv_in {
                        cost[(r, q)] += 2.0 * w * g[r] * g[q];
                    }
                }
                constant += w * off * off;
            }
            for j in 0..m {
                cost[(s * m + j, s * m + j)] += 2.0 * c.input_weight[j];
            }

            let set = spec.constraints.at(k);
            let fg = &set.f * &gamma;
            for r in 0..set.rows() {
                let mut row = alloc::vec![0.0; nv];
                row[..nv_in].copy_from_slice(fg.row(r).transpose().as_slice());
                for j in 0..m {
                    row[s * m + j] += set.g[(r, j)];
                }
                let b = set.rhs[r] - set.f.row(r).dot(&a.transpose());
                if row.iter().all(|v| *v == 0.0) {
                    if b < -p.margin {
                        trivially_infeasible = true;
                    }
                    continue;
                }
                rows.push(row);
                rhs.push(b);
            }

            if s + 1 < h || spec.terminal {
                a = &spec.dynamics.a[k] * &a + &spec.injected[k];
                gamma = &spec.dynamics.a[k] * &gamma;
                let bk = &spec.dynamics.b[k];
                for j in 0..m {
                    for i in 0..n {
                        gamma[(i, s * m + j)] += bk[(i, j)];
                    }
                }
            }
        }
        for (idx, &(s, j, price)) in aux.iter().enumerate() {
            let col = nv_in + idx;
            lin[col] = 1.0;
            for sign in [1.0, -1.0] {
                let mut row = alloc::vec![0.0; nv];
                row[s * m + j] = sign * price;
                row[col] = -1.0;
                rows.push(row);
                rhs.push(0.0);
            }
        }

        let ineq = Matrix::from_fn(rows.len(), nv, |i, j| rows[i][j]);
        let ineq_rhs = Vector::from_vec(rhs);
        let (eq, eq_rhs) = if spec.terminal {
            let mut e = Matrix::zeros(n, nv);
            e.columns_mut(0, nv_in).copy_from(&gamma);
            (e, Vector::zeros(n))
        } else {
            (Matrix::zeros(0, nv), Vector::zeros(0))
        };

        // Box bounds implied by single-variable rows.
        let mut lo = alloc::vec![f64::NEG_INFINITY; nv];
        let mut hi = alloc::vec![f64::INFINITY; nv];
        for i in 0..ineq.nrows() {
            let nz: Vec<usize> = (0..nv).filter(|&j| ineq[(i, j)] != 0.0).collect();
            if nz.len() == 1 {
                let j = nz[0];
                let c = ineq[(i, j)];
                if c > 0.0 {
                    hi[j] = hi[j].min(ineq_rhs[i] / c);
                } else {
                    lo[j] = lo[j].max(ineq_rhs[i] / c);
                }
            }
        }
        for (idx, &(s, j, price)) in aux.iter().enumerate() {
            let v = s * m + j;
            let mag = lo[v].abs().max(hi[v].abs()) * price;
            lo[nv_in + idx] = 0.0;
            hi[nv_in + idx] = mag;
        }
        let boxed = lo.iter().zip(&hi).all(|(l, h)| l.is_finite() && h.is_finite());
        let ranges = boxed.then(|| Vector::from_iterator(nv, lo.iter().zip(&hi).map(|(l, h)| (h - l).abs())));
        let magnitude = boxed.then(|| Vector::from_iterator(nv, lo.iter().zip(&hi).map(|(l, h)| l.abs().max(h.abs()))));

        let qp = QpProblem::new(cost, lin, ineq, ineq_rhs, eq, eq_rhs)?;
        Ok(Self { qp, constant, free_terminal: a, input_dim: m, stages: h, ranges, magnitude, trivially_infeasible })
    }

    /// Input blocks of a solution vector.
    pub fn inputs(&self, x: &Vector) -> Vec<Vector> {
        (0..self.stages).map(|s| x.rows(s * self.input_dim, self.input_dim).into_owned()).collect()
    }

    /// Same problem without the terminal equality.
    pub fn relaxed(&self) -> QpProblem {
        let nv = self.qp.num_vars();
        QpProblem {
            cost: self.qp.cost.clone(),
            linear: self.qp.linear.clone(),
            ineq: self.qp.ineq.clone(),
            ineq_rhs: self.qp.ineq_rhs.clone(),
            eq: Matrix::zeros(0, nv),
            eq_rhs: Vector::zeros(0),
        }
    }
}
