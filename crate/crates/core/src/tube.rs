//! Tube machinery: periodic LQR feedback, an outer approximation of the
//! robust positive invariant error set, and right-hand-side tightening.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::disturbance::Interval;
use crate::error::{check_len, Error, Result};
use crate::linalg::{serde_matrices, serde_matrix, spectral_radius, Matrix, Vector};
use crate::model::{PeriodicLtvModel, PolytopicConstraintSchedule};

pub const RICCATI_TOLERANCE: f64 = 1e-9;
pub const RICCATI_MAX_PERIODS: usize = 500;
pub const DEFAULT_ALPHA_TARGET: f64 = 0.05;
pub const DEFAULT_RPI_MAX_HORIZON: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackGainSchedule {
    #[serde(with = "serde_matrices")]
    gains: Vec<Matrix>,
    #[serde(with = "serde_matrix")]
    pub q_lqr: Matrix,
    #[serde(with = "serde_matrix")]
    pub r_lqr: Matrix,
    /// Riccati sweeps needed to converge.
    pub periods: usize,
}

impl FeedbackGainSchedule {
    /// Wraps user-provided gains for `t = 0..=T`.
    pub fn from_gains(gains: Vec<Matrix>, q_lqr: Matrix, r_lqr: Matrix) -> Self {
        Self { gains, q_lqr, r_lqr, periods: 0 }
    }
    pub fn gain(&self, t: usize) -> &Matrix {
        &self.gains[t]
    }
    pub fn gains(&self) -> &[Matrix] {
        &self.gains
    }
    /// `Phi_t = A_t + B_t K_t` for `t = 0..=T`.
    pub fn closed_loop(&self, model: &PeriodicLtvModel) -> Vec<Matrix> {
        (0..=model.period()).map(|t| model.a(t) + model.b(t) * &self.gains[t]).collect()
    }
}

/// Product `Phi_{T-1} ... Phi_0` over one period.
pub fn monodromy(phis: &[Matrix], period: usize) -> Matrix {
    crate::linalg::ordered_product(&phis[..period], 0, period)
}

pub fn monodromy_radius(model: &PeriodicLtvModel, gains: &FeedbackGainSchedule) -> f64 {
    spectral_radius(&monodromy(&gains.closed_loop(model), model.period()))
}

fn riccati_step(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p_next: &Matrix) -> Option<(Matrix, Matrix)> {
    let pb = p_next * b;
    let s = r + b.transpose() * &pb;
    let chol = s.cholesky()?;
    let k = -chol.solve(&(pb.transpose() * a));
    let acl = a + b * &k;
    let p = q + k.transpose() * r * &k + acl.transpose() * p_next * &acl;
    Some(((&p + p.transpose()) * 0.5, k))
}

/// Periodic LQR gains from a backward Riccati recursion repeated until the
/// value matrix stops changing over a full period.
pub fn lqr_gains(model: &PeriodicLtvModel, q: &Matrix, r: &Matrix) -> Result<FeedbackGainSchedule> {
    let (n, m, period) = (model.state_dim(), model.input_dim(), model.period());
    check_len("Q_lqr rows", n, q.nrows())?;
    check_len("Q_lqr cols", n, q.ncols())?;
    check_len("R_lqr rows", m, r.nrows())?;
    check_len("R_lqr cols", m, r.ncols())?;
    let q = (q + q.transpose()) * 0.5;
    let r = (r + r.transpose()) * 0.5;
    if r.clone().cholesky().is_none() {
        return Err(Error::InvalidArgument("R_lqr must be positive definite".into()));
    }
    let bad = || Error::NotStabilizable { periods: RICCATI_MAX_PERIODS };
    let mut p0 = q.clone();
    let mut values = alloc::vec![Matrix::zeros(n, n); period + 1];
    let mut gains = alloc::vec![Matrix::zeros(m, n); period + 1];
    for sweep in 1..=RICCATI_MAX_PERIODS {
        let mut p = p0.clone();
        values[period] = p0.clone();
        for t in (0..period).rev() {
            let (pt, kt) = riccati_step(model.a(t), model.b(t), &q, &r, &p).ok_or_else(bad)?;
            gains[t] = kt;
            values[t] = pt.clone();
            p = pt;
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(bad());
        }
        let change = (&p - &p0).amax();
        p0 = p;
        if change < RICCATI_TOLERANCE {
            // K_T shares phase 0 but uses the terminal matrices A_T, B_T.
            gains[period] = riccati_step(model.a(period), model.b(period), &q, &r, &values[1]).ok_or_else(bad)?.1;
            let sched = FeedbackGainSchedule { gains, q_lqr: q, r_lqr: r, periods: sweep };
            let rho = monodromy_radius(model, &sched);
            if !(rho < 1.0) {
                return Err(Error::GainsNotStabilizing { spectral_radius: rho });
            }
            return Ok(sched);
        }
    }
    Err(bad())
}

/// Centrally symmetric zonotope `{G lambda : |lambda|_inf <= 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zonotope {
    #[serde(with = "serde_matrix")]
    generators: Matrix,
}

impl Zonotope {
    pub fn new(generators: Matrix) -> Self {
        Self { generators }
    }
    pub fn zero(n: usize) -> Self {
        Self { generators: Matrix::zeros(n, 0) }
    }
    pub fn dim(&self) -> usize {
        self.generators.nrows()
    }
    pub fn generators(&self) -> &Matrix {
        &self.generators
    }
    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }
    pub fn scaled(&self, f: f64) -> Self {
        Self { generators: &self.generators * f }
    }
    pub fn transformed(&self, m: &Matrix) -> Self {
        Self { generators: m * &self.generators }
    }
    /// `h(eta) = sum_l |eta' g_l|`.
    pub fn support(&self, eta: &Vector) -> f64 {
        (0..self.generators.ncols()).map(|l| self.generators.column(l).dot(eta).abs()).sum()
    }
    /// Point `G lambda`.
    pub fn point(&self, lambda: &[f64]) -> Vector {
        &self.generators * Vector::from_column_slice(lambda)
    }
    /// Unit normals of the facets built from `(n-1)`-subsets of `gens`
    /// (all generators when `None`), one per direction up to sign.
    pub fn facet_normals(&self, limit: Option<usize>) -> Vec<Vector> {
        let n = self.dim();
        let g = match limit {
            Some(k) if k < self.num_generators() => self.generators.columns(0, k).into_owned(),
            _ => self.generators.clone(),
        };
        facet_normals(&g, n)
    }
}

fn facet_normals(g: &Matrix, n: usize) -> Vec<Vector> {
    if n == 1 {
        return alloc::vec![Vector::from_element(1, 1.0)];
    }
    let cols = g.ncols();
    let mut out: Vec<Vector> = Vec::new();
    let k = n - 1;
    if cols < k {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let sub = Matrix::from_fn(n, k, |i, j| g[(i, idx[j])]);
        let mut normal = Vector::zeros(n);
        for i in 0..n {
            let minor = sub.clone().remove_row(i);
            let det = minor.determinant();
            normal[i] = if i % 2 == 0 { det } else { -det };
        }
        let norm = normal.norm_squared();
        if norm > 0.0 {
            let normal = normal / libm::sqrt(norm);
            let scale = sub.amax().max(1e-300);
            let duplicate = out.iter().any(|o| (o.dot(&normal).abs() - 1.0).abs() < 1e-12);
            if libm::sqrt(norm) > 1e-12 * libm::pow(scale, k as f64) && !duplicate {
                out.push(normal);
            }
        }
        // Next combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < cols - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Outer approximation of the minimal RPI set, one zonotope per phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpiSet {
    /// Contraction factor reached by the horizon.
    pub alpha: f64,
    /// Number of Minkowski summands.
    pub horizon: usize,
    /// Phases stored (1 for time-invariant loops, `T` otherwise).
    pub phase_count: usize,
    /// Generators already scaled by `1/(1 - alpha)`.
    phases: Vec<Zonotope>,
}

impl RpiSet {
    pub fn zero(n: usize) -> Self {
        Self { alpha: 0.0, horizon: 0, phase_count: 1, phases: alloc::vec![Zonotope::zero(n)] }
    }
    pub fn phase(&self, t: usize) -> &Zonotope {
        &self.phases[t % self.phase_count]
    }
    pub fn phases(&self) -> &[Zonotope] {
        &self.phases
    }
    pub fn support(&self, t: usize, eta: &Vector) -> f64 {
        self.phase(t).support(eta)
    }
    /// Support of the union over phases.
    pub fn worst_support(&self, eta: &Vector) -> f64 {
        self.phases.iter().map(|z| z.support(eta)).fold(0.0, f64::max)
    }
    pub fn is_zero(&self) -> bool {
        self.phases.iter().all(|z| z.num_generators() == 0)
    }
}

fn modp(t: isize, p: usize) -> usize {
    t.rem_euclid(p as isize) as usize
}

/// Largest `h_{Psi W}(eta) / h_W(eta)` over the facets of `W`.
fn containment_factor(w: &Zonotope, normals: &[Vector], psi: &Matrix) -> f64 {
    let img = w.transformed(psi);
    normals
        .iter()
        .map(|eta| {
            let h = w.support(eta);
            if h > 0.0 {
                img.support(eta) / h
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// Generators of `C_t diag(r)`, padded to full dimension when degenerate.
fn residual_generators(c: &Matrix, half: &[f64]) -> Option<Zonotope> {
    let n = c.nrows();
    let cols: Vec<Vector> = (0..c.ncols())
        .filter(|&j| half[j] > 0.0)
        .map(|j| c.column(j) * half[j])
        .filter(|v| v.amax() > 0.0)
        .collect();
    if cols.is_empty() {
        return None;
    }
    let mut g = Matrix::from_columns(&cols);
    let rank = g.clone().svd(false, false).rank(1e-12 * g.amax());
    if rank < n {
        // A thin box around the image keeps the facet test well defined
        // and only enlarges the set.
        let pad = 1e-6 * g.amax();
        let extra = Matrix::identity(n, n) * pad;
        let mut wide = Matrix::zeros(n, g.ncols() + n);
        wide.columns_mut(0, g.ncols()).copy_from(&g);
        wide.columns_mut(g.ncols(), n).copy_from(&extra);
        g = wide;
    }
    Some(Zonotope::new(g))
}

/// Outer RPI approximation for `e_{t+1} = Phi_t e_t + C_t w_r`.
///
/// Finds the smallest horizon `L` (a multiple of the closed-loop period)
/// with `Psi_p (C_{p-1} W) ⊆ alpha (C_{p-1} W)` at every phase `p`, where
/// `Psi_p` is the `L`-step transition ending at `p`, and returns
/// `eps_t = 1/(1-alpha) * sum_{k=1..L} Phi(t, t-k+1) C_{t-k} W`.
/// Asymmetric residual intervals are replaced by their symmetric hull.
pub fn rpi_outer_approx(
    phis: &[Matrix],
    cs: &[Matrix],
    residual: &[Interval],
    alpha_target: f64,
    max_horizon: usize,
) -> Result<RpiSet> {
    if !(alpha_target > 0.0 && alpha_target < 1.0) {
        return Err(Error::InvalidArgument("alpha_target must lie in (0, 1)".into()));
    }
    if phis.len() < 2 || cs.len() != phis.len() {
        return Err(Error::InvalidArgument("closed-loop and injection schedules must cover t = 0..=T".into()));
    }
    let period = phis.len() - 1;
    let n = phis[0].nrows();
    check_len("residual bounds", cs[0].ncols(), residual.len())?;
    let half: Vec<f64> = residual.iter().map(Interval::half_width_symmetric).collect();
    let lti = (1..period).all(|t| phis[t] == phis[0] && cs[t] == cs[0]);
    let pc = if lti { 1 } else { period };

    // W_p = C_{p-1} W for each phase p.
    let mut base: Vec<Option<Zonotope>> = Vec::with_capacity(pc);
    for p in 0..pc {
        base.push(residual_generators(&cs[modp(p as isize - 1, pc)], &half));
    }
    if base.iter().all(Option::is_none) {
        return Ok(RpiSet::zero(n));
    }
    let normals: Vec<Vec<Vector>> = base.iter().map(|w| w.as_ref().map_or(Vec::new(), |w| w.facet_normals(None))).collect();

    // Per-phase transition over one block of `pc` steps ending at phase p.
    let blocks: Vec<Matrix> = (0..pc)
        .map(|p| {
            let mut acc = Matrix::identity(n, n);
            for k in 1..=pc {
                acc = &acc * &phis[modp(p as isize - k as isize, pc)];
            }
            acc
        })
        .collect();
    let mut psi = blocks.clone();
    let mut horizon = pc;
    let alpha = loop {
        let alpha = (0..pc)
            .filter_map(|p| base[p].as_ref().map(|w| containment_factor(w, &normals[p], &psi[p])))
            .fold(0.0, f64::max);
        if alpha <= alpha_target {
            break alpha;
        }
        if horizon + pc > max_horizon {
            return Err(Error::RpiHorizonExceeded { cap: max_horizon, alpha });
        }
        horizon += pc;
        for p in 0..pc {
            psi[p] = &psi[p] * &blocks[p];
        }
    };

    let inflate = 1.0 / (1.0 - alpha);
    let mut phases = Vec::with_capacity(pc);
    for t in 0..pc {
        let mut cols: Vec<Vector> = Vec::new();
        let mut trans = Matrix::identity(n, n);
        for k in 1..=horizon {
            let src = modp(t as isize - k as isize + 1, pc);
            if let Some(w) = &base[src] {
                let img = &trans * w.generators();
                for j in 0..img.ncols() {
                    cols.push(img.column(j) * inflate);
                }
            }
            trans = &trans * &phis[modp(t as isize - k as isize, pc)];
        }
        phases.push(Zonotope::new(if cols.is_empty() { Matrix::zeros(n, 0) } else { Matrix::from_columns(&cols) }));
    }
    Ok(RpiSet { alpha, horizon, phase_count: pc, phases })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightenedConstraintSchedule {
    pub schedule: PolytopicConstraintSchedule,
    /// `f_t - fbar_t` per step.
    pub reductions: Vec<Vec<f64>>,
}

/// `h_{eps_t}((F_t + G_t K_t)_i)` for every row and step.
pub fn tightening_reductions(schedule: &PolytopicConstraintSchedule, gains: &FeedbackGainSchedule, rpi: &RpiSet) -> Result<Vec<Vec<f64>>> {
    check_len("gain schedule length", schedule.period() + 1, gains.gains().len())?;
    Ok((0..=schedule.period())
        .map(|t| {
            let set = schedule.at(t);
            let dirs = &set.f + &set.g * gains.gain(t);
            (0..set.rows()).map(|i| rpi.support(t, &dirs.row(i).transpose())).collect()
        })
        .collect())
}

/// `fbar_t[i] = f_t[i] - h_{eps_t}((F_t + G_t K_t)_i)`.
pub fn tighten_constraints(
    schedule: &PolytopicConstraintSchedule,
    gains: &FeedbackGainSchedule,
    rpi: &RpiSet,
) -> Result<TightenedConstraintSchedule> {
    let reductions = tightening_reductions(schedule, gains, rpi)?;
    let rhs = (0..=schedule.period())
        .map(|t| {
            let set = schedule.at(t);
            Vector::from_iterator(set.rows(), (0..set.rows()).map(|i| set.rhs[i] - reductions[t][i]))
        })
        .collect();
    let tightened = schedule.with_rhs(rhs)?;
    let mut empty = Vec::new();
    for t in 0..=tightened.period() {
        if !crate::qp::polytope_nonempty(tightened.at(t))? {
            empty.push(t);
        }
    }
    if !empty.is_empty() {
        return Err(Error::InfeasibleTightening { steps: empty });
    }
    Ok(TightenedConstraintSchedule { schedule: tightened, reductions })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeDesign {
    #[serde(with = "serde_matrix")]
    pub q_lqr: Matrix,
    #[serde(with = "serde_matrix")]
    pub r_lqr: Matrix,
    pub alpha_target: f64,
    pub max_horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeArtifacts {
    pub gains: FeedbackGainSchedule,
    pub monodromy_radius: f64,
    pub rpi: RpiSet,
    pub tightened: TightenedConstraintSchedule,
}

/// Gains, RPI set and tightened constraints in one pass.
pub fn build_tube(
    model: &PeriodicLtvModel,
    schedule: &PolytopicConstraintSchedule,
    residual: &[Interval],
    design: &TubeDesign,
) -> Result<TubeArtifacts> {
    let gains = lqr_gains(model, &design.q_lqr, &design.r_lqr)?;
    let phis = gains.closed_loop(model);
    let rpi = rpi_outer_approx(&phis, model.c_schedule(), residual, design.alpha_target, design.max_horizon)?;
    let tightened = tighten_constraints(schedule, &gains, &rpi)?;
    Ok(TubeArtifacts { monodromy_radius: monodromy_radius(model, &gains), gains, rpi, tightened })
}
