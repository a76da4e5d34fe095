//! Periodic linear time-varying plant, polytopic constraints, stage costs and
//! rollouts.
//!
//! Every schedule is stored explicitly for `t = 0..=T`. Dynamics are applied
//! for `t = 0..T-1`; costs and constraints are evaluated for `t = 0..=T`.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::disturbance::ThetaSample;
use crate::error::{check_len, Error, Result};
use crate::linalg::{serde_matrices, serde_matrix, serde_vector, serde_vectors, Matrix, Vector};

/// Default absolute slack accepted by constraint checks.
pub const DEFAULT_CONSTRAINT_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicLtvModel {
    period: usize,
    #[serde(with = "serde_matrices")]
    a: Vec<Matrix>,
    #[serde(with = "serde_matrices")]
    b: Vec<Matrix>,
    #[serde(with = "serde_matrices")]
    c: Vec<Matrix>,
    #[serde(with = "serde_vector")]
    initial_state: Vector,
}

impl PeriodicLtvModel {
    pub fn new(a: Vec<Matrix>, b: Vec<Matrix>, c: Vec<Matrix>, initial_state: Vector) -> Result<Self> {
        if a.len() < 2 {
            return Err(Error::InvalidArgument("period must be at least 1 (need T+1 matrices)".into()));
        }
        let period = a.len() - 1;
        check_len("B schedule length", period + 1, b.len())?;
        check_len("C schedule length", period + 1, c.len())?;
        let n = a[0].nrows();
        let m = b[0].ncols();
        let d = c[0].ncols();
        if n == 0 || m == 0 || d == 0 {
            return Err(Error::InvalidArgument("state, input and disturbance dimensions must be positive".into()));
        }
        for t in 0..=period {
            check_len("A rows", n, a[t].nrows())?;
            check_len("A cols", n, a[t].ncols())?;
            check_len("B rows", n, b[t].nrows())?;
            check_len("B cols", m, b[t].ncols())?;
            check_len("C rows", n, c[t].nrows())?;
            check_len("C cols", d, c[t].ncols())?;
        }
        check_len("initial state", n, initial_state.len())?;
        let all_finite = a.iter().chain(&b).chain(&c).all(|mat| mat.iter().all(|x| x.is_finite()))
            && initial_state.iter().all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::InvalidArgument("model data must be finite".into()));
        }
        Ok(Self { period, a, b, c, initial_state })
    }

    /// Time-invariant model materialized over one period.
    pub fn time_invariant(period: usize, a: Matrix, b: Matrix, c: Matrix, initial_state: Vector) -> Result<Self> {
        let k = period + 1;
        Self::new(alloc::vec![a; k], alloc::vec![b; k], alloc::vec![c; k], initial_state)
    }

    pub fn period(&self) -> usize {
        self.period
    }
    pub fn state_dim(&self) -> usize {
        self.a[0].nrows()
    }
    pub fn input_dim(&self) -> usize {
        self.b[0].ncols()
    }
    pub fn disturbance_dim(&self) -> usize {
        self.c[0].ncols()
    }
    pub fn a(&self, t: usize) -> &Matrix {
        &self.a[t]
    }
    pub fn b(&self, t: usize) -> &Matrix {
        &self.b[t]
    }
    pub fn c(&self, t: usize) -> &Matrix {
        &self.c[t]
    }
    pub fn a_schedule(&self) -> &[Matrix] {
        &self.a
    }
    pub fn b_schedule(&self) -> &[Matrix] {
        &self.b
    }
    pub fn c_schedule(&self) -> &[Matrix] {
        &self.c
    }
    pub fn initial_state(&self) -> &Vector {
        &self.initial_state
    }

    /// True when every A, B, C entry is identical across the schedule.
    pub fn is_time_invariant(&self) -> bool {
        (1..=self.period).all(|t| self.a[t] == self.a[0] && self.b[t] == self.b[0] && self.c[t] == self.c[0])
    }

    pub fn with_initial_state(&self, x: Vector) -> Result<Self> {
        check_len("initial state", self.state_dim(), x.len())?;
        let mut out = self.clone();
        out.initial_state = x;
        Ok(out)
    }

    /// Model with `A_t + dA_t` and `B_t + dB_t`.
    pub fn with_deviation(&self, dev: &DynamicsDeviation) -> Result<Self> {
        check_len("deviation length", self.period + 1, dev.da.len())?;
        check_len("deviation length", self.period + 1, dev.db.len())?;
        let a = self.a.iter().zip(&dev.da).map(|(a, d)| a + d).collect();
        let b = self.b.iter().zip(&dev.db).map(|(b, d)| b + d).collect();
        Self::new(a, b, self.c.clone(), self.initial_state.clone())
    }

    fn check_time(&self, t: usize) -> Result<()> {
        if t > self.period {
            Err(Error::TimeIndex { t, period: self.period })
        } else {
            Ok(())
        }
    }

    /// `A_t x + B_t u + C_t w`.
    pub fn step(&self, t: usize, x: &Vector, u: &Vector, w: &Vector) -> Result<Vector> {
        self.check_time(t)?;
        check_len("state x", self.state_dim(), x.len())?;
        check_len("input u", self.input_dim(), u.len())?;
        check_len("disturbance w", self.disturbance_dim(), w.len())?;
        Ok(&self.a[t] * x + &self.b[t] * u + &self.c[t] * w)
    }
}

/// Additive perturbation of the dynamics matrices for one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsDeviation {
    #[serde(with = "serde_matrices")]
    pub da: Vec<Matrix>,
    #[serde(with = "serde_matrices")]
    pub db: Vec<Matrix>,
}

impl DynamicsDeviation {
    pub fn zero(model: &PeriodicLtvModel) -> Self {
        let (n, m) = (model.state_dim(), model.input_dim());
        let k = model.period() + 1;
        Self {
            da: alloc::vec![Matrix::zeros(n, n); k],
            db: alloc::vec![Matrix::zeros(n, m); k],
        }
    }
}

/// Rows `F x + G u <= f` active at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    #[serde(with = "serde_matrix")]
    pub f: Matrix,
    #[serde(with = "serde_matrix")]
    pub g: Matrix,
    #[serde(with = "serde_vector")]
    pub rhs: Vector,
}

impl ConstraintSet {
    pub fn new(f: Matrix, g: Matrix, rhs: Vector) -> Result<Self> {
        check_len("G rows", f.nrows(), g.nrows())?;
        check_len("rhs rows", f.nrows(), rhs.len())?;
        if rhs.iter().any(|x| x.is_nan()) || f.iter().chain(g.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("constraint data must be finite".into()));
        }
        Ok(Self { f, g, rhs })
    }

    /// Box constraints on states and inputs; infinite bounds produce no row.
    pub fn from_boxes(x_lo: &[f64], x_hi: &[f64], u_lo: &[f64], u_hi: &[f64]) -> Result<Self> {
        check_len("state bound", x_lo.len(), x_hi.len())?;
        check_len("input bound", u_lo.len(), u_hi.len())?;
        let (n, m) = (x_lo.len(), u_lo.len());
        let mut rows: Vec<(usize, f64, f64)> = Vec::new();
        for i in 0..n {
            if x_hi[i].is_finite() {
                rows.push((i, 1.0, x_hi[i]));
            }
            if x_lo[i].is_finite() {
                rows.push((i, -1.0, -x_lo[i]));
            }
        }
        for i in 0..m {
            if u_hi[i].is_finite() {
                rows.push((n + i, 1.0, u_hi[i]));
            }
            if u_lo[i].is_finite() {
                rows.push((n + i, -1.0, -u_lo[i]));
            }
        }
        let p = rows.len();
        let mut f = Matrix::zeros(p, n);
        let mut g = Matrix::zeros(p, m);
        let mut rhs = Vector::zeros(p);
        for (r, &(col, sign, bound)) in rows.iter().enumerate() {
            if col < n {
                f[(r, col)] = sign;
            } else {
                g[(r, col - n)] = sign;
            }
            rhs[r] = bound;
        }
        Self::new(f, g, rhs)
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    /// `F x + G u - f`.
    pub fn residual(&self, x: &Vector, u: &Vector) -> Vector {
        &self.f * x + &self.g * u - &self.rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub satisfied: bool,
    /// Largest entry of `F x + G u - f` (negative when strictly inside).
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopicConstraintSchedule {
    steps: Vec<ConstraintSet>,
}

impl PolytopicConstraintSchedule {
    /// Schedule over `t = 0..=T` with consistent state and input widths.
    pub fn new(steps: Vec<ConstraintSet>) -> Result<Self> {
        if steps.len() < 2 {
            return Err(Error::InvalidArgument("constraint schedule needs T+1 >= 2 entries".into()));
        }
        let (n, m) = (steps[0].f.ncols(), steps[0].g.ncols());
        for s in &steps {
            check_len("F cols", n, s.f.ncols())?;
            check_len("G cols", m, s.g.ncols())?;
        }
        Ok(Self { steps })
    }

    /// Builds the schedule and confirms every step admits some `(x, u)`.
    pub fn new_checked(steps: Vec<ConstraintSet>) -> Result<Self> {
        let s = Self::new(steps)?;
        for t in 0..s.steps.len() {
            if !crate::qp::polytope_nonempty(&s.steps[t])? {
                return Err(Error::EmptyConstraintSet { t });
            }
        }
        Ok(s)
    }

    pub fn period(&self) -> usize {
        self.steps.len() - 1
    }
    pub fn at(&self, t: usize) -> &ConstraintSet {
        &self.steps[t]
    }
    pub fn steps(&self) -> &[ConstraintSet] {
        &self.steps
    }
    pub fn state_dim(&self) -> usize {
        self.steps[0].f.ncols()
    }
    pub fn input_dim(&self) -> usize {
        self.steps[0].g.ncols()
    }

    pub fn check(&self, t: usize, x: &Vector, u: &Vector, margin: f64) -> Result<ConstraintCheck> {
        if t > self.period() {
            return Err(Error::TimeIndex { t, period: self.period() });
        }
        check_len("state x", self.state_dim(), x.len())?;
        check_len("input u", self.input_dim(), u.len())?;
        let worst = self.steps[t].residual(x, u).iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let worst = if self.steps[t].rows() == 0 { 0.0 } else { worst };
        Ok(ConstraintCheck { satisfied: worst <= margin, worst })
    }

    /// Same rows with a replacement right-hand side per step.
    pub fn with_rhs(&self, rhs: Vec<Vector>) -> Result<Self> {
        check_len("rhs schedule length", self.steps.len(), rhs.len())?;
        let steps = self
            .steps
            .iter()
            .zip(rhs)
            .map(|(s, r)| ConstraintSet::new(s.f.clone(), s.g.clone(), r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { steps })
    }
}

/// `sum_i wx_i (x_i - r_i)^2 + sum_j wu_j u_j^2 + sum_j |p_j u_j|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCost {
    #[serde(with = "serde_vector")]
    pub state_weight: Vector,
    #[serde(with = "serde_vector")]
    pub state_target: Vector,
    #[serde(with = "serde_vector")]
    pub input_weight: Vector,
    #[serde(with = "serde_vector")]
    pub input_price: Vector,
}

impl StageCost {
    pub fn new(state_weight: Vector, state_target: Vector, input_weight: Vector, input_price: Vector) -> Result<Self> {
        check_len("state target", state_weight.len(), state_target.len())?;
        check_len("input price", input_weight.len(), input_price.len())?;
        let weights_ok = state_weight.iter().chain(input_weight.iter()).all(|w| w.is_finite() && *w >= 0.0);
        let rest_ok = state_target.iter().chain(input_price.iter()).all(|v| v.is_finite());
        if !weights_ok || !rest_ok {
            return Err(Error::InvalidArgument("stage cost weights must be finite and nonnegative".into()));
        }
        Ok(Self { state_weight, state_target, input_weight, input_price })
    }

    pub fn evaluate(&self, x: &Vector, u: &Vector) -> Result<f64> {
        check_len("state x", self.state_weight.len(), x.len())?;
        check_len("input u", self.input_weight.len(), u.len())?;
        let mut c = 0.0;
        for i in 0..x.len() {
            let dx = x[i] - self.state_target[i];
            c += self.state_weight[i] * dx * dx;
        }
        for j in 0..u.len() {
            c += self.input_weight[j] * u[j] * u[j] + (self.input_price[j] * u[j]).abs();
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCostSchedule {
    steps: Vec<StageCost>,
}

impl StageCostSchedule {
    pub fn new(steps: Vec<StageCost>) -> Result<Self> {
        if steps.len() < 2 {
            return Err(Error::InvalidArgument("cost schedule needs T+1 >= 2 entries".into()));
        }
        let (n, m) = (steps[0].state_weight.len(), steps[0].input_weight.len());
        for s in &steps {
            check_len("cost state weight", n, s.state_weight.len())?;
            check_len("cost input weight", m, s.input_weight.len())?;
        }
        Ok(Self { steps })
    }
    pub fn period(&self) -> usize {
        self.steps.len() - 1
    }
    pub fn at(&self, t: usize) -> &StageCost {
        &self.steps[t]
    }
    pub fn steps(&self) -> &[StageCost] {
        &self.steps
    }
    pub fn evaluate(&self, t: usize, x: &Vector, u: &Vector) -> Result<f64> {
        if t > self.period() {
            return Err(Error::TimeIndex { t, period: self.period() });
        }
        self.steps[t].evaluate(x, u)
    }
}

/// Time-indexed record of one pass through the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub iteration: usize,
    pub theta: ThetaSample,
    #[serde(with = "serde_vectors")]
    pub states: Vec<Vector>,
    #[serde(with = "serde_vectors")]
    pub inputs: Vec<Vector>,
    #[serde(with = "serde_vectors")]
    pub disturbances: Vec<Vector>,
    pub stage_costs: Vec<f64>,
    pub cumulative_cost: f64,
    /// `(t, worst row value)` for every step that broke the schedule.
    pub violations: Vec<(usize, f64)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
    /// Tail sums `sum_{k>=t} l_k`, indexed like `stage_costs`.
    pub fn tail_costs(&self) -> Vec<f64> {
        tail_sums(&self.stage_costs)
    }
}

pub(crate) fn tail_sums(costs: &[f64]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; costs.len()];
    let mut acc = 0.0;
    for k in (0..costs.len()).rev() {
        acc += costs[k];
        out[k] = acc;
    }
    out
}

/// Simulates the plant under `policy` for `t = 0..=T`.
///
/// The policy is queried at every `t` including `T`; the state is advanced
/// for `t < T` only.
pub fn rollout<P>(
    model: &PeriodicLtvModel,
    schedule: &PolytopicConstraintSchedule,
    costs: &StageCostSchedule,
    mut policy: P,
    w_traj: &[Vector],
    x0: &Vector,
) -> Result<Trajectory>
where
    P: FnMut(usize, &Vector) -> core::result::Result<Vector, String>,
{
    let period = model.period();
    check_len("disturbance sequence", period + 1, w_traj.len())?;
    check_len("constraint schedule length", period, schedule.period())?;
    check_len("cost schedule length", period, costs.period())?;
    let mut x = x0.clone();
    let mut states = Vec::with_capacity(period + 1);
    let mut inputs = Vec::with_capacity(period + 1);
    let mut stage_costs = Vec::with_capacity(period + 1);
    let mut violations = Vec::new();
    for t in 0..=period {
        let u = policy(t, &x).map_err(|message| Error::Policy { t, message })?;
        let chk = schedule.check(t, &x, &u, DEFAULT_CONSTRAINT_MARGIN)?;
        if !chk.satisfied {
            violations.push((t, chk.worst));
        }
        stage_costs.push(costs.evaluate(t, &x, &u)?);
        let next = if t < period { Some(model.step(t, &x, &u, &w_traj[t])?) } else { None };
        states.push(x.clone());
        inputs.push(u);
        if let Some(nx) = next {
            x = nx;
        }
    }
    let cumulative_cost = stage_costs.iter().sum();
    Ok(Trajectory {
        iteration: 0,
        theta: ThetaSample::default(),
        states,
        inputs,
        disturbances: w_traj.to_vec(),
        stage_costs,
        cumulative_cost,
        violations,
    })
}
