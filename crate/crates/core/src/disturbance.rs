//! Periodically correlated disturbances: a per-channel waveform basis with
//! coefficients `theta`, plus a bounded uniform white residual.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{serde_vector, Matrix, Vector};

/// Exact fraction of the period, so window edges compare in integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodFraction {
    pub num: u32,
    pub den: u32,
}

impl PeriodFraction {
    pub const fn new(num: u32, den: u32) -> Self {
        Self { num, den }
    }
    /// `t >= (num/den) * T`.
    fn at_or_after(&self, t: usize, period: usize) -> bool {
        (t as u64) * (self.den as u64) >= (self.num as u64) * (period as u64)
    }
    fn steps(&self, period: usize) -> f64 {
        self.num as f64 * period as f64 / self.den as f64
    }
}

/// One basis waveform. Windows are half-open `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Atom {
    Constant,
    Sine { harmonic: u32 },
    Cosine { harmonic: u32 },
    /// Rises linearly from 0 at `start` to 1 at `peak`, falls back to 0 at `end`.
    Triangle { start: PeriodFraction, peak: PeriodFraction, end: PeriodFraction },
    /// 1 inside the window, 0 elsewhere.
    Square { start: PeriodFraction, end: PeriodFraction },
}

impl Atom {
    pub fn evaluate(&self, t: usize, period: usize) -> f64 {
        let phase = 2.0 * PI * t as f64 / period as f64;
        match *self {
            Atom::Constant => 1.0,
            Atom::Sine { harmonic } => libm::sin(harmonic as f64 * phase),
            Atom::Cosine { harmonic } => libm::cos(harmonic as f64 * phase),
            Atom::Triangle { start, peak, end } => {
                let tf = t as f64;
                if start.at_or_after(t, period) && !peak.at_or_after(t, period) {
                    (tf - start.steps(period)) / (peak.steps(period) - start.steps(period))
                } else if peak.at_or_after(t, period) && !end.at_or_after(t, period) {
                    (end.steps(period) - tf) / (end.steps(period) - peak.steps(period))
                } else {
                    0.0
                }
            }
            Atom::Square { start, end } => {
                if start.at_or_after(t, period) && !end.at_or_after(t, period) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn harmonic(&self) -> u32 {
        match *self {
            Atom::Sine { harmonic } | Atom::Cosine { harmonic } => harmonic,
            _ => 0,
        }
    }
}

/// Closed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }
    pub fn half_width_symmetric(&self) -> f64 {
        self.lower.abs().max(self.upper.abs())
    }
}

/// Coefficient vector, ordered channel-major then by atom.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThetaSample(#[serde(with = "serde_vector")] pub Vector);

impl ThetaSample {
    pub fn new(values: Vector) -> Self {
        Self(values)
    }
    pub fn from_slice(values: &[f64]) -> Self {
        Self(Vector::from_column_slice(values))
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn as_vector(&self) -> &Vector {
        &self.0
    }
}

/// Box of admissible coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaDomain {
    #[serde(with = "serde_vector")]
    lower: Vector,
    #[serde(with = "serde_vector")]
    upper: Vector,
}

impl ThetaDomain {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        check_len("theta upper bound", lower.len(), upper.len())?;
        for i in 0..lower.len() {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] <= upper[i]) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "theta bound {i} must be finite with lower <= upper"
                )));
            }
        }
        Ok(Self { lower, upper })
    }
    pub fn from_intervals(bounds: &[Interval]) -> Result<Self> {
        Self::new(
            Vector::from_iterator(bounds.len(), bounds.iter().map(|b| b.lower)),
            Vector::from_iterator(bounds.len(), bounds.iter().map(|b| b.upper)),
        )
    }
    pub fn dim(&self) -> usize {
        self.lower.len()
    }
    pub fn lower(&self) -> &Vector {
        &self.lower
    }
    pub fn upper(&self) -> &Vector {
        &self.upper
    }
    pub fn center(&self) -> ThetaSample {
        ThetaSample((&self.lower + &self.upper) * 0.5)
    }
    pub fn half_widths(&self) -> Vector {
        (&self.upper - &self.lower) * 0.5
    }
    pub fn contains(&self, theta: &ThetaSample) -> bool {
        theta.len() == self.dim()
            && (0..self.dim()).all(|i| self.lower[i] <= theta.0[i] && theta.0[i] <= self.upper[i])
    }
    /// Indices of coordinates with positive width.
    pub fn free_coordinates(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.upper[i] > self.lower[i]).collect()
    }
    /// All box vertices over the free coordinates, in binary counting order.
    pub fn vertices(&self) -> Vec<ThetaSample> {
        let free = self.free_coordinates();
        (0..(1usize << free.len()))
            .map(|mask| {
                let mut v = self.lower.clone();
                for (bit, &i) in free.iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        v[i] = self.upper[i];
                    }
                }
                ThetaSample(v)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceBasis {
    period: usize,
    channels: Vec<Vec<Atom>>,
    residual: Vec<Interval>,
}

/// Least-squares projection result.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFit {
    pub theta: ThetaSample,
    pub residuals: Vec<Vector>,
    pub residual_max_abs: f64,
}

impl DisturbanceBasis {
    pub fn new(period: usize, channels: Vec<Vec<Atom>>, residual: Vec<Interval>) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidArgument("period must be positive".into()));
        }
        if channels.is_empty() {
            return Err(Error::InvalidArgument("at least one disturbance channel is required".into()));
        }
        check_len("residual bounds", channels.len(), residual.len())?;
        for r in &residual {
            if !(r.lower.is_finite() && r.upper.is_finite() && r.lower <= 0.0 && 0.0 <= r.upper) {
                return Err(Error::InvalidArgument("residual bounds must be finite intervals containing 0".into()));
            }
        }
        let basis = Self { period, channels, residual };
        for ch in 0..basis.channels.len() {
            if !basis.channels[ch].is_empty() {
                basis.channel_gram(ch).cholesky().ok_or(Error::RankDeficientBasis { channel: ch })?;
                if basis.channel_gram(ch).iter().any(|x| !x.is_finite()) || !basis.gram_well_conditioned(ch) {
                    return Err(Error::RankDeficientBasis { channel: ch });
                }
            }
        }
        Ok(basis)
    }

    pub fn period(&self) -> usize {
        self.period
    }
    pub fn channels(&self) -> &[Vec<Atom>] {
        &self.channels
    }
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }
    pub fn residual_bounds(&self) -> &[Interval] {
        &self.residual
    }
    pub fn coefficient_count(&self) -> usize {
        self.channels.iter().map(Vec::len).sum()
    }
    /// Largest harmonic index in use.
    pub fn truncation_order(&self) -> u32 {
        self.channels.iter().flatten().map(Atom::harmonic).max().unwrap_or(0)
    }
    pub fn residual_free(&self) -> bool {
        self.residual.iter().all(|r| r.lower == 0.0 && r.upper == 0.0)
    }

    fn channel_samples(&self, ch: usize) -> Matrix {
        let atoms = &self.channels[ch];
        Matrix::from_fn(self.period, atoms.len(), |t, k| atoms[k].evaluate(t, self.period))
    }

    fn channel_gram(&self, ch: usize) -> Matrix {
        let s = self.channel_samples(ch);
        s.transpose() * &s
    }

    fn gram_well_conditioned(&self, ch: usize) -> bool {
        let g = self.channel_gram(ch);
        let ev = g.clone().symmetric_eigenvalues();
        let max = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min = ev.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        max > 0.0 && min > 1e-10 * max
    }

    /// First coefficient index of each channel.
    fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.channels.len());
        let mut acc = 0;
        for ch in &self.channels {
            out.push(acc);
            acc += ch.len();
        }
        out
    }

    /// Matrix `R_t` with `w_theta(t) = R_t theta`.
    pub fn regressor(&self, t: usize) -> Matrix {
        let mut r = Matrix::zeros(self.channels.len(), self.coefficient_count());
        for (ch, off) in self.offsets().into_iter().enumerate() {
            for (k, atom) in self.channels[ch].iter().enumerate() {
                r[(ch, off + k)] = atom.evaluate(t, self.period);
            }
        }
        r
    }

    pub fn evaluate_correlated(&self, theta: &ThetaSample, t: usize) -> Result<Vector> {
        check_len("theta", self.coefficient_count(), theta.len())?;
        if t > self.period {
            return Err(Error::TimeIndex { t, period: self.period });
        }
        let mut w = Vector::zeros(self.channels.len());
        for (ch, off) in self.offsets().into_iter().enumerate() {
            w[ch] = self.channels[ch]
                .iter()
                .enumerate()
                .map(|(k, atom)| theta.0[off + k] * atom.evaluate(t, self.period))
                .sum();
        }
        Ok(w)
    }

    /// Correlated part over `t = 0..=T`.
    pub fn correlated_sequence(&self, theta: &ThetaSample) -> Result<Vec<Vector>> {
        (0..=self.period).map(|t| self.evaluate_correlated(theta, t)).collect()
    }

    /// Per-channel least squares over `t = 0..T-1`.
    pub fn fit_coefficients(&self, realization: &[Vector]) -> Result<CoefficientFit> {
        check_len("realization length", self.period + 1, realization.len())?;
        for w in realization {
            check_len("realization sample", self.channels.len(), w.len())?;
        }
        let mut theta = Vector::zeros(self.coefficient_count());
        for (ch, off) in self.offsets().into_iter().enumerate() {
            let atoms = &self.channels[ch];
            if atoms.is_empty() {
                continue;
            }
            let s = self.channel_samples(ch);
            let y = Vector::from_iterator(self.period, (0..self.period).map(|t| realization[t][ch]));
            let chol = (s.transpose() * &s).cholesky().ok_or(Error::RankDeficientBasis { channel: ch })?;
            let coef = chol.solve(&(s.transpose() * y));
            theta.rows_mut(off, atoms.len()).copy_from(&coef);
        }
        let theta = ThetaSample(theta);
        let mut residual_max_abs: f64 = 0.0;
        let mut residuals = Vec::with_capacity(realization.len());
        for (t, w) in realization.iter().enumerate() {
            let r = w - self.evaluate_correlated(&theta, t)?;
            residual_max_abs = r.iter().fold(residual_max_abs, |m, v| m.max(v.abs()));
            residuals.push(r);
        }
        Ok(CoefficientFit { theta, residuals, residual_max_abs })
    }

    /// Correlated part plus a uniform residual drawn per step and channel.
    ///
    /// Channel `c` draws from its own stream derived from `(seed, c)`.
    pub fn generate_realization(&self, theta: &ThetaSample, seed: u64) -> Result<Vec<Vector>> {
        let mut out = self.correlated_sequence(theta)?;
        let residual = self.sample_residual(seed);
        for (w, r) in out.iter_mut().zip(residual) {
            *w += r;
        }
        Ok(out)
    }

    /// Residual sequence alone, length `T+1`.
    pub fn sample_residual(&self, seed: u64) -> Vec<Vector> {
        let d = self.channels.len();
        let mut out = alloc::vec![Vector::zeros(d); self.period + 1];
        for (ch, bound) in self.residual.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ch as u64));
            for w in out.iter_mut() {
                w[ch] = uniform_in(&mut rng, bound.lower, bound.upper);
            }
        }
        out
    }
}

/// Componentwise uniform sample from the box.
pub fn sample_theta(domain: &ThetaDomain, seed: u64) -> ThetaSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ThetaSample(Vector::from_iterator(
        domain.dim(),
        (0..domain.dim()).map(|i| uniform_in(&mut rng, domain.lower[i], domain.upper[i])),
    ))
}

/// Uniform draw in `[lo, hi]`; the bounds hold exactly.
pub fn uniform_in<R: RngCore>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (lo + (hi - lo) * u).clamp(lo, hi)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for an independent stream keyed by `tag`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix(mix(seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Seed for stream `stream` of iteration `iteration` under a master seed.
pub fn iteration_seed(master: u64, iteration: u64, stream: u64) -> u64 {
    derive_seed(derive_seed(master, iteration), stream)
}
