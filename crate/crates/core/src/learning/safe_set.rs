use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{shift_trajectory, HistoryStore};
use crate::error::{Error, Result};
use crate::linalg::{max_abs_diff, serde_vector, Vector};
use crate::problem::{IterationTarget, NominalProblem};

/// Infinity-norm tolerance for state matching and deduplication.
pub const DEFAULT_MATCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeSetEntry {
    #[serde(with = "serde_vector")]
    pub state: Vector,
    /// Shifted input applied at this state; feeds the successor.
    #[serde(with = "serde_vector")]
    pub input: Vector,
    pub cost_to_go: f64,
    pub source_iteration: usize,
    pub shift_start: usize,
}

impl SafeSetEntry {
    /// Ordering key for ties: cost, then iteration, then shift start.
    fn key(&self) -> (f64, usize, usize) {
        (self.cost_to_go, self.source_iteration, self.shift_start)
    }
}

fn key_less(a: (f64, usize, usize), b: (f64, usize, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2))
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Level {
    entries: Vec<SafeSetEntry>,
    /// Bucket of the first coordinate, for tolerance lookups.
    index: BTreeMap<i64, Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeSet {
    levels: Vec<Level>,
    tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QValue {
    pub cost: f64,
    pub source_iteration: usize,
    pub shift_start: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub count: usize,
    pub min_q: Option<f64>,
    pub max_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeSetSummary {
    pub levels: Vec<LevelSummary>,
    pub total_entries: usize,
}

impl SafeSet {
    pub fn new(period: usize, tolerance: f64) -> Self {
        Self { levels: alloc::vec![Level::default(); period + 1], tolerance }
    }
    pub fn period(&self) -> usize {
        self.levels.len() - 1
    }
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
    pub fn level(&self, k: usize) -> &[SafeSetEntry] {
        &self.levels[k].entries
    }

    fn bucket(&self, x: f64) -> i64 {
        let b = libm::floor(x / self.tolerance);
        b.clamp(i64::MIN as f64 / 4.0, i64::MAX as f64 / 4.0) as i64
    }

    fn matches(&self, k: usize, z: &Vector) -> impl Iterator<Item = usize> + '_ {
        let level = &self.levels[k];
        let b = if z.is_empty() { 0 } else { self.bucket(z[0]) };
        let tol = self.tolerance;
        let z = z.clone();
        (b - 1..=b + 1)
            .filter_map(move |key| level.index.get(&key))
            .flatten()
            .copied()
            .filter(move |&i| max_abs_diff(&level.entries[i].state, &z) <= tol)
    }

    /// Inserts with deduplication; a matching entry keeps the smaller cost.
    pub fn insert(&mut self, k: usize, entry: SafeSetEntry) {
        let existing = self.matches(k, &entry.state).min();
        match existing {
            Some(i) => {
                if key_less(entry.key(), self.levels[k].entries[i].key()) {
                    let (ob, nb) = if entry.state.is_empty() {
                        (0, 0)
                    } else {
                        (self.bucket(self.levels[k].entries[i].state[0]), self.bucket(entry.state[0]))
                    };
                    self.levels[k].entries[i] = entry;
                    if ob != nb {
                        let level = &mut self.levels[k];
                        if let Some(v) = level.index.get_mut(&ob) {
                            v.retain(|&j| j != i);
                        }
                        level.index.entry(nb).or_default().push(i);
                    }
                }
            }
            None => {
                let b = if entry.state.is_empty() { 0 } else { self.bucket(entry.state[0]) };
                let level = &mut self.levels[k];
                level.index.entry(b).or_default().push(level.entries.len());
                level.entries.push(entry);
            }
        }
    }

    /// Minimum cost among entries within tolerance of `z`.
    pub fn query(&self, k: usize, z: &Vector) -> Option<QValue> {
        let mut best: Option<(usize, (f64, usize, usize))> = None;
        for i in self.matches(k, z) {
            let key = self.levels[k].entries[i].key();
            if best.map_or(true, |(bi, bk)| key_less(key, bk) || (key == bk && i < bi)) {
                best = Some((i, key));
            }
        }
        best.map(|(index, (cost, source_iteration, shift_start))| QValue { cost, source_iteration, shift_start, index })
    }

    pub fn summary(&self) -> SafeSetSummary {
        let levels: Vec<LevelSummary> = self
            .levels
            .iter()
            .map(|l| LevelSummary {
                count: l.entries.len(),
                min_q: l.entries.iter().map(|e| e.cost_to_go).reduce(f64::min),
                max_q: l.entries.iter().map(|e| e.cost_to_go).reduce(f64::max),
            })
            .collect();
        SafeSetSummary { total_entries: levels.iter().map(|l| l.count).sum(), levels }
    }

    /// All levels, for full dumps.
    pub fn levels(&self) -> Vec<&[SafeSetEntry]> {
        self.levels.iter().map(|l| l.entries.as_slice()).collect()
    }
}

/// `Q_k(z)`; `None` stands for `+inf`.
pub fn query_q(safe_set: &SafeSet, k: usize, z: &Vector) -> Option<QValue> {
    safe_set.query(k, z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeSetBuild {
    pub safe_set: SafeSet,
    /// `J_{0|0}` of every source iteration, `None` when its shift from
    /// `t = 0` is infeasible.
    pub start_costs: Vec<(usize, Option<f64>)>,
    /// Feasibility of every `(iteration, shift start)` pair.
    pub feasible_shifts: Vec<(usize, usize, bool)>,
}

/// Shifts every stored iteration from every start and inserts the feasible
/// tails, in `(iteration, start)` order.
pub fn build_safe_set(
    problem: &NominalProblem<'_>,
    history: &HistoryStore,
    target: &IterationTarget<'_>,
    tolerance: f64,
) -> Result<SafeSetBuild> {
    let period = problem.period();
    let mut safe_set = SafeSet::new(period, tolerance);
    let mut start_costs = Vec::with_capacity(history.len());
    let mut feasible_shifts = Vec::with_capacity(history.len() * (period + 1));
    for source in history.sources(target)? {
        for start in 0..=period {
            let shifted = shift_trajectory(problem, &source, target, start, true)?;
            feasible_shifts.push((source.iteration, start, shifted.feasible));
            if start == 0 {
                start_costs.push((source.iteration, shifted.feasible.then(|| shifted.tail_costs[0])));
            }
            if !shifted.feasible {
                continue;
            }
            for (off, ((z, v), j)) in shifted.states.into_iter().zip(shifted.inputs).zip(shifted.tail_costs).enumerate() {
                safe_set.insert(
                    start + off,
                    SafeSetEntry { state: z, input: v, cost_to_go: j, source_iteration: source.iteration, shift_start: start },
                );
            }
        }
    }
    if let Some(level) = (0..=period).find(|&k| safe_set.level(k).is_empty()) {
        return Err(Error::EmptySafeSet { level });
    }
    Ok(SafeSetBuild { safe_set, start_costs, feasible_shifts })
}
