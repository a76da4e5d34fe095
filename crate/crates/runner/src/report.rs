//! Artifact writers: metric tables, trajectories, tube and safe-set
//! documents. Floats are written in shortest round-trip form so reruns are
//! byte-identical.

use std::fs;
use std::path::Path;

use plmpc_core::linalg::serde_matrix::to_rows;
use plmpc_core::linalg::Vector;
use plmpc_core::model::{PolytopicConstraintSchedule, StageCostSchedule, Trajectory};
use plmpc_core::tube::{FeedbackGainSchedule, RpiSet, TubeArtifacts};
use serde::{Deserialize, Serialize};

use crate::experiment::{Experiment, IterationMetrics, IterationOutput, SeedSummary};
use crate::RunError;

pub const COSTS_CSV: &str = "costs.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const TUBE_JSON: &str = "tube.json";
pub const MANIFEST_JSON: &str = "manifest.json";

pub fn shifted_costs_name(j: usize) -> String {
    format!("shifted_costs_{j}.csv")
}
pub fn trajectory_csv_name(j: usize) -> String {
    format!("trajectory_{j}.csv")
}
pub fn trajectory_json_name(j: usize) -> String {
    format!("trajectory_{j}.json")
}
pub fn safe_set_name(j: usize) -> String {
    format!("safe_set_{j}.json")
}
pub fn safe_set_dump_name(j: usize) -> String {
    format!("safe_set_full_{j}.json")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub iterations_requested: usize,
    pub iterations_completed: usize,
    pub complete: bool,
    pub failure: Option<String>,
    pub failure_exit_code: Option<i32>,
    pub seed_trajectory: Option<SeedSummary>,
    pub repeated_theta_increase: Option<f64>,
    pub shifted_costs_written: bool,
    pub trajectories_written: bool,
    pub rows: Vec<IterationMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDocument {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub initial_offset: Option<Vec<f64>>,
    pub nominal: Trajectory,
    #[serde(rename = "true")]
    pub true_trajectory: Trajectory,
    pub lmpc_values: Vec<f64>,
    pub terminal_provenance: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeDocument {
    pub gains: Vec<Vec<Vec<f64>>>,
    pub q_lqr: Vec<Vec<f64>>,
    pub r_lqr: Vec<Vec<f64>>,
    pub riccati_periods: usize,
    pub monodromy_radius: f64,
    pub alpha: f64,
    /// Minkowski summands in each RPI phase.
    pub horizon: usize,
    pub phase_count: usize,
    /// Generator matrices per phase, already inflated by `1/(1 - alpha)`.
    pub generators: Vec<Vec<Vec<f64>>>,
    pub tightened_rhs: Vec<Vec<f64>>,
    pub reductions: Vec<Vec<f64>>,
}

impl TubeDocument {
    pub fn new(tube: &TubeArtifacts, original: &PolytopicConstraintSchedule) -> Self {
        Self::from_parts(&tube.gains, tube.monodromy_radius, &tube.rpi, original, &tube.tightened.reductions)
    }

    /// Tightened right-hand sides are `f_t - reductions_t`; this also serves
    /// runs whose tightening came out empty.
    pub fn from_parts(
        gains: &FeedbackGainSchedule,
        monodromy_radius: f64,
        rpi: &RpiSet,
        original: &PolytopicConstraintSchedule,
        reductions: &[Vec<f64>],
    ) -> Self {
        let tightened_rhs = original
            .steps()
            .iter()
            .zip(reductions)
            .map(|(s, r)| s.rhs.iter().zip(r).map(|(f, h)| f - h).collect())
            .collect();
        Self {
            gains: gains.gains().iter().map(to_rows).collect(),
            q_lqr: to_rows(&gains.q_lqr),
            r_lqr: to_rows(&gains.r_lqr),
            riccati_periods: gains.periods,
            monodromy_radius,
            alpha: rpi.alpha,
            horizon: rpi.horizon,
            phase_count: rpi.phase_count,
            generators: rpi.phases().iter().map(|z| to_rows(z.generators())).collect(),
            tightened_rhs,
            reductions: reductions.to_vec(),
        }
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    fs::write(path, bytes).map_err(RunError::io(format!("cannot write {}", path.display())))
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("artifacts serialize");
    out.push(b'\n');
    out
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn costs_table(rows: &[IterationMetrics]) -> (Vec<String>, Vec<Vec<String>>) {
    let p = rows.first().map_or(0, |r| r.theta.len());
    let mut header = vec!["iteration".to_string()];
    header.extend((1..=p).map(|i| format!("theta_{i}")));
    for h in [
        "optimal_cost",
        "lmpc_cost",
        "difference",
        "true_cost",
        "lmpc_value_start",
        "feasible_shifts",
        "safe_set_entries",
        "qp_solved",
        "qp_pruned",
        "qp_infeasible",
        "qp_certified_infeasible",
        "qp_numeric_failures",
        "checks_passed",
    ] {
        header.push(h.into());
    }
    let body = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.iteration.to_string()];
            row.extend(r.theta.iter().map(|v| num(*v)));
            row.extend([
                num(r.optimal_cost),
                num(r.lmpc_cost),
                num(r.difference),
                num(r.true_cost),
                opt(r.lmpc_values.first().copied()),
                r.feasible_shift_count.to_string(),
                r.safe_set_entries.to_string(),
                r.stats.solved.to_string(),
                r.stats.pruned.to_string(),
                r.stats.infeasible.to_string(),
                r.stats.certified_infeasible.to_string(),
                r.stats.numeric_failures.to_string(),
                r.checks.passed.to_string(),
            ]);
            row
        })
        .collect();
    (header, body)
}

pub fn costs_csv(rows: &[IterationMetrics]) -> Vec<u8> {
    let (h, b) = costs_table(rows);
    csv_bytes(&h, &b)
}

/// Shifted costs from `t = 0` of every source iteration next to the
/// closed-loop cost of iteration `j`.
pub fn shifted_costs_csv(m: &IterationMetrics) -> Vec<u8> {
    let header: Vec<String> = ["source_iteration", "feasible", "shifted_cost", "closed_loop_cost"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = m
        .shifted_costs
        .iter()
        .map(|(i, c)| vec![i.to_string(), c.is_some().to_string(), opt(*c), num(m.lmpc_cost)])
        .collect();
    csv_bytes(&header, &rows)
}

/// Per-state bounds of single-variable rows, `None` where unbounded.
fn state_bounds(schedule: &PolytopicConstraintSchedule, t: usize, n: usize) -> Vec<(Option<f64>, Option<f64>)> {
    let set = schedule.at(t);
    let mut out = vec![(None, None); n];
    for r in 0..set.rows() {
        if set.g.row(r).iter().any(|v| *v != 0.0) {
            continue;
        }
        let nz: Vec<usize> = (0..n).filter(|&i| set.f[(r, i)] != 0.0).collect();
        if let [i] = nz[..] {
            let bound = set.rhs[r] / set.f[(r, i)];
            let slot = &mut out[i];
            if set.f[(r, i)] > 0.0 {
                slot.1 = Some(slot.1.map_or(bound, |b: f64| b.min(bound)));
            } else {
                slot.0 = Some(slot.0.map_or(bound, |b: f64| b.max(bound)));
            }
        }
    }
    out
}

/// One row per `t`: true and nominal signals, costs, references and the
/// original and tightened bounds of box-constrained states.
pub fn trajectory_csv(
    out: &IterationOutput,
    original: &PolytopicConstraintSchedule,
    tightened: &PolytopicConstraintSchedule,
    costs: &StageCostSchedule,
) -> Vec<u8> {
    let tr = &out.result.true_trajectory;
    let nom = &out.result.nominal;
    let n = tr.states[0].len();
    let m = tr.inputs[0].len();
    let d = tr.disturbances[0].len();
    let period = tr.states.len() - 1;
    let bounded: Vec<usize> = (0..n)
        .filter(|&i| (0..=period).any(|t| {
            let b = state_bounds(original, t, n)[i];
            b.0.is_some() || b.1.is_some()
        }))
        .collect();
    let tracked: Vec<usize> = (0..n).filter(|&i| (0..=period).any(|t| costs.at(t).state_weight[i] != 0.0)).collect();

    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.extend((1..=d).map(|i| format!("w{i}")));
    header.extend((1..=n).map(|i| format!("z{i}")));
    header.extend((1..=m).map(|i| format!("v{i}")));
    header.push("stage_cost".into());
    header.push("nominal_stage_cost".into());
    header.extend(tracked.iter().map(|i| format!("x{}_reference", i + 1)));
    for i in &bounded {
        for h in ["lower", "upper", "tightened_lower", "tightened_upper"] {
            header.push(format!("x{}_{h}", i + 1));
        }
    }
    let vec_cells = |v: &Vector| v.iter().map(|x| num(*x)).collect::<Vec<_>>();
    let rows: Vec<Vec<String>> = (0..=period)
        .map(|t| {
            let mut row = vec![t.to_string()];
            row.extend(vec_cells(&tr.states[t]));
            row.extend(vec_cells(&tr.inputs[t]));
            row.extend(vec_cells(&tr.disturbances[t]));
            row.extend(vec_cells(&nom.states[t]));
            row.extend(vec_cells(&nom.inputs[t]));
            row.push(num(tr.stage_costs[t]));
            row.push(num(nom.stage_costs[t]));
            row.extend(tracked.iter().map(|&i| num(costs.at(t).state_target[i])));
            let ob = state_bounds(original, t, n);
            let tb = state_bounds(tightened, t, n);
            for &i in &bounded {
                row.extend([opt(ob[i].0), opt(ob[i].1), opt(tb[i].0), opt(tb[i].1)]);
            }
            row
        })
        .collect();
    csv_bytes(&header, &rows)
}

pub fn trajectory_document(out: &IterationOutput) -> TrajectoryDocument {
    TrajectoryDocument {
        iteration: out.metrics.iteration,
        theta: out.metrics.theta.clone(),
        initial_offset: out.initial_offset.as_ref().map(|v| v.as_slice().to_vec()),
        nominal: out.result.nominal.clone(),
        true_trajectory: out.result.true_trajectory.clone(),
        lmpc_values: out.result.lmpc_values.clone(),
        terminal_provenance: out.result.terminal_provenance.clone(),
    }
}

pub fn summary(exp: &Experiment) -> Summary {
    Summary {
        scenario: exp.scenario.name.clone(),
        seed: exp.config.seed,
        iterations_requested: exp.config.iterations,
        iterations_completed: exp.iterations.len(),
        complete: exp.complete(),
        failure: exp.failure.as_ref().map(|e| e.to_string()),
        failure_exit_code: exp.failure.as_ref().map(|e| e.exit_code()),
        seed_trajectory: exp.seed.clone(),
        repeated_theta_increase: exp.repeated_theta_increase,
        shifted_costs_written: exp.config.output.shifted_costs,
        trajectories_written: exp.config.output.trajectories,
        rows: exp.iterations.iter().map(|o| o.metrics.clone()).collect(),
    }
}

/// Every artifact of a run as `(file name, bytes)`, manifest excluded,
/// in a fixed order.
pub fn artifacts(exp: &Experiment) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let rows: Vec<IterationMetrics> = exp.iterations.iter().map(|o| o.metrics.clone()).collect();
    files.push((COSTS_CSV.to_string(), costs_csv(&rows)));
    files.push((SUMMARY_JSON.to_string(), to_json(&summary(exp))));
    if let Some(doc) = &exp.tube_document {
        files.push((TUBE_JSON.to_string(), to_json(doc)));
    }
    let spec = &exp.scenario;
    for out in &exp.iterations {
        let j = out.metrics.iteration;
        if exp.config.output.shifted_costs {
            files.push((shifted_costs_name(j), shifted_costs_csv(&out.metrics)));
        }
        if exp.config.output.trajectories {
            let tightened = &exp.tube.as_ref().expect("iterations need a tube").tightened.schedule;
            files.push((trajectory_csv_name(j), trajectory_csv(out, &spec.constraints, tightened, &spec.costs)));
            files.push((trajectory_json_name(j), to_json(&trajectory_document(out))));
        }
        files.push((safe_set_name(j), to_json(&out.safe_set_summary)));
        if let Some(ss) = &out.safe_set {
            files.push((safe_set_dump_name(j), to_json(&ss.levels())));
        }
    }
    files
}
