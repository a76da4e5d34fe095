//! Re-checks a persisted run: artifact digests, table consistency, the cost
//! inequalities and the recorded trajectories against the scenario.

use std::fs;
use std::path::Path;

use plmpc_core::disturbance::ThetaSample;
use plmpc_core::linalg::{matrix_from_rows, Matrix, Vector};
use plmpc_core::model::{PolytopicConstraintSchedule, DEFAULT_CONSTRAINT_MARGIN};
use serde::de::DeserializeOwned;

use crate::experiment::descent_gap;
use crate::manifest::{read_manifest, sha256_hex};
use crate::report::{trajectory_json_name, Summary, TrajectoryDocument, TubeDocument, SUMMARY_JSON, TUBE_JSON};
use crate::RunError;

/// Tolerance on recomputed dynamics residuals.
const DYNAMICS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub findings: Vec<Finding>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.findings.iter().all(|f| f.passed)
    }
    fn record(&mut self, check: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.findings.push(Finding { check: check.into(), passed, detail: detail.into() });
    }
}

fn read_json<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T, RunError> {
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(RunError::io(format!("cannot read {}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| RunError::Artifact { path: path.display().to_string(), message: e.to_string() })
}

fn matrix(rows: &[Vec<f64>]) -> Matrix {
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    matrix_from_rows(&refs)
}

pub fn verify_run(dir: &Path) -> Result<VerifyReport, RunError> {
    let mut rep = VerifyReport::default();
    let manifest = read_manifest(dir)?;

    let mut tampered = Vec::new();
    for (name, digest) in &manifest.artifacts {
        match fs::read(dir.join(name)) {
            Ok(bytes) if &sha256_hex(&bytes) == digest => {}
            Ok(_) => tampered.push(format!("{name} (digest mismatch)")),
            Err(_) => tampered.push(format!("{name} (missing)")),
        }
    }
    rep.record("artifact digests", tampered.is_empty(), tampered.join(", "));
    rep.record("run complete", manifest.complete, manifest.failure.clone().unwrap_or_default());
    if !tampered.is_empty() {
        return Ok(rep);
    }

    let summary: Summary = read_json(dir, SUMMARY_JSON)?;
    let tol = manifest.config.tolerances.invariant;
    let rows_ok = summary.rows.len() == summary.iterations_completed
        && (!summary.complete || summary.rows.len() == summary.iterations_requested);
    rep.record("metric rows", rows_ok, format!("{} rows for {} iterations", summary.rows.len(), summary.iterations_requested));

    let mut worst_diff = 0.0f64;
    let mut worst_resum = 0.0f64;
    let (mut worst_lmpc, mut worst_shift, mut worst_descent) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut successor = 0;
    for r in &summary.rows {
        worst_diff = worst_diff.max((r.difference - (r.optimal_cost - r.lmpc_cost)).abs());
        let s: f64 = r.stage_costs.iter().sum();
        worst_resum = worst_resum.max((s - r.lmpc_cost).abs() / s.abs().max(1.0));
        if let Some(&v0) = r.lmpc_values.first() {
            worst_lmpc = worst_lmpc.max(r.lmpc_cost - v0);
            for c in r.shifted_costs.iter().filter_map(|c| c.1) {
                worst_shift = worst_shift.max(v0 - c);
            }
        }
        if let Some(g) = descent_gap(&r.lmpc_values, &r.stage_costs) {
            worst_descent = worst_descent.max(g);
        }
        successor += r.checks.successor_failures;
    }
    rep.record("difference column", worst_diff <= 1e-12, format!("max error {worst_diff:e}"));
    rep.record("cost resummation", worst_resum <= 1e-9, format!("max relative error {worst_resum:e}"));
    rep.record("closed loop <= LMPC value", worst_lmpc <= tol, format!("max gap {worst_lmpc:e}"));
    rep.record("LMPC value <= shifted costs", worst_shift <= tol, format!("max gap {worst_shift:e}"));
    rep.record("per-step descent", worst_descent <= tol, format!("max gap {worst_descent:e}"));
    rep.record("successor plans", successor == 0, format!("{successor} infeasible"));
    if let Some(inc) = summary.repeated_theta_increase {
        rep.record("repeated theta non-increase", inc <= tol, format!("max increase {inc:e}"));
    }

    if !summary.trajectories_written || summary.rows.is_empty() {
        return Ok(rep);
    }
    verify_trajectories(dir, &manifest.config, &summary, &mut rep)?;
    Ok(rep)
}

fn verify_trajectories(dir: &Path, config: &crate::ExperimentConfig, summary: &Summary, rep: &mut VerifyReport) -> Result<(), RunError> {
    let spec = config.resolve_scenario()?;
    let tube: TubeDocument = read_json(dir, TUBE_JSON)?;
    let gains: Vec<Matrix> = tube.gains.iter().map(|g| matrix(g)).collect();
    let rhs: Vec<Vector> = tube.tightened_rhs.iter().map(|r| Vector::from_column_slice(r)).collect();
    let tightened: PolytopicConstraintSchedule = spec.constraints.with_rhs(rhs)?;
    let rhs_ok = (0..=spec.period()).all(|t| {
        let (a, b) = (&tightened.at(t).rhs, &spec.constraints.at(t).rhs);
        a.iter().zip(b.iter()).all(|(x, y)| x <= y)
    });
    rep.record("tightened rhs <= original rhs", rhs_ok, "");

    let deviated = config.extensions.deviation.is_some();
    let mut nominal_dyn = 0.0f64;
    let mut true_dyn = 0.0f64;
    let mut feedback = 0.0f64;
    let (mut nominal_cons, mut true_cons) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for r in &summary.rows {
        let doc: TrajectoryDocument = read_json(dir, &trajectory_json_name(r.iteration))?;
        let theta = ThetaSample::from_slice(&doc.theta);
        let w_theta = spec.basis.correlated_sequence(&theta)?;
        let (z, v) = (&doc.nominal.states, &doc.nominal.inputs);
        let (x, u, w) = (&doc.true_trajectory.states, &doc.true_trajectory.inputs, &doc.true_trajectory.disturbances);
        for t in 0..=spec.period() {
            nominal_cons = nominal_cons.max(tightened.check(t, &z[t], &v[t], 0.0)?.worst);
            true_cons = true_cons.max(spec.constraints.check(t, &x[t], &u[t], 0.0)?.worst);
            let fb = &v[t] + &gains[t] * (&x[t] - &z[t]) - &u[t];
            feedback = feedback.max(fb.amax());
            if t < spec.period() && !deviated {
                let m = &spec.model;
                let zn = m.a(t) * &z[t] + m.b(t) * &v[t] + m.c(t) * &w_theta[t];
                let xn = m.a(t) * &x[t] + m.b(t) * &u[t] + m.c(t) * &w[t];
                nominal_dyn = nominal_dyn.max((zn - &z[t + 1]).amax() / z[t + 1].amax().max(1.0));
                true_dyn = true_dyn.max((xn - &x[t + 1]).amax() / x[t + 1].amax().max(1.0));
            }
        }
    }
    let m = DEFAULT_CONSTRAINT_MARGIN;
    rep.record("nominal trajectories within tightened constraints", nominal_cons <= m, format!("worst row {nominal_cons:e}"));
    rep.record("true trajectories within original constraints", true_cons <= m, format!("worst row {true_cons:e}"));
    rep.record("tube feedback u = v + K (x - z)", feedback <= DYNAMICS_TOLERANCE, format!("max error {feedback:e}"));
    if !deviated {
        rep.record("nominal dynamics", nominal_dyn <= DYNAMICS_TOLERANCE, format!("max residual {nominal_dyn:e}"));
        rep.record("true dynamics", true_dyn <= DYNAMICS_TOLERANCE, format!("max residual {true_dyn:e}"));
    }
    Ok(())
}
