use std::fs;
use std::path::Path;

use lsn_core::diagnostics::{report, DiagnosticReport};
use lsn_core::kinetics::validate_hypotheses;
use lsn_core::nonlinear_solver::{continue_solution, SimulationResult, Termination};
use lsn_core::reference_oracle::{compare, upwind_solve, Comparison};
use serde_json::json;

use crate::config::Resolved;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn fmt(v: f64) -> String {
    format!("{:.12e}", v + 0.0)
}

/// Hypothesis report to stdout.
pub fn validate(cfg: &Resolved) -> Result<(), CliError> {
    let rep = validate_hypotheses(&cfg.model, cfg.rho, &cfg.f_in);
    println!("{rep}");
    if rep.passed() {
        Ok(())
    } else {
        let names: Vec<&str> = rep.failures().iter().map(|c| c.name.as_str()).collect();
        Err(CliError::Hypothesis(names.join(", ")))
    }
}

fn run_solver(cfg: &Resolved) -> Result<SimulationResult, CliError> {
    let rep = validate_hypotheses(&cfg.model, cfg.rho, &cfg.f_in);
    if !rep.passed() {
        eprintln!("{rep}");
        let names: Vec<&str> = rep.failures().iter().map(|c| c.name.as_str()).collect();
        return Err(CliError::Hypothesis(names.join(", ")));
    }
    Ok(continue_solution(&cfg.solver, &cfg.model, &cfg.f_in)?)
}

/// Runs the characteristics solver and writes series, snapshots and summary.
pub fn solve(cfg: &Resolved) -> Result<(), CliError> {
    let result = run_solver(cfg)?;
    fs::create_dir_all(&cfg.out)?;
    write_series(&cfg.out.join("series.csv"), &result)?;
    let mut snaps = Vec::new();
    for (k, &t) in cfg.snapshot_times.iter().enumerate() {
        if t < 0.0 || t > result.t_end() {
            eprintln!("skipping snapshot at t = {t}: outside [0, {}]", result.t_end());
            continue;
        }
        let name = format!("snapshot_{k:03}.csv");
        write_snapshot(&cfg.out.join(&name), &result, t, cfg.snapshot_points)?;
        snaps.push(json!({ "t": t, "file": name }));
    }
    let diag = if matches!(result.termination(), Termination::Failed { .. }) {
        None
    } else {
        Some(report(&result, cfg.test_functions, cfg.seed)?)
    };
    let summary = summary_json(cfg, &result, diag.as_ref(), snaps);
    fs::write(cfg.out.join("summary.json"), serde_json::to_string_pretty(&summary).expect("json") + "\n")?;
    println!(
        "{} (T* = {}): {} at t = {} ({} nodes, u = {})",
        cfg.scenario_name,
        cfg.horizon,
        result.termination().kind(),
        fmt(result.t_end()),
        result.series().len(),
        fmt(result.u_at(result.t_end()))
    );
    if let Some(d) = &diag {
        print!("{d}");
    }
    match result.termination() {
        Termination::Failed { at, reason } => Err(CliError::Solver(format!("stopped at t = {at}: {reason}"))),
        _ => Ok(()),
    }
}

/// Runs both solvers and writes the gap series.
pub fn compare_cmd(cfg: &Resolved) -> Result<(), CliError> {
    let result = run_solver(cfg)?;
    if let Termination::Failed { at, reason } = result.termination() {
        return Err(CliError::Solver(format!("stopped at t = {at}: {reason}")));
    }
    let t_end = result.t_end();
    let times: Vec<f64> = match &cfg.compare_times {
        Some(ts) => ts.iter().copied().filter(|&t| t >= 0.0 && t <= t_end).collect(),
        None => (1..=10).map(|k| t_end * k as f64 / 10.0).collect(),
    };
    let oracle = upwind_solve(&cfg.model, cfg.rho, &cfg.f_in, &cfg.grid, t_end, &times)?;
    if oracle.truncation_warning {
        eprintln!("warning: oracle lost more than 1e-4 rho of mass through x_max = {}", oracle.x_max);
    }
    let rows = times.iter().map(|&t| compare(&result, &oracle, t)).collect::<lsn_core::Result<Vec<Comparison>>>()?;
    fs::create_dir_all(&cfg.out)?;
    let mut w = csv::Writer::from_path(cfg.out.join("compare.csv"))?;
    w.write_record(["t", "u_gap", "density_L1_gap"])?;
    for c in &rows {
        w.write_record([fmt(c.t), fmt(c.u_gap), fmt(c.density_l1_gap)])?;
    }
    w.flush()?;
    let u_max = rows.iter().map(|c| c.u_gap).fold(0.0, f64::max);
    let d_max = rows.iter().map(|c| c.density_l1_gap).fold(0.0, f64::max);
    println!(
        "{}: max u_gap = {} (tol {}), max density_L1_gap = {} (tol {}), {} cells",
        cfg.scenario_name,
        fmt(u_max),
        fmt(cfg.u_gap_tol),
        fmt(d_max),
        fmt(cfg.density_gap_tol),
        cfg.grid.cells
    );
    if u_max <= cfg.u_gap_tol && d_max <= cfg.density_gap_tol {
        Ok(())
    } else {
        Err(CliError::Tolerance(format!("u_gap {u_max:.3e}, density gap {d_max:.3e}")))
    }
}

fn write_series(path: &Path, r: &SimulationResult) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "u", "M0", "M1", "du_dt"])?;
    for row in r.series() {
        w.write_record([fmt(row.t), fmt(row.u), fmt(row.m0), fmt(row.m1), fmt(row.du_dt)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_snapshot(path: &Path, r: &SimulationResult, t: f64, points: usize) -> Result<(), CliError> {
    let snap = r.snapshot(t)?;
    let x_hi = snap.carriers()?.iter().map(|c| c.x).fold(snap.x_c(), f64::max).max(1e-3) * 1.05;
    let xs: Vec<f64> = (0..points.max(1)).map(|i| x_hi * (i as f64 + 0.5) / points.max(1) as f64).collect();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "f"])?;
    for (x, f) in snap.sample_grid(&xs)? {
        w.write_record([fmt(x), fmt(f)])?;
    }
    w.flush()?;
    Ok(())
}

fn summary_json(cfg: &Resolved, r: &SimulationResult, diag: Option<&DiagnosticReport>, snapshots: Vec<serde_json::Value>) -> serde_json::Value {
    let h = r.hypotheses();
    let rc = r.config();
    let max_residual = r
        .windows()
        .iter()
        .filter(|w| w.converged)
        .filter_map(|w| w.residuals.last().copied())
        .fold(0.0, f64::max);
    let failures: Vec<&str> = h.failures().iter().map(|c| c.name.as_str()).collect();
    let mut term = json!({ "kind": r.termination().kind(), "time": r.termination().time() });
    if let Termination::Failed { reason, .. } = r.termination() {
        term["reason"] = json!(reason);
    }
    json!({
        "schema_version": SCHEMA_VERSION,
        "scenario": cfg.scenario_name,
        "termination": term,
        "t_end": r.t_end(),
        "u_end": r.u_at(r.t_end()),
        "nodes": r.series().len(),
        "windows": r.windows().len(),
        "max_fixed_point_residual": max_residual,
        "global_guaranteed": r.global_guaranteed(),
        "config": {
            "rho": rc.rho,
            "horizon": rc.horizon,
            "delta": rc.delta,
            "window_length": rc.window_length,
            "time_grid_step": rc.time_grid_step,
            "fp_tolerance": rc.fp_tolerance,
            "stop_margin": rc.stop_margin,
            "u_in": rc.u_in,
            "phi0": rc.phi0,
        },
        "hypotheses": { "passed": h.passed(), "failures": failures },
        "diagnostics": diag.map(|d| d.checks.iter().map(|c| json!({
            "name": c.name,
            "verdict": c.verdict.to_string(),
            "value": c.value,
            "tolerance": c.tolerance,
            "detail": c.detail,
        })).collect::<Vec<_>>()),
        "snapshots": snapshots,
    })
}
