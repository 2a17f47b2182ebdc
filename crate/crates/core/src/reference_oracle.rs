//! First-order upwind finite volumes with explicit Euler in time, on a
//! truncated grid. Shares nothing with the characteristics code except the
//! model, so that it can serve as an independent check.

use crate::error::{Error, Result};
use crate::initial::InitialDensity;
use crate::kinetics::{validate_hypotheses, KineticModel};
use crate::nonlinear_solver::SimulationResult;

/// Grid parameters. `x_max = None` means 20·(1 + K_r·horizon).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub x_max: Option<f64>,
    pub cells: usize,
    /// Upper bound on the time step; the CFL limit may cut it further.
    pub dt: Option<f64>,
    pub cfl_safety: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { x_max: None, cells: 4000, dt: None, cfl_safety: 0.9 }
    }
}

impl GridConfig {
    pub fn with_cells(cells: usize) -> Self {
        GridConfig { cells, ..Default::default() }
    }
}

/// Cell averages at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSnapshot {
    pub t: f64,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub x_max: f64,
    pub dx: f64,
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    pub m0: Vec<f64>,
    pub m1: Vec<f64>,
    pub snapshots: Vec<OracleSnapshot>,
    /// ∫𝔫(u) dt let in at the origin.
    pub inflow: f64,
    /// Number and mass carried out through x_max.
    pub outflow_number: f64,
    pub outflow_mass: f64,
    /// Set when u fell to Φ₀ before the horizon.
    pub halted_at: Option<f64>,
    pub truncation_warning: bool,
    pub steps: usize,
}

impl OracleResult {
    pub fn centers(&self) -> Vec<f64> {
        let n = (self.x_max / self.dx).round() as usize;
        (0..n).map(|j| (j as f64 + 0.5) * self.dx).collect()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    /// Linear interpolation of the step series, constant past the end.
    pub fn u_at(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t <= ts[0] {
            return self.u[0];
        }
        if t >= self.t_end() {
            return *self.u.last().expect("nonempty");
        }
        let i = ts.partition_point(|&s| s <= t) - 1;
        let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
        self.u[i] + w * (self.u[i + 1] - self.u[i])
    }

    /// First time u drops to `level`, interpolated between steps.
    pub fn crossing_time(&self, level: f64) -> Option<f64> {
        let i = self.u.iter().position(|&u| u <= level)?;
        if i == 0 {
            return Some(self.times[0]);
        }
        let (u0, u1) = (self.u[i - 1], self.u[i]);
        Some(self.times[i - 1] + (self.times[i] - self.times[i - 1]) * (u0 - level) / (u0 - u1))
    }

    pub fn snapshot(&self, t: f64) -> Option<&OracleSnapshot> {
        self.snapshots.iter().find(|s| (s.t - t).abs() <= 1e-12 * (1.0 + t.abs()))
    }
}

/// Upwind solve of the coupled system up to `horizon`, storing cell
/// averages at each of `snapshot_times`.
pub fn upwind_solve(
    model: &KineticModel,
    rho: f64,
    f_in: &InitialDensity,
    grid: &GridConfig,
    horizon: f64,
    snapshot_times: &[f64],
) -> Result<OracleResult> {
    let rep = validate_hypotheses(model, rho, f_in);
    if !rep.passed() {
        let names: Vec<&str> = rep.failures().iter().map(|c| c.name.as_str()).collect();
        return Err(Error::Hypothesis(names.join(", ")));
    }
    if !(rep.u_in > model.phi0()) {
        return Err(Error::InflowViolation(format!("u_in = {} does not exceed phi0 = {}", rep.u_in, model.phi0())));
    }
    run(model, Coupling::Mass(rho), f_in, grid, horizon, snapshot_times)
}

/// Linear transport at a frozen concentration `u` (no hypothesis checks).
pub fn upwind_transport(
    model: &KineticModel,
    u: f64,
    f_in: &InitialDensity,
    grid: &GridConfig,
    horizon: f64,
    snapshot_times: &[f64],
) -> Result<OracleResult> {
    run(model, Coupling::Frozen(u), f_in, grid, horizon, snapshot_times)
}

#[derive(Clone, Copy)]
enum Coupling {
    Mass(f64),
    Frozen(f64),
}

fn run(
    model: &KineticModel,
    coupling: Coupling,
    f_in: &InitialDensity,
    grid: &GridConfig,
    horizon: f64,
    snapshot_times: &[f64],
) -> Result<OracleResult> {
    if grid.cells < 2 || !(grid.cfl_safety > 0.0 && grid.cfl_safety < 1.0) || !(horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "grid needs cells >= 2 and cfl_safety in (0,1) (got {}, {})",
            grid.cells, grid.cfl_safety
        )));
    }
    let x_max = grid.x_max.unwrap_or(20.0 * (1.0 + model.sublinearity_constant() * horizon));
    let n = grid.cells;
    let dx = x_max / n as f64;
    let xc: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * dx).collect();
    // interfaces j = 0..=n at x = j·dx
    let ai: Vec<f64> = (0..=n).map(|j| model.a(j as f64 * dx)).collect();
    let bi: Vec<f64> = (0..=n).map(|j| model.b(j as f64 * dx)).collect();

    let mut f: Vec<f64> = (0..n)
        .map(|j| (f_in.tail(j as f64 * dx) - f_in.tail((j + 1) as f64 * dx)) / dx)
        .collect();
    let phi0 = model.phi0();
    let conc = |f: &[f64]| match coupling {
        Coupling::Mass(rho) => rho - f.iter().zip(&xc).map(|(v, x)| v * x).sum::<f64>() * dx,
        Coupling::Frozen(u) => u,
    };
    let moments = |f: &[f64]| {
        let m0 = f.iter().sum::<f64>() * dx;
        let m1 = f.iter().zip(&xc).map(|(v, x)| v * x).sum::<f64>() * dx;
        (m0, m1)
    };

    let mut targets: Vec<f64> = snapshot_times.iter().copied().filter(|&t| t >= 0.0 && t <= horizon).collect();
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    let mut next_target = 0;

    let mut t = 0.0;
    let mut u = conc(&f);
    let (m0, m1) = moments(&f);
    let mut res = OracleResult {
        x_max,
        dx,
        times: vec![0.0],
        u: vec![u],
        m0: vec![m0],
        m1: vec![m1],
        snapshots: Vec::new(),
        inflow: 0.0,
        outflow_number: 0.0,
        outflow_mass: 0.0,
        halted_at: None,
        truncation_warning: false,
        steps: 0,
    };
    let mut flux = vec![0.0; n + 1];
    loop {
        while next_target < targets.len() && targets[next_target] <= t + 1e-14 * (1.0 + t) {
            res.snapshots.push(OracleSnapshot { t: targets[next_target], f: f.clone() });
            next_target += 1;
        }
        if t >= horizon {
            break;
        }
        if matches!(coupling, Coupling::Mass(_)) && u <= phi0 {
            res.halted_at = Some(t);
            break;
        }
        let speed = ai.iter().zip(&bi).map(|(a, b)| (a * u - b).abs()).fold(0.0, f64::max);
        let mut dt = if speed > 0.0 { grid.cfl_safety * dx / speed } else { horizon - t };
        if let Some(cap) = grid.dt {
            dt = dt.min(cap);
        }
        dt = dt.min(horizon - t);
        if next_target < targets.len() {
            dt = dt.min(targets[next_target] - t);
        }
        if dt * speed > dx {
            return Err(Error::Domain(format!("CFL violated at t = {t}: dt = {dt}, speed = {speed}")));
        }
        // left boundary: the nucleation flux while the inflow condition holds
        let nuc = if u > phi0 { model.nucleation(u) } else { 0.0 };
        flux[0] = nuc;
        for j in 1..n {
            let v = ai[j] * u - bi[j];
            flux[j] = if v > 0.0 { v * f[j - 1] } else { v * f[j] };
        }
        let vr = ai[n] * u - bi[n];
        flux[n] = if vr > 0.0 { vr * f[n - 1] } else { 0.0 };
        let lam = dt / dx;
        for j in 0..n {
            f[j] -= lam * (flux[j + 1] - flux[j]);
        }
        res.inflow += nuc * dt;
        res.outflow_number += flux[n] * dt;
        res.outflow_mass += flux[n] * x_max * dt;
        t += dt;
        res.steps += 1;
        u = conc(&f);
        let (m0, m1) = moments(&f);
        res.times.push(t);
        res.u.push(u);
        res.m0.push(m0);
        res.m1.push(m1);
    }
    if let Coupling::Mass(rho) = coupling {
        res.truncation_warning = res.outflow_mass > 1e-4 * rho;
    }
    Ok(res)
}

/// Gaps between the characteristics solution and the oracle at time t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub t: f64,
    pub u_gap: f64,
    pub density_l1_gap: f64,
}

/// u and density gaps at a time where the oracle stored a snapshot.
pub fn compare(char_result: &SimulationResult, oracle: &OracleResult, t: f64) -> Result<Comparison> {
    let snap = oracle
        .snapshot(t)
        .ok_or_else(|| Error::InvalidParameter(format!("oracle has no snapshot at t = {t}")))?;
    let u_gap = (char_result.u_at(t) - oracle.u_at(t)).abs();
    let dens = char_result.snapshot(t)?;
    let mut gap = 0.0;
    for (x, fj) in oracle.centers().into_iter().zip(&snap.f) {
        gap += (dens.sample(x)?.value - fj).abs();
    }
    Ok(Comparison { t, u_gap, density_l1_gap: gap * oracle.dx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{make_power_law, Nucleation};

    fn unit(n: Nucleation) -> KineticModel {
        make_power_law(1.0, 0.0, 0.0, 0.0, n).unwrap()
    }

    #[test]
    fn vacuum_stays_empty() {
        let r = upwind_solve(&unit(Nucleation::constant(0.0)), 1.0, &InitialDensity::zero(), &GridConfig::with_cells(200), 2.0, &[1.0]).unwrap();
        assert!(r.u.iter().all(|&u| u == 1.0));
        assert!(r.snapshot(1.0).unwrap().f.iter().all(|&v| v == 0.0));
        assert_eq!(r.halted_at, None);
    }

    #[test]
    fn frozen_advection_of_a_block() {
        // exact profile at t = 1 is 1_[2,3]; L¹ error should shrink like √dx
        let f_in = InitialDensity::indicator(1.0, 1.0, 2.0).unwrap();
        let model = unit(Nucleation::constant(0.0));
        let mut errs = Vec::new();
        for cells in [400, 1600] {
            let grid = GridConfig { x_max: Some(5.0), cells, dt: None, cfl_safety: 0.5 };
            let r = upwind_transport(&model, 1.0, &f_in, &grid, 1.0, &[1.0]).unwrap();
            let snap = r.snapshot(1.0).unwrap();
            let e: f64 = r
                .centers()
                .iter()
                .zip(&snap.f)
                .map(|(&x, &v)| (v - if (2.0..3.0).contains(&x) { 1.0 } else { 0.0 }).abs() * r.dx)
                .sum();
            assert!(e <= 2.0 * r.dx.sqrt(), "cells={cells}: {e}");
            errs.push(e);
        }
        let ratio = errs[1] / errs[0];
        assert!(ratio > 0.35 && ratio < 0.65, "{ratio}");
    }

    #[test]
    fn discrete_balances() {
        let model = unit(Nucleation::constant(0.1));
        let f_in = InitialDensity::indicator(0.5, 1.0, 2.0).unwrap();
        let grid = GridConfig { x_max: Some(20.0), cells: 1000, dt: None, cfl_safety: 0.9 };
        let r = upwind_solve(&model, 2.0, &f_in, &grid, 2.0, &[]).unwrap();
        for i in 0..r.times.len() {
            assert!((r.u[i] + r.m1[i] - 2.0).abs() < 1e-13);
        }
        let last = r.times.len() - 1;
        assert!((r.m0[last] - r.m0[0] - r.inflow + r.outflow_number).abs() < 1e-12);
        assert!((r.inflow - 0.2).abs() < 1e-12);
        assert!(!r.truncation_warning);
    }

    #[test]
    fn sech2_coarse() {
        let model = unit(Nucleation::linear_excess(1.0, 0.0));
        let grid = GridConfig { x_max: Some(20.0), cells: 4000, dt: None, cfl_safety: 0.9 };
        let r = upwind_solve(&model, 1.0, &InitialDensity::zero(), &grid, 1.0, &[1.0]).unwrap();
        let exact = (1.0 / (1.0f64 / 2f64.sqrt()).cosh()).powi(2);
        assert!((r.u_at(1.0) - exact).abs() <= 5e-3);
    }
}
