use approx::assert_relative_eq;
use lsn_core::diagnostics::{
    blowdown_bound_check, global_criterion_check, number_balance_check, report, stability_envelope, StabilityWeight, Verdict,
};
use lsn_core::initial::InitialDensity;
use lsn_core::nonlinear_solver::{continue_solution, SimulationResult, SolverConfig, Termination};
use lsn_core::presets::{preset, Scenario};
use lsn_core::reference_oracle::{compare, upwind_solve, GridConfig};

fn run(s: &Scenario, horizon: f64) -> SimulationResult {
    continue_solution(&SolverConfig::new(s.rho, horizon), &s.model, &s.f_in).unwrap()
}

fn sech2(t: f64) -> f64 {
    let c = (t / 2f64.sqrt()).cosh();
    1.0 / (c * c)
}

#[test]
fn sech2_moments_and_derivative() {
    let s = preset("sech2").unwrap();
    let r = run(&s, 1.5);
    assert_eq!(r.termination(), &Termination::HorizonReached(1.5));
    for row in r.series().iter().step_by(17) {
        assert!((row.u - sech2(row.t)).abs() < 1e-5, "t = {}", row.t);
        let m0 = 2f64.sqrt() * (row.t / 2f64.sqrt()).tanh();
        assert!((row.m0 - m0).abs() < 1e-5);
    }
    // off-node derivative through a snapshot: −u M0
    let t = 0.77;
    let exact = -sech2(t) * 2f64.sqrt() * (t / 2f64.sqrt()).tanh();
    assert!((r.u_derivative(t).unwrap() - exact).abs() < 1e-5);
    assert!((r.u_derivative_phi_form(t).unwrap() - exact).abs() < 1e-5);
    assert!(number_balance_check(&r).passed());
}

#[test]
fn advection_number_grows_linearly() {
    let s = preset("advection").unwrap();
    let r = run(&s, 1.0);
    for row in r.series() {
        assert_relative_eq!(row.m0, 0.5 + 0.1 * row.t, epsilon = 1e-12);
    }
    let rep = report(&r, 4, 11).unwrap();
    assert!(rep.passed(), "{rep}");
}

#[test]
fn global_regime_derivative_lower_bound() {
    let s = preset("powerlaw_global").unwrap();
    let r = run(&s, 1.0);
    assert!(r.global_guaranteed());
    let phi0 = s.model.phi0();
    for row in r.series() {
        assert!(row.du_dt >= -(row.u - phi0) * row.ma - 1e-9);
    }
}

#[test]
fn blowdown_detection_and_bound() {
    let s = preset("blowdown_exp").unwrap();
    let r = run(&s, s.horizon);
    let Termination::MaximalTimeDetected(t_max) = *r.termination() else {
        panic!("{:?}", r.termination());
    };
    let cfg = r.config();
    assert!(r.u_at(t_max) - cfg.phi0 <= cfg.stop_margin);
    // the clamp engaged somewhere and windows were cut back
    assert!(r.windows().iter().any(|w| w.first_clamped.is_some() || w.t_accepted < w.t_start + w.length));
    let v = blowdown_bound_check(&r, &s.model, 1.0);
    assert!(v.applicable && v.passed);
    assert!(t_max <= v.t_tilde);
    assert!(!global_criterion_check(&s.model).guaranteed());
}

#[test]
fn blowdown_bound_inapplicable_or_trivial() {
    let g = preset("powerlaw_global").unwrap();
    let r = run(&g, 0.5);
    assert!(!blowdown_bound_check(&r, &g.model, 1.0).applicable);
}

#[test]
fn stability_companions_on_sech2() {
    let s = preset("sech2").unwrap();
    let base = run(&s, 1.0);
    let pert = continue_solution(&SolverConfig::new(s.rho, 1.0), &s.model, &InitialDensity::indicator(1e-4, 0.5, 1.5).unwrap()).unwrap();
    let cert = base.hypotheses().h8_certificate().unwrap();
    let w = StabilityWeight::new(&s.model, cert, base.hypotheses().inflow.unwrap()).unwrap();
    let times: Vec<f64> = (0..=5).map(|k| 0.2 * k as f64).collect();
    let env = stability_envelope(&base, &pert, &times, &w).unwrap();
    assert!(env.monomer_bounded);
    assert_eq!(env.zero_tail_bounded, Some(true));
    // initial data: all three parts equal the perturbation's first moment
    let g0 = env.gaps[0];
    assert_relative_eq!(g0.monomer_gap, 1e-4, max_relative = 1e-9);
    assert_relative_eq!(g0.zero_tail_gap, 1e-4, max_relative = 1e-9);
    assert_relative_eq!(g0.weighted_tail_gap, 1e-4, max_relative = 1e-6);
    assert!(env.fitted_c.is_finite());
}

#[test]
fn oracle_comparisons() {
    let v = preset("vacuum").unwrap();
    let r = run(&v, 1.0);
    let o = upwind_solve(&v.model, v.rho, &v.f_in, &GridConfig::with_cells(400), 1.0, &[0.0, 1.0]).unwrap();
    let c = compare(&r, &o, 1.0).unwrap();
    assert_eq!((c.u_gap, c.density_l1_gap), (0.0, 0.0));

    // t = 0: only the tabulation error of the indicator remains
    let a = preset("advection").unwrap();
    let r = run(&a, 0.5);
    let grid = GridConfig { x_max: Some(20.0), cells: 2000, dt: None, cfl_safety: 0.9 };
    let o = upwind_solve(&a.model, a.rho, &a.f_in, &grid, 0.5, &[0.0, 0.5]).unwrap();
    let c0 = compare(&r, &o, 0.0).unwrap();
    assert!(c0.u_gap < 1e-12);
    assert!(c0.density_l1_gap < 1e-12);
    let c1 = compare(&r, &o, 0.5).unwrap();
    assert!(c1.u_gap < 5e-3);
    assert!(c1.density_l1_gap < 2.0 * o.dx.sqrt(), "{}", c1.density_l1_gap);
}

#[test]
fn report_lists_every_check() {
    let s = preset("sech2").unwrap();
    let r = run(&s, 0.5);
    let rep = report(&r, 2, 3).unwrap();
    for name in ["mass_balance", "number_balance", "global_criterion", "trace", "weak_form"] {
        assert!(rep.get(name).is_some(), "{name}");
    }
    assert_eq!(rep.get("global_criterion").unwrap().verdict, Verdict::Info);
    assert!(rep.passed(), "{rep}");
}
