//! Named checks over solved runs: balances, boundary trace, weak residuals,
//! the global and blow-down criteria and the tail-density stability metric.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kinetics::{log_grid, H8Certificate, H8Mode, KineticModel, HYPOTHESIS_GRID_HI, HYPOTHESIS_GRID_LO};
use crate::linear_transport::{weak_residual, Bump, DensitySnapshot};
use crate::nonlinear_solver::{SimulationResult, Termination};
use crate::quadrature::{adaptive_gk, gauss};

/// Verdict of one check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inapplicable,
    Info,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::Inapplicable => "n/a",
            Verdict::Info => "info",
        })
    }
}

/// One line of a diagnostic report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub verdict: Verdict,
    /// Measured quantity (a deviation, a residual, a gap).
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn bounded(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            verdict: if value <= tolerance { Verdict::Pass } else { Verdict::Fail },
            value,
            tolerance,
            detail,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

/// A list of checks, printable one per line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticReport {
    pub checks: Vec<CheckResult>,
}

impl DiagnosticReport {
    pub fn push(&mut self, c: CheckResult) {
        self.checks.push(c);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for DiagnosticReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{:<22} {:<4} value={:.6e} tol={:.6e} {}", c.name, c.verdict, c.value, c.tolerance, c.detail)?;
        }
        Ok(())
    }
}

/// sup_t |M0(t) − M0(0) − ∫₀ᵗ 𝔫(u)|.
pub fn number_balance_check(result: &SimulationResult) -> CheckResult {
    let series = result.series();
    let model = result.model();
    let path = result.path();
    let m00 = series[0].m0;
    let mut worst = 0.0f64;
    let mut acc = 0.0;
    for w in series.windows(2) {
        acc += path.integrate(|u| model.nucleation(u), w[0].t, w[1].t);
        worst = worst.max((w[1].m0 - m00 - acc).abs());
    }
    CheckResult::bounded("number_balance", worst, 1e-6 * (1.0 + m00), format!("{} nodes", series.len()))
}

/// sup_t |u(t) + M1(t) − ρ|.
pub fn mass_balance_check(result: &SimulationResult) -> CheckResult {
    let rho = result.config().rho;
    let worst = result.series().iter().map(|r| (r.u + r.m1 - rho).abs()).fold(0.0, f64::max);
    CheckResult::bounded("mass_balance", worst, 2.0 * result.config().fp_tolerance, format!("rho={rho:.6e}"))
}

/// Sampled minimum of Φ − Φ₀ over the hypothesis grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalVerdict {
    pub min_gap: f64,
    pub argmin: f64,
}

impl GlobalVerdict {
    /// Φ ≥ Φ₀ on every sample.
    pub fn guaranteed(&self) -> bool {
        self.min_gap >= 0.0
    }
}

/// Global existence holds when Φ ≥ Φ₀ everywhere.
pub fn global_criterion_check(model: &KineticModel) -> GlobalVerdict {
    let phi0 = model.phi0();
    let mut best = GlobalVerdict { min_gap: f64::INFINITY, argmin: f64::NAN };
    for x in log_grid(HYPOTHESIS_GRID_LO, HYPOTHESIS_GRID_HI, 512) {
        let g = match model.phi(x) {
            Ok(p) if phi0.is_finite() => {
                // power-law ratios equal to Φ₀ up to rounding count as equal
                let d = p - phi0;
                if d.abs() <= 1e-14 * phi0.abs().max(1.0) {
                    0.0
                } else {
                    d
                }
            }
            Ok(_) => f64::NEG_INFINITY,
            Err(_) => f64::NAN,
        };
        if g < best.min_gap || g.is_nan() {
            best = GlobalVerdict { min_gap: g, argmin: x };
            if g.is_nan() {
                break;
            }
        }
    }
    best
}

/// Outcome of the logarithmic blow-down bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowdownVerdict {
    pub applicable: bool,
    pub reason: String,
    pub k: f64,
    pub a_lower: f64,
    pub a_upper: f64,
    /// max_t [u(t) − bound(t)]; nonpositive when the bound holds.
    pub max_excess: f64,
    pub monotone: bool,
    /// Root T̃ of bound(t) = Φ₀.
    pub t_tilde: f64,
    pub passed: bool,
}

impl BlowdownVerdict {
    fn inapplicable(reason: impl Into<String>) -> Self {
        BlowdownVerdict {
            applicable: false,
            reason: reason.into(),
            k: 0.0,
            a_lower: 0.0,
            a_upper: 0.0,
            max_excess: 0.0,
            monotone: true,
            t_tilde: f64::INFINITY,
            passed: true,
        }
    }

    /// u(0) − (K/ā)·ln(1 + ā t/x₀).
    pub fn bound(&self, u0: f64, x0: f64, t: f64) -> f64 {
        u0 - self.k / self.a_upper * (1.0 + self.a_upper * t / x0).ln()
    }
}

/// Checks u(t) ≤ u(0) − (K/ā) ln(1 + ā t/x₀) with
/// K = a̲ (Φ₀ − Φ(x₀)) (ρ − u(0)), for compactly supported data, convex
/// strictly decreasing Φ and a bounded between two positive constants.
pub fn blowdown_bound_check(result: &SimulationResult, model: &KineticModel, x0: f64) -> BlowdownVerdict {
    let phi0 = model.phi0();
    if !phi0.is_finite() {
        return BlowdownVerdict::inapplicable("phi0 is infinite");
    }
    if global_criterion_check(model).guaranteed() {
        return BlowdownVerdict::inapplicable("global existence criterion holds");
    }
    if result.initial().support_max() > x0 * (1.0 + 1e-12) {
        return BlowdownVerdict::inapplicable(format!("initial support exceeds x0 = {x0}"));
    }
    let grid = log_grid(HYPOTHESIS_GRID_LO, HYPOTHESIS_GRID_HI, 512);
    let phis: Vec<f64> = grid.iter().map(|&x| model.phi(x).unwrap_or(f64::NAN)).collect();
    if phis.iter().any(|p| !p.is_finite()) {
        return BlowdownVerdict::inapplicable("phi not finite on the grid");
    }
    // slopes of rounded samples carry errors of order ε|Φ|/Δx
    let eps = 8.0 * f64::EPSILON;
    let decreasing = phis.windows(2).all(|w| w[1] <= w[0] + eps * w[0].abs());
    let strictly = phis.first() > phis.last();
    let convex = grid.windows(3).zip(phis.windows(3)).all(|(x, p)| {
        let (h1, h2) = (x[1] - x[0], x[2] - x[1]);
        let s1 = (p[1] - p[0]) / h1;
        let s2 = (p[2] - p[1]) / h2;
        let noise = eps * (p[0].abs() + p[1].abs() + p[2].abs()) / h1.min(h2);
        s2 >= s1 - noise
    });
    if !(decreasing && strictly && convex) {
        return BlowdownVerdict::inapplicable("phi is not convex and strictly decreasing on the grid");
    }
    let avals: Vec<f64> = grid.iter().map(|&x| model.a(x)).collect();
    let amin = avals.iter().copied().fold(f64::INFINITY, f64::min).min(model.a(0.0));
    let amax = avals.iter().copied().fold(0.0, f64::max).max(model.a(0.0));
    if !(amin > 0.0 && amax.is_finite()) {
        return BlowdownVerdict::inapplicable("a is not bounded between positive constants");
    }
    let a_lower = amin * (1.0 - 1e-9);
    let a_upper = amax * (1.0 + 1e-9);
    let rho = result.config().rho;
    let series = result.series();
    let u0 = series[0].u;
    let k = a_lower * (phi0 - model.phi(x0).unwrap_or(f64::NAN)) * (rho - u0);
    let mut v = BlowdownVerdict {
        applicable: true,
        reason: String::new(),
        k,
        a_lower,
        a_upper,
        max_excess: f64::NEG_INFINITY,
        monotone: true,
        t_tilde: f64::INFINITY,
        passed: false,
    };
    for r in series {
        v.max_excess = v.max_excess.max(r.u - v.bound(u0, x0, r.t));
    }
    v.monotone = series.windows(2).all(|w| w[1].u <= w[0].u + 1e-12);
    if k > 0.0 {
        // bound(T̃) = Φ₀
        v.t_tilde = x0 / a_upper * (((u0 - phi0) * a_upper / k).exp() - 1.0);
    }
    v.passed = v.max_excess <= 0.0 && v.monotone;
    v
}

/// The uniqueness weight φ of the tail-density metric.
#[derive(Debug, Clone)]
pub struct StabilityWeight {
    pub x_bar: f64,
    pub mode: H8Mode,
    pub c: f64,
    pub delta: f64,
    model: KineticModel,
    /// Exponent table for the H8b form on (0, x̄].
    table: Vec<(f64, f64)>,
}

impl StabilityWeight {
    /// Builds φ from an H8 certificate; `inflow` gives (x₀, δ).
    pub fn new(model: &KineticModel, cert: H8Certificate, inflow: (f64, f64)) -> Result<Self> {
        let (x0, delta) = inflow;
        let x_bar = cert.x_star.min(x0);
        if !(x_bar > 0.0 && delta > 0.0) {
            return Err(Error::InvalidParameter("weight needs positive x_bar and delta".into()));
        }
        let mut w = StabilityWeight { x_bar, mode: cert.mode, c: cert.c, delta, model: model.clone(), table: Vec::new() };
        if cert.mode == H8Mode::H8b {
            // E(x) = −∫ₓ^x̄ (C/a + Φ')/δ on a log grid, integrated from x̄ down
            let xs = log_grid(1e-12 * x_bar, x_bar, 400);
            let g = |y: f64| w.integrand(y);
            let mut acc = 0.0;
            let mut table = vec![(x_bar, 0.0)];
            for i in (0..xs.len() - 1).rev() {
                let seg = adaptive_gk(g, xs[i], xs[i + 1], 1e-14, 1e-12, 200)?;
                acc -= seg.value;
                table.push((xs[i], acc));
            }
            table.reverse();
            w.table = table;
        }
        Ok(w)
    }

    fn exponent(&self, x: f64) -> f64 {
        if self.table.is_empty() || x >= self.x_bar {
            return 0.0;
        }
        let t = &self.table;
        if x <= t[0].0 {
            return t[0].1;
        }
        let i = t.partition_point(|p| p.0 <= x).clamp(1, t.len() - 1) - 1;
        // E(x) = E(x₂) − ∫ₓ^x₂ g
        let (x2, e2) = t[i + 1];
        e2 - gauss(8).integrate(x, x2, |y| self.integrand(y))
    }

    fn integrand(&self, y: f64) -> f64 {
        let m = &self.model;
        let a = m.a(y);
        (self.c / a + m.b_prime(y) / a - m.b(y) * m.a_prime(y) / (a * a)) / self.delta
    }

    pub fn eval(&self, x: f64) -> f64 {
        let m = &self.model;
        if x > self.x_bar {
            return 1.0 / m.a(self.x_bar);
        }
        match self.mode {
            H8Mode::H8a => 1.0 / m.a(x),
            H8Mode::H8b => self.exponent(x).exp() / m.a(x),
        }
    }
}

/// Gaps between two runs at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityGaps {
    /// ∫ φ |E(t, x)| dx.
    pub weighted_tail_gap: f64,
    /// |w(t)| = |u₁(t) − u₂(t)|.
    pub monomer_gap: f64,
    /// |E(t, 0)|.
    pub zero_tail_gap: f64,
    /// ∫ |E(t, x)| dx.
    pub tail_l1_gap: f64,
}

impl StabilityGaps {
    /// |w| + |E(t,0)| + ∫φ|E|.
    pub fn combined(&self) -> f64 {
        self.monomer_gap + self.zero_tail_gap + self.weighted_tail_gap
    }
}

const GAP_PANEL: f64 = 0.25;

/// Tail-density distance between two runs of the same model at time t.
pub fn stability_distance(r1: &SimulationResult, r2: &SimulationResult, t: f64, weight: &StabilityWeight) -> Result<StabilityGaps> {
    let s1 = r1.snapshot(t)?;
    let s2 = r2.snapshot(t)?;
    let monomer_gap = (r1.u_at(t) - r2.u_at(t)).abs();
    let zero_tail_gap = (s1.tail(0.0)? - s2.tail(0.0)?).abs();
    let x_hi = support_end(&s1)?.max(support_end(&s2)?);
    let mut cuts = vec![0.0, x_hi, weight.x_bar];
    for s in [&s1, &s2] {
        cuts.push(s.x_c());
        for b in s.initial().breakpoints() {
            if b > 0.0 && t > r1.path().t_start() {
                cuts.push(s.characteristics().x_at(t, s.characteristics().path().t_start(), b)?);
            } else {
                cuts.push(b);
            }
        }
    }
    cuts.retain(|&c| c >= 0.0 && c <= x_hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let rule = gauss(16);
    let (mut weighted, mut l1) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let n = ((hi - lo) / GAP_PANEL).ceil().max(1.0) as usize;
        for i in 0..n {
            let a = lo + (hi - lo) * i as f64 / n as f64;
            let b = lo + (hi - lo) * (i + 1) as f64 / n as f64;
            for (x, wt) in rule.mapped(a, b) {
                let e = (s1.tail(x)? - s2.tail(x)?).abs();
                l1 += wt * e;
                weighted += wt * weight.eval(x) * e;
            }
        }
    }
    Ok(StabilityGaps { weighted_tail_gap: weighted, monomer_gap, zero_tail_gap, tail_l1_gap: l1 })
}

/// Companion inequalities of the tail-density metric along a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityEnvelope {
    pub times: Vec<f64>,
    pub gaps: Vec<StabilityGaps>,
    /// |w(t)| ≤ ∫|E(t, x)| dx at every time.
    pub monomer_bounded: bool,
    /// |E(t,0)| ≤ |E(0,0)| + K_n ∫₀ᵗ|w|; None without a declared Lipschitz constant.
    pub zero_tail_bounded: Option<bool>,
    /// Smallest C ≥ 0 with D(t) ≤ D(0)·e^{Ct} on the grid.
    pub fitted_c: f64,
}

pub fn stability_envelope(
    r1: &SimulationResult,
    r2: &SimulationResult,
    times: &[f64],
    weight: &StabilityWeight,
) -> Result<StabilityEnvelope> {
    let gaps = times.iter().map(|&t| stability_distance(r1, r2, t, weight)).collect::<Result<Vec<_>>>()?;
    // u matches ρ − M1 only to the fixed-point tolerance of each run
    let fp = r1.config().fp_tolerance + r2.config().fp_tolerance;
    let slack = |v: f64| v * (1.0 + 1e-9) + fp;
    let monomer_bounded = gaps.iter().all(|g| g.monomer_gap <= slack(g.tail_l1_gap));
    let t0 = r1.path().t_start();
    let e00 = (r1.snapshot(t0)?.tail(0.0)? - r2.snapshot(t0)?.tail(0.0)?).abs();
    let zero_tail_bounded = r1.model().nucleation_law().declared_lipschitz().map(|k| {
        times.iter().zip(&gaps).all(|(&t, g)| {
            let mut cuts: Vec<f64> = r1.path().times().iter().chain(r2.path().times()).copied().filter(|&s| s > t0 && s < t).collect();
            cuts.push(t0);
            cuts.push(t);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let w_int: f64 = cuts
                .windows(2)
                .map(|c| gauss(4).integrate(c[0], c[1], |s| (r1.u_at(s) - r2.u_at(s)).abs()))
                .sum();
            g.zero_tail_gap <= slack(e00 + k * w_int)
        })
    });
    let d0 = gaps.first().map(StabilityGaps::combined).unwrap_or(0.0);
    let mut fitted_c = 0.0f64;
    if d0 > 0.0 {
        for (&t, g) in times.iter().zip(&gaps) {
            if t > t0 {
                fitted_c = fitted_c.max((g.combined() / d0).ln() / (t - t0));
            }
        }
    }
    Ok(StabilityEnvelope { times: times.to_vec(), gaps, monomer_bounded, zero_tail_bounded, fitted_c })
}

fn support_end(s: &DensitySnapshot) -> Result<f64> {
    Ok(s.carriers()?.iter().map(|c| c.x).fold(s.x_c(), f64::max) * (1.0 + 1e-9))
}

/// Largest time covered by the weak-form test functions.
pub const WEAK_T_MAX: f64 = 2.0;

/// Deterministic bump test functions over [0, T'] × [0, x_scale], cycling
/// through interior, boundary-touching, initial-touching and corner bumps.
pub fn weak_test_functions(n: usize, t_max: f64, x_scale: f64, seed: u64) -> Vec<Bump> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let t_radius = t_max * rng.random_range(0.15..0.4);
            let x_radius = x_scale * rng.random_range(0.2..0.5);
            let t_center = match i % 4 {
                0 | 1 => rng.random_range(t_radius..(t_max - t_radius)),
                _ => rng.random_range(-0.5 * t_radius..0.5 * t_radius),
            };
            let x_center = match i % 4 {
                0 | 2 => rng.random_range(x_radius..(x_scale + x_radius)),
                _ => rng.random_range(-0.5 * x_radius..0.5 * x_radius),
            };
            let amplitude = rng.random_range(0.5..2.0);
            Bump { t_center, t_radius, x_center, x_radius, amplitude }
        })
        .collect()
}

/// Max normalized weak residual over `n` seeded bumps with t ≤ min(T_end, 2).
pub fn weakform_suite(result: &SimulationResult, n: usize, seed: u64) -> Result<CheckResult> {
    let t_max = result.t_end().min(WEAK_T_MAX);
    let cs = result.characteristics()?;
    let snap = result.snapshot(t_max)?;
    let x_scale = support_end(&snap)?.max(1.0);
    let mut worst = 0.0f64;
    let mut worst_i = 0;
    for (i, bump) in weak_test_functions(n, t_max, x_scale, seed).iter().enumerate() {
        let r = weak_residual(&cs, result.initial(), bump)?;
        if r.normalized > worst {
            worst = r.normalized;
            worst_i = i;
        }
    }
    Ok(CheckResult::bounded(
        "weak_form",
        worst,
        1e-5,
        format!("{n} bumps on [0, {t_max:.3}] x [0, {x_scale:.3}], worst #{worst_i}"),
    ))
}

/// Trace of v·f at 0⁺ against 𝔫(u(t)) at the given times.
pub fn trace_check(result: &SimulationResult, times: &[f64]) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for &t in times {
        let snap = result.snapshot(t)?;
        let tr = snap.trace_flux()?;
        let n = result.model().nucleation(result.u_at(t));
        worst = worst.max((tr.value - n).abs() / (1.0 + n.abs()));
    }
    Ok(CheckResult::bounded("trace", worst, 1e-5, format!("{} times, relative to 1 + n(u)", times.len())))
}

/// Standard checks of a run.
pub fn report(result: &SimulationResult, n_testfns: usize, seed: u64) -> Result<DiagnosticReport> {
    let mut rep = DiagnosticReport::default();
    rep.push(mass_balance_check(result));
    rep.push(number_balance_check(result));
    let g = global_criterion_check(result.model());
    rep.push(CheckResult {
        name: "global_criterion".into(),
        verdict: Verdict::Info,
        value: g.min_gap,
        tolerance: 0.0,
        detail: if g.guaranteed() { "global-guaranteed".into() } else { format!("not guaranteed (x = {:.3e})", g.argmin) },
    });
    let t_end = result.t_end();
    if t_end > 0.0 && result.model().nucleation_law().declared_lipschitz() != Some(0.0) {
        let times: Vec<f64> = (1..=4).map(|i| t_end * i as f64 / 4.0).collect();
        rep.push(trace_check(result, &times)?);
    }
    if n_testfns > 0 && t_end > 0.0 {
        rep.push(weakform_suite(result, n_testfns, seed)?);
    }
    if let Termination::Failed { at, reason } = result.termination() {
        rep.push(CheckResult {
            name: "termination".into(),
            verdict: Verdict::Fail,
            value: *at,
            tolerance: 0.0,
            detail: reason.clone(),
        });
    }
    Ok(rep)
}
