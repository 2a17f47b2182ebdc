//! Grid-based checks of the standing hypotheses on {a, b, n, f_in, ρ}.
//!
//! A pass means no counterexample was found on the sample grids.

use std::fmt;

use super::{log_grid, FamilyTag, KineticModel};
use crate::initial::InitialDensity;
use crate::quadrature::adaptive_gk;

pub const HYPOTHESIS_GRID_LO: f64 = 1e-8;
pub const HYPOTHESIS_GRID_HI: f64 = 1e4;
const GRID_POINTS: usize = 512;
const UNIT_POINTS: usize = 128;
const GK_ABS: f64 = 1e-10;

/// Outcome of one hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    /// Required for existence; informational otherwise.
    pub required: bool,
    pub samples: usize,
    pub range: (f64, f64),
    /// Worst-case slack on the samples (positive when the check holds).
    pub margin: f64,
    pub detail: String,
}

/// Which uniqueness alternative certified the weight function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum H8Mode {
    H8a,
    H8b,
}

/// Constants certifying −Φ'·a < C (H8a) or −Φ'·a > C (H8b) on (0, x*).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H8Certificate {
    pub mode: H8Mode,
    pub c: f64,
    pub x_star: f64,
}

/// Full report over all hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    pub rho: f64,
    pub u_in: f64,
    pub phi0: f64,
    /// Estimated Lipschitz constant of n on [Φ₀, ρ].
    pub nucleation_lipschitz: Option<f64>,
    pub h8a: Option<H8Certificate>,
    pub h8b: Option<H8Certificate>,
    /// x₀ and δ with u_in − Φ ≥ 2δ on (0, x₀).
    pub inflow: Option<(f64, f64)>,
}

impl HypothesisReport {
    /// True when every required check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.required)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&HypothesisCheck> {
        self.checks.iter().filter(|c| c.required && !c.passed).collect()
    }

    /// Preferred uniqueness weight: H8a when available.
    pub fn h8_certificate(&self) -> Option<H8Certificate> {
        self.h8a.or(self.h8b)
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<14} {:<4} {:<13} samples={:<5} range=[{:.3e}, {:.3e}] margin={:.6e} {}",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                if c.required { "required" } else { "informational" },
                c.samples,
                c.range.0,
                c.range.1,
                c.margin,
                c.detail
            )?;
        }
        write!(f, "u_in={:.12e} phi0={:.12e}", self.u_in, self.phi0)
    }
}

struct Builder {
    checks: Vec<HypothesisCheck>,
}

impl Builder {
    fn push(&mut self, name: &str, passed: bool, required: bool, samples: usize, range: (f64, f64), margin: f64, detail: String) {
        self.checks.push(HypothesisCheck {
            name: name.to_string(),
            passed,
            required,
            samples,
            range,
            margin,
            detail,
        });
    }
}

fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-6 * x;
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Largest x₀ = 2^{−k} with u − sup_{(0,x₀]} Φ > 0, and δ = half that gap.
pub(crate) fn inflow_scan(model: &KineticModel, u_min: f64) -> Option<(f64, f64)> {
    let phi0 = model.phi0();
    if !phi0.is_finite() {
        return None;
    }
    let mut x0: f64 = 1.0;
    while x0 >= 1e-12 {
        let mut sup = phi0;
        for i in 0..=64 {
            let x = x0 * (1e-8f64).powf(i as f64 / 64.0);
            let p = model.phi_fast(x);
            if !p.is_finite() {
                sup = f64::INFINITY;
                break;
            }
            sup = sup.max(p);
        }
        let gap = u_min - sup;
        if gap > 0.0 {
            return Some((x0, 0.5 * gap));
        }
        x0 *= 0.5;
    }
    None
}

fn aitken_limit(s: &[f64]) -> f64 {
    let n = s.len();
    let (a, b, c) = (s[n - 3], s[n - 2], s[n - 1]);
    let den = c - 2.0 * b + a;
    if den.abs() <= 1e-300 || !den.is_finite() {
        c
    } else {
        c - (c - b) * (c - b) / den
    }
}

/// Checks every hypothesis on deterministic grids.
pub fn validate_hypotheses(model: &KineticModel, rho: f64, f_in: &InitialDensity) -> HypothesisReport {
    let mut b = Builder { checks: Vec::new() };
    let grid = log_grid(HYPOTHESIS_GRID_LO, HYPOTHESIS_GRID_HI, GRID_POINTS);
    let range = (HYPOTHESIS_GRID_LO, HYPOTHESIS_GRID_HI);
    let phi0 = model.phi0();
    let kr = model.sublinearity_constant();

    // H1: finite, nonnegative rates with a > 0.
    let mut worst_a = f64::INFINITY;
    let mut h1 = true;
    for &x in &grid {
        let (ax, bx) = (model.a(x), model.b(x));
        if !(ax.is_finite() && bx.is_finite() && bx >= 0.0) {
            h1 = false;
        }
        worst_a = worst_a.min(ax);
    }
    h1 &= worst_a > 0.0;
    b.push("H1", h1, true, grid.len(), range, worst_a, "min a on grid".into());

    // Sublinearity a + b ≤ K_r(1 + x).
    let mut sub_margin = f64::INFINITY;
    for &x in &grid {
        sub_margin = sub_margin.min(kr * (1.0 + x) - model.a(x) - model.b(x));
    }
    let sub_ok = sub_margin >= -1e-12 * kr;
    b.push("sublinearity", sub_ok, true, grid.len(), range, sub_margin, format!("K_r={kr:.6e}"));

    // H2: a', b' bounded on (1, ∞), tested by comparing the last decade with the rest.
    let tail: Vec<f64> = grid.iter().copied().filter(|&x| x > 1.0).collect();
    let dmax = |lo: f64, hi: f64| {
        tail.iter()
            .filter(|&&x| x > lo && x <= hi)
            .map(|&x| fd(|s| model.a(s), x).abs().max(fd(|s| model.b(s), x).abs()))
            .fold(0.0, f64::max)
    };
    let inner = dmax(1.0, 1e3);
    let outer = dmax(1e3, 1e4);
    let h2 = outer.is_finite() && inner.is_finite() && outer <= 2.0 * inner + 1e-12;
    b.push("H2", h2, true, tail.len(), (1.0, HYPOTHESIS_GRID_HI), 2.0 * inner + 1e-12 - outer,
        format!("max |a'|,|b'| on (1,1e3]={inner:.3e}, on (1e3,1e4]={outer:.3e}"));

    // H3: 1/a integrable on (0, 1).
    let inv_a = adaptive_gk(|x| if x > 0.0 { 1.0 / model.a(x) } else { 0.0 }, 0.0, 1.0, GK_ABS, 0.0, 4000);
    let (h3, h3_val) = match &inv_a {
        Ok(e) => (e.value.is_finite() && model.a_integrable(), e.value),
        Err(_) => (false, f64::INFINITY),
    };
    b.push("H3", h3, true, UNIT_POINTS, (0.0, 1.0), if h3 { h3_val } else { f64::NEG_INFINITY },
        format!("int_0^1 1/a = {h3_val:.6e}"));

    // H4: Φ' integrable on (0, 1).
    let phi_p = |x: f64| if x > 0.0 { model.a_phi_prime(x) / model.a(x) } else { 0.0 };
    let h4_est = adaptive_gk(|x| phi_p(x).abs(), 0.0, 1.0, GK_ABS, 0.0, 4000);
    let (h4, h4_val) = match &h4_est {
        Ok(e) => (e.value.is_finite(), e.value),
        Err(_) => (false, f64::INFINITY),
    };
    b.push("H4", h4, true, UNIT_POINTS, (0.0, 1.0), if h4 { h4_val } else { f64::NEG_INFINITY },
        format!("int_0^1 |phi'| = {h4_val:.6e}"));

    // H5 / H5': continuity and Lipschitz estimate of n on [Φ₀, ρ].
    let mut k_n = None;
    if phi0.is_finite() && rho > phi0 {
        let lip = |n: usize| {
            let mut k: f64 = 0.0;
            let mut finite = true;
            let mut prev = model.nucleation(phi0);
            for i in 1..=n {
                let u = phi0 + (rho - phi0) * i as f64 / n as f64;
                let v = model.nucleation(u);
                finite &= v.is_finite() && v >= 0.0;
                k = k.max((v - prev).abs() * n as f64 / (rho - phi0));
                prev = v;
            }
            (finite && prev.is_finite(), k)
        };
        let (fin, k1) = lip(256);
        let (_, k2) = lip(1024);
        b.push("H5", fin, true, 1025, (phi0, rho), if fin { 0.0 } else { -1.0 }, "n finite and nonnegative".into());
        let lipschitz = fin && k2 <= 2.0 * k1 + 1e-12;
        b.push("H5'", lipschitz, false, 1025, (phi0, rho), 2.0 * k1 + 1e-12 - k2, format!("K_n ~ {k2:.6e}"));
        if lipschitz {
            k_n = Some(model.nucleation_law().declared_lipschitz().unwrap_or(k2));
        }
    } else {
        b.push("H5", false, true, 0, (phi0, rho), f64::NEG_INFINITY, "interval [phi0, rho] is empty".into());
    }

    // H6: f_in ≥ 0 with finite M0, M1.
    let nodes = f_in.quadrature_nodes(8, 16);
    let min_f = nodes.iter().map(|&(x, _)| f_in.eval(x)).fold(0.0, f64::min);
    let h6 = min_f >= 0.0 && f_in.m0().is_finite() && f_in.m1().is_finite();
    b.push("H6", h6, true, nodes.len(), (0.0, f_in.support_max()), min_f,
        format!("M0={:.6e} M1={:.6e}", f_in.m0(), f_in.m1()));

    // H7: u_in > Φ₀.
    let u_in = rho - f_in.m1();
    let h7 = u_in > phi0;
    b.push("H7", h7, true, 1, (0.0, 0.0), u_in - phi0, format!("u_in={u_in:.6e} phi0={phi0:.6e}"));

    // Φ₀ cross-check for user-declared limits.
    if matches!(model.family(), FamilyTag::Custom { .. }) && phi0.is_finite() {
        let seq: Vec<f64> = [1e-6, 1e-8, 1e-10, 1e-12].iter().map(|&x| model.phi_fast(x)).collect();
        let lim = aitken_limit(&seq);
        let mism = (lim - phi0).abs();
        b.push("phi0_limit", mism <= 1e-6, true, seq.len(), (1e-12, 1e-6), 1e-6 - mism,
            format!("numerical limit {lim:.9e} vs declared {phi0:.9e}"));
    }

    // H8: Φ monotone near 0, and the H8a/H8b alternatives.
    let mut h8_xstar = None;
    for k in 0..8 {
        let xs = 10f64.powi(-k);
        let pts: Vec<f64> = grid.iter().copied().filter(|&x| x < xs).collect();
        if pts.len() < 8 {
            break;
        }
        let vals: Vec<f64> = pts.iter().map(|&x| model.phi_fast(x)).collect();
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let tol = 1e-13 * scale;
        let up = vals.windows(2).all(|w| w[1] >= w[0] - tol);
        let down = vals.windows(2).all(|w| w[1] <= w[0] + tol);
        if up || down {
            h8_xstar = Some(xs);
            break;
        }
    }
    b.push("H8", h8_xstar.is_some(), false, GRID_POINTS, range, h8_xstar.unwrap_or(0.0),
        match h8_xstar { Some(x) => format!("monotone on (0,{x:.1e})"), None => "no monotone neighbourhood found".into() });

    let x_star = h8_xstar.unwrap_or(1.0);
    let near: Vec<f64> = grid.iter().copied().filter(|&x| x < x_star).collect();
    let g: Vec<f64> = near.iter().map(|&x| -model.a_phi_prime(x)).collect();
    let (mut h8a, mut h8b) = (None, None);
    if !g.is_empty() && g.iter().all(|v| v.is_finite()) {
        let sup = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let inf = g.iter().copied().fold(f64::INFINITY, f64::min);
        // Bounded above unless the first decade dominates the rest.
        let first_decade = near.iter().zip(&g).filter(|(x, _)| **x < 10.0 * HYPOTHESIS_GRID_LO).map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
        let rest = near.iter().zip(&g).filter(|(x, _)| **x >= 10.0 * HYPOTHESIS_GRID_LO).map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
        let bounded = sup <= 0.0 || rest <= 0.0 || first_decade <= 10.0 * rest.max(0.0) + 1e-12;
        let c_a = sup.max(0.0) * 1.1 + 1e-9;
        b.push("H8a", bounded, false, near.len(), (HYPOTHESIS_GRID_LO, x_star), c_a - sup,
            format!("sup -phi'*a = {sup:.6e}, C = {c_a:.6e}"));
        if bounded {
            h8a = Some(H8Certificate { mode: H8Mode::H8a, c: c_a, x_star });
        }
        let ok_b = inf > 0.0;
        let c_b = 0.5 * inf;
        b.push("H8b", ok_b, false, near.len(), (HYPOTHESIS_GRID_LO, x_star), inf - c_b,
            format!("inf -phi'*a = {inf:.6e}, C = {c_b:.6e}"));
        if ok_b {
            h8b = Some(H8Certificate { mode: H8Mode::H8b, c: c_b, x_star });
        }
    } else {
        b.push("H8a", false, false, 0, range, f64::NEG_INFINITY, "phi' not finite near 0".into());
        b.push("H8b", false, false, 0, range, f64::NEG_INFINITY, "phi' not finite near 0".into());
    }

    // Annex assumptions for the linear transport problem with u ∈ [Φ₀, ρ].
    let k_a1 = grid.iter().map(|&x| (model.a(x) * rho + model.b(x)) / (1.0 + x)).fold(0.0, f64::max);
    b.push("A1", k_a1.is_finite(), true, grid.len(), range, k_a1, format!("|v| <= {k_a1:.6e}(1+x)"));
    let away: Vec<f64> = grid.iter().copied().filter(|&x| x >= 1e-2).collect();
    let dvmax = away.iter().map(|&x| model.a_prime(x).abs() * rho + model.b_prime(x).abs()).fold(0.0, f64::max);
    b.push("A2", dvmax.is_finite(), true, away.len(), (1e-2, HYPOTHESIS_GRID_HI), dvmax, "sup |dv/dx| away from 0".into());
    b.push("A3", worst_a > 0.0, true, grid.len(), range, worst_a, "a > 0".into());
    let phi_fin = grid.iter().all(|&x| model.phi_fast(x).is_finite() && phi_p(x).is_finite());
    b.push("A4", phi_fin, true, grid.len(), range, 0.0, "w and dw/dx finite".into());
    let a5 = if h3 {
        let grow = model.a_fast(HYPOTHESIS_GRID_HI) - model.a_fast(1.0);
        let need = ((1.0 + HYPOTHESIS_GRID_HI) / 2.0).ln() / kr;
        (grow >= need * (1.0 - 1e-9), grow - need)
    } else {
        (false, f64::NEG_INFINITY)
    };
    b.push("A5", a5.0, true, 2, (1.0, HYPOTHESIS_GRID_HI), a5.1, "1/a integrable and A unbounded".into());
    b.push("A6", h4, true, UNIT_POINTS, (0.0, 1.0), if h4 { h4_val } else { f64::NEG_INFINITY }, "dw/dx integrable".into());
    let inflow = if h7 { inflow_scan(model, u_in) } else { None };
    match inflow {
        Some((x0, d)) => b.push("A7", true, true, 65, (0.0, x0), d, format!("w >= {:.6e} on (0,{x0:.3e})", 2.0 * d)),
        None => b.push("A7", false, true, 65, (0.0, 1.0), f64::NEG_INFINITY, "no inflow neighbourhood".into()),
    }

    HypothesisReport {
        checks: b.checks,
        rho,
        u_in,
        phi0,
        nucleation_lipschitz: k_n,
        h8a,
        h8b,
        inflow,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{make_classical_ls, make_exp_detachment, make_power_law, Nucleation};

    #[test]
    fn power_law_passes() {
        let m = make_power_law(1.0, 1.0 / 3.0, 1.0, 1.0, Nucleation::power(1.0, 1.0)).unwrap();
        let r = validate_hypotheses(&m, 1.0, &InitialDensity::zero());
        assert!(r.passed(), "{r}");
        assert_eq!(r.u_in, 1.0);
        assert_eq!(r.phi0, 0.0);
    }

    #[test]
    fn exp_detachment_certifies_h8b() {
        let m = make_exp_detachment(1.0, 1.0, 1.0, Nucleation::power(1.0, 1.0)).unwrap();
        let r = validate_hypotheses(&m, 2.0, &InitialDensity::zero());
        assert!(r.passed(), "{r}");
        assert_eq!(r.u_in, 2.0);
        let cert = r.h8b.expect("H8b certificate");
        // -phi'·a = e^{-x} ≥ e^{-x*} on (0, x*)
        assert!(cert.c > 0.0 && cert.c < (-cert.x_star).exp());
    }

    #[test]
    fn negative_monomer_fails_h7() {
        let m = make_power_law(1.0, 1.0 / 3.0, 1.0, 1.0, Nucleation::power(1.0, 1.0)).unwrap();
        // ∫ x f_in = 1.2 · ∫_0^1 x dx = 0.6
        let f = InitialDensity::indicator(1.2, 0.0, 1.0).unwrap();
        let r = validate_hypotheses(&m, 0.5, &f);
        assert!(!r.passed());
        assert!(!r.get("H7").unwrap().passed);
        assert!(r.u_in < 0.0);
    }

    #[test]
    fn classical_rates_fail() {
        let m = make_classical_ls(Nucleation::constant(1.0));
        let r = validate_hypotheses(&m, 1.0, &InitialDensity::zero());
        assert!(!r.passed());
        assert!(!r.get("H7").unwrap().passed);
    }

    #[test]
    fn inflow_scan_halves_until_gap() {
        let m = make_power_law(1.0, 0.0, 1.0, 1.0, Nucleation::constant(0.0)).unwrap();
        // Φ(x) = x, u = 0.3: need x0 < 0.3
        let (x0, d) = inflow_scan(&m, 0.3).unwrap();
        assert_eq!(x0, 0.25);
        assert!((d - 0.025).abs() < 1e-12);
    }
}
