//! Density f(t, ·) of the linear transport problem for a fixed monomer path:
//! pointwise values from the representation formula, pushforward moments,
//! the boundary trace and weak-form residuals.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::characteristics::CharacteristicSolution;
use crate::error::{Error, Result};
use crate::initial::{panel_breaks, InitialDensity, Piece};
use crate::quadrature::gauss;

/// Relative width of the band around x_c(t) where the branch is ambiguous.
pub const BRANCH_BAND: f64 = 1e-10;

/// Gauss nodes per path interval for boundary-launched mass.
const LAUNCH_ORDER: usize = 3;

/// Which part of the representation formula produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Transported initial datum (x > x_c(t)).
    Initial,
    /// Mass that entered through the boundary (x < x_c(t)).
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySample {
    pub value: f64,
    pub branch: Branch,
    /// Set when x lies in the ambiguous band around x_c(t).
    pub flagged: bool,
}

/// One transported quadrature node: position at the snapshot time and the
/// mass it carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carrier {
    pub x: f64,
    pub weight: f64,
    pub branch: Branch,
}

/// f(t, ·) for the path and initial datum of a characteristic solution.
#[derive(Debug)]
pub struct DensitySnapshot {
    t: f64,
    cs: Arc<CharacteristicSolution>,
    f_in: Arc<InitialDensity>,
    x_c: f64,
    carriers: OnceLock<Vec<Carrier>>,
}

impl DensitySnapshot {
    /// `f_in` is the density at the path's start time.
    pub fn new(cs: Arc<CharacteristicSolution>, f_in: Arc<InitialDensity>, t: f64) -> Result<Self> {
        let path = cs.path();
        if !(t >= path.t_start() && t <= path.t_end()) {
            return Err(Error::Domain(format!(
                "snapshot time {t} outside [{}, {}]",
                path.t_start(),
                path.t_end()
            )));
        }
        let x_c = cs.x_c(t)?;
        Ok(DensitySnapshot { t, cs, f_in, x_c, carriers: OnceLock::new() })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x_c(&self) -> f64 {
        self.x_c
    }

    pub fn characteristics(&self) -> &CharacteristicSolution {
        &self.cs
    }

    pub fn initial(&self) -> &InitialDensity {
        &self.f_in
    }

    fn in_band(&self, x: f64) -> bool {
        self.t > self.cs.path().t_start() && (x - self.x_c).abs() <= BRANCH_BAND * self.x_c.max(1.0)
    }

    /// f(t, x); errors inside the ambiguous band around x_c(t).
    pub fn density_at(&self, x: f64) -> Result<f64> {
        let s = self.sample(x)?;
        if s.flagged {
            return Err(Error::Domain(format!("x = {x:.12e} is at the separating point x_c = {:.12e}", self.x_c)));
        }
        Ok(s.value)
    }

    /// f(t, x) with branch information; in the band around x_c(t) the right
    /// limit is returned and the sample is flagged.
    pub fn sample(&self, x: f64) -> Result<DensitySample> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("density needs x > 0, got {x}")));
        }
        let t0 = self.cs.path().t_start();
        if self.t == t0 {
            return Ok(DensitySample { value: self.f_in.eval(x), branch: Branch::Initial, flagged: false });
        }
        if self.in_band(x) {
            let xr = self.x_c + 2.0 * BRANCH_BAND * self.x_c.max(1.0);
            let mut s = self.sample_unflagged(xr)?;
            s.flagged = true;
            return Ok(s);
        }
        self.sample_unflagged(x)
    }

    fn sample_unflagged(&self, x: f64) -> Result<DensitySample> {
        let cs = &*self.cs;
        match cs.sigma_with_log(self.t, x, true)? {
            Ok((s, log_dy)) => {
                let n = cs.model().nucleation(cs.path().eval(s));
                let value = n * log_dy.exp() / cs.v_boundary(s);
                Ok(DensitySample { value, branch: Branch::Boundary, flagged: false })
            }
            Err((x0, log_j)) => Ok(DensitySample {
                value: self.f_in.eval(x0) * log_j.exp(),
                branch: Branch::Initial,
                flagged: false,
            }),
        }
    }

    /// Transported quadrature nodes of f_in and of the boundary inflow.
    pub fn carriers(&self) -> Result<&[Carrier]> {
        if let Some(c) = self.carriers.get() {
            return Ok(c);
        }
        let built = self.build_carriers()?;
        Ok(self.carriers.get_or_init(|| built))
    }

    fn build_carriers(&self) -> Result<Vec<Carrier>> {
        let cs = &*self.cs;
        let path = cs.path();
        let t0 = path.t_start();
        let t = self.t;
        let nodes = self.f_in.quadrature_nodes(8, 16);
        let initial: Vec<Result<Carrier>> = nodes
            .par_iter()
            .map(|&(x, w)| {
                let xt = if t == t0 { x } else { cs.x_at(t, t0, x)? };
                Ok(Carrier { x: xt, weight: w, branch: Branch::Initial })
            })
            .collect();
        let launches = launch_nodes(cs, t0, t);
        let boundary: Vec<Result<Carrier>> = launches
            .par_iter()
            .map(|&(s, w)| {
                Ok(Carrier { x: cs.sigma_inverse(t, s)?, weight: w, branch: Branch::Boundary })
            })
            .collect();
        initial.into_iter().chain(boundary).collect()
    }

    /// ∫ h f(t, x) dx in pushforward form.
    pub fn moment<H: Fn(f64) -> f64>(&self, h: H) -> Result<f64> {
        Ok(self.carriers()?.iter().map(|c| c.weight * h(c.x)).sum())
    }

    /// F(t, x) = ∫ₓ^∞ f(t, ·).
    pub fn tail(&self, x: f64) -> Result<f64> {
        let cs = &*self.cs;
        let path = cs.path();
        let t0 = path.t_start();
        let model = cs.model();
        if !(x > 0.0) {
            return Ok(self.f_in.m0() + path.integrate(|u| model.nucleation(u), t0, self.t));
        }
        if self.t == t0 {
            return Ok(self.f_in.tail(x));
        }
        match cs.sigma_with_log(self.t, x, false)? {
            Ok((s, _)) => Ok(self.f_in.m0() + path.integrate(|u| model.nucleation(u), t0, s)),
            Err((x0, _)) => Ok(self.f_in.tail(x0)),
        }
    }

    /// Extrapolated limit of v(t, x)·f(t, x) as x → 0⁺.
    pub fn trace_flux(&self) -> Result<TraceEstimate> {
        let t0 = self.cs.path().t_start();
        if !(self.t > t0) {
            return Err(Error::Domain("trace needs t > start of the path".into()));
        }
        let model = self.cs.model();
        let mut ys = Vec::with_capacity(TRACE_POINTS);
        let mut gs = Vec::with_capacity(TRACE_POINTS);
        for k in 0..TRACE_POINTS {
            let x = 1e-4 * self.x_c * 0.5f64.powi(k as i32);
            let f = self.density_at(x)?;
            ys.push(model.a_fast(x));
            gs.push(self.cs.flow_v(self.t, x) * f);
        }
        let (value, error) = neville_at_zero(&ys, &gs);
        let converged = error <= 1e-7 * (1.0 + value.abs());
        Ok(TraceEstimate { value, error, converged, samples: gs })
    }

    /// (x, f(t, x)) on a grid; flagged points carry the right limit.
    pub fn sample_grid(&self, xs: &[f64]) -> Result<Vec<(f64, f64)>> {
        let vals: Vec<Result<f64>> = xs.par_iter().map(|&x| self.sample(x).map(|s| s.value)).collect();
        xs.iter().zip(vals).map(|(&x, v)| v.map(|v| (x, v))).collect()
    }
}

const TRACE_POINTS: usize = 6;

/// Extrapolation of v·f towards the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEstimate {
    pub value: f64,
    /// Difference between the last two extrapolation orders.
    pub error: f64,
    pub converged: bool,
    /// Raw v·f values at the sample points.
    pub samples: Vec<f64>,
}

/// Polynomial extrapolation to 0; returns the value and its change when
/// the point farthest from 0 is dropped.
fn neville_at_zero(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let full = extrapolate(xs, ys);
    if xs.len() < 2 {
        return (full, f64::INFINITY);
    }
    let lower = extrapolate(&xs[1..], &ys[1..]);
    (full, (full - lower).abs())
}

fn extrapolate(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let mut p = ys.to_vec();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i]);
        }
    }
    p[0]
}

/// Launch times and weights 𝔫(u(s))·w of boundary mass on (t0, t).
pub(crate) fn launch_nodes(cs: &CharacteristicSolution, t0: f64, t: f64) -> Vec<(f64, f64)> {
    let path = cs.path();
    let model = cs.model();
    let rule = gauss(LAUNCH_ORDER);
    let mut cuts = vec![t0];
    cuts.extend(path.times().iter().copied().filter(|&s| s > t0 && s < t));
    cuts.push(t);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        for (s, wt) in rule.mapped(w[0], w[1]) {
            let n = model.nucleation(path.eval(s));
            if n != 0.0 {
                out.push((s, wt * n));
            }
        }
    }
    out
}

/// A C¹ test function of (t, x) with compact support.
pub trait TestFunction: Send + Sync {
    fn value(&self, t: f64, x: f64) -> f64;
    /// (∂ₜφ, ∂ₓφ).
    fn gradient(&self, t: f64, x: f64) -> (f64, f64);
    fn t_support(&self) -> (f64, f64);
    fn x_support(&self) -> (f64, f64);
    /// sup|φ| + sup|∂ₜφ| + sup|∂ₓφ|.
    fn c1_norm(&self) -> f64;
    /// Points in x where the function is only C¹.
    fn x_breaks(&self) -> Vec<f64> {
        let (a, b) = self.x_support();
        vec![a, b]
    }
    fn t_breaks(&self) -> Vec<f64> {
        let (a, b) = self.t_support();
        vec![a, b]
    }
}

/// Tensor product of (1 − z²)² bumps in t and x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub t_center: f64,
    pub t_radius: f64,
    pub x_center: f64,
    pub x_radius: f64,
    pub amplitude: f64,
}

fn bump1(z: f64) -> (f64, f64) {
    if z.abs() >= 1.0 {
        (0.0, 0.0)
    } else {
        let w = 1.0 - z * z;
        (w * w, -4.0 * z * w)
    }
}

/// max |d/dz (1 − z²)²| = 8/(3√3).
const BUMP_SLOPE: f64 = 1.539_600_717_839_002;

impl TestFunction for Bump {
    fn value(&self, t: f64, x: f64) -> f64 {
        let (bt, _) = bump1((t - self.t_center) / self.t_radius);
        let (bx, _) = bump1((x - self.x_center) / self.x_radius);
        self.amplitude * bt * bx
    }

    fn gradient(&self, t: f64, x: f64) -> (f64, f64) {
        let (bt, dbt) = bump1((t - self.t_center) / self.t_radius);
        let (bx, dbx) = bump1((x - self.x_center) / self.x_radius);
        (
            self.amplitude * dbt / self.t_radius * bx,
            self.amplitude * bt * dbx / self.x_radius,
        )
    }

    fn t_support(&self) -> (f64, f64) {
        (self.t_center - self.t_radius, self.t_center + self.t_radius)
    }

    fn x_support(&self) -> (f64, f64) {
        (self.x_center - self.x_radius, self.x_center + self.x_radius)
    }

    fn c1_norm(&self) -> f64 {
        self.amplitude.abs() * (1.0 + BUMP_SLOPE / self.t_radius + BUMP_SLOPE / self.x_radius)
    }
}

/// The three terms of the weak formulation and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakResidual {
    /// ∬ (∂ₜφ + v ∂ₓφ) f dx dt.
    pub interior: f64,
    /// ∫ φ(t, 0) 𝔫(u(t)) dt.
    pub boundary: f64,
    /// ∫ φ(t₀, x) f_in(x) dx.
    pub initial: f64,
    /// |interior + boundary + initial|.
    pub residual: f64,
    /// residual / ‖φ‖_{C¹}.
    pub normalized: f64,
}

const T_PANEL: f64 = 0.1;
const X_PANEL: f64 = 0.5;
const PANEL_ORDER: usize = 8;

/// Weak-form residual of the represented density against `phi`, by
/// Eulerian tensor Gauss quadrature over the support of `phi`.
pub fn weak_residual(cs: &Arc<CharacteristicSolution>, f_in: &Arc<InitialDensity>, phi: &dyn TestFunction) -> Result<WeakResidual> {
    let path = cs.path();
    let t0 = path.t_start();
    let (ts0, ts1) = phi.t_support();
    let (xs0, xs1) = phi.x_support();
    if ts1 > path.t_end() + 1e-12 {
        return Err(Error::Domain(format!(
            "test function support reaches t = {ts1}, beyond the path end {}",
            path.t_end()
        )));
    }
    let ta = ts0.max(t0);
    let tb = ts1;
    let xa = xs0.max(0.0);
    let xb = xs1;
    let model = cs.model();
    let rule = gauss(PANEL_ORDER);

    // interior term
    let mut t_nodes = Vec::new();
    if tb > ta && xb > xa {
        let mut cuts = vec![ta];
        cuts.extend(phi.t_breaks().into_iter().filter(|&c| c > ta && c < tb));
        cuts.push(tb);
        for w in cuts.windows(2) {
            let n = ((w[1] - w[0]) / T_PANEL).ceil().max(1.0) as usize;
            for i in 0..n {
                let a = w[0] + (w[1] - w[0]) * i as f64 / n as f64;
                let b = w[0] + (w[1] - w[0]) * (i + 1) as f64 / n as f64;
                t_nodes.extend(rule.mapped(a, b));
            }
        }
    }
    let bps: Vec<f64> = f_in.breakpoints().into_iter().filter(|&b| b > 0.0).collect();
    let slices: Vec<Result<f64>> = t_nodes
        .par_iter()
        .map(|&(t, wt)| {
            if t <= t0 {
                return Ok(0.0);
            }
            let snap = DensitySnapshot::new(cs.clone(), f_in.clone(), t)?;
            let mut cuts = vec![xa, xb];
            cuts.push(snap.x_c());
            for &b in &bps {
                cuts.push(cs.x_at(t, t0, b)?);
            }
            cuts.extend(phi.x_breaks());
            cuts.retain(|&c| c >= xa && c <= xb);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let u = path.eval(t);
            let integrand = |x: f64| -> Result<f64> {
                let (pt, px) = phi.gradient(t, x);
                let g = pt + model.v(u, x) * px;
                if g == 0.0 {
                    return Ok(0.0);
                }
                Ok(g * snap.sample(x)?.value)
            };
            let mut total = 0.0;
            for w in cuts.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                if hi <= lo {
                    continue;
                }
                let mut pieces = Vec::new();
                let mut a = lo;
                // panels [x, 4x] near the origin: the density varies on the scale of x there
                if lo > 0.0 {
                    while 4.0 * a < hi.min(X_PANEL) {
                        pieces.push((a, 4.0 * a));
                        a *= 4.0;
                    }
                }
                let n = ((hi - a) / X_PANEL).ceil().max(1.0) as usize;
                pieces.extend((0..n).map(|i| (a + (hi - a) * i as f64 / n as f64, a + (hi - a) * (i + 1) as f64 / n as f64)));
                for (a, b) in pieces {
                    if a == 0.0 {
                        // x = b ξ⁴ resolves the 1/a(x) growth of the boundary part
                        for (xi, w) in rule.mapped(0.0, 1.0) {
                            let x = b * xi.powi(4);
                            total += w * 4.0 * b * xi.powi(3) * integrand(x)?;
                        }
                    } else {
                        for (x, w) in rule.mapped(a, b) {
                            total += w * integrand(x)?;
                        }
                    }
                }
            }
            Ok(wt * total)
        })
        .collect();
    let mut interior = 0.0;
    for s in slices {
        interior += s?;
    }

    // boundary term
    let mut boundary = 0.0;
    if tb > ta && xs0 < 0.0 && xs1 > 0.0 {
        let mut cuts = vec![ta];
        cuts.extend(path.times().iter().copied().filter(|&s| s > ta && s < tb));
        cuts.extend(phi.t_breaks().into_iter().filter(|&c| c > ta && c < tb));
        cuts.push(tb);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let r4 = gauss(4);
        for w in cuts.windows(2) {
            boundary += r4.integrate(w[0], w[1], |s| phi.value(s, 0.0) * model.nucleation(path.eval(s)));
        }
    }

    // initial term
    let mut initial = 0.0;
    if ts0 < t0 && ts1 > t0 {
        let r16 = gauss(16);
        for piece in f_in.pieces() {
            let lo = piece.lo.max(xa);
            let hi = piece.hi.min(xb);
            if hi <= lo {
                continue;
            }
            let mut cuts = vec![lo, hi];
            cuts.extend(phi.x_breaks().into_iter().filter(|&c| c > lo && c < hi));
            cuts.sort_by(f64::total_cmp);
            for w in cuts.windows(2) {
                let sub = Piece { lo: w[0], hi: w[1], singular_lo: piece.singular_lo && w[0] == piece.lo };
                for (a, b) in panel_breaks(&sub, 8) {
                    initial += r16.integrate(a, b, |x| phi.value(t0, x) * f_in.eval(x));
                }
            }
        }
    }

    let residual = (interior + boundary + initial).abs();
    let norm = phi.c1_norm();
    Ok(WeakResidual {
        interior,
        boundary,
        initial,
        residual,
        normalized: if norm > 0.0 { residual / norm } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::MonomerPath;
    use crate::kinetics::{make_power_law, Nucleation};
    use approx::assert_relative_eq;

    fn setup(a_exp: f64, n: Nucleation, f_in: InitialDensity, t_end: f64) -> (Arc<CharacteristicSolution>, Arc<InitialDensity>) {
        let m = make_power_law(1.0, a_exp, 0.0, a_exp, n).unwrap();
        let path = MonomerPath::constant(1.0, 0.0, t_end, 0.05).unwrap();
        (Arc::new(CharacteristicSolution::new(m, path).unwrap()), Arc::new(f_in))
    }

    #[test]
    fn constant_inflow_density() {
        let (cs, f) = setup(0.0, Nucleation::constant(0.3), InitialDensity::zero(), 4.0);
        let snap = DensitySnapshot::new(cs, f, 2.0).unwrap();
        assert_relative_eq!(snap.density_at(1.5).unwrap(), 0.3, max_relative = 1e-9);
        assert_eq!(snap.density_at(2.5).unwrap(), 0.0);
        assert!(snap.density_at(2.0).is_err());
        assert!(snap.sample(2.0).unwrap().flagged);
    }

    #[test]
    fn shifted_indicator() {
        let f_in = InitialDensity::indicator(1.0, 1.0, 2.0).unwrap();
        let (cs, f) = setup(0.0, Nucleation::constant(0.0), f_in, 4.0);
        let snap = DensitySnapshot::new(cs, f, 1.5).unwrap();
        assert_eq!(snap.density_at(2.4).unwrap(), 0.0);
        assert_relative_eq!(snap.density_at(2.6).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(snap.density_at(3.4).unwrap(), 1.0, max_relative = 1e-12);
        assert_eq!(snap.density_at(3.6).unwrap(), 0.0);
        // M1 = M1_in + t M0_in
        assert_relative_eq!(snap.moment(|x| x).unwrap(), 1.5 + 1.5, max_relative = 1e-12);
    }

    #[test]
    fn sqrt_rate_boundary_density() {
        let (cs, f) = setup(0.5, Nucleation::constant(1.0), InitialDensity::zero(), 4.0);
        let snap = DensitySnapshot::new(cs, f, 2.0).unwrap();
        assert_relative_eq!(snap.x_c(), 1.0, max_relative = 1e-9);
        assert_relative_eq!(snap.density_at(0.25).unwrap(), 2.0, max_relative = 1e-8);
        // v·f = 1 at every x below x_c
        for x in [1e-6, 0.01, 0.5] {
            let vf = snap.characteristics().flow_v(2.0, x) * snap.density_at(x).unwrap();
            assert_relative_eq!(vf, 1.0, max_relative = 1e-8);
        }
        let tr = snap.trace_flux().unwrap();
        assert_relative_eq!(tr.value, 1.0, max_relative = 1e-8);
        // M0 = t, M1 = ∫₀ᵗ ((t−s)/2)² ds = t³/12
        assert_relative_eq!(snap.moment(|_| 1.0).unwrap(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(snap.moment(|x| x).unwrap(), 8.0 / 12.0, max_relative = 1e-9);
    }

    #[test]
    fn moments_of_constant_inflow() {
        let (cs, f) = setup(0.0, Nucleation::constant(0.4), InitialDensity::zero(), 4.0);
        let snap = DensitySnapshot::new(cs, f, 3.0).unwrap();
        assert_relative_eq!(snap.moment(|_| 1.0).unwrap(), 1.2, max_relative = 1e-12);
        assert_relative_eq!(snap.moment(|x| x).unwrap(), 0.4 * 4.5, max_relative = 1e-10);
        assert_relative_eq!(snap.tail(1.0).unwrap(), 0.8, max_relative = 1e-9);
        assert_relative_eq!(snap.tail(0.0).unwrap(), 1.2, max_relative = 1e-12);
    }

    #[test]
    fn tails_of_transported_indicator() {
        let f_in = InitialDensity::indicator(2.0, 1.0, 2.0).unwrap();
        let (cs, f) = setup(0.0, Nucleation::constant(0.0), f_in, 4.0);
        let snap = DensitySnapshot::new(cs, f, 1.0).unwrap();
        assert_relative_eq!(snap.tail(2.5).unwrap(), 1.0, max_relative = 1e-9);
        assert_relative_eq!(snap.tail(0.5).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn neville_recovers_polynomials() {
        let xs = [1.0, 0.5, 0.25, 0.125];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 2.0 * x - x * x).collect();
        let (v, e) = neville_at_zero(&xs, &ys);
        assert_relative_eq!(v, 3.0, epsilon = 1e-13);
        assert!(e < 1e-12);
    }

    #[test]
    fn weak_residual_of_advection() {
        let f_in = InitialDensity::indicator(0.5, 1.0, 2.0).unwrap();
        let (cs, f) = setup(0.0, Nucleation::constant(0.1), f_in, 3.0);
        for bump in [
            Bump { t_center: 1.0, t_radius: 0.5, x_center: 1.5, x_radius: 0.7, amplitude: 1.0 },
            Bump { t_center: 0.8, t_radius: 0.6, x_center: 0.2, x_radius: 0.5, amplitude: 1.0 },
            Bump { t_center: 0.1, t_radius: 0.4, x_center: 1.2, x_radius: 0.6, amplitude: 1.0 },
        ] {
            let r = weak_residual(&cs, &f, &bump).unwrap();
            assert!(r.normalized < 1e-8, "{bump:?}: {r:?}");
        }
        let zero = Bump { t_center: 1.0, t_radius: 0.5, x_center: 1.5, x_radius: 0.7, amplitude: 0.0 };
        assert_eq!(weak_residual(&cs, &f, &zero).unwrap().residual, 0.0);
    }
}
