//! Characteristic curves X(s;t,x) of dX/ds = a(X)u(s) − b(X) for a given
//! monomer path, with the hitting time σ_t, the boundary map σ_t⁻¹ and the
//! separating curve x_c(t).
//!
//! Away from the origin the flow is integrated in x with time as the
//! independent variable. Below `x_switch` the size is replaced by
//! y = A(x) and y itself becomes the independent variable, with state
//! (s, log-derivative): there dy/ds = V ≥ 2δ, so reaching y = 0 is the end of
//! an integration interval rather than an event to be located.

mod path;

pub use path::MonomerPath;

use crate::error::{Error, Result};
use crate::kinetics::KineticModel;
use crate::ode::{self, next_h, Tolerances};

/// Integration mode of a trace point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Independent variable s, state x.
    TimeX,
    /// Independent variable s, state y = A(x).
    TimeY,
    /// Independent variable y, state s.
    SpaceY,
}

/// A point on a characteristic together with integrator memory.
///
/// `l` is the log-derivative of the current coordinate (x in `TimeX`, y
/// otherwise) with respect to the coordinate the trace started from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub(crate) s: f64,
    pub(crate) mode: Mode,
    pub(crate) c: f64,
    pub(crate) l: f64,
    pub(crate) h_t: f64,
    pub(crate) h_y: f64,
}

impl TracePoint {
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }
}

/// Result of advancing a trace point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Advance {
    Reached(TracePoint),
    /// The backward characteristic reached y = 0 at time `s`; `log_dy` is the
    /// log-derivative of y there with respect to the start coordinate.
    Hit { s: f64, log_dy: f64 },
}

/// Outcome of `integrate_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOutcome {
    /// X at the requested end time, or 0 when the boundary was hit first.
    pub value: f64,
    pub hit_boundary_at: Option<f64>,
    /// ln ∂X/∂x₀ at the end time (NaN after a boundary hit).
    pub log_jacobian: f64,
}

/// Query object for the characteristic flow of one monomer path.
#[derive(Debug, Clone)]
pub struct CharacteristicSolution {
    model: KineticModel,
    path: MonomerPath,
    tol: Tolerances,
    x0: f64,
    delta: f64,
    x_switch: f64,
    y_switch: f64,
    y_eps: f64,
}

enum SpaceStep {
    Continue,
    Reached,
    Hit { s: f64, log_dy: f64 },
}

impl CharacteristicSolution {
    /// Pre-scans the inflow margin and fixes the switching point.
    pub fn new(model: KineticModel, path: MonomerPath) -> Result<Self> {
        Self::with_tolerances(model, path, Tolerances::default())
    }

    pub fn with_tolerances(model: KineticModel, path: MonomerPath, tol: Tolerances) -> Result<Self> {
        if !model.a_integrable() {
            return Err(Error::NonIntegrableRate("characteristics need 1/a integrable at 0".into()));
        }
        let (x0, delta) = crate::kinetics::inflow_scan(&model, path.min()).ok_or_else(|| {
            Error::InflowViolation(format!(
                "min u = {:.6e} does not exceed phi near 0 (phi0 = {:.6e})",
                path.min(),
                model.phi0()
            ))
        })?;
        let y_switch = model.a_fast(x0).min(1.0) / 4.0;
        let x_switch = model.a_inv_fast(y_switch);
        let y_eps = (1e-6 * y_switch).min(1e-12);
        Ok(CharacteristicSolution { model, path, tol, x0, delta, x_switch, y_switch, y_eps })
    }

    pub fn model(&self) -> &KineticModel {
        &self.model
    }

    pub fn path(&self) -> &MonomerPath {
        &self.path
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    /// (x₀, δ) from the inflow pre-scan.
    pub fn inflow_margin(&self) -> (f64, f64) {
        (self.x0, self.delta)
    }

    pub fn x_switch(&self) -> f64 {
        self.x_switch
    }

    /// Gronwall growth constant e^{2 K_r T} over the path.
    pub fn growth_constant(&self) -> f64 {
        (2.0 * self.model.sublinearity_constant() * (self.path.t_end() - self.path.t_start())).exp()
    }

    /// v(t, x) = a(x)u(t) − b(x).
    pub fn flow_v(&self, t: f64, x: f64) -> f64 {
        self.model.v(self.path.eval(t), x)
    }

    /// V(t, 0) = u(t) − Φ₀.
    pub(crate) fn v_boundary(&self, s: f64) -> f64 {
        self.model.vy_at(self.path.eval(s), 0.0)
    }

    /// Trace point at an interior size.
    pub fn start_interior(&self, s: f64, x: f64) -> TracePoint {
        if x < self.x_switch {
            let y = self.model.a_fast(x);
            TracePoint { s, mode: Mode::SpaceY, c: y, l: -self.model.a(x).ln(), h_t: 0.0, h_y: 0.0 }
        } else {
            TracePoint { s, mode: Mode::TimeX, c: x, l: 0.0, h_t: 0.0, h_y: 0.0 }
        }
    }

    /// Trace point just after launch from the boundary at time `s`, with the
    /// start coordinate y = 0.
    pub fn start_boundary(&self, s: f64) -> TracePoint {
        let u = self.path.eval(s);
        let v0 = self.model.vy_at(u, 0.0);
        let xe = self.model.a_inv_fast(self.y_eps);
        let ve = self.model.vy_at(u, xe);
        TracePoint {
            s: s + self.y_eps / ve,
            mode: Mode::SpaceY,
            c: self.y_eps,
            l: (ve - v0) / ve,
            h_t: 0.0,
            h_y: 0.0,
        }
    }

    /// Size and ln ∂X/∂(start coordinate) at a trace point.
    pub fn point_x(&self, p: &TracePoint) -> (f64, f64) {
        match p.mode {
            Mode::TimeX => (p.c, p.l),
            _ => {
                let x = self.model.a_inv_fast(p.c);
                (x, p.l + self.model.a(x).ln())
            }
        }
    }

    /// y = A(X) and ln ∂y/∂(start coordinate) at a trace point.
    pub fn point_y(&self, p: &TracePoint) -> (f64, f64) {
        match p.mode {
            Mode::TimeX => (self.model.a_fast(p.c), p.l - self.model.a(p.c).ln()),
            _ => (p.c, p.l),
        }
    }

    /// Advances a trace point to time `s_target`, forward or backward.
    /// `far` selects TimeX or TimeY away from the origin; `jac` enables the
    /// log-derivative component.
    pub fn advance(&self, mut p: TracePoint, s_target: f64, far: Mode, jac: bool) -> Result<Advance> {
        let dir = if s_target >= p.s { 1.0 } else { -1.0 };
        let mut guard = 0usize;
        loop {
            if p.s == s_target {
                return Ok(Advance::Reached(p));
            }
            guard += 1;
            if guard > 5_000_000 {
                return Err(Error::Integrator(format!("step budget exhausted at s = {:e}, coordinate {:e}", p.s, p.c)));
            }
            match p.mode {
                Mode::TimeX => {
                    if p.c < self.x_switch {
                        p.l -= self.model.a(p.c).ln();
                        p.c = self.model.a_fast(p.c);
                        p.mode = Mode::SpaceY;
                        continue;
                    }
                    self.time_step(&mut p, s_target, dir, jac)?;
                }
                Mode::TimeY => {
                    if p.c < self.y_switch {
                        p.mode = Mode::SpaceY;
                        continue;
                    }
                    self.time_step(&mut p, s_target, dir, jac)?;
                }
                Mode::SpaceY => {
                    if dir > 0.0 && p.c >= self.y_switch {
                        if far == Mode::TimeX {
                            let x = self.model.a_inv_fast(p.c).max(self.x_switch);
                            p.l += self.model.a(x).ln();
                            p.c = x;
                            p.mode = Mode::TimeX;
                        } else {
                            p.c = p.c.max(self.y_switch);
                            p.mode = Mode::TimeY;
                        }
                        continue;
                    }
                    match self.space_step(&mut p, s_target, dir, jac)? {
                        SpaceStep::Continue => {}
                        SpaceStep::Reached => return Ok(Advance::Reached(p)),
                        SpaceStep::Hit { s, log_dy } => return Ok(Advance::Hit { s, log_dy }),
                    }
                }
            }
        }
    }

    /// One accepted step in time, stopping at path nodes.
    fn time_step(&self, p: &mut TracePoint, s_target: f64, dir: f64, jac: bool) -> Result<()> {
        let end = match self.path.next_node(p.s, dir) {
            Some(n) if dir * (s_target - n) > 0.0 => n,
            _ => s_target,
        };
        let rem = (end - p.s).abs();
        let model = &self.model;
        let path = &self.path;
        let in_y = p.mode == Mode::TimeY;
        // the step stays inside one interval of the path
        let (t_ref, u_ref, slope) = path.local_linear(0.5 * (p.s + end));
        let mut rhs = |s: f64, y: &[f64; 2]| -> [f64; 2] {
            let u = u_ref + slope * (s - t_ref);
            if in_y {
                let x = model.a_inv_fast(y[0].max(0.0));
                [model.vy_at(u, x), if jac { model.dvy_dy_at(u, x) } else { 0.0 }]
            } else {
                [model.v(u, y[0]), if jac { model.dv_dx(u, y[0]) } else { 0.0 }]
            }
        };
        let y0 = [p.c, p.l];
        let k1 = rhs(p.s, &y0);
        let proposed = if p.h_t > 0.0 { p.h_t } else { rem };
        let mut h = proposed.min(rem);
        let hmin = 1e-15 * (1.0 + p.s.abs());
        loop {
            let last = h >= rem;
            let st = ode::step(&mut rhs, p.s, &y0, &k1, dir * h, &self.tol);
            if st.err <= 1.0 && st.y1[0] > 0.0 {
                p.s = if last { end } else { p.s + dir * h };
                p.c = st.y1[0];
                p.l = st.y1[1];
                let hn = next_h(h, st.err);
                p.h_t = if last { hn.max(proposed) } else { hn };
                return Ok(());
            }
            h = if st.y1[0] > 0.0 && st.err.is_finite() { next_h(h, st.err).min(0.5 * h) } else { 0.25 * h };
            if h < hmin {
                return Err(Error::Integrator(format!(
                    "step size underflow at s = {:.9e}, {} = {:.9e}",
                    p.s,
                    if in_y { "y" } else { "x" },
                    p.c
                )));
            }
        }
    }

    /// One accepted step in y near the boundary.
    fn space_step(&self, p: &mut TracePoint, s_target: f64, dir: f64, jac: bool) -> Result<SpaceStep> {
        let model = &self.model;
        let path = &self.path;
        let s_ref = p.s;
        if dir < 0.0 && p.c <= self.y_eps {
            // analytic tail from y_eps to 0
            let u = path.eval(s_ref);
            let x = model.a_inv_fast(p.c);
            let ve = model.vy_at(u, x);
            let v0 = model.vy_at(u, 0.0);
            let s_hit = s_ref - p.c / ve;
            if s_hit >= s_target {
                let l = p.l - (ve - v0) / ve;
                return Ok(SpaceStep::Hit { s: s_hit, log_dy: l });
            }
            p.c -= (s_ref - s_target) * ve;
            p.s = s_target;
            return Ok(SpaceStep::Reached);
        }
        let y_goal = if dir > 0.0 { self.y_switch } else { self.y_eps };
        let rem = (y_goal - p.c).abs();
        let mut rhs = |y: f64, st: &[f64; 2]| -> [f64; 2] {
            let x = model.a_inv_fast(y.max(0.0));
            let u = path.eval(s_ref + st[0]);
            let v = model.vy_at(u, x);
            [1.0 / v, if jac { model.dvy_dy_at(u, x) / v } else { 0.0 }]
        };
        let y0 = [0.0, p.l];
        let k1 = rhs(p.c, &y0);
        if !(k1[0] > 0.0 && k1[0].is_finite()) {
            return Err(Error::InflowViolation(format!(
                "reparametrized field not positive at s = {:.6e}, y = {:.6e}",
                p.s, p.c
            )));
        }
        let proposed = if p.h_y > 0.0 { p.h_y } else { (0.5 * p.c).max(10.0 * self.y_eps).min(rem) };
        let mut h = proposed.min(rem);
        let hmin = 1e-15 * self.y_eps.max(p.c * 1e-3);
        loop {
            let last = h >= rem;
            let st = ode::step(&mut rhs, p.c, &y0, &k1, dir * h, &self.tol);
            if st.err <= 1.0 && st.y1[0] * dir >= 0.0 {
                let s1 = s_ref + st.y1[0];
                let y_end = if last { y_goal } else { p.c + dir * h };
                if dir * (s1 - s_target) >= 0.0 {
                    // s reaches the target inside this step: solve s(y) = s_target
                    // by Newton on the dense output, kept inside the bracket
                    let (mut lo, mut hi) = (p.c, y_end);
                    let target = s_target - s_ref;
                    let mut yc = p.c + (y_end - p.c) * ((target - 0.0) / st.y1[0]).clamp(0.0, 1.0);
                    for _ in 0..60 {
                        let d = st.dense(yc);
                        let r = d[0] - target;
                        if dir * r >= 0.0 {
                            hi = yc;
                        } else {
                            lo = yc;
                        }
                        let slope = rhs(yc, &d)[0];
                        let mut next = yc - r / slope;
                        if !(next.is_finite()) || (next - lo) * (next - hi) > 0.0 {
                            next = 0.5 * (lo + hi);
                        }
                        let done = (next - yc).abs() <= 4.0 * f64::EPSILON * yc.abs().max(1e-300);
                        yc = next;
                        if done || (hi - lo).abs() <= 1e-16 * hi.abs().max(1e-300) {
                            break;
                        }
                    }
                    let d = st.dense(yc);
                    p.c = yc;
                    p.l = d[1];
                    p.s = s_target;
                    p.h_y = next_h(h, st.err);
                    return Ok(SpaceStep::Reached);
                }
                p.s = s1;
                p.c = y_end;
                p.l = st.y1[1];
                let hn = next_h(h, st.err);
                p.h_y = if last { hn.max(proposed) } else { hn };
                return Ok(SpaceStep::Continue);
            }
            h = if st.err.is_finite() { next_h(h, st.err).min(0.5 * h) } else { 0.25 * h };
            if h < hmin {
                return Err(Error::Integrator(format!(
                    "step size underflow near the boundary at s = {:.9e}, y = {:.9e}",
                    p.s, p.c
                )));
            }
        }
    }

    /// Solves dX/ds = v from (t0, x0) to s = t1; backward runs stop at the
    /// boundary and report the hitting time.
    pub fn integrate_x(&self, t0: f64, x0: f64, t1: f64) -> Result<FlowOutcome> {
        if !(x0 > 0.0) {
            return Err(Error::Domain(format!("integrate_X needs x0 > 0, got {x0}")));
        }
        let p = self.start_interior(t0, x0);
        match self.advance(p, t1, Mode::TimeX, true)? {
            Advance::Reached(q) => {
                let (x, l) = self.point_x(&q);
                Ok(FlowOutcome { value: x, hit_boundary_at: None, log_jacobian: l })
            }
            Advance::Hit { s, .. } => Ok(FlowOutcome { value: 0.0, hit_boundary_at: Some(s), log_jacobian: f64::NAN }),
        }
    }

    /// X(s; t, x), failing when s is outside the existence interval.
    pub fn x_at(&self, s: f64, t: f64, x: f64) -> Result<f64> {
        let out = self.integrate_x(t, x, s)?;
        match out.hit_boundary_at {
            None => Ok(out.value),
            Some(h) => Err(Error::Domain(format!("characteristic through ({t}, {x}) leaves at s = {h}"))),
        }
    }

    /// J(s; t, x) = ∂ₓX(s; t, x) = exp(−∫ₛᵗ ∂ₓv).
    pub fn jacobian_j(&self, s: f64, t: f64, x: f64) -> Result<f64> {
        let out = self.integrate_x(t, x, s)?;
        match out.hit_boundary_at {
            None => Ok(out.log_jacobian.exp()),
            Some(h) => Err(Error::Domain(format!("s = {s} is outside the existence interval (boundary at {h})"))),
        }
    }

    /// Reparametrized flow B(s; t, y): y-route from y at time t to time s,
    /// or None when it reaches y = 0 first.
    pub fn integrate_b(&self, t: f64, y: f64, s: f64) -> Result<Option<f64>> {
        let p = if y < self.y_switch {
            TracePoint { s: t, mode: Mode::SpaceY, c: y, l: 0.0, h_t: 0.0, h_y: 0.0 }
        } else {
            TracePoint { s: t, mode: Mode::TimeY, c: y, l: 0.0, h_t: 0.0, h_y: 0.0 }
        };
        match self.advance(p, s, Mode::TimeY, false)? {
            Advance::Reached(q) => Ok(Some(self.point_y(&q).0)),
            Advance::Hit { .. } => Ok(None),
        }
    }

    /// Backward hitting time σ_t(x) of the origin, or the path start time when
    /// the characteristic survives.
    pub fn sigma(&self, t: f64, x: f64) -> Result<f64> {
        let t0 = self.path.t_start();
        let out = self.integrate_x(t, x, t0)?;
        Ok(out.hit_boundary_at.unwrap_or(t0))
    }

    /// Like `sigma` but also returns ln ∂y/∂x at the hit, if any.
    pub(crate) fn sigma_with_log(&self, t: f64, x: f64, jac: bool) -> Result<std::result::Result<(f64, f64), (f64, f64)>> {
        let p = self.start_interior(t, x);
        match self.advance(p, self.path.t_start(), Mode::TimeX, jac)? {
            Advance::Hit { s, log_dy } => Ok(Ok((s, log_dy))),
            Advance::Reached(q) => Ok(Err(self.point_x(&q))),
        }
    }

    /// σ_t⁻¹(s) = X(t; s, 0⁺), via the y-route and A⁻¹.
    pub fn sigma_inverse(&self, t: f64, s: f64) -> Result<f64> {
        Ok(self.boundary_launch(t, s, false)?.0)
    }

    /// X(t; s, 0⁺) and ln ∂X/∂y₀ along it.
    fn boundary_launch(&self, t: f64, s: f64, jac: bool) -> Result<(f64, f64)> {
        if !(s <= t) {
            return Err(Error::Domain(format!("sigma_inverse needs s <= t (got s={s}, t={t})")));
        }
        let v0 = self.v_boundary(s);
        if t - s <= 1e3 * self.y_eps / v0.max(f64::MIN_POSITIVE) {
            let y = v0 * (t - s);
            let x = self.model.a_inv_fast(y);
            return Ok((x, if x > 0.0 { self.model.a(x).ln() } else { f64::NAN }));
        }
        let p = self.start_boundary(s);
        match self.advance(p, t, Mode::TimeY, jac)? {
            Advance::Reached(q) => Ok(self.point_x(&q)),
            Advance::Hit { .. } => Err(Error::Integrator("forward boundary characteristic returned to 0".into())),
        }
    }

    /// x_c(t) = σ_t⁻¹(t_start).
    pub fn x_c(&self, t: f64) -> Result<f64> {
        let t0 = self.path.t_start();
        if t <= t0 {
            return Ok(0.0);
        }
        self.sigma_inverse(t, t0)
    }

    /// σ'_t(x) = −∂ₓY(σ)/V(σ, 0) for 0 < x < x_c(t).
    pub fn sigma_derivative(&self, t: f64, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("sigma_derivative needs x > 0, got {x}")));
        }
        match self.sigma_with_log(t, x, true)? {
            Ok((s, log_dy)) => Ok(-log_dy.exp() / self.v_boundary(s)),
            Err(_) => Err(Error::Domain(format!("x = {x} is not below x_c({t})"))),
        }
    }

    /// ∂ₛ σ_t⁻¹(s) = −V(s, 0)·∂X(t)/∂y₀.
    pub fn sigma_inverse_derivative(&self, t: f64, s: f64) -> Result<f64> {
        let (_, l) = self.boundary_launch(t, s, true)?;
        Ok(-self.v_boundary(s) * l.exp())
    }

    /// Positions at increasing `times` for a characteristic started at
    /// `start`; entries before the start time are None.
    pub fn trajectory(&self, start: TracePoint, times: &[f64]) -> Result<Vec<Option<f64>>> {
        let mut p = start;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            if t < p.s {
                out.push(None);
                continue;
            }
            match self.advance(p, t, Mode::TimeX, false)? {
                Advance::Reached(q) => {
                    p = q;
                    out.push(Some(self.point_x(&q).0));
                }
                Advance::Hit { .. } => return Err(Error::Integrator("forward characteristic hit the boundary".into())),
            }
        }
        Ok(out)
    }
}
