//! Fixed-point coupling of the monomer concentration: Picard iteration of
//! u ↦ G(u) = max(ρ − M1[u], Φ₀ + δ) on short windows, stitched until the
//! horizon or until u approaches Φ₀.
//!
//! Within a window the density is carried by weighted particles: quadrature
//! nodes of the density at the window start plus Gauss nodes of the boundary
//! inflow on every path interval, all moved along exact characteristics of
//! the current iterate.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::characteristics::{Advance, CharacteristicSolution, Mode, MonomerPath};
use crate::error::{Error, Result};
use crate::initial::InitialDensity;
use crate::kinetics::{validate_hypotheses, HypothesisReport, KineticModel};
use crate::linear_transport::DensitySnapshot;
use crate::quadrature::gauss;

/// Gauss nodes per path interval for the boundary inflow.
const LAUNCH_ORDER: usize = 3;
/// Panels and order for the initial-density particles.
const INITIAL_PANELS: usize = 8;
const INITIAL_ORDER: usize = 16;

/// User-facing solver settings; `None` fields take model-dependent defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rho: f64,
    /// Final time T*.
    pub horizon: f64,
    pub delta: Option<f64>,
    pub window_length: Option<f64>,
    pub time_grid_step: Option<f64>,
    pub fp_tolerance: f64,
    pub fp_max_iters: usize,
    pub damping: f64,
    pub stop_margin: Option<f64>,
}

impl SolverConfig {
    pub fn new(rho: f64, horizon: f64) -> Self {
        SolverConfig {
            rho,
            horizon,
            delta: None,
            window_length: None,
            time_grid_step: None,
            fp_tolerance: 1e-6,
            fp_max_iters: 200,
            damping: 1.0,
            stop_margin: None,
        }
    }

    /// Fills defaults and checks admissibility.
    pub fn resolve(&self, model: &KineticModel, f_in: &InitialDensity) -> Result<ResolvedConfig> {
        let phi0 = model.phi0();
        let u_in = self.rho - f_in.m1();
        if !(self.rho > 0.0) || !(self.horizon > 0.0) {
            return Err(Error::InvalidParameter("rho and horizon must be positive".into()));
        }
        if !phi0.is_finite() || !(u_in > phi0) {
            return Err(Error::InvalidParameter(format!("u_in = {u_in:.6e} does not exceed phi0 = {phi0:.6e}")));
        }
        let gap = u_in - phi0;
        let delta = self.delta.unwrap_or(gap / 4.0);
        if !(delta > 0.0 && 2.0 * delta < gap) {
            return Err(Error::InvalidParameter(format!("need 0 < 2 delta < u_in - phi0 = {gap:.6e}, got delta = {delta:.6e}")));
        }
        let window_length = self.window_length.unwrap_or(0.25 / model.sublinearity_constant());
        let time_grid_step = self.time_grid_step.unwrap_or(window_length / 64.0);
        let stop_margin = self.stop_margin.unwrap_or(1e-3 * gap);
        if !(window_length > 0.0 && time_grid_step > 0.0 && time_grid_step <= window_length) {
            return Err(Error::InvalidParameter("need 0 < time_grid_step <= window_length".into()));
        }
        if !(self.fp_tolerance > 0.0 && self.fp_max_iters > 0 && stop_margin > 0.0) {
            return Err(Error::InvalidParameter("tolerances and iteration limits must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(ResolvedConfig {
            rho: self.rho,
            horizon: self.horizon,
            delta,
            window_length,
            time_grid_step,
            fp_tolerance: self.fp_tolerance,
            fp_max_iters: self.fp_max_iters,
            damping: self.damping,
            stop_margin,
            u_in,
            phi0,
        })
    }
}

/// Solver settings with every default filled in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedConfig {
    pub rho: f64,
    pub horizon: f64,
    pub delta: f64,
    pub window_length: f64,
    pub time_grid_step: f64,
    pub fp_tolerance: f64,
    pub fp_max_iters: usize,
    pub damping: f64,
    pub stop_margin: f64,
    pub u_in: f64,
    pub phi0: f64,
}

/// A weighted point of the density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: f64,
    pub weight: f64,
    h_t: f64,
    h_y: f64,
}

/// The density at time `t` as particles.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub t: f64,
    pub particles: Vec<Particle>,
}

impl ParticleState {
    pub fn from_initial(f_in: &InitialDensity, t: f64) -> Self {
        let particles = f_in
            .quadrature_nodes(INITIAL_PANELS, INITIAL_ORDER)
            .into_iter()
            .map(|(x, w)| Particle { x, weight: w, h_t: 0.0, h_y: 0.0 })
            .collect();
        ParticleState { t, particles }
    }

    pub fn moment<H: Fn(f64) -> f64>(&self, h: H) -> f64 {
        self.particles.iter().map(|p| p.weight * h(p.x)).sum()
    }
}

/// Moments of the density at one grid node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeMoments {
    pub m0: f64,
    pub m1: f64,
    /// ∫ a f.
    pub ma: f64,
    /// ∫ b f.
    pub mb: f64,
}

#[derive(Debug, Clone)]
struct Track {
    birth: usize,
    weight: f64,
    /// (x, time-step hint, space-step hint) at nodes birth, birth+1, ...
    states: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone)]
struct Sweep {
    tracks: Vec<Track>,
    moments: Vec<NodeMoments>,
}

/// Moves `start` (at the first path node) and the boundary inflow along the
/// characteristics of `cs` through every node of its path.
fn sweep(cs: &CharacteristicSolution, start: &[Particle]) -> Result<Sweep> {
    let path = cs.path();
    let times = path.times();
    let model = cs.model();
    let rule = gauss(LAUNCH_ORDER);
    enum Origin {
        Interior(Particle),
        Boundary(f64),
    }
    let mut jobs: Vec<(Origin, usize, f64)> = start.iter().map(|p| (Origin::Interior(*p), 0, p.weight)).collect();
    for i in 0..times.len() - 1 {
        for (s, w) in rule.mapped(times[i], times[i + 1]) {
            let n = model.nucleation(path.eval(s));
            if n != 0.0 {
                jobs.push((Origin::Boundary(s), i + 1, w * n));
            }
        }
    }
    let tracks: Vec<Result<Track>> = jobs
        .par_iter()
        .map(|(origin, birth, weight)| {
            let mut p = match origin {
                Origin::Interior(q) => {
                    let mut tp = cs.start_interior(times[0], q.x);
                    tp.h_t = q.h_t;
                    tp.h_y = q.h_y;
                    tp
                }
                Origin::Boundary(s) => cs.start_boundary(*s),
            };
            let mut states = Vec::with_capacity(times.len() - birth);
            for &tk in &times[*birth..] {
                match cs.advance(p, tk, Mode::TimeX, false)? {
                    Advance::Reached(q) => {
                        states.push((cs.point_x(&q).0, q.h_t, q.h_y));
                        p = q;
                    }
                    Advance::Hit { s, .. } => {
                        return Err(Error::Integrator(format!("forward characteristic returned to 0 at s = {s:.6e}")))
                    }
                }
            }
            Ok(Track { birth: *birth, weight: *weight, states })
        })
        .collect();
    let tracks = tracks.into_iter().collect::<Result<Vec<_>>>()?;
    let mut moments = vec![NodeMoments::default(); times.len()];
    for tr in &tracks {
        for (j, &(x, _, _)) in tr.states.iter().enumerate() {
            let m = &mut moments[tr.birth + j];
            m.m0 += tr.weight;
            m.m1 += tr.weight * x;
            m.ma += tr.weight * model.a(x);
            m.mb += tr.weight * model.b(x);
        }
    }
    Ok(Sweep { tracks, moments })
}

fn state_at(sweep: &Sweep, t: f64, node: usize) -> ParticleState {
    let particles = sweep
        .tracks
        .iter()
        .filter(|tr| tr.birth <= node)
        .map(|tr| {
            let (x, h_t, h_y) = tr.states[node - tr.birth];
            Particle { x, weight: tr.weight, h_t, h_y }
        })
        .collect();
    ParticleState { t, particles }
}

/// One application of G to a path starting at its first node, with the
/// density `f_in` at that node: the piecewise-linear path through
/// max(ρ − M1(tᵢ), Φ₀ + δ), pinned to ρ − M1 at the first node.
#[allow(non_snake_case)]
pub fn G_map(cfg: &ResolvedConfig, model: &KineticModel, f_in: &InitialDensity, u: &MonomerPath) -> Result<MonomerPath> {
    let cs = CharacteristicSolution::new(model.clone(), u.clone())?;
    let start = ParticleState::from_initial(f_in, u.t_start());
    let sw = sweep(&cs, &start.particles)?;
    let floor = cfg.phi0 + cfg.delta;
    let values = sw
        .moments
        .iter()
        .enumerate()
        .map(|(i, m)| if i == 0 { cfg.rho - m.m1 } else { (cfg.rho - m.m1).max(floor) })
        .collect();
    MonomerPath::new(u.times().to_vec(), values)
}

/// Outcome of the Picard iteration on one window.
#[derive(Debug, Clone)]
pub struct WindowSolution {
    /// Window grid and the accepted iterate on it.
    pub path: MonomerPath,
    pub moments: Vec<NodeMoments>,
    /// ρ − M1 at the nodes (before clamping).
    pub raw_g: Vec<f64>,
    pub converged: bool,
    /// Sup-norm residual ‖G(u) − u‖ per iteration.
    pub residuals: Vec<f64>,
    /// First node (index ≥ 1) where the clamp was active.
    pub first_clamped: Option<usize>,
    pub delta: f64,
    sweep_final: Option<Sweep>,
}

impl WindowSolution {
    pub fn residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Density state at node `k` of the accepted iterate.
    pub fn state_at(&self, k: usize) -> Option<ParticleState> {
        self.sweep_final.as_ref().map(|sw| state_at(sw, self.path.times()[k], k))
    }
}

/// Window grid on [t, t + len]: steps of about `dt`, or four steps when the
/// window is shorter than `dt`.
pub fn window_grid(t: f64, len: f64, dt: f64) -> Vec<f64> {
    let n = if len >= dt { ((len / dt).round() as usize).max(1) } else { 4 };
    (0..=n).map(|i| if i == n { t + len } else { t + len * i as f64 / n as f64 }).collect()
}

/// Picard iteration u ← (1 − θ)u + θ G(u) from the constant start `u_start`.
pub fn solve_window(cfg: &ResolvedConfig, model: &KineticModel, state: &ParticleState, u_start: f64, len: f64) -> Result<WindowSolution> {
    let gap = u_start - cfg.phi0;
    if !(gap > 0.0) {
        return Err(Error::InflowViolation(format!("window start u = {u_start:.6e} is not above phi0")));
    }
    let delta = cfg.delta.min(gap / 4.0);
    let floor = cfg.phi0 + delta;
    let times = window_grid(state.t, len, cfg.time_grid_step);
    let n = times.len();
    let mut u = vec![u_start; n];
    let mut residuals = Vec::new();
    let mut damping = cfg.damping;
    for _ in 0..cfg.fp_max_iters {
        let path = MonomerPath::new(times.clone(), u.clone())?;
        let cs = CharacteristicSolution::new(model.clone(), path.clone())?;
        let sw = sweep(&cs, &state.particles)?;
        let raw: Vec<f64> = sw.moments.iter().map(|m| cfg.rho - m.m1).collect();
        let g: Vec<f64> = raw.iter().enumerate().map(|(i, &r)| if i == 0 { u_start } else { r.max(floor) }).collect();
        let res = g.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if let Some(&prev) = residuals.last() {
            if res > prev {
                damping = damping.min(0.5);
            }
        }
        residuals.push(res);
        if res < cfg.fp_tolerance {
            let first_clamped = (1..n).find(|&i| raw[i] <= floor);
            return Ok(WindowSolution {
                path,
                moments: sw.moments.clone(),
                raw_g: raw,
                converged: true,
                residuals,
                first_clamped,
                delta,
                sweep_final: Some(sw),
            });
        }
        for i in 1..n {
            u[i] = (1.0 - damping) * u[i] + damping * g[i];
        }
    }
    let path = MonomerPath::new(times, u)?;
    Ok(WindowSolution {
        path,
        moments: Vec::new(),
        raw_g: Vec::new(),
        converged: false,
        residuals,
        first_clamped: None,
        delta,
        sweep_final: None,
    })
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    HorizonReached(f64),
    MaximalTimeDetected(f64),
    /// Window refinement was exhausted; the result covers [0, at].
    Failed { at: f64, reason: String },
}

impl Termination {
    pub fn kind(&self) -> &'static str {
        match self {
            Termination::HorizonReached(_) => "horizon_reached",
            Termination::MaximalTimeDetected(_) => "maximal_time_detected",
            Termination::Failed { .. } => "failed",
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            Termination::HorizonReached(t) | Termination::MaximalTimeDetected(t) => *t,
            Termination::Failed { at, .. } => *at,
        }
    }
}

/// Per-window iteration record.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowLog {
    pub t_start: f64,
    pub length: f64,
    /// End of the accepted part (equal to `t_start` when rejected).
    pub t_accepted: f64,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub first_clamped: Option<usize>,
    pub delta: f64,
}

/// One row of the output series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub u: f64,
    pub m0: f64,
    pub m1: f64,
    pub ma: f64,
    pub mb: f64,
    /// Mb − u·Ma.
    pub du_dt: f64,
}

/// A solved run.
#[derive(Debug)]
pub struct SimulationResult {
    config: ResolvedConfig,
    model: KineticModel,
    f_in: Arc<InitialDensity>,
    hypotheses: HypothesisReport,
    path: MonomerPath,
    series: Vec<SeriesRow>,
    termination: Termination,
    windows: Vec<WindowLog>,
    global: bool,
    full: OnceLock<std::result::Result<Arc<CharacteristicSolution>, Error>>,
}

impl SimulationResult {
    pub fn config(&self) -> &ResolvedConfig {
        &self.config
    }

    pub fn model(&self) -> &KineticModel {
        &self.model
    }

    pub fn initial(&self) -> &Arc<InitialDensity> {
        &self.f_in
    }

    pub fn hypotheses(&self) -> &HypothesisReport {
        &self.hypotheses
    }

    /// u over [0, T_end].
    pub fn path(&self) -> &MonomerPath {
        &self.path
    }

    pub fn series(&self) -> &[SeriesRow] {
        &self.series
    }

    pub fn termination(&self) -> &Termination {
        &self.termination
    }

    pub fn windows(&self) -> &[WindowLog] {
        &self.windows
    }

    pub fn t_end(&self) -> f64 {
        self.path.t_end()
    }

    /// Whether the global-existence criterion held for the model.
    pub fn global_guaranteed(&self) -> bool {
        self.global
    }

    pub fn u_at(&self, t: f64) -> f64 {
        self.path.eval(t)
    }

    /// Characteristics of the whole computed path.
    pub fn characteristics(&self) -> Result<Arc<CharacteristicSolution>> {
        self.full
            .get_or_init(|| CharacteristicSolution::new(self.model.clone(), self.path.clone()).map(Arc::new))
            .clone()
    }

    /// f(t, ·) rooted at the initial datum.
    pub fn snapshot(&self, t: f64) -> Result<DensitySnapshot> {
        DensitySnapshot::new(self.characteristics()?, self.f_in.clone(), t)
    }

    fn node_row(&self, t: f64) -> Option<&SeriesRow> {
        let i = self.series.partition_point(|r| r.t < t);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter_map(|j| self.series.get(j))
            .find(|r| (r.t - t).abs() <= 1e-12 * (1.0 + t.abs()))
    }

    /// u'(t) = −u ∫a f + ∫b f.
    pub fn u_derivative(&self, t: f64) -> Result<f64> {
        if let Some(r) = self.node_row(t) {
            return Ok(r.du_dt);
        }
        let snap = self.snapshot(t)?;
        let u = self.u_at(t);
        let ma = snap.moment(|x| self.model.a(x))?;
        let mb = snap.moment(|x| self.model.b(x))?;
        Ok(mb - u * ma)
    }

    /// The same derivative in the form ∫ a (Φ − u) f.
    pub fn u_derivative_phi_form(&self, t: f64) -> Result<f64> {
        let snap = self.snapshot(t)?;
        let u = self.u_at(t);
        let m = &self.model;
        snap.moment(|x| if x > 0.0 { m.a(x) * (m.phi_fast(x) - u) } else { 0.0 })
    }
}

/// Runs windows from t = 0 until the horizon or the maximal time.
pub fn continue_solution(cfg: &SolverConfig, model: &KineticModel, f_in: &InitialDensity) -> Result<SimulationResult> {
    let report = validate_hypotheses(model, cfg.rho, f_in);
    if !report.passed() {
        let names: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
        return Err(Error::Hypothesis(format!("failing hypotheses: {}", names.join(", "))));
    }
    let rc = cfg.resolve(model, f_in)?;
    let global = crate::diagnostics::global_criterion_check(model).guaranteed();
    run(rc, model, f_in, report, global)
}

fn run(rc: ResolvedConfig, model: &KineticModel, f_in: &InitialDensity, report: HypothesisReport, global: bool) -> Result<SimulationResult> {
    let w0 = rc.window_length;
    let min_window = 1e-3 * w0;
    let mut state = ParticleState::from_initial(f_in, 0.0);
    let mut t = 0.0;
    let mut u_now = rc.u_in;
    let mut window = w0;
    let mut approaching = false;
    let first = NodeMoments {
        m0: state.moment(|_| 1.0),
        m1: state.moment(|x| x),
        ma: state.moment(|x| model.a(x)),
        mb: state.moment(|x| model.b(x)),
    };
    let mut series = vec![row(0.0, u_now, &first)];
    let mut windows = Vec::new();
    let termination;
    let eps_t = 1e-12 * rc.horizon.max(1.0);
    loop {
        if t >= rc.horizon - eps_t {
            termination = Termination::HorizonReached(t);
            break;
        }
        let len = window.min(rc.horizon - t);
        let out = solve_window(&rc, model, &state, u_now, len);
        let sol = match out {
            Ok(sol) if sol.converged => sol,
            Ok(sol) => {
                windows.push(log(t, len, t, &sol));
                if window / 2.0 < min_window {
                    termination = Termination::Failed {
                        at: t,
                        reason: format!("fixed point did not converge (residual {:.3e})", sol.residual()),
                    };
                    break;
                }
                window /= 2.0;
                continue;
            }
            Err(e) => {
                if window / 2.0 < min_window {
                    termination = Termination::Failed { at: t, reason: e.to_string() };
                    break;
                }
                window /= 2.0;
                continue;
            }
        };
        let times = sol.path.times();
        let n = times.len() - 1;
        let k_acc = sol.first_clamped.map(|k| k - 1).unwrap_or(n);
        if k_acc == 0 {
            windows.push(log(t, len, t, &sol));
            if window / 2.0 < min_window {
                termination = Termination::Failed { at: t, reason: "clamp active at the first node of the smallest window".into() };
                break;
            }
            window /= 2.0;
            continue;
        }
        let values = sol.path.values();
        let stop = if global { None } else { (1..=k_acc).find(|&k| values[k] - rc.phi0 <= rc.stop_margin) };
        if let Some(k) = stop {
            approaching = true;
            if len > min_window * (1.0 + 1e-9) && window / 2.0 >= min_window * (1.0 - 1e-9) {
                windows.push(log(t, len, t, &sol));
                window /= 2.0;
                continue;
            }
            for j in 1..=k {
                series.push(row(times[j], values[j], &sol.moments[j]));
            }
            windows.push(log(t, len, times[k], &sol));
            termination = Termination::MaximalTimeDetected(times[k]);
            break;
        }
        for j in 1..=k_acc {
            series.push(row(times[j], values[j], &sol.moments[j]));
        }
        windows.push(log(t, len, times[k_acc], &sol));
        state = sol.state_at(k_acc).expect("converged window keeps its sweep");
        t = times[k_acc];
        u_now = values[k_acc];
        if !approaching && sol.first_clamped.is_none() && window < w0 {
            window = (2.0 * window).min(w0);
        }
    }
    let path = MonomerPath::new(series.iter().map(|r| r.t).collect(), series.iter().map(|r| r.u).collect())?;
    Ok(SimulationResult {
        config: rc,
        model: model.clone(),
        f_in: Arc::new(f_in.clone()),
        hypotheses: report,
        path,
        series,
        termination,
        windows,
        global,
        full: OnceLock::new(),
    })
}

fn row(t: f64, u: f64, m: &NodeMoments) -> SeriesRow {
    SeriesRow { t, u, m0: m.m0, m1: m.m1, ma: m.ma, mb: m.mb, du_dt: m.mb - u * m.ma }
}

fn log(t: f64, len: f64, acc: f64, sol: &WindowSolution) -> WindowLog {
    WindowLog {
        t_start: t,
        length: len,
        t_accepted: acc,
        residuals: sol.residuals.clone(),
        converged: sol.converged,
        first_clamped: sol.first_clamped,
        delta: sol.delta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{make_power_law, Nucleation};
    use approx::assert_relative_eq;

    fn unit(n: Nucleation) -> KineticModel {
        make_power_law(1.0, 0.0, 0.0, 0.0, n).unwrap()
    }

    #[test]
    fn defaults_follow_the_model() {
        let m = unit(Nucleation::power(1.0, 1.0));
        let rc = SolverConfig::new(1.0, 2.0).resolve(&m, &InitialDensity::zero()).unwrap();
        assert_relative_eq!(rc.delta, 0.25);
        assert_relative_eq!(rc.window_length, 0.25);
        assert_relative_eq!(rc.time_grid_step, 0.25 / 64.0);
        assert_relative_eq!(rc.stop_margin, 1e-3);
        let mut bad = SolverConfig::new(1.0, 2.0);
        bad.delta = Some(0.6);
        assert!(bad.resolve(&m, &InitialDensity::zero()).is_err());
    }

    #[test]
    fn g_map_vacuum_and_sech2_start() {
        let m = unit(Nucleation::constant(0.0));
        let rc = SolverConfig::new(1.0, 1.0).resolve(&m, &InitialDensity::zero()).unwrap();
        let u = MonomerPath::constant(0.8, 0.0, 1.0, 0.1).unwrap();
        let g = G_map(&rc, &m, &InitialDensity::zero(), &u).unwrap();
        assert!(g.values().iter().all(|&v| v == 1.0));

        let m = unit(Nucleation::power(1.0, 1.0));
        let u = MonomerPath::constant(1.0, 0.0, 2.0, 0.05).unwrap();
        let g = G_map(&rc, &m, &InitialDensity::zero(), &u).unwrap();
        for (&t, &v) in g.times().iter().zip(g.values()) {
            assert_relative_eq!(v, (1.0 - t * t / 2.0).max(0.25), epsilon = 1e-12);
        }
    }

    #[test]
    fn vacuum_converges_immediately() {
        let m = unit(Nucleation::constant(0.0));
        let rc = SolverConfig::new(1.0, 1.0).resolve(&m, &InitialDensity::zero()).unwrap();
        let st = ParticleState::from_initial(&InitialDensity::zero(), 0.0);
        let sol = solve_window(&rc, &m, &st, 1.0, 0.25).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.residuals.len(), 1);
        assert!(sol.path.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn sech2_short_run() {
        let m = unit(Nucleation::power(1.0, 1.0));
        let mut cfg = SolverConfig::new(1.0, 1.0);
        cfg.fp_tolerance = 1e-10;
        let res = continue_solution(&cfg, &m, &InitialDensity::zero()).unwrap();
        assert_eq!(res.termination(), &Termination::HorizonReached(1.0));
        let exact = |t: f64| (t / 2f64.sqrt()).cosh().powi(-2);
        assert_relative_eq!(res.u_at(1.0), exact(1.0), epsilon = 1e-6);
        let last = res.series().last().unwrap();
        assert_relative_eq!(last.m0, 2f64.sqrt() * (1.0 / 2f64.sqrt()).tanh(), epsilon = 1e-6);
        assert_relative_eq!(last.u + last.m1, 1.0, epsilon = 2e-10);
        let du = -exact(1.0) * 2f64.sqrt() * (1.0 / 2f64.sqrt()).tanh();
        assert_relative_eq!(res.u_derivative(1.0).unwrap(), du, epsilon = 1e-5);
        assert_relative_eq!(res.u_derivative_phi_form(1.0).unwrap(), du, epsilon = 1e-5);
    }
}
