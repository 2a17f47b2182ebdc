//! Kinetic rate triplets {a, b, n}, the ratio Φ = b/a and the
//! reparametrization A(x) = ∫₀ˣ 1/a.

mod amap;
mod hypotheses;

use std::fmt;
use std::sync::Arc;

pub use amap::ATable;
pub use hypotheses::{
    validate_hypotheses, H8Certificate, H8Mode, HypothesisCheck, HypothesisReport, HYPOTHESIS_GRID_HI,
    HYPOTHESIS_GRID_LO,
};
pub(crate) use hypotheses::inflow_scan;

use crate::error::{Error, Result};

/// Shared scalar function.
pub type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Which family a model came from.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyTag {
    PowerLaw { a0: f64, alpha: f64, b0: f64, beta: f64 },
    /// a = x^{1/3}, b = 1. Outflow at the origin (Φ₀ = ∞).
    ClassicalLs,
    Custom { name: String },
}

/// Nucleation law 𝔫(u).
#[derive(Clone)]
pub struct Nucleation {
    rate: RateFn,
    label: String,
    lipschitz: Option<f64>,
}

impl Nucleation {
    pub fn constant(c: f64) -> Self {
        Nucleation { rate: Arc::new(move |_| c), label: format!("constant({c})"), lipschitz: Some(0.0) }
    }

    /// n0·u^p, evaluated at max(u, 0).
    pub fn power(n0: f64, p: f64) -> Self {
        let rate: RateFn = if p == 1.0 {
            Arc::new(move |u: f64| n0 * u.max(0.0))
        } else {
            Arc::new(move |u: f64| n0 * u.max(0.0).powf(p))
        };
        Nucleation { rate, label: format!("power(n0={n0}, p={p})"), lipschitz: None }
    }

    /// k·(u − u_crit)₊.
    pub fn linear_excess(k: f64, u_crit: f64) -> Self {
        Nucleation {
            rate: Arc::new(move |u: f64| k * (u - u_crit).max(0.0)),
            label: format!("linear_excess(k={k}, u_crit={u_crit})"),
            lipschitz: Some(k.abs()),
        }
    }

    pub fn custom(label: impl Into<String>, rate: RateFn) -> Self {
        Nucleation { rate, label: label.into(), lipschitz: None }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        (self.rate)(u)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Known Lipschitz constant, if the law declares one.
    pub fn declared_lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }
}

impl fmt::Debug for Nucleation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nucleation({})", self.label)
    }
}

/// How A and A⁻¹ are evaluated.
#[derive(Clone)]
enum AMap {
    /// a = a0·x^α with α < 1.
    Power { a0: f64, alpha: f64 },
    /// User-supplied closed forms.
    Exact { a: RateFn, inv: RateFn },
    Table(Arc<ATable>),
    /// 1/a is not integrable at 0.
    Divergent,
}

/// Rate triplet with derived quantities. Immutable and cheap to clone.
#[derive(Clone)]
pub struct KineticModel {
    a: RateFn,
    b: RateFn,
    da: RateFn,
    db: RateFn,
    nucleation: Nucleation,
    phi0: f64,
    sublinearity_constant: f64,
    family: FamilyTag,
    amap: AMap,
}

impl fmt::Debug for KineticModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KineticModel")
            .field("family", &self.family)
            .field("nucleation", &self.nucleation)
            .field("phi0", &self.phi0)
            .field("sublinearity_constant", &self.sublinearity_constant)
            .finish()
    }
}

fn power_fn(c: f64, p: f64) -> RateFn {
    if p == 0.0 {
        Arc::new(move |_| c)
    } else if p == 1.0 {
        Arc::new(move |x: f64| c * x)
    } else if p == 0.5 {
        Arc::new(move |x: f64| c * x.sqrt())
    } else {
        Arc::new(move |x: f64| c * x.powf(p))
    }
}

fn power_deriv(c: f64, p: f64) -> RateFn {
    if p == 0.0 {
        Arc::new(|_| 0.0)
    } else if p == 1.0 {
        Arc::new(move |_| c)
    } else {
        Arc::new(move |x: f64| c * p * x.powf(p - 1.0))
    }
}

/// a(x) = a0·x^α, b(x) = b0·x^β with 0 ≤ α ≤ β ≤ 1, α < 1.
pub fn make_power_law(a0: f64, alpha: f64, b0: f64, beta: f64, nucleation: Nucleation) -> Result<KineticModel> {
    if !(a0 > 0.0 && a0.is_finite()) {
        return Err(Error::InvalidParameter(format!("a0 must be positive, got {a0}")));
    }
    if !(b0 >= 0.0 && b0.is_finite()) {
        return Err(Error::InvalidParameter(format!("b0 must be nonnegative, got {b0}")));
    }
    if !(0.0..1.0).contains(&alpha) {
        if alpha >= 1.0 {
            return Err(Error::NonIntegrableRate(format!("alpha = {alpha} >= 1")));
        }
        return Err(Error::InvalidParameter(format!("alpha must lie in [0,1), got {alpha}")));
    }
    if alpha > beta && b0 > 0.0 {
        return Err(Error::Outflow(format!(
            "alpha = {alpha} > beta = {beta} gives phi0 = infinity"
        )));
    }
    if beta > 1.0 {
        return Err(Error::InvalidParameter(format!("beta must be at most 1, got {beta}")));
    }
    let phi0 = if b0 == 0.0 {
        0.0
    } else if alpha == beta {
        b0 / a0
    } else {
        0.0
    };
    Ok(KineticModel {
        a: power_fn(a0, alpha),
        b: power_fn(b0, beta),
        da: power_deriv(a0, alpha),
        db: power_deriv(b0, beta),
        nucleation,
        phi0,
        sublinearity_constant: a0 + b0,
        family: FamilyTag::PowerLaw { a0, alpha, b0, beta },
        amap: AMap::Power { a0, alpha },
    })
}

/// Classical rates a = x^{1/3}, b = 1. The boundary is outgoing, so every
/// hypothesis check that needs Φ₀ < ρ fails on this model.
pub fn make_classical_ls(nucleation: Nucleation) -> KineticModel {
    KineticModel {
        a: power_fn(1.0, 1.0 / 3.0),
        b: Arc::new(|_| 1.0),
        da: power_deriv(1.0, 1.0 / 3.0),
        db: Arc::new(|_| 0.0),
        nucleation,
        phi0: f64::INFINITY,
        sublinearity_constant: 2.0,
        family: FamilyTag::ClassicalLs,
        amap: AMap::Power { a0: 1.0, alpha: 1.0 / 3.0 },
    }
}

/// a ≡ a0, b(x) = b0·e^{−kx}: Φ decreases from Φ₀ = b0/a0.
pub fn make_exp_detachment(a0: f64, b0: f64, k: f64, nucleation: Nucleation) -> Result<KineticModel> {
    if !(a0 > 0.0) || !(b0 >= 0.0) || !(k >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "exp_detachment needs a0 > 0, b0 >= 0, k >= 0 (got {a0}, {b0}, {k})"
        )));
    }
    Ok(KineticModel {
        a: Arc::new(move |_| a0),
        b: Arc::new(move |x: f64| b0 * (-k * x).exp()),
        da: Arc::new(|_| 0.0),
        db: Arc::new(move |x: f64| -k * b0 * (-k * x).exp()),
        nucleation,
        phi0: b0 / a0,
        sublinearity_constant: a0 + b0,
        family: FamilyTag::Custom { name: format!("exp_detachment(a0={a0}, b0={b0}, k={k})") },
        amap: AMap::Power { a0, alpha: 0.0 },
    })
}

/// Builder for user-supplied rates.
pub struct CustomRates {
    pub name: String,
    pub a: RateFn,
    pub b: RateFn,
    pub da: RateFn,
    pub db: RateFn,
    /// Declared limit of b/a at 0⁺.
    pub phi0: f64,
    /// Optional closed forms for A and A⁻¹.
    pub exact_a: Option<(RateFn, RateFn)>,
    /// Upper end of the A table and of the sublinearity scan.
    pub x_max: f64,
}

/// Builds a custom model; A is tabulated unless closed forms are supplied.
pub fn make_custom(rates: CustomRates, nucleation: Nucleation) -> Result<KineticModel> {
    let CustomRates { name, a, b, da, db, phi0, exact_a, x_max } = rates;
    if !(phi0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("phi0 must be nonnegative, got {phi0}")));
    }
    let grid = log_grid(HYPOTHESIS_GRID_LO, x_max.max(HYPOTHESIS_GRID_HI), 512);
    let mut kr: f64 = 0.0;
    for &x in &grid {
        let ax = a(x);
        let bx = b(x);
        if !(ax > 0.0) || !ax.is_finite() || !bx.is_finite() {
            return Err(Error::DegenerateRate(x));
        }
        kr = kr.max((ax + bx) / (1.0 + x));
    }
    let amap = match exact_a {
        Some((fa, finv)) => AMap::Exact { a: fa, inv: finv },
        None => match ATable::build(&a, x_max) {
            Ok(t) => AMap::Table(Arc::new(t)),
            Err(Error::NonIntegrableRate(_)) => AMap::Divergent,
            Err(e) => return Err(e),
        },
    };
    Ok(KineticModel {
        a,
        b,
        da,
        db,
        nucleation,
        phi0,
        sublinearity_constant: kr,
        family: FamilyTag::Custom { name },
        amap,
    })
}

/// Rates given at strictly increasing nodes, interpolated linearly and
/// extended beyond the last node with the last slopes.
pub fn make_tabulated(
    name: &str,
    xs: Vec<f64>,
    avals: Vec<f64>,
    bvals: Vec<f64>,
    phi0: f64,
    nucleation: Nucleation,
) -> Result<KineticModel> {
    if xs.len() < 2 || xs.len() != avals.len() || xs.len() != bvals.len() {
        return Err(Error::InvalidParameter("rate table needs at least two rows of (x, a, b)".into()));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) || xs[0] < 0.0 {
        return Err(Error::InvalidParameter("rate table x column must be nonnegative and strictly increasing".into()));
    }
    let ta = Arc::new(Piecewise::new(xs.clone(), avals));
    let tb = Arc::new(Piecewise::new(xs.clone(), bvals));
    let (ta1, ta2, tb1, tb2) = (ta.clone(), ta.clone(), tb.clone(), tb.clone());
    let x_last = *xs.last().expect("nonempty");
    make_custom(
        CustomRates {
            name: name.to_string(),
            a: Arc::new(move |x| ta1.eval(x)),
            b: Arc::new(move |x| tb1.eval(x)),
            da: Arc::new(move |x| ta2.slope(x)),
            db: Arc::new(move |x| tb2.slope(x)),
            phi0,
            exact_a: None,
            x_max: x_last.max(HYPOTHESIS_GRID_HI),
        },
        nucleation,
    )
}

/// Piecewise-linear interpolant with linear extension at both ends.
#[derive(Debug, Clone)]
struct Piecewise {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Piecewise {
    fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        Piecewise { xs, ys }
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        self.xs.partition_point(|&v| v <= x).clamp(1, n - 1) - 1
    }

    fn slope(&self, x: f64) -> f64 {
        let i = self.segment(x);
        (self.ys[i + 1] - self.ys[i]) / (self.xs[i + 1] - self.xs[i])
    }

    fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        self.ys[i] + self.slope(x) * (x - self.xs[i])
    }
}

/// `n` log-spaced points on [lo, hi].
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

impl KineticModel {
    #[inline]
    pub fn a(&self, x: f64) -> f64 {
        (self.a)(x)
    }

    #[inline]
    pub fn b(&self, x: f64) -> f64 {
        (self.b)(x)
    }

    #[inline]
    pub fn a_prime(&self, x: f64) -> f64 {
        (self.da)(x)
    }

    #[inline]
    pub fn b_prime(&self, x: f64) -> f64 {
        (self.db)(x)
    }

    #[inline]
    pub fn nucleation(&self, u: f64) -> f64 {
        self.nucleation.eval(u)
    }

    pub fn nucleation_law(&self) -> &Nucleation {
        &self.nucleation
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    pub fn sublinearity_constant(&self) -> f64 {
        self.sublinearity_constant
    }

    pub fn family(&self) -> &FamilyTag {
        &self.family
    }

    /// Replaces the nucleation law, keeping the rates.
    pub fn with_nucleation(&self, nucleation: Nucleation) -> KineticModel {
        KineticModel { nucleation, ..self.clone() }
    }

    /// Φ(x) = b(x)/a(x).
    pub fn phi(&self, x: f64) -> Result<f64> {
        let ax = self.a(x);
        if !(ax > 0.0) {
            return Err(Error::DegenerateRate(x));
        }
        Ok(self.b(x) / ax)
    }

    /// Φ with Φ(0) = Φ₀; no degeneracy check.
    #[inline]
    pub(crate) fn phi_fast(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.phi0
        } else {
            self.b(x) / self.a(x)
        }
    }

    /// a·Φ' = b' − b·a'/a.
    #[inline]
    pub fn a_phi_prime(&self, x: f64) -> f64 {
        self.b_prime(x) - self.b(x) * self.a_prime(x) / self.a(x)
    }

    /// Transport field v = a(x)u − b(x).
    #[inline]
    pub fn v(&self, u: f64, x: f64) -> f64 {
        self.a(x) * u - self.b(x)
    }

    /// ∂ₓv = a'(x)u − b'(x).
    #[inline]
    pub fn dv_dx(&self, u: f64, x: f64) -> f64 {
        self.a_prime(x) * u - self.b_prime(x)
    }

    /// Whether A has a closed form (no interpolation).
    pub fn has_exact_a(&self) -> bool {
        matches!(self.amap, AMap::Power { .. } | AMap::Exact { .. })
    }

    /// Whether 1/a was found integrable at the origin.
    pub fn a_integrable(&self) -> bool {
        !matches!(self.amap, AMap::Divergent)
    }

    /// A(x) = ∫₀ˣ 1/a.
    pub fn capital_a(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("capital_A needs x >= 0, got {x}")));
        }
        match &self.amap {
            AMap::Divergent => Err(Error::NonIntegrableRate("A is infinite for x > 0".into())),
            _ => Ok(self.a_fast(x)),
        }
    }

    /// Functional inverse of A.
    pub fn inverse_a(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::Domain(format!("inverse_A needs y >= 0, got {y}")));
        }
        match &self.amap {
            AMap::Divergent => Err(Error::NonIntegrableRate("A is infinite for x > 0".into())),
            _ => Ok(self.a_inv_fast(y)),
        }
    }

    #[inline]
    pub(crate) fn a_fast(&self, x: f64) -> f64 {
        match &self.amap {
            AMap::Power { a0, alpha } => {
                if *alpha == 0.0 {
                    x / a0
                } else if *alpha == 0.5 {
                    2.0 * x.sqrt() / a0
                } else {
                    x.powf(1.0 - alpha) / (a0 * (1.0 - alpha))
                }
            }
            AMap::Exact { a, .. } => a(x),
            AMap::Table(t) => t.eval(x, &self.a),
            AMap::Divergent => f64::INFINITY,
        }
    }

    #[inline]
    pub(crate) fn a_inv_fast(&self, y: f64) -> f64 {
        match &self.amap {
            AMap::Power { a0, alpha } => {
                if *alpha == 0.0 {
                    a0 * y
                } else if *alpha == 0.5 {
                    let r = 0.5 * a0 * y;
                    r * r
                } else {
                    (a0 * (1.0 - alpha) * y).powf(1.0 / (1.0 - alpha))
                }
            }
            AMap::Exact { inv, .. } => inv(y),
            AMap::Table(t) => t.inverse(y, &self.a),
            AMap::Divergent => 0.0,
        }
    }

    /// The reparametrized field V(u, y) at x = A⁻¹(y), given x.
    #[inline]
    pub(crate) fn vy_at(&self, u: f64, x: f64) -> f64 {
        match &self.amap {
            AMap::Table(t) if x > 0.0 => t.slope(x, &self.a) * self.v(u, x),
            _ => u - self.phi_fast(x),
        }
    }

    /// ∂_y V at x = A⁻¹(y).
    #[inline]
    pub(crate) fn dvy_dy_at(&self, u: f64, x: f64) -> f64 {
        match &self.amap {
            AMap::Table(t) => {
                let s1 = t.slope(x, &self.a);
                let s2 = t.curvature(x, &self.a);
                (s2 * self.v(u, x) + s1 * self.dv_dx(u, x)) / s1
            }
            _ => -self.a_phi_prime(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn n0() -> Nucleation {
        Nucleation::constant(0.0)
    }

    #[test]
    fn power_law_phi_and_phi0() {
        let m = make_power_law(1.0, 1.0 / 3.0, 1.0, 1.0, n0()).unwrap();
        assert_eq!(m.phi0(), 0.0);
        assert_relative_eq!(m.phi(8.0).unwrap(), 4.0, max_relative = 1e-14);
        let m = make_power_law(2.0, 0.5, 1.0, 0.5, n0()).unwrap();
        assert_eq!(m.phi0(), 0.5);
        for x in [1e-6, 0.3, 7.0] {
            assert_relative_eq!(m.phi(x).unwrap(), 0.5, max_relative = 1e-14);
        }
    }

    #[test]
    fn power_law_rejections() {
        assert!(matches!(make_power_law(1.0, 0.5, 1.0, 1.0 / 3.0, n0()), Err(Error::Outflow(_))));
        assert!(matches!(make_power_law(1.0, 1.0, 1.0, 1.0, n0()), Err(Error::NonIntegrableRate(_))));
        assert!(make_power_law(0.0, 0.5, 1.0, 1.0, n0()).is_err());
    }

    #[test]
    fn capital_a_closed_forms() {
        let m = make_power_law(1.0, 0.5, 0.0, 0.5, n0()).unwrap();
        assert_relative_eq!(m.capital_a(4.0).unwrap(), 4.0, max_relative = 1e-14);
        let m = make_power_law(1.0, 1.0 / 3.0, 0.0, 1.0, n0()).unwrap();
        assert_relative_eq!(m.capital_a(8.0).unwrap(), 6.0, max_relative = 1e-14);
        let m = make_power_law(1.0, 0.0, 0.0, 0.0, n0()).unwrap();
        assert_eq!(m.capital_a(2.5).unwrap(), 2.5);
        assert_eq!(m.inverse_a(2.5).unwrap(), 2.5);
    }

    #[test]
    fn exp_detachment_limits() {
        let m = make_exp_detachment(1.0, 1.0, 1.0, n0()).unwrap();
        assert_eq!(m.phi0(), 1.0);
        assert_relative_eq!(m.phi(1e-12).unwrap(), 1.0, max_relative = 1e-11);
        assert_relative_eq!(m.v(2.0, 0.0), 1.0);
    }

    #[test]
    fn tabulated_a_matches_closed_form() {
        let m = make_custom(
            CustomRates {
                name: "sqrt".into(),
                a: Arc::new(|x: f64| x.sqrt()),
                b: Arc::new(|_| 0.0),
                da: Arc::new(|x: f64| 0.5 / x.sqrt()),
                db: Arc::new(|_| 0.0),
                phi0: 0.0,
                exact_a: None,
                x_max: 1e4,
            },
            n0(),
        )
        .unwrap();
        assert!(!m.has_exact_a());
        for x in [1e-9, 1e-3, 0.5, 4.0, 300.0, 5e4] {
            let y = m.capital_a(x).unwrap();
            assert_relative_eq!(y, 2.0 * x.sqrt(), max_relative = 1e-9);
            assert_relative_eq!(m.inverse_a(y).unwrap(), x, max_relative = 1e-10);
        }
    }

    #[test]
    fn tabulated_rates_interpolate_and_extrapolate() {
        let m = make_tabulated(
            "table",
            vec![0.0, 1.0, 2.0],
            vec![1.0, 1.0, 1.5],
            vec![0.5, 0.25, 0.25],
            0.5,
            n0(),
        )
        .unwrap();
        assert_relative_eq!(m.a(1.5), 1.25);
        assert_relative_eq!(m.a(4.0), 2.5);
        assert_relative_eq!(m.b(0.5), 0.375);
        assert_relative_eq!(m.b_prime(3.0), 0.0);
        // the kink of a at x = 1 sits inside one cubic table cell
        assert_relative_eq!(m.capital_a(1.0).unwrap(), 1.0, max_relative = 2e-6);
        assert_relative_eq!(m.capital_a(0.5).unwrap(), 0.5, max_relative = 1e-9);
    }

    #[test]
    fn divergent_a_is_reported() {
        let m = make_custom(
            CustomRates {
                name: "linear".into(),
                a: Arc::new(|x: f64| x),
                b: Arc::new(|_| 0.0),
                da: Arc::new(|_| 1.0),
                db: Arc::new(|_| 0.0),
                phi0: 0.0,
                exact_a: None,
                x_max: 1e4,
            },
            n0(),
        )
        .unwrap();
        assert!(!m.a_integrable());
        assert!(matches!(m.capital_a(1.0), Err(Error::NonIntegrableRate(_))));
    }
}
