//! Gauss–Legendre and Gauss–Kronrod quadrature.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Computes the n-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&z, &w)| (c + h * z, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

const MAX_CACHED: usize = 64;

/// Shared rule for small n, computed once.
pub fn gauss(n: usize) -> &'static GaussRule {
    static RULES: [OnceLock<GaussRule>; MAX_CACHED + 1] = [const { OnceLock::new() }; MAX_CACHED + 1];
    assert!(n >= 1 && n <= MAX_CACHED, "cached rules cover 1..=64 nodes");
    RULES[n].get_or_init(|| GaussRule::new(n))
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Composite 32-node Gauss–Legendre, bisecting panels until the
/// refined and unrefined panel sums agree to `rel` (with floor `abs`).
pub fn adaptive_gl<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    rel: f64,
    abs: f64,
) -> Result<Estimate> {
    let rule = gauss(32);
    let mut stack: Vec<(f64, f64, f64, usize)> = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let v = rule.integrate(w[0], w[1], &mut f);
            stack.push((w[0], w[1], v, 0));
        }
    }
    let mut total = 0.0;
    let mut err = 0.0;
    let mut panels = 0;
    let scale0: f64 = stack.iter().map(|p| p.2.abs()).sum();
    let span = (breaks[breaks.len() - 1] - breaks[0]).max(f64::MIN_POSITIVE);
    while let Some((a, b, whole, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let left = rule.integrate(a, m, &mut f);
        let right = rule.integrate(m, b, &mut f);
        let diff = (left + right - whole).abs();
        let width_share = ((b - a) / span).max(1e-6);
        let tol = (rel * scale0).max(abs) * width_share;
        if diff <= tol {
            total += left + right;
            err += diff;
            panels += 2;
        } else if depth >= 60 || !f64::is_finite(diff) {
            return Err(Error::Quadrature(format!(
                "no convergence on [{a:.6e}, {b:.6e}] after {depth} bisections (change {diff:.3e})"
            )));
        } else {
            stack.push((a, m, left, depth + 1));
            stack.push((m, b, right, depth + 1));
        }
    }
    Ok(Estimate { value: total, error: err, panels })
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel with its embedded 7-point Gauss estimate.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod on [a, b].
pub fn adaptive_gk<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs: f64,
    rel: f64,
    max_panels: usize,
) -> Result<Estimate> {
    let (v, e) = gk15(&mut f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integrand on [{a:.3e}, {b:.3e}]"
            )));
        }
        if err <= abs.max(rel * total.abs()) {
            return Ok(Estimate { value: total, error: err, panels: panels.len() });
        }
        if panels.len() >= max_panels {
            return Err(Error::Quadrature(format!(
                "Gauss-Kronrod on [{a:.3e}, {b:.3e}] stalled at error {err:.3e} with {} panels",
                panels.len()
            )));
        }
        let (i, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (pa, pb, _, _) = panels.swap_remove(i);
        let m = 0.5 * (pa + pb);
        let (l, el) = gk15(&mut f, pa, m);
        let (r, er) = gk15(&mut f, m, pb);
        panels.push((pa, m, l, el));
        panels.push((m, pb, r, er));
    }
}
