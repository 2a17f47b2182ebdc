use crate::error::{Error, Result};
use crate::quadrature::{adaptive_gk, gauss};

use super::RateFn;

const NODES: usize = 2048;
const X_LO: f64 = 1e-10;

/// Monotone cubic Hermite table of A on a log grid, with a local power-law
/// extension below the first node and quadrature beyond the last.
#[derive(Debug, Clone)]
pub struct ATable {
    ln_lo: f64,
    dl: f64,
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Per-interval end slopes (left, right) after limiting.
    slopes: Vec<(f64, f64)>,
    /// Local exponent of a near 0, a ≈ a(x_lo)(x/x_lo)^p.
    p: f64,
}

impl ATable {
    pub(crate) fn build(a: &RateFn, x_max: f64) -> Result<ATable> {
        let x_max = x_max.max(10.0 * X_LO);
        let a0 = a(X_LO);
        let a1 = a(2.0 * X_LO);
        if !(a0 > 0.0 && a1 > 0.0) {
            return Err(Error::DegenerateRate(X_LO));
        }
        let p = (a1 / a0).ln() / std::f64::consts::LN_2;
        // 1/a must be integrable on (0, x_lo]; the local exponent decides.
        if p >= 1.0 - 1e-6 {
            return Err(Error::NonIntegrableRate(format!("local exponent of a at 0 is {p:.6}")));
        }
        let ln_lo = X_LO.ln();
        let dl = (x_max.ln() - ln_lo) / (NODES - 1) as f64;
        let xs: Vec<f64> = (0..NODES).map(|i| (ln_lo + dl * i as f64).exp()).collect();
        let rule = gauss(16);
        let mut ys = Vec::with_capacity(NODES);
        ys.push(X_LO / (a0 * (1.0 - p)));
        for w in xs.windows(2) {
            let inc = rule.integrate(w[0], w[1], |x| 1.0 / a(x));
            if !(inc.is_finite() && inc > 0.0) {
                return Err(Error::DegenerateRate(w[0]));
            }
            let prev = *ys.last().expect("nonempty");
            ys.push(prev + inc);
        }
        let m: Vec<f64> = xs.iter().map(|&x| 1.0 / a(x)).collect();
        let slopes = (0..NODES - 1)
            .map(|i| {
                let sec = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
                (m[i].min(3.0 * sec), m[i + 1].min(3.0 * sec))
            })
            .collect();
        Ok(ATable { ln_lo, dl, xs, ys, slopes, p })
    }

    fn interval(&self, x: f64) -> usize {
        let i = ((x.ln() - self.ln_lo) / self.dl).floor() as isize;
        let mut i = i.clamp(0, NODES as isize - 2) as usize;
        while i > 0 && x < self.xs[i] {
            i -= 1;
        }
        while i < NODES - 2 && x > self.xs[i + 1] {
            i += 1;
        }
        i
    }

    fn hermite(&self, i: usize, x: f64) -> (f64, f64, f64) {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (d0, d1) = self.slopes[i];
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let val = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = 6.0 * t2 - 6.0 * t;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = -dh00;
        let dh11 = 3.0 * t2 - 2.0 * t;
        let der = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
        let ddh00 = 12.0 * t - 6.0;
        let ddh10 = 6.0 * t - 4.0;
        let ddh11 = 6.0 * t - 2.0;
        let curv = (ddh00 * (y0 - y1)) / (h * h) + (ddh10 * d0 + ddh11 * d1) / h;
        (val, der, curv)
    }

    fn x_hi(&self) -> f64 {
        self.xs[NODES - 1]
    }

    pub(crate) fn eval(&self, x: f64, a: &RateFn) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x < X_LO {
            self.ys[0] * (x / X_LO).powf(1.0 - self.p)
        } else if x > self.x_hi() {
            let hi = self.x_hi();
            let tail = adaptive_gk(|s| 1.0 / a(s), hi, x, 1e-14, 1e-13, 2000)
                .map(|e| e.value)
                .unwrap_or(f64::NAN);
            self.ys[NODES - 1] + tail
        } else {
            self.hermite(self.interval(x), x).0
        }
    }

    pub(crate) fn slope(&self, x: f64, a: &RateFn) -> f64 {
        if x < X_LO {
            self.ys[0] * (1.0 - self.p) / X_LO * (x / X_LO).powf(-self.p)
        } else if x > self.x_hi() {
            1.0 / a(x)
        } else {
            self.hermite(self.interval(x), x).1
        }
    }

    pub(crate) fn curvature(&self, x: f64, a: &RateFn) -> f64 {
        if x < X_LO {
            -self.p * self.ys[0] * (1.0 - self.p) / (X_LO * X_LO) * (x / X_LO).powf(-self.p - 1.0)
        } else if x > self.x_hi() {
            let h = 1e-6 * x;
            (1.0 / a(x + h) - 1.0 / a(x - h)) / (2.0 * h)
        } else {
            self.hermite(self.interval(x), x).2
        }
    }

    pub(crate) fn inverse(&self, y: f64, a: &RateFn) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y < self.ys[0] {
            return X_LO * (y / self.ys[0]).powf(1.0 / (1.0 - self.p));
        }
        if y > self.ys[NODES - 1] {
            let mut lo = self.x_hi();
            let mut hi = 2.0 * lo;
            while self.eval(hi, a) < y {
                lo = hi;
                hi *= 2.0;
                if hi > 1e300 {
                    return f64::INFINITY;
                }
            }
            return bisect_newton(|x| self.eval(x, a) - y, |x| 1.0 / a(x), lo, hi);
        }
        let i = self.ys.partition_point(|&v| v <= y).clamp(1, NODES - 1) - 1;
        bisect_newton(
            |x| self.hermite(i, x).0 - y,
            |x| self.hermite(i, x).1,
            self.xs[i],
            self.xs[i + 1],
        )
    }
}

/// Safeguarded Newton iteration for an increasing function on [lo, hi].
fn bisect_newton<F: Fn(f64) -> f64, D: Fn(f64) -> f64>(f: F, d: D, mut lo: f64, mut hi: f64) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dx = d(x);
        let mut xn = x - fx / dx;
        if !(xn > lo && xn < hi) {
            xn = 0.5 * (lo + hi);
        }
        if (xn - x).abs() <= 1e-15 * x.abs() || hi - lo <= 1e-15 * hi.abs() {
            return xn;
        }
        x = xn;
    }
    x
}
