//! Dormand–Prince 5(4) steps with continuous extension.

/// Relative/absolute error tolerances for the embedded error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rel: 1e-9, abs: 1e-11 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// An attempted step from `t0` to `t0 + h`.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    /// Derivative at the end point (first stage of the next step).
    pub k_end: [f64; N],
    /// Scaled RMS error; the step is acceptable when it is at most 1.
    pub err: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> Step<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Fourth-order continuous extension inside the step.
    pub fn dense(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut out = [0.0; N];
        for i in 0..N {
            let r = &self.r;
            out[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        out
    }
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Performs one Dormand–Prince step. `k1` must be `f(t0, y0)`.
pub fn step<const N: usize, F>(f: &mut F, t0: f64, y0: &[f64; N], k1: &[f64; N], h: f64, tol: &Tolerances) -> Step<N>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k2 = f(t0 + C2 * h, &axpy(y0, h, &[(A21, k1)]));
    let k3 = f(t0 + C3 * h, &axpy(y0, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t0 + C4 * h, &axpy(y0, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(t0 + C5 * h, &axpy(y0, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(t0 + h, &axpy(y0, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y1 = axpy(y0, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = f(t0 + h, &y1);

    let mut sq = 0.0;
    let mut r = [[0.0; N]; 5];
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = tol.abs + tol.rel * y0[i].abs().max(y1[i].abs());
        sq += (e / sc) * (e / sc);
        let dy = y1[i] - y0[i];
        let bspl = h * k1[i] - dy;
        r[0][i] = y0[i];
        r[1][i] = dy;
        r[2][i] = bspl;
        r[3][i] = dy - h * k7[i] - bspl;
        r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    let err = (sq / N as f64).sqrt();
    Step { t0, h, y0: *y0, y1, k_end: k7, err: if err.is_finite() { err } else { f64::INFINITY }, r }
}

/// Standard step-size update factor for an error ratio.
pub fn next_h(h: f64, err: f64) -> f64 {
    let fac = if err <= 1e-10 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
    h * fac
}

/// Integrates from `t0` to `t1` with adaptive steps, calling `on_step`
/// for every accepted step. Returns the final state.
pub fn integrate<const N: usize, F, G>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    tol: &Tolerances,
    mut on_step: G,
) -> Result<[f64; N], String>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    G: FnMut(&Step<N>),
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok(y0);
    }
    let mut t = t0;
    let mut y = y0;
    let mut k = f(t, &y);
    let mut h = 1e-3 * span.max(1e-12);
    let hmin = 1e-14 * (1.0 + t0.abs().max(t1.abs()));
    let mut steps = 0usize;
    while dir * (t1 - t) > 0.0 {
        steps += 1;
        if steps > 10_000_000 {
            return Err(format!("too many steps at t = {t:e}"));
        }
        let rem = (t1 - t).abs();
        let last = h >= rem;
        let hh = if last { rem } else { h };
        let s = step(&mut f, t, &y, &k, dir * hh, tol);
        if s.err <= 1.0 {
            on_step(&s);
            t = if last { t1 } else { t + dir * hh };
            y = s.y1;
            k = s.k_end;
            h = next_h(hh, s.err);
        } else {
            h = next_h(hh, s.err).min(0.5 * hh);
            if h < hmin {
                return Err(format!("step size underflow at t = {t:e}"));
            }
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_growth() {
        let y = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 2.0, &Tolerances::default(), |_| {}).unwrap();
        assert_relative_eq!(y[0], 2.0f64.exp(), max_relative = 1e-8);
        let y = integrate(|_, y: &[f64; 1]| [y[0]], 2.0, [1.0], 0.0, &Tolerances::default(), |_| {}).unwrap();
        assert_relative_eq!(y[0], (-2.0f64).exp(), max_relative = 1e-8);
    }

    #[test]
    fn dense_output_interpolates() {
        let tol = Tolerances::default();
        let mut f = |_: f64, y: &[f64; 2]| [y[1], -y[0]];
        let y0 = [0.0, 1.0];
        let k = f(0.0, &y0);
        let s = step(&mut f, 0.0, &y0, &k, 0.1, &tol);
        for th in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let t = 0.1 * th;
            let d = s.dense(t);
            assert!((d[0] - t.sin()).abs() < 1e-8, "th={th}: {} vs {}", d[0], t.sin());
        }
    }

    #[test]
    fn polynomial_rhs_is_exact_in_one_step() {
        let tol = Tolerances::default();
        let mut f = |t: f64, _: &[f64; 1]| [t * t * t];
        let k = f(0.0, &[0.0]);
        let s = step(&mut f, 0.0, &[0.0], &k, 1.0, &tol);
        assert_relative_eq!(s.y1[0], 0.25, epsilon = 1e-15);
    }
}
