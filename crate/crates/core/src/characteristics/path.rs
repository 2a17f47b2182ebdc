use crate::error::{Error, Result};
use crate::quadrature::gauss;

/// Piecewise-linear monomer concentration u(t) on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomerPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl MonomerPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidParameter("path needs matching, nonempty time and value columns".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("path times must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("path values must be finite".into()));
        }
        Ok(MonomerPath { times, values })
    }

    /// u ≡ c on [t0, t1], with nodes every `dt`.
    pub fn constant(c: f64, t0: f64, t1: f64, dt: f64) -> Result<Self> {
        Self::from_fn(|_| c, t0, t1, dt)
    }

    /// Samples `f` on a uniform grid of step close to `dt`.
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(t1 > t0) || !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("need t1 > t0 and dt > 0 (got {t0}, {t1}, {dt})")));
        }
        let n = ((t1 - t0) / dt).ceil().max(1.0) as usize;
        let times: Vec<f64> = (0..=n).map(|i| t0 + (t1 - t0) * i as f64 / n as f64).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index i with times[i] ≤ t < times[i+1] (clamped).
    #[inline]
    pub fn segment(&self, t: f64) -> usize {
        let n = self.times.len();
        if n < 2 {
            return 0;
        }
        self.times.partition_point(|&v| v <= t).clamp(1, n - 1) - 1
    }

    /// Linear interpolation, constant beyond the ends.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.segment(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = (t - t0) / (t1 - t0);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Affine piece (t_ref, u_ref, slope) of the interpolant around `t`;
    /// flat outside the grid.
    #[inline]
    pub(crate) fn local_linear(&self, t: f64) -> (f64, f64, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (t, self.values[0], 0.0);
        }
        if t >= self.times[n - 1] {
            return (t, self.values[n - 1], 0.0);
        }
        let i = self.segment(t);
        let slope = (self.values[i + 1] - self.values[i]) / (self.times[i + 1] - self.times[i]);
        (self.times[i], self.values[i], slope)
    }

    /// First node strictly beyond `t` in direction `dir`.
    #[inline]
    pub(crate) fn next_node(&self, t: f64, dir: f64) -> Option<f64> {
        if dir > 0.0 {
            let i = self.times.partition_point(|&v| v <= t);
            self.times.get(i).copied()
        } else {
            let i = self.times.partition_point(|&v| v < t);
            if i == 0 {
                None
            } else {
                Some(self.times[i - 1])
            }
        }
    }

    /// ∫_a^b g(u(s)) ds, exact for polynomial g of degree ≤ 7 in u.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let rule = gauss(4);
        let mut cuts = vec![a];
        cuts.extend(self.times.iter().copied().filter(|&t| t > a && t < b));
        cuts.push(b);
        cuts.windows(2).map(|w| rule.integrate(w[0], w[1], |s| g(self.eval(s)))).sum()
    }

    /// The path restricted to [t0, t1], with the end points inserted as nodes.
    pub fn restrict(&self, t0: f64, t1: f64) -> Result<Self> {
        let mut times = vec![t0];
        times.extend(self.times.iter().copied().filter(|&t| t > t0 && t < t1));
        times.push(t1);
        let values = times.iter().map(|&t| self.eval(t)).collect();
        Self::new(times, values)
    }

    /// Appends nodes after the current end.
    pub fn extend(&mut self, times: &[f64], values: &[f64]) -> Result<()> {
        for (&t, &v) in times.iter().zip(values) {
            if !(t > self.t_end()) {
                return Err(Error::InvalidParameter(format!("appended time {t} is not after {}", self.t_end())));
            }
            self.times.push(t);
            self.values.push(v);
        }
        Ok(())
    }
}
