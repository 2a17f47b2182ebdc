//! Initial size distributions f_in.

use crate::error::{Error, Result};
use crate::quadrature::gauss;

/// Shape of an initial density.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    Zero,
    /// c·1_{[x1, x2]}.
    Indicator { c: f64, x1: f64, x2: f64 },
    /// c·x^p·e^{−qx} on (0, cutoff].
    Gamma { c: f64, p: f64, q: f64, cutoff: f64 },
    /// Linear interpolation of samples, zero outside the sampled range.
    Tabulated { xs: Vec<f64>, ys: Vec<f64> },
    Sum(Vec<InitialDensity>),
}

/// Nonnegative initial density with cached number and mass moments.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDensity {
    kind: DensityKind,
    m0: f64,
    m1: f64,
}

/// A sub-interval on which the density is smooth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    /// Density behaves like a non-integer power at `lo`.
    pub singular_lo: bool,
}

impl InitialDensity {
    pub fn zero() -> Self {
        Self::from_kind(DensityKind::Zero).expect("zero density is valid")
    }

    pub fn indicator(c: f64, x1: f64, x2: f64) -> Result<Self> {
        if !(c >= 0.0 && x1 >= 0.0 && x2 > x1 && x2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "indicator needs c >= 0 and 0 <= x1 < x2 (got c={c}, [{x1}, {x2}])"
            )));
        }
        Self::from_kind(DensityKind::Indicator { c, x1, x2 })
    }

    pub fn gamma(c: f64, p: f64, q: f64, cutoff: f64) -> Result<Self> {
        if !(c >= 0.0 && p > -1.0 && q >= 0.0 && cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma density needs c >= 0, p > -1, q >= 0, finite cutoff > 0 (got {c}, {p}, {q}, {cutoff})"
            )));
        }
        Self::from_kind(DensityKind::Gamma { c, p, q, cutoff })
    }

    pub fn tabulated(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::InvalidParameter("tabulated density needs matching columns of length >= 2".into()));
        }
        if xs[0] < 0.0 || xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("tabulated density x must be nonnegative and increasing".into()));
        }
        if ys.iter().any(|&y| !(y >= 0.0) || !y.is_finite()) {
            return Err(Error::InvalidParameter("tabulated density values must be finite and nonnegative".into()));
        }
        Self::from_kind(DensityKind::Tabulated { xs, ys })
    }

    pub fn sum(parts: Vec<InitialDensity>) -> Result<Self> {
        Self::from_kind(DensityKind::Sum(parts))
    }

    /// Rescales the density by a nonnegative factor.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s >= 0.0) {
            return Err(Error::InvalidParameter(format!("scale must be nonnegative, got {s}")));
        }
        let kind = match &self.kind {
            DensityKind::Zero => DensityKind::Zero,
            DensityKind::Indicator { c, x1, x2 } => DensityKind::Indicator { c: c * s, x1: *x1, x2: *x2 },
            DensityKind::Gamma { c, p, q, cutoff } => DensityKind::Gamma { c: c * s, p: *p, q: *q, cutoff: *cutoff },
            DensityKind::Tabulated { xs, ys } => {
                DensityKind::Tabulated { xs: xs.clone(), ys: ys.iter().map(|y| y * s).collect() }
            }
            DensityKind::Sum(v) => DensityKind::Sum(v.iter().map(|d| d.scaled(s)).collect::<Result<_>>()?),
        };
        Self::from_kind(kind)
    }

    fn from_kind(kind: DensityKind) -> Result<Self> {
        let mut d = InitialDensity { kind, m0: 0.0, m1: 0.0 };
        d.m0 = d.integrate(|_| 1.0);
        d.m1 = d.integrate(|x| x);
        if !(d.m0.is_finite() && d.m1.is_finite()) {
            return Err(Error::InvalidParameter("initial density has infinite moments".into()));
        }
        Ok(d)
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        self.pieces().is_empty() || self.m0 == 0.0
    }

    /// ∫ f_in.
    pub fn m0(&self) -> f64 {
        self.m0
    }

    /// ∫ x f_in.
    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            DensityKind::Zero => 0.0,
            DensityKind::Indicator { c, x1, x2 } => {
                if x >= *x1 && x <= *x2 {
                    *c
                } else {
                    0.0
                }
            }
            DensityKind::Gamma { c, p, q, cutoff } => {
                if x > 0.0 && x <= *cutoff {
                    c * x.powf(*p) * (-q * x).exp()
                } else {
                    0.0
                }
            }
            DensityKind::Tabulated { xs, ys } => {
                if x < xs[0] || x > xs[xs.len() - 1] {
                    return 0.0;
                }
                let i = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1) - 1;
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                ys[i] + t * (ys[i + 1] - ys[i])
            }
            DensityKind::Sum(v) => v.iter().map(|d| d.eval(x)).sum(),
        }
    }

    /// Points where the density or its derivative may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breaks(&mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_breaks(&self, out: &mut Vec<f64>) {
        match &self.kind {
            DensityKind::Zero => {}
            DensityKind::Indicator { x1, x2, .. } => out.extend([*x1, *x2]),
            DensityKind::Gamma { cutoff, .. } => out.extend([0.0, *cutoff]),
            DensityKind::Tabulated { xs, .. } => out.extend(xs.iter().copied()),
            DensityKind::Sum(v) => v.iter().for_each(|d| d.collect_breaks(out)),
        }
    }

    /// Largest point of the support.
    pub fn support_max(&self) -> f64 {
        self.pieces().iter().map(|p| p.hi).fold(0.0, f64::max)
    }

    /// Disjoint intervals covering the support, each free of breakpoints.
    pub fn pieces(&self) -> Vec<Piece> {
        let mut raw = Vec::new();
        self.collect_pieces(&mut raw);
        if raw.is_empty() {
            return raw;
        }
        let mut cuts: Vec<f64> = raw.iter().flat_map(|p| [p.lo, p.hi]).collect();
        cuts.extend(self.breakpoints());
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out = Vec::new();
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let covering: Vec<&Piece> = raw.iter().filter(|p| p.lo <= mid && mid <= p.hi).collect();
            if covering.is_empty() {
                continue;
            }
            let singular = covering.iter().any(|p| p.singular_lo && p.lo == w[0]);
            out.push(Piece { lo: w[0], hi: w[1], singular_lo: singular });
        }
        out
    }

    fn collect_pieces(&self, out: &mut Vec<Piece>) {
        match &self.kind {
            DensityKind::Zero => {}
            DensityKind::Indicator { c, x1, x2 } => {
                if *c > 0.0 {
                    out.push(Piece { lo: *x1, hi: *x2, singular_lo: false });
                }
            }
            DensityKind::Gamma { c, p, cutoff, .. } => {
                if *c > 0.0 {
                    out.push(Piece { lo: 0.0, hi: *cutoff, singular_lo: p.fract() != 0.0 });
                }
            }
            DensityKind::Tabulated { xs, ys } => {
                if ys.iter().any(|&y| y > 0.0) {
                    out.push(Piece { lo: xs[0], hi: xs[xs.len() - 1], singular_lo: false });
                }
            }
            DensityKind::Sum(v) => v.iter().for_each(|d| d.collect_pieces(out)),
        }
    }

    /// Quadrature nodes (x, w·f_in(x)) over the support: `panels` Gauss panels
    /// of `order` nodes per piece, geometrically graded at singular ends.
    pub fn quadrature_nodes(&self, panels: usize, order: usize) -> Vec<(f64, f64)> {
        let rule = gauss(order);
        let mut out = Vec::new();
        for piece in self.pieces() {
            for (a, b) in panel_breaks(&piece, panels) {
                for (x, w) in rule.mapped(a, b) {
                    let fx = self.eval(x);
                    if fx != 0.0 {
                        out.push((x, w * fx));
                    }
                }
            }
        }
        out
    }

    /// ∫ h f_in by composite Gauss–Legendre.
    pub fn integrate<H: FnMut(f64) -> f64>(&self, mut h: H) -> f64 {
        self.quadrature_nodes(8, 16).into_iter().map(|(x, w)| w * h(x)).sum()
    }

    /// ∫_x^∞ f_in.
    pub fn tail(&self, x: f64) -> f64 {
        let rule = gauss(16);
        let mut total = 0.0;
        for piece in self.pieces() {
            if piece.hi <= x {
                continue;
            }
            let lo = piece.lo.max(x);
            let sub = Piece { lo, hi: piece.hi, singular_lo: piece.singular_lo && lo == piece.lo };
            for (a, b) in panel_breaks(&sub, 8) {
                total += rule.integrate(a, b, |s| self.eval(s));
            }
        }
        total
    }
}

pub(crate) fn panel_breaks(piece: &Piece, panels: usize) -> Vec<(f64, f64)> {
    let (lo, hi) = (piece.lo, piece.hi);
    let mut cuts = Vec::new();
    if piece.singular_lo {
        let len = hi - lo;
        cuts.push(lo);
        for k in (1..=40).rev() {
            cuts.push(lo + len * 0.5f64.powi(k));
        }
        cuts.push(hi);
    } else {
        for i in 0..=panels {
            cuts.push(lo + (hi - lo) * i as f64 / panels as f64);
        }
    }
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn indicator_moments() {
        let d = InitialDensity::indicator(0.5, 1.0, 2.0).unwrap();
        assert_relative_eq!(d.m0(), 0.5, epsilon = 1e-14);
        assert_relative_eq!(d.m1(), 0.75, epsilon = 1e-14);
        assert_relative_eq!(d.tail(1.5), 0.25, epsilon = 1e-14);
        assert_eq!(d.eval(2.5), 0.0);
    }

    #[test]
    fn gamma_moments_closed_form() {
        // c x^p e^{-qx} with p = 1/2, q = 1, cutoff large: M0 = Γ(3/2), M1 = Γ(5/2)
        let d = InitialDensity::gamma(1.0, 0.5, 1.0, 60.0).unwrap();
        let g32 = 0.886_226_925_452_758;
        assert_relative_eq!(d.m0(), g32, max_relative = 1e-10);
        assert_relative_eq!(d.m1(), 1.5 * g32, max_relative = 1e-10);
    }

    #[test]
    fn sum_and_scaling() {
        let a = InitialDensity::indicator(1.0, 0.0, 1.0).unwrap();
        let b = InitialDensity::indicator(2.0, 0.5, 1.5).unwrap();
        let s = InitialDensity::sum(vec![a, b]).unwrap();
        assert_relative_eq!(s.m0(), 3.0, epsilon = 1e-13);
        assert_eq!(s.breakpoints(), vec![0.0, 0.5, 1.0, 1.5]);
        assert_eq!(s.pieces().len(), 3);
        let h = s.scaled(0.5).unwrap();
        assert_relative_eq!(h.m1(), 0.5 * s.m1(), epsilon = 1e-13);
    }

    #[test]
    fn tabulated_rejects_negative() {
        assert!(InitialDensity::tabulated(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        let t = InitialDensity::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert_relative_eq!(t.m0(), 1.0, epsilon = 1e-13);
        assert_relative_eq!(t.m1(), 1.0, epsilon = 1e-13);
    }
}
