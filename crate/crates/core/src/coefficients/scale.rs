//! Scale function and speed measure.
//!
//! `h(x) = 2∫_0^x b/(ρa)`, `S(x) = ∫_0^x e^{-h}/a`, speed density `e^h/ρ` and
//! `V(x) = ∫_0^x e^h/ρ`. Outside the domain the coefficients are extended by
//! `(1, 1, 0)`.

use crate::error::Result;
use crate::quad;

use super::Coefficients;

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
enum Shape {
    /// Constant `(a, ρ)` and `h' = c`.
    Constant { a: f64, rho: f64, c: f64 },
    /// `b ≡ 0`, so `h` is flat.
    Driftless,
    General,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    shape: Shape,
}

/// Scale and speed of a coefficient set, anchored at `x = 0`.
#[derive(Debug, Clone)]
pub struct ScaleData {
    coeffs: Coefficients,
    /// Finite breakpoints (domain ends, piece starts, and 0).
    points: Vec<f64>,
    /// Segments between consecutive points, plus the two unbounded tails.
    segments: Vec<Segment>,
    h: Vec<f64>,
    s: Vec<f64>,
    v: Vec<f64>,
}

impl ScaleData {
    pub fn new(coeffs: &Coefficients) -> Result<Self> {
        let mut points: Vec<f64> = vec![0.0];
        for x in [coeffs.left, coeffs.right].into_iter().chain(coeffs.pieces.iter().map(|p| p.start)) {
            if x.is_finite() {
                points.push(x);
            }
        }
        points.sort_by(f64::total_cmp);
        points.dedup();

        let mut segments = Vec::with_capacity(points.len() + 1);
        let bounds = std::iter::once(f64::NEG_INFINITY).chain(points.iter().copied()).chain(std::iter::once(f64::INFINITY));
        let bounds: Vec<f64> = bounds.collect();
        for w in bounds.windows(2) {
            segments.push(Segment { lo: w[0], hi: w[1], shape: shape_on(coeffs, w[0], w[1]) });
        }
        let mut data = Self {
            coeffs: coeffs.clone(),
            h: vec![0.0; points.len()],
            s: vec![0.0; points.len()],
            v: vec![0.0; points.len()],
            points,
            segments,
        };
        let zero = data.points.iter().position(|&p| p == 0.0).expect("0 is a point");
        // Segment i + 1 spans [points[i], points[i + 1]].
        for i in zero + 1..data.points.len() {
            let seg = data.segments[i];
            let (h, s, v) = data.integrate_from(seg, seg.lo, data.h[i - 1], seg.hi)?;
            data.h[i] = data.h[i - 1] + h;
            data.s[i] = data.s[i - 1] + s;
            data.v[i] = data.v[i - 1] + v;
        }
        for i in (0..zero).rev() {
            let seg = data.segments[i + 1];
            // h at the left end is needed as the anchor; get it first.
            let dh = data.h_increment(seg, seg.hi, seg.lo)?;
            let h_lo = data.h[i + 1] + dh;
            let (_, s, v) = data.integrate_from(seg, seg.lo, h_lo, seg.hi)?;
            data.h[i] = h_lo;
            data.s[i] = data.s[i + 1] - s;
            data.v[i] = data.v[i + 1] - v;
        }
        Ok(data)
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    fn h_slope(&self, x: f64) -> f64 {
        let (a, r, b) = self.coeffs.eval(x);
        2.0 * b / (a * r)
    }

    /// `h(to) - h(from)` inside one segment.
    fn h_increment(&self, seg: Segment, from: f64, to: f64) -> Result<f64> {
        match seg.shape {
            Shape::Constant { c, .. } => Ok(c * (to - from)),
            Shape::Driftless => Ok(0.0),
            Shape::General => quad::integrate(|y| self.h_slope(y), from, to, TOL),
        }
    }

    /// Increments of `(h, S, V)` from `from` (where `h = h_from`) to `to`.
    fn integrate_from(&self, seg: Segment, from: f64, h_from: f64, to: f64) -> Result<(f64, f64, f64)> {
        let d = to - from;
        if d == 0.0 {
            return Ok((0.0, 0.0, 0.0));
        }
        match seg.shape {
            Shape::Constant { a, rho, c } => {
                let (ds, dv) = if c == 0.0 {
                    (d, d)
                } else {
                    (-(-c * d).exp_m1() / c, (c * d).exp_m1() / c)
                };
                Ok((c * d, (-h_from).exp() / a * ds, h_from.exp() / rho * dv))
            }
            Shape::Driftless => {
                let ia = quad::integrate(|y| 1.0 / self.coeffs.eval(y).0, from, to, TOL)?;
                let ir = quad::integrate(|y| 1.0 / self.coeffs.eval(y).1, from, to, TOL)?;
                Ok((0.0, (-h_from).exp() * ia, h_from.exp() * ir))
            }
            Shape::General => {
                let h_at = |y: f64| h_from + self.h_increment(seg, from, y).unwrap_or(f64::NAN);
                let ds = quad::integrate(|y| (-h_at(y)).exp() / self.coeffs.eval(y).0, from, to, TOL)?;
                let dv = quad::integrate(|y| h_at(y).exp() / self.coeffs.eval(y).1, from, to, TOL)?;
                Ok((self.h_increment(seg, from, to)?, ds, dv))
            }
        }
    }

    /// Index into `points` of the anchor for `x` and the containing segment.
    fn locate(&self, x: f64) -> (usize, Segment) {
        let j = self.points.partition_point(|&p| p <= x);
        if j == 0 {
            (0, self.segments[0])
        } else {
            (j - 1, self.segments[j])
        }
    }

    fn values(&self, x: f64) -> Result<(f64, f64, f64)> {
        let (i, seg) = self.locate(x);
        let anchor = self.points[i];
        if x >= anchor {
            let (dh, ds, dv) = self.integrate_from(seg, anchor, self.h[i], x)?;
            Ok((self.h[i] + dh, self.s[i] + ds, self.v[i] + dv))
        } else {
            let dh = self.h_increment(seg, anchor, x)?;
            let (_, ds, dv) = self.integrate_from(seg, x, self.h[i] + dh, anchor)?;
            Ok((self.h[i] + dh, self.s[i] - ds, self.v[i] - dv))
        }
    }

    pub fn h(&self, x: f64) -> Result<f64> {
        Ok(self.values(x)?.0)
    }

    /// Scale function `S(x)`, with `S(0) = 0`.
    pub fn scale(&self, x: f64) -> Result<f64> {
        Ok(self.values(x)?.1)
    }

    /// Speed measure density `e^{h(x)} / ρ(x)`.
    pub fn speed_density(&self, x: f64) -> Result<f64> {
        Ok(self.h(x)?.exp() / self.coeffs.eval(x).1)
    }

    /// `V(x) = ∫_0^x e^h / ρ`.
    pub fn speed(&self, x: f64) -> Result<f64> {
        Ok(self.values(x)?.2)
    }

    /// `P_x[exit at the right end]` for the interval `[lo, hi]`.
    pub fn exit_right_prob(&self, lo: f64, hi: f64, x: f64) -> Result<f64> {
        let (sl, sh, sx) = (self.scale(lo)?, self.scale(hi)?, self.scale(x)?);
        Ok((sx - sl) / (sh - sl))
    }
}

fn shape_on(c: &Coefficients, lo: f64, hi: f64) -> Shape {
    if hi <= c.left || lo >= c.right {
        return Shape::Constant { a: 1.0, rho: 1.0, c: 0.0 };
    }
    let p = &c.pieces[c.piece_index(if lo.is_finite() { lo } else { c.pieces[0].start })];
    match (p.a.as_constant(), p.rho.as_constant(), p.b.as_constant()) {
        (Some(a), Some(rho), Some(b)) => Shape::Constant { a, rho, c: 2.0 * b / (rho * a) },
        (_, _, Some(0.0)) => Shape::Driftless,
        _ => Shape::General,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{Boundary, Piece};
    use crate::expr::Expr;

    #[test]
    fn two_valued_scale_is_piecewise_linear() {
        let c = Coefficients::piecewise_constant(
            -1.0,
            1.0,
            (Boundary::Dirichlet, Boundary::Dirichlet),
            &[-1.0, 0.0],
            &[1.0, 4.0],
            &[1.0, 1.0],
        )
        .unwrap();
        let s = ScaleData::new(&c).unwrap();
        assert!((s.scale(-1.0).unwrap() + 1.0).abs() < 1e-15);
        assert!((s.scale(1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((s.exit_right_prob(-1.0, 1.0, 0.0).unwrap() - 0.8).abs() < 1e-14);
        assert_eq!(s.scale(3.0).unwrap(), 0.25 + 2.0);
    }

    #[test]
    fn constant_drift_matches_closed_form() {
        // a = ρ = 1, b = μ: S(x) = (1 - e^{-2μx}) / (2μ).
        let mu = 0.7;
        let c = Coefficients::new(-2.0, 2.0, Boundary::Dirichlet, Boundary::Dirichlet, vec![Piece::new(-2.0, 1.0, 1.0, mu)])
            .unwrap();
        let s = ScaleData::new(&c).unwrap();
        for &x in &[-1.5, -0.3, 0.0, 0.9, 2.0] {
            let exact = -(-2.0 * mu * x).exp_m1() / (2.0 * mu);
            assert!((s.scale(x).unwrap() - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn general_pieces_agree_with_nested_quadrature() {
        let b = Expr::Sin { amp: 0.5, freq: 1.0, phase: 0.0 };
        let a = Expr::Sum(vec![Expr::Const(2.0), Expr::Cos { amp: 0.5, freq: 3.0, phase: 0.0 }]);
        let c = Coefficients::new(-1.0, 1.5, Boundary::Dirichlet, Boundary::Dirichlet, vec![Piece::new(-1.0, a.clone(), 1.0, b.clone())])
            .unwrap();
        let s = ScaleData::new(&c).unwrap();
        let h = |x: f64| quad::integrate(|y| 2.0 * b.eval(y) / a.eval(y), 0.0, x, 1e-14).unwrap();
        let exact = |x: f64| quad::integrate(|y| (-h(y)).exp() / a.eval(y), 0.0, x, 1e-13).unwrap();
        for &x in &[-1.0, -0.4, 0.7, 1.5] {
            assert!((s.scale(x).unwrap() - exact(x)).abs() < 1e-10, "x = {x}");
        }
        assert!((s.speed_density(0.5).unwrap() - h(0.5).exp()).abs() < 1e-10);
    }
}
