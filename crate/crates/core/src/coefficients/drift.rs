//! Removal of the first-order term.
//!
//! With `Ψ' = 2b / (aρ)`, the operator `(ρ/2)(a u')' + b u'` equals
//! `(ρ e^{-Ψ} / 2)(a e^{Ψ} u')'`, so `(a e^Ψ, ρ e^{-Ψ}, 0)` generates the same
//! process. The product `aρ`, hence the natural scale, is unchanged.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Expr, Interval};
use crate::quad;

use super::{Coefficients, Piece, Profile};

const TOL: f64 = 1e-13;

/// `Ψ(x) = ∫_{x_ref}^x 2b/(aρ)`, with `x_ref = 0` when the domain contains 0
/// and the left end otherwise. Constant outside the domain.
#[derive(Debug)]
pub struct DriftPotential {
    left: f64,
    right: f64,
    starts: Vec<f64>,
    a: Vec<Expr>,
    rho: Vec<Expr>,
    b: Vec<Expr>,
    /// `Ψ` at each piece start.
    values: Vec<f64>,
    /// `Ψ'` on pieces where it is constant.
    slopes: Vec<Option<f64>>,
}

impl DriftPotential {
    fn new(c: &Coefficients) -> Result<Self> {
        let mut a = Vec::new();
        let mut rho = Vec::new();
        let mut b = Vec::new();
        for (k, p) in c.pieces.iter().enumerate() {
            match (p.a.as_expr(), p.rho.as_expr(), p.b.as_expr()) {
                (Some(pa), Some(pr), Some(pb)) => {
                    a.push(pa.clone());
                    rho.push(pr.clone());
                    b.push(pb.clone());
                }
                _ => {
                    return Err(Error::InvalidCoefficients(format!("piece {k} already carries a drift weight")));
                }
            }
        }
        let slopes = (0..a.len())
            .map(|k| match (a[k].as_constant(), rho[k].as_constant(), b[k].as_constant()) {
                (Some(a), Some(r), Some(b)) => Some(2.0 * b / (a * r)),
                _ => None,
            })
            .collect();
        let mut psi = Self {
            left: c.left,
            right: c.right,
            starts: c.pieces.iter().map(|p| p.start).collect(),
            a,
            rho,
            b,
            values: vec![0.0; c.pieces.len()],
            slopes,
        };
        let x_ref = if c.left <= 0.0 && 0.0 <= c.right { 0.0 } else { c.left };
        let j = psi.piece(x_ref);
        psi.values[j] = -psi.integral(j, psi.starts[j], x_ref)?;
        for k in j + 1..psi.starts.len() {
            psi.values[k] = psi.values[k - 1] + psi.integral(k - 1, psi.starts[k - 1], psi.starts[k])?;
        }
        for k in (0..j).rev() {
            psi.values[k] = psi.values[k + 1] - psi.integral(k, psi.starts[k], psi.starts[k + 1])?;
        }
        Ok(psi)
    }

    fn piece(&self, x: f64) -> usize {
        self.starts.partition_point(|&s| s <= x).saturating_sub(1)
    }

    fn slope_at(&self, k: usize, x: f64) -> f64 {
        2.0 * self.b[k].eval(x) / (self.a[k].eval(x) * self.rho[k].eval(x))
    }

    fn integral(&self, k: usize, lo: f64, hi: f64) -> Result<f64> {
        if let Some(s) = self.slopes[k] {
            return Ok(s * (hi - lo));
        }
        if self.b[k].is_zero() {
            return Ok(0.0);
        }
        quad::integrate(|x| self.slope_at(k, x), lo, hi, TOL)
    }

    /// `Ψ(x)`; NaN if the quadrature fails.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.left, self.right);
        let k = self.piece(x);
        self.values[k] + self.integral(k, self.starts[k], x).unwrap_or(f64::NAN)
    }

    /// Enclosure of `Ψ'` on `[lo, hi]` (taken inside the piece containing the midpoint).
    pub fn slope_range(&self, lo: f64, hi: f64) -> Interval {
        let k = self.piece(0.5 * (lo + hi));
        if let Some(s) = self.slopes[k] {
            return Interval::point(s);
        }
        self.b[k].range(lo, hi).scale(2.0) / (self.a[k].range(lo, hi) * self.rho[k].range(lo, hi))
    }

    /// Enclosure of `Ψ` on `[lo, hi]`.
    pub fn range(&self, lo: f64, hi: f64) -> Interval {
        let start = self.eval(lo);
        let d = self.slope_range(lo, hi);
        let w = hi - lo;
        Interval::new(start + (w * d.lo).min(0.0), start + (w * d.hi).max(0.0))
    }
}

/// Return coefficients with `b = 0` generating the same process.
///
/// Unbounded domains must be localized first.
pub fn remove_drift(c: &Coefficients) -> Result<Coefficients> {
    if !c.has_drift() {
        return Ok(c.clone());
    }
    if !c.is_bounded() {
        return Err(Error::LocalizationRequired);
    }
    let psi = Arc::new(DriftPotential::new(c)?);
    let pieces = c
        .pieces
        .iter()
        .enumerate()
        .map(|(k, p)| {
            if p.b.is_zero() {
                // Ψ is flat here but may be offset.
                let w = psi.values[k];
                return Piece::new(
                    p.start,
                    scaled(&psi.a[k], w.exp()),
                    scaled(&psi.rho[k], (-w).exp()),
                    0.0,
                );
            }
            Piece::new(
                p.start,
                Profile::Weighted { base: psi.a[k].clone(), sign: 1.0, psi: psi.clone() },
                Profile::Weighted { base: psi.rho[k].clone(), sign: -1.0, psi: psi.clone() },
                0.0,
            )
        })
        .collect();
    let mut out = Coefficients::new(c.left, c.right, c.bc_left, c.bc_right, pieces)?;
    out.lambda = None;
    out.upper = None;
    Ok(out)
}

fn scaled(e: &Expr, factor: f64) -> Profile {
    match e.as_constant() {
        Some(v) => Profile::Expr(Expr::Const(v * factor)),
        None => Profile::Expr(scale_expr(e, factor)),
    }
}

fn scale_expr(e: &Expr, c: f64) -> Expr {
    match e {
        Expr::Const(v) => Expr::Const(v * c),
        Expr::Poly(p) => Expr::Poly(p.iter().map(|v| v * c).collect()),
        Expr::Sin { amp, freq, phase } => Expr::Sin { amp: amp * c, freq: *freq, phase: *phase },
        Expr::Cos { amp, freq, phase } => Expr::Cos { amp: amp * c, freq: *freq, phase: *phase },
        Expr::Exp { amp, rate, shift } => Expr::Exp { amp: amp * c, rate: *rate, shift: *shift },
        Expr::Sum(terms) => Expr::Sum(terms.iter().map(|t| scale_expr(t, c)).collect()),
    }
}
