//! Reference solutions that share no code with the walk: an Euler scheme for
//! a diffusion with one discontinuity, the scale-function solution of the
//! Dirichlet problem, and the Gaussian law for constant coefficients.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::coefficients::{Coefficients, ScaleData};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::walk::particle_rng;

/// Euler scheme for `L = ½ (a u')'` where `a` is smooth except for a jump at
/// one point `c`.
///
/// With `β = (a(c+) − a(c−)) / (2a(c+))`, the map `φ` with slope
/// `(1 − 2β)/(1 − β)` right of `c` and `1/(1 − β)` left of `c` (and `φ(c) = 0`)
/// turns `X` into a process `Y = φ(X)` whose SDE carries no local time:
/// on each side `dY = s (√a(X) dB + ½ a'(X) dt)` with `s` the slope there.
#[derive(Debug, Clone)]
pub struct EulerOracle {
    jump: f64,
    left: f64,
    right: f64,
    a_minus: Expr,
    a_plus: Expr,
    slope_minus: f64,
    slope_plus: f64,
    da_minus: Expr,
    da_plus: Expr,
}

/// Drift and diffusion of the transformed process on one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedCoefficients {
    pub drift: f64,
    pub diffusion: f64,
}

impl EulerOracle {
    pub fn new(c: &Coefficients) -> Result<Self> {
        let unsupported = |why: &str| Error::InvalidCoefficients(format!("Euler oracle: {why}"));
        if c.pieces.len() != 2 {
            return Err(unsupported("needs exactly one discontinuity"));
        }
        for p in &c.pieces {
            if p.rho.as_constant() != Some(1.0) {
                return Err(unsupported("rho must be 1"));
            }
            if !p.b.is_zero() {
                return Err(unsupported("b must vanish"));
            }
        }
        let a_minus = c.pieces[0].a.as_expr().ok_or_else(|| unsupported("a must be an expression"))?.clone();
        let a_plus = c.pieces[1].a.as_expr().ok_or_else(|| unsupported("a must be an expression"))?.clone();
        let jump = c.pieces[1].start;
        let (am, ap) = (a_minus.eval(jump), a_plus.eval(jump));
        let beta = (ap - am) / (2.0 * ap);
        Ok(Self {
            jump,
            left: c.left,
            right: c.right,
            da_minus: a_minus.derivative(),
            da_plus: a_plus.derivative(),
            a_minus,
            a_plus,
            slope_minus: 1.0 / (1.0 - beta),
            slope_plus: (1.0 - 2.0 * beta) / (1.0 - beta),
        })
    }

    pub fn beta(&self) -> f64 {
        let (am, ap) = (self.a_minus.eval(self.jump), self.a_plus.eval(self.jump));
        (ap - am) / (2.0 * ap)
    }

    pub fn to_y(&self, x: f64) -> f64 {
        let d = x - self.jump;
        if d >= 0.0 {
            self.slope_plus * d
        } else {
            self.slope_minus * d
        }
    }

    pub fn to_x(&self, y: f64) -> f64 {
        if y >= 0.0 {
            self.jump + y / self.slope_plus
        } else {
            self.jump + y / self.slope_minus
        }
    }

    /// Coefficients of `dY = drift dt + diffusion dB` at `y` (right side at 0).
    pub fn transformed(&self, y: f64) -> TransformedCoefficients {
        let x = self.to_x(y);
        let (s, a, da) = if y >= 0.0 {
            (self.slope_plus, &self.a_plus, &self.da_plus)
        } else {
            (self.slope_minus, &self.a_minus, &self.da_minus)
        };
        TransformedCoefficients { drift: 0.5 * s * da.eval(x), diffusion: s * a.eval(x).max(0.0).sqrt() }
    }

    /// One path to time `t_end` with step `dt`; `None` if it left the domain.
    pub fn path<R: Rng + ?Sized>(&self, x0: f64, t_end: f64, dt: f64, rng: &mut R) -> Option<f64> {
        let mut y = self.to_y(x0);
        let n = (t_end / dt).round().max(1.0) as u64;
        let h = t_end / n as f64;
        let sh = h.sqrt();
        for _ in 0..n {
            let c = self.transformed(y);
            let z: f64 = rng.sample(StandardNormal);
            y += c.drift * h + c.diffusion * sh * z;
            let x = self.to_x(y);
            if x <= self.left || x >= self.right {
                return None;
            }
        }
        Some(self.to_x(y))
    }

    /// Terminal values of `n` paths; path `i` uses stream `i` of `seed`.
    pub fn sample(&self, x0: f64, t_end: f64, dt: f64, n: usize, seed: u64) -> Result<Vec<Option<f64>>> {
        if !(dt > 0.0) || !(t_end > 0.0) {
            return Err(Error::InvalidArgument(format!("Euler oracle with dt = {dt}, t = {t_end}")));
        }
        Ok((0..n as u64)
            .into_par_iter()
            .map(|i| self.path(x0, t_end, dt, &mut particle_rng(seed, i)))
            .collect())
    }
}

/// `u(x)` for `Lu = 0` on `[ℓ, r]` with `u(ℓ) = u_left`, `u(r) = u_right`.
pub fn analytic_elliptic(scale: &ScaleData, u_left: f64, u_right: f64, x: f64) -> Result<f64> {
    let c = scale.coefficients();
    if !c.is_bounded() {
        return Err(Error::InvalidArgument("the Dirichlet problem needs a bounded domain".into()));
    }
    if x < c.left || x > c.right {
        return Err(Error::InvalidArgument(format!("{x} outside [{}, {}]", c.left, c.right)));
    }
    let (sl, sr) = (scale.scale(c.left)?, scale.scale(c.right)?);
    if sl == sr {
        return Err(Error::InvalidCoefficients("degenerate scale function".into()));
    }
    Ok(u_left + (u_right - u_left) * (scale.scale(x)? - sl) / (sr - sl))
}

/// Law of `x0 + √(aρ) B_t` for constant coefficients on the line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianReference {
    pub x0: f64,
    pub variance: f64,
}

impl GaussianReference {
    pub fn new(a: f64, rho: f64, t: f64, x0: f64) -> Result<Self> {
        if !(a > 0.0 && rho > 0.0 && t > 0.0) {
            return Err(Error::InvalidArgument(format!("Gaussian reference with a = {a}, rho = {rho}, t = {t}")));
        }
        Ok(Self { x0, variance: a * rho * t })
    }

    pub fn cdf(&self, y: f64) -> f64 {
        0.5 * libm::erfc(-(y - self.x0) / (2.0 * self.variance).sqrt())
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let d = y - self.x0;
        (-d * d / (2.0 * self.variance)).exp() / (2.0 * std::f64::consts::PI * self.variance).sqrt()
    }

    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        self.cdf(hi) - self.cdf(lo)
    }
}
