//! Natural-scale map for step coefficients.
//!
//! On each cell `Φ' = 1/√(aρ)`, so `Y = Φ(X)` is a Brownian motion away from
//! the knots `y_k = Φ(x_k)`, and skew at the knots with parameter
//! `β_k = (√(a₊/ρ₊) − √(a₋/ρ₋)) / (√(a₊/ρ₊) + √(a₋/ρ₋))`.

use super::{Boundary, StepCoefficients};

/// Piecewise-linear increasing map `Φ` with its knot data.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiMap {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `1/√(aρ)` per cell.
    pub slope: Vec<f64>,
    /// Skewness at each knot; `±1` at reflecting ends, 0 at absorbing ends.
    pub beta: Vec<f64>,
    /// `(a₊ − a₋)/(a₊ + a₋)` at each interior knot (0 at the ends).
    pub local_time_coeff: Vec<f64>,
    pub bc_left: Boundary,
    pub bc_right: Boundary,
    /// The point mapped to 0: the origin if it lies in the domain, else the left end.
    pub x_ref: f64,
    ref_cell: usize,
}

/// Build `Φ` for step coefficients.
pub fn build_phi(s: &StepCoefficients) -> PhiMap {
    let n = s.cells();
    let x = s.breakpoints.clone();
    let slope: Vec<f64> = (0..n).map(|j| 1.0 / (s.a[j] * s.rho[j]).sqrt()).collect();
    let x_ref = if x[0] <= 0.0 && 0.0 <= x[n] { 0.0 } else { x[0] };
    let j = s.cell(x_ref);
    let mut y = vec![0.0; n + 1];
    y[j] = (x[j] - x_ref) * slope[j];
    y[j + 1] = (x[j + 1] - x_ref) * slope[j];
    for k in j + 2..=n {
        y[k] = y[k - 1] + (x[k] - x[k - 1]) * slope[k - 1];
    }
    for k in (0..j).rev() {
        y[k] = y[k + 1] - (x[k + 1] - x[k]) * slope[k];
    }

    let mut beta = vec![0.0; n + 1];
    let mut ltc = vec![0.0; n + 1];
    for k in 1..n {
        let (am, rm, ap, rp) = (s.a[k - 1], s.rho[k - 1], s.a[k], s.rho[k]);
        let (qm, qp) = ((am / rm).sqrt(), (ap / rp).sqrt());
        beta[k] = (qp - qm) / (qp + qm);
        ltc[k] = (ap - am) / (ap + am);
    }
    if s.bc_left == Boundary::Neumann {
        beta[0] = 1.0;
    }
    if s.bc_right == Boundary::Neumann {
        beta[n] = -1.0;
    }
    PhiMap {
        x,
        y,
        slope,
        beta,
        local_time_coeff: ltc,
        bc_left: s.bc_left,
        bc_right: s.bc_right,
        x_ref,
        ref_cell: j,
    }
}

impl PhiMap {
    pub fn knots(&self) -> usize {
        self.x.len()
    }

    fn cell_of(v: &[f64], t: f64) -> usize {
        v.partition_point(|&b| b <= t).saturating_sub(1).min(v.len() - 2)
    }

    /// `Φ(x)`; extended with unit slope outside the domain.
    pub fn forward(&self, x: f64) -> f64 {
        let n = self.x.len() - 1;
        if x < self.x[0] {
            return self.y[0] + (x - self.x[0]);
        }
        if x > self.x[n] {
            return self.y[n] + (x - self.x[n]);
        }
        let j = Self::cell_of(&self.x, x);
        if j == self.ref_cell {
            return (x - self.x_ref) * self.slope[j];
        }
        if x - self.x[j] <= self.x[j + 1] - x {
            self.y[j] + (x - self.x[j]) * self.slope[j]
        } else {
            self.y[j + 1] - (self.x[j + 1] - x) * self.slope[j]
        }
    }

    /// `Φ⁻¹(y)`.
    pub fn inverse(&self, y: f64) -> f64 {
        let n = self.y.len() - 1;
        if y < self.y[0] {
            return self.x[0] + (y - self.y[0]);
        }
        if y > self.y[n] {
            return self.x[n] + (y - self.y[n]);
        }
        let j = Self::cell_of(&self.y, y);
        if y == self.y[j] {
            return self.x[j];
        }
        if y == self.y[j + 1] {
            return self.x[j + 1];
        }
        if j == self.ref_cell {
            return self.x_ref + y / self.slope[j];
        }
        if y - self.y[j] <= self.y[j + 1] - y {
            self.x[j] + (y - self.y[j]) / self.slope[j]
        } else {
            self.x[j + 1] - (self.y[j + 1] - y) / self.slope[j]
        }
    }

    /// `Φ'` at `x` (right derivative at knots).
    pub fn derivative(&self, x: f64) -> f64 {
        if x < self.x[0] || x > *self.x.last().expect("non-empty") {
            return 1.0;
        }
        self.slope[Self::cell_of(&self.x, x)]
    }
}
