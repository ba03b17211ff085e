//! Piecewise-constant approximation of driftless coefficients.

use crate::error::{Error, Result};

use super::{Boundary, Coefficients};

/// How cells are laid out inside each original piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeshRule {
    /// Equal cells of width at most `Δ` in `x`.
    #[default]
    Uniform,
    /// Cells of equal width at most `Δ` in natural scale (sampled at the left end).
    ScaleUniform,
}

/// Where each cell samples the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplePoint {
    #[default]
    Left,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiscretizeOptions {
    pub mesh: MeshRule,
    pub sample: SamplePoint,
}

/// Piecewise-constant driftless coefficients on a bounded interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCoefficients {
    /// Cell boundaries `x_0 < ... < x_n`.
    pub breakpoints: Vec<f64>,
    /// `a` on cell `[x_j, x_{j+1})`.
    pub a: Vec<f64>,
    pub rho: Vec<f64>,
    pub bc_left: Boundary,
    pub bc_right: Boundary,
    /// Upper bound on `sup |a - a_Δ|` (0 when built directly from cells).
    pub error_a: f64,
    pub error_rho: f64,
}

impl StepCoefficients {
    pub fn from_cells(
        breakpoints: Vec<f64>,
        a: Vec<f64>,
        rho: Vec<f64>,
        bc_left: Boundary,
        bc_right: Boundary,
    ) -> Result<Self> {
        let n = a.len();
        if n == 0 || rho.len() != n || breakpoints.len() != n + 1 {
            return Err(Error::InvalidCoefficients(format!(
                "need n + 1 breakpoints for n cells, got {} and {}/{}",
                breakpoints.len(),
                a.len(),
                rho.len()
            )));
        }
        if breakpoints.iter().any(|x| !x.is_finite()) || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidCoefficients("breakpoints must be finite and strictly increasing".into()));
        }
        if a.iter().chain(&rho).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidCoefficients("cell values must be positive and finite".into()));
        }
        for bc in [bc_left, bc_right] {
            if bc == Boundary::Open {
                return Err(Error::InvalidCoefficients("step coefficients need finite ends".into()));
            }
        }
        Ok(Self { breakpoints, a, rho, bc_left, bc_right, error_a: 0.0, error_rho: 0.0 })
    }

    pub fn cells(&self) -> usize {
        self.a.len()
    }

    pub fn left(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn right(&self) -> f64 {
        *self.breakpoints.last().expect("non-empty")
    }

    /// Cell containing `x` (cells closed on the left, last cell closed).
    pub fn cell(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= x).saturating_sub(1).min(self.cells() - 1)
    }

    /// Combined bound `sup|a - a_Δ| + sup|ρ - ρ_Δ|`.
    pub fn error_bound(&self) -> f64 {
        self.error_a + self.error_rho
    }
}

/// Sample `c` on a mesh of size `delta`. Every original piece is subdivided,
/// including constant ones, so all cells are comparable in size.
pub fn discretize(c: &Coefficients, delta: f64, opts: DiscretizeOptions) -> Result<StepCoefficients> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("mesh size {delta} must be positive")));
    }
    if c.has_drift() {
        return Err(Error::InvalidCoefficients("remove the drift before discretizing".into()));
    }
    if !c.is_bounded() {
        return Err(Error::LocalizationRequired);
    }
    let gap = c.min_gap();
    if delta > gap {
        return Err(Error::InvalidArgument(format!("mesh size {delta} exceeds the smallest piece width {gap}")));
    }

    let mut xs = vec![c.left];
    let mut a = Vec::new();
    let mut rho = Vec::new();
    let mut err_a: f64 = 0.0;
    let mut err_rho: f64 = 0.0;
    for (k, p) in c.pieces.iter().enumerate() {
        let (lo, hi) = (p.start, c.piece_end(k));
        let cuts = match opts.mesh {
            MeshRule::Uniform => uniform_cuts(lo, hi, delta),
            MeshRule::ScaleUniform => scale_cuts(lo, hi, delta, |x| (p.a.eval(x) * p.rho.eval(x)).sqrt())?,
        };
        for w in cuts.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            let xs_ = match opts.sample {
                SamplePoint::Left => x0,
                SamplePoint::Midpoint => 0.5 * (x0 + x1),
            };
            let reach = match opts.sample {
                SamplePoint::Left => x1 - x0,
                SamplePoint::Midpoint => 0.5 * (x1 - x0),
            };
            let va = p.a.eval(xs_);
            let vr = p.rho.eval(xs_);
            if !(va > 0.0 && vr > 0.0 && va.is_finite() && vr.is_finite()) {
                return Err(Error::InvalidCoefficients(format!("non-positive coefficient at x = {xs_}")));
            }
            err_a = err_a.max(cell_error(&p.a, x0, x1, va, reach));
            err_rho = err_rho.max(cell_error(&p.rho, x0, x1, vr, reach));
            a.push(va);
            rho.push(vr);
            xs.push(x1);
        }
    }
    let mut s = StepCoefficients::from_cells(xs, a, rho, c.bc_left, c.bc_right)?;
    s.error_a = err_a;
    s.error_rho = err_rho;
    Ok(s)
}

fn uniform_cuts(lo: f64, hi: f64, delta: f64) -> Vec<f64> {
    let n = ((hi - lo) / delta * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let w = (hi - lo) / n as f64;
    let mut v: Vec<f64> = (0..n).map(|j| lo + j as f64 * w).collect();
    v.push(hi);
    v
}

/// Cuts of equal natural-scale width `d ≤ delta`, `x_{j+1} = x_j + d √(aρ(x_j))`,
/// with `d` chosen so that the last cut lands on `hi`.
fn scale_cuts(lo: f64, hi: f64, delta: f64, root: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let march = |d: f64, n: usize| -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(n + 1);
        let mut x = lo;
        v.push(x);
        for _ in 0..n {
            let r = root(x);
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidCoefficients(format!("non-positive a·rho at x = {x}")));
            }
            x += d * r;
            v.push(x);
        }
        Ok(v)
    };
    let mut n = 0usize;
    let mut x = lo;
    while x < hi - 1e-12 * (hi - lo) {
        let r = root(x);
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidCoefficients(format!("non-positive a·rho at x = {x}")));
        }
        x += delta * r;
        n += 1;
    }
    let n = n.max(1);
    // The end point of an n-step march increases with the step.
    let (mut d_lo, mut d_hi) = (0.0, delta);
    for _ in 0..100 {
        let mid = 0.5 * (d_lo + d_hi);
        if mid <= d_lo || mid >= d_hi {
            break;
        }
        if march(mid, n)?[n] < hi {
            d_lo = mid;
        } else {
            d_hi = mid;
        }
    }
    let mut v = march(d_lo, n)?;
    v[n] = hi;
    if v.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(format!("mesh size {delta} too small to resolve [{lo}, {hi}]")));
    }
    Ok(v)
}

/// `sup |f - value|` on `[x0, x1]`, from the range enclosure and from the
/// derivative bound times the distance to the sampling point.
fn cell_error(f: &super::Profile, x0: f64, x1: f64, value: f64, reach: f64) -> f64 {
    if f.as_constant().is_some() {
        return 0.0;
    }
    let r = f.range(x0, x1);
    let by_range = (r.hi - value).max(value - r.lo).max(0.0);
    let by_slope = reach * f.derivative_range(x0, x1).mag();
    let e = by_range.min(by_slope);
    if e.is_nan() {
        f64::INFINITY
    } else {
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::Piece;
    use crate::expr::Expr;

    fn sine() -> Coefficients {
        Coefficients::new(
            -1.0,
            1.0,
            Boundary::Dirichlet,
            Boundary::Neumann,
            vec![Piece::new(-1.0, Expr::Sum(vec![Expr::Const(2.0), Expr::Sin { amp: 1.0, freq: 1.0, phase: 0.0 }]), 1.0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn uniform_mesh_respects_delta_and_breakpoints() {
        let c = Coefficients::piecewise_constant(
            -1.0,
            1.0,
            (Boundary::Dirichlet, Boundary::Dirichlet),
            &[-1.0, 0.3],
            &[1.0, 2.0],
            &[1.0, 1.0],
        )
        .unwrap();
        let s = discretize(&c, 0.25, DiscretizeOptions::default()).unwrap();
        assert!(s.breakpoints.contains(&0.3));
        assert!(s.breakpoints.windows(2).all(|w| w[1] - w[0] <= 0.25 + 1e-15));
        assert_eq!(s.error_bound(), 0.0);
        assert_eq!(s.a[s.cell(0.5)], 2.0);
    }

    #[test]
    fn error_bound_dominates_observed_error() {
        let c = sine();
        for opts in [
            DiscretizeOptions::default(),
            DiscretizeOptions { mesh: MeshRule::ScaleUniform, sample: SamplePoint::Midpoint },
        ] {
            let s = discretize(&c, 0.1, opts).unwrap();
            let mut observed: f64 = 0.0;
            for i in 0..=2000 {
                let x = -1.0 + i as f64 * 0.001;
                observed = observed.max((c.eval(x).0 - s.a[s.cell(x)]).abs());
            }
            assert!(observed <= s.error_a + 1e-15, "{observed} > {}", s.error_a);
            assert!(s.error_a <= 0.1 * 1.0 + 1e-12);
        }
    }

    #[test]
    fn scale_uniform_spacing() {
        let c = Coefficients::piecewise_constant(
            0.0,
            1.0,
            (Boundary::Dirichlet, Boundary::Dirichlet),
            &[0.0],
            &[4.0],
            &[1.0],
        )
        .unwrap();
        let s = discretize(&c, 0.1, DiscretizeOptions { mesh: MeshRule::ScaleUniform, ..Default::default() }).unwrap();
        // Natural-scale width 0.1 is x-width 0.2.
        assert_eq!(s.cells(), 5);
        let s = discretize(&c, 0.09, DiscretizeOptions { mesh: MeshRule::ScaleUniform, ..Default::default() }).unwrap();
        assert_eq!(s.cells(), 6);
        for w in s.breakpoints.windows(2) {
            assert!((w[1] - w[0] - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let c = sine();
        assert!(discretize(&c, 0.0, DiscretizeOptions::default()).is_err());
        assert!(discretize(&c, 3.0, DiscretizeOptions::default()).is_err());
        assert!(matches!(
            discretize(&Coefficients::constant(1.0, 1.0), 0.1, DiscretizeOptions::default()),
            Err(Error::LocalizationRequired)
        ));
        let mut d = sine();
        d.pieces[0].b = 0.2.into();
        assert!(discretize(&d, 0.1, DiscretizeOptions::default()).is_err());
    }
}
