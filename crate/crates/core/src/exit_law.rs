//! Brownian exit laws on `[-1, 1]`.
//!
//! Every quantity is available from two series: a method-of-images sum that
//! converges fast for small times and an eigenfunction expansion that
//! converges fast for large times. CDFs are obtained by integrating the
//! density series term by term (complementary error functions for the image
//! sums, exponentials for the spectral sums). Samplers invert the CDFs with a
//! safeguarded Newton iteration.
//!
//! Notation: `tau` is the first exit time of `[-1, 1]` for a Brownian motion
//! started at `x`; `side` is the exit point.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use rand::RngCore;

use crate::error::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Truncation and crossover settings for the series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig {
    /// Relative truncation tolerance: terms are added until the last one
    /// contributes less than `abs_tol · |partial sum|`.
    pub abs_tol: f64,
    /// Times at or below this use the image series.
    pub crossover: f64,
    pub max_terms: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-12, crossover: 0.5, max_terms: 200 }
    }
}

impl SeriesConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.crossover > 0.0) || self.max_terms == 0 {
            return Err(Error::InvalidArgument(format!("invalid series configuration {self:?}")));
        }
        Ok(())
    }
}

/// Which expansion to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Image,
    Spectral,
}

/// Exit side of an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

/// Conditioning event for exit-time sampling: `tau < before` (use
/// `f64::INFINITY` for no time constraint) and optionally the exit side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitCondition {
    pub before: f64,
    pub side: Option<Side>,
}

impl ExitCondition {
    pub const NONE: ExitCondition = ExitCondition { before: f64::INFINITY, side: None };

    pub fn before(t: f64) -> Self {
        Self { before: t, side: None }
    }

    pub fn before_on_side(t: f64, side: Side) -> Self {
        Self { before: t, side: Some(side) }
    }
}

/// Affine frame mapping `[lo, hi]` onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalFrame {
    pub lo: f64,
    pub hi: f64,
}

impl IntervalFrame {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("degenerate interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    /// Durations scale by the squared half-width.
    pub fn time_scale(&self) -> f64 {
        let h = self.half_width();
        h * h
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        if x == self.lo {
            return -1.0;
        }
        if x == self.hi {
            return 1.0;
        }
        ((x - self.center()) / self.half_width()).clamp(-1.0, 1.0)
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        if u == -1.0 {
            return self.lo;
        }
        if u == 1.0 {
            return self.hi;
        }
        self.center() + u * self.half_width()
    }

    pub fn time_to_unit(&self, s: f64) -> f64 {
        s / self.time_scale()
    }

    pub fn time_from_unit(&self, t: f64) -> f64 {
        t * self.time_scale()
    }
}

/// Evaluator and sampler for the exit laws.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExitLaw {
    cfg: SeriesConfig,
}

/// Result of a quantile solve.
#[derive(Debug, Clone, Copy)]
pub struct Quantile {
    pub value: f64,
    /// `|CDF(value) / CDF(bound) - u|`.
    pub residual: f64,
}

fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `P[a < Z < b]` for a standard normal `Z`, accurate in both tails.
fn normal_mass(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a >= 0.0 {
        0.5 * (erfc(a * FRAC_1_SQRT_2) - erfc(b * FRAC_1_SQRT_2))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * FRAC_1_SQRT_2) - erfc(-a * FRAC_1_SQRT_2))
    } else {
        1.0 - 0.5 * erfc(-a * FRAC_1_SQRT_2) - 0.5 * erfc(b * FRAC_1_SQRT_2)
    }
}

/// `sgn(c) · erfc(|c| / sqrt(2t))`: time integral of the first-passage
/// density to a level at signed distance `c`.
#[inline]
fn passage_cdf_term(c: f64, t: f64) -> f64 {
    let v = erfc(c.abs() / (2.0 * t).sqrt());
    if c < 0.0 {
        -v
    } else {
        v
    }
}

/// `e^{v}` for `v ≤ 0`, flushing deep underflow to zero without the slow path.
#[inline]
fn decay(v: f64) -> f64 {
    if v < -708.0 {
        0.0
    } else {
        v.exp()
    }
}

#[inline]
fn passage_density_term(c: f64, t: f64) -> f64 {
    c / (SQRT_2PI * t * t.sqrt()) * decay(-c * c / (2.0 * t))
}

impl ExitLaw {
    pub fn new(cfg: SeriesConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &SeriesConfig {
        &self.cfg
    }

    fn pick(&self, t: f64) -> Series {
        if t <= self.cfg.crossover {
            Series::Image
        } else {
            Series::Spectral
        }
    }

    /// Sum `term(0) + Σ_{n≥1} (term(-n) + term(n))` until the pair is negligible.
    fn image_sum(&self, t: f64, x: f64, mut term: impl FnMut(f64) -> f64) -> Result<f64> {
        let mut sum = term(0.0);
        for n in 1..=self.cfg.max_terms {
            let k = n as f64;
            let (lo, hi) = (term(-k), term(k));
            sum += lo + hi;
            let contrib = lo.abs() + hi.abs();
            if contrib <= self.cfg.abs_tol * sum.abs() || contrib == 0.0 {
                return Ok(sum);
            }
        }
        Err(Error::SeriesDivergence { terms: self.cfg.max_terms, t, x })
    }

    /// Sum `Σ_{k≥1} term(k)` where `term` returns `(value, envelope)` and the
    /// envelopes bound the magnitude of every later term.
    fn spectral_sum(&self, t: f64, x: f64, mut term: impl FnMut(f64) -> (f64, f64)) -> Result<f64> {
        let mut sum = 0.0;
        for k in 1..=self.cfg.max_terms {
            let (v, env) = term(k as f64);
            sum += v;
            if env <= self.cfg.abs_tol * sum.abs() || env < 1e-300 {
                return Ok(sum);
            }
        }
        Err(Error::SeriesDivergence { terms: self.cfg.max_terms, t, x })
    }

    // ----- exit time -------------------------------------------------------

    /// `G(t, x) = P_x[tau < t]`.
    pub fn exit_time_cdf(&self, t: f64, x: f64) -> Result<f64> {
        self.exit_time_cdf_with(t, x, self.pick(t))
    }

    pub fn exit_time_cdf_with(&self, t: f64, x: f64, series: Series) -> Result<f64> {
        check_position(x)?;
        if t <= 0.0 {
            return Ok(0.0);
        }
        if x.abs() >= 1.0 {
            return Ok(1.0);
        }
        match series {
            Series::Image => Ok(self.joint_image(t, x)? + self.joint_image(t, -x)?),
            Series::Spectral => Ok(1.0 - self.survival_spectral(t, x)?),
        }
    }

    /// `∂G/∂t`.
    pub fn exit_time_density(&self, t: f64, x: f64) -> Result<f64> {
        self.exit_time_density_with(t, x, self.pick(t))
    }

    pub fn exit_time_density_with(&self, t: f64, x: f64, series: Series) -> Result<f64> {
        check_position(x)?;
        if t <= 0.0 || x.abs() >= 1.0 {
            return Ok(0.0);
        }
        match series {
            Series::Image => Ok(self.image_sum(t, x, |k| {
                passage_density_term(1.0 + x + 4.0 * k, t) + passage_density_term(1.0 - x + 4.0 * k, t)
            })?),
            Series::Spectral => {
                let s = self.spectral_sum(t, x, |k| {
                    let m = 2.0 * k - 1.0;
                    let e = decay(-PI * PI * m * m * t / 8.0);
                    let sign = if (k as u64) % 2 == 1 { 1.0 } else { -1.0 };
                    (sign * m * e * (x * PI * (m * 0.5)).cos(), (m + 2.0) * e)
                })?;
                Ok(0.5 * PI * s)
            }
        }
    }

    /// `P_x[tau < t, B_tau = +1]` from the image series.
    fn joint_image(&self, t: f64, x: f64) -> Result<f64> {
        self.image_sum(t, x, |k| passage_cdf_term(1.0 - x + 4.0 * k, t))
    }

    /// `P_x[t < tau]` from the eigenfunction expansion.
    fn survival_spectral(&self, t: f64, x: f64) -> Result<f64> {
        self.spectral_sum(t, x, |k| {
            let m = 2.0 * k - 1.0;
            let e = decay(-PI * PI * m * m * t / 8.0);
            let sign = if (k as u64) % 2 == 1 { 1.0 } else { -1.0 };
            (4.0 * sign / (m * PI) * (x * PI * (m * 0.5)).cos() * e, 4.0 / (m * PI) * e)
        })
    }

    /// `P_x[tau < t, B_tau = side]`.
    pub fn exit_joint_cdf(&self, t: f64, x: f64, side: Side) -> Result<f64> {
        self.exit_joint_cdf_with(t, x, side, self.pick(t))
    }

    pub fn exit_joint_cdf_with(&self, t: f64, x: f64, side: Side, series: Series) -> Result<f64> {
        check_position(x)?;
        // Reflect so that the target side is +1.
        let x = x * side.sign();
        if x <= -1.0 {
            return Ok(0.0);
        }
        if t <= 0.0 {
            return Ok(0.0);
        }
        if x >= 1.0 {
            return Ok(1.0);
        }
        if t == f64::INFINITY {
            return Ok(0.5 * (1.0 + x));
        }
        match series {
            Series::Image => self.joint_image(t, x),
            Series::Spectral => {
                let s = self.spectral_sum(t, x, |k| {
                    let e = decay(-k * k * PI * PI * t / 8.0);
                    let sign = if (k as u64) % 2 == 1 { -1.0 } else { 1.0 };
                    (sign / k * (k * PI * 0.5 * (x + 1.0)).sin() * e, e / k)
                })?;
                Ok(0.5 * (1.0 + x) + 2.0 / PI * s)
            }
        }
    }

    /// `∂/∂t P_x[tau < t, B_tau = side]`.
    pub fn exit_joint_density(&self, t: f64, x: f64, side: Side) -> Result<f64> {
        self.exit_joint_density_with(t, x, side, self.pick(t))
    }

    pub fn exit_joint_density_with(&self, t: f64, x: f64, side: Side, series: Series) -> Result<f64> {
        check_position(x)?;
        let x = x * side.sign();
        if t <= 0.0 || x.abs() >= 1.0 || t == f64::INFINITY {
            return Ok(0.0);
        }
        match series {
            Series::Image => self.image_sum(t, x, |k| passage_density_term(1.0 - x + 4.0 * k, t)),
            Series::Spectral => {
                let s = self.spectral_sum(t, x, |k| {
                    let e = decay(-k * k * PI * PI * t / 8.0);
                    let sign = if (k as u64) % 2 == 1 { -1.0 } else { 1.0 };
                    (sign * k * (k * PI * 0.5 * (x + 1.0)).sin() * e, (k + 1.0) * e)
                })?;
                Ok(-0.25 * PI * s)
            }
        }
    }

    /// `H(t, x) = P_x[tau < t | B_tau = side]`, for `|x| < 1`.
    pub fn cond_exit_time_cdf(&self, t: f64, x: f64, side: Side) -> Result<f64> {
        self.cond_exit_time_cdf_with(t, x, side, self.pick(t))
    }

    pub fn cond_exit_time_cdf_with(&self, t: f64, x: f64, side: Side, series: Series) -> Result<f64> {
        let p = self.side_prob_of(x, side)?;
        if p == 0.0 {
            return Err(Error::NullEvent(format!("exit on {side:?} from x = {x}")));
        }
        Ok(self.exit_joint_cdf_with(t, x, side, series)? / p)
    }

    pub fn cond_exit_time_density(&self, t: f64, x: f64, side: Side) -> Result<f64> {
        let p = self.side_prob_of(x, side)?;
        if p == 0.0 {
            return Err(Error::NullEvent(format!("exit on {side:?} from x = {x}")));
        }
        Ok(self.exit_joint_density(t, x, side)? / p)
    }

    /// `P_x[B_tau = +1] = (1 + x) / 2`.
    pub fn side_prob(&self, x: f64) -> Result<f64> {
        self.side_prob_of(x, Side::Right)
    }

    fn side_prob_of(&self, x: f64, side: Side) -> Result<f64> {
        check_position(x)?;
        Ok(0.5 * (1.0 + side.sign() * x))
    }

    /// `P_x[B_tau = +1 | tau < t]`.
    pub fn side_prob_given(&self, t: f64, x: f64) -> Result<f64> {
        check_position(x)?;
        if t == f64::INFINITY {
            return self.side_prob(x);
        }
        let right = self.exit_joint_cdf(t, x, Side::Right)?;
        let left = self.exit_joint_cdf(t, x, Side::Left)?;
        let total = right + left;
        if !(total > 0.0) {
            return Err(Error::NullEvent(format!("tau < {t} from x = {x}")));
        }
        Ok((right / total).clamp(0.0, 1.0))
    }

    // ----- killed position -------------------------------------------------

    /// Density in `y` of `B_t` on `{t < tau}`.
    pub fn killed_density(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        self.killed_density_with(t, x, y, self.pick(t))
    }

    pub fn killed_density_with(&self, t: f64, x: f64, y: f64, series: Series) -> Result<f64> {
        check_position(x)?;
        check_position(y)?;
        check_time(t)?;
        if x.abs() >= 1.0 || y.abs() >= 1.0 {
            return Ok(0.0);
        }
        match series {
            Series::Image => {
                let s = self.image_sum(t, x, |k| {
                    let d1 = x - y - 4.0 * k;
                    let d2 = x + y + 2.0 + 4.0 * k;
                    decay(-d1 * d1 / (2.0 * t)) - decay(-d2 * d2 / (2.0 * t))
                })?;
                Ok(s / (2.0 * PI * t).sqrt())
            }
            Series::Spectral => self.spectral_sum(t, x, |k| {
                let e = decay(-k * k * PI * PI * t / 8.0);
                let w = 0.5 * k * PI;
                ((w * (x + 1.0)).sin() * (w * (y + 1.0)).sin() * e, e)
            }),
        }
    }

    /// `F(t, x, y) = P_x[B_t < y; t < tau]`.
    pub fn killed_cdf(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        self.killed_cdf_with(t, x, y, self.pick(t))
    }

    pub fn killed_cdf_with(&self, t: f64, x: f64, y: f64, series: Series) -> Result<f64> {
        check_position(x)?;
        check_position(y)?;
        check_time(t)?;
        if x.abs() >= 1.0 || y <= -1.0 {
            return Ok(0.0);
        }
        match series {
            Series::Image => {
                let st = t.sqrt();
                let v = self.image_sum(t, x, |k| {
                    normal_mass((-1.0 - x + 4.0 * k) / st, (y - x + 4.0 * k) / st)
                        - normal_mass((x + 1.0 + 4.0 * k) / st, (x + y + 2.0 + 4.0 * k) / st)
                })?;
                Ok(v.max(0.0))
            }
            Series::Spectral => {
                let v = self.spectral_sum(t, x, |k| {
                    let e = decay(-k * k * PI * PI * t / 8.0);
                    let w = 0.5 * k * PI;
                    let c = 2.0 / (k * PI);
                    (c * (w * (x + 1.0)).sin() * (1.0 - (w * (y + 1.0)).cos()) * e, 2.0 * c * e)
                })?;
                Ok(v.max(0.0))
            }
        }
    }

    /// `P_x[t < tau] = F(t, x, 1)`.
    pub fn survival(&self, t: f64, x: f64) -> Result<f64> {
        if t == f64::INFINITY {
            check_position(x)?;
            return Ok(0.0);
        }
        if t <= 0.0 {
            check_position(x)?;
            return Ok(if x.abs() < 1.0 { 1.0 } else { 0.0 });
        }
        self.killed_cdf(t, x, 1.0)
    }

    // ----- quantiles and samplers -----------------------------------------

    /// CDF and density of the exit time in one pass, optionally jointly with
    /// the exit side. Used by the samplers.
    fn time_cdf_pdf(&self, t: f64, x: f64, side: Option<Side>) -> Result<(f64, f64)> {
        if t <= 0.0 {
            return Ok((0.0, 0.0));
        }
        match side {
            Some(side) => {
                let x = x * side.sign();
                match self.pick(t) {
                    Series::Image => self.image_pair_sum(t, x, |k| {
                        let c = 1.0 - x + 4.0 * k;
                        (passage_cdf_term(c, t), passage_density_term(c, t))
                    }),
                    Series::Spectral => {
                        let (c, d) = self.spectral_pair_sum(t, x, |k| {
                            let e = decay(-k * k * PI * PI * t / 8.0);
                            let sign = if (k as u64) % 2 == 1 { -1.0 } else { 1.0 };
                            let sn = sign * (k * PI * 0.5 * (x + 1.0)).sin() * e;
                            (sn / k, k * sn, (k + 1.0) * e)
                        })?;
                        Ok((0.5 * (1.0 + x) + 2.0 / PI * c, -0.25 * PI * d))
                    }
                }
            }
            None => match self.pick(t) {
                Series::Image if x == 0.0 => {
                    let (c, d) = self.image_pair_sum(t, x, |k| {
                        let c = 1.0 + 4.0 * k;
                        (passage_cdf_term(c, t), passage_density_term(c, t))
                    })?;
                    Ok((2.0 * c, 2.0 * d))
                }
                Series::Image => self.image_pair_sum(t, x, |k| {
                    let (c1, c2) = (1.0 - x + 4.0 * k, 1.0 + x + 4.0 * k);
                    (
                        passage_cdf_term(c1, t) + passage_cdf_term(c2, t),
                        passage_density_term(c1, t) + passage_density_term(c2, t),
                    )
                }),
                Series::Spectral => {
                    let (s, d) = self.spectral_pair_sum(t, x, |k| {
                        let m = 2.0 * k - 1.0;
                        let e = decay(-PI * PI * m * m * t / 8.0);
                        let sign = if (k as u64) % 2 == 1 { 1.0 } else { -1.0 };
                        let cs = if x == 0.0 { sign * e } else { sign * (x * PI * (m * 0.5)).cos() * e };
                        (4.0 / (m * PI) * cs, m * cs, (m + 2.0) * e)
                    })?;
                    Ok((1.0 - s, 0.5 * PI * d))
                }
            },
        }
    }

    /// Paired version of [`Self::image_sum`].
    fn image_pair_sum(&self, t: f64, x: f64, mut term: impl FnMut(f64) -> (f64, f64)) -> Result<(f64, f64)> {
        let (mut c, mut d) = term(0.0);
        for n in 1..=self.cfg.max_terms {
            let k = n as f64;
            let (c1, d1) = term(-k);
            let (c2, d2) = term(k);
            c += c1 + c2;
            d += d1 + d2;
            let (ec, ed) = (c1.abs() + c2.abs(), d1.abs() + d2.abs());
            if (ec <= self.cfg.abs_tol * c.abs() || ec == 0.0) && (ed <= self.cfg.abs_tol * d.abs() || ed == 0.0) {
                return Ok((c, d));
            }
        }
        Err(Error::SeriesDivergence { terms: self.cfg.max_terms, t, x })
    }

    /// Paired version of [`Self::spectral_sum`]; `term` returns both values
    /// and an envelope for later terms of either sum.
    fn spectral_pair_sum(&self, t: f64, x: f64, mut term: impl FnMut(f64) -> (f64, f64, f64)) -> Result<(f64, f64)> {
        let (mut c, mut d) = (0.0, 0.0);
        for k in 1..=self.cfg.max_terms {
            let (v, w, env) = term(k as f64);
            c += v;
            d += w;
            if (env <= self.cfg.abs_tol * c.abs().min(d.abs())) || env < 1e-300 {
                return Ok((c, d));
            }
        }
        Err(Error::SeriesDivergence { terms: self.cfg.max_terms, t, x })
    }

    /// Quantile of the exit time from `x` under `cond`, at level `u ∈ (0, 1)`
    /// of the conditional law.
    pub fn quantile_exit_time(&self, x: f64, cond: ExitCondition, u: f64) -> Result<Quantile> {
        check_position(x)?;
        check_level(u)?;
        if x.abs() >= 1.0 {
            return Err(Error::InvalidArgument(format!("exit time from boundary point {x}")));
        }
        let cdf = |q: f64| self.time_cdf_pdf(q, x, cond.side);
        let bound = if cond.before == f64::INFINITY {
            match cond.side {
                None => 1.0,
                Some(side) => self.side_prob_of(x, side)?,
            }
        } else {
            cdf(cond.before)?.0
        };
        if !(bound > 0.0) {
            return Err(Error::NullEvent(format!("{cond:?} from x = {x}")));
        }
        let target = u * bound;
        let guess = if x == 0.0 && cond.side.is_none() {
            center_quantile_guess(target)
        } else {
            center_quantile_guess(target.min(0.999)) * (1.0 - x * x).max(1e-6)
        };

        let (lo, hi) = if cond.before == f64::INFINITY {
            let mut hi = guess.max(1.0);
            let mut it = 0;
            while cdf(hi)?.0 < target {
                hi *= 2.0;
                it += 1;
                if it > 200 {
                    return Err(Error::Inversion { iterations: it, residual: f64::NAN });
                }
            }
            (0.0, hi)
        } else {
            (0.0, cond.before)
        };
        solve_increasing(cdf, target, bound, lo, hi, guess)
    }

    /// Quantile of `B_t` given `t < tau`, started at `x`.
    pub fn quantile_survived_position(&self, t: f64, x: f64, u: f64) -> Result<Quantile> {
        check_position(x)?;
        check_level(u)?;
        check_time(t)?;
        let bound = self.killed_cdf(t, x, 1.0)?;
        if !(bound > 0.0) {
            return Err(Error::NullEvent(format!("survival to t = {t} from x = {x}")));
        }
        let target = u * bound;
        let guess = x + t.sqrt() * normal_quantile_approx(u);
        let cdf = |q: f64| -> Result<(f64, f64)> { Ok((self.killed_cdf(t, x, q)?, self.killed_density(t, x, q)?)) };
        solve_increasing(cdf, target, bound, -1.0, 1.0, guess)
    }

    /// Quantile of `|B_t|` given `t < tau`, started at the center.
    pub fn quantile_folded_position(&self, t: f64, u: f64) -> Result<Quantile> {
        check_level(u)?;
        check_time(t)?;
        let bound = self.killed_cdf(t, 0.0, 1.0)?;
        if !(bound > 0.0) {
            return Err(Error::NullEvent(format!("survival to t = {t} from the center")));
        }
        let target = u * bound;
        let guess = t.sqrt() * normal_quantile_approx(0.5 * (1.0 + u));
        let cdf = |r: f64| -> Result<(f64, f64)> {
            let c = self.killed_cdf(t, 0.0, r)? - self.killed_cdf(t, 0.0, -r)?;
            Ok((c, 2.0 * self.killed_density(t, 0.0, r)?))
        };
        solve_increasing(cdf, target, bound, 0.0, 1.0, guess)
    }

    pub fn sample_exit_time<R: RngCore + ?Sized>(&self, x: f64, cond: ExitCondition, rng: &mut R) -> Result<f64> {
        Ok(self.quantile_exit_time(x, cond, open_uniform(rng))?.value)
    }

    pub fn sample_survived_position<R: RngCore + ?Sized>(&self, t: f64, x: f64, rng: &mut R) -> Result<f64> {
        Ok(self.quantile_survived_position(t, x, open_uniform(rng))?.value)
    }

    pub fn sample_folded_position<R: RngCore + ?Sized>(&self, t: f64, rng: &mut R) -> Result<f64> {
        Ok(self.quantile_folded_position(t, open_uniform(rng))?.value)
    }

    // ----- general intervals ---------------------------------------------

    /// `P_x[tau_{lo,hi} < s]` for a Brownian motion started at `x ∈ [lo, hi]`.
    pub fn exit_time_cdf_on(&self, frame: &IntervalFrame, s: f64, x: f64) -> Result<f64> {
        self.exit_time_cdf(frame.time_to_unit(s), frame.to_unit(checked_in(frame, x)?))
    }

    pub fn side_prob_on(&self, frame: &IntervalFrame, x: f64) -> Result<f64> {
        self.side_prob(frame.to_unit(checked_in(frame, x)?))
    }

    pub fn side_prob_given_on(&self, frame: &IntervalFrame, s: f64, x: f64) -> Result<f64> {
        self.side_prob_given(frame.time_to_unit(s), frame.to_unit(checked_in(frame, x)?))
    }

    pub fn killed_cdf_on(&self, frame: &IntervalFrame, s: f64, x: f64, y: f64) -> Result<f64> {
        self.killed_cdf(
            frame.time_to_unit(s),
            frame.to_unit(checked_in(frame, x)?),
            frame.to_unit(checked_in(frame, y)?),
        )
    }

    pub fn sample_exit_time_on<R: RngCore + ?Sized>(
        &self,
        frame: &IntervalFrame,
        x: f64,
        cond: ExitCondition,
        rng: &mut R,
    ) -> Result<f64> {
        let unit = ExitCondition { before: frame.time_to_unit(cond.before), side: cond.side };
        let t = self.sample_exit_time(frame.to_unit(checked_in(frame, x)?), unit, rng)?;
        Ok(frame.time_from_unit(t))
    }

    pub fn sample_survived_position_on<R: RngCore + ?Sized>(
        &self,
        frame: &IntervalFrame,
        s: f64,
        x: f64,
        rng: &mut R,
    ) -> Result<f64> {
        let y = self.sample_survived_position(frame.time_to_unit(s), frame.to_unit(checked_in(frame, x)?), rng)?;
        Ok(frame.from_unit(y))
    }
}

fn checked_in(frame: &IntervalFrame, x: f64) -> Result<f64> {
    if x < frame.lo || x > frame.hi || x.is_nan() {
        return Err(Error::InvalidArgument(format!("{x} outside [{}, {}]", frame.lo, frame.hi)));
    }
    Ok(x)
}

fn check_position(x: f64) -> Result<()> {
    if !(x.abs() <= 1.0) {
        return Err(Error::InvalidArgument(format!("position {x} outside [-1, 1]")));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time {t} must be positive and finite")));
    }
    Ok(())
}

fn check_level(u: f64) -> Result<()> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidArgument(format!("level {u} outside (0, 1)")));
    }
    Ok(())
}

/// Uniform draw on the open interval `(0, 1)`.
#[inline]
pub fn open_uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

const INVERSION_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 200;

/// Solve `cdf(q) = target` for an increasing `cdf` on `[lo, hi]` with
/// `cdf(lo) ≤ target ≤ cdf(hi)`. Newton steps are taken while they stay in
/// the bracket and shrink fast enough; bisection otherwise.
fn solve_increasing<F>(cdf: F, target: f64, bound: f64, mut lo: f64, mut hi: f64, guess: f64) -> Result<Quantile>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    let tol = INVERSION_TOL * bound;
    let mut q = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    let mut step_old = hi - lo;
    let mut step = step_old;
    let mut best = (q, f64::INFINITY);
    for _ in 0..MAX_ITERATIONS {
        let (c, d) = cdf(q)?;
        let r = c - target;
        if r.abs() < best.1 {
            best = (q, r.abs());
        }
        if r.abs() <= tol {
            return Ok(Quantile { value: q, residual: r.abs() / bound });
        }
        if r < 0.0 {
            lo = q;
        } else {
            hi = q;
        }
        if hi - lo <= 2.0 * f64::EPSILON * q.abs().max(f64::MIN_POSITIVE) {
            // Bracket collapsed to float resolution.
            return Ok(Quantile { value: best.0, residual: best.1 / bound });
        }
        let newton_ok = d > 0.0 && {
            let next = q - r / d;
            next > lo && next < hi && (2.0 * r).abs() <= (step_old * d).abs()
        };
        step_old = step;
        if newton_ok {
            step = r / d;
            q -= step;
        } else {
            step = 0.5 * (hi - lo);
            q = lo + step;
        }
    }
    Err(Error::Inversion { iterations: MAX_ITERATIONS, residual: best.1 / bound })
}

const CENTER_TABLE_SIZE: usize = 4096;

/// Quantiles `q_i` of the unconditioned exit time from the center at levels
/// `i / CENTER_TABLE_SIZE`, with slopes `dq/du = 1 / density(q_i)`, for cubic
/// Hermite starting points.
fn center_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let law = ExitLaw::default();
        let cdf = |q: f64| law.time_cdf_pdf(q, 0.0, None);
        let mut table = vec![(0.0, 0.0); CENTER_TABLE_SIZE + 1];
        let mut hi = 64.0;
        while law.exit_time_cdf(hi, 0.0).unwrap_or(1.0) < 1.0 - 1e-15 {
            hi *= 2.0;
        }
        let mut guess = 0.05;
        for (i, slot) in table.iter_mut().enumerate().take(CENTER_TABLE_SIZE).skip(1) {
            let u = i as f64 / CENTER_TABLE_SIZE as f64;
            let q = solve_increasing(cdf, u, 1.0, 0.0, hi, guess).map(|q| q.value).unwrap_or(guess);
            let g = cdf(q).map(|v| v.1).unwrap_or(f64::NAN);
            *slot = (q, 1.0 / g);
            guess = q;
        }
        table
    })
}

fn center_quantile_guess(u: f64) -> f64 {
    let table = center_table();
    let s = u * CENTER_TABLE_SIZE as f64;
    let i = s.floor() as usize;
    if i + 1 >= CENTER_TABLE_SIZE {
        // Exponential tail: 1 - G ≈ (4/π) exp(-π² t / 8).
        return -8.0 / (PI * PI) * ((1.0 - u) * PI / 4.0).ln();
    }
    if i == 0 {
        // Small-time tail: G ≈ 4 erfc(1/√(2t)); invert the exponential factor.
        let l = (4.0 / u).ln();
        return 1.0 / (2.0 * l.max(1.0));
    }
    let h = 1.0 / CENTER_TABLE_SIZE as f64;
    let w = s - i as f64;
    let ((q0, m0), (q1, m1)) = (table[i], table[i + 1]);
    let (w2, w3) = (w * w, w * w * w);
    (2.0 * w3 - 3.0 * w2 + 1.0) * q0 + (w3 - 2.0 * w2 + w) * h * m0 + (-2.0 * w3 + 3.0 * w2) * q1 + (w3 - w2) * h * m1
}

/// Rough standard normal quantile, used only for starting points.
fn normal_quantile_approx(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile_approx(1.0 - p)
    }
}
