//! Single steps of the walk in natural scale.
//!
//! An interface step starts at a knot `y` with skewness `β` and runs until
//! the skew Brownian motion leaves `[y − h, y + h]`; an interior step starts
//! anywhere in a knot-free interval and runs until it leaves that interval.
//! Both are truncated at the remaining time budget `s`.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::exit_law::{open_uniform, ExitCondition, ExitLaw, IntervalFrame, Side};

/// Budgets below `DEGENERATE · h²` are treated as zero.
pub const DEGENERATE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    /// Left the interval after `elapsed` through `side`.
    Exited { elapsed: f64, side: Side },
    /// Still inside when the budget ran out.
    Survived { at: f64 },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stepper {
    law: ExitLaw,
}

impl Stepper {
    pub fn new(law: ExitLaw) -> Self {
        Self { law }
    }

    pub fn law(&self) -> &ExitLaw {
        &self.law
    }

    /// Step from a knot at `center` with skewness `beta` on `[center − h, center + h]`.
    /// `s = ∞` runs to the exit.
    pub fn step_interface<R: RngCore + ?Sized>(
        &self,
        center: f64,
        beta: f64,
        h: f64,
        s: f64,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        if !(h > 0.0) || !(beta.abs() <= 1.0) || !(s >= 0.0) {
            return Err(Error::InvalidArgument(format!("interface step with h = {h}, beta = {beta}, s = {s}")));
        }
        if s <= DEGENERATE * h * h {
            return Ok(StepOutcome::Survived { at: center });
        }
        let theta = 0.5 * (1.0 + beta);
        let t = s / (h * h);
        if t.is_finite() {
            let gamma = self.law.survival(t, 0.0)?;
            if open_uniform(rng) < gamma {
                let r = self.law.sample_folded_position(t, rng)?;
                let sign = if open_uniform(rng) < theta { 1.0 } else { -1.0 };
                return Ok(StepOutcome::Survived { at: inside(center, center + sign * h * r, h) });
            }
        }
        let side = if open_uniform(rng) < theta { Side::Right } else { Side::Left };
        let cond = if t.is_finite() { ExitCondition::before(t) } else { ExitCondition::NONE };
        let elapsed = h * h * self.law.sample_exit_time(0.0, cond, rng)?;
        Ok(StepOutcome::Exited { elapsed: elapsed.min(s), side })
    }

    /// Step of a plain Brownian motion from `x` on `[lo, hi]`.
    pub fn step_interior<R: RngCore + ?Sized>(
        &self,
        x: f64,
        lo: f64,
        hi: f64,
        s: f64,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        let frame = IntervalFrame::new(lo, hi)?;
        if !(x > lo && x < hi) || !(s >= 0.0) {
            return Err(Error::InvalidArgument(format!("interior step from {x} on [{lo}, {hi}] with s = {s}")));
        }
        let k = frame.time_scale();
        if s <= DEGENERATE * k {
            return Ok(StepOutcome::Survived { at: x });
        }
        let u = frame.to_unit(x);
        let t = s / k;
        if t.is_finite() {
            let gamma = self.law.survival(t, u)?;
            if open_uniform(rng) < gamma {
                let v = self.law.sample_survived_position(t, u, rng)?;
                let at = frame.from_unit(v).clamp(lo.next_up(), hi.next_down());
                return Ok(StepOutcome::Survived { at });
            }
        }
        let p_right = self.law.side_prob_given(t, u)?;
        let side = if open_uniform(rng) < p_right { Side::Right } else { Side::Left };
        let cond = if t.is_finite() { ExitCondition::before_on_side(t, side) } else { ExitCondition { before: f64::INFINITY, side: Some(side) } };
        let elapsed = k * self.law.sample_exit_time(u, cond, rng)?;
        Ok(StepOutcome::Exited { elapsed: elapsed.min(s), side })
    }
}

/// Keep a survived position strictly inside `(center − h, center + h)`.
fn inside(center: f64, at: f64, h: f64) -> f64 {
    at.clamp((center - h).next_up(), (center + h).next_down())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_budget_keeps_position() {
        let st = Stepper::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(st.step_interface(0.3, 0.2, 0.1, 1e-18, &mut rng).unwrap(), StepOutcome::Survived { at: 0.3 });
        assert_eq!(st.step_interior(0.3, 0.0, 1.0, 0.0, &mut rng).unwrap(), StepOutcome::Survived { at: 0.3 });
    }

    #[test]
    fn outcomes_respect_budget_and_support() {
        let st = Stepper::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5000 {
            match st.step_interface(1.0, -0.4, 0.2, 0.03, &mut rng).unwrap() {
                StepOutcome::Exited { elapsed, .. } => assert!(elapsed > 0.0 && elapsed <= 0.03),
                StepOutcome::Survived { at } => assert!(at > 0.8 && at < 1.2),
            }
            match st.step_interior(0.1, -0.5, 0.3, 0.05, &mut rng).unwrap() {
                StepOutcome::Exited { elapsed, .. } => assert!(elapsed > 0.0 && elapsed <= 0.05),
                StepOutcome::Survived { at } => assert!(at > -0.5 && at < 0.3),
            }
        }
    }

    #[test]
    fn reflecting_knot_always_exits_right() {
        let st = Stepper::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            match st.step_interface(0.0, 1.0, 1.0, f64::INFINITY, &mut rng).unwrap() {
                StepOutcome::Exited { side, .. } => assert_eq!(side, Side::Right),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn interior_exit_side_frequency() {
        let st = Stepper::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 40_000;
        let right = (0..n)
            .filter(|_| {
                matches!(
                    st.step_interior(0.5, 0.0, 2.0, f64::INFINITY, &mut rng).unwrap(),
                    StepOutcome::Exited { side: Side::Right, .. }
                )
            })
            .count() as f64
            / n as f64;
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((right - 0.25).abs() < 4.0 * se, "{right}");
    }
}
