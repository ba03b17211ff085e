//! The random walk on skew Brownian motion.
//!
//! Knots `y_k = Φ(x_k)` carry skewness `β_k` and a half-width `h_k`; the
//! points `y_k ± h_k` are the satellites where interface steps land. Between
//! knots the process is a plain Brownian motion and interior steps run until
//! the next knot is hit.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::coefficients::{
    build_phi, discretize, remove_drift, Boundary, Coefficients, DiscretizeOptions, MeshRule, PhiMap, SamplePoint,
    StepCoefficients,
};
use crate::error::{Error, Result};
use crate::exit_law::{ExitLaw, SeriesConfig, Side};
use crate::stepper::{StepOutcome, Stepper};

/// Placement of the satellites around a knot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SatelliteRule {
    /// `h_k` is half the smaller gap to the neighbouring knots.
    HalfGap,
    /// `h_k` is the smaller gap itself, so satellites coincide with
    /// neighbouring knots on a uniform grid.
    #[default]
    FullGap,
}

impl SatelliteRule {
    fn fraction(self) -> f64 {
        match self {
            SatelliteRule::HalfGap => 0.5,
            SatelliteRule::FullGap => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnotKind {
    Interface,
    Reflecting,
    Absorbing,
    Barrier,
}

/// Where an interface step lands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Landing {
    Knot(usize),
    Free(f64),
}

/// Knots, skewness, half-widths and landing points in natural scale.
#[derive(Debug, Clone)]
pub struct SkewGrid {
    pub y: Vec<f64>,
    pub beta: Vec<f64>,
    pub half_width: Vec<f64>,
    pub kind: Vec<KnotKind>,
    pub left_landing: Vec<Landing>,
    pub right_landing: Vec<Landing>,
}

fn close(a: f64, b: f64) -> bool {
    close_at(a, b, 0.0)
}

/// `a` and `b` agree to 4 ulp of the larger of them and `scale`, the size of
/// the operands `a` was computed from.
fn close_at(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(scale).max(f64::MIN_POSITIVE)
}

impl SkewGrid {
    pub fn new(phi: &PhiMap, rule: SatelliteRule) -> Result<Self> {
        let y = phi.y.clone();
        let n = y.len() - 1;
        if n == 0 {
            return Err(Error::InvalidCoefficients("grid needs at least one cell".into()));
        }
        for w in y.windows(2) {
            if close(w[0], w[1]) || w[0] >= w[1] {
                return Err(Error::InvalidCoefficients(format!("knots {} and {} coincide", w[0], w[1])));
            }
        }
        let end_kind = |bc: Boundary| match bc {
            Boundary::Neumann => KnotKind::Reflecting,
            Boundary::Barrier => KnotKind::Barrier,
            _ => KnotKind::Absorbing,
        };
        let mut kind = vec![KnotKind::Interface; n + 1];
        kind[0] = end_kind(phi.bc_left);
        kind[n] = end_kind(phi.bc_right);
        let f = rule.fraction();
        let mut half_width = vec![0.0; n + 1];
        let mut left_landing = vec![Landing::Free(f64::NAN); n + 1];
        let mut right_landing = vec![Landing::Free(f64::NAN); n + 1];
        for k in 0..=n {
            let gap = match (k, kind[k]) {
                (_, KnotKind::Absorbing | KnotKind::Barrier) => continue,
                (0, _) => y[1] - y[0],
                (k, _) if k == n => y[n] - y[n - 1],
                (k, _) => (y[k] - y[k - 1]).min(y[k + 1] - y[k]),
            };
            let h = f * gap;
            half_width[k] = h;
            let land = |target: f64, neighbour: Option<usize>| match neighbour {
                Some(j) if close_at(target, y[j], y[k].abs().max(h)) || (j < k && target <= y[j]) || (j > k && target >= y[j]) => {
                    Landing::Knot(j)
                }
                _ => Landing::Free(target),
            };
            left_landing[k] = land(y[k] - h, k.checked_sub(1));
            right_landing[k] = land(y[k] + h, if k < n { Some(k + 1) } else { None });
        }
        Ok(Self { y, beta: phi.beta.clone(), half_width, kind, left_landing, right_landing })
    }

    pub fn knots(&self) -> usize {
        self.y.len()
    }

    /// Satellites `(y_k − h_k, y_k + h_k)`.
    pub fn satellites(&self, k: usize) -> (f64, f64) {
        (self.y[k] - self.half_width[k], self.y[k] + self.half_width[k])
    }

    fn landing(&self, k: usize, side: Side) -> Landing {
        match side {
            Side::Left => self.left_landing[k],
            Side::Right => self.right_landing[k],
        }
    }

    /// Cell `j` with `y_j < y < y_{j+1}`, or the knot equal to `y`.
    fn locate(&self, y: f64) -> std::result::Result<usize, usize> {
        let j = self.y.partition_point(|&v| v <= y);
        if j > 0 && self.y[j - 1] == y {
            Err(j - 1)
        } else {
            Ok(j - 1)
        }
    }
}

/// Options for [`Simulator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatorOptions {
    pub delta: f64,
    pub mesh: MeshRule,
    pub sample: SamplePoint,
    pub satellites: SatelliteRule,
    pub series: SeriesConfig,
    /// Total step budget for a batch in exit mode.
    pub step_cap: u64,
}

impl Default for SimulatorOptions {
    fn default() -> Self {
        Self {
            delta: 0.05,
            mesh: MeshRule::ScaleUniform,
            sample: SamplePoint::Left,
            satellites: SatelliteRule::FullGap,
            series: SeriesConfig::default(),
            step_cap: 1_000_000_000,
        }
    }
}

impl SimulatorOptions {
    pub fn with_delta(delta: f64) -> Self {
        Self { delta, ..Self::default() }
    }
}

/// Horizon or exit mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunMode {
    Horizon(f64),
    Exit,
}

/// Final state of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathResult {
    pub t_final: f64,
    pub y_final: f64,
    pub x_final: f64,
    /// Absorbed at an end before (or at) the horizon.
    pub exited: bool,
    pub exit_side: Option<Side>,
    pub hit_barrier: bool,
    pub n_steps: u64,
}

/// Paths of a batch in index order.
#[derive(Debug, Clone)]
pub struct Batch {
    pub seed: u64,
    pub mode: RunMode,
    pub x0: f64,
    pub paths: Vec<PathResult>,
}

impl Batch {
    pub fn total_steps(&self) -> u64 {
        self.paths.iter().map(|p| p.n_steps).sum()
    }

    pub fn barrier_hits(&self) -> usize {
        self.paths.iter().filter(|p| p.hit_barrier).count()
    }

    pub fn survivors(&self) -> impl Iterator<Item = &PathResult> {
        self.paths.iter().filter(|p| !p.exited)
    }
}

#[derive(Debug, Clone, Copy)]
enum Position {
    Knot(usize),
    Free(f64),
}

/// Compiled walk for one coefficient set and mesh size.
#[derive(Debug, Clone)]
pub struct Simulator {
    options: SimulatorOptions,
    working: Option<Coefficients>,
    steps: StepCoefficients,
    phi: PhiMap,
    grid: SkewGrid,
    stepper: Stepper,
}

/// Stream used for particle `i` of a batch seeded with `seed`.
pub fn particle_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

impl Simulator {
    /// Compile bounded coefficients: validate, remove the drift, discretize,
    /// map to natural scale and place satellites.
    pub fn new(coeffs: &Coefficients, options: SimulatorOptions) -> Result<Self> {
        coeffs.validated()?;
        if !coeffs.is_bounded() {
            return Err(Error::LocalizationRequired);
        }
        let driftless = remove_drift(coeffs)?;
        let steps =
            discretize(&driftless, options.delta, DiscretizeOptions { mesh: options.mesh, sample: options.sample })?;
        let mut sim = Self::from_steps(steps, options)?;
        sim.working = Some(driftless);
        Ok(sim)
    }

    /// Compile for paths started in `[x_lo, x_hi]` and run up to `horizon`,
    /// localizing infinite ends first.
    pub fn for_horizon(
        coeffs: &Coefficients,
        options: SimulatorOptions,
        x_lo: f64,
        x_hi: f64,
        horizon: f64,
    ) -> Result<Self> {
        Self::new(&coeffs.localized(x_lo, x_hi, horizon)?, options)
    }

    /// Use step coefficients as given.
    pub fn from_steps(steps: StepCoefficients, options: SimulatorOptions) -> Result<Self> {
        let law = ExitLaw::new(options.series)?;
        let phi = build_phi(&steps);
        let grid = SkewGrid::new(&phi, options.satellites)?;
        Ok(Self { options, working: None, steps, phi, grid, stepper: Stepper::new(law) })
    }

    pub fn options(&self) -> &SimulatorOptions {
        &self.options
    }

    /// Driftless, localized coefficients the mesh was built from.
    pub fn working_coefficients(&self) -> Option<&Coefficients> {
        self.working.as_ref()
    }

    pub fn steps(&self) -> &StepCoefficients {
        &self.steps
    }

    pub fn phi(&self) -> &PhiMap {
        &self.phi
    }

    pub fn grid(&self) -> &SkewGrid {
        &self.grid
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.steps.left(), self.steps.right())
    }

    /// SHA-256 over the knots, skewness and half-widths.
    pub fn grid_digest(&self) -> String {
        let mut h = Sha256::new();
        for v in [&self.grid.y, &self.grid.beta, &self.grid.half_width] {
            for x in v.iter() {
                h.update(x.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    fn start(&self, x0: f64) -> Result<Position> {
        let (lo, hi) = self.domain();
        if !(x0 >= lo && x0 <= hi) {
            return Err(Error::InvalidArgument(format!("start {x0} outside [{lo}, {hi}]")));
        }
        if let Ok(k) = self.phi.x.binary_search_by(|v| v.total_cmp(&x0)) {
            return Ok(Position::Knot(k));
        }
        let y = self.phi.forward(x0);
        let g = &self.grid;
        Ok(match g.locate(y) {
            Err(k) => Position::Knot(k),
            Ok(j) if close(y, g.y[j]) => Position::Knot(j),
            Ok(j) if close(y, g.y[j + 1]) => Position::Knot(j + 1),
            Ok(_) => Position::Free(y),
        })
    }

    fn finish(&self, t: f64, y: f64, exited_at: Option<usize>, n_steps: u64) -> PathResult {
        let n = self.grid.knots() - 1;
        let (exit_side, hit_barrier) = match exited_at {
            Some(k) => (Some(if k == 0 { Side::Left } else { Side::Right }), self.grid.kind[k] == KnotKind::Barrier),
            None => (None, false),
        };
        let x_final = match exited_at {
            Some(k) => self.phi.x[k],
            None => {
                if let Err(k) = self.grid.locate(y) {
                    self.phi.x[k]
                } else {
                    self.phi.inverse(y)
                }
            }
        };
        debug_assert!(exited_at.is_none_or(|k| k == 0 || k == n));
        PathResult { t_final: t, y_final: y, x_final, exited: exited_at.is_some(), exit_side, hit_barrier, n_steps }
    }

    /// Run one path from `x0` until `horizon` (`∞` for exit mode).
    fn run_path(
        &self,
        x0: f64,
        horizon: f64,
        rng: &mut ChaCha8Rng,
        budget: Option<&AtomicU64>,
    ) -> Result<PathResult> {
        let mut pos = self.start(x0)?;
        let mut t = 0.0;
        let mut n_steps = 0u64;
        let g = &self.grid;
        loop {
            if let Position::Free(y) = pos {
                if let Err(k) = g.locate(y) {
                    pos = Position::Knot(k);
                }
            }
            if let Position::Knot(k) = pos {
                if matches!(g.kind[k], KnotKind::Absorbing | KnotKind::Barrier) {
                    return Ok(self.finish(t, g.y[k], Some(k), n_steps));
                }
            }
            let remaining = horizon - t;
            if remaining <= 0.0 {
                let y = match pos {
                    Position::Knot(k) => g.y[k],
                    Position::Free(y) => y,
                };
                return Ok(self.finish(horizon, y, None, n_steps));
            }
            if let Some(b) = budget {
                let used = b.fetch_add(1, Ordering::Relaxed) + 1;
                if used > self.options.step_cap {
                    return Err(Error::StepBudget(self.options.step_cap));
                }
            }
            n_steps += 1;
            match pos {
                Position::Knot(k) => {
                    match self.stepper.step_interface(g.y[k], g.beta[k], g.half_width[k], remaining, rng)? {
                        StepOutcome::Exited { elapsed, side } => {
                            t += elapsed;
                            pos = match g.landing(k, side) {
                                Landing::Knot(j) => Position::Knot(j),
                                Landing::Free(y) => Position::Free(y),
                            };
                        }
                        StepOutcome::Survived { at } => return Ok(self.finish(horizon, at, None, n_steps)),
                    }
                }
                Position::Free(y) => {
                    let j = g.locate(y).expect("knot positions are rerouted above");
                    match self.stepper.step_interior(y, g.y[j], g.y[j + 1], remaining, rng)? {
                        StepOutcome::Exited { elapsed, side } => {
                            t += elapsed;
                            pos = Position::Knot(if side == Side::Left { j } else { j + 1 });
                        }
                        StepOutcome::Survived { at } => return Ok(self.finish(horizon, at, None, n_steps)),
                    }
                }
            }
        }
    }

    /// Run one path to the horizon `t_end`.
    pub fn run_to_horizon(&self, x0: f64, t_end: f64, rng: &mut ChaCha8Rng) -> Result<PathResult> {
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon {t_end} must be finite and non-negative")));
        }
        self.run_path(x0, t_end, rng, None)
    }

    /// Run one path until it is absorbed.
    pub fn run_to_exit(&self, x0: f64, rng: &mut ChaCha8Rng) -> Result<PathResult> {
        self.check_exit_mode()?;
        let budget = AtomicU64::new(0);
        self.run_path(x0, f64::INFINITY, rng, Some(&budget))
    }

    fn check_exit_mode(&self) -> Result<()> {
        let n = self.grid.knots() - 1;
        if self.grid.kind[0] == KnotKind::Reflecting && self.grid.kind[n] == KnotKind::Reflecting {
            return Err(Error::InvalidArgument("exit mode needs an absorbing end".into()));
        }
        Ok(())
    }

    /// Run `n` independent paths from `x0`; particle `i` uses stream `i` of
    /// the generator seeded with `seed`, so results do not depend on the
    /// number of worker threads.
    pub fn run_batch(&self, x0: f64, mode: RunMode, n: usize, seed: u64) -> Result<Batch> {
        if n == 0 {
            return Err(Error::InvalidArgument("a batch needs at least one particle".into()));
        }
        let horizon = match mode {
            RunMode::Horizon(t) => {
                if !(t >= 0.0) || !t.is_finite() {
                    return Err(Error::InvalidArgument(format!("horizon {t} must be finite and non-negative")));
                }
                t
            }
            RunMode::Exit => {
                self.check_exit_mode()?;
                f64::INFINITY
            }
        };
        self.start(x0)?;
        let budget = AtomicU64::new(0);
        let budget = if matches!(mode, RunMode::Exit) { Some(&budget) } else { None };
        let paths = (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = particle_rng(seed, i);
                self.run_path(x0, horizon, &mut rng, budget)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Batch { seed, mode, x0, paths })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_steps(n: usize, delta: f64, bc: (Boundary, Boundary)) -> StepCoefficients {
        let xs: Vec<f64> = (0..=n).map(|k| (k as f64 - (n / 2) as f64) * delta).collect();
        StepCoefficients::from_cells(xs, vec![1.0; n], vec![1.0; n], bc.0, bc.1).unwrap()
    }

    #[test]
    fn half_gap_satellites_sit_midway() {
        let s = uniform_steps(20, 0.1, (Boundary::Dirichlet, Boundary::Dirichlet));
        let phi = build_phi(&s);
        let grid = SkewGrid::new(&phi, SatelliteRule::HalfGap).unwrap();
        let k = 10;
        assert_eq!(grid.y[k], 0.0);
        let (lo, hi) = grid.satellites(k);
        assert!((lo + 0.05).abs() < 1e-15 && (hi - 0.05).abs() < 1e-15);
        assert!(matches!(grid.right_landing[k], Landing::Free(_)));
    }

    #[test]
    fn full_gap_satellites_are_neighbours() {
        let s = uniform_steps(20, 0.1, (Boundary::Dirichlet, Boundary::Neumann));
        let grid = SkewGrid::new(&build_phi(&s), SatelliteRule::FullGap).unwrap();
        for k in 1..20 {
            assert_eq!(grid.left_landing[k], Landing::Knot(k - 1));
            assert_eq!(grid.right_landing[k], Landing::Knot(k + 1));
        }
        assert_eq!(grid.kind[20], KnotKind::Reflecting);
        assert_eq!(grid.left_landing[20], Landing::Knot(19));
    }

    #[test]
    fn satellites_are_ordered() {
        let s = StepCoefficients::from_cells(
            vec![-1.0, -0.2, 0.1, 0.9, 1.0],
            vec![1.0, 7.0, 0.4, 2.0],
            vec![2.0, 1.0, 1.0, 0.5],
            Boundary::Neumann,
            Boundary::Dirichlet,
        )
        .unwrap();
        for rule in [SatelliteRule::HalfGap, SatelliteRule::FullGap] {
            let g = SkewGrid::new(&build_phi(&s), rule).unwrap();
            for k in 1..g.knots() - 1 {
                let (lo, hi) = g.satellites(k);
                assert!(g.y[k - 1] <= lo + 1e-15 && lo < g.y[k] && g.y[k] < hi && hi <= g.y[k + 1] + 1e-15);
            }
        }
    }

    #[test]
    fn clock_never_passes_horizon() {
        let s = uniform_steps(10, 0.2, (Boundary::Dirichlet, Boundary::Dirichlet));
        let sim = Simulator::from_steps(s, SimulatorOptions::default()).unwrap();
        let mut rng = particle_rng(1, 0);
        for _ in 0..2000 {
            let p = sim.run_to_horizon(0.05, 0.3, &mut rng).unwrap();
            assert!(p.t_final <= 0.3);
            if !p.exited {
                assert_eq!(p.t_final, 0.3);
                assert!(p.x_final > -1.0 && p.x_final < 1.0);
            }
        }
    }

    #[test]
    fn start_on_absorbing_end() {
        let s = uniform_steps(10, 0.2, (Boundary::Dirichlet, Boundary::Dirichlet));
        let sim = Simulator::from_steps(s, SimulatorOptions::default()).unwrap();
        let p = sim.run_to_exit(1.0, &mut particle_rng(0, 0)).unwrap();
        assert!(p.exited && p.t_final == 0.0 && p.exit_side == Some(Side::Right) && p.n_steps == 0);
    }

    #[test]
    fn landings_snap_to_knots_at_operand_scale() {
        // Here y_7 + h_7 misses y_8 by ~500 ulp of y_8 (which is near 0) but
        // by less than one ulp of the operands.
        let c = Coefficients::piecewise_constant(
            -1.0,
            1.0,
            (Boundary::Dirichlet, Boundary::Dirichlet),
            &[-1.0, -0.0003036454948411871, 0.8951114269709782],
            &[1.6739914036352785, 1.575213269522187, 0.5185396528455999],
            &[1.0, 1.0, 1.0],
        )
        .unwrap();
        let sim = Simulator::new(&c, SimulatorOptions::with_delta(0.1)).unwrap();
        let g = sim.grid();
        for l in g.left_landing.iter().chain(&g.right_landing) {
            if let Landing::Free(y) = *l {
                assert!(y.is_nan() || g.y.iter().all(|&k| (k - y).abs() > 1e-12), "{y}");
            }
        }
        for i in 0..2000 {
            sim.run_to_exit(0.08397464788406261, &mut particle_rng(929, i)).unwrap();
        }
    }

    #[test]
    fn batch_is_reproducible() {
        let s = uniform_steps(10, 0.2, (Boundary::Neumann, Boundary::Dirichlet));
        let sim = Simulator::from_steps(s, SimulatorOptions::default()).unwrap();
        let a = sim.run_batch(0.1, RunMode::Exit, 200, 42).unwrap();
        let b = sim.run_batch(0.1, RunMode::Exit, 200, 42).unwrap();
        assert_eq!(a.paths, b.paths);
        assert!(a.paths.iter().all(|p| p.exit_side == Some(Side::Right)));
    }

    #[test]
    fn reflecting_both_ends_has_no_exit_mode() {
        let s = uniform_steps(4, 0.5, (Boundary::Neumann, Boundary::Neumann));
        let sim = Simulator::from_steps(s, SimulatorOptions::default()).unwrap();
        assert!(sim.run_batch(0.0, RunMode::Exit, 1, 0).is_err());
    }

    #[test]
    fn step_budget_is_enforced() {
        let s = uniform_steps(40, 0.05, (Boundary::Dirichlet, Boundary::Dirichlet));
        let opts = SimulatorOptions { step_cap: 50, ..Default::default() };
        let sim = Simulator::from_steps(s, opts).unwrap();
        assert!(matches!(sim.run_batch(0.0, RunMode::Exit, 10, 1), Err(Error::StepBudget(50))));
    }
}
