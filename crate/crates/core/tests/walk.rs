use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use skewwalk::coefficients::{MeshRule, ScaleData};
use skewwalk::stats::{ks_one_sample, ks_one_sample_critical, ks_two_sample, ks_two_sample_critical, summarize};
use skewwalk::stepper::{StepOutcome, Stepper};
use skewwalk::walk::{particle_rng, RunMode, SatelliteRule};
use skewwalk::{Boundary, Coefficients, ExitLaw, Side, Simulator, SimulatorOptions};

const DIRICHLET: (Boundary, Boundary) = (Boundary::Dirichlet, Boundary::Dirichlet);

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / 2f64.sqrt())
}

#[test]
fn unskewed_interface_is_brownian() {
    let stepper = Stepper::default();
    let law = ExitLaw::default();
    let n = 100_000;
    let outcomes: Vec<(f64, Side)> = (0..n as u64)
        .into_par_iter()
        .map(|i| match stepper.step_interface(0.0, 0.0, 1.0, f64::INFINITY, &mut particle_rng(3, i)).unwrap() {
            StepOutcome::Exited { elapsed, side } => (elapsed, side),
            StepOutcome::Survived { .. } => unreachable!("unbounded budget"),
        })
        .collect();
    let right = outcomes.iter().filter(|o| o.1 == Side::Right).count() as f64 / n as f64;
    assert!((right - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    let times: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let d = ks_one_sample(&times, |t| law.exit_time_cdf(t, 0.0).unwrap());
    assert!(d < ks_one_sample_critical(n), "{d}");
}

/// Positions at time `t` of Brownian paths from `x0` that stay in `[−1, 1]`,
/// with a bridge crossing correction per step.
fn bridge_survivors(t: f64, x0: f64, dt: f64, n: usize, seed: u64) -> Vec<f64> {
    let steps = (t / dt).round() as usize;
    let sd = dt.sqrt();
    (0..n as u64)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = particle_rng(seed, i);
            let mut x = x0;
            for _ in 0..steps {
                let z: f64 = rng.sample(StandardNormal);
                let next = x + sd * z;
                if next.abs() >= 1.0 {
                    return None;
                }
                let p = (-2.0 * (1.0 - x) * (1.0 - next) / dt).exp() + (-2.0 * (1.0 + x) * (1.0 + next) / dt).exp();
                if rng.random::<f64>() < p {
                    return None;
                }
                x = next;
            }
            Some(x)
        })
        .collect()
}

#[test]
fn interior_survivors_match_brownian_paths() {
    let (t, x0) = (0.2, 0.5);
    let reference = bridge_survivors(t, x0, 1e-4, 40_000, 77);
    let stepper = Stepper::default();
    let walk: Vec<f64> = (0..40_000u64)
        .into_par_iter()
        .filter_map(|i| match stepper.step_interior(x0, -1.0, 1.0, t, &mut particle_rng(78, i)).unwrap() {
            StepOutcome::Survived { at } => Some(at),
            StepOutcome::Exited { elapsed, .. } => {
                assert!(elapsed <= t);
                None
            }
        })
        .collect();
    let d = ks_two_sample(&walk, &reference);
    assert!(d < ks_two_sample_critical(walk.len(), reference.len()), "{d}");
}

#[test]
fn brownian_motion_at_time_one() {
    let c = Coefficients::constant(1.0, 1.0);
    let sim = Simulator::for_horizon(&c, SimulatorOptions::with_delta(0.1), 0.0, 0.0, 1.0).unwrap();
    let n = 100_000;
    let b = sim.run_batch(0.0, RunMode::Horizon(1.0), n, 5).unwrap();
    assert_eq!(b.barrier_hits(), 0);
    let xs: Vec<f64> = b.paths.iter().map(|p| p.x_final).collect();
    let d = ks_one_sample(&xs, normal_cdf);
    assert!(d < ks_one_sample_critical(n), "{d}");
}

#[test]
fn tiny_horizon_stays_put() {
    let c = Coefficients::piecewise_constant(-1.0, 1.0, DIRICHLET, &[-1.0, 0.0], &[1.0, 2.0], &[1.0, 1.0]).unwrap();
    let sim = Simulator::new(&c, SimulatorOptions::with_delta(0.1)).unwrap();
    for &x0 in &[0.0, 0.137, -0.5] {
        let p = sim.run_to_horizon(x0, 1e-18, &mut particle_rng(1, 0)).unwrap();
        assert_eq!(p.t_final, 1e-18);
        assert!((p.x_final - x0).abs() < 1e-12);
        assert!(!p.exited);
    }
}

#[test]
fn reflecting_end_confines_paths() {
    let c = Coefficients::piecewise_constant(0.0, 2.0, (Boundary::Neumann, Boundary::Dirichlet), &[0.0, 0.7], &[1.0, 3.0], &[1.0, 0.5])
        .unwrap();
    for satellites in [SatelliteRule::FullGap, SatelliteRule::HalfGap] {
        let sim = Simulator::new(&c, SimulatorOptions { satellites, ..SimulatorOptions::with_delta(0.1) }).unwrap();
        let b = sim.run_batch(0.05, RunMode::Horizon(2.0), 20_000, 8).unwrap();
        assert!(b.paths.iter().all(|p| p.x_final >= 0.0));
        assert!(b.paths.iter().filter(|p| p.exited).all(|p| p.x_final == 2.0 && p.exit_side == Some(Side::Right)));
    }
}

#[test]
fn exit_from_the_unit_interval() {
    let c = Coefficients::piecewise_constant(0.0, 1.0, DIRICHLET, &[0.0], &[1.0], &[1.0]).unwrap();
    let sim = Simulator::new(&c, SimulatorOptions::with_delta(0.05)).unwrap();
    let n = 100_000;
    let b = sim.run_batch(0.3, RunMode::Exit, n, 12).unwrap();
    let right = b.paths.iter().filter(|p| p.x_final == 1.0).count() as f64 / n as f64;
    assert!(b.paths.iter().all(|p| p.exited && (p.x_final == 0.0 || p.x_final == 1.0)));
    assert!((right - 0.3).abs() < 3.0 * (0.21 / n as f64).sqrt(), "{right}");
}

#[test]
fn exit_side_follows_the_scale_function() {
    let c = Coefficients::piecewise_constant(-1.0, 1.0, DIRICHLET, &[-1.0, -0.3, 0.4], &[0.5, 4.0, 1.5], &[2.0, 1.0, 0.7]).unwrap();
    let scale = ScaleData::new(&c).unwrap();
    let sim = Simulator::new(&c, SimulatorOptions::with_delta(0.05)).unwrap();
    let n = 50_000;
    for &x0 in &[-0.6, 0.1] {
        let b = sim.run_batch(x0, RunMode::Exit, n, 21).unwrap();
        let right = b.paths.iter().filter(|p| p.exit_side == Some(Side::Right)).count() as f64 / n as f64;
        let p = scale.exit_right_prob(-1.0, 1.0, x0).unwrap();
        assert!((right - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "x0 = {x0}: {right} vs {p}");
    }
}

#[test]
fn halving_the_mesh_quadruples_the_steps() {
    let c = Coefficients::piecewise_constant(-1.0, 1.0, DIRICHLET, &[-1.0, 0.0], &[1.0, 2.0], &[1.0, 1.0]).unwrap();
    let mean_steps = |delta: f64| {
        let sim = Simulator::new(&c, SimulatorOptions { mesh: MeshRule::ScaleUniform, ..SimulatorOptions::with_delta(delta) }).unwrap();
        let b = sim.run_batch(0.0, RunMode::Exit, 4000, 9).unwrap();
        summarize(&b.paths.iter().map(|p| p.n_steps as f64).collect::<Vec<_>>()).mean
    };
    let ratio = mean_steps(0.05) / mean_steps(0.1);
    assert!((ratio / 4.0 - 1.0).abs() < 0.15, "{ratio}");
}

#[test]
fn different_seeds_sample_the_same_law() {
    let c = Coefficients::piecewise_constant(-2.0, 2.0, DIRICHLET, &[-2.0, 0.0], &[1.0, 2.0], &[1.0, 1.0]).unwrap();
    let sim = Simulator::new(&c, SimulatorOptions::with_delta(0.1)).unwrap();
    let n = 100_000;
    let xs = |seed| sim.run_batch(0.0, RunMode::Horizon(0.5), n, seed).unwrap().paths.iter().map(|p| p.x_final).collect::<Vec<_>>();
    let (a, b) = (xs(100), xs(200));
    assert_ne!(a, b);
    assert!(ks_two_sample(&a, &b) < ks_two_sample_critical(n, n));
}

#[test]
fn empty_batches_are_rejected() {
    let c = Coefficients::piecewise_constant(-1.0, 1.0, DIRICHLET, &[-1.0], &[1.0], &[1.0]).unwrap();
    let sim = Simulator::new(&c, SimulatorOptions::default()).unwrap();
    assert!(sim.run_batch(0.0, RunMode::Exit, 0, 1).is_err());
    assert!(sim.run_batch(0.0, RunMode::Horizon(1.0), 0, 1).is_err());
}

#[test]
fn states_stay_in_the_domain() {
    let c = Coefficients::piecewise_constant(-1.0, 1.5, DIRICHLET, &[-1.0, 0.25], &[3.0, 0.4], &[0.5, 2.0]).unwrap();
    let sim = Simulator::new(&c, SimulatorOptions::with_delta(0.07)).unwrap();
    let (lo, hi) = sim.domain();
    let b = sim.run_batch(0.9, RunMode::Horizon(0.8), 20_000, 4).unwrap();
    for p in &b.paths {
        assert!(p.x_final >= lo && p.x_final <= hi);
        assert!(p.t_final <= 0.8);
        if !p.exited {
            assert_eq!(p.t_final, 0.8);
        }
    }
}
