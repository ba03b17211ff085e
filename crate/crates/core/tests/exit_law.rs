use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use skewwalk::exit_law::{ExitCondition, IntervalFrame, Series};
use skewwalk::walk::particle_rng;
use skewwalk::{ExitLaw, Side};

fn law() -> ExitLaw {
    ExitLaw::default()
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn dual_series_agree_on_the_grid() {
    let l = law();
    let ts = grid(0.1, 3.0, 50);
    let xs = grid(-1.0, 1.0, 11);
    let mut worst: f64 = 0.0;
    for &t in &ts {
        for &x in &xs {
            let g = |s| l.exit_time_cdf_with(t, x, s).unwrap();
            worst = worst.max((g(Series::Image) - g(Series::Spectral)).abs());
            if x.abs() < 1.0 {
                for side in [Side::Left, Side::Right] {
                    let h = |s| l.cond_exit_time_cdf_with(t, x, side, s).unwrap();
                    worst = worst.max((h(Series::Image) - h(Series::Spectral)).abs());
                }
            }
            for &y in &xs {
                let f = |s| l.killed_cdf_with(t, x, y, s).unwrap();
                worst = worst.max((f(Series::Image) - f(Series::Spectral)).abs());
            }
        }
    }
    assert!(worst < 1e-8, "largest disagreement {worst:e}");
}

#[test]
fn laws_are_monotone_on_the_grid() {
    let l = law();
    let ts = grid(0.01, 4.0, 80);
    for &x in &grid(-0.9, 0.9, 7) {
        let mut prev = [0.0; 3];
        for &t in &ts {
            let now = [
                l.exit_time_cdf(t, x).unwrap(),
                l.cond_exit_time_cdf(t, x, Side::Right).unwrap(),
                l.cond_exit_time_cdf(t, x, Side::Left).unwrap(),
            ];
            for i in 0..3 {
                assert!(now[i] >= prev[i] - 1e-15, "t = {t}, x = {x}");
            }
            prev = now;
        }
        for &t in &[0.05, 0.5, 2.0] {
            let mut last = 0.0;
            for &y in &grid(-1.0, 1.0, 41) {
                let f = l.killed_cdf(t, x, y).unwrap();
                assert!(f >= last - 1e-15);
                last = f;
            }
            assert!((last + l.exit_time_cdf(t, x).unwrap() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn side_probabilities_are_complementary() {
    let l = law();
    for &t in &[0.1, 0.7, 3.0] {
        for &x in &[-0.6, 0.0, 0.45] {
            let right = l.side_prob_given(t, x).unwrap();
            let left = l.side_prob_given(t, -x).unwrap();
            assert!((right + left - 1.0).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&right));
        }
    }
    assert!((l.side_prob_given(60.0, 0.3).unwrap() - 0.65).abs() < 1e-12);
}

/// Fraction of right exits among paths that exit `[−1, 1]` before `t`,
/// from a Brownian path with a bridge crossing correction per step.
fn bridge_side_given(t: f64, x0: f64, dt: f64, n: usize, seed: u64) -> (f64, f64) {
    let steps = (t / dt).round() as usize;
    let sd = dt.sqrt();
    let sides: Vec<Option<bool>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = particle_rng(seed, i);
            let mut x = x0;
            for _ in 0..steps {
                let z: f64 = rng.sample(StandardNormal);
                let next = x + sd * z;
                if next >= 1.0 {
                    return Some(true);
                }
                if next <= -1.0 {
                    return Some(false);
                }
                let up = (-2.0 * (1.0 - x) * (1.0 - next) / dt).exp();
                let down = (-2.0 * (1.0 + x) * (1.0 + next) / dt).exp();
                let u: f64 = rng.random();
                if u < up {
                    return Some(true);
                }
                if u < up + down {
                    return Some(false);
                }
                x = next;
            }
            None
        })
        .collect();
    let exits: Vec<bool> = sides.into_iter().flatten().collect();
    let m = exits.len() as f64;
    let p = exits.iter().filter(|&&r| r).count() as f64 / m;
    (p, (p * (1.0 - p) / m).sqrt())
}

#[test]
fn side_given_exit_matches_brownian_paths() {
    let (p, se) = bridge_side_given(0.5, 0.3, 1e-3, 200_000, 41);
    let exact = law().side_prob_given(0.5, 0.3).unwrap();
    assert!((p - exact).abs() < 3.0 * se, "{p} ± {se} vs {exact}");
}

#[test]
fn reframing_preserves_probabilities() {
    let l = law();
    let unit = IntervalFrame::new(-1.0, 1.0).unwrap();
    assert_eq!(unit.to_unit(0.3), 0.3);
    assert_eq!(unit.time_scale(), 1.0);
    let f = IntervalFrame::new(2.0, 2.5).unwrap();
    for &x in &[2.05, 2.25, 2.4] {
        let u = f.to_unit(x);
        assert!((l.side_prob_on(&f, x).unwrap() - (1.0 + u) / 2.0).abs() < 1e-15);
        let s = 0.03;
        let direct = l.exit_time_cdf(s / 0.0625, u).unwrap();
        assert!((l.exit_time_cdf_on(&f, s, x).unwrap() - direct).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn sampled_quantiles_invert_the_cdf(u in 1e-9f64..1.0, x in -0.99f64..0.99, t in 0.01f64..3.0) {
        let l = law();
        let q = l.quantile_exit_time(x, ExitCondition::before(t), u).unwrap();
        prop_assert!(q.value <= t);
        let c = l.exit_time_cdf(q.value, x).unwrap() / l.exit_time_cdf(t, x).unwrap();
        prop_assert!((c - u).abs() <= 1e-10);
        let p = l.quantile_survived_position(t, x, u).unwrap();
        prop_assert!(p.value > -1.0 && p.value < 1.0);
        let c = l.killed_cdf(t, x, p.value).unwrap() / l.survival(t, x).unwrap();
        prop_assert!((c - u).abs() <= 1e-10);
    }

    #[test]
    fn killed_cdf_and_exit_cdf_are_complementary(x in -1.0f64..1.0, t in 0.01f64..5.0) {
        let l = law();
        prop_assert!((l.killed_cdf(t, x, 1.0).unwrap() + l.exit_time_cdf(t, x).unwrap() - 1.0).abs() < 1e-9);
        prop_assert_eq!(l.killed_cdf(t, x, -1.0).unwrap(), 0.0);
    }
}
