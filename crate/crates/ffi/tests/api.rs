use std::ffi::{CStr, CString};
use std::ptr;

use skewwalk_ffi::*;

fn last_error() -> String {
    let p = sw_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn exit_batch_through_handles() {
    unsafe {
        let mut c = ptr::null_mut();
        let starts = [0.0, 0.5];
        let a = [1.0, 4.0];
        let rho = [1.0, 1.0];
        let st = sw_coefficients_piecewise_constant(
            0.0,
            1.0,
            SwBoundary::Dirichlet as i32,
            SwBoundary::Dirichlet as i32,
            starts.as_ptr(),
            a.as_ptr(),
            rho.as_ptr(),
            2,
            &mut c,
        );
        assert_eq!(st, SwStatus::Ok);
        let mut violations = 99;
        assert_eq!(sw_coefficients_validate(c, &mut violations), SwStatus::Ok);
        assert_eq!(violations, 0);

        let opts = SwSimulatorOptions { delta: 0.05, ..sw_simulator_options_default() };
        let mut sim = ptr::null_mut();
        assert_eq!(sw_simulator_new(c, &opts, &mut sim), SwStatus::Ok);
        let (mut lo, mut hi) = (0.0, 0.0);
        assert_eq!(sw_simulator_domain(sim, &mut lo, &mut hi), SwStatus::Ok);
        assert_eq!((lo, hi), (0.0, 1.0));

        let mut b = ptr::null_mut();
        assert_eq!(sw_simulator_run_exit(sim, 0.5, 20_000, 3, &mut b), SwStatus::Ok);
        let n = sw_batch_len(b);
        assert_eq!(n, 20_000);
        let mut right = 0;
        let mut steps = 0;
        for i in 0..n {
            let mut p = SwPath::default();
            assert_eq!(sw_batch_get(b, i, &mut p), SwStatus::Ok);
            assert_eq!(p.exited, 1);
            right += usize::from(p.exit_side == 1);
            steps += p.n_steps;
        }
        assert_eq!(steps, sw_batch_total_steps(b));
        // Scale function slopes 1 and 1/4: P[right] = 0.5 / (0.5 + 0.125) = 0.8.
        let f = right as f64 / n as f64;
        assert!((f - 0.8).abs() < 4.0 * (0.16f64 / n as f64).sqrt(), "{f}");

        let mut p = SwPath::default();
        assert_eq!(sw_batch_get(b, n, &mut p), SwStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));

        sw_batch_free(b);
        sw_simulator_free(sim);
        sw_coefficients_free(c);
    }
}

#[test]
fn horizon_batch_from_json_is_reproducible() {
    let json = CString::new(r#"{"domain": ["-inf", "inf"], "pieces": [{"x": "-inf", "a": 1}, {"x": 0, "a": 2}]}"#).unwrap();
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(sw_coefficients_from_json(json.as_ptr(), &mut c), SwStatus::Ok);
        let opts = sw_simulator_options_default();
        let mut sim = ptr::null_mut();
        assert_eq!(sw_simulator_new(c, &opts, &mut sim), SwStatus::LocalizationRequired);
        assert_eq!(sw_simulator_for_horizon(c, &opts, 0.0, 0.0, 1.0, &mut sim), SwStatus::Ok);
        let run = |seed| {
            let mut b = ptr::null_mut();
            assert_eq!(sw_simulator_run_horizon(sim, 0.0, 1.0, 500, seed, &mut b), SwStatus::Ok);
            let v: Vec<SwPath> = (0..sw_batch_len(b))
                .map(|i| {
                    let mut p = SwPath::default();
                    assert_eq!(sw_batch_get(b, i, &mut p), SwStatus::Ok);
                    p
                })
                .collect();
            sw_batch_free(b);
            v
        };
        let (a, b) = (run(9), run(9));
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p.exited == 0 && p.t_final == 1.0));
        sw_simulator_free(sim);
        sw_coefficients_free(c);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut c = ptr::null_mut();
        let bad = CString::new("{\"domain\": [0, 1]}").unwrap();
        assert_eq!(sw_coefficients_from_json(bad.as_ptr(), &mut c), SwStatus::Parse);
        assert!(last_error().contains("pieces"));
        assert!(c.is_null());

        assert_eq!(sw_coefficients_from_json(ptr::null(), &mut c), SwStatus::NullPointer);
        let x = [0.0];
        assert_eq!(
            sw_coefficients_piecewise_constant(0.0, 1.0, 7, 0, x.as_ptr(), x.as_ptr(), x.as_ptr(), 1, &mut c),
            SwStatus::InvalidArgument
        );
        let mut v = 0.0;
        assert_eq!(sw_exit_time_cdf(1.0, 2.0, &mut v), SwStatus::InvalidArgument);
        assert_eq!(sw_exit_time_cdf(1.0, 0.0, ptr::null_mut()), SwStatus::NullPointer);
        assert_eq!(sw_batch_len(ptr::null()), 0);
        sw_batch_free(ptr::null_mut());
    }
}

#[test]
fn exit_law_values() {
    let mut g = 0.0;
    let mut f = 0.0;
    unsafe {
        assert_eq!(sw_exit_time_cdf(1.0, 0.0, &mut g), SwStatus::Ok);
        assert_eq!(sw_killed_cdf(1.0, 0.0, 1.0, &mut f), SwStatus::Ok);
    }
    assert!((g + f - 1.0).abs() < 1e-12);
    let v = unsafe { CStr::from_ptr(sw_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
