use lapwave_core::contour::{
    build_cci_contour, build_shifted_line, default_indentation_radius, smooth_step,
    smooth_step_deriv, ContourParam, TrigGrid, DEFAULT_SMOOTHING_ORDER,
};
use num_complex::Complex64 as c64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn trapezoid(contour: &ContourParam, grid: &TrigGrid, f: impl Fn(c64) -> c64) -> c64 {
    grid.nodes()
        .map(|t| f(contour.eval(t)) * contour.deriv(t) * grid.weight())
        .sum()
}

#[test]
fn grid_validates_its_size() {
    assert!(TrigGrid::new(3).is_err());
    assert!(TrigGrid::new(5).is_err());
    assert!(TrigGrid::new(4).is_ok());
    let grid = TrigGrid::new(16).unwrap();
    assert_eq!(grid.nodes().count(), 16);
    assert!((grid.nodes().last().unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn cardinal_basis_interpolates_the_grid_nodes() {
    let grid = TrigGrid::new(12).unwrap();
    for ell in 1..=grid.n {
        for (j, t) in grid.nodes().enumerate() {
            let expect = if j + 1 == ell { 1.0 } else { 0.0 };
            assert!((grid.xi(ell, t) - c64::new(expect, 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn cardinal_basis_is_orthonormal_in_quadrature() {
    let grid = TrigGrid::new(10).unwrap();
    for a in 1..=grid.n {
        for b in 1..=grid.n {
            let acc: c64 = grid
                .nodes()
                .map(|t| grid.xi(a, t).conj() * grid.xi(b, t) * grid.weight())
                .sum();
            let expect = if a == b { grid.weight() } else { 0.0 };
            assert!((acc - c64::new(expect, 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn empty_exceptional_set_yields_the_real_segment() {
    let contour = build_cci_contour(&[], &[], 0.1, DEFAULT_SMOOTHING_ORDER).unwrap();
    let grid = TrigGrid::new(32).unwrap();
    for t in grid.nodes() {
        let s = contour.eval(t);
        assert!(s.im.abs() < 1e-15);
        assert!(s.re >= -PI - 1e-12 && s.re <= PI + 1e-12);
    }
    assert!((contour.eval(0.0) - c64::new(-PI, 0.0)).norm() < 1e-12);
    assert!((contour.eval(1.0) - c64::new(PI, 0.0)).norm() < 1e-12);
}

#[test]
fn indentations_dip_below_rightward_and_above_leftward_points() {
    let delta = 0.15;
    let contour =
        build_cci_contour(&[0.9], &[-0.9], delta, DEFAULT_SMOOTHING_ORDER).unwrap();
    let grid = TrigGrid::new(512).unwrap();
    let mut lowest_near_right = 0.0f64;
    let mut highest_near_left = 0.0f64;
    for t in grid.nodes() {
        let s = contour.eval(t);
        if (s.re - 0.9).abs() < delta {
            lowest_near_right = lowest_near_right.min(s.im);
        }
        if (s.re + 0.9).abs() < delta {
            highest_near_left = highest_near_left.max(s.im);
        }
    }
    assert!((lowest_near_right + delta).abs() < 2e-3);
    assert!((highest_near_left - delta).abs() < 2e-3);
    // Away from the indented points the contour stays on the real line.
    for t in grid.nodes() {
        let s = contour.eval(t);
        if (s.re - 0.9).abs() > 1.5 * delta && (s.re + 0.9).abs() > 1.5 * delta {
            assert!(s.im.abs() < 1e-9);
        }
    }
}

#[test]
fn contour_configuration_errors_are_reported() {
    assert!(build_cci_contour(&[0.5], &[0.5], 0.1, 8).is_err());
    assert!(build_cci_contour(&[0.5, 0.6], &[], 0.1, 8).is_err());
    assert!(build_cci_contour(&[3.1], &[], 0.2, 8).is_err());
    assert!(build_cci_contour(&[0.5], &[], 0.0, 8).is_err());
    assert!(build_shifted_line(-0.2, 8).is_err());
    assert!(build_shifted_line(0.0, 8).is_err());
}

#[test]
fn default_radius_respects_gaps_and_cap() {
    let r = default_indentation_radius(&[0.9, -0.9]);
    assert!(r <= 0.3 + 1e-15);
    assert!(r > 0.0);
    // A pair of close points forces a smaller radius than half their gap.
    let tight = default_indentation_radius(&[0.0, 0.2]);
    assert!((tight - 0.1).abs() < 1e-12);
}

#[test]
fn flattened_endpoints_make_the_trapezoid_rule_spectral() {
    // ∮ dz/(z − i·0.4) along the indented path from −π to π equals the
    // straight-line value because the integrand is analytic between the
    // two paths; compare against direct dense quadrature on the line.
    let contour = build_cci_contour(&[0.9], &[-0.9], 0.2, DEFAULT_SMOOTHING_ORDER).unwrap();
    let f = |z: c64| (z - c64::new(0.0, 0.4)).inv();
    let grid_c = TrigGrid::new(256).unwrap();
    let got = trapezoid(&contour, &grid_c, f);
    let m = 40000;
    let exact: c64 = (0..m)
        .map(|i| {
            let x = -PI + 2.0 * PI * (i as f64 + 0.5) / m as f64;
            f(c64::new(x, 0.0)) * (2.0 * PI / m as f64)
        })
        .sum();
    assert!((got - exact).norm() < 1e-8, "got {got}, exact {exact}");
}

#[test]
fn deformation_around_a_pole_picks_up_the_residue() {
    // The rightward indentation passes below β = 0.9, so a simple pole
    // there contributes −iπ·residue relative to the principal value.
    let contour = build_cci_contour(&[0.9], &[], 0.2, DEFAULT_SMOOTHING_ORDER).unwrap();
    let f = |z: c64| (z - c64::new(0.9, 0.0)).inv();
    let grid = TrigGrid::new(512).unwrap();
    let got = trapezoid(&contour, &grid, f);
    let pv = ((PI - 0.9) / (PI + 0.9)).ln();
    let expect = c64::new(pv, PI);
    assert!((got - expect).norm() < 1e-8, "got {got}, expected {expect}");
}

#[test]
fn shifted_line_runs_parallel_to_the_real_axis() {
    let line = build_shifted_line(0.2, DEFAULT_SMOOTHING_ORDER).unwrap();
    let grid = TrigGrid::new(64).unwrap();
    for t in grid.nodes() {
        let s = line.eval(t);
        assert!((s.im - 0.2).abs() < 1e-12);
        assert!(line.deriv(t).im.abs() < 1e-9);
    }
    assert!((line.eval(0.0).re + PI).abs() < 1e-12);
    assert!((line.eval(1.0).re - PI).abs() < 1e-12);
    // The parameterization length is preserved: ∫ s′ dt = 2π.
    let total = trapezoid(&line, &grid, |_| c64::new(1.0, 0.0));
    assert!((total - c64::new(2.0 * PI, 0.0)).norm() < 1e-10);
}

#[test]
fn smoothing_substitution_flattens_the_knots() {
    for p in [4u32, 8] {
        assert!(smooth_step(0.0, p).abs() < 1e-15);
        assert!((smooth_step(1.0, p) - 1.0).abs() < 1e-15);
        assert!(smooth_step_deriv(0.0, p).abs() < 1e-15);
        assert!(smooth_step_deriv(1.0, p).abs() < 1e-15);
        assert!((smooth_step(0.5, p) - 0.5).abs() < 1e-12);
    }
}

#[test]
fn contour_velocity_matches_finite_differences() {
    let contour = build_cci_contour(&[0.9], &[-0.9], 0.2, DEFAULT_SMOOTHING_ORDER).unwrap();
    let eps = 1e-6;
    for &t in &[0.13, 0.37, 0.52, 0.81] {
        let fd = (contour.eval(t + eps) - contour.eval(t - eps)) / (2.0 * eps);
        let an = contour.deriv(t);
        assert!((fd - an).norm() < 1e-6 * (1.0 + an.norm()), "t = {t}");
    }
}

#[test]
fn minimum_distance_reports_the_indentation_radius() {
    let contour = build_cci_contour(&[0.9], &[], 0.2, DEFAULT_SMOOTHING_ORDER).unwrap();
    let grid = TrigGrid::new(1024).unwrap();
    let d = contour.min_distance_to(&grid, &[0.9]);
    assert!((d - 0.2).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn smoothing_substitution_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(smooth_step(lo, DEFAULT_SMOOTHING_ORDER)
            <= smooth_step(hi, DEFAULT_SMOOTHING_ORDER) + 1e-15);
    }
}
