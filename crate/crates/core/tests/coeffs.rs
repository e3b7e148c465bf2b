use lapwave_core::coeffs::{
    cutoff_zeta, example_problem, ramp_psi, ramp_psi_d1, ramp_psi_d2, Bc, CoefficientField,
    ExampleId, RampSign,
};
use proptest::prelude::*;

#[test]
fn cutoff_is_one_inside_and_zero_outside() {
    for t in [0.0, 0.05, 0.1] {
        assert_eq!(cutoff_zeta(t, 0.1, 0.3).unwrap(), 1.0);
    }
    for t in [0.3, 0.5, 10.0] {
        assert_eq!(cutoff_zeta(t, 0.1, 0.3).unwrap(), 0.0);
    }
}

#[test]
fn cutoff_rejects_degenerate_interval() {
    assert!(cutoff_zeta(0.2, 0.3, 0.1).is_err());
    assert!(cutoff_zeta(0.2, 0.1, 0.1).is_err());
}

#[test]
fn cutoff_is_monotone_on_the_blend() {
    let mut prev = 1.0;
    for i in 1..=100 {
        let t = 0.1 + 0.2 * i as f64 / 100.0;
        let v = cutoff_zeta(t, 0.1, 0.3).unwrap();
        assert!(v <= prev + 1e-14, "not monotone at t = {t}");
        prev = v;
    }
}

#[test]
fn cutoff_joins_smoothly_at_both_ends() {
    // Fourth-order contact: divided differences near the joins stay tiny.
    let d = 1e-3;
    for (a, b, end) in [(0.1, 0.3, 0.1), (0.1, 0.3, 0.3)] {
        let f = |t: f64| cutoff_zeta(t, a, b).unwrap();
        let deriv = (f(end + d) - f(end - d)) / (2.0 * d);
        assert!(deriv.abs() < 1e-5, "kink at {end}: slope {deriv}");
    }
}

#[test]
fn ramp_spans_zero_to_one() {
    assert_eq!(ramp_psi(-10.0, RampSign::Plus), 0.0);
    assert_eq!(ramp_psi(10.0, RampSign::Plus), 1.0);
    assert_eq!(ramp_psi(-10.0, RampSign::Minus), 1.0);
    assert_eq!(ramp_psi(10.0, RampSign::Minus), 0.0);
}

#[test]
fn ramp_derivatives_match_finite_differences() {
    let d = 1e-5;
    for sign in [RampSign::Plus, RampSign::Minus] {
        for i in 0..60 {
            let x = -3.0 + 6.0 * i as f64 / 59.0;
            let fd1 = (ramp_psi(x + d, sign) - ramp_psi(x - d, sign)) / (2.0 * d);
            let fd2 = (ramp_psi_d1(x + d, sign) - ramp_psi_d1(x - d, sign)) / (2.0 * d);
            assert!((fd1 - ramp_psi_d1(x, sign)).abs() < 1e-6);
            assert!((fd2 - ramp_psi_d2(x, sign)).abs() < 1e-6);
        }
    }
}

#[test]
fn radial_bump_hits_plateau_and_ambient() {
    let f = CoefficientField::radial_bump([0.0, 0.5], 0.1, 0.3, 9.0, 1.0);
    assert_eq!(f.eval(0.0, 0.5), 9.0);
    assert_eq!(f.eval(0.05, 0.55), 9.0);
    assert_eq!(f.eval(0.4, 0.5), 1.0);
    assert_eq!(f.eval(0.0, 0.0), 1.0);
}

#[test]
fn periodic_fields_wrap_the_first_coordinate() {
    let prob = example_problem(ExampleId::Example1);
    for (x1, x2) in [(0.13, 0.4), (-0.29, 0.8), (0.47, 0.1)] {
        let inside = prob.n.eval(x1, x2);
        assert!((prob.n.eval(x1 + 3.0, x2) - inside).abs() < 1e-14);
        assert!((prob.n.eval(x1 - 7.0, x2) - inside).abs() < 1e-14);
    }
}

#[test]
fn compact_supports_stay_inside_the_reference_cell() {
    for id in [ExampleId::Example1, ExampleId::Example2, ExampleId::Remark2] {
        let prob = example_problem(id);
        for field in [&prob.q, &prob.f] {
            for i in 0..40 {
                let x2 = i as f64 / 39.0;
                assert_eq!(field.eval(-0.5, x2), 0.0);
                assert_eq!(field.eval(0.5, x2), 0.0);
                assert_eq!(field.eval(1.3, x2), 0.0);
            }
        }
    }
}

#[test]
fn example_problems_have_positive_index() {
    for id in [ExampleId::Example1, ExampleId::Example2, ExampleId::Remark2] {
        example_problem(id).validate_positivity(128).unwrap();
    }
}

#[test]
fn example_wavenumbers() {
    assert!((example_problem(ExampleId::Example1).k_squared() - 17.0).abs() < 1e-12);
    assert!((example_problem(ExampleId::Example2).k_squared() - 12.0).abs() < 1e-12);
    assert!((example_problem(ExampleId::Remark2).k_squared() - 3.2).abs() < 1e-12);
}

#[test]
fn example_id_and_bc_parsing() {
    assert_eq!(ExampleId::parse("1").unwrap(), ExampleId::parse("example1").unwrap());
    assert!(ExampleId::parse("4").is_err());
    assert_eq!(Bc::parse("neumann").unwrap(), Bc::Neumann);
    assert_eq!(Bc::parse("dirichlet").unwrap(), Bc::Dirichlet);
    assert!(Bc::parse("robin").is_err());
}

proptest! {
    #[test]
    fn cutoff_stays_in_unit_interval(t in 0.0f64..1.0, a in 0.01f64..0.4, w in 0.01f64..0.5) {
        let v = cutoff_zeta(t, a, a + w).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn ramp_stays_in_unit_interval(x in -5.0f64..5.0) {
        for sign in [RampSign::Plus, RampSign::Minus] {
            let v = ramp_psi(x, sign);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn ramps_are_mirror_images(x in -5.0f64..5.0) {
        let d = ramp_psi(x, RampSign::Minus) - ramp_psi(-x, RampSign::Plus);
        prop_assert!(d.abs() < 1e-12);
    }
}
