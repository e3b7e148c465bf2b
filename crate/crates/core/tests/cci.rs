use lapwave_core::cci::{
    cci_solve, cci_solve_monolithic, classified_betas, contour_block_solve, discretize,
    validate_counts, SupportSamples,
};
use lapwave_core::coeffs::{example_problem, Bc, CoefficientField, ExampleId, ScatteringProblem};
use lapwave_core::contour::{
    build_cci_contour, reconstruct_field, TrigGrid, DEFAULT_SMOOTHING_ORDER,
};
use lapwave_core::field::construct_trapped_mode_perturbation;
use lapwave_core::pencil::{assemble_weighted_mass, CellFactor};
use lapwave_core::spectral::propagating_modes;
use lapwave_core::Error;
use num_complex::Complex64 as c64;

fn unit_mass(
    mesh: &lapwave_core::mesh::CellMesh,
    basis: &lapwave_core::mesh::PeriodicBasis,
) -> lapwave_core::pencil::SpMat {
    assemble_weighted_mass(mesh, basis, &CoefficientField::constant(1.0)).unwrap()
}

#[test]
fn schur_sweep_matches_the_monolithic_solve() {
    let prob = example_problem(ExampleId::Example1);
    let h = 0.05;
    let n_quad = 8;
    let disc = discretize(&prob, h).unwrap();
    let modes = propagating_modes(&disc.pencil, prob.k).unwrap();
    let (rightward, leftward) = classified_betas(&modes);
    let contour =
        build_cci_contour(&rightward, &leftward, 0.15, DEFAULT_SMOOTHING_ORDER).unwrap();
    let (mut schur, _) =
        contour_block_solve(&prob, &disc, &contour, &[n_quad], &[0, 1]).unwrap();
    let mono = cci_solve_monolithic(&prob, &disc, &contour, n_quad, &[0, 1]).unwrap();
    let (_, field) = schur.pop().unwrap();
    let mass = unit_mass(&disc.mesh, &disc.basis);
    let diff = field.rel_l2_diff(&mono, &mass);
    assert!(diff < 1e-10, "schur vs monolithic: {diff:.3e}");
}

#[test]
fn absent_perturbation_decouples_the_block_system() {
    // With q ≡ 0 the coupled solve must agree with plain per-node cell
    // solves pushed through the inverse transform, to solver precision.
    let prob = example_problem(ExampleId::Remark2);
    let h = 0.05;
    let n_quad = 16;
    let disc = discretize(&prob, h).unwrap();
    let modes = propagating_modes(&disc.pencil, prob.k).unwrap();
    let (rightward, leftward) = classified_betas(&modes);
    let contour =
        build_cci_contour(&rightward, &leftward, 0.15, DEFAULT_SMOOTHING_ORDER).unwrap();
    let (mut coupled, rcond) =
        contour_block_solve(&prob, &disc, &contour, &[n_quad], &[0]).unwrap();
    assert!((rcond - 1.0).abs() < 1e-15);
    let (_, coupled) = coupled.pop().unwrap();

    let grid = TrigGrid::new(n_quad).unwrap();
    let f_samples = SupportSamples::build(&disc.mesh, &disc.basis, &prob.f);
    let m = disc.basis.m_prime;
    let rows: Vec<Vec<c64>> = grid
        .nodes()
        .map(|t| {
            let s = contour.eval(t);
            let sp = contour.deriv(t);
            let a = disc.pencil.a_alpha_k(s, prob.k_squared());
            let load: Vec<c64> = f_samples
                .modulated_load(s, m)
                .iter()
                .map(|v| v * sp)
                .collect();
            CellFactor::new(&a).unwrap().solve_vec(&load)
        })
        .collect();
    let direct =
        reconstruct_field(&rows, &contour, &grid, &disc.mesh, &disc.basis, 0).unwrap();
    let direct = lapwave_core::field::MultiCellField {
        first_cell: 0,
        cells: vec![direct],
    };
    let mass = unit_mass(&disc.mesh, &disc.basis);
    let diff = coupled.rel_l2_diff(&direct, &mass);
    assert!(diff < 1e-12, "decoupling defect: {diff:.3e}");
}

#[test]
fn contour_deformation_is_invariant_when_no_mode_propagates() {
    // k = 1, n ≡ 1 under Dirichlet walls has no propagating modes, so the
    // transform integrand is analytic near the real axis and any admissible
    // deformation yields the same field.
    let prob = ScatteringProblem {
        k: 1.0,
        n: CoefficientField::constant(1.0),
        q: CoefficientField::zero(),
        f: example_problem(ExampleId::Example1).f,
        bc: Bc::Dirichlet,
    };
    let disc = discretize(&prob, 0.04).unwrap();
    let modes = propagating_modes(&disc.pencil, prob.k).unwrap();
    assert!(modes.rightward.is_empty() && modes.leftward.is_empty());
    let flat = build_cci_contour(&[], &[], 0.1, DEFAULT_SMOOTHING_ORDER).unwrap();
    let bent = build_cci_contour(&[0.9], &[-0.9], 0.2, DEFAULT_SMOOTHING_ORDER).unwrap();
    let (mut a, _) = contour_block_solve(&prob, &disc, &flat, &[256], &[0]).unwrap();
    let (mut b, _) = contour_block_solve(&prob, &disc, &bent, &[256], &[0]).unwrap();
    let (_, fa) = a.pop().unwrap();
    let (_, fb) = b.pop().unwrap();
    let mass = unit_mass(&disc.mesh, &disc.basis);
    let diff = fa.rel_l2_diff(&fb, &mass);
    // The defect decays super-algebraically: 5.8e-3 at N=64, 5.9e-6 at
    // N=128, 3.7e-11 at N=256.
    assert!(diff < 1e-9, "deformation defect: {diff:.3e}");
}

#[test]
fn indentation_radius_does_not_affect_the_field() {
    let prob = example_problem(ExampleId::Example1);
    let (fa, _) = cci_solve(&prob, 0.04, 256, Some(0.10), &[0]).unwrap();
    let (fb, _) = cci_solve(&prob, 0.04, 256, Some(0.15), &[0]).unwrap();
    let disc = discretize(&prob, 0.04).unwrap();
    let mass = unit_mass(&disc.mesh, &disc.basis);
    let diff = fa.rel_l2_diff(&fb, &mass);
    // Measured 1.2e-3 at N=128 and 5.2e-7 at N=256: both runs converge
    // to the same limit once the sharper arc is resolved.
    assert!(diff < 5e-6, "radius sensitivity: {diff:.3e}");
}

#[test]
fn zero_source_gives_the_zero_field() {
    let mut prob = example_problem(ExampleId::Example1);
    prob.f = CoefficientField::zero();
    let (field, _) = cci_solve(&prob, 0.05, 16, None, &[0]).unwrap();
    let disc = discretize(&prob, 0.05).unwrap();
    let mass = unit_mass(&disc.mesh, &disc.basis);
    for cell in &field.cells {
        assert!(cell.l2_norm(&mass) < 1e-14);
    }
}

#[test]
fn manufactured_trapped_mode_is_detected() {
    // A compactly supported eigenfunction at k² = 3.2 makes the coupled
    // block near-singular; the unperturbed problem solves cleanly.
    let base = example_problem(ExampleId::Remark2);
    assert!(cci_solve(&base, 0.04, 32, None, &[0]).is_ok());
    let q =
        construct_trapped_mode_perturbation(base.k, &base.n, [0.0, 0.5], 0.1, 0.3).unwrap();
    let mut prob = example_problem(ExampleId::Remark2);
    prob.q = q;
    // The conditioning estimate collapses by at least five orders; at the
    // coarsest meshes it may sit just above the hard error threshold, so
    // accept either the raised error or a collapsed estimate.
    match cci_solve(&prob, 0.02, 32, None, &[0]) {
        Err(Error::TrappedMode { rcond }) => assert!(rcond < 1e-6),
        Ok((_, run)) => panic!("no trapped-mode error; rcond {:.3e}", run.schur_rcond),
        Err(e) => panic!("unexpected error: {e}"),
    }
}

#[test]
fn trapped_mode_construction_validates_its_inputs() {
    let base = example_problem(ExampleId::Remark2);
    assert!(construct_trapped_mode_perturbation(base.k, &base.n, [0.0, 0.5], 0.3, 0.1).is_err());
    assert!(construct_trapped_mode_perturbation(base.k, &base.n, [0.0, 0.5], -0.1, 0.3).is_err());
}

#[test]
fn quadrature_counts_must_nest() {
    assert!(validate_counts(&[]).is_err());
    assert!(validate_counts(&[16, 24]).is_err());
    assert!(validate_counts(&[7]).is_err());
    let sorted = validate_counts(&[64, 16, 32]).unwrap();
    assert_eq!(sorted, vec![16, 32, 64]);
}

#[test]
fn nested_counts_reproduce_individual_runs() {
    // One multi-count sweep must give bitwise-equal fields to separate
    // single-count solves (shared factorizations, same arithmetic path).
    let prob = example_problem(ExampleId::Example1);
    let run = lapwave_core::cci::cci_solve_multi(&prob, 0.05, &[16, 32], Some(0.15), &[0]).unwrap();
    let (single, _) = cci_solve(&prob, 0.05, 16, Some(0.15), &[0]).unwrap();
    let disc = discretize(&prob, 0.05).unwrap();
    let mass = unit_mass(&disc.mesh, &disc.basis);
    let nested16 = &run.solutions[0].1;
    let diff = nested16.rel_l2_diff(&single, &mass);
    assert!(diff < 1e-12, "nesting defect: {diff:.3e}");
}
