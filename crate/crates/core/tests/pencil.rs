use lapwave_core::coeffs::{example_problem, Bc, CoefficientField, ExampleId};
use lapwave_core::linalg::{dot, norm2};
use lapwave_core::mesh::build_cell_mesh;
use lapwave_core::pencil::{
    assemble_modulated_mass, assemble_pencil, assemble_weighted_mass, norm_one, solve_cell, spmv,
    CellFactor, PencilMatrices, SpMat,
};
use num_complex::Complex64 as c64;
use proptest::prelude::*;

fn setup(h: f64, bc: Bc) -> (lapwave_core::mesh::CellMesh, lapwave_core::mesh::PeriodicBasis, PencilMatrices) {
    let (mesh, basis) = build_cell_mesh(h, bc).unwrap();
    let n = example_problem(ExampleId::Example1).n;
    let pencil = assemble_pencil(&mesh, &basis, &n).unwrap();
    (mesh, basis, pencil)
}

fn pseudorandom(m: usize, seed: u64) -> Vec<c64> {
    // Deterministic low-discrepancy fill; adequate for adjoint checks.
    (0..m)
        .map(|i| {
            let t = (i as f64 + seed as f64) * 0.7548776662466927;
            let s = (i as f64 + 2.0 * seed as f64) * 0.5698402909980532;
            c64::new(t.fract() - 0.5, s.fract() - 0.5)
        })
        .collect()
}

fn hermitian_defect(a: &SpMat, m: usize) -> f64 {
    let x = pseudorandom(m, 1);
    let y = pseudorandom(m, 2);
    let mut ax = vec![c64::new(0.0, 0.0); m];
    let mut ay = vec![c64::new(0.0, 0.0); m];
    spmv(a, &x, &mut ax);
    spmv(a, &y, &mut ay);
    (dot(&x, &ay) - dot(&ax, &y)).norm() / (norm2(&x) * norm2(&y) * norm_one(a))
}

#[test]
fn pencil_blocks_are_hermitian() {
    let (_, _, pencil) = setup(0.05, Bc::Neumann);
    let m = pencil.m_prime;
    assert!(hermitian_defect(&pencil.a1, m) < 1e-13);
    assert!(hermitian_defect(&pencil.a2, m) < 1e-13);
    assert!(hermitian_defect(&pencil.a3, m) < 1e-13);
    assert!(hermitian_defect(&pencil.a4, m) < 1e-13);
}

#[test]
fn combined_operator_is_hermitian_for_real_quasimomentum() {
    let (_, _, pencil) = setup(0.05, Bc::Neumann);
    let m = pencil.m_prime;
    for alpha in [0.0, 0.7, -2.4] {
        let a = pencil.a_alpha_k(c64::new(alpha, 0.0), 17.0);
        assert!(hermitian_defect(&a, m) < 1e-13, "alpha = {alpha}");
    }
}

#[test]
fn combined_operator_matches_its_four_terms() {
    let (_, _, pencil) = setup(0.08, Bc::Neumann);
    let m = pencil.m_prime;
    let alpha = c64::new(0.3, -0.2);
    let a = pencil.a_alpha_k(alpha, 12.0);
    let x = pseudorandom(m, 3);
    let mut got = vec![c64::new(0.0, 0.0); m];
    spmv(&a, &x, &mut got);
    let mut want = vec![c64::new(0.0, 0.0); m];
    let mut tmp = vec![c64::new(0.0, 0.0); m];
    for (mat, coef) in [
        (&pencil.a1, c64::new(1.0, 0.0)),
        (&pencil.a2, alpha),
        (&pencil.a3, alpha * alpha),
        (&pencil.a4, c64::new(12.0, 0.0)),
    ] {
        tmp.iter_mut().for_each(|v| *v = c64::new(0.0, 0.0));
        spmv(mat, &x, &mut tmp);
        for (w, t) in want.iter_mut().zip(&tmp) {
            *w += coef * t;
        }
    }
    let diff: f64 = got.iter().zip(&want).map(|(g, w)| (g - w).norm()).sum();
    assert!(diff < 1e-12 * norm2(&want));
}

#[test]
fn stiffness_annihilates_constants_under_neumann() {
    let (_, _, pencil) = setup(0.05, Bc::Neumann);
    let m = pencil.m_prime;
    let ones = vec![c64::new(1.0, 0.0); m];
    let mut out = vec![c64::new(0.0, 0.0); m];
    spmv(&pencil.a1, &ones, &mut out);
    assert!(norm2(&out) < 1e-11 * norm_one(&pencil.a1));
    out.iter_mut().for_each(|v| *v = c64::new(0.0, 0.0));
    spmv(&pencil.d1, &ones, &mut out);
    assert!(norm2(&out) < 1e-11);
}

#[test]
fn mass_entries_sum_to_the_cell_area() {
    let (_, _, pencil) = setup(0.05, Bc::Neumann);
    let m = pencil.m_prime;
    let ones = vec![c64::new(1.0, 0.0); m];
    let mut out = vec![c64::new(0.0, 0.0); m];
    spmv(&pencil.a3, &ones, &mut out);
    let total: c64 = out.iter().sum();
    assert!((total - c64::new(1.0, 0.0)).norm() < 1e-12);
}

#[test]
fn index_weighted_mass_with_unit_index_negates_the_mass() {
    let (mesh, basis) = build_cell_mesh(0.07, Bc::Neumann).unwrap();
    let one = CoefficientField::constant(1.0);
    let pencil = assemble_pencil(&mesh, &basis, &one).unwrap();
    let m = pencil.m_prime;
    let x = pseudorandom(m, 4);
    let mut m3 = vec![c64::new(0.0, 0.0); m];
    let mut m4 = vec![c64::new(0.0, 0.0); m];
    spmv(&pencil.a3, &x, &mut m3);
    spmv(&pencil.a4, &x, &mut m4);
    let diff: f64 = m3.iter().zip(&m4).map(|(a, b)| (a + b).norm()).sum();
    assert!(diff < 1e-12 * norm2(&m3));
}

#[test]
fn weighted_mass_with_unit_weight_matches_the_plain_mass() {
    let (mesh, basis, pencil) = setup(0.07, Bc::Neumann);
    let mass = assemble_weighted_mass(&mesh, &basis, &CoefficientField::constant(1.0)).unwrap();
    let m = pencil.m_prime;
    let x = pseudorandom(m, 5);
    let mut a = vec![c64::new(0.0, 0.0); m];
    let mut b = vec![c64::new(0.0, 0.0); m];
    spmv(&pencil.a3, &x, &mut a);
    spmv(&mass, &x, &mut b);
    let diff: f64 = a.iter().zip(&b).map(|(u, v)| (u - v).norm()).sum();
    assert!(diff < 1e-12 * norm2(&a));
}

#[test]
fn modulated_mass_at_zero_quasimomentum_is_the_weighted_mass() {
    let (mesh, basis) = build_cell_mesh(0.07, Bc::Neumann).unwrap();
    let q = example_problem(ExampleId::Example1).q;
    let direct = assemble_weighted_mass(&mesh, &basis, &q).unwrap();
    let modulated = assemble_modulated_mass(&mesh, &basis, &q, c64::new(0.0, 0.0)).unwrap();
    let m = basis.m_prime;
    let x = pseudorandom(m, 6);
    let mut a = vec![c64::new(0.0, 0.0); m];
    let mut b = vec![c64::new(0.0, 0.0); m];
    spmv(&direct, &x, &mut a);
    spmv(&modulated, &x, &mut b);
    let diff: f64 = a.iter().zip(&b).map(|(u, v)| (u - v).norm()).sum();
    assert!(diff < 1e-12 * norm2(&a).max(1e-300));
}

#[test]
fn factored_solve_inverts_the_operator() {
    let (_, _, pencil) = setup(0.06, Bc::Neumann);
    let m = pencil.m_prime;
    // A complex quasimomentum keeps the cell problem invertible.
    let a = pencil.a_alpha_k(c64::new(0.4, 0.3), 17.0);
    let rhs = pseudorandom(m, 7);
    let sol = solve_cell(&pencil, c64::new(0.4, 0.3), 17.0f64.sqrt(), &rhs).unwrap();
    let mut back = vec![c64::new(0.0, 0.0); m];
    spmv(&a, &sol, &mut back);
    let res: f64 = back.iter().zip(&rhs).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
    assert!(res < 1e-10 * norm2(&rhs));
}

#[test]
fn rcond_estimate_is_small_near_a_dispersion_point() {
    let (_, _, pencil) = setup(0.04, Bc::Neumann);
    // The first acceptance table puts a propagating quasimomentum near
    // 0.8965 at this mesh size; right on it the cell operator degenerates.
    let near = CellFactor::new(&pencil.a_alpha_k(c64::new(0.8964514, 0.0), 17.0)).unwrap();
    let far = CellFactor::new(&pencil.a_alpha_k(c64::new(0.4, 0.3), 17.0)).unwrap();
    assert!(near.rcond_estimate() < 1e-5 * far.rcond_estimate());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]
    #[test]
    fn operator_is_hermitian_for_random_real_quasimomenta(alpha in -3.1f64..3.1) {
        let (_, _, pencil) = setup(0.09, Bc::Neumann);
        let a = pencil.a_alpha_k(c64::new(alpha, 0.0), 17.0);
        prop_assert!(hermitian_defect(&a, pencil.m_prime) < 1e-13);
    }
}
