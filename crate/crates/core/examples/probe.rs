use lapwave_core::cci::discretize;
use lapwave_core::coeffs::{example_problem, CoefficientField, ExampleId};
use lapwave_core::decomp::decomp_solve;
use lapwave_core::pencil::assemble_weighted_mass;

fn main() {
    let prob = example_problem(ExampleId::Example1);
    for h in [0.04f64, 0.02] {
        let disc = discretize(&prob, h).unwrap();
        let mass = assemble_weighted_mass(&disc.mesh, &disc.basis, &CoefficientField::constant(1.0)).unwrap();
        let (a, _) = decomp_solve(&prob, h, 128, Some(0.15), &[0]).unwrap();
        let (b, _) = decomp_solve(&prob, h, 128, Some(0.25), &[0]).unwrap();
        println!("sigma h={h}: {:.3e}", a.field.rel_l2_diff(&b.field, &mass));
    }
}
