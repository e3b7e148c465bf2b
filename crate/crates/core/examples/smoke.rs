use lapwave_core::cci::{cci_solve_multi, discretize};
use lapwave_core::coeffs::{example_problem, CoefficientField, ExampleId};
use lapwave_core::field::{FieldOnCell, MultiCellField};
use lapwave_core::oracle::{damped_truncated_solve, lap_extrapolate};
use std::time::Instant;

fn main() {
    let prob = example_problem(ExampleId::Example1);
    let t0 = Instant::now();
    let fine = discretize(&prob, 0.005).unwrap();
    let cci = cci_solve_multi(&prob, 0.005, &[256], None, &[0]).unwrap();
    let ffield = &cci.solutions[0].1.cells[0];
    println!("fine cci done in {:.1?}", t0.elapsed());
    for (h, r) in [(0.01, 60usize)] {
        let disc = discretize(&prob, h).unwrap();
        let mass = lapwave_core::pencil::assemble_weighted_mass(
            &disc.mesh, &disc.basis, &CoefficientField::constant(1.0)).unwrap();
        let cref = FieldOnCell {
            values: disc.basis.node_of_dof.iter().map(|&v| {
                let [x1, x2] = disc.mesh.vertices[v];
                ffield.eval(&fine.mesh, &fine.basis, x1, x2)
            }).collect(),
        };
        let cref = MultiCellField { first_cell: 0, cells: vec![cref] };
        let t1 = Instant::now();
        let runs: Vec<_> = [0.64, 0.32, 0.16].iter()
            .map(|&e| damped_truncated_solve(&prob, e, r, h, 1e9).unwrap())
            .collect();
        let (ext, corr) = lap_extrapolate(&runs, &disc.mesh, &disc.basis).unwrap();
        let single = MultiCellField { first_cell: 0, cells: vec![ext] };
        let d = single.rel_l2_diff(&cref, &mass);
        println!("oracle h={h} R={r}: vs fine CCI {d:.3e} (corr {corr:.3e}, {:.1?})", t1.elapsed());
    }
}
