//! Discrete fields: nodal fields on one periodicity cell, multi-cell
//! fields, quadrature-point samplings, norms and grid transfer.

use faer::sparse::Triplet;

use crate::c64;
use crate::coeffs::CoefficientField;
use crate::mesh::{CellMesh, PeriodicBasis};
use crate::pencil::{element_geometry, spmv};
use crate::{Error, Result};

/// Nodal values of a periodic P1 field on the reference cell.
#[derive(Clone)]
pub struct FieldOnCell {
    /// One value per periodic DOF.
    pub values: Vec<c64>,
}

impl FieldOnCell {
    /// The zero field.
    pub fn zeros(m_prime: usize) -> Self {
        Self {
            values: vec![c64::new(0.0, 0.0); m_prime],
        }
    }

    /// Interpolates a nodal evaluator.
    pub fn from_fn(basis: &PeriodicBasis, mesh: &CellMesh, f: impl Fn(f64, f64) -> c64) -> Self {
        let values = basis
            .node_of_dof
            .iter()
            .map(|&v| f(mesh.vertices[v][0], mesh.vertices[v][1]))
            .collect();
        Self { values }
    }

    /// Evaluates the P1 interpolant at a point of the reference cell.
    pub fn eval(&self, mesh: &CellMesh, basis: &PeriodicBasis, x1: f64, x2: f64) -> c64 {
        let (tri, bary) = mesh.locate(x1, x2);
        let mut acc = c64::new(0.0, 0.0);
        for (b, &v) in bary.iter().zip(&mesh.triangles[tri]) {
            if let Some(d) = basis.dof_of_node[v] {
                acc += *b * self.values[d];
            }
        }
        acc
    }

    /// L² norm over the cell, via the mass matrix.
    pub fn l2_norm(&self, mass: &crate::pencil::SpMat) -> f64 {
        let mut mx = vec![c64::new(0.0, 0.0); self.values.len()];
        spmv(mass, &self.values, &mut mx);
        self.values
            .iter()
            .zip(&mx)
            .map(|(v, w)| (v.conj() * w).re)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }
}

/// A field over a finite union of shifted copies of the reference cell,
/// stored as nodal values per cell index.
#[derive(Clone)]
pub struct MultiCellField {
    /// Smallest cell index covered.
    pub first_cell: i32,
    /// Per-cell nodal restrictions, contiguous from `first_cell`.
    pub cells: Vec<FieldOnCell>,
}

impl MultiCellField {
    /// The restriction to cell `j`, if covered.
    pub fn cell(&self, j: i32) -> Option<&FieldOnCell> {
        let idx = j.checked_sub(self.first_cell)? as usize;
        self.cells.get(idx)
    }

    /// Relative L² difference against another field over the shared cells.
    pub fn rel_l2_diff(&self, other: &MultiCellField, mass: &crate::pencil::SpMat) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (off, cell) in self.cells.iter().enumerate() {
            let j = self.first_cell + off as i32;
            let Some(oc) = other.cell(j) else { continue };
            let diff = FieldOnCell {
                values: cell
                    .values
                    .iter()
                    .zip(&oc.values)
                    .map(|(a, b)| a - b)
                    .collect(),
            };
            num += diff.l2_norm(mass).powi(2);
            den += oc.l2_norm(mass).powi(2);
        }
        if den == 0.0 {
            return if num == 0.0 { 0.0 } else { f64::INFINITY };
        }
        (num / den).sqrt()
    }
}

/// Values (and first-coordinate derivatives) of a field at every quadrature
/// point of every element of the reference cell.
#[derive(Clone)]
pub struct QuadField {
    /// values[t][q] at quadrature point q of triangle t.
    pub values: Vec<[c64; 3]>,
}

impl QuadField {
    /// Samples a pointwise evaluator at the quadrature points.
    pub fn sample(mesh: &CellMesh, f: impl Fn(f64, f64) -> c64) -> Self {
        let values = (0..mesh.triangles.len())
            .map(|t| {
                let geo = element_geometry(mesh, t);
                [
                    f(geo.quad_points[0][0], geo.quad_points[0][1]),
                    f(geo.quad_points[1][0], geo.quad_points[1][1]),
                    f(geo.quad_points[2][0], geo.quad_points[2][1]),
                ]
            })
            .collect();
        Self { values }
    }

    /// Samples the values of a nodal field at the quadrature points.
    pub fn from_nodal(mesh: &CellMesh, basis: &PeriodicBasis, field: &FieldOnCell) -> Self {
        Self::sample_p1(mesh, basis, field, false)
    }

    /// Samples the x₁-derivative of a nodal field at the quadrature points.
    pub fn d1_from_nodal(mesh: &CellMesh, basis: &PeriodicBasis, field: &FieldOnCell) -> Self {
        Self::sample_p1(mesh, basis, field, true)
    }

    fn sample_p1(mesh: &CellMesh, basis: &PeriodicBasis, field: &FieldOnCell, d1: bool) -> Self {
        const SHAPE: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
        let values = (0..mesh.triangles.len())
            .map(|t| {
                let geo = element_geometry(mesh, t);
                let nodal: Vec<c64> = mesh.triangles[t]
                    .iter()
                    .map(|&v| {
                        basis.dof_of_node[v]
                            .map(|d| field.values[d])
                            .unwrap_or(c64::new(0.0, 0.0))
                    })
                    .collect();
                let mut out = [c64::new(0.0, 0.0); 3];
                for (q, slot) in out.iter_mut().enumerate() {
                    *slot = if d1 {
                        (0..3).map(|l| nodal[l] * geo.grads[l][0]).sum()
                    } else {
                        (0..3).map(|l| nodal[l] * SHAPE[q][l]).sum()
                    };
                }
                out
            })
            .collect();
        Self { values }
    }
}

/// Interpolates a fine-mesh field onto a coarser mesh of the same cell.
pub fn restrict_to_mesh(
    fine_mesh: &CellMesh,
    fine_basis: &PeriodicBasis,
    field: &FieldOnCell,
    coarse_mesh: &CellMesh,
    coarse_basis: &PeriodicBasis,
) -> FieldOnCell {
    FieldOnCell::from_fn(coarse_basis, coarse_mesh, |x1, x2| {
        field.eval(fine_mesh, fine_basis, x1, x2)
    })
}

/// Builds a perturbation q = σ·χ whose presence makes the medium support a
/// localized (trapped) state at the given wavenumber, following the
/// standard recipe: pick a compactly supported bump χ, take a trial field
/// v = χ, and choose q so that (Δ + k²(n + q))v = 0 on supp χ.
///
/// The returned field is q(x) = (−Δv/v − k²n)/k² on the set where |v| stays
/// above a relative floor, smoothly cut to zero outside; near-vanishing v
/// inside the support fails with [`Error::DivisionDegeneracy`].
pub fn construct_trapped_mode_perturbation(
    k: f64,
    n: &CoefficientField,
    center: [f64; 2],
    r_in: f64,
    r_out: f64,
) -> Result<CoefficientField> {
    if !(r_in > 0.0 && r_out > r_in) {
        return Err(Error::InvalidInterval { a: r_in, b: r_out });
    }
    let k2 = k * k;
    let eps = 1e-7;
    let lap = move |x1: f64, x2: f64, f: &dyn Fn(f64, f64) -> f64| {
        (f(x1 + eps, x2) + f(x1 - eps, x2) + f(x1, x2 + eps) + f(x1, x2 - eps)
            - 4.0 * f(x1, x2))
            / (eps * eps)
    };
    let chi = move |x1: f64, x2: f64| {
        let r = ((x1 - center[0]).powi(2) + (x2 - center[1]).powi(2)).sqrt();
        crate::coeffs::cutoff_zeta(r, r_in, r_out).unwrap_or(0.0)
    };
    // Check the divisor does not degenerate strictly inside the support.
    let threshold = 1e-6;
    let mut min_abs = f64::INFINITY;
    let samples = 64;
    for i in 0..samples {
        let r = r_out * 0.98 * (i as f64 + 0.5) / samples as f64;
        let v = crate::coeffs::cutoff_zeta(r, r_in, r_out)?;
        if v.abs() < min_abs && r < r_out * 0.9 {
            min_abs = v.abs();
        }
    }
    if min_abs < threshold {
        return Err(Error::DivisionDegeneracy {
            min: min_abs,
            threshold,
        });
    }
    let n_eval = n.clone();
    let evaluator = move |x1: f64, x2: f64| -> f64 {
        let v = chi(x1, x2);
        if v.abs() < threshold {
            return 0.0;
        }
        let l = lap(x1, x2, &chi);
        -l / (k2 * v) - n_eval.eval(x1, x2)
    };
    Ok(CoefficientField::new(
        evaluator,
        false,
        Some([
            center[0] - r_out,
            center[0] + r_out,
            center[1] - r_out,
            center[1] + r_out,
        ]),
    ))
}

/// Builds the diagonal of exp(iα·x₁(dof)) as triplets, for assembling the
/// modulation matrices of the contour reconstruction.
pub fn modulation_diag_triplets(
    basis: &PeriodicBasis,
    mesh: &CellMesh,
    alpha: c64,
) -> Vec<Triplet<usize, usize, c64>> {
    (0..basis.m_prime)
        .map(|d| {
            let x1 = basis.dof_x1(mesh, d);
            Triplet::new(d, d, (c64::i() * alpha * x1).exp())
        })
        .collect()
}
