//! Assembly of the periodic P1 finite element operator pencil and the
//! modulated mass/load terms, plus the factorized cell solver.
//!
//! The quasi-periodic cell problem in weak form splits by powers of the
//! quasimomentum α and of k² into four sparse matrices over the periodic
//! DOFs:
//!
//! * `a1` — stiffness ∫ ∇v·∇ψ̄,
//! * `a2` — −i ∫ (∂₁v ψ̄ − v ∂₁ψ̄) (Hermitian, i times a real skew matrix),
//! * `a3` — mass ∫ v ψ̄,
//! * `a4` — −∫ n v ψ̄,
//!
//! so that A(α,k) = a1 + α·a2 + α²·a3 + k²·a4. A first-derivative matrix
//! d1 = ∫ ∂₁v ψ̄ is kept alongside for the propagating-mode eigenproblem.
//!
//! All coefficient integrals use the 3-point edge-midpoint Gauss rule
//! (exact through degree 2); modulating exponentials are sampled at the
//! quadrature points.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::c64;
use crate::coeffs::CoefficientField;
use crate::mesh::{CellMesh, PeriodicBasis};
use crate::{Error, Result};

/// Sparse complex matrix over periodic DOFs.
pub type SpMat = SparseColMat<usize, c64>;

/// Barycentric shape values at the three edge-midpoint quadrature points.
/// Row = quadrature point, column = local vertex.
pub const MIDPOINT_SHAPE: [[f64; 3]; 3] = [
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
];

/// Degree-5 seven-point triangle rule as (barycentric coords, weight);
/// weights sum to one. Used for integrals against non-polynomial
/// coefficients, where the edge-midpoint rule is too coarse.
pub const DEGREE5_RULE: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.470_142_064_105_115;
    const A2: f64 = 0.101_286_507_323_456;
    const W1: f64 = 0.132_394_152_788_506;
    const W2: f64 = 0.125_939_180_544_827;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, A1, 1.0 - 2.0 * A1], W1),
        ([A1, 1.0 - 2.0 * A1, A1], W1),
        ([1.0 - 2.0 * A1, A1, A1], W1),
        ([A2, A2, 1.0 - 2.0 * A2], W2),
        ([A2, 1.0 - 2.0 * A2, A2], W2),
        ([1.0 - 2.0 * A2, A2, A2], W2),
    ]
};

/// Geometry of one element: area, quadrature points, constant P1 gradients.
pub struct ElementGeometry {
    /// Signed area magnitude.
    pub area: f64,
    /// The three quadrature points (edge midpoints).
    pub quad_points: [[f64; 2]; 3],
    /// Gradient of each local shape function.
    pub grads: [[f64; 2]; 3],
}

/// Computes the geometry of triangle `t`.
pub fn element_geometry(mesh: &CellMesh, t: usize) -> ElementGeometry {
    let [a, b, c] = mesh.triangles[t];
    let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
    let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
    let area = 0.5 * det.abs();
    let inv = 1.0 / det;
    // ∇λ_a = (y_b − y_c, x_c − x_b)/det, cyclic in (a, b, c).
    let grads = [
        [(pb[1] - pc[1]) * inv, (pc[0] - pb[0]) * inv],
        [(pc[1] - pa[1]) * inv, (pa[0] - pc[0]) * inv],
        [(pa[1] - pb[1]) * inv, (pb[0] - pa[0]) * inv],
    ];
    let mid = |p: [f64; 2], q: [f64; 2]| [(p[0] + q[0]) * 0.5, (p[1] + q[1]) * 0.5];
    ElementGeometry {
        area,
        quad_points: [mid(pa, pb), mid(pb, pc), mid(pc, pa)],
        grads,
    }
}

/// The four pencil matrices plus the first-derivative matrix.
pub struct PencilMatrices {
    /// Stiffness.
    pub a1: SpMat,
    /// Hermitian first-order term.
    pub a2: SpMat,
    /// Mass.
    pub a3: SpMat,
    /// Negative n-weighted mass.
    pub a4: SpMat,
    /// One-sided first derivative ∫ ∂₁v ψ̄.
    pub d1: SpMat,
    /// Number of periodic DOFs.
    pub m_prime: usize,
}

fn build_from_entries(m: usize, entries: &[Triplet<usize, usize, c64>]) -> Result<SpMat> {
    SparseColMat::try_new_from_triplets(m, m, entries)
        .map_err(|e| Error::Linalg(format!("sparse assembly failed: {e:?}")))
}

/// Assembles the operator pencil for the given periodic index n.
pub fn assemble_pencil(
    mesh: &CellMesh,
    basis: &PeriodicBasis,
    n: &CoefficientField,
) -> Result<PencilMatrices> {
    let m = basis.m_prime;
    let cap = 9 * mesh.triangles.len();
    let mut t1 = Vec::with_capacity(cap);
    let mut t2 = Vec::with_capacity(cap);
    let mut t3 = Vec::with_capacity(cap);
    let mut t4 = Vec::with_capacity(cap);
    let mut td = Vec::with_capacity(cap);
    for t in 0..mesh.triangles.len() {
        let geo = element_geometry(mesh, t);
        let w = geo.area / 3.0;
        let nodes = mesh.triangles[t];
        let dofs: Vec<Option<usize>> = nodes.iter().map(|&v| basis.dof_of_node[v]).collect();
        for (lc, &dc) in dofs.iter().enumerate() {
            let Some(col) = dc else { continue };
            for (lr, &dr) in dofs.iter().enumerate() {
                let Some(row) = dr else { continue };
                let stiff: f64 = geo.area
                    * (geo.grads[lc][0] * geo.grads[lr][0] + geo.grads[lc][1] * geo.grads[lr][1]);
                let mut mass = 0.0;
                let mut deriv = 0.0;
                for shape in MIDPOINT_SHAPE.iter() {
                    mass += w * shape[lc] * shape[lr];
                    deriv += w * geo.grads[lc][0] * shape[lr];
                }
                let mut nmass = 0.0;
                for (bary, bw) in DEGREE5_RULE.iter() {
                    let mut x1 = 0.0;
                    let mut x2 = 0.0;
                    for (b, &v) in bary.iter().zip(nodes.iter()) {
                        x1 += b * mesh.vertices[v][0];
                        x2 += b * mesh.vertices[v][1];
                    }
                    nmass += geo.area * bw * n.eval(x1, x2) * bary[lc] * bary[lr];
                }
                t1.push(Triplet::new(row, col, c64::new(stiff, 0.0)));
                t3.push(Triplet::new(row, col, c64::new(mass, 0.0)));
                t4.push(Triplet::new(row, col, c64::new(-nmass, 0.0)));
                td.push(Triplet::new(row, col, c64::new(deriv, 0.0)));
                t2.push(Triplet::new(row, col, c64::new(0.0, 0.0)));
            }
        }
    }
    // a2 = −i (d1 − d1ᵀ); accumulate both halves through the triplet sum so
    // all five matrices share one symbolic layout.
    for tr in &td {
        t2.push(Triplet::new(tr.row, tr.col, c64::new(0.0, -tr.val.re)));
    }
    for tr in &td {
        t2.push(Triplet::new(tr.col, tr.row, c64::new(0.0, tr.val.re)));
    }
    // Pad the other matrices with the transposed positions so the symbolic
    // structures stay identical.
    let pad: Vec<Triplet<usize, usize, c64>> = td
        .iter()
        .map(|tr| Triplet::new(tr.col, tr.row, c64::new(0.0, 0.0)))
        .collect();
    let with_pad = |mut base: Vec<Triplet<usize, usize, c64>>| {
        base.extend(pad.iter().cloned());
        base
    };
    let a1 = build_from_entries(m, &with_pad(t1))?;
    let a3 = build_from_entries(m, &with_pad(t3))?;
    let a4 = build_from_entries(m, &with_pad(t4))?;
    let d1 = build_from_entries(m, &with_pad(td))?;
    let a2 = build_from_entries(m, &t2)?;
    Ok(PencilMatrices {
        a1,
        a2,
        a3,
        a4,
        d1,
        m_prime: m,
    })
}

impl PencilMatrices {
    /// Evaluates A(α,k) = a1 + α·a2 + α²·a3 + k²·a4 by combining the
    /// aligned value arrays (all matrices share one symbolic layout).
    pub fn a_alpha_k(&self, alpha: c64, k_squared: f64) -> SpMat {
        let a2c = alpha;
        let a3c = alpha * alpha;
        let a4c = c64::new(k_squared, 0.0);
        let (v1, v2, v3, v4) = (self.a1.val(), self.a2.val(), self.a3.val(), self.a4.val());
        let vals: Vec<c64> = (0..v1.len())
            .map(|i| v1[i] + a2c * v2[i] + a3c * v3[i] + a4c * v4[i])
            .collect();
        SparseColMat::new(self.a1.symbolic().to_owned().unwrap(), vals)
    }
}

/// Assembles the w-weighted mass matrix ∫ w ζ_c ζ̄_r.
pub fn assemble_weighted_mass(
    mesh: &CellMesh,
    basis: &PeriodicBasis,
    w_field: &CoefficientField,
) -> Result<SpMat> {
    let m = basis.m_prime;
    let mut entries = Vec::new();
    for t in 0..mesh.triangles.len() {
        let geo = element_geometry(mesh, t);
        let w = geo.area / 3.0;
        let nodes = mesh.triangles[t];
        for (lc, &vc) in nodes.iter().enumerate() {
            let Some(col) = basis.dof_of_node[vc] else {
                continue;
            };
            for (lr, &vr) in nodes.iter().enumerate() {
                let Some(row) = basis.dof_of_node[vr] else {
                    continue;
                };
                let mut acc = 0.0;
                for (qp, shape) in MIDPOINT_SHAPE.iter().enumerate() {
                    let [x1, x2] = geo.quad_points[qp];
                    acc += w * w_field.eval(x1, x2) * shape[lc] * shape[lr];
                }
                if acc != 0.0 {
                    entries.push(Triplet::new(row, col, c64::new(acc, 0.0)));
                }
            }
        }
    }
    if entries.is_empty() {
        entries.push(Triplet::new(0, 0, c64::new(0.0, 0.0)));
    }
    build_from_entries(m, &entries)
}

/// Assembles the α-modulated w-weighted mass ∫ e^{−iαx₁} w ζ_c ζ_r.
///
/// This realizes the perturbation coupling of the contour methods; rows and
/// columns vanish for DOFs whose basis support misses supp w.
pub fn assemble_modulated_mass(
    mesh: &CellMesh,
    basis: &PeriodicBasis,
    w_field: &CoefficientField,
    alpha: c64,
) -> Result<SpMat> {
    let m = basis.m_prime;
    let mut entries = Vec::new();
    for t in 0..mesh.triangles.len() {
        let geo = element_geometry(mesh, t);
        let w = geo.area / 3.0;
        let nodes = mesh.triangles[t];
        for (lc, &vc) in nodes.iter().enumerate() {
            let Some(col) = basis.dof_of_node[vc] else {
                continue;
            };
            for (lr, &vr) in nodes.iter().enumerate() {
                let Some(row) = basis.dof_of_node[vr] else {
                    continue;
                };
                let mut acc = c64::new(0.0, 0.0);
                for (qp, shape) in MIDPOINT_SHAPE.iter().enumerate() {
                    let [x1, x2] = geo.quad_points[qp];
                    let wv = w_field.eval(x1, x2);
                    if wv != 0.0 {
                        let phase = (-c64::i() * alpha * x1).exp();
                        acc += phase * (w * wv * shape[lc] * shape[lr]);
                    }
                }
                if acc != c64::new(0.0, 0.0) {
                    entries.push(Triplet::new(row, col, acc));
                }
            }
        }
    }
    if entries.is_empty() {
        entries.push(Triplet::new(0, 0, c64::new(0.0, 0.0)));
    }
    build_from_entries(m, &entries)
}

/// Assembles the modulated load −∫ e^{−iα(x₁+c)} g(x + c·e₁) ζ̄ dx from a
/// quadrature-point evaluator; `g` receives (triangle, quad point, shifted
/// global coordinates).
pub fn modulated_load_with(
    mesh: &CellMesh,
    basis: &PeriodicBasis,
    alpha: c64,
    cell_shift: i32,
    g: impl Fn(usize, usize, [f64; 2]) -> c64,
) -> Vec<c64> {
    let shift = cell_shift as f64;
    let mut load = vec![c64::new(0.0, 0.0); basis.m_prime];
    for t in 0..mesh.triangles.len() {
        let geo = element_geometry(mesh, t);
        let w = geo.area / 3.0;
        let nodes = mesh.triangles[t];
        for (qp, shape) in MIDPOINT_SHAPE.iter().enumerate() {
            let [x1, x2] = geo.quad_points[qp];
            let gx = g(t, qp, [x1 + shift, x2]);
            if gx == c64::new(0.0, 0.0) {
                continue;
            }
            let phase = (-c64::i() * alpha * (x1 + shift)).exp();
            let common = -phase * gx * w;
            for (lr, &vr) in nodes.iter().enumerate() {
                if let Some(row) = basis.dof_of_node[vr] {
                    load[row] += common * shape[lr];
                }
            }
        }
    }
    load
}

/// Assembles the modulated load of a coefficient field supported in cell
/// `cell_shift`, checking that the support box stays inside that cell.
pub fn assemble_modulated_load(
    mesh: &CellMesh,
    basis: &PeriodicBasis,
    g: &CoefficientField,
    alpha: c64,
    cell_shift: i32,
) -> Result<Vec<c64>> {
    if let Some([a, b, _, _]) = g.support_box {
        let lo = cell_shift as f64 - 0.5 - 1e-12;
        let hi = cell_shift as f64 + 0.5 + 1e-12;
        if a < lo || b > hi {
            return Err(Error::SupportLeak { cell: cell_shift });
        }
    }
    Ok(modulated_load_with(mesh, basis, alpha, cell_shift, |_, _, x| {
        c64::new(g.eval(x[0], x[1]), 0.0)
    }))
}

/// Sparse matrix-vector product y = M x.
pub fn spmv(m: &SpMat, x: &[c64], y: &mut [c64]) {
    y.fill(c64::new(0.0, 0.0));
    let col_ptr = m.col_ptr();
    let row_idx = m.row_idx();
    let val = m.val();
    for j in 0..x.len() {
        let xj = x[j];
        if xj == c64::new(0.0, 0.0) {
            continue;
        }
        for p in col_ptr[j]..col_ptr[j + 1] {
            y[row_idx[p]] += val[p] * xj;
        }
    }
}

/// Maximum absolute column sum (operator 1-norm).
pub fn norm_one(m: &SpMat) -> f64 {
    let col_ptr = m.col_ptr();
    let val = m.val();
    (0..col_ptr.len() - 1)
        .map(|j| (col_ptr[j]..col_ptr[j + 1]).map(|p| val[p].norm()).sum())
        .fold(0.0, f64::max)
}

/// Sparse LU factorization of one cell matrix A(α,k) with a cheap
/// reciprocal-condition estimate.
pub struct CellFactor {
    lu: faer::sparse::linalg::solvers::Lu<usize, c64>,
    /// 1-norm of the factored matrix.
    pub norm_one: f64,
    dim: usize,
}

/// Threshold below which the cell system counts as singular. Contour nodes
/// keep a distance of at least δ/2 from exceptional values, so a hit here
/// indicates a configuration bug (or a deliberately singular probe).
pub const RCOND_THRESHOLD: f64 = 1e-12;

impl CellFactor {
    /// Factors the matrix; fails if it is structurally singular.
    pub fn new(matrix: &SpMat) -> Result<Self> {
        let dim = matrix.nrows();
        let lu = matrix
            .sp_lu()
            .map_err(|e| Error::Linalg(format!("sparse LU failed: {e:?}")))?;
        Ok(Self {
            lu,
            norm_one: norm_one(matrix),
            dim,
        })
    }

    /// Solves A X = B in place of a fresh matrix.
    pub fn solve_mat(&self, rhs: &Mat<c64>) -> Mat<c64> {
        self.lu.solve(rhs)
    }

    /// Solves A x = b for a single right-hand side.
    pub fn solve_vec(&self, rhs: &[c64]) -> Vec<c64> {
        let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Estimates 1/cond₁(A) by two rounds of inverse power iteration on AᴴA.
    pub fn rcond_estimate(&self) -> f64 {
        let n = self.dim;
        let mut x: Vec<c64> = (0..n)
            .map(|i| {
                // Deterministic pseudo-random start vector.
                let s = (i as f64 * 12.9898).sin() * 43758.5453;
                c64::new(s - s.floor() - 0.5, (s * 1.7).sin())
            })
            .collect();
        let mut sigma_inv = 0.0;
        for _ in 0..2 {
            let norm: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            for v in &mut x {
                *v /= norm;
            }
            // y = A⁻¹ x, z = A⁻ᴴ y realize one step on (AᴴA)⁻¹.
            let y = self.solve_vec(&x);
            let yc = Mat::from_fn(n, 1, |i, _| y[i].conj());
            let zc = self.lu.solve_transpose(&yc);
            x = (0..n).map(|i| zc[(i, 0)].conj()).collect();
            sigma_inv = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt().sqrt();
        }
        1.0 / (sigma_inv.max(1e-300) * self.norm_one)
    }
}

/// Factors and solves one cell system, rejecting near-singular matrices.
pub fn solve_cell(
    pencil: &PencilMatrices,
    alpha: c64,
    k: f64,
    rhs: &[c64],
) -> Result<Vec<c64>> {
    let a = pencil.a_alpha_k(alpha, k * k);
    let factor = CellFactor::new(&a)?;
    let rcond = factor.rcond_estimate();
    if rcond < RCOND_THRESHOLD {
        return Err(Error::SingularCellProblem {
            re: alpha.re,
            im: alpha.im,
            rcond,
        });
    }
    Ok(factor.solve_vec(rhs))
}
