//! Reference oracles: a damped truncated-strip solver whose ε→0 Richardson
//! extrapolation approximates the physical (limiting-absorption) solution,
//! and closed-form constant-coefficient propagating modes.

use std::f64::consts::PI;

use faer::sparse::{SparseColMat, Triplet};

use crate::c64;
use crate::coeffs::{Bc, ScatteringProblem};
use crate::field::FieldOnCell;
use crate::linalg::richardson_table;
use crate::mesh::{CellMesh, PeriodicBasis};
use crate::pencil::CellFactor;
use crate::{Error, Result};

/// One damped solve on the truncated strip (−R, R) × (0, 1).
pub struct TruncatedRun {
    /// Damping added to k².
    pub epsilon: f64,
    /// Half-length in cells.
    pub r: usize,
    /// Mesh size.
    pub h: f64,
    /// Full nodal solution, row-major over (i, j) strip nodes.
    values: Vec<c64>,
    nx: usize,
    ny: usize,
}

impl TruncatedRun {
    /// The solution value at strip node (i, j).
    fn at(&self, i: usize, j: usize) -> c64 {
        self.values[i * (self.ny + 1) + j]
    }

    /// Restriction of the solution to the periodic-cell DOFs of cell `c`.
    pub fn restrict_to_cell(
        &self,
        mesh: &CellMesh,
        basis: &PeriodicBasis,
        cell: i32,
    ) -> Result<FieldOnCell> {
        let values = basis
            .node_of_dof
            .iter()
            .map(|&v| {
                let [x1, x2] = mesh.vertices[v];
                self.interpolate(x1 + cell as f64, x2)
            })
            .collect();
        Ok(FieldOnCell { values })
    }

    /// P1 interpolation of the strip solution at a global point; zero
    /// outside the truncation.
    pub fn interpolate(&self, gx1: f64, x2: f64) -> c64 {
        let sx = (gx1 + self.r as f64) / self.h;
        if sx < 0.0 || sx > self.nx as f64 {
            return c64::new(0.0, 0.0);
        }
        let sy = (x2 * self.ny as f64).clamp(0.0, self.ny as f64 - 1e-12);
        let fx = sx.min(self.nx as f64 - 1e-12);
        let (i, j) = (fx.floor() as usize, sy.floor() as usize);
        let (s, t) = (fx - i as f64, sy - j as f64);
        // Same diagonal split as the assembly: lower triangle when t ≤ s.
        if t <= s {
            self.at(i, j) * (1.0 - s) + self.at(i + 1, j) * (s - t) + self.at(i + 1, j + 1) * t
        } else {
            self.at(i, j) * (1.0 - t) + self.at(i + 1, j + 1) * s + self.at(i, j + 1) * (t - s)
        }
    }

    /// Discrete L² norm of the solution over the unit window centered at
    /// cell `c` (nodal sum scaled by h²).
    pub fn window_norm(&self, cell: i32) -> f64 {
        let n = (1.0 / self.h).round() as usize;
        let i0 = ((cell + self.r as i32) as usize * n).saturating_sub(n / 2);
        let i1 = (i0 + n).min(self.nx);
        let mut acc = 0.0;
        for i in i0..=i1 {
            for j in 0..=self.ny {
                acc += self.at(i, j).norm_sqr();
            }
        }
        (acc * self.h * self.h).sqrt()
    }
}

/// Solves the damped problem Δu + (k²+iε)(n+q)u = f on the truncated strip
/// with homogeneous Dirichlet ends at x₁ = ±R; `decay_tol` bounds the
/// admissible relative solution size near the truncation, guarding R.
pub fn damped_truncated_solve(
    prob: &ScatteringProblem,
    epsilon: f64,
    r: usize,
    h: f64,
    decay_tol: f64,
) -> Result<TruncatedRun> {
    if epsilon <= 0.0 || r < 5 {
        return Err(Error::Config(format!(
            "damped solve needs epsilon > 0 and R ≥ 5, got {epsilon}, {r}"
        )));
    }
    let n = (1.0 / h).round().max(2.0) as usize;
    let nx = 2 * r * n;
    let ny = n;
    let np = ny + 1;
    let node = |i: usize, j: usize| i * np + j;
    let n_nodes = (nx + 1) * np;
    let x_of = |i: usize| -(r as f64) + i as f64 / n as f64;
    let y_of = |j: usize| j as f64 / n as f64;
    let is_dof = |i: usize, j: usize| {
        i > 0 && i < nx && (prob.bc == Bc::Neumann || (j > 0 && j < ny))
    };
    let mut dof_of = vec![usize::MAX; n_nodes];
    let mut count = 0;
    for i in 0..=nx {
        for j in 0..=ny {
            if is_dof(i, j) {
                dof_of[node(i, j)] = count;
                count += 1;
            }
        }
    }
    let kc = c64::new(prob.k_squared(), epsilon);
    let mut trips: Vec<Triplet<usize, usize, c64>> = Vec::with_capacity(18 * nx * ny);
    let mut rhs = vec![c64::new(0.0, 0.0); count];
    for si in 0..nx {
        for sj in 0..ny {
            let corners = [
                node(si, sj),
                node(si + 1, sj),
                node(si + 1, sj + 1),
                node(si, sj + 1),
            ];
            let pts = [
                [x_of(si), y_of(sj)],
                [x_of(si + 1), y_of(sj)],
                [x_of(si + 1), y_of(sj + 1)],
                [x_of(si), y_of(sj + 1)],
            ];
            // Two CCW triangles per square, same split as the cell mesh.
            for tri in [[0usize, 1, 2], [0, 2, 3]] {
                let det = (pts[tri[1]][0] - pts[tri[0]][0]) * (pts[tri[2]][1] - pts[tri[0]][1])
                    - (pts[tri[2]][0] - pts[tri[0]][0]) * (pts[tri[1]][1] - pts[tri[0]][1]);
                let area = 0.5 * det.abs();
                let grads = [
                    [
                        (pts[tri[1]][1] - pts[tri[2]][1]) / det,
                        (pts[tri[2]][0] - pts[tri[1]][0]) / det,
                    ],
                    [
                        (pts[tri[2]][1] - pts[tri[0]][1]) / det,
                        (pts[tri[0]][0] - pts[tri[2]][0]) / det,
                    ],
                    [
                        (pts[tri[0]][1] - pts[tri[1]][1]) / det,
                        (pts[tri[1]][0] - pts[tri[0]][0]) / det,
                    ],
                ];
                let mids = [
                    [
                        (pts[tri[0]][0] + pts[tri[1]][0]) * 0.5,
                        (pts[tri[0]][1] + pts[tri[1]][1]) * 0.5,
                    ],
                    [
                        (pts[tri[1]][0] + pts[tri[2]][0]) * 0.5,
                        (pts[tri[1]][1] + pts[tri[2]][1]) * 0.5,
                    ],
                    [
                        (pts[tri[2]][0] + pts[tri[0]][0]) * 0.5,
                        (pts[tri[2]][1] + pts[tri[0]][1]) * 0.5,
                    ],
                ];
                const SHAPE: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
                let w = area / 3.0;
                for lr in 0..3 {
                    let dr = dof_of[corners[tri[lr]]];
                    if dr == usize::MAX {
                        continue;
                    }
                    for lc in 0..3 {
                        let dc = dof_of[corners[tri[lc]]];
                        if dc == usize::MAX {
                            continue;
                        }
                        let stiff = area
                            * (grads[lc][0] * grads[lr][0] + grads[lc][1] * grads[lr][1]);
                        let mut coeff_mass = 0.0;
                        for q in 0..3 {
                            let [x1, x2] = mids[q];
                            coeff_mass += w
                                * (prob.n.eval(x1, x2) + prob.q.eval(x1, x2))
                                * SHAPE[q][lc]
                                * SHAPE[q][lr];
                        }
                        trips.push(Triplet::new(
                            dr,
                            dc,
                            c64::new(stiff, 0.0) - kc * coeff_mass,
                        ));
                    }
                    let mut load = c64::new(0.0, 0.0);
                    for q in 0..3 {
                        let [x1, x2] = mids[q];
                        load += c64::new(-w * prob.f.eval(x1, x2) * SHAPE[q][lr], 0.0);
                    }
                    rhs[dr] += load;
                }
            }
        }
    }
    let mat = SparseColMat::<usize, c64>::try_new_from_triplets(count, count, &trips)
        .map_err(|e| Error::Linalg(format!("truncated-strip assembly failed: {e:?}")))?;
    let factor = CellFactor::new(&mat)?;
    let sol = factor.solve_vec(&rhs);
    let mut values = vec![c64::new(0.0, 0.0); n_nodes];
    for i in 0..=nx {
        for j in 0..=ny {
            let d = dof_of[node(i, j)];
            if d != usize::MAX {
                values[node(i, j)] = sol[d];
            }
        }
    }
    let run = TruncatedRun {
        epsilon,
        r,
        h,
        values,
        nx,
        ny,
    };
    let center = run.window_norm(0).max(1e-300);
    let boundary = run.window_norm(r as i32 - 1).max(run.window_norm(1 - r as i32));
    if boundary / center > decay_tol {
        return Err(Error::EnlargeR {
            boundary: boundary / center,
            tol: decay_tol,
        });
    }
    Ok(run)
}

/// Pointwise Richardson extrapolation of runs with halving ε on the
/// reference-cell DOFs; returns the extrapolated field and the relative
/// size of the last correction.
pub fn lap_extrapolate(
    runs: &[TruncatedRun],
    mesh: &CellMesh,
    basis: &PeriodicBasis,
) -> Result<(FieldOnCell, f64)> {
    if runs.len() < 3 {
        return Err(Error::Config(
            "extrapolation needs at least three damped runs".into(),
        ));
    }
    for w in runs.windows(2) {
        let ratio = w[0].epsilon / w[1].epsilon;
        if !(1.9..=2.1).contains(&ratio) {
            return Err(Error::Config(
                "damped runs must halve epsilon between consecutive entries".into(),
            ));
        }
    }
    let fields: Vec<FieldOnCell> = runs
        .iter()
        .map(|r| r.restrict_to_cell(mesh, basis, 0))
        .collect::<Result<_>>()?;
    let m = basis.m_prime;
    // Cauchy check on the raw sequence before extrapolating.
    let diff_norm = |a: &FieldOnCell, b: &FieldOnCell| -> f64 {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let first = diff_norm(&fields[0], &fields[1]);
    let last = diff_norm(&fields[fields.len() - 2], &fields[fields.len() - 1]);
    if last > first && first > 0.0 {
        return Err(Error::NoConvergence { correction: last });
    }
    let mut out = FieldOnCell::zeros(m);
    let mut correction = 0.0f64;
    let mut norm = 0.0f64;
    for j in 0..m {
        let seq: Vec<c64> = fields.iter().map(|f| f.values[j]).collect();
        let table = richardson_table(&seq);
        let row = table.last().unwrap();
        let best = *row.last().unwrap();
        let prev = row[row.len() - 2];
        out.values[j] = best;
        correction += (best - prev).norm_sqr();
        norm += best.norm_sqr();
    }
    Ok((out, (correction / norm.max(1e-300)).sqrt()))
}

/// A closed-form propagating mode of the constant-index strip.
pub struct AnalyticMode {
    /// Transverse index.
    pub m: usize,
    /// Longitudinal wavenumber √(k²n₀ − m²π²) before wrapping.
    pub beta_unwrapped: f64,
    /// Quasimomentum wrapped into (−π, π].
    pub beta: f64,
    /// Transport indicator β_unwrapped/(k·n₀).
    pub lambda: f64,
}

/// Closed-form exceptional values and transport indicators for constant
/// index n ≡ n₀: each transverse mode with k²n₀ > m²π² carries a ± pair.
pub fn analytic_constant_modes(n0: f64, k: f64, bc: Bc) -> Vec<AnalyticMode> {
    let mut out = Vec::new();
    let m_start = if bc == Bc::Neumann { 0 } else { 1 };
    for m in m_start..200 {
        let disc = k * k * n0 - (m as f64 * PI).powi(2);
        if disc <= 0.0 {
            break;
        }
        let beta_un = disc.sqrt();
        for sign in [1.0, -1.0] {
            let bu = sign * beta_un;
            let mut wrapped = bu;
            while wrapped <= -PI {
                wrapped += 2.0 * PI;
            }
            while wrapped > PI {
                wrapped -= 2.0 * PI;
            }
            out.push(AnalyticMode {
                m,
                beta_unwrapped: bu,
                beta: wrapped,
                lambda: bu / (k * n0),
            });
        }
    }
    out
}
