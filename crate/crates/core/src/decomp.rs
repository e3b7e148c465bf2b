//! Decomposition solver: splits the scattered field into a decaying part,
//! computed by inverting the Floquet-Bloch transform along a uniformly
//! shifted line, and cutoff-weighted outgoing propagating modes whose
//! amplitudes are unknowns of the coupled system.
//!
//! The projection M removes the propagating content of a source by
//! subtracting flux-weighted correction functions g_m built from the modes
//! and the cutoff ramps, making the shifted-line problem solvable in the
//! decaying class.

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::c64;
use crate::cci::{cell_range_of, CouplingBasis, Discretization, SupportSamples};
use crate::coeffs::{ramp_psi, ramp_psi_d1, ramp_psi_d2, RampSign, ScatteringProblem};
use crate::contour::{build_shifted_line, ContourParam, TrigGrid, DEFAULT_SMOOTHING_ORDER};
use crate::field::{FieldOnCell, MultiCellField, QuadField};
use crate::linalg::dense_rcond;
use crate::pencil::{modulated_load_with, CellFactor, MIDPOINT_SHAPE};
use crate::spectral::{floquet_eigen_near, propagating_modes, ModeSet, PropagatingMode};
use crate::{Error, Result};

/// Default imaginary shift of the line contour.
pub const DEFAULT_SIGMA: f64 = 0.2;

/// One propagating mode with everything the decomposition needs: periodic
/// profile samples, the cutoff ramp it rides, and its flux weight.
pub struct ModeData {
    /// Quasimomentum.
    pub beta: f64,
    /// Transport indicator.
    pub lambda: f64,
    /// Periodic profile φ̂, flux-normalized.
    pub profile: FieldOnCell,
    /// φ̂ at the quadrature points of the reference mesh.
    quad_vals: QuadField,
    /// ∂₁φ̂ at the quadrature points.
    quad_d1: QuadField,
    /// Ramp selected by the transport direction.
    pub ramp: RampSign,
    /// Cell index hosting the ramp transition (±1).
    pub host_cell: i32,
    /// Flux weight w = τ·i/|λ|.
    pub weight: c64,
}

impl ModeData {
    /// The full mode φ(x) = e^{iβx₁}φ̂(x) at a quadrature point of the
    /// reference mesh placed in global coordinates `x`.
    fn mode_at(&self, tri: usize, qp: usize, x1: f64) -> c64 {
        (c64::i() * (self.beta * x1)).exp() * self.quad_vals.values[tri][qp]
    }

    /// The correction function g = 2ψ′∂₁φ + ψ″φ at a quadrature point in
    /// global coordinates.
    pub(crate) fn g_at(&self, tri: usize, qp: usize, x1: f64) -> c64 {
        let psi1 = ramp_psi_d1(x1, self.ramp);
        let psi2 = ramp_psi_d2(x1, self.ramp);
        if psi1 == 0.0 && psi2 == 0.0 {
            return c64::new(0.0, 0.0);
        }
        let phase = (c64::i() * (self.beta * x1)).exp();
        let phi = phase * self.quad_vals.values[tri][qp];
        let dphi = phase
            * (c64::i() * self.beta * self.quad_vals.values[tri][qp]
                + self.quad_d1.values[tri][qp]);
        dphi * (2.0 * psi1) + phi * psi2
    }
}

/// Builds mode data with the calibrated flux-weight sign.
///
/// The weight must satisfy w·∫g φ̄ = 1 over the ramp cell; the global sign
/// τ ∈ {+1, −1} of w = τ·i/|λ| is chosen by evaluating that integral.
pub fn prepare_modes(disc: &Discretization, modes: &ModeSet) -> Result<(Vec<ModeData>, f64)> {
    let mut data: Vec<ModeData> = modes
        .all()
        .map(|m: &PropagatingMode| {
            let (ramp, host_cell) = if m.lambda > 0.0 {
                (RampSign::Plus, 1)
            } else {
                (RampSign::Minus, -1)
            };
            ModeData {
                beta: m.beta,
                lambda: m.lambda,
                profile: m.profile.clone(),
                quad_vals: QuadField::from_nodal(&disc.mesh, &disc.basis, &m.profile),
                quad_d1: QuadField::d1_from_nodal(&disc.mesh, &disc.basis, &m.profile),
                ramp,
                host_cell,
                weight: c64::new(0.0, 0.0),
            }
        })
        .collect();
    if data.is_empty() {
        return Ok((data, -1.0));
    }
    let mut score_plus = 0.0;
    let mut score_minus = 0.0;
    let rhos: Vec<c64> = data.iter().map(|md| g_mode_overlap(disc, md, md)).collect();
    for (md, &rho) in data.iter().zip(&rhos) {
        let base = c64::i() / md.lambda.abs();
        score_plus += (base * rho - 1.0).norm();
        score_minus += (-base * rho - 1.0).norm();
    }
    let tau = if score_minus <= score_plus { -1.0 } else { 1.0 };
    for md in &mut data {
        md.weight = c64::i() * (tau / md.lambda.abs());
    }
    Ok((data, tau))
}

/// ∫ g_a conj(φ_b) dx over the ramp cell of `a`.
pub fn g_mode_overlap(disc: &Discretization, a: &ModeData, b: &ModeData) -> c64 {
    let shift = a.host_cell as f64;
    let mut acc = c64::new(0.0, 0.0);
    for t in 0..disc.mesh.triangles.len() {
        let geo = crate::pencil::element_geometry(&disc.mesh, t);
        let w = geo.area / 3.0;
        for qp in 0..3 {
            let x1 = geo.quad_points[qp][0] + shift;
            let g = a.g_at(t, qp, x1);
            if g != c64::new(0.0, 0.0) {
                acc += g * b.mode_at(t, qp, x1).conj() * w;
            }
        }
    }
    acc
}

/// Flux integral ∫ g conj(φ_m) dx of a source sampled on the reference
/// cell.
pub fn source_mode_flux(samples: &SupportSamples, md: &ModeData) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for tr in &samples.tris {
        for qp in 0..3 {
            if tr.values[qp] == 0.0 {
                continue;
            }
            acc += tr.values[qp]
                * md.mode_at(tr.tri, qp, tr.points[qp][0]).conj()
                * tr.weight;
        }
    }
    acc
}

/// The projection M(g) = g − Σ_m w_m (∫g φ̄_m) g_m for a source supported
/// in the reference cell, returned over the cells the corrections touch.
pub fn apply_projection(
    disc: &Discretization,
    modes: &[ModeData],
    source: &SupportSamples,
    source_nodal: &FieldOnCell,
) -> Result<MultiCellField> {
    let m_prime = disc.basis.m_prime;
    let mut cells: Vec<FieldOnCell> = (0..5).map(|_| FieldOnCell::zeros(m_prime)).collect();
    cells[2] = source_nodal.clone();
    for md in modes {
        let flux = source_mode_flux(source, md) * md.weight;
        let ci = (md.host_cell + 2) as usize;
        let nodal = g_nodal(disc, md);
        for (v, g) in cells[ci].values.iter_mut().zip(&nodal.values) {
            *v -= flux * g;
        }
    }
    Ok(MultiCellField {
        first_cell: -2,
        cells,
    })
}

/// Nodal interpolation of g_m on its host cell.
pub fn g_nodal(disc: &Discretization, md: &ModeData) -> FieldOnCell {
    let shift = md.host_cell as f64;
    let values = disc
        .basis
        .node_of_dof
        .iter()
        .map(|&v| {
            let [x1r, x2] = disc.mesh.vertices[v];
            let x1 = x1r + shift;
            let psi1 = ramp_psi_d1(x1, md.ramp);
            let psi2 = ramp_psi_d2(x1, md.ramp);
            if psi1 == 0.0 && psi2 == 0.0 {
                return c64::new(0.0, 0.0);
            }
            let phase = (c64::i() * (md.beta * x1)).exp();
            let phat = md.profile.eval(&disc.mesh, &disc.basis, x1r, x2);
            // Nodal derivative via centered difference of the profile.
            let eps = 1e-6;
            let dp = (md.profile.eval(&disc.mesh, &disc.basis, x1r + eps, x2)
                - md.profile.eval(&disc.mesh, &disc.basis, x1r - eps, x2))
                / (2.0 * eps);
            let dphi = phase * (c64::i() * md.beta * phat + dp);
            dphi * (2.0 * psi1) + phase * phat * psi2
        })
        .collect();
    FieldOnCell { values }
}

/// Checks that the shifted line keeps an analyticity tube clear of complex
/// Floquet eigenvalues: any eigenvalue with |Im β| ∈ (0, 2σ) must stay at
/// distance ≥ σ/2 from the line Im = σ.
pub fn check_sigma_admissible(disc: &Discretization, k: f64, sigma: f64) -> Result<()> {
    if sigma <= 0.0 {
        return Err(Error::SigmaInadmissible {
            sigma,
            re: 0.0,
            im: 0.0,
        });
    }
    for &re in &[-2.4, -1.2, 0.0, 1.2, 2.4] {
        let shift = c64::new(re, sigma);
        for (beta, _) in floquet_eigen_near(&disc.pencil, k, shift, 24)? {
            let im = beta.im.abs();
            if im > 1e-6 && im < 2.0 * sigma && (im - sigma).abs() < sigma / 2.0 {
                return Err(Error::SigmaInadmissible {
                    sigma,
                    re: beta.re,
                    im: beta.im,
                });
            }
        }
    }
    Ok(())
}

/// One solved instance of the decomposition method.
pub struct DecompSolution {
    /// Total field ũ = u₁ + Σ ψ f_m φ_m over the requested cells.
    pub field: MultiCellField,
    /// The decaying part u₁ alone.
    pub u1: MultiCellField,
    /// Coupling unknowns Ĉ_m = w_m k² ∫ q u₁ φ̄_m.
    pub coeffs_c: Vec<c64>,
    /// Outgoing amplitudes f_m = w_m ∫f φ̄_m − Ĉ_m.
    pub amplitudes: Vec<c64>,
}

/// The outcome of one decomposition run over nested quadrature counts.
pub struct DecompRun {
    /// (N, solution), ascending in N.
    pub solutions: Vec<(usize, DecompSolution)>,
    /// Calibrated flux-weight sign.
    pub tau: f64,
    /// Line shift used.
    pub sigma: f64,
    /// Smallest reciprocal condition estimate of the coupled dense block.
    pub schur_rcond: f64,
}

/// Full decomposition solve for several nested quadrature counts.
pub fn decomp_solve_multi(
    prob: &ScatteringProblem,
    h: f64,
    ns: &[usize],
    sigma: Option<f64>,
    cells: &[i32],
) -> Result<DecompRun> {
    let ns = crate::cci::validate_counts(ns)?;
    let disc = crate::cci::discretize(prob, h)?;
    let sigma = sigma.unwrap_or(DEFAULT_SIGMA);
    check_sigma_admissible(&disc, prob.k, sigma)?;
    let contour = build_shifted_line(sigma, DEFAULT_SMOOTHING_ORDER)?;
    let modes = propagating_modes(&disc.pencil, prob.k)?;
    let (mode_data, tau) = prepare_modes(&disc, &modes)?;
    let (solutions, schur_rcond) = decomp_block_solve(prob, &disc, &contour, &ns, cells, &mode_data)?;
    Ok(DecompRun {
        solutions,
        tau,
        sigma,
        schur_rcond,
    })
}

/// Single-count convenience wrapper.
pub fn decomp_solve(
    prob: &ScatteringProblem,
    h: f64,
    n_quad: usize,
    sigma: Option<f64>,
    cells: &[i32],
) -> Result<(DecompSolution, f64)> {
    let mut run = decomp_solve_multi(prob, h, &[n_quad], sigma, cells)?;
    Ok((run.solutions.pop().map(|(_, s)| s).unwrap(), run.tau))
}

fn decomp_block_solve(
    prob: &ScatteringProblem,
    disc: &Discretization,
    contour: &ContourParam,
    ns: &[usize],
    cells: &[i32],
    mode_data: &[ModeData],
) -> Result<(Vec<(usize, DecompSolution)>, f64)> {
    let m = disc.basis.m_prime;
    let k2 = prob.k_squared();
    let n_max = *ns.last().unwrap();
    let grid_max = TrigGrid::new(n_max)?;
    let (cell_lo, cell_hi) = cell_range_of(cells);
    let n_cells = (cell_hi - cell_lo + 1) as usize;
    let n_modes = mode_data.len();

    let q_samples = SupportSamples::build(&disc.mesh, &disc.basis, &prob.q);
    let f_samples = SupportSamples::build(&disc.mesh, &disc.basis, &prob.f);
    let q_dofs = q_samples.dofs();
    let nq = q_dofs.len();
    let mut q_index = vec![usize::MAX; m];
    for (i, &d) in q_dofs.iter().enumerate() {
        q_index[d] = i;
    }
    let dof_x1: Vec<f64> = (0..m).map(|d| disc.basis.dof_x1(&disc.mesh, d)).collect();
    let coupling = CouplingBasis::build(&q_dofs, &disc.mesh, &disc.basis);
    let rw = coupling.width(nq);
    let dim = rw + n_modes;

    // Mode flux of the source and the q-coupling rows d_m[j] = w k²∫q ζ_j φ̄.
    let flux_f: Vec<c64> = mode_data
        .iter()
        .map(|md| source_mode_flux(&f_samples, md))
        .collect();
    let d_rows: Vec<Vec<c64>> = mode_data
        .iter()
        .map(|md| {
            let mut row = vec![c64::new(0.0, 0.0); nq];
            for tr in &q_samples.tris {
                for qp in 0..3 {
                    if tr.values[qp] == 0.0 {
                        continue;
                    }
                    let common = md.weight
                        * k2
                        * tr.values[qp]
                        * md.mode_at(tr.tri, qp, tr.points[qp][0]).conj()
                        * tr.weight;
                    for l in 0..3 {
                        if let Some(d) = tr.dofs[l] {
                            row[q_index[d]] += common * MIDPOINT_SHAPE[qp][l];
                        }
                    }
                }
            }
            row
        })
        .collect();

    let members_of = |ell: usize| -> Vec<usize> {
        ns.iter()
            .copied()
            .filter(|&n| (ell * n) % n_max == 0)
            .collect()
    };

    // Per-node loads: the f₀ load folds the projection into the f load.
    let node_loads = |s: c64, sp: c64| -> (Vec<c64>, Vec<Vec<c64>>) {
        let g_loads: Vec<Vec<c64>> = mode_data
            .iter()
            .map(|md| {
                modulated_load_with(&disc.mesh, &disc.basis, s, md.host_cell, |t, qp, x| {
                    md.g_at(t, qp, x[0])
                })
                .iter()
                .map(|v| v * sp)
                .collect()
            })
            .collect();
        let mut f0_load: Vec<c64> = f_samples
            .modulated_load(s, m)
            .iter()
            .map(|v| v * sp)
            .collect();
        for (mi, md) in mode_data.iter().enumerate() {
            let coef = md.weight * flux_f[mi];
            for (fv, gv) in f0_load.iter_mut().zip(&g_loads[mi]) {
                *fv -= coef * gv;
            }
        }
        (f0_load, g_loads)
    };

    // Sweep 1: accumulate, per count, the q-restricted coupling block, the
    // load image, and the mode-coupling columns.
    let mut v_acc: Vec<Mat<c64>> = ns.iter().map(|_| Mat::zeros(nq, rw)).collect();
    let mut r_acc: Vec<Vec<c64>> = ns.iter().map(|_| vec![c64::new(0.0, 0.0); nq]).collect();
    let mut g_acc: Vec<Mat<c64>> = ns.iter().map(|_| Mat::zeros(nq, n_modes)).collect();
    let nodes: Vec<f64> = grid_max.nodes().collect();
    for (ell0, &t) in nodes.iter().enumerate() {
        let members = members_of(ell0 + 1);
        let s = contour.eval(t);
        let sp = contour.deriv(t);
        let a = disc.pencil.a_alpha_k(s, k2);
        let factor = CellFactor::new(&a)?;
        let (f0_load, g_loads) = node_loads(s, sp);
        // Columns: f₀ load, then one per mode (with the row-side minus of
        // the Ĉ coupling), then the q-mass columns.
        let mut rhs = Mat::<c64>::zeros(m, 1 + n_modes);
        for j in 0..m {
            rhs[(j, 0)] = f0_load[j];
        }
        for (mi, gl) in g_loads.iter().enumerate() {
            for j in 0..m {
                rhs[(j, 1 + mi)] = gl[j];
            }
        }
        let x = factor.solve_mat(&rhs);
        let c_entries = if nq > 0 {
            q_samples.modulated_mass_entries(s, -sp * k2)
        } else {
            Vec::new()
        };
        for &n in &members {
            let ni = ns.iter().position(|&x| x == n).unwrap();
            let w = 1.0 / (std::f64::consts::TAU * n as f64);
            for (qi, &d) in q_dofs.iter().enumerate() {
                let phase = (c64::i() * s * dof_x1[d]).exp() * w;
                r_acc[ni][qi] += phase * x[(d, 0)];
                for mi in 0..n_modes {
                    let val = g_acc[ni][(qi, mi)] + phase * x[(d, 1 + mi)];
                    g_acc[ni][(qi, mi)] = val;
                }
            }
        }
        if nq > 0 {
            let chunk = 512usize;
            let mut start = 0;
            while start < rw {
                let width = chunk.min(rw - start);
                let mut qrhs = Mat::<c64>::zeros(m, width);
                match &coupling {
                    CouplingBasis::Exact => {
                        for &(r, c, v) in &c_entries {
                            let ci = q_index[c];
                            if ci >= start && ci < start + width {
                                qrhs[(r, ci - start)] += v;
                            }
                        }
                    }
                    CouplingBasis::Compressed { b, .. } => {
                        for &(r, c, v) in &c_entries {
                            let ci = q_index[c];
                            for col in 0..width {
                                let val = qrhs[(r, col)] + v * b[(ci, start + col)];
                                qrhs[(r, col)] = val;
                            }
                        }
                    }
                }
                let qx = factor.solve_mat(&qrhs);
                for &n in &members {
                    let ni = ns.iter().position(|&x| x == n).unwrap();
                    let w = 1.0 / (std::f64::consts::TAU * n as f64);
                    for (qi, &d) in q_dofs.iter().enumerate() {
                        let phase = (c64::i() * s * dof_x1[d]).exp() * w;
                        for c in 0..width {
                            v_acc[ni][(qi, start + c)] += phase * qx[(d, c)];
                        }
                    }
                }
                start += width;
            }
        }
    }

    // Dense coupled solve per count for (U_Q, Ĉ):
    //   (I + V_QQ) U_Q + Σ_m Ĉ_m r_{g,m} = R_Q,   Ĉ_m − d_mᵀ U_Q = 0.
    let mut u_q: Vec<Vec<c64>> = Vec::with_capacity(ns.len());
    let mut min_rcond = 1.0f64;
    let mut c_hat: Vec<Vec<c64>> = Vec::with_capacity(ns.len());
    for (ni, _) in ns.iter().enumerate() {
        if dim == 0 {
            u_q.push(Vec::new());
            c_hat.push(Vec::new());
            continue;
        }
        // Coupled block on the (possibly compressed) q coefficients and the
        // mode amplitudes: [[I + PV, −P·g], [−d·B, I]].
        let (vv, gg, dd, rr): (Mat<c64>, Mat<c64>, Mat<c64>, Mat<c64>) = match &coupling {
            CouplingBasis::Exact => (
                v_acc[ni].clone(),
                g_acc[ni].clone(),
                Mat::from_fn(n_modes, nq, |r, c| d_rows[r][c]),
                Mat::from_fn(nq, 1, |r, _| r_acc[ni][r]),
            ),
            CouplingBasis::Compressed { b, proj } => (
                proj * &v_acc[ni],
                proj * &g_acc[ni],
                Mat::from_fn(n_modes, nq, |r, c| d_rows[r][c]) * b,
                proj * Mat::from_fn(nq, 1, |r, _| r_acc[ni][r]),
            ),
        };
        let s_mat = Mat::from_fn(dim, dim, |r, c| {
            let eye = if r == c {
                c64::new(1.0, 0.0)
            } else {
                c64::new(0.0, 0.0)
            };
            if r < rw && c < rw {
                eye + vv[(r, c)]
            } else if r < rw {
                -gg[(r, c - rw)]
            } else if c < rw {
                -dd[(r - rw, c)]
            } else {
                eye
            }
        });
        let rcond = dense_rcond(&s_mat);
        min_rcond = min_rcond.min(rcond);
        if rcond < crate::cci::TRAPPED_MODE_RCOND {
            return Err(Error::TrappedMode { rcond });
        }
        let lu = s_mat.partial_piv_lu();
        let rhs = Mat::from_fn(dim, 1, |r, _| {
            if r < rw {
                rr[(r, 0)]
            } else {
                c64::new(0.0, 0.0)
            }
        });
        let sol = lu.solve(&rhs);
        u_q.push(match &coupling {
            CouplingBasis::Exact => (0..nq).map(|r| sol[(r, 0)]).collect(),
            CouplingBasis::Compressed { b, .. } => {
                let coef = Mat::from_fn(rw, 1, |r, _| sol[(r, 0)]);
                let u = b * &coef;
                (0..nq).map(|r| u[(r, 0)]).collect()
            }
        });
        c_hat.push((0..n_modes).map(|mi| sol[(rw + mi, 0)]).collect());
    }

    // Sweep 2: back-substitute and reconstruct u₁ on the requested cells.
    let mut fields: Vec<Vec<FieldOnCell>> = ns
        .iter()
        .map(|_| (0..n_cells).map(|_| FieldOnCell::zeros(m)).collect())
        .collect();
    for (ell0, &t) in nodes.iter().enumerate() {
        let members = members_of(ell0 + 1);
        let s = contour.eval(t);
        let sp = contour.deriv(t);
        let a = disc.pencil.a_alpha_k(s, k2);
        let factor = CellFactor::new(&a)?;
        let (f0_load, g_loads) = node_loads(s, sp);
        let c_entries = if nq > 0 {
            q_samples.modulated_mass_entries(s, -sp * k2)
        } else {
            Vec::new()
        };
        let mut rhs = Mat::<c64>::zeros(m, members.len());
        for (col, &n) in members.iter().enumerate() {
            let ni = ns.iter().position(|&x| x == n).unwrap();
            for j in 0..m {
                rhs[(j, col)] = f0_load[j];
            }
            for &(r, c, v) in &c_entries {
                let val = rhs[(r, col)] - v * u_q[ni][q_index[c]];
                rhs[(r, col)] = val;
            }
            for (mi, gl) in g_loads.iter().enumerate() {
                let coef = c_hat[ni][mi];
                for j in 0..m {
                    let val = rhs[(j, col)] + coef * gl[j];
                    rhs[(j, col)] = val;
                }
            }
        }
        let v_sol = factor.solve_mat(&rhs);
        for (col, &n) in members.iter().enumerate() {
            let ni = ns.iter().position(|&x| x == n).unwrap();
            let w = 1.0 / (std::f64::consts::TAU * n as f64);
            for (ci, cell) in (cell_lo..=cell_hi).enumerate() {
                for j in 0..m {
                    let x1 = dof_x1[j] + cell as f64;
                    fields[ni][ci].values[j] +=
                        (c64::i() * s * x1).exp() * v_sol[(j, col)] * w;
                }
            }
        }
    }

    // Amplitudes and total field ũ = u₁ + Σ ψ f_m φ_m per count.
    let mut out = Vec::with_capacity(ns.len());
    for (ni, &n) in ns.iter().enumerate() {
        let amplitudes: Vec<c64> = mode_data
            .iter()
            .enumerate()
            .map(|(mi, md)| md.weight * flux_f[mi] - c_hat[ni].get(mi).copied().unwrap_or(c64::new(0.0, 0.0)))
            .collect();
        let u1 = MultiCellField {
            first_cell: cell_lo,
            cells: std::mem::take(&mut fields[ni]),
        };
        let mut total = u1.clone();
        for (ci, cell) in (cell_lo..=cell_hi).enumerate() {
            for (j, tv) in total.cells[ci].values.iter_mut().enumerate() {
                let x1 = dof_x1[j] + cell as f64;
                for (mi, md) in mode_data.iter().enumerate() {
                    let psi = ramp_psi(x1, md.ramp);
                    if psi != 0.0 {
                        let phat = md.profile.values[j];
                        *tv += amplitudes[mi]
                            * psi
                            * (c64::i() * (md.beta * x1)).exp()
                            * phat;
                    }
                }
            }
        }
        out.push((
            n,
            DecompSolution {
                field: total,
                u1,
                coeffs_c: c_hat[ni].clone(),
                amplitudes,
            },
        ));
    }
    Ok((out, min_rcond))
}
