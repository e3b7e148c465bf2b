//! Floquet-Bloch spectral analysis of the periodic cell: dispersion
//! branches, exceptional quasimomenta where A(α,k) is singular, and the
//! propagating-mode systems that classify those quasimomenta by direction
//! of energy transport.

use faer::Mat;

use crate::c64;
use crate::field::FieldOnCell;
use crate::linalg::{arnoldi, dot, generalized_eigen_dense, norm2};
use crate::pencil::{spmv, CellFactor, PencilMatrices};
use crate::{Error, Result};

/// Absolute clustering width for discrete exceptional quasimomenta.
const BETA_CLUSTER_TOL: f64 = 1e-6;

/// Computes the lowest `count` Floquet eigenvalues μ of
/// (a1 + α·a2 + α²·a3)φ = μ·(−a4)φ, sorted ascending.
pub fn lowest_branch_values(
    pencil: &PencilMatrices,
    alpha: f64,
    count: usize,
) -> Result<Vec<f64>> {
    let m = pencil.m_prime;
    // Shift-invert at μ = −1: iterate (K + Mₙ)⁻¹ Mₙ, whose eigenvalues are
    // 1/(μ+1); the shifted matrix is a_alpha_k with k² = −1.
    let shifted = pencil.a_alpha_k(c64::new(alpha, 0.0), -1.0);
    let factor = CellFactor::new(&shifted)?;
    let mn = &pencil.a4;
    let op = |x: &[c64]| {
        let mut y = vec![c64::new(0.0, 0.0); m];
        spmv(mn, x, &mut y);
        y.iter_mut().for_each(|v| *v = -*v);
        factor.solve_vec(&y)
    };
    let krylov = (3 * count + 12).min(m);
    let pairs = arnoldi(op, m, krylov, None)?;
    let mut mus: Vec<f64> = pairs
        .iter()
        .filter(|p| p.theta.norm() > 1e-12 && p.theta.im.abs() < 1e-6 * p.theta.norm())
        .map(|p| 1.0 / p.theta.re - 1.0)
        .filter(|mu| mu.is_finite() && *mu > -0.5)
        .collect();
    mus.sort_by(f64::total_cmp);
    mus.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * (1.0 + a.abs()));
    mus.truncate(count);
    Ok(mus)
}

/// Samples the lowest dispersion branches over a quasimomentum grid.
/// Returns one row per grid point.
pub fn dispersion_branches(
    pencil: &PencilMatrices,
    alphas: &[f64],
    branches: usize,
) -> Result<Vec<Vec<f64>>> {
    alphas
        .iter()
        .map(|&a| lowest_branch_values(pencil, a, branches))
        .collect()
}

/// Locates coarse crossings μ_i(α) = k² by linear interpolation on a scan
/// grid; these seed the quadratic eigenvalue refinement.
pub fn crossing_candidates(
    pencil: &PencilMatrices,
    k: f64,
    scan_points: usize,
    branches: usize,
) -> Result<Vec<f64>> {
    let k2 = k * k;
    let alphas: Vec<f64> = (0..=scan_points)
        .map(|i| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / scan_points as f64)
        .collect();
    let rows = dispersion_branches(pencil, &alphas, branches)?;
    let mut candidates = Vec::new();
    for b in 0..branches {
        for w in 0..scan_points {
            let (Some(&m0), Some(&m1)) = (rows[w].get(b), rows[w + 1].get(b)) else {
                continue;
            };
            if (m0 - k2) * (m1 - k2) <= 0.0 && m0 != m1 {
                let t = (k2 - m0) / (m1 - m0);
                candidates.push(alphas[w] + t * (alphas[w + 1] - alphas[w]));
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    Ok(candidates)
}

/// A discrete exceptional quasimomentum with an orthonormal basis of the
/// corresponding Floquet eigenspace.
pub struct ExceptionalPoint {
    /// Quasimomentum in (−π, π].
    pub beta: f64,
    /// Orthonormal eigenvectors of A(β,k).
    pub vectors: Vec<Vec<c64>>,
}

/// Relative pencil residual ‖A(β,k)φ‖ / (‖A‖₁‖φ‖).
pub fn pencil_residual(pencil: &PencilMatrices, beta: c64, k2: f64, phi: &[c64]) -> f64 {
    let a = pencil.a_alpha_k(beta, k2);
    let mut r = vec![c64::new(0.0, 0.0); phi.len()];
    spmv(&a, phi, &mut r);
    norm2(&r) / (crate::pencil::norm_one(&a).max(1e-300) * norm2(phi).max(1e-300))
}

/// Floquet quasimomenta of the quadratic pencil near a complex shift:
/// shift-invert Arnoldi on the companion linearization. Returns
/// residual-verified (β, φ) pairs, closest to the shift first.
pub fn floquet_eigen_near(
    pencil: &PencilMatrices,
    k: f64,
    shift: c64,
    krylov: usize,
) -> Result<Vec<(c64, Vec<c64>)>> {
    let k2 = k * k;
    let m = pencil.m_prime;
    let a_s = pencil.a_alpha_k(shift, k2);
    let factor = CellFactor::new(&a_s)?;
    let op = |w: &[c64]| {
        let (w1, w2) = w.split_at(m);
        let mut rhs = vec![c64::new(0.0, 0.0); m];
        let mut tmp = vec![c64::new(0.0, 0.0); m];
        spmv(&pencil.a2, w1, &mut rhs);
        let shifted: Vec<c64> = w1.iter().zip(w2).map(|(a, b)| shift * a + b).collect();
        spmv(&pencil.a3, &shifted, &mut tmp);
        for i in 0..m {
            rhs[i] = -rhs[i] - tmp[i];
        }
        let z1 = factor.solve_vec(&rhs);
        // Linearized vector layout is (φ, βφ): return (z1, w1 + s·z1).
        let mut out = Vec::with_capacity(2 * m);
        out.extend_from_slice(&z1);
        out.extend(w1.iter().zip(&z1).map(|(a, b)| a + shift * b));
        out
    };
    let pairs = arnoldi(op, 2 * m, krylov, None)?;
    let mut found = Vec::new();
    for p in pairs.iter().take(krylov / 3) {
        if p.theta.norm() < 1e-10 {
            continue;
        }
        let beta = shift + c64::new(1.0, 0.0) / p.theta;
        let phi: Vec<c64> = p.vector[..m].to_vec();
        if norm2(&phi) < 1e-12 {
            continue;
        }
        if pencil_residual(pencil, beta, k2, &phi) < 1e-7 {
            found.push((beta, phi));
        }
    }
    Ok(found)
}

/// Finds all real quasimomenta β ∈ (−π, π] where the cell pencil A(·,k) is
/// singular, by shift-invert Arnoldi on the linearized quadratic problem
/// around each dispersion crossing.
pub fn find_exceptional_values(
    pencil: &PencilMatrices,
    k: f64,
) -> Result<Vec<ExceptionalPoint>> {
    let k2 = k * k;
    let branches = ((k2 / 9.0).sqrt().ceil() as usize + 3).max(4);
    let candidates = crossing_candidates(pencil, k, 96, branches)?;
    let mut accepted: Vec<(f64, Vec<c64>)> = Vec::new();
    for &cand in &candidates {
        let shift = c64::new(cand, 0.01);
        for (beta, phi) in floquet_eigen_near(pencil, k, shift, 36)? {
            if beta.im.abs() > 1e-5 {
                continue;
            }
            // The eigenvalue family repeats at β + 2πj, but the shifted
            // copies carry a different discretization error; keep only the
            // principal representative in (−π, π].
            if beta.re <= -std::f64::consts::PI - 1e-9
                || beta.re > std::f64::consts::PI + 1e-9
            {
                continue;
            }
            let beta_real = c64::new(beta.re, 0.0);
            if pencil_residual(pencil, beta_real, k2, &phi) < 1e-7 {
                accepted.push((beta.re.min(std::f64::consts::PI), phi));
            }
        }
    }
    // Cluster by quasimomentum and orthonormalize each eigenspace.
    accepted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut points: Vec<ExceptionalPoint> = Vec::new();
    for (beta, phi) in accepted {
        let fits = points
            .last()
            .map(|p| (p.beta - beta).abs() < BETA_CLUSTER_TOL)
            .unwrap_or(false);
        if !fits {
            points.push(ExceptionalPoint {
                beta,
                vectors: Vec::new(),
            });
        }
        let point = points.last_mut().unwrap();
        let mut v = phi;
        for existing in &point.vectors {
            let c = dot(existing, &v);
            v.iter_mut().zip(existing).for_each(|(a, b)| *a -= c * b);
        }
        let n = norm2(&v);
        if n > 1e-6 {
            v.iter_mut().for_each(|x| *x /= n);
            // Contaminated duplicates can survive the projection with a
            // small but nonzero remainder; only genuine null directions do
            // so with a small residual.
            if pencil_residual(pencil, c64::new(point.beta, 0.0), k2, &v) < 1e-7 {
                point.vectors.push(v);
            }
        }
    }
    Ok(points)
}

/// One propagating Floquet mode at an exceptional quasimomentum.
#[derive(Clone)]
pub struct PropagatingMode {
    /// Quasimomentum in (−π, π].
    pub beta: f64,
    /// Group-velocity indicator; positive for rightward transport.
    pub lambda: f64,
    /// Periodic profile, flux-normalized.
    pub profile: FieldOnCell,
}

/// Propagating modes split by transport direction.
pub struct ModeSet {
    /// Modes carrying energy rightward (λ > 0).
    pub rightward: Vec<PropagatingMode>,
    /// Modes carrying energy leftward (λ < 0).
    pub leftward: Vec<PropagatingMode>,
}

impl ModeSet {
    /// All modes, rightward first.
    pub fn all(&self) -> impl Iterator<Item = &PropagatingMode> {
        self.rightward.iter().chain(self.leftward.iter())
    }
}

/// Tolerance below which a transport indicator counts as a standing wave.
pub const STANDING_WAVE_TOL: f64 = 1e-8;

fn small_form(matvec: impl Fn(&[c64]) -> Vec<c64>, vecs: &[Vec<c64>]) -> Mat<c64> {
    let m = vecs.len();
    let images: Vec<Vec<c64>> = vecs.iter().map(|v| matvec(v)).collect();
    Mat::from_fn(m, m, |r, c| dot(&vecs[r], &images[c]))
}

fn hermitize(m: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |r, c| {
        (m[(r, c)] + m[(c, r)].conj()) * 0.5
    })
}

/// Diagonalizes the transport form on one exceptional eigenspace, returning
/// flux-normalized propagating modes with their indicators λ.
///
/// The indicator solves the small generalized problem a·c = λ b·c with
/// a = ½ Φᴴ(a2 + 2β·a3)Φ and b = k·Φᴴ(−a4)Φ, equal to the derivative of
/// the crossing dispersion branch divided by 2k.
pub fn mode_system(
    pencil: &PencilMatrices,
    k: f64,
    point: &ExceptionalPoint,
) -> Result<Vec<PropagatingMode>> {
    let m = pencil.m_prime;
    let beta = point.beta;
    let a_form = small_form(
        |v| {
            let mut y1 = vec![c64::new(0.0, 0.0); m];
            let mut y2 = vec![c64::new(0.0, 0.0); m];
            spmv(&pencil.a2, v, &mut y1);
            spmv(&pencil.a3, v, &mut y2);
            (0..m).map(|i| y1[i] * 0.5 + y2[i] * beta).collect()
        },
        &point.vectors,
    );
    let b_form = small_form(
        |v| {
            let mut y = vec![c64::new(0.0, 0.0); m];
            spmv(&pencil.a4, v, &mut y);
            y.iter_mut().for_each(|x| *x = -*x * k);
            y
        },
        &point.vectors,
    );
    let a_h = hermitize(&a_form);
    let b_h = hermitize(&b_form);
    let eigs = generalized_eigen_dense(&a_h, &b_h)?;
    let mut modes = Vec::new();
    for (lambda, coeff) in eigs {
        if lambda.im.abs() > 1e-6 * (1.0 + lambda.norm()) {
            return Err(Error::ClassificationInconsistency {
                beta,
                lambda_sign: lambda.im,
                slope_sign: 0.0,
            });
        }
        let lambda = lambda.re;
        if lambda.abs() < STANDING_WAVE_TOL {
            return Err(Error::StandingWave {
                beta,
                lambda_abs: lambda.abs(),
                tol: STANDING_WAVE_TOL,
            });
        }
        let mut profile = vec![c64::new(0.0, 0.0); m];
        for (c, v) in coeff.iter().zip(&point.vectors) {
            profile.iter_mut().zip(v).for_each(|(p, x)| *p += c * x);
        }
        // Flux normalization: 2k · φᴴ(−a4)φ = 1.
        let mut y = vec![c64::new(0.0, 0.0); m];
        spmv(&pencil.a4, &profile, &mut y);
        let weight = -2.0 * k * dot(&profile, &y).re;
        if weight <= 0.0 {
            return Err(Error::Linalg(
                "non-positive flux weight in mode normalization".into(),
            ));
        }
        let scale = 1.0 / weight.sqrt();
        profile.iter_mut().for_each(|v| *v *= scale);
        modes.push(PropagatingMode {
            beta,
            lambda,
            profile: FieldOnCell { values: profile },
        });
    }
    modes.sort_by(|x, y| y.lambda.total_cmp(&x.lambda));
    Ok(modes)
}

/// Slope of the dispersion branch through (β, k²), by centered differences
/// on the eigenvalue nearest k².
pub fn branch_slope_at(pencil: &PencilMatrices, beta: f64, k: f64, dalpha: f64) -> Result<f64> {
    let k2 = k * k;
    let mu_near = |alpha: f64| -> Result<f64> {
        let m = pencil.m_prime;
        let shifted = pencil.a_alpha_k(c64::new(alpha, 0.0), k2);
        let factor = CellFactor::new(&shifted)?;
        let op = |x: &[c64]| {
            let mut y = vec![c64::new(0.0, 0.0); m];
            spmv(&pencil.a4, x, &mut y);
            y.iter_mut().for_each(|v| *v = -*v);
            factor.solve_vec(&y)
        };
        let pairs = arnoldi(op, m, 24, None)?;
        let p = pairs.first().ok_or_else(|| Error::EigenNonConvergence("no Ritz value for branch slope".into()))?;
        Ok(k2 + 1.0 / p.theta.re)
    };
    Ok((mu_near(beta + dalpha)? - mu_near(beta - dalpha)?) / (2.0 * dalpha))
}

/// Finds, classifies and cross-checks all propagating modes at wavenumber
/// k. Classification by the sign of λ is verified against the sign of the
/// dispersion branch slope.
pub fn propagating_modes(pencil: &PencilMatrices, k: f64) -> Result<ModeSet> {
    let points = find_exceptional_values(pencil, k)?;
    let mut rightward = Vec::new();
    let mut leftward = Vec::new();
    for point in &points {
        if point.vectors.is_empty() {
            continue;
        }
        for mode in mode_system(pencil, k, point)? {
            let slope = branch_slope_at(pencil, mode.beta, k, 1e-3)?;
            if slope.abs() > 10.0 * STANDING_WAVE_TOL
                && slope.signum() != mode.lambda.signum()
            {
                return Err(Error::ClassificationInconsistency {
                    beta: mode.beta,
                    lambda_sign: mode.lambda.signum(),
                    slope_sign: slope.signum(),
                });
            }
            if mode.lambda > 0.0 {
                rightward.push(mode);
            } else {
                leftward.push(mode);
            }
        }
    }
    Ok(ModeSet {
        rightward,
        leftward,
    })
}
