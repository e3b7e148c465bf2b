//! Shared numerical linear algebra and extrapolation utilities: a
//! shift-invert Arnoldi driver, small dense generalized eigensolves,
//! Richardson extrapolation and least-squares order fits.

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::c64;
use crate::{Error, Result};

/// One approximate eigenpair of the iterated operator.
#[derive(Clone)]
pub struct RitzPair {
    /// Ritz value of the operator that was iterated.
    pub theta: c64,
    /// Ritz vector in the original space.
    pub vector: Vec<c64>,
    /// Residual estimate |h_{m+1,m} · e_mᵀ y|.
    pub residual: f64,
}

/// Runs Arnoldi with full reorthogonalization on `op` and returns Ritz
/// pairs sorted by decreasing |θ| (dominant first). `op` must realize the
/// already shifted-and-inverted operator; callers map θ back themselves.
pub fn arnoldi(
    op: impl Fn(&[c64]) -> Vec<c64>,
    dim: usize,
    krylov: usize,
    start: Option<Vec<c64>>,
) -> Result<Vec<RitzPair>> {
    let m = krylov.min(dim);
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut q: Vec<Vec<c64>> = Vec::with_capacity(m + 1);
    let mut v0 = start.unwrap_or_else(|| {
        (0..dim)
            .map(|i| {
                let s = ((i as f64 + 1.0) * 0.754_877).fract() - 0.5;
                c64::new(s, ((i as f64 + 1.0) * 0.569_840).fract() - 0.5)
            })
            .collect()
    });
    let n0 = norm2(&v0);
    if n0 == 0.0 {
        return Err(Error::Linalg("zero Arnoldi start vector".into()));
    }
    v0.iter_mut().for_each(|v| *v /= n0);
    q.push(v0);
    let mut h = vec![vec![c64::new(0.0, 0.0); m]; m + 1];
    let mut steps = m;
    for j in 0..m {
        let mut w = op(&q[j]);
        // Two Gram-Schmidt passes keep the basis orthonormal in finite
        // precision.
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = dot(qi, &w);
                h[i][j] += c;
                w.iter_mut().zip(qi).for_each(|(wv, qv)| *wv -= c * qv);
            }
        }
        let nw = norm2(&w);
        h[j + 1][j] = c64::new(nw, 0.0);
        if nw < 1e-14 {
            steps = j + 1;
            break;
        }
        w.iter_mut().for_each(|v| *v /= nw);
        q.push(w);
    }
    let hm = Mat::from_fn(steps, steps, |r, c| h[r][c]);
    let eig = hm
        .eigen()
        .map_err(|_| Error::EigenNonConvergence("Arnoldi projection eigensolve failed".into()))?;
    let (s, u) = (eig.S(), eig.U());
    let tail = h[steps][steps - 1].norm();
    let mut pairs: Vec<RitzPair> = (0..steps)
        .map(|e| {
            let y: Vec<c64> = (0..steps).map(|r| u[(r, e)]).collect();
            let mut vector = vec![c64::new(0.0, 0.0); dim];
            for (r, yr) in y.iter().enumerate() {
                vector
                    .iter_mut()
                    .zip(&q[r])
                    .for_each(|(vv, qv)| *vv += yr * qv);
            }
            RitzPair {
                theta: s[e],
                vector,
                residual: tail * y[steps - 1].norm(),
            }
        })
        .collect();
    pairs.sort_by(|a, b| b.theta.norm().total_cmp(&a.theta.norm()));
    Ok(pairs)
}

/// Euclidean inner product ⟨a, b⟩ = Σ āᵢbᵢ.
pub fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Euclidean norm.
pub fn norm2(a: &[c64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves the small dense generalized problem a·c = λ b·c by reducing to
/// b⁻¹a; returns (λ, c) pairs in unspecified order.
pub fn generalized_eigen_dense(a: &Mat<c64>, b: &Mat<c64>) -> Result<Vec<(c64, Vec<c64>)>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if b.nrows() != n || a.ncols() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch("generalized eigenproblem matrices must be square and equal-sized".into()));
    }
    let lu = b.partial_piv_lu();
    let m = lu.solve(a);
    let eig = m.eigen().map_err(|_| Error::EigenNonConvergence("dense generalized eigensolve failed".into()))?;
    let (s, u) = (eig.S(), eig.U());
    Ok((0..n)
        .map(|e| (s[e], (0..n).map(|r| u[(r, e)]).collect()))
        .collect())
}

/// Richardson (Neville) extrapolation of a sequence T(ε), T(ε/2), … with
/// error expansion in powers of ε. Returns the full triangular table; the
/// best value is the last entry of the last row.
pub fn richardson_table(values: &[c64]) -> Vec<Vec<c64>> {
    let n = values.len();
    let mut table: Vec<Vec<c64>> = values.iter().map(|&v| vec![v]).collect();
    for j in 1..n {
        for i in (j..n).rev() {
            let factor = 2f64.powi(j as i32) - 1.0;
            let incr = (table[i][j - 1] - table[i - 1][j - 1]) / factor;
            let v = table[i][j - 1] + incr;
            table[i].push(v);
        }
    }
    table
}

/// Extrapolated limit of `values` sampled at ε, ε/2, ε/4, …, with an error
/// estimate from the last Neville update.
pub fn richardson_limit(values: &[c64]) -> (c64, f64) {
    if values.is_empty() {
        return (c64::new(0.0, 0.0), f64::INFINITY);
    }
    if values.len() == 1 {
        return (values[0], f64::INFINITY);
    }
    let table = richardson_table(values);
    let last = table.last().unwrap();
    let best = *last.last().unwrap();
    let prev = last[last.len() - 2];
    (best, (best - prev).norm())
}

/// Cheap reciprocal 1-norm condition estimate of a dense matrix, by two
/// rounds of inverse power iteration on AᴴA.
pub fn dense_rcond(a: &Mat<c64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    let norm1 = (0..n)
        .map(|c| (0..n).map(|r| a[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let lu = a.partial_piv_lu();
    let mut x: Vec<c64> = (0..n)
        .map(|i| {
            let s = ((i as f64 + 1.0) * 12.9898).sin() * 43758.5453;
            c64::new(s - s.floor() - 0.5, (s * 1.3).sin())
        })
        .collect();
    let mut sigma_inv = 0.0;
    for _ in 0..2 {
        let nx = norm2(&x);
        if nx == 0.0 {
            return 1.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let b = Mat::from_fn(n, 1, |i, _| x[i]);
        let y = lu.solve(&b);
        let yc = Mat::from_fn(n, 1, |i, _| y[(i, 0)].conj());
        let z = lu.solve_transpose(&yc);
        x = (0..n).map(|i| z[(i, 0)].conj()).collect();
        sigma_inv = norm2(&x).sqrt();
    }
    1.0 / (sigma_inv.max(1e-300) * norm1.max(1e-300))
}

/// Least-squares slope of log(err) against log(param): the observed
/// convergence order. Pairs with non-positive entries are skipped.
pub fn loglog_slope(pairs: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(p, e)| *p > 0.0 && *e > 0.0)
        .map(|(p, e)| (p.ln(), e.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let sx: f64 = pts.iter().map(|(x, _)| x).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
