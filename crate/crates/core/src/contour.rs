//! Complex quadrature contours for inverting the Floquet-Bloch transform:
//! the indented contour avoiding exceptional quasimomenta, the uniformly
//! shifted line, the smooth reparameterization giving the trapezoidal rule
//! super-algebraic accuracy, and the trigonometric interpolation grid.

use std::f64::consts::PI;

use crate::c64;
use crate::field::FieldOnCell;
use crate::mesh::{CellMesh, PeriodicBasis};
use crate::{Error, Result};

/// Default smoothing order of the endpoint-flattened substitution.
pub const DEFAULT_SMOOTHING_ORDER: u32 = 8;

/// Normalized incomplete-beta step w(t) = ∫₀ᵗ(τ(1−τ))ᵖdτ / ∫₀¹(τ(1−τ))ᵖdτ,
/// evaluated in closed form; strictly increasing with p-th order flat ends.
pub fn smooth_step(t: f64, p: u32) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    // w(t) = I_t(p+1, p+1) = Σ_{j=p+1}^{2p+1} C(2p+1,j) t^j (1−t)^{2p+1−j}.
    let n = 2 * p + 1;
    let mut sum = 0.0;
    let mut binom = 1.0f64;
    for j in 0..=n {
        if j >= p + 1 {
            sum += binom * t.powi(j as i32) * (1.0 - t).powi((n - j) as i32);
        }
        binom *= (n - j) as f64 / (j + 1) as f64;
    }
    sum
}

/// Derivative of [`smooth_step`]: (t(1−t))ᵖ / B(p+1, p+1).
pub fn smooth_step_deriv(t: f64, p: u32) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    // 1/B(p+1,p+1) = (2p+1)!/(p!)² = (2p+1)·C(2p,p).
    let mut inv_beta = (2 * p + 1) as f64;
    for j in 0..p {
        inv_beta *= (2 * p - j) as f64 / (j + 1) as f64;
    }
    (t * (1.0 - t)).powi(p as i32) * inv_beta
}

/// One smooth piece of a contour, parameterized over [0,1].
#[derive(Clone, Copy, Debug)]
enum Segment {
    /// Straight segment.
    Line { from: c64, to: c64 },
    /// Half circle around a real center; `lower` dips below the real axis.
    Arc {
        center: f64,
        radius: f64,
        lower: bool,
    },
}

impl Segment {
    fn length(&self) -> f64 {
        match self {
            Segment::Line { from, to } => (to - from).norm(),
            Segment::Arc { radius, .. } => PI * radius,
        }
    }

    fn eval(&self, u: f64) -> c64 {
        match *self {
            Segment::Line { from, to } => from + (to - from) * u,
            Segment::Arc {
                center,
                radius,
                lower,
            } => {
                let angle = if lower { PI + PI * u } else { PI - PI * u };
                c64::new(center, 0.0) + radius * (c64::i() * angle).exp()
            }
        }
    }

    fn deriv(&self, u: f64) -> c64 {
        match *self {
            Segment::Line { from, to } => to - from,
            Segment::Arc {
                center: _,
                radius,
                lower,
            } => {
                let angle = if lower { PI + PI * u } else { PI - PI * u };
                let sign = if lower { 1.0 } else { -1.0 };
                c64::i() * sign * PI * radius * (c64::i() * angle).exp()
            }
        }
    }
}

/// A piecewise-smooth quadrature contour with an endpoint-flattened
/// reparameterization on every piece, so the composite map has vanishing
/// derivatives at all knots and the trapezoidal rule converges
/// super-algebraically on analytic 2π-periodic integrands.
#[derive(Clone, Debug)]
pub struct ContourParam {
    segments: Vec<Segment>,
    /// Breakpoints 0 = a₀ < a₁ < … < a_Q = 1 in contour parameter.
    pub knots: Vec<f64>,
    /// Flattening order of the per-segment substitution.
    pub smoothing_order: u32,
}

impl ContourParam {
    fn locate(&self, t: f64) -> (usize, f64, f64) {
        let t = t.clamp(0.0, 1.0);
        let q = self.segments.len();
        let i = self
            .knots
            .windows(2)
            .position(|w| t <= w[1])
            .unwrap_or(q - 1);
        let width = self.knots[i + 1] - self.knots[i];
        ((i), (t - self.knots[i]) / width, width)
    }

    /// The contour point s(t).
    pub fn eval(&self, t: f64) -> c64 {
        let (i, v, _) = self.locate(t);
        self.segments[i].eval(smooth_step(v, self.smoothing_order))
    }

    /// The contour velocity s′(t).
    pub fn deriv(&self, t: f64) -> c64 {
        let (i, v, width) = self.locate(t);
        let u = smooth_step(v, self.smoothing_order);
        self.segments[i].deriv(u) * (smooth_step_deriv(v, self.smoothing_order) / width)
    }

    /// Minimum distance from the sampled contour nodes to a set of real
    /// points.
    pub fn min_distance_to(&self, grid: &TrigGrid, points: &[f64]) -> f64 {
        grid.nodes()
            .flat_map(|t| {
                let s = self.eval(t);
                points
                    .iter()
                    .map(move |&p| (s - c64::new(p, 0.0)).norm())
                    .collect::<Vec<_>>()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn from_segments(segments: Vec<Segment>, p: u32) -> ContourParam {
    let total: f64 = segments.iter().map(Segment::length).sum();
    let mut knots = Vec::with_capacity(segments.len() + 1);
    knots.push(0.0);
    let mut acc = 0.0;
    for s in &segments {
        acc += s.length();
        knots.push(acc / total);
    }
    *knots.last_mut().unwrap() = 1.0;
    ContourParam {
        segments,
        knots,
        smoothing_order: p,
    }
}

/// Default indentation radius: half the minimal gap among the exceptional
/// values and the endpoints ±π, capped at 0.3.
pub fn default_indentation_radius(points: &[f64]) -> f64 {
    let mut all = vec![-PI, PI];
    all.extend_from_slice(points);
    all.sort_by(f64::total_cmp);
    let min_gap = all
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    (0.5 * min_gap).min(0.3)
}

/// Builds the indented contour from −π to π: lower half circles of radius
/// δ around rightward-transport quasimomenta, upper half circles around
/// leftward ones.
pub fn build_cci_contour(
    rightward: &[f64],
    leftward: &[f64],
    delta: f64,
    p: u32,
) -> Result<ContourParam> {
    for &a in rightward {
        if leftward.iter().any(|&b| (a - b).abs() < 1e-9) {
            return Err(Error::ExceptionalOverlap { alpha: a });
        }
    }
    let mut points: Vec<(f64, bool)> = rightward
        .iter()
        .map(|&a| (a, true))
        .chain(leftward.iter().map(|&a| (a, false)))
        .collect();
    points.sort_by(|x, y| x.0.total_cmp(&y.0));
    if points.is_empty() {
        return Ok(from_segments(
            vec![Segment::Line {
                from: c64::new(-PI, 0.0),
                to: c64::new(PI, 0.0),
            }],
            p,
        ));
    }
    if delta <= 0.0 {
        return Err(Error::ContourConfiguration(
            "indentation radius must be positive".into(),
        ));
    }
    for w in points.windows(2) {
        if w[1].0 - w[0].0 <= 2.0 * delta {
            return Err(Error::ContourConfiguration(format!(
                "indentation disks around {:.4} and {:.4} overlap at radius {delta}",
                w[0].0, w[1].0
            )));
        }
    }
    if points[0].0 - delta <= -PI || points.last().unwrap().0 + delta >= PI {
        return Err(Error::ContourConfiguration(format!(
            "indentation of radius {delta} reaches the endpoint quasimomenta ±π"
        )));
    }
    let mut segments = Vec::new();
    let mut cursor = -PI;
    for &(center, dips_down) in &points {
        segments.push(Segment::Line {
            from: c64::new(cursor, 0.0),
            to: c64::new(center - delta, 0.0),
        });
        segments.push(Segment::Arc {
            center,
            radius: delta,
            lower: dips_down,
        });
        cursor = center + delta;
    }
    segments.push(Segment::Line {
        from: c64::new(cursor, 0.0),
        to: c64::new(PI, 0.0),
    });
    Ok(from_segments(segments, p))
}

/// Builds the uniformly shifted line −π + 2π·w(t) + iσ.
pub fn build_shifted_line(sigma: f64, p: u32) -> Result<ContourParam> {
    if sigma <= 0.0 {
        return Err(Error::ContourConfiguration(format!(
            "line shift must be positive, got {sigma}"
        )));
    }
    Ok(from_segments(
        vec![Segment::Line {
            from: c64::new(-PI, sigma),
            to: c64::new(PI, sigma),
        }],
        p,
    ))
}

/// Uniform quadrature grid t_ℓ = ℓ/N with weight 1/N, carrying the
/// trigonometric cardinal basis of degree N.
#[derive(Clone, Copy, Debug)]
pub struct TrigGrid {
    /// Number of nodes; even.
    pub n: usize,
}

impl TrigGrid {
    /// Builds a grid; N must be even and ≥ 4.
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::Config(format!(
                "quadrature count must be even and at least 4, got {n}"
            )));
        }
        Ok(Self { n })
    }

    /// The node parameters ℓ/N for ℓ = 1..N.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        (1..=n).map(move |l| l as f64 / n as f64)
    }

    /// The quadrature weight per node.
    pub fn weight(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// The cardinal basis function ξ_ℓ(t) = (1/N)Σ_m e^{i2πm(t−t_ℓ)} with
    /// m ∈ {−N/2, …, N/2−1}; ℓ is 1-based.
    pub fn xi(&self, ell: usize, t: f64) -> c64 {
        let n = self.n as i64;
        let dt = t - ell as f64 / self.n as f64;
        let mut sum = c64::new(0.0, 0.0);
        for m in -n / 2..n / 2 {
            sum += (c64::i() * (2.0 * PI * m as f64 * dt)).exp();
        }
        sum / self.n as f64
    }
}

/// Inverts the discrete transform on cell `cell_index`: nodal values
/// û_j = (1/(2πN)) Σ_ℓ e^{i s(t_ℓ)(x₁(j)+c)} ŵ_{ℓ,j}, the rows carrying
/// the contour derivative already.
pub fn reconstruct_field(
    rows: &[Vec<c64>],
    contour: &ContourParam,
    grid: &TrigGrid,
    mesh: &CellMesh,
    basis: &PeriodicBasis,
    cell_index: i32,
) -> Result<FieldOnCell> {
    if rows.len() != grid.n || rows.iter().any(|r| r.len() != basis.m_prime) {
        return Err(Error::DimensionMismatch("transform rows must be N x M-prime".into()));
    }
    let w = grid.weight() / (2.0 * PI);
    let mut out = FieldOnCell::zeros(basis.m_prime);
    for (row, t) in rows.iter().zip(grid.nodes()) {
        let s = contour.eval(t);
        for (j, v) in row.iter().enumerate() {
            let x1 = basis.dof_x1(mesh, j) + cell_index as f64;
            out.values[j] += (c64::i() * s * x1).exp() * v * w;
        }
    }
    Ok(out)
}

/// Finitely supported Floquet-Bloch transform of a field living on the
/// cells of `parts`: Σ_c g_c(x) e^{−iα(x₁+c)} as a periodic nodal field.
pub fn bloch_transform_compact(
    parts: &[(i32, &FieldOnCell)],
    mesh: &CellMesh,
    basis: &PeriodicBasis,
    alpha: c64,
) -> Vec<c64> {
    let mut out = vec![c64::new(0.0, 0.0); basis.m_prime];
    for &(c, field) in parts {
        for (j, v) in field.values.iter().enumerate() {
            let x1 = basis.dof_x1(mesh, j) + c as f64;
            out[j] += v * (-c64::i() * alpha * x1).exp();
        }
    }
    out
}
