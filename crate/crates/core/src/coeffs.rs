//! Coefficient fields, smooth cutoffs and the built-in example problems.
//!
//! All material data of the model Δu + k²(n+q)u = f lives here: the
//! 1-periodic refractive index n, the compactly supported perturbation q
//! and source f, the C⁴ cutoff ζ used to build them, and the monotone
//! ramps ψ± that weight outgoing modes in the decomposition method.

use std::sync::Arc;

use crate::{Error, Result};

/// Ω₀ = (−1/2, 1/2) × (0, 1), the unit periodicity cell.
pub const CELL_X1_MIN: f64 = -0.5;
/// Right edge of the unit cell.
pub const CELL_X1_MAX: f64 = 0.5;

/// Smooth cutoff: 1 for t ≤ a, 0 for t ≥ b, with a quartic-zero blend in
/// between, so it is C⁴ at both joins.
///
/// On (a, b) it equals 1 − P(s)/P(1) with s = (t−a)/(b−a) and
/// P(s) = ∫₀ˢ u⁴(u−1)⁴ du, which has P(1) = 1/630.
pub fn cutoff_zeta(t: f64, a: f64, b: f64) -> Result<f64> {
    if a >= b {
        return Err(Error::InvalidInterval { a, b });
    }
    if t <= a {
        return Ok(1.0);
    }
    if t >= b {
        return Ok(0.0);
    }
    let s = (t - a) / (b - a);
    // Antiderivative of u⁴(u−1)⁴ = u⁸ − 4u⁷ + 6u⁶ − 4u⁵ + u⁴.
    let p = |s: f64| {
        s.powi(9) / 9.0 - s.powi(8) / 2.0 + 6.0 * s.powi(7) / 7.0 - 2.0 * s.powi(6) / 3.0
            + s.powi(5) / 5.0
    };
    Ok(1.0 - p(s) * 630.0)
}

/// Direction selector for the outgoing-mode ramps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RampSign {
    /// ψ⁺: ramps 0→1 on [1/2, 3/2], weights rightward modes.
    Plus,
    /// ψ⁻(x₁) = ψ⁺(−x₁), weights leftward modes.
    Minus,
}

/// Smooth monotone ramp built from [`cutoff_zeta`]: ψ⁺ = 1 − ζ(x₁; 1/2, 3/2).
pub fn ramp_psi(x1: f64, sign: RampSign) -> f64 {
    let t = match sign {
        RampSign::Plus => x1,
        RampSign::Minus => -x1,
    };
    1.0 - cutoff_zeta(t, 0.5, 1.5).expect("fixed valid interval")
}

/// First derivative of ψ^sign.
pub fn ramp_psi_d1(x1: f64, sign: RampSign) -> f64 {
    let (t, chain) = match sign {
        RampSign::Plus => (x1, 1.0),
        RampSign::Minus => (-x1, -1.0),
    };
    if !(0.5..=1.5).contains(&t) {
        return 0.0;
    }
    // d/dt [1 − ζ] = 630 s⁴(s−1)⁴ / (b−a), s = t − 1/2 here since b−a = 1.
    let s = t - 0.5;
    chain * 630.0 * s.powi(4) * (s - 1.0).powi(4)
}

/// Second derivative of ψ^sign.
pub fn ramp_psi_d2(x1: f64, sign: RampSign) -> f64 {
    let t = match sign {
        RampSign::Plus => x1,
        RampSign::Minus => -x1,
    };
    if !(0.5..=1.5).contains(&t) {
        return 0.0;
    }
    let s = t - 0.5;
    // chain² = 1 for both signs.
    630.0 * (4.0 * s.powi(3) * (s - 1.0).powi(4) + 4.0 * s.powi(4) * (s - 1.0).powi(3))
}

/// A real scalar field on the strip, with optional periodicity and
/// compact-support metadata.
#[derive(Clone)]
pub struct CoefficientField {
    evaluator: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    /// True if the field is 1-periodic in x₁.
    pub periodic_in_x1: bool,
    /// Axis-aligned box [x1_min, x1_max, x2_min, x2_max] outside of which
    /// the field vanishes, when compactly supported.
    pub support_box: Option<[f64; 4]>,
}

impl CoefficientField {
    /// Wraps a closure as a field.
    pub fn new(
        evaluator: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        periodic_in_x1: bool,
        support_box: Option<[f64; 4]>,
    ) -> Self {
        Self {
            evaluator: Arc::new(evaluator),
            periodic_in_x1,
            support_box,
        }
    }

    /// The constant field with the given value.
    pub fn constant(value: f64) -> Self {
        Self::new(move |_, _| value, true, None)
    }

    /// The zero field (compactly supported with empty support).
    pub fn zero() -> Self {
        Self::new(|_, _| 0.0, false, Some([0.0, 0.0, 0.0, 0.0]))
    }

    /// Evaluates the field; periodic fields wrap x₁ into the unit cell first.
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let x1 = if self.periodic_in_x1 {
            x1 - (x1 - CELL_X1_MIN).floor()
        } else {
            x1
        };
        if let Some([a, b, c, d]) = self.support_box {
            if x1 < a || x1 > b || x2 < c || x2 > d {
                return 0.0;
            }
        }
        (self.evaluator)(x1, x2)
    }

    /// Radially blended bump: `plateau` within `r_in` of `center`,
    /// `ambient` beyond `r_out`, cutoff blend between.
    pub fn radial_bump(center: [f64; 2], r_in: f64, r_out: f64, plateau: f64, ambient: f64) -> Self {
        let support = if ambient == 0.0 {
            Some([
                center[0] - r_out,
                center[0] + r_out,
                center[1] - r_out,
                center[1] + r_out,
            ])
        } else {
            None
        };
        Self::new(
            move |x1, x2| {
                let r = ((x1 - center[0]).powi(2) + (x2 - center[1]).powi(2)).sqrt();
                let z = cutoff_zeta(r, r_in, r_out).expect("fixed valid interval");
                ambient + (plateau - ambient) * z
            },
            false,
            support,
        )
    }
}

/// Boundary condition on the strip walls Σ±.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bc {
    /// ∂u/∂x₂ = 0 on both walls.
    Neumann,
    /// u = 0 on both walls.
    Dirichlet,
}

impl Bc {
    /// Parses "neumann" or "dirichlet".
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "neumann" => Ok(Bc::Neumann),
            "dirichlet" => Ok(Bc::Dirichlet),
            other => Err(Error::Config(format!("unknown bc: {other}"))),
        }
    }
}

/// Full problem data for Δu + k²(n+q)u = f.
#[derive(Clone)]
pub struct ScatteringProblem {
    /// Wavenumber k > 0.
    pub k: f64,
    /// 1-periodic refractive index.
    pub n: CoefficientField,
    /// Compactly supported index perturbation (support inside Ω₀).
    pub q: CoefficientField,
    /// Compactly supported source (support inside Ω₀).
    pub f: CoefficientField,
    /// Wall boundary condition.
    pub bc: Bc,
}

impl ScatteringProblem {
    /// k².
    pub fn k_squared(&self) -> f64 {
        self.k * self.k
    }

    /// Checks n > 0 and n + q > 0 on a dense sample grid of the unit cell.
    pub fn validate_positivity(&self, samples: usize) -> Result<()> {
        let mut min_n = (f64::INFINITY, 0.0, 0.0);
        let mut min_nq = (f64::INFINITY, 0.0, 0.0);
        for i in 0..samples {
            for j in 0..samples {
                let x1 = CELL_X1_MIN + (i as f64 + 0.5) / samples as f64;
                let x2 = (j as f64 + 0.5) / samples as f64;
                let n = self.n.eval(x1, x2);
                let nq = n + self.q.eval(x1, x2);
                if n < min_n.0 {
                    min_n = (n, x1, x2);
                }
                if nq < min_nq.0 {
                    min_nq = (nq, x1, x2);
                }
            }
        }
        if min_n.0 <= 0.0 {
            return Err(Error::NonPositiveCoefficient {
                name: "n",
                min: min_n.0,
                x1: min_n.1,
                x2: min_n.2,
            });
        }
        if min_nq.0 <= 0.0 {
            return Err(Error::NonPositiveCoefficient {
                name: "n + q",
                min: min_nq.0,
                x1: min_nq.1,
                x2: min_nq.2,
            });
        }
        Ok(())
    }
}

/// Built-in example problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExampleId {
    /// Radially bumped index (1 up to 9), k² = 17.
    Example1,
    /// Sinusoidal index 3 + sin(4πx₁), k² = 12.
    Example2,
    /// Bumped index with q = 0 and k² = 3.2 (exponentially decaying field,
    /// starting point of the trapped-mode construction).
    Remark2,
}

impl ExampleId {
    /// Parses "1"/"example1", "2"/"example2", "remark2".
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "1" | "example1" => Ok(ExampleId::Example1),
            "2" | "example2" => Ok(ExampleId::Example2),
            "remark2" => Ok(ExampleId::Remark2),
            other => Err(Error::UnknownExample(other.to_string())),
        }
    }
}

/// Center of the index/source bump.
const A0: [f64; 2] = [0.0, 0.5];
/// Center of the perturbation bump.
const B0: [f64; 2] = [0.2, 0.2];

fn bumped_index() -> CoefficientField {
    let bump = CoefficientField::radial_bump(A0, 0.1, 0.3, 9.0, 1.0);
    CoefficientField::new(move |x1, x2| bump.eval(x1, x2), true, None)
}

fn example_source() -> CoefficientField {
    CoefficientField::radial_bump(A0, 0.1, 0.3, 0.5, 0.0)
}

fn example_perturbation() -> CoefficientField {
    CoefficientField::radial_bump(B0, 0.1, 0.15, 2.0, 0.0)
}

/// Returns one of the built-in problems.
pub fn example_problem(id: ExampleId) -> ScatteringProblem {
    match id {
        ExampleId::Example1 => ScatteringProblem {
            k: 17.0_f64.sqrt(),
            n: bumped_index(),
            q: example_perturbation(),
            f: example_source(),
            bc: Bc::Neumann,
        },
        ExampleId::Example2 => ScatteringProblem {
            k: 12.0_f64.sqrt(),
            n: CoefficientField::new(
                |x1, _| 3.0 + (4.0 * std::f64::consts::PI * x1).sin(),
                true,
                None,
            ),
            q: example_perturbation(),
            f: example_source(),
            bc: Bc::Neumann,
        },
        ExampleId::Remark2 => ScatteringProblem {
            k: 3.2_f64.sqrt(),
            n: bumped_index(),
            q: CoefficientField::zero(),
            f: example_source(),
            bc: Bc::Neumann,
        },
    }
}
