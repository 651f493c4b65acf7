//! Mixed-state dynamics in the Bloch ball.
//!
//! For two identical copies of `ρ = ½(𝟙 + uσx + vσy + wσz)`, the CNOT +
//! post-selection round squares the matrix entries of `ρ` and renormalizes
//! (the map `S`). Following it with `U_L` gives the Bloch-ball map
//!
//! ```text
//! M_L(u, v, w) = ((u² − v²)/(1 + w²), 2w/(1 + w²), −2uv/(1 + w²))
//! ```
//!
//! which agrees with `f_L` on the unit sphere and has the completely mixed
//! state at the origin as a superattracting fixed point.

use std::fmt;

use nalgebra::{Matrix2, Matrix3};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::riemann::{bloch_from_z, find_pure_cycles};

/// How far outside the unit ball an input may sit before it is rejected.
pub const BALL_SLACK: f64 = 1e-9;

/// Bloch coordinates `(u, v, w)` of a qubit state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BlochVector {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl BlochVector {
    pub const ORIGIN: BlochVector = BlochVector {
        u: 0.0,
        v: 0.0,
        w: 0.0,
    };

    pub const fn new(u: f64, v: f64, w: f64) -> Self {
        BlochVector { u, v, w }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.u * self.u + self.v * self.v + self.w * self.w
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `tr ρ² = (1 + |b|²)/2`.
    pub fn purity(&self) -> f64 {
        0.5 * (1.0 + self.norm_sqr())
    }

    pub fn distance(&self, other: &BlochVector) -> f64 {
        let (du, dv, dw) = (self.u - other.u, self.v - other.v, self.w - other.w);
        (du * du + dv * dv + dw * dw).sqrt()
    }

    pub fn scale(&self, factor: f64) -> BlochVector {
        BlochVector::new(self.u * factor, self.v * factor, self.w * factor)
    }

    /// Returns `self` if it lies in the closed unit ball up to [`BALL_SLACK`].
    pub fn validated(self) -> Result<Self> {
        let norm = self.norm();
        if norm.is_finite() && norm <= 1.0 + BALL_SLACK {
            Ok(self)
        } else {
            Err(Error::OutsideBall { norm })
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.u, self.v, self.w]
    }
}

impl fmt::Display for BlochVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "({:.*}, {:.*}, {:.*})", p, self.u, p, self.v, p, self.w),
            None => write!(f, "({}, {}, {})", self.u, self.v, self.w),
        }
    }
}

/// A qubit density matrix `[[ρ11, ρ12], [ρ12*, ρ22]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityMatrix2 {
    pub rho11: f64,
    pub rho22: f64,
    pub rho12: Complex64,
}

impl DensityMatrix2 {
    /// Builds `ρ / tr ρ` from unnormalized entries.
    pub fn normalized(rho11: f64, rho22: f64, rho12: Complex64) -> Self {
        let trace = rho11 + rho22;
        DensityMatrix2 {
            rho11: rho11 / trace,
            rho22: rho22 / trace,
            rho12: rho12 / trace,
        }
    }

    /// Reads a Hermitian 2×2 matrix, taking `m[(0, 1)]` as the coherence.
    pub fn from_matrix(m: &Matrix2<Complex64>) -> Self {
        DensityMatrix2::normalized(m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)])
    }

    pub fn to_matrix(&self) -> Matrix2<Complex64> {
        Matrix2::new(
            Complex64::new(self.rho11, 0.0),
            self.rho12,
            self.rho12.conj(),
            Complex64::new(self.rho22, 0.0),
        )
    }

    pub fn trace(&self) -> f64 {
        self.rho11 + self.rho22
    }

    pub fn determinant(&self) -> f64 {
        self.rho11 * self.rho22 - self.rho12.norm_sqr()
    }

    pub fn purity(&self) -> f64 {
        self.rho11 * self.rho11 + self.rho22 * self.rho22 + 2.0 * self.rho12.norm_sqr()
    }

    /// Positive semidefinite up to `-1e-12` slack in the determinant.
    pub fn is_physical(&self) -> bool {
        self.rho11 >= 0.0 && self.rho22 >= 0.0 && self.determinant() >= -1e-12
    }
}

/// `ρ = ½(𝟙 + uσx + vσy + wσz)`.
pub fn density_from_bloch(b: &BlochVector) -> Result<DensityMatrix2> {
    let b = b.validated()?;
    Ok(DensityMatrix2 {
        rho11: 0.5 * (1.0 + b.w),
        rho22: 0.5 * (1.0 - b.w),
        rho12: Complex64::new(0.5 * b.u, -0.5 * b.v),
    })
}

pub fn bloch_from_density(rho: &DensityMatrix2) -> BlochVector {
    BlochVector::new(
        2.0 * rho.rho12.re,
        -2.0 * rho.rho12.im,
        rho.rho11 - rho.rho22,
    )
}

/// The squaring step `S`: entrywise squares renormalized by `ρ11² + ρ22²`.
///
/// Also returns the post-selection probability `ρ11² + ρ22²` (for unit
/// trace), which lies in `[1/2, 1]`.
pub fn squaring_s(rho: &DensityMatrix2) -> (DensityMatrix2, f64) {
    let a = rho.rho11 * rho.rho11;
    let d = rho.rho22 * rho.rho22;
    let p = a + d;
    let out = DensityMatrix2 {
        rho11: a / p,
        rho22: d / p,
        rho12: rho.rho12 * rho.rho12 / p,
    };
    let trace = rho.trace();
    (out, p / (trace * trace))
}

/// One round of the protocol on the Bloch ball.
pub fn apply_ml(b: &BlochVector) -> BlochVector {
    let a = 1.0 + b.w * b.w;
    BlochVector::new(
        (b.u * b.u - b.v * b.v) / a,
        2.0 * b.w / a,
        -2.0 * b.u * b.v / a,
    )
}

pub fn compose_ml(mut b: BlochVector, n: usize) -> BlochVector {
    for _ in 0..n {
        b = apply_ml(&b);
    }
    b
}

/// `[b, M_L(b), …, M_L^n(b)]`.
pub fn iterate_ml(b: BlochVector, n: usize) -> Vec<BlochVector> {
    std::iter::successors(Some(b), |b| Some(apply_ml(b)))
        .take(n + 1)
        .collect()
}

/// The two right inverses of [`apply_ml`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Preimage with `u ≥ 0`.
    Plus,
    /// Preimage with `u ≤ 0`; the negation of the `Plus` preimage in `(u, v)`.
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Preimage of `t` under [`apply_ml`] on the chosen branch.
///
/// `w` solves `V = 2w/(1 + w²)` in the rationalized form `V/(1 + √(1 − V²))`,
/// which is regular at `V = 0`. The pair `(u, v)` satisfies
/// `(u + iv)² = (1 + w²)(U − iW)`; the larger of `|u|`, `|v|` is taken from a
/// cancellation-free square root and the other from `uv = −W(1 + w²)/2`.
/// When `W = 0` and `U ≤ 0` the plus branch returns `v = −√(−U(1 + w²))` and
/// the minus branch its negation.
pub fn inverse_ml(t: &BlochVector, branch: Branch) -> BlochVector {
    let BlochVector {
        u: cu,
        v: cv,
        w: cw,
    } = *t;
    let w = cv / (1.0 + (1.0 - cv * cv).max(0.0).sqrt());
    let a = 1.0 + w * w;
    let r = cu.hypot(cw);
    let (u, v) = if cu >= 0.0 {
        let u = (0.5 * a * (r + cu)).sqrt();
        let v = if u > 0.0 { -cw * a / (2.0 * u) } else { 0.0 };
        (u, v)
    } else {
        let big = (0.5 * a * (r - cu)).sqrt();
        let v = if cw < 0.0 { big } else { -big };
        let u = cw.abs() * a / (2.0 * big);
        (u, v)
    };
    let s = branch.sign();
    BlochVector::new(s * u, s * v, w)
}

pub fn inverse_m_plus(t: &BlochVector) -> BlochVector {
    inverse_ml(t, Branch::Plus)
}

pub fn inverse_m_minus(t: &BlochVector) -> BlochVector {
    inverse_ml(t, Branch::Minus)
}

/// A periodic cycle of [`apply_ml`].
#[derive(Clone, Debug, Serialize)]
pub struct MixedCycle {
    pub label: &'static str,
    pub points: Vec<BlochVector>,
    pub period: usize,
    /// Largest Euclidean gap between `M_L(points[k])` and `points[k+1]`.
    pub residual: f64,
}

impl MixedCycle {
    pub fn new(label: &'static str, points: Vec<BlochVector>) -> Self {
        let period = points.len();
        let residual = (0..period)
            .map(|k| apply_ml(&points[k]).distance(&points[(k + 1) % period]))
            .fold(0.0, f64::max);
        MixedCycle {
            label,
            points,
            period,
            residual,
        }
    }
}

/// `C0` (the completely mixed state) followed by the Bloch images of the
/// pure cycles of `f_L` with period at most `max_period`.
pub fn find_mixed_cycles(max_period: usize) -> Result<Vec<MixedCycle>> {
    let pure = find_pure_cycles(max_period)?;
    let labels = ["C1", "C2", "C3", "C4"];
    let mut cycles = vec![MixedCycle::new("C0", vec![BlochVector::ORIGIN])];
    cycles.extend(pure.iter().zip(labels).map(|(c, label)| {
        MixedCycle::new(label, c.points.iter().map(|&z| bloch_from_z(z)).collect())
    }));
    Ok(cycles)
}

/// Analytic Jacobian of [`apply_ml`], rows `(U, V, W)`, columns `(u, v, w)`.
pub fn jacobian_at(b: &BlochVector) -> Matrix3<f64> {
    let BlochVector { u, v, w } = *b;
    let a = 1.0 + w * w;
    let a2 = a * a;
    Matrix3::new(
        2.0 * u / a,
        -2.0 * v / a,
        -2.0 * w * (u * u - v * v) / a2,
        0.0,
        0.0,
        2.0 * (1.0 - w * w) / a2,
        -2.0 * v / a,
        -2.0 * u / a,
        4.0 * u * v * w / a2,
    )
}

/// Largest eigenvalue modulus of a real 3×3 matrix.
pub fn spectral_radius(m: &Matrix3<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}
