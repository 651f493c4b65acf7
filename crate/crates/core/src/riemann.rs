//! Pure-state dynamics on the Riemann sphere.
//!
//! A pure qubit `(|0⟩ + z|1⟩)/√(1+|z|²)` is labelled by a point `z` of the
//! extended complex plane. One round of the bare protocol squares `z`; with
//! the `U_L` correction it applies the Lattès map `f_L`.
//!
//! Arithmetic switches to the reciprocal chart `ζ = 1/z` once `|z|` exceeds
//! [`CHART_SWITCH`], so iterating never overflows, and distances are measured
//! with the chordal metric so that `∞` is an ordinary point.

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::bloch::BlochVector;
use crate::error::{Error, Result};

/// Magnitude above which evaluation is carried out in the chart `ζ = 1/z`.
pub const CHART_SWITCH: f64 = 1e8;

/// Multipliers within this distance of the unit circle count as indifferent.
pub const INDIFFERENCE_TOLERANCE: f64 = 1e-9;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A point of `ℂ ∪ {∞}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedComplex {
    Finite(Complex64),
    Infinity,
}

impl ExtendedComplex {
    /// Wraps a complex number. Infinite components collapse onto `∞`.
    ///
    /// Panics on NaN input, which never labels a state.
    pub fn new(z: Complex64) -> Self {
        assert!(!z.is_nan(), "NaN is not a point of the Riemann sphere");
        if z.is_finite() {
            ExtendedComplex::Finite(z)
        } else {
            ExtendedComplex::Infinity
        }
    }

    pub fn from_parts(re: f64, im: f64) -> Self {
        Self::new(Complex64::new(re, im))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedComplex::Infinity)
    }

    pub fn finite(&self) -> Option<Complex64> {
        match *self {
            ExtendedComplex::Finite(z) => Some(z),
            ExtendedComplex::Infinity => None,
        }
    }

    /// `1/z` with `0 ↔ ∞`.
    pub fn recip(self) -> Self {
        match self {
            ExtendedComplex::Infinity => ExtendedComplex::Finite(Complex64::new(0.0, 0.0)),
            ExtendedComplex::Finite(z) if z == Complex64::new(0.0, 0.0) => {
                ExtendedComplex::Infinity
            }
            ExtendedComplex::Finite(z) => quotient(ONE, z),
        }
    }

    /// Chordal distance on the Riemann sphere of diameter 2; bounded by 2.
    pub fn chordal_distance(&self, other: &Self) -> f64 {
        match (*self, *other) {
            (ExtendedComplex::Infinity, ExtendedComplex::Infinity) => 0.0,
            (ExtendedComplex::Finite(z), ExtendedComplex::Infinity)
            | (ExtendedComplex::Infinity, ExtendedComplex::Finite(z)) => {
                2.0 / (1.0 + z.norm_sqr()).sqrt()
            }
            (ExtendedComplex::Finite(a), ExtendedComplex::Finite(b)) => {
                // Compare in the reciprocal chart when both points are large,
                // where |a - b| loses all relative precision.
                if a.norm() > 1.0 && b.norm() > 1.0 {
                    let (ra, rb) = (a.inv(), b.inv());
                    2.0 * (ra - rb).norm()
                        / ((1.0 + ra.norm_sqr()).sqrt() * (1.0 + rb.norm_sqr()).sqrt())
                } else {
                    2.0 * (a - b).norm()
                        / ((1.0 + a.norm_sqr()).sqrt() * (1.0 + b.norm_sqr()).sqrt())
                }
            }
        }
    }
}

impl From<Complex64> for ExtendedComplex {
    fn from(z: Complex64) -> Self {
        Self::new(z)
    }
}

impl fmt::Display for ExtendedComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedComplex::Infinity => write!(f, "inf"),
            ExtendedComplex::Finite(z) => {
                if let Some(p) = f.precision() {
                    write!(f, "{:.*}{:+.*}i", p, z.re, p, z.im)
                } else {
                    write!(f, "{}{:+}i", z.re, z.im)
                }
            }
        }
    }
}

impl Serialize for ExtendedComplex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedComplex::Infinity => s.serialize_str("inf"),
            ExtendedComplex::Finite(z) => [z.re, z.im].serialize(s),
        }
    }
}

fn quotient(num: Complex64, den: Complex64) -> ExtendedComplex {
    if den == Complex64::new(0.0, 0.0) {
        return ExtendedComplex::Infinity;
    }
    let q = num / den;
    // An underflowing denominator makes the division blow up; the numerator
    // is nonzero there, so the true value is huge.
    if q.is_finite() {
        ExtendedComplex::Finite(q)
    } else {
        ExtendedComplex::Infinity
    }
}

/// The bare protocol map `f_0(z) = z²`.
pub fn eval_f0(z: ExtendedComplex) -> ExtendedComplex {
    match z {
        ExtendedComplex::Infinity => ExtendedComplex::Infinity,
        ExtendedComplex::Finite(z) if z.norm() > CHART_SWITCH => {
            let zeta = z.inv();
            quotient(ONE, zeta * zeta)
        }
        ExtendedComplex::Finite(z) => ExtendedComplex::Finite(z * z),
    }
}

/// The Lattès map `f_L(z) = (z² + i)/(i z² + 1)`.
///
/// Total on `ℂ̂`: the poles `z² = i` go to `∞` and `∞` goes to `-i`.
pub fn eval_fl(z: ExtendedComplex) -> ExtendedComplex {
    match z {
        ExtendedComplex::Infinity => ExtendedComplex::Finite(-I),
        ExtendedComplex::Finite(z) if z.norm() > CHART_SWITCH => {
            let zeta = z.inv();
            let zeta2 = zeta * zeta;
            quotient(ONE + I * zeta2, I + zeta2)
        }
        ExtendedComplex::Finite(z) => {
            let z2 = z * z;
            quotient(z2 + I, I * z2 + ONE)
        }
    }
}

/// The forward orbit `[z0, f_L(z0), …, f_L^n(z0)]`.
pub fn iterate_fl(z0: ExtendedComplex, n: usize) -> Vec<ExtendedComplex> {
    std::iter::successors(Some(z0), |&z| Some(eval_fl(z)))
        .take(n + 1)
        .collect()
}

/// `f_L^n(z)`.
pub fn compose_fl(mut z: ExtendedComplex, n: usize) -> ExtendedComplex {
    for _ in 0..n {
        z = eval_fl(z);
    }
    z
}

/// The two preimages `±√((i - w)/(i w - 1))` of `w` under `f_L`.
///
/// The first entry is the principal square root. At the critical value
/// `w = i` both branches coincide at `0`, and at `w = -i` both are `∞`.
pub fn inverse_fl_branches(w: ExtendedComplex) -> (ExtendedComplex, ExtendedComplex) {
    let z2 = match w {
        ExtendedComplex::Infinity => ExtendedComplex::Finite(I),
        ExtendedComplex::Finite(w) if w.norm() > CHART_SWITCH => {
            let omega = w.inv();
            quotient(I * omega - ONE, I - omega)
        }
        ExtendedComplex::Finite(w) => quotient(I - w, I * w - ONE),
    };
    match z2 {
        ExtendedComplex::Infinity => (ExtendedComplex::Infinity, ExtendedComplex::Infinity),
        ExtendedComplex::Finite(z2) => {
            let root = z2.sqrt();
            (
                ExtendedComplex::Finite(root),
                ExtendedComplex::Finite(-root),
            )
        }
    }
}

fn in_reciprocal_chart(z: ExtendedComplex) -> bool {
    match z {
        ExtendedComplex::Infinity => true,
        ExtendedComplex::Finite(z) => z.norm() > 1.0,
    }
}

fn chart_coordinate(z: ExtendedComplex) -> Complex64 {
    match z {
        ExtendedComplex::Infinity => Complex64::new(0.0, 0.0),
        ExtendedComplex::Finite(z) if z.norm() > 1.0 => z.inv(),
        ExtendedComplex::Finite(z) => z,
    }
}

/// Derivative of `f_L` at `z`, expressed in the charts adapted to `z` and
/// `f_L(z)` (identity inside the unit disk, `1/z` outside).
///
/// Chart changes cancel around a closed cycle, so the product of these along
/// a cycle is its multiplier even when the cycle passes through `∞`.
pub fn fl_chart_derivative(z: ExtendedComplex) -> Complex64 {
    let x = chart_coordinate(z);
    let x2 = x * x;
    match (in_reciprocal_chart(z), in_reciprocal_chart(eval_fl(z))) {
        (false, false) => 4.0 * x / ((I * x2 + ONE) * (I * x2 + ONE)),
        (false, true) => -4.0 * x / ((x2 + I) * (x2 + I)),
        (true, false) => -4.0 * x / ((I + x2) * (I + x2)),
        (true, true) => 4.0 * x / ((ONE + I * x2) * (ONE + I * x2)),
    }
}

/// Multiplier `λ = Π f_L'(p_k)` of a periodic cycle.
pub fn cycle_multiplier(points: &[ExtendedComplex]) -> Complex64 {
    points.iter().map(|&p| fl_chart_derivative(p)).product()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Repelling,
    Attracting,
    Indifferent,
}

impl Stability {
    pub fn classify(multiplier: Complex64) -> Self {
        let m = multiplier.norm();
        if m > 1.0 + INDIFFERENCE_TOLERANCE {
            Stability::Repelling
        } else if m < 1.0 - INDIFFERENCE_TOLERANCE {
            Stability::Attracting
        } else {
            Stability::Indifferent
        }
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Repelling => "repelling",
            Stability::Attracting => "attracting",
            Stability::Indifferent => "indifferent",
        })
    }
}

/// A periodic cycle of `f_L`.
#[derive(Clone, Debug, Serialize)]
pub struct PureCycle {
    pub label: &'static str,
    pub points: Vec<ExtendedComplex>,
    pub period: usize,
    pub multiplier: Complex64,
    pub stability: Stability,
    /// Largest chordal gap between `f_L(points[k])` and `points[k+1]`.
    pub residual: f64,
}

impl PureCycle {
    pub fn new(label: &'static str, points: Vec<ExtendedComplex>) -> Self {
        let period = points.len();
        let residual = (0..period)
            .map(|k| eval_fl(points[k]).chordal_distance(&points[(k + 1) % period]))
            .fold(0.0, f64::max);
        let multiplier = cycle_multiplier(&points);
        PureCycle {
            label,
            period,
            multiplier,
            stability: Stability::classify(multiplier),
            residual,
            points,
        }
    }
}

/// All cycles of `f_L` with period at most `max_period` (1 or 2), from their
/// closed-form radicals.
///
/// A degree-2 map has three fixed points and a single 2-cycle, so the list
/// is complete: `c1 = 1`, `c2,3 = ±√((i-2)/2) - (i+1)/2`, and the pair
/// `c4 = ±√((-i-2)/2) + (i-1)/2`.
pub fn find_pure_cycles(max_period: usize) -> Result<Vec<PureCycle>> {
    if max_period == 0 || max_period > 2 {
        return Err(Error::UnsupportedPeriod(max_period));
    }
    let fixed_root = ((I - 2.0) / 2.0).sqrt();
    let fixed_shift = (I + 1.0) / 2.0;
    let pair_root = ((-I - 2.0) / 2.0).sqrt();
    let pair_shift = (I - 1.0) / 2.0;

    let mut cycles = vec![
        PureCycle::new("c1", vec![ExtendedComplex::Finite(ONE)]),
        PureCycle::new(
            "c2",
            vec![ExtendedComplex::Finite(fixed_root - fixed_shift)],
        ),
        PureCycle::new(
            "c3",
            vec![ExtendedComplex::Finite(-fixed_root - fixed_shift)],
        ),
    ];
    if max_period >= 2 {
        cycles.push(PureCycle::new(
            "c4",
            vec![
                ExtendedComplex::Finite(pair_root + pair_shift),
                ExtendedComplex::Finite(-pair_root + pair_shift),
            ],
        ));
    }
    Ok(cycles)
}

/// Bloch vector of the pure state labelled by `z`; always on the unit sphere.
pub fn bloch_from_z(z: ExtendedComplex) -> BlochVector {
    match z {
        ExtendedComplex::Infinity => BlochVector::new(0.0, 0.0, -1.0),
        ExtendedComplex::Finite(z) if z.norm() > 1.0 => {
            let zeta = z.inv();
            let n = 1.0 + zeta.norm_sqr();
            BlochVector::new(
                2.0 * zeta.re / n,
                -2.0 * zeta.im / n,
                (zeta.norm_sqr() - 1.0) / n,
            )
        }
        ExtendedComplex::Finite(z) => {
            let n = 1.0 + z.norm_sqr();
            BlochVector::new(2.0 * z.re / n, 2.0 * z.im / n, (1.0 - z.norm_sqr()) / n)
        }
    }
}

/// Label of the pure state along the direction of `b`. `None` for the origin.
pub fn z_from_bloch(b: &BlochVector) -> Option<ExtendedComplex> {
    let r = b.norm();
    if r == 0.0 {
        return None;
    }
    let (u, v, w) = (b.u / r, b.v / r, b.w / r);
    if w >= 0.0 {
        Some(ExtendedComplex::Finite(Complex64::new(u, v) / (1.0 + w)))
    } else {
        Some(quotient(
            Complex64::new(1.0 - w, 0.0),
            Complex64::new(u, -v),
        ))
    }
}
