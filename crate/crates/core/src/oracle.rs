//! Brute-force simulation of one protocol round on the full two-qubit state.
//!
//! The round never touches the closed-form maps: it is built from the CNOT
//! matrix, the projector onto target `|0⟩`, a partial trace and the
//! correcting unitary, so it serves as an independent check of
//! [`eval_fl`](crate::riemann::eval_fl), [`squaring_s`](crate::bloch::squaring_s)
//! and [`apply_ml`](crate::bloch::apply_ml). [`oracle_sweep`] runs that check.
//!
//! Qubit order is `|control, target⟩`; basis index `2·control + target`.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bloch::{apply_ml, bloch_from_density, density_from_bloch, squaring_s, DensityMatrix2};
use crate::error::{Error, Result};
use crate::experiments::{sample_ball_uniform, sample_rng};
use crate::riemann::{bloch_from_z, eval_f0, eval_fl, z_from_bloch, ExtendedComplex};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A 2×2 unitary applied to the surviving qubit after post-selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleQubitUnitary(Matrix2<Complex64>);

impl SingleQubitUnitary {
    pub const UNITARITY_TOLERANCE: f64 = 1e-14;

    pub fn new(m: Matrix2<Complex64>) -> Result<Self> {
        let defect = (m.adjoint() * m - Matrix2::identity())
            .iter()
            .map(|e| e.norm())
            .fold(0.0, f64::max);
        if defect > Self::UNITARITY_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "matrix is not unitary (|U†U - 1| = {defect:e})"
            )));
        }
        Ok(SingleQubitUnitary(m))
    }

    pub fn identity() -> Self {
        SingleQubitUnitary(Matrix2::identity())
    }

    /// `U_L = (1/√2) [[1, i], [i, 1]]`.
    pub fn lattes() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        SingleQubitUnitary(Matrix2::new(
            Complex64::new(s, 0.0),
            Complex64::new(0.0, s),
            Complex64::new(0.0, s),
            Complex64::new(s, 0.0),
        ))
    }

    pub fn matrix(&self) -> &Matrix2<Complex64> {
        &self.0
    }
}

/// Joint state of the control/target pair.
#[derive(Clone, Debug, PartialEq)]
pub enum TwoQubitState {
    Pure(Vector4<Complex64>),
    Mixed(Matrix4<Complex64>),
}

impl TwoQubitState {
    /// Two independent copies of a single-qubit pure state.
    pub fn pure_pair(psi: &Vector2<Complex64>) -> Self {
        TwoQubitState::Pure(psi.kronecker(psi))
    }

    /// `ρ ⊗ ρ`.
    pub fn mixed_pair(rho: &Matrix2<Complex64>) -> Self {
        TwoQubitState::Mixed(rho.kronecker(rho))
    }

    /// Squared norm (pure) or trace (mixed).
    pub fn weight(&self) -> f64 {
        match self {
            TwoQubitState::Pure(psi) => psi.norm_squared(),
            TwoQubitState::Mixed(rho) => rho.trace().re,
        }
    }

    /// Conjugation (or multiplication) by a two-qubit operator.
    pub fn apply(&self, op: &Matrix4<Complex64>) -> Self {
        match self {
            TwoQubitState::Pure(psi) => TwoQubitState::Pure(op * psi),
            TwoQubitState::Mixed(rho) => TwoQubitState::Mixed(op * rho * op.adjoint()),
        }
    }

    /// Largest entry of `ρ − ρ†`; zero for pure states.
    pub fn hermiticity_defect(&self) -> f64 {
        match self {
            TwoQubitState::Pure(_) => 0.0,
            TwoQubitState::Mixed(rho) => (rho - rho.adjoint())
                .iter()
                .map(|e| e.norm())
                .fold(0.0, f64::max),
        }
    }
}

/// CNOT with the first factor as control.
pub fn cnot() -> Matrix4<Complex64> {
    Matrix4::new(
        ONE, ZERO, ZERO, ZERO, //
        ZERO, ONE, ZERO, ZERO, //
        ZERO, ZERO, ZERO, ONE, //
        ZERO, ZERO, ONE, ZERO,
    )
}

/// `𝟙 ⊗ |0⟩⟨0|`.
pub fn target_zero_projector() -> Matrix4<Complex64> {
    let keep = Matrix2::new(ONE, ZERO, ZERO, ZERO);
    Matrix2::<Complex64>::identity().kronecker(&keep)
}

pub fn partial_trace_target(rho: &Matrix4<Complex64>) -> Matrix2<Complex64> {
    Matrix2::from_fn(|i, j| rho[(2 * i, 2 * j)] + rho[(2 * i + 1, 2 * j + 1)])
}

/// Unit-norm amplitudes of the state labelled by `z`, up to global phase.
pub fn amplitudes(z: ExtendedComplex) -> Vector2<Complex64> {
    let (a, b) = match z {
        ExtendedComplex::Infinity => (ZERO, ONE),
        ExtendedComplex::Finite(z) if z.norm() > 1.0 => (z.inv(), ONE),
        ExtendedComplex::Finite(z) => (ONE, z),
    };
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    Vector2::new(a / n, b / n)
}

fn label_of(psi: &Vector2<Complex64>) -> ExtendedComplex {
    if psi[0] == ZERO {
        ExtendedComplex::Infinity
    } else {
        ExtendedComplex::new(psi[1] / psi[0])
    }
}

/// Post-selected two-qubit state before renormalization.
fn post_selected(pair: &TwoQubitState) -> Result<(TwoQubitState, f64)> {
    let out = pair.apply(&cnot()).apply(&target_zero_projector());
    let p = out.weight();
    if p > 0.0 {
        Ok((out, p))
    } else {
        Err(Error::Discarded)
    }
}

/// One round on two copies of the pure state `z`: CNOT, keep target `0`,
/// renormalize, apply `post`. Returns the survivor's label and the
/// post-selection probability `(1 + |z|⁴)/(1 + |z|²)²`.
pub fn oracle_step_pure(
    z: ExtendedComplex,
    post: &SingleQubitUnitary,
) -> Result<(ExtendedComplex, f64)> {
    let (out, p) = post_selected(&TwoQubitState::pure_pair(&amplitudes(z)))?;
    let TwoQubitState::Pure(joint) = out else {
        unreachable!("pure input stays pure")
    };
    let control = Vector2::new(joint[0], joint[2]).unscale(p.sqrt());
    Ok((label_of(&(post.matrix() * control)), p))
}

/// One round on the full density matrix, returning the survivor's 2×2 matrix.
pub fn oracle_step_matrix(
    rho: &Matrix2<Complex64>,
    post: &SingleQubitUnitary,
) -> Result<(Matrix2<Complex64>, f64)> {
    let (out, p) = post_selected(&TwoQubitState::mixed_pair(rho))?;
    let TwoQubitState::Mixed(joint) = out else {
        unreachable!("mixed input stays mixed")
    };
    let reduced = partial_trace_target(&joint).unscale(p);
    let u = post.matrix();
    Ok((u * reduced * u.adjoint(), p))
}

/// One round on two copies of `rho`: `ρ⊗ρ`, CNOT, project the target onto
/// `|0⟩`, trace it out, renormalize, conjugate by `post`.
pub fn oracle_step_mixed(
    rho: &DensityMatrix2,
    post: &SingleQubitUnitary,
) -> Result<(DensityMatrix2, f64)> {
    let (m, p) = oracle_step_matrix(&rho.to_matrix(), post)?;
    Ok((DensityMatrix2::from_matrix(&m), p))
}

/// Largest disagreement between the oracle and the closed-form maps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct OracleReport {
    pub samples: u64,
    /// Chordal distance, oracle without correction vs `f_0`.
    pub pure_f0: f64,
    /// Chordal distance, oracle with `U_L` vs `f_L`.
    pub pure_fl: f64,
    /// Largest entry difference, oracle without correction vs `S`.
    pub mixed_s: f64,
    /// Euclidean Bloch distance, oracle with `U_L` vs `M_L`.
    pub mixed_ml: f64,
    /// Largest gap between the success probabilities of the pure oracle
    /// and the mixed oracle fed the corresponding projector.
    pub success_gap: f64,
}

impl OracleReport {
    pub fn max_deviation(&self) -> f64 {
        [
            self.pure_f0,
            self.pure_fl,
            self.mixed_s,
            self.mixed_ml,
            self.success_gap,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn merge(self, other: Self) -> Self {
        OracleReport {
            samples: self.samples + other.samples,
            pure_f0: self.pure_f0.max(other.pure_f0),
            pure_fl: self.pure_fl.max(other.pure_fl),
            mixed_s: self.mixed_s.max(other.mixed_s),
            mixed_ml: self.mixed_ml.max(other.mixed_ml),
            success_gap: self.success_gap.max(other.success_gap),
        }
    }
}

fn density_gap(a: &DensityMatrix2, b: &DensityMatrix2) -> f64 {
    (a.rho11 - b.rho11)
        .abs()
        .max((a.rho22 - b.rho22).abs())
        .max((a.rho12 - b.rho12).norm())
}

fn compare_one(seed: u64, index: u64) -> Result<OracleReport> {
    let mut rng = sample_rng(seed, index);
    let identity = SingleQubitUnitary::identity();
    let lattes = SingleQubitUnitary::lattes();

    // pure inputs: uniform on the Bloch sphere
    let direction = sample_ball_uniform(1.0, &mut rng);
    let z = z_from_bloch(&direction).unwrap_or(ExtendedComplex::Infinity);
    let (z0, p_pure) = oracle_step_pure(z, &identity)?;
    let (zl, _) = oracle_step_pure(z, &lattes)?;
    let projector = density_from_bloch(&bloch_from_z(z))?;
    let (_, p_projector) = oracle_step_mixed(&projector, &identity)?;

    // mixed inputs: uniform in the Bloch ball
    let b = sample_ball_uniform(1.0, &mut rng);
    let rho = density_from_bloch(&b)?;
    let (s_oracle, _) = oracle_step_mixed(&rho, &identity)?;
    let (ml_oracle, _) = oracle_step_mixed(&rho, &lattes)?;

    Ok(OracleReport {
        samples: 1,
        pure_f0: z0.chordal_distance(&eval_f0(z)),
        pure_fl: zl.chordal_distance(&eval_fl(z)),
        mixed_s: density_gap(&s_oracle, &squaring_s(&rho).0),
        mixed_ml: bloch_from_density(&ml_oracle).distance(&apply_ml(&b)),
        success_gap: (p_pure - p_projector).abs(),
    })
}

/// Compares the oracle with the closed-form maps on `samples` seeded random
/// pure and mixed inputs.
pub fn oracle_sweep(samples: u64, seed: u64) -> Result<OracleReport> {
    (0..samples)
        .into_par_iter()
        .map(|i| compare_one(seed, i))
        .try_reduce(OracleReport::default, |a, b| Ok(a.merge(b)))
}
