//! Small dense complex 3×3 helpers.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat3 = Matrix3<C64>;

/// Eigenphases closer than this to ±π are rejected by [`unitary_generator`].
pub const BRANCH_GUARD: f64 = 1e-6;

pub fn identity() -> Mat3 {
    Mat3::identity()
}

/// Largest entry modulus.
pub fn max_abs(m: &Mat3) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// max |(U†U − 𝟙)_ij|
pub fn unitarity_defect(u: &Mat3) -> f64 {
    max_abs(&(u.adjoint() * u - identity()))
}

/// Hilbert–Schmidt distance `Tr((U−V)†(U−V))` for two unitaries, via
/// `2·dim − 2 Re Tr(V†U)`.
pub fn hs_distance_sq(u: &Mat3, v: &Mat3) -> f64 {
    let overlap: C64 = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| v[(i, j)].conj() * u[(i, j)])
        .sum();
    6.0 - 2.0 * overlap.re
}

/// `exp(−i·K·t)` for Hermitian `K`.
pub fn exp_hermitian(k: &Mat3, t: f64) -> Mat3 {
    let eig = SymmetricEigen::new(*k);
    let phases = Vector3::from_iterator(eig.eigenvalues.iter().map(|&e| C64::cis(-e * t)));
    let q = eig.eigenvectors;
    q * Mat3::from_diagonal(&phases) * q.adjoint()
}

/// Principal generator `K = i·log U` of a unitary, so that `U = exp(−iK)`.
///
/// Eigenphases are taken in (−π, π]. Any eigenphase within
/// [`BRANCH_GUARD`] of ±π is ambiguous and reported as an error.
pub fn unitary_generator(u: &Mat3) -> Result<Mat3> {
    let (q, t) = u.schur().unpack();
    let mut logs = Vector3::zeros();
    for i in 0..3 {
        let lambda = t[(i, i)];
        let phase = lambda.arg();
        if PI - phase.abs() < BRANCH_GUARD {
            return Err(Error::BranchAmbiguity { phase });
        }
        logs[i] = C64::new(lambda.norm().ln(), phase);
    }
    let log_u = q * Mat3::from_diagonal(&logs) * q.adjoint();
    Ok(log_u * C64::i())
}
