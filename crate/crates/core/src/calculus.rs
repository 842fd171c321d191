//! Commutator ("inner derivation") utilities.
//!
//! `δ_A(B) = [A, B] = AB - BA`. Used to check operator identities of the
//! Ising blocks; nothing here is on the simulation path.

use thiserror::Error;

use crate::densela::{ComplexMatrix, LinalgError};

/// Highest iteration order accepted by [`iterated_derivation`].
pub const MAX_ORDER: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalculusError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("derivation order {0} exceeds the maximum of {MAX_ORDER}")]
    OrderTooLarge(usize),
}

/// `[a, b]`.
pub fn inner_derivation(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    Ok(&a.matmul(b)? - &b.matmul(a)?)
}

/// `δ_a^order(b)`; order 0 returns `b`.
pub fn iterated_derivation(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    order: usize,
) -> Result<ComplexMatrix, CalculusError> {
    if order > MAX_ORDER {
        return Err(CalculusError::OrderTooLarge(order));
    }
    a.check_same_dim(b)?;
    let mut out = b.clone();
    for _ in 0..order {
        out = inner_derivation(a, &out)?;
    }
    Ok(out)
}

/// `sum_{k<=order} x^k δ_a^k(b) / k!`, the truncated series of `e^{xa} b e^{-xa}`.
pub fn conjugation_series(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    x: num_complex::Complex64,
    order: usize,
) -> Result<ComplexMatrix, LinalgError> {
    a.check_same_dim(b)?;
    let mut term = b.clone();
    let mut sum = b.clone();
    for k in 1..=order {
        term = inner_derivation(a, &term)?.scale(x / k as f64);
        sum = &sum + &term;
    }
    Ok(sum)
}
