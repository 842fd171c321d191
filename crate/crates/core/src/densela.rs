//! Dense complex linear algebra.
//!
//! Everything in this crate is carried by [`ComplexMatrix`], a square,
//! row-major matrix of `Complex64`. Dimensions stay small (at most
//! [`DIM_CAP`]), so no sparse storage is used. Exact evolution goes through
//! [`hermitian_eig`], backed by faer's self-adjoint eigensolver.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

use crate::par::{self, Execution};

/// Largest matrix dimension accepted by the solvers (twelve qubits).
pub const DIM_CAP: usize = 1 << 12;

/// Maximum entrywise deviation from Hermitian symmetry that is accepted.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Maximum entrywise deviation of `U·U†` from the identity that is accepted.
pub const UNITARY_TOL: f64 = 1e-10;

const PAR_MATMUL_MIN_DIM: usize = 128;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian: max |M - M^dagger| = {deviation:e}")]
    NotHermitian { deviation: f64 },
    #[error("eigensolver failed to converge")]
    ConvergenceFailure,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("dimension {dim} exceeds the cap of {cap}")]
    DimensionCapExceeded { dim: usize, cap: usize },
    #[error("expected {expected} entries for a square matrix, got {got}")]
    BadLength { expected: usize, got: usize },
}

/// Single-qubit Pauli operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> ComplexMatrix {
        match self {
            Pauli::X => ComplexMatrix::from_rows(&[[ZERO, ONE], [ONE, ZERO]]),
            Pauli::Y => ComplexMatrix::from_rows(&[[ZERO, -I], [I, ZERO]]),
            Pauli::Z => ComplexMatrix::from_rows(&[[ONE, ZERO], [ZERO, -ONE]]),
        }
    }
}

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        if self.dim <= 8 {
            for i in 0..self.dim {
                let row: Vec<String> = self
                    .row(i)
                    .iter()
                    .map(|z| format!("{:+.4}{:+.4}i", z.re, z.im))
                    .collect();
                writeln!(f, "  [{}]", row.join(", "))?;
            }
        }
        Ok(())
    }
}

impl ComplexMatrix {
    /// # Panics
    /// If `dim == 0`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from a row-major vector of `dim * dim` entries.
    pub fn from_vec(dim: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if dim == 0 || data.len() != dim * dim {
            return Err(LinalgError::BadLength {
                expected: dim * dim,
                got: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<const N: usize>(rows: &[[Complex64; N]; N]) -> Self {
        Self::from_fn(N, |i, j| rows[i][j])
    }

    pub fn from_real_diagonal(diagonal: &[f64]) -> Self {
        let mut m = Self::zeros(diagonal.len());
        for (i, &d) in diagonal.iter().enumerate() {
            m.data[i * m.dim + i] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn from_diagonal(diagonal: &[Complex64]) -> Self {
        let mut m = Self::zeros(diagonal.len());
        for (i, &d) in diagonal.iter().enumerate() {
            m.data[i * m.dim + i] = d;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn check_same_dim(&self, other: &Self) -> Result<(), LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }

    /// Matrix product; rows are computed in parallel for large inputs.
    pub fn matmul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        self.check_same_dim(rhs)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        let exec = if n >= PAR_MATMUL_MIN_DIM {
            Execution::Parallel
        } else {
            Execution::Serial
        };
        par::for_each_chunk_mut(exec, &mut out.data, n, |i, out_row| {
            let lhs_row = &self.data[i * n..(i + 1) * n];
            for (k, &a) in lhs_row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        });
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-norm of the entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// `max |U·U† - I|` over all entries.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self
            .matmul(&self.dagger())
            .expect("a matrix always matches its own adjoint");
        prod.max_abs_diff(&Self::identity(self.dim))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| i == j || self[(i, j)].norm() <= tol))
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> Result<f64, LinalgError> {
        let gram = self.dagger().matmul(self)?;
        let eig = hermitian_eig(&gram)?;
        Ok(eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt())
    }

    /// Multiplies row `i` by `phases[i]`, i.e. `self <- diag(phases) · self`.
    pub fn scale_rows(&mut self, phases: &[Complex64]) {
        assert_eq!(phases.len(), self.dim, "phase vector length mismatch");
        let n = self.dim;
        for (row, &p) in self.data.chunks_mut(n).zip(phases) {
            for z in row {
                *z *= p;
            }
        }
    }

    /// Left-multiplies by a 2x2 `gate` acting on one tensor factor.
    ///
    /// The matrix is read as an operator on `n_sites` qubits where site 1 is
    /// the most significant bit of the row index. `site` is 1-based.
    pub fn apply_site_gate_left(
        &mut self,
        n_sites: usize,
        site: usize,
        gate: &[[Complex64; 2]; 2],
        exec: Execution,
    ) {
        assert_eq!(1usize << n_sites, self.dim, "matrix is not {n_sites} qubits");
        assert!((1..=n_sites).contains(&site), "site {site} out of range");
        let n = self.dim;
        let stride = 1usize << (n_sites - site);
        let [[g00, g01], [g10, g11]] = *gate;
        par::for_each_chunk_mut(exec, &mut self.data, 2 * stride * n, |_, block| {
            let (upper, lower) = block.split_at_mut(stride * n);
            for (a, b) in upper.iter_mut().zip(lower.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = g00 * x + g01 * y;
                *b = g10 * x + g11 * y;
            }
        });
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    /// # Panics
    /// On dimension mismatch; use [`ComplexMatrix::matmul`] to get an error.
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("dimension mismatch in matrix product")
    }
}

/// Kronecker product: `out[(i1*db + i2, j1*db + j2)] = a[(i1, j1)] * b[(i2, j2)]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (da, db) = (a.dim, b.dim);
    let n = da * db;
    let mut out = ComplexMatrix::zeros(n);
    for i1 in 0..da {
        for j1 in 0..da {
            let s = a[(i1, j1)];
            if s == ZERO {
                continue;
            }
            for i2 in 0..db {
                let row = (i1 * db + i2) * n + j1 * db;
                for j2 in 0..db {
                    out.data[row + j2] = s * b[(i2, j2)];
                }
            }
        }
    }
    out
}

/// Which way an evolution operator runs in time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `exp(-i t H)`.
    Forward,
    /// `exp(+i t H)`.
    Backward,
}

impl Direction {
    /// Sign `s` in `exp(s·i·t·H)`.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Backward => 1.0,
        }
    }

    pub fn from_sign(sign: i32) -> Option<Self> {
        match sign {
            -1 => Some(Direction::Forward),
            1 => Some(Direction::Backward),
            _ => None,
        }
    }
}

/// `H = V · diag(values) · V†` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let phases: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.conjugate_diagonal(&phases)
    }

    /// `V · diag(exp(sign·i·t·λ)) · V†`.
    pub fn evolution(&self, t: f64, direction: Direction) -> ComplexMatrix {
        let s = direction.sign() * t;
        let phases: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::from_polar(1.0, s * v))
            .collect();
        self.conjugate_diagonal(&phases)
    }

    /// `V · diag(d) · V†`.
    fn conjugate_diagonal(&self, d: &[Complex64]) -> ComplexMatrix {
        let n = self.dim();
        let v = &self.vectors;
        let mut scaled = v.clone();
        for row in scaled.data.chunks_mut(n) {
            for (z, &p) in row.iter_mut().zip(d) {
                *z *= p;
            }
        }
        scaled
            .matmul(&v.dagger())
            .expect("eigenvector matrix is square")
    }
}

/// Eigendecomposition of a Hermitian matrix.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEigen, LinalgError> {
    let n = m.dim;
    if n > DIM_CAP {
        return Err(LinalgError::DimensionCapExceeded { dim: n, cap: DIM_CAP });
    }
    let deviation = m.hermiticity_error();
    if deviation > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian { deviation });
    }
    let mat = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| m[(i, j)]);
    let evd = mat
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| LinalgError::ConvergenceFailure)?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut values: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    let mut vectors = ComplexMatrix::from_fn(n, |i, j| u[(i, j)]);
    if values.windows(2).any(|w| w[0] > w[1]) {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        values = order.iter().map(|&k| values[k]).collect();
        vectors = ComplexMatrix::from_fn(n, |i, j| vectors[(i, order[j])]);
    }
    Ok(HermitianEigen { values, vectors })
}

/// `exp(sign·i·t·H)` for Hermitian `H`.
pub fn expm_hermitian(
    h: &ComplexMatrix,
    t: f64,
    direction: Direction,
) -> Result<ComplexMatrix, LinalgError> {
    if t == 0.0 {
        let deviation = h.hermiticity_error();
        if deviation > HERMITIAN_TOL {
            return Err(LinalgError::NotHermitian { deviation });
        }
        return Ok(ComplexMatrix::identity(h.dim()));
    }
    Ok(hermitian_eig(h)?.evolution(t, direction))
}

/// `diag(exp(-i t d_k))`.
pub fn diag_expm(diagonal: &[f64], t: f64) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&diag_phases(diagonal, t))
}

/// Entries of [`diag_expm`] without materializing the matrix.
pub fn diag_phases(diagonal: &[f64], t: f64) -> Vec<Complex64> {
    diagonal
        .iter()
        .map(|&d| Complex64::from_polar(1.0, -t * d))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kron_identity() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
    }

    #[test]
    fn kron_x_z_blocks() {
        let k = kron(&Pauli::X.matrix(), &Pauli::Z.matrix());
        let z = Pauli::Z.matrix();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(k[(i, j)], ZERO);
                assert_eq!(k[(i + 2, j + 2)], ZERO);
                assert_eq!(k[(i, j + 2)], z[(i, j)]);
                assert_eq!(k[(i + 2, j)], z[(i, j)]);
            }
        }
    }

    #[test]
    fn kron_zz_embedding_acts_on_basis_states() {
        let zz_i = kron(&kron(&Pauli::Z.matrix(), &Pauli::Z.matrix()), &ComplexMatrix::identity(2));
        for state in 0..8usize {
            let b1 = (state >> 2) & 1;
            let b2 = (state >> 1) & 1;
            let expected = if b1 == b2 { 1.0 } else { -1.0 };
            for row in 0..8 {
                let want = if row == state { c(expected, 0.0) } else { ZERO };
                assert_eq!(zz_i[(row, state)], want);
            }
        }
    }

    #[test]
    fn eig_of_sigma_z() {
        let e = hermitian_eig(&Pauli::Z.matrix()).unwrap();
        assert_eq!(e.values, vec![-1.0, 1.0]);
        // permutation of the identity, up to phase
        for j in 0..2 {
            let col: Vec<f64> = (0..2).map(|i| e.vectors[(i, j)].norm()).collect();
            assert!(col.iter().filter(|&&x| (x - 1.0).abs() < 1e-14).count() == 1);
        }
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_of_sigma_x() {
        let e = hermitian_eig(&Pauli::X.matrix()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        // columns proportional to (1, -1)/sqrt2 and (1, 1)/sqrt2
        let v = &e.vectors;
        let ratio0 = v[(1, 0)] / v[(0, 0)];
        let ratio1 = v[(1, 1)] / v[(0, 1)];
        assert!((ratio0 - c(-1.0, 0.0)).norm() < 1e-12);
        assert!((ratio1 - c(1.0, 0.0)).norm() < 1e-12);
        assert!((v[(0, 0)].norm() - FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_rows(&[[ONE, ONE], [ZERO, ONE]]);
        assert!(matches!(hermitian_eig(&m), Err(LinalgError::NotHermitian { .. })));
    }

    #[test]
    fn eig_two_by_two_matches_characteristic_roots() {
        let (a, d, b) = (0.7, -1.3, c(0.4, -0.25));
        let m = ComplexMatrix::from_rows(&[[c(a, 0.0), b], [b.conj(), c(d, 0.0)]]);
        let e = hermitian_eig(&m).unwrap();
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        assert!((e.values[0] - (mean - rad)).abs() < 1e-12);
        assert!((e.values[1] - (mean + rad)).abs() < 1e-12);
    }

    #[test]
    fn expm_sigma_z_at_pi_is_minus_identity() {
        let u = expm_hermitian(&Pauli::Z.matrix(), PI, Direction::Forward).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(2).scale_real(-1.0)) < 1e-14);
    }

    #[test]
    fn expm_at_zero_is_identity() {
        let h = ComplexMatrix::from_rows(&[[c(0.3, 0.0), c(0.1, 0.2)], [c(0.1, -0.2), c(-0.5, 0.0)]]);
        let u = expm_hermitian(&h, 0.0, Direction::Forward).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(2)) <= 1e-14);
    }

    #[test]
    fn expm_sigma_x_quarter_turn() {
        let u = expm_hermitian(&Pauli::X.matrix(), FRAC_PI_2, Direction::Forward).unwrap();
        let want = Pauli::X.matrix().scale(-I);
        assert!(u.max_abs_diff(&want) < 1e-14);
        let back = expm_hermitian(&Pauli::X.matrix(), FRAC_PI_2, Direction::Backward).unwrap();
        assert!(back.max_abs_diff(&Pauli::X.matrix().scale(I)) < 1e-14);
    }

    #[test]
    fn direction_sign_roundtrip() {
        assert_eq!(Direction::from_sign(-1), Some(Direction::Forward));
        assert_eq!(Direction::from_sign(1), Some(Direction::Backward));
        assert_eq!(Direction::from_sign(0), None);
    }

    #[test]
    fn diag_expm_cases() {
        assert_eq!(diag_expm(&[0.0; 4], 1.7), ComplexMatrix::identity(4));
        let u = diag_expm(&[1.0, -1.0], PI);
        assert!(u.max_abs_diff(&ComplexMatrix::identity(2).scale_real(-1.0)) < 1e-15);
    }

    #[test]
    fn site_gate_matches_kron_embedding() {
        let gate = [[c(0.6, 0.0), c(0.0, -0.8)], [c(0.0, -0.8), c(0.6, 0.0)]];
        let g = ComplexMatrix::from_rows(&gate);
        let i2 = ComplexMatrix::identity(2);
        let base = ComplexMatrix::from_fn(8, |i, j| c((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.05));
        for site in 1..=3 {
            let mut op = ComplexMatrix::identity(1);
            for k in 1..=3 {
                op = kron(&op, if k == site { &g } else { &i2 });
            }
            let want = &op * &base;
            for exec in [Execution::Serial, Execution::Parallel] {
                let mut got = base.clone();
                got.apply_site_gate_left(3, site, &gate, exec);
                assert!(got.max_abs_diff(&want) < 1e-15, "site {site}");
            }
        }
    }

    #[test]
    fn from_vec_validates_length() {
        assert!(ComplexMatrix::from_vec(2, vec![ZERO; 3]).is_err());
        assert!(ComplexMatrix::from_vec(2, vec![ZERO; 4]).is_ok());
    }

    #[test]
    fn spectral_norm_of_scaled_pauli() {
        let m = Pauli::Y.matrix().scale_real(2.5);
        assert!((m.spectral_norm().unwrap() - 2.5).abs() < 1e-12);
    }
}
