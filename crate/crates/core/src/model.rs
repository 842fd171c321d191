//! The periodic Ising chain and its four-block Hamiltonian.
//!
//! ```text
//! H = sum_k J[k] Z(k) Z(k+1) + g[k] Z(k) + h[k] X(k),   site 2n+1 == site 1
//! A1 = odd bonds, A2 = even bonds, B1 = longitudinal field, B2 = transverse field
//! ```
//!
//! Sites are 1-based in every public interface. Site 1 is the most
//! significant bit of a computational basis index.
//!
//! On a two-site ring both bonds join sites 1 and 2, so the single physical
//! bond is counted twice (`J[1] + J[2]`). This is the literal block
//! decomposition and is kept as is.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::densela::{kron, ComplexMatrix, Pauli, ONE};

/// Largest supported chain (dimension 2^12).
pub const MAX_SITES: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("chain length must be even and at least 2, got {0}")]
    InvalidLength(usize),
    #[error("parameter `{name}` has {got} entries, expected {expected}")]
    LengthMismatch {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("parameter `{name}` has a non-finite entry at site {site}")]
    NonFinite { name: &'static str, site: usize },
    #[error("site {site} out of range 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("{n_sites} sites exceeds the dimension cap of {max} sites")]
    DimensionCapExceeded { n_sites: usize, max: usize },
}

/// Chain length and per-site parameters.
///
/// `coupling[k-1]` is `J_{k,k+1}`, the last entry closing the ring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    n_sites: usize,
    coupling: Vec<f64>,
    longitudinal: Vec<f64>,
    transverse: Vec<f64>,
}

impl ChainSpec {
    pub fn new(
        n_sites: usize,
        coupling: Vec<f64>,
        longitudinal: Vec<f64>,
        transverse: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if n_sites < 2 || !n_sites.is_multiple_of(2) {
            return Err(ModelError::InvalidLength(n_sites));
        }
        for (name, v) in [("J", &coupling), ("g", &longitudinal), ("h", &transverse)] {
            if v.len() != n_sites {
                return Err(ModelError::LengthMismatch {
                    name,
                    expected: n_sites,
                    got: v.len(),
                });
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(ModelError::NonFinite { name, site: i + 1 });
            }
        }
        Ok(Self {
            n_sites,
            coupling,
            longitudinal,
            transverse,
        })
    }

    pub fn uniform(n_sites: usize, j: f64, g: f64, h: f64) -> Result<Self, ModelError> {
        Self::new(n_sites, vec![j; n_sites], vec![g; n_sites], vec![h; n_sites])
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Number of sites in one sublattice (`n` in a `2n`-site ring).
    pub fn half(&self) -> usize {
        self.n_sites / 2
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    pub fn longitudinal(&self) -> &[f64] {
        &self.longitudinal
    }

    pub fn transverse(&self) -> &[f64] {
        &self.transverse
    }

    /// `J_{k,k+1}` for a 1-based bond index, wrapping in both directions.
    pub fn bond(&self, k: isize) -> f64 {
        let n = self.n_sites as isize;
        self.coupling[((k - 1).rem_euclid(n)) as usize]
    }

    /// Same chain with the transverse field replaced.
    pub fn with_transverse(&self, transverse: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(
            self.n_sites,
            self.coupling.clone(),
            self.longitudinal.clone(),
            transverse,
        )
    }

    pub fn with_longitudinal(&self, longitudinal: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(
            self.n_sites,
            self.coupling.clone(),
            longitudinal,
            self.transverse.clone(),
        )
    }

    pub fn is_transverse_free(&self) -> bool {
        self.transverse.iter().all(|&h| h == 0.0)
    }

    fn check_cap(&self) -> Result<(), ModelError> {
        if self.n_sites > MAX_SITES {
            return Err(ModelError::DimensionCapExceeded {
                n_sites: self.n_sites,
                max: MAX_SITES,
            });
        }
        Ok(())
    }

    /// Eigenvalue (+1/-1) of `Z(site)` on basis state `index`.
    #[inline]
    fn z(&self, index: usize, site: usize) -> f64 {
        if (index >> (self.n_sites - site)) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn bond_diagonal(&self, first_bond: usize) -> Vec<f64> {
        let n = self.n_sites;
        (0..self.dim())
            .map(|i| {
                (first_bond..=n)
                    .step_by(2)
                    .map(|k| {
                        let next = k % n + 1;
                        self.coupling[k - 1] * self.z(i, k) * self.z(i, next)
                    })
                    .sum()
            })
            .collect()
    }

    /// Diagonal of `A1` (odd bonds `2k-1, 2k`).
    pub fn diagonal_a1(&self) -> Vec<f64> {
        self.bond_diagonal(1)
    }

    /// Diagonal of `A2` (even bonds `2k, 2k+1`, wrapping).
    pub fn diagonal_a2(&self) -> Vec<f64> {
        self.bond_diagonal(2)
    }

    /// Diagonal of `B1`.
    pub fn diagonal_b1(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                (1..=self.n_sites)
                    .map(|k| self.longitudinal[k - 1] * self.z(i, k))
                    .sum()
            })
            .collect()
    }

    /// Diagonal of `A1 + A2 + B1`.
    pub fn diagonal_ising(&self) -> Vec<f64> {
        let (a1, a2, b1) = (self.diagonal_a1(), self.diagonal_a2(), self.diagonal_b1());
        a1.iter().zip(&a2).zip(&b1).map(|((x, y), z)| x + y + z).collect()
    }
}

/// `I ⊗ … ⊗ P ⊗ … ⊗ I` with `P` at 1-based position `site`.
pub fn site_operator(n_sites: usize, site: usize, pauli: Pauli) -> Result<ComplexMatrix, ModelError> {
    if n_sites > MAX_SITES {
        return Err(ModelError::DimensionCapExceeded {
            n_sites,
            max: MAX_SITES,
        });
    }
    if site == 0 || site > n_sites {
        return Err(ModelError::SiteOutOfRange { site, n_sites });
    }
    let left = ComplexMatrix::identity(1 << (site - 1));
    let right = ComplexMatrix::identity(1 << (n_sites - site));
    Ok(kron(&kron(&left, &pauli.matrix()), &right))
}

/// The four blocks and their sum.
#[derive(Clone, Debug)]
pub struct HamiltonianTerms {
    pub a1: ComplexMatrix,
    pub a2: ComplexMatrix,
    pub b1: ComplexMatrix,
    pub b2: ComplexMatrix,
    pub h_total: ComplexMatrix,
}

impl HamiltonianTerms {
    pub fn n_sites(&self) -> usize {
        self.a1.dim().trailing_zeros() as usize
    }

    fn real_diagonal(m: &ComplexMatrix) -> Vec<f64> {
        m.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn diagonal_a1(&self) -> Vec<f64> {
        Self::real_diagonal(&self.a1)
    }

    pub fn diagonal_a2(&self) -> Vec<f64> {
        Self::real_diagonal(&self.a2)
    }

    pub fn diagonal_b1(&self) -> Vec<f64> {
        Self::real_diagonal(&self.b1)
    }
}

/// Assembles `A1`, `A2`, `B1`, `B2` and `H` for a chain.
pub fn build_terms(spec: &ChainSpec) -> Result<HamiltonianTerms, ModelError> {
    spec.check_cap()?;
    let a1 = ComplexMatrix::from_real_diagonal(&spec.diagonal_a1());
    let a2 = ComplexMatrix::from_real_diagonal(&spec.diagonal_a2());
    let b1 = ComplexMatrix::from_real_diagonal(&spec.diagonal_b1());

    let n = spec.n_sites();
    let mut b2 = ComplexMatrix::zeros(spec.dim());
    for site in 1..=n {
        let flip = 1usize << (n - site);
        let h = spec.transverse()[site - 1];
        for i in 0..spec.dim() {
            b2[(i, i ^ flip)] += ONE * h;
        }
    }
    let h_total = &(&(&a1 + &a2) + &b1) + &b2;
    Ok(HamiltonianTerms {
        a1,
        a2,
        b1,
        b2,
        h_total,
    })
}
