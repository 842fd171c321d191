//! Evolution operators: the exact oracle and the product formulas compared
//! against it.
//!
//! Chain formulas are represented as a [`ProductFormula`], an ordered list of
//! structured factors (diagonal phases, or a tensor product of single-site X
//! rotations). Applying a factor to a `d x d` matrix costs `O(n d^2)` instead of
//! a dense `O(d^3)` product, which is what makes ten-site sweeps affordable.
//!
//! The perturbative variant rescales each transverse field `h_k` by
//!
//! ```text
//! c_k = f(g_k t) f(J_{k-1,k} t) f(J_{k,k+1} t),    f(x) = tan(x) / x
//! ```
//!
//! and leaves the factor skeleton of the unit-coefficient nested formula
//! untouched.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::densela::{
    diag_expm, diag_phases, expm_hermitian, kron, ComplexMatrix, Direction, LinalgError, Pauli,
    ONE, ZERO,
};
use crate::model::{ChainSpec, HamiltonianTerms, ModelError};
use crate::par::Execution;

/// Half-width of the rejection band around each pole of `tan`.
pub const POLE_GUARD: f64 = 1e-3;

/// Below this magnitude `tan(x)/x` is returned as exactly 1.
pub const SMALL_ARGUMENT: f64 = 1e-8;

/// Which quantity fed an evaluation of the scaling function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PoleArgument {
    /// A bare time (or `J t` in the two-site formula).
    Time,
    /// `J_{bond,bond+1} t`.
    Coupling { bond: usize },
    /// `g_site t`.
    Longitudinal { site: usize },
}

impl fmt::Display for PoleArgument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoleArgument::Time => write!(f, "t"),
            PoleArgument::Coupling { bond } => write!(f, "J[{bond}]*t"),
            PoleArgument::Longitudinal { site } => write!(f, "g[{site}]*t"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("argument {argument} = {x} lies within {POLE_GUARD} of a pole of tan")]
    NearPole { x: f64, argument: PoleArgument },
    #[error("operation does not apply to scheme `{0}`")]
    UnsupportedScheme(SchemeId),
    #[error("coefficient set has {got} entries, chain has {expected} sites")]
    CoefficientLength { expected: usize, got: usize },
    #[error("repetition count must be at least 1")]
    ZeroSteps,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeId {
    Exact,
    Trotter2,
    NestedUnit,
    NestedPerturbative,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [
        SchemeId::Exact,
        SchemeId::Trotter2,
        SchemeId::NestedUnit,
        SchemeId::NestedPerturbative,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::Exact => "exact",
            SchemeId::Trotter2 => "trotter2",
            SchemeId::NestedUnit => "nested-unit",
            SchemeId::NestedPerturbative => "nested-perturbative",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| format!("unknown scheme `{s}`"))
    }
}

/// Which transverse coefficients a nested formula uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Unit,
    Perturbative,
}

/// Distance from `x` to the nearest odd multiple of pi/2.
fn pole_distance(x: f64) -> f64 {
    let r = (x - FRAC_PI_2).rem_euclid(PI);
    r.min(PI - r)
}

fn scaling_tagged(x: f64, argument: PoleArgument) -> Result<f64, SchemeError> {
    if x.abs() < SMALL_ARGUMENT {
        return Ok(1.0);
    }
    if pole_distance(x) <= POLE_GUARD {
        return Err(SchemeError::NearPole { x, argument });
    }
    Ok(x.tan() / x)
}

/// `tan(x) / x`, with the removable singularity at 0 filled in.
pub fn scaling_f(x: f64) -> Result<f64, SchemeError> {
    scaling_tagged(x, PoleArgument::Time)
}

/// `t / tan(t)`, the reciprocal of [`scaling_f`].
pub fn lambda_opt(t: f64) -> Result<f64, SchemeError> {
    Ok(1.0 / scaling_f(t)?)
}

/// `exp(-i theta X)`.
fn x_rotation(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    let c = Complex64::new(c, 0.0);
    let s = Complex64::new(0.0, -s);
    [[c, s], [s, c]]
}

fn gate_matrix(g: &[[Complex64; 2]; 2]) -> ComplexMatrix {
    ComplexMatrix::from_rows(g)
}

fn single_qubit_hamiltonian(alpha: f64, x_scale: f64) -> ComplexMatrix {
    &Pauli::X.matrix().scale_real(alpha * x_scale) + &Pauli::Z.matrix()
}

/// `exp(-i t (alpha X + Z))`.
pub fn single_qubit_exact(alpha: f64, t: f64) -> ComplexMatrix {
    expm_hermitian(&single_qubit_hamiltonian(alpha, 1.0), t, Direction::Forward)
        .expect("2x2 Hermitian input")
}

fn symmetric_single_qubit(alpha_eff: f64, t: f64) -> ComplexMatrix {
    let half = gate_matrix(&x_rotation(0.5 * alpha_eff * t));
    let mid = diag_expm(&[1.0, -1.0], t);
    &(&half * &mid) * &half
}

/// `exp(-i t alpha/2 X) exp(-i t Z) exp(-i t alpha/2 X)`.
pub fn single_qubit_trotter2(alpha: f64, t: f64) -> ComplexMatrix {
    symmetric_single_qubit(alpha, t)
}

/// Symmetric splitting with the X coefficient rescaled by `tan(t)/t`.
pub fn single_qubit_perturbative(alpha: f64, t: f64) -> Result<ComplexMatrix, SchemeError> {
    Ok(symmetric_single_qubit(alpha * scaling_f(t)?, t))
}

/// Parameters of the two-site block `A = J ZZ`, `B = g1 Z1 + g2 Z2`,
/// `C = h1 X1 + h2 X2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSiteParams {
    pub j: f64,
    pub g1: f64,
    pub g2: f64,
    pub h1: f64,
    pub h2: f64,
}

/// `exp(-i t/2 alpha (B + f(J t) C)) exp(-i t A) exp(-i t/2 alpha (B + f(J t) C))`.
pub fn two_qubit_perturbative(
    p: TwoSiteParams,
    alpha: f64,
    t: f64,
) -> Result<ComplexMatrix, SchemeError> {
    let f = scaling_f(p.j * t)?;
    // B + f C is a sum of commuting single-site terms
    let site = |g: f64, h: f64| -> Result<ComplexMatrix, LinalgError> {
        let gen = &Pauli::Z.matrix().scale_real(g) + &Pauli::X.matrix().scale_real(f * h);
        expm_hermitian(&gen, 0.5 * alpha * t, Direction::Forward)
    };
    let outer = kron(&site(p.g1, p.h1)?, &site(p.g2, p.h2)?);
    let middle = diag_expm(&[p.j, -p.j, -p.j, p.j], t);
    Ok(&(&outer * &middle) * &outer)
}

/// Exact two-site evolution `exp(-i t (A + alpha B + alpha C))`.
pub fn two_qubit_exact(p: TwoSiteParams, alpha: f64, t: f64) -> ComplexMatrix {
    let spec = ChainSpec::new(
        2,
        vec![p.j, 0.0],
        vec![alpha * p.g1, alpha * p.g2],
        vec![alpha * p.h1, alpha * p.h2],
    )
    .expect("valid two-site chain");
    let terms = crate::model::build_terms(&spec).expect("two sites is under the cap");
    expm_hermitian(&terms.h_total, t, Direction::Forward).expect("Hermitian")
}

/// Per-site multipliers of `h_k` in the transverse factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub variant: Variant,
    pub values: Vec<f64>,
    /// Arguments of `tan(x)/x` with `|x| > pi/2`: evaluated on a later branch.
    pub beyond_first_branch: Vec<PoleArgument>,
}

impl CoefficientSet {
    pub fn unit(n_sites: usize) -> Self {
        Self {
            variant: Variant::Unit,
            values: vec![1.0; n_sites],
            beyond_first_branch: Vec::new(),
        }
    }
}

struct ScalingCache<'a> {
    spec: &'a ChainSpec,
    t: f64,
    flagged: Vec<PoleArgument>,
}

impl<'a> ScalingCache<'a> {
    fn new(spec: &'a ChainSpec, t: f64) -> Self {
        Self {
            spec,
            t,
            flagged: Vec::new(),
        }
    }

    fn eval(&mut self, x: f64, argument: PoleArgument) -> Result<f64, SchemeError> {
        let v = scaling_tagged(x, argument)?;
        if x.abs() > FRAC_PI_2 && !self.flagged.contains(&argument) {
            self.flagged.push(argument);
        }
        Ok(v)
    }

    /// `f(J_{bond,bond+1} t)` for a 1-based, wrapping bond index.
    fn bond(&mut self, bond: isize) -> Result<f64, SchemeError> {
        let n = self.spec.n_sites() as isize;
        let idx = ((bond - 1).rem_euclid(n) + 1) as usize;
        self.eval(self.spec.bond(bond) * self.t, PoleArgument::Coupling { bond: idx })
    }

    fn field(&mut self, site: usize) -> Result<f64, SchemeError> {
        let g = self.spec.longitudinal()[site - 1];
        self.eval(g * self.t, PoleArgument::Longitudinal { site })
    }

    fn finish(self, values: Vec<f64>) -> CoefficientSet {
        CoefficientSet {
            variant: Variant::Perturbative,
            values,
            beyond_first_branch: self.flagged,
        }
    }
}

/// First cascade level: each site scaled by `f(J t)` of the odd bond it sits on.
pub fn first_level_coefficients(spec: &ChainSpec, t: f64) -> Result<CoefficientSet, SchemeError> {
    let mut cache = ScalingCache::new(spec, t);
    let values = (1..=spec.n_sites())
        .map(|k| {
            let odd_bond = if k % 2 == 1 { k } else { k - 1 };
            cache.bond(odd_bond as isize)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(cache.finish(values))
}

/// Second cascade level: `f(J_{k-1,k} t) f(J_{k,k+1} t)`.
pub fn second_level_coefficients(spec: &ChainSpec, t: f64) -> Result<CoefficientSet, SchemeError> {
    let mut cache = ScalingCache::new(spec, t);
    let values = (1..=spec.n_sites())
        .map(|k| Ok(cache.bond(k as isize - 1)? * cache.bond(k as isize)?))
        .collect::<Result<Vec<_>, SchemeError>>()?;
    Ok(cache.finish(values))
}

/// Coefficients used by the nested formulas at total time `t`.
pub fn build_coefficients(
    spec: &ChainSpec,
    t: f64,
    variant: Variant,
) -> Result<CoefficientSet, SchemeError> {
    if variant == Variant::Unit {
        return Ok(CoefficientSet::unit(spec.n_sites()));
    }
    let mut cache = ScalingCache::new(spec, t);
    let values = (1..=spec.n_sites())
        .map(|k| {
            Ok(cache.field(k)? * cache.bond(k as isize - 1)? * cache.bond(k as isize)?)
        })
        .collect::<Result<Vec<_>, SchemeError>>()?;
    Ok(cache.finish(values))
}

/// One factor of a product formula.
#[derive(Clone, Debug)]
pub enum Factor {
    /// `diag(phases)`.
    Diagonal(Vec<Complex64>),
    /// `gates[0] ⊗ gates[1] ⊗ …`, one 2x2 unitary per site.
    SiteRotations(Vec<[[Complex64; 2]; 2]>),
}

impl Factor {
    fn transverse(fields: &[f64], coeffs: &[f64], tau: f64) -> Self {
        Factor::SiteRotations(
            fields
                .iter()
                .zip(coeffs)
                .map(|(&h, &c)| x_rotation(tau * c * h))
                .collect(),
        )
    }

    fn apply_left(&self, n_sites: usize, m: &mut ComplexMatrix, exec: Execution) {
        match self {
            Factor::Diagonal(phases) => m.scale_rows(phases),
            Factor::SiteRotations(gates) => {
                for (k, g) in gates.iter().enumerate() {
                    if g[0][1] == ZERO && g[1][0] == ZERO && g[0][0] == ONE && g[1][1] == ONE {
                        continue;
                    }
                    m.apply_site_gate_left(n_sites, k + 1, g, exec);
                }
            }
        }
    }

    /// Dense form: `diag_expm` phases, or the Kronecker product of the gates.
    pub fn to_dense(&self) -> ComplexMatrix {
        match self {
            Factor::Diagonal(phases) => ComplexMatrix::from_diagonal(phases),
            Factor::SiteRotations(gates) => gates
                .iter()
                .fold(ComplexMatrix::identity(1), |acc, g| kron(&acc, &gate_matrix(g))),
        }
    }
}

/// Ordered product `F_1 · F_2 · … · F_m` acting on `n_sites` qubits.
#[derive(Clone, Debug)]
pub struct ProductFormula {
    n_sites: usize,
    factors: Vec<Factor>,
}

impl ProductFormula {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// `m <- (F_1 · … · F_m) · m`.
    pub fn apply_left(&self, m: &mut ComplexMatrix, exec: Execution) {
        for f in self.factors.iter().rev() {
            f.apply_left(self.n_sites, m, exec);
        }
    }

    pub fn to_matrix(&self, exec: Execution) -> ComplexMatrix {
        let mut m = ComplexMatrix::identity(1 << self.n_sites);
        self.apply_left(&mut m, exec);
        m
    }

    /// The formula applied `steps` times in succession.
    pub fn repeated(&self, steps: usize) -> Self {
        let mut factors = Vec::with_capacity(self.factors.len() * steps);
        for _ in 0..steps {
            factors.extend(self.factors.iter().cloned());
        }
        Self {
            n_sites: self.n_sites,
            factors,
        }
    }
}

/// `[B2 t/2, (A1+A2+B1) t, B2 t/2]`.
fn trotter2_formula(n_sites: usize, ising_diag: &[f64], fields: &[f64], t: f64) -> ProductFormula {
    let half = Factor::transverse(fields, &vec![1.0; n_sites], 0.5 * t);
    ProductFormula {
        n_sites,
        factors: vec![
            half.clone(),
            Factor::Diagonal(diag_phases(ising_diag, t)),
            half,
        ],
    }
}

struct NestedDiagonals<'a> {
    a1: &'a [f64],
    a2: &'a [f64],
    b1: &'a [f64],
}

/// The fifteen-factor symmetric nest, in printed order.
fn nested_formula(
    n_sites: usize,
    diag: NestedDiagonals<'_>,
    fields: &[f64],
    coeffs: &[f64],
    t: f64,
) -> ProductFormula {
    let bx = Factor::transverse(fields, coeffs, t / 8.0);
    let b1 = Factor::Diagonal(diag_phases(diag.b1, t / 4.0));
    let a2 = Factor::Diagonal(diag_phases(diag.a2, t / 2.0));
    let a1 = Factor::Diagonal(diag_phases(diag.a1, t));
    let quarter = |out: &mut Vec<Factor>| {
        out.push(bx.clone());
        out.push(b1.clone());
        out.push(bx.clone());
    };
    let mut factors = Vec::with_capacity(15);
    quarter(&mut factors);
    factors.push(a2.clone());
    quarter(&mut factors);
    factors.push(a1);
    quarter(&mut factors);
    factors.push(a2);
    quarter(&mut factors);
    ProductFormula { n_sites, factors }
}

/// Product formula for a scheme at time `t`, applied `steps` times at `t/steps`.
///
/// Returns `None` for [`SchemeId::Exact`].
pub fn build_formula(
    scheme: SchemeId,
    spec: &ChainSpec,
    t: f64,
    steps: usize,
) -> Result<Option<ProductFormula>, SchemeError> {
    if steps == 0 {
        return Err(SchemeError::ZeroSteps);
    }
    let n = spec.n_sites();
    if n > crate::model::MAX_SITES {
        return Err(ModelError::DimensionCapExceeded {
            n_sites: n,
            max: crate::model::MAX_SITES,
        }
        .into());
    }
    let tau = t / steps as f64;
    let single = match scheme {
        SchemeId::Exact => return Ok(None),
        SchemeId::Trotter2 => trotter2_formula(n, &spec.diagonal_ising(), spec.transverse(), tau),
        SchemeId::NestedUnit | SchemeId::NestedPerturbative => {
            let variant = if scheme == SchemeId::NestedUnit {
                Variant::Unit
            } else {
                Variant::Perturbative
            };
            let coeffs = build_coefficients(spec, tau, variant)?;
            let (a1, a2, b1) = (spec.diagonal_a1(), spec.diagonal_a2(), spec.diagonal_b1());
            nested_formula(
                n,
                NestedDiagonals {
                    a1: &a1,
                    a2: &a2,
                    b1: &b1,
                },
                spec.transverse(),
                &coeffs.values,
                tau,
            )
        }
    };
    Ok(Some(if steps == 1 {
        single
    } else {
        single.repeated(steps)
    }))
}

fn real_diagonal(m: &ComplexMatrix) -> Vec<f64> {
    m.diagonal().iter().map(|z| z.re).collect()
}

/// Reads `h_k` back out of the `B2` block.
fn transverse_fields(terms: &HamiltonianTerms) -> Vec<f64> {
    let n = terms.n_sites();
    (1..=n).map(|k| terms.b2[(0, 1 << (n - k))].re).collect()
}

/// The fifteen-factor nested product with the given transverse coefficients.
pub fn nested_product(
    terms: &HamiltonianTerms,
    coeffs: &CoefficientSet,
    spec: &ChainSpec,
    t: f64,
) -> Result<ComplexMatrix, SchemeError> {
    let n = spec.n_sites();
    if terms.a1.dim() != spec.dim() {
        return Err(LinalgError::DimensionMismatch {
            left: terms.a1.dim(),
            right: spec.dim(),
        }
        .into());
    }
    if coeffs.values.len() != n {
        return Err(SchemeError::CoefficientLength {
            expected: n,
            got: coeffs.values.len(),
        });
    }
    let (a1, a2, b1) = (
        real_diagonal(&terms.a1),
        real_diagonal(&terms.a2),
        real_diagonal(&terms.b1),
    );
    let formula = nested_formula(
        n,
        NestedDiagonals {
            a1: &a1,
            a2: &a2,
            b1: &b1,
        },
        spec.transverse(),
        &coeffs.values,
        t,
    );
    Ok(formula.to_matrix(Execution::Parallel))
}

/// `exp(-i t/2 B2) exp(-i t (A1+A2+B1)) exp(-i t/2 B2)`.
pub fn trotter2_chain(terms: &HamiltonianTerms, t: f64) -> ComplexMatrix {
    let n = terms.n_sites();
    let ising: Vec<f64> = real_diagonal(&terms.a1)
        .iter()
        .zip(real_diagonal(&terms.a2))
        .zip(real_diagonal(&terms.b1))
        .map(|((a, b), c)| a + b + c)
        .collect();
    trotter2_formula(n, &ising, &transverse_fields(terms), t).to_matrix(Execution::Parallel)
}

/// Cost bookkeeping of a formula in local unitaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct UnitaryCount {
    pub count: u64,
    #[serde(serialize_with = "serialize_ratio")]
    pub ratio_vs_trotter2: Ratio<u64>,
}

fn serialize_ratio<S: serde::Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Block {
    OddBonds,
    EvenBonds,
    Longitudinal,
    Transverse,
}

impl Block {
    fn local_unitaries(self, n_sites: u64) -> u64 {
        match self {
            Block::OddBonds | Block::EvenBonds => n_sites / 2,
            Block::Longitudinal | Block::Transverse => n_sites,
        }
    }
}

/// Blocks implemented by each exponential factor, in factor order.
fn skeleton(scheme: SchemeId) -> Option<Vec<Vec<Block>>> {
    use Block::*;
    match scheme {
        SchemeId::Exact => None,
        SchemeId::Trotter2 => Some(vec![
            vec![Transverse],
            vec![OddBonds, EvenBonds, Longitudinal],
            vec![Transverse],
        ]),
        SchemeId::NestedUnit | SchemeId::NestedPerturbative => {
            let quarter = [vec![Transverse], vec![Longitudinal], vec![Transverse]];
            let mut s = Vec::with_capacity(15);
            s.extend(quarter.iter().cloned());
            s.push(vec![EvenBonds]);
            s.extend(quarter.iter().cloned());
            s.push(vec![OddBonds]);
            s.extend(quarter.iter().cloned());
            s.push(vec![EvenBonds]);
            s.extend(quarter.iter().cloned());
            Some(s)
        }
    }
}

fn count_unitaries(scheme: SchemeId, n_sites: u64) -> Option<u64> {
    skeleton(scheme).map(|s| {
        s.iter()
            .flatten()
            .map(|b| b.local_unitaries(n_sites))
            .sum()
    })
}

/// Counts single-site and two-site unitaries of one formula application.
pub fn local_unitary_count(scheme: SchemeId, spec: &ChainSpec) -> Result<UnitaryCount, SchemeError> {
    let n = spec.n_sites() as u64;
    let count = count_unitaries(scheme, n).ok_or(SchemeError::UnsupportedScheme(scheme))?;
    let base = count_unitaries(SchemeId::Trotter2, n).expect("trotter2 has a skeleton");
    Ok(UnitaryCount {
        count,
        ratio_vs_trotter2: Ratio::new(count, base),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_terms;
    use std::f64::consts::FRAC_PI_4;

    fn fid(u: &ComplexMatrix, v: &ComplexMatrix) -> f64 {
        let d = u.dim() as f64;
        (u * &v.dagger()).trace().norm_sqr() / (d * d)
    }

    fn exact(spec: &ChainSpec, t: f64) -> ComplexMatrix {
        let h = build_terms(spec).unwrap().h_total;
        expm_hermitian(&h, t, Direction::Forward).unwrap()
    }

    fn formula(scheme: SchemeId, spec: &ChainSpec, t: f64) -> ComplexMatrix {
        build_formula(scheme, spec, t, 1)
            .unwrap()
            .unwrap()
            .to_matrix(Execution::Serial)
    }

    #[test]
    fn scaling_f_values() {
        assert_eq!(scaling_f(0.0).unwrap(), 1.0);
        assert_eq!(scaling_f(5e-9).unwrap(), 1.0);
        assert!((scaling_f(FRAC_PI_4).unwrap() - 4.0 / PI).abs() < 1e-15);
        assert!((scaling_f(1.0).unwrap() - 1.5574077246549023).abs() < 1e-15);
        assert_eq!(scaling_f(-0.7).unwrap(), scaling_f(0.7).unwrap());
    }

    #[test]
    fn scaling_f_pole_guard() {
        for x in [FRAC_PI_2, FRAC_PI_2 + 9e-4, -FRAC_PI_2 - 5e-4, 3.0 * FRAC_PI_2] {
            assert!(matches!(scaling_f(x), Err(SchemeError::NearPole { .. })), "{x}");
        }
        assert!(scaling_f(FRAC_PI_2 + 2e-3).is_ok());
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_opt(0.0).unwrap(), 1.0);
        assert!((lambda_opt(FRAC_PI_4).unwrap() - FRAC_PI_4).abs() < 1e-15);
        for t in [0.1, 0.37, 0.9, 1.3, 2.2] {
            assert!((lambda_opt(t).unwrap() * scaling_f(t).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn single_qubit_exact_cases() {
        let t = 0.83;
        let u = single_qubit_exact(0.0, t);
        assert!(u.max_abs_diff(&diag_expm(&[1.0, -1.0], t)) < 1e-14);
        assert!(single_qubit_exact(0.3, 0.0).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);

        // Rabi formula for exp(-i t (a X + Z))
        let (alpha, t) = (0.1f64, 1.0);
        let w = (1.0 + alpha * alpha).sqrt();
        let gen = single_qubit_hamiltonian(alpha, 1.0).scale_real(1.0 / w);
        let rabi = &ComplexMatrix::identity(2).scale_real((w * t).cos())
            - &gen.scale(Complex64::new(0.0, (w * t).sin()));
        assert!(single_qubit_exact(alpha, t).max_abs_diff(&rabi) < 1e-13);
    }

    #[test]
    fn single_qubit_trotter_cases() {
        let t = 0.77;
        assert!(single_qubit_trotter2(0.0, t).max_abs_diff(&diag_expm(&[1.0, -1.0], t)) < 1e-15);
        assert!(single_qubit_trotter2(0.4, 0.0).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        let f = fid(&single_qubit_exact(0.2, 0.1), &single_qubit_trotter2(0.2, 0.1));
        assert!(f >= 1.0 - 1e-6);
    }

    #[test]
    fn single_qubit_perturbative_cases() {
        let small = 1e-9;
        let p = single_qubit_perturbative(0.3, small).unwrap();
        assert!(p.max_abs_diff(&single_qubit_trotter2(0.3, small)) < 1e-10);
        let t = 0.9;
        let p0 = single_qubit_perturbative(0.0, t).unwrap();
        assert!(p0.max_abs_diff(&diag_expm(&[1.0, -1.0], t)) < 1e-15);

        let (alpha, t) = (0.05, 1.2);
        let exact = single_qubit_exact(alpha, t);
        let fp = fid(&exact, &single_qubit_perturbative(alpha, t).unwrap());
        let ft = fid(&exact, &single_qubit_trotter2(alpha, t));
        assert!(fp > ft, "{fp} vs {ft}");
        assert!(single_qubit_perturbative(0.1, FRAC_PI_2).is_err());
    }

    #[test]
    fn single_qubit_perturbative_is_first_order_exact() {
        // fidelity deficit of a first-order-exact formula shrinks like alpha^4
        let t = 1.0;
        let deficit = |a: f64| 1.0 - fid(&single_qubit_exact(a, t), &single_qubit_perturbative(a, t).unwrap());
        let slope = (deficit(0.02) / deficit(0.01)).log2();
        assert!((slope - 4.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn two_qubit_transverse_free_is_exact() {
        let p = TwoSiteParams { j: 1.0, g1: 0.2, g2: -0.4, h1: 0.0, h2: 0.0 };
        let (alpha, t) = (0.7, 1.1);
        let u = two_qubit_perturbative(p, alpha, t).unwrap();
        assert!((fid(&u, &two_qubit_exact(p, alpha, t)) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn two_qubit_decouples_at_zero_coupling() {
        let p = TwoSiteParams { j: 0.0, g1: 0.2, g2: 0.5, h1: 0.3, h2: 0.1 };
        let (alpha, t) = (0.4, 0.9);
        let u = two_qubit_perturbative(p, alpha, t).unwrap();
        let single = |g: f64, h: f64| {
            let gen = &Pauli::Z.matrix().scale_real(g) + &Pauli::X.matrix().scale_real(h);
            expm_hermitian(&gen, alpha * t, Direction::Forward).unwrap()
        };
        let want = kron(&single(0.2, 0.3), &single(0.5, 0.1));
        assert!(u.max_abs_diff(&want) < 1e-13);
    }

    /// Deficit slope in alpha at J=1, g=0.2, h=0.3, t=0.8.
    #[test]
    fn two_qubit_alpha_scaling() {
        let p = TwoSiteParams { j: 1.0, g1: 0.2, g2: 0.2, h1: 0.3, h2: 0.3 };
        let t = 0.8;
        let alphas: Vec<f64> = (1..=10).map(|k| 0.01 * k as f64).collect();
        let deficits: Vec<f64> = alphas
            .iter()
            .map(|&a| 1.0 - fid(&two_qubit_exact(p, a, t), &two_qubit_perturbative(p, a, t).unwrap()))
            .collect();
        let slope = crate::analysis::loglog_slope(&alphas, &deficits);
        assert!((slope - TWO_QUBIT_ALPHA_SLOPE).abs() < 0.1, "slope {slope}");
    }

    // Computed independently with dense numpy exponentials (3.99985).
    const TWO_QUBIT_ALPHA_SLOPE: f64 = 4.0;

    #[test]
    fn coefficients_unit_and_small_t() {
        let spec = ChainSpec::uniform(6, 1.0, 0.2, 0.3).unwrap();
        let unit = build_coefficients(&spec, 0.7, Variant::Unit).unwrap();
        assert_eq!(unit.values, vec![1.0; 6]);
        let tiny = build_coefficients(&spec, 1e-10, Variant::Perturbative).unwrap();
        assert_eq!(tiny.values, vec![1.0; 6]);
    }

    #[test]
    fn coefficients_uniform_value() {
        let spec = ChainSpec::uniform(6, 1.0, 0.2, 0.3).unwrap();
        let c = build_coefficients(&spec, 0.5, Variant::Perturbative).unwrap();
        // f(0.1) f(0.5)^2 from the Taylor series of tan(x)/x to x^10
        let f = |x: f64| {
            let x2 = x * x;
            1.0 + x2 / 3.0 + 2.0 * x2 * x2 / 15.0 + 17.0 * x2.powi(3) / 315.0
                + 62.0 * x2.powi(4) / 2835.0
                + 1382.0 * x2.powi(5) / 155925.0
        };
        let want = f(0.1) * f(0.5) * f(0.5);
        for v in &c.values {
            assert!((v - want).abs() < 1e-5, "{v} vs {want}");
            assert!((v - 1.197).abs() < 1e-3);
        }
        assert!(c.beyond_first_branch.is_empty());
    }

    #[test]
    fn coefficients_nonuniform_wrap() {
        let spec = ChainSpec::new(4, vec![0.5, 1.0, 0.3, 0.8], vec![0.1, 0.2, 0.3, 0.4], vec![0.1; 4]).unwrap();
        let t = 0.6;
        let f = |x: f64| scaling_f(x).unwrap();
        let c = build_coefficients(&spec, t, Variant::Perturbative).unwrap();
        // site 1 sits between bond 4 (sites 4-1) and bond 1
        assert!((c.values[0] - f(0.1 * t) * f(0.8 * t) * f(0.5 * t)).abs() < 1e-15);
        assert!((c.values[2] - f(0.3 * t) * f(1.0 * t) * f(0.3 * t)).abs() < 1e-15);

        let l1 = first_level_coefficients(&spec, t).unwrap();
        assert_eq!(l1.values, vec![f(0.5 * t), f(0.5 * t), f(0.3 * t), f(0.3 * t)]);
        let l2 = second_level_coefficients(&spec, t).unwrap();
        for k in 0..4 {
            let g = f(spec.longitudinal()[k] * t);
            assert!((l2.values[k] * g - c.values[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn coefficients_pole_reports_argument() {
        let spec = ChainSpec::new(4, vec![1.0; 4], vec![0.2, 0.2, 1.0, 0.2], vec![0.3; 4]).unwrap();
        let err = build_coefficients(&spec, FRAC_PI_2, Variant::Perturbative).unwrap_err();
        // the coupling arguments hit the pole first at site 1
        assert!(matches!(err, SchemeError::NearPole { argument: PoleArgument::Coupling { .. }, .. }));
        let spec = ChainSpec::new(4, vec![0.1; 4], vec![0.2, 0.2, 2.0, 0.2], vec![0.3; 4]).unwrap();
        let err = build_coefficients(&spec, FRAC_PI_4, Variant::Perturbative).unwrap_err();
        assert_eq!(
            err,
            SchemeError::NearPole { x: 2.0 * FRAC_PI_4, argument: PoleArgument::Longitudinal { site: 3 } }
        );
    }

    #[test]
    fn coefficients_flag_later_branches() {
        let spec = ChainSpec::uniform(4, 1.0, 0.2, 0.3).unwrap();
        let c = build_coefficients(&spec, 1.8, Variant::Perturbative).unwrap();
        assert_eq!(c.beyond_first_branch.len(), 4);
        assert!(c.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn structured_factors_match_dense_construction() {
        let spec = ChainSpec::new(4, vec![1.0, 0.7, 1.2, 0.9], vec![0.2, 0.1, 0.3, 0.25], vec![0.3, 0.2, 0.1, 0.4]).unwrap();
        let terms = build_terms(&spec).unwrap();
        let t = 0.45;
        let coeffs = build_coefficients(&spec, t, Variant::Perturbative).unwrap();

        // B2' as a dense Hermitian operator
        let mut b2p = ComplexMatrix::zeros(16);
        for k in 1..=4 {
            let x = crate::model::site_operator(4, k, Pauli::X).unwrap();
            b2p = &b2p + &x.scale_real(coeffs.values[k - 1] * spec.transverse()[k - 1]);
        }
        let e = |m: &ComplexMatrix, tau: f64| expm_hermitian(m, tau, Direction::Forward).unwrap();
        let seq: [(&ComplexMatrix, f64); 15] = [
            (&b2p, t / 8.0), (&terms.b1, t / 4.0), (&b2p, t / 8.0), (&terms.a2, t / 2.0),
            (&b2p, t / 8.0), (&terms.b1, t / 4.0), (&b2p, t / 8.0), (&terms.a1, t),
            (&b2p, t / 8.0), (&terms.b1, t / 4.0), (&b2p, t / 8.0), (&terms.a2, t / 2.0),
            (&b2p, t / 8.0), (&terms.b1, t / 4.0), (&b2p, t / 8.0),
        ];
        let dense = seq
            .iter()
            .fold(ComplexMatrix::identity(16), |acc, (m, tau)| &acc * &e(m, *tau));
        let fast = nested_product(&terms, &coeffs, &spec, t).unwrap();
        assert!(fast.max_abs_diff(&dense) < 1e-12);

        let f = build_formula(SchemeId::NestedPerturbative, &spec, t, 1).unwrap().unwrap();
        assert_eq!(f.factors().len(), 15);
        let by_factors = f
            .factors()
            .iter()
            .fold(ComplexMatrix::identity(16), |acc, fac| &acc * &fac.to_dense());
        assert!(by_factors.max_abs_diff(&dense) < 1e-12);

        let trot_dense = &(&e(&terms.b2, t / 2.0) * &e(&(&(&terms.a1 + &terms.a2) + &terms.b1), t))
            * &e(&terms.b2, t / 2.0);
        assert!(trotter2_chain(&terms, t).max_abs_diff(&trot_dense) < 1e-12);
    }

    #[test]
    fn transverse_free_chain_is_exact_for_all_formulas() {
        let spec = ChainSpec::new(6, vec![1.0, 0.8, 1.1, 0.9, 1.0, 1.2], vec![0.2, 0.5, 0.1, 0.3, 0.2, 0.4], vec![0.0; 6]).unwrap();
        for t in [0.3, 1.0, 1.9] {
            let ex = exact(&spec, t);
            for s in [SchemeId::Trotter2, SchemeId::NestedUnit, SchemeId::NestedPerturbative] {
                assert!((fid(&ex, &formula(s, &spec, t)) - 1.0).abs() <= 1e-12, "{s} at {t}");
            }
        }
    }

    #[test]
    fn zero_time_gives_identity() {
        let spec = ChainSpec::uniform(4, 1.0, 0.2, 0.3).unwrap();
        for s in [SchemeId::Trotter2, SchemeId::NestedUnit, SchemeId::NestedPerturbative] {
            assert_eq!(formula(s, &spec, 0.0), ComplexMatrix::identity(16));
        }
    }

    #[test]
    fn nested_beats_trotter2_at_moderate_time() {
        let spec = ChainSpec::uniform(6, 1.0, 0.2, 0.3).unwrap();
        let t = 0.6;
        let ex = exact(&spec, t);
        let fp = fid(&ex, &formula(SchemeId::NestedPerturbative, &spec, t));
        let ft = fid(&ex, &formula(SchemeId::Trotter2, &spec, t));
        assert!(fp > ft, "{fp} vs {ft}");
    }

    #[test]
    fn time_reversal_symmetry() {
        let spec = ChainSpec::new(4, vec![1.0, 0.7, 1.2, 0.9], vec![0.2, 0.1, 0.3, 0.25], vec![0.3, 0.2, 0.1, 0.4]).unwrap();
        for s in [SchemeId::Trotter2, SchemeId::NestedUnit, SchemeId::NestedPerturbative] {
            for t in [0.2, 0.9] {
                let fwd = formula(s, &spec, t);
                let back = formula(s, &spec, -t);
                assert!(back.max_abs_diff(&fwd.dagger()) <= 1e-12, "{s}");
            }
        }
        let (alpha, t) = (0.3, 0.8);
        let p = single_qubit_perturbative(alpha, t).unwrap();
        assert!(single_qubit_perturbative(alpha, -t).unwrap().max_abs_diff(&p.dagger()) < 1e-14);
    }

    #[test]
    fn unit_and_perturbative_coincide_for_tiny_t() {
        let spec = ChainSpec::uniform(4, 1.0, 0.2, 0.3).unwrap();
        let t = 1e-6;
        let u = formula(SchemeId::NestedUnit, &spec, t);
        let p = formula(SchemeId::NestedPerturbative, &spec, t);
        assert!(u.max_abs_diff(&p) <= 1e-10);
    }

    #[test]
    fn perturbative_with_unit_coefficients_is_nested_unit() {
        let spec = ChainSpec::uniform(4, 1.0, 0.2, 0.3).unwrap();
        let terms = build_terms(&spec).unwrap();
        let t = 0.9;
        let u = formula(SchemeId::NestedUnit, &spec, t);
        let forced = nested_product(&terms, &CoefficientSet::unit(4), &spec, t).unwrap();
        assert_eq!(u, forced);
    }

    #[test]
    fn repetition_runs_the_step_formula() {
        let spec = ChainSpec::uniform(4, 1.0, 0.2, 0.3).unwrap();
        let t = 0.8;
        let once = formula(SchemeId::Trotter2, &spec, t / 3.0);
        let rep = build_formula(SchemeId::Trotter2, &spec, t, 3).unwrap().unwrap().to_matrix(Execution::Serial);
        assert!(rep.max_abs_diff(&(&(&once * &once) * &once)) < 1e-13);
        assert_eq!(build_formula(SchemeId::Trotter2, &spec, t, 0).unwrap_err(), SchemeError::ZeroSteps);
    }

    #[test]
    fn coefficient_length_checked() {
        let spec = ChainSpec::uniform(4, 1.0, 0.2, 0.3).unwrap();
        let terms = build_terms(&spec).unwrap();
        let err = nested_product(&terms, &CoefficientSet::unit(6), &spec, 0.3).unwrap_err();
        assert_eq!(err, SchemeError::CoefficientLength { expected: 4, got: 6 });
    }

    #[test]
    fn unitary_counts() {
        let spec = ChainSpec::uniform(6, 1.0, 0.2, 0.3).unwrap();
        assert_eq!(local_unitary_count(SchemeId::Trotter2, &spec).unwrap().count, 24);
        let nested = local_unitary_count(SchemeId::NestedPerturbative, &spec).unwrap();
        assert_eq!(nested.count, 81);
        assert_eq!(nested.ratio_vs_trotter2, Ratio::new(27, 8));
        assert_eq!(
            local_unitary_count(SchemeId::Exact, &spec),
            Err(SchemeError::UnsupportedScheme(SchemeId::Exact))
        );
        assert_eq!(skeleton(SchemeId::NestedUnit).unwrap().len(), 15);
    }

    #[test]
    fn scheme_names_roundtrip() {
        for s in SchemeId::ALL {
            assert_eq!(s.as_str().parse::<SchemeId>().unwrap(), s);
        }
        assert!("trotter4".parse::<SchemeId>().is_err());
    }
}
