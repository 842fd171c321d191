//! Fidelity measurements against the exact oracle.
//!
//! Every chain measurement goes through [`Evaluator`], which diagonalizes `H`
//! once and then scores any product formula `W` at time `t` with
//!
//! ```text
//! Tr(W U†) = sum_k exp(i t λ_k) <v_k| W |v_k>
//! ```
//!
//! where `W` is applied factor by factor to the eigenvector matrix. Grid points
//! are independent tasks and are merged by index.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use num_complex::Complex64;

use crate::densela::{hermitian_eig, ComplexMatrix, HermitianEigen, LinalgError};
use crate::model::{build_terms, ChainSpec, ModelError};
use crate::par::{self, Execution};
use crate::schemes::{build_formula, PoleArgument, ProductFormula, SchemeError, SchemeId};

/// Unitarity tolerance for inputs of [`fidelity`].
pub const FIDELITY_UNITARY_TOL: f64 = 1e-9;

/// Default fidelity level at which errors are compared.
pub const DEFAULT_BASELINE: f64 = 0.9999;

/// Endpoints of advantage intervals are refined to `spacing / REFINE_DIVISOR`.
pub const REFINE_DIVISOR: f64 = 16.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("{which} operand is not unitary (max |UU^dagger - I| = {deviation:e})")]
    NotUnitary { which: &'static str, deviation: f64 },
    #[error("time grid must be non-empty, finite and strictly ascending")]
    InvalidGrid,
    #[error("{} grid point(s) within the pole guard, first at t = {}", .0.len(), .0[0].t)]
    NearPole(Vec<PoleHit>),
    #[error("reference fidelity never drops below the baseline {baseline} on the grid")]
    BaselineNotCrossed { baseline: f64 },
    #[error("reference scheme must be trotter2 or nested-unit, got `{0}`")]
    InvalidReference(SchemeId),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A time at which the perturbative coefficients could not be formed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleHit {
    pub t: f64,
    pub x: f64,
    pub argument: PoleArgument,
}

impl PoleHit {
    fn from_error(t: f64, err: &SchemeError) -> Option<Self> {
        match *err {
            SchemeError::NearPole { x, argument } => Some(Self { t, x, argument }),
            _ => None,
        }
    }
}

/// `|Tr(U V†)|² / d²`.
pub fn fidelity(u: &ComplexMatrix, v: &ComplexMatrix) -> Result<f64, AnalysisError> {
    if u.dim() != v.dim() {
        return Err(AnalysisError::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    for (which, m) in [("first", u), ("second", v)] {
        let deviation = m.unitarity_error();
        if deviation > FIDELITY_UNITARY_TOL {
            return Err(AnalysisError::NotUnitary { which, deviation });
        }
    }
    Ok(trace_fidelity(u, v))
}

fn trace_fidelity(u: &ComplexMatrix, v: &ComplexMatrix) -> f64 {
    let overlap: Complex64 = u
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(a, b)| a * b.conj())
        .sum();
    let d = u.dim() as f64;
    overlap.norm_sqr() / (d * d)
}

/// Spectral norm of `u - v`.
pub fn operator_distance(u: &ComplexMatrix, v: &ComplexMatrix) -> Result<f64, AnalysisError> {
    if u.dim() != v.dim() {
        return Err(AnalysisError::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    Ok((u - v).spectral_norm()?)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

/// `count` evenly spaced points on `(t_min, t_max]`, or `[t_min, t_max]` when
/// `include_start` is set.
pub fn time_grid(t_min: f64, t_max: f64, count: usize, include_start: bool) -> Vec<f64> {
    if include_start {
        let step = (t_max - t_min) / (count.max(2) - 1) as f64;
        (0..count).map(|i| t_min + step * i as f64).collect()
    } else {
        let step = (t_max - t_min) / count as f64;
        (1..=count).map(|i| t_min + step * i as f64).collect()
    }
}

fn check_grid(t_grid: &[f64]) -> Result<(), AnalysisError> {
    if t_grid.is_empty()
        || t_grid.iter().any(|t| !t.is_finite())
        || t_grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(AnalysisError::InvalidGrid);
    }
    Ok(())
}

/// Scheme the perturbative formula is compared against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    Trotter2,
    /// The same fifteen-factor nest with unit coefficients.
    #[default]
    NestedUnit,
}

impl Reference {
    pub fn scheme(self) -> SchemeId {
        match self {
            Reference::Trotter2 => SchemeId::Trotter2,
            Reference::NestedUnit => SchemeId::NestedUnit,
        }
    }
}

impl TryFrom<SchemeId> for Reference {
    type Error = AnalysisError;

    fn try_from(s: SchemeId) -> Result<Self, Self::Error> {
        match s {
            SchemeId::Trotter2 => Ok(Reference::Trotter2),
            SchemeId::NestedUnit => Ok(Reference::NestedUnit),
            other => Err(AnalysisError::InvalidReference(other)),
        }
    }
}

/// Exact propagator of one chain, reusable across times.
#[derive(Clone, Debug)]
pub struct ExactOracle {
    spec: ChainSpec,
    eig: HermitianEigen,
}

impl ExactOracle {
    pub fn new(spec: &ChainSpec) -> Result<Self, AnalysisError> {
        let terms = build_terms(spec)?;
        let eig = hermitian_eig(&terms.h_total)?;
        Ok(Self {
            spec: spec.clone(),
            eig,
        })
    }

    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    pub fn eigen(&self) -> &HermitianEigen {
        &self.eig
    }

    /// `exp(-i t H)`.
    pub fn unitary(&self, t: f64) -> ComplexMatrix {
        if t == 0.0 {
            return ComplexMatrix::identity(self.eig.dim());
        }
        self.eig.evolution(t, crate::densela::Direction::Forward)
    }

    /// Fidelity of `formula` against `exp(-i t H)` without forming either matrix.
    pub fn fidelity_of(&self, formula: &ProductFormula, t: f64, exec: Execution) -> f64 {
        let v = &self.eig.vectors;
        let n = v.dim();
        let mut wv = v.clone();
        formula.apply_left(&mut wv, exec);
        // diag(V† W V)
        let mut diag = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let (vr, wr) = (v.row(i), wv.row(i));
            for k in 0..n {
                diag[k] += vr[k].conj() * wr[k];
            }
        }
        let overlap: Complex64 = diag
            .iter()
            .zip(&self.eig.values)
            .map(|(d, &l)| d * Complex64::from_polar(1.0, t * l))
            .sum();
        let d = n as f64;
        overlap.norm_sqr() / (d * d)
    }
}

/// Scores schemes for one chain.
#[derive(Clone, Debug)]
pub struct Evaluator {
    oracle: ExactOracle,
    exec: Execution,
    steps: usize,
}

impl Evaluator {
    pub fn new(spec: &ChainSpec) -> Result<Self, AnalysisError> {
        Ok(Self {
            oracle: ExactOracle::new(spec)?,
            exec: Execution::default(),
            steps: 1,
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Apply each formula `steps` times at `t / steps` (default 1).
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps.max(1);
        self
    }

    pub fn spec(&self) -> &ChainSpec {
        self.oracle.spec()
    }

    pub fn oracle(&self) -> &ExactOracle {
        &self.oracle
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Fidelity of one scheme at one time. Inner work runs on `exec`.
    fn fidelity_inner(&self, scheme: SchemeId, t: f64, exec: Execution) -> Result<f64, SchemeError> {
        match build_formula(scheme, self.spec(), t, self.steps)? {
            None => Ok(1.0),
            Some(f) => Ok(self.oracle.fidelity_of(&f, t, exec)),
        }
    }

    pub fn fidelity(&self, scheme: SchemeId, t: f64) -> Result<f64, SchemeError> {
        self.fidelity_inner(scheme, t, self.exec)
    }

    /// Evaluates `f(t)` on every grid point, in parallel when enabled.
    fn map_grid<T: Send>(&self, t_grid: &[f64], f: impl Fn(f64) -> T + Sync + Send) -> Vec<T> {
        par::map_indexed(self.exec, t_grid.len(), |i| f(t_grid[i]))
    }

    pub fn curve(&self, scheme: SchemeId, t_grid: &[f64]) -> Result<FidelityCurve, AnalysisError> {
        check_grid(t_grid)?;
        let results = self.map_grid(t_grid, |t| self.fidelity_inner(scheme, t, Execution::Serial));
        let mut fidelity = Vec::with_capacity(t_grid.len());
        let mut hits = Vec::new();
        for (&t, r) in t_grid.iter().zip(results) {
            match r {
                Ok(f) => fidelity.push(f),
                Err(e) => match PoleHit::from_error(t, &e) {
                    Some(hit) => hits.push(hit),
                    None => return Err(e.into()),
                },
            }
        }
        if !hits.is_empty() {
            return Err(AnalysisError::NearPole(hits));
        }
        Ok(FidelityCurve {
            t_grid: t_grid.to_vec(),
            fidelity,
            scheme,
            spec: self.spec().clone(),
        })
    }

    /// All three product formulas on one grid. Pole points are recorded, not
    /// fatal.
    pub fn compare(&self, t_grid: &[f64]) -> Result<ComparisonTable, AnalysisError> {
        check_grid(t_grid)?;
        let rows = self.map_grid(t_grid, |t| {
            let s = Execution::Serial;
            (
                self.fidelity_inner(SchemeId::Trotter2, t, s),
                self.fidelity_inner(SchemeId::NestedUnit, t, s),
                self.fidelity_inner(SchemeId::NestedPerturbative, t, s),
            )
        });
        let mut table = ComparisonTable {
            t_grid: t_grid.to_vec(),
            trotter2: Vec::with_capacity(rows.len()),
            nested_unit: Vec::with_capacity(rows.len()),
            nested_perturbative: Vec::with_capacity(rows.len()),
            pole_hits: Vec::new(),
            beyond_first_branch: Vec::new(),
        };
        for (&t, (tr, nu, np)) in t_grid.iter().zip(rows) {
            table.trotter2.push(tr?);
            table.nested_unit.push(nu?);
            match np {
                Ok(f) => table.nested_perturbative.push(Some(f)),
                Err(e) => match PoleHit::from_error(t, &e) {
                    Some(hit) => {
                        table.pole_hits.push(hit);
                        table.nested_perturbative.push(None);
                    }
                    None => return Err(e.into()),
                },
            }
            if crate::schemes::build_coefficients(
                self.spec(),
                t / self.steps as f64,
                crate::schemes::Variant::Perturbative,
            )
            .map(|c| !c.beyond_first_branch.is_empty())
            .unwrap_or(false)
            {
                table.beyond_first_branch.push(t);
            }
        }
        Ok(table)
    }

    /// `F_pert(t) - F_ref(t)`, or `None` at a pole.
    fn advantage_at(&self, t: f64, reference: Reference) -> Result<Option<f64>, AnalysisError> {
        let fr = self.fidelity(reference.scheme(), t)?;
        match self.fidelity(SchemeId::NestedPerturbative, t) {
            Ok(fp) => Ok(Some(fp - fr)),
            Err(SchemeError::NearPole { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Bisects a bracket `[a, b]` whose ends disagree on advantage. Returns the
    /// midpoint of the final bracket.
    fn refine(&self, mut a: f64, mut b: f64, a_wins: bool, resolution: f64, reference: Reference) -> Result<f64, AnalysisError> {
        while b - a > resolution {
            let mid = 0.5 * (a + b);
            let Some(delta) = self.advantage_at(mid, reference)? else {
                break;
            };
            if (delta > 0.0) == a_wins {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }

    pub fn advantage_window(
        &self,
        table: &ComparisonTable,
        reference: Reference,
    ) -> Result<AdvantageWindow, AnalysisError> {
        let t = &table.t_grid;
        let delta = table.advantage(reference);
        let wins: Vec<Option<bool>> = delta.iter().map(|d| d.map(|d| d > 0.0)).collect();
        let spacing = t
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let resolution = if spacing.is_finite() {
            spacing / REFINE_DIVISOR
        } else {
            0.0
        };

        let mut intervals = Vec::new();
        let mut i = 0;
        while i < t.len() {
            if wins[i] != Some(true) {
                i += 1;
                continue;
            }
            let start = i;
            while i + 1 < t.len() && wins[i + 1] == Some(true) {
                i += 1;
            }
            let end = i;
            let lo = if start > 0 && wins[start - 1] == Some(false) {
                let res = (t[start] - t[start - 1]) / REFINE_DIVISOR;
                self.refine(t[start - 1], t[start], false, res, reference)?
            } else {
                t[start]
            };
            let hi = if end + 1 < t.len() && wins[end + 1] == Some(false) {
                let res = (t[end + 1] - t[end]) / REFINE_DIVISOR;
                self.refine(t[end], t[end + 1], true, res, reference)?
            } else {
                t[end]
            };
            if lo < hi {
                intervals.push((lo, hi));
            }
            i += 1;
        }
        Ok(AdvantageWindow {
            intervals,
            resolution,
            g: self.spec().longitudinal()[0],
            h: self.spec().transverse()[0],
            reference,
        })
    }

    pub fn improvement(
        &self,
        table: &ComparisonTable,
        baseline: f64,
        reference: Reference,
    ) -> Result<ImprovementPoint, AnalysisError> {
        let t = &table.t_grid;
        let f_ref = table.reference(reference);
        let delta = table.advantage(reference);

        let (t_at_max, max_improvement) = t
            .iter()
            .zip(&delta)
            .filter_map(|(&t, d)| d.map(|d| (t, d)))
            .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
        if !max_improvement.is_finite() {
            return Err(AnalysisError::NearPole(table.pole_hits.clone()));
        }

        let crossing = (1..t.len())
            .find(|&i| f_ref[i - 1] >= baseline && f_ref[i] < baseline)
            .ok_or(AnalysisError::BaselineNotCrossed { baseline })?;
        let (t0, t1) = (t[crossing - 1], t[crossing]);
        let (f0, f1) = (f_ref[crossing - 1], f_ref[crossing]);
        let baseline_time = t0 + (f0 - baseline) / (f0 - f1) * (t1 - t0);

        let reference_fidelity = self.fidelity(reference.scheme(), baseline_time)?;
        let fidelity_at_baseline = self
            .fidelity(SchemeId::NestedPerturbative, baseline_time)
            .map_err(|e| match PoleHit::from_error(baseline_time, &e) {
                Some(hit) => AnalysisError::NearPole(vec![hit]),
                None => e.into(),
            })?;
        let error_reduction = 1.0 - (1.0 - fidelity_at_baseline) / (1.0 - reference_fidelity);
        Ok(ImprovementPoint {
            max_improvement,
            t_at_max_improvement: t_at_max,
            baseline,
            baseline_time,
            fidelity_at_baseline,
            reference_fidelity_at_baseline: reference_fidelity,
            error_reduction,
            reference,
        })
    }
}

/// Fidelity of one scheme against the exact evolution over a time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityCurve {
    pub t_grid: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub scheme: SchemeId,
    pub spec: ChainSpec,
}

/// Fidelities of the three product formulas on a shared grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub t_grid: Vec<f64>,
    pub trotter2: Vec<f64>,
    pub nested_unit: Vec<f64>,
    /// `None` where the scaling function hit its pole guard.
    pub nested_perturbative: Vec<Option<f64>>,
    pub pole_hits: Vec<PoleHit>,
    /// Grid times where some `tan` argument is past its first pole.
    pub beyond_first_branch: Vec<f64>,
}

impl ComparisonTable {
    pub fn reference(&self, reference: Reference) -> &[f64] {
        match reference {
            Reference::Trotter2 => &self.trotter2,
            Reference::NestedUnit => &self.nested_unit,
        }
    }

    /// `F_pert - F_ref` per grid point.
    pub fn advantage(&self, reference: Reference) -> Vec<Option<f64>> {
        self.nested_perturbative
            .iter()
            .zip(self.reference(reference))
            .map(|(p, r)| p.map(|p| p - r))
            .collect()
    }
}

/// Maximal time intervals where the perturbative formula strictly wins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageWindow {
    pub intervals: Vec<(f64, f64)>,
    pub resolution: f64,
    pub g: f64,
    pub h: f64,
    pub reference: Reference,
}

impl AdvantageWindow {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementPoint {
    /// Largest `F_pert - F_ref` over the grid; negative when there is no
    /// advantage anywhere.
    pub max_improvement: f64,
    pub t_at_max_improvement: f64,
    pub baseline: f64,
    /// First time the reference fidelity falls to `baseline` (interpolated).
    pub baseline_time: f64,
    pub fidelity_at_baseline: f64,
    pub reference_fidelity_at_baseline: f64,
    /// `1 - (1 - F_pert) / (1 - F_ref)` at `baseline_time`.
    pub error_reduction: f64,
    pub reference: Reference,
}

/// Parameter varied by a sweep; every site gets the same value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    G,
    H,
}

impl SweepAxis {
    pub fn apply(self, base: &ChainSpec, value: f64) -> Result<ChainSpec, ModelError> {
        let v = vec![value; base.n_sites()];
        match self {
            SweepAxis::G => base.with_longitudinal(v),
            SweepAxis::H => base.with_transverse(v),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum SweepOutcome {
    Ok(ImprovementPoint),
    Failed { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub outcome: SweepOutcome,
    pub window: Option<AdvantageWindow>,
    pub pole_hits: Vec<PoleHit>,
    pub beyond_first_branch: Vec<f64>,
}

impl SweepRow {
    pub fn metrics(&self) -> Option<&ImprovementPoint> {
        match &self.outcome {
            SweepOutcome::Ok(p) => Some(p),
            SweepOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub reference: Reference,
    pub baseline: f64,
    pub rows: Vec<SweepRow>,
}

/// Options shared by the window, metric and sweep entry points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalysisOptions {
    pub reference: Reference,
    pub baseline: f64,
    pub exec: Execution,
    pub steps: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            reference: Reference::default(),
            baseline: DEFAULT_BASELINE,
            exec: Execution::default(),
            steps: 1,
        }
    }
}

impl AnalysisOptions {
    fn evaluator(&self, spec: &ChainSpec) -> Result<Evaluator, AnalysisError> {
        Ok(Evaluator::new(spec)?
            .with_execution(self.exec)
            .with_steps(self.steps))
    }
}

/// Fidelity of `scheme` against exact evolution at every grid time.
pub fn fidelity_curve(
    spec: &ChainSpec,
    scheme: SchemeId,
    t_grid: &[f64],
) -> Result<FidelityCurve, AnalysisError> {
    Evaluator::new(spec)?.curve(scheme, t_grid)
}

pub fn advantage_window(spec: &ChainSpec, t_grid: &[f64]) -> Result<AdvantageWindow, AnalysisError> {
    advantage_window_with(spec, t_grid, &AnalysisOptions::default())
}

pub fn advantage_window_with(
    spec: &ChainSpec,
    t_grid: &[f64],
    opts: &AnalysisOptions,
) -> Result<AdvantageWindow, AnalysisError> {
    let eval = opts.evaluator(spec)?;
    let table = eval.compare(t_grid)?;
    eval.advantage_window(&table, opts.reference)
}

pub fn improvement_metrics(
    spec: &ChainSpec,
    t_grid: &[f64],
    baseline: f64,
) -> Result<ImprovementPoint, AnalysisError> {
    let opts = AnalysisOptions {
        baseline,
        ..AnalysisOptions::default()
    };
    improvement_metrics_with(spec, t_grid, &opts)
}

pub fn improvement_metrics_with(
    spec: &ChainSpec,
    t_grid: &[f64],
    opts: &AnalysisOptions,
) -> Result<ImprovementPoint, AnalysisError> {
    let eval = opts.evaluator(spec)?;
    let table = eval.compare(t_grid)?;
    eval.improvement(&table, opts.baseline, opts.reference)
}

pub fn parameter_sweep(
    base: &ChainSpec,
    axis: SweepAxis,
    values: &[f64],
    t_grid: &[f64],
) -> Result<SweepResult, AnalysisError> {
    parameter_sweep_with(base, axis, values, t_grid, &AnalysisOptions::default())
}

/// Window and improvement metrics at each axis value, sorted by value.
pub fn parameter_sweep_with(
    base: &ChainSpec,
    axis: SweepAxis,
    values: &[f64],
    t_grid: &[f64],
    opts: &AnalysisOptions,
) -> Result<SweepResult, AnalysisError> {
    check_grid(t_grid)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rows = sorted
        .iter()
        .map(|&value| sweep_row(base, axis, value, t_grid, opts))
        .collect();
    Ok(SweepResult {
        axis,
        reference: opts.reference,
        baseline: opts.baseline,
        rows,
    })
}

fn sweep_row(
    base: &ChainSpec,
    axis: SweepAxis,
    value: f64,
    t_grid: &[f64],
    opts: &AnalysisOptions,
) -> SweepRow {
    let failed = |e: AnalysisError| SweepRow {
        axis_value: value,
        outcome: SweepOutcome::Failed {
            error: e.to_string(),
        },
        window: None,
        pole_hits: Vec::new(),
        beyond_first_branch: Vec::new(),
    };
    let spec = match axis.apply(base, value) {
        Ok(s) => s,
        Err(e) => return failed(e.into()),
    };
    let eval = match opts.evaluator(&spec) {
        Ok(e) => e,
        Err(e) => return failed(e),
    };
    let table = match eval.compare(t_grid) {
        Ok(t) => t,
        Err(e) => return failed(e),
    };
    let window = eval.advantage_window(&table, opts.reference).ok();
    let outcome = match eval.improvement(&table, opts.baseline, opts.reference) {
        Ok(p) => SweepOutcome::Ok(p),
        Err(e) => SweepOutcome::Failed {
            error: e.to_string(),
        },
    };
    SweepRow {
        axis_value: value,
        outcome,
        window,
        pole_hits: table.pole_hits,
        beyond_first_branch: table.beyond_first_branch,
    }
}
