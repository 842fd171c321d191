//! Executes a [`RunConfig`] and writes its data files plus a metadata sidecar.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::config::{ConfigError, Experiment, Format, PolePolicy, RunConfig};
use super::presets::Preset;
use crate::analysis::{
    self, AdvantageWindow, AnalysisError, AnalysisOptions, Evaluator, PoleHit, SweepOutcome,
};
use crate::model::ChainSpec;
use crate::schemes::{self, PoleArgument, SchemeError, SchemeId};

pub const TOOL_NAME: &str = "ising-pert";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{} evaluation(s) hit the pole guard, first at t = {} ({})", .0.len(), .0[0].t, .0[0].context)]
    Pole(Vec<PoleEvent>),
    #[error("{0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Pole(_) => 3,
            RunError::Numeric(_) => 4,
            RunError::Io { .. } => 1,
        }
    }

    /// Short diagnostic name.
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config-error",
            RunError::Pole(_) => "pole-guard",
            RunError::Numeric(_) => "numeric-failure",
            RunError::Io { .. } => "io-error",
        }
    }

    fn analysis(context: &str, e: AnalysisError) -> Self {
        match e {
            AnalysisError::NearPole(hits) => {
                RunError::Pole(hits.iter().map(|h| PoleEvent::new(context, h)).collect())
            }
            AnalysisError::Scheme(e) => RunError::scheme(context, f64::NAN, e),
            AnalysisError::Model(e) => RunError::Config(ConfigError::Validation(e.to_string())),
            other => RunError::Numeric(format!("{context}: {other}")),
        }
    }

    fn scheme(context: &str, t: f64, e: SchemeError) -> Self {
        match e {
            SchemeError::NearPole { x, argument } => RunError::Pole(vec![PoleEvent {
                context: context.to_string(),
                t,
                x,
                argument,
            }]),
            other => RunError::Numeric(format!("{context}: {other}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoleEvent {
    pub context: String,
    pub t: f64,
    pub x: f64,
    pub argument: PoleArgument,
}

impl PoleEvent {
    fn new(context: &str, hit: &PoleHit) -> Self {
        Self {
            context: context.to_string(),
            t: hit.t,
            x: hit.x,
            argument: hit.argument,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchFlag {
    pub context: String,
    pub times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailedPoint {
    pub context: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub pole_guard: f64,
    pub small_argument: f64,
    pub hermitian: f64,
    pub unitary: f64,
    pub fidelity_unitary: f64,
    pub window_refine_divisor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pole_guard: schemes::POLE_GUARD,
            small_argument: schemes::SMALL_ARGUMENT,
            hermitian: crate::densela::HERMITIAN_TOL,
            unitary: crate::densela::UNITARY_TOL,
            fidelity_unitary: analysis::FIDELITY_UNITARY_TOL,
            window_refine_divisor: analysis::REFINE_DIVISOR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub notes: &'static [&'static str],
}

/// Contents of the `.meta.json` sidecar.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub label: String,
    pub preset: Option<PresetInfo>,
    pub config: RunConfig,
    pub tolerances: Tolerances,
    pub pole_events: Vec<PoleEvent>,
    pub beyond_first_branch: Vec<BranchFlag>,
    pub failed_points: Vec<FailedPoint>,
    /// Exact cost ratios of count runs, as `numerator/denominator`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub unit_ratios: Vec<String>,
    pub files: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Cell {
    Num(f64),
    Int(u64),
}

/// One output file worth of rows.
#[derive(Clone, Debug, PartialEq)]
struct Table {
    stem: String,
    columns: &'static [&'static str],
    rows: Vec<Vec<Cell>>,
}

/// Seventeen significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

impl Table {
    fn new(stem: String, columns: &'static [&'static str]) -> Self {
        Self {
            stem,
            columns,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn check_finite(&self) -> Result<(), RunError> {
        for row in &self.rows {
            for (cell, col) in row.iter().zip(self.columns) {
                if let Cell::Num(x) = cell {
                    if !x.is_finite() {
                        return Err(RunError::Numeric(format!(
                            "non-finite value in column `{col}` of {}",
                            self.stem
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = self.columns.join(",");
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row
                        .iter()
                        .map(|c| match *c {
                            Cell::Num(x) => format_number(x),
                            Cell::Int(n) => n.to_string(),
                        })
                        .collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
                    .rows
                    .iter()
                    .map(|row| {
                        self.columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| {
                                let v = match *v {
                                    Cell::Num(x) => serde_json::Value::from(x),
                                    Cell::Int(n) => serde_json::Value::from(n),
                                };
                                (c.to_string(), v)
                            })
                            .collect()
                    })
                    .collect();
                let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
                s.push('\n');
                s
            }
        }
    }
}

const CURVE_COLUMNS: &[&str] = &["t", "fidelity_trotter2", "fidelity_nested_unit", "fidelity_nested_pert"];
const SINGLE_COLUMNS: &[&str] = &["t", "fidelity_trotter2", "fidelity_perturbative"];
const TWO_COLUMNS: &[&str] = &["t", "fidelity_perturbative"];
const WINDOW_COLUMNS: &[&str] = &["g", "h", "t_lo", "t_hi"];
const SWEEP_COLUMNS: &[&str] = &[
    "axis_value",
    "max_improvement",
    "baseline_time",
    "fidelity_at_baseline",
    "error_reduction",
];
const COUNT_COLUMNS: &[&str] = &["n_sites", "trotter2", "nested", "ratio"];

/// Files written by a successful run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub metadata: Metadata,
}

struct Collector {
    label: String,
    tables: Vec<Table>,
    pole_events: Vec<PoleEvent>,
    branch: Vec<BranchFlag>,
    failed: Vec<FailedPoint>,
    ratios: Vec<String>,
}

impl Collector {
    fn branch(&mut self, context: String, times: Vec<f64>) {
        if !times.is_empty() {
            self.branch.push(BranchFlag { context, times });
        }
    }

    fn poles(&mut self, context: &str, hits: &[PoleHit]) {
        self.pole_events
            .extend(hits.iter().map(|h| PoleEvent::new(context, h)));
    }
}

fn chain_context(spec: &ChainSpec) -> String {
    format!("n_sites={}", spec.n_sites())
}

fn options(config: &RunConfig) -> AnalysisOptions {
    AnalysisOptions {
        reference: config.reference,
        baseline: config.baseline,
        exec: config.execution,
        steps: config.steps,
    }
}

fn evaluator(config: &RunConfig, spec: &ChainSpec, context: &str) -> Result<Evaluator, RunError> {
    Evaluator::new(spec)
        .map(|e| e.with_execution(config.execution).with_steps(config.steps))
        .map_err(|e| RunError::analysis(context, e))
}

fn single_qubit(config: &RunConfig, out: &mut Collector) -> Result<(), RunError> {
    let mut table = Table::new(out.label.clone(), SINGLE_COLUMNS);
    let a = config.alpha;
    let context = format!("alpha={a}");
    for t in config.t_grid() {
        let exact = schemes::single_qubit_exact(a, t);
        let trotter = schemes::single_qubit_trotter2(a, t);
        match schemes::single_qubit_perturbative(a, t) {
            Ok(pert) => {
                let ft = analysis::fidelity(&exact, &trotter).map_err(|e| RunError::analysis(&context, e))?;
                let fp = analysis::fidelity(&exact, &pert).map_err(|e| RunError::analysis(&context, e))?;
                table.push(vec![Cell::Num(t), Cell::Num(ft), Cell::Num(fp)]);
            }
            Err(SchemeError::NearPole { x, argument }) => out.pole_events.push(PoleEvent {
                context: context.clone(),
                t,
                x,
                argument,
            }),
            Err(e) => return Err(RunError::scheme(&context, t, e)),
        }
    }
    out.tables.push(table);
    Ok(())
}

fn two_qubit(config: &RunConfig, out: &mut Collector) -> Result<(), RunError> {
    let p = config.two_site.expect("validated two-qubit config");
    let a = config.alpha;
    let context = format!("alpha={a}");
    let mut table = Table::new(out.label.clone(), TWO_COLUMNS);
    for t in config.t_grid() {
        let exact = schemes::two_qubit_exact(p, a, t);
        match schemes::two_qubit_perturbative(p, a, t) {
            Ok(pert) => {
                let f = analysis::fidelity(&exact, &pert).map_err(|e| RunError::analysis(&context, e))?;
                table.push(vec![Cell::Num(t), Cell::Num(f)]);
            }
            Err(SchemeError::NearPole { x, argument }) => out.pole_events.push(PoleEvent {
                context: context.clone(),
                t,
                x,
                argument,
            }),
            Err(e) => return Err(RunError::scheme(&context, t, e)),
        }
    }
    out.tables.push(table);
    Ok(())
}

fn chain_curves(config: &RunConfig, out: &mut Collector) -> Result<(), RunError> {
    let grid = config.t_grid();
    let many = config.chains.len() > 1;
    for spec in &config.chains {
        let context = chain_context(spec);
        let cmp = evaluator(config, spec, &context)?
            .compare(&grid)
            .map_err(|e| RunError::analysis(&context, e))?;
        let stem = if many {
            format!("{}_n{}", out.label, spec.n_sites())
        } else {
            out.label.clone()
        };
        let mut table = Table::new(stem, CURVE_COLUMNS);
        for (i, &t) in cmp.t_grid.iter().enumerate() {
            if let Some(fp) = cmp.nested_perturbative[i] {
                table.push(vec![
                    Cell::Num(t),
                    Cell::Num(cmp.trotter2[i]),
                    Cell::Num(cmp.nested_unit[i]),
                    Cell::Num(fp),
                ]);
            }
        }
        out.poles(&context, &cmp.pole_hits);
        out.branch(context, cmp.beyond_first_branch);
        out.tables.push(table);
    }
    Ok(())
}

fn window_rows(table: &mut Table, w: &AdvantageWindow) {
    for &(lo, hi) in &w.intervals {
        table.push(vec![Cell::Num(w.g), Cell::Num(w.h), Cell::Num(lo), Cell::Num(hi)]);
    }
}

fn windows(config: &RunConfig, out: &mut Collector) -> Result<(), RunError> {
    let grid = config.t_grid();
    let base = &config.chains[0];
    let mut table = Table::new(out.label.clone(), WINDOW_COLUMNS);
    let points: Vec<(String, ChainSpec)> = match config.axis {
        None => vec![(chain_context(base), base.clone())],
        Some(axis) => config
            .values
            .iter()
            .map(|&v| {
                let spec = axis
                    .apply(base, v)
                    .map_err(|e| RunError::Config(ConfigError::Validation(e.to_string())))?;
                Ok((format!("{axis:?}={v}").to_lowercase(), spec))
            })
            .collect::<Result<_, RunError>>()?,
    };
    let mut points = points;
    points.sort_by(|a, b| {
        let key = |s: &ChainSpec| match config.axis {
            Some(analysis::SweepAxis::H) => s.transverse()[0],
            _ => s.longitudinal()[0],
        };
        key(&a.1).total_cmp(&key(&b.1))
    });
    for (context, spec) in points {
        let eval = evaluator(config, &spec, &context)?;
        let cmp = eval.compare(&grid).map_err(|e| RunError::analysis(&context, e))?;
        let w = eval
            .advantage_window(&cmp, config.reference)
            .map_err(|e| RunError::analysis(&context, e))?;
        window_rows(&mut table, &w);
        out.poles(&context, &cmp.pole_hits);
        out.branch(context, cmp.beyond_first_branch);
    }
    out.tables.push(table);
    Ok(())
}

fn sweep(config: &RunConfig, out: &mut Collector) -> Result<(), RunError> {
    let axis = config.axis.expect("validated sweep config");
    let base = &config.chains[0];
    let result = analysis::parameter_sweep_with(base, axis, &config.values, &config.t_grid(), &options(config))
        .map_err(|e| RunError::analysis("sweep", e))?;
    let mut metrics = Table::new(out.label.clone(), SWEEP_COLUMNS);
    let mut wins = Table::new(format!("{}_windows", out.label), WINDOW_COLUMNS);
    for row in result.rows {
        let context = format!("{axis:?}={}", row.axis_value).to_lowercase();
        match &row.outcome {
            SweepOutcome::Ok(p) => metrics.push(vec![
                Cell::Num(row.axis_value),
                Cell::Num(p.max_improvement),
                Cell::Num(p.baseline_time),
                Cell::Num(p.fidelity_at_baseline),
                Cell::Num(p.error_reduction),
            ]),
            SweepOutcome::Failed { error } => out.failed.push(FailedPoint {
                context: context.clone(),
                error: error.clone(),
            }),
        }
        if let Some(w) = &row.window {
            window_rows(&mut wins, w);
        }
        out.poles(&context, &row.pole_hits);
        out.branch(context, row.beyond_first_branch);
    }
    out.tables.push(metrics);
    out.tables.push(wins);
    Ok(())
}

fn counts(config: &RunConfig, out: &mut Collector) -> Result<(), RunError> {
    let mut table = Table::new(out.label.clone(), COUNT_COLUMNS);
    for spec in &config.chains {
        let context = chain_context(spec);
        let count = |s| schemes::local_unitary_count(s, spec).map_err(|e| RunError::scheme(&context, 0.0, e));
        let trotter = count(SchemeId::Trotter2)?;
        let nested = count(SchemeId::NestedPerturbative)?;
        let r = nested.ratio_vs_trotter2;
        table.push(vec![
            Cell::Int(spec.n_sites() as u64),
            Cell::Int(trotter.count),
            Cell::Int(nested.count),
            Cell::Num(*r.numer() as f64 / *r.denom() as f64),
        ]);
        out.ratios.push(format!("{context}: {}/{}", r.numer(), r.denom()));
    }
    out.tables.push(table);
    Ok(())
}

/// Runs `config`, writing into `config.output_path`. Nothing is left behind on
/// failure.
pub fn run(config: &RunConfig, label: &str, preset: Option<&Preset>) -> Result<RunReport, RunError> {
    let mut out = Collector {
        label: label.to_string(),
        tables: Vec::new(),
        pole_events: Vec::new(),
        branch: Vec::new(),
        failed: Vec::new(),
        ratios: Vec::new(),
    };
    match config.experiment {
        Experiment::SingleQubit => single_qubit(config, &mut out)?,
        Experiment::TwoQubit => two_qubit(config, &mut out)?,
        Experiment::ChainCurve => chain_curves(config, &mut out)?,
        Experiment::Window => windows(config, &mut out)?,
        Experiment::Sweep => sweep(config, &mut out)?,
        Experiment::Count => counts(config, &mut out)?,
    }
    if config.on_pole == PolePolicy::Fail && !out.pole_events.is_empty() {
        return Err(RunError::Pole(out.pole_events));
    }
    for t in &out.tables {
        t.check_finite()?;
    }

    let ext = config.format.extension();
    let mut staging = Staging::new(&config.output_path)?;
    let mut names = Vec::new();
    for t in &out.tables {
        let name = format!("{}.{ext}", t.stem);
        staging.stage(&name, &t.render(config.format))?;
        names.push(name);
    }
    let meta_name = format!("{label}.meta.json");
    names.push(meta_name.clone());
    let metadata = Metadata {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        label: label.to_string(),
        preset: preset.map(|p| PresetInfo {
            name: p.name,
            summary: p.summary,
            notes: p.notes,
        }),
        config: config.clone(),
        tolerances: Tolerances::default(),
        pole_events: out.pole_events,
        beyond_first_branch: out.branch,
        failed_points: out.failed,
        unit_ratios: out.ratios,
        files: names,
    };
    let mut meta = serde_json::to_string_pretty(&metadata)
        .map_err(|e| RunError::Numeric(format!("metadata: {e}")))?;
    meta.push('\n');
    staging.stage(&meta_name, &meta)?;
    let files = staging.commit()?;
    Ok(RunReport { files, metadata })
}

/// Writes into hidden temporaries and renames them into place on commit.
struct Staging {
    dir: PathBuf,
    pending: Vec<(PathBuf, PathBuf)>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Staging {
    fn new(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            pending: Vec::new(),
        })
    }

    fn stage(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let tmp = self.dir.join(format!(".{name}.partial"));
        fs::write(&tmp, contents).map_err(io_err(&tmp))?;
        self.pending.push((tmp, self.dir.join(name)));
        Ok(())
    }

    fn commit(mut self) -> Result<Vec<PathBuf>, RunError> {
        let pending = std::mem::take(&mut self.pending);
        let mut done: Vec<PathBuf> = Vec::with_capacity(pending.len());
        for (i, (tmp, dest)) in pending.iter().enumerate() {
            if let Err(source) = fs::rename(tmp, dest) {
                for d in &done {
                    let _ = fs::remove_file(d);
                }
                for (t, _) in &pending[i..] {
                    let _ = fs::remove_file(t);
                }
                return Err(RunError::Io {
                    path: dest.clone(),
                    source,
                });
            }
            done.push(dest.clone());
        }
        Ok(done)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        for (tmp, _) in &self.pending {
            let _ = fs::remove_file(tmp);
        }
    }
}
