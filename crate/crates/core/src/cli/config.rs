//! TOML run configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{Reference, SweepAxis, DEFAULT_BASELINE};
use crate::model::ChainSpec;
use crate::par::Execution;
use crate::schemes::TwoSiteParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error{}{}: {message}", .line.map(|l| format!(" at line {l}")).unwrap_or_default(), .key.as_ref().map(|k| format!(" (key `{k}`)")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SingleQubit,
    TwoQubit,
    ChainCurve,
    Window,
    Sweep,
    Count,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// What to do when a time hits the pole guard of the scaling function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolePolicy {
    /// Drop the point from data files and record it in the metadata.
    #[default]
    Skip,
    /// Abort the run.
    Fail,
}

/// Document as written; every key is optional so presets can be overlaid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<Experiment>,
    pub n_sites: Option<usize>,
    pub sizes: Option<Vec<usize>>,
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[serde(rename = "J_sites")]
    pub j_sites: Option<Vec<f64>>,
    pub g: Option<f64>,
    pub g_sites: Option<Vec<f64>>,
    pub h: Option<f64>,
    pub h_sites: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub t_steps: Option<usize>,
    pub axis: Option<SweepAxis>,
    pub values: Option<Vec<f64>>,
    pub baseline: Option<f64>,
    pub reference: Option<Reference>,
    pub steps: Option<usize>,
    pub output_path: Option<PathBuf>,
    pub format: Option<Format>,
    pub on_pole: Option<PolePolicy>,
    pub execution: Option<Execution>,
}

fn pair<T: Clone>(
    top: (&Option<f64>, &Option<T>),
    base: (&Option<f64>, &Option<T>),
) -> (Option<f64>, Option<T>) {
    if top.0.is_some() || top.1.is_some() {
        (*top.0, top.1.clone())
    } else {
        (*base.0, base.1.clone())
    }
}

impl RawConfig {
    /// `top` wins key by key; a scalar and its per-site array count as one key.
    pub fn overlay(&self, top: &RawConfig) -> RawConfig {
        let (j, j_sites) = pair((&top.j, &top.j_sites), (&self.j, &self.j_sites));
        let (g, g_sites) = pair((&top.g, &top.g_sites), (&self.g, &self.g_sites));
        let (h, h_sites) = pair((&top.h, &top.h_sites), (&self.h, &self.h_sites));
        let (n_sites, sizes) = if top.n_sites.is_some() || top.sizes.is_some() {
            (top.n_sites, top.sizes.clone())
        } else {
            (self.n_sites, self.sizes.clone())
        };
        macro_rules! pick {
            ($f:ident) => {
                top.$f.clone().or_else(|| self.$f.clone())
            };
        }
        RawConfig {
            experiment: pick!(experiment),
            n_sites,
            sizes,
            j,
            j_sites,
            g,
            g_sites,
            h,
            h_sites,
            alpha: pick!(alpha),
            t_min: pick!(t_min),
            t_max: pick!(t_max),
            t_steps: pick!(t_steps),
            axis: pick!(axis),
            values: pick!(values),
            baseline: pick!(baseline),
            reference: pick!(reference),
            steps: pick!(steps),
            output_path: pick!(output_path),
            format: pick!(format),
            on_pole: pick!(on_pole),
            execution: pick!(execution),
        }
    }
}

/// Parses a document without validating it.
pub fn parse_raw(source: &str) -> Result<RawConfig, ConfigError> {
    toml::from_str(source).map_err(|e| {
        let line = e
            .span()
            .map(|s| source[..s.start.min(source.len())].matches('\n').count() + 1);
        let message = e.message().to_string();
        let key = if message.contains("unknown field") {
            message.split('`').nth(1).map(str::to_string)
        } else {
            // the key on the offending line
            line.and_then(|l| source.lines().nth(l - 1))
                .and_then(|text| text.split_once('='))
                .map(|(k, _)| k.trim().to_string())
        };
        ConfigError::Parse { line, key, message }
    })
}

/// Parses and validates a document.
pub fn parse_config(source: &str) -> Result<RunConfig, ConfigError> {
    RunConfig::from_raw(&parse_raw(source)?)
}

/// Validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// One chain per requested size; empty for single- and two-qubit runs.
    pub chains: Vec<ChainSpec>,
    pub two_site: Option<TwoSiteParams>,
    pub alpha: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub t_steps: usize,
    pub axis: Option<SweepAxis>,
    pub values: Vec<f64>,
    pub baseline: f64,
    pub reference: Reference,
    pub steps: usize,
    pub output_path: PathBuf,
    pub format: Format,
    pub on_pole: PolePolicy,
    pub execution: Execution,
}

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_T_MAX: f64 = 2.0;
pub const DEFAULT_T_STEPS: usize = 200;

fn finite(name: &str, x: f64) -> Result<f64, ConfigError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(format!("`{name}` must be finite")))
    }
}

fn site_values(
    name: &str,
    scalar: Option<f64>,
    sites: &Option<Vec<f64>>,
    n_sites: usize,
) -> Result<Vec<f64>, ConfigError> {
    match (scalar, sites) {
        (Some(_), Some(_)) => Err(invalid(format!(
            "`{name}` and `{name}_sites` are mutually exclusive"
        ))),
        (Some(v), None) => Ok(vec![finite(name, v)?; n_sites]),
        (None, Some(v)) => Ok(v.clone()),
        (None, None) => Err(invalid(format!("missing `{name}` or `{name}_sites`"))),
    }
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let experiment = raw.experiment.ok_or_else(|| invalid("missing `experiment`"))?;
        let t_min = finite("t_min", raw.t_min.unwrap_or(0.0))?;
        let t_max = finite("t_max", raw.t_max.unwrap_or(DEFAULT_T_MAX))?;
        let t_steps = raw.t_steps.unwrap_or(DEFAULT_T_STEPS);
        if t_min < 0.0 {
            return Err(invalid("t_min must be >= 0"));
        }
        if t_max <= t_min {
            return Err(invalid("t_max must be > t_min"));
        }
        if t_steps < 2 {
            return Err(invalid("t_steps must be >= 2"));
        }
        let baseline = finite("baseline", raw.baseline.unwrap_or(DEFAULT_BASELINE))?;
        if !(0.0 < baseline && baseline < 1.0) {
            return Err(invalid("baseline must lie in (0, 1)"));
        }
        let alpha = finite("alpha", raw.alpha.unwrap_or(DEFAULT_ALPHA))?;
        let steps = raw.steps.unwrap_or(1);
        if steps == 0 {
            return Err(invalid("steps must be >= 1"));
        }
        let values = raw.values.clone().unwrap_or_default();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("`values` must be finite"));
        }

        let mut chains = Vec::new();
        let mut two_site = None;
        match experiment {
            Experiment::SingleQubit => {}
            Experiment::TwoQubit => {
                let j = finite("J", raw.j.ok_or_else(|| invalid("missing `J`"))?)?;
                if raw.j_sites.is_some() {
                    return Err(invalid("two-qubit runs take a scalar `J`"));
                }
                let g = site_values("g", raw.g, &raw.g_sites, 2)?;
                let h = site_values("h", raw.h, &raw.h_sites, 2)?;
                if g.len() != 2 || h.len() != 2 {
                    return Err(invalid("two-qubit per-site arrays need exactly 2 entries"));
                }
                two_site = Some(TwoSiteParams {
                    j,
                    g1: g[0],
                    g2: g[1],
                    h1: h[0],
                    h2: h[1],
                });
            }
            _ => {
                let sizes = match (&raw.n_sites, &raw.sizes) {
                    (Some(_), Some(_)) => {
                        return Err(invalid("`n_sites` and `sizes` are mutually exclusive"))
                    }
                    (Some(n), None) => vec![*n],
                    (None, Some(s)) if !s.is_empty() => s.clone(),
                    _ => return Err(invalid("missing `n_sites`")),
                };
                if sizes.len() > 1
                    && !matches!(experiment, Experiment::ChainCurve | Experiment::Count)
                {
                    return Err(invalid("`sizes` is only supported by chain-curve and count"));
                }
                for n in sizes {
                    let spec = if experiment == Experiment::Count {
                        // counts depend only on the size
                        ChainSpec::uniform(n, 1.0, 0.0, 0.0)
                    } else {
                        ChainSpec::new(
                            n,
                            site_values("J", raw.j, &raw.j_sites, n)?,
                            site_values("g", raw.g, &raw.g_sites, n)?,
                            site_values("h", raw.h, &raw.h_sites, n)?,
                        )
                    }
                    .map_err(|e| invalid(e.to_string()))?;
                    chains.push(spec);
                }
            }
        }

        let axis = raw.axis;
        match experiment {
            Experiment::Sweep if axis.is_none() || values.is_empty() => {
                return Err(invalid("sweep needs `axis` and non-empty `values`"))
            }
            Experiment::Window if axis.is_some() != !values.is_empty() => {
                return Err(invalid("`axis` and `values` must be given together"))
            }
            Experiment::Sweep | Experiment::Window => {}
            _ if axis.is_some() || !values.is_empty() => {
                return Err(invalid("`axis`/`values` only apply to window and sweep runs"))
            }
            _ => {}
        }

        Ok(RunConfig {
            experiment,
            chains,
            two_site,
            alpha,
            t_min,
            t_max,
            t_steps,
            axis,
            values,
            baseline,
            reference: raw.reference.unwrap_or_default(),
            steps,
            output_path: raw.output_path.clone().unwrap_or_else(|| PathBuf::from("out")),
            format: raw.format.unwrap_or_default(),
            on_pole: raw.on_pole.unwrap_or_default(),
            execution: raw.execution.unwrap_or_default(),
        })
    }

    /// `t_steps` evenly spaced times on `(t_min, t_max]`.
    pub fn t_grid(&self) -> Vec<f64> {
        crate::analysis::time_grid(self.t_min, self.t_max, self.t_steps, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "chain-curve"
n_sites = 6
J = 1.0
g = 0.2
h = 0.3
t_min = 0.0
t_max = 1.0
t_steps = 100
"#;

    #[test]
    fn minimal_chain_curve() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.experiment, Experiment::ChainCurve);
        assert_eq!(c.chains, vec![ChainSpec::uniform(6, 1.0, 0.2, 0.3).unwrap()]);
        let grid = c.t_grid();
        assert_eq!(grid.len(), 100);
        assert!((grid[0] - 0.01).abs() < 1e-15);
        assert_eq!(grid[99], 1.0);
        assert_eq!(c.format, Format::Csv);
        assert_eq!(c.reference, Reference::NestedUnit);
    }

    #[test]
    fn odd_length_rejected() {
        let src = MINIMAL.replace("n_sites = 6", "n_sites = 7");
        assert!(matches!(parse_config(&src), Err(ConfigError::Validation(_))));
    }

    #[test]
    fn scalar_and_array_exclusive() {
        let src = format!("{MINIMAL}g_sites = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]\n");
        match parse_config(&src) {
            Err(ConfigError::Validation(m)) => assert!(m.contains("mutually exclusive"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line_and_key() {
        let src = format!("{MINIMAL}colour = 3\n");
        match parse_config(&src) {
            Err(ConfigError::Parse { line, key, .. }) => {
                assert_eq!(line, Some(10));
                assert_eq!(key.as_deref(), Some("colour"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_error_reports_line() {
        let src = MINIMAL.replace("t_steps = 100", "t_steps = \"many\"");
        match parse_config(&src) {
            Err(ConfigError::Parse { line, key, .. }) => {
                assert_eq!(line, Some(9));
                assert_eq!(key.as_deref(), Some("t_steps"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grid_invariants() {
        for (from, to) in [
            ("t_min = 0.0", "t_min = -0.1"),
            ("t_max = 1.0", "t_max = 0.0"),
            ("t_steps = 100", "t_steps = 1"),
        ] {
            let src = MINIMAL.replace(from, to);
            assert!(matches!(parse_config(&src), Err(ConfigError::Validation(_))), "{to}");
        }
    }

    #[test]
    fn per_site_arrays() {
        let src = MINIMAL.replace("h = 0.3", "h_sites = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]");
        let c = parse_config(&src).unwrap();
        assert_eq!(c.chains[0].transverse(), &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let short = MINIMAL.replace("h = 0.3", "h_sites = [0.1]");
        assert!(matches!(parse_config(&short), Err(ConfigError::Validation(_))));
    }

    #[test]
    fn sweep_requires_axis() {
        let src = MINIMAL.replace("chain-curve", "sweep");
        assert!(matches!(parse_config(&src), Err(ConfigError::Validation(_))));
        let ok = format!("{src}axis = \"g\"\nvalues = [0.2, 0.5]\n");
        let c = parse_config(&ok).unwrap();
        assert_eq!(c.axis, Some(SweepAxis::G));
    }

    #[test]
    fn overlay_replaces_scalar_array_pairs() {
        let base = parse_raw(MINIMAL).unwrap();
        let top = parse_raw("g_sites = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]\nt_steps = 10\n").unwrap();
        let merged = base.overlay(&top);
        assert_eq!(merged.g, None);
        assert_eq!(merged.t_steps, Some(10));
        assert_eq!(merged.n_sites, Some(6));
        assert!(RunConfig::from_raw(&merged).is_ok());
    }

    #[test]
    fn count_needs_only_size() {
        let c = parse_config("experiment = \"count\"\nsizes = [2, 4, 6]\n").unwrap();
        assert_eq!(c.chains.len(), 3);
    }
}
