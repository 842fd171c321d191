//! Configuration, figure presets and the file-emitting runner behind the
//! `ising-pert` binary.

pub mod config;
pub mod presets;
pub mod run;

pub use config::{parse_config, ConfigError, Experiment, Format, PolePolicy, RawConfig, RunConfig};
pub use presets::{Preset, PRESETS};
pub use run::{run, Metadata, RunError, RunReport};

/// Merges an optional preset with an optional config document (the document
/// wins) and validates the result. Returns the label used for file names.
pub fn resolve(
    source: Option<&str>,
    preset: Option<&str>,
) -> Result<(RunConfig, String, Option<&'static Preset>), ConfigError> {
    let preset = preset.map(presets::find).transpose()?;
    let base = preset.map(Preset::raw).unwrap_or_default();
    let top = source.map(config::parse_raw).transpose()?.unwrap_or_default();
    let merged = base.overlay(&top);
    let config = RunConfig::from_raw(&merged)?;
    let label = match preset {
        Some(p) => p.name.to_string(),
        None => serde_json::to_value(config.experiment)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_else(|| "run".to_string()),
    };
    Ok((config, label, preset))
}
