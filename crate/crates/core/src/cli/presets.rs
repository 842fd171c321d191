//! Built-in configurations reproducing each figure.

use super::config::{parse_raw, ConfigError, RawConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    /// Values chosen where the figure leaves a parameter open.
    pub notes: &'static [&'static str],
    pub source: &'static str,
}

impl Preset {
    pub fn raw(&self) -> RawConfig {
        parse_raw(self.source).expect("built-in presets parse")
    }
}

macro_rules! g_sweep {
    ($experiment:literal) => {
        concat!(
            "experiment = \"", $experiment, "\"\n",
            "n_sites = 6\nJ = 1.0\ng = 0.2\nh = 0.3\naxis = \"g\"\n",
            "values = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, ",
            "1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0]\n",
            "t_min = 0.0\nt_max = 2.0\nt_steps = 200\nbaseline = 0.9999\n",
        )
    };
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig1",
        summary: "single qubit: Trotter2 vs perturbative fidelity",
        notes: &["alpha = 0.1", "t in (0, 1.5], 150 steps"],
        source: r#"
experiment = "single-qubit"
alpha = 0.1
t_min = 0.0
t_max = 1.5
t_steps = 150
"#,
    },
    Preset {
        name: "fig2",
        summary: "6-site chain, J = 1, g = 1: fidelity curves",
        notes: &["h = 0.3", "t in (0, 2], 200 steps"],
        source: r#"
experiment = "chain-curve"
n_sites = 6
J = 1.0
g = 1.0
h = 0.3
t_min = 0.0
t_max = 2.0
t_steps = 200
"#,
    },
    Preset {
        name: "fig3",
        summary: "chain sizes 6, 8, 10 at J = 1, g = 0.2, h = 0.3",
        notes: &["t in (0, 1], 100 steps"],
        source: r#"
experiment = "chain-curve"
sizes = [6, 8, 10]
J = 1.0
g = 0.2
h = 0.3
t_min = 0.0
t_max = 1.0
t_steps = 100
"#,
    },
    Preset {
        name: "fig4",
        summary: "transverse-field sweep on 6 sites, J = 1, g = 0.2",
        notes: &["h in {0.1, 0.2, 0.3, 0.4, 0.5}", "t in (0, 2], 200 steps"],
        source: r#"
experiment = "sweep"
n_sites = 6
J = 1.0
g = 0.2
h = 0.3
axis = "h"
values = [0.1, 0.2, 0.3, 0.4, 0.5]
t_min = 0.0
t_max = 2.0
t_steps = 200
"#,
    },
    Preset {
        name: "fig5",
        summary: "advantage windows vs longitudinal field on 6 sites, J = 1, h = 0.3",
        notes: &["g in 0.1..=2.0 step 0.1", "t in (0, 2], 200 steps"],
        source: g_sweep!("window"),
    },
    Preset {
        name: "fig6",
        summary: "improvement metrics vs longitudinal field on 6 sites, J = 1, h = 0.3",
        notes: &["g in 0.1..=2.0 step 0.1", "t in (0, 2], 200 steps", "baseline 0.9999"],
        source: g_sweep!("sweep"),
    },
];

pub fn find(name: &str) -> Result<&'static Preset, ConfigError> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))
}
