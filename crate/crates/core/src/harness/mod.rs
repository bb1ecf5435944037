//! Configuration, figure presets and result files.

mod config;
mod output;
mod presets;

pub use config::{
    load_config, parse_config, BiphotonConfig, DisorderConfig, ExperimentConfig, ImagingConfig,
    OutputConfig, Overrides, RunConfig, SchmidtConfig, TableFormat, TswConfig, WgaConfig, ZSetting,
};
pub use output::{emit, load_manifest, Cell, Manifest, ResultSet, Table, TableEntry};
pub use presets::{cell_f64, run_preset, LOCALIZATION_COLUMNS};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig1,
    Fig3,
    Fig4,
    Fig5,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Fig1, Preset::Fig3, Preset::Fig4, Preset::Fig5, Preset::Custom];
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Fig1 => "fig1",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Custom => "custom",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Preset::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| Error::domain(format!("unknown preset {s:?}; expected fig1, fig3, fig4, fig5 or custom")))
    }
}
