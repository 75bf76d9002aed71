//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Method;
use crate::ota_ibt::IbtConfig;
use crate::scenario::{ScenarioConfig, ServiceSets};

/// Swept variable of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variable", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Sweep {
    None,
    /// Block size values; evaluated on one simulation per drop.
    RTot { values: Vec<f64> },
    /// Number of DL-UL UEs with the DL and UL set sizes held fixed; the UE
    /// count follows as `|DL| + |UL| - overlap`.
    Overlap { dl: usize, ul: usize, values: Vec<usize> },
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep::None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write the per-block training trace.
    #[serde(default)]
    pub trace: bool,
    /// Write a matplotlib script next to the CSV files.
    #[serde(default)]
    pub plot_script: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("results")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            trace: false,
            plot_script: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub scenario: ScenarioConfig,
    pub methods: Vec<Method>,
    /// Resource blocks per drop.
    pub blocks: usize,
    pub drops: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Block size in resources (ignored by an `r-tot` sweep).
    pub r_tot: f64,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub ibt: IbtConfig,
    /// Alternating iterations of the centralized design per block.
    #[serde(default = "default_centralized_iters")]
    pub centralized_iters: usize,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_kappa() -> f64 {
    0.967
}
fn default_centralized_iters() -> usize {
    10
}

/// One point of the sweep: the scenario to simulate and the block sizes to
/// score it with.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    /// Value of the swept variable (`r_tot`, overlap) or 0 without a sweep.
    pub value: f64,
    pub scenario: ScenarioConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.drops == 0 {
            return bad("drops must be at least 1");
        }
        if self.blocks == 0 {
            return bad("blocks must be at least 1");
        }
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return bad("kappa must lie in (0, 1]");
        }
        if !(self.ibt.gamma_br > 0.0 && self.ibt.gamma_br <= 1.0) {
            return bad("ibt.gamma_br must lie in (0, 1]");
        }
        if self.ibt.pilot_scale == 0 {
            return bad("ibt.pilot_scale must be positive");
        }
        match &self.sweep {
            Sweep::None => {
                if !(self.r_tot > 0.0) {
                    return bad("r_tot must be positive");
                }
            }
            Sweep::RTot { values } => {
                if values.len() < 2 {
                    return bad("a sweep needs at least two points");
                }
                if values.iter().any(|v| !(*v > 0.0)) {
                    return bad("r_tot values must be positive");
                }
            }
            Sweep::Overlap { dl, ul, values } => {
                if values.len() < 2 {
                    return bad("a sweep needs at least two points");
                }
                if values.iter().any(|&o| o > (*dl).min(*ul)) {
                    return bad("overlap cannot exceed the smaller set");
                }
                if !(self.r_tot > 0.0) {
                    return bad("r_tot must be positive");
                }
            }
        }
        Ok(())
    }

    /// Simulated scenarios. An `r-tot` sweep simulates once.
    pub fn points(&self) -> Vec<SweepPoint> {
        match &self.sweep {
            Sweep::None | Sweep::RTot { .. } => vec![SweepPoint {
                index: 0,
                value: 0.0,
                scenario: self.scenario.clone(),
            }],
            Sweep::Overlap { dl, ul, values } => values
                .iter()
                .enumerate()
                .map(|(i, &o)| {
                    let mut sc = self.scenario.clone();
                    sc.ue_count = dl + ul - o;
                    let shuffle = match sc.sets {
                        ServiceSets::Sizes { shuffle, .. } => shuffle,
                        _ => true,
                    };
                    sc.sets = ServiceSets::Sizes {
                        dl: *dl,
                        ul: *ul,
                        shuffle,
                    };
                    SweepPoint {
                        index: i,
                        value: o as f64,
                        scenario: sc,
                    }
                })
                .collect(),
        }
    }

    /// Block sizes each simulated point is scored with.
    pub fn r_tot_values(&self) -> Vec<f64> {
        match &self.sweep {
            Sweep::RTot { values } => values.clone(),
            _ => vec![self.r_tot],
        }
    }
}
