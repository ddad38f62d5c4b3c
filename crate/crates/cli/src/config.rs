//! Per-command parameter sets: TOML file section first, flags on top.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use ramanhs::neural::Scheduler;
use ramanhs::synth::Domain;
use ramanhs::AugmentPolicy;

use crate::CliError;

/// Reads `[section]` of a TOML config file, or defaults when no file is given.
pub fn load_section<T: DeserializeOwned + Default>(path: Option<&Path>, section: &str) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read config {}: {e}", path.display())))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    match table.remove(section) {
        None => Ok(T::default()),
        Some(v) => v
            .try_into()
            .map_err(|e| CliError::Usage(format!("config {} [{section}]: {e}", path.display()))),
    }
}

/// Renders `params` as a TOML document with a single `[section]`; feeding it back via
/// `--config` reproduces the run.
pub fn echo<T: Serialize>(section: &str, params: &T) -> Result<String, CliError> {
    let mut doc = toml::Table::new();
    let value = toml::Value::try_from(params).map_err(|e| CliError::Runtime(e.to_string()))?;
    doc.insert(section.to_string(), value);
    toml::to_string(&doc).map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn check_scale(scale: u32) -> Result<(), CliError> {
    if (2..=4).contains(&scale) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("scale must be 2, 3 or 4, got {scale}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub out_dir: PathBuf,
    pub cubes: usize,
    pub size: usize,
    pub bands: usize,
    pub scale: u32,
    pub seed: u64,
    pub t_low: f64,
    pub t_high: f64,
    pub domain: Domain,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub photon_rate_scale: Option<f64>,
    pub read_noise_sigma: Option<f64>,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("data"),
            cubes: 8,
            size: 32,
            bands: 200,
            scale: 2,
            seed: 0,
            t_low: 0.1,
            t_high: 1.0,
            domain: Domain::Cell,
            val_fraction: 0.15,
            test_fraction: 0.15,
            photon_rate_scale: None,
            read_noise_sigma: None,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), CliError> {
        check_scale(self.scale)?;
        if self.cubes == 0 || self.size == 0 || self.bands == 0 {
            return Err(CliError::Usage("cubes, size and bands must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Narrow networks that train on a single CPU core.
    Desk,
    /// Default widths of both architectures.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keep {
    Best,
    Last,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub loss_csv: Option<PathBuf>,
    pub from_checkpoint: Option<PathBuf>,
    pub scale: Option<u32>,
    pub preset: Preset,
    pub keep: Keep,
    pub epochs: usize,
    pub batch_size: usize,
    pub max_lr: f64,
    pub scheduler: Scheduler,
    pub seed: u64,
    pub epoch_size: Option<usize>,
    pub val_fraction: f64,
    pub max_val_samples: Option<usize>,
    pub augment: AugmentPolicy,
}

impl Default for TrainParams {
    fn default() -> Self {
        let t = ramanhs::TrainConfig::default();
        Self {
            manifest: None,
            out: PathBuf::from("model.dprc"),
            loss_csv: None,
            from_checkpoint: None,
            scale: None,
            preset: Preset::Desk,
            keep: Keep::Best,
            epochs: t.epochs,
            batch_size: t.batch_size,
            max_lr: t.max_lr,
            scheduler: t.scheduler,
            seed: t.seed,
            epoch_size: t.epoch_size,
            val_fraction: t.val_fraction,
            max_val_samples: t.max_val_samples,
            augment: AugmentPolicy::default(),
        }
    }
}

impl TrainParams {
    pub fn train_config(&self) -> ramanhs::TrainConfig {
        ramanhs::TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            max_lr: self.max_lr,
            scheduler: self.scheduler,
            seed: self.seed,
            epoch_size: self.epoch_size,
            val_fraction: self.val_fraction,
            max_val_samples: self.max_val_samples,
            ..ramanhs::TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(s) = self.scale {
            check_scale(s)?;
        }
        self.train_config().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.augment.validate().map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn loss_csv_path(&self) -> PathBuf {
        self.loss_csv
            .clone()
            .unwrap_or_else(|| self.out.with_extension("losses.csv"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    pub input: Option<PathBuf>,
    pub denoiser: Option<PathBuf>,
    pub sr: Option<PathBuf>,
    pub scale: Option<u32>,
    pub out: PathBuf,
    pub report_dir: PathBuf,
    pub reference: Option<PathBuf>,
    pub self_test: bool,
    pub out_height: Option<usize>,
    pub out_width: Option<usize>,
    /// Defaults to the input cube's integration time.
    pub t_low: Option<f64>,
    pub t_high: f64,
    /// Endmembers extracted from the reference for classification; 0 skips unmixing.
    pub endmembers: usize,
    pub unmix_seed: u64,
    pub baseline: bool,
    pub heatmaps: bool,
    pub heatmap_bands: Option<Vec<usize>>,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            input: None,
            denoiser: None,
            sr: None,
            scale: None,
            out: PathBuf::from("pipeline.hrc"),
            report_dir: PathBuf::from("report"),
            reference: None,
            self_test: false,
            out_height: None,
            out_width: None,
            t_low: None,
            t_high: 1.0,
            endmembers: 0,
            unmix_seed: 0,
            baseline: true,
            heatmaps: true,
            heatmap_bands: None,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.input.is_none() {
            return Err(CliError::Usage("pipeline needs --input".into()));
        }
        if self.sr.is_none() {
            return Err(CliError::Usage("pipeline needs --sr".into()));
        }
        if let Some(s) = self.scale {
            check_scale(s)?;
        }
        if self.self_test && self.reference.is_some() {
            return Err(CliError::Usage("--self-test and --reference are exclusive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    CleanHr,
    NoisyHr,
    NoisyLr,
    CleanLr,
    LowSnrHr,
    LowSnrLr,
}

impl std::fmt::Display for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match toml::Value::try_from(self) {
            Ok(toml::Value::String(s)) => f.write_str(&s),
            _ => write!(f, "{self:?}"),
        }
    }
}

impl std::str::FromStr for Field {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        toml::Value::String(s.to_string())
            .try_into()
            .map_err(|_| format!("unknown cube field {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleSel {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    pub manifest: Option<PathBuf>,
    pub role: RoleSel,
    /// Noisy cubes fed to the Savitzky-Golay grid.
    pub denoise_input: Field,
    /// Low-resolution cubes fed to the interpolators.
    pub upsample_input: Field,
    pub reference: Field,
    pub denoiser: Option<PathBuf>,
    pub sr: Option<PathBuf>,
    pub report_dir: PathBuf,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            manifest: None,
            role: RoleSel::Test,
            denoise_input: Field::LowSnrHr,
            upsample_input: Field::NoisyLr,
            reference: Field::CleanHr,
            denoiser: None,
            sr: None,
            report_dir: PathBuf::from("baseline"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnmixParams {
    pub input: Option<PathBuf>,
    pub endmembers: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for UnmixParams {
    fn default() -> Self {
        Self {
            input: None,
            endmembers: 5,
            seed: 0,
            out_dir: PathBuf::from("unmix"),
        }
    }
}
