use std::path::Path;

use meshft::learn::TrainConfig;
use meshft::mesher::MeshSpec;
use meshft::physlab::AblationVariant;
use meshft::wavegen::SamplerConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// One experiment, read from TOML. Unknown keys are rejected at every level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub mesh: MeshSpec,
    pub box_length: f64,
    pub dt: f64,
    /// Rollout horizon in frames.
    pub frames: usize,
    pub cfl: f64,
    pub train_pairs: usize,
    pub val_pairs: usize,
    /// Waves rolled out by `rollout`, `diagnose` and the training report.
    pub eval_samples: usize,
    pub variant: String,
    pub hidden: usize,
    pub damping: bool,
    pub sampler: SamplerConfig,
    pub train: TrainConfig,
    pub ood: OodConfig,
    pub sweep: SweepConfig,
    pub ablate: AblateConfig,
    pub maxwell: MaxwellConfig,
    pub check: CheckConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mesh: MeshSpec::Grid { nx: 32, ny: 32 },
            box_length: 1.0,
            dt: 0.002,
            frames: 200,
            cfl: 0.5,
            train_pairs: 2000,
            val_pairs: 256,
            eval_samples: 16,
            variant: "structured".into(),
            hidden: 64,
            damping: false,
            sampler: SamplerConfig::default(),
            train: TrainConfig::default(),
            ood: OodConfig::default(),
            sweep: SweepConfig::default(),
            ablate: AblateConfig::default(),
            maxwell: MaxwellConfig::default(),
            check: CheckConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OodConfig {
    pub test_kmax: u32,
    pub test_c: f64,
    pub test_mesh: MeshSpec,
    pub test_pairs: usize,
    pub rollouts: usize,
}

impl Default for OodConfig {
    fn default() -> Self {
        Self { test_kmax: 6, test_c: 1.4, test_mesh: MeshSpec::Grid { nx: 64, ny: 64 }, test_pairs: 512, rollouts: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub threads: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { sizes: vec![125, 250, 500, 1000, 2000], threads: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblateConfig {
    pub variants: Vec<String>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self { variants: AblationVariant::ALL.iter().map(|v| v.tag().to_string()).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaxwellConfig {
    pub mesh: MeshSpec,
    pub steps: usize,
    /// Stars are scaled by `spread^U[-1,1]` drawn from the run seed; 1 keeps
    /// the geometric stars.
    pub spread: f64,
    pub cfl: f64,
    pub mode: [i64; 2],
}

impl Default for MaxwellConfig {
    fn default() -> Self {
        Self { mesh: MeshSpec::Grid { nx: 64, ny: 64 }, steps: 500, spread: 1.5, cfl: 0.5, mode: [1, 0] }
    }
}

/// Thresholds applied by `--check`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    pub val_mse: f64,
    pub drift: f64,
    pub momentum: f64,
    pub wave_speed: f64,
    pub canonical: f64,
    pub ood_drift: f64,
    pub charge: f64,
    pub maxwell_drift: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            val_mse: 1e-6,
            drift: 1e-2,
            momentum: 1e-6,
            wave_speed: 5e-2,
            canonical: 1e-3,
            ood_drift: 1e-1,
            charge: 1e-12,
            maxwell_drift: 1e-3,
        }
    }
}

fn field(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn variant(&self) -> Result<AblationVariant, CliError> {
        self.variant.parse().map_err(|e| field("variant", e))
    }

    pub fn ablation_variants(&self) -> Result<Vec<AblationVariant>, CliError> {
        self.ablate.variants.iter().map(|v| v.parse().map_err(|e| field("ablate.variants", e))).collect()
    }

    /// Training settings with the top-level seed and CFL applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, cfl: self.cfl, ..self.train.clone() }
    }

    /// Checks every field before any compute starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |path: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(field(path, format!("must be positive and finite, got {v}")))
            }
        };
        positive("box_length", self.box_length)?;
        positive("dt", self.dt)?;
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(field("cfl", format!("must lie in (0, 1], got {}", self.cfl)));
        }
        for (path, v) in [
            ("frames", self.frames),
            ("train_pairs", self.train_pairs),
            ("val_pairs", self.val_pairs),
            ("eval_samples", self.eval_samples),
            ("hidden", self.hidden),
            ("ood.test_pairs", self.ood.test_pairs),
            ("ood.rollouts", self.ood.rollouts),
            ("sweep.threads", self.sweep.threads),
            ("maxwell.steps", self.maxwell.steps),
        ] {
            if v == 0 {
                return Err(field(path, "must be at least 1"));
            }
        }
        self.sampler.validate().map_err(|e| field("sampler", e))?;
        self.train_config().validate().map_err(|e| field("train", e))?;
        self.variant()?;
        self.ablation_variants()?;
        if self.ood.test_kmax == 0 {
            return Err(field("ood.test_kmax", "must be at least 1"));
        }
        positive("ood.test_c", self.ood.test_c)?;
        if self.sweep.sizes.is_empty() || self.sweep.sizes.contains(&0) {
            return Err(field("sweep.sizes", "must be a nonempty list of positive sizes"));
        }
        if !(self.maxwell.spread >= 1.0 && self.maxwell.spread.is_finite()) {
            return Err(field("maxwell.spread", "must be at least 1"));
        }
        if !(self.maxwell.cfl > 0.0 && self.maxwell.cfl <= 1.0) {
            return Err(field("maxwell.cfl", "must lie in (0, 1]"));
        }
        if self.maxwell.mode == [0, 0] {
            return Err(field("maxwell.mode", "must be a nonzero wave index"));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the resolved config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
