//! Versioned JSON experiment configuration. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::AttackConfig;
use crate::attribution::M_EVAL;
use crate::data::{generate_synthetic, lift, load_idx, Dataset, SyntheticKind};
use crate::error::{Error, Result};
use crate::training::TrainConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Blobs,
    Moons,
    Idx,
}

fn default_n() -> usize {
    2000
}
fn default_noise() -> f64 {
    0.1
}
fn default_test_fraction() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Lift synthetic 2-D data to this many random linear features.
    #[serde(default)]
    pub lift_dim: Option<usize>,
    #[serde(default)]
    pub images: Option<PathBuf>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub limit: Option<usize>,
    /// Held-out share used by `eval`, `attack` and `consistency`.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

impl DatasetSpec {
    /// Builds the full dataset; relative paths resolve against `base`.
    pub fn build(&self, base: &Path, seed: u64) -> Result<Dataset> {
        match self.kind {
            DatasetKind::Blobs | DatasetKind::Moons => {
                let kind = if self.kind == DatasetKind::Blobs { SyntheticKind::Blobs } else { SyntheticKind::Moons };
                let ds = generate_synthetic(kind, self.n, self.noise, seed)?;
                match self.lift_dim {
                    Some(d) => lift(&ds, d, seed),
                    None => Ok(ds),
                }
            }
            DatasetKind::Idx => {
                let (i, l) = self.idx_paths(base)?;
                load_idx(i, l, self.limit.unwrap_or(usize::MAX))
            }
        }
    }

    /// Deterministic `(train, test)` split.
    pub fn build_split(&self, base: &Path, seed: u64) -> Result<(Dataset, Dataset)> {
        Ok(self.build(base, seed)?.split(1.0 - self.test_fraction, seed))
    }

    fn idx_paths(&self, base: &Path) -> Result<(PathBuf, PathBuf)> {
        let (Some(i), Some(l)) = (&self.images, &self.labels) else {
            return Err(Error::Config("idx dataset needs `images` and `labels`".into()));
        };
        Ok((base.join(i), base.join(l)))
    }

    fn validate(&self, base: &Path) -> Result<()> {
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Config("test_fraction must lie in [0, 1)".into()));
        }
        if self.kind == DatasetKind::Idx {
            let (i, l) = self.idx_paths(base)?;
            for p in [i, l] {
                if !p.exists() {
                    return Err(Error::Config(format!("missing file {}", p.display())));
                }
            }
        } else if self.n < 2 {
            return Err(Error::Config("synthetic datasets need n >= 2".into()));
        }
        Ok(())
    }
}

fn default_hidden() -> Vec<usize> {
    vec![32, 32]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// Load parameters from here instead of training or initialising.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { hidden: default_hidden(), checkpoint: None }
    }
}

fn default_m_eval() -> usize {
    M_EVAL
}
fn default_pgd_steps() -> usize {
    20
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    /// Riemann steps for evaluation attributions.
    #[serde(default = "default_m_eval")]
    pub m: usize,
    /// Evaluate only the first this many test samples.
    #[serde(default)]
    pub max_samples: Option<usize>,
    /// Steps of the cross-entropy PGD used for adversarial accuracy.
    #[serde(default = "default_pgd_steps")]
    pub pgd_steps: usize,
    /// PGD step size; `ε/4` when absent.
    #[serde(default)]
    pub pgd_alpha: Option<f64>,
    #[serde(default = "default_true")]
    pub fgsm: bool,
}

impl Default for EvalSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

fn default_sim_dim() -> usize {
    10_000
}
fn default_sim_n() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    #[serde(default = "default_sim_dim")]
    pub dim: usize,
    #[serde(default = "default_sim_n")]
    pub n_samples: usize,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self { dim: default_sim_dim(), n_samples: default_sim_n() }
    }
}

fn default_dims() -> Vec<usize> {
    vec![3, 5, 10]
}
fn default_trials() -> usize {
    10_000
}
fn default_triples() -> usize {
    500
}
fn default_max_dim() -> usize {
    10
}
fn default_pearson_dim() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremSpec {
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Random triples for the sequence search.
    #[serde(default = "default_triples")]
    pub sequence_triples: usize,
    /// Triple dimensions are drawn from `2..=max_dim`.
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
    /// Expansion budget; `10·d²` when absent.
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default = "default_pearson_dim")]
    pub pearson_dim: usize,
}

impl Default for TheoremSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub eval: EvalSpec,
    #[serde(default)]
    pub simulate: SimulateSpec,
    #[serde(default)]
    pub theorem: TheoremSpec,
    /// Directory relative paths resolve against; set when loading.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(s: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut c: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.base_dir = base_dir.into();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let s = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
        Self::from_json(&s, p.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!("schema {} unsupported (expected {SCHEMA_VERSION})", self.schema)));
        }
        if let Some(d) = &self.dataset {
            d.validate(&self.base_dir)?;
        }
        if let Some(c) = &self.model.checkpoint {
            if !self.base_dir.join(c).exists() {
                return Err(Error::Config(format!("missing checkpoint {}", c.display())));
            }
        }
        if self.model.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if self.eval.m == 0 {
            return Err(Error::Config("eval.m must be positive".into()));
        }
        self.train.validate()?;
        self.attack.validate()
    }

    pub fn dataset(&self) -> Result<&DatasetSpec> {
        self.dataset.as_ref().ok_or_else(|| Error::Config("this command needs a `dataset` section".into()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_json(r#"{"schema": 1}"#, ".").unwrap();
        assert_eq!(c.train.lambda, 1.0);
        assert_eq!(c.eval.m, 50);
    }

    #[test]
    fn unknown_keys_and_versions_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"schema": 1, "sed": 3}"#, ".").is_err());
        assert!(ExperimentConfig::from_json(r#"{"schema": 2}"#, ".").is_err());
        assert!(ExperimentConfig::from_json(r#"{"seed": 3}"#, ".").is_err());
        assert!(ExperimentConfig::from_json(r#"{"schema": 1, "train": {"epochs": 1, "lr": 0.1}}"#, ".").is_err());
    }

    #[test]
    fn idx_needs_existing_files() {
        let s = r#"{"schema": 1, "dataset": {"kind": "idx", "images": "nope", "labels": "nope"}}"#;
        assert!(matches!(ExperimentConfig::from_json(s, "."), Err(Error::Config(_))));
    }
}
