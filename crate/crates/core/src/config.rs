//! Pipeline configuration: a line-based `key = value` file, overridable by
//! `POLYIPA_*` environment variables. Relative paths resolve against the
//! directory of the config file.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::data::DataError;
use crate::features::DistanceParams;
use crate::mining::MiningParams;
use crate::p2g::DEFAULT_ORDER;
use crate::resources::{DataPaths, Resources};
use crate::split::SplitSpec;

pub const ENV_PREFIX: &str = "POLYIPA_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin} line {line}: expected key = value")]
    Syntax { origin: String, line: usize },
    #[error("{origin}: unknown key {key:?}")]
    UnknownKey { origin: String, key: String },
    #[error("{origin}: invalid value {value:?} for {key}")]
    InvalidValue {
        origin: String,
        key: String,
        value: String,
    },
    #[error("data file {0} does not exist")]
    MissingFile(PathBuf),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Every recognised key, as written in a config file.
pub const KEYS: &[&str] = &[
    "data.inventory",
    "data.features",
    "data.xsampa",
    "data.arpabet",
    "data.languages",
    "data.scripts",
    "mining.k",
    "mining.threshold",
    "mining.exclude_existing",
    "distance.insert_cost",
    "distance.delete_cost",
    "distance.sub_scale",
    "split.test_size",
    "split.eval_size",
    "split.seed",
    "split.max_tokens",
    "split.per_lang_cap",
    "split.ratio",
    "model.order",
    "beam.n_best",
    "beam.width",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub data: DataPaths,
    pub mining: MiningParams,
    pub distance: DistanceParams,
    pub split: SplitSpec,
    pub order: usize,
    pub n_best: usize,
    pub beam_width: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data: DataPaths::default(),
            mining: MiningParams::default(),
            distance: DistanceParams::default(),
            split: SplitSpec::default(),
            order: DEFAULT_ORDER,
            n_best: 1,
            beam_width: None,
        }
    }
}

/// The environment variable that overrides `key`.
pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('.', "_").to_ascii_uppercase())
}

impl PipelineConfig {
    /// Defaults, then the file if given, then matching environment variables.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut config = PipelineConfig::default();
        let base = path
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            config.apply_text(&text, &path.display().to_string(), &base)?;
        }
        let mut env: Vec<(String, String)> = env
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        env.sort();
        for (name, value) in env {
            let key = KEYS.iter().find(|k| env_name(k) == name).ok_or_else(|| {
                ConfigError::UnknownKey {
                    origin: "environment".into(),
                    key: name.clone(),
                }
            })?;
            config.set(key, value.trim(), "environment", &base)?;
        }
        config.check_files()?;
        Ok(config)
    }

    pub fn from_env(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load(path, std::env::vars())
    }

    fn apply_text(&mut self, text: &str, origin: &str, base: &Path) -> Result<(), ConfigError> {
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                origin: origin.to_string(),
                line: idx + 1,
            })?;
            self.set(key.trim(), value.trim(), origin, base)?;
        }
        Ok(())
    }

    fn set(
        &mut self,
        key: &str,
        value: &str,
        origin: &str,
        base: &Path,
    ) -> Result<(), ConfigError> {
        let invalid = || ConfigError::InvalidValue {
            origin: origin.to_string(),
            key: key.to_string(),
            value: value.to_string(),
        };
        let uint = || value.parse::<usize>().map_err(|_| invalid());
        let real = || value.parse::<f64>().map_err(|_| invalid());
        let path = || Some(base.join(value));
        match key {
            "data.inventory" => self.data.inventory = path(),
            "data.features" => self.data.features = path(),
            "data.xsampa" => self.data.xsampa = path(),
            "data.arpabet" => self.data.arpabet = path(),
            "data.languages" => self.data.languages = path(),
            "data.scripts" => self.data.scripts = path(),
            "mining.k" => self.mining.k = uint()?,
            "mining.threshold" => self.mining.threshold = real()?,
            "mining.exclude_existing" => {
                self.mining.exclude_existing = value.parse().map_err(|_| invalid())?
            }
            "distance.insert_cost" => self.distance.insert_cost = real()?,
            "distance.delete_cost" => self.distance.delete_cost = real()?,
            "distance.sub_scale" => self.distance.sub_scale = real()?,
            "split.test_size" => self.split.test_size = uint()?,
            "split.eval_size" => self.split.eval_size = uint()?,
            "split.seed" => self.split.seed = value.parse().map_err(|_| invalid())?,
            "split.max_tokens" => self.split.max_tokens = uint()?,
            "split.per_lang_cap" => self.split.per_lang_cap = Some(uint()?),
            "split.ratio" => self.split.min_original_ratio = real()?,
            "model.order" => self.order = uint()?,
            "beam.n_best" => self.n_best = uint()?,
            "beam.width" => self.beam_width = Some(uint()?),
            _ => {
                return Err(ConfigError::UnknownKey {
                    origin: origin.to_string(),
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    fn check_files(&self) -> Result<(), ConfigError> {
        let d = &self.data;
        for p in [
            &d.inventory,
            &d.features,
            &d.xsampa,
            &d.arpabet,
            &d.languages,
            &d.scripts,
        ]
        .into_iter()
        .flatten()
        {
            if !p.is_file() {
                return Err(ConfigError::MissingFile(p.clone()));
            }
        }
        Ok(())
    }

    /// Builtin tables with any configured replacements.
    pub fn resources(&self) -> Result<Resources, ConfigError> {
        Ok(Resources::load(&self.data)?)
    }
}
