use std::path::{Path, PathBuf};

use rob2_core::config::Settings;
use serde::Deserialize;

use crate::args::GlobalArgs;
use crate::error::CliError;

pub const CONFIG_FILE_NAME: &str = "rob2.toml";

/// Contents of `rob2.toml`.
///
/// ```toml
/// dataset = "/data/rob2-release"
/// jobs = 4
/// seed = 11
///
/// [settings]
/// llm_base_url = "http://localhost:8000/v1"
/// llm_model = "gpt-4o"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub settings: Settings,
}

/// Fully resolved configuration: flags, then environment, then file.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub settings: Settings,
    pub dataset: PathBuf,
    pub out: PathBuf,
    pub jobs: usize,
    pub seed: u64,
    /// The file that was read, if any.
    pub config_file: Option<PathBuf>,
}

impl CliConfig {
    pub fn resolve(flags: &GlobalArgs, env: &dyn Fn(&str) -> Option<String>) -> Result<Self, CliError> {
        let env = |k: &str| env(k).filter(|v| !v.is_empty());
        let data_dir = flags.data_dir.clone().or_else(|| env("ROB2_DATA_DIR").map(PathBuf::from));
        let explicit = flags.config.clone().or_else(|| env("ROB2_CONFIG").map(PathBuf::from));
        let (file, config_file) = match (explicit, &data_dir) {
            (Some(path), _) => (read_config(&path)?, Some(path)),
            (None, Some(dir)) if dir.join(CONFIG_FILE_NAME).is_file() => {
                let path = dir.join(CONFIG_FILE_NAME);
                (read_config(&path)?, Some(path))
            }
            _ => (ConfigFile::default(), None),
        };
        let from_env = Settings::from_lookup(|k| env(k));
        let from_flags = Settings { data_dir: flags.data_dir.clone(), ..Settings::default() };
        let settings = file.settings.overlay(from_env).overlay(from_flags);

        let dataset = flags
            .dataset
            .clone()
            .or_else(|| env("ROB2_DATASET_DIR").map(PathBuf::from))
            .or(file.dataset)
            .or_else(|| settings.data_dir.as_ref().map(|d| d.join("dataset")))
            .unwrap_or_else(|| PathBuf::from("dataset"));
        let out = flags
            .out
            .clone()
            .or_else(|| env("ROB2_OUT").map(PathBuf::from))
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("rob2-out"));
        Ok(CliConfig { settings, dataset, out, jobs: file.jobs.unwrap_or(1), seed: file.seed.unwrap_or(0), config_file })
    }

    pub fn data_dir(&self) -> Result<&Path, CliError> {
        self.settings
            .data_dir
            .as_deref()
            .ok_or_else(|| CliError::Config("no data directory; pass --data-dir or set ROB2_DATA_DIR".into()))
    }
}

fn read_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
