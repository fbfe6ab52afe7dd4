//! Run configs: a data source plus an experiment, with flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use esn_plasticity::dataset::{generate_synthetic_subjects, load_dataset, LabelScheme, LabeledDataset, SyntheticSpec};
use esn_plasticity::pipeline::ExperimentConfig;
use esn_plasticity::plasticity::{BcmConfig, IpConfig, OjaConfig, PlasticityRule};

use crate::{CliError, Overrides, RuleArg};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Path to a manifest; relative paths resolve against the config file.
    Manifest(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

/// Reads a JSON file into `T`; unreadable or malformed files are usage
/// errors (the config is the user's input, not the data).
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid {what} {}: {e}", path.display())))
}

impl RunConfig {
    /// Loads `--config` (if any) and lets `--data` replace its data source.
    pub fn resolve(config: Option<&Path>, data: Option<&Path>) -> Result<Self, CliError> {
        let mut run = match config {
            Some(path) => {
                let mut run: RunConfig = read_json(path, "run config")?;
                if let DataSource::Manifest(m) = &mut run.data {
                    if m.is_relative() {
                        let base = path.parent().unwrap_or(Path::new(""));
                        *m = base.join(&*m);
                    }
                }
                run
            }
            None => RunConfig {
                data: DataSource::Manifest(PathBuf::new()),
                experiment: ExperimentConfig::default(),
            },
        };
        if let Some(d) = data {
            run.data = DataSource::Manifest(d.to_path_buf());
        }
        Ok(run)
    }

    pub fn apply(&mut self, o: &Overrides) {
        let e = &mut self.experiment;
        if let Some(seed) = o.seed {
            *e = std::mem::take(e).with_seed(seed);
        }
        if let Some(kind) = o.scheme {
            e.scheme = LabelScheme { kind, ..e.scheme };
            if let DataSource::Synthetic(spec) = &mut self.data {
                spec.scheme = LabelScheme { kind, ..spec.scheme };
            }
        }
        if let Some(mode) = o.input_mode {
            e.input_mode = mode;
        }
        if let Some(mode) = o.mode {
            e.readout.mode = mode;
        }
        if let Some(rule) = o.rule {
            e.plasticity = match (rule, e.plasticity.take()) {
                (RuleArg::None, _) => None,
                (RuleArg::Oja, Some(r @ PlasticityRule::Oja(_)))
                | (RuleArg::Bcm, Some(r @ PlasticityRule::Bcm(_)))
                | (RuleArg::Ip, Some(r @ PlasticityRule::Ip(_))) => Some(r),
                (RuleArg::Oja, _) => Some(PlasticityRule::Oja(OjaConfig::default())),
                (RuleArg::Bcm, _) => Some(PlasticityRule::Bcm(BcmConfig::default())),
                (RuleArg::Ip, _) => Some(PlasticityRule::Ip(IpConfig::default())),
            };
        }
    }

    /// Loads (or generates) the data and labels it under `scheme`.
    pub fn load_data(&self, scheme: LabelScheme) -> Result<LabeledDataset, CliError> {
        match &self.data {
            DataSource::Manifest(path) => {
                if path.as_os_str().is_empty() {
                    return Err(CliError::Usage("no data source: pass --data or --config".into()));
                }
                log::info!("loading {}", path.display());
                Ok(load_dataset(path)?.labeled(scheme)?)
            }
            DataSource::Synthetic(spec) => {
                if spec.scheme != scheme {
                    return Err(CliError::Usage(format!(
                        "synthetic data is generated for scheme `{}` but the experiment uses `{}`",
                        spec.scheme.kind.name(),
                        scheme.kind.name()
                    )));
                }
                log::info!("generating {} synthetic trials", spec.total_trials());
                let subjects = generate_synthetic_subjects(spec)?;
                Ok(LabeledDataset::from_subjects(subjects, scheme, f64::from(spec.sample_rate_hz))?)
            }
        }
    }

    /// Loads the data and fills the reservoir's input/output widths from it.
    pub fn prepare(&mut self) -> Result<LabeledDataset, CliError> {
        let data = self.load_data(self.experiment.scheme)?;
        if data.is_empty() {
            return Err(esn_plasticity::Error::Empty("labeled trials").into());
        }
        self.experiment = self.experiment.clone().with_dims_for(&data)?;
        self.experiment.validate()?;
        self.experiment.check_against(&data)?;
        Ok(data)
    }
}
