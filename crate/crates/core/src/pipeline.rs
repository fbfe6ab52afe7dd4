//! End-to-end experiments: split, pretrain, harvest pooled states, train a
//! readout, classify test trials, report.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{split_train_test, LabelScheme, LabeledDataset, SchemeKind, Split, Trial, TrialId};
use crate::error::{check_dim, Error, Result};
use crate::features::{extract_trial_features, FeatureOptions};
use crate::plasticity::{pretrain, PlasticityRule};
use crate::readout::{
    majority_vote, train_hybrid, train_offline, train_online, OnlineOptions, ReadoutWeights,
    TrainingDesign,
};
use crate::reservoir::{init_reservoir, pooled_states_batch, ReservoirConfig, ReservoirWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// Every channel is a separate scalar sequence; channel votes are pooled.
    #[default]
    Signal,
    /// The trial's band-power vector drives the reservoir for a few steps.
    Feature,
}

impl std::str::FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signal" => Ok(Self::Signal),
            "feature" => Ok(Self::Feature),
            _ => Err(Error::config(format!("unknown input mode `{s}` (signal|feature)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutMode {
    Offline,
    Online,
    #[default]
    Hybrid,
}

impl std::str::FromStr for ReadoutMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "offline" => Ok(Self::Offline),
            "online" => Ok(Self::Online),
            "hybrid" => Ok(Self::Hybrid),
            _ => Err(Error::config(format!(
                "unknown readout mode `{s}` (offline|online|hybrid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutConfig {
    pub mode: ReadoutMode,
    pub ridge: f64,
    pub online: OnlineOptions,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            mode: ReadoutMode::Hybrid,
            ridge: 1e-6,
            online: OnlineOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalOptions {
    /// Standardize each channel sequence to zero mean and unit variance.
    pub normalize: bool,
}

impl Default for SignalOptions {
    fn default() -> Self {
        Self { normalize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureModeOptions {
    pub extraction: FeatureOptions,
    /// Steps the static feature vector is held at the input.
    pub drive_steps: usize,
    /// Standardize each feature with training-partition statistics.
    pub standardize: bool,
}

impl Default for FeatureModeOptions {
    fn default() -> Self {
        Self {
            extraction: FeatureOptions::default(),
            drive_steps: 10,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub reservoir: ReservoirConfig,
    pub plasticity: Option<PlasticityRule>,
    /// Upper bound on the number of training sequences used for
    /// pretraining (evenly spaced over the training set); `None` uses all.
    pub pretrain_max_sequences: Option<usize>,
    pub readout: ReadoutConfig,
    pub input_mode: InputMode,
    pub signal: SignalOptions,
    pub features: FeatureModeOptions,
    pub scheme: LabelScheme,
    pub split: SplitConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            reservoir: ReservoirConfig::default(),
            plasticity: None,
            pretrain_max_sequences: None,
            readout: ReadoutConfig::default(),
            input_mode: InputMode::Signal,
            signal: SignalOptions::default(),
            features: FeatureModeOptions::default(),
            scheme: LabelScheme::new(SchemeKind::Laha),
            split: SplitConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid experiment config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("invalid experiment config {}: {e}", path.display())))
    }

    /// Applies one seed to the reservoir, the split and online shuffling.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.reservoir.seed = seed;
        self.split.seed = seed;
        self.readout.online.seed = seed;
        self
    }

    /// Input width implied by the input mode for trials with `channels`
    /// channels.
    pub fn input_dim_for(&self, channels: usize) -> usize {
        match self.input_mode {
            InputMode::Signal => 1,
            InputMode::Feature => channels * self.features.extraction.bands.len(),
        }
    }

    /// Sets `input_dim` and `output_dim` from the input mode and dataset.
    pub fn with_dims_for(mut self, data: &LabeledDataset) -> Result<Self> {
        self.reservoir.input_dim = self.input_dim_for(data.channels()?);
        self.reservoir.output_dim = data.num_classes();
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.reservoir.validate()?;
        if let Some(rule) = &self.plasticity {
            rule.validate()?;
        }
        if self.pretrain_max_sequences == Some(0) {
            return Err(Error::config("pretrain_max_sequences must be positive"));
        }
        if !(self.readout.ridge.is_finite() && self.readout.ridge >= 0.0) {
            return Err(Error::config("readout ridge must be nonnegative"));
        }
        if !(self.readout.online.learning_rate.is_finite() && self.readout.online.learning_rate >= 0.0) {
            return Err(Error::config("online learning_rate must be nonnegative"));
        }
        if self.input_mode == InputMode::Feature && self.features.drive_steps == 0 {
            return Err(Error::config("feature drive_steps must be positive"));
        }
        self.features.extraction.bands.validate()?;
        self.scheme.validate()
    }

    /// Checks the configured dimensions against a dataset.
    pub fn check_against(&self, data: &LabeledDataset) -> Result<()> {
        let channels = data.channels()?;
        let expected = self.input_dim_for(channels);
        if self.reservoir.input_dim != expected {
            return Err(Error::config(format!(
                "reservoir.input_dim is {} but {:?} input over {channels} channels needs {expected}",
                self.reservoir.input_dim, self.input_mode
            )));
        }
        if self.reservoir.output_dim != data.num_classes() {
            return Err(Error::config(format!(
                "reservoir.output_dim is {} but scheme `{}` has {} classes",
                self.reservoir.output_dim,
                data.scheme.kind.name(),
                data.num_classes()
            )));
        }
        if data.scheme != self.scheme {
            return Err(Error::config("dataset was labeled with a different scheme"));
        }
        if self.input_mode == InputMode::Signal {
            let samples = data.trials[0].trial.samples();
            if samples <= self.reservoir.washout {
                return Err(Error::config(format!(
                    "washout {} is not shorter than the {samples}-sample trials",
                    self.reservoir.washout
                )));
            }
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.reservoir.spectral_radius > 1.0 {
            w.push(format!(
                "spectral radius {} exceeds 1; the echo state property is not guaranteed",
                self.reservoir.spectral_radius
            ));
        }
        w
    }
}

/// Per-feature affine standardization fitted on the training partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("standardizer rows"))?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            check_dim("feature length", d, r.len())?;
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = (*v - m) / s;
        }
    }
}

/// Turns a trial into the reservoir input sequences it is classified from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InputEncoder {
    Signal {
        normalize: bool,
        washout: usize,
    },
    Feature {
        extraction: FeatureOptions,
        drive_steps: usize,
        scaler: Option<Standardizer>,
    },
}

impl InputEncoder {
    pub fn mode(&self) -> InputMode {
        match self {
            InputEncoder::Signal { .. } => InputMode::Signal,
            InputEncoder::Feature { .. } => InputMode::Feature,
        }
    }

    pub fn washout(&self) -> usize {
        match self {
            InputEncoder::Signal { washout, .. } => *washout,
            InputEncoder::Feature { .. } => 0,
        }
    }

    /// One `T x 1` sequence per channel in signal mode; a single
    /// `drive_steps x F` sequence in feature mode.
    pub fn sequences(&self, trial: &Trial) -> Result<Vec<DMatrix<f64>>> {
        match self {
            InputEncoder::Signal { normalize, .. } => Ok((0..trial.channels())
                .map(|c| {
                    let mut x = trial.channel_f64(c);
                    if *normalize {
                        zscore(&mut x);
                    }
                    DMatrix::from_vec(x.len(), 1, x)
                })
                .collect()),
            InputEncoder::Feature {
                extraction,
                drive_steps,
                scaler,
            } => {
                let mut f = extract_trial_features(trial, extraction)?.values;
                if let Some(s) = scaler {
                    check_dim("feature length", s.mean.len(), f.len())?;
                    s.apply(&mut f);
                }
                Ok(vec![DMatrix::from_fn(*drive_steps, f.len(), |_, j| f[j])])
            }
        }
    }
}

fn zscore(x: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 1e-12 { sd } else { 1.0 };
    x.iter_mut().for_each(|v| *v = (*v - mean) / scale);
}

/// Pooled reservoir states of one trial, one per input sequence.
pub fn harvest_trial(weights: &ReservoirWeights, encoder: &InputEncoder, trial: &Trial) -> Result<Vec<Vec<f64>>> {
    let seqs = encoder.sequences(trial)?;
    pooled_states_batch(weights, &seqs, encoder.washout())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPrediction {
    pub label: usize,
    /// One entry per channel in signal mode, a single entry in feature mode.
    pub votes: Vec<usize>,
}

fn decide(readout: &ReadoutWeights, pooled: &[Vec<f64>]) -> Result<TrialPrediction> {
    let votes = pooled
        .iter()
        .map(|p| readout.predict(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialPrediction {
        label: majority_vote(&votes)?,
        votes,
    })
}

/// Classifies one trial: winner-take-all per input sequence, then a
/// majority vote over the sequences.
pub fn classify_trial(
    weights: &ReservoirWeights,
    readout: &ReadoutWeights,
    trial: &Trial,
    encoder: &InputEncoder,
) -> Result<TrialPrediction> {
    check_dim("readout width", weights.reservoir_size(), readout.reservoir_size())?;
    if readout.w_out.iter().all(|&v| v == 0.0) {
        return Err(Error::config("readout is untrained (all weights zero)"));
    }
    decide(readout, &harvest_trial(weights, encoder, trial)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: TrialId,
    pub label: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
    pub class_names: Vec<String>,
    /// Fraction of test trials each channel alone votes correctly (signal
    /// mode only).
    pub per_channel_accuracy: Option<Vec<f64>>,
    pub train_trials: usize,
    pub test_trials: usize,
    pub predictions: Vec<PredictionRecord>,
    pub seed: u64,
    pub warnings: Vec<String>,
    pub config: ExperimentConfig,
    pub wall_time_s: f64,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Everything up to readout training: the split, the (pretrained) reservoir
/// and the pooled states of every trial. Several readouts can be evaluated
/// against one preparation.
#[derive(Debug, Clone)]
pub struct PreparedExperiment<'a> {
    pub config: ExperimentConfig,
    pub data: &'a LabeledDataset,
    pub split: Split,
    pub weights: ReservoirWeights,
    pub encoder: InputEncoder,
    /// Indices of training trials whose sequences drove pretraining.
    pub pretrain_trials: Vec<usize>,
    /// `states[i]` are the pooled states of trial `i`.
    pub states: Vec<Vec<Vec<f64>>>,
    pub prepare_time_s: f64,
}

/// Evenly spaced picks of `k` out of `n` items.
fn spaced(n: usize, k: usize) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    (0..k).map(|i| i * n / k).collect()
}

impl<'a> PreparedExperiment<'a> {
    pub fn new(config: &ExperimentConfig, data: &'a LabeledDataset) -> Result<Self> {
        let start = Instant::now();
        config.validate()?;
        if data.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        config.check_against(data)?;
        let split = split_train_test(data, config.split.train_fraction, config.split.seed)?;

        let mut encoder = match config.input_mode {
            InputMode::Signal => InputEncoder::Signal {
                normalize: config.signal.normalize,
                washout: config.reservoir.washout,
            },
            InputMode::Feature => InputEncoder::Feature {
                extraction: config.features.extraction.clone(),
                drive_steps: config.features.drive_steps,
                scaler: None,
            },
        };
        if let InputEncoder::Feature { extraction, scaler, .. } = &mut encoder {
            if config.features.standardize {
                let rows = split
                    .train
                    .iter()
                    .map(|&i| Ok(extract_trial_features(&data.trials[i].trial, extraction)?.values))
                    .collect::<Result<Vec<_>>>()?;
                *scaler = Some(Standardizer::fit(&rows)?);
            }
        }

        let mut weights = init_reservoir(&config.reservoir)?;
        let mut pretrain_trials = Vec::new();
        if let Some(rule) = &config.plasticity {
            let mut sequences = Vec::new();
            for &i in &split.train {
                for seq in encoder.sequences(&data.trials[i].trial)? {
                    sequences.push((i, seq));
                }
            }
            let keep = spaced(
                sequences.len(),
                config.pretrain_max_sequences.unwrap_or(usize::MAX),
            );
            let (owners, chosen): (Vec<usize>, Vec<DMatrix<f64>>) =
                keep.into_iter().map(|k| sequences[k].clone()).unzip();
            pretrain_trials = owners;
            pretrain_trials.dedup();
            log::info!(
                "pretraining with {} ({} epochs) on {} sequences",
                rule.name(),
                rule.epochs(),
                chosen.len()
            );
            weights = pretrain(&weights, &chosen, rule)?;
        }

        let states = data
            .trials
            .iter()
            .map(|t| harvest_trial(&weights, &encoder, &t.trial))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            data,
            split,
            weights,
            encoder,
            pretrain_trials,
            states,
            prepare_time_s: start.elapsed().as_secs_f64(),
        })
    }

    /// Design matrix from the training partition, one row per pooled state.
    pub fn design(&self, ridge: f64) -> Result<TrainingDesign> {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for &i in &self.split.train {
            for s in &self.states[i] {
                rows.push(s.clone());
                labels.push(self.data.trials[i].label);
            }
        }
        TrainingDesign::from_labeled(&rows, &labels, self.data.class_names.clone(), ridge)
    }

    pub fn train_readout(&self, readout: &ReadoutConfig) -> Result<ReadoutWeights> {
        let design = self.design(readout.ridge)?;
        match readout.mode {
            ReadoutMode::Offline => train_offline(&design),
            ReadoutMode::Online => {
                let zero = ReadoutWeights::zeros(design.class_names.clone(), self.weights.reservoir_size());
                train_online(&zero, &design.states, &design.targets, &readout.online)
            }
            ReadoutMode::Hybrid => train_hybrid(&design, &readout.online),
        }
    }

    /// Trains `readout` and scores the test partition.
    pub fn evaluate(&self, readout: &ReadoutConfig) -> Result<(EvaluationReport, ReadoutWeights)> {
        let start = Instant::now();
        let weights = self.train_readout(readout)?;
        let o = self.data.num_classes();
        let mut confusion = vec![vec![0usize; o]; o];
        let mut predictions = Vec::with_capacity(self.split.test.len());
        let channels = self.data.channels()?;
        let mut channel_hits = vec![0usize; channels];
        for &i in &self.split.test {
            let t = &self.data.trials[i];
            let p = decide(&weights, &self.states[i])?;
            confusion[t.label][p.label] += 1;
            if self.encoder.mode() == InputMode::Signal {
                for (hit, &v) in channel_hits.iter_mut().zip(&p.votes) {
                    *hit += usize::from(v == t.label);
                }
            }
            predictions.push(PredictionRecord {
                id: t.id.clone(),
                label: t.label,
                predicted: p.label,
            });
        }
        let n_test = self.split.test.len();
        let correct: usize = (0..o).map(|k| confusion[k][k]).sum();
        let mut config = self.config.clone();
        config.readout = readout.clone();
        let report = EvaluationReport {
            accuracy: correct as f64 / n_test as f64,
            confusion,
            class_names: self.data.class_names.clone(),
            per_channel_accuracy: (self.encoder.mode() == InputMode::Signal)
                .then(|| channel_hits.iter().map(|&h| h as f64 / n_test as f64).collect()),
            train_trials: self.split.train.len(),
            test_trials: n_test,
            predictions,
            seed: self.config.reservoir.seed,
            warnings: self.config.warnings(),
            wall_time_s: self.prepare_time_s + start.elapsed().as_secs_f64(),
            config,
        };
        Ok((report, weights))
    }

    pub fn into_model(self, readout: ReadoutWeights) -> TrainedModel {
        TrainedModel {
            config: self.config,
            class_names: self.data.class_names.clone(),
            weights: self.weights,
            readout,
            encoder: self.encoder,
        }
    }
}

/// Runs one experiment end to end.
pub fn run_experiment(config: &ExperimentConfig, data: &LabeledDataset) -> Result<EvaluationReport> {
    let prepared = PreparedExperiment::new(config, data)?;
    for w in config.warnings() {
        log::warn!("{w}");
    }
    Ok(prepared.evaluate(&config.readout)?.0)
}

/// As [`run_experiment`], also returning the trained model.
pub fn train_model(config: &ExperimentConfig, data: &LabeledDataset) -> Result<(TrainedModel, EvaluationReport)> {
    let prepared = PreparedExperiment::new(config, data)?;
    let (report, readout) = prepared.evaluate(&config.readout)?;
    Ok((prepared.into_model(readout), report))
}

/// A trained reservoir, its readout and the input encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: ExperimentConfig,
    pub class_names: Vec<String>,
    pub weights: ReservoirWeights,
    pub readout: ReadoutWeights,
    pub encoder: InputEncoder,
}

impl TrainedModel {
    pub fn classify(&self, trial: &Trial) -> Result<TrialPrediction> {
        classify_trial(&self.weights, &self.readout, trial, &self.encoder)
    }

    /// Scores the trials at `indices` (all trials when `None`).
    pub fn evaluate(&self, data: &LabeledDataset, indices: Option<&[usize]>) -> Result<EvaluationReport> {
        let start = Instant::now();
        if data.class_names != self.class_names {
            return Err(Error::config("dataset classes differ from the model's"));
        }
        let all: Vec<usize> = (0..data.len()).collect();
        let indices = indices.unwrap_or(&all);
        if indices.is_empty() {
            return Err(Error::Empty("evaluation set"));
        }
        let o = self.class_names.len();
        let mut confusion = vec![vec![0usize; o]; o];
        let mut predictions = Vec::new();
        let mut channel_hits: Vec<usize> = Vec::new();
        for &i in indices {
            let t = data.trials.get(i).ok_or(Error::Empty("trial index"))?;
            let p = self.classify(&t.trial)?;
            confusion[t.label][p.label] += 1;
            if self.encoder.mode() == InputMode::Signal {
                channel_hits.resize(p.votes.len(), 0);
                for (hit, &v) in channel_hits.iter_mut().zip(&p.votes) {
                    *hit += usize::from(v == t.label);
                }
            }
            predictions.push(PredictionRecord {
                id: t.id.clone(),
                label: t.label,
                predicted: p.label,
            });
        }
        let n = indices.len();
        let correct: usize = (0..o).map(|k| confusion[k][k]).sum();
        Ok(EvaluationReport {
            accuracy: correct as f64 / n as f64,
            confusion,
            class_names: self.class_names.clone(),
            per_channel_accuracy: (self.encoder.mode() == InputMode::Signal)
                .then(|| channel_hits.iter().map(|&h| h as f64 / n as f64).collect()),
            train_trials: 0,
            test_trials: n,
            predictions,
            seed: self.config.reservoir.seed,
            warnings: self.config.warnings(),
            config: self.config.clone(),
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).expect("model serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, format!("malformed model: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    SpectralRadius,
    ReservoirSize,
    PlasticityEpochs,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::SpectralRadius => "spectral_radius",
            SweepParameter::ReservoirSize => "reservoir_size",
            SweepParameter::PlasticityEpochs => "plasticity_epochs",
        }
    }

    /// Copy of `config` with the parameter set to `value`.
    pub fn apply(self, config: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = config.clone();
        let as_count = |v: f64| {
            if v.fract() == 0.0 && v >= 1.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::config(format!(
                    "{} needs positive integer values, got {v}",
                    self.name()
                )))
            }
        };
        match self {
            SweepParameter::SpectralRadius => c.reservoir.spectral_radius = value,
            SweepParameter::ReservoirSize => c.reservoir.reservoir_size = as_count(value)?,
            SweepParameter::PlasticityEpochs => match &mut c.plasticity {
                Some(rule) => rule.set_epochs(as_count(value)?),
                None => return Err(Error::config("plasticity_epochs sweep needs a plasticity rule")),
            },
        }
        Ok(c)
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "spectral_radius" => Ok(Self::SpectralRadius),
            "reservoir_size" => Ok(Self::ReservoirSize),
            "plasticity_epochs" => Ok(Self::PlasticityEpochs),
            _ => Err(Error::config(format!(
                "unknown sweep parameter `{s}` (spectral_radius|reservoir_size|plasticity_epochs)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub runtime_s: f64,
    pub report: EvaluationReport,
}

/// One experiment per `(value, seed)`; rows come back ordered by value,
/// then seed, whatever the scheduling. Runs execute on `jobs` threads.
pub fn sweep(
    config: &ExperimentConfig,
    parameter: SweepParameter,
    values: &[f64],
    seeds: &[u64],
    data: &LabeledDataset,
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Empty("sweep values"));
    }
    if seeds.is_empty() {
        return Err(Error::Empty("sweep seeds"));
    }
    let mut tasks = Vec::new();
    for &v in values {
        let c = parameter.apply(config, v)?;
        c.validate()?;
        for &s in seeds {
            tasks.push((v, s, c.clone().with_seed(s)));
        }
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SweepRow>>>> = Mutex::new((0..tasks.len()).map(|_| None).collect());
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some((value, seed, cfg)) = tasks.get(i) else {
            break;
        };
        log::info!("sweep {}={value} seed={seed}", parameter.name());
        let row = run_experiment(cfg, data).map(|report| SweepRow {
            parameter: parameter.name().into(),
            value: *value,
            seed: *seed,
            accuracy: report.accuracy,
            runtime_s: report.wall_time_s,
            report,
        });
        results.lock().expect("sweep results lock")[i] = Some(row);
    };
    std::thread::scope(|scope| {
        for _ in 1..jobs.max(1).min(tasks.len()) {
            scope.spawn(worker);
        }
        worker();
    });
    results
        .into_inner()
        .expect("sweep results lock")
        .into_iter()
        .map(|r| r.expect("every sweep task ran"))
        .collect()
}

/// Plot-ready table with header `parameter,seed,accuracy,runtime_s`; the
/// `parameter` column holds the swept value.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("parameter,seed,accuracy,runtime_s\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{:.6}\n", r.value, r.seed, r.accuracy, r.runtime_s));
    }
    out
}
