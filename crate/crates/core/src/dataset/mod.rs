//! Trials, label schemes, splitting, on-disk layout and synthetic data.

mod io;
mod labels;
mod synthetic;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, save_dataset, Dataset, Manifest, SubjectEntry};
pub use labels::{label_trial, LabelScheme, SchemeKind};
pub use synthetic::{generate_synthetic, generate_synthetic_subjects, SyntheticSpec, CLASS_FREQUENCIES_HZ};

/// Self-assessment ratings on the 1 to 9 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratings {
    pub valence: f64,
    pub arousal: f64,
    pub dominance: f64,
    pub liking: f64,
}

impl Ratings {
    pub fn as_array(&self) -> [f64; 4] {
        [self.valence, self.arousal, self.dominance, self.liking]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            valence: a[0],
            arousal: a[1],
            dominance: a[2],
            liking: a[3],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.as_array().iter().all(|r| (1.0..=9.0).contains(r))
    }

    /// Rounds each rating to the nearest 32-bit float.
    pub fn to_f32_grid(self) -> Self {
        Self::from_array(self.as_array().map(|r| f64::from(r as f32)))
    }
}

/// One recording: a channels x samples signal matrix and its ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    channels: usize,
    samples: usize,
    /// channel-major
    signals: Vec<f32>,
    pub ratings: Ratings,
}

impl Trial {
    pub fn new(channels: usize, samples: usize, signals: Vec<f32>, ratings: Ratings) -> Result<Self> {
        if channels == 0 || samples == 0 {
            return Err(Error::config("a trial needs at least one channel and one sample"));
        }
        crate::error::check_dim("trial signal length", channels * samples, signals.len())?;
        if !ratings.is_valid() {
            return Err(Error::config(format!(
                "ratings {:?} outside [1, 9]",
                ratings.as_array()
            )));
        }
        Ok(Self {
            channels,
            samples,
            signals,
            ratings,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.signals[c * self.samples..(c + 1) * self.samples]
    }

    pub fn channel_f64(&self, c: usize) -> Vec<f64> {
        self.channel(c).iter().map(|&v| f64::from(v)).collect()
    }

    pub fn signals(&self) -> &[f32] {
        &self.signals
    }

    /// Copy with channels `a` and `b` exchanged.
    pub fn with_swapped_channels(&self, a: usize, b: usize) -> Self {
        let mut out = self.clone();
        for s in 0..self.samples {
            out.signals.swap(a * self.samples + s, b * self.samples + s);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub trials: Vec<Trial>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrialId {
    pub subject: String,
    pub trial: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrial {
    pub id: TrialId,
    pub trial: Trial,
    pub label: usize,
}

/// Trials that received a label under `scheme`, pooled over subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub trials: Vec<LabeledTrial>,
    pub class_names: Vec<String>,
    pub scheme: LabelScheme,
    pub sample_rate_hz: f64,
}

impl LabeledDataset {
    /// Labels every trial; trials the scheme leaves unlabeled are dropped.
    pub fn from_subjects(subjects: Vec<Subject>, scheme: LabelScheme, sample_rate_hz: f64) -> Result<Self> {
        scheme.validate()?;
        let mut trials = Vec::new();
        for subject in subjects {
            for (index, trial) in subject.trials.into_iter().enumerate() {
                if let Some(label) = scheme.label(&trial.ratings) {
                    trials.push(LabeledTrial {
                        id: TrialId {
                            subject: subject.id.clone(),
                            trial: index,
                        },
                        trial,
                        label,
                    });
                }
            }
        }
        Ok(Self {
            trials,
            class_names: scheme.class_names(),
            scheme,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for t in &self.trials {
            counts[t.label] += 1;
        }
        counts
    }

    /// Channel count shared by all trials.
    pub fn channels(&self) -> Result<usize> {
        let first = self.trials.first().ok_or(Error::Empty("dataset"))?;
        let c = first.trial.channels();
        for t in &self.trials {
            crate::error::check_dim("trial channel count", c, t.trial.channels())?;
        }
        Ok(c)
    }
}

/// Indices into a [`LabeledDataset`], each partition in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn is_partition_of(&self, n: usize) -> bool {
        let train: BTreeSet<_> = self.train.iter().collect();
        let test: BTreeSet<_> = self.test.iter().collect();
        train.is_disjoint(&test)
            && train.len() == self.train.len()
            && test.len() == self.test.len()
            && train.len() + test.len() == n
            && train.union(&test).all(|&&i| i < n)
    }
}

/// Stratified seeded split: every class with trials contributes
/// `round(fraction * n_class)` of them to training (at least one, and at
/// least one left for testing).
pub fn split_train_test(data: &LabeledDataset, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!(
            "train fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..data.num_classes() {
        let mut members: Vec<usize> = data
            .trials
            .iter()
            .enumerate()
            .filter(|(_, t)| t.label == class)
            .map(|(i, _)| i)
            .collect();
        match members.len() {
            0 => continue,
            1 => {
                return Err(Error::config(format!(
                    "class `{}` has a single trial; a stratified split needs at least two",
                    data.class_names[class]
                )))
            }
            n => {
                members.shuffle(&mut rng);
                let n_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
                train.extend_from_slice(&members[..n_train]);
                test.extend_from_slice(&members[n_train..]);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}
