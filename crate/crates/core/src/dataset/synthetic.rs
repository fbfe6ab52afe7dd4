//! Band-coded synthetic trials: class `k` carries a sinusoid at the centre
//! of one frequency band on every channel, plus white noise.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{LabelScheme, LabeledDataset, SchemeKind, Subject, Trial};
use crate::error::{Error, Result};

/// Carrier frequency per class: Alpha, Beta, Theta, Gamma band centres.
pub const CLASS_FREQUENCIES_HZ: [f64; 4] = [12.0, 24.0, 6.0, 48.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub trials_per_class: usize,
    pub channels: usize,
    pub samples: usize,
    pub sample_rate_hz: u32,
    /// Sinusoid power over noise power; 0 means noise only.
    pub snr: f64,
    pub seed: u64,
    pub scheme: LabelScheme,
    pub subjects: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 2,
            trials_per_class: 60,
            channels: 8,
            samples: 1024,
            sample_rate_hz: 128,
            snr: 10.0,
            seed: 0,
            scheme: LabelScheme::new(SchemeKind::Lvhv),
            subjects: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.classes == 0
            || self.trials_per_class == 0
            || self.channels == 0
            || self.samples == 0
            || self.sample_rate_hz == 0
            || self.subjects == 0
        {
            return Err(Error::config("synthetic counts and sample rate must be positive"));
        }
        if self.classes > CLASS_FREQUENCIES_HZ.len() {
            return Err(Error::config(format!(
                "the band-coded generator supports at most {} classes, got {}",
                CLASS_FREQUENCIES_HZ.len(),
                self.classes
            )));
        }
        if self.classes > self.scheme.num_classes() {
            return Err(Error::config(format!(
                "scheme `{}` has {} classes, fewer than the {} requested",
                self.scheme.kind.name(),
                self.scheme.num_classes(),
                self.classes
            )));
        }
        let nyquist = f64::from(self.sample_rate_hz) / 2.0;
        if let Some(f) = CLASS_FREQUENCIES_HZ[..self.classes].iter().find(|&&f| f >= nyquist) {
            return Err(Error::config(format!(
                "class carrier {f} Hz is not below the Nyquist frequency {nyquist} Hz"
            )));
        }
        if !(self.snr.is_finite() && self.snr >= 0.0) {
            return Err(Error::config(format!("snr must be finite and >= 0, got {}", self.snr)));
        }
        if self.subjects > self.classes * self.trials_per_class {
            return Err(Error::config("more subjects than trials"));
        }
        Ok(())
    }

    pub fn total_trials(&self) -> usize {
        self.classes * self.trials_per_class
    }
}

/// Generates the raw subjects. Trial `i` belongs to class `i % classes`;
/// trials are dealt to subjects in contiguous blocks.
pub fn generate_synthetic_subjects(spec: &SyntheticSpec) -> Result<Vec<Subject>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (amplitude, noise_std) = if spec.snr > 0.0 {
        (1.0, (0.5 / spec.snr).sqrt())
    } else {
        (0.0, 1.0)
    };
    let noise = Normal::new(0.0, noise_std).expect("finite positive std");
    let fs = f64::from(spec.sample_rate_hz);
    let total = spec.total_trials();

    let mut subjects: Vec<Subject> = (0..spec.subjects)
        .map(|s| Subject {
            id: format!("s{:02}", s + 1),
            trials: Vec::new(),
        })
        .collect();
    for i in 0..total {
        let class = i % spec.classes;
        let omega = TAU * CLASS_FREQUENCIES_HZ[class] / fs;
        let mut signals = Vec::with_capacity(spec.channels * spec.samples);
        for _ in 0..spec.channels {
            let phase = rng.random_range(0.0..TAU);
            signals.extend((0..spec.samples).map(|t| {
                (amplitude * (omega * t as f64 + phase).sin() + noise.sample(&mut rng)) as f32
            }));
        }
        let ratings = spec.scheme.sample_ratings(class, &mut rng).to_f32_grid();
        let trial = Trial::new(spec.channels, spec.samples, signals, ratings)?;
        subjects[i * spec.subjects / total].trials.push(trial);
    }
    Ok(subjects)
}

/// Generates and labels a synthetic dataset under `spec.scheme`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    let subjects = generate_synthetic_subjects(spec)?;
    LabeledDataset::from_subjects(subjects, spec.scheme, f64::from(spec.sample_rate_hz))
}
