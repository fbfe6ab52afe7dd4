//! Wavelet band-power features.

use serde::{Deserialize, Serialize};

use crate::dataset::Trial;
use crate::error::{Error, Result};
use crate::wavelet::dwt_decompose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub name: String,
    pub low_hz: f64,
    pub high_hz: f64,
    /// Detail level `j` of `Dj`.
    pub level: usize,
}

/// The bands kept as features and the decomposition depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandTable {
    pub levels: usize,
    pub bands: Vec<Band>,
}

const BANDS: [(&str, f64, f64); 4] = [
    ("gamma", 32.0, 64.0),
    ("beta", 16.0, 32.0),
    ("alpha", 8.0, 16.0),
    ("theta", 4.0, 8.0),
];

impl BandTable {
    /// Gamma D2, Beta D3, Alpha D4, Theta D5 over a 5-level decomposition.
    /// D1 (noise) and A5 (delta) are dropped.
    ///
    /// Note that this level assignment matches the nominal bandwidths only
    /// for 256 Hz sampling; see [`BandTable::for_sample_rate`].
    pub fn table_iii() -> Self {
        Self {
            levels: 5,
            bands: BANDS
                .iter()
                .zip(2..)
                .map(|(&(name, low_hz, high_hz), level)| Band {
                    name: name.into(),
                    low_hz,
                    high_hz,
                    level,
                })
                .collect(),
        }
    }

    /// Same four bands, each mapped to the detail level whose nominal range
    /// `[fs / 2^(j+1), fs / 2^j]` is nearest on a log scale.
    pub fn for_sample_rate(sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::config(format!("invalid sample rate {sample_rate_hz}")));
        }
        let mut table = Self::table_iii();
        for band in &mut table.bands {
            let j = (sample_rate_hz / band.high_hz).log2().round();
            if !(1.0..=table.levels as f64).contains(&j) {
                return Err(Error::config(format!(
                    "band {} ({}-{} Hz) has no detail level at {sample_rate_hz} Hz over {} levels",
                    band.name, band.low_hz, band.high_hz, table.levels
                )));
            }
            band.level = j as usize;
        }
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::config("band table is empty"));
        }
        let mut seen = vec![false; self.levels + 1];
        for b in &self.bands {
            if b.level == 0 || b.level > self.levels {
                return Err(Error::config(format!(
                    "band {} uses level {} outside 1..={}",
                    b.name, b.level, self.levels
                )));
            }
            if std::mem::replace(&mut seen[b.level], true) {
                return Err(Error::config(format!("level D{} used twice", b.level)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }
}

impl Default for BandTable {
    fn default() -> Self {
        Self::table_iii()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerKind {
    #[default]
    MeanSquare,
    SumSquare,
    /// `ln(1 + mean square)`, which keeps features nonnegative.
    LogMeanSquare,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureOptions {
    pub bands: BandTable,
    pub power: PowerKind,
}

pub fn band_power(coefficients: &[f64], kind: PowerKind) -> Result<f64> {
    if coefficients.is_empty() {
        return Err(Error::Empty("coefficient vector"));
    }
    let sum: f64 = coefficients.iter().map(|c| c * c).sum();
    let mean = sum / coefficients.len() as f64;
    Ok(match kind {
        PowerKind::MeanSquare => mean,
        PowerKind::SumSquare => sum,
        PowerKind::LogMeanSquare => mean.ln_1p(),
    })
}

/// Band powers of a trial, channel-major: `values[c * bands + b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub channels: usize,
    pub band_names: Vec<String>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let b = self.band_names.len();
        &self.values[c * b..(c + 1) * b]
    }
}

pub fn channel_features(signal: &[f64], opts: &FeatureOptions) -> Result<Vec<f64>> {
    let coeffs = dwt_decompose(signal, opts.bands.levels)?;
    opts.bands
        .bands
        .iter()
        .map(|b| band_power(&coeffs[b.level - 1], opts.power))
        .collect()
}

pub fn extract_trial_features(trial: &Trial, opts: &FeatureOptions) -> Result<FeatureVector> {
    opts.bands.validate()?;
    let mut values = Vec::with_capacity(trial.channels() * opts.bands.len());
    for c in 0..trial.channels() {
        values.extend(channel_features(&trial.channel_f64(c), opts)?);
    }
    Ok(FeatureVector {
        values,
        channels: trial.channels(),
        band_names: opts.bands.bands.iter().map(|b| b.name.clone()).collect(),
    })
}
