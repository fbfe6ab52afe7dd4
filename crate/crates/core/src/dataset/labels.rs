//! Emotion label schemes over valence/arousal/dominance ratings.

use serde::{Deserialize, Serialize};

use super::Ratings;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Low/high arousal.
    Laha,
    /// Low/high valence.
    Lvhv,
    StressCalm,
    /// Valence x arousal x dominance octants.
    EightStates,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::Laha,
        SchemeKind::Lvhv,
        SchemeKind::StressCalm,
        SchemeKind::EightStates,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Laha => "laha",
            SchemeKind::Lvhv => "lvhv",
            SchemeKind::StressCalm => "stress_calm",
            SchemeKind::EightStates => "eight_states",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| Error::config(format!("unknown label scheme `{s}`")))
    }
}

/// Octant names indexed by `4 * low_valence + 2 * high_arousal + high_dominance`.
const EIGHT_STATES: [&str; 8] = [
    "protected",   // HV LA LD
    "satisfied",   // HV LA HD
    "surprised",   // HV HA LD
    "happy",       // HV HA HD
    "sad",         // LV LA LD
    "unconcerned", // LV LA HD
    "frightened",  // LV HA LD
    "angry",       // LV HA HD
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelScheme {
    pub kind: SchemeKind,
    /// Ratings at or above the threshold count as high.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    5.0
}

impl LabelScheme {
    pub fn new(kind: SchemeKind) -> Self {
        Self {
            kind,
            threshold: default_threshold(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold > 1.0 && self.threshold < 9.0 {
            Ok(())
        } else {
            Err(Error::config(format!(
                "label threshold must lie in (1, 9), got {}",
                self.threshold
            )))
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        let names: &[&str] = match self.kind {
            SchemeKind::Laha => &["low_arousal", "high_arousal"],
            SchemeKind::Lvhv => &["low_valence", "high_valence"],
            SchemeKind::StressCalm => &["stress", "calm"],
            SchemeKind::EightStates => &EIGHT_STATES,
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn num_classes(&self) -> usize {
        match self.kind {
            SchemeKind::EightStates => 8,
            _ => 2,
        }
    }

    fn high(&self, rating: f64) -> bool {
        rating >= self.threshold
    }

    /// Class index for `ratings`, or `None` when the scheme leaves the
    /// trial unlabeled.
    pub fn label(&self, ratings: &Ratings) -> Option<usize> {
        match self.kind {
            SchemeKind::Laha => Some(usize::from(self.high(ratings.arousal))),
            SchemeKind::Lvhv => Some(usize::from(self.high(ratings.valence))),
            SchemeKind::StressCalm => {
                let (v, a) = (ratings.valence, ratings.arousal);
                if v <= 3.0 && a >= 5.0 {
                    Some(0)
                } else if (4.0..=6.0).contains(&v) && a < 4.0 {
                    Some(1)
                } else {
                    None
                }
            }
            SchemeKind::EightStates => {
                let low_v = usize::from(!self.high(ratings.valence));
                let high_a = usize::from(self.high(ratings.arousal));
                let high_d = usize::from(self.high(ratings.dominance));
                Some(4 * low_v + 2 * high_a + high_d)
            }
        }
    }

    /// Ratings inside class `class`'s region, on a 0.01 grid so they
    /// survive a round trip through 32-bit floats.
    pub(crate) fn sample_ratings(&self, class: usize, rng: &mut impl rand::Rng) -> Ratings {
        // Grid bounds are nudged so the 32-bit rounding of a sample stays on
        // the intended side of the threshold.
        let on_grid = |k: i32| f64::from((f64::from(k) / 100.0) as f32);
        let mut t = (self.threshold * 100.0).ceil() as i32;
        while on_grid(t) < self.threshold {
            t += 1;
        }
        let mut t_low = t - 1;
        while on_grid(t_low) >= self.threshold {
            t_low -= 1;
        }
        let low = (100, t_low);
        let high = (t, 900);
        let any = (100, 900);
        let mut pick = |(lo, hi): (i32, i32)| f64::from(rng.random_range(lo..=hi)) / 100.0;
        let (v, a, d) = match self.kind {
            SchemeKind::Laha => (any, if class == 0 { low } else { high }, any),
            SchemeKind::Lvhv => (if class == 0 { low } else { high }, any, any),
            SchemeKind::StressCalm => {
                if class == 0 {
                    ((100, 300), (500, 900), any)
                } else {
                    ((400, 600), (100, 399), any)
                }
            }
            SchemeKind::EightStates => (
                if class >= 4 { low } else { high },
                if class & 2 != 0 { high } else { low },
                if class & 1 != 0 { high } else { low },
            ),
        };
        Ratings {
            valence: pick(v),
            arousal: pick(a),
            dominance: pick(d),
            liking: pick(any),
        }
    }
}

/// Free-function form of [`LabelScheme::label`].
pub fn label_trial(ratings: &Ratings, scheme: &LabelScheme) -> Option<usize> {
    scheme.label(ratings)
}
