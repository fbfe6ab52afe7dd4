//! Native on-disk layout: a JSON manifest plus two raw little-endian
//! `f32` files per subject.
//!
//! * data file: index `((trial * channels) + channel) * samples + sample`
//! * labels file: 4 values per trial (valence, arousal, dominance, liking)

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{LabelScheme, LabeledDataset, Ratings, Subject, Trial};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectEntry {
    pub id: String,
    pub data_file: PathBuf,
    pub labels_file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub subjects: Vec<SubjectEntry>,
    pub channels: usize,
    pub sample_rate_hz: u32,
    pub samples_per_trial: usize,
    pub trials_per_subject: usize,
}

/// A loaded manifest and its subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub subjects: Vec<Subject>,
}

impl Dataset {
    pub fn labeled(self, scheme: LabelScheme) -> Result<LabeledDataset> {
        let rate = f64::from(self.manifest.sample_rate_hz);
        LabeledDataset::from_subjects(self.subjects, scheme, rate)
    }
}

fn read_f32s(path: &Path, expected_values: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = expected_values * 4;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "expected {expected} bytes, found {} (size mismatch against manifest shape)",
                bytes.len()
            ),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

fn write_f32s(path: &Path, values: impl Iterator<Item = f32>) -> Result<()> {
    let bytes: Vec<u8> = values.flat_map(f32::to_le_bytes).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

const RATING_NAMES: [&str; 4] = ["valence", "arousal", "dominance", "liking"];

/// Reads a manifest and every subject it lists, validating byte counts and
/// rating ranges.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::format(manifest_path, format!("malformed manifest: {e}")))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let (channels, samples, trials) = (
        manifest.channels,
        manifest.samples_per_trial,
        manifest.trials_per_subject,
    );
    if !manifest.subjects.is_empty() && (channels == 0 || samples == 0) {
        return Err(Error::format(
            manifest_path,
            "channels and samples_per_trial must be positive",
        ));
    }
    let per_trial = channels * samples;

    let mut subjects = Vec::with_capacity(manifest.subjects.len());
    for entry in &manifest.subjects {
        let data_path = base.join(&entry.data_file);
        let labels_path = base.join(&entry.labels_file);
        let data = read_f32s(&data_path, trials * per_trial)?;
        let labels = read_f32s(&labels_path, trials * 4)?;

        let mut subject_trials = Vec::with_capacity(trials);
        for t in 0..trials {
            let mut r = [0.0; 4];
            for (f, slot) in r.iter_mut().enumerate() {
                let v = f64::from(labels[t * 4 + f]);
                if !(1.0..=9.0).contains(&v) {
                    return Err(Error::format(
                        &labels_path,
                        format!(
                            "{} rating {v} of trial {t} at byte offset {} outside [1, 9]",
                            RATING_NAMES[f],
                            (t * 4 + f) * 4
                        ),
                    ));
                }
                *slot = v;
            }
            let signals = data[t * per_trial..(t + 1) * per_trial].to_vec();
            subject_trials.push(Trial::new(channels, samples, signals, Ratings::from_array(r))?);
        }
        subjects.push(Subject {
            id: entry.id.clone(),
            trials: subject_trials,
        });
    }
    Ok(Dataset { manifest, subjects })
}

/// Writes `subjects` under `dir` as `<id>.data.f32` / `<id>.labels.f32`
/// plus `manifest.json`, returning the manifest path.
pub fn save_dataset(dir: impl AsRef<Path>, subjects: &[Subject], sample_rate_hz: u32) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let first = subjects.iter().flat_map(|s| s.trials.first()).next();
    let (channels, samples) = first.map_or((0, 0), |t| (t.channels(), t.samples()));
    let trials = subjects.first().map_or(0, |s| s.trials.len());
    for s in subjects {
        crate::error::check_dim("trials per subject", trials, s.trials.len())?;
        for t in &s.trials {
            crate::error::check_dim("trial channel count", channels, t.channels())?;
            crate::error::check_dim("trial sample count", samples, t.samples())?;
        }
    }

    let mut entries = Vec::with_capacity(subjects.len());
    for s in subjects {
        let data_file = PathBuf::from(format!("{}.data.f32", s.id));
        let labels_file = PathBuf::from(format!("{}.labels.f32", s.id));
        write_f32s(
            &dir.join(&data_file),
            s.trials.iter().flat_map(|t| t.signals().iter().copied()),
        )?;
        write_f32s(
            &dir.join(&labels_file),
            s.trials
                .iter()
                .flat_map(|t| t.ratings.as_array().map(|r| r as f32)),
        )?;
        entries.push(SubjectEntry {
            id: s.id.clone(),
            data_file,
            labels_file,
        });
    }
    let manifest = Manifest {
        subjects: entries,
        channels,
        sample_rate_hz,
        samples_per_trial: samples,
        trials_per_subject: trials,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subject(id: &str, trials: usize, channels: usize, samples: usize) -> Subject {
        Subject {
            id: id.into(),
            trials: (0..trials)
                .map(|t| {
                    let signals = (0..channels * samples)
                        .map(|i| (i as f32 * 0.37 + t as f32).sin())
                        .collect();
                    let r = 1.0 + (t % 9) as f64 * 0.5;
                    Trial::new(channels, samples, signals, Ratings::from_array([r, 9.0 - r + 1.0, 5.0, 1.25]))
                        .unwrap()
                })
                .collect(),
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let subjects = vec![subject("s01", 4, 3, 16), subject("s02", 4, 3, 16)];
        let path = save_dataset(dir.path(), &subjects, 128).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded.subjects, subjects);
        assert_eq!(loaded.manifest.trials_per_subject, 4);
        assert_eq!(loaded.manifest.channels, 3);
        assert_eq!(loaded.manifest.samples_per_trial, 16);
    }

    #[test]
    fn truncated_data_names_byte_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_dataset(dir.path(), &[subject("s01", 2, 2, 8)], 128).unwrap();
        let data = dir.path().join("s01.data.f32");
        let bytes = fs::read(&data).unwrap();
        fs::write(&data, &bytes[..bytes.len() - 6]).unwrap();
        let err = load_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("expected 128 bytes, found 122"), "{err}");
        assert!(err.contains("s01.data.f32"), "{err}");
    }

    #[test]
    fn out_of_range_rating_is_located() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_dataset(dir.path(), &[subject("s01", 2, 1, 4)], 128).unwrap();
        let labels = dir.path().join("s01.labels.f32");
        let mut bytes = fs::read(&labels).unwrap();
        bytes[20..24].copy_from_slice(&9.5f32.to_le_bytes());
        fs::write(&labels, bytes).unwrap();
        let err = load_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("arousal rating 9.5 of trial 1 at byte offset 20"), "{err}");
    }

    #[test]
    fn missing_file_and_bad_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_dataset(dir.path().join("nope.json")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));

        let path = dir.path().join("manifest.json");
        fs::write(&path, r#"{"subjects": [], "channels": 32, "sample_rate_hz": 128,
            "samples_per_trial": 8064, "trials_per_subject": 40, "extra": 1}"#)
            .unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Format { .. })));

        fs::write(&path, r#"{"subjects": [{"id": "s01", "data_file": "gone.f32", "labels_file": "gone.lab"}],
            "channels": 32, "sample_rate_hz": 128, "samples_per_trial": 8064, "trials_per_subject": 40}"#)
            .unwrap();
        let err = load_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("gone.f32"), "{err}");
    }

    #[test]
    fn empty_manifest_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_dataset(dir.path(), &[], 128).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert!(loaded.subjects.is_empty());
    }
}
