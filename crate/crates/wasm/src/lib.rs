//! Browser bindings for three small demos: wavelet band energies of a
//! tone, echo-state divergence against spectral radius, and the state
//! histogram before and after intrinsic plasticity.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

use esn_plasticity::plasticity::{kl_to_gaussian, pretrain, IpConfig, PlasticityRule};
use esn_plasticity::reservoir::{esp_divergence, init_reservoir, run_sequence, ReservoirConfig};
use esn_plasticity::wavelet::level_energies;
use esn_plasticity::Result;

pub const LEVELS: usize = 5;
const TONE_SAMPLES: usize = 1024;

/// Energy fractions `[D1, ..., D5, A5]` of a unit tone plus white noise.
pub fn tone_band_energies(freq_hz: f64, sample_rate_hz: f64, noise: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = std::f64::consts::TAU * freq_hz / sample_rate_hz;
    let x: Vec<f64> = (0..TONE_SAMPLES)
        .map(|t| (omega * t as f64).sin() + noise * rng.random_range(-1.0..1.0))
        .collect();
    let e = level_energies(&x, LEVELS)?;
    let total: f64 = e.iter().sum();
    Ok(e.iter().map(|v| v / total.max(f64::MIN_POSITIVE)).collect())
}

/// Final-state distance of two runs from random starts, one per radius.
pub fn divergence_by_radius(reservoir_size: usize, radii: &[f64], steps: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let inputs = DMatrix::from_fn(steps, 1, |_, _| rng.random_range(-1.0..1.0));
    radii
        .iter()
        .map(|&rho| {
            let w = init_reservoir(&ReservoirConfig {
                reservoir_size,
                spectral_radius: rho,
                connectivity: 0.1,
                seed,
                ..ReservoirConfig::default()
            })?;
            esp_divergence(&w, &inputs, seed)
        })
        .collect()
}

/// State histograms over `[-1, 1]` before and after IP pretraining.
#[derive(Debug, Clone, PartialEq)]
pub struct IpHistograms {
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub kl_before: f64,
    pub kl_after: f64,
}

fn histogram(values: &[f64], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &v in values {
        let b = (((v + 1.0) / 2.0) * bins as f64).floor().clamp(0.0, bins as f64 - 1.0) as usize;
        h[b] += 1.0;
    }
    let n = values.len().max(1) as f64;
    h.iter_mut().for_each(|c| *c /= n);
    h
}

pub fn ip_histograms(reservoir_size: usize, epochs: usize, bins: usize, seed: u64) -> Result<IpHistograms> {
    let w0 = init_reservoir(&ReservoirConfig {
        reservoir_size,
        seed,
        ..ReservoirConfig::default()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1f);
    let seqs: Vec<DMatrix<f64>> = (0..3)
        .map(|_| DMatrix::from_fn(400, 1, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let ip = IpConfig { epochs, ..IpConfig::default() };
    let w1 = pretrain(&w0, &seqs, &PlasticityRule::Ip(ip.clone()))?;
    let states = |w| -> Result<Vec<f64>> {
        let mut all = Vec::new();
        for s in &seqs {
            all.extend(run_sequence(w, s, 50)?.states.iter().copied());
        }
        Ok(all)
    };
    let (a, b) = (states(&w0)?, states(&w1)?);
    Ok(IpHistograms {
        before: histogram(&a, bins.max(1)),
        after: histogram(&b, bins.max(1)),
        kl_before: kl_to_gaussian(&a, ip.target_mean, ip.target_std)?,
        kl_after: kl_to_gaussian(&b, ip.target_mean, ip.target_std)?,
    })
}

fn js(e: esn_plasticity::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = bandEnergies)]
pub fn band_energies_js(freq_hz: f64, sample_rate_hz: f64, noise: f64, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    tone_band_energies(freq_hz, sample_rate_hz, noise, seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = espCurve)]
pub fn esp_curve_js(reservoir_size: usize, radii: &[f64], steps: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    divergence_by_radius(reservoir_size, radii, steps, seed.into()).map_err(js)
}

/// Flat layout: `[kl_before, kl_after, before[0..bins], after[0..bins]]`.
#[wasm_bindgen(js_name = ipHistograms)]
pub fn ip_histograms_js(reservoir_size: usize, epochs: usize, bins: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    let h = ip_histograms(reservoir_size, epochs, bins, seed.into()).map_err(js)?;
    let mut out = vec![h.kl_before, h.kl_after];
    out.extend(h.before);
    out.extend(h.after);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tone_energy_lands_in_one_level() {
        // 24 Hz at 128 Hz: D2 spans 16-32 Hz
        let e = tone_band_energies(24.0, 128.0, 0.0, 1).unwrap();
        assert_eq!(e.len(), LEVELS + 1);
        assert!((e.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(e[1] > 0.8, "{e:?}");
    }

    #[test]
    fn divergence_grows_past_unit_radius() {
        let d = divergence_by_radius(60, &[0.5, 1.5], 300, 2).unwrap();
        assert!(d[0] < 1e-9 && d[1] > 1e-4, "{d:?}");
    }

    #[test]
    fn ip_moves_toward_the_target() {
        let h = ip_histograms(60, 10, 20, 3).unwrap();
        assert!((h.before.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(h.kl_after < h.kl_before);
    }
}
