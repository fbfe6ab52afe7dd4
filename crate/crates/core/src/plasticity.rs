//! Unsupervised reservoir pretraining.
//!
//! Two synaptic rules adapt the stored entries of the recurrent matrix
//! (Oja's normalized Hebbian rule and the BCM rule with a sliding
//! threshold); Gaussian intrinsic plasticity adapts each neuron's gain and
//! bias so that its tanh output distribution approaches N(mu, sigma^2).
//!
//! Within a time step the presynaptic activity is the previous state
//! `x(t-1)` and the postsynaptic activity is the new state `x(t)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::reservoir::ReservoirWeights;
use crate::spectral::rescale_spectral_radius;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OjaConfig {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for OjaConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BcmConfig {
    pub learning_rate: f64,
    /// Time constant, in steps, of the running average of y^2.
    pub threshold_time_constant: f64,
    pub epochs: usize,
    pub threshold_floor: f64,
}

impl Default for BcmConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            threshold_time_constant: 100.0,
            epochs: 100,
            threshold_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IpConfig {
    pub learning_rate: f64,
    pub target_mean: f64,
    pub target_std: f64,
    pub epochs: usize,
}

impl Default for IpConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            target_mean: 0.0,
            target_std: 0.2,
            epochs: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PlasticityRule {
    Oja(OjaConfig),
    Bcm(BcmConfig),
    Ip(IpConfig),
}

impl PlasticityRule {
    pub fn epochs(&self) -> usize {
        match self {
            PlasticityRule::Oja(c) => c.epochs,
            PlasticityRule::Bcm(c) => c.epochs,
            PlasticityRule::Ip(c) => c.epochs,
        }
    }

    pub fn set_epochs(&mut self, epochs: usize) {
        match self {
            PlasticityRule::Oja(c) => c.epochs = epochs,
            PlasticityRule::Bcm(c) => c.epochs = epochs,
            PlasticityRule::Ip(c) => c.epochs = epochs,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PlasticityRule::Oja(_) => "oja",
            PlasticityRule::Bcm(_) => "bcm",
            PlasticityRule::Ip(_) => "ip",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        };
        if self.epochs() == 0 {
            return Err(Error::config("plasticity epochs must be at least 1"));
        }
        match self {
            PlasticityRule::Oja(c) => positive("oja learning_rate", c.learning_rate),
            PlasticityRule::Bcm(c) => {
                positive("bcm learning_rate", c.learning_rate)?;
                positive("bcm threshold_floor", c.threshold_floor)?;
                if !(c.threshold_time_constant >= 1.0) {
                    return Err(Error::config("bcm threshold_time_constant must be >= 1"));
                }
                Ok(())
            }
            PlasticityRule::Ip(c) => {
                positive("ip learning_rate", c.learning_rate)?;
                positive("ip target_std", c.target_std)?;
                if !c.target_mean.is_finite() {
                    return Err(Error::config("ip target_mean must be finite"));
                }
                Ok(())
            }
        }
    }
}

/// Oja weight change: `xi * y * (x - y * w)`.
pub fn oja_step(w: f64, x: f64, y: f64, learning_rate: f64) -> f64 {
    learning_rate * y * (x - y * w)
}

/// BCM weight change: `eta * y * (y - theta) * x / theta`, with `theta`
/// clamped to the configured floor.
pub fn bcm_step(x: f64, y: f64, theta: f64, cfg: &BcmConfig) -> f64 {
    let theta = theta.max(cfg.threshold_floor);
    cfg.learning_rate * y * (y - theta) * x / theta
}

/// Exponential moving average of `y^2` with time constant `tau`.
pub fn bcm_threshold_update(theta: f64, y: f64, tau: f64) -> f64 {
    theta + (y * y - theta) / tau
}

/// Gain and bias changes `(da, db)` for one neuron with raw net input
/// `net` and output `x`, for a tanh unit with a Gaussian target.
pub fn ip_step(gain: f64, net: f64, x: f64, cfg: &IpConfig) -> Result<(f64, f64)> {
    if !(gain > 0.0) {
        return Err(Error::NonPositiveGain(gain));
    }
    let (eta, mu) = (cfg.learning_rate, cfg.target_mean);
    let var = cfg.target_std * cfg.target_std;
    let db = -eta * (-mu / var + (x / var) * (2.0 * var + 1.0 - x * x + mu * x));
    let da = eta / gain + db * net;
    Ok((da, db))
}

/// Histogram estimate of `KL(p || N(mu, sigma^2))` where `p` is the
/// empirical distribution of `samples`.
///
/// Bins are `sigma / 8` wide, aligned on `mu`, and cover both the samples
/// and `mu +- 8 sigma`. Since the Gaussian mass over the covered bins is at
/// most one, the estimate is never negative.
pub fn kl_to_gaussian(samples: &[f64], mu: f64, sigma: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("sample set"));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::config(format!("sigma must be positive, got {sigma}")));
    }
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "kl_to_gaussian",
            detail: format!("sample {bad}"),
        });
    }
    let (min, max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let lo = min.min(mu - 8.0 * sigma);
    let hi = max.max(mu + 8.0 * sigma);
    let mut width = sigma / 8.0;
    if (hi - lo) / width > 100_000.0 {
        width = (hi - lo) / 100_000.0;
    }
    let first = ((lo - mu) / width).floor() as i64;
    let last = ((hi - mu) / width).floor() as i64;
    let bins = (last - first + 1) as usize;
    let mut counts = vec![0usize; bins];
    for &v in samples {
        let k = (((v - mu) / width).floor() as i64 - first).clamp(0, bins as i64 - 1);
        counts[k as usize] += 1;
    }
    let cdf = |z: f64| 0.5 * erfc(-(z - mu) / (sigma * std::f64::consts::SQRT_2));
    let n = samples.len() as f64;
    let kl = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| {
            let left = mu + (first + i as i64) as f64 * width;
            let q = (cdf(left + width) - cdf(left)).max(1e-300);
            let p = c as f64 / n;
            p * (p / q).ln()
        })
        .sum::<f64>();
    Ok(kl.max(0.0))
}

/// Adapts a copy of `weights` by driving it with every sequence once per
/// epoch. Each sequence starts from the zero state.
pub fn pretrain(
    weights: &ReservoirWeights,
    sequences: &[DMatrix<f64>],
    rule: &PlasticityRule,
) -> Result<ReservoirWeights> {
    pretrain_with(weights, sequences, rule, |_, _| {})
}

/// As [`pretrain`], calling `on_epoch(epoch, weights)` after every epoch.
pub fn pretrain_with(
    weights: &ReservoirWeights,
    sequences: &[DMatrix<f64>],
    rule: &PlasticityRule,
    mut on_epoch: impl FnMut(usize, &ReservoirWeights),
) -> Result<ReservoirWeights> {
    if sequences.is_empty() {
        return Err(Error::Empty("pretraining sequence list"));
    }
    for seq in sequences {
        weights.check_inputs(seq)?;
    }
    let mut w = weights.clone();
    if rule.epochs() == 0 {
        return Ok(w);
    }
    let mut trainer = Trainer::new(&w, rule, sequences);
    for epoch in 0..rule.epochs() {
        for (s, seq) in sequences.iter().enumerate() {
            trainer.run(&mut w, seq)?;
            check_finite(&w, epoch, s)?;
        }
        on_epoch(epoch, &w);
    }
    if matches!(rule, PlasticityRule::Oja(_) | PlasticityRule::Bcm(_)) {
        w.w_res = rescale_spectral_radius(&w.w_res, w.spectral_radius)?;
    }
    Ok(w)
}

fn check_finite(w: &ReservoirWeights, epoch: usize, sequence: usize) -> Result<()> {
    let ok = w.w_res.all_finite()
        && w.gain.iter().chain(&w.bias).all(|v| v.is_finite());
    if ok {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: "pretraining",
            detail: format!(
                "weights diverged in epoch {epoch}, sequence {sequence}; lower the learning rate"
            ),
        })
    }
}

struct Trainer<'a> {
    rule: &'a PlasticityRule,
    /// BCM sliding thresholds, one per neuron.
    theta: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    net: Vec<f64>,
    u: Vec<f64>,
}

impl<'a> Trainer<'a> {
    fn new(w: &ReservoirWeights, rule: &'a PlasticityRule, sequences: &[DMatrix<f64>]) -> Self {
        let r = w.reservoir_size();
        let theta = match rule {
            // Start the thresholds at the mean y^2 of an update-free pass
            // over the first sequence; a threshold at the floor would make
            // the first steps explode.
            PlasticityRule::Bcm(cfg) => {
                let mut acc = vec![0.0; r];
                let seq = &sequences[0];
                crate::reservoir::drive(w, seq, |_, x| {
                    acc.iter_mut().zip(x).for_each(|(a, v)| *a += v * v)
                });
                acc.iter()
                    .map(|a| (a / seq.nrows().max(1) as f64).max(cfg.threshold_floor))
                    .collect()
            }
            _ => Vec::new(),
        };
        Self {
            rule,
            theta,
            x: vec![0.0; r],
            y: vec![0.0; r],
            net: vec![0.0; r],
            u: vec![0.0; w.input_dim()],
        }
    }

    fn run(&mut self, w: &mut ReservoirWeights, seq: &DMatrix<f64>) -> Result<()> {
        self.x.iter_mut().for_each(|v| *v = 0.0);
        for t in 0..seq.nrows() {
            self.u
                .iter_mut()
                .zip(seq.row(t).iter())
                .for_each(|(d, s)| *d = *s);
            w.step_into(&self.x, &self.u, &mut self.net, &mut self.y);
            match self.rule {
                PlasticityRule::Oja(cfg) => {
                    for k in 0..self.y.len() {
                        let yk = self.y[k];
                        if yk == 0.0 {
                            continue;
                        }
                        let (cols, vals) = w.w_res.row_mut(k);
                        for (&j, wkj) in cols.iter().zip(vals.iter_mut()) {
                            *wkj += oja_step(*wkj, self.x[j], yk, cfg.learning_rate);
                        }
                    }
                }
                PlasticityRule::Bcm(cfg) => {
                    for k in 0..self.y.len() {
                        let yk = self.y[k];
                        self.theta[k] =
                            bcm_threshold_update(self.theta[k], yk, cfg.threshold_time_constant);
                        let theta = self.theta[k];
                        let (cols, vals) = w.w_res.row_mut(k);
                        for (&j, wkj) in cols.iter().zip(vals.iter_mut()) {
                            *wkj += bcm_step(self.x[j], yk, theta, cfg);
                        }
                    }
                }
                PlasticityRule::Ip(cfg) => {
                    for i in 0..self.y.len() {
                        let (da, db) = ip_step(w.gain[i], self.net[i], self.y[i], cfg)?;
                        w.gain[i] += da;
                        w.bias[i] += db;
                    }
                }
            }
            std::mem::swap(&mut self.x, &mut self.y);
        }
        Ok(())
    }
}
