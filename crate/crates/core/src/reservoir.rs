//! Reservoir construction, state updates and state harvesting.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::sparse::SparseMatrix;
use crate::spectral::rescale_spectral_radius;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReservoirConfig {
    pub input_dim: usize,
    pub reservoir_size: usize,
    pub output_dim: usize,
    pub spectral_radius: f64,
    /// Half-width of the uniform input weight distribution.
    pub input_scaling: f64,
    /// Fraction of nonzero recurrent entries.
    pub connectivity: f64,
    /// Leading steps discarded before states are harvested.
    pub washout: usize,
    pub seed: u64,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            input_dim: 1,
            reservoir_size: 2500,
            output_dim: 2,
            spectral_radius: 0.85,
            input_scaling: 1.0,
            connectivity: 0.1,
            washout: 100,
            seed: 0,
        }
    }
}

impl ReservoirConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reservoir_size == 0 {
            return Err(Error::config("reservoir_size must be positive"));
        }
        if self.input_dim == 0 {
            return Err(Error::config("input_dim must be positive"));
        }
        if self.output_dim == 0 {
            return Err(Error::config("output_dim must be positive"));
        }
        if !(self.spectral_radius.is_finite() && self.spectral_radius > 0.0) {
            return Err(Error::config(format!(
                "spectral_radius must be positive and finite, got {}",
                self.spectral_radius
            )));
        }
        if !(self.input_scaling.is_finite() && self.input_scaling > 0.0) {
            return Err(Error::config(format!(
                "input_scaling must be positive, got {}",
                self.input_scaling
            )));
        }
        if !(self.connectivity > 0.0 && self.connectivity <= 1.0) {
            return Err(Error::config(format!(
                "connectivity must lie in (0, 1], got {}",
                self.connectivity
            )));
        }
        Ok(())
    }
}

/// The adapted network: input and recurrent weights plus the per-neuron
/// gain and bias that intrinsic plasticity tunes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirWeights {
    /// R x I
    pub w_in: DMatrix<f64>,
    /// R x R, fixed sparsity pattern
    pub w_res: SparseMatrix,
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
    /// Spectral radius the recurrent matrix is held at after synaptic
    /// pretraining.
    pub spectral_radius: f64,
}

impl ReservoirWeights {
    /// Assembles weights from parts, with unit gain and zero bias.
    pub fn new(w_in: DMatrix<f64>, w_res: SparseMatrix, spectral_radius: f64) -> Result<Self> {
        let r = w_res.nrows();
        check_dim("recurrent matrix columns", r, w_res.ncols())?;
        check_dim("input matrix rows", r, w_in.nrows())?;
        Ok(Self {
            w_in,
            w_res,
            gain: vec![1.0; r],
            bias: vec![0.0; r],
            spectral_radius,
        })
    }

    pub fn reservoir_size(&self) -> usize {
        self.w_res.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_in.ncols()
    }

    /// `net = W_in u + W_res x`
    pub(crate) fn net_input_into(&self, x: &[f64], u: &[f64], net: &mut [f64]) {
        self.w_res.mul_vec_into(x, net);
        let r = net.len();
        for (j, &uj) in u.iter().enumerate() {
            if uj == 0.0 {
                continue;
            }
            let col = &self.w_in.as_slice()[j * r..(j + 1) * r];
            net.iter_mut().zip(col).for_each(|(n, w)| *n += w * uj);
        }
    }

    /// One gain/bias-modulated update, written into `out`; `net` receives
    /// the raw net input.
    pub(crate) fn step_into(&self, x: &[f64], u: &[f64], net: &mut [f64], out: &mut [f64]) {
        self.net_input_into(x, u, net);
        for (i, o) in out.iter_mut().enumerate() {
            *o = (self.gain[i] * net[i] + self.bias[i]).tanh();
        }
    }

    fn check_step_dims(&self, x: &[f64], u: &[f64]) -> Result<()> {
        check_dim("state vector", self.reservoir_size(), x.len())?;
        check_dim("input vector", self.input_dim(), u.len())?;
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "state update",
                detail: format!("state entry {bad}"),
            });
        }
        Ok(())
    }

    pub(crate) fn check_inputs(&self, inputs: &DMatrix<f64>) -> Result<()> {
        check_dim("input sequence columns", self.input_dim(), inputs.ncols())
    }
}

/// Harvested post-washout states and their time average.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    /// One row per harvested time step, R columns.
    pub states: DMatrix<f64>,
    pub pooled: Vec<f64>,
}

/// Builds a random reservoir scaled to the configured spectral radius.
pub fn init_reservoir(config: &ReservoirConfig) -> Result<ReservoirWeights> {
    config.validate()?;
    let r = config.reservoir_size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = config.input_scaling;
    let w_in = DMatrix::from_fn(r, config.input_dim, |_, _| rng.random_range(-scale..=scale));
    let raw = SparseMatrix::from_fn(r, r, |_, _| {
        (rng.random::<f64>() < config.connectivity).then(|| rng.random_range(-1.0..=1.0))
    });
    let w_res = rescale_spectral_radius(&raw, config.spectral_radius)?;
    ReservoirWeights::new(w_in, w_res, config.spectral_radius)
}

/// `x(t) = tanh(W_in u(t) + W_res x(t-1))`, ignoring gain and bias.
pub fn update_state(weights: &ReservoirWeights, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    weights.check_step_dims(x, u)?;
    let mut net = vec![0.0; weights.reservoir_size()];
    weights.net_input_into(x, u, &mut net);
    net.iter_mut().for_each(|v| *v = v.tanh());
    Ok(net)
}

/// `x(t) = tanh(diag(a) (W_in u(t) + W_res x(t-1)) + b)`
pub fn update_state_ip(weights: &ReservoirWeights, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    weights.check_step_dims(x, u)?;
    let r = weights.reservoir_size();
    let mut net = vec![0.0; r];
    let mut out = vec![0.0; r];
    weights.step_into(x, u, &mut net, &mut out);
    Ok(out)
}

/// Drives the reservoir from the zero state, invoking `visit(t, state)` for
/// every step.
pub(crate) fn drive(
    weights: &ReservoirWeights,
    inputs: &DMatrix<f64>,
    mut visit: impl FnMut(usize, &[f64]),
) {
    let r = weights.reservoir_size();
    let mut x = vec![0.0; r];
    let mut next = vec![0.0; r];
    let mut net = vec![0.0; r];
    let mut u = vec![0.0; inputs.ncols()];
    for t in 0..inputs.nrows() {
        u.iter_mut()
            .zip(inputs.row(t).iter())
            .for_each(|(d, s)| *d = *s);
        weights.step_into(&x, &u, &mut net, &mut next);
        std::mem::swap(&mut x, &mut next);
        visit(t, &x);
    }
}

fn check_washout(inputs: &DMatrix<f64>, washout: usize) -> Result<()> {
    if inputs.nrows() <= washout {
        return Err(Error::config(format!(
            "sequence of {} steps is not longer than the washout of {washout}",
            inputs.nrows()
        )));
    }
    Ok(())
}

/// Runs a `T x I` input sequence and keeps the states after `washout`.
pub fn run_sequence(
    weights: &ReservoirWeights,
    inputs: &DMatrix<f64>,
    washout: usize,
) -> Result<StateMatrix> {
    weights.check_inputs(inputs)?;
    check_washout(inputs, washout)?;
    let r = weights.reservoir_size();
    let kept = inputs.nrows() - washout;
    let mut states = DMatrix::zeros(kept, r);
    drive(weights, inputs, |t, x| {
        if t >= washout {
            let row = t - washout;
            for (j, v) in x.iter().enumerate() {
                states[(row, j)] = *v;
            }
        }
    });
    let pooled = states
        .column_iter()
        .map(|c| c.iter().sum::<f64>() / kept as f64)
        .collect();
    Ok(StateMatrix { states, pooled })
}

/// Time-mean of the post-washout states without materializing them.
pub fn pooled_state(
    weights: &ReservoirWeights,
    inputs: &DMatrix<f64>,
    washout: usize,
) -> Result<Vec<f64>> {
    weights.check_inputs(inputs)?;
    check_washout(inputs, washout)?;
    let mut sum = vec![0.0; weights.reservoir_size()];
    drive(weights, inputs, |t, x| {
        if t >= washout {
            sum.iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
    });
    let kept = (inputs.nrows() - washout) as f64;
    sum.iter_mut().for_each(|s| *s /= kept);
    Ok(sum)
}

const LANES: usize = 8;

/// [`pooled_state`] for several equal-length sequences at once. The
/// sequences are advanced in lockstep so each recurrent weight is loaded
/// once per step for all of them.
pub fn pooled_states_batch(
    weights: &ReservoirWeights,
    inputs: &[DMatrix<f64>],
    washout: usize,
) -> Result<Vec<Vec<f64>>> {
    let Some(first) = inputs.first() else {
        return Ok(Vec::new());
    };
    let steps = first.nrows();
    for seq in inputs {
        weights.check_inputs(seq)?;
        check_dim("batched sequence length", steps, seq.nrows())?;
    }
    check_washout(first, washout)?;
    let r = weights.reservoir_size();
    let nb = inputs.len();
    let groups = nb.div_ceil(LANES);
    let w = &weights.w_res;
    let w_in = weights.w_in.as_slice();
    // group-major, then neuron: x[g * r + k][lane]; padding lanes see zero
    // input and are discarded
    let mut x = vec![[0.0; LANES]; groups * r];
    let mut next = vec![[0.0; LANES]; groups * r];
    let mut sum = vec![[0.0; LANES]; groups * r];
    for t in 0..steps {
        for g in 0..groups {
            let src = &x[g * r..(g + 1) * r];
            let dst = &mut next[g * r..(g + 1) * r];
            for (k, acc) in dst.iter_mut().enumerate() {
                let (cols, vals) = w.row_slices(k);
                let mut a = [0.0; LANES];
                for (&j, &v) in cols.iter().zip(vals) {
                    let s = &src[j];
                    for l in 0..LANES {
                        a[l] += v * s[l];
                    }
                }
                *acc = a;
            }
        }
        for (b, seq) in inputs.iter().enumerate() {
            let (g, l) = (b / LANES, b % LANES);
            let dst = &mut next[g * r..(g + 1) * r];
            for (j, &uj) in seq.row(t).iter().enumerate() {
                if uj == 0.0 {
                    continue;
                }
                let col = &w_in[j * r..(j + 1) * r];
                for (d, wk) in dst.iter_mut().zip(col) {
                    d[l] += wk * uj;
                }
            }
        }
        for g in 0..groups {
            for (k, v) in next[g * r..(g + 1) * r].iter_mut().enumerate() {
                let (gain, bias) = (weights.gain[k], weights.bias[k]);
                v.iter_mut().for_each(|v| *v = (gain * *v + bias).tanh());
            }
        }
        std::mem::swap(&mut x, &mut next);
        if t >= washout {
            for (s, v) in sum.iter_mut().zip(&x) {
                for l in 0..LANES {
                    s[l] += v[l];
                }
            }
        }
    }
    let kept = (steps - washout) as f64;
    Ok((0..nb)
        .map(|b| {
            let (g, l) = (b / LANES, b % LANES);
            sum[g * r..(g + 1) * r].iter().map(|s| s[l] / kept).collect()
        })
        .collect())
}

/// Distance between the final states of two runs of the same input from
/// different random initial states. Small values mean the initial
/// condition has been washed out.
pub fn esp_divergence(weights: &ReservoirWeights, inputs: &DMatrix<f64>, seed: u64) -> Result<f64> {
    weights.check_inputs(inputs)?;
    if inputs.nrows() < 2 {
        return Err(Error::config("echo-state check needs at least 2 steps"));
    }
    let r = weights.reservoir_size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a: Vec<f64> = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut b: Vec<f64> = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut net = vec![0.0; r];
    let mut next = vec![0.0; r];
    let mut u = vec![0.0; inputs.ncols()];
    for t in 0..inputs.nrows() {
        u.iter_mut()
            .zip(inputs.row(t).iter())
            .for_each(|(d, s)| *d = *s);
        weights.step_into(&a, &u, &mut net, &mut next);
        std::mem::swap(&mut a, &mut next);
        weights.step_into(&b, &u, &mut net, &mut next);
        std::mem::swap(&mut b, &mut next);
    }
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_config(r: usize) -> ReservoirConfig {
        ReservoirConfig {
            reservoir_size: r,
            connectivity: 1.0,
            washout: 0,
            ..Default::default()
        }
    }

    fn scalar_weights(w_in: f64, w_res: f64) -> ReservoirWeights {
        let w_res = SparseMatrix::from_fn(1, 1, |_, _| Some(w_res));
        ReservoirWeights::new(DMatrix::from_element(1, 1, w_in), w_res, 0.85).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = ReservoirConfig {
            reservoir_size: 50,
            seed: 42,
            ..Default::default()
        };
        assert_eq!(init_reservoir(&cfg).unwrap(), init_reservoir(&cfg).unwrap());
        let other = ReservoirConfig { seed: 43, ..cfg };
        assert_ne!(init_reservoir(&cfg).unwrap(), init_reservoir(&other).unwrap());
    }

    #[test]
    fn init_distributions() {
        let cfg = ReservoirConfig {
            reservoir_size: 200,
            input_dim: 3,
            input_scaling: 0.5,
            seed: 1,
            ..Default::default()
        };
        let w = init_reservoir(&cfg).unwrap();
        assert!(w.w_in.iter().all(|v| v.abs() <= 0.5));
        let density = w.w_res.nnz() as f64 / (200.0 * 200.0);
        assert!((density - 0.1).abs() < 0.01, "density {density}");
        assert!(w.gain.iter().all(|&a| a == 1.0));
        assert!(w.bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn full_connectivity_fills_the_matrix() {
        let w = init_reservoir(&small_config(4)).unwrap();
        assert_eq!(w.w_res.nnz(), 16);
    }

    #[test]
    fn rejects_bad_configs() {
        for cfg in [
            ReservoirConfig { spectral_radius: 0.0, ..small_config(4) },
            ReservoirConfig { spectral_radius: f64::NAN, ..small_config(4) },
            ReservoirConfig { spectral_radius: -1.0, ..small_config(4) },
            ReservoirConfig { reservoir_size: 0, ..small_config(4) },
            ReservoirConfig { connectivity: 0.0, ..small_config(4) },
        ] {
            assert!(matches!(init_reservoir(&cfg), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let w = scalar_weights(0.0, 0.0);
        assert_eq!(update_state(&w, &[0.3], &[0.7]).unwrap(), vec![0.0]);
    }

    #[test]
    fn scalar_update() {
        let w = scalar_weights(1.0, 0.0);
        let x = update_state(&w, &[0.0], &[0.5]).unwrap();
        assert_relative_eq!(x[0], 0.462117, epsilon = 1e-6);
    }

    #[test]
    fn gain_and_bias_update() {
        let mut w = scalar_weights(1.0, 0.0);
        w.gain = vec![2.0];
        w.bias = vec![0.1];
        let x = update_state_ip(&w, &[0.0], &[0.5]).unwrap();
        assert_relative_eq!(x[0], 1.1_f64.tanh(), epsilon = 1e-15);
        assert_relative_eq!(x[0], 0.800499, epsilon = 1e-6);

        w.gain = vec![0.0];
        let x = update_state_ip(&w, &[0.9], &[0.5]).unwrap();
        assert_eq!(x[0], 0.1_f64.tanh());
    }

    #[test]
    fn dimension_mismatch() {
        let w = init_reservoir(&small_config(4)).unwrap();
        assert!(matches!(
            update_state(&w, &[0.0; 3], &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            update_state_ip(&w, &[0.0; 4], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn run_sequence_shapes() {
        let cfg = ReservoirConfig {
            reservoir_size: 20,
            ..Default::default()
        };
        let w = init_reservoir(&cfg).unwrap();
        let inputs = DMatrix::from_fn(500, 1, |t, _| (t as f64 * 0.1).sin());
        let s = run_sequence(&w, &inputs, 100).unwrap();
        assert_eq!(s.states.shape(), (400, 20));
        for j in 0..20 {
            let mean = s.states.column(j).mean();
            assert!((mean - s.pooled[j]).abs() <= 1e-12);
        }
        let pooled = pooled_state(&w, &inputs, 100).unwrap();
        for (a, b) in pooled.iter().zip(&s.pooled) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn single_step_run_matches_update() {
        let w = init_reservoir(&ReservoirConfig {
            reservoir_size: 10,
            input_dim: 2,
            ..Default::default()
        })
        .unwrap();
        let inputs = DMatrix::from_row_slice(1, 2, &[0.3, -0.2]);
        let s = run_sequence(&w, &inputs, 0).unwrap();
        let x = update_state_ip(&w, &[0.0; 10], &[0.3, -0.2]).unwrap();
        assert_eq!(s.states.row(0).iter().copied().collect::<Vec<_>>(), x);
    }

    #[test]
    fn washout_must_be_shorter_than_sequence() {
        let w = init_reservoir(&small_config(4)).unwrap();
        let inputs = DMatrix::zeros(10, 1);
        assert!(run_sequence(&w, &inputs, 10).is_err());
        assert!(pooled_state(&w, &inputs, 12).is_err());
    }

    #[test]
    fn esp_without_recurrence_collapses_immediately() {
        let w = scalar_weights(0.8, 0.0);
        let inputs = DMatrix::from_column_slice(2, 1, &[0.3, 0.1]);
        assert_eq!(esp_divergence(&w, &inputs, 3).unwrap(), 0.0);
        assert!(esp_divergence(&w, &DMatrix::zeros(1, 1), 3).is_err());
    }

    #[test]
    fn batched_pooling_matches_single_runs() {
        let cfg = ReservoirConfig {
            reservoir_size: 40,
            input_dim: 2,
            washout: 5,
            ..ReservoirConfig::default()
        };
        let mut w = init_reservoir(&cfg).unwrap();
        w.gain.iter_mut().enumerate().for_each(|(i, g)| *g = 0.5 + i as f64 / 40.0);
        w.bias.iter_mut().enumerate().for_each(|(i, b)| *b = (i as f64).sin() * 0.1);
        let seqs: Vec<DMatrix<f64>> = (0..3)
            .map(|s| DMatrix::from_fn(30, 2, |t, j| ((t * (s + 1) + j) as f64 * 0.37).cos()))
            .collect();
        let batch = pooled_states_batch(&w, &seqs, 5).unwrap();
        for (seq, pooled) in seqs.iter().zip(&batch) {
            let single = pooled_state(&w, seq, 5).unwrap();
            for (a, b) in single.iter().zip(pooled) {
                assert!((a - b).abs() < 1e-13);
            }
        }
        let short = DMatrix::zeros(29, 2);
        assert!(pooled_states_batch(&w, &[seqs[0].clone(), short], 5).is_err());
        assert!(pooled_states_batch(&w, &[], 5).unwrap().is_empty());
    }
}
