//! Reference implementations that the tests check the library against.
//! They favour the most direct formulation over speed and share no code
//! with the library beyond its data types.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use esn_plasticity::dataset::{LabeledDataset, Split};
use esn_plasticity::sparse::SparseMatrix;

/// Tiny deterministic generator so the oracles need no RNG crate.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407))
    }

    /// Uniform on [-1, 1).
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }
}

fn csr_mul(a: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| a.row(i).map(|(j, v)| v * x[j]).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Spectral radius by power iteration that also handles a dominant complex
/// pair: each iterate triple `(v, Av, A^2 v)` is fitted by `A^2 v + p Av + q v = 0`
/// and the largest root of `z^2 + p z + q` is taken.
pub fn power_iteration_radius(a: &SparseMatrix, max_iter: usize) -> f64 {
    let n = a.nrows();
    let mut rng = Lcg::new(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let mut last = f64::NAN;
    let mut stable = 0;
    for _ in 0..max_iter {
        let av = csr_mul(a, &v);
        let aav = csr_mul(a, &av);
        let (g11, g12, g22) = (dot(&av, &av), dot(&av, &v), dot(&v, &v));
        let det = g11 * g22 - g12 * g12;
        let est = if g11 == 0.0 {
            0.0
        } else if det <= 1e-10 * g11 * g22 {
            // v is (numerically) an eigenvector
            (dot(&aav, &av) / g11).abs()
        } else {
            // least squares for (p, q): [g11 g12; g12 g22] [p; q] = -[av.aav; v.aav]
            let (r1, r2) = (-dot(&av, &aav), -dot(&v, &aav));
            let p = (r1 * g22 - g12 * r2) / det;
            let q = (g11 * r2 - g12 * r1) / det;
            let disc = p * p - 4.0 * q;
            if disc >= 0.0 {
                let s = disc.sqrt();
                ((-p + s) / 2.0).abs().max(((-p - s) / 2.0).abs())
            } else {
                q.abs().sqrt()
            }
        };
        if (est - last).abs() <= 1e-13 * est.max(1e-300) {
            stable += 1;
            if stable >= 25 {
                return est;
            }
        } else {
            stable = 0;
        }
        last = est;
        let norm = g11.sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = av.into_iter().map(|x| x / norm).collect();
    }
    last
}

/// Dense ridge readout from the normal equations, solved by LU:
/// `W = ((X^T X + ridge I)^-1 X^T Y)^T`.
pub fn normal_equations_readout(x: &DMatrix<f64>, y: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let r = x.ncols();
    let mut gram = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            gram[(i, j)] = (0..x.nrows()).map(|t| x[(t, i)] * x[(t, j)]).sum();
        }
        gram[(i, i)] += ridge;
    }
    let rhs = x.transpose() * y;
    gram.lu().solve(&rhs).expect("nonsingular normal equations").transpose()
}

/// Inverse of the periodized filter-bank DWT, written as the transpose of
/// the analysis operator. `coeffs` is `[D1, ..., DL, AL]`.
pub fn inverse_dwt(coeffs: &[Vec<f64>], low: &[f64]) -> Vec<f64> {
    let taps = low.len();
    let high: Vec<f64> = (0..taps)
        .map(|n| if n % 2 == 0 { 1.0 } else { -1.0 } * low[taps - 1 - n])
        .collect();
    let levels = coeffs.len() - 1;
    let mut approx = coeffs[levels].clone();
    for level in (0..levels).rev() {
        let detail = &coeffs[level];
        let n = 2 * approx.len();
        let mut x = vec![0.0; n];
        for k in 0..approx.len() {
            for m in 0..taps {
                let i = (2 * k + m) % n;
                x[i] += low[m] * approx[k] + high[m] * detail[k];
            }
        }
        approx = x;
    }
    approx
}

/// Direct periodized analysis at one level, written independently of the
/// library for frequency-selectivity checks.
pub fn reference_level_energies(signal: &[f64], low: &[f64], levels: usize) -> Vec<f64> {
    let taps = low.len();
    let high: Vec<f64> = (0..taps)
        .map(|n| if n % 2 == 0 { 1.0 } else { -1.0 } * low[taps - 1 - n])
        .collect();
    let mut approx = signal.to_vec();
    let mut out = Vec::new();
    for _ in 0..levels {
        let n = approx.len();
        let mut a = vec![0.0; n / 2];
        let mut d = vec![0.0; n / 2];
        for k in 0..n / 2 {
            for m in 0..taps {
                a[k] += low[m] * approx[(2 * k + m) % n];
                d[k] += high[m] * approx[(2 * k + m) % n];
            }
        }
        out.push(d.iter().map(|v| v * v).sum());
        approx = a;
    }
    out.push(approx.iter().map(|v| v * v).sum());
    out
}

/// Leading eigenpair of a symmetric 2x2 matrix `[[a, b], [b, c]]`.
pub fn principal_axis_2x2(a: f64, b: f64, c: f64) -> (f64, [f64; 2]) {
    let mean = (a + c) / 2.0;
    let radius = (((a - c) / 2.0).powi(2) + b * b).sqrt();
    let lambda = mean + radius;
    let v = if b.abs() > 1e-300 {
        [lambda - c, b]
    } else if a >= c {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    (lambda, [v[0] / n, v[1] / n])
}

/// Scalar-loop reservoir update `tanh(a * (W_in u + W_res x) + b)` on
/// dense row-major weights.
pub fn scalar_step(
    w_in: &[Vec<f64>],
    w_res: &[Vec<f64>],
    gain: &[f64],
    bias: &[f64],
    x: &[f64],
    u: &[f64],
) -> Vec<f64> {
    (0..w_res.len())
        .map(|i| {
            let mut net = 0.0;
            for j in 0..x.len() {
                net += w_res[i][j] * x[j];
            }
            for j in 0..u.len() {
                net += w_in[i][j] * u[j];
            }
            (gain[i] * net + bias[i]).tanh()
        })
        .collect()
}

/// Table I of the valence/arousal/dominance octants, keyed by level code.
pub const OCTANT_TABLE: [(&str, &str); 8] = [
    ("HVLALD", "protected"),
    ("HVLAHD", "satisfied"),
    ("HVHALD", "surprised"),
    ("HVHAHD", "happy"),
    ("LVLALD", "sad"),
    ("LVLAHD", "unconcerned"),
    ("LVHALD", "frightened"),
    ("LVHAHD", "angry"),
];

pub fn octant_name(v: f64, a: f64, d: f64, threshold: f64) -> &'static str {
    let code = format!(
        "{}V{}A{}D",
        if v >= threshold { "H" } else { "L" },
        if a >= threshold { "H" } else { "L" },
        if d >= threshold { "H" } else { "L" }
    );
    OCTANT_TABLE
        .iter()
        .find(|(c, _)| *c == code)
        .map(|(_, name)| *name)
        .expect("every code is in the table")
}

pub fn stress_calm_name(v: f64, a: f64) -> Option<&'static str> {
    if v <= 3.0 && a >= 5.0 {
        Some("stress")
    } else if (4.0..=6.0).contains(&v) && a < 4.0 {
        Some("calm")
    } else {
        None
    }
}

/// Log band powers from an FFT periodogram, 4 octave bands per channel
/// (`[4, 8)`, `[8, 16)`, `[16, 32)`, `[32, 64)` Hz), plus a constant 1.
fn fft_band_features(channels: &[Vec<f64>], fs: f64) -> Vec<f64> {
    let mut planner = FftPlanner::<f64>::new();
    let mut out = vec![1.0];
    for x in channels {
        let n = x.len();
        let fft = planner.plan_fft_forward(n);
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft.process(&mut buf);
        for (lo, hi) in [(4.0, 8.0), (8.0, 16.0), (16.0, 32.0), (32.0, 64.0)] {
            let p: f64 = (1..n / 2)
                .filter(|&k| {
                    let f = k as f64 * fs / n as f64;
                    f >= lo && f < hi
                })
                .map(|k| buf[k].norm_sqr())
                .sum();
            out.push((p / n as f64 + 1e-12).ln());
        }
    }
    out
}

/// Test accuracy of a least-squares linear classifier on FFT band powers,
/// trained and scored on the same split as the system under test.
pub fn band_power_oracle_accuracy(data: &LabeledDataset, split: &Split) -> f64 {
    let feats: Vec<Vec<f64>> = data
        .trials
        .iter()
        .map(|t| {
            let chans: Vec<Vec<f64>> = (0..t.trial.channels()).map(|c| t.trial.channel_f64(c)).collect();
            fft_band_features(&chans, data.sample_rate_hz)
        })
        .collect();
    let d = feats[0].len();
    let o = data.num_classes();
    let x = DMatrix::from_fn(split.train.len(), d, |i, j| feats[split.train[i]][j]);
    let y = DMatrix::from_fn(split.train.len(), o, |i, k| {
        f64::from(data.trials[split.train[i]].label == k)
    });
    let w = normal_equations_readout(&x, &y, 1e-8);
    let correct = split
        .test
        .iter()
        .filter(|&&i| {
            let scores = &w * DVector::from_column_slice(&feats[i]);
            let mut best = 0;
            for k in 1..o {
                if scores[k] > scores[best] {
                    best = k;
                }
            }
            best == data.trials[i].label
        })
        .count();
    correct as f64 / split.test.len() as f64
}
