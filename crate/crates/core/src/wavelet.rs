//! Periodized Daubechies-5 discrete wavelet transform (Mallat filter bank).

use crate::error::{Error, Result};

/// Daubechies-5 scaling (low-pass analysis) filter, 10 taps.
#[allow(clippy::excessive_precision)]
pub const DB5_LOW: [f64; 10] = [
    0.003_335_725_285_473_771_3,
    -0.012_580_751_999_081_999,
    -0.006_241_490_212_798_274_3,
    0.077_571_493_840_045_714,
    -0.032_244_869_584_638_375,
    -0.242_294_887_066_382_03,
    0.138_428_145_901_320_73,
    0.724_308_528_437_772_93,
    0.603_829_269_797_189_67,
    0.160_102_397_974_192_91,
];

/// Quadrature-mirror high-pass analysis filter: `g[n] = (-1)^n h[L-1-n]`.
pub fn db5_high() -> [f64; 10] {
    let mut g = [0.0; 10];
    for (n, gn) in g.iter_mut().enumerate() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        *gn = sign * DB5_LOW[DB5_LOW.len() - 1 - n];
    }
    g
}

/// One analysis stage: periodized convolution with `low` and `high`
/// followed by downsampling by two.
fn analysis_step(x: &[f64], low: &[f64], high: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for (m, (&h, &g)) in low.iter().zip(high).enumerate() {
            let v = x[(2 * k + m) % n];
            a += h * v;
            d += g * v;
        }
        approx[k] = a;
        detail[k] = d;
    }
    (approx, detail)
}

/// Decomposes `signal` into `[D1, ..., D_levels, A_levels]`.
///
/// Signals whose length is not a multiple of `2^levels` are extended
/// periodically on the right up to the next multiple.
pub fn dwt_decompose(signal: &[f64], levels: usize) -> Result<Vec<Vec<f64>>> {
    if levels == 0 {
        return Err(Error::config("decomposition needs at least one level"));
    }
    let block = 1usize
        .checked_shl(levels as u32)
        .ok_or_else(|| Error::config(format!("{levels} levels is too deep")))?;
    if signal.len() < block {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            levels,
        });
    }
    let padded_len = signal.len().div_ceil(block) * block;
    let mut approx: Vec<f64> = (0..padded_len).map(|i| signal[i % signal.len()]).collect();
    let high = db5_high();
    let mut out = Vec::with_capacity(levels + 1);
    for _ in 0..levels {
        let (a, d) = analysis_step(&approx, &DB5_LOW, &high);
        out.push(d);
        approx = a;
    }
    out.push(approx);
    Ok(out)
}

/// Energy (sum of squares) of each coefficient vector from [`dwt_decompose`].
pub fn level_energies(signal: &[f64], levels: usize) -> Result<Vec<f64>> {
    Ok(dwt_decompose(signal, levels)?
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_identities() {
        let sum: f64 = DB5_LOW.iter().sum();
        assert!((sum - std::f64::consts::SQRT_2).abs() < 1e-12);
        for shift in 0..5 {
            let dot: f64 = (0..10 - 2 * shift)
                .map(|n| DB5_LOW[n] * DB5_LOW[n + 2 * shift])
                .sum();
            let expected = if shift == 0 { 1.0 } else { 0.0 };
            assert!((dot - expected).abs() < 1e-12, "shift {shift}: {dot}");
        }
        let g = db5_high();
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
        let cross: f64 = DB5_LOW.iter().zip(&g).map(|(h, g)| h * g).sum();
        assert!(cross.abs() < 1e-12);
    }

    #[test]
    fn coefficient_sizes() {
        let coeffs = dwt_decompose(&vec![0.5; 8064], 5).unwrap();
        let sizes: Vec<usize> = coeffs.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4032, 2016, 1008, 504, 252, 252]);
    }

    #[test]
    fn constant_signal_lives_in_the_approximation() {
        let signal = vec![3.0; 1024];
        let coeffs = dwt_decompose(&signal, 5).unwrap();
        for d in &coeffs[..5] {
            assert!(d.iter().all(|c| c.abs() < 1e-10));
        }
        let energy: f64 = coeffs[5].iter().map(|c| c * c).sum();
        assert!((energy - 9.0 * 1024.0).abs() < 1e-8);
    }

    #[test]
    fn short_signal_is_rejected() {
        assert!(matches!(
            dwt_decompose(&[1.0; 31], 5),
            Err(Error::SignalTooShort { len: 31, levels: 5 })
        ));
    }

    #[test]
    fn odd_lengths_are_padded() {
        let signal: Vec<f64> = (0..100).map(|i| (i as f64 * 0.3).sin()).collect();
        let coeffs = dwt_decompose(&signal, 3).unwrap();
        assert_eq!(coeffs[0].len(), 52);
        assert_eq!(coeffs[3].len(), 13);
    }
}
