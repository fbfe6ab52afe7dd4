use esn_plasticity::features::BandTable;
use esn_plasticity::wavelet::{dwt_decompose, level_energies, DB5_LOW};
use esn_testkit::{inverse_dwt, reference_level_energies, Lcg};

fn random_signal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Lcg::new(seed);
    (0..n).map(|_| rng.next_f64() * 10.0).collect()
}

#[test]
fn energy_is_conserved() {
    for seed in 0..3 {
        let x = random_signal(8064, seed);
        let e: f64 = x.iter().map(|v| v * v).sum();
        let total: f64 = level_energies(&x, 5).unwrap().iter().sum();
        assert!((total - e).abs() / e < 1e-9);
    }
}

#[test]
fn inverse_oracle_reconstructs() {
    for seed in 0..3 {
        let x = random_signal(8064, seed);
        let coeffs = dwt_decompose(&x, 5).unwrap();
        let back = inverse_dwt(&coeffs, &DB5_LOW);
        let err: f64 = x.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm < 1e-9);
    }
}

#[test]
fn matches_reference_filter_bank() {
    let x = random_signal(1024, 9);
    let ours = level_energies(&x, 5).unwrap();
    let reference = reference_level_energies(&x, &DB5_LOW, 5);
    for (a, b) in ours.iter().zip(&reference) {
        assert!((a - b).abs() <= 1e-9 * b.abs());
    }
}

fn dominant_fraction(freq: f64, fs: f64, level: usize) -> f64 {
    let x: Vec<f64> = (0..8192)
        .map(|t| (std::f64::consts::TAU * freq * t as f64 / fs + 0.3).sin())
        .collect();
    let e = reference_level_energies(&x, &DB5_LOW, 5);
    e[level - 1] / e.iter().sum::<f64>()
}

#[test]
fn band_centres_land_on_their_levels_when_the_table_matches_the_rate() {
    // the fixed table at 256 Hz
    for (band, centre) in BandTable::table_iii().bands.iter().zip([48.0, 24.0, 12.0, 6.0]) {
        let f = dominant_fraction(centre, 256.0, band.level);
        assert!(f >= 0.8, "{} at 256 Hz: {f}", band.name);
    }
    // the rate-adapted table at 128 Hz
    for (band, centre) in BandTable::for_sample_rate(128.0).unwrap().bands.iter().zip([48.0, 24.0, 12.0, 6.0]) {
        let f = dominant_fraction(centre, 128.0, band.level);
        assert!(f >= 0.8, "{} at 128 Hz: {f}", band.name);
    }
    // a 10 Hz tone at 128 Hz sits in the 8-16 Hz detail level
    assert!(dominant_fraction(10.0, 128.0, 3) >= 0.8);
}
