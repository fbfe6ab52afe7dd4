use esn_plasticity::reservoir::*;
use esn_plasticity::sparse::SparseMatrix;
use esn_plasticity::spectral::rescale_spectral_radius;
use esn_testkit::{power_iteration_radius, scalar_step, Lcg};
use nalgebra::DMatrix;

#[test]
fn fully_connected_tiny_reservoir() {
    let cfg = ReservoirConfig {
        reservoir_size: 4,
        connectivity: 1.0,
        seed: 3,
        ..ReservoirConfig::default()
    };
    let w = init_reservoir(&cfg).unwrap();
    assert_eq!(w.w_res.nnz(), 16);
    assert!((power_iteration_radius(&w.w_res, 100_000) - 0.85).abs() < 1e-6);
}

#[test]
fn default_radius_matches_oracle() {
    for (r, seed) in [(100, 1), (300, 2)] {
        let cfg = ReservoirConfig {
            reservoir_size: r,
            seed,
            ..ReservoirConfig::default()
        };
        let w = init_reservoir(&cfg).unwrap();
        let rho = power_iteration_radius(&w.w_res, 100_000);
        assert!((rho - 0.85).abs() < 1e-6, "R={r}: {rho}");
    }
}

#[test]
fn rescaled_random_matrix_matches_oracle() {
    let mut rng = Lcg::new(11);
    let dense = DMatrix::from_fn(100, 100, |_, _| rng.next_f64());
    let m = rescale_spectral_radius(&SparseMatrix::from_dense(&dense), 0.85).unwrap();
    assert!((power_iteration_radius(&m, 100_000) - 0.85).abs() < 1e-6);
}

#[test]
fn run_matches_scalar_loop() {
    let cfg = ReservoirConfig {
        reservoir_size: 30,
        input_dim: 3,
        connectivity: 0.3,
        washout: 0,
        seed: 9,
        ..ReservoirConfig::default()
    };
    let mut w = init_reservoir(&cfg).unwrap();
    for i in 0..30 {
        w.gain[i] = 0.7 + 0.02 * i as f64;
        w.bias[i] = 0.05 * (i as f64).cos();
    }
    let mut rng = Lcg::new(5);
    let inputs = DMatrix::from_fn(50, 3, |_, _| rng.next_f64());
    let run = run_sequence(&w, &inputs, 0).unwrap();

    let dense_res = w.w_res.to_dense();
    let w_res: Vec<Vec<f64>> = (0..30).map(|i| dense_res.row(i).iter().copied().collect()).collect();
    let w_in: Vec<Vec<f64>> = (0..30).map(|i| w.w_in.row(i).iter().copied().collect()).collect();
    let mut x = vec![0.0; 30];
    for t in 0..50 {
        let u: Vec<f64> = inputs.row(t).iter().copied().collect();
        x = scalar_step(&w_in, &w_res, &w.gain, &w.bias, &x, &u);
        for j in 0..30 {
            assert!((run.states[(t, j)] - x[j]).abs() < 1e-12, "t={t} j={j}");
        }
    }
}

#[test]
fn echo_state_washout_on_five_seeds() {
    for seed in 0..5 {
        let cfg = ReservoirConfig {
            reservoir_size: 300,
            seed,
            ..ReservoirConfig::default()
        };
        let w = init_reservoir(&cfg).unwrap();
        let mut rng = Lcg::new(seed + 100);
        let inputs = DMatrix::from_fn(1000, 1, |_, _| rng.next_f64());
        let d = esp_divergence(&w, &inputs, seed).unwrap();
        assert!(d < 1e-6, "seed {seed}: {d}");
    }
}

#[test]
fn states_stay_inside_the_open_interval() {
    let cfg = ReservoirConfig {
        reservoir_size: 80,
        seed: 4,
        ..ReservoirConfig::default()
    };
    let w = init_reservoir(&cfg).unwrap();
    let mut rng = Lcg::new(1);
    let inputs = DMatrix::from_fn(400, 1, |_, _| 3.0 * rng.next_f64());
    let run = run_sequence(&w, &inputs, 100).unwrap();
    assert_eq!(run.states.nrows(), 300);
    assert!(run.states.iter().all(|v| v.abs() < 1.0));
}
