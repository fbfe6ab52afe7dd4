//! Linear readout: offline ridge regression, online delta rule, and the
//! hybrid of the two; winner-take-all decoding and majority voting.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutWeights {
    /// O x R
    pub w_out: DMatrix<f64>,
    pub class_names: Vec<String>,
}

impl ReadoutWeights {
    pub fn zeros(class_names: Vec<String>, reservoir_size: usize) -> Self {
        Self {
            w_out: DMatrix::zeros(class_names.len(), reservoir_size),
            class_names,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.w_out.nrows()
    }

    pub fn reservoir_size(&self) -> usize {
        self.w_out.ncols()
    }

    /// Linear class scores `W_out x`.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("readout input", self.reservoir_size(), x.len())?;
        Ok((&self.w_out * DVector::from_column_slice(x))
            .iter()
            .copied()
            .collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        winner_take_all(&self.scores(x)?)
    }

    fn check_finite(&self, context: &'static str) -> Result<()> {
        if self.w_out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context,
                detail: "readout weights diverged; lower the learning rate".into(),
            })
        }
    }
}

/// State design matrix and one-hot targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDesign {
    /// n x R, one pooled state per row
    pub states: DMatrix<f64>,
    /// n x O, one-hot rows
    pub targets: DMatrix<f64>,
    pub ridge: f64,
    pub class_names: Vec<String>,
}

impl TrainingDesign {
    /// Builds the design from pooled states and class labels.
    pub fn from_labeled(
        rows: &[Vec<f64>],
        labels: &[usize],
        class_names: Vec<String>,
        ridge: f64,
    ) -> Result<Self> {
        check_dim("design labels", rows.len(), labels.len())?;
        let Some(first) = rows.first() else {
            return Err(Error::Empty("training design"));
        };
        let r = first.len();
        let o = class_names.len();
        for row in rows {
            check_dim("design row", r, row.len())?;
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= o) {
            return Err(Error::config(format!(
                "label {bad} out of range for {o} classes"
            )));
        }
        let states = DMatrix::from_fn(rows.len(), r, |i, j| rows[i][j]);
        let targets = DMatrix::from_fn(rows.len(), o, |i, k| f64::from(labels[i] == k));
        Ok(Self {
            states,
            targets,
            ridge,
            class_names,
        })
    }

    fn validate(&self) -> Result<()> {
        check_dim("design targets rows", self.states.nrows(), self.targets.nrows())?;
        check_dim("design class names", self.targets.ncols(), self.class_names.len())?;
        if self.states.nrows() == 0 {
            return Err(Error::Empty("training design"));
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(Error::config(format!(
                "ridge must be nonnegative, got {}",
                self.ridge
            )));
        }
        if self.states.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "training design",
                detail: "state matrix has non-finite entries".into(),
            });
        }
        Ok(())
    }
}

/// Ridge regression `W_out = Y^T X (X^T X + ridge I)^-1`.
///
/// With fewer rows than reservoir units and a positive ridge, the
/// equivalent dual form `Y^T (X X^T + ridge I)^-1 X` is solved instead.
pub fn train_offline(design: &TrainingDesign) -> Result<ReadoutWeights> {
    design.validate()?;
    let x = &design.states;
    let y = &design.targets;
    let (n, r) = x.shape();
    let o = y.ncols();
    if n < o {
        return Err(Error::config(format!(
            "{n} training rows cannot fit {o} output classes"
        )));
    }
    let ridge = design.ridge;
    let w_out = if n < r && ridge > 0.0 {
        let mut gram = x * x.transpose();
        gram.iter_mut().step_by(n + 1).for_each(|d| *d += ridge);
        let alpha = solve_spd(gram, y.clone(), ridge)?; // n x O
        alpha.transpose() * x
    } else {
        let mut gram = x.transpose() * x;
        gram.iter_mut().step_by(r + 1).for_each(|d| *d += ridge);
        let rhs = x.transpose() * y; // R x O
        solve_spd(gram, rhs, ridge)?.transpose()
    };
    let out = ReadoutWeights {
        w_out,
        class_names: design.class_names.clone(),
    };
    out.check_finite("offline training")?;
    Ok(out)
}

fn solve_spd(a: DMatrix<f64>, b: DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let scale = a.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if let Some(chol) = a.clone().cholesky() {
        let d = chol.l_dirty().diagonal();
        let min = d.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        // a pivot this small means the Gram matrix is numerically singular
        if min * min > scale * 1e-14 || ridge > 0.0 {
            return Ok(chol.solve(&b));
        }
    }
    Err(Error::Singular { ridge })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnlineOptions {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Reshuffle the presentation order each epoch.
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for OnlineOptions {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 100,
            shuffle: false,
            seed: 0,
        }
    }
}

/// Delta-rule refinement: for each sample, `W += eta (d - W x) x^T`.
pub fn train_online(
    initial: &ReadoutWeights,
    states: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    opts: &OnlineOptions,
) -> Result<ReadoutWeights> {
    check_dim("online states columns", initial.reservoir_size(), states.ncols())?;
    check_dim("online targets columns", initial.num_classes(), targets.ncols())?;
    check_dim("online targets rows", states.nrows(), targets.nrows())?;
    if !(opts.learning_rate.is_finite() && opts.learning_rate >= 0.0) {
        return Err(Error::config(format!(
            "learning rate must be nonnegative, got {}",
            opts.learning_rate
        )));
    }
    let mut w = initial.clone();
    let (n, r) = states.shape();
    let o = targets.ncols();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = vec![0.0; r];
    let mut err = vec![0.0; o];
    for epoch in 0..opts.epochs {
        if opts.shuffle {
            order.shuffle(&mut rng);
        }
        for &i in &order {
            x.iter_mut()
                .zip(states.row(i).iter())
                .for_each(|(d, s)| *d = *s);
            for k in 0..o {
                let yk: f64 = (0..r).map(|j| w.w_out[(k, j)] * x[j]).sum();
                err[k] = opts.learning_rate * (targets[(i, k)] - yk);
            }
            for j in 0..r {
                for k in 0..o {
                    w.w_out[(k, j)] += err[k] * x[j];
                }
            }
        }
        if w.check_finite("online training").is_err() {
            return Err(Error::NonFinite {
                context: "online training",
                detail: format!(
                    "readout diverged in epoch {epoch} with learning rate {}",
                    opts.learning_rate
                ),
            });
        }
    }
    Ok(w)
}

/// Offline solution used as the starting point of delta-rule training.
pub fn train_hybrid(design: &TrainingDesign, opts: &OnlineOptions) -> Result<ReadoutWeights> {
    let offline = train_offline(design)?;
    train_online(&offline, &design.states, &design.targets, opts)
}

/// Index of the highest score; ties go to the lowest index.
pub fn winner_take_all(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::Empty("output vector"));
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            return Err(Error::NonFinite {
                context: "winner_take_all",
                detail: format!("score {i} is NaN"),
            });
        }
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Most frequent label; ties go to the lowest class index.
pub fn majority_vote(labels: &[usize]) -> Result<usize> {
    let Some(&max) = labels.iter().max() else {
        return Err(Error::Empty("vote list"));
    };
    let mut counts = vec![0usize; max + 1];
    for &l in labels {
        counts[l] += 1;
    }
    winner_take_all(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn names(o: usize) -> Vec<String> {
        (0..o).map(|k| format!("c{k}")).collect()
    }

    #[test]
    fn identity_design_interpolates() {
        let design = TrainingDesign {
            states: DMatrix::identity(2, 2),
            targets: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            ridge: 0.0,
            class_names: names(2),
        };
        let w = train_offline(&design).unwrap();
        assert_eq!(w.w_out, design.targets.transpose());
    }

    #[test]
    fn ridge_shrinks_weights() {
        let states = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, 0.3, 1.0, 0.5, 0.5]);
        let targets = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let fit = |ridge| {
            train_offline(&TrainingDesign {
                states: states.clone(),
                targets: targets.clone(),
                ridge,
                class_names: names(2),
            })
            .unwrap()
            .w_out
            .norm()
        };
        assert!(fit(1.0) < fit(0.0));
    }

    #[test]
    fn singular_without_ridge_is_an_error() {
        let design = TrainingDesign {
            states: DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]),
            targets: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]),
            ridge: 0.0,
            class_names: names(2),
        };
        assert!(matches!(train_offline(&design), Err(Error::Singular { .. })));
        let ridged = TrainingDesign { ridge: 1e-3, ..design };
        assert!(train_offline(&ridged).is_ok());
    }

    #[test]
    fn dual_form_matches_primal() {
        let states = DMatrix::from_fn(4, 9, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * j as f64);
        let targets = DMatrix::from_fn(4, 2, |i, k| f64::from(i % 2 == k));
        let design = TrainingDesign {
            states: states.clone(),
            targets: targets.clone(),
            ridge: 0.5,
            class_names: names(2),
        };
        let dual = train_offline(&design).unwrap().w_out;
        let mut gram = states.transpose() * &states;
        for i in 0..9 {
            gram[(i, i)] += 0.5;
        }
        let primal = (gram.try_inverse().unwrap() * states.transpose() * targets).transpose();
        assert!((dual - primal).norm() < 1e-10);
    }

    #[test]
    fn delta_rule_example() {
        let w = ReadoutWeights::zeros(names(1), 2);
        let states = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let targets = DMatrix::from_element(1, 1, 1.0);
        let opts = OnlineOptions {
            learning_rate: 0.1,
            epochs: 1,
            ..Default::default()
        };
        let out = train_online(&w, &states, &targets, &opts).unwrap();
        assert_relative_eq!(out.w_out[(0, 0)], 0.1);
        assert_relative_eq!(out.w_out[(0, 1)], 0.2);
    }

    #[test]
    fn delta_rule_is_stationary_at_zero_error() {
        let w = ReadoutWeights {
            w_out: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            class_names: names(2),
        };
        let states = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let out = train_online(&w, &states, &states, &OnlineOptions::default()).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let w = ReadoutWeights {
            w_out: DMatrix::from_row_slice(2, 3, &[0.3, -0.1, 0.2, 0.5, 0.4, -0.7]),
            class_names: names(2),
        };
        let states = DMatrix::from_fn(5, 3, |i, j| (i + j) as f64 * 0.1);
        let targets = DMatrix::from_fn(5, 2, |i, k| f64::from(i % 2 == k));
        let opts = OnlineOptions {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert_eq!(train_online(&w, &states, &targets, &opts).unwrap(), w);
    }

    #[test]
    fn hybrid_degenerates_to_offline() {
        let design = TrainingDesign {
            states: DMatrix::from_fn(6, 3, |i, j| ((i * 5 + j * 2) % 7) as f64 * 0.1 - 0.3),
            targets: DMatrix::from_fn(6, 2, |i, k| f64::from(i % 2 == k)),
            ridge: 1e-3,
            class_names: names(2),
        };
        let offline = train_offline(&design).unwrap();
        for opts in [
            OnlineOptions { epochs: 0, ..Default::default() },
            OnlineOptions { learning_rate: 0.0, ..Default::default() },
        ] {
            assert_eq!(train_hybrid(&design, &opts).unwrap(), offline);
        }
    }

    #[test]
    fn online_divergence_is_reported() {
        let w = ReadoutWeights::zeros(names(2), 2);
        let states = DMatrix::from_row_slice(2, 2, &[10.0, 3.0, -4.0, 8.0]);
        let targets = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let opts = OnlineOptions {
            learning_rate: 10.0,
            epochs: 500,
            ..Default::default()
        };
        assert!(matches!(
            train_online(&w, &states, &targets, &opts),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn wta_examples() {
        assert_eq!(winner_take_all(&[0.2, 0.9, 0.1]).unwrap(), 1);
        assert_eq!(winner_take_all(&[0.5, 0.5]).unwrap(), 0);
        assert_eq!(winner_take_all(&[-0.3]).unwrap(), 0);
        assert!(winner_take_all(&[]).is_err());
    }

    #[test]
    fn vote_examples() {
        assert_eq!(majority_vote(&[0, 0, 1]).unwrap(), 0);
        let mut votes = vec![0; 17];
        votes.extend(vec![1; 15]);
        assert_eq!(majority_vote(&votes).unwrap(), 0);
        let mut tie = vec![1; 16];
        tie.extend(vec![0; 16]);
        assert_eq!(majority_vote(&tie).unwrap(), 0);
        assert_eq!(majority_vote(&[2, 2, 1]).unwrap(), 2);
        assert!(majority_vote(&[]).is_err());
    }

    proptest! {
        #[test]
        fn wta_invariant_under_shift_and_scale(
            scores in prop::collection::vec(-10.0f64..10.0, 1..8),
            shift in -5.0f64..5.0,
            scale in 0.01f64..100.0,
        ) {
            let base = winner_take_all(&scores).unwrap();
            let moved: Vec<f64> = scores.iter().map(|s| s * scale + shift).collect();
            // the affine map can merge near-ties in floating point
            let best = scores[base];
            let unique = scores.iter().filter(|&&s| (s - best).abs() < 1e-9).count() == 1;
            if unique {
                prop_assert_eq!(winner_take_all(&moved).unwrap(), base);
            }
        }

        #[test]
        fn vote_is_permutation_invariant(
            labels in prop::collection::vec(0usize..4, 1..40),
            seed in any::<u64>(),
        ) {
            let mut shuffled = labels.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(majority_vote(&labels).unwrap(), majority_vote(&shuffled).unwrap());
        }
    }
}
