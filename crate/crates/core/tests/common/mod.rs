#![allow(dead_code)]

use rbsg_core::{AccuracyMatrix, GameConfig, PayoffConfig, RandomSource, TypeDistribution};

/// Random game with independent uniform accuracies, values and costs.
pub fn random_game(rng: &mut RandomSource, nc: usize, nt: usize) -> GameConfig {
    let mut grid = |lo: f64, hi: f64, rows: usize, cols: usize| -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| (0..cols).map(|_| lo + (hi - lo) * rng.uniform()).collect())
            .collect()
    };
    let acc = grid(0.0, 1.0, nc, nt);
    let value_learner = grid(0.0, 2.0, nc, nt);
    let value_adversary = grid(0.0, 2.0, nc, nt);
    let classifier_cost = grid(0.0, 0.3, 1, nc).remove(0);
    let type_cost = grid(0.0, 0.3, 1, nt).remove(0);
    let payoff = PayoffConfig {
        value_learner,
        value_adversary,
        classifier_cost,
        type_cost,
    };
    GameConfig::new(AccuracyMatrix::new(acc).unwrap(), payoff).unwrap()
}

/// Random point of the simplex; about a third of the draws zero out some entries.
pub fn random_distribution(rng: &mut RandomSource, n: usize) -> TypeDistribution {
    let sparse = rng.uniform() < 0.33;
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if sparse && rng.uniform() < 0.5 {
                0.0
            } else {
                rng.uniform()
            }
        })
        .collect();
    if w.iter().all(|x| *x == 0.0) {
        w[rng.index(n)] = 1.0;
    }
    TypeDistribution::from_weights(&w).unwrap()
}
