//! Stochastic stand-in for the classifier pool and the adversary's query source.
//!
//! Queries carry no features. A classifier answers a query of type `i`
//! correctly with probability `acc[j][i]`, and that is all the game layer
//! needs to know about it.

use serde::{Deserialize, Serialize};

use crate::game::{AdversaryTypeId, ClassifierId, GameConfig};
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Query {
    pub true_label: u8,
    /// Hidden from the learner during play.
    pub type_id: AdversaryTypeId,
    pub query_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassificationMode {
    /// Bernoulli draw per query.
    #[default]
    Stochastic,
    /// Correctness is the accuracy itself; no randomness.
    Expectation,
}

/// `q` queries of type `theta` with uniform labels.
pub fn generate_queries(theta: AdversaryTypeId, q: usize, rng: &mut RandomSource) -> Vec<Query> {
    (0..q)
        .map(|k| Query {
            true_label: u8::from(rng.bernoulli(0.5)),
            type_id: theta,
            query_id: k as u64,
        })
        .collect()
}

/// Correctness of classifier `j` on `query`: `1.0`/`0.0` when stochastic,
/// the accuracy entry in expectation mode.
pub fn classify(
    j: ClassifierId,
    query: &Query,
    cfg: &GameConfig,
    mode: ClassificationMode,
    rng: &mut RandomSource,
) -> f64 {
    let acc = cfg.accuracy().get(j, query.type_id);
    match mode {
        ClassificationMode::Expectation => acc,
        ClassificationMode::Stochastic => {
            if rng.bernoulli(acc) {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Fraction of `n` stochastic classifications of type-`i` queries by `j` that are correct.
pub fn empirical_accuracy(
    j: ClassifierId,
    i: AdversaryTypeId,
    n: usize,
    cfg: &GameConfig,
    rng: &mut RandomSource,
) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let correct: f64 = generate_queries(i, n, rng)
        .iter()
        .map(|query| classify(j, query, cfg, ClassificationMode::Stochastic, rng))
        .sum();
    correct / n as f64
}
