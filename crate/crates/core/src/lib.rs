//! Repeated Bayesian sequential game between a learner that owns a pool of
//! differently hardened classifiers and an adversary that perturbs queries
//! with a private strength ("type").
//!
//! The learner repeatedly plays the game against a model of the adversary
//! (self-play), searching a game tree with Bayes-Nash or UCB action
//! selection, and refines its belief over the adversary's types by
//! fictitious play or Bayes' rule. Classifiers are represented only by their
//! accuracy per type, see [`oracle`].

pub mod belief;
pub mod error;
pub mod game;
pub mod harness;
pub mod oracle;
pub mod rng;
pub mod select;
pub mod self_play;
pub mod tree;

pub use belief::{kl_divergence, BayesPrior, BeliefState, UpdateRule};
pub use error::{Error, Result};
pub use game::{
    adversary_utility, expected_learner_utility, learner_utility, AccuracyMatrix, AdversaryTypeId, ClassifierId,
    GameConfig, PayoffConfig, Strategy, TypeDistribution, UtilityPair,
};
pub use oracle::ClassificationMode;
pub use rng::RandomSource;
pub use select::{bne_select, ucb_select_adversary, ucb_select_learner, NodeStats, SelectionMethod};
pub use self_play::{
    evaluate_fixed_policy, self_play, AdversaryMode, RolloutModel, SelectionKind, SelfPlayConfig, SelfPlayResult,
};
