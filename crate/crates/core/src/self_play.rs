//! Outer self-play loop: repeated trials of tree search from a fresh root,
//! each followed by a belief update from the plays that trial realized.

use serde::{Deserialize, Serialize};

use crate::belief::{kl_divergence, max_abs_error, BayesPrior, BeliefState, UpdateRule};
use crate::error::{Error, Result};
use crate::game::{ClassifierId, GameConfig, Strategy, TypeDistribution};
use crate::oracle::ClassificationMode;
use crate::rng::RandomSource;
use crate::select::SelectionMethod;
use crate::tree::{game_play_with, tree_traverse, GameTreeNode, PlayRecord, PlayState, SearchContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    Ucb,
    Bne,
}

/// How the adversary picks the realized type in a play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryMode {
    /// Drawn from the true type distribution.
    #[default]
    Sampled,
    /// Best response to the learner's chosen strategy (argmax or UCB).
    BestResponse,
}

/// Distribution the adversary's rollout moves are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutModel {
    #[default]
    TrueDistribution,
    Belief,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfPlayConfig {
    /// Cutoff depth in individual moves; one game is a learner/adversary pair.
    pub h: usize,
    pub n_trials: usize,
    /// Tree traversals from each trial's root. Each ends in exactly one play.
    pub traversals_per_trial: usize,
    /// Queries per play.
    pub q: usize,
    /// UCB exploration constant.
    pub c: f64,
    pub selection: SelectionKind,
    pub update_rule: UpdateRule,
    pub bayes_prior: BayesPrior,
    pub adversary_mode: AdversaryMode,
    pub rollout_model: RolloutModel,
    pub classification_mode: ClassificationMode,
    pub true_p: TypeDistribution,
    pub prior: TypeDistribution,
    pub seed: u64,
}

impl SelfPlayConfig {
    pub const DEFAULT_H: usize = 20;
    pub const DEFAULT_N_TRIALS: usize = 10;
    pub const DEFAULT_TRAVERSALS: usize = 10;
    pub const DEFAULT_Q: usize = 10;
    pub const DEFAULT_C: f64 = 2.0;

    /// Defaults for a game with `n_types` types: uniform prior and true distribution.
    pub fn defaults(n_types: usize) -> Self {
        Self {
            h: Self::DEFAULT_H,
            n_trials: Self::DEFAULT_N_TRIALS,
            traversals_per_trial: Self::DEFAULT_TRAVERSALS,
            q: Self::DEFAULT_Q,
            c: Self::DEFAULT_C,
            selection: SelectionKind::Ucb,
            update_rule: UpdateRule::FictitiousPlay,
            bayes_prior: BayesPrior::Empirical,
            adversary_mode: AdversaryMode::Sampled,
            rollout_model: RolloutModel::TrueDistribution,
            classification_mode: ClassificationMode::Stochastic,
            true_p: TypeDistribution::uniform(n_types),
            prior: TypeDistribution::uniform(n_types),
            seed: 0,
        }
    }

    pub fn selection_method(&self) -> SelectionMethod {
        match self.selection {
            SelectionKind::Ucb => SelectionMethod::Ucb { c: self.c },
            SelectionKind::Bne => SelectionMethod::Bne,
        }
    }

    pub fn total_plays(&self) -> usize {
        self.n_trials * self.traversals_per_trial
    }

    pub fn validate(&self, cfg: &GameConfig) -> Result<()> {
        let positive = [
            ("run.h", self.h),
            ("run.n_trials", self.n_trials),
            ("run.traversals_per_trial", self.traversals_per_trial),
            ("run.q", self.q),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::validation(key, "must be >= 1"));
            }
        }
        if !self.c.is_finite() || self.c < 0.0 {
            return Err(Error::validation(
                "run.c",
                format!("must be finite and >= 0, got {}", self.c),
            ));
        }
        for (key, d) in [("run.true_p", &self.true_p), ("run.prior", &self.prior)] {
            if d.len() != cfg.n_types() {
                return Err(Error::validation(
                    key,
                    format!("has {} entries, expected {} (one per type)", d.len(), cfg.n_types()),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfPlayResult {
    /// `D_KL(p_hat || true_p)` after each trial's update.
    pub per_trial_kl: Vec<f64>,
    pub per_trial_max_abs_error: Vec<f64>,
    /// `[trial][classifier]`: KL of each action's conditional against `true_p`.
    pub per_trial_conditional_kl: Vec<Vec<f64>>,
    /// `[trial][classifier]`: per-query classifier draws within the trial.
    pub per_trial_selection: Vec<Vec<u64>>,
    pub final_belief: TypeDistribution,
    pub final_counts: Vec<Vec<u64>>,
    /// `[type][classifier]`: per-query plays of the classifier against the realized type.
    pub selection_counts: Vec<Vec<u64>>,
    /// Fraction correct per realized type; NaN where the type never occurred.
    pub per_type_accuracy: Vec<f64>,
    pub overall_accuracy: f64,
    pub mean_learner_utility: f64,
    pub mean_adversary_utility: f64,
    pub plays: Vec<PlayRecord>,
}

impl SelfPlayResult {
    /// Per-classifier query counts summed over types.
    pub fn classifier_totals(&self) -> Vec<u64> {
        let n = self.selection_counts.first().map_or(0, Vec::len);
        (0..n)
            .map(|j| self.selection_counts.iter().map(|row| row[j]).sum())
            .collect()
    }

    /// Most used classifier overall, lowest index on ties.
    pub fn modal_classifier(&self) -> ClassifierId {
        let totals = self.classifier_totals();
        let mut best = 0;
        for (j, &t) in totals.iter().enumerate() {
            if t > totals[best] {
                best = j;
            }
        }
        ClassifierId(best)
    }

    /// Share of queries answered by each classifier, in percent.
    pub fn selection_percentages(&self) -> Vec<f64> {
        let totals = self.classifier_totals();
        let all: u64 = totals.iter().sum();
        totals
            .iter()
            .map(|&t| if all == 0 { 0.0 } else { 100.0 * t as f64 / all as f64 })
            .collect()
    }
}

struct Tally {
    selection_counts: Vec<Vec<u64>>,
    correct_by_type: Vec<f64>,
    queries_by_type: Vec<u64>,
    learner_total: f64,
    adversary_total: f64,
    plays: Vec<PlayRecord>,
}

impl Tally {
    fn new(cfg: &GameConfig) -> Self {
        Self {
            selection_counts: vec![vec![0; cfg.n_classifiers()]; cfg.n_types()],
            correct_by_type: vec![0.0; cfg.n_types()],
            queries_by_type: vec![0; cfg.n_types()],
            learner_total: 0.0,
            adversary_total: 0.0,
            plays: Vec::new(),
        }
    }

    fn add(&mut self, rec: &PlayRecord, trial_selection: &mut [u64]) {
        let i = rec.realized_type.0;
        for (j, &correct) in rec.per_query_classifier.iter().zip(&rec.per_query_correct) {
            self.selection_counts[i][j.0] += 1;
            trial_selection[j.0] += 1;
            self.correct_by_type[i] += correct;
            self.queries_by_type[i] += 1;
        }
        self.learner_total += rec.utilities.learner;
        self.adversary_total += rec.utilities.adversary;
        self.plays.push(rec.clone());
    }

    fn finish(self, per_trial: TrialSeries, belief: &BeliefState) -> SelfPlayResult {
        let n_plays = self.plays.len().max(1) as f64;
        let per_type_accuracy = self
            .correct_by_type
            .iter()
            .zip(&self.queries_by_type)
            .map(|(&c, &n)| if n == 0 { f64::NAN } else { c / n as f64 })
            .collect();
        let all_queries: u64 = self.queries_by_type.iter().sum();
        let overall_accuracy = if all_queries == 0 {
            f64::NAN
        } else {
            self.correct_by_type.iter().sum::<f64>() / all_queries as f64
        };
        SelfPlayResult {
            per_trial_kl: per_trial.kl,
            per_trial_max_abs_error: per_trial.max_abs_error,
            per_trial_conditional_kl: per_trial.conditional_kl,
            per_trial_selection: per_trial.selection,
            final_belief: belief.p_hat().clone(),
            final_counts: belief.joint_counts().to_vec(),
            selection_counts: self.selection_counts,
            per_type_accuracy,
            overall_accuracy,
            mean_learner_utility: self.learner_total / n_plays,
            mean_adversary_utility: self.adversary_total / n_plays,
            plays: self.plays,
        }
    }
}

#[derive(Default)]
struct TrialSeries {
    kl: Vec<f64>,
    max_abs_error: Vec<f64>,
    conditional_kl: Vec<Vec<f64>>,
    selection: Vec<Vec<u64>>,
}

impl TrialSeries {
    fn push(&mut self, belief: &BeliefState, true_p: &TypeDistribution, selection: Vec<u64>) -> Result<()> {
        self.kl.push(kl_divergence(belief.p_hat(), true_p)?);
        self.max_abs_error.push(max_abs_error(belief.p_hat(), true_p)?);
        let cond = (0..belief.n_classifiers())
            .map(|j| kl_divergence(&belief.conditional(ClassifierId(j)), true_p))
            .collect::<Result<Vec<_>>>()?;
        self.conditional_kl.push(cond);
        self.selection.push(selection);
        Ok(())
    }
}

const SEARCH_STREAM: u64 = 100;

/// Runs `n_trials` trials of tree search plus belief updates.
pub fn self_play(cfg: &GameConfig, run: &SelfPlayConfig) -> Result<SelfPlayResult> {
    run.validate(cfg)?;
    let mut belief =
        BeliefState::new(cfg.n_classifiers(), run.prior.clone(), run.update_rule).with_bayes_prior(run.bayes_prior);
    let mut play_state = PlayState::new(cfg, run.seed);
    let mut search_rng = RandomSource::new(run.seed).derive(SEARCH_STREAM);
    let mut tally = Tally::new(cfg);
    let mut series = TrialSeries::default();

    for trial in 0..run.n_trials {
        let mut root = GameTreeNode::root();
        let first_action = ClassifierId(search_rng.index(cfg.n_classifiers()));
        let mut ctx =
            SearchContext::new(cfg, run, &belief, &mut play_state, &mut search_rng)?.with_root_action(first_action);
        for _ in 0..run.traversals_per_trial {
            tree_traverse(&mut root, &mut ctx)?;
        }
        let records = ctx.into_records();
        log::debug!(
            "trial {trial}: {} plays, root visits {}",
            records.len(),
            root.visit_count
        );

        let mut trial_selection = vec![0; cfg.n_classifiers()];
        for rec in &records {
            for j in &rec.per_query_classifier {
                belief.record_observation(*j, rec.realized_type);
            }
            tally.add(rec, &mut trial_selection);
        }
        belief.refresh_marginal();
        series.push(&belief, &run.true_p, trial_selection)?;
    }
    Ok(tally.finish(series, &belief))
}

/// Plays the same query stream as [`self_play`] with the learner fixed to
/// `policy`: no search, no belief updates.
pub fn evaluate_fixed_policy(cfg: &GameConfig, run: &SelfPlayConfig, policy: &Strategy) -> Result<SelfPlayResult> {
    run.validate(cfg)?;
    cfg.check_strategy(policy)?;
    let belief = BeliefState::new(cfg.n_classifiers(), run.prior.clone(), run.update_rule);
    let mut play_state = PlayState::new(cfg, run.seed);
    let mut tally = Tally::new(cfg);
    let mut series = TrialSeries::default();
    for _ in 0..run.n_trials {
        let mut trial_selection = vec![0; cfg.n_classifiers()];
        for _ in 0..run.traversals_per_trial {
            let rec = game_play_with(policy.clone(), &belief, cfg, run, &mut play_state)?;
            tally.add(&rec, &mut trial_selection);
        }
        series.push(&belief, &run.true_p, trial_selection)?;
    }
    Ok(tally.finish(series, &belief))
}
