//! Action selection: Bayes-Nash best response and UCB1.

use crate::error::{Error, Result};
use crate::game::{
    adversary_utility, expected_learner_utility, AdversaryTypeId, ClassifierId, GameConfig, Strategy, TypeDistribution,
};

/// Visit and value statistics for the actions available at one decision point.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStats {
    pub parent_visits: u64,
    pub action_visits: Vec<u64>,
    /// Accumulated per-query utilities of plays through each action.
    pub action_value_sums: Vec<f64>,
}

impl NodeStats {
    pub fn new(n_actions: usize) -> Self {
        Self {
            parent_visits: 0,
            action_visits: vec![0; n_actions],
            action_value_sums: vec![0.0; n_actions],
        }
    }

    pub fn n_actions(&self) -> usize {
        self.action_visits.len()
    }

    /// Records one play of `action` worth `value`.
    pub fn record(&mut self, action: usize, value: f64) {
        self.parent_visits += 1;
        self.action_visits[action] += 1;
        self.action_value_sums[action] += value;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionMethod {
    Bne,
    Ucb { c: f64 },
}

/// Pure best response of the learner to `belief`, then the adversary's best
/// type against it. Ties go to the lowest index.
pub fn bne_select(belief: &TypeDistribution, cfg: &GameConfig) -> Result<(Strategy, AdversaryTypeId)> {
    cfg.check_belief(belief)?;
    let n = cfg.n_classifiers();
    let mut best = ClassifierId(0);
    let mut best_u = f64::NEG_INFINITY;
    for j in cfg.classifiers() {
        let u = expected_learner_utility(&Strategy::pure(n, j), belief, cfg)?;
        if u > best_u {
            best_u = u;
            best = j;
        }
    }
    let strategy = Strategy::pure(n, best);
    let theta = adversary_best_response(&strategy, cfg)?;
    Ok((strategy, theta))
}

/// Type maximizing adversary utility against `s`. Ties go to the lowest index.
pub fn adversary_best_response(s: &Strategy, cfg: &GameConfig) -> Result<AdversaryTypeId> {
    let mut best = AdversaryTypeId(0);
    let mut best_u = f64::NEG_INFINITY;
    for i in cfg.types() {
        let u = adversary_utility(s, i, cfg)?;
        if u > best_u {
            best_u = u;
            best = i;
        }
    }
    Ok(best)
}

fn ucb_select(stats: &NodeStats, c: f64) -> Result<usize> {
    let n = stats.n_actions();
    if n == 0 || stats.action_value_sums.len() != n {
        return Err(Error::Logic(format!(
            "node stats malformed: {} visit counts, {} value sums",
            n,
            stats.action_value_sums.len()
        )));
    }
    if !c.is_finite() || c < 0.0 {
        return Err(Error::validation(
            "c",
            format!("exploration constant must be finite and >= 0, got {c}"),
        ));
    }
    if let Some(k) = stats.action_visits.iter().position(|&v| v == 0) {
        return Ok(k);
    }
    if stats.parent_visits == 0 {
        return Err(Error::Logic(
            "parent has zero visits while every action is visited".into(),
        ));
    }
    let ln_parent = (stats.parent_visits as f64).ln();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for k in 0..n {
        let bonus = c * (2.0 * ln_parent / stats.action_visits[k] as f64).sqrt();
        let score = stats.action_value_sums[k] + bonus;
        if score > best_score {
            best_score = score;
            best = k;
        }
    }
    Ok(best)
}

/// UCB1 over classifiers. Unvisited actions come first, lowest index first.
pub fn ucb_select_learner(stats: &NodeStats, c: f64) -> Result<ClassifierId> {
    ucb_select(stats, c).map(ClassifierId)
}

/// UCB1 over adversary types, mirroring [`ucb_select_learner`].
pub fn ucb_select_adversary(stats: &NodeStats, c: f64) -> Result<AdversaryTypeId> {
    ucb_select(stats, c).map(AdversaryTypeId)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{AccuracyMatrix, PayoffConfig};
    use approx::assert_abs_diff_eq;

    fn stats(visits: &[u64], sums: &[f64], parent: u64) -> NodeStats {
        NodeStats {
            parent_visits: parent,
            action_visits: visits.to_vec(),
            action_value_sums: sums.to_vec(),
        }
    }

    #[test]
    fn bne_singleton_game() {
        let cfg = GameConfig::new(AccuracyMatrix::new(vec![vec![0.7]]).unwrap(), PayoffConfig::unit(1, 1)).unwrap();
        let (s, t) = bne_select(&TypeDistribution::uniform(1), &cfg).unwrap();
        assert_eq!(s.as_pure(), Some(ClassifierId(0)));
        assert_eq!(t, AdversaryTypeId(0));
    }

    #[test]
    fn bne_adv2_picks_most_hardened() {
        let cfg = GameConfig::reference();
        let belief = TypeDistribution::pure(4, AdversaryTypeId(2));
        let (s, _) = bne_select(&belief, &cfg).unwrap();
        assert_eq!(s.as_pure(), Some(ClassifierId(2)));
    }

    #[test]
    fn bne_adv2_with_costs_picks_middle() {
        let payoff = PayoffConfig::unit(3, 4).with_classifier_cost(vec![0.0, 0.01, 0.05]);
        let cfg = GameConfig::new(AccuracyMatrix::reference(), payoff).unwrap();
        let belief = TypeDistribution::pure(4, AdversaryTypeId(2));
        let (s, _) = bne_select(&belief, &cfg).unwrap();
        assert_eq!(s.as_pure(), Some(ClassifierId(1)));
    }

    #[test]
    fn bne_adversary_best_responds() {
        let cfg = GameConfig::reference();
        let (s, t) = bne_select(&TypeDistribution::uniform(4), &cfg).unwrap();
        // the strongest perturbation is always the hardest to classify here
        assert_eq!(t, AdversaryTypeId(3));
        assert!(s.as_pure().is_some());
    }

    #[test]
    fn ucb_unvisited_first() {
        let s = stats(&[0, 0, 0], &[0.0; 3], 0);
        assert_eq!(ucb_select_learner(&s, 2.0).unwrap(), ClassifierId(0));
        let s = stats(&[4, 0, 2], &[9.0, 0.0, 9.0], 6);
        assert_eq!(ucb_select_learner(&s, 2.0).unwrap(), ClassifierId(1));
        let s = stats(&[0, 0, 0, 0], &[0.0; 4], 0);
        assert_eq!(ucb_select_adversary(&s, 2.0).unwrap(), AdversaryTypeId(0));
    }

    #[test]
    fn ucb_greedy_without_exploration() {
        let s = stats(&[3, 1, 7], &[0.2, 0.9, 0.4], 11);
        assert_eq!(ucb_select_learner(&s, 0.0).unwrap(), ClassifierId(1));
        let s = stats(&[3, 1, 7, 2], &[0.2, 0.1, 0.4, 0.3], 13);
        assert_eq!(ucb_select_adversary(&s, 0.0).unwrap(), AdversaryTypeId(2));
    }

    #[test]
    fn ucb_learner_hand_example() {
        let s = stats(&[1, 3], &[0.5, 0.5], 4);
        let bonus0 = 2.0 * (2.0 * 4f64.ln() / 1.0).sqrt();
        let bonus1 = 2.0 * (2.0 * 4f64.ln() / 3.0).sqrt();
        assert_abs_diff_eq!(bonus0, 3.330, epsilon = 5e-4);
        assert_abs_diff_eq!(bonus1, 1.923, epsilon = 5e-4);
        assert_eq!(ucb_select_learner(&s, 2.0).unwrap(), ClassifierId(0));
    }

    #[test]
    fn ucb_adversary_hand_example() {
        let s = stats(&[5, 1], &[0.2, 0.9], 6);
        // hand values are rounded to three places (1.8932, 4.6857)
        assert_abs_diff_eq!(0.2 + 2.0 * (2.0 * 6f64.ln() / 5.0).sqrt(), 1.892, epsilon = 2e-3);
        assert_abs_diff_eq!(0.9 + 2.0 * (2.0 * 6f64.ln()).sqrt(), 4.686, epsilon = 2e-3);
        assert_eq!(ucb_select_adversary(&s, 2.0).unwrap(), AdversaryTypeId(1));
    }

    #[test]
    fn ucb_zero_parent_is_logic_error() {
        let s = stats(&[1, 1], &[0.0, 0.0], 0);
        assert!(matches!(ucb_select_learner(&s, 2.0), Err(Error::Logic(_))));
    }

    #[test]
    fn ucb_ties_lowest_index() {
        let s = stats(&[2, 2, 2], &[1.0, 1.0, 1.0], 6);
        assert_eq!(ucb_select_learner(&s, 2.0).unwrap(), ClassifierId(0));
    }
}
