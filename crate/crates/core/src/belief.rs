//! The learner's belief over adversary types.
//!
//! Observations are `(classifier played, type realized)` pairs. From their
//! counts the belief state derives per-action conditionals `P(type | action)`
//! by fictitious play or by Bayes' rule, and marginalizes them with the
//! empirical action frequencies into the working belief `p_hat`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{AdversaryTypeId, ClassifierId, TypeDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    FictitiousPlay,
    BayesianUpdate,
}

/// Where Bayes' rule takes its type prior `P(theta_i)` from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BayesPrior {
    /// Observed type frequencies; the current belief until anything is observed.
    #[default]
    Empirical,
    /// The current belief `p_hat`.
    Belief,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    p_hat: TypeDistribution,
    /// `[classifier][type]`: times the type was observed after the classifier.
    joint_counts: Vec<Vec<u64>>,
    action_counts: Vec<u64>,
    update_rule: UpdateRule,
    bayes_prior: BayesPrior,
    prior: TypeDistribution,
}

impl BeliefState {
    pub fn new(n_classifiers: usize, prior: TypeDistribution, update_rule: UpdateRule) -> Self {
        Self {
            p_hat: prior.clone(),
            joint_counts: vec![vec![0; prior.len()]; n_classifiers],
            action_counts: vec![0; n_classifiers],
            update_rule,
            bayes_prior: BayesPrior::default(),
            prior,
        }
    }

    /// Uniform prior over `n_types`.
    pub fn uniform(n_classifiers: usize, n_types: usize, update_rule: UpdateRule) -> Self {
        Self::new(n_classifiers, TypeDistribution::uniform(n_types), update_rule)
    }

    pub fn with_bayes_prior(mut self, source: BayesPrior) -> Self {
        self.bayes_prior = source;
        self
    }

    /// Builds a state from an explicit count matrix `[classifier][type]`.
    pub fn from_counts(joint_counts: Vec<Vec<u64>>, prior: TypeDistribution, update_rule: UpdateRule) -> Result<Self> {
        if joint_counts.is_empty() {
            return Err(Error::validation("joint_counts", "needs at least one classifier row"));
        }
        if let Some(j) = joint_counts.iter().position(|r| r.len() != prior.len()) {
            return Err(Error::dimension(
                format!("joint_counts[{j}]"),
                prior.len(),
                joint_counts[j].len(),
            ));
        }
        let action_counts = joint_counts.iter().map(|r| r.iter().sum()).collect();
        Ok(Self {
            p_hat: prior.clone(),
            joint_counts,
            action_counts,
            update_rule,
            bayes_prior: BayesPrior::default(),
            prior,
        })
    }

    pub fn p_hat(&self) -> &TypeDistribution {
        &self.p_hat
    }

    pub fn prior(&self) -> &TypeDistribution {
        &self.prior
    }

    pub fn update_rule(&self) -> UpdateRule {
        self.update_rule
    }

    pub fn joint_counts(&self) -> &[Vec<u64>] {
        &self.joint_counts
    }

    pub fn action_counts(&self) -> &[u64] {
        &self.action_counts
    }

    pub fn n_types(&self) -> usize {
        self.prior.len()
    }

    pub fn n_classifiers(&self) -> usize {
        self.action_counts.len()
    }

    pub fn total_observations(&self) -> u64 {
        self.action_counts.iter().sum()
    }

    /// Increments the count of `theta` following `action`. `p_hat` is left
    /// alone until [`refresh_marginal`](Self::refresh_marginal).
    pub fn record_observation(&mut self, action: ClassifierId, theta: AdversaryTypeId) {
        self.joint_counts[action.0][theta.0] += 1;
        self.action_counts[action.0] += 1;
    }

    /// `P(theta_i | L_j)` as the fraction of observations after `L_j` that
    /// were `theta_i`. The prior if `L_j` was never played.
    pub fn fp_conditional(&self, action: ClassifierId) -> TypeDistribution {
        let n = self.action_counts[action.0];
        if n == 0 {
            return self.prior.clone();
        }
        let weights: Vec<f64> = self.joint_counts[action.0]
            .iter()
            .map(|&c| c as f64 / n as f64)
            .collect();
        TypeDistribution::from_weights(&weights).expect("counts of a played action are positive")
    }

    fn type_totals(&self) -> Vec<u64> {
        (0..self.n_types())
            .map(|i| self.joint_counts.iter().map(|r| r[i]).sum())
            .collect()
    }

    /// `P(L_j | theta_i)` for every type: the fraction of observations of
    /// `theta_i` that followed `L_j`. Zero for unobserved types.
    pub fn action_likelihood(&self, action: ClassifierId) -> Vec<f64> {
        self.type_totals()
            .iter()
            .zip(&self.joint_counts[action.0])
            .map(|(&total, &c)| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect()
    }

    /// The type prior Bayes' rule uses, per [`BayesPrior`].
    pub fn bayes_type_prior(&self) -> Vec<f64> {
        let n = self.total_observations();
        match self.bayes_prior {
            BayesPrior::Empirical if n > 0 => self.type_totals().iter().map(|&c| c as f64 / n as f64).collect(),
            _ => self.p_hat.as_slice().to_vec(),
        }
    }

    /// `P(theta_i | L_j)` by Bayes' rule from the action likelihoods and the
    /// type prior. The prior if the normalizer vanishes.
    pub fn bu_conditional(&self, action: ClassifierId) -> TypeDistribution {
        let likelihood = self.action_likelihood(action);
        let type_prior = self.bayes_type_prior();
        let numerators: Vec<f64> = likelihood.iter().zip(&type_prior).map(|(l, p)| l * p).collect();
        let evidence: f64 = numerators.iter().sum();
        if evidence.is_nan() || evidence <= 0.0 {
            return self.prior.clone();
        }
        let posterior: Vec<f64> = numerators.iter().map(|x| x / evidence).collect();
        TypeDistribution::from_weights(&posterior).expect("posterior has positive mass")
    }

    pub fn conditional(&self, action: ClassifierId) -> TypeDistribution {
        match self.update_rule {
            UpdateRule::FictitiousPlay => self.fp_conditional(action),
            UpdateRule::BayesianUpdate => self.bu_conditional(action),
        }
    }

    /// Recomputes `p_hat` as the action-frequency-weighted mixture of the
    /// active rule's conditionals. Resets to the prior with no observations.
    pub fn refresh_marginal(&mut self) {
        let total = self.total_observations();
        if total == 0 {
            self.p_hat = self.prior.clone();
            return;
        }
        let mut mix = vec![0.0; self.n_types()];
        for j in 0..self.n_classifiers() {
            let n = self.action_counts[j];
            if n == 0 {
                continue;
            }
            let w = n as f64 / total as f64;
            let cond = self.conditional(ClassifierId(j));
            for (m, c) in mix.iter_mut().zip(cond.as_slice()) {
                *m += w * c;
            }
        }
        self.p_hat = TypeDistribution::from_weights(&mix).expect("mixture has positive mass");
    }
}

/// `D_KL(p_hat || p)` in nats. Zero-mass terms of `p_hat` contribute nothing;
/// positive mass where `p` has none gives `f64::INFINITY`.
pub fn kl_divergence(p_hat: &TypeDistribution, p: &TypeDistribution) -> Result<f64> {
    if p_hat.len() != p.len() {
        return Err(Error::dimension("kl_divergence", p_hat.len(), p.len()));
    }
    let mut total = 0.0;
    for (&a, &b) in p_hat.as_slice().iter().zip(p.as_slice()) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += a * (a / b).ln();
    }
    // rounding can push the sum of near-identical distributions just below zero
    Ok(total.max(0.0))
}

/// Largest per-type absolute difference.
pub fn max_abs_error(p_hat: &TypeDistribution, p: &TypeDistribution) -> Result<f64> {
    if p_hat.len() != p.len() {
        return Err(Error::dimension("max_abs_error", p_hat.len(), p.len()));
    }
    Ok(p_hat
        .as_slice()
        .iter()
        .zip(p.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dist(v: &[f64]) -> TypeDistribution {
        TypeDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn record_counts() {
        let mut b = BeliefState::uniform(3, 4, UpdateRule::FictitiousPlay);
        b.record_observation(ClassifierId(0), AdversaryTypeId(1));
        assert_eq!(b.joint_counts()[0][1], 1);
        assert_eq!(b.action_counts()[0], 1);
        b.record_observation(ClassifierId(0), AdversaryTypeId(1));
        assert_eq!(b.joint_counts()[0][1], 2);
        assert_eq!(b.p_hat(), &TypeDistribution::uniform(4));

        let mut b = BeliefState::uniform(3, 4, UpdateRule::FictitiousPlay);
        b.record_observation(ClassifierId(1), AdversaryTypeId(0));
        b.record_observation(ClassifierId(0), AdversaryTypeId(0));
        assert_eq!(b.action_counts(), &[1, 1, 0]);
    }

    #[test]
    fn fp_conditional_examples() {
        let mut b = BeliefState::uniform(3, 4, UpdateRule::FictitiousPlay);
        b.record_observation(ClassifierId(0), AdversaryTypeId(1));
        b.record_observation(ClassifierId(0), AdversaryTypeId(1));
        b.record_observation(ClassifierId(0), AdversaryTypeId(2));
        let c = b.fp_conditional(ClassifierId(0));
        assert_abs_diff_eq!(c.as_slice()[1], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.as_slice()[2], 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(c.as_slice()[0], 0.0);
        assert_eq!(b.fp_conditional(ClassifierId(1)), TypeDistribution::uniform(4));

        let mut b = BeliefState::uniform(3, 4, UpdateRule::FictitiousPlay);
        b.record_observation(ClassifierId(2), AdversaryTypeId(3));
        assert_eq!(b.fp_conditional(ClassifierId(2)).as_pure(), Some(AdversaryTypeId(3)));
    }

    #[test]
    fn bu_conditional_hand_example() {
        // P(L0|t0) = 4/5 = 0.8, P(L0|t1) = 2/5 = 0.4; both priors give (0.5, 0.5)
        let counts = vec![vec![4, 2], vec![1, 3]];
        for source in [BayesPrior::Belief, BayesPrior::Empirical] {
            let b = BeliefState::from_counts(counts.clone(), TypeDistribution::uniform(2), UpdateRule::BayesianUpdate)
                .unwrap()
                .with_bayes_prior(source);
            let post = b.bu_conditional(ClassifierId(0));
            assert_abs_diff_eq!(post.as_slice()[0], 2.0 / 3.0, epsilon = 1e-12);
            assert_abs_diff_eq!(post.as_slice()[1], 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bu_uninformative_likelihood_keeps_prior() {
        let prior = dist(&[0.2, 0.3, 0.5]);
        let counts = vec![vec![1, 2, 3], vec![1, 2, 3]];
        let b = BeliefState::from_counts(counts, prior.clone(), UpdateRule::BayesianUpdate)
            .unwrap()
            .with_bayes_prior(BayesPrior::Belief);
        let post = b.bu_conditional(ClassifierId(0));
        for (a, e) in post.as_slice().iter().zip(prior.as_slice()) {
            assert_abs_diff_eq!(a, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn bu_degenerate_prior_is_absorbing() {
        let prior = TypeDistribution::pure(3, AdversaryTypeId(1));
        let counts = vec![vec![3, 1, 4], vec![1, 5, 9]];
        let b = BeliefState::from_counts(counts, prior, UpdateRule::BayesianUpdate)
            .unwrap()
            .with_bayes_prior(BayesPrior::Belief);
        assert_eq!(b.bu_conditional(ClassifierId(0)).as_pure(), Some(AdversaryTypeId(1)));
    }

    #[test]
    fn bu_zero_evidence_falls_back_to_prior() {
        let b = BeliefState::uniform(2, 3, UpdateRule::BayesianUpdate);
        assert_eq!(b.bu_conditional(ClassifierId(1)), TypeDistribution::uniform(3));
        let b = BeliefState::from_counts(
            vec![vec![2, 2, 0], vec![0, 0, 0]],
            TypeDistribution::uniform(3),
            UpdateRule::BayesianUpdate,
        )
        .unwrap();
        assert_eq!(b.bu_conditional(ClassifierId(1)), TypeDistribution::uniform(3));
    }

    #[test]
    fn refresh_examples() {
        let mut b = BeliefState::new(2, dist(&[0.7, 0.3]), UpdateRule::FictitiousPlay);
        b.refresh_marginal();
        assert_eq!(b.p_hat(), &dist(&[0.7, 0.3]));

        let mut b = BeliefState::from_counts(
            vec![vec![3, 1], vec![0, 0]],
            TypeDistribution::uniform(2),
            UpdateRule::FictitiousPlay,
        )
        .unwrap();
        b.refresh_marginal();
        assert_eq!(b.p_hat(), &b.fp_conditional(ClassifierId(0)));

        let mut b = BeliefState::from_counts(
            vec![vec![2, 0], vec![0, 2]],
            TypeDistribution::uniform(2),
            UpdateRule::FictitiousPlay,
        )
        .unwrap();
        b.refresh_marginal();
        assert_abs_diff_eq!(b.p_hat().as_slice()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn kl_examples() {
        let p = dist(&[0.1, 0.2, 0.7]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let kl = kl_divergence(&dist(&[0.5, 0.5]), &dist(&[0.25, 0.75])).unwrap();
        assert_abs_diff_eq!(kl, 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(kl, 0.1438, epsilon = 1e-4);
        assert_eq!(
            kl_divergence(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap(),
            f64::INFINITY
        );
        assert!(kl_divergence(&dist(&[1.0, 0.0]), &dist(&[0.2, 0.3, 0.5])).is_err());
    }
}
