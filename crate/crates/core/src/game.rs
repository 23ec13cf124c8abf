//! Shared domain types and the per-play utility functions.
//!
//! Utilities are bilinear in the learner strategy and the type distribution:
//!
//! ```text
//! U_L(s, i)    = sum_j s[j] * (acc[j][i] * v_L[j][i] - c_L[j])
//! EU_L(s, p)   = sum_i p[i] * U_L(s, i)
//! U_A(s, i)    = sum_j s[j] * ((1 - acc[j][i]) * v_A[j][i] - c_theta[i])
//! ```
//!
//! All quantities are per-query averages, so they do not depend on batch size.

use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for probability vectors summing to one.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Index of a classifier in the learner's pool. `0` is the non-hardened one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassifierId(pub usize);

/// Adversary type, i.e. perturbation strength. `0` is clean data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AdversaryTypeId(pub usize);

impl fmt::Display for ClassifierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

impl fmt::Display for AdversaryTypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "theta{}", self.0)
    }
}

fn check_simplex(what: &str, probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::validation(what, "must have at least one entry"));
    }
    if let Some(k) = probs.iter().position(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
        return Err(Error::validation(
            format!("{what}[{k}]"),
            format!("probability {} out of [0,1]", probs[k]),
        ));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::validation(what, format!("entries sum to {total}, not 1")));
    }
    Ok(())
}

fn normalize(what: &str, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::validation(what, "weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::validation(what, "weights must not all be zero"));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

macro_rules! simplex_type {
    ($(#[$meta:meta])* $name:ident, $id:ident, $label:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
        pub struct $name {
            probs: Vec<f64>,
        }

        impl $name {
            pub fn new(probs: Vec<f64>) -> Result<Self> {
                check_simplex($label, &probs)?;
                Ok(Self { probs })
            }

            /// Normalizes non-negative weights onto the simplex.
            pub fn from_weights(weights: &[f64]) -> Result<Self> {
                Ok(Self { probs: normalize($label, weights)? })
            }

            pub fn uniform(n: usize) -> Self {
                assert!(n > 0, "empty distribution");
                Self { probs: vec![1.0 / n as f64; n] }
            }

            pub fn pure(n: usize, k: $id) -> Self {
                assert!(k.0 < n, "index out of range");
                let mut probs = vec![0.0; n];
                probs[k.0] = 1.0;
                Self { probs }
            }

            pub fn len(&self) -> usize {
                self.probs.len()
            }

            pub fn is_empty(&self) -> bool {
                self.probs.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.probs
            }

            pub fn prob(&self, k: $id) -> f64 {
                self.probs[k.0]
            }

            /// The single index carrying all the mass, if any.
            pub fn as_pure(&self) -> Option<$id> {
                self.probs.iter().position(|&p| p == 1.0).map($id)
            }
        }

        impl TryFrom<Vec<f64>> for $name {
            type Error = Error;
            fn try_from(v: Vec<f64>) -> Result<Self> {
                Self::new(v)
            }
        }

        impl From<$name> for Vec<f64> {
            fn from(d: $name) -> Vec<f64> {
                d.probs
            }
        }
    };
}

simplex_type!(
    /// Learner mixed strategy over classifiers.
    Strategy,
    ClassifierId,
    "strategy"
);
simplex_type!(
    /// Probability distribution over adversary types.
    TypeDistribution,
    AdversaryTypeId,
    "type_distribution"
);

impl TypeDistribution {
    /// `mass` on `k`, the rest split evenly over the other types. The last
    /// remaining entry absorbs rounding so the vector sums to one.
    pub fn concentrated(n: usize, k: AdversaryTypeId, mass: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mass) {
            return Err(Error::validation("mass", format!("{mass} out of [0,1]")));
        }
        if k.0 >= n {
            return Err(Error::dimension("concentrated type", n, k.0 + 1));
        }
        if n == 1 {
            return Ok(Self::pure(1, k));
        }
        let share = (1.0 - mass) / (n - 1) as f64;
        let mut probs = vec![share; n];
        probs[k.0] = mass;
        let last = if k.0 == n - 1 { n - 2 } else { n - 1 };
        let others: f64 = probs
            .iter()
            .enumerate()
            .filter(|(t, _)| *t != last)
            .map(|(_, p)| p)
            .sum();
        probs[last] = (1.0 - others).max(0.0);
        Self::new(probs)
    }
}

/// Probability of a correct prediction, indexed `[classifier][type]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct AccuracyMatrix {
    acc: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new(acc: Vec<Vec<f64>>) -> Result<Self> {
        let key = "game.accuracy";
        if acc.is_empty() {
            return Err(Error::validation(key, "needs at least one classifier row"));
        }
        let n_types = acc[0].len();
        if n_types == 0 {
            return Err(Error::validation(key, "needs at least one type column"));
        }
        for (j, row) in acc.iter().enumerate() {
            if row.len() != n_types {
                return Err(Error::validation(
                    format!("{key}[{j}]"),
                    format!("row has {} entries, expected {n_types}", row.len()),
                ));
            }
            for (i, &a) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::validation(
                        format!("{key}[{j}][{i}]"),
                        format!("accuracy out of [0,1]: {a}"),
                    ));
                }
            }
        }
        Ok(Self { acc })
    }

    /// Measured test accuracies of three classifiers hardened at levels
    /// 0, 1, 2 against clean data and perturbation strengths 1, 2, 3.
    pub fn reference() -> Self {
        // columns: clean, adv1, adv2, adv3
        Self {
            acc: vec![
                vec![0.9392, 0.8684, 0.7706, 0.6814],
                vec![0.9426, 0.8800, 0.7922, 0.7056],
                vec![0.9400, 0.8782, 0.8152, 0.7502],
            ],
        }
    }

    pub fn uniform(n_classifiers: usize, n_types: usize, value: f64) -> Result<Self> {
        Self::new(vec![vec![value; n_types]; n_classifiers])
    }

    pub fn n_classifiers(&self) -> usize {
        self.acc.len()
    }

    pub fn n_types(&self) -> usize {
        self.acc[0].len()
    }

    pub fn get(&self, j: ClassifierId, i: AdversaryTypeId) -> f64 {
        self.acc[j.0][i.0]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.acc
    }

    /// Cells where a more hardened classifier is less accurate than its
    /// predecessor. Reported, never enforced.
    pub fn monotonicity_violations(&self) -> Vec<(ClassifierId, AdversaryTypeId)> {
        let mut out = Vec::new();
        for j in 1..self.n_classifiers() {
            for i in 0..self.n_types() {
                if self.acc[j][i] < self.acc[j - 1][i] {
                    out.push((ClassifierId(j), AdversaryTypeId(i)));
                }
            }
        }
        out
    }
}

impl TryFrom<Vec<Vec<f64>>> for AccuracyMatrix {
    type Error = Error;
    fn try_from(v: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AccuracyMatrix> for Vec<Vec<f64>> {
    fn from(m: AccuracyMatrix) -> Self {
        m.acc
    }
}

/// Values and costs. Matrices are indexed `[classifier][type]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffConfig {
    pub value_learner: Vec<Vec<f64>>,
    pub value_adversary: Vec<Vec<f64>>,
    pub classifier_cost: Vec<f64>,
    pub type_cost: Vec<f64>,
}

impl PayoffConfig {
    /// Unit values, zero costs.
    pub fn unit(n_classifiers: usize, n_types: usize) -> Self {
        Self {
            value_learner: vec![vec![1.0; n_types]; n_classifiers],
            value_adversary: vec![vec![1.0; n_types]; n_classifiers],
            classifier_cost: vec![0.0; n_classifiers],
            type_cost: vec![0.0; n_types],
        }
    }

    pub fn with_classifier_cost(mut self, cost: Vec<f64>) -> Self {
        self.classifier_cost = cost;
        self
    }

    pub fn with_type_cost(mut self, cost: Vec<f64>) -> Self {
        self.type_cost = cost;
        self
    }

    fn validate(&self, n_classifiers: usize, n_types: usize) -> Result<()> {
        for (key, m) in [
            ("game.payoff.value_learner", &self.value_learner),
            ("game.payoff.value_adversary", &self.value_adversary),
        ] {
            if m.len() != n_classifiers {
                return Err(Error::validation(
                    key,
                    format!("has {} rows, expected {n_classifiers} (one per classifier)", m.len()),
                ));
            }
            for (j, row) in m.iter().enumerate() {
                if row.len() != n_types {
                    return Err(Error::validation(
                        format!("{key}[{j}]"),
                        format!("has {} entries, expected {n_types} (one per type)", row.len()),
                    ));
                }
                if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                    return Err(Error::validation(format!("{key}[{j}][{i}]"), "must be finite"));
                }
            }
        }
        for (key, v, n) in [
            ("game.payoff.classifier_cost", &self.classifier_cost, n_classifiers),
            ("game.payoff.type_cost", &self.type_cost, n_types),
        ] {
            if v.len() != n {
                return Err(Error::validation(key, format!("has {} entries, expected {n}", v.len())));
            }
            if let Some(k) = v.iter().position(|c| !c.is_finite() || *c < 0.0) {
                return Err(Error::validation(
                    format!("{key}[{k}]"),
                    "costs must be finite and >= 0",
                ));
            }
        }
        Ok(())
    }
}

/// A fully validated game: accuracy oracle plus payoffs with matching dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    accuracy: AccuracyMatrix,
    payoff: PayoffConfig,
}

impl GameConfig {
    pub fn new(accuracy: AccuracyMatrix, payoff: PayoffConfig) -> Result<Self> {
        payoff.validate(accuracy.n_classifiers(), accuracy.n_types())?;
        Ok(Self { accuracy, payoff })
    }

    /// Reference accuracies with unit values and zero costs.
    pub fn reference() -> Self {
        let accuracy = AccuracyMatrix::reference();
        let payoff = PayoffConfig::unit(accuracy.n_classifiers(), accuracy.n_types());
        Self { accuracy, payoff }
    }

    pub fn n_classifiers(&self) -> usize {
        self.accuracy.n_classifiers()
    }

    pub fn n_types(&self) -> usize {
        self.accuracy.n_types()
    }

    pub fn accuracy(&self) -> &AccuracyMatrix {
        &self.accuracy
    }

    pub fn payoff(&self) -> &PayoffConfig {
        &self.payoff
    }

    pub fn classifiers(&self) -> impl Iterator<Item = ClassifierId> {
        (0..self.n_classifiers()).map(ClassifierId)
    }

    pub fn types(&self) -> impl Iterator<Item = AdversaryTypeId> {
        (0..self.n_types()).map(AdversaryTypeId)
    }

    pub(crate) fn check_strategy(&self, s: &Strategy) -> Result<()> {
        if s.len() != self.n_classifiers() {
            return Err(Error::dimension("strategy", self.n_classifiers(), s.len()));
        }
        Ok(())
    }

    pub(crate) fn check_type(&self, theta: AdversaryTypeId) -> Result<()> {
        if theta.0 >= self.n_types() {
            return Err(Error::dimension("adversary type", self.n_types(), theta.0 + 1));
        }
        Ok(())
    }

    pub(crate) fn check_belief(&self, p: &TypeDistribution) -> Result<()> {
        if p.len() != self.n_types() {
            return Err(Error::dimension("type distribution", self.n_types(), p.len()));
        }
        Ok(())
    }

    /// Learner payoff for one query answered by `j` with correctness `correct`.
    pub fn learner_payoff(&self, j: ClassifierId, i: AdversaryTypeId, correct: f64) -> f64 {
        correct * self.payoff.value_learner[j.0][i.0] - self.payoff.classifier_cost[j.0]
    }

    /// Adversary payoff for one query answered by `j` with correctness `correct`.
    pub fn adversary_payoff(&self, j: ClassifierId, i: AdversaryTypeId, correct: f64) -> f64 {
        (1.0 - correct) * self.payoff.value_adversary[j.0][i.0] - self.payoff.type_cost[i.0]
    }
}

/// Learner and adversary utility, accumulated together.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UtilityPair {
    pub learner: f64,
    pub adversary: f64,
}

impl UtilityPair {
    pub fn new(learner: f64, adversary: f64) -> Self {
        Self { learner, adversary }
    }
}

impl Add for UtilityPair {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.learner + rhs.learner, self.adversary + rhs.adversary)
    }
}

impl AddAssign for UtilityPair {
    fn add_assign(&mut self, rhs: Self) {
        self.learner += rhs.learner;
        self.adversary += rhs.adversary;
    }
}

pub fn learner_utility(s: &Strategy, theta: AdversaryTypeId, cfg: &GameConfig) -> Result<f64> {
    cfg.check_strategy(s)?;
    cfg.check_type(theta)?;
    Ok(cfg
        .classifiers()
        .map(|j| s.prob(j) * cfg.learner_payoff(j, theta, cfg.accuracy.get(j, theta)))
        .sum())
}

pub fn expected_learner_utility(s: &Strategy, belief: &TypeDistribution, cfg: &GameConfig) -> Result<f64> {
    cfg.check_belief(belief)?;
    // keeps the degenerate-belief case bit-identical to learner_utility
    if let Some(i) = belief.as_pure() {
        return learner_utility(s, i, cfg);
    }
    let mut total = 0.0;
    for i in cfg.types() {
        total += belief.prob(i) * learner_utility(s, i, cfg)?;
    }
    Ok(total)
}

pub fn adversary_utility(s: &Strategy, theta: AdversaryTypeId, cfg: &GameConfig) -> Result<f64> {
    cfg.check_strategy(s)?;
    cfg.check_type(theta)?;
    Ok(cfg
        .classifiers()
        .map(|j| s.prob(j) * cfg.adversary_payoff(j, theta, cfg.accuracy.get(j, theta)))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pure(j: usize) -> Strategy {
        Strategy::pure(3, ClassifierId(j))
    }

    #[test]
    fn learner_utility_pure_clean() {
        let cfg = GameConfig::reference();
        let u = learner_utility(&pure(0), AdversaryTypeId(0), &cfg).unwrap();
        assert_abs_diff_eq!(u, 0.9392, epsilon = 1e-12);
    }

    #[test]
    fn learner_utility_zero_values() {
        let acc = AccuracyMatrix::reference();
        let mut payoff = PayoffConfig::unit(3, 4);
        payoff.value_learner = vec![vec![0.0; 4]; 3];
        let cfg = GameConfig::new(acc, payoff).unwrap();
        for j in 0..3 {
            for i in 0..4 {
                assert_eq!(learner_utility(&pure(j), AdversaryTypeId(i), &cfg).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn learner_utility_mixed_adv2() {
        let cfg = GameConfig::reference();
        let s = Strategy::new(vec![0.5, 0.5, 0.0]).unwrap();
        let u = learner_utility(&s, AdversaryTypeId(2), &cfg).unwrap();
        assert_abs_diff_eq!(u, 0.7814, epsilon = 1e-12);
    }

    #[test]
    fn expected_utility_uniform_belief() {
        let cfg = GameConfig::reference();
        let u = expected_learner_utility(&pure(2), &TypeDistribution::uniform(4), &cfg).unwrap();
        assert_abs_diff_eq!(u, 0.8459, epsilon = 1e-12);
    }

    #[test]
    fn expected_utility_cost_only() {
        let acc = AccuracyMatrix::reference();
        let mut payoff = PayoffConfig::unit(3, 4).with_classifier_cost(vec![0.1; 3]);
        payoff.value_learner = vec![vec![0.0; 4]; 3];
        let cfg = GameConfig::new(acc, payoff).unwrap();
        let s = Strategy::new(vec![0.2, 0.3, 0.5]).unwrap();
        let p = TypeDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_abs_diff_eq!(expected_learner_utility(&s, &p, &cfg).unwrap(), -0.1, epsilon = 1e-12);
    }

    #[test]
    fn expected_utility_degenerate_belief_is_exact() {
        let cfg = GameConfig::reference();
        let s = Strategy::new(vec![0.2, 0.3, 0.5]).unwrap();
        for i in 0..4 {
            let p = TypeDistribution::pure(4, AdversaryTypeId(i));
            assert_eq!(
                expected_learner_utility(&s, &p, &cfg).unwrap(),
                learner_utility(&s, AdversaryTypeId(i), &cfg).unwrap()
            );
        }
    }

    #[test]
    fn adversary_utility_examples() {
        let cfg = GameConfig::reference();
        let u = adversary_utility(&pure(2), AdversaryTypeId(2), &cfg).unwrap();
        assert_abs_diff_eq!(u, 0.1848, epsilon = 1e-12);

        let payoff = PayoffConfig::unit(3, 4).with_type_cost(vec![0.0, 0.0, 0.0, 0.1]);
        let cfg = GameConfig::new(AccuracyMatrix::reference(), payoff).unwrap();
        let u = adversary_utility(&pure(0), AdversaryTypeId(3), &cfg).unwrap();
        assert_abs_diff_eq!(u, 0.2186, epsilon = 1e-12);

        let mut payoff = PayoffConfig::unit(3, 4);
        payoff.value_adversary = vec![vec![0.0; 4]; 3];
        let cfg = GameConfig::new(AccuracyMatrix::reference(), payoff).unwrap();
        let s = Strategy::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(adversary_utility(&s, AdversaryTypeId(1), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let cfg = GameConfig::reference();
        let s = Strategy::uniform(2);
        assert!(matches!(
            learner_utility(&s, AdversaryTypeId(0), &cfg),
            Err(Error::Dimension { .. })
        ));
        assert!(learner_utility(&pure(0), AdversaryTypeId(4), &cfg).is_err());
        assert!(expected_learner_utility(&pure(0), &TypeDistribution::uniform(3), &cfg).is_err());
    }

    #[test]
    fn reference_matrix_monotonicity_is_reported_not_enforced() {
        let m = AccuracyMatrix::reference();
        let v = m.monotonicity_violations();
        assert!(v.contains(&(ClassifierId(2), AdversaryTypeId(0))));
        assert!(v.contains(&(ClassifierId(2), AdversaryTypeId(1))));
    }

    #[test]
    fn accuracy_bounds() {
        let err = AccuracyMatrix::new(vec![vec![1.2]]).unwrap_err();
        assert!(err.to_string().contains("accuracy out of [0,1]"));
    }

    #[test]
    fn simplex_rejects_bad_sum() {
        assert!(Strategy::new(vec![0.5, 0.4]).is_err());
        assert!(TypeDistribution::new(vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn concentrated_distribution() {
        let p = TypeDistribution::concentrated(4, AdversaryTypeId(2), 0.98).unwrap();
        assert_eq!(p.prob(AdversaryTypeId(2)), 0.98);
        let total: f64 = p.as_slice().iter().sum();
        assert!((total - 1.0).abs() <= SIMPLEX_TOLERANCE);
        let q = TypeDistribution::concentrated(4, AdversaryTypeId(3), 0.98).unwrap();
        assert_eq!(q.prob(AdversaryTypeId(3)), 0.98);
    }
}
