//! Repeated-game search tree: single plays, tree traversal and rollouts.
//!
//! The learner moves at even depths and the adversary at odd depths, so a
//! learner/adversary pair of moves is one game. Each traversal ends in exactly
//! one realized play at a terminal position, whose utility pair is
//! backtracked unchanged along the path.

use crate::belief::BeliefState;
use crate::error::{Error, Result};
use crate::game::{
    expected_learner_utility, AdversaryTypeId, ClassifierId, GameConfig, Strategy, TypeDistribution, UtilityPair,
};
use crate::oracle::{classify, generate_queries};
use crate::rng::RandomSource;
use crate::select::{
    adversary_best_response, bne_select, ucb_select_adversary, ucb_select_learner, NodeStats, SelectionMethod,
};
use crate::self_play::{AdversaryMode, RolloutModel, SelfPlayConfig};

/// Added after shifting learner rollout utilities so the worst classifier keeps
/// a small positive weight.
pub const ROLLOUT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mover {
    Learner,
    Adversary,
}

impl Mover {
    pub fn at_depth(depth: usize) -> Self {
        if depth.is_multiple_of(2) {
            Mover::Learner
        } else {
            Mover::Adversary
        }
    }

    pub fn other(self) -> Self {
        match self {
            Mover::Learner => Mover::Adversary,
            Mover::Adversary => Mover::Learner,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Classifier(ClassifierId),
    Type(AdversaryTypeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionState {
    Unvisited,
    Visited,
    FullyExpanded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameTreeNode {
    pub depth: usize,
    pub mover: Mover,
    pub incoming: Option<Move>,
    pub value_sum: UtilityPair,
    pub visit_count: u64,
    /// Indexed by action; empty until expanded.
    pub children: Vec<GameTreeNode>,
    pub state: ExpansionState,
    /// Value of the rollout performed when this node was first visited.
    pub first_value: Option<UtilityPair>,
}

impl GameTreeNode {
    pub fn root() -> Self {
        Self::new(0, None)
    }

    fn new(depth: usize, incoming: Option<Move>) -> Self {
        Self {
            depth,
            mover: Mover::at_depth(depth),
            incoming,
            value_sum: UtilityPair::default(),
            visit_count: 0,
            children: Vec::new(),
            state: ExpansionState::Unvisited,
            first_value: None,
        }
    }

    fn expand(&mut self, cfg: &GameConfig) {
        let depth = self.depth + 1;
        self.children = match self.mover {
            Mover::Learner => cfg
                .classifiers()
                .map(|j| GameTreeNode::new(depth, Some(Move::Classifier(j))))
                .collect(),
            Mover::Adversary => cfg
                .types()
                .map(|i| GameTreeNode::new(depth, Some(Move::Type(i))))
                .collect(),
        };
        self.state = ExpansionState::FullyExpanded;
    }

    fn record(&mut self, value: UtilityPair) {
        self.value_sum += value;
        self.visit_count += 1;
        if self.first_value.is_none() {
            self.first_value = Some(value);
        }
        if self.state == ExpansionState::Unvisited {
            self.state = ExpansionState::Visited;
        }
    }

    /// Statistics of the children for the mover's own utility component.
    pub fn child_stats(&self) -> NodeStats {
        NodeStats {
            parent_visits: self.visit_count,
            action_visits: self.children.iter().map(|c| c.visit_count).collect(),
            action_value_sums: self
                .children
                .iter()
                .map(|c| match self.mover {
                    Mover::Learner => c.value_sum.learner,
                    Mover::Adversary => c.value_sum.adversary,
                })
                .collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(GameTreeNode::node_count).sum::<usize>()
    }

    /// Structural bookkeeping checks over the whole subtree.
    pub fn check_invariants(&self, cfg: &GameConfig, h: usize) -> std::result::Result<(), String> {
        if self.depth > h {
            return Err(format!("node at depth {} beyond cutoff {h}", self.depth));
        }
        if self.mover != Mover::at_depth(self.depth) {
            return Err(format!("mover {:?} wrong for depth {}", self.mover, self.depth));
        }
        if self.state == ExpansionState::FullyExpanded {
            let expected = match self.mover {
                Mover::Learner => cfg.n_classifiers(),
                Mover::Adversary => cfg.n_types(),
            };
            if self.children.len() != expected {
                return Err(format!(
                    "expanded node has {} of {expected} children",
                    self.children.len()
                ));
            }
            let child_visits: u64 = self.children.iter().map(|c| c.visit_count).sum();
            if self.visit_count != child_visits + 1 {
                return Err(format!(
                    "depth {}: {} visits but children account for {}",
                    self.depth, self.visit_count, child_visits
                ));
            }
            let mut expected_value = self.first_value.unwrap_or_default();
            for c in &self.children {
                expected_value += c.value_sum;
                if c.depth != self.depth + 1 || c.mover == self.mover {
                    return Err("child does not alternate".into());
                }
            }
            let tol = 1e-9 * (1.0 + self.visit_count as f64);
            if (expected_value.learner - self.value_sum.learner).abs() > tol
                || (expected_value.adversary - self.value_sum.adversary).abs() > tol
            {
                return Err(format!("depth {}: value sum does not match subtree", self.depth));
            }
        } else if !self.children.is_empty() {
            return Err("unexpanded node has children".into());
        }
        for c in &self.children {
            c.check_invariants(cfg, h)?;
        }
        Ok(())
    }
}

/// Outcome of one realized play.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayRecord {
    pub chosen_strategy: Strategy,
    pub realized_type: AdversaryTypeId,
    pub per_query_classifier: Vec<ClassifierId>,
    pub per_query_correct: Vec<f64>,
    pub utilities: UtilityPair,
}

const TYPE_STREAM: u64 = 1;
const LABEL_STREAM: u64 = 2;
const DRAW_STREAM: u64 = 3;
const CLASSIFY_STREAM: u64 = 4;

/// Randomness and bandit statistics carried across plays of one run.
///
/// Separate streams keep the realized type sequence identical for any two
/// runs with the same seed and number of plays, whatever the learner does.
#[derive(Debug, Clone)]
pub struct PlayState {
    types: RandomSource,
    labels: RandomSource,
    draws: RandomSource,
    classify: RandomSource,
    pub learner_stats: NodeStats,
    pub adversary_stats: NodeStats,
}

impl PlayState {
    pub fn new(cfg: &GameConfig, seed: u64) -> Self {
        let base = RandomSource::new(seed);
        Self {
            types: base.derive(TYPE_STREAM),
            labels: base.derive(LABEL_STREAM),
            draws: base.derive(DRAW_STREAM),
            classify: base.derive(CLASSIFY_STREAM),
            learner_stats: NodeStats::new(cfg.n_classifiers()),
            adversary_stats: NodeStats::new(cfg.n_types()),
        }
    }
}

/// One play: the learner commits to a strategy from the current belief, the
/// adversary picks a type, `q` queries of that type are classified and both
/// sides receive per-query average utilities.
pub fn game_play(
    belief: &BeliefState,
    cfg: &GameConfig,
    run: &SelfPlayConfig,
    state: &mut PlayState,
) -> Result<PlayRecord> {
    let strategy = match run.selection_method() {
        SelectionMethod::Bne => bne_select(belief.p_hat(), cfg)?.0,
        SelectionMethod::Ucb { c } => Strategy::pure(cfg.n_classifiers(), ucb_select_learner(&state.learner_stats, c)?),
    };
    game_play_with(strategy, belief, cfg, run, state)
}

/// [`game_play`] with the learner's strategy given.
pub fn game_play_with(
    strategy: Strategy,
    _belief: &BeliefState,
    cfg: &GameConfig,
    run: &SelfPlayConfig,
    state: &mut PlayState,
) -> Result<PlayRecord> {
    cfg.check_strategy(&strategy)?;
    let theta = match run.adversary_mode {
        AdversaryMode::Sampled => AdversaryTypeId(state.types.categorical(run.true_p.as_slice())),
        AdversaryMode::BestResponse => match run.selection_method() {
            SelectionMethod::Bne => adversary_best_response(&strategy, cfg)?,
            SelectionMethod::Ucb { c } => ucb_select_adversary(&state.adversary_stats, c)?,
        },
    };
    let queries = generate_queries(theta, run.q, &mut state.labels);
    let mut per_query_classifier = Vec::with_capacity(queries.len());
    let mut per_query_correct = Vec::with_capacity(queries.len());
    let mut total = UtilityPair::default();
    for query in &queries {
        let j = ClassifierId(state.draws.categorical(strategy.as_slice()));
        let correct = classify(j, query, cfg, run.classification_mode, &mut state.classify);
        total += UtilityPair::new(
            cfg.learner_payoff(j, theta, correct),
            cfg.adversary_payoff(j, theta, correct),
        );
        per_query_classifier.push(j);
        per_query_correct.push(correct);
    }
    let n = queries.len().max(1) as f64;
    let utilities = UtilityPair::new(total.learner / n, total.adversary / n);
    if let Some(j) = strategy.as_pure() {
        state.learner_stats.record(j.0, utilities.learner);
    }
    state.adversary_stats.record(theta.0, utilities.adversary);
    Ok(PlayRecord {
        chosen_strategy: strategy,
        realized_type: theta,
        per_query_classifier,
        per_query_correct,
        utilities,
    })
}

/// Mutable state shared by one trial's traversals.
pub struct SearchContext<'a> {
    cfg: &'a GameConfig,
    run: &'a SelfPlayConfig,
    belief: &'a BeliefState,
    plays: &'a mut PlayState,
    rng: &'a mut RandomSource,
    learner_rollout_weights: Vec<f64>,
    adversary_rollout_weights: Vec<f64>,
    root_action: Option<ClassifierId>,
    records: Vec<PlayRecord>,
}

impl<'a> SearchContext<'a> {
    pub fn new(
        cfg: &'a GameConfig,
        run: &'a SelfPlayConfig,
        belief: &'a BeliefState,
        plays: &'a mut PlayState,
        rng: &'a mut RandomSource,
    ) -> Result<Self> {
        let learner_rollout_weights = learner_rollout_weights(belief.p_hat(), cfg)?;
        let adversary_rollout_weights = match run.rollout_model {
            RolloutModel::TrueDistribution => run.true_p.as_slice().to_vec(),
            RolloutModel::Belief => belief.p_hat().as_slice().to_vec(),
        };
        Ok(Self {
            cfg,
            run,
            belief,
            plays,
            rng,
            learner_rollout_weights,
            adversary_rollout_weights,
            root_action: None,
            records: Vec::new(),
        })
    }

    /// Forces the learner's move at the root in the next rollout through it.
    pub fn with_root_action(mut self, action: ClassifierId) -> Self {
        self.root_action = Some(action);
        self
    }

    pub fn records(&self) -> &[PlayRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<PlayRecord> {
        self.records
    }

    fn play(&mut self) -> Result<UtilityPair> {
        let rec = game_play(self.belief, self.cfg, self.run, self.plays)?;
        let u = rec.utilities;
        self.records.push(rec);
        Ok(u)
    }
}

/// Rollout weights for learner moves: expected utility of each pure
/// strategy under `belief`, shifted so the minimum becomes [`ROLLOUT_EPSILON`].
pub fn learner_rollout_weights(belief: &TypeDistribution, cfg: &GameConfig) -> Result<Vec<f64>> {
    let n = cfg.n_classifiers();
    let utils = cfg
        .classifiers()
        .map(|j| expected_learner_utility(&Strategy::pure(n, j), belief, cfg))
        .collect::<Result<Vec<_>>>()?;
    let min = utils.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(utils.iter().map(|u| u - min + ROLLOUT_EPSILON).collect())
}

/// One traversal from `node`. Returns the utility pair backtracked from the
/// single play it ends in.
pub fn tree_traverse(node: &mut GameTreeNode, ctx: &mut SearchContext<'_>) -> Result<UtilityPair> {
    if node.depth >= ctx.run.h {
        let value = ctx.play()?;
        node.record(value);
        return Ok(value);
    }
    match node.state {
        ExpansionState::FullyExpanded => {
            let k = select_best_child(node, ctx)?;
            let value = tree_traverse(&mut node.children[k], ctx)?;
            node.record(value);
            Ok(value)
        }
        ExpansionState::Visited => {
            node.expand(ctx.cfg);
            let k = ctx.rng.index(node.children.len());
            let child = &mut node.children[k];
            let value = rollout(child.depth, ctx)?;
            child.record(value);
            node.record(value);
            Ok(value)
        }
        ExpansionState::Unvisited => {
            let value = rollout(node.depth, ctx)?;
            node.record(value);
            Ok(value)
        }
    }
}

/// Index of the child to descend into. Only valid on expanded nodes.
pub fn select_best_child(node: &GameTreeNode, ctx: &SearchContext<'_>) -> Result<usize> {
    if node.state != ExpansionState::FullyExpanded {
        return Err(Error::Logic(format!(
            "select_best_child on {:?} node at depth {}",
            node.state, node.depth
        )));
    }
    if node.children.len() == 1 {
        return Ok(0);
    }
    match ctx.run.selection_method() {
        SelectionMethod::Bne => match node.mover {
            Mover::Learner => {
                let (s, _) = bne_select(ctx.belief.p_hat(), ctx.cfg)?;
                s.as_pure()
                    .map(|j| j.0)
                    .ok_or_else(|| Error::Logic("best response is not pure".into()))
            }
            Mover::Adversary => {
                let observed = match node.incoming {
                    Some(Move::Classifier(j)) => Strategy::pure(ctx.cfg.n_classifiers(), j),
                    _ => bne_select(ctx.belief.p_hat(), ctx.cfg)?.0,
                };
                Ok(adversary_best_response(&observed, ctx.cfg)?.0)
            }
        },
        SelectionMethod::Ucb { c } => {
            let stats = node.child_stats();
            match node.mover {
                Mover::Learner => Ok(ucb_select_learner(&stats, c)?.0),
                Mover::Adversary => Ok(ucb_select_adversary(&stats, c)?.0),
            }
        }
    }
}

/// Random playout from a position at `depth` down to the cutoff, where one
/// play is realized. Positions below the tree are not stored.
pub fn rollout(depth: usize, ctx: &mut SearchContext<'_>) -> Result<UtilityPair> {
    let mut depth = depth;
    while depth < ctx.run.h {
        match Mover::at_depth(depth) {
            Mover::Learner => {
                if depth == 0 {
                    if let Some(j) = ctx.root_action.take() {
                        log::trace!("root move forced to {j}");
                        depth += 1;
                        continue;
                    }
                }
                ctx.rng.categorical(&ctx.learner_rollout_weights);
            }
            Mover::Adversary => {
                ctx.rng.categorical(&ctx.adversary_rollout_weights);
            }
        }
        depth += 1;
    }
    ctx.play()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::UpdateRule;
    use crate::game::{AccuracyMatrix, PayoffConfig};
    use crate::oracle::ClassificationMode;
    use crate::self_play::SelectionKind;
    use approx::assert_abs_diff_eq;

    fn setup(h: usize) -> (GameConfig, SelfPlayConfig, BeliefState) {
        let cfg = GameConfig::reference();
        let mut run = SelfPlayConfig::defaults(4);
        run.h = h;
        let belief = BeliefState::uniform(3, 4, UpdateRule::FictitiousPlay);
        (cfg, run, belief)
    }

    #[test]
    fn zero_depth_root_is_a_single_play() {
        let (cfg, run, belief) = setup(0);
        let mut plays = PlayState::new(&cfg, 3);
        let mut rng = RandomSource::new(3);
        let mut ctx = SearchContext::new(&cfg, &run, &belief, &mut plays, &mut rng).unwrap();
        let mut root = GameTreeNode::root();
        let v = tree_traverse(&mut root, &mut ctx).unwrap();
        assert_eq!(ctx.records().len(), 1);
        assert_eq!(ctx.records()[0].utilities, v);
    }

    #[test]
    fn fresh_root_gets_one_rollout() {
        let (cfg, run, belief) = setup(4);
        let mut plays = PlayState::new(&cfg, 3);
        let mut rng = RandomSource::new(3);
        let mut ctx = SearchContext::new(&cfg, &run, &belief, &mut plays, &mut rng).unwrap();
        let mut root = GameTreeNode::root();
        tree_traverse(&mut root, &mut ctx).unwrap();
        assert_eq!(root.visit_count, 1);
        assert_eq!(root.state, ExpansionState::Visited);
        assert!(root.children.is_empty());
        assert_eq!(ctx.records().len(), 1);
    }

    #[test]
    fn game_play_expectation_example() {
        let (cfg, mut run, belief) = setup(2);
        run.classification_mode = ClassificationMode::Expectation;
        run.true_p = TypeDistribution::pure(4, AdversaryTypeId(0));
        let mut state = PlayState::new(&cfg, 0);
        let rec = game_play_with(Strategy::pure(3, ClassifierId(0)), &belief, &cfg, &run, &mut state).unwrap();
        assert_abs_diff_eq!(rec.utilities.learner, 0.9392, epsilon = 1e-12);
        assert_abs_diff_eq!(rec.utilities.adversary, 0.0608, epsilon = 1e-12);
        assert_eq!(rec.per_query_correct.len(), run.q);
    }

    #[test]
    fn game_play_perfect_classifier_single_query() {
        let payoff = PayoffConfig::unit(1, 1).with_classifier_cost(vec![0.25]);
        let cfg = GameConfig::new(AccuracyMatrix::uniform(1, 1, 1.0).unwrap(), payoff).unwrap();
        let mut run = SelfPlayConfig::defaults(1);
        run.q = 1;
        let belief = BeliefState::uniform(1, 1, UpdateRule::FictitiousPlay);
        let mut state = PlayState::new(&cfg, 11);
        let rec = game_play(&belief, &cfg, &run, &mut state).unwrap();
        assert_eq!(rec.utilities.learner, 0.75);
    }

    #[test]
    fn game_play_cost_only() {
        let mut payoff = PayoffConfig::unit(3, 4)
            .with_classifier_cost(vec![0.05; 3])
            .with_type_cost(vec![0.02; 4]);
        payoff.value_learner = vec![vec![0.0; 4]; 3];
        payoff.value_adversary = vec![vec![0.0; 4]; 3];
        let cfg = GameConfig::new(AccuracyMatrix::reference(), payoff).unwrap();
        let run = SelfPlayConfig::defaults(4);
        let belief = BeliefState::uniform(3, 4, UpdateRule::FictitiousPlay);
        let mut state = PlayState::new(&cfg, 1);
        for _ in 0..5 {
            let rec = game_play(&belief, &cfg, &run, &mut state).unwrap();
            assert_abs_diff_eq!(rec.utilities.learner, -0.05, epsilon = 1e-12);
            assert_abs_diff_eq!(rec.utilities.adversary, -0.02, epsilon = 1e-12);
        }
    }

    #[test]
    fn select_best_child_requires_expansion() {
        let (cfg, run, belief) = setup(4);
        let mut plays = PlayState::new(&cfg, 0);
        let mut rng = RandomSource::new(0);
        let ctx = SearchContext::new(&cfg, &run, &belief, &mut plays, &mut rng).unwrap();
        let node = GameTreeNode::root();
        assert!(matches!(select_best_child(&node, &ctx), Err(Error::Logic(_))));
    }

    #[test]
    fn select_best_child_single_action() {
        let cfg = GameConfig::new(AccuracyMatrix::uniform(1, 2, 0.5).unwrap(), PayoffConfig::unit(1, 2)).unwrap();
        let run = SelfPlayConfig::defaults(2);
        let belief = BeliefState::uniform(1, 2, UpdateRule::FictitiousPlay);
        let mut plays = PlayState::new(&cfg, 0);
        let mut rng = RandomSource::new(0);
        let ctx = SearchContext::new(&cfg, &run, &belief, &mut plays, &mut rng).unwrap();
        let mut node = GameTreeNode::root();
        node.visit_count = 1;
        node.expand(&cfg);
        assert_eq!(select_best_child(&node, &ctx).unwrap(), 0);
    }

    #[test]
    fn select_best_child_ucb_prefers_unvisited() {
        let (cfg, run, belief) = setup(4);
        let mut plays = PlayState::new(&cfg, 0);
        let mut rng = RandomSource::new(0);
        let ctx = SearchContext::new(&cfg, &run, &belief, &mut plays, &mut rng).unwrap();
        let mut node = GameTreeNode::root();
        node.expand(&cfg);
        node.visit_count = 10;
        node.children[0].visit_count = 5;
        node.children[0].value_sum.learner = 100.0;
        node.children[2].visit_count = 4;
        assert_eq!(select_best_child(&node, &ctx).unwrap(), 1);
    }

    #[test]
    fn select_best_child_bne() {
        let (cfg, mut run, _) = setup(4);
        run.selection = SelectionKind::Bne;
        let belief = BeliefState::new(
            3,
            TypeDistribution::pure(4, AdversaryTypeId(2)),
            UpdateRule::FictitiousPlay,
        );
        let mut plays = PlayState::new(&cfg, 0);
        let mut rng = RandomSource::new(0);
        let ctx = SearchContext::new(&cfg, &run, &belief, &mut plays, &mut rng).unwrap();
        let mut node = GameTreeNode::root();
        node.visit_count = 1;
        node.expand(&cfg);
        assert_eq!(select_best_child(&node, &ctx).unwrap(), 2);
    }

    #[test]
    fn rollout_weights_are_shifted_utilities() {
        let cfg = GameConfig::reference();
        let w = learner_rollout_weights(&TypeDistribution::pure(4, AdversaryTypeId(2)), &cfg).unwrap();
        assert_abs_diff_eq!(w[0], ROLLOUT_EPSILON, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.7922 - 0.7706 + ROLLOUT_EPSILON, epsilon = 1e-12);
        assert_abs_diff_eq!(w[2], 0.8152 - 0.7706 + ROLLOUT_EPSILON, epsilon = 1e-12);
    }

    #[test]
    fn rollout_at_cutoff_is_one_play() {
        let (cfg, run, belief) = setup(4);
        let mut plays = PlayState::new(&cfg, 0);
        let mut rng = RandomSource::new(0);
        let mut ctx = SearchContext::new(&cfg, &run, &belief, &mut plays, &mut rng).unwrap();
        rollout(4, &mut ctx).unwrap();
        assert_eq!(ctx.records().len(), 1);
    }

    #[test]
    fn traversals_keep_bookkeeping() {
        for selection in [SelectionKind::Ucb, SelectionKind::Bne] {
            let (cfg, mut run, belief) = setup(6);
            run.selection = selection;
            let mut plays = PlayState::new(&cfg, 9);
            let mut rng = RandomSource::new(9);
            let mut ctx = SearchContext::new(&cfg, &run, &belief, &mut plays, &mut rng).unwrap();
            let mut root = GameTreeNode::root();
            let mut shadow = UtilityPair::default();
            for n in 1..=60u64 {
                shadow += tree_traverse(&mut root, &mut ctx).unwrap();
                assert_eq!(root.visit_count, n);
                assert_eq!(ctx.records().len() as u64, n);
            }
            assert_abs_diff_eq!(root.value_sum.learner, shadow.learner, epsilon = 1e-9);
            root.check_invariants(&cfg, run.h).unwrap();
        }
    }
}
