use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::belief::{BayesPrior, UpdateRule};
use crate::error::{Error, Result};
use crate::game::{AccuracyMatrix, GameConfig, PayoffConfig, TypeDistribution};
use crate::oracle::ClassificationMode;
use crate::self_play::{AdversaryMode, RolloutModel, SelectionKind, SelfPlayConfig};

/// Samples per cell for the accuracy check.
pub const DEFAULT_SAMPLES: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    SelectionTable,
    KlConvergence,
    UtilityComparison,
    AccuracyCheck,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::SelectionTable => "selection_table",
            Preset::KlConvergence => "kl_convergence",
            Preset::UtilityComparison => "utility_comparison",
            Preset::AccuracyCheck => "accuracy_check",
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub game: GameConfig,
    pub run: SelfPlayConfig,
    pub repetitions: usize,
    pub output_dir: PathBuf,
    pub preset: Option<Preset>,
    /// Draw a fresh random true distribution per repetition in the KL preset.
    pub random_true_p: bool,
    /// Classifications per cell in the accuracy check.
    pub samples: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let game = GameConfig::reference();
        let run = SelfPlayConfig::defaults(game.n_types());
        Self {
            game,
            run,
            repetitions: 10,
            output_dir: PathBuf::from("out"),
            preset: None,
            random_true_p: true,
            samples: DEFAULT_SAMPLES,
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSpec {
    game: RawGame,
    run: RawRun,
    experiment: RawExperiment,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawGame {
    n_classifiers: Option<usize>,
    n_types: Option<usize>,
    /// `[classifier][type]`
    accuracy: Option<Vec<Vec<f64>>>,
    payoff: RawPayoff,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawPayoff {
    value_learner: Option<Vec<Vec<f64>>>,
    value_adversary: Option<Vec<Vec<f64>>>,
    classifier_cost: Option<Vec<f64>>,
    type_cost: Option<Vec<f64>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawRun {
    h: Option<usize>,
    n_trials: Option<usize>,
    traversals_per_trial: Option<usize>,
    q: Option<usize>,
    c: Option<f64>,
    selection: Option<SelectionKind>,
    update_rule: Option<UpdateRule>,
    bayes_prior: Option<BayesPrior>,
    adversary_mode: Option<AdversaryMode>,
    rollout_model: Option<RolloutModel>,
    classification_mode: Option<ClassificationMode>,
    true_p: Option<Vec<f64>>,
    prior: Option<Vec<f64>>,
    seed: Option<i64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawExperiment {
    repetitions: Option<usize>,
    output_dir: Option<String>,
    preset: Option<Preset>,
    random_true_p: Option<bool>,
    samples: Option<usize>,
}

fn distribution(key: &str, v: Option<Vec<f64>>, n_types: usize) -> Result<TypeDistribution> {
    match v {
        None => Ok(TypeDistribution::uniform(n_types)),
        Some(v) => {
            if v.len() != n_types {
                return Err(Error::validation(
                    key,
                    format!("has {} entries, expected {n_types} (one per type)", v.len()),
                ));
            }
            TypeDistribution::new(v).map_err(|e| match e {
                Error::Validation { message, .. } => Error::validation(key, message),
                other => other,
            })
        }
    }
}

fn resolve_game(raw: RawGame) -> Result<GameConfig> {
    let reference = AccuracyMatrix::reference();
    let accuracy = match raw.accuracy {
        Some(rows) => AccuracyMatrix::new(rows)?,
        None => {
            let nc = raw.n_classifiers.unwrap_or(reference.n_classifiers());
            let nt = raw.n_types.unwrap_or(reference.n_types());
            if (nc, nt) != (reference.n_classifiers(), reference.n_types()) {
                return Err(Error::validation(
                    "game.accuracy",
                    format!(
                        "required for a {nc}x{nt} game; the built-in matrix is {}x{}",
                        reference.n_classifiers(),
                        reference.n_types()
                    ),
                ));
            }
            reference
        }
    };
    if let Some(nc) = raw.n_classifiers {
        if nc != accuracy.n_classifiers() {
            return Err(Error::validation(
                "game.n_classifiers",
                format!(
                    "is {nc} but game.accuracy has {} classifier rows",
                    accuracy.n_classifiers()
                ),
            ));
        }
    }
    if let Some(nt) = raw.n_types {
        if nt != accuracy.n_types() {
            return Err(Error::validation(
                "game.n_types",
                format!("is {nt} but game.accuracy has {} type columns", accuracy.n_types()),
            ));
        }
    }
    let unit = PayoffConfig::unit(accuracy.n_classifiers(), accuracy.n_types());
    let p = raw.payoff;
    let payoff = PayoffConfig {
        value_learner: p.value_learner.unwrap_or(unit.value_learner),
        value_adversary: p.value_adversary.unwrap_or(unit.value_adversary),
        classifier_cost: p.classifier_cost.unwrap_or(unit.classifier_cost),
        type_cost: p.type_cost.unwrap_or(unit.type_cost),
    };
    let game = GameConfig::new(accuracy, payoff)?;
    for (j, i) in game.accuracy().monotonicity_violations() {
        log::warn!("accuracy of {j} on {i} is below that of the less hardened classifier");
    }
    Ok(game)
}

fn resolve_run(raw: RawRun, game: &GameConfig) -> Result<SelfPlayConfig> {
    let d = SelfPlayConfig::defaults(game.n_types());
    let seed = match raw.seed {
        Some(s) if s < 0 => return Err(Error::validation("run.seed", "must be >= 0")),
        Some(s) => s as u64,
        None => d.seed,
    };
    let run = SelfPlayConfig {
        h: raw.h.unwrap_or(d.h),
        n_trials: raw.n_trials.unwrap_or(d.n_trials),
        traversals_per_trial: raw.traversals_per_trial.unwrap_or(d.traversals_per_trial),
        q: raw.q.unwrap_or(d.q),
        c: raw.c.unwrap_or(d.c),
        selection: raw.selection.unwrap_or(d.selection),
        update_rule: raw.update_rule.unwrap_or(d.update_rule),
        bayes_prior: raw.bayes_prior.unwrap_or(d.bayes_prior),
        adversary_mode: raw.adversary_mode.unwrap_or(d.adversary_mode),
        rollout_model: raw.rollout_model.unwrap_or(d.rollout_model),
        classification_mode: raw.classification_mode.unwrap_or(d.classification_mode),
        true_p: distribution("run.true_p", raw.true_p, game.n_types())?,
        prior: distribution("run.prior", raw.prior, game.n_types())?,
        seed,
    };
    run.validate(game)?;
    Ok(run)
}

/// Parses a TOML experiment description. Missing fields take their defaults.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))?;
    let game = resolve_game(raw.game)?;
    let run = resolve_run(raw.run, &game)?;
    let d = ExperimentSpec::default();
    let e = raw.experiment;
    let repetitions = e.repetitions.unwrap_or(d.repetitions);
    if repetitions == 0 {
        return Err(Error::validation("experiment.repetitions", "must be >= 1"));
    }
    let samples = e.samples.unwrap_or(d.samples);
    if samples == 0 {
        return Err(Error::validation("experiment.samples", "must be >= 1"));
    }
    Ok(ExperimentSpec {
        game,
        run,
        repetitions,
        output_dir: e.output_dir.map(PathBuf::from).unwrap_or(d.output_dir),
        preset: e.preset,
        random_true_p: e.random_true_p.unwrap_or(d.random_true_p),
        samples,
    })
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_spec(&text)
}

/// Renders a spec with every field explicit. [`parse_spec`] reads it back to an equal spec.
pub fn serialize_spec(spec: &ExperimentSpec) -> Result<String> {
    let game = &spec.game;
    let payoff = game.payoff().clone();
    let run = &spec.run;
    let seed = i64::try_from(run.seed).map_err(|_| Error::validation("run.seed", "does not fit a TOML integer"))?;
    let raw = RawSpec {
        game: RawGame {
            n_classifiers: Some(game.n_classifiers()),
            n_types: Some(game.n_types()),
            accuracy: Some(game.accuracy().rows().to_vec()),
            payoff: RawPayoff {
                value_learner: Some(payoff.value_learner),
                value_adversary: Some(payoff.value_adversary),
                classifier_cost: Some(payoff.classifier_cost),
                type_cost: Some(payoff.type_cost),
            },
        },
        run: RawRun {
            h: Some(run.h),
            n_trials: Some(run.n_trials),
            traversals_per_trial: Some(run.traversals_per_trial),
            q: Some(run.q),
            c: Some(run.c),
            selection: Some(run.selection),
            update_rule: Some(run.update_rule),
            bayes_prior: Some(run.bayes_prior),
            adversary_mode: Some(run.adversary_mode),
            rollout_model: Some(run.rollout_model),
            classification_mode: Some(run.classification_mode),
            true_p: Some(run.true_p.as_slice().to_vec()),
            prior: Some(run.prior.as_slice().to_vec()),
            seed: Some(seed),
        },
        experiment: RawExperiment {
            repetitions: Some(spec.repetitions),
            output_dir: Some(spec.output_dir.display().to_string()),
            preset: spec.preset,
            random_true_p: Some(spec.random_true_p),
            samples: Some(spec.samples),
        },
    };
    toml::to_string(&raw).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let spec = parse_spec("").unwrap();
        assert_eq!(spec, ExperimentSpec::default());
        assert_eq!(spec.game.n_classifiers(), 3);
        assert_eq!(spec.game.n_types(), 4);
        assert_eq!(spec.run.h, 20);
        assert_eq!(spec.run.n_trials, 10);
        assert_eq!(spec.run.q, 10);
        assert_eq!(spec.run.c, 2.0);
    }

    #[test]
    fn accuracy_out_of_range() {
        let err = parse_spec("[game]\naccuracy = [[1.2, 0.5]]\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("accuracy out of [0,1]"), "{msg}");
        assert!(msg.contains("game.accuracy[0][0]"), "{msg}");
    }

    #[test]
    fn dimension_mismatch_names_key() {
        let err = parse_spec("[game]\nn_classifiers = 3\naccuracy = [[0.9, 0.8], [0.9, 0.8]]\n").unwrap_err();
        assert!(
            matches!(&err, Error::Validation { key, .. } if key == "game.n_classifiers"),
            "{err}"
        );
    }

    #[test]
    fn payoff_dimension_mismatch() {
        let err = parse_spec("[game.payoff]\nclassifier_cost = [0.0, 0.1]\n").unwrap_err();
        assert!(
            matches!(&err, Error::Validation { key, .. } if key == "game.payoff.classifier_cost"),
            "{err}"
        );
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(parse_spec("[run]\ndepth = 3\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn bad_true_p_names_key() {
        let err = parse_spec("[run]\ntrue_p = [0.5, 0.5, 0.5, 0.5]\n").unwrap_err();
        assert!(
            matches!(&err, Error::Validation { key, .. } if key == "run.true_p"),
            "{err}"
        );
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_spec("/nonexistent/spec.toml"), Err(Error::Io { .. })));
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
[game]
accuracy = [[0.9, 0.5], [0.8, 0.7]]
[game.payoff]
classifier_cost = [0.0, 0.05]
[run]
h = 6
selection = "bne"
update_rule = "bayesian_update"
classification_mode = "expectation"
true_p = [0.25, 0.75]
seed = 17
[experiment]
repetitions = 3
preset = "kl_convergence"
"#;
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec.game.n_classifiers(), 2);
        assert_eq!(spec.run.selection, SelectionKind::Bne);
        assert_eq!(spec.run.update_rule, UpdateRule::BayesianUpdate);
        assert_eq!(spec.run.seed, 17);
        assert_eq!(spec.preset, Some(Preset::KlConvergence));
        let back = parse_spec(&serialize_spec(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
