//! Canned experiments: classifier-selection table, belief convergence,
//! utility comparison against the most hardened classifier, and an oracle
//! accuracy check.

use std::fmt::Write as _;

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use super::config::{serialize_spec, ExperimentSpec, Preset};
use super::report::{Metric, ReportRow};
use crate::belief::UpdateRule;
use crate::error::Result;
use crate::game::{AdversaryTypeId, ClassifierId, Strategy, TypeDistribution};
use crate::oracle::empirical_accuracy;
use crate::rng::RandomSource;
use crate::self_play::{evaluate_fixed_policy, self_play, SelectionKind, SelfPlayConfig, SelfPlayResult};

/// Mass on the dominant type in the concentrated distributions.
pub const CONCENTRATION: f64 = 0.98;

const TRUE_P_STREAM: u64 = 200;

/// Rendered preset: report rows plus a short human-readable summary.
#[derive(Debug, Clone)]
pub struct PresetOutput {
    pub name: String,
    pub rows: Vec<ReportRow>,
    pub summary: String,
    pub manifest: String,
}

pub fn repetition_seed(base: u64, repetition: usize) -> u64 {
    base.wrapping_add(repetition as u64)
}

/// One distribution per type with [`CONCENTRATION`] of the mass on it.
pub fn concentrated_distributions(n_types: usize) -> Vec<(AdversaryTypeId, TypeDistribution)> {
    (0..n_types)
        .map(|k| {
            let t = AdversaryTypeId(k);
            (
                t,
                TypeDistribution::concentrated(n_types, t, CONCENTRATION).expect("valid concentration"),
            )
        })
        .collect()
}

/// Uniform draw from the probability simplex.
pub fn random_type_distribution(n_types: usize, rng: &mut RandomSource) -> TypeDistribution {
    let weights: Vec<f64> = (0..n_types)
        .map(|_| {
            let x: f64 = Exp1.sample(rng.inner());
            x.max(f64::MIN_POSITIVE)
        })
        .collect();
    TypeDistribution::from_weights(&weights).expect("exponential draws are positive")
}

fn heuristic_name(kind: SelectionKind) -> &'static str {
    match kind {
        SelectionKind::Ucb => "ucb",
        SelectionKind::Bne => "bne",
    }
}

fn repeat<T: Send>(spec: &ExperimentSpec, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..spec.repetitions)
        .into_par_iter()
        .map(|r| f(repetition_seed(spec.run.seed, r)))
        .collect()
}

fn run_rows(experiment: &str, seed: u64, res: &SelfPlayResult) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for (t, kl) in res.per_trial_kl.iter().enumerate() {
        rows.push(ReportRow::new(experiment, seed, Some(t + 1), Metric::Kl, *kl));
        rows.push(ReportRow::new(
            experiment,
            seed,
            Some(t + 1),
            Metric::MaxAbsError,
            res.per_trial_max_abs_error[t],
        ));
        for (j, c) in res.per_trial_conditional_kl[t].iter().enumerate() {
            rows.push(ReportRow::new(
                experiment,
                seed,
                Some(t + 1),
                Metric::ConditionalKl(j),
                *c,
            ));
        }
    }
    for (j, pct) in res.selection_percentages().iter().enumerate() {
        rows.push(ReportRow::new(experiment, seed, None, Metric::SelectionPct(j), *pct));
    }
    rows.push(ReportRow::new(
        experiment,
        seed,
        None,
        Metric::ModalClassifier,
        res.modal_classifier().0 as f64,
    ));
    rows.push(ReportRow::new(
        experiment,
        seed,
        None,
        Metric::Accuracy,
        res.overall_accuracy,
    ));
    for (i, a) in res.per_type_accuracy.iter().enumerate() {
        rows.push(ReportRow::new(experiment, seed, None, Metric::TypeAccuracy(i), *a));
    }
    rows.push(ReportRow::new(
        experiment,
        seed,
        None,
        Metric::MeanLearnerUtility,
        res.mean_learner_utility,
    ));
    rows.push(ReportRow::new(
        experiment,
        seed,
        None,
        Metric::MeanAdversaryUtility,
        res.mean_adversary_utility,
    ));
    for (i, b) in res.final_belief.as_slice().iter().enumerate() {
        rows.push(ReportRow::new(experiment, seed, None, Metric::Belief(i), *b));
    }
    rows
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn manifest(spec: &ExperimentSpec, preset: Preset) -> Result<String> {
    let mut resolved = spec.clone();
    resolved.preset = Some(preset);
    serialize_spec(&resolved)
}

/// Self-play outcomes for one (heuristic, concentrated distribution) cell.
#[derive(Debug, Clone)]
pub struct SelectionCell {
    pub heuristic: SelectionKind,
    pub concentrated: AdversaryTypeId,
    pub runs: Vec<(u64, SelfPlayResult)>,
}

impl SelectionCell {
    pub fn mean_percentages(&self) -> Vec<f64> {
        let n = self.runs.first().map_or(0, |(_, r)| r.classifier_totals().len());
        (0..n)
            .map(|j| mean(self.runs.iter().map(|(_, r)| r.selection_percentages()[j])))
            .collect()
    }

    pub fn mean_accuracy(&self) -> f64 {
        mean(self.runs.iter().map(|(_, r)| r.overall_accuracy))
    }

    /// Number of runs whose most used classifier is `j`.
    pub fn modal_count(&self, j: ClassifierId) -> usize {
        self.runs.iter().filter(|(_, r)| r.modal_classifier() == j).count()
    }
}

#[derive(Debug, Clone)]
pub struct SelectionTable {
    pub cells: Vec<SelectionCell>,
}

impl SelectionTable {
    pub fn cell(&self, heuristic: SelectionKind, concentrated: AdversaryTypeId) -> Option<&SelectionCell> {
        self.cells
            .iter()
            .find(|c| c.heuristic == heuristic && c.concentrated == concentrated)
    }
}

/// Self-play under UCB and BNE for each concentrated type distribution.
pub fn preset_selection_table(spec: &ExperimentSpec) -> Result<(SelectionTable, PresetOutput)> {
    let mut cells = Vec::new();
    let mut rows = Vec::new();
    let mut summary = String::new();
    let nc = spec.game.n_classifiers();
    let _ = writeln!(
        summary,
        "{:<5} {:<8} {} accuracy",
        "rule",
        "row",
        (0..nc).map(|j| format!("{:>8}", format!("L{j}"))).collect::<String>()
    );
    for heuristic in [SelectionKind::Ucb, SelectionKind::Bne] {
        for (k, p) in concentrated_distributions(spec.game.n_types()) {
            let mut run = spec.run.clone();
            run.selection = heuristic;
            run.true_p = p;
            let experiment = format!("table/{}/{k}", heuristic_name(heuristic));
            let runs = repeat(spec, |seed| {
                let mut r = run.clone();
                r.seed = seed;
                self_play(&spec.game, &r).map(|res| (seed, res))
            })?;
            for (seed, res) in &runs {
                rows.extend(run_rows(&experiment, *seed, res));
            }
            let cell = SelectionCell {
                heuristic,
                concentrated: k,
                runs,
            };
            let pct = cell.mean_percentages();
            let mean_exp = format!("{experiment}/mean");
            for (j, v) in pct.iter().enumerate() {
                rows.push(ReportRow::new(
                    &mean_exp,
                    spec.run.seed,
                    None,
                    Metric::SelectionPct(j),
                    *v,
                ));
            }
            rows.push(ReportRow::new(
                &mean_exp,
                spec.run.seed,
                None,
                Metric::Accuracy,
                cell.mean_accuracy(),
            ));
            let _ = writeln!(
                summary,
                "{:<5} {:<8} {} {:.4}",
                heuristic_name(heuristic),
                k.to_string(),
                pct.iter().map(|v| format!("{v:>7.2}%")).collect::<String>(),
                cell.mean_accuracy()
            );
            cells.push(cell);
        }
    }
    let output = PresetOutput {
        name: Preset::SelectionTable.name().into(),
        rows,
        summary,
        manifest: manifest(spec, Preset::SelectionTable)?,
    };
    Ok((SelectionTable { cells }, output))
}

#[derive(Debug, Clone)]
pub struct KlConvergence {
    pub true_p: Vec<TypeDistribution>,
    /// `[run][trial]`
    pub fictitious_play: Vec<Vec<f64>>,
    pub bayesian_update: Vec<Vec<f64>>,
}

fn mean_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let n = curves.first().map_or(0, Vec::len);
    (0..n).map(|t| mean(curves.iter().map(|c| c[t]))).collect()
}

impl KlConvergence {
    pub fn fp_mean(&self) -> Vec<f64> {
        mean_curve(&self.fictitious_play)
    }

    pub fn bu_mean(&self) -> Vec<f64> {
        mean_curve(&self.bayesian_update)
    }
}

/// Belief convergence under both update rules, one true distribution per repetition.
pub fn preset_kl_convergence(spec: &ExperimentSpec) -> Result<(KlConvergence, PresetOutput)> {
    let n_types = spec.game.n_types();
    let per_rep = repeat(spec, |seed| {
        let true_p = if spec.random_true_p {
            random_type_distribution(n_types, &mut RandomSource::new(seed).derive(TRUE_P_STREAM))
        } else {
            spec.run.true_p.clone()
        };
        let mut out = Vec::new();
        for rule in [UpdateRule::FictitiousPlay, UpdateRule::BayesianUpdate] {
            let mut r = spec.run.clone();
            r.seed = seed;
            r.update_rule = rule;
            r.true_p = true_p.clone();
            out.push(self_play(&spec.game, &r)?);
        }
        Ok((seed, true_p, out))
    })?;

    let mut rows = Vec::new();
    let mut result = KlConvergence {
        true_p: Vec::new(),
        fictitious_play: Vec::new(),
        bayesian_update: Vec::new(),
    };
    for (seed, true_p, runs) in per_rep {
        for (i, p) in true_p.as_slice().iter().enumerate() {
            rows.push(ReportRow::new("kl/true_p", seed, None, Metric::TrueP(i), *p));
        }
        for (name, res) in ["kl/fp", "kl/bu"].iter().zip(&runs) {
            rows.extend(run_rows(name, seed, res));
        }
        result.true_p.push(true_p);
        result.fictitious_play.push(runs[0].per_trial_kl.clone());
        result.bayesian_update.push(runs[1].per_trial_kl.clone());
    }
    let fp = result.fp_mean();
    let bu = result.bu_mean();
    let mut summary = format!("{:<6} {:>10} {:>10}\n", "trial", "fp", "bu");
    for t in 0..fp.len() {
        rows.push(ReportRow::new(
            "kl/fp/mean",
            spec.run.seed,
            Some(t + 1),
            Metric::Kl,
            fp[t],
        ));
        rows.push(ReportRow::new(
            "kl/bu/mean",
            spec.run.seed,
            Some(t + 1),
            Metric::Kl,
            bu[t],
        ));
        let _ = writeln!(summary, "{:<6} {:>10.5} {:>10.5}", t + 1, fp[t], bu[t]);
    }
    let output = PresetOutput {
        name: Preset::KlConvergence.name().into(),
        rows,
        summary,
        manifest: manifest(spec, Preset::KlConvergence)?,
    };
    Ok((result, output))
}

#[derive(Debug, Clone)]
pub struct UtilityRow {
    pub concentrated: AdversaryTypeId,
    pub ucb: Vec<f64>,
    pub bne: Vec<f64>,
    pub fixed: Vec<f64>,
}

impl UtilityRow {
    pub fn means(&self) -> (f64, f64, f64) {
        (
            mean(self.ucb.iter().copied()),
            mean(self.bne.iter().copied()),
            mean(self.fixed.iter().copied()),
        )
    }
}

#[derive(Debug, Clone)]
pub struct UtilityComparison {
    pub baseline: ClassifierId,
    pub costs_increasing: bool,
    pub rows: Vec<UtilityRow>,
}

/// Mean learner utility of self-play (UCB and BNE) against always using the
/// most hardened classifier, per concentrated distribution.
pub fn preset_utility_comparison(spec: &ExperimentSpec) -> Result<(UtilityComparison, PresetOutput)> {
    let costs = &spec.game.payoff().classifier_cost;
    let costs_increasing = costs.windows(2).all(|w| w[1] > w[0]);
    let mut rows = Vec::new();
    if !costs_increasing {
        log::warn!("classifier costs are not strictly increasing; the utility comparison is not meaningful");
        rows.push(ReportRow::new(
            "utility",
            spec.run.seed,
            None,
            Metric::WarningNonincreasingCosts,
            1.0,
        ));
    }
    let nc = spec.game.n_classifiers();
    let baseline = ClassifierId(nc - 1);
    let policy = Strategy::pure(nc, baseline);
    let mut out = Vec::new();
    let mut summary = format!(
        "{:<8} {:>10} {:>10} {:>10}\n",
        "row",
        "ucb",
        "bne",
        format!("fixed {baseline}")
    );
    for (k, p) in concentrated_distributions(spec.game.n_types()) {
        let per_rep = repeat(spec, |seed| {
            let mut r = spec.run.clone();
            r.seed = seed;
            r.true_p = p.clone();
            r.selection = SelectionKind::Ucb;
            let ucb = self_play(&spec.game, &r)?.mean_learner_utility;
            r.selection = SelectionKind::Bne;
            let bne = self_play(&spec.game, &r)?.mean_learner_utility;
            let fixed = evaluate_fixed_policy(&spec.game, &r, &policy)?.mean_learner_utility;
            Ok((seed, ucb, bne, fixed))
        })?;
        let mut row = UtilityRow {
            concentrated: k,
            ucb: Vec::new(),
            bne: Vec::new(),
            fixed: Vec::new(),
        };
        for (seed, ucb, bne, fixed) in per_rep {
            rows.push(ReportRow::new(
                format!("utility/ucb/{k}"),
                seed,
                None,
                Metric::MeanLearnerUtility,
                ucb,
            ));
            rows.push(ReportRow::new(
                format!("utility/bne/{k}"),
                seed,
                None,
                Metric::MeanLearnerUtility,
                bne,
            ));
            rows.push(ReportRow::new(
                format!("utility/fixed_{baseline}/{k}"),
                seed,
                None,
                Metric::MeanLearnerUtility,
                fixed,
            ));
            row.ucb.push(ucb);
            row.bne.push(bne);
            row.fixed.push(fixed);
        }
        let (u, b, f) = row.means();
        let _ = writeln!(summary, "{:<8} {u:>10.5} {b:>10.5} {f:>10.5}", k.to_string());
        out.push(row);
    }
    let output = PresetOutput {
        name: Preset::UtilityComparison.name().into(),
        rows,
        summary,
        manifest: manifest(spec, Preset::UtilityComparison)?,
    };
    Ok((
        UtilityComparison {
            baseline,
            costs_increasing,
            rows: out,
        },
        output,
    ))
}

#[derive(Debug, Clone)]
pub struct AccuracyCheck {
    pub samples: usize,
    /// `[classifier][type]`
    pub configured: Vec<Vec<f64>>,
    pub empirical: Vec<Vec<f64>>,
}

impl AccuracyCheck {
    pub fn max_abs_deviation(&self) -> f64 {
        self.configured
            .iter()
            .flatten()
            .zip(self.empirical.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Re-estimates every accuracy entry from `spec.samples` stochastic classifications.
pub fn preset_accuracy_check(spec: &ExperimentSpec) -> Result<(AccuracyCheck, PresetOutput)> {
    let game = &spec.game;
    let nt = game.n_types();
    let base = RandomSource::new(spec.run.seed);
    let cells: Vec<(usize, usize)> = (0..game.n_classifiers())
        .flat_map(|j| (0..nt).map(move |i| (j, i)))
        .collect();
    let estimates: Vec<f64> = cells
        .par_iter()
        .map(|&(j, i)| {
            let mut rng = base.derive((j * nt + i) as u64);
            empirical_accuracy(ClassifierId(j), AdversaryTypeId(i), spec.samples, game, &mut rng)
        })
        .collect();
    let configured = game.accuracy().rows().to_vec();
    let empirical: Vec<Vec<f64>> = estimates.chunks(nt).map(<[f64]>::to_vec).collect();
    let mut rows = Vec::new();
    let mut summary = format!("{:<8} {:<4} {:>10} {:>10}\n", "type", "clf", "configured", "empirical");
    for &(j, i) in &cells {
        let exp = format!("acc-check/L{j}/theta{i}");
        rows.push(ReportRow::new(
            &exp,
            spec.run.seed,
            None,
            Metric::AccuracyConfigured,
            configured[j][i],
        ));
        rows.push(ReportRow::new(
            &exp,
            spec.run.seed,
            None,
            Metric::AccuracyEmpirical,
            empirical[j][i],
        ));
        let _ = writeln!(
            summary,
            "theta{i:<3} L{j:<3} {:>10.4} {:>10.4}",
            configured[j][i], empirical[j][i]
        );
    }
    let output = PresetOutput {
        name: Preset::AccuracyCheck.name().into(),
        rows,
        summary,
        manifest: manifest(spec, Preset::AccuracyCheck)?,
    };
    Ok((
        AccuracyCheck {
            samples: spec.samples,
            configured,
            empirical,
        },
        output,
    ))
}

/// Plain self-play repetitions with the spec's run configuration.
pub fn run_plain(spec: &ExperimentSpec) -> Result<PresetOutput> {
    let runs = repeat(spec, |seed| {
        let mut r: SelfPlayConfig = spec.run.clone();
        r.seed = seed;
        self_play(&spec.game, &r).map(|res| (seed, res))
    })?;
    let mut rows = Vec::new();
    let mut summary = format!("{:<20} {:>8} {:>10} {:>10}\n", "seed", "modal", "accuracy", "final kl");
    for (seed, res) in &runs {
        rows.extend(run_rows("run", *seed, res));
        let _ = writeln!(
            summary,
            "{seed:<20} {:>8} {:>10.4} {:>10.5}",
            res.modal_classifier().to_string(),
            res.overall_accuracy,
            res.per_trial_kl.last().copied().unwrap_or(f64::NAN)
        );
    }
    let mut resolved = spec.clone();
    resolved.preset = None;
    Ok(PresetOutput {
        name: "run".into(),
        rows,
        summary,
        manifest: serialize_spec(&resolved)?,
    })
}

/// Runs the spec's preset, or plain self-play when it names none.
pub fn run_spec(spec: &ExperimentSpec) -> Result<PresetOutput> {
    match spec.preset {
        None => run_plain(spec),
        Some(Preset::SelectionTable) => preset_selection_table(spec).map(|(_, o)| o),
        Some(Preset::KlConvergence) => preset_kl_convergence(spec).map(|(_, o)| o),
        Some(Preset::UtilityComparison) => preset_utility_comparison(spec).map(|(_, o)| o),
        Some(Preset::AccuracyCheck) => preset_accuracy_check(spec).map(|(_, o)| o),
    }
}
