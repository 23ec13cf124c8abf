//! Long-format CSV reports: one metric value per row.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const REPORT_HEADER: [&str; 5] = ["experiment", "seed", "trial", "metric", "value"];

/// Every metric name a report may contain. Indexed variants render with
/// their classifier (`L{j}`) or type (`theta{i}`) suffix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Kl,
    MaxAbsError,
    ConditionalKl(usize),
    SelectionPct(usize),
    Accuracy,
    TypeAccuracy(usize),
    MeanLearnerUtility,
    MeanAdversaryUtility,
    ModalClassifier,
    Belief(usize),
    TrueP(usize),
    AccuracyConfigured,
    AccuracyEmpirical,
    WarningNonincreasingCosts,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Kl => f.write_str("kl"),
            Metric::MaxAbsError => f.write_str("max_abs_error"),
            Metric::ConditionalKl(j) => write!(f, "conditional_kl_L{j}"),
            Metric::SelectionPct(j) => write!(f, "selection_pct_L{j}"),
            Metric::Accuracy => f.write_str("accuracy"),
            Metric::TypeAccuracy(i) => write!(f, "accuracy_theta{i}"),
            Metric::MeanLearnerUtility => f.write_str("mean_learner_utility"),
            Metric::MeanAdversaryUtility => f.write_str("mean_adversary_utility"),
            Metric::ModalClassifier => f.write_str("modal_classifier"),
            Metric::Belief(i) => write!(f, "belief_theta{i}"),
            Metric::TrueP(i) => write!(f, "true_p_theta{i}"),
            Metric::AccuracyConfigured => f.write_str("accuracy_configured"),
            Metric::AccuracyEmpirical => f.write_str("accuracy_empirical"),
            Metric::WarningNonincreasingCosts => f.write_str("warning_nonincreasing_costs"),
        }
    }
}

fn indexed(s: &str, prefix: &str) -> Option<usize> {
    let digits = s.strip_prefix(prefix)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if digits.len() > 1 && digits.starts_with('0') {
        return None;
    }
    digits.parse().ok()
}

type IndexedMetric = fn(usize) -> Metric;

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let plain = match s {
            "kl" => Some(Metric::Kl),
            "max_abs_error" => Some(Metric::MaxAbsError),
            "accuracy" => Some(Metric::Accuracy),
            "mean_learner_utility" => Some(Metric::MeanLearnerUtility),
            "mean_adversary_utility" => Some(Metric::MeanAdversaryUtility),
            "modal_classifier" => Some(Metric::ModalClassifier),
            "accuracy_configured" => Some(Metric::AccuracyConfigured),
            "accuracy_empirical" => Some(Metric::AccuracyEmpirical),
            "warning_nonincreasing_costs" => Some(Metric::WarningNonincreasingCosts),
            _ => None,
        };
        if let Some(m) = plain {
            return Ok(m);
        }
        let parsers: [(&str, IndexedMetric); 5] = [
            ("conditional_kl_L", Metric::ConditionalKl),
            ("selection_pct_L", Metric::SelectionPct),
            ("accuracy_theta", Metric::TypeAccuracy),
            ("belief_theta", Metric::Belief),
            ("true_p_theta", Metric::TrueP),
        ];
        parsers
            .iter()
            .find_map(|(prefix, make)| indexed(s, prefix).map(make))
            .ok_or_else(|| Error::validation("metric", format!("unknown metric name {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub seed: u64,
    /// 1-based trial index for per-trial metrics; `None` for run-level ones.
    pub trial: Option<usize>,
    pub metric: Metric,
    pub value: f64,
}

impl ReportRow {
    pub fn new(experiment: impl Into<String>, seed: u64, trial: Option<usize>, metric: Metric, value: f64) -> Self {
        Self {
            experiment: experiment.into(),
            seed,
            trial,
            metric,
            value,
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// Writes rows with a header. Floats use the shortest exact representation,
/// so equal values always produce identical bytes.
pub fn write_report_csv<W: std::io::Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER).map_err(csv_error)?;
    for r in rows {
        let trial = r.trial.map(|t| t.to_string()).unwrap_or_default();
        w.write_record([
            r.experiment.as_str(),
            &r.seed.to_string(),
            &trial,
            &r.metric.to_string(),
            &r.value.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<report>".into(),
        source,
    })
}

/// Reads a report back, validating the header and every metric name.
pub fn parse_report_csv(data: &[u8]) -> Result<Vec<ReportRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(data);
    let header = r.headers().map_err(csv_error)?;
    if header.iter().ne(REPORT_HEADER) {
        return Err(Error::validation(
            "header",
            format!("expected {}", REPORT_HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let field = |k: usize| record.get(k).unwrap_or("");
        let at = |what: &str| format!("row {}: {what}", line + 1);
        let seed = field(1)
            .parse()
            .map_err(|_| Error::validation(at("seed"), format!("not an unsigned integer: {:?}", field(1))))?;
        let trial = match field(2) {
            "" => None,
            t => Some(
                t.parse()
                    .map_err(|_| Error::validation(at("trial"), format!("not an index: {t:?}")))?,
            ),
        };
        let value = field(4)
            .parse()
            .map_err(|_| Error::validation(at("value"), format!("not a number: {:?}", field(4))))?;
        rows.push(ReportRow {
            experiment: field(0).to_string(),
            seed,
            trial,
            metric: field(3).parse()?,
            value,
        });
    }
    Ok(rows)
}

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.manifest.toml`.
pub fn write_outputs(dir: &Path, name: &str, rows: &[ReportRow], manifest: &str) -> Result<()> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| Error::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let csv_path = dir.join(format!("{name}.csv"));
    let file = std::fs::File::create(&csv_path).map_err(io(&csv_path))?;
    write_report_csv(rows, std::io::BufWriter::new(file))?;
    let manifest_path = dir.join(format!("{name}.manifest.toml"));
    std::fs::write(&manifest_path, manifest).map_err(io(&manifest_path))?;
    Ok(())
}
