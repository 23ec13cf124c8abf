//! Experiment configuration, presets and report output.

mod config;
mod presets;
mod report;

pub use config::{load_spec, parse_spec, serialize_spec, ExperimentSpec, Preset, DEFAULT_SAMPLES};
pub use presets::{
    concentrated_distributions, preset_accuracy_check, preset_kl_convergence, preset_selection_table,
    preset_utility_comparison, random_type_distribution, repetition_seed, run_plain, run_spec, AccuracyCheck,
    KlConvergence, PresetOutput, SelectionCell, SelectionTable, UtilityComparison, UtilityRow, CONCENTRATION,
};
pub use report::{parse_report_csv, write_outputs, write_report_csv, Metric, ReportRow, REPORT_HEADER};
