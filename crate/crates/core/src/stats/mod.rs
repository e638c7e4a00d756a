//! Paired comparisons between speaking modes.

mod holm;
mod paired;
mod report;
mod special;

pub use holm::{holm_bonferroni, HolmOutcome};
pub use paired::{
    linear_fit, mean_std, paired_ttest, pearson_r, syllable_rate, LinearFit, PairedSeries, TestResult,
};
pub use report::{
    mode_comparison_report, read_differences_csv, read_summary_csv, read_tests_csv, CorrelationRow,
    DifferenceRow, ModeReport, ReportInputs, SummaryRow, TestRow,
};
pub use special::{ln_gamma, regularized_incomplete_beta, student_t_sf};
