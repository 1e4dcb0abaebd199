//! Assignment studies built from a bank of pre-trained columns, policy
//! comparisons and a small cross-validation driver.

pub mod bank;
pub mod compare;
pub mod config;
pub mod stats;
pub mod study;
pub mod tuning;

pub use bank::{bank_size, build_column_bank, evaluate_assignment, ColumnBank, LossTables, BANK_MAX_K};
pub use compare::{compare_policies, Code, Comparison, Policy, PolicyRow};
pub use config::RunConfig;
pub use study::{run_exhaustive_study, RecordWriter, Sample, StudyRecord, StudySummary};
