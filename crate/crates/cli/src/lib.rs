//! Experiment harness for twin-user insertion: timing runs, randomised
//! oracle checks and similarity-distribution reports.

pub mod analyze;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod verify;

pub use analyze::{cmd_analyze, AnalyzeConfig, AnalyzeReport};
pub use bench::{cmd_bench, BenchConfig, BenchResult, BenchRow, Method};
pub use dataset::{DatasetSpec, Format, Mode, SyntheticShape};
pub use error::CliError;
pub use verify::{cmd_verify, VerifyReport};
