// SPDX-License-Identifier: Apache-2.0

//! Output sanity checks and throughput measurement.
//!
//! [`run_stat_tests`] applies monobit, runs and byte chi-square tests at
//! α = 0.01. They catch stuck or periodic output, not subtle bias.
//! [`bench_throughput`] drives worker threads against independent DRBGs,
//! a shared locked OS source, or the hardware instructions.

mod bench;
mod stats;

use thiserror::Error;

use crate::bitgen::BitgenError;
use crate::entropy::EntropyError;

pub use bench::{bench_throughput, BenchConfig, BenchEntry, BenchReport, BenchSource, MIN_DURATION};
pub use stats::{
    run_stat_tests, stat_tests_on_bytes, StatReport, TestResult, MIN_SAMPLE_BYTES, SIGNIFICANCE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QualityError {
    #[error("sample of {got} bytes is below the minimum of {min}")]
    SampleTooSmall { got: usize, min: usize },
    #[error("benchmark duration must be >= 1 s, got {0} s")]
    DurationTooShort(f64),
    #[error("no benchmark configurations given")]
    NoConfigs,
    #[error("thread count must be >= 1")]
    NoThreads,
    #[error(transparent)]
    Generator(#[from] BitgenError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}
