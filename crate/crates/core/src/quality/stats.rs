// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use super::QualityError;
use crate::bitgen::GeneratorHandle;

pub const MIN_SAMPLE_BYTES: usize = 1_000_000;
pub const SIGNIFICANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub name: &'static str,
    pub statistic: f64,
    pub p_value: f64,
    pub passed: bool,
}

impl TestResult {
    fn new(name: &'static str, statistic: f64, p_value: f64) -> Self {
        TestResult {
            name,
            statistic,
            p_value,
            passed: p_value >= SIGNIFICANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatReport {
    pub sample_bytes: usize,
    pub significance: f64,
    pub monobit: TestResult,
    pub runs: TestResult,
    pub byte_chi_square: TestResult,
}

impl StatReport {
    pub fn tests(&self) -> [&TestResult; 3] {
        [&self.monobit, &self.runs, &self.byte_chi_square]
    }

    pub fn all_passed(&self) -> bool {
        self.tests().iter().all(|t| t.passed)
    }
}

/// Draws `n_bytes` from `g` and tests them.
pub fn run_stat_tests(g: &mut GeneratorHandle, n_bytes: usize) -> Result<StatReport, QualityError> {
    check_size(n_bytes)?;
    let mut buf = vec![0u8; n_bytes];
    g.fill_bytes(&mut buf)?;
    stat_tests_on_bytes(&buf)
}

fn check_size(n: usize) -> Result<(), QualityError> {
    if n < MIN_SAMPLE_BYTES {
        return Err(QualityError::SampleTooSmall {
            got: n,
            min: MIN_SAMPLE_BYTES,
        });
    }
    Ok(())
}

/// Tests an existing byte stream. Bits are read most significant first.
pub fn stat_tests_on_bytes(bytes: &[u8]) -> Result<StatReport, QualityError> {
    check_size(bytes.len())?;
    let n = bytes.len() as f64 * 8.0;

    let mut ones = 0u64;
    let mut transitions = 0u64;
    let mut hist = [0u64; 256];
    let mut prev_bit: Option<u8> = None;
    for &b in bytes {
        ones += b.count_ones() as u64;
        // Bit changes inside the byte, then across the boundary.
        transitions += ((b ^ (b >> 1)) & 0x7f).count_ones() as u64;
        if let Some(p) = prev_bit {
            transitions += (p ^ (b >> 7)) as u64;
        }
        prev_bit = Some(b & 1);
        hist[b as usize] += 1;
    }

    // Monobit: S = #1 - #0, z = |S| / sqrt(n).
    let s = 2.0 * ones as f64 - n;
    let z = s.abs() / n.sqrt();
    let monobit = TestResult::new("monobit", z, erfc(z / std::f64::consts::SQRT_2));

    // Wald-Wolfowitz: R runs against mean 2·n1·n0/n + 1.
    let n1 = ones as f64;
    let n0 = n - n1;
    let r = transitions as f64 + 1.0;
    let mean = 2.0 * n1 * n0 / n + 1.0;
    let var = 2.0 * n1 * n0 * (2.0 * n1 * n0 - n) / (n * n * (n - 1.0));
    let runs = if var > 0.0 {
        let z = (r - mean) / var.sqrt();
        TestResult::new("runs", z, erfc(z.abs() / std::f64::consts::SQRT_2))
    } else {
        // Constant stream: the run count is degenerate.
        TestResult::new("runs", f64::INFINITY, 0.0)
    };

    let expected = bytes.len() as f64 / 256.0;
    let chi2: f64 = hist
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new(255.0).expect("valid dof");
    let byte_chi_square = TestResult::new("byte_chi_square", chi2, dist.sf(chi2));

    Ok(StatReport {
        sample_bytes: bytes.len(),
        significance: SIGNIFICANCE,
        monobit,
        runs,
        byte_chi_square,
    })
}
