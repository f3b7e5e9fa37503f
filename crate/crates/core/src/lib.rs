// SPDX-License-Identifier: Apache-2.0

//! Randomness for production differential privacy.
//!
//! * [`entropy`]: raw entropy sources with retry semantics and a SHA-256 mixer.
//! * [`drbg`]: AES-256 CTR_DRBG with explicit reseed policy.
//! * [`bitgen`]: uniform word generators and per-worker stream spawning.
//! * [`mechanisms`]: two-sided geometric and (insecure) Laplace noise.
//! * [`budget`]: randomness requirements of hierarchical histogram workloads.
//! * [`attack`]: MT19937 state recovery from noisy zero cells.
//! * [`quality`]: statistical smoke tests and throughput benchmarking.
//! * [`kat`]: known-answer conformance runner for CAVP response files.

pub mod attack;
pub mod bitgen;
pub mod budget;
pub mod drbg;
pub mod entropy;
pub mod kat;
pub mod mechanisms;
pub mod quality;

pub use attack::{attack_cells, sparse_histogram_attack, AttackError, AttackTranscript, Channel};
pub use bitgen::{Backend, BitgenError, GeneratorHandle, MtState};
pub use budget::{compute_budget, BudgetError, BudgetReport, BudgetSpec};
pub use drbg::{CtrDrbg, DrbgConfig, DrbgError};
pub use entropy::{EntropyBlock, EntropyError, EntropySource, Seeder};
pub use mechanisms::{MechanismError, MechanismParams, NoisyMeasurement};
pub use quality::{QualityError, StatReport};
