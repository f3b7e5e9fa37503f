// SPDX-License-Identifier: Apache-2.0

//! State recovery against MT19937-protected sparse histograms.
//!
//! When a run of cells is known to hold true counts of zero, the published
//! values are the noise draws themselves. If the noise sampler can be
//! inverted back to its 64-bit words, 312 cells give 624 consecutive MT19937
//! outputs, which fix the generator state. Cell 313 then validates the
//! reconstruction, and every later cell's noise is predicted exactly, so the
//! true counts fall out by subtraction.
//!
//! Words are split low half first, matching
//! [`GeneratorHandle::next_u64`](crate::bitgen::GeneratorHandle::next_u64).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitgen::mt19937::{untemper, MtState, N};
use crate::bitgen::{BitgenError, GeneratorHandle};
use crate::mechanisms::{MechanismParams, NoiseValue, NoisyMeasurement};

/// Cells needed: 312 to rebuild the state plus one to validate it.
pub const REQUIRED_RUN: usize = N / 2 + 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("need exactly {N} consecutive outputs, got {0}")]
    WrongOutputCount(usize),
    #[error("need ≥ {REQUIRED_RUN} cells, got {0}")]
    InsufficientCells(usize),
    #[error("channel {0} cannot map observed values to unique words")]
    ChannelNotInvertible(String),
    #[error("measurement {0} is not an integer cell")]
    NonIntegerCell(usize),
    #[error("prediction for cell {REQUIRED_RUN} did not match the observation")]
    Refuted(Box<AttackTranscript>),
    #[error(transparent)]
    Generator(#[from] BitgenError),
}

/// Recovers the state word behind each tempered output.
pub fn untemper_all(outputs: &[u32]) -> Vec<u32> {
    outputs.iter().map(|&y| untemper(y)).collect()
}

/// Rebuilds a state whose next outputs continue `outputs`.
///
/// Any 624 consecutive untempered outputs form a valid state, whatever their
/// offset from a twist boundary: the twist recurrence only ever reads the
/// previous 624 values of the output sequence.
pub fn reconstruct_state(outputs: &[u32]) -> Result<MtState, AttackError> {
    if outputs.len() != N {
        return Err(AttackError::WrongOutputCount(outputs.len()));
    }
    let mut words = [0u32; N];
    for (w, &y) in words.iter_mut().zip(outputs) {
        *w = untemper(y);
    }
    Ok(MtState::from_words(words, N).expect("index N is valid"))
}

/// How an observed cell value relates to the generator words drawn for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Channel {
    /// The cell's noise is one raw 64-bit draw reinterpreted as `i64`.
    Identity,
    /// The inverse-CDF geometric fast path. A two-sided value is the
    /// difference of two geometrics and does not determine either word, so
    /// this channel supports coverage analysis only.
    InverseCdfGeometric { epsilon: f64, sensitivity: f64 },
}

impl Channel {
    pub fn name(&self) -> &'static str {
        match self {
            Channel::Identity => "identity",
            Channel::InverseCdfGeometric { .. } => "inverse-cdf-geometric",
        }
    }

    /// The word behind a zero-count cell.
    pub fn invert(&self, value: i64) -> Result<u64, AttackError> {
        match self {
            Channel::Identity => Ok(value as u64),
            Channel::InverseCdfGeometric { .. } => {
                Err(AttackError::ChannelNotInvertible(self.name().into()))
            }
        }
    }

    /// Noise a given word produces.
    pub fn forward(&self, word: u64) -> Result<i64, AttackError> {
        match self {
            Channel::Identity => Ok(word as i64),
            Channel::InverseCdfGeometric { .. } => {
                Err(AttackError::ChannelNotInvertible(self.name().into()))
            }
        }
    }
}

/// Protects `true_counts` with identity-channel noise: each cell adds one
/// raw 64-bit draw (wrapping). This models a fully invertible sampler.
pub fn identity_channel_measurements(
    true_counts: &[i64],
    g: &mut GeneratorHandle,
) -> Result<Vec<i64>, BitgenError> {
    true_counts
        .iter()
        .map(|&c| Ok(c.wrapping_add(g.next_u64()? as i64)))
        .collect()
}

/// Integer cell values from mechanism output.
pub fn cells_from_measurements(measurements: &[NoisyMeasurement]) -> Result<Vec<i64>, AttackError> {
    measurements
        .iter()
        .enumerate()
        .map(|(i, m)| match m.value {
            NoiseValue::Integer(v) => Ok(v),
            NoiseValue::Real(_) => Err(AttackError::NonIntegerCell(i)),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Validation {
    Validated,
    Refuted,
}

/// State words plus the next-output index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateDump {
    pub index: usize,
    pub words: Vec<u32>,
}

impl From<&MtState> for StateDump {
    fn from(s: &MtState) -> Self {
        StateDump {
            index: s.index(),
            words: s.words().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackTranscript {
    pub channel: String,
    pub observed_cells: Vec<i64>,
    /// The 624 generator outputs recovered from cells 1..=312.
    pub recovered_words: Vec<u32>,
    pub reconstructed_state: StateDump,
    pub predicted_validation_cell: i64,
    pub validation: Validation,
    /// Predicted noise for cells 314 onward (empty unless validated).
    pub predicted_cells: Vec<i64>,
    /// Observed minus predicted noise for the same cells.
    pub recovered_true_counts: Vec<i64>,
}

/// Runs the attack on mechanism output whose first [`REQUIRED_RUN`] cells
/// are known to have true count zero.
pub fn sparse_histogram_attack(
    measurements: &[NoisyMeasurement],
    channel: &Channel,
) -> Result<AttackTranscript, AttackError> {
    attack_cells(&cells_from_measurements(measurements)?, channel)
}

/// [`sparse_histogram_attack`] on raw integer cell values.
pub fn attack_cells(
    cells: &[i64],
    channel: &Channel,
) -> Result<AttackTranscript, AttackError> {
    if cells.len() < REQUIRED_RUN {
        return Err(AttackError::InsufficientCells(cells.len()));
    }
    let mut recovered = Vec::with_capacity(N);
    for &cell in &cells[..REQUIRED_RUN - 1] {
        let word = channel.invert(cell)?;
        recovered.push(word as u32);
        recovered.push((word >> 32) as u32);
    }
    let state = reconstruct_state(&recovered)?;
    let mut g = GeneratorHandle::mt19937_insecure_from_state(state.clone());

    let predicted = channel.forward(g.next_u64()?)?;
    let observed = cells[REQUIRED_RUN - 1];
    let mut transcript = AttackTranscript {
        channel: channel.name().into(),
        observed_cells: cells.to_vec(),
        recovered_words: recovered,
        reconstructed_state: StateDump::from(&state),
        predicted_validation_cell: predicted,
        validation: Validation::Refuted,
        predicted_cells: Vec::new(),
        recovered_true_counts: Vec::new(),
    };
    if predicted != observed {
        return Err(AttackError::Refuted(Box::new(transcript)));
    }

    transcript.validation = Validation::Validated;
    for &cell in &cells[REQUIRED_RUN..] {
        let noise = channel.forward(g.next_u64()?)?;
        transcript.predicted_cells.push(noise);
        transcript
            .recovered_true_counts
            .push(cell.wrapping_sub(noise));
    }
    Ok(transcript)
}

/// Bits of the underlying 64-bit words an inverse-CDF geometric observation
/// pins down.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub cells: usize,
    /// Leading word bits fixed per cell, assuming the modal decomposition
    /// `k = max(k,0) - max(-k,0)` of each two-sided value.
    pub bits_per_cell: Vec<u32>,
    /// Fraction of the 128 bits drawn per cell.
    pub coverage: f64,
}

// Leading bits shared by every 53-bit uniform that yields geometric g.
fn fixed_bits_for_geometric(alpha: f64, g: u64) -> u32 {
    // u ∈ [1 - α^g, 1 - α^(g+1)) ⊂ [0, 1) as a 53-bit integer.
    let scale = (1u64 << 53) as f64;
    let lo = ((1.0 - alpha.powi(g as i32)) * scale).ceil() as u64;
    let hi = ((1.0 - alpha.powi(g as i32 + 1)) * scale).ceil() as u64;
    if hi <= lo {
        return 53;
    }
    let last = hi - 1;
    // Leading zeros of the xor, counted within the 53-bit field.
    ((lo ^ last).leading_zeros() - 11).min(53)
}

pub fn inverse_cdf_coverage(cells: &[i64], params: &MechanismParams) -> CoverageReport {
    let alpha = params.alpha();
    let bits_per_cell: Vec<u32> = cells
        .iter()
        .map(|&k| {
            let (a, b) = (k.max(0) as u64, (-k).max(0) as u64);
            fixed_bits_for_geometric(alpha, a) + fixed_bits_for_geometric(alpha, b)
        })
        .collect();
    let total: u64 = bits_per_cell.iter().map(|&b| b as u64).sum();
    CoverageReport {
        cells: cells.len(),
        coverage: if cells.is_empty() {
            0.0
        } else {
            total as f64 / (128.0 * cells.len() as f64)
        },
        bits_per_cell,
    }
}
