// SPDX-License-Identifier: Apache-2.0

//! Uniform word generation over the DRBG, plus an explicitly insecure
//! MT19937 backend for attack demonstrations.
//!
//! Word composition conventions, relied on by [`crate::attack`]:
//! * MT19937 `next_u64` is `(second << 32) | first`: low word first.
//! * DRBG `next_u32`/`next_u64` read the generated byte stream little-endian.

pub mod mt19937;
mod streams;

use thiserror::Error;

use crate::drbg::{CtrDrbg, DrbgConfig, DrbgError};
use crate::entropy::EntropyError;
pub use mt19937::MtState;
pub use streams::{
    seed_fingerprint, spawn_streams, RunNonce, SeedAuditLog, SeedAuditRecord, SpawnOptions,
    StreamTagging,
};

/// Bytes requested from the DRBG per buffer refill.
pub const DRBG_CHUNK: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitgenError {
    #[error("generator must be reseeded")]
    ReseedRequired,
    #[error(transparent)]
    Drbg(DrbgError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("seed fingerprint {fingerprint} for stream {stream_index} was already issued")]
    DuplicateSeed {
        stream_index: u64,
        fingerprint: String,
    },
    #[error("stream count must be at least 1")]
    NoStreams,
    #[error("operation not supported by the {0:?} backend")]
    Unsupported(Backend),
}

impl From<DrbgError> for BitgenError {
    fn from(e: DrbgError) -> Self {
        match e {
            DrbgError::ReseedRequired => BitgenError::ReseedRequired,
            other => BitgenError::Drbg(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Drbg,
    Mt19937Insecure,
}

#[derive(Clone)]
struct DrbgStream {
    drbg: CtrDrbg,
    buf: Vec<u8>,
    pos: usize,
}

impl DrbgStream {
    fn take(&mut self, out: &mut [u8]) -> Result<(), BitgenError> {
        let mut written = 0;
        while written < out.len() {
            if self.pos == self.buf.len() {
                // On failure the stream is left exactly where it was.
                let fresh = self.drbg.generate(DRBG_CHUNK, None)?;
                self.buf = fresh;
                self.pos = 0;
            }
            let n = (out.len() - written).min(self.buf.len() - self.pos);
            out[written..written + n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
            self.pos += n;
            written += n;
        }
        Ok(())
    }

    fn take_exact<const K: usize>(&mut self) -> Result<[u8; K], BitgenError> {
        let mut out = [0u8; K];
        let available = self.buf.len() - self.pos;
        if available < K && self.drbg.needs_reseed() {
            return Err(BitgenError::ReseedRequired);
        }
        self.take(&mut out)?;
        Ok(out)
    }
}

#[derive(Clone)]
enum State {
    Drbg(Box<DrbgStream>),
    Mt(Box<MtState>),
}

/// A single-owner source of uniform words.
#[derive(Clone)]
pub struct GeneratorHandle {
    state: State,
    words_emitted: u64,
}

impl std::fmt::Debug for GeneratorHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneratorHandle")
            .field("backend", &self.backend())
            .field("words_emitted", &self.words_emitted)
            .finish_non_exhaustive()
    }
}

impl GeneratorHandle {
    pub fn from_drbg(drbg: CtrDrbg) -> Self {
        GeneratorHandle {
            state: State::Drbg(Box::new(DrbgStream {
                drbg,
                buf: Vec::new(),
                pos: 0,
            })),
            words_emitted: 0,
        }
    }

    pub fn drbg_from_seed(seed: &[u8], config: DrbgConfig) -> Result<Self, BitgenError> {
        Ok(Self::from_drbg(CtrDrbg::instantiate(seed, config)?))
    }

    /// MT19937 seeded with `init_genrand(seed)`. Predictable after 624
    /// outputs; never use it to protect data.
    pub fn mt19937_insecure(seed: u32) -> Self {
        Self::mt19937_insecure_from_state(MtState::from_seed(seed))
    }

    pub fn mt19937_insecure_from_state(state: MtState) -> Self {
        GeneratorHandle {
            state: State::Mt(Box::new(state)),
            words_emitted: 0,
        }
    }

    pub fn backend(&self) -> Backend {
        match self.state {
            State::Drbg(_) => Backend::Drbg,
            State::Mt(_) => Backend::Mt19937Insecure,
        }
    }

    /// Number of 32-bit words consumed so far.
    pub fn words_emitted(&self) -> u64 {
        self.words_emitted
    }

    pub fn next_u32(&mut self) -> Result<u32, BitgenError> {
        let w = match &mut self.state {
            State::Mt(mt) => mt.next_u32(),
            State::Drbg(s) => u32::from_le_bytes(s.take_exact::<4>()?),
        };
        self.words_emitted += 1;
        Ok(w)
    }

    pub fn next_u64(&mut self) -> Result<u64, BitgenError> {
        let w = match &mut self.state {
            State::Mt(mt) => {
                let lo = mt.next_u32() as u64;
                let hi = mt.next_u32() as u64;
                (hi << 32) | lo
            }
            State::Drbg(s) => u64::from_le_bytes(s.take_exact::<8>()?),
        };
        self.words_emitted += 2;
        Ok(w)
    }

    /// Uniform double in `[0, 1)` from the top 53 bits of one 64-bit word.
    pub fn next_double53(&mut self) -> Result<f64, BitgenError> {
        self.next_u64().map(double53_from_word)
    }

    /// Fills `out` from the byte stream. Counted in whole 32-bit words,
    /// rounding up.
    pub fn fill_bytes(&mut self, out: &mut [u8]) -> Result<(), BitgenError> {
        match &mut self.state {
            State::Drbg(s) => s.take(out)?,
            State::Mt(mt) => {
                for chunk in out.chunks_mut(4) {
                    let w = mt.next_u32().to_le_bytes();
                    chunk.copy_from_slice(&w[..chunk.len()]);
                }
            }
        }
        self.words_emitted += out.len().div_ceil(4) as u64;
        Ok(())
    }

    /// Supplies fresh seed material to a DRBG-backed handle.
    pub fn reseed(&mut self, seed_material: &[u8]) -> Result<(), BitgenError> {
        match &mut self.state {
            State::Drbg(s) => Ok(s.drbg.reseed(seed_material)?),
            State::Mt(_) => Err(BitgenError::Unsupported(Backend::Mt19937Insecure)),
        }
    }

    /// The MT state, when this is an insecure handle.
    pub fn mt_state(&self) -> Option<&MtState> {
        match &self.state {
            State::Mt(mt) => Some(mt),
            State::Drbg(_) => None,
        }
    }
}

/// `(word >> 11) · 2^-53`.
pub fn double53_from_word(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
