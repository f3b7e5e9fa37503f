// SPDX-License-Identifier: Apache-2.0

//! AES-256 CTR_DRBG without a derivation function (NIST SP 800-90A).
//!
//! The generator never gathers entropy itself. When the reseed interval is
//! exhausted, or prediction resistance demands a reseed, [`CtrDrbg::generate`]
//! returns [`DrbgError::ReseedRequired`] and the caller supplies fresh seed
//! material through [`CtrDrbg::reseed`].

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use aes::{Aes256, Block};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const KEY_LEN: usize = 32;
pub const BLOCK_LEN: usize = 16;
/// Key length plus block length.
pub const SEED_LEN: usize = KEY_LEN + BLOCK_LEN;
/// Hard upper bound on a single request (2^16 bytes).
pub const MAX_REQUEST_LIMIT: usize = 1 << 16;

pub const DEFAULT_RESEED_INTERVAL: u64 = 65_536;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DrbgError {
    #[error("seed material must be {SEED_LEN} bytes, got {0}")]
    BadSeedLength(usize),
    #[error("additional input must be at most {SEED_LEN} bytes, got {0}")]
    BadAdditionalInputLength(usize),
    #[error("reseed required before the next generate")]
    ReseedRequired,
    #[error("requested {requested} bytes, limit is {limit}")]
    RequestTooLarge { requested: usize, limit: usize },
    #[error("invalid DRBG configuration: {0}")]
    InvalidConfig(String),
    #[error("bad hex seed: {0}")]
    BadHex(String),
}

/// Reseed policy and request bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct DrbgConfig {
    reseed_interval: u64,
    max_bytes_per_request: usize,
    prediction_resistance: bool,
}

#[derive(Deserialize)]
struct RawConfig {
    #[serde(default = "default_interval")]
    reseed_interval: u64,
    #[serde(default = "default_max_request")]
    max_bytes_per_request: usize,
    #[serde(default)]
    prediction_resistance: bool,
}

fn default_interval() -> u64 {
    DEFAULT_RESEED_INTERVAL
}

fn default_max_request() -> usize {
    MAX_REQUEST_LIMIT
}

impl TryFrom<RawConfig> for DrbgConfig {
    type Error = DrbgError;

    fn try_from(raw: RawConfig) -> Result<Self, DrbgError> {
        DrbgConfig::new(
            raw.reseed_interval,
            raw.max_bytes_per_request,
            raw.prediction_resistance,
        )
    }
}

impl DrbgConfig {
    pub fn new(
        reseed_interval: u64,
        max_bytes_per_request: usize,
        prediction_resistance: bool,
    ) -> Result<Self, DrbgError> {
        if reseed_interval == 0 {
            return Err(DrbgError::InvalidConfig("reseed_interval must be >= 1".into()));
        }
        if max_bytes_per_request == 0 || max_bytes_per_request > MAX_REQUEST_LIMIT {
            return Err(DrbgError::InvalidConfig(format!(
                "max_bytes_per_request must be in 1..={MAX_REQUEST_LIMIT}"
            )));
        }
        Ok(DrbgConfig {
            reseed_interval,
            max_bytes_per_request,
            prediction_resistance,
        })
    }

    pub fn with_reseed_interval(reseed_interval: u64) -> Result<Self, DrbgError> {
        Self::new(reseed_interval, MAX_REQUEST_LIMIT, false)
    }

    pub fn prediction_resistant() -> Self {
        DrbgConfig {
            prediction_resistance: true,
            ..Self::default()
        }
    }

    pub fn reseed_interval(&self) -> u64 {
        self.reseed_interval
    }

    pub fn max_bytes_per_request(&self) -> usize {
        self.max_bytes_per_request
    }

    pub fn prediction_resistance(&self) -> bool {
        self.prediction_resistance
    }
}

impl Default for DrbgConfig {
    fn default() -> Self {
        DrbgConfig {
            reseed_interval: DEFAULT_RESEED_INTERVAL,
            max_bytes_per_request: MAX_REQUEST_LIMIT,
            prediction_resistance: false,
        }
    }
}

/// Parses hex seed material (whitespace ignored) into 48 bytes.
pub fn seed_from_hex(text: &str) -> Result<[u8; SEED_LEN], DrbgError> {
    let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bytes = hex::decode(cleaned).map_err(|e| DrbgError::BadHex(e.to_string()))?;
    bytes
        .as_slice()
        .try_into()
        .map_err(|_| DrbgError::BadSeedLength(bytes.len()))
}

/// Working state of one generator instance. Single owner; move it between
/// threads rather than sharing it.
#[derive(Clone)]
pub struct CtrDrbg {
    key: [u8; KEY_LEN],
    v: [u8; BLOCK_LEN],
    cipher: Aes256,
    reseed_counter: u64,
    // Prediction resistance: set by (re)seeding, cleared by generate.
    fresh: bool,
    config: DrbgConfig,
}

impl std::fmt::Debug for CtrDrbg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CtrDrbg")
            .field("reseed_counter", &self.reseed_counter)
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

fn xor_padded(base: &[u8], extra: &[u8]) -> [u8; SEED_LEN] {
    let mut out = [0u8; SEED_LEN];
    out.copy_from_slice(base);
    for (o, e) in out.iter_mut().zip(extra) {
        *o ^= e;
    }
    out
}

fn check_seed(seed: &[u8]) -> Result<(), DrbgError> {
    if seed.len() != SEED_LEN {
        return Err(DrbgError::BadSeedLength(seed.len()));
    }
    Ok(())
}

fn check_additional(input: Option<&[u8]>) -> Result<(), DrbgError> {
    match input {
        Some(a) if a.len() > SEED_LEN => Err(DrbgError::BadAdditionalInputLength(a.len())),
        _ => Ok(()),
    }
}

impl CtrDrbg {
    /// Instantiates from exactly 48 bytes of full-entropy seed material.
    pub fn instantiate(seed_material: &[u8], config: DrbgConfig) -> Result<Self, DrbgError> {
        Self::instantiate_personalized(seed_material, &[], config)
    }

    /// Instantiate with a personalization string of at most 48 bytes, which
    /// is XORed into the seed material.
    pub fn instantiate_personalized(
        entropy_input: &[u8],
        personalization: &[u8],
        config: DrbgConfig,
    ) -> Result<Self, DrbgError> {
        check_seed(entropy_input)?;
        check_additional(Some(personalization))?;
        let key = [0u8; KEY_LEN];
        let mut drbg = CtrDrbg {
            key,
            v: [0u8; BLOCK_LEN],
            cipher: Aes256::new(GenericArray::from_slice(&key)),
            reseed_counter: 1,
            fresh: true,
            config,
        };
        drbg.update(&xor_padded(entropy_input, personalization));
        Ok(drbg)
    }

    pub fn reseed(&mut self, seed_material: &[u8]) -> Result<(), DrbgError> {
        self.reseed_with_input(seed_material, None)
    }

    /// Reseed with optional additional input (at most 48 bytes), XORed into
    /// the entropy input.
    pub fn reseed_with_input(
        &mut self,
        entropy_input: &[u8],
        additional_input: Option<&[u8]>,
    ) -> Result<(), DrbgError> {
        check_seed(entropy_input)?;
        check_additional(additional_input)?;
        self.update(&xor_padded(entropy_input, additional_input.unwrap_or(&[])));
        self.reseed_counter = 1;
        self.fresh = true;
        Ok(())
    }

    /// Returns `n` pseudorandom bytes.
    pub fn generate(
        &mut self,
        n: usize,
        additional_input: Option<&[u8]>,
    ) -> Result<Vec<u8>, DrbgError> {
        let mut out = vec![0u8; n];
        self.fill(&mut out, additional_input)?;
        Ok(out)
    }

    /// [`generate`](Self::generate) into a caller buffer.
    pub fn fill(&mut self, out: &mut [u8], additional_input: Option<&[u8]>) -> Result<(), DrbgError> {
        if out.len() > self.config.max_bytes_per_request {
            return Err(DrbgError::RequestTooLarge {
                requested: out.len(),
                limit: self.config.max_bytes_per_request,
            });
        }
        check_additional(additional_input)?;
        if self.needs_reseed() {
            return Err(DrbgError::ReseedRequired);
        }

        let additional = match additional_input {
            Some(a) if !a.is_empty() => {
                let padded = xor_padded(&[0u8; SEED_LEN], a);
                self.update(&padded);
                padded
            }
            _ => [0u8; SEED_LEN],
        };

        self.keystream(out);
        self.update(&additional);
        self.reseed_counter += 1;
        self.fresh = false;
        Ok(())
    }

    /// True when the next generate would signal [`DrbgError::ReseedRequired`].
    pub fn needs_reseed(&self) -> bool {
        self.reseed_counter > self.config.reseed_interval
            || (self.config.prediction_resistance && !self.fresh)
    }

    pub fn reseed_counter(&self) -> u64 {
        self.reseed_counter
    }

    pub fn config(&self) -> &DrbgConfig {
        &self.config
    }

    /// Current `(Key, V)`, exposed for known-answer conformance checks.
    pub fn working_state(&self) -> ([u8; KEY_LEN], [u8; BLOCK_LEN]) {
        (self.key, self.v)
    }

    fn increment_v(&mut self) {
        let ctr = u128::from_be_bytes(self.v).wrapping_add(1);
        self.v = ctr.to_be_bytes();
    }

    fn keystream(&mut self, out: &mut [u8]) {
        const BATCH: usize = 32;
        let mut blocks = [Block::default(); BATCH];
        for chunk in out.chunks_mut(BATCH * BLOCK_LEN) {
            let used = chunk.len().div_ceil(BLOCK_LEN);
            for b in blocks[..used].iter_mut() {
                self.increment_v();
                b.copy_from_slice(&self.v);
            }
            self.cipher.encrypt_blocks(&mut blocks[..used]);
            for (dst, src) in chunk.chunks_mut(BLOCK_LEN).zip(blocks.iter()) {
                dst.copy_from_slice(&src[..dst.len()]);
            }
        }
    }

    fn update(&mut self, provided: &[u8; SEED_LEN]) {
        let mut temp = [Block::default(); 3];
        for b in temp.iter_mut() {
            self.increment_v();
            b.copy_from_slice(&self.v);
        }
        self.cipher.encrypt_blocks(&mut temp);
        let mut flat = [0u8; SEED_LEN];
        for (i, b) in temp.iter().enumerate() {
            flat[i * BLOCK_LEN..(i + 1) * BLOCK_LEN].copy_from_slice(b);
        }
        for (f, p) in flat.iter_mut().zip(provided) {
            *f ^= p;
        }
        self.key.copy_from_slice(&flat[..KEY_LEN]);
        self.v.copy_from_slice(&flat[KEY_LEN..]);
        self.cipher = Aes256::new(GenericArray::from_slice(&self.key));
    }
}
