// SPDX-License-Identifier: Apache-2.0

//! Per-worker generator streams.
//!
//! Workers booted from one machine image can start with identical entropy
//! pools. Each stream's seed is therefore mixed under a tag that binds a
//! per-run nonce and the stream index, and every seed fingerprint is
//! recorded; a repeated fingerprint fails closed with
//! [`BitgenError::DuplicateSeed`].

use std::collections::HashSet;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{BitgenError, GeneratorHandle};
use crate::drbg::{CtrDrbg, DrbgConfig};
use crate::entropy::{mix, Seeder};

const STREAM_TAG: &[u8] = b"dprand/stream/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunNonce([u8; 16]);

impl RunNonce {
    /// Draws a nonce from the OS.
    pub fn fresh() -> Result<Self, BitgenError> {
        let mut n = [0u8; 16];
        getrandom::fill(&mut n)
            .map_err(|e| crate::entropy::EntropyError::Io(e.to_string()))?;
        Ok(RunNonce(n))
    }

    pub fn fixed(bytes: [u8; 16]) -> Self {
        RunNonce(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StreamTagging {
    /// Tag = (nonce, stream index). The only production setting.
    #[default]
    PerStream,
    /// Every stream gets the same tag. Exists to rehearse the clone hazard
    /// in tests; with identical entropy it must trip `DuplicateSeed`.
    SharedTagTestRig,
}

#[derive(Debug, Clone)]
pub struct SpawnOptions {
    pub nonce: RunNonce,
    pub tagging: StreamTagging,
    pub config: DrbgConfig,
}

impl SpawnOptions {
    pub fn new(nonce: RunNonce) -> Self {
        SpawnOptions {
            nonce,
            tagging: StreamTagging::PerStream,
            config: DrbgConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeedAuditRecord {
    pub stream_index: u64,
    pub fingerprint_hex: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

/// Log of every seed fingerprint issued. Shared by all spawns that should be
/// mutually independent, e.g. one per deployment.
#[derive(Debug, Default)]
pub struct SeedAuditLog {
    inner: Mutex<AuditInner>,
}

#[derive(Debug, Default)]
struct AuditInner {
    records: Vec<SeedAuditRecord>,
    seen: HashSet<[u8; 32]>,
}

impl SeedAuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> Vec<SeedAuditRecord> {
        self.inner.lock().unwrap().records.clone()
    }

    /// One JSON object per line: `{stream_index, fingerprint_hex, timestamp}`.
    pub fn to_json_lines(&self) -> String {
        let inner = self.inner.lock().unwrap();
        let mut out = String::new();
        for r in &inner.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    fn admit(&self, stream_index: u64, fingerprint: [u8; 32]) -> Result<(), BitgenError> {
        let mut inner = self.inner.lock().unwrap();
        if !inner.seen.insert(fingerprint) {
            return Err(BitgenError::DuplicateSeed {
                stream_index,
                fingerprint: hex::encode(fingerprint),
            });
        }
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        inner.records.push(SeedAuditRecord {
            stream_index,
            fingerprint_hex: hex::encode(fingerprint),
            timestamp,
        });
        Ok(())
    }
}

pub fn seed_fingerprint(seed: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"dprand/seed-fingerprint");
    h.update(seed);
    h.finalize().into()
}

fn stream_tag(opts: &SpawnOptions, index: u64) -> Vec<u8> {
    let mut tag = STREAM_TAG.to_vec();
    tag.extend_from_slice(opts.nonce.as_bytes());
    match opts.tagging {
        StreamTagging::PerStream => tag.extend_from_slice(&index.to_be_bytes()),
        StreamTagging::SharedTagTestRig => {}
    }
    tag
}

/// Instantiates `count` DRBG-backed handles, each from freshly gathered
/// entropy mixed under its own stream tag.
pub fn spawn_streams(
    seeder: &Seeder,
    count: usize,
    opts: &SpawnOptions,
    audit: &SeedAuditLog,
) -> Result<Vec<GeneratorHandle>, BitgenError> {
    if count == 0 {
        return Err(BitgenError::NoStreams);
    }
    let mut handles = Vec::with_capacity(count);
    for index in 0..count as u64 {
        let blocks = seeder.gather(48)?;
        let seed = mix(&blocks, 48, &stream_tag(opts, index))?;
        audit.admit(index, seed_fingerprint(&seed))?;
        handles.push(GeneratorHandle::from_drbg(CtrDrbg::instantiate(&seed, opts.config)?));
    }
    Ok(handles)
}
