// SPDX-License-Identifier: Apache-2.0

//! Raw entropy acquisition and conditioning.
//!
//! Sources implement [`EntropySource`] and are read through
//! [`read_with_retry`], which applies the per-kind retry policy and records
//! every read in a [`Diagnostics`] log. Blocks from several sources are
//! conditioned into full-entropy seed material by [`mix`]. Production seeding
//! goes through a [`Seeder`], which refuses fixed test sources unless the
//! insecure override is set and records each decision in a [`SeedingAudit`].

mod mix;
mod remote;
mod sources;

use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

pub use mix::{mix, MAX_MIX_OUTPUT};
pub use remote::{fetch_remote, RemoteSource, REMOTE_MAX_BYTES};
pub use sources::{
    EmulatedSeedSource, FixedSource, HardwareRandSource, HardwareSeedSource, OsSource,
    ScriptedSource,
};

/// Largest block a single source read may produce.
pub const MAX_BLOCK_LEN: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EntropyError {
    #[error("source {source_name} not ready after {attempts} attempts")]
    RetryExhausted { source_name: String, attempts: u32 },
    #[error("source {0} is not available on this platform")]
    SourceUnavailable(String),
    #[error("no entropy blocks supplied")]
    EmptyInput,
    #[error("requested {requested} bytes, limit is {limit}")]
    RequestTooLarge { requested: usize, limit: usize },
    #[error("entropy block length {0} outside 1..=1024")]
    BadBlockLength(usize),
    #[error("remote entropy request timed out: {0}")]
    Timeout(String),
    #[error("bad response from remote entropy service: {0}")]
    BadResponse(String),
    #[error("test source {0} refused without the insecure override")]
    InsecureSourceRefused(String),
    #[error("entropy source I/O failure: {0}")]
    Io(String),
}

/// How concatenated outputs of a source compose, in Intel's terminology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResistanceClass {
    /// Seed-grade: every output is freshly conditioned entropy.
    Multiplicative,
    /// Output of a generator between reseeds.
    Additive,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    OsDevice,
    HardwareSeed,
    HardwareRand,
    RemoteService,
    TestFixed,
}

impl SourceKind {
    pub fn resistance_class(self) -> ResistanceClass {
        match self {
            SourceKind::HardwareSeed => ResistanceClass::Multiplicative,
            SourceKind::HardwareRand | SourceKind::OsDevice => ResistanceClass::Additive,
            SourceKind::RemoteService | SourceKind::TestFixed => ResistanceClass::Unknown,
        }
    }

    /// Retry limit and pause policy. The hardware values follow Intel's
    /// guidance for RDRAND (10 tight retries) and RDSEED (100, with PAUSE).
    fn retry_policy(self) -> (u32, bool) {
        match self {
            SourceKind::HardwareRand => (10, false),
            SourceKind::HardwareSeed => (100, true),
            SourceKind::OsDevice | SourceKind::RemoteService => (0, false),
            SourceKind::TestFixed => (10, false),
        }
    }
}

/// Static description of an entropy source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDescriptor {
    name: String,
    kind: SourceKind,
    block_size: usize,
    retry_limit: u32,
    pause_between_retries: bool,
}

impl SourceDescriptor {
    pub fn new(name: impl Into<String>, kind: SourceKind) -> Self {
        let (retry_limit, pause_between_retries) = kind.retry_policy();
        SourceDescriptor {
            name: name.into(),
            kind,
            block_size: MAX_BLOCK_LEN,
            retry_limit,
            pause_between_retries,
        }
    }

    /// Caps the block size; values above [`MAX_BLOCK_LEN`] are clamped.
    pub fn with_block_size(mut self, block_size: usize) -> Self {
        self.block_size = block_size.clamp(1, MAX_BLOCK_LEN);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn retry_limit(&self) -> u32 {
        self.retry_limit
    }

    pub fn pause_between_retries(&self) -> bool {
        self.pause_between_retries
    }
}

/// A fixed-length unit of raw entropy tagged with its origin.
#[derive(Clone, PartialEq, Eq)]
pub struct EntropyBlock {
    bytes: Vec<u8>,
    source_id: String,
    resistance_class: ResistanceClass,
}

impl EntropyBlock {
    pub fn new(
        bytes: Vec<u8>,
        source_id: impl Into<String>,
        resistance_class: ResistanceClass,
    ) -> Result<Self, EntropyError> {
        if bytes.is_empty() || bytes.len() > MAX_BLOCK_LEN {
            return Err(EntropyError::BadBlockLength(bytes.len()));
        }
        Ok(EntropyBlock {
            bytes,
            source_id: source_id.into(),
            resistance_class,
        })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn resistance_class(&self) -> ResistanceClass {
        self.resistance_class
    }
}

impl std::fmt::Debug for EntropyBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Never print secret material.
        f.debug_struct("EntropyBlock")
            .field("len", &self.bytes.len())
            .field("source_id", &self.source_id)
            .field("resistance_class", &self.resistance_class)
            .finish()
    }
}

/// Result of a single underlying fetch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchStatus {
    Ready,
    /// The source signalled that no random value was available (the
    /// hardware carry-flag-clear case); the buffer contents are undefined.
    NotReady,
}

/// A source of raw entropy. Implementations must tolerate concurrent reads.
pub trait EntropySource: Send + Sync {
    fn descriptor(&self) -> &SourceDescriptor;

    /// Bytes produced by one underlying fetch.
    fn fetch_unit(&self) -> usize;

    fn is_available(&self) -> bool {
        true
    }

    /// Fills `buf` (at most [`fetch_unit`](Self::fetch_unit) bytes) with one fetch.
    fn try_fetch(&self, buf: &mut [u8]) -> Result<FetchStatus, EntropyError>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticRecord {
    pub source: String,
    pub attempts: u32,
    pub latency_ms: f64,
    pub bytes: usize,
}

/// Append-only in-memory log of source reads.
#[derive(Debug, Default)]
pub struct Diagnostics {
    records: Mutex<Vec<DiagnosticRecord>>,
}

impl Diagnostics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, record: DiagnosticRecord) {
        self.records.lock().unwrap().push(record);
    }

    pub fn records(&self) -> Vec<DiagnosticRecord> {
        self.records.lock().unwrap().clone()
    }

    pub fn last(&self) -> Option<DiagnosticRecord> {
        self.records.lock().unwrap().last().cloned()
    }

    /// JSON array of `{source, attempts, latency_ms, bytes}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&*self.records.lock().unwrap()).expect("records serialize")
    }
}

/// Reads exactly `n` bytes from `source`, retrying fetches that signal
/// [`FetchStatus::NotReady`] up to the source's retry limit.
///
/// The total number of fetch attempts (across all fetch units) is recorded
/// in `diag`, including for failed reads.
pub fn read_with_retry(
    source: &dyn EntropySource,
    n: usize,
    diag: &Diagnostics,
) -> Result<EntropyBlock, EntropyError> {
    let desc = source.descriptor();
    if n == 0 || n > desc.block_size() {
        return Err(EntropyError::RequestTooLarge {
            requested: n,
            limit: desc.block_size(),
        });
    }
    if !source.is_available() {
        return Err(EntropyError::SourceUnavailable(desc.name().to_string()));
    }

    let start = Instant::now();
    let unit = source.fetch_unit().max(1);
    let mut out = vec![0u8; n];
    let mut attempts = 0u32;
    let mut result = Ok(());

    'chunks: for chunk in out.chunks_mut(unit) {
        let mut failures = 0u32;
        loop {
            attempts += 1;
            match source.try_fetch(chunk) {
                Ok(FetchStatus::Ready) => break,
                Ok(FetchStatus::NotReady) => {
                    failures += 1;
                    if failures > desc.retry_limit() {
                        result = Err(EntropyError::RetryExhausted {
                            source_name: desc.name().to_string(),
                            attempts,
                        });
                        break 'chunks;
                    }
                    if desc.pause_between_retries() {
                        std::hint::spin_loop();
                    }
                }
                Err(e) => {
                    result = Err(e);
                    break 'chunks;
                }
            }
        }
    }

    diag.record(DiagnosticRecord {
        source: desc.name().to_string(),
        attempts,
        latency_ms: start.elapsed().as_secs_f64() * 1e3,
        bytes: if result.is_ok() { n } else { 0 },
    });
    result?;
    EntropyBlock::new(out, desc.name(), desc.kind().resistance_class())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeedingAuditEntry {
    pub source: String,
    pub kind: SourceKind,
    pub accepted: bool,
    pub insecure_override: bool,
}

/// Record of every source a seeding path consulted.
#[derive(Debug, Default)]
pub struct SeedingAudit {
    entries: Mutex<Vec<SeedingAuditEntry>>,
}

impl SeedingAudit {
    pub fn entries(&self) -> Vec<SeedingAuditEntry> {
        self.entries.lock().unwrap().clone()
    }

    fn push(&self, entry: SeedingAuditEntry) {
        self.entries.lock().unwrap().push(entry);
    }
}

/// Production seeding path: gathers one block from every configured source
/// and conditions them into 48-byte DRBG seed material.
pub struct Seeder {
    sources: Vec<Arc<dyn EntropySource>>,
    insecure_override: bool,
    diagnostics: Arc<Diagnostics>,
    audit: Arc<SeedingAudit>,
}

impl Seeder {
    pub fn new(sources: Vec<Arc<dyn EntropySource>>) -> Self {
        Seeder {
            sources,
            insecure_override: false,
            diagnostics: Arc::new(Diagnostics::new()),
            audit: Arc::new(SeedingAudit::default()),
        }
    }

    /// OS device plus hardware seed instruction when the CPU has it.
    pub fn system() -> Self {
        let mut sources: Vec<Arc<dyn EntropySource>> = vec![Arc::new(OsSource::new())];
        let hw = HardwareSeedSource::new();
        if hw.is_available() {
            sources.push(Arc::new(hw));
        }
        Seeder::new(sources)
    }

    /// Permits `test_fixed` sources. Every use is still audited.
    pub fn with_insecure_override(mut self, allow: bool) -> Self {
        self.insecure_override = allow;
        self
    }

    pub fn insecure_override(&self) -> bool {
        self.insecure_override
    }

    pub fn sources(&self) -> &[Arc<dyn EntropySource>] {
        &self.sources
    }

    pub fn diagnostics(&self) -> &Arc<Diagnostics> {
        &self.diagnostics
    }

    pub fn audit(&self) -> &Arc<SeedingAudit> {
        &self.audit
    }

    /// Reads `n` bytes from each source. Fails closed on the first error.
    pub fn gather(&self, n: usize) -> Result<Vec<EntropyBlock>, EntropyError> {
        if self.sources.is_empty() {
            return Err(EntropyError::EmptyInput);
        }
        let mut blocks = Vec::with_capacity(self.sources.len());
        for source in &self.sources {
            let desc = source.descriptor();
            let refused = desc.kind() == SourceKind::TestFixed && !self.insecure_override;
            self.audit.push(SeedingAuditEntry {
                source: desc.name().to_string(),
                kind: desc.kind(),
                accepted: !refused,
                insecure_override: self.insecure_override,
            });
            if refused {
                return Err(EntropyError::InsecureSourceRefused(desc.name().to_string()));
            }
            blocks.push(read_with_retry(source.as_ref(), n, &self.diagnostics)?);
        }
        Ok(blocks)
    }

    /// Fresh 48-byte seed material, domain-separated by `tag`.
    pub fn seed_material(&self, tag: &[u8]) -> Result<[u8; 48], EntropyError> {
        let blocks = self.gather(48)?;
        let mixed = mix(&blocks, 48, tag)?;
        let mut seed = [0u8; 48];
        seed.copy_from_slice(&mixed);
        Ok(seed)
    }
}
