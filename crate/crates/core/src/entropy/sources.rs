// SPDX-License-Identifier: Apache-2.0

use std::sync::{Arc, Mutex};

use super::{
    mix, read_with_retry, Diagnostics, EntropyBlock, EntropyError, EntropySource, FetchStatus,
    SourceDescriptor, SourceKind,
};

/// The operating system's CSPRNG. There is one pool behind it, so reads are
/// serialized through a lock, as with a single kernel entropy pool.
pub struct OsSource {
    desc: SourceDescriptor,
    pool: Mutex<()>,
}

impl OsSource {
    pub fn new() -> Self {
        OsSource {
            desc: SourceDescriptor::new("os", SourceKind::OsDevice),
            pool: Mutex::new(()),
        }
    }
}

impl Default for OsSource {
    fn default() -> Self {
        Self::new()
    }
}

impl EntropySource for OsSource {
    fn descriptor(&self) -> &SourceDescriptor {
        &self.desc
    }

    fn fetch_unit(&self) -> usize {
        self.desc.block_size()
    }

    fn try_fetch(&self, buf: &mut [u8]) -> Result<FetchStatus, EntropyError> {
        let _guard = self.pool.lock().unwrap();
        getrandom::fill(buf).map_err(|e| EntropyError::Io(e.to_string()))?;
        Ok(FetchStatus::Ready)
    }
}

#[cfg(target_arch = "x86_64")]
mod x86 {
    use core::arch::x86_64::{_rdrand64_step, _rdseed64_step};

    pub fn has_rdrand() -> bool {
        std::arch::is_x86_feature_detected!("rdrand")
    }

    pub fn has_rdseed() -> bool {
        std::arch::is_x86_feature_detected!("rdseed")
    }

    #[target_feature(enable = "rdrand")]
    pub unsafe fn rdrand64() -> Option<u64> {
        let mut v = 0u64;
        (_rdrand64_step(&mut v) == 1).then_some(v)
    }

    #[target_feature(enable = "rdseed")]
    pub unsafe fn rdseed64() -> Option<u64> {
        let mut v = 0u64;
        (_rdseed64_step(&mut v) == 1).then_some(v)
    }
}

#[cfg(not(target_arch = "x86_64"))]
mod x86 {
    pub fn has_rdrand() -> bool {
        false
    }

    pub fn has_rdseed() -> bool {
        false
    }

    pub unsafe fn rdrand64() -> Option<u64> {
        None
    }

    pub unsafe fn rdseed64() -> Option<u64> {
        None
    }
}

fn fill_from_word(buf: &mut [u8], word: Option<u64>) -> FetchStatus {
    match word {
        Some(w) => {
            let n = buf.len().min(8);
            buf[..n].copy_from_slice(&w.to_le_bytes()[..n]);
            FetchStatus::Ready
        }
        None => FetchStatus::NotReady,
    }
}

/// The on-chip DRNG's generator output (RDRAND). Carry-flag clear maps to
/// [`FetchStatus::NotReady`].
pub struct HardwareRandSource {
    desc: SourceDescriptor,
    available: bool,
}

impl HardwareRandSource {
    pub fn new() -> Self {
        HardwareRandSource {
            desc: SourceDescriptor::new("rdrand", SourceKind::HardwareRand),
            available: x86::has_rdrand(),
        }
    }
}

impl Default for HardwareRandSource {
    fn default() -> Self {
        Self::new()
    }
}

impl EntropySource for HardwareRandSource {
    fn descriptor(&self) -> &SourceDescriptor {
        &self.desc
    }

    fn fetch_unit(&self) -> usize {
        8
    }

    fn is_available(&self) -> bool {
        self.available
    }

    fn try_fetch(&self, buf: &mut [u8]) -> Result<FetchStatus, EntropyError> {
        if !self.available {
            return Err(EntropyError::SourceUnavailable(self.desc.name().into()));
        }
        // SAFETY: feature presence checked at construction.
        let word = unsafe { x86::rdrand64() };
        Ok(fill_from_word(buf, word))
    }
}

/// The on-chip DRNG's conditioned seed output (RDSEED).
pub struct HardwareSeedSource {
    desc: SourceDescriptor,
    available: bool,
}

impl HardwareSeedSource {
    pub fn new() -> Self {
        HardwareSeedSource {
            desc: SourceDescriptor::new("rdseed", SourceKind::HardwareSeed),
            available: x86::has_rdseed(),
        }
    }
}

impl Default for HardwareSeedSource {
    fn default() -> Self {
        Self::new()
    }
}

impl EntropySource for HardwareSeedSource {
    fn descriptor(&self) -> &SourceDescriptor {
        &self.desc
    }

    fn fetch_unit(&self) -> usize {
        8
    }

    fn is_available(&self) -> bool {
        self.available
    }

    fn try_fetch(&self, buf: &mut [u8]) -> Result<FetchStatus, EntropyError> {
        if !self.available {
            return Err(EntropyError::SourceUnavailable(self.desc.name().into()));
        }
        // SAFETY: feature presence checked at construction.
        let word = unsafe { x86::rdseed64() };
        Ok(fill_from_word(buf, word))
    }
}

/// Seed-grade output derived from a generator-grade source: each 32-byte
/// fetch hashes 512 reads of 16 bytes, so at least one read spans a reseed
/// of the underlying generator.
pub struct EmulatedSeedSource {
    desc: SourceDescriptor,
    inner: Arc<dyn EntropySource>,
    diagnostics: Diagnostics,
}

impl EmulatedSeedSource {
    pub const SAMPLES: usize = 512;
    pub const SAMPLE_LEN: usize = 16;

    pub fn new(inner: Arc<dyn EntropySource>) -> Self {
        let name = format!("{}-seed-emulated", inner.descriptor().name());
        EmulatedSeedSource {
            desc: SourceDescriptor::new(name, SourceKind::HardwareSeed),
            inner,
            diagnostics: Diagnostics::new(),
        }
    }

    /// Reads made against the wrapped source.
    pub fn inner_diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }
}

impl EntropySource for EmulatedSeedSource {
    fn descriptor(&self) -> &SourceDescriptor {
        &self.desc
    }

    fn fetch_unit(&self) -> usize {
        32
    }

    fn is_available(&self) -> bool {
        self.inner.is_available()
    }

    fn try_fetch(&self, buf: &mut [u8]) -> Result<FetchStatus, EntropyError> {
        let samples = (0..Self::SAMPLES)
            .map(|_| read_with_retry(self.inner.as_ref(), Self::SAMPLE_LEN, &self.diagnostics))
            .collect::<Result<Vec<EntropyBlock>, _>>()?;
        let out = mix(&samples, buf.len(), b"rdseed-emulation")?;
        buf.copy_from_slice(&out);
        Ok(FetchStatus::Ready)
    }
}

/// Returns the same bytes on every fetch. Test use only: production seeding
/// refuses it without the insecure override.
pub struct FixedSource {
    desc: SourceDescriptor,
    pattern: Vec<u8>,
}

impl FixedSource {
    pub fn new(name: impl Into<String>, pattern: Vec<u8>) -> Self {
        assert!(!pattern.is_empty(), "fixed source needs a non-empty pattern");
        FixedSource {
            desc: SourceDescriptor::new(name, SourceKind::TestFixed),
            pattern,
        }
    }
}

impl EntropySource for FixedSource {
    fn descriptor(&self) -> &SourceDescriptor {
        &self.desc
    }

    fn fetch_unit(&self) -> usize {
        self.desc.block_size()
    }

    fn try_fetch(&self, buf: &mut [u8]) -> Result<FetchStatus, EntropyError> {
        for (b, p) in buf.iter_mut().zip(self.pattern.iter().cycle()) {
            *b = *p;
        }
        Ok(FetchStatus::Ready)
    }
}

struct Script {
    // Remaining not-ready signals for each upcoming fetch unit.
    failures: Vec<u32>,
    never_ready: bool,
    counter: u64,
}

/// Simulated hardware-style source with a programmable not-ready pattern.
/// Produces 8 bytes per fetch from a counter-driven mixer.
pub struct ScriptedSource {
    desc: SourceDescriptor,
    script: Mutex<Script>,
}

impl ScriptedSource {
    /// `failures[i]` not-ready signals precede the i-th successful fetch.
    pub fn with_failures(name: impl Into<String>, kind: SourceKind, failures: Vec<u32>) -> Self {
        ScriptedSource {
            desc: SourceDescriptor::new(name, kind),
            script: Mutex::new(Script {
                failures: failures.into_iter().rev().collect(),
                never_ready: false,
                counter: 0,
            }),
        }
    }

    pub fn always_ready(name: impl Into<String>, kind: SourceKind) -> Self {
        Self::with_failures(name, kind, Vec::new())
    }

    pub fn never_ready(name: impl Into<String>, kind: SourceKind) -> Self {
        let s = Self::always_ready(name, kind);
        s.script.lock().unwrap().never_ready = true;
        s
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl EntropySource for ScriptedSource {
    fn descriptor(&self) -> &SourceDescriptor {
        &self.desc
    }

    fn fetch_unit(&self) -> usize {
        8
    }

    fn try_fetch(&self, buf: &mut [u8]) -> Result<FetchStatus, EntropyError> {
        let mut s = self.script.lock().unwrap();
        if s.never_ready {
            return Ok(FetchStatus::NotReady);
        }
        if let Some(left) = s.failures.last_mut() {
            if *left > 0 {
                *left -= 1;
                return Ok(FetchStatus::NotReady);
            }
            s.failures.pop();
        }
        s.counter += 1;
        let word = splitmix64(s.counter);
        Ok(fill_from_word(buf, Some(word)))
    }
}
