// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::QualityError;
use crate::bitgen::{spawn_streams, GeneratorHandle, RunNonce, SeedAuditLog, SpawnOptions};
use crate::entropy::{
    EntropyError, EntropySource, FetchStatus, HardwareRandSource, HardwareSeedSource, OsSource,
    Seeder,
};

pub const MIN_DURATION: Duration = Duration::from_secs(1);

const WORKER_BUF: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchSource {
    /// One DRBG per worker.
    Drbg,
    /// One OS source, behind its lock, shared by every worker.
    SharedOs,
    HardwareRand,
    HardwareSeed,
}

impl BenchSource {
    pub fn name(self) -> &'static str {
        match self {
            BenchSource::Drbg => "drbg",
            BenchSource::SharedOs => "shared-os",
            BenchSource::HardwareRand => "hardware-rand",
            BenchSource::HardwareSeed => "hardware-seed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            BenchSource::Drbg,
            BenchSource::SharedOs,
            BenchSource::HardwareRand,
            BenchSource::HardwareSeed,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BenchConfig {
    pub source: BenchSource,
    pub threads: usize,
}

impl BenchConfig {
    pub fn new(source: BenchSource, threads: usize) -> Self {
        BenchConfig { source, threads }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchEntry {
    pub source: BenchSource,
    pub threads: usize,
    /// Bytes produced inside the measurement window, summed over workers.
    pub bytes: u64,
    /// Bytes produced including warm-up, summed over workers.
    pub bytes_total: u64,
    /// Independent count of the same bytes from the generators' own
    /// counters (DRBG words emitted, or bytes served by the source).
    pub bytes_counted: u64,
    pub wall_time_s: f64,
    pub per_thread_mb_s: Vec<f64>,
    pub aggregate_mb_s: f64,
    /// Set when the configuration could not run; other fields are zero.
    pub error: Option<String>,
}

impl BenchEntry {
    pub fn mean_per_thread_mb_s(&self) -> f64 {
        if self.per_thread_mb_s.is_empty() {
            0.0
        } else {
            self.aggregate_mb_s / self.per_thread_mb_s.len() as f64
        }
    }

    fn failed(cfg: BenchConfig, err: String) -> Self {
        BenchEntry {
            source: cfg.source,
            threads: cfg.threads,
            bytes: 0,
            bytes_total: 0,
            bytes_counted: 0,
            wall_time_s: 0.0,
            per_thread_mb_s: Vec::new(),
            aggregate_mb_s: 0.0,
            error: Some(err),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub duration_s: f64,
    pub warmup_s: f64,
    pub entries: Vec<BenchEntry>,
}

impl BenchReport {
    pub fn entry(&self, source: BenchSource, threads: usize) -> Option<&BenchEntry> {
        self.entries
            .iter()
            .find(|e| e.source == source && e.threads == threads)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>7} {:>14} {:>10} {:>14} {:>14}",
            "source", "threads", "bytes", "wall_s", "MB/s/thread", "aggregate MB/s"
        );
        for e in &self.entries {
            match &e.error {
                Some(err) => {
                    let _ = writeln!(out, "{:<14} {:>7} {}", e.source.name(), e.threads, err);
                }
                None => {
                    let _ = writeln!(
                        out,
                        "{:<14} {:>7} {:>14} {:>10.3} {:>14.1} {:>14.1}",
                        e.source.name(),
                        e.threads,
                        e.bytes,
                        e.wall_time_s,
                        e.mean_per_thread_mb_s(),
                        e.aggregate_mb_s
                    );
                }
            }
        }
        out
    }
}

/// Runs each configuration for `duration`, discarding the first 10% of it
/// as warm-up. Unavailable hardware is reported in the entry's `error`.
pub fn bench_throughput(
    configs: &[BenchConfig],
    duration: Duration,
) -> Result<BenchReport, QualityError> {
    if duration < MIN_DURATION {
        return Err(QualityError::DurationTooShort(duration.as_secs_f64()));
    }
    if configs.is_empty() {
        return Err(QualityError::NoConfigs);
    }
    if configs.iter().any(|c| c.threads == 0) {
        return Err(QualityError::NoThreads);
    }
    let warmup = duration / 10;
    let mut entries = Vec::with_capacity(configs.len());
    for &cfg in configs {
        entries.push(match run_config(cfg, duration, warmup) {
            Ok(e) => e,
            Err(QualityError::Entropy(e @ EntropyError::SourceUnavailable(_))) => {
                BenchEntry::failed(cfg, e.to_string())
            }
            Err(e) => return Err(e),
        });
    }
    Ok(BenchReport {
        duration_s: duration.as_secs_f64(),
        warmup_s: warmup.as_secs_f64(),
        entries,
    })
}

struct WorkerResult {
    measured_bytes: u64,
    measured_secs: f64,
    total_bytes: u64,
    counted_bytes: u64,
}

enum Worker {
    Drbg(Box<GeneratorHandle>, Seeder),
    Source(Arc<dyn EntropySource>),
}

impl Worker {
    fn fill(&mut self, buf: &mut [u8]) -> Result<(), QualityError> {
        match self {
            Worker::Drbg(g, seeder) => match g.fill_bytes(buf) {
                Err(crate::bitgen::BitgenError::ReseedRequired) => {
                    g.reseed(&seeder.seed_material(b"dprand/bench-reseed")?)?;
                    Ok(g.fill_bytes(buf)?)
                }
                r => Ok(r?),
            },
            Worker::Source(src) => {
                let unit = src.fetch_unit().max(1);
                for chunk in buf.chunks_mut(unit) {
                    while src.try_fetch(chunk)? == FetchStatus::NotReady {
                        std::hint::spin_loop();
                    }
                }
                Ok(())
            }
        }
    }

    fn counted_bytes(&self) -> Option<u64> {
        match self {
            Worker::Drbg(g, _) => Some(g.words_emitted() * 4),
            Worker::Source(_) => None,
        }
    }
}

fn hardware(source: BenchSource) -> Result<Arc<dyn EntropySource>, QualityError> {
    let src: Arc<dyn EntropySource> = match source {
        BenchSource::HardwareRand => Arc::new(HardwareRandSource::new()),
        _ => Arc::new(HardwareSeedSource::new()),
    };
    if !src.is_available() {
        return Err(EntropyError::SourceUnavailable(src.descriptor().name().into()).into());
    }
    Ok(src)
}

fn make_workers(cfg: BenchConfig) -> Result<(Vec<Worker>, Option<Arc<CountingSource>>), QualityError> {
    match cfg.source {
        BenchSource::Drbg => {
            let seeder = Seeder::system();
            let opts = SpawnOptions::new(RunNonce::fresh()?);
            let handles = spawn_streams(&seeder, cfg.threads, &opts, &SeedAuditLog::new())?;
            Ok((
                handles
                    .into_iter()
                    .map(|h| Worker::Drbg(Box::new(h), Seeder::system()))
                    .collect(),
                None,
            ))
        }
        BenchSource::SharedOs => {
            let shared = Arc::new(CountingSource::new(Arc::new(OsSource::new())));
            let workers = (0..cfg.threads)
                .map(|_| Worker::Source(shared.clone() as Arc<dyn EntropySource>))
                .collect();
            Ok((workers, Some(shared)))
        }
        BenchSource::HardwareRand | BenchSource::HardwareSeed => {
            hardware(cfg.source)?;
            // Each worker gets its own instance; the instruction is per core.
            let mut counters = Vec::new();
            let mut workers = Vec::new();
            for _ in 0..cfg.threads {
                let c = Arc::new(CountingSource::new(hardware(cfg.source)?));
                counters.push(c.clone());
                workers.push(Worker::Source(c as Arc<dyn EntropySource>));
            }
            let merged = Arc::new(CountingSource::merged(counters));
            Ok((workers, Some(merged)))
        }
    }
}

fn run_config(cfg: BenchConfig, duration: Duration, warmup: Duration) -> Result<BenchEntry, QualityError> {
    let (workers, counter) = make_workers(cfg)?;
    let (tx, rx) = mpsc::channel::<Result<WorkerResult, QualityError>>();
    let start = Instant::now();
    std::thread::scope(|scope| {
        for mut w in workers {
            let tx = tx.clone();
            scope.spawn(move || {
                let _ = tx.send(drive(&mut w, duration, warmup));
            });
        }
    });
    drop(tx);
    let wall = start.elapsed().as_secs_f64();

    let mut results = Vec::with_capacity(cfg.threads);
    for r in rx {
        results.push(r?);
    }
    let per_thread: Vec<f64> = results
        .iter()
        .map(|r| r.measured_bytes as f64 / r.measured_secs / 1e6)
        .collect();
    let bytes_total = results.iter().map(|r| r.total_bytes).sum();
    let bytes_counted = match counter {
        Some(c) => c.served(),
        None => results.iter().map(|r| r.counted_bytes).sum(),
    };
    Ok(BenchEntry {
        source: cfg.source,
        threads: cfg.threads,
        bytes: results.iter().map(|r| r.measured_bytes).sum(),
        bytes_total,
        bytes_counted,
        wall_time_s: wall,
        aggregate_mb_s: per_thread.iter().sum(),
        per_thread_mb_s: per_thread,
        error: None,
    })
}

fn drive(w: &mut Worker, duration: Duration, warmup: Duration) -> Result<WorkerResult, QualityError> {
    let mut buf = vec![0u8; WORKER_BUF];
    let start = Instant::now();
    let mut total = 0u64;
    while start.elapsed() < warmup {
        w.fill(&mut buf)?;
        total += buf.len() as u64;
    }
    let measure_start = Instant::now();
    let mut measured = 0u64;
    while start.elapsed() < duration {
        w.fill(&mut buf)?;
        measured += buf.len() as u64;
    }
    let measured_secs = measure_start.elapsed().as_secs_f64();
    Ok(WorkerResult {
        measured_bytes: measured,
        measured_secs,
        total_bytes: total + measured,
        counted_bytes: w.counted_bytes().unwrap_or(0),
    })
}

/// Passes fetches through and counts the bytes it served.
struct CountingSource {
    inner: Option<Arc<dyn EntropySource>>,
    served: std::sync::atomic::AtomicU64,
    parts: Vec<Arc<CountingSource>>,
}

impl CountingSource {
    fn new(inner: Arc<dyn EntropySource>) -> Self {
        CountingSource {
            inner: Some(inner),
            served: Default::default(),
            parts: Vec::new(),
        }
    }

    fn merged(parts: Vec<Arc<CountingSource>>) -> Self {
        CountingSource {
            inner: None,
            served: Default::default(),
            parts,
        }
    }

    fn served(&self) -> u64 {
        use std::sync::atomic::Ordering::Relaxed;
        self.served.load(Relaxed) + self.parts.iter().map(|p| p.served()).sum::<u64>()
    }

    fn inner(&self) -> &Arc<dyn EntropySource> {
        self.inner.as_ref().expect("merged counters are not readable")
    }
}

impl EntropySource for CountingSource {
    fn descriptor(&self) -> &crate::entropy::SourceDescriptor {
        self.inner().descriptor()
    }

    fn fetch_unit(&self) -> usize {
        self.inner().fetch_unit()
    }

    fn is_available(&self) -> bool {
        self.inner().is_available()
    }

    fn try_fetch(&self, buf: &mut [u8]) -> Result<FetchStatus, EntropyError> {
        let status = self.inner().try_fetch(buf)?;
        if status == FetchStatus::Ready {
            self.served
                .fetch_add(buf.len() as u64, std::sync::atomic::Ordering::Relaxed);
        }
        Ok(status)
    }
}
