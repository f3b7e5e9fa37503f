// SPDX-License-Identifier: Apache-2.0

//! `dprand` command-line interface.
//!
//! Exit status: 0 on success, 1 on domain errors, 2 on usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dprand::attack::{self, Channel, Validation};
use dprand::bitgen::mt19937::MtState;
use dprand::budget::{compute_budget, BudgetSpec};
use dprand::drbg::seed_from_hex;
use dprand::entropy::{
    fetch_remote, read_with_retry, Diagnostics, EmulatedSeedSource, EntropyBlock, EntropySource,
    FixedSource, HardwareRandSource, HardwareSeedSource, OsSource, Seeder, MAX_BLOCK_LEN,
};
use dprand::mechanisms::{geometric_mechanism, laplace_mechanism_insecure, NoiseValue};
use dprand::quality::{bench_throughput, BenchConfig, BenchSource};
use dprand::{DrbgConfig, GeneratorHandle, MechanismParams};

const REMOTE_ENV: &str = "DP_ENTROPY_REMOTE";

#[derive(Parser, Debug)]
#[command(name = "dprand", version, about = "Randomness toolkit for differential privacy")]
struct Cli {
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Allow insecure paths: fixed test entropy, MT19937, floating-point Laplace.
    #[arg(long, global = true)]
    insecure_override: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Randomness requirements of a hierarchical histogram workload.
    Budget {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Draw DP noise.
    Sample {
        #[arg(long, value_enum)]
        mechanism: MechanismArg,
        #[arg(long, allow_negative_numbers = true)]
        epsilon: f64,
        #[arg(long, allow_negative_numbers = true)]
        sensitivity: f64,
        #[arg(long)]
        count: usize,
        /// 48-byte DRBG seed as hex, for reproducible demos. Implies --insecure-override.
        #[arg(long)]
        seed_hex: Option<String>,
    },
    /// Generator state-recovery demonstrations.
    Attack {
        #[command(subcommand)]
        target: AttackTarget,
    },
    /// Known-answer self test.
    Selftest {
        /// Directory of CAVP .rsp files; defaults to the bundled vectors.
        #[arg(long)]
        kat_dir: Option<PathBuf>,
    },
    /// Entropy source tools.
    Entropy {
        #[command(subcommand)]
        action: EntropyAction,
    },
    /// Throughput benchmark.
    Bench {
        /// Comma-separated worker counts.
        #[arg(long, value_delimiter = ',', default_value = "1,4")]
        threads: Vec<usize>,
        /// Seconds per configuration.
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        /// Comma-separated sources: drbg, shared-os, hardware-rand, hardware-seed.
        #[arg(long, value_delimiter = ',', default_value = "drbg,shared-os,hardware-rand,hardware-seed")]
        sources: Vec<String>,
    },
}

#[derive(Subcommand, Debug)]
enum AttackTarget {
    /// Recover MT19937 state from a measurement dump and predict the rest.
    Mt19937 {
        /// JSON dump: {"cells": [...], "channel": "identity"}.
        #[arg(long)]
        cells: PathBuf,
        #[arg(long, value_enum)]
        channel: Option<ChannelArg>,
        /// Write a fresh 10,000-cell all-zero MT19937 dump with this seed to
        /// --cells before attacking it. Requires --insecure-override.
        #[arg(long)]
        demo_seed: Option<u32>,
    },
}

#[derive(Subcommand, Debug)]
enum EntropyAction {
    /// Read from one source and report diagnostics.
    Probe {
        #[arg(long, value_enum, default_value = "os")]
        source: SourceArg,
        #[arg(long, default_value_t = 32)]
        n: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum MechanismArg {
    Geometric,
    LaplaceInsecure,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ChannelArg {
    Identity,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SourceArg {
    Os,
    HardwareRand,
    HardwareSeed,
    HardwareSeedEmulated,
    Remote,
    TestFixed,
}

/// A failure reported with exit status 1.
struct DomainError {
    message: String,
    /// JSON body to print anyway, e.g. a refuted transcript.
    body: Option<Value>,
}

impl<E: std::fmt::Display> From<E> for DomainError {
    fn from(e: E) -> Self {
        DomainError {
            message: e.to_string(),
            body: None,
        }
    }
}

struct Output {
    json: Value,
    text: String,
}

fn schema(name: &str) -> String {
    format!("dprand.{name}/1")
}

fn with_schema(name: &str, mut body: Value) -> Value {
    if let Value::Object(map) = &mut body {
        map.insert("schema".into(), Value::String(schema(name)));
    }
    body
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            eprintln!("{e}");
            eprintln!("{}", Cli::command().render_long_help());
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(out) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&out.json).unwrap());
            } else {
                print!("{}", out.text);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            if json {
                let body = e.body.unwrap_or_else(|| json!({ "schema": schema("error") }));
                let mut body = body;
                if let Value::Object(m) = &mut body {
                    m.insert("error".into(), Value::String(e.message.clone()));
                }
                println!("{}", serde_json::to_string_pretty(&body).unwrap());
            }
            eprintln!("error: {}", e.message);
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Output, DomainError> {
    let insecure = cli.insecure_override;
    match cli.command {
        Command::Budget { spec } => budget(&spec),
        Command::Sample {
            mechanism,
            epsilon,
            sensitivity,
            count,
            seed_hex,
        } => sample(mechanism, epsilon, sensitivity, count, seed_hex, insecure),
        Command::Attack {
            target:
                AttackTarget::Mt19937 {
                    cells,
                    channel,
                    demo_seed,
                },
        } => attack_mt(&cells, channel, demo_seed, insecure),
        Command::Selftest { kat_dir } => selftest(kat_dir.as_deref()),
        Command::Entropy {
            action: EntropyAction::Probe { source, n },
        } => probe(source, n, insecure),
        Command::Bench {
            threads,
            duration,
            sources,
        } => bench(&threads, duration, &sources),
    }
}

fn read_file(path: &Path) -> Result<String, DomainError> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn budget(path: &Path) -> Result<Output, DomainError> {
    let spec = BudgetSpec::from_json(&read_file(path)?)?;
    let report = compute_budget(&spec)?;
    Ok(Output {
        json: with_schema("budget", serde_json::to_value(&report)?),
        text: report.to_table(),
    })
}

fn sample(
    mechanism: MechanismArg,
    epsilon: f64,
    sensitivity: f64,
    count: usize,
    seed_hex: Option<String>,
    insecure: bool,
) -> Result<Output, DomainError> {
    let params = MechanismParams::new(epsilon, sensitivity)?;
    let seeded = seed_hex.is_some();
    let insecure = insecure || seeded;
    if mechanism == MechanismArg::LaplaceInsecure && !insecure {
        return Err("laplace-insecure requires --insecure-override".into());
    }
    let seed = match seed_hex {
        Some(h) => seed_from_hex(&h)?,
        None => Seeder::system().seed_material(b"dprand/cli/sample")?,
    };
    let mut g = GeneratorHandle::drbg_from_seed(&seed, DrbgConfig::default())?;
    let (name, values): (&str, Vec<NoiseValue>) = match mechanism {
        MechanismArg::Geometric => (
            "geometric",
            geometric_mechanism(&vec![0; count], &params, &mut g)?
                .into_iter()
                .map(|m| m.value)
                .collect(),
        ),
        MechanismArg::LaplaceInsecure => (
            "laplace-insecure",
            laplace_mechanism_insecure(&vec![0.0; count], &params, &mut g, true)?
                .into_iter()
                .map(|m| m.value)
                .collect(),
        ),
    };
    let mut text = String::from("index,value\n");
    for (i, v) in values.iter().enumerate() {
        match v {
            NoiseValue::Integer(x) => text.push_str(&format!("{i},{x}\n")),
            NoiseValue::Real(x) => text.push_str(&format!("{i},{x:?}\n")),
        }
    }
    Ok(Output {
        json: json!({
            "schema": schema("sample"),
            "mechanism": name,
            "epsilon": epsilon,
            "sensitivity": sensitivity,
            "alpha": params.alpha(),
            "count": count,
            "seeded": seeded,
            "insecure": mechanism == MechanismArg::LaplaceInsecure,
            "values": values,
        }),
        text,
    })
}

fn write_demo_dump(path: &Path, seed: u32) -> Result<(), DomainError> {
    let mut g = GeneratorHandle::mt19937_insecure(seed);
    let cells = attack::identity_channel_measurements(&[0; 10_000], &mut g)?;
    let body = json!({ "cells": cells, "channel": "identity" });
    std::fs::write(path, serde_json::to_string(&body)?)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(())
}

fn attack_mt(
    path: &Path,
    channel: Option<ChannelArg>,
    demo_seed: Option<u32>,
    insecure: bool,
) -> Result<Output, DomainError> {
    if let Some(seed) = demo_seed {
        if !insecure {
            return Err("--demo-seed drives MT19937 and requires --insecure-override".into());
        }
        write_demo_dump(path, seed)?;
    }
    let dump: Value = serde_json::from_str(&read_file(path)?)?;
    let cells_value = match &dump {
        Value::Array(_) => &dump,
        _ => dump.get("cells").ok_or("dump has no \"cells\" array")?,
    };
    let cells: Vec<i64> = cells_value
        .as_array()
        .ok_or("\"cells\" must be an array")?
        .iter()
        .enumerate()
        .map(|(i, v)| v.as_i64().ok_or(format!("cell {i} is not a 64-bit integer")))
        .collect::<Result<_, _>>()?;
    let channel_name = match channel {
        Some(ChannelArg::Identity) => "identity",
        None => dump.get("channel").and_then(Value::as_str).unwrap_or("identity"),
    };
    let channel = match channel_name {
        "identity" => Channel::Identity,
        other => return Err(format!("unsupported channel {other:?}").into()),
    };

    let result = attack::attack_cells(&cells, &channel);
    let transcript = match result {
        Ok(t) => t,
        Err(attack::AttackError::Refuted(t)) => {
            return Err(DomainError {
                message: "refuted: cell 313 prediction did not match".into(),
                body: Some(with_schema("attack", serde_json::to_value(&*t)?)),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let verdict = match transcript.validation {
        Validation::Validated => "validated",
        Validation::Refuted => "refuted",
    };
    let text = format!(
        "cells: {}\nrecovered words: {}\ncell 313: predicted {}, observed {} ({verdict})\npredicted cells: {}\nnonzero recovered true counts: {}\n",
        transcript.observed_cells.len(),
        transcript.recovered_words.len(),
        transcript.predicted_validation_cell,
        cells[312],
        transcript.predicted_cells.len(),
        transcript.recovered_true_counts.iter().filter(|&&c| c != 0).count(),
    );
    Ok(Output {
        json: with_schema("attack", serde_json::to_value(&transcript)?),
        text,
    })
}

fn selftest(kat_dir: Option<&Path>) -> Result<Output, DomainError> {
    let summary = match kat_dir {
        Some(d) => dprand::kat::run_dir(d).map_err(|e| format!("{}: {e}", d.display()))?,
        None => dprand::kat::run_bundled(),
    };
    let block = EntropyBlock::new(vec![0u8; 48], "selftest", dprand::entropy::ResistanceClass::Unknown)?;
    let mix_ok = hex::encode(dprand::entropy::mix(&[block], 48, b"seed")?)
        == "ae8b2ab2b6ae2d7e2d99cb49131f4edbc140421f633e85a225707c4c8a4b77cf0dc936de5f854aaaa7c213b1db103b72";
    let mut mt = MtState::from_seed(5489);
    let mt_ok = [3499211612u32, 581869302, 3890346734, 3586334585, 545404204]
        .iter()
        .all(|&w| mt.next_u32() == w);

    let ok = summary.all_passed() && mix_ok && mt_ok;
    let body = json!({
        "schema": schema("selftest"),
        "passed": ok,
        "kat": summary,
        "mix": mix_ok,
        "mt19937_reference": mt_ok,
    });
    let mut text = format!(
        "DRBG known-answer vectors: {}/{} passed ({} files)\n",
        summary.passed,
        summary.total,
        summary.files.len()
    );
    for f in summary.failures.iter().take(10) {
        text.push_str(&format!("  FAIL {} section {} count {}: {}\n", f.file, f.section, f.count, f.detail));
    }
    text.push_str(&format!("mixer vector: {}\n", if mix_ok { "ok" } else { "FAIL" }));
    text.push_str(&format!("MT19937 reference stream: {}\n", if mt_ok { "ok" } else { "FAIL" }));
    if !ok {
        return Err(DomainError {
            message: "self test failed".into(),
            body: Some(body),
        });
    }
    Ok(Output { json: body, text })
}

fn probe(source: SourceArg, n: usize, insecure: bool) -> Result<Output, DomainError> {
    if n == 0 || n > MAX_BLOCK_LEN {
        return Err(format!("--n must be in 1..={MAX_BLOCK_LEN}").into());
    }
    let diag = Diagnostics::new();
    let block = match source {
        SourceArg::Remote => {
            let endpoint = std::env::var(REMOTE_ENV)
                .map_err(|_| format!("{REMOTE_ENV} is not set"))?;
            fetch_remote(&endpoint, n, &diag)?
        }
        other => {
            let src: Arc<dyn EntropySource> = match other {
                SourceArg::Os => Arc::new(OsSource::new()),
                SourceArg::HardwareRand => Arc::new(HardwareRandSource::new()),
                SourceArg::HardwareSeed => Arc::new(HardwareSeedSource::new()),
                SourceArg::HardwareSeedEmulated => {
                    Arc::new(EmulatedSeedSource::new(Arc::new(HardwareRandSource::new())))
                }
                SourceArg::TestFixed => {
                    if !insecure {
                        return Err("test-fixed source requires --insecure-override".into());
                    }
                    Arc::new(FixedSource::new("test-fixed", vec![0xa5]))
                }
                SourceArg::Remote => unreachable!(),
            };
            read_with_retry(src.as_ref(), n, &diag)?
        }
    };
    let rec = diag.last().expect("read recorded");
    let body = json!({
        "schema": schema("entropy-probe"),
        "source": block.source_id(),
        "resistance_class": block.resistance_class(),
        "bytes": block.len(),
        "attempts": rec.attempts,
        "latency_ms": rec.latency_ms,
        "hex": hex::encode(block.bytes()),
        "diagnostics": diag.records(),
    });
    let text = format!(
        "source: {}\nresistance class: {:?}\nbytes: {}\nattempts: {}\nlatency: {:.3} ms\nhex: {}\n",
        block.source_id(),
        block.resistance_class(),
        block.len(),
        rec.attempts,
        rec.latency_ms,
        hex::encode(block.bytes())
    );
    Ok(Output { json: body, text })
}

fn bench(threads: &[usize], duration: f64, sources: &[String]) -> Result<Output, DomainError> {
    if !duration.is_finite() || duration < 0.0 {
        return Err(format!("invalid duration {duration}").into());
    }
    let mut configs = Vec::new();
    for s in sources {
        let source = BenchSource::parse(s).ok_or(format!("unknown bench source {s:?}"))?;
        for &t in threads {
            configs.push(BenchConfig::new(source, t));
        }
    }
    let report = bench_throughput(&configs, Duration::from_secs_f64(duration))?;
    Ok(Output {
        json: with_schema("bench", serde_json::to_value(&report)?),
        text: report.to_table(),
    })
}
