// SPDX-License-Identifier: Apache-2.0

//! Known-answer harness for CAVP `CTR_DRBG.rsp` response files.
//!
//! Only `[AES-256 no df]` sections are run; others are skipped. Within a
//! record, fields are applied in file order:
//!
//! * `EntropyInput`, `Nonce`, `PersonalizationString`: instantiate.
//! * `EntropyInputReseed`, `AdditionalInputReseed`: reseed.
//! * `AdditionalInput`: generate with that input, or, in prediction
//!   resistance sections, stash it for the following `EntropyInputPR`,
//!   which reseeds and then generates.
//! * `Key`/`KEY`, `V`: compare the working state.
//! * `ReturnedBits`: compare the last generate output.

use std::path::Path;

use serde::Serialize;

use crate::drbg::{CtrDrbg, DrbgConfig};

const BUNDLED: [(&str, &str); 3] = [
    (
        "ctr_drbg_aes256_nodf_no_reseed.rsp",
        include_str!("../kat/ctr_drbg_aes256_nodf_no_reseed.rsp"),
    ),
    (
        "ctr_drbg_aes256_nodf_pr_false.rsp",
        include_str!("../kat/ctr_drbg_aes256_nodf_pr_false.rsp"),
    ),
    (
        "ctr_drbg_aes256_nodf_pr_true.rsp",
        include_str!("../kat/ctr_drbg_aes256_nodf_pr_true.rsp"),
    ),
];

/// The vector files compiled into the library.
pub fn bundled_files() -> &'static [(&'static str, &'static str)] {
    &BUNDLED
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KatFailure {
    pub file: String,
    pub section: usize,
    pub count: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct KatSummary {
    pub files: Vec<String>,
    pub total: usize,
    pub passed: usize,
    pub skipped_sections: usize,
    pub failures: Vec<KatFailure>,
}

impl KatSummary {
    pub fn all_passed(&self) -> bool {
        self.total > 0 && self.failures.is_empty()
    }

    fn merge(&mut self, other: KatSummary) {
        self.files.extend(other.files);
        self.total += other.total;
        self.passed += other.passed;
        self.skipped_sections += other.skipped_sections;
        self.failures.extend(other.failures);
    }
}

#[derive(Debug, Default)]
struct Section {
    applicable: bool,
    prediction_resistance: bool,
    returned_bits: usize,
}

struct Record {
    count: String,
    fields: Vec<(String, String)>,
}

/// Runs every applicable vector in `text`.
pub fn run_rsp(file: &str, text: &str) -> KatSummary {
    let mut summary = KatSummary {
        files: vec![file.to_string()],
        ..Default::default()
    };
    let mut section = Section::default();
    let mut section_index = 0usize;
    let mut in_header = false;
    let mut record: Option<Record> = None;

    let finish = |record: Option<Record>, section: &Section, idx: usize, s: &mut KatSummary| {
        let Some(r) = record else { return };
        if !section.applicable {
            return;
        }
        s.total += 1;
        match run_record(section, &r.fields) {
            Ok(()) => s.passed += 1,
            Err(detail) => s.failures.push(KatFailure {
                file: file.to_string(),
                section: idx,
                count: r.count,
                detail,
            }),
        }
    };

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            finish(record.take(), &section, section_index, &mut summary);
            if !in_header {
                if section_index > 0 && !section.applicable {
                    summary.skipped_sections += 1;
                }
                section_index += 1;
                section = Section::default();
                in_header = true;
            }
            if h.contains("no df") {
                section.applicable = h.starts_with("AES-256");
            } else if let Some((k, v)) = h.split_once('=') {
                match k.trim() {
                    "PredictionResistance" => section.prediction_resistance = v.trim() == "True",
                    "ReturnedBitsLen" => section.returned_bits = v.trim().parse().unwrap_or(0),
                    _ => {}
                }
            } else {
                section.applicable = false;
            }
            continue;
        }
        in_header = false;
        let Some((k, v)) = line.split_once('=') else {
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if k == "COUNT" {
            finish(record.take(), &section, section_index, &mut summary);
            record = Some(Record {
                count: v.to_string(),
                fields: Vec::new(),
            });
        } else if let Some(r) = record.as_mut() {
            r.fields.push((k.to_string(), v.to_string()));
        }
    }
    finish(record.take(), &section, section_index, &mut summary);
    if section_index > 0 && !section.applicable {
        summary.skipped_sections += 1;
    }
    summary
}

fn run_record(section: &Section, fields: &[(String, String)]) -> Result<(), String> {
    let decode = |name: &str, v: &str| hex::decode(v).map_err(|e| format!("{name}: {e}"));
    let config = if section.prediction_resistance {
        DrbgConfig::prediction_resistant()
    } else {
        DrbgConfig::default()
    };
    let out_len = section.returned_bits / 8;

    let mut entropy: Option<Vec<u8>> = None;
    let mut personalization: Vec<u8> = Vec::new();
    let mut drbg: Option<CtrDrbg> = None;
    let mut pending_reseed: Option<Vec<u8>> = None;
    let mut pending_pr_input: Option<Vec<u8>> = None;
    let mut last_output: Option<Vec<u8>> = None;

    let ensure = |drbg: &mut Option<CtrDrbg>,
                  entropy: &Option<Vec<u8>>,
                  personalization: &[u8]|
     -> Result<(), String> {
        if drbg.is_none() {
            let e = entropy.as_ref().ok_or("record has no EntropyInput")?;
            *drbg = Some(
                CtrDrbg::instantiate_personalized(e, personalization, config)
                    .map_err(|e| format!("instantiate: {e}"))?,
            );
        }
        Ok(())
    };

    for (k, v) in fields {
        let bytes = decode(k, v)?;
        match k.as_str() {
            "EntropyInput" => entropy = Some(bytes),
            "Nonce" => {
                if !bytes.is_empty() {
                    return Err("non-empty nonce in a no-df section".into());
                }
            }
            "PersonalizationString" => {
                personalization = bytes;
                ensure(&mut drbg, &entropy, &personalization)?;
            }
            "EntropyInputReseed" => {
                ensure(&mut drbg, &entropy, &personalization)?;
                pending_reseed = Some(bytes);
            }
            "AdditionalInputReseed" => {
                let e = pending_reseed.take().ok_or("AdditionalInputReseed without entropy")?;
                drbg.as_mut()
                    .unwrap()
                    .reseed_with_input(&e, Some(&bytes))
                    .map_err(|e| format!("reseed: {e}"))?;
            }
            "AdditionalInput" => {
                ensure(&mut drbg, &entropy, &personalization)?;
                if let Some(e) = pending_reseed.take() {
                    drbg.as_mut()
                        .unwrap()
                        .reseed(&e)
                        .map_err(|e| format!("reseed: {e}"))?;
                }
                if section.prediction_resistance {
                    pending_pr_input = Some(bytes);
                } else {
                    let out = drbg
                        .as_mut()
                        .unwrap()
                        .generate(out_len, Some(&bytes))
                        .map_err(|e| format!("generate: {e}"))?;
                    last_output = Some(out);
                }
            }
            "EntropyInputPR" => {
                ensure(&mut drbg, &entropy, &personalization)?;
                let addl = pending_pr_input.take().unwrap_or_default();
                let d = drbg.as_mut().unwrap();
                d.reseed_with_input(&bytes, Some(&addl))
                    .map_err(|e| format!("reseed: {e}"))?;
                last_output = Some(
                    d.generate(out_len, None)
                        .map_err(|e| format!("generate: {e}"))?,
                );
            }
            "Key" | "KEY" => {
                let (key, _) = drbg.as_ref().ok_or("Key before instantiate")?.working_state();
                if key[..] != bytes[..] {
                    return Err(format!("Key mismatch: got {}", hex::encode(key)));
                }
            }
            "V" => {
                let (_, vv) = drbg.as_ref().ok_or("V before instantiate")?.working_state();
                if vv[..] != bytes[..] {
                    return Err(format!("V mismatch: got {}", hex::encode(vv)));
                }
            }
            "ReturnedBits" => {
                let got = last_output.as_ref().ok_or("ReturnedBits before generate")?;
                if got[..] != bytes[..] {
                    return Err(format!("ReturnedBits mismatch: got {}", hex::encode(got)));
                }
            }
            _ => {}
        }
    }
    if last_output.is_none() {
        return Err("record has no ReturnedBits check".into());
    }
    Ok(())
}

/// Runs the files compiled into the library.
pub fn run_bundled() -> KatSummary {
    let mut s = KatSummary::default();
    for (name, text) in bundled_files() {
        s.merge(run_rsp(name, text));
    }
    s
}

/// Runs every `*.rsp` file in `dir`, in name order.
pub fn run_dir(dir: &Path) -> std::io::Result<KatSummary> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "rsp"))
        .collect();
    paths.sort();
    let mut s = KatSummary::default();
    for p in paths {
        let text = std::fs::read_to_string(&p)?;
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        s.merge(run_rsp(&name, &text));
    }
    Ok(s)
}
