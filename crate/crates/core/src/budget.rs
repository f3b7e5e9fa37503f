// SPDX-License-Identifier: Apache-2.0

//! Randomness requirements of a hierarchical-histogram DP workload.
//!
//! Every geounit at every geolevel carries one person-level histogram
//! (`|H_p|` cells) and one unit-level histogram (`|H_u|` cells), and each
//! protected cell consumes `bits_per_cell` random bits:
//!
//! ```text
//! total_bits = bits_per_cell · (|H_p| + |H_u| + extra) · Σ_level G_level
//! ```
//!
//! where `extra` is an optional flat count of additional query cells per
//! geounit. All arithmetic is exact.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BudgetError {
    #[error("invalid budget spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geolevel {
    pub name: String,
    pub count: u64,
}

/// Workload description, as read from the JSON spec file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub person_hist_dims: Vec<u64>,
    pub unit_hist_dims: Vec<u64>,
    pub geolevels: Vec<Geolevel>,
    #[serde(default = "default_bits_per_cell")]
    pub bits_per_cell: u64,
    #[serde(default)]
    pub extra_cells_per_geolevel: u64,
}

fn default_bits_per_cell() -> u64 {
    64
}

impl BudgetSpec {
    /// The US person and unit histograms over the six-level census
    /// geography (nation, states, counties, tracts, block groups, ~8M blocks).
    pub fn us_census_2020() -> Self {
        let level = |name: &str, count| Geolevel {
            name: name.into(),
            count,
        };
        BudgetSpec {
            person_hist_dims: vec![42, 2, 116, 2, 63],
            unit_hist_dims: vec![2, 9, 2, 7, 4, 2, 522],
            geolevels: vec![
                level("nation", 1),
                level("state", 51),
                level("county", 3_143),
                level("tract", 73_782),
                level("block_group", 217_550),
                level("block", 8_000_000),
            ],
            bits_per_cell: 64,
            extra_cells_per_geolevel: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, BudgetError> {
        let spec: BudgetSpec =
            serde_json::from_str(text).map_err(|e| BudgetError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BudgetError> {
        let bad = |m: String| Err(BudgetError::InvalidSpec(m));
        if self.person_hist_dims.is_empty() || self.unit_hist_dims.is_empty() {
            return bad("histogram dimension lists must be non-empty".into());
        }
        if let Some(d) = self
            .person_hist_dims
            .iter()
            .chain(&self.unit_hist_dims)
            .find(|&&d| d == 0)
        {
            return bad(format!("histogram dimension {d} must be >= 1"));
        }
        if self.geolevels.is_empty() {
            return bad("at least one geolevel is required".into());
        }
        if let Some(g) = self.geolevels.iter().find(|g| g.count == 0) {
            return bad(format!("geolevel {} must have >= 1 geounit", g.name));
        }
        if self.bits_per_cell == 0 {
            return bad("bits_per_cell must be >= 1".into());
        }
        Ok(())
    }

    /// `|H_p|`.
    pub fn person_hist_size(&self) -> BigUint {
        product(&self.person_hist_dims)
    }

    /// `|H_u|`.
    pub fn unit_hist_size(&self) -> BigUint {
        product(&self.unit_hist_dims)
    }

    /// Protected cells per geounit.
    pub fn cells_per_geounit(&self) -> BigUint {
        self.person_hist_size() + self.unit_hist_size() + self.extra_cells_per_geolevel
    }
}

fn product(dims: &[u64]) -> BigUint {
    dims.iter().fold(BigUint::one(), |acc, &d| acc * d)
}

mod decimal {
    use num_bigint::BigUint;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeolevelBudget {
    pub name: String,
    pub geounits: u64,
    #[serde(with = "decimal")]
    pub cells: BigUint,
    #[serde(with = "decimal")]
    pub bits: BigUint,
}

/// Exact totals. Big integers serialize as decimal strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BudgetReport {
    #[serde(with = "decimal")]
    pub person_hist_size: BigUint,
    #[serde(with = "decimal")]
    pub unit_hist_size: BigUint,
    #[serde(with = "decimal")]
    pub total_geounits: BigUint,
    #[serde(with = "decimal")]
    pub total_cells: BigUint,
    #[serde(with = "decimal")]
    pub total_bits: BigUint,
    #[serde(with = "decimal")]
    pub total_bytes: BigUint,
    pub per_geolevel: Vec<GeolevelBudget>,
    /// Decimal terabytes (10^12 bytes), truncated to two places.
    pub human_readable: String,
}

pub fn compute_budget(spec: &BudgetSpec) -> Result<BudgetReport, BudgetError> {
    spec.validate()?;
    let per_unit = spec.cells_per_geounit();
    let per_geolevel: Vec<GeolevelBudget> = spec
        .geolevels
        .iter()
        .map(|g| {
            let cells = &per_unit * g.count;
            GeolevelBudget {
                name: g.name.clone(),
                geounits: g.count,
                bits: &cells * spec.bits_per_cell,
                cells,
            }
        })
        .collect();

    let total_geounits = spec
        .geolevels
        .iter()
        .fold(BigUint::default(), |acc, g| acc + g.count);
    let total_cells = &per_unit * &total_geounits;
    let total_bits = &total_cells * spec.bits_per_cell;
    let total_bytes = (&total_bits + 7u32) / 8u32;

    Ok(BudgetReport {
        person_hist_size: spec.person_hist_size(),
        unit_hist_size: spec.unit_hist_size(),
        total_geounits,
        human_readable: terabytes(&total_bytes),
        total_cells,
        total_bits,
        total_bytes,
        per_geolevel,
    })
}

fn terabytes(bytes: &BigUint) -> String {
    let hundredths = bytes * 100u32 / BigUint::from(10u64.pow(12));
    let whole = &hundredths / 100u32;
    let frac = (&hundredths % 100u32).to_u32_digits().first().copied().unwrap_or(0);
    format!("{whole}.{frac:02} TB")
}

impl BudgetReport {
    /// Aligned text table, one row per geolevel plus a total.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<[String; 4]> = vec![[
            "geolevel".into(),
            "geounits".into(),
            "cells".into(),
            "bits".into(),
        ]];
        for g in &self.per_geolevel {
            rows.push([
                g.name.clone(),
                g.geounits.to_string(),
                g.cells.to_string(),
                g.bits.to_string(),
            ]);
        }
        rows.push([
            "total".into(),
            self.total_geounits.to_string(),
            self.total_cells.to_string(),
            self.total_bits.to_string(),
        ]);
        let widths: Vec<usize> = (0..4)
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();

        let mut out = String::new();
        for (i, r) in rows.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
                r[0],
                r[1],
                r[2],
                r[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
            if i == 0 || i == rows.len() - 2 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 6));
            }
        }
        let _ = writeln!(
            out,
            "|H_p| = {}, |H_u| = {}, total bytes = {} ({})",
            self.person_hist_size, self.unit_hist_size, self.total_bytes, self.human_readable
        );
        out
    }
}
