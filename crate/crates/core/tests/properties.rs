// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use num_bigint::BigUint;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, RngCore, SeedableRng};

use dprand::bitgen::mt19937::{temper, untemper};
use dprand::budget::{compute_budget, BudgetSpec, Geolevel};
use dprand::drbg::{CtrDrbg, DrbgConfig, DrbgError};
use dprand::entropy::{
    mix, read_with_retry, Diagnostics, EntropyBlock, EntropyError, FixedSource, ResistanceClass,
    ScriptedSource, Seeder, SourceKind,
};
use dprand::GeneratorHandle;

fn block(bytes: &[u8]) -> EntropyBlock {
    EntropyBlock::new(bytes.to_vec(), "test", ResistanceClass::Unknown).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100_000))]

    #[test]
    fn temper_untemper_round_trip(y: u32) {
        prop_assert_eq!(temper(untemper(y)), y);
        prop_assert_eq!(untemper(temper(y)), y);
    }
}

#[test]
fn mix_avalanche() {
    let mut rng = StdRng::seed_from_u64(11);
    let mut flips = [0u32; 384];
    let trials = 1000;
    for _ in 0..trials {
        let mut input = [0u8; 48];
        rng.fill_bytes(&mut input);
        let base = mix(&[block(&input)], 48, b"avalanche").unwrap();
        let bit = rng.random_range(0..384);
        input[bit / 8] ^= 1 << (bit % 8);
        let flipped = mix(&[block(&input)], 48, b"avalanche").unwrap();
        for (i, f) in flips.iter_mut().enumerate() {
            *f += ((base[i / 8] ^ flipped[i / 8]) >> (i % 8) & 1) as u32;
        }
    }
    for (i, &f) in flips.iter().enumerate() {
        let rate = f as f64 / trials as f64;
        assert!((0.4..=0.6).contains(&rate), "output bit {i}: {rate}");
    }
}

#[test]
fn mix_second_source_is_never_a_no_op() {
    let mut rng = StdRng::seed_from_u64(12);
    for _ in 0..1000 {
        let (mut a, mut b) = ([0u8; 48], [0u8; 48]);
        rng.fill_bytes(&mut a);
        rng.fill_bytes(&mut b);
        let one = mix(&[block(&a)], 48, b"t").unwrap();
        let two = mix(&[block(&a), block(&b)], 48, b"t").unwrap();
        assert_ne!(one, two);
    }
}

proptest! {
    #[test]
    fn mix_deterministic_and_tag_separated(
        input in proptest::collection::vec(any::<u8>(), 1..=256),
        len in 1usize..=64,
    ) {
        let a = mix(&[block(&input)], len, b"tag-a").unwrap();
        prop_assert_eq!(a.len(), len);
        prop_assert_eq!(&a, &mix(&[block(&input)], len, b"tag-a").unwrap());
        prop_assert_ne!(a, mix(&[block(&input)], len, b"tag-b").unwrap());
    }

    #[test]
    fn retry_accounting(failures in proptest::collection::vec(0u32..=10, 1..=8)) {
        let src = ScriptedSource::with_failures("s", SourceKind::HardwareRand, failures.clone());
        let diag = Diagnostics::new();
        read_with_retry(&src, 8 * failures.len(), &diag).unwrap();
        let expected = failures.len() as u32 + failures.iter().sum::<u32>();
        prop_assert_eq!(diag.last().unwrap().attempts, expected);
    }

    #[test]
    fn retry_exhaustion_at_eleventh_failure(prefix in proptest::collection::vec(0u32..=10, 0..4)) {
        let mut failures = prefix.clone();
        failures.push(11);
        let src = ScriptedSource::with_failures("s", SourceKind::HardwareRand, failures);
        let diag = Diagnostics::new();
        let err = read_with_retry(&src, 8 * (prefix.len() + 1), &diag).unwrap_err();
        let expected = prefix.len() as u32 + prefix.iter().sum::<u32>() + 11;
        prop_assert_eq!(err, EntropyError::RetryExhausted { source_name: "s".into(), attempts: expected });
        prop_assert_eq!(diag.last().unwrap().bytes, 0);
    }

    #[test]
    fn drbg_deterministic(seed in proptest::array::uniform32(any::<u8>()), n in 1usize..2048) {
        let mut full = [0u8; 48];
        full[..32].copy_from_slice(&seed);
        let mut a = CtrDrbg::instantiate(&full, DrbgConfig::default()).unwrap();
        let mut b = CtrDrbg::instantiate(&full, DrbgConfig::default()).unwrap();
        prop_assert_eq!(a.generate(n, Some(b"x")).unwrap(), b.generate(n, Some(b"x")).unwrap());
        prop_assert_eq!(a.generate(n, None).unwrap(), b.generate(n, None).unwrap());
    }

    #[test]
    fn words_emitted_accounting(ops in proptest::collection::vec(0u8..4, 0..200), mt in any::<bool>()) {
        let mut g = if mt {
            GeneratorHandle::mt19937_insecure(5)
        } else {
            GeneratorHandle::drbg_from_seed(&[8u8; 48], DrbgConfig::default()).unwrap()
        };
        let mut expected = 0u64;
        for op in ops {
            match op {
                0 => { g.next_u32().unwrap(); expected += 1; }
                1 => { g.next_u64().unwrap(); expected += 2; }
                2 => { g.next_double53().unwrap(); expected += 2; }
                _ => { let mut b = [0u8; 13]; g.fill_bytes(&mut b).unwrap(); expected += 4; }
            }
        }
        prop_assert_eq!(g.words_emitted(), expected);
    }
}

#[test]
fn drbg_backtracking_resistance() {
    let mut rng = StdRng::seed_from_u64(13);
    for _ in 0..200 {
        let mut seed = [0u8; 48];
        rng.fill_bytes(&mut seed);
        let mut d = CtrDrbg::instantiate(&seed, DrbgConfig::default()).unwrap();
        let first = d.generate(64, None).unwrap();
        let mut replay = d.clone();
        assert_ne!(replay.generate(64, None).unwrap(), first);
    }
}

#[test]
fn reseed_interval_admits_exactly_k_generates() {
    for k in [1u64, 2, 16] {
        let cfg = DrbgConfig::with_reseed_interval(k).unwrap();
        let mut d = CtrDrbg::instantiate(&[1u8; 48], cfg).unwrap();
        for round in 0..3 {
            for i in 0..k {
                d.generate(16, None)
                    .unwrap_or_else(|e| panic!("k={k} round {round} call {i}: {e}"));
            }
            assert_eq!(d.generate(16, None), Err(DrbgError::ReseedRequired), "k={k}");
            d.reseed(&[round as u8 + 2; 48]).unwrap();
        }
    }
}

#[test]
fn reseed_with_same_material_gives_same_state() {
    let mut a = CtrDrbg::instantiate(&[4u8; 48], DrbgConfig::default()).unwrap();
    a.generate(32, None).unwrap();
    let mut b = a.clone();
    a.reseed(&[5u8; 48]).unwrap();
    b.reseed(&[5u8; 48]).unwrap();
    assert_eq!(a.working_state(), b.working_state());
}

#[test]
fn fixed_source_never_seeds_without_override() {
    let seeder = Seeder::new(vec![Arc::new(FixedSource::new("fixed", vec![0; 48]))]);
    assert!(seeder.seed_material(b"t").is_err());
    let audit = seeder.audit().entries();
    assert!(audit.iter().all(|e| !e.accepted));
}

fn small_spec() -> impl Strategy<Value = BudgetSpec> {
    (
        proptest::collection::vec(1u64..6, 1..4),
        proptest::collection::vec(1u64..6, 1..4),
        proptest::collection::vec(1u64..20, 1..5),
        1u64..128,
        0u64..5,
    )
        .prop_map(|(p, u, levels, bits, extra)| BudgetSpec {
            person_hist_dims: p,
            unit_hist_dims: u,
            geolevels: levels
                .into_iter()
                .enumerate()
                .map(|(i, count)| Geolevel {
                    name: format!("l{i}"),
                    count,
                })
                .collect(),
            bits_per_cell: bits,
            extra_cells_per_geolevel: extra,
        })
}

proptest! {
    #[test]
    fn budget_linear_in_bits_per_cell(spec in small_spec()) {
        let base = compute_budget(&spec).unwrap().total_bits;
        let mut doubled = spec.clone();
        doubled.bits_per_cell *= 2;
        prop_assert_eq!(compute_budget(&doubled).unwrap().total_bits, base * 2u32);
    }

    #[test]
    fn budget_additive_over_geolevels(spec in small_spec()) {
        let total = compute_budget(&spec).unwrap().total_bits;
        let sum = spec.geolevels.iter().fold(BigUint::default(), |acc, g| {
            let mut one = spec.clone();
            one.geolevels = vec![g.clone()];
            acc + compute_budget(&one).unwrap().total_bits
        });
        prop_assert_eq!(total, sum);
    }

    #[test]
    fn budget_matches_enumeration(spec in small_spec()) {
        let mut pairs = 0u64;
        for g in &spec.geolevels {
            for _unit in 0..g.count {
                let hists = [&spec.person_hist_dims, &spec.unit_hist_dims];
                for dims in hists {
                    // Walk every cell index of the histogram.
                    let mut idx = vec![0u64; dims.len()];
                    'cells: loop {
                        pairs += 1;
                        for (d, i) in dims.iter().zip(idx.iter_mut()) {
                            *i += 1;
                            if *i < *d { continue 'cells; }
                            *i = 0;
                        }
                        break;
                    }
                }
                pairs += spec.extra_cells_per_geolevel;
            }
        }
        prop_assert_eq!(compute_budget(&spec).unwrap().total_cells, BigUint::from(pairs));
    }
}
