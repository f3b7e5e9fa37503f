// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;
use std::sync::Arc;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use dprand::bitgen::{spawn_streams, RunNonce, SeedAuditLog, SpawnOptions};
use dprand::entropy::{FixedSource, Seeder};
use dprand::mechanisms::{
    geometric_mechanism, laplace_mechanism_insecure, two_sided_geometric_mass,
    two_sided_geometric_pmf, NoiseValue, TwoSidedGeometric,
};
use dprand::{DrbgConfig, GeneratorHandle, MechanismParams};

fn drbg(tag: u8) -> GeneratorHandle {
    GeneratorHandle::drbg_from_seed(&[tag; 48], DrbgConfig::default()).unwrap()
}

#[test]
fn double53_mean() {
    let mut g = drbg(1);
    let n = 1_000_000;
    let sum: f64 = (0..n).map(|_| g.next_double53().unwrap()).sum();
    let mean = sum / n as f64;
    assert!((0.499..=0.501).contains(&mean), "{mean}");
}

#[test]
fn geometric_chi_square_at_half() {
    let params = MechanismParams::new(std::f64::consts::LN_2, 1.0).unwrap();
    let s = TwoSidedGeometric::new(params);
    let mut g = drbg(2);
    let n = 1_000_000;
    // Bins k = -10..=10, plus one tail bin for |k| > 10.
    let mut counts = [0u64; 22];
    for _ in 0..n {
        let k = s.sample(&mut g).unwrap();
        let bin = if k.abs() > 10 { 21 } else { (k + 10) as usize };
        counts[bin] += 1;
    }
    let mut chi2 = 0.0;
    for (bin, &obs) in counts.iter().enumerate() {
        let p = if bin == 21 {
            1.0 - two_sided_geometric_mass(0.5, 10)
        } else {
            two_sided_geometric_pmf(0.5, bin as i64 - 10)
        };
        let e = p * n as f64;
        chi2 += (obs as f64 - e).powi(2) / e;
    }
    let pval = ChiSquared::new(21.0).unwrap().sf(chi2);
    assert!(pval > 0.001, "chi2 {chi2}, p {pval}");
}

#[test]
fn geometric_symmetry() {
    let params = MechanismParams::new(0.5, 1.0).unwrap();
    let s = TwoSidedGeometric::new(params);
    let mut g = drbg(3);
    let n = 1_000_000;
    let mut pos = [0u64; 6];
    let mut neg = [0u64; 6];
    for _ in 0..n {
        let k = s.sample(&mut g).unwrap();
        if (1..=6).contains(&k) {
            pos[k as usize - 1] += 1;
        } else if (-6..=-1).contains(&k) {
            neg[(-k) as usize - 1] += 1;
        }
    }
    for k in 0..6 {
        let (a, b) = (pos[k] as f64, neg[k] as f64);
        // Difference of two binomial counts: 4 sigma.
        assert!((a - b).abs() <= 4.0 * (a + b).sqrt(), "k={}: {a} vs {b}", k + 1);
    }
}

#[test]
fn geometric_mass_closed_form() {
    for alpha in [0.1, 0.5, 0.9, 0.99] {
        for k_max in 0..=60u32 {
            let direct: f64 = (-(k_max as i64)..=k_max as i64)
                .map(|k| two_sided_geometric_pmf(alpha, k))
                .sum();
            let closed = two_sided_geometric_mass(alpha, k_max);
            assert!((direct - closed).abs() <= 1e-12, "α={alpha} K={k_max}");
        }
    }
}

#[test]
fn large_epsilon_is_noise_free() {
    let params = MechanismParams::new(50.0, 1.0).unwrap();
    let mut g = drbg(4);
    let counts: Vec<i64> = (0..10_000).collect();
    let out = geometric_mechanism(&counts, &params, &mut g).unwrap();
    for (m, &c) in out.iter().zip(&counts) {
        assert_eq!(m.value, NoiseValue::Integer(c));
    }
}

#[test]
fn laplace_mean_within_three_sigma() {
    let params = MechanismParams::new(1.0, 1.0).unwrap();
    let mut g = drbg(5);
    let n = 1_000_000;
    let out = laplace_mechanism_insecure(&vec![0.0; n], &params, &mut g, true).unwrap();
    let mean = out
        .iter()
        .map(|m| match m.value {
            NoiseValue::Real(x) => x,
            NoiseValue::Integer(_) => unreachable!(),
        })
        .sum::<f64>()
        / n as f64;
    let sigma = std::f64::consts::SQRT_2 * params.sensitivity() / params.epsilon();
    assert!(mean.abs() <= 3.0 * sigma / 1e3, "{mean}");
    assert!(out.iter().all(|m| m.insecure));
}

#[test]
fn spawned_streams_share_no_window() {
    const STREAMS: usize = 16;
    const LEN: usize = 1 << 20;
    // Constant entropy on purpose: separation must come from the tags.
    let seeder = Seeder::new(vec![Arc::new(FixedSource::new("const", vec![0x5a; 48]))])
        .with_insecure_override(true);
    let opts = SpawnOptions::new(RunNonce::fixed([3; 16]));
    let mut handles = spawn_streams(&seeder, STREAMS, &opts, &SeedAuditLog::new()).unwrap();
    let streams: Vec<Vec<u8>> = handles
        .iter_mut()
        .map(|h| {
            let mut b = vec![0u8; LEN];
            h.fill_bytes(&mut b).unwrap();
            b
        })
        .collect();

    // Aligned 128-bit blocks of every stream, tagged by owner.
    let mut owner = std::collections::HashMap::new();
    for (i, s) in streams.iter().enumerate() {
        for c in s.chunks_exact(16) {
            owner.insert(u128::from_le_bytes(c.try_into().unwrap()), i);
        }
    }
    // Every byte offset of every stream against other streams' blocks.
    for (i, s) in streams.iter().enumerate() {
        let mut seen = HashSet::new();
        for w in s.windows(16) {
            let key = u128::from_le_bytes(w.try_into().unwrap());
            if let Some(&j) = owner.get(&key) {
                assert_eq!(j, i, "stream {i} shares a 128-bit window with stream {j}");
            }
            seen.insert(key);
        }
        assert!(seen.len() > LEN - 32);
    }
}
