// SPDX-License-Identifier: Apache-2.0

use criterion::{criterion_group, criterion_main, Criterion, Throughput};

use dprand::entropy::{mix, EntropyBlock, ResistanceClass};
use dprand::mechanisms::TwoSidedGeometric;
use dprand::{CtrDrbg, DrbgConfig, GeneratorHandle, MechanismParams};

fn drbg(c: &mut Criterion) {
    let mut g = c.benchmark_group("drbg");
    let mut d = CtrDrbg::instantiate(&[7; 48], DrbgConfig::default()).unwrap();
    let mut buf = vec![0u8; 65536];
    g.throughput(Throughput::Bytes(buf.len() as u64));
    g.bench_function("generate_64k", |b| {
        b.iter(|| {
            if d.needs_reseed() {
                d.reseed(&[8; 48]).unwrap();
            }
            d.fill(&mut buf, None).unwrap()
        })
    });
    g.finish();
}

fn words(c: &mut Criterion) {
    let mut g = c.benchmark_group("next_u64");
    g.throughput(Throughput::Elements(1));
    let mut d = GeneratorHandle::drbg_from_seed(&[7; 48], DrbgConfig::default()).unwrap();
    g.bench_function("drbg", |b| b.iter(|| d.next_u64().unwrap()));
    let mut m = GeneratorHandle::mt19937_insecure(5489);
    g.bench_function("mt19937", |b| b.iter(|| m.next_u64().unwrap()));
    g.finish();
}

fn mixer(c: &mut Criterion) {
    let blocks = vec![
        EntropyBlock::new(vec![1; 1024], "a", ResistanceClass::Additive).unwrap(),
        EntropyBlock::new(vec![2; 48], "b", ResistanceClass::Multiplicative).unwrap(),
    ];
    c.bench_function("mix_48", |b| b.iter(|| mix(&blocks, 48, b"bench").unwrap()));
}

fn geometric(c: &mut Criterion) {
    let mut g = c.benchmark_group("two_sided_geometric");
    for eps in [0.1, 1.0] {
        let s = TwoSidedGeometric::new(MechanismParams::new(eps, 1.0).unwrap());
        let mut h = GeneratorHandle::drbg_from_seed(&[3; 48], DrbgConfig::default()).unwrap();
        g.bench_function(format!("eps_{eps}"), |b| b.iter(|| s.sample(&mut h).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, drbg, words, mixer, geometric);
criterion_main!(benches);
