use blockpress::sketches::{assured_cells, BloomFilter, Iblt};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bloom(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ids: Vec<u64> = (0..10_000).map(|_| rng.random()).collect();
    c.bench_function("bloom/insert_10k", |b| {
        b.iter(|| {
            let mut f = BloomFilter::new(10_000, 0.01, 7).unwrap();
            for &id in &ids {
                f.insert(id);
            }
            f
        })
    });
    let mut f = BloomFilter::new(10_000, 0.01, 7).unwrap();
    for &id in &ids {
        f.insert(id);
    }
    c.bench_function("bloom/query_10k", |b| {
        b.iter(|| {
            ids.iter()
                .filter(|&&id| f.contains(black_box(id ^ 1)))
                .count()
        })
    });
}

fn iblt(c: &mut Criterion) {
    let mut group = c.benchmark_group("iblt_decode");
    for d in [10u64, 100, 1_000] {
        let mut rng = ChaCha8Rng::seed_from_u64(d);
        let cells = assured_cells(d);
        let mut a = Iblt::new(cells, 3, 5).unwrap();
        let b = Iblt::new(cells, 3, 5).unwrap();
        for _ in 0..d {
            a.insert(rng.random());
        }
        let diff = a.subtract(&b).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(d), &diff, |bch, t| {
            bch.iter(|| t.decode().unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bloom, iblt);
criterion_main!(benches);
