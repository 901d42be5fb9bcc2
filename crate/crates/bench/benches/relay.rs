use blockpress::protocols::graphene::GrapheneConfig;
use blockpress::protocols::relay::{random_scenario, relay, ScenarioConfig};
use blockpress::protocols::Protocol;
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn relay_all(c: &mut Criterion) {
    let g = GrapheneConfig::default();
    let mut group = c.benchmark_group("relay");
    for (label, cfg) in [
        ("synced", ScenarioConfig::default()),
        (
            "drifted",
            ScenarioConfig {
                missing: 0.05,
                extra: 0.05,
                swaps: 4,
                ..Default::default()
            },
        ),
    ] {
        let s = random_scenario(&cfg, 1).unwrap();
        for p in Protocol::ALL {
            group.bench_with_input(BenchmarkId::new(label, p), &s, |b, s| {
                b.iter(|| relay(p, black_box(s), &g).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, relay_all);
criterion_main!(benches);
