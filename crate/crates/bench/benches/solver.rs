use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ctgp::harness::experiment::build_problem;
use ctgp::harness::{simulate_mobile, Method, NodePolicy, ScenarioConfig};
use ctgp::solve;
use std::hint::black_box;

fn localization(c: &mut Criterion) {
    let cfg = ScenarioConfig::bundled_consistency().mobile().unwrap().clone();
    let data = simulate_mobile(&cfg, 0).unwrap();
    let mut g = c.benchmark_group("localization_30s");
    g.sample_size(10);
    for (name, method, policy) in [
        ("inputs_all_nodes", Method::Inputs, NodePolicy::EveryInputTick),
        ("inputs_meas_only", Method::Inputs, NodePolicy::MeasurementTimesOnly),
        ("wnoa_meas_only", Method::Wnoa, NodePolicy::MeasurementTimesOnly),
    ] {
        g.bench_function(format!("build_{name}"), |b| {
            b.iter(|| build_problem(&cfg, black_box(&data), method, policy).unwrap())
        });
        let problem = build_problem(&cfg, &data, method, policy).unwrap();
        g.bench_function(format!("solve_{name}"), |b| {
            b.iter_batched(|| problem.clone(), |p| solve(&p).unwrap(), BatchSize::LargeInput)
        });
    }
    g.finish();
}

fn query(c: &mut Criterion) {
    let cfg = ScenarioConfig::bundled_consistency().mobile().unwrap().clone();
    let data = simulate_mobile(&cfg, 0).unwrap();
    let problem = build_problem(&cfg, &data, Method::Inputs, NodePolicy::MeasurementTimesOnly).unwrap();
    let solution = solve(&problem).unwrap();
    let times: Vec<f64> = (0..300).map(|i| i as f64 * 0.1 + 0.05).collect();
    c.bench_function("query_300_times", |b| b.iter(|| solution.query_many(black_box(&times)).unwrap()));
}

criterion_group!(benches, localization, query);
criterion_main!(benches);
