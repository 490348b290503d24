use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use memheat_bench::{classification_cases, memory_scenario, ode_problem, warm_state};
use memheat_core::criteria::classify_regime;
use memheat_core::ode_oracle::{integrate_ode, OdeControls};

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for nodes in [51, 201, 801] {
        let scenario = memory_scenario(nodes);
        let problem = scenario.problem();
        let state = warm_state(&scenario);
        group.bench_with_input(BenchmarkId::from_parameter(nodes), &state, |b, state| {
            b.iter(|| {
                let dt = problem.choose_dt(state);
                problem.step(black_box(state), dt).unwrap()
            })
        });
    }
    group.finish();
}

fn classify(c: &mut Criterion) {
    let cases = classification_cases();
    c.bench_function("classify_all_rules", |b| {
        b.iter(|| {
            for (p, q, cc, k) in &cases {
                black_box(classify_regime(*p, *q, cc, k).unwrap());
            }
        })
    });
}

fn ode(c: &mut Criterion) {
    let problem = ode_problem();
    let controls = OdeControls::default();
    c.bench_function("ode_blowup", |b| b.iter(|| integrate_ode(black_box(&problem), 10.0, &controls).unwrap()));
}

criterion_group!(benches, step, classify, ode);
criterion_main!(benches);
