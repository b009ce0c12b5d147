//! Throughput benchmarks for the solver spectrum: full certified
//! solves on a mid-size random model, end-component analysis on a
//! larger one, and fixed iteration budgets for the sampling engines so
//! each invocation does a deterministic amount of work.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use reachmc_core::benchgen::gen_random_mdp;
use reachmc_core::mec::{build_quotient, find_mecs};
use reachmc_core::{
    interval_iteration, value_iteration, Brtdp, Mcts, MctsConfig, MctsVariant, SamplerConfig,
    SolverConfig,
};

fn solvers(c: &mut Criterion) {
    let m = gen_random_mdp(500, 3, 4, 0.2, 11);
    let cfg = SolverConfig::default();

    c.bench_function("vi/random-500", |b| {
        b.iter(|| value_iteration(&m, &cfg))
    });
    c.bench_function("ii-collapse/random-500", |b| {
        b.iter(|| interval_iteration(&m, &cfg, true))
    });
    c.bench_function("brtdp/random-500", |b| {
        b.iter(|| Brtdp::new(&m, SamplerConfig::default()).run())
    });
}

fn mcts_budgeted(c: &mut Criterion) {
    let m = gen_random_mdp(500, 3, 4, 0.2, 11);
    for (name, variant) in [
        ("bmcts", MctsVariant::Bounded),
        ("mcts-brtdp", MctsVariant::BrtdpRollout),
        ("brtdp-ucb", MctsVariant::FlatUcb),
    ] {
        c.bench_function(&format!("{name}-2k-iters/random-500"), |b| {
            b.iter_batched(
                || {
                    Mcts::new(
                        &m,
                        MctsConfig { variant, max_iterations: 2_000, ..Default::default() },
                    )
                },
                |engine| engine.run(),
                BatchSize::SmallInput,
            )
        });
    }
}

fn end_components(c: &mut Criterion) {
    let m = gen_random_mdp(5_000, 3, 4, 0.3, 5);
    c.bench_function("find-mecs/random-5000", |b| b.iter(|| find_mecs(&m, None)));
    let decomp = find_mecs(&m, None);
    c.bench_function("build-quotient/random-5000", |b| {
        b.iter(|| build_quotient(&m, &decomp))
    });
}

criterion_group!(benches, solvers, mcts_budgeted, end_components);
criterion_main!(benches);
