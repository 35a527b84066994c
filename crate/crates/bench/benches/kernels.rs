use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use madmm::data::{synthetic_generate, Rng, DATA_STREAM};
use madmm::logistic::{initial_point, lemma1_solve, phi_eval, LogisticConfig, LogisticProblem};
use madmm::proxlinear::{prox_linear_step, LogisticProxModel, ProxLinearConfig};
use madmm::TraceSampling;

const D: usize = 1000;
const Q: usize = 100;

fn kernels(c: &mut Criterion) {
    let data = Arc::new(synthetic_generate(D, Q, &mut Rng::new(1, DATA_STREAM)).unwrap());
    let init = initial_point(&data, 1);

    let c_tilde = Rng::new(2, DATA_STREAM).uniform_vec(D);
    c.bench_function("lemma1_solve d=1000", |b| {
        b.iter(|| lemma1_solve(black_box(&c_tilde), 0.001, 37.0))
    });

    c.bench_function("phi_eval 1000x100", |b| {
        b.iter(|| phi_eval(&data, black_box(init.x.block(0)), init.x.block(1), init.x.block(2)[0]))
    });

    let problem = LogisticProblem::new(data.clone(), 0.001, 0.1, LogisticConfig::default()).unwrap();
    let mut cfg = problem.solver_config();
    cfg.max_outer_iters = 1;
    cfg.stop_epsilon = 0.0;
    cfg.sampling = TraceSampling::EveryIteration;
    c.bench_function("madmm iteration 1000x100", |b| {
        b.iter_batched(
            || init.clone(),
            |start| madmm::run(problem.spec(), problem.surrogates(), cfg.clone(), start).unwrap(),
            BatchSize::SmallInput,
        )
    });

    let model = LogisticProxModel::new(data.clone(), 0.001, 0.1);
    let pcfg = ProxLinearConfig::new(model.default_tau());
    c.bench_function("prox-linear step 1000x100", |b| {
        b.iter(|| prox_linear_step(&model, black_box(&init.x), &pcfg).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = kernels
}
criterion_main!(benches);
