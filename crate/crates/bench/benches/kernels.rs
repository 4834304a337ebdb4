use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use omnirank_bench::{model_inputs, pipeline_dims, score_sets};
use omnirank_core::eval::auc;
use omnirank_core::features::lda_fit;
use omnirank_core::nn::model::Mode;
use omnirank_core::nn::{NetConfig, OmniRank};
use omnirank_core::synth::planted_topic_corpus;

fn bench_auc(c: &mut Criterion) {
    let mut g = c.benchmark_group("auc");
    for n in [1_000, 10_000, 100_000] {
        let (pos, neg) = score_sets(n, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| auc(black_box(&pos), black_box(&neg)).unwrap()));
    }
    g.finish();
}

fn bench_lda(c: &mut Criterion) {
    let corpus = planted_topic_corpus(500, 500, 5, 60, 0.1, 7).unwrap();
    let mut g = c.benchmark_group("lda_fit");
    g.sample_size(10);
    g.bench_function("500docs_5topics_50iter", |b| b.iter(|| lda_fit(black_box(&corpus.docs), 5, 10.0, 0.01, 50, 3).unwrap()));
    g.finish();
}

fn bench_network(c: &mut Criterion) {
    let dims = pipeline_dims();
    let model = OmniRank::new(dims, NetConfig::default()).unwrap();
    let params = model.init_params(1);
    let xs = model_inputs(&dims, 16, 2);
    let mut grad = vec![0.0; model.n_params()];
    let mut g = c.benchmark_group("network");
    g.bench_function("forward", |b| b.iter(|| xs.iter().map(|x| model.predict(&params, x)).sum::<f64>()));
    g.bench_function("forward_backward", |b| {
        b.iter(|| {
            grad.iter_mut().for_each(|v| *v = 0.0);
            xs.iter().map(|x| model.loss_and_grad(&params, x, 1.0, Mode::Eval, &mut grad)).sum::<f64>()
        })
    });
    g.finish();
}

criterion_group!(benches, bench_auc, bench_lda, bench_network);
criterion_main!(benches);
