use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use persona_bench::{design, imbalanced, tied_scores};
use persona_core::balance::smote;
use persona_core::eval::roc_auc;
use persona_core::features::PcaModel;
use persona_core::learn::{fit_logistic, LogisticConfig};

fn auc(c: &mut Criterion) {
    let mut g = c.benchmark_group("roc_auc");
    for n in [1_000, 10_000, 100_000] {
        let (scores, labels) = tied_scores(n, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| roc_auc(black_box(&scores), black_box(&labels)).unwrap())
        });
    }
    g.finish();
}

fn logistic(c: &mut Criterion) {
    let cfg = LogisticConfig::default();
    let mut g = c.benchmark_group("fit_logistic");
    for m in [10, 50, 200] {
        let (x, y) = design(2_000, m, 2);
        g.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| fit_logistic(black_box(&x.values), &y, None, &cfg).unwrap())
        });
    }
    g.finish();
}

fn pca(c: &mut Criterion) {
    let mut g = c.benchmark_group("pca_fit");
    g.sample_size(10);
    for m in [100, 400] {
        let (x, _) = design(2_000, m, 3);
        g.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| PcaModel::fit(black_box(&x.values), 50).unwrap())
        });
    }
    g.finish();
}

fn oversample(c: &mut Criterion) {
    let (x, y) = imbalanced(5_000, 100, 4);
    let minority = y.iter().filter(|&&v| v).count();
    let needed = y.len() - 2 * minority;
    c.bench_function("smote", |b| {
        b.iter(|| smote(black_box(&x.values), &y, 5, needed, 5).unwrap())
    });
}

criterion_group!(kernels, auc, logistic, pca, oversample);
criterion_main!(kernels);
