//! Sequential vs parallel execution of the three data-parallel stages.
//! Without the `parallel` feature both arms run the same code.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kgclin::cascade::classify_all;
use kgclin::corpus::TaskKind;
use kgclin::exec::Exec;
use kgclin::kgcnn::ModelConfig;
use kgclin::pipeline::{train_models, training_jobs, ModelBank, ModelKind, TrainOptions};
use kgclin::synthgen::{generate, SynthSpec};

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn stages(c: &mut Criterion) {
    let corpus = generate(&SynthSpec::challenge_like(1, 200, 100)).unwrap();
    let res = corpus.resources();
    let train = res.analyze_all(&corpus.train.records, Exec::Sequential).unwrap();
    let test = res.analyze_all(&corpus.test.records, Exec::Sequential).unwrap();
    let jobs = training_jobs(&corpus.train.records, &train, &corpus.train.textual, false).unwrap();
    let opts = TrainOptions {
        model: ModelConfig {
            epochs: 2,
            filters: 32,
            hidden: 32,
            ..ModelConfig::default()
        },
        ..TrainOptions::default()
    };
    let bank: ModelBank = train_models(&jobs, ModelKind::Kgcnn, &opts, &res, Exec::Parallel)
        .unwrap()
        .into_iter()
        .collect();

    let mut g = c.benchmark_group("exec");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_with_input(BenchmarkId::new("analyze", name), &exec, |b, &e| {
            b.iter(|| res.analyze_all(&corpus.test.records, e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("train_kgcnn", name), &exec, |b, &e| {
            b.iter(|| train_models(&jobs[..1], ModelKind::Kgcnn, &opts, &res, e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("classify", name), &exec, |b, &e| {
            b.iter(|| classify_all(&test, &[TaskKind::Textual], &bank, &res, e).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
