use kgclin::baselines::{
    featurize, predict_linear, train_linear_svm, train_logreg, BowVocabulary, LinearConfig, LinearKind, LinearModel,
};
use kgclin::corpus::DiseaseLabel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const YU: [DiseaseLabel; 2] = [DiseaseLabel::Y, DiseaseLabel::U];

fn toks(s: &[&str]) -> Vec<String> {
    s.iter().map(|t| t.to_string()).collect()
}

fn norm(m: &LinearModel) -> f64 {
    m.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
}

fn noisy_pairs() -> Vec<(Vec<String>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    (0..60)
        .map(|i| {
            let class = i % 2;
            let n = rng.gen_range(1..5);
            let t: Vec<String> = (0..n)
                .map(|_| {
                    let informative = rng.gen_bool(0.7);
                    let c = if informative { class } else { 1 - class };
                    format!("t{c}_{}", rng.gen_range(0..4))
                })
                .collect();
            (t, class)
        })
        .collect()
}

#[test]
fn logreg_shrinks_with_l2() {
    let pairs = noisy_pairs();
    let norms: Vec<f64> = [0.01, 1.0, 100.0]
        .iter()
        .map(|&l2| {
            let cfg = LinearConfig {
                l2,
                lr: 0.005,
                epochs: 4000,
                ..LinearConfig::default()
            };
            norm(&train_logreg(&pairs, YU, &cfg).unwrap())
        })
        .collect();
    assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
    assert!(norms[2] < 0.01, "{norms:?}");
}

#[test]
fn svm_shrinks_with_small_c() {
    let pairs = noisy_pairs();
    let norms: Vec<f64> = [100.0, 1.0, 0.01]
        .iter()
        .map(|&c| {
            let cfg = LinearConfig {
                c,
                epochs: 3000,
                ..LinearConfig::default()
            };
            norm(&train_linear_svm(&pairs, YU, &cfg).unwrap())
        })
        .collect();
    assert!(norms[0] >= norms[1] && norms[1] > norms[2], "{norms:?}");
}

/// Two points, one feature each, opposite labels. By symmetry the bias is 0
/// and the weights are ±w where `l2·w = σ(−w)/2` (each weight sees one of the
/// two examples in the mean loss).
#[test]
fn logreg_matches_symmetric_closed_form() {
    let pairs = vec![(toks(&["a"]), 0), (toks(&["b"]), 1)];
    for l2 in [0.05, 0.2, 1.0] {
        let sigma = |z: f64| 1.0 / (1.0 + (-z).exp());
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if l2 * mid < sigma(-mid) / 2.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let cfg = LinearConfig {
            l2,
            lr: 0.5,
            epochs: 20_000,
            ..LinearConfig::default()
        };
        let m = train_logreg(&pairs, YU, &cfg).unwrap();
        let a = m.vocab.index_of("a").unwrap();
        let b = m.vocab.index_of("b").unwrap();
        assert!((m.weights[a] - lo).abs() < 1e-3, "l2={l2}: {} vs {lo}", m.weights[a]);
        assert!((m.weights[b] + lo).abs() < 1e-3);
        assert!(m.bias.abs() < 1e-3);
    }
}

/// With large C the hard-margin solution has functional margin 1.
#[test]
fn svm_margin_on_separable_data() {
    let pairs = vec![
        (toks(&["a", "c"]), 0),
        (toks(&["a"]), 0),
        (toks(&["b"]), 1),
        (toks(&["b", "d"]), 1),
    ];
    let cfg = LinearConfig {
        c: 100.0,
        epochs: 5000,
        ..LinearConfig::default()
    };
    let m = train_linear_svm(&pairs, YU, &cfg).unwrap();
    let margin = pairs
        .iter()
        .map(|(t, c)| {
            let y = if *c == 0 { 1.0 } else { -1.0 };
            y * m.score(&featurize(t, &m.vocab))
        })
        .fold(f64::INFINITY, f64::min);
    assert!(margin >= 0.95, "margin {margin}");
}

#[test]
fn prediction_agrees_with_dense_dot_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let vocab = BowVocabulary::build([toks(&["a", "b", "c", "d", "e", "f"]).as_slice()]);
    for _ in 0..200 {
        let m = LinearModel {
            kind: LinearKind::LogReg,
            vocab: vocab.clone(),
            weights: (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            bias: rng.gen_range(-1.0..1.0),
            class_index: YU,
        };
        let t: Vec<String> = (0..rng.gen_range(0..8))
            .map(|_| ["a", "b", "c", "d", "e", "f", "zz"][rng.gen_range(0..7)].to_string())
            .collect();
        let x = featurize(&t, &vocab).dense(6);
        let score: f64 = m.bias + x.iter().zip(&m.weights).map(|(a, b)| a * b).sum::<f64>();
        let expected = if score >= 0.0 { DiseaseLabel::Y } else { DiseaseLabel::U };
        assert_eq!(predict_linear(&m, &featurize(&t, &vocab)), expected);
    }
}

proptest! {
    #[test]
    fn featurize_ignores_multiplicity(words in prop::collection::vec("[a-d]{1,2}", 0..10), reps in 1usize..4) {
        let vocab = BowVocabulary::build([toks(&["a", "b", "ab", "cd", "dd"]).as_slice()]);
        let repeated: Vec<String> = words.iter().flat_map(|w| std::iter::repeat_n(w.clone(), reps)).collect();
        let once = featurize(&words, &vocab);
        prop_assert_eq!(&featurize(&repeated, &vocab), &once);
        prop_assert!(once.dense(vocab.len()).iter().all(|v| *v == 0.0 || *v == 1.0));
    }
}
