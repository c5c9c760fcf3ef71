//! Independent checks of the CNN arithmetic: central finite differences for
//! gradients, and a literal padded-matrix re-implementation for the forward
//! pass.

use kgclin::embeddings::EmbeddingTable;
use kgclin::exec::Exec;
use kgclin::kgcnn::{train, train_encoded, ChannelMatrix, EncodedInput, KgCnnInput, KgCnnModel, ModelConfig, Params};
use kgclin_testkit::cnn::{max_gradient_error, naive_probs, random_channel, random_model, tiny_config, CLASSES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..5 {
        let err = max_gradient_error(seed);
        assert!(err < 1e-3, "seed {seed}: max relative error {err}");
    }
}

#[test]
fn forward_matches_naive_reimplementation() {
    let cfg = ModelConfig {
        filters: 7,
        kernel: 3,
        hidden: 5,
        ..tiny_config()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = random_model(&cfg, 4, &mut rng);
    for (wl, cl) in [(0, 0), (1, 2), (3, 3), (6, 5), (2, 6)] {
        let input = EncodedInput {
            words: random_channel(&mut rng, wl, 4, 6),
            cuis: random_channel(&mut rng, cl, 4, 6),
        };
        let mask: Vec<f64> = (0..cfg.hidden).map(|j| if j % 3 == 0 { 0.0 } else { 1.25 }).collect();
        let fast = model.forward_with_mask(&input, mask.clone()).unwrap().probs;
        let slow = naive_probs(&model, &input, &mask);
        for c in 0..2 {
            assert!((fast[c] - slow[c]).abs() < 1e-9, "{fast:?} vs {slow:?}");
        }
        assert!((fast[0] + fast[1] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn stated_shapes() {
    // Word channel 64 × 200, kernel 5, 256 filters: 60 conv positions,
    // 256 pooled features per channel, 512 concatenated, 128 hidden, 2 outputs.
    let cfg = ModelConfig::default();
    let params = Params::zeros(&cfg, 200, 200);
    assert_eq!(params.word_conv.len(), 256 * 5 * 200);
    assert_eq!(params.fc1_w.len(), 128 * 512);
    assert_eq!(params.fc2_w.len(), 2 * 128);
    let full = ChannelMatrix::new(vec![0.1; 64 * 200], 200, 64);
    assert_eq!(full.pool_positions(cfg.kernel), 60);
    let model = KgCnnModel::new(cfg.clone(), 200, 200, CLASSES, params);
    let input = EncodedInput {
        words: full,
        cuis: ChannelMatrix::empty(200, 128),
    };
    let cache = model.forward_with_mask(&input, vec![1.0; 128]).unwrap();
    assert_eq!(cache.pooled().len(), 512);
    assert_eq!(cache.probs, [0.5, 0.5]);
}

#[test]
fn channel_independence() {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = random_model(&cfg, 5, &mut rng);
    let words = random_channel(&mut rng, 4, 5, 6);
    let with = EncodedInput {
        words: words.clone(),
        cuis: random_channel(&mut rng, 5, 5, 6),
    };
    let without = EncodedInput {
        words,
        cuis: ChannelMatrix::new(vec![0.0; 25], 5, 6),
    };
    let a = model.forward_with_mask(&with, vec![1.0; 4]).unwrap();
    let b = model.forward_with_mask(&without, vec![1.0; 4]).unwrap();
    assert_eq!(a.pooled()[..3], b.pooled()[..3]);
    assert_ne!(a.pooled()[3..], b.pooled()[3..]);
}

#[test]
fn saturated_example_has_near_zero_gradient() {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut model = random_model(&cfg, 5, &mut rng);
    model.params.fc2_b = vec![60.0, -60.0];
    let x = EncodedInput {
        words: random_channel(&mut rng, 3, 5, 6),
        cuis: random_channel(&mut rng, 3, 5, 6),
    };
    let cache = model.forward_with_mask(&x, vec![1.0; 4]).unwrap();
    let mut g = model.params.zeros_like();
    model.backward(&x, &cache, 0, 1.0, &mut g);
    let max = g.tensors().iter().flat_map(|t| t.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max < 1e-40, "{max}");
}

#[test]
fn all_keep_dropout_equals_no_dropout() {
    let cfg = ModelConfig {
        dropout_keep: 1.0,
        ..tiny_config()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = random_model(&cfg, 5, &mut rng);
    let x = EncodedInput {
        words: random_channel(&mut rng, 3, 5, 6),
        cuis: random_channel(&mut rng, 4, 5, 6),
    };
    let with = model.forward(&x, Some(&mut rng)).unwrap();
    let without = model.forward::<ChaCha8Rng>(&x, None).unwrap();
    let (mut g1, mut g2) = (model.params.zeros_like(), model.params.zeros_like());
    model.backward(&x, &with, 1, 1.0, &mut g1);
    model.backward(&x, &without, 1, 1.0, &mut g2);
    assert_eq!(g1, g2);
}

/// Two disjoint vocabularies, one per class.
fn separable(n: usize) -> (Vec<(KgCnnInput, usize)>, EmbeddingTable, EmbeddingTable, ModelConfig) {
    let cfg = ModelConfig {
        filters: 16,
        hidden: 16,
        seed: 42,
        ..ModelConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut words = EmbeddingTable::new(20);
    let vocab: Vec<Vec<String>> = (0..2)
        .map(|c| (0..10).map(|i| format!("c{c}w{i}")).collect())
        .collect();
    for v in vocab.iter().flatten() {
        let vec: Vec<f64> = (0..20).map(|_| rng.gen_range(-0.5..0.5)).collect();
        words.insert(v, &vec).unwrap();
    }
    let cuis = EmbeddingTable::new(8);
    let pairs = (0..n)
        .map(|i| {
            let class = i % 2;
            let len = rng.gen_range(1..8);
            let toks: Vec<String> = (0..len).map(|_| vocab[class][rng.gen_range(0..10)].clone()).collect();
            (KgCnnInput::new(&toks, &[], &cfg), class)
        })
        .collect();
    (pairs, words, cuis, cfg)
}

#[test]
fn separable_training_converges_and_is_deterministic() {
    let (pairs, words, cuis, cfg) = separable(200);
    let (model, report) = train(&pairs, &cfg, &words, &cuis, CLASSES, Exec::Parallel).unwrap();
    let correct = pairs
        .iter()
        .filter(|(x, c)| model.predict(&x.encode(&words, &cuis)).unwrap().0 == CLASSES[*c])
        .count();
    let acc = correct as f64 / pairs.len() as f64;
    assert!(acc >= 0.99, "training accuracy {acc}");

    let ma: Vec<f64> = report.epoch_losses.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
    for w in ma.windows(2) {
        assert!(w[1] <= w[0], "moving average rose: {ma:?}");
    }

    let (again, _) = train(&pairs, &cfg, &words, &cuis, CLASSES, Exec::Sequential).unwrap();
    for (a, b) in model.params.tensors().iter().zip(again.params.tensors()) {
        let ab: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
        let bb: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
        assert_eq!(ab, bb);
    }
}

#[test]
fn predictions_ignore_padding_length() {
    let (pairs, words, cuis, cfg) = separable(40);
    let (model, _) = train(&pairs, &cfg, &words, &cuis, CLASSES, Exec::Sequential).unwrap();
    let wide = ModelConfig { max_words: 80, ..cfg.clone() };
    for (x, _) in &pairs {
        let a = model.predict(&x.encode(&words, &cuis)).unwrap();
        let x80 = KgCnnInput::new(&x.words, &x.cuis, &wide);
        assert_eq!(x80.word_padded, 80);
        let b = model.predict(&x80.encode(&words, &cuis)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn predicted_probability_is_forward_max() {
    let (pairs, words, cuis, cfg) = separable(20);
    let encoded: Vec<(EncodedInput, usize)> = pairs.iter().map(|(x, c)| (x.encode(&words, &cuis), *c)).collect();
    let (model, _) = train_encoded(&encoded, 20, 8, CLASSES, &ModelConfig { epochs: 2, ..cfg }, Exec::Sequential).unwrap();
    for (x, _) in &encoded {
        let probs = model.forward::<ChaCha8Rng>(x, None).unwrap().probs;
        let (_, p) = model.predict(x).unwrap();
        assert_eq!(p, probs[0].max(probs[1]));
    }
}

proptest::proptest! {
    #[test]
    fn probabilities_sum_to_one_and_ignore_padding(seed in 0u64..10_000, wl in 0usize..7, cl in 0usize..7) {
        let cfg = tiny_config();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&cfg, 5, &mut rng);
        let words = random_channel(&mut rng, wl, 5, 6);
        let cuis = random_channel(&mut rng, cl, 5, 6);
        let x = EncodedInput { words: words.clone(), cuis: cuis.clone() };
        let wide = EncodedInput {
            words: ChannelMatrix::new(words.rows.clone(), 5, 13),
            cuis: ChannelMatrix::new(cuis.rows.clone(), 5, 9),
        };
        let a = model.forward_with_mask(&x, vec![1.0; cfg.hidden]).unwrap().probs;
        let b = model.forward_with_mask(&wide, vec![1.0; cfg.hidden]).unwrap().probs;
        proptest::prop_assert!((a[0] + a[1] - 1.0).abs() < 1e-12);
        proptest::prop_assert!(a.iter().all(|p| (0.0..=1.0).contains(p)));
        proptest::prop_assert_eq!(a, b);
    }
}
