use kgclin::corpus::DiseaseLabel;
use kgclin::kgcnn::{batch_loss, ChannelMatrix, EncodedInput, KgCnnModel, ModelConfig, Params};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CLASSES: [DiseaseLabel; 2] = [DiseaseLabel::Y, DiseaseLabel::U];

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        filters: 3,
        kernel: 2,
        hidden: 4,
        max_words: 6,
        max_cuis: 6,
        ..ModelConfig::default()
    }
}

pub fn random_channel(rng: &mut ChaCha8Rng, len: usize, dim: usize, padded: usize) -> ChannelMatrix {
    ChannelMatrix::new((0..len * dim).map(|_| rng.gen_range(-1.0..1.0)).collect(), dim, padded)
}

pub fn random_model(cfg: &ModelConfig, dim: usize, rng: &mut ChaCha8Rng) -> KgCnnModel {
    let mut params = Params::init(cfg, dim, dim, rng);
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v = rng.gen_range(-0.8..0.8);
        }
    }
    KgCnnModel::new(cfg.clone(), dim, dim, CLASSES, params)
}

/// Literal reading of the architecture: materialize the padded matrix,
/// convolve at every position, mask windows touching padding, pool.
pub fn naive_probs(model: &KgCnnModel, input: &EncodedInput, dropout: &[f64]) -> [f64; 2] {
    let cfg = &model.config;
    let p = &model.params;
    let k = cfg.kernel;
    let pool = |x: &ChannelMatrix, w: &[f64], b: &[f64]| -> Vec<f64> {
        let padded_len = x.padded_len;
        let mut m = vec![vec![0.0; x.dim]; padded_len];
        for i in 0..x.len {
            m[i].copy_from_slice(&x.rows[i * x.dim..(i + 1) * x.dim]);
        }
        let mask: Vec<bool> = (0..padded_len).map(|i| i < x.len).collect();
        (0..cfg.filters)
            .map(|f| {
                let mut best = f64::NEG_INFINITY;
                for t in 0..=padded_len - k {
                    let window_real = (t..t + k).all(|i| mask[i]);
                    if !(window_real || (x.len < k && t == 0)) {
                        continue;
                    }
                    let mut s = b[f];
                    for kk in 0..k {
                        for d in 0..x.dim {
                            s += w[(f * k + kk) * x.dim + d] * m[t + kk][d];
                        }
                    }
                    best = best.max(s.max(0.0));
                }
                best
            })
            .collect()
    };
    let mut h0 = pool(&input.words, &p.word_conv, &p.word_bias);
    h0.extend(pool(&input.cuis, &p.cui_conv, &p.cui_bias));
    let a1: Vec<f64> = (0..cfg.hidden)
        .map(|j| {
            let z: f64 = p.fc1_b[j] + (0..h0.len()).map(|i| p.fc1_w[j * h0.len() + i] * h0[i]).sum::<f64>();
            (z * dropout[j]).max(0.0)
        })
        .collect();
    let z: Vec<f64> = (0..2)
        .map(|c| p.fc2_b[c] + (0..cfg.hidden).map(|j| p.fc2_w[c * cfg.hidden + j] * a1[j]).sum::<f64>())
        .collect();
    let e0 = z[0].exp();
    let e1 = z[1].exp();
    [e0 / (e0 + e1), e1 / (e0 + e1)]
}

fn loss_of(model: &KgCnnModel, batch: &[(EncodedInput, usize, Vec<f64>)]) -> f64 {
    let probs: Vec<[f64; 2]> = batch
        .iter()
        .map(|(x, _, m)| model.forward_with_mask(x, m.clone()).unwrap().probs)
        .collect();
    let gold: Vec<usize> = batch.iter().map(|b| b.1).collect();
    batch_loss(&probs, &gold)
}

/// Worst relative disagreement between backprop and central differences
/// (h = 1e-4) over every parameter, on a random tiny model and a batch that
/// mixes full, short and empty channels.
pub fn max_gradient_error(seed: u64) -> f64 {
    let cfg = tiny_config();
    let dim = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = random_model(&cfg, dim, &mut rng);
    let keep = cfg.dropout_keep;
    let batch: Vec<(EncodedInput, usize, Vec<f64>)> = [(4, 5), (1, 3), (0, 6)]
        .iter()
        .enumerate()
        .map(|(i, &(wl, cl))| {
            let input = EncodedInput {
                words: random_channel(&mut rng, wl, dim, 6),
                cuis: random_channel(&mut rng, cl, dim, 6),
            };
            let mask = (0..cfg.hidden)
                .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect();
            (input, i % 2, mask)
        })
        .collect();

    let mut grads = model.params.zeros_like();
    for (x, gold, mask) in &batch {
        let cache = model.forward_with_mask(x, mask.clone()).unwrap();
        model.backward(x, &cache, *gold, 1.0 / batch.len() as f64, &mut grads);
    }

    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for t in 0..grads.tensors().len() {
        for i in 0..grads.tensors()[t].len() {
            let orig = model.params.tensors()[t][i];
            model.params.tensors_mut()[t][i] = orig + h;
            let up = loss_of(&model, &batch);
            model.params.tensors_mut()[t][i] = orig - h;
            let down = loss_of(&model, &batch);
            model.params.tensors_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.tensors()[t][i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    worst
}
