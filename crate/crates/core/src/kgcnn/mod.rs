//! Knowledge-guided CNN: one convolution bank over the words of positive
//! trigger phrases, one over the record's concept identifiers, joined after
//! max-pooling and classified by a two-layer head. Trained with Adam on
//! softmax cross-entropy; embeddings stay frozen.

mod adam;
mod model;

pub use adam::{adam_step, adam_update, OptimizerState};
pub use model::{
    batch_loss, cross_entropy, softmax, Cache, ChannelMatrix, EncodedInput, KgCnnModel, ModelConfig, Params,
    NUM_CLASSES, PROB_FLOOR, TENSOR_NAMES,
};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::corpus::DiseaseLabel;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::modelfile::TensorFile;

/// Examples per gradient-accumulation chunk. Fixed so the summation order,
/// and therefore the trained weights, do not depend on thread count.
const GRAD_CHUNK: usize = 8;

/// Token keys for both channels, truncated to the configured maxima.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KgCnnInput {
    pub words: Vec<String>,
    pub cuis: Vec<String>,
    pub word_padded: usize,
    pub cui_padded: usize,
}

impl KgCnnInput {
    pub fn new(words: &[String], cuis: &[String], cfg: &ModelConfig) -> Self {
        let cuis: &[String] = if cfg.use_concepts { cuis } else { &[] };
        Self {
            words: words.iter().take(cfg.max_words).cloned().collect(),
            cuis: cuis.iter().take(cfg.max_cuis).cloned().collect(),
            word_padded: cfg.padded_len(cfg.max_words),
            cui_padded: cfg.padded_len(cfg.max_cuis),
        }
    }

    pub fn word_mask(&self) -> Vec<bool> {
        (0..self.word_padded).map(|i| i < self.words.len()).collect()
    }

    pub fn cui_mask(&self) -> Vec<bool> {
        (0..self.cui_padded).map(|i| i < self.cuis.len()).collect()
    }

    pub fn encode(&self, word_table: &EmbeddingTable, cui_table: &EmbeddingTable) -> EncodedInput {
        let stack = |keys: &[String], table: &EmbeddingTable, padded: usize| {
            let mut rows = Vec::with_capacity(keys.len() * table.dim());
            for k in keys {
                rows.extend_from_slice(&table.lookup(k));
            }
            ChannelMatrix::new(rows, table.dim(), padded)
        };
        EncodedInput {
            words: stack(&self.words, word_table, self.word_padded),
            cuis: stack(&self.cuis, cui_table, self.cui_padded),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss per epoch (dropout active).
    pub epoch_losses: Vec<f64>,
    pub examples: usize,
    /// Only one class was present in the training data.
    pub single_class: bool,
}

/// Trains on embedded examples; `class` indexes into `class_index`.
pub fn train_encoded(
    examples: &[(EncodedInput, usize)],
    word_dim: usize,
    cui_dim: usize,
    class_index: [DiseaseLabel; 2],
    config: &ModelConfig,
    exec: Exec,
) -> Result<(KgCnnModel, TrainReport)> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if let Some((_, c)) = examples.iter().find(|(_, c)| *c >= NUM_CLASSES) {
        return Err(Error::Internal(format!("class index {c} out of range")));
    }
    let single_class = examples.iter().all(|(_, c)| *c == examples[0].1);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = Params::init(config, word_dim, cui_dim, &mut rng);
    let mut model = KgCnnModel::new(config.clone(), word_dim, cui_dim, class_index, params);
    let mut state = OptimizerState::new(&model.params);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch) {
            let keep = config.dropout_keep;
            let items: Vec<(usize, Vec<f64>)> = batch
                .iter()
                .map(|&i| {
                    let mask = (0..config.hidden)
                        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect();
                    (i, mask)
                })
                .collect();
            let scale = 1.0 / batch.len() as f64;
            let partials = exec.map_chunks(&items, GRAD_CHUNK, |chunk| -> Result<(Params, f64)> {
                let mut grads = model.params.zeros_like();
                let mut loss = 0.0;
                for (i, mask) in chunk {
                    let (input, gold) = &examples[*i];
                    let cache = model.forward_with_mask(input, mask.clone())?;
                    loss += cross_entropy(&cache.probs, *gold);
                    model.backward(input, &cache, *gold, scale, &mut grads);
                }
                Ok((grads, loss))
            });
            let mut grads = model.params.zeros_like();
            for partial in partials {
                let (g, loss) = partial?;
                grads.add_assign(&g);
                epoch_loss += loss;
            }
            adam_step(&mut model.params, &grads, &mut state, config);
        }
        epoch_losses.push(epoch_loss / examples.len() as f64);
    }

    Ok((
        model,
        TrainReport {
            epoch_losses,
            examples: examples.len(),
            single_class,
        },
    ))
}

/// Embeds the inputs and trains.
pub fn train(
    pairs: &[(KgCnnInput, usize)],
    config: &ModelConfig,
    word_table: &EmbeddingTable,
    cui_table: &EmbeddingTable,
    class_index: [DiseaseLabel; 2],
    exec: Exec,
) -> Result<(KgCnnModel, TrainReport)> {
    let encoded: Vec<(EncodedInput, usize)> = pairs
        .iter()
        .map(|(input, c)| (input.encode(word_table, cui_table), *c))
        .collect();
    train_encoded(&encoded, word_table.dim(), cui_table.dim(), class_index, config, exec)
}

impl KgCnnModel {
    pub fn to_file(&self) -> TensorFile {
        TensorFile {
            header: json!({
                "kind": "kgcnn",
                "config": self.config,
                "word_dim": self.word_dim,
                "cui_dim": self.cui_dim,
                "class_index": self.class_index,
            }),
            tensors: TENSOR_NAMES
                .iter()
                .zip(self.params.tensors())
                .map(|(n, t)| (n.to_string(), t.clone()))
                .collect(),
        }
    }

    pub fn from_file(mut file: TensorFile) -> Result<Self> {
        if file.kind() != Some("kgcnn") {
            return Err(Error::format("model", 0, "not a kgcnn model file"));
        }
        let config: ModelConfig = file.header_field("config")?;
        config.validate()?;
        let word_dim: usize = file.header_field("word_dim")?;
        let cui_dim: usize = file.header_field("cui_dim")?;
        let class_index: [DiseaseLabel; 2] = file.header_field("class_index")?;
        let mut params = Params::zeros(&config, word_dim, cui_dim);
        for (name, tensor) in TENSOR_NAMES.iter().zip(params.tensors_mut()) {
            let len = tensor.len();
            *tensor = file.take(name, len)?;
        }
        Ok(Self::new(config, word_dim, cui_dim, class_index, params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(keys: &[&str], dim: usize, seed: u64) -> EmbeddingTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = EmbeddingTable::new(dim);
        for k in keys {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            t.insert(k, &v).unwrap();
        }
        t
    }

    #[test]
    fn input_truncation_and_masks() {
        let cfg = ModelConfig {
            kernel: 3,
            max_words: 2,
            max_cuis: 4,
            ..ModelConfig::default()
        };
        let words: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let input = KgCnnInput::new(&words, &[], &cfg);
        assert_eq!(input.words, ["a", "b"]);
        // Padded up to the kernel width.
        assert_eq!(input.word_mask(), [true, true, false]);
        assert_eq!(input.cui_mask(), [false; 4]);
        let off = ModelConfig {
            use_concepts: false,
            ..cfg
        };
        assert!(KgCnnInput::new(&words, &words, &off).cuis.is_empty());
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let r = train_encoded(&[], 3, 3, [DiseaseLabel::Y, DiseaseLabel::U], &ModelConfig::default(), Exec::Sequential);
        assert!(matches!(r, Err(Error::EmptyTrainingSet)));
    }

    #[test]
    fn model_file_round_trip() {
        let cfg = ModelConfig {
            filters: 4,
            kernel: 2,
            hidden: 3,
            epochs: 2,
            batch: 2,
            ..ModelConfig::default()
        };
        let wt = table(&["x", "y"], 3, 1);
        let ct = table(&["C1"], 2, 2);
        let pairs = vec![
            (KgCnnInput::new(&["x".into()], &["C1".into()], &cfg), 0),
            (KgCnnInput::new(&["y".into()], &[], &cfg), 1),
        ];
        let (model, report) = train(&pairs, &cfg, &wt, &ct, [DiseaseLabel::Y, DiseaseLabel::N], Exec::Sequential).unwrap();
        assert_eq!(report.epoch_losses.len(), 2);
        assert!(!report.single_class);
        let bytes = model.to_file().to_bytes();
        let back = KgCnnModel::from_file(TensorFile::from_bytes(&bytes, "mem").unwrap()).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_file().to_bytes(), bytes);
    }

    #[test]
    fn single_class_is_flagged() {
        let cfg = ModelConfig {
            filters: 2,
            kernel: 2,
            hidden: 2,
            epochs: 1,
            ..ModelConfig::default()
        };
        let wt = table(&["x"], 3, 1);
        let ct = table(&["C1"], 2, 2);
        let pairs = vec![(KgCnnInput::new(&["x".into()], &[], &cfg), 0)];
        let (_, report) = train(&pairs, &cfg, &wt, &ct, [DiseaseLabel::Y, DiseaseLabel::U], Exec::Sequential).unwrap();
        assert!(report.single_class);
    }
}
