//! Linear comparators over a binary bag of positive-trigger tokens:
//! L2-regularized logistic regression and a linear SVM, both trained by
//! full-batch (sub)gradient descent.
//!
//! Class 0 of `class_index` is the positive side (`y = +1`); a score of zero
//! or more predicts it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::DiseaseLabel;
use crate::error::{Error, Result};
use crate::modelfile::TensorFile;

/// Lexicographically ordered token vocabulary fixed at training time.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BowVocabulary {
    tokens: Vec<String>,
}

impl BowVocabulary {
    pub fn build<'a, I, S>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let set: BTreeSet<&str> = docs.into_iter().flatten().map(|s| s.as_ref()).collect();
        Self {
            tokens: set.into_iter().map(str::to_string).collect(),
        }
    }

    pub fn from_sorted(tokens: Vec<String>) -> Result<Self> {
        if tokens.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Constraint("vocabulary must be sorted and unique".into()));
        }
        Ok(Self { tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.tokens.binary_search_by(|t| t.as_str().cmp(token)).ok()
    }
}

/// Sorted indices of the vocabulary entries that are present.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BowVector {
    pub active: Vec<usize>,
}

impl BowVector {
    pub fn dense(&self, len: usize) -> Vec<f64> {
        let mut v = vec![0.0; len];
        for &i in &self.active {
            v[i] = 1.0;
        }
        v
    }
}

pub fn featurize<S: AsRef<str>>(tokens: &[S], vocab: &BowVocabulary) -> BowVector {
    let set: BTreeSet<usize> = tokens.iter().filter_map(|t| vocab.index_of(t.as_ref())).collect();
    BowVector {
        active: set.into_iter().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearKind {
    LogReg,
    LinearSvm,
}

impl LinearKind {
    pub fn name(self) -> &'static str {
        match self {
            LinearKind::LogReg => "logreg",
            LinearKind::LinearSvm => "svm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearConfig {
    pub lr: f64,
    pub epochs: usize,
    /// L2 strength for logistic regression.
    pub l2: f64,
    /// Hinge-loss weight for the SVM.
    pub c: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            lr: 0.5,
            epochs: 500,
            l2: 1e-4,
            c: 1.0,
        }
    }
}

impl LinearConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.epochs == 0 || !(self.l2 >= 0.0) || !(self.c > 0.0) {
            return Err(Error::Config(format!("invalid linear model settings: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub vocab: BowVocabulary,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub class_index: [DiseaseLabel; 2],
}

impl LinearModel {
    pub fn score(&self, x: &BowVector) -> f64 {
        self.bias + x.active.iter().map(|&i| self.weights[i]).sum::<f64>()
    }

    pub fn predict_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> DiseaseLabel {
        predict_linear(self, &featurize(tokens, &self.vocab))
    }

    pub fn to_file(&self) -> TensorFile {
        TensorFile {
            header: json!({
                "kind": self.kind.name(),
                "vocab": self.vocab.tokens(),
                "class_index": self.class_index,
            }),
            tensors: vec![("weights".into(), self.weights.clone()), ("bias".into(), vec![self.bias])],
        }
    }

    pub fn from_file(mut file: TensorFile) -> Result<Self> {
        let kind = match file.kind() {
            Some("logreg") => LinearKind::LogReg,
            Some("svm") => LinearKind::LinearSvm,
            _ => return Err(Error::format("model", 0, "not a linear model file")),
        };
        let vocab = BowVocabulary::from_sorted(file.header_field("vocab")?)?;
        let class_index = file.header_field("class_index")?;
        let weights = file.take("weights", vocab.len())?;
        let bias = file.take("bias", 1)?[0];
        Ok(Self {
            kind,
            vocab,
            weights,
            bias,
            class_index,
        })
    }
}

/// Tie (score exactly zero) goes to the first class.
pub fn predict_linear(model: &LinearModel, x: &BowVector) -> DiseaseLabel {
    if model.score(x) >= 0.0 {
        model.class_index[0]
    } else {
        model.class_index[1]
    }
}

fn sign(class: usize) -> f64 {
    if class == 0 {
        1.0
    } else {
        -1.0
    }
}

fn prepare<S: AsRef<str>>(pairs: &[(Vec<S>, usize)]) -> Result<(BowVocabulary, Vec<(BowVector, f64)>)> {
    if pairs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if let Some((_, c)) = pairs.iter().find(|(_, c)| *c > 1) {
        return Err(Error::Internal(format!("class index {c} out of range")));
    }
    let vocab = BowVocabulary::build(pairs.iter().map(|(t, _)| t.as_slice()));
    let data = pairs.iter().map(|(t, c)| (featurize(t, &vocab), sign(*c))).collect();
    Ok((vocab, data))
}

/// Loss gradient of the data term given `dscore(margin)`, the derivative of
/// the per-example loss with respect to the score.
fn data_gradient(
    data: &[(BowVector, f64)],
    weights: &[f64],
    bias: f64,
    dscore: impl Fn(f64) -> f64,
) -> (Vec<f64>, f64) {
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    let n = data.len() as f64;
    for (x, y) in data {
        let s = bias + x.active.iter().map(|&i| weights[i]).sum::<f64>();
        let d = dscore(y * s) * y / n;
        if d != 0.0 {
            for &i in &x.active {
                gw[i] += d;
            }
            gb += d;
        }
    }
    (gw, gb)
}

/// Mean log loss plus `l2/2 · ‖w‖²`; bias unregularized. Each step applies
/// the data gradient explicitly and the penalty implicitly.
pub fn train_logreg<S: AsRef<str>>(
    pairs: &[(Vec<S>, usize)],
    class_index: [DiseaseLabel; 2],
    cfg: &LinearConfig,
) -> Result<LinearModel> {
    cfg.validate()?;
    let (vocab, data) = prepare(pairs)?;
    let mut w = vec![0.0; vocab.len()];
    let mut b = 0.0;
    let shrink = 1.0 / (1.0 + cfg.lr * cfg.l2);
    for _ in 0..cfg.epochs {
        // d/ds log(1 + e^{-m}) with m = y·s, divided by y.
        let (gw, gb) = data_gradient(&data, &w, b, |m| -sigmoid(-m));
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi = (*wi - cfg.lr * gi) * shrink;
        }
        b -= cfg.lr * gb;
    }
    Ok(LinearModel {
        kind: LinearKind::LogReg,
        vocab,
        weights: w,
        bias: b,
        class_index,
    })
}

/// Minimizes `½‖w‖² + C · Σ hinge`, scaled by `1/(C·n)` so the data term is a
/// mean. Subgradient steps of size `lr/√(t+1)`; returns the iterate with the
/// lowest objective seen.
pub fn train_linear_svm<S: AsRef<str>>(
    pairs: &[(Vec<S>, usize)],
    class_index: [DiseaseLabel; 2],
    cfg: &LinearConfig,
) -> Result<LinearModel> {
    cfg.validate()?;
    let (vocab, data) = prepare(pairs)?;
    let lambda = 1.0 / (cfg.c * data.len() as f64);
    let objective = |w: &[f64], b: f64| {
        let hinge: f64 = data
            .iter()
            .map(|(x, y)| (1.0 - y * (b + x.active.iter().map(|&i| w[i]).sum::<f64>())).max(0.0))
            .sum::<f64>()
            / data.len() as f64;
        0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>() + hinge
    };
    let mut w = vec![0.0; vocab.len()];
    let mut b = 0.0;
    let mut best = (objective(&w, b), w.clone(), b);
    for t in 0..cfg.epochs {
        let eta = cfg.lr / ((t + 1) as f64).sqrt();
        let (gw, gb) = data_gradient(&data, &w, b, |m| if m < 1.0 { -1.0 } else { 0.0 });
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi = (*wi - eta * gi) / (1.0 + eta * lambda);
        }
        b -= eta * gb;
        let obj = objective(&w, b);
        if obj < best.0 {
            best = (obj, w.clone(), b);
        }
    }
    Ok(LinearModel {
        kind: LinearKind::LinearSvm,
        vocab,
        weights: best.1,
        bias: best.2,
        class_index,
    })
}

pub fn train_linear<S: AsRef<str>>(
    kind: LinearKind,
    pairs: &[(Vec<S>, usize)],
    class_index: [DiseaseLabel; 2],
    cfg: &LinearConfig,
) -> Result<LinearModel> {
    match kind {
        LinearKind::LogReg => train_logreg(pairs, class_index, cfg),
        LinearKind::LinearSvm => train_linear_svm(pairs, class_index, cfg),
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
