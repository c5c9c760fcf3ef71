//! Test-time decision procedure: trust the rules for N and Q, hand
//! everything else to the learned model.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::LinearModel;
use crate::corpus::{DiseaseLabel, TaskKind};
use crate::error::{Error, Result};
use crate::eval::PredictionTable;
use crate::exec::Exec;
use crate::kgcnn::{KgCnnInput, KgCnnModel};
use crate::pipeline::{ModelBank, RecordAnalysis, Resources, TrainedModel};
use crate::trigger::PolaritySummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DecisionSource {
    RuleQ,
    RuleN,
    Deferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CascadeDecision {
    pub label: Option<DiseaseLabel>,
    pub source: DecisionSource,
}

impl CascadeDecision {
    const DEFERRED: Self = Self {
        label: None,
        source: DecisionSource::Deferred,
    };
}

/// A positive mention defers; otherwise negation gives N and uncertainty Q.
/// The rule is the same for both tasks.
pub fn rule_label(summary: &PolaritySummary) -> CascadeDecision {
    if summary.has_positive {
        CascadeDecision::DEFERRED
    } else if summary.has_negative {
        CascadeDecision {
            label: Some(DiseaseLabel::N),
            source: DecisionSource::RuleN,
        }
    } else if summary.has_uncertain {
        CascadeDecision {
            label: Some(DiseaseLabel::Q),
            source: DecisionSource::RuleQ,
        }
    } else {
        CascadeDecision::DEFERRED
    }
}

fn predict_kgcnn(model: &KgCnnModel, words: &[String], concepts: &[String], res: &Resources) -> Result<DiseaseLabel> {
    let input = KgCnnInput::new(words, concepts, &model.config);
    let encoded = input.encode(&res.word_embeddings, &res.cui_embeddings);
    Ok(model.predict(&encoded)?.0)
}

fn predict_linear(model: &LinearModel, words: &[String]) -> DiseaseLabel {
    model.predict_tokens(words)
}

pub fn classify_record(
    analysis: &RecordAnalysis,
    disease: &str,
    task: TaskKind,
    bank: &ModelBank,
    res: &Resources,
) -> Result<(DiseaseLabel, DecisionSource)> {
    let model = bank.get(task, disease)?;
    let summary = analysis.summary_for(disease);
    let decision = rule_label(&summary);
    if let Some(label) = decision.label {
        return Ok((label, decision.source));
    }
    let words = analysis.positive_tokens(disease);
    let label = match model {
        TrainedModel::KgCnn(m) => predict_kgcnn(m, &words, &analysis.concepts, res)?,
        TrainedModel::Linear(m) => predict_linear(m, &words),
        TrainedModel::Rules => {
            if summary.has_positive {
                DiseaseLabel::Y
            } else {
                task.class_index()[1]
            }
        }
    };
    Ok((label, DecisionSource::Deferred))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub disease: String,
    pub task: TaskKind,
    pub label: DiseaseLabel,
    pub source: DecisionSource,
}

/// Labels every analyzed record for every (task, disease) in the bank.
/// Output is ordered by task, disease, then record order.
pub fn classify_all(
    analyses: &[RecordAnalysis],
    tasks: &[TaskKind],
    bank: &ModelBank,
    res: &Resources,
    exec: Exec,
) -> Result<Vec<Prediction>> {
    let keys: Vec<(TaskKind, String)> = bank
        .models
        .keys()
        .filter(|(t, _)| tasks.contains(t))
        .cloned()
        .collect();
    let per_key = exec.map(&keys, |(task, disease)| -> Result<Vec<Prediction>> {
        analyses
            .iter()
            .map(|a| {
                let (label, source) = classify_record(a, disease, *task, bank, res)?;
                Ok(Prediction {
                    id: a.id.clone(),
                    disease: disease.clone(),
                    task: *task,
                    label,
                    source,
                })
            })
            .collect()
    });
    let mut out = Vec::new();
    for p in per_key {
        out.extend(p?);
    }
    Ok(out)
}

pub fn write_predictions<W: Write>(preds: &[Prediction], mut w: W) -> std::io::Result<()> {
    for p in preds {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_predictions(preds: &[Prediction], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_predictions(preds, &mut buf).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line).map_err(|e| Error::format(&origin, i + 1, e.to_string()))?;
        if !p.task.labels().contains(&p.label) {
            return Err(Error::format(
                &origin,
                i + 1,
                format!("label {} is not valid for the {} task", p.label, p.task.name()),
            ));
        }
        out.push(p);
    }
    Ok(out)
}

pub fn prediction_table(preds: &[Prediction]) -> PredictionTable {
    let mut table: PredictionTable = BTreeMap::new();
    for p in preds {
        table
            .entry((p.task, p.disease.clone()))
            .or_default()
            .insert(p.id.clone(), p.label);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(p: bool, n: bool, u: bool) -> PolaritySummary {
        PolaritySummary {
            has_positive: p,
            has_negative: n,
            has_uncertain: u,
        }
    }

    #[test]
    fn priority_examples() {
        assert_eq!(rule_label(&flags(true, true, true)).source, DecisionSource::Deferred);
        assert_eq!(rule_label(&flags(false, true, true)).label, Some(DiseaseLabel::N));
        assert_eq!(rule_label(&flags(false, false, true)).label, Some(DiseaseLabel::Q));
        assert_eq!(rule_label(&flags(false, false, false)), CascadeDecision::DEFERRED);
    }

    #[test]
    fn label_present_iff_not_deferred() {
        for bits in 0..8u8 {
            let d = rule_label(&flags(bits & 1 != 0, bits & 2 != 0, bits & 4 != 0));
            assert_eq!(d.label.is_some(), d.source != DecisionSource::Deferred);
            match d.source {
                DecisionSource::RuleQ => assert_eq!(d.label, Some(DiseaseLabel::Q)),
                DecisionSource::RuleN => assert_eq!(d.label, Some(DiseaseLabel::N)),
                DecisionSource::Deferred => {}
            }
        }
    }
}
