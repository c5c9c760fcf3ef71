//! Per-disease and overall macro/micro F1, and a paired t-test across runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::{AnnotationSet, DiseaseLabel, TaskKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub support: usize,
}

impl ClassCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1_from_counts(self.tp, self.fp, self.fn_)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `2PR/(P+R)` written over integer counts, so it is a single correctly
/// rounded division (and equals accuracy exactly when it should).
fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    ratio(2 * tp, 2 * tp + fp + fn_)
}

/// Per-class tallies indexed by `DiseaseLabel::index`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub classes: [ClassCounts; 4],
}

impl ConfusionCounts {
    pub fn get(&self, label: DiseaseLabel) -> &ClassCounts {
        &self.classes[label.index()]
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        for (a, b) in self.classes.iter_mut().zip(&other.classes) {
            a.tp += b.tp;
            a.fp += b.fp;
            a.fn_ += b.fn_;
            a.support += b.support;
        }
    }

    pub fn total(&self) -> usize {
        self.classes.iter().map(|c| c.support).sum()
    }
}

/// Tallies over the gold records; every gold record needs a prediction.
pub fn confusion(
    pred: &BTreeMap<String, DiseaseLabel>,
    gold: &BTreeMap<String, DiseaseLabel>,
) -> Result<ConfusionCounts> {
    let missing: Vec<String> = gold.keys().filter(|id| !pred.contains_key(*id)).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    let mut counts = ConfusionCounts::default();
    for (id, &g) in gold {
        let p = pred[id];
        counts.classes[g.index()].support += 1;
        if p == g {
            counts.classes[g.index()].tp += 1;
        } else {
            counts.classes[g.index()].fn_ += 1;
            counts.classes[p.index()].fp += 1;
        }
    }
    Ok(counts)
}

/// Unweighted mean of class F1 over the task's classes present in gold.
pub fn macro_f1(counts: &ConfusionCounts, task: TaskKind) -> Result<f64> {
    let scores: Vec<f64> = task
        .labels()
        .iter()
        .map(|&l| counts.get(l))
        .filter(|c| c.support > 0)
        .map(ClassCounts::f1)
        .collect();
    if scores.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "macro F1 for {} task: no class has gold support",
            task.name()
        )));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

pub fn micro_f1(counts: &ConfusionCounts) -> f64 {
    let tp: usize = counts.classes.iter().map(|c| c.tp).sum();
    let fp: usize = counts.classes.iter().map(|c| c.fp).sum();
    let fn_: usize = counts.classes.iter().map(|c| c.fn_).sum();
    f1_from_counts(tp, fp, fn_)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    /// Class F1 from counts pooled across diseases, then averaged.
    pub macro_f1: f64,
    pub micro_f1: f64,
    /// Mean of the per-disease macro scores.
    pub macro_f1_disease_mean: f64,
}

pub fn overall(per_disease: &[ConfusionCounts], task: TaskKind) -> Result<Overall> {
    let mut pooled = ConfusionCounts::default();
    for c in per_disease {
        pooled.add(c);
    }
    let macros: Vec<f64> = per_disease
        .iter()
        .filter(|c| c.total() > 0)
        .map(|c| macro_f1(c, task))
        .collect::<Result<_>>()?;
    Ok(Overall {
        macro_f1: macro_f1(&pooled, task)?,
        micro_f1: micro_f1(&pooled),
        macro_f1_disease_mean: if macros.is_empty() {
            0.0
        } else {
            macros.iter().sum::<f64>() / macros.len() as f64
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDetail {
    pub label: DiseaseLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub counts: ClassCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseScore {
    pub disease: String,
    pub task: TaskKind,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub classes: Vec<ClassDetail>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOverall {
    pub task: TaskKind,
    #[serde(flatten)]
    pub scores: Overall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub diseases: Vec<DiseaseScore>,
    pub overall: Vec<TaskOverall>,
}

/// Predicted labels keyed by (task, disease), then record id.
pub type PredictionTable = BTreeMap<(TaskKind, String), BTreeMap<String, DiseaseLabel>>;

/// Published overall scores (macro textual, macro intuitive, micro textual,
/// micro intuitive) printed under the table for comparison.
pub const REFERENCE_ROWS: [(&str, [f64; 4]); 2] = [
    ("reference: rules only", [0.8000, 0.6745, 0.9756, 0.9590]),
    ("reference: kg-cnn", [0.8016, 0.6768, 0.9763, 0.9624]),
];

impl EvalReport {
    /// Scores every (task, disease) in the gold sets. Diseases whose gold
    /// has no judgments are skipped.
    pub fn build(pred: &PredictionTable, gold: &[&AnnotationSet]) -> Result<Self> {
        let empty = BTreeMap::new();
        let mut diseases = Vec::new();
        let mut overall = Vec::new();
        for set in gold {
            let task = set.task;
            let mut per_disease = Vec::new();
            for disease in set.diseases() {
                let g = set.for_disease(&disease);
                let p = pred.get(&(task, disease.clone())).unwrap_or(&empty);
                let counts = confusion(p, &g).map_err(|e| match e {
                    Error::Coverage(ids) => Error::Coverage(
                        ids.into_iter()
                            .map(|id| format!("{id} ({disease}, {})", task.name()))
                            .collect(),
                    ),
                    other => other,
                })?;
                diseases.push(DiseaseScore {
                    disease: disease.clone(),
                    task,
                    macro_f1: macro_f1(&counts, task)?,
                    micro_f1: micro_f1(&counts),
                    classes: task
                        .labels()
                        .iter()
                        .map(|&l| {
                            let c = *counts.get(l);
                            ClassDetail {
                                label: l,
                                precision: c.precision(),
                                recall: c.recall(),
                                f1: c.f1(),
                                counts: c,
                            }
                        })
                        .collect(),
                });
                per_disease.push(counts);
            }
            if !per_disease.is_empty() {
                overall.push(TaskOverall {
                    task,
                    scores: self::overall(&per_disease, task)?,
                });
            }
        }
        Ok(Self { diseases, overall })
    }

    pub fn overall_for(&self, task: TaskKind) -> Option<&Overall> {
        self.overall.iter().find(|o| o.task == task).map(|o| &o.scores)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format(origin, e.line(), e.to_string()))
    }

    /// Rows per disease plus an overall row; columns are macro F1 then
    /// micro F1, each split into textual and intuitive.
    pub fn to_table(&self) -> String {
        let mut names: Vec<&str> = self.diseases.iter().map(|d| d.disease.as_str()).collect();
        names.sort();
        names.dedup();
        let width = names.iter().map(|n| n.len()).chain([24]).max().unwrap_or(24);
        let cell = |v: Option<f64>| v.map_or_else(|| format!("{:>10}", "-"), |v| format!("{v:>10.4}"));

        let mut out = String::new();
        let _ = writeln!(out, "{:<width$} {:^21} {:^21}", "", "Macro F1", "Micro F1");
        let _ = writeln!(
            out,
            "{:<width$} {:>10} {:>10} {:>10} {:>10}",
            "Disease", "Textual", "Intuitive", "Textual", "Intuitive"
        );
        for name in &names {
            let find = |t: TaskKind| self.diseases.iter().find(|d| d.disease == *name && d.task == t);
            let (t, i) = (find(TaskKind::Textual), find(TaskKind::Intuitive));
            let _ = writeln!(
                out,
                "{name:<width$} {} {} {} {}",
                cell(t.map(|d| d.macro_f1)),
                cell(i.map(|d| d.macro_f1)),
                cell(t.map(|d| d.micro_f1)),
                cell(i.map(|d| d.micro_f1)),
            );
        }
        let (t, i) = (self.overall_for(TaskKind::Textual), self.overall_for(TaskKind::Intuitive));
        let _ = writeln!(
            out,
            "{:<width$} {} {} {} {}",
            "Overall",
            cell(t.map(|o| o.macro_f1)),
            cell(i.map(|o| o.macro_f1)),
            cell(t.map(|o| o.micro_f1)),
            cell(i.map(|o| o.micro_f1)),
        );
        let _ = writeln!(
            out,
            "{:<width$} {} {} {:>10} {:>10}",
            "Overall (disease mean)",
            cell(t.map(|o| o.macro_f1_disease_mean)),
            cell(i.map(|o| o.macro_f1_disease_mean)),
            "",
            "",
        );
        for (label, v) in REFERENCE_ROWS {
            let _ = writeln!(
                out,
                "{label:<width$} {} {} {} {}",
                cell(Some(v[0])),
                cell(Some(v[1])),
                cell(Some(v[2])),
                cell(Some(v[3]))
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
    /// The differences have zero variance.
    pub degenerate: bool,
}

/// Two-tailed paired Student t-test of `a` against `b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Constraint(format!(
            "paired runs differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Constraint("paired t-test needs at least two runs per side".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 {
        let (t, p) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        };
        return Ok(TTest {
            t,
            p,
            df,
            degenerate: true,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Internal(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest {
        t,
        p,
        df,
        degenerate: false,
    })
}
