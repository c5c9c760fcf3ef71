//! Record analysis shared by training and classification, and per-(task,
//! disease) model training.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{train_linear, LinearConfig, LinearKind, LinearModel};
use crate::corpus::{build_training_set, AnnotationSet, ClinicalRecord, DiseaseLabel, TaskKind};
use crate::embeddings::{fnv1a, EmbeddingTable};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kgcnn::{train, KgCnnInput, KgCnnModel, ModelConfig, TrainReport};
use crate::linker::{filter_by_tui, link_concepts, ConceptDictionary, TuiWhitelist};
use crate::modelfile::TensorFile;
use crate::preprocess::{tokenize, Preprocessor, TokenizedText};
use crate::trigger::{
    find_trigger_phrases, polarity_summary, positive_trigger_tokens, CueLexicon, Lexicon, PolaritySummary,
    TriggerPhrase,
};

/// Everything needed to turn raw text into model inputs.
#[derive(Debug, Clone)]
pub struct Resources {
    pub preprocessor: Preprocessor,
    pub lexicon: Lexicon,
    pub cues: CueLexicon,
    pub dictionary: ConceptDictionary,
    pub whitelist: TuiWhitelist,
    pub word_embeddings: EmbeddingTable,
    pub cui_embeddings: EmbeddingTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordAnalysis {
    pub id: String,
    pub tokens: TokenizedText,
    pub triggers: Vec<TriggerPhrase>,
    pub summary: BTreeMap<String, PolaritySummary>,
    /// Whitelisted concept identifiers, unique, in first-occurrence order.
    pub concepts: Vec<String>,
}

impl RecordAnalysis {
    pub fn summary_for(&self, disease: &str) -> PolaritySummary {
        self.summary.get(disease).copied().unwrap_or_default()
    }

    /// Words of this disease's positive trigger phrases, in document order.
    pub fn positive_tokens(&self, disease: &str) -> Vec<String> {
        let own: Vec<TriggerPhrase> = self.triggers.iter().filter(|t| t.disease == disease).cloned().collect();
        positive_trigger_tokens(&own, &self.tokens)
    }
}

impl Resources {
    pub fn analyze(&self, record: &ClinicalRecord) -> Result<RecordAnalysis> {
        let text = self.preprocessor.apply(&record.text);
        let tokens = tokenize(&text);
        let triggers = find_trigger_phrases(&tokens, &self.lexicon, &self.cues);
        let bag = filter_by_tui(&link_concepts(&tokens, &self.dictionary), &self.dictionary, &self.whitelist)?;
        Ok(RecordAnalysis {
            id: record.id.clone(),
            summary: polarity_summary(&triggers),
            concepts: bag.cuis().map(str::to_string).collect(),
            tokens,
            triggers,
        })
    }

    pub fn analyze_all(&self, records: &[ClinicalRecord], exec: Exec) -> Result<Vec<RecordAnalysis>> {
        exec.map(records, |r| self.analyze(r)).into_iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Kgcnn,
    Logreg,
    Svm,
    /// No learned model: deferred records get Y with a positive trigger,
    /// otherwise the task's default class.
    Rules,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Kgcnn, ModelKind::Logreg, ModelKind::Svm, ModelKind::Rules];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Kgcnn => "kgcnn",
            ModelKind::Logreg => "logreg",
            ModelKind::Svm => "svm",
            ModelKind::Rules => "rules",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind `{s}` (expected kgcnn, logreg, svm or rules)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    KgCnn(KgCnnModel),
    Linear(LinearModel),
    Rules,
}

impl TrainedModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            TrainedModel::KgCnn(m) => m.to_file().save(path),
            TrainedModel::Linear(m) => m.to_file().save(path),
            TrainedModel::Rules => Err(Error::Internal("rule-only models have no parameters to save".into())),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = TensorFile::load(path)?;
        let origin = path.display().to_string();
        match file.kind() {
            Some("kgcnn") => KgCnnModel::from_file(file).map(TrainedModel::KgCnn),
            Some("logreg") | Some("svm") => LinearModel::from_file(file).map(TrainedModel::Linear),
            _ => Err(Error::format(&origin, 0, "unrecognized model kind")),
        }
    }
}

/// Models keyed by (task, disease).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelBank {
    pub models: BTreeMap<(TaskKind, String), TrainedModel>,
}

impl ModelBank {
    /// A bank answering every (task, disease) of the lexicon by rules only.
    pub fn rules_only(lexicon: &Lexicon) -> Self {
        let mut models = BTreeMap::new();
        for task in TaskKind::ALL {
            for d in lexicon.diseases() {
                models.insert((task, d.to_string()), TrainedModel::Rules);
            }
        }
        Self { models }
    }

    pub fn get(&self, task: TaskKind, disease: &str) -> Result<&TrainedModel> {
        self.models.get(&(task, disease.to_string())).ok_or_else(|| {
            Error::Config(format!("no trained model for disease `{disease}` on the {} task", task.name()))
        })
    }

    pub fn file_name(task: TaskKind, disease: &str) -> String {
        let safe: String = disease
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        format!("{}__{safe}.model", task.name())
    }

    /// Writes one file per model plus an `index.json` mapping keys to files.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut index = Vec::new();
        for ((task, disease), model) in &self.models {
            let name = Self::file_name(*task, disease);
            model.save(&dir.join(&name))?;
            index.push(IndexEntry {
                task: *task,
                disease: disease.clone(),
                file: name,
            });
        }
        let path = dir.join("index.json");
        let json = serde_json::to_string_pretty(&index).expect("index serializes");
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let path = dir.join("index.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let index: Vec<IndexEntry> = serde_json::from_str(&text)
            .map_err(|e| Error::format(path.display().to_string(), e.line(), e.to_string()))?;
        let mut models = BTreeMap::new();
        for entry in index {
            let model = TrainedModel::load(&dir.join(&entry.file))?;
            models.insert((entry.task, entry.disease), model);
        }
        Ok(Self { models })
    }
}

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    task: TaskKind,
    disease: String,
    file: String,
}

/// Per-disease training examples for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainJob {
    pub task: TaskKind,
    pub disease: String,
    pub words: Vec<Vec<String>>,
    pub concepts: Vec<Vec<String>>,
    /// Index into the task's `class_index`.
    pub classes: Vec<usize>,
}

impl TrainJob {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct TrainOptions {
    pub model: ModelConfig,
    pub linear: LinearConfig,
    /// Leave out training records with no positive trigger for the disease.
    pub exclude_triggerless: bool,
}


/// Builds one job per disease judged in `annotations`. `analyses` must cover
/// every annotated record.
pub fn training_jobs(
    records: &[ClinicalRecord],
    analyses: &[RecordAnalysis],
    annotations: &AnnotationSet,
    exclude_triggerless: bool,
) -> Result<Vec<TrainJob>> {
    let task = annotations.task;
    let by_id: BTreeMap<&str, &RecordAnalysis> = analyses.iter().map(|a| (a.id.as_str(), a)).collect();
    let class_index = task.class_index();
    let mut jobs = Vec::new();
    for (disease, pairs) in build_training_set(records, annotations, task) {
        let mut job = TrainJob {
            task,
            disease: disease.clone(),
            words: Vec::new(),
            concepts: Vec::new(),
            classes: Vec::new(),
        };
        for (record, label) in pairs {
            let a = by_id
                .get(record.id.as_str())
                .ok_or_else(|| Error::Internal(format!("record `{}` was not analyzed", record.id)))?;
            let words = a.positive_tokens(&disease);
            if exclude_triggerless && words.is_empty() {
                continue;
            }
            let class = class_index.iter().position(|&l| l == label).expect("trainable label");
            job.words.push(words);
            job.concepts.push(a.concepts.clone());
            job.classes.push(class);
        }
        jobs.push(job);
    }
    Ok(jobs)
}

/// Seed for one (task, disease) model derived from the run seed.
pub fn job_seed(base: u64, task: TaskKind, disease: &str) -> u64 {
    base ^ fnv1a(format!("{}/{disease}", task.name()).as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub task: TaskKind,
    pub disease: String,
    pub model: TrainedModel,
    /// Present for the CNN only.
    pub report: Option<TrainReport>,
    pub examples: usize,
}

fn train_job(job: &TrainJob, kind: ModelKind, opts: &TrainOptions, res: &Resources, exec: Exec) -> Result<TrainOutcome> {
    let class_index: [DiseaseLabel; 2] = job.task.class_index();
    let with_context = |e: Error| match e {
        Error::EmptyTrainingSet => Error::Config(format!(
            "no training examples for disease `{}` on the {} task",
            job.disease,
            job.task.name()
        )),
        other => other,
    };
    let (model, report) = match kind {
        ModelKind::Rules => (TrainedModel::Rules, None),
        ModelKind::Kgcnn => {
            let cfg = ModelConfig {
                seed: job_seed(opts.model.seed, job.task, &job.disease),
                ..opts.model.clone()
            };
            let pairs: Vec<(KgCnnInput, usize)> = (0..job.len())
                .map(|i| (KgCnnInput::new(&job.words[i], &job.concepts[i], &cfg), job.classes[i]))
                .collect();
            let (m, r) = train(&pairs, &cfg, &res.word_embeddings, &res.cui_embeddings, class_index, exec)
                .map_err(with_context)?;
            (TrainedModel::KgCnn(m), Some(r))
        }
        ModelKind::Logreg | ModelKind::Svm => {
            let lk = if kind == ModelKind::Logreg {
                LinearKind::LogReg
            } else {
                LinearKind::LinearSvm
            };
            let pairs: Vec<(Vec<String>, usize)> = job.words.iter().cloned().zip(job.classes.iter().copied()).collect();
            let m = train_linear(lk, &pairs, class_index, &opts.linear).map_err(with_context)?;
            (TrainedModel::Linear(m), None)
        }
    };
    Ok(TrainOutcome {
        task: job.task,
        disease: job.disease.clone(),
        model,
        report,
        examples: job.len(),
    })
}

/// Trains every job; jobs run in parallel under `Exec::Parallel`, each with
/// its own derived seed, so results do not depend on scheduling.
pub fn train_models(
    jobs: &[TrainJob],
    kind: ModelKind,
    opts: &TrainOptions,
    res: &Resources,
    exec: Exec,
) -> Result<Vec<TrainOutcome>> {
    exec.map(jobs, |job| train_job(job, kind, opts, res, exec))
        .into_iter()
        .collect()
}

impl FromIterator<TrainOutcome> for ModelBank {
    fn from_iter<I: IntoIterator<Item = TrainOutcome>>(iter: I) -> Self {
        Self {
            models: iter.into_iter().map(|o| ((o.task, o.disease), o.model)).collect(),
        }
    }
}

/// Paths of the resource files the pipeline reads.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResourcePaths {
    pub lexicon: PathBuf,
    pub cues: Option<PathBuf>,
    pub dictionary: PathBuf,
    pub abbreviations: Option<PathBuf>,
    pub word_embeddings: PathBuf,
    pub cui_embeddings: PathBuf,
    /// Semantic types kept by the concept filter; the disease-related set
    /// when absent.
    pub tui_whitelist: Option<Vec<String>>,
}

impl ResourcePaths {
    pub fn load(&self) -> Result<Resources> {
        let preprocessor = match &self.abbreviations {
            Some(p) => Preprocessor::new(crate::preprocess::AbbreviationTable::load(p)?),
            None => Preprocessor::default(),
        };
        let cues = match &self.cues {
            Some(p) => CueLexicon::load(p)?,
            None => CueLexicon::default(),
        };
        let whitelist = match &self.tui_whitelist {
            Some(list) => TuiWhitelist(list.iter().cloned().collect::<BTreeSet<_>>()),
            None => TuiWhitelist::disease_related(),
        };
        Ok(Resources {
            preprocessor,
            lexicon: Lexicon::load(&self.lexicon)?,
            cues,
            dictionary: ConceptDictionary::load(&self.dictionary)?,
            whitelist,
            word_embeddings: crate::embeddings::load_word2vec_text(&self.word_embeddings)?,
            cui_embeddings: crate::embeddings::load_word2vec_text(&self.cui_embeddings)?,
        })
    }
}
