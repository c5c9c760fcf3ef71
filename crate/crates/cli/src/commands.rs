use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use kgclin::cascade::{classify_all, load_predictions, prediction_table, save_predictions, Prediction};
use kgclin::corpus::{parse_annotations_xml, parse_records_xml, read_jsonl_corpus, AnnotationSet, ClinicalRecord, TaskKind};
use kgclin::eval::{paired_t_test, EvalReport, TTest};
use kgclin::exec::Exec;
use kgclin::pipeline::{train_models, training_jobs, ModelBank, ModelKind, Resources};
use kgclin::synthgen::{generate, SynthSpec};
use kgclin::trigger::TriggerPhrase;
use serde::Serialize;

use crate::config::{must_exist, required, Paths, RunArgs, RunConfig};
use crate::error::{CliError, Result};

pub const RUN_CONFIG: &str = "run.toml";
pub const SPEC_FILE: &str = "spec.toml";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const RULES_PREDICTIONS: &str = "predictions_rules.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const RULES_REPORT_JSON: &str = "report_rules.json";
pub const LOSS_DIR: &str = "losses";
pub const TRAIN_SUMMARY: &str = "train_summary.json";

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(kgclin::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    must_exist(path)?;
    fs::read(path).map_err(|e| io_err(path, e))
}

pub struct GenArgs {
    pub spec: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub records: usize,
    pub test_records: usize,
}

/// Writes a synthetic corpus plus a `run.toml` pointing at it.
pub fn gen(args: &GenArgs, out: &mut dyn Write) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => {
            must_exist(p)?;
            SynthSpec::load(p)?
        }
        None => SynthSpec::challenge_like(args.seed.unwrap_or(7), args.records, args.test_records),
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    let corpus = generate(&spec)?;
    let mut written = corpus.write_to(&args.out)?;

    let spec_path = args.out.join(SPEC_FILE);
    write_file(&spec_path, spec.to_toml())?;
    written.push(spec_path);

    let files = kgclin::synthgen::SynthCorpus::resource_paths(Path::new(""));
    let rel = |p: &Path| Some(p.to_path_buf());
    let cfg = RunConfig {
        seed: Some(spec.seed),
        paths: Paths {
            train_records: Some(kgclin::synthgen::files::TRAIN_RECORDS.into()),
            train_annotations: vec![kgclin::synthgen::files::TRAIN_ANNOTATIONS.into()],
            test_records: Some(kgclin::synthgen::files::TEST_RECORDS.into()),
            test_annotations: vec![kgclin::synthgen::files::TEST_ANNOTATIONS.into()],
            lexicon: rel(&files.lexicon),
            cues: files.cues.clone(),
            dictionary: rel(&files.dictionary),
            abbreviations: files.abbreviations.clone(),
            word_embeddings: rel(&files.word_embeddings),
            cui_embeddings: rel(&files.cui_embeddings),
            model_dir: Some("models".into()),
            report_dir: Some("reports".into()),
        },
        tui_whitelist: files.tui_whitelist.clone(),
        ..RunConfig::default()
    };
    let cfg_path = args.out.join(RUN_CONFIG);
    write_file(&cfg_path, cfg.to_toml())?;
    written.push(cfg_path);

    for p in written {
        writeln!(out, "{}", p.display()).map_err(|e| io_err(&p, e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    Train,
    Test,
}

struct Corpus {
    records: Vec<ClinicalRecord>,
    gold: Vec<AnnotationSet>,
}

fn load_corpus(cfg: &RunConfig, split: Split, with_gold: bool) -> Result<Corpus> {
    let (records_slot, annotation_paths, prefix) = match split {
        Split::Train => (&cfg.paths.train_records, &cfg.paths.train_annotations, "train"),
        Split::Test => (&cfg.paths.test_records, &cfg.paths.test_annotations, "test"),
    };
    let records_path = required(&format!("paths.{prefix}_records"), records_slot)?;
    must_exist(&records_path)?;
    let jsonl = records_path.extension().is_some_and(|e| e == "jsonl");

    if jsonl {
        let mut records = None;
        let mut gold = Vec::new();
        for &task in &cfg.tasks {
            let (r, a) = read_jsonl_corpus(&records_path, task)?;
            records.get_or_insert(r);
            gold.push(a);
        }
        return Ok(Corpus {
            records: records.unwrap_or_default(),
            gold: if with_gold { gold } else { Vec::new() },
        });
    }

    let records = parse_records_xml(&read_file(&records_path)?)?;
    let mut gold = Vec::new();
    if with_gold {
        if annotation_paths.is_empty() {
            return Err(CliError::Usage(format!(
                "`paths.{prefix}_annotations` is not set in the config or on the command line"
            )));
        }
        let blobs: Vec<(PathBuf, Vec<u8>)> = annotation_paths
            .iter()
            .map(|p| Ok((p.clone(), read_file(p)?)))
            .collect::<Result<_>>()?;
        for &task in &cfg.tasks {
            let mut set = AnnotationSet::new(task);
            for (_, bytes) in &blobs {
                for (disease, id, label) in parse_annotations_xml(bytes, task)?.iter() {
                    set.insert(disease, id, label)?;
                }
            }
            set.validate_against(&records)?;
            gold.push(set);
        }
    }
    Ok(Corpus { records, gold })
}

#[derive(Serialize)]
struct TriggerRow<'a> {
    id: &'a str,
    #[serde(flatten)]
    trigger: &'a TriggerPhrase,
}

pub fn triggers(args: &RunArgs, split: Split, dest: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::resolve(args)?;
    let res = cfg.resource_paths()?.load()?;
    let corpus = load_corpus(&cfg, split, false)?;
    let analyses = res.analyze_all(&corpus.records, Exec::Parallel)?;
    let mut buf = Vec::new();
    for a in &analyses {
        for t in &a.triggers {
            serde_json::to_writer(&mut buf, &TriggerRow { id: &a.id, trigger: t })
                .map_err(|e| kgclin::Error::Internal(e.to_string()))?;
            buf.push(b'\n');
        }
    }
    match dest {
        Some(p) => write_file(p, buf),
        None => out.write_all(&buf).map_err(|e| io_err(Path::new("<stdout>"), e)),
    }
}

#[derive(Serialize)]
struct TrainSummaryRow {
    task: TaskKind,
    disease: String,
    model: ModelKind,
    examples: usize,
    final_loss: Option<f64>,
    single_class: bool,
}

pub fn train(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::resolve(args)?;
    if cfg.model == ModelKind::Rules {
        return Err(CliError::Usage(
            "the rules model has no parameters to train; pass `--model rules` to classify instead".into(),
        ));
    }
    let model_dir = cfg.model_dir()?;
    let res = cfg.resource_paths()?.load()?;
    let corpus = load_corpus(&cfg, Split::Train, true)?;
    let analyses = res.analyze_all(&corpus.records, Exec::Parallel)?;
    let mut jobs = Vec::new();
    for set in &corpus.gold {
        jobs.extend(training_jobs(&corpus.records, &analyses, set, cfg.exclude_triggerless)?);
    }
    let outcomes = train_models(&jobs, cfg.model, &cfg.train_options(), &res, Exec::Parallel)?;

    let mut summary = Vec::new();
    for o in &outcomes {
        let name = ModelBank::file_name(o.task, &o.disease).replace(".model", ".tsv");
        if let Some(r) = &o.report {
            let mut log = String::from("epoch\tloss\n");
            for (i, l) in r.epoch_losses.iter().enumerate() {
                log.push_str(&format!("{}\t{l}\n", i + 1));
            }
            write_file(&model_dir.join(LOSS_DIR).join(&name), log)?;
        }
        summary.push(TrainSummaryRow {
            task: o.task,
            disease: o.disease.clone(),
            model: cfg.model,
            examples: o.examples,
            final_loss: o.report.as_ref().and_then(|r| r.epoch_losses.last().copied()),
            single_class: o.report.as_ref().is_some_and(|r| r.single_class),
        });
        writeln!(out, "trained {} / {} on {} examples", o.task.name(), o.disease, o.examples)
            .map_err(|e| io_err(Path::new("<stdout>"), e))?;
    }
    let bank: ModelBank = outcomes.into_iter().collect();
    bank.save_dir(&model_dir)?;
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&model_dir.join(TRAIN_SUMMARY), json + "\n")
}

fn load_bank(cfg: &RunConfig, res: &Resources) -> Result<ModelBank> {
    if cfg.model == ModelKind::Rules {
        return Ok(ModelBank::rules_only(&res.lexicon));
    }
    let dir = cfg.model_dir()?;
    must_exist(&dir.join("index.json"))?;
    Ok(ModelBank::load_dir(&dir)?)
}

/// Writes the model's predictions and, unless the model already is the rule
/// set, the rules-only ablation next to them.
pub fn classify(args: &RunArgs, dest: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::resolve(args)?;
    let res = cfg.resource_paths()?.load()?;
    let bank = load_bank(&cfg, &res)?;
    let corpus = load_corpus(&cfg, Split::Test, false)?;
    let analyses = res.analyze_all(&corpus.records, Exec::Parallel)?;

    let path = match dest {
        Some(p) => p.to_path_buf(),
        None => cfg.report_dir()?.join(PREDICTIONS),
    };
    let preds = classify_all(&analyses, &cfg.tasks, &bank, &res, Exec::Parallel)?;
    if preds.is_empty() {
        return Err(CliError::Core(kgclin::Error::Config(
            "no model in the bank matches the selected tasks".into(),
        )));
    }
    write_predictions(&preds, &path)?;
    writeln!(out, "{}", path.display()).map_err(|e| io_err(&path, e))?;

    if cfg.model != ModelKind::Rules {
        let rules = ModelBank::rules_only(&res.lexicon);
        let ablation = classify_all(&analyses, &cfg.tasks, &rules, &res, Exec::Parallel)?;
        let rules_path = path.with_file_name(RULES_PREDICTIONS);
        write_predictions(&ablation, &rules_path)?;
        writeln!(out, "{}", rules_path.display()).map_err(|e| io_err(&rules_path, e))?;
    }
    Ok(())
}

fn write_predictions(preds: &[Prediction], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    Ok(save_predictions(preds, path)?)
}

pub fn evaluate(args: &RunArgs, predictions: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::resolve(args)?;
    let report_dir = cfg.report_dir()?;
    let pred_path = predictions.map_or_else(|| report_dir.join(PREDICTIONS), Path::to_path_buf);
    must_exist(&pred_path)?;
    let corpus = load_corpus(&cfg, Split::Test, true)?;
    let gold: Vec<&AnnotationSet> = corpus.gold.iter().collect();

    let report = EvalReport::build(&prediction_table(&load_predictions(&pred_path)?), &gold)?;
    write_file(&report_dir.join(REPORT_JSON), report.to_json() + "\n")?;
    let mut text = report.to_table();

    let rules_path = pred_path.with_file_name(RULES_PREDICTIONS);
    if rules_path != pred_path && rules_path.exists() {
        let ablation = EvalReport::build(&prediction_table(&load_predictions(&rules_path)?), &gold)?;
        write_file(&report_dir.join(RULES_REPORT_JSON), ablation.to_json() + "\n")?;
        text.push_str("\nRules-only ablation\n");
        text.push_str(&ablation.to_table());
    }
    write_file(&report_dir.join(REPORT_TXT), &text)?;
    out.write_all(text.as_bytes()).map_err(|e| io_err(Path::new("<stdout>"), e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Metric {
    Macro,
    Micro,
}

#[derive(Debug, Serialize)]
pub struct TTestOutput {
    pub task: TaskKind,
    pub metric: &'static str,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub mean_a: f64,
    pub mean_b: f64,
    #[serde(flatten)]
    pub test: TTest,
}

fn overall_score(path: &Path, task: TaskKind, metric: Metric) -> Result<f64> {
    let text = String::from_utf8(read_file(path)?)
        .map_err(|e| kgclin::Error::Format {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
    let report = EvalReport::from_json(&text, &path.display().to_string())?;
    let o = report.overall_for(task).ok_or_else(|| kgclin::Error::Format {
        path: path.display().to_string(),
        line: 0,
        message: format!("report has no {} scores", task.name()),
    })?;
    Ok(match metric {
        Metric::Macro => o.macro_f1,
        Metric::Micro => o.micro_f1,
    })
}

pub fn ttest(a: &[PathBuf], b: &[PathBuf], task: TaskKind, metric: Metric, out: &mut dyn Write) -> Result<()> {
    if a.len() < 2 || a.len() != b.len() {
        return Err(CliError::Usage(format!(
            "need the same number (at least 2) of reports per side, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let xs: Vec<f64> = a.iter().map(|p| overall_score(p, task, metric)).collect::<Result<_>>()?;
    let ys: Vec<f64> = b.iter().map(|p| overall_score(p, task, metric)).collect::<Result<_>>()?;
    let test = paired_t_test(&xs, &ys)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let result = TTestOutput {
        task,
        metric: match metric {
            Metric::Macro => "macro_f1",
            Metric::Micro => "micro_f1",
        },
        mean_a: mean(&xs),
        mean_b: mean(&ys),
        a: xs,
        b: ys,
        test,
    };
    let json = serde_json::to_string_pretty(&result).expect("t-test output serializes");
    writeln!(out, "{json}").map_err(|e| io_err(Path::new("<stdout>"), e))
}
