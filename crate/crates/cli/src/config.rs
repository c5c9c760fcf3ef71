//! Run configuration: one TOML file, with command-line flags layered on top.

use std::path::{Path, PathBuf};

use clap::Args;
use kgclin::baselines::LinearConfig;
use kgclin::corpus::TaskKind;
use kgclin::kgcnn::ModelConfig;
use kgclin::pipeline::{ModelKind, ResourcePaths, TrainOptions};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train_records: Option<PathBuf>,
    pub train_annotations: Vec<PathBuf>,
    pub test_records: Option<PathBuf>,
    pub test_annotations: Vec<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub cues: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
    pub word_embeddings: Option<PathBuf>,
    pub cui_embeddings: Option<PathBuf>,
    pub model_dir: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub model: ModelKind,
    pub tasks: Vec<TaskKind>,
    pub exclude_triggerless: bool,
    /// Semantic types kept by the concept filter.
    pub tui_whitelist: Option<Vec<String>>,
    pub paths: Paths,
    pub kgcnn: ModelConfig,
    pub linear: LinearConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            model: ModelKind::Kgcnn,
            tasks: TaskKind::ALL.to_vec(),
            exclude_triggerless: false,
            tui_whitelist: None,
            paths: Paths::default(),
            kgcnn: ModelConfig::default(),
            linear: LinearConfig::default(),
        }
    }
}

/// Flags shared by the pipeline commands. Each one overrides the matching
/// config entry.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Run configuration file (TOML). Relative paths inside it resolve
    /// against its directory.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// kgcnn, logreg, svm or rules.
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// Restrict to one task; repeatable.
    #[arg(long = "task")]
    pub tasks: Vec<TaskKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub filters: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub max_words: Option<usize>,
    /// Train the CNN with an empty concept channel.
    #[arg(long)]
    pub no_concepts: bool,
    #[arg(long)]
    pub train_records: Option<PathBuf>,
    #[arg(long)]
    pub train_annotations: Vec<PathBuf>,
    #[arg(long)]
    pub test_records: Option<PathBuf>,
    #[arg(long)]
    pub test_annotations: Vec<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub cues: Option<PathBuf>,
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    #[arg(long)]
    pub abbreviations: Option<PathBuf>,
    #[arg(long)]
    pub word_embeddings: Option<PathBuf>,
    #[arg(long)]
    pub cui_embeddings: Option<PathBuf>,
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1);
            CliError::Core(kgclin::Error::Format {
                path: origin.to_string(),
                line,
                message: e.message().to_string(),
            })
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::MissingPath(path.to_path_buf()),
            _ => CliError::Core(kgclin::Error::Io {
                path: path.to_path_buf(),
                source: e,
            }),
        })?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.paths.rebase(base);
        Ok(cfg)
    }

    /// Config file (if any) with flags applied.
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(s) = args.seed {
            cfg.seed = Some(s);
        }
        if let Some(m) = args.model {
            cfg.model = m;
        }
        if !args.tasks.is_empty() {
            cfg.tasks = args.tasks.clone();
        }
        let k = &mut cfg.kgcnn;
        k.epochs = args.epochs.unwrap_or(k.epochs);
        k.filters = args.filters.unwrap_or(k.filters);
        k.hidden = args.hidden.unwrap_or(k.hidden);
        k.max_words = args.max_words.unwrap_or(k.max_words);
        if args.no_concepts {
            k.use_concepts = false;
        }
        if let Some(s) = cfg.seed {
            k.seed = s;
        }

        let p = &mut cfg.paths;
        let set = |slot: &mut Option<PathBuf>, flag: &Option<PathBuf>| {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        };
        set(&mut p.train_records, &args.train_records);
        set(&mut p.test_records, &args.test_records);
        set(&mut p.lexicon, &args.lexicon);
        set(&mut p.cues, &args.cues);
        set(&mut p.dictionary, &args.dictionary);
        set(&mut p.abbreviations, &args.abbreviations);
        set(&mut p.word_embeddings, &args.word_embeddings);
        set(&mut p.cui_embeddings, &args.cui_embeddings);
        set(&mut p.model_dir, &args.model_dir);
        set(&mut p.report_dir, &args.report_dir);
        if !args.train_annotations.is_empty() {
            p.train_annotations = args.train_annotations.clone();
        }
        if !args.test_annotations.is_empty() {
            p.test_annotations = args.test_annotations.clone();
        }

        cfg.kgcnn.validate()?;
        cfg.linear.validate()?;
        if cfg.tasks.is_empty() {
            return Err(CliError::Usage("no task selected".into()));
        }
        Ok(cfg)
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            model: self.kgcnn.clone(),
            linear: self.linear.clone(),
            exclude_triggerless: self.exclude_triggerless,
        }
    }

    pub fn resource_paths(&self) -> Result<ResourcePaths> {
        let p = &self.paths;
        Ok(ResourcePaths {
            lexicon: existing("paths.lexicon", &p.lexicon)?,
            cues: optional_existing(&p.cues)?,
            dictionary: existing("paths.dictionary", &p.dictionary)?,
            abbreviations: optional_existing(&p.abbreviations)?,
            word_embeddings: existing("paths.word_embeddings", &p.word_embeddings)?,
            cui_embeddings: existing("paths.cui_embeddings", &p.cui_embeddings)?,
            tui_whitelist: self.tui_whitelist.clone(),
        })
    }

    pub fn model_dir(&self) -> Result<PathBuf> {
        required("paths.model_dir", &self.paths.model_dir)
    }

    pub fn report_dir(&self) -> Result<PathBuf> {
        required("paths.report_dir", &self.paths.report_dir)
    }
}

impl Paths {
    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.train_records,
            &mut self.test_records,
            &mut self.lexicon,
            &mut self.cues,
            &mut self.dictionary,
            &mut self.abbreviations,
            &mut self.word_embeddings,
            &mut self.cui_embeddings,
            &mut self.model_dir,
            &mut self.report_dir,
        ].into_iter().flatten() {
            join(p);
        }
        self.train_annotations.iter_mut().for_each(join);
        self.test_annotations.iter_mut().for_each(join);
    }
}

pub fn required(name: &str, slot: &Option<PathBuf>) -> Result<PathBuf> {
    slot.clone()
        .ok_or_else(|| CliError::Usage(format!("`{name}` is not set in the config or on the command line")))
}

pub fn must_exist(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingPath(path.to_path_buf()))
    }
}

pub fn existing(name: &str, slot: &Option<PathBuf>) -> Result<PathBuf> {
    let p = required(name, slot)?;
    must_exist(&p)?;
    Ok(p)
}

fn optional_existing(slot: &Option<PathBuf>) -> Result<Option<PathBuf>> {
    if let Some(p) = slot {
        must_exist(p)?;
    }
    Ok(slot.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "seed = 3\nmodel = \"svm\"\n[paths]\nlexicon = \"lex.tsv\"\n[kgcnn]\nepochs = 4\n",
        )
        .unwrap();
        let args = RunArgs {
            config: Some(path),
            seed: Some(9),
            epochs: Some(2),
            ..RunArgs::default()
        };
        let cfg = RunConfig::resolve(&args).unwrap();
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.kgcnn.seed, 9);
        assert_eq!(cfg.kgcnn.epochs, 2);
        assert_eq!(cfg.model, ModelKind::Svm);
        assert_eq!(cfg.paths.lexicon, Some(dir.path().join("lex.tsv")));
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let err = RunConfig::parse("seed = 1\nbogus = 2\n", "run.toml").unwrap_err();
        assert!(err.to_string().contains("run.toml:2"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig {
            seed: Some(4),
            paths: Paths {
                lexicon: Some("a.tsv".into()),
                train_annotations: vec!["t.xml".into()],
                ..Paths::default()
            },
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::parse(&cfg.to_toml(), "mem").unwrap(), cfg);
    }
}
