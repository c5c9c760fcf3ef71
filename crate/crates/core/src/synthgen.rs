//! Seeded generator of small corpora whose labels are recoverable by
//! construction, together with every resource file the pipeline reads.
//!
//! Per record and disease:
//! - textual Y: a positive alias mention;
//! - textual N: a negation cue shortly before the alias;
//! - textual Q: an uncertainty cue shortly before the alias;
//! - textual U: no mention.
//!
//! Intuitive labels copy Y/N/Q. Textual-U records become intuitive Y when
//! they carry one of the disease's evidence concepts and N otherwise; every
//! intuitive-Y record carries evidence. Filler is made of pseudo-words that
//! collide with no alias, cue, keyword or concept name.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{annotations_to_xml, records_to_xml, AnnotationSet, ClinicalRecord, DiseaseLabel, TaskKind};
use crate::embeddings::{save_word2vec_text, EmbeddingTable};
use crate::error::{Error, Result};
use crate::linker::{ConceptDictionary, ConceptEntry, TuiWhitelist};
use crate::pipeline::{ResourcePaths, Resources};
use crate::preprocess::{tokenize, AbbreviationTable, Preprocessor, DEFAULT_FAMILY_KEYWORDS};
use crate::trigger::{CueLexicon, DiseaseLexicon, Lexicon};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDisease {
    pub name: String,
    pub aliases: Vec<String>,
    /// Upper-case short form that expands to the first alias.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abbreviation: Option<String>,
}

/// Label proportions for one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassMix {
    #[serde(rename = "Y", default)]
    pub y: f64,
    #[serde(rename = "N", default)]
    pub n: f64,
    #[serde(rename = "Q", default)]
    pub q: f64,
    #[serde(rename = "U", default)]
    pub u: f64,
}

impl ClassMix {
    pub fn get(&self, label: DiseaseLabel) -> f64 {
        match label {
            DiseaseLabel::Y => self.y,
            DiseaseLabel::N => self.n,
            DiseaseLabel::Q => self.q,
            DiseaseLabel::U => self.u,
        }
    }

    /// Training-set proportions of the obesity challenge.
    pub fn challenge_textual() -> Self {
        let t = 3208.0 + 87.0 + 39.0 + 8296.0;
        Self {
            y: 3208.0 / t,
            n: 87.0 / t,
            q: 39.0 / t,
            u: 8296.0 / t,
        }
    }

    pub fn challenge_intuitive() -> Self {
        let t = 3267.0 + 7362.0 + 26.0;
        Self {
            y: 3267.0 / t,
            n: 7362.0 / t,
            q: 26.0 / t,
            u: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMixes {
    pub textual: ClassMix,
    pub intuitive: ClassMix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Distinct filler pseudo-words.
    pub vocab_size: usize,
    pub tokens_per_record: usize,
    /// Share of filler tokens replaced by label-independent concept names.
    pub noise_rate: f64,
    /// Share of the filler vocabulary left out of the word-vector file.
    pub oov_rate: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            vocab_size: 300,
            tokens_per_record: 40,
            noise_rate: 0.0,
            oov_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_records: usize,
    #[serde(default)]
    pub n_test_records: usize,
    pub diseases: Vec<SynthDisease>,
    pub class_mix: ClassMixes,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub family_history_rate: f64,
    #[serde(default)]
    pub abbreviation_rate: f64,
    #[serde(default = "default_dim")]
    pub word_dim: usize,
    #[serde(default = "default_cui_dim")]
    pub cui_dim: usize,
    #[serde(default = "default_evidence")]
    pub evidence_per_disease: usize,
    /// Also add a disease concept named by the aliases, so every mention
    /// (negated ones included) links a concept.
    #[serde(default)]
    pub disease_concepts: bool,
    #[serde(default)]
    pub cues: CueLexicon,
}

fn default_dim() -> usize {
    32
}

fn default_cui_dim() -> usize {
    64
}

fn default_evidence() -> usize {
    1
}

impl SynthSpec {
    pub fn parse_toml(text: &str, origin: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1);
            Error::format(origin, line, e.message().to_string())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    /// Four diseases with the challenge's label skew.
    pub fn challenge_like(seed: u64, n_records: usize, n_test_records: usize) -> Self {
        let d = |name: &str, aliases: &[&str], abbr: Option<&str>| SynthDisease {
            name: name.into(),
            aliases: aliases.iter().map(|s| s.to_string()).collect(),
            abbreviation: abbr.map(str::to_string),
        };
        Self {
            seed,
            n_records,
            n_test_records,
            diseases: vec![
                d("Asthma", &["asthma", "reactive airway disease"], None),
                d("CHF", &["congestive heart failure", "heart failure"], Some("CHF")),
                d("Diabetes", &["diabetes mellitus", "diabetes"], Some("DM")),
                d("Gout", &["gout", "gouty arthritis"], None),
            ],
            class_mix: ClassMixes {
                textual: ClassMix::challenge_textual(),
                intuitive: ClassMix::challenge_intuitive(),
            },
            noise: NoiseSpec::default(),
            family_history_rate: 0.2,
            abbreviation_rate: 0.3,
            word_dim: default_dim(),
            cui_dim: default_cui_dim(),
            evidence_per_disease: default_evidence(),
            disease_concepts: false,
            cues: CueLexicon::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_records == 0 {
            return bad("n_records must be positive".into());
        }
        if self.diseases.is_empty() {
            return bad("at least one disease is required".into());
        }
        let mut names = BTreeSet::new();
        for d in &self.diseases {
            if !names.insert(d.name.as_str()) {
                return bad(format!("disease `{}` listed twice", d.name));
            }
            if d.aliases.iter().all(|a| tokenize(a).is_empty()) {
                return bad(format!("disease `{}` has no usable alias", d.name));
            }
            if let Some(a) = &d.abbreviation {
                if a.is_empty() || !a.chars().all(|c| c.is_ascii_uppercase()) {
                    return bad(format!("abbreviation `{a}` must be upper-case letters"));
                }
            }
        }
        for (task, mix) in [
            (TaskKind::Textual, &self.class_mix.textual),
            (TaskKind::Intuitive, &self.class_mix.intuitive),
        ] {
            let values = DiseaseLabel::ALL.map(|l| mix.get(l));
            if values.iter().any(|v| !(*v >= 0.0)) {
                return bad(format!("{} mix has a negative share", task.name()));
            }
            if (values.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("{} mix does not sum to 1", task.name()));
            }
        }
        if self.class_mix.intuitive.u != 0.0 {
            return bad("intuitive mix must assign 0 to U".into());
        }
        let mix = &self.class_mix.textual;
        if mix.n > 0.0 && self.cues.negation.is_empty() {
            return bad("N share requires at least one negation cue".into());
        }
        if mix.q > 0.0 && self.cues.uncertainty.is_empty() {
            return bad("Q share requires at least one uncertainty cue".into());
        }
        if self.class_mix.intuitive.q > 0.0 && mix.q == 0.0 {
            return bad("intuitive Q share requires a textual Q share (Q comes from uncertain mentions)".into());
        }
        for (name, r) in [
            ("noise_rate", self.noise.noise_rate),
            ("oov_rate", self.noise.oov_rate),
            ("family_history_rate", self.family_history_rate),
            ("abbreviation_rate", self.abbreviation_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.noise.vocab_size < 10 {
            return bad("noise.vocab_size must be at least 10".into());
        }
        if self.word_dim == 0 || self.cui_dim == 0 {
            return bad("embedding dimensions must be positive".into());
        }
        if self.evidence_per_disease == 0 {
            return bad("evidence_per_disease must be at least 1".into());
        }
        self.cues.validate()
    }
}

/// Exact counts summing to `n`: floors plus the largest remainders, ties in
/// label order.
pub fn allocate(mix: &ClassMix, n: usize) -> [usize; 4] {
    let raw = DiseaseLabel::ALL.map(|l| mix.get(l) * n as f64);
    let mut counts = raw.map(|r| r.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (raw[a] - raw[a].floor(), raw[b] - raw[b].floor());
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSplit {
    pub records: Vec<ClinicalRecord>,
    pub textual: AnnotationSet,
    pub intuitive: AnnotationSet,
}

impl SynthSplit {
    pub fn annotations(&self, task: TaskKind) -> &AnnotationSet {
        match task {
            TaskKind::Textual => &self.textual,
            TaskKind::Intuitive => &self.intuitive,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub train: SynthSplit,
    pub test: SynthSplit,
    pub lexicon: Lexicon,
    pub cues: CueLexicon,
    pub dictionary: ConceptDictionary,
    pub abbreviations: AbbreviationTable,
    pub word_embeddings: EmbeddingTable,
    pub cui_embeddings: EmbeddingTable,
    /// Evidence concept identifiers per disease.
    pub evidence: BTreeMap<String, Vec<String>>,
}

/// File names written by [`SynthCorpus::write_to`].
pub mod files {
    pub const TRAIN_RECORDS: &str = "train_records.xml";
    pub const TRAIN_ANNOTATIONS: &str = "train_annotations.xml";
    pub const TEST_RECORDS: &str = "test_records.xml";
    pub const TEST_ANNOTATIONS: &str = "test_annotations.xml";
    pub const LEXICON: &str = "lexicon.tsv";
    pub const CUES: &str = "cues.txt";
    pub const CONCEPTS: &str = "concepts.tsv";
    pub const ABBREVIATIONS: &str = "abbreviations.tsv";
    pub const WORD_VECTORS: &str = "word_vectors.txt";
    pub const CUI_VECTORS: &str = "cui_vectors.txt";
}

impl SynthCorpus {
    pub fn resources(&self) -> Resources {
        Resources {
            preprocessor: Preprocessor::new(self.abbreviations.clone()),
            lexicon: self.lexicon.clone(),
            cues: self.cues.clone(),
            dictionary: self.dictionary.clone(),
            whitelist: TuiWhitelist::disease_related(),
            word_embeddings: self.word_embeddings.clone(),
            cui_embeddings: self.cui_embeddings.clone(),
        }
    }

    pub fn resource_paths(dir: &Path) -> ResourcePaths {
        ResourcePaths {
            lexicon: dir.join(files::LEXICON),
            cues: Some(dir.join(files::CUES)),
            dictionary: dir.join(files::CONCEPTS),
            abbreviations: Some(dir.join(files::ABBREVIATIONS)),
            word_embeddings: dir.join(files::WORD_VECTORS),
            cui_embeddings: dir.join(files::CUI_VECTORS),
            tui_whitelist: None,
        }
    }

    /// Writes every output file into `dir` and returns their paths.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: &str, content: String| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        put(files::TRAIN_RECORDS, records_to_xml(&self.train.records))?;
        put(
            files::TRAIN_ANNOTATIONS,
            annotations_to_xml(&[&self.train.textual, &self.train.intuitive]),
        )?;
        put(files::TEST_RECORDS, records_to_xml(&self.test.records))?;
        put(
            files::TEST_ANNOTATIONS,
            annotations_to_xml(&[&self.test.textual, &self.test.intuitive]),
        )?;
        put(files::LEXICON, self.lexicon.to_tsv())?;
        put(files::CUES, self.cues.to_text())?;
        put(files::CONCEPTS, self.dictionary.to_tsv())?;
        put(files::ABBREVIATIONS, self.abbreviations.to_tsv())?;
        for (name, table) in [
            (files::WORD_VECTORS, &self.word_embeddings),
            (files::CUI_VECTORS, &self.cui_embeddings),
        ] {
            let path = dir.join(name);
            save_word2vec_text(table, &path)?;
            written.push(path);
        }
        Ok(written)
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Semantic types outside the disease-related whitelist.
const DECOY_TUIS: [&str; 4] = ["T071", "T080", "T081", "T170"];
const EVIDENCE_TUIS: [&str; 3] = ["T121", "T033", "T184"];
const DECOY_CONCEPTS: usize = 12;
const GENERIC_CONCEPTS: usize = 12;

struct WordMaker {
    used: BTreeSet<String>,
}

impl WordMaker {
    fn fresh(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let syllables = rng.gen_range(3..=4);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
                w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

/// Each value `k / 10⁶` prints and parses back to the same double.
fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-500_000i64..=500_000) as f64 / 1e6).collect()
}

struct Plan<'a> {
    spec: &'a SynthSpec,
    aliases: Vec<Vec<String>>,
    filler: Vec<String>,
    evidence_names: Vec<Vec<String>>,
    noise_names: Vec<String>,
}

impl Plan<'_> {
    fn filler_sentence<R>(&self, rng: &mut ChaCha8Rng, len: R) -> Vec<String>
    where
        R: rand::distributions::uniform::SampleRange<usize>,
    {
        let len = rng.gen_range(len);
        (0..len)
            .map(|_| {
                if rng.gen_bool(self.spec.noise.noise_rate) {
                    self.noise_names[rng.gen_range(0..self.noise_names.len())].clone()
                } else {
                    self.filler[rng.gen_range(0..self.filler.len())].clone()
                }
            })
            .collect()
    }

    fn alias_surface(&self, rng: &mut ChaCha8Rng, d: usize) -> String {
        let disease = &self.spec.diseases[d];
        if let Some(abbr) = &disease.abbreviation {
            if rng.gen_bool(self.spec.abbreviation_rate) {
                return abbr.clone();
            }
        }
        self.aliases[d][rng.gen_range(0..self.aliases[d].len())].clone()
    }

    fn mention(&self, rng: &mut ChaCha8Rng, d: usize, cue: Option<&[String]>) -> String {
        let mut words = self.filler_sentence(rng, 0..4);
        if let Some(cue) = cue {
            words.extend(cue.iter().cloned());
            let gap = rng.gen_range(0..=1);
            words.extend(self.filler_sentence(rng, gap..=gap));
        }
        words.push(self.alias_surface(rng, d));
        words.extend(self.filler_sentence(rng, 0..3));
        words.join(" ")
    }

    fn record_text(&self, rng: &mut ChaCha8Rng, labels: &[(DiseaseLabel, DiseaseLabel)]) -> String {
        let cues = &self.spec.cues;
        let mut sentences: Vec<String> = Vec::new();
        let mut remaining = self.spec.noise.tokens_per_record;
        while remaining > 0 {
            let len = rng.gen_range(4..=10).min(remaining);
            sentences.push(self.filler_sentence(rng, len..=len).join(" "));
            remaining -= len;
        }
        for (d, &(textual, intuitive)) in labels.iter().enumerate() {
            match textual {
                DiseaseLabel::Y => {
                    for _ in 0..rng.gen_range(1..=2) {
                        sentences.push(self.mention(rng, d, None));
                    }
                }
                DiseaseLabel::N => {
                    let cue = &cues.negation[rng.gen_range(0..cues.negation.len())];
                    sentences.push(self.mention(rng, d, Some(cue)));
                }
                DiseaseLabel::Q => {
                    let cue = &cues.uncertainty[rng.gen_range(0..cues.uncertainty.len())];
                    sentences.push(self.mention(rng, d, Some(cue)));
                }
                DiseaseLabel::U => {}
            }
            if intuitive == DiseaseLabel::Y {
                let names = &self.evidence_names[d];
                let k = rng.gen_range(1..=names.len().min(2));
                for name in names.choose_multiple(rng, k) {
                    let mut words = self.filler_sentence(rng, 1..4);
                    words.push(name.clone());
                    words.extend(self.filler_sentence(rng, 0..3));
                    sentences.push(words.join(" "));
                }
            }
        }
        sentences.shuffle(rng);

        let mut text = String::from("HISTORY OF PRESENT ILLNESS:\n");
        text.push_str(&sentences.join(". "));
        text.push_str(".\n");
        if rng.gen_bool(self.spec.family_history_rate) {
            let relative = DEFAULT_FAMILY_KEYWORDS[rng.gen_range(0..DEFAULT_FAMILY_KEYWORDS.len() - 1)];
            let d = rng.gen_range(0..self.spec.diseases.len());
            let alias = self.alias_surface(rng, d);
            text.push_str(&format!("\nFAMILY HISTORY: {relative} with {alias}.\n"));
        }
        let closing = self.filler_sentence(rng, 5..=5).join(" ");
        text.push_str(&format!("\nSOCIAL HISTORY: {closing}.\n"));
        text
    }

    fn split(&self, rng: &mut ChaCha8Rng, prefix: &str, n: usize) -> Result<SynthSplit> {
        let spec = self.spec;
        let t_counts = allocate(&spec.class_mix.textual, n);
        let i_counts = allocate(&spec.class_mix.intuitive, n);
        let u_to_y = i_counts[0].saturating_sub(t_counts[0]).min(t_counts[3]);

        // labels[record][disease] = (textual, intuitive)
        let mut labels = vec![Vec::with_capacity(spec.diseases.len()); n];
        for _ in &spec.diseases {
            let mut textual: Vec<DiseaseLabel> = DiseaseLabel::ALL
                .iter()
                .zip(t_counts)
                .flat_map(|(&l, c)| std::iter::repeat_n(l, c))
                .collect();
            textual.shuffle(rng);
            let mut u_idx: Vec<usize> = (0..n).filter(|&i| textual[i] == DiseaseLabel::U).collect();
            u_idx.shuffle(rng);
            let promoted: BTreeSet<usize> = u_idx.into_iter().take(u_to_y).collect();
            for (i, &t) in textual.iter().enumerate() {
                let intuitive = match t {
                    DiseaseLabel::U if promoted.contains(&i) => DiseaseLabel::Y,
                    DiseaseLabel::U => DiseaseLabel::N,
                    other => other,
                };
                labels[i].push((t, intuitive));
            }
        }

        let width = n.to_string().len().max(4);
        let mut records = Vec::with_capacity(n);
        let mut textual = AnnotationSet::new(TaskKind::Textual);
        let mut intuitive = AnnotationSet::new(TaskKind::Intuitive);
        for (i, row) in labels.iter().enumerate() {
            let id = format!("{prefix}{i:0width$}");
            records.push(ClinicalRecord::new(&id, self.record_text(rng, row)));
            for (d, &(t, u)) in row.iter().enumerate() {
                textual.insert(&spec.diseases[d].name, &id, t)?;
                intuitive.insert(&spec.diseases[d].name, &id, u)?;
            }
        }
        Ok(SynthSplit {
            records,
            textual,
            intuitive,
        })
    }
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let lexicon = Lexicon::new(
        spec.diseases
            .iter()
            .map(|d| DiseaseLexicon::new(&d.name, &d.aliases))
            .collect::<Result<_>>()?,
    )?;
    let aliases: Vec<Vec<String>> = lexicon
        .entries()
        .iter()
        .map(|e| e.aliases.iter().map(|a| a.join(" ")).collect())
        .collect();
    let abbreviations = AbbreviationTable::new(
        spec.diseases
            .iter()
            .zip(&aliases)
            .filter_map(|(d, a)| d.abbreviation.clone().map(|abbr| (abbr, a[0].clone()))),
    )?;

    // Every word that already means something is off limits for filler.
    let mut reserved: BTreeSet<String> = BTreeSet::new();
    reserved.extend(aliases.iter().flatten().flat_map(|a| a.split(' ').map(str::to_string)));
    reserved.extend(spec.cues.negation.iter().chain(&spec.cues.uncertainty).flatten().cloned());
    reserved.extend(DEFAULT_FAMILY_KEYWORDS.iter().map(|s| s.to_string()));
    reserved.extend(spec.diseases.iter().filter_map(|d| d.abbreviation.as_ref().map(|a| a.to_lowercase())));
    for header in ["history of present illness", "family history", "social history", "with"] {
        reserved.extend(header.split(' ').map(str::to_string));
    }
    let mut maker = WordMaker { used: reserved };

    let filler: Vec<String> = (0..spec.noise.vocab_size).map(|_| maker.fresh(&mut rng)).collect();

    let mut entries = Vec::new();
    let mut next_cui = 1usize;
    let mut cui = || {
        let id = format!("S{next_cui:07}");
        next_cui += 1;
        id
    };
    for a in aliases.iter().filter(|_| spec.disease_concepts) {
        entries.push(ConceptEntry {
            cui: cui(),
            names: a.clone(),
            tui: "T047".into(),
        });
    }
    let mut evidence = BTreeMap::new();
    let mut evidence_names = Vec::new();
    for d in &spec.diseases {
        let mut ids = Vec::new();
        let mut names = Vec::new();
        for k in 0..spec.evidence_per_disease {
            let name = maker.fresh(&mut rng);
            let id = cui();
            entries.push(ConceptEntry {
                cui: id.clone(),
                names: vec![name.clone()],
                tui: EVIDENCE_TUIS[k % EVIDENCE_TUIS.len()].into(),
            });
            ids.push(id);
            names.push(name);
        }
        evidence.insert(d.name.clone(), ids);
        evidence_names.push(names);
    }
    let mut noise_names = Vec::new();
    for k in 0..DECOY_CONCEPTS + GENERIC_CONCEPTS {
        let name = maker.fresh(&mut rng);
        let tui = if k < DECOY_CONCEPTS {
            DECOY_TUIS[k % DECOY_TUIS.len()]
        } else {
            TuiWhitelist::DISEASE_RELATED[k % TuiWhitelist::DISEASE_RELATED.len()]
        };
        entries.push(ConceptEntry {
            cui: cui(),
            names: vec![name.clone()],
            tui: tui.into(),
        });
        noise_names.push(name);
    }
    let dictionary = ConceptDictionary::new(entries)?;

    let mut word_embeddings = EmbeddingTable::new(spec.word_dim);
    let mut vocab: Vec<String> = maker.used.iter().cloned().collect();
    vocab.retain(|w| !filler.contains(w));
    let oov: BTreeSet<&String> = {
        let k = (spec.noise.oov_rate * filler.len() as f64).round() as usize;
        filler.choose_multiple(&mut rng, k).collect()
    };
    vocab.extend(filler.iter().filter(|w| !oov.contains(w)).cloned());
    vocab.sort();
    for w in &vocab {
        word_embeddings.insert(w, &random_vector(&mut rng, spec.word_dim))?;
    }
    let mut cui_embeddings = EmbeddingTable::new(spec.cui_dim);
    for e in dictionary.entries() {
        cui_embeddings.insert(&e.cui, &random_vector(&mut rng, spec.cui_dim))?;
    }

    let plan = Plan {
        spec,
        aliases,
        filler,
        evidence_names,
        noise_names,
    };
    let train = plan.split(&mut rng, "train-", spec.n_records)?;
    let test = plan.split(&mut rng, "test-", spec.n_test_records)?;

    Ok(SynthCorpus {
        train,
        test,
        lexicon,
        cues: spec.cues.clone(),
        dictionary,
        abbreviations,
        word_embeddings,
        cui_embeddings,
        evidence,
    })
}
