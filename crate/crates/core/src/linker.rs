//! Dictionary-based concept linking with semantic-type filtering.
//!
//! Records are mapped to concept identifiers by exact, greedy leftmost-longest
//! phrase matching against a concept dictionary, then restricted to a
//! whitelist of semantic types.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{tokenize, TokenizedText};

fn tui_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^T\d{3}$").unwrap())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptEntry {
    pub cui: String,
    pub names: Vec<String>,
    pub tui: String,
}

impl ConceptEntry {
    pub fn validate(&self) -> Result<()> {
        if self.cui.is_empty() {
            return Err(Error::Config("concept with empty identifier".into()));
        }
        if self.names.is_empty() || self.names.iter().any(|n| n.trim().is_empty()) {
            return Err(Error::Config(format!("concept `{}` has no usable names", self.cui)));
        }
        if !tui_regex().is_match(&self.tui) {
            return Err(Error::Config(format!(
                "concept `{}` has malformed semantic type `{}`",
                self.cui, self.tui
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConceptDictionary {
    entries: Vec<ConceptEntry>,
    by_cui: HashMap<String, usize>,
    by_first: HashMap<String, Vec<(Vec<String>, usize)>>,
}

impl ConceptDictionary {
    pub fn new(entries: Vec<ConceptEntry>) -> Result<Self> {
        let mut by_cui = HashMap::new();
        let mut by_first: HashMap<String, Vec<(Vec<String>, usize)>> = HashMap::new();
        for (idx, entry) in entries.iter().enumerate() {
            entry.validate()?;
            if by_cui.insert(entry.cui.clone(), idx).is_some() {
                return Err(Error::Config(format!("duplicate concept `{}`", entry.cui)));
            }
            for name in &entry.names {
                let words: Vec<String> = tokenize(name).words().map(str::to_string).collect();
                if let Some(first) = words.first() {
                    by_first.entry(first.clone()).or_default().push((words, idx));
                }
            }
        }
        for candidates in by_first.values_mut() {
            candidates.sort_by(|a, b| b.0.len().cmp(&a.0.len()));
        }
        Ok(Self {
            entries,
            by_cui,
            by_first,
        })
    }

    pub fn entries(&self) -> &[ConceptEntry] {
        &self.entries
    }

    pub fn get(&self, cui: &str) -> Option<&ConceptEntry> {
        self.by_cui.get(cui).map(|&i| &self.entries[i])
    }

    /// Parses `CUI<TAB>TUI<TAB>name1|name2|...` lines.
    pub fn parse(content: &str, origin: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in content.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(cui), Some(tui), Some(names), None) = (cols.next(), cols.next(), cols.next(), cols.next())
            else {
                return Err(Error::format(origin, i + 1, "expected `CUI<TAB>TUI<TAB>names`"));
            };
            let entry = ConceptEntry {
                cui: cui.trim().to_string(),
                tui: tui.trim().to_string(),
                names: names.split('|').map(|n| n.trim().to_lowercase()).collect(),
            };
            entry
                .validate()
                .map_err(|e| Error::format(origin, i + 1, e.to_string()))?;
            entries.push(entry);
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, &path.display().to_string())
    }

    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.cui, e.tui, e.names.join("|")))
            .collect()
    }
}

/// Set of admitted semantic types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuiWhitelist(pub BTreeSet<String>);

impl TuiWhitelist {
    /// Disease-related semantic types: body parts, findings, lab results,
    /// disorders, dysfunctions, procedures, substances, and symptoms.
    pub const DISEASE_RELATED: [&'static str; 13] = [
        "T023", "T033", "T034", "T047", "T048", "T049", "T059", "T060", "T061", "T121", "T122", "T123", "T184",
    ];

    pub fn disease_related() -> Self {
        Self(Self::DISEASE_RELATED.iter().map(|s| s.to_string()).collect())
    }

    pub fn empty() -> Self {
        Self(BTreeSet::new())
    }

    /// Every semantic type present in `dict`.
    pub fn all_of(dict: &ConceptDictionary) -> Self {
        Self(dict.entries().iter().map(|e| e.tui.clone()).collect())
    }

    pub fn contains(&self, tui: &str) -> bool {
        self.0.contains(tui)
    }
}

impl Default for TuiWhitelist {
    fn default() -> Self {
        Self::disease_related()
    }
}

/// Concept identifiers with occurrence counts, in first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptBag {
    pub entries: Vec<(String, usize)>,
}

impl ConceptBag {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn cuis(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(c, _)| c.as_str())
    }

    pub fn count(&self, cui: &str) -> usize {
        self.entries
            .iter()
            .find(|(c, _)| c == cui)
            .map_or(0, |(_, n)| *n)
    }

    fn add(&mut self, cui: &str) {
        match self.entries.iter_mut().find(|(c, _)| c == cui) {
            Some((_, n)) => *n += 1,
            None => self.entries.push((cui.to_string(), 1)),
        }
    }
}

pub fn link_concepts(tok: &TokenizedText, dict: &ConceptDictionary) -> ConceptBag {
    let words: Vec<&str> = tok.words().collect();
    let mut bag = ConceptBag::default();
    let mut pos = 0;
    while pos < words.len() {
        let hit = dict.by_first.get(words[pos]).and_then(|candidates| {
            candidates.iter().find_map(|(name, idx)| {
                let end = pos + name.len();
                (end <= words.len() && name.iter().zip(&words[pos..end]).all(|(a, b)| a == b))
                    .then_some((name.len(), *idx))
            })
        });
        match hit {
            Some((len, idx)) => {
                bag.add(&dict.entries[idx].cui);
                pos += len;
            }
            None => pos += 1,
        }
    }
    bag
}

pub fn filter_by_tui(bag: &ConceptBag, dict: &ConceptDictionary, whitelist: &TuiWhitelist) -> Result<ConceptBag> {
    let mut out = ConceptBag::default();
    for (cui, count) in &bag.entries {
        let entry = dict.get(cui).ok_or_else(|| Error::Lookup(cui.clone()))?;
        if whitelist.contains(&entry.tui) {
            out.entries.push((cui.clone(), *count));
        }
    }
    Ok(out)
}
