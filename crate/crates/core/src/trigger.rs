//! Disease trigger phrases: alias mentions with negation/uncertainty polarity.
//!
//! Aliases are matched leftmost-longest over the token stream, never across
//! a sentence boundary. A mention's polarity comes from the nearest cue that
//! ends within `scope_window` tokens before it, in the same sentence. When a
//! negation cue and an uncertainty cue are equally near, negation wins.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{tokenize, TokenizedText};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiseaseLexicon {
    pub disease: String,
    pub aliases: Vec<Vec<String>>,
}

impl DiseaseLexicon {
    /// Builds an entry from surface aliases, tokenized the same way record
    /// text is.
    pub fn new<S: AsRef<str>>(disease: impl Into<String>, aliases: &[S]) -> Result<Self> {
        let disease = disease.into();
        let aliases: Vec<Vec<String>> = aliases
            .iter()
            .map(|a| tokenize(a.as_ref()).words().map(str::to_string).collect::<Vec<_>>())
            .collect();
        let lex = Self { disease, aliases };
        lex.validate()?;
        Ok(lex)
    }

    pub fn validate(&self) -> Result<()> {
        if self.aliases.is_empty() {
            return Err(Error::Config(format!("disease `{}` has no aliases", self.disease)));
        }
        for alias in &self.aliases {
            if alias.is_empty() || alias.iter().any(|t| t.is_empty() || *t != t.to_lowercase()) {
                return Err(Error::Config(format!(
                    "disease `{}` has an empty or non-lowercase alias",
                    self.disease
                )));
            }
        }
        Ok(())
    }
}

/// All disease lexicons, indexed for matching.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<DiseaseLexicon>,
    /// first token → (alias, entry index), longest alias first.
    by_first: HashMap<String, Vec<(Vec<String>, usize)>>,
}

impl Lexicon {
    pub fn new(entries: Vec<DiseaseLexicon>) -> Result<Self> {
        let mut by_first: HashMap<String, Vec<(Vec<String>, usize)>> = HashMap::new();
        for (idx, entry) in entries.iter().enumerate() {
            entry.validate()?;
            for alias in &entry.aliases {
                by_first
                    .entry(alias[0].clone())
                    .or_default()
                    .push((alias.clone(), idx));
            }
        }
        for candidates in by_first.values_mut() {
            // Stable: equal-length aliases keep lexicon order.
            candidates.sort_by(|a, b| b.0.len().cmp(&a.0.len()));
        }
        Ok(Self { entries, by_first })
    }

    pub fn entries(&self) -> &[DiseaseLexicon] {
        &self.entries
    }

    pub fn diseases(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.disease.as_str())
    }

    /// Parses `disease<TAB>alias1|alias2|...` lines.
    pub fn parse(content: &str, origin: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in content.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (disease, aliases) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(origin, i + 1, "expected `disease<TAB>alias|alias`"))?;
            let aliases: Vec<&str> = aliases.split('|').map(str::trim).collect();
            let entry = DiseaseLexicon::new(disease.trim(), &aliases)
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
            .map(|e| {
                let aliases: Vec<String> = e.aliases.iter().map(|a| a.join(" ")).collect();
                format!("{}\t{}\n", e.disease, aliases.join("|"))
            })
            .collect()
    }

    /// Longest alias starting at `pos` that ends at or before `limit`.
    fn longest_at(&self, words: &[&str], pos: usize, limit: usize) -> Option<(usize, usize)> {
        let candidates = self.by_first.get(words[pos])?;
        candidates.iter().find_map(|(alias, idx)| {
            let end = pos + alias.len();
            (end <= limit && alias.iter().zip(&words[pos..end]).all(|(a, w)| a == w))
                .then_some((alias.len(), *idx))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CueKind {
    Negation,
    Uncertainty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueLexicon {
    pub negation: Vec<Vec<String>>,
    pub uncertainty: Vec<Vec<String>>,
    pub scope_window: usize,
}

impl Default for CueLexicon {
    fn default() -> Self {
        let split = |xs: &[&str]| xs.iter().map(|x| x.split(' ').map(str::to_string).collect()).collect();
        Self {
            negation: split(&["no", "not", "denies", "denied", "without", "absent", "negative"]),
            uncertainty: split(&[
                "possible",
                "probable",
                "questionable",
                "suspected",
                "may",
                "might",
                "likely",
                "rule out",
            ]),
            scope_window: 6,
        }
    }
}

impl CueLexicon {
    pub fn validate(&self) -> Result<()> {
        if self.scope_window == 0 {
            return Err(Error::Config("cue scope window must be at least 1".into()));
        }
        for cue in self.negation.iter().chain(&self.uncertainty) {
            if cue.is_empty() || cue.iter().any(String::is_empty) {
                return Err(Error::Config("empty cue".into()));
            }
        }
        if let Some(shared) = self.negation.iter().find(|c| self.uncertainty.contains(c)) {
            return Err(Error::Config(format!(
                "cue `{}` is both a negation and an uncertainty cue",
                shared.join(" ")
            )));
        }
        Ok(())
    }

    /// Parses `NEG: cue` / `UNC: cue` lines, plus an optional `WINDOW: n`.
    pub fn parse(content: &str, origin: &str) -> Result<Self> {
        let mut cues = CueLexicon {
            negation: Vec::new(),
            uncertainty: Vec::new(),
            scope_window: 6,
        };
        for (i, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::format(origin, i + 1, format!("unrecognized cue line `{line}`"));
            let (tag, value) = line.split_once(':').ok_or_else(bad)?;
            let words = || -> Vec<String> { tokenize(value).words().map(str::to_string).collect() };
            match tag.trim() {
                "NEG" => cues.negation.push(words()),
                "UNC" => cues.uncertainty.push(words()),
                "WINDOW" => {
                    cues.scope_window = value
                        .trim()
                        .parse()
                        .map_err(|_| Error::format(origin, i + 1, "WINDOW expects an integer"))?
                }
                _ => return Err(bad()),
            }
        }
        cues.validate().map_err(|e| Error::format(origin, 0, e.to_string()))?;
        Ok(cues)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("WINDOW: {}\n", self.scope_window);
        for c in &self.negation {
            out.push_str(&format!("NEG: {}\n", c.join(" ")));
        }
        for c in &self.uncertainty {
            out.push_str(&format!("UNC: {}\n", c.join(" ")));
        }
        out
    }

    /// Every cue occurrence, overlapping ones included.
    fn occurrences(&self, words: &[&str]) -> Vec<(Range<usize>, CueKind)> {
        let mut out = Vec::new();
        for start in 0..words.len() {
            for (kind, list) in [(CueKind::Negation, &self.negation), (CueKind::Uncertainty, &self.uncertainty)] {
                for cue in list {
                    let end = start + cue.len();
                    if end <= words.len() && cue.iter().zip(&words[start..end]).all(|(c, w)| c == w) {
                        out.push((start..end, kind));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
    Uncertain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerPhrase {
    pub disease: String,
    pub polarity: Polarity,
    pub mention_span: Range<usize>,
    pub cue_span: Option<Range<usize>>,
    pub surface: String,
}

pub fn find_trigger_phrases(tok: &TokenizedText, lex: &Lexicon, cues: &CueLexicon) -> Vec<TriggerPhrase> {
    let words: Vec<&str> = tok.words().collect();
    let cue_hits = cues.occurrences(&words);
    let mut triggers = Vec::new();

    for sentence in &tok.sentences {
        let mut pos = sentence.start;
        while pos < sentence.end {
            let Some((len, idx)) = lex.longest_at(&words, pos, sentence.end) else {
                pos += 1;
                continue;
            };
            let mention = pos..pos + len;
            let window_start = mention.start.saturating_sub(cues.scope_window).max(sentence.start);

            // Nearest by end; negation before uncertainty; then the longest cue.
            let best = cue_hits
                .iter()
                .filter(|(span, _)| {
                    span.start >= sentence.start && span.end <= mention.start && span.end > window_start
                })
                .max_by(|(a, ka), (b, kb)| {
                    a.end
                        .cmp(&b.end)
                        .then(kb.cmp(ka))
                        .then(b.start.cmp(&a.start))
                });

            let (polarity, cue_span) = match best {
                None => (Polarity::Positive, None),
                Some((span, CueKind::Negation)) => (Polarity::Negative, Some(span.clone())),
                Some((span, CueKind::Uncertainty)) => (Polarity::Uncertain, Some(span.clone())),
            };
            triggers.push(TriggerPhrase {
                disease: lex.entries[idx].disease.clone(),
                polarity,
                surface: words[mention.clone()].join(" "),
                mention_span: mention,
                cue_span,
            });
            pos += len;
        }
    }
    triggers
}

/// Tokens inside positive mentions, in document order.
pub fn positive_trigger_tokens(triggers: &[TriggerPhrase], tok: &TokenizedText) -> Vec<String> {
    let mut spans: Vec<&Range<usize>> = triggers
        .iter()
        .filter(|t| t.polarity == Polarity::Positive)
        .map(|t| &t.mention_span)
        .collect();
    spans.sort_by_key(|s| s.start);
    spans
        .into_iter()
        .flat_map(|s| tok.tokens[s.clone()].iter().map(|t| t.text.clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolaritySummary {
    pub has_positive: bool,
    pub has_negative: bool,
    pub has_uncertain: bool,
}

impl PolaritySummary {
    pub fn add(&mut self, polarity: Polarity) {
        match polarity {
            Polarity::Positive => self.has_positive = true,
            Polarity::Negative => self.has_negative = true,
            Polarity::Uncertain => self.has_uncertain = true,
        }
    }
}

/// Existential polarity flags per disease.
pub fn polarity_summary(triggers: &[TriggerPhrase]) -> BTreeMap<String, PolaritySummary> {
    let mut out: BTreeMap<String, PolaritySummary> = BTreeMap::new();
    for t in triggers {
        out.entry(t.disease.clone()).or_default().add(t.polarity);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexicon() -> Lexicon {
        Lexicon::new(vec![
            DiseaseLexicon::new("Gallstones", &["gallstones", "cholelithiasis"]).unwrap(),
            DiseaseLexicon::new("Asthma", &["asthma"]).unwrap(),
            DiseaseLexicon::new("CHF", &["chf", "heart failure"]).unwrap(),
            DiseaseLexicon::new("Hypertension", &["hypertension"]).unwrap(),
            DiseaseLexicon::new("DM", &["diabetes", "diabetes mellitus"]).unwrap(),
        ])
        .unwrap()
    }

    fn run(text: &str) -> Vec<(String, Polarity)> {
        find_trigger_phrases(&tokenize(text), &lexicon(), &CueLexicon::default())
            .into_iter()
            .map(|t| (t.disease, t.polarity))
            .collect()
    }

    #[test]
    fn cue_rules() {
        assert_eq!(run("patient denies gallstones"), [("Gallstones".into(), Polarity::Negative)]);
        assert_eq!(run("possible asthma"), [("Asthma".into(), Polarity::Uncertain)]);
        assert_eq!(
            run("no CHF. has hypertension"),
            [
                ("CHF".into(), Polarity::Negative),
                ("Hypertension".into(), Polarity::Positive)
            ]
        );
        assert_eq!(run("rule out heart failure"), [("CHF".into(), Polarity::Uncertain)]);
    }

    #[test]
    fn window_limits_scope() {
        // Six tokens between the cue and the mention puts the cue out of scope.
        assert_eq!(run("no a b c d e f asthma"), [("Asthma".into(), Polarity::Positive)]);
        assert_eq!(run("no a b c d e asthma"), [("Asthma".into(), Polarity::Negative)]);
    }

    #[test]
    fn nearest_cue_and_tie() {
        assert_eq!(run("no sign, possibly possible asthma"), [("Asthma".into(), Polarity::Uncertain)]);
        let cues = CueLexicon {
            negation: vec![vec!["not".into()]],
            uncertainty: vec![vec!["may".into(), "not".into()]],
            scope_window: 6,
        };
        let t = find_trigger_phrases(&tokenize("may not asthma"), &lexicon(), &cues);
        assert_eq!(t[0].polarity, Polarity::Negative);
        assert_eq!(t[0].cue_span, Some(1..2));
    }

    #[test]
    fn longest_match() {
        let t = find_trigger_phrases(&tokenize("diabetes mellitus type 2"), &lexicon(), &CueLexicon::default());
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].mention_span, 0..2);
        assert_eq!(t[0].surface, "diabetes mellitus");
    }

    #[test]
    fn positive_tokens() {
        let tok = tokenize("diabetes mellitus noted");
        let t = find_trigger_phrases(&tok, &lexicon(), &CueLexicon::default());
        assert_eq!(positive_trigger_tokens(&t, &tok), ["diabetes", "mellitus"]);
        let tok = tokenize("no asthma. denies chf");
        let t = find_trigger_phrases(&tok, &lexicon(), &CueLexicon::default());
        assert!(positive_trigger_tokens(&t, &tok).is_empty());
        let tok = tokenize("asthma and later heart failure");
        let mut t = find_trigger_phrases(&tok, &lexicon(), &CueLexicon::default());
        t.reverse();
        assert_eq!(positive_trigger_tokens(&t, &tok), ["asthma", "heart", "failure"]);
    }

    #[test]
    fn summary_flags() {
        assert!(polarity_summary(&[]).is_empty());
        let t = find_trigger_phrases(&tokenize("denies asthma. possible asthma. gallstones"), &lexicon(), &CueLexicon::default());
        let s = polarity_summary(&t);
        assert_eq!(
            s["Asthma"],
            PolaritySummary {
                has_positive: false,
                has_negative: true,
                has_uncertain: true
            }
        );
        assert!(s["Gallstones"].has_positive);
    }

    #[test]
    fn file_formats() {
        let lex = Lexicon::parse("Gallstones\tgallstones|cholelithiasis\nAsthma\tasthma\n", "t").unwrap();
        assert_eq!(lex.entries().len(), 2);
        assert_eq!(Lexicon::parse(&lex.to_tsv(), "t").unwrap().entries(), lex.entries());
        let cues = CueLexicon::parse(&CueLexicon::default().to_text(), "t").unwrap();
        assert_eq!(cues, CueLexicon::default());
        assert!(CueLexicon::parse("NEG: no\nUNC: no\n", "t").is_err());
        assert!(CueLexicon::parse("FOO: no\n", "t").is_err());
        assert!(Lexicon::parse("Asthma\t\n", "t").is_err());
    }
}
