//! Text normalization ahead of trigger identification: abbreviation
//! expansion, family-history removal, and tokenization.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};

/// Section header lines, discharge-summary style (`PAST MEDICAL HISTORY:`).
fn header_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^[A-Z][A-Z /&-]{2,}:").unwrap())
}

fn family_header_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?mi)^[ \t]*family\s+history[^\n:]*:").unwrap())
}

pub const DEFAULT_FAMILY_KEYWORDS: &[&str] = &[
    "mother",
    "father",
    "brother",
    "sister",
    "son",
    "daughter",
    "grandmother",
    "grandfather",
    "aunt",
    "uncle",
    "family",
];

/// Case-sensitive short form → expansion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AbbreviationTable {
    entries: BTreeMap<String, String>,
}

impl AbbreviationTable {
    pub fn new<K, V>(entries: impl IntoIterator<Item = (K, V)>) -> Result<Self>
    where
        K: Into<String>,
        V: Into<String>,
    {
        let mut table = BTreeMap::new();
        for (k, v) in entries {
            let (k, v) = (k.into(), v.into());
            if k.is_empty() || v.trim().is_empty() {
                return Err(Error::Config(format!("empty abbreviation entry `{k}`")));
            }
            if k == v {
                return Err(Error::Config(format!("abbreviation `{k}` maps to itself")));
            }
            table.insert(k, v);
        }
        Ok(Self { entries: table })
    }

    /// Expansions for the challenge disease abbreviations.
    pub fn challenge_default() -> Self {
        Self::new([
            ("DM", "diabetes mellitus"),
            ("CAD", "coronary artery disease"),
            ("CHF", "congestive heart failure"),
            ("PVD", "peripheral vascular disease"),
            ("OA", "osteoarthritis"),
            ("OSA", "obstructive sleep apnea"),
            ("GERD", "gastroesophageal reflux disease"),
        ])
        .expect("default table is valid")
    }

    /// Parses `SHORT<TAB>expansion` lines; `#` starts a comment line.
    pub fn parse(content: &str, origin: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in content.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (short, expansion) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(origin, i + 1, "expected `SHORT<TAB>expansion`"))?;
            entries.push((short.trim().to_string(), expansion.trim().to_string()));
        }
        Self::new(entries).map_err(|e| Error::format(origin, 0, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, &path.display().to_string())
    }

    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}\t{v}\n"))
            .collect()
    }

    pub fn get(&self, short: &str) -> Option<&str> {
        self.entries.get(short).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Byte ranges of maximal alphanumeric runs.
fn word_runs(text: &str) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(s..text.len());
    }
    runs
}

/// Replaces whole-word occurrences of short forms in a single pass.
pub fn expand_abbreviations(text: &str, table: &AbbreviationTable) -> String {
    if table.is_empty() {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for run in word_runs(text) {
        if let Some(expansion) = table.get(&text[run.clone()]) {
            out.push_str(&text[last..run.start]);
            out.push_str(expansion);
            last = run.end;
        }
    }
    out.push_str(&text[last..]);
    out
}

fn is_number_period(text: &str, i: usize) -> bool {
    let before = text[..i].chars().next_back();
    let after = text[i + 1..].chars().next();
    matches!((before, after), (Some(b), Some(a)) if b.is_ascii_digit() && a.is_ascii_digit())
}

/// Sentence-sized segments used for family-member filtering. Each segment
/// carries its terminator and trailing spaces; newlines end a segment and
/// belong to none.
fn removal_segments(text: &str) -> Vec<Range<usize>> {
    let mut segments = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c == '\n' {
            if start < i {
                segments.push(start..i);
            }
            start = i + 1;
        } else if matches!(c, '.' | '!' | '?') && !(c == '.' && is_number_period(text, i)) {
            let mut end = i + c.len_utf8();
            while let Some(&(j, n)) = chars.peek() {
                if n == ' ' || n == '\t' {
                    end = j + 1;
                    chars.next();
                } else {
                    break;
                }
            }
            segments.push(start..end);
            start = end;
        }
    }
    if start < text.len() {
        segments.push(start..text.len());
    }
    segments
}

fn remove_family_sections(text: &str) -> String {
    let family_starts: Vec<usize> = family_header_regex().find_iter(text).map(|m| m.start()).collect();
    if family_starts.is_empty() {
        return text.to_string();
    }
    let header_starts: Vec<usize> = header_regex()
        .find_iter(text)
        .map(|m| m.start())
        .chain(family_starts.iter().copied())
        .collect();
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for &start in &family_starts {
        if start < cursor {
            continue;
        }
        let end = header_starts
            .iter()
            .copied()
            .filter(|&h| h > start && !family_starts.contains(&h))
            .min()
            .unwrap_or(text.len());
        out.push_str(&text[cursor..start]);
        cursor = end;
    }
    out.push_str(&text[cursor..]);
    out
}

fn remove_family_sentences(text: &str, keywords: &[String]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for seg in removal_segments(text) {
        let body = &text[seg.clone()];
        let hit = word_runs(body)
            .into_iter()
            .any(|r| keywords.iter().any(|k| body[r.clone()].eq_ignore_ascii_case(k)));
        if hit {
            out.push_str(&text[cursor..seg.start]);
            cursor = seg.end;
        }
    }
    out.push_str(&text[cursor..]);
    out
}

/// Removes family-history sections and any remaining sentence that names a
/// family member. Iterates to a fixed point so the result is idempotent.
pub fn remove_family_history(text: &str, keywords: &[String]) -> String {
    let mut current = text.to_string();
    loop {
        let next = remove_family_sentences(&remove_family_sections(&current), keywords);
        if next == current {
            return next;
        }
        current = next;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Lowercased surface form.
    pub text: String,
    /// Byte range in the source text.
    pub span: Range<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenizedText {
    pub tokens: Vec<Token>,
    /// Token-index ranges, contiguous and non-empty.
    pub sentences: Vec<Range<usize>>,
    sentence_of: Vec<usize>,
}

impl TokenizedText {
    pub fn from_parts(tokens: Vec<Token>, sentences: Vec<Range<usize>>) -> Self {
        let mut sentence_of = vec![0; tokens.len()];
        for (s, range) in sentences.iter().enumerate() {
            for i in range.clone() {
                sentence_of[i] = s;
            }
        }
        Self {
            tokens,
            sentences,
            sentence_of,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn sentence_of(&self, token: usize) -> usize {
        self.sentence_of[token]
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }
}

/// Lowercased word tokens with sentence boundaries.
///
/// Words are alphanumeric runs, joined across an internal hyphen (`x-ray`)
/// or a period between digits (`41.5`). Sentences end at `.`, `!`, `?`, a
/// blank line, or a section header.
pub fn tokenize(text: &str) -> TokenizedText {
    let mut header_cuts: Vec<usize> = Vec::new();
    for m in header_regex().find_iter(text) {
        header_cuts.push(m.start());
        header_cuts.push(m.end());
    }
    header_cuts.sort_unstable();

    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens: Vec<Token> = Vec::new();
    let mut sentences: Vec<Range<usize>> = Vec::new();
    let mut sentence_start = 0;
    let mut close = |tokens: &Vec<Token>, sentences: &mut Vec<Range<usize>>| {
        if tokens.len() > sentence_start {
            sentences.push(sentence_start..tokens.len());
            sentence_start = tokens.len();
        }
    };

    let mut next_cut = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        while next_cut < header_cuts.len() && header_cuts[next_cut] <= pos {
            close(&tokens, &mut sentences);
            next_cut += 1;
        }
        if c.is_alphanumeric() {
            let start = pos;
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j].1;
                if cj.is_alphanumeric() {
                    j += 1;
                    continue;
                }
                let prev = chars[j - 1].1;
                let next = chars.get(j + 1).map(|x| x.1);
                let joins = match (cj, next) {
                    ('-', Some(n)) => prev.is_alphanumeric() && n.is_alphanumeric(),
                    ('.', Some(n)) => prev.is_ascii_digit() && n.is_ascii_digit(),
                    _ => false,
                };
                if joins {
                    j += 2;
                } else {
                    break;
                }
            }
            let end = chars.get(j).map_or(text.len(), |x| x.0);
            // A header cut can fall inside a run only at its start; runs never
            // contain the header colon.
            tokens.push(Token {
                text: text[start..end].to_lowercase(),
                span: start..end,
            });
            i = j;
            continue;
        }
        match c {
            '.' | '!' | '?' => close(&tokens, &mut sentences),
            '\n' => {
                let mut k = i + 1;
                while k < chars.len() && matches!(chars[k].1, ' ' | '\t' | '\r') {
                    k += 1;
                }
                if k < chars.len() && chars[k].1 == '\n' {
                    close(&tokens, &mut sentences);
                }
            }
            _ => {}
        }
        i += 1;
    }
    close(&tokens, &mut sentences);
    TokenizedText::from_parts(tokens, sentences)
}

/// Abbreviation expansion followed by family-history removal.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub abbreviations: AbbreviationTable,
    pub family_keywords: Vec<String>,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self {
            abbreviations: AbbreviationTable::challenge_default(),
            family_keywords: DEFAULT_FAMILY_KEYWORDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Preprocessor {
    pub fn new(abbreviations: AbbreviationTable) -> Self {
        Self {
            abbreviations,
            ..Self::default()
        }
    }

    pub fn apply(&self, text: &str) -> String {
        remove_family_history(
            &expand_abbreviations(text, &self.abbreviations),
            &self.family_keywords,
        )
    }
}
