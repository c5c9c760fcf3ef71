use std::ops::Range;

use kgclin::preprocess::TokenizedText;
use kgclin::trigger::{CueLexicon, DiseaseLexicon, Lexicon, Polarity};
use rand::Rng;

/// Overlapping aliases and nested cues, so both tie rules get exercised.
pub fn lexicon() -> Lexicon {
    Lexicon::new(vec![
        DiseaseLexicon::new("CHF", &["heart failure", "congestive heart failure", "chf"]).unwrap(),
        DiseaseLexicon::new("CAD", &["heart disease", "coronary artery disease"]).unwrap(),
        DiseaseLexicon::new("Asthma", &["asthma", "reactive airway disease"]).unwrap(),
        DiseaseLexicon::new("Hypertension", &["hypertension", "high blood pressure"]).unwrap(),
        DiseaseLexicon::new("Airway", &["airway disease"]).unwrap(),
    ])
    .unwrap()
}

pub fn cues() -> CueLexicon {
    let split = |xs: &[&str]| xs.iter().map(|x| x.split(' ').map(str::to_string).collect()).collect();
    CueLexicon {
        negation: split(&["no", "denies", "no evidence of", "without"]),
        uncertainty: split(&["possible", "rule out", "evidence of", "may"]),
        scope_window: 4,
    }
}

const FILLER: &[&str] = &["patient", "was", "seen", "today", "with", "and", "for", "out", "high", "rule"];

/// A single sentence of at most 12 tokens drawn from alias, cue and filler
/// words.
pub fn random_sentence<R: Rng>(rng: &mut R, lex: &Lexicon, cues: &CueLexicon) -> String {
    let mut pieces: Vec<String> = Vec::new();
    let mut len = 0;
    let target = rng.gen_range(1..=12);
    while len < target {
        let piece: Vec<String> = match rng.gen_range(0..3) {
            0 => {
                let e = &lex.entries()[rng.gen_range(0..lex.entries().len())];
                e.aliases[rng.gen_range(0..e.aliases.len())].clone()
            }
            1 => {
                let all: Vec<&Vec<String>> = cues.negation.iter().chain(&cues.uncertainty).collect();
                all[rng.gen_range(0..all.len())].clone()
            }
            _ => vec![FILLER[rng.gen_range(0..FILLER.len())].to_string()],
        };
        if len + piece.len() > 12 {
            break;
        }
        len += piece.len();
        pieces.push(piece.join(" "));
    }
    if pieces.is_empty() {
        pieces.push("patient".into());
    }
    format!("{}.", pieces.join(" "))
}

fn matches_at(words: &[&str], at: usize, end: usize, phrase: &[String]) -> bool {
    at + phrase.len() <= end && phrase.iter().enumerate().all(|(k, p)| words[at + k] == p)
}

/// Brute-force extraction: leftmost-longest mentions per sentence (earlier
/// lexicon entry on equal length), each scoped by the cue whose end is
/// nearest, negation winning ties, then the longer cue.
pub fn oracle(tok: &TokenizedText, lex: &Lexicon, cues: &CueLexicon) -> Vec<(String, Polarity, Range<usize>)> {
    let words: Vec<&str> = tok.tokens.iter().map(|t| t.text.as_str()).collect();
    let mut out = Vec::new();
    for sentence in &tok.sentences {
        let mut p = sentence.start;
        while p < sentence.end {
            let mut best: Option<(usize, usize)> = None; // (len, entry)
            for (e, entry) in lex.entries().iter().enumerate() {
                for alias in &entry.aliases {
                    if matches_at(&words, p, sentence.end, alias) {
                        let better = match best {
                            None => true,
                            Some((l, _)) => alias.len() > l,
                        };
                        if better {
                            best = Some((alias.len(), e));
                        }
                    }
                }
            }
            let Some((len, e)) = best else {
                p += 1;
                continue;
            };
            let mention = p..p + len;
            let floor = mention.start.saturating_sub(cues.scope_window).max(sentence.start);

            // (end, negation?, length)
            let mut chosen: Option<(usize, bool, usize)> = None;
            for (is_neg, list) in [(true, &cues.negation), (false, &cues.uncertainty)] {
                for cue in list {
                    for i in sentence.start..mention.start {
                        let end = i + cue.len();
                        if end <= mention.start && end > floor && matches_at(&words, i, sentence.end, cue) {
                            let cand = (end, is_neg, cue.len());
                            if chosen.is_none_or(|c| cand > c) {
                                chosen = Some(cand);
                            }
                        }
                    }
                }
            }
            let polarity = match chosen {
                None => Polarity::Positive,
                Some((_, true, _)) => Polarity::Negative,
                Some((_, false, _)) => Polarity::Uncertain,
            };
            out.push((lex.entries()[e].disease.clone(), polarity, mention));
            p += len;
        }
    }
    out
}
