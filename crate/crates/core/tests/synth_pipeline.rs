use std::collections::BTreeMap;

use kgclin::cascade::{classify_all, rule_label, DecisionSource};
use kgclin::corpus::{DiseaseLabel, TaskKind};
use kgclin::exec::Exec;
use kgclin::pipeline::{train_models, training_jobs, ModelBank, ModelKind, TrainOptions};
use kgclin::synthgen::{allocate, files, generate, ClassMix, SynthSpec};
use kgclin::trigger::PolaritySummary;
use kgclin_testkit::rules::truth_table;
use regex::Regex;

#[test]
fn rule_flags_agree_with_textual_labels_even_with_family_history() {
    let spec = SynthSpec {
        family_history_rate: 1.0,
        ..SynthSpec::challenge_like(5, 120, 0)
    };
    let corpus = generate(&spec).unwrap();
    let res = corpus.resources();
    let family = corpus.train.records.iter().filter(|r| r.text.contains("FAMILY HISTORY:")).count();
    assert_eq!(family, corpus.train.records.len());
    for record in &corpus.train.records {
        let a = res.analyze(record).unwrap();
        for (disease, id, label) in corpus.train.textual.iter() {
            if id != record.id {
                continue;
            }
            let s = a.summary_for(disease);
            match label {
                DiseaseLabel::Y => assert!(s.has_positive, "{id} {disease}"),
                DiseaseLabel::N => assert!(!s.has_positive && s.has_negative, "{id} {disease}"),
                DiseaseLabel::Q => assert!(!s.has_positive && !s.has_negative && s.has_uncertain, "{id} {disease}"),
                DiseaseLabel::U => assert_eq!(s, PolaritySummary::default(), "{id} {disease}"),
            }
        }
    }
}

fn judgment_counts(xml: &str) -> BTreeMap<(String, String, String), usize> {
    // Regex scan, independent of the XML parser.
    let block = Regex::new(r#"(?s)<diseases source="(\w+)">(.*?)</diseases>"#).unwrap();
    let disease = Regex::new(r#"(?s)<disease name="([^"]+)">(.*?)</disease>"#).unwrap();
    let judgment = Regex::new(r#"judgment="(\w)""#).unwrap();
    let mut out = BTreeMap::new();
    for b in block.captures_iter(xml) {
        for d in disease.captures_iter(&b[2]) {
            for j in judgment.captures_iter(&d[2]) {
                *out.entry((b[1].to_string(), d[1].to_string(), j[1].to_string())).or_default() += 1;
            }
        }
    }
    out
}

#[test]
fn half_and_half_split_is_exact_in_written_files() {
    let mut spec = SynthSpec::challenge_like(9, 100, 0);
    spec.class_mix.textual = ClassMix { y: 0.5, n: 0.0, q: 0.0, u: 0.5 };
    spec.class_mix.intuitive = ClassMix { y: 0.5, n: 0.5, q: 0.0, u: 0.0 };
    let dir = tempfile::tempdir().unwrap();
    generate(&spec).unwrap().write_to(dir.path()).unwrap();
    let xml = std::fs::read_to_string(dir.path().join(files::TRAIN_ANNOTATIONS)).unwrap();
    let counts = judgment_counts(&xml);
    for d in &spec.diseases {
        for (task, a, b) in [("textual", "Y", "U"), ("intuitive", "Y", "N")] {
            assert_eq!(counts[&(task.into(), d.name.clone(), a.into())], 50);
            assert_eq!(counts[&(task.into(), d.name.clone(), b.into())], 50);
        }
    }
    assert_eq!(counts.values().sum::<usize>(), 2 * 100 * spec.diseases.len());
}

#[test]
fn class_counts_follow_allocation() {
    let spec = SynthSpec::challenge_like(12, 300, 0);
    let corpus = generate(&spec).unwrap();
    let xml = kgclin::corpus::annotations_to_xml(&[&corpus.train.textual]);
    let counts = judgment_counts(&xml);
    let want = allocate(&spec.class_mix.textual, 300);
    for d in &spec.diseases {
        for l in DiseaseLabel::ALL {
            let got = counts.get(&("textual".into(), d.name.clone(), l.to_string())).copied().unwrap_or(0);
            assert_eq!(got, want[l.index()], "{} {l}", d.name);
        }
    }
}

#[test]
fn same_seed_writes_identical_bytes() {
    let spec = SynthSpec::challenge_like(21, 60, 20);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = generate(&spec).unwrap().write_to(a.path()).unwrap();
    let fb = generate(&spec).unwrap().write_to(b.path()).unwrap();
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn cascade_rule_matches_truth_table() {
    for p in [false, true] {
        for n in [false, true] {
            for u in [false, true] {
                let s = PolaritySummary { has_positive: p, has_negative: n, has_uncertain: u };
                assert_eq!(rule_label(&s).label, truth_table(p, n, u), "({p}, {n}, {u})");
            }
        }
    }
}

#[test]
fn rule_decisions_do_not_depend_on_the_model() {
    let mut spec = SynthSpec::challenge_like(33, 120, 60);
    spec.class_mix.textual = ClassMix { y: 0.3, n: 0.1, q: 0.1, u: 0.5 };
    spec.class_mix.intuitive = ClassMix { y: 0.5, n: 0.4, q: 0.1, u: 0.0 };
    let corpus = generate(&spec).unwrap();
    let res = corpus.resources();
    let train = res.analyze_all(&corpus.train.records, Exec::Sequential).unwrap();
    let test = res.analyze_all(&corpus.test.records, Exec::Sequential).unwrap();
    let mut jobs = Vec::new();
    for task in TaskKind::ALL {
        jobs.extend(training_jobs(&corpus.train.records, &train, corpus.train.annotations(task), false).unwrap());
    }
    let opts = TrainOptions::default();
    let learned: ModelBank = train_models(&jobs, ModelKind::Logreg, &opts, &res, Exec::Sequential)
        .unwrap()
        .into_iter()
        .collect();
    let rules = ModelBank::rules_only(&corpus.lexicon);

    let a = classify_all(&test, &TaskKind::ALL, &learned, &res, Exec::Sequential).unwrap();
    let b = classify_all(&test, &TaskKind::ALL, &rules, &res, Exec::Sequential).unwrap();
    assert_eq!(a.len(), b.len());
    let mut decided = 0;
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((&x.id, &x.disease, x.task), (&y.id, &y.disease, y.task));
        assert_eq!(x.source, y.source);
        if x.source != DecisionSource::Deferred {
            assert_eq!(x.label, y.label);
            decided += 1;
        }
    }
    assert!(decided > 0);
}
