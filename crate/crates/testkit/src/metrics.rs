//! Hand-tallied label fixtures.
//!
//! A (textual): Y tp2 fp1 fn1 → 2/3; U tp1 fp2 fn1 → 2/5; N fn1 → 0.
//! B (intuitive): Y tp1 fn1 → 2/3; N tp1 fp2 → 1/2; Q fn1 → 0.
//! C (textual, only U in gold): U tp4 fn1 → 8/9.
//! A and C pooled: Y tp2 fp2 fn1 → 4/7; U tp5 fp2 fn2 → 5/7; N → 0.

use std::collections::BTreeMap;

use kgclin::corpus::{DiseaseLabel, TaskKind};
use DiseaseLabel::*;

pub struct Fixture {
    pub name: &'static str,
    pub task: TaskKind,
    pub gold: &'static [DiseaseLabel],
    pub pred: &'static [DiseaseLabel],
    pub macro_f1: f64,
    pub micro_f1: f64,
}

pub const A: Fixture = Fixture {
    name: "A",
    task: TaskKind::Textual,
    gold: &[Y, Y, Y, U, U, N],
    pred: &[Y, Y, U, U, Y, U],
    macro_f1: 16.0 / 45.0,
    micro_f1: 0.5,
};

pub const B: Fixture = Fixture {
    name: "B",
    task: TaskKind::Intuitive,
    gold: &[Y, Y, N, Q],
    pred: &[Y, N, N, N],
    macro_f1: 7.0 / 18.0,
    micro_f1: 0.5,
};

pub const C: Fixture = Fixture {
    name: "C",
    task: TaskKind::Textual,
    gold: &[U, U, U, U, U],
    pred: &[U, U, U, Y, U],
    macro_f1: 8.0 / 9.0,
    micro_f1: 0.8,
};

pub const ALL: [&Fixture; 3] = [&A, &B, &C];

/// (pooled macro, pooled micro, mean of per-disease macro) for A + C.
pub const POOLED_AC: (f64, f64, f64) = (3.0 / 7.0, 7.0 / 11.0, 28.0 / 45.0);

pub type LabelMap = BTreeMap<String, DiseaseLabel>;

/// (predictions, gold) keyed by synthetic record ids.
pub fn maps(gold: &[DiseaseLabel], pred: &[DiseaseLabel]) -> (LabelMap, LabelMap) {
    let key = |i: usize| format!("r{i}");
    (
        pred.iter().enumerate().map(|(i, l)| (key(i), *l)).collect(),
        gold.iter().enumerate().map(|(i, l)| (key(i), *l)).collect(),
    )
}

impl Fixture {
    pub fn maps(&self) -> (LabelMap, LabelMap) {
        maps(self.gold, self.pred)
    }
}
