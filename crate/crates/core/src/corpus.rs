//! Clinical records, per-disease judgments, and their on-disk formats.
//!
//! Two formats are supported: the challenge-style XML pair (a records file
//! holding `<doc id><text>` elements, and a judgments file holding
//! `<diseases source><disease name><doc id judgment/>`), and a JSONL corpus
//! with one `{"id", "text", "labels"}` object per line.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalRecord {
    pub id: String,
    pub text: String,
}

impl ClinicalRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

/// Disease status judgment: present, absent, questionable, or unmentioned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DiseaseLabel {
    Y,
    N,
    Q,
    U,
}

impl DiseaseLabel {
    pub const ALL: [DiseaseLabel; 4] = [DiseaseLabel::Y, DiseaseLabel::N, DiseaseLabel::Q, DiseaseLabel::U];

    pub fn as_char(self) -> char {
        match self {
            DiseaseLabel::Y => 'Y',
            DiseaseLabel::N => 'N',
            DiseaseLabel::Q => 'Q',
            DiseaseLabel::U => 'U',
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DiseaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for DiseaseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Y" => Ok(DiseaseLabel::Y),
            "N" => Ok(DiseaseLabel::N),
            "Q" => Ok(DiseaseLabel::Q),
            "U" => Ok(DiseaseLabel::U),
            other => Err(Error::UnknownJudgment(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Textual,
    Intuitive,
}

impl TaskKind {
    pub const ALL: [TaskKind; 2] = [TaskKind::Textual, TaskKind::Intuitive];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Textual => "textual",
            TaskKind::Intuitive => "intuitive",
        }
    }

    /// Labels a judgment for this task may take.
    pub fn labels(self) -> &'static [DiseaseLabel] {
        match self {
            TaskKind::Textual => &DiseaseLabel::ALL,
            TaskKind::Intuitive => &DiseaseLabel::ALL[..3],
        }
    }

    /// The two populated classes the learned models choose between, in
    /// tie-break order.
    pub fn class_index(self) -> [DiseaseLabel; 2] {
        match self {
            TaskKind::Textual => [DiseaseLabel::Y, DiseaseLabel::U],
            TaskKind::Intuitive => [DiseaseLabel::Y, DiseaseLabel::N],
        }
    }

    /// Whether a gold label is kept when building a learned model's training set.
    pub fn is_trainable(self, label: DiseaseLabel) -> bool {
        self.class_index().contains(&label)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "textual" => Ok(TaskKind::Textual),
            "intuitive" => Ok(TaskKind::Intuitive),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

/// Gold judgments for one task, keyed by (disease, record id).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationSet {
    pub task: TaskKind,
    judgments: BTreeMap<(String, String), DiseaseLabel>,
}

impl AnnotationSet {
    pub fn new(task: TaskKind) -> Self {
        Self {
            task,
            judgments: BTreeMap::new(),
        }
    }

    /// Adds a judgment. Re-adding an identical judgment is a no-op; a
    /// conflicting one is rejected.
    pub fn insert(&mut self, disease: &str, record_id: &str, label: DiseaseLabel) -> Result<()> {
        if self.task == TaskKind::Intuitive && label == DiseaseLabel::U {
            return Err(Error::Constraint(format!(
                "label U for disease `{disease}` record `{record_id}` in an intuitive annotation set"
            )));
        }
        let key = (disease.to_string(), record_id.to_string());
        match self.judgments.get(&key) {
            Some(&existing) if existing != label => Err(Error::Constraint(format!(
                "conflicting judgments {existing} and {label} for disease `{disease}` record `{record_id}`"
            ))),
            _ => {
                self.judgments.insert(key, label);
                Ok(())
            }
        }
    }

    pub fn get(&self, disease: &str, record_id: &str) -> Option<DiseaseLabel> {
        self.judgments
            .get(&(disease.to_string(), record_id.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    /// Iterates `(disease, record id, label)` in (disease, id) order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, DiseaseLabel)> + '_ {
        self.judgments
            .iter()
            .map(|((d, r), &l)| (d.as_str(), r.as_str(), l))
    }

    /// Disease names in sorted order.
    pub fn diseases(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (d, _) in self.judgments.keys() {
            if out.last() != Some(d) {
                out.push(d.clone());
            }
        }
        out
    }

    /// Record id → label for one disease.
    pub fn for_disease(&self, disease: &str) -> BTreeMap<String, DiseaseLabel> {
        self.iter()
            .filter(|(d, _, _)| *d == disease)
            .map(|(_, r, l)| (r.to_string(), l))
            .collect()
    }

    pub fn class_counts(&self) -> BTreeMap<DiseaseLabel, usize> {
        let mut counts = BTreeMap::new();
        for &label in self.judgments.values() {
            *counts.entry(label).or_insert(0) += 1;
        }
        counts
    }

    /// Checks every judged record id exists in `records`.
    pub fn validate_against(&self, records: &[ClinicalRecord]) -> Result<()> {
        let ids: HashSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
        let missing: Vec<String> = self
            .judgments
            .keys()
            .filter(|(_, r)| !ids.contains(r.as_str()))
            .map(|(d, r)| format!("{d}/{r}"))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Constraint(format!(
                "judgments reference unknown records: {}",
                missing.join(", ")
            )))
        }
    }
}

fn xml_error(reader: &Reader<&[u8]>, err: impl fmt::Display) -> Error {
    Error::Xml {
        offset: reader.error_position(),
        message: err.to_string(),
    }
}

fn attribute(reader: &Reader<&[u8]>, start: &BytesStart<'_>, name: &[u8]) -> Result<Option<String>> {
    for attr in start.attributes() {
        let attr = attr.map_err(|e| xml_error(reader, e))?;
        if attr.key.local_name().as_ref() == name {
            let value = attr.unescape_value().map_err(|e| xml_error(reader, e))?;
            return Ok(Some(value.into_owned()));
        }
    }
    Ok(None)
}

fn required_attribute(reader: &Reader<&[u8]>, start: &BytesStart<'_>, name: &[u8]) -> Result<String> {
    attribute(reader, start, name)?.ok_or_else(|| Error::Xml {
        offset: reader.buffer_position(),
        message: format!(
            "<{}> is missing attribute `{}`",
            String::from_utf8_lossy(start.local_name().as_ref()),
            String::from_utf8_lossy(name)
        ),
    })
}

/// Walks every event, tracking element depth so truncated documents are
/// reported rather than silently accepted.
fn walk_xml<'a>(
    bytes: &'a [u8],
    mut on_event: impl FnMut(&Reader<&'a [u8]>, Event<'a>) -> Result<()>,
) -> Result<()> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(false);
    let mut depth = 0usize;
    loop {
        let event = reader.read_event().map_err(|e| xml_error(&reader, e))?;
        match &event {
            Event::Start(_) => depth += 1,
            Event::End(_) => depth = depth.saturating_sub(1),
            Event::Eof => {
                if depth > 0 {
                    return Err(Error::Xml {
                        offset: reader.buffer_position(),
                        message: "unexpected end of document inside an open element".into(),
                    });
                }
                return Ok(());
            }
            _ => {}
        }
        on_event(&reader, event)?;
    }
}

/// Parses a records XML document into records, preserving text whitespace.
pub fn parse_records_xml(bytes: &[u8]) -> Result<Vec<ClinicalRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut current_id: Option<String> = None;
    let mut text: Option<String> = None;
    let mut in_text = false;

    walk_xml(bytes, |reader, event| {
        match event {
            Event::Start(e) => match e.local_name().as_ref() {
                b"doc" => {
                    current_id = Some(required_attribute(reader, &e, b"id")?);
                    text = None;
                }
                b"text" if current_id.is_some() => {
                    in_text = true;
                    text.get_or_insert_with(String::new);
                }
                _ => {}
            },
            Event::Empty(e) if e.local_name().as_ref() == b"doc" => {
                let id = required_attribute(reader, &e, b"id")?;
                return Err(Error::Constraint(format!("record `{id}` has no text")));
            }
            Event::Text(t) if in_text => {
                let s = t.unescape().map_err(|err| xml_error(reader, err))?;
                text.get_or_insert_with(String::new).push_str(&s);
            }
            Event::CData(c) if in_text => {
                let s = c.decode().map_err(|err| xml_error(reader, err))?;
                text.get_or_insert_with(String::new).push_str(&s);
            }
            Event::End(e) => match e.local_name().as_ref() {
                b"text" => in_text = false,
                b"doc" => {
                    let id = current_id.take().unwrap_or_default();
                    let body = text.take().unwrap_or_default();
                    if body.is_empty() {
                        return Err(Error::Constraint(format!("record `{id}` has no text")));
                    }
                    if !seen.insert(id.clone()) {
                        return Err(Error::DuplicateId(id));
                    }
                    records.push(ClinicalRecord { id, text: body });
                }
                _ => {}
            },
            _ => {}
        }
        Ok(())
    })?;
    Ok(records)
}

/// Parses a judgments XML document for one task.
///
/// `<diseases>` blocks whose `source` names the other task are skipped; blocks
/// with no `source` (or an unrecognized one) are read as belonging to `task`.
pub fn parse_annotations_xml(bytes: &[u8], task: TaskKind) -> Result<AnnotationSet> {
    let mut set = AnnotationSet::new(task);
    let mut active = false;
    let mut disease: Option<String> = None;

    walk_xml(bytes, |reader, event| {
        match event {
            Event::Start(e) | Event::Empty(e) => match e.local_name().as_ref() {
                b"diseases" => {
                    active = match attribute(reader, &e, b"source")? {
                        Some(source) => source.parse::<TaskKind>().map_or(true, |t| t == task),
                        None => true,
                    };
                }
                b"disease" => disease = Some(required_attribute(reader, &e, b"name")?),
                b"doc" if active => {
                    let Some(name) = disease.as_deref() else {
                        return Err(Error::Xml {
                            offset: reader.buffer_position(),
                            message: "<doc> judgment outside of a <disease> element".into(),
                        });
                    };
                    let id = required_attribute(reader, &e, b"id")?;
                    let judgment = required_attribute(reader, &e, b"judgment")?;
                    let label: DiseaseLabel = judgment.parse()?;
                    set.insert(name, &id, label)?;
                }
                _ => {}
            },
            Event::End(e) => match e.local_name().as_ref() {
                b"diseases" => active = false,
                b"disease" => disease = None,
                _ => {}
            },
            _ => {}
        }
        Ok(())
    })?;
    Ok(set)
}

fn escape(s: &str) -> std::borrow::Cow<'_, str> {
    quick_xml::escape::escape(s)
}

/// Serializes records in the layout `parse_records_xml` reads.
pub fn records_to_xml(records: &[ClinicalRecord]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<root>\n<docs>\n");
    for r in records {
        out.push_str(&format!(
            "<doc id=\"{}\">\n<text>{}</text>\n</doc>\n",
            escape(&r.id),
            escape(&r.text)
        ));
    }
    out.push_str("</docs>\n</root>\n");
    out
}

/// Serializes one or more annotation sets into a single judgments document,
/// one `<diseases source="...">` block per set.
pub fn annotations_to_xml(sets: &[&AnnotationSet]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<diseaseset>\n");
    for set in sets {
        out.push_str(&format!("<diseases source=\"{}\">\n", set.task.name()));
        for disease in set.diseases() {
            out.push_str(&format!("<disease name=\"{}\">\n", escape(&disease)));
            for (id, label) in set.for_disease(&disease) {
                out.push_str(&format!(
                    "<doc id=\"{}\" judgment=\"{}\"/>\n",
                    escape(&id),
                    label
                ));
            }
            out.push_str("</disease>\n");
        }
        out.push_str("</diseases>\n");
    }
    out.push_str("</diseaseset>\n");
    out
}

#[derive(Serialize, Deserialize)]
struct JsonlRow {
    id: String,
    text: String,
    labels: BTreeMap<String, String>,
}

/// Reads a JSONL corpus. Labels are interpreted for `task`.
pub fn read_jsonl_corpus(path: &Path, task: TaskKind) -> Result<(Vec<ClinicalRecord>, AnnotationSet)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let display = path.display().to_string();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut set = AnnotationSet::new(task);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonlRow = serde_json::from_str(&line)
            .map_err(|e| Error::format(&display, line_no, e.to_string()))?;
        if row.text.is_empty() {
            return Err(Error::format(&display, line_no, "empty text"));
        }
        if !seen.insert(row.id.clone()) {
            return Err(Error::DuplicateId(row.id));
        }
        for (disease, label) in &row.labels {
            let label: DiseaseLabel = label
                .parse()
                .map_err(|e: Error| Error::format(&display, line_no, e.to_string()))?;
            set.insert(disease, &row.id, label)
                .map_err(|e| Error::format(&display, line_no, e.to_string()))?;
        }
        records.push(ClinicalRecord {
            id: row.id,
            text: row.text,
        });
    }
    Ok((records, set))
}

pub fn write_jsonl_corpus(path: &Path, records: &[ClinicalRecord], annotations: &AnnotationSet) -> Result<()> {
    let mut by_record: BTreeMap<&str, BTreeMap<String, String>> = BTreeMap::new();
    for (disease, id, label) in annotations.iter() {
        by_record
            .entry(id)
            .or_default()
            .insert(disease.to_string(), label.to_string());
    }
    let mut out = Vec::new();
    for r in records {
        let row = JsonlRow {
            id: r.id.clone(),
            text: r.text.clone(),
            labels: by_record.remove(r.id.as_str()).unwrap_or_default(),
        };
        serde_json::to_writer(&mut out, &row).map_err(|e| Error::Internal(e.to_string()))?;
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Per-disease `(record, gold label)` pairs a learned model is trained on.
///
/// Textual keeps Y/U, intuitive keeps Y/N. Records with no judgment for a
/// disease are left out of that disease.
pub fn build_training_set<'a>(
    records: &'a [ClinicalRecord],
    annotations: &AnnotationSet,
    task: TaskKind,
) -> BTreeMap<String, Vec<(&'a ClinicalRecord, DiseaseLabel)>> {
    let mut out: BTreeMap<String, Vec<(&ClinicalRecord, DiseaseLabel)>> = BTreeMap::new();
    for disease in annotations.diseases() {
        let gold = annotations.for_disease(&disease);
        let pairs = records
            .iter()
            .filter_map(|r| gold.get(&r.id).map(|&l| (r, l)))
            .filter(|&(_, l)| task.is_trainable(l))
            .collect();
        out.insert(disease, pairs);
    }
    out
}
