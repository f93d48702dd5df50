//! QA examples, their pre-linked entity mentions, and training-fold entity counts.
//!
//! Datasets are line-delimited JSON, one example per line:
//!
//! ```json
//! {"id": "q1", "question": "who founded sikhism?", "answers": ["Guru Nanak"],
//!  "doc_title": "Sikhism", "correct": 1,
//!  "mentions": {"answer": [{"entity_id": "Q7243", "surface": "Guru Nanak", "is_person": true}],
//!               "question": [], "title": []},
//!  "evidence_sentence": "Sikhism was founded by Guru Nanak."}
//! ```
//!
//! `evidence_sentence` is optional. Blank lines are skipped.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fold {
    Train,
    Dev,
}

impl fmt::Display for Fold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fold::Train => "train",
            Fold::Dev => "dev",
        })
    }
}

impl FromStr for Fold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Fold::Train),
            "dev" => Ok(Fold::Dev),
            other => Err(Error::Config(format!("unknown fold {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub entity_id: String,
    pub surface: String,
    pub is_person: bool,
}

impl EntityMention {
    pub fn person(entity_id: impl Into<String>, surface: impl Into<String>) -> Self {
        Self {
            entity_id: entity_id.into(),
            surface: surface.into(),
            is_person: true,
        }
    }

    pub fn other(entity_id: impl Into<String>, surface: impl Into<String>) -> Self {
        Self {
            entity_id: entity_id.into(),
            surface: surface.into(),
            is_person: false,
        }
    }
}

/// Mentions per field, in the order the entity search visits them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mentions {
    #[serde(default)]
    pub answer: Vec<EntityMention>,
    #[serde(default)]
    pub question: Vec<EntityMention>,
    #[serde(default)]
    pub title: Vec<EntityMention>,
}

impl Mentions {
    pub fn all(&self) -> impl Iterator<Item = &EntityMention> {
        self.answer
            .iter()
            .chain(self.question.iter())
            .chain(self.title.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAExample {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    #[serde(default)]
    pub doc_title: String,
    /// Exact-match correctness of the audited model, serialized as 0/1.
    #[serde(with = "zero_one")]
    pub correct: bool,
    #[serde(default)]
    pub mentions: Mentions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_sentence: Option<String>,
}

impl QAExample {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.answers.is_empty() {
            return Err(format!("example {:?} has no answers", self.id));
        }
        if self.answers.iter().any(|a| a.trim().is_empty()) {
            return Err(format!("example {:?} has an empty answer", self.id));
        }
        if self.mentions.all().any(|m| m.entity_id.is_empty()) {
            return Err(format!("example {:?} has a mention with empty entity_id", self.id));
        }
        Ok(())
    }
}

mod zero_one {
    use serde::de::{self, Deserializer, Unexpected};
    use serde::{Deserialize, Serializer};

    pub fn serialize<S: Serializer>(value: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u64::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            n => Err(de::Error::invalid_value(
                Unexpected::Unsigned(n),
                &"0 or 1",
            )),
        }
    }
}

/// Parses line-delimited examples. `path` is used only in error messages.
pub fn parse_dataset(text: &str, path: &Path) -> Result<Vec<QAExample>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let example: QAExample = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        example.validate().map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        })?;
        if !seen.insert(example.id.clone()) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                line: line_no,
                id: example.id,
            });
        }
        out.push(example);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path, fold: Fold) -> Result<Vec<QAExample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let examples = parse_dataset(&text, path)?;
    log::info!(
        "[load] {} fold: {} examples from {}",
        fold,
        examples.len(),
        path.display()
    );
    Ok(examples)
}

pub fn write_dataset<W: Write>(mut w: W, examples: &[QAExample]) -> std::io::Result<()> {
    for ex in examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Lowercases and splits on every maximal run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Number of training examples each entity is mentioned in.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainCountIndex {
    counts: HashMap<String, u32>,
}

impl TrainCountIndex {
    pub fn build(train: &[QAExample]) -> Self {
        let mut counts: HashMap<String, u32> = HashMap::new();
        for ex in train {
            let distinct: HashSet<&str> = ex.mentions.all().map(|m| m.entity_id.as_str()).collect();
            for id in distinct {
                *counts.entry(id.to_owned()).or_default() += 1;
            }
        }
        Self { counts }
    }

    pub fn count(&self, entity_id: &str) -> u32 {
        self.counts.get(entity_id).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

pub fn build_train_count_index(train: &[QAExample]) -> TrainCountIndex {
    TrainCountIndex::build(train)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str) -> String {
        format!(
            r#"{{"id":"{id}","question":"q?","answers":["a"],"doc_title":"","correct":1,"mentions":{{"answer":[],"question":[],"title":[]}}}}"#
        )
    }

    fn example(id: &str, entities: &[&[&str]]) -> QAExample {
        let fields: Vec<Vec<EntityMention>> = entities
            .iter()
            .map(|f| f.iter().map(|e| EntityMention::person(*e, *e)).collect())
            .collect();
        QAExample {
            id: id.into(),
            question: "q".into(),
            answers: vec!["a".into()],
            doc_title: String::new(),
            correct: true,
            mentions: Mentions {
                answer: fields.first().cloned().unwrap_or_default(),
                question: fields.get(1).cloned().unwrap_or_default(),
                title: fields.get(2).cloned().unwrap_or_default(),
            },
            evidence_sentence: None,
        }
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        assert!(parse_dataset("", Path::new("x")).unwrap().is_empty());
    }

    #[test]
    fn preserves_file_order() {
        let text = [line("c"), line("a"), line("b")].join("\n");
        let ids: Vec<_> = parse_dataset(&text, Path::new("x"))
            .unwrap()
            .into_iter()
            .map(|e| e.id)
            .collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }

    #[test]
    fn duplicate_id_names_id_and_line() {
        let text = [line("q0"), line("q1"), line("q2"), line("q3"), line("q1")].join("\n");
        match parse_dataset(&text, Path::new("dev.jsonl")) {
            Err(Error::DuplicateId { line, id, .. }) => {
                assert_eq!(id, "q1");
                assert_eq!(line, 5);
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_names_line_number() {
        let text = format!("{}\n{{not json\n", line("a"));
        let err = parse_dataset(&text, Path::new("d")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn rejects_bad_records() {
        let bad_correct = line("a").replace(r#""correct":1"#, r#""correct":2"#);
        let no_answers = line("a").replace(r#"["a"]"#, "[]");
        let blank_answer = line("a").replace(r#"["a"]"#, r#"["  "]"#);
        let empty_id = line("");
        for text in [bad_correct, no_answers, blank_answer, empty_id] {
            assert!(parse_dataset(&text, Path::new("d")).is_err(), "{text}");
        }
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Who founded Sikhism?"), ["who", "founded", "sikhism"]);
        let toks = tokenize("For 10 points, name this writer who...");
        assert!(toks[..10.min(toks.len())].contains(&"who".to_string()));
        assert_eq!(toks[6], "who");
    }

    #[test]
    fn train_counts_once_per_example() {
        let train = vec![
            example("1", &[&["Q1", "Q1"], &["Q1"]]),
            example("2", &[&[], &["Q1"]]),
            example("3", &[&[], &[], &["Q1", "Q2"]]),
        ];
        let idx = build_train_count_index(&train);
        assert_eq!(idx.count("Q1"), 3);
        assert_eq!(idx.count("Q2"), 1);
        assert_eq!(idx.count("absent"), 0);
        assert_eq!(build_train_count_index(&[]).count("Q1"), 0);
    }
}
