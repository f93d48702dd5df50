//! Entity resolution and demographic labels.
//!
//! Each example is attributed to the person entities of exactly one field,
//! searched in the order answer, question, document title. Their raw
//! knowledge-base values are collapsed through [`CollapseTable`]s, merged into
//! a single label per characteristic, and finally rare labels are pooled into
//! `others` over the whole analyzed fold.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{EntityMention, QAExample};
use crate::error::{Error, Result};

pub const NOT_FOUND: &str = "not_found";
pub const OTHERS: &str = "others";
pub const MULTI_DELIMITER: &str = "+";
pub const DEFAULT_OTHERS_MIN: usize = 15;

const SHIPPED_NATIONALITY: &str = include_str!("../data/nationality.tsv");
const SHIPPED_PROFESSION: &str = include_str!("../data/profession.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Characteristic {
    Gender,
    Nationality,
    Profession,
}

impl Characteristic {
    pub const ALL: [Characteristic; 3] = [
        Characteristic::Gender,
        Characteristic::Nationality,
        Characteristic::Profession,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Characteristic::Gender => "gender",
            Characteristic::Nationality => "nationality",
            Characteristic::Profession => "profession",
        }
    }

    /// Prefix of the binary regression features for this characteristic.
    pub fn feature_prefix(self) -> &'static str {
        match self {
            Characteristic::Gender => "g",
            Characteristic::Nationality => "n",
            Characteristic::Profession => "o",
        }
    }
}

impl fmt::Display for Characteristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Characteristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gender" => Ok(Characteristic::Gender),
            "nationality" => Ok(Characteristic::Nationality),
            "profession" => Ok(Characteristic::Profession),
            other => Err(Error::Config(format!("unknown characteristic {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub entity_id: String,
    pub name: String,
    pub gender: Vec<String>,
    pub nationality: Vec<String>,
    pub profession: Vec<String>,
}

impl EntityRecord {
    pub fn values(&self, characteristic: Characteristic) -> &[String] {
        match characteristic {
            Characteristic::Gender => &self.gender,
            Characteristic::Nationality => &self.nationality,
            Characteristic::Profession => &self.profession,
        }
    }

    /// One pipe-delimited attribute-store row.
    pub fn to_row(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}",
            self.entity_id,
            self.name,
            self.gender.join(","),
            self.nationality.join(","),
            self.profession.join(",")
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct AttributeStore {
    records: HashMap<String, EntityRecord>,
    /// Rows whose entity id had already been seen (last row wins).
    pub duplicate_warnings: usize,
}

impl AttributeStore {
    /// Parses `entity_id|name|genders|nationalities|professions` rows, lists
    /// comma-separated. Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut store = AttributeStore::default();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('|').map(str::trim).collect();
            let malformed = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            };
            if fields.len() != 5 {
                return Err(malformed(format!(
                    "expected 5 pipe-delimited fields, found {}",
                    fields.len()
                )));
            }
            if fields[0].is_empty() {
                return Err(malformed("empty entity id".into()));
            }
            let list = |s: &str| -> Vec<String> {
                s.split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(str::to_owned)
                    .collect()
            };
            let record = EntityRecord {
                entity_id: fields[0].to_owned(),
                name: fields[1].to_owned(),
                gender: list(fields[2]),
                nationality: list(fields[3]),
                profession: list(fields[4]),
            };
            if store.records.insert(record.entity_id.clone(), record).is_some() {
                store.duplicate_warnings += 1;
            }
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let store = Self::parse(&text, path)?;
        if store.duplicate_warnings > 0 {
            log::warn!(
                "[load] {}: {} duplicate entity rows (last wins)",
                path.display(),
                store.duplicate_warnings
            );
        }
        log::info!("[load] {} entities from {}", store.len(), path.display());
        Ok(store)
    }

    pub fn from_records(records: impl IntoIterator<Item = EntityRecord>) -> Self {
        let mut store = AttributeStore::default();
        for r in records {
            if store.records.insert(r.entity_id.clone(), r).is_some() {
                store.duplicate_warnings += 1;
            }
        }
        store
    }

    pub fn get(&self, entity_id: &str) -> Option<&EntityRecord> {
        self.records.get(entity_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn load_attribute_store(path: &Path) -> Result<AttributeStore> {
    AttributeStore::load(path)
}

/// Case-insensitive map from raw knowledge-base values to canonical labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollapseTable {
    pub characteristic: Characteristic,
    entries: BTreeMap<String, String>,
    /// Lowercased canonical label to its display form.
    canonical: BTreeMap<String, String>,
    /// Keys that appeared more than once in the source file.
    duplicates: Vec<String>,
}

impl CollapseTable {
    /// Parses `raw_value<TAB>canonical_label` lines.
    pub fn parse(characteristic: Characteristic, text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut canonical = BTreeMap::new();
        let mut duplicates = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (raw, label) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "expected raw_value<TAB>canonical_label".into(),
            })?;
            let (raw, label) = (raw.trim(), label.trim());
            if raw.is_empty() || label.is_empty() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: "empty raw value or label".into(),
                });
            }
            let key = raw.to_lowercase();
            if entries.insert(key.clone(), label.to_owned()).is_some() {
                duplicates.push(key);
            }
            canonical.insert(label.to_lowercase(), label.to_owned());
        }
        Ok(Self {
            characteristic,
            entries,
            canonical,
            duplicates,
        })
    }

    pub fn load(characteristic: Characteristic, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(characteristic, &text, path)
    }

    pub fn shipped(characteristic: Characteristic) -> Option<Self> {
        let text = match characteristic {
            Characteristic::Gender => return None,
            Characteristic::Nationality => SHIPPED_NATIONALITY,
            Characteristic::Profession => SHIPPED_PROFESSION,
        };
        let path = format!("<shipped>/{characteristic}.tsv");
        Some(Self::parse(characteristic, text, Path::new(&path)).expect("shipped table parses"))
    }

    /// Canonical label for `raw`. A value that already spells a canonical
    /// label (in any case) maps to that label; unknown values pass through
    /// lowercased.
    pub fn collapse(&self, raw: &str) -> String {
        let key = raw.trim().to_lowercase();
        if let Some(label) = self.entries.get(&key) {
            return label.clone();
        }
        if let Some(label) = self.canonical.get(&key) {
            return label.clone();
        }
        key
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.canonical.values().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Problems that make the table unsafe to use: duplicate keys, and keys
    /// or labels whose collapse is not idempotent.
    pub fn check(&self) -> Vec<String> {
        let mut issues: Vec<String> = self
            .duplicates
            .iter()
            .map(|k| format!("{}: duplicate key {k:?}", self.characteristic))
            .collect();
        for (raw, label) in &self.entries {
            let once = self.collapse(raw);
            let twice = self.collapse(&once);
            if once != twice {
                issues.push(format!(
                    "{}: {raw:?} -> {once:?} -> {twice:?} is not idempotent",
                    self.characteristic
                ));
            }
            if let Some(target) = self.entries.get(&label.to_lowercase()) {
                if target != label {
                    issues.push(format!(
                        "{}: canonical label {label:?} is itself a key mapping to {target:?}",
                        self.characteristic
                    ));
                }
            }
        }
        for label in self.canonical.values() {
            let res = self.collapse(label);
            if &res != label {
                issues.push(format!(
                    "{}: canonical label {label:?} collapses to {res:?}",
                    self.characteristic
                ));
            }
        }
        issues
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollapseTables {
    pub nationality: CollapseTable,
    pub profession: CollapseTable,
}

impl CollapseTables {
    pub fn shipped() -> Self {
        Self {
            nationality: CollapseTable::shipped(Characteristic::Nationality).unwrap(),
            profession: CollapseTable::shipped(Characteristic::Profession).unwrap(),
        }
    }

    /// Loads `nationality.tsv` and `profession.tsv` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        Ok(Self {
            nationality: CollapseTable::load(
                Characteristic::Nationality,
                &dir.join("nationality.tsv"),
            )?,
            profession: CollapseTable::load(
                Characteristic::Profession,
                &dir.join("profession.tsv"),
            )?,
        })
    }

    pub fn get(&self, characteristic: Characteristic) -> Option<&CollapseTable> {
        match characteristic {
            Characteristic::Gender => None,
            Characteristic::Nationality => Some(&self.nationality),
            Characteristic::Profession => Some(&self.profession),
        }
    }

    /// Canonical value; gender has no table and is only lowercased.
    pub fn collapse(&self, characteristic: Characteristic, raw: &str) -> String {
        match self.get(characteristic) {
            Some(table) => table.collapse(raw),
            None => raw.trim().to_lowercase(),
        }
    }

    pub fn check(&self) -> Vec<String> {
        let mut issues = self.nationality.check();
        issues.extend(self.profession.check());
        issues
    }
}

impl Default for CollapseTables {
    fn default() -> Self {
        Self::shipped()
    }
}

pub fn collapse_value(table: &CollapseTable, raw: &str) -> String {
    table.collapse(raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceField {
    Answer,
    Question,
    Title,
    None,
}

impl fmt::Display for SourceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceField::Answer => "answer",
            SourceField::Question => "question",
            SourceField::Title => "title",
            SourceField::None => "none",
        })
    }
}

/// First field (answer, question, title) holding a person mention, with all
/// distinct person entities of that field in mention order.
pub fn select_entity_field(example: &QAExample) -> (SourceField, Vec<String>) {
    let fields: [(SourceField, &[EntityMention]); 3] = [
        (SourceField::Answer, &example.mentions.answer),
        (SourceField::Question, &example.mentions.question),
        (SourceField::Title, &example.mentions.title),
    ];
    for (field, mentions) in fields {
        let mut ids: Vec<String> = Vec::new();
        for m in mentions.iter().filter(|m| m.is_person) {
            if !ids.contains(&m.entity_id) {
                ids.push(m.entity_id.clone());
            }
        }
        if !ids.is_empty() {
            return (field, ids);
        }
    }
    (SourceField::None, Vec::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Single,
    Concatenated,
    Others,
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub value: String,
    pub kind: LabelKind,
    /// Canonical values the label was built from (sorted, deduplicated).
    pub constituents: Vec<String>,
}

impl Label {
    pub fn not_found() -> Self {
        Self {
            value: NOT_FOUND.into(),
            kind: LabelKind::NotFound,
            constituents: Vec::new(),
        }
    }
}

/// Merges the collapsed values of every entity into one label. Multiple
/// distinct values are sorted and joined with `+`.
pub fn assemble_label(
    entities: &[&EntityRecord],
    characteristic: Characteristic,
    tables: &CollapseTables,
) -> Label {
    let values: BTreeSet<String> = entities
        .iter()
        .flat_map(|e| e.values(characteristic))
        .map(|raw| tables.collapse(characteristic, raw))
        .filter(|v| !v.is_empty())
        .collect();
    let constituents: Vec<String> = values.into_iter().collect();
    match constituents.len() {
        0 => Label::not_found(),
        1 => Label {
            value: constituents[0].clone(),
            kind: LabelKind::Single,
            constituents,
        },
        _ => Label {
            value: constituents.join(MULTI_DELIMITER),
            kind: LabelKind::Concatenated,
            constituents,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicAssignment {
    pub example_id: String,
    pub entity_ids: Vec<String>,
    pub source_field: SourceField,
    pub labels: BTreeMap<Characteristic, Label>,
}

impl DemographicAssignment {
    pub fn label(&self, characteristic: Characteristic) -> &Label {
        &self.labels[&characteristic]
    }
}

/// Attributes one example. Person entities missing from the store contribute
/// no values.
pub fn assign_example(
    example: &QAExample,
    store: &AttributeStore,
    tables: &CollapseTables,
) -> DemographicAssignment {
    let (source_field, entity_ids) = select_entity_field(example);
    let records: Vec<&EntityRecord> = entity_ids.iter().filter_map(|id| store.get(id)).collect();
    let labels = Characteristic::ALL
        .iter()
        .map(|&c| (c, assemble_label(&records, c, tables)))
        .collect();
    DemographicAssignment {
        example_id: example.id.clone(),
        entity_ids,
        source_field,
        labels,
    }
}

/// Replaces every label seen fewer than `min_count` times in `assignments`
/// with `others`. `not_found` is never bucketed.
pub fn apply_others_bucket(
    assignments: &mut [DemographicAssignment],
    characteristic: Characteristic,
    min_count: usize,
) {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for a in assignments.iter() {
        *counts.entry(a.label(characteristic).value.clone()).or_default() += 1;
    }
    for a in assignments.iter_mut() {
        let label = a.labels.get_mut(&characteristic).expect("label assembled");
        if label.kind != LabelKind::NotFound && counts[&label.value] < min_count {
            *label = Label {
                value: OTHERS.into(),
                kind: LabelKind::Others,
                constituents: Vec::new(),
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Mentions;

    fn record(id: &str, gender: &[&str], nat: &[&str], prof: &[&str]) -> EntityRecord {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        EntityRecord {
            entity_id: id.into(),
            name: id.into(),
            gender: v(gender),
            nationality: v(nat),
            profession: v(prof),
        }
    }

    fn example_with(mentions: Mentions) -> QAExample {
        QAExample {
            id: "x".into(),
            question: "q".into(),
            answers: vec!["a".into()],
            doc_title: String::new(),
            correct: true,
            mentions,
            evidence_sentence: None,
        }
    }

    #[test]
    fn store_parses_rows_and_counts_duplicates() {
        let text = "Q7243|Guru Nanak|male|india|religious leader\n\nQ1|A|female|france, kingdom of france|poet,writer\nQ1|A2|female||\n";
        let store = AttributeStore::parse(text, Path::new("kb")).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.duplicate_warnings, 1);
        let nanak = store.get("Q7243").unwrap();
        assert_eq!(nanak.name, "Guru Nanak");
        assert_eq!(nanak.gender, ["male"]);
        assert_eq!(nanak.nationality, ["india"]);
        assert_eq!(nanak.profession, ["religious leader"]);
        assert_eq!(nanak.to_row(), "Q7243|Guru Nanak|male|india|religious leader");
        assert_eq!(store.get("Q1").unwrap().name, "A2");
        assert!(AttributeStore::parse("", Path::new("kb")).unwrap().is_empty());
    }

    #[test]
    fn store_rejects_malformed_rows() {
        let err = AttributeStore::parse("Q1|a|b|c|d\nQ2|only|three\n", Path::new("kb")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(AttributeStore::parse("|a|b|c|d\n", Path::new("kb")).is_err());
    }

    #[test]
    fn field_precedence_examples() {
        let nanak = example_with(Mentions {
            answer: vec![EntityMention::person("Q7243", "Guru Nanak")],
            question: vec![EntityMention::other("Q9316", "Sikhism")],
            title: vec![],
        });
        assert_eq!(
            select_entity_field(&nanak),
            (SourceField::Answer, vec!["Q7243".to_string()])
        );

        let barton = example_with(Mentions {
            answer: vec![EntityMention::other("Q1", "American Red Cross")],
            question: vec![EntityMention::person("Q233", "Clara Barton")],
            title: vec![EntityMention::person("Q999", "Someone")],
        });
        assert_eq!(
            select_entity_field(&barton),
            (SourceField::Question, vec!["Q233".to_string()])
        );

        let soyinka = example_with(Mentions {
            answer: vec![EntityMention::other("Q2", "King Baabu")],
            question: vec![EntityMention::other("Q3", "Lagos")],
            title: vec![EntityMention::person("Q37", "Wole Soyinka")],
        });
        assert_eq!(
            select_entity_field(&soyinka),
            (SourceField::Title, vec!["Q37".to_string()])
        );

        assert_eq!(
            select_entity_field(&example_with(Mentions::default())),
            (SourceField::None, vec![])
        );
    }

    #[test]
    fn all_persons_of_the_field_are_kept_once() {
        let ex = example_with(Mentions {
            answer: vec![
                EntityMention::person("Q1", "Todd Lodwick"),
                EntityMention::person("Q2", "Julie Chu"),
                EntityMention::person("Q1", "Lodwick"),
            ],
            ..Default::default()
        });
        assert_eq!(select_entity_field(&ex).1, ["Q1", "Q2"]);
    }

    #[test]
    fn collapse_examples() {
        let tables = CollapseTables::shipped();
        assert_eq!(tables.nationality.collapse("kingdom of france"), "France");
        assert_eq!(tables.nationality.collapse("Kingdom Of France"), "France");
        assert_eq!(tables.profession.collapse("poet"), "Writing");
        assert_eq!(tables.nationality.collapse("atlantis"), "atlantis");
        assert_eq!(tables.nationality.collapse("Atlantis"), "atlantis");
        assert_eq!(tables.nationality.collapse("netherlands"), "Netherlands");
        assert_eq!(tables.collapse(Characteristic::Gender, "Female"), "female");
    }

    #[test]
    fn labels_single_concatenated_and_missing() {
        let tables = CollapseTables::shipped();
        let a = record("a", &["male"], &["united states of america"], &[]);
        let b = record("b", &["male"], &["united kingdom"], &["poet", "novelist"]);

        let l = assemble_label(&[&a], Characteristic::Gender, &tables);
        assert_eq!((l.value.as_str(), l.kind), ("male", LabelKind::Single));

        for order in [[&a, &b], [&b, &a]] {
            let l = assemble_label(&order, Characteristic::Nationality, &tables);
            assert_eq!((l.value.as_str(), l.kind), ("UK+US", LabelKind::Concatenated));
            assert_eq!(l.constituents, ["UK", "US"]);
        }

        let l = assemble_label(&[&a], Characteristic::Profession, &tables);
        assert_eq!(l, Label::not_found());

        // poet and novelist collapse to the same label
        let l = assemble_label(&[&b], Characteristic::Profession, &tables);
        assert_eq!((l.value.as_str(), l.kind), ("Writing", LabelKind::Single));
    }

    fn assignments(labels: &[(&str, usize)]) -> Vec<DemographicAssignment> {
        let mut out = Vec::new();
        for (value, n) in labels {
            for i in 0..*n {
                let label = if *value == NOT_FOUND {
                    Label::not_found()
                } else {
                    Label {
                        value: value.to_string(),
                        kind: LabelKind::Single,
                        constituents: vec![value.to_string()],
                    }
                };
                out.push(DemographicAssignment {
                    example_id: format!("{value}{i}"),
                    entity_ids: vec![],
                    source_field: SourceField::Answer,
                    labels: Characteristic::ALL
                        .iter()
                        .map(|&c| (c, label.clone()))
                        .collect(),
                });
            }
        }
        out
    }

    #[test]
    fn others_bucket_boundary() {
        let mut a = assignments(&[("kept", 15), ("rare", 14), (NOT_FOUND, 3)]);
        apply_others_bucket(&mut a, Characteristic::Gender, DEFAULT_OTHERS_MIN);
        let count = |v: &str| {
            a.iter()
                .filter(|x| x.label(Characteristic::Gender).value == v)
                .count()
        };
        assert_eq!(count("kept"), 15);
        assert_eq!(count("rare"), 0);
        assert_eq!(count(OTHERS), 14);
        assert_eq!(count(NOT_FOUND), 3);
        // other characteristics untouched
        assert!(a.iter().any(|x| x.label(Characteristic::Profession).value == "rare"));
    }

    #[test]
    fn shipped_tables_are_clean() {
        assert!(CollapseTables::shipped().check().is_empty());
        assert_eq!(CollapseTables::shipped().nationality.len(), 86);
        assert_eq!(CollapseTables::shipped().profession.len(), 517);
    }

    #[test]
    fn check_reports_duplicates_and_chains() {
        let text = "a\tB\na\tB\nb\tD\n";
        let t = CollapseTable::parse(Characteristic::Profession, text, Path::new("t")).unwrap();
        let issues = t.check();
        assert!(issues.iter().any(|i| i.contains("duplicate")), "{issues:?}");
        assert!(issues.iter().any(|i| i.contains("not idempotent")), "{issues:?}");
    }
}
