//! Regression features per example and the design matrix built from them.
//!
//! Difficulty features: `q_sim`, `e_train_count`, `t_who`, `t_what`, `t_when`,
//! `t_where`. Multiplicity: `multi_entities`, `multi_answers` (log2 counts).
//! Demographic flags: `g_*`, `n_*`, `o_*` for the characteristics enabled by
//! χ² screening.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::attributes::{Characteristic, DemographicAssignment, LabelKind};
use crate::corpus::{tokenize, QAExample, TrainCountIndex};
use crate::error::{Error, Result};

pub const WH_WORDS: [&str; 4] = ["who", "what", "when", "where"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainCountRule {
    /// Every linked entity must be frequent.
    #[default]
    All,
    /// At least one linked entity must be frequent.
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Characteristics that get demographic flags; filled from χ² screening.
    pub enabled: BTreeSet<Characteristic>,
    pub wh_window: usize,
    pub train_count_threshold: u32,
    pub train_count_rule: TrainCountRule,
    pub include_quadratic: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            enabled: BTreeSet::new(),
            wh_window: 10,
            train_count_threshold: 2,
            train_count_rule: TrainCountRule::All,
            include_quadratic: false,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.wh_window == 0 {
            return Err(Error::Config("wh_window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Jaccard similarity of the question and evidence token sets; 0 without evidence.
pub fn feat_q_sim(question: &str, evidence: Option<&str>) -> f64 {
    let Some(evidence) = evidence else {
        return 0.0;
    };
    let a: HashSet<String> = tokenize(question).into_iter().collect();
    let b: HashSet<String> = tokenize(evidence).into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// 1 when the linked entities occur in more than `threshold` training examples.
pub fn feat_train_count(
    entity_ids: &[String],
    index: &TrainCountIndex,
    threshold: u32,
    rule: TrainCountRule,
) -> f64 {
    if entity_ids.is_empty() {
        return 0.0;
    }
    let frequent = |id: &String| index.count(id) > threshold;
    let hit = match rule {
        TrainCountRule::All => entity_ids.iter().all(frequent),
        TrainCountRule::Any => entity_ids.iter().any(frequent),
    };
    f64::from(u8::from(hit))
}

/// `t_who`, `t_what`, `t_when`, `t_where`: exact token match within the first
/// `window` tokens.
pub fn feat_wh(tokens: &[String], window: usize) -> [(&'static str, f64); 4] {
    let head = &tokens[..window.min(tokens.len())];
    let flag = |w: &str| f64::from(u8::from(head.iter().any(|t| t == w)));
    [
        ("t_who", flag("who")),
        ("t_what", flag("what")),
        ("t_when", flag("when")),
        ("t_where", flag("where")),
    ]
}

/// (`multi_entities`, `multi_answers`) = (log2 max(n_entities, 1), log2 n_answers).
pub fn feat_multiplicity(n_entities: usize, n_answers: usize) -> (f64, f64) {
    (
        (n_entities.max(1) as f64).log2(),
        (n_answers.max(1) as f64).log2(),
    )
}

/// Feature-name form of a label: lowercase, non-alphanumeric runs become `_`.
pub fn feature_slug(label: &str) -> String {
    let mut out = String::new();
    for part in label
        .split(|c: char| !c.is_alphanumeric())
        .filter(|p| !p.is_empty())
    {
        if !out.is_empty() {
            out.push('_');
        }
        out.push_str(&part.to_lowercase());
    }
    out
}

pub fn demographic_feature_name(characteristic: Characteristic, value: &str) -> String {
    format!("{}_{}", characteristic.feature_prefix(), feature_slug(value))
}

/// The demographic flags set to 1 for this assignment. A concatenated label
/// raises each constituent's flag plus `<prefix>_multi`.
pub fn feat_demographics(
    assignment: &DemographicAssignment,
    config: &FeatureConfig,
) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for &c in &config.enabled {
        let label = assignment.label(c);
        match label.kind {
            LabelKind::Concatenated => {
                for v in &label.constituents {
                    out.insert(demographic_feature_name(c, v), 1.0);
                }
                out.insert(demographic_feature_name(c, "multi"), 1.0);
            }
            LabelKind::Single | LabelKind::Others | LabelKind::NotFound => {
                out.insert(demographic_feature_name(c, &label.value), 1.0);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub example_id: String,
    pub values: BTreeMap<String, f64>,
    pub outcome: bool,
}

pub fn extract_features(
    example: &QAExample,
    assignment: &DemographicAssignment,
    index: &TrainCountIndex,
    config: &FeatureConfig,
) -> FeatureVector {
    let mut values = BTreeMap::new();
    values.insert(
        "q_sim".to_owned(),
        feat_q_sim(&example.question, example.evidence_sentence.as_deref()),
    );
    values.insert(
        "e_train_count".to_owned(),
        feat_train_count(
            &assignment.entity_ids,
            index,
            config.train_count_threshold,
            config.train_count_rule,
        ),
    );
    for (name, v) in feat_wh(&tokenize(&example.question), config.wh_window) {
        values.insert(name.to_owned(), v);
    }
    let (multi_entities, multi_answers) =
        feat_multiplicity(assignment.entity_ids.len(), example.answers.len());
    values.insert("multi_entities".to_owned(), multi_entities);
    values.insert("multi_answers".to_owned(), multi_answers);
    values.extend(feat_demographics(assignment, config));
    FeatureVector {
        example_id: example.id.clone(),
        values,
        outcome: example.correct,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    /// Column names in lexicographic order.
    pub names: Vec<String>,
    pub example_ids: Vec<String>,
    /// Row-major, `example_ids.len() × names.len()`.
    pub data: Vec<f64>,
    pub outcome: Vec<f64>,
    /// Columns dropped because they were zero for every example.
    pub dropped: Vec<String>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.example_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.get(r, col)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, cols: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(self.n_rows() * cols.len());
        for r in 0..self.n_rows() {
            data.extend(cols.iter().map(|&c| self.get(r, c)));
        }
        FeatureMatrix {
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            example_ids: self.example_ids.clone(),
            data,
            outcome: self.outcome.clone(),
            dropped: Vec::new(),
        }
    }

    /// Header `id`, feature names, `correct`; one row per example.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("id");
        for n in &self.names {
            out.push('\t');
            out.push_str(n);
        }
        out.push_str("\tcorrect\n");
        for r in 0..self.n_rows() {
            out.push_str(&self.example_ids[r]);
            for c in 0..self.n_cols() {
                let _ = write!(out, "\t{}", self.get(r, c));
            }
            let _ = writeln!(out, "\t{}", self.outcome[r]);
        }
        out
    }
}

pub fn build_matrix(
    examples: &[QAExample],
    assignments: &[DemographicAssignment],
    index: &TrainCountIndex,
    config: &FeatureConfig,
) -> Result<FeatureMatrix> {
    config.validate()?;
    if examples.len() != assignments.len() {
        return Err(Error::Misaligned(format!(
            "{} examples but {} assignments",
            examples.len(),
            assignments.len()
        )));
    }
    let mut vectors = Vec::with_capacity(examples.len());
    for (ex, a) in examples.iter().zip(assignments) {
        if ex.id != a.example_id {
            return Err(Error::Misaligned(format!(
                "example {:?} paired with assignment {:?}",
                ex.id, a.example_id
            )));
        }
        let mut v = extract_features(ex, a, index, config);
        if config.include_quadratic {
            add_pairwise_products(&mut v.values);
        }
        vectors.push(v);
    }
    Ok(assemble(vectors))
}

fn add_pairwise_products(values: &mut BTreeMap<String, f64>) {
    let linear: Vec<(String, f64)> = values.iter().map(|(k, v)| (k.clone(), *v)).collect();
    for (i, (a, va)) in linear.iter().enumerate() {
        for (b, vb) in &linear[i + 1..] {
            values.insert(format!("{a}*{b}"), va * vb);
        }
    }
}

fn assemble(vectors: Vec<FeatureVector>) -> FeatureMatrix {
    let all_names: BTreeSet<&String> = vectors.iter().flat_map(|v| v.values.keys()).collect();
    let (names, dropped): (Vec<String>, Vec<String>) = all_names
        .into_iter()
        .cloned()
        .partition(|n| vectors.iter().any(|v| v.values.get(n).is_some_and(|x| *x != 0.0)));
    let mut data = Vec::with_capacity(vectors.len() * names.len());
    for v in &vectors {
        data.extend(names.iter().map(|n| v.values.get(n).copied().unwrap_or(0.0)));
    }
    if !dropped.is_empty() {
        log::info!("[features] dropped all-zero columns: {}", dropped.join(", "));
    }
    FeatureMatrix {
        names,
        example_ids: vectors.iter().map(|v| v.example_id.clone()).collect(),
        outcome: vectors.iter().map(|v| f64::from(u8::from(v.outcome))).collect(),
        data,
        dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::{Label, SourceField};
    use crate::corpus::Mentions;

    fn assignment(id: &str, entity_ids: &[&str], labels: &[(Characteristic, Label)]) -> DemographicAssignment {
        let mut map: BTreeMap<Characteristic, Label> =
            Characteristic::ALL.iter().map(|&c| (c, Label::not_found())).collect();
        for (c, l) in labels {
            map.insert(*c, l.clone());
        }
        DemographicAssignment {
            example_id: id.into(),
            entity_ids: entity_ids.iter().map(|s| s.to_string()).collect(),
            source_field: if entity_ids.is_empty() {
                SourceField::None
            } else {
                SourceField::Answer
            },
            labels: map,
        }
    }

    fn single(v: &str) -> Label {
        Label {
            value: v.into(),
            kind: LabelKind::Single,
            constituents: vec![v.into()],
        }
    }

    fn example(id: &str, question: &str, answers: usize) -> QAExample {
        QAExample {
            id: id.into(),
            question: question.into(),
            answers: (0..answers).map(|i| format!("a{i}")).collect(),
            doc_title: String::new(),
            correct: true,
            mentions: Mentions::default(),
            evidence_sentence: None,
        }
    }

    #[test]
    fn q_sim_values() {
        assert_eq!(feat_q_sim("who wrote it", Some("Who wrote it?")), 1.0);
        assert_eq!(feat_q_sim("a b", Some("c d")), 0.0);
        assert!((feat_q_sim("a b", Some("b c")) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(feat_q_sim("a b", None), 0.0);
        assert_eq!(feat_q_sim("", Some("")), 0.0);
    }

    #[test]
    fn train_count_rules() {
        let train: Vec<QAExample> = (0..5)
            .map(|i| {
                let mut e = example(&i.to_string(), "q", 1);
                let mut m = vec![crate::corpus::EntityMention::person("A", "A")];
                if i < 3 {
                    m.push(crate::corpus::EntityMention::person("C", "C"));
                }
                if i < 2 {
                    m.push(crate::corpus::EntityMention::person("B", "B"));
                }
                if i < 1 {
                    m.push(crate::corpus::EntityMention::person("D", "D"));
                }
                e.mentions.answer = m;
                e
            })
            .collect();
        let idx = TrainCountIndex::build(&train);
        let ids = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let all = TrainCountRule::All;
        assert_eq!(feat_train_count(&ids(&["C"]), &idx, 2, all), 1.0); // 3 > 2
        assert_eq!(feat_train_count(&ids(&["B"]), &idx, 2, all), 0.0); // 2 is not > 2
        assert_eq!(feat_train_count(&ids(&["A", "D"]), &idx, 2, all), 0.0); // {5, 1}
        assert_eq!(feat_train_count(&ids(&["A", "D"]), &idx, 2, TrainCountRule::Any), 1.0);
        assert_eq!(feat_train_count(&[], &idx, 2, all), 0.0);
    }

    #[test]
    fn wh_window() {
        let flags = |q: &str| feat_wh(&tokenize(q), 10);
        assert_eq!(
            flags("who founded sikhism"),
            [("t_who", 1.0), ("t_what", 0.0), ("t_when", 0.0), ("t_where", 0.0)]
        );
        let late = "a b c d e f g h i j who k";
        assert_eq!(flags(late)[0].1, 0.0);
        assert_eq!(flags("For 10 points, name this writer who...")[0].1, 1.0);
        // the tokenizer splits contractions, so "who's" carries "who"
        assert_eq!(flags("who's there")[0].1, 1.0);
    }

    #[test]
    fn multiplicity() {
        assert_eq!(feat_multiplicity(1, 1), (0.0, 0.0));
        assert_eq!(feat_multiplicity(0, 4), (0.0, 2.0));
        assert_eq!(feat_multiplicity(2, 2).0, 1.0);
    }

    #[test]
    fn demographic_flags() {
        let config = FeatureConfig {
            enabled: Characteristic::ALL.into_iter().collect(),
            ..Default::default()
        };
        let a = assignment(
            "x",
            &["Q1"],
            &[
                (Characteristic::Gender, single("male")),
                (Characteristic::Profession, single("Executive")),
            ],
        );
        let flags = feat_demographics(&a, &config);
        assert_eq!(flags.get("g_male"), Some(&1.0));
        assert_eq!(flags.get("o_executive"), Some(&1.0));
        assert_eq!(flags.get("n_not_found"), Some(&1.0));
        assert!(!flags.contains_key("g_female"));

        let both = Label {
            value: "female+male".into(),
            kind: LabelKind::Concatenated,
            constituents: vec!["female".into(), "male".into()],
        };
        let a = assignment("y", &["Q1", "Q2"], &[(Characteristic::Gender, both)]);
        let flags = feat_demographics(&a, &config);
        for k in ["g_female", "g_male", "g_multi", "o_not_found"] {
            assert_eq!(flags.get(k), Some(&1.0), "{k}");
        }

        let only_gender = FeatureConfig {
            enabled: [Characteristic::Gender].into_iter().collect(),
            ..Default::default()
        };
        assert!(feat_demographics(&a, &only_gender).keys().all(|k| k.starts_with("g_")));
    }

    #[test]
    fn slugs() {
        assert_eq!(feature_slug("Film/tv"), "film_tv");
        assert_eq!(feature_slug("Science/tech"), "science_tech");
        assert_eq!(feature_slug("not_found"), "not_found");
        assert_eq!(demographic_feature_name(Characteristic::Nationality, "UK"), "n_uk");
    }

    #[test]
    fn matrix_basics() {
        let config = FeatureConfig::default();
        let empty = build_matrix(&[], &[], &TrainCountIndex::default(), &config).unwrap();
        assert_eq!(empty.n_rows(), 0);
        assert!(empty.outcome.is_empty());

        let exs = [example("a", "who is it", 1), example("b", "what is it", 2)];
        let asg = [assignment("a", &[], &[]), assignment("b", &[], &[])];
        let m = build_matrix(&exs, &asg, &TrainCountIndex::default(), &config).unwrap();
        assert_eq!(m.names, ["multi_answers", "t_what", "t_who"]);
        assert!(m.dropped.contains(&"q_sim".to_string()));
        assert!(m.dropped.contains(&"t_when".to_string()));
        assert_eq!(m.get(1, 0), 1.0);

        let bad = [assignment("b", &[], &[]), assignment("a", &[], &[])];
        assert!(matches!(
            build_matrix(&exs, &bad, &TrainCountIndex::default(), &config),
            Err(Error::Misaligned(_))
        ));
        assert!(build_matrix(&exs, &asg[..1], &TrainCountIndex::default(), &config).is_err());
    }

    #[test]
    fn quadratic_columns_bounded_by_pairs() {
        let exs = [
            example("a", "who is it where", 2),
            example("b", "what is it when", 4),
            example("c", "who when", 1),
        ];
        let asg = [assignment("a", &[], &[]), assignment("b", &[], &[]), assignment("c", &[], &[])];
        let idx = TrainCountIndex::default();
        let linear = build_matrix(&exs, &asg, &idx, &FeatureConfig::default()).unwrap();
        let quad = build_matrix(
            &exs,
            &asg,
            &idx,
            &FeatureConfig {
                include_quadratic: true,
                ..Default::default()
            },
        )
        .unwrap();
        let k = linear.n_cols();
        let added = quad.n_cols() - k;
        // enumerate nonzero pairwise products directly
        let mut expected = 0;
        for i in 0..k {
            for j in i + 1..k {
                if (0..3).any(|r| linear.get(r, i) * linear.get(r, j) != 0.0) {
                    expected += 1;
                }
            }
        }
        assert_eq!(added, expected);
        assert!(added <= k * (k - 1) / 2);
        assert!(quad.names.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tsv_export() {
        let exs = [example("a", "who", 2)];
        let asg = [assignment("a", &[], &[])];
        let m = build_matrix(&exs, &asg, &TrainCountIndex::default(), &FeatureConfig::default()).unwrap();
        assert_eq!(m.to_tsv(), "id\tmulti_answers\tt_who\tcorrect\na\t1\t1\t1\n");
    }
}
