//! Per-example regression features and the assembled feature matrix.
//!
//! cargo run --example feature_extraction

use std::collections::BTreeSet;
use std::path::Path;

use demaudit::attributes::{assign_example, AttributeStore, Characteristic, CollapseTables};
use demaudit::corpus::{EntityMention, Mentions, QAExample, TrainCountIndex};
use demaudit::features::{build_matrix, extract_features, feat_q_sim, FeatureConfig};

fn qa(id: &str, question: &str, answers: &[&str], people: &[&str], evidence: &str) -> QAExample {
    QAExample {
        id: id.into(),
        question: question.into(),
        answers: answers.iter().map(|a| a.to_string()).collect(),
        doc_title: String::new(),
        correct: id.ends_with('1'),
        mentions: Mentions {
            answer: people.iter().map(|p| EntityMention::person(*p, *p)).collect(),
            ..Default::default()
        },
        evidence_sentence: Some(evidence.into()),
    }
}

fn main() {
    let store = AttributeStore::parse(
        "A|Ann|female|united states|physicist\nB|Bo|male|germany|actor\n",
        Path::new("inline"),
    )
    .unwrap();
    let tables = CollapseTables::shipped();

    let dev = vec![
        qa("d1", "who discovered the effect?", &["Ann"], &["A"], "Ann discovered the effect in 1901"),
        qa("d2", "in which film did bo play the king?", &["Bo", "Bo Example"], &["B"], "the king was played by Bo"),
        qa("d3", "a b c d e f g h i j where is it?", &["here", "there", "x", "y"], &["A", "B"], "nowhere"),
    ];
    let train = vec![
        qa("t0", "q", &["a"], &["A"], ""),
        qa("t1", "q", &["a"], &["A"], ""),
        qa("t2", "q", &["a"], &["A", "B"], ""),
    ];
    let index = TrainCountIndex::build(&train);
    let assignments: Vec<_> = dev.iter().map(|e| assign_example(e, &store, &tables)).collect();

    let config = FeatureConfig {
        enabled: BTreeSet::from([Characteristic::Gender, Characteristic::Profession]),
        ..Default::default()
    };
    for (ex, a) in dev.iter().zip(&assignments) {
        let v = extract_features(ex, a, &index, &config);
        let shown: Vec<String> = v
            .values
            .iter()
            .filter(|(_, x)| **x != 0.0)
            .map(|(k, x)| format!("{k}={x:.3}"))
            .collect();
        println!("{}: {}", ex.id, shown.join(" "));
    }
    println!(
        "q_sim is symmetric: {} = {}",
        feat_q_sim("who wrote it", Some("it was wrote by")),
        feat_q_sim("it was wrote by", Some("who wrote it"))
    );

    let matrix = build_matrix(&dev, &assignments, &index, &config).unwrap();
    println!("\n{} rows x {} columns, all-zero dropped: {:?}", matrix.n_rows(), matrix.n_cols(), matrix.dropped);
    print!("{}", matrix.to_tsv());
}
