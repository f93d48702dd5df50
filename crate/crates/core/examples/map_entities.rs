//! Attribute a handful of examples to person entities and print their labels.
//!
//! cargo run --example map_entities

use std::path::Path;

use demaudit::attributes::{assign_example, AttributeStore, Characteristic, CollapseTables};
use demaudit::corpus::{EntityMention, Mentions, QAExample};

fn example(id: &str, question: &str, mentions: Mentions) -> QAExample {
    QAExample {
        id: id.into(),
        question: question.into(),
        answers: vec!["x".into()],
        doc_title: String::new(),
        correct: true,
        mentions,
        evidence_sentence: None,
    }
}

fn main() {
    let kb = "\
Q9372|Guru Nanak|male|mughal empire|poet,philosopher
Q190|Clara Barton|female|united states of america|nurse
Q37|Wole Soyinka|male|nigeria|playwright,novelist
Q42|Ada Example|female|united kingdom,united states|physicist
";
    let store = AttributeStore::parse(kb, Path::new("inline")).unwrap();
    let tables = CollapseTables::shipped();

    let examples = [
        example(
            "answer-field",
            "who founded sikhism?",
            Mentions {
                answer: vec![EntityMention::person("Q9372", "Guru Nanak")],
                ..Default::default()
            },
        ),
        example(
            "question-field",
            "which organization did clara barton found?",
            Mentions {
                answer: vec![EntityMention::other("Q3", "American Red Cross")],
                question: vec![EntityMention::person("Q190", "Clara Barton")],
                ..Default::default()
            },
        ),
        example(
            "title-field",
            "what play won the award?",
            Mentions {
                title: vec![EntityMention::person("Q37", "Wole Soyinka")],
                ..Default::default()
            },
        ),
        example(
            "two-nationalities",
            "who discovered the effect?",
            Mentions {
                answer: vec![EntityMention::person("Q42", "Ada Example")],
                ..Default::default()
            },
        ),
        example("no-person", "what is the capital of peru?", Mentions::default()),
    ];

    for ex in &examples {
        let a = assign_example(ex, &store, &tables);
        print!("{:<18} {:<9?} {:?}", ex.id, a.source_field, a.entity_ids);
        for c in Characteristic::ALL {
            print!("  {}={}", c, a.label(c).value);
        }
        println!();
    }
}
