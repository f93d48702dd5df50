//! Canonicalize raw nationality and profession values with the shipped
//! collapse tables, then validate the tables.
//!
//! cargo run --example collapse_tables [-- raw values...]

use demaudit::attributes::{Characteristic, CollapseTables};

fn main() {
    let tables = CollapseTables::shipped();
    let mut raw: Vec<String> = std::env::args().skip(1).collect();
    if raw.is_empty() {
        raw = ["United States of America", "kingdom of prussia", "Netherlands", "physicist", "actor", "beekeeper"]
            .map(String::from)
            .to_vec();
    }
    for value in &raw {
        println!(
            "{value:>28}  nationality={:<16} profession={}",
            tables.collapse(Characteristic::Nationality, value),
            tables.collapse(Characteristic::Profession, value)
        );
    }

    println!();
    for t in [&tables.nationality, &tables.profession] {
        println!("{}: {} entries, {} labels", t.characteristic, t.len(), t.labels().count());
    }
    let problems = tables.check();
    if problems.is_empty() {
        println!("tables are idempotent with no duplicate keys");
    }
    for p in problems {
        println!("problem: {p}");
    }
}
