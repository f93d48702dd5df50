//! χ² test of independence on per-label (incorrect, correct) counts, with the
//! Bonferroni-corrected threshold.
//!
//! cargo run --example chi_squared_screen

use demaudit::stats::{chi_squared_test, ChiSquaredOptions, ContingencyTable};

fn show(name: &str, table: &ContingencyTable, options: &ChiSquaredOptions) {
    let r = chi_squared_test(table, options).unwrap();
    println!(
        "{name:<12} statistic {:>9.4}  dof {}  p {:.3e}  threshold {:.7}  {}",
        r.statistic,
        r.dof,
        r.p_value,
        r.threshold,
        if r.significant { "significant" } else { "not significant" }
    );
}

fn main() {
    let options = ChiSquaredOptions::default();

    // 500 examples at 80% vs 500 at 50%
    let planted = ContingencyTable::new(vec!["A".into(), "B".into()], vec![[100, 400], [250, 250]]).unwrap();
    show("planted", &planted, &options);

    let flat = ContingencyTable::new(
        vec!["US".into(), "UK".into(), "Germany".into()],
        vec![[40, 60], [38, 62], [41, 59]],
    )
    .unwrap();
    show("flat", &flat, &options);

    let yates = ChiSquaredOptions {
        continuity_correction: true,
        ..options
    };
    show("planted+cc", &planted, &yates);

    // the threshold depends on how many characteristics are screened
    for m in [1, 3, 5] {
        let o = ChiSquaredOptions {
            bonferroni_m: m,
            ..ChiSquaredOptions::default()
        };
        println!("m={m}: threshold {:.7}", o.threshold());
    }

    match ContingencyTable::new(vec!["only".into()], vec![[3, 4]]) {
        Ok(_) => unreachable!(),
        Err(e) => println!("single-row table: {e}"),
    }
}
