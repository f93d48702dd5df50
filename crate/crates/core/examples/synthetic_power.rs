//! Power check on synthetic corpora: how often the screen flags a planted
//! profession gap, and how often it fires on null corpora.
//!
//! cargo run --release --example synthetic_power [-- runs]

use demaudit::attributes::Characteristic;
use demaudit::pipeline::{audit_inputs, AuditConfig, AuditInputs};
use demaudit::synth::{synthesize, SynthSpec};
use demaudit::CollapseTables;

fn flagged(spec: &SynthSpec) -> (Vec<Characteristic>, Option<f64>) {
    let corpus = synthesize(spec).unwrap();
    let inputs = AuditInputs {
        store: corpus.store(),
        dev: corpus.dev,
        train: corpus.train,
        tables: CollapseTables::shipped(),
    };
    let config = AuditConfig {
        dataset_dev: "synthetic".into(),
        kb: "synthetic".into(),
        seed: spec.seed,
        ..Default::default()
    };
    let outcome = audit_inputs(&config, &inputs).unwrap();
    let planted_p = corpus.truth.planted.first().and_then(|p| {
        let reg = outcome.report.regression.as_ref()?;
        reg.features.iter().find(|r| r.name == p.feature).map(|r| r.p_value)
    });
    (outcome.report.enabled, planted_p)
}

fn main() {
    let runs: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    for preset in ["profession-gap", "null"] {
        let mut hits = 0;
        let mut wald_hits = 0;
        for seed in 0..runs {
            let spec = SynthSpec {
                seed,
                ..SynthSpec::preset(preset).unwrap()
            };
            let (enabled, planted_p) = flagged(&spec);
            hits += usize::from(!enabled.is_empty());
            wald_hits += usize::from(planted_p.is_some_and(|p| p < 0.01));
        }
        println!("{preset:<15} any characteristic flagged in {hits}/{runs} runs; planted Wald p<0.01 in {wald_hits}/{runs}");
    }
}
