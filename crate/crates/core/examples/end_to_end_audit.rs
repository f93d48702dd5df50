//! Generate a synthetic corpus on disk, audit it from its config file and list
//! the rendered outputs.
//!
//! cargo run --example end_to_end_audit [-- out_dir]

use std::path::PathBuf;

use demaudit::pipeline::{run_audit, AuditConfig};
use demaudit::synth::{generate_synthetic, SynthSpec};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let dir: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("demaudit-example"));

    let spec = SynthSpec::preset("profession-gap").unwrap();
    generate_synthetic(&spec, &dir).unwrap();

    let config = AuditConfig::from_file(&dir.join("audit.toml")).unwrap();
    let outcome = match run_audit(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    };
    let report = &outcome.report;
    println!("overall accuracy {:.3}", report.overall.accuracy.unwrap_or(f64::NAN));
    println!("enabled by the screen: {:?}", report.enabled);
    if let Some(reg) = &report.regression {
        for row in reg.reportable() {
            println!("  {} {:.3} (p {:.2e}) {}", row.name, row.coefficient, row.p_value, row.tier.marker());
        }
    }
    println!("{} files under {}", outcome.written.len(), dir.join("report").display());
}
