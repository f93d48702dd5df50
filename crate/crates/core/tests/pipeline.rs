use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use demaudit::attributes::Characteristic;
use demaudit::pipeline::{run_audit, AuditConfig};
use demaudit::report::parse_json_report;
use demaudit::stats::chi2_sf;
use demaudit::synth::{generate_synthetic, LabelSpec, SynthSpec, Truth};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_demaudit"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.env("RUST_LOG", "info").output().expect("binary runs")
}

fn fixture_spec() -> SynthSpec {
    SynthSpec {
        dataset_name: "fixture".into(),
        n: 200,
        n_train: 100,
        entity_pool: 40,
        seed: 3,
        gender: vec![LabelSpec::new("male", 0.5, None), LabelSpec::new("female", 0.5, Some(0.95))],
        nationality: vec![LabelSpec::new("germany", 1.0, None)],
        profession: vec![LabelSpec::new("writer", 1.0, None)],
        ..SynthSpec::default()
    }
}

#[test]
fn fixture_corpus_writes_every_stage_output() {
    let tmp = tempfile::tempdir().unwrap();
    generate_synthetic(&fixture_spec(), tmp.path()).unwrap();
    let out = run(bin().arg("audit").arg("--config").arg(tmp.path().join("audit.toml")));
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(out.status.success(), "{log}");

    // stages appear in the fixed order
    let stages = ["[load]", "[attribute]", "[bucket]", "[accuracy]", "[chi2]", "[features]", "[lasso]", "[refit]", "[wald]", "[render]"];
    let positions: Vec<usize> = stages.iter().map(|s| log.find(s).unwrap_or_else(|| panic!("{s} missing:\n{log}"))).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "{log}");

    let report_dir = tmp.path().join("report");
    for stem in ["all.report", "gender.distribution", "gender.accuracy", "gender.chi2", "profession.chi2", "all.regression"] {
        for ext in ["md", "tsv", "json"] {
            let p = report_dir.join(format!("fixture.{stem}.{ext}"));
            assert!(p.is_file(), "{} missing", p.display());
        }
    }
    assert!(report_dir.join("fixture.all.features.tsv").is_file());

    let report = parse_json_report(&fs::read(report_dir.join("fixture.all.report.json")).unwrap()).unwrap();
    assert_eq!(report.overall.count, 200);
    assert_eq!(report.enabled, vec![Characteristic::Gender]);
    let regression = report.regression.expect("gender passes the screen");
    assert!(regression.features.iter().any(|r| r.name == "g_female" || r.name == "g_male"));
    // single-label characteristics cannot be tested
    let prof = report.characteristics.iter().find(|c| c.characteristic == Characteristic::Profession).unwrap();
    assert!(prof.screen.chi_squared.is_none() && prof.screen.skipped.is_some());
}

#[test]
fn empty_dev_fold_gives_empty_report() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("dev.jsonl"), "").unwrap();
    fs::write(tmp.path().join("kb.txt"), "Q1|A|male|germany|writer\n").unwrap();
    let out = run(bin()
        .arg("audit")
        .arg("--dataset-dev")
        .arg(tmp.path().join("dev.jsonl"))
        .arg("--kb")
        .arg(tmp.path().join("kb.txt"))
        .arg("--out")
        .arg(tmp.path().join("out"))
        .args(["--format", "json"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = parse_json_report(&fs::read(tmp.path().join("out/dev.all.report.json")).unwrap()).unwrap();
    assert_eq!(report.overall.count, 0);
    assert_eq!(report.overall.accuracy, None);
    assert!(report.regression.is_none());
    for c in &report.characteristics {
        assert!(c.accuracy.is_empty() && c.distribution.is_empty());
        assert!(!c.screen.enabled);
    }
}

#[test]
fn missing_attribute_store_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    generate_synthetic(&fixture_spec(), tmp.path()).unwrap();
    let missing = tmp.path().join("nowhere/kb.txt");
    let out = run(bin()
        .arg("audit")
        .arg("--config")
        .arg(tmp.path().join("audit.toml"))
        .arg("--kb")
        .arg(&missing));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&missing.display().to_string()), "{err}");
    assert!(err.contains("[load]"), "{err}");
}

#[test]
fn bad_config_values_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    generate_synthetic(&fixture_spec(), tmp.path()).unwrap();
    let out = run(bin().arg("audit").arg("--config").arg(tmp.path().join("audit.toml")).args(["--alpha", "1.5"]));
    assert_eq!(out.status.code(), Some(4));
    fs::write(tmp.path().join("broken.toml"), "alpha = \"high\"\n").unwrap();
    let out = run(bin().arg("audit").arg("--config").arg(tmp.path().join("broken.toml")));
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    generate_synthetic(&fixture_spec(), tmp.path()).unwrap();
    let mut config = AuditConfig::from_file(&tmp.path().join("audit.toml")).unwrap();
    let out_dir = tmp.path().join("strict");
    let out = run(bin()
        .arg("audit")
        .arg("--config")
        .arg(tmp.path().join("audit.toml"))
        .args(["--alpha", "1e-300", "--others-min", "5", "--format", "json,md"])
        .arg("--out")
        .arg(&out_dir));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = parse_json_report(&fs::read(out_dir.join("fixture.all.report.json")).unwrap()).unwrap();
    assert!(report.enabled.is_empty());
    assert!(report.regression_skipped.is_some());
    assert!(!out_dir.join("fixture.all.report.tsv").exists());
    config.alpha = 1e-300;
    config.others_min = 5;
    config.out = Some(out_dir);
    config.formats = vec![demaudit::Format::Json, demaudit::Format::Markdown];
    assert_eq!(report.provenance.config_hash, config.hash());
}

#[test]
fn synth_command_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        let out = run(bin().args(["synth", "--preset", "gender-gap", "--seed", "9", "--out"]).arg(tmp.path().join(dir)));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["dev.jsonl", "train.jsonl", "kb.txt", "truth.json", "audit.toml"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let out = run(bin().args(["synth", "--preset", "nope", "--out"]).arg(tmp.path().join("c")));
    assert_eq!(out.status.code(), Some(4));
}

/// χ² statistic of a 2×2 table from its cells, closed form n(ad − bc)² / (r₁r₂c₁c₂).
fn two_by_two(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let n = a + b + c + d;
    n * (a * d - b * c).powi(2) / ((a + b) * (c + d) * (a + c) * (b + d))
}

#[test]
fn planted_gender_effect_is_recorded_and_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = SynthSpec::preset("gender-gap").unwrap();
    assert_eq!(spec.n, 1000);
    generate_synthetic(&spec, tmp.path()).unwrap();
    let truth: Truth = serde_json::from_slice(&fs::read(tmp.path().join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth.planted.len(), 1);
    assert_eq!(truth.planted[0].feature, "g_female");
    assert!((truth.planted[0].accuracy - 0.8).abs() < 1e-12);

    // power: noncentrality of the expected table (about 500 per group at 0.8 vs 0.5)
    let expected = two_by_two(100.0, 400.0, 250.0, 250.0);
    assert!((expected - 98.901).abs() < 1e-3);
    let critical = (1..400)
        .map(|i| i as f64 * 0.05)
        .find(|&x| chi2_sf(x, 1).unwrap() < 0.05 / 3.0)
        .unwrap();
    // normal approximation to the noncentral χ²(1): power ≈ Φ(√λ − √c)
    assert!(expected.sqrt() - critical.sqrt() > 5.0);

    let config = AuditConfig::from_file(&tmp.path().join("audit.toml")).unwrap();
    let outcome = run_audit(&AuditConfig { out: None, ..config }).unwrap();
    let gender = outcome
        .report
        .characteristics
        .iter()
        .find(|c| c.characteristic == Characteristic::Gender)
        .unwrap();
    assert!(gender.screen.enabled);
    let cells = &truth.realized[&Characteristic::Gender];
    let get = |label: &str| cells.iter().find(|c| c.label == label).unwrap();
    let (f, m) = (get("female"), get("male"));
    let oracle = two_by_two(
        (f.count - f.correct) as f64,
        f.correct as f64,
        (m.count - m.correct) as f64,
        m.correct as f64,
    );
    let got = gender.screen.chi_squared.as_ref().unwrap().statistic;
    assert!((got - oracle).abs() < 1e-9 * oracle, "{got} vs {oracle}");
}

#[test]
fn collapse_check_command() {
    let out = run(bin().arg("collapse-check"));
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("86 nationality and 517 profession"));

    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("nationality.tsv"), "usa\tUS\nusa\tUS\n").unwrap();
    fs::write(tmp.path().join("profession.tsv"), "writer\tWriting\nwriting\tAuthor\n").unwrap();
    let out = run(bin().arg("collapse-check").arg("--collapse-dir").arg(tmp.path()));
    assert_ne!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("usa"), "{stdout}");
    assert!(stdout.to_lowercase().contains("writing"), "{stdout}");
}

#[test]
fn relative_config_paths_resolve_against_config_dir() {
    let tmp = tempfile::tempdir().unwrap();
    generate_synthetic(&fixture_spec(), tmp.path()).unwrap();
    let config = AuditConfig::from_file(&tmp.path().join("audit.toml")).unwrap();
    assert_eq!(config.dataset_dev, tmp.path().join("dev.jsonl"));
    assert_eq!(config.out.as_deref(), Some(Path::new(&tmp.path().join("report"))));
}
