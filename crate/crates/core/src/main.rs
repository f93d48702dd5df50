use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use demaudit::attributes::CollapseTables;
use demaudit::error::Error;
use demaudit::pipeline::{run_audit, AuditConfig};
use demaudit::report::Format;
use demaudit::synth::{generate_synthetic, SynthSpec};

#[derive(Parser)]
#[command(name = "demaudit", version, about = "Demographic audit of QA evaluation sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full audit and write reports.
    Audit(AuditArgs),
    /// Generate a synthetic corpus with planted effects.
    Synth(SynthArgs),
    /// Validate collapse tables: duplicate keys and idempotence.
    CollapseCheck {
        #[arg(long)]
        collapse_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct AuditArgs {
    /// TOML config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset_dev: Option<PathBuf>,
    #[arg(long)]
    dataset_train: Option<PathBuf>,
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long)]
    collapse_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// md, tsv or json; repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    format: Vec<Format>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    others_min: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML generator spec.
    #[arg(long, conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// One of: null, profession-gap, gender-gap.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn audit(args: AuditArgs) -> Result<(), (String, i32)> {
    let fail = |e: Error| (e.to_string(), e.exit_code());
    let mut config = match &args.config {
        Some(p) => AuditConfig::from_file(p).map_err(fail)?,
        None => AuditConfig::default(),
    };
    if let Some(v) = args.dataset_dev {
        config.dataset_dev = v;
    }
    if let Some(v) = args.dataset_train {
        config.dataset_train = Some(v);
    }
    if let Some(v) = args.kb {
        config.kb = v;
    }
    if let Some(v) = args.collapse_dir {
        config.collapse_dir = Some(v);
    }
    if let Some(v) = args.out {
        config.out = Some(v);
    }
    if !args.format.is_empty() {
        config.formats = args.format;
    }
    if let Some(v) = args.lambda {
        config.solver.lambda = v;
    }
    if let Some(v) = args.alpha {
        config.alpha = v;
    }
    if let Some(v) = args.others_min {
        config.others_min = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    let outcome = run_audit(&config).map_err(|e| (e.to_string(), e.exit_code()))?;
    if outcome.written.is_empty() {
        let md = demaudit::report::render(&outcome.report, Format::Markdown).map_err(fail)?;
        print!("{}", String::from_utf8_lossy(&md));
    } else {
        for p in &outcome.written {
            println!("{}", p.display());
        }
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<(), (String, i32)> {
    let fail = |e: Error| (e.to_string(), e.exit_code());
    let mut spec = match (&args.spec, &args.preset) {
        (Some(p), _) => SynthSpec::from_file(p).map_err(fail)?,
        (None, Some(name)) => SynthSpec::preset(name).ok_or_else(|| {
            (
                format!("unknown preset {name:?}; expected one of {}", SynthSpec::PRESETS.join(", ")),
                4,
            )
        })?,
        (None, None) => SynthSpec::default(),
    };
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    for p in generate_synthetic(&spec, &args.out).map_err(fail)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn collapse_check(dir: Option<PathBuf>) -> Result<(), (String, i32)> {
    let tables = match &dir {
        Some(d) => CollapseTables::load_dir(d).map_err(|e| (e.to_string(), e.exit_code()))?,
        None => CollapseTables::shipped(),
    };
    let problems = tables.check();
    for p in &problems {
        println!("{p}");
    }
    if problems.is_empty() {
        println!(
            "ok: {} nationality and {} profession entries",
            tables.nationality.len(),
            tables.profession.len()
        );
        Ok(())
    } else {
        Err((format!("{} problems found", problems.len()), 2))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Audit(a) => audit(a),
        Command::Synth(s) => synth(s),
        Command::CollapseCheck { collapse_dir } => collapse_check(collapse_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((message, code)) => {
            eprintln!("error: {message}");
            ExitCode::from(code as u8)
        }
    }
}
