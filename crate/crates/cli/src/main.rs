//! `convo-evalkit` command-line interface.
//!
//! Subcommands: `validate` (check a log file against the schema rules),
//! `evaluate` (parse, score, and render a scorecard), `synth` (write a
//! seeded synthetic fixture), and `compare` (diff two scorecard JSON files).
//!
//! Exit codes are the stable contract: 0 success, 1 data/validation failure,
//! 2 usage or I/O errors. With `--json`/`--format json`, stdout carries only
//! the machine-readable payload; diagnostics go to stderr.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use convo_evalkit::ingest::{
    self, ops_to_json_string, to_ndjson_string, IngestError, ParseMode, SynthProfile,
    ValidationReport,
};
use convo_evalkit::scorecard::{
    build_scorecard, canonical_json, compare_scorecards, render_report, Assessment, EvalConfig,
    ReportFormat, Scorecard, ScorecardError,
};

const EXIT_OK: u8 = 0;
const EXIT_DATA: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Evaluate chatbot interaction logs into a four-theme metric scorecard.
#[derive(Debug, Parser)]
#[command(name = "convo-evalkit", version, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a conversation log file and print the rule violations.
    Validate(ValidateArgs),
    /// Parse a log file, compute all enabled metrics, render a scorecard.
    Evaluate(EvaluateArgs),
    /// Generate a seeded synthetic dataset (plus its ops log).
    Synth(SynthArgs),
    /// Diff two scorecard JSON files metric by metric.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Conversation log (NDJSON, one record per line).
    #[arg(long)]
    input: PathBuf,
    /// Ops log file (single JSON object).
    #[arg(long)]
    ops: Option<PathBuf>,
    /// Abort on the first pass instead of dropping bad records.
    #[arg(long)]
    strict: bool,
    /// Print the validation report as JSON on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Conversation log (NDJSON, one record per line).
    #[arg(long)]
    input: PathBuf,
    /// Ops log file (single JSON object).
    #[arg(long)]
    ops: Option<PathBuf>,
    /// Evaluation config (JSON mirroring the scorecard config echo).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report format; overrides the config file.
    #[arg(long, value_parser = ["json", "markdown"])]
    format: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    conversations: usize,
    /// Conversation NDJSON path; the ops log lands at `<stem>.ops.json`.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Baseline scorecard JSON.
    #[arg(long)]
    before: PathBuf,
    /// Candidate scorecard JSON.
    #[arg(long)]
    after: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(message) = init_thread_pool() {
        eprintln!("error: {message}");
        return ExitCode::from(EXIT_USAGE);
    }
    let code = match cli.command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::Compare(args) => cmd_compare(&args),
    };
    ExitCode::from(code)
}

/// `CONVO_EVALKIT_THREADS` caps internal parallelism; 0 or unset means auto.
fn init_thread_pool() -> Result<(), String> {
    let Ok(raw) = std::env::var("CONVO_EVALKIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("CONVO_EVALKIT_THREADS must be a non-negative integer, got {raw:?}"))?;
    if threads == 0 {
        return Ok(()); // auto
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("failed to configure thread pool: {e}"))
}

fn print_report_human(report: &ValidationReport) {
    for violation in &report.errors {
        eprintln!("error: {violation}");
    }
    for violation in &report.warnings {
        eprintln!("warning: {violation}");
    }
    eprintln!(
        "records: {} accepted, {} dropped of {} ({} error(s), {} warning(s))",
        report.accepted_count,
        report.dropped_count,
        report.record_count,
        report.errors.len(),
        report.warnings.len()
    );
}

fn cmd_validate(args: &ValidateArgs) -> u8 {
    let mode = if args.strict { ParseMode::Strict } else { ParseMode::Lenient };
    let outcome = ingest::parse_dataset(&args.input, args.ops.as_deref(), mode);
    let report = match outcome {
        Ok((_, report)) => report,
        Err(IngestError::Validation { report }) => report,
        Err(err @ IngestError::Io { .. }) => {
            eprintln!("error: {err}");
            return EXIT_USAGE;
        }
    };
    print_report_human(&report);
    if args.json {
        println!("{}", canonical_json(&report));
    }
    if report.errors.is_empty() {
        EXIT_OK
    } else {
        EXIT_DATA
    }
}

fn load_config(path: Option<&Path>) -> Result<EvalConfig, String> {
    let Some(path) = path else {
        return Ok(EvalConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
}

fn cmd_evaluate(args: &EvaluateArgs) -> u8 {
    let mut config = match load_config(args.config.as_deref()) {
        Ok(config) => config,
        Err(message) => {
            eprintln!("error: {message}");
            return EXIT_USAGE;
        }
    };
    match args.format.as_deref() {
        Some("json") => config.report.format = ReportFormat::Json,
        Some("markdown") => config.report.format = ReportFormat::Markdown,
        Some(_) | None => {}
    }

    let (dataset, report) =
        match ingest::parse_dataset(&args.input, args.ops.as_deref(), ParseMode::Strict) {
            Ok(pair) => pair,
            Err(IngestError::Validation { report }) => {
                print_report_human(&report);
                return EXIT_DATA;
            }
            Err(err @ IngestError::Io { .. }) => {
                eprintln!("error: {err}");
                return EXIT_USAGE;
            }
        };
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }

    let scorecard = match build_scorecard(&dataset, &config) {
        Ok(card) => card,
        Err(err @ (ScorecardError::UnknownMetric(_) | ScorecardError::InvalidConfig(_))) => {
            eprintln!("error: {err}");
            return EXIT_USAGE;
        }
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_DATA;
        }
    };
    let rendered = render_report(&scorecard, config.report.format);

    match &args.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, rendered.as_bytes()) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_USAGE;
            }
            eprintln!("wrote {}", path.display());
        }
        None => {
            print!("{rendered}");
            let _ = std::io::stdout().flush();
        }
    }
    EXIT_OK
}

fn cmd_synth(args: &SynthArgs) -> u8 {
    let profile = SynthProfile::default();
    let dataset = match ingest::synthesize_fixture(args.seed, args.conversations, &profile) {
        Ok(dataset) => dataset,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_USAGE;
        }
    };
    let ops_path = args.output.with_extension("ops.json");
    let ndjson = to_ndjson_string(&dataset);
    if let Err(e) = std::fs::write(&args.output, ndjson.as_bytes()) {
        eprintln!("error: cannot write {}: {e}", args.output.display());
        return EXIT_USAGE;
    }
    let ops = dataset.ops().expect("synthetic datasets carry an ops log");
    let mut ops_json = ops_to_json_string(ops);
    ops_json.push('\n');
    if let Err(e) = std::fs::write(&ops_path, ops_json.as_bytes()) {
        eprintln!("error: cannot write {}: {e}", ops_path.display());
        return EXIT_USAGE;
    }
    eprintln!(
        "wrote {} ({} conversations) and {}",
        args.output.display(),
        args.conversations,
        ops_path.display()
    );
    EXIT_OK
}

fn load_scorecard(path: &Path) -> Result<Scorecard, (u8, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| (EXIT_USAGE, format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| (EXIT_DATA, format!("not a scorecard: {}: {e}", path.display())))
}

fn cmd_compare(args: &CompareArgs) -> u8 {
    let (before, after) = match (load_scorecard(&args.before), load_scorecard(&args.after)) {
        (Ok(b), Ok(a)) => (b, a),
        (Err((code, message)), _) | (_, Err((code, message))) => {
            eprintln!("error: {message}");
            return code;
        }
    };
    let report = match compare_scorecards(&before, &after) {
        Ok(report) => report,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_DATA;
        }
    };
    for delta in &report.deltas {
        let arrow = match delta.assessment {
            Assessment::Improvement => "improvement +",
            Assessment::Regression => "regression -",
            Assessment::NoChange => "unchanged =",
            Assessment::Incomparable => "incomparable ?",
        };
        let fmt = |v: Option<f64>| v.map_or("n/a".to_owned(), |x| format!("{x:.6}"));
        println!(
            "{:28} {:>14} -> {:>14}  delta {:>14}  [{}{}]",
            delta.name,
            fmt(delta.before),
            fmt(delta.after),
            fmt(delta.delta),
            arrow,
            if delta.lower_is_better { " (lower is better)" } else { "" }
        );
    }
    println!("verdict: {}", report.verdict());
    EXIT_OK
}
