//! Command-line front end: corpus validation, context extraction,
//! experiment runs over replay or live transports, metric reports, and
//! execution-trace diffing.
//!
//! Exit status: 0 on success, 1 on an operational failure (bad input
//! file, failed record, replay miss), 2 on a usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pocforge::bench::{
    compute_metrics, emit_report, render_report_text, run_experiment, JudgmentBook, RunConfig,
    RunMode, RunOutput, DEFAULT_TRIALS,
};
use pocforge::context::{extract, render_document, trim_to_budget, Granularity};
use pocforge::corpus::{load_corpus, CveRecord};
use pocforge::llm::{LlmClient, ModelConfig, ReplayScript};
use pocforge::php::SinkConfig;
use pocforge::prompt::IclBank;
use pocforge::trace::{diff_navigation, feedback_message, parse_trace, SinkSite};

#[derive(Parser)]
#[command(
    name = "pocforge",
    about = "Generates and validates candidate proof-of-concept exploits from public vulnerability disclosures",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Replay,
    Live,
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    File,
    Function,
}

impl GranularityArg {
    fn into_granularity(self) -> Granularity {
        match self {
            GranularityArg::File => Granularity::File,
            GranularityArg::Function => Granularity::Function,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    BaseS1,
    BaseS2,
    BaseS3,
    DirectContextFile,
    DirectContextFunction,
    Adaptive,
}

impl ModeArg {
    fn into_mode(self) -> RunMode {
        match self {
            ModeArg::BaseS1 => RunMode::BaseS1,
            ModeArg::BaseS2 => RunMode::BaseS2,
            ModeArg::BaseS3 => RunMode::BaseS3,
            ModeArg::DirectContextFile => RunMode::DirectContextFile,
            ModeArg::DirectContextFunction => RunMode::DirectContextFunction,
            ModeArg::Adaptive => RunMode::Adaptive,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load a corpus directory and report every record and issue.
    ValidateCorpus {
        /// Directory of record TOML files.
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Extract and print the analysis context for one record.
    ExtractContext {
        /// Record id within the corpus.
        id: String,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "function")]
        granularity: GranularityArg,
        /// Token budget; over-budget optional slices are dropped.
        #[arg(long)]
        budget: Option<usize>,
        /// Write the document here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one generation mode over a corpus and write the outcomes.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, value_enum)]
        transport: TransportArg,
        /// Replay script JSON; required for the replay transport.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Outcomes, artifacts, and workspaces land here.
        #[arg(long)]
        out_dir: PathBuf,
        /// Per-trial functional judgments JSON.
        #[arg(long)]
        judgments: Option<PathBuf>,
        /// Trials per record.
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        k: usize,
        /// Concurrent records; ordinal replay scripts need 1.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "replay-model")]
        model: String,
        /// Chat-completion endpoint for the live transport.
        #[arg(long)]
        endpoint: Option<String>,
        /// Environment variable holding the API key; never the key itself.
        #[arg(long)]
        credential_env: Option<String>,
    },
    /// Aggregate an outcomes file into report.json and report.txt.
    Metrics {
        /// Outcomes JSON written by `run`.
        outcomes: PathBuf,
        /// Reports land here; omitted means stdout only.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compare an execution trace against a record's navigation chain.
    TraceDiff {
        /// Computerized-format trace file.
        #[arg(long)]
        trace: PathBuf,
        /// Record id within the corpus.
        #[arg(long)]
        record: String,
        #[arg(long)]
        corpus: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn load_record(corpus: &PathBuf, id: &str) -> Result<CveRecord, String> {
    let load = load_corpus(corpus).map_err(|e| e.to_string())?;
    load.records
        .into_iter()
        .find(|r| r.id == id)
        .ok_or_else(|| format!("record '{id}' not found in {}", corpus.display()))
}

fn run(command: Command) -> Result<(), String> {
    match command {
        Command::ValidateCorpus { corpus } => {
            let load = load_corpus(&corpus).map_err(|e| e.to_string())?;
            for record in &load.records {
                println!(
                    "{}: {} ({} file{})",
                    record.id,
                    record.cwe,
                    record.files.len(),
                    if record.files.len() == 1 { "" } else { "s" }
                );
            }
            for issue in &load.issues {
                eprintln!("issue: {}: {}", issue.path, issue.message);
            }
            if load.issues.is_empty() {
                println!("{} record(s), no issues", load.records.len());
                Ok(())
            } else {
                Err(format!("{} issue(s) found", load.issues.len()))
            }
        }
        Command::ExtractContext {
            id,
            corpus,
            granularity,
            budget,
            out,
        } => {
            let record = load_record(&corpus, &id)?;
            let sinks = SinkConfig::default_config();
            let mut bundle = extract(&record, granularity.into_granularity(), &sinks)
                .map_err(|e| e.to_string())?;
            if let Some(budget) = budget {
                trim_to_budget(&mut bundle, budget).map_err(|e| e.to_string())?;
            }
            let document = render_document(&bundle);
            for warning in &bundle.warnings {
                eprintln!("warning: {warning}");
            }
            match out {
                Some(path) => std::fs::write(&path, document)
                    .map_err(|e| format!("{}: {e}", path.display()))?,
                None => print!("{document}"),
            }
            Ok(())
        }
        Command::Run {
            corpus,
            mode,
            transport,
            script,
            out_dir,
            judgments,
            k,
            workers,
            model,
            endpoint,
            credential_env,
        } => {
            let load = load_corpus(&corpus).map_err(|e| e.to_string())?;
            if !load.issues.is_empty() {
                for issue in &load.issues {
                    eprintln!("issue: {}: {}", issue.path, issue.message);
                }
                return Err(format!("corpus has {} issue(s)", load.issues.len()));
            }
            let mut cfg = ModelConfig::new(model);
            if let Some(endpoint) = endpoint {
                cfg = cfg.with_endpoint(endpoint);
            }
            if let Some(var) = credential_env {
                cfg = cfg.with_credential_env(var);
            }
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| format!("{}: {e}", out_dir.display()))?;
            let client = match transport {
                TransportArg::Replay => {
                    let path = script
                        .ok_or("the replay transport requires --script".to_string())?;
                    let script = ReplayScript::from_path(&path).map_err(|e| e.to_string())?;
                    LlmClient::replay(cfg, script)
                }
                TransportArg::Live => LlmClient::live(cfg),
            }
            .with_log(out_dir.join("requests.log"));
            let judgments = judgments
                .map(|p| JudgmentBook::from_path(&p))
                .transpose()
                .map_err(|e| e.to_string())?;
            let sinks = SinkConfig::default_config();
            let icl = IclBank::builtin();
            let run_cfg = RunConfig {
                client: &client,
                sinks: &sinks,
                icl: &icl,
                k,
                workers,
                out_dir: Some(out_dir.clone()),
                judgments,
            };
            let mode = mode.into_mode();
            let output = run_experiment(&load.records, mode, &run_cfg);
            let outcomes_path = out_dir.join("outcomes.json");
            output.write(&outcomes_path).map_err(|e| e.to_string())?;
            let successes = output.outcomes.iter().filter(|o| o.success).count();
            println!(
                "{}: {} record(s), {} success(es), {} error(s) -> {}",
                mode.label(),
                output.outcomes.len(),
                successes,
                output.errors.len(),
                outcomes_path.display()
            );
            for error in &output.errors {
                eprintln!("record {}: {}", error.record_id, error.message);
            }
            if output.errors.is_empty() {
                Ok(())
            } else {
                Err(format!("{} record(s) failed", output.errors.len()))
            }
        }
        Command::Metrics { outcomes, out_dir } => {
            let output = RunOutput::read(&outcomes).map_err(|e| e.to_string())?;
            let report = compute_metrics(&output.outcomes);
            print!("{}", render_report_text(&report));
            if let Some(dir) = out_dir {
                let (json_path, _) = emit_report(&report, &dir).map_err(|e| e.to_string())?;
                println!("report written to {}", json_path.display());
            }
            Ok(())
        }
        Command::TraceDiff {
            trace,
            record,
            corpus,
        } => {
            let record = load_record(&corpus, &record)?;
            let sinks = SinkConfig::default_config();
            let bundle =
                extract(&record, Granularity::Function, &sinks).map_err(|e| e.to_string())?;
            let parsed = parse_trace(&trace).map_err(|e| e.to_string())?;
            for warning in &parsed.warnings {
                eprintln!("warning: {warning}");
            }
            let sink = SinkSite::of(&bundle.vulnerability);
            let diff = diff_navigation(&parsed, &bundle.navigation, &sink);
            match feedback_message(&diff, &sink) {
                Ok(message) => println!("{message}"),
                Err(_) => println!(
                    "navigation chain fully executed and the sink at {}:{} was reached",
                    sink.path, sink.start_line
                ),
            }
            Ok(())
        }
    }
}
