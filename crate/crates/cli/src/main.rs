//! Command-line front end for the duotrace library: trace validation,
//! group scoring, branching rollouts, corpus curation, entropy reports,
//! and the accuracy-efficiency evaluation table.

mod config;

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use duotrace::curator::CuratorError;
use duotrace::entropy::{align_token_events, read_token_events};
use duotrace::jsonl;
use duotrace::metrics::MetricsError;
use duotrace::oracle::{GeneratorOracle, HttpOracle, ScriptedOracle};
use duotrace::reward::{score_groups, ScoreRequest};
use duotrace::rollout::{dump_tree, run_rollout_batch, RolloutError};
use duotrace::{
    analyze_trace_entropy, build_report, curate_corpus, parse_trace, HttpRewriter, MethodResult,
    MockRewriter, RewriterClient,
};

use config::{RunConfig, Stage};

const API_TOKEN_ENV: &str = "DUOTRACE_API_TOKEN";

#[derive(Parser)]
#[command(
    name = "duotrace",
    version,
    about = "Tools for hybrid fast/slow reasoning traces"
)]
struct Cli {
    /// TOML file overriding the built-in configuration defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for batch operations (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Seed for all randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Token-budget profile; the 8k stage requires branching disabled.
    #[arg(long, global = true, value_enum)]
    stage: Option<Stage>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check traces against the format and report every violation.
    ///
    /// The input is either JSONL with a trace_text field per line or a raw
    /// text file holding one trace.
    Validate {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
    },
    /// Score sampled trace groups: ScoreRequest lines in, ScoreRecord
    /// lines (reward breakdown plus group-normalized advantage) out.
    Score {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Run branching rollouts and dump one tree per run as JSON.
    Rollout {
        /// Generation script: JSONL of {"token", "probs"} rows.
        #[arg(long, value_name = "FILE", conflicts_with = "endpoint")]
        script: Option<PathBuf>,
        /// Live generation endpoint.
        #[arg(long, value_name = "URL")]
        endpoint: Option<String>,
        /// Prompt text, split on whitespace into prompt tokens.
        #[arg(long, default_value = "solve")]
        prompt: String,
        /// Number of independent trees; run i uses seed + i.
        #[arg(long, default_value_t = 1)]
        runs: u64,
        /// Gold answer; when given, complete nodes carry rewards and the
        /// best branch is marked.
        #[arg(long)]
        gold: Option<String>,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Convert a plain chain-of-thought corpus into labeled hybrid traces.
    Curate {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
        /// Use the offline rewriter instead of an HTTP service.
        #[arg(long, conflicts_with = "endpoint")]
        mock: bool,
        /// Rewriter service endpoint.
        #[arg(long, value_name = "URL")]
        endpoint: Option<String>,
    },
    /// Per-unit entropy report for one trace given its token events
    /// (JSONL of {"token", "top_logprobs"} whose tokens concatenate to the
    /// canonical trace text).
    Entropy {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Accuracy-efficiency table from per-method benchmark results.
    Eval {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Method name the others are compared against.
        #[arg(long, default_value = "baseline")]
        baseline: String,
        /// Also write the scored cells as CSV for plotting.
        #[arg(long, value_name = "FILE")]
        emit_plot_data: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    /// Findings in the data being checked (exit 1).
    Validation(String),
    /// Bad configuration or flag combination (exit 2).
    Config(String),
    /// Unreadable, unwritable, or undecodable files (exit 3).
    Io(String),
    /// A remote generation or rewriting service failed (exit 4).
    Client(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Client(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg)
            | CliError::Config(msg)
            | CliError::Io(msg)
            | CliError::Client(msg) => write!(f, "{msg}"),
        }
    }
}

fn main() -> ExitCode {
    // Die quietly instead of panicking when a pipe closes early, e.g. when
    // output is piped into `head`.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut run_config = RunConfig::load(cli.config.as_deref()).map_err(CliError::Config)?;
    if let Some(stage) = cli.stage {
        run_config.apply_stage(stage).map_err(CliError::Config)?;
    }
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))?;
    }

    match cli.command {
        Command::Validate { input } => cmd_validate(&input),
        Command::Score { input, output } => cmd_score(&input, &output, &run_config),
        Command::Rollout {
            script,
            endpoint,
            prompt,
            runs,
            gold,
            output,
        } => cmd_rollout(
            script.as_deref(),
            endpoint.as_deref(),
            &prompt,
            runs,
            gold.as_deref(),
            &output,
            &run_config,
            cli.seed,
        ),
        Command::Curate {
            input,
            output,
            mock,
            endpoint,
        } => cmd_curate(&input, &output, mock, endpoint.as_deref(), &run_config),
        Command::Entropy { input, output } => cmd_entropy(&input, &output, &run_config),
        Command::Eval {
            input,
            baseline,
            emit_plot_data,
        } => cmd_eval(&input, &baseline, emit_plot_data.as_deref()),
    }
}

fn read_error(path: &Path, err: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {err}", path.display()))
}

/// True when the first non-blank line is a JSON object carrying trace_text.
fn looks_like_jsonl(text: &str) -> bool {
    text.lines()
        .find(|line| !line.trim().is_empty())
        .map(|line| {
            line.trim_start().starts_with('{')
                && serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("trace_text").and_then(|t| t.as_str()).map(|_| ()))
                    .is_some()
        })
        .unwrap_or(false)
}

fn print_violations(report: &duotrace::ParseReport) {
    for violation in &report.violations {
        println!(
            "  {} at byte {}: {}",
            violation.code, violation.offset, violation.message
        );
    }
}

fn cmd_validate(input: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(input).map_err(|e| read_error(input, e))?;
    if text.trim().is_empty() {
        eprintln!("warning: {} holds no traces", input.display());
        println!("checked 0 trace(s), 0 invalid");
        return Ok(());
    }

    let mut checked = 0usize;
    let mut invalid = 0usize;
    if looks_like_jsonl(&text) {
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(line)
                .map_err(|e| CliError::Io(format!("{} line {}: {e}", input.display(), idx + 1)))?;
            let trace_text = value.get("trace_text").and_then(|t| t.as_str()).ok_or_else(|| {
                CliError::Io(format!(
                    "{} line {}: missing trace_text field",
                    input.display(),
                    idx + 1
                ))
            })?;
            checked += 1;
            let report = parse_trace(trace_text);
            if report.ok {
                println!("line {}: OK", idx + 1);
            } else {
                invalid += 1;
                println!("line {}: INVALID", idx + 1);
                print_violations(&report);
            }
        }
    } else {
        checked = 1;
        let report = parse_trace(text.trim_end());
        if report.ok {
            println!("trace: OK");
        } else {
            invalid = 1;
            println!("trace: INVALID");
            print_violations(&report);
        }
    }

    println!("checked {checked} trace(s), {invalid} invalid");
    if invalid > 0 {
        return Err(CliError::Validation(format!("{invalid} invalid trace(s)")));
    }
    Ok(())
}

fn cmd_score(input: &Path, output: &Path, run_config: &RunConfig) -> Result<(), CliError> {
    let reward_config = run_config.reward_config().map_err(CliError::Config)?;
    let requests: Vec<ScoreRequest> =
        jsonl::read_file(input).map_err(|e| read_error(input, e))?;
    let records = score_groups(&requests, &reward_config);

    let groups: BTreeSet<String> = records
        .iter()
        .map(|r| r.group_id.to_string())
        .collect();
    let file = fs::File::create(output).map_err(|e| read_error(output, e))?;
    let mut writer = BufWriter::new(file);
    jsonl::write_lines(&mut writer, &records).map_err(|e| read_error(output, e))?;
    writer.flush().map_err(|e| read_error(output, e))?;

    println!(
        "scored {} sample(s) in {} group(s) -> {}",
        records.len(),
        groups.len(),
        output.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_rollout(
    script: Option<&Path>,
    endpoint: Option<&str>,
    prompt: &str,
    runs: u64,
    gold: Option<&str>,
    output: &Path,
    run_config: &RunConfig,
    seed: u64,
) -> Result<(), CliError> {
    if runs == 0 {
        return Err(CliError::Config("--runs must be at least 1".into()));
    }
    let prompt_tokens: Vec<String> = prompt.split_whitespace().map(String::from).collect();
    if prompt_tokens.is_empty() {
        return Err(CliError::Config("prompt is empty".into()));
    }

    let oracle: Box<dyn GeneratorOracle + Sync> = match (script, endpoint) {
        (Some(path), _) => {
            Box::new(ScriptedOracle::from_file(path).map_err(|e| read_error(path, e))?)
        }
        (None, Some(url)) => {
            let mut oracle = HttpOracle::new(url, seed);
            if let Ok(token) = std::env::var(API_TOKEN_ENV) {
                oracle = oracle.with_auth_token(token);
            }
            Box::new(oracle)
        }
        (None, None) => {
            return Err(CliError::Config(
                "pass --script FILE or --endpoint URL".into(),
            ))
        }
    };

    let configs = (0..runs)
        .map(|i| run_config.rollout_config(seed.wrapping_add(i)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::Config)?;
    let trees = run_rollout_batch(&*oracle, &prompt_tokens, &configs).map_err(|e| match e {
        RolloutError::OracleFailure { .. } => CliError::Client(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;

    let reward_config = run_config.reward_config().map_err(CliError::Config)?;
    let file = fs::File::create(output).map_err(|e| read_error(output, e))?;
    let mut writer = BufWriter::new(file);
    let mut nodes = 0usize;
    let mut complete = 0usize;
    for tree in &trees {
        nodes += tree.nodes.len();
        complete += tree.nodes.iter().filter(|n| n.complete).count();
        let dump = dump_tree(tree, gold, &reward_config);
        let line = serde_json::to_string(&dump).map_err(|e| read_error(output, e))?;
        writer
            .write_all(line.as_bytes())
            .and_then(|()| writer.write_all(b"\n"))
            .map_err(|e| read_error(output, e))?;
    }
    writer.flush().map_err(|e| read_error(output, e))?;

    println!(
        "{} run(s), {nodes} node(s) ({complete} complete) -> {}",
        trees.len(),
        output.display()
    );
    Ok(())
}

fn cmd_curate(
    input: &Path,
    output: &Path,
    mock: bool,
    endpoint: Option<&str>,
    run_config: &RunConfig,
) -> Result<(), CliError> {
    let client: Box<dyn RewriterClient> = if mock {
        Box::new(MockRewriter::new())
    } else if let Some(url) = endpoint {
        let mut client = HttpRewriter::new(url);
        if let Ok(token) = std::env::var(API_TOKEN_ENV) {
            client = client.with_auth_token(token);
        }
        Box::new(client)
    } else {
        return Err(CliError::Config("pass --mock or --endpoint URL".into()));
    };

    let curator_config = run_config.curator_config().map_err(CliError::Config)?;
    let report = curate_corpus(input, output, &*client, &curator_config).map_err(|e| match e {
        CuratorError::InvalidConfig(msg) => CliError::Config(msg),
        other => CliError::Io(other.to_string()),
    })?;

    let effective = PathBuf::from(format!("{}.config.toml", output.display()));
    fs::write(&effective, run_config.to_toml()).map_err(|e| read_error(&effective, e))?;

    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    if report.processed == 0 && report.skipped_client_error > 0 {
        return Err(CliError::Client(format!(
            "every record failed the rewriter ({} client error(s))",
            report.skipped_client_error
        )));
    }
    Ok(())
}

fn cmd_entropy(input: &Path, output: &Path, run_config: &RunConfig) -> Result<(), CliError> {
    let file = fs::File::open(input).map_err(|e| read_error(input, e))?;
    let ingested =
        read_token_events(BufReader::new(file)).map_err(|e| read_error(input, e))?;
    if ingested.events.is_empty() {
        return Err(CliError::Validation("input holds no token events".into()));
    }
    if ingested.mean_truncated_mass > 0.01 {
        log::warn!(
            "top-k truncation discarded {:.1}% of probability mass on average",
            ingested.mean_truncated_mass * 100.0
        );
    }

    let text: String = ingested
        .events
        .iter()
        .map(|e| e.token_text.as_str())
        .collect();
    let parsed = parse_trace(&text);
    let trace = match parsed.trace {
        Some(trace) => trace,
        None => {
            let first = parsed
                .violations
                .first()
                .map(|v| format!("{} at byte {}: {}", v.code, v.offset, v.message))
                .unwrap_or_default();
            return Err(CliError::Validation(format!(
                "token stream is not a valid trace ({} violation(s); first: {first})",
                parsed.violations.len()
            )));
        }
    };

    let unit_events =
        align_token_events(&trace, &ingested.events).map_err(|e| CliError::Validation(e.to_string()))?;
    let k = run_config.branch_config().map_err(CliError::Config)?.k;
    let report = analyze_trace_entropy(&trace, &unit_events, k)
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(output, json).map_err(|e| read_error(output, e))?;
    println!(
        "entropy report for {} unit(s) (k = {k}) -> {}",
        report.per_unit.len(),
        output.display()
    );
    Ok(())
}

/// RFC 4180 quoting for the two text columns of the plot CSV.
fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

fn cmd_eval(input: &Path, baseline: &str, plot: Option<&Path>) -> Result<(), CliError> {
    let rows: Vec<MethodResult> = jsonl::read_file(input).map_err(|e| read_error(input, e))?;
    let report = build_report(&rows, baseline).map_err(|e| match e {
        MetricsError::MissingBaseline { .. } => CliError::Config(e.to_string()),
        other => CliError::Io(other.to_string()),
    })?;
    print!("{report}");

    if let Some(path) = plot {
        let mut csv = String::from("method,benchmark,accuracy_pct,mean_tokens,reduction_pct,aes\n");
        for method in &report.methods {
            for cell in method.cells.iter().flatten() {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    csv_field(&method.method),
                    csv_field(&cell.benchmark),
                    cell.accuracy_pct,
                    cell.mean_tokens,
                    cell.reduction_pct,
                    cell.aes
                ));
            }
        }
        fs::write(path, csv).map_err(|e| read_error(path, e))?;
        println!("plot data -> {}", path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_detection_requires_trace_text() {
        assert!(looks_like_jsonl("{\"trace_text\": \"x\"}\n"));
        assert!(looks_like_jsonl("\n  \n{\"trace_text\": \"x\", \"id\": 1}\n"));
        assert!(!looks_like_jsonl("{\"text\": \"x\"}\n"));
        assert!(!looks_like_jsonl("<think> <easy> a </easy> </think> 4"));
        assert!(!looks_like_jsonl(""));
    }

    #[test]
    fn csv_fields_quote_only_when_needed() {
        assert_eq!(csv_field("MATH500"), "MATH500");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(CliError::Validation(String::new()).exit_code(), 1);
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Io(String::new()).exit_code(), 3);
        assert_eq!(CliError::Client(String::new()).exit_code(), 4);
    }
}
