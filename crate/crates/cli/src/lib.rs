//! The `arena` operator command line.
//!
//! Every command writes its report to the supplied writer (stdout in the
//! binary) and returns a [`CliError`] whose [`CliError::exit_code`] is what the
//! process exits with: 2 for bad input, 3 for failures while running.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use arena_core::simlab::{load_scenario, run_scenario, SimulationSummary};
use arena_core::store::StoreError;
use arena_core::{
    stopping_report, Outcome, RatingStream, ScoreKind, SeedId, StandingsReport, StoppingReport, Store, StoreConfig,
    TaskId,
};
use arena_service::{AppState, EngineConfig, SystemClock};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "arena", version, about = "Run, replay and serve pairwise-preference agent evaluations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run simulated tournaments from a scenario file.
    Simulate(SimulateArgs),
    /// Replay an event log into final standings.
    Score(ScoreArgs),
    /// Estimate how settled each task's ranking is.
    Stopping(StoppingArgs),
    /// Check an engine config or scenario file.
    Validate(ValidateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum StreamArg {
    #[default]
    Official,
    Provisional,
}

impl From<StreamArg> for RatingStream {
    fn from(s: StreamArg) -> Self {
        match s {
            StreamArg::Official => RatingStream::Official,
            StreamArg::Provisional => RatingStream::Provisional,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Number of consecutive RNG seeds, starting at the scenario's `seed`.
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    /// Overrides the scenario's first seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for results.json, judgments.csv and summary.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct LogArgs {
    /// A task log file or a directory of them.
    #[arg(long)]
    pub log: PathBuf,
    /// Engine config whose rating parameters the log was recorded with.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub stream: StreamArg,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub log: LogArgs,
    /// `mean` or `conservative:<k>`.
    #[arg(long, default_value = "mean")]
    pub score_kind: ScoreKind,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct StoppingArgs {
    #[command(flatten)]
    pub log: LogArgs,
    #[arg(long)]
    pub threshold: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Only report this task.
    #[arg(long)]
    pub task: Option<TaskId>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = true)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `service.bind`.
    #[arg(long)]
    pub bind: Option<String>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Corrupt { .. } | StoreError::InvalidInput(_) | StoreError::Unprocessable(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => simulate(&args, out),
        Command::Score(args) => score(&args, out),
        Command::Stopping(args) => stopping(&args, out),
        Command::Validate(args) => validate(&args, out),
        Command::Serve(args) => serve(&args, out),
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory, so
/// readers never see a half-written report.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_error(path, e))?;
    // Temp files start owner-only; reports are ordinary files.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let perms = std::fs::Permissions::from_mode(0o644);
        tmp.as_file().set_permissions(perms).map_err(|e| io_error(path, e))?;
    }
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
    bytes.push(b'\n');
    bytes
}

fn emit(out: &mut dyn Write, bytes: &[u8]) -> Result<(), CliError> {
    out.write_all(bytes)
        .and_then(|()| out.flush())
        .map_err(|e| CliError::Runtime(format!("writing output: {e}")))
}

fn load_config(path: &Path) -> Result<EngineConfig, CliError> {
    EngineConfig::load(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Replay a log with the rating parameters it was recorded under.
pub fn load_log(args: &LogArgs) -> Result<Store, CliError> {
    let config = match &args.config {
        Some(path) => load_config(path)?.store_config(),
        None => StoreConfig::default(),
    };
    if !args.log.exists() {
        return Err(CliError::Runtime(format!("{}: no such file or directory", args.log.display())));
    }
    Ok(Store::load(&args.log, config)?)
}

// ---- simulate ---------------------------------------------------------------

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct JudgmentRow<'a> {
    scheduler: &'a str,
    seed: u64,
    task_id: &'a TaskId,
    seq: usize,
    agent_a: &'a str,
    agent_b: &'a str,
    eval_seed: &'a SeedId,
    quality_a: f64,
    quality_b: f64,
    outcome: Outcome,
}

pub fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut scenario = load_scenario(&args.scenario)
        .map_err(|e| CliError::Validation(format!("{}: {e}", args.scenario.display())))?;
    if args.seeds == 0 {
        return Err(CliError::Validation("--seeds must be >= 1".into()));
    }
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let (results, summary) = run_scenario(&scenario, args.seeds).map_err(|e| CliError::Runtime(e.to_string()))?;

    std::fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;

    let runs: Vec<_> = results
        .iter()
        .map(|(kind, seed, result)| serde_json::json!({ "scheduler": kind, "seed": seed, "result": result }))
        .collect();
    let results_doc = serde_json::json!({ "schemaVersion": REPORT_SCHEMA_VERSION, "runs": runs });
    write_atomic(&args.out.join("results.json"), &to_json(&results_doc))?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    for (kind, seed, result) in &results {
        let scheduler = serde_json::to_value(kind).expect("scheduler kind serializes");
        let scheduler = scheduler.as_str().unwrap_or_default();
        for j in &result.judgments {
            csv.serialize(JudgmentRow {
                scheduler,
                seed: *seed,
                task_id: &j.task_id,
                seq: j.seq,
                agent_a: j.agent_a.as_str(),
                agent_b: j.agent_b.as_str(),
                eval_seed: &j.eval_seed,
                quality_a: j.quality_a,
                quality_b: j.quality_b,
                outcome: j.outcome,
            })
            .map_err(|e| CliError::Runtime(format!("judgments.csv: {e}")))?;
        }
    }
    let csv = csv.into_inner().map_err(|e| CliError::Runtime(format!("judgments.csv: {e}")))?;
    write_atomic(&args.out.join("judgments.csv"), &csv)?;

    let summary_doc = SummaryDoc {
        schema_version: REPORT_SCHEMA_VERSION,
        summary: &summary,
    };
    let summary_bytes = to_json(&summary_doc);
    write_atomic(&args.out.join("summary.json"), &summary_bytes)?;

    match args.format {
        Format::Json => emit(out, &summary_bytes),
        Format::Text => emit(out, summary_text(&summary).as_bytes()),
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SummaryDoc<'a> {
    schema_version: u32,
    #[serde(flatten)]
    summary: &'a SimulationSummary,
}

fn summary_text(summary: &SimulationSummary) -> String {
    let mut s = format!(
        "{} seed(s), tau target {}\n{:<10} {:<16} {:>12} {:>18} {:>8}\n",
        summary.seeds.len(),
        summary.tau_target,
        "scheduler",
        "task",
        "median tau",
        "median to target",
        "reached"
    );
    for (scheduler, tasks) in &summary.by_scheduler {
        for (task, t) in tasks {
            let to_target = t.median_judgments_to_target.map_or("never".to_owned(), |n| format!("{n}"));
            s.push_str(&format!(
                "{scheduler:<10} {:<16} {:>12.4} {to_target:>18} {:>8}\n",
                task.as_str(),
                t.median_kendall_tau,
                t.runs_reaching_target
            ));
        }
    }
    s
}

// ---- score ------------------------------------------------------------------

/// What `arena score` reports: the same document the service serves at
/// `/standings/final`.
pub fn standings_from_log(args: &LogArgs, kind: ScoreKind) -> Result<StandingsReport, CliError> {
    Ok(load_log(args)?.final_standings(args.stream.into(), kind))
}

pub fn score(args: &ScoreArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let report = standings_from_log(&args.log, args.score_kind)?;
    let json = to_json(&report);
    if let Some(path) = &args.out {
        write_atomic(path, &json)?;
    }
    match args.format {
        Format::Json => emit(out, &json),
        Format::Text => emit(out, standings_text(&report).as_bytes()),
    }
}

fn standings_text(report: &StandingsReport) -> String {
    let s = &report.standing;
    if s.rank_order.is_empty() {
        return format!("no ranked entrants ({} task(s))\n", s.tasks.len());
    }
    let mut text = format!("{:>4}  {:<24} {:>9}", "rank", "entrant", "score");
    for task in &s.tasks {
        text.push_str(&format!(" {:>12}", task.as_str()));
    }
    text.push('\n');
    for (i, agent) in s.rank_order.iter().enumerate() {
        text.push_str(&format!("{:>4}  {:<24} {:>9.4}", i + 1, agent.as_str(), s.final_score[agent]));
        for task in &s.tasks {
            text.push_str(&format!(" {:>12.4}", s.per_task_z[task][agent]));
        }
        text.push('\n');
    }
    for ex in &s.excluded {
        let missing: Vec<&str> = ex.missing_tasks.iter().map(|t| t.as_str()).collect();
        text.push_str(&format!("excluded {}: no score on {}\n", ex.agent_id, missing.join(", ")));
    }
    text
}

// ---- stopping ---------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StoppingDoc {
    pub schema_version: u32,
    pub stream: RatingStream,
    pub seed: u64,
    pub tasks: BTreeMap<TaskId, StoppingReport>,
}

pub fn stopping_from_log(args: &StoppingArgs) -> Result<StoppingDoc, CliError> {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(CliError::Validation(format!("--threshold must lie in [0, 1], got {}", args.threshold)));
    }
    if args.samples == 0 {
        return Err(CliError::Validation("--samples must be >= 1".into()));
    }
    let store = load_log(&args.log)?;
    let stream: RatingStream = args.log.stream.into();
    let task_ids: Vec<TaskId> = match &args.task {
        Some(t) if store.task(t).is_none() => {
            return Err(CliError::Validation(format!("task {t} is not in the log")));
        }
        Some(t) => vec![t.clone()],
        None => store.tasks().map(|t| t.task_id.clone()).collect(),
    };
    let tasks = task_ids
        .into_iter()
        .map(|t| {
            let board = store.board(&t, stream).expect("task exists");
            let report = stopping_report(board, args.samples, args.seed, args.threshold);
            (t, report)
        })
        .collect();
    Ok(StoppingDoc {
        schema_version: REPORT_SCHEMA_VERSION,
        stream,
        seed: args.seed,
        tasks,
    })
}

pub fn stopping(args: &StoppingArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let doc = stopping_from_log(args)?;
    let json = to_json(&doc);
    if let Some(path) = &args.out {
        write_atomic(path, &json)?;
    }
    match args.format {
        Format::Json => emit(out, &json),
        Format::Text => {
            let mut text = String::new();
            for (task, r) in &doc.tasks {
                text.push_str(&format!(
                    "{task}: p_stable {:.4} vs threshold {} -> {}\n",
                    r.p_stable_ranking,
                    r.threshold,
                    if r.stable { "stable" } else { "keep judging" }
                ));
                for pair in &r.per_pair_flip_prob {
                    text.push_str(&format!("  {} > {}  flip {:.4}\n", pair.upper, pair.lower, pair.flip_prob));
                }
            }
            emit(out, text.as_bytes())
        }
    }
}

// ---- validate ---------------------------------------------------------------

pub fn validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut checked = Vec::new();
    if let Some(path) = &args.config {
        load_config(path)?;
        checked.push(("config", path));
    }
    if let Some(path) = &args.scenario {
        load_scenario(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        checked.push(("scenario", path));
    }
    match args.format {
        Format::Json => {
            let files: Vec<_> = checked
                .iter()
                .map(|(kind, path)| serde_json::json!({ "kind": kind, "path": path, "valid": true }))
                .collect();
            emit(out, &to_json(&serde_json::json!({ "schemaVersion": REPORT_SCHEMA_VERSION, "files": files })))
        }
        Format::Text => {
            let text: String = checked
                .iter()
                .map(|(kind, path)| format!("{kind} {}: ok\n", path.display()))
                .collect();
            emit(out, text.as_bytes())
        }
    }
}

// ---- serve ------------------------------------------------------------------

pub fn serve(args: &ServeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let bind = args.bind.clone().unwrap_or_else(|| config.service.bind.clone());
    let state = AppState::from_config(&config, Arc::new(SystemClock)).map_err(|e| CliError::Runtime(e.to_string()))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(format!("starting runtime: {e}")))?;
    emit(out, format!("listening on {bind}\n").as_bytes())?;
    runtime
        .block_on(arena_service::serve(state, &bind))
        .map_err(|e| CliError::Runtime(format!("{bind}: {e}")))
}
