//! `acquest` command-line front end.
//!
//! Exit codes: 0 success, 2 input or validation error, 1 internal error.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::baselines::{bme_estimate, mle_estimate, Bounds, GaussianBelief};
use crate::estimator::{
    estimate_current_ability, AbilityState, TestResponse, DEFAULT_C, DEFAULT_R,
};
use crate::experiments::{
    run_learning, run_table1, run_table2, run_trajectories, ExperimentOptions,
};
use crate::irt::Item;
use crate::simulator::{EstimatorKind, Parallelism};

pub const SEED_ENV: &str = "ACQUEST_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "acquest",
    version,
    about = "Acquisition-grade ability estimation and simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score one test and fold it into a learner's persisted state.
    Estimate(EstimateArgs),
    /// Run a Monte-Carlo experiment and write CSV tables.
    Simulate(SimulateArgs),
    /// Score one test with the proposed, MLE and BME estimators.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct TestFiles {
    /// Item bank CSV with header `item_id,difficulty`.
    #[arg(long)]
    pub items: PathBuf,
    /// Responses CSV with header `item_id,correct` (correct is 0 or 1).
    #[arg(long)]
    pub responses: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub files: TestFiles,
    /// Learner state JSON; created when missing.
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long, default_value_t = DEFAULT_R)]
    pub r: f64,
    #[arg(long, default_value_t = DEFAULT_C)]
    pub c: f64,
    /// EMA window. Defaults to 12 for a new state, or the stored window.
    #[arg(long)]
    pub n: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Table1,
    Table2,
    Trajectory,
    Learning,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub experiment: Experiment,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Estimator for table1/trajectory/learning; restricts table2 to one file.
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorKind>,
    /// Read the learning-increment spread as a variance.
    #[arg(long)]
    pub spread_is_variance: bool,
    /// Worker threads (0 = all cores). Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub files: TestFiles,
    #[arg(long, default_value_t = 3.0)]
    pub prior_mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub prior_sigma: f64,
    #[arg(long, default_value_t = DEFAULT_R)]
    pub r: f64,
    #[arg(long, default_value_t = DEFAULT_C)]
    pub c: f64,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "input error: {msg}"),
            CliError::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn internal<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Internal(format!("{context}: {e}"))
}

/// Written next to every output artifact.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(manifest).map_err(internal("manifest"))?;
    fs::write(path, json + "\n").map_err(internal("writing manifest"))
}

#[derive(Debug, Deserialize)]
struct ItemRow {
    item_id: String,
    difficulty: f64,
}

#[derive(Debug, Deserialize)]
struct ResponseRow {
    item_id: String,
    correct: u8,
}

fn read_rows<T: for<'de> Deserialize<'de>>(
    path: &Path,
    required: &[&str],
) -> Result<Vec<T>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .clone();
    for col in required {
        if !headers.iter().any(|h| h == *col) {
            return Err(CliError::Input(format!(
                "{}: missing column `{col}`",
                path.display()
            )));
        }
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| CliError::Input(format!("{}: {e}", path.display()))))
        .collect()
}

/// Loads the item bank and responses into one administered test.
pub fn load_test(files: &TestFiles) -> Result<TestResponse, CliError> {
    let bank_rows: Vec<ItemRow> = read_rows(&files.items, &["item_id", "difficulty"])?;
    let mut bank: HashMap<String, Item> = HashMap::with_capacity(bank_rows.len());
    for row in bank_rows {
        let item = Item::new(row.item_id.clone(), row.difficulty)?;
        if bank.insert(row.item_id.clone(), item).is_some() {
            return Err(CliError::Input(format!(
                "duplicate item id `{}`",
                row.item_id
            )));
        }
    }
    let responses: Vec<ResponseRow> = read_rows(&files.responses, &["item_id", "correct"])?;
    let mut items = Vec::with_capacity(responses.len());
    let mut correct = Vec::with_capacity(responses.len());
    for row in responses {
        let item = bank
            .get(&row.item_id)
            .ok_or_else(|| CliError::Input(format!("unknown item id `{}`", row.item_id)))?;
        let answer = match row.correct {
            0 => false,
            1 => true,
            other => {
                return Err(CliError::Input(format!(
                    "item `{}`: correct must be 0 or 1, got {other}",
                    row.item_id
                )))
            }
        };
        items.push(item.clone());
        correct.push(answer);
    }
    Ok(TestResponse::new(items, correct)?)
}

fn load_state(path: &Path, n: Option<u32>) -> Result<AbilityState, CliError> {
    let mut state = if path.exists() {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let state: AbilityState = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        state.validate()?;
        state
    } else {
        AbilityState::new(n.unwrap_or(12))?
    };
    if let Some(n) = n {
        if n != state.n_window {
            let fresh = AbilityState::new(n)?;
            state.n_window = fresh.n_window;
            state.alpha = fresh.alpha;
        }
    }
    Ok(state)
}

fn cmd_estimate(args: &EstimateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let started = now();
    let test = load_test(&args.files)?;
    let state = load_state(&args.state, args.n)?;
    let next = state.process_test(&test, args.r, args.c)?;
    let last = next
        .history
        .last()
        .ok_or_else(|| CliError::Internal("history is empty after a test".into()))?;
    let json = serde_json::to_string_pretty(&next).map_err(internal("serializing state"))?;
    fs::write(&args.state, json + "\n").map_err(internal("writing state"))?;
    writeln!(
        out,
        "ability={:.4} estimate={:.4} variance={:.4} s={:.4}",
        last.ability, last.estimate.mean, last.estimate.variance, last.estimate.s_used
    )
    .map_err(internal("stdout"))?;

    let mut manifest_path = args.state.clone().into_os_string();
    manifest_path.push(".manifest.json");
    write_manifest(
        Path::new(&manifest_path),
        &RunManifest {
            command: "estimate".into(),
            config: serde_json::json!({
                "items": args.files.items,
                "responses": args.files.responses,
                "state": args.state,
                "r": args.r,
                "c": args.c,
                "n": next.n_window,
            }),
            seed: None,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started,
            finished: now(),
        },
    )
}

fn write_csv_file<F>(path: &Path, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut io::BufWriter<fs::File>) -> Result<(), csv::Error>,
{
    let file =
        fs::File::create(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut buf = io::BufWriter::new(file);
    write(&mut buf).map_err(internal("writing csv"))?;
    buf.flush().map_err(internal("writing csv"))
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let started = now();
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.out.display())))?;
    if args.reps == 0 {
        return Err(CliError::Input("--reps must be positive".into()));
    }
    let opts = ExperimentOptions {
        replications: args.reps,
        seed: args.seed,
        estimator: args.estimator.unwrap_or(EstimatorKind::Proposed),
        spread_is_variance: args.spread_is_variance,
        parallelism: match args.threads {
            0 => Parallelism::Auto,
            1 => Parallelism::Sequential,
            n => Parallelism::Threads(n),
        },
    };
    let mut written = Vec::new();
    match args.experiment {
        Experiment::Table1 => {
            let table = run_table1(&opts)?;
            let path = args.out.join("table1.csv");
            write_csv_file(&path, |w| table.write_csv(w))?;
            written.push(path);
        }
        Experiment::Table2 => {
            let estimators = match args.estimator {
                Some(e) => vec![e],
                None => EstimatorKind::ALL.to_vec(),
            };
            for estimator in estimators {
                let table = run_table2(&opts, estimator)?;
                let path = args.out.join(table.file_name());
                write_csv_file(&path, |w| table.write_csv(w))?;
                written.push(path);
            }
        }
        Experiment::Trajectory => {
            for run in run_trajectories(&opts)? {
                let path = args.out.join(run.file_name());
                write_csv_file(&path, |w| run.write_csv(w))?;
                written.push(path);
            }
        }
        Experiment::Learning => {
            let table = run_learning(&opts)?;
            let path = args.out.join("learning.csv");
            write_csv_file(&path, |w| table.write_csv(w))?;
            written.push(path);
        }
    }
    for path in &written {
        writeln!(out, "wrote {}", path.display()).map_err(internal("stdout"))?;
    }
    write_manifest(
        &args.out.join("manifest.json"),
        &RunManifest {
            command: "simulate".into(),
            config: serde_json::to_value(args).map_err(internal("manifest"))?,
            seed: Some(args.seed),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started,
            finished: now(),
        },
    )
}

fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let test = load_test(&args.files)?;
    let prior = GaussianBelief::new(args.prior_mu, args.prior_sigma)?;
    let proposed = estimate_current_ability(&test, args.r, args.c)?;
    let mle = mle_estimate(&test, args.prior_mu, Bounds::default());
    let bme = bme_estimate(&test, prior);
    writeln!(
        out,
        "proposed={:.4} mle={:.4} bme={:.4} proposed_variance={:.4} s={:.4} bme_sigma={:.4}",
        proposed.mean,
        mle,
        bme.mu(),
        proposed.variance,
        proposed.s_used,
        bme.sigma()
    )
    .map_err(internal("stdout"))
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Estimate(args) => cmd_estimate(args, out),
        Command::Simulate(args) => cmd_simulate(args, out),
        Command::Compare(args) => cmd_compare(args, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("acquest: {e}");
            e.exit_code()
        }
    }
}
