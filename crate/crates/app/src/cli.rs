//! Command line front end of the pipeline.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{AppConfig, Overrides, ProviderKind};
use crate::error::AppError;
use crate::pipeline::{self, Context};
use crate::service;
use crate::store::{StageName, Store};

#[derive(Debug, Parser)]
#[command(name = "gazelens", version, about = "Gaze pattern mining, review and difficulty prediction")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Configuration file; defaults to ./gazelens.toml, then to the run's own snapshot.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run to create (ingest) or operate on; defaults to the newest run.
    #[arg(long, global = true)]
    pub run_id: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ProviderKind>,
    /// Directory holding `runs/`.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, clean and AOI-annotate a gaze export into a new run.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        aoi: Option<PathBuf>,
    },
    /// Write horizontal and vertical segment payloads.
    Segment,
    /// Mine behavioral patterns from the segments.
    Mine,
    /// Score composite patterns against literature evidence.
    Score {
        #[arg(long)]
        evidence: Option<PathBuf>,
    },
    /// Import expert verdicts and compute agreement.
    Kappa {
        #[arg(long)]
        verdicts: Option<PathBuf>,
    },
    /// Train the sequence model on experts and flag student anomalies.
    Detect,
    /// Predict per-question difficulty across prompting settings.
    PredictDifficulty,
    /// Write a markdown summary of every stage.
    Report,
    /// Serve the review API and UI bundle.
    Serve {
        #[arg(long)]
        addr: Option<String>,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Generate synthetic inputs.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// A gaze export with AOI file, questions and a ready config.
    Data {
        #[arg(long)]
        out: PathBuf,
    },
    /// Literature evidence and expert verdicts for a run's composite patterns.
    Panel {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.85)]
        agreement: f64,
    },
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(message) => {
            println!("{message}");
            0
        }
        Err(e) => {
            eprintln!("error: {}", crate::config::one_line(&e.to_string()));
            e.exit_code()
        }
    }
}

fn overrides(global: &GlobalArgs) -> Overrides {
    Overrides { seed: global.seed, provider: global.provider }
}

fn store_for(global: &GlobalArgs, config: &AppConfig) -> Store {
    Store::new(global.store.clone().unwrap_or_else(|| config.store.clone()))
}

/// Opens the selected run with its effective configuration: an explicit
/// `--config` wins over the run snapshot, and flags win over both.
fn open_context(global: &GlobalArgs) -> Result<Context, AppError> {
    let base = AppConfig::load(global.config.as_deref(), &overrides(global))?;
    let store = store_for(global, &base);
    let run = match &global.run_id {
        Some(id) => store.open(id)?,
        None => store.latest()?,
    };
    let mut config = if global.config.is_some() {
        base
    } else {
        let snapshot = run.manifest()?.config;
        serde_json::from_value(snapshot)
            .map_err(|e| AppError::Config(format!("run {} has an unreadable config snapshot: {e}", run.id)))?
    };
    config.apply(&overrides(global));
    Ok(Context { config, run })
}

fn stage(global: &GlobalArgs, name: StageName, f: impl FnOnce(&Context) -> Result<String, AppError>) -> Result<String, AppError> {
    let ctx = open_context(global)?;
    pipeline::tracked(&ctx.run, name, || f(&ctx)).map(|m| format!("{}: {m}", ctx.run.id))
}

fn execute(cli: Cli) -> Result<String, AppError> {
    let global = &cli.global;
    match cli.command {
        Command::Ingest { input, aoi } => ingest(global, input.as_deref(), aoi.as_deref()),
        Command::Segment => stage(global, StageName::Segment, pipeline::segment),
        Command::Mine => stage(global, StageName::Mine, pipeline::mine),
        Command::Score { evidence } => stage(global, StageName::Score, |c| pipeline::score(c, evidence.as_deref())),
        Command::Kappa { verdicts } => stage(global, StageName::Kappa, |c| pipeline::kappa(c, verdicts.as_deref())),
        Command::Detect => stage(global, StageName::Detect, pipeline::detect),
        Command::PredictDifficulty => stage(global, StageName::PredictDifficulty, pipeline::predict_difficulty),
        Command::Report => stage(global, StageName::Report, pipeline::report),
        Command::Serve { addr, ui_dir } => serve(global, addr, ui_dir),
        Command::Synth(SynthCommand::Data { out }) => {
            let config = AppConfig::load(global.config.as_deref(), &overrides(global))?;
            pipeline::synth_data(&out, config.seed)
        }
        Command::Synth(SynthCommand::Panel { out, agreement }) => {
            let ctx = open_context(global)?;
            pipeline::synth_panel(&ctx.run, &out, ctx.config.seed, agreement)
        }
    }
}

fn ingest(global: &GlobalArgs, input: Option<&Path>, aoi: Option<&Path>) -> Result<String, AppError> {
    let config = AppConfig::load(global.config.as_deref(), &overrides(global))?;
    let store = store_for(global, &config);
    let snapshot = serde_json::to_value(&config).expect("config serializes");
    let run = match &global.run_id {
        Some(id) => match store.open(id) {
            Ok(run) => run,
            Err(crate::store::StoreError::RunNotFound(_)) => store.create_run(Some(id), config.seed, snapshot)?,
            Err(e) => return Err(e.into()),
        },
        None => store.create_run(None, config.seed, snapshot)?,
    };
    let ctx = Context { config, run };
    pipeline::tracked(&ctx.run, StageName::Ingest, || pipeline::ingest(&ctx, input, aoi))
        .map(|m| format!("{}: {m}", ctx.run.id))
}

fn serve(global: &GlobalArgs, addr: Option<String>, ui_dir: Option<PathBuf>) -> Result<String, AppError> {
    let config = AppConfig::load(global.config.as_deref(), &overrides(global))?;
    let store = store_for(global, &config);
    let addr = addr.unwrap_or_else(|| config.serve.addr.clone());
    let ui_dir = ui_dir.or_else(|| config.serve.ui_dir.clone());
    let runtime = tokio::runtime::Runtime::new().map_err(|e| AppError::Config(format!("cannot start runtime: {e}")))?;
    runtime
        .block_on(service::serve(store, &addr, ui_dir))
        .map_err(|e| AppError::Config(format!("cannot serve on {addr}: {e}")))?;
    Ok("server stopped".to_string())
}
