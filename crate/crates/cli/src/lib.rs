//! Command-line entry points: subgraph building, training, evaluation,
//! ablation and layer sweeps, synthetic data and complexity timing.

pub mod commands;
pub mod report;
pub mod settings;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use drgn::Precision;

pub use commands::HASH_PROVIDER_SEED;
pub use report::{metrics_jsonl, predictions_tsv, summary_table, Outputs, PredictionRow, PREDICTIONS_HEADER};
pub use settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "drgn", version, about = "Dynamic relevance graph networks for multiple-choice QA")]
struct Cli {
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// 32 or 64; overrides the `precision` key.
    #[arg(long, global = true)]
    precision: Option<String>,
    /// Log warnings only.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Overrides {
    /// key=value pairs, applied after the config file.
    #[arg(value_name = "KEY=VALUE")]
    pairs: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Link entities and dump per-candidate subgraphs for `data`.
    BuildSubgraphs(Overrides),
    /// Train on `train`, early-stop on `dev`, write checkpoint and reports.
    Train(Overrides),
    /// Score `data` with `checkpoint`.
    Eval(Overrides),
    /// Train the incremental ablation ladder.
    Ablate {
        #[arg(long, default_value = "table5")]
        preset: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train once per layer count.
    SweepLayers {
        /// Inclusive range such as 1..5.
        #[arg(long = "l", default_value = "1..5")]
        layers: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Generate the synthetic missing-edge task.
    Synth(Overrides),
    /// Time graph layers against node count and depth.
    Scale(Overrides),
}

impl Command {
    fn overrides(&self) -> &[String] {
        match self {
            Command::BuildSubgraphs(o) | Command::Train(o) | Command::Eval(o) | Command::Synth(o) | Command::Scale(o) => &o.pairs,
            Command::Ablate { overrides, .. } | Command::SweepLayers { overrides, .. } => &overrides.pairs,
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let s = Settings::resolve(cli.config.as_deref(), cli.command.overrides(), cli.seed, cli.precision.as_deref())?;
    log::info!("resolved config: {}", s.one_line());
    let out = s.path("out")?;
    macro_rules! typed {
        ($f:ident $(, $arg:expr)*) => {
            match s.precision()? {
                Precision::F32 => commands::$f::<f32>(&s $(, $arg)*)?,
                Precision::F64 => commands::$f::<f64>(&s $(, $arg)*)?,
            }
        };
    }
    let produced = match &cli.command {
        Command::BuildSubgraphs(_) => commands::build_subgraphs_cmd(&s)?,
        Command::Train(_) => typed!(train_cmd),
        Command::Eval(_) => typed!(eval_cmd),
        Command::Ablate { preset, .. } => typed!(ablate_cmd, preset),
        Command::SweepLayers { layers, .. } => typed!(sweep_cmd, layers),
        Command::Synth(_) => commands::synth_cmd(&s, &out)?,
        Command::Scale(_) => typed!(scale_cmd),
    };
    let written = produced.outputs.commit(&out)?;
    for p in &written {
        log::info!("wrote {}", p.display());
    }
    print!("{}", produced.stdout);
    Ok(())
}

/// Runs the CLI on `argv` (program name first) and returns the exit code:
/// 0 on success, 1 when the command fails, 2 for usage errors. Failures are
/// reported as a single `error: ...` line on standard error.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return 2;
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Warn
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            1
        }
    }
}
