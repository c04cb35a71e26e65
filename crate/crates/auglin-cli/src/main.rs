//! Experiment CLI: run presets or custom sweeps, list presets, validate
//! configs, and render CSV results as SVG plots.
//!
//! Exit code 0 on success; on failure a single machine-readable line
//! `error: <kind>: <message>` goes to stderr and the exit code is nonzero.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use auglin::exp::{self, PlotSpec};

#[derive(Parser)]
#[command(name = "auglin", about = "Data augmentation experiments for linear models", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a config-file sweep and write a CSV.
    Run(RunArgs),
    /// List the available presets.
    ListPresets,
    /// Render a CSV produced by `run` as an SVG plot.
    Plot(PlotArgs),
    /// Parse and validate a config file without running it.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// Preset name (see `list-presets`).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Config file for a custom sweep.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; defaults to `<AUGLIN_OUT_DIR|.>/<name>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override entries `key=value` (preset keys, or `section.key` for configs).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct PlotArgs {
    /// Input CSV.
    #[arg(long)]
    csv: PathBuf,
    /// Column for the x axis.
    #[arg(long)]
    x: String,
    /// One or more y columns.
    #[arg(long, required = true)]
    y: Vec<String>,
    /// Group rows by this column (one series per value).
    #[arg(long)]
    group_by: Option<String>,
    #[arg(long)]
    logx: bool,
    #[arg(long)]
    logy: bool,
    /// Output SVG path; defaults next to the CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plot title.
    #[arg(long, default_value = "")]
    title: String,
}

fn out_dir() -> PathBuf {
    std::env::var_os("AUGLIN_OUT_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

fn parse_overrides(set: &[String]) -> Result<Vec<(String, String)>, String> {
    set.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| format!("expected KEY=VALUE, got '{kv}'"))
        })
        .collect()
}

fn run(args: &RunArgs) -> Result<(), String> {
    let overrides = parse_overrides(&args.set)?;
    let (name, table) = match (&args.preset, &args.config) {
        (Some(preset), None) => {
            let table = exp::run_preset(preset, &overrides, args.seed).map_err(|e| e.to_string())?;
            (preset.clone(), table)
        }
        (None, Some(config)) => {
            let text = std::fs::read_to_string(config).map_err(|e| format!("{}: {e}", config.display()))?;
            let mut cfg = exp::parse_config(&text, &overrides).map_err(|e| e.to_string())?;
            cfg.seed = args.seed;
            if let Some(preset) = cfg.preset.clone() {
                let table = exp::run_preset(&preset, &overrides, args.seed).map_err(|e| e.to_string())?;
                (preset, table)
            } else {
                let table = exp::run_sweep(&cfg).map_err(|e| e.to_string())?;
                let stem = config.file_stem().map(|s| s.to_string_lossy().into_owned());
                (stem.unwrap_or_else(|| "sweep".into()), table)
            }
        }
        (None, None) => return Err("pass --preset <name> or --config <file>".into()),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let out = args.out.clone().unwrap_or_else(|| out_dir().join(format!("{name}.csv")));
    exp::emit_csv(&table, &out).map_err(|e| e.to_string())?;
    println!("wrote {} ({} rows)", out.display(), table.rows.len());
    Ok(())
}

fn plot(args: &PlotArgs) -> Result<(), String> {
    let table = exp::read_csv(&args.csv).map_err(|e| e.to_string())?;
    let spec = PlotSpec {
        x: args.x.clone(),
        ys: args.y.clone(),
        group_by: args.group_by.clone(),
        log_x: args.logx,
        log_y: args.logy,
        title: if args.title.is_empty() {
            args.csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        } else {
            args.title.clone()
        },
    };
    let out = args.out.clone().unwrap_or_else(|| args.csv.with_extension("svg"));
    exp::emit_plot(&table, &spec, &out).map_err(|e| e.to_string())?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), (&str, String)> = match &cli.command {
        Command::Run(args) => run(args).map_err(|m| ("run", m)),
        Command::ListPresets => {
            for (name, desc) in exp::list_presets() {
                println!("{name:28} {desc}");
            }
            Ok(())
        }
        Command::Plot(args) => plot(args).map_err(|m| ("plot", m)),
        Command::Validate { config } => match std::fs::read_to_string(config) {
            Err(e) => Err(("validate", format!("{}: {e}", config.display()))),
            Ok(text) => match exp::parse_config(&text, &[]) {
                Ok(_) => {
                    println!("ok: {}", config.display());
                    Ok(())
                }
                Err(e) => Err(("validate", e.to_string())),
            },
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((kind, message)) => {
            eprintln!("error: {kind}: {message}");
            ExitCode::FAILURE
        }
    }
}
