//! `lhscad`: phantom generation, training, mass and microcalcification
//! detection, enhancement and FROC evaluation.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 when
//! the input data cannot be processed.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "lhscad", version, about = "Mammogram CAD pipeline on grayscale images")]
pub struct Cli {
    /// Config file of `key=value` lines; flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "LHSCAD_THREADS", value_name = "N")]
    threads: Option<usize>,
    /// Override one setting, e.g. `--set mass.k=51`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Log progress to standard error (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic phantom corpus with ground-truth annotations.
    Phantom(PhantomArgs),
    /// Train mass detection models from an annotated corpus.
    Train(TrainArgs),
    /// Score an image for masses and extract candidate markers.
    Detect(DetectArgs),
    /// Detect microcalcification clusters in an image.
    DetectMc(DetectMcArgs),
    /// Segment and enhance an image by local histogram specification.
    Enhance(EnhanceArgs),
    /// Compute an FROC table from marker files and a corpus manifest.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub positive: usize,
    #[arg(long, default_value_t = 2)]
    pub normal: usize,
    /// easy or hard.
    #[arg(long, default_value = "easy")]
    pub difficulty: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub width: usize,
    #[arg(long, default_value_t = 2294)]
    pub height: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory or manifest file.
    #[arg(long)]
    pub data: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    /// Patch windows of an ensemble, e.g. 9,15,21; implies --mcs.
    #[arg(long, value_name = "LIST")]
    pub windows: Option<String>,
    /// Train the configured window ensemble instead of a single window.
    #[arg(long)]
    pub mcs: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Patch window of the single-window model.
    #[arg(long)]
    pub w1: Option<usize>,
    /// Centroids per region and image.
    #[arg(long)]
    pub r: Option<usize>,
    /// Principal components kept.
    #[arg(long)]
    pub c: Option<usize>,
    /// Rows clustered per region and image, or `none`.
    #[arg(long, value_name = "N")]
    pub sample_cap: Option<String>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Score image output (.pgm or .png).
    #[arg(long)]
    pub score_out: PathBuf,
    /// Marker list output.
    #[arg(long)]
    pub markers_out: PathBuf,
    /// Minimum marker score.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Average every window model of the file.
    #[arg(long)]
    pub mcs: bool,
    /// Nearest neighbours consulted per pixel.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetectMcArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Cluster marker output.
    #[arg(long)]
    pub foci_out: PathBuf,
    #[arg(long)]
    pub w2: Option<usize>,
    #[arg(long)]
    pub th: Option<f64>,
    #[arg(long)]
    pub min_foci: Option<usize>,
    #[arg(long)]
    pub merge_mm: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub height: Option<usize>,
    /// exp or uniform.
    #[arg(long)]
    pub target: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Corpus manifest.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory holding `<image stem>.markers` for every view.
    #[arg(long)]
    pub markers: PathBuf,
    /// per-case, per-side, per-image or per-label.
    #[arg(long, default_value = "per-image")]
    pub criterion: String,
    /// Descending marker-score thresholds, comma separated.
    #[arg(long, value_name = "LIST")]
    pub thresholds: String,
    /// Lesion kind scored: mass or microcalc.
    #[arg(long, default_value = "mass")]
    pub kind: String,
    /// Write the table here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<lhscad::error::Error> for Failure {
    fn from(e: lhscad::error::Error) -> Self {
        Failure::Data(e.into())
    }
}

fn overrides(cmd: &Command) -> Vec<(&'static str, String)> {
    let mut o = Vec::new();
    let mut put = |k: &'static str, v: Option<String>| {
        if let Some(v) = v {
            o.push((k, v));
        }
    };
    let s = |v: &Option<usize>| v.map(|x| x.to_string());
    let f = |v: &Option<f64>| v.map(|x| x.to_string());
    match cmd {
        Command::Phantom(a) => put("seed", a.seed.map(|x| x.to_string())),
        Command::Train(a) => {
            put("seed", a.seed.map(|x| x.to_string()));
            put("mass.windows", a.windows.clone());
            put("mass.w1", s(&a.w1));
            put("mass.r", s(&a.r));
            put("mass.c", s(&a.c));
            put("mass.sample_cap", a.sample_cap.clone());
        }
        Command::Detect(a) => {
            put("mass.threshold", f(&a.threshold));
            put("mass.k", s(&a.k));
        }
        Command::DetectMc(a) => {
            put("mc.w2", s(&a.w2));
            put("mc.th", f(&a.th));
            put("mc.min_foci", s(&a.min_foci));
            put("mc.merge_mm", f(&a.merge_mm));
        }
        Command::Enhance(a) => {
            put("enhance.window", s(&a.window));
            put("enhance.lambda", f(&a.lambda));
            put("enhance.height", s(&a.height));
            put("enhance.target", a.target.clone());
        }
        Command::Evaluate(_) => {}
    }
    o
}

/// Defaults, then the config file, then `--set` pairs, then dedicated flags.
fn resolve_settings(cli: &Cli) -> Result<Settings, String> {
    let mut s = Settings::default();
    if let Some(path) = &cli.config {
        s.apply_file(path)?;
    }
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
        s.set(k.trim(), v)?;
    }
    if let Some(t) = cli.threads {
        s.threads = Some(t);
    }
    for (k, v) in overrides(&cli.command) {
        s.set(k, &v)?;
    }
    s.finish()
}

fn run(cli: Cli) -> Result<(), Failure> {
    let settings = resolve_settings(&cli).map_err(Failure::Usage)?;
    if let Some(n) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot configure {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Phantom(a) => commands::phantom(a, &settings),
        Command::Train(a) => commands::train(a, &settings),
        Command::Detect(a) => commands::detect(a, &settings),
        Command::DetectMc(a) => commands::detect_mc(a, &settings),
        Command::Enhance(a) => commands::enhance(a, &settings),
        Command::Evaluate(a) => commands::evaluate(a, &settings),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
