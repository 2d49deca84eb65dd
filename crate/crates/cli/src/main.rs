mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use voidmap::io::{load_config, Mode, PoseSource, RunConfig};
use voidmap::OnlineOrder;

#[derive(Parser)]
#[command(
    name = "voidmap",
    version,
    about = "Find and remove dynamic points in posed point-cloud sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label every point against the void map of the whole sequence and write the cleaned map.
    Clean(RunArgs),
    /// Label each scan against the map built from the scans before it.
    Online(RunArgs),
    /// Score predicted labels against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic dataset from a scene description.
    Synth(SynthArgs),
    /// Run a grid of parameter settings on a dataset with ground truth.
    Ablate(AblateArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Directory of numbered .pcd scans.
    #[arg(long)]
    input: PathBuf,
    /// Pose table (`scan_id tx ty tz qx qy qz qw` per line).
    #[arg(long, conflicts_with = "viewpoint")]
    poses: Option<PathBuf>,
    /// Take each scan's pose from its PCD VIEWPOINT header.
    #[arg(long)]
    viewpoint: bool,
    /// Scan files hold world-frame points rather than sensor-frame points.
    #[arg(long)]
    world_frame: bool,
}

impl InputArgs {
    fn pose_source(&self) -> Result<PoseSource> {
        match (&self.poses, self.viewpoint) {
            (Some(p), false) => Ok(PoseSource::File(p.clone())),
            (None, true) => Ok(PoseSource::Viewpoint),
            _ => anyhow::bail!("one of --poses FILE or --viewpoint is required"),
        }
    }
}

#[derive(Args, Clone, Default)]
struct ParamArgs {
    /// key=value run configuration; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    voxel_size: Option<f64>,
    /// Range-noise margin in meters.
    #[arg(long)]
    ds: Option<f64>,
    /// Localization-error radius in voxels.
    #[arg(long)]
    dp: Option<u32>,
    #[arg(long)]
    max_range: Option<f64>,
    /// Voxels marked as hits past each endpoint (defaults to --dp).
    #[arg(long)]
    hit_extension: Option<u32>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long, value_parser = parse_order)]
    online_order: Option<OnlineOrder>,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse()
}

fn parse_order(s: &str) -> std::result::Result<OnlineOrder, String> {
    s.parse()
}

impl ParamArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        let p = &mut cfg.params;
        if let Some(v) = self.voxel_size {
            p.voxel_size = v;
        }
        if let Some(v) = self.ds {
            p.noise_margin = v;
        }
        if let Some(v) = self.dp {
            p.localization_radius = v;
        }
        if let Some(v) = self.max_range {
            p.max_range = Some(v);
        }
        if let Some(v) = self.hit_extension {
            p.hit_extension = Some(v);
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(o) = self.online_order {
            cfg.online_order = o;
        }
        cfg.params.validate().context("invalid parameters")?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Output directory for static.pcd, dynamic.pcd, labels/ and report.json.
    #[arg(long)]
    out: PathBuf,
    /// Score against the `label` field of the input scans.
    #[arg(long)]
    gt: bool,
    /// Write ASCII instead of binary PCD.
    #[arg(long)]
    ascii: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of `.labels` files written by clean or online.
    #[arg(long)]
    pred: PathBuf,
    /// Dataset whose scans carry a `label` field.
    #[arg(long)]
    gt: PathBuf,
    /// Where to write the metrics JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the seed in the scene file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    ascii: bool,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Semicolon-separated `d_s,d_p,voxel_size` triples. Defaults to five
    /// settings: no models, margin only, radius only, coarse voxels, full.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    max_range: Option<f64>,
    /// Output directory for ablation.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("DUFO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .with_context(|| format!("DUFO_THREADS must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring worker threads")
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Clean(args) => commands::clean(&args, args.params.resolve()?),
        Command::Online(args) => {
            let mut cfg = args.params.resolve()?;
            cfg.mode = Mode::Online;
            commands::clean(&args, cfg)
        }
        Command::Eval(args) => commands::eval(&args),
        Command::Synth(args) => commands::synth(&args),
        Command::Ablate(args) => commands::ablate(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
