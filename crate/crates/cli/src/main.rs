use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use greenpco::config::RunConfig;
use greenpco::evaluate::{csv_report, text_report};
use greenpco::par;
use greenpco::run::{ablation_csv, cmd_ablate, cmd_eval, cmd_odometry, cmd_synth, cmd_train};
use greenpco::sampling::SamplingStrategy;
use greenpco::synth::SceneSpec;

#[derive(Parser)]
#[command(name = "greenpco", version, about = "Unsupervised LiDAR point-cloud odometry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a Saab model from strided training scans.
    Train(Common),
    /// Estimate trajectories for sequences.
    Odometry(Common),
    /// Score a predicted pose file against ground truth.
    Eval(EvalArgs),
    /// Run the sampling × point count × toggle grid.
    Ablate(Common),
    /// Write a synthetic sequence in KITTI layout.
    Synth(SynthArgs),
}

/// Flags shared by the pipeline commands. Each one overrides the config file.
#[derive(Args, Debug, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data_root: Option<PathBuf>,
    /// Comma-separated sequence ids (training sequences for `train`).
    #[arg(long, value_delimiter = ',')]
    sequences: Option<Vec<String>>,
    /// Comma-separated training sequence ids for `ablate`.
    #[arg(long, value_delimiter = ',')]
    train_sequences: Option<Vec<String>>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Points kept per scan.
    #[arg(long = "points", value_name = "N")]
    points: Option<usize>,
    #[arg(long)]
    sampling: Option<SamplingStrategy>,
    /// Match over the whole scan instead of per view.
    #[arg(long)]
    no_views: bool,
    /// Drop the eigen-features from the point features.
    #[arg(long)]
    no_eigen_features: bool,
    #[arg(long, value_name = "N")]
    train_scans: Option<usize>,
    #[arg(long)]
    single_thread: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted KITTI pose file.
    pred: PathBuf,
    /// Ground-truth pose file in the same frame.
    gt: PathBuf,
    /// Also write the metrics as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Dataset root to write into.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "00")]
    sequence: String,
    /// Scene spec TOML; flags below override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise: Option<f64>,
    /// Zero noise, no dropout, fixed order and identity trajectory.
    #[arg(long = "static")]
    static_scene: bool,
}

impl Common {
    /// CLI flags over config file over defaults.
    fn resolve(&self, train: bool) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.data_root {
            cfg.paths.data_root = Some(v.clone());
        }
        if let Some(v) = &self.model {
            cfg.paths.model = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.paths.out = Some(v.clone());
        }
        if let Some(v) = &self.sequences {
            if train {
                cfg.train.sequences = v.clone();
            } else {
                cfg.odometry.sequences = v.clone();
            }
        }
        if let Some(v) = &self.train_sequences {
            cfg.train.sequences = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.run.seed = v;
        }
        if let Some(v) = self.points {
            cfg.sampling.target_count = v;
            cfg.ablate.points = vec![v];
        }
        if let Some(v) = self.sampling {
            cfg.sampling.strategy = v;
            cfg.ablate.strategies = vec![v];
        }
        if self.no_views {
            cfg.odometry.views = false;
        }
        if self.no_eigen_features {
            cfg.features.eigen_features = false;
        }
        if let Some(v) = self.train_scans {
            cfg.train.scans = v;
        }
        if self.single_thread {
            cfg.run.single_thread = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn synth(args: &SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SceneSpec::from_toml(&text).context("bad scene spec")?
        }
        None => SceneSpec::default(),
    };
    if let Some(v) = args.frames {
        spec.frames = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if let Some(v) = args.noise {
        spec.noise_sigma = v;
    }
    if args.static_scene {
        spec.noise_sigma = 0.0;
        spec.dropout = 0.0;
        spec.shuffle = false;
        spec.step_m = 0.0;
        spec.yaw_deg = 0.0;
        spec.pitch_deg = 0.0;
    }
    if spec.frames == 0 {
        bail!("a synthetic sequence needs at least one frame");
    }
    cmd_synth(&args.out, &args.sequence, &spec)?;
    println!("wrote {} frames to {}", spec.frames, args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Train(c) => {
            let cfg = c.resolve(true)?;
            let out = par::with_threads(cfg.threads(), || cmd_train(&cfg))?;
            println!(
                "model {} ({} bytes, {} coefficients, sha256 {})",
                out.path.display(),
                out.bytes,
                out.model.coefficient_count(),
                out.sha256
            );
        }
        Command::Odometry(c) => {
            let cfg = c.resolve(false)?;
            let results = par::with_threads(cfg.threads(), || cmd_odometry(&cfg))?;
            let rows: Vec<_> = results
                .iter()
                .filter_map(|r| r.errors.map(|e| (r.id.clone(), e)))
                .collect();
            for r in &results {
                println!(
                    "sequence {}: {} poses, {} fallback frames -> {}",
                    r.id,
                    r.run.trajectory.len(),
                    r.run.fallback_count(),
                    r.dir.display()
                );
            }
            if !rows.is_empty() {
                print!("{}", text_report(&rows));
            }
        }
        Command::Eval(a) => {
            let e = cmd_eval(&a.pred, &a.gt)?;
            let name = a.pred.file_stem().map_or("pred".into(), |s| s.to_string_lossy().into_owned());
            let rows = vec![(name, e)];
            print!("{}", text_report(&rows));
            if let Some(p) = &a.csv {
                std::fs::write(p, csv_report(&rows)).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::Ablate(c) => {
            let cfg = c.resolve(false)?;
            let rows = par::with_threads(cfg.threads(), || cmd_ablate(&cfg))?;
            print!("{}", ablation_csv(&rows));
        }
        Command::Synth(a) => synth(a)?,
    }
    Ok(())
}
