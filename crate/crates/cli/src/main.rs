//! Command-line driver: training runs, the mode-recovery protocol, gradient
//! maps and evaluation reports from checkpoints, and seed sweeps.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric abort, 4 I/O or
//! checkpoint error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use acgan_core::config::{parse_config, RawConfig, RunConfig};
use acgan_core::metrics::{coverage, frechet_distance, gradient_norm_field, mixture_moments, moments, GridSpec};
use acgan_core::rng::{RngBank, StreamLabel};
use acgan_core::train::{
    mode_spec_for, resume_training, run_mode_recovery, run_training, Trainer, EVAL_SET_SIZE,
    HQ_MULTIPLIER, COVER_MIN_COUNT,
};
use acgan_core::{load_checkpoint, Error, Result};

#[derive(Parser)]
#[command(
    name = "acgan",
    about = "Train a GAN against a bandit-weighted ensemble of discriminators on 2D mixtures",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config-file keys that can be overridden from the command line.
#[derive(Args, Clone, Default)]
struct Overrides {
    /// Dataset: ring8 | grid25
    #[arg(long)]
    dataset: Option<String>,
    /// Variant: acgan | gman | uniform | vanilla
    #[arg(long)]
    variant: Option<String>,
    /// Ensemble size
    #[arg(long, short = 'n')]
    n_discriminators: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    eval_interval: Option<u64>,
    /// Periodic checkpoint cadence (0 disables)
    #[arg(long)]
    checkpoint_interval: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Boltzmann temperature λ
    #[arg(long)]
    lambda: Option<f64>,
    /// Reward moving-average weight α
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    t_warmup: Option<u64>,
    /// Reward shaper: quality_s | value_v | raw_loss
    #[arg(long)]
    reward: Option<String>,
    /// Optimizer: adam | rmsprop
    #[arg(long)]
    optimizer: Option<String>,
    /// Learning rate
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden_width: Option<usize>,
    /// Recovery protocol: length of the restricted pretraining phase.
    #[arg(long)]
    pretrain_iterations: Option<u64>,
    /// Recovery protocol: length of each full-mixture phase.
    #[arg(long)]
    recovery_iterations: Option<u64>,
}

impl Overrides {
    fn apply(&self, raw: &mut RawConfig) {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    raw.$field = Some(v.clone());
                }
            };
        }
        set!(dataset);
        set!(variant);
        set!(n_discriminators);
        set!(seed);
        set!(iterations);
        set!(batch_size);
        set!(eval_interval);
        set!(checkpoint_interval);
        if let Some(dir) = &self.output_dir {
            raw.output_dir = Some(dir.display().to_string());
        }
        set!(lambda);
        set!(alpha);
        set!(t_warmup);
        set!(reward);
        set!(optimizer);
        set!(lr);
        set!(hidden_width);
        set!(pretrain_iterations);
        set!(recovery_iterations);
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one training experiment (or resume a checkpointed one).
    Train {
        /// TOML config file; defaults apply for every omitted key.
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Resume from a checkpoint instead of starting fresh. Only
        /// --output-dir applies on top; everything else comes from the
        /// checkpoint's config echo.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Pretrain on a mode subset, then race vanilla vs ensemble recovery.
    RecoverModes {
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Dump per-discriminator input-gradient-norm fields from a checkpoint.
    Gradmap {
        checkpoint: PathBuf,
        /// Where to write the field CSVs (default: alongside the checkpoint).
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Lattice points per axis.
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        /// Window half-width: fields cover [-w, w]².
        #[arg(long, default_value_t = 2.0)]
        window: f64,
    },
    /// Report coverage and FD for a checkpointed generator.
    Eval {
        checkpoint: PathBuf,
        /// Evaluation sample count.
        #[arg(long, default_value_t = EVAL_SET_SIZE)]
        samples: usize,
        /// Also dump the generated samples as CSV here.
        #[arg(long)]
        dump_samples: Option<PathBuf>,
    },
    /// Run the same config once per seed (suffixing the output directory).
    Sweep {
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated seed list.
        #[arg(long, required = true, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
}

fn load_raw(config: Option<&Path>, overrides: &Overrides) -> Result<RawConfig> {
    let mut raw = match config {
        Some(path) => parse_config(path)?,
        None => RawConfig::default(),
    };
    overrides.apply(&mut raw);
    Ok(raw)
}

fn cmd_train(
    config: Option<&Path>,
    overrides: &Overrides,
    resume: Option<&Path>,
) -> Result<()> {
    if let Some(ckpt) = resume {
        let arts = resume_training(ckpt, overrides.output_dir.as_deref())?;
        println!(
            "resumed from iteration {} into {}",
            arts.summary.resumed_from.unwrap_or(0),
            arts.output_dir.display()
        );
        print_run_summary(&arts.summary);
        return Ok(());
    }
    let cfg = RunConfig::resolve(&load_raw(config, overrides)?)?;
    let arts = run_training(&cfg)?;
    println!("run finished in {}", arts.output_dir.display());
    print_run_summary(&arts.summary);
    Ok(())
}

fn print_run_summary(s: &acgan_core::train::RunSummary) {
    println!(
        "modes_covered={} hq_fraction={:.4} final_fd={:.6}",
        s.final_modes_covered, s.final_hq_fraction, s.final_fd
    );
    if let Some(best) = &s.best_fd {
        println!("best_fd={:.6} at iteration {}", best.value, best.iteration);
    }
}

fn cmd_recover(config: Option<&Path>, overrides: &Overrides) -> Result<()> {
    let raw = load_raw(config, overrides)?;
    let arts = run_mode_recovery(&raw)?;
    println!(
        "pretrain: modes_covered={} (restricted mixture)",
        arts.pretrain.summary.final_modes_covered
    );
    println!(
        "vanilla:  modes_covered={} hq_fraction={:.4}",
        arts.vanilla.summary.final_modes_covered, arts.vanilla.summary.final_hq_fraction
    );
    println!(
        "ensemble: modes_covered={} hq_fraction={:.4}",
        arts.acgan.summary.final_modes_covered, arts.acgan.summary.final_hq_fraction
    );
    println!("summary: {}", arts.summary_path.display());
    Ok(())
}

fn cmd_gradmap(
    checkpoint: &Path,
    output_dir: Option<&Path>,
    resolution: usize,
    window: f64,
) -> Result<()> {
    if !(window > 0.0) || !window.is_finite() {
        return Err(Error::Config(format!(
            "window half-width must be positive, got {window}"
        )));
    }
    let ckpt = load_checkpoint(checkpoint)?;
    let cfg = RunConfig::resolve(&ckpt.config)?;
    let iteration = ckpt.iteration;
    let tr = Trainer::from_checkpoint(cfg.clone(), &ckpt)?;
    let grid = GridSpec::new([-window, window], [-window, window], resolution)?;
    let dir = output_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| {
            checkpoint
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."))
        });
    std::fs::create_dir_all(&dir)?;
    for i in 0..cfg.n {
        let field = gradient_norm_field(tr.ensemble().member(i), &grid)?;
        let stem = format!("gradfield_d{}_{iteration}", i + 1);
        let csv = dir.join(format!("{stem}.csv"));
        let mut text = String::new();
        for row in field.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        std::fs::write(&csv, text)?;
        let sidecar = serde_json::json!({
            "x_range": grid.x_range,
            "y_range": grid.y_range,
            "resolution": grid.resolution,
            "discriminator": i + 1,
            "hidden_layers": cfg.disc_hidden_layers[i],
            "iteration": iteration,
            "mean_norm": field.mean().unwrap_or(0.0),
        });
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n",
        )?;
        println!("{}", csv.display());
    }
    Ok(())
}

fn cmd_eval(checkpoint: &Path, samples: usize, dump: Option<&Path>) -> Result<()> {
    if samples < 2 {
        return Err(Error::Config(format!(
            "need at least 2 evaluation samples, got {samples}"
        )));
    }
    let ckpt = load_checkpoint(checkpoint)?;
    let cfg = RunConfig::resolve(&ckpt.config)?;
    let tr = Trainer::from_checkpoint(cfg.clone(), &ckpt)?;
    let spec = mode_spec_for(cfg.dataset)?;

    // Same construction as in training: the evaluation latents come from a
    // fresh bank's eval stream, so reports here match in-run metrics rows.
    let z = {
        let mut bank = RngBank::new(cfg.seed);
        acgan_core::data::sample_prior(
            &acgan_core::data::PriorSpec::new(cfg.prior_dim)?,
            samples,
            bank.stream(StreamLabel::Eval),
        )?
    };
    let generated = tr.generator().generate(&z)?;
    let report = coverage(&generated, &spec, HQ_MULTIPLIER, COVER_MIN_COUNT)?;
    let fd = frechet_distance(&moments(&generated)?, &mixture_moments(&spec, None)?);

    if let Some(path) = dump {
        let mut text = String::from("x,y\n");
        for row in generated.rows() {
            text.push_str(&format!("{},{}\n", row[0], row[1]));
        }
        std::fs::write(path, text)?;
    }
    let doc = serde_json::json!({
        "checkpoint": checkpoint.display().to_string(),
        "iteration": ckpt.iteration,
        "dataset": cfg.dataset.as_str(),
        "samples": samples,
        "fd": fd,
        "modes_covered": report.modes_covered,
        "hq_fraction": report.hq_fraction,
        "per_mode_counts": report.per_mode_counts,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("report serializes"));
    Ok(())
}

fn cmd_sweep(config: Option<&Path>, overrides: &Overrides, seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    let base = load_raw(config, overrides)?;
    for &seed in seeds {
        let mut raw = base.clone();
        raw.seed = Some(seed);
        // Each run gets its own directory; never share log files.
        let base_cfg = RunConfig::resolve(&raw)?;
        raw.output_dir = Some(
            base_cfg
                .output_dir
                .join(format!("seed{seed}"))
                .display()
                .to_string(),
        );
        let cfg = RunConfig::resolve(&raw)?;
        let arts = run_training(&cfg)?;
        println!(
            "seed {seed}: modes_covered={} hq_fraction={:.4} final_fd={:.6} ({})",
            arts.summary.final_modes_covered,
            arts.summary.final_hq_fraction,
            arts.summary.final_fd,
            arts.output_dir.display()
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Train {
            config,
            overrides,
            resume,
        } => cmd_train(config.as_deref(), overrides, resume.as_deref()),
        Command::RecoverModes { config, overrides } => cmd_recover(config.as_deref(), overrides),
        Command::Gradmap {
            checkpoint,
            output_dir,
            resolution,
            window,
        } => cmd_gradmap(checkpoint, output_dir.as_deref(), *resolution, *window),
        Command::Eval {
            checkpoint,
            samples,
            dump_samples,
        } => cmd_eval(checkpoint, *samples, dump_samples.as_deref()),
        Command::Sweep {
            config,
            overrides,
            seeds,
        } => cmd_sweep(config.as_deref(), overrides, seeds),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
