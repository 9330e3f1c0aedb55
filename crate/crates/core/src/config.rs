//! Run configuration: a flat TOML document with overridable keys, resolved
//! against per-dataset defaults into a validated [`RunConfig`].
//!
//! Defaults follow the reference hyperparameters: α = 0.01, λ = 15,
//! T_warmup = 15·N, Adam(β1 = 0.5, β2 = 0.999) with lr 2e-4 on the grid and
//! 1e-4 on the ring, quality-progress rewards. The default architecture is
//! the published one for the 2-D benchmarks: a generator of 4 dense layers
//! (3 hidden ReLU layers of 512 units, linear head) against a capacity
//! ladder of discriminators with 2, 3, 4 dense layers (1, 2, 3 hidden
//! layers of 512 units, sigmoid head).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bandit::{BanditConfig, RewardKind, Variant};
use crate::gan::NoiseSchedule;
use crate::nn::{Activation, LayerSpec};
use crate::optim::OptimizerKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    Ring8,
    Grid25,
}

impl Dataset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Dataset::Ring8 => "ring8",
            Dataset::Grid25 => "grid25",
        }
    }
}

/// How π is consumed: as mixture weights (default) or, as a diagnostic, by
/// sampling one discriminator per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Allocation {
    Mixture,
    Sample,
}

impl Allocation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Allocation::Mixture => "mixture",
            Allocation::Sample => "sample",
        }
    }
}

/// The raw key/value surface of a config file. Every field is optional;
/// unknown keys are rejected by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub dataset: Option<String>,
    pub variant: Option<String>,
    pub n_discriminators: Option<usize>,
    pub seed: Option<u64>,
    pub iterations: Option<u64>,
    pub batch_size: Option<usize>,
    pub eval_interval: Option<u64>,
    pub checkpoint_interval: Option<u64>,
    pub output_dir: Option<String>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub t_warmup: Option<u64>,
    pub reward: Option<String>,
    pub optimizer: Option<String>,
    pub lr: Option<f64>,
    pub hidden_width: Option<usize>,
    pub gen_hidden_layers: Option<usize>,
    pub disc_hidden_layers: Option<Vec<usize>>,
    pub prior_dim: Option<usize>,
    pub noise_sigma: Option<Vec<f64>>,
    pub noise_decay: Option<f64>,
    pub reward_batch: Option<usize>,
    pub epoch_iters: Option<u64>,
    pub allocation: Option<String>,
    pub pretrain_modes: Option<Vec<usize>>,
    pub pretrain_iterations: Option<u64>,
    pub recovery_iterations: Option<u64>,
}

impl RawConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("config serialize error: {e}")))
    }
}

/// Read and parse a config file without resolving defaults.
pub fn parse_config(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    RawConfig::from_toml_str(&text)
}

/// Fully resolved, validated run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Dataset,
    pub variant: Variant,
    pub n: usize,
    pub seed: u64,
    pub iterations: u64,
    pub batch_size: usize,
    pub eval_interval: u64,
    pub checkpoint_interval: Option<u64>,
    pub output_dir: PathBuf,
    pub bandit: BanditConfig,
    pub optimizer: OptimizerKind,
    pub hidden_width: usize,
    pub gen_hidden_layers: usize,
    pub disc_hidden_layers: Vec<usize>,
    pub prior_dim: usize,
    pub noise: Option<NoiseSchedule>,
    pub reward_batch: usize,
    pub epoch_iters: u64,
    pub allocation: Allocation,
    pub pretrain_modes: Vec<usize>,
    pub pretrain_iterations: u64,
    pub recovery_iterations: u64,
}

fn parse_enum<'a, T: Copy>(key: &str, value: &'a str, table: &[(&str, T)]) -> Result<T> {
    table
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
            Error::Config(format!(
                "unknown {key} value {value:?}, expected one of {names:?}"
            ))
        })
}

impl RunConfig {
    pub fn resolve(raw: &RawConfig) -> Result<Self> {
        let dataset = parse_enum(
            "dataset",
            raw.dataset.as_deref().unwrap_or("grid25"),
            &[("ring8", Dataset::Ring8), ("grid25", Dataset::Grid25)],
        )?;
        let variant = parse_enum(
            "variant",
            raw.variant.as_deref().unwrap_or("acgan"),
            &[
                ("acgan", Variant::Acgan),
                ("gman", Variant::Gman),
                ("uniform", Variant::Uniform),
                ("vanilla", Variant::Vanilla),
            ],
        )?;
        let reward = parse_enum(
            "reward",
            raw.reward.as_deref().unwrap_or("quality_s"),
            &[
                ("quality_s", RewardKind::QualityS),
                ("value_v", RewardKind::ValueV),
                ("raw_loss", RewardKind::RawLoss),
            ],
        )?;
        let allocation = parse_enum(
            "allocation",
            raw.allocation.as_deref().unwrap_or("mixture"),
            &[
                ("mixture", Allocation::Mixture),
                ("sample", Allocation::Sample),
            ],
        )?;

        let n = raw.n_discriminators.unwrap_or(match variant {
            Variant::Vanilla => 1,
            _ => 3,
        });
        if n == 0 {
            return Err(Error::Config("n_discriminators must be at least 1".into()));
        }
        if variant == Variant::Vanilla && n != 1 {
            return Err(Error::Config(format!(
                "variant \"vanilla\" requires n_discriminators = 1, got {n}"
            )));
        }

        let disc_hidden_layers = match &raw.disc_hidden_layers {
            Some(counts) => {
                if counts.len() != n {
                    return Err(Error::Config(format!(
                        "disc_hidden_layers lists {} entries for {n} discriminators",
                        counts.len()
                    )));
                }
                counts.clone()
            }
            None => {
                // Capacity ladder: member i has i hidden layers (i+1 dense
                // layers); a single vanilla discriminator gets the full
                // ladder depth of 3 hidden layers. Zero hidden layers is a
                // legal rung (a single dense sigmoid layer), used by the
                // mode-recovery protocol's weakest discriminator.
                if variant == Variant::Vanilla {
                    vec![3]
                } else {
                    (1..=n).collect()
                }
            }
        };
        for pair in disc_hidden_layers.windows(2) {
            if pair[0] > pair[1] {
                return Err(Error::Config(format!(
                    "disc_hidden_layers must be non-decreasing (weakest first), got {disc_hidden_layers:?}"
                )));
            }
        }

        let batch_size = raw.batch_size.unwrap_or(192);
        if batch_size == 0 || batch_size % n != 0 {
            return Err(Error::Config(format!(
                "batch_size {batch_size} is not divisible by n_discriminators {n}"
            )));
        }

        let lambda = raw.lambda.unwrap_or(15.0);
        let alpha = raw.alpha.unwrap_or(0.01);
        let t_warmup = raw.t_warmup.unwrap_or(15 * n as u64);
        let bandit = BanditConfig::new(variant, n, lambda, alpha, t_warmup, reward)?;

        let lr = raw.lr.unwrap_or(match dataset {
            Dataset::Grid25 => 2e-4,
            Dataset::Ring8 => 1e-4,
        });
        let optimizer = match raw.optimizer.as_deref().unwrap_or("adam") {
            "adam" => OptimizerKind::adam(lr),
            "rmsprop" => OptimizerKind::rmsprop(lr),
            other => {
                return Err(Error::Config(format!(
                    "unknown optimizer value {other:?}, expected one of [\"adam\", \"rmsprop\"]"
                )));
            }
        };

        let noise = match (&raw.noise_sigma, raw.noise_decay) {
            (None, None) => None,
            (Some(sigma), decay) => {
                if sigma.len() != n {
                    return Err(Error::Config(format!(
                        "noise_sigma lists {} stds for {n} discriminators",
                        sigma.len()
                    )));
                }
                Some(NoiseSchedule::new(sigma.clone(), decay.unwrap_or(100.0))?)
            }
            (None, Some(_)) => {
                return Err(Error::Config(
                    "noise_decay given without noise_sigma".into(),
                ));
            }
        };

        let iterations = raw.iterations.unwrap_or(7500);
        // With samplers instead of a finite dataset, an "epoch" is a fixed
        // iteration count; evaluation runs once per epoch unless overridden.
        let epoch_iters = raw.epoch_iters.unwrap_or(500);
        let eval_interval = raw.eval_interval.unwrap_or(epoch_iters);
        if iterations == 0 || eval_interval == 0 || epoch_iters == 0 {
            return Err(Error::Config(
                "iterations, eval_interval, and epoch_iters must be at least 1".into(),
            ));
        }
        let checkpoint_interval = match raw.checkpoint_interval {
            None | Some(0) => None,
            Some(k) => Some(k),
        };

        let pretrain_modes = raw.pretrain_modes.clone().unwrap_or_else(|| {
            crate::data::PRETRAIN_MODES.to_vec()
        });
        if pretrain_modes.is_empty() {
            return Err(Error::Config("pretrain_modes must be non-empty".into()));
        }
        let mode_count = match dataset {
            Dataset::Ring8 => 8,
            Dataset::Grid25 => 25,
        };
        if let Some(bad) = pretrain_modes.iter().find(|m| **m >= mode_count) {
            return Err(Error::Config(format!(
                "pretrain mode {bad} out of range for {mode_count} modes"
            )));
        }

        let hidden_width = raw.hidden_width.unwrap_or(512);
        let gen_hidden_layers = raw.gen_hidden_layers.unwrap_or(3);
        if hidden_width == 0 || gen_hidden_layers == 0 {
            return Err(Error::Config(
                "hidden_width and gen_hidden_layers must be at least 1".into(),
            ));
        }
        let prior_dim = raw.prior_dim.unwrap_or(2);
        if prior_dim == 0 {
            return Err(Error::Config("prior_dim must be at least 1".into()));
        }

        let seed = raw.seed.unwrap_or(0);
        let output_dir = PathBuf::from(raw.output_dir.clone().unwrap_or_else(|| {
            format!("runs/{}_{}_seed{seed}", variant.as_str(), dataset.as_str())
        }));

        Ok(Self {
            dataset,
            variant,
            n,
            seed,
            iterations,
            batch_size,
            eval_interval,
            checkpoint_interval,
            output_dir,
            bandit,
            optimizer,
            hidden_width,
            gen_hidden_layers,
            disc_hidden_layers,
            prior_dim,
            noise,
            reward_batch: raw.reward_batch.unwrap_or(512),
            epoch_iters,
            allocation,
            pretrain_modes,
            pretrain_iterations: raw.pretrain_iterations.unwrap_or(2000),
            recovery_iterations: raw.recovery_iterations.unwrap_or(4000),
        })
    }

    /// Generator layer stack: `prior_dim → width^depth → 2`, linear head.
    pub fn gen_layer_specs(&self) -> Result<Vec<LayerSpec>> {
        let mut specs = Vec::with_capacity(self.gen_hidden_layers + 1);
        let mut prev = self.prior_dim;
        for _ in 0..self.gen_hidden_layers {
            specs.push(LayerSpec::new(prev, self.hidden_width, Activation::Relu)?);
            prev = self.hidden_width;
        }
        specs.push(LayerSpec::new(prev, 2, Activation::Linear)?);
        Ok(specs)
    }

    /// Discriminator `i` layer stack: `2 → width^depth_i → 1`, sigmoid head.
    pub fn disc_layer_specs(&self, i: usize) -> Result<Vec<LayerSpec>> {
        let depth = self.disc_hidden_layers[i];
        let mut specs = Vec::with_capacity(depth + 1);
        let mut prev = 2;
        for _ in 0..depth {
            specs.push(LayerSpec::new(prev, self.hidden_width, Activation::Relu)?);
            prev = self.hidden_width;
        }
        specs.push(LayerSpec::new(prev, 1, Activation::Sigmoid)?);
        Ok(specs)
    }

    /// The fully explicit raw form (every key set), for serialization.
    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            dataset: Some(self.dataset.as_str().to_string()),
            variant: Some(self.variant.as_str().to_string()),
            n_discriminators: Some(self.n),
            seed: Some(self.seed),
            iterations: Some(self.iterations),
            batch_size: Some(self.batch_size),
            eval_interval: Some(self.eval_interval),
            checkpoint_interval: Some(self.checkpoint_interval.unwrap_or(0)),
            output_dir: Some(self.output_dir.display().to_string()),
            lambda: Some(self.bandit.lambda),
            alpha: Some(self.bandit.alpha),
            t_warmup: Some(self.bandit.t_warmup),
            reward: Some(self.bandit.reward_kind.as_str().to_string()),
            optimizer: Some(match self.optimizer {
                OptimizerKind::Adam { .. } => "adam".to_string(),
                OptimizerKind::RmsProp { .. } => "rmsprop".to_string(),
            }),
            lr: Some(self.optimizer.lr()),
            hidden_width: Some(self.hidden_width),
            gen_hidden_layers: Some(self.gen_hidden_layers),
            disc_hidden_layers: Some(self.disc_hidden_layers.clone()),
            prior_dim: Some(self.prior_dim),
            noise_sigma: self.noise.as_ref().map(|s| s.sigma0().to_vec()),
            noise_decay: self.noise.as_ref().map(|s| s.decay_c()),
            reward_batch: Some(self.reward_batch),
            epoch_iters: Some(self.epoch_iters),
            allocation: Some(self.allocation.as_str().to_string()),
            pretrain_modes: Some(self.pretrain_modes.clone()),
            pretrain_iterations: Some(self.pretrain_iterations),
            recovery_iterations: Some(self.recovery_iterations),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.to_raw()).expect("raw config serializes")
    }
}
