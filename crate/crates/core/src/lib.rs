//! Core library for adaptive-curriculum GAN training on 2D Gaussian
//! mixtures: dense networks, optimizers, bandit-weighted discriminator
//! ensembles, synthetic datasets, and evaluation metrics.

pub mod bandit;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod gan;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod train;

pub use bandit::{
    observe_rewards, policy_weights, q_update, BanditConfig, BanditState, RewardKind, Variant,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, DiscSnapshot, OptSnapshot};
pub use config::{parse_config, Allocation, Dataset, RawConfig, RunConfig};
pub use data::{ModeSpec, PriorSpec};
pub use error::{Error, Result};
pub use gan::{snapshot, Ensemble, GeneratorHandle, NoiseSchedule, ParamSnapshot};
pub use metrics::{frechet_distance, CoverageReport, GridSpec, Histogram, MomentPair};
pub use nn::{Activation, ForwardTrace, GradientBundle, LayerSpec, MlpNetwork, Role};
pub use optim::{Direction, OptimizerKind, OptimizerState};
pub use rng::{RngBank, StreamLabel};
pub use train::{
    mode_spec_for, resume_training, run_mode_recovery, run_training, BestFd,
    CurriculumDiagnostic, RecoveryArtifacts, RunArtifacts, RunSummary, Trainer,
};
