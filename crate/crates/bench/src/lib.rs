//! Shared fixtures for the benchmark targets: representative networks,
//! batches, and moment pairs at the default experiment scale.

use acgan_core::config::{RawConfig, RunConfig};
use acgan_core::data::{sample_prior, PriorSpec};
use acgan_core::nn::MlpNetwork;
use acgan_core::rng::{RngBank, StreamLabel};
use acgan_core::{Ensemble, GeneratorHandle, Role};
use ndarray::Array2;
use rand::Rng;

/// Default grid25 config with a fixed seed, no files written.
pub fn default_config() -> RunConfig {
    let raw = RawConfig {
        seed: Some(17),
        output_dir: Some("/tmp/acgan-bench".into()),
        ..Default::default()
    };
    RunConfig::resolve(&raw).expect("defaults resolve")
}

pub struct Fixture {
    pub cfg: RunConfig,
    pub gen: GeneratorHandle,
    pub ens: Ensemble,
    pub z: Array2<f64>,
    pub real: Array2<f64>,
}

/// Networks and batches as the training loop would build them.
pub fn fixture() -> Fixture {
    let cfg = default_config();
    let mut bank = RngBank::new(cfg.seed);
    let gen_net = MlpNetwork::init(
        cfg.gen_layer_specs().unwrap(),
        Role::Generator,
        bank.stream(StreamLabel::Init).gen::<u64>(),
    )
    .unwrap();
    let members = (0..cfg.n)
        .map(|i| {
            MlpNetwork::init(
                cfg.disc_layer_specs(i).unwrap(),
                Role::Discriminator,
                bank.stream(StreamLabel::Init).gen::<u64>(),
            )
            .unwrap()
        })
        .collect();
    let gen = GeneratorHandle::new(gen_net, cfg.optimizer).unwrap();
    let ens = Ensemble::new(members, cfg.optimizer).unwrap();
    let prior = PriorSpec::new(cfg.prior_dim).unwrap();
    let z = sample_prior(&prior, cfg.batch_size, bank.stream(StreamLabel::Prior)).unwrap();
    let spec = acgan_core::train::mode_spec_for(cfg.dataset).unwrap();
    let real = acgan_core::data::sample_mixture(
        &spec,
        cfg.batch_size,
        bank.stream(StreamLabel::Data),
        None,
    )
    .unwrap();
    Fixture {
        cfg,
        gen,
        ens,
        z,
        real,
    }
}
