//! GAN objectives and update steps.
//!
//! One training iteration is: `discriminator_update` (one ascent step per
//! ensemble member on its weighted value term) followed by
//! `generator_update` (one ascent step on the weighted non-saturating
//! objective). Mixture weights π scale each member's term; batches are split
//! into equal contiguous shards, one per member, so per-iteration cost is
//! constant in the ensemble size.

use ndarray::{s, Array2};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::nn::{MlpNetwork, Role};
use crate::optim::{Direction, OptimizerKind, OptimizerState};
use crate::{Error, Result};

/// Generator network plus its optimizer and latent dimension.
#[derive(Debug, Clone)]
pub struct GeneratorHandle {
    net: MlpNetwork,
    opt: OptimizerState,
    prior_dim: usize,
}

impl GeneratorHandle {
    pub fn new(net: MlpNetwork, opt_kind: OptimizerKind) -> Result<Self> {
        if net.role() != Role::Generator {
            return Err(Error::Config("generator handle needs a generator network".into()));
        }
        let prior_dim = net.input_width();
        let opt = OptimizerState::new(opt_kind, net.params().len())?;
        Ok(Self {
            net,
            opt,
            prior_dim,
        })
    }

    pub fn net(&self) -> &MlpNetwork {
        &self.net
    }

    pub fn opt(&self) -> &OptimizerState {
        &self.opt
    }

    pub fn opt_mut(&mut self) -> &mut OptimizerState {
        &mut self.opt
    }

    pub fn prior_dim(&self) -> usize {
        self.prior_dim
    }

    /// Map latent vectors to data space.
    pub fn generate(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.net.forward(z)?.output().clone())
    }

    /// Replace parameters in place (checkpoint restore).
    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        self.net = self.net.with_params(params)?;
        Ok(())
    }
}

/// Ordered discriminator ensemble, weakest member (fewest layers) first.
#[derive(Debug, Clone)]
pub struct Ensemble {
    members: Vec<MlpNetwork>,
    opts: Vec<OptimizerState>,
}

impl Ensemble {
    pub fn new(members: Vec<MlpNetwork>, opt_kind: OptimizerKind) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("ensemble needs at least one discriminator".into()));
        }
        for (i, m) in members.iter().enumerate() {
            if m.role() != Role::Discriminator {
                return Err(Error::Config(format!("ensemble member {i} is not a discriminator")));
            }
        }
        for pair in members.windows(2) {
            if pair[0].layers().len() > pair[1].layers().len() {
                return Err(Error::Config(
                    "ensemble members must be ordered by capacity, fewest layers first".into(),
                ));
            }
        }
        let opts = members
            .iter()
            .map(|m| OptimizerState::new(opt_kind, m.params().len()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { members, opts })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, i: usize) -> &MlpNetwork {
        &self.members[i]
    }

    pub fn members(&self) -> &[MlpNetwork] {
        &self.members
    }

    pub fn opt(&self, i: usize) -> &OptimizerState {
        &self.opts[i]
    }

    pub fn opt_mut(&mut self, i: usize) -> &mut OptimizerState {
        &mut self.opts[i]
    }

    pub fn set_member_params(&mut self, i: usize, params: Vec<f64>) -> Result<()> {
        self.members[i] = self.members[i].with_params(params)?;
        Ok(())
    }
}

/// Frozen copy of generator parameters tagged with the iteration it was
/// taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSnapshot {
    params: Vec<f64>,
    t: u64,
}

impl ParamSnapshot {
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn from_raw(params: Vec<f64>, t: u64) -> Self {
        Self { params, t }
    }
}

/// Deep copy of the generator's parameters at iteration `t`.
pub fn snapshot(gen: &GeneratorHandle, t: u64) -> ParamSnapshot {
    ParamSnapshot {
        params: gen.net().params().to_vec(),
        t,
    }
}

/// Per-discriminator input-noise schedule: member `i` sees additive Gaussian
/// noise with std `sigma0[i] · exp(−t/C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    sigma0: Vec<f64>,
    decay_c: f64,
}

impl NoiseSchedule {
    pub fn new(sigma0: Vec<f64>, decay_c: f64) -> Result<Self> {
        if decay_c <= 0.0 {
            return Err(Error::Config(format!(
                "noise decay constant must be positive, got {decay_c}"
            )));
        }
        if let Some(s) = sigma0.iter().find(|s| !(**s >= 0.0)) {
            return Err(Error::Config(format!("noise std must be non-negative, got {s}")));
        }
        Ok(Self { sigma0, decay_c })
    }

    pub fn sigma0(&self) -> &[f64] {
        &self.sigma0
    }

    pub fn decay_c(&self) -> f64 {
        self.decay_c
    }

    pub fn std_at(&self, member: usize, t: u64) -> f64 {
        self.sigma0[member] * (-(t as f64) / self.decay_c).exp()
    }
}

/// Eq.-3 value: `mean ln D(real) + mean ln(1 − D(fake))`. Sigmoid clamping
/// in the forward pass keeps both logs finite.
pub fn value_function(d: &MlpNetwork, real: &Array2<f64>, fake: &Array2<f64>) -> Result<f64> {
    if real.nrows() == 0 || fake.nrows() == 0 {
        return Err(Error::Input("value function needs non-empty batches".into()));
    }
    let d_real = d.forward(real)?;
    let d_fake = d.forward(fake)?;
    Ok(mean_ln(d_real.output()) + mean_ln_one_minus(d_fake.output()))
}

fn mean_ln(out: &Array2<f64>) -> f64 {
    out.iter().map(|v| v.ln()).sum::<f64>() / out.nrows() as f64
}

fn mean_ln_one_minus(out: &Array2<f64>) -> f64 {
    out.iter().map(|v| (1.0 - v).ln()).sum::<f64>() / out.nrows() as f64
}

/// Add i.i.d. Gaussian noise with std `σ0 · exp(−t/C)` to every entry.
/// With `σ0 == 0` the input is returned unchanged and the RNG is untouched,
/// so noise-free runs consume identical random streams.
pub fn corrupt_inputs(
    batch: &Array2<f64>,
    sigma0: f64,
    t: u64,
    c: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Array2<f64>> {
    if sigma0 < 0.0 {
        return Err(Error::Config(format!("noise std must be non-negative, got {sigma0}")));
    }
    if c <= 0.0 {
        return Err(Error::Config(format!("noise decay constant must be positive, got {c}")));
    }
    if sigma0 == 0.0 {
        return Ok(batch.clone());
    }
    let std = sigma0 * (-(t as f64) / c).exp();
    let mut out = batch.clone();
    for v in out.iter_mut() {
        let xi: f64 = StandardNormal.sample(rng);
        *v += std * xi;
    }
    Ok(out)
}

fn validate_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::Config(format!(
            "got {} mixture weights for {n} discriminators",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::Config(format!("mixture weights must be non-negative, got {w}")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("mixture weights must sum to 1, got {sum}")));
    }
    Ok(())
}

fn shard<'a>(batch: &'a Array2<f64>, i: usize, n: usize) -> Array2<f64> {
    let rows = batch.nrows() / n;
    batch.slice(s![i * rows..(i + 1) * rows, ..]).to_owned()
}

fn check_divisible(rows: usize, n: usize, what: &str) -> Result<()> {
    if rows == 0 || rows % n != 0 {
        return Err(Error::Config(format!(
            "{what} batch of {rows} rows cannot be split into {n} equal shards"
        )));
    }
    Ok(())
}

/// One ascent step per ensemble member on `π_i · V(D_i, G)`.
///
/// Real and latent batches are split into equal contiguous shards, one per
/// member; member `i` trains on shard `i`, optionally noise-corrupted (both
/// the real and the generated side, so the classifier sees one input
/// distribution). Members with `π_i == 0` are left untouched, optimizer
/// state included. Returns each member's shard value before its step.
pub fn discriminator_update(
    ens: &mut Ensemble,
    weights: &[f64],
    real: &Array2<f64>,
    z: &Array2<f64>,
    gen: &GeneratorHandle,
    noise: Option<&NoiseSchedule>,
    t: u64,
    noise_rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let n = ens.len();
    validate_weights(weights, n)?;
    check_divisible(real.nrows(), n, "real")?;
    check_divisible(z.nrows(), n, "latent")?;
    if let Some(sched) = noise {
        if sched.sigma0().len() != n {
            return Err(Error::Config(format!(
                "noise schedule lists {} stds for {n} discriminators",
                sched.sigma0().len()
            )));
        }
    }

    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let mut real_i = shard(real, i, n);
        let mut fake_i = gen.generate(&shard(z, i, n))?;
        if let Some(sched) = noise {
            let s0 = sched.sigma0()[i];
            real_i = corrupt_inputs(&real_i, s0, t, sched.decay_c(), noise_rng)?;
            fake_i = corrupt_inputs(&fake_i, s0, t, sched.decay_c(), noise_rng)?;
        }

        let trace_real = ens.member(i).forward(&real_i)?;
        let trace_fake = ens.member(i).forward(&fake_i)?;
        values.push(mean_ln(trace_real.output()) + mean_ln_one_minus(trace_fake.output()));

        if weights[i] == 0.0 {
            continue;
        }

        // d/dD of π_i·V: π_i/(n_r·D) on real rows, −π_i/(n_f·(1−D)) on fake.
        let n_r = real_i.nrows() as f64;
        let n_f = fake_i.nrows() as f64;
        let up_real = trace_real.output().mapv(|d| weights[i] / (n_r * d));
        let up_fake = trace_fake.output().mapv(|d| -weights[i] / (n_f * (1.0 - d)));
        let g_real = ens.member(i).backward(&trace_real, &up_real)?;
        let g_fake = ens.member(i).backward(&trace_fake, &up_fake)?;
        let grads: Vec<f64> = g_real
            .param_grads
            .iter()
            .zip(&g_fake.param_grads)
            .map(|(a, b)| a + b)
            .collect();

        let mut params = ens.member(i).params().to_vec();
        ens.opt_mut(i).step(&mut params, &grads, Direction::Maximize)?;
        ens.set_member_params(i, params)?;
    }
    Ok(values)
}

/// One ascent step on the non-saturating objective
/// `Σ_i π_i · mean_{shard i} ln D_i(G(z))`. Discriminators are read-only.
/// Returns the objective value before the step.
pub fn generator_update(
    gen: &mut GeneratorHandle,
    ens: &Ensemble,
    weights: &[f64],
    z: &Array2<f64>,
) -> Result<f64> {
    let n = ens.len();
    validate_weights(weights, n)?;
    check_divisible(z.nrows(), n, "latent")?;

    let mut objective = 0.0;
    let mut grads = vec![0.0; gen.net().params().len()];
    for i in 0..n {
        let z_i = shard(z, i, n);
        let g_trace = gen.net().forward(&z_i)?;
        let d_trace = ens.member(i).forward(g_trace.output())?;
        let rows = z_i.nrows() as f64;
        objective += weights[i] * mean_ln(d_trace.output());

        if weights[i] == 0.0 {
            continue;
        }
        // d/dD_out of π_i·mean ln D = π_i/(rows·D); chain through D into G.
        let up_d = d_trace.output().mapv(|d| weights[i] / (rows * d));
        let through_d = ens.member(i).backward(&d_trace, &up_d)?;
        let through_g = gen.net().backward(&g_trace, &through_d.input_grads)?;
        for (acc, g) in grads.iter_mut().zip(&through_g.param_grads) {
            *acc += g;
        }
    }

    let mut params = gen.net().params().to_vec();
    gen.opt_mut().step(&mut params, &grads, Direction::Maximize)?;
    gen.set_params(params)?;
    Ok(objective)
}
