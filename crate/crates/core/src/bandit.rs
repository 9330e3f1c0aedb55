//! Adversarial-bandit curriculum: Boltzmann weights over moving-average Q
//! values, with a warm-up period of uniform weights and three reward
//! shapers. The GMAN and uniform baselines are parameter presets of the same
//! code path, which is what makes their trajectories byte-identical to the
//! corresponding adaptive configurations.

use ndarray::Array2;

use crate::gan::{GeneratorHandle, ParamSnapshot};
use crate::nn::MlpNetwork;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Acgan,
    Gman,
    Uniform,
    Vanilla,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Acgan => "acgan",
            Variant::Gman => "gman",
            Variant::Uniform => "uniform",
            Variant::Vanilla => "vanilla",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardKind {
    /// Change in the discriminator's score of fresh generator samples.
    QualityS,
    /// Change in the discriminator's value function (real term cancels).
    ValueV,
    /// The raw value function itself (GMAN regime).
    RawLoss,
}

impl RewardKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RewardKind::QualityS => "quality_s",
            RewardKind::ValueV => "value_v",
            RewardKind::RawLoss => "raw_loss",
        }
    }
}

/// Validated bandit hyperparameters. Variant presets are applied at
/// construction: `uniform` pins λ to 0; `gman` pins α to 1 and the reward to
/// the raw loss; `vanilla` requires a single discriminator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditConfig {
    pub variant: Variant,
    pub n: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub t_warmup: u64,
    pub reward_kind: RewardKind,
}

impl BanditConfig {
    pub fn new(
        variant: Variant,
        n: usize,
        lambda: f64,
        alpha: f64,
        t_warmup: u64,
        reward_kind: RewardKind,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("bandit needs at least one arm".into()));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be non-negative, got {lambda}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        let mut cfg = Self {
            variant,
            n,
            lambda,
            alpha,
            t_warmup,
            reward_kind,
        };
        match variant {
            Variant::Uniform => cfg.lambda = 0.0,
            Variant::Gman => {
                cfg.alpha = 1.0;
                cfg.reward_kind = RewardKind::RawLoss;
            }
            Variant::Vanilla => {
                if n != 1 {
                    return Err(Error::Config(format!(
                        "vanilla variant requires exactly one discriminator, got {n}"
                    )));
                }
            }
            Variant::Acgan => {}
        }
        Ok(cfg)
    }
}

/// Q estimates, current weights, and the episode counter.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    q: Vec<f64>,
    pi: Vec<f64>,
    t: u64,
}

impl BanditState {
    /// Q(0) = 0, π uniform, t = 0.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("bandit needs at least one arm".into()));
        }
        Ok(Self {
            q: vec![0.0; n],
            pi: vec![1.0 / n as f64; n],
            t: 0,
        })
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn from_raw(q: Vec<f64>, pi: Vec<f64>, t: u64) -> Result<Self> {
        if q.is_empty() || q.len() != pi.len() {
            return Err(Error::Checkpoint(format!(
                "bandit state arity mismatch: {} Q values, {} weights",
                q.len(),
                pi.len()
            )));
        }
        Ok(Self { q, pi, t })
    }

    /// Recompute π from the current Q (used after q_update).
    pub fn refresh_policy(&mut self, lambda: f64, t_warmup: u64) -> Result<()> {
        self.pi = policy_weights(&self.q, lambda, self.t, t_warmup)?;
        Ok(())
    }
}

/// Boltzmann weights over Q: uniform while `t ≤ t_warmup` or `λ = 0`, else
/// `softmax(λ·Q)` with max subtraction.
pub fn policy_weights(q: &[f64], lambda: f64, t: u64, t_warmup: u64) -> Result<Vec<f64>> {
    if q.is_empty() {
        return Err(Error::Config("policy needs at least one Q value".into()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("lambda must be non-negative, got {lambda}")));
    }
    let n = q.len();
    if t <= t_warmup || lambda == 0.0 {
        return Ok(vec![1.0 / n as f64; n]);
    }
    let m = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::Numeric(format!("non-finite Q value in {q:?}")));
    }
    let exps: Vec<f64> = q.iter().map(|v| (lambda * (v - m)).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Moving-average update `Q_i ← α·R_i + (1−α)·Q_i`; the episode counter
/// advances by one.
pub fn q_update(state: &mut BanditState, rewards: &[f64], alpha: f64) -> Result<()> {
    if rewards.len() != state.q.len() {
        return Err(Error::Config(format!(
            "got {} rewards for {} arms",
            rewards.len(),
            state.q.len()
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if let Some(bad) = rewards.iter().find(|r| !r.is_finite()) {
        return Err(Error::Numeric(format!("non-finite reward {bad} at episode {}", state.t)));
    }
    for (q, r) in state.q.iter_mut().zip(rewards) {
        *q = alpha * r + (1.0 - alpha) * *q;
    }
    state.t += 1;
    Ok(())
}

fn prev_net(gen_now: &GeneratorHandle, gen_prev: &ParamSnapshot) -> Result<MlpNetwork> {
    gen_now
        .net()
        .with_params(gen_prev.params().to_vec())
        .map_err(|_| {
            Error::Config(format!(
                "snapshot has {} parameters, generator expects {}",
                gen_prev.params().len(),
                gen_now.net().params().len()
            ))
        })
}

/// Progress of the generator under discriminator `d`'s score:
/// `mean_z D(G(z; θ_t)) − mean_z D(G(z; θ_{t−1}))`, same z for both.
pub fn reward_quality(
    d: &MlpNetwork,
    gen_now: &GeneratorHandle,
    gen_prev: &ParamSnapshot,
    z: &Array2<f64>,
) -> Result<f64> {
    let prev = prev_net(gen_now, gen_prev)?;
    let now_score = mean_of(d, &gen_now.generate(z)?)?;
    let prev_score = mean_of(d, &prev.forward(z)?.output().clone())?;
    Ok(now_score - prev_score)
}

fn mean_of(d: &MlpNetwork, x: &Array2<f64>) -> Result<f64> {
    let out = d.forward(x)?;
    Ok(out.output().iter().sum::<f64>() / x.nrows() as f64)
}

/// Change in the value function between generator versions. The real-data
/// term of the value function is identical on both sides and cancels, so
/// only `mean ln(1 − D(G(z)))` is evaluated:
/// `mean_z ln(1−D(G(z;θ_t))) − mean_z ln(1−D(G(z;θ_{t−1})))`.
pub fn reward_value(
    d: &MlpNetwork,
    gen_now: &GeneratorHandle,
    gen_prev: &ParamSnapshot,
    z: &Array2<f64>,
) -> Result<f64> {
    let prev = prev_net(gen_now, gen_prev)?;
    let now_term = mean_ln_one_minus(d, &gen_now.generate(z)?)?;
    let prev_term = mean_ln_one_minus(d, &prev.forward(z)?.output().clone())?;
    Ok(now_term - prev_term)
}

fn mean_ln_one_minus(d: &MlpNetwork, x: &Array2<f64>) -> Result<f64> {
    let out = d.forward(x)?;
    Ok(out.output().iter().map(|v| (1.0 - v).ln()).sum::<f64>() / x.nrows() as f64)
}

/// The value function itself as the reward (GMAN regime).
pub fn reward_raw_loss(
    d: &MlpNetwork,
    gen: &GeneratorHandle,
    z: &Array2<f64>,
    real: &Array2<f64>,
) -> Result<f64> {
    crate::gan::value_function(d, real, &gen.generate(z)?)
}

/// One reward per ensemble member under the configured shaper. All members
/// see the same z (and real) batches.
pub fn observe_rewards(
    members: &[MlpNetwork],
    gen_now: &GeneratorHandle,
    gen_prev: &ParamSnapshot,
    z: &Array2<f64>,
    real: &Array2<f64>,
    kind: RewardKind,
) -> Result<Vec<f64>> {
    members
        .iter()
        .map(|d| match kind {
            RewardKind::QualityS => reward_quality(d, gen_now, gen_prev, z),
            RewardKind::ValueV => reward_value(d, gen_now, gen_prev, z),
            RewardKind::RawLoss => reward_raw_loss(d, gen_now, z, real),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::{snapshot, value_function};
    use crate::nn::{Activation, LayerSpec, Role};
    use crate::optim::OptimizerKind;
    use ndarray::array;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform3() -> Vec<f64> {
        vec![1.0 / 3.0; 3]
    }

    #[test]
    fn lambda_zero_gives_uniform() {
        let pi = policy_weights(&[5.0, -3.0, 0.7], 0.0, 100, 0).unwrap();
        assert_eq!(pi, uniform3());
    }

    #[test]
    fn warm_up_is_uniform_regardless_of_q() {
        for t in 0..=45 {
            let pi = policy_weights(&[9.0, 1.0, -4.0], 15.0, t, 45).unwrap();
            assert_eq!(pi, uniform3());
        }
        let after = policy_weights(&[9.0, 1.0, -4.0], 15.0, 46, 45).unwrap();
        assert_ne!(after, uniform3());
    }

    #[test]
    fn softmax_known_values() {
        // λ = ln 2 turns Q = (1,0,0) into weights ∝ (2,1,1).
        let lambda = std::f64::consts::LN_2;
        let pi = policy_weights(&[1.0, 0.0, 0.0], lambda, 1, 0).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12);
        assert!((pi[1] - 0.25).abs() < 1e-12);
        assert!((pi[2] - 0.25).abs() < 1e-12);
        // Shift invariance: Q = (11,10,10) gives the same weights.
        let shifted = policy_weights(&[11.0, 10.0, 10.0], lambda, 1, 0).unwrap();
        for (a, b) in pi.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_scale_and_shift_invariance() {
        let q = [0.3, -1.2, 0.9, 0.0];
        let base = policy_weights(&q, 15.0, 1, 0).unwrap();
        let shifted: Vec<f64> = q.iter().map(|v| v + 123.456).collect();
        let pi_shift = policy_weights(&shifted, 15.0, 1, 0).unwrap();
        let scaled: Vec<f64> = q.iter().map(|v| v * 7.0).collect();
        let pi_scale = policy_weights(&scaled, 15.0 / 7.0, 1, 0).unwrap();
        for i in 0..q.len() {
            assert!((base[i] - pi_shift[i]).abs() < 1e-12);
            assert!((base[i] - pi_scale[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn simplex_invariant_holds_for_random_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let n = rng.gen_range(1..6);
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let lambda = rng.gen_range(0.0..20.0);
            let pi = policy_weights(&q, lambda, 10, 0).unwrap();
            assert!(pi.iter().all(|w| *w >= 0.0));
            let sum: f64 = pi.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "sum {sum}");
        }
    }

    #[test]
    fn monotone_in_own_q() {
        let base = policy_weights(&[0.2, 0.5, -0.3], 15.0, 1, 0).unwrap();
        let bumped = policy_weights(&[0.25, 0.5, -0.3], 15.0, 1, 0).unwrap();
        assert!(bumped[0] > base[0]);
    }

    #[test]
    fn q_update_alpha_one_copies_rewards() {
        let mut state = BanditState::new(3).unwrap();
        q_update(&mut state, &[0.4, -0.2, 0.9], 1.0).unwrap();
        assert_eq!(state.q(), &[0.4, -0.2, 0.9]);
        assert_eq!(state.t(), 1);
    }

    #[test]
    fn q_update_direct_substitution() {
        let mut state = BanditState::new(1).unwrap();
        q_update(&mut state, &[1.0], 0.01).unwrap();
        assert!((state.q()[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn q_update_converges_geometrically() {
        // Constant reward c: Q(t) = c·(1 − (1−α)^t) → |Q − c| = |c|·0.99^t.
        let c = -3.7;
        let mut state = BanditState::new(1).unwrap();
        for _ in 0..10_000 {
            q_update(&mut state, &[c], 0.01).unwrap();
        }
        assert!((state.q()[0] - c).abs() < 1e-6 * c.abs());
        assert_eq!(state.t(), 10_000);
    }

    #[test]
    fn q_update_rejects_bad_input() {
        let mut state = BanditState::new(2).unwrap();
        assert!(q_update(&mut state, &[1.0], 0.5).is_err());
        assert!(q_update(&mut state, &[1.0, f64::INFINITY], 0.5).is_err());
        assert!(q_update(&mut state, &[1.0, 1.0], 0.0).is_err());
        assert!(q_update(&mut state, &[1.0, 1.0], 1.5).is_err());
    }

    #[test]
    fn config_presets() {
        let uni = BanditConfig::new(Variant::Uniform, 3, 15.0, 0.01, 45, RewardKind::QualityS)
            .unwrap();
        assert_eq!(uni.lambda, 0.0);
        let gman =
            BanditConfig::new(Variant::Gman, 3, 15.0, 0.01, 45, RewardKind::QualityS).unwrap();
        assert_eq!(gman.alpha, 1.0);
        assert_eq!(gman.reward_kind, RewardKind::RawLoss);
        assert!(BanditConfig::new(Variant::Vanilla, 2, 15.0, 0.01, 15, RewardKind::QualityS)
            .is_err());
        assert!(BanditConfig::new(Variant::Acgan, 3, -1.0, 0.01, 45, RewardKind::QualityS)
            .is_err());
    }

    fn small_disc(seed: u64) -> MlpNetwork {
        MlpNetwork::init(
            vec![
                LayerSpec::new(2, 6, Activation::Relu).unwrap(),
                LayerSpec::new(6, 1, Activation::Sigmoid).unwrap(),
            ],
            Role::Discriminator,
            seed,
        )
        .unwrap()
    }

    fn small_gen(seed: u64) -> GeneratorHandle {
        let net = MlpNetwork::init(
            vec![
                LayerSpec::new(2, 6, Activation::Relu).unwrap(),
                LayerSpec::new(6, 2, Activation::Linear).unwrap(),
            ],
            Role::Generator,
            seed,
        )
        .unwrap();
        GeneratorHandle::new(net, OptimizerKind::adam(2e-4)).unwrap()
    }

    #[test]
    fn rewards_are_zero_without_generator_movement() {
        let d = small_disc(1);
        let gen = small_gen(2);
        let snap = snapshot(&gen, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = Array2::from_shape_fn((64, 2), |_| rng.gen_range(-1.0..1.0));
        assert_eq!(reward_quality(&d, &gen, &snap, &z).unwrap(), 0.0);
        assert_eq!(reward_value(&d, &gen, &snap, &z).unwrap(), 0.0);
    }

    #[test]
    fn constant_discriminator_gives_zero_progress_rewards() {
        let d = small_disc(1).with_params(vec![0.0; 25]).unwrap();
        let gen_a = small_gen(2);
        let gen_b = small_gen(99); // different parameters entirely
        let snap = snapshot(&gen_b, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = Array2::from_shape_fn((32, 2), |_| rng.gen_range(-1.0..1.0));
        assert_eq!(reward_quality(&d, &gen_a, &snap, &z).unwrap(), 0.0);
        assert_eq!(reward_value(&d, &gen_a, &snap, &z).unwrap(), 0.0);
    }

    #[test]
    fn reward_quality_matches_two_forward_passes() {
        let d = small_disc(5);
        let gen_now = small_gen(6);
        let gen_old = small_gen(7);
        let snap = snapshot(&gen_old, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = Array2::from_shape_fn((256, 2), |_| rng.gen_range(-1.5..1.5));

        let got = reward_quality(&d, &gen_now, &snap, &z).unwrap();
        let now = d.forward(&gen_now.generate(&z).unwrap()).unwrap();
        let old_net = gen_now.net().with_params(snap.params().to_vec()).unwrap();
        let old = d.forward(old_net.forward(&z).unwrap().output()).unwrap();
        let want = now.output().iter().sum::<f64>() / 256.0
            - old.output().iter().sum::<f64>() / 256.0;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn reward_value_matches_full_formula_with_real_term() {
        // The oracle keeps the cancelling real-data term on both sides.
        let d = small_disc(9);
        let gen_now = small_gen(10);
        let gen_old = small_gen(11);
        let snap = snapshot(&gen_old, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let z = Array2::from_shape_fn((128, 2), |_| rng.gen_range(-1.5..1.5));
        let real = Array2::from_shape_fn((64, 2), |_| rng.gen_range(-1.5..1.5));

        let got = reward_value(&d, &gen_now, &snap, &z).unwrap();
        let old_net = gen_now.net().with_params(snap.params().to_vec()).unwrap();
        let v_now = value_function(&d, &real, &gen_now.generate(&z).unwrap()).unwrap();
        let v_old = value_function(&d, &real, &old_net.forward(&z).unwrap().output().clone())
            .unwrap();
        assert!((got - (v_now - v_old)).abs() < 1e-12);
    }

    #[test]
    fn reward_raw_loss_is_the_value_function() {
        let d = small_disc(13);
        let gen = small_gen(14);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let z = Array2::from_shape_fn((32, 2), |_| rng.gen_range(-1.0..1.0));
        let real = Array2::from_shape_fn((32, 2), |_| rng.gen_range(-1.0..1.0));
        let got = reward_raw_loss(&d, &gen, &z, &real).unwrap();
        let want = value_function(&d, &real, &gen.generate(&z).unwrap()).unwrap();
        assert_eq!(got, want);

        let blind = small_disc(13).with_params(vec![0.0; 25]).unwrap();
        let v = reward_raw_loss(&blind, &gen, &z, &real).unwrap();
        assert!((v + 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn gman_preset_composes_to_softmax_of_values() {
        // α = 1 copies the raw-loss rewards into Q, so π = softmax(λ·V).
        let cfg = BanditConfig::new(Variant::Gman, 3, 15.0, 0.01, 0, RewardKind::QualityS)
            .unwrap();
        let members = vec![small_disc(20), small_disc(21), small_disc(22)];
        let gen = small_gen(23);
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let z = Array2::from_shape_fn((32, 2), |_| rng.gen_range(-1.0..1.0));
        let real = Array2::from_shape_fn((32, 2), |_| rng.gen_range(-1.0..1.0));

        let snap = snapshot(&gen, 0);
        let rewards =
            observe_rewards(&members, &gen, &snap, &z, &real, cfg.reward_kind).unwrap();
        let mut state = BanditState::new(3).unwrap();
        q_update(&mut state, &rewards, cfg.alpha).unwrap();
        state.refresh_policy(cfg.lambda, cfg.t_warmup).unwrap();

        let values: Vec<f64> = members
            .iter()
            .map(|d| value_function(d, &real, &gen.generate(&z).unwrap()).unwrap())
            .collect();
        let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = values.iter().map(|v| (15.0 * (v - m)).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for (got, e) in state.pi().iter().zip(&exps) {
            assert!((got - e / sum).abs() < 1e-12);
        }
    }

    #[test]
    fn snapshot_shape_mismatch_is_config_error() {
        let d = small_disc(30);
        let gen = small_gen(31);
        let bad = ParamSnapshot::from_raw(vec![0.0; 5], 0);
        let z = array![[0.0, 0.0]];
        assert!(matches!(
            reward_quality(&d, &gen, &bad, &z),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn empty_q_is_rejected() {
        assert!(policy_weights(&[], 1.0, 0, 0).is_err());
        assert!(BanditState::new(0).is_err());
    }
}
