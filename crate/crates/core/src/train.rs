//! Training orchestration: the bandit-weighted ensemble loop, the two-phase
//! mode-recovery protocol, CSV/JSON artifact emission, and checkpoint resume.
//!
//! One run is one logical thread of state mutation. Per iteration the RNG
//! streams are consumed in a fixed order (data batch, latent for D, optional
//! allocation draw, optional input noise, latent for G, reward latents), so a
//! resumed run replays the exact byte sequence of an uninterrupted one.

use std::fs::{self, File};
use std::io::{BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bandit::{observe_rewards, q_update, BanditState};
use crate::checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, DiscSnapshot, OptSnapshot,
};
use crate::config::{Allocation, Dataset, RawConfig, RunConfig};
use crate::data::{
    grid_spec, ring_spec, sample_mixture, sample_prior, ModeSpec, PriorSpec, GRID_SPACING,
    GRID_STD, RING_RADIUS, RING_STD,
};
use crate::gan::{
    discriminator_update, generator_update, snapshot, Ensemble, GeneratorHandle, ParamSnapshot,
};
use crate::metrics::{
    coverage, frechet_distance, gradient_norm_field, mixture_moments, moments, CoverageReport,
    GridSpec, MomentPair,
};
use crate::nn::{MlpNetwork, Role};
use crate::rng::{RngBank, StreamLabel};
use crate::{Error, Result, Variant};

/// Size of the fixed latent set used for FD/coverage reports. The same z
/// vectors are pushed through the generator at every evaluation point so
/// successive reports differ only through the generator.
pub const EVAL_SET_SIZE: usize = 10_000;
/// π is additionally reported as non-overlapping block averages of this many
/// iterations (the plotting convention for curriculum inspection).
pub const PI_AVG_WINDOW: u64 = 200;
/// A sample is high-quality iff within this many mode stds of the nearest
/// center.
pub const HQ_MULTIPLIER: f64 = 3.0;
/// A mode counts as covered once it attracts this many high-quality samples.
pub const COVER_MIN_COUNT: usize = 1;

/// The 2D mixture a dataset name stands for.
pub fn mode_spec_for(dataset: Dataset) -> Result<ModeSpec> {
    match dataset {
        Dataset::Ring8 => ring_spec(RING_RADIUS, RING_STD),
        Dataset::Grid25 => grid_spec(GRID_SPACING, GRID_STD),
    }
}

/// Best FD seen over the evaluation points of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestFd {
    pub value: f64,
    pub iteration: u64,
}

/// Post-hoc description of how the discriminator mixture evolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurriculumDiagnostic {
    /// Argmax changes between consecutive fully-post-warm-up π block averages.
    pub argmax_switches: u32,
    pub switched_after_warmup: bool,
    /// max_i (mean π_i over the final 10% of iterations) − 1/N.
    pub final_max_gap: f64,
    pub near_uniform_finish: bool,
}

/// Headline numbers of one finished run, echoed into `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub iterations_run: u64,
    pub resumed_from: Option<u64>,
    pub best_fd: Option<BestFd>,
    pub final_fd: f64,
    pub final_modes_covered: usize,
    pub final_hq_fraction: f64,
    pub curriculum: CurriculumDiagnostic,
    /// Mean gradient-norm over the [−2,2]² field, one entry per
    /// discriminator, weakest first.
    pub gradfield_mean_norms: Vec<f64>,
    /// SHA-256 of the generator parameter bytes at the start of the run
    /// (after any injected warm start).
    pub init_generator_sha256: String,
}

/// Every file a finished run produced, plus its summary record.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub policy_log: PathBuf,
    pub metrics_log: PathBuf,
    pub policy_avg_log: PathBuf,
    pub sample_dumps: Vec<PathBuf>,
    pub gradfield_dumps: Vec<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub final_checkpoint: PathBuf,
    pub summary_path: PathBuf,
    pub summary: RunSummary,
}

impl RunArtifacts {
    /// All paths the artifact set promises to exist.
    pub fn all_paths(&self) -> Vec<&Path> {
        let mut v: Vec<&Path> = vec![
            &self.output_dir,
            &self.policy_log,
            &self.metrics_log,
            &self.policy_avg_log,
            &self.final_checkpoint,
            &self.summary_path,
        ];
        v.extend(self.sample_dumps.iter().map(PathBuf::as_path));
        v.extend(self.gradfield_dumps.iter().map(PathBuf::as_path));
        v.extend(self.checkpoints.iter().map(PathBuf::as_path));
        v
    }
}

/// The three phases of the mode-recovery protocol.
#[derive(Debug, Clone)]
pub struct RecoveryArtifacts {
    pub pretrain: RunArtifacts,
    pub vanilla: RunArtifacts,
    pub acgan: RunArtifacts,
    pub summary_path: PathBuf,
}

/// Live training state: networks, optimizers, bandit, and RNG streams.
pub struct Trainer {
    cfg: RunConfig,
    bank: RngBank,
    gen: GeneratorHandle,
    ens: Ensemble,
    state: BanditState,
    snap: ParamSnapshot,
    mode_spec: ModeSpec,
    prior: PriorSpec,
    start_iter: u64,
}

impl Trainer {
    /// Fresh trainer. `init_gen_params`, when given, replaces the randomly
    /// initialized generator parameters (warm start); the init stream is
    /// consumed either way so downstream draws stay aligned.
    pub fn new(cfg: RunConfig, init_gen_params: Option<Vec<f64>>) -> Result<Self> {
        let mode_spec = mode_spec_for(cfg.dataset)?;
        let prior = PriorSpec::new(cfg.prior_dim)?;
        let mut bank = RngBank::new(cfg.seed);

        let gen_seed = bank.stream(StreamLabel::Init).gen::<u64>();
        let gen_net = MlpNetwork::init(cfg.gen_layer_specs()?, Role::Generator, gen_seed)?;
        let mut members = Vec::with_capacity(cfg.n);
        for i in 0..cfg.n {
            let seed = bank.stream(StreamLabel::Init).gen::<u64>();
            members.push(MlpNetwork::init(
                cfg.disc_layer_specs(i)?,
                Role::Discriminator,
                seed,
            )?);
        }
        let mut gen = GeneratorHandle::new(gen_net, cfg.optimizer)?;
        if let Some(p) = init_gen_params {
            gen.set_params(p)?;
        }
        let ens = Ensemble::new(members, cfg.optimizer)?;

        // The episode counter is pre-advanced to T_warmup: after the reward
        // update at global iteration t it equals t+1, i.e. the iteration the
        // refreshed π applies to, which is what the warm-up gate compares
        // against.
        let n = cfg.n;
        let state = BanditState::from_raw(
            vec![0.0; n],
            vec![1.0 / n as f64; n],
            cfg.bandit.t_warmup,
        )?;
        let snap = snapshot(&gen, 0);
        Ok(Self {
            cfg,
            bank,
            gen,
            ens,
            state,
            snap,
            mode_spec,
            prior,
            start_iter: 0,
        })
    }

    /// Rebuild the exact state a checkpoint froze, under `cfg` (normally the
    /// checkpoint's own config echo, possibly with a new output directory).
    pub fn from_checkpoint(cfg: RunConfig, ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.discs.len() != cfg.n {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} discriminators, config expects {}",
                ckpt.discs.len(),
                cfg.n
            )));
        }
        let mode_spec = mode_spec_for(cfg.dataset)?;
        let prior = PriorSpec::new(cfg.prior_dim)?;
        let bank = RngBank::restore(ckpt.rng_seed, &ckpt.rng_positions)?;

        let gen_net = MlpNetwork::init(cfg.gen_layer_specs()?, Role::Generator, 0)?
            .with_params(ckpt.gen_params.clone())?;
        let mut gen = GeneratorHandle::new(gen_net, cfg.optimizer)?;
        gen.opt_mut().restore(
            ckpt.gen_opt.first_moment.clone(),
            ckpt.gen_opt.second_moment.clone(),
            ckpt.gen_opt.step_count,
        )?;

        let mut members = Vec::with_capacity(cfg.n);
        for (i, d) in ckpt.discs.iter().enumerate() {
            members.push(
                MlpNetwork::init(cfg.disc_layer_specs(i)?, Role::Discriminator, 0)?
                    .with_params(d.params.clone())?,
            );
        }
        let mut ens = Ensemble::new(members, cfg.optimizer)?;
        for (i, d) in ckpt.discs.iter().enumerate() {
            ens.opt_mut(i).restore(
                d.opt.first_moment.clone(),
                d.opt.second_moment.clone(),
                d.opt.step_count,
            )?;
        }

        let state = BanditState::from_raw(
            ckpt.bandit_q.clone(),
            ckpt.bandit_pi.clone(),
            ckpt.bandit_t,
        )?;
        // The snapshot is refreshed at the end of every iteration, so at a
        // checkpoint boundary it coincides with the live parameters.
        let snap = ParamSnapshot::from_raw(ckpt.gen_params.clone(), ckpt.iteration);
        Ok(Self {
            cfg,
            bank,
            gen,
            ens,
            state,
            snap,
            mode_spec,
            prior,
            start_iter: ckpt.iteration,
        })
    }

    fn to_checkpoint(&self, iteration: u64) -> Checkpoint {
        let (gm, gv) = self.gen.opt().moments();
        let discs = (0..self.cfg.n)
            .map(|i| {
                let (m, v) = self.ens.opt(i).moments();
                DiscSnapshot {
                    params: self.ens.member(i).params().to_vec(),
                    opt: OptSnapshot {
                        step_count: self.ens.opt(i).step_count(),
                        first_moment: m.to_vec(),
                        second_moment: v.to_vec(),
                    },
                }
            })
            .collect();
        Checkpoint {
            config: self.cfg.to_raw(),
            iteration,
            gen_params: self.gen.net().params().to_vec(),
            gen_opt: OptSnapshot {
                step_count: self.gen.opt().step_count(),
                first_moment: gm.to_vec(),
                second_moment: gv.to_vec(),
            },
            discs,
            bandit_q: self.state.q().to_vec(),
            bandit_pi: self.state.pi().to_vec(),
            bandit_t: self.state.t(),
            rng_seed: self.bank.seed(),
            rng_positions: self.bank.positions(),
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn generator(&self) -> &GeneratorHandle {
        &self.gen
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ens
    }
}

fn sha256_of_params(params: &[f64]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.to_le_bytes());
    }
    format!("{:x}", h.finalize())
}

/// Mixture weights as-is, or a one-hot draw when allocation is per-iteration
/// sampling.
fn effective_weights(pi: &[f64], allocation: Allocation, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match allocation {
        Allocation::Mixture => pi.to_vec(),
        Allocation::Sample => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = pi.len() - 1;
            for (i, p) in pi.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            let mut w = vec![0.0; pi.len()];
            w[chosen] = 1.0;
            w
        }
    }
}

fn ensure_finite(t: u64, d_values: &[f64], g_obj: f64) -> Result<()> {
    if let Some((i, v)) = d_values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "iteration {t}: discriminator {} value {v} is not finite",
            i + 1
        )));
    }
    if !g_obj.is_finite() {
        return Err(Error::Numeric(format!(
            "iteration {t}: generator objective {g_obj} is not finite"
        )));
    }
    Ok(())
}

struct IterationRecord {
    rewards: Vec<f64>,
    q: Vec<f64>,
    pi_used: Vec<f64>,
}

/// One full pass of the per-iteration protocol: both adversarial updates with
/// the current mixture, then (past warm-up) reward observation and the policy
/// refresh that takes effect next iteration.
fn run_iteration(tr: &mut Trainer, t: u64, allowed: Option<&[usize]>) -> Result<IterationRecord> {
    let batch = tr.cfg.batch_size;
    let n = tr.cfg.n;
    let allocation = tr.cfg.allocation;
    let warm = tr.cfg.bandit.t_warmup;
    let alpha = tr.cfg.bandit.alpha;
    let lambda = tr.cfg.bandit.lambda;
    let kind = tr.cfg.bandit.reward_kind;
    let reward_batch = tr.cfg.reward_batch;

    let real = sample_mixture(
        &tr.mode_spec,
        batch,
        tr.bank.stream(StreamLabel::Data),
        allowed,
    )?;
    let z_d = sample_prior(&tr.prior, batch, tr.bank.stream(StreamLabel::Prior))?;
    let w = effective_weights(tr.state.pi(), allocation, tr.bank.stream(StreamLabel::Eval));
    let d_values = discriminator_update(
        &mut tr.ens,
        &w,
        &real,
        &z_d,
        &tr.gen,
        tr.cfg.noise.as_ref(),
        t,
        tr.bank.stream(StreamLabel::Noise),
    )?;
    let z_g = sample_prior(&tr.prior, batch, tr.bank.stream(StreamLabel::Prior))?;
    let g_obj = generator_update(&mut tr.gen, &tr.ens, &w, &z_g)?;
    ensure_finite(t, &d_values, g_obj)?;

    let pi_used = tr.state.pi().to_vec();
    let rewards = if t >= warm {
        let z_r = sample_prior(&tr.prior, reward_batch, tr.bank.stream(StreamLabel::Reward))?;
        // The raw-loss reward reuses this iteration's real batch; the
        // progress rewards ignore it.
        let r = observe_rewards(tr.ens.members(), &tr.gen, &tr.snap, &z_r, &real, kind)?;
        q_update(&mut tr.state, &r, alpha)?;
        tr.state.refresh_policy(lambda, warm)?;
        r
    } else {
        vec![0.0; n]
    };
    tr.snap = snapshot(&tr.gen, t);
    Ok(IterationRecord {
        rewards,
        q: tr.state.q().to_vec(),
        pi_used,
    })
}

struct Logs {
    policy: BufWriter<File>,
    metrics: BufWriter<File>,
    policy_avg: BufWriter<File>,
}

impl Logs {
    fn open(dir: &Path, n: usize) -> Result<Self> {
        let mut policy = BufWriter::new(File::create(dir.join("policy.csv"))?);
        write!(policy, "iter")?;
        for i in 1..=n {
            write!(policy, ",r_{i}")?;
        }
        for i in 1..=n {
            write!(policy, ",q_{i}")?;
        }
        for i in 1..=n {
            write!(policy, ",pi_{i}")?;
        }
        writeln!(policy)?;

        let mut metrics = BufWriter::new(File::create(dir.join("metrics.csv"))?);
        writeln!(metrics, "iter,fd,modes_covered,hq_fraction")?;

        let mut policy_avg = BufWriter::new(File::create(dir.join("policy_avg.csv"))?);
        write!(policy_avg, "iter")?;
        for i in 1..=n {
            write!(policy_avg, ",pi_avg_{i}")?;
        }
        writeln!(policy_avg)?;

        Ok(Self {
            policy,
            metrics,
            policy_avg,
        })
    }

    fn flush(&mut self) -> Result<()> {
        self.policy.flush()?;
        self.metrics.flush()?;
        self.policy_avg.flush()?;
        Ok(())
    }
}

fn write_values_row(w: &mut impl IoWrite, iter: u64, groups: &[&[f64]]) -> Result<()> {
    write!(w, "{iter}")?;
    for g in groups {
        for v in *g {
            write!(w, ",{v}")?;
        }
    }
    writeln!(w)?;
    Ok(())
}

fn dump_samples(path: &Path, samples: &Array2<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x,y")?;
    for row in samples.rows() {
        writeln!(w, "{},{}", row[0], row[1])?;
    }
    w.flush()?;
    Ok(())
}

/// Field CSV (`resolution` rows of comma-separated norms, y ascending) plus a
/// JSON sidecar with the lattice metadata. Returns the CSV path and the mean
/// norm.
fn dump_gradfield(
    dir: &Path,
    member_index: usize,
    hidden_layers: usize,
    iteration: u64,
    field: &Array2<f64>,
    grid: &GridSpec,
) -> Result<(PathBuf, PathBuf, f64)> {
    let stem = format!("gradfield_d{}_{iteration}", member_index + 1);
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = BufWriter::new(File::create(&csv_path)?);
    for row in field.rows() {
        let mut first = true;
        for v in row {
            if first {
                write!(w, "{v}")?;
                first = false;
            } else {
                write!(w, ",{v}")?;
            }
        }
        writeln!(w)?;
    }
    w.flush()?;

    let mean = field.mean().unwrap_or(0.0);
    let sidecar = serde_json::json!({
        "x_range": grid.x_range,
        "y_range": grid.y_range,
        "resolution": grid.resolution,
        "discriminator": member_index + 1,
        "hidden_layers": hidden_layers,
        "iteration": iteration,
        "mean_norm": mean,
    });
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(
        &json_path,
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n",
    )?;
    Ok((csv_path, json_path, mean))
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Derive the curriculum description from π block averages and the mean π
/// over the final stretch of the run.
fn curriculum_diagnostic(
    blocks: &[(u64, Vec<f64>)],
    warm: u64,
    tail_mean: Option<&[f64]>,
    n: usize,
) -> CurriculumDiagnostic {
    // A block [end−W+1, end] lies fully past warm-up iff end ≥ warm + W.
    let post: Vec<&Vec<f64>> = blocks
        .iter()
        .filter(|(end, _)| *end >= warm + PI_AVG_WINDOW)
        .map(|(_, v)| v)
        .collect();
    let mut switches = 0u32;
    for pair in post.windows(2) {
        if argmax(pair[0]) != argmax(pair[1]) {
            switches += 1;
        }
    }
    let gap = tail_mean.map(|m| m.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 1.0 / n as f64);
    CurriculumDiagnostic {
        argmax_switches: switches,
        switched_after_warmup: switches >= 1,
        final_max_gap: gap.unwrap_or(f64::NAN),
        near_uniform_finish: gap.map_or(false, |g| g < 0.2),
    }
}

struct EvalPoint {
    iteration: u64,
    fd: f64,
    report: CoverageReport,
}

fn evaluate(
    gen: &GeneratorHandle,
    eval_z: &Array2<f64>,
    mode_spec: &ModeSpec,
    data_moments: &MomentPair,
    iteration: u64,
) -> Result<(Array2<f64>, EvalPoint)> {
    let samples = gen.generate(eval_z)?;
    let m = moments(&samples)?;
    let fd = frechet_distance(&m, data_moments);
    let report = coverage(&samples, mode_spec, HQ_MULTIPLIER, COVER_MIN_COUNT)?;
    Ok((
        samples,
        EvalPoint {
            iteration,
            fd,
            report,
        },
    ))
}

/// Drive a trainer to `cfg.iterations`, emitting all artifacts into the
/// config's output directory. `allowed` optionally restricts the data
/// mixture to a mode subset (the recovery protocol's pretraining phase);
/// coverage is always reported against the full mixture, while FD targets
/// the restricted one, i.e. the distribution actually being fit.
fn run_loop(mut tr: Trainer, allowed: Option<&[usize]>) -> Result<RunArtifacts> {
    let cfg = tr.cfg.clone();
    if cfg.iterations == 0 {
        return Err(Error::Config("iterations must be positive".into()));
    }
    if cfg.eval_interval == 0 {
        return Err(Error::Config("eval_interval must be positive".into()));
    }
    if tr.start_iter >= cfg.iterations {
        return Err(Error::Config(format!(
            "nothing to run: checkpoint is at iteration {} of {}",
            tr.start_iter, cfg.iterations
        )));
    }
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;

    let data_moments = mixture_moments(&tr.mode_spec, allowed)?;
    // The evaluation latents always come from a fresh bank at stream position
    // zero, so a resumed run reconstructs the identical set without touching
    // the live bank's saved positions.
    let eval_z = {
        let mut tmp = RngBank::new(cfg.seed);
        sample_prior(&tr.prior, EVAL_SET_SIZE, tmp.stream(StreamLabel::Eval))?
    };
    let init_sha = sha256_of_params(tr.gen.net().params());

    let mut logs = Logs::open(&dir, cfg.n)?;
    let mut sample_dumps = Vec::new();
    let mut checkpoints = Vec::new();

    let mut block_sum = vec![0.0; cfg.n];
    let mut block_count = 0u64;
    let mut blocks: Vec<(u64, Vec<f64>)> = Vec::new();
    // Final 10% of the run, never empty.
    let tail_start = cfg.iterations - (cfg.iterations / 10).max(1);
    let mut tail_sum = vec![0.0; cfg.n];
    let mut tail_count = 0u64;
    let mut best_fd: Option<BestFd> = None;
    let mut last_eval: Option<EvalPoint> = None;

    for t in (tr.start_iter + 1)..=cfg.iterations {
        let rec = match run_iteration(&mut tr, t, allowed) {
            Ok(rec) => rec,
            Err(e) => {
                let _ = logs.flush();
                if matches!(e, Error::Numeric(_)) {
                    // Fail fast but leave enough behind to diagnose: the
                    // (possibly mid-iteration) state and a crash record.
                    let _ = save_checkpoint(
                        &dir.join("checkpoint_crash.ckpt"),
                        &tr.to_checkpoint(t),
                    );
                    let diag = serde_json::json!({
                        "iteration": t,
                        "error": e.to_string(),
                    });
                    let _ = fs::write(
                        dir.join("crash.json"),
                        serde_json::to_string_pretty(&diag).expect("diag serializes") + "\n",
                    );
                }
                return Err(e);
            }
        };

        write_values_row(
            &mut logs.policy,
            t,
            &[&rec.rewards, &rec.q, &rec.pi_used],
        )?;

        for (s, p) in block_sum.iter_mut().zip(&rec.pi_used) {
            *s += p;
        }
        block_count += 1;
        if t % PI_AVG_WINDOW == 0 {
            let avg: Vec<f64> = block_sum.iter().map(|s| s / block_count as f64).collect();
            write_values_row(&mut logs.policy_avg, t, &[&avg])?;
            blocks.push((t, avg));
            block_sum.iter_mut().for_each(|s| *s = 0.0);
            block_count = 0;
        }
        if t > tail_start {
            for (s, p) in tail_sum.iter_mut().zip(&rec.pi_used) {
                *s += p;
            }
            tail_count += 1;
        }

        if t % cfg.eval_interval == 0 {
            let (samples, point) = evaluate(&tr.gen, &eval_z, &tr.mode_spec, &data_moments, t)?;
            write_values_row(
                &mut logs.metrics,
                t,
                &[&[
                    point.fd,
                    point.report.modes_covered as f64,
                    point.report.hq_fraction,
                ]],
            )?;
            let sample_path = dir.join(format!("samples_{t}.csv"));
            dump_samples(&sample_path, &samples)?;
            sample_dumps.push(sample_path);
            if point.fd.is_finite() && best_fd.map_or(true, |b| point.fd < b.value) {
                best_fd = Some(BestFd {
                    value: point.fd,
                    iteration: t,
                });
            }
            last_eval = Some(point);
            logs.flush()?;
        }

        if let Some(interval) = cfg.checkpoint_interval {
            if t % interval == 0 && t != cfg.iterations {
                let path = dir.join(format!("checkpoint_{t}.ckpt"));
                save_checkpoint(&path, &tr.to_checkpoint(t))?;
                checkpoints.push(path);
            }
        }
    }

    let final_checkpoint = dir.join("checkpoint_final.ckpt");
    save_checkpoint(&final_checkpoint, &tr.to_checkpoint(cfg.iterations))?;

    let grid = GridSpec::gradient_window();
    let mut gradfield_dumps = Vec::new();
    let mut gradfield_means = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let field = gradient_norm_field(tr.ens.member(i), &grid)?;
        let (csv, json, mean) = dump_gradfield(
            &dir,
            i,
            cfg.disc_hidden_layers[i],
            cfg.iterations,
            &field,
            &grid,
        )?;
        gradfield_dumps.push(csv);
        gradfield_dumps.push(json);
        gradfield_means.push(mean);
    }

    let final_point = match last_eval {
        Some(p) if p.iteration == cfg.iterations => p,
        _ => evaluate(&tr.gen, &eval_z, &tr.mode_spec, &data_moments, cfg.iterations)?.1,
    };
    let tail_mean: Option<Vec<f64>> = if tail_count > 0 {
        Some(tail_sum.iter().map(|s| s / tail_count as f64).collect())
    } else {
        None
    };
    let curriculum = curriculum_diagnostic(
        &blocks,
        cfg.bandit.t_warmup,
        tail_mean.as_deref(),
        cfg.n,
    );

    let summary = RunSummary {
        iterations_run: cfg.iterations,
        resumed_from: (tr.start_iter > 0).then_some(tr.start_iter),
        best_fd,
        final_fd: final_point.fd,
        final_modes_covered: final_point.report.modes_covered,
        final_hq_fraction: final_point.report.hq_fraction,
        curriculum,
        gradfield_mean_norms: gradfield_means,
        init_generator_sha256: init_sha,
    };
    let summary_path = dir.join("summary.json");
    let doc = serde_json::json!({
        "config": cfg.to_json(),
        "summary": summary,
    });
    fs::write(
        &summary_path,
        serde_json::to_string_pretty(&doc).expect("summary serializes") + "\n",
    )?;

    logs.flush()?;
    Ok(RunArtifacts {
        output_dir: dir.clone(),
        policy_log: dir.join("policy.csv"),
        metrics_log: dir.join("metrics.csv"),
        policy_avg_log: dir.join("policy_avg.csv"),
        sample_dumps,
        gradfield_dumps,
        checkpoints,
        final_checkpoint,
        summary_path,
        summary,
    })
}

/// Train from scratch per `cfg`.
pub fn run_training(cfg: &RunConfig) -> Result<RunArtifacts> {
    run_loop(Trainer::new(cfg.clone(), None)?, None)
}

/// Continue a checkpointed run to its configured iteration count. Logs cover
/// only the resumed segment; their rows are byte-identical to the same rows
/// of an uninterrupted run. Mode restrictions are not checkpointed, so
/// resuming applies to full-mixture training runs.
pub fn resume_training(ckpt_path: &Path, output_override: Option<&Path>) -> Result<RunArtifacts> {
    let ckpt = load_checkpoint(ckpt_path)?;
    let mut raw = ckpt.config.clone();
    if let Some(dir) = output_override {
        raw.output_dir = Some(dir.display().to_string());
    }
    let cfg = RunConfig::resolve(&raw)?;
    run_loop(Trainer::from_checkpoint(cfg, &ckpt)?, None)
}

fn phase_config(
    base_raw: &RawConfig,
    base: &RunConfig,
    variant: Variant,
    n: usize,
    iterations: u64,
    disc_hidden: Vec<usize>,
    subdir: &str,
) -> Result<RunConfig> {
    let mut raw = base_raw.clone();
    raw.variant = Some(variant.as_str().to_string());
    raw.n_discriminators = Some(n);
    raw.disc_hidden_layers = Some(disc_hidden);
    raw.iterations = Some(iterations);
    raw.output_dir = Some(base.output_dir.join(subdir).display().to_string());
    // The published recovery protocol runs 400-unit nets with a generator of
    // 3 dense layers (2 hidden); explicit overrides in the base config win.
    raw.hidden_width.get_or_insert(400);
    raw.gen_hidden_layers.get_or_insert(2);
    RunConfig::resolve(&raw)
}

/// The two-phase recovery protocol: pretrain a generator against a single
/// discriminator on a restricted mode subset, then train a vanilla GAN and an
/// ensemble run from identical copies of that generator on the full mixture.
/// All phases share the base seed, so both recovery branches consume the
/// same data/latent sequences.
///
/// Phase architectures follow the published protocol: the single
/// discriminator of the pretrain and vanilla phases has 3 dense layers, while
/// the ensemble phase uses a ladder of 1..=N dense layers — its weakest
/// member is a lone sigmoid layer. Hidden layers are 400 units wide unless
/// the config says otherwise.
pub fn run_mode_recovery(raw: &RawConfig) -> Result<RecoveryArtifacts> {
    let cfg = RunConfig::resolve(raw)?;
    if cfg.dataset != Dataset::Ring8 {
        return Err(Error::Config(format!(
            "mode recovery is defined on ring8, got {}",
            cfg.dataset.as_str()
        )));
    }
    if cfg.noise.is_some() {
        return Err(Error::Config(
            "input-noise schedules are not supported by the recovery protocol".into(),
        ));
    }
    fs::create_dir_all(&cfg.output_dir)?;

    let pre_cfg = phase_config(
        raw,
        &cfg,
        Variant::Vanilla,
        1,
        cfg.pretrain_iterations,
        vec![2],
        "pretrain",
    )?;
    let pretrain = run_loop(Trainer::new(pre_cfg, None)?, Some(&cfg.pretrain_modes))?;
    let pre_ckpt = load_checkpoint(&pretrain.final_checkpoint)?;
    let shared_sha = sha256_of_params(&pre_ckpt.gen_params);

    let van_cfg = phase_config(
        raw,
        &cfg,
        Variant::Vanilla,
        1,
        cfg.recovery_iterations,
        vec![2],
        "vanilla",
    )?;
    let vanilla = run_loop(
        Trainer::new(van_cfg, Some(pre_ckpt.gen_params.clone()))?,
        None,
    )?;

    let ac_cfg = phase_config(
        raw,
        &cfg,
        Variant::Acgan,
        cfg.n,
        cfg.recovery_iterations,
        (0..cfg.n).collect(),
        "acgan",
    )?;
    let acgan = run_loop(
        Trainer::new(ac_cfg, Some(pre_ckpt.gen_params.clone()))?,
        None,
    )?;

    let shared = vanilla.summary.init_generator_sha256 == shared_sha
        && acgan.summary.init_generator_sha256 == shared_sha;
    let summary_path = cfg.output_dir.join("recovery_summary.json");
    let doc = serde_json::json!({
        "pretrained_generator_sha256": shared_sha,
        "shared_pretrained_generator": shared,
        "pretrain": {
            "dir": pretrain.output_dir,
            "modes_covered": pretrain.summary.final_modes_covered,
            "hq_fraction": pretrain.summary.final_hq_fraction,
        },
        "vanilla": {
            "dir": vanilla.output_dir,
            "modes_covered": vanilla.summary.final_modes_covered,
            "hq_fraction": vanilla.summary.final_hq_fraction,
            "gradfield_mean_norms": vanilla.summary.gradfield_mean_norms,
        },
        "acgan": {
            "dir": acgan.output_dir,
            "modes_covered": acgan.summary.final_modes_covered,
            "hq_fraction": acgan.summary.final_hq_fraction,
            "gradfield_mean_norms": acgan.summary.gradfield_mean_norms,
        },
    });
    fs::write(
        &summary_path,
        serde_json::to_string_pretty(&doc).expect("recovery summary serializes") + "\n",
    )?;

    Ok(RecoveryArtifacts {
        pretrain,
        vanilla,
        acgan,
        summary_path,
    })
}
