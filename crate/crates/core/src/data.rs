//! Ground-truth 2D Gaussian mixtures and the latent prior.
//!
//! Two fixed geometries: 8 modes on a ring (radius 1.5) and a 5×5 grid
//! (spacing 2), both with isotropic per-mode std 0.05. Mode-restricted
//! sampling supports the pretraining phase of the recovery experiment.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

pub const RING_RADIUS: f64 = 1.5;
pub const RING_STD: f64 = 0.05;
pub const GRID_SPACING: f64 = 2.0;
pub const GRID_STD: f64 = 0.25;
/// Adjacent ring modes at 90° and 135°, used to pretrain the generator.
pub const PRETRAIN_MODES: [usize; 2] = [2, 3];

/// Isotropic Gaussian mixture over 2D centers with one shared std.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpec {
    pub centers: Vec<[f64; 2]>,
    pub std: f64,
    pub name: String,
}

impl ModeSpec {
    pub fn new(centers: Vec<[f64; 2]>, std: f64, name: impl Into<String>) -> Result<Self> {
        if std <= 0.0 {
            return Err(Error::Config(format!("mode std must be positive, got {std}")));
        }
        for (i, a) in centers.iter().enumerate() {
            for b in &centers[i + 1..] {
                if a == b {
                    return Err(Error::Config(format!(
                        "mode centers must be pairwise distinct, found duplicate {a:?}"
                    )));
                }
            }
        }
        Ok(Self {
            centers,
            std,
            name: name.into(),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.centers.len()
    }
}

/// Latent prior: i.i.d. standard normal per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriorSpec {
    pub dim: usize,
}

impl PriorSpec {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("prior dimension must be at least 1".into()));
        }
        Ok(Self { dim })
    }
}

/// 8 modes at 45° steps on a circle.
pub fn ring_spec(radius: f64, std: f64) -> Result<ModeSpec> {
    if radius <= 0.0 {
        return Err(Error::Config(format!("ring radius must be positive, got {radius}")));
    }
    let centers = (0..8)
        .map(|k| {
            let theta = k as f64 * std::f64::consts::FRAC_PI_4;
            [radius * theta.cos(), radius * theta.sin()]
        })
        .collect();
    ModeSpec::new(centers, std, "ring8")
}

/// 5×5 grid of modes at {−2s, −s, 0, s, 2s}².
pub fn grid_spec(spacing: f64, std: f64) -> Result<ModeSpec> {
    if spacing <= 0.0 {
        return Err(Error::Config(format!(
            "grid spacing must be positive, got {spacing}"
        )));
    }
    let mut centers = Vec::with_capacity(25);
    for iy in -2i64..=2 {
        for ix in -2i64..=2 {
            centers.push([ix as f64 * spacing, iy as f64 * spacing]);
        }
    }
    ModeSpec::new(centers, std, "grid25")
}

/// Draw `n` points: mode index uniform over `allowed_modes` (or all modes),
/// point = center + std · standard-normal pair.
pub fn sample_mixture(
    spec: &ModeSpec,
    n: usize,
    rng: &mut ChaCha8Rng,
    allowed_modes: Option<&[usize]>,
) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::Input("sample count must be at least 1".into()));
    }
    let allowed: Vec<usize> = match allowed_modes {
        Some(list) => {
            if list.is_empty() {
                return Err(Error::Config("allowed mode set must be non-empty".into()));
            }
            for &m in list {
                if m >= spec.n_modes() {
                    return Err(Error::Config(format!(
                        "allowed mode {m} out of range for {} modes",
                        spec.n_modes()
                    )));
                }
            }
            list.to_vec()
        }
        None => (0..spec.n_modes()).collect(),
    };
    let mut out = Array2::zeros((n, 2));
    for r in 0..n {
        let mode = allowed[rng.gen_range(0..allowed.len())];
        let center = spec.centers[mode];
        let dx: f64 = StandardNormal.sample(rng);
        let dy: f64 = StandardNormal.sample(rng);
        out[(r, 0)] = center[0] + spec.std * dx;
        out[(r, 1)] = center[1] + spec.std * dy;
    }
    Ok(out)
}

/// Draw `n` latent vectors with i.i.d. standard-normal entries.
pub fn sample_prior(spec: &PriorSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::Input("sample count must be at least 1".into()));
    }
    let mut out = Array2::zeros((n, spec.dim));
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    Ok(out)
}
