//! Evaluation metrics: 2D Fréchet Distance on raw coordinates, mode
//! coverage / high-quality fraction, discriminator gradient-norm fields, and
//! density histograms.

use ndarray::Array2;

use crate::data::ModeSpec;
use crate::nn::MlpNetwork;
use crate::{Error, Result};

/// Mean and 2×2 covariance. Construction validates symmetry and positive
/// semidefiniteness, so downstream consumers can assume both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPair {
    mean: [f64; 2],
    cov: [[f64; 2]; 2],
}

impl MomentPair {
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        if (cov[0][1] - cov[1][0]).abs() > 1e-12 {
            return Err(Error::Input(format!(
                "covariance must be symmetric, got off-diagonals {} and {}",
                cov[0][1], cov[1][0]
            )));
        }
        let trace = cov[0][0] + cov[1][1];
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        // Round-off tolerance scaled to the matrix magnitude.
        let tol = 1e-9 * (1.0 + trace.abs() + det.abs());
        if trace < -tol || det < -tol || cov[0][0] < -tol || cov[1][1] < -tol {
            return Err(Error::Input(format!(
                "covariance must be positive semidefinite (trace {trace}, det {det})"
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn cov(&self) -> [[f64; 2]; 2] {
        self.cov
    }
}

/// Sample mean and unbiased sample covariance of an (n, 2) point set.
pub fn moments(samples: &Array2<f64>) -> Result<MomentPair> {
    let n = samples.nrows();
    if n < 2 {
        return Err(Error::Input(format!(
            "moment estimation needs at least 2 samples, got {n}"
        )));
    }
    if samples.ncols() != 2 {
        return Err(Error::Input(format!(
            "expected 2D samples, got {} columns",
            samples.ncols()
        )));
    }
    let nf = n as f64;
    let mean = [samples.column(0).sum() / nf, samples.column(1).sum() / nf];
    let mut cov = [[0.0; 2]; 2];
    for row in samples.rows() {
        let dx = row[0] - mean[0];
        let dy = row[1] - mean[1];
        cov[0][0] += dx * dx;
        cov[0][1] += dx * dy;
        cov[1][1] += dy * dy;
    }
    let denom = nf - 1.0;
    cov[0][0] /= denom;
    cov[0][1] /= denom;
    cov[1][1] /= denom;
    cov[1][0] = cov[0][1];
    MomentPair::new(mean, cov)
}

/// Population moments of a uniform mixture over (a subset of) the modes:
/// mean is the centroid of the used centers and covariance is
/// `std²·I + avg (c − m)(c − m)ᵀ`.
pub fn mixture_moments(spec: &ModeSpec, allowed: Option<&[usize]>) -> Result<MomentPair> {
    let indices: Vec<usize> = match allowed {
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
    let k = indices.len() as f64;
    let mut mean = [0.0; 2];
    for &i in &indices {
        mean[0] += spec.centers[i][0] / k;
        mean[1] += spec.centers[i][1] / k;
    }
    let s2 = spec.std * spec.std;
    let mut cov = [[s2, 0.0], [0.0, s2]];
    for &i in &indices {
        let dx = spec.centers[i][0] - mean[0];
        let dy = spec.centers[i][1] - mean[1];
        cov[0][0] += dx * dx / k;
        cov[0][1] += dx * dy / k;
        cov[1][1] += dy * dy / k;
    }
    cov[1][0] = cov[0][1];
    MomentPair::new(mean, cov)
}

/// Fréchet Distance between two 2D Gaussians summarized by their moments:
/// `‖m_a − m_b‖² + Tr(C_a + C_b − 2(C_a·C_b)^{1/2})`.
///
/// For 2×2 matrices the trace of the root uses the closed form
/// `Tr(√M) = √(tr M + 2√det M)`; the result is clamped at 0 against
/// negative round-off.
pub fn frechet_distance(a: &MomentPair, b: &MomentPair) -> f64 {
    let dm = [a.mean[0] - b.mean[0], a.mean[1] - b.mean[1]];
    let mean_term = dm[0] * dm[0] + dm[1] * dm[1];

    let (ca, cb) = (a.cov, b.cov);
    // M = C_a · C_b; only trace and determinant are needed.
    let tr_m = ca[0][0] * cb[0][0]
        + ca[0][1] * cb[1][0]
        + ca[1][0] * cb[0][1]
        + ca[1][1] * cb[1][1];
    let det_a = ca[0][0] * ca[1][1] - ca[0][1] * ca[1][0];
    let det_b = cb[0][0] * cb[1][1] - cb[0][1] * cb[1][0];
    let det_m = (det_a * det_b).max(0.0);
    let tr_sqrt = (tr_m + 2.0 * det_m.sqrt()).max(0.0).sqrt();

    let cov_term = ca[0][0] + ca[1][1] + cb[0][0] + cb[1][1] - 2.0 * tr_sqrt;
    (mean_term + cov_term).max(0.0)
}

/// Coverage summary over one evaluation sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub modes_covered: usize,
    pub hq_fraction: f64,
    pub per_mode_counts: Vec<usize>,
}

/// A sample is high-quality iff its nearest center is within
/// `hq_multiplier · std`; a mode is covered iff at least `min_count` HQ
/// samples have it as their nearest center.
pub fn coverage(
    samples: &Array2<f64>,
    spec: &ModeSpec,
    hq_multiplier: f64,
    min_count: usize,
) -> Result<CoverageReport> {
    let n = samples.nrows();
    if n == 0 {
        return Err(Error::Input("coverage needs at least one sample".into()));
    }
    if samples.ncols() != 2 {
        return Err(Error::Input(format!(
            "expected 2D samples, got {} columns",
            samples.ncols()
        )));
    }
    let threshold = hq_multiplier * spec.std;
    let mut per_mode_counts = vec![0usize; spec.n_modes()];
    let mut hq = 0usize;
    for row in samples.rows() {
        let (mut best, mut best_d2) = (0usize, f64::INFINITY);
        for (i, c) in spec.centers.iter().enumerate() {
            let d2 = (row[0] - c[0]).powi(2) + (row[1] - c[1]).powi(2);
            if d2 < best_d2 {
                best_d2 = d2;
                best = i;
            }
        }
        if best_d2.sqrt() <= threshold {
            hq += 1;
            per_mode_counts[best] += 1;
        }
    }
    let modes_covered = per_mode_counts.iter().filter(|&&c| c >= min_count).count();
    Ok(CoverageReport {
        modes_covered,
        hq_fraction: hq as f64 / n as f64,
        per_mode_counts,
    })
}

/// Evaluation lattice: closed ranges per axis, `resolution` points each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(x_range: [f64; 2], y_range: [f64; 2], resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::Config(format!(
                "grid resolution must be at least 2, got {resolution}"
            )));
        }
        if x_range[0] >= x_range[1] || y_range[0] >= y_range[1] {
            return Err(Error::Config(format!(
                "grid ranges must be non-degenerate, got x={x_range:?} y={y_range:?}"
            )));
        }
        Ok(Self {
            x_range,
            y_range,
            resolution,
        })
    }

    /// The [−2, 2]² window at 200×200 used for gradient maps.
    pub fn gradient_window() -> Self {
        Self {
            x_range: [-2.0, 2.0],
            y_range: [-2.0, 2.0],
            resolution: 200,
        }
    }

    pub fn x_coord(&self, j: usize) -> f64 {
        let [lo, hi] = self.x_range;
        lo + (hi - lo) * j as f64 / (self.resolution - 1) as f64
    }

    pub fn y_coord(&self, i: usize) -> f64 {
        let [lo, hi] = self.y_range;
        lo + (hi - lo) * i as f64 / (self.resolution - 1) as f64
    }
}

/// Input-gradient norms of a scalar-head discriminator over the lattice.
/// Row `i` holds y = y_coord(i) (ascending), column `j` holds x = x_coord(j).
pub fn gradient_norm_field(d: &MlpNetwork, grid: &GridSpec) -> Result<Array2<f64>> {
    let res = grid.resolution;
    let mut field = Array2::zeros((res, res));
    // One forward/backward per row keeps peak memory small and the
    // assembly order fixed.
    for i in 0..res {
        let y = grid.y_coord(i);
        let mut points = Array2::zeros((res, 2));
        for j in 0..res {
            points[(j, 0)] = grid.x_coord(j);
            points[(j, 1)] = y;
        }
        let norms = d.input_gradient_norms(&points)?;
        for (j, v) in norms.into_iter().enumerate() {
            field[(i, j)] = v;
        }
    }
    Ok(field)
}

/// 2D bin counts plus a tally of samples falling outside the grid window.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub counts: Array2<u64>,
    pub overflow: u64,
}

/// Bin samples over the grid window: `resolution` equal-width bins per axis;
/// points on the top edge land in the last bin.
pub fn density_histogram(samples: &Array2<f64>, grid: &GridSpec) -> Result<Histogram> {
    if samples.ncols() != 2 && samples.nrows() > 0 {
        return Err(Error::Input(format!(
            "expected 2D samples, got {} columns",
            samples.ncols()
        )));
    }
    let res = grid.resolution;
    let mut counts = Array2::zeros((res, res));
    let mut overflow = 0u64;
    let bin = |v: f64, range: [f64; 2]| -> Option<usize> {
        let [lo, hi] = range;
        if v < lo || v > hi {
            return None;
        }
        let idx = ((v - lo) / (hi - lo) * res as f64) as usize;
        Some(idx.min(res - 1))
    };
    for row in samples.rows() {
        match (bin(row[1], grid.y_range), bin(row[0], grid.x_range)) {
            (Some(i), Some(j)) => counts[(i, j)] += 1,
            _ => overflow += 1,
        }
    }
    Ok(Histogram { counts, overflow })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{grid_spec, ring_spec};
    use crate::nn::{Activation, LayerSpec, Role};
    use ndarray::array;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn moments_hand_computed_case() {
        let m = moments(&array![[0.0, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(m.mean(), [1.0, 0.0]);
        assert_eq!(m.cov(), [[2.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn moments_of_duplicated_dataset() {
        // The mean is exactly invariant; the unbiased covariance picks up the
        // factor 2(n−1)/(2n−1), which tends to 1.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let base = Array2::from_shape_fn((n, 2), |_| rng.gen_range(-1.0..1.0));
        let mut doubled = Array2::zeros((2 * n, 2));
        doubled.slice_mut(ndarray::s![..n, ..]).assign(&base);
        doubled.slice_mut(ndarray::s![n.., ..]).assign(&base);
        let a = moments(&base).unwrap();
        let b = moments(&doubled).unwrap();
        for c in 0..2 {
            assert!((a.mean()[c] - b.mean()[c]).abs() < 1e-12);
        }
        let factor = 2.0 * (n as f64 - 1.0) / (2.0 * n as f64 - 1.0);
        for r in 0..2 {
            for c in 0..2 {
                let expect = a.cov()[r][c] * factor;
                assert!((b.cov()[r][c] - expect).abs() < 1e-12);
                assert!((b.cov()[r][c] - a.cov()[r][c]).abs() < 1e-3 * a.cov()[r][c].abs().max(1e-3));
            }
        }
    }

    #[test]
    fn moments_recover_gaussian_parameters() {
        // x = μ + L·ξ with Σ = L·Lᵀ.
        let mu = [0.7f64, -0.3];
        let sigma = [[0.8f64, 0.3], [0.3, 0.5]];
        let l11 = sigma[0][0].sqrt();
        let l21 = sigma[1][0] / l11;
        let l22 = (sigma[1][1] - l21 * l21).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let mut pts = Array2::zeros((n, 2));
        for r in 0..n {
            let u: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            let v: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            pts[(r, 0)] = mu[0] + l11 * u;
            pts[(r, 1)] = mu[1] + l21 * u + l22 * v;
        }
        let m = moments(&pts).unwrap();
        for c in 0..2 {
            assert!((m.mean()[c] - mu[c]).abs() < 0.02 * (1.0 + mu[c].abs()));
        }
        for r in 0..2 {
            for c in 0..2 {
                assert!(
                    (m.cov()[r][c] - sigma[r][c]).abs() < 0.02 * sigma[r][c].abs().max(0.5),
                    "cov[{r}][{c}] = {} vs {}",
                    m.cov()[r][c],
                    sigma[r][c]
                );
            }
        }
    }

    #[test]
    fn moments_reject_degenerate_input() {
        assert!(moments(&array![[1.0, 2.0]]).is_err());
    }

    #[test]
    fn mixture_moments_closed_forms() {
        // Ring: mean 0, cov (σ² + r²/2)·I. Grid: mean 0, cov (σ² + 2s²)·I.
        let ring = ring_spec(1.5, 0.05).unwrap();
        let m = mixture_moments(&ring, None).unwrap();
        assert!(m.mean()[0].abs() < 1e-12 && m.mean()[1].abs() < 1e-12);
        let want = 0.05f64.powi(2) + 1.5f64.powi(2) / 2.0;
        assert!((m.cov()[0][0] - want).abs() < 1e-12);
        assert!((m.cov()[1][1] - want).abs() < 1e-12);
        assert!(m.cov()[0][1].abs() < 1e-12);

        let grid = grid_spec(2.0, 0.05).unwrap();
        let g = mixture_moments(&grid, None).unwrap();
        let want = 0.05f64.powi(2) + 2.0 * 4.0;
        assert!((g.cov()[0][0] - want).abs() < 1e-12);
        assert!((g.cov()[1][1] - want).abs() < 1e-12);
    }

    #[test]
    fn mixture_moments_match_monte_carlo() {
        let spec = grid_spec(2.0, 0.05).unwrap();
        let analytic = mixture_moments(&spec, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let samples = crate::data::sample_mixture(&spec, 1_000_000, &mut rng, None).unwrap();
        let empirical = moments(&samples).unwrap();
        for c in 0..2 {
            assert!((analytic.mean()[c] - empirical.mean()[c]).abs() < 0.01);
        }
        for r in 0..2 {
            for c in 0..2 {
                assert!(
                    (analytic.cov()[r][c] - empirical.cov()[r][c]).abs() < 0.05,
                    "cov[{r}][{c}]"
                );
            }
        }
    }

    #[test]
    fn mixture_moments_respect_mode_restriction() {
        let ring = ring_spec(1.5, 0.05).unwrap();
        let m = mixture_moments(&ring, Some(&[0])).unwrap();
        assert_eq!(m.mean(), [1.5, 0.0]);
        let s2 = 0.05f64.powi(2);
        assert_eq!(m.cov(), [[s2, 0.0], [0.0, s2]]);
    }

    #[test]
    fn frechet_identity_is_zero() {
        let a = MomentPair::new([0.3, -0.7], [[1.2, 0.4], [0.4, 0.9]]).unwrap();
        assert_eq!(frechet_distance(&a, &a), 0.0);
    }

    #[test]
    fn frechet_mean_shift_case() {
        let a = MomentPair::new([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let b = MomentPair::new([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((frechet_distance(&a, &b) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn frechet_covariance_scale_case() {
        // Equal means, C_a = 4I, C_b = I: Tr(4I + I − 2·2I) = 2.
        let a = MomentPair::new([0.0, 0.0], [[4.0, 0.0], [0.0, 4.0]]).unwrap();
        let b = MomentPair::new([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((frechet_distance(&a, &b) - 2.0).abs() < 1e-10);
    }

    fn random_psd(rng: &mut ChaCha8Rng) -> [[f64; 2]; 2] {
        // AᵀA is PSD. Near-singular products are rejected: tr√(C_a·C_b) has
        // unbounded derivative at det = 0, so no evaluation method holds
        // 1e-8 there; exactly singular inputs get their own test below.
        loop {
            let a: [[f64; 2]; 2] = [
                [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
            ];
            if (a[0][0] * a[1][1] - a[0][1] * a[1][0]).abs() < 0.1 {
                continue;
            }
            let mut m = [[0.0; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    m[r][c] = a[0][r] * a[0][c] + a[1][r] * a[1][c];
                }
            }
            return m;
        }
    }

    /// Tr((C_a·C_b)^{1/2}) via two symmetric eigendecompositions:
    /// C_a·C_b is similar to S = √C_a · C_b · √C_a, which is symmetric PSD.
    fn trace_sqrt_eigen(ca: [[f64; 2]; 2], cb: [[f64; 2]; 2]) -> f64 {
        use nalgebra::Matrix2;
        let ma = Matrix2::new(ca[0][0], ca[0][1], ca[1][0], ca[1][1]);
        let mb = Matrix2::new(cb[0][0], cb[0][1], cb[1][0], cb[1][1]);
        let ea = nalgebra::SymmetricEigen::new(ma);
        let sqrt_vals = ea.eigenvalues.map(|v| v.max(0.0).sqrt());
        let sqrt_a = ea.eigenvectors * Matrix2::from_diagonal(&sqrt_vals) * ea.eigenvectors.transpose();
        let s = sqrt_a * mb * sqrt_a;
        // Symmetrize against round-off before the second decomposition.
        let s = (s + s.transpose()) * 0.5;
        let es = nalgebra::SymmetricEigen::new(s);
        // Eigenvalues below machine-precision scale are numerical zeros;
        // without the cutoff √(1e-15·‖S‖) would pollute the oracle.
        let lmax = es.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        es.eigenvalues
            .iter()
            .map(|v| {
                if *v < 1e-12 * lmax {
                    0.0
                } else {
                    v.max(0.0).sqrt()
                }
            })
            .sum()
    }

    #[test]
    fn frechet_trace_term_matches_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for trial in 0..50 {
            let ca = random_psd(&mut rng);
            let cb = random_psd(&mut rng);
            let a = MomentPair::new([0.0, 0.0], ca).unwrap();
            let b = MomentPair::new([0.0, 0.0], cb).unwrap();
            let closed = frechet_distance(&a, &b);
            let via_eigen = (ca[0][0] + ca[1][1] + cb[0][0] + cb[1][1]
                - 2.0 * trace_sqrt_eigen(ca, cb))
            .max(0.0);
            assert!(
                (closed - via_eigen).abs() < 1e-8,
                "trial {trial}: {closed} vs {via_eigen}"
            );
        }
    }

    #[test]
    fn frechet_exactly_singular_covariance() {
        // [[a², ab], [ab, b²]] with a, b exact in binary has det exactly 0,
        // so Tr√(C_a·C_b) = √tr(C_a·C_b) in exact arithmetic.
        let ca = [[2.25, 0.75], [0.75, 0.25]]; // a = 1.5, b = 0.5
        let cb = [[1.0, 0.0], [0.0, 4.0]];
        let a = MomentPair::new([0.0, 0.0], ca).unwrap();
        let b = MomentPair::new([0.0, 0.0], cb).unwrap();
        let tr_m = ca[0][0] * cb[0][0] + ca[0][1] * cb[1][0] + ca[1][0] * cb[0][1] + ca[1][1] * cb[1][1];
        let want = (ca[0][0] + ca[1][1] + cb[0][0] + cb[1][1] - 2.0 * tr_m.sqrt()).max(0.0);
        assert!((frechet_distance(&a, &b) - want).abs() < 1e-12);
        let via_eigen =
            (ca[0][0] + ca[1][1] + cb[0][0] + cb[1][1] - 2.0 * trace_sqrt_eigen(ca, cb)).max(0.0);
        assert!((frechet_distance(&a, &b) - via_eigen).abs() < 1e-8);
    }

    #[test]
    fn frechet_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..50 {
            let a = MomentPair::new(
                [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                random_psd(&mut rng),
            )
            .unwrap();
            let b = MomentPair::new(
                [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                random_psd(&mut rng),
            )
            .unwrap();
            assert!((frechet_distance(&a, &b) - frechet_distance(&b, &a)).abs() < 1e-10);
        }
    }

    #[test]
    fn moment_pair_rejects_invalid_covariance() {
        assert!(MomentPair::new([0.0, 0.0], [[1.0, 0.5], [0.4, 1.0]]).is_err());
        assert!(MomentPair::new([0.0, 0.0], [[-1.0, 0.0], [0.0, 1.0]]).is_err());
        // Indefinite: eigenvalues ±1.
        assert!(MomentPair::new([0.0, 0.0], [[0.0, 1.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn coverage_all_centers_hit() {
        let spec = grid_spec(2.0, 0.05).unwrap();
        let mut pts = Array2::zeros((25, 2));
        for (i, c) in spec.centers.iter().enumerate() {
            pts[(i, 0)] = c[0];
            pts[(i, 1)] = c[1];
        }
        let report = coverage(&pts, &spec, 3.0, 1).unwrap();
        assert_eq!(report.modes_covered, 25);
        assert_eq!(report.hq_fraction, 1.0);
    }

    #[test]
    fn coverage_far_sample_counts_nothing() {
        let spec = ring_spec(1.5, 0.05).unwrap();
        // The origin is 30σ from every ring center.
        let report = coverage(&array![[0.0, 0.0]], &spec, 3.0, 1).unwrap();
        assert_eq!(report.modes_covered, 0);
        assert_eq!(report.hq_fraction, 0.0);
    }

    #[test]
    fn coverage_boundary_is_inclusive() {
        let spec = ring_spec(1.5, 0.05).unwrap();
        let r = 3.0 * spec.std;
        let pts = array![[1.5 + r, 0.0], [1.5 + r + 1e-9, 0.0]];
        let report = coverage(&pts, &spec, 3.0, 1).unwrap();
        assert_eq!(report.per_mode_counts[0], 1);
        assert!((report.hq_fraction - 0.5).abs() < 1e-12);
    }

    #[test]
    fn coverage_is_monotone_under_added_hq_samples() {
        let spec = ring_spec(1.5, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let base = crate::data::sample_mixture(&spec, 200, &mut rng, Some(&[0, 1, 2])).unwrap();
        let before = coverage(&base, &spec, 3.0, 1).unwrap();
        let mut extended = Array2::zeros((201, 2));
        extended.slice_mut(ndarray::s![..200, ..]).assign(&base);
        extended[(200, 0)] = spec.centers[5][0];
        extended[(200, 1)] = spec.centers[5][1];
        let after = coverage(&extended, &spec, 3.0, 1).unwrap();
        assert!(after.modes_covered >= before.modes_covered);
        let hq_before: usize = before.per_mode_counts.iter().sum();
        let hq_after: usize = after.per_mode_counts.iter().sum();
        assert!(hq_after >= hq_before);
    }

    #[test]
    fn gradient_field_zero_weights() {
        let layers = vec![
            LayerSpec::new(2, 4, Activation::Relu).unwrap(),
            LayerSpec::new(4, 1, Activation::Sigmoid).unwrap(),
        ];
        let d = MlpNetwork::init(layers, Role::Discriminator, 1)
            .unwrap()
            .with_params(vec![0.0; 17])
            .unwrap();
        let grid = GridSpec::new([-2.0, 2.0], [-2.0, 2.0], 10).unwrap();
        let field = gradient_norm_field(&d, &grid).unwrap();
        assert!(field.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_field_linear_discriminator_closed_form() {
        // D(x) = σ(w·x), w = (1, 0): at the origin the norm is 0.25·‖w‖.
        let layers = vec![LayerSpec::new(2, 1, Activation::Sigmoid).unwrap()];
        let d = MlpNetwork::init(layers, Role::Discriminator, 1)
            .unwrap()
            .with_params(vec![1.0, 0.0, 0.0])
            .unwrap();
        let grid = GridSpec::new([-2.0, 2.0], [-2.0, 2.0], 5).unwrap();
        let field = gradient_norm_field(&d, &grid).unwrap();
        // Row 2 / col 2 is (0, 0) on the 5-point lattice over [−2, 2].
        assert!((field[(2, 2)] - 0.25).abs() < 1e-12);
        // Constant along y (w has no y component).
        for i in 0..5 {
            assert!((field[(i, 2)] - field[(0, 2)]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_field_matches_pointwise_calls() {
        let layers = vec![
            LayerSpec::new(2, 6, Activation::Tanh).unwrap(),
            LayerSpec::new(6, 1, Activation::Sigmoid).unwrap(),
        ];
        let d = MlpNetwork::init(layers, Role::Discriminator, 17).unwrap();
        let grid = GridSpec::new([-2.0, 2.0], [-2.0, 2.0], 20).unwrap();
        let field = gradient_norm_field(&d, &grid).unwrap();
        for i in (0..20).step_by(3) {
            for j in (0..20).step_by(3) {
                let pt = array![[grid.x_coord(j), grid.y_coord(i)]];
                let norm = d.input_gradient_norms(&pt).unwrap()[0];
                assert_eq!(field[(i, j)], norm, "lattice ({i},{j})");
            }
        }
    }

    #[test]
    fn histogram_single_sample() {
        let grid = GridSpec::new([0.0, 4.0], [0.0, 4.0], 4).unwrap();
        let h = density_histogram(&array![[0.5, 2.5]], &grid).unwrap();
        assert_eq!(h.overflow, 0);
        assert_eq!(h.counts[(2, 0)], 1);
        assert_eq!(h.counts.sum(), 1);
    }

    #[test]
    fn histogram_conserves_count() {
        let grid = GridSpec::new([-2.0, 2.0], [-2.0, 2.0], 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let pts = Array2::from_shape_fn((1000, 2), |_| rng.gen_range(-3.0..3.0));
        let h = density_histogram(&pts, &grid).unwrap();
        assert_eq!(h.counts.sum() + h.overflow, 1000);
        assert!(h.overflow > 0);
    }

    #[test]
    fn histogram_uniform_fill_is_balanced() {
        let grid = GridSpec::new([0.0, 1.0], [0.0, 1.0], 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let n = 160_000;
        let pts = Array2::from_shape_fn((n, 2), |_| rng.gen_range(0.0..1.0));
        let h = density_histogram(&pts, &grid).unwrap();
        let bins = 16.0;
        let p = 1.0 / bins;
        let expect = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in h.counts.iter() {
            assert!(
                (*c as f64 - expect).abs() < 5.0 * sigma,
                "bin count {c} vs {expect}"
            );
        }
    }
}
