//! Diagnostics and quality measures: repulsive-force magnitudes, marginal
//! statistics, expectation errors against reference samples, the Gaussian
//! closed-form repulsive force, the per-particle repulsion bound, PSNR and
//! SSIM.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::kernels::KernelFamily;
use crate::matrix::Matrix;

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    Inf,
}

fn row_norm(row: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::L2 => libm::sqrt(row.iter().map(|v| v * v).sum()),
        Norm::Inf => row.iter().fold(0.0, |m, v| f64::max(m, libm::fabs(*v))),
    }
}

/// Particle-averaged magnitude `(1/M) Σ_i ‖R[i]‖_r` of a per-particle force
/// matrix. Applied to the repulsive term this is PAMRF; applied to the
/// kernel-smoothed gradient it is PAKSG.
pub fn pamrf(force: &Matrix, norm: Norm) -> Result<f64> {
    if force.rows() == 0 || force.cols() == 0 {
        return Err(Error::Empty);
    }
    Ok(force.iter_rows().map(|r| row_norm(r, norm)).sum::<f64>() / force.rows() as f64)
}

/// Same reduction as [`pamrf`], named for the kernel-smoothed gradient.
pub fn paksg(smoothed_gradient: &Matrix, norm: Norm) -> Result<f64> {
    pamrf(smoothed_gradient, norm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalStats {
    pub means: Vec<f64>,
    /// Population (`1/M`) variances.
    pub variances: Vec<f64>,
    pub mean_avg: f64,
    pub var_avg: f64,
}

/// Per-dimension mean and population variance of the empirical measure.
pub fn marginal_stats(particles: &Matrix) -> Result<MarginalStats> {
    if particles.rows() < 2 {
        return Err(Error::TooFewParticles {
            required: 2,
            actual: particles.rows(),
        });
    }
    Ok(marginal_stats_unchecked(particles))
}

pub(crate) fn marginal_stats_unchecked(particles: &Matrix) -> MarginalStats {
    let m = particles.rows() as f64;
    let d = particles.cols();
    let mut means = vec![0.0; d];
    for row in particles.iter_rows() {
        for (acc, v) in means.iter_mut().zip(row) {
            *acc += v;
        }
    }
    means.iter_mut().for_each(|v| *v /= m);
    let mut variances = vec![0.0; d];
    for row in particles.iter_rows() {
        for ((acc, v), mu) in variances.iter_mut().zip(row).zip(&means) {
            *acc += (v - mu) * (v - mu);
        }
    }
    variances.iter_mut().for_each(|v| *v /= m);
    let mean_avg = means.iter().sum::<f64>() / d as f64;
    let var_avg = variances.iter().sum::<f64>() / d as f64;
    MarginalStats {
        means,
        variances,
        mean_avg,
        var_avg,
    }
}

/// One row of an engine trajectory.
///
/// `pamrf_*`/`paksg_*` describe the update computed at the start of the
/// iteration (so iteration 0 reflects the initial particles); the marginal
/// statistics describe the particles after the iteration's move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub iteration: usize,
    pub pamrf_inf: f64,
    pub pamrf_2: f64,
    pub paksg_inf: f64,
    pub paksg_2: f64,
    pub marginal_mean_avg: f64,
    pub marginal_var_avg: f64,
    pub max_abs_move: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str =
        "iteration,pamrf_inf,pamrf_2,paksg_inf,paksg_2,mean_avg,var_avg,max_abs_move";

    pub fn new(
        iteration: usize,
        smoothed_gradient: &Matrix,
        repulsive: &Matrix,
        particles_after: &Matrix,
        max_abs_move: f64,
    ) -> Self {
        let stats = marginal_stats_unchecked(particles_after);
        let mag = |m: &Matrix, n| pamrf(m, n).unwrap_or(0.0);
        Self {
            iteration,
            pamrf_inf: mag(repulsive, Norm::Inf),
            pamrf_2: mag(repulsive, Norm::L2),
            paksg_inf: mag(smoothed_gradient, Norm::Inf),
            paksg_2: mag(smoothed_gradient, Norm::L2),
            marginal_mean_avg: stats.mean_avg,
            marginal_var_avg: stats.var_avg,
            max_abs_move,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    Identity,
    Square,
    Sigmoid,
    Cosine,
}

impl TestFunction {
    pub const ALL: [TestFunction; 4] = [
        TestFunction::Identity,
        TestFunction::Square,
        TestFunction::Sigmoid,
        TestFunction::Cosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Identity => "x",
            TestFunction::Square => "x2",
            TestFunction::Sigmoid => "sigmoid",
            TestFunction::Cosine => "cos",
        }
    }
}

/// Elementwise test function `f(x)_d` with per-dimension `ω_d`, `b_d`
/// (used only by the sigmoid and cosine kinds).
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionSpec {
    pub kind: TestFunction,
    pub omega: Vec<f64>,
    pub bias: Vec<f64>,
}

impl TestFunctionSpec {
    pub fn new(kind: TestFunction, omega: Vec<f64>, bias: Vec<f64>) -> Self {
        Self { kind, omega, bias }
    }

    /// Draws `ω_d ~ N(0, 1)` and `b_d ~ U[0, 2π]`.
    pub fn random<R: Rng + ?Sized>(kind: TestFunction, dimension: usize, rng: &mut R) -> Self {
        let omega = (0..dimension).map(|_| StandardNormal.sample(rng)).collect();
        let unif = Uniform::new(0.0, 2.0 * core::f64::consts::PI);
        let bias = (0..dimension).map(|_| unif.sample(rng)).collect();
        Self { kind, omega, bias }
    }

    #[inline]
    pub fn apply(&self, d: usize, x: f64) -> f64 {
        match self.kind {
            TestFunction::Identity => x,
            TestFunction::Square => x * x,
            TestFunction::Sigmoid => 1.0 / (1.0 + libm::exp(self.omega[d] * x + self.bias[d])),
            TestFunction::Cosine => libm::cos(self.omega[d] * x + self.bias[d]),
        }
    }

    fn expectation(&self, samples: &Matrix) -> Vec<f64> {
        let n = samples.rows() as f64;
        let mut acc = vec![0.0; samples.cols()];
        for row in samples.iter_rows() {
            for (d, (a, &v)) in acc.iter_mut().zip(row).enumerate() {
                *a += self.apply(d, v);
            }
        }
        acc.iter_mut().for_each(|v| *v /= n);
        acc
    }
}

/// `(1/D) Σ_d (E_particles[f(x)]_d − E_truth[f(x)]_d)²`.
pub fn mse_expectation(particles: &Matrix, truth: &Matrix, f: &TestFunctionSpec) -> Result<f64> {
    if particles.cols() != truth.cols() {
        return Err(Error::DimensionMismatch {
            expected: truth.cols(),
            actual: particles.cols(),
        });
    }
    if particles.rows() == 0 || truth.rows() == 0 || particles.cols() == 0 {
        return Err(Error::Empty);
    }
    let needs_params = matches!(f.kind, TestFunction::Sigmoid | TestFunction::Cosine);
    if needs_params && (f.omega.len() != truth.cols() || f.bias.len() != truth.cols()) {
        return Err(Error::DimensionMismatch {
            expected: truth.cols(),
            actual: f.omega.len().min(f.bias.len()),
        });
    }
    let a = f.expectation(particles);
    let b = f.expectation(truth);
    Ok(a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / a.len() as f64)
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite);
                }
                l.set(i, i, libm::sqrt(s));
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l.get(i, k) * y[k]).sum();
        y[i] = (b[i] - s) / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l.get(k, i) * x[k]).sum();
        x[i] = (y[i] - s) / l.get(i, i);
    }
    x
}

/// Exact `E_{y ~ N(μ, Σ)}[∇_y k_RBF(x, y)]`:
/// `h^{D/2} exp(−δ/2) / √det(Σ + hI) · (Σ + hI)⁻¹ (x − μ)` with
/// `δ = (x − μ)ᵀ (Σ + hI)⁻¹ (x − μ)`.
pub fn gaussian_repulsive_closed_form(x: &[f64], mean: &[f64], cov: &Matrix, h: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if mean.len() != n || cov.rows() != n || cov.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: if mean.len() != n { mean.len() } else { cov.rows() },
        });
    }
    if h <= 0.0 {
        return Err(Error::InvalidBandwidth(h));
    }
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (cov.get(i, j), cov.get(j, i));
            if libm::fabs(a - b) > 1e-12 * (1.0 + libm::fabs(a)) {
                return Err(Error::NotPositiveDefinite);
            }
        }
    }
    // Σ must itself be SPD, not just Σ + hI.
    cholesky(cov)?;
    let shifted = Matrix::from_fn(n, n, |i, j| cov.get(i, j) + if i == j { h } else { 0.0 });
    let l = cholesky(&shifted)?;
    let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let v = cholesky_solve(&l, &diff);
    let quad: f64 = diff.iter().zip(&v).map(|(a, b)| a * b).sum();
    let half_log_det: f64 = (0..n).map(|i| libm::log(l.get(i, i))).sum();
    let log_scale = 0.5 * n as f64 * libm::log(h) - half_log_det - 0.5 * quad;
    let scale = libm::exp(log_scale);
    Ok(v.iter().map(|vi| scale * vi).collect())
}

/// Upper bound on `‖R(x; q̂_M)‖∞` that holds for every bandwidth:
/// `(1/M) Σ_j C · ‖x − x⁽ʲ⁾‖∞ / ‖x − x⁽ʲ⁾‖₂²` with `C` the family's
/// maximizing constant. Particles coinciding with `x` contribute 0.
pub fn repulsion_bound_rhs(x: &[f64], particles: &Matrix, family: KernelFamily) -> Result<f64> {
    if particles.cols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: particles.cols(),
        });
    }
    let c = family.repulsion_bound_constant();
    let mut total = 0.0;
    let mut contributing = 0usize;
    for row in particles.iter_rows() {
        let mut sq = 0.0;
        let mut inf = 0.0f64;
        for (a, b) in x.iter().zip(row) {
            let d = a - b;
            sq += d * d;
            inf = inf.max(libm::fabs(d));
        }
        if sq > 0.0 {
            total += c * inf / sq;
            contributing += 1;
        }
    }
    if contributing == 0 {
        return Err(Error::AllParticlesCoincide);
    }
    Ok(total / particles.rows() as f64)
}

/// `10·log10(max² / MSE)`, capped at [`PSNR_CAP_DB`] when the images match.
pub fn psnr(a: &GrayImage, b: &GrayImage, max_val: f64) -> Result<f64> {
    a.same_dims(b)?;
    let n = a.pixels().len();
    if n == 0 {
        return Err(Error::Empty);
    }
    let mse = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok(10.0 * libm::log10(max_val * max_val / mse))
}

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_L: f64 = 255.0;

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut total = 0.0;
    for r in 0..SSIM_WINDOW {
        for col in 0..SSIM_WINDOW {
            let dr = r as f64 - c;
            let dc = col as f64 - c;
            let v = libm::exp(-(dr * dr + dc * dc) / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
            w[r * SSIM_WINDOW + col] = v;
            total += v;
        }
    }
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Mean SSIM over every fully contained 11×11 Gaussian window (σ = 1.5,
/// K₁ = 0.01, K₂ = 0.03, L = 255).
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    a.same_dims(b)?;
    if a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: a.width(),
            height: a.height(),
            window: SSIM_WINDOW,
        });
    }
    let w = gaussian_window();
    let c1 = (SSIM_K1 * SSIM_L) * (SSIM_K1 * SSIM_L);
    let c2 = (SSIM_K2 * SSIM_L) * (SSIM_K2 * SSIM_L);
    let rows = a.height() - SSIM_WINDOW + 1;
    let cols = a.width() - SSIM_WINDOW + 1;
    let mut total = 0.0;
    for r0 in 0..rows {
        for c0 in 0..cols {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in 0..SSIM_WINDOW {
                for c in 0..SSIM_WINDOW {
                    let wt = w[r * SSIM_WINDOW + c];
                    let va = a.get(r0 + r, c0 + c);
                    let vb = b.get(r0 + r, c0 + c);
                    ma += wt * va;
                    mb += wt * vb;
                    saa += wt * va * va;
                    sbb += wt * vb * vb;
                    sab += wt * va * vb;
                }
            }
            let var_a = saa - ma * ma;
            let var_b = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        }
    }
    Ok(total / (rows * cols) as f64)
}
