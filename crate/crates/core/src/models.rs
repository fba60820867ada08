//! Target distributions: the isotropic Gaussian toy, the synthetic grid MRF
//! with Gaussian/Gumbel mixture unaries and Laplace edges, and the
//! Fields-of-Experts denoising posterior with Gaussian-scale-mixture experts.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::factor_graph::{Factor, FactorGraph, Potential};
use crate::image::GrayImage;
use crate::matrix::Matrix;
use crate::potentials::{GaussianUnary, LaplaceDifference};

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + libm::log(terms.iter().map(|t| libm::exp(t - max)).sum::<f64>())
}

/// Normalized Gaussian log-density and its derivative in `x`.
pub fn gaussian_log_density(x: f64, mean: f64, variance: f64) -> (f64, f64) {
    let z = x - mean;
    (
        -0.5 * z * z / variance - 0.5 * libm::log(2.0 * PI * variance),
        -z / variance,
    )
}

/// Normalized Gumbel log-density `−u − e^{−u} − ln β`, `u = (x − μ)/β`, and
/// its derivative in `x`.
pub fn gumbel_log_density(x: f64, loc: f64, scale: f64) -> (f64, f64) {
    let u = (x - loc) / scale;
    let e = libm::exp(-u);
    (-u - e - libm::log(scale), (e - 1.0) / scale)
}

// ---------------------------------------------------------------------------
// Gaussian toy

/// `p = N(0, I_D)`, particles initialized from `N(0, 25 I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianToySpec {
    pub dimension: usize,
    pub init_std: f64,
}

impl GaussianToySpec {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            init_std: 5.0,
        }
    }

    pub fn build(&self) -> Result<FactorGraph> {
        build_gaussian_toy(self.dimension)
    }

    pub fn sample_init<R: Rng + ?Sized>(&self, particles: usize, rng: &mut R) -> Matrix {
        sample_isotropic(particles, self.dimension, 0.0, self.init_std, rng)
    }
}

/// `D` independent unary factors `−x_d²/2`.
pub fn build_gaussian_toy(dimension: usize) -> Result<FactorGraph> {
    if dimension < 1 {
        return Err(Error::InvalidParameter("dimension must be at least 1"));
    }
    let factors = (0..dimension)
        .map(|d| Factor::new([d], GaussianUnary::standard()))
        .collect();
    FactorGraph::new(dimension, factors)
}

/// `rows × cols` draws from `N(mean, std²)`.
pub fn sample_isotropic<R: Rng + ?Sized>(rows: usize, cols: usize, mean: f64, std: f64, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        mean + std * z
    })
}

// ---------------------------------------------------------------------------
// Grid MRF

/// Pairwise grid MRF with mixture unaries and Laplace edges.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMrfSpec {
    pub rows: usize,
    pub cols: usize,
    /// Gaussian component weight `α₁`.
    pub alpha1: f64,
    /// Gumbel component weight `α₂`.
    pub alpha2: f64,
    pub gaussian_mean: f64,
    pub gaussian_var: f64,
    pub gumbel_loc: f64,
    pub gumbel_scale: f64,
    pub laplace_scale: f64,
    /// Row-major `rows × cols` observations.
    pub observations: Matrix,
}

impl GridMrfSpec {
    pub fn new(rows: usize, cols: usize, observations: Matrix) -> Self {
        Self {
            rows,
            cols,
            alpha1: 0.6,
            alpha2: 0.4,
            gaussian_mean: -2.0,
            gaussian_var: 1.0,
            gumbel_loc: 2.0,
            gumbel_scale: 1.3,
            laplace_scale: 2.0,
            observations,
        }
    }

    /// Spec with observations drawn by [`sample_observations`].
    pub fn random(rows: usize, cols: usize, seed: u64) -> Self {
        let mut spec = Self::new(rows, cols, Matrix::zeros(rows, cols));
        spec.observations = sample_observations(&spec, seed);
        spec
    }

    pub fn node(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }
}

/// Per node: with probability `α₁` draw `y = 2 + N(−2, 1)`, otherwise
/// `y = 2 + Gumbel(2, 1.3)` via the inverse CDF.
pub fn sample_observations(spec: &GridMrfSpec, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss_std = libm::sqrt(spec.gaussian_var);
    Matrix::from_fn(spec.rows, spec.cols, |_, _| {
        let pick_gaussian = rng.gen::<f64>() < spec.alpha1;
        if pick_gaussian {
            let xi: f64 = rng.sample(StandardNormal);
            2.0 + (spec.gaussian_mean + gauss_std * xi)
        } else {
            // open interval keeps both logarithms finite
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            2.0 + (spec.gumbel_loc - spec.gumbel_scale * libm::log(-libm::log(u)))
        }
    })
}

/// `log[α₁ N(x − y | μ_g, σ²) + α₂ Gumbel(x − y | μ_b, β)]` with normalized
/// component densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureUnary {
    pub observation: f64,
    pub log_alpha1: f64,
    pub log_alpha2: f64,
    pub gaussian_mean: f64,
    pub gaussian_var: f64,
    pub gumbel_loc: f64,
    pub gumbel_scale: f64,
}

impl MixtureUnary {
    pub fn from_spec(spec: &GridMrfSpec, observation: f64) -> Self {
        Self {
            observation,
            log_alpha1: libm::log(spec.alpha1),
            log_alpha2: libm::log(spec.alpha2),
            gaussian_mean: spec.gaussian_mean,
            gaussian_var: spec.gaussian_var,
            gumbel_loc: spec.gumbel_loc,
            gumbel_scale: spec.gumbel_scale,
        }
    }

    /// Log-density and derivative at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let z = x - self.observation;
        let (lg, dg) = gaussian_log_density(z, self.gaussian_mean, self.gaussian_var);
        let (lb, db) = gumbel_log_density(z, self.gumbel_loc, self.gumbel_scale);
        let terms = [self.log_alpha1 + lg, self.log_alpha2 + lb];
        let total = log_sum_exp(&terms);
        let mut grad = 0.0;
        for (t, d) in terms.iter().zip([dg, db]) {
            let w = libm::exp(t - total);
            // a vanishing component may carry an overflowing derivative
            if w > 0.0 {
                grad += w * d;
            }
        }
        (total, grad)
    }
}

impl Potential for MixtureUnary {
    fn log_potential(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (v, g) = self.eval(x[0]);
        grad[0] = g;
        v
    }
}

/// One mixture unary per node, then one Laplace factor per 4-neighbour pair
/// (right neighbour before down neighbour, row-major).
pub fn build_grid_mrf(spec: &GridMrfSpec) -> Result<FactorGraph> {
    if spec.rows < 1 || spec.cols < 1 {
        return Err(Error::InvalidParameter("grid needs at least one row and column"));
    }
    if spec.observations.rows() != spec.rows || spec.observations.cols() != spec.cols {
        return Err(Error::DimensionMismatch {
            expected: spec.rows * spec.cols,
            actual: spec.observations.rows() * spec.observations.cols(),
        });
    }
    if !spec.observations.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    if libm::fabs(spec.alpha1 + spec.alpha2 - 1.0) > 1e-12 || spec.alpha1 < 0.0 || spec.alpha2 < 0.0 {
        return Err(Error::InvalidParameter("mixture weights must be non-negative and sum to 1"));
    }
    let n = spec.rows * spec.cols;
    let mut factors = Vec::with_capacity(3 * n);
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let y = spec.observations.get(r, c);
            factors.push(Factor::new([spec.node(r, c)], MixtureUnary::from_spec(spec, y)));
        }
    }
    let edge = LaplaceDifference::new(spec.laplace_scale);
    for (a, b) in grid_edges(spec.rows, spec.cols) {
        factors.push(Factor::new([a, b], edge));
    }
    FactorGraph::new(n, factors)
}

/// 4-neighbourhood pairs `(d, t)` with `d < t`, row-major.
pub fn grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let d = r * cols + c;
            if c + 1 < cols {
                edges.push((d, d + 1));
            }
            if r + 1 < rows {
                edges.push((d, d + cols));
            }
        }
    }
    edges
}

// ---------------------------------------------------------------------------
// Fields of Experts

/// Gaussian-scale-mixture Fields-of-Experts prior over pairwise filters.
#[derive(Debug, Clone, PartialEq)]
pub struct GsmPrior {
    /// Filter bank `J_i`; each filter acts on a neighbour pair.
    pub filters: Vec<Vec<f64>>,
    /// `weights[i][j] = α_ij`, a probability vector per filter.
    pub weights: Vec<Vec<f64>>,
    /// Base variance `σ_i²` per filter.
    pub sigma2: Vec<f64>,
    /// Scales `s_j` shared by all filters.
    pub scales: Vec<f64>,
    /// Ridge weight `ε`.
    pub epsilon: f64,
}

impl GsmPrior {
    /// Hand-constructed heavy-tailed prior used when no learned parameters
    /// are supplied: one `[1, −1]` filter, 15 scales log-spaced over
    /// `[1e-3, 1e2]`, weights halving from the narrowest component outward,
    /// `σ² = 500`, `ε = 1e-4`. These are not learned values.
    pub fn heavy_tailed_default() -> Self {
        let n = 15;
        let scales: Vec<f64> = (0..n)
            .map(|j| libm::pow(10.0, -3.0 + 5.0 * j as f64 / (n - 1) as f64))
            .collect();
        let raw: Vec<f64> = (0..n).map(|j| libm::pow(0.5, (n - 1 - j) as f64)).collect();
        let total: f64 = raw.iter().sum();
        Self {
            filters: vec![vec![1.0, -1.0]],
            weights: vec![raw.iter().map(|w| w / total).collect()],
            sigma2: vec![500.0],
            scales,
            epsilon: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.filters.len();
        if n == 0 {
            return Err(Error::InvalidParameter("at least one filter is required"));
        }
        if self.weights.len() != n || self.sigma2.len() != n {
            return Err(Error::InvalidParameter("weights and sigma2 need one entry per filter"));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParameter("scales must be positive"));
        }
        if self.filters.iter().any(|f| f.len() != 2) {
            return Err(Error::InvalidParameter("only pairwise (length-2) filters are supported"));
        }
        if self.sigma2.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParameter("sigma2 must be positive"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive"));
        }
        for w in &self.weights {
            if w.len() != self.scales.len() {
                return Err(Error::InvalidParameter("each weight row needs one entry per scale"));
            }
            if w.iter().any(|v| !(*v >= 0.0)) || libm::fabs(w.iter().sum::<f64>() - 1.0) > 1e-9 {
                return Err(Error::InvalidParameter("weights must form a probability vector"));
            }
        }
        Ok(())
    }

    fn expert(&self) -> GsmExpert {
        let components = self
            .weights
            .iter()
            .zip(&self.sigma2)
            .map(|(w, s2)| {
                w.iter()
                    .zip(&self.scales)
                    .filter(|(a, _)| **a > 0.0)
                    .map(|(a, s)| {
                        let var = s2 / s;
                        (libm::log(*a) - 0.5 * libm::log(2.0 * PI * var), 1.0 / var)
                    })
                    .collect()
            })
            .collect();
        GsmExpert {
            filters: self.filters.clone(),
            components,
        }
    }
}

/// `Σ_i log Σ_j α_ij N(J_iᵀ x_F | 0, σ_i²/s_j)` on a neighbour pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GsmExpert {
    filters: Vec<Vec<f64>>,
    /// Per filter: `(log α_ij − ½ log 2πv_ij, 1/v_ij)` for non-zero weights.
    components: Vec<Vec<(f64, f64)>>,
}

impl Potential for GsmExpert {
    fn log_potential(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut total = 0.0;
        let mut terms = [0.0; 32];
        for (filter, comps) in self.filters.iter().zip(&self.components) {
            let response: f64 = filter.iter().zip(x).map(|(a, b)| a * b).sum();
            let mut heap;
            let terms: &mut [f64] = if comps.len() <= terms.len() {
                &mut terms[..comps.len()]
            } else {
                heap = vec![0.0; comps.len()];
                &mut heap
            };
            for (t, (c, prec)) in terms.iter_mut().zip(comps) {
                *t = c - 0.5 * response * response * prec;
            }
            let lse = log_sum_exp(terms);
            let mean_precision: f64 = terms
                .iter()
                .zip(comps)
                .map(|(t, (_, prec))| libm::exp(t - lse) * prec)
                .sum();
            let slope = -response * mean_precision;
            for (g, j) in grad.iter_mut().zip(filter) {
                *g += slope * j;
            }
            total += lse;
        }
        total
    }
}

/// `−ε x²/2 − (y − x)²/(2σ_n²)` on one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelUnary {
    pub epsilon: f64,
    pub observation: f64,
    /// `1/σ_n²`; zero drops the likelihood.
    pub noise_precision: f64,
}

impl Potential for PixelUnary {
    fn log_potential(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let v = x[0];
        let r = self.observation - v;
        grad[0] = -self.epsilon * v + r * self.noise_precision;
        -0.5 * self.epsilon * v * v - 0.5 * r * r * self.noise_precision
    }
}

/// Denoising posterior `p(x | y)` for an observed image.
#[derive(Debug, Clone, PartialEq)]
pub struct GsmFoeSpec {
    pub prior: GsmPrior,
    pub noise_sigma: f64,
    pub observed: GrayImage,
}

fn foe_graph(prior: &GsmPrior, width: usize, height: usize, unary: impl Fn(usize) -> PixelUnary) -> Result<FactorGraph> {
    prior.validate()?;
    if width < 2 || height < 2 {
        return Err(Error::InvalidParameter("image must be at least 2x2"));
    }
    let n = width * height;
    let mut factors = Vec::with_capacity(3 * n);
    for d in 0..n {
        factors.push(Factor::new([d], unary(d)));
    }
    let expert: alloc::sync::Arc<dyn Potential> = alloc::sync::Arc::new(prior.expert());
    for (a, b) in grid_edges(height, width) {
        factors.push(Factor::from_shared([a, b], expert.clone()));
    }
    FactorGraph::new(n, factors)
}

/// Posterior over pixels: ridge + GSM experts on horizontal and vertical
/// neighbour pairs (no wrap-around) + Gaussian likelihood.
pub fn build_foe_denoiser(spec: &GsmFoeSpec) -> Result<FactorGraph> {
    if !(spec.noise_sigma > 0.0) {
        return Err(Error::InvalidParameter("noise_sigma must be positive"));
    }
    let precision = 1.0 / (spec.noise_sigma * spec.noise_sigma);
    let pixels = spec.observed.pixels();
    foe_graph(&spec.prior, spec.observed.width(), spec.observed.height(), |d| PixelUnary {
        epsilon: spec.prior.epsilon,
        observation: pixels[d],
        noise_precision: precision,
    })
}

/// The prior alone (ridge + experts) on a `width × height` grid.
pub fn build_foe_prior(prior: &GsmPrior, width: usize, height: usize) -> Result<FactorGraph> {
    foe_graph(prior, width, height, |_| PixelUnary {
        epsilon: prior.epsilon,
        observation: 0.0,
        noise_precision: 0.0,
    })
}
