//! Global SVGD: the empirical optimal transform split into its
//! kernel-smoothed gradient and repulsive parts, driven by Adagrad.

use alloc::vec;
use alloc::vec::Vec;

use crate::adagrad::{AdagradConfig, AdagradState};
use crate::error::{Error, Result};
use crate::factor_graph::FactorGraph;
use crate::kernels::{KernelFamily, KernelSpec, Locality};
use crate::matrix::{squared_distance, Matrix, ParticleSet};
use crate::metrics::DiagnosticsRecord;

/// `φ̂* = G + R`, each `M × D`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateDecomposition {
    /// Kernel-smoothed gradient `G`.
    pub smoothed_gradient: Matrix,
    /// Repulsive force `R`.
    pub repulsive: Matrix,
}

impl UpdateDecomposition {
    /// The update direction `G + R`.
    pub fn phi(&self) -> Matrix {
        let mut out = self.smoothed_gradient.clone();
        for (o, r) in out.as_mut_slice().iter_mut().zip(self.repulsive.as_slice()) {
            *o += r;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgdConfig {
    pub iterations: usize,
    pub kernel: KernelSpec,
    pub step: AdagradConfig,
    /// Carried for provenance; the update itself is deterministic.
    pub seed: u64,
}

impl SvgdConfig {
    pub fn new(iterations: usize, kernel: KernelSpec) -> Self {
        Self {
            iterations,
            kernel,
            step: AdagradConfig::default(),
            seed: 0,
        }
    }
}

pub(crate) fn score_matrix(particles: &Matrix, graph: &FactorGraph) -> Result<Matrix> {
    let mut scores = Matrix::zeros(particles.rows(), particles.cols());
    for i in 0..particles.rows() {
        graph
            .log_density_and_grad(particles.row(i), scores.row_mut(i))
            .map_err(|_| Error::NonFiniteGradient { particle: i })?;
        if scores.row(i).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { particle: i });
        }
    }
    Ok(scores)
}

/// `G[i] = (1/M) Σ_j k(x⁽ⁱ⁾, x⁽ʲ⁾) ∇log p(x⁽ʲ⁾)` and
/// `R[i] = (1/M) Σ_j ∇_{x⁽ʲ⁾} k(x⁽ⁱ⁾, x⁽ʲ⁾)` for a fixed bandwidth. The
/// `j = i` term is included in both sums.
pub fn compute_phi_with_bandwidth(
    particles: &ParticleSet,
    graph: &FactorGraph,
    family: KernelFamily,
    h: f64,
) -> Result<UpdateDecomposition> {
    if particles.cols() != graph.dimension() {
        return Err(Error::DimensionMismatch {
            expected: graph.dimension(),
            actual: particles.cols(),
        });
    }
    if h <= 0.0 {
        return Err(Error::InvalidBandwidth(h));
    }
    let scores = score_matrix(particles, graph)?;
    Ok(decompose(particles, &scores, family, h))
}

pub(crate) fn decompose(particles: &Matrix, scores: &Matrix, family: KernelFamily, h: f64) -> UpdateDecomposition {
    let m = particles.rows();
    let d = particles.cols();
    let inv_m = 1.0 / m as f64;
    let mut g = Matrix::zeros(m, d);
    let mut r = Matrix::zeros(m, d);
    let mut gi = vec![0.0; d];
    let mut ri = vec![0.0; d];
    for i in 0..m {
        gi.fill(0.0);
        ri.fill(0.0);
        let xi = particles.row(i);
        for j in 0..m {
            let xj = particles.row(j);
            let (k, c) = family.value_and_coefficient(squared_distance(xi, xj), h);
            for (acc, s) in gi.iter_mut().zip(scores.row(j)) {
                *acc += k * s;
            }
            for ((acc, a), b) in ri.iter_mut().zip(xi).zip(xj) {
                *acc += c * (a - b);
            }
        }
        for (o, v) in g.row_mut(i).iter_mut().zip(&gi) {
            *o = v * inv_m;
        }
        for (o, v) in r.row_mut(i).iter_mut().zip(&ri) {
            *o = v * inv_m;
        }
    }
    UpdateDecomposition {
        smoothed_gradient: g,
        repulsive: r,
    }
}

/// Resolves the global bandwidth from the current particles and computes the
/// decomposition.
pub fn compute_phi(particles: &ParticleSet, graph: &FactorGraph, kernel: &KernelSpec) -> Result<UpdateDecomposition> {
    if kernel.locality != Locality::Global {
        return Err(Error::InvalidLocality(kernel.locality.name()));
    }
    let all: Vec<usize> = (0..particles.cols()).collect();
    let h = kernel.bandwidth.resolve(particles, &all)?;
    compute_phi_with_bandwidth(particles, graph, kernel.family, h)
}

/// `R(x; q̂_M) = (1/M) Σ_j ∇_y k(x, x⁽ʲ⁾)` at an arbitrary query point.
pub fn repulsive_force(x: &[f64], particles: &Matrix, family: KernelFamily, h: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for row in particles.iter_rows() {
        let (_, c) = family.value_and_coefficient(squared_distance(x, row), h);
        for ((o, a), b) in out.iter_mut().zip(x).zip(row) {
            *o += c * (a - b);
        }
    }
    let inv_m = 1.0 / particles.rows() as f64;
    out.iter_mut().for_each(|v| *v *= inv_m);
    out
}

/// Particles plus their Adagrad accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct SvgdState {
    pub particles: ParticleSet,
    pub adagrad: AdagradState,
    iteration: usize,
}

impl SvgdState {
    pub fn new(particles: ParticleSet) -> Self {
        let adagrad = AdagradState::new(particles.rows(), particles.cols());
        Self {
            particles,
            adagrad,
            iteration: 0,
        }
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }
}

/// Applies one Adagrad step along `G + R`; returns the largest coordinate move.
pub fn step(state: &mut SvgdState, decomposition: &UpdateDecomposition, config: &AdagradConfig) -> f64 {
    let phi = decomposition.phi();
    let mv = state.adagrad.apply(config, &mut state.particles, &phi);
    state.iteration += 1;
    mv
}

/// One full iteration: resolve bandwidth, decompose, step, report.
pub fn iterate(state: &mut SvgdState, graph: &FactorGraph, config: &SvgdConfig) -> Result<DiagnosticsRecord> {
    let iteration = state.iteration;
    let decomposition =
        compute_phi(&state.particles, graph, &config.kernel).map_err(|e| e.at_iteration(iteration))?;
    let mv = step(state, &decomposition, &config.step);
    if !state.particles.is_finite() {
        return Err(Error::NonFiniteInput.at_iteration(iteration));
    }
    Ok(DiagnosticsRecord::new(
        iteration,
        &decomposition.smoothed_gradient,
        &decomposition.repulsive,
        &state.particles,
        mv,
    ))
}

/// Runs `config.iterations` SVGD steps from `init`, reporting each iteration
/// to `sink`.
pub fn run(
    config: &SvgdConfig,
    graph: &FactorGraph,
    init: &ParticleSet,
    mut sink: impl FnMut(&DiagnosticsRecord),
) -> Result<ParticleSet> {
    if init.cols() != graph.dimension() {
        return Err(Error::DimensionMismatch {
            expected: graph.dimension(),
            actual: init.cols(),
        });
    }
    if config.kernel.locality != Locality::Global {
        return Err(Error::InvalidLocality(config.kernel.locality.name()));
    }
    let mut state = SvgdState::new(init.clone());
    for _ in 0..config.iterations {
        let record = iterate(&mut state, graph, config)?;
        sink(&record);
    }
    Ok(state.particles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::BandwidthPolicy;
    use crate::models::build_gaussian_toy;
    use approx::assert_relative_eq;

    fn pair(a: f64) -> Matrix {
        Matrix::from_rows(&[[-a], [a]]).unwrap()
    }

    #[test]
    fn single_particle_is_gradient() {
        let g = build_gaussian_toy(3).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 0.5]]).unwrap();
        let dec = compute_phi(&x, &g, &KernelSpec::rbf_median(Locality::Global)).unwrap();
        assert_eq!(dec.repulsive, Matrix::zeros(1, 3));
        assert_eq!(dec.phi().row(0), &[-1.0, 2.0, -0.5]);
    }

    #[test]
    fn two_particle_hand_expansion() {
        let g = build_gaussian_toy(1).unwrap();
        let (a, h) = (0.7, 1.3);
        let dec = compute_phi_with_bandwidth(&pair(a), &g, KernelFamily::Rbf, h).unwrap();
        let e = (-2.0 * a * a / h).exp();
        let expected = 0.5 * (-a + a * e + (2.0 * a / h) * e);
        let phi = dec.phi();
        assert_relative_eq!(phi.get(1, 0), expected, max_relative = 1e-14);
        assert_relative_eq!(phi.get(0, 0), -expected, max_relative = 1e-14);
    }

    #[test]
    fn two_particle_fixed_point() {
        let g = build_gaussian_toy(1).unwrap();
        let a = 2.0f64.ln().sqrt();
        let phi = compute_phi_with_bandwidth(&pair(a), &g, KernelFamily::Rbf, 2.0)
            .unwrap()
            .phi();
        assert!(phi.get(0, 0).abs() < 1e-15 && phi.get(1, 0).abs() < 1e-15);
    }

    #[test]
    fn zero_iterations_returns_init() {
        let g = build_gaussian_toy(2).unwrap();
        let init = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let cfg = SvgdConfig::new(0, KernelSpec::rbf_median(Locality::Global));
        let mut n = 0;
        assert_eq!(run(&cfg, &g, &init, |_| n += 1).unwrap(), init);
        assert_eq!(n, 0);
    }

    #[test]
    fn rejects_local_kernels_and_bad_shapes() {
        let g = build_gaussian_toy(2).unwrap();
        let x = Matrix::zeros(2, 2);
        assert!(matches!(
            compute_phi(&x, &g, &KernelSpec::rbf_median(Locality::SingleKernel)),
            Err(Error::InvalidLocality(_))
        ));
        let fixed = KernelSpec::new(KernelFamily::Rbf, BandwidthPolicy::Fixed { h: 1.0 }, Locality::Global);
        assert!(matches!(
            compute_phi(&Matrix::zeros(2, 3), &g, &fixed),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_gradient_reports_particle() {
        let g = FactorGraph::new(
            1,
            vec![crate::Factor::new([0], |x: &[f64], gr: &mut [f64]| {
                gr[0] = if x[0] > 1.0 { f64::NAN } else { -x[0] };
                0.0
            })],
        )
        .unwrap();
        let x = Matrix::from_rows(&[[0.0], [2.0]]).unwrap();
        assert_eq!(
            compute_phi_with_bandwidth(&x, &g, KernelFamily::Rbf, 1.0),
            Err(Error::NonFiniteGradient { particle: 1 })
        );
    }
}
