//! Hamiltonian Monte Carlo with identity mass matrix, a fixed number of
//! leapfrog steps, and dual-averaging step-size adaptation during burn-in.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::factor_graph::FactorGraph;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcConfig {
    pub chains: usize,
    pub samples_per_chain: usize,
    pub burn_in: usize,
    pub leapfrog_steps: usize,
    pub target_accept: f64,
    pub seed: u64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            samples_per_chain: 10_000,
            burn_in: 1_000,
            leapfrog_steps: 10,
            target_accept: 0.8,
            seed: 0,
        }
    }
}

impl HmcConfig {
    fn validate(&self) -> Result<()> {
        if self.leapfrog_steps == 0 {
            return Err(Error::InvalidParameter("leapfrog_steps must be at least 1"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidParameter("target_accept must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Retained post-burn-in samples, chain-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBank {
    pub samples: Matrix,
    pub acceptance_rate: f64,
}

/// Output of a single chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub samples: Matrix,
    pub accepted: usize,
    pub proposals: usize,
    /// Step size frozen at the end of burn-in.
    pub step_size: f64,
}

impl SampleBank {
    /// Concatenates chains in order; the acceptance rate pools all
    /// post-burn-in proposals.
    pub fn from_chains(chains: &[ChainResult]) -> Result<Self> {
        let parts: Vec<Matrix> = chains.iter().map(|c| c.samples.clone()).collect();
        let samples = Matrix::vstack(&parts)?;
        let accepted: usize = chains.iter().map(|c| c.accepted).sum();
        let proposals: usize = chains.iter().map(|c| c.proposals).sum();
        let acceptance_rate = if proposals == 0 {
            0.0
        } else {
            accepted as f64 / proposals as f64
        };
        Ok(Self {
            samples,
            acceptance_rate,
        })
    }
}

/// `L` leapfrog steps of size `step_size` with identity mass. Fails if the
/// trajectory leaves the finite domain.
pub fn leapfrog(
    graph: &FactorGraph,
    x: &[f64],
    momentum: &[f64],
    step_size: f64,
    steps: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(step_size > 0.0) {
        return Err(Error::InvalidParameter("step_size must be positive"));
    }
    let mut x = x.to_vec();
    let mut p = momentum.to_vec();
    let mut grad = vec![0.0; x.len()];
    graph.log_density_and_grad(&x, &mut grad)?;
    for _ in 0..steps {
        for (pi, gi) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * step_size * gi;
        }
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += step_size * pi;
        }
        graph.log_density_and_grad(&x, &mut grad)?;
        for (pi, gi) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * step_size * gi;
        }
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok((x, p))
}

fn kinetic(p: &[f64]) -> f64 {
    0.5 * p.iter().map(|v| v * v).sum::<f64>()
}

fn draw_momentum(rng: &mut ChaCha8Rng, p: &mut [f64]) {
    for v in p.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// Metropolis acceptance probability of one trajectory; 0 if it diverged.
fn transition(
    graph: &FactorGraph,
    x: &[f64],
    log_p: f64,
    p: &[f64],
    step_size: f64,
    steps: usize,
) -> (f64, Option<(Vec<f64>, f64)>) {
    let h0 = -log_p + kinetic(p);
    match leapfrog(graph, x, p, step_size, steps) {
        Ok((x1, p1)) => match graph.log_density(&x1) {
            Ok(lp1) => {
                let h1 = -lp1 + kinetic(&p1);
                let log_ratio = h0 - h1;
                let accept = if log_ratio.is_nan() {
                    0.0
                } else {
                    libm::exp(log_ratio.min(0.0))
                };
                (accept, Some((x1, lp1)))
            }
            Err(_) => (0.0, None),
        },
        Err(_) => (0.0, None),
    }
}

/// Doubles or halves a trial step until the one-step acceptance crosses 1/2.
fn initial_step_size(graph: &FactorGraph, x: &[f64], log_p: f64, rng: &mut ChaCha8Rng) -> f64 {
    let mut eps = 1.0;
    let mut p = vec![0.0; x.len()];
    draw_momentum(rng, &mut p);
    let (mut a, _) = transition(graph, x, log_p, &p, eps, 1);
    let direction = if a > 0.5 { 1.0 } else { -1.0 };
    for _ in 0..100 {
        if !(libm::pow(a, direction) > libm::pow(0.5, direction)) {
            break;
        }
        eps *= libm::pow(2.0, direction);
        a = transition(graph, x, log_p, &p, eps, 1).0;
    }
    eps
}

/// Dual-averaging step-size controller.
struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_eps_bar: f64,
    count: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps0: f64, target: f64) -> Self {
        Self {
            mu: libm::log(10.0 * eps0),
            target,
            h_bar: 0.0,
            log_eps_bar: 0.0,
            count: 0.0,
        }
    }

    /// Records one acceptance statistic and returns the next step size.
    fn update(&mut self, accept: f64) -> f64 {
        self.count += 1.0;
        let m = self.count;
        let w = 1.0 / (m + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept);
        let log_eps = self.mu - libm::sqrt(m) / Self::GAMMA * self.h_bar;
        let eta = libm::pow(m, -Self::KAPPA);
        self.log_eps_bar = eta * log_eps + (1.0 - eta) * self.log_eps_bar;
        libm::exp(log_eps)
    }

    fn final_step_size(&self) -> f64 {
        libm::exp(self.log_eps_bar)
    }
}

/// Runs one chain. Its random stream is `(config.seed, chain_index)`.
pub fn run_chain(config: &HmcConfig, graph: &FactorGraph, init: &[f64], chain_index: usize) -> Result<ChainResult> {
    config.validate()?;
    let dim = graph.dimension();
    if init.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: init.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain_index as u64);

    let mut x = init.to_vec();
    let mut log_p = graph.log_density(&x)?;
    let mut eps = initial_step_size(graph, &x, log_p, &mut rng);
    let mut adapt = DualAveraging::new(eps, config.target_accept);
    let mut p = vec![0.0; dim];
    let mut samples = Matrix::zeros(config.samples_per_chain, dim);
    let mut accepted = 0usize;

    for it in 0..config.burn_in + config.samples_per_chain {
        draw_momentum(&mut rng, &mut p);
        let (accept_prob, proposal) = transition(graph, &x, log_p, &p, eps, config.leapfrog_steps);
        let u: f64 = rng.gen();
        let take = u < accept_prob;
        if take {
            if let Some((x1, lp1)) = proposal {
                x = x1;
                log_p = lp1;
            }
        }
        if it < config.burn_in {
            eps = adapt.update(accept_prob);
            if it + 1 == config.burn_in {
                eps = adapt.final_step_size();
            }
        } else {
            accepted += take as usize;
            samples.row_mut(it - config.burn_in).copy_from_slice(&x);
        }
    }

    Ok(ChainResult {
        samples,
        accepted,
        proposals: config.samples_per_chain,
        step_size: eps,
    })
}

/// Runs every chain sequentially from its row of `inits`.
pub fn sample(config: &HmcConfig, graph: &FactorGraph, inits: &Matrix) -> Result<SampleBank> {
    if inits.rows() != config.chains {
        return Err(Error::DimensionMismatch {
            expected: config.chains,
            actual: inits.rows(),
        });
    }
    let chains = (0..config.chains)
        .map(|c| run_chain(config, graph, inits.row(c), c))
        .collect::<Result<Vec<_>>>()?;
    SampleBank::from_chains(&chains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_graph::Factor;
    use crate::models::build_gaussian_toy;
    use approx::assert_relative_eq;

    #[test]
    fn flat_potential_zero_momentum_stays() {
        let g = FactorGraph::new(2, vec![Factor::new([0, 1], |_: &[f64], gr: &mut [f64]| {
            gr.fill(0.0);
            0.0
        })])
        .unwrap();
        let (x, p) = leapfrog(&g, &[0.4, -1.0], &[0.0, 0.0], 0.3, 7).unwrap();
        assert_eq!(x, vec![0.4, -1.0]);
        assert_eq!(p, vec![0.0, 0.0]);
    }

    #[test]
    fn energy_error_is_second_order() {
        let g = build_gaussian_toy(1).unwrap();
        let energy = |x: f64, p: f64| 0.5 * x * x + 0.5 * p * p;
        // fixed trajectory length 1.3
        let err = |eps: f64| {
            let steps = (1.3 / eps).round() as usize;
            let (x, p) = leapfrog(&g, &[1.0], &[0.0], eps, steps).unwrap();
            (energy(x[0], p[0]) - energy(1.0, 0.0)).abs()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        assert!(e1 < 1e-4);
        assert_relative_eq!(e1 / e2, 4.0, max_relative = 0.05);
    }

    #[test]
    fn rejects_bad_config() {
        let g = build_gaussian_toy(1).unwrap();
        let cfg = HmcConfig {
            leapfrog_steps: 0,
            ..HmcConfig::default()
        };
        assert!(run_chain(&cfg, &g, &[0.0], 0).is_err());
        assert!(leapfrog(&g, &[0.0], &[1.0], 0.0, 1).is_err());
    }
}
