#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use steinmp_core::FactorGraph;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central difference of `log_density` along coordinate `d`.
pub fn central_difference(graph: &FactorGraph, x: &[f64], d: usize, step: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[d] += step;
    xm[d] -= step;
    (graph.log_density(&xp).unwrap() - graph.log_density(&xm).unwrap()) / (2.0 * step)
}

/// Largest `|fd − analytic| / max(|analytic|, 1)` over the checked
/// coordinates.
pub fn max_fd_error(graph: &FactorGraph, x: &[f64], skip: impl Fn(usize) -> bool) -> f64 {
    let grad = graph.grad_log_density(x).unwrap();
    (0..x.len())
        .filter(|&d| !skip(d))
        .map(|d| {
            let fd = central_difference(graph, x, d, 1e-5);
            (fd - grad[d]).abs() / grad[d].abs().max(1.0)
        })
        .fold(0.0, f64::max)
}

/// True when coordinate `d` sits within `margin` of a Laplace kink along
/// any of its grid edges.
pub fn near_kink(edges: &[(usize, usize)], x: &[f64], d: usize, margin: f64) -> bool {
    edges
        .iter()
        .any(|&(a, b)| (a == d || b == d) && (x[a] - x[b]).abs() <= margin)
}
