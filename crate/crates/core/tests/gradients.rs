//! Analytic gradients against central finite differences, plus the exact
//! agreement between full and conditional scores.

mod common;

use common::{max_fd_error, near_kink, rng};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use steinmp_core::models::{
    build_foe_denoiser, build_gaussian_toy, build_grid_mrf, grid_edges, GridMrfSpec, GsmFoeSpec, GsmPrior,
    MixtureUnary,
};
use steinmp_core::GrayImage;

const FD_TOL: f64 = 1e-4;

#[test]
fn gaussian_toy_matches_finite_differences() {
    let g = build_gaussian_toy(7).unwrap();
    let mut r = rng(1);
    for _ in 0..100 {
        let x: Vec<f64> = (0..7).map(|_| 5.0 * r.sample::<f64, _>(StandardNormal)).collect();
        assert!(max_fd_error(&g, &x, |_| false) < FD_TOL);
    }
}

#[test]
fn grid_mrf_matches_finite_differences() {
    let spec = GridMrfSpec::random(3, 3, 5);
    let g = build_grid_mrf(&spec).unwrap();
    let edges = grid_edges(3, 3);
    let mut r = rng(2);
    for _ in 0..100 {
        let x: Vec<f64> = spec
            .observations
            .as_slice()
            .iter()
            .map(|y| y + 3.0 * r.sample::<f64, _>(StandardNormal))
            .collect();
        let err = max_fd_error(&g, &x, |d| near_kink(&edges, &x, d, 1e-3));
        assert!(err < FD_TOL, "{err}");
    }
}

#[test]
fn grid_unary_matches_finite_differences() {
    let spec = GridMrfSpec::random(1, 1, 9);
    let mut r = rng(3);
    for _ in 0..100 {
        let y: f64 = 4.0 * r.sample::<f64, _>(StandardNormal);
        let u = MixtureUnary::from_spec(&spec, y);
        let x = y + 6.0 * r.sample::<f64, _>(StandardNormal);
        let h = 1e-5;
        let fd = (u.eval(x + h).0 - u.eval(x - h).0) / (2.0 * h);
        let an = u.eval(x).1;
        assert!((fd - an).abs() / an.abs().max(1.0) < FD_TOL, "x={x} fd={fd} an={an}");
    }
}

#[test]
fn foe_posterior_matches_finite_differences() {
    let mut r = rng(4);
    let clean = GrayImage::from_fn(8, 8, |row, col| if (row / 4 + col / 4) % 2 == 0 { 60.0 } else { 180.0 });
    let noisy = clean.map(|v| v + 10.0 * r.sample::<f64, _>(StandardNormal));
    let spec = GsmFoeSpec {
        prior: GsmPrior::heavy_tailed_default(),
        noise_sigma: 10.0,
        observed: noisy.clone(),
    };
    let g = build_foe_denoiser(&spec).unwrap();
    for _ in 0..100 {
        let x: Vec<f64> = noisy
            .pixels()
            .iter()
            .map(|v| v + 5.0 * r.sample::<f64, _>(StandardNormal))
            .collect();
        let err = max_fd_error(&g, &x, |_| false);
        assert!(err < FD_TOL, "{err}");
    }
}

#[test]
fn foe_likelihood_vanishes_for_huge_noise() {
    let mut r = rng(6);
    let y = GrayImage::from_fn(6, 5, |_, _| 128.0 + 40.0 * r.sample::<f64, _>(StandardNormal));
    let prior = GsmPrior::heavy_tailed_default();
    let post = build_foe_denoiser(&GsmFoeSpec {
        prior: prior.clone(),
        noise_sigma: 1e6,
        observed: y.clone(),
    })
    .unwrap();
    let prior_only = steinmp_core::models::build_foe_prior(&prior, 6, 5).unwrap();
    let x: Vec<f64> = y.pixels().iter().map(|v| v + 3.0).collect();
    let a = post.grad_log_density(&x).unwrap();
    let b = prior_only.grad_log_density(&x).unwrap();
    for (u, v) in a.iter().zip(&b) {
        assert!((u - v).abs() <= 1e-6 * v.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conditional_equals_full_score(seed in 0u64..1000, rows in 1usize..5, cols in 1usize..5) {
        let spec = GridMrfSpec::random(rows, cols, seed);
        let g = build_grid_mrf(&spec).unwrap();
        let mut r = rng(seed + 17);
        let x: Vec<f64> = (0..rows * cols).map(|_| 4.0 * r.sample::<f64, _>(StandardNormal)).collect();
        let full = g.grad_log_density(&x).unwrap();
        for d in 0..x.len() {
            prop_assert_eq!(g.conditional_grad(&x, d).unwrap(), full[d]);
        }
    }

    #[test]
    fn conditional_ignores_nodes_outside_blanket(seed in 0u64..1000, shift in -50.0f64..50.0) {
        let spec = GridMrfSpec::random(4, 4, seed);
        let g = build_grid_mrf(&spec).unwrap();
        let mut r = rng(seed);
        let x: Vec<f64> = (0..16).map(|_| 3.0 * r.sample::<f64, _>(StandardNormal)).collect();
        for d in 0..16 {
            let mut moved = x.clone();
            for (j, v) in moved.iter_mut().enumerate() {
                if !g.closed_blanket(d).contains(&j) {
                    *v += shift;
                }
            }
            prop_assert_eq!(g.conditional_grad(&x, d).unwrap(), g.conditional_grad(&moved, d).unwrap());
        }
    }

    #[test]
    fn blankets_reconstruct_from_scopes(rows in 1usize..6, cols in 1usize..6) {
        let g = build_grid_mrf(&GridMrfSpec::random(rows, cols, 0)).unwrap();
        for d in 0..rows * cols {
            let mut union: Vec<usize> = g
                .node_factors(d)
                .iter()
                .flat_map(|inc| g.factors()[inc.factor].scope().to_vec())
                .filter(|&n| n != d)
                .collect();
            union.sort_unstable();
            union.dedup();
            prop_assert_eq!(g.blanket(d), union.as_slice());
            prop_assert!(g.closed_blanket(d).contains(&d));
            for inc in g.node_factors(d) {
                prop_assert_eq!(g.factors()[inc.factor].scope()[inc.position], d);
            }
        }
    }
}

#[test]
fn grid_blanket_sizes() {
    let g = build_grid_mrf(&GridMrfSpec::random(3, 3, 0)).unwrap();
    let sizes: Vec<usize> = (0..9).map(|d| g.blanket(d).len()).collect();
    assert_eq!(sizes, vec![2, 3, 2, 3, 4, 3, 2, 3, 2]);
}
