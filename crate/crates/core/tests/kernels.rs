//! Kernel identities: finite-difference gradients, symmetry, Gram matrix
//! positive semi-definiteness and median-heuristic invariances.

mod common;

use common::rng;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use steinmp_core::kernels::{kernel_eval, kernel_grad_y, median_bandwidth};
use steinmp_core::{KernelFamily, Matrix};

const FAMILIES: [KernelFamily; 2] = [KernelFamily::Rbf, KernelFamily::Imq];

fn random_vec(r: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * r.sample::<f64, _>(StandardNormal)).collect()
}

#[test]
fn grad_y_matches_finite_differences() {
    let mut r = rng(10);
    for family in FAMILIES {
        for _ in 0..200 {
            let n = r.gen_range(1..6);
            let x = random_vec(&mut r, n, 1.5);
            let y = random_vec(&mut r, n, 1.5);
            let h = r.gen_range(0.2..5.0);
            let g = kernel_grad_y(family, h, &x, &y).unwrap();
            for k in 0..n {
                let step = 1e-6;
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[k] += step;
                ym[k] -= step;
                let fd = (kernel_eval(family, h, &x, &yp).unwrap() - kernel_eval(family, h, &x, &ym).unwrap())
                    / (2.0 * step);
                // tiny components are dominated by FD rounding; compare them absolutely
                let err = (fd - g[k]).abs() / g[k].abs().max(1e-3);
                assert!(err < 1e-6, "{family:?} fd={fd} an={}", g[k]);
            }
        }
    }
}

proptest! {
    #[test]
    fn symmetric_and_antisymmetric(seed in 0u64..10_000, n in 1usize..8, h in 0.05f64..20.0) {
        let mut r = rng(seed);
        let x = random_vec(&mut r, n, 2.0);
        let y = random_vec(&mut r, n, 2.0);
        for family in FAMILIES {
            let kxy = kernel_eval(family, h, &x, &y).unwrap();
            prop_assert_eq!(kxy, kernel_eval(family, h, &y, &x).unwrap());
            prop_assert!(kxy > 0.0 && kxy <= 1.0);
            // ∇_x k(x, y) is ∇_y k(y, x); the two gradients are negatives.
            let gy = kernel_grad_y(family, h, &x, &y).unwrap();
            let gx = kernel_grad_y(family, h, &y, &x).unwrap();
            for (a, b) in gy.iter().zip(&gx) {
                prop_assert_eq!(*a, -*b);
            }
        }
    }

    #[test]
    fn median_invariant_to_permutation_and_shift(seed in 0u64..10_000, m in 2usize..20, d in 1usize..6, shift in -100.0f64..100.0) {
        let mut r = rng(seed);
        let rows: Vec<Vec<f64>> = (0..m).map(|_| random_vec(&mut r, d, 1.0)).collect();
        let base = median_bandwidth(&Matrix::from_rows(&rows).unwrap(), 1.3).unwrap();
        let mut permuted = rows.clone();
        permuted.reverse();
        permuted.rotate_left(seed as usize % m);
        prop_assert_eq!(base, median_bandwidth(&Matrix::from_rows(&permuted).unwrap(), 1.3).unwrap());
        let shifted: Vec<Vec<f64>> = rows.iter().map(|row| row.iter().map(|v| v + shift).collect()).collect();
        let moved = median_bandwidth(&Matrix::from_rows(&shifted).unwrap(), 1.3).unwrap();
        prop_assert!((moved - base).abs() <= 1e-9 * base.max(1.0));
    }
}

#[test]
fn rbf_gram_is_positive_semidefinite() {
    let mut r = rng(11);
    for _ in 0..30 {
        let m = r.gen_range(2..40);
        let d = r.gen_range(1..10);
        let particles: Vec<Vec<f64>> = (0..m).map(|_| random_vec(&mut r, d, 2.0)).collect();
        let h = median_bandwidth(&Matrix::from_rows(&particles).unwrap(), 1.0).unwrap();
        let gram = DMatrix::from_fn(m, m, |i, j| {
            kernel_eval(KernelFamily::Rbf, h, &particles[i], &particles[j]).unwrap()
        });
        assert_eq!(gram, gram.transpose());
        let eig = gram.symmetric_eigenvalues();
        let max = eig.max();
        assert!(eig.iter().all(|&l| l >= -1e-8 * max), "{eig}");
    }
}
