//! Elementwise Adagrad shared by the SVGD and MP-SVGD engines.

use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdagradConfig {
    /// Initial step size `ε₀`.
    pub step_size: f64,
    /// Added to `√accumulator` in the denominator.
    pub fudge: f64,
}

impl Default for AdagradConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            fudge: 1e-6,
        }
    }
}

/// Per-(particle, coordinate) squared-update accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    accumulator: Matrix,
}

impl AdagradState {
    pub fn new(particles: usize, dimension: usize) -> Self {
        Self {
            accumulator: Matrix::zeros(particles, dimension),
        }
    }

    pub fn accumulator(&self) -> &Matrix {
        &self.accumulator
    }

    #[inline]
    fn update(&mut self, config: &AdagradConfig, i: usize, j: usize, phi: f64) -> f64 {
        let acc = self.accumulator.get(i, j) + phi * phi;
        self.accumulator.set(i, j, acc);
        config.step_size * phi / (config.fudge + libm::sqrt(acc))
    }

    /// Applies a full `M × D` update direction; returns the largest absolute
    /// coordinate move.
    pub fn apply(&mut self, config: &AdagradConfig, particles: &mut Matrix, phi: &Matrix) -> f64 {
        let mut max_move = 0.0f64;
        for i in 0..particles.rows() {
            for j in 0..particles.cols() {
                let mv = self.update(config, i, j, phi.get(i, j));
                particles.set(i, j, particles.get(i, j) + mv);
                max_move = max_move.max(libm::fabs(mv));
            }
        }
        max_move
    }

    /// Applies the update for coordinate `d` only (`phi[i]` per particle).
    pub fn apply_column(&mut self, config: &AdagradConfig, particles: &mut Matrix, d: usize, phi: &[f64]) -> f64 {
        let mut max_move = 0.0f64;
        for (i, &p) in phi.iter().enumerate() {
            let mv = self.update(config, i, d, p);
            particles.set(i, d, particles.get(i, d) + mv);
            max_move = max_move.max(libm::fabs(mv));
        }
        max_move
    }
}
