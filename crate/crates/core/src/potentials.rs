//! Elementary log-potentials shared by the model builders.

/// `−(x − μ)² / (2σ²)` on a single node (no normalizing constant).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianUnary {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianUnary {
    pub fn new(mean: f64, variance: f64) -> Self {
        Self { mean, variance }
    }

    pub fn standard() -> Self {
        Self::new(0.0, 1.0)
    }
}

impl crate::Potential for GaussianUnary {
    fn log_potential(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let z = x[0] - self.mean;
        grad[0] = -z / self.variance;
        -0.5 * z * z / self.variance
    }
}

/// `−|x₀ − x₁| / β` on a pair of nodes.
///
/// The derivative at a kink uses `sign(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceDifference {
    pub scale: f64,
}

impl LaplaceDifference {
    pub fn new(scale: f64) -> Self {
        Self { scale }
    }
}

#[inline]
pub(crate) fn sign(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl crate::Potential for LaplaceDifference {
    fn log_potential(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let z = x[0] - x[1];
        let s = sign(z) / self.scale;
        grad[0] = -s;
        grad[1] = s;
        -libm::fabs(z) / self.scale
    }
}
