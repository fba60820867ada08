//! RBF and IMQ kernels, bandwidth policies, and Markov-blanket local kernels.
//!
//! Both families are radial: `k(x, y) = f(‖x − y‖² / (2h))` with
//! `f(z) = exp(−z)` (RBF) or `f(z) = 1/√(1 + z)` (IMQ). The gradient with
//! respect to the second argument is always a scalar multiple of `x − y`,
//! so evaluation returns that coefficient alongside the value.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::factor_graph::{FactorGraph, NodeId};
use crate::matrix::{squared_distance, Matrix};

/// Bandwidth returned when the particles have (numerically) collapsed.
pub const COLLAPSED_BANDWIDTH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Rbf,
    Imq,
}

impl KernelFamily {
    /// Value `f(z)` and gradient coefficient `c` such that
    /// `∇_y k(x, y) = c · (x − y)`, for `z = sq_dist / (2h)`.
    #[inline]
    pub fn value_and_coefficient(self, sq_dist: f64, h: f64) -> (f64, f64) {
        let z = sq_dist / (2.0 * h);
        match self {
            KernelFamily::Rbf => {
                let k = libm::exp(-z);
                (k, k / h)
            }
            KernelFamily::Imq => {
                let base = 1.0 / (1.0 + z);
                let k = libm::sqrt(base);
                (k, k * base / (2.0 * h))
            }
        }
    }

    /// Supremum over `h` of the per-coordinate repulsive magnitude, as a
    /// multiple of `‖x − y‖∞ / ‖x − y‖₂²`.
    pub fn repulsion_bound_constant(self) -> f64 {
        match self {
            KernelFamily::Rbf => 2.0 / core::f64::consts::E,
            KernelFamily::Imq => 2.0 / libm::pow(3.0, 1.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthPolicy {
    /// `h = k^(α−1) · med²` over the coordinates the kernel acts on.
    MedianHeuristic { exponent: f64 },
    Fixed { h: f64 },
}

impl BandwidthPolicy {
    pub fn median() -> Self {
        BandwidthPolicy::MedianHeuristic { exponent: 1.0 }
    }

    /// Resolves the bandwidth for a kernel acting on `coords` of the current
    /// particles. With fewer than two particles the kernel is only ever
    /// evaluated at coincident points, so any bandwidth works; 1 is used.
    pub fn resolve(&self, particles: &Matrix, coords: &[usize]) -> Result<f64> {
        match *self {
            BandwidthPolicy::Fixed { h } => {
                if h > 0.0 {
                    Ok(h)
                } else {
                    Err(Error::InvalidBandwidth(h))
                }
            }
            BandwidthPolicy::MedianHeuristic { exponent } => {
                if particles.rows() < 2 {
                    Ok(1.0)
                } else {
                    median_bandwidth_on(particles, coords, exponent)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Locality {
    Global,
    SingleKernel,
    MultiKernel,
}

impl Locality {
    pub fn name(self) -> &'static str {
        match self {
            Locality::Global => "global",
            Locality::SingleKernel => "single-kernel",
            Locality::MultiKernel => "multi-kernel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: BandwidthPolicy,
    pub locality: Locality,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: BandwidthPolicy, locality: Locality) -> Self {
        Self {
            family,
            bandwidth,
            locality,
        }
    }

    /// RBF with the plain median heuristic.
    pub fn rbf_median(locality: Locality) -> Self {
        Self::new(KernelFamily::Rbf, BandwidthPolicy::median(), locality)
    }
}

/// Median heuristic over all coordinates.
pub fn median_bandwidth(particles: &Matrix, exponent: f64) -> Result<f64> {
    let all: Vec<usize> = (0..particles.cols()).collect();
    median_bandwidth_on(particles, &all, exponent)
}

/// Median heuristic restricted to `coords`: `h = k^(α−1) · med²` where `med`
/// is the median of the `M(M−1)/2` pairwise distances (self-pairs excluded)
/// and `k = coords.len()`.
pub fn median_bandwidth_on(particles: &Matrix, coords: &[usize], exponent: f64) -> Result<f64> {
    let m = particles.rows();
    if m < 2 {
        return Err(Error::TooFewParticles {
            required: 2,
            actual: m,
        });
    }
    let mut distances = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        let xi = particles.row(i);
        for j in (i + 1)..m {
            let xj = particles.row(j);
            let sq: f64 = coords.iter().map(|&c| (xi[c] - xj[c]) * (xi[c] - xj[c])).sum();
            distances.push(libm::sqrt(sq));
        }
    }
    let med = median_in_place(&mut distances);
    let med2 = med * med;
    if med2 < COLLAPSED_BANDWIDTH {
        return Ok(COLLAPSED_BANDWIDTH);
    }
    Ok(libm::pow(coords.len() as f64, exponent - 1.0) * med2)
}

/// Median with the even-count convention (mean of the two central order
/// statistics). Reorders `values`.
pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (left, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(h))
    }
}

/// `k(x, y)`.
pub fn kernel_eval(family: KernelFamily, h: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_bandwidth(h)?;
    Ok(family.value_and_coefficient(squared_distance(x, y), h).0)
}

/// `∇_y k(x, y)`.
pub fn kernel_grad_y(family: KernelFamily, h: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    let (_, c) = family.value_and_coefficient(squared_distance(x, y), h);
    Ok(x.iter().zip(y).map(|(a, b)| c * (a - b)).collect())
}

/// One kernel term of a local kernel: the positions (within `S_d`) of the
/// coordinates it acts on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalTerm {
    /// Factor index for Multi-Kernel terms; `None` for the Single-Kernel term.
    pub factor: Option<usize>,
    pub positions: Vec<usize>,
    /// Global node indices matching `positions`.
    pub nodes: Vec<NodeId>,
}

/// Coordinate bookkeeping for the local kernel `k_d` of one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalLayout {
    pub node: NodeId,
    /// `S_d`, ascending.
    pub support: Vec<NodeId>,
    /// Position of `d` within `support`.
    pub center: usize,
    pub terms: Vec<LocalTerm>,
}

impl LocalLayout {
    /// Single-Kernel has one term over all of `S_d`. Multi-Kernel has one term
    /// per factor containing `d`; a node with no factors falls back to a single
    /// term over `S_d = {d}`.
    pub fn new(graph: &FactorGraph, d: NodeId, locality: Locality) -> Result<Self> {
        if d >= graph.dimension() {
            return Err(Error::NodeOutOfRange {
                node: d,
                dimension: graph.dimension(),
            });
        }
        let support = graph.closed_blanket(d).to_vec();
        let position_of = |n: NodeId| support.binary_search(&n).expect("scope node lies in S_d");
        let center = position_of(d);
        let whole = || LocalTerm {
            factor: None,
            positions: (0..support.len()).collect(),
            nodes: support.clone(),
        };
        let terms = match locality {
            Locality::Global => return Err(Error::InvalidLocality(locality.name())),
            Locality::SingleKernel => alloc::vec![whole()],
            Locality::MultiKernel => {
                let incident = graph.node_factors(d);
                if incident.is_empty() {
                    alloc::vec![whole()]
                } else {
                    incident
                        .iter()
                        .map(|inc| {
                            let nodes = graph.factors()[inc.factor].scope().to_vec();
                            LocalTerm {
                                factor: Some(inc.factor),
                                positions: nodes.iter().map(|&n| position_of(n)).collect(),
                                nodes,
                            }
                        })
                        .collect()
                }
            }
        };
        Ok(Self {
            node: d,
            support,
            center,
            terms,
        })
    }

    /// Evaluates `k_d(x_S, y_S)` and `∂k_d/∂y_d` given one bandwidth per term.
    #[inline]
    pub(crate) fn eval(&self, family: KernelFamily, x_s: &[f64], y_s: &[f64], bandwidths: &[f64]) -> (f64, f64) {
        let diff_d = x_s[self.center] - y_s[self.center];
        let mut value = 0.0;
        let mut grad = 0.0;
        for (term, &h) in self.terms.iter().zip(bandwidths) {
            let sq: f64 = term
                .positions
                .iter()
                .map(|&p| (x_s[p] - y_s[p]) * (x_s[p] - y_s[p]))
                .sum();
            let (k, c) = family.value_and_coefficient(sq, h);
            value += k;
            grad += c * diff_d;
        }
        let k = self.terms.len() as f64;
        (value / k, grad / k)
    }

    /// Resolves one bandwidth per term from the current particles.
    pub fn resolve_bandwidths(&self, policy: &BandwidthPolicy, particles: &Matrix) -> Result<Vec<f64>> {
        self.terms
            .iter()
            .map(|t| policy.resolve(particles, &t.nodes))
            .collect()
    }
}

/// Local kernel `k_d(x_S, y_S)` and its derivative in `y_d`. `x_s` and `y_s`
/// are indexed like `S_d`; `bandwidths` holds one value for Single-Kernel or
/// one per factor containing `d` for Multi-Kernel.
pub fn local_kernel_eval(
    spec: &KernelSpec,
    graph: &FactorGraph,
    d: NodeId,
    x_s: &[f64],
    y_s: &[f64],
    bandwidths: &[f64],
) -> Result<(f64, f64)> {
    let layout = LocalLayout::new(graph, d, spec.locality)?;
    if bandwidths.len() != layout.terms.len() {
        return Err(Error::BandwidthCount {
            expected: layout.terms.len(),
            actual: bandwidths.len(),
        });
    }
    for &h in bandwidths {
        check_bandwidth(h)?;
    }
    let s = layout.support.len();
    if x_s.len() != s || y_s.len() != s {
        return Err(Error::DimensionMismatch {
            expected: s,
            actual: if x_s.len() != s { x_s.len() } else { y_s.len() },
        });
    }
    Ok(layout.eval(spec.family, x_s, y_s, bandwidths))
}
