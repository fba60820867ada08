//! Factorized unnormalized densities `p(x) ∝ ∏_F ψ_F(x_F)` over continuous
//! variables, with precomputed Markov blankets.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Index of a variable in `[0, D)`.
pub type NodeId = usize;

/// A differentiable log-potential `log ψ_F`.
///
/// Implementations must be pure: the same input always yields the same
/// output, and evaluation never mutates observable state.
pub trait Potential: Send + Sync {
    /// Returns `log ψ(x_F)` and writes `∇ log ψ(x_F)` into `grad`
    /// (`grad.len() == x.len()`).
    fn log_potential(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl<F> Potential for F
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Send + Sync,
{
    fn log_potential(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self(x, grad)
    }
}

/// A factor: an ordered scope plus its log-potential.
#[derive(Clone)]
pub struct Factor {
    scope: Vec<NodeId>,
    potential: Arc<dyn Potential>,
}

impl Factor {
    pub fn new(scope: impl Into<Vec<NodeId>>, potential: impl Potential + 'static) -> Self {
        Self {
            scope: scope.into(),
            potential: Arc::new(potential),
        }
    }

    pub fn from_shared(scope: impl Into<Vec<NodeId>>, potential: Arc<dyn Potential>) -> Self {
        Self {
            scope: scope.into(),
            potential,
        }
    }

    pub fn scope(&self) -> &[NodeId] {
        &self.scope
    }

    pub fn potential(&self) -> &dyn Potential {
        &*self.potential
    }
}

impl core::fmt::Debug for Factor {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Factor").field("scope", &self.scope).finish_non_exhaustive()
    }
}

/// Incidence of a node in a factor: the factor index and the node's position
/// inside that factor's scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub factor: usize,
    pub position: usize,
}

/// Immutable factor graph with precomputed node incidences and Markov blankets.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    dimension: usize,
    factors: Vec<Factor>,
    node_factors: Vec<Vec<Incidence>>,
    blankets: Vec<Vec<NodeId>>,
    closed_blankets: Vec<Vec<NodeId>>,
}

const INLINE_SCOPE: usize = 8;

impl FactorGraph {
    /// Validates scopes and precomputes incidences and blankets. All node
    /// lists are in ascending order.
    pub fn new(dimension: usize, factors: Vec<Factor>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1"));
        }
        let mut node_factors = vec![Vec::new(); dimension];
        for (fi, factor) in factors.iter().enumerate() {
            for (pos, &node) in factor.scope.iter().enumerate() {
                if node >= dimension {
                    return Err(Error::ScopeOutOfRange {
                        factor: fi,
                        node,
                        dimension,
                    });
                }
                if factor.scope[..pos].contains(&node) {
                    return Err(Error::DuplicateScopeNode { factor: fi, node });
                }
                node_factors[node].push(Incidence {
                    factor: fi,
                    position: pos,
                });
            }
        }

        let mut blankets = Vec::with_capacity(dimension);
        let mut closed_blankets = Vec::with_capacity(dimension);
        for (d, incident) in node_factors.iter().enumerate() {
            let mut closed: Vec<NodeId> = incident
                .iter()
                .flat_map(|inc| factors[inc.factor].scope.iter().copied())
                .chain(core::iter::once(d))
                .collect();
            closed.sort_unstable();
            closed.dedup();
            blankets.push(closed.iter().copied().filter(|&n| n != d).collect());
            closed_blankets.push(closed);
        }

        Ok(Self {
            dimension,
            factors,
            node_factors,
            blankets,
            closed_blankets,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Factors containing node `d`, in ascending factor order.
    pub fn node_factors(&self, d: NodeId) -> &[Incidence] {
        &self.node_factors[d]
    }

    /// Markov blanket `Γ_d`.
    pub fn blanket(&self, d: NodeId) -> &[NodeId] {
        &self.blankets[d]
    }

    /// `S_d = {d} ∪ Γ_d`, sorted.
    pub fn closed_blanket(&self, d: NodeId) -> &[NodeId] {
        &self.closed_blankets[d]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }

    /// Evaluates factor `fi` at the full state `x` and hands the value and the
    /// scope-ordered gradient to `visit`.
    #[inline]
    fn eval_factor<T>(&self, fi: usize, x: &[f64], visit: impl FnOnce(f64, &[f64]) -> T) -> T {
        let factor = &self.factors[fi];
        let n = factor.scope.len();
        if n <= INLINE_SCOPE {
            let mut xf = [0.0; INLINE_SCOPE];
            let mut g = [0.0; INLINE_SCOPE];
            for (slot, &node) in xf.iter_mut().zip(&factor.scope) {
                *slot = x[node];
            }
            let v = factor.potential.log_potential(&xf[..n], &mut g[..n]);
            visit(v, &g[..n])
        } else {
            let xf: Vec<f64> = factor.scope.iter().map(|&node| x[node]).collect();
            let mut g = vec![0.0; n];
            let v = factor.potential.log_potential(&xf, &mut g);
            visit(v, &g)
        }
    }

    /// `Σ_F log ψ_F(x_F)`, unnormalized.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok((0..self.factors.len())
            .map(|fi| self.eval_factor(fi, x, |v, _| v))
            .sum())
    }

    /// `∇ log p(x)`.
    pub fn grad_log_density(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.dimension];
        self.log_density_and_grad(x, &mut grad)?;
        Ok(grad)
    }

    /// Log density and its gradient in one pass over the factors. Gradient
    /// components accumulate in ascending factor order, the same order
    /// [`FactorGraph::conditional_grad`] uses.
    pub fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check_input(x)?;
        if grad.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: grad.len(),
            });
        }
        grad.fill(0.0);
        let mut total = 0.0;
        for fi in 0..self.factors.len() {
            let scope = &self.factors[fi].scope;
            total += self.eval_factor(fi, x, |v, g| {
                for (&node, &gv) in scope.iter().zip(g) {
                    grad[node] += gv;
                }
                v
            });
        }
        Ok(total)
    }

    /// `∂/∂x_d log p(x_d | x_{Γ_d})`: only factors touching `d` are evaluated.
    /// `x` is not scanned for finiteness, which keeps per-node queries O(|S_d|).
    pub fn conditional_grad(&self, x: &[f64], d: NodeId) -> Result<f64> {
        if d >= self.dimension {
            return Err(Error::NodeOutOfRange {
                node: d,
                dimension: self.dimension,
            });
        }
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: x.len(),
            });
        }
        let mut acc = 0.0;
        for inc in &self.node_factors[d] {
            acc += self.eval_factor(inc.factor, x, |_, g| g[inc.position]);
        }
        Ok(acc)
    }
}
