//! Message-passing SVGD: each node moves its own coordinate with a
//! one-dimensional transform whose kernel only sees the node's Markov
//! blanket `S_d = {d} ∪ Γ_d`.

use alloc::vec;
use alloc::vec::Vec;

use crate::adagrad::{AdagradConfig, AdagradState};
use crate::error::{Error, Result};
use crate::factor_graph::{FactorGraph, NodeId};
use crate::kernels::{BandwidthPolicy, KernelFamily, KernelSpec, LocalLayout, Locality};
use crate::matrix::{Matrix, ParticleSet};
use crate::metrics::DiagnosticsRecord;
use crate::svgd::UpdateDecomposition;

/// Order in which node updates are applied within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepOrder {
    /// Ascending node index; node `d` sees the moves already made to nodes `< d`.
    #[default]
    Sequential,
    /// Every node update is computed from the sweep-start snapshot, then all
    /// are applied together.
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpSvgdConfig {
    pub iterations: usize,
    pub kernel: KernelSpec,
    pub step: AdagradConfig,
    pub sweep: SweepOrder,
    pub seed: u64,
}

impl MpSvgdConfig {
    pub fn new(iterations: usize, kernel: KernelSpec) -> Self {
        Self {
            iterations,
            kernel,
            step: AdagradConfig::default(),
            sweep: SweepOrder::Sequential,
            seed: 0,
        }
    }
}

/// `φ̂*_d = G_d + R_d` for every particle.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeUpdate {
    pub node: NodeId,
    pub phi: Vec<f64>,
    pub smoothed_gradient: Vec<f64>,
    pub repulsive: Vec<f64>,
}

/// Per-node kernel layouts, fixed for a graph and locality.
#[derive(Debug, Clone)]
pub struct LocalPlan {
    family: KernelFamily,
    locality: Locality,
    layouts: Vec<LocalLayout>,
}

impl LocalPlan {
    pub fn new(graph: &FactorGraph, kernel: &KernelSpec) -> Result<Self> {
        if kernel.locality == Locality::Global {
            return Err(Error::InvalidLocality(kernel.locality.name()));
        }
        let layouts = (0..graph.dimension())
            .map(|d| LocalLayout::new(graph, d, kernel.locality))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            family: kernel.family,
            locality: kernel.locality,
            layouts,
        })
    }

    pub fn layout(&self, d: NodeId) -> &LocalLayout {
        &self.layouts[d]
    }

    /// One bandwidth per kernel term for every node. Multi-Kernel terms are
    /// per factor, so each factor's median is computed once and shared by all
    /// of its nodes.
    pub fn bandwidths(&self, policy: &BandwidthPolicy, particles: &Matrix, graph: &FactorGraph) -> Result<Vec<Vec<f64>>> {
        match self.locality {
            Locality::MultiKernel => {
                let per_factor = graph
                    .factors()
                    .iter()
                    .map(|f| policy.resolve(particles, f.scope()))
                    .collect::<Result<Vec<_>>>()?;
                self.layouts
                    .iter()
                    .map(|layout| {
                        layout
                            .terms
                            .iter()
                            .map(|t| match t.factor {
                                Some(fi) => Ok(per_factor[fi]),
                                None => policy.resolve(particles, &t.nodes),
                            })
                            .collect()
                    })
                    .collect()
            }
            _ => self
                .layouts
                .iter()
                .map(|layout| layout.resolve_bandwidths(policy, particles))
                .collect(),
        }
    }

    fn node_update(&self, graph: &FactorGraph, particles: &Matrix, d: NodeId, bandwidths: &[f64]) -> Result<NodeUpdate> {
        node_update(graph, &self.layouts[d], self.family, particles, bandwidths)
    }
}

fn node_update(
    graph: &FactorGraph,
    layout: &LocalLayout,
    family: KernelFamily,
    particles: &Matrix,
    bandwidths: &[f64],
) -> Result<NodeUpdate> {
    let d = layout.node;
    let m = particles.rows();
    let restricted = particles.select_columns(&layout.support);
    let mut scores = Vec::with_capacity(m);
    for j in 0..m {
        let s = graph.conditional_grad(particles.row(j), d)?;
        if !s.is_finite() {
            return Err(Error::NonFiniteGradient { particle: j });
        }
        scores.push(s);
    }
    let inv_m = 1.0 / m as f64;
    let mut g = vec![0.0; m];
    let mut r = vec![0.0; m];
    for i in 0..m {
        let xi = restricted.row(i);
        let (mut gi, mut ri) = (0.0, 0.0);
        for (j, s) in scores.iter().enumerate() {
            let (k, dk) = layout.eval(family, xi, restricted.row(j), bandwidths);
            gi += k * s;
            ri += dk;
        }
        g[i] = gi * inv_m;
        r[i] = ri * inv_m;
    }
    let phi = g.iter().zip(&r).map(|(a, b)| a + b).collect();
    Ok(NodeUpdate {
        node: d,
        phi,
        smoothed_gradient: g,
        repulsive: r,
    })
}

/// Local update for node `d`, with bandwidths resolved from the current
/// particles restricted to each kernel term's coordinates.
pub fn compute_local_phi(particles: &ParticleSet, graph: &FactorGraph, d: NodeId, kernel: &KernelSpec) -> Result<NodeUpdate> {
    if d >= graph.dimension() {
        return Err(Error::NodeOutOfRange {
            node: d,
            dimension: graph.dimension(),
        });
    }
    if particles.cols() != graph.dimension() {
        return Err(Error::DimensionMismatch {
            expected: graph.dimension(),
            actual: particles.cols(),
        });
    }
    let layout = LocalLayout::new(graph, d, kernel.locality)?;
    let bandwidths = layout.resolve_bandwidths(&kernel.bandwidth, particles)?;
    node_update(graph, &layout, kernel.family, particles, &bandwidths)
}

/// All node updates computed from one snapshot, assembled as `M × D`
/// matrices (column `d` holds `G_d` / `R_d`).
pub fn local_decomposition(particles: &ParticleSet, graph: &FactorGraph, kernel: &KernelSpec) -> Result<UpdateDecomposition> {
    let plan = LocalPlan::new(graph, kernel)?;
    let bandwidths = plan.bandwidths(&kernel.bandwidth, particles, graph)?;
    let mut g = Matrix::zeros(particles.rows(), particles.cols());
    let mut r = Matrix::zeros(particles.rows(), particles.cols());
    for d in 0..graph.dimension() {
        let upd = plan.node_update(graph, particles, d, &bandwidths[d])?;
        for i in 0..particles.rows() {
            g.set(i, d, upd.smoothed_gradient[i]);
            r.set(i, d, upd.repulsive[i]);
        }
    }
    Ok(UpdateDecomposition {
        smoothed_gradient: g,
        repulsive: r,
    })
}

/// MP-SVGD engine state: particles, per-coordinate Adagrad accumulators and
/// the graph's local kernel plan.
#[derive(Debug, Clone)]
pub struct MpSvgd<'g> {
    graph: &'g FactorGraph,
    plan: LocalPlan,
    config: MpSvgdConfig,
    particles: ParticleSet,
    adagrad: AdagradState,
    iteration: usize,
}

impl<'g> MpSvgd<'g> {
    pub fn new(config: MpSvgdConfig, graph: &'g FactorGraph, init: ParticleSet) -> Result<Self> {
        if init.cols() != graph.dimension() {
            return Err(Error::DimensionMismatch {
                expected: graph.dimension(),
                actual: init.cols(),
            });
        }
        let plan = LocalPlan::new(graph, &config.kernel)?;
        let adagrad = AdagradState::new(init.rows(), init.cols());
        Ok(Self {
            graph,
            plan,
            config,
            particles: init,
            adagrad,
            iteration: 0,
        })
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.particles
    }

    pub fn into_particles(self) -> ParticleSet {
        self.particles
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// One pass over all nodes. Bandwidths are resolved once from the
    /// sweep-start particles. The returned record carries the local `G` and
    /// `R` matrices assembled column by column.
    pub fn sweep(&mut self) -> Result<DiagnosticsRecord> {
        let iteration = self.iteration;
        let bandwidths = self
            .plan
            .bandwidths(&self.config.kernel.bandwidth, &self.particles, self.graph)
            .map_err(|e| e.at_iteration(iteration))?;
        let (m, dim) = (self.particles.rows(), self.particles.cols());
        let mut g = Matrix::zeros(m, dim);
        let mut r = Matrix::zeros(m, dim);
        let mut max_move = 0.0f64;
        let record_columns = |g: &mut Matrix, r: &mut Matrix, upd: &NodeUpdate| {
            for i in 0..m {
                g.set(i, upd.node, upd.smoothed_gradient[i]);
                r.set(i, upd.node, upd.repulsive[i]);
            }
        };
        match self.config.sweep {
            SweepOrder::Sequential => {
                for d in 0..dim {
                    let upd = self
                        .plan
                        .node_update(self.graph, &self.particles, d, &bandwidths[d])
                        .map_err(|e| e.at_node(iteration, d))?;
                    let mv = self
                        .adagrad
                        .apply_column(&self.config.step, &mut self.particles, d, &upd.phi);
                    max_move = max_move.max(mv);
                    record_columns(&mut g, &mut r, &upd);
                }
            }
            SweepOrder::Jacobi => {
                let updates = (0..dim)
                    .map(|d| {
                        self.plan
                            .node_update(self.graph, &self.particles, d, &bandwidths[d])
                            .map_err(|e| e.at_node(iteration, d))
                    })
                    .collect::<Result<Vec<_>>>()?;
                for upd in &updates {
                    let mv = self
                        .adagrad
                        .apply_column(&self.config.step, &mut self.particles, upd.node, &upd.phi);
                    max_move = max_move.max(mv);
                    record_columns(&mut g, &mut r, upd);
                }
            }
        }
        if !self.particles.is_finite() {
            return Err(Error::NonFiniteInput.at_iteration(iteration));
        }
        self.iteration += 1;
        Ok(DiagnosticsRecord::new(iteration, &g, &r, &self.particles, max_move))
    }
}

/// Runs `config.iterations` sweeps from `init`, reporting each to `sink`.
pub fn run(
    config: &MpSvgdConfig,
    graph: &FactorGraph,
    init: &ParticleSet,
    mut sink: impl FnMut(&DiagnosticsRecord),
) -> Result<ParticleSet> {
    let mut engine = MpSvgd::new(*config, graph, init.clone())?;
    for _ in 0..config.iterations {
        let record = engine.sweep()?;
        sink(&record);
    }
    Ok(engine.into_particles())
}
