//! Grid MRF with mixture unaries and Laplace couplings: expectation MSE of
//! each method against an HMC reference, and an optional PAMRF sweep over
//! grid sizes.

use rayon::prelude::*;
use steinmp_core::hmc::SampleBank;
use steinmp_core::metrics::{marginal_stats, mse_expectation, pamrf, Norm, TestFunction, TestFunctionSpec};
use steinmp_core::models::{build_grid_mrf, GridMrfSpec};
use steinmp_core::{FactorGraph, Matrix};

use super::{forces_at, gaussian_matrix, hmc_bank, loglog_slope, method_kernel, run_particles, RunContext, RunError, RunResult};
use crate::config::{ExperimentConfig, Method};
use crate::streams::Streams;
use crate::table::{diagnostics_table, matrix_table, read_matrix, Table};

struct MethodResult {
    method: Method,
    particles: Matrix,
    trajectory: Option<Table>,
}

/// `count` rows spread evenly over `samples`.
fn thin(samples: &Matrix, count: usize) -> Matrix {
    let n = samples.rows();
    Matrix::from_fn(count, samples.cols(), |k, c| samples.get(k * n / count, c))
}

fn run_method(cfg: &ExperimentConfig, streams: &Streams, method: Method, graph: &FactorGraph, init: &Matrix) -> steinmp_core::Result<MethodResult> {
    let g = &cfg.grid_mrf;
    Ok(match method_kernel(cfg, method) {
        Some(kernel) => {
            let run = run_particles(cfg, kernel, graph, init, cfg.iterations)?;
            MethodResult {
                method,
                particles: run.particles,
                trajectory: Some(diagnostics_table(&run.trajectory)),
            }
        }
        None => {
            // an independent single chain with the same iteration budget,
            // thinned to M samples
            let settings = crate::config::HmcSettings { chains: 1, ..g.hmc };
            let bank = hmc_bank(&settings, cfg.iterations.max(1), graph, streams, "method-", g.init_std)?;
            MethodResult {
                method,
                particles: thin(&bank.samples, cfg.particles),
                trajectory: None,
            }
        }
    })
}

pub(super) fn run(ctx: &mut RunContext) -> RunResult<()> {
    let cfg = ctx.config;
    let g = &cfg.grid_mrf;
    let streams = ctx.streams;
    let spec = GridMrfSpec::random(g.rows, g.cols, streams.seed_for("observations"));
    let graph = build_grid_mrf(&spec)?;
    let dim = graph.dimension();

    let truth: Matrix = match &g.truth_file {
        Some(path) => {
            let m = read_matrix(path).map_err(|e| RunError::input(path, e))?;
            if m.cols() != dim {
                return Err(RunError::input(path, format!("truth has {} columns, grid has {dim} nodes", m.cols())));
            }
            m
        }
        None => {
            let bank: SampleBank = hmc_bank(&g.hmc, g.hmc.samples_per_chain, &graph, &streams, "", g.init_std)?;
            let mut acc = Table::new(["chains", "samples_per_chain", "burn_in", "acceptance_rate"]);
            acc.push(vec![g.hmc.chains.into(), g.hmc.samples_per_chain.into(), g.hmc.burn_in.into(), bank.acceptance_rate.into()]);
            ctx.write_table("truth_hmc.csv", &acc)?;
            ctx.write_table("truth_samples.csv", &matrix_table(&bank.samples))?;
            bank.samples
        }
    };

    let mut obs = Table::new(["node", "row", "col", "observation"]);
    for r in 0..g.rows {
        for c in 0..g.cols {
            obs.push(vec![spec.node(r, c).into(), r.into(), c.into(), spec.observations.get(r, c).into()]);
        }
    }
    ctx.write_table("observations.csv", &obs)?;

    let init = gaussian_matrix(cfg.particles, dim, &vec![0.0; dim], g.init_std, &mut streams.rng("init"));
    let results = cfg
        .methods
        .par_iter()
        .map(|&m| run_method(cfg, &streams, m, &graph, &init))
        .collect::<steinmp_core::Result<Vec<_>>>()?;

    let truth_stats = marginal_stats(&truth)?;
    for res in &results {
        let name = res.method.name();
        ctx.write_table(&format!("particles_{name}.csv"), &matrix_table(&res.particles))?;
        if let Some(t) = &res.trajectory {
            ctx.write_table(&format!("diagnostics_{name}.csv"), t)?;
        }
        let means = column_means(&res.particles);
        let vars = column_vars(&res.particles, &means);
        let mut t = Table::new(["node", "row", "col", "mean", "var", "truth_mean", "truth_var"]);
        for d in 0..dim {
            t.push(vec![
                d.into(),
                (d / g.cols).into(),
                (d % g.cols).into(),
                means[d].into(),
                vars[d].into(),
                truth_stats.means[d].into(),
                truth_stats.variances[d].into(),
            ]);
        }
        ctx.write_table(&format!("marginals_{name}.csv"), &t)?;
    }

    // MSE over the four test functions, averaged over random (ω, b) draws
    let draws: Vec<Vec<TestFunctionSpec>> = (0..g.test_function_draws)
        .map(|k| {
            let mut rng = streams.rng(&format!("test-fn-draw-{k}"));
            TestFunction::ALL.iter().map(|&f| TestFunctionSpec::random(f, dim, &mut rng)).collect()
        })
        .collect();
    let mut per_draw = Table::new(["method", "function", "draw", "mse"]);
    let mut mse = Table::new(["method", "function", "mse"]);
    for res in &results {
        for (fi, f) in TestFunction::ALL.iter().enumerate() {
            let mut total = 0.0;
            for (k, fns) in draws.iter().enumerate() {
                let v = mse_expectation(&res.particles, &truth, &fns[fi])?;
                per_draw.push(vec![res.method.name().into(), f.name().into(), k.into(), v.into()]);
                total += v;
            }
            mse.push(vec![res.method.name().into(), f.name().into(), (total / draws.len() as f64).into()]);
        }
    }
    ctx.write_table("mse.csv", &mse)?;
    ctx.write_table("mse_draws.csv", &per_draw)?;

    if !g.pamrf_sweep.is_empty() {
        pamrf_sweep(ctx)?;
    }
    Ok(())
}

fn column_means(p: &Matrix) -> Vec<f64> {
    (0..p.cols()).map(|c| p.column(c).iter().sum::<f64>() / p.rows() as f64).collect()
}

fn column_vars(p: &Matrix, means: &[f64]) -> Vec<f64> {
    (0..p.cols())
        .map(|c| p.column(c).iter().map(|v| (v - means[c]).powi(2)).sum::<f64>() / p.rows() as f64)
        .collect()
}

/// Final-particle PAMRF for each particle method over square grids.
fn pamrf_sweep(ctx: &mut RunContext) -> RunResult<()> {
    let cfg = ctx.config;
    let g = &cfg.grid_mrf;
    let streams = ctx.streams;
    let methods: Vec<Method> = cfg.methods.iter().copied().filter(|m| m.locality().is_some()).collect();
    let jobs: Vec<(Method, usize)> = methods.iter().flat_map(|&m| g.pamrf_sweep.iter().map(move |&n| (m, n))).collect();
    let values = jobs
        .par_iter()
        .map(|&(method, n)| {
            let spec = GridMrfSpec::random(n, n, streams.seed_for(&format!("observations/{n}x{n}")));
            let graph = build_grid_mrf(&spec)?;
            let init = gaussian_matrix(cfg.particles, n * n, &vec![0.0; n * n], g.init_std, &mut streams.rng(&format!("init/{n}x{n}")));
            let kernel = method_kernel(cfg, method).expect("particle method");
            let run = run_particles(cfg, kernel, &graph, &init, cfg.iterations)?;
            let f = forces_at(&kernel, &graph, &run.particles)?;
            Ok((pamrf(&f.repulsive, Norm::Inf)?, pamrf(&f.repulsive, Norm::L2)?))
        })
        .collect::<steinmp_core::Result<Vec<_>>>()?;

    let mut sweep = Table::new(["method", "rows", "cols", "dimension", "pamrf_inf", "pamrf_2"]);
    for (&(m, n), &(inf, l2)) in jobs.iter().zip(&values) {
        sweep.push(vec![m.name().into(), n.into(), n.into(), (n * n).into(), inf.into(), l2.into()]);
    }
    ctx.write_table("pamrf_sweep.csv", &sweep)?;

    let mut slopes = Table::new(["method", "slope_inf", "slope_2"]);
    for &m in &methods {
        let pts: Vec<(f64, f64, f64)> = jobs
            .iter()
            .zip(&values)
            .filter(|((jm, _), _)| *jm == m)
            .map(|(&(_, n), &(inf, l2))| ((n * n) as f64, inf, l2))
            .collect();
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let inf: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let l2: Vec<f64> = pts.iter().map(|p| p.2).collect();
        slopes.push(vec![m.name().into(), loglog_slope(&xs, &inf).into(), loglog_slope(&xs, &l2).into()]);
    }
    ctx.write_table("pamrf_slopes.csv", &slopes)
}
