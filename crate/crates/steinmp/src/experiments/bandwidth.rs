//! Bandwidth scaling `h = D^(α−1)·med²` on `N(0, I_D)`: variance
//! trajectories per `(α, D)`.

use rayon::prelude::*;
use steinmp_core::metrics::DiagnosticsRecord;
use steinmp_core::models::GaussianToySpec;

use super::{run_particles, snapshot, RunContext, RunResult};
use crate::config::Method;
use crate::table::{diagnostics_table, real, Table};

/// `var_avg` moved by less than `tol` (relative) over the last tenth of the
/// trajectory.
fn converged(trajectory: &[DiagnosticsRecord], tol: f64) -> bool {
    let Some(last) = trajectory.last() else {
        return false;
    };
    let probe = trajectory[trajectory.len() - 1 - trajectory.len() / 10];
    (last.marginal_var_avg - probe.marginal_var_avg).abs() <= tol * last.marginal_var_avg.abs()
}

pub(super) fn run(ctx: &mut RunContext) -> RunResult<()> {
    let cfg = ctx.config;
    let b = &cfg.bandwidth_study;
    let jobs: Vec<(Method, f64, usize)> = cfg
        .methods
        .iter()
        .flat_map(|&m| b.exponents.iter().flat_map(move |&a| b.dimensions.iter().map(move |&d| (m, a, d))))
        .collect();
    let streams = ctx.streams;
    let runs = jobs
        .par_iter()
        .map(|&(method, alpha, dimension)| {
            let toy = GaussianToySpec {
                dimension,
                init_std: b.init_std,
            };
            let graph = toy.build()?;
            let init = toy.sample_init(cfg.particles, &mut streams.rng(&format!("init/d{dimension}")));
            let kernel = cfg.kernel_spec_with(method.locality().expect("hmc rejected by validation"), alpha);
            let run = run_particles(cfg, kernel, &graph, &init, cfg.iterations)?;
            let end = snapshot(&kernel, &graph, &run.particles)?;
            Ok((run.trajectory, end))
        })
        .collect::<steinmp_core::Result<Vec<_>>>()?;

    let mut summary = Table::new(["method", "alpha", "dimension", "particles", "iterations", "var_avg_end", "mean_avg_end", "max_abs_move_end", "converged"]);
    for (&(method, alpha, dimension), (trajectory, end)) in jobs.iter().zip(&runs) {
        let name = format!("trajectory_{method}_a{}_d{dimension}.csv", alpha_tag(alpha));
        ctx.write_table(&name, &diagnostics_table(trajectory))?;
        summary.push(vec![
            method.name().into(),
            alpha.into(),
            dimension.into(),
            cfg.particles.into(),
            cfg.iterations.into(),
            end.marginal_var_avg.into(),
            end.marginal_mean_avg.into(),
            trajectory.last().map_or(0.0, |r| r.max_abs_move).into(),
            converged(trajectory, b.convergence_tol).into(),
        ]);
    }
    ctx.write_table("summary.csv", &summary)
}

/// `0.75 → "0.75"`; keeps file names free of exponent notation.
fn alpha_tag(alpha: f64) -> String {
    let s = format!("{alpha}");
    if s.contains('e') {
        real(alpha)
    } else {
        s
    }
}
