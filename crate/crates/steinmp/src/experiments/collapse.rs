//! Particle degeneracy on `N(0, I_D)`: trajectories and begin/end
//! repulsive-force, smoothed-gradient and variance summaries per `(D, M)`.

use rayon::prelude::*;
use steinmp_core::metrics::DiagnosticsRecord;
use steinmp_core::models::GaussianToySpec;
use steinmp_core::Matrix;

use super::{method_kernel, run_particles, snapshot, RunContext, RunResult};
use crate::config::Method;
use crate::table::{diagnostics_table, matrix_table, Table};

struct Job {
    method: Method,
    dimension: usize,
    particles: usize,
}

struct Outcome {
    begin: DiagnosticsRecord,
    end: DiagnosticsRecord,
    trajectory: Vec<DiagnosticsRecord>,
    final_particles: Matrix,
}

pub(super) fn run(ctx: &mut RunContext) -> RunResult<()> {
    let cfg = ctx.config;
    let c = &cfg.gaussian_collapse;
    let jobs: Vec<Job> = cfg
        .methods
        .iter()
        .flat_map(|&method| {
            c.dimensions.iter().flat_map(move |&dimension| {
                c.particle_counts.iter().map(move |&particles| Job {
                    method,
                    dimension,
                    particles,
                })
            })
        })
        .collect();
    let streams = ctx.streams;
    let outcomes = jobs
        .par_iter()
        .map(|job| {
            let toy = GaussianToySpec {
                dimension: job.dimension,
                init_std: c.init_std,
            };
            let graph = toy.build()?;
            // same initial cloud for every method at a given (D, M)
            let init = toy.sample_init(job.particles, &mut streams.rng(&format!("init/d{}/m{}", job.dimension, job.particles)));
            let kernel = method_kernel(cfg, job.method).expect("hmc rejected by validation");
            let begin = snapshot(&kernel, &graph, &init)?;
            let run = run_particles(cfg, kernel, &graph, &init, cfg.iterations)?;
            let end = snapshot(&kernel, &graph, &run.particles)?;
            Ok(Outcome {
                begin,
                end,
                trajectory: run.trajectory,
                final_particles: run.particles,
            })
        })
        .collect::<steinmp_core::Result<Vec<_>>>()?;

    let mut summary = Table::new([
        "method",
        "dimension",
        "particles",
        "iterations",
        "pamrf_inf_begin",
        "pamrf_inf_end",
        "pamrf_2_begin",
        "pamrf_2_end",
        "paksg_inf_begin",
        "paksg_inf_end",
        "paksg_2_begin",
        "paksg_2_end",
        "var_avg_begin",
        "var_avg_end",
        "mean_avg_end",
    ]);
    for (job, out) in jobs.iter().zip(&outcomes) {
        let tag = format!("{}_d{}_m{}", job.method, job.dimension, job.particles);
        ctx.write_table(&format!("diagnostics_{tag}.csv"), &diagnostics_table(&out.trajectory))?;
        ctx.write_table(&format!("particles_{tag}.csv"), &matrix_table(&out.final_particles))?;
        let (b, e) = (&out.begin, &out.end);
        summary.push(vec![
            job.method.name().into(),
            job.dimension.into(),
            job.particles.into(),
            cfg.iterations.into(),
            b.pamrf_inf.into(),
            e.pamrf_inf.into(),
            b.pamrf_2.into(),
            e.pamrf_2.into(),
            b.paksg_inf.into(),
            e.paksg_inf.into(),
            b.paksg_2.into(),
            e.paksg_2.into(),
            b.marginal_var_avg.into(),
            e.marginal_var_avg.into(),
            e.marginal_mean_avg.into(),
        ]);
    }
    ctx.write_table("summary.csv", &summary)
}
