//! FOE denoising: noisy observation → particle posterior mean → PSNR/SSIM.

use rand::Rng;
use rand_distr::StandardNormal;
use steinmp_core::metrics::{psnr, ssim};
use steinmp_core::models::{build_foe_denoiser, GsmFoeSpec};
use steinmp_core::{GrayImage, Matrix};

use super::{method_kernel, run_particles, RunContext, RunError, RunResult};
use crate::params::GsmParams;
use crate::pgm::read_pgm;
use crate::table::{diagnostics_table, Table};

/// Piecewise-constant test card: four flat regions, a bright rectangle and
/// a dark disc.
pub fn synthetic_image(size: usize) -> GrayImage {
    let s = size as f64;
    GrayImage::from_fn(size, size, |r, c| {
        let (y, x) = (r as f64 / s, c as f64 / s);
        if (x - 0.68).powi(2) + (y - 0.66).powi(2) < 0.04 {
            40.0
        } else if (0.15..0.45).contains(&x) && (0.55..0.85).contains(&y) {
            215.0
        } else if y < 0.4 {
            if x < 0.5 {
                90.0
            } else {
                160.0
            }
        } else if x + y < 1.0 {
            125.0
        } else {
            185.0
        }
    })
}

/// Rounds and clamps to the 8-bit grid, exactly as written to disk.
fn quantize(img: &GrayImage) -> GrayImage {
    GrayImage::new(img.width(), img.height(), img.quantized().into_iter().map(f64::from).collect()).expect("same shape")
}

pub(super) fn run(ctx: &mut RunContext) -> RunResult<()> {
    let cfg = ctx.config;
    let d = &cfg.denoise;
    let params = match &d.prior {
        Some(path) => GsmParams::load(path).map_err(|e| RunError::input(path, e))?,
        None => GsmParams::bundled(),
    };
    let noise_sigma = d.noise_sigma.unwrap_or(params.noise_sigma);

    let load = |path: &std::path::PathBuf| read_pgm(path).map_err(|e| RunError::input(path, e));
    let clean = match (&d.clean, &d.noisy) {
        (Some(path), _) => Some(load(path)?),
        (None, Some(_)) => None,
        (None, None) => Some(synthetic_image(d.synthetic_size)),
    };
    let noisy = match &d.noisy {
        Some(path) => load(path)?,
        None => {
            let clean = clean.as_ref().expect("clean image present when no noisy input");
            let mut rng = ctx.streams.rng("noise");
            quantize(&clean.map(|v| v + noise_sigma * rng.sample::<f64, _>(StandardNormal)))
        }
    };
    if let (Some(path), Some(c)) = (&d.noisy, &clean) {
        if (c.width(), c.height()) != (noisy.width(), noisy.height()) {
            return Err(RunError::input(path, "noisy and clean images differ in size"));
        }
    }
    if noisy.width() < 2 || noisy.height() < 2 {
        return Err(RunError::input(d.noisy.as_deref().unwrap_or(std::path::Path::new("")), "image too small"));
    }

    let graph = build_foe_denoiser(&GsmFoeSpec {
        prior: params.prior(),
        noise_sigma,
        observed: noisy.clone(),
    })
    .map_err(|e| match &d.prior {
        Some(path) => RunError::input(path, e),
        None => RunError::Core(e),
    })?;
    let mut rng = ctx.streams.rng("init");
    let init = Matrix::from_fn(cfg.particles, graph.dimension(), |_, k| {
        noisy.pixels()[k] + d.init_std * rng.sample::<f64, _>(StandardNormal)
    });
    let kernel = method_kernel(cfg, cfg.methods[0]).expect("hmc rejected by validation");
    let run = run_particles(cfg, kernel, &graph, &init, cfg.iterations)?;
    let mean: Vec<f64> = (0..graph.dimension())
        .map(|k| run.particles.column(k).iter().sum::<f64>() / run.particles.rows() as f64)
        .collect();
    let recovered = quantize(&GrayImage::new(noisy.width(), noisy.height(), mean)?);

    if d.clean.is_none() {
        if let Some(c) = &clean {
            ctx.write_pgm("clean.pgm", c)?;
        }
    }
    ctx.write_pgm("noisy.pgm", &noisy)?;
    ctx.write_pgm("recovered.pgm", &recovered)?;
    ctx.write_table("diagnostics.csv", &diagnostics_table(&run.trajectory))?;
    if let Some(c) = &clean {
        let mut t = Table::new(["image", "psnr", "ssim"]);
        for (name, img) in [("noisy", &noisy), ("recovered", &recovered)] {
            let q = quantize(c);
            t.push(vec![name.into(), psnr(&q, img, 255.0)?.into(), ssim(&q, img)?.into()]);
        }
        ctx.write_table("metrics.csv", &t)?;
    }
    Ok(())
}
