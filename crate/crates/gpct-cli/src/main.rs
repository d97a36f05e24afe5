//! `gpct` — reconstruction toolkit for sparse parallel-beam tomography.
//!
//! Subcommands cover the full pipeline: phantom generation, forward
//! projection with optional noise, filtered backprojection, Gaussian-process
//! reconstruction with four hyperparameter strategies, figures of merit, and
//! chain-trace summaries. Exit status: 0 success, 2 usage error (bad flags
//! or malformed files), 1 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array1;

use gpct_core::basis::BasisSystem;
use gpct_core::error::Error;
use gpct_core::fbp::{fbp_reconstruct, FilterKind};
use gpct_core::geometry::{
    add_noise, analytic_sinogram, chest_like_phantom, disk_phantom, pixel_sinogram, EllipsePhantom,
    ScanGeometry, Sinogram,
};
use gpct_core::gp::{
    fit_weights, predict_field, predict_measurements, GridSpec, HyperParams, InverseProblem,
};
use gpct_core::hyper::{
    chain_estimate, cross_validate, l_curve, mh_sample, ChainEstimate, ChainSample, ChainTrace,
    MhOptions,
};
use gpct_core::io;
use gpct_core::metrics::metrics;

#[derive(Parser)]
#[command(name = "gpct", version, about = "Gaussian-process and FBP tomography toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a phantom raster image and its ellipse description file.
    Phantom(PhantomArgs),
    /// Forward-project a phantom description or raster image to a sinogram.
    Project(ProjectArgs),
    /// Filtered-backprojection reconstruction of a sinogram.
    Fbp(FbpArgs),
    /// Gaussian-process reconstruction of a sinogram.
    Gp(GpArgs),
    /// Relative error and PSNR between two images.
    Metrics(MetricsArgs),
    /// Summarize a Metropolis-Hastings chain trace file.
    Trace(TraceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PhantomPreset {
    Chest,
    Disk,
}

#[derive(Args)]
struct PhantomArgs {
    /// Built-in phantom to use when no description file is given.
    #[arg(long, value_enum, default_value = "chest")]
    preset: PhantomPreset,
    /// Rasterize this ellipse description instead of a preset.
    #[arg(long)]
    desc: Option<PathBuf>,
    /// Scan disk radius.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Raster rows.
    #[arg(long, default_value_t = 128)]
    n1: usize,
    /// Raster columns.
    #[arg(long, default_value_t = 128)]
    n2: usize,
    /// Raster half-width in x1 (defaults to the radius).
    #[arg(long)]
    l1: Option<f64>,
    /// Raster half-width in x2 (defaults to the radius).
    #[arg(long)]
    l2: Option<f64>,
    /// Subsamples per pixel axis when rasterizing.
    #[arg(long, default_value_t = 1)]
    supersample: usize,
    /// Output raster image path.
    #[arg(long)]
    out_image: PathBuf,
    /// Output ellipse description path.
    #[arg(long)]
    out_desc: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    /// Ellipse description to project analytically (exact chords).
    #[arg(long, conflicts_with = "image")]
    phantom: Option<PathBuf>,
    /// Raster image to project by sampled line integration.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Scan disk radius.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Number of projection angles.
    #[arg(long, default_value_t = 9)]
    angles: usize,
    /// Number of rays per angle.
    #[arg(long, default_value_t = 95)]
    rays: usize,
    /// Angular coverage.
    #[arg(long, value_enum, default_value = "pi")]
    span: SpanArg,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// Noise generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output sinogram path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpanArg {
    Pi,
    #[value(name = "2pi")]
    TwoPi,
}

impl SpanArg {
    fn radians(self) -> f64 {
        match self {
            SpanArg::Pi => std::f64::consts::PI,
            SpanArg::TwoPi => 2.0 * std::f64::consts::PI,
        }
    }
}

#[derive(Args)]
struct FbpArgs {
    /// Input sinogram path.
    #[arg(long)]
    sinogram: PathBuf,
    /// Reconstruction filter (ramlak|shepplogan|cosine|hamming|hann).
    #[arg(long, default_value = "ramlak")]
    filter: String,
    /// Output rows.
    #[arg(long, default_value_t = 128)]
    n1: usize,
    /// Output columns.
    #[arg(long, default_value_t = 128)]
    n2: usize,
    /// Output half-width in x1 (defaults to the scan radius).
    #[arg(long)]
    l1: Option<f64>,
    /// Output half-width in x2 (defaults to the scan radius).
    #[arg(long)]
    l2: Option<f64>,
    /// Output image path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum HyperMode {
    Mh,
    Fixed,
    Lcurve,
    Cv,
}

#[derive(Args)]
struct GpArgs {
    /// Input sinogram path.
    #[arg(long)]
    sinogram: PathBuf,
    /// Prior configuration file (key=value).
    #[arg(long)]
    prior: PathBuf,
    /// Hyperparameter strategy.
    #[arg(long, value_enum, default_value = "mh")]
    hyper: HyperMode,
    /// Basis functions along x1.
    #[arg(long, default_value_t = 32)]
    m1: usize,
    /// Basis functions along x2.
    #[arg(long, default_value_t = 32)]
    m2: usize,
    /// Basis rectangle half-width as a multiple of the scan radius.
    #[arg(long, default_value_t = 1.25)]
    margin: f64,
    /// Total Metropolis-Hastings samples (including burn-in).
    #[arg(long, default_value_t = 5000)]
    samples: usize,
    /// Burn-in samples discarded before estimation.
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    /// Log-space random-walk proposal scale (all coordinates).
    #[arg(long, default_value_t = 0.1)]
    proposal_scale: f64,
    /// Seed for the chain / fold assignment.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise standard deviation (required with --hyper fixed).
    #[arg(long)]
    sigma: Option<f64>,
    /// Average the mean field over this many thinned post-burn-in samples
    /// instead of plugging in the posterior-mean hyperparameters.
    #[arg(long)]
    posterior_avg: Option<usize>,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Points of the L-curve sigma sweep.
    #[arg(long, default_value_t = 20)]
    lcurve_points: usize,
    /// Lower end of the L-curve sigma grid.
    #[arg(long, default_value_t = 0.1)]
    lcurve_min: f64,
    /// Upper end of the L-curve sigma grid.
    #[arg(long, default_value_t = 10.0)]
    lcurve_max: f64,
    /// Reconstruction rows.
    #[arg(long, default_value_t = 128)]
    n1: usize,
    /// Reconstruction columns.
    #[arg(long, default_value_t = 128)]
    n2: usize,
    /// Reconstruction half-width in x1 (defaults to the scan radius).
    #[arg(long)]
    l1: Option<f64>,
    /// Reconstruction half-width in x2 (defaults to the scan radius).
    #[arg(long)]
    l2: Option<f64>,
    /// Output path for the posterior mean image.
    #[arg(long)]
    out_mean: PathBuf,
    /// Output path for the posterior variance image (costly; computed only
    /// when requested).
    #[arg(long)]
    out_variance: Option<PathBuf>,
    /// Output path for the chain trace (--hyper mh).
    #[arg(long)]
    out_trace: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Ground-truth image.
    #[arg(long)]
    truth: PathBuf,
    /// Reconstructed image.
    #[arg(long)]
    reconstruction: PathBuf,
    /// Peak value for PSNR (defaults to max of the ground truth).
    #[arg(long)]
    peakval: Option<f64>,
}

#[derive(Args)]
struct TraceArgs {
    /// Chain trace file.
    #[arg(long)]
    trace: PathBuf,
    /// Samples to discard before estimation.
    #[arg(long, default_value_t = 0)]
    burn_in: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successes, everything else is usage.
            let _ = e.print();
            return if e.exit_code() == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gpct: {e}");
            match e {
                Error::Parse { .. }
                | Error::InvalidParam(_)
                | Error::DimensionMismatch(_)
                | Error::DegenerateCovariance(_) => ExitCode::from(2),
                Error::Factorization { .. } | Error::SpectralSingularity | Error::Io(_) => {
                    ExitCode::from(1)
                }
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Phantom(args) => cmd_phantom(args),
        Command::Project(args) => cmd_project(args),
        Command::Fbp(args) => cmd_fbp(args),
        Command::Gp(args) => cmd_gp(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Trace(args) => cmd_trace(args),
    }
}

fn cmd_phantom(args: PhantomArgs) -> Result<(), Error> {
    let phantom: EllipsePhantom = match &args.desc {
        Some(path) => io::read_phantom(path)?,
        None => match args.preset {
            PhantomPreset::Chest => chest_like_phantom(args.radius),
            PhantomPreset::Disk => disk_phantom(args.radius, 0.5, 1.0),
        },
    };
    if !phantom.fits_in_disk(args.radius) {
        return Err(Error::InvalidParam(format!(
            "phantom (outer radius {:.6}) does not fit in the scan disk (radius {})",
            phantom.outer_radius(),
            args.radius
        )));
    }
    let l1 = args.l1.unwrap_or(args.radius);
    let l2 = args.l2.unwrap_or(args.radius);
    let raster = phantom.rasterize(args.n1, args.n2, l1, l2, args.supersample);
    io::write_image(&args.out_image, &raster)?;
    if let Some(out_desc) = &args.out_desc {
        io::write_phantom(out_desc, &phantom)?;
    }
    println!(
        "phantom: {} ellipses, raster {}x{} on [-{l1}, {l1}]x[-{l2}, {l2}] -> {}",
        phantom.ellipses().len(),
        args.n1,
        args.n2,
        args.out_image.display()
    );
    Ok(())
}

fn cmd_project(args: ProjectArgs) -> Result<(), Error> {
    let geometry = ScanGeometry::new(args.radius, args.angles, args.span.radians(), args.rays)?;
    let clean: Sinogram = match (&args.phantom, &args.image) {
        (Some(desc), None) => analytic_sinogram(&io::read_phantom(desc)?, &geometry)?,
        (None, Some(img)) => pixel_sinogram(&io::read_image(img)?, &geometry)?,
        _ => {
            return Err(Error::InvalidParam(
                "exactly one of --phantom or --image is required".into(),
            ))
        }
    };
    let noisy = add_noise(&clean, args.noise_sigma, args.seed)?;
    io::write_sinogram(&args.out, &noisy)?;
    println!(
        "project: {} angles x {} rays, noise sigma {}, seed {} -> {}",
        args.angles,
        args.rays,
        args.noise_sigma,
        args.seed,
        args.out.display()
    );
    Ok(())
}

fn cmd_fbp(args: FbpArgs) -> Result<(), Error> {
    let sinogram = io::read_sinogram(&args.sinogram)?;
    let filter: FilterKind = args.filter.parse()?;
    let grid = GridSpec {
        n1: args.n1,
        n2: args.n2,
        l1: args.l1.unwrap_or(sinogram.radius),
        l2: args.l2.unwrap_or(sinogram.radius),
    };
    let image = fbp_reconstruct(&sinogram, &grid, filter)?;
    io::write_image(&args.out, &image)?;
    println!(
        "fbp: {} filter, {} measurements -> {}",
        filter.name(),
        sinogram.len(),
        args.out.display()
    );
    Ok(())
}

fn format_estimate(est: &ChainEstimate) -> String {
    let mut s = format!(
        "sigma_f = {:.4} (SD {:.4})",
        est.sigma_f.mean, est.sigma_f.sd
    );
    if let Some(l) = est.length_scale {
        s.push_str(&format!(", l = {:.4} (SD {:.4})", l.mean, l.sd));
    }
    s.push_str(&format!(", sigma = {:.4} (SD {:.4})", est.sigma.mean, est.sigma.sd));
    s
}

fn cmd_gp(args: GpArgs) -> Result<(), Error> {
    let sinogram = io::read_sinogram(&args.sinogram)?;
    let prior = io::read_prior_config(&args.prior)?;
    let radius = sinogram.radius;
    let system = BasisSystem::new(args.margin * radius, args.margin * radius, args.m1, args.m2)?;
    let problem = InverseProblem::from_sinogram(&system, &prior, &sinogram)?;
    let grid = GridSpec {
        n1: args.n1,
        n2: args.n2,
        l1: args.l1.unwrap_or(radius),
        l2: args.l2.unwrap_or(radius),
    };

    let mut trace: Option<ChainTrace> = None;
    let params: HyperParams = match args.hyper {
        HyperMode::Fixed => {
            let sigma = args
                .sigma
                .ok_or_else(|| Error::InvalidParam("--hyper fixed requires --sigma".into()))?;
            HyperParams::new(prior.sigma_f, prior.length_scale, sigma)
        }
        HyperMode::Mh => {
            let options = MhOptions {
                n_samples: args.samples,
                burn_in: args.burn_in,
                proposal_scales: [args.proposal_scale; 3],
                seed: args.seed,
            };
            let chain = mh_sample(&problem, &options)?;
            let est = chain_estimate(&chain)?;
            println!(
                "mh: {} samples ({} retained), acceptance {:.3}, {}",
                args.samples,
                est.n_retained,
                chain.acceptance_rate(),
                format_estimate(&est)
            );
            let p = est.params();
            trace = Some(chain);
            p
        }
        HyperMode::Lcurve => {
            if args.lcurve_points < 1 {
                return Err(Error::InvalidParam("--lcurve-points must be positive".into()));
            }
            let sigmas: Vec<f64> = (0..args.lcurve_points)
                .map(|i| {
                    let t = i as f64 / (args.lcurve_points.max(2) - 1) as f64;
                    args.lcurve_min * (args.lcurve_max / args.lcurve_min).powf(t)
                })
                .collect();
            let lc = l_curve(&problem, &grid, &sigmas, prior.sigma_f, prior.length_scale)?;
            let sigma = lc.corner_sigma().ok_or_else(|| {
                Error::InvalidParam("L-curve corner needs at least 3 grid points".into())
            })?;
            println!(
                "lcurve: corner at sigma = {sigma:.4} over {} points",
                lc.points.len()
            );
            HyperParams::new(prior.sigma_f, prior.length_scale, sigma)
        }
        HyperMode::Cv => {
            let sd = stddev(problem.y());
            let grid_points = cv_grid(&prior, sd, radius);
            let outcome = cross_validate(&problem, &grid_points, args.folds, args.seed)?;
            let best = outcome.best_params();
            println!(
                "cv: {} grid points, {} folds, best sigma_f = {:.4}, l = {}, sigma = {:.4}",
                outcome.results.len(),
                args.folds,
                best.sigma_f,
                best.length_scale
                    .map_or("-".to_string(), |l| format!("{l:.4}")),
                best.sigma
            );
            best
        }
    };

    if let (Some(path), Some(chain)) = (&args.out_trace, &trace) {
        io::write_trace(path, chain)?;
    }

    let basis = problem.basis_for(&params)?;
    let with_variance = args.out_variance.is_some();
    let field = match (args.posterior_avg, &trace) {
        (Some(count), Some(chain)) if count > 0 => {
            // Average the mean field over thinned posterior samples; the
            // variance image stays the plug-in one.
            let picks = thin_samples(chain, count);
            let mut mean_acc: Option<ndarray::Array2<f64>> = None;
            for p in &picks {
                let b = problem.basis_for(p)?;
                let w = fit_weights(&b, problem.y(), p.sigma)?;
                let f = predict_field(&w, &b, &grid, false, *p)?;
                mean_acc = Some(match mean_acc {
                    Some(acc) => acc + &f.mean.data,
                    None => f.mean.data.clone(),
                });
            }
            let mut field = {
                let w = fit_weights(&basis, problem.y(), params.sigma)?;
                predict_field(&w, &basis, &grid, with_variance, params)?
            };
            if let Some(acc) = mean_acc {
                field.mean.data = acc / picks.len() as f64;
            }
            println!(
                "posterior-avg: mean field averaged over {} thinned samples",
                picks.len()
            );
            field
        }
        _ => {
            let weights = fit_weights(&basis, problem.y(), params.sigma)?;
            let residual = predict_measurements(&weights, &basis) - problem.y();
            println!(
                "gp: m = {}, n = {}, residual norm {:.4e}, jitter {:.1e}",
                problem.m(),
                problem.n(),
                residual.dot(&residual).sqrt(),
                weights.jitter
            );
            predict_field(&weights, &basis, &grid, with_variance, params)?
        }
    };

    io::write_image(&args.out_mean, &field.mean)?;
    if let (Some(path), Some(var)) = (&args.out_variance, &field.variance) {
        io::write_image(path, var)?;
    }
    println!(
        "gp: wrote mean to {} (sigma_f = {:.4}, l = {}, sigma = {:.4})",
        args.out_mean.display(),
        params.sigma_f,
        params
            .length_scale
            .map_or("-".to_string(), |l| format!("{l:.4}")),
        params.sigma
    );
    Ok(())
}

fn stddev(y: &Array1<f64>) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let mean = y.sum() / n as f64;
    (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Default cross-validation grid: 5 magnitudes around the data scale,
/// 5 noise scales below it, 3 length scales up to the radius where the
/// family has one.
fn cv_grid(
    prior: &gpct_core::covariance::CovarianceSpec,
    sd: f64,
    radius: f64,
) -> Vec<HyperParams> {
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let log_grid = |lo: f64, hi: f64, k: usize| -> Vec<f64> {
        (0..k)
            .map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64))
            .collect()
    };
    let sigma_fs = log_grid(0.1 * sd, 10.0 * sd, 5);
    let sigmas = log_grid(0.01 * sd, sd, 5);
    let lengths: Vec<Option<f64>> = if prior.family.has_length_scale() {
        log_grid(radius / 10.0, radius, 3)
            .into_iter()
            .map(Some)
            .collect()
    } else {
        vec![None]
    };
    let mut out = Vec::new();
    for &sf in &sigma_fs {
        for l in &lengths {
            for &s in &sigmas {
                out.push(HyperParams::new(sf, *l, s));
            }
        }
    }
    out
}

/// Evenly thin the retained chain down to at most `count` samples.
fn thin_samples(chain: &ChainTrace, count: usize) -> Vec<HyperParams> {
    let retained = chain.retained();
    let stride = (retained.len() / count.max(1)).max(1);
    chain
        .thinned_retained(stride)
        .iter()
        .take(count)
        .map(ChainSample::params)
        .collect()
}

fn cmd_metrics(args: MetricsArgs) -> Result<(), Error> {
    let truth = io::read_image(&args.truth)?;
    let rec = io::read_image(&args.reconstruction)?;
    let m = metrics(&truth, &rec, args.peakval)?;
    println!(
        "RE = {:.4}% PSNR = {:.4} dB (peakval {:.6}, {})",
        m.relative_error, m.psnr, m.peakval, m.peakval_convention
    );
    Ok(())
}

fn cmd_trace(args: TraceArgs) -> Result<(), Error> {
    let samples = io::read_trace_samples(&args.trace)?;
    let n = samples.len();
    let trace = ChainTrace {
        samples,
        burn_in: args.burn_in,
        proposal_scales: [f64::NAN; 3],
        seed: 0,
    };
    let est = chain_estimate(&trace)?;
    println!(
        "trace: {} samples, {} retained, acceptance {:.3}",
        n,
        est.n_retained,
        trace.acceptance_rate()
    );
    println!("estimates: {}", format_estimate(&est));
    Ok(())
}
