//! Command-line front end: `simulate`, `denoise`, `evaluate`, `experiment`.
//!
//! Each subcommand has a `cmd_*` function taking its parsed arguments, so
//! the pipeline can also be driven from code.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::HSCube;
use crate::degrade::{calibrate_radii, simulate, NoiseCase, NoiseSpec};
use crate::error::{Error, Result};
use crate::io::{self, NoiseManifest};
use crate::metrics::{self, MetricReport, CSV_HEADER};
use crate::regularizer::{BlockShape, Regularizer};
use crate::solver::{solve, ConvergenceReport, DenoiseProblem, Radii, StoppingRule};
use crate::synthetic::piecewise_constant_cube;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Parser)]
#[command(name = "hsdenoise", version, about = "Mixed-noise removal for hyperspectral cubes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corrupt a clean cube with mixed noise.
    Simulate(SimulateArgs),
    /// Recover the clean cube from an observation.
    Denoise(DenoiseArgs),
    /// Score an estimate against a reference.
    Evaluate(EvaluateArgs),
    /// Simulate, denoise and evaluate over noise cases and regularizers.
    Experiment(ExperimentArgs),
}

/// Noise level flags. A `--case` preset is applied first, explicit levels
/// override it.
#[derive(Debug, Clone, Default, Args)]
pub struct NoiseArgs {
    /// Preset 1..=6.
    #[arg(long)]
    pub case: Option<NoiseCase>,
    /// Gaussian standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Fraction of salt-and-pepper voxels.
    #[arg(long)]
    pub sparse_rate: Option<f64>,
    /// Fraction of striped columns per band.
    #[arg(long)]
    pub stripe_rate: Option<f64>,
    /// Stripe offsets are uniform in [-amplitude, amplitude].
    #[arg(long)]
    pub stripe_amplitude: Option<f64>,
    /// Radius shrink factor.
    #[arg(long, default_value_t = 0.95)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl NoiseArgs {
    fn any_level(&self) -> bool {
        self.case.is_some()
            || self.sigma.is_some()
            || self.sparse_rate.is_some()
            || self.stripe_rate.is_some()
    }

    pub fn spec(&self) -> Result<NoiseSpec> {
        let mut spec = match self.case {
            Some(case) => case.spec(self.seed),
            None => NoiseSpec { seed: self.seed, ..NoiseSpec::default() },
        };
        if let Some(x) = self.sigma {
            spec.gaussian_sigma = x;
        }
        if let Some(x) = self.sparse_rate {
            spec.sparse_rate = x;
        }
        if let Some(x) = self.stripe_rate {
            spec.stripe_rate = x;
        }
        if let Some(x) = self.stripe_amplitude {
            spec.stripe_amplitude = x;
        }
        spec.rho = self.rho;
        spec.validate()?;
        Ok(spec)
    }
}

/// Block and stopping flags shared by `denoise` and `experiment`.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Block size `HxW` (or a single number for square blocks).
    #[arg(long, value_parser = parse_block, default_value = "10x10")]
    pub block: (usize, usize),
    /// Distance between block origins; defaults to non-overlapping tiles.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Relative-change threshold.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iters: usize,
}

impl SolverArgs {
    pub fn shape(&self) -> BlockShape {
        let shape = BlockShape::tiled(self.block.0, self.block.1);
        match self.stride {
            Some(s) => shape.with_stride(s),
            None => shape,
        }
    }

    pub fn stopping_rule(&self) -> StoppingRule {
        StoppingRule {
            relative_change_threshold: self.tol,
            max_iterations: self.max_iters,
            ..StoppingRule::default()
        }
    }
}

/// Band export flags.
#[derive(Debug, Clone, Default, Args)]
pub struct ExportArgs {
    /// Comma-separated band indices to write as 16-bit PGM.
    #[arg(long, value_delimiter = ',')]
    pub export_bands: Vec<usize>,
    /// Multiply values before clamping to [0, 1] in exported images.
    #[arg(long)]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Clean cube in [0, 1].
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub export: ExportArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DenoiseArgs {
    /// Observed cube.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Noise manifest; defaults to `manifest.json` beside the input if present.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value = "s3ttv")]
    pub regularizer: Regularizer,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Noise levels used to calibrate radii missing from flags and manifest.
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub export: ExportArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Estimated cube.
    #[arg(long)]
    pub input: PathBuf,
    /// Clean reference cube in [0, 1].
    #[arg(long)]
    pub reference: PathBuf,
    /// Noisy observation; adds a `Noisy` baseline row.
    #[arg(long)]
    pub observed: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "data")]
    pub dataset: String,
    /// Free-form case label for the CSV row.
    #[arg(long, default_value = "-")]
    pub case: String,
    #[arg(long, default_value = "estimate")]
    pub method: String,
    #[command(flatten)]
    pub export: ExportArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Clean cube in [0, 1]; a seeded synthetic scene is used when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Size `HxWxB` of the synthetic scene.
    #[arg(long, value_parser = parse_dims, default_value = "32x32x16")]
    pub synthetic: (usize, usize, usize),
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated cases to run.
    #[arg(long = "case", value_delimiter = ',', default_value = "1,2,3,4,5,6")]
    pub cases: Vec<NoiseCase>,
    /// Comma-separated regularizers to run.
    #[arg(long = "regularizer", value_delimiter = ',', default_value = "s3ttv,sstv")]
    pub regularizers: Vec<Regularizer>,
    #[arg(long, default_value_t = 0.95)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of (case, method) cells solved concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Dataset label; defaults to the input file stem or `synthetic`.
    #[arg(long)]
    pub dataset: Option<String>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

pub fn parse_block(s: &str) -> std::result::Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let num = |p: &str| p.trim().parse::<usize>().map_err(|_| format!("bad block size `{s}`"));
    match parts.as_slice() {
        [n] => num(n).map(|n| (n, n)),
        [h, w] => Ok((num(h)?, num(w)?)),
        _ => Err(format!("expected HxW, got `{s}`")),
    }
}

pub fn parse_dims(s: &str) -> std::result::Result<(usize, usize, usize), String> {
    let parts: Vec<usize> = s
        .split(['x', 'X'])
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| format!("bad dimensions `{s}`"))?;
    match parts.as_slice() {
        &[a, b, c] => Ok((a, b, c)),
        _ => Err(format!("expected HxWxB, got `{s}`")),
    }
}

/// Runs a parsed command line. `Ok(false)` means outputs were written but
/// some solve did not converge or some experiment cell failed.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args).map(|_| true),
        Command::Denoise(args) => cmd_denoise(&args).map(|r| r.converged),
        Command::Evaluate(args) => cmd_evaluate(&args).map(|_| true),
        Command::Experiment(args) => cmd_experiment(&args).map(|t| t.all_ok()),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn export_bands(cube: &HSCube, prefix: &str, dir: &Path, export: &ExportArgs) -> Result<()> {
    for &k in &export.export_bands {
        io::export_band_pgm(cube, k, dir.join(format!("{prefix}_band{k}.pgm")), export.scale)?;
    }
    Ok(())
}

/// Writes `v.hsc`, `s_true.hsc`, `t_true.hsc`, `n_true.hsc` and the manifest.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<NoiseManifest> {
    let clean = io::read_cube(&args.input)?;
    let spec = args.noise.spec()?;
    let degraded = simulate(&clean, &spec)?;
    create_dir(&args.out)?;
    io::write_cube(&degraded.observed, args.out.join("v.hsc"))?;
    io::write_cube(&degraded.sparse, args.out.join("s_true.hsc"))?;
    io::write_cube(&degraded.stripe, args.out.join("t_true.hsc"))?;
    io::write_cube(&degraded.gaussian, args.out.join("n_true.hsc"))?;
    let manifest = NoiseManifest {
        dims: clean.dims(),
        case: args.noise.case,
        spec,
        radii: calibrate_radii(&spec, clean.len()),
    };
    io::write_json(&manifest, args.out.join(MANIFEST_FILE))?;
    export_bands(&degraded.observed, "v", &args.out, &args.export)?;
    Ok(manifest)
}

/// Explicit radius values; `None` falls through to the next source.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RadiiOverride {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub epsilon: Option<f64>,
}

/// Picks each radius from the flags, else the manifest, else calibration.
pub fn resolve_radii(
    flags: RadiiOverride,
    manifest: Option<&Radii>,
    calibrated: Option<&Radii>,
) -> Result<Radii> {
    let pick = |name: &'static str, flag: Option<f64>, get: fn(&Radii) -> f64| {
        flag.or_else(|| manifest.map(get))
            .or_else(|| calibrated.map(get))
            .ok_or_else(|| Error::InvalidParameter {
                name,
                reason: "no value: pass the flag, a manifest, or noise levels to calibrate from".into(),
            })
    };
    Ok(Radii {
        alpha: pick("alpha", flags.alpha, |r| r.alpha)?,
        beta: pick("beta", flags.beta, |r| r.beta)?,
        epsilon: pick("epsilon", flags.epsilon, |r| r.epsilon)?,
    })
}

fn load_manifest(args: &DenoiseArgs, dims: (usize, usize, usize)) -> Result<Option<NoiseManifest>> {
    let path = match &args.manifest {
        Some(p) => p.clone(),
        None => {
            let sibling = args.input.parent().unwrap_or(Path::new(".")).join(MANIFEST_FILE);
            if !sibling.exists() {
                return Ok(None);
            }
            sibling
        }
    };
    let manifest: NoiseManifest = io::read_json(&path)?;
    if manifest.dims != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            found: manifest.dims,
        });
    }
    Ok(Some(manifest))
}

/// Writes `u_hat.hsc`, `s_hat.hsc`, `t_hat.hsc` and `report.json`.
pub fn cmd_denoise(args: &DenoiseArgs) -> Result<ConvergenceReport> {
    let observed = io::read_cube(&args.input)?;
    let manifest = load_manifest(args, observed.dims())?;
    let calibrated = if args.noise.any_level() {
        Some(calibrate_radii(&args.noise.spec()?, observed.len()))
    } else {
        None
    };
    let flags = RadiiOverride {
        alpha: args.alpha,
        beta: args.beta,
        epsilon: args.epsilon,
    };
    let radii = resolve_radii(flags, manifest.as_ref().map(|m| &m.radii), calibrated.as_ref())?;
    let geometry = args.solver.shape().bind(observed.n1(), observed.n2())?;
    let problem = DenoiseProblem::new(observed, radii, (0.0, 1.0), geometry, args.regularizer)?;
    let solution = solve(&problem, &args.solver.stopping_rule())?;
    create_dir(&args.out)?;
    io::write_cube(&solution.u, args.out.join("u_hat.hsc"))?;
    io::write_cube(&solution.s, args.out.join("s_hat.hsc"))?;
    io::write_cube(&solution.t, args.out.join("t_hat.hsc"))?;
    io::write_json(&solution.report, args.out.join(REPORT_FILE))?;
    export_bands(&solution.u, "u_hat", &args.out, &args.export)?;
    Ok(solution.report)
}

/// Writes `metrics.json` and `metrics.csv`, plus optional band images of the
/// estimate, the reference and their absolute difference.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<Vec<MetricReport>> {
    let estimate = io::read_cube(&args.input)?;
    let reference = io::read_cube(&args.reference)?;
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    if let Some(path) = &args.observed {
        let observed = io::read_cube(path)?;
        let baseline = metrics::evaluate(&observed, &reference)?;
        rows.push(baseline.csv_row(&args.dataset, &args.case, "Noisy"));
        reports.push(baseline);
    }
    let report = metrics::evaluate(&estimate, &reference)?;
    rows.push(report.csv_row(&args.dataset, &args.case, &args.method));
    reports.push(report);

    create_dir(&args.out)?;
    io::write_json(&reports, args.out.join("metrics.json"))?;
    io::write_csv(CSV_HEADER, &rows, args.out.join("metrics.csv"))?;
    if !args.export.export_bands.is_empty() {
        let diff = estimate.zip_map(&reference, |a, b| (a - b).abs());
        export_bands(&estimate, "estimate", &args.out, &args.export)?;
        export_bands(&reference, "reference", &args.out, &args.export)?;
        export_bands(&diff, "absdiff", &args.out, &args.export)?;
    }
    Ok(reports)
}

/// One `(case, method)` entry of an experiment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub case: NoiseCase,
    /// `Noisy` for the observation itself, otherwise the regularizer name.
    pub method: String,
    pub mpsnr: Option<f64>,
    pub mssim: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub max_violation: Option<f64>,
    pub error: Option<String>,
}

impl ExperimentCell {
    fn failed(case: NoiseCase, method: &str, err: &Error) -> Self {
        Self {
            case,
            method: method.to_string(),
            mpsnr: None,
            mssim: None,
            iterations: None,
            converged: None,
            max_violation: None,
            error: Some(err.to_string()),
        }
    }

    fn ok(&self) -> bool {
        self.error.is_none() && self.converged != Some(false)
    }
}

/// Results of `experiment`, ordered by case then method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub dataset: String,
    pub cells: Vec<ExperimentCell>,
}

impl ExperimentTable {
    pub fn all_ok(&self) -> bool {
        self.cells.iter().all(ExperimentCell::ok)
    }

    /// CSV rows of the successful cells.
    pub fn csv_rows(&self) -> Vec<String> {
        self.cells
            .iter()
            .filter_map(|c| match (c.mpsnr, c.mssim) {
                (Some(p), Some(s)) => Some(format!(
                    "{},{},{},{:.4},{:.4}",
                    self.dataset, c.case, c.method, p, s
                )),
                _ => None,
            })
            .collect()
    }

    pub fn get(&self, case: NoiseCase, method: &str) -> Option<&ExperimentCell> {
        self.cells.iter().find(|c| c.case == case && c.method == method)
    }
}

fn run_cell(
    clean: &HSCube,
    case: NoiseCase,
    method: Option<Regularizer>,
    args: &ExperimentArgs,
) -> Result<ExperimentCell> {
    let spec = NoiseSpec { rho: args.rho, ..case.spec(args.seed) };
    let degraded = simulate(clean, &spec)?;
    let Some(kind) = method else {
        let m = metrics::evaluate(&degraded.observed, clean)?;
        return Ok(ExperimentCell {
            case,
            method: "Noisy".into(),
            mpsnr: Some(m.mpsnr_db),
            mssim: Some(m.mssim),
            iterations: None,
            converged: None,
            max_violation: None,
            error: None,
        });
    };
    let geometry = args.solver.shape().bind(clean.n1(), clean.n2())?;
    let radii = calibrate_radii(&spec, clean.len());
    let problem = DenoiseProblem::new(degraded.observed, radii, (0.0, 1.0), geometry, kind)?;
    let solution = solve(&problem, &args.solver.stopping_rule())?;
    let name = format!("case{}_{}", case.number(), kind.name().to_lowercase());
    io::write_json(&solution.report, args.out.join(format!("{name}.report.json")))?;
    let m = metrics::evaluate(&solution.u, clean)?;
    Ok(ExperimentCell {
        case,
        method: kind.name().into(),
        mpsnr: Some(m.mpsnr_db),
        mssim: Some(m.mssim),
        iterations: Some(solution.report.iterations),
        converged: Some(solution.report.converged),
        max_violation: Some(solution.report.residuals.max_violation()),
        error: None,
    })
}

/// Runs every case with a `Noisy` baseline and each regularizer, then writes
/// `table.csv`, `table.json` and one report per solved cell.
pub fn cmd_experiment(args: &ExperimentArgs) -> Result<ExperimentTable> {
    if args.jobs == 0 {
        return Err(Error::InvalidParameter {
            name: "jobs",
            reason: "must be positive".into(),
        });
    }
    let (clean, default_name) = match &args.input {
        Some(path) => {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            (io::read_cube(path)?, stem.unwrap_or_else(|| "data".into()))
        }
        None => {
            let (n1, n2, n3) = args.synthetic;
            (piecewise_constant_cube(n1, n2, n3, args.seed)?, "synthetic".into())
        }
    };
    create_dir(&args.out)?;

    let mut jobs: Vec<(NoiseCase, Option<Regularizer>)> = Vec::new();
    for &case in &args.cases {
        jobs.push((case, None));
        for &kind in &args.regularizers {
            jobs.push((case, Some(kind)));
        }
    }
    let cell = |&(case, method): &(NoiseCase, Option<Regularizer>)| {
        run_cell(&clean, case, method, args).unwrap_or_else(|e| {
            let label = method.map_or("Noisy", Regularizer::name);
            ExperimentCell::failed(case, label, &e)
        })
    };
    let cells: Vec<ExperimentCell> = if args.jobs == 1 {
        jobs.iter().map(cell).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|e| Error::InvalidParameter {
                name: "jobs",
                reason: e.to_string(),
            })?;
        pool.install(|| jobs.par_iter().map(cell).collect())
    };

    let table = ExperimentTable {
        dataset: args.dataset.clone().unwrap_or(default_name),
        cells,
    };
    io::write_csv(CSV_HEADER, &table.csv_rows(), args.out.join("table.csv"))?;
    io::write_json(&table, args.out.join("table.json"))?;
    Ok(table)
}
