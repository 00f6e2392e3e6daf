//! Config-driven experiment runner: `run`, `validate` and `export`.

pub mod config;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use convexnet::experiments::{
    run_fit, run_fit_stats, run_mahler, run_minkowski, run_pde_check, run_poisson, run_saint_venant,
    run_torsion_gradient, run_uat_check, FitSpec, FitStatsSpec, MahlerSpec, MinkowskiSpec, NetArtifact, PdeCheckSpec,
    PoissonSpec, RunOutput, SaintVenantSpec, TorsionGradientSpec, TrainSpec, UatSpec,
};
use convexnet::export::{boundary_mesh, polyline_csv, polyline_svg};
use convexnet::geometry::Kind;

pub use config::{ConfigError, Experiment, ExperimentConfig, Problem};

/// Default export resolutions: boundary points in 2D, latitude rings in 3D
/// (with twice as many segments per ring).
pub const POLYLINE_POINTS: usize = 256;
pub const MESH_RINGS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeFormat {
    Csv,
    Svg,
    Obj,
}

impl ShapeFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(ShapeFormat::Csv),
            "svg" => Some(ShapeFormat::Svg),
            "obj" => Some(ShapeFormat::Obj),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ShapeFormat::Csv => "csv",
            ShapeFormat::Svg => "svg",
            ShapeFormat::Obj => "obj",
        }
    }

    /// Formats available for a body of dimension `d`.
    pub fn for_dim(d: usize) -> &'static [ShapeFormat] {
        match d {
            2 => &[ShapeFormat::Csv, ShapeFormat::Svg],
            3 => &[ShapeFormat::Obj],
            _ => &[],
        }
    }
}

/// Error for a `(dimension, format)` pair that has no export.
#[derive(Debug)]
pub struct UnsupportedExport {
    pub d: usize,
    pub format: ShapeFormat,
}

impl std::fmt::Display for UnsupportedExport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} export is not available for d = {}", self.format.extension(), self.d)
    }
}

impl std::error::Error for UnsupportedExport {}

/// Renders the boundary of a net in the given format. `resolution` is the
/// number of points (2D) or latitude rings (3D).
pub fn render_shape(net: &NetArtifact, format: ShapeFormat, resolution: Option<usize>) -> anyhow::Result<String> {
    let body = net.body();
    let d = body.dim();
    if !ShapeFormat::for_dim(d).contains(&format) {
        return Err(UnsupportedExport { d, format }.into());
    }
    Ok(match format {
        ShapeFormat::Csv => polyline_csv(&body, resolution.unwrap_or(POLYLINE_POINTS))?,
        ShapeFormat::Svg => polyline_svg(&body, resolution.unwrap_or(POLYLINE_POINTS))?,
        ShapeFormat::Obj => {
            let rings = resolution.unwrap_or(MESH_RINGS);
            boundary_mesh(&body, rings, 2 * rings)?.to_obj()
        }
    })
}

fn train_spec(c: &ExperimentConfig) -> TrainSpec {
    TrainSpec {
        d: c.dimension,
        net: c.net.clone(),
        quad: c.quad,
        optimizer: c.optimizer.clone(),
        record_timing: c.record_timing,
    }
}

fn fit_spec(c: &ExperimentConfig, f: &config::FitSettings) -> FitSpec {
    FitSpec {
        train: train_spec(c),
        target: f.target.clone(),
        n_samples: f.n_samples,
        sigma: f.sigma,
        data_seed: f.data_seed,
        accuracy_samples: f.accuracy_samples,
        track_accuracy: f.track_accuracy,
    }
}

/// Runs the experiment in the current thread pool.
pub fn run_experiment(c: &ExperimentConfig) -> convexnet::Result<RunOutput> {
    let d = c.dimension;
    match &c.problem {
        Problem::Fit(f) => run_fit(&fit_spec(c, f)),
        Problem::FitStats { fit, sweep, repeats, seed } => {
            run_fit_stats(&FitStatsSpec { fit: fit_spec(c, fit), sweep: sweep.clone(), repeats: *repeats, seed: *seed })
        }
        Problem::Poisson { source } => run_poisson(&PoissonSpec {
            train: train_spec(c),
            kind: c.kind,
            source: source.clone(),
            galerkin: c.pde.galerkin.clone(),
        }),
        Problem::TorsionGradient { normalization, x_star } => run_torsion_gradient(&TorsionGradientSpec {
            train: train_spec(c),
            kind: c.kind,
            normalization: *normalization,
            x_star: x_star.clone(),
            mfs: c.pde.mfs.clone(),
            max_restarts: c.pde.max_restarts,
        }),
        Problem::Minkowski { target } => run_minkowski(&MinkowskiSpec { train: train_spec(c), target: target.clone() }),
        Problem::Mahler { starts } => run_mahler(&MahlerSpec { train: train_spec(c), starts: *starts }),
        Problem::SaintVenant => run_saint_venant(&SaintVenantSpec {
            train: train_spec(c),
            kind: c.kind,
            mfs: c.pde.mfs.clone(),
            max_restarts: c.pde.max_restarts,
        }),
        Problem::UatCheck { polytope, betas, samples } => run_uat_check(&UatSpec {
            d,
            polytope: polytope.clone(),
            kind: c.kind,
            betas: betas.clone(),
            samples: *samples,
        }),
        Problem::PdeCheck { body, solver } => run_pde_check(&PdeCheckSpec {
            d,
            body: body.clone(),
            kind: c.kind,
            solver: *solver,
            mfs: c.pde.mfs.clone(),
            galerkin: c.pde.galerkin.clone(),
            quad: c.quad,
        }),
    }
}

/// Runs with a dedicated pool of `threads` workers (0 = one per core).
pub fn run_with_threads(c: &ExperimentConfig) -> anyhow::Result<RunOutput> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(c.threads).build().context("building the thread pool")?;
    Ok(pool.install(|| run_experiment(c))?)
}

/// Writes `config.resolved`, `metrics.txt` and, when present, `runlog.csv`,
/// `net.txt`, shape exports and extra tables into `dir`. Returns the files written.
pub fn write_outputs(dir: &Path, c: &ExperimentConfig, out: &RunOutput) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files: Vec<(String, String)> =
        vec![("config.resolved".into(), c.resolved()), ("metrics.txt".into(), out.metrics.to_text())];
    if let Some(log) = &out.log {
        files.push(("runlog.csv".into(), log.to_csv()));
    }
    if let Some(net) = &out.net {
        files.push(("net.txt".into(), net.to_text()));
        for &f in ShapeFormat::for_dim(c.dimension) {
            files.push((format!("shape.{}", f.extension()), render_shape(net, f, None)?));
        }
    }
    files.extend(out.tables.iter().cloned());
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(&name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

/// Loads a config, runs it and writes the artifacts. `out_dir` overrides the
/// config's `output` key.
pub fn execute(config: &Path, out_dir: Option<&Path>) -> anyhow::Result<(PathBuf, RunOutput)> {
    let mut c = ExperimentConfig::from_path(config)?;
    if let Some(dir) = out_dir {
        c.output = dir.to_path_buf();
    }
    log::info!("running {} (d = {}) into {}", c.experiment.name(), c.dimension, c.output.display());
    let out = run_with_threads(&c)?;
    write_outputs(&c.output, &c, &out)?;
    Ok((c.output.clone(), out))
}

/// Reads a net file and writes its boundary in `format`.
pub fn export_file(
    net_path: &Path,
    format: ShapeFormat,
    kind: Option<Kind>,
    resolution: Option<usize>,
    output: Option<&Path>,
) -> anyhow::Result<PathBuf> {
    let text = std::fs::read_to_string(net_path).with_context(|| format!("reading {}", net_path.display()))?;
    let net = NetArtifact::from_text(&text, kind)?;
    if resolution.is_some_and(|r| r < 3) {
        bail!("resolution must be at least 3");
    }
    let shape = render_shape(&net, format, resolution)?;
    let path = output.map(Path::to_path_buf).unwrap_or_else(|| net_path.with_extension(format.extension()));
    std::fs::write(&path, shape).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
