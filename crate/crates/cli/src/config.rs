//! Experiment configuration files.
//!
//! A config is a TOML document with top-level run settings and dotted
//! sections (`[net]`, `[quadrature]`, `[optimizer]`, `[pde]`, plus one section
//! named after the experiment). Every key is checked; all problems are
//! collected and reported together.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use convexnet::experiments::{
    CurvatureTarget, NetSpec, Normalization, PdeSolver, QuadSpec, Sweep, Target, POISSON_DEFAULT_SOURCES,
};
use convexnet::geometry::Kind;
use convexnet::net::SymmetryGroup;
use convexnet::optimize::{AdamConfig, LbfgsConfig, Optimizer};
use convexnet::pde::{GalerkinConfig, MfsConfig};
use toml::{Table, Value};

/// Every problem found in a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub errors: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "invalid configuration ({} problem{}):",
            self.errors.len(),
            if self.errors.len() == 1 { "" } else { "s" }
        )?;
        for e in &self.errors {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Fit,
    FitStats,
    Poisson,
    TorsionGradient,
    Minkowski,
    Mahler,
    SaintVenant,
    UatCheck,
    PdeCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Fit,
        Experiment::FitStats,
        Experiment::Poisson,
        Experiment::TorsionGradient,
        Experiment::Minkowski,
        Experiment::Mahler,
        Experiment::SaintVenant,
        Experiment::UatCheck,
        Experiment::PdeCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fit => "fit",
            Experiment::FitStats => "fit-stats",
            Experiment::Poisson => "poisson",
            Experiment::TorsionGradient => "torsion-gradient",
            Experiment::Minkowski => "minkowski",
            Experiment::Mahler => "mahler",
            Experiment::SaintVenant => "saint-venant",
            Experiment::UatCheck => "uat-check",
            Experiment::PdeCheck => "pde-check",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    /// Whether the top-level `kind` key applies.
    fn takes_kind(self) -> bool {
        matches!(
            self,
            Experiment::Poisson
                | Experiment::TorsionGradient
                | Experiment::SaintVenant
                | Experiment::UatCheck
                | Experiment::PdeCheck
        )
    }

    /// Whether the experiment trains a network.
    fn trains(self) -> bool {
        !matches!(self, Experiment::UatCheck | Experiment::PdeCheck)
    }

    fn uses_pde(self) -> bool {
        matches!(
            self,
            Experiment::Poisson | Experiment::TorsionGradient | Experiment::SaintVenant | Experiment::PdeCheck
        )
    }

    /// Experiment-specific sections that may appear.
    fn sections(self) -> &'static [&'static str] {
        match self {
            Experiment::FitStats => &["fit", "fit-stats"],
            e => std::slice::from_ref(match e {
                Experiment::Fit => &"fit",
                Experiment::Poisson => &"poisson",
                Experiment::TorsionGradient => &"torsion-gradient",
                Experiment::Minkowski => &"minkowski",
                Experiment::Mahler => &"mahler",
                Experiment::SaintVenant => &"saint-venant",
                Experiment::UatCheck => &"uat-check",
                Experiment::PdeCheck => &"pde-check",
                Experiment::FitStats => unreachable!(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub target: Target,
    pub sigma: f64,
    pub n_samples: usize,
    pub data_seed: u64,
    pub accuracy_samples: usize,
    pub track_accuracy: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Fit(FitSettings),
    FitStats { fit: FitSettings, sweep: Sweep, repeats: usize, seed: u64 },
    Poisson { source: String },
    TorsionGradient { normalization: Normalization, x_star: Vec<f64> },
    Minkowski { target: CurvatureTarget },
    Mahler { starts: usize },
    SaintVenant,
    UatCheck { polytope: Target, betas: Vec<f64>, samples: usize },
    PdeCheck { body: Target, solver: PdeSolver },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSettings {
    pub mfs: MfsConfig,
    pub galerkin: GalerkinConfig,
    /// Re-adaptations of the MFS resolution allowed during one optimisation.
    pub max_restarts: usize,
}

/// A fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dimension: usize,
    pub output: PathBuf,
    pub threads: usize,
    pub record_timing: bool,
    pub kind: Kind,
    pub net: NetSpec,
    pub group_file: Option<PathBuf>,
    pub quad: QuadSpec,
    pub optimizer: Optimizer,
    pub pde: PdeSettings,
    pub problem: Problem,
}

// ---------------------------------------------------------------------------
// reading

struct Section<'a> {
    name: String,
    table: Option<&'a Table>,
    used: BTreeSet<String>,
}

struct Reader {
    errors: Vec<String>,
}

impl<'a> Section<'a> {
    fn key(&self, k: &str) -> String {
        if self.name.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.name)
        }
    }

    fn raw(&mut self, k: &str) -> Option<&'a Value> {
        self.used.insert(k.to_string());
        self.table.and_then(|t| t.get(k))
    }
}

impl Reader {
    fn section<'a>(&mut self, root: &'a Table, name: &str, allowed: bool) -> Section<'a> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) if allowed => Some(t),
            Some(Value::Table(_)) => {
                self.errors.push(format!("section `[{name}]` does not apply to this experiment"));
                None
            }
            Some(_) => {
                self.errors.push(format!("`{name}` must be a section"));
                None
            }
        };
        Section { name: name.to_string(), table, used: BTreeSet::new() }
    }

    fn finish(&mut self, s: &Section) {
        if let Some(t) = s.table {
            for k in t.keys() {
                if !s.used.contains(k) {
                    self.errors.push(format!("unknown key `{}`", s.key(k)));
                }
            }
        }
    }

    fn bad(&mut self, s: &Section, k: &str, what: &str) {
        self.errors.push(format!("`{}` must be {what}", s.key(k)));
    }

    fn int(&mut self, s: &mut Section, k: &str, default: u64, min: u64) -> u64 {
        match s.raw(k) {
            None => default,
            Some(Value::Integer(v)) if *v >= min as i64 => *v as u64,
            Some(_) => {
                self.bad(s, k, &format!("an integer ≥ {min}"));
                default
            }
        }
    }

    fn opt_int(&mut self, s: &mut Section, k: &str, min: u64) -> Option<u64> {
        match s.raw(k) {
            None => None,
            Some(Value::Integer(v)) if *v >= min as i64 => Some(*v as u64),
            Some(_) => {
                self.bad(s, k, &format!("an integer ≥ {min}"));
                None
            }
        }
    }

    fn float(&mut self, s: &mut Section, k: &str, default: f64, ok: impl Fn(f64) -> bool, what: &str) -> f64 {
        let v = match s.raw(k) {
            None => return default,
            Some(Value::Float(v)) => *v,
            Some(Value::Integer(v)) => *v as f64,
            Some(_) => f64::NAN,
        };
        if v.is_finite() && ok(v) {
            v
        } else {
            self.bad(s, k, what);
            default
        }
    }

    fn boolean(&mut self, s: &mut Section, k: &str, default: bool) -> bool {
        match s.raw(k) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.bad(s, k, "true or false");
                default
            }
        }
    }

    fn string(&mut self, s: &mut Section, k: &str) -> Option<String> {
        match s.raw(k) {
            None => None,
            Some(Value::String(v)) => Some(v.clone()),
            Some(_) => {
                self.bad(s, k, "a string");
                None
            }
        }
    }

    fn floats(&mut self, s: &mut Section, k: &str) -> Option<Vec<f64>> {
        let arr = match s.raw(k)? {
            Value::Array(a) => a,
            _ => {
                self.bad(s, k, "an array of numbers");
                return None;
            }
        };
        let out: Option<Vec<f64>> = arr
            .iter()
            .map(|v| match v {
                Value::Float(f) if f.is_finite() => Some(*f),
                Value::Integer(i) => Some(*i as f64),
                _ => None,
            })
            .collect();
        if out.is_none() {
            self.bad(s, k, "an array of numbers");
        }
        out
    }

    fn target(&mut self, s: &mut Section, k: &str, default: Target, d: usize) -> Target {
        match self.string(s, k) {
            None => default,
            Some(t) => match Target::parse(&t) {
                Ok(Target::Ellipsoid(a)) if a.len() != d => {
                    self.errors.push(format!("`{}`: ellipsoid needs {d} axes, found {}", s.key(k), a.len()));
                    default
                }
                Ok(t) => t,
                Err(e) => {
                    self.errors.push(format!("`{}`: {e}", s.key(k)));
                    default
                }
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { errors: vec![format!("cannot read {}: {e}", path.display())] })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses a config; relative `group_file` paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError { errors: vec![e.to_string()] })?;
        let mut r = Reader { errors: Vec::new() };
        let mut top = Section { name: String::new(), table: Some(&root), used: BTreeSet::new() };

        let experiment = match r.string(&mut top, "experiment") {
            Some(name) => Experiment::parse(&name).unwrap_or_else(|| {
                let all: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                r.errors.push(format!("unknown experiment `{name}` (expected one of {})", all.join(", ")));
                Experiment::Fit
            }),
            None => {
                r.errors.push("missing key `experiment`".into());
                Experiment::Fit
            }
        };
        let dimension = r.int(&mut top, "dimension", 2, 2) as usize;
        if !(2..=4).contains(&dimension) {
            r.errors.push(format!("`dimension` must be 2, 3 or 4 (got {dimension})"));
        }
        let d = dimension.clamp(2, 4);
        let output =
            PathBuf::from(r.string(&mut top, "output").unwrap_or_else(|| format!("out/{}", experiment.name())));
        let threads = r.int(&mut top, "threads", 1, 0) as usize;
        let record_timing = r.boolean(&mut top, "record_timing", false);
        let kind = if experiment.takes_kind() {
            match r.string(&mut top, "kind") {
                None => Kind::Gauge,
                Some(k) => Kind::parse(&k).unwrap_or_else(|e| {
                    r.errors.push(format!("`kind`: {e}"));
                    Kind::Gauge
                }),
            }
        } else {
            Kind::Gauge
        };

        let trains = experiment.trains();
        let mut s = r.section(&root, "net", trains);
        let mut net = NetSpec::default_for(d);
        net.m = r.int(&mut s, "m", net.m as u64, 1) as usize;
        net.seed = r.int(&mut s, "seed", 0, 0);
        net.symmetry = r.opt_int(&mut s, "symmetry", 1).map(|n| n as usize);
        let group_file = r.string(&mut s, "group_file").map(PathBuf::from);
        if net.symmetry.is_some() && group_file.is_some() {
            r.errors.push("`net.symmetry` and `net.group_file` are mutually exclusive".into());
        }
        if let Some(path) = &group_file {
            let full = if path.is_absolute() { path.clone() } else { base.join(path) };
            match read_group(&full, d) {
                Ok(g) => net.group = Some(g),
                Err(e) => r.errors.push(format!("`net.group_file`: {e}")),
            }
        }
        r.finish(&s);

        let mut s = r.section(&root, "quadrature", true);
        let mut quad = QuadSpec::default_for(d);
        quad.sphere = r.int(&mut s, "sphere", quad.sphere as u64, 8) as usize;
        quad.radial = r.int(&mut s, "radial", quad.radial as u64, 1) as usize;
        r.finish(&s);

        let mut s = r.section(&root, "optimizer", trains);
        let optimizer = read_optimizer(&mut r, &mut s);
        r.finish(&s);

        let mut s = r.section(&root, "pde", experiment.uses_pde());
        let pde = read_pde(&mut r, &mut s, d);
        r.finish(&s);

        let problem = read_problem(&mut r, &root, experiment, d);

        for k in root.keys().map(String::as_str) {
            let known = ["experiment", "dimension", "output", "threads", "record_timing"].contains(&k)
                || (k == "kind" && experiment.takes_kind())
                || ["net", "quadrature", "optimizer", "pde"].contains(&k)
                || experiment.sections().contains(&k);
            if known {
                continue;
            }
            if Experiment::ALL.iter().any(|e| e.sections().contains(&k)) {
                r.errors.push(format!("section `[{k}]` does not apply to experiment `{}`", experiment.name()));
            } else {
                r.errors.push(format!("unknown key `{k}`"));
            }
        }
        if !r.errors.is_empty() {
            return Err(ConfigError { errors: r.errors });
        }
        Ok(ExperimentConfig {
            experiment,
            dimension,
            output,
            threads,
            record_timing,
            kind,
            net,
            group_file,
            quad,
            optimizer,
            pde,
            problem,
        })
    }
}

/// A group file holds one row-major `d × d` matrix per line.
pub fn read_group(path: &Path, d: usize) -> Result<SymmetryGroup, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut elements = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| format!("line {}: bad number `{t}`", i + 1)))
            .collect::<Result<_, _>>()?;
        if row.len() != d * d {
            return Err(format!("line {}: expected {} entries, found {}", i + 1, d * d, row.len()));
        }
        elements.push(row);
    }
    SymmetryGroup::new(d, elements).map_err(|e| e.to_string())
}

fn read_optimizer(r: &mut Reader, s: &mut Section) -> Optimizer {
    let method = r.string(s, "method").unwrap_or_else(|| "lbfgs".into());
    let positive = |v: f64| v > 0.0;
    let nonneg = |v: f64| v >= 0.0;
    match method.as_str() {
        "adam" => {
            let d = AdamConfig::default();
            Optimizer::Adam(AdamConfig {
                lr: r.float(s, "lr", d.lr, positive, "a positive number"),
                beta1: r.float(s, "beta1", d.beta1, |v| (0.0..1.0).contains(&v), "in [0, 1)"),
                beta2: r.float(s, "beta2", d.beta2, |v| (0.0..1.0).contains(&v), "in [0, 1)"),
                eps: r.float(s, "eps", d.eps, positive, "a positive number"),
                grad_tol: r.float(s, "grad_tol", d.grad_tol, nonneg, "a non-negative number"),
                max_iter: r.int(s, "max_iter", d.max_iter as u64, 0) as usize,
            })
        }
        other => {
            if other != "lbfgs" {
                r.errors.push(format!("`optimizer.method` must be `lbfgs` or `adam` (got `{other}`)"));
            }
            let d = LbfgsConfig::default();
            let fb = d.stall_fallback.clone().unwrap_or_default();
            let mut c = LbfgsConfig {
                history: r.int(s, "history", d.history as u64, 1) as usize,
                c1: r.float(s, "c1", d.c1, |v| v > 0.0 && v < 1.0, "in (0, 1)"),
                c2: r.float(s, "c2", d.c2, |v| v > 0.0 && v < 1.0, "in (0, 1)"),
                grad_tol: r.float(s, "grad_tol", d.grad_tol, nonneg, "a non-negative number"),
                f_tol: r.float(s, "f_tol", d.f_tol, nonneg, "a non-negative number"),
                max_iter: r.int(s, "max_iter", d.max_iter as u64, 0) as usize,
                max_line_search: r.int(s, "max_line_search", d.max_line_search as u64, 1) as usize,
                stall_fallback: None,
            };
            if c.c1 >= c.c2 {
                r.errors.push("`optimizer.c1` must be smaller than `optimizer.c2`".into());
            }
            if r.boolean(s, "stall_fallback", true) {
                c.stall_fallback = Some(AdamConfig {
                    lr: r.float(s, "fallback_lr", fb.lr, positive, "a positive number"),
                    max_iter: r.int(s, "fallback_iter", fb.max_iter as u64, 1) as usize,
                    ..fb
                });
            }
            Optimizer::Lbfgs(c)
        }
    }
}

fn read_pde(r: &mut Reader, s: &mut Section, d: usize) -> PdeSettings {
    let m = MfsConfig::default();
    let g = GalerkinConfig::for_dim(d);
    let positive = |v: f64| v > 0.0;
    let mfs = MfsConfig {
        n0: r.int(s, "mfs_n0", m.n0 as u64, 4) as usize,
        eps0: r.float(s, "mfs_eps0", m.eps0, positive, "a positive number"),
        tol: r.float(s, "mfs_tol", m.tol, positive, "a positive number"),
        max_rounds: r.int(s, "mfs_max_rounds", m.max_rounds as u64, 1) as usize,
        fit_factor: r.int(s, "mfs_fit_factor", m.fit_factor as u64, 1) as usize,
        check_factor: r.int(s, "mfs_check_factor", m.check_factor as u64, 1) as usize,
        max_sources: r.int(s, "mfs_max_sources", m.max_sources as u64, 4) as usize,
    };
    if let Some(k) = r.string(s, "kernel") {
        if k != "wendland" {
            r.errors.push(format!("`pde.kernel` must be `wendland` (got `{k}`)"));
        }
    }
    let galerkin = GalerkinConfig {
        n_centers: r.int(s, "centers", g.n_centers as u64, 4) as usize,
        support_factor: r.float(s, "support_factor", g.support_factor, positive, "a positive number"),
        penalty: r.float(s, "alpha", g.penalty, positive, "a positive number"),
        sphere_nodes: r.opt_int(s, "galerkin_sphere", 8).map(|v| v as usize),
        radial_nodes: r.opt_int(s, "galerkin_radial", 1).map(|v| v as usize),
    };
    let max_restarts = r.int(s, "max_restarts", 5, 0) as usize;
    PdeSettings { mfs, galerkin, max_restarts }
}

fn read_fit(r: &mut Reader, s: &mut Section, d: usize) -> FitSettings {
    FitSettings {
        target: r.target(s, "target", Target::Ball(1.0), d),
        sigma: r.float(s, "sigma", 0.0, |v| v >= 0.0, "a non-negative number"),
        n_samples: r.int(s, "n_samples", 1000, 1) as usize,
        data_seed: r.int(s, "data_seed", 1, 0),
        accuracy_samples: r.int(s, "accuracy_samples", 10_000, 16) as usize,
        track_accuracy: r.boolean(s, "track_accuracy", true),
    }
}

fn read_problem(r: &mut Reader, root: &Table, e: Experiment, d: usize) -> Problem {
    let mut s = r.section(root, e.sections()[0], true);
    let problem = match e {
        Experiment::Fit => Problem::Fit(read_fit(r, &mut s, d)),
        Experiment::FitStats => {
            let fit = read_fit(r, &mut s, d);
            r.finish(&s);
            s = r.section(root, "fit-stats", true);
            let sigmas = r.floats(&mut s, "sigmas");
            let counts = r.floats(&mut s, "sample_counts");
            let sweep = match (sigmas, counts) {
                (Some(_), Some(_)) => {
                    r.errors.push("`fit-stats.sigmas` and `fit-stats.sample_counts` are mutually exclusive".into());
                    Sweep::Sigma(vec![0.0])
                }
                (None, Some(c)) => {
                    if c.is_empty() || c.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
                        r.errors.push("`fit-stats.sample_counts` must be a non-empty list of positive integers".into());
                    }
                    Sweep::Samples(c.iter().map(|&v| v.max(1.0) as usize).collect())
                }
                (sig, None) => {
                    let sig = sig.unwrap_or_else(|| vec![0.0, 0.01, 0.05, 0.1]);
                    if sig.is_empty() || sig.iter().any(|v| *v < 0.0) {
                        r.errors.push("`fit-stats.sigmas` must be a non-empty list of non-negative numbers".into());
                    }
                    Sweep::Sigma(sig)
                }
            };
            let repeats = r.int(&mut s, "repeats", 100, 3) as usize;
            let seed = r.int(&mut s, "seed", 0, 0);
            Problem::FitStats { fit, sweep, repeats, seed }
        }
        Experiment::Poisson => {
            let source = r.string(&mut s, "f").unwrap_or_else(|| POISSON_DEFAULT_SOURCES[0].to_string());
            if let Err(err) = convexnet::expr::Expr::parse(&source) {
                r.errors.push(format!("`poisson.f`: {err}"));
            }
            Problem::Poisson { source }
        }
        Experiment::TorsionGradient => {
            let normalization = match r.string(&mut s, "normalization").as_deref() {
                None | Some("volume") => Normalization::Volume,
                Some("perimeter") => Normalization::Perimeter,
                Some(other) => {
                    r.errors.push(format!(
                        "`torsion-gradient.normalization` must be `volume` or `perimeter` (got `{other}`)"
                    ));
                    Normalization::Volume
                }
            };
            let mut e1 = vec![0.0; d];
            e1[0] = 1.0;
            let x_star = r.floats(&mut s, "x_star").unwrap_or(e1);
            if x_star.len() != d || x_star.iter().all(|v| *v == 0.0) {
                r.errors.push(format!("`torsion-gradient.x_star` must be a non-zero vector with {d} entries"));
            }
            Problem::TorsionGradient { normalization, x_star }
        }
        Experiment::Minkowski => {
            let target = match r.string(&mut s, "g_target") {
                None => CurvatureTarget::Ellipsoid([1.3, 1.0, 0.8, 0.9][..d].to_vec()),
                Some(t) if t.trim_start().starts_with("ellipsoid") => match Target::parse(&t) {
                    Ok(Target::Ellipsoid(a)) if a.len() == d => CurvatureTarget::Ellipsoid(a),
                    _ => {
                        r.errors.push(format!("`minkowski.g_target`: expected `ellipsoid:a1,…,a{d}`"));
                        CurvatureTarget::Ellipsoid(vec![1.0; d])
                    }
                },
                Some(t) => {
                    if let Err(err) = convexnet::expr::Expr::parse(&t) {
                        r.errors.push(format!("`minkowski.g_target`: {err}"));
                    }
                    CurvatureTarget::Expr(t)
                }
            };
            Problem::Minkowski { target }
        }
        Experiment::Mahler => Problem::Mahler { starts: r.int(&mut s, "starts", 1, 1) as usize },
        Experiment::SaintVenant => Problem::SaintVenant,
        Experiment::UatCheck => {
            let polytope = r.target(&mut s, "polytope", Target::Cube, d);
            if !matches!(polytope, Target::Cube | Target::Octahedron | Target::Simplex) {
                r.errors.push("`uat-check.polytope` must be cube, octahedron or simplex".into());
            }
            let betas = r.floats(&mut s, "betas").unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3]);
            if betas.is_empty() || betas.iter().any(|b| *b <= 0.0) {
                r.errors.push("`uat-check.betas` must be a non-empty list of positive numbers".into());
            }
            let samples = r.int(&mut s, "samples", 10_000, 16) as usize;
            Problem::UatCheck { polytope, betas, samples }
        }
        Experiment::PdeCheck => {
            let body = r.target(&mut s, "body", Target::Ball(1.0), d);
            let solver = match r.string(&mut s, "solver").as_deref() {
                None | Some("mfs") => PdeSolver::Mfs,
                Some("galerkin") => PdeSolver::Galerkin,
                Some("both") => PdeSolver::Both,
                Some(other) => {
                    r.errors.push(format!("`pde-check.solver` must be mfs, galerkin or both (got `{other}`)"));
                    PdeSolver::Mfs
                }
            };
            Problem::PdeCheck { body, solver }
        }
    };
    r.finish(&s);
    problem
}

// ---------------------------------------------------------------------------
// writing

fn int(v: usize) -> Value {
    Value::Integer(v as i64)
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| Value::Float(*x)).collect())
}

fn target_text(t: &Target) -> String {
    match t {
        Target::Ball(r) => format!("ball:{r:?}"),
        Target::Ellipsoid(a) => {
            format!("ellipsoid:{}", a.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(","))
        }
        other => other.name().to_string(),
    }
}

fn fit_table(f: &FitSettings) -> Table {
    let mut t = Table::new();
    t.insert("target".into(), Value::String(target_text(&f.target)));
    t.insert("sigma".into(), Value::Float(f.sigma));
    t.insert("n_samples".into(), int(f.n_samples));
    t.insert("data_seed".into(), Value::Integer(f.data_seed as i64));
    t.insert("accuracy_samples".into(), int(f.accuracy_samples));
    t.insert("track_accuracy".into(), Value::Boolean(f.track_accuracy));
    t
}

impl ExperimentConfig {
    /// The config with every default filled in. Parsing it back yields an
    /// identical config.
    pub fn resolved(&self) -> String {
        let mut root = Table::new();
        root.insert("experiment".into(), Value::String(self.experiment.name().into()));
        root.insert("dimension".into(), int(self.dimension));
        root.insert("output".into(), Value::String(self.output.display().to_string()));
        root.insert("threads".into(), int(self.threads));
        root.insert("record_timing".into(), Value::Boolean(self.record_timing));
        if self.experiment.takes_kind() {
            root.insert("kind".into(), Value::String(self.kind.name().into()));
        }
        if self.experiment.trains() {
            let mut t = Table::new();
            t.insert("m".into(), int(self.net.m));
            t.insert("seed".into(), Value::Integer(self.net.seed as i64));
            if let Some(n) = self.net.symmetry {
                t.insert("symmetry".into(), int(n));
            }
            if let Some(p) = &self.group_file {
                t.insert("group_file".into(), Value::String(p.display().to_string()));
            }
            root.insert("net".into(), Value::Table(t));
        }
        let mut t = Table::new();
        t.insert("sphere".into(), int(self.quad.sphere));
        t.insert("radial".into(), int(self.quad.radial));
        root.insert("quadrature".into(), Value::Table(t));
        if self.experiment.trains() {
            let mut t = Table::new();
            match &self.optimizer {
                Optimizer::Lbfgs(c) => {
                    t.insert("method".into(), Value::String("lbfgs".into()));
                    t.insert("history".into(), int(c.history));
                    t.insert("c1".into(), Value::Float(c.c1));
                    t.insert("c2".into(), Value::Float(c.c2));
                    t.insert("grad_tol".into(), Value::Float(c.grad_tol));
                    t.insert("f_tol".into(), Value::Float(c.f_tol));
                    t.insert("max_iter".into(), int(c.max_iter));
                    t.insert("max_line_search".into(), int(c.max_line_search));
                    t.insert("stall_fallback".into(), Value::Boolean(c.stall_fallback.is_some()));
                    if let Some(a) = &c.stall_fallback {
                        t.insert("fallback_lr".into(), Value::Float(a.lr));
                        t.insert("fallback_iter".into(), int(a.max_iter));
                    }
                }
                Optimizer::Adam(c) => {
                    t.insert("method".into(), Value::String("adam".into()));
                    t.insert("lr".into(), Value::Float(c.lr));
                    t.insert("beta1".into(), Value::Float(c.beta1));
                    t.insert("beta2".into(), Value::Float(c.beta2));
                    t.insert("eps".into(), Value::Float(c.eps));
                    t.insert("grad_tol".into(), Value::Float(c.grad_tol));
                    t.insert("max_iter".into(), int(c.max_iter));
                }
            }
            root.insert("optimizer".into(), Value::Table(t));
        }
        if self.experiment.uses_pde() {
            let (m, g) = (&self.pde.mfs, &self.pde.galerkin);
            let mut t = Table::new();
            t.insert("mfs_n0".into(), int(m.n0));
            t.insert("mfs_eps0".into(), Value::Float(m.eps0));
            t.insert("mfs_tol".into(), Value::Float(m.tol));
            t.insert("mfs_max_rounds".into(), int(m.max_rounds));
            t.insert("mfs_fit_factor".into(), int(m.fit_factor));
            t.insert("mfs_check_factor".into(), int(m.check_factor));
            t.insert("mfs_max_sources".into(), int(m.max_sources));
            t.insert("kernel".into(), Value::String("wendland".into()));
            t.insert("centers".into(), int(g.n_centers));
            t.insert("support_factor".into(), Value::Float(g.support_factor));
            t.insert("alpha".into(), Value::Float(g.penalty));
            if let Some(n) = g.sphere_nodes {
                t.insert("galerkin_sphere".into(), int(n));
            }
            if let Some(n) = g.radial_nodes {
                t.insert("galerkin_radial".into(), int(n));
            }
            t.insert("max_restarts".into(), int(self.pde.max_restarts));
            root.insert("pde".into(), Value::Table(t));
        }
        let section = self.experiment.sections()[0].to_string();
        let mut t = Table::new();
        match &self.problem {
            Problem::Fit(f) => t = fit_table(f),
            Problem::FitStats { fit, sweep, repeats, seed } => {
                root.insert("fit".into(), Value::Table(fit_table(fit)));
                let mut s = Table::new();
                match sweep {
                    Sweep::Sigma(v) => s.insert("sigmas".into(), floats(v)),
                    Sweep::Samples(v) => {
                        s.insert("sample_counts".into(), Value::Array(v.iter().map(|&n| int(n)).collect()))
                    }
                };
                s.insert("repeats".into(), int(*repeats));
                s.insert("seed".into(), Value::Integer(*seed as i64));
                root.insert("fit-stats".into(), Value::Table(s));
            }
            Problem::Poisson { source } => {
                t.insert("f".into(), Value::String(source.clone()));
            }
            Problem::TorsionGradient { normalization, x_star } => {
                let n = match normalization {
                    Normalization::Volume => "volume",
                    Normalization::Perimeter => "perimeter",
                };
                t.insert("normalization".into(), Value::String(n.into()));
                t.insert("x_star".into(), floats(x_star));
            }
            Problem::Minkowski { target } => {
                let g = match target {
                    CurvatureTarget::Ellipsoid(a) => target_text(&Target::Ellipsoid(a.clone())),
                    CurvatureTarget::Expr(e) => e.clone(),
                };
                t.insert("g_target".into(), Value::String(g));
            }
            Problem::Mahler { starts } => {
                t.insert("starts".into(), int(*starts));
            }
            Problem::SaintVenant => {}
            Problem::UatCheck { polytope, betas, samples } => {
                t.insert("polytope".into(), Value::String(target_text(polytope)));
                t.insert("betas".into(), floats(betas));
                t.insert("samples".into(), int(*samples));
            }
            Problem::PdeCheck { body, solver } => {
                t.insert("body".into(), Value::String(target_text(body)));
                let s = match solver {
                    PdeSolver::Mfs => "mfs",
                    PdeSolver::Galerkin => "galerkin",
                    PdeSolver::Both => "both",
                };
                t.insert("solver".into(), Value::String(s.into()));
            }
        }
        if !matches!(self.problem, Problem::FitStats { .. } | Problem::SaintVenant) {
            root.insert(section, Value::Table(t));
        }
        toml::to_string(&root).expect("config tables serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::parse(text, Path::new("."))
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse("experiment = \"fit\"\n").unwrap();
        assert_eq!(c.dimension, 2);
        assert_eq!(c.net.m, 64);
        assert_eq!(c.quad, QuadSpec { sphere: 512, radial: 4 });
        assert!(matches!(c.problem, Problem::Fit(ref f) if f.target == Target::Ball(1.0) && f.n_samples == 1000));
    }

    #[test]
    fn every_error_is_reported() {
        let text = "experiment = \"fit\"\ndimension = 7\ncolour = 3\n[net]\nm = 0\nwidth = 2\n[fit]\nsigma = -1\n";
        let e = parse(text).unwrap_err();
        let all = e.errors.join("\n");
        for needle in ["dimension", "colour", "net.m", "net.width", "fit.sigma"] {
            assert!(all.contains(needle), "missing `{needle}` in\n{all}");
        }
        assert_eq!(e.errors.len(), 5);
    }

    #[test]
    fn misplaced_sections_and_keys() {
        let e = parse("experiment = \"fit\"\nkind = \"support\"\n[mahler]\nstarts = 2\n").unwrap_err();
        assert_eq!(e.errors.len(), 2, "{e}");
        let e = parse("experiment = \"pde-check\"\n[optimizer]\nmax_iter = 3\n").unwrap_err();
        assert!(e.errors[0].contains("optimizer"));
        assert!(parse("experiment = \"nope\"\n").unwrap_err().errors[0].contains("unknown experiment"));
        assert!(parse("experiment = \"fit\"\n[optimizer]\nmethod = \"sgd\"\n").is_err());
    }

    #[test]
    fn resolved_round_trips() {
        let texts = [
            "experiment = \"fit\"\ndimension = 3\n[fit]\ntarget = \"octahedron\"\nsigma = 0.01\n",
            "experiment = \"fit-stats\"\n[fit-stats]\nsample_counts = [100, 200]\nrepeats = 5\n",
            "experiment = \"mahler\"\n[net]\nsymmetry = 5\n[mahler]\nstarts = 3\n",
            "experiment = \"torsion-gradient\"\nkind = \"support\"\n[torsion-gradient]\nnormalization = \"perimeter\"\n",
            "experiment = \"minkowski\"\ndimension = 3\n[minkowski]\ng_target = \"1 + 0.1*x1^2\"\n",
            "experiment = \"pde-check\"\n[pde-check]\nbody = \"ellipsoid:1.2,0.7\"\nsolver = \"both\"\n[pde]\nalpha = 500\n",
            "experiment = \"uat-check\"\ndimension = 3\n[uat-check]\npolytope = \"simplex\"\n",
            "experiment = \"saint-venant\"\n[optimizer]\nmethod = \"adam\"\nlr = 0.05\n",
            "experiment = \"poisson\"\n[poisson]\nf = \"x - 0.1\"\n",
        ];
        for text in texts {
            let c = parse(text).unwrap();
            let again = parse(&c.resolved()).unwrap();
            assert_eq!(c, again, "{text}");
            assert_eq!(c.resolved(), again.resolved());
        }
    }

    #[test]
    fn group_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        std::fs::write(&p, "# C2\n1 0 0 1\n-1 0 0 -1\n").unwrap();
        let g = read_group(&p, 2).unwrap();
        assert_eq!(g.len(), 2);
        std::fs::write(&p, "1 0 0 1\n0 1 1\n").unwrap();
        assert!(read_group(&p, 2).unwrap_err().contains("line 2"));
        let c = ExperimentConfig::parse("experiment = \"fit\"\n[net]\ngroup_file = \"g.txt\"\n", dir.path());
        assert!(c.is_err());
    }
}
