//! Command-line front end: scene files, subcommands and run manifests.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::capacity::{capacity_lp, outer_capacity_lp, CapacityEstimate, GridSpec, OUTER_DILATION};
use crate::config::{generate_lattice_config, powerlaw_classifier, Ball, BallConfig, GeneratorSpec};
use crate::error::Error;
use crate::kernel::{Kernel, Point, QuasimetricSample};
use crate::montecarlo::{hit_probability, probe_csv, zero_one_probe, SimParams};
use crate::wiener::{classify, csv_number, shell_capacities, Thresholds};

/// Exit status of a successful run.
pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MALFORMED: i32 = 3;
pub const EXIT_SCHEMA: i32 = 4;
pub const EXIT_OVERLAP: i32 = 5;
pub const EXIT_DIMENSION: i32 = 6;

const MANIFEST_FILE: &str = "manifest.json";
const KERNEL_CHECK_SAMPLES: usize = 64;
/// Atoms per ball for the shell capacities of `classify` and `wiener`.
const SERIES_BOUNDARY_POINTS: usize = 400;
const DEFAULT_PROBE_DISTANCES: [f64; 3] = [10.0, 40.0, 160.0];

/// Why a scene file was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum SceneError {
    Malformed(String),
    Schema(String),
    Overlap { first: usize, second: usize },
    DimensionMismatch { expected: usize, got: usize },
}

impl SceneError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SceneError::Malformed(_) => EXIT_MALFORMED,
            SceneError::Schema(_) => EXIT_SCHEMA,
            SceneError::Overlap { .. } => EXIT_OVERLAP,
            SceneError::DimensionMismatch { .. } => EXIT_DIMENSION,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            SceneError::Malformed(_) => "malformed_scene",
            SceneError::Schema(_) => "schema_violation",
            SceneError::Overlap { .. } => "overlap",
            SceneError::DimensionMismatch { .. } => "dimension_mismatch",
        }
    }
}

impl fmt::Display for SceneError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneError::Malformed(m) => write!(f, "malformed scene: {m}"),
            SceneError::Schema(m) => write!(f, "scene schema violation: {m}"),
            SceneError::Overlap { first, second } => write!(f, "balls {first} and {second} overlap"),
            SceneError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: kernel has d = {expected}, scene has {got}")
            }
        }
    }
}

impl std::error::Error for SceneError {}

/// Overrides of the per-command defaults carried by a scene.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDefaults {
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub sim: Option<SimParams>,
    #[serde(default)]
    pub wiener: Option<WienerDefaults>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WienerDefaults {
    #[serde(rename = "R")]
    pub r: f64,
    pub gamma: f64,
    pub n_shells: u32,
}

impl Default for WienerDefaults {
    fn default() -> Self {
        Self { r: 1.0, gamma: 2.0, n_shells: 8 }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    kernel: Kernel,
    x0: Point,
    #[serde(default)]
    balls: Option<Vec<Ball>>,
    #[serde(default)]
    generator: Option<GeneratorSpec>,
    #[serde(default)]
    defaults: SceneDefaults,
}

/// A validated scene.
#[derive(Debug, Clone)]
pub struct Scene {
    pub kernel: Kernel,
    pub x0: Point,
    pub config: BallConfig,
    pub defaults: SceneDefaults,
    /// Hex SHA-256 of the canonical scene JSON.
    pub digest: String,
}

/// Sorted-key compact JSON of a document; whitespace and key order do not
/// affect it.
pub fn canonical_json(bytes: &[u8]) -> Result<String, SceneError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| SceneError::Malformed(e.to_string()))?;
    Ok(value.to_string())
}

pub fn parse_scene(bytes: &[u8]) -> Result<Scene, SceneError> {
    let text = std::str::from_utf8(bytes).map_err(|e| SceneError::Malformed(format!("not UTF-8: {e}")))?;
    let canonical = canonical_json(text.as_bytes())?;
    let digest = hex::encode(Sha256::digest(canonical.as_bytes()));
    let file: SceneFile = serde_json::from_str(text).map_err(|e| {
        if e.is_data() {
            SceneError::Schema(e.to_string())
        } else {
            SceneError::Malformed(e.to_string())
        }
    })?;

    let d = file.kernel.d();
    if file.x0.dim() != d {
        return Err(SceneError::DimensionMismatch { expected: d, got: file.x0.dim() });
    }
    let config = match (file.balls, file.generator) {
        (Some(_), Some(_)) => return Err(SceneError::Schema("both \"balls\" and \"generator\" are present".into())),
        (None, None) => return Err(SceneError::Schema("one of \"balls\" or \"generator\" is required".into())),
        (Some(balls), None) => {
            if let Some(b) = balls.iter().find(|b| b.dim() != d) {
                return Err(SceneError::DimensionMismatch { expected: d, got: b.dim() });
            }
            BallConfig::explicit(file.x0.clone(), balls).map_err(scene_error)?
        }
        (None, Some(spec)) => generate_lattice_config(&file.kernel, &spec, file.x0.clone()).map_err(scene_error)?,
    };
    Ok(Scene { kernel: file.kernel, x0: file.x0, config, defaults: file.defaults, digest })
}

fn scene_error(e: Error) -> SceneError {
    match e {
        Error::Overlap { first, second } => SceneError::Overlap { first, second },
        Error::DimensionMismatch { expected, got } => SceneError::DimensionMismatch { expected, got },
        other => SceneError::Schema(other.to_string()),
    }
}

/// Record written next to the outputs of every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub scene_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub points_sha256: Option<String>,
    pub seed: u64,
    pub version: String,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
}

#[derive(Parser, Debug)]
#[command(name = "potentia", version, about = "Avoidability of ball configurations for Riesz kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Doubling constant and triangle-property scan on sampled points.
    KernelCheck(Opts),
    /// LP capacity of the scene's balls.
    Capacity(Opts),
    /// Avoidability verdict.
    Classify(Opts),
    /// Shell series table and verdict.
    Wiener(Opts),
    /// Hitting probability from --start.
    Simulate(Opts),
    /// Hitting probabilities at increasing distances from x0.
    Probe(Opts),
    /// Chain metric of the kernel quasimetric on a points file.
    Metrize(Opts),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::KernelCheck(_) => "kernel-check",
            Command::Capacity(_) => "capacity",
            Command::Classify(_) => "classify",
            Command::Wiener(_) => "wiener",
            Command::Simulate(_) => "simulate",
            Command::Probe(_) => "probe",
            Command::Metrize(_) => "metrize",
        }
    }

    fn opts(&self) -> &Opts {
        match self {
            Command::KernelCheck(o)
            | Command::Capacity(o)
            | Command::Classify(o)
            | Command::Wiener(o)
            | Command::Simulate(o)
            | Command::Probe(o)
            | Command::Metrize(o) => o,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Opts {
    #[arg(long, value_name = "PATH")]
    scene: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long = "r-esc")]
    r_esc: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long = "n-shells")]
    n_shells: Option<u32>,
    /// Start point, comma separated.
    #[arg(long, value_name = "CSV")]
    start: Option<String>,
    #[arg(long = "grid-boundary")]
    grid_boundary: Option<usize>,
    #[arg(long = "grid-layers")]
    grid_layers: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Points file for metrize: one comma separated point per line.
    #[arg(long, value_name = "PATH")]
    points: Option<PathBuf>,
    /// Probe distances, comma separated.
    #[arg(long, value_name = "CSV")]
    distances: Option<String>,
}

enum Failure {
    Scene(SceneError),
    Compute(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

impl From<SceneError> for Failure {
    fn from(e: SceneError) -> Self {
        Failure::Scene(e)
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Scene(e) => e.exit_code(),
            Failure::Compute(_) | Failure::Io(_) => EXIT_COMPUTATION,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let (kind, message) = match self {
            Failure::Scene(e) => (e.kind().to_string(), e.to_string()),
            Failure::Compute(e) => (error_kind(e).to_string(), e.to_string()),
            Failure::Io(m) => ("io".to_string(), m.clone()),
        };
        json!({ "error": kind, "message": message, "exit_code": self.exit_code() })
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidKernel(_) => "invalid_kernel",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::DegenerateInput(_) => "degenerate_input",
        Error::Overlap { .. } => "overlap",
        Error::InvalidConfiguration(_) => "invalid_configuration",
        Error::InvalidParameters(_) => "invalid_parameters",
        Error::Computation(_) => "computation",
    }
}

/// Runs the CLI with process stdout and stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_command_with_io(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the CLI, writing the primary output to `out` and diagnostics to
/// `err`; returns the exit code.
pub fn run_command_with_io<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let arguments = recorded_arguments(&argv);
    match with_thread_cap(|| execute(&cli.command, arguments)) {
        Ok(artifacts) => {
            let _ = out.write_all(artifacts.stdout.as_bytes());
            for note in &artifacts.notes {
                let _ = writeln!(err, "{note}");
            }
            EXIT_OK
        }
        Err(f) => {
            let _ = writeln!(err, "{}", f.to_json());
            f.exit_code()
        }
    }
}

fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let cap = std::env::var("POTENTIA_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Arguments after the program name, without the output directory.
fn recorded_arguments(argv: &[OsString]) -> Vec<String> {
    let mut args = Vec::new();
    let mut it = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned());
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
        } else if !a.starts_with("--out=") {
            args.push(a);
        }
    }
    args
}

struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    stdout: String,
    notes: Vec<String>,
}

impl Artifacts {
    fn single(name: &str, body: String) -> Self {
        Self { files: vec![(name.to_string(), body.clone().into_bytes())], stdout: body, notes: Vec::new() }
    }
}

fn execute(command: &Command, arguments: Vec<String>) -> Result<Artifacts, Failure> {
    let opts = command.opts();
    let bytes = fs::read(&opts.scene).map_err(|e| Failure::Io(format!("{}: {e}", opts.scene.display())))?;
    let scene = parse_scene(&bytes)?;
    let sim = sim_params(&scene, opts);
    let mut points_sha256 = None;

    let artifacts = match command {
        Command::KernelCheck(_) => kernel_check(&scene, sim.seed)?,
        Command::Capacity(_) => capacity(&scene, opts)?,
        Command::Classify(_) => classify_scene(&scene, opts, false)?,
        Command::Wiener(_) => classify_scene(&scene, opts, true)?,
        Command::Simulate(_) => simulate(&scene, opts, &sim)?,
        Command::Probe(_) => probe(&scene, opts, &sim)?,
        Command::Metrize(_) => {
            let path = opts
                .points
                .as_ref()
                .ok_or_else(|| Error::InvalidParameters("metrize requires --points".into()))?;
            let text = fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            points_sha256 = Some(hex::encode(Sha256::digest(&text)));
            metrize(&scene, opts, &String::from_utf8_lossy(&text))?
        }
    };

    fs::create_dir_all(&opts.out).map_err(|e| Failure::Io(format!("{}: {e}", opts.out.display())))?;
    let mut outputs = Vec::new();
    for (name, body) in &artifacts.files {
        write_file(&opts.out.join(name), body)?;
        outputs.push(name.clone());
    }
    outputs.push(MANIFEST_FILE.to_string());
    let manifest = RunManifest {
        command: command.name().to_string(),
        arguments,
        scene_sha256: scene.digest.clone(),
        points_sha256,
        seed: sim.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Io(e.to_string()))?;
    text.push('\n');
    write_file(&opts.out.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(artifacts)
}

fn write_file(path: &Path, body: &[u8]) -> Result<(), Failure> {
    fs::write(path, body).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn sim_params(scene: &Scene, opts: &Opts) -> SimParams {
    let mut p = scene.defaults.sim.unwrap_or_default();
    if let Some(s) = opts.seed {
        p.seed = s;
    }
    if let Some(n) = opts.paths {
        p.paths = n;
    }
    if let Some(r) = opts.r_esc {
        p.r_esc = Some(r);
    }
    p
}

fn grid_spec(scene: &Scene, opts: &Opts, fallback: GridSpec) -> GridSpec {
    let mut g = scene.defaults.grid.unwrap_or(fallback);
    if let Some(n) = opts.grid_boundary {
        g.boundary_points = n;
    }
    if let Some(n) = opts.grid_layers {
        g.radial_layers = n;
    }
    g
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameters(format!("{what}: cannot parse {:?} as a number", s.trim())))
        })
        .collect()
}

fn kernel_check(scene: &Scene, seed: u64) -> Result<Artifacts, Failure> {
    let k = &scene.kernel;
    let half = scene.config.reach().max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point> = (0..KERNEL_CHECK_SAMPLES)
        .map(|_| {
            let c: Vec<f64> =
                scene.x0.coords().iter().map(|x| x + rng.random_range(-half..half)).collect();
            Point::new(c)
        })
        .collect::<Result<_, _>>()?;
    let sample = QuasimetricSample::from_kernel(k, points)?;
    let triangle = sample.triangle_property_constant()?;
    let radii: Vec<f64> = (0..8).map(|i| half * 2f64.powi(i - 4)).collect();
    let doubling_observed = radii.iter().map(|&r| k.g(r / 2.0) / k.g(r)).fold(0.0, f64::max);
    let report = json!({
        "kernel": k,
        "doubling_constant": k.doubling_constant(),
        "doubling_observed": doubling_observed,
        "doubling_radii": radii,
        "comparison_constant": k.comparison_constant(),
        "samples": KERNEL_CHECK_SAMPLES,
        "sample_half_width": half,
        "triangle_property_constant": triangle,
        "triangle_property_bound": k.doubling_constant(),
        "seed": seed,
    });
    Ok(Artifacts::single("kernel_check.json", to_json(&report)?))
}

fn capacity(scene: &Scene, opts: &Opts) -> Result<Artifacts, Failure> {
    let grid = grid_spec(scene, opts, GridSpec::for_kernel(&scene.kernel));
    let balls = scene.config.materialize()?;
    let inner = capacity_lp(&balls, &scene.kernel, &grid)?;
    let outer = outer_capacity_lp(&balls, &scene.kernel, &grid, OUTER_DILATION)?;
    #[derive(Serialize)]
    struct Report<'a> {
        balls: usize,
        grid: GridSpec,
        capacity: CapacityEstimate,
        outer_dilation: f64,
        outer_capacity: CapacityEstimate,
        warnings: &'a [String],
    }
    let report = Report {
        balls: balls.len(),
        grid,
        capacity: inner,
        outer_dilation: OUTER_DILATION,
        outer_capacity: outer,
        warnings: scene.config.warnings(),
    };
    Ok(Artifacts::single("capacity.json", to_json(&report)?))
}

fn classify_scene(scene: &Scene, opts: &Opts, emit_series: bool) -> Result<Artifacts, Failure> {
    let w = scene.defaults.wiener.unwrap_or_default();
    let gamma = opts.gamma.unwrap_or(w.gamma);
    let n_max = opts.n_shells.unwrap_or(w.n_shells);
    let mut fallback = GridSpec::for_kernel(&scene.kernel);
    fallback.boundary_points = fallback.boundary_points.min(SERIES_BOUNDARY_POINTS);
    let grid = grid_spec(scene, opts, fallback);
    let report = shell_capacities(&scene.config, &scene.kernel, w.r, gamma, n_max, &grid)?;
    let closed_form = match scene.config.generator() {
        Some(g) => Some(powerlaw_classifier(scene.kernel.d(), scene.kernel.alpha(), g.phi.beta)?),
        None => None,
    };
    let th = Thresholds::default();
    let verdict = classify(&report, closed_form, &th);
    let verdict_doc = json!({
        "verdict": verdict,
        "R": w.r,
        "gamma": gamma,
        "n_shells": n_max,
        "thresholds": th,
        "series_total": report.partial_sums.last().copied().unwrap_or(0.0),
    });
    let verdict_text = to_json(&verdict_doc)?;
    if !emit_series {
        return Ok(Artifacts::single("verdict.json", verdict_text));
    }
    let (name, table) = match opts.format {
        Format::Csv => ("series.csv", report.to_csv()),
        Format::Json => ("series.json", to_json(&report)?),
    };
    let kind = serde_json::to_value(verdict.kind).map_err(|e| Failure::Io(e.to_string()))?;
    Ok(Artifacts {
        files: vec![(name.to_string(), table.clone().into_bytes()), ("verdict.json".to_string(), verdict_text.into_bytes())],
        stdout: table,
        notes: vec![format!("verdict: {}", kind.as_str().unwrap_or("?"))],
    })
}

fn simulate(scene: &Scene, opts: &Opts, sim: &SimParams) -> Result<Artifacts, Failure> {
    let start = match &opts.start {
        Some(text) => {
            let c = parse_list(text, "--start")?;
            if c.len() != scene.kernel.d() {
                return Err(Error::DimensionMismatch { expected: scene.kernel.d(), got: c.len() }.into());
            }
            Point::new(c)?
        }
        None => scene.x0.clone(),
    };
    let est = hit_probability(&scene.config, &scene.kernel, &start, sim)?;
    let report = json!({ "start": start, "estimate": est });
    Ok(Artifacts::single("simulate.json", to_json(&report)?))
}

fn probe(scene: &Scene, opts: &Opts, sim: &SimParams) -> Result<Artifacts, Failure> {
    let distances = match &opts.distances {
        Some(text) => parse_list(text, "--distances")?,
        None => DEFAULT_PROBE_DISTANCES.to_vec(),
    };
    let table = zero_one_probe(&scene.config, &scene.kernel, &distances, sim)?;
    Ok(match opts.format {
        Format::Csv => Artifacts::single("probe.csv", probe_csv(&table)),
        Format::Json => {
            let rows: Vec<_> = table.iter().map(|(l, e)| json!({ "distance": l, "estimate": e })).collect();
            Artifacts::single("probe.json", to_json(&rows)?)
        }
    })
}

fn metrize(scene: &Scene, opts: &Opts, text: &str) -> Result<Artifacts, Failure> {
    let d = scene.kernel.d();
    let mut points = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let c = parse_list(line, "points file")?;
        if c.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: c.len() }.into());
        }
        points.push(Point::new(c)?);
    }
    let gamma = opts.gamma.unwrap_or(scene.kernel.exponent());
    let sample = QuasimetricSample::from_kernel(&scene.kernel, points)?;
    let m = sample.frink_metrize(gamma)?;
    let triangle = sample.triangle_property_constant()?;
    let n = sample.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                worst = worst.max(m.metric[i][j] - m.metric[i][k] - m.metric[k][j]);
            }
        }
    }
    let mut csv = String::new();
    for row in &m.metric {
        let cells: Vec<String> = row.iter().map(|x| csv_number(*x)).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    let report = json!({
        "points": n,
        "gamma": gamma,
        "distortion": m.distortion,
        "triangle_property_constant": triangle,
        "triangle_property_bound": scene.kernel.doubling_constant(),
        "max_triangle_excess": worst,
    });
    let text = to_json(&report)?;
    Ok(Artifacts {
        files: vec![("metrize.json".to_string(), text.clone().into_bytes()), ("metric.csv".to_string(), csv.into_bytes())],
        stdout: text,
        notes: Vec::new(),
    })
}
