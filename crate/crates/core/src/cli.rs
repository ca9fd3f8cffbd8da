//! Command-line driver: configured sweeps, device-style measurements,
//! phase clustering and cone analysis, all with reproducible artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluator::Backend;
use crate::lightcone::{check_eligibility, Limits};
use crate::models::{ModelKind, ModelSpec};
use crate::optimizer::{grid, sweep, BfgsOptions, SweepOptions, SweepRecord};
use crate::pauli::PauliString;
use crate::phase::{
    bound_circuit, fidelity_matrix, order_parameter_curve, overlap_sampled, records_spec, spectral_cluster,
    FidelityMatrix,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_FILE: &str = "sweep.jsonl";
pub const ENERGY_FILE: &str = "energy.csv";
pub const FIDELITY_FILE: &str = "fidelity.csv";
pub const LABELS_FILE: &str = "labels.csv";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_true")]
    pub warm_start: bool,
    #[serde(default = "default_true")]
    pub bidirectional: bool,
    /// Shallower depths optimized first, each seeding the next.
    #[serde(default)]
    pub seed_depths: Vec<usize>,
}

fn default_tol() -> f64 {
    1e-6
}

fn default_max_iter() -> usize {
    500
}

fn default_true() -> bool {
    true
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            tol: default_tol(),
            max_iter: default_max_iter(),
            warm_start: true,
            bidirectional: true,
            seed_depths: Vec::new(),
        }
    }
}

/// A run description, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    /// `N` for the chain, `L` for the lattice.
    pub size: usize,
    pub depth: usize,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .filter(|_| e.message().contains("field"))
                .unwrap_or("config")
                .to_string();
            Error::validation(field, e.message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.model, self.size, self.depth)
    }

    pub fn backend(&self) -> Result<Backend> {
        Ok(self.backend.unwrap_or(self.spec()?.default_backend()))
    }

    pub fn grid_points(&self) -> Result<Vec<f64>> {
        grid(self.grid.start, self.grid.stop, self.grid.step)
    }

    /// Checks every field; errors name the offending one.
    pub fn validate(&self) -> Result<()> {
        match self.model {
            ModelKind::Cluster if self.size < 3 => {
                return Err(Error::validation("size", format!("cluster chain needs N ≥ 3, got {}", self.size)))
            }
            ModelKind::Toric if self.size < 2 => {
                return Err(Error::validation("size", format!("toric lattice needs L ≥ 2, got {}", self.size)))
            }
            _ => {}
        }
        if self.model == ModelKind::Toric && self.depth == 0 {
            return Err(Error::validation("depth", "toric ansatz needs D ≥ 1"));
        }
        let spec = self.spec().map_err(|e| Error::validation("size", e.to_string()))?;
        let n = spec.n_qubits()?;
        if n > crate::pauli::MAX_QUBITS {
            return Err(Error::validation("size", format!("{n} qubits exceeds {}", crate::pauli::MAX_QUBITS)));
        }
        let g = self.grid;
        if !(g.start.is_finite() && g.stop.is_finite() && g.step.is_finite()) {
            return Err(Error::validation("grid", "start, stop and step must be finite"));
        }
        if g.step <= 0.0 {
            return Err(Error::validation("grid.step", format!("step must be positive, got {}", g.step)));
        }
        if g.stop < g.start {
            return Err(Error::validation("grid.stop", "stop lies below start"));
        }
        self.grid_points()?;
        if self.model == ModelKind::Toric && self.backend == Some(Backend::Cone) {
            return Err(Error::validation(
                "backend",
                "cone evaluation needs an in-circuit preparation; use heisenberg or full for the toric model",
            ));
        }
        if self.shots == Some(0) {
            return Err(Error::validation("shots", "shots must be positive"));
        }
        let o = &self.optimizer;
        if !(o.tol > 0.0 && o.tol.is_finite()) {
            return Err(Error::validation("optimizer.tol", "tolerance must be positive"));
        }
        if o.max_iter == 0 {
            return Err(Error::validation("optimizer.max_iter", "must be positive"));
        }
        if o.seed_depths.windows(2).any(|w| w[1] <= w[0]) || o.seed_depths.last().is_some_and(|&d| d >= self.depth) {
            return Err(Error::validation(
                "optimizer.seed_depths",
                "seed depths must increase and stay below `depth`",
            ));
        }
        if self.model == ModelKind::Toric && o.seed_depths.contains(&0) {
            return Err(Error::validation("optimizer.seed_depths", "toric ansatz needs D ≥ 1"));
        }
        Ok(())
    }

    fn sweep_options(&self) -> Result<SweepOptions> {
        let mut opts = SweepOptions::new(self.backend()?);
        opts.seed = self.seed;
        opts.warm_start = self.optimizer.warm_start;
        opts.bidirectional = self.optimizer.bidirectional;
        opts.bfgs = BfgsOptions {
            tol: self.optimizer.tol,
            max_iter: self.optimizer.max_iter,
        };
        Ok(opts)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactValue {
    pub coupling: f64,
    pub quantity: String,
    pub value: f64,
    pub reason: String,
}

/// Known exact values a run can be checked against.
pub fn exact_values(spec: &ModelSpec) -> Vec<ExactValue> {
    match spec.kind {
        ModelKind::Cluster => vec![ExactValue {
            coupling: 0.0,
            quantity: "energy".into(),
            value: -(spec.size as f64 - 2.0),
            reason: "cluster state stabilizes every K term".into(),
        }],
        ModelKind::Toric => {
            let l = spec.size as f64;
            vec![
                ExactValue {
                    coupling: 0.0,
                    quantity: "energy".into(),
                    value: -2.0 * l * (l - 1.0),
                    reason: "toric code ground state stabilizes every star and plaquette".into(),
                },
                ExactValue {
                    coupling: 0.0,
                    quantity: "wilson".into(),
                    value: 1.0,
                    reason: "initial state is the +1 eigenstate of the logical Z loop".into(),
                },
            ]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    /// Per depth, per grid point.
    pub point_seconds: Vec<Vec<f64>>,
}

/// Everything needed to repeat a run: the config itself, its hash, the
/// build version and the optimized parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub config: RunConfig,
    pub backend: Backend,
    pub records: Vec<SweepRecord>,
    pub timings: Timings,
    pub exact_values: Vec<ExactValue>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = fs::read_to_string(&file)
            .map_err(|e| Error::InvalidArgument(format!("cannot read manifest {}: {e}", file.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Records at the configured (deepest) depth.
    pub fn final_records(&self) -> Vec<SweepRecord> {
        self.records.iter().filter(|r| r.depth == self.config.depth).cloned().collect()
    }

    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.error.is_none() && r.result.converged)
    }
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn energy_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("coupling,depth,energy,grad_norm,converged\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.coupling, r.depth, r.result.energy, r.result.grad_norm, r.result.converged
        );
    }
    out
}

pub fn sweep_jsonl(records: &[SweepRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Runs the configured sweep, including any shallower seeding depths.
pub fn run_optimize(cfg: &RunConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let started = Instant::now();
    let couplings = cfg.grid_points()?;
    let opts = cfg.sweep_options()?;
    let base = cfg.spec()?;
    let mut records: Vec<SweepRecord> = Vec::new();
    let mut point_seconds = Vec::new();
    let mut previous: Option<Vec<SweepRecord>> = None;
    for depth in cfg.optimizer.seed_depths.iter().copied().chain([cfg.depth]) {
        let spec = base.with_depth(depth);
        let recs = sweep(&spec, &couplings, &opts, previous.as_deref())?;
        if let Some(failed) = recs.iter().find_map(|r| r.error.as_ref()) {
            if failed.contains("resource limit") {
                return Err(Error::Resource(failed.clone()));
            }
        }
        point_seconds.push(recs.iter().map(|r| r.result.wall_time).collect());
        records.extend(recs.iter().cloned());
        previous = Some(recs);
    }
    Ok(RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: config_hash(cfg),
        config: cfg.clone(),
        backend: opts.backend,
        records,
        timings: Timings {
            total_seconds: started.elapsed().as_secs_f64(),
            point_seconds,
        },
        exact_values: exact_values(&base),
    })
}

pub fn write_run(manifest: &RunManifest, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(manifest)? + "\n")?;
    fs::write(out.join(SWEEP_FILE), sweep_jsonl(&manifest.records)?)?;
    fs::write(out.join(ENERGY_FILE), energy_csv(&manifest.records))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Observable {
    Omega,
    Wilson,
    Custom(String),
}

impl Observable {
    pub fn parse(text: &str) -> Self {
        match text.trim().to_ascii_lowercase().as_str() {
            "omega" => Observable::Omega,
            "wilson" => Observable::Wilson,
            _ => Observable::Custom(text.trim().to_string()),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Observable::Omega => "omega",
            Observable::Wilson => "wilson",
            Observable::Custom(_) => "custom",
        }
    }

    pub fn resolve(&self, spec: &ModelSpec) -> Result<PauliString> {
        match (self, spec.kind) {
            (Observable::Omega, ModelKind::Cluster) | (Observable::Wilson, ModelKind::Toric) => spec.order_parameter(),
            (Observable::Omega, ModelKind::Toric) => {
                Err(Error::InvalidArgument("omega is defined for the cluster model only".into()))
            }
            (Observable::Wilson, ModelKind::Cluster) => {
                Err(Error::InvalidArgument("wilson is defined for the toric model only".into()))
            }
            (Observable::Custom(text), _) => {
                let n = spec.n_qubits()?;
                let p = PauliString::parse(n, text)?;
                Ok(p)
            }
        }
    }
}

pub fn measure_csv(manifest: &RunManifest, observable: &Observable, shots: Option<u64>, seed: u64) -> Result<String> {
    let records = manifest.final_records();
    let spec = records_spec(&records)?;
    let op = observable.resolve(&spec)?;
    let curve = order_parameter_curve(&records, &op, shots, seed)?;
    let mut out = String::from("coupling,value");
    if shots.is_some() {
        out.push_str(",sampled_mean,std_error,shots,seed");
    }
    out.push('\n');
    for p in curve {
        let _ = write!(out, "{},{}", p.coupling, p.value);
        if let Some(s) = p.sampled {
            let _ = write!(out, ",{},{},{},{}", s.mean, s.std_error, s.shots, s.seed);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Fidelity matrix, exact or from compute-uncompute sampling.
pub fn cluster_fidelity(records: &[SweepRecord], shots: Option<u64>, seed: u64) -> Result<FidelityMatrix> {
    if records.len() < 2 {
        return Err(Error::InvalidArgument("clustering needs at least 2 grid points".into()));
    }
    let Some(shots) = shots else {
        return fidelity_matrix(records);
    };
    let spec = records_spec(records)?;
    let circuits = records
        .iter()
        .map(|r| bound_circuit(&spec, r))
        .collect::<Result<Vec<_>>>()?;
    let n = records.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let estimates = pairs
        .par_iter()
        .map(|&(i, j)| {
            let pair_seed = seed.wrapping_add((i * n + j) as u64);
            overlap_sampled(&circuits[i], &circuits[j], shots, pair_seed).map(|e| e.fidelity)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![vec![1.0; n]; n];
    for (&(i, j), f) in pairs.iter().zip(estimates) {
        values[i][j] = f;
        values[j][i] = f;
    }
    Ok(FidelityMatrix {
        grid: records.iter().map(|r| r.coupling).collect(),
        values,
    })
}

/// Returns (fidelity CSV, labels CSV).
pub fn cluster_csvs(manifest: &RunManifest, shots: Option<u64>, seed: u64) -> Result<(String, String)> {
    let f = cluster_fidelity(&manifest.final_records(), shots, seed)?;
    let labels = spectral_cluster(&f, 2, seed)?;
    Ok((f.to_csv(), labels.to_csv()))
}

pub fn analyze_report(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let coupling = cfg.grid.start;
    let report = check_eligibility(&spec.ansatz(coupling)?, &spec.hamiltonian(coupling)?, &Limits::default())?;
    Ok(format!(
        "{} model, size {}, depth {}, {} qubits\n{report}\n",
        spec.kind,
        spec.size,
        spec.depth,
        spec.n_qubits()?
    ))
}

#[derive(Debug, Parser)]
#[command(name = "covqe", version, about = "Classically optimized VQE sweeps, measurements and phase clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonFlags {
    /// Overrides the seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Shot budget per measured point; exact values only when absent.
    #[arg(long)]
    pub shots: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize a coupling sweep from a TOML config (or rerun a manifest).
    Optimize {
        #[arg(long)]
        config: PathBuf,
        /// Exit 0 even when some points did not converge.
        #[arg(long)]
        allow_partial: bool,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Evaluate an observable on the optimized states of a run.
    Measure {
        /// Run directory or manifest file.
        #[arg(long)]
        manifest: PathBuf,
        /// `omega`, `wilson`, or a Pauli string such as "Z0 X1 Z2".
        #[arg(long, default_value = "omega")]
        observable: String,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Fidelity matrix and two-phase spectral clustering of a run.
    Cluster {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Print the causal-cone profile and tractability verdict.
    Analyze {
        #[arg(long)]
        config: PathBuf,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation { .. } => EXIT_VALIDATION,
        Error::Resource(_) => EXIT_RESOURCE,
        _ => EXIT_OTHER,
    }
}

/// Reads a TOML config, or the config embedded in a manifest.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::validation("config", format!("cannot read {}: {e}", path.display())))?;
    if let Ok(m) = serde_json::from_str::<RunManifest>(&text) {
        m.config.validate()?;
        return Ok(m.config);
    }
    RunConfig::from_toml(&text)
}

fn out_dir(flag: Option<PathBuf>, fallback: Option<PathBuf>) -> PathBuf {
    flag.or(fallback).unwrap_or_else(|| PathBuf::from("."))
}

fn manifest_dir(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

/// Runs one command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Optimize {
            config,
            allow_partial,
            common,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if common.shots.is_some() {
                cfg.shots = common.shots;
            }
            cfg.validate()?;
            let out = out_dir(common.out, cfg.output.clone());
            let manifest = run_optimize(&cfg)?;
            write_run(&manifest, &out)?;
            let failed = manifest.records.iter().filter(|r| !r.result.converged || r.error.is_some()).count();
            eprintln!(
                "{} points optimized in {:.1} s, {failed} not converged; wrote {}",
                manifest.records.len(),
                manifest.timings.total_seconds,
                out.display()
            );
            Ok(if failed > 0 && !allow_partial { EXIT_NOT_CONVERGED } else { EXIT_OK })
        }
        Command::Measure {
            manifest,
            observable,
            common,
        } => {
            let m = RunManifest::load(&manifest)?;
            let obs = Observable::parse(&observable);
            let shots = common.shots.or(m.config.shots);
            let seed = common.seed.unwrap_or(m.config.seed);
            let csv = measure_csv(&m, &obs, shots, seed)?;
            let out = out_dir(common.out, Some(manifest_dir(&manifest)));
            fs::create_dir_all(&out)?;
            let path = out.join(format!("measure_{}.csv", obs.name()));
            fs::write(&path, csv)?;
            eprintln!("wrote {}", path.display());
            Ok(EXIT_OK)
        }
        Command::Cluster { manifest, common } => {
            let m = RunManifest::load(&manifest)?;
            let seed = common.seed.unwrap_or(m.config.seed);
            let (fid, labels) = cluster_csvs(&m, common.shots, seed)?;
            let out = out_dir(common.out, Some(manifest_dir(&manifest)));
            fs::create_dir_all(&out)?;
            fs::write(out.join(FIDELITY_FILE), fid)?;
            fs::write(out.join(LABELS_FILE), &labels)?;
            print!("{labels}");
            Ok(EXIT_OK)
        }
        Command::Analyze { config } => {
            print!("{}", analyze_report(&load_config(&config)?)?);
            Ok(EXIT_OK)
        }
    }
}
