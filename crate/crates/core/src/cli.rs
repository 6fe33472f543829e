//! Command-line front end. Every subcommand reads a JSON system config,
//! writes its artifacts to `--out-dir` under fixed names and lists them in
//! `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flow::{check_positive_invariance, InvarianceReport, PiecewisePath, SampleClock};
use crate::lie::{check_larc_with, GeneratorSet, LarcCheck};
use crate::pdmp::{
    ensemble_occupation, simulate_into, support_estimate, verify_support_inclusion, EmpiricalMeasure, RunSummary,
    Stream, SupportReport,
};
use crate::reach::{
    accessible_set, build_reach_graph, control_sets, discretize, domain_of_attraction, local_accessible_set, CellSet,
    ControlSetReport, DomainOfAttraction, GraphStats, ReachGraph,
};
use crate::sysdef::{AnalysisDefaults, HybridState, InvarianceWarning, SwitchingSystem, SystemConfig};

pub const REPORT: &str = "report.json";
pub const MEASURE: &str = "measure.json";
pub const PATHS: &str = "paths.csv";
pub const MANIFEST: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "pdmp", version, about = "Randomly switched ODEs: simulation, invariant control sets, support checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one trajectory and write it as CSV.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compute control sets of the cell reachability graph.
    #[command(allow_negative_numbers = true)]
    ControlSets {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        /// Neighborhood radius (cells) for local accessible sets.
        #[arg(long)]
        inflation: Option<usize>,
    },
    /// Estimate the time-occupation measure of an ensemble.
    #[command(allow_negative_numbers = true)]
    Measure {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Independent runs merged into the measure.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Check that the occupation measure lives on the invariant classes.
    #[command(allow_negative_numbers = true)]
    VerifySupport {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        inflation: Option<usize>,
    },
    /// Rank of the evaluated Lie algebra at sample points.
    #[command(allow_negative_numbers = true)]
    LieRank {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Points as `x0,x1;y0,y1;...`. Defaults to a 3-per-axis lattice of the box.
        #[arg(long)]
        points: Option<String>,
    },
    /// Integrate every mode from boundary samples and report exits from the box.
    #[command(allow_negative_numbers = true)]
    InvarianceAudit {
        #[command(flatten)]
        common: Common,
        /// Boundary samples per axis.
        #[arg(long, default_value_t = 9)]
        n_boundary: usize,
        #[arg(long)]
        horizon: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Cell edge length.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Sample points per cell.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long)]
    sample_dt: Option<f64>,
    /// Initial point, comma separated.
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    #[arg(long)]
    mode0: Option<usize>,
}

/// Effective parameters after merging flags, config defaults and built-in
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode0: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inflation: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_boundary: Option<usize>,
}

/// Every report carries the run identity next to its payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope<T> {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub params: Params,
    pub result: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_path: String,
    pub config_hash: String,
    pub params: Params,
    pub artifacts: Vec<String>,
    pub duration_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateResult {
    pub summary: RunSummary,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassAnalysis {
    pub class: usize,
    pub domain: DomainOfAttraction,
    pub local_accessible: CellSet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSetsResult {
    pub control_sets: ControlSetReport,
    pub graph: GraphStats,
    pub flagged_cells: Vec<usize>,
    pub accessible_set: CellSet,
    pub invariant_classes: Vec<ClassAnalysis>,
    pub invariance_warnings: Vec<InvarianceWarning>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureResult {
    pub runs: usize,
    pub total_weight: f64,
    pub support_size: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyResult {
    pub invariant_classes: usize,
    pub support: SupportReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LieResult {
    pub full: LarcCheck,
    pub control_affine: LarcCheck,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 for usage or validation errors, 1
/// for runtime failures.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

struct Loaded {
    path: PathBuf,
    hash: String,
    sys: SwitchingSystem,
    defaults: AnalysisDefaults,
}

fn load(path: &Path) -> Result<Loaded> {
    let bytes = fs::read(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::config("--config", "config is not UTF-8"))?;
    let cfg = SystemConfig::parse(&text)?;
    let sys = cfg.build()?;
    Ok(Loaded {
        path: path.to_path_buf(),
        hash: hex::encode(Sha256::digest(&bytes)),
        sys,
        defaults: cfg.analysis.unwrap_or_default(),
    })
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::arg(name, format!("must be positive, got {v}")))
    }
}

fn default_h(sys: &SwitchingSystem) -> f64 {
    let widths: Vec<f64> = sys.lo().iter().zip(sys.hi()).map(|(l, h)| h - l).collect();
    widths.iter().copied().fold(f64::INFINITY, f64::min) / 100.0
}

struct Ctx {
    name: &'static str,
    loaded: Loaded,
    out_dir: PathBuf,
    params: Params,
    artifacts: Vec<String>,
    started: Instant,
}

impl Ctx {
    fn new(name: &'static str, common: &Common) -> Result<Self> {
        let loaded = load(&common.config)?;
        if common.workers == Some(0) {
            return Err(Error::arg("workers", "need at least one worker"));
        }
        let seed = common.seed.or(loaded.defaults.seed).unwrap_or(0);
        fs::create_dir_all(&common.out_dir)?;
        Ok(Self {
            name,
            loaded,
            out_dir: common.out_dir.clone(),
            params: Params { seed, ..Default::default() },
            artifacts: Vec::new(),
            started: Instant::now(),
        })
    }

    fn sys(&self) -> &SwitchingSystem {
        &self.loaded.sys
    }

    fn grid_params(&mut self, g: &GridArgs) -> Result<()> {
        let d = &self.loaded.defaults;
        self.params.h = Some(positive("h", g.h.or(d.h).unwrap_or_else(|| default_h(&self.loaded.sys)))?);
        self.params.tau = Some(positive("tau", g.tau.or(d.tau).unwrap_or(0.5))?);
        let samples = g.samples.or(d.samples).unwrap_or(1);
        if samples == 0 {
            return Err(Error::arg("samples", "need at least one sample per cell"));
        }
        self.params.samples = Some(samples);
        Ok(())
    }

    fn run_params(&mut self, r: &RunArgs) -> Result<()> {
        let d = &self.loaded.defaults;
        let sys = &self.loaded.sys;
        let horizon = positive("horizon", r.horizon.or(d.horizon).unwrap_or(1e4 / sys.lambda()))?;
        let burn_in = r.burn_in.or(d.burn_in).unwrap_or(0.1 * horizon);
        if !(burn_in >= 0.0 && burn_in < horizon) {
            return Err(Error::arg("burn_in", format!("must lie in [0, horizon), got {burn_in}")));
        }
        let sample_dt = positive("sample_dt", r.sample_dt.or(d.sample_dt).unwrap_or(0.01))?;
        let x0 =
            r.x0.clone()
                .or_else(|| d.x0.clone())
                .unwrap_or_else(|| sys.lo().iter().zip(sys.hi()).map(|(l, h)| 0.5 * (l + h)).collect());
        if x0.len() != sys.dim() {
            return Err(Error::arg("x0", format!("expected {} coordinates, got {}", sys.dim(), x0.len())));
        }
        let mode0 = r.mode0.or(d.mode0).unwrap_or(0);
        if mode0 >= sys.modes() {
            return Err(Error::arg("mode0", format!("mode {mode0} out of range")));
        }
        self.params.horizon = Some(horizon);
        self.params.burn_in = Some(burn_in);
        self.params.sample_dt = Some(sample_dt);
        self.params.x0 = Some(x0);
        self.params.mode0 = Some(mode0);
        Ok(())
    }

    fn z0(&self) -> HybridState {
        HybridState::new(self.params.x0.clone().expect("run params"), self.params.mode0.expect("run params"))
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        fs::write(self.out_dir.join(name), contents)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn report<T: Serialize>(&mut self, result: T) -> Result<()> {
        let env = Envelope {
            command: self.name.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.params.seed,
            config_hash: self.loaded.hash.clone(),
            params: self.params.clone(),
            result,
        };
        let text = serde_json::to_string_pretty(&env)?;
        self.write(REPORT, text.as_bytes())
    }

    fn measure(&mut self, mut m: EmpiricalMeasure) -> Result<()> {
        m.seed = Some(self.params.seed);
        m.config_hash = Some(self.loaded.hash.clone());
        let text = m.to_json();
        self.write(MEASURE, text.as_bytes())
    }

    fn finish(mut self) -> Result<()> {
        self.artifacts.push(MANIFEST.to_string());
        let manifest = RunManifest {
            command: self.name.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_path: self.loaded.path.display().to_string(),
            config_hash: self.loaded.hash.clone(),
            params: self.params.clone(),
            artifacts: self.artifacts.clone(),
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        fs::write(self.out_dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::arg("workers", e.to_string()))?
            .install(f),
    }
}

fn execute(command: Command) -> Result<()> {
    let workers = match &command {
        Command::Simulate { common, .. }
        | Command::ControlSets { common, .. }
        | Command::Measure { common, .. }
        | Command::VerifySupport { common, .. }
        | Command::LieRank { common, .. }
        | Command::InvarianceAudit { common, .. } => common.workers,
    };
    with_workers(workers, move || match command {
        Command::Simulate { common, run } => cmd_simulate(&common, &run),
        Command::ControlSets { common, grid, inflation } => cmd_control_sets(&common, &grid, inflation),
        Command::Measure { common, grid, run, runs, threshold } => cmd_measure(&common, &grid, &run, runs, threshold),
        Command::VerifySupport { common, grid, run, runs, threshold, inflation } => {
            cmd_verify(&common, &grid, &run, runs, threshold, inflation)
        }
        Command::LieRank { common, depth, points } => cmd_lie(&common, depth, points.as_deref()),
        Command::InvarianceAudit { common, n_boundary, horizon } => cmd_audit(&common, n_boundary, horizon),
    })
}

fn cmd_simulate(common: &Common, run: &RunArgs) -> Result<()> {
    let mut ctx = Ctx::new("simulate", common)?;
    ctx.run_params(run)?;
    let sys = ctx.sys().clone();
    let mut path = PiecewisePath::new(sys.dim());
    let clock = SampleClock::Uniform(ctx.params.sample_dt.expect("set"));
    let summary = simulate_into(
        &sys,
        &ctx.z0(),
        ctx.params.horizon.expect("set"),
        &clock,
        &mut Stream::new(ctx.params.seed, 0),
        &mut path,
        |_| {},
    )?;
    path.max_excursion = summary.max_excursion;
    let mut csv = Vec::new();
    path.write_csv(&mut csv)?;
    ctx.write(PATHS, &csv)?;
    ctx.report(SimulateResult { summary, samples: path.len() })?;
    ctx.finish()
}

fn graph_for(ctx: &Ctx) -> Result<ReachGraph> {
    let sys = ctx.sys();
    let grid = discretize(&sys.bounds(), &[ctx.params.h.expect("set")])?;
    build_reach_graph(sys, &grid, ctx.params.tau.expect("set"), ctx.params.samples.expect("set"))
}

fn cmd_control_sets(common: &Common, g: &GridArgs, inflation: Option<usize>) -> Result<()> {
    let mut ctx = Ctx::new("control-sets", common)?;
    ctx.grid_params(g)?;
    let inflation = inflation.or(ctx.loaded.defaults.inflation).unwrap_or(2);
    ctx.params.inflation = Some(inflation);
    let graph = graph_for(&ctx)?;
    let report = control_sets(&graph);
    let invariant_classes = report
        .invariant()
        .map(|(k, c)| {
            Ok(ClassAnalysis {
                class: k,
                domain: domain_of_attraction(&graph, &report, k)?,
                local_accessible: local_accessible_set(&graph, &c.cells, inflation),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let result = ControlSetsResult {
        graph: graph.stats(),
        flagged_cells: graph.flagged.clone(),
        accessible_set: accessible_set(&graph),
        invariant_classes,
        invariance_warnings: ctx.sys().invariance_warnings().to_vec(),
        control_sets: report,
    };
    ctx.report(result)?;
    ctx.finish()
}

fn ensemble(ctx: &Ctx, runs: usize) -> Result<EmpiricalMeasure> {
    if runs == 0 {
        return Err(Error::arg("runs", "need at least one run"));
    }
    let sys = ctx.sys();
    let grid = discretize(&sys.bounds(), &[ctx.params.h.expect("set")])?;
    let starts = vec![ctx.z0(); runs];
    let p = &ctx.params;
    ensemble_occupation(
        sys,
        &grid,
        &starts,
        p.horizon.expect("set"),
        p.burn_in.expect("set"),
        p.sample_dt.expect("set"),
        p.seed,
    )
}

fn threshold_param(ctx: &mut Ctx, threshold: Option<f64>) -> Result<f64> {
    let t = threshold.or(ctx.loaded.defaults.threshold).unwrap_or(0.0);
    if !(0.0..1.0).contains(&t) {
        return Err(Error::arg("threshold", format!("must lie in [0, 1), got {t}")));
    }
    ctx.params.threshold = Some(t);
    Ok(t)
}

fn cmd_measure(common: &Common, g: &GridArgs, run: &RunArgs, runs: usize, threshold: Option<f64>) -> Result<()> {
    let mut ctx = Ctx::new("measure", common)?;
    ctx.grid_params(g)?;
    ctx.run_params(run)?;
    let threshold = threshold_param(&mut ctx, threshold)?;
    ctx.params.runs = Some(runs);
    let m = ensemble(&ctx, runs)?;
    let support = support_estimate(&m, threshold)?;
    let result = MeasureResult { runs, total_weight: m.total_weight(), support_size: support.len(), threshold };
    ctx.measure(m)?;
    ctx.report(result)?;
    ctx.finish()
}

fn cmd_verify(
    common: &Common,
    g: &GridArgs,
    run: &RunArgs,
    runs: usize,
    threshold: Option<f64>,
    inflation: Option<usize>,
) -> Result<()> {
    let mut ctx = Ctx::new("verify-support", common)?;
    ctx.grid_params(g)?;
    ctx.run_params(run)?;
    let threshold = threshold_param(&mut ctx, threshold)?;
    let inflation = inflation.or(ctx.loaded.defaults.inflation).unwrap_or(1);
    ctx.params.inflation = Some(inflation);
    ctx.params.runs = Some(runs);
    let graph = graph_for(&ctx)?;
    let report = control_sets(&graph);
    let m = ensemble(&ctx, runs)?;
    let support = verify_support_inclusion(&m, &report, inflation, threshold)?;
    ctx.measure(m)?;
    ctx.report(VerifyResult { invariant_classes: report.invariant_count(), support })?;
    ctx.finish()
}

fn parse_points(text: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|p| {
            let v = p
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| Error::arg("points", format!("`{c}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if v.len() != dim {
                return Err(Error::arg("points", format!("point `{p}` needs {dim} coordinates")));
            }
            Ok(v)
        })
        .collect()
}

fn cmd_lie(common: &Common, depth: usize, points: Option<&str>) -> Result<()> {
    let mut ctx = Ctx::new("lie-rank", common)?;
    ctx.params.depth = Some(depth);
    let sys = ctx.sys().clone();
    let pts = match points {
        Some(text) => parse_points(text, sys.dim())?,
        None => sys.lattice(3),
    };
    if pts.is_empty() {
        return Err(Error::arg("points", "no points given"));
    }
    let result = LieResult {
        full: check_larc_with(&sys, &pts, depth, GeneratorSet::Full),
        control_affine: check_larc_with(&sys, &pts, depth, GeneratorSet::ControlAffine),
    };
    ctx.report(result)?;
    ctx.finish()
}

fn cmd_audit(common: &Common, n_boundary: usize, horizon: Option<f64>) -> Result<()> {
    let mut ctx = Ctx::new("invariance-audit", common)?;
    let horizon = positive("horizon", horizon.or(ctx.loaded.defaults.horizon).unwrap_or(10.0))?;
    if n_boundary == 0 {
        return Err(Error::arg("n_boundary", "need at least one boundary sample"));
    }
    ctx.params.horizon = Some(horizon);
    ctx.params.n_boundary = Some(n_boundary);
    let sys = ctx.sys().clone();
    let report: InvarianceReport = check_positive_invariance(&sys, n_boundary, horizon)?;
    ctx.report(report)?;
    ctx.finish()
}

fn parse_report<T: DeserializeOwned>(text: &str) -> Result<Envelope<T>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| Error::config(format!("report.{}", e.path()), e.into_inner().to_string()))
}

/// Re-reads every artifact listed in `dir/manifest.json` through its schema.
pub fn validate_outputs(dir: &Path) -> Result<RunManifest> {
    let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
    for name in &manifest.artifacts {
        let text = fs::read_to_string(dir.join(name))?;
        match name.as_str() {
            REPORT => {
                let hash = match manifest.command.as_str() {
                    "simulate" => parse_report::<SimulateResult>(&text)?.config_hash,
                    "control-sets" => {
                        let env = parse_report::<ControlSetsResult>(&text)?;
                        env.result.control_sets.validate()?;
                        env.config_hash
                    }
                    "measure" => parse_report::<MeasureResult>(&text)?.config_hash,
                    "verify-support" => parse_report::<VerifyResult>(&text)?.config_hash,
                    "lie-rank" => parse_report::<LieResult>(&text)?.config_hash,
                    "invariance-audit" => parse_report::<InvarianceReport>(&text)?.config_hash,
                    other => return Err(Error::config("manifest.command", format!("unknown command `{other}`"))),
                };
                if hash != manifest.config_hash {
                    return Err(Error::config("report.config_hash", "differs from manifest"));
                }
            }
            MEASURE => {
                let m = EmpiricalMeasure::from_json(&text)?;
                if m.config_hash.as_deref() != Some(manifest.config_hash.as_str()) {
                    return Err(Error::config("measure.config_hash", "differs from manifest"));
                }
            }
            PATHS => {
                PiecewisePath::read_csv(&text)?;
            }
            MANIFEST => {}
            other => return Err(Error::config("manifest.artifacts", format!("unexpected artifact `{other}`"))),
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysdef::presets;

    #[test]
    fn point_lists_parse() {
        assert_eq!(parse_points("1,2; -3,4.5", 2).unwrap(), vec![vec![1.0, 2.0], vec![-3.0, 4.5]]);
        assert!(parse_points("1,2,3", 2).is_err());
        assert!(parse_points("a,b", 2).is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_command(["pdmp", "frobnicate"]), 2);
        assert_eq!(run_command(["pdmp", "simulate"]), 2);
        assert_eq!(run_command(["pdmp", "--help"]), 0);
    }

    #[test]
    fn negative_horizon_names_the_flag() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("tw.json");
        fs::write(&cfg, presets::two_well().to_json()).unwrap();
        let code = run_command([
            "pdmp",
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
            "--horizon",
            "-5",
        ]);
        assert_eq!(code, 2);
    }

    #[test]
    fn missing_config_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let code = run_command([
            "pdmp",
            "lie-rank",
            "--config",
            "/nonexistent/x.json",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, 2);
    }
}
