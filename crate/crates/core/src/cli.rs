//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 pulse design finished below its fidelity goal (results still written).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{load_state, parse_grid, HamiltonianChoice, MatrixFile, RunConfig};
use crate::error::{Error, Result};
use crate::grape::{
    grape_optimize, robustness_report, test_hamiltonian_config, ControlSystem, GrapeConfig, GrapeStatus,
    GrapeTarget, RobustnessReport,
};
use crate::inequality::{
    chsh_sweep, nchv_bound_chsh, nchv_bound_state_independent, state_independent_terms, Evaluator, NchvBoundReport,
    TermValue, Via, STATE_INDEPENDENT_CLASSICAL_BOUND, STATE_INDEPENDENT_QUANTUM_VALUE, TSIRELSON,
};
use crate::moussa::Preparation;
use crate::noise::NoiseParams;
use crate::report::{sweep_csv, sweep_svg, to_json_pretty, write_atomic, SweepSummary};
use crate::state::{level_state, thermal_state, DensityMatrix, SpinSystemConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GOAL_NOT_MET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qho-context", version, about = "Contextuality tests on an NMR-encoded oscillator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ViaArg {
    Direct,
    Moussa,
}

/// Overrides shared by the experiment commands.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Angle grid `start:stop:step`; `pi` expressions are accepted.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[arg(long, value_enum)]
    pub noise: Option<Switch>,
    #[arg(long, value_enum)]
    pub via: Option<ViaArg>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep I_l over the (β, η) grid; writes CSV, JSON and SVG per level.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Oscillator level 0..3 or `all`.
        #[arg(long, default_value = "all")]
        l: String,
    },
    /// Evaluate the six-term state-independent expression.
    StateIndependent {
        #[command(flatten)]
        common: Common,
        /// `thermal`, `mixed`, `ket:<0..3>` or `file:<path>`.
        #[arg(long, default_value = "thermal")]
        state: String,
    },
    /// Enumerate the classical bounds.
    Bounds {
        #[arg(long)]
        json: bool,
    },
    /// Optimize a control sequence for a controlled gate.
    Grape {
        #[command(flatten)]
        common: Common,
        /// `identity`, `cA`, `cB(<β>)`, `cC`, `cD(<η>)` or `cPij`.
        #[arg(long, allow_hyphen_values = true)]
        target: Option<String>,
        /// JSON matrix file with `re`/`im` rows; overrides `--target`.
        #[arg(long)]
        target_file: Option<PathBuf>,
        #[arg(long, value_enum)]
        hamiltonian: Option<HamiltonianArg>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HamiltonianArg {
    Test,
    Molecule,
    /// No drift at all.
    Free,
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code. Human-readable output goes to `stdout`, diagnostics to stderr.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("{e}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

fn config_err(e: Error) -> Failure {
    Failure::Config(e)
}

fn runtime_err(e: Error) -> Failure {
    Failure::Runtime(e)
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(g) = &common.grid {
        let spec = parse_grid(g)?;
        cfg.grid = crate::config::GridConfig {
            start: crate::config::Angle::Radians(spec.start),
            stop: crate::config::Angle::Radians(spec.stop),
            step: crate::config::Angle::Radians(spec.step),
        };
    }
    if let Some(n) = common.noise {
        cfg.noise_enabled = n == Switch::On;
    }
    if let Some(v) = common.via {
        cfg.via = match v {
            ViaArg::Direct => Via::Direct,
            ViaArg::Moussa => Via::Moussa,
        };
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    if cfg.noise_enabled && cfg.via == Via::Direct {
        return Err(Error::Config("noise requires --via moussa".into()));
    }
    Ok(cfg)
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))
}

fn execute(cmd: Command, stdout: &mut dyn Write) -> std::result::Result<i32, Failure> {
    match cmd {
        Command::Sweep { common, l } => cmd_sweep(&common, &l, stdout),
        Command::StateIndependent { common, state } => cmd_state_independent(&common, &state, stdout),
        Command::Bounds { json } => cmd_bounds(json, stdout).map_err(runtime_err),
        Command::Grape { common, target, target_file, hamiltonian, max_iterations } => {
            cmd_grape(&common, target, target_file, hamiltonian, max_iterations, stdout)
        }
    }
}

fn parse_levels(text: &str) -> Result<Vec<usize>> {
    if text == "all" {
        return Ok(vec![0, 1, 2, 3]);
    }
    match text.parse::<usize>() {
        Ok(l) if l <= 3 => Ok(vec![l]),
        _ => Err(Error::Config(format!("--l must be 0..3 or all, got '{text}'"))),
    }
}

fn cmd_sweep(common: &Common, l: &str, stdout: &mut dyn Write) -> std::result::Result<i32, Failure> {
    let cfg = resolve(common).map_err(config_err)?;
    let levels = parse_levels(l).map_err(config_err)?;
    let grid = cfg.grid.spec().map_err(config_err)?;
    prepare_out(&cfg.out).map_err(config_err)?;
    for l in levels {
        let sweep = chsh_sweep(l, &grid, cfg.via, cfg.active_noise()).map_err(runtime_err)?;
        let stem = cfg.out.join(format!("sweep_l{l}"));
        let summary = SweepSummary::new(&sweep, cfg.seed);
        write_atomic(&stem.with_extension("csv"), sweep_csv(&sweep).as_bytes()).map_err(runtime_err)?;
        write_atomic(&stem.with_extension("json"), to_json_pretty(&summary).map_err(runtime_err)?.as_bytes())
            .map_err(runtime_err)?;
        write_atomic(&stem.with_extension("svg"), sweep_svg(&sweep).as_bytes()).map_err(runtime_err)?;
        let _ = writeln!(
            stdout,
            "I_{l}: max {:.6} at (β, η) = ({:.6}, {:.6}); classical bound 2, quantum bound {:.6}",
            sweep.max_value, sweep.argmax.0, sweep.argmax.1, TSIRELSON
        );
    }
    Ok(EXIT_OK)
}

fn state_preparation(spec: &str, cfg: &RunConfig) -> Result<(String, Preparation)> {
    let system = |rho: DensityMatrix| -> Result<Preparation> {
        if rho.dim() != 4 {
            return Err(Error::Config(format!("state must be 4×4, got {}×{}", rho.dim(), rho.dim())));
        }
        Ok(Preparation::System(rho))
    };
    if spec == "thermal" {
        if cfg.molecule.n_spins != 3 {
            return Err(Error::Config("thermal preparation needs a 3-spin molecule".into()));
        }
        let rho = thermal_state(&cfg.molecule, cfg.purity()?)?;
        return Ok(("thermal".into(), Preparation::Register(rho)));
    }
    if spec == "mixed" {
        return Ok(("mixed".into(), system(DensityMatrix::maximally_mixed(2))?));
    }
    if let Some(k) = spec.strip_prefix("ket:") {
        let l: usize = k.parse().map_err(|_| Error::Config(format!("bad ket level '{k}'")))?;
        let rho = level_state(l).map_err(|e| Error::Config(e.to_string()))?;
        return Ok((spec.into(), system(rho)?));
    }
    if let Some(p) = spec.strip_prefix("file:") {
        return Ok((spec.into(), system(load_state(Path::new(p))?)?));
    }
    Err(Error::Config(format!("unknown state '{spec}' (thermal|mixed|ket:<l>|file:<path>)")))
}

#[derive(Serialize)]
struct StateIndependentReport {
    state: String,
    via: String,
    terms: Vec<TermValue>,
    total: f64,
    classical_bound: f64,
    quantum_bound: f64,
    noise: Option<NoiseParams>,
    seed: u64,
}

fn cmd_state_independent(common: &Common, state: &str, stdout: &mut dyn Write) -> std::result::Result<i32, Failure> {
    let cfg = resolve(common).map_err(config_err)?;
    let (label, prep) = state_preparation(state, &cfg).map_err(config_err)?;
    prepare_out(&cfg.out).map_err(config_err)?;
    let eval = Evaluator::new(cfg.via, cfg.active_noise()).map_err(config_err)?;
    let terms = state_independent_terms(&prep, eval).map_err(runtime_err)?;
    let total = terms.iter().map(|t| t.contribution).sum();
    let report = StateIndependentReport {
        state: label,
        via: cfg.via.to_string(),
        terms,
        total,
        classical_bound: STATE_INDEPENDENT_CLASSICAL_BOUND,
        quantum_bound: STATE_INDEPENDENT_QUANTUM_VALUE,
        noise: cfg.active_noise().cloned(),
        seed: cfg.seed,
    };
    let json = to_json_pretty(&report).map_err(runtime_err)?;
    write_atomic(&cfg.out.join("state_independent.json"), json.as_bytes()).map_err(runtime_err)?;
    for t in &report.terms {
        let _ = writeln!(stdout, "{:>2} <{}> = {:+.6}", if t.sign > 0.0 { "+" } else { "-" }, t.term, t.expectation);
    }
    let _ = writeln!(stdout, "total {total:.6} (classical bound 4, quantum value 6)");
    Ok(EXIT_OK)
}

fn write_bound(out: &mut dyn Write, title: &str, r: &NchvBoundReport, quantum: &str) -> std::io::Result<()> {
    writeln!(out, "{title}: {}", r.expression)?;
    writeln!(out, "  variables: {}", r.variables.join(" "))?;
    writeln!(out, "  assignments enumerated: {}", r.enumerated)?;
    writeln!(out, "  classical range: [{}, {}]", r.classical_min, r.classical_max)?;
    writeln!(out, "  maximizing assignments: {}", r.maximizing_assignments.len())?;
    writeln!(out, "  quantum value: {quantum}")
}

fn cmd_bounds(json: bool, stdout: &mut dyn Write) -> Result<i32> {
    let chsh = nchv_bound_chsh();
    let si = nchv_bound_state_independent();
    if json {
        stdout.write_all(to_json_pretty(&[&chsh, &si])?.as_bytes())?;
    } else {
        write_bound(stdout, "CHSH", &chsh, "2.828427124746")?;
        write_bound(stdout, "state-independent", &si, "6")?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct GrapeReport {
    target: String,
    hamiltonian: String,
    status: GrapeStatus,
    goal_met: bool,
    fidelity_goal: f64,
    fidelity: f64,
    iterations: usize,
    n_segments: usize,
    segment_duration: f64,
    total_duration: f64,
    max_amplitude: f64,
    robustness: RobustnessReport,
    history: Vec<f64>,
    seed: u64,
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

fn cmd_grape(
    common: &Common,
    target: Option<String>,
    target_file: Option<PathBuf>,
    hamiltonian: Option<HamiltonianArg>,
    max_iterations: Option<usize>,
    stdout: &mut dyn Write,
) -> std::result::Result<i32, Failure> {
    let cfg = resolve(common).map_err(config_err)?;
    let mut settings = cfg.grape.optimizer.clone();
    settings.seed = cfg.seed;
    if let Some(m) = max_iterations {
        settings.max_iterations = m;
    }
    let target = match (target_file.or(cfg.grape.target_file.clone()), target) {
        (Some(p), _) => GrapeTarget::Custom(MatrixFile::load(&p).map_err(config_err)?),
        (None, Some(t)) => t.parse().map_err(config_err)?,
        (None, None) => cfg.grape.target.parse().map_err(config_err)?,
    };
    if target == GrapeTarget::Identity {
        // the identity is reachable from zero controls without drift
        settings.init_scale = 0.0;
    }
    let (ham_name, molecule) = match hamiltonian.unwrap_or(match cfg.grape.hamiltonian {
        HamiltonianChoice::Test => HamiltonianArg::Test,
        HamiltonianChoice::Molecule => HamiltonianArg::Molecule,
    }) {
        HamiltonianArg::Test => ("test", test_hamiltonian_config()),
        HamiltonianArg::Molecule => ("molecule", cfg.molecule.clone()),
        HamiltonianArg::Free => ("free", SpinSystemConfig::free(3)),
    };
    let unitary = target.unitary().map_err(config_err)?;
    let system = ControlSystem::from_config(&molecule).map_err(config_err)?;
    if unitary.dim() != system.dim() {
        return Err(config_err(Error::Config(format!(
            "target is {}×{}, register needs {}×{}",
            unitary.dim(),
            unitary.dim(),
            system.dim(),
            system.dim()
        ))));
    }
    let gc = GrapeConfig::new(unitary.clone(), settings.clone()).map_err(config_err)?;
    prepare_out(&cfg.out).map_err(config_err)?;

    let outcome = grape_optimize(&gc, &system, None).map_err(runtime_err)?;
    let robustness =
        robustness_report(&outcome.controls, &unitary, &system, &settings.robustness_samples).map_err(runtime_err)?;
    let name = target.name();
    let report = GrapeReport {
        target: name.clone(),
        hamiltonian: ham_name.into(),
        status: outcome.status,
        goal_met: outcome.goal_met(),
        fidelity_goal: settings.fidelity_goal,
        fidelity: outcome.fidelity,
        iterations: outcome.iterations,
        n_segments: outcome.controls.n_segments(),
        segment_duration: outcome.controls.segment_duration,
        total_duration: outcome.controls.total_duration(),
        max_amplitude: outcome.controls.max_amplitude,
        robustness,
        history: outcome.history.clone(),
        seed: outcome.seed,
    };
    let stem = cfg.out.join(format!("grape_{}", file_stem(&name)));
    write_atomic(&stem.with_extension("csv"), outcome.controls.to_csv().as_bytes()).map_err(runtime_err)?;
    let json = to_json_pretty(&report).map_err(runtime_err)?;
    write_atomic(&stem.with_extension("json"), json.as_bytes()).map_err(runtime_err)?;
    let _ = writeln!(
        stdout,
        "{name}: mean fidelity {:.6} after {} iterations ({:?}); per-scale {}",
        report.fidelity,
        report.iterations,
        report.status,
        report
            .robustness
            .samples
            .iter()
            .map(|(k, f)| format!("κ={k}: {f:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(if outcome.goal_met() { EXIT_OK } else { EXIT_GOAL_NOT_MET })
}
