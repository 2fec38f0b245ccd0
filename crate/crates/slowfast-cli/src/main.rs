//! `slowfast`: command-line front end for the slow-fast predator-prey
//! toolkit. Subcommands analyze the critical manifold and canard thresholds,
//! integrate single trajectories, sweep bifurcation diagrams, and sample the
//! singular orbit. Every output opens with a `# config-hash:` line naming
//! the exact effective configuration; runs are byte-for-byte reproducible.

mod config;

use clap::{Args, Parser, Subcommand};
use config::{require, Effective, FileConfig, ModelSection, OutputSection, SimulateSection,
    SingularOrbitSection, SweepSection};
use slowfast_core::bifurcation::{self, BifurcationError};
use slowfast_core::dynamics::{self, DynamicsError, IntegratorControls};
use slowfast_core::manifold::{self, FoldKind, ManifoldError};
use slowfast_core::model::{self, EquilibriumKind, ModelError, Params};
use slowfast_core::normalform::{self, NormalFormError};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "slowfast",
    version,
    about = "Bifurcation toolkit for a slow-fast predator-prey system"
)]
struct Cli {
    /// TOML configuration file; command-line flags override its fields
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write output to this file instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default, Clone)]
struct ModelFlags {
    /// Predator mortality ratio
    #[arg(long)]
    delta: Option<f64>,
    /// Prey survival threshold ratio
    #[arg(long)]
    theta: Option<f64>,
    /// Saturation ratio
    #[arg(long)]
    eta: Option<f64>,
    /// Timescale separation
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args, Default, Clone)]
struct SimFlags {
    #[arg(long)]
    u0: Option<f64>,
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Sampling period for stored rows; omit to store every accepted step
    #[arg(long)]
    sample_every: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
}

#[derive(Args, Default, Clone)]
struct SweepFlags {
    #[arg(long)]
    delta_min: Option<f64>,
    #[arg(long)]
    delta_max: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Transient budget per delta, in slow-time units
    #[arg(long)]
    max_transient: Option<f64>,
    /// Bisect branch endpoints after the grid pass
    #[arg(long)]
    refine: Option<bool>,
}

#[derive(Subcommand)]
enum Command {
    /// Report equilibria, fold points, region, and canard-point thresholds
    Analyze {
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Integrate one trajectory and write t,u,v rows
    Simulate {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        sim: SimFlags,
    },
    /// Classify the attractor over a delta grid and write the diagram
    Sweep {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        sweep: SweepFlags,
    },
    /// Sample the singular relaxation orbit
    SingularOrbit {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        samples_per_segment: Option<usize>,
    },
}

enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}
impl From<ManifoldError> for CliError {
    fn from(e: ManifoldError) -> Self {
        CliError::Numerical(e.to_string())
    }
}
impl From<NormalFormError> for CliError {
    fn from(e: NormalFormError) -> Self {
        CliError::Numerical(e.to_string())
    }
}
impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::Numerical(e.to_string())
    }
}
impl From<BifurcationError> for CliError {
    fn from(e: BifurcationError) -> Self {
        match e {
            BifurcationError::Model(m) => CliError::Validation(m.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}
impl From<String> for CliError {
    fn from(m: String) -> Self {
        CliError::Validation(m)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig, CliError> {
    let Some(p) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(p)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", p.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Validation(format!("invalid config {}: {e}", p.display())))
}

fn write_output(path: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn effective_for(cli_out: Option<PathBuf>, model: ModelFlags, sim: SimFlags, sweep: SweepFlags,
    sos: Option<usize>, file: FileConfig) -> Effective {
    let flags = Effective {
        model: ModelSection {
            delta: model.delta,
            theta: model.theta,
            eta: model.eta,
            epsilon: model.epsilon,
        },
        simulate: SimulateSection {
            u0: sim.u0,
            v0: sim.v0,
            t_end: sim.t_end,
            sample_every: sim.sample_every,
            rtol: sim.rtol,
            atol: sim.atol,
        },
        sweep: SweepSection {
            delta_min: sweep.delta_min,
            delta_max: sweep.delta_max,
            step: sweep.step,
            max_transient: sweep.max_transient,
            refine: sweep.refine,
        },
        singular_orbit: SingularOrbitSection {
            samples_per_segment: sos,
        },
        output: OutputSection { path: cli_out },
    };
    Effective::merge(file, flags)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = load_file_config(&cli.config)?;
    match cli.command {
        Command::Analyze { model } => {
            let eff = effective_for(cli.out, model, SimFlags::default(), SweepFlags::default(),
                None, file);
            cmd_analyze(&eff)
        }
        Command::Simulate { model, sim } => {
            let eff = effective_for(cli.out, model, sim, SweepFlags::default(), None, file);
            cmd_simulate(&eff)
        }
        Command::Sweep { model, sweep } => {
            let eff = effective_for(cli.out, model, SimFlags::default(), sweep, None, file);
            cmd_sweep(&eff)
        }
        Command::SingularOrbit {
            model,
            samples_per_segment,
        } => {
            let eff = effective_for(cli.out, model, SimFlags::default(), SweepFlags::default(),
                samples_per_segment, file);
            cmd_singular_orbit(&eff)
        }
    }
}

fn required_params(m: &ModelSection) -> Result<Params, CliError> {
    let delta = require(m.delta, "model.delta")?;
    let theta = require(m.theta, "model.theta")?;
    let eta = require(m.eta, "model.eta")?;
    let epsilon = require(m.epsilon, "model.epsilon")?;
    Ok(Params::new(delta, theta, eta, epsilon)?)
}

fn cmd_analyze(eff: &Effective) -> Result<(), CliError> {
    let params = required_params(&eff.model)?;
    let hash = eff.hash("analyze");
    let (theta, eta, epsilon) = (params.theta, params.eta, params.epsilon);

    let mut s = format!("# config-hash: {hash:016x}\n");
    let _ = writeln!(s, "command: analyze");
    let _ = writeln!(s, "delta: {}", params.delta);
    let _ = writeln!(s, "theta: {theta}");
    let _ = writeln!(s, "eta: {eta}");
    let _ = writeln!(s, "epsilon: {epsilon}");
    let _ = writeln!(
        s,
        "transcritical-threshold: {:.12e}",
        model::transcritical_threshold(eta)
    );

    for eq in model::equilibria(&params) {
        let kind = match eq.kind {
            EquilibriumKind::Origin => "origin",
            EquilibriumKind::Boundary => "boundary",
            EquilibriumKind::Interior => "interior",
        };
        let branch = eq
            .branch
            .map(|b| format!(" branch={}", b.label()))
            .unwrap_or_default();
        let _ = writeln!(
            s,
            "equilibrium: kind={kind} u={:.12e} v={:.12e} stability={}{branch}",
            eq.u,
            eq.v,
            eq.stability.label()
        );
    }

    let folds = manifold::fold_points(theta, eta);
    let _ = writeln!(s, "fold-count: {}", folds.len());
    for f in &folds {
        let kind = match f.kind {
            FoldKind::LocalMin => "local-min",
            FoldKind::LocalMax => "local-max",
        };
        let _ = writeln!(
            s,
            "fold: u={:.12e} v={:.12e} kind={kind} degenerate={}",
            f.u, f.v, f.degenerate
        );
    }
    let _ = writeln!(s, "region: {}", manifold::classify_region(theta, eta).label());

    if folds.len() != 2 {
        let _ = writeln!(
            s,
            "canard-analysis: not-applicable (requires exactly two fold points)"
        );
    } else {
        let thr = bifurcation::threshold_summary(theta, eta, epsilon)?;
        let summary = normalform::lyapunov_summary(theta, eta, epsilon)?;
        let _ = writeln!(s, "delta-star-left: {:.12e}", thr.delta_h);
        let _ = writeln!(s, "delta-star-right: {:.12e}", thr.delta_q);
        let _ = writeln!(
            s,
            "criticality-left: A={:.12e} ({})",
            thr.a_p,
            normalform::criticality(thr.a_p).label()
        );
        let _ = writeln!(
            s,
            "criticality-right: A={:.12e} ({})",
            thr.a_q,
            normalform::criticality(thr.a_q).label()
        );
        let _ = writeln!(s, "l1-left: {:.12e}", thr.l1_p);
        let _ = writeln!(s, "theta-bautin: {:.12e}", thr.theta_b);
        let _ = writeln!(
            s,
            "b: {:.12e} (off-locus: {})",
            summary.b, summary.b_off_locus
        );
        let _ = writeln!(s, "l2: {:.12e}", summary.l2);
        let _ = writeln!(s, "delta-canard: {:.12e}", thr.delta_c);
        match summary.bautin_transversality {
            Some(det) => {
                let _ = writeln!(s, "bautin-transversality: {det:.12e}");
            }
            None => {
                let _ = writeln!(s, "bautin-transversality: not-available");
            }
        }
    }

    for w in params.warnings() {
        let _ = writeln!(s, "warning: {w}");
    }
    write_output(&eff.output.path, &s)
}

fn positive(v: f64, field: &str) -> Result<f64, CliError> {
    if !v.is_finite() || v <= 0.0 {
        return Err(CliError::Validation(format!(
            "field {field} must be positive and finite, got {v}"
        )));
    }
    Ok(v)
}

fn cmd_simulate(eff: &Effective) -> Result<(), CliError> {
    let params = required_params(&eff.model)?;
    let u0 = positive(require(eff.simulate.u0, "simulate.u0")?, "simulate.u0")?;
    let v0 = positive(require(eff.simulate.v0, "simulate.v0")?, "simulate.v0")?;
    let t_end = positive(require(eff.simulate.t_end, "simulate.t_end")?, "simulate.t_end")?;

    let mut controls = IntegratorControls::default();
    if let Some(r) = eff.simulate.rtol {
        controls.rtol = positive(r, "simulate.rtol")?;
    }
    if let Some(a) = eff.simulate.atol {
        controls.atol = positive(a, "simulate.atol")?;
    }
    if let Some(se) = eff.simulate.sample_every {
        controls.sample_every = Some(positive(se, "simulate.sample_every")?);
    }

    for w in params.warnings() {
        eprintln!("warning: {w}");
    }

    let orbit = dynamics::integrate(&params, u0, v0, t_end, &controls)?;
    let hash = eff.hash("simulate");
    let mut s = format!("# config-hash: {hash:016x}\n");
    s.push_str(&orbit.to_csv());
    write_output(&eff.output.path, &s)
}

fn cmd_sweep(eff: &Effective) -> Result<(), CliError> {
    // delta comes from the grid, not from the model section
    let theta = require(eff.model.theta, "model.theta")?;
    let eta = require(eff.model.eta, "model.eta")?;
    let epsilon = require(eff.model.epsilon, "model.epsilon")?;
    let delta_min = positive(
        require(eff.sweep.delta_min, "sweep.delta_min")?,
        "sweep.delta_min",
    )?;
    let mut delta_max = positive(
        require(eff.sweep.delta_max, "sweep.delta_max")?,
        "sweep.delta_max",
    )?;
    let step = positive(require(eff.sweep.step, "sweep.step")?, "sweep.step")?;

    let tau = model::transcritical_threshold(eta);
    if delta_min >= tau {
        return Err(CliError::Validation(format!(
            "field sweep.delta_min = {delta_min} is at or beyond the transcritical threshold {tau:.10}"
        )));
    }
    if delta_max >= tau {
        let clamped = tau - 1e-9;
        eprintln!(
            "warning: sweep.delta_max = {delta_max} clamped to {clamped:.10} (transcritical threshold)"
        );
        delta_max = clamped;
    }
    if delta_min >= delta_max {
        return Err(CliError::Validation(format!(
            "field sweep.delta_min = {delta_min} must be below sweep.delta_max = {delta_max}"
        )));
    }

    let mut deltas = Vec::new();
    let mut i = 0u64;
    loop {
        let d = delta_min + step * i as f64;
        if d > delta_max + 1e-12 {
            break;
        }
        deltas.push(d);
        i += 1;
    }

    let opts = bifurcation::SweepOptions {
        max_transient: eff.sweep.max_transient.unwrap_or(4e4),
        refine: eff.sweep.refine.unwrap_or(true),
        ..bifurcation::SweepOptions::default()
    };

    // validates the model triple against the first grid value
    let params = model::Params::new(delta_min, theta, eta, epsilon)?;
    for w in params.warnings() {
        eprintln!("warning: {w}");
    }

    let branch = bifurcation::sweep(theta, eta, epsilon, &deltas, &opts)?;
    // hash the clamped range so the header names what actually ran
    let mut effective = eff.clone();
    effective.sweep.delta_max = Some(delta_max);
    let hash = effective.hash("sweep");
    write_output(&eff.output.path, &bifurcation::diagram_csv(&branch, hash))
}

fn cmd_singular_orbit(eff: &Effective) -> Result<(), CliError> {
    let theta = require(eff.model.theta, "model.theta")?;
    let eta = require(eff.model.eta, "model.eta")?;
    positive(theta, "model.theta")?;
    positive(eta, "model.eta")?;
    let n = eff.singular_orbit.samples_per_segment.unwrap_or(1500);
    if n == 0 {
        return Err(CliError::Validation(
            "field singular-orbit.samples_per_segment must be at least 1".into(),
        ));
    }

    let folds = manifold::fold_points(theta, eta);
    let orbit = manifold::singular_orbit(theta, eta, &folds)?;
    let hash = eff.hash("singular-orbit");
    let mut s = format!("# config-hash: {hash:016x}\n");
    s.push_str("u,v\n");
    for (u, v) in orbit.sample(n) {
        let _ = writeln!(s, "{u:.12e},{v:.12e}");
    }
    write_output(&eff.output.path, &s)
}
