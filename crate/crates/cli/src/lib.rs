//! Command-line front end: argument parsing, dispatch and file output.

pub mod config;
pub mod output;
pub mod verify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use stap_core::experiments::{
    mismatch_grid, pulse_samples, run_scenario, sweep, ExperimentError, Scenario, SweepSpec,
};
use stap_core::hilbert::eigh;
use stap_core::model::{atom_cavity_coupling, closed_space, phi};
use stap_core::pulses::DrivePhase;

use config::RunConfig;
use output::{evolve_table, format_g, write_csv, write_summary, Cell, Summary, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stap", version, about = "Three-atom singlet generation by shortcuts to adiabatic passage")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Envelope and counter-diabatic amplitude samples
    Pulses {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Single run with time-resolved fidelity and populations
    Evolve {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Final fidelity over a two-parameter grid
    Sweep {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Final fidelity over a grid of relative parameter deviations
    Mismatch {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Built-in invariant checks
    Verify,
    /// Eigenvalues of the atom-cavity coupling on the coupled states
    Spectrum {
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// JSON run configuration; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub omega0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tf: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// minus-i, plus-i or real
    #[arg(long)]
    pub phase: Option<String>,
    /// Simulate on all 256 basis states
    #[arg(long)]
    pub full_space: bool,
    /// First grid axis, `name:start:end:points`
    #[arg(long, allow_hyphen_values = true)]
    pub axis1: Option<String>,
    /// Second grid axis, `name:start:end:points`
    #[arg(long, allow_hyphen_values = true)]
    pub axis2: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Step-doubling convergence tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base name of the output files
    #[arg(long)]
    pub name: Option<String>,
    /// Print the effective configuration as JSON and exit
    #[arg(long)]
    pub dump_config: bool,
}

fn parse_phase(s: &str) -> Result<DrivePhase, CliError> {
    match s {
        "minus-i" => Ok(DrivePhase::MinusI),
        "plus-i" => Ok(DrivePhase::PlusI),
        "real" => Ok(DrivePhase::Real),
        other => Err(CliError::Validation(format!("unknown phase `{other}`"))),
    }
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = &self.scenario {
            c.scenario = s.parse().map_err(|e: ExperimentError| CliError::Validation(e.to_string()))?;
        }
        let p = &mut c.params;
        let overrides = [
            (self.omega0, &mut p.omega0),
            (self.delta, &mut p.delta),
            (self.tf, &mut p.tf),
            (self.kappa, &mut p.kappa),
            (self.gamma, &mut p.gamma),
            (self.lambda, &mut p.lambda),
        ];
        for (v, slot) in overrides {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let Some(ph) = &self.phase {
            p.phase = parse_phase(ph)?;
        }
        if self.full_space {
            p.full_space = true;
        }
        if let Some(a) = &self.axis1 {
            c.axis1 = Some(a.parse()?);
        }
        if let Some(a) = &self.axis2 {
            c.axis2 = Some(a.parse()?);
        }
        if self.steps.is_some() {
            c.steps = self.steps;
        }
        if self.tol.is_some() {
            c.tolerance = self.tol;
        }
        if let Some(o) = &self.out {
            c.output_dir = o.clone();
        }
        if self.name.is_some() {
            c.name = self.name.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn axes(c: &RunConfig) -> Result<(&config::AxisConfig, &config::AxisConfig), CliError> {
    match (&c.axis1, &c.axis2) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(CliError::Validation("grid runs need --axis1 and --axis2".into())),
    }
}

fn cmd_pulses(c: &RunConfig, points: usize) -> Result<(), CliError> {
    let samples = pulse_samples(&c.params, points)?;
    let mut t = Table::new(&["t", "omega1", "omega3", "omega_prime"]);
    for s in &samples {
        t.push(vec![
            Cell::Num(s.t),
            Cell::Num(s.omega1),
            Cell::Num(s.omega3),
            Cell::Num(s.omega_prime),
        ]);
    }
    c.prepare_output()?;
    let path = c.output_dir.join(format!("{}.csv", c.name_or("pulses")));
    write_csv(&t, &path)?;
    let peak = samples.iter().map(|s| s.omega_prime).fold(0.0, f64::max);
    println!("pulses: {} samples, peak Omega'={} -> {}", samples.len(), format_g(peak), path.display());
    Ok(())
}

fn cmd_evolve(c: &RunConfig) -> Result<(), CliError> {
    c.prepare_output()?;
    let outcome = run_scenario(c.scenario, &c.params, &c.options())?;
    let name = c.name_or(c.scenario.name());
    let csv = c.output_dir.join(format!("{name}.csv"));
    write_csv(&evolve_table(&outcome), &csv)?;
    let summary = Summary::from_outcome(&outcome);
    write_summary(&summary, &c.output_dir.join(format!("{name}.summary.json")))?;
    println!(
        "{}: F={:.6} steps={} error_estimate={} -> {}",
        c.scenario,
        outcome.fidelity(),
        outcome.run.grid.steps,
        format_g(outcome.run.error_estimate),
        csv.display()
    );
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn grid_table(cells: &[stap_core::experiments::SweepCell]) -> Table {
    let mut t = Table::new(&["axis1", "axis2", "fidelity", "status"]);
    for cell in cells {
        t.push(vec![
            Cell::Num(cell.axis1),
            Cell::Num(cell.axis2),
            Cell::Num(cell.fidelity),
            Cell::Text(cell.status.clone()),
        ]);
    }
    t
}

fn report_grid(c: &RunConfig, kind: &str, cells: &[stap_core::experiments::SweepCell]) -> Result<(), CliError> {
    let path = c.output_dir.join(format!("{}.csv", c.name_or(kind)));
    write_csv(&grid_table(cells), &path)?;
    let failed = cells.iter().filter(|x| x.status != "ok").count();
    let best = cells.iter().map(|x| x.fidelity).filter(|f| f.is_finite()).fold(f64::NAN, f64::max);
    let worst = cells.iter().map(|x| x.fidelity).filter(|f| f.is_finite()).fold(f64::NAN, f64::min);
    println!(
        "{kind}: {} cells, {failed} failed, F in [{}, {}] -> {}",
        cells.len(),
        format_g(worst),
        format_g(best),
        path.display()
    );
    Ok(())
}

fn cmd_sweep(c: &RunConfig) -> Result<(), CliError> {
    let (a, b) = axes(c)?;
    let spec = SweepSpec {
        scenario: c.scenario,
        base: c.params,
        axis1: a.sweep_axis()?,
        axis2: b.sweep_axis()?,
    };
    c.prepare_output()?;
    let table = sweep(&spec, &c.options())?;
    report_grid(c, "sweep", &table.cells)
}

fn cmd_mismatch(c: &RunConfig) -> Result<(), CliError> {
    if c.scenario == Scenario::StapOpen {
        return Err(CliError::Validation(
            "mismatch runs support stap-closed and stirap-closed only".into(),
        ));
    }
    let (a, b) = axes(c)?;
    let (va, vb) = (a.values()?, b.values()?);
    c.prepare_output()?;
    let cells = mismatch_grid(
        c.scenario,
        &c.params,
        (&a.param, &va),
        (&b.param, &vb),
        &c.options(),
    )?;
    report_grid(c, "mismatch", &cells)
}

/// Eigenvalues of the coupling restricted to the twelve coupled states.
pub fn coupled_spectrum(lambda: f64) -> Result<Vec<f64>, CliError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CliError::Validation("lambda must be positive".into()));
    }
    let space = closed_space();
    let h = atom_cavity_coupling(lambda, &space)
        .map_err(|e| CliError::Numerical(e.to_string()))?
        .matrix;
    let idx: Vec<usize> = (2..=13)
        .map(|k| space.index_of(&phi(k)).expect("coupled state in closure"))
        .collect();
    let sub = stap_core::CMatrix::from_fn(12, 12, |r, c| h[(idx[r], idx[c])]);
    let e = eigh(&sub).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(e.values)
}

fn with_config(run: &RunArgs, body: impl FnOnce(&RunConfig) -> Result<(), CliError>) -> Result<(), CliError> {
    let c = run.resolve()?;
    if run.dump_config {
        println!("{}", c.to_json());
        return Ok(());
    }
    body(&c)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Verify => {
            if verify::run_all() {
                Ok(())
            } else {
                Err(CliError::Numerical("invariant checks failed".into()))
            }
        }
        Command::Spectrum { lambda } => {
            for v in coupled_spectrum(lambda)? {
                // zero modes come out as +-1e-16
                let v = if v.abs() < 1e-12 { 0.0 } else { v };
                println!("{}", format_g(v));
            }
            Ok(())
        }
        Command::Pulses { run, points } => with_config(&run, |c| cmd_pulses(c, points)),
        Command::Evolve { run } => with_config(&run, cmd_evolve),
        Command::Sweep { run } => with_config(&run, cmd_sweep),
        Command::Mismatch { run } => with_config(&run, cmd_mismatch),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
