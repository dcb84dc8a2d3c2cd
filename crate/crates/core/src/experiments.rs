//! Scenario runners, parameter sweeps and parameter-mismatch studies.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    converge, default_steps, propagate_density, propagate_state, DensityMatrix, DynamicsError,
    RunResult, TimeGrid,
};
use crate::hilbert::StateSpace;
use crate::model::{
    closed_space, dissipative_space, full_space, hamiltonian_apf, hamiltonian_resonant,
    jump_operators, special_states, ModelError, ModelParams, TimeDependentHamiltonian,
};
use crate::observables::Probe;
use crate::pulses::{CddPulse, DrivePhase, PulseError, PulseSchedule, ValidityReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

impl From<PulseError> for ExperimentError {
    fn from(e: PulseError) -> Self {
        match e {
            PulseError::InvalidSchedule(m) => ExperimentError::Invalid(m),
            PulseError::NonPositiveDetuning(_) => {
                ExperimentError::Invalid("delta must be positive".into())
            }
            other => ExperimentError::Model(other.into()),
        }
    }
}

impl ExperimentError {
    /// True for bad input, false for failures during the computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            ExperimentError::Invalid(_)
                | ExperimentError::Model(ModelError::InvalidParams(_))
                | ExperimentError::Dynamics(DynamicsError::InvalidGrid(_))
                | ExperimentError::Dynamics(DynamicsError::InvalidTolerance)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    StapClosed,
    StirapClosed,
    StapOpen,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::StapClosed, Scenario::StirapClosed, Scenario::StapOpen];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::StapClosed => "stap-closed",
            Scenario::StirapClosed => "stirap-closed",
            Scenario::StapOpen => "stap-open",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('_', "-");
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == norm)
            .ok_or_else(|| ExperimentError::Invalid(format!("unknown scenario `{s}`")))
    }
}

/// Envelope shape family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `tan alpha = 2`, `t0 = 0.14 tf`, `tc = 0.19 tf`.
    #[default]
    Default,
}

impl Preset {
    pub fn schedule(self, omega0: f64, tf: f64) -> Result<PulseSchedule, PulseError> {
        match self {
            Preset::Default => PulseSchedule::default_preset(omega0, tf),
        }
    }
}

/// Everything a single run needs, in units of the atom-cavity coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentParams {
    pub omega0: f64,
    pub delta: f64,
    pub tf: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub preset: Preset,
    pub phase: DrivePhase,
    /// Run on all 256 basis states instead of the closure subspace.
    pub full_space: bool,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            omega0: 0.2,
            delta: 3.0,
            tf: 40.0,
            kappa: 0.0,
            gamma: 0.0,
            lambda: 1.0,
            preset: Preset::Default,
            phase: DrivePhase::MinusI,
            full_space: false,
        }
    }
}

impl ExperimentParams {
    pub fn validate(&self, scenario: Scenario) -> Result<(), ExperimentError> {
        let named = [
            ("omega0", self.omega0),
            ("delta", self.delta),
            ("tf", self.tf),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("lambda", self.lambda),
        ];
        for (n, v) in named {
            if !v.is_finite() {
                return Err(ExperimentError::Invalid(format!("{n} must be finite")));
            }
        }
        if self.tf <= 0.0 {
            return Err(ExperimentError::Invalid("t_f must be positive".into()));
        }
        if self.omega0 <= 0.0 {
            return Err(ExperimentError::Invalid("omega0 must be positive".into()));
        }
        if self.lambda <= 0.0 {
            return Err(ExperimentError::Invalid("lambda must be positive".into()));
        }
        if self.kappa < 0.0 || self.gamma < 0.0 {
            return Err(ExperimentError::Invalid("decay rates must be nonnegative".into()));
        }
        if scenario != Scenario::StirapClosed && self.delta <= 0.0 {
            return Err(ExperimentError::Invalid("delta must be positive".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<PulseSchedule, ExperimentError> {
        Ok(self.preset.schedule(self.omega0, self.tf)?)
    }

    pub fn pulse(&self) -> Result<CddPulse, ExperimentError> {
        Ok(CddPulse::new(self.schedule()?, self.delta)?.with_phase(self.phase))
    }

    fn model(&self) -> Result<ModelParams, ExperimentError> {
        Ok(ModelParams::new(self.lambda, self.delta, self.kappa, self.gamma)?)
    }
}

/// Step count and optional convergence tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    pub steps: Option<usize>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub scenario: Scenario,
    pub params: ExperimentParams,
    pub run: RunResult,
    pub validity: Option<ValidityReport>,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn fidelity(&self) -> f64 {
        self.run.final_fidelity()
    }
}

/// What gets simulated: generator, space, rates and time window.
struct Setup {
    hamiltonian: TimeDependentHamiltonian,
    space: Arc<StateSpace>,
    model: ModelParams,
    t_end: f64,
    open: bool,
}

fn execute(setup: &Setup, opts: &RunOptions) -> Result<RunResult, ExperimentError> {
    let states = special_states(&setup.space)?;
    let probe = Probe::scheme(&states);
    let steps = opts.steps.unwrap_or_else(|| default_steps(setup.t_end));
    let grid = TimeGrid::new(0.0, setup.t_end, steps)?;
    let run = |g: &TimeGrid| -> Result<RunResult, DynamicsError> {
        if setup.open {
            let jumps = jump_operators(&setup.model, &setup.space)?;
            let rho0 = DensityMatrix::from_ket(&states.psi1);
            propagate_density(&setup.hamiltonian, &jumps, &rho0, g, &probe)
        } else {
            propagate_state(&setup.hamiltonian, &states.psi1, g, &probe)
        }
    };
    Ok(match opts.tolerance {
        Some(tol) => converge(run, &grid, tol)?,
        None => run(&grid)?,
    })
}

fn space_for(open: bool, full: bool) -> Arc<StateSpace> {
    match (full, open) {
        (true, _) => full_space(),
        (false, true) => dissipative_space(),
        (false, false) => closed_space(),
    }
}

fn stap_setup(p: &ExperimentParams, open: bool) -> Result<(Setup, ValidityReport), ExperimentError> {
    let pulse = p.pulse()?;
    let validity = pulse.validity_report(p.lambda)?;
    let mut model = p.model()?;
    if !open {
        model.kappa = 0.0;
        model.gamma = 0.0;
    }
    let space = space_for(open, p.full_space);
    let hamiltonian = hamiltonian_apf(&model, &pulse, &space)?;
    Ok((
        Setup {
            hamiltonian,
            space,
            model,
            t_end: p.tf,
            open,
        },
        validity,
    ))
}

fn stirap_setup(p: &ExperimentParams) -> Result<Setup, ExperimentError> {
    let s = p.schedule()?;
    let model = ModelParams::new(p.lambda, 0.0, 0.0, 0.0)?;
    let space = space_for(false, p.full_space);
    Ok(Setup {
        hamiltonian: hamiltonian_resonant(&model, &s, &space)?,
        space,
        model,
        t_end: p.tf,
        open: false,
    })
}

/// Runs one scenario and attaches the pulse validity report.
pub fn run_scenario(
    scenario: Scenario,
    params: &ExperimentParams,
    opts: &RunOptions,
) -> Result<Outcome, ExperimentError> {
    params.validate(scenario)?;
    let (setup, validity) = match scenario {
        Scenario::StapClosed => {
            let (s, v) = stap_setup(params, false)?;
            (s, Some(v))
        }
        Scenario::StapOpen => {
            let (s, v) = stap_setup(params, true)?;
            (s, Some(v))
        }
        Scenario::StirapClosed => (stirap_setup(params)?, None),
    };
    let run = execute(&setup, opts)?;
    let mut warnings = validity.as_ref().map_or_else(Vec::new, |v| v.warnings.clone());
    let last = run.records.last().expect("at least two records");
    if (last.trace - 1.0).abs() > 1e-6 {
        warnings.push(format!("trace drift {:.3e}", last.trace - 1.0));
    }
    Ok(Outcome {
        scenario,
        params: *params,
        run,
        validity,
        warnings,
    })
}

pub fn run_stap_closed(
    omega0: f64,
    delta: f64,
    tf: f64,
    preset: Preset,
) -> Result<Outcome, ExperimentError> {
    let p = ExperimentParams {
        omega0,
        delta,
        tf,
        preset,
        ..Default::default()
    };
    run_scenario(Scenario::StapClosed, &p, &RunOptions::default())
}

pub fn run_stirap_closed(omega0: f64, tf: f64, preset: Preset) -> Result<Outcome, ExperimentError> {
    let p = ExperimentParams {
        omega0,
        tf,
        preset,
        ..Default::default()
    };
    run_scenario(Scenario::StirapClosed, &p, &RunOptions::default())
}

pub fn run_stap_open(params: &ExperimentParams) -> Result<Outcome, ExperimentError> {
    run_scenario(Scenario::StapOpen, params, &RunOptions::default())
}

/// Decay rates of the experimental operating point.
pub const EXPERIMENTAL_KAPPA: f64 = 0.0047;
pub const EXPERIMENTAL_GAMMA: f64 = 0.0035;

/// Open-system STAP fidelity at `kappa = 0.0047`, `gamma = 0.0035`.
pub fn experimental_point() -> Result<f64, ExperimentError> {
    let p = ExperimentParams {
        kappa: EXPERIMENTAL_KAPPA,
        gamma: EXPERIMENTAL_GAMMA,
        ..Default::default()
    };
    Ok(run_stap_open(&p)?.fidelity())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Omega0,
    Delta,
    Tf,
    Kappa,
    Gamma,
    Lambda,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] = [
        SweepParam::Omega0,
        SweepParam::Delta,
        SweepParam::Tf,
        SweepParam::Kappa,
        SweepParam::Gamma,
        SweepParam::Lambda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Omega0 => "omega0",
            SweepParam::Delta => "delta",
            SweepParam::Tf => "tf",
            SweepParam::Kappa => "kappa",
            SweepParam::Gamma => "gamma",
            SweepParam::Lambda => "lambda",
        }
    }

    pub fn set(self, p: &mut ExperimentParams, v: f64) {
        match self {
            SweepParam::Omega0 => p.omega0 = v,
            SweepParam::Delta => p.delta = v,
            SweepParam::Tf => p.tf = v,
            SweepParam::Kappa => p.kappa = v,
            SweepParam::Gamma => p.gamma = v,
            SweepParam::Lambda => p.lambda = v,
        }
    }
}

impl FromStr for SweepParam {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| ExperimentError::Invalid(format!("unknown sweep parameter `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: SweepParam,
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(param: SweepParam, start: f64, end: f64, points: usize) -> Self {
        Self {
            param,
            start,
            end,
            points,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.points < 2 {
            return Err(ExperimentError::Invalid(format!(
                "axis `{}` needs at least 2 points",
                self.param.name()
            )));
        }
        if !(self.start.is_finite() && self.end.is_finite()) {
            return Err(ExperimentError::Invalid(format!(
                "axis `{}` range must be finite",
                self.param.name()
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|k| {
                if k + 1 == n {
                    self.end
                } else {
                    self.start + (self.end - self.start) * k as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub scenario: Scenario,
    pub base: ExperimentParams,
    pub axis1: Axis,
    pub axis2: Axis,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.axis1.validate()?;
        self.axis2.validate()?;
        if self.axis1.param == self.axis2.param {
            return Err(ExperimentError::Invalid("sweep axes must differ".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub axis1: f64,
    pub axis2: f64,
    pub fidelity: f64,
    /// `ok` or the failure reason.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub spec: SweepSpec,
    /// Row-major in `axis1`, then `axis2`.
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn get(&self, i: usize, j: usize) -> &SweepCell {
        &self.cells[i * self.spec.axis2.points + j]
    }
}

/// Final fidelity over a two-axis grid, evaluated in parallel. Failed cells
/// carry NaN and the error message.
pub fn sweep(spec: &SweepSpec, opts: &RunOptions) -> Result<SweepTable, ExperimentError> {
    spec.validate()?;
    let a1 = spec.axis1.values();
    let a2 = spec.axis2.values();
    let cells = (0..a1.len() * a2.len())
        .into_par_iter()
        .map(|idx| {
            let (x, y) = (a1[idx / a2.len()], a2[idx % a2.len()]);
            let mut p = spec.base;
            spec.axis1.param.set(&mut p, x);
            spec.axis2.param.set(&mut p, y);
            match run_scenario(spec.scenario, &p, opts) {
                Ok(o) => SweepCell {
                    axis1: x,
                    axis2: y,
                    fidelity: o.fidelity(),
                    status: "ok".into(),
                },
                Err(e) => SweepCell {
                    axis1: x,
                    axis2: y,
                    fidelity: f64::NAN,
                    status: e.to_string(),
                },
            }
        })
        .collect();
    Ok(SweepTable { spec: *spec, cells })
}

/// Relative deviations `dx/x` of the actual parameters from the design.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MismatchSpec {
    pub omega0: f64,
    pub tf: f64,
    pub lambda: f64,
    pub delta: f64,
}

impl MismatchSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        for (n, v) in [
            ("omega0", self.omega0),
            ("tf", self.tf),
            ("lambda", self.lambda),
            ("delta", self.delta),
        ] {
            if !(-0.5..=0.5).contains(&v) {
                return Err(ExperimentError::Invalid(format!(
                    "deviation of {n} must lie in [-0.5, 0.5], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Final fidelity when pulses are designed for `base` but the system runs
/// with the deviated parameters. The amplitude deviation scales the
/// delivered drive, `lambda` and `delta` deviations change only the system
/// Hamiltonian, and the `tf` deviation changes the integration window while
/// the pulse formulas stay as designed.
pub fn run_mismatch(
    dev: &MismatchSpec,
    scenario: Scenario,
    base: &ExperimentParams,
    opts: &RunOptions,
) -> Result<f64, ExperimentError> {
    dev.validate()?;
    base.validate(scenario)?;
    let t_end = base.tf * (1.0 + dev.tf);
    let lambda = base.lambda * (1.0 + dev.lambda);
    let setup = match scenario {
        Scenario::StapClosed => {
            let pulse = base.pulse()?.with_drive_scale(1.0 + dev.omega0);
            let model = ModelParams::new(lambda, base.delta * (1.0 + dev.delta), 0.0, 0.0)?;
            let space = space_for(false, base.full_space);
            Setup {
                hamiltonian: hamiltonian_apf(&model, &pulse, &space)?,
                space,
                model,
                t_end,
                open: false,
            }
        }
        Scenario::StirapClosed => {
            let s = base.schedule()?.with_omega0(base.omega0 * (1.0 + dev.omega0));
            let model = ModelParams::new(lambda, 0.0, 0.0, 0.0)?;
            let space = space_for(false, base.full_space);
            Setup {
                hamiltonian: hamiltonian_resonant(&model, &s, &space)?,
                space,
                model,
                t_end,
                open: false,
            }
        }
        Scenario::StapOpen => {
            return Err(ExperimentError::Invalid(
                "mismatch runs support stap-closed and stirap-closed only".into(),
            ))
        }
    };
    Ok(execute(&setup, opts)?.final_fidelity())
}

/// Mismatch fidelities over a grid of two deviations.
pub fn mismatch_grid(
    scenario: Scenario,
    base: &ExperimentParams,
    axis1: (&str, &[f64]),
    axis2: (&str, &[f64]),
    opts: &RunOptions,
) -> Result<Vec<SweepCell>, ExperimentError> {
    let setter = |name: &str| -> Result<fn(&mut MismatchSpec, f64), ExperimentError> {
        Ok(match name {
            "omega0" => |m, v| m.omega0 = v,
            "tf" => |m, v| m.tf = v,
            "lambda" => |m, v| m.lambda = v,
            "delta" => |m, v| m.delta = v,
            other => {
                return Err(ExperimentError::Invalid(format!(
                    "unknown mismatch parameter `{other}`"
                )))
            }
        })
    };
    let (s1, s2) = (setter(axis1.0)?, setter(axis2.0)?);
    if axis1.0 == axis2.0 {
        return Err(ExperimentError::Invalid("mismatch axes must differ".into()));
    }
    let n2 = axis2.1.len();
    Ok((0..axis1.1.len() * n2)
        .into_par_iter()
        .map(|idx| {
            let (x, y) = (axis1.1[idx / n2], axis2.1[idx % n2]);
            let mut dev = MismatchSpec::default();
            s1(&mut dev, x);
            s2(&mut dev, y);
            match run_mismatch(&dev, scenario, base, opts) {
                Ok(f) => SweepCell {
                    axis1: x,
                    axis2: y,
                    fidelity: f,
                    status: "ok".into(),
                },
                Err(e) => SweepCell {
                    axis1: x,
                    axis2: y,
                    fidelity: f64::NAN,
                    status: e.to_string(),
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSample {
    pub t: f64,
    pub omega1: f64,
    pub omega3: f64,
    pub omega_prime: f64,
}

/// Envelopes and counter-diabatic amplitude on `points` evenly spaced times
/// in `[0, tf]`.
pub fn pulse_samples(p: &ExperimentParams, points: usize) -> Result<Vec<PulseSample>, ExperimentError> {
    if points < 2 {
        return Err(ExperimentError::Invalid("need at least 2 samples".into()));
    }
    p.validate(Scenario::StapClosed)?;
    let pulse = p.pulse()?;
    (0..points)
        .map(|k| {
            let t = if k + 1 == points {
                p.tf
            } else {
                p.tf * k as f64 / (points - 1) as f64
            };
            let (omega1, omega3) = pulse.schedule.envelopes(t);
            Ok(PulseSample {
                t,
                omega1,
                omega3,
                omega_prime: pulse.amplitude(t)?,
            })
        })
        .collect()
}
