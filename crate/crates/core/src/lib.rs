//! Simulation of shortcut-to-adiabatic generation of a three-atom singlet
//! state in a two-mode cavity.

pub mod dynamics;
pub mod experiments;
pub mod hilbert;
pub mod model;
pub mod observables;
pub mod pulses;

pub use dynamics::{DensityMatrix, DynamicsError, FinalState, RunResult, TimeGrid};
pub use experiments::{ExperimentError, ExperimentParams, Outcome, Preset, RunOptions, Scenario};
pub use hilbert::{
    eigh, Basis, BasisState, CMatrix, CVector, Eigh, HilbertError, Ket, Level, Mode, OpSpec,
    Operator, StateSpace,
};
pub use model::{ModelError, ModelParams, SpecialStates, TimeDependentHamiltonian};
pub use observables::{fidelity, population, ObservableRow, Probe};
pub use pulses::{CddPulse, DrivePhase, PulseError, PulseSchedule, ValidityReport};
