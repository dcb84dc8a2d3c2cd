//! Fidelity, populations and density-matrix diagnostics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DensityMatrix, DynamicsError, FinalState};
use crate::hilbert::{eigh, Basis, CMatrix, CVector, HilbertError, Ket};
use crate::model::SpecialStates;

/// Labels accepted for recorded populations.
pub const POPULATION_LABELS: [&str; 5] = ["chi", "varpi", "Psi2", "psi1", "singlet"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("reference ket lives on a different basis")]
    SpaceMismatch,
    #[error("unregistered population label `{0}`")]
    UnknownLabel(String),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

impl From<ObservableError> for DynamicsError {
    fn from(e: ObservableError) -> Self {
        match e {
            ObservableError::Hilbert(h) => DynamicsError::Hilbert(h),
            _ => DynamicsError::SpaceMismatch { what: "probe" },
        }
    }
}

/// A state that can be queried with `<k|rho|k>`.
pub trait QuantumState {
    fn basis(&self) -> &Basis;
    fn quadratic_form(&self, k: &Ket) -> f64;
}

impl QuantumState for Ket {
    fn basis(&self) -> &Basis {
        &self.basis
    }

    fn quadratic_form(&self, k: &Ket) -> f64 {
        k.inner(self).norm_sqr()
    }
}

impl QuantumState for DensityMatrix {
    fn basis(&self) -> &Basis {
        &self.basis
    }

    fn quadratic_form(&self, k: &Ket) -> f64 {
        self.expectation(k).norm()
    }
}

impl QuantumState for FinalState {
    fn basis(&self) -> &Basis {
        FinalState::basis(self)
    }

    fn quadratic_form(&self, k: &Ket) -> f64 {
        match self {
            FinalState::Pure(p) => p.quadratic_form(k),
            FinalState::Mixed(r) => r.quadratic_form(k),
        }
    }
}

/// `|<S|rho|S>|`, which is `|<S|psi>|^2` for a pure state.
pub fn fidelity(state: &impl QuantumState, target: &Ket) -> Result<f64, ObservableError> {
    population(state, target)
}

pub fn population(state: &impl QuantumState, reference: &Ket) -> Result<f64, ObservableError> {
    if !state.basis().same_as(&reference.basis) {
        return Err(ObservableError::SpaceMismatch);
    }
    Ok(state.quadratic_form(reference))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub trace: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
    pub purity: f64,
}

pub fn diagnostics(rho: &DensityMatrix) -> Diagnostics {
    let m = &rho.matrix;
    let sym = (m + m.adjoint()) * num_complex::Complex64::new(0.5, 0.0);
    let min_eigenvalue = eigh(&sym)
        .map(|e| e.values[0])
        .unwrap_or(f64::NAN);
    Diagnostics {
        trace: rho.trace(),
        hermiticity_defect: rho.hermiticity_defect(),
        min_eigenvalue,
        purity: (m * m).trace().re,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub t: f64,
    pub fidelity: f64,
    pub populations: Vec<(String, f64)>,
    /// `<psi|psi>` or `tr rho`.
    pub trace: f64,
    /// `||psi||` or the Frobenius norm of `rho`.
    pub norm: f64,
}

impl ObservableRow {
    pub fn population(&self, label: &str) -> Option<f64> {
        self.populations
            .iter()
            .find(|(l, _)| l == label)
            .map(|&(_, v)| v)
    }
}

/// Target and reference kets evaluated at each recorded sample.
#[derive(Debug, Clone)]
pub struct Probe {
    target: Ket,
    references: Vec<(String, Ket)>,
}

impl Probe {
    pub fn new(target: Ket, references: Vec<(&str, Ket)>) -> Result<Self, ObservableError> {
        let mut refs = Vec::with_capacity(references.len());
        for (label, k) in references {
            if !POPULATION_LABELS.contains(&label) {
                return Err(ObservableError::UnknownLabel(label.to_string()));
            }
            if !k.basis.same_as(&target.basis) {
                return Err(ObservableError::SpaceMismatch);
            }
            refs.push((label.to_string(), k));
        }
        Ok(Self {
            target,
            references: refs,
        })
    }

    /// Singlet target with `chi` and `varpi` populations.
    pub fn scheme(states: &SpecialStates) -> Self {
        Self::new(
            states.singlet.clone(),
            vec![("chi", states.chi.clone()), ("varpi", states.varpi.clone())],
        )
        .expect("special states share one basis")
    }

    pub fn target(&self) -> &Ket {
        &self.target
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.references.iter().map(|(l, _)| l.as_str())
    }

    pub fn check_basis(&self, basis: &Basis) -> Result<(), ObservableError> {
        if self.target.basis.same_as(basis) {
            Ok(())
        } else {
            Err(ObservableError::SpaceMismatch)
        }
    }

    pub(crate) fn row_pure(&self, t: f64, psi: &CVector) -> ObservableRow {
        let pop = |k: &Ket| k.amplitudes.dotc(psi).norm_sqr();
        let n2 = psi.norm_squared();
        ObservableRow {
            t,
            fidelity: pop(&self.target),
            populations: self
                .references
                .iter()
                .map(|(l, k)| (l.clone(), pop(k)))
                .collect(),
            trace: n2,
            norm: n2.sqrt(),
        }
    }

    pub(crate) fn row_mixed(&self, t: f64, rho: &CMatrix) -> ObservableRow {
        let pop = |k: &Ket| k.amplitudes.dotc(&(rho * &k.amplitudes)).norm();
        ObservableRow {
            t,
            fidelity: pop(&self.target),
            populations: self
                .references
                .iter()
                .map(|(l, k)| (l.clone(), pop(k)))
                .collect(),
            trace: rho.trace().re,
            norm: rho.norm(),
        }
    }
}
