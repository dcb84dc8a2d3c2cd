//! Hamiltonians, jump operators and reference states of the three-atom
//! bimodal-cavity system, plus the reduced three- and two-level models.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{
    build_operator, closure_subspace, closure_subspace_directed, enumerate_full_space, Basis,
    BasisState, CMatrix, HilbertError, Ket, Level, Mode, OpSpec, Operator, StateSpace, I, ONE,
    ZERO,
};
use crate::pulses::{CddPulse, PulseError, PulseSchedule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("space is not closed under `{spec}`: {dropped} element(s) leave it, e.g. {example}")]
    NotClosed {
        spec: String,
        dropped: usize,
        example: BasisState,
    },
    #[error("elimination undefined for zero detuning")]
    EliminationUndefined,
    #[error("generator must act on a physical state space")]
    NotPhysical,
}

/// Couplings and rates in units of the atom-cavity coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub delta: f64,
    pub kappa: f64,
    pub gamma: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, delta: f64, kappa: f64, gamma: f64) -> Result<Self, ModelError> {
        let p = Self {
            lambda,
            delta,
            kappa,
            gamma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [self.lambda, self.delta, self.kappa, self.gamma];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::InvalidParams("parameters must be finite".into()));
        }
        if self.lambda <= 0.0 {
            return Err(ModelError::InvalidParams("lambda must be positive".into()));
        }
        if self.delta < 0.0 || self.kappa < 0.0 || self.gamma < 0.0 {
            return Err(ModelError::InvalidParams(
                "delta, kappa and gamma must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            delta: 0.0,
            kappa: 0.0,
            gamma: 0.0,
        }
    }
}

type GeneratorFn = dyn Fn(f64) -> Result<CMatrix, ModelError> + Send + Sync;

/// A Hermitian matrix-valued function of time on a fixed basis.
#[derive(Clone)]
pub struct TimeDependentHamiltonian {
    basis: Basis,
    generator: Arc<GeneratorFn>,
    notes: Vec<String>,
}

impl fmt::Debug for TimeDependentHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeDependentHamiltonian")
            .field("dim", &self.basis.dim())
            .field("notes", &self.notes)
            .finish()
    }
}

impl TimeDependentHamiltonian {
    pub fn new(
        basis: Basis,
        generator: impl Fn(f64) -> Result<CMatrix, ModelError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            basis,
            generator: Arc::new(generator),
            notes: Vec::new(),
        }
    }

    pub fn constant(op: Operator) -> Self {
        let m = op.matrix;
        Self::new(op.basis, move |_| Ok(m.clone()))
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Metadata such as gauge shifts removed from the generator.
    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn at(&self, t: f64) -> Result<CMatrix, ModelError> {
        (self.generator)(t)
    }

    pub fn operator_at(&self, t: f64) -> Result<Operator, ModelError> {
        Ok(Operator {
            basis: self.basis.clone(),
            matrix: self.at(t)?,
        })
    }
}

fn sigma(atom: u8, to: Level, from: Level) -> OpSpec {
    OpSpec::transition(atom, to, from).expect("atom index in 1..=3")
}

/// `|e>_i <g2|` for i = 1, 2, 3.
pub fn drive_specs() -> [OpSpec; 3] {
    [1, 2, 3].map(|i| sigma(i, Level::E, Level::G2))
}

/// `|e>_i <g0| a_L` and `|e>_i <g1| a_R` for i = 1, 2, 3.
pub fn cavity_coupling_specs() -> Vec<OpSpec> {
    let mut v = Vec::with_capacity(6);
    for i in 1..=3 {
        v.push(sigma(i, Level::E, Level::G0).times(OpSpec::annihilate(Mode::L)));
        v.push(sigma(i, Level::E, Level::G1).times(OpSpec::annihilate(Mode::R)));
    }
    v
}

/// Lindblad channels in a fixed order: `a_L`, `a_R`, then
/// `|p>_n <e|` for n = 1..3 and p = g0, g1, g2.
pub fn jump_specs() -> Vec<(String, OpSpec, JumpKind)> {
    let mut v = vec![
        ("a_L".to_string(), OpSpec::annihilate(Mode::L), JumpKind::Cavity),
        ("a_R".to_string(), OpSpec::annihilate(Mode::R), JumpKind::Cavity),
    ];
    for n in 1..=3u8 {
        for p in Level::GROUND {
            v.push((
                format!("sigma_{n}_{}", p.label()),
                sigma(n, p, Level::E),
                JumpKind::Atomic,
            ));
        }
    }
    v
}

use Level::{E, G0, G1, G2};

/// The eighteen single-excitation basis states `phi_1 .. phi_18` in the
/// conventional numbering.
pub const PHI: [BasisState; 18] = [
    BasisState::new([G2, G0, G1], [0, 0]),
    BasisState::new([E, G0, G1], [0, 0]),
    BasisState::new([G0, G0, G1], [1, 0]),
    BasisState::new([G0, E, G1], [0, 0]),
    BasisState::new([G0, G1, G1], [0, 1]),
    BasisState::new([G0, G1, E], [0, 0]),
    BasisState::new([G0, G1, G0], [1, 0]),
    BasisState::new([G1, G0, G1], [0, 1]),
    BasisState::new([G1, G0, E], [0, 0]),
    BasisState::new([G1, G0, G0], [1, 0]),
    BasisState::new([G1, E, G0], [0, 0]),
    BasisState::new([G1, G1, G0], [0, 1]),
    BasisState::new([E, G1, G0], [0, 0]),
    BasisState::new([G2, G1, G0], [0, 0]),
    BasisState::new([G0, G2, G1], [0, 0]),
    BasisState::new([G0, G1, G2], [0, 0]),
    BasisState::new([G1, G0, G2], [0, 0]),
    BasisState::new([G1, G2, G0], [0, 0]),
];

/// `phi_k` with the conventional 1-based index.
pub fn phi(k: usize) -> BasisState {
    PHI[k - 1]
}

/// Seeds of the initial state: `phi_1` and `phi_14`.
pub fn initial_seeds() -> [BasisState; 2] {
    [phi(1), phi(14)]
}

/// Closure of the initial seeds under the drive and cavity couplings: the
/// eighteen-state single-excitation space.
pub fn closed_space() -> Arc<StateSpace> {
    let mut gens = cavity_coupling_specs();
    gens.extend(drive_specs());
    Arc::new(closure_subspace(&initial_seeds(), &gens).expect("seeds are nonempty"))
}

/// Closure under the couplings and the jump operators (jumps one way only).
pub fn dissipative_space() -> Arc<StateSpace> {
    let mut gens = cavity_coupling_specs();
    gens.extend(drive_specs());
    let jumps: Vec<OpSpec> = jump_specs().into_iter().map(|(_, s, _)| s).collect();
    Arc::new(closure_subspace_directed(&initial_seeds(), &gens, &jumps).expect("seeds are nonempty"))
}

pub fn full_space() -> Arc<StateSpace> {
    Arc::new(enumerate_full_space())
}

fn checked_operator(spec: &OpSpec, space: &Arc<StateSpace>) -> Result<Operator, ModelError> {
    let built = build_operator(spec, space);
    if built.dropped > 0 {
        let cutoff = space.max_photons().max(1);
        let example = space
            .states()
            .iter()
            .filter_map(|s| spec.apply(s, cutoff).map(|(t, _)| t))
            .find(|t| !space.contains(t))
            .expect("a dropped element has an image outside the space");
        return Err(ModelError::NotClosed {
            spec: spec.to_string(),
            dropped: built.dropped,
            example,
        });
    }
    Ok(built.operator)
}

/// Couplings that must stay inside the space, checked in both directions.
fn checked_pair(spec: &OpSpec, space: &Arc<StateSpace>) -> Result<Operator, ModelError> {
    let op = checked_operator(spec, space)?;
    checked_operator(&spec.adjoint(), space)?;
    Ok(op)
}

/// `sum_i lambda (|e>_i<g0| a_L + |e>_i<g1| a_R) + h.c.`
pub fn atom_cavity_coupling(lambda: f64, space: &Arc<StateSpace>) -> Result<Operator, ModelError> {
    let mut m = CMatrix::zeros(space.dim(), space.dim());
    for spec in cavity_coupling_specs() {
        m += checked_pair(&spec, space)?.matrix;
    }
    let m = (&m + m.adjoint()) * Complex64::new(lambda, 0.0);
    Ok(Operator {
        basis: Basis::Physical(space.clone()),
        matrix: m,
    })
}

/// `sum_i |e>_i<e|`.
pub fn excited_number(space: &Arc<StateSpace>) -> Result<Operator, ModelError> {
    let mut m = CMatrix::zeros(space.dim(), space.dim());
    for i in 1..=3 {
        m += checked_operator(&sigma(i, E, E), space)?.matrix;
    }
    Ok(Operator {
        basis: Basis::Physical(space.clone()),
        matrix: m,
    })
}

fn drive_operators(space: &Arc<StateSpace>) -> Result<[CMatrix; 3], ModelError> {
    let [a, b, c] = drive_specs();
    Ok([
        checked_pair(&a, space)?.matrix,
        checked_pair(&b, space)?.matrix,
        checked_pair(&c, space)?.matrix,
    ])
}

fn add_drive(h: &mut CMatrix, amp: Complex64, raise: &CMatrix) {
    if amp == ZERO {
        return;
    }
    let n = h.nrows();
    for c in 0..n {
        for r in 0..n {
            let x = raise[(r, c)];
            if x != ZERO {
                h[(r, c)] += amp * x;
                h[(c, r)] += (amp * x).conj();
            }
        }
    }
}

/// Resonant Hamiltonian with real Rabi frequencies `Omega_1` on atom 1 and
/// `Omega_2 = Omega_3` on atoms 2 and 3.
pub fn hamiltonian_resonant(
    p: &ModelParams,
    s: &PulseSchedule,
    space: &Arc<StateSpace>,
) -> Result<TimeDependentHamiltonian, ModelError> {
    p.validate()?;
    s.validate()?;
    let h_ac = atom_cavity_coupling(p.lambda, space)?.matrix;
    let drives = drive_operators(space)?;
    let s = *s;
    Ok(TimeDependentHamiltonian::new(
        Basis::Physical(space.clone()),
        move |t| {
            let (o1, o3) = s.envelopes(t);
            let mut h = h_ac.clone();
            add_drive(&mut h, Complex64::new(o1, 0.0), &drives[0]);
            add_drive(&mut h, Complex64::new(o3, 0.0), &drives[1]);
            add_drive(&mut h, Complex64::new(o3, 0.0), &drives[2]);
            Ok(h)
        },
    ))
}

/// Detuned Hamiltonian driven by the counter-diabatic pulse. The detuning of
/// the excited levels is `p.delta` (the actual system value), while the
/// pulse carries its own design detuning.
pub fn hamiltonian_apf(
    p: &ModelParams,
    c: &CddPulse,
    space: &Arc<StateSpace>,
) -> Result<TimeDependentHamiltonian, ModelError> {
    p.validate()?;
    if !(p.delta > 0.0) {
        return Err(ModelError::InvalidParams(
            "the detuned model needs delta > 0".into(),
        ));
    }
    let mut fixed = atom_cavity_coupling(p.lambda, space)?.matrix;
    fixed += excited_number(space)?.matrix * Complex64::new(p.delta, 0.0);
    let drives = drive_operators(space)?;
    let c = *c;
    Ok(TimeDependentHamiltonian::new(
        Basis::Physical(space.clone()),
        move |t| {
            let amps = c.drive_amplitudes(t)?;
            let mut h = fixed.clone();
            for (a, d) in amps.iter().zip(drives.iter()) {
                add_drive(&mut h, *a, d);
            }
            Ok(h)
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JumpKind {
    Cavity,
    Atomic,
}

/// A Lindblad channel `rate * D[operator]`.
#[derive(Debug, Clone)]
pub struct Jump {
    pub label: String,
    pub kind: JumpKind,
    pub rate: f64,
    pub operator: Operator,
}

/// Two cavity channels at rate `kappa` and nine atomic channels at rate
/// `gamma`. Fails if the space is not closed under the jumps.
pub fn jump_operators(p: &ModelParams, space: &Arc<StateSpace>) -> Result<Vec<Jump>, ModelError> {
    p.validate()?;
    jump_specs()
        .into_iter()
        .map(|(label, spec, kind)| {
            let operator = checked_operator(&spec, space)?;
            let rate = match kind {
                JumpKind::Cavity => p.kappa,
                JumpKind::Atomic => p.gamma,
            };
            Ok(Jump {
                label,
                kind,
                rate,
                operator,
            })
        })
        .collect()
}

/// Eigenvalues of the twelve coupled states in units of `lambda`, matching
/// [`SpecialStates::psi`].
pub const PSI_EIGENVALUES: [f64; 12] = {
    const R3: f64 = 1.732_050_807_568_877_2;
    [0.0, 0.0, 1.0, 1.0, -1.0, -1.0, 2.0, -2.0, R3, R3, -R3, -R3]
};

/// Eigenvector coefficients of the atom-cavity coupling as
/// `(normalization, [(phi index, weight)])`.
fn psi_table() -> [(f64, Vec<(usize, f64)>); 12] {
    let r3 = 3f64.sqrt();
    let n6 = 1.0 / 6f64.sqrt();
    let n8 = 1.0 / (2.0 * 2f64.sqrt());
    let n12 = 1.0 / (2.0 * r3);
    let n24 = 1.0 / (2.0 * 6f64.sqrt());
    [
        (n6, vec![(3, -1.0), (5, 1.0), (7, -1.0), (8, 1.0), (10, -1.0), (12, 1.0)]),
        (n6, vec![(2, -1.0), (4, 1.0), (6, -1.0), (9, 1.0), (11, -1.0), (13, 1.0)]),
        (
            n8,
            vec![(3, 1.0), (4, 1.0), (6, -1.0), (7, -1.0), (8, -1.0), (9, -1.0), (11, 1.0), (12, 1.0)],
        ),
        (
            n8,
            vec![(2, 1.0), (4, -1.0), (5, -1.0), (7, 1.0), (8, 1.0), (10, -1.0), (11, -1.0), (13, 1.0)],
        ),
        (
            n8,
            vec![(3, 1.0), (4, -1.0), (6, 1.0), (7, -1.0), (8, -1.0), (9, 1.0), (11, -1.0), (12, 1.0)],
        ),
        (
            n8,
            vec![(2, 1.0), (4, -1.0), (5, 1.0), (7, -1.0), (8, -1.0), (10, 1.0), (11, -1.0), (13, 1.0)],
        ),
        (n12, (2..=13).map(|k| (k, 1.0)).collect()),
        (
            n12,
            vec![
                (2, 1.0), (3, -1.0), (4, 1.0), (5, -1.0), (6, 1.0), (7, -1.0),
                (8, -1.0), (9, 1.0), (10, -1.0), (11, 1.0), (12, -1.0), (13, 1.0),
            ],
        ),
        (
            n24,
            vec![
                (3, -1.0), (4, -r3), (5, -2.0), (6, -r3), (7, -1.0),
                (8, 1.0), (9, r3), (10, 2.0), (11, r3), (12, 1.0),
            ],
        ),
        (
            n24,
            vec![
                (2, -1.0), (4, 1.0), (5, r3), (6, 2.0), (7, r3),
                (8, -r3), (9, -2.0), (10, -r3), (11, -1.0), (13, 1.0),
            ],
        ),
        (
            n24,
            vec![
                (3, -1.0), (4, r3), (5, -2.0), (6, r3), (7, -1.0),
                (8, 1.0), (9, -r3), (10, 2.0), (11, -r3), (12, 1.0),
            ],
        ),
        (
            n24,
            vec![
                (2, -1.0), (4, 1.0), (5, -r3), (6, 2.0), (7, -r3),
                (8, r3), (9, -2.0), (10, r3), (11, -1.0), (13, 1.0),
            ],
        ),
    ]
}

/// Reference kets of the scheme.
///
/// `singlet` is the target `-(1/sqrt3)|chi> + sqrt(2/3)|varpi>`, the end
/// point of the dark state. It equals the totally antisymmetric three-atom
/// singlet up to a local phase flip of `|g2>` on atom 1; the antisymmetric
/// form is kept as `singlet_antisymmetric`.
#[derive(Debug, Clone)]
pub struct SpecialStates {
    pub psi1: Ket,
    pub chi: Ket,
    pub varpi: Ket,
    pub singlet: Ket,
    pub singlet_antisymmetric: Ket,
    /// `Psi_1 .. Psi_12`, zero-based.
    pub psi: Vec<Ket>,
}

impl SpecialStates {
    pub fn psi(&self, n: usize) -> &Ket {
        &self.psi[n - 1]
    }
}

pub fn special_states(space: &Arc<StateSpace>) -> Result<SpecialStates, ModelError> {
    for s in PHI {
        if !space.contains(&s) {
            return Err(HilbertError::MissingState(s).into());
        }
    }
    let h = 1.0 / 2f64.sqrt();
    let ket = |terms: &[(f64, usize)]| -> Result<Ket, ModelError> {
        let t: Vec<(f64, BasisState)> = terms.iter().map(|&(c, k)| (c, phi(k))).collect();
        Ok(Ket::from_terms(space, &t)?)
    };
    let psi1 = ket(&[(-h, 1), (h, 14)])?;
    let chi = ket(&[(-h, 1), (h, 14)])?;
    let varpi = ket(&[(0.5, 15), (-0.5, 16), (0.5, 17), (-0.5, 18)])?;
    let a = 1.0 / 6f64.sqrt();
    let singlet = ket(&[(a, 1), (-a, 14), (a, 15), (-a, 16), (a, 17), (-a, 18)])?;
    let singlet_antisymmetric = ket(&[(-a, 1), (a, 14), (a, 15), (-a, 16), (a, 17), (-a, 18)])?;
    let psi = psi_table()
        .iter()
        .map(|(norm, terms)| {
            let t: Vec<(f64, usize)> = terms.iter().map(|&(k, w)| (norm * w, k)).collect();
            ket(&t)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SpecialStates {
        psi1,
        chi,
        varpi,
        singlet,
        singlet_antisymmetric,
        psi,
    })
}

/// Labels of the three-level effective basis `(|chi>, |Psi_2>, |varpi>)`.
pub const THREE_LEVEL: [&str; 3] = ["chi", "Psi2", "varpi"];
/// Labels of the two-level basis `(|chi>, |varpi>)`.
pub const TWO_LEVEL: [&str; 2] = ["chi", "varpi"];

pub fn three_level_basis() -> Basis {
    Basis::effective(&THREE_LEVEL)
}

pub fn two_level_basis() -> Basis {
    Basis::effective(&TWO_LEVEL)
}

fn three_level(coupling_chi: Complex64, coupling_varpi: Complex64, excited: f64) -> CMatrix {
    let mut m = CMatrix::zeros(3, 3);
    m[(1, 0)] = coupling_chi;
    m[(0, 1)] = coupling_chi.conj();
    m[(1, 2)] = coupling_varpi;
    m[(2, 1)] = coupling_varpi.conj();
    m[(1, 1)] = Complex64::new(excited, 0.0);
    m
}

/// Zeno-limit model `(Omega_1/sqrt3)|Psi2><chi| + (2 Omega_3/sqrt6)|Psi2><varpi| + h.c.`
pub fn effective_zeno(s: &PulseSchedule) -> TimeDependentHamiltonian {
    let s = *s;
    TimeDependentHamiltonian::new(three_level_basis(), move |t| {
        let (o1, o3) = s.envelopes(t);
        Ok(three_level(
            Complex64::new(o1 / 3f64.sqrt(), 0.0),
            Complex64::new(2.0 * o3 / 6f64.sqrt(), 0.0),
            0.0,
        ))
    })
}

/// Detuned Zeno-limit model with the counter-diabatic amplitudes and
/// `Delta |Psi2><Psi2|`.
pub fn effective_nonresonant(c: &CddPulse) -> TimeDependentHamiltonian {
    let c = *c;
    TimeDependentHamiltonian::new(three_level_basis(), move |t| {
        let [o1, _, o3] = c.drive_amplitudes(t)?;
        Ok(three_level(
            o1 / 3f64.sqrt(),
            o3 * (2.0 / 6f64.sqrt()),
            c.delta,
        ))
    })
}

/// Second-order elimination of `|Psi2>` for arbitrary complex amplitudes:
/// `H_ij = -conj(v_i) v_j / Delta` with `v = (Omega_1'/sqrt3, 2 Omega_3'/sqrt6)`,
/// with `(tr H / 2) I` removed.
pub fn eliminated_matrix(o1: Complex64, o3: Complex64, delta: f64) -> (CMatrix, f64) {
    let v = [o1 / 3f64.sqrt(), o3 * (2.0 / 6f64.sqrt())];
    let mut m = CMatrix::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] = -(v[i].conj() * v[j]) / delta;
        }
    }
    let shift = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
    m[(0, 0)] -= shift;
    m[(1, 1)] -= shift;
    (m, shift)
}

/// Two-level model after eliminating `|Psi2>`.
pub fn effective_eliminated(c: &CddPulse) -> Result<TimeDependentHamiltonian, ModelError> {
    if c.delta == 0.0 {
        return Err(ModelError::EliminationUndefined);
    }
    let c = *c;
    Ok(TimeDependentHamiltonian::new(two_level_basis(), move |t| {
        let [o1, _, o3] = c.drive_amplitudes(t)?;
        Ok(eliminated_matrix(o1, o3, c.delta).0)
    })
    .with_note("common diagonal light shift (tr H/2) removed as a global phase"))
}

/// Counter-diabatic generator `i theta_dot |chi><varpi| + h.c.`.
pub fn cdd_hamiltonian(s: &PulseSchedule) -> TimeDependentHamiltonian {
    let s = *s;
    TimeDependentHamiltonian::new(two_level_basis(), move |t| {
        let rate = s.theta_dot(t)?;
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = I * rate;
        m[(1, 0)] = -I * rate;
        Ok(m)
    })
}

/// Columns are the images of the source basis vectors.
#[derive(Debug, Clone)]
pub struct Isometry {
    pub from: Basis,
    pub to: Basis,
    pub matrix: CMatrix,
}

impl Isometry {
    pub fn embed(&self, ket: &Ket) -> Ket {
        Ket {
            basis: self.to.clone(),
            amplitudes: &self.matrix * &ket.amplitudes,
        }
    }

    /// Adjoint map; exact on the image of the isometry.
    pub fn project(&self, ket: &Ket) -> Ket {
        Ket {
            basis: self.from.clone(),
            amplitudes: self.matrix.adjoint() * &ket.amplitudes,
        }
    }

    pub fn compose(&self, inner: &Isometry) -> Isometry {
        Isometry {
            from: inner.from.clone(),
            to: self.to.clone(),
            matrix: &self.matrix * &inner.matrix,
        }
    }
}

fn isometry_from_kets(from: Basis, kets: &[&Ket]) -> Isometry {
    let to = kets[0].basis.clone();
    let n = to.dim();
    let m = CMatrix::from_fn(n, kets.len(), |r, c| kets[c].amplitudes[r]);
    Isometry {
        from,
        to,
        matrix: m,
    }
}

/// `(chi, Psi2, varpi)` into the physical space.
pub fn embed_three_level(states: &SpecialStates) -> Isometry {
    isometry_from_kets(
        three_level_basis(),
        &[&states.chi, states.psi(2), &states.varpi],
    )
}

/// `(chi, varpi)` into the physical space.
pub fn embed_two_level(states: &SpecialStates) -> Isometry {
    isometry_from_kets(two_level_basis(), &[&states.chi, &states.varpi])
}

/// `(chi, varpi)` into `(chi, Psi2, varpi)`.
pub fn two_into_three() -> Isometry {
    let mut m = CMatrix::zeros(3, 2);
    m[(0, 0)] = ONE;
    m[(2, 1)] = ONE;
    Isometry {
        from: two_level_basis(),
        to: three_level_basis(),
        matrix: m,
    }
}

/// `-(1/sqrt3)|chi> + sqrt(2/3)|varpi>` on the two-level basis.
pub fn two_level_target() -> Ket {
    let mut k = Ket::basis_vector(two_level_basis(), 0);
    k.amplitudes[0] = Complex64::new(-1.0 / 3f64.sqrt(), 0.0);
    k.amplitudes[1] = Complex64::new((2.0 / 3.0f64).sqrt(), 0.0);
    k
}

/// Same target on the three-level basis.
pub fn three_level_target() -> Ket {
    two_into_three().embed(&two_level_target())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{eigh, max_abs, HERMITIAN_TOL};

    fn preset() -> PulseSchedule {
        PulseSchedule::default_preset(0.2, 40.0).unwrap()
    }

    #[test]
    fn closed_space_is_the_eighteen_states() {
        let space = closed_space();
        assert_eq!(space.dim(), 18);
        let mut a: Vec<_> = space.states().to_vec();
        let mut b = PHI.to_vec();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(space.state(0), phi(1));
        assert_eq!(space.state(1), phi(14));
    }

    #[test]
    fn dark_seed_has_trivial_closure() {
        let mut gens = cavity_coupling_specs();
        gens.extend(drive_specs());
        let s = closure_subspace(&[BasisState::vacuum([G0, G0, G0])], &gens).unwrap();
        assert_eq!(s.dim(), 1);
    }

    #[test]
    fn dissipative_space_matches_brute_force() {
        // independent oracle: fixed-point iteration over the full 256 space
        let full = enumerate_full_space();
        let mut moves = cavity_coupling_specs();
        moves.extend(drive_specs());
        let mut both: Vec<OpSpec> = moves.iter().map(|m| m.adjoint()).collect();
        both.extend(moves);
        both.extend(jump_specs().into_iter().map(|(_, s, _)| s));
        let mut member = vec![false; full.dim()];
        for s in initial_seeds() {
            member[full.index_of(&s).unwrap()] = true;
        }
        loop {
            let mut changed = false;
            for k in 0..full.dim() {
                if !member[k] {
                    continue;
                }
                for m in &both {
                    if let Some((t, _)) = m.apply(&full.state(k), 1) {
                        let j = full.index_of(&t).unwrap();
                        if !member[j] {
                            member[j] = true;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let expected = member.iter().filter(|&&m| m).count();
        let space = dissipative_space();
        assert_eq!(space.dim(), expected);
        assert_eq!(expected, 24);
        for s in space.states() {
            assert!(member[full.index_of(s).unwrap()]);
        }
    }

    #[test]
    fn spectrum_of_coupling_on_eighteen_states() {
        let space = closed_space();
        let h = atom_cavity_coupling(1.0, &space).unwrap();
        let e = eigh(&h.matrix).unwrap();
        let r3 = 3f64.sqrt();
        let mut expected = vec![-2.0, -r3, -r3, -1.0, -1.0, 1.0, 1.0, r3, r3, 2.0];
        expected.extend([0.0; 8]);
        expected.sort_by(f64::total_cmp);
        for (a, b) in e.values.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn resonant_matrix_elements() {
        let space = closed_space();
        let s = preset();
        let h = hamiltonian_resonant(&ModelParams::default(), &s, &space).unwrap();
        let i1 = space.index_of(&phi(1)).unwrap();
        let i2 = space.index_of(&phi(2)).unwrap();
        for t in [0.0, 13.0, 20.0, 31.5] {
            let m = h.at(t).unwrap();
            assert_eq!(m[(i2, i1)].re, s.envelopes(t).0);
            assert!(hermiticity_ok(&m));
        }
    }

    fn hermiticity_ok(m: &CMatrix) -> bool {
        crate::hilbert::hermiticity_defect(m) <= HERMITIAN_TOL
    }

    #[test]
    fn resonant_needs_closed_space() {
        let partial = Arc::new(StateSpace::from_states(PHI[..10].iter().copied()));
        let err = hamiltonian_resonant(&ModelParams::default(), &preset(), &partial).unwrap_err();
        assert!(matches!(err, ModelError::NotClosed { .. }), "{err}");
    }

    #[test]
    fn apf_matrix_elements() {
        let space = closed_space();
        let c = CddPulse::new(preset(), 3.0).unwrap();
        let p = ModelParams::new(1.0, 3.0, 0.0, 0.0).unwrap();
        let h = hamiltonian_apf(&p, &c, &space).unwrap();
        let t = 17.0;
        let m = h.at(t).unwrap();
        let amp = c.amplitude(t).unwrap();
        let idx = |s: BasisState| space.index_of(&s).unwrap();
        let e01 = idx(BasisState::vacuum([E, G0, G1]));
        let g01 = idx(BasisState::vacuum([G2, G0, G1]));
        assert!((m[(e01, g01)] - Complex64::new(amp, 0.0)).norm() < 1e-15);
        let e3 = idx(BasisState::vacuum([G0, G1, E]));
        let g3 = idx(BasisState::vacuum([G0, G1, G2]));
        // delivered phase on atoms 2 and 3 is -i
        assert!((m[(e3, g3)] - Complex64::new(0.0, -amp / 2f64.sqrt())).norm() < 1e-15);
        let plus = hamiltonian_apf(&p, &c.with_phase(crate::pulses::DrivePhase::PlusI), &space)
            .unwrap()
            .at(t)
            .unwrap();
        assert!((plus[(e3, g3)] - Complex64::new(0.0, amp / 2f64.sqrt())).norm() < 1e-15);
        for (k, s) in space.states().iter().enumerate() {
            let expect = if s.levels.contains(&E) { 3.0 } else { 0.0 };
            assert_eq!(m[(k, k)].re, expect);
        }
        assert!(hermiticity_ok(&m));
    }

    #[test]
    fn apf_without_drive_is_block_diagonal() {
        let space = closed_space();
        let c = CddPulse::new(preset(), 3.0).unwrap();
        let p = ModelParams::new(1.0, 3.0, 0.0, 0.0).unwrap();
        let h = hamiltonian_apf(&p, &c, &space).unwrap();
        let m = h.at(1e4).unwrap();
        let fixed = atom_cavity_coupling(1.0, &space).unwrap().matrix
            + excited_number(&space).unwrap().matrix * Complex64::new(3.0, 0.0);
        assert_eq!(max_abs(&(m.clone() - fixed)), 0.0);
        for (k, s) in space.states().iter().enumerate() {
            if s.levels.contains(&G2) {
                for j in 0..space.dim() {
                    if j != k {
                        assert_eq!(m[(k, j)], ZERO);
                    }
                }
            }
        }
    }

    #[test]
    fn jumps_count_and_nilpotency() {
        let space = dissipative_space();
        let p = ModelParams::new(1.0, 3.0, 0.05, 0.02).unwrap();
        let jumps = jump_operators(&p, &space).unwrap();
        assert_eq!(jumps.len(), 11);
        assert_eq!(jumps.iter().filter(|j| j.kind == JumpKind::Cavity).count(), 2);
        for j in &jumps {
            let sq = &j.operator.matrix * &j.operator.matrix;
            assert_eq!(max_abs(&sq), 0.0, "{}", j.label);
            let expect = if j.kind == JumpKind::Cavity { 0.05 } else { 0.02 };
            assert_eq!(j.rate, expect);
        }
        let zero = jump_operators(&ModelParams::default(), &space).unwrap();
        assert!(zero.iter().all(|j| j.rate == 0.0));
    }

    #[test]
    fn jumps_need_closed_space() {
        let space = closed_space();
        assert!(jump_operators(&ModelParams::default(), &space).is_err());
    }

    #[test]
    fn special_state_overlaps() {
        let space = closed_space();
        let st = special_states(&space).unwrap();
        let r3 = 3f64.sqrt();
        assert!(st.chi.inner(&st.varpi).norm() < 1e-15);
        assert!((st.chi.inner(&st.singlet) - Complex64::new(-1.0 / r3, 0.0)).norm() < 1e-15);
        assert!(
            (st.varpi.inner(&st.singlet) - Complex64::new(2f64.sqrt() / r3, 0.0)).norm() < 1e-15
        );
        for k in [&st.psi1, &st.chi, &st.varpi, &st.singlet, &st.singlet_antisymmetric] {
            assert!((k.norm() - 1.0).abs() < 1e-12);
        }
        assert!((st.psi1.inner(&st.chi).norm() - 1.0).abs() < 1e-15);
        // the two target conventions differ by a phase flip on phi_1 and phi_14
        assert!((st.singlet.inner(&st.singlet_antisymmetric).re - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn antisymmetric_singlet_is_antisymmetric() {
        let space = closed_space();
        let st = special_states(&space).unwrap();
        // swapping any two atoms flips the sign
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            for (k, s) in space.states().iter().enumerate() {
                let amp = st.singlet_antisymmetric.amplitudes[k];
                if amp == ZERO {
                    continue;
                }
                let mut t = *s;
                t.levels.swap(i, j);
                let kt = space.index_of(&t).unwrap();
                assert!((st.singlet_antisymmetric.amplitudes[kt] + amp).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn psi_kets_are_eigenvectors() {
        let space = closed_space();
        let st = special_states(&space).unwrap();
        let h = atom_cavity_coupling(1.0, &space).unwrap();
        for (n, ket) in st.psi.iter().enumerate() {
            assert!((ket.norm() - 1.0).abs() < 1e-12);
            let hv = h.apply(ket);
            let resid = (&hv.amplitudes - &ket.amplitudes * Complex64::new(PSI_EIGENVALUES[n], 0.0))
                .norm();
            assert!(resid <= 1e-10, "Psi_{} residual {resid:e}", n + 1);
        }
    }

    #[test]
    fn psi_gram_matrix() {
        let space = closed_space();
        let st = special_states(&space).unwrap();
        // Within the degenerate pairs the listed vectors are not orthogonal;
        // these are their exact overlaps. Everything else is orthonormal.
        let r3h = 3f64.sqrt() / 2.0;
        let pair = |a: usize, b: usize| -> f64 {
            match (a.min(b), a.max(b)) {
                (3, 4) => -0.5,
                (5, 6) => 0.5,
                (9, 10) => -r3h,
                (11, 12) => r3h,
                _ => 0.0,
            }
        };
        for a in 1..=12 {
            for b in 1..=12 {
                let g = st.psi(a).inner(st.psi(b));
                let expect = if a == b { 1.0 } else { pair(a, b) };
                assert!((g - Complex64::new(expect, 0.0)).norm() < 1e-12, "<Psi{a}|Psi{b}> = {g}");
            }
        }
    }

    #[test]
    fn psi_pairs_span_the_eigenspaces() {
        let space = closed_space();
        let st = special_states(&space).unwrap();
        let h = atom_cavity_coupling(1.0, &space).unwrap();
        let e = eigh(&h.matrix).unwrap();
        let projector_from_eigh = |value: f64| {
            let mut p = CMatrix::zeros(space.dim(), space.dim());
            for (k, v) in e.values.iter().enumerate() {
                if (v - value).abs() < 1e-8 {
                    let col = e.vectors.column(k);
                    p += col * col.adjoint();
                }
            }
            p
        };
        for (a, b) in [(3, 4), (5, 6), (9, 10), (11, 12)] {
            let u = st.psi(a).amplitudes.clone();
            let w = st.psi(b).amplitudes.clone();
            let w = &w - &u * u.dotc(&w);
            let w = w.unscale(w.norm());
            let p = &u * u.adjoint() + &w * w.adjoint();
            let q = projector_from_eigh(PSI_EIGENVALUES[a - 1]);
            assert!(max_abs(&(p - q)) < 1e-10, "pair ({a},{b})");
        }
    }

    #[test]
    fn effective_zeno_spectrum_and_dark_state() {
        let s = preset();
        let h = effective_zeno(&s);
        for t in [5.0, 14.0, 20.0, 27.0, 35.0] {
            let m = h.at(t).unwrap();
            let (th, big) = s.mixing_angle(t).unwrap();
            let e = eigh(&m).unwrap();
            let expect = [-big / 3f64.sqrt(), 0.0, big / 3f64.sqrt()];
            for (a, b) in e.values.iter().zip(expect) {
                assert!((a - b).abs() < 1e-14);
            }
            let dark = crate::hilbert::CVector::from_vec(vec![
                Complex64::new(-th.cos(), 0.0),
                ZERO,
                Complex64::new(th.sin(), 0.0),
            ]);
            assert!((&m * dark).norm() < 1e-15);
        }
        assert_eq!(max_abs(&h.at(1e5).unwrap()), 0.0);
    }

    #[test]
    fn effective_nonresonant_structure() {
        let c = CddPulse::new(preset(), 3.0).unwrap();
        let h = effective_nonresonant(&c);
        for k in 0..100 {
            let t = 40.0 * (k as f64 * 0.618_033_988_7).fract();
            let m = h.at(t).unwrap();
            assert!(hermiticity_ok(&m));
            assert_eq!(m[(0, 0)], ZERO);
            assert_eq!(m[(1, 1)].re, 3.0);
            assert_eq!(m[(2, 2)], ZERO);
        }
        let far = h.at(1e5).unwrap();
        assert_eq!(max_abs(&(far - three_level(ZERO, ZERO, 3.0))), 0.0);
    }

    #[test]
    fn elimination_phase_conventions() {
        let amp = 0.37;
        let delta = 3.0;
        let rate = amp * amp / (3.0 * delta);
        let (plus, shift) =
            eliminated_matrix(Complex64::new(amp, 0.0), Complex64::new(0.0, amp / 2f64.sqrt()), delta);
        assert!((plus[(0, 1)] - Complex64::new(0.0, -rate)).norm() < 1e-15);
        assert!(plus[(0, 0)].norm() < 1e-15 && plus[(1, 1)].norm() < 1e-15);
        assert!((shift + rate).abs() < 1e-15);
        let (minus, _) =
            eliminated_matrix(Complex64::new(amp, 0.0), Complex64::new(0.0, -amp / 2f64.sqrt()), delta);
        assert!((minus[(0, 1)] - Complex64::new(0.0, rate)).norm() < 1e-15);
        let (real, _) =
            eliminated_matrix(Complex64::new(amp, 0.0), Complex64::new(amp / 2f64.sqrt(), 0.0), delta);
        assert!((real[(0, 1)].norm() - rate).abs() < 1e-15);
        assert_eq!(real[(0, 1)].im, 0.0);
    }

    #[test]
    fn eliminated_equals_cdd_on_grid() {
        let s = preset();
        let c = CddPulse::new(s, 3.0).unwrap();
        let elim = effective_eliminated(&c).unwrap();
        let cdd = cdd_hamiltonian(&s);
        for k in 0..=400 {
            let t = 40.0 * k as f64 / 400.0;
            let d = max_abs(&(elim.at(t).unwrap() - cdd.at(t).unwrap()));
            assert!(d <= 1e-12, "t = {t}: {d:e}");
        }
        assert!(!elim.notes().is_empty());
    }

    #[test]
    fn cdd_generator_is_imaginary_hermitian() {
        let s = preset();
        let h = cdd_hamiltonian(&s);
        let m = h.at(18.0).unwrap();
        assert!(hermiticity_ok(&m));
        assert_eq!(m[(0, 1)].re, 0.0);
        assert!(m[(0, 1)].im > 0.0);
        assert_eq!(m[(0, 0)], ZERO);
    }

    #[test]
    fn embeddings_are_isometries() {
        let space = closed_space();
        let st = special_states(&space).unwrap();
        for iso in [embed_three_level(&st), embed_two_level(&st)] {
            let g = iso.matrix.adjoint() * &iso.matrix;
            let n = g.nrows();
            assert!(max_abs(&(g - CMatrix::identity(n, n))) < 1e-12);
        }
        let tgt = embed_two_level(&st).embed(&two_level_target());
        assert!((tgt.inner(&st.singlet).norm() - 1.0).abs() < 1e-12);
        let via3 = embed_three_level(&st).compose(&two_into_three());
        assert!(max_abs(&(via3.matrix - embed_two_level(&st).matrix)) < 1e-15);
    }

    #[test]
    fn effective_zeno_matches_projected_couplings() {
        // <Psi2|H|chi> and <Psi2|H|varpi> of the full model reproduce the
        // three-level couplings
        let space = closed_space();
        let st = special_states(&space).unwrap();
        let s = preset();
        let full = hamiltonian_resonant(&ModelParams::default(), &s, &space).unwrap();
        let eff = effective_zeno(&s);
        let iso = embed_three_level(&st);
        for t in [8.0, 20.0, 30.0] {
            let hf = full.at(t).unwrap();
            let drive_only = &hf - atom_cavity_coupling(1.0, &space).unwrap().matrix;
            let projected = iso.matrix.adjoint() * drive_only * &iso.matrix;
            assert!(max_abs(&(projected - eff.at(t).unwrap())) < 1e-14);
        }
    }
}
