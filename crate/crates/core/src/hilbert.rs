//! Basis enumeration, symbolic operators and dense complex linear algebra.
//!
//! Every configuration of the three four-level atoms and the two cavity
//! modes is a [`BasisState`]. A [`StateSpace`] is an ordered, indexed list
//! of such states; operators and kets live in a [`Basis`], which is either a
//! physical state space or a small labelled space used by the effective
//! models.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("no seeds")]
    NoSeeds,
    #[error("unknown operator spec `{0}`")]
    UnknownSpec(String),
    #[error("matrix is not Hermitian (max asymmetry {max_asymmetry:e})")]
    NotHermitian { max_asymmetry: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("state {0} is not in the space")]
    MissingState(BasisState),
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
}

/// Atomic level, ordered `g0 < g1 < g2 < e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    G0,
    G1,
    G2,
    E,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::G0, Level::G1, Level::G2, Level::E];
    pub const GROUND: [Level; 3] = [Level::G0, Level::G1, Level::G2];

    pub fn label(self) -> &'static str {
        match self {
            Level::G0 => "g0",
            Level::G1 => "g1",
            Level::G2 => "g2",
            Level::E => "e",
        }
    }
}

impl FromStr for Level {
    type Err = HilbertError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "g0" => Ok(Level::G0),
            "g1" => Ok(Level::G1),
            "g2" => Ok(Level::G2),
            "e" => Ok(Level::E),
            other => Err(HilbertError::UnknownSpec(other.to_string())),
        }
    }
}

/// Left- or right-circularly polarized cavity mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    L,
    R,
}

impl Mode {
    fn slot(self) -> usize {
        match self {
            Mode::L => 0,
            Mode::R => 1,
        }
    }
}

/// Three atomic levels plus the photon numbers `(n_L, n_R)`.
///
/// The derived ordering is lexicographic over (atom 1, atom 2, atom 3, n_L, n_R).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    pub levels: [Level; 3],
    pub photons: [u8; 2],
}

impl BasisState {
    pub const fn new(levels: [Level; 3], photons: [u8; 2]) -> Self {
        Self { levels, photons }
    }

    /// Ground-photon-vacuum configuration `|l1, l2, l3>|00>`.
    pub const fn vacuum(levels: [Level; 3]) -> Self {
        Self::new(levels, [0, 0])
    }

    /// Number of atoms in `e` plus the number of photons.
    pub fn excitations(&self) -> usize {
        self.levels.iter().filter(|&&l| l == Level::E).count()
            + self.photons.iter().map(|&n| n as usize).sum::<usize>()
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "|{},{},{}>|{}{}>",
            self.levels[0].label(),
            self.levels[1].label(),
            self.levels[2].label(),
            self.photons[0],
            self.photons[1]
        )
    }
}

/// Ordered list of basis states with a consistent index map.
#[derive(Debug, Clone)]
pub struct StateSpace {
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
}

impl PartialEq for StateSpace {
    fn eq(&self, other: &Self) -> bool {
        self.states == other.states
    }
}

impl StateSpace {
    /// Builds a space from an ordered list; duplicates are rejected by keeping
    /// only the first occurrence.
    pub fn from_states(states: impl IntoIterator<Item = BasisState>) -> Self {
        let mut list = Vec::new();
        let mut index = HashMap::new();
        for s in states {
            if let std::collections::hash_map::Entry::Vacant(v) = index.entry(s) {
                v.insert(list.len());
                list.push(s);
            }
        }
        Self {
            states: list,
            index,
        }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn state(&self, k: usize) -> BasisState {
        self.states[k]
    }

    pub fn index_of(&self, s: &BasisState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn contains(&self, s: &BasisState) -> bool {
        self.index.contains_key(s)
    }

    /// Largest photon number present in any state.
    pub fn max_photons(&self) -> u8 {
        self.states
            .iter()
            .flat_map(|s| s.photons)
            .max()
            .unwrap_or(0)
    }
}

/// All `4^3 * 2 * 2 = 256` configurations with at most one photon per mode.
pub fn enumerate_full_space() -> StateSpace {
    enumerate_full_space_with_cutoff(1)
}

/// Full space with `cutoff` photons per mode. Cutoff 2 exists for leak checks.
pub fn enumerate_full_space_with_cutoff(cutoff: u8) -> StateSpace {
    let mut states = Vec::with_capacity(64 * (cutoff as usize + 1).pow(2));
    for a in Level::ALL {
        for b in Level::ALL {
            for c in Level::ALL {
                for nl in 0..=cutoff {
                    for nr in 0..=cutoff {
                        states.push(BasisState::new([a, b, c], [nl, nr]));
                    }
                }
            }
        }
    }
    StateSpace::from_states(states)
}

/// One elementary factor of an operator product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Factor {
    /// `|to>_atom <from|` with `atom` in 1..=3.
    Transition { atom: u8, to: Level, from: Level },
    Annihilate(Mode),
    Create(Mode),
}

impl Factor {
    fn adjoint(self) -> Factor {
        match self {
            Factor::Transition { atom, to, from } => Factor::Transition {
                atom,
                to: from,
                from: to,
            },
            Factor::Annihilate(m) => Factor::Create(m),
            Factor::Create(m) => Factor::Annihilate(m),
        }
    }

    fn validate(self) -> Result<(), HilbertError> {
        match self {
            Factor::Transition { atom, .. } if !(1..=3).contains(&atom) => Err(
                HilbertError::UnknownSpec(format!("atom index {atom} outside 1..=3")),
            ),
            _ => Ok(()),
        }
    }

    /// Image of `s` with its (real, nonnegative) amplitude; `None` when the
    /// factor annihilates `s` or the photon number would exceed `cutoff`.
    fn apply(self, s: &BasisState, cutoff: u8) -> Option<(BasisState, f64)> {
        let mut out = *s;
        match self {
            Factor::Transition { atom, to, from } => {
                let k = atom as usize - 1;
                if s.levels[k] != from {
                    return None;
                }
                out.levels[k] = to;
                Some((out, 1.0))
            }
            Factor::Annihilate(m) => {
                let n = s.photons[m.slot()];
                if n == 0 {
                    return None;
                }
                out.photons[m.slot()] = n - 1;
                Some((out, (n as f64).sqrt()))
            }
            Factor::Create(m) => {
                let n = s.photons[m.slot()];
                if n >= cutoff {
                    return None;
                }
                out.photons[m.slot()] = n + 1;
                Some((out, ((n + 1) as f64).sqrt()))
            }
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Transition { atom, to, from } => {
                write!(f, "s{}({},{})", atom, to.label(), from.label())
            }
            Factor::Annihilate(Mode::L) => write!(f, "a_L"),
            Factor::Annihilate(Mode::R) => write!(f, "a_R"),
            Factor::Create(Mode::L) => write!(f, "a_L+"),
            Factor::Create(Mode::R) => write!(f, "a_R+"),
        }
    }
}

/// Symbolic operator: a product of factors, written left to right as in
/// `|e>_1<g0| a_L` (the rightmost factor acts first).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OpSpec {
    factors: Vec<Factor>,
}

impl OpSpec {
    pub fn product(factors: Vec<Factor>) -> Result<Self, HilbertError> {
        if factors.is_empty() {
            return Err(HilbertError::UnknownSpec("empty product".into()));
        }
        for f in &factors {
            f.validate()?;
        }
        Ok(Self { factors })
    }

    /// `|to>_atom <from|`.
    pub fn transition(atom: u8, to: Level, from: Level) -> Result<Self, HilbertError> {
        Self::product(vec![Factor::Transition { atom, to, from }])
    }

    pub fn annihilate(mode: Mode) -> Self {
        Self {
            factors: vec![Factor::Annihilate(mode)],
        }
    }

    pub fn create(mode: Mode) -> Self {
        Self {
            factors: vec![Factor::Create(mode)],
        }
    }

    /// `self * rhs` (rhs acts first).
    pub fn times(mut self, mut rhs: OpSpec) -> OpSpec {
        self.factors.append(&mut rhs.factors);
        self
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn adjoint(&self) -> OpSpec {
        OpSpec {
            factors: self.factors.iter().rev().map(|f| f.adjoint()).collect(),
        }
    }

    pub fn apply(&self, s: &BasisState, cutoff: u8) -> Option<(BasisState, f64)> {
        let mut cur = *s;
        let mut amp = 1.0;
        for f in self.factors.iter().rev() {
            let (next, a) = f.apply(&cur, cutoff)?;
            cur = next;
            amp *= a;
        }
        Some((cur, amp))
    }
}

impl fmt::Display for OpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|x| x.to_string()).collect();
        write!(f, "{}", parts.join("*"))
    }
}

impl FromStr for OpSpec {
    type Err = HilbertError;

    /// Parses products such as `s1(e,g0)*a_L`, `a_R+` or `s3(g1,e)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || HilbertError::UnknownSpec(s.to_string());
        let mut factors = Vec::new();
        for raw in s.split('*') {
            let tok = raw.trim();
            let factor = match tok {
                "a_L" => Factor::Annihilate(Mode::L),
                "a_R" => Factor::Annihilate(Mode::R),
                "a_L+" => Factor::Create(Mode::L),
                "a_R+" => Factor::Create(Mode::R),
                _ => {
                    let rest = tok.strip_prefix('s').ok_or_else(unknown)?;
                    let (atom, args) = rest.split_once('(').ok_or_else(unknown)?;
                    let args = args.strip_suffix(')').ok_or_else(unknown)?;
                    let (to, from) = args.split_once(',').ok_or_else(unknown)?;
                    let atom: u8 = atom.parse().map_err(|_| unknown())?;
                    Factor::Transition {
                        atom,
                        to: to.parse().map_err(|_| unknown())?,
                        from: from.parse().map_err(|_| unknown())?,
                    }
                }
            };
            factors.push(factor);
        }
        OpSpec::product(factors)
    }
}

/// Breadth-first closure of `seeds` under `generators` and their adjoints.
pub fn closure_subspace(
    seeds: &[BasisState],
    generators: &[OpSpec],
) -> Result<StateSpace, HilbertError> {
    closure_subspace_directed(seeds, generators, &[])
}

/// Closure under `two_way` generators (with adjoints) and `one_way`
/// generators applied only in the given direction, as for jump operators.
///
/// Order: seeds first, then discovery order; the states found while
/// expanding one state are appended in lexicographic order.
pub fn closure_subspace_directed(
    seeds: &[BasisState],
    two_way: &[OpSpec],
    one_way: &[OpSpec],
) -> Result<StateSpace, HilbertError> {
    if seeds.is_empty() {
        return Err(HilbertError::NoSeeds);
    }
    let cutoff = seeds
        .iter()
        .flat_map(|s| s.photons)
        .max()
        .unwrap_or(0)
        .max(1);
    let mut moves: Vec<OpSpec> = Vec::with_capacity(2 * two_way.len() + one_way.len());
    for g in two_way {
        moves.push(g.clone());
        moves.push(g.adjoint());
    }
    moves.extend(one_way.iter().cloned());

    let mut order: Vec<BasisState> = Vec::new();
    let mut seen: HashSet<BasisState> = HashSet::new();
    let mut queue = VecDeque::new();
    for s in seeds {
        if seen.insert(*s) {
            order.push(*s);
            queue.push_back(*s);
        }
    }
    while let Some(s) = queue.pop_front() {
        let mut found: Vec<BasisState> = moves
            .iter()
            .filter_map(|m| m.apply(&s, cutoff).map(|(t, _)| t))
            .filter(|t| !seen.contains(t))
            .collect();
        found.sort();
        found.dedup();
        for t in found {
            seen.insert(t);
            order.push(t);
            queue.push_back(t);
        }
    }
    Ok(StateSpace::from_states(order))
}

/// A physical state space or a small labelled effective basis.
#[derive(Debug, Clone)]
pub enum Basis {
    Physical(Arc<StateSpace>),
    Effective(Arc<[&'static str]>),
}

impl Basis {
    pub fn physical(space: StateSpace) -> Self {
        Basis::Physical(Arc::new(space))
    }

    pub fn effective(labels: &[&'static str]) -> Self {
        Basis::Effective(labels.into())
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::Physical(s) => s.dim(),
            Basis::Effective(l) => l.len(),
        }
    }

    pub fn as_physical(&self) -> Option<&Arc<StateSpace>> {
        match self {
            Basis::Physical(s) => Some(s),
            Basis::Effective(_) => None,
        }
    }

    pub fn same_as(&self, other: &Basis) -> bool {
        match (self, other) {
            (Basis::Physical(a), Basis::Physical(b)) => Arc::ptr_eq(a, b) || a == b,
            (Basis::Effective(a), Basis::Effective(b)) => a == b,
            _ => false,
        }
    }
}

/// Dense operator on a basis.
#[derive(Debug, Clone)]
pub struct Operator {
    pub basis: Basis,
    pub matrix: CMatrix,
}

impl Operator {
    pub fn new(basis: Basis, matrix: CMatrix) -> Result<Self, HilbertError> {
        if !matrix.is_square() {
            return Err(HilbertError::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        if matrix.nrows() != basis.dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: basis.dim(),
                actual: matrix.nrows(),
            });
        }
        Ok(Self { basis, matrix })
    }

    pub fn zeros(basis: Basis) -> Self {
        let n = basis.dim();
        Self {
            basis,
            matrix: CMatrix::zeros(n, n),
        }
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            basis: self.basis.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn apply(&self, ket: &Ket) -> Ket {
        Ket {
            basis: self.basis.clone(),
            amplitudes: &self.matrix * &ket.amplitudes,
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }
}

/// An operator built from a symbolic spec, with the number of matrix
/// elements that fell outside the space and were dropped.
#[derive(Debug, Clone)]
pub struct BuiltOperator {
    pub operator: Operator,
    pub dropped: usize,
}

pub fn build_operator(spec: &OpSpec, space: &Arc<StateSpace>) -> BuiltOperator {
    let n = space.dim();
    let cutoff = space.max_photons().max(1);
    let mut m = CMatrix::zeros(n, n);
    let mut dropped = 0;
    for (col, s) in space.states().iter().enumerate() {
        if let Some((t, amp)) = spec.apply(s, cutoff) {
            match space.index_of(&t) {
                Some(row) => m[(row, col)] += Complex64::new(amp, 0.0),
                None => dropped += 1,
            }
        }
    }
    BuiltOperator {
        operator: Operator {
            basis: Basis::Physical(space.clone()),
            matrix: m,
        },
        dropped,
    }
}

/// State vector on a basis.
#[derive(Debug, Clone)]
pub struct Ket {
    pub basis: Basis,
    pub amplitudes: CVector,
}

impl Ket {
    pub fn new(basis: Basis, amplitudes: CVector) -> Result<Self, HilbertError> {
        if amplitudes.len() != basis.dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: basis.dim(),
                actual: amplitudes.len(),
            });
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn basis_vector(basis: Basis, k: usize) -> Self {
        let mut v = CVector::zeros(basis.dim());
        v[k] = ONE;
        Self {
            basis,
            amplitudes: v,
        }
    }

    /// Superposition of physical basis states with real coefficients.
    pub fn from_terms(
        space: &Arc<StateSpace>,
        terms: &[(f64, BasisState)],
    ) -> Result<Self, HilbertError> {
        let mut v = CVector::zeros(space.dim());
        for (c, s) in terms {
            let k = space
                .index_of(s)
                .ok_or(HilbertError::MissingState(*s))?;
            v[k] += Complex64::new(*c, 0.0);
        }
        Ok(Self {
            basis: Basis::Physical(space.clone()),
            amplitudes: v,
        })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Ket) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn normalized(&self) -> Ket {
        let n = self.norm();
        Ket {
            basis: self.basis.clone(),
            amplitudes: self.amplitudes.unscale(n),
        }
    }

    /// `|self><self|`.
    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Eigh {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: CMatrix,
    pub sweeps: usize,
}

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-13;

/// Cyclic complex Jacobi eigensolver.
///
/// Each rotation first rephases the pivot `a_pq` to be real and then applies
/// the classic real Jacobi rotation; sweeps stop once the off-diagonal
/// Frobenius norm drops below `1e-13 * ||M||_F`.
pub fn eigh(m: &CMatrix) -> Result<Eigh, HilbertError> {
    if !m.is_square() {
        return Err(HilbertError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let n = m.nrows();
    let defect = hermiticity_defect(m);
    if defect > HERMITIAN_TOL * max_abs(m).max(1.0) {
        return Err(HilbertError::NotHermitian {
            max_asymmetry: defect,
        });
    }
    let mut a = m.clone();
    // symmetrize and make the diagonal exactly real
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    let mut v = CMatrix::identity(n, n);
    let scale = a.norm();
    let threshold = JACOBI_REL_TOL * scale;

    let off_norm = |a: &CMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&a) > threshold {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(HilbertError::NoConvergence {
                sweeps,
                off_norm: off_norm(&a),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == 0.0 || r < f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / r; // e^{i phi}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = diag(1, e^{-i phi}) * [[c, s], [-s, c]]
                let g_pp = Complex64::new(c, 0.0);
                let g_pq = Complex64::new(s, 0.0);
                let g_qp = -phase.conj() * s;
                let g_qq = phase.conj() * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(Eigh {
        values,
        vectors,
        sweeps,
    })
}
