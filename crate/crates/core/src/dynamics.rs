//! Fixed-step RK4 propagation of kets and density matrices, with a
//! step-doubling convergence harness.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{eigh, hermiticity_defect, Basis, CMatrix, CVector, HilbertError, Ket, Operator, ZERO};
use crate::model::{Jump, ModelError, TimeDependentHamiltonian};
use crate::observables::{ObservableRow, Probe};

/// Number of recorded samples per run.
pub const DEFAULT_SAMPLES: usize = 200;
/// Default RK4 steps per unit time.
pub const STEPS_PER_UNIT_TIME: f64 = 200.0;
/// Largest step count tried by [`converge`].
pub const MAX_STEPS: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("basis of {what} does not match the Hamiltonian")]
    SpaceMismatch { what: &'static str },
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("negative rate {rate} for jump `{label}`")]
    NegativeRate { label: String, rate: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("tolerance must be positive")]
    InvalidTolerance,
    #[error("no convergence up to {steps} steps (last estimate {estimate:e})")]
    NoConvergence { steps: usize, estimate: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

impl From<crate::pulses::PulseError> for DynamicsError {
    fn from(e: crate::pulses::PulseError) -> Self {
        DynamicsError::Model(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, steps: usize) -> Result<Self, DynamicsError> {
        if !(t_start.is_finite() && t_end.is_finite()) || t_end <= t_start {
            return Err(DynamicsError::InvalidGrid(format!(
                "need finite t_end > t_start, got [{t_start}, {t_end}]"
            )));
        }
        if steps == 0 {
            return Err(DynamicsError::InvalidGrid("steps must be positive".into()));
        }
        Ok(Self {
            t_start,
            t_end,
            steps,
        })
    }

    /// `[0, tf]` with `ceil(200 tf)` steps.
    pub fn for_duration(tf: f64) -> Result<Self, DynamicsError> {
        Self::new(0.0, tf, default_steps(tf))
    }

    pub fn with_steps(&self, steps: usize) -> Result<Self, DynamicsError> {
        Self::new(self.t_start, self.t_end, steps)
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.dt()
        }
    }

    /// Step indices at which records are taken, endpoints included.
    pub fn sample_steps(&self, samples: usize) -> Vec<usize> {
        let n = samples.clamp(2, self.steps + 1);
        let mut v: Vec<usize> = (0..n)
            .map(|j| ((j as f64) * self.steps as f64 / (n - 1) as f64).round() as usize)
            .collect();
        v.dedup();
        v
    }
}

pub fn default_steps(tf: f64) -> usize {
    (STEPS_PER_UNIT_TIME * tf).ceil().max(1.0) as usize
}

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub basis: Basis,
    pub matrix: CMatrix,
}

impl DensityMatrix {
    /// Checks Hermiticity (1e-10) and unit trace (1e-8).
    pub fn new(basis: Basis, matrix: CMatrix) -> Result<Self, DynamicsError> {
        let n = basis.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(DynamicsError::InvalidDensity(format!(
                "{}x{} matrix on a {n}-dimensional basis",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let rho = Self { basis, matrix };
        let h = rho.hermiticity_defect();
        if h > 1e-10 {
            return Err(DynamicsError::InvalidDensity(format!("not Hermitian ({h:e})")));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(DynamicsError::InvalidDensity(format!("trace {tr}")));
        }
        Ok(rho)
    }

    pub fn from_ket(psi: &Ket) -> Self {
        Self {
            basis: psi.basis.clone(),
            matrix: psi.projector(),
        }
    }

    pub fn maximally_mixed(basis: Basis) -> Self {
        let n = basis.dim();
        Self {
            basis,
            matrix: CMatrix::identity(n, n) * Complex64::new(1.0 / n as f64, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }

    /// `<k| rho |k>`.
    pub fn expectation(&self, k: &Ket) -> Complex64 {
        k.amplitudes.dotc(&(&self.matrix * &k.amplitudes))
    }
}

/// Half the sum of absolute eigenvalues of `a - b`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64, DynamicsError> {
    if !a.basis.same_as(&b.basis) {
        return Err(DynamicsError::SpaceMismatch { what: "density matrix" });
    }
    let d = &a.matrix - &b.matrix;
    let d = (&d + d.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(0.5 * eigh(&d)?.values.iter().map(|v| v.abs()).sum::<f64>())
}

#[derive(Debug, Clone)]
pub enum FinalState {
    Pure(Ket),
    Mixed(DensityMatrix),
}

impl FinalState {
    pub fn basis(&self) -> &Basis {
        match self {
            FinalState::Pure(k) => &k.basis,
            FinalState::Mixed(r) => &r.basis,
        }
    }

    /// `1 - |<a|b>|` for kets, trace distance for density matrices.
    pub fn distance(&self, other: &FinalState) -> Result<f64, DynamicsError> {
        match (self, other) {
            (FinalState::Pure(a), FinalState::Pure(b)) => {
                if !a.basis.same_as(&b.basis) {
                    return Err(DynamicsError::SpaceMismatch { what: "ket" });
                }
                // equals 1 - |<a|b>| for unit kets, without the cancellation
                let ov = b.inner(a);
                let phase = if ov.norm() > 0.0 { ov / ov.norm() } else { Complex64::new(1.0, 0.0) };
                Ok(0.5 * (&a.amplitudes - &b.amplitudes * phase).norm_squared())
            }
            (FinalState::Mixed(a), FinalState::Mixed(b)) => trace_distance(a, b),
            _ => Err(DynamicsError::SpaceMismatch { what: "final state" }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub grid: TimeGrid,
    pub records: Vec<ObservableRow>,
    pub final_state: FinalState,
    pub converged: bool,
    pub dt_used: f64,
    /// Distance to the run with half the step count; NaN when not computed.
    pub error_estimate: f64,
}

impl RunResult {
    pub fn final_fidelity(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.fidelity)
    }
}

/// Nonzero entries of a matrix as `(row, col, value)`.
type Sparse = Vec<(usize, usize, Complex64)>;

fn sparse(m: &CMatrix) -> Sparse {
    let mut v = Vec::new();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let x = m[(r, c)];
            if x != ZERO {
                v.push((r, c, x));
            }
        }
    }
    v
}

fn sparse_mul_vec(a: &Sparse, x: &CVector, out: &mut CVector) {
    out.fill(ZERO);
    for &(r, c, v) in a {
        out[r] += v * x[c];
    }
}

/// `out = a * x` for a sparse `a` and dense square `x`.
fn sparse_mul_mat(a: &Sparse, x: &CMatrix, out: &mut CMatrix) {
    out.fill(ZERO);
    let n = x.ncols();
    for &(r, k, v) in a {
        for j in 0..n {
            out[(r, j)] += v * x[(k, j)];
        }
    }
}

fn check_generator(h: &TimeDependentHamiltonian, basis: &Basis, what: &'static str) -> Result<(), DynamicsError> {
    if !h.basis().same_as(basis) {
        return Err(DynamicsError::SpaceMismatch { what });
    }
    Ok(())
}

fn generator_at(h: &TimeDependentHamiltonian, t: f64) -> Result<Sparse, DynamicsError> {
    Ok(sparse(&h.at(t)?))
}

/// RK4 on `d psi/dt = -i H(t) psi`. The norm is not restored.
pub fn propagate_state(
    h: &TimeDependentHamiltonian,
    psi0: &Ket,
    grid: &TimeGrid,
    probe: &Probe,
) -> Result<RunResult, DynamicsError> {
    check_generator(h, &psi0.basis, "initial ket")?;
    probe.check_basis(&psi0.basis)?;
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(DynamicsError::InvalidGrid(format!(
            "initial ket has norm {}",
            psi0.norm()
        )));
    }
    let n = psi0.amplitudes.len();
    let dt = grid.dt();
    let samples = grid.sample_steps(DEFAULT_SAMPLES);
    let mut next_sample = 0;
    let mut records = Vec::with_capacity(samples.len());

    let mut psi = psi0.amplitudes.clone();
    let mut k = [CVector::zeros(n), CVector::zeros(n), CVector::zeros(n), CVector::zeros(n)];
    let mut tmp = CVector::zeros(n);
    let minus_i = Complex64::new(0.0, -1.0);
    let mut h_start = generator_at(h, grid.t_start)?;

    for step in 0..=grid.steps {
        let t = grid.time(step);
        if samples.get(next_sample) == Some(&step) {
            records.push(probe.row_pure(t, &psi));
            next_sample += 1;
        }
        if step == grid.steps {
            break;
        }
        let h_mid = generator_at(h, t + 0.5 * dt)?;
        let h_end = generator_at(h, grid.time(step + 1))?;

        sparse_mul_vec(&h_start, &psi, &mut k[0]);
        k[0] *= minus_i;
        tmp.copy_from(&psi);
        tmp.axpy(Complex64::new(0.5 * dt, 0.0), &k[0], ONE_C);
        sparse_mul_vec(&h_mid, &tmp, &mut k[1]);
        k[1] *= minus_i;
        tmp.copy_from(&psi);
        tmp.axpy(Complex64::new(0.5 * dt, 0.0), &k[1], ONE_C);
        sparse_mul_vec(&h_mid, &tmp, &mut k[2]);
        k[2] *= minus_i;
        tmp.copy_from(&psi);
        tmp.axpy(Complex64::new(dt, 0.0), &k[2], ONE_C);
        sparse_mul_vec(&h_end, &tmp, &mut k[3]);
        k[3] *= minus_i;

        let w = dt / 6.0;
        for i in 0..n {
            psi[i] += (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]) * w;
        }
        if !psi.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(DynamicsError::NonFinite { step: step + 1 });
        }
        h_start = h_end;
    }

    Ok(RunResult {
        grid: *grid,
        records,
        final_state: FinalState::Pure(Ket {
            basis: psi0.basis.clone(),
            amplitudes: psi,
        }),
        converged: false,
        dt_used: dt,
        error_estimate: f64::NAN,
    })
}

const ONE_C: Complex64 = Complex64::new(1.0, 0.0);

struct Lindblad {
    /// `-(i/2) sum rate L^dag L`, dense.
    anti: CMatrix,
    /// `sqrt(rate) L` for each channel with positive rate.
    channels: Vec<Sparse>,
}

impl Lindblad {
    fn new(jumps: &[(f64, &Operator)], n: usize) -> Self {
        let mut anti = CMatrix::zeros(n, n);
        let mut channels = Vec::new();
        for &(rate, op) in jumps {
            if rate == 0.0 {
                continue;
            }
            let ltl = op.matrix.adjoint() * &op.matrix;
            anti -= ltl * Complex64::new(0.0, 0.5 * rate);
            channels.push(sparse(&(&op.matrix * Complex64::new(rate.sqrt(), 0.0))));
        }
        Self { anti, channels }
    }

    fn effective(&self, h: &CMatrix) -> Sparse {
        sparse(&(h + &self.anti))
    }

    /// `out = -i (H_eff rho - rho H_eff^dag) + sum L rho L^dag`.
    fn rhs(&self, heff: &Sparse, rho: &CMatrix, out: &mut CMatrix, work: &mut CMatrix) {
        sparse_mul_mat(heff, rho, work);
        let n = rho.nrows();
        for j in 0..n {
            for i in 0..n {
                let a = work[(i, j)];
                let b = work[(j, i)].conj();
                // -i (a - b)
                let d = a - b;
                out[(i, j)] = Complex64::new(d.im, -d.re);
            }
        }
        for l in &self.channels {
            for &(i, k, a) in l {
                for &(j, m, b) in l {
                    out[(i, j)] += a * rho[(k, m)] * b.conj();
                }
            }
        }
    }
}

/// RK4 on the Lindblad equation
/// `rho' = -i[H, rho] + sum_j rate_j (L rho L^dag - {L^dag L, rho}/2)`.
pub fn propagate_density(
    h: &TimeDependentHamiltonian,
    jumps: &[Jump],
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    probe: &Probe,
) -> Result<RunResult, DynamicsError> {
    check_generator(h, &rho0.basis, "initial density matrix")?;
    probe.check_basis(&rho0.basis)?;
    for j in jumps {
        if !(j.rate >= 0.0) {
            return Err(DynamicsError::NegativeRate {
                label: j.label.clone(),
                rate: j.rate,
            });
        }
        if !j.operator.basis.same_as(&rho0.basis) {
            return Err(DynamicsError::SpaceMismatch { what: "jump operator" });
        }
    }
    let n = rho0.dim();
    let pairs: Vec<(f64, &Operator)> = jumps.iter().map(|j| (j.rate, &j.operator)).collect();
    let lind = Lindblad::new(&pairs, n);
    let dt = grid.dt();
    let samples = grid.sample_steps(DEFAULT_SAMPLES);
    let mut next_sample = 0;
    let mut records = Vec::with_capacity(samples.len());

    let mut rho = rho0.matrix.clone();
    let mut k: Vec<CMatrix> = (0..4).map(|_| CMatrix::zeros(n, n)).collect();
    let mut tmp = CMatrix::zeros(n, n);
    let mut work = CMatrix::zeros(n, n);
    let mut h_start = lind.effective(&h.at(grid.t_start)?);

    for step in 0..=grid.steps {
        let t = grid.time(step);
        if samples.get(next_sample) == Some(&step) {
            records.push(probe.row_mixed(t, &rho));
            next_sample += 1;
        }
        if step == grid.steps {
            break;
        }
        let h_mid = lind.effective(&h.at(t + 0.5 * dt)?);
        let h_end = lind.effective(&h.at(grid.time(step + 1))?);

        lind.rhs(&h_start, &rho, &mut k[0], &mut work);
        tmp.copy_from(&rho);
        tmp.zip_apply(&k[0], |a, b| *a += b * (0.5 * dt));
        lind.rhs(&h_mid, &tmp, &mut k[1], &mut work);
        tmp.copy_from(&rho);
        tmp.zip_apply(&k[1], |a, b| *a += b * (0.5 * dt));
        lind.rhs(&h_mid, &tmp, &mut k[2], &mut work);
        tmp.copy_from(&rho);
        tmp.zip_apply(&k[2], |a, b| *a += b * dt);
        lind.rhs(&h_end, &tmp, &mut k[3], &mut work);

        let w = dt / 6.0;
        for idx in 0..n * n {
            rho[idx] += (k[0][idx] + 2.0 * k[1][idx] + 2.0 * k[2][idx] + k[3][idx]) * w;
        }
        let tr = rho.trace();
        if !(tr.re.is_finite() && tr.im.is_finite()) {
            return Err(DynamicsError::NonFinite { step: step + 1 });
        }
        h_start = h_end;
    }

    Ok(RunResult {
        grid: *grid,
        records,
        final_state: FinalState::Mixed(DensityMatrix {
            basis: rho0.basis.clone(),
            matrix: rho,
        }),
        converged: false,
        dt_used: dt,
        error_estimate: f64::NAN,
    })
}

/// Doubles the step count, starting from `grid.steps`, until successive
/// final states are within `tol`. Returns the finer run.
pub fn converge<F>(run: F, grid: &TimeGrid, tol: f64) -> Result<RunResult, DynamicsError>
where
    F: Fn(&TimeGrid) -> Result<RunResult, DynamicsError>,
{
    if !(tol > 0.0) {
        return Err(DynamicsError::InvalidTolerance);
    }
    let mut steps = grid.steps;
    let mut coarse = run(grid)?;
    let mut estimate = f64::INFINITY;
    while steps * 2 <= MAX_STEPS {
        steps *= 2;
        let mut fine = run(&grid.with_steps(steps)?)?;
        estimate = fine.final_state.distance(&coarse.final_state)?;
        fine.error_estimate = estimate;
        if estimate <= tol {
            fine.converged = true;
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(DynamicsError::NoConvergence { steps, estimate })
}
