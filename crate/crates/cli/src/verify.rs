//! Fast invariant checks run by `stap verify`.

use num_complex::Complex64;
use stap_core::dynamics::{propagate_density, propagate_state, DensityMatrix, FinalState, TimeGrid};
use stap_core::experiments::{pulse_samples, ExperimentParams};
use stap_core::hilbert::{hermiticity_defect, max_abs, Basis, CMatrix, Ket, Operator};
use stap_core::model::{
    atom_cavity_coupling, cdd_hamiltonian, closed_space, dissipative_space, effective_eliminated,
    full_space, hamiltonian_apf, hamiltonian_resonant, jump_operators, special_states,
    two_level_basis, two_level_target, ModelParams, TimeDependentHamiltonian, PSI_EIGENVALUES,
};
use stap_core::observables::{diagnostics, Probe};
use stap_core::pulses::{CddPulse, PulseSchedule};

type Check = fn() -> Result<String, String>;

pub fn checks() -> Vec<(&'static str, Check)> {
    vec![
        ("closure dimensions", closure_dimensions),
        ("coupling eigenvectors", coupling_eigenvectors),
        ("hermiticity", hermiticity),
        ("elimination matches counter-diabatic term", elimination),
        ("transitionless target", transitionless),
        ("omega0 invariance", omega0_invariance),
        ("monotone mixing angle", monotone_theta),
        ("rk4 order", rk4_order),
        ("lindblad trace and positivity", lindblad_hygiene),
        ("no leakage from closure", leakage),
    ]
}

/// Runs every check, printing one line each. Returns true if all pass.
pub fn run_all() -> bool {
    let mut ok = true;
    for (name, check) in checks() {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                ok = false;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    ok
}

fn ensure(cond: bool, detail: String) -> Result<String, String> {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn schedule() -> PulseSchedule {
    PulseSchedule::default_preset(0.2, 40.0).expect("valid preset")
}

fn closure_dimensions() -> Result<String, String> {
    let (a, b) = (closed_space().dim(), dissipative_space().dim());
    ensure(a == 18 && b == 24, format!("{a} closed, {b} with jumps"))
}

fn coupling_eigenvectors() -> Result<String, String> {
    let space = closed_space();
    let st = special_states(&space).map_err(|e| e.to_string())?;
    let h = atom_cavity_coupling(1.0, &space).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (k, v) in st.psi.iter().enumerate() {
        let r = (&h.apply(v).amplitudes - &v.amplitudes * Complex64::new(PSI_EIGENVALUES[k], 0.0)).norm();
        worst = worst.max(r);
    }
    ensure(worst <= 1e-10, format!("max residual {worst:.1e}"))
}

fn hermiticity() -> Result<String, String> {
    let space = closed_space();
    let s = schedule();
    let p = ModelParams::new(1.0, 3.0, 0.0, 0.0).map_err(|e| e.to_string())?;
    let c = CddPulse::new(s, 3.0).map_err(|e| e.to_string())?;
    let gens = [
        hamiltonian_resonant(&p, &s, &space).map_err(|e| e.to_string())?,
        hamiltonian_apf(&p, &c, &space).map_err(|e| e.to_string())?,
    ];
    let mut worst: f64 = 0.0;
    for h in &gens {
        for k in 0..=100 {
            let m = h.at(0.4 * k as f64).map_err(|e| e.to_string())?;
            worst = worst.max(hermiticity_defect(&m));
        }
    }
    ensure(worst <= 1e-12, format!("max defect {worst:.1e}"))
}

fn elimination() -> Result<String, String> {
    let s = schedule();
    let c = CddPulse::new(s, 3.0).map_err(|e| e.to_string())?;
    let a = effective_eliminated(&c).map_err(|e| e.to_string())?;
    let b = cdd_hamiltonian(&s);
    let mut worst: f64 = 0.0;
    for k in 0..=400 {
        let t = 0.1 * k as f64;
        let d = a.at(t).map_err(|e| e.to_string())? - b.at(t).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs(&d));
    }
    ensure(worst <= 1e-12, format!("max difference {worst:.1e}"))
}

fn transitionless() -> Result<String, String> {
    let h = cdd_hamiltonian(&schedule());
    let probe = Probe::new(two_level_target(), vec![]).map_err(|e| e.to_string())?;
    let g = TimeGrid::for_duration(40.0).map_err(|e| e.to_string())?;
    let r = propagate_state(&h, &Ket::basis_vector(two_level_basis(), 0), &g, &probe)
        .map_err(|e| e.to_string())?;
    let infid = 1.0 - r.final_fidelity();
    ensure(infid <= 1e-6, format!("infidelity {infid:.2e}"))
}

fn omega0_invariance() -> Result<String, String> {
    let base = ExperimentParams::default();
    let reference = pulse_samples(&base, 200).map_err(|e| e.to_string())?;
    for c in [0.5, 2.0] {
        let p = ExperimentParams {
            omega0: base.omega0 * c,
            ..base
        };
        let s = pulse_samples(&p, 200).map_err(|e| e.to_string())?;
        if reference
            .iter()
            .zip(&s)
            .any(|(a, b)| a.omega_prime.to_bits() != b.omega_prime.to_bits())
        {
            return Err(format!("drive changes under omega0 -> {c} omega0"));
        }
    }
    Ok("bitwise identical drive for c = 0.5, 2".into())
}

fn monotone_theta() -> Result<String, String> {
    let s = schedule();
    let mut worst = f64::INFINITY;
    for k in 0..=10_000 {
        let rate = s.theta_dot(40.0 * k as f64 / 1e4).map_err(|e| e.to_string())?;
        worst = worst.min(rate);
    }
    ensure(worst >= -1e-12, format!("min theta rate {worst:.1e}"))
}

fn rabi_error(steps: usize) -> Result<f64, String> {
    let basis = Basis::effective(&["a", "b"]);
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 1)] = Complex64::new(1.0, 0.0);
    m[(1, 0)] = Complex64::new(1.0, 0.0);
    let h = TimeDependentHamiltonian::constant(Operator {
        basis: basis.clone(),
        matrix: m,
    });
    let probe = Probe::new(Ket::basis_vector(basis.clone(), 1), vec![]).map_err(|e| e.to_string())?;
    let g = TimeGrid::new(0.0, 10.0, steps).map_err(|e| e.to_string())?;
    let r = propagate_state(&h, &Ket::basis_vector(basis, 0), &g, &probe).map_err(|e| e.to_string())?;
    Ok(r.records
        .iter()
        .map(|row| (row.fidelity - row.t.sin().powi(2)).abs())
        .fold(0.0, f64::max))
}

fn rk4_order() -> Result<String, String> {
    let ratio = rabi_error(200)? / rabi_error(400)?;
    ensure((12.0..=20.0).contains(&ratio), format!("error ratio {ratio:.2}"))
}

fn lindblad_hygiene() -> Result<String, String> {
    let space = dissipative_space();
    let p = ModelParams::new(1.0, 3.0, 0.05, 0.05).map_err(|e| e.to_string())?;
    let c = CddPulse::new(schedule(), 3.0).map_err(|e| e.to_string())?;
    let h = hamiltonian_apf(&p, &c, &space).map_err(|e| e.to_string())?;
    let jumps = jump_operators(&p, &space).map_err(|e| e.to_string())?;
    let st = special_states(&space).map_err(|e| e.to_string())?;
    let g = TimeGrid::for_duration(40.0).map_err(|e| e.to_string())?;
    let r = propagate_density(&h, &jumps, &DensityMatrix::from_ket(&st.psi1), &g, &Probe::scheme(&st))
        .map_err(|e| e.to_string())?;
    let FinalState::Mixed(rho) = &r.final_state else {
        return Err("expected a density matrix".into());
    };
    let d = diagnostics(rho);
    let drift = (d.trace - 1.0).abs();
    ensure(
        drift <= 1e-6 && d.hermiticity_defect <= 1e-9 && d.min_eigenvalue >= -1e-6 && d.purity < 1.0,
        format!(
            "trace drift {drift:.1e}, Hermiticity defect {:.1e}, min eigenvalue {:.1e}, purity {:.4}",
            d.hermiticity_defect, d.min_eigenvalue, d.purity
        ),
    )
}

fn leakage() -> Result<String, String> {
    let full = full_space();
    let closed = closed_space();
    let st = special_states(&full).map_err(|e| e.to_string())?;
    let p = ModelParams::new(1.0, 3.0, 0.0, 0.0).map_err(|e| e.to_string())?;
    let c = CddPulse::new(schedule(), 3.0).map_err(|e| e.to_string())?;
    let h = hamiltonian_apf(&p, &c, &full).map_err(|e| e.to_string())?;
    let g = TimeGrid::for_duration(40.0).map_err(|e| e.to_string())?;
    let r = propagate_state(&h, &st.psi1, &g, &Probe::scheme(&st)).map_err(|e| e.to_string())?;
    let FinalState::Pure(psi) = &r.final_state else {
        return Err("expected a ket".into());
    };
    let leak: f64 = full
        .states()
        .iter()
        .zip(psi.amplitudes.iter())
        .filter(|(s, _)| !closed.contains(s))
        .map(|(_, a)| a.norm_sqr())
        .sum();
    ensure(leak <= 1e-12, format!("population outside closure {leak:.1e}"))
}
