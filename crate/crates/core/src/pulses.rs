//! Gaussian STIRAP envelopes and the counter-diabatic drive derived from them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error("invalid pulse schedule: {0}")]
    InvalidSchedule(String),
    #[error("undefined mixing angle at t = {t}")]
    UndefinedMixingAngle { t: f64 },
    #[error("negative transitionless rate {theta_dot:e} at t = {t}")]
    NegativeTransitionlessRate { t: f64, theta_dot: f64 },
    #[error("detuning must be positive, got {0}")]
    NonPositiveDetuning(f64),
}

/// Rounding slack tolerated on a negative mixing-angle rate before the
/// square root of the counter-diabatic amplitude.
pub const THETA_DOT_CLIP: f64 = 1e-12;

/// Envelope parameters. All times in `1/lambda`, amplitudes in `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub omega0: f64,
    pub alpha: f64,
    pub t0: f64,
    pub tc: f64,
    pub tf: f64,
    /// Common offset added to both Gaussian centers.
    #[serde(default)]
    pub shift: f64,
}

impl PulseSchedule {
    pub fn new(omega0: f64, alpha: f64, t0: f64, tc: f64, tf: f64) -> Result<Self, PulseError> {
        let s = Self {
            omega0,
            alpha,
            t0,
            tc,
            tf,
            shift: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    /// `tan(alpha) = 2`, `t0 = 0.14 tf`, `tc = 0.19 tf`.
    pub fn default_preset(omega0: f64, tf: f64) -> Result<Self, PulseError> {
        Self::new(omega0, 2f64.atan(), 0.14 * tf, 0.19 * tf, tf)
    }

    pub fn validate(&self) -> Result<(), PulseError> {
        let bad = |m: &str| Err(PulseError::InvalidSchedule(m.to_string()));
        let all = [self.omega0, self.alpha, self.t0, self.tc, self.tf, self.shift];
        if all.iter().any(|x| !x.is_finite()) {
            return bad("parameters must be finite");
        }
        if self.omega0 <= 0.0 {
            return bad("omega0 must be positive");
        }
        if self.tc <= 0.0 {
            return bad("t_c must be positive");
        }
        if self.tf <= 0.0 {
            return bad("t_f must be positive");
        }
        if !(0.0 <= self.t0 && self.t0 < self.tf / 2.0) {
            return bad("t_0 must lie in [0, t_f/2)");
        }
        Ok(())
    }

    /// Same pulses with both centers moved by `s`.
    pub fn shifted(&self, s: f64) -> Self {
        Self {
            shift: self.shift + s,
            ..*self
        }
    }

    pub fn with_omega0(&self, omega0: f64) -> Self {
        Self { omega0, ..*self }
    }

    fn centers(&self) -> (f64, f64) {
        let mid = self.tf / 2.0 + self.shift;
        (mid + self.t0, mid - self.t0)
    }

    /// Gaussian factors of the late and early pulses and their time derivatives.
    fn gaussians(&self, t: f64) -> [(f64, f64); 2] {
        let (late, early) = self.centers();
        let tc2 = self.tc * self.tc;
        let g = |c: f64| {
            let v = (-(t - c).powi(2) / tc2).exp();
            (v, -2.0 * (t - c) / tc2 * v)
        };
        [g(late), g(early)]
    }

    /// `(Omega_1, Omega_3)`; `Omega_2` equals `Omega_3`.
    pub fn envelopes(&self, t: f64) -> (f64, f64) {
        let [(late, _), (early, _)] = self.gaussians(t);
        let (sa, ca) = self.alpha.sin_cos();
        (
            sa * self.omega0 * late,
            ca * self.omega0 * late + self.omega0 * early,
        )
    }

    /// Analytic `(dOmega_1/dt, dOmega_3/dt)`.
    pub fn envelope_derivatives(&self, t: f64) -> (f64, f64) {
        let [(_, dlate), (_, dearly)] = self.gaussians(t);
        let (sa, ca) = self.alpha.sin_cos();
        (
            sa * self.omega0 * dlate,
            ca * self.omega0 * dlate + self.omega0 * dearly,
        )
    }

    /// Mixing angle `theta = atan2(Omega_1, sqrt(2) Omega_3)` and the total
    /// Rabi frequency `Omega = sqrt(Omega_1^2 + 2 Omega_3^2)`.
    pub fn mixing_angle(&self, t: f64) -> Result<(f64, f64), PulseError> {
        let (o1, o3) = self.envelopes(t);
        let big = (o1 * o1 + 2.0 * o3 * o3).sqrt();
        if big == 0.0 || !big.is_finite() {
            return Err(PulseError::UndefinedMixingAngle { t });
        }
        Ok((o1.atan2(2f64.sqrt() * o3), big))
    }

    /// `d theta / dt = sqrt(2) (dO1 O3 - dO3 O1) / Omega^2`.
    ///
    /// Far in the tails both Gaussians underflow; the rate is evaluated from
    /// the log-derivatives there so it decays to zero instead of failing.
    pub fn theta_dot(&self, t: f64) -> Result<f64, PulseError> {
        let (o1, o3) = self.envelopes(t);
        let (d1, d3) = self.envelope_derivatives(t);
        let big2 = o1 * o1 + 2.0 * o3 * o3;
        if big2 > 0.0 && big2.is_finite() {
            return Ok(2f64.sqrt() * (d1 * o3 - d3 * o1) / big2);
        }
        if !t.is_finite() {
            return Err(PulseError::UndefinedMixingAngle { t });
        }
        // Both envelopes underflowed. Rescale the Gaussians by the larger one
        // in log space; the ratio formula is invariant under a common factor.
        let (late, early) = self.centers();
        let tc2 = self.tc * self.tc;
        let ln_late = -(t - late).powi(2) / tc2;
        let ln_early = -(t - early).powi(2) / tc2;
        let m = ln_late.max(ln_early);
        let gl = (ln_late - m).exp();
        let ge = (ln_early - m).exp();
        let dl = -2.0 * (t - late) / tc2 * gl;
        let de = -2.0 * (t - early) / tc2 * ge;
        let (sa, ca) = self.alpha.sin_cos();
        let (o1, o3) = (sa * gl, ca * gl + ge);
        let (d1, d3) = (sa * dl, ca * dl + de);
        let big2 = o1 * o1 + 2.0 * o3 * o3;
        if big2 == 0.0 {
            return Err(PulseError::UndefinedMixingAngle { t });
        }
        Ok(2f64.sqrt() * (d1 * o3 - d3 * o1) / big2)
    }
}

/// Phase convention for the counter-diabatic drive on atoms 2 and 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DrivePhase {
    /// `Omega_2' = Omega_3' = -i Omega'/sqrt(2)`: with the second-order
    /// elimination sign this reproduces `+i theta_dot |chi><varpi|`.
    #[default]
    MinusI,
    /// `Omega_2' = Omega_3' = +i Omega'/sqrt(2)`: drives the mixing angle
    /// backwards, towards the mirror-image target.
    PlusI,
    /// Real `Omega_2' = Omega_3' = Omega'/sqrt(2)`.
    Real,
}

/// Counter-diabatic pulse designed from a schedule and a detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CddPulse {
    pub schedule: PulseSchedule,
    pub delta: f64,
    #[serde(default)]
    pub phase: DrivePhase,
    /// Multiplies the delivered amplitude (1 for an ideal drive).
    #[serde(default = "unit")]
    pub drive_scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl CddPulse {
    pub fn new(schedule: PulseSchedule, delta: f64) -> Result<Self, PulseError> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(PulseError::NonPositiveDetuning(delta));
        }
        schedule.validate()?;
        Ok(Self {
            schedule,
            delta,
            phase: DrivePhase::MinusI,
            drive_scale: 1.0,
        })
    }

    pub fn with_phase(self, phase: DrivePhase) -> Self {
        Self { phase, ..self }
    }

    pub fn with_drive_scale(self, drive_scale: f64) -> Self {
        Self {
            drive_scale,
            ..self
        }
    }

    /// Designed `Omega'(t) = sqrt(3 Delta theta_dot)`, before `drive_scale`.
    pub fn amplitude(&self, t: f64) -> Result<f64, PulseError> {
        let rate = self.schedule.theta_dot(t)?;
        if rate < -THETA_DOT_CLIP {
            return Err(PulseError::NegativeTransitionlessRate {
                t,
                theta_dot: rate,
            });
        }
        Ok((3.0 * self.delta * rate.max(0.0)).sqrt())
    }

    /// Delivered complex Rabi amplitudes `[Omega_1', Omega_2', Omega_3']`.
    pub fn drive_amplitudes(&self, t: f64) -> Result<[num_complex::Complex64; 3], PulseError> {
        use num_complex::Complex64;
        let a = self.amplitude(t)? * self.drive_scale;
        let side = a / 2f64.sqrt();
        let other = match self.phase {
            DrivePhase::MinusI => Complex64::new(0.0, -side),
            DrivePhase::PlusI => Complex64::new(0.0, side),
            DrivePhase::Real => Complex64::new(side, 0.0),
        };
        Ok([Complex64::new(a, 0.0), other, other])
    }

    /// Largest designed amplitude on `[0, tf]`: grid scan followed by a
    /// golden-section refinement around the best grid point.
    pub fn peak_amplitude(&self) -> Result<(f64, f64), PulseError> {
        const GRID: usize = 4000;
        let tf = self.schedule.tf;
        let h = tf / GRID as f64;
        let mut best = (0.0, self.amplitude(0.0)?);
        for k in 1..=GRID {
            let t = k as f64 * h;
            let v = self.amplitude(t)?;
            if v > best.1 {
                best = (t, v);
            }
        }
        let (mut lo, mut hi) = ((best.0 - h).max(0.0), (best.0 + h).min(tf));
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let mut f1 = self.amplitude(x1)?;
        let mut f2 = self.amplitude(x2)?;
        for _ in 0..80 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = self.amplitude(x2)?;
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = self.amplitude(x1)?;
            }
        }
        let (t, v) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
        Ok(if v >= best.1 { (t, v) } else { best })
    }

    pub fn validity_report(&self, lambda: f64) -> Result<ValidityReport, PulseError> {
        let (_, peak) = self.peak_amplitude()?;
        let peak = peak * self.drive_scale;
        let max_over_lambda = peak / lambda;
        let max_over_delta = peak / self.delta;
        let g_magnitude = peak * (self.schedule.tf / (6.0 * 2f64.sqrt() * self.delta)).sqrt();
        let boundary_start = {
            let (o1, o3) = self.schedule.envelopes(0.0);
            o1 / o3
        };
        let boundary_end = {
            let (o1, o3) = self.schedule.envelopes(self.schedule.tf);
            o1 / o3
        };
        let mut warnings = Vec::new();
        if max_over_lambda > 0.5 {
            warnings.push(format!(
                "Zeno condition strained: max Omega'/lambda = {max_over_lambda:.4}"
            ));
        }
        if max_over_delta > 0.5 {
            warnings.push(format!(
                "elimination strained: max Omega'/Delta = {max_over_delta:.4}"
            ));
        }
        Ok(ValidityReport {
            max_over_lambda,
            max_over_delta,
            g_magnitude,
            boundary_start,
            boundary_end,
            warnings,
        })
    }
}

/// Size of the counter-diabatic drive relative to the couplings it must stay
/// below, plus the envelope ratios at the ends of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub max_over_lambda: f64,
    pub max_over_delta: f64,
    /// `max_t Omega'(t) sqrt(tf / (6 sqrt(2) Delta))`.
    pub g_magnitude: f64,
    /// `Omega_1/Omega_3` at `t = 0` (ideally 0).
    pub boundary_start: f64,
    /// `Omega_1/Omega_3` at `t = tf` (ideally `tan alpha`).
    pub boundary_end: f64,
    pub warnings: Vec<String>,
}

impl ValidityReport {
    pub fn zeno_strained(&self) -> bool {
        self.max_over_lambda > 0.5
    }

    pub fn elimination_strained(&self) -> bool {
        self.max_over_delta > 0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn preset(tf: f64) -> PulseSchedule {
        PulseSchedule::default_preset(0.2, tf).unwrap()
    }

    #[test]
    fn first_gaussian_peak() {
        let s = preset(40.0);
        let (o1, _) = s.envelopes(s.tf / 2.0 + s.t0);
        assert_eq!(o1, s.alpha.sin() * s.omega0);
    }

    #[test]
    fn omega3_at_early_center_matches_oracle() {
        // independent high-precision evaluation of the closed form
        let s = preset(40.0);
        let (_, o3) = s.envelopes(s.tf / 2.0 - s.t0);
        assert!((o3 - 0.210_194_549_940_954_46).abs() < 1e-15);
    }

    #[test]
    fn envelopes_vanish_far_away() {
        let s = preset(40.0);
        for t in [-1e3, 1e3, f64::MAX.sqrt()] {
            let (a, b) = s.envelopes(t);
            assert!(a.abs() < 1e-300 && b.abs() < 1e-300);
        }
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!(PulseSchedule::new(0.0, 1.0, 1.0, 1.0, 10.0).is_err());
        assert!(PulseSchedule::new(0.2, 1.0, 1.0, -1.0, 10.0).is_err());
        assert!(PulseSchedule::new(0.2, 1.0, 5.0, 1.0, 10.0).is_err());
        assert!(PulseSchedule::new(0.2, 1.0, 1.0, 1.0, -5.0).is_err());
        assert!(PulseSchedule::new(f64::NAN, 1.0, 1.0, 1.0, 10.0).is_err());
    }

    #[test]
    fn mixing_angle_boundaries() {
        let s = preset(40.0);
        let (th0, _) = s.mixing_angle(0.0).unwrap();
        assert!(th0.abs() < 0.01);
        let (thf, _) = s.mixing_angle(s.tf).unwrap();
        // oracle: tan(theta(tf)) = 1.412861192640387
        assert!((thf.tan() - 1.412_861_192_640_387).abs() < 1e-12);
        assert!((thf.tan() - 2f64.sqrt()).abs() / 2f64.sqrt() < 2e-3);
    }

    #[test]
    fn mixing_angle_equal_envelopes() {
        // alpha = pi/2 leaves one Gaussian per envelope
        let s = PulseSchedule::new(1.0, std::f64::consts::FRAC_PI_2, 1.0, 1.0, 10.0).unwrap();
        // find t where Omega1 == Omega3 by bisection
        let f = |t: f64| {
            let (a, b) = s.envelopes(t);
            a - b
        };
        let (mut lo, mut hi) = (0.0, 10.0);
        assert!(f(lo) < 0.0 && f(hi) > 0.0 || f(lo) > 0.0 && f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == f(lo).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (th, _) = s.mixing_angle(lo).unwrap();
        assert!((th - (1.0 / 2f64.sqrt()).atan()).abs() < 1e-9);
    }

    #[test]
    fn mixing_angle_undefined_when_both_vanish() {
        let s = preset(40.0);
        assert!(matches!(
            s.mixing_angle(1e6),
            Err(PulseError::UndefinedMixingAngle { .. })
        ));
    }

    #[test]
    fn theta_dot_matches_central_difference() {
        let s = preset(40.0);
        let h = 1e-4 * s.tf;
        let mut worst: f64 = 0.0;
        for k in 0..=100 {
            let t = s.tf * k as f64 / 100.0;
            let fd = (s.mixing_angle(t + h).unwrap().0 - s.mixing_angle(t - h).unwrap().0)
                / (2.0 * h);
            worst = worst.max((s.theta_dot(t).unwrap() - fd).abs());
        }
        // O(h^2) truncation with h = 4e-3; the third derivative is O(1e-2)
        assert!(worst < 1e-6, "worst deviation {worst:e}");
    }

    #[test]
    fn theta_dot_vanishes_in_tails() {
        let s = preset(40.0);
        for t in [-400.0, 440.0, -1e4, 1e4] {
            let r = s.theta_dot(t).unwrap();
            assert!(r.abs() < 1e-3, "theta_dot({t}) = {r}");
        }
        assert!(s.theta_dot(1e4).unwrap().abs() < s.theta_dot(440.0).unwrap().abs() + 1e-12);
    }

    #[test]
    fn theta_is_monotone_on_run() {
        let s = preset(40.0);
        let mut prev = s.mixing_angle(0.0).unwrap().0;
        for k in 0..=10_000 {
            let t = s.tf * k as f64 / 10_000.0;
            assert!(s.theta_dot(t).unwrap() >= -1e-12);
            let th = s.mixing_angle(t).unwrap().0;
            assert!(th >= prev - 1e-12);
            prev = th;
        }
        let sweep = s.mixing_angle(s.tf).unwrap().0 - s.mixing_angle(0.0).unwrap().0;
        assert!((sweep - 2f64.sqrt().atan()).abs() <= 0.01);
    }

    #[test]
    fn boundary_ratios() {
        let s = preset(40.0);
        let (a, b) = s.envelopes(0.0);
        assert!(a / b <= 1e-3);
        let (a, b) = s.envelopes(s.tf);
        assert!((a / b - 2.0).abs() <= 1e-2 * 2.0);
    }

    #[test]
    fn cdd_amplitude_zero_rate() {
        let c = CddPulse::new(preset(40.0), 3.0).unwrap();
        // far tail: theta_dot underflows to 0
        assert_eq!(c.amplitude(1e4).unwrap(), 0.0);
    }

    #[test]
    fn cdd_peak_matches_oracle() {
        let c = CddPulse::new(preset(40.0), 3.0).unwrap();
        let (t, peak) = c.peak_amplitude().unwrap();
        // grid + root refinement in 30-digit arithmetic: 0.9504511202249046 at t = 20.6586
        assert!((peak - 0.950_451_120_224_904_6).abs() / 0.950_451_120_224_904_6 < 1e-6);
        assert!((t - 20.6586).abs() < 1e-2);
    }

    #[test]
    fn cdd_amplitude_scales_with_sqrt_delta() {
        let c1 = CddPulse::new(preset(40.0), 0.75).unwrap();
        let c4 = CddPulse::new(preset(40.0), 3.0).unwrap();
        for k in 0..=200 {
            let t = 40.0 * k as f64 / 200.0;
            let a = c1.amplitude(t).unwrap();
            let b = c4.amplitude(t).unwrap();
            assert!((b - 2.0 * a).abs() <= 1e-14 * b.max(1.0));
        }
    }

    #[test]
    fn negative_rate_is_rejected() {
        // a negative Omega_1 makes theta decrease
        let rev = PulseSchedule {
            alpha: -(2f64.atan()),
            ..preset(40.0)
        };
        let c = CddPulse::new(rev, 3.0).unwrap();
        let any_err = (0..=400)
            .map(|k| c.amplitude(40.0 * k as f64 / 400.0))
            .any(|r| matches!(r, Err(PulseError::NegativeTransitionlessRate { .. })));
        assert!(any_err);
    }

    #[test]
    fn cdd_requires_positive_detuning() {
        assert!(CddPulse::new(preset(40.0), 0.0).is_err());
        assert!(CddPulse::new(preset(40.0), -1.0).is_err());
    }

    #[test]
    fn validity_report_default_point() {
        let c = CddPulse::new(preset(40.0), 3.0).unwrap();
        let r = c.validity_report(1.0).unwrap();
        assert!((r.max_over_lambda - 0.950_451_120_224_904_6).abs() < 1e-6);
        assert!((r.max_over_delta - 0.316_817_040_074_968_2).abs() < 1e-6);
        // |G| from inverting Omega' = sqrt(6 sqrt2 Delta / tf) |G|
        assert!((r.g_magnitude - 1.191_423_140_848_401).abs() < 1e-5);
        assert!(r.zeno_strained());
        assert!(!r.elimination_strained());
        assert!(r.boundary_start <= 1e-3);
    }

    #[test]
    fn validity_small_detuning_and_long_runs() {
        let small = CddPulse::new(preset(40.0), 1e-8).unwrap();
        let r = small.validity_report(1.0).unwrap();
        assert!(r.max_over_lambda < 1e-3);
        assert!(!r.zeno_strained());
        // Omega'/Delta grows like Delta^(-1/2)
        assert!(r.elimination_strained());
        assert_eq!(r.warnings.len(), 1);
        let long = CddPulse::new(preset(4000.0), 3.0).unwrap();
        let short = CddPulse::new(preset(40.0), 3.0).unwrap();
        let a = long.validity_report(1.0).unwrap().max_over_lambda;
        let b = short.validity_report(1.0).unwrap().max_over_lambda;
        assert!((a / b - 0.1).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn time_translation_invariance(shift in -50.0f64..50.0, frac in 0.0f64..1.0) {
            let c = CddPulse::new(preset(40.0), 3.0).unwrap();
            let shifted = CddPulse { schedule: c.schedule.shifted(shift), ..c };
            let t = 40.0 * frac;
            let a = c.amplitude(t).unwrap();
            let b = shifted.amplitude(t + shift).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-3));
        }

        #[test]
        fn omega0_cancels(scale in 0.1f64..10.0, frac in 0.0f64..1.0) {
            let base = preset(40.0);
            let c = CddPulse::new(base, 3.0).unwrap();
            let d = CddPulse::new(base.with_omega0(0.2 * scale), 3.0).unwrap();
            let t = 40.0 * frac;
            let a = c.amplitude(t).unwrap();
            let b = d.amplitude(t).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-6));
        }
    }
}
