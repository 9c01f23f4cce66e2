//! Slow-time evolution of mass and stiffness.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Fidelity, Quantity};

/// Period-2π sawtooth rising linearly from −1 to 1, with `sawtooth(0) = 0`.
pub fn sawtooth(x: f64) -> f64 {
    let c = x / (2.0 * PI);
    2.0 * (c - (c + 0.5).floor())
}

/// Low-fidelity stand-in for the mass schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassLowVariant {
    /// `0.75 Δ_m + 0.01 cos(π t/10) + 0.025`
    Affine,
    /// `0.25 sawtooth(β_m (t − π/β_m))`
    Sawtooth,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationSchedule {
    pub alpha_k: f64,
    pub eps_k: f64,
    pub beta_k: f64,
    pub beta_m: f64,
    pub eps_m: f64,
    pub mass_low: MassLowVariant,
}

impl Default for DegradationSchedule {
    fn default() -> Self {
        DegradationSchedule {
            alpha_k: 4e-4,
            eps_k: 0.05,
            beta_k: 0.2,
            beta_m: 0.15,
            eps_m: 0.35,
            mass_low: MassLowVariant::Sawtooth,
        }
    }
}

impl DegradationSchedule {
    pub fn with_mass_low(mut self, v: MassLowVariant) -> Self {
        self.mass_low = v;
        self
    }

    /// `Δ_k = e^{−α_k t} (1 + ε_k cos β_k t)/(1 + ε_k) − 1`
    pub fn stiffness(&self, t: f64) -> f64 {
        (-self.alpha_k * t).exp() * (1.0 + self.eps_k * (self.beta_k * t).cos()) / (1.0 + self.eps_k)
            - 1.0
    }

    /// `Δ_m = ε_m sawtooth(β_m (t − π/β_m)) sin²(2 β_m t)`
    pub fn mass(&self, t: f64) -> f64 {
        self.eps_m * sawtooth(self.beta_m * t - PI) * (2.0 * self.beta_m * t).sin().powi(2)
    }

    /// `0.75 Δ_k + 0.01 sin(1000 + (π/10) t Δ_k)`
    pub fn stiffness_low(&self, t: f64) -> f64 {
        let dk = self.stiffness(t);
        0.75 * dk + 0.01 * (1000.0 + PI / 10.0 * t * dk).sin()
    }

    pub fn mass_low(&self, t: f64) -> f64 {
        match self.mass_low {
            MassLowVariant::Affine => 0.75 * self.mass(t) + 0.01 * (t * PI / 10.0).cos() + 0.025,
            MassLowVariant::Sawtooth => 0.25 * sawtooth(self.beta_m * t - PI),
        }
    }

    pub fn truth(&self, t: f64, which: Quantity, fidelity: Fidelity) -> f64 {
        degradation_truth(self, t, which, fidelity)
    }
}

/// Fractional change of the tracked quantity at slow time `t`.
pub fn degradation_truth(s: &DegradationSchedule, t: f64, which: Quantity, fidelity: Fidelity) -> f64 {
    match (which, fidelity) {
        (Quantity::Stiffness, Fidelity::High) => s.stiffness(t),
        (Quantity::Stiffness, Fidelity::Low) => s.stiffness_low(t),
        (Quantity::Mass, Fidelity::High) => s.mass(t),
        (Quantity::Mass, Fidelity::Low) => s.mass_low(t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn sawtooth_shape() {
        assert_eq!(sawtooth(0.0), 0.0);
        assert_abs_diff_eq!(sawtooth(PI / 2.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sawtooth(-PI / 2.0), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sawtooth(PI - 1e-9), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sawtooth(PI), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sawtooth(2.0 * PI + 0.3), sawtooth(0.3), epsilon = 1e-14);
    }

    #[test]
    fn schedules_start_at_zero() {
        let s = DegradationSchedule::default();
        assert_eq!(s.stiffness(0.0), 0.0);
        assert_eq!(s.mass(0.0), 0.0);
        assert!((s.stiffness(1e6) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn high_fidelity_mass_modulates_sawtooth_variant() {
        // Δ_m = 1.4 · (sawtooth low fidelity) · sin²(0.3 t)
        let s = DegradationSchedule::default();
        for t in [0.7, 13.0, 40.0, 77.7] {
            let expect = 1.4 * s.mass_low(t) * (0.3 * t).sin().powi(2);
            assert_abs_diff_eq!(s.mass(t), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn affine_low_fidelity() {
        let s = DegradationSchedule::default().with_mass_low(MassLowVariant::Affine);
        assert_abs_diff_eq!(s.mass_low(0.0), 0.035, epsilon = 1e-15);
        assert_abs_diff_eq!(s.stiffness_low(0.0), 0.01 * 1000f64.sin(), epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn bounded_schedules(t in 0.0f64..500.0) {
            let s = DegradationSchedule::default();
            prop_assert!(s.mass(t).abs() <= 0.35 + 1e-12);
            prop_assert!(s.stiffness(t) <= 1e-12 && s.stiffness(t) > -1.0);
            prop_assert!(s.mass_low(t).abs() <= 0.25 + 1e-12);
        }
    }
}
