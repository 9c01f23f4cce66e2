//! Single-degree-of-freedom digital twin.
//!
//! Slow time `t_s` is measured in nominal undamped periods `T0`. At each
//! slow time the oscillator is frozen with mass `m0 (1 + Δ_m)` and
//! stiffness `k0 (1 + Δ_k)`; measurements of its free or harmonic response
//! are inverted back to `Δ`, and a two-level deep H-PCFE learns the
//! evolution of `Δ` from plentiful low-fidelity and scarce high-fidelity
//! estimates.

pub mod degradation;
pub mod dynamics;
pub mod identify;
pub mod track;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use degradation::{degradation_truth, sawtooth, DegradationSchedule, MassLowVariant};
pub use dynamics::{free_response, frf_amplitude, frf_peak, parabolic_peaks, FrfPeak};
pub use identify::{
    estimate_delta_freq_domain, estimate_delta_time_domain, log_decrement, FreqMode, TimeMode,
};
pub use track::{
    default_cascade, sensor_times, synthesize_measurements, track, Alert, Estimate, Scenario,
    SynthesisConfig, TrackConfig, TrackingReport, TwinState,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Mass,
    Stiffness,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Mass => "mass",
            Quantity::Stiffness => "stiffness",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    Low,
    High,
}

impl Fidelity {
    pub fn as_str(self) -> &'static str {
        match self {
            Fidelity::Low => "low",
            Fidelity::High => "high",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "low" => Some(Fidelity::Low),
            "high" => Some(Fidelity::High),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Time,
    Frequency,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Time => "time",
            Domain::Frequency => "frequency",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "time" => Some(Domain::Time),
            "frequency" => Some(Domain::Frequency),
            _ => None,
        }
    }
}

/// Nominal oscillator `m0 ü + c0 u̇ + k0 u = f`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NominalModel {
    pub m0: f64,
    pub c0: f64,
    pub k0: f64,
}

impl Default for NominalModel {
    fn default() -> Self {
        NominalModel::from_damping_ratio(1.0, 4.0, 0.02).expect("valid defaults")
    }
}

impl NominalModel {
    pub fn new(m0: f64, c0: f64, k0: f64) -> Result<Self> {
        let m = NominalModel { m0, c0, k0 };
        m.validate()?;
        Ok(m)
    }

    pub fn from_damping_ratio(m0: f64, k0: f64, zeta0: f64) -> Result<Self> {
        Self::new(m0, 2.0 * zeta0 * (k0 * m0).sqrt(), k0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m0 > 0.0 && self.k0 > 0.0 && self.m0.is_finite() && self.k0.is_finite()) {
            return Err(Error::InvalidParameter(
                "nominal mass and stiffness must be positive".into(),
            ));
        }
        let z = self.zeta0();
        if !(0.0..1.0).contains(&z) {
            return Err(Error::InvalidParameter(format!(
                "nominal damping ratio must lie in [0, 1), got {z}"
            )));
        }
        Ok(())
    }

    pub fn omega0(&self) -> f64 {
        (self.k0 / self.m0).sqrt()
    }

    pub fn zeta0(&self) -> f64 {
        self.c0 / (2.0 * (self.k0 * self.m0).sqrt())
    }

    pub fn period0(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega0()
    }

    pub fn omega_d0(&self) -> f64 {
        self.omega0() * (1.0 - self.zeta0().powi(2)).sqrt()
    }

    /// Natural frequency and damping ratio with the given fractional changes.
    pub fn modal(&self, delta_m: f64, delta_k: f64) -> Result<(f64, f64)> {
        let m = self.m0 * (1.0 + delta_m);
        let k = self.k0 * (1.0 + delta_k);
        if !(m > 0.0 && k > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "degraded mass {m} and stiffness {k} must be positive"
            )));
        }
        Ok(((k / m).sqrt(), self.c0 / (2.0 * (k * m).sqrt())))
    }
}

/// A measurement taken at one slow time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    /// Free-response peaks `cycles` damped periods apart.
    PeakPair { u_start: f64, u_end: f64, cycles: u32 },
    /// Peak of the steady-state amplitude normalized by the nominal static
    /// deflection, and its frequency normalized by the nominal `ω0`.
    FrfPeak { h_max: f64, omega_max: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub t_s: f64,
    pub payload: Payload,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSeries {
    pub fidelity: Fidelity,
    pub domain: Domain,
    /// Relative amplitude noise used to synthesize the series.
    pub noise: f64,
    pub seed: u64,
    pub records: Vec<MeasurementRecord>,
}

impl MeasurementSeries {
    pub fn empty(fidelity: Fidelity, domain: Domain) -> Self {
        MeasurementSeries {
            fidelity,
            domain,
            noise: 0.0,
            seed: 0,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn slow_times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t_s).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.records.windows(2) {
            if !(w[1].t_s > w[0].t_s) {
                return Err(Error::InvalidParameter(
                    "slow times must be strictly increasing".into(),
                ));
            }
        }
        for r in &self.records {
            let ok = match (self.domain, r.payload) {
                (Domain::Time, Payload::PeakPair { cycles, .. }) => cycles >= 1,
                (Domain::Frequency, Payload::FrfPeak { .. }) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "record at t_s = {} does not match the {} domain",
                    r.t_s,
                    self.domain.as_str()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_derived_quantities() {
        let n = NominalModel::default();
        assert!((n.omega0() - 2.0).abs() < 1e-12);
        assert!((n.zeta0() - 0.02).abs() < 1e-12);
        assert!((n.period0() - std::f64::consts::PI).abs() < 1e-12);
        assert!((n.omega_d0() - 2.0 * (1.0 - 0.0004f64).sqrt()).abs() < 1e-12);
        assert!(n.omega_d0() < n.omega0());
        assert!(NominalModel::new(1.0, 10.0, 4.0).is_err());
        assert!(NominalModel::new(-1.0, 0.1, 4.0).is_err());
    }

    #[test]
    fn series_validation() {
        let mut s = MeasurementSeries::empty(Fidelity::High, Domain::Time);
        s.records.push(MeasurementRecord {
            t_s: 1.0,
            payload: Payload::PeakPair {
                u_start: 1.0,
                u_end: 0.5,
                cycles: 2,
            },
        });
        assert!(s.validate().is_ok());
        s.records.push(MeasurementRecord {
            t_s: 1.0,
            payload: Payload::PeakPair {
                u_start: 1.0,
                u_end: 0.5,
                cycles: 2,
            },
        });
        assert!(s.validate().is_err());
    }
}
