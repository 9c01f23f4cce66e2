//! Inversion of peak measurements back to the fractional change `Δ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Payload, Quantity};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    #[default]
    Exact,
    /// High-Q limit `(δ0/δ_m)² − 1`.
    Approximate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreqMode {
    #[default]
    Exact,
    /// Light-damping limit `R_H² − 1`.
    HighQ,
}

/// `δ = ln(u(t)/u(t + nT))/n`.
pub fn log_decrement(u_start: f64, u_end: f64, cycles: u32) -> Result<f64> {
    if cycles == 0 {
        return Err(Error::InvalidParameter("peak records need n >= 1".into()));
    }
    if !(u_start > 0.0 && u_end > 0.0) || !(u_start / u_end).is_finite() {
        return Err(Error::Degenerate(format!(
            "non-positive peak ratio {u_start}/{u_end}"
        )));
    }
    Ok((u_start / u_end).ln() / cycles as f64)
}

fn decrement_of(p: &Payload) -> Result<f64> {
    match *p {
        Payload::PeakPair { u_start, u_end, cycles } => log_decrement(u_start, u_end, cycles),
        Payload::FrfPeak { .. } => Err(Error::InvalidParameter(
            "expected a peak-pair record".into(),
        )),
    }
}

fn frf_of(p: &Payload) -> Result<(f64, f64)> {
    match *p {
        Payload::FrfPeak { h_max, omega_max } => Ok((h_max, omega_max)),
        Payload::PeakPair { .. } => Err(Error::InvalidParameter(
            "expected an FRF-peak record".into(),
        )),
    }
}

/// `Δ` from the decay of the nominal and degraded free responses.
///
/// Both mass and stiffness changes act on damping as `ζ = ζ0/√(1+Δ)`; the
/// mass case is written through the decrement ratio, the stiffness case
/// through the degraded damping ratio alone.
pub fn estimate_delta_time_domain(
    nominal: &Payload,
    degraded: &Payload,
    zeta0: f64,
    which: Quantity,
    mode: TimeMode,
) -> Result<f64> {
    if !(0.0..1.0).contains(&zeta0) {
        return Err(Error::InvalidParameter(format!("ζ0 = {zeta0} out of range")));
    }
    let dm = decrement_of(degraded)?;
    if !(dm > 0.0) {
        return Err(Error::Degenerate("zero decrement in degraded record".into()));
    }
    match (which, mode) {
        (Quantity::Mass, TimeMode::Exact) => {
            let d0 = decrement_of(nominal)?;
            Ok((1.0 - zeta0 * zeta0) * ((d0 / dm).powi(2) - 1.0))
        }
        (Quantity::Stiffness, TimeMode::Exact) => {
            let zm2 = dm * dm / (4.0 * PI * PI + dm * dm);
            Ok(zeta0 * zeta0 / zm2 - 1.0)
        }
        (_, TimeMode::Approximate) => {
            let d0 = decrement_of(nominal)?;
            Ok((d0 / dm).powi(2) - 1.0)
        }
    }
}

/// Mass change from the peak-height ratio `R_H = H_m/H_0`.
pub fn mass_from_peak_ratio(r: f64, zeta0: f64, mode: FreqMode) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("peak ratio {r} must be positive")));
    }
    if !(0.0..1.0).contains(&zeta0) {
        return Err(Error::InvalidParameter(format!("ζ0 = {zeta0} out of range")));
    }
    match mode {
        FreqMode::HighQ => Ok(r * r - 1.0),
        FreqMode::Exact => {
            let z2 = zeta0 * zeta0;
            let disc = r * r - 4.0 * z2 + 4.0 * z2 * z2;
            if disc < 0.0 {
                return Err(Error::Degenerate(format!(
                    "negative discriminant for R_H = {r}, ζ0 = {zeta0}"
                )));
            }
            Ok(r * (r + disc.sqrt()) / (2.0 * (1.0 - z2)) - 1.0)
        }
    }
}

/// Stiffness change from the normalized peak frequency.
pub fn stiffness_from_peak_frequency(omega_max: f64, zeta0: f64, mode: FreqMode) -> Result<f64> {
    if !(omega_max > 0.0 && omega_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "peak frequency {omega_max} must be positive"
        )));
    }
    let w2 = omega_max * omega_max;
    Ok(match mode {
        FreqMode::Exact => w2 + 2.0 * zeta0 * zeta0 - 1.0,
        FreqMode::HighQ => w2 - 1.0,
    })
}

/// `Δ` from the FRF peaks of the nominal and degraded systems.
pub fn estimate_delta_freq_domain(
    nominal: &Payload,
    degraded: &Payload,
    zeta0: f64,
    which: Quantity,
    mode: FreqMode,
) -> Result<f64> {
    let (hm, wm) = frf_of(degraded)?;
    match which {
        Quantity::Mass => {
            let (h0, _) = frf_of(nominal)?;
            mass_from_peak_ratio(hm / h0, zeta0, mode)
        }
        Quantity::Stiffness => stiffness_from_peak_frequency(wm, zeta0, mode),
    }
}

#[cfg(test)]
mod tests {
    use super::super::dynamics::{frf_peak, peak_pair};
    use super::super::NominalModel;
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pair(r: f64) -> Payload {
        Payload::PeakPair {
            u_start: 1.0,
            u_end: 1.0 / r,
            cycles: 1,
        }
    }

    fn decay_pair(delta: f64, n: u32) -> Payload {
        Payload::PeakPair {
            u_start: 1.0,
            u_end: (-delta * n as f64).exp(),
            cycles: n,
        }
    }

    #[test]
    fn decrement_errors() {
        assert!(log_decrement(1.0, 0.0, 1).is_err());
        assert!(log_decrement(-1.0, 0.5, 1).is_err());
        assert!(log_decrement(1.0, 0.5, 0).is_err());
        assert_abs_diff_eq!(log_decrement(1.0, 0.25, 2).unwrap(), 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn unchanged_system_gives_zero() {
        let p = pair(1.3);
        let d = estimate_delta_time_domain(&p, &p, 0.02, Quantity::Mass, TimeMode::Exact).unwrap();
        assert_eq!(d, 0.0);
        assert!(estimate_delta_time_domain(&p, &pair(1.0), 0.02, Quantity::Mass, TimeMode::Exact).is_err());
    }

    #[test]
    fn decrement_ratio_example() {
        let d0 = 0.12;
        let dm = d0 / 2f64.sqrt();
        let got = estimate_delta_time_domain(
            &decay_pair(d0, 1),
            &decay_pair(dm, 1),
            0.02,
            Quantity::Mass,
            TimeMode::Exact,
        )
        .unwrap();
        assert_abs_diff_eq!(got, 0.9996, epsilon = 1e-12);
    }

    #[test]
    fn time_domain_round_trip_from_sampled_response() {
        let n = NominalModel::default();
        let p0 = peak_pair(&n, 0.0, 0.0, 5, 1000).unwrap();
        let pm = peak_pair(&n, 0.35, 0.0, 5, 1000).unwrap();
        let d = estimate_delta_time_domain(&p0, &pm, n.zeta0(), Quantity::Mass, TimeMode::Exact).unwrap();
        assert!((d - 0.35).abs() <= 1e-3, "{d}");
        let pk = peak_pair(&n, 0.0, -0.25, 5, 1000).unwrap();
        let d = estimate_delta_time_domain(&p0, &pk, n.zeta0(), Quantity::Stiffness, TimeMode::Exact)
            .unwrap();
        assert!((d + 0.25).abs() <= 1e-3, "{d}");
    }

    #[test]
    fn peak_ratio_examples() {
        assert_abs_diff_eq!(mass_from_peak_ratio(1.0, 1e-9, FreqMode::Exact).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mass_from_peak_ratio(2f64.sqrt(), 0.0, FreqMode::Exact).unwrap(), 1.0, epsilon = 1e-15);
        assert!(mass_from_peak_ratio(0.01, 0.2, FreqMode::Exact).is_err());
        assert!(mass_from_peak_ratio(0.0, 0.02, FreqMode::Exact).is_err());
    }

    #[test]
    fn frequency_domain_round_trip() {
        let z = 0.02;
        for which in [Quantity::Mass, Quantity::Stiffness] {
            let p0 = frf_peak(0.0, z, which).unwrap();
            let pm = frf_peak(0.5, z, which).unwrap();
            let d = estimate_delta_freq_domain(
                &Payload::FrfPeak { h_max: p0.h_max, omega_max: p0.omega_max },
                &Payload::FrfPeak { h_max: pm.h_max, omega_max: pm.omega_max },
                z,
                which,
                FreqMode::Exact,
            )
            .unwrap();
            assert_abs_diff_eq!(d, 0.5, epsilon = 1e-10);
        }
    }

    fn zeta0_choice() -> impl Strategy<Value = f64> {
        prop_oneof![Just(0.005), Just(0.02), Just(0.05)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn time_domain_inverse_consistency(delta in -0.3f64..1.0, z in zeta0_choice(), mass in any::<bool>()) {
            let n = NominalModel::from_damping_ratio(1.0, 4.0, z).unwrap();
            let which = if mass { Quantity::Mass } else { Quantity::Stiffness };
            let (dm, dk) = if mass { (delta, 0.0) } else { (0.0, delta) };
            let p0 = peak_pair(&n, 0.0, 0.0, 5, 1000).unwrap();
            let pm = peak_pair(&n, dm, dk, 5, 1000).unwrap();
            let d = estimate_delta_time_domain(&p0, &pm, z, which, TimeMode::Exact).unwrap();
            prop_assert!((d - delta).abs() <= 1e-3, "{} vs {}", d, delta);
        }

        #[test]
        fn freq_domain_inverse_consistency(delta in -0.3f64..1.0, z in zeta0_choice(), mass in any::<bool>()) {
            let which = if mass { Quantity::Mass } else { Quantity::Stiffness };
            let p0 = frf_peak(0.0, z, which).unwrap();
            let pm = frf_peak(delta, z, which).unwrap();
            let d = estimate_delta_freq_domain(
                &Payload::FrfPeak { h_max: p0.h_max, omega_max: p0.omega_max },
                &Payload::FrfPeak { h_max: pm.h_max, omega_max: pm.omega_max },
                z,
                which,
                FreqMode::Exact,
            ).unwrap();
            prop_assert!((d - delta).abs() <= 1e-10);
        }

        #[test]
        fn exact_and_approximate_agree(delta in -0.3f64..1.0, z in zeta0_choice()) {
            let zm = z / (1.0 + delta).sqrt();
            let dec = |zeta: f64| 2.0 * PI * zeta / (1.0 - zeta * zeta).sqrt();
            let (p0, pm) = (decay_pair(dec(z), 1), decay_pair(dec(zm), 1));
            let exact = estimate_delta_time_domain(&p0, &pm, z, Quantity::Mass, TimeMode::Exact).unwrap();
            let approx = estimate_delta_time_domain(&p0, &pm, z, Quantity::Mass, TimeMode::Approximate).unwrap();
            let scale = exact.abs().max(approx.abs());
            prop_assume!(scale > 1e-9);
            prop_assert!((exact - approx).abs() <= 2.0 * z * z * scale);
        }
    }
}
