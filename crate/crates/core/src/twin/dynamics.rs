//! Free and harmonic response of the frozen oscillator.

use serde::{Deserialize, Serialize};

use super::{NominalModel, Payload, Quantity};
use crate::error::{Error, Result};

/// Free vibration `u(t) = A e^{−ζωt} sin(ω_d t + φ)` from `u(0) = u0`,
/// `u̇(0) = v0`, with mass and stiffness scaled by `1 + Δ`.
pub fn free_response(
    nominal: &NominalModel,
    delta_m: f64,
    delta_k: f64,
    u0: f64,
    v0: f64,
    t_grid: &[f64],
) -> Result<Vec<f64>> {
    let (omega, zeta) = nominal.modal(delta_m, delta_k)?;
    if zeta >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "damping ratio {zeta} is not underdamped"
        )));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("time grid must be sorted".into()));
    }
    let wd = omega * (1.0 - zeta * zeta).sqrt();
    let b = v0 + zeta * omega * u0;
    let amp = (b * b + (wd * u0).powi(2)).sqrt() / wd;
    let phase = (wd * u0).atan2(b);
    Ok(t_grid
        .iter()
        .map(|&t| {
            if t == 0.0 {
                u0
            } else {
                amp * (-zeta * omega * t).exp() * (wd * t + phase).sin()
            }
        })
        .collect())
}

/// Interior local maxima refined by the parabola through the three samples
/// around each one; returns `(time, value)` pairs.
pub fn parabolic_peaks(t: &[f64], u: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 1..u.len().saturating_sub(1) {
        if !(u[i] > u[i - 1] && u[i] >= u[i + 1]) {
            continue;
        }
        let (x0, x1, x2) = (t[i - 1], t[i], t[i + 1]);
        let (y0, y1, y2) = (u[i - 1], u[i], u[i + 1]);
        // divided differences of the interpolating parabola
        let d01 = (y1 - y0) / (x1 - x0);
        let d12 = (y2 - y1) / (x2 - x1);
        let a = (d12 - d01) / (x2 - x0);
        if a >= 0.0 {
            out.push((x1, y1));
            continue;
        }
        let b = d01 - a * (x0 + x1);
        let xv = -b / (2.0 * a);
        let yv = y0 + d01 * (xv - x0) + a * (xv - x0) * (xv - x1);
        out.push((xv, yv));
    }
    out
}

/// Peaks `cycles` damped periods apart, extracted from the free response to
/// a unit initial displacement sampled at `points_per_period` per period.
pub fn peak_pair(
    nominal: &NominalModel,
    delta_m: f64,
    delta_k: f64,
    cycles: u32,
    points_per_period: usize,
) -> Result<Payload> {
    if cycles == 0 || points_per_period < 8 {
        return Err(Error::InvalidParameter(
            "peak pairs need cycles >= 1 and at least 8 points per period".into(),
        ));
    }
    let (omega, zeta) = nominal.modal(delta_m, delta_k)?;
    if zeta >= 1.0 {
        return Err(Error::InvalidParameter("overdamped configuration".into()));
    }
    let td = 2.0 * std::f64::consts::PI / (omega * (1.0 - zeta * zeta).sqrt());
    let n = ((cycles as f64 + 1.5) * points_per_period as f64).ceil() as usize;
    let h = td / points_per_period as f64;
    let t: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let u = free_response(nominal, delta_m, delta_k, 1.0, 0.0, &t)?;
    let peaks = parabolic_peaks(&t, &u);
    let c = cycles as usize;
    if peaks.len() <= c {
        return Err(Error::Degenerate("not enough response peaks".into()));
    }
    Ok(Payload::PeakPair {
        u_start: peaks[0].1,
        u_end: peaks[c].1,
        cycles,
    })
}

/// Steady-state amplitude normalized by the nominal static deflection at
/// `Ω = ω/ω0`.
pub fn frf_amplitude(omega: f64, delta: f64, zeta0: f64, which: Quantity) -> f64 {
    let w2 = omega * omega;
    let re = match which {
        Quantity::Mass => 1.0 - w2 * (1.0 + delta),
        Quantity::Stiffness => 1.0 + delta - w2,
    };
    1.0 / (re * re + 4.0 * w2 * zeta0 * zeta0).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrfPeak {
    pub omega_max: f64,
    pub h_max: f64,
}

/// Location and height of the FRF maximum.
pub fn frf_peak(delta: f64, zeta0: f64, which: Quantity) -> Result<FrfPeak> {
    let s = 1.0 + delta;
    let disc = s - 2.0 * zeta0 * zeta0;
    if !(s > 0.0) || !(disc > 0.0) || !(zeta0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "no resonance peak for Δ = {delta}, ζ0 = {zeta0}"
        )));
    }
    let root = (s - zeta0 * zeta0).sqrt();
    Ok(match which {
        Quantity::Mass => FrfPeak {
            omega_max: disc.sqrt() / s,
            h_max: s / (2.0 * zeta0 * root),
        },
        Quantity::Stiffness => FrfPeak {
            omega_max: disc.sqrt(),
            h_max: 1.0 / (2.0 * zeta0 * root),
        },
    })
}
