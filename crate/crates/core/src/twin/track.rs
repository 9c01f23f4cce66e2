//! Measurement synthesis and the multi-fidelity tracking loop.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dynamics::{frf_peak, peak_pair};
use super::identify::{estimate_delta_freq_domain, estimate_delta_time_domain, FreqMode, TimeMode};
use super::{
    DegradationSchedule, Domain, Fidelity, MassLowVariant, MeasurementRecord, MeasurementSeries,
    NominalModel, Payload, Quantity,
};
use crate::basis::InputBounds;
use crate::error::{Error, Result};
use crate::hpcfe::{HpcfeConfig, HpcfeModel};
use crate::mf::{CascadeConfig, DeepHpcfeModel, FidelityDataset, FidelityLevel};
use crate::uq::rmse;

/// How measurements are produced from the frozen oscillator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub domain: Domain,
    pub quantity: Quantity,
    /// Relative standard deviation of the multiplicative amplitude noise.
    pub noise: f64,
    pub seed: u64,
    /// Damped periods between the two recorded peaks.
    pub cycles: u32,
    pub points_per_period: usize,
}

impl SynthesisConfig {
    pub fn new(domain: Domain, quantity: Quantity) -> Self {
        SynthesisConfig {
            domain,
            quantity,
            noise: 0.0,
            seed: 0,
            cycles: 5,
            points_per_period: 1000,
        }
    }

    pub fn with_noise(mut self, noise: f64, seed: u64) -> Self {
        self.noise = noise;
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise level must be non-negative, got {}",
                self.noise
            )));
        }
        if self.domain == Domain::Time && (self.cycles == 0 || self.points_per_period < 8) {
            return Err(Error::InvalidParameter(
                "time-domain synthesis needs cycles >= 1 and >= 8 points per period".into(),
            ));
        }
        Ok(())
    }
}

fn split(which: Quantity, delta: f64) -> (f64, f64) {
    match which {
        Quantity::Mass => (delta, 0.0),
        Quantity::Stiffness => (0.0, delta),
    }
}

/// Noise-free payload of the system with the given fractional change.
pub fn forward_payload(nominal: &NominalModel, delta: f64, cfg: &SynthesisConfig) -> Result<Payload> {
    match cfg.domain {
        Domain::Time => {
            let (dm, dk) = split(cfg.quantity, delta);
            peak_pair(nominal, dm, dk, cfg.cycles, cfg.points_per_period)
        }
        Domain::Frequency => {
            let p = frf_peak(delta, nominal.zeta0(), cfg.quantity)?;
            Ok(Payload::FrfPeak {
                h_max: p.h_max,
                omega_max: p.omega_max,
            })
        }
    }
}

fn perturb(p: Payload, noise: f64, rng: &mut ChaCha8Rng) -> Payload {
    if noise == 0.0 {
        return p;
    }
    let mut scale = || {
        let z: f64 = StandardNormal.sample(rng);
        1.0 + noise * z
    };
    match p {
        Payload::PeakPair { u_start, u_end, cycles } => Payload::PeakPair {
            u_start: u_start * scale(),
            u_end: u_end * scale(),
            cycles,
        },
        Payload::FrfPeak { h_max, omega_max } => Payload::FrfPeak {
            h_max: h_max * scale(),
            omega_max,
        },
    }
}

/// Measure the degrading system at each slow time.
pub fn synthesize_measurements(
    nominal: &NominalModel,
    schedule: &DegradationSchedule,
    slow_times: &[f64],
    fidelity: Fidelity,
    cfg: &SynthesisConfig,
) -> Result<MeasurementSeries> {
    nominal.validate()?;
    cfg.validate()?;
    if slow_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter("slow times must be finite and >= 0".into()));
    }
    let records = slow_times
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let delta = schedule.truth(t, cfg.quantity, fidelity);
            let clean = forward_payload(nominal, delta, cfg)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            Ok(MeasurementRecord {
                t_s: t,
                payload: perturb(clean, cfg.noise, &mut rng),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let series = MeasurementSeries {
        fidelity,
        domain: cfg.domain,
        noise: cfg.noise,
        seed: cfg.seed,
        records,
    };
    series.validate()?;
    Ok(series)
}

/// `n_lf` equispaced slow times on `[t_min, t_max]` and `n_hf` of them,
/// spread as evenly as the grid allows, for the high-fidelity sensor.
pub fn sensor_times(t_min: f64, t_max: f64, n_lf: usize, n_hf: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(t_max > t_min && t_min >= 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "slow-time window [{t_min}, {t_max}] is empty or negative"
        )));
    }
    if n_lf < 2 || n_hf < 2 || n_hf > n_lf {
        return Err(Error::InvalidParameter(format!(
            "need 2 <= n_hf <= n_lf, got n_lf = {n_lf}, n_hf = {n_hf}"
        )));
    }
    let lf: Vec<f64> = (0..n_lf)
        .map(|i| t_min + (t_max - t_min) * i as f64 / (n_lf - 1) as f64)
        .collect();
    let hf = (0..n_hf)
        .map(|i| lf[(i * (n_lf - 1) + (n_hf - 1) / 2) / (n_hf - 1)])
        .collect();
    Ok((lf, hf))
}

/// A complete synthetic experiment: system, schedule and sensor layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub nominal: NominalModel,
    pub schedule: DegradationSchedule,
    pub quantity: Quantity,
    pub domain: Domain,
    pub t_max: f64,
    pub lf_count: usize,
    pub hf_count: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Scenario {
    /// Default system and schedule on `[0, 100]` with 501 LF samples. The
    /// time-domain mass case uses the sawtooth LF model, the
    /// frequency-domain one the affine model.
    pub fn new(quantity: Quantity, domain: Domain, hf_count: usize) -> Self {
        let low = match domain {
            Domain::Time => MassLowVariant::Sawtooth,
            Domain::Frequency => MassLowVariant::Affine,
        };
        Scenario {
            nominal: NominalModel::default(),
            schedule: DegradationSchedule::default().with_mass_low(low),
            quantity,
            domain,
            t_max: 100.0,
            lf_count: 501,
            hf_count,
            noise: 0.0,
            seed: 0,
        }
    }

    pub fn synthesis(&self) -> SynthesisConfig {
        SynthesisConfig::new(self.domain, self.quantity).with_noise(self.noise, self.seed)
    }

    /// Low- and high-fidelity measurement series. The HF series draws its
    /// noise from a separate seed.
    pub fn synthesize(&self) -> Result<(MeasurementSeries, MeasurementSeries)> {
        let (lt, ht) = sensor_times(0.0, self.t_max, self.lf_count, self.hf_count)?;
        let syn = self.synthesis();
        let lf = synthesize_measurements(&self.nominal, &self.schedule, &lt, Fidelity::Low, &syn)?;
        let hf_syn = syn.with_noise(self.noise, self.seed.wrapping_add(1));
        let hf = synthesize_measurements(&self.nominal, &self.schedule, &ht, Fidelity::High, &hf_syn)?;
        Ok((lf, hf))
    }

    /// High-fidelity truth of the tracked quantity.
    pub fn truth(&self, t: f64) -> f64 {
        self.schedule.truth(t, self.quantity, Fidelity::High)
    }

    pub fn track_config(&self) -> TrackConfig {
        let mut cfg = TrackConfig::new(self.quantity, self.t_max);
        cfg.query_points = self.lf_count;
        cfg
    }
}

/// Tracking setup for one quantity over a slow-time window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackConfig {
    pub quantity: Quantity,
    /// Two-level cascade used when both fidelities are present.
    pub cascade: CascadeConfig,
    /// Surrogate for a single fidelity: the HF-only fit, or the sole model
    /// when no LF data survive.
    pub single: HpcfeConfig,
    pub t_min: f64,
    pub t_max: f64,
    /// Points of the uniform output grid over `[t_min, t_max]`.
    pub query_points: usize,
    pub time_mode: TimeMode,
    pub freq_mode: FreqMode,
    /// Peak extraction used to synthesize the nominal reference record.
    pub points_per_period: usize,
    /// Alert when `|Δ̂|` exceeds this.
    pub alert_threshold: Option<f64>,
    /// Also fit the HF data alone for comparison.
    pub compare_single: bool,
}

impl TrackConfig {
    pub fn new(quantity: Quantity, t_max: f64) -> Self {
        TrackConfig {
            quantity,
            cascade: default_cascade(),
            single: HpcfeConfig::default().with_basis(2, 1),
            t_min: 0.0,
            t_max,
            query_points: 501,
            time_mode: TimeMode::Exact,
            freq_mode: FreqMode::Exact,
            points_per_period: 1000,
            alert_threshold: None,
            compare_single: true,
        }
    }

    pub fn query_grid(&self) -> Vec<f64> {
        let n = self.query_points.max(2);
        (0..n)
            .map(|i| self.t_min + (self.t_max - self.t_min) * i as f64 / (n - 1) as f64)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_max > self.t_min && self.t_min.is_finite() && self.t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "slow-time window [{}, {}] is empty",
                self.t_min, self.t_max
            )));
        }
        if self.query_points < 2 {
            return Err(Error::InvalidParameter("query grid needs >= 2 points".into()));
        }
        if let Some(a) = self.alert_threshold {
            if !(a > 0.0) {
                return Err(Error::InvalidParameter("alert threshold must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Stage orders for slow-time tracking: a full trend on the dense LF data;
/// on the scarce HF data, a trend that is linear in the LF estimate and a GP
/// over slow time and LF estimate for the rest.
pub fn default_cascade() -> CascadeConfig {
    CascadeConfig::per_level(vec![
        HpcfeConfig::default().with_basis(5, 1),
        HpcfeConfig::default().with_basis(1, 1),
    ])
    .appended_trend(true)
}

/// One identified sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub t_s: f64,
    pub delta: f64,
}

/// Contiguous stretch of the query grid where `|Δ̂|` exceeds the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub t_start: f64,
    pub t_end: f64,
    /// Largest `|Δ̂|` inside the stretch.
    pub peak: f64,
}

#[derive(Clone, Debug)]
pub struct TwinState {
    pub nominal: NominalModel,
    pub quantity: Quantity,
    pub domain: Domain,
    pub lf_estimates: Vec<Estimate>,
    pub hf_estimates: Vec<Estimate>,
    /// Samples whose inversion failed.
    pub dropped: usize,
    pub query: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// HF-only reconstruction on the same grid.
    pub single_mean: Option<Vec<f64>>,
    /// Slow time of the latest measurement and the estimate there.
    pub latest_t: f64,
    pub current_delta: f64,
    pub mass: f64,
    pub stiffness: f64,
    pub alert_threshold: Option<f64>,
    pub alerts: Vec<Alert>,
    pub model: DeepHpcfeModel,
}

/// Serializable summary of a tracking run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub quantity: Quantity,
    pub domain: Domain,
    pub nominal: NominalModel,
    pub lf_count: usize,
    pub hf_count: usize,
    pub dropped: usize,
    pub t_s: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub single_mean: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub truth: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mf_rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sf_rmse: Option<f64>,
    pub latest_t: f64,
    pub current_delta: f64,
    pub mass: f64,
    pub stiffness: f64,
    pub alert_threshold: Option<f64>,
    pub alerts: Vec<Alert>,
}

impl TwinState {
    /// RMSE of the tracked mean against `truth` on the query grid.
    pub fn rmse_against(&self, truth: impl Fn(f64) -> f64) -> (f64, Option<f64>) {
        let t: Vec<f64> = self.query.iter().map(|&s| truth(s)).collect();
        let mf = rmse(&self.mean, &t).unwrap_or(f64::NAN);
        let sf = self.single_mean.as_ref().and_then(|m| rmse(m, &t).ok());
        (mf, sf)
    }

    pub fn report(&self, truth: Option<&dyn Fn(f64) -> f64>) -> TrackingReport {
        let (truth_vals, mf, sf) = match truth {
            Some(f) => {
                let (mf, sf) = self.rmse_against(f);
                (Some(self.query.iter().map(|&s| f(s)).collect()), Some(mf), sf)
            }
            None => (None, None, None),
        };
        TrackingReport {
            quantity: self.quantity,
            domain: self.domain,
            nominal: self.nominal,
            lf_count: self.lf_estimates.len(),
            hf_count: self.hf_estimates.len(),
            dropped: self.dropped,
            t_s: self.query.clone(),
            mean: self.mean.clone(),
            variance: self.variance.clone(),
            single_mean: self.single_mean.clone(),
            truth: truth_vals,
            mf_rmse: mf,
            sf_rmse: sf,
            latest_t: self.latest_t,
            current_delta: self.current_delta,
            mass: self.mass,
            stiffness: self.stiffness,
            alert_threshold: self.alert_threshold,
            alerts: self.alerts.clone(),
        }
    }
}

fn invert_series(
    nominal: &NominalModel,
    series: &MeasurementSeries,
    cfg: &TrackConfig,
    reference: &Payload,
) -> (Vec<Estimate>, usize) {
    let z0 = nominal.zeta0();
    let results: Vec<Result<Estimate>> = series
        .records
        .par_iter()
        .map(|r| {
            let delta = match series.domain {
                Domain::Time => {
                    estimate_delta_time_domain(reference, &r.payload, z0, cfg.quantity, cfg.time_mode)
                }
                Domain::Frequency => {
                    estimate_delta_freq_domain(reference, &r.payload, z0, cfg.quantity, cfg.freq_mode)
                }
            }?;
            if !delta.is_finite() || delta <= -1.0 {
                return Err(Error::Degenerate(format!("estimate {delta} is not physical")));
            }
            Ok(Estimate { t_s: r.t_s, delta })
        })
        .collect();
    let mut out = Vec::with_capacity(results.len());
    let mut dropped = 0;
    for (r, rec) in results.into_iter().zip(&series.records) {
        match r {
            Ok(e) => out.push(e),
            Err(e) => {
                warn!("dropping {} sample at t_s = {}: {e}", series.fidelity.as_str(), rec.t_s);
                dropped += 1;
            }
        }
    }
    (out, dropped)
}

fn to_level(level: u32, est: &[Estimate]) -> FidelityLevel {
    let x = DMatrix::from_iterator(est.len(), 1, est.iter().map(|e| e.t_s));
    let y = DVector::from_iterator(est.len(), est.iter().map(|e| e.delta));
    FidelityLevel::new(level, x, y)
}

fn alert_intervals(t: &[f64], mean: &[f64], threshold: f64) -> Vec<Alert> {
    let mut out: Vec<Alert> = Vec::new();
    let mut open: Option<Alert> = None;
    for (&s, &m) in t.iter().zip(mean) {
        if m.abs() > threshold {
            match open.as_mut() {
                Some(a) => {
                    a.t_end = s;
                    a.peak = a.peak.max(m.abs());
                }
                None => {
                    open = Some(Alert {
                        t_start: s,
                        t_end: s,
                        peak: m.abs(),
                    })
                }
            }
        } else if let Some(a) = open.take() {
            out.push(a);
        }
    }
    out.extend(open);
    out
}

/// Invert both series, learn `Δ(t_s)` across fidelities and update the
/// nominal model.
pub fn track(
    nominal: &NominalModel,
    lf: &MeasurementSeries,
    hf: &MeasurementSeries,
    cfg: &TrackConfig,
) -> Result<TwinState> {
    nominal.validate()?;
    cfg.validate()?;
    lf.validate()?;
    hf.validate()?;
    if hf.is_empty() {
        return Err(Error::InsufficientData("high-fidelity series is empty".into()));
    }
    if !lf.is_empty() && lf.domain != hf.domain {
        return Err(Error::InvalidParameter(
            "low- and high-fidelity series use different domains".into(),
        ));
    }
    let domain = hf.domain;
    let synth = SynthesisConfig {
        points_per_period: cfg.points_per_period,
        ..SynthesisConfig::new(domain, cfg.quantity)
    };
    let reference_for = |s: &MeasurementSeries| -> Result<Payload> {
        let cycles = match s.records.first().map(|r| r.payload) {
            Some(Payload::PeakPair { cycles, .. }) => cycles,
            _ => synth.cycles,
        };
        forward_payload(nominal, 0.0, &SynthesisConfig { cycles, ..synth })
    };

    let (lf_est, lf_drop) = invert_series(nominal, lf, cfg, &reference_for(lf)?);
    let (hf_est, hf_drop) = invert_series(nominal, hf, cfg, &reference_for(hf)?);
    debug!(
        "identified {} LF and {} HF samples ({} dropped)",
        lf_est.len(),
        hf_est.len(),
        lf_drop + hf_drop
    );
    if hf_est.is_empty() {
        return Err(Error::InsufficientData(
            "every high-fidelity sample failed to invert".into(),
        ));
    }

    let bounds = InputBounds::new(vec![cfg.t_min], vec![cfg.t_max])?;
    let query = cfg.query_grid();
    let xq = DMatrix::from_column_slice(query.len(), 1, &query);

    let fit_single = || -> Result<DeepHpcfeModel> {
        let data = FidelityDataset::new(vec![to_level(2, &hf_est).with_label("high")], bounds.clone())?;
        DeepHpcfeModel::train(&CascadeConfig::uniform(cfg.single.clone()), &data)
    };
    let model = if lf_est.is_empty() {
        fit_single()?
    } else {
        let data = FidelityDataset::new(
            vec![
                to_level(1, &lf_est).with_label("low"),
                to_level(2, &hf_est).with_label("high"),
            ],
            bounds.clone(),
        )?;
        DeepHpcfeModel::train(&cfg.cascade, &data)?
    };
    let pred = model.predict(&xq)?;
    let top = pred.highest();

    let single_mean = if cfg.compare_single && !lf_est.is_empty() {
        let x = DMatrix::from_iterator(hf_est.len(), 1, hf_est.iter().map(|e| e.t_s));
        let y = DVector::from_iterator(hf_est.len(), hf_est.iter().map(|e| e.delta));
        let sf = HpcfeModel::train(&cfg.single, &bounds, &x, &y)?;
        Some(sf.predict(&xq)?.mean.iter().copied().collect())
    } else {
        None
    };

    let latest_t = lf_est
        .iter()
        .chain(&hf_est)
        .map(|e| e.t_s)
        .fold(f64::NEG_INFINITY, f64::max);
    let current_delta = model
        .predict(&DMatrix::from_element(1, 1, latest_t))?
        .highest()
        .mean[0];
    let (dm, dk) = split(cfg.quantity, current_delta);
    let (mass, stiffness) = (nominal.m0 * (1.0 + dm), nominal.k0 * (1.0 + dk));
    if !(mass > 0.0 && stiffness > 0.0) {
        return Err(Error::Degenerate(format!(
            "tracked state has non-positive mass {mass} or stiffness {stiffness}"
        )));
    }

    let mean: Vec<f64> = top.mean.iter().copied().collect();
    let alerts = cfg
        .alert_threshold
        .map(|a| alert_intervals(&query, &mean, a))
        .unwrap_or_default();
    Ok(TwinState {
        nominal: *nominal,
        quantity: cfg.quantity,
        domain,
        lf_estimates: lf_est,
        hf_estimates: hf_est,
        dropped: lf_drop + hf_drop,
        query,
        mean,
        variance: top.variance.iter().copied().collect(),
        single_mean,
        latest_t,
        current_delta,
        mass,
        stiffness,
        alert_threshold: cfg.alert_threshold,
        alerts,
        model,
    })
}
