//! `twin simulate` and `twin track`.

use std::fs::File;

use hpcfe_core::datasets::{fmt_f64, read_measurement_csv, write_measurement_csv};
use hpcfe_core::twin::{
    track as track_twin, Domain, Fidelity, FreqMode, MassLowVariant, MeasurementSeries,
    NominalModel, Quantity, Scenario, TimeMode, TrackConfig, TrackingReport,
};
use serde_json::json;

use crate::args::{
    DomainArg, InversionArg, MassLowArg, NominalArgs, QuantityArg, SimulateArgs, TrackArgs,
};
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, read_to_string, Outputs};

fn quantity(q: QuantityArg) -> Quantity {
    match q {
        QuantityArg::Mass => Quantity::Mass,
        QuantityArg::Stiffness => Quantity::Stiffness,
    }
}

fn nominal(n: &NominalArgs) -> Result<NominalModel> {
    Ok(NominalModel::from_damping_ratio(n.m0, n.k0, n.zeta0)?)
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let domain = match a.domain {
        DomainArg::Time => Domain::Time,
        DomainArg::Frequency => Domain::Frequency,
    };
    let mut sc = Scenario::new(quantity(a.quantity), domain, a.hf);
    sc.nominal = nominal(&a.nominal)?;
    sc.lf_count = a.lf;
    sc.t_max = a.t_max;
    sc.noise = a.noise;
    sc.seed = a.seed;
    if let Some(v) = a.mass_low {
        sc.schedule.mass_low = match v {
            MassLowArg::Affine => MassLowVariant::Affine,
            MassLowArg::Sawtooth => MassLowVariant::Sawtooth,
        };
    }
    let (lf, hf) = sc.synthesize()?;
    let mut csv = Vec::new();
    write_measurement_csv(&[&lf, &hf], &mut csv)?;

    ensure_dir(&a.out_dir)?;
    let mut out = Outputs::new();
    out.write(&a.out_dir.join("measurements.csv"), &csv)?;
    out.write_json(&a.out_dir.join("scenario.json"), &sc)?;
    out.finish(
        &a.out_dir.join("manifest.json"),
        "twin simulate",
        json!({ "scenario": sc }),
        vec![sc.seed, sc.seed.wrapping_add(1)],
    )
}

fn split_series(all: Vec<MeasurementSeries>) -> Result<(MeasurementSeries, MeasurementSeries)> {
    let mut lf = None;
    let mut hf = None;
    for s in all {
        match s.fidelity {
            Fidelity::Low => lf = Some(s),
            Fidelity::High => hf = Some(s),
        }
    }
    let hf = hf.ok_or_else(|| CliError::Usage("measurement file has no high-fidelity rows".into()))?;
    let lf = lf.unwrap_or_else(|| MeasurementSeries::empty(Fidelity::Low, hf.domain));
    Ok((lf, hf))
}

pub fn evolution_csv(r: &TrackingReport) -> Result<Vec<u8>> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t_s", "mean", "variance"];
    if r.single_mean.is_some() {
        header.push("single_mean");
    }
    if r.truth.is_some() {
        header.push("truth");
    }
    wr.write_record(&header)?;
    for (i, &t) in r.t_s.iter().enumerate() {
        let mut rec = vec![fmt_f64(t), fmt_f64(r.mean[i]), fmt_f64(r.variance[i])];
        if let Some(s) = &r.single_mean {
            rec.push(fmt_f64(s[i]));
        }
        if let Some(s) = &r.truth {
            rec.push(fmt_f64(s[i]));
        }
        wr.write_record(&rec)?;
    }
    wr.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn track(a: &TrackArgs) -> Result<()> {
    let scenario: Option<Scenario> = match &a.scenario {
        Some(p) => Some(serde_json::from_str(&read_to_string(p)?)?),
        None => None,
    };
    let file = File::open(&a.measurements).map_err(|e| CliError::io(&a.measurements, e))?;
    let (lf, hf) = split_series(read_measurement_csv(file)?)?;

    let q = match (a.quantity, &scenario) {
        (Some(q), _) => quantity(q),
        (None, Some(s)) => s.quantity,
        (None, None) => return Err(CliError::Usage("no tracked quantity (--quantity)".into())),
    };
    let t_max = match (a.t_max, &scenario) {
        (Some(t), _) => t,
        (None, Some(s)) => s.t_max,
        (None, None) => {
            let last = lf.records.iter().chain(&hf.records).map(|r| r.t_s);
            last.fold(0.0, f64::max)
        }
    };
    let nominal = match &scenario {
        Some(s) => s.nominal,
        None => nominal(&a.nominal)?,
    };
    let mut cfg = match &scenario {
        Some(s) if s.quantity == q => s.track_config(),
        _ => TrackConfig::new(q, t_max),
    };
    cfg.t_max = t_max;
    if let Some(n) = a.query_points {
        cfg.query_points = n;
    }
    cfg.alert_threshold = a.alert;
    if a.inversion == InversionArg::Approximate {
        cfg.time_mode = TimeMode::Approximate;
        cfg.freq_mode = FreqMode::HighQ;
    }

    let state = track_twin(&nominal, &lf, &hf, &cfg)?;
    let truth = scenario.as_ref().filter(|s| s.quantity == q).map(|s| {
        let s = s.clone();
        move |t: f64| s.truth(t)
    });
    let report = match &truth {
        Some(f) => state.report(Some(f as &dyn Fn(f64) -> f64)),
        None => state.report(None),
    };
    if report.dropped > 0 {
        log::warn!("{} samples failed to invert and were dropped", report.dropped);
    }
    for a in &report.alerts {
        log::warn!("alert: |Δ| up to {:.4} over t_s in [{}, {}]", a.peak, a.t_start, a.t_end);
    }
    if let (Some(mf), Some(sf)) = (report.mf_rmse, report.sf_rmse) {
        log::info!("RMSE: multi-fidelity {mf:.4e}, single-fidelity {sf:.4e}");
    }

    ensure_dir(&a.out_dir)?;
    let mut out = Outputs::new();
    out.write_json(&a.out_dir.join("report.json"), &report)?;
    out.write(&a.out_dir.join("evolution.csv"), &evolution_csv(&report)?)?;
    out.finish(
        &a.out_dir.join("manifest.json"),
        "twin track",
        json!({ "measurements": a.measurements, "scenario": scenario, "nominal": nominal, "track": cfg }),
        Vec::new(),
    )
}
