//! `fit` and `predict`.

use std::fs::File;

use hpcfe_core::datasets::{data_bounds, fmt_f64, read_fidelity_csv, read_inputs_csv, RunConfig};
use hpcfe_core::{CascadeConfig, DeepHpcfeModel, FidelityDataset, HpcfeConfig};
use serde_json::json;

use crate::args::{FitArgs, ModelArgs, PredictArgs};
use crate::error::{CliError, Result};
use crate::output::{manifest_for, read_to_string, Outputs};

pub fn load_run_config(m: &ModelArgs) -> Result<RunConfig> {
    match &m.config {
        Some(p) => Ok(RunConfig::from_json(&read_to_string(p)?)?),
        None => Ok(RunConfig::from_json("{}")?),
    }
}

fn apply_numerics(cfg: &mut HpcfeConfig, m: &ModelArgs, rc: &RunConfig) {
    if let Some(v) = m.nugget.or(rc.nugget) {
        cfg.kernel.nugget = v;
    }
    if let Some(v) = m.pinv_tolerance.or(rc.pinv_tolerance) {
        cfg.pinv_tolerance = v;
    }
}

/// Overlay flags and config-file keys on `base`, stage by stage.
pub fn cascade_config(
    base: CascadeConfig,
    levels: usize,
    m: &ModelArgs,
    rc: &RunConfig,
) -> Result<CascadeConfig> {
    let orders = if !m.orders.is_empty() {
        Some(m.orders.clone())
    } else {
        rc.orders.clone()
    };
    let mut cfg = match orders {
        Some(o) if o.len() == 1 => CascadeConfig::uniform(HpcfeConfig::default().with_basis(o[0].0, o[0].1)),
        Some(o) if o.len() == levels => CascadeConfig::per_level(
            o.iter().map(|&(s, mm)| HpcfeConfig::default().with_basis(s, mm)).collect(),
        ),
        Some(o) => {
            return Err(CliError::Usage(format!(
                "{} stage orders given for {levels} fidelity levels",
                o.len()
            )))
        }
        None => base,
    };
    if m.modified || rc.modified == Some(true) {
        cfg = cfg.modified(true);
    }
    if m.appended_trend || rc.appended_trend == Some(true) {
        cfg = cfg.appended_trend(true);
    }
    for stage in cfg.stages.iter_mut() {
        apply_numerics(stage, m, rc);
    }
    Ok(cfg)
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let rc = load_run_config(&a.model)?;
    let file = File::open(&a.data).map_err(|e| CliError::io(&a.data, e))?;
    let levels = read_fidelity_csv(file)?;
    let bounds = data_bounds(&levels)?;
    let m = levels.len();
    let data = FidelityDataset::new(levels, bounds)?;
    let cfg = cascade_config(CascadeConfig::default(), m, &a.model, &rc)?;
    log::info!("training {m}-level model on {} inputs", data.dim());
    let model = DeepHpcfeModel::train(&cfg, &data)?;
    let mut out = Outputs::new();
    let mut doc = model.to_json()?;
    doc.push('\n');
    out.write(&a.out, doc.as_bytes())?;
    out.finish(
        &manifest_for(&a.out),
        "fit",
        json!({ "data": a.data, "cascade": cfg }),
        Vec::new(),
    )
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let model = DeepHpcfeModel::from_json(&read_to_string(&a.model)?)?;
    let file = File::open(&a.query).map_err(|e| CliError::io(&a.query, e))?;
    let x = read_inputs_csv(file)?;
    if x.ncols() != model.input_dim() {
        return Err(CliError::Usage(format!(
            "query has {} input columns, model expects {}",
            x.ncols(),
            model.input_dim()
        )));
    }
    let pred = model.predict(&x)?;
    let top = pred.highest();
    if top.extrapolated {
        log::warn!("some query points lie outside the training box");
    }
    let mut wr = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
    header.push("mean".into());
    header.push("variance".into());
    wr.write_record(&header)?;
    for i in 0..x.nrows() {
        let mut rec: Vec<String> = x.row(i).iter().map(|&v| fmt_f64(v)).collect();
        rec.push(fmt_f64(top.mean[i]));
        rec.push(fmt_f64(top.variance[i]));
        wr.write_record(&rec)?;
    }
    let bytes = wr.into_inner().map_err(|e| CliError::io(&a.out, e.into_error()))?;
    let mut out = Outputs::new();
    out.write(&a.out, &bytes)?;
    out.finish(
        &manifest_for(&a.out),
        "predict",
        json!({ "model": a.model, "query": a.query }),
        Vec::new(),
    )
}
