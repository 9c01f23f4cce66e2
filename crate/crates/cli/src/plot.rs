//! `plot-data`: tidy long-format CSV from any report.

use hpcfe_core::bench::StudyResult;
use hpcfe_core::datasets::fmt_f64;
use hpcfe_core::twin::TrackingReport;
use serde_json::{json, Value};

use crate::args::PlotArgs;
use crate::error::{CliError, Result};
use crate::output::{manifest_for, read_to_string, Outputs};

fn study_rows(r: &StudyResult) -> Result<Vec<u8>> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["series", "x", "value"])?;
    for d in &r.densities {
        for (x, v) in r.kde_grid.iter().zip(&d.density) {
            wr.write_record([format!("density_{}", d.model), fmt_f64(*x), fmt_f64(*v)])?;
        }
    }
    for s in &r.scores {
        for (metric, v) in [("rmse", s.rmse), ("ks_distance", s.ks_distance), ("mean_abs_error", s.mean_abs_error)] {
            wr.write_record([format!("{metric}_{}", s.model), String::new(), fmt_f64(v)])?;
        }
    }
    wr.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

fn tracking_rows(r: &TrackingReport) -> Result<Vec<u8>> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["series", "x", "value"])?;
    let mut series: Vec<(&str, &Vec<f64>)> = vec![("mean", &r.mean), ("variance", &r.variance)];
    if let Some(s) = &r.single_mean {
        series.push(("single_mean", s));
    }
    if let Some(s) = &r.truth {
        series.push(("truth", s));
    }
    for (name, vals) in series {
        for (t, v) in r.t_s.iter().zip(vals) {
            wr.write_record([name.to_string(), fmt_f64(*t), fmt_f64(*v)])?;
        }
    }
    wr.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn plot_data(a: &PlotArgs) -> Result<()> {
    let v: Value = serde_json::from_str(&read_to_string(&a.report)?)?;
    let bytes = if v.get("densities").is_some() {
        study_rows(&serde_json::from_value(v)?)?
    } else if v.get("t_s").is_some() && v.get("mean").is_some() {
        tracking_rows(&serde_json::from_value(v)?)?
    } else {
        return Err(CliError::Usage(format!(
            "{} is neither a study nor a tracking report",
            a.report.display()
        )));
    };
    let mut out = Outputs::new();
    out.write(&a.out, &bytes)?;
    out.finish(&manifest_for(&a.out), "plot-data", json!({ "report": a.report }), Vec::new())
}
