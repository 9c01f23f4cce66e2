//! `uq run`.

use hpcfe_core::bench::{run_study, BenchmarkProblem, StudyConfig, StudyResult};
use hpcfe_core::datasets::fmt_f64;
use serde_json::json;

use crate::args::UqRunArgs;
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, Outputs};
use crate::surrogate::{cascade_config, load_run_config};

pub fn scores_csv(r: &StudyResult) -> Result<Vec<u8>> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["model", "rmse", "ks_distance", "mean_abs_error"])?;
    for s in &r.scores {
        wr.write_record([
            s.model.clone(),
            fmt_f64(s.rmse),
            fmt_f64(s.ks_distance),
            fmt_f64(s.mean_abs_error),
        ])?;
    }
    wr.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

/// One column per density curve on the shared grid.
pub fn densities_csv(r: &StudyResult) -> Result<Vec<u8>> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["x".to_string()];
    header.extend(r.densities.iter().map(|d| d.model.clone()));
    wr.write_record(&header)?;
    for (i, &x) in r.kde_grid.iter().enumerate() {
        let mut rec = vec![fmt_f64(x)];
        rec.extend(r.densities.iter().map(|d| fmt_f64(d.density[i])));
        wr.write_record(&rec)?;
    }
    wr.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn run(a: &UqRunArgs) -> Result<()> {
    let rc = load_run_config(&a.model)?;
    let name = match (a.bench, rc.bench.as_deref()) {
        (Some(b), _) => b.name().to_string(),
        (None, Some(b)) => b.to_string(),
        (None, None) => return Err(CliError::Usage("no benchmark given (--bench)".into())),
    };
    let problem = BenchmarkProblem::by_name(&name)?;
    let seed = a.seed.or(rc.seed).unwrap_or(0);
    let mut cfg = StudyConfig::for_problem(&problem, seed)?;
    if let Some(d) = a.design.clone().or(rc.design.clone()) {
        cfg.design.counts = d;
    }
    if let Some(n) = a.mcs.or(rc.mcs) {
        cfg.eval_points = n;
    }
    cfg.cascade = cascade_config(cfg.cascade, problem.num_levels(), &a.model, &rc)?;
    if let Some(v) = a.model.nugget.or(rc.nugget) {
        cfg.single.kernel.nugget = v;
    }
    if let Some(v) = a.model.pinv_tolerance.or(rc.pinv_tolerance) {
        cfg.single.pinv_tolerance = v;
    }
    log::info!("{name}: design {:?}, seed {seed}", cfg.design.counts);
    let result = run_study(&problem, &cfg)?;
    for s in &result.scores {
        log::info!("{:>8}: rmse {:.4e}, ks {:.4}", s.model, s.rmse, s.ks_distance);
    }

    ensure_dir(&a.out_dir)?;
    let mut out = Outputs::new();
    out.write(&a.out_dir.join("scores.csv"), &scores_csv(&result)?)?;
    out.write(&a.out_dir.join("densities.csv"), &densities_csv(&result)?)?;
    out.write_json(&a.out_dir.join("study.json"), &result)?;
    out.finish(
        &a.out_dir.join("manifest.json"),
        "uq run",
        json!({ "bench": name, "study": cfg }),
        vec![seed],
    )
}
