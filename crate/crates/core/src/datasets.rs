//! Experimental designs and file formats.
//!
//! Fidelity data CSV: header `x1,…,xd,y,level`, one sample per row.
//! Measurement CSV: header `t_s,fidelity,domain,payload_a,payload_b,n`.
//! Numbers are written in the shortest form that parses back to the same
//! `f64`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::InputBounds;
use crate::error::{Error, Result};
use crate::mf::{FidelityDataset, FidelityLevel};
use crate::twin::{Domain, Fidelity, MeasurementRecord, MeasurementSeries, Payload};
use crate::uq::sample_uniform_box;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// Evenly spaced points including both ends; `n = k^d` in `d > 1`.
    UniformGrid,
    UniformRandom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kind: DesignKind,
    /// Sample counts per level, lowest fidelity first.
    pub counts: Vec<usize>,
    pub nested: bool,
    pub seed: u64,
}

impl DesignSpec {
    pub fn nested(kind: DesignKind, counts: Vec<usize>, seed: u64) -> Self {
        DesignSpec {
            kind,
            counts,
            nested: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.is_empty() || self.counts.contains(&0) {
            return Err(Error::InvalidParameter(
                "design counts must be non-empty and positive".into(),
            ));
        }
        if self.nested {
            if let Some(w) = self.counts.windows(2).find(|w| w[1] > w[0]) {
                return Err(Error::InvalidParameter(format!(
                    "nested design cannot draw {} points from a parent of {}",
                    w[1], w[0]
                )));
            }
        }
        Ok(())
    }
}

/// Integer `k` with `k^d = n`, if any.
fn integer_root(n: usize, d: usize) -> Option<usize> {
    let k = (n as f64).powf(1.0 / d as f64).round() as usize;
    (k.saturating_sub(1)..=k + 1).find(|&c| c.checked_pow(d as u32) == Some(n))
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

fn base_design(kind: DesignKind, n: usize, bounds: &InputBounds, seed: u64, level: usize) -> Result<DMatrix<f64>> {
    let d = bounds.dim();
    match kind {
        DesignKind::UniformGrid => {
            let k = integer_root(n, d).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "a uniform grid in {d} dimensions needs k^{d} points, got {n}"
                ))
            })?;
            let axes: Vec<Vec<f64>> = (0..d)
                .map(|j| linspace(bounds.lower[j], bounds.upper[j], k))
                .collect();
            // first coordinate varies slowest
            Ok(DMatrix::from_fn(n, d, |i, j| {
                let idx = (i / k.pow((d - 1 - j) as u32)) % k;
                axes[j][idx]
            }))
        }
        DesignKind::UniformRandom => Ok(sample_uniform_box(bounds, n, seed, (level * 64) as u64)),
    }
}

/// Indices of `k` rows of `x` picked by greedy farthest-point selection,
/// sorted ascending. Distances are measured in normalized coordinates; the
/// first point is drawn from `rng` and ties go to the lower index.
pub fn maximin_subset(x: &DMatrix<f64>, bounds: &InputBounds, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let n = x.nrows();
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "cannot select {k} points from {n}"
        )));
    }
    if k == n {
        return Ok((0..n).collect());
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let (z, _) = bounds.normalize_lenient(x)?;
    let dist2 = |a: usize, b: usize| -> f64 {
        (0..z.ncols()).map(|j| (z[(a, j)] - z[(b, j)]).powi(2)).sum()
    };
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = (0..n).map(|i| dist2(i, first)).collect();
    while chosen.len() < k {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &dv) in nearest.iter().enumerate() {
            if dv > best_d {
                best_d = dv;
                best = i;
            }
        }
        chosen.push(best);
        for (i, dv) in nearest.iter_mut().enumerate() {
            *dv = dv.min(dist2(i, best));
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Input matrices for every level; with `nested`, level `i+1` rows are
/// copied from level `i`.
pub fn nested_design(spec: &DesignSpec, bounds: &InputBounds) -> Result<Vec<DMatrix<f64>>> {
    spec.validate()?;
    let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(spec.counts.len());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1 << 20);
    for (level, &n) in spec.counts.iter().enumerate() {
        let x = match out.last() {
            Some(parent) if spec.nested => {
                let idx = maximin_subset(parent, bounds, n, &mut rng)?;
                parent.select_rows(&idx)
            }
            _ => base_design(spec.kind, n, bounds, spec.seed, level)?,
        };
        out.push(x);
    }
    Ok(out)
}

/// Shortest decimal text that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn parse_f64(s: &str, line: usize, col: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("column {col}: {s:?} is not a number"),
    })
}

/// Write a fidelity dataset as CSV.
pub fn write_fidelity_csv<W: Write>(data: &FidelityDataset, w: W) -> Result<()> {
    let d = data.dim();
    let mut wr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    header.push("level".into());
    wr.write_record(&header)?;
    for lv in &data.levels {
        for i in 0..lv.x.nrows() {
            let mut rec: Vec<String> = (0..d).map(|j| fmt_f64(lv.x[(i, j)])).collect();
            rec.push(fmt_f64(lv.y[i]));
            rec.push(lv.level.to_string());
            wr.write_record(&rec)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Rows of a fidelity CSV grouped by level in increasing level order.
pub fn read_fidelity_csv<R: Read>(r: R) -> Result<Vec<FidelityLevel>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rd.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let level_col = cols
        .iter()
        .position(|&c| c == "level")
        .ok_or_else(|| Error::Schema("missing `level` column".into()))?;
    let y_col = cols
        .iter()
        .position(|&c| c == "y")
        .ok_or_else(|| Error::Schema("missing `y` column".into()))?;
    let mut x_cols = Vec::new();
    for j in 1.. {
        match cols.iter().position(|&c| c == format!("x{j}")) {
            Some(p) => x_cols.push(p),
            None => break,
        }
    }
    if x_cols.is_empty() {
        return Err(Error::Schema("no input columns x1..xd".into()));
    }
    if x_cols.len() + 2 != cols.len() {
        return Err(Error::Schema(format!(
            "unexpected columns in header {:?}; expected x1..xd,y,level",
            cols
        )));
    }
    let mut rows: std::collections::BTreeMap<u32, (Vec<f64>, Vec<f64>)> = Default::default();
    for (k, rec) in rd.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let level: u32 = rec[level_col].trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("column level: {:?} is not a non-negative integer", &rec[level_col]),
        })?;
        let entry = rows.entry(level).or_default();
        for (j, &c) in x_cols.iter().enumerate() {
            entry.0.push(parse_f64(&rec[c], line, &format!("x{}", j + 1))?);
        }
        entry.1.push(parse_f64(&rec[y_col], line, "y")?);
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("CSV has no data rows".into()));
    }
    let d = x_cols.len();
    Ok(rows
        .into_iter()
        .map(|(level, (x, y))| {
            let n = y.len();
            FidelityLevel::new(level, DMatrix::from_row_slice(n, d, &x), DVector::from_vec(y))
        })
        .collect())
}

/// Input matrix from the `x1..xd` columns of a CSV; other columns are
/// ignored, so a training file doubles as a query file.
pub fn read_inputs_csv<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rd.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let mut x_cols = Vec::new();
    for j in 1.. {
        match cols.iter().position(|&c| c == format!("x{j}")) {
            Some(p) => x_cols.push(p),
            None => break,
        }
    }
    if x_cols.is_empty() {
        return Err(Error::Schema("no input columns x1..xd".into()));
    }
    let mut vals = Vec::new();
    let mut n = 0;
    for (k, rec) in rd.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        for (j, &c) in x_cols.iter().enumerate() {
            vals.push(parse_f64(&rec[c], line, &format!("x{}", j + 1))?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InsufficientData("CSV has no data rows".into()));
    }
    Ok(DMatrix::from_row_slice(n, x_cols.len(), &vals))
}

/// Smallest box containing every level's inputs.
pub fn data_bounds(levels: &[FidelityLevel]) -> Result<InputBounds> {
    let d = levels
        .first()
        .map(|l| l.x.ncols())
        .ok_or_else(|| Error::InsufficientData("no levels".into()))?;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for lv in levels {
        for i in 0..lv.x.nrows() {
            for j in 0..d {
                lo[j] = lo[j].min(lv.x[(i, j)]);
                hi[j] = hi[j].max(lv.x[(i, j)]);
            }
        }
    }
    for j in 0..d {
        if hi[j] <= lo[j] {
            let pad = lo[j].abs().max(1.0) * 0.5;
            lo[j] -= pad;
            hi[j] += pad;
        }
    }
    InputBounds::new(lo, hi)
}

pub fn save_fidelity_csv(path: &Path, data: &FidelityDataset) -> Result<()> {
    let mut buf = Vec::new();
    write_fidelity_csv(data, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_fidelity_csv(path: &Path) -> Result<Vec<FidelityLevel>> {
    read_fidelity_csv(std::fs::File::open(path)?)
}

pub fn write_measurement_csv<W: Write>(series: &[&MeasurementSeries], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t_s", "fidelity", "domain", "payload_a", "payload_b", "n"])?;
    for s in series {
        for r in &s.records {
            let (a, b, n) = match r.payload {
                Payload::PeakPair { u_start, u_end, cycles } => (u_start, u_end, cycles),
                Payload::FrfPeak { h_max, omega_max } => (h_max, omega_max, 0),
            };
            wr.write_record([
                fmt_f64(r.t_s),
                s.fidelity.as_str().to_string(),
                s.domain.as_str().to_string(),
                fmt_f64(a),
                fmt_f64(b),
                n.to_string(),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Measurement series keyed by fidelity, in file order within each.
pub fn read_measurement_csv<R: Read>(r: R) -> Result<Vec<MeasurementSeries>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let expected = ["t_s", "fidelity", "domain", "payload_a", "payload_b", "n"];
    if header != expected {
        return Err(Error::Schema(format!(
            "measurement header {header:?}, expected {expected:?}"
        )));
    }
    let mut out: Vec<MeasurementSeries> = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let fidelity = Fidelity::parse(&rec[1]).ok_or_else(|| Error::Parse {
            line,
            msg: format!("unknown fidelity {:?}", &rec[1]),
        })?;
        let domain = Domain::parse(&rec[2]).ok_or_else(|| Error::Parse {
            line,
            msg: format!("unknown domain {:?}", &rec[2]),
        })?;
        let t_s = parse_f64(&rec[0], line, "t_s")?;
        let a = parse_f64(&rec[3], line, "payload_a")?;
        let b = parse_f64(&rec[4], line, "payload_b")?;
        let n: u32 = rec[5].trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("column n: {:?} is not a non-negative integer", &rec[5]),
        })?;
        let payload = match domain {
            Domain::Time => {
                if n == 0 {
                    return Err(Error::Parse {
                        line,
                        msg: "peak pairs need n >= 1".into(),
                    });
                }
                Payload::PeakPair {
                    u_start: a,
                    u_end: b,
                    cycles: n,
                }
            }
            Domain::Frequency => Payload::FrfPeak {
                h_max: a,
                omega_max: b,
            },
        };
        let pos = match out.iter().position(|s| s.fidelity == fidelity) {
            Some(p) => p,
            None => {
                out.push(MeasurementSeries::empty(fidelity, domain));
                out.len() - 1
            }
        };
        let s = &mut out[pos];
        if s.domain != domain {
            return Err(Error::Parse {
                line,
                msg: format!("{} series mixes domains", fidelity.as_str()),
            });
        }
        if s.records.last().is_some_and(|r| r.t_s >= t_s) {
            return Err(Error::Parse {
                line,
                msg: "slow times must be strictly increasing within a series".into(),
            });
        }
        s.records.push(MeasurementRecord { t_s, payload });
    }
    out.sort_by_key(|s| s.fidelity);
    Ok(out)
}

/// Run configuration file (JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Benchmark name: `pedagogical` or `buckling`.
    #[serde(default)]
    pub bench: Option<String>,
    /// Samples per fidelity level, lowest first.
    #[serde(default)]
    pub design: Option<Vec<usize>>,
    /// `(degree, interaction order)` per level.
    #[serde(default)]
    pub orders: Option<Vec<(usize, usize)>>,
    #[serde(default)]
    pub modified: Option<bool>,
    /// Upper-stage trends over the appended lower-level outputs only.
    #[serde(default)]
    pub appended_trend: Option<bool>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Monte Carlo sample size for propagation studies.
    #[serde(default)]
    pub mcs: Option<usize>,
    #[serde(default)]
    pub nugget: Option<f64>,
    #[serde(default)]
    pub pinv_tolerance: Option<f64>,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
