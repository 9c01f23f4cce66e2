use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "hpcfe", version, about = "H-PCFE surrogates, multi-fidelity UQ and digital-twin tracking")]
pub struct Cli {
    /// Increase diagnostic output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an H-PCFE model (one level) or a deep cascade (several levels)
    /// from a CSV with columns x1..xd,y,level.
    Fit(FitArgs),
    /// Evaluate a trained model at the points of a CSV with columns x1..xd.
    Predict(PredictArgs),
    /// Benchmark uncertainty-quantification studies.
    #[command(subcommand)]
    Uq(UqCommand),
    /// Digital-twin simulation and tracking.
    #[command(subcommand)]
    Twin(TwinCommand),
    /// Re-emit a study or tracking report as tidy CSV.
    PlotData(PlotArgs),
}

#[derive(Debug, Subcommand)]
pub enum UqCommand {
    /// Train LF-only, HF-only and multi-fidelity surrogates on a benchmark
    /// and score them against a Monte Carlo oracle.
    Run(UqRunArgs),
}

#[derive(Debug, Subcommand)]
pub enum TwinCommand {
    /// Write synthetic low- and high-fidelity measurements.
    Simulate(SimulateArgs),
    /// Identify, learn and update the twin from measurements.
    Track(TrackArgs),
}

/// Stage settings shared by `fit` and `uq run`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// JSON run configuration; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `degree,order` of one stage; repeat once per level, lowest first.
    #[arg(long = "orders", value_parser = parse_pair)]
    pub orders: Vec<(usize, usize)>,
    /// GP-only upper stages.
    #[arg(long)]
    pub modified: bool,
    /// Upper-stage trends over the appended lower-level outputs only.
    #[arg(long)]
    pub appended_trend: bool,
    /// Diagonal nugget of every stage's correlation matrix.
    #[arg(long)]
    pub nugget: Option<f64>,
    /// Relative singular-value cutoff of the coefficient solve.
    #[arg(long)]
    pub pinv_tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training CSV: x1..xd,y,level.
    #[arg(long)]
    pub data: PathBuf,
    /// Model JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Query CSV; columns other than x1..xd are ignored.
    #[arg(long)]
    pub query: PathBuf,
    /// Prediction CSV to write: x1..xd,mean,variance.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bench {
    Pedagogical,
    Buckling,
}

impl Bench {
    pub fn name(self) -> &'static str {
        match self {
            Bench::Pedagogical => "pedagogical",
            Bench::Buckling => "buckling",
        }
    }
}

#[derive(Debug, Args)]
pub struct UqRunArgs {
    #[arg(long, value_enum)]
    pub bench: Option<Bench>,
    /// Design and evaluation seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Samples per fidelity level, lowest first, e.g. `50,16`.
    #[arg(long, value_delimiter = ',')]
    pub design: Option<Vec<usize>>,
    /// Monte Carlo evaluation sample size.
    #[arg(long)]
    pub mcs: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuantityArg {
    Mass,
    Stiffness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Time,
    Frequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MassLowArg {
    Affine,
    Sawtooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InversionArg {
    Exact,
    /// Light-damping approximation.
    Approximate,
}

/// Nominal oscillator; damping is set through `ζ0`.
#[derive(Debug, Clone, Args)]
pub struct NominalArgs {
    #[arg(long, default_value_t = 1.0)]
    pub m0: f64,
    #[arg(long, default_value_t = 4.0)]
    pub k0: f64,
    #[arg(long, default_value_t = 0.02)]
    pub zeta0: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub quantity: QuantityArg,
    #[arg(long, value_enum)]
    pub domain: DomainArg,
    /// Number of high-fidelity measurements.
    #[arg(long)]
    pub hf: usize,
    /// Number of low-fidelity measurements.
    #[arg(long, default_value_t = 501)]
    pub lf: usize,
    /// End of the slow-time window in nominal periods.
    #[arg(long, default_value_t = 100.0)]
    pub t_max: f64,
    /// Relative amplitude noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Low-fidelity mass model; defaults to sawtooth in the time domain and
    /// affine in the frequency domain.
    #[arg(long, value_enum)]
    pub mass_low: Option<MassLowArg>,
    #[command(flatten)]
    pub nominal: NominalArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Measurement CSV with a low- and a high-fidelity series.
    #[arg(long)]
    pub measurements: PathBuf,
    /// Scenario JSON written by `twin simulate`; supplies the nominal
    /// system, window and the truth used for RMSE fields.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Tracked quantity; taken from the scenario when omitted.
    #[arg(long, value_enum)]
    pub quantity: Option<QuantityArg>,
    /// End of the slow-time window; defaults to the scenario's or the
    /// latest measurement time.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Number of equispaced evaluation times over the window.
    #[arg(long)]
    pub query_points: Option<usize>,
    /// Alert when the tracked |Δ| exceeds this.
    #[arg(long)]
    pub alert: Option<f64>,
    #[arg(long, value_enum, default_value = "exact")]
    pub inversion: InversionArg,
    #[command(flatten)]
    pub nominal: NominalArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// `study.json` from `uq run` or `report.json` from `twin track`.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `degree,order`, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_line_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn order_pairs() {
        assert_eq!(parse_pair("5,1"), Ok((5, 1)));
        assert_eq!(parse_pair(" 2 , 2"), Ok((2, 2)));
        assert!(parse_pair("5").is_err());
        assert!(parse_pair("a,1").is_err());
    }
}
