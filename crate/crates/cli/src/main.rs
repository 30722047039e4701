//! `translin`: batch pipeline for transformed-linear tail modelling.
//!
//! Failures print one line, `error: <kind>: <message>`, to stderr and exit
//! with a code per kind: 2 usage, 3 io, 4 malformed input, 5 invalid
//! configuration, 6 model or estimation failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDateTime;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use translin::arma::ArmaSpec;
use translin::diagnostics::{
    compare_models, fit_comparison_models, run_lengths, sum_quantiles, DEFAULT_PROBS, DEFAULT_SUM_TERMS,
};
use translin::estimate::{bias_correct, estimate_tpdf, DEFAULT_R0_QUANTILE};
use translin::fit::{fit_all, fit_model, Family, FitResult, DEFAULT_FIT_LAGS};
use translin::io::{self, Series};
use translin::marginal::{fit_marginal, remove_diurnal, MarginalModel, DEFAULT_TAIL_PROB};
use translin::simulate::{
    simulate_gaussian_arma, simulate_linear_rv, simulate_transformed, LinearDomain, SimulationRequest,
};
use translin::Error;

#[derive(Parser)]
#[command(name = "translin", version, about = "Transformed-linear models for heavy-tailed time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Remove the diurnal cycle, fit the marginal model and write the
    /// series on the unit Fréchet(α = 2) scale.
    Preprocess(PreprocessArgs),
    /// Estimate the TPDF of a Fréchet-scale series.
    EstimateTpdf(EstimateArgs),
    /// Fit MA(1), AR(1) and/or ARMA(1,1) TPDFs to an estimated TPDF.
    Fit(FitArgs),
    /// Simulate a model described by a JSON spec.
    Simulate(SimulateArgs),
    /// Run lengths and k-term sum quantiles of a series.
    Diagnose(DiagnoseArgs),
    /// Fit the comparison models to a series and tabulate their tail summaries.
    Compare(CompareArgs),
}

#[derive(Args)]
struct DateFilter {
    /// Keep observations at or after this date/time (ISO-8601).
    #[arg(long)]
    from: Option<String>,
    /// Keep observations at or before this date/time (ISO-8601).
    #[arg(long)]
    to: Option<String>,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    input: PathBuf,
    /// Fréchet-scale series (CSV).
    #[arg(long)]
    output: PathBuf,
    /// Marginal model (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Optional CSV of the anomalies.
    #[arg(long)]
    anomalies: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TAIL_PROB)]
    tail_prob: f64,
    /// Skip diurnal-cycle removal even when timestamps are present.
    #[arg(long)]
    no_diurnal: bool,
    #[command(flatten)]
    dates: DateFilter,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FIT_LAGS)]
    max_lag: usize,
    #[arg(long, default_value_t = DEFAULT_R0_QUANTILE)]
    r0_quantile: f64,
    /// Use the series as is instead of subtracting the mean and clamping at 0.
    #[arg(long)]
    no_bias_correct: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    #[value(name = "MA1", alias = "ma1")]
    Ma1,
    #[value(name = "AR1", alias = "ar1")]
    Ar1,
    #[value(name = "ARMA11", alias = "arma11")]
    Arma11,
    #[value(name = "all")]
    All,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    family: FamilyArg,
    /// Number of lags to fit (default: 30, or fewer if the input has fewer).
    #[arg(long)]
    max_lag: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON with `ar`, `ma`, `n`, optional `kind` and `burn_in`.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_PROBS)]
    probs: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_SUM_TERMS)]
    k: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Length of each simulated series (default: length of the input).
    #[arg(long)]
    n_sim: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TAIL_PROB)]
    tail_prob: f64,
    #[arg(long, default_value_t = DEFAULT_R0_QUANTILE)]
    r0_quantile: f64,
    #[arg(long, default_value_t = DEFAULT_FIT_LAGS)]
    max_lag: usize,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_PROBS)]
    probs: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_SUM_TERMS)]
    k: usize,
    #[arg(long)]
    no_diurnal: bool,
    #[command(flatten)]
    dates: DateFilter,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SimulationKind {
    #[default]
    Transformed,
    Gaussian,
    LinearTwoSided,
    LinearPositive,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationSpec {
    #[serde(default)]
    ar: Vec<f64>,
    #[serde(default)]
    ma: Vec<f64>,
    n: usize,
    #[serde(default)]
    kind: SimulationKind,
    burn_in: Option<usize>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum FitEntry {
    Ok(FitResult),
    Err { family: Family, error: String },
}

/// Inclusive bounds from `--from/--to`.
struct DateRange {
    from: Option<NaiveDateTime>,
    to: Option<NaiveDateTime>,
}

impl DateRange {
    fn parse(from: Option<&str>, to: Option<&str>) -> translin::Result<Self> {
        let conv = |s: Option<&str>| -> translin::Result<Option<NaiveDateTime>> {
            s.map(|v| io::parse_timestamp(v).map_err(|e| Error::InvalidArgument(e.to_string())))
                .transpose()
        };
        let range = Self {
            from: conv(from)?,
            to: conv(to)?,
        };
        if let (Some(a), Some(b)) = (range.from, range.to) {
            if a > b {
                return Err(Error::InvalidArgument("--from is after --to".into()));
            }
        }
        Ok(range)
    }

    fn is_unbounded(&self) -> bool {
        self.from.is_none() && self.to.is_none()
    }

    fn contains(&self, t: &NaiveDateTime) -> bool {
        self.from.is_none_or(|a| *t >= a) && self.to.is_none_or(|b| *t <= b)
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 3,
        Error::Csv(_) | Error::Json(_) | Error::Malformed(_) => 4,
        Error::InvalidArgument(_) | Error::InvalidSpec(_) => 5,
        _ => 6,
    }
}

fn kind_name(err: &Error) -> &'static str {
    match err {
        Error::Io(_) => "io",
        Error::Csv(_) | Error::Json(_) | Error::Malformed(_) => "malformed",
        Error::InvalidArgument(_) | Error::InvalidSpec(_) => "config",
        _ => "model",
    }
}

fn check_prob(name: &str, p: f64) -> translin::Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("--{name} must lie in (0, 1), got {p}")))
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

/// Anomalies of the (date-filtered) input: diurnal cycle removed when the
/// file has timestamps.
fn load_anomalies(
    input: &Path,
    dates: &DateFilter,
    no_diurnal: bool,
) -> translin::Result<(Series, Option<[f64; 24]>)> {
    let mut series = io::read_series_file(input)?;
    let range = DateRange::parse(dates.from.as_deref(), dates.to.as_deref())?;
    if !range.is_unbounded() {
        let ts = series.timestamps.as_ref().ok_or_else(|| {
            Error::InvalidArgument("--from/--to need a timestamp column in the input".into())
        })?;
        let keep: Vec<usize> = (0..ts.len()).filter(|&i| range.contains(&ts[i])).collect();
        series = Series {
            timestamps: Some(keep.iter().map(|&i| ts[i]).collect()),
            values: keep.iter().map(|&i| series.values[i]).collect(),
        };
    }
    if series.is_empty() {
        return Err(Error::InsufficientData("no observations to process".into()));
    }
    if series.timestamps.is_some() && !no_diurnal {
        let d = remove_diurnal(&series.timed()?)?;
        let out = Series {
            timestamps: series.timestamps,
            values: d.anomalies,
        };
        return Ok((out, Some(d.hourly_means)));
    }
    Ok((series, None))
}

fn preprocess(args: &PreprocessArgs) -> translin::Result<()> {
    check_prob("tail-prob", args.tail_prob)?;
    let (anomalies, hourly) = load_anomalies(&args.input, &args.dates, args.no_diurnal)?;
    let mut model = fit_marginal(&anomalies.values, args.tail_prob)?;
    if let Some(h) = hourly {
        model = model.with_hourly_means(h);
    }
    warn_all(&model.warnings);
    let frechet = Series {
        timestamps: anomalies.timestamps.clone(),
        values: model.to_frechet_series(&anomalies.values),
    };
    io::write_json_file(&args.model, &model)?;
    io::write_series_file(&args.output, &frechet)?;
    if let Some(path) = &args.anomalies {
        io::write_series_file(path, &anomalies)?;
    }
    Ok(())
}

fn estimate(args: &EstimateArgs) -> translin::Result<()> {
    check_prob("r0-quantile", args.r0_quantile)?;
    let series = io::read_series_file(&args.input)?;
    let z = if args.no_bias_correct {
        series.values
    } else {
        bias_correct(&series.values)
    };
    let est = estimate_tpdf(&z, args.max_lag, args.r0_quantile)?;
    warn_all(&est.warnings);
    io::write_tpdf_file(&args.output, &est)
}

fn fit(args: &FitArgs) -> translin::Result<()> {
    let est = io::read_tpdf_file(&args.input)?;
    let h_fit = args.max_lag.unwrap_or(DEFAULT_FIT_LAGS.min(est.max_lag()));
    let entries: Vec<FitEntry> = match args.family {
        FamilyArg::All => fit_all(&est, h_fit)
            .into_iter()
            .map(|(family, r)| match r {
                Ok(f) => FitEntry::Ok(f),
                Err(e) => FitEntry::Err {
                    family,
                    error: e.to_string(),
                },
            })
            .collect(),
        single => {
            let family = match single {
                FamilyArg::Ma1 => Family::MA1,
                FamilyArg::Ar1 => Family::AR1,
                _ => Family::ARMA11,
            };
            vec![FitEntry::Ok(fit_model(&est, family, h_fit)?)]
        }
    };
    println!("{:<8} {:>10} {:>10} {:>12}  flags", "family", "phi", "theta", "SS");
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    for e in &entries {
        match e {
            FitEntry::Ok(f) => {
                let flags: Vec<String> = f
                    .flags
                    .iter()
                    .map(|fl| serde_json::to_string(fl).unwrap_or_default().trim_matches('"').to_string())
                    .collect();
                println!(
                    "{:<8} {:>10} {:>10} {:>12.6}  {}",
                    f.family.to_string(),
                    fmt(f.params.phi),
                    fmt(f.params.theta),
                    f.ss,
                    flags.join(",")
                );
            }
            FitEntry::Err { family, error } => println!("{:<8} error: {error}", family.to_string()),
        }
    }
    match args.family {
        FamilyArg::All => io::write_json_file(&args.output, &entries),
        _ => io::write_json_file(&args.output, &entries[0]),
    }
}

fn simulate(args: &SimulateArgs) -> translin::Result<()> {
    let text = std::fs::read_to_string(&args.spec)?;
    let spec: SimulationSpec =
        serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(format!("{}: {e}", args.spec.display())))?;
    let arma = ArmaSpec::new(spec.ar, spec.ma)?;
    if spec.burn_in.is_some() && spec.kind != SimulationKind::Transformed {
        return Err(Error::InvalidSpec("burn_in is only supported for kind 'transformed'".into()));
    }
    let values = match spec.kind {
        SimulationKind::Transformed => {
            let mut req = SimulationRequest::new(arma, spec.n, args.seed);
            if let Some(b) = spec.burn_in {
                req = req.with_burn_in(b);
            }
            simulate_transformed(&req)?
        }
        SimulationKind::Gaussian => simulate_gaussian_arma(&arma, spec.n, args.seed)?,
        SimulationKind::LinearTwoSided => simulate_linear_rv(&arma, spec.n, args.seed, LinearDomain::TwoSided)?,
        SimulationKind::LinearPositive => {
            simulate_linear_rv(&arma, spec.n, args.seed, LinearDomain::PositiveOnly)?
        }
    };
    io::write_values_file(&args.output, &values)
}

fn diagnose(args: &DiagnoseArgs) -> translin::Result<()> {
    for &p in &args.probs {
        check_prob("probs", p)?;
    }
    let series = io::read_series_file(&args.input)?;
    let sums = sum_quantiles(&series.values, args.k, &args.probs)?;
    let mut out = String::from("statistic,prob,threshold,value,sd,n_runs\n");
    for &p in &args.probs {
        let r = run_lengths(&series.values, p)?;
        let opt = |v: Option<f64>| v.map(io::format_f64).unwrap_or_default();
        out.push_str(&format!(
            "run_mean,{p},{},{},{},{}\n",
            io::format_f64(r.threshold),
            opt(r.mean),
            opt(r.sd),
            r.runs.len()
        ));
    }
    for (p, s) in args.probs.iter().zip(&sums) {
        out.push_str(&format!("sum{}_quantile,{p},,{},,\n", args.k, io::format_f64(*s)));
    }
    std::fs::write(&args.output, out)?;
    Ok(())
}

fn compare(args: &CompareArgs) -> translin::Result<()> {
    check_prob("tail-prob", args.tail_prob)?;
    check_prob("r0-quantile", args.r0_quantile)?;
    for &p in &args.probs {
        check_prob("probs", p)?;
    }
    let (anomalies, _) = load_anomalies(&args.input, &args.dates, args.no_diurnal)?;
    let marginal: MarginalModel = fit_marginal(&anomalies.values, args.tail_prob)?;
    warn_all(&marginal.warnings);
    let fits = fit_comparison_models(&anomalies.values, &marginal, args.max_lag, args.r0_quantile);
    for f in &fits {
        match &f.fit {
            Ok(r) => println!(
                "{:<20} phi={:.4} theta={:.4} SS={:.6}",
                f.kind.label(),
                r.params.phi.unwrap_or(f64::NAN),
                r.params.theta.unwrap_or(f64::NAN),
                r.ss
            ),
            Err(e) => println!("{:<20} error: {e}", f.kind.label()),
        }
    }
    println!();
    let n_sim = args.n_sim.unwrap_or(anomalies.len());
    let report = compare_models(&anomalies.values, &marginal, &fits, n_sim, args.seed, &args.probs, args.k);
    print!("{}", report.to_text());
    std::fs::write(&args.output, report.to_csv())?;
    Ok(())
}

fn run(cli: &Cli) -> translin::Result<()> {
    match &cli.command {
        Command::Preprocess(a) => preprocess(a),
        Command::EstimateTpdf(a) => estimate(a),
        Command::Fit(a) => fit(a),
        Command::Simulate(a) => simulate(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Compare(a) => compare(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error: {}: {msg}", kind_name(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
