//! Tail summaries (run lengths above a high quantile, quantiles of sums of
//! consecutive terms) and the comparison of fitted models against the
//! observed series on those summaries.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::arma::arma11_acf;
use crate::estimate::{bias_correct, estimate_tpdf, estimate_tpdf_two_sided};
use crate::fit::{fit_in_box, fit_with, Family, FitResult, ParameterBox, PHI_BOUND};
use crate::marginal::MarginalModel;
use crate::simulate::{
    simulate_gaussian_arma, simulate_linear_rv, simulate_transformed, LinearDomain, SimulationRequest,
};
use crate::stats::{mean, normal_quantile, quantile, quantile_sorted, rank_uniforms, sample_acf, sd};
use crate::{Error, Result};

pub const DEFAULT_PROBS: [f64; 5] = [0.95, 0.98, 0.99, 0.995, 0.999];
pub const DEFAULT_SUM_TERMS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub threshold: f64,
    /// `None` when nothing exceeds the threshold.
    pub mean: Option<f64>,
    /// `None` with fewer than two runs.
    pub sd: Option<f64>,
    pub runs: Vec<usize>,
}

impl RunSummary {
    pub fn total(&self) -> usize {
        self.runs.iter().sum()
    }
}

/// Maximal runs of consecutive values strictly above `threshold`, including
/// runs touching either end of the series.
pub fn runs_above(x: &[f64], threshold: f64) -> RunSummary {
    let mut runs = Vec::new();
    let mut current = 0usize;
    for &v in x {
        if v > threshold {
            current += 1;
        } else if current > 0 {
            runs.push(current);
            current = 0;
        }
    }
    if current > 0 {
        runs.push(current);
    }
    let lengths: Vec<f64> = runs.iter().map(|&r| r as f64).collect();
    RunSummary {
        threshold,
        mean: (!runs.is_empty()).then(|| mean(&lengths)),
        sd: (runs.len() >= 2).then(|| sd(&lengths)),
        runs,
    }
}

/// Runs above the empirical `q`-quantile of `x`.
pub fn run_lengths(x: &[f64], q: f64) -> Result<RunSummary> {
    if x.is_empty() {
        return Err(Error::InsufficientData("empty series".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("q must lie in (0, 1), got {q}")));
    }
    Ok(runs_above(x, quantile(x, q)))
}

/// Empirical quantiles of the sums of `k` consecutive terms.
pub fn sum_quantiles(x: &[f64], k: usize, probs: &[f64]) -> Result<Vec<f64>> {
    if k == 0 || x.len() <= k {
        return Err(Error::InsufficientData(format!(
            "need more than {k} values, got {}",
            x.len()
        )));
    }
    if let Some(p) = probs.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    let mut sums: Vec<f64> = x.windows(k).map(|w| w.iter().sum()).collect();
    sums.sort_by(f64::total_cmp);
    Ok(probs.iter().map(|&p| quantile_sorted(&sums, p)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Observed,
    /// Transformed-linear ARMA(1,1).
    TransformedLinear,
    /// Gaussian ARMA(1,1) on normal scores.
    Gaussian,
    /// Linear ARMA(1,1) with Fréchet tails in both directions.
    LinearTwoSided,
    /// Linear ARMA(1,1) with nonnegative coefficients.
    LinearPositive,
}

impl ModelKind {
    pub const MODELS: [ModelKind; 4] = [
        ModelKind::TransformedLinear,
        ModelKind::Gaussian,
        ModelKind::LinearTwoSided,
        ModelKind::LinearPositive,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Observed => "observed",
            ModelKind::TransformedLinear => "transformed-linear",
            ModelKind::Gaussian => "gaussian",
            ModelKind::LinearTwoSided => "linear-two-sided",
            ModelKind::LinearPositive => "linear-positive",
        }
    }

    fn index(self) -> u64 {
        match self {
            ModelKind::Observed => 0,
            ModelKind::TransformedLinear => 1,
            ModelKind::Gaussian => 2,
            ModelKind::LinearTwoSided => 3,
            ModelKind::LinearPositive => 4,
        }
    }
}

/// A fitted comparison model, or why it could not be fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub kind: ModelKind,
    pub fit: std::result::Result<FitResult, String>,
}

fn arma11_box(lo: f64) -> ParameterBox {
    ParameterBox::new(vec![lo; 2], vec![PHI_BOUND; 2]).expect("valid bounds")
}

fn transformed_target(anomalies: &[f64], marginal: &MarginalModel, h_fit: usize, r0_q: f64) -> Result<Vec<f64>> {
    let z = bias_correct(&marginal.to_frechet_series(anomalies));
    Ok(estimate_tpdf(&z, h_fit, r0_q)?.sigma_hat)
}

fn fit_gaussian(anomalies: &[f64], h_fit: usize) -> Result<FitResult> {
    let scores: Vec<f64> = rank_uniforms(anomalies).into_iter().map(normal_quantile).collect();
    let acf = sample_acf(&scores, h_fit);
    fit_with(&acf, Family::ARMA11, &arma11_box(-PHI_BOUND), |x, h| arma11_acf(x[0], x[1], h))
}

fn fit_two_sided(anomalies: &[f64], marginal: &MarginalModel, h_fit: usize, r0_q: f64) -> Result<FitResult> {
    let z: Vec<f64> = anomalies.iter().map(|&v| marginal.to_frechet_two_sided(v)).collect();
    let m = mean(&z);
    let centered: Vec<f64> = z.iter().map(|v| v - m).collect();
    let est = estimate_tpdf_two_sided(&centered, h_fit, r0_q)?;
    fit_with(&est.sigma_hat, Family::ARMA11, &arma11_box(-PHI_BOUND), |x, h| {
        arma11_acf(x[0], x[1], h)
    })
}

/// Fits the four comparison models to an anomaly series:
/// the transformed-linear ARMA(1,1) (bias-corrected TPDF), a Gaussian
/// ARMA(1,1) (sample ACF of normal scores), a two-sided linear ARMA(1,1)
/// (signed TPDF) and a linear ARMA(1,1) restricted to `φ, θ ≥ 0`.
pub fn fit_comparison_models(
    anomalies: &[f64],
    marginal: &MarginalModel,
    h_fit: usize,
    r0_q: f64,
) -> Vec<ModelFit> {
    let target = transformed_target(anomalies, marginal, h_fit, r0_q);
    let wrap = |kind, r: Result<FitResult>| ModelFit {
        kind,
        fit: r.map_err(|e| e.to_string()),
    };
    let est_fit = |lo: f64| -> Result<FitResult> {
        let t = target.as_ref().map_err(|e| Error::Estimation(e.to_string()))?;
        fit_in_box(t, Family::ARMA11, &arma11_box(lo))
    };
    vec![
        wrap(ModelKind::TransformedLinear, est_fit(-PHI_BOUND)),
        wrap(ModelKind::Gaussian, fit_gaussian(anomalies, h_fit)),
        wrap(ModelKind::LinearTwoSided, fit_two_sided(anomalies, marginal, h_fit, r0_q)),
        wrap(ModelKind::LinearPositive, est_fit(0.0)),
    ]
}

/// Replaces each value by the marginal quantile at its plotting position, so
/// the output has the fitted marginal whatever the simulation scale.
pub fn to_marginal_by_rank(sim: &[f64], marginal: &MarginalModel) -> Vec<f64> {
    rank_uniforms(sim).into_iter().map(|u| marginal.quantile(u)).collect()
}

/// Simulates `n` values of a comparison model on the data scale.
pub fn simulate_model(
    kind: ModelKind,
    fit: &FitResult,
    marginal: &MarginalModel,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let spec = fit.spec()?;
    let raw = match kind {
        ModelKind::Observed => {
            return Err(Error::InvalidArgument("the observed series is not simulated".into()))
        }
        ModelKind::TransformedLinear => simulate_transformed(&SimulationRequest::new(spec, n, seed))?,
        ModelKind::Gaussian => simulate_gaussian_arma(&spec, n, seed)?,
        ModelKind::LinearTwoSided => simulate_linear_rv(&spec, n, seed, LinearDomain::TwoSided)?,
        ModelKind::LinearPositive => simulate_linear_rv(&spec, n, seed, LinearDomain::PositiveOnly)?,
    };
    Ok(to_marginal_by_rank(&raw, marginal))
}

pub type Cell<T> = std::result::Result<T, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub kind: ModelKind,
    pub seed: Option<u64>,
    pub runs: Vec<Cell<RunSummary>>,
    pub sums: Vec<Cell<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub probs: Vec<f64>,
    pub sum_terms: usize,
    pub columns: Vec<Column>,
}

fn summarize(kind: ModelKind, seed: Option<u64>, series: Result<Vec<f64>>, probs: &[f64], k: usize) -> Column {
    match series {
        Ok(x) => {
            let runs = probs
                .iter()
                .map(|&q| run_lengths(&x, q).map_err(|e| e.to_string()))
                .collect();
            let sums = match sum_quantiles(&x, k, probs) {
                Ok(v) => v.into_iter().map(Ok).collect(),
                Err(e) => vec![Err(e.to_string()); probs.len()],
            };
            Column { kind, seed, runs, sums }
        }
        Err(e) => Column {
            kind,
            seed,
            runs: vec![Err(e.to_string()); probs.len()],
            sums: vec![Err(e.to_string()); probs.len()],
        },
    }
}

/// Simulates every fitted model (model `i` with seed `seed + i`, concurrently),
/// maps each to the data marginal and tabulates run lengths and sums of
/// `k` consecutive terms against the observed series.
pub fn compare_models(
    data: &[f64],
    marginal: &MarginalModel,
    fits: &[ModelFit],
    n_sim: usize,
    seed: u64,
    probs: &[f64],
    k: usize,
) -> ComparisonReport {
    let mut columns = vec![summarize(ModelKind::Observed, None, Ok(data.to_vec()), probs, k)];
    let simulated: Vec<Column> = std::thread::scope(|scope| {
        let handles: Vec<_> = fits
            .iter()
            .map(|mf| {
                let model_seed = seed.wrapping_add(mf.kind.index());
                scope.spawn(move || {
                    let series = match &mf.fit {
                        Ok(fit) => simulate_model(mf.kind, fit, marginal, n_sim, model_seed),
                        Err(e) => Err(Error::Fit(e.clone())),
                    };
                    summarize(mf.kind, Some(model_seed), series, probs, k)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    columns.extend(simulated);
    ComparisonReport {
        probs: probs.to_vec(),
        sum_terms: k,
        columns,
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

impl ComparisonReport {
    pub fn column(&self, kind: ModelKind) -> Option<&Column> {
        self.columns.iter().find(|c| c.kind == kind)
    }

    /// Long-format CSV: `model,seed,statistic,prob,value,sd,error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,seed,statistic,prob,value,sd,error\n");
        for col in &self.columns {
            let seed = col.seed.map(|s| s.to_string()).unwrap_or_default();
            for (i, &p) in self.probs.iter().enumerate() {
                let (value, spread, err) = match &col.runs[i] {
                    Ok(r) => (
                        r.mean.map(fmt_num).unwrap_or_default(),
                        r.sd.map(fmt_num).unwrap_or_default(),
                        if r.mean.is_none() { "no exceedances".to_string() } else { String::new() },
                    ),
                    Err(e) => (String::new(), String::new(), e.clone()),
                };
                let _ = writeln!(
                    out,
                    "{},{seed},run_mean,{p},{value},{spread},{}",
                    col.kind.label(),
                    csv_escape(&err)
                );
            }
            for (i, &p) in self.probs.iter().enumerate() {
                let (value, err) = match &col.sums[i] {
                    Ok(v) => (fmt_num(*v), String::new()),
                    Err(e) => (String::new(), e.clone()),
                };
                let _ = writeln!(
                    out,
                    "{},{seed},sum{}_quantile,{p},{value},,{}",
                    col.kind.label(),
                    self.sum_terms,
                    csv_escape(&err)
                );
            }
        }
        out
    }

    /// Two aligned tables: mean (sd) run length above each quantile, and
    /// quantiles of the `k`-term sums.
    pub fn to_text(&self) -> String {
        let width = 22;
        let mut out = String::new();
        let header = |out: &mut String, title: &str| {
            let _ = writeln!(out, "{title}");
            let _ = write!(out, "{:>8}", "prob");
            for col in &self.columns {
                let _ = write!(out, "{:>width$}", col.kind.label());
            }
            out.push('\n');
        };
        header(&mut out, "Mean (sd) length of runs above the quantile");
        for (i, p) in self.probs.iter().enumerate() {
            let _ = write!(out, "{p:>8}");
            for col in &self.columns {
                let cell = match &col.runs[i] {
                    Ok(r) => match (r.mean, r.sd) {
                        (Some(m), Some(s)) => format!("{m:.2} ({s:.2})"),
                        (Some(m), None) => format!("{m:.2} (-)"),
                        _ => "-".to_string(),
                    },
                    Err(_) => "error".to_string(),
                };
                let _ = write!(out, "{cell:>width$}");
            }
            out.push('\n');
        }
        out.push('\n');
        header(&mut out, &format!("Quantiles of sums of {} consecutive values", self.sum_terms));
        for (i, p) in self.probs.iter().enumerate() {
            let _ = write!(out, "{p:>8}");
            for col in &self.columns {
                let cell = match &col.sums[i] {
                    Ok(v) => format!("{v:.2}"),
                    Err(_) => "error".to_string(),
                };
                let _ = write!(out, "{cell:>width$}");
            }
            out.push('\n');
        }
        let errors: Vec<String> = self
            .columns
            .iter()
            .filter_map(|c| match (&c.runs.first(), &c.sums.first()) {
                (Some(Err(e)), _) | (_, Some(Err(e))) => Some(format!("{}: {e}", c.kind.label())),
                _ => None,
            })
            .collect();
        if !errors.is_empty() {
            out.push('\n');
            for e in errors {
                let _ = writeln!(out, "{e}");
            }
        }
        out
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginal::fit_marginal;
    use crate::tlops::{sample_noise, NoiseSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_counted_runs() {
        let r = runs_above(&[0.0, 5.0, 5.0, 0.0, 5.0], 1.0);
        assert_eq!(r.runs, vec![2, 1]);
        assert_eq!(r.mean, Some(1.5));
        assert_eq!(r.total(), 3);
        let none = runs_above(&[0.0, 0.5], 1.0);
        assert!(none.mean.is_none() && none.runs.is_empty());
    }

    #[test]
    fn boundary_runs_counted() {
        let r = runs_above(&[3.0, 3.0, 0.0, 3.0], 1.0);
        assert_eq!(r.runs, vec![2, 1]);
    }

    #[test]
    fn iid_runs_are_geometric() {
        let z = sample_noise(NoiseSpec::frechet(17), 100_000);
        let r = run_lengths(&z, 0.95).unwrap();
        assert!((r.mean.unwrap() - 1.0 / 0.95).abs() < 0.03, "{:?}", r.mean);
        let above = z.iter().filter(|&&v| v > r.threshold).count();
        assert_eq!(r.total(), above);
    }

    #[test]
    fn sum_quantile_examples() {
        let q = sum_quantiles(&[2.0; 20], 3, &[0.1, 0.5, 0.99]).unwrap();
        assert!(q.iter().all(|&v| v == 6.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u: Vec<f64> = (0..100_000).map(|_| rng.random()).collect();
        let med = sum_quantiles(&u, 3, &[0.5]).unwrap()[0];
        assert!((med - 1.5).abs() < 0.02);
        assert!(sum_quantiles(&[1.0, 2.0, 3.0], 3, &[0.5]).is_err());
    }

    #[test]
    fn observed_column_matches_direct_computation() {
        let z = sample_noise(NoiseSpec::frechet(2), 5_000);
        let marginal = fit_marginal(&z, 0.025).unwrap();
        let report = compare_models(&z, &marginal, &[], 5_000, 1, &DEFAULT_PROBS, 3);
        let obs = report.column(ModelKind::Observed).unwrap();
        for (i, &p) in DEFAULT_PROBS.iter().enumerate() {
            assert_eq!(obs.runs[i].as_ref().unwrap(), &run_lengths(&z, p).unwrap());
        }
        assert!(report.to_csv().starts_with("model,seed,statistic"));
        assert!(report.to_text().contains("observed"));
    }

    #[test]
    fn failed_fit_is_reported_per_cell() {
        let z = sample_noise(NoiseSpec::frechet(2), 2_000);
        let marginal = fit_marginal(&z, 0.025).unwrap();
        let fits = vec![ModelFit {
            kind: ModelKind::Gaussian,
            fit: Err("no fit".into()),
        }];
        let report = compare_models(&z, &marginal, &fits, 2_000, 1, &[0.95], 3);
        assert_eq!(report.columns.len(), 2);
        assert!(report.columns[1].runs[0].is_err());
        assert!(report.to_text().contains("gaussian: "));
    }
}
