//! Least-squares fitting of closed-form model TPDFs to an estimated TPDF:
//! dense grid (multiples of 0.01) followed by bounded simplex refinement.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arma::{ar1_tpdf, arma11_tpdf, ma1_tpdf, ArmaSpec};
use crate::estimate::TpdfEstimate;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::{Error, Result};

pub const DEFAULT_FIT_LAGS: usize = 30;
pub const PHI_BOUND: f64 = 0.999_999;
pub const GRID_STEP: f64 = 0.01;
const BOUNDARY_TOL: f64 = 1e-6;
const NEAR_ZERO: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    MA1,
    AR1,
    ARMA11,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::MA1, Family::AR1, Family::ARMA11];

    pub fn n_params(self) -> usize {
        match self {
            Family::ARMA11 => 2,
            _ => 1,
        }
    }

    /// Default search box: `θ ∈ [0, 1]` for MA(1) (σ(1) = θ/(1+θ²) peaks at
    /// θ = 1), `|φ|, |θ| ≤ 0.999999` otherwise.
    pub fn default_box(self) -> ParameterBox {
        match self {
            Family::MA1 => ParameterBox::new(vec![0.0], vec![1.0]),
            Family::AR1 => ParameterBox::new(vec![-PHI_BOUND], vec![PHI_BOUND]),
            Family::ARMA11 => ParameterBox::new(vec![-PHI_BOUND; 2], vec![PHI_BOUND; 2]),
        }
        .expect("static bounds are valid")
    }

    /// Model TPDF at lag `h` for a parameter vector (`[θ]`, `[φ]` or `[φ, θ]`).
    pub fn tpdf(self, x: &[f64], h: usize) -> f64 {
        match self {
            Family::MA1 => ma1_tpdf(x[0], h),
            Family::AR1 => ar1_tpdf(x[0], h),
            Family::ARMA11 => arma11_tpdf(x[0], x[1], h),
        }
    }

    pub fn params(self, x: &[f64]) -> Params {
        match self {
            Family::MA1 => Params { phi: None, theta: Some(x[0]) },
            Family::AR1 => Params { phi: Some(x[0]), theta: None },
            Family::ARMA11 => Params { phi: Some(x[0]), theta: Some(x[1]) },
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::MA1 => "MA1",
            Family::AR1 => "AR1",
            Family::ARMA11 => "ARMA11",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace(['(', ')', ',', ' '], "").as_str() {
            "MA1" => Ok(Family::MA1),
            "AR1" => Ok(Family::AR1),
            "ARMA11" => Ok(Family::ARMA11),
            _ => Err(Error::InvalidArgument(format!("unknown model family '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// A parameter sits within 1e−6 of the search box.
    Boundary,
    /// The fitted model has σ(h) = 0 at every fitted lag.
    ZeroTpdf,
    /// A simpler model explains the fit (a coefficient near zero, or a
    /// near-cancelling ARMA pair).
    Identifiability,
    /// The target TPDF is identically zero.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    pub params: Params,
    pub ss: f64,
    pub flags: Vec<FitFlag>,
}

impl FitResult {
    pub fn has_flag(&self, flag: FitFlag) -> bool {
        self.flags.contains(&flag)
    }

    /// The fitted model as an ARMA spec.
    pub fn spec(&self) -> Result<ArmaSpec> {
        let phi: Vec<f64> = self.params.phi.into_iter().collect();
        let theta: Vec<f64> = self.params.theta.into_iter().collect();
        ArmaSpec::new(phi, theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty()
            || lower.len() != upper.len()
            || lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite())
        {
            return Err(Error::Fit("empty feasible parameter set".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn on_boundary(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .any(|(v, (l, u))| v - l <= BOUNDARY_TOL || u - v <= BOUNDARY_TOL)
    }

    /// Multiples of the grid step inside `[lo, hi]`, plus both endpoints.
    fn axis(lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = vec![lo];
        let first = (lo / GRID_STEP).ceil() as i64;
        let last = (hi / GRID_STEP).floor() as i64;
        for k in first..=last {
            let v = k as f64 / 100.0;
            if v > lo && v < hi {
                pts.push(v);
            }
        }
        if hi > lo {
            pts.push(hi);
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsSolution {
    pub x: Vec<f64>,
    pub ss: f64,
    /// Objective at the best grid point, before refinement.
    pub grid_ss: f64,
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Minimizes `Σ_h (target[h−1] − model(x, h))²` over the box.
pub fn least_squares<F>(target: &[f64], model: F, bounds: &ParameterBox) -> Result<LsSolution>
where
    F: Fn(&[f64], usize) -> f64,
{
    if target.is_empty() {
        return Err(Error::Fit("empty target TPDF".into()));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("target TPDF contains non-finite values".into()));
    }
    let ss = |x: &[f64]| -> f64 {
        target
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let d = t - model(x, i + 1);
                d * d
            })
            .sum()
    };
    let axes: Vec<Vec<f64>> = (0..bounds.dim())
        .map(|d| ParameterBox::axis(bounds.lower[d], bounds.upper[d]))
        .collect();
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    let mut idx = vec![0usize; axes.len()];
    let mut point = vec![0.0; axes.len()];
    'grid: loop {
        for (d, i) in idx.iter().enumerate() {
            point[d] = axes[d][*i];
        }
        let v = ss(&point);
        let n = norm2(&point);
        let better = match &best {
            None => true,
            Some((bv, bn, _)) => v < *bv || (v == *bv && n < *bn),
        };
        if better && v.is_finite() {
            best = Some((v, n, point.clone()));
        }
        for d in (0..axes.len()).rev() {
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                continue 'grid;
            }
            idx[d] = 0;
        }
        break;
    }
    let (grid_ss, _, x0) = best.ok_or_else(|| Error::Fit("no finite objective on the grid".into()))?;
    let opts = NelderMeadOptions {
        initial_step: GRID_STEP,
        max_iter: 5000,
        f_tol: 1e-20,
        x_tol: 1e-12,
    };
    let refined = nelder_mead(ss, &x0, &bounds.lower, &bounds.upper, &opts);
    let (x, value) = if refined.f <= grid_ss {
        (refined.x, refined.f)
    } else {
        (x0, grid_ss)
    };
    Ok(LsSolution {
        x,
        ss: value,
        grid_ss,
    })
}

/// Fits a family to `target = (σ̂(1), …, σ̂(H))` inside an explicit box.
pub fn fit_in_box(target: &[f64], family: Family, bounds: &ParameterBox) -> Result<FitResult> {
    fit_with(target, family, bounds, |x, h| family.tpdf(x, h))
}

/// Like [`fit_in_box`] with a caller-supplied lag function in place of the
/// family's TPDF (e.g. the classical autocorrelation for baseline models).
pub fn fit_with<F>(target: &[f64], family: Family, bounds: &ParameterBox, model: F) -> Result<FitResult>
where
    F: Fn(&[f64], usize) -> f64,
{
    if bounds.dim() != family.n_params() {
        return Err(Error::InvalidArgument(format!(
            "{family} has {} parameters, box has {}",
            family.n_params(),
            bounds.dim()
        )));
    }
    let sol = least_squares(target, &model, bounds)?;
    let mut flags = Vec::new();
    if bounds.on_boundary(&sol.x) {
        flags.push(FitFlag::Boundary);
    }
    if (1..=target.len()).all(|h| model(&sol.x, h) == 0.0) {
        flags.push(FitFlag::ZeroTpdf);
    }
    let unidentified = match family {
        Family::MA1 => sol.x[0] <= 0.0,
        Family::AR1 => sol.x[0].abs() < NEAR_ZERO,
        Family::ARMA11 => {
            let (phi, theta) = (sol.x[0], sol.x[1]);
            phi.abs() < NEAR_ZERO || theta.abs() < NEAR_ZERO || (phi + theta).abs() < NEAR_ZERO
        }
    };
    if unidentified || flags.contains(&FitFlag::ZeroTpdf) {
        flags.push(FitFlag::Identifiability);
    }
    if target.iter().all(|&v| v == 0.0) {
        flags.push(FitFlag::Degenerate);
    }
    Ok(FitResult {
        family,
        params: family.params(&sol.x),
        ss: sol.ss,
        flags,
    })
}

/// Fits a family to the given TPDF values with the family's default box.
pub fn fit_to_target(target: &[f64], family: Family) -> Result<FitResult> {
    fit_in_box(target, family, &family.default_box())
}

/// Fits a family to lags `1..=h_fit` of an estimate.
pub fn fit_model(est: &TpdfEstimate, family: Family, h_fit: usize) -> Result<FitResult> {
    if h_fit == 0 || est.max_lag() < h_fit {
        return Err(Error::Fit(format!(
            "estimate has {} lags, {h_fit} requested",
            est.max_lag()
        )));
    }
    fit_to_target(&est.sigma_hat[..h_fit], family)
}

/// Fits every family and ranks successful fits by SS (ascending); failures
/// are kept, after the successes.
pub fn fit_all(est: &TpdfEstimate, h_fit: usize) -> Vec<(Family, Result<FitResult>)> {
    let mut out: Vec<(Family, Result<FitResult>)> =
        Family::ALL.iter().map(|&f| (f, fit_model(est, f, h_fit))).collect();
    out.sort_by(|a, b| {
        let key = |r: &Result<FitResult>| r.as_ref().map(|f| f.ss).unwrap_or(f64::INFINITY);
        key(&a.1).total_cmp(&key(&b.1))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target(family: Family, x: &[f64], h: usize) -> Vec<f64> {
        (1..=h).map(|k| family.tpdf(x, k)).collect()
    }

    #[test]
    fn ar1_self_recovery() {
        let fit = fit_to_target(&target(Family::AR1, &[0.9], 30), Family::AR1).unwrap();
        assert!((fit.params.phi.unwrap() - 0.9).abs() < 1e-3);
        assert!(fit.ss <= 1e-10);
        assert!(fit.flags.is_empty());
    }

    #[test]
    fn arma11_self_recovery() {
        let t = target(Family::ARMA11, &[0.93, -0.51], 30);
        let fit = fit_to_target(&t, Family::ARMA11).unwrap();
        assert!((fit.params.phi.unwrap() - 0.93).abs() < 1e-4);
        assert!((fit.params.theta.unwrap() + 0.51).abs() < 1e-4);
        assert!(fit.ss <= 1e-12);
    }

    #[test]
    fn ma1_boundary_above_half() {
        let mut t = vec![0.0; 30];
        t[0] = 0.7;
        let fit = fit_to_target(&t, Family::MA1).unwrap();
        assert_eq!(fit.params.theta, Some(1.0));
        assert!(fit.has_flag(FitFlag::Boundary));
    }

    #[test]
    fn ma1_target_nests_in_arma11() {
        let t = target(Family::MA1, &[0.6], 30);
        let ma = fit_to_target(&t, Family::MA1).unwrap();
        let arma = fit_to_target(&t, Family::ARMA11).unwrap();
        assert!(ma.ss < 1e-12 && arma.ss < 1e-10, "{} {}", ma.ss, arma.ss);
        assert!(arma.has_flag(FitFlag::Identifiability));
    }

    #[test]
    fn zero_target() {
        let t = vec![0.0; 30];
        for family in Family::ALL {
            let fit = fit_to_target(&t, family).unwrap();
            assert!(fit.has_flag(FitFlag::Degenerate));
            assert!(fit.has_flag(FitFlag::ZeroTpdf));
            assert_eq!(fit.ss, 0.0);
        }
    }

    #[test]
    fn fit_all_ranks() {
        let t = target(Family::ARMA11, &[0.8, -0.3], 30);
        let est = TpdfEstimate {
            sigma_hat: t,
            n_exceed: vec![100; 30],
            r0_quantile: 0.975,
            warnings: vec![],
        };
        let ranked = fit_all(&est, 30);
        assert_eq!(ranked[0].0, Family::ARMA11);
        assert!(fit_model(&est, Family::AR1, 31).is_err());
    }

    #[test]
    fn family_parsing_and_json() {
        assert_eq!("arma(1,1)".parse::<Family>().unwrap(), Family::ARMA11);
        assert!("garch".parse::<Family>().is_err());
        let fit = FitResult {
            family: Family::AR1,
            params: Params { phi: Some(0.5), theta: None },
            ss: 0.25,
            flags: vec![FitFlag::Boundary],
        };
        let json = serde_json::to_string(&fit).unwrap();
        assert_eq!(json, r#"{"family":"AR1","params":{"phi":0.5},"ss":0.25,"flags":["boundary"]}"#);
        assert_eq!(serde_json::from_str::<FitResult>(&json).unwrap(), fit);
    }

    #[test]
    fn empty_box_rejected() {
        assert!(ParameterBox::new(vec![1.0], vec![0.0]).is_err());
    }
}
