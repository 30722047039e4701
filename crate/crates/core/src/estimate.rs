//! Empirical TPDF estimation from radial exceedances, Fréchet-scale bias
//! correction and the χ(h) tail-dependence estimator.

use serde::{Deserialize, Serialize};

use crate::stats::{ecdf_values, mean};
use crate::{Error, Result};

pub const DEFAULT_R0_QUANTILE: f64 = 0.975;
pub const LOW_COUNT: usize = 30;
/// Estimates above `1 + SIGMA_SLACK` get a warning.
pub const SIGMA_SLACK: f64 = 0.1;

/// `z_t − mean(z)`, clamped below at zero.
pub fn bias_correct(z: &[f64]) -> Vec<f64> {
    if z.is_empty() {
        return Vec::new();
    }
    let m = mean(z);
    z.iter().map(|v| (v - m).max(0.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpdfEstimate {
    /// σ̂(1), …, σ̂(H).
    pub sigma_hat: Vec<f64>,
    pub n_exceed: Vec<usize>,
    pub r0_quantile: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TpdfEstimate {
    pub fn max_lag(&self) -> usize {
        self.sigma_hat.len()
    }

    /// σ̂(h) for `h ≥ 1`; σ(0) is 1 by construction.
    pub fn at(&self, h: usize) -> Option<f64> {
        if h == 0 {
            Some(1.0)
        } else {
            self.sigma_hat.get(h - 1).copied()
        }
    }
}

/// Per-lag estimate: radii of the pairs `(x_t, x_{t+h})`, threshold at the
/// `k = ⌈(1 − q)m⌉`-th largest radius (every pair tied with it is kept), and
/// `2 × mean(w_t w_{t+h})` over the exceeding pairs.
fn lag_estimate(x: &[f64], h: usize, q: f64) -> Result<(f64, usize)> {
    let m = x.len() - h;
    let mut radii: Vec<f64> = (0..m).map(|t| x[t].hypot(x[t + h])).collect();
    let k = (((1.0 - q) * m as f64).ceil() as usize).clamp(1, m);
    let r0 = {
        let (_, nth, _) = radii.select_nth_unstable_by(m - k, f64::total_cmp);
        *nth
    };
    radii.clear();
    let mut acc = 0.0;
    let mut count = 0usize;
    for t in 0..m {
        let (a, b) = (x[t], x[t + h]);
        let r = a.hypot(b);
        if r >= r0 && r > 0.0 {
            acc += (a / r) * (b / r);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Estimation(format!("no radial exceedances at lag {h}")));
    }
    Ok((2.0 * acc / count as f64, count))
}

fn estimate_impl(x: &[f64], max_lag: usize, r0_quantile: f64, two_sided: bool) -> Result<TpdfEstimate> {
    if !(r0_quantile > 0.0 && r0_quantile < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "r0 quantile must lie in (0, 1), got {r0_quantile}"
        )));
    }
    if max_lag == 0 {
        return Err(Error::InvalidArgument("maximum lag must be at least 1".into()));
    }
    if x.len() <= max_lag + 30 {
        return Err(Error::InsufficientData(format!(
            "series of length {} is too short for {max_lag} lags",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series contains non-finite values".into()));
    }
    if !two_sided && x.iter().any(|&v| v < 0.0) {
        return Err(Error::Domain(
            "TPDF estimation expects a nonnegative series; apply bias_correct first".into(),
        ));
    }
    let mut sigma_hat = Vec::with_capacity(max_lag);
    let mut n_exceed = Vec::with_capacity(max_lag);
    let mut warnings = Vec::new();
    for h in 1..=max_lag {
        let (s, c) = lag_estimate(x, h, r0_quantile)?;
        if c < LOW_COUNT {
            warnings.push(format!("lag {h}: only {c} radial exceedances"));
        }
        if s > 1.0 + SIGMA_SLACK {
            warnings.push(format!("lag {h}: estimate {s} exceeds 1 by more than {SIGMA_SLACK}"));
        }
        sigma_hat.push(s);
        n_exceed.push(c);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(TpdfEstimate {
        sigma_hat,
        n_exceed,
        r0_quantile,
        warnings,
    })
}

/// Estimates σ(1..=max_lag) from a nonnegative Fréchet-scale series.
pub fn estimate_tpdf(x: &[f64], max_lag: usize, r0_quantile: f64) -> Result<TpdfEstimate> {
    estimate_impl(x, max_lag, r0_quantile, false)
}

/// Same estimator for series with both tails; angles are signed.
pub fn estimate_tpdf_two_sided(x: &[f64], max_lag: usize, r0_quantile: f64) -> Result<TpdfEstimate> {
    estimate_impl(x, max_lag, r0_quantile, true)
}

/// `#{F̂(x_t) > u, F̂(x_{t+h}) > u} / #{F̂(x_t) > u}` with rank-based `F̂`.
pub fn estimate_chi(x: &[f64], h: usize, u: f64) -> Result<f64> {
    if !(u > 0.5 && u < 1.0) {
        return Err(Error::InvalidArgument(format!("u must lie in (0.5, 1), got {u}")));
    }
    if h >= x.len() {
        return Err(Error::InsufficientData(format!(
            "lag {h} is not smaller than the series length {}",
            x.len()
        )));
    }
    let f = ecdf_values(x);
    let mut cond = 0usize;
    let mut joint = 0usize;
    for t in 0..x.len() - h {
        if f[t] > u {
            cond += 1;
            if f[t + h] > u {
                joint += 1;
            }
        }
    }
    if cond == 0 {
        return Err(Error::Estimation(format!("no observations above level {u}")));
    }
    Ok(joint as f64 / cond as f64)
}
