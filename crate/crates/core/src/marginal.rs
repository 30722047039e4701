//! Marginal preprocessing: diurnal-cycle removal, a semi-parametric
//! distribution estimate (empirical body, generalized Pareto upper tail) and
//! the round trip between the data scale and the unit Fréchet(α = 2) scale.

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::stats::quantile_sorted;
use crate::tlops::{frechet_cdf, frechet_quantile};
use crate::{Error, Result};

pub const DEFAULT_TAIL_PROB: f64 = 0.025;
pub const MIN_EXCEEDANCES: usize = 50;
/// Smallest admissible GPD shape; keeps the likelihood regular.
pub const MIN_SHAPE: f64 = -0.5;
/// Below this `|ξ|` the exponential (ξ → 0) formulas are used.
const SHAPE_ZERO: f64 = 1e-8;
/// Largest f64 strictly below 1.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;

/// Output of [`remove_diurnal`].
#[derive(Debug, Clone, PartialEq)]
pub struct Deseasonalized {
    pub anomalies: Vec<f64>,
    pub hourly_means: [f64; 24],
}

/// Subtracts the all-data mean of each hour of the day.
pub fn remove_diurnal(series: &[(NaiveDateTime, f64)]) -> Result<Deseasonalized> {
    let mut sums = [0.0; 24];
    let mut counts = [0usize; 24];
    for (ts, v) in series {
        let h = ts.hour() as usize;
        sums[h] += v;
        counts[h] += 1;
    }
    if let Some(h) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InsufficientData(format!(
            "no observations at hour {h:02} of the day"
        )));
    }
    let mut hourly_means = [0.0; 24];
    for h in 0..24 {
        hourly_means[h] = sums[h] / counts[h] as f64;
    }
    let anomalies = series
        .iter()
        .map(|(ts, v)| v - hourly_means[ts.hour() as usize])
        .collect();
    Ok(Deseasonalized {
        anomalies,
        hourly_means,
    })
}

/// Adds the hourly means back.
pub fn restore_diurnal(times: &[NaiveDateTime], anomalies: &[f64], hourly_means: &[f64; 24]) -> Vec<f64> {
    times
        .iter()
        .zip(anomalies)
        .map(|(ts, a)| a + hourly_means[ts.hour() as usize])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GpdMethod {
    #[default]
    Mle,
    /// Probability-weighted moments, used when the likelihood search fails.
    Pwm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpdFit {
    pub scale: f64,
    pub shape: f64,
    pub method: GpdMethod,
}

fn gpd_nll(excesses: &[f64], scale: f64, shape: f64) -> f64 {
    if !(scale > 0.0) {
        return f64::INFINITY;
    }
    let n = excesses.len() as f64;
    if shape.abs() < SHAPE_ZERO {
        return n * scale.ln() + excesses.iter().sum::<f64>() / scale;
    }
    let mut acc = 0.0;
    for &y in excesses {
        let t = 1.0 + shape * y / scale;
        if t <= 0.0 {
            return f64::INFINITY;
        }
        acc += t.ln();
    }
    n * scale.ln() + (1.0 + 1.0 / shape) * acc
}

/// Probability-weighted-moment estimates (Hosking & Wallis).
pub fn gpd_pwm(excesses: &[f64]) -> Result<GpdFit> {
    let n = excesses.len();
    if n < 2 {
        return Err(Error::InsufficientData("need at least two excesses".into()));
    }
    let mut y = excesses.to_vec();
    y.sort_by(f64::total_cmp);
    let a0 = y.iter().sum::<f64>() / n as f64;
    let a1 = y
        .iter()
        .enumerate()
        .map(|(i, v)| (1.0 - (i as f64 + 0.65) / n as f64) * v)
        .sum::<f64>()
        / n as f64;
    let denom = a0 - 2.0 * a1;
    if !(denom > 0.0) || !(a0 > 0.0) {
        return Err(Error::Estimation("degenerate excesses for PWM".into()));
    }
    Ok(GpdFit {
        scale: 2.0 * a0 * a1 / denom,
        shape: 2.0 - a0 / denom,
        method: GpdMethod::Pwm,
    })
}

/// Maximum-likelihood GPD fit to nonnegative excesses, started from the PWM
/// estimates. Falls back to PWM if the simplex search does not converge.
pub fn fit_gpd(excesses: &[f64]) -> Result<(GpdFit, Option<String>)> {
    if excesses.iter().any(|y| !(*y >= 0.0) || !y.is_finite()) {
        return Err(Error::InvalidArgument("excesses must be finite and nonnegative".into()));
    }
    let pwm = gpd_pwm(excesses)?;
    let start_shape = pwm.shape.clamp(MIN_SHAPE + 0.05, 1.0);
    let max_y = excesses.iter().copied().fold(0.0, f64::max);
    // the support must cover the largest excess at the starting point
    let start_scale = if start_shape < 0.0 {
        pwm.scale.max(-start_shape * max_y * 1.01)
    } else {
        pwm.scale
    };
    let lower = [start_scale.ln() - 10.0, MIN_SHAPE + 1e-9];
    let upper = [start_scale.ln() + 10.0, 5.0];
    let objective = |p: &[f64]| gpd_nll(excesses, p[0].exp(), p[1]);
    let opts = NelderMeadOptions {
        initial_step: 0.1,
        max_iter: 4000,
        f_tol: 1e-10,
        x_tol: 1e-10,
    };
    let mut best = nelder_mead(objective, &[start_scale.ln(), start_shape], &lower, &upper, &opts);
    // restart once from the optimum to escape a collapsed simplex
    if best.converged {
        let again = nelder_mead(objective, &best.x, &lower, &upper, &opts);
        if again.f <= best.f {
            best = again;
        }
    }
    if best.converged && best.f.is_finite() {
        Ok((
            GpdFit {
                scale: best.x[0].exp(),
                shape: best.x[1],
                method: GpdMethod::Mle,
            },
            None,
        ))
    } else {
        let msg = "GPD likelihood search did not converge; using probability-weighted moments";
        log::warn!("{msg}");
        Ok((pwm, Some(msg.to_string())))
    }
}

/// Semi-parametric marginal distribution: empirical CDF with an `n + 1`
/// denominator up to the threshold `mu_hat`, GPD above it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hourly_means: Option<Vec<f64>>,
    /// The full sample, ascending.
    pub body: Vec<f64>,
    pub mu_hat: f64,
    pub gpd_scale: f64,
    pub gpd_shape: f64,
    pub tail_prob: f64,
    #[serde(default)]
    pub gpd_method: GpdMethod,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Fits the marginal model to an anomaly series.
pub fn fit_marginal(x: &[f64], tail_prob: f64) -> Result<MarginalModel> {
    if !(tail_prob > 0.0 && tail_prob < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail probability must lie in (0, 1), got {tail_prob}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series contains non-finite values".into()));
    }
    let mut body = x.to_vec();
    body.sort_by(f64::total_cmp);
    if body.is_empty() {
        return Err(Error::InsufficientData("empty series".into()));
    }
    let mu_hat = quantile_sorted(&body, 1.0 - tail_prob);
    let excesses: Vec<f64> = body.iter().filter(|&&v| v > mu_hat).map(|v| v - mu_hat).collect();
    if excesses.len() < MIN_EXCEEDANCES {
        return Err(Error::InsufficientData(format!(
            "{} exceedances above the threshold, need at least {MIN_EXCEEDANCES}",
            excesses.len()
        )));
    }
    let (gpd, warning) = fit_gpd(&excesses)?;
    let mut warnings: Vec<String> = warning.into_iter().collect();
    if gpd.shape < 0.0 {
        let endpoint = mu_hat - gpd.scale / gpd.shape;
        let max = body[body.len() - 1];
        if endpoint < max {
            let msg = format!("fitted upper endpoint {endpoint} is below the sample maximum {max}");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok(MarginalModel {
        hourly_means: None,
        body,
        mu_hat,
        gpd_scale: gpd.scale,
        gpd_shape: gpd.shape,
        tail_prob,
        gpd_method: gpd.method,
        warnings,
    })
}

impl MarginalModel {
    pub fn with_hourly_means(mut self, means: [f64; 24]) -> Self {
        self.hourly_means = Some(means.to_vec());
        self
    }

    pub fn n(&self) -> usize {
        self.body.len()
    }

    /// Survival of the GPD excess distribution relative to the threshold.
    fn gpd_survival(&self, excess: f64) -> f64 {
        let (s, xi) = (self.gpd_scale, self.gpd_shape);
        if xi.abs() < SHAPE_ZERO {
            (-excess / s).exp()
        } else {
            let t = 1.0 + xi * excess / s;
            if t <= 0.0 {
                0.0
            } else {
                t.powf(-1.0 / xi)
            }
        }
    }

    /// The estimated distribution function, valued in the open unit interval.
    pub fn cdf(&self, x: f64) -> f64 {
        let denom = (self.n() + 1) as f64;
        let p = if x <= self.mu_hat {
            let count = self.body.partition_point(|&v| v <= x);
            if count == 0 {
                0.5 / denom
            } else {
                count as f64 / denom
            }
        } else {
            1.0 - self.tail_prob * self.gpd_survival(x - self.mu_hat)
        };
        p.clamp(f64::MIN_POSITIVE, ONE_MINUS)
    }

    /// Inverse of [`cdf`](Self::cdf): linear interpolation through the order
    /// statistics at plotting positions `k/(n+1)` below the threshold (ending
    /// at `(1 − tail_prob, mu_hat)`), analytic GPD inversion above.
    pub fn quantile(&self, p: f64) -> f64 {
        let junction = 1.0 - self.tail_prob;
        if p > junction {
            let ratio = self.tail_prob / (1.0 - p);
            let (s, xi) = (self.gpd_scale, self.gpd_shape);
            return if xi.abs() < SHAPE_ZERO {
                self.mu_hat + s * ratio.ln()
            } else {
                self.mu_hat + s / xi * (ratio.powf(xi) - 1.0)
            };
        }
        let denom = (self.n() + 1) as f64;
        // knots k/(n+1) for order statistics strictly below the threshold
        let below = self.body.partition_point(|&v| v < self.mu_hat);
        let last = below.min(((junction * denom).ceil() as usize).saturating_sub(1));
        let knot = |k: usize| -> (f64, f64) {
            if k == last + 1 {
                (junction, self.mu_hat)
            } else {
                ((k as f64) / denom, self.body[k - 1])
            }
        };
        if last == 0 {
            return self.mu_hat;
        }
        if p <= 1.0 / denom {
            return self.body[0];
        }
        // first knot index with position ≥ p
        let mut k = ((p * denom).ceil() as usize).clamp(1, last + 1);
        while k > 1 && knot(k - 1).0 >= p {
            k -= 1;
        }
        while k <= last && knot(k).0 < p {
            k += 1;
        }
        let (p1, x1) = knot(k);
        if k == 1 {
            return x1;
        }
        let (p0, x0) = knot(k - 1);
        if p1 <= p0 {
            return x1;
        }
        x0 + (p - p0) / (p1 - p0) * (x1 - x0)
    }

    /// `G⁻¹(F̂(x))` with `G(z) = exp(−z⁻²)`.
    pub fn to_frechet(&self, x: f64) -> f64 {
        frechet_quantile(self.cdf(x))
    }

    /// `F̂⁻¹(G(z))` for `z > 0`.
    pub fn from_frechet(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::Domain(format!("Fréchet value must be positive, got {z}")));
        }
        Ok(self.quantile(frechet_cdf(z)))
    }

    /// Map to Fréchet(α = 2) tails in both directions (`P(Z > z) = P(Z < −z)
    /// = (1 − G(z))/2`).
    pub fn to_frechet_two_sided(&self, x: f64) -> f64 {
        two_sided_frechet_quantile(self.cdf(x))
    }

    pub fn from_frechet_two_sided(&self, z: f64) -> f64 {
        self.quantile(two_sided_frechet_cdf(z).clamp(f64::MIN_POSITIVE, ONE_MINUS))
    }

    pub fn to_frechet_series(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.to_frechet(v)).collect()
    }
}

/// Distribution function of a unit Fréchet(α = 2) magnitude with a fair sign.
pub fn two_sided_frechet_cdf(z: f64) -> f64 {
    if z > 0.0 {
        0.5 + 0.5 * frechet_cdf(z)
    } else if z < 0.0 {
        0.5 - 0.5 * frechet_cdf(-z)
    } else {
        0.5
    }
}

pub fn two_sided_frechet_quantile(p: f64) -> f64 {
    if p > 0.5 {
        frechet_quantile(2.0 * p - 1.0)
    } else if p < 0.5 {
        -frechet_quantile(1.0 - 2.0 * p)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ts(day: u32, hour: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2017, 12, day)
            .unwrap()
            .and_hms_opt(hour, 0, 0)
            .unwrap()
    }

    #[test]
    fn diurnal_constant_series() {
        let series: Vec<_> = (0..48).map(|i| (ts(1 + i / 24, i % 24), 4.2)).collect();
        let d = remove_diurnal(&series).unwrap();
        assert!(d.anomalies.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn diurnal_two_day_toy() {
        // day 1: h + 1, day 2: 3(h + 1) → hourly mean 2(h + 1)
        let series: Vec<_> = (0..48u32)
            .map(|i| {
                let h = i % 24;
                let v = if i < 24 { h as f64 + 1.0 } else { 3.0 * (h as f64 + 1.0) };
                (ts(1 + i / 24, h), v)
            })
            .collect();
        let d = remove_diurnal(&series).unwrap();
        for (i, a) in d.anomalies.iter().enumerate() {
            let h = (i % 24) as f64;
            let expected = if i < 24 { -(h + 1.0) } else { h + 1.0 };
            assert!((a - expected).abs() < 1e-12);
        }
        assert_eq!(d.hourly_means[5], 12.0);
        let times: Vec<_> = series.iter().map(|s| s.0).collect();
        let restored = restore_diurnal(&times, &d.anomalies, &d.hourly_means);
        for (r, s) in restored.iter().zip(&series) {
            assert!((r - s.1).abs() < 1e-12);
        }
    }

    #[test]
    fn diurnal_missing_hour() {
        let series: Vec<_> = (0..23).map(|h| (ts(1, h), 1.0)).collect();
        assert!(matches!(remove_diurnal(&series), Err(Error::InsufficientData(_))));
    }

    fn gpd_sample(rng: &mut ChaCha8Rng, n: usize, scale: f64, shape: f64) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                if shape == 0.0 {
                    -scale * (1.0 - u).ln()
                } else {
                    scale / shape * ((1.0 - u).powf(-shape) - 1.0)
                }
            })
            .collect()
    }

    #[test]
    fn gpd_exponential_shape_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = gpd_sample(&mut rng, 100_000, 1.0, 0.0);
        let (fit, warn) = fit_gpd(&y).unwrap();
        assert!(warn.is_none());
        assert_eq!(fit.method, GpdMethod::Mle);
        assert!(fit.shape.abs() < 0.02, "ξ̂ = {}", fit.shape);
    }

    #[test]
    fn gpd_exponential_rate_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = gpd_sample(&mut rng, 100_000, 0.5, 0.0);
        let (fit, _) = fit_gpd(&y).unwrap();
        assert!(fit.shape.abs() < 0.02);
        assert!((fit.scale - 0.5).abs() < 0.02);
    }

    #[test]
    fn gpd_bounded_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = gpd_sample(&mut rng, 50_000, 1.0, -0.1);
        let (fit, _) = fit_gpd(&y).unwrap();
        assert!((fit.shape + 0.1).abs() < 0.03);
        let pwm = gpd_pwm(&y).unwrap();
        assert!((pwm.shape + 0.1).abs() < 0.05);
    }

    fn model(mu: f64, scale: f64, shape: f64) -> MarginalModel {
        MarginalModel {
            hourly_means: None,
            body: (0..1000).map(|i| mu - 10.0 + i as f64 * 0.01).collect(),
            mu_hat: mu,
            gpd_scale: scale,
            gpd_shape: shape,
            tail_prob: 0.025,
            gpd_method: GpdMethod::Mle,
            warnings: vec![],
        }
    }

    #[test]
    fn cdf_tail_formula() {
        let m = model(0.0, 1.0, -0.1);
        let expected = 1.0 - 0.025 * 0.9f64.powi(10);
        assert!((m.cdf(1.0) - expected).abs() < 1e-14);
        assert!((m.cdf(1.0) - 0.99128).abs() < 1e-5);
        // beyond the endpoint μ − ψ/ξ = 10
        assert!(m.cdf(11.0) < 1.0);
    }

    #[test]
    fn cdf_floor_below_minimum() {
        let m = model(0.0, 1.0, 0.1);
        let v = m.cdf(-1e9);
        assert!(v > 0.0 && v <= 1.0 / 1001.0);
    }

    #[test]
    fn tail_round_trip() {
        for shape in [-0.2, 0.0, 0.3] {
            let m = model(2.0, 1.5, shape);
            for x in [2.01, 2.5, 3.0, 4.0, 5.5] {
                let back = m.from_frechet(m.to_frechet(x)).unwrap();
                assert!((back - x).abs() < 1e-9, "shape {shape}, x {x}: {back}");
            }
        }
    }

    #[test]
    fn frechet_point() {
        let m = model(0.0, 1.0, 0.0);
        let p = (-1.0f64).exp();
        assert!((frechet_quantile(p) - 1.0).abs() < 1e-15);
        let x = m.quantile(p);
        assert!((m.cdf(x) - p).abs() <= 1.0 / 1001.0);
        assert!(m.from_frechet(0.0).is_err());
    }

    #[test]
    fn quantile_is_monotone() {
        let m = model(0.0, 1.0, -0.1);
        let mut prev = f64::NEG_INFINITY;
        for i in 1..10_000 {
            let p = i as f64 / 10_000.0;
            let q = m.quantile(p);
            assert!(q >= prev, "p = {p}");
            prev = q;
        }
    }

    #[test]
    fn two_sided_maps_invert() {
        for p in [0.01, 0.3, 0.5, 0.77, 0.999] {
            let z = two_sided_frechet_quantile(p);
            assert!((two_sided_frechet_cdf(z) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_marginal_errors() {
        assert!(fit_marginal(&[1.0; 100], 0.025).is_err());
        assert!(fit_marginal(&[1.0, 2.0], 1.5).is_err());
    }
}
