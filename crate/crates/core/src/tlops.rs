//! Transformed-linear operations on the positive half line and the unit
//! Fréchet(α = 2) noise generator.
//!
//! The transform is softplus, `f(y) = log(1 + e^y)`, a bijection from ℝ onto
//! (0, ∞). Addition and scalar multiplication act on preimages:
//! `x1 ⊕ x2 = f(f⁻¹(x1) + f⁻¹(x2))` and `a ∘ x = f(a f⁻¹(x))`. Both reduce
//! to ordinary arithmetic for large arguments, which is what makes the
//! operations preserve regular variation.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Tail index of every model in this crate.
pub const TAIL_INDEX: f64 = 2.0;

/// Above this argument `f⁻¹(x) = x + log1p(-e^{-x})` loses nothing.
const INV_SOFTPLUS_LARGE: f64 = 30.0;

/// `log(1 + e^y)`, evaluated without overflow for any finite `y`.
///
/// Underflows to `0.0` only below `y ≈ -745`.
pub fn softplus(y: f64) -> f64 {
    if y > 0.0 {
        y + (-y).exp().ln_1p()
    } else {
        y.exp().ln_1p()
    }
}

/// `log(e^x - 1)`, the inverse of [`softplus`].
pub fn inv_softplus(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "transformed-linear preimage undefined at {x}"
        )));
    }
    if x > INV_SOFTPLUS_LARGE {
        Ok(x + (-(-x).exp()).ln_1p())
    } else {
        Ok(x.exp_m1().ln())
    }
}

/// Transformed-linear sum `x1 ⊕ x2`.
pub fn t_add(x1: f64, x2: f64) -> Result<f64> {
    Ok(softplus(inv_softplus(x1)? + inv_softplus(x2)?))
}

/// Transformed-linear scalar multiple `a ∘ x`. Negative `a` maps large `x`
/// toward zero.
pub fn t_scale(a: f64, x: f64) -> Result<f64> {
    if a == 1.0 {
        inv_softplus(x)?;
        return Ok(x);
    }
    Ok(softplus(a * inv_softplus(x)?))
}

/// Unit Fréchet(α = 2) distribution function `G(x) = exp(-x^{-2})`.
pub fn frechet_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-(x * x).recip()).exp()
    }
}

/// Quantile function of `G`: `(-log u)^{-1/2}`.
pub fn frechet_quantile(u: f64) -> f64 {
    (-u.ln()).powf(-0.5)
}

/// Noise configuration. The tail index is fixed at 2 and the scale is chosen
/// so that `x² P(Z > x) → 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    alpha: f64,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(alpha: f64, seed: u64) -> Result<Self> {
        if alpha != TAIL_INDEX {
            return Err(Error::InvalidArgument(format!(
                "noise tail index must be 2, got {alpha}"
            )));
        }
        Ok(Self { alpha, seed })
    }

    /// Unit Fréchet(α = 2) noise with the given seed.
    pub fn frechet(seed: u64) -> Self {
        Self {
            alpha: TAIL_INDEX,
            seed,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Draws `n` iid unit Fréchet(α = 2) variates by inversion.
pub fn sample_noise(spec: NoiseSpec, n: usize) -> Vec<f64> {
    let mut rng = spec.rng();
    sample_frechet(&mut rng, n)
}

pub(crate) fn sample_frechet<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| frechet_quantile(rng.sample::<f64, _>(Open01)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_values() {
        assert_eq!(softplus(0.0), std::f64::consts::LN_2);
        // 50 + e^{-50}; the correction is below f64 resolution at 50.
        assert!((softplus(50.0) - 50.0).abs() / 50.0 < 1e-15);
        let tiny = softplus(-50.0);
        assert!((tiny - (-50f64).exp()).abs() / tiny < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-700.0) > 0.0);
    }

    #[test]
    fn inv_softplus_values() {
        assert!(inv_softplus(std::f64::consts::LN_2).unwrap().abs() < 1e-16);
        assert!((inv_softplus(100.0).unwrap() - 100.0).abs() < 1e-13);
        // log(e^{1e-8} - 1) = log(1e-8) + 5e-9 to first order
        let v = inv_softplus(1e-8).unwrap();
        assert!((v - (1e-8f64.ln() + 5e-9)).abs() < 1e-12);
        assert!(matches!(inv_softplus(0.0), Err(Error::Domain(_))));
        assert!(inv_softplus(-1.0).is_err());
        assert!(inv_softplus(f64::NAN).is_err());
    }

    #[test]
    fn round_trip_over_range() {
        let mut x = 1e-6;
        while x <= 1e6 {
            let back = softplus(inv_softplus(x).unwrap());
            assert!((back - x).abs() / x < 1e-12, "x = {x}");
            x *= 1.37;
        }
    }

    #[test]
    fn t_add_values() {
        let l2 = std::f64::consts::LN_2;
        assert!((t_add(l2, l2).unwrap() - l2).abs() < 1e-15);
        assert!((t_add(100.0, 200.0).unwrap() - 300.0).abs() < 1e-10);
        // softplus(2 log(e - 1)) = log(1 + (e - 1)^2)
        let e = std::f64::consts::E;
        let expected = (1.0 + (e - 1.0) * (e - 1.0)).ln();
        assert!((t_add(1.0, 1.0).unwrap() - expected).abs() < 1e-14);
        assert!((t_add(1.0, 1.0).unwrap() - 1.374_346).abs() < 1e-6);
        assert!(t_add(0.0, 1.0).is_err());
    }

    #[test]
    fn t_scale_values() {
        assert_eq!(t_scale(1.0, 3.7).unwrap(), 3.7);
        assert!((t_scale(0.0, 12.5).unwrap() - std::f64::consts::LN_2).abs() < 1e-16);
        assert!((t_scale(2.0, 100.0).unwrap() - 200.0).abs() < 1e-10);
        assert!(t_scale(-1.0, 100.0).unwrap() < 1e-40);
    }

    #[test]
    fn noise_spec_rejects_other_alpha() {
        assert!(NoiseSpec::new(1.5, 0).is_err());
        assert_eq!(NoiseSpec::new(2.0, 7).unwrap(), NoiseSpec::frechet(7));
    }

    #[test]
    fn frechet_quantile_points() {
        assert!((frechet_quantile((-1.0f64).exp()) - 1.0).abs() < 1e-15);
        assert!((frechet_quantile((-0.01f64).exp()) - 10.0).abs() < 1e-12);
        assert!((frechet_cdf(frechet_quantile(0.3)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn noise_is_deterministic() {
        let a = sample_noise(NoiseSpec::frechet(42), 100);
        let b = sample_noise(NoiseSpec::frechet(42), 100);
        assert_eq!(a, b);
        assert_ne!(a, sample_noise(NoiseSpec::frechet(43), 100));
        assert!(a.iter().all(|&z| z > 0.0 && z.is_finite()));
    }
}
