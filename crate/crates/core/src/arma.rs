//! Transformed-linear ARMA(p, q) specifications, their causal (ψ) and
//! invertible (π) representations, and the model TPDFs.
//!
//! A causal model is `X_t = ⊕_j ψ_j ∘ Z_{t-j}` with unit Fréchet(α = 2)
//! noise. Only positive coefficients carry tail mass, so the TPDF is
//! `σ(h) = Σ_j ψ⁽⁰⁾_j ψ⁽⁰⁾_{j+h}` with `a⁽⁰⁾ = max(a, 0)`; the inner product
//! of the model space uses the raw coefficients instead.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::angular::min_eigenvalue;
use crate::{Error, Result};

/// Roots closer than this to the unit circle have no stationary solution.
pub const UNIT_CIRCLE_TOLERANCE: f64 = 1e-10;
/// AR and MA roots closer than this count as a common factor.
pub const COMMON_ROOT_TOLERANCE: f64 = 1e-8;
/// Target for the neglected tail `Σ_{j ≥ n} |ψ_j|` of adaptive truncations.
pub const TRUNCATION_TAIL: f64 = 1e-12;
pub const MAX_TRUNCATION: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawArmaSpec")]
pub struct ArmaSpec {
    ar: Vec<f64>,
    ma: Vec<f64>,
}

#[derive(Deserialize)]
struct RawArmaSpec {
    #[serde(default)]
    ar: Vec<f64>,
    #[serde(default)]
    ma: Vec<f64>,
}

impl TryFrom<RawArmaSpec> for ArmaSpec {
    type Error = Error;

    fn try_from(raw: RawArmaSpec) -> Result<Self> {
        ArmaSpec::new(raw.ar, raw.ma)
    }
}

impl ArmaSpec {
    /// `ar = (φ₁, …, φ_p)`, `ma = (θ₁, …, θ_q)`. Rejects non-finite
    /// coefficients and AR/MA polynomials sharing a root.
    pub fn new(ar: Vec<f64>, ma: Vec<f64>) -> Result<Self> {
        if ar.iter().chain(&ma).any(|c| !c.is_finite()) {
            return Err(Error::InvalidSpec("coefficients must be finite".into()));
        }
        let spec = Self { ar, ma };
        let ar_roots = poly_roots(&spec.ar_poly());
        let ma_roots = poly_roots(&spec.ma_poly());
        for za in &ar_roots {
            if ma_roots.iter().any(|zm| (za - zm).norm() < COMMON_ROOT_TOLERANCE) {
                return Err(Error::InvalidSpec(format!(
                    "AR and MA polynomials share the root {za}"
                )));
            }
        }
        if let Some(w) = spec.identifiability_warning() {
            log::warn!("{w}");
        }
        Ok(spec)
    }

    pub fn noise() -> Self {
        Self { ar: vec![], ma: vec![] }
    }

    pub fn ar1(phi: f64) -> Result<Self> {
        Self::new(vec![phi], vec![])
    }

    pub fn ma1(theta: f64) -> Result<Self> {
        Self::new(vec![], vec![theta])
    }

    pub fn arma11(phi: f64, theta: f64) -> Result<Self> {
        Self::new(vec![phi], vec![theta])
    }

    pub fn ar(&self) -> &[f64] {
        &self.ar
    }

    pub fn ma(&self) -> &[f64] {
        &self.ma
    }

    pub fn p(&self) -> usize {
        self.ar.len()
    }

    pub fn q(&self) -> usize {
        self.ma.len()
    }

    /// A pure MA(q) with `θ_q ≤ 0` has the TPDF of a lower-order model.
    pub fn identifiability_warning(&self) -> Option<String> {
        match self.ma.last() {
            Some(&last) if self.ar.is_empty() && last <= 0.0 => Some(format!(
                "MA({}) with θ_q = {last} ≤ 0 is not identifiable from its TPDF",
                self.q()
            )),
            _ => None,
        }
    }

    /// Coefficients of `1 − φ₁z − … − φ_p z^p` after the constant term.
    fn ar_poly(&self) -> Vec<f64> {
        self.ar.iter().map(|c| -c).collect()
    }

    /// Coefficients of `1 + θ₁z + … + θ_q z^q` after the constant term.
    fn ma_poly(&self) -> Vec<f64> {
        self.ma.clone()
    }

    pub fn ar_roots(&self) -> Vec<Complex<f64>> {
        poly_roots(&self.ar_poly())
    }

    pub fn ma_roots(&self) -> Vec<Complex<f64>> {
        poly_roots(&self.ma_poly())
    }
}

/// Finite roots of `1 + c₁z + … + c_d z^d` from the eigenvalues of the
/// companion matrix of the reciprocal polynomial.
fn poly_roots(c: &[f64]) -> Vec<Complex<f64>> {
    let mut d = c.len();
    while d > 0 && c[d - 1] == 0.0 {
        d -= 1;
    }
    if d == 0 {
        return Vec::new();
    }
    let mut m = DMatrix::zeros(d, d);
    for k in 0..d {
        m[(0, k)] = -c[k];
    }
    for k in 1..d {
        m[(k, k - 1)] = 1.0;
    }
    m.complex_eigenvalues()
        .iter()
        .filter(|l| l.norm() > 0.0)
        .map(|l| Complex::new(1.0, 0.0) / l)
        .collect()
}

fn all_outside_unit_circle(roots: &[Complex<f64>], what: &str) -> Result<bool> {
    let mut outside = true;
    for z in roots {
        let modulus = z.norm();
        if (modulus - 1.0).abs() <= UNIT_CIRCLE_TOLERANCE {
            return Err(Error::UnitRoot(format!(
                "{what} polynomial has a root of modulus {modulus} on the unit circle"
            )));
        }
        outside &= modulus > 1.0;
    }
    Ok(outside)
}

/// All AR roots lie strictly outside the unit circle.
pub fn is_causal(spec: &ArmaSpec) -> Result<bool> {
    all_outside_unit_circle(&spec.ar_roots(), "AR")
}

/// All MA roots lie strictly outside the unit circle.
pub fn is_invertible(spec: &ArmaSpec) -> Result<bool> {
    all_outside_unit_circle(&spec.ma_roots(), "MA")
}

fn require_causal(spec: &ArmaSpec) -> Result<()> {
    if is_causal(spec)? {
        Ok(())
    } else {
        Err(Error::NotCausal(format!(
            "AR coefficients {:?} have a root inside the unit circle",
            spec.ar
        )))
    }
}

/// Reciprocal of the smallest AR root modulus: `|ψ_j|` decays like this to
/// the power `j` (up to polynomial factors for repeated roots). Zero for
/// pure MA models.
pub fn decay_rate(spec: &ArmaSpec) -> f64 {
    spec.ar_roots()
        .iter()
        .map(|z| 1.0 / z.norm())
        .fold(0.0, f64::max)
}

/// ψ-weights of a causal model, `ψ₀ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSequence {
    psi: Vec<f64>,
    /// Set when `ψ_j = 0` exactly beyond this length (pure MA models and
    /// user-supplied finite filters).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exact_length: Option<usize>,
    /// Certified bound on `Σ_{j ≥ len} |ψ_j|` for truncated infinite filters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail_bound: Option<f64>,
}

impl CoefficientSequence {
    /// A finite filter given explicitly; must start with `ψ₀ = 1`.
    pub fn new(psi: Vec<f64>) -> Result<Self> {
        if psi.first() != Some(&1.0) {
            return Err(Error::InvalidSpec("coefficient sequence must start with ψ₀ = 1".into()));
        }
        if psi.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidSpec("coefficients must be finite".into()));
        }
        let len = psi.len();
        Ok(Self {
            psi,
            exact_length: Some(len),
            tail_bound: Some(0.0),
        })
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn exact_length(&self) -> Option<usize> {
        self.exact_length
    }

    pub fn tail_bound(&self) -> Option<f64> {
        self.tail_bound
    }

    /// Whether the neglected tail is known to be below [`TRUNCATION_TAIL`].
    pub fn is_certified(&self) -> bool {
        self.exact_length.is_some() || self.tail_bound.is_some_and(|b| b < TRUNCATION_TAIL)
    }

    /// Largest lag whose coefficient is nonzero in the stored prefix.
    pub fn max_lag(&self) -> usize {
        self.psi.len().saturating_sub(1)
    }
}

fn psi_recursion(spec: &ArmaSpec, n: usize) -> Vec<f64> {
    let mut psi = vec![0.0; n];
    for j in 0..n {
        let theta_j = match j {
            0 => 1.0,
            _ => spec.ma.get(j - 1).copied().unwrap_or(0.0),
        };
        let ar_part: f64 = spec
            .ar
            .iter()
            .enumerate()
            .filter(|(k, _)| *k < j)
            .map(|(k, phi)| phi * psi[j - k - 1])
            .sum();
        psi[j] = theta_j + ar_part;
    }
    psi
}

/// First `n` ψ-weights from `ψ_j − Σ_k φ_k ψ_{j−k} = θ_j`.
pub fn psi_weights(spec: &ArmaSpec, n: usize) -> Result<CoefficientSequence> {
    require_causal(spec)?;
    let min_len = spec.p().max(spec.q() + 1);
    if n < min_len {
        return Err(Error::InvalidArgument(format!(
            "need at least {min_len} ψ-weights, got {n}"
        )));
    }
    let psi = psi_recursion(spec, n);
    if spec.p() == 0 {
        return Ok(CoefficientSequence {
            psi,
            exact_length: Some(spec.q() + 1),
            tail_bound: Some(0.0),
        });
    }
    let tail_bound = geometric_tail_bound(spec, &psi);
    Ok(CoefficientSequence {
        psi,
        exact_length: None,
        tail_bound,
    })
}

/// Envelope `|ψ_j| ≤ C r^j` fitted on the computed prefix, with `r` between
/// the decay rate and 1. Returns `(C, r)`.
fn envelope(spec: &ArmaSpec, psi: &[f64]) -> (f64, f64) {
    let rho = decay_rate(spec);
    let r = rho + 0.1 * (1.0 - rho);
    let c = psi
        .iter()
        .enumerate()
        .map(|(j, v)| v.abs() / r.powi(j as i32))
        .fold(0.0, f64::max);
    (c, r)
}

fn geometric_tail_bound(spec: &ArmaSpec, psi: &[f64]) -> Option<f64> {
    let (c, r) = envelope(spec, psi);
    (r < 1.0).then(|| c * r.powi(psi.len() as i32) / (1.0 - r))
}

/// ψ-weights truncated where the geometric tail bound drops below
/// [`TRUNCATION_TAIL`], capped at [`MAX_TRUNCATION`] terms. Pure MA models
/// are returned exactly.
pub fn psi_weights_adaptive(spec: &ArmaSpec) -> Result<CoefficientSequence> {
    require_causal(spec)?;
    let min_len = spec.p().max(spec.q() + 1);
    if spec.p() == 0 {
        return psi_weights(spec, min_len);
    }
    let mut n = 64.max(min_len);
    loop {
        let psi = psi_recursion(spec, n);
        let (c, r) = envelope(spec, &psi);
        let target = TRUNCATION_TAIL * (1.0 - r);
        let needed = if c <= target {
            min_len
        } else {
            ((target / c).ln() / r.ln()).ceil() as usize
        };
        if needed <= n || n >= MAX_TRUNCATION {
            let len = needed.clamp(min_len, n);
            let mut psi = psi;
            psi.truncate(len);
            let tail_bound = Some(c * r.powi(len as i32) / (1.0 - r));
            if n >= MAX_TRUNCATION && needed > n {
                log::warn!(
                    "ψ-weights truncated at {MAX_TRUNCATION} terms with tail bound {:?}",
                    tail_bound
                );
            }
            return Ok(CoefficientSequence {
                psi,
                exact_length: None,
                tail_bound,
            });
        }
        n = (n * 2).min(MAX_TRUNCATION).max(needed.min(MAX_TRUNCATION));
    }
}

/// First `n` π-weights from `π_j + Σ_k θ_k π_{j−k} = −φ_j` with `φ₀ = −1`.
pub fn pi_weights(spec: &ArmaSpec, n: usize) -> Result<Vec<f64>> {
    if !is_invertible(spec)? {
        return Err(Error::NotInvertible(format!(
            "MA coefficients {:?} have a root inside the unit circle",
            spec.ma
        )));
    }
    let mut pi = vec![0.0; n];
    for j in 0..n {
        let phi_j = match j {
            0 => -1.0,
            _ => spec.ar.get(j - 1).copied().unwrap_or(0.0),
        };
        let ma_part: f64 = spec
            .ma
            .iter()
            .enumerate()
            .filter(|(k, _)| *k < j)
            .map(|(k, theta)| theta * pi[j - k - 1])
            .sum();
        pi[j] = -phi_j - ma_part;
    }
    Ok(pi)
}

/// TPDF values `σ(0), …, σ(H)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tpdf {
    pub sigma: Vec<f64>,
}

impl Tpdf {
    pub fn max_lag(&self) -> usize {
        self.sigma.len().saturating_sub(1)
    }

    /// The tail ratio `σ(0)`.
    pub fn tail_ratio(&self) -> f64 {
        self.sigma[0]
    }

    /// Rescaled to tail ratio 1.
    pub fn normalized(&self) -> Tpdf {
        let s0 = self.sigma[0];
        Tpdf {
            sigma: self.sigma.iter().map(|s| s / s0).collect(),
        }
    }

    /// The Toeplitz matrix `{σ(|i − j|)}` of size `(H + 1) × (H + 1)`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.sigma.len();
        DMatrix::from_fn(n, n, |i, j| self.sigma[i.abs_diff(j)])
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix())
    }
}

/// `σ(h) = Σ_j max(ψ_j, 0) max(ψ_{j+h}, 0)` for `h = 0..=max_lag`.
pub fn tpdf_numeric(psi: &CoefficientSequence, max_lag: usize) -> Tpdf {
    let pos: Vec<f64> = psi.psi.iter().map(|v| v.max(0.0)).collect();
    let sigma = (0..=max_lag)
        .map(|h| {
            pos.iter()
                .zip(pos.iter().skip(h))
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    Tpdf { sigma }
}

/// Tail ratio `Σ max(ψ_j, 0)²`.
pub fn tail_ratio(psi: &CoefficientSequence) -> f64 {
    psi.psi.iter().map(|v| v.max(0.0).powi(2)).sum()
}

/// `⟨X_t, X_s⟩ = Σ_j ψ_{t,j} ψ_{s,j}` over the common prefix.
pub fn inner_product(a: &CoefficientSequence, b: &CoefficientSequence) -> f64 {
    a.psi.iter().zip(&b.psi).map(|(x, y)| x * y).sum()
}

/// `γ(h) = Σ_j ψ_j ψ_{j+h}`.
pub fn gamma(psi: &CoefficientSequence, h: usize) -> f64 {
    psi.psi.iter().zip(psi.psi.iter().skip(h)).map(|(a, b)| a * b).sum()
}

/// MA(1) TPDF at lag `h` with tail ratio 1.
pub fn ma1_tpdf(theta: f64, h: usize) -> f64 {
    match h {
        0 => 1.0,
        1 if theta > 0.0 => theta / (1.0 + theta * theta),
        _ => 0.0,
    }
}

/// AR(1) TPDF at lag `h` with tail ratio 1: `max(0, φ^h)`.
pub fn ar1_tpdf(phi: f64, h: usize) -> f64 {
    phi.powi(h as i32).max(0.0)
}

/// ARMA(1,1) TPDF at lag `h` with tail ratio 1, covering the four sign
/// quadrants of `(φ, φ + θ)`. With `ψ_j = (φ + θ)φ^{j−1}` the positive
/// coefficients are all, none, the odd, or the even lags. `φ + θ = 0` is the
/// white-noise limit (zero for `h > 0`).
pub fn arma11_tpdf(phi: f64, theta: f64, h: usize) -> f64 {
    if h == 0 {
        return 1.0;
    }
    let s = phi + theta;
    if s == 0.0 {
        return 0.0;
    }
    let hm1 = (h - 1) as i32;
    let even = h.is_multiple_of(2);
    if phi >= 0.0 {
        if s > 0.0 {
            s * phi.powi(hm1) * (1.0 + phi * theta) / (1.0 + 2.0 * phi * theta + theta * theta)
        } else {
            0.0
        }
    } else {
        let phi4 = phi.powi(4);
        if s > 0.0 {
            let denom = 1.0 - phi4 + s * s;
            if even {
                s * s * phi.powi(h as i32) / denom
            } else {
                s * phi.powi(hm1) * (1.0 - phi4) / denom
            }
        } else if even {
            s * phi.powi(hm1) * (1.0 + theta * phi.powi(3))
                / (1.0 + phi * phi * theta * theta + 2.0 * phi.powi(3) * theta)
        } else {
            0.0
        }
    }
}

/// Classical ARMA(1,1) autocorrelation `ρ(h)`; equals the transformed
/// TPDF when every ψ-weight is nonnegative.
pub fn arma11_acf(phi: f64, theta: f64, h: usize) -> f64 {
    if h == 0 {
        return 1.0;
    }
    (phi + theta) * (1.0 + phi * theta) * phi.powi(h as i32 - 1)
        / (1.0 + 2.0 * phi * theta + theta * theta)
}

/// Closed-form TPDF (tail ratio 1) for MA(1), AR(1) and ARMA(1,1) specs.
pub fn tpdf_closed(spec: &ArmaSpec, max_lag: usize) -> Result<Tpdf> {
    let lag_fn: Box<dyn Fn(usize) -> f64> = match (spec.ar.as_slice(), spec.ma.as_slice()) {
        ([], [theta]) => {
            let theta = *theta;
            Box::new(move |h| ma1_tpdf(theta, h))
        }
        ([phi], []) => {
            require_causal(spec)?;
            let phi = *phi;
            Box::new(move |h| ar1_tpdf(phi, h))
        }
        ([phi], [theta]) => {
            require_causal(spec)?;
            if phi + theta == 0.0 {
                return Err(Error::InvalidSpec("ARMA(1,1) requires φ + θ ≠ 0".into()));
            }
            let (phi, theta) = (*phi, *theta);
            Box::new(move |h| arma11_tpdf(phi, theta, h))
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "closed-form TPDF only for MA(1), AR(1), ARMA(1,1); got ARMA({}, {})",
                spec.p(),
                spec.q()
            )))
        }
    };
    Ok(Tpdf {
        sigma: (0..=max_lag).map(lag_fn).collect(),
    })
}
