//! Minimax rate formulas, Fano-type lower-bound calculators, Gaussian widths,
//! and the dispersion and packing constructions.

mod dispersion;
mod packing;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

pub use dispersion::{construct_dispersion, dispersion_constants, Certificate, DispersionOptions, DispersionResult};
pub use packing::{construct_packing, subset_family_gv, PackingBranch, PackingFamily};

use crate::error::{Error, Result};
use crate::gauges::{Exponent, Gauge, GaugeContext};
use crate::harness::mean_and_stderr;
use crate::matcore::{sample_ensemble, EnsembleSpec, Seed};

/// A rate `total = oracle + excess`, with the implied constant set to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub oracle: f64,
    pub excess: f64,
    pub total: f64,
    pub formula: String,
    /// Set when the formula is only known to be a lower bound for this gauge.
    #[serde(default)]
    pub lower_bound_only: bool,
}

impl RateBreakdown {
    fn single(total: f64, formula: String, lower_bound_only: bool) -> Self {
        Self { oracle: total, excess: 0.0, total, formula, lower_bound_only }
    }

    /// Multiplies every term by `c`.
    pub fn scaled(&self, c: f64, note: &str) -> Self {
        Self {
            oracle: self.oracle * c,
            excess: self.excess * c,
            total: self.total * c,
            formula: format!("{} * {note}", self.formula),
            lower_bound_only: self.lower_bound_only,
        }
    }
}

fn restricted(ctx: &GaugeContext, r: usize) -> Result<GaugeContext> {
    if r > ctx.dim() {
        return Err(Error::Dimension(format!("gauge on R^{} cannot measure rank {r}", ctx.dim())));
    }
    ctx.restrict(r)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {v}")))
    }
}

fn check_dims(k: usize, s: usize) -> Result<()> {
    if k == 0 || s == 0 {
        return Err(Error::Domain("dimensions must be positive".into()));
    }
    Ok(())
}

/// `σ² (k ∨ s) τ|_{k∧s}(1)²`.
pub fn rate_oracle_mean(ctx: &GaugeContext, k: usize, s: usize, sigma: f64) -> Result<RateBreakdown> {
    check_dims(k, s)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be nonnegative, got {sigma}")));
    }
    let ones = restricted(ctx, k.min(s))?.at_ones();
    let total = sigma * sigma * k.max(s) as f64 * ones * ones;
    Ok(RateBreakdown::single(total, format!("sigma^2 (k v s) tau|r(1)^2 with {}", ctx.gauge()), false))
}

/// `τ|_r(1)² (k ∨ s) + L²_{τ|r} (k log(ep/k) + s log(em/s))` with `r = k ∧ s`.
pub fn rate_submatrix(ctx: &GaugeContext, k: usize, s: usize, p: usize, m: usize) -> Result<RateBreakdown> {
    check_dims(k, s)?;
    if k > p || s > m {
        return Err(Error::Domain(format!("need k <= p and s <= m, got k={k}, p={p}, s={s}, m={m}")));
    }
    let tau = restricted(ctx, k.min(s))?;
    let ones = tau.at_ones();
    let lip = tau.lipschitz()?.value;
    let (kf, sf) = (k as f64, s as f64);
    let e = std::f64::consts::E;
    let oracle = ones * ones * kf.max(sf);
    let excess = lip * lip * (kf * (e * p as f64 / kf).ln() + sf * (e * m as f64 / sf).ln());
    Ok(RateBreakdown {
        oracle,
        excess,
        total: oracle + excess,
        formula: format!("tau|r(1)^2 (k v s) + L^2 (k log(ep/k) + s log(em/s)) with {}", ctx.gauge()),
        lower_bound_only: false,
    })
}

/// `(k/n ∧ 1) λ² τ(1)²` with `τ` on `ℝ^k`.
pub fn rate_covariance(ctx: &GaugeContext, k: usize, n: usize, lambda: f64) -> Result<RateBreakdown> {
    check_dims(k, n)?;
    positive("lambda", lambda)?;
    let ones = restricted(ctx, k)?.at_ones();
    let total = (k as f64 / n as f64).min(1.0) * lambda * lambda * ones * ones;
    Ok(RateBreakdown::single(total, format!("(k/n ^ 1) lambda^2 tau(1)^2 with {}", ctx.gauge()), false))
}

/// `(k ∨ s) τ|_{k∧s}(1)² (λ ∧ λ²)`; tight only for Schatten exponents in `[1, 2]`.
pub fn rate_poisson(ctx: &GaugeContext, k: usize, s: usize, lambda: f64) -> Result<RateBreakdown> {
    check_dims(k, s)?;
    positive("lambda", lambda)?;
    let ones = restricted(ctx, k.min(s))?.at_ones();
    let total = k.max(s) as f64 * ones * ones * lambda.min(lambda * lambda);
    let tight = matches!(ctx.gauge(), Gauge::Schatten(Exponent::Finite(q)) if (1.0..=2.0).contains(q));
    Ok(RateBreakdown::single(total, format!("(k v s) tau|r(1)^2 (lambda ^ lambda^2) with {}", ctx.gauge()), !tight))
}

/// `(σ ∧ a)² (ks/n) (k ∨ s) τ|_r(1)²`, a lower bound.
pub fn rate_completion(ctx: &GaugeContext, k: usize, s: usize, r: usize, n: usize, sigma: f64, a: f64) -> Result<RateBreakdown> {
    check_dims(k, s)?;
    if r == 0 || r > k.min(s) {
        return Err(Error::Domain(format!("rank {r} must lie in [1, {}]", k.min(s))));
    }
    if n == 0 || n > k * s {
        return Err(Error::Domain(format!("n = {n} must lie in [1, {}]", k * s)));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be nonnegative, got {sigma}")));
    }
    positive("a", a)?;
    let ones = restricted(ctx, r)?.at_ones();
    let floor = sigma.min(a);
    let total = floor * floor * (k * s) as f64 / n as f64 * k.max(s) as f64 * ones * ones;
    Ok(RateBreakdown::single(total, format!("(sigma ^ a)^2 (ks/n) (k v s) tau|r(1)^2 with {}", ctx.gauge()), true))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanoInputs {
    pub epsilon: f64,
    /// KL diameter in nats.
    pub dkl_diameter: f64,
    /// Log packing number in nats.
    pub log_packing: f64,
}

impl FanoInputs {
    fn validate(&self) -> Result<()> {
        positive("epsilon", self.epsilon)?;
        if !(self.dkl_diameter >= 0.0 && self.dkl_diameter.is_finite()) {
            return Err(Error::Domain(format!("KL diameter must be finite and nonnegative, got {}", self.dkl_diameter)));
        }
        positive("log packing number", self.log_packing)
    }
}

/// `1 − (d_KL + log 2) / log 𝓜`, clamped to `[0, 1]`.
pub fn fano_probability(inputs: &FanoInputs) -> Result<f64> {
    inputs.validate()?;
    let v = 1.0 - (inputs.dkl_diameter + std::f64::consts::LN_2) / inputs.log_packing;
    Ok(v.clamp(0.0, 1.0))
}

/// `(ε²/4) max(0, 1 − (d_KL + log 2)/log 𝓜)`.
pub fn fano_bound(inputs: &FanoInputs) -> Result<f64> {
    Ok(inputs.epsilon * inputs.epsilon / 4.0 * fano_probability(inputs)?)
}

/// `c_d = sup_{0<b<1} sup_{a>0} (ab/4)(1 − (da + 2 log 2)/(d log(1/b)))`.
///
/// With `L = log(1/b)` and `c = 2 log 2 / d` the inner sup is attained at
/// `a = (L − c)/2` and equals `e^{−L}(L − c)²/(16L)`, which is log-concave in
/// `L`; the outer sup is found by golden-section search.
pub fn fano_constant(d: u64) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("d must be positive".into()));
    }
    let c = 2.0 * std::f64::consts::LN_2 / d as f64;
    let log_value = |l: f64| -l + 2.0 * (l - c).ln() - l.ln();
    let (mut lo, mut hi) = (c, c + 64.0);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (log_value(x1), log_value(x2));
    while hi - lo > 1e-12 * hi {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = log_value(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = log_value(x1);
        }
    }
    Ok(log_value(0.5 * (lo + hi)).exp() / 16.0)
}

/// Monte Carlo `E‖Z‖_{τ*}` for a `k x s` standard Gaussian `Z`: the
/// Gaussian width of the unit ball of `‖·‖_τ`. Returns `(mean, stderr)`.
pub fn gaussian_width_mc(ctx: &GaugeContext, k: usize, s: usize, reps: usize, seed: Seed) -> Result<(f64, f64)> {
    check_dims(k, s)?;
    if reps < 2 {
        return Err(Error::Domain("need at least two replicates".into()));
    }
    let dual = restricted(ctx, k.min(s))?.dual();
    let spec = EnsembleSpec::GaussianIid { rows: k, cols: s, sigma: 1.0 };
    let values = (0..reps as u64)
        .map(|i| dual.norm(&sample_ensemble(&spec, seed.with_stream(i))?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_and_stderr(&values))
}

/// `d log(δ√d / (ε w))`, the log of the volume-ratio lower bound.
pub fn volume_ratio_log(delta: f64, eps: f64, d: u64, width: f64) -> Result<f64> {
    positive("delta", delta)?;
    positive("epsilon", eps)?;
    positive("width", width)?;
    if d == 0 {
        return Err(Error::Domain("d must be positive".into()));
    }
    let d = d as f64;
    Ok(d * (delta * d.sqrt() / (eps * width)).ln())
}

/// `log vol(B₂^d) = d log √π − log Γ(d/2 + 1)`.
pub fn log_unit_ball_volume(d: u64) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("d must be positive".into()));
    }
    let d = d as f64;
    Ok(d * std::f64::consts::PI.sqrt().ln() - ln_gamma(d / 2.0 + 1.0))
}
