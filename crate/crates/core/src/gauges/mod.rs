//! Symmetric gauge functions and the unitarily invariant norms they induce.
//!
//! A symmetric gauge `τ` on `ℝ^d` is a norm invariant under coordinate
//! permutations and sign changes. Every unitarily invariant matrix norm has
//! the form `‖A‖ = τ(σ(A))`. Gauges here act on sorted absolute values, so
//! ties and zeros in the singular values need no special handling.

pub mod numeric;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matcore::{svd_values, Matrix};
use numeric::{maximize_on_sphere, SearchOptions};

/// Schatten exponent `q ∈ [1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_infinite() && q > 0.0 {
            return Ok(Self::Infinity);
        }
        if !(q >= 1.0) {
            return Err(Error::Parse(format!("Schatten exponent must be >= 1, got {q}")));
        }
        Ok(Self::Finite(q))
    }

    /// `1/q`, zero for `q = ∞`.
    pub fn reciprocal(self) -> f64 {
        match self {
            Self::Finite(q) => 1.0 / q,
            Self::Infinity => 0.0,
        }
    }

    /// Hölder conjugate `q*` with `1/q + 1/q* = 1`.
    pub fn conjugate(self) -> Self {
        match self {
            Self::Infinity => Self::Finite(1.0),
            Self::Finite(q) if q == 1.0 => Self::Infinity,
            Self::Finite(q) => Self::Finite(q / (q - 1.0)),
        }
    }
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A user-supplied gauge, called on absolute values sorted in descending order.
#[derive(Clone)]
pub struct CustomGauge {
    name: String,
    eval: Arc<EvalFn>,
    estimated: bool,
}

impl CustomGauge {
    pub fn new(name: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            estimated: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// True when evaluations come from a numerical optimizer.
    pub fn is_estimated(&self) -> bool {
        self.estimated
    }
}

impl fmt::Debug for CustomGauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomGauge")
            .field("name", &self.name)
            .field("estimated", &self.estimated)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum Gauge {
    Schatten(Exponent),
    KyFan(usize),
    Custom(CustomGauge),
}

impl Gauge {
    pub fn schatten(q: f64) -> Result<Self> {
        Ok(Self::Schatten(Exponent::new(q)?))
    }

    pub fn spectral() -> Self {
        Self::Schatten(Exponent::Infinity)
    }

    pub fn nuclear() -> Self {
        Self::Schatten(Exponent::Finite(1.0))
    }

    pub fn frobenius() -> Self {
        Self::Schatten(Exponent::Finite(2.0))
    }
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Schatten(Exponent::Infinity) => write!(f, "Sinf"),
            Self::Schatten(Exponent::Finite(q)) => write!(f, "S{q}"),
            Self::KyFan(l) => write!(f, "KF{l}"),
            Self::Custom(c) => write!(f, "{}", c.name),
        }
    }
}

/// Parses `S1`, `S2`, `S1.5`, `Sinf` and `KF<ell>`.
impl FromStr for Gauge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::Parse(format!("unrecognized gauge {s:?}"));
        if let Some(rest) = t.strip_prefix("KF").or_else(|| t.strip_prefix("kf")) {
            let l: usize = rest.parse().map_err(|_| bad())?;
            if l == 0 {
                return Err(Error::Parse("Ky Fan order must be positive".into()));
            }
            return Ok(Self::KyFan(l));
        }
        if let Some(rest) = t.strip_prefix('S').or_else(|| t.strip_prefix('s')) {
            if rest.eq_ignore_ascii_case("inf") {
                return Ok(Self::Schatten(Exponent::Infinity));
            }
            let q: f64 = rest.parse().map_err(|_| bad())?;
            if !q.is_finite() {
                return Err(bad());
            }
            return Self::schatten(q);
        }
        Err(bad())
    }
}

/// Closed-form or numerically estimated scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub estimated: bool,
    /// Mesh of the numeric search; zero for closed forms.
    pub tolerance: f64,
}

impl Estimate {
    fn exact(value: f64) -> Self {
        Self {
            value,
            estimated: false,
            tolerance: 0.0,
        }
    }
}

/// A gauge together with the dimension `d` it acts on.
#[derive(Clone, Debug)]
pub struct GaugeContext {
    gauge: Gauge,
    dim: usize,
}

impl GaugeContext {
    pub fn new(gauge: Gauge, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("gauge dimension must be positive".into()));
        }
        if let Gauge::KyFan(l) = gauge {
            if l == 0 || l > dim {
                return Err(Error::Dimension(format!("Ky Fan order {l} not in [1, {dim}]")));
            }
        }
        Ok(Self { gauge, dim })
    }

    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        Self::new(spec.parse()?, dim)
    }

    pub fn gauge(&self) -> &Gauge {
        &self.gauge
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_estimated(&self) -> bool {
        matches!(&self.gauge, Gauge::Custom(c) if c.estimated)
    }

    /// `τ(x)` for `x` of length `dim`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!(
                "gauge on R^{} applied to a vector of length {}",
                self.dim,
                x.len()
            )));
        }
        let mut abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        abs.sort_by(|a, b| b.total_cmp(a));
        Ok(self.eval_sorted(&abs))
    }

    /// `τ|_r` evaluated on nonnegative descending values of length `r ≤ dim`.
    pub(crate) fn eval_sorted(&self, values: &[f64]) -> f64 {
        debug_assert!(values.len() <= self.dim);
        match &self.gauge {
            Gauge::Schatten(q) => schatten(values, *q),
            Gauge::KyFan(l) => values.iter().take(*l).sum(),
            Gauge::Custom(c) => {
                if values.len() == self.dim {
                    (c.eval)(values)
                } else {
                    let mut padded = values.to_vec();
                    padded.resize(self.dim, 0.0);
                    (c.eval)(&padded)
                }
            }
        }
    }

    /// The dual gauge `τ*(x) = sup_{τ(y) ≤ 1} ⟨x, y⟩` on the same space.
    pub fn dual(&self) -> GaugeContext {
        let gauge = match &self.gauge {
            Gauge::Schatten(q) => Gauge::Schatten(q.conjugate()),
            Gauge::KyFan(l) => {
                let l = *l;
                Gauge::Custom(CustomGauge::new(format!("KF{l}*"), move |x: &[f64]| {
                    let max = x.first().copied().unwrap_or(0.0);
                    max.max(x.iter().sum::<f64>() / l as f64)
                }))
            }
            Gauge::Custom(c) => {
                let primal = self.clone();
                let name = format!("{}*", c.name);
                let mut dual = CustomGauge::new(name, move |x: &[f64]| numeric_dual(&primal, x));
                dual.estimated = true;
                Gauge::Custom(dual)
            }
        };
        GaugeContext { gauge, dim: self.dim }
    }

    /// `τ|_r(x₁..x_r) = τ(x₁..x_r, 0..0)`.
    pub fn restrict(&self, r: usize) -> Result<GaugeContext> {
        if r == 0 || r > self.dim {
            return Err(Error::Dimension(format!("restriction to {r} outside [1, {}]", self.dim)));
        }
        if r == self.dim {
            return Ok(self.clone());
        }
        let gauge = match &self.gauge {
            Gauge::Schatten(q) => Gauge::Schatten(*q),
            Gauge::KyFan(l) => Gauge::KyFan((*l).min(r)),
            Gauge::Custom(c) => {
                let parent = self.clone();
                let mut restricted =
                    CustomGauge::new(format!("{}|{r}", c.name), move |x: &[f64]| parent.eval_sorted(x));
                restricted.estimated = c.estimated;
                Gauge::Custom(restricted)
            }
        };
        Ok(GaugeContext { gauge, dim: r })
    }

    /// `τ(1, …, 1)`.
    pub fn at_ones(&self) -> f64 {
        let d = self.dim as f64;
        match &self.gauge {
            Gauge::Schatten(q) => d.powf(q.reciprocal()),
            Gauge::KyFan(l) => *l as f64,
            Gauge::Custom(_) => self.eval_sorted(&vec![1.0; self.dim]),
        }
    }

    /// `L_τ = sup_{‖x‖₂ = 1} τ(x)`.
    pub fn lipschitz(&self) -> Result<Estimate> {
        let d = self.dim as f64;
        match &self.gauge {
            Gauge::Schatten(q) => Ok(Estimate::exact(d.powf((q.reciprocal() - 0.5).max(0.0)))),
            Gauge::KyFan(l) => Ok(Estimate::exact((*l as f64).sqrt())),
            Gauge::Custom(_) => self.lipschitz_numeric(),
        }
    }

    /// Numerical sphere maximization regardless of gauge family.
    pub fn lipschitz_numeric(&self) -> Result<Estimate> {
        let f = |y: &[f64]| {
            let mut s = y.to_vec();
            s.sort_by(|a, b| b.total_cmp(a));
            self.eval_sorted(&s) / y.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let best = maximize_on_sphere(self.dim, &f, SearchOptions::LIPSCHITZ);
        let ones = self.at_ones();
        let (lo, hi) = (ones / (self.dim as f64).sqrt(), ones);
        let slack = 1e-9 * hi.max(1.0);
        if !(best.value >= lo - slack && best.value <= hi + slack) {
            return Err(Error::Optimization(format!(
                "Lipschitz estimate {} outside [{lo}, {hi}] for {}",
                best.value, self.gauge
            )));
        }
        Ok(Estimate {
            value: best.value,
            estimated: true,
            tolerance: best.mesh,
        })
    }

    /// `τ(σ(A))`, with `τ` restricted to `min(rows, cols)` coordinates.
    pub fn norm(&self, a: &Matrix) -> Result<f64> {
        let r = a.min_dim();
        if r > self.dim {
            return Err(Error::Dimension(format!(
                "matrix with {r} singular values exceeds gauge dimension {}",
                self.dim
            )));
        }
        Ok(self.eval_sorted(&svd_values(a)?))
    }
}

fn schatten(values: &[f64], q: Exponent) -> f64 {
    let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    match q {
        Exponent::Infinity => max,
        Exponent::Finite(q) if q == 1.0 => values.iter().map(|v| v.abs()).sum(),
        Exponent::Finite(q) => {
            if max == 0.0 {
                return 0.0;
            }
            let s: f64 = values.iter().map(|v| (v.abs() / max).powf(q)).sum();
            max * s.powf(1.0 / q)
        }
    }
}

fn numeric_dual(primal: &GaugeContext, x: &[f64]) -> f64 {
    if x.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    // Rearrangement: the optimal y is ordered like x, so sorting y only helps.
    let f = |y: &[f64]| {
        let mut s = y.to_vec();
        s.sort_by(|a, b| b.total_cmp(a));
        let num: f64 = s.iter().zip(x).map(|(a, b)| a * b).sum();
        num / primal.eval_sorted(&s)
    };
    maximize_on_sphere(primal.dim, &f, SearchOptions::DUAL).value
}
