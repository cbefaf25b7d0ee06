use serde::{Deserialize, Serialize};

use super::{run_risk_streams, ExperimentConfig, RiskReport};
use crate::error::{Error, Result};
use crate::estimators::EstimatorSpec;
use crate::matcore::{splitmix64, stable_hash};
use crate::models::{ModelSpec, Sparsity};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub report: RiskReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: String,
    pub points: Vec<SweepPoint>,
}

/// Names accepted by [`sweep`].
pub const AXES: [&str; 10] = ["p", "m", "k", "s", "n", "sigma", "lambda", "r", "a", "square"];

fn as_count(axis: &str, value: f64) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 && value < 1e12 {
        Ok(value as usize)
    } else {
        Err(Error::Config(format!("axis {axis} needs a positive integer, got {value}")))
    }
}

/// A copy of `config` with `axis` set to `value`.
///
/// `k` and `s` set the sparsity of a gaussian mean model (and of a submatrix
/// estimator), or the dimensions of the other models; `square` sets both
/// parameter dimensions at once.
pub fn apply_axis(config: &ExperimentConfig, axis: &str, value: f64) -> Result<ExperimentConfig> {
    let mut cfg = config.clone();
    let unsupported = || Error::Config(format!("axis {axis} does not apply to the {} model", config.model.name()));
    match axis {
        "sigma" | "lambda" | "a" => {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::Config(format!("axis {axis} needs a nonnegative value, got {value}")));
            }
            let slot = match (&mut cfg.model, axis) {
                (ModelSpec::GaussianMean { sigma, .. } | ModelSpec::Completion { sigma, .. }, "sigma") => sigma,
                (ModelSpec::Covariance { lambda, .. } | ModelSpec::Poisson { lambda, .. }, "lambda") => lambda,
                (ModelSpec::Completion { a, .. }, "a") => a,
                _ => return Err(unsupported()),
            };
            *slot = value;
        }
        "p" | "m" | "n" | "r" | "k" | "s" | "square" => {
            let v = as_count(axis, value)?;
            match (&mut cfg.model, axis) {
                (ModelSpec::GaussianMean { p, .. }, "p") => *p = v,
                (ModelSpec::GaussianMean { m, .. }, "m") => *m = v,
                (ModelSpec::GaussianMean { p, m, .. }, "square") => {
                    *p = v;
                    *m = v;
                }
                (ModelSpec::GaussianMean { sparsity: Some(Sparsity { k, .. }), .. }, "k") => *k = v,
                (ModelSpec::GaussianMean { sparsity: Some(Sparsity { s, .. }), .. }, "s") => *s = v,
                (ModelSpec::Covariance { k, .. }, "k" | "square") => *k = v,
                (ModelSpec::Covariance { n, .. } | ModelSpec::Completion { n, .. }, "n") => *n = v,
                (ModelSpec::Poisson { k, .. } | ModelSpec::Completion { k, .. }, "k") => *k = v,
                (ModelSpec::Poisson { s, .. } | ModelSpec::Completion { s, .. }, "s") => *s = v,
                (ModelSpec::Poisson { k, s, .. } | ModelSpec::Completion { k, s, .. }, "square") => {
                    *k = v;
                    *s = v;
                }
                (ModelSpec::Completion { r, .. }, "r") => *r = v,
                _ => return Err(unsupported()),
            }
            if let (EstimatorSpec::Submatrix { k, s, .. }, ModelSpec::GaussianMean { .. }) = (&mut cfg.estimator, &cfg.model) {
                match axis {
                    "k" => *k = v,
                    "s" => *s = v,
                    _ => {}
                }
            }
        }
        _ => return Err(Error::Config(format!("unknown sweep axis {axis}; expected one of {AXES:?}"))),
    }
    Ok(cfg)
}

/// One risk report per value. Replicate `i` at value `v` uses stream
/// `hash(axis, v, i)` under the template's master seed.
pub fn sweep(template: &ExperimentConfig, axis: &str, values: &[f64]) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let cfg = apply_axis(template, axis, value)?;
        let key = stable_hash(format!("{axis}={value:?}").as_bytes());
        let truth_seed = template.seed.with_stream(key);
        let report = run_risk_streams(&cfg, truth_seed, &|i| splitmix64(key ^ splitmix64(i)))?;
        points.push(SweepPoint { value, report });
    }
    Ok(SweepTable { axis: axis.to_string(), points })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Least-squares slope of `log risk` against `log value`.
pub fn fit_slope(table: &SweepTable) -> Result<SlopeFit> {
    if table.points.len() < 3 {
        return Err(Error::Config(format!("slope fit needs at least 3 points, got {}", table.points.len())));
    }
    let mut xs = Vec::with_capacity(table.points.len());
    let mut ys = Vec::with_capacity(table.points.len());
    for pt in &table.points {
        if !(pt.value > 0.0 && pt.report.empirical_risk > 0.0) {
            return Err(Error::Domain(format!(
                "slope fit needs positive values and risks, got ({}, {})",
                pt.value, pt.report.empirical_risk
            )));
        }
        xs.push(pt.value.ln());
        ys.push(pt.report.empirical_risk.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs at least two distinct values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, stderr, intercept })
}
