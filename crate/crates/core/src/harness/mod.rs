//! Monte Carlo risk experiments, parameter sweeps and report output.

mod report;
mod sweep;

use serde::{Deserialize, Serialize};

pub use report::{emit_report, read_report, render_report, Format, Report};
pub use sweep::{fit_slope, sweep, SlopeFit, SweepPoint, SweepTable};

use crate::error::{Error, Result};
use crate::estimators::{estimate, psi_threshold, squared_loss, EstimatorSpec, DEFAULT_C1, DEFAULT_GAMMA};
use crate::gauges::GaugeContext;
use crate::geometry::{rate_completion, rate_covariance, rate_oracle_mean, rate_poisson, rate_submatrix, RateBreakdown};
use crate::matcore::{gaussian, IndexSet, Matrix, Seed};
use crate::models::{member, sample_observation, ModelSpec, Noise, Sparsity};

/// Key for the stream that draws a random truth, kept apart from replicate streams.
const TRUTH_KEY: u64 = 0x7275_7468;
/// Key for the estimator's own randomness within a replicate.
const ESTIMATOR_KEY: u64 = 0x6573_7469;

pub const LOWER_BOUND_FLAG: &str = "lower-bound comparison";
pub const GREEDY_FLAG: &str = "heuristic greedy selector";

/// How the true parameter is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TruthRule {
    Zero,
    /// A matrix given inline or as a path to a JSON or CSV file.
    Explicit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Matrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
    },
    /// `λI` for the covariance model, `λ·1` for the Poisson model.
    WorstDiag,
    Constant { value: f64 },
    /// Uniformly placed `k x s` block holding a full-rank Gaussian matrix of
    /// Frobenius norm `scale`, or `scale · σψ(k, s)` when `relative_to_psi`.
    RandomSupport {
        scale: f64,
        #[serde(default)]
        relative_to_psi: bool,
    },
}

fn default_replicates() -> usize {
    500
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub estimator: EstimatorSpec,
    /// Gauge name such as `S2`, `Sinf`, `KF3`.
    pub gauge: String,
    pub truth: TruthRule,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: Seed,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::Config(format!("need at least 2 replicates, got {}", self.replicates)));
        }
        self.model.validate()?;
        self.estimator.validate()?;
        if !self.estimator.supports(&self.model) {
            return Err(Error::Config(format!(
                "estimator {} does not apply to the {} model",
                self.estimator.name(),
                self.model.name()
            )));
        }
        Ok(())
    }

    /// The gauge on `ℝ^{min(rows, cols)}` of the parameter.
    pub fn gauge_context(&self) -> Result<GaugeContext> {
        let (rows, cols) = self.model.parameter_shape();
        GaugeContext::parse(&self.gauge, rows.min(cols)).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub empirical_risk: f64,
    pub stderr: f64,
    pub theoretical_rate: RateBreakdown,
    /// `empirical_risk / theoretical_rate.total`, absent when the rate is zero.
    pub ratio: Option<f64>,
    pub replicates: usize,
    pub seed: Seed,
    pub heuristic_flags: Vec<String>,
}

/// The rate matching the model, with the implied constant set to one.
pub fn theoretical_rate(model: &ModelSpec, ctx: &GaugeContext) -> Result<RateBreakdown> {
    match model {
        ModelSpec::GaussianMean { p, m, sigma, sparsity, .. } => match sparsity {
            None => rate_oracle_mean(ctx, *p, *m, *sigma),
            Some(Sparsity { k, s }) => Ok(rate_submatrix(ctx, *k, *s, *p, *m)?.scaled(sigma * sigma, "sigma^2")),
        },
        ModelSpec::Covariance { k, n, lambda } => rate_covariance(ctx, *k, *n, *lambda),
        ModelSpec::Poisson { k, s, lambda } => rate_poisson(ctx, *k, *s, *lambda),
        ModelSpec::Completion { k, s, r, a, sigma, n, .. } => rate_completion(ctx, *k, *s, *r, *n, *sigma, *a),
    }
}

/// Builds the true parameter; random rules draw from `seed`.
pub fn generate_truth(config: &ExperimentConfig, ctx: &GaugeContext, seed: Seed) -> Result<Matrix> {
    let (rows, cols) = config.model.parameter_shape();
    let truth = match &config.truth {
        TruthRule::Zero => Matrix::zeros(rows, cols),
        TruthRule::Constant { value } => Matrix::filled(rows, cols, *value),
        TruthRule::Explicit { matrix, path } => match (matrix, path) {
            (Some(m), None) => m.clone(),
            (None, Some(path)) => read_matrix_file(path)?,
            _ => return Err(Error::Config("explicit truth needs exactly one of matrix or path".into())),
        },
        TruthRule::WorstDiag => match &config.model {
            ModelSpec::Covariance { k, lambda, .. } => Matrix::identity(*k).scale(*lambda),
            ModelSpec::Poisson { k, s, lambda } => Matrix::filled(*k, *s, *lambda),
            other => return Err(Error::Config(format!("worst_diag truth is not defined for the {} model", other.name()))),
        },
        TruthRule::RandomSupport { scale, relative_to_psi } => {
            let ModelSpec::GaussianMean { p, m, sigma, sparsity: Some(Sparsity { k, s }), .. } = &config.model else {
                return Err(Error::Config("random_support truth needs a sparse gaussian_mean model".into()));
            };
            let norm = if *relative_to_psi {
                let (gamma, c1) = match &config.estimator {
                    EstimatorSpec::Submatrix { gamma, c1, .. } => (*gamma, *c1),
                    _ => (DEFAULT_GAMMA, DEFAULT_C1),
                };
                scale * sigma * psi_threshold(&ctx.restrict((*k).min(*s))?, *k, *s, *p, *m, gamma, c1)?
            } else {
                *scale
            };
            random_support_truth(*p, *m, *k, *s, norm, seed)?
        }
    };
    if truth.shape() != (rows, cols) {
        return Err(Error::Dimension(format!(
            "truth is {}x{}, model expects {rows}x{cols}",
            truth.rows(),
            truth.cols()
        )));
    }
    Ok(truth)
}

fn random_support_truth(p: usize, m: usize, k: usize, s: usize, frobenius: f64, seed: Seed) -> Result<Matrix> {
    let mut rng = seed.rng();
    let rows = rand::seq::index::sample(&mut rng, p, k).into_vec();
    let cols = rand::seq::index::sample(&mut rng, m, s).into_vec();
    let block = gaussian(k, s, 1.0, &mut rng);
    let norm = block.frobenius_norm();
    let block = if norm > 0.0 { block.scale(frobenius / norm) } else { block };
    block.block_embed(p, m, &IndexSet::from_zero_based(p, rows)?, &IndexSet::from_zero_based(m, cols)?)
}

fn read_matrix_file(path: &str) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)?;
    if path.ends_with(".csv") {
        Matrix::from_csv(&text)
    } else {
        Matrix::from_json(&text)
    }
}

/// Sum in a fixed pairwise order, independent of how values were produced.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct ReplicateOutcome {
    loss: f64,
    heuristic: bool,
    empty: bool,
}

#[cfg(feature = "parallel")]
fn map_replicates<F>(n: usize, f: F) -> Result<Vec<ReplicateOutcome>>
where
    F: Fn(u64) -> Result<ReplicateOutcome> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n as u64).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_replicates<F>(n: usize, f: F) -> Result<Vec<ReplicateOutcome>>
where
    F: Fn(u64) -> Result<ReplicateOutcome>,
{
    (0..n as u64).map(f).collect()
}

/// Monte Carlo estimate of `E‖θ̂ − θ‖²_τ`. Replicate `i` uses stream `i`.
pub fn run_risk(config: &ExperimentConfig) -> Result<RiskReport> {
    run_risk_streams(config, config.seed, &|i| i)
}

/// `run_risk` with replicate `i` drawn from stream `stream_of(i)` and the
/// truth from `truth_seed`.
pub(crate) fn run_risk_streams(
    config: &ExperimentConfig,
    truth_seed: Seed,
    stream_of: &(dyn Fn(u64) -> u64 + Sync),
) -> Result<RiskReport> {
    config.validate()?;
    let ctx = config.gauge_context()?;
    let truth = generate_truth(config, &ctx, truth_seed.derive(TRUTH_KEY))?;
    if !member(&config.model, &truth)? {
        return Err(Error::Domain(format!("truth is outside the {} parameter space", config.model.name())));
    }
    let rate = theoretical_rate(&config.model, &ctx)?;

    let outcomes = map_replicates(config.replicates, |i| {
        let seed = config.seed.with_stream(stream_of(i));
        let obs = sample_observation(&config.model, &truth, seed)?;
        let out = estimate(&config.estimator, &obs, &config.model, &ctx, seed.derive(ESTIMATOR_KEY))?;
        let (heuristic, empty) = out.trace.as_ref().map_or((false, false), |t| (t.heuristic, t.empty));
        Ok(ReplicateOutcome {
            loss: squared_loss(&ctx, &out.value, &truth)?,
            heuristic,
            empty,
        })
    })?;

    let losses: Vec<f64> = outcomes.iter().map(|o| o.loss).collect();
    let (risk, stderr) = mean_and_stderr(&losses);
    let mut flags = Vec::new();
    if rate.lower_bound_only {
        flags.push(LOWER_BOUND_FLAG.to_string());
    }
    if outcomes.iter().any(|o| o.heuristic) {
        flags.push(GREEDY_FLAG.to_string());
    }
    let empties = outcomes.iter().filter(|o| o.empty).count();
    if empties > 0 {
        flags.push(format!("empty selection in {empties} replicates"));
    }
    if ctx.is_estimated() {
        flags.push("numerically estimated gauge".to_string());
    }
    if matches!(config.model, ModelSpec::GaussianMean { noise: Noise::StudentT5, .. }) {
        flags.push("student-t noise".to_string());
    }
    Ok(RiskReport {
        empirical_risk: risk,
        stderr,
        ratio: (rate.total > 0.0).then(|| risk / rate.total),
        theoretical_rate: rate,
        replicates: config.replicates,
        seed: config.seed,
        heuristic_flags: flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn identity_config(p: usize, gauge: &str, reps: usize) -> ExperimentConfig {
        ExperimentConfig {
            model: ModelSpec::GaussianMean { p, m: p, sigma: 1.0, sparsity: None, noise: Noise::Gaussian },
            estimator: EstimatorSpec::Identity,
            gauge: gauge.into(),
            truth: TruthRule::Zero,
            replicates: reps,
            seed: Seed::new(42, 0),
            output_path: None,
        }
    }

    #[test]
    fn identity_risk_is_ks() {
        let report = run_risk(&identity_config(20, "S2", 500)).unwrap();
        let ratio = report.empirical_risk / 400.0;
        assert!((0.97..=1.03).contains(&ratio), "{ratio}");
        assert!((report.ratio.unwrap() - ratio).abs() < 1e-12);
        assert!(report.heuristic_flags.is_empty());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = identity_config(6, "KF2", 64);
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_risk(&cfg).unwrap())
        };
        let serial = run(1);
        assert_eq!(serial, run(4));
        assert_eq!(serial.empirical_risk.to_bits(), run(3).empirical_risk.to_bits());
    }

    #[test]
    fn zero_estimator_at_zero_truth() {
        let mut cfg = identity_config(5, "S1", 20);
        cfg.estimator = EstimatorSpec::Zero;
        let report = run_risk(&cfg).unwrap();
        assert_eq!((report.empirical_risk, report.stderr), (0.0, 0.0));
    }

    #[test]
    fn poisson_plugin_variance_identity() {
        let cfg = ExperimentConfig {
            model: ModelSpec::Poisson { k: 6, s: 5, lambda: 3.0 },
            estimator: EstimatorSpec::PoissonPlugin,
            gauge: "S2".into(),
            truth: TruthRule::Constant { value: 3.0 },
            replicates: 1000,
            seed: Seed::new(1, 0),
            output_path: None,
        };
        let report = run_risk(&cfg).unwrap();
        let ratio = report.empirical_risk / (30.0 * 3.0);
        assert!((0.95..=1.05).contains(&ratio), "{ratio}");
        assert!(report.heuristic_flags.is_empty());
    }

    #[test]
    fn errors_are_classified() {
        let mut cfg = identity_config(4, "S2", 1);
        assert!(matches!(run_risk(&cfg), Err(Error::Config(_))));
        cfg.replicates = 5;
        cfg.estimator = EstimatorSpec::SampleCovariance;
        assert!(matches!(run_risk(&cfg), Err(Error::Config(_))));
        let cfg = ExperimentConfig {
            model: ModelSpec::Poisson { k: 2, s: 2, lambda: 1.0 },
            estimator: EstimatorSpec::Zero,
            gauge: "S2".into(),
            truth: TruthRule::Constant { value: 2.0 },
            replicates: 5,
            seed: Seed::default(),
            output_path: None,
        };
        assert!(matches!(run_risk(&cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn lower_bound_flag() {
        let cfg = ExperimentConfig {
            model: ModelSpec::Completion { k: 4, s: 4, r: 2, a: 1.0, sigma: 1.0, n: 8, without_replacement: false },
            estimator: EstimatorSpec::Zero,
            gauge: "S2".into(),
            truth: TruthRule::Constant { value: 0.5 },
            replicates: 4,
            seed: Seed::default(),
            output_path: None,
        };
        let report = run_risk(&cfg).unwrap();
        assert!(report.heuristic_flags.iter().any(|f| f == LOWER_BOUND_FLAG));
        assert!((report.empirical_risk - 4.0).abs() < 1e-12);
    }

    #[test]
    fn random_support_truth_has_requested_norm() {
        let cfg = ExperimentConfig {
            model: ModelSpec::GaussianMean { p: 12, m: 10, sigma: 1.0, sparsity: Some(Sparsity { k: 3, s: 2 }), noise: Noise::Gaussian },
            estimator: EstimatorSpec::Identity,
            gauge: "S2".into(),
            truth: TruthRule::RandomSupport { scale: 7.0, relative_to_psi: false },
            replicates: 2,
            seed: Seed::default(),
            output_path: None,
        };
        let ctx = cfg.gauge_context().unwrap();
        let t = generate_truth(&cfg, &ctx, Seed::new(3, 0)).unwrap();
        assert!((t.frobenius_norm() - 7.0).abs() < 1e-12);
        assert_eq!((t.row_support().len(), t.col_support().len()), (3, 2));
        assert!(member(&cfg.model, &t).unwrap());
    }

    #[test]
    fn config_json_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model":{"model":"covariance","k":3,"n":10,"lambda":1},"estimator":{"estimator":"zero"},
                "gauge":"Sinf","truth":{"rule":"worst_diag"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.replicates, 500);
        assert_eq!(cfg.seed, Seed::default());
        assert!(matches!(ExperimentConfig::from_json("{}"), Err(Error::Config(_))));
    }

    #[test]
    fn pairwise_sum_matches() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 4950.0);
    }
}
