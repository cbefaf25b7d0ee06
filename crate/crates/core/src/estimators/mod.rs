//! Estimators for each model and the squared-norm loss.

mod selector;
pub mod subsets;

use serde::{Deserialize, Serialize};

pub use selector::{c1_min, psi_threshold, select_support, SearchMode, SelectorTrace, Threshold, DEFAULT_C1, DEFAULT_GAMMA};

use crate::error::{Error, Result};
use crate::gauges::GaugeContext;
use crate::matcore::{Matrix, Seed};
use crate::models::{sample_covariance, ModelSpec, Observation};

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_c1() -> f64 {
    DEFAULT_C1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum EstimatorSpec {
    /// `θ̂ = Y`.
    Identity,
    Zero,
    /// `S = XᵀX / n`.
    SampleCovariance,
    /// `X` when `λ ≥ 1`, else `0`.
    PoissonPlugin,
    /// `Y` masked to a ψ-admissible `Î×Ĵ`, or `0` if none is found.
    Submatrix {
        k: usize,
        s: usize,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_c1")]
        c1: f64,
        #[serde(default)]
        search: SearchMode,
    },
}

impl EstimatorSpec {
    pub fn validate(&self) -> Result<()> {
        if let Self::Submatrix { k, s, gamma, c1, .. } = self {
            if *k == 0 || *s == 0 {
                return Err(Error::Config("k and s must be positive".into()));
            }
            if !(*gamma >= DEFAULT_GAMMA) {
                return Err(Error::Config(format!("gamma must be at least 4, got {gamma}")));
            }
            if !(*c1 >= c1_min()) {
                return Err(Error::Config(format!("c1 must be at least {:.4}, got {c1}", c1_min())));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Zero => "zero",
            Self::SampleCovariance => "sample_covariance",
            Self::PoissonPlugin => "poisson_plugin",
            Self::Submatrix { .. } => "submatrix",
        }
    }

    /// Whether this estimator can be applied to observations of `model`.
    pub fn supports(&self, model: &ModelSpec) -> bool {
        matches!(
            (self, model),
            (Self::Zero, _)
                | (Self::Identity, ModelSpec::GaussianMean { .. } | ModelSpec::Poisson { .. })
                | (Self::SampleCovariance, ModelSpec::Covariance { .. })
                | (Self::PoissonPlugin, ModelSpec::Poisson { .. })
                | (Self::Submatrix { .. }, ModelSpec::GaussianMean { .. })
        )
    }
}

/// Estimate plus the selector trace when one was run.
#[derive(Clone, Debug)]
pub struct EstimateOutput {
    pub value: Matrix,
    pub trace: Option<SelectorTrace>,
}

/// Applies `spec` to `observation`. `seed` only feeds greedy random probes.
pub fn estimate(
    spec: &EstimatorSpec,
    observation: &Observation,
    model: &ModelSpec,
    ctx: &GaugeContext,
    seed: Seed,
) -> Result<EstimateOutput> {
    spec.validate()?;
    if !spec.supports(model) {
        return Err(Error::Config(format!(
            "estimator {} does not apply to the {} model",
            spec.name(),
            model.name()
        )));
    }
    let shape = model.parameter_shape();
    let matrix_obs = || -> Result<&Matrix> {
        let y = observation
            .as_matrix()
            .ok_or_else(|| Error::Config(format!("{} model expects a matrix observation", model.name())))?;
        if y.shape() != shape {
            return Err(Error::Dimension(format!(
                "observation is {}x{}, model expects {}x{}",
                y.rows(),
                y.cols(),
                shape.0,
                shape.1
            )));
        }
        Ok(y)
    };
    let plain = |value: Matrix| Ok(EstimateOutput { value, trace: None });

    match spec {
        EstimatorSpec::Zero => plain(Matrix::zeros(shape.0, shape.1)),
        EstimatorSpec::Identity => plain(matrix_obs()?.clone()),
        EstimatorSpec::PoissonPlugin => {
            let ModelSpec::Poisson { lambda, .. } = model else { unreachable!() };
            let x = matrix_obs()?;
            plain(if *lambda >= 1.0 { x.clone() } else { Matrix::zeros(shape.0, shape.1) })
        }
        EstimatorSpec::SampleCovariance => match observation {
            Observation::Covariance { data, .. } => {
                if data.cols() != shape.0 {
                    return Err(Error::Dimension(format!("data has {} columns, expected {}", data.cols(), shape.0)));
                }
                plain(sample_covariance(data))
            }
            _ => Err(Error::Config("sample covariance needs a covariance observation".into())),
        },
        EstimatorSpec::Submatrix { k, s, gamma, c1, search } => {
            let ModelSpec::GaussianMean { sigma, .. } = model else { unreachable!() };
            let y = matrix_obs()?;
            let trace = select_support(y, *k, *s, *gamma, *c1, *sigma, ctx, *search, seed)?;
            let value = match &trace.selected {
                Some((rows, cols)) => {
                    let rows: Vec<usize> = rows.zero_based().collect();
                    let cols: Vec<usize> = cols.zero_based().collect();
                    y.mask(&rows, &cols)
                }
                None => Matrix::zeros(shape.0, shape.1),
            };
            Ok(EstimateOutput { value, trace: Some(trace) })
        }
    }
}

/// `‖M̂ − M‖²_τ`.
pub fn squared_loss(ctx: &GaugeContext, estimate: &Matrix, truth: &Matrix) -> Result<f64> {
    let diff = estimate.try_sub(truth)?;
    Ok(ctx.norm(&diff)?.powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{sample_ensemble, EnsembleSpec, IndexSet};
    use crate::models::{sample_observation, Noise, Sparsity};

    fn gm(p: usize, m: usize, sigma: f64) -> ModelSpec {
        ModelSpec::GaussianMean { p, m, sigma, sparsity: None, noise: Noise::Gaussian }
    }

    #[test]
    fn squared_loss_examples() {
        let a = Matrix::from_diag(2, 2, &[3.0, 4.0]);
        let z = Matrix::zeros(2, 2);
        assert_eq!(squared_loss(&GaugeContext::parse("Sinf", 2).unwrap(), &a, &z).unwrap(), 16.0);
        assert!((squared_loss(&GaugeContext::parse("S1", 2).unwrap(), &a, &z).unwrap() - 49.0).abs() < 1e-12);
        assert_eq!(squared_loss(&GaugeContext::parse("S2", 2).unwrap(), &a, &a).unwrap(), 0.0);
        assert!(squared_loss(&GaugeContext::parse("S2", 2).unwrap(), &a, &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn simple_estimators() {
        let ctx = GaugeContext::parse("S2", 3).unwrap();
        let y = Matrix::filled(3, 3, 2.0);
        let obs = Observation::Matrix { data: y.clone() };
        let out = estimate(&EstimatorSpec::Zero, &obs, &gm(3, 3, 1.0), &ctx, Seed::default()).unwrap();
        assert_eq!(out.value, Matrix::zeros(3, 3));
        let out = estimate(&EstimatorSpec::Identity, &obs, &gm(3, 3, 1.0), &ctx, Seed::default()).unwrap();
        assert_eq!(out.value, y);

        let high = ModelSpec::Poisson { k: 3, s: 3, lambda: 2.0 };
        let low = ModelSpec::Poisson { k: 3, s: 3, lambda: 0.5 };
        assert_eq!(estimate(&EstimatorSpec::PoissonPlugin, &obs, &high, &ctx, Seed::default()).unwrap().value, y);
        assert_eq!(
            estimate(&EstimatorSpec::PoissonPlugin, &obs, &low, &ctx, Seed::default()).unwrap().value,
            Matrix::zeros(3, 3)
        );

        let cov = ModelSpec::Covariance { k: 3, n: 5, lambda: 1.0 };
        let data = Matrix::filled(5, 3, 1.0);
        let obs = Observation::Covariance { sample_cov: sample_covariance(&data), data };
        let out = estimate(&EstimatorSpec::SampleCovariance, &obs, &cov, &ctx, Seed::default()).unwrap();
        assert_eq!(out.value, Matrix::filled(3, 3, 1.0));
    }

    #[test]
    fn mismatches_are_rejected() {
        let ctx = GaugeContext::parse("S2", 2).unwrap();
        let obs = Observation::Matrix { data: Matrix::zeros(3, 3) };
        assert!(matches!(
            estimate(&EstimatorSpec::Identity, &obs, &gm(2, 2, 1.0), &ctx, Seed::default()),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            estimate(&EstimatorSpec::SampleCovariance, &obs, &gm(3, 3, 1.0), &ctx, Seed::default()),
            Err(Error::Config(_))
        ));
        let comp = ModelSpec::Completion { k: 2, s: 2, r: 1, a: 1.0, sigma: 1.0, n: 2, without_replacement: false };
        assert!(matches!(
            estimate(&EstimatorSpec::Identity, &obs, &comp, &ctx, Seed::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn spec_json() {
        let spec: EstimatorSpec =
            serde_json::from_str(r#"{"estimator":"submatrix","k":2,"s":3,"search":{"mode":"exhaustive","budget":100}}"#)
                .unwrap();
        assert_eq!(
            spec,
            EstimatorSpec::Submatrix { k: 2, s: 3, gamma: 4.0, c1: 3.33, search: SearchMode::Exhaustive { budget: 100 } }
        );
        let bad: EstimatorSpec = serde_json::from_str(r#"{"estimator":"submatrix","k":2,"s":3,"gamma":2}"#).unwrap();
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn noiseless_block_is_recovered_exactly() {
        let block = Matrix::from_rows(&[[9.0, -7.0], [6.0, 8.0]]).unwrap();
        let rows = IndexSet::new(8, vec![3, 6]).unwrap();
        let cols = IndexSet::new(8, vec![2, 8]).unwrap();
        let m = block.block_embed(8, 8, &rows, &cols).unwrap();
        let model = ModelSpec::GaussianMean { p: 8, m: 8, sigma: 0.0, sparsity: Some(Sparsity { k: 2, s: 2 }), noise: Noise::Gaussian };
        let obs = sample_observation(&model, &m, Seed::new(1, 0)).unwrap();
        let spec = EstimatorSpec::Submatrix { k: 2, s: 2, gamma: 4.0, c1: 3.33, search: SearchMode::Exhaustive { budget: 1_000_000 } };
        let ctx = GaugeContext::parse("Sinf", 8).unwrap();
        let out = estimate(&spec, &obs, &model, &ctx, Seed::default()).unwrap();
        assert_eq!(out.value, m);
        let (a, b) = out.trace.unwrap().selected.unwrap();
        assert_eq!((a, b), (rows, cols));
    }

    #[test]
    fn error_decomposition_holds() {
        // ‖M̂ − M‖ ≤ ‖M_{I,J∖Ĵ}‖ + ‖M_{I∖Î,J∩Ĵ}‖ + ‖Z_{ÎĴ}‖ for every replicate.
        let (p, m, k, s) = (12, 10, 2, 3);
        for gauge in ["S1", "S2", "Sinf", "KF2"] {
            let ctx = GaugeContext::parse(gauge, p.min(m)).unwrap();
            for rep in 0..40u64 {
                let seed = Seed::new(77, rep);
                let block = sample_ensemble(&EnsembleSpec::GaussianIid { rows: k, cols: s, sigma: 4.0 }, seed.derive(1)).unwrap();
                let rows = IndexSet::new(p, vec![1 + rep as usize % p, 1 + (rep as usize + 5) % p]).unwrap();
                let cols = IndexSet::new(m, vec![1, 4, 7]).unwrap();
                let truth = block.block_embed(p, m, &rows, &cols).unwrap();
                let z = sample_ensemble(&EnsembleSpec::GaussianIid { rows: p, cols: m, sigma: 1.0 }, seed.derive(2)).unwrap();
                let y = &truth + &z;
                let spec = EstimatorSpec::Submatrix { k, s, gamma: 4.0, c1: 3.33, search: SearchMode::Greedy { random_probes: 100 } };
                let out = estimate(&spec, &Observation::Matrix { data: y }, &gm(p, m, 1.0), &ctx, seed).unwrap();
                let (ih, jh): (Vec<usize>, Vec<usize>) = match out.trace.unwrap().selected {
                    Some((a, b)) => (a.zero_based().collect(), b.zero_based().collect()),
                    None => (vec![], vec![]),
                };
                let i: Vec<usize> = rows.zero_based().collect();
                let j: Vec<usize> = cols.zero_based().collect();
                let i_s: Vec<usize> = i.iter().copied().filter(|x| !ih.contains(x)).collect();
                let j_s: Vec<usize> = j.iter().copied().filter(|x| !jh.contains(x)).collect();
                let j_c: Vec<usize> = j.iter().copied().filter(|x| jh.contains(x)).collect();
                let lhs = ctx.norm(&out.value.try_sub(&truth).unwrap()).unwrap();
                let rhs = ctx.norm(&truth.mask(&i, &j_s)).unwrap()
                    + ctx.norm(&truth.mask(&i_s, &j_c)).unwrap()
                    + ctx.norm(&z.mask(&ih, &jh)).unwrap();
                assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12, "{gauge} rep {rep}: {lhs} > {rhs}");
            }
        }
    }
}
