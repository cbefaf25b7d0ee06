//! The four observation models, their parameter spaces, and their
//! Kullback–Leibler divergences.
//!
//! | model           | parameter                 | observation                         |
//! |-----------------|---------------------------|-------------------------------------|
//! | `gaussian_mean` | `M ∈ ℝ^{p×m}` (sparse)    | `Y = M + σZ`                        |
//! | `covariance`    | `Σ` with `‖Σ‖_op ≤ λ`     | `n` rows from `N(0, Σ)`             |
//! | `poisson`       | `Λ ∈ [0, λ]^{k×s}`        | `X_ij ~ Poisson(λ_ij)`              |
//! | `completion`    | rank `≤ r`, `|M_ij| ≤ a`  | `n` noisy entries at uniform sites  |

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{self, linalg, EnsembleSpec, Matrix, Seed};

/// Row/column sparsity `(k, s)`: at most `k` nonzero rows and `s` nonzero columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sparsity {
    pub k: usize,
    pub s: usize,
}

/// Noise law of the Gaussian mean model. `student_t5` is a unit-variance
/// Student-t with five degrees of freedom, used for universality checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    #[default]
    Gaussian,
    StudentT5,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    GaussianMean {
        p: usize,
        m: usize,
        sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sparsity: Option<Sparsity>,
        #[serde(default)]
        noise: Noise,
    },
    Covariance {
        k: usize,
        n: usize,
        lambda: f64,
    },
    Poisson {
        k: usize,
        s: usize,
        lambda: f64,
    },
    Completion {
        k: usize,
        s: usize,
        r: usize,
        a: f64,
        sigma: f64,
        n: usize,
        #[serde(default)]
        without_replacement: bool,
    },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be nonnegative, got {v}")))
            }
        };
        let (rows, cols) = self.parameter_shape();
        if rows == 0 || cols == 0 {
            return cfg("dimensions must be positive".into());
        }
        match self {
            Self::GaussianMean { p, m, sigma, sparsity, .. } => {
                nonneg("sigma", *sigma)?;
                if let Some(Sparsity { k, s }) = sparsity {
                    if *k == 0 || k > p || *s == 0 || s > m {
                        return cfg(format!("sparsity ({k}, {s}) must lie in [1, {p}] x [1, {m}]"));
                    }
                }
            }
            Self::Covariance { n, lambda, .. } => {
                positive("lambda", *lambda)?;
                if *n == 0 {
                    return cfg("sample size n must be positive".into());
                }
            }
            Self::Poisson { lambda, .. } => positive("lambda", *lambda)?,
            Self::Completion { k, s, r, a, sigma, n, .. } => {
                positive("a", *a)?;
                nonneg("sigma", *sigma)?;
                if *r == 0 || r > k.min(s) {
                    return cfg(format!("rank cap {r} must lie in [1, {}]", k.min(s)));
                }
                if *n == 0 || *n > k * s {
                    return cfg(format!("observation count {n} must lie in [1, {}]", k * s));
                }
            }
        }
        Ok(())
    }

    /// Shape of the unknown parameter matrix.
    pub fn parameter_shape(&self) -> (usize, usize) {
        match *self {
            Self::GaussianMean { p, m, .. } => (p, m),
            Self::Covariance { k, .. } => (k, k),
            Self::Poisson { k, s, .. } | Self::Completion { k, s, .. } => (k, s),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::GaussianMean { .. } => "gaussian_mean",
            Self::Covariance { .. } => "covariance",
            Self::Poisson { .. } => "poisson",
            Self::Completion { .. } => "completion",
        }
    }
}

/// Membership of `theta` in the parameter space of `spec`.
pub fn member(spec: &ModelSpec, theta: &Matrix) -> Result<bool> {
    let shape = spec.parameter_shape();
    if theta.shape() != shape {
        return Err(Error::Dimension(format!(
            "parameter is {}x{}, model expects {}x{}",
            theta.rows(),
            theta.cols(),
            shape.0,
            shape.1
        )));
    }
    Ok(match spec {
        ModelSpec::GaussianMean { sparsity, .. } => match sparsity {
            None => true,
            Some(Sparsity { k, s }) => theta.row_support().len() <= *k && theta.col_support().len() <= *s,
        },
        ModelSpec::Covariance { lambda, .. } => {
            if !theta.is_symmetric(1e-10) {
                return Ok(false);
            }
            let eig = linalg::symmetric_eigenvalues(theta)?;
            let top = eig[0];
            let bottom = *eig.last().unwrap();
            bottom >= -1e-10 * top.abs() && top <= lambda * (1.0 + 1e-12)
        }
        ModelSpec::Poisson { lambda, .. } => theta.entries().iter().all(|&v| (0.0..=*lambda).contains(&v)),
        ModelSpec::Completion { r, a, .. } => {
            theta.max_abs() <= *a && linalg::numerical_rank(theta, 1e-8)? <= *r
        }
    })
}

/// A single observed entry `(row, col, value)` of the completion model, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionSample {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observation {
    /// `Y` of the Gaussian mean model or the count matrix of the Poisson model.
    Matrix { data: Matrix },
    /// Data matrix `X` (`n x k`) and `S = XᵀX/n`.
    Covariance { data: Matrix, sample_cov: Matrix },
    Completion { samples: Vec<CompletionSample> },
}

impl Observation {
    pub fn as_matrix(&self) -> Option<&Matrix> {
        match self {
            Self::Matrix { data } => Some(data),
            _ => None,
        }
    }
}

/// One draw of the observation given the true parameter.
pub fn sample_observation(spec: &ModelSpec, theta: &Matrix, seed: Seed) -> Result<Observation> {
    spec.validate()?;
    if !member(spec, theta)? {
        return Err(Error::Domain(format!("parameter is not in the {} parameter space", spec.name())));
    }
    let mut rng = seed.rng();
    match spec {
        ModelSpec::GaussianMean { p, m, sigma, noise, .. } => {
            let noise_spec = match noise {
                Noise::Gaussian => EnsembleSpec::GaussianIid { rows: *p, cols: *m, sigma: *sigma },
                Noise::StudentT5 => EnsembleSpec::ScaledStudentT { rows: *p, cols: *m, sigma: *sigma, dof: 5.0 },
            };
            let z = matcore::sample_with(&noise_spec, &mut rng)?;
            Ok(Observation::Matrix { data: theta + &z })
        }
        ModelSpec::Covariance { n, .. } => {
            let data = matcore::sample_with(&EnsembleSpec::GaussianRows { n: *n, sigma: theta.clone() }, &mut rng)?;
            let sample_cov = sample_covariance(&data);
            Ok(Observation::Covariance { data, sample_cov })
        }
        ModelSpec::Poisson { .. } => {
            let data = matcore::sample_with(&EnsembleSpec::PoissonRates { lambda: theta.clone() }, &mut rng)?;
            Ok(Observation::Matrix { data })
        }
        ModelSpec::Completion { k, s, sigma, n, without_replacement, .. } => {
            let sites: Vec<usize> = if *without_replacement {
                index::sample(&mut rng, k * s, *n).into_vec()
            } else {
                (0..*n).map(|_| rng.random_range(0..k * s)).collect()
            };
            let samples = sites
                .into_iter()
                .map(|site| {
                    let (i, j) = (site / s, site % s);
                    let z: f64 = rng.sample(StandardNormal);
                    CompletionSample {
                        row: i + 1,
                        col: j + 1,
                        value: theta.get(i, j) + sigma * z,
                    }
                })
                .collect();
            Ok(Observation::Completion { samples })
        }
    }
}

/// `XᵀX / n` for an `n x k` data matrix.
pub fn sample_covariance(data: &Matrix) -> Matrix {
    let x = data.to_nalgebra();
    let s = x.transpose() * &x / data.rows() as f64;
    Matrix::from_nalgebra(&s)
}

/// KL divergence in nats; `exact` is false for upper bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlResult {
    pub value: f64,
    pub exact: bool,
}

/// `D(N(θ₁, σ²I) ‖ N(θ₂, σ²I)) = ‖θ₁ − θ₂‖²_F / (2σ²)`.
pub fn kl_gaussian_mean(theta1: &Matrix, theta2: &Matrix, sigma: f64) -> Result<KlResult> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let diff = theta1.try_sub(theta2)?;
    Ok(KlResult {
        value: diff.frobenius_sq() / (2.0 * sigma * sigma),
        exact: true,
    })
}

/// `D(N(0, Σ₁) ‖ N(0, Σ₀)) = ½ Tr(Σ₀⁻¹Σ₁ − I) − ½ log det Σ₁ / det Σ₀`.
pub fn kl_covariance(sigma1: &Matrix, sigma0: &Matrix) -> Result<KlResult> {
    sigma1.check_same_shape(sigma0)?;
    if !sigma0.is_square() {
        return Err(Error::Dimension("covariance matrices must be square".into()));
    }
    let k = sigma0.rows() as f64;
    let chol0 = linalg::cholesky(sigma0)?;
    let chol1 = linalg::cholesky(sigma1)?;
    let trace = chol0.solve(&sigma1.to_nalgebra()).trace();
    let log_ratio = linalg::log_det_from_cholesky(&chol1) - linalg::log_det_from_cholesky(&chol0);
    let value = 0.5 * (trace - k) - 0.5 * log_ratio;
    Ok(KlResult {
        value: value.max(0.0),
        exact: true,
    })
}

/// `Σ λ₁ log(λ₁/λ₀) − λ₁ + λ₀` over entries, with `0 log 0 = 0`.
pub fn kl_poisson(lambda1: &Matrix, lambda0: &Matrix) -> Result<KlResult> {
    lambda1.check_same_shape(lambda0)?;
    let mut total = 0.0;
    for (&l1, &l0) in lambda1.entries().iter().zip(lambda0.entries()) {
        if l1 < 0.0 || l0 < 0.0 {
            return Err(Error::Domain("Poisson rates must be nonnegative".into()));
        }
        if l0 == 0.0 {
            if l1 > 0.0 {
                return Err(Error::InfiniteKl("reference rate is zero where the other is positive".into()));
            }
            continue;
        }
        let log_term = if l1 == 0.0 { 0.0 } else { l1 * (l1 / l0).ln() };
        total += log_term - l1 + l0;
    }
    Ok(KlResult {
        value: total.max(0.0),
        exact: true,
    })
}

/// `Σ (λ₁ − λ₀)² / λ₀`, the χ²-type bound on [`kl_poisson`].
pub fn poisson_chi_square(lambda1: &Matrix, lambda0: &Matrix) -> Result<f64> {
    lambda1.check_same_shape(lambda0)?;
    let mut total = 0.0;
    for (&l1, &l0) in lambda1.entries().iter().zip(lambda0.entries()) {
        if l0 == 0.0 {
            if l1 != 0.0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        total += (l1 - l0).powi(2) / l0;
    }
    Ok(total)
}

/// KL bounds for `n` uniformly sampled noisy entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionKl {
    /// `(1 − (1 − 1/(ks))ⁿ) ‖Δ‖²_F / (2σ²)`.
    pub bound: KlResult,
    /// `(n/(ks)) ‖Δ‖²_F / (2σ²)`.
    pub loose_bound: f64,
}

pub fn kl_completion_upper(m1: &Matrix, m2: &Matrix, n: usize, sigma: f64) -> Result<CompletionKl> {
    let diff = m1.try_sub(m2)?;
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let ks = (m1.rows() * m1.cols()) as f64;
    let base = diff.frobenius_sq() / (2.0 * sigma * sigma);
    let miss = (1.0 - 1.0 / ks).powi(n.min(i32::MAX as usize) as i32);
    Ok(CompletionKl {
        bound: KlResult {
            value: (1.0 - miss) * base,
            exact: false,
        },
        loose_bound: n as f64 / ks * base,
    })
}

/// A draw from `(λ/2)I + (λ/2)(B_{S₂}(√(2r)) ∩ B_{S∞}(1/2) ∩ Sym_k)`.
///
/// The symmetric direction is GOE; its length is scaled deterministically so
/// that it lies in both balls, with the radial fraction `u^{1/d_k}` matching a
/// uniform draw along the ray.
pub fn kr_ball_sample(k: usize, lambda: f64, r: f64, seed: Seed) -> Result<Matrix> {
    if k == 0 || !(lambda > 0.0) || !(r > 0.0) || !lambda.is_finite() || !r.is_finite() {
        return Err(Error::Domain(format!("need k >= 1, lambda > 0, r > 0 (got {k}, {lambda}, {r})")));
    }
    let mut rng = seed.rng();
    let dir = matcore::goe(k, &mut rng);
    let fro = dir.frobenius_norm();
    let op = linalg::svd_values(&dir)?[0];
    if fro == 0.0 {
        return Ok(Matrix::identity(k).scale(lambda / 2.0));
    }
    let reach = ((2.0 * r).sqrt() / fro).min(0.5 / op);
    let d_k = (k * (k + 1) / 2) as f64;
    let u: f64 = rng.random();
    let delta = dir.scale(reach * u.powf(1.0 / d_k));
    let sigma = (&Matrix::identity(k) + &delta).scale(lambda / 2.0);
    let eig = linalg::symmetric_eigenvalues(&sigma)?;
    if eig[0] > 0.75 * lambda * (1.0 + 1e-12) || eig[k - 1] < 0.25 * lambda * (1.0 - 1e-12) {
        return Err(Error::ConstructionFailed("sample left the well-conditioned band".into()));
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gm(p: usize, m: usize, sparsity: Option<(usize, usize)>) -> ModelSpec {
        ModelSpec::GaussianMean {
            p,
            m,
            sigma: 1.0,
            sparsity: sparsity.map(|(k, s)| Sparsity { k, s }),
            noise: Noise::Gaussian,
        }
    }

    #[test]
    fn zero_is_member_everywhere() {
        let specs = [
            gm(3, 3, Some((1, 1))),
            ModelSpec::Covariance { k: 3, n: 10, lambda: 1.0 },
            ModelSpec::Poisson { k: 3, s: 3, lambda: 1.0 },
            ModelSpec::Completion { k: 3, s: 3, r: 1, a: 1.0, sigma: 1.0, n: 4, without_replacement: false },
        ];
        for spec in &specs {
            assert!(member(spec, &Matrix::zeros(3, 3)).unwrap(), "{spec:?}");
        }
    }

    #[test]
    fn membership_examples() {
        let two_rows = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0]]).unwrap();
        assert!(!member(&gm(2, 2, Some((1, 1))), &two_rows).unwrap());
        let cov = ModelSpec::Covariance { k: 2, n: 5, lambda: 1.0 };
        assert!(!member(&cov, &Matrix::from_diag(2, 2, &[1.5, 0.5])).unwrap());
        assert!(member(&cov, &Matrix::from_diag(2, 2, &[1.0, 0.5])).unwrap());
        assert!(!member(&cov, &Matrix::from_diag(2, 2, &[1.0, -0.5])).unwrap());
        assert!(matches!(member(&cov, &Matrix::zeros(3, 3)), Err(Error::Dimension(_))));
        let comp = ModelSpec::Completion { k: 2, s: 2, r: 1, a: 2.0, sigma: 1.0, n: 2, without_replacement: false };
        assert!(member(&comp, &Matrix::filled(2, 2, 1.0)).unwrap());
        assert!(!member(&comp, &Matrix::identity(2)).unwrap());
        assert!(!member(&comp, &Matrix::filled(2, 2, 3.0)).unwrap());
        let pois = ModelSpec::Poisson { k: 1, s: 2, lambda: 2.0 };
        assert!(!member(&pois, &Matrix::from_rows(&[[1.0, 2.5]]).unwrap()).unwrap());
    }

    #[test]
    fn gaussian_kl_examples() {
        let a = Matrix::filled(2, 2, 1.0);
        assert_eq!(kl_gaussian_mean(&a, &a, 1.0).unwrap().value, 0.0);
        let kl = kl_gaussian_mean(&a, &Matrix::zeros(2, 2), 1.0).unwrap();
        assert_eq!(kl, KlResult { value: 2.0, exact: true });
        assert!(kl_gaussian_mean(&a, &Matrix::zeros(2, 3), 1.0).is_err());
    }

    #[test]
    fn covariance_kl_examples() {
        let i = Matrix::identity(2);
        assert!(kl_covariance(&i, &i).unwrap().value.abs() < 1e-15);
        let kl = kl_covariance(&i.scale(2.0), &i).unwrap().value;
        assert!((kl - (1.0 - 2f64.ln())).abs() < 1e-12);
        let singular = Matrix::from_diag(2, 2, &[1.0, 0.0]);
        assert!(matches!(kl_covariance(&i, &singular), Err(Error::SingularMatrix(_))));
    }

    #[test]
    fn poisson_kl_examples() {
        let l = Matrix::filled(2, 2, 3.0);
        assert_eq!(kl_poisson(&l, &l).unwrap().value, 0.0);
        let kl = kl_poisson(&Matrix::filled(1, 1, 2.0), &Matrix::filled(1, 1, 1.0)).unwrap().value;
        assert!((kl - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-12);
        assert!(matches!(
            kl_poisson(&Matrix::filled(1, 1, 1.0), &Matrix::zeros(1, 1)),
            Err(Error::InfiniteKl(_))
        ));
        // 0·log 0 = 0
        let kl = kl_poisson(&Matrix::zeros(1, 1), &Matrix::filled(1, 1, 2.0)).unwrap().value;
        assert!((kl - 2.0).abs() < 1e-15);
    }

    #[test]
    fn completion_kl_examples() {
        let a = Matrix::filled(2, 2, 1.0);
        assert_eq!(kl_completion_upper(&a, &a, 3, 1.0).unwrap().bound.value, 0.0);
        let one = Matrix::filled(1, 1, 2.0);
        let kl = kl_completion_upper(&one, &Matrix::zeros(1, 1), 1, 1.0).unwrap();
        assert_eq!(kl.bound.value, kl_gaussian_mean(&one, &Matrix::zeros(1, 1), 1.0).unwrap().value);
        let kl = kl_completion_upper(&a, &Matrix::zeros(2, 2), 4, 1.0).unwrap();
        let expect = (1.0 - 0.75f64.powi(4)) / 2.0 * 4.0;
        assert!((kl.bound.value - expect).abs() < 1e-12);
        assert!((kl.bound.value - 1.3671875).abs() < 1e-12);
        assert_eq!(kl.loose_bound, 2.0);
        assert!(!kl.bound.exact);
    }

    #[test]
    fn noiseless_observations() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [0.0, -2.0]]).unwrap();
        let spec = ModelSpec::GaussianMean { p: 2, m: 2, sigma: 0.0, sparsity: None, noise: Noise::Gaussian };
        let obs = sample_observation(&spec, &m, Seed::new(1, 0)).unwrap();
        assert_eq!(obs.as_matrix().unwrap(), &m);

        let spec = ModelSpec::Completion { k: 2, s: 2, r: 2, a: 3.0, sigma: 0.0, n: 4, without_replacement: false };
        let Observation::Completion { samples } = sample_observation(&spec, &m, Seed::new(2, 0)).unwrap() else {
            panic!("expected completion samples");
        };
        assert_eq!(samples.len(), 4);
        for s in samples {
            assert_eq!(s.value, m.get(s.row - 1, s.col - 1));
        }
    }

    #[test]
    fn without_replacement_sites_are_distinct() {
        let m = Matrix::zeros(3, 3);
        let spec = ModelSpec::Completion { k: 3, s: 3, r: 1, a: 1.0, sigma: 1.0, n: 9, without_replacement: true };
        let Observation::Completion { samples } = sample_observation(&spec, &m, Seed::new(3, 0)).unwrap() else {
            panic!()
        };
        let mut sites: Vec<_> = samples.iter().map(|s| (s.row, s.col)).collect();
        sites.sort();
        sites.dedup();
        assert_eq!(sites.len(), 9);
    }

    #[test]
    fn non_member_is_rejected() {
        let spec = ModelSpec::Poisson { k: 1, s: 1, lambda: 1.0 };
        assert!(matches!(
            sample_observation(&spec, &Matrix::filled(1, 1, 2.0), Seed::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn kr_ball_small_radius() {
        let s = kr_ball_sample(4, 2.0, 1e-14, Seed::new(1, 0)).unwrap();
        assert!((&s - &Matrix::identity(4)).max_abs() < 1e-6);
        let spec = ModelSpec::Covariance { k: 4, n: 10, lambda: 2.0 };
        for i in 0..20 {
            let s = kr_ball_sample(4, 2.0, 0.3, Seed::new(2, i)).unwrap();
            assert!(member(&spec, &s).unwrap());
        }
        assert!(kr_ball_sample(4, 2.0, 0.0, Seed::default()).is_err());
    }

    #[test]
    fn spec_json_schema() {
        let spec: ModelSpec = serde_json::from_str(r#"{"model":"poisson","k":3,"s":4,"lambda":2.5}"#).unwrap();
        assert_eq!(spec, ModelSpec::Poisson { k: 3, s: 4, lambda: 2.5 });
        let spec: ModelSpec =
            serde_json::from_str(r#"{"model":"gaussian_mean","p":5,"m":6,"sigma":1,"sparsity":{"k":2,"s":3}}"#)
                .unwrap();
        assert!(spec.validate().is_ok());
        let bad: ModelSpec =
            serde_json::from_str(r#"{"model":"completion","k":2,"s":2,"r":3,"a":1,"sigma":1,"n":2}"#).unwrap();
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
}
