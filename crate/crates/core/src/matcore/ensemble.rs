use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use super::{linalg, Matrix, Seed};
use crate::error::{Error, Result};

/// Random matrix families used by the models and constructions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleSpec {
    /// `rows x cols` with i.i.d. `N(0, sigma²)` entries.
    GaussianIid { rows: usize, cols: usize, sigma: f64 },
    /// `(G + Gᵀ)/2` for `k x k` standard Gaussian `G`.
    Goe { k: usize },
    /// `n` rows drawn independently from `N(0, Σ)`.
    GaussianRows { n: usize, sigma: Matrix },
    /// Independent `Poisson(λ_ij)` counts.
    PoissonRates { lambda: Matrix },
    /// Student-t entries rescaled to variance `sigma²`; requires `dof > 2`.
    ScaledStudentT { rows: usize, cols: usize, sigma: f64, dof: f64 },
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(msg.to_string()));
        match self {
            Self::GaussianIid { rows, cols, sigma } => {
                if *rows == 0 || *cols == 0 {
                    return bad("dimensions must be positive");
                }
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    return bad("sigma must be a nonnegative finite number");
                }
            }
            Self::Goe { k } => {
                if *k == 0 {
                    return bad("k must be positive");
                }
            }
            Self::GaussianRows { n, sigma } => {
                if *n == 0 {
                    return bad("n must be positive");
                }
                linalg::psd_factor(sigma)?;
            }
            Self::PoissonRates { lambda } => {
                if lambda.entries().iter().any(|&v| v < 0.0) {
                    return bad("Poisson rates must be nonnegative");
                }
            }
            Self::ScaledStudentT { rows, cols, sigma, dof } => {
                if *rows == 0 || *cols == 0 {
                    return bad("dimensions must be positive");
                }
                if !(sigma.is_finite() && *sigma >= 0.0) || !(*dof > 2.0) {
                    return bad("need sigma >= 0 and dof > 2");
                }
            }
        }
        Ok(())
    }
}

/// One draw from `spec`, a pure function of `(spec, seed)`.
pub fn sample_ensemble(spec: &EnsembleSpec, seed: Seed) -> Result<Matrix> {
    spec.validate()?;
    let mut rng = seed.rng();
    sample_with(spec, &mut rng)
}

pub(crate) fn sample_with<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<Matrix> {
    match spec {
        EnsembleSpec::GaussianIid { rows, cols, sigma } => Ok(gaussian(*rows, *cols, *sigma, rng)),
        EnsembleSpec::Goe { k } => Ok(goe(*k, rng)),
        EnsembleSpec::GaussianRows { n, sigma } => {
            let factor = linalg::psd_factor(sigma)?;
            let k = sigma.rows();
            let z = DMatrix::from_fn(*n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
            Ok(Matrix::from_nalgebra(&(z * factor.transpose())))
        }
        EnsembleSpec::PoissonRates { lambda } => {
            let mut entries = Vec::with_capacity(lambda.entries().len());
            for &rate in lambda.entries() {
                entries.push(poisson_draw(rate, rng)?);
            }
            Matrix::new(lambda.rows(), lambda.cols(), entries)
        }
        EnsembleSpec::ScaledStudentT { rows, cols, sigma, dof } => {
            let t = StudentT::new(*dof).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let scale = sigma * ((dof - 2.0) / dof).sqrt();
            Matrix::from_fn(*rows, *cols, |_, _| scale * t.sample(rng))
        }
    }
}

pub(crate) fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, sigma: f64, rng: &mut R) -> Matrix {
    let entries = (0..rows * cols)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::new(rows, cols, entries).expect("gaussian draws are finite")
}

pub(crate) fn goe<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Matrix {
    let g = gaussian(k, k, 1.0, rng);
    let mut out = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let v = 0.5 * (g.get(i, j) + g.get(j, i));
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    out
}

pub(crate) fn poisson_draw<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<f64> {
    if rate == 0.0 {
        return Ok(0.0);
    }
    let dist = Poisson::new(rate).map_err(|e| Error::InvalidSpec(format!("rate {rate}: {e}")))?;
    Ok(dist.sample(rng))
}

/// Haar-distributed orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal(n: usize, seed: Seed) -> Matrix {
    let mut rng = seed.rng();
    let g = gaussian(n, n, 1.0, &mut rng).to_nalgebra();
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Matrix::from_nalgebra(&q)
}
