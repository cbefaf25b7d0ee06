//! Random matrices that spread the energy of `D` evenly over their rows, so
//! that deleting a few rows keeps a fixed fraction of every unitarily
//! invariant norm.

use serde::{Deserialize, Serialize};

use crate::estimators::subsets::{binomial, Combinations};
use crate::error::{Error, Result};
use crate::gauges::GaugeContext;
use crate::matcore::{gaussian, linalg, svd_values, Matrix, Seed};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionOptions {
    /// The integer `K`; the top `⌈r/2K⌉` singular directions are used and
    /// `⌈k/2K⌉` rows may be removed.
    pub block_constant: usize,
    /// Random row subsets checked per attempt.
    pub num_trials: usize,
    pub max_retries: usize,
    /// Every row subset is also checked when their number is at most this.
    pub exhaustive_limit: u64,
}

impl Default for DispersionOptions {
    fn default() -> Self {
        Self { block_constant: 25, num_trials: 1000, max_retries: 64, exhaustive_limit: 10_000 }
    }
}

/// `(c, c₀)` with `c = (√(K−1) − √((K−1)/2) − 1)/(2K)` and `c₀ = (c ∧ 1)/(2K)`.
pub fn dispersion_constants(block_constant: usize) -> (f64, f64) {
    let k = block_constant as f64;
    let c = ((k - 1.0).sqrt() - ((k - 1.0) / 2.0).sqrt() - 1.0) / (2.0 * k);
    (c, c.min(1.0) / (2.0 * k))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub sampled: usize,
    pub sampled_passed: usize,
    /// Number of row subsets checked by enumeration; zero when skipped.
    pub enumerated: u64,
    pub enumerated_passed: u64,
    /// Per gauge, the smallest observed `‖W_B‖_τ / ‖D‖_τ`.
    pub min_ratio: Vec<(String, f64)>,
    /// Attempts discarded before success.
    pub retries: usize,
    pub frobenius_ok: bool,
}

impl Certificate {
    pub fn pass_rate(&self) -> f64 {
        let total = self.sampled as f64 + self.enumerated as f64;
        if total == 0.0 {
            return 1.0;
        }
        (self.sampled_passed as f64 + self.enumerated_passed as f64) / total
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionResult {
    pub w: Matrix,
    pub c0: f64,
    pub j_removed: usize,
    pub certificate: Certificate,
}

struct Checker<'a> {
    gauges: &'a [GaugeContext],
    targets: Vec<f64>,
    d_norms: Vec<f64>,
    scale: f64,
}

impl Checker<'_> {
    /// Returns per-gauge ratios and whether all of them meet `c₀`.
    fn check(&self, h: &Matrix, kept: &[usize]) -> Result<(bool, Vec<f64>)> {
        let cols: Vec<usize> = (0..h.cols()).collect();
        let values: Vec<f64> = svd_values(&h.select(kept, &cols))?.into_iter().map(|v| v * self.scale).collect();
        let mut ok = true;
        let mut ratios = Vec::with_capacity(self.gauges.len());
        for ((ctx, &target), &dn) in self.gauges.iter().zip(&self.targets).zip(&self.d_norms) {
            let norm = ctx.eval_sorted(&values);
            ok &= norm >= target;
            ratios.push(if dn > 0.0 { norm / dn } else { f64::INFINITY });
        }
        Ok((ok, ratios))
    }
}

/// Builds `W` with `‖W‖_F ≤ ‖D‖_F` and `‖W_{B*}‖_τ ≥ c₀‖D‖_τ` for row sets `B`
/// with `k − ⌈k/2K⌉` rows, for each gauge in `gauges`. Requires `k ≥ 50`.
pub fn construct_dispersion(
    d: &Matrix,
    gauges: &[GaugeContext],
    seed: Seed,
    opts: DispersionOptions,
) -> Result<DispersionResult> {
    let (k, s) = d.shape();
    if k < 50 {
        return Err(Error::Domain(format!("dispersion needs at least 50 rows, got {k}")));
    }
    if opts.block_constant < 2 {
        return Err(Error::Config("block constant must be at least 2".into()));
    }
    let r = k.min(s);
    for g in gauges {
        if g.dim() < r {
            return Err(Error::Dimension(format!("gauge on R^{} cannot measure a {k}x{s} matrix", g.dim())));
        }
    }
    let two_k = 2 * opts.block_constant;
    let l = r.div_ceil(two_k);
    let j = k.div_ceil(two_k);
    let (_, c0) = dispersion_constants(opts.block_constant);

    let svd = linalg::svd_full(d)?;
    let top: Vec<f64> = svd.values[..l].to_vec();
    let d_norms = gauges.iter().map(|g| g.norm(d)).collect::<Result<Vec<f64>>>()?;
    let checker = Checker {
        gauges,
        targets: d_norms.iter().map(|n| c0 * n).collect(),
        d_norms: d_norms.clone(),
        scale: 1.0 / (2.0 * (k as f64).sqrt()),
    };
    let enumerate = binomial(k, j) <= opts.exhaustive_limit as u128;

    'attempts: for attempt in 0..opts.max_retries {
        let mut rng = seed.derive(attempt as u64).rng();
        let u = gaussian(k, l, 1.0, &mut rng);
        if svd_values(&u)?[0] > 2.0 * (k as f64).sqrt() {
            continue;
        }
        let h = Matrix::from_fn(k, l, |i, t| u.get(i, t) * top[t])?;
        let mut min_ratio = vec![f64::INFINITY; gauges.len()];
        let mut record = |ratios: Vec<f64>| {
            for (m, r) in min_ratio.iter_mut().zip(ratios) {
                *m = m.min(r);
            }
        };

        for _ in 0..opts.num_trials {
            let removed = rand::seq::index::sample(&mut rng, k, j).into_vec();
            let kept: Vec<usize> = (0..k).filter(|i| !removed.contains(i)).collect();
            let (ok, ratios) = checker.check(&h, &kept)?;
            if !ok {
                continue 'attempts;
            }
            record(ratios);
        }
        let mut enumerated = 0u64;
        if enumerate {
            for removed in Combinations::new(k, j) {
                let kept: Vec<usize> = (0..k).filter(|i| !removed.contains(i)).collect();
                let (ok, ratios) = checker.check(&h, &kept)?;
                if !ok {
                    continue 'attempts;
                }
                record(ratios);
                enumerated += 1;
            }
        }

        // W = U diag(d₁..d_l) V_lᵀ / (2√k); row subsets keep the singular values of H_B.
        let h_na = h.to_nalgebra() * checker.scale;
        let v_l = svd.v_t.rows(0, l);
        let w = Matrix::from_nalgebra(&(h_na * v_l));
        let frobenius_ok = w.frobenius_norm() <= d.frobenius_norm();
        if !frobenius_ok {
            continue;
        }
        let min_ratio = gauges.iter().map(|g| g.gauge().to_string()).zip(min_ratio).collect();
        return Ok(DispersionResult {
            w,
            c0,
            j_removed: j,
            certificate: Certificate {
                sampled: opts.num_trials,
                sampled_passed: opts.num_trials,
                enumerated,
                enumerated_passed: enumerated,
                min_ratio,
                retries: attempt,
                frobenius_ok,
            },
        });
    }
    Err(Error::ConstructionFailed(format!("no valid draw in {} attempts", opts.max_retries)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        let (c, c0) = dispersion_constants(25);
        assert!((c - (24f64.sqrt() - 12f64.sqrt() - 1.0) / 50.0).abs() < 1e-15);
        assert!((c - 0.0087).abs() < 1e-4);
        assert!((c0 - c / 50.0).abs() < 1e-18);
    }

    #[test]
    fn identity_certificate() {
        let d = Matrix::identity(50);
        let gauges: Vec<GaugeContext> = ["S1", "S2", "Sinf"].iter().map(|g| GaugeContext::parse(g, 50).unwrap()).collect();
        let out = construct_dispersion(&d, &gauges, Seed::new(9, 0), DispersionOptions::default()).unwrap();
        assert!(out.w.frobenius_norm() <= d.frobenius_norm());
        assert_eq!(out.j_removed, 1);
        assert_eq!(out.certificate.pass_rate(), 1.0);
        assert_eq!(out.certificate.enumerated, 50);
        // Energy is spread over the rows.
        let norms: Vec<f64> = (0..50).map(|i| out.w.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let mean = norms.iter().sum::<f64>() / 50.0;
        assert!(norms.iter().cloned().fold(0.0, f64::max) <= 5.0 * mean);
    }

    #[test]
    fn small_k_is_rejected() {
        let gauges = [GaugeContext::parse("S2", 10).unwrap()];
        assert!(matches!(
            construct_dispersion(&Matrix::identity(10), &gauges, Seed::default(), DispersionOptions::default()),
            Err(Error::Domain(_))
        ));
    }
}
