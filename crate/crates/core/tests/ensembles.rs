use gaugerisk::matcore::{sample_ensemble, EnsembleSpec, Matrix, Seed};

fn moments(spec: &EnsembleSpec, draws: u64, master: u64) -> (f64, f64, f64) {
    let (mut sum, mut sq, mut n) = (0.0, 0.0, 0.0);
    for i in 0..draws {
        for &v in sample_ensemble(spec, Seed::new(master, i)).unwrap().entries() {
            sum += v;
            sq += v * v;
            n += 1.0;
        }
    }
    let mean = sum / n;
    let var = sq / n - mean * mean;
    (mean, var, n)
}

#[test]
fn gaussian_entry_moments() {
    let (mean, var, n) = moments(&EnsembleSpec::GaussianIid { rows: 50, cols: 50, sigma: 1.0 }, 10_000, 1);
    assert!(mean.abs() <= 4.0 * (var / n).sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() <= 0.05, "variance {var}");
}

#[test]
fn poisson_rate_mean() {
    let spec = EnsembleSpec::PoissonRates { lambda: Matrix::filled(4, 4, 3.0) };
    let (mean, var, _) = moments(&spec, 10_000, 2);
    assert!((mean - 3.0).abs() <= 0.05 * 3.0, "mean {mean}");
    assert!((var - 3.0).abs() <= 0.05 * 3.0, "variance {var}");
}

#[test]
fn scaled_student_t_has_requested_variance() {
    let spec = EnsembleSpec::ScaledStudentT { rows: 20, cols: 20, sigma: 2.0, dof: 5.0 };
    let (mean, var, _) = moments(&spec, 5_000, 3);
    assert!(mean.abs() < 0.02, "mean {mean}");
    assert!((var - 4.0).abs() <= 0.05 * 4.0, "variance {var}");
}

#[test]
fn goe_diagonal_and_off_diagonal_variances() {
    // (G + Gᵀ)/2: diagonal variance 1, off-diagonal variance 1/2.
    let (mut diag, mut off) = (0.0, 0.0);
    let draws = 20_000;
    for i in 0..draws {
        let g = sample_ensemble(&EnsembleSpec::Goe { k: 3 }, Seed::new(4, i)).unwrap();
        diag += g.get(0, 0).powi(2);
        off += g.get(0, 1).powi(2);
        assert_eq!(g.get(0, 1), g.get(1, 0));
    }
    let (diag, off) = (diag / draws as f64, off / draws as f64);
    assert!((diag - 1.0).abs() < 0.05, "diag {diag}");
    assert!((off - 0.5).abs() < 0.025, "off {off}");
}

#[test]
fn gaussian_rows_follow_covariance() {
    let sigma = Matrix::from_rows(&[[2.0, 0.6], [0.6, 1.0]]).unwrap();
    let x = sample_ensemble(&EnsembleSpec::GaussianRows { n: 50_000, sigma: sigma.clone() }, Seed::new(5, 0)).unwrap();
    let s = x.transpose().matmul(&x).unwrap().scale(1.0 / 50_000.0);
    for i in 0..2 {
        for j in 0..2 {
            assert!((s.get(i, j) - sigma.get(i, j)).abs() < 0.05, "({i},{j}) {}", s.get(i, j));
        }
    }
}
