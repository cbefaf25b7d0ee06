//! Derivative-free maximization of degree-0 homogeneous functions on the
//! nonnegative part of the unit sphere.
//!
//! Both numeric quantities we need from an arbitrary symmetric gauge reduce to
//! this form: the Lipschitz constant is `sup τ(y)/‖y‖₂` and the dual norm at `x`
//! is `sup ⟨x, y⟩/τ(y)`. Symmetry under sign flips lets us restrict to `y ≥ 0`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::matcore::Seed;

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    /// Random starting points in addition to the `dim` flat prefix vectors.
    pub random_starts: usize,
    /// Pattern search stops once its mesh falls below this.
    pub mesh_tol: f64,
    pub seed: u64,
}

impl SearchOptions {
    pub const LIPSCHITZ: SearchOptions = SearchOptions {
        random_starts: 64,
        mesh_tol: 1e-7,
        seed: 0x11b5,
    };
    pub const DUAL: SearchOptions = SearchOptions {
        random_starts: 32,
        mesh_tol: 1e-8,
        seed: 0xd0a1,
    };
}

#[derive(Clone, Debug)]
pub struct Maximum {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// Final mesh of the pattern search for the winning start.
    pub mesh: f64,
}

pub fn maximize_on_sphere(dim: usize, f: &dyn Fn(&[f64]) -> f64, opts: SearchOptions) -> Maximum {
    assert!(dim > 0);
    let dirs = directions(dim);
    let mut rng = Seed::new(opts.seed, dim as u64).rng();

    let mut starts: Vec<Vec<f64>> = (1..=dim)
        .map(|l| {
            let mut v = vec![0.0; dim];
            v[..l].iter_mut().for_each(|x| *x = 1.0);
            v
        })
        .collect();
    for _ in 0..opts.random_starts {
        starts.push((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect());
    }

    let mut best: Option<Maximum> = None;
    for start in starts {
        let Some(y) = normalize(start) else { continue };
        let local = pattern_search(y, f, &dirs, opts.mesh_tol);
        if best.as_ref().is_none_or(|b| local.value > b.value) {
            best = Some(local);
        }
    }
    best.expect("at least one start is nonzero")
}

fn directions(dim: usize) -> Vec<Vec<f64>> {
    let unit = |i: usize| {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    };
    let mut out: Vec<Vec<f64>> = (0..dim).map(unit).collect();
    let pairs: Vec<(usize, usize)> = if dim <= 16 {
        (0..dim).flat_map(|i| (i + 1..dim).map(move |j| (i, j))).collect()
    } else {
        (0..dim - 1).map(|i| (i, i + 1)).chain((2..dim).map(|j| (0, j))).collect()
    };
    for (i, j) in pairs {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v[j] = -1.0;
        out.push(v);
    }
    out
}

fn normalize(mut y: Vec<f64>) -> Option<Vec<f64>> {
    y.iter_mut().for_each(|v| *v = v.max(0.0));
    let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    y.iter_mut().for_each(|v| *v /= n);
    Some(y)
}

fn pattern_search(mut y: Vec<f64>, f: &dyn Fn(&[f64]) -> f64, dirs: &[Vec<f64>], mesh_tol: f64) -> Maximum {
    let mut value = f(&y);
    let mut step = 0.5;
    while step > mesh_tol {
        let mut improved = false;
        for dir in dirs {
            for sign in [1.0, -1.0] {
                // Keep moving while the direction pays off.
                for _ in 0..64 {
                    let cand: Vec<f64> = y.iter().zip(dir).map(|(a, d)| a + sign * step * d).collect();
                    let Some(cand) = normalize(cand) else { break };
                    let v = f(&cand);
                    if v > value + 1e-15 * value.abs() {
                        y = cand;
                        value = v;
                        improved = true;
                    } else {
                        break;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Maximum {
        value,
        argmax: y,
        mesh: step,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_lq_ratios() {
        // sup ‖y‖₁/‖y‖₂ = √d, reached at the flat vector.
        let f = |y: &[f64]| y.iter().sum::<f64>() / y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let m = maximize_on_sphere(6, &f, SearchOptions::LIPSCHITZ);
        assert!((m.value - 6f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn smooth_interior_maximum() {
        // sup ⟨x, y⟩/‖y‖₂ = ‖x‖₂ at y = x/‖x‖₂, not a prefix vector.
        let x = [0.3, 1.7, 0.9, 2.2];
        let f = |y: &[f64]| {
            y.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / y.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let m = maximize_on_sphere(4, &f, SearchOptions { random_starts: 8, ..SearchOptions::DUAL });
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((m.value - norm).abs() < 1e-9, "{} vs {norm}", m.value);
    }
}
