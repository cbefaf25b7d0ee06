//! Browser bindings. Each export returns a JSON string; the `*_json`
//! functions hold the logic so they can be exercised without a JS runtime.

use gaugerisk::estimators::{select_support, SearchMode, Threshold, DEFAULT_C1, DEFAULT_GAMMA};
use gaugerisk::gauges::GaugeContext;
use gaugerisk::geometry::rate_submatrix;
use gaugerisk::matcore::{sample_ensemble, EnsembleSpec, IndexSet, Matrix, Seed};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Out = Result<String, String>;

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct GaugeView {
    gauge: String,
    norm: f64,
    dual_norm: f64,
    at_ones: f64,
    lipschitz: f64,
    /// Boundary of the unit ball of the gauge on ℝ², counterclockwise.
    ball: Vec<[f64; 2]>,
    dual_ball: Vec<[f64; 2]>,
}

fn unit_circle_boundary(ctx: &GaugeContext, points: usize) -> Result<Vec<[f64; 2]>, String> {
    (0..points)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / points as f64;
            let (x, y) = (t.cos(), t.sin());
            let r = ctx.eval(&[x, y]).map_err(text)?;
            Ok([x / r, y / r])
        })
        .collect()
}

/// Norm, dual norm and constants of `gauge` at `values`, plus the planar unit balls.
pub fn explore_gauge_json(gauge: &str, values: &[f64]) -> Out {
    if values.is_empty() {
        return Err("enter at least one value".into());
    }
    let ctx = GaugeContext::parse(gauge, values.len()).map_err(text)?;
    let dual = ctx.dual();
    let planar = GaugeContext::parse(gauge, 2).map_err(text)?;
    let view = GaugeView {
        gauge: gauge.to_string(),
        norm: ctx.eval(values).map_err(text)?,
        dual_norm: dual.eval(values).map_err(text)?,
        at_ones: ctx.at_ones(),
        lipschitz: ctx.lipschitz().map_err(text)?.value,
        ball: unit_circle_boundary(&planar, 200)?,
        dual_ball: unit_circle_boundary(&planar.dual(), 200)?,
    };
    serde_json::to_string(&view).map_err(text)
}

#[derive(Serialize)]
struct RatePoint {
    k: usize,
    oracle: f64,
    excess: f64,
    total: f64,
}

/// Submatrix-sparsity rate at `k = s = 1..=k_max` for a `p x m` mean.
pub fn rate_curve_json(gauge: &str, p: usize, m: usize, k_max: usize) -> Out {
    if k_max == 0 || k_max > p.min(m) {
        return Err(format!("k_max must lie in [1, {}]", p.min(m)));
    }
    let ctx = GaugeContext::parse(gauge, p.min(m)).map_err(text)?;
    let points = (1..=k_max)
        .map(|k| {
            let r = rate_submatrix(&ctx, k, k, p, m).map_err(text)?;
            Ok(RatePoint { k, oracle: r.oracle, excess: r.excess, total: r.total })
        })
        .collect::<Result<Vec<_>, String>>()?;
    serde_json::to_string(&points).map_err(text)
}

#[derive(Serialize)]
struct SelectorView {
    rows: usize,
    cols: usize,
    /// Row-major observation.
    y: Vec<f64>,
    truth_rows: Vec<usize>,
    truth_cols: Vec<usize>,
    selected_rows: Vec<usize>,
    selected_cols: Vec<usize>,
    empty: bool,
    threshold: f64,
    heuristic: bool,
}

/// Plants a `k x k` block of Frobenius norm `signal · ψ(k, k)` in unit noise
/// and runs the greedy selector.
pub fn selector_demo_json(gauge: &str, p: usize, k: usize, signal: f64, seed: u32) -> Out {
    if !(1..=64).contains(&p) || k == 0 || k > p {
        return Err("need 1 <= k <= p <= 64".into());
    }
    let seed = Seed::new(seed as u64, 0);
    let ctx = GaugeContext::parse(gauge, p).map_err(text)?;
    let threshold = Threshold::new(&ctx, p, p, k, k, DEFAULT_GAMMA, DEFAULT_C1, 1.0).map_err(text)?;
    let psi = threshold.psi(k, k);
    let noise = sample_ensemble(&EnsembleSpec::GaussianIid { rows: p, cols: p, sigma: 1.0 }, seed).map_err(text)?;
    let block = sample_ensemble(&EnsembleSpec::GaussianIid { rows: k, cols: k, sigma: 1.0 }, seed.with_stream(1)).map_err(text)?;
    let block = block.scale(signal * psi / block.frobenius_norm().max(f64::MIN_POSITIVE));
    // Support chosen by a fixed stride so the demo is reproducible without extra draws.
    let offset = seed.master as usize % p;
    let truth_rows: Vec<usize> = (0..k).map(|i| (offset + 3 * i) % p).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let truth_cols: Vec<usize> = (0..k).map(|i| (offset * 7 + 2 * i + 1) % p).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    if truth_rows.len() < k || truth_cols.len() < k {
        return Err("p is too small for a spread-out support; increase p".into());
    }
    let planted = block
        .block_embed(p, p, &IndexSet::from_zero_based(p, truth_rows.clone()).map_err(text)?, &IndexSet::from_zero_based(p, truth_cols.clone()).map_err(text)?)
        .map_err(text)?;
    let y: Matrix = &noise + &planted;
    let trace = select_support(&y, k, k, DEFAULT_GAMMA, DEFAULT_C1, 1.0, &ctx, SearchMode::default(), seed.with_stream(2)).map_err(text)?;
    let (selected_rows, selected_cols) = match &trace.selected {
        Some((a, b)) => (a.zero_based().collect(), b.zero_based().collect()),
        None => (vec![], vec![]),
    };
    let view = SelectorView {
        rows: p,
        cols: p,
        y: y.entries().to_vec(),
        truth_rows,
        truth_cols,
        selected_rows,
        selected_cols,
        empty: trace.empty,
        threshold: psi,
        heuristic: trace.heuristic,
    };
    serde_json::to_string(&view).map_err(text)
}

#[wasm_bindgen]
pub fn explore_gauge(gauge: &str, values: &[f64]) -> Result<String, JsError> {
    explore_gauge_json(gauge, values).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn rate_curve(gauge: &str, p: usize, m: usize, k_max: usize) -> Result<String, JsError> {
    rate_curve_json(gauge, p, m, k_max).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn selector_demo(gauge: &str, p: usize, k: usize, signal: f64, seed: u32) -> Result<String, JsError> {
    selector_demo_json(gauge, p, k, signal, seed).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn gauge_explorer_values() {
        let v: Value = serde_json::from_str(&explore_gauge_json("S1", &[3.0, -4.0]).unwrap()).unwrap();
        assert_eq!(v["norm"], 7.0);
        assert_eq!(v["dual_norm"], 4.0);
        // ℓ1 ball vertex at (1, 0) and edge midpoint at (½, ½).
        let ball = v["ball"].as_array().unwrap();
        assert_eq!(ball.len(), 200);
        assert!((ball[0][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
        let mid = &ball[25]; // angle π/4
        assert!((mid[0].as_f64().unwrap() - 0.5).abs() < 1e-12);
        assert!(explore_gauge_json("S0", &[1.0]).is_err());
        assert!(explore_gauge_json("S2", &[]).is_err());
    }

    #[test]
    fn rate_curve_is_increasing() {
        let v: Value = serde_json::from_str(&rate_curve_json("Sinf", 40, 30, 10).unwrap()).unwrap();
        let totals: Vec<f64> = v.as_array().unwrap().iter().map(|p| p["total"].as_f64().unwrap()).collect();
        assert_eq!(totals.len(), 10);
        assert!(totals.windows(2).all(|w| w[1] > w[0]));
        assert!(rate_curve_json("S2", 5, 5, 6).is_err());
    }

    #[test]
    fn strong_block_is_found() {
        let v: Value = serde_json::from_str(&selector_demo_json("S2", 16, 2, 5.0, 3).unwrap()).unwrap();
        assert_eq!(v["y"].as_array().unwrap().len(), 256);
        assert_eq!(v["selected_rows"], v["truth_rows"]);
        assert_eq!(v["selected_cols"], v["truth_cols"]);
        assert!(v["heuristic"].as_bool().unwrap());
        assert_eq!(selector_demo_json("S2", 16, 2, 5.0, 3).unwrap(), selector_demo_json("S2", 16, 2, 5.0, 3).unwrap());
    }
}
