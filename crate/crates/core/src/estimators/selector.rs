//! The ψ-threshold subset selector.
//!
//! A pair `A×B` (|A| = k, |B| = s) is admissible when every block `F×G` lying
//! in the complement of `A×B` (that is, `F ∩ A = ∅` or `G ∩ B = ∅`) with
//! `|F| ≤ k`, `|G| ≤ s` satisfies `‖Y_FG‖_τ ≤ σ ψ(|F|, |G|)`.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::subsets::{binomial, to_mask, Combinations};
use crate::error::{Error, Result};
use crate::gauges::GaugeContext;
use crate::matcore::{svd_values, IndexSet, Matrix, Seed};

/// Smallest admissible leading constant, `√(6 + 2√(2π))`.
pub fn c1_min() -> f64 {
    (6.0 + 2.0 * (2.0 * std::f64::consts::PI).sqrt()).sqrt()
}

pub const DEFAULT_C1: f64 = 3.33;
pub const DEFAULT_GAMMA: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SearchMode {
    /// Certified search over every candidate and every block.
    Exhaustive { budget: u64 },
    /// Energy-ranked candidates checked against energy-ranked and random blocks.
    Greedy { random_probes: usize },
}

impl Default for SearchMode {
    fn default() -> Self {
        SearchMode::Greedy { random_probes: 500 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectorTrace {
    pub selected: Option<(IndexSet, IndexSet)>,
    pub empty: bool,
    pub checked_blocks: u64,
    pub mode: SearchMode,
    /// True when membership was not certified by full enumeration.
    pub heuristic: bool,
}

pub(crate) fn psi_formula(tau1: f64, lip: f64, i: usize, j: usize, p: f64, m: f64, gamma: f64, c1: f64) -> f64 {
    let (fi, fj) = (i as f64, j as f64);
    let entropy = fi * (std::f64::consts::E * p / fi).ln() + fj * (std::f64::consts::E * m / fj).ln();
    c1 * tau1 * fi.max(fj).sqrt() + gamma.sqrt() * lip * entropy.sqrt()
}

/// `ψ(i, j) = c₁ τ(1) √(i ∨ j) + √γ L_τ √(i log(ep/i) + j log(em/j))`,
/// with `ctx` already restricted to `k ∧ s` coordinates.
pub fn psi_threshold(ctx: &GaugeContext, i: usize, j: usize, p: usize, m: usize, gamma: f64, c1: f64) -> Result<f64> {
    if i == 0 || i > p || j == 0 || j > m {
        return Err(Error::Domain(format!("need 1 <= i <= {p} and 1 <= j <= {m}, got ({i}, {j})")));
    }
    let lip = ctx.lipschitz()?.value;
    Ok(psi_formula(ctx.at_ones(), lip, i, j, p as f64, m as f64, gamma, c1))
}

/// Tabulated `σψ(i, j)` for `i ≤ k`, `j ≤ s`, plus the restricted gauge.
pub struct Threshold {
    ctx: GaugeContext,
    k: usize,
    s: usize,
    table: Vec<f64>,
}

impl Threshold {
    #[allow(clippy::too_many_arguments)]
    pub fn new(ctx: &GaugeContext, p: usize, m: usize, k: usize, s: usize, gamma: f64, c1: f64, noise: f64) -> Result<Self> {
        if k == 0 || s == 0 || k > p || s > m {
            return Err(Error::Domain(format!("need 1 <= k <= p and 1 <= s <= m, got k={k}, s={s}, p={p}, m={m}")));
        }
        if !(gamma >= DEFAULT_GAMMA) {
            return Err(Error::Config(format!("gamma must be at least 4, got {gamma}")));
        }
        if !(c1 >= c1_min()) {
            return Err(Error::Config(format!("c1 must be at least {:.4}, got {c1}", c1_min())));
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::Domain(format!("noise level must be nonnegative, got {noise}")));
        }
        let ctx = ctx.restrict(k.min(s))?;
        let tau1 = ctx.at_ones();
        let lip = ctx.lipschitz()?.value;
        let mut table = Vec::with_capacity(k * s);
        for i in 1..=k {
            for j in 1..=s {
                table.push(noise * psi_formula(tau1, lip, i, j, p as f64, m as f64, gamma, c1));
            }
        }
        Ok(Self { ctx, k, s, table })
    }

    pub fn psi(&self, i: usize, j: usize) -> f64 {
        self.table[(i - 1) * self.s + (j - 1)]
    }

    pub fn gauge(&self) -> &GaugeContext {
        &self.ctx
    }

    /// Whether `‖Y_FG‖_τ` exceeds `σψ(|F|, |G|)`; both sets 0-based and nonempty.
    pub fn violates(&self, y: &Matrix, rows: &[usize], cols: &[usize]) -> Result<bool> {
        debug_assert!(rows.len() <= self.k && cols.len() <= self.s);
        let block = y.select(rows, cols);
        let norm = self.ctx.eval_sorted(&svd_values(&block)?);
        Ok(norm > self.psi(rows.len(), cols.len()))
    }
}

/// Searches for an admissible `A×B`. `noise` scales the thresholds; `seed`
/// drives the random probes of greedy mode.
#[allow(clippy::too_many_arguments)]
pub fn select_support(
    y: &Matrix,
    k: usize,
    s: usize,
    gamma: f64,
    c1: f64,
    noise: f64,
    ctx: &GaugeContext,
    mode: SearchMode,
    seed: Seed,
) -> Result<SelectorTrace> {
    let (p, m) = y.shape();
    let threshold = Threshold::new(ctx, p, m, k, s, gamma, c1, noise)?;
    match mode {
        SearchMode::Exhaustive { budget } => exhaustive(y, k, s, &threshold, budget),
        SearchMode::Greedy { random_probes } => greedy(y, k, s, &threshold, random_probes, seed),
    }
}

fn blocks_up_to(n: usize, k: usize) -> u128 {
    (1..=k).map(|i| binomial(n, i)).fold(0u128, |a, b| a.saturating_add(b))
}

fn exhaustive(y: &Matrix, k: usize, s: usize, threshold: &Threshold, budget: u64) -> Result<SelectorTrace> {
    let (p, m) = y.shape();
    let candidates = binomial(p, k).saturating_mul(binomial(m, s));
    let blocks = blocks_up_to(p, k).saturating_mul(blocks_up_to(m, s));
    let needed = candidates.max(blocks);
    if needed > budget as u128 {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    if p > 64 || m > 64 {
        return Err(Error::Dimension("exhaustive search supports at most 64 rows and columns".into()));
    }

    // Every violating block, stored as bitmasks.
    let col_sets: Vec<Vec<usize>> = (1..=s).flat_map(|j| Combinations::new(m, j)).collect();
    let mut violating: Vec<(u64, u64)> = Vec::new();
    let mut checked = 0u64;
    for i in 1..=k {
        for rows in Combinations::new(p, i) {
            for cols in &col_sets {
                checked += 1;
                if threshold.violates(y, &rows, cols)? {
                    violating.push((to_mask(&rows), to_mask(cols)));
                }
            }
        }
    }

    // F×G avoids A×B iff F∩A = ∅ or G∩B = ∅.
    let col_candidates: Vec<Vec<usize>> = Combinations::new(m, s).collect();
    for a in Combinations::new(p, k) {
        let a_mask = to_mask(&a);
        let rows_hit: Vec<u64> = violating.iter().filter(|(f, _)| f & a_mask != 0).map(|&(_, g)| g).collect();
        if rows_hit.len() < violating.len() {
            continue;
        }
        for b in &col_candidates {
            let b_mask = to_mask(b);
            if rows_hit.iter().all(|g| g & b_mask != 0) {
                return Ok(SelectorTrace {
                    selected: Some((IndexSet::from_zero_based(p, a)?, IndexSet::from_zero_based(m, b.iter().copied())?)),
                    empty: false,
                    checked_blocks: checked,
                    mode: SearchMode::Exhaustive { budget },
                    heuristic: false,
                });
            }
        }
    }
    Ok(SelectorTrace {
        selected: None,
        empty: true,
        checked_blocks: checked,
        mode: SearchMode::Exhaustive { budget },
        heuristic: false,
    })
}

fn top_by<F: Fn(usize) -> f64>(pool: &[usize], count: usize, energy: F) -> Vec<usize> {
    let mut ranked: Vec<(usize, f64)> = pool.iter().map(|&i| (i, energy(i))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<usize> = ranked.into_iter().take(count).map(|(i, _)| i).collect();
    out.sort_unstable();
    out
}

fn row_energy(y: &Matrix, i: usize, cols: &[usize]) -> f64 {
    cols.iter().map(|&j| y.get(i, j).powi(2)).sum()
}

fn col_energy(y: &Matrix, j: usize, rows: &[usize]) -> f64 {
    rows.iter().map(|&i| y.get(i, j).powi(2)).sum()
}

/// Energy-ranked candidate pairs: alternating refinement started from rows
/// and from columns.
fn greedy_candidates(y: &Matrix, k: usize, s: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let (p, m) = y.shape();
    let all_rows: Vec<usize> = (0..p).collect();
    let all_cols: Vec<usize> = (0..m).collect();
    let mut out: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut push = |c: (Vec<usize>, Vec<usize>)| {
        if !out.contains(&c) {
            out.push(c);
        }
    };
    for rows_first in [true, false] {
        let mut a = top_by(&all_rows, k, |i| row_energy(y, i, &all_cols));
        let mut b = top_by(&all_cols, s, |j| col_energy(y, j, &all_rows));
        if rows_first {
            b = top_by(&all_cols, s, |j| col_energy(y, j, &a));
        } else {
            a = top_by(&all_rows, k, |i| row_energy(y, i, &b));
        }
        push((a.clone(), b.clone()));
        for _ in 0..4 {
            let next_a = top_by(&all_rows, k, |i| row_energy(y, i, &b));
            let next_b = top_by(&all_cols, s, |j| col_energy(y, j, &next_a));
            if next_a == a && next_b == b {
                break;
            }
            a = next_a;
            b = next_b;
            push((a.clone(), b.clone()));
        }
    }
    out
}

fn greedy(y: &Matrix, k: usize, s: usize, threshold: &Threshold, probes: usize, seed: Seed) -> Result<SelectorTrace> {
    let (p, m) = y.shape();
    let mut rng = seed.rng();
    let mut checked = 0u64;
    let all_rows: Vec<usize> = (0..p).collect();
    let all_cols: Vec<usize> = (0..m).collect();

    'candidates: for (a, b) in greedy_candidates(y, k, s) {
        let free_rows: Vec<usize> = all_rows.iter().copied().filter(|i| !a.contains(i)).collect();
        let free_cols: Vec<usize> = all_cols.iter().copied().filter(|j| !b.contains(j)).collect();
        // Region 1: rows outside A, any columns. Region 2: any rows, columns outside B.
        let regions: [(&[usize], &[usize]); 2] = [(&free_rows, &all_cols), (&all_rows, &free_cols)];

        for (rows, cols) in regions {
            if rows.is_empty() || cols.is_empty() {
                continue;
            }
            let ranked_rows = sort_by_energy(rows.to_vec(), |i| row_energy(y, i, cols));
            for i in 1..=k.min(rows.len()) {
                let f = sorted(&ranked_rows[..i]);
                let ranked_cols = sort_by_energy(cols.to_vec(), |j| col_energy(y, j, &f));
                for jn in 1..=s.min(cols.len()) {
                    let g = sorted(&ranked_cols[..jn]);
                    checked += 1;
                    if threshold.violates(y, &f, &g)? {
                        continue 'candidates;
                    }
                }
            }
        }

        for _ in 0..probes {
            let (rows, cols) = regions[rng.random_range(0..2)];
            if rows.is_empty() || cols.is_empty() {
                continue;
            }
            let i = rng.random_range(1..=k.min(rows.len()));
            let jn = rng.random_range(1..=s.min(cols.len()));
            let f = sorted(&index::sample(&mut rng, rows.len(), i).into_iter().map(|t| rows[t]).collect::<Vec<_>>());
            let g = sorted(&index::sample(&mut rng, cols.len(), jn).into_iter().map(|t| cols[t]).collect::<Vec<_>>());
            checked += 1;
            if threshold.violates(y, &f, &g)? {
                continue 'candidates;
            }
        }

        return Ok(SelectorTrace {
            selected: Some((IndexSet::from_zero_based(p, a)?, IndexSet::from_zero_based(m, b)?)),
            empty: false,
            checked_blocks: checked,
            mode: SearchMode::Greedy { random_probes: probes },
            heuristic: true,
        });
    }
    Ok(SelectorTrace {
        selected: None,
        empty: true,
        checked_blocks: checked,
        mode: SearchMode::Greedy { random_probes: probes },
        heuristic: true,
    })
}

fn sort_by_energy<F: Fn(usize) -> f64>(mut v: Vec<usize>, energy: F) -> Vec<usize> {
    v.sort_by(|&a, &b| energy(b).total_cmp(&energy(a)).then(a.cmp(&b)));
    v
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}
