use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::dispersion::{construct_dispersion, dispersion_constants, DispersionOptions};
use crate::error::{Error, Result};
use crate::gauges::GaugeContext;
use crate::matcore::{IndexSet, Matrix, Seed};

/// Default number of row supports requested in the dispersion branch.
const DISPERSION_TARGET: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PackingBranch {
    /// Scaled standard basis matrices `e_i e₁ᵀ` (or `e₁ e_jᵀ`).
    Basis,
    /// A dispersion matrix placed on nearly disjoint row supports.
    Dispersion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingFamily {
    pub members: Vec<Matrix>,
    /// Smallest `‖M_a − M_b‖_τ` over all pairs, computed exhaustively.
    pub min_pairwise_norm: f64,
    pub gauge: String,
    pub log_cardinality: f64,
    /// Separation constant `c₀/3 ∧ 1/√50`; members are at least `c₁ L` apart.
    pub c1: f64,
    /// `L_{τ|r}` with `r = k ∧ s`.
    pub lipschitz: f64,
    pub branch: PackingBranch,
}

/// Greedy random family of `k`-subsets of `[p]` with pairwise overlaps at most `k0`.
pub fn subset_family_gv(p: usize, k: usize, k0: usize, target: usize, seed: Seed) -> Result<Vec<IndexSet>> {
    if !(k0 < k && k <= p) {
        return Err(Error::Domain(format!("need k0 < k <= p, got k0={k0}, k={k}, p={p}")));
    }
    let mut rng = seed.rng();
    let mut family: Vec<IndexSet> = Vec::new();
    let mut rejections = 0usize;
    let max_rejections = 50 * target;
    while family.len() < target && rejections < max_rejections {
        let cand = IndexSet::from_zero_based(p, index::sample(&mut rng, p, k).into_vec())?;
        if family.iter().all(|t| t.intersection_len(&cand) <= k0) {
            family.push(cand);
        } else {
            rejections += 1;
        }
    }
    Ok(family)
}

/// A packing of `B₂ ∩ {row support ≤ k, column support ≤ s}` in `p x m`
/// matrices, separated in `ctx` (a gauge on `ℝ^{p∧m}`).
pub fn construct_packing(p: usize, m: usize, k: usize, s: usize, ctx: &GaugeContext, seed: Seed) -> Result<PackingFamily> {
    if k == 0 || s == 0 || k > p || s > m {
        return Err(Error::Domain(format!("need 1 <= k <= p and 1 <= s <= m, got k={k}, s={s}, p={p}, m={m}")));
    }
    if ctx.dim() < p.min(m) {
        return Err(Error::Dimension(format!("gauge on R^{} cannot measure {p}x{m} matrices", ctx.dim())));
    }
    let r = k.min(s);
    let tau_r = ctx.restrict(r)?;
    let lipschitz = tau_r.lipschitz()?.value;
    let opts = DispersionOptions::default();
    let (_, c0) = dispersion_constants(opts.block_constant);
    let c1 = (c0 / 3.0).min(1.0 / 50f64.sqrt());

    let (members, branch) = if k < 50 {
        let unit = |rows: usize, cols: usize, i: usize, j: usize| {
            let mut v = Matrix::zeros(rows, cols);
            v.set(i, j, 1.0);
            v
        };
        let members: Vec<Matrix> = if p >= m {
            (0..p).map(|i| unit(p, m, i, 0)).collect()
        } else {
            (0..m).map(|j| unit(p, m, 0, j)).collect()
        };
        (members, PackingBranch::Basis)
    } else {
        // D = diag of the flat prefix vector attaining L_{τ|r}, unit Frobenius norm.
        let best = (1..=r)
            .max_by(|&a, &b| {
                let f = |l: usize| tau_r.eval_sorted(&vec![1.0; l]) / (l as f64).sqrt();
                f(a).total_cmp(&f(b))
            })
            .expect("r >= 1");
        let diag = vec![1.0 / (best as f64).sqrt(); best];
        let d = Matrix::from_diag(k, s, &diag);
        let disp = construct_dispersion(&d, std::slice::from_ref(&tau_r), seed.derive(1), opts)?;
        let supports = subset_family_gv(p, k, disp.j_removed, DISPERSION_TARGET, seed.derive(2))?;
        let cols = IndexSet::full(s).members().to_vec();
        let cols = IndexSet::new(m, cols)?;
        let members = supports
            .iter()
            .map(|rows| disp.w.block_embed(p, m, rows, &cols))
            .collect::<Result<Vec<Matrix>>>()?;
        (members, PackingBranch::Dispersion)
    };
    if members.len() < 2 {
        return Err(Error::ConstructionFailed(format!("family has {} member(s)", members.len())));
    }

    let mut min_pairwise = f64::INFINITY;
    for a in 0..members.len() {
        for b in a + 1..members.len() {
            min_pairwise = min_pairwise.min(compact_distance(ctx, &members[a], &members[b])?);
        }
    }
    Ok(PackingFamily {
        log_cardinality: (members.len() as f64).ln(),
        members,
        min_pairwise_norm: min_pairwise,
        gauge: ctx.gauge().to_string(),
        c1,
        lipschitz,
        branch,
    })
}

/// `‖A − B‖_τ` computed on the union of the supports.
fn compact_distance(ctx: &GaugeContext, a: &Matrix, b: &Matrix) -> Result<f64> {
    let diff = a.try_sub(b)?;
    let rows = diff.row_support();
    let cols = diff.col_support();
    if rows.is_empty() {
        return Ok(0.0);
    }
    let rows: Vec<usize> = rows.into_iter().map(|i| i - 1).collect();
    let cols: Vec<usize> = cols.into_iter().map(|j| j - 1).collect();
    ctx.norm(&diff.select(&rows, &cols))
}
