//! Exact solvers for the worst-case self-normalized objective
//!
//! ```text
//! Q(r; W) = max_{W ∈ set}  Σ r_i W_i / Σ W_i
//! ```
//!
//! over a box `a_i <= W_i <= b_i`, optionally intersected with a cap on the
//! mean absolute deviation from nominal weights. Every solver works on one
//! treatment arm at a time; callers assemble arms.
//!
//! For the box, the optimum puts units with small `r` at their lower bound
//! and units with large `r` at their upper bound. Sorting by `(r_i, b_i - a_i)`
//! and scanning the split point with prefix sums gives the exact answer in
//! `O(k log k)`.

mod budgeted;
pub mod simplex;

pub use budgeted::{
    solve_budgeted, solve_budgeted_parametric, solve_budgeted_simplex, solve_budgeted_with,
};
pub(crate) use budgeted::parametric_unchecked;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSolution {
    /// Worst-case value of the self-normalized objective.
    pub value: f64,
    /// Attaining weights, in input order.
    pub weights: Vec<f64>,
    /// 1-based split position `k*` in sorted order (box set only): sorted
    /// units before it sit at `a`, the rest at `b`.
    pub threshold: Option<usize>,
    /// Lagrange multiplier of the deviation budget (budgeted set only).
    pub multiplier: Option<f64>,
}

pub(crate) fn validate(r: &[f64], a: &[f64], b: &[f64]) -> Result<()> {
    if r.is_empty() {
        return Err(Error::domain("empty reward vector"));
    }
    if a.len() != r.len() || b.len() != r.len() {
        return Err(Error::domain("r, a and b must have equal length"));
    }
    for i in 0..r.len() {
        if !(r[i].is_finite() && a[i].is_finite() && b[i].is_finite()) {
            return Err(Error::domain(format!("unit {i}: non-finite input")));
        }
        if a[i] <= 0.0 || a[i] > b[i] {
            return Err(Error::domain(format!(
                "unit {i}: need 0 < a <= b, got a = {}, b = {}",
                a[i], b[i]
            )));
        }
    }
    Ok(())
}

/// Units sorted lexicographically by `(r_i, b_i - a_i)`, ties by index.
fn sorted_order(r: &[f64], a: &[f64], b: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&i, &j| {
        r[i].total_cmp(&r[j])
            .then_with(|| (b[i] - a[i]).total_cmp(&(b[j] - a[j])))
            .then(i.cmp(&j))
    });
    order
}

/// `λ` evaluated at every split of the sorted units: entry `j` puts the first
/// `j` sorted units at `a` and the remaining ones at `b` (so `j = k* - 1`).
fn profile_sorted(order: &[usize], r: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let k = order.len();
    let mut suf_num = vec![0.0; k + 1];
    let mut suf_den = vec![0.0; k + 1];
    for p in (0..k).rev() {
        let i = order[p];
        suf_num[p] = suf_num[p + 1] + b[i] * r[i];
        suf_den[p] = suf_den[p + 1] + b[i];
    }
    let mut out = Vec::with_capacity(k + 1);
    let (mut pre_num, mut pre_den) = (0.0, 0.0);
    for p in 0..=k {
        out.push((pre_num + suf_num[p]) / (pre_den + suf_den[p]));
        if p < k {
            let i = order[p];
            pre_num += a[i] * r[i];
            pre_den += a[i];
        }
    }
    out
}

/// The sequence `λ(1), …, λ(k+1)` scanned by [`solve_box`].
pub fn threshold_profile(r: &[f64], a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    validate(r, a, b)?;
    Ok(profile_sorted(&sorted_order(r, a, b), r, a, b))
}

/// Exact maximizer of the self-normalized objective over the box `[a, b]`.
pub fn solve_box(r: &[f64], a: &[f64], b: &[f64]) -> Result<SubproblemSolution> {
    validate(r, a, b)?;
    Ok(solve_box_unchecked(r, a, b))
}

pub(crate) fn solve_box_unchecked(r: &[f64], a: &[f64], b: &[f64]) -> SubproblemSolution {
    if a == b {
        // a single point: evaluate in input order so the value is bit-identical
        // to the plain self-normalized estimate
        return SubproblemSolution {
            value: ratio(r, a),
            weights: a.to_vec(),
            threshold: Some(1),
            multiplier: None,
        };
    }
    let order = sorted_order(r, a, b);
    let profile = profile_sorted(&order, r, a, b);
    let (best, value) = profile
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bj, bv), (j, v)| {
            if v.partial_cmp(&bv) == Some(Ordering::Greater) {
                (j, v)
            } else {
                (bj, bv)
            }
        });
    let mut weights = vec![0.0; r.len()];
    for (p, &i) in order.iter().enumerate() {
        weights[i] = if p < best { a[i] } else { b[i] };
    }
    SubproblemSolution {
        value,
        weights,
        threshold: Some(best + 1),
        multiplier: None,
    }
}

/// Maximizes the ratio over all `2^k` vertices of the box. Test oracle only.
pub fn oracle_box(r: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
    validate(r, a, b)?;
    let k = r.len();
    if k > 20 {
        return Err(Error::domain(format!(
            "vertex enumeration refused for k = {k} > 20"
        )));
    }
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1u32 << k) {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..k {
            let w = if mask >> i & 1 == 1 { b[i] } else { a[i] };
            num += w * r[i];
            den += w;
        }
        best = best.max(num / den);
    }
    Ok(best)
}

pub(crate) fn ratio(r: &[f64], w: &[f64]) -> f64 {
    let num: f64 = r.iter().zip(w).map(|(ri, wi)| ri * wi).sum();
    let den: f64 = w.iter().sum();
    num / den
}
