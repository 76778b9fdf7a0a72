//! Worst case over the box intersected with a mean-deviation budget,
//! `(1/k) Σ |W_i − W̃_i| <= Λ`.
//!
//! Two exact routes:
//!
//! * the Charnes-Cooper linear program in `(w, d, ψ)`, with `W = w / ψ`,
//!   solved by the dense simplex;
//! * Dinkelbach iterations on `λ`: for a fixed `λ` the problem
//!   `max Σ (r_i − λ) W_i` over the budgeted box is a fractional knapsack
//!   around `W̃` (spend the deviation budget on the largest `|r_i − λ|`
//!   first), and the optimum is the root of its value in `λ`.

use super::simplex::{LinearProgram, Relation};
use super::{ratio, validate, SubproblemSolution};
use crate::error::{Error, Result};
use crate::uncertainty::BudgetedMethod;

fn validate_budgeted(r: &[f64], a: &[f64], b: &[f64], nominal: &[f64], budget: f64) -> Result<()> {
    validate(r, a, b)?;
    if nominal.len() != r.len() {
        return Err(Error::domain("nominal weights must match r in length"));
    }
    for i in 0..r.len() {
        if !(a[i] <= nominal[i] && nominal[i] <= b[i]) {
            return Err(Error::domain(format!(
                "unit {i}: nominal weight {} outside [{}, {}]",
                nominal[i], a[i], b[i]
            )));
        }
    }
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(Error::domain(format!("budget must be finite and >= 0, got {budget}")));
    }
    Ok(())
}

/// Solves with the requested method.
pub fn solve_budgeted_with(
    method: BudgetedMethod,
    r: &[f64],
    a: &[f64],
    b: &[f64],
    nominal: &[f64],
    budget: f64,
) -> Result<SubproblemSolution> {
    match method {
        BudgetedMethod::Simplex => solve_budgeted_simplex(r, a, b, nominal, budget),
        BudgetedMethod::Parametric => solve_budgeted_parametric(r, a, b, nominal, budget),
    }
}

/// Default budgeted solver: the Charnes-Cooper linear program.
pub fn solve_budgeted(
    r: &[f64],
    a: &[f64],
    b: &[f64],
    nominal: &[f64],
    budget: f64,
) -> Result<SubproblemSolution> {
    solve_budgeted_simplex(r, a, b, nominal, budget)
}

pub fn solve_budgeted_simplex(
    r: &[f64],
    a: &[f64],
    b: &[f64],
    nominal: &[f64],
    budget: f64,
) -> Result<SubproblemSolution> {
    validate_budgeted(r, a, b, nominal, budget)?;
    let k = r.len();
    // variables: w_0..w_{k-1}, d_0..d_{k-1}, psi
    let nv = 2 * k + 1;
    let psi = 2 * k;
    let mut obj = vec![0.0; nv];
    obj[..k].copy_from_slice(r);
    let mut lp = LinearProgram::maximize(obj);
    let row = |entries: &[(usize, f64)]| {
        let mut v = vec![0.0; nv];
        for &(j, c) in entries {
            v[j] += c;
        }
        v
    };

    let mut sum_w = vec![0.0; nv];
    sum_w[..k].iter_mut().for_each(|c| *c = 1.0);
    lp.add_row(sum_w, Relation::Eq, 1.0);
    for i in 0..k {
        lp.add_row(row(&[(i, 1.0), (psi, -a[i])]), Relation::Ge, 0.0);
        lp.add_row(row(&[(i, 1.0), (psi, -b[i])]), Relation::Le, 0.0);
        lp.add_row(row(&[(k + i, 1.0), (i, -1.0), (psi, nominal[i])]), Relation::Ge, 0.0);
        lp.add_row(row(&[(k + i, 1.0), (i, 1.0), (psi, -nominal[i])]), Relation::Ge, 0.0);
    }
    let mut budget_row = vec![0.0; nv];
    budget_row[k..2 * k].iter_mut().for_each(|c| *c = 1.0);
    budget_row[psi] = -(k as f64) * budget;
    lp.add_row(budget_row, Relation::Le, 0.0);

    let sol = lp.solve()?;
    let scale = sol.x[psi];
    if !(scale > 0.0) {
        return Err(Error::Solver(format!("degenerate scale factor {scale:e}")));
    }
    let weights: Vec<f64> = (0..k)
        .map(|i| (sol.x[i] / scale).clamp(a[i], b[i]))
        .collect();
    let multiplier = sol.duals.last().copied().map(|m| m.max(0.0));
    Ok(SubproblemSolution {
        value: ratio(r, &weights),
        weights,
        threshold: None,
        multiplier,
    })
}

/// Greedy maximizer of `Σ c_i W_i` over the budgeted box, plus the budget's
/// multiplier (the `|c|` of the unit the budget runs out on, 0 if slack).
fn knapsack(c: &[f64], a: &[f64], b: &[f64], nominal: &[f64], total: f64) -> (Vec<f64>, f64) {
    let mut w = nominal.to_vec();
    let mut order: Vec<usize> = (0..c.len()).filter(|&i| c[i] != 0.0).collect();
    order.sort_by(|&i, &j| c[j].abs().total_cmp(&c[i].abs()).then(i.cmp(&j)));
    let mut left = total;
    for &i in &order {
        let room = if c[i] > 0.0 {
            b[i] - nominal[i]
        } else {
            nominal[i] - a[i]
        };
        if room <= 0.0 {
            continue;
        }
        if left <= 0.0 {
            return (w, c[i].abs());
        }
        let step = room.min(left);
        w[i] = if c[i] > 0.0 {
            if step == room { b[i] } else { nominal[i] + step }
        } else if step == room {
            a[i]
        } else {
            nominal[i] - step
        };
        left -= step;
        if step < room {
            return (w, c[i].abs());
        }
    }
    (w, 0.0)
}

pub fn solve_budgeted_parametric(
    r: &[f64],
    a: &[f64],
    b: &[f64],
    nominal: &[f64],
    budget: f64,
) -> Result<SubproblemSolution> {
    validate_budgeted(r, a, b, nominal, budget)?;
    Ok(parametric_unchecked(r, a, b, nominal, budget))
}

pub(crate) fn parametric_unchecked(
    r: &[f64],
    a: &[f64],
    b: &[f64],
    nominal: &[f64],
    budget: f64,
) -> SubproblemSolution {
    let total = budget * r.len() as f64;
    let mut weights = nominal.to_vec();
    let mut lambda = ratio(r, &weights);
    let mut multiplier = 0.0;
    let mut c = vec![0.0; r.len()];
    // λ strictly increases until the fixed point; the number of distinct
    // greedy solutions bounds the iteration count
    for _ in 0..10 * r.len() + 100 {
        for (ci, ri) in c.iter_mut().zip(r) {
            *ci = ri - lambda;
        }
        let (w, eta) = knapsack(&c, a, b, nominal, total);
        let next = ratio(r, &w);
        if next <= lambda {
            multiplier = eta;
            break;
        }
        weights = w;
        lambda = next;
        multiplier = eta;
    }
    SubproblemSolution {
        value: lambda,
        weights,
        threshold: None,
        multiplier: Some(multiplier),
    }
}
