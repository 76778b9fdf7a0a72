//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Solves `max cᵀx` subject to linear rows (`<=`, `>=`, `=`) and `x >= 0`.
//! Sized for the per-arm subproblems here (a few hundred rows), not for
//! general-purpose modelling.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Shadow price of each row in the order added (sensitivity of the
    /// optimum to its right-hand side).
    pub duals: Vec<f64>,
}

const EPS: f64 = 1e-11;
/// Smallest admissible pivot element.
const PIVOT_EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

impl LinearProgram {
    /// Maximization problem over `objective.len()` non-negative variables.
    pub fn maximize(objective: Vec<f64>) -> Self {
        Self {
            num_vars: objective.len(),
            objective,
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.num_vars, "row width");
        self.rows.push((coeffs, rel, rhs));
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Tableau::build(self).run()
    }
}

struct Tableau {
    /// m constraint rows followed by the objective row; last column is rhs.
    cells: Vec<Vec<f64>>,
    basis: Vec<usize>,
    num_structural: usize,
    /// columns at or beyond this index are artificial
    first_artificial: usize,
    width: usize,
    /// per original row: (slack column and its coefficient, sign applied to the row)
    row_slack: Vec<(Option<(usize, f64)>, f64)>,
    objective: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.num_vars;
        let num_slack = lp
            .rows
            .iter()
            .filter(|(_, rel, _)| *rel != Relation::Eq)
            .count();
        let num_art = lp
            .rows
            .iter()
            .filter(|(_, rel, rhs)| {
                let flipped = *rhs < 0.0;
                match rel {
                    Relation::Eq => true,
                    Relation::Le => flipped,
                    Relation::Ge => !flipped,
                }
            })
            .count();
        let first_artificial = n + num_slack;
        let width = first_artificial + num_art;
        let mut cells = vec![vec![0.0; width + 1]; m + 1];
        let mut basis = vec![0; m];
        let mut row_slack = Vec::with_capacity(m);
        let (mut next_slack, mut next_art) = (n, first_artificial);
        for (i, (coeffs, rel, rhs)) in lp.rows.iter().enumerate() {
            let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
            let rel = match (rel, sign < 0.0) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => *r,
            };
            for (j, c) in coeffs.iter().enumerate() {
                cells[i][j] = sign * c;
            }
            cells[i][width] = sign * rhs;
            let slack = match rel {
                Relation::Le => {
                    cells[i][next_slack] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                    Some((next_slack - 1, 1.0))
                }
                Relation::Ge => {
                    cells[i][next_slack] = -1.0;
                    next_slack += 1;
                    Some((next_slack - 1, -1.0))
                }
                Relation::Eq => None,
            };
            if rel != Relation::Le {
                cells[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
            row_slack.push((slack, sign));
        }
        Self {
            cells,
            basis,
            num_structural: n,
            first_artificial,
            width,
            row_slack,
            objective: lp.objective.clone(),
        }
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    /// Loads `cost` (maximize) into the objective row as reduced costs `z_j - c_j`.
    fn load_objective(&mut self, cost: &[f64]) {
        let m = self.m();
        let w = self.width;
        let mut row = vec![0.0; w + 1];
        for (j, c) in cost.iter().enumerate() {
            row[j] = -c;
        }
        for i in 0..m {
            let cb = cost.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (rj, cij) in row.iter_mut().zip(&self.cells[i]) {
                    *rj += cb * cij;
                }
            }
        }
        self.cells[m] = row;
    }

    fn pivot(&mut self, r: usize, s: usize) {
        let p = self.cells[r][s];
        for v in self.cells[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.cells[r].clone();
        for (i, row) in self.cells.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[s];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[s] = 0.0;
            }
        }
        self.basis[r] = s;
    }

    /// Bland's rule iterations over columns `< limit`.
    fn iterate(&mut self, limit: usize, budget: &mut usize) -> Result<()> {
        let m = self.m();
        loop {
            let Some(s) = (0..limit).find(|&j| self.cells[m][j] < -EPS) else {
                return Ok(());
            };
            // ratio test; among near-ties prefer the largest pivot element,
            // then the lowest basic index
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.cells[i][s];
                if a > PIVOT_EPS {
                    let ratio = self.cells[i][self.width].max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= EPS * (1.0 + br.abs());
                            let ba = self.cells[bi][s];
                            let better = if tie {
                                a > ba || a == ba && self.basis[i] < self.basis[bi]
                            } else {
                                ratio < br
                            };
                            if better {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Solver("objective is unbounded".into()));
            };
            if *budget == 0 {
                return Err(Error::Solver(format!(
                    "pivot limit reached (reduced cost {:e})",
                    self.cells[m][s]
                )));
            }
            *budget -= 1;
            self.pivot(r, s);
        }
    }

    fn run(mut self) -> Result<LpSolution> {
        let m = self.m();
        let mut budget = MAX_PIVOTS;
        if self.first_artificial < self.width {
            let mut cost = vec![0.0; self.width];
            for c in cost.iter_mut().skip(self.first_artificial) {
                *c = -1.0;
            }
            self.load_objective(&cost);
            self.iterate(self.width, &mut budget)?;
            let infeas = -self.cells[m][self.width];
            let scale = 1.0 + self.cells[..m].iter().map(|r| r[self.width].abs()).fold(0.0, f64::max);
            if infeas > 1e-9 * scale {
                return Err(Error::Solver(format!(
                    "infeasible (phase-one residual {infeas:e})"
                )));
            }
            // drive remaining artificials out of the basis
            for i in 0..m {
                if self.basis[i] >= self.first_artificial {
                    if let Some(s) =
                        (0..self.first_artificial).find(|&j| self.cells[i][j].abs() > 1e-9)
                    {
                        self.pivot(i, s);
                    }
                }
            }
        }
        let cost = self.objective.clone();
        self.load_objective(&cost);
        self.iterate(self.first_artificial, &mut budget)?;

        let mut x = vec![0.0; self.num_structural];
        for i in 0..m {
            if self.basis[i] < self.num_structural {
                x[self.basis[i]] = self.cells[i][self.width];
            }
        }
        let objective = self.cells[m][self.width];
        let duals = self
            .row_slack
            .iter()
            .map(|&(slack, sign)| match slack {
                // the reduced cost of a slack column is the row's shadow price
                Some((j, coef)) => sign * coef * self.cells[m][j],
                None => f64::NAN,
            })
            .collect();
        Ok(LpSolution {
            x,
            objective,
            duals,
        })
    }
}
