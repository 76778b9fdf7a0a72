//! Observational datasets: covariates, treatment labels, outcomes (losses),
//! nominal propensities of the observed arm and, for simulated data, the full
//! matrix of potential outcomes.

mod io;
mod propensity;

pub use io::{load_dataset, read_dataset, write_dataset, ColumnSchema};
pub use propensity::{estimate_propensities, PropensityModel, PropensityOptions};
pub(crate) use propensity::{clip, observed_arm_propensities};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::domain(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::domain(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copy of the matrix without column `j`.
    pub fn drop_column(&self, j: usize) -> Matrix {
        let cols = self.cols - 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend_from_slice(&row[..j]);
            data.extend_from_slice(&row[j + 1..]);
        }
        Matrix {
            rows: self.rows,
            cols,
            data,
        }
    }
}

/// Per-arm index sets `I_t = {i : T_i = t}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArmIndex {
    arms: Vec<Vec<usize>>,
}

impl ArmIndex {
    pub fn new(treatments: &[usize], m: usize) -> Self {
        let mut arms = vec![Vec::new(); m];
        for (i, &t) in treatments.iter().enumerate() {
            arms[t].push(i);
        }
        Self { arms }
    }

    pub fn arm(&self, t: usize) -> &[usize] {
        &self.arms[t]
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.arms.iter().enumerate().map(|(t, v)| (t, v.as_slice()))
    }

    /// Fails naming the first arm without units.
    pub fn require_nonempty(&self) -> Result<()> {
        match self.arms.iter().position(Vec::is_empty) {
            Some(arm) => Err(Error::EmptyArm { arm }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    x: Matrix,
    t: Vec<usize>,
    y: Vec<f64>,
    e_hat: Option<Vec<f64>>,
    potential_y: Option<Matrix>,
    m: usize,
    arms: ArmIndex,
    warnings: Vec<String>,
}

impl Dataset {
    /// Builds a dataset with `m` arms. Labels must lie in `0..m`.
    pub fn new(x: Matrix, t: Vec<usize>, y: Vec<f64>, m: usize) -> Result<Self> {
        let n = t.len();
        if m < 2 {
            return Err(Error::domain(format!("need at least 2 arms, got {m}")));
        }
        if x.rows() != n || y.len() != n {
            return Err(Error::domain(format!(
                "length mismatch: {} covariate rows, {n} treatments, {} outcomes",
                x.rows(),
                y.len()
            )));
        }
        if let Some(i) = t.iter().position(|&ti| ti >= m) {
            return Err(Error::domain(format!(
                "unit {i}: treatment {} not in 0..{m}",
                t[i]
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("unit {i}: non-finite outcome")));
        }
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite covariate"));
        }
        let arms = ArmIndex::new(&t, m);
        let warnings = if n > 0 {
            arms.iter()
                .filter(|(_, idx)| idx.is_empty())
                .map(|(arm, _)| format!("treatment arm {arm} has no units"))
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            x,
            t,
            y,
            e_hat: None,
            potential_y: None,
            m,
            arms,
            warnings,
        })
    }

    /// Attaches nominal propensities of the observed arm, `ê_{T_i}(X_i)`.
    pub fn with_propensities(mut self, e_hat: Vec<f64>) -> Result<Self> {
        if e_hat.len() != self.n() {
            return Err(Error::domain("propensity length differs from n"));
        }
        if let Some(i) = e_hat.iter().position(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::domain(format!(
                "unit {i}: propensity {} outside (0, 1]",
                e_hat[i]
            )));
        }
        self.e_hat = Some(e_hat);
        Ok(self)
    }

    /// Attaches the n x m matrix of potential outcomes. The observed outcome
    /// must equal the potential outcome of the observed arm exactly.
    pub fn with_potential_outcomes(mut self, potential_y: Matrix) -> Result<Self> {
        if potential_y.rows() != self.n() || potential_y.cols() != self.m {
            return Err(Error::domain("potential outcome matrix must be n x m"));
        }
        for i in 0..self.n() {
            if potential_y.get(i, self.t[i]) != self.y[i] {
                return Err(Error::domain(format!(
                    "unit {i}: observed outcome differs from potential outcome of its arm"
                )));
            }
        }
        self.potential_y = Some(potential_y);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.t.len()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn treatments(&self) -> &[usize] {
        &self.t
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.y
    }

    pub fn propensities(&self) -> Option<&[f64]> {
        self.e_hat.as_deref()
    }

    pub fn potential_outcomes(&self) -> Option<&Matrix> {
        self.potential_y.as_ref()
    }

    pub fn arms(&self) -> &ArmIndex {
        &self.arms
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Nominal inverse propensities `1 / ê_{T_i}(X_i)`.
    pub fn nominal_weights(&self) -> Result<Vec<f64>> {
        let e = self
            .e_hat
            .as_ref()
            .ok_or(Error::Missing("nominal propensities"))?;
        Ok(e.iter().map(|&p| 1.0 / p).collect())
    }

    /// Same units with covariate column `j` removed.
    pub fn without_covariate(&self, j: usize) -> Result<Dataset> {
        if j >= self.d() {
            return Err(Error::Index {
                index: j,
                len: self.d(),
            });
        }
        let mut out = self.clone();
        out.x = self.x.drop_column(j);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let x = Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        Dataset::new(x, vec![0, 1, 1, 0], vec![1.0, 2.0, 3.0, 4.0], 2).unwrap()
    }

    #[test]
    fn arms_partition_units() {
        let data = toy();
        let arms = data.arms();
        assert_eq!(arms.arm(0), &[0, 3]);
        assert_eq!(arms.arm(1), &[1, 2]);
        let total: usize = arms.iter().map(|(_, idx)| idx.len()).sum();
        assert_eq!(total, data.n());
    }

    #[test]
    fn empty_arm_is_a_warning_then_an_error() {
        let x = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        let data = Dataset::new(x, vec![0, 2], vec![1.0, 2.0], 3).unwrap();
        assert_eq!(data.warnings().len(), 1);
        assert!(matches!(
            data.arms().require_nonempty(),
            Err(Error::EmptyArm { arm: 1 })
        ));
    }

    #[test]
    fn rejects_inconsistent_potential_outcomes() {
        let data = toy();
        let py = Matrix::new(4, 2, vec![1.0, 0.0, 0.0, 2.0, 0.0, 3.0, 4.0, 9.0]).unwrap();
        assert!(data.clone().with_potential_outcomes(py).is_ok());
        let bad = Matrix::new(4, 2, vec![1.5, 0.0, 0.0, 2.0, 0.0, 3.0, 4.0, 9.0]).unwrap();
        assert!(data.with_potential_outcomes(bad).is_err());
    }

    #[test]
    fn rejects_propensity_outside_unit_interval() {
        assert!(toy().with_propensities(vec![0.5, 0.5, 0.0, 0.5]).is_err());
        assert!(toy().with_propensities(vec![0.5, 0.5, 1.0, 0.5]).is_ok());
    }

    #[test]
    fn drop_column_keeps_order() {
        let m = Matrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let d = m.drop_column(1);
        assert_eq!(d.as_slice(), &[1.0, 3.0, 4.0, 6.0]);
    }
}
