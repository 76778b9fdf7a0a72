//! Marginal sensitivity model uncertainty sets for the true inverse
//! propensities. Each unit's weight lies in `[a_i, b_i]`, where
//! `a_i = 1 + (W̃_i - 1) / Γ` and `b_i = 1 + Γ (W̃_i - 1)` bracket the nominal
//! inverse propensity `W̃_i`. The budgeted variant additionally caps the mean
//! absolute deviation from `W̃` within each treatment arm.

use serde::{Deserialize, Serialize};

use crate::data::ArmIndex;
use crate::error::{Error, Result};

/// Which exact method solves the budgeted inner problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetedMethod {
    /// Dense simplex on the Charnes-Cooper linear program.
    #[default]
    Simplex,
    /// Dinkelbach iterations over a greedy budget allocation.
    Parametric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySpec {
    gamma: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    nominal: Vec<f64>,
    budget: Option<Vec<f64>>,
    budget_method: BudgetedMethod,
}

pub fn weight_bounds(nominal: &[f64], gamma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_gamma(gamma)?;
    if let Some(i) = nominal.iter().position(|w| !(w.is_finite() && *w >= 1.0)) {
        return Err(Error::domain(format!(
            "unit {i}: nominal inverse propensity {} must be finite and >= 1",
            nominal[i]
        )));
    }
    let lower = nominal.iter().map(|w| 1.0 + (w - 1.0) / gamma).collect();
    let upper = nominal.iter().map(|w| 1.0 + gamma * (w - 1.0)).collect();
    Ok((lower, upper))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma >= 1.0) {
        return Err(Error::domain(format!("gamma must be finite and >= 1, got {gamma}")));
    }
    Ok(())
}

impl UncertaintySpec {
    /// Box set around nominal inverse propensities `W̃_i = 1 / ê_{T_i}(X_i)`.
    pub fn new(nominal: Vec<f64>, gamma: f64) -> Result<Self> {
        let (lower, upper) = weight_bounds(&nominal, gamma)?;
        Ok(Self {
            gamma,
            lower,
            upper,
            nominal,
            budget: None,
            budget_method: BudgetedMethod::default(),
        })
    }

    pub fn from_propensities(e_hat: &[f64], gamma: f64) -> Result<Self> {
        Self::new(e_hat.iter().map(|e| 1.0 / e).collect(), gamma)
    }

    /// Adds per-arm mean-deviation budgets `Λ_t`.
    pub fn with_budget(mut self, budget: Vec<f64>) -> Result<Self> {
        if let Some(t) = budget.iter().position(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::domain(format!(
                "budget for arm {t} must be finite and >= 0, got {}",
                budget[t]
            )));
        }
        self.budget = Some(budget);
        Ok(self)
    }

    /// Adds budgets set to a fraction `rho` of the deviation the box allows.
    pub fn with_budget_fraction(self, arms: &ArmIndex, rho: f64) -> Result<Self> {
        let budget = budget_from_fraction(&self, arms, rho)?;
        self.with_budget(budget)
    }

    pub fn with_budget_method(mut self, method: BudgetedMethod) -> Self {
        self.budget_method = method;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn nominal(&self) -> &[f64] {
        &self.nominal
    }

    pub fn budget(&self) -> Option<&[f64]> {
        self.budget.as_deref()
    }

    pub fn budget_method(&self) -> BudgetedMethod {
        self.budget_method
    }

    pub fn len(&self) -> usize {
        self.nominal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nominal.is_empty()
    }
}

/// `Λ_t = ρ · mean_{i ∈ I_t} max(W̃_i − a_i, b_i − W̃_i)`.
pub fn budget_from_fraction(spec: &UncertaintySpec, arms: &ArmIndex, rho: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::domain(format!("rho must lie in [0, 1], got {rho}")));
    }
    arms.iter()
        .map(|(t, idx)| {
            if idx.is_empty() {
                return Err(Error::EmptyArm { arm: t });
            }
            let total: f64 = idx
                .iter()
                .map(|&i| {
                    let w = spec.nominal[i];
                    (w - spec.lower[i]).max(spec.upper[i] - w)
                })
                .sum();
            Ok(rho * total / idx.len() as f64)
        })
        .collect()
}

/// A Γ-indexed family of uncertainty sets sharing nominal weights and,
/// optionally, a budget fraction `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyFamily {
    pub nominal: Vec<f64>,
    pub rho: Option<f64>,
    pub budget_method: BudgetedMethod,
}

impl UncertaintyFamily {
    pub fn new(nominal: Vec<f64>) -> Self {
        Self {
            nominal,
            rho: None,
            budget_method: BudgetedMethod::default(),
        }
    }

    pub fn with_rho(mut self, rho: Option<f64>) -> Self {
        self.rho = rho;
        self
    }

    pub fn at(&self, gamma: f64, arms: &ArmIndex) -> Result<UncertaintySpec> {
        let spec = UncertaintySpec::new(self.nominal.clone(), gamma)?
            .with_budget_method(self.budget_method);
        match self.rho {
            Some(rho) => spec.with_budget_fraction(arms, rho),
            None => Ok(spec),
        }
    }
}
