//! Regret and value estimators, synthetic data generators, Γ-calibration and
//! the dropped-covariate propensity audit.

mod audit;
mod report;
mod simulate;

pub use audit::{calibration_matrix, odds_ratio_audit, CalibrationMatrix};
pub use report::{
    write_calibration_csv, write_odds_ratio_csv, write_regret_curves_csv, RegretCurve,
    RegretSummary,
};
pub use simulate::{
    simulate_binary, simulate_multi, SimParamsBinary, SimParamsMulti, Simulation,
};

use crate::data::{ArmIndex, Dataset};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::subproblem::{
    parametric_unchecked, solve_box_unchecked, solve_budgeted_with, SubproblemSolution,
};
use crate::uncertainty::{BudgetedMethod, UncertaintySpec};

fn check_dims(pol: &Policy, pi0: &Policy, data: &Dataset) -> Result<()> {
    for p in [pol, pi0] {
        if p.m() != data.m() || p.d() != data.d() {
            return Err(Error::domain(format!(
                "policy shape (m = {}, d = {}) does not match data (m = {}, d = {})",
                p.m(),
                p.d(),
                data.m(),
                data.d()
            )));
        }
    }
    Ok(())
}

/// `r_i = (π(T_i|X_i) − π0(T_i|X_i)) Y_i` for every unit.
pub fn regret_terms(pol: &Policy, pi0: &Policy, data: &Dataset) -> Result<Vec<f64>> {
    check_dims(pol, pi0, data)?;
    let m = data.m();
    let (mut p, mut q) = (vec![0.0; m], vec![0.0; m]);
    Ok((0..data.n())
        .map(|i| {
            let x = data.row(i);
            let t = data.treatments()[i];
            pol.probabilities_into(x, &mut p);
            pi0.probabilities_into(x, &mut q);
            (p[t] - q[t]) * data.outcomes()[i]
        })
        .collect())
}

/// Hájek regret `Σ_t Σ_{I_t} r_i W_i / Σ_{I_t} W_i` for given weights.
pub fn hajek_regret(pol: &Policy, pi0: &Policy, data: &Dataset, w: &[f64]) -> Result<f64> {
    if w.len() != data.n() {
        return Err(Error::domain("weight vector length differs from n"));
    }
    if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::domain(format!("unit {i}: weight must be positive")));
    }
    data.arms().require_nonempty()?;
    let r = regret_terms(pol, pi0, data)?;
    Ok(data
        .arms()
        .iter()
        .map(|(_, idx)| {
            let num: f64 = idx.iter().map(|&i| r[i] * w[i]).sum();
            let den: f64 = idx.iter().map(|&i| w[i]).sum();
            num / den
        })
        .sum())
}

/// Worst-case Hájek regret over the uncertainty set; solves one subproblem
/// per arm and sums the values.
pub fn worst_case_regret(pol: &Policy, pi0: &Policy, data: &Dataset, spec: &UncertaintySpec) -> Result<f64> {
    let r = regret_terms(pol, pi0, data)?;
    Ok(worst_case(&r, data.arms(), spec, spec.budget_method(), true)?.value)
}

/// Per-arm worst case assembled into one weight vector over all units.
#[derive(Debug, Clone)]
pub(crate) struct WorstCase {
    pub value: f64,
    pub weights: Vec<f64>,
    /// `Σ_{I_t} W_i` for the arm of each unit.
    pub arm_totals: Vec<f64>,
}

/// Solves the inner maximization for per-unit regret terms `r`. With
/// `checked`, inputs are validated and budgeted arms use `method`; the
/// unchecked path trusts a spec that was validated on construction and uses
/// the greedy parametric route for budgets.
pub(crate) fn worst_case(
    r: &[f64],
    arms: &ArmIndex,
    spec: &UncertaintySpec,
    method: BudgetedMethod,
    checked: bool,
) -> Result<WorstCase> {
    if spec.len() != r.len() {
        return Err(Error::domain(format!(
            "uncertainty set covers {} units, data has {}",
            spec.len(),
            r.len()
        )));
    }
    if arms.num_arms() != spec.budget().map_or(arms.num_arms(), <[f64]>::len) {
        return Err(Error::domain("budget length differs from the number of arms"));
    }
    arms.require_nonempty()?;
    let n = r.len();
    let mut out = WorstCase {
        value: 0.0,
        weights: vec![0.0; n],
        arm_totals: vec![0.0; n],
    };
    let (mut rs, mut a, mut b, mut w0) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (t, idx) in arms.iter() {
        rs.clear();
        a.clear();
        b.clear();
        w0.clear();
        for &i in idx {
            rs.push(r[i]);
            a.push(spec.lower()[i]);
            b.push(spec.upper()[i]);
            w0.push(spec.nominal()[i]);
        }
        let sol: SubproblemSolution = match (spec.budget(), checked) {
            (None, _) => solve_box_unchecked(&rs, &a, &b),
            (Some(lam), true) => solve_budgeted_with(method, &rs, &a, &b, &w0, lam[t])?,
            (Some(lam), false) => parametric_unchecked(&rs, &a, &b, &w0, lam[t]),
        };
        let total: f64 = sol.weights.iter().sum();
        for (p, &i) in idx.iter().enumerate() {
            out.weights[i] = sol.weights[p];
            out.arm_totals[i] = total;
        }
        out.value += sol.value;
    }
    Ok(out)
}

/// Inverse-propensity-weighted policy value `(1/n) Σ π(T_i|X_i) Y_i / ê_i`.
pub fn ipw_value(pol: &Policy, data: &Dataset) -> Result<f64> {
    let e = data.propensities().ok_or(Error::Missing("nominal propensities"))?;
    check_dims(pol, pol, data)?;
    if data.n() == 0 {
        return Err(Error::domain("empty dataset"));
    }
    let total: f64 = (0..data.n())
        .map(|i| {
            let t = data.treatments()[i];
            pol.probabilities(data.row(i))[t] * data.outcomes()[i] / e[i]
        })
        .sum();
    Ok(total / data.n() as f64)
}

/// Horvitz-Thompson regret on randomized test data with known assignment
/// probabilities `p`.
pub fn ht_test_regret(pol: &Policy, pi0: &Policy, test: &Dataset, p: &[f64]) -> Result<f64> {
    if p.len() != test.m() {
        return Err(Error::domain("need one randomization probability per arm"));
    }
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("{p:?} is not a probability vector")));
    }
    for (t, idx) in test.arms().iter() {
        if p[t] == 0.0 && !idx.is_empty() {
            return Err(Error::domain(format!(
                "arm {t} is observed but has randomization probability 0"
            )));
        }
    }
    if test.n() == 0 {
        return Err(Error::domain("empty dataset"));
    }
    let r = regret_terms(pol, pi0, test)?;
    let total: f64 = r
        .iter()
        .zip(test.treatments())
        .map(|(ri, &t)| ri / p[t])
        .sum();
    Ok(total / test.n() as f64)
}

/// Oracle regret from known counterfactuals:
/// `(1/n) Σ_i Σ_t (π(t|X_i) − π0(t|X_i)) Y_i(t)`.
pub fn true_regret(pol: &Policy, pi0: &Policy, data: &Dataset) -> Result<f64> {
    let py = data
        .potential_outcomes()
        .ok_or(Error::Missing("potential outcomes"))?;
    check_dims(pol, pi0, data)?;
    if data.n() == 0 {
        return Err(Error::domain("empty dataset"));
    }
    let m = data.m();
    let (mut p, mut q) = (vec![0.0; m], vec![0.0; m]);
    let mut total = 0.0;
    for i in 0..data.n() {
        let x = data.row(i);
        pol.probabilities_into(x, &mut p);
        pi0.probabilities_into(x, &mut q);
        total += (0..m).map(|t| (p[t] - q[t]) * py.get(i, t)).sum::<f64>();
    }
    Ok(total / data.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;
    use crate::subproblem::oracle_box;
    use proptest::prelude::*;

    fn two_units() -> Dataset {
        let x = Matrix::new(2, 1, vec![0.3, -0.4]).unwrap();
        Dataset::new(x, vec![1, 0], vec![-2.0, 1.0], 2)
            .unwrap()
            .with_propensities(vec![0.5, 0.5])
            .unwrap()
    }

    #[test]
    fn hajek_hand_example() {
        let data = two_units();
        let treat = Policy::always(2, 1, 1).unwrap();
        let never = Policy::control(2, 1);
        assert_eq!(hajek_regret(&treat, &never, &data, &[1.0, 1.0]).unwrap(), -3.0);
        assert_eq!(hajek_regret(&treat, &treat, &data, &[1.3, 7.0]).unwrap(), 0.0);
    }

    #[test]
    fn ipw_hand_example() {
        let data = two_units();
        let treat = Policy::always(2, 1, 1).unwrap();
        assert_eq!(ipw_value(&treat, &data).unwrap(), -2.0);
        let uniform = Policy::uniform(2, 1);
        assert!((ipw_value(&uniform, &data).unwrap() - (-0.5)).abs() < 1e-15);
        let bare = Dataset::new(data.x().clone(), vec![1, 0], vec![-2.0, 1.0], 2).unwrap();
        assert!(matches!(ipw_value(&treat, &bare), Err(Error::Missing(_))));
    }

    #[test]
    fn ht_hand_example() {
        let x = Matrix::new(2, 1, vec![0.0, 0.0]).unwrap();
        let data = Dataset::new(x, vec![1, 0], vec![1.0, 2.0], 2).unwrap();
        let treat = Policy::always(2, 1, 1).unwrap();
        let never = Policy::control(2, 1);
        assert_eq!(ht_test_regret(&treat, &never, &data, &[0.5, 0.5]).unwrap(), -1.0);
        assert_eq!(ht_test_regret(&never, &never, &data, &[0.5, 0.5]).unwrap(), 0.0);
        assert!(ht_test_regret(&treat, &never, &data, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn true_regret_definition() {
        let x = Matrix::new(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        let py = Matrix::new(3, 2, vec![1.0, 3.0, 2.0, 0.0, -1.0, 4.0]).unwrap();
        let data = Dataset::new(x, vec![0, 1, 0], vec![1.0, 0.0, -1.0], 2)
            .unwrap()
            .with_potential_outcomes(py)
            .unwrap();
        let treat = Policy::always(2, 1, 1).unwrap();
        let never = Policy::control(2, 1);
        assert!((true_regret(&treat, &never, &data).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(true_regret(&never, &never, &data).unwrap(), 0.0);
        let u = Policy::uniform(2, 1);
        assert_eq!(true_regret(&u, &u, &data).unwrap(), 0.0);
    }

    #[test]
    fn empty_arm_is_named() {
        let x = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        let data = Dataset::new(x, vec![0, 0], vec![1.0, 2.0], 2).unwrap();
        let pol = Policy::uniform(2, 1);
        let err = hajek_regret(&pol, &Policy::control(2, 1), &data, &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::EmptyArm { arm: 1 }));
    }

    fn instance() -> impl Strategy<Value = (Vec<usize>, Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
        (4usize..14).prop_flat_map(|n| {
            (
                proptest::collection::vec(0usize..2, n),
                proptest::collection::vec(-2.0f64..2.0, n),
                proptest::collection::vec(-3.0f64..3.0, n),
                proptest::collection::vec(0.05f64..0.95, n),
                1.0f64..3.0,
            )
        })
    }

    fn build(t: &[usize], x: &[f64], y: &[f64], e: &[f64]) -> Option<Dataset> {
        let mut t = t.to_vec();
        t[0] = 0;
        t[1] = 1;
        let x = Matrix::new(t.len(), 1, x.to_vec()).unwrap();
        Dataset::new(x, t, y.to_vec(), 2).ok()?.with_propensities(e.to_vec()).ok()
    }

    proptest! {
        #[test]
        fn worst_case_matches_oracle_and_nominal((t, x, y, e, g) in instance(), theta in proptest::collection::vec(-2.0f64..2.0, 2)) {
            let data = build(&t, &x, &y, &e).unwrap();
            let pol = Policy::Logistic(crate::policy::LogisticPolicy::new(2, 1, theta).unwrap());
            let pi0 = Policy::control(2, 1);
            let w0 = data.nominal_weights().unwrap();
            let spec = UncertaintySpec::new(w0.clone(), g).unwrap();
            let r = regret_terms(&pol, &pi0, &data).unwrap();
            let mut oracle = 0.0;
            for (_, idx) in data.arms().iter() {
                let ri: Vec<f64> = idx.iter().map(|&i| r[i]).collect();
                let a: Vec<f64> = idx.iter().map(|&i| spec.lower()[i]).collect();
                let b: Vec<f64> = idx.iter().map(|&i| spec.upper()[i]).collect();
                oracle += oracle_box(&ri, &a, &b).unwrap();
            }
            let v = worst_case_regret(&pol, &pi0, &data, &spec).unwrap();
            prop_assert!((v - oracle).abs() <= 1e-9);

            let nominal = UncertaintySpec::new(w0.clone(), 1.0).unwrap();
            let v1 = worst_case_regret(&pol, &pi0, &data, &nominal).unwrap();
            prop_assert_eq!(v1, hajek_regret(&pol, &pi0, &data, &w0).unwrap());
            prop_assert!(v >= v1 - 1e-12);
            prop_assert_eq!(worst_case_regret(&pi0, &pi0, &data, &spec).unwrap(), 0.0);
        }

        #[test]
        fn hajek_invariant_to_arm_scaling((t, x, y, e, _g) in instance(), c0 in 0.1f64..10.0, c1 in 0.1f64..10.0) {
            let data = build(&t, &x, &y, &e).unwrap();
            let pol = Policy::uniform(2, 1);
            let pi0 = Policy::control(2, 1);
            let w = data.nominal_weights().unwrap();
            let scaled: Vec<f64> = w.iter().zip(data.treatments()).map(|(v, &t)| v * if t == 0 { c0 } else { c1 }).collect();
            let a = hajek_regret(&pol, &pi0, &data, &w).unwrap();
            let b = hajek_regret(&pol, &pi0, &data, &scaled).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }

        #[test]
        fn ht_is_linear_in_outcomes((t, x, y, e, _g) in instance()) {
            let data = build(&t, &x, &y, &e).unwrap();
            let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
            let data2 = build(&t, &x, &y2, &e).unwrap();
            let pol = Policy::uniform(2, 1);
            let pi0 = Policy::control(2, 1);
            let a = ht_test_regret(&pol, &pi0, &data, &[0.5, 0.5]).unwrap();
            let b = ht_test_regret(&pol, &pi0, &data2, &[0.5, 0.5]).unwrap();
            prop_assert!((b - 2.0 * a).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}
