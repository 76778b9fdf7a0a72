use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PropensityModel, PropensityOptions};
use crate::error::{Error, Result};
use crate::optimize::{gamma_path_fit, FitOptions, FitResult};
use crate::policy::Policy;
use crate::uncertainty::UncertaintyFamily;

use super::worst_case_regret;

/// Cross-evaluation of policies trained along a Γ path:
/// `values[k][j]` is the worst-case regret of the policy trained at
/// `gammas[k]`, evaluated under `gammas[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMatrix {
    pub gammas: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub fits: Vec<FitResult>,
}

pub fn calibration_matrix(
    data: &Dataset,
    family: &UncertaintyFamily,
    gammas: &[f64],
    pi0: &Policy,
    opts: &FitOptions,
) -> Result<CalibrationMatrix> {
    let fits = gamma_path_fit(data, family, gammas, pi0, opts)?;
    let specs = gammas
        .iter()
        .map(|&g| family.at(g, data.arms()).map_err(|e| e.at_gamma(g)))
        .collect::<Result<Vec<_>>>()?;
    let values = fits
        .iter()
        .map(|fit| {
            specs
                .iter()
                .map(|spec| worst_case_regret(&fit.policy, pi0, data, spec))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationMatrix {
        gammas: gammas.to_vec(),
        values,
        fits,
    })
}

/// For each covariate `j`, refits the treatment model without it and returns
/// the per-unit odds ratio `[(1 − ê) ê₋ⱼ] / [ê (1 − ê₋ⱼ)]` of treatment.
/// Fitted probabilities are clipped by `opts.clip_eps` before forming odds.
pub fn odds_ratio_audit(data: &Dataset, opts: &PropensityOptions) -> Result<Vec<Vec<f64>>> {
    if data.m() != 2 {
        return Err(Error::Unsupported(format!(
            "the odds-ratio audit needs a binary treatment, got {} arms",
            data.m()
        )));
    }
    if data.d() < 2 {
        return Err(Error::domain("the odds-ratio audit needs at least two covariates"));
    }
    let treated = |model: &PropensityModel, d: &Dataset| -> Vec<f64> {
        (0..d.n())
            .map(|i| crate::data::clip(model.probabilities(d.row(i))[1], opts.clip_eps))
            .collect()
    };
    let full = PropensityModel::fit(data, opts)?;
    let e = treated(&full, data);
    (0..data.d())
        .map(|j| {
            let reduced = data.without_covariate(j)?;
            let model = PropensityModel::fit(&reduced, opts).map_err(|source| Error::Audit {
                column: j,
                source: Box::new(source),
            })?;
            let e_j = treated(&model, &reduced);
            Ok(e.iter()
                .zip(&e_j)
                .map(|(a, b)| (1.0 - a) * b / (a * (1.0 - b)))
                .collect())
        })
        .collect()
}

/// Draws a binary-treatment dataset with logistic assignment; used to probe
/// the audit on known designs.
#[cfg(test)]
pub(crate) fn logistic_design(n: usize, coef: &[f64], duplicate_first: bool, seed: u64) -> Dataset {
    use crate::data::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = coef.len() - 1 + usize::from(duplicate_first);
    let mut x = Vec::with_capacity(n * d);
    let mut t = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..coef.len() - 1).map(|_| rng.sample(StandardNormal)).collect();
        let s = coef[0] + coef[1..].iter().zip(&row).map(|(c, v)| c * v).sum::<f64>();
        t.push(usize::from(rng.gen::<f64>() < 1.0 / (1.0 + (-s).exp())));
        if duplicate_first {
            x.push(row[0]);
        }
        x.extend_from_slice(&row);
    }
    let y = vec![0.0; n];
    Dataset::new(Matrix::new(n, d, x).unwrap(), t, y, 2).unwrap()
}
