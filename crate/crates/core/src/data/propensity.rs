//! Nominal propensity estimation by multinomial logistic regression
//! (intercept + linear terms, arm 0 as reference), fitted by damped Newton
//! iterations from a zero start.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::policy::softmax_in_place;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropensityOptions {
    /// Clip fitted propensities into `[clip_eps, 1 - clip_eps]`; 0 disables.
    pub clip_eps: f64,
    pub max_iter: usize,
    /// Convergence threshold on the max-norm of the mean log-likelihood gradient.
    pub tol: f64,
}

impl Default for PropensityOptions {
    fn default() -> Self {
        Self {
            clip_eps: 1e-3,
            max_iter: 100,
            tol: 1e-9,
        }
    }
}

/// Fitted `P(T = t | X = x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    m: usize,
    d: usize,
    /// (m-1) x (d+1) row-major; row u-1 holds (intercept, slopes) of arm u.
    coef: Vec<f64>,
}

impl PropensityModel {
    pub fn fit(data: &Dataset, opts: &PropensityOptions) -> Result<Self> {
        let (n, d, m) = (data.n(), data.d(), data.m());
        if n < m {
            return Err(Error::domain(format!(
                "propensity fit needs n >= m (n = {n}, m = {m})"
            )));
        }
        let t = data.treatments();
        if t.iter().all(|&ti| ti == t[0]) {
            return Err(Error::SingleClass);
        }
        data.arms().require_nonempty()?;

        let p = d + 1;
        let k = (m - 1) * p;
        let mut model = Self {
            m,
            d,
            coef: vec![0.0; k],
        };
        let mut ll = model.log_likelihood(data.x(), t);
        let mut grad_norm = f64::INFINITY;
        for _ in 0..opts.max_iter {
            let (grad, hess) = model.gradient_hessian(data.x(), t);
            grad_norm = grad.amax() / n as f64;
            if grad_norm <= opts.tol {
                return Ok(model);
            }
            let step = newton_direction(hess, &grad);
            // backtracking on the log-likelihood
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial = Self {
                    m,
                    d,
                    coef: model
                        .coef
                        .iter()
                        .zip(step.iter())
                        .map(|(c, s)| c + scale * s)
                        .collect(),
                };
                let trial_ll = trial.log_likelihood(data.x(), t);
                // tolerate rounding noise in the likelihood near the optimum
                if trial_ll.is_finite() && trial_ll >= ll - 64.0 * f64::EPSILON * ll.abs().max(1.0) {
                    model = trial;
                    ll = trial_ll;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let (grad, _) = model.gradient_hessian(data.x(), t);
        let final_norm = grad.amax() / n as f64;
        if final_norm <= opts.tol {
            return Ok(model);
        }
        Err(Error::NotConverged {
            iterations: opts.max_iter,
            gradient_norm: final_norm.min(grad_norm),
        })
    }

    pub fn num_arms(&self) -> usize {
        self.m
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    /// Arm probabilities at `x`; they sum to one.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let p = self.d + 1;
        let mut s = vec![0.0; self.m];
        for u in 1..self.m {
            let c = &self.coef[(u - 1) * p..u * p];
            s[u] = c[0] + c[1..].iter().zip(x).map(|(b, xi)| b * xi).sum::<f64>();
        }
        softmax_in_place(&mut s);
        s
    }

    fn log_likelihood(&self, x: &Matrix, t: &[usize]) -> f64 {
        (0..x.rows())
            .map(|i| self.probabilities(x.row(i))[t[i]].ln())
            .sum()
    }

    fn gradient_hessian(&self, x: &Matrix, t: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.d + 1;
        let k = (self.m - 1) * p;
        let mut grad = DVector::zeros(k);
        let mut hess = DMatrix::zeros(k, k);
        let mut z = vec![1.0; p];
        for i in 0..x.rows() {
            z[1..].copy_from_slice(x.row(i));
            let pr = self.probabilities(x.row(i));
            for u in 1..self.m {
                let resid = f64::from(u8::from(t[i] == u)) - pr[u];
                for a in 0..p {
                    grad[(u - 1) * p + a] += resid * z[a];
                }
                for v in 1..self.m {
                    let w = if u == v {
                        pr[u] * (1.0 - pr[u])
                    } else {
                        -pr[u] * pr[v]
                    };
                    for a in 0..p {
                        for b in 0..p {
                            hess[((u - 1) * p + a, (v - 1) * p + b)] += w * z[a] * z[b];
                        }
                    }
                }
            }
        }
        (grad, hess)
    }
}

/// Solves `H step = grad`, adding a ridge when `H` is numerically singular
/// (e.g. duplicated covariates).
fn newton_direction(hess: DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let scale = hess.diagonal().amax().max(1e-300);
    let mut ridge = 0.0;
    loop {
        let mut h = hess.clone();
        for j in 0..h.nrows() {
            h[(j, j)] += ridge;
        }
        if let Some(chol) = h.cholesky() {
            return chol.solve(grad);
        }
        ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 10.0 };
    }
}

/// Fits the propensity model and returns `ê_{T_i}(X_i)` for every unit.
pub fn estimate_propensities(data: &Dataset, clip_eps: f64) -> Result<Vec<f64>> {
    let opts = PropensityOptions {
        clip_eps,
        ..PropensityOptions::default()
    };
    let model = PropensityModel::fit(data, &opts)?;
    observed_arm_propensities(&model, data, clip_eps)
}

pub(crate) fn observed_arm_propensities(
    model: &PropensityModel,
    data: &Dataset,
    clip_eps: f64,
) -> Result<Vec<f64>> {
    if !(0.0..0.5).contains(&clip_eps) {
        return Err(Error::domain(format!("clip_eps {clip_eps} not in [0, 0.5)")));
    }
    Ok((0..data.n())
        .map(|i| {
            let e = model.probabilities(data.row(i))[data.treatments()[i]];
            clip(e, clip_eps)
        })
        .collect())
}

pub(crate) fn clip(e: f64, eps: f64) -> f64 {
    if eps > 0.0 {
        e.clamp(eps, 1.0 - eps)
    } else {
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn intercept_only_recovers_frequency() {
        let t: Vec<usize> = (0..100).map(|i| usize::from(i < 30)).collect();
        let data = Dataset::new(Matrix::zeros(100, 0), t, vec![0.0; 100], 2).unwrap();
        let e = estimate_propensities(&data, 0.0).unwrap();
        for (i, ei) in e.iter().enumerate() {
            let want = if i < 30 { 0.3 } else { 0.7 };
            assert!((ei - want).abs() < 1e-10, "{ei}");
        }
    }

    #[test]
    fn independent_balanced_treatment_gives_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 2000;
        let x: Vec<f64> = (0..n * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t: Vec<usize> = (0..n).map(|_| usize::from(rng.gen_bool(0.5))).collect();
        let data = Dataset::new(Matrix::new(n, 2, x).unwrap(), t, vec![0.0; n], 2).unwrap();
        let e = estimate_propensities(&data, 0.0).unwrap();
        assert!(e.iter().all(|ei| (ei - 0.5).abs() < 0.05));
    }

    #[test]
    fn probabilities_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 300;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let t: Vec<usize> = x
            .iter()
            .map(|&xi| {
                let u: f64 = rng.gen();
                if u < 0.2 + 0.1 * xi.tanh() {
                    0
                } else if u < 0.6 {
                    1
                } else {
                    2
                }
            })
            .collect();
        let data = Dataset::new(Matrix::new(n, 1, x).unwrap(), t, vec![0.0; n], 3).unwrap();
        let model = PropensityModel::fit(&data, &PropensityOptions::default()).unwrap();
        for i in 0..n {
            let p = model.probabilities(data.row(i));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn clipping_rule() {
        assert_eq!(clip(0.9995, 1e-3), 0.999);
        assert_eq!(clip(0.0001, 1e-3), 1e-3);
        assert_eq!(clip(0.9995, 0.0), 0.9995);
    }

    #[test]
    fn degenerate_inputs() {
        let data = Dataset::new(Matrix::zeros(3, 0), vec![1, 1, 1], vec![0.0; 3], 2).unwrap();
        assert!(matches!(
            estimate_propensities(&data, 0.0),
            Err(Error::SingleClass)
        ));
        let data = Dataset::new(Matrix::zeros(1, 0), vec![1], vec![0.0], 2).unwrap();
        assert!(estimate_propensities(&data, 0.0).is_err());
    }

    #[test]
    fn separable_data_does_not_converge() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 - 9.5).collect();
        let t: Vec<usize> = x.iter().map(|&v| usize::from(v > 0.0)).collect();
        let data = Dataset::new(Matrix::new(20, 1, x).unwrap(), t, vec![0.0; 20], 2).unwrap();
        let opts = PropensityOptions {
            max_iter: 20,
            tol: 1e-12,
            ..Default::default()
        };
        assert!(matches!(
            PropensityModel::fit(&data, &opts),
            Err(Error::NotConverged { .. })
        ));
    }
}
