//! Minimax policy learners: subgradient descent on logistic parameters with
//! random restarts, a warm-started path over increasing Γ, and greedy
//! recursive partitioning for trees.

mod path;
mod tree;

pub use path::gamma_path_fit;
pub use tree::tree_partition_fit;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::{worst_case, worst_case_regret};
use crate::policy::{logistic_scores, softmax_in_place, LogisticPolicy, Policy};
use crate::uncertainty::{BudgetedMethod, UncertaintySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Initial step size `η_0`.
    pub eta0: f64,
    /// Step decay exponent: `η_k = η_0 (k + 1)^(-κ)`.
    pub kappa: f64,
    pub iters: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Standard deviation of the random initializations (restarts 1..).
    pub init_scale: f64,
    /// Return the baseline when the best objective is positive.
    pub fallback_to_baseline: bool,
    /// Optional Euclidean ball for the parameters.
    pub radius: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            eta0: 1.0,
            kappa: 0.5,
            iters: 1000,
            restarts: 15,
            seed: 0,
            init_scale: 1.0,
            fallback_to_baseline: true,
            radius: None,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.eta0.is_finite() && self.eta0 > 0.0) {
            return bad("eta0 must be > 0");
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return bad("kappa must lie in (0, 1]");
        }
        if self.iters == 0 {
            return bad("iters must be >= 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be >= 1");
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return bad("init_scale must be >= 0");
        }
        if let Some(r) = self.radius {
            if !(r.is_finite() && r > 0.0) {
                return bad("radius must be > 0");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartResult {
    /// Worst-case regret of the averaged iterate.
    pub objective: f64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub policy: Policy,
    /// Worst-case regret of `policy` against the baseline.
    pub objective: f64,
    pub gamma: f64,
    pub fell_back: bool,
    pub per_restart: Vec<RestartResult>,
    /// Index into `per_restart` of the lowest objective.
    pub best_restart: Option<usize>,
    /// Γ of the fit that produced `policy` (differs from `gamma` when a
    /// path cross-check substituted another fit's policy).
    pub selected_from: f64,
    /// Options of the subgradient learner; absent for trees.
    pub options: Option<FitOptions>,
}

impl FitResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parameters of the best restart, whether or not it was returned.
    pub fn best_theta(&self) -> Option<&[f64]> {
        self.best_restart.map(|k| self.per_restart[k].theta.as_slice())
    }
}

/// Precomputed per-unit quantities shared by all restarts.
struct Problem<'a> {
    data: &'a Dataset,
    spec: &'a UncertaintySpec,
    /// `π0(T_i | X_i)`
    base: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(data: &'a Dataset, spec: &'a UncertaintySpec, pi0: &Policy) -> Result<Self> {
        if pi0.m() != data.m() || pi0.d() != data.d() {
            return Err(Error::domain("baseline policy shape does not match the data"));
        }
        if spec.len() != data.n() {
            return Err(Error::domain("uncertainty set size differs from n"));
        }
        data.arms().require_nonempty()?;
        let base = (0..data.n())
            .map(|i| pi0.probabilities(data.row(i))[data.treatments()[i]])
            .collect();
        Ok(Self { data, spec, base })
    }

    fn num_params(&self) -> usize {
        (self.data.m() - 1) * (self.data.d() + 1)
    }

    /// Averaged iterate of one run of projected subgradient descent.
    fn descend(&self, mut theta: Vec<f64>, opts: &FitOptions) -> Result<Vec<f64>> {
        let (n, m, d) = (self.data.n(), self.data.m(), self.data.d());
        let p = d + 1;
        let y = self.data.outcomes();
        let t = self.data.treatments();
        let mut probs = vec![0.0; n * m];
        let mut r = vec![0.0; n];
        let mut grad = vec![0.0; theta.len()];
        let mut avg = vec![0.0; theta.len()];
        for k in 0..opts.iters {
            for i in 0..n {
                let out = &mut probs[i * m..(i + 1) * m];
                logistic_scores(&theta, d, self.data.row(i), out);
                softmax_in_place(out);
                r[i] = (out[t[i]] - self.base[i]) * y[i];
            }
            let wc = worst_case(&r, self.data.arms(), self.spec, BudgetedMethod::Parametric, false)?;
            grad.iter_mut().for_each(|g| *g = 0.0);
            for i in 0..n {
                let c = wc.weights[i] / wc.arm_totals[i] * y[i];
                if c == 0.0 {
                    continue;
                }
                let pr = &probs[i * m..(i + 1) * m];
                let x = self.data.row(i);
                let ti = t[i];
                for u in 1..m {
                    let ds = c * pr[ti] * (f64::from(u8::from(ti == u)) - pr[u]);
                    let row = &mut grad[(u - 1) * p..u * p];
                    row[0] += ds;
                    for (g, xj) in row[1..].iter_mut().zip(x) {
                        *g += ds * xj;
                    }
                }
            }
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient { iteration: k });
            }
            let eta = opts.eta0 * ((k + 1) as f64).powf(-opts.kappa);
            for (th, g) in theta.iter_mut().zip(&grad) {
                *th -= eta * g;
            }
            if let Some(radius) = opts.radius {
                let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > radius {
                    theta.iter_mut().for_each(|v| *v *= radius / norm);
                }
            }
            for (a, th) in avg.iter_mut().zip(&theta) {
                *a += th;
            }
        }
        let inv = 1.0 / opts.iters as f64;
        avg.iter_mut().for_each(|a| *a *= inv);
        Ok(avg)
    }
}

fn initial_theta(restart: usize, len: usize, opts: &FitOptions) -> Vec<f64> {
    if restart == 0 || opts.init_scale == 0.0 {
        return vec![0.0; len];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(restart as u64);
    let normal = Normal::new(0.0, opts.init_scale).expect("finite scale");
    (0..len).map(|_| normal.sample(&mut rng)).collect()
}

/// Minimax logistic policy by subgradient descent with restarts.
pub fn subgradient_fit(
    data: &Dataset,
    spec: &UncertaintySpec,
    pi0: &Policy,
    opts: &FitOptions,
) -> Result<FitResult> {
    fit_with_warm_start(data, spec, pi0, opts, None)
}

/// As [`subgradient_fit`], with an extra restart started from `warm`.
pub(crate) fn fit_with_warm_start(
    data: &Dataset,
    spec: &UncertaintySpec,
    pi0: &Policy,
    opts: &FitOptions,
    warm: Option<&[f64]>,
) -> Result<FitResult> {
    opts.validate()?;
    let problem = Problem::new(data, spec, pi0)?;
    let len = problem.num_params();
    if let Some(w) = warm {
        if w.len() != len {
            return Err(Error::domain("warm start has the wrong number of parameters"));
        }
    }
    let mut starts: Vec<Vec<f64>> = (0..opts.restarts).map(|s| initial_theta(s, len, opts)).collect();
    starts.extend(warm.map(<[f64]>::to_vec));
    let (m, d) = (data.m(), data.d());
    let per_restart = starts
        .into_par_iter()
        .map(|theta0| {
            let theta = problem.descend(theta0, opts)?;
            let policy = Policy::Logistic(LogisticPolicy::new(m, d, theta.clone())?);
            let objective = worst_case_regret(&policy, pi0, data, spec)?;
            Ok(RestartResult { objective, theta })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (k, res) in per_restart.iter().enumerate() {
        if res.objective < per_restart[best].objective {
            best = k;
        }
    }
    let best_objective = per_restart[best].objective;
    let (policy, objective, fell_back) = if opts.fallback_to_baseline && !(best_objective <= 0.0) {
        (pi0.clone(), worst_case_regret(pi0, pi0, data, spec)?, true)
    } else {
        let theta = per_restart[best].theta.clone();
        (Policy::Logistic(LogisticPolicy::new(m, d, theta)?), best_objective, false)
    };
    Ok(FitResult {
        policy,
        objective,
        gamma: spec.gamma(),
        fell_back,
        per_restart,
        best_restart: Some(best),
        selected_from: spec.gamma(),
        options: Some(opts.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;

    fn toy(n: usize, y_treated: f64, y_control: f64) -> Dataset {
        let x: Vec<f64> = (0..n).map(|i| (i as f64 / n as f64) - 0.5).collect();
        let t: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let y = t.iter().map(|&ti| if ti == 1 { y_treated } else { y_control }).collect();
        Dataset::new(Matrix::new(n, 1, x).unwrap(), t, y, 2)
            .unwrap()
            .with_propensities(vec![0.5; n])
            .unwrap()
    }

    fn spec_for(data: &Dataset, gamma: f64) -> UncertaintySpec {
        UncertaintySpec::new(data.nominal_weights().unwrap(), gamma).unwrap()
    }

    #[test]
    fn zero_losses_give_zero_objective() {
        let data = toy(20, 0.0, 0.0);
        let opts = FitOptions { iters: 50, restarts: 3, ..Default::default() };
        let fit = subgradient_fit(&data, &spec_for(&data, 2.0), &Policy::control(2, 1), &opts).unwrap();
        assert_eq!(fit.objective, 0.0);
    }

    #[test]
    fn learns_treat_all() {
        let data = toy(40, -1.0, 1.0);
        let opts = FitOptions { iters: 2000, restarts: 1, ..Default::default() };
        let fit = subgradient_fit(&data, &spec_for(&data, 1.0), &Policy::control(2, 1), &opts).unwrap();
        assert!(!fit.fell_back);
        for i in 0..data.n() {
            assert!(fit.policy.probability(1, data.row(i)).unwrap() > 0.9);
        }
    }

    #[test]
    fn falls_back_when_treatment_hurts() {
        let data = toy(40, 1.0, -1.0);
        let opts = FitOptions { iters: 200, restarts: 4, ..Default::default() };
        let pi0 = Policy::control(2, 1);
        let fit = subgradient_fit(&data, &spec_for(&data, 1.5), &pi0, &opts).unwrap();
        assert!(fit.fell_back);
        assert_eq!(fit.objective, 0.0);
        assert_eq!(fit.policy, pi0);
    }

    #[test]
    fn deterministic_and_consistent() {
        let data = toy(30, -0.5, 0.2);
        let opts = FitOptions { iters: 100, restarts: 4, seed: 9, ..Default::default() };
        let spec = spec_for(&data, 1.5);
        let pi0 = Policy::control(2, 1);
        let a = subgradient_fit(&data, &spec, &pi0, &opts).unwrap();
        let b = subgradient_fit(&data, &spec, &pi0, &opts).unwrap();
        assert_eq!(a, b);
        let again = worst_case_regret(&a.policy, &pi0, &data, &spec).unwrap();
        assert!((again - a.objective).abs() <= 1e-8);
        assert_eq!(a.per_restart.len(), 4);
    }

    #[test]
    fn empty_arm_is_reported() {
        let x = Matrix::new(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        let data = Dataset::new(x, vec![0, 0, 0], vec![1.0; 3], 2)
            .unwrap()
            .with_propensities(vec![0.5; 3])
            .unwrap();
        let err = subgradient_fit(&data, &spec_for(&data, 1.0), &Policy::control(2, 1), &FitOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::EmptyArm { arm: 1 }));
    }

    #[test]
    fn rejects_bad_options() {
        for opts in [
            FitOptions { eta0: 0.0, ..Default::default() },
            FitOptions { kappa: 1.5, ..Default::default() },
            FitOptions { iters: 0, ..Default::default() },
            FitOptions { restarts: 0, ..Default::default() },
            FitOptions { radius: Some(-1.0), ..Default::default() },
        ] {
            assert!(opts.validate().is_err());
        }
    }

    #[test]
    fn radius_bounds_parameters() {
        let data = toy(40, -1.0, 1.0);
        let opts = FitOptions { iters: 500, restarts: 2, radius: Some(0.5), ..Default::default() };
        let fit = subgradient_fit(&data, &spec_for(&data, 1.0), &Policy::control(2, 1), &opts).unwrap();
        for r in &fit.per_restart {
            let norm = r.theta.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= 0.5 + 1e-12);
        }
    }
}
