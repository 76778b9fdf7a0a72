//! Synthetic data with known counterfactuals and known true propensities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::policy::softmax_in_place;

/// Binary-treatment design: a latent class shifts the covariate mean, the
/// nominal propensity is logistic in `x`, and the true propensity sits at the
/// edge of the `gamma_true` sensitivity set on the side picked by whether
/// treatment helps (`Y(1) < Y(0)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParamsBinary {
    pub mu_x: Vec<f64>,
    pub beta_tilde: Vec<f64>,
    pub beta_treat: Vec<f64>,
    pub alpha: f64,
    pub eta_tilde: f64,
    /// Intercept followed by one slope per covariate.
    pub beta_prop: Vec<f64>,
    pub gamma_true: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for SimParamsBinary {
    fn default() -> Self {
        Self {
            mu_x: vec![-1.0, 0.5, -1.0, 0.0, -1.0],
            beta_tilde: vec![0.0, 0.5, -0.5, 0.0, 0.0],
            beta_treat: vec![-1.5, 1.0, -1.5, 1.0, 0.5],
            alpha: 2.5,
            eta_tilde: -2.0,
            beta_prop: vec![0.0, 0.75, -0.5, 0.0, -1.0, 0.0],
            gamma_true: 1.5,
            n: 200,
            seed: 0,
        }
    }
}

/// Three-arm design with covariates uniform on `[-3, 3]^d`; hidden
/// confounding tilts the odds of arm 1 by `gamma_true`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParamsMulti {
    /// Per-arm loading on the hidden binary noise `ξ`; entry 0 applies to
    /// every arm.
    pub eta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta_tilde: Vec<f64>,
    /// Per-arm outcome slopes (row 0 is unused by the outcome model).
    pub beta_t: Vec<Vec<f64>>,
    /// Per-arm nominal assignment scores.
    pub beta_treat: Vec<Vec<f64>>,
    pub gamma_true: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for SimParamsMulti {
    fn default() -> Self {
        Self {
            eta: vec![0.0, -2.0, 0.0],
            alpha: vec![0.0, 2.0, 0.5],
            beta_tilde: vec![0.0, 0.5, -0.5, 0.0, 0.0],
            beta_t: vec![
                vec![0.0; 5],
                vec![-0.75, 0.375, -0.75, 0.75, 0.375],
                vec![0.0; 5],
            ],
            beta_treat: vec![
                vec![0.0; 5],
                vec![0.0, 1.5, -1.0, 0.0, -2.0],
                vec![0.0, 0.0, 0.5, 0.0, 0.5],
            ],
            gamma_true: 1.5,
            n: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    /// Observed data; propensities are the nominal ones of the observed arm
    /// and potential outcomes are attached.
    pub data: Dataset,
    /// True inverse propensities of the observed arm, `1 / e_{T_i}(X_i, U_i)`.
    pub true_weights: Vec<f64>,
    /// Nominal assignment probabilities for every arm (n x m).
    pub nominal: Matrix,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

fn check_len(name: &str, v: &[f64], want: usize) -> Result<()> {
    if v.len() != want {
        return Err(Error::Config(format!("{name} has length {}, expected {want}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("{name} has a non-finite entry")));
    }
    Ok(())
}

fn check_gamma(g: f64) -> Result<()> {
    if !(g.is_finite() && g >= 1.0) {
        return Err(Error::Config(format!("gamma_true must be >= 1, got {g}")));
    }
    Ok(())
}

/// Inverse propensity at the lower (`helps = false`) or upper end of the
/// sensitivity interval around the nominal inverse propensity `1 / e`.
fn edge_weight(e: f64, gamma: f64, upper: bool) -> f64 {
    let w = 1.0 / e;
    if upper {
        1.0 + gamma * (w - 1.0)
    } else {
        1.0 + (w - 1.0) / gamma
    }
}

pub fn simulate_binary(params: &SimParamsBinary) -> Result<Simulation> {
    let d = params.mu_x.len();
    if d == 0 {
        return Err(Error::Config("mu_x must be non-empty".into()));
    }
    check_len("mu_x", &params.mu_x, d)?;
    check_len("beta_tilde", &params.beta_tilde, d)?;
    check_len("beta_treat", &params.beta_treat, d)?;
    check_len("beta_prop", &params.beta_prop, d + 1)?;
    check_len("alpha/eta_tilde", &[params.alpha, params.eta_tilde], 2)?;
    check_gamma(params.gamma_true)?;

    let n = params.n;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut x = Vec::with_capacity(n * d);
    let (mut t, mut y, mut e_hat, mut py) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(2 * n),
    );
    let mut true_weights = Vec::with_capacity(n);
    let mut nominal = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let shift = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let xi: Vec<f64> = params
            .mu_x
            .iter()
            .map(|mu| shift * mu + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let xi_noise = f64::from(u8::from(rng.gen_bool(0.5)));
        let eps: f64 = rng.sample(StandardNormal);
        let base = dot(&params.beta_tilde, &xi) + params.eta_tilde * (1.0 + xi_noise) + eps;
        let y0 = base;
        let y1 = base + dot(&params.beta_treat, &xi) + params.alpha;
        let helps = y1 < y0;

        let e1 = sigmoid(params.beta_prop[0] + dot(&params.beta_prop[1..], &xi));
        // true inverse propensity of treatment; its reciprocal is P(T = 1)
        let w1 = edge_weight(e1, params.gamma_true, helps);
        let treated = rng.gen_bool((1.0 / w1).min(1.0));
        let ti = usize::from(treated);

        x.extend_from_slice(&xi);
        t.push(ti);
        y.push(if treated { y1 } else { y0 });
        py.extend_from_slice(&[y0, y1]);
        e_hat.push(if treated { e1 } else { 1.0 - e1 });
        nominal.extend_from_slice(&[1.0 - e1, e1]);
        true_weights.push(if treated { w1 } else { 1.0 / (1.0 - 1.0 / w1) });
    }
    let data = Dataset::new(Matrix::new(n, d, x)?, t, y, 2)?
        .with_propensities(e_hat)?
        .with_potential_outcomes(Matrix::new(n, 2, py)?)?;
    Ok(Simulation {
        data,
        true_weights,
        nominal: Matrix::new(n, 2, nominal)?,
    })
}

pub fn simulate_multi(params: &SimParamsMulti) -> Result<Simulation> {
    let m = params.alpha.len();
    let d = params.beta_tilde.len();
    if m < 2 {
        return Err(Error::Config("need at least two arms".into()));
    }
    if d == 0 {
        return Err(Error::Config("beta_tilde must be non-empty".into()));
    }
    check_len("eta", &params.eta, m)?;
    check_len("alpha", &params.alpha, m)?;
    if params.beta_t.len() != m || params.beta_treat.len() != m {
        return Err(Error::Config(format!("beta_t and beta_treat need {m} rows")));
    }
    for t in 0..m {
        check_len("beta_t row", &params.beta_t[t], d)?;
        check_len("beta_treat row", &params.beta_treat[t], d)?;
    }
    check_gamma(params.gamma_true)?;
    let g = params.gamma_true;

    let n = params.n;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut x = Vec::with_capacity(n * d);
    let (mut t, mut y, mut e_hat) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut py = Vec::with_capacity(m * n);
    let mut nominal = Vec::with_capacity(m * n);
    let mut true_weights = Vec::with_capacity(n);
    let mut outcomes = vec![0.0; m];
    let mut e_nom = vec![0.0; m];
    let mut e_true = vec![0.0; m];
    for _ in 0..n {
        let xi: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let xi_noise = f64::from(u8::from(rng.gen_bool(0.5)));
        let eps: f64 = rng.sample(StandardNormal);
        let base = dot(&params.beta_tilde, &xi) + params.eta[0] * xi_noise + eps;
        outcomes[0] = base;
        for s in 1..m {
            outcomes[s] = base + dot(&params.beta_t[s], &xi) + params.alpha[s] + params.eta[s] * xi_noise;
        }
        let confounded = outcomes[1] < outcomes[0];

        for s in 0..m {
            e_nom[s] = dot(&params.beta_treat[s], &xi);
        }
        softmax_in_place(&mut e_nom);
        // odds of arm 1 scaled by 1/Γ when it helps, Γ otherwise; the other
        // arms share the remaining mass in nominal proportion
        let e1 = e_nom[1];
        let tilted = if confounded {
            e1 / (e1 + g * (1.0 - e1))
        } else {
            g * e1 / (g * e1 + 1.0 - e1)
        };
        let scale = if e1 < 1.0 { (1.0 - tilted) / (1.0 - e1) } else { 0.0 };
        for s in 0..m {
            e_true[s] = if s == 1 { tilted } else { e_nom[s] * scale };
        }
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut ti = m - 1;
        for (s, p) in e_true.iter().enumerate() {
            acc += p;
            if u < acc {
                ti = s;
                break;
            }
        }
        // guard against rounding picking a zero-probability arm
        while e_true[ti] == 0.0 {
            ti -= 1;
        }

        x.extend_from_slice(&xi);
        t.push(ti);
        y.push(outcomes[ti]);
        py.extend_from_slice(&outcomes);
        nominal.extend_from_slice(&e_nom);
        e_hat.push(e_nom[ti]);
        true_weights.push(1.0 / e_true[ti]);
    }
    let data = Dataset::new(Matrix::new(n, d, x)?, t, y, m)?
        .with_propensities(e_hat)?
        .with_potential_outcomes(Matrix::new(n, m, py)?)?;
    Ok(Simulation {
        data,
        true_weights,
        nominal: Matrix::new(n, m, nominal)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::weight_bounds;

    /// The closed form for the binary design's true inverse propensity at
    /// Γ = 1.5.
    fn closed_form(e: f64, g: f64) -> f64 {
        (4.0 + 5.0 * g + e * (2.0 - 5.0 * g)) / (6.0 * e)
    }

    #[test]
    fn closed_form_hits_interval_ends() {
        assert!((closed_form(0.5, 1.0) - 2.5).abs() < 1e-15);
        assert!((closed_form(0.5, 0.0) - 5.0 / 3.0).abs() < 1e-15);
        for e in [0.01, 0.2, 0.5, 0.77, 0.99] {
            assert!((edge_weight(e, 1.5, true) - closed_form(e, 1.0)).abs() < 1e-12);
            assert!((edge_weight(e, 1.5, false) - closed_form(e, 0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_weights_on_interval_edges() {
        let sim = simulate_binary(&SimParamsBinary {
            n: 10_000,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let w0 = sim.data.nominal_weights().unwrap();
        let (a, b) = weight_bounds(&w0, 1.5).unwrap();
        for i in 0..w0.len() {
            let w = sim.true_weights[i];
            let tol = 1e-9 * w;
            assert!(a[i] - tol <= w && w <= b[i] + tol);
            let at_a = (w - a[i]).abs() <= tol;
            let at_b = (w - b[i]).abs() <= tol;
            assert!(at_a ^ at_b, "unit {i}: {w} vs [{}, {}]", a[i], b[i]);
        }
        assert_eq!(sim.data.n(), 10_000);
        assert!(sim.data.arms().require_nonempty().is_ok());
    }

    #[test]
    fn binary_is_deterministic() {
        let p = SimParamsBinary { n: 50, seed: 11, ..Default::default() };
        let a = simulate_binary(&p).unwrap();
        let b = simulate_binary(&p).unwrap();
        assert_eq!(a.data.outcomes(), b.data.outcomes());
        assert_eq!(a.true_weights, b.true_weights);
    }

    #[test]
    fn multi_support_and_effects() {
        let sim = simulate_multi(&SimParamsMulti {
            n: 50_000,
            seed: 5,
            ..Default::default()
        })
        .unwrap();
        assert!(sim.data.x().as_slice().iter().all(|v| (-3.0..=3.0).contains(v)));
        let py = sim.data.potential_outcomes().unwrap();
        let gap: f64 = (0..sim.data.n()).map(|i| py.get(i, 2) - py.get(i, 0)).sum::<f64>()
            / sim.data.n() as f64;
        assert!((gap - 0.5).abs() < 0.1, "gap {gap}");
    }

    #[test]
    fn multi_true_weights_within_sensitivity_set() {
        let sim = simulate_multi(&SimParamsMulti {
            n: 5_000,
            seed: 9,
            ..Default::default()
        })
        .unwrap();
        let w0 = sim.data.nominal_weights().unwrap();
        let (a, b) = weight_bounds(&w0, 1.5).unwrap();
        for i in 0..w0.len() {
            let w = sim.true_weights[i];
            let tol = 1e-9 * w;
            assert!(a[i] - tol <= w && w <= b[i] + tol, "unit {i}");
        }
    }

    #[test]
    fn no_hidden_noise_means_no_confounding_by_it() {
        let p = SimParamsMulti {
            eta: vec![0.0; 3],
            n: 200,
            seed: 1,
            ..Default::default()
        };
        let sim = simulate_multi(&p).unwrap();
        let py = sim.data.potential_outcomes().unwrap();
        // with η = 0 the arm contrasts are deterministic in x
        for i in 0..sim.data.n() {
            let x = sim.data.row(i);
            let want = dot(&p.beta_t[1], x) + p.alpha[1];
            assert!((py.get(i, 1) - py.get(i, 0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_params() {
        let p = SimParamsBinary { beta_prop: vec![0.0; 3], ..Default::default() };
        assert!(simulate_binary(&p).is_err());
        let p = SimParamsMulti { gamma_true: 0.5, ..Default::default() };
        assert!(simulate_multi(&p).is_err());
    }
}
