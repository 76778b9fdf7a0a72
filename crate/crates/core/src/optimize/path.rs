use super::{fit_with_warm_start, FitOptions, FitResult};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::worst_case_regret;
use crate::policy::Policy;
use crate::uncertainty::UncertaintyFamily;

/// Fits a policy at each Γ in ascending order, warm-starting each fit from
/// the previous one, then cross-checks: the policy reported at `Γ_k` is the
/// best, under `Γ_k`, of every policy fitted anywhere on the path (and the
/// baseline when fallback is enabled). A fit keeps its own policy unless
/// another candidate is strictly better. Because the sets are nested, the
/// reported objectives are nondecreasing in Γ.
pub fn gamma_path_fit(
    data: &Dataset,
    family: &UncertaintyFamily,
    gammas: &[f64],
    pi0: &Policy,
    opts: &FitOptions,
) -> Result<Vec<FitResult>> {
    if gammas.is_empty() {
        return Err(Error::domain("empty gamma path"));
    }
    if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g >= 1.0)) {
        return Err(Error::domain(format!("gamma {g} must be finite and >= 1")));
    }
    if gammas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("gammas must be strictly ascending"));
    }
    let specs = gammas
        .iter()
        .map(|&g| family.at(g, data.arms()).map_err(|e| e.at_gamma(g)))
        .collect::<Result<Vec<_>>>()?;

    let mut fits: Vec<FitResult> = Vec::with_capacity(gammas.len());
    for (k, spec) in specs.iter().enumerate() {
        let warm = fits.last().and_then(FitResult::best_theta);
        let fit = fit_with_warm_start(data, spec, pi0, opts, warm).map_err(|e| e.at_gamma(gammas[k]))?;
        fits.push(fit);
    }

    // candidate pool: every fit's reported policy
    let mut pool: Vec<(Policy, f64, bool)> = Vec::new();
    for fit in &fits {
        pool.push((fit.policy.clone(), fit.gamma, fit.fell_back));
    }
    if opts.fallback_to_baseline {
        pool.push((pi0.clone(), f64::NAN, true));
    }
    let mut out = Vec::with_capacity(fits.len());
    for (k, (fit, spec)) in fits.iter().zip(&specs).enumerate() {
        let mut chosen = fit.clone();
        for (j, (policy, source, is_base)) in pool.iter().enumerate() {
            if j == k {
                continue;
            }
            let value = worst_case_regret(policy, pi0, data, spec).map_err(|e| e.at_gamma(gammas[k]))?;
            if value < chosen.objective {
                chosen.policy = policy.clone();
                chosen.objective = value;
                chosen.fell_back = *is_base;
                chosen.selected_from = if source.is_nan() { spec.gamma() } else { *source };
            }
        }
        out.push(chosen);
    }
    Ok(out)
}
