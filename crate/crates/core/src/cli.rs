//! Command-line front end: `fit`, `evaluate`, `simulate`, `calibrate` and
//! `audit`. Every subcommand accepts `--config <file.json>`; keys mirror the
//! long flag names (with underscores) and flags given on the command line
//! take precedence.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    load_dataset, observed_arm_propensities, write_dataset, ColumnSchema, Dataset,
    PropensityModel, PropensityOptions,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    calibration_matrix, hajek_regret, ht_test_regret, ipw_value, odds_ratio_audit, simulate_binary,
    simulate_multi, true_regret, worst_case_regret, write_calibration_csv, write_odds_ratio_csv,
    write_regret_curves_csv, RegretCurve, SimParamsBinary, SimParamsMulti, Simulation,
};
use crate::optimize::{gamma_path_fit, subgradient_fit, tree_partition_fit, FitOptions, FitResult};
use crate::policy::Policy;
use crate::uncertainty::{BudgetedMethod, UncertaintyFamily};

#[derive(Debug, Parser)]
#[command(name = "robust-policy", version, about = "Confounding-robust policy learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a minimax-regret policy from a CSV dataset.
    Fit(Flags),
    /// Report regret estimates of a saved policy on a dataset.
    Evaluate(Flags),
    /// Run replicated synthetic experiments with known counterfactuals.
    Simulate(Flags),
    /// Cross-evaluate policies trained along a Γ grid.
    Calibrate(Flags),
    /// Odds ratios induced by refitting propensities without each covariate.
    Audit(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Control,
    Uniform,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Logistic,
    Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Two-arm design with outcome-driven assignment.
    #[value(alias = "binary-sec7")]
    #[serde(alias = "binary-sec7")]
    Binary,
    /// Three-arm design, confounding on arm 1.
    #[value(alias = "multi-sec7")]
    #[serde(alias = "multi-sec7")]
    MultiArm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Simplex,
    Parametric,
}

impl From<SolverKind> for BudgetedMethod {
    fn from(s: SolverKind) -> Self {
        match s {
            SolverKind::Simplex => BudgetedMethod::Simplex,
            SolverKind::Parametric => BudgetedMethod::Parametric,
        }
    }
}

/// Flags shared by all subcommands; unused ones are ignored. Every field is
/// optional so that a config file can supply it.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    /// JSON file with default values for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Input CSV dataset.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory for emitted files (created if missing). Default: current directory.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Comma-separated covariate columns (default: every column starting with `x`).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    #[arg(long)]
    pub treatment_col: Option<String>,
    #[arg(long)]
    pub outcome_col: Option<String>,
    /// Column with nominal propensities of the observed arm; estimated by
    /// logistic regression when absent.
    #[arg(long)]
    pub propensity_col: Option<String>,
    /// Comma-separated potential-outcome columns in arm order (simulated data).
    #[arg(long, value_delimiter = ',')]
    pub potential_cols: Option<Vec<String>>,
    /// Sensitivity parameter(s) Γ; a comma-separated list fits a path.
    #[arg(long, alias = "gammas", value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    /// Read Γ values as log Γ.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub log_gamma: Option<bool>,
    /// Budget fraction(s) ρ in [0, 1]; absent means the plain box set.
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub baseline: Option<BaselineKind>,
    /// Policy JSON used as the baseline with `--baseline file`.
    #[arg(long)]
    pub baseline_path: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyKind>,
    /// Policy JSON to evaluate (evaluate).
    #[arg(long)]
    pub policy_file: Option<PathBuf>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub eta0: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    /// Disable falling back to the baseline when the best objective is positive.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_fallback: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Sample size per simulated replication.
    #[arg(long)]
    pub n: Option<usize>,
    /// Size of the simulated test sample used for true regret.
    #[arg(long)]
    pub test_n: Option<usize>,
    /// Randomized test CSV for the Horvitz-Thompson regret (evaluate).
    #[arg(long)]
    pub test_input: Option<PathBuf>,
    /// Randomization probabilities of the test data, one per arm.
    #[arg(long, value_delimiter = ',')]
    pub randomization: Option<Vec<f64>>,
    /// Exact method for budgeted inner problems.
    #[arg(long, value_enum)]
    pub budget_solver: Option<SolverKind>,
    /// Clipping of estimated propensities.
    #[arg(long)]
    pub clip_eps: Option<f64>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f; } )*
    };
}

impl Flags {
    /// Fills unset flags from the config file, if one was given.
    fn with_config(mut self) -> Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: Flags = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        merge_fields!(self, file;
            input, output_dir, covariates, treatment_col, outcome_col, propensity_col,
            potential_cols, gamma, log_gamma, rho, baseline, baseline_path, policy, policy_file,
            depth, min_leaf, restarts, iters, eta0, kappa, init_scale, no_fallback, seed, reps,
            preset, n, test_n, test_input, randomization, budget_solver, clip_eps,
        );
        Ok(self)
    }

    fn output_dir(&self) -> Result<PathBuf> {
        let dir = self.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn schema(&self) -> ColumnSchema {
        let mut s = ColumnSchema::default();
        if let Some(c) = &self.covariates {
            s.covariates = c.clone();
        }
        if let Some(c) = &self.treatment_col {
            s.treatment = c.clone();
        }
        if let Some(c) = &self.outcome_col {
            s.outcome = c.clone();
        }
        s.propensity = self.propensity_col.clone();
        if let Some(c) = &self.potential_cols {
            s.potential_outcomes = c.clone();
        }
        s
    }

    fn clip_eps(&self) -> f64 {
        self.clip_eps.unwrap_or(PropensityOptions::default().clip_eps)
    }

    /// Loads the input dataset, estimating propensities when no column holds them.
    fn dataset(&self) -> Result<Dataset> {
        let path = self
            .input
            .as_ref()
            .ok_or_else(|| Error::Config("--input is required".into()))?;
        let data = load_dataset(path, &self.schema())?;
        for w in data.warnings() {
            eprintln!("warning: {w}");
        }
        with_estimated_propensities(data, self.clip_eps())
    }

    fn gammas(&self, default: &[f64]) -> Result<Vec<f64>> {
        let raw = self.gamma.clone().unwrap_or_else(|| default.to_vec());
        if raw.is_empty() {
            return Err(Error::Config("empty gamma list".into()));
        }
        let gammas: Vec<f64> = if self.log_gamma.unwrap_or(false) {
            raw.iter().map(|g| g.exp()).collect()
        } else {
            raw
        };
        if gammas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("gamma values must be strictly ascending".into()));
        }
        Ok(gammas)
    }

    fn single_rho(&self) -> Result<Option<f64>> {
        match self.rho.as_deref() {
            None | Some([]) => Ok(None),
            Some([r]) => Ok(Some(*r)),
            Some(_) => Err(Error::Config("this subcommand takes a single --rho".into())),
        }
    }

    fn family(&self, data: &Dataset, rho: Option<f64>) -> Result<UncertaintyFamily> {
        let mut fam = UncertaintyFamily::new(data.nominal_weights()?).with_rho(rho);
        fam.budget_method = self.budget_solver.unwrap_or(SolverKind::Parametric).into();
        Ok(fam)
    }

    fn baseline(&self, m: usize, d: usize) -> Result<Policy> {
        let pol = match self.baseline.unwrap_or(BaselineKind::Control) {
            BaselineKind::Control => Policy::control(m, d),
            BaselineKind::Uniform => Policy::uniform(m, d),
            BaselineKind::File => {
                let path = self
                    .baseline_path
                    .as_ref()
                    .ok_or_else(|| Error::Config("--baseline file needs --baseline-path".into()))?;
                Policy::from_json(&fs::read_to_string(path)?)?
            }
        };
        if pol.m() != m || pol.d() != d {
            return Err(Error::Config(format!(
                "baseline has m = {}, d = {}; data has m = {m}, d = {d}",
                pol.m(),
                pol.d()
            )));
        }
        Ok(pol)
    }

    fn fit_options(&self) -> Result<FitOptions> {
        let def = FitOptions::default();
        let opts = FitOptions {
            eta0: self.eta0.unwrap_or(def.eta0),
            kappa: self.kappa.unwrap_or(def.kappa),
            iters: self.iters.unwrap_or(def.iters),
            restarts: self.restarts.unwrap_or(def.restarts),
            seed: self.seed.unwrap_or(def.seed),
            init_scale: self.init_scale.unwrap_or(def.init_scale),
            fallback_to_baseline: !self.no_fallback.unwrap_or(false),
            radius: None,
        };
        opts.validate()?;
        Ok(opts)
    }
}

fn with_estimated_propensities(data: Dataset, clip_eps: f64) -> Result<Dataset> {
    if data.propensities().is_some() {
        return Ok(data);
    }
    let opts = PropensityOptions {
        clip_eps,
        ..PropensityOptions::default()
    };
    let model = PropensityModel::fit(&data, &opts)?;
    let e = observed_arm_propensities(&model, &data, clip_eps)?;
    data.with_propensities(e)
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
    let mut f = fs::File::create(dir.join(name))?;
    f.write_all(contents)?;
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Parses `argv` and runs; returns the process exit code. Errors are printed
/// as one diagnostic line on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                msg.push_str(&format!(": {s}"));
                src = s.source();
            }
            eprintln!("{msg}");
            1
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Fit(f) => cmd_fit(&f.with_config()?),
        Command::Evaluate(f) => cmd_evaluate(&f.with_config()?),
        Command::Simulate(f) => cmd_simulate(&f.with_config()?),
        Command::Calibrate(f) => cmd_calibrate(&f.with_config()?),
        Command::Audit(f) => cmd_audit(&f.with_config()?),
    }
}

#[derive(Serialize)]
struct PathRow {
    gamma: f64,
    objective: f64,
    selected_from: f64,
    fell_back: bool,
}

fn cmd_fit(f: &Flags) -> Result<()> {
    let data = f.dataset()?;
    let dir = f.output_dir()?;
    let gammas = f.gammas(&[1.0])?;
    let pi0 = f.baseline(data.m(), data.d())?;
    let family = f.family(&data, f.single_rho()?)?;
    let fits: Vec<FitResult> = match f.policy.unwrap_or(PolicyKind::Logistic) {
        PolicyKind::Logistic => {
            let opts = f.fit_options()?;
            if gammas.len() == 1 {
                let spec = family.at(gammas[0], data.arms())?;
                vec![subgradient_fit(&data, &spec, &pi0, &opts).map_err(|e| e.at_gamma(gammas[0]))?]
            } else {
                gamma_path_fit(&data, &family, &gammas, &pi0, &opts)?
            }
        }
        PolicyKind::Tree => gammas
            .iter()
            .map(|&g| {
                let spec = family.at(g, data.arms())?;
                tree_partition_fit(&data, &spec, &pi0, f.depth.unwrap_or(2), f.min_leaf.unwrap_or(5))
                    .map_err(|e| e.at_gamma(g))
            })
            .collect::<Result<_>>()?,
    };
    for fit in &fits {
        println!(
            "gamma={} objective={} fell_back={}",
            fit.gamma, fit.objective, fit.fell_back
        );
    }
    let last = fits.last().expect("at least one gamma");
    write_file(&dir, "policy.json", &json(&last.policy)?)?;
    if fits.len() == 1 {
        write_file(&dir, "fit.json", &json(last)?)?;
    } else {
        write_file(&dir, "fit.json", &json(&fits)?)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for fit in &fits {
            w.serialize(PathRow {
                gamma: fit.gamma,
                objective: fit.objective,
                selected_from: fit.selected_from,
                fell_back: fit.fell_back,
            })?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        write_file(&dir, "gamma_path.csv", &bytes)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluationReport {
    gamma: f64,
    worst_case_regret: f64,
    hajek_regret_nominal: f64,
    ipw_value: f64,
    ipw_value_baseline: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ht_test_regret: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    true_regret: Option<f64>,
}

fn cmd_evaluate(f: &Flags) -> Result<()> {
    let data = f.dataset()?;
    let dir = f.output_dir()?;
    let path = f
        .policy_file
        .as_ref()
        .ok_or_else(|| Error::Config("--policy-file is required".into()))?;
    let pol = Policy::from_json(&fs::read_to_string(path)?)?;
    let pi0 = f.baseline(data.m(), data.d())?;
    let family = f.family(&data, f.single_rho()?)?;
    let ht = match &f.test_input {
        Some(p) => {
            let test = load_dataset(p, &f.schema())?;
            let probs = f
                .randomization
                .clone()
                .unwrap_or_else(|| vec![1.0 / test.m() as f64; test.m()]);
            Some(ht_test_regret(&pol, &pi0, &test, &probs)?)
        }
        None => None,
    };
    let nominal = data.nominal_weights()?;
    let reports = f
        .gammas(&[1.0])?
        .into_iter()
        .map(|g| {
            let spec = family.at(g, data.arms())?;
            Ok(EvaluationReport {
                gamma: g,
                worst_case_regret: worst_case_regret(&pol, &pi0, &data, &spec).map_err(|e| e.at_gamma(g))?,
                hajek_regret_nominal: hajek_regret(&pol, &pi0, &data, &nominal)?,
                ipw_value: ipw_value(&pol, &data)?,
                ipw_value_baseline: ipw_value(&pi0, &data)?,
                ht_test_regret: ht,
                true_regret: match data.potential_outcomes() {
                    Some(_) => Some(true_regret(&pol, &pi0, &data)?),
                    None => None,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for r in &reports {
        println!(
            "gamma={} worst_case_regret={} hajek_regret_nominal={}",
            r.gamma, r.worst_case_regret, r.hajek_regret_nominal
        );
    }
    write_file(&dir, "evaluation.json", &json(&reports)?)
}

/// `{0.1, 0.2, …, 2.0, 3, 4, 5}` read as log Γ.
fn default_log_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (1..=20).map(|k| f64::from(k) / 10.0).collect();
    g.extend([3.0, 4.0, 5.0]);
    g
}

struct RepOutcome {
    sim: Simulation,
    /// per method: true regret at each Γ of the grid
    curves: Vec<Vec<f64>>,
}

fn cmd_simulate(f: &Flags) -> Result<()> {
    let dir = f.output_dir()?;
    let preset = f.preset.unwrap_or(Preset::Binary);
    let reps = f.reps.unwrap_or(50);
    let n = f.n.unwrap_or(200);
    let test_n = f.test_n.unwrap_or(10_000);
    let seed = f.seed.unwrap_or(0);
    let gammas = if f.gamma.is_some() {
        f.gammas(&[])?
    } else {
        default_log_grid().iter().map(|g| g.exp()).collect()
    };
    let rhos = f.rho.clone().unwrap_or_else(|| vec![0.5, 0.25]);
    let opts = f.fit_options()?;

    // one seed for the shared test sample, then one per replication
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let test_seed = seeder.next_u64();
    let rep_seeds: Vec<u64> = (0..reps).map(|_| seeder.next_u64()).collect();
    let draw = |n: usize, seed: u64| -> Result<Simulation> {
        match preset {
            Preset::Binary => simulate_binary(&SimParamsBinary { n, seed, ..Default::default() }),
            Preset::MultiArm => simulate_multi(&SimParamsMulti { n, seed, ..Default::default() }),
        }
    };
    let test = draw(test_n, test_seed)?.data;

    let mut methods = vec!["ipw".to_string(), "robust".to_string()];
    methods.extend(rhos.iter().map(|r| format!("robust_rho{r}")));
    let outcomes = rep_seeds
        .par_iter()
        .map(|&s| {
            let sim = draw(n, s)?;
            let data = &sim.data;
            let pi0 = f.baseline(data.m(), data.d())?;
            let family = f.family(data, None)?;
            let regret = |p: &Policy| true_regret(p, &pi0, &test);
            let mut curves = Vec::with_capacity(methods.len());
            let nominal = subgradient_fit(data, &family.at(1.0, data.arms())?, &pi0, &opts)?;
            curves.push(vec![regret(&nominal.policy)?; gammas.len()]);
            for rho in std::iter::once(None).chain(rhos.iter().copied().map(Some)) {
                let fam = family.clone().with_rho(rho);
                let fits = gamma_path_fit(data, &fam, &gammas, &pi0, &opts)?;
                curves.push(fits.iter().map(|fit| regret(&fit.policy)).collect::<Result<_>>()?);
            }
            Ok(RepOutcome { sim, curves })
        })
        .collect::<Result<Vec<_>>>()?;

    for (k, out) in outcomes.iter().enumerate() {
        let mut buf = Vec::new();
        write_dataset(&out.sim.data, &mut buf, &[("true_weight", &out.sim.true_weights)])?;
        write_file(&dir, &format!("data_rep{k:03}.csv"), &buf)?;
    }
    let curves: Vec<RegretCurve> = methods
        .iter()
        .enumerate()
        .map(|(j, method)| RegretCurve {
            method: method.clone(),
            gammas: gammas.clone(),
            values: outcomes.iter().map(|o| o.curves[j].clone()).collect(),
        })
        .collect();
    let mut buf = Vec::new();
    write_regret_curves_csv(&curves, &mut buf)?;
    write_file(&dir, "regret_curves.csv", &buf)?;
    let summary: Vec<_> = curves.iter().flat_map(RegretCurve::summaries).collect();
    write_file(&dir, "summary.json", &json(&summary)?)?;
    for s in summary.iter().filter(|s| s.gamma == gammas[0] || s.method != "ipw") {
        println!(
            "method={} gamma={} mean_regret={} stderr={}",
            s.method, s.gamma, s.mean_regret, s.stderr
        );
    }
    Ok(())
}

fn cmd_calibrate(f: &Flags) -> Result<()> {
    let data = f.dataset()?;
    let dir = f.output_dir()?;
    let gammas = f.gammas(&[1.05, 1.1, 1.2, 1.5])?;
    let pi0 = f.baseline(data.m(), data.d())?;
    let family = f.family(&data, f.single_rho()?)?;
    let cal = calibration_matrix(&data, &family, &gammas, &pi0, &f.fit_options()?)?;
    let mut buf = Vec::new();
    write_calibration_csv(&cal, &mut buf)?;
    write_file(&dir, "calibration.csv", &buf)?;
    write_file(&dir, "calibration.json", &json(&cal)?)?;
    print!("{}", String::from_utf8_lossy(&buf));
    Ok(())
}

#[derive(Serialize)]
struct AuditSummary {
    covariate: String,
    q05: f64,
    q25: f64,
    median: f64,
    q75: f64,
    q95: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn cmd_audit(f: &Flags) -> Result<()> {
    let path = f
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("--input is required".into()))?;
    let schema = f.schema();
    let data = load_dataset(path, &schema)?;
    let dir = f.output_dir()?;
    let names: Vec<String> = if schema.covariates.is_empty() {
        let mut rdr = csv::Reader::from_path(path)?;
        rdr.headers()?
            .iter()
            .map(str::trim)
            .filter(|h| h.starts_with('x'))
            .map(String::from)
            .collect()
    } else {
        schema.covariates.clone()
    };
    let opts = PropensityOptions {
        clip_eps: f.clip_eps(),
        ..PropensityOptions::default()
    };
    let ratios = odds_ratio_audit(&data, &opts)?;
    let mut buf = Vec::new();
    write_odds_ratio_csv(&names, &ratios, &mut buf)?;
    write_file(&dir, "odds_ratios.csv", &buf)?;
    let summary: Vec<AuditSummary> = names
        .iter()
        .zip(&ratios)
        .map(|(name, r)| {
            let mut s = r.clone();
            s.sort_by(f64::total_cmp);
            AuditSummary {
                covariate: name.clone(),
                q05: quantile(&s, 0.05),
                q25: quantile(&s, 0.25),
                median: quantile(&s, 0.5),
                q75: quantile(&s, 0.75),
                q95: quantile(&s, 0.95),
            }
        })
        .collect();
    for s in &summary {
        println!(
            "covariate={} q05={} median={} q95={}",
            s.covariate, s.q05, s.median, s.q95
        );
    }
    write_file(&dir, "odds_ratio_summary.json", &json(&summary)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_values_yield_to_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        fs::write(&cfg, r#"{"iters": 7, "seed": 3, "gamma": [1.0, 2.0], "baseline": "uniform"}"#).unwrap();
        let cli = Cli::try_parse_from([
            "robust-policy",
            "fit",
            "--config",
            cfg.to_str().unwrap(),
            "--iters",
            "11",
        ])
        .unwrap();
        let Command::Fit(flags) = cli.command else { panic!() };
        let flags = flags.with_config().unwrap();
        assert_eq!(flags.iters, Some(11));
        assert_eq!(flags.seed, Some(3));
        assert_eq!(flags.gamma, Some(vec![1.0, 2.0]));
        assert_eq!(flags.baseline, Some(BaselineKind::Uniform));
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        fs::write(&cfg, r#"{"iterations": 7}"#).unwrap();
        let flags = Flags { config: Some(cfg), ..Flags::default() };
        assert!(matches!(flags.with_config(), Err(Error::Config(_))));
    }

    #[test]
    fn log_gamma_and_ordering() {
        let flags = Flags { gamma: Some(vec![0.0, 1.0]), log_gamma: Some(true), ..Flags::default() };
        assert_eq!(flags.gammas(&[]).unwrap(), vec![1.0, std::f64::consts::E]);
        let flags = Flags { gamma: Some(vec![2.0, 1.0]), ..Flags::default() };
        assert!(flags.gammas(&[]).is_err());
    }

    #[test]
    fn default_grid_has_23_points() {
        let g = default_log_grid();
        assert_eq!(g.len(), 23);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[22], 5.0);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&s, 0.5), 2.0);
        assert_eq!(quantile(&s, 0.25), 1.0);
        assert!((quantile(&s, 0.05) - 0.2).abs() < 1e-15);
    }
}
