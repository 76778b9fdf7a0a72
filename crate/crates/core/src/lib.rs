//! Confounding-robust policy learning.
//!
//! Learns treatment policies from observational data by minimizing the
//! worst case, over a marginal sensitivity model for the unknown true
//! propensities, of the self-normalized (Hájek) estimate of regret against a
//! baseline policy.
//!
//! * [`data`] — datasets, CSV ingestion, nominal propensity estimation
//! * [`uncertainty`] — weight bounds from Γ, optional deviation budgets
//! * [`subproblem`] — exact worst-case solvers for one treatment arm
//! * [`policy`] — constant, multinomial logistic and tree policies
//! * [`optimize`] — subgradient, Γ-path and greedy tree learners
//! * [`evaluation`] — estimators, simulators, calibration and audits
//! * [`cli`] — the `robust-policy` command-line front end

pub mod cli;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod optimize;
pub mod policy;
pub mod subproblem;
pub mod uncertainty;

pub use error::{Error, Result};
