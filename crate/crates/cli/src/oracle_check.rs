//! Monte-Carlo estimates of a program against its exact distributions.

use std::collections::BTreeMap;

use dip_frontend::{enumerate_valuations, Program, Which};
use dip_oracle::{agreement, compare, estimate_distribution, eval_f64, Agreement, RunConfig};
use dip_reach::output_distributions;
use dip_semantics::BuildConfig;
use dip_symalg::{parse_q, Q};
use serde::{Deserialize, Serialize};

use crate::config::OracleSettings;

/// Seed offset of the independent second look at flagged cells.
const RETEST_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRun {
    pub eps: String,
    pub input: Vec<i64>,
    pub seed: u64,
    pub agreement: Agreement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub samples: u64,
    pub sigmas: f64,
    pub passed: bool,
    /// Cells compared in total, and how many needed the second look.
    pub cells: usize,
    pub retested: usize,
    pub runs: Vec<OracleRun>,
}

#[derive(Debug, thiserror::Error)]
pub enum OracleCheckError {
    #[error("bad epsilon {0:?}")]
    Eps(String),
    #[error(transparent)]
    Frontend(#[from] dip_frontend::FrontendError),
    #[error(transparent)]
    Reach(#[from] dip_reach::ReachError),
    #[error(transparent)]
    Oracle(#[from] dip_oracle::OracleError),
}

/// Sample every selected input at every ε and compare each output cell
/// with the exact probability (two-stage test, see [`agreement`]).
pub fn run_oracle(p: &Program, settings: &OracleSettings, build: &BuildConfig) -> Result<OracleReport, OracleCheckError> {
    let inputs = match &settings.inputs {
        Some(v) => v.clone(),
        None => enumerate_valuations(p, Which::Inputs, 100_000)?,
    };
    let dists = output_distributions(p, &inputs, build).into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut runs = Vec::new();
    for (e_idx, eps_text) in settings.eps.iter().enumerate() {
        let eps: Q = parse_q(eps_text).map_err(|_| OracleCheckError::Eps(eps_text.clone()))?;
        for (i_idx, (input, d)) in inputs.iter().zip(&dists).enumerate() {
            let reference: BTreeMap<Vec<i64>, (f64, f64)> =
                d.probs.iter().map(|(o, f)| (o.clone(), (eval_f64(f, &eps), 0.0))).collect();
            let seed = settings.seed.wrapping_add((e_idx * inputs.len() + i_idx) as u64);
            let agreement = agreement(settings.sigmas, |attempt| {
                let s = seed.wrapping_add(attempt.wrapping_mul(RETEST_OFFSET));
                let est = estimate_distribution(p, input, &RunConfig::new(eps.clone(), settings.samples, s))?;
                Ok(compare(&est, &reference))
            })?;
            runs.push(OracleRun { eps: eps_text.clone(), input: input.clone(), seed, agreement });
        }
    }
    let passed = runs.iter().all(|r| r.agreement.passed);
    let cells = runs.iter().map(|r| r.agreement.first.len()).sum();
    let retested = runs.iter().map(|r| r.agreement.retest.len()).sum();
    Ok(OracleReport { samples: settings.samples, sigmas: settings.sigmas, passed, cells, retested, runs })
}
