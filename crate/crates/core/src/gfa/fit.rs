//! Fit loop and multi-restart selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::context::FitContext;
use super::elbo::elbo;
use super::state::{init_state, Hyperparams, VariationalState};
use super::updates::{update_qalpha, update_qtau, update_qw, update_qz};
use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A factor counts as active when its relative variance explained exceeds
/// this in at least one modality.
pub const ACTIVE_RVAR_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T: Real> {
    pub state: VariationalState<T>,
    /// Lower bound after each sweep.
    pub elbo_trace: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
    pub seed: u64,
    pub active_factors: Vec<usize>,
}

impl<T: Real> FitResult<T> {
    pub fn final_elbo(&self) -> T {
        *self.elbo_trace.last().expect("at least one sweep")
    }
}

/// Hook for optimising a linear transformation of the latent space after each
/// sweep. Currently the identity: enabling `rotation_opt` changes nothing.
fn rotation_hook<T: Real>(_state: &mut VariationalState<T>) {}

/// Runs variational EM to convergence: sweeps of q(W), q(Z), q(α), q(τ)
/// updates, stopping when the relative change of the lower bound falls below
/// `hp.tol` or after `hp.max_iters` sweeps.
pub fn fit<T: Real>(
    data: &GroupedDataset<T>,
    hp: &Hyperparams<T>,
    seed: u64,
) -> Result<FitResult<T>> {
    hp.validate()?;
    if data.n_observations() < 2 {
        return Err(Error::InvalidParameter(
            "fit needs at least two observations".into(),
        ));
    }
    for m in data.modalities() {
        if m.observed_count() == 0 {
            return Err(Error::InvalidParameter(format!(
                "modality `{}` has no observed entries",
                m.name()
            )));
        }
    }

    let ctx = FitContext::new(data);
    let mut state = init_state(data, hp, seed)?;
    let mut trace: Vec<T> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=hp.max_iters {
        iterations = it;
        let tag = |e: Error| match e {
            Error::Numerical(message) => Error::NumericalAt {
                iteration: it,
                message,
            },
            other => other,
        };
        update_qw(&mut state, &ctx, hp).map_err(tag)?;
        update_qz(&mut state, &ctx, hp).map_err(tag)?;
        update_qalpha(&mut state, &ctx, hp).map_err(tag)?;
        update_qtau(&mut state, &ctx, hp).map_err(tag)?;
        if hp.rotation_opt {
            rotation_hook(&mut state);
        }
        let bound = elbo(&state, &ctx, hp).map_err(tag)?;
        let prev = trace.last().copied();
        trace.push(bound);
        if let Some(prev) = prev {
            let denom = prev.abs().max(T::of(f64::MIN_POSITIVE));
            if (bound - prev).abs() / denom < hp.tol {
                converged = true;
                break;
            }
        }
    }

    let threshold = T::of(ACTIVE_RVAR_THRESHOLD);
    let rvar = state.rvar();
    let active_factors = (0..hp.k_init)
        .filter(|&k| rvar.iter().any(|m| m[k] > threshold))
        .collect();

    Ok(FitResult {
        state,
        elbo_trace: trace,
        converged,
        iterations,
        seed,
        active_factors,
    })
}

#[derive(Debug)]
pub struct RestartRun<T: Real> {
    pub seed: u64,
    pub result: Result<FitResult<T>>,
}

/// Outcome of [`fit_restarts`]: all runs plus the index of the one with the
/// largest final lower bound.
#[derive(Debug)]
pub struct RestartSummary<T: Real> {
    pub runs: Vec<RestartRun<T>>,
    pub best: usize,
}

impl<T: Real> RestartSummary<T> {
    pub fn best_fit(&self) -> &FitResult<T> {
        self.runs[self.best]
            .result
            .as_ref()
            .expect("best restart succeeded")
    }
}

/// Runs one fit per seed (in parallel) and selects the restart with the
/// largest final lower bound; ties break towards the lowest seed, then the
/// earliest position.
pub fn fit_restarts<T: Real>(
    data: &GroupedDataset<T>,
    hp: &Hyperparams<T>,
    seeds: &[u64],
) -> Result<RestartSummary<T>> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("fit_restarts needs at least one seed".into()));
    }
    let runs: Vec<RestartRun<T>> = seeds
        .par_iter()
        .map(|&seed| RestartRun {
            seed,
            result: fit(data, hp, seed),
        })
        .collect();

    let mut best: Option<(usize, T, u64)> = None;
    for (i, run) in runs.iter().enumerate() {
        if let Ok(fit) = &run.result {
            let bound = fit.final_elbo();
            let better = match &best {
                None => true,
                Some((_, b, s)) => bound > *b || (bound == *b && run.seed < *s),
            };
            if better {
                best = Some((i, bound, run.seed));
            }
        }
    }
    match best {
        Some((i, _, _)) => Ok(RestartSummary { runs, best: i }),
        None => Err(Error::AllRestartsFailed(seeds.len())),
    }
}
