//! Coordinate updates of the four variational factors.
//!
//! Every sum runs over observed entries only, through the index sets in
//! [`FitContext`]. Two algebraically equivalent routes exist for the dominant
//! sums: a generic per-entry route, and shortcut routes that reuse shared
//! partial sums when a modality is complete or column-structured (plus dense
//! products against the zero-filled value matrix, where masked entries
//! contribute exact zeros). `Hyperparams::force_indexed_updates` pins the
//! generic route for validation.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, RowDVector};
use rayon::prelude::*;

use super::context::{ColumnObs, FitContext, RowObs};
use super::state::{Hyperparams, LatentCov, ModalityPosterior, VariationalState};
use crate::error::{Error, Result};
use crate::linalg::spd_inverse_logdet;
use crate::scalar::Real;

/// Σ over the given rows (all rows when `None`) of τ_j ⟨w_jᵀ w_j⟩,
/// accumulated serially in ascending row order.
pub(crate) fn weighted_w2_sum<T: Real>(
    mp: &ModalityPosterior<T>,
    tau: &DVector<T>,
    rows: Option<&[u32]>,
) -> DMatrix<T> {
    let k = mp.mu_w.ncols();
    let mut sum = DMatrix::zeros(k, k);
    let mut add_row = |j: usize| {
        let t = tau[j];
        let sigma = &mp.sigma_w[j];
        for b in 0..k {
            let mu_b = mp.mu_w[(j, b)];
            for a in 0..k {
                sum[(a, b)] += t * (sigma[(a, b)] + mp.mu_w[(j, a)] * mu_b);
            }
        }
    };
    match rows {
        None => (0..mp.n_vars()).for_each(&mut add_row),
        Some(rows) => rows.iter().for_each(|&j| add_row(j as usize)),
    }
    sum
}

/// Σ over the given observations of ⟨z_n z_nᵀ⟩, serial in ascending order.
pub(crate) fn z_second_moment_subset<T: Real>(
    state: &VariationalState<T>,
    cols: &[u32],
) -> DMatrix<T> {
    let k = state.k();
    let mut sum = DMatrix::zeros(k, k);
    for &c in cols {
        let n = c as usize;
        let sigma = state.sigma_z.get(n);
        let mu = state.mu_z.column(n);
        for b in 0..k {
            let mu_b = mu[b];
            for a in 0..k {
                sum[(a, b)] += sigma[(a, b)] + mu[a] * mu_b;
            }
        }
    }
    sum
}

/// Elementwise-dot of two K×K matrices, i.e. Tr(AᵀB) for symmetric A.
fn mat_dot<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        s += *x * *y;
    }
    s
}

/// q(Z) update: per observation n,
/// Σ_{z_n} = [I_K + Σ_m Σ_{j∈O_n} ⟨τ_j⟩⟨w_jᵀw_j⟩]⁻¹ and
/// μ_{z_n} = Σ_{z_n} Σ_m Σ_{j∈O_n} ⟨τ_j⟩⟨w_jᵀ⟩ x_{j,n}.
pub fn update_qz<T: Real>(
    state: &mut VariationalState<T>,
    ctx: &FitContext<T>,
    hp: &Hyperparams<T>,
) -> Result<()> {
    let k = state.k();
    let n_obs = ctx.n_obs;
    let taus: Vec<DVector<T>> = state.modalities.iter().map(|m| m.tau_mean()).collect();

    if hp.force_indexed_updates {
        let mut covs = Vec::with_capacity(n_obs);
        let mut mu_z = DMatrix::zeros(k, n_obs);
        for n in 0..n_obs {
            let mut a = DMatrix::identity(k, k);
            let mut rhs = DVector::zeros(k);
            for (m_idx, idx) in ctx.modalities.iter().enumerate() {
                let mp = &state.modalities[m_idx];
                let tau = &taus[m_idx];
                let mut add = |j: usize| {
                    let t = tau[j];
                    let sigma = &mp.sigma_w[j];
                    for b in 0..k {
                        let mu_b = mp.mu_w[(j, b)];
                        for aa in 0..k {
                            a[(aa, b)] += t * (sigma[(aa, b)] + mp.mu_w[(j, aa)] * mu_b);
                        }
                    }
                    let x = idx.x0[(j, n)];
                    for aa in 0..k {
                        rhs[aa] += t * mp.mu_w[(j, aa)] * x;
                    }
                };
                match &idx.cols[n] {
                    ColumnObs::Full => (0..idx.n_vars).for_each(&mut add),
                    ColumnObs::Empty => {}
                    ColumnObs::Partial(js) => js.iter().for_each(|&j| add(j as usize)),
                }
            }
            let (inv, _) = spd_inverse_logdet(&a, "latent covariance")?;
            mu_z.set_column(n, &(&inv * rhs));
            covs.push(inv);
        }
        state.mu_z = mu_z;
        state.sigma_z = LatentCov::PerObservation(covs);
        return Ok(());
    }

    // Right-hand side for all observations at once: Σ_m (τ ⊙ W)ᵀ X₀.
    let mut rhs = DMatrix::zeros(k, n_obs);
    for (m_idx, idx) in ctx.modalities.iter().enumerate() {
        let mp = &state.modalities[m_idx];
        let mut w_scaled = mp.mu_w.clone();
        for j in 0..w_scaled.nrows() {
            let t = taus[m_idx][j];
            for kk in 0..k {
                w_scaled[(j, kk)] *= t;
            }
        }
        rhs += w_scaled.transpose() * &idx.x0;
    }

    let full_w2: Vec<Option<DMatrix<T>>> = ctx
        .modalities
        .iter()
        .enumerate()
        .map(|(m_idx, idx)| {
            let used = idx
                .cols
                .iter()
                .any(|c| matches!(c, ColumnObs::Full));
            used.then(|| weighted_w2_sum(&state.modalities[m_idx], &taus[m_idx], None))
        })
        .collect();

    if ctx.all_complete() {
        let mut a = DMatrix::identity(k, k);
        for w2 in full_w2.iter().flatten() {
            a += w2;
        }
        let (inv, _) = spd_inverse_logdet(&a, "latent covariance")?;
        state.mu_z = &inv * rhs;
        state.sigma_z = LatentCov::Shared(inv);
        return Ok(());
    }

    // Observations whose columns are Full/Empty in every modality share the
    // same covariance; cache the inverse per signature.
    let mut cache: HashMap<u64, DMatrix<T>> = HashMap::new();
    let mut covs = Vec::with_capacity(n_obs);
    let mut mu_z = DMatrix::zeros(k, n_obs);
    for n in 0..n_obs {
        let signature: Option<u64> = {
            let mut sig = 0u64;
            let mut uniform = ctx.modalities.len() <= 64;
            for (m_idx, idx) in ctx.modalities.iter().enumerate() {
                match &idx.cols[n] {
                    ColumnObs::Full => sig |= 1 << (m_idx % 64),
                    ColumnObs::Empty => {}
                    ColumnObs::Partial(_) => {
                        uniform = false;
                        break;
                    }
                }
            }
            uniform.then_some(sig)
        };
        let inv = match signature.and_then(|s| cache.get(&s).cloned()) {
            Some(inv) => inv,
            None => {
                let mut a = DMatrix::identity(k, k);
                for (m_idx, idx) in ctx.modalities.iter().enumerate() {
                    match &idx.cols[n] {
                        ColumnObs::Full => {
                            a += full_w2[m_idx].as_ref().expect("cached full sum");
                        }
                        ColumnObs::Empty => {}
                        ColumnObs::Partial(js) => {
                            a += weighted_w2_sum(&state.modalities[m_idx], &taus[m_idx], Some(js));
                        }
                    }
                }
                let (inv, _) = spd_inverse_logdet(&a, "latent covariance")?;
                if let Some(sig) = signature {
                    cache.insert(sig, inv.clone());
                }
                inv
            }
        };
        mu_z.set_column(n, &(&inv * rhs.column(n)));
        covs.push(inv);
    }
    state.mu_z = mu_z;
    state.sigma_z = LatentCov::PerObservation(covs);
    Ok(())
}

/// q(W) update: per variable j of modality m,
/// Σ_{w_j} = [diag⟨α⟩ + ⟨τ_j⟩ Σ_{n∈O_j} ⟨z_n z_nᵀ⟩]⁻¹ and
/// μ_{w_j} = ⟨τ_j⟩ (Σ_{n∈O_j} x_{j,n} ⟨z_nᵀ⟩) Σ_{w_j}.
pub fn update_qw<T: Real>(
    state: &mut VariationalState<T>,
    ctx: &FitContext<T>,
    hp: &Hyperparams<T>,
) -> Result<()> {
    let k = state.k();
    for m_idx in 0..state.modalities.len() {
        let idx = &ctx.modalities[m_idx];
        let d = idx.n_vars;
        let (alpha, tau) = {
            let mp = &state.modalities[m_idx];
            (mp.alpha_mean(), mp.tau_mean())
        };

        let shared_s: Option<DMatrix<T>> = match &idx.rows {
            RowObs::Shared(cols) => Some(z_second_moment_subset(state, cols)),
            RowObs::PerRow(_) => None,
        };
        let b: Option<DMatrix<T>> = if hp.force_indexed_updates {
            None
        } else {
            Some(&idx.x0 * state.mu_z.transpose())
        };

        let state_ref = &*state;
        let rows: Result<Vec<(RowDVector<T>, DMatrix<T>)>> = (0..d)
            .into_par_iter()
            .map(|j| {
                let t = tau[j];
                let own_s;
                let s_row = match &shared_s {
                    Some(s) => s,
                    None => {
                        own_s =
                            z_second_moment_subset(state_ref, idx.observed_cols_of_row(j));
                        &own_s
                    }
                };
                let mut a = s_row * t;
                for kk in 0..k {
                    a[(kk, kk)] += alpha[kk];
                }
                let (sigma, _) = spd_inverse_logdet(&a, "loading covariance")?;
                let b_row: RowDVector<T> = match &b {
                    Some(b) => b.row(j).into_owned(),
                    None => {
                        let mut acc = RowDVector::zeros(k);
                        for &c in idx.observed_cols_of_row(j) {
                            let n = c as usize;
                            let x = idx.x0[(j, n)];
                            for kk in 0..k {
                                acc[kk] += x * state_ref.mu_z[(kk, n)];
                            }
                        }
                        acc
                    }
                };
                let mu_row = (b_row * &sigma) * t;
                Ok((mu_row, sigma))
            })
            .collect();
        let rows = rows?;

        let mp = &mut state.modalities[m_idx];
        for (j, (mu_row, sigma)) in rows.into_iter().enumerate() {
            mp.mu_w.set_row(j, &mu_row);
            mp.sigma_w[j] = sigma;
        }
    }
    Ok(())
}

/// q(α) update: the shape is the constant a_α + D_m/2, and per factor
/// b̃_k = b_α + ½⟨w_kᵀw_k⟩.
pub fn update_qalpha<T: Real>(
    state: &mut VariationalState<T>,
    _ctx: &FitContext<T>,
    hp: &Hyperparams<T>,
) -> Result<()> {
    let half = T::of(0.5);
    for mp in &mut state.modalities {
        mp.alpha_a = hp.a_alpha + T::of(mp.n_vars() as f64 / 2.0);
        let wtw = mp.w_col_square_norms();
        for kk in 0..wtw.len() {
            mp.alpha_b[kk] = hp.b_alpha + half * wtw[kk];
        }
    }
    Ok(())
}

/// Expected squared reconstruction residual per variable, summed over that
/// variable's observed entries:
/// r_j = Σ_{n∈O_j} ⟨(x_{j,n} − w_j z_n)²⟩
///     = Σ x² − 2 Σ x ⟨w_j⟩⟨z_n⟩ + Σ Tr(⟨w_jᵀw_j⟩⟨z_n z_nᵀ⟩).
pub(crate) fn residual_stats<T: Real>(
    state: &VariationalState<T>,
    ctx: &FitContext<T>,
    m_idx: usize,
    force_indexed: bool,
) -> Vec<T> {
    let idx = &ctx.modalities[m_idx];
    let mp = &state.modalities[m_idx];
    let d = idx.n_vars;
    let k = state.k();
    let two = T::of(2.0);

    if force_indexed {
        return (0..d)
            .map(|j| {
                let w2 = mp.w_row_second_moment(j);
                let mut cross = T::zero();
                let mut trace = T::zero();
                for &c in idx.observed_cols_of_row(j) {
                    let n = c as usize;
                    let x = idx.x0[(j, n)];
                    let mut wz = T::zero();
                    for kk in 0..k {
                        wz += mp.mu_w[(j, kk)] * state.mu_z[(kk, n)];
                    }
                    cross += x * wz;
                    trace += mat_dot(&w2, &state.z_second_moment(n));
                }
                idx.row_sumsq[j] - two * cross + trace
            })
            .collect();
    }

    let b = &idx.x0 * state.mu_z.transpose(); // D×K
    let shared_s: Option<DMatrix<T>> = match &idx.rows {
        RowObs::Shared(cols) => Some(z_second_moment_subset(state, cols)),
        RowObs::PerRow(_) => None,
    };
    (0..d)
        .into_par_iter()
        .map(|j| {
            let w2 = mp.w_row_second_moment(j);
            let own_s;
            let s_row = match &shared_s {
                Some(s) => s,
                None => {
                    own_s = z_second_moment_subset(state, idx.observed_cols_of_row(j));
                    &own_s
                }
            };
            let cross = mp.mu_w.row(j).dot(&b.row(j));
            idx.row_sumsq[j] - two * cross + mat_dot(&w2, s_row)
        })
        .collect()
}

/// q(τ) update: per variable, ã_j = a_τ + N_j/2 and b̃_j = b_τ + ½ r_j.
pub fn update_qtau<T: Real>(
    state: &mut VariationalState<T>,
    ctx: &FitContext<T>,
    hp: &Hyperparams<T>,
) -> Result<()> {
    let half = T::of(0.5);
    for m_idx in 0..state.modalities.len() {
        let residuals = residual_stats(state, ctx, m_idx, hp.force_indexed_updates);
        let idx = &ctx.modalities[m_idx];
        let mp = &mut state.modalities[m_idx];
        for j in 0..idx.n_vars {
            mp.tau_a[j] = hp.a_tau + T::of(idx.n_j[j] as f64 / 2.0);
            let b = hp.b_tau + half * residuals[j];
            if !(b > T::zero()) {
                return Err(Error::Numerical(format!(
                    "non-positive noise rate {} for variable {j} of modality {}",
                    b.as_f64(),
                    idx.name
                )));
            }
            mp.tau_b[j] = b;
        }
    }
    Ok(())
}
