//! Variational posterior parameters and their expectation accessors.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::scalar::{standard_normal, Real};

/// Hyperparameters and fit controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams<T: Real> {
    /// Gamma prior shape/rate for the ARD precisions.
    pub a_alpha: T,
    pub b_alpha: T,
    /// Gamma prior shape/rate for the noise precisions.
    pub a_tau: T,
    pub b_tau: T,
    /// Initial number of latent factors; ARD prunes the surplus.
    pub k_init: usize,
    /// Convergence threshold on the relative change of the lower bound.
    pub tol: T,
    pub max_iters: usize,
    /// Number of random restarts used by the orchestration layer.
    pub restarts: usize,
    /// Reserved hook for the latent-space rotation optimisation; currently a
    /// no-op and off by default.
    pub rotation_opt: bool,
    /// Validation knob: forces every update through the generic per-entry
    /// index-set path, disabling the complete-data and column-structured
    /// shortcuts. Results must agree with the default path to rounding.
    pub force_indexed_updates: bool,
}

impl<T: Real> Hyperparams<T> {
    pub fn new(k_init: usize) -> Self {
        Self {
            a_alpha: T::of(1e-14),
            b_alpha: T::of(1e-14),
            a_tau: T::of(1e-14),
            b_tau: T::of(1e-14),
            k_init,
            tol: T::of(1e-6),
            max_iters: 5000,
            restarts: 10,
            rotation_opt: false,
            force_indexed_updates: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_init == 0 {
            return Err(Error::InvalidParameter("k_init must be >= 1".into()));
        }
        let pos = [self.a_alpha, self.b_alpha, self.a_tau, self.b_tau, self.tol];
        if pos.iter().any(|&v| v <= T::zero()) {
            return Err(Error::InvalidParameter(
                "hyperparameters and tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl<T: Real> Default for Hyperparams<T> {
    fn default() -> Self {
        Self::new(15)
    }
}

/// Latent covariances: one shared K×K matrix when every observation has the
/// same observed pattern (complete data), per-observation matrices otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LatentCov<T: Real> {
    Shared(DMatrix<T>),
    PerObservation(Vec<DMatrix<T>>),
}

impl<T: Real> LatentCov<T> {
    pub fn get(&self, n: usize) -> &DMatrix<T> {
        match self {
            LatentCov::Shared(m) => m,
            LatentCov::PerObservation(v) => &v[n],
        }
    }
}

/// Posterior parameters of one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityPosterior<T: Real> {
    /// Posterior means of the loading rows (D_m × K; row j is μ_{w_j}).
    pub mu_w: DMatrix<T>,
    /// Per-row K×K posterior covariances.
    pub sigma_w: Vec<DMatrix<T>>,
    /// Gamma shape shared by the modality's ARD precisions.
    pub alpha_a: T,
    /// Gamma rates per factor.
    pub alpha_b: DVector<T>,
    /// Gamma shapes per variable for the noise precisions.
    pub tau_a: DVector<T>,
    /// Gamma rates per variable.
    pub tau_b: DVector<T>,
}

impl<T: Real> ModalityPosterior<T> {
    pub fn n_vars(&self) -> usize {
        self.mu_w.nrows()
    }

    pub fn alpha_mean(&self) -> DVector<T> {
        self.alpha_b.map(|b| self.alpha_a / b)
    }

    pub fn ln_alpha_mean(&self) -> DVector<T> {
        let dg = self.alpha_a.digamma();
        self.alpha_b.map(|b| dg - b.ln())
    }

    pub fn tau_mean(&self) -> DVector<T> {
        DVector::from_fn(self.tau_a.len(), |j, _| self.tau_a[j] / self.tau_b[j])
    }

    pub fn ln_tau_mean(&self) -> DVector<T> {
        DVector::from_fn(self.tau_a.len(), |j, _| {
            self.tau_a[j].digamma() - self.tau_b[j].ln()
        })
    }

    /// ⟨w_jᵀ w_j⟩ = Σ_{w_j} + μ_{w_j}ᵀ μ_{w_j} (K×K).
    pub fn w_row_second_moment(&self, j: usize) -> DMatrix<T> {
        let mu = self.mu_w.row(j);
        &self.sigma_w[j] + mu.transpose() * mu
    }

    /// ⟨w_kᵀ w_k⟩ per factor: Σ_j μ_{jk}² + Σ_j Σ_{w_j}(k,k).
    pub fn w_col_square_norms(&self) -> DVector<T> {
        let k = self.mu_w.ncols();
        let mut out = DVector::zeros(k);
        for j in 0..self.n_vars() {
            for kk in 0..k {
                let mu = self.mu_w[(j, kk)];
                out[kk] += mu * mu + self.sigma_w[j][(kk, kk)];
            }
        }
        out
    }
}

/// All variational posterior parameters of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalState<T: Real> {
    /// Posterior means of the latent variables (K × N).
    pub mu_z: DMatrix<T>,
    pub sigma_z: LatentCov<T>,
    pub modalities: Vec<ModalityPosterior<T>>,
}

impl<T: Real> VariationalState<T> {
    pub fn k(&self) -> usize {
        self.mu_z.nrows()
    }

    pub fn n_obs(&self) -> usize {
        self.mu_z.ncols()
    }

    pub fn n_modalities(&self) -> usize {
        self.modalities.len()
    }

    /// ⟨z_n z_nᵀ⟩ = Σ_{z_n} + μ_{z_n} μ_{z_n}ᵀ.
    pub fn z_second_moment(&self, n: usize) -> DMatrix<T> {
        let mu = self.mu_z.column(n);
        self.sigma_z.get(n) + &mu * mu.transpose()
    }

    /// Σ_n ⟨z_n z_nᵀ⟩, accumulated serially in observation order.
    pub fn z_second_moment_sum(&self) -> DMatrix<T> {
        let k = self.k();
        let mut sum = DMatrix::zeros(k, k);
        for n in 0..self.n_obs() {
            let sigma = self.sigma_z.get(n);
            let mu = self.mu_z.column(n);
            for b in 0..k {
                for a in 0..k {
                    sum[(a, b)] += sigma[(a, b)] + mu[a] * mu[b];
                }
            }
        }
        sum
    }

    /// Relative variance explained per factor within each modality:
    /// rvar_k = ‖μ_w col k‖² / Σ_k ‖μ_w col k‖². All-zero loadings give an
    /// all-zero row.
    pub fn rvar(&self) -> Vec<DVector<T>> {
        self.modalities
            .iter()
            .map(|m| {
                let k = m.mu_w.ncols();
                let norms = DVector::from_fn(k, |kk, _| m.mu_w.column(kk).norm_squared());
                let total = norms.sum();
                if total > T::zero() {
                    norms / total
                } else {
                    DVector::zeros(k)
                }
            })
            .collect()
    }
}

/// Random initial state.
///
/// Latent means are standard normal, loading means standard normal scaled by
/// 0.1, all covariances identity. Gamma shapes are set to their closed-form
/// constants (a_α + D_m/2 and a_τ + N_j/2) and the rates to the same values,
/// so every precision expectation starts at 1. Draw order is fixed (latents
/// column-major, then loadings row-major per modality) so a seed pins the
/// state bit-for-bit.
pub fn init_state<T: Real>(
    data: &GroupedDataset<T>,
    hp: &Hyperparams<T>,
    seed: u64,
) -> Result<VariationalState<T>> {
    hp.validate()?;
    let n = data.n_observations();
    let k = hp.k_init;
    if n == 0 {
        return Err(Error::InvalidParameter("dataset has no observations".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu_z = DMatrix::zeros(k, n);
    for c in 0..n {
        for r in 0..k {
            mu_z[(r, c)] = standard_normal::<T, _>(&mut rng);
        }
    }

    let complete = data
        .modalities()
        .iter()
        .all(|m| m.mask().iter().all(|&b| b));
    let sigma_z = if complete {
        LatentCov::Shared(DMatrix::identity(k, k))
    } else {
        LatentCov::PerObservation(vec![DMatrix::identity(k, k); n])
    };

    let scale = T::of(0.1);
    let modalities = data
        .modalities()
        .iter()
        .map(|m| {
            let d = m.n_vars();
            let mut mu_w = DMatrix::zeros(d, k);
            for j in 0..d {
                for kk in 0..k {
                    mu_w[(j, kk)] = standard_normal::<T, _>(&mut rng) * scale;
                }
            }
            let alpha_a = hp.a_alpha + T::of(d as f64 / 2.0);
            let tau_a = DVector::from_fn(d, |j, _| {
                let n_j = m.observed_row(j).count();
                hp.a_tau + T::of(n_j as f64 / 2.0)
            });
            ModalityPosterior {
                mu_w,
                sigma_w: vec![DMatrix::identity(k, k); d],
                alpha_a,
                alpha_b: DVector::from_element(k, alpha_a),
                tau_b: tau_a.clone(),
                tau_a,
            }
        })
        .collect();

    Ok(VariationalState {
        mu_z,
        sigma_z,
        modalities,
    })
}
