//! Multi-modality data containers with missingness masks, plus the
//! preprocessing, splitting, masking and imputation utilities around them.
//!
//! Data orientation is variables × observations throughout: modality `m`
//! holds a `D_m × N` value matrix and a boolean mask of identical shape
//! (`true` = observed). Entries where the mask is false are never read by any
//! numeric consumer; their stored value is unspecified.

pub mod io;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One modality: a `D_m × N` block of variables with a missingness mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityMatrix<T: Real> {
    name: String,
    values: DMatrix<T>,
    mask: DMatrix<bool>,
}

impl<T: Real> ModalityMatrix<T> {
    pub fn new(name: impl Into<String>, values: DMatrix<T>, mask: DMatrix<bool>) -> Result<Self> {
        if values.shape() != mask.shape() {
            return Err(Error::ShapeMismatch(format!(
                "values {:?} vs mask {:?}",
                values.shape(),
                mask.shape()
            )));
        }
        Ok(Self {
            name: name.into(),
            values,
            mask,
        })
    }

    /// Fully observed modality.
    pub fn complete(name: impl Into<String>, values: DMatrix<T>) -> Self {
        let mask = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self {
            name: name.into(),
            values,
            mask,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_vars(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_obs(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_observed(&self, var: usize, obs: usize) -> bool {
        self.mask[(var, obs)]
    }

    /// Value at an observed entry; `None` when masked.
    pub fn get(&self, var: usize, obs: usize) -> Option<T> {
        self.mask[(var, obs)].then(|| self.values[(var, obs)])
    }

    /// Raw value storage. Masked entries hold unspecified values; consumers
    /// must go through `get` or consult `mask`.
    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Observed entries of one variable.
    pub fn observed_row(&self, var: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (0..self.n_obs()).filter_map(move |n| self.get(var, n).map(|v| (n, v)))
    }

    /// Copy of the values with masked entries zeroed, safe for dense algebra.
    pub fn zero_filled(&self) -> DMatrix<T> {
        let mut out = self.values.clone();
        for j in 0..out.nrows() {
            for n in 0..out.ncols() {
                if !self.mask[(j, n)] {
                    out[(j, n)] = T::zero();
                }
            }
        }
        out
    }

    fn map_observed(&self, mut f: impl FnMut(usize, usize, T) -> T) -> Self {
        let mut values = self.values.clone();
        for j in 0..values.nrows() {
            for n in 0..values.ncols() {
                if self.mask[(j, n)] {
                    values[(j, n)] = f(j, n, values[(j, n)]);
                }
            }
        }
        Self {
            name: self.name.clone(),
            values,
            mask: self.mask.clone(),
        }
    }
}

/// M modalities over a shared set of N observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedDataset<T: Real> {
    modalities: Vec<ModalityMatrix<T>>,
    n_observations: usize,
}

impl<T: Real> GroupedDataset<T> {
    pub fn new(modalities: Vec<ModalityMatrix<T>>) -> Result<Self> {
        let Some(first) = modalities.first() else {
            return Err(Error::InvalidParameter("dataset needs at least one modality".into()));
        };
        let n = first.n_obs();
        for m in &modalities {
            if m.n_obs() != n {
                return Err(Error::ShapeMismatch(format!(
                    "modality `{}` has {} observations, expected {}",
                    m.name(),
                    m.n_obs(),
                    n
                )));
            }
        }
        for (i, a) in modalities.iter().enumerate() {
            if modalities[..i].iter().any(|b| b.name() == a.name()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate modality name `{}`",
                    a.name()
                )));
            }
        }
        Ok(Self {
            modalities,
            n_observations: n,
        })
    }

    pub fn n_observations(&self) -> usize {
        self.n_observations
    }

    pub fn n_modalities(&self) -> usize {
        self.modalities.len()
    }

    pub fn modalities(&self) -> &[ModalityMatrix<T>] {
        &self.modalities
    }

    pub fn modality(&self, name: &str) -> Result<&ModalityMatrix<T>> {
        self.modalities
            .iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::UnknownModality(name.to_string()))
    }

    pub fn modality_index(&self, name: &str) -> Result<usize> {
        self.modalities
            .iter()
            .position(|m| m.name() == name)
            .ok_or_else(|| Error::UnknownModality(name.to_string()))
    }

    /// Restriction to a subset of observations (columns), in the given order.
    pub fn select_observations(&self, indices: &[usize]) -> Self {
        let modalities = self
            .modalities
            .iter()
            .map(|m| {
                let d = m.n_vars();
                let mut values = DMatrix::zeros(d, indices.len());
                let mut mask = DMatrix::from_element(d, indices.len(), false);
                for (c, &n) in indices.iter().enumerate() {
                    values.set_column(c, &m.values.column(n));
                    mask.set_column(c, &m.mask.column(n));
                }
                ModalityMatrix {
                    name: m.name.clone(),
                    values,
                    mask,
                }
            })
            .collect();
        Self {
            modalities,
            n_observations: indices.len(),
        }
    }

    fn replace(&self, modalities: Vec<ModalityMatrix<T>>) -> Self {
        Self {
            modalities,
            n_observations: self.n_observations,
        }
    }
}

/// Disjoint train/test observation indices covering 0..N-1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-variable means and standard deviations recorded by [`standardize`],
/// usable for inverse transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizeStats<T: Real> {
    pub per_modality: Vec<ModalityStats<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityStats<T: Real> {
    pub name: String,
    pub means: Vec<T>,
    pub stds: Vec<T>,
}

impl<T: Real> StandardizeStats<T> {
    /// Maps standardized values back to the original scale.
    pub fn invert(&self, data: &GroupedDataset<T>) -> Result<GroupedDataset<T>> {
        let mut modalities = Vec::with_capacity(data.n_modalities());
        for m in data.modalities() {
            let stats = self
                .per_modality
                .iter()
                .find(|s| s.name == m.name())
                .ok_or_else(|| Error::UnknownModality(m.name().to_string()))?;
            modalities.push(m.map_observed(|j, _, v| v * stats.stds[j] + stats.means[j]));
        }
        data.replace(modalities).into_checked()
    }
}

impl<T: Real> GroupedDataset<T> {
    fn into_checked(self) -> Result<Self> {
        Ok(self)
    }
}

/// Mean and population standard deviation (divide by count) of the observed
/// entries of one variable.
fn observed_moments<T: Real>(
    m: &ModalityMatrix<T>,
    var: usize,
) -> (usize, T, T) {
    let mut count = 0usize;
    let mut sum = T::zero();
    for (_, v) in m.observed_row(var) {
        count += 1;
        sum += v;
    }
    if count == 0 {
        return (0, T::zero(), T::zero());
    }
    let mean = sum / T::of(count as f64);
    let mut ss = T::zero();
    for (_, v) in m.observed_row(var) {
        let d = v - mean;
        ss += d * d;
    }
    let std = (ss / T::of(count as f64)).sqrt();
    (count, mean, std)
}

/// Rescales every variable to observed-entry mean 0 and standard deviation 1.
///
/// The standard deviation uses the population convention (divide by the
/// observed count). Masks are unchanged; the returned statistics support
/// inverse transforms.
pub fn standardize<T: Real>(
    data: &GroupedDataset<T>,
) -> Result<(GroupedDataset<T>, StandardizeStats<T>)> {
    let mut out = Vec::with_capacity(data.n_modalities());
    let mut stats = Vec::with_capacity(data.n_modalities());
    for m in data.modalities() {
        let mut means = Vec::with_capacity(m.n_vars());
        let mut stds = Vec::with_capacity(m.n_vars());
        for j in 0..m.n_vars() {
            let (count, mean, std) = observed_moments(m, j);
            if count < 2 {
                return Err(Error::TooFewObserved {
                    modality: m.name().to_string(),
                    variable: j,
                    found: count,
                    needed: 2,
                });
            }
            if std <= T::zero() {
                return Err(Error::ZeroVariance {
                    modality: m.name().to_string(),
                    variable: j,
                });
            }
            means.push(mean);
            stds.push(std);
        }
        out.push(m.map_observed(|j, _, v| (v - means[j]) / stds[j]));
        stats.push(ModalityStats {
            name: m.name().to_string(),
            means,
            stds,
        });
    }
    Ok((
        data.replace(out),
        StandardizeStats {
            per_modality: stats,
        },
    ))
}

/// Replaces every variable by its least-squares residuals against the
/// confound matrix (N × C, fully observed) plus an intercept, fitted over
/// that variable's observed entries.
pub fn residualize<T: Real>(
    data: &GroupedDataset<T>,
    confounds: &DMatrix<T>,
) -> Result<GroupedDataset<T>> {
    let n = data.n_observations();
    if confounds.nrows() != n {
        return Err(Error::ShapeMismatch(format!(
            "confounds have {} rows, expected {}",
            confounds.nrows(),
            n
        )));
    }
    let c = confounds.ncols();
    if c + 1 >= n {
        return Err(Error::InvalidParameter(format!(
            "{c} confounds for {n} observations"
        )));
    }
    // Design matrix with intercept column appended.
    let mut design = DMatrix::zeros(n, c + 1);
    design.view_mut((0, 0), (n, c)).copy_from(confounds);
    for i in 0..n {
        design[(i, c)] = T::one();
    }

    let mut out = Vec::with_capacity(data.n_modalities());
    for m in data.modalities() {
        let mut values = m.values.clone();
        for j in 0..m.n_vars() {
            let obs: Vec<usize> = (0..n).filter(|&i| m.is_observed(j, i)).collect();
            if obs.len() < c + 1 {
                return Err(Error::TooFewObserved {
                    modality: m.name().to_string(),
                    variable: j,
                    found: obs.len(),
                    needed: c + 1,
                });
            }
            // Normal equations over the observed rows of the design.
            let p = c + 1;
            let mut gtg = DMatrix::zeros(p, p);
            let mut gty = nalgebra::DVector::zeros(p);
            for &i in &obs {
                let y = m.values[(j, i)];
                for a in 0..p {
                    let ga = design[(i, a)];
                    gty[a] += ga * y;
                    for b in a..p {
                        gtg[(a, b)] += ga * design[(i, b)];
                    }
                }
            }
            for a in 0..p {
                for b in 0..a {
                    gtg[(a, b)] = gtg[(b, a)];
                }
            }
            let chol = nalgebra::Cholesky::new(gtg).ok_or(Error::RankDeficientConfounds)?;
            let beta = chol.solve(&gty);
            for &i in &obs {
                let mut fitted = T::zero();
                for a in 0..p {
                    fitted += design[(i, a)] * beta[a];
                }
                values[(j, i)] -= fitted;
            }
        }
        out.push(ModalityMatrix {
            name: m.name.clone(),
            values,
            mask: m.mask.clone(),
        });
    }
    Ok(data.replace(out))
}

/// Deterministic train/test split with |train| = round(fraction · N).
pub fn split<T: Real>(data: &GroupedDataset<T>, fraction: f64, seed: u64) -> Result<SplitIndices> {
    let n = data.n_observations();
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction {fraction} outside (0, 1)"
        )));
    }
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 {
        return Err(Error::EmptySplit {
            fraction,
            side: "train",
            n,
        });
    }
    if n_train >= n {
        return Err(Error::EmptySplit {
            fraction,
            side: "test",
            n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Masks exactly round(fraction · D_m · N) currently-observed entries of the
/// named modality, chosen uniformly at random.
pub fn remove_random_entries<T: Real>(
    data: &GroupedDataset<T>,
    modality: &str,
    fraction: f64,
    seed: u64,
) -> Result<GroupedDataset<T>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "masking fraction {fraction} outside [0, 1)"
        )));
    }
    let idx = data.modality_index(modality)?;
    let m = &data.modalities()[idx];
    let total = m.n_vars() * m.n_obs();
    let target = (fraction * total as f64).round() as usize;
    let observed: Vec<(usize, usize)> = (0..m.n_vars())
        .flat_map(|j| (0..m.n_obs()).map(move |n| (j, n)))
        .filter(|&(j, n)| m.is_observed(j, n))
        .collect();
    if target > observed.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot mask {target} entries, only {} observed",
            observed.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, observed.len(), target);
    let mut mask = m.mask.clone();
    for i in chosen.iter() {
        let (j, n) = observed[i];
        mask[(j, n)] = false;
    }
    let mut modalities = data.modalities().to_vec();
    modalities[idx] = ModalityMatrix {
        name: m.name.clone(),
        values: m.values.clone(),
        mask,
    };
    Ok(data.replace(modalities))
}

/// Masks all variables of the named modality for round(fraction · N)
/// randomly chosen observations.
pub fn remove_random_rows<T: Real>(
    data: &GroupedDataset<T>,
    modality: &str,
    fraction: f64,
    seed: u64,
) -> Result<GroupedDataset<T>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "masking fraction {fraction} outside [0, 1)"
        )));
    }
    let idx = data.modality_index(modality)?;
    let m = &data.modalities()[idx];
    let n = m.n_obs();
    let target = (fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, n, target);
    let mut mask = m.mask.clone();
    for obs in chosen.iter() {
        for j in 0..m.n_vars() {
            mask[(j, obs)] = false;
        }
    }
    let mut modalities = data.modalities().to_vec();
    modalities[idx] = ModalityMatrix {
        name: m.name.clone(),
        values: m.values.clone(),
        mask,
    };
    Ok(data.replace(modalities))
}

/// Masks entries of the named modality deviating more than `n_sigma` standard
/// deviations from their variable's mean (both over observed entries).
pub fn remove_tails<T: Real>(
    data: &GroupedDataset<T>,
    modality: &str,
    n_sigma: T,
) -> Result<GroupedDataset<T>> {
    let idx = data.modality_index(modality)?;
    let m = &data.modalities()[idx];
    let mut mask = m.mask.clone();
    for j in 0..m.n_vars() {
        let (count, mean, std) = observed_moments(m, j);
        if count == 0 {
            continue;
        }
        let threshold = n_sigma * std;
        for n in 0..m.n_obs() {
            if mask[(j, n)] && (m.values[(j, n)] - mean).abs() > threshold {
                mask[(j, n)] = false;
            }
        }
    }
    let mut modalities = data.modalities().to_vec();
    modalities[idx] = ModalityMatrix {
        name: m.name.clone(),
        values: m.values.clone(),
        mask,
    };
    Ok(data.replace(modalities))
}

/// Per-variable median over the observed entries of `train`. Even counts take
/// the mean of the two middle values.
fn train_median<T: Real>(m: &ModalityMatrix<T>, var: usize) -> Option<T> {
    let mut vals: Vec<T> = m.observed_row(var).map(|(_, v)| v).collect();
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in observed values"));
    let n = vals.len();
    Some(if n % 2 == 1 {
        vals[n / 2]
    } else {
        (vals[n / 2 - 1] + vals[n / 2]) / T::of(2.0)
    })
}

/// Fills every masked entry of `target` with the per-variable median of the
/// observed `train` entries; the result is fully observed.
pub fn impute_median<T: Real>(
    train: &GroupedDataset<T>,
    target: &GroupedDataset<T>,
) -> Result<GroupedDataset<T>> {
    let mut out = Vec::with_capacity(target.n_modalities());
    for tm in target.modalities() {
        let trm = train.modality(tm.name())?;
        if trm.n_vars() != tm.n_vars() {
            return Err(Error::ShapeMismatch(format!(
                "modality `{}`: {} train vars vs {} target vars",
                tm.name(),
                trm.n_vars(),
                tm.n_vars()
            )));
        }
        let mut values = tm.values.clone();
        for j in 0..tm.n_vars() {
            let mut median = None;
            for n in 0..tm.n_obs() {
                if !tm.is_observed(j, n) {
                    let med = match median {
                        Some(m) => m,
                        None => {
                            let m = train_median(trm, j).ok_or(Error::TooFewObserved {
                                modality: tm.name().to_string(),
                                variable: j,
                                found: 0,
                                needed: 1,
                            })?;
                            median = Some(m);
                            m
                        }
                    };
                    values[(j, n)] = med;
                }
            }
        }
        let mask = DMatrix::from_element(tm.n_vars(), tm.n_obs(), true);
        out.push(ModalityMatrix {
            name: tm.name.clone(),
            values,
            mask,
        });
    }
    target.replace(out).into_checked()
}

#[cfg(test)]
mod tests;
