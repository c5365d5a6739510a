//! Observed-entry index sets derived from the masks once per fit.
//!
//! The variational updates only ever touch observed entries. Three views of
//! the mask are precomputed per modality: per-observation observed variables
//! (columns), per-variable observed observations (rows) and the per-variable
//! counts. Two structural special cases are detected because they make the
//! dominant updates much cheaper: fully complete modalities, and modalities
//! whose missingness is column-structured (each observation either fully
//! observed or fully missing), where every variable shares one observed set.

use nalgebra::DMatrix;

use crate::dataset::{GroupedDataset, ModalityMatrix};
use crate::scalar::Real;

/// Observed variables of one observation (one column of the mask).
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ColumnObs {
    Full,
    Empty,
    Partial(Vec<u32>),
}

/// Observed observations per variable.
#[derive(Debug, Clone)]
pub(crate) enum RowObs {
    /// Every variable shares the same observed set (complete or
    /// column-structured missingness).
    Shared(Vec<u32>),
    PerRow(Vec<Vec<u32>>),
}

#[derive(Debug, Clone)]
pub(crate) struct ObservedIndex<T: Real> {
    pub name: String,
    pub n_vars: usize,
    pub cols: Vec<ColumnObs>,
    pub rows: RowObs,
    /// Observed-entry count per variable.
    pub n_j: Vec<usize>,
    pub complete: bool,
    /// Values with masked entries replaced by zero, so dense products over
    /// all observations implicitly sum over observed entries only.
    pub x0: DMatrix<T>,
    /// Per-variable sum of squared observed values (constant per fit).
    pub row_sumsq: Vec<T>,
}

impl<T: Real> ObservedIndex<T> {
    pub fn build(m: &ModalityMatrix<T>) -> Self {
        let d = m.n_vars();
        let n = m.n_obs();
        let mask = m.mask();

        let mut cols = Vec::with_capacity(n);
        let mut column_structured = true;
        let mut complete = true;
        for c in 0..n {
            let observed: Vec<u32> = (0..d).filter(|&j| mask[(j, c)]).map(|j| j as u32).collect();
            let kind = if observed.len() == d {
                ColumnObs::Full
            } else if observed.is_empty() {
                complete = false;
                ColumnObs::Empty
            } else {
                complete = false;
                column_structured = false;
                ColumnObs::Partial(observed)
            };
            cols.push(kind);
        }

        let rows = if column_structured {
            let shared: Vec<u32> = cols
                .iter()
                .enumerate()
                .filter(|(_, k)| matches!(k, ColumnObs::Full))
                .map(|(c, _)| c as u32)
                .collect();
            RowObs::Shared(shared)
        } else {
            let mut per_row = vec![Vec::new(); d];
            for c in 0..n {
                for j in 0..d {
                    if mask[(j, c)] {
                        per_row[j].push(c as u32);
                    }
                }
            }
            RowObs::PerRow(per_row)
        };

        let n_j: Vec<usize> = match &rows {
            RowObs::Shared(s) => vec![s.len(); d],
            RowObs::PerRow(r) => r.iter().map(Vec::len).collect(),
        };

        let x0 = m.zero_filled();
        let row_sumsq = (0..d)
            .map(|j| {
                let mut s = T::zero();
                for c in 0..n {
                    let v = x0[(j, c)];
                    if mask[(j, c)] {
                        s += v * v;
                    }
                }
                s
            })
            .collect();

        Self {
            name: m.name().to_string(),
            n_vars: d,
            cols,
            rows,
            n_j,
            complete,
            x0,
            row_sumsq,
        }
    }

    pub fn observed_cols_of_row(&self, j: usize) -> &[u32] {
        match &self.rows {
            RowObs::Shared(s) => s,
            RowObs::PerRow(r) => &r[j],
        }
    }
}

/// Per-fit immutable view of a dataset: index sets plus zero-filled values.
#[derive(Debug, Clone)]
pub struct FitContext<T: Real> {
    pub(crate) modalities: Vec<ObservedIndex<T>>,
    pub(crate) n_obs: usize,
}

impl<T: Real> FitContext<T> {
    pub fn new(data: &GroupedDataset<T>) -> Self {
        Self {
            modalities: data.modalities().iter().map(ObservedIndex::build).collect(),
            n_obs: data.n_observations(),
        }
    }

    /// Like [`FitContext::new`] but with the named modality treated as
    /// entirely unobserved (used for cross-modality prediction).
    pub fn without_modality(data: &GroupedDataset<T>, skip: &str) -> Self {
        let modalities = data
            .modalities()
            .iter()
            .map(|m| {
                if m.name() == skip {
                    let d = m.n_vars();
                    let n = m.n_obs();
                    ObservedIndex {
                        name: m.name().to_string(),
                        n_vars: d,
                        cols: vec![ColumnObs::Empty; n],
                        rows: RowObs::Shared(Vec::new()),
                        n_j: vec![0; d],
                        complete: false,
                        x0: DMatrix::zeros(d, n),
                        row_sumsq: vec![T::zero(); d],
                    }
                } else {
                    ObservedIndex::build(m)
                }
            })
            .collect();
        Self {
            modalities,
            n_obs: data.n_observations(),
        }
    }

    pub fn n_modalities(&self) -> usize {
        self.modalities.len()
    }

    pub fn n_observations(&self) -> usize {
        self.n_obs
    }

    pub fn all_complete(&self) -> bool {
        self.modalities.iter().all(|m| m.complete)
    }
}
