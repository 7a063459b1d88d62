//! Pairwise assembly of a polychoric correlation matrix.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::discrepancy::DiscrepancyConfig;
use crate::error::{Error, Result};
use crate::estimate::{fit, EstimateResult, FitOptions, Warning};
use crate::model::ContingencyTable;

/// Multivariate ordinal responses stored by item. Codes run from 1 to the
/// number of categories of the item; `None` marks a missing response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrdinalDataset {
    names: Vec<String>,
    columns: Vec<Vec<Option<u32>>>,
    categories: Vec<usize>,
}

impl OrdinalDataset {
    /// The number of categories of each item is its largest observed code.
    pub fn new(names: Vec<String>, columns: Vec<Vec<Option<u32>>>) -> Result<Self> {
        if columns.len() < 2 || names.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "need at least two named items, got {} names and {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Dimension("items have different numbers of observations".into()));
        }
        let mut categories = Vec::with_capacity(columns.len());
        for (name, col) in names.iter().zip(&columns) {
            if col.iter().flatten().any(|&v| v == 0) {
                return Err(Error::Domain(format!("item {name}: category codes start at 1")));
            }
            let max = col.iter().flatten().copied().max().unwrap_or(0) as usize;
            let distinct = col.iter().flatten().collect::<std::collections::BTreeSet<_>>().len();
            if distinct < 2 {
                return Err(Error::Domain(format!("item {name} has fewer than two observed categories")));
            }
            categories.push(max);
        }
        Ok(Self { names, columns, categories })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<Option<u32>>] {
        &self.columns
    }

    pub fn categories(&self) -> &[usize] {
        &self.categories
    }

    pub fn q(&self) -> usize {
        self.columns.len()
    }

    pub fn n_obs(&self) -> usize {
        self.columns[0].len()
    }

    /// Cross-tabulation of items `i` and `j` over complete cases.
    pub fn pair_table(&self, i: usize, j: usize) -> Result<ContingencyTable> {
        let pairs = self.columns[i]
            .iter()
            .zip(&self.columns[j])
            .filter_map(|(x, y)| Some((x.as_ref()? - 1) as usize).zip(y.map(|v| (v - 1) as usize)));
        ContingencyTable::from_pairs(self.categories[i], self.categories[j], pairs)
    }

    /// The dataset restricted to the given items, in the given order.
    pub fn select(&self, items: &[usize]) -> Result<Self> {
        Self::new(
            items.iter().map(|&k| self.names[k].clone()).collect(),
            items.iter().map(|&k| self.columns[k].clone()).collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct PairFit {
    pub i: usize,
    pub j: usize,
    /// Complete cases used for the pair.
    pub n: u64,
    pub result: Result<EstimateResult, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MatrixWarning {
    PairFailed { i: usize, j: usize, reason: String },
    Pair { i: usize, j: usize, warning: Warning },
    NotPositiveDefinite { min_eigenvalue: f64 },
    Incomplete,
}

#[derive(Debug, Clone)]
pub struct CorrelationMatrixResult {
    /// Unit diagonal; failed pairs are NaN.
    pub estimates: DMatrix<f64>,
    /// Zero diagonal; unavailable entries are NaN.
    pub std_errors: DMatrix<f64>,
    pub pairs: Vec<PairFit>,
    /// Smallest eigenvalue of `estimates`, absent when the matrix has holes.
    pub min_eigenvalue: Option<f64>,
    pub warnings: Vec<MatrixWarning>,
}

/// Fit every item pair and assemble the matrix. Pairs run in parallel and
/// are assembled by index, so the result does not depend on scheduling.
pub fn fit_matrix(data: &OrdinalDataset, cfg: DiscrepancyConfig, opts: &FitOptions) -> CorrelationMatrixResult {
    fit_matrix_with(data, |table| fit(table, cfg, opts))
}

/// [`fit_matrix`] with a caller-chosen pairwise estimator.
pub fn fit_matrix_with<F>(data: &OrdinalDataset, estimator: F) -> CorrelationMatrixResult
where
    F: Fn(&ContingencyTable) -> Result<EstimateResult> + Sync,
{
    let q = data.q();
    let index: Vec<(usize, usize)> = (0..q).flat_map(|i| (i + 1..q).map(move |j| (i, j))).collect();
    let pairs: Vec<PairFit> = index
        .par_iter()
        .map(|&(i, j)| {
            let table = data.pair_table(i, j);
            let n = table.as_ref().map(|t| t.total()).unwrap_or(0);
            let result = table.and_then(|t| estimator(&t)).map_err(|e| e.to_string());
            PairFit { i, j, n, result }
        })
        .collect();
    assemble(q, pairs)
}

fn assemble(q: usize, pairs: Vec<PairFit>) -> CorrelationMatrixResult {
    let mut estimates = DMatrix::from_element(q, q, f64::NAN);
    let mut std_errors = DMatrix::from_element(q, q, f64::NAN);
    let mut warnings = Vec::new();
    for k in 0..q {
        estimates[(k, k)] = 1.0;
        std_errors[(k, k)] = 0.0;
    }
    for p in &pairs {
        match &p.result {
            Ok(r) => {
                let (rho, se) = (r.theta.rho(), r.rho_std_error().unwrap_or(f64::NAN));
                estimates[(p.i, p.j)] = rho;
                estimates[(p.j, p.i)] = rho;
                std_errors[(p.i, p.j)] = se;
                std_errors[(p.j, p.i)] = se;
                warnings.extend(r.warnings.iter().map(|w| MatrixWarning::Pair { i: p.i, j: p.j, warning: w.clone() }));
            }
            Err(reason) => warnings.push(MatrixWarning::PairFailed { i: p.i, j: p.j, reason: reason.clone() }),
        }
    }
    let min_eigenvalue = if estimates.iter().all(|v| v.is_finite()) {
        Some(estimates.clone().symmetric_eigenvalues().min())
    } else {
        warnings.push(MatrixWarning::Incomplete);
        None
    };
    if let Some(min_eigenvalue) = min_eigenvalue.filter(|&v| v <= 0.0) {
        warnings.push(MatrixWarning::NotPositiveDefinite { min_eigenvalue });
    }
    CorrelationMatrixResult { estimates, std_errors, pairs, min_eigenvalue, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codes(v: &[u32]) -> Vec<Option<u32>> {
        v.iter().map(|&c| if c == 0 { None } else { Some(c) }).collect()
    }

    #[test]
    fn pairwise_deletion() {
        let data = OrdinalDataset::new(
            vec!["x".into(), "y".into()],
            vec![codes(&[1, 1, 2, 2, 0]), codes(&[1, 2, 1, 0, 2])],
        )
        .unwrap();
        let t = data.pair_table(0, 1).unwrap();
        assert_eq!(t.counts(), &[1, 1, 1, 0]);
        assert_eq!(t.total(), 3);
    }

    #[test]
    fn rejects_constant_item() {
        let r = OrdinalDataset::new(vec!["x".into(), "y".into()], vec![codes(&[1, 1]), codes(&[1, 2])]);
        assert!(r.is_err());
    }

    #[test]
    fn failed_pair_leaves_hole() {
        let data = OrdinalDataset::new(
            vec!["x".into(), "y".into(), "z".into()],
            vec![codes(&[1, 2, 1, 2, 1, 2]), codes(&[1, 2, 2, 1, 1, 2]), codes(&[1, 3, 1, 3, 1, 3])],
        )
        .unwrap();
        let m = fit_matrix(&data, DiscrepancyConfig::ml(), &FitOptions::default());
        assert!(m.estimates[(0, 2)].is_nan());
        assert!(m.min_eigenvalue.is_none());
        assert!(m.warnings.iter().any(|w| matches!(w, MatrixWarning::PairFailed { i: 0, j: 2, .. })));
        assert_eq!(m.estimates[(2, 2)], 1.0);
    }
}
