//! Sandwich covariance, confidence intervals and Pearson-residual diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::discrepancy::DiscrepancyConfig;
use crate::error::{Error, Result};
use crate::estimate::Warning;
use crate::model::{cell_probs, empirical_frequencies, CellGrid, ContingencyTable, GridKind, ModelDerivatives, Theta};
use crate::normal::uni_quantile;

/// Model probabilities below this are treated as zero.
pub const PROB_FLOOR: f64 = 1e-12;
/// Largest condition number of `M` accepted before standard errors are withheld.
pub const MAX_CONDITION: f64 = 1e12;

/// `s_xy = ∇π_xy / π_xy`.
pub fn score(theta: &Theta, x: usize, y: usize) -> Result<Vec<f64>> {
    if x >= theta.kx() || y >= theta.ky() {
        return Err(Error::Dimension(format!("cell ({x}, {y}) outside a {}x{} model", theta.kx(), theta.ky())));
    }
    let p = cell_probs(theta).get(x, y);
    if p < PROB_FLOOR {
        return Err(Error::NearZeroCell { row: x, col: y });
    }
    Ok(ModelDerivatives::new(theta).grad(x, y).into_iter().map(|g| g / p).collect())
}

/// Pieces of the sandwich `Σ = M⁻¹ U M⁻¹` with `U = W Ω Wᵀ`.
///
/// Cells are ordered row-major. `score_grid` holds `None` for cells whose
/// model probability is below [`PROB_FLOOR`].
#[derive(Debug, Clone)]
pub struct CovarianceComponents {
    pub score_grid: Vec<Option<Vec<f64>>>,
    pub w: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub condition: f64,
    pub warnings: Vec<Warning>,
}

/// `Ω = diag(f) - f fᵀ`.
pub fn multinomial_covariance(f: &CellGrid) -> DMatrix<f64> {
    let v = DVector::from_column_slice(f.values());
    DMatrix::from_diagonal(&v) - &v * v.transpose()
}

/// Plug-in sandwich covariance of the estimator with tuning constant `cfg.c`
/// at `theta` and frequencies `f`.
///
/// Cells with Pearson residual at most `c` use the likelihood branch:
/// they contribute `f s sᵀ - (f/π) H` to `M` and `s` to `W`. Cells beyond `c`
/// contribute `-(c+1) H` to `M` and a zero column to `W`. The returned
/// `sigma` is the asymptotic covariance of `√N (θ̂ - θ₀)`.
pub fn sandwich_covariance(theta: &Theta, f: &CellGrid, cfg: DiscrepancyConfig) -> Result<CovarianceComponents> {
    let (kx, ky, d) = (theta.kx(), theta.ky(), theta.dim());
    if f.kx() != kx || f.ky() != ky {
        return Err(Error::Dimension(format!("{}x{} frequencies for a {kx}x{ky} model", f.kx(), f.ky())));
    }
    let c = cfg.c();
    let probs = cell_probs(theta);
    let deriv = ModelDerivatives::new(theta);
    let cells = kx * ky;
    let mut w = DMatrix::zeros(d, cells);
    let mut m = DMatrix::zeros(d, d);
    let mut score_grid = Vec::with_capacity(cells);
    let mut warnings = Vec::new();

    for x in 0..kx {
        for y in 0..ky {
            let k = x * ky + y;
            let (p, fx) = (probs.get(x, y), f.get(x, y));
            if p < PROB_FLOOR {
                score_grid.push(None);
                if fx <= 0.0 {
                    continue;
                }
                if !c.is_finite() {
                    return Err(Error::NearZeroCell { row: x, col: y });
                }
                m -= deriv.hessian(x, y) * (c + 1.0);
                continue;
            }
            let s = DVector::from_vec(deriv.grad(x, y)) / p;
            let pr = fx / p - 1.0;
            if c.is_finite() && (pr - c).abs() <= 1e-12 * (1.0 + c) {
                warnings.push(Warning::TheoremBoundary { row: x, col: y });
            }
            if pr <= c {
                m += &s * s.transpose() * fx;
                if fx > 0.0 {
                    m -= deriv.hessian(x, y) * (fx / p);
                }
                w.set_column(k, &s);
            } else {
                m -= deriv.hessian(x, y) * (c + 1.0);
            }
            score_grid.push(Some(s.as_slice().to_vec()));
        }
    }
    m = (&m + m.transpose()) * 0.5;

    let omega = multinomial_covariance(f);
    let u = &w * &omega * w.transpose();
    let svd = m.clone().svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularM { condition });
    }
    let m_inv = svd.pseudo_inverse(0.0).map_err(|_| Error::SingularM { condition })?;
    let sigma = &m_inv * &u * &m_inv;
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    Ok(CovarianceComponents { score_grid, w, omega, u, m, sigma, condition, warnings })
}

/// Fisher information `Σ π s sᵀ` of a single multinomial observation.
pub fn fisher_information(theta: &Theta) -> DMatrix<f64> {
    let probs = cell_probs(theta);
    let deriv = ModelDerivatives::new(theta);
    let d = theta.dim();
    let mut info = DMatrix::zeros(d, d);
    for x in 0..theta.kx() {
        for y in 0..theta.ky() {
            let p = probs.get(x, y);
            if p >= PROB_FLOOR {
                let g = DVector::from_vec(deriv.grad(x, y));
                info += &g * g.transpose() / p;
            }
        }
    }
    info
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    /// The interval intersected with `[-1, 1]`, and whether clipping changed it.
    pub fn clipped_to_correlation(&self) -> (Self, bool) {
        let clipped = Self { lower: self.lower.max(-1.0), upper: self.upper.min(1.0), level: self.level };
        (clipped, clipped != *self)
    }
}

/// Wald interval `estimate ∓ q_{1-α/2} · se` at coverage `level = 1 - α`.
pub fn confidence_interval(estimate: f64, std_error: f64, level: f64) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level {level} outside (0, 1)")));
    }
    if !(std_error >= 0.0) {
        return Err(Error::Domain(format!("standard error {std_error} is negative")));
    }
    let half = uni_quantile(0.5 + level / 2.0)? * std_error;
    Ok(ConfidenceInterval { lower: estimate - half, upper: estimate + half, level })
}

/// A cell whose model probability is below [`PROB_FLOOR`] while its
/// frequency is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlooredCell {
    pub row: usize,
    pub col: usize,
    /// `f / PROB_FLOOR - 1`, a lower bound for the true residual.
    pub floored_residual: f64,
}

#[derive(Debug, Clone)]
pub struct PearsonResiduals {
    /// Residual grid; floored cells hold `+∞`.
    pub grid: CellGrid,
    pub floored: Vec<FlooredCell>,
}

/// `PR = f/π - 1` for every cell.
pub fn pearson_residuals(table: &ContingencyTable, theta: &Theta) -> Result<PearsonResiduals> {
    let f = empirical_frequencies(table)?;
    residuals_from_frequencies(&f, theta)
}

pub fn residuals_from_frequencies(f: &CellGrid, theta: &Theta) -> Result<PearsonResiduals> {
    let (kx, ky) = (theta.kx(), theta.ky());
    if f.kx() != kx || f.ky() != ky {
        return Err(Error::Dimension(format!("{}x{} frequencies for a {kx}x{ky} model", f.kx(), f.ky())));
    }
    let probs = cell_probs(theta);
    let mut values = Vec::with_capacity(kx * ky);
    let mut floored = Vec::new();
    for x in 0..kx {
        for y in 0..ky {
            let (fx, p) = (f.get(x, y), probs.get(x, y));
            values.push(if fx <= 0.0 {
                -1.0
            } else if p < PROB_FLOOR {
                floored.push(FlooredCell { row: x, col: y, floored_residual: fx / PROB_FLOOR - 1.0 });
                f64::INFINITY
            } else {
                fx / p - 1.0
            });
        }
    }
    Ok(PearsonResiduals { grid: CellGrid::new(kx, ky, values, GridKind::PearsonResidual)?, floored })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MisfitCell {
    pub row: usize,
    pub col: usize,
    pub residual: f64,
}

/// Cells with residual at least `threshold`, largest first.
pub fn flag_misfit_cells(residuals: &CellGrid, threshold: f64) -> Vec<MisfitCell> {
    if threshold == f64::INFINITY {
        return Vec::new();
    }
    let mut out: Vec<MisfitCell> = (0..residuals.kx())
        .flat_map(|x| (0..residuals.ky()).map(move |y| (x, y)))
        .filter_map(|(row, col)| {
            let residual = residuals.get(row, col);
            (residual >= threshold).then_some(MisfitCell { row, col, residual })
        })
        .collect();
    out.sort_by(|a, b| b.residual.total_cmp(&a.residual).then((a.row, a.col).cmp(&(b.row, b.col))));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn theta() -> Theta {
        Theta::new(0.4, vec![-0.8, 0.1, 1.0], vec![-0.5, 0.6]).unwrap()
    }

    #[test]
    fn score_identity() {
        let t = theta();
        let p = cell_probs(&t);
        let mut total = vec![0.0; t.dim()];
        for x in 0..t.kx() {
            for y in 0..t.ky() {
                for (acc, s) in total.iter_mut().zip(score(&t, x, y).unwrap()) {
                    *acc += p.get(x, y) * s;
                }
            }
        }
        for v in total {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sandwich_is_inverse_fisher_at_the_model() {
        let t = theta();
        let f = cell_probs(&t).as_frequencies();
        let info = fisher_information(&t);
        for cfg in [DiscrepancyConfig::default(), DiscrepancyConfig::ml()] {
            let comp = sandwich_covariance(&t, &f, cfg).unwrap();
            let prod = &comp.sigma * &info;
            let err = (prod - DMatrix::identity(t.dim(), t.dim())).abs().max();
            assert!(err < 1e-8, "{err}");
        }
    }

    #[test]
    fn omega_rows_sum_to_zero() {
        let f = CellGrid::frequencies_from_weights(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let omega = multinomial_covariance(&f);
        for r in 0..6 {
            assert_abs_diff_eq!(omega.row(r).sum(), 0.0, epsilon = 1e-15);
        }
        assert!(omega.symmetric_eigenvalues().min() > -1e-14);
    }

    #[test]
    fn intervals() {
        let ci = confidence_interval(0.0, 1.0, 0.95).unwrap();
        assert_abs_diff_eq!(ci.upper, 1.959_963_985, epsilon = 1e-8);
        assert_abs_diff_eq!(ci.lower, -ci.upper, epsilon = 1e-15);
        let point = confidence_interval(0.3, 0.0, 0.9).unwrap();
        assert_eq!((point.lower, point.upper), (0.3, 0.3));
        let (clipped, changed) = confidence_interval(0.95, 0.1, 0.95).unwrap().clipped_to_correlation();
        assert!(changed && clipped.upper == 1.0);
        assert!(confidence_interval(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn residuals_at_the_model() {
        let t = theta();
        let f = cell_probs(&t).as_frequencies();
        let r = residuals_from_frequencies(&f, &t).unwrap();
        assert!(r.grid.values().iter().all(|v| v.abs() < 1e-12));
        assert!(flag_misfit_cells(&r.grid, 3.0).is_empty());
    }

    #[test]
    fn misfit_cells_sorted() {
        let grid = CellGrid::new(2, 2, vec![5.0, -1.0, f64::INFINITY, 3.0], GridKind::PearsonResidual).unwrap();
        let flagged = flag_misfit_cells(&grid, 3.0);
        let order: Vec<_> = flagged.iter().map(|m| (m.row, m.col)).collect();
        assert_eq!(order, vec![(1, 0), (0, 0), (1, 1)]);
        assert!(flag_misfit_cells(&grid, f64::INFINITY).is_empty());
    }
}
