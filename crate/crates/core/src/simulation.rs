//! Data generators under partial misspecification and the Monte Carlo harness.
//!
//! Replication `r` of a study draws from `ChaCha8Rng::seed_from_u64(seed)`
//! switched to stream `r`, so results do not depend on how replications are
//! scheduled across threads.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::discrepancy::DiscrepancyConfig;
use crate::error::{Error, Result};
use crate::estimate::{fit, fit_twostep, pearson_sample_correlation, FitOptions};
use crate::inference::confidence_interval;
use crate::matrix::{fit_matrix, OrdinalDataset};
use crate::model::{cell_probs, rect_prob, CellGrid, ContingencyTable, GridKind, Theta};

/// Distribution of the uninformative part of the sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Misspecification {
    None,
    BivariateNormal { mean: [f64; 2], variances: [f64; 2], covariance: f64 },
    IndependentGumbel { location: f64, scale: f64 },
}

impl Misspecification {
    fn validate(&self) -> Result<()> {
        match *self {
            Misspecification::None => Ok(()),
            Misspecification::BivariateNormal { mean, variances, covariance } => {
                let ok = mean.iter().all(|m| m.is_finite())
                    && variances.iter().all(|v| *v > 0.0 && v.is_finite())
                    && covariance.abs() < (variances[0] * variances[1]).sqrt();
                ok.then_some(()).ok_or_else(|| Error::InvalidSpec("misspecifying normal is degenerate".into()))
            }
            Misspecification::IndependentGumbel { location, scale } => (location.is_finite() && scale > 0.0)
                .then_some(())
                .ok_or_else(|| Error::InvalidSpec("Gumbel scale must be positive".into())),
        }
    }

    /// Latent draw for one observation.
    fn sample<R: Rng>(&self, rng: &mut R) -> Option<[f64; 2]> {
        match *self {
            Misspecification::None => None,
            Misspecification::BivariateNormal { mean, variances, covariance } => {
                let (sx, sy) = (variances[0].sqrt(), variances[1].sqrt());
                let r = covariance / (sx * sy);
                let (z1, z2) = correlated_pair(rng, r);
                Some([mean[0] + sx * z1, mean[1] + sy * z2])
            }
            Misspecification::IndependentGumbel { location, scale } => {
                let g = Gumbel::new(location, scale).expect("validated");
                Some([g.sample(rng), g.sample(rng)])
            }
        }
    }

    /// Probability that a draw falls in `[alo, ahi) × [blo, bhi)`.
    fn rect_mass(&self, alo: f64, ahi: f64, blo: f64, bhi: f64) -> f64 {
        match *self {
            Misspecification::None => 0.0,
            Misspecification::BivariateNormal { mean, variances, covariance } => {
                let (sx, sy) = (variances[0].sqrt(), variances[1].sqrt());
                let sx_ = |t: f64| (t - mean[0]) / sx;
                let sy_ = |t: f64| (t - mean[1]) / sy;
                rect_prob(sx_(alo), sx_(ahi), sy_(blo), sy_(bhi), covariance / (sx * sy))
            }
            Misspecification::IndependentGumbel { location, scale } => {
                let cdf = |t: f64| (-(-(t - location) / scale).exp()).exp();
                (cdf(ahi) - cdf(alo)) * (cdf(bhi) - cdf(blo))
            }
        }
    }
}

fn correlated_pair<R: Rng>(rng: &mut R, rho: f64) -> (f64, f64) {
    let z1: f64 = StandardNormal.sample(rng);
    let w: f64 = StandardNormal.sample(rng);
    (z1, rho * z1 + (1.0 - rho * rho).sqrt() * w)
}

/// Mixture `(1 - ε)·N₂(0, ρ*) + ε·H`, discretized by the informative thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureSpec {
    epsilon: f64,
    truth: Theta,
    misspecifying: Misspecification,
}

impl MixtureSpec {
    pub fn new(epsilon: f64, truth: Theta, misspecifying: Misspecification) -> Result<Self> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(Error::InvalidSpec(format!("misspecification fraction {epsilon} outside [0, 0.5)")));
        }
        misspecifying.validate()?;
        if epsilon > 0.0 && misspecifying == Misspecification::None {
            return Err(Error::InvalidSpec("positive fraction needs a misspecifying distribution".into()));
        }
        Ok(Self { epsilon, truth, misspecifying })
    }

    /// Five categories per variable with thresholds ±0.5, ±1.5 and `ρ* = 0.5`;
    /// the misspecifying normal sits at `(2, -2)` with variances 0.2.
    pub fn leverage_design(epsilon: f64) -> Result<Self> {
        let t = vec![-1.5, -0.5, 0.5, 1.5];
        let h = if epsilon > 0.0 {
            Misspecification::BivariateNormal { mean: [2.0, -2.0], variances: [0.2, 0.2], covariance: 0.0 }
        } else {
            Misspecification::None
        };
        Self::new(epsilon, Theta::new(0.5, t.clone(), t)?, h)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn truth(&self) -> &Theta {
        &self.truth
    }

    pub fn misspecifying(&self) -> &Misspecification {
        &self.misspecifying
    }
}

/// Exact cell probabilities of the mixture.
pub fn population_frequencies(spec: &MixtureSpec) -> CellGrid {
    let t = &spec.truth;
    let model = cell_probs(t);
    let eps = spec.epsilon;
    let mut values = Vec::with_capacity(t.kx() * t.ky());
    for x in 0..t.kx() {
        for y in 0..t.ky() {
            let h = spec.misspecifying.rect_mass(t.row_bound(x), t.row_bound(x + 1), t.col_bound(y), t.col_bound(y + 1));
            values.push((1.0 - eps) * model.get(x, y) + eps * h);
        }
    }
    CellGrid::new(t.kx(), t.ky(), values, GridKind::EmpiricalFrequency).expect("dimensions match")
}

/// Random stream for replication `index` under master `seed`.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Zero-based category of `value` under increasing `thresholds`.
fn discretize(value: f64, thresholds: &[f64]) -> usize {
    thresholds.partition_point(|&t| t <= value)
}

/// Draw `n` observations from the mixture.
pub fn generate_pair(spec: &MixtureSpec, n: usize, seed: u64) -> ContingencyTable {
    generate_pair_with(spec, n, &mut replication_rng(seed, 0))
}

pub fn generate_pair_with<R: Rng>(spec: &MixtureSpec, n: usize, rng: &mut R) -> ContingencyTable {
    let t = &spec.truth;
    let pairs = (0..n).map(|_| {
        let uninformative = spec.epsilon > 0.0 && rng.random::<f64>() < spec.epsilon;
        let [u, v] = match uninformative.then(|| spec.misspecifying.sample(rng)).flatten() {
            Some(draw) => draw,
            None => {
                let (u, v) = correlated_pair(rng, t.rho());
                [u, v]
            }
        };
        (discretize(u, t.a()), discretize(v, t.b()))
    });
    ContingencyTable::from_pairs(t.kx(), t.ky(), pairs.collect::<Vec<_>>()).expect("categories in range")
}

/// Latent correlation matrix of the matrix design: one factor with loadings
/// 0.8, 0.7, 0.6, 0.5, 0.4.
pub fn matrix_design_correlation() -> DMatrix<f64> {
    let l = [0.8, 0.7, 0.6, 0.5, 0.4];
    DMatrix::from_fn(5, 5, |i, j| if i == j { 1.0 } else { l[i] * l[j] })
}

/// Common thresholds of the matrix design.
pub const MATRIX_DESIGN_THRESHOLDS: [f64; 4] = [-1.28, -0.52, 0.56, 1.28];

/// Multivariate mixture: a normal with correlation `cormat` with probability
/// `1 - ε`, otherwise independent Gumbel coordinates. All coordinates share the
/// mixture membership and the `thresholds`.
pub fn generate_multivariate(
    cormat: &DMatrix<f64>,
    thresholds: &[f64],
    epsilon: f64,
    gumbel: (f64, f64),
    n: usize,
    seed: u64,
) -> Result<OrdinalDataset> {
    generate_multivariate_with(cormat, thresholds, epsilon, gumbel, n, &mut replication_rng(seed, 0))
}

pub fn generate_multivariate_with<R: Rng>(
    cormat: &DMatrix<f64>,
    thresholds: &[f64],
    epsilon: f64,
    gumbel: (f64, f64),
    n: usize,
    rng: &mut R,
) -> Result<OrdinalDataset> {
    let q = cormat.nrows();
    if q < 2 || cormat.ncols() != q {
        return Err(Error::Dimension("correlation matrix must be square with q >= 2".into()));
    }
    if (0..q).any(|i| (cormat[(i, i)] - 1.0).abs() > 1e-12)
        || (0..q).any(|i| (0..i).any(|j| (cormat[(i, j)] - cormat[(j, i)]).abs() > 1e-12))
    {
        return Err(Error::InvalidSpec("correlation matrix must be symmetric with unit diagonal".into()));
    }
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::InvalidSpec(format!("misspecification fraction {epsilon} outside [0, 0.5)")));
    }
    if thresholds.is_empty() || thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpec("thresholds must be strictly increasing".into()));
    }
    let chol = cormat.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let lower = chol.l();
    let g = Gumbel::new(gumbel.0, gumbel.1).map_err(|e| Error::InvalidSpec(format!("Gumbel: {e}")))?;

    let mut columns = vec![Vec::with_capacity(n); q];
    let mut z = DVector::zeros(q);
    for _ in 0..n {
        let uninformative = epsilon > 0.0 && rng.random::<f64>() < epsilon;
        let latent = if uninformative {
            DVector::from_fn(q, |_, _| g.sample(rng))
        } else {
            for k in 0..q {
                z[k] = StandardNormal.sample(rng);
            }
            &lower * &z
        };
        for (k, col) in columns.iter_mut().enumerate() {
            col.push(Some(discretize(latent[k], thresholds) as u32 + 1));
        }
    }
    OrdinalDataset::new((1..=q).map(|k| format!("V{k}")).collect(), columns)
}

/// Estimators compared in a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Estimator {
    Robust { c: f64 },
    Ml,
    TwoStep,
    SampleCorrelation,
}

impl Estimator {
    pub fn label(&self) -> String {
        match self {
            Estimator::Robust { c } => format!("robust(c={c})"),
            Estimator::Ml => "ml".into(),
            Estimator::TwoStep => "two-step".into(),
            Estimator::SampleCorrelation => "sample-correlation".into(),
        }
    }

    /// `(ρ̂, SE)` for one table.
    pub fn estimate(&self, table: &ContingencyTable, opts: &FitOptions) -> Result<(f64, Option<f64>)> {
        match *self {
            Estimator::Robust { c } => {
                let r = fit(table, DiscrepancyConfig::new(c)?, opts)?;
                Ok((r.theta.rho(), r.rho_std_error()))
            }
            Estimator::Ml => {
                let r = fit(table, DiscrepancyConfig::ml(), opts)?;
                Ok((r.theta.rho(), r.rho_std_error()))
            }
            Estimator::TwoStep => {
                let r = fit_twostep(table)?;
                Ok((r.theta.rho(), r.rho_std_error()))
            }
            Estimator::SampleCorrelation => pearson_sample_correlation(table).map(|(r, se)| (r, Some(se))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceRow {
    pub estimator: Estimator,
    pub mean_estimate: f64,
    pub mean_bias: f64,
    /// Sample standard deviation; 0 with `sd_undefined` set for one success.
    pub std_dev: f64,
    pub sd_undefined: bool,
    /// Share of intervals containing the truth, among fits with a standard error.
    pub coverage: f64,
    pub mean_ci_length: f64,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceReport {
    pub epsilon: f64,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub alpha: f64,
    pub truth: f64,
    pub rows: Vec<PerformanceRow>,
}

#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub alpha: f64,
    pub seed: u64,
    pub fit: FitOptions,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self { alpha: 0.05, seed: 1, fit: FitOptions::default() }
    }
}

/// Replicate `generate_pair` and summarize each estimator's `ρ̂`.
pub fn run_study(
    spec: &MixtureSpec,
    n: usize,
    replications: usize,
    estimators: &[Estimator],
    opts: &StudyOptions,
) -> Result<PerformanceReport> {
    if replications == 0 {
        return Err(Error::InvalidSpec("replications must be at least 1".into()));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::InvalidSpec(format!("alpha {} outside (0, 1)", opts.alpha)));
    }
    let per_rep: Vec<Vec<Result<(f64, Option<f64>)>>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let table = generate_pair_with(spec, n, &mut replication_rng(opts.seed, r));
            estimators.iter().map(|e| e.estimate(&table, &opts.fit)).collect()
        })
        .collect();

    let truth = spec.truth.rho();
    let rows = estimators
        .iter()
        .enumerate()
        .map(|(k, &estimator)| {
            let outcomes = per_rep.iter().map(|rep| rep[k].as_ref().ok().copied());
            summarize(estimator, outcomes, truth, 1.0 - opts.alpha)
        })
        .collect();
    Ok(PerformanceReport { epsilon: spec.epsilon, n, replications, seed: opts.seed, alpha: opts.alpha, truth, rows })
}

fn summarize(
    estimator: Estimator,
    outcomes: impl Iterator<Item = Option<(f64, Option<f64>)>>,
    truth: f64,
    level: f64,
) -> PerformanceRow {
    let (mut est, mut failures) = (Vec::new(), 0);
    let (mut covered, mut with_se, mut length) = (0usize, 0usize, 0.0);
    for o in outcomes {
        let Some((rho, se)) = o else {
            failures += 1;
            continue;
        };
        est.push(rho);
        if let Some(ci) = se.and_then(|s| confidence_interval(rho, s, level).ok()) {
            with_se += 1;
            length += ci.length();
            covered += usize::from(ci.contains(truth));
        }
    }
    let successes = est.len();
    let mean = est.iter().sum::<f64>() / successes as f64;
    let sd_undefined = successes < 2;
    let std_dev = if sd_undefined {
        0.0
    } else {
        (est.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (successes - 1) as f64).sqrt()
    };
    PerformanceRow {
        estimator,
        mean_estimate: mean,
        mean_bias: mean - truth,
        std_dev,
        sd_undefined,
        coverage: covered as f64 / with_se.max(1) as f64,
        mean_ci_length: length / with_se.max(1) as f64,
        successes,
        failures,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairBias {
    pub i: usize,
    pub j: usize,
    pub truth: f64,
    pub mean_estimate: f64,
    /// `|mean estimate - truth|`.
    pub abs_mean_bias: f64,
    pub successes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixStudyReport {
    pub epsilon: f64,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub c: f64,
    pub pairs: Vec<PairBias>,
}

/// Replicate `generate_multivariate` and record the average bias of each
/// pairwise correlation under tuning constant `c`.
#[allow(clippy::too_many_arguments)]
pub fn run_matrix_study(
    cormat: &DMatrix<f64>,
    thresholds: &[f64],
    epsilon: f64,
    gumbel: (f64, f64),
    n: usize,
    replications: usize,
    c: f64,
    opts: &StudyOptions,
) -> Result<MatrixStudyReport> {
    if replications == 0 {
        return Err(Error::InvalidSpec("replications must be at least 1".into()));
    }
    let cfg = if c.is_infinite() { DiscrepancyConfig::ml() } else { DiscrepancyConfig::new(c)? };
    let q = cormat.nrows();
    let datasets: Vec<OrdinalDataset> = (0..replications as u64)
        .map(|r| generate_multivariate_with(cormat, thresholds, epsilon, gumbel, n, &mut replication_rng(opts.seed, r)))
        .collect::<Result<_>>()?;
    let fits: Vec<DMatrix<f64>> = datasets.par_iter().map(|d| fit_matrix(d, cfg, &opts.fit).estimates).collect();
    let mut pairs = Vec::new();
    for i in 0..q {
        for j in i + 1..q {
            let vals: Vec<f64> = fits.iter().map(|m| m[(i, j)]).filter(|v| v.is_finite()).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            pairs.push(PairBias {
                i,
                j,
                truth: cormat[(i, j)],
                mean_estimate: mean,
                abs_mean_bias: (mean - cormat[(i, j)]).abs(),
                successes: vals.len(),
            });
        }
    }
    Ok(MatrixStudyReport { epsilon, n, replications, seed: opts.seed, c, pairs })
}
