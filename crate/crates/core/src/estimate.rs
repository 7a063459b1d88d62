//! Maximum likelihood, two-step and robust estimation of the polychoric model.

use serde::Serialize;

use crate::discrepancy::{loss_from_probs, DiscrepancyConfig};
use crate::error::{Error, Margin, Result};
use crate::inference::{fisher_information, sandwich_covariance, MAX_CONDITION};
use crate::model::{cell_probs, empirical_frequencies, CellGrid, ContingencyTable, GridKind, ModelDerivatives, Theta};
use crate::normal::{uni_quantile, RHO_CLAMP};
use crate::optim::{brent_minimize, nelder_mead, NelderMeadOptions, SimplexOutcome, SimplexStatus};
use nalgebra::DMatrix;

/// Adjacent thresholds at least this far apart trigger a `ThresholdGap` warning.
pub const THRESHOLD_GAP: f64 = 3.92;
/// Adjacent thresholds closer than this trigger a `ThresholdMerge` advisory.
pub const THRESHOLD_MERGE: f64 = 1e-4;
/// Edge-matrix singular value ratio below which the final simplex counts as flat.
pub const SIMPLEX_FLATNESS: f64 = 1e-12;

const LOG_GAP_BOUND: f64 = 30.0;
const EXTRA_START_RHO: [f64; 3] = [-0.5, 0.0, 0.5];
const COARSE_XTOL: f64 = 1e-4;
const FIRST_THRESHOLD_BOUND: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ml,
    Robust,
    TwoStep,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ml => "ml",
            Method::Robust => "robust",
            Method::TwoStep => "two-step",
        })
    }
}

/// Diagnostics attached to a fit. Category and cell indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Warning {
    /// Adjacent thresholds `index` and `index + 1` of one variable are far apart.
    ThresholdGap { margin: Margin, index: usize, gap: f64 },
    /// Adjacent thresholds have practically merged.
    ThresholdMerge { margin: Margin, index: usize, gap: f64 },
    DegenerateSimplex,
    CorrelationClamped,
    EmptyCategory { margin: Margin, index: usize },
    /// A cell's Pearson residual equals `c`, where the asymptotic theory does not apply.
    TheoremBoundary { row: usize, col: usize },
    /// The sandwich covariance could not be computed; standard errors are withheld.
    CovarianceUnavailable { reason: String },
}

#[derive(Debug, Clone)]
pub enum Init {
    TwoStep,
    User(Theta),
}

/// Covariance reported for maximum likelihood fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MlCovariance {
    /// Inverse expected Fisher information, the classical ML standard errors.
    #[default]
    Fisher,
    /// Sandwich covariance with `c = ∞`, valid under misspecification.
    Sandwich,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative simplex size at which Nelder–Mead stops.
    pub simplex_tolerance: f64,
    /// Perturbed restarts tried when a run fails to converge.
    pub restarts: usize,
    pub init: Init,
    pub ml_covariance: MlCovariance,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            simplex_tolerance: 1e-10,
            restarts: 1,
            init: Init::TwoStep,
            ml_covariance: MlCovariance::Fisher,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.simplex_tolerance > 0.0) {
            return Err(Error::Domain("iteration limit and simplex tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub theta: Theta,
    pub method: Method,
    pub c: f64,
    /// Estimated covariance of `theta` (already divided by `n`).
    pub covariance: Option<DMatrix<f64>>,
    /// Standard errors in `(ρ, a, b)` order; `None` where not available.
    pub std_errors: Vec<Option<f64>>,
    pub loss: f64,
    pub converged: bool,
    pub warnings: Vec<Warning>,
    pub n: u64,
    pub iterations: usize,
}

impl EstimateResult {
    pub fn rho_std_error(&self) -> Option<f64> {
        self.std_errors[0]
    }
}

/// Map `θ` to the unconstrained optimizer coordinates
/// `(atanh ρ, a₁, log(a₂ - a₁), …, b₁, log(b₂ - b₁), …)`.
pub fn to_unconstrained(theta: &Theta) -> Vec<f64> {
    let mut out = Vec::with_capacity(theta.dim());
    out.push(theta.rho().clamp(-RHO_CLAMP, RHO_CLAMP).atanh());
    for t in [theta.a(), theta.b()] {
        out.push(t[0]);
        out.extend(t.windows(2).map(|w| (w[1] - w[0]).ln()));
    }
    out
}

/// Inverse of [`to_unconstrained`]. The flag reports whether `ρ` was clamped.
pub fn from_unconstrained(u: &[f64], kx: usize, ky: usize) -> Result<(Theta, bool)> {
    if u.len() != kx + ky - 1 {
        return Err(Error::Dimension(format!("{} coordinates for a {kx}x{ky} model", u.len())));
    }
    let raw = u[0].tanh();
    let rho = raw.clamp(-RHO_CLAMP, RHO_CLAMP);
    let clamped = rho != raw;
    let thresholds = |s: &[f64]| {
        let mut t = Vec::with_capacity(s.len());
        let mut cur = s[0].clamp(-FIRST_THRESHOLD_BOUND, FIRST_THRESHOLD_BOUND);
        t.push(cur);
        for g in &s[1..] {
            cur += g.clamp(-LOG_GAP_BOUND, LOG_GAP_BOUND).exp();
            t.push(cur);
        }
        t
    };
    let a = thresholds(&u[1..kx]);
    let b = thresholds(&u[kx..]);
    Ok((Theta::new(rho, a, b)?, clamped))
}

fn check_frequencies(f: &CellGrid, n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    if f.kind() == GridKind::PearsonResidual || f.values().iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Domain("expected a grid of nonnegative frequencies".into()));
    }
    let (rows, cols) = margins(f);
    for (margin, totals) in [(Margin::Row, rows), (Margin::Column, cols)] {
        if let Some(index) = totals.iter().position(|&t| t <= 0.0) {
            return Err(Error::EmptyCategory { margin, index });
        }
    }
    Ok(())
}

fn margins(f: &CellGrid) -> (Vec<f64>, Vec<f64>) {
    let mut rows = vec![0.0; f.kx()];
    let mut cols = vec![0.0; f.ky()];
    for x in 0..f.kx() {
        for y in 0..f.ky() {
            rows[x] += f.get(x, y);
            cols[y] += f.get(x, y);
        }
    }
    (rows, cols)
}

fn check_table(table: &ContingencyTable) -> Result<()> {
    if table.total() == 0 {
        return Err(Error::EmptyTable);
    }
    if let Some((margin, index)) = table.first_empty_category() {
        return Err(Error::EmptyCategory { margin, index });
    }
    Ok(())
}

/// Minimize the loss with tuning constant `cfg.c` (`c = ∞` is maximum likelihood).
///
/// Standard errors come from the sandwich covariance. An iteration-limit
/// failure after all restarts is returned as [`Error::NoConvergence`]
/// carrying the best point found.
pub fn fit(table: &ContingencyTable, cfg: DiscrepancyConfig, opts: &FitOptions) -> Result<EstimateResult> {
    check_table(table)?;
    fit_frequencies(&empirical_frequencies(table)?, table.total(), cfg, opts)
}

/// [`fit`] on a frequency grid, such as an exact population grid. `n` only
/// scales the reported covariance.
pub fn fit_frequencies(
    f_hat: &CellGrid,
    n: u64,
    cfg: DiscrepancyConfig,
    opts: &FitOptions,
) -> Result<EstimateResult> {
    opts.validate()?;
    check_frequencies(f_hat, n)?;
    let f_hat = &f_hat.as_frequencies();
    let (kx, ky) = (f_hat.kx(), f_hat.ky());
    let start = match &opts.init {
        Init::TwoStep => fit_twostep_frequencies(f_hat, n)?.theta,
        Init::User(t) => {
            if t.kx() != kx || t.ky() != ky {
                return Err(Error::Dimension(format!(
                    "initial value is {}x{}, table is {kx}x{ky}",
                    t.kx(),
                    t.ky()
                )));
            }
            t.clone()
        }
    };
    let c = cfg.c();
    let objective = |u: &[f64]| match from_unconstrained(u, kx, ky) {
        Ok((theta, _)) => loss_from_probs(cell_probs(&theta).values(), f_hat.values(), c),
        Err(_) => f64::INFINITY,
    };
    let nm = NelderMeadOptions {
        max_iterations: opts.max_iterations,
        xtol: opts.simplex_tolerance,
        ..Default::default()
    };

    let starts = match &opts.init {
        Init::TwoStep => starting_points(&start),
        Init::User(_) => vec![start.clone()],
    };
    let mut iterations = 0;
    let x0 = if starts.len() == 1 {
        to_unconstrained(&starts[0])
    } else {
        let coarse = NelderMeadOptions { xtol: COARSE_XTOL, ..nm.clone() };
        let mut best: Option<SimplexOutcome> = None;
        for s in &starts {
            let out = nelder_mead(&objective, &to_unconstrained(s), &coarse);
            iterations += out.iterations;
            if best.as_ref().is_none_or(|b| out.best_value() < b.best_value()) {
                best = Some(out);
            }
        }
        best.expect("at least one start").best().to_vec()
    };
    let mut outcome = polish(&objective, &x0, &nm, &mut iterations);
    let mut attempt = 0;
    while attempt < opts.restarts && simplex_failed(&outcome) {
        attempt += 1;
        let jittered = jitter(&start, attempt);
        let retry = polish(&objective, &to_unconstrained(&jittered), &nm, &mut iterations);
        if retry.best_value() < outcome.best_value() || !simplex_failed(&retry) && simplex_failed(&outcome) {
            outcome = retry;
        }
    }

    let (theta, clamped) = from_unconstrained(outcome.best(), kx, ky)?;
    let mut warnings = detect_instability(&theta, Some(&outcome));
    if clamped {
        warnings.push(Warning::CorrelationClamped);
    }
    let mut result = EstimateResult {
        method: if cfg.is_ml() { Method::Ml } else { Method::Robust },
        c,
        covariance: None,
        std_errors: vec![None; theta.dim()],
        loss: outcome.best_value(),
        converged: outcome.status == SimplexStatus::Converged,
        warnings,
        n,
        iterations,
        theta,
    };
    if cfg.is_ml() && opts.ml_covariance == MlCovariance::Fisher {
        attach_fisher_covariance(&mut result);
    } else {
        attach_covariance(&mut result, f_hat, cfg);
    }
    if outcome.status == SimplexStatus::IterationLimit {
        return Err(Error::NoConvergence(Box::new(result)));
    }
    Ok(result)
}

/// The two-step point plus the two-step thresholds paired with a few spread
/// out correlations. Once cells fall on the linear branch the loss can have
/// several basins, and the two-step point may sit in the wrong one.
fn starting_points(twostep: &Theta) -> Vec<Theta> {
    let mut out = vec![twostep.clone()];
    for rho in EXTRA_START_RHO {
        if (rho - twostep.rho()).abs() > 0.1 {
            out.extend(Theta::new(rho, twostep.a().to_vec(), twostep.b().to_vec()).ok());
        }
    }
    out
}

/// Run Nelder–Mead, then restart from the best vertex until restarts stop
/// improving the value. Restarts rebuild a full-size simplex, which guards
/// against premature collapse.
fn polish<F: Fn(&[f64]) -> f64>(
    objective: &F,
    x0: &[f64],
    nm: &NelderMeadOptions,
    iterations: &mut usize,
) -> SimplexOutcome {
    let mut out = nelder_mead(objective, x0, nm);
    *iterations += out.iterations;
    for _ in 0..3 {
        if out.status == SimplexStatus::IterationLimit {
            break;
        }
        let step = NelderMeadOptions { initial_step: 0.02, ..nm.clone() };
        let next = nelder_mead(objective, out.best(), &step);
        *iterations += next.iterations;
        let gain = out.best_value() - next.best_value();
        let settled = gain <= 1e-13 * out.best_value().abs().max(1e-3);
        if next.best_value() <= out.best_value() {
            out = next;
        }
        if settled {
            break;
        }
    }
    out
}

fn simplex_failed(out: &SimplexOutcome) -> bool {
    out.status != SimplexStatus::Converged
}

/// Deterministic perturbation of a starting point: thresholds move by ±0.1
/// and `ρ` by ±0.05, with signs alternating by coordinate and attempt.
fn jitter(theta: &Theta, attempt: usize) -> Theta {
    let sign = |k: usize| if (k + attempt) % 2 == 0 { 1.0 } else { -1.0 };
    let rho = (theta.rho() + 0.05 * sign(0)).clamp(-0.99, 0.99);
    let shift = |t: &[f64], offset: usize| -> Vec<f64> {
        let mut out: Vec<f64> = t.iter().enumerate().map(|(k, v)| v + 0.1 * sign(k + offset)).collect();
        for k in 1..out.len() {
            if out[k] <= out[k - 1] {
                out[k] = out[k - 1] + 0.05;
            }
        }
        out
    };
    let a = shift(theta.a(), 1);
    let b = shift(theta.b(), 1 + theta.a().len());
    Theta::new(rho, a, b).unwrap_or_else(|_| theta.clone())
}

fn attach_covariance(result: &mut EstimateResult, f_hat: &CellGrid, cfg: DiscrepancyConfig) {
    match sandwich_covariance(&result.theta, f_hat, cfg) {
        Ok(comp) => {
            let cov = comp.sigma / result.n as f64;
            result.std_errors = (0..cov.nrows()).map(|i| Some(cov[(i, i)].max(0.0).sqrt())).collect();
            result.covariance = Some(cov);
            result.warnings.extend(comp.warnings);
        }
        Err(e) => result.warnings.push(Warning::CovarianceUnavailable { reason: e.to_string() }),
    }
}

fn attach_fisher_covariance(result: &mut EstimateResult) {
    let info = fisher_information(&result.theta);
    let d = info.nrows();
    let svd = info.svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        let reason = Error::SingularM { condition }.to_string();
        result.warnings.push(Warning::CovarianceUnavailable { reason });
        return;
    }
    let Ok(inv) = svd.pseudo_inverse(0.0) else { return };
    let cov = (&inv + inv.transpose()) * (0.5 / result.n as f64);
    result.std_errors = (0..d).map(|i| Some(cov[(i, i)].max(0.0).sqrt())).collect();
    result.covariance = Some(cov);
}

/// Thresholds from cumulative marginal proportions, then `ρ` by one-dimensional
/// maximum likelihood with the thresholds held fixed.
///
/// Only the standard error of `ρ` is reported, from the Fisher information
/// of `ρ` alone.
pub fn fit_twostep(table: &ContingencyTable) -> Result<EstimateResult> {
    check_table(table)?;
    fit_twostep_frequencies(&empirical_frequencies(table)?, table.total())
}

/// [`fit_twostep`] on a frequency grid.
pub fn fit_twostep_frequencies(f_hat: &CellGrid, n: u64) -> Result<EstimateResult> {
    check_frequencies(f_hat, n)?;
    let f_hat = &f_hat.as_frequencies();
    let cut = |totals: Vec<f64>, margin: Margin| -> Result<Vec<f64>> {
        let total: f64 = totals.iter().sum();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(totals.len() - 1);
        for (k, t) in totals[..totals.len() - 1].iter().enumerate() {
            acc += t;
            let p = acc / total;
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::EmptyCategory { margin, index: k + usize::from(p >= 1.0) });
            }
            out.push(uni_quantile(p)?);
        }
        Ok(out)
    };
    let (rows, cols) = margins(f_hat);
    let a = cut(rows, Margin::Row)?;
    let b = cut(cols, Margin::Column)?;
    let with_rho = |rho: f64| Theta::new(rho, a.clone(), b.clone());
    let (rho, loss) = brent_minimize(
        |rho| match with_rho(rho) {
            Ok(t) => loss_from_probs(cell_probs(&t).values(), f_hat.values(), f64::INFINITY),
            Err(_) => f64::INFINITY,
        },
        -RHO_CLAMP,
        RHO_CLAMP,
        1e-12,
        500,
    );
    let theta = with_rho(rho)?;
    let mut warnings = detect_instability(&theta, None);
    if RHO_CLAMP - rho.abs() < 1e-6 {
        warnings.push(Warning::CorrelationClamped);
    }

    let probs = cell_probs(&theta);
    let deriv = ModelDerivatives::new(&theta);
    let mut info = 0.0;
    for x in 0..theta.kx() {
        for y in 0..theta.ky() {
            let p = probs.get(x, y);
            if p > 1e-300 {
                info += deriv.grad(x, y)[0].powi(2) / p;
            }
        }
    }
    let mut std_errors = vec![None; theta.dim()];
    if info > 0.0 {
        std_errors[0] = Some(1.0 / (n as f64 * info).sqrt());
    }
    Ok(EstimateResult {
        theta,
        method: Method::TwoStep,
        c: f64::INFINITY,
        covariance: None,
        std_errors,
        loss,
        converged: true,
        warnings,
        n,
        iterations: 0,
    })
}

/// Product-moment correlation of the integer category codes and its
/// standard error `sqrt((1 - r²) / (N - 2))`.
pub fn pearson_sample_correlation(table: &ContingencyTable) -> Result<(f64, f64)> {
    let n = table.total();
    if n < 3 {
        return Err(Error::Domain(format!("sample correlation needs N >= 3, got {n}")));
    }
    let nf = n as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for x in 0..table.kx() {
        for y in 0..table.ky() {
            let w = table.get(x, y) as f64;
            let (xv, yv) = ((x + 1) as f64, (y + 1) as f64);
            sx += w * xv;
            sy += w * yv;
            sxx += w * xv * xv;
            syy += w * yv * yv;
            sxy += w * xv * yv;
        }
    }
    let vx = sxx - sx * sx / nf;
    let vy = syy - sy * sy / nf;
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::DegenerateMargin);
    }
    let r = ((sxy - sx * sy / nf) / (vx * vy).sqrt()).clamp(-1.0, 1.0);
    let se = ((1.0 - r * r) / (nf - 2.0)).sqrt();
    Ok((r, se))
}

/// Threshold-gap, threshold-merge and degenerate-simplex checks on a fit.
pub fn detect_instability(theta: &Theta, simplex: Option<&SimplexOutcome>) -> Vec<Warning> {
    let mut out = Vec::new();
    for (margin, t) in [(Margin::Row, theta.a()), (Margin::Column, theta.b())] {
        for (index, w) in t.windows(2).enumerate() {
            let gap = w[1] - w[0];
            if gap >= THRESHOLD_GAP {
                out.push(Warning::ThresholdGap { margin, index, gap });
            } else if gap < THRESHOLD_MERGE {
                out.push(Warning::ThresholdMerge { margin, index, gap });
            }
        }
    }
    if let Some(s) = simplex {
        if s.status != SimplexStatus::Converged || s.flatness() < SIMPLEX_FLATNESS {
            out.push(Warning::DegenerateSimplex);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn table_from(theta: &Theta, n: f64) -> ContingencyTable {
        let p = cell_probs(theta);
        ContingencyTable::new(theta.kx(), theta.ky(), p.values().iter().map(|v| (v * n).round() as u64).collect())
            .unwrap()
    }

    #[test]
    fn reparameterization_round_trip() {
        let t = Theta::new(-0.3, vec![-1.0, 0.1, 2.0], vec![0.4]).unwrap();
        let (back, clamped) = from_unconstrained(&to_unconstrained(&t), 4, 2).unwrap();
        assert!(!clamped);
        assert_abs_diff_eq!(back.rho(), t.rho(), epsilon = 1e-14);
        for (x, y) in back.a().iter().zip(t.a()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-14);
        }
        let (edge, clamped) = from_unconstrained(&[30.0, 0.0, 0.0], 2, 2).unwrap();
        assert!(clamped);
        assert_eq!(edge.rho(), RHO_CLAMP);
    }

    #[test]
    fn balanced_two_by_two() {
        let table = ContingencyTable::from_rows(&[vec![25, 25], vec![25, 25]]).unwrap();
        let ts = fit_twostep(&table).unwrap();
        assert_abs_diff_eq!(ts.theta.a()[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ts.theta.rho(), 0.0, epsilon = 1e-6);
        assert!(ts.std_errors[1].is_none());
    }

    #[test]
    fn twostep_thresholds_are_marginal_quantiles() {
        let table = ContingencyTable::from_rows(&[
            vec![10, 0, 0, 0, 0],
            vec![0, 20, 0, 0, 0],
            vec![0, 0, 40, 0, 0],
            vec![0, 0, 0, 20, 0],
            vec![0, 0, 0, 0, 10],
        ])
        .unwrap();
        let ts = fit_twostep(&table).unwrap();
        for (got, want) in ts.theta.a().iter().zip([-1.2816, -0.5244, 0.5244, 1.2816]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-4);
        }
    }

    #[test]
    fn fit_recovers_generating_theta() {
        let truth = Theta::new(0.45, vec![-1.0, 0.0, 0.8], vec![-0.6, 0.5]).unwrap();
        let table = table_from(&truth, 1e7);
        for cfg in [DiscrepancyConfig::default(), DiscrepancyConfig::ml()] {
            let r = fit(&table, cfg, &FitOptions::default()).unwrap();
            assert!(r.converged);
            for (x, y) in r.theta.to_vec().iter().zip(truth.to_vec()) {
                assert_abs_diff_eq!(*x, y, epsilon = 1e-3);
            }
            assert!(r.std_errors.iter().all(|s| s.is_some()));
        }
    }

    #[test]
    fn empty_category_is_an_error() {
        let table = ContingencyTable::from_rows(&[vec![3, 4], vec![0, 0], vec![2, 1]]).unwrap();
        assert!(matches!(
            fit(&table, DiscrepancyConfig::default(), &FitOptions::default()),
            Err(Error::EmptyCategory { margin: Margin::Row, index: 1 })
        ));
    }

    #[test]
    fn sample_correlation() {
        let diag = ContingencyTable::from_rows(&[vec![5, 0, 0], vec![0, 5, 0], vec![0, 0, 5]]).unwrap();
        let (r, se) = pearson_sample_correlation(&diag).unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
        assert_eq!(se, 0.0);
        let constant = ContingencyTable::from_rows(&[vec![5, 3], vec![0, 0]]).unwrap();
        assert!(matches!(pearson_sample_correlation(&constant), Err(Error::DegenerateMargin)));
    }

    #[test]
    fn instability_rules() {
        let wide = Theta::new(0.1, vec![-2.0, 2.0], vec![0.0]).unwrap();
        assert!(matches!(detect_instability(&wide, None)[..], [Warning::ThresholdGap { gap, .. }] if gap == 4.0));
        let fine = Theta::new(0.1, vec![-1.5, -0.5, 0.5, 1.5], vec![-1.5, -0.5, 0.5, 1.5]).unwrap();
        assert!(detect_instability(&fine, None).is_empty());
        let merged = Theta::new(0.1, vec![0.0, 1e-5], vec![0.0]).unwrap();
        assert!(matches!(detect_instability(&merged, None)[..], [Warning::ThresholdMerge { .. }]));
    }
}
