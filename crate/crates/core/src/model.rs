//! The polychoric model: parameters, contingency data and the cell
//! probabilities `π_xy(θ)` with their exact gradient and Hessian.
//!
//! Cells are addressed with zero-based `(row, col)` indices; row `x`
//! corresponds to the latent interval `[a_{x}, a_{x+1})` with `a_0 = -∞`
//! and `a_{K_X} = +∞`. Parameter vectors are always laid out as
//! `(ρ, a_1, …, a_{K_X-1}, b_1, …, b_{K_Y-1})`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Margin, Result};
use crate::normal::{biv_cdf, cdf_jet, BivariateNormalArgs, CdfJet};

/// Polychoric parameter vector: correlation plus row and column thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theta {
    rho: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

fn check_increasing(name: &str, t: &[f64]) -> Result<()> {
    if t.is_empty() {
        return Err(Error::InvalidTheta(format!("{name} needs at least one threshold")));
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidTheta(format!("{name} thresholds must be finite")));
    }
    if t.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidTheta(format!("{name} thresholds must be strictly increasing")));
    }
    Ok(())
}

impl Theta {
    pub fn new(rho: f64, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidTheta(format!("rho = {rho} outside (-1, 1)")));
        }
        check_increasing("row", &a)?;
        check_increasing("column", &b)?;
        Ok(Self { rho, a, b })
    }

    /// Rebuild from the canonical flat layout `(ρ, a…, b…)`.
    pub fn from_slice(values: &[f64], kx: usize, ky: usize) -> Result<Self> {
        if kx < 2 || ky < 2 || values.len() != kx + ky - 1 {
            return Err(Error::Dimension(format!(
                "expected {} parameters for a {kx}x{ky} table, got {}",
                kx + ky - 1,
                values.len()
            )));
        }
        Self::new(values[0], values[1..kx].to_vec(), values[kx..].to_vec())
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn kx(&self) -> usize {
        self.a.len() + 1
    }

    pub fn ky(&self) -> usize {
        self.b.len() + 1
    }

    /// Number of free parameters, `K_X + K_Y - 1`.
    pub fn dim(&self) -> usize {
        self.a.len() + self.b.len() + 1
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.push(self.rho);
        v.extend_from_slice(&self.a);
        v.extend_from_slice(&self.b);
        v
    }

    /// Row threshold `a_i` with the conventions `a_0 = -∞`, `a_{K_X} = +∞`.
    pub fn row_bound(&self, i: usize) -> f64 {
        bound(&self.a, i)
    }

    pub fn col_bound(&self, j: usize) -> f64 {
        bound(&self.b, j)
    }

    /// Parameter index of row threshold `a_i` (finite thresholds only).
    fn row_param(&self, i: usize) -> Option<usize> {
        (1..self.kx()).contains(&i).then_some(i)
    }

    fn col_param(&self, j: usize) -> Option<usize> {
        (1..self.ky()).contains(&j).then(|| self.a.len() + j)
    }

    /// The same model with both category orders reversed: thresholds are
    /// negated and reversed, the correlation is unchanged.
    pub fn reversed(&self) -> Self {
        Self {
            rho: self.rho,
            a: self.a.iter().rev().map(|v| -v).collect(),
            b: self.b.iter().rev().map(|v| -v).collect(),
        }
    }
}

fn bound(t: &[f64], i: usize) -> f64 {
    if i == 0 {
        f64::NEG_INFINITY
    } else if i > t.len() {
        f64::INFINITY
    } else {
        t[i - 1]
    }
}

/// `K_X × K_Y` table of nonnegative counts, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContingencyTable {
    kx: usize,
    ky: usize,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(kx: usize, ky: usize, counts: Vec<u64>) -> Result<Self> {
        if kx < 2 || ky < 2 {
            return Err(Error::Dimension(format!("need at least 2x2 categories, got {kx}x{ky}")));
        }
        if counts.len() != kx * ky {
            return Err(Error::Dimension(format!("{} counts for a {kx}x{ky} table", counts.len())));
        }
        Ok(Self { kx, ky, counts })
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let kx = rows.len();
        let ky = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ky) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(kx, ky, rows.concat())
    }

    /// Cross-tabulate zero-based category pairs.
    pub fn from_pairs(kx: usize, ky: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut counts = vec![0; kx * ky];
        for (x, y) in pairs {
            if x >= kx || y >= ky {
                return Err(Error::Dimension(format!("category pair ({x}, {y}) outside {kx}x{ky}")));
            }
            counts[x * ky + y] += 1;
        }
        Self::new(kx, ky, counts)
    }

    pub fn kx(&self) -> usize {
        self.kx
    }

    pub fn ky(&self) -> usize {
        self.ky
    }

    pub fn get(&self, x: usize, y: usize) -> u64 {
        self.counts[x * self.ky + y]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks(self.ky)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        let mut t = vec![0; self.ky];
        for row in self.rows() {
            for (acc, c) in t.iter_mut().zip(row) {
                *acc += c;
            }
        }
        t
    }

    /// First empty row or column category, if any.
    pub fn first_empty_category(&self) -> Option<(Margin, usize)> {
        if let Some(i) = self.row_totals().iter().position(|&t| t == 0) {
            return Some((Margin::Row, i));
        }
        self.col_totals().iter().position(|&t| t == 0).map(|j| (Margin::Column, j))
    }

    /// Table with both category orders reversed.
    pub fn reversed(&self) -> Self {
        let mut counts = self.counts.clone();
        counts.reverse();
        Self { kx: self.kx, ky: self.ky, counts }
    }

    pub fn transposed(&self) -> Self {
        let mut counts = Vec::with_capacity(self.counts.len());
        for y in 0..self.ky {
            for x in 0..self.kx {
                counts.push(self.get(x, y));
            }
        }
        Self { kx: self.ky, ky: self.kx, counts }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    ModelProbability,
    EmpiricalFrequency,
    PearsonResidual,
}

/// `K_X × K_Y` grid of reals, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellGrid {
    kx: usize,
    ky: usize,
    values: Vec<f64>,
    kind: GridKind,
}

impl CellGrid {
    pub fn new(kx: usize, ky: usize, values: Vec<f64>, kind: GridKind) -> Result<Self> {
        if values.len() != kx * ky {
            return Err(Error::Dimension(format!("{} values for a {kx}x{ky} grid", values.len())));
        }
        Ok(Self { kx, ky, values, kind })
    }

    /// A probability grid built from arbitrary nonnegative weights.
    pub fn frequencies_from_weights(kx: usize, ky: usize, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Domain("frequency weights must be nonnegative with positive sum".into()));
        }
        Self::new(kx, ky, weights.into_iter().map(|w| w / total).collect(), GridKind::EmpiricalFrequency)
    }

    pub fn kx(&self) -> usize {
        self.kx
    }

    pub fn ky(&self) -> usize {
        self.ky
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[x * self.ky + y]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.ky)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Reinterpret a grid as a frequency grid (e.g. model probabilities used as data).
    pub fn as_frequencies(&self) -> Self {
        Self { kind: GridKind::EmpiricalFrequency, ..self.clone() }
    }

    pub(crate) fn with_kind(kx: usize, ky: usize, values: Vec<f64>, kind: GridKind) -> Self {
        Self { kx, ky, values, kind }
    }
}

/// Probability of the latent rectangle `[alo, ahi) × [blo, bhi)`.
///
/// Each axis is reflected towards the lower tail before differencing so
/// that small upper-tail cells keep relative accuracy.
pub fn rect_prob(alo: f64, ahi: f64, blo: f64, bhi: f64, rho: f64) -> f64 {
    let upper = |lo: f64, hi: f64| lo != f64::NEG_INFINITY && (hi == f64::INFINITY || lo + hi > 0.0);
    let (mut alo, mut ahi, mut blo, mut bhi, mut r) = (alo, ahi, blo, bhi, rho);
    if upper(alo, ahi) {
        (alo, ahi) = (-ahi, -alo);
        r = -r;
    }
    if upper(blo, bhi) {
        (blo, bhi) = (-bhi, -blo);
        r = -r;
    }
    let f = |u: f64, v: f64| {
        if u == f64::NEG_INFINITY || v == f64::NEG_INFINITY {
            0.0
        } else {
            biv_cdf(BivariateNormalArgs::new(u, v, r))
        }
    };
    (f(ahi, bhi) - f(alo, bhi) - f(ahi, blo) + f(alo, blo)).max(0.0)
}

/// Model cell probabilities `π_xy(θ)`.
///
/// Same reflection rule as [`rect_prob`], with `Φ₂` values memoized on the
/// threshold lattice of each of the four reflections.
pub fn cell_probs(theta: &Theta) -> CellGrid {
    let (kx, ky) = (theta.kx(), theta.ky());
    let stride = (kx + 1) * (ky + 1);
    let mut memo = vec![f64::NAN; 4 * stride];
    let mut lattice = |i: usize, j: usize, sx: f64, sy: f64| {
        let slot = usize::from(sx < 0.0) * 2 * stride + usize::from(sy < 0.0) * stride + i * (ky + 1) + j;
        if memo[slot].is_nan() {
            let u = sx * theta.row_bound(i);
            let v = sy * theta.col_bound(j);
            memo[slot] = biv_cdf(BivariateNormalArgs::new(u, v, sx * sy * theta.rho()));
        }
        memo[slot]
    };
    let upper = |lo: f64, hi: f64| lo != f64::NEG_INFINITY && (hi == f64::INFINITY || lo + hi > 0.0);

    let mut values = Vec::with_capacity(kx * ky);
    for x in 0..kx {
        let sx = if upper(theta.row_bound(x), theta.row_bound(x + 1)) { -1.0 } else { 1.0 };
        for y in 0..ky {
            let sy = if upper(theta.col_bound(y), theta.col_bound(y + 1)) { -1.0 } else { 1.0 };
            let p = lattice(x + 1, y + 1, sx, sy) - lattice(x, y + 1, sx, sy) - lattice(x + 1, y, sx, sy)
                + lattice(x, y, sx, sy);
            values.push((sx * sy * p).max(0.0));
        }
    }
    CellGrid::with_kind(kx, ky, values, GridKind::ModelProbability)
}

/// Relative frequencies `N_xy / N`.
pub fn empirical_frequencies(table: &ContingencyTable) -> Result<CellGrid> {
    let n = table.total();
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    let n = n as f64;
    Ok(CellGrid::with_kind(
        table.kx(),
        table.ky(),
        table.counts().iter().map(|&c| c as f64 / n).collect(),
        GridKind::EmpiricalFrequency,
    ))
}

/// First and second derivatives of every cell probability at a fixed `θ`.
///
/// The `Φ₂` jets on the `(K_X+1) × (K_Y+1)` threshold lattice are computed
/// once and shared by the four cells touching each lattice point.
#[derive(Debug, Clone)]
pub struct ModelDerivatives {
    theta: Theta,
    jets: Vec<CdfJet>,
}

impl ModelDerivatives {
    pub fn new(theta: &Theta) -> Self {
        let (kx, ky) = (theta.kx(), theta.ky());
        let mut jets = Vec::with_capacity((kx + 1) * (ky + 1));
        for i in 0..=kx {
            for j in 0..=ky {
                let args = BivariateNormalArgs::new(theta.row_bound(i), theta.col_bound(j), theta.rho());
                jets.push(cdf_jet(args).expect("Theta guarantees |rho| < 1"));
            }
        }
        Self { theta: theta.clone(), jets }
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    fn corners(&self, x: usize, y: usize) -> [(usize, usize, f64); 4] {
        [(x + 1, y + 1, 1.0), (x, y + 1, -1.0), (x + 1, y, -1.0), (x, y, 1.0)]
    }

    fn jet(&self, i: usize, j: usize) -> &CdfJet {
        &self.jets[i * (self.theta.ky() + 1) + j]
    }

    /// Gradient of `π_xy` in canonical parameter order.
    pub fn grad(&self, x: usize, y: usize) -> Vec<f64> {
        let mut g = vec![0.0; self.theta.dim()];
        for (i, j, sign) in self.corners(x, y) {
            let jet = self.jet(i, j);
            let slots = [Some(0), self.theta.row_param(i), self.theta.col_param(j)];
            for (slot, d) in slots.iter().zip(jet.grad) {
                if let Some(p) = slot {
                    g[*p] += sign * d;
                }
            }
        }
        g
    }

    /// Hessian of `π_xy` in canonical parameter order.
    pub fn hessian(&self, x: usize, y: usize) -> DMatrix<f64> {
        let d = self.theta.dim();
        let mut h = DMatrix::zeros(d, d);
        for (i, j, sign) in self.corners(x, y) {
            let jet = self.jet(i, j);
            let slots = [Some(0), self.theta.row_param(i), self.theta.col_param(j)];
            for (r, pr) in slots.iter().enumerate() {
                let Some(pr) = pr else { continue };
                for (c, pc) in slots.iter().enumerate() {
                    let Some(pc) = pc else { continue };
                    h[(*pr, *pc)] += sign * jet.hess[r][c];
                }
            }
        }
        h
    }
}

fn check_cell(theta: &Theta, x: usize, y: usize) -> Result<()> {
    if x >= theta.kx() || y >= theta.ky() {
        return Err(Error::Dimension(format!("cell ({x}, {y}) outside {}x{}", theta.kx(), theta.ky())));
    }
    Ok(())
}

pub fn cell_prob_grad(theta: &Theta, x: usize, y: usize) -> Result<Vec<f64>> {
    check_cell(theta, x, y)?;
    Ok(ModelDerivatives::new(theta).grad(x, y))
}

pub fn cell_prob_hessian(theta: &Theta, x: usize, y: usize) -> Result<DMatrix<f64>> {
    check_cell(theta, x, y)?;
    Ok(ModelDerivatives::new(theta).hessian(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sim_theta(rho: f64) -> Theta {
        Theta::new(rho, vec![-1.5, -0.5, 0.5, 1.5], vec![-1.5, -0.5, 0.5, 1.5]).unwrap()
    }

    #[test]
    fn theta_validation() {
        assert!(Theta::new(1.0, vec![0.0], vec![0.0]).is_err());
        assert!(Theta::new(0.2, vec![0.5, 0.5], vec![0.0]).is_err());
        assert!(Theta::new(0.2, vec![0.0], vec![1.0, -1.0]).is_err());
        assert!(Theta::new(0.2, vec![], vec![0.0]).is_err());
        let t = Theta::new(0.2, vec![-1.0, 1.0], vec![0.0]).unwrap();
        assert_eq!(t.dim(), 4);
        assert_eq!(t.to_vec(), vec![0.2, -1.0, 1.0, 0.0]);
        assert_eq!(Theta::from_slice(&t.to_vec(), 3, 2).unwrap(), t);
    }

    #[test]
    fn independence_quadrants() {
        let t = Theta::new(0.0, vec![0.0], vec![0.0]).unwrap();
        for p in cell_probs(&t).values() {
            assert_abs_diff_eq!(*p, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn simulation_design_cells() {
        let p = cell_probs(&sim_theta(0.5));
        assert!(p.get(4, 0) < 0.0005);
        // P(|ξ| < 0.5, |η| < 0.5) at ρ = 0.5
        assert_abs_diff_eq!(p.get(2, 2), 0.165, epsilon = 0.001);
        assert_abs_diff_eq!(p.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn concordant_corners_grow_with_rho() {
        let lo = cell_probs(&sim_theta(0.3));
        let hi = cell_probs(&sim_theta(0.6));
        assert!(hi.get(0, 0) > lo.get(0, 0));
        assert!(hi.get(4, 4) > lo.get(4, 4));
    }

    #[test]
    fn gradient_sparsity_and_sum() {
        let t = sim_theta(0.3);
        let md = ModelDerivatives::new(&t);
        let mut total = vec![0.0; t.dim()];
        for x in 0..5 {
            for y in 0..5 {
                let g = md.grad(x, y);
                for k in 1..5 {
                    // a_k is parameter k and bounds rows k-1 and k
                    if k != x && k != x + 1 {
                        assert_eq!(g[k], 0.0);
                    }
                }
                for (acc, v) in total.iter_mut().zip(&g) {
                    *acc += v;
                }
            }
        }
        for v in total {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn hessian_blocks() {
        let t = Theta::new(-0.4, vec![-0.8, 0.1, 0.9], vec![-0.3, 0.6]).unwrap();
        let md = ModelDerivatives::new(&t);
        let mut total = DMatrix::zeros(t.dim(), t.dim());
        for x in 0..t.kx() {
            for y in 0..t.ky() {
                let h = md.hessian(x, y);
                assert_eq!(h, h.transpose());
                for k in 1..t.kx() {
                    for l in 1..t.kx() {
                        if k != l {
                            assert_eq!(h[(k, l)], 0.0);
                        }
                    }
                }
                total += h;
            }
        }
        assert!(total.amax() < 1e-9, "{}", total);
    }

    #[test]
    fn empirical_frequency_edges() {
        let single = ContingencyTable::new(2, 2, vec![1, 0, 0, 0]).unwrap();
        assert_eq!(empirical_frequencies(&single).unwrap().values(), &[1.0, 0.0, 0.0, 0.0]);
        let empty = ContingencyTable::new(2, 2, vec![0; 4]).unwrap();
        assert!(matches!(empirical_frequencies(&empty), Err(Error::EmptyTable)));
        let flat = ContingencyTable::new(3, 3, vec![7; 9]).unwrap();
        for v in empirical_frequencies(&flat).unwrap().values() {
            assert_abs_diff_eq!(*v, 1.0 / 9.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn table_helpers() {
        let t = ContingencyTable::from_rows(&[vec![1, 2, 0], vec![0, 3, 0]]).unwrap();
        assert_eq!(t.row_totals(), vec![3, 3]);
        assert_eq!(t.col_totals(), vec![1, 5, 0]);
        assert_eq!(t.first_empty_category(), Some((Margin::Column, 2)));
        assert_eq!(t.reversed().get(0, 0), 0);
        assert_eq!(t.reversed().get(1, 2), 1);
        assert_eq!(t.transposed().get(2, 1), 0);
        assert!(ContingencyTable::from_rows(&[vec![1, 2], vec![3]]).is_err());
        let pairs = ContingencyTable::from_pairs(2, 2, [(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        assert_eq!(pairs.counts(), &[1, 1, 1, 1]);
    }
}
