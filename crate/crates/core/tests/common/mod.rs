//! Reference computations that do not go through the library's own numerics.
#![allow(dead_code)]

pub mod grids;

use nalgebra::{DMatrix, DVector};
use polycor::{cell_prob_grad, cell_probs, ContingencyTable, Theta};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Kronrod 15-point nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut sum = WGK[7] * f(c);
    for k in 0..7 {
        sum += WGK[k] * (f(c - h * XGK[k]) + f(c + h * XGK[k]));
    }
    sum * h
}

/// Adaptive Kronrod integration with an absolute error target. A panel is
/// accepted once it agrees with the sum over its two halves.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (left, right) = (kronrod15(f, a, m), kronrod15(f, m, b));
        let halves = left + right;
        if (halves - whole).abs() <= tol.max(64.0 * f64::EPSILON * halves.abs()) || depth >= 30 {
            return halves;
        }
        rec(f, a, m, left, 0.5 * tol, depth + 1) + rec(f, m, b, right, 0.5 * tol, depth + 1)
    }
    if a >= b {
        return 0.0;
    }
    // Unit panels so a narrow peak cannot fall between the first nodes.
    let panels = (b - a).ceil().max(1.0) as usize;
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * w, a + (k + 1) as f64 * w);
            rec(f, lo, hi, kronrod15(f, lo, hi), tol / panels as f64, 0)
        })
        .sum()
}

/// Standard bivariate normal density written out directly.
pub fn density(x: f64, y: f64, rho: f64) -> f64 {
    let s = 1.0 - rho * rho;
    (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s.sqrt())
}

const LOWER: f64 = -9.0;

/// `Φ₂(u, v; ρ)` by nested adaptive quadrature of the density.
pub fn biv_cdf_quadrature(u: f64, v: f64, rho: f64) -> f64 {
    let (u, v) = (u.min(-LOWER), v.min(-LOWER));
    let inner = |x: f64| {
        let g = |y| density(x, y, rho);
        let lo = LOWER.max(rho * x - 9.0 * (1.0 - rho * rho).sqrt());
        let mode = (rho * x).clamp(lo, v.max(lo));
        integrate(&g, lo, mode, 1e-14) + integrate(&g, mode, v, 1e-14)
    };
    integrate(&inner, LOWER, u, 1e-12)
}

/// `Φ₂(0, 0; ρ) = 1/4 + asin(ρ)/(2π)`.
pub fn orthant(rho: f64) -> f64 {
    0.25 + rho.asin() / (2.0 * std::f64::consts::PI)
}

pub fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// `|a - b| <= rel * max(|a|, |b|) + abs`.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + abs
}

fn log_likelihood(table: &ContingencyTable, theta: &Theta) -> f64 {
    let p = cell_probs(theta);
    let mut ll = 0.0;
    for x in 0..table.kx() {
        for y in 0..table.ky() {
            let n = table.get(x, y);
            if n > 0 {
                ll += n as f64 * p.get(x, y).ln();
            }
        }
    }
    ll
}

/// Maximum likelihood by Fisher scoring directly in `θ`, with step halving
/// to stay inside the parameter space and keep the likelihood increasing.
pub fn mle_by_scoring(table: &ContingencyTable, start: &Theta) -> Theta {
    let (kx, ky) = (table.kx(), table.ky());
    let n = table.total() as f64;
    let mut theta = start.clone();
    let mut ll = log_likelihood(table, &theta);
    for _ in 0..500 {
        let d = theta.dim();
        let p = cell_probs(&theta);
        let mut g = DVector::zeros(d);
        let mut info = DMatrix::zeros(d, d);
        for x in 0..kx {
            for y in 0..ky {
                let pi = p.get(x, y);
                let dp = DVector::from_vec(cell_prob_grad(&theta, x, y).unwrap());
                g += &dp * (table.get(x, y) as f64 / pi);
                info += &dp * dp.transpose() * (n / pi);
            }
        }
        let delta = info.lu().solve(&g).expect("information matrix is invertible");
        let current = theta.to_vec();
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let cand: Vec<f64> = current.iter().zip(delta.iter()).map(|(c, d)| c + t * d).collect();
            if let Ok(next) = Theta::from_slice(&cand, kx, ky) {
                let next_ll = log_likelihood(table, &next);
                if next_ll >= ll - 1e-12 * ll.abs() {
                    theta = next;
                    ll = next_ll;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved || t * delta.amax() < 1e-13 {
            break;
        }
    }
    theta
}

/// Random valid parameter: correlation in (-0.8, 0.8) and thresholds with
/// gaps of at least 0.25 inside (-1.8, 1.8).
pub fn random_theta(rng: &mut impl Rng, kx: usize, ky: usize) -> Theta {
    let mut cuts = |k: usize| -> Vec<f64> {
        loop {
            let mut t: Vec<f64> = (0..k - 1).map(|_| rng.random_range(-1.8..1.8)).collect();
            t.sort_by(f64::total_cmp);
            if t.windows(2).all(|w| w[1] - w[0] >= 0.25) {
                return t;
            }
        }
    };
    let a = cuts(kx);
    let b = cuts(ky);
    Theta::new(rng.random_range(-0.8..0.8), a, b).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const ENVIOUS_N: u64 = 725;

/// "Not envious" (rows) by "envious" (columns), reconstructed from the
/// published relative frequencies as round(725 f).
pub fn envious_table() -> ContingencyTable {
    let text = include_str!("../data/envious.csv");
    let rows: Vec<Vec<u64>> =
        text.lines().filter(|l| !l.trim().is_empty()).map(|l| l.split(',').map(|v| v.trim().parse().unwrap()).collect()).collect();
    ContingencyTable::from_rows(&rows).unwrap()
}

/// Published relative frequencies of the envious pair.
pub const ENVIOUS_FREQUENCIES: [[f64; 5]; 5] = [
    [0.019, 0.007, 0.003, 0.028, 0.022],
    [0.007, 0.040, 0.050, 0.138, 0.014],
    [0.006, 0.047, 0.143, 0.030, 0.003],
    [0.054, 0.189, 0.029, 0.019, 0.007],
    [0.108, 0.018, 0.006, 0.008, 0.007],
];

/// Published residuals at the robust fit; `None` marks cells above 1000.
pub const ENVIOUS_RESIDUALS: [[Option<f64>; 5]; 5] = [
    [None, None, Some(10.82), Some(0.14), Some(-0.35)],
    [None, Some(9.07), Some(-0.20), Some(-0.10), Some(0.42)],
    [Some(4.48), Some(-0.35), Some(-0.01), Some(-0.20), Some(76.14)],
    [Some(-0.12), Some(-0.08), Some(-0.39), Some(10.66), None],
    [Some(-0.11), Some(-0.12), Some(35.01), None, None],
];

/// The table with its row categories in reverse order.
pub fn reverse_rows(table: &ContingencyTable) -> ContingencyTable {
    let mut rows: Vec<Vec<u64>> = table.rows().map(|r| r.to_vec()).collect();
    rows.reverse();
    ContingencyTable::from_rows(&rows).unwrap()
}
