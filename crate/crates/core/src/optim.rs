//! Derivative-free minimizers: Nelder–Mead for the full parameter vector
//! and Brent's method for the one-dimensional correlation search.

/// Why a simplex run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplexStatus {
    /// Simplex shrank below the relative size tolerance and vertex values agree.
    Converged,
    /// Vertex values are equal but the simplex stopped contracting: the
    /// objective is flat along some direction.
    Stalled,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Relative simplex size at which the run is considered converged.
    pub xtol: f64,
    /// Absolute spread of vertex values accepted at convergence.
    pub ftol: f64,
    /// Per-coordinate offset used to build the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iterations: 5000, xtol: 1e-10, ftol: 1e-14, initial_step: 0.1 }
    }
}

/// Final state of a Nelder–Mead run. Vertices are sorted by value.
#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    pub vertices: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: SimplexStatus,
}

impl SimplexOutcome {
    pub fn best(&self) -> &[f64] {
        &self.vertices[0]
    }

    pub fn best_value(&self) -> f64 {
        self.values[0]
    }

    /// Largest vertex distance from the best vertex (max norm), relative to
    /// the size of the best vertex.
    pub fn relative_diameter(&self) -> f64 {
        relative_diameter(&self.vertices)
    }

    pub fn value_spread(&self) -> f64 {
        self.values[self.values.len() - 1] - self.values[0]
    }

    /// Ratio of the smallest to the largest singular value of the edge
    /// matrix; near zero when the simplex has collapsed onto a hyperplane.
    pub fn flatness(&self) -> f64 {
        let n = self.vertices[0].len();
        let edges = nalgebra::DMatrix::from_fn(n, n, |r, c| self.vertices[c + 1][r] - self.vertices[0][r]);
        let sv = edges.singular_values();
        let max = sv.max();
        if max == 0.0 {
            return 0.0;
        }
        sv.min() / max
    }
}

fn relative_diameter(vertices: &[Vec<f64>]) -> f64 {
    let best = &vertices[0];
    let scale = best.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let spread = vertices[1..]
        .iter()
        .flat_map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0f64, f64::max);
    spread / scale
}

/// Minimize `f` with the adaptive-coefficient Nelder–Mead method.
///
/// Reflection, expansion, contraction and shrink coefficients scale with
/// the dimension `n` as `1`, `1 + 2/n`, `0.75 - 1/(2n)` and `1 - 1/n`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> SimplexOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n > 0, "Nelder-Mead needs at least one coordinate");
    let nf = n as f64;
    let (alpha, gamma, beta, delta) = if n > 1 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut vertices = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        let step = if x0[i] != 0.0 { opts.initial_step * x0[i].abs().max(1.0) } else { opts.initial_step };
        v[i] += step;
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices.iter().map(|v| eval(v, &mut evaluations)).collect();

    let mut status = SimplexStatus::IterationLimit;
    let mut iterations = 0;
    let mut flat_iterations = 0usize;
    let mut last_diameter = f64::INFINITY;
    while iterations < opts.max_iterations {
        sort_simplex(&mut vertices, &mut values);
        let diameter = relative_diameter(&vertices);
        let spread = values[n] - values[0];
        if spread <= opts.ftol || !values[0].is_finite() {
            if diameter <= opts.xtol {
                status = SimplexStatus::Converged;
                break;
            }
            if diameter >= last_diameter * (1.0 - 1e-3) {
                flat_iterations += 1;
            } else {
                flat_iterations = 0;
            }
            if flat_iterations > 20 * n {
                status = SimplexStatus::Stalled;
                break;
            }
        } else {
            flat_iterations = 0;
        }
        last_diameter = last_diameter.min(diameter);
        iterations += 1;

        let centroid: Vec<f64> =
            (0..n).map(|j| vertices[..n].iter().map(|v| v[j]).sum::<f64>() / nf).collect();
        let towards = |coef: f64, worst: &[f64]| -> Vec<f64> {
            centroid.iter().zip(worst).map(|(c, w)| c + coef * (c - w)).collect()
        };
        let reflected = towards(alpha, &vertices[n]);
        let fr = eval(&reflected, &mut evaluations);

        if fr < values[0] {
            let expanded = towards(alpha * gamma, &vertices[n]);
            let fe = eval(&expanded, &mut evaluations);
            if fe < fr {
                vertices[n] = expanded;
                values[n] = fe;
            } else {
                vertices[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            vertices[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (candidate, fc) = if fr < values[n] {
            let outside = towards(alpha * beta, &vertices[n]);
            let fo = eval(&outside, &mut evaluations);
            (outside, fo.min(f64::INFINITY))
        } else {
            let inside = towards(-beta, &vertices[n]);
            let fi = eval(&inside, &mut evaluations);
            (inside, fi)
        };
        if fc < values[n].min(fr) {
            vertices[n] = candidate;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        let best = vertices[0].clone();
        for i in 1..=n {
            for (vj, bj) in vertices[i].iter_mut().zip(&best) {
                *vj = bj + delta * (*vj - bj);
            }
            values[i] = eval(&vertices[i], &mut evaluations);
        }
    }
    sort_simplex(&mut vertices, &mut values);
    SimplexOutcome { vertices, values, iterations, evaluations, status }
}

fn sort_simplex(vertices: &mut Vec<Vec<f64>>, values: &mut Vec<f64>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    *vertices = idx.iter().map(|&i| vertices[i].clone()).collect();
    *values = idx.iter().map(|&i| values[i]).collect();
}

/// Brent's method for a one-dimensional minimum on `[lo, hi]`.
pub fn brent_minimize<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iterations: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..max_iterations {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(m - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
    }

    #[test]
    fn quadratic_converges() {
        let target = [1.0, -2.0, 0.5, 3.0];
        let out = nelder_mead(
            |x| x.iter().zip(&target).enumerate().map(|(i, (a, b))| (i + 1) as f64 * (a - b).powi(2)).sum(),
            &[0.0; 4],
            &NelderMeadOptions::default(),
        );
        assert_eq!(out.status, SimplexStatus::Converged);
        for (a, b) in out.best().iter().zip(&target) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn rosenbrock_converges() {
        let opts = NelderMeadOptions { max_iterations: 20_000, ..Default::default() };
        let out = nelder_mead(rosenbrock, &[-1.2, 1.0, -0.5], &opts);
        assert_eq!(out.status, SimplexStatus::Converged);
        for v in out.best() {
            assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_objective_terminates() {
        let out = nelder_mead(|_| 1.0, &[0.3, -2.0], &NelderMeadOptions::default());
        assert_ne!(out.status, SimplexStatus::IterationLimit);
    }

    #[test]
    fn iteration_limit_is_reported() {
        let opts = NelderMeadOptions { max_iterations: 5, ..Default::default() };
        let out = nelder_mead(rosenbrock, &[-1.2, 1.0], &opts);
        assert_eq!(out.status, SimplexStatus::IterationLimit);
        assert_eq!(out.iterations, 5);
    }

    #[test]
    fn brent_finds_parabola_minimum() {
        let (x, fx) = brent_minimize(|x| (x - 0.3).powi(2) + 1.0, -1.0, 1.0, 1e-12, 200);
        assert!((x - 0.3).abs() < 1e-8);
        assert!((fx - 1.0).abs() < 1e-15);
        let (x, _) = brent_minimize(|x| -x, -1.0, 1.0, 1e-10, 200);
        assert!(x > 0.999);
    }
}
