//! Finite-difference and quadrature sweeps over the documented grids. Each
//! sweep returns its worst case as error divided by allowed error.

use polycor::normal::*;
use polycor::{cell_prob_grad, cell_prob_hessian, cell_probs, Theta};

use super::{biv_cdf_quadrature, central_difference};

pub const GRID_UV: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];
pub const GRID_RHO: [f64; 5] = [-0.8, -0.3, 0.0, 0.3, 0.8];
const H: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Worst {
    pub ratio: f64,
    pub case: String,
}

impl Worst {
    fn new() -> Self {
        Self { ratio: 0.0, case: String::new() }
    }

    fn update(&mut self, analytic: f64, reference: f64, rel: f64, abs: f64, case: impl FnOnce() -> String) {
        let allowed = rel * analytic.abs().max(reference.abs()) + abs;
        let ratio = (analytic - reference).abs() / allowed;
        if !(ratio <= self.ratio) {
            self.ratio = ratio;
            self.case = format!("{} analytic {analytic:.12e} reference {reference:.12e}", case());
        }
    }

    pub fn ok(&self) -> bool {
        self.ratio <= 1.0
    }
}

fn grid() -> impl Iterator<Item = (f64, f64, f64)> {
    GRID_UV.into_iter().flat_map(|u| GRID_UV.into_iter().flat_map(move |v| GRID_RHO.into_iter().map(move |r| (u, v, r))))
}

fn at(u: f64, v: f64, r: f64) -> BivariateNormalArgs {
    BivariateNormalArgs::new(u, v, r)
}

pub fn cdf_against_quadrature() -> Worst {
    let mut w = Worst::new();
    for (u, v, r) in grid() {
        w.update(biv_cdf(at(u, v, r)), biv_cdf_quadrature(u, v, r), 0.0, 1e-10, || format!("cdf({u},{v},{r})"));
    }
    w
}

pub fn cdf_first_derivatives() -> Worst {
    let mut w = Worst::new();
    for (u, v, r) in grid() {
        let fd_r = central_difference(|t| biv_cdf(at(u, v, t)), r, H);
        let fd_u = central_difference(|t| biv_cdf(at(t, v, r)), u, H);
        let fd_v = central_difference(|t| biv_cdf(at(u, t, r)), v, H);
        let p = at(u, v, r);
        w.update(d_cdf_d_rho(p).unwrap(), fd_r, 1e-6, 1e-9, || format!("d/drho at ({u},{v},{r})"));
        w.update(d_cdf_d_u(p).unwrap(), fd_u, 1e-6, 1e-9, || format!("d/du at ({u},{v},{r})"));
        w.update(d_cdf_d_v(p).unwrap(), fd_v, 1e-6, 1e-9, || format!("d/dv at ({u},{v},{r})"));
    }
    w
}

pub fn cdf_second_derivatives() -> Worst {
    let mut w = Worst::new();
    let d_rho = |u, v, r| d_cdf_d_rho(at(u, v, r)).unwrap();
    let d_u = |u, v, r| d_cdf_d_u(at(u, v, r)).unwrap();
    let d_v = |u, v, r| d_cdf_d_v(at(u, v, r)).unwrap();
    for (u, v, r) in grid() {
        let p = at(u, v, r);
        let jet = cdf_jet(p).unwrap();
        let checks = [
            ("rho,rho", d2_cdf_d_rho2(p).unwrap(), central_difference(|t| d_rho(u, v, t), r, H)),
            ("u,u", d2_cdf_d_u2(p).unwrap(), central_difference(|t| d_u(t, v, r), u, H)),
            ("v,v", d2_cdf_d_v2(p).unwrap(), central_difference(|t| d_v(u, t, r), v, H)),
            ("u,rho", d2_cdf_d_u_d_rho(p).unwrap(), central_difference(|t| d_u(u, v, t), r, H)),
            ("rho,u", d2_cdf_d_u_d_rho(p).unwrap(), central_difference(|t| d_rho(t, v, r), u, H)),
            ("v,rho", d2_cdf_d_v_d_rho(p).unwrap(), central_difference(|t| d_v(u, v, t), r, H)),
            ("u,v", d2_cdf_d_u_d_v(p).unwrap(), central_difference(|t| d_u(u, t, r), v, H)),
            ("v,u", d2_cdf_d_u_d_v(p).unwrap(), central_difference(|t| d_v(t, v, r), u, H)),
            ("jet rho,rho", jet.hess[0][0], central_difference(|t| d_rho(u, v, t), r, H)),
            ("jet u,v", jet.hess[1][2], central_difference(|t| d_u(u, t, r), v, H)),
        ];
        for (name, analytic, fd) in checks {
            w.update(analytic, fd, 1e-5, 1e-8, || format!("{name} at ({u},{v},{r})"));
        }
    }
    w
}

/// Parameters for the cell-probability derivative sweep.
pub fn model_grid() -> Vec<Theta> {
    vec![
        Theta::new(0.5, vec![-1.5, -0.5, 0.5, 1.5], vec![-1.5, -0.5, 0.5, 1.5]).unwrap(),
        Theta::new(-0.7, vec![-0.8, 0.3], vec![-1.2, 0.0, 0.9]).unwrap(),
        Theta::new(0.2, vec![0.1], vec![-0.4]).unwrap(),
        Theta::new(0.85, vec![-2.0, -1.0, -0.3, 0.2, 0.9, 1.7], vec![-1.1, 1.3]).unwrap(),
    ]
}

fn shifted(theta: &Theta, k: usize, h: f64) -> Theta {
    let mut v = theta.to_vec();
    v[k] += h;
    Theta::from_slice(&v, theta.kx(), theta.ky()).unwrap()
}

pub fn model_first_derivatives() -> Worst {
    let mut w = Worst::new();
    for theta in model_grid() {
        for k in 0..theta.dim() {
            let (up, down) = (cell_probs(&shifted(&theta, k, H)), cell_probs(&shifted(&theta, k, -H)));
            for x in 0..theta.kx() {
                for y in 0..theta.ky() {
                    let fd = (up.get(x, y) - down.get(x, y)) / (2.0 * H);
                    let g = cell_prob_grad(&theta, x, y).unwrap()[k];
                    w.update(g, fd, 1e-6, 1e-9, || format!("dpi({x},{y})/dtheta{k} at {:?}", theta.to_vec()));
                }
            }
        }
    }
    w
}

pub fn model_second_derivatives() -> Worst {
    let mut w = Worst::new();
    for theta in model_grid() {
        for x in 0..theta.kx() {
            for y in 0..theta.ky() {
                let hess = cell_prob_hessian(&theta, x, y).unwrap();
                for k in 0..theta.dim() {
                    let up = cell_prob_grad(&shifted(&theta, k, H), x, y).unwrap();
                    let down = cell_prob_grad(&shifted(&theta, k, -H), x, y).unwrap();
                    for l in 0..theta.dim() {
                        let fd = (up[l] - down[l]) / (2.0 * H);
                        w.update(hess[(l, k)], fd, 1e-5, 1e-8, || {
                            format!("d2pi({x},{y})/dtheta{l}dtheta{k} at {:?}", theta.to_vec())
                        });
                    }
                }
            }
        }
    }
    w
}
