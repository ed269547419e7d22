//! Linear stability of flat films.
//!
//! Linearizing about a flat state `(f*, g*)` gives `phi_t + A* phi_xxxx = 0`.
//! Under the reflection boundary conditions the eigenfunctions are
//! `cos(n pi x / L)`, so mode `n` of the eigen-direction with eigenvalue
//! `lambda` decays at rate `lambda (n pi / L)^4`.

use std::f64::consts::PI;

use crate::model::{coefficient_matrix, det_and_eigenvalues, CoefficientMatrix};
use crate::rheology::FluidParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRate {
    pub mode: usize,
    pub rate_minus: f64,
    pub rate_plus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub f_star: f64,
    pub g_star: f64,
    pub a_star: CoefficientMatrix,
    pub det: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub mode_rates: Vec<ModeRate>,
    /// Slowest decay rate, `lambda_minus (pi / L)^4`.
    pub kappa_pred: f64,
    pub epsilon_ellipticity: f64,
}

impl StabilityReport {
    pub fn new(f_star: f64, g_star: f64, params: &FluidParams, length: f64, modes: usize) -> Self {
        let a_star = flat_matrix(f_star, g_star, params);
        let spectrum = det_and_eigenvalues(&a_star);
        let (mode_rates, kappa_pred) = modal_decay_rates(spectrum.lambda_minus, spectrum.lambda_plus, modes, length);
        Self {
            f_star,
            g_star,
            a_star,
            det: spectrum.det,
            lambda_minus: spectrum.lambda_minus,
            lambda_plus: spectrum.lambda_plus,
            mode_rates,
            kappa_pred,
            epsilon_ellipticity: ellipticity_constant(f_star, g_star, params),
        }
    }

    /// Right eigenvector `(df, dg)` of `A*` for `lambda`, scaled to unit
    /// max-norm.
    pub fn eigenvector(&self, lambda: f64) -> [f64; 2] {
        eigenvector(&self.a_star, lambda)
    }
}

/// The coefficient matrix frozen at a flat film, where `h_xxx = 0`.
pub fn flat_matrix(f_star: f64, g_star: f64, params: &FluidParams) -> CoefficientMatrix {
    coefficient_matrix(f_star, g_star, 0.0, 0.0, params)
}

/// Per-mode rates `lambda_± (n pi / L)^4` for `n = 1..=modes`, and the slowest
/// rate `lambda_minus (pi / L)^4`.
pub fn modal_decay_rates(lambda_minus: f64, lambda_plus: f64, modes: usize, length: f64) -> (Vec<ModeRate>, f64) {
    let rates = (1..=modes)
        .map(|n| {
            let k4 = (n as f64 * PI / length).powi(4);
            ModeRate {
                mode: n,
                rate_minus: lambda_minus * k4,
                rate_plus: lambda_plus * k4,
            }
        })
        .collect();
    (rates, lambda_minus * (PI / length).powi(4))
}

/// Lower bound on the dissipation quadratic form:
/// `min(s+ g^3 / (6 mu0), s-^2 f^3 g^3 / (6 m s+ (mu0 f^3 + 2 g^3)))`.
pub fn ellipticity_constant(f: f64, g: f64, params: &FluidParams) -> f64 {
    let (f3, g3) = (f.powi(3), g.powi(3));
    let first = params.s_plus / (6.0 * params.mu0_plus) * g3;
    let denom = 6.0 * params.m * params.s_plus * (params.mu0_plus * f3 + 2.0 * g3);
    let second = if denom == 0.0 {
        0.0
    } else {
        params.s_minus * params.s_minus * f3 * g3 / denom
    };
    first.min(second)
}

pub fn eigenvector(a: &CoefficientMatrix, lambda: f64) -> [f64; 2] {
    // Pick the better-conditioned row of (A - lambda I) v = 0.
    let row1 = [a.a12, lambda - a.a11];
    let row2 = [lambda - a.a22, a.a21];
    let v = if row1[0].abs() + row1[1].abs() >= row2[0].abs() + row2[1].abs() {
        row1
    } else {
        row2
    };
    let scale = v[0].abs().max(v[1].abs());
    if scale == 0.0 {
        return [1.0, 0.0];
    }
    [v[0] / scale, v[1] / scale]
}
