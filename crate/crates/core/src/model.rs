//! Closed-form algebra of the Ellis-on-Newtonian film system.
//!
//! In divergence form the system reads
//!
//! ```text
//! f_t     + (p11 f_xxx + p12 h_xxx)_x                          = 0
//! (f+g)_t + (p21 f_xxx + p22 h_xxx + C_p g^(p+2) Phi(h_xxx))_x = 0
//! ```
//!
//! with `h = f + g`. Written in the unknowns `u = (f, g)` the principal part is
//! `A(u, u_xxx) u_xxxx` and the remaining product-rule terms are collected in
//! `(F1, F2)`, so that `u_t + A u_xxxx + F = 0`.

use thiserror::Error;

use crate::rheology::{c_p, phi, phi_prime, FluidParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("height z = {z} outside the film [0, {top}]")]
    HeightOutOfRange { z: f64, top: f64 },
}

/// Mobility polynomials of the divergence-form system.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MobilityCoefficients {
    pub p11: f64,
    pub p12: f64,
    pub p21: f64,
    pub p22: f64,
}

/// Partial derivatives of each mobility with respect to `(f, g)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MobilityGradient {
    pub p11: [f64; 2],
    pub p12: [f64; 2],
    pub p21: [f64; 2],
    pub p22: [f64; 2],
}

/// Entries of the quasilinear coefficient matrix `A(u, u_xxx)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoefficientMatrix {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl CoefficientMatrix {
    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// `(a11 - a22)^2 / 4 + a12 a21`, the discriminant of the characteristic
    /// polynomial written without cancellation.
    pub fn discriminant(&self) -> f64 {
        let d = self.a11 - self.a22;
        0.25 * d * d + self.a12 * self.a21
    }

    pub fn as_array(&self) -> [[f64; 2]; 2] {
        [[self.a11, self.a12], [self.a21, self.a22]]
    }
}

/// Determinant and the two eigenvalues (`lambda_minus <= lambda_plus`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub det: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

pub fn mobilities(f: f64, g: f64, params: &FluidParams) -> MobilityCoefficients {
    let ms = params.m * params.s_plus;
    let sm = params.s_minus;
    let f2 = f * f;
    let f3 = f2 * f;
    let p11 = sm / 3.0 * f3;
    let p12 = ms * (f3 / 3.0 + 0.5 * f2 * g);
    let p21 = p11 + 0.5 * sm * f2 * g;
    let p22 = p12 + ms * (f * g * g + 0.5 * f2 * g) + params.s_plus / (3.0 * params.mu0_plus) * g * g * g;
    MobilityCoefficients { p11, p12, p21, p22 }
}

pub fn mobility_gradient(f: f64, g: f64, params: &FluidParams) -> MobilityGradient {
    let ms = params.m * params.s_plus;
    let sm = params.s_minus;
    let f2 = f * f;
    let p11 = [sm * f2, 0.0];
    let p12 = [ms * (f2 + f * g), 0.5 * ms * f2];
    let p21 = [p11[0] + sm * f * g, 0.5 * sm * f2];
    let p22 = [
        p12[0] + ms * (g * g + f * g),
        p12[1] + ms * (2.0 * f * g + 0.5 * f2) + params.s_plus / params.mu0_plus * g * g,
    ];
    MobilityGradient { p11, p12, p21, p22 }
}

/// `C_p |g|^(p+2)`, the mobility of the shear-thinning flux.
#[inline]
pub fn ellis_mobility(g: f64, params: &FluidParams) -> f64 {
    let c = c_p(params);
    if c == 0.0 {
        return 0.0;
    }
    c * g.abs().powf(params.p + 2.0)
}

/// Fluxes of `f` and of `h = f + g`: `(J_f, J_h)`.
pub fn flux_pair(f: f64, g: f64, f3: f64, h3: f64, params: &FluidParams) -> (f64, f64) {
    let mob = mobilities(f, g, params);
    let j_f = mob.p11 * f3 + mob.p12 * h3;
    let j_h = mob.p21 * f3 + mob.p22 * h3 + ellis_mobility(g, params) * phi(h3, params.p);
    (j_f, j_h)
}

/// Flux of the upper film alone, `J_h - J_f`, in the form it is derived
/// (without subtracting two larger numbers).
pub fn flux_upper(f: f64, g: f64, f3: f64, h3: f64, params: &FluidParams) -> f64 {
    let ms = params.m * params.s_plus;
    let newtonian = (0.5 * ms * f * f * g + ms * f * g * g + params.s_plus / (3.0 * params.mu0_plus) * g * g * g) * h3
        + 0.5 * params.s_minus * f * f * g * f3;
    newtonian + ellis_mobility(g, params) * phi(h3, params.p)
}

pub fn coefficient_matrix(f: f64, g: f64, _f3: f64, h3: f64, params: &FluidParams) -> CoefficientMatrix {
    let ms = params.m * params.s_plus;
    let sm = params.s_minus;
    let f2 = f * f;
    let f3 = f2 * f;
    let upper = 0.5 * ms * f2 * g
        + ms * f * g * g
        + params.s_plus / (3.0 * params.mu0_plus) * g * g * g
        + ellis_mobility(g, params) * phi_prime(h3, params.p);
    CoefficientMatrix {
        a11: (ms + sm) / 3.0 * f3 + 0.5 * ms * f2 * g,
        a12: ms * (f3 / 3.0 + 0.5 * f2 * g),
        a21: upper + 0.5 * sm * f2 * g,
        a22: upper,
    }
}

/// Determinant and eigenvalues of a 2×2 coefficient matrix.
pub fn det_and_eigenvalues(a: &CoefficientMatrix) -> Spectrum {
    let det = a.det();
    let half_trace = 0.5 * a.trace();
    let root = a.discriminant().max(0.0).sqrt();
    let lambda_plus = half_trace + root;
    // lambda_minus = det / lambda_plus avoids cancellation when det << trace^2.
    let lambda_minus = if lambda_plus != 0.0 { det / lambda_plus } else { half_trace - root };
    Spectrum { det, lambda_minus, lambda_plus }
}

/// Determinant of `A(u, u_xxx)` expanded as a polynomial in `(f, g)`.
pub fn determinant_closed_form(f: f64, g: f64, h3: f64, params: &FluidParams) -> f64 {
    let sp = params.s_plus;
    let sm = params.s_minus;
    params.m * sm * sp / 12.0 * f.powi(4) * g * g
        + sm * sp / (9.0 * params.mu0_plus) * f.powi(3) * g.powi(3)
        + sm / 3.0 * f.powi(3) * ellis_mobility(g, params) * phi_prime(h3, params.p)
}

/// Lower-order terms `(F1, F2)`: the product-rule remainder of the flux
/// divergence after removing `A u_xxxx`.
pub fn lower_order_terms(
    f: f64,
    g: f64,
    fx: f64,
    gx: f64,
    f3: f64,
    h3: f64,
    params: &FluidParams,
) -> (f64, f64) {
    let ms = params.m * params.s_plus;
    let sm = params.s_minus;
    let f1 = ms * (f * f * fx + f * g * fx + 0.5 * f * f * gx) * h3 + sm * f * f * fx * f3;
    let c = c_p(params);
    let ellis = if c == 0.0 {
        0.0
    } else {
        c * (params.p + 2.0) * g.abs().powf(params.p + 1.0) * phi(h3, params.p) * gx
    };
    let f2 = ms
        * (f * g * fx + 0.5 * f * f * gx + g * g * fx + 2.0 * f * g * gx + g * g * gx / (params.m * params.mu0_plus))
        * h3
        + sm * (f * g * fx + 0.5 * f * f * gx) * f3
        + ellis;
    (f1, f2)
}

/// Pressures `(p_minus, p_plus)` in the lower and upper film.
pub fn pressures(f_xx: f64, _g_xx: f64, h_xx: f64, params: &FluidParams) -> (f64, f64) {
    let p_plus = -params.s_plus * h_xx;
    let p_minus = -params.m * params.s_plus * h_xx - params.s_minus * f_xx;
    (p_minus, p_plus)
}

/// Horizontal velocity at height `z` above the substrate.
pub fn velocity(f: f64, g: f64, f3: f64, h3: f64, params: &FluidParams, z: f64) -> Result<f64, ModelError> {
    let top = f + g;
    if !(z >= 0.0 && z <= top) {
        return Err(ModelError::HeightOutOfRange { z, top });
    }
    let ms = params.m * params.s_plus;
    let sm = params.s_minus;
    if z <= f {
        return Ok(ms * h3 * (f * z + g * z - 0.5 * z * z) + sm * f3 * (f * z - 0.5 * z * z));
    }
    let interface = ms * h3 * (0.5 * f * f + f * g) + 0.5 * sm * f3 * f * f;
    let newtonian = params.s_plus / params.mu0_plus * h3 * (f * z + g * z - 0.5 * z * z - 0.5 * f * f - f * g);
    // |s+|^p / ((p+1) mu0 tau_half^(p-1)) = C_p (p+2)/(p+1).
    let coeff = c_p(params) * (params.p + 2.0) / (params.p + 1.0);
    let thinning = if coeff == 0.0 {
        0.0
    } else {
        coeff * phi(h3, params.p) * ((top - z).abs().powf(params.p + 1.0) - g.abs().powf(params.p + 1.0))
    };
    Ok(interface + newtonian - thinning)
}

/// Samples the velocity profile at each height in `z_samples`.
pub fn velocity_profiles(
    f: f64,
    g: f64,
    f3: f64,
    h3: f64,
    params: &FluidParams,
    z_samples: &[f64],
) -> Result<Vec<f64>, ModelError> {
    z_samples.iter().map(|&z| velocity(f, g, f3, h3, params, z)).collect()
}
