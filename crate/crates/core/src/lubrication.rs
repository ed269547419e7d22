//! Cross-sectionally averaged fluxes for general monotone stress laws.
//!
//! Each film's shear rate is a function `psi` of the local shear stress. The
//! stresses are linear in depth, so the fluxes reduce to one-dimensional
//! integrals that are evaluated by adaptive Gauss–Legendre quadrature. With
//! a Newtonian lower film and an Ellis upper film the results coincide with
//! the closed forms of [`crate::model`], which makes this module an
//! independent check on them.

use std::fmt;
use std::sync::Arc;

use crate::quadrature::{integrate, QuadratureError, DEFAULT_MAX_DEPTH};
use crate::rheology::{ellis_psi, invert_stress_law, FluidParams, RheologyError};

pub type ShearRateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Stress-to-shear-rate maps of the lower (`psi_minus`) and upper
/// (`psi_plus`) fluids. Both must be odd and nondecreasing.
#[derive(Clone)]
pub struct ClosurePair {
    pub psi_minus: ShearRateFn,
    pub psi_plus: ShearRateFn,
}

impl fmt::Debug for ClosurePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosurePair").finish_non_exhaustive()
    }
}

impl ClosurePair {
    pub fn new<L, U>(psi_minus: L, psi_plus: U) -> Self
    where
        L: Fn(f64) -> f64 + Send + Sync + 'static,
        U: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            psi_minus: Arc::new(psi_minus),
            psi_plus: Arc::new(psi_plus),
        }
    }

    /// Both films Newtonian with unit rescaled viscosity.
    pub fn newtonian() -> Self {
        Self::new(|s| s, |s| s)
    }

    /// Newtonian lower film, Ellis upper film with the given parameters.
    pub fn newtonian_ellis(params: &FluidParams) -> Self {
        let (mu0, tau_half, p) = (params.mu0_plus, params.tau_half, params.p);
        Self::new(|s| s, move |s| ellis_psi(s, mu0, tau_half, p))
    }

    /// Builds the closure by numerically inverting viscosity laws given as
    /// functions of the shear-rate magnitude.
    pub fn from_viscosity_laws<L, U>(mu_minus: L, mu_plus: U, tol: f64) -> Self
    where
        L: Fn(f64) -> f64 + Send + Sync + 'static,
        U: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mu_minus = Arc::new(mu_minus);
        let mu_plus = Arc::new(mu_plus);
        Self::new(
            move |s| invert_stress_law(|r| mu_minus(r), s, tol).unwrap_or(f64::NAN),
            move |s| invert_stress_law(|r| mu_plus(r), s, tol).unwrap_or(f64::NAN),
        )
    }

    /// Samples both maps on `[-extent, extent]` and checks oddness and
    /// monotonicity.
    pub fn check(&self, extent: f64, samples: usize) -> Result<(), RheologyError> {
        for psi in [&self.psi_minus, &self.psi_plus] {
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=samples {
                let s = -extent + 2.0 * extent * k as f64 / samples as f64;
                let v = psi(s);
                if !(v >= prev) {
                    return Err(RheologyError::NonMonotoneLaw { shear_rate: s });
                }
                let mirrored = psi(-s);
                if (v + mirrored).abs() > 1e-12 * (1.0 + v.abs()) {
                    return Err(RheologyError::InvalidParams(format!(
                        "shear-rate map is not odd at stress {s}"
                    )));
                }
                prev = v;
            }
        }
        Ok(())
    }
}

/// Lower-film flux
/// `(1/tau) f^2 ∫_0^1 y psi_-(tau m s+ h3 (g + y f) + tau s- f3 y f) dy`.
pub fn flux_lower_general(
    f: f64,
    g: f64,
    f3: f64,
    h3: f64,
    params: &FluidParams,
    closure: &ClosurePair,
    qtol: f64,
) -> Result<f64, QuadratureError> {
    if f == 0.0 {
        return Ok(0.0);
    }
    let tau = params.tau;
    let ms = params.m * params.s_plus;
    let sm = params.s_minus;
    let psi = &closure.psi_minus;
    let integral = integrate(
        |y| y * psi(tau * (ms * h3 * (g + y * f) + sm * f3 * y * f)),
        0.0,
        1.0,
        qtol,
        DEFAULT_MAX_DEPTH,
    )?;
    Ok(f * f * integral / tau)
}

/// Velocity of the lower film at the interface `z = f`.
pub fn interface_velocity_general(
    f: f64,
    g: f64,
    f3: f64,
    h3: f64,
    params: &FluidParams,
    closure: &ClosurePair,
    qtol: f64,
) -> Result<f64, QuadratureError> {
    if f == 0.0 {
        return Ok(0.0);
    }
    let tau = params.tau;
    let ms = params.m * params.s_plus;
    let sm = params.s_minus;
    let psi = &closure.psi_minus;
    // r = f - z is the distance below the interface.
    let integral = integrate(
        |r| psi(tau * (ms * h3 * (g + r) + sm * f3 * r)),
        0.0,
        f,
        qtol,
        DEFAULT_MAX_DEPTH,
    )?;
    Ok(integral / tau)
}

/// Upper-film flux `g u(f) + (1/tau) ∫_0^g r psi_+(tau s+ h3 r) dr`.
///
/// The first term carries the interface velocity of the lower film into the
/// upper film; `r` is the depth below the free surface.
pub fn flux_upper_general(
    f: f64,
    g: f64,
    f3: f64,
    h3: f64,
    params: &FluidParams,
    closure: &ClosurePair,
    qtol: f64,
) -> Result<f64, QuadratureError> {
    if g == 0.0 {
        return Ok(0.0);
    }
    let tau = params.tau;
    let sp = params.s_plus;
    let psi = &closure.psi_plus;
    let slip = interface_velocity_general(f, g, f3, h3, params, closure, qtol)?;
    let shear = integrate(|r| r * psi(tau * sp * h3 * r), 0.0, g, qtol, DEFAULT_MAX_DEPTH)?;
    Ok(g * slip + shear / tau)
}
