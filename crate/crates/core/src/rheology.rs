//! Constitutive laws for the two films.
//!
//! The lower film is Newtonian with unit (rescaled) viscosity. The upper film
//! follows the Ellis law, where the inverse viscosity grows with the shear
//! stress:
//!
//! ```text
//! 1/mu = (1/mu0) * (1 + |sigma / tau_half|^(p - 1))
//! ```
//!
//! Since the stress appears explicitly, the stress-to-shear-rate map is
//! available in closed form (see [`ellis_psi`]). General monotone laws given as
//! a viscosity of the shear rate are inverted numerically by
//! [`invert_stress_law`].

use thiserror::Error;

/// Default relative tolerance used when inverting stress laws.
pub const DEFAULT_INVERSION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RheologyError {
    #[error("invalid fluid parameter: {0}")]
    InvalidParams(String),
    #[error("stress law is not monotone near shear rate {shear_rate}")]
    NonMonotoneLaw { shear_rate: f64 },
    #[error("stress law inversion did not converge for stress {stress}")]
    InversionFailed { stress: f64 },
}

/// Rescaled physical and rheological constants of the two-film system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidParams {
    /// Viscosity ratio `mu0_plus / mu0_minus`.
    pub m: f64,
    /// Surface tension of the upper fluid.
    pub s_plus: f64,
    /// Surface tension of the lower fluid.
    pub s_minus: f64,
    /// Zero-shear viscosity of the upper fluid.
    pub mu0_plus: f64,
    /// Shear stress at which the upper viscosity halves. `f64::INFINITY`
    /// selects a Newtonian upper film for `p > 1`.
    pub tau_half: f64,
    /// Flow-behaviour exponent, `p >= 1`.
    pub p: f64,
    /// Time-scale ratio used by the general closure engine.
    pub tau: f64,
}

impl Default for FluidParams {
    fn default() -> Self {
        Self {
            m: 1.0,
            s_plus: 1.0,
            s_minus: 1.0,
            mu0_plus: 1.0,
            tau_half: 1.0,
            p: 2.0,
            tau: 1.0,
        }
    }
}

impl FluidParams {
    /// Checks every field invariant and returns the first violation.
    pub fn validate(&self) -> Result<(), RheologyError> {
        let positive = [
            ("m", self.m),
            ("s_plus", self.s_plus),
            ("s_minus", self.s_minus),
            ("mu0_plus", self.mu0_plus),
            ("tau", self.tau),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(RheologyError::InvalidParams(format!(
                    "{name} must be positive and finite (got {value})"
                )));
            }
        }
        if !(self.tau_half > 0.0) {
            return Err(RheologyError::InvalidParams(format!(
                "tau_half must be positive or inf (got {})",
                self.tau_half
            )));
        }
        if !(self.p.is_finite() && self.p >= 1.0) {
            return Err(RheologyError::InvalidParams(format!(
                "p must be ≥ 1 (got {})",
                self.p
            )));
        }
        Ok(())
    }

    /// The Ellis flux constant `C_p`.
    pub fn c_p(&self) -> f64 {
        c_p(self)
    }
}

/// Odd power map `|d|^(p-1) d`.
#[inline]
pub fn phi(d: f64, p: f64) -> f64 {
    if d == 0.0 {
        return 0.0;
    }
    d.abs().powf(p - 1.0) * d
}

/// Pointwise derivative of [`phi`]: `p |d|^(p-1)`, with `phi_prime(0) = 0`
/// for `p > 1` and `1` for `p = 1`.
#[inline]
pub fn phi_prime(d: f64, p: f64) -> f64 {
    if p == 1.0 {
        return 1.0;
    }
    if d == 0.0 {
        return 0.0;
    }
    p * d.abs().powf(p - 1.0)
}

/// `C_p = s_plus^p / ((p + 2) mu0_plus tau_half^(p - 1))`.
pub fn c_p(params: &FluidParams) -> f64 {
    let p = params.p;
    let numerator = params.s_plus.abs().powf(p);
    if p == 1.0 {
        // tau_half^0 = 1, including the Newtonian sentinel.
        return numerator / (3.0 * params.mu0_plus);
    }
    if params.tau_half.is_infinite() {
        return 0.0;
    }
    numerator / ((p + 2.0) * params.mu0_plus * params.tau_half.abs().powf(p - 1.0))
}

/// Ellis stress-to-shear-rate map `(sigma / mu0) (1 + |sigma / tau_half|^(p-1))`.
///
/// At `p = 1` the bracket equals 2 for every `tau_half`, including infinity.
pub fn ellis_psi(sigma: f64, mu0: f64, tau_half: f64, p: f64) -> f64 {
    let ratio = (sigma / tau_half).abs();
    let thinning = if p == 1.0 { 1.0 } else { ratio.powf(p - 1.0) };
    sigma / mu0 * (1.0 + thinning)
}

/// Inverts `s -> mu(|s|) s = sigma` for a strictly increasing law.
///
/// `mu` is the viscosity as a function of the magnitude of the shear rate.
/// The root is bracketed by doubling, refined by bisection and polished with
/// secant/Newton steps that stay inside the bracket. The result satisfies
/// `|mu(|s|) s - sigma| <= tol (1 + |sigma|)`.
pub fn invert_stress_law<F>(mu: F, sigma: f64, tol: f64) -> Result<f64, RheologyError>
where
    F: Fn(f64) -> f64,
{
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let target = sigma.abs();
    let law = |s: f64| mu(s) * s;
    let threshold = tol * (1.0 + target);

    let mut lo = 0.0_f64;
    let mut law_lo = 0.0_f64;
    let mut hi = target.max(1.0);
    let mut law_hi = law(hi);
    let mut expansions = 0;
    while law_hi < target {
        if !(law_hi >= law_lo) {
            return Err(RheologyError::NonMonotoneLaw { shear_rate: hi });
        }
        lo = hi;
        law_lo = law_hi;
        hi *= 2.0;
        law_hi = law(hi);
        expansions += 1;
        if expansions > 2000 || !hi.is_finite() {
            return Err(RheologyError::InversionFailed { stress: sigma });
        }
    }
    if !(law_hi >= law_lo) {
        return Err(RheologyError::NonMonotoneLaw { shear_rate: hi });
    }

    let mut s = 0.5 * (lo + hi);
    for _ in 0..400 {
        let r = law(s) - target;
        if r.abs() <= threshold {
            return Ok(s.copysign(sigma));
        }
        if r > 0.0 {
            hi = s;
            law_hi = law(s);
        } else {
            lo = s;
            law_lo = law(s);
        }
        if law_hi < law_lo {
            return Err(RheologyError::NonMonotoneLaw { shear_rate: s });
        }
        // Secant step on the bracket; fall back to bisection if it leaves it.
        let slope = (law_hi - law_lo) / (hi - lo);
        let candidate = s - r / slope;
        s = if slope > 0.0 && candidate > lo && candidate < hi {
            candidate
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            let r = law(s) - target;
            if r.abs() <= threshold {
                return Ok(s.copysign(sigma));
            }
            break;
        }
    }
    Err(RheologyError::InversionFailed { stress: sigma })
}
