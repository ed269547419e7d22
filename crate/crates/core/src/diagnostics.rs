//! Scalar functionals evaluated along trajectories.

use thiserror::Error;

use crate::grid::{d1, d3, Grid, GridError, State};
use crate::model::{ellis_mobility, mobilities};
use crate::rheology::{c_p, phi, FluidParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("states live on different meshes ({0} vs {1} nodes)")]
    GridMismatch(usize, usize),
    #[error("decay fit needs at least {MIN_FIT_SAMPLES} samples (got {0})")]
    TooFewSamples(usize),
    #[error("decay fit needs positive norms (sample {index} has {value})")]
    NonPositiveNorm { index: usize, value: f64 },
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Per-step scalars of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_f: f64,
    pub mass_g: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub min_f: f64,
    pub min_g: f64,
    pub perturbation_norm: f64,
}

impl DiagnosticsRecord {
    pub fn of(state: &State, params: &FluidParams, grid: &Grid) -> Self {
        Self {
            t: state.t,
            mass_f: grid.integrate(&state.f),
            mass_g: grid.integrate(&state.g),
            energy: energy(state, params, grid),
            dissipation: dissipation(state, params, grid),
            min_f: state.min_f(),
            min_g: state.min_g(),
            perturbation_norm: perturbation_norm(state, grid),
        }
    }
}

fn energy_ratio(params: &FluidParams) -> f64 {
    params.s_minus / (params.m * params.s_plus)
}

/// `E = 1/2 ∫ |(f+g)_x|^2 + s-/(m s+) |f_x|^2 dx`.
pub fn energy(state: &State, params: &FluidParams, grid: &Grid) -> f64 {
    let fx = d1(&state.f, grid);
    let hx = d1(&state.surface(), grid);
    let r = energy_ratio(params);
    let density: Vec<f64> = fx.iter().zip(&hx).map(|(a, b)| 0.5 * (b * b + r * a * a)).collect();
    grid.integrate(&density)
}

/// Pointwise dissipation density in sum-of-squares form; nonnegative
/// termwise for `f, g >= 0`.
pub fn dissipation_density(f: f64, g: f64, f3: f64, h3: f64, params: &FluidParams) -> f64 {
    let ms = params.m * params.s_plus;
    let root = ms.sqrt();
    let mixed = params.s_minus * f3 + ms * h3;
    let ellis = ellis_mobility(g, params) * h3.abs().powf(params.p + 1.0);
    let viscous = params.s_plus / (3.0 * params.mu0_plus) * g * g * g * h3 * h3;
    let square = f / (2.0 * root) * mixed + root * g * h3;
    let coupled = f * square * square;
    let lower = f * f * f * mixed * mixed / (12.0 * ms);
    ellis + viscous + coupled + lower
}

/// The same density written as the flux-weighted bilinear form.
pub fn dissipation_density_bilinear(f: f64, g: f64, f3: f64, h3: f64, params: &FluidParams) -> f64 {
    let mob = mobilities(f, g, params);
    let r = energy_ratio(params);
    let j_h = mob.p21 * f3 + mob.p22 * h3 + c_p(params) * g.abs().powf(params.p + 2.0) * phi(h3, params.p);
    let j_f = mob.p11 * f3 + mob.p12 * h3;
    j_h * h3 + r * j_f * f3
}

fn dissipation_with<D>(state: &State, grid: &Grid, density: D) -> f64
where
    D: Fn(f64, f64, f64, f64) -> f64,
{
    let f3 = d3(&state.f, grid);
    let h3 = d3(&state.surface(), grid);
    let values: Vec<f64> = (0..grid.n)
        .map(|i| density(state.f[i].max(0.0), state.g[i].max(0.0), f3[i], h3[i]))
        .collect();
    grid.integrate(&values)
}

/// Dissipation `D` by trapezoid quadrature of the sum-of-squares density.
pub fn dissipation(state: &State, params: &FluidParams, grid: &Grid) -> f64 {
    dissipation_with(state, grid, |f, g, f3, h3| dissipation_density(f, g, f3, h3, params))
}

/// Dissipation evaluated through the bilinear form; a cross-check for
/// [`dissipation`].
pub fn dissipation_bilinear(state: &State, params: &FluidParams, grid: &Grid) -> f64 {
    dissipation_with(state, grid, |f, g, f3, h3| dissipation_density_bilinear(f, g, f3, h3, params))
}

/// Energy of the difference of two states' derivative fields.
pub fn relative_energy(a: &State, b: &State, params: &FluidParams, grid: &Grid) -> Result<f64, DiagnosticsError> {
    if a.len() != b.len() {
        return Err(DiagnosticsError::GridMismatch(a.len(), b.len()));
    }
    grid.check_len(&a.f)?;
    let diff = State::new(
        a.t,
        a.f.iter().zip(&b.f).map(|(x, y)| x - y).collect(),
        a.g.iter().zip(&b.g).map(|(x, y)| x - y).collect(),
    );
    Ok(energy(&diff, params, grid))
}

/// L² distance of `(f, g)` to its spatial averages.
pub fn perturbation_norm(state: &State, grid: &Grid) -> f64 {
    let mean_f = grid.integrate(&state.f) / grid.length;
    let mean_g = grid.integrate(&state.g) / grid.length;
    let squares: Vec<f64> = state
        .f
        .iter()
        .zip(&state.g)
        .map(|(f, g)| (f - mean_f).powi(2) + (g - mean_g).powi(2))
        .collect();
    grid.integrate(&squares).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Slope of `ln(norm)` against `t`; negative for decay.
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `ln(norm) = intercept + rate * t`.
pub fn fit_decay_rate(series: &[(f64, f64)]) -> Result<DecayFit, DiagnosticsError> {
    if series.len() < MIN_FIT_SAMPLES {
        return Err(DiagnosticsError::TooFewSamples(series.len()));
    }
    if let Some((index, &(_, value))) = series.iter().enumerate().find(|(_, (_, v))| !(*v > 0.0)) {
        return Err(DiagnosticsError::NonPositiveNorm { index, value });
    }
    let n = series.len() as f64;
    let mean_t = series.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mean_y = series.iter().map(|(_, v)| v.ln()).sum::<f64>() / n;
    let mut stt = 0.0;
    let mut sty = 0.0;
    let mut syy = 0.0;
    for &(t, v) in series {
        let dt = t - mean_t;
        let dy = v.ln() - mean_y;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let rate = if stt > 0.0 { sty / stt } else { 0.0 };
    let intercept = mean_y - rate * mean_t;
    let residual: f64 = series
        .iter()
        .map(|&(t, v)| (v.ln() - intercept - rate * t).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - residual / syy } else { 1.0 };
    Ok(DecayFit {
        rate,
        intercept,
        r_squared,
    })
}
