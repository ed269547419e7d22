//! Time integration of the two-film system.
//!
//! Two schemes are available:
//!
//! * [`Scheme::ImplicitNewton`] (default): backward Euler on the conservative
//!   face-flux discretization, solved by Newton's method with an analytic
//!   banded Jacobian. Trapezoid masses are conserved to round-off.
//! * [`Scheme::SemiImplicit`]: the quasilinear form `u_t + A(u) u_xxxx = -F(u)`
//!   with `A` and `F` frozen at the old time level, one banded solve per step.
//!
//! Unknowns are interleaved as `[f_0, g_0, f_1, g_1, ...]`, which gives a
//! banded system with five sub- and super-diagonals.

use thiserror::Error;

use crate::banded::{BandedError, BandedMatrix};
use crate::diagnostics::{energy, DiagnosticsRecord};
use crate::grid::{d1, d3, d4, Grid, GridError, State};
use crate::model::{coefficient_matrix, ellis_mobility, lower_order_terms, mobilities, mobility_gradient};
use crate::rheology::{c_p, phi, phi_prime, FluidParams};

const BAND: usize = 5;
const DT_GROWTH: f64 = 1.2;
const DT_SHRINK: f64 = 0.5;
const SUCCESS_STREAK: usize = 5;
const DEFAULT_RUPTURE_FRACTION: f64 = 1e-8;
const DEFAULT_BLOWUP_FACTOR: f64 = 1e8;
/// Below this |h_xxx| (relative to the largest face value) the Jacobian of
/// `Phi` uses a centered secant when `1 < p < 2`.
const PHI_SECANT_WIDTH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("invalid step configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("initial state contains non-finite values")]
    NonFiniteState,
    #[error("t_end = {t_end} is not after the current time {t}")]
    BadEndTime { t: f64, t_end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    SemiImplicit,
    #[default]
    ImplicitNewton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub scheme: Scheme,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Minimal admissible height; `None` means `1e-8` times the smaller
    /// initial minimum of `f` and `g`.
    pub rupture_floor: Option<f64>,
    /// Cap on [`h4_norm`]; `None` means `1e8` times its initial value.
    pub blowup_norm_cap: Option<f64>,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt0: 1e-6,
            dt_min: 1e-14,
            dt_max: 1e-2,
            scheme: Scheme::ImplicitNewton,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            rupture_floor: None,
            blowup_norm_cap: None,
        }
    }
}

impl StepConfig {
    /// Fixed step size `dt` for every step.
    pub fn fixed(dt: f64, scheme: Scheme) -> Self {
        Self {
            dt0: dt,
            dt_min: dt,
            dt_max: dt,
            scheme,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), StepError> {
        let bad = |msg: String| Err(StepError::InvalidConfig(msg));
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt0 && self.dt0 <= self.dt_max && self.dt_max.is_finite()) {
            return bad(format!(
                "need 0 < dt_min <= dt0 <= dt_max (got {}, {}, {})",
                self.dt_min, self.dt0, self.dt_max
            ));
        }
        if !(self.newton_tol > 0.0) {
            return bad(format!("newton_tol must be positive (got {})", self.newton_tol));
        }
        if self.newton_max_iter == 0 {
            return bad("newton_max_iter must be at least 1".into());
        }
        if let Some(floor) = self.rupture_floor {
            if !(floor >= 0.0) {
                return bad(format!("rupture_floor must be nonnegative (got {floor})"));
            }
        }
        if let Some(cap) = self.blowup_norm_cap {
            if !(cap > 0.0) {
                return bad(format!("blowup_norm_cap must be positive (got {cap})"));
            }
        }
        Ok(())
    }

    /// Resolves the guard thresholds against the initial state.
    pub fn limits(&self, initial: &State, grid: &Grid) -> Limits {
        Limits {
            rupture_floor: self
                .rupture_floor
                .unwrap_or_else(|| DEFAULT_RUPTURE_FRACTION * initial.min_f().min(initial.min_g())),
            blowup_norm_cap: self
                .blowup_norm_cap
                .unwrap_or_else(|| DEFAULT_BLOWUP_FACTOR * h4_norm(initial, grid)),
        }
    }
}

/// Guard thresholds applied after every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub rupture_floor: f64,
    pub blowup_norm_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Ok,
    Rupture,
    Blowup,
    StepFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: State,
    pub status: StepStatus,
    pub dt_used: f64,
    /// Residual evaluations (Newton) or linear solves (semi-implicit).
    pub iterations: usize,
}

impl StepOutcome {
    fn failure(state: &State, dt: f64, iterations: usize) -> Self {
        Self {
            state: state.clone(),
            status: StepStatus::StepFailure,
            dt_used: dt,
            iterations,
        }
    }
}

/// Discrete H⁴-type norm `sqrt(∫ f² + g² + f_xxxx² + g_xxxx²)`.
pub fn h4_norm(state: &State, grid: &Grid) -> f64 {
    let f4 = d4(&state.f, grid);
    let g4 = d4(&state.g, grid);
    let density: Vec<f64> = (0..grid.n)
        .map(|i| state.f[i].powi(2) + state.g[i].powi(2) + f4[i].powi(2) + g4[i].powi(2))
        .collect();
    grid.integrate(&density).sqrt()
}

fn classify(candidate: State, dt: f64, iterations: usize, grid: &Grid, limits: &Limits) -> StepOutcome {
    let status = if !candidate.is_finite() {
        StepStatus::StepFailure
    } else if candidate.min_f() <= limits.rupture_floor || candidate.min_g() <= limits.rupture_floor {
        StepStatus::Rupture
    } else if h4_norm(&candidate, grid) > limits.blowup_norm_cap {
        StepStatus::Blowup
    } else {
        StepStatus::Ok
    };
    StepOutcome {
        state: candidate,
        status,
        dt_used: dt,
        iterations,
    }
}

#[inline]
fn fi(i: usize) -> usize {
    2 * i
}

#[inline]
fn gi(i: usize) -> usize {
    2 * i + 1
}

/// Node/coefficient pairs of the face third derivative at face `k`
/// (between nodes `k` and `k + 1`), after reflection at the ends.
fn face_stencil(grid: &Grid, k: usize) -> [(usize, f64); 6] {
    let s = 1.0 / grid.dx.powi(3);
    let r = |j: isize| grid.reflect(j);
    let k = k as isize;
    // (D2_{k+1} - D2_k) / dx with D2_j = (v_{j+1} - 2 v_j + v_{j-1}) / dx^2.
    [
        (r(k + 2), s),
        (r(k + 1), -2.0 * s),
        (r(k), s),
        (r(k + 1), -s),
        (r(k), 2.0 * s),
        (r(k - 1), -s),
    ]
}

fn face_value(stencil: &[(usize, f64); 6], v: &[f64]) -> f64 {
    // Differences first, so a constant field gives exactly zero.
    let at = |j: usize| v[stencil[j].0];
    let upper = (at(0) - at(1)) - (at(1) - at(2));
    let lower = (at(3) - at(4)) - (at(4) - at(5));
    (upper - lower) * stencil[0].1
}

/// Face fluxes of `f` and `g` together with their Jacobian contributions.
struct FaceData {
    j_f: Vec<f64>,
    j_g: Vec<f64>,
}

fn clamp_height(v: f64) -> f64 {
    v.max(0.0)
}

/// Derivative of `Phi` used in the Newton Jacobian.
fn phi_slope(h3: f64, p: f64, secant_width: f64) -> f64 {
    if p > 1.0 && p < 2.0 && h3.abs() < secant_width {
        (phi(h3 + secant_width, p) - phi(h3 - secant_width, p)) / (2.0 * secant_width)
    } else {
        phi_prime(h3, p)
    }
}

fn face_fluxes(state: &State, grid: &Grid, params: &FluidParams) -> FaceData {
    let n = grid.n;
    let h = state.surface();
    let mobs: Vec<_> = (0..n)
        .map(|i| mobilities(clamp_height(state.f[i]), clamp_height(state.g[i]), params))
        .collect();
    let ellis: Vec<f64> = state.g.iter().map(|&g| ellis_mobility(clamp_height(g), params)).collect();
    let mut j_f = Vec::with_capacity(n - 1);
    let mut j_g = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let st = face_stencil(grid, k);
        let f3 = face_value(&st, &state.f);
        let h3 = face_value(&st, &h);
        let (a, b) = (&mobs[k], &mobs[k + 1]);
        let p11 = 0.5 * (a.p11 + b.p11);
        let p12 = 0.5 * (a.p12 + b.p12);
        let p21 = 0.5 * (a.p21 + b.p21);
        let p22 = 0.5 * (a.p22 + b.p22);
        let q = 0.5 * (ellis[k] + ellis[k + 1]);
        let jf = p11 * f3 + p12 * h3;
        let jh = p21 * f3 + p22 * h3 + q * phi(h3, params.p);
        j_f.push(jf);
        j_g.push(jh - jf);
    }
    FaceData { j_f, j_g }
}

/// Right-hand side of `u_t = rate(u)` on the conservative discretization.
pub fn conservative_rates(state: &State, grid: &Grid, params: &FluidParams) -> (Vec<f64>, Vec<f64>) {
    let faces = face_fluxes(state, grid, params);
    (
        crate::grid::divergence_of_flux(&faces.j_f, grid),
        crate::grid::divergence_of_flux(&faces.j_g, grid),
    )
}

/// Coefficient of face `k` in the rate of node `i` (zero unless `i` is `k`
/// or `k + 1`).
fn divergence_weights(grid: &Grid, k: usize) -> [(usize, f64); 2] {
    let inv = 1.0 / grid.dx;
    let left = if k == 0 { 2.0 * inv } else { inv };
    let right = if k + 2 == grid.n { 2.0 * inv } else { inv };
    [(k, -left), (k + 1, right)]
}

/// Assembles `I - dt d(rate)/du` for the conservative scheme.
fn newton_jacobian(state: &State, dt: f64, grid: &Grid, params: &FluidParams) -> Result<BandedMatrix, BandedError> {
    let n = grid.n;
    let dim = 2 * n;
    let p = params.p;
    let cp = c_p(params);
    let h = state.surface();
    let clamped: Vec<(f64, f64)> = (0..n)
        .map(|i| (clamp_height(state.f[i]), clamp_height(state.g[i])))
        .collect();
    let mobs: Vec<_> = clamped.iter().map(|&(f, g)| mobilities(f, g, params)).collect();
    let grads: Vec<_> = (0..n)
        .map(|i| {
            let (f, g) = clamped[i];
            let mut grad = mobility_gradient(f, g, params);
            if state.f[i] < 0.0 {
                grad.p11[0] = 0.0;
                grad.p12[0] = 0.0;
                grad.p21[0] = 0.0;
                grad.p22[0] = 0.0;
            }
            if state.g[i] < 0.0 {
                grad.p11[1] = 0.0;
                grad.p12[1] = 0.0;
                grad.p21[1] = 0.0;
                grad.p22[1] = 0.0;
            }
            grad
        })
        .collect();
    let ellis: Vec<f64> = clamped.iter().map(|&(_, g)| ellis_mobility(g, params)).collect();
    let ellis_slope: Vec<f64> = clamped
        .iter()
        .map(|&(_, g)| if cp == 0.0 { 0.0 } else { cp * (p + 2.0) * g.powf(p + 1.0) })
        .collect();

    let h3_faces: Vec<f64> = (0..n - 1).map(|k| face_value(&face_stencil(grid, k), &h)).collect();
    let h3_scale = h3_faces.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let secant_width = PHI_SECANT_WIDTH * (1.0 + h3_scale);

    let mut jac = BandedMatrix::zeros(dim, BAND, BAND);
    for i in 0..dim {
        jac.add(i, i, 1.0)?;
    }
    for k in 0..n - 1 {
        let st = face_stencil(grid, k);
        let f3 = face_value(&st, &state.f);
        let h3 = h3_faces[k];
        let (a, b) = (&mobs[k], &mobs[k + 1]);
        let p11 = 0.5 * (a.p11 + b.p11);
        let p12 = 0.5 * (a.p12 + b.p12);
        let p21 = 0.5 * (a.p21 + b.p21);
        let p22 = 0.5 * (a.p22 + b.p22);
        let q = 0.5 * (ellis[k] + ellis[k + 1]);
        let phi_h = phi(h3, p);
        let dphi = if q == 0.0 { 0.0 } else { phi_slope(h3, p, secant_width) };

        // Derivatives of (J_f, J_h) by unknown index, accumulated sparsely.
        let mut entries: Vec<(usize, f64, f64)> = Vec::with_capacity(16);
        for &(node, c) in &st {
            entries.push((fi(node), (p11 + p12) * c, (p21 + p22 + q * dphi) * c));
            entries.push((gi(node), p12 * c, (p22 + q * dphi) * c));
        }
        for node in [k, k + 1] {
            let gr = &grads[node];
            entries.push((
                fi(node),
                0.5 * (gr.p11[0] * f3 + gr.p12[0] * h3),
                0.5 * (gr.p21[0] * f3 + gr.p22[0] * h3),
            ));
            let ellis_part = if state.g[node] < 0.0 { 0.0 } else { ellis_slope[node] * phi_h };
            entries.push((
                gi(node),
                0.5 * (gr.p11[1] * f3 + gr.p12[1] * h3),
                0.5 * (gr.p21[1] * f3 + gr.p22[1] * h3 + ellis_part),
            ));
        }

        for (node, weight) in divergence_weights(grid, k) {
            for &(col, djf, djh) in &entries {
                let djg = djh - djf;
                // rate = weight * J, jacobian entry = -dt * weight * dJ.
                jac.add(fi(node), col, -dt * weight * djf)?;
                jac.add(gi(node), col, -dt * weight * djg)?;
            }
        }
    }
    Ok(jac)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// One backward-Euler step of the conservative scheme, solved by Newton.
pub fn step_implicit_newton(
    state: &State,
    dt: f64,
    params: &FluidParams,
    grid: &Grid,
    config: &StepConfig,
    limits: &Limits,
) -> StepOutcome {
    let n = grid.n;
    let scale = 1.0 + max_abs(&state.f).max(max_abs(&state.g));
    let threshold = config.newton_tol * scale;
    let mut iterate = State::new(state.t + dt, state.f.clone(), state.g.clone());
    let mut previous_residual = f64::INFINITY;
    for iteration in 1..=config.newton_max_iter {
        let (rate_f, rate_g) = conservative_rates(&iterate, grid, params);
        let mut residual = Vec::with_capacity(2 * n);
        for i in 0..n {
            residual.push(iterate.f[i] - state.f[i] - dt * rate_f[i]);
            residual.push(iterate.g[i] - state.g[i] - dt * rate_g[i]);
        }
        let norm = max_abs(&residual);
        if !norm.is_finite() {
            return StepOutcome::failure(state, dt, iteration);
        }
        if norm <= threshold {
            return classify(iterate, dt, iteration, grid, limits);
        }
        if iteration > 3 && norm > 1e3 * previous_residual {
            return StepOutcome::failure(state, dt, iteration);
        }
        previous_residual = norm;
        let lu = match newton_jacobian(&iterate, dt, grid, params).and_then(BandedMatrix::factorize) {
            Ok(lu) => lu,
            Err(_) => return StepOutcome::failure(state, dt, iteration),
        };
        residual.iter_mut().for_each(|r| *r = -*r);
        lu.solve_in_place(&mut residual);
        for i in 0..n {
            iterate.f[i] += residual[fi(i)];
            iterate.g[i] += residual[gi(i)];
        }
        if !iterate.is_finite() {
            return StepOutcome::failure(state, dt, iteration);
        }
        // On fine grids the residual bottoms out at a round-off floor that
        // grows like dx^-4; a negligible update is then the stopping test.
        if max_abs(&residual) <= threshold {
            return classify(iterate, dt, iteration, grid, limits);
        }
    }
    StepOutcome::failure(state, dt, config.newton_max_iter)
}

/// One step of the frozen-coefficient scheme
/// `(I + dt A(u^n) D4) u^{n+1} = u^n - dt F(u^n)`, solved for the increment.
pub fn step_semi_implicit(
    state: &State,
    dt: f64,
    params: &FluidParams,
    grid: &Grid,
    limits: &Limits,
) -> StepOutcome {
    let n = grid.n;
    let h = state.surface();
    let fx = d1(&state.f, grid);
    let gx = d1(&state.g, grid);
    let f3 = d3(&state.f, grid);
    let h3 = d3(&h, grid);
    let f4 = d4(&state.f, grid);
    let g4 = d4(&state.g, grid);
    let inv4 = 1.0 / grid.dx.powi(4);
    let stencil = [1.0, -4.0, 6.0, -4.0, 1.0];

    let mut matrix = BandedMatrix::zeros(2 * n, BAND, BAND);
    let mut rhs = vec![0.0; 2 * n];
    for i in 0..n {
        let (f, g) = (clamp_height(state.f[i]), clamp_height(state.g[i]));
        let a = coefficient_matrix(f, g, f3[i], h3[i], params);
        let (low1, low2) = lower_order_terms(f, g, fx[i], gx[i], f3[i], h3[i], params);
        rhs[fi(i)] = -dt * (a.a11 * f4[i] + a.a12 * g4[i] + low1);
        rhs[gi(i)] = -dt * (a.a21 * f4[i] + a.a22 * g4[i] + low2);
        let assembled = (|| -> Result<(), BandedError> {
            matrix.add(fi(i), fi(i), 1.0)?;
            matrix.add(gi(i), gi(i), 1.0)?;
            for (offset, w) in stencil.iter().enumerate() {
                let node = grid.reflect(i as isize + offset as isize - 2);
                let c = dt * w * inv4;
                matrix.add(fi(i), fi(node), c * a.a11)?;
                matrix.add(fi(i), gi(node), c * a.a12)?;
                matrix.add(gi(i), fi(node), c * a.a21)?;
                matrix.add(gi(i), gi(node), c * a.a22)?;
            }
            Ok(())
        })();
        if assembled.is_err() {
            return StepOutcome::failure(state, dt, 0);
        }
    }
    let lu = match matrix.factorize() {
        Ok(lu) => lu,
        Err(_) => return StepOutcome::failure(state, dt, 1),
    };
    lu.solve_in_place(&mut rhs);
    let f_new = (0..n).map(|i| state.f[i] + rhs[fi(i)]).collect();
    let g_new = (0..n).map(|i| state.g[i] + rhs[gi(i)]).collect();
    classify(State::new(state.t + dt, f_new, g_new), dt, 1, grid, limits)
}

/// Dispatches one step according to `config.scheme`.
pub fn step(
    state: &State,
    dt: f64,
    params: &FluidParams,
    grid: &Grid,
    config: &StepConfig,
    limits: &Limits,
) -> StepOutcome {
    match config.scheme {
        Scheme::ImplicitNewton => step_implicit_newton(state, dt, params, grid, config, limits),
        Scheme::SemiImplicit => step_semi_implicit(state, dt, params, grid, limits),
    }
}

/// Result of [`advance`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Final outcome; for terminal statuses `state` is the offending state.
    pub outcome: StepOutcome,
    pub records: Vec<DiagnosticsRecord>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest single-step increase of the energy (negative if it always
    /// decreased).
    pub max_energy_increase: f64,
}

/// Steps from `state.t` to `t_end` with adaptive step control.
///
/// The step halves after a failed step and grows by 1.2 after five
/// consecutive successes, clamped to `[dt_min, dt_max]`. The final step is
/// shortened to land on `t_end`. `observer` sees the initial state, every
/// `record_every`-th accepted step, and the final state, together with the
/// step size that produced it.
pub fn advance<O>(
    state: State,
    t_end: f64,
    config: &StepConfig,
    params: &FluidParams,
    grid: &Grid,
    record_every: usize,
    mut observer: O,
) -> Result<Trajectory, StepError>
where
    O: FnMut(&State, &DiagnosticsRecord, f64),
{
    config.validate()?;
    params
        .validate()
        .map_err(|e| StepError::InvalidConfig(e.to_string()))?;
    grid.check_len(&state.f)?;
    grid.check_len(&state.g)?;
    if !state.is_finite() {
        return Err(StepError::NonFiniteState);
    }
    if !(t_end > state.t) {
        return Err(StepError::BadEndTime { t: state.t, t_end });
    }
    let record_every = record_every.max(1);
    let limits = config.limits(&state, grid);

    let mut records = Vec::new();
    let first = DiagnosticsRecord::of(&state, params, grid);
    observer(&state, &first, 0.0);
    records.push(first);

    let mut current = state;
    let mut current_energy = first.energy;
    let mut dt = config.dt0;
    let mut streak = 0usize;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut max_increase = f64::NEG_INFINITY;
    let time_eps = 1e-12 * t_end.abs().max(1.0);

    loop {
        let remaining = t_end - current.t;
        let last = remaining <= dt * (1.0 + 1e-12);
        let dt_try = if last { remaining } else { dt };
        let mut outcome = step(&current, dt_try, params, grid, config, &limits);
        match outcome.status {
            StepStatus::StepFailure => {
                rejected += 1;
                streak = 0;
                dt *= DT_SHRINK;
                if dt < config.dt_min {
                    let record = DiagnosticsRecord::of(&current, params, grid);
                    observer(&current, &record, dt_try);
                    records.push(record);
                    outcome.state = current;
                    return Ok(Trajectory {
                        outcome,
                        records,
                        accepted_steps: accepted,
                        rejected_steps: rejected,
                        max_energy_increase: max_increase,
                    });
                }
                continue;
            }
            StepStatus::Rupture | StepStatus::Blowup => {
                let record = DiagnosticsRecord::of(&outcome.state, params, grid);
                observer(&outcome.state, &record, dt_try);
                records.push(record);
                return Ok(Trajectory {
                    outcome,
                    records,
                    accepted_steps: accepted,
                    rejected_steps: rejected,
                    max_energy_increase: max_increase,
                });
            }
            StepStatus::Ok => {}
        }
        accepted += 1;
        if last || t_end - outcome.state.t <= time_eps {
            outcome.state.t = t_end;
        }
        let new_energy = energy(&outcome.state, params, grid);
        max_increase = max_increase.max(new_energy - current_energy);
        current_energy = new_energy;
        current = outcome.state.clone();
        let finished = current.t >= t_end;
        if finished || accepted % record_every == 0 {
            let record = DiagnosticsRecord::of(&current, params, grid);
            observer(&current, &record, dt_try);
            records.push(record);
        }
        if finished {
            return Ok(Trajectory {
                outcome,
                records,
                accepted_steps: accepted,
                rejected_steps: rejected,
                max_energy_increase: max_increase,
            });
        }
        if !last {
            streak += 1;
            if streak >= SUCCESS_STREAK {
                streak = 0;
                dt = (dt * DT_GROWTH).min(config.dt_max);
            }
        }
        dt = dt.clamp(config.dt_min, config.dt_max);
    }
}
