//! Acceptance criteria 1-11. Each criterion prints one PASS/FAIL line; the
//! process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ellis_film::diagnostics::{dissipation_density, fit_decay_rate, relative_energy};
use ellis_film::lubrication::{flux_lower_general, flux_upper_general, ClosurePair};
use ellis_film::model::{coefficient_matrix, det_and_eigenvalues, determinant_closed_form, flux_pair, flux_upper, mobilities};
use ellis_film::rheology::{c_p, phi};
use ellis_film::stability::{ellipticity_constant, StabilityReport};
use ellis_film::{advance, FluidParams, Grid, Scheme, State, StepConfig, StepStatus};

type Outcome = Result<String, String>;

fn random_params(rng: &mut ChaCha8Rng) -> FluidParams {
    FluidParams {
        m: rng.gen_range(0.2..5.0),
        s_plus: rng.gen_range(0.2..5.0),
        s_minus: rng.gen_range(0.2..5.0),
        mu0_plus: rng.gen_range(0.2..5.0),
        tau_half: rng.gen_range(0.2..5.0),
        p: rng.gen_range(1.0..4.0),
        tau: 1.0,
    }
}

fn smooth_state(grid: &Grid) -> State {
    State::from_fn(
        grid,
        |x| 1.0 + 0.2 * (PI * x).cos() + 0.05 * (3.0 * PI * x).cos(),
        |x| 0.8 + 0.1 * (2.0 * PI * x).cos(),
    )
}

fn mass_conservation() -> Outcome {
    let params = FluidParams::default();
    let grid = Grid::new(1.0, 256).map_err(|e| e.to_string())?;
    let initial = smooth_state(&grid);
    let dt = 1e-5;
    let config = StepConfig::fixed(dt, Scheme::ImplicitNewton);
    let traj = advance(initial, 1050.0 * dt, &config, &params, &grid, 1, |_, _, _| {}).map_err(|e| e.to_string())?;
    if traj.outcome.status != StepStatus::Ok {
        return Err(format!("run ended with {:?}", traj.outcome.status));
    }
    let first = traj.records[0];
    let drift = traj.records.iter().fold((0.0_f64, 0.0_f64), |(a, b), r| {
        (
            a.max((r.mass_f - first.mass_f).abs() / first.mass_f),
            b.max((r.mass_g - first.mass_g).abs() / first.mass_g),
        )
    });
    let detail = format!("{} steps, drift f {:.2e}, g {:.2e}", traj.accepted_steps, drift.0, drift.1);
    if traj.accepted_steps >= 1000 && drift.0 <= 1e-12 && drift.1 <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn steady_states() -> Outcome {
    let params = FluidParams::default();
    let grid = Grid::new(1.0, 64).map_err(|e| e.to_string())?;
    let flat = State::flat(&grid, 1.0, 1.0);
    let mut report = Vec::new();
    for scheme in [Scheme::ImplicitNewton, Scheme::SemiImplicit] {
        let config = StepConfig::fixed(1e-3, scheme);
        let mut identical = true;
        let traj = advance(flat.clone(), 0.1, &config, &params, &grid, 1, |s, _, _| {
            identical &= s.f.iter().chain(&s.g).all(|v| v.to_bits() == 1.0_f64.to_bits());
        })
        .map_err(|e| e.to_string())?;
        if !identical || traj.accepted_steps < 100 {
            return Err(format!("{scheme:?}: identical {identical}, {} steps", traj.accepted_steps));
        }
        report.push(format!("{scheme:?} {} steps", traj.accepted_steps));
    }
    Ok(report.join(", "))
}

fn exponential_decay() -> Outcome {
    let params = FluidParams::default();
    let grid = Grid::new(1.0, 512).map_err(|e| e.to_string())?;
    let initial = State::from_fn(&grid, |x| 1.0 + 1e-4 * (PI * x).cos(), |_| 1.0);
    let config = StepConfig {
        dt0: 1e-5,
        dt_max: 1e-3,
        ..StepConfig::default()
    };
    let mut series = Vec::new();
    let traj = advance(initial, 0.5, &config, &params, &grid, 1, |s, r, _| {
        if s.t >= 0.05 {
            series.push((r.t, r.perturbation_norm));
        }
    })
    .map_err(|e| e.to_string())?;
    if traj.outcome.status != StepStatus::Ok {
        return Err(format!("run ended with {:?}", traj.outcome.status));
    }
    let fit = fit_decay_rate(&series).map_err(|e| e.to_string())?;
    let kappa = StabilityReport::new(1.0, 1.0, &params, 1.0, 1).kappa_pred;
    let measured = -fit.rate;
    let rel = (measured - kappa).abs() / kappa;
    let detail = format!("measured {measured:.5}, predicted {kappa:.5}, rel err {rel:.2e}, r2 {:.6}", fit.r_squared);
    if rel <= 0.05 && fit.r_squared >= 0.999 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Left side of the sum-of-squares identity: the mobility-weighted bilinear
/// form in `A = f_xxx`, `A + B = h_xxx`.
fn bilinear_form(f: f64, g: f64, a: f64, b: f64, params: &FluidParams) -> f64 {
    let mob = mobilities(f, g, params);
    let r = params.s_minus / (params.m * params.s_plus);
    let h3 = a + b;
    mob.p22 * h3 * h3 + (mob.p21 + r * mob.p12) * a * h3 + r * mob.p11 * a * a
}

fn sum_of_squares_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    let mut worst = 0.0_f64;
    // With tau_half infinite the shear-thinning term vanishes and the
    // density is exactly the sum of squares.
    let params = FluidParams {
        tau_half: f64::INFINITY,
        ..FluidParams::default()
    };
    for _ in 0..100_000 {
        let f = rng.gen_range(0.0..5.0);
        let g = rng.gen_range(0.0..5.0);
        let a = rng.gen_range(-10.0..10.0);
        let b = rng.gen_range(-10.0..10.0);
        let lhs = bilinear_form(f, g, a, b, &params);
        let rhs = dissipation_density(f, g, a, a + b, &params);
        let rel = (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    let detail = format!("worst relative gap {worst:.2e}");
    if worst <= 1e-11 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ellipticity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA3);
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    let params = FluidParams::default();
    for _ in 0..100_000 {
        let f = rng.gen_range(0.0..5.0);
        let g = rng.gen_range(0.0..5.0);
        let a = rng.gen_range(-10.0..10.0);
        let b = rng.gen_range(-10.0..10.0);
        let eps = ellipticity_constant(f, g, &params);
        let ms = params.m * params.s_plus;
        let h3 = a + b;
        let mixed = params.s_minus * a + ms * h3;
        let rhs = f.powi(3) * mixed * mixed / (12.0 * ms) + params.s_plus / (3.0 * params.mu0_plus) * g.powi(3) * h3 * h3;
        let lhs = eps * (a * a + h3 * h3);
        if lhs > rhs {
            violations += 1;
        }
        if lhs > 0.0 {
            tightest = tightest.min(rhs / lhs);
        }
    }
    let detail = format!("{violations} violations, smallest rhs/lhs {tightest:.4}");
    if violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinant_and_eigenvalues() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x53);
    let mut worst = 0.0_f64;
    for i in 0..10_000 {
        let params = random_params(&mut rng);
        let f = rng.gen_range(0.05..5.0);
        let g = rng.gen_range(0.05..5.0);
        let h3 = rng.gen_range(-10.0..10.0);
        let a = coefficient_matrix(f, g, 0.0, h3, &params);
        let closed = determinant_closed_form(f, g, h3, &params);
        let direct = a.a11 * a.a22 - a.a12 * a.a21;
        worst = worst.max((closed - direct).abs() / closed.abs());
        let spectrum = det_and_eigenvalues(&a);
        if !(a.discriminant() >= 0.0 && spectrum.lambda_minus > 0.0 && spectrum.lambda_plus >= spectrum.lambda_minus) {
            return Err(format!(
                "sample {i}: discriminant {}, eigenvalues {} {}",
                a.discriminant(),
                spectrum.lambda_minus,
                spectrum.lambda_plus
            ));
        }
    }
    let detail = format!("worst det gap {worst:.2e}, all eigenvalues real and positive");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn quadrature_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x23);
    let mut worst_lower = 0.0_f64;
    let mut worst_upper = 0.0_f64;
    for i in 0..1000 {
        let params = FluidParams {
            p: [1.5, 2.0, 3.0][i % 3],
            ..FluidParams::default()
        };
        let closure = ClosurePair::newtonian_ellis(&params);
        let f = rng.gen_range(0.1..5.0);
        let g = rng.gen_range(0.1..5.0);
        let f3 = rng.gen_range(-10.0..10.0);
        let h3 = rng.gen_range(-10.0..10.0);
        let lower = flux_lower_general(f, g, f3, h3, &params, &closure, 1e-12).map_err(|e| e.to_string())?;
        let upper = flux_upper_general(f, g, f3, h3, &params, &closure, 1e-12).map_err(|e| e.to_string())?;
        let mob = mobilities(f, g, &params);
        let (j_f, _) = flux_pair(f, g, f3, h3, &params);
        let j_g = flux_upper(f, g, f3, h3, &params);
        // Scale by the magnitudes of the individual terms, since the flux
        // itself can cancel to zero.
        let lower_scale = (mob.p11 * f3).abs() + (mob.p12 * h3).abs();
        let ms = params.m * params.s_plus;
        let upper_scale = ((0.5 * ms * f * f * g + ms * f * g * g + params.s_plus / (3.0 * params.mu0_plus) * g.powi(3)) * h3)
            .abs()
            + (0.5 * params.s_minus * f * f * g * f3).abs()
            + (c_p(&params) * g.powf(params.p + 2.0) * phi(h3, params.p)).abs();
        worst_lower = worst_lower.max((lower - j_f).abs() / lower_scale);
        worst_upper = worst_upper.max((upper - j_g).abs() / upper_scale);
    }
    let detail = format!("worst relative gap lower {worst_lower:.2e}, upper {worst_upper:.2e}");
    if worst_lower <= 1e-8 && worst_upper <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn single_phase_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x19);
    for i in 0..1000 {
        let params = random_params(&mut rng);
        let g = rng.gen_range(0.0..5.0);
        let f3 = rng.gen_range(-10.0..10.0);
        let h3 = rng.gen_range(-10.0..10.0);
        let expected = params.s_plus / (3.0 * params.mu0_plus) * g * g * g * h3
            + c_p(&params) * g.powf(params.p + 2.0) * phi(h3, params.p);
        let direct = flux_upper(0.0, g, f3, h3, &params);
        let (j_f, j_h) = flux_pair(0.0, g, f3, h3, &params);
        if direct != expected || j_f != 0.0 || j_h != expected {
            return Err(format!("sample {i}: expected {expected}, flux_upper {direct}, J_f {j_f}, J_h {j_h}"));
        }
    }
    Ok("1000 samples exact".into())
}

/// Cubic Lagrange interpolation of nodal values onto `x`.
fn interpolate(grid: &Grid, v: &[f64], x: f64) -> f64 {
    let s = x / grid.dx;
    let base = (s.floor() as isize - 1).clamp(0, grid.n as isize - 4) as usize;
    let mut sum = 0.0;
    for j in 0..4 {
        let mut w = 1.0;
        for k in 0..4 {
            if k != j {
                w *= (s - (base + k) as f64) / (j as f64 - k as f64);
            }
        }
        sum += w * v[base + j];
    }
    sum
}

fn solve_at(n: usize, t_end: f64, dt: f64) -> Result<(Grid, State), String> {
    let params = FluidParams::default();
    let grid = Grid::new(1.0, n).map_err(|e| e.to_string())?;
    let config = StepConfig::fixed(dt, Scheme::ImplicitNewton);
    let traj = advance(smooth_state(&grid), t_end, &config, &params, &grid, usize::MAX, |_, _, _| {})
        .map_err(|e| e.to_string())?;
    if traj.outcome.status != StepStatus::Ok {
        return Err(format!("n = {n} ended with {:?}", traj.outcome.status));
    }
    Ok((grid, traj.outcome.state))
}

fn spatial_convergence() -> Outcome {
    let (t_end, dt) = (1e-3, 1e-5);
    let (ref_grid, reference) = solve_at(1024, t_end, dt)?;
    let mut errors = Vec::new();
    for n in [64, 128, 256] {
        let (grid, state) = solve_at(n, t_end, dt)?;
        let mut sq = 0.0;
        for i in 0..n {
            let x = grid.x(i);
            let df = state.f[i] - interpolate(&ref_grid, &reference.f, x);
            let dg = state.g[i] - interpolate(&ref_grid, &reference.g, x);
            sq += grid.weight(i) * (df * df + dg * dg);
        }
        errors.push(sq.sqrt());
    }
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    let detail = format!(
        "errors {:.3e} {:.3e} {:.3e}, ratios {:.3} {:.3}",
        errors[0], errors[1], errors[2], ratios[0], ratios[1]
    );
    if ratios.iter().all(|r| (3.5..=4.5).contains(r)) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn energy_identity() -> Outcome {
    let params = FluidParams::default();
    let grid = Grid::new(1.0, 512).map_err(|e| e.to_string())?;
    let initial = State::from_fn(
        &grid,
        |x| 1.0 + 0.05 * (PI * x).cos(),
        |x| 1.0 + 0.05 * (2.0 * PI * x).cos(),
    );
    let dt = grid.dx * grid.dx / 4.0;
    let config = StepConfig::fixed(dt, Scheme::ImplicitNewton);
    let mut dissipated = 0.0;
    let mut energies = Vec::new();
    let traj = advance(initial, 0.01, &config, &params, &grid, 1, |_, r, used| {
        dissipated += used * r.dissipation;
        energies.push(r.energy);
    })
    .map_err(|e| e.to_string())?;
    if traj.outcome.status != StepStatus::Ok {
        return Err(format!("run ended with {:?}", traj.outcome.status));
    }
    let e0 = energies[0];
    let e_end = *energies.last().unwrap();
    let balance = (e_end + dissipated - e0).abs() / e0;
    let increase_bound = 1e-8 * (1.0 + e0);
    let detail = format!(
        "{} steps, balance gap {:.3}% of E(0), largest step increase {:.2e}",
        traj.accepted_steps,
        100.0 * balance,
        traj.max_energy_increase
    );
    if balance <= 0.02 && traj.max_energy_increase <= increase_bound {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn continuous_dependence() -> Outcome {
    let params = FluidParams::default();
    let grid = Grid::new(1.0, 128).map_err(|e| e.to_string())?;
    let config = StepConfig::fixed(1e-5, Scheme::ImplicitNewton);
    let t_end = 2e-3;
    let run = |state: State| -> Result<Vec<State>, String> {
        let mut states = Vec::new();
        advance(state, t_end, &config, &params, &grid, 1, |s, _, _| states.push(s.clone())).map_err(|e| e.to_string())?;
        Ok(states)
    };
    let base = smooth_state(&grid);
    let mut nudged = base.clone();
    for (i, v) in nudged.f.iter_mut().enumerate() {
        *v += 1e-8 * (PI * grid.x(i)).cos();
    }
    let first = run(base.clone())?;
    let second = run(base)?;
    let third = run(nudged)?;
    let mut identical_max = 0.0_f64;
    let mut nudged_max = 0.0_f64;
    for ((a, b), c) in first.iter().zip(&second).zip(&third) {
        identical_max = identical_max.max(relative_energy(a, b, &params, &grid).map_err(|e| e.to_string())?);
        nudged_max = nudged_max.max(relative_energy(a, c, &params, &grid).map_err(|e| e.to_string())?);
    }
    let detail = format!("{} outputs, identical runs {identical_max:e}, nudged runs {nudged_max:.2e}", first.len());
    if first.len() == second.len() && first.len() == third.len() && identical_max == 0.0 && nudged_max < 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("mass conservation", mass_conservation),
        ("flat steady states", steady_states),
        ("exponential decay rate", exponential_decay),
        ("sum-of-squares identity", sum_of_squares_identity),
        ("ellipticity inequality", ellipticity),
        ("determinant and eigenvalues", determinant_and_eigenvalues),
        ("quadrature oracle", quadrature_oracle),
        ("energy identity", energy_identity),
        ("single-film reduction", single_phase_reduction),
        ("spatial convergence", spatial_convergence),
        ("continuous dependence", continuous_dependence),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
