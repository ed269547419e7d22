use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ellis_film::diagnostics::{fit_decay_rate, MIN_FIT_SAMPLES};
use ellis_film::{advance, StabilityReport, StepStatus};
use rayon::prelude::*;
use thiserror::Error;

use crate::output::{num, profile_name, write_profile, write_stability, DiagnosticsWriter};
use crate::scenario::{Mode, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUPTURE: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_STEP_FAILURE: i32 = 4;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Step(#[from] ellis_film::stepper::StepError),
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn exit_code(status: StepStatus) -> i32 {
    match status {
        StepStatus::Ok => EXIT_OK,
        StepStatus::Rupture => EXIT_RUPTURE,
        StepStatus::Blowup => EXIT_BLOWUP,
        StepStatus::StepFailure => EXIT_STEP_FAILURE,
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: StepStatus,
    pub t_final: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub final_energy: f64,
    pub max_mass_drift: f64,
    /// Exponential rate fitted to the perturbation norm over the second half
    /// of the run, when enough positive samples exist.
    pub decay_rate: Option<f64>,
    pub report: StabilityReport,
}

/// Linear stability about the flat state with the scenario's initial masses.
pub fn flat_state_report(scenario: &Scenario) -> StabilityReport {
    let grid = scenario.grid();
    let state = scenario.initial_state(&grid);
    let f_star = grid.integrate(&state.f) / grid.length;
    let g_star = grid.integrate(&state.g) / grid.length;
    StabilityReport::new(f_star, g_star, &scenario.params, scenario.length, scenario.stability_modes)
}

pub fn stability(scenario: &Scenario, dir: &Path) -> Result<StabilityReport, RunError> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let report = flat_state_report(scenario);
    let path = dir.join("stability.csv");
    write_stability(&path, &report).map_err(io_at(&path))?;
    Ok(report)
}

/// Runs the time integration, writing `diagnostics.csv`, profiles and
/// `stability.csv` into `dir`. Files are flushed before returning, whatever
/// the final status.
pub fn simulate(scenario: &Scenario, dir: &Path) -> Result<RunSummary, RunError> {
    let report = stability(scenario, dir)?;
    let grid = scenario.grid();
    let initial = scenario.initial_state(&grid);
    let diag_path = dir.join("diagnostics.csv");
    let mut diagnostics = DiagnosticsWriter::create(&diag_path).map_err(io_at(&diag_path))?;

    let mut failure: Option<RunError> = None;
    let mut rows = 0usize;
    let mut profiles = 0usize;
    let mut last_profiled = f64::NAN;
    let mut series = Vec::new();
    let mut first_masses = None;
    let mut max_drift = 0.0_f64;
    let result = advance(
        initial,
        scenario.t_end,
        &scenario.stepping,
        &scenario.params,
        &grid,
        scenario.every,
        |state, record, dt| {
            if failure.is_some() {
                return;
            }
            let (m_f, m_g) = *first_masses.get_or_insert((record.mass_f, record.mass_g));
            max_drift = max_drift
                .max((record.mass_f - m_f).abs() / m_f)
                .max((record.mass_g - m_g).abs() / m_g);
            series.push((record.t, record.perturbation_norm));
            if let Err(e) = diagnostics.write(record, dt) {
                failure = Some(io_at(&diag_path)(e));
                return;
            }
            if rows == 0 || (scenario.profile_every > 0 && rows % scenario.profile_every == 0) {
                let path = dir.join(profile_name(profiles));
                match write_profile(&path, state, &scenario.params, &grid) {
                    Ok(()) => {
                        profiles += 1;
                        last_profiled = state.t;
                    }
                    Err(e) => failure = Some(io_at(&path)(e)),
                }
            }
            rows += 1;
        },
    );
    diagnostics.finish().map_err(io_at(&diag_path))?;
    if let Some(e) = failure {
        return Err(e);
    }
    let traj = result?;
    let final_state = &traj.outcome.state;
    if final_state.t != last_profiled {
        let path = dir.join(profile_name(profiles));
        write_profile(&path, final_state, &scenario.params, &grid).map_err(io_at(&path))?;
    }

    let late: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= 0.5 * scenario.t_end)
        .collect();
    let decay_rate = if late.len() >= MIN_FIT_SAMPLES && late.iter().all(|&(_, v)| v > 0.0) {
        fit_decay_rate(&late).ok().map(|fit| -fit.rate)
    } else {
        None
    };
    Ok(RunSummary {
        status: traj.outcome.status,
        t_final: final_state.t,
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
        final_energy: traj.records.last().map(|r| r.energy).unwrap_or(f64::NAN),
        max_mass_drift: max_drift,
        decay_rate,
        report,
    })
}

pub const SWEEP_HEADER_TAIL: &str =
    "exit_code,t_final,accepted_steps,rejected_steps,lambda_minus,lambda_plus,kappa_pred,decay_rate,final_energy,max_mass_drift";

/// Runs every sweep value in its own `run_NNN` directory (in parallel) and
/// writes `sweep.csv` in value order. Returns the largest exit code.
pub fn sweep(scenario: &Scenario, dir: &Path) -> Result<i32, RunError> {
    let plan = scenario.sweep.as_ref().expect("validated sweep scenario");
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let results: Vec<Result<RunSummary, RunError>> = plan
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let single = Scenario {
                mode: Mode::Simulate,
                sweep: None,
                ..scenario.with_sweep_value(plan.target, v)
            };
            simulate(&single, &dir.join(format!("run_{i:03}")))
        })
        .collect();

    let path = dir.join("sweep.csv");
    let mut out = BufWriter::new(fs::File::create(&path).map_err(io_at(&path))?);
    let mut worst = EXIT_OK;
    let mut text = format!("index,{},{SWEEP_HEADER_TAIL}\n", plan.target.name());
    for (i, (value, result)) in plan.values.iter().zip(results).enumerate() {
        match result {
            Ok(s) => {
                let code = exit_code(s.status);
                worst = worst.max(code);
                let rate = s.decay_rate.map(num).unwrap_or_default();
                text.push_str(&format!(
                    "{i},{},{code},{},{},{},{},{},{},{rate},{},{}\n",
                    num(*value),
                    num(s.t_final),
                    s.accepted_steps,
                    s.rejected_steps,
                    num(s.report.lambda_minus),
                    num(s.report.lambda_plus),
                    num(s.report.kappa_pred),
                    num(s.final_energy),
                    num(s.max_mass_drift),
                ));
            }
            Err(e) => {
                eprintln!("sweep run {i}: {e}");
                worst = worst.max(EXIT_CONFIG);
                text.push_str(&format!("{i},{},{EXIT_CONFIG},,,,,,,,,\n", num(*value)));
            }
        }
    }
    out.write_all(text.as_bytes()).map_err(io_at(&path))?;
    out.flush().map_err(io_at(&path))?;
    Ok(worst)
}

/// Runs a validated scenario and returns the process exit code.
pub fn run(scenario: &Scenario) -> i32 {
    let dir = &scenario.output_dir;
    let outcome = match scenario.mode {
        Mode::Stability => stability(scenario, dir).map(|_| EXIT_OK),
        Mode::Simulate => simulate(scenario, dir).map(|s| {
            if s.status != StepStatus::Ok {
                eprintln!("run stopped at t = {} with status {:?}", s.t_final, s.status);
            }
            exit_code(s.status)
        }),
        Mode::Sweep => sweep(scenario, dir),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}
