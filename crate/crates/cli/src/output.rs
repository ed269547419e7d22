//! CSV artifacts. Floats are written with 17 significant digits so every
//! value round-trips exactly.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use ellis_film::grid::{d2, Grid, State};
use ellis_film::model::pressures;
use ellis_film::{DiagnosticsRecord, FluidParams, StabilityReport};

pub const DIAGNOSTICS_HEADER: &str = "t,mass_f,mass_g,energy,dissipation,min_f,min_g,perturbation_norm,dt";
pub const PROFILE_HEADER: &str = "x,f,g,p_minus,p_plus";
pub const STABILITY_HEADER: &str =
    "mode,rate_minus,rate_plus,lambda_minus,lambda_plus,det,kappa_pred,epsilon_ellipticity,a11,a12,a21,a22,f_star,g_star";

/// Formats a float with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|&v| num(v)).collect();
    cells.join(",")
}

pub struct DiagnosticsWriter {
    out: BufWriter<File>,
}

impl DiagnosticsWriter {
    pub fn create(path: &Path) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{DIAGNOSTICS_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, r: &DiagnosticsRecord, dt: f64) -> io::Result<()> {
        let line = row(&[
            r.t,
            r.mass_f,
            r.mass_g,
            r.energy,
            r.dissipation,
            r.min_f,
            r.min_g,
            r.perturbation_norm,
            dt,
        ]);
        writeln!(self.out, "{line}")
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

pub fn write_profile(path: &Path, state: &State, params: &FluidParams, grid: &Grid) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{PROFILE_HEADER}")?;
    let fxx = d2(&state.f, grid);
    let gxx = d2(&state.g, grid);
    let hxx = d2(&state.surface(), grid);
    for i in 0..grid.n {
        let (p_minus, p_plus) = pressures(fxx[i], gxx[i], hxx[i], params);
        writeln!(out, "{}", row(&[grid.x(i), state.f[i], state.g[i], p_minus, p_plus]))?;
    }
    out.flush()
}

pub fn profile_name(index: usize) -> String {
    format!("profiles_{index:06}.csv")
}

pub fn write_stability(path: &Path, report: &StabilityReport) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{STABILITY_HEADER}")?;
    let a = report.a_star;
    for m in &report.mode_rates {
        let values = row(&[
            m.rate_minus,
            m.rate_plus,
            report.lambda_minus,
            report.lambda_plus,
            report.det,
            report.kappa_pred,
            report.epsilon_ellipticity,
            a.a11,
            a.a12,
            a.a21,
            a.a22,
            report.f_star,
            report.g_star,
        ]);
        writeln!(out, "{},{values}", m.mode)?;
    }
    out.flush()
}

/// Reads a numeric CSV with a header row; returns the header and rows.
/// Empty cells become NaN.
pub fn read_csv(path: &Path) -> io::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "empty csv"))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        let cells = line
            .split(',')
            .map(|c| {
                if c.is_empty() {
                    Ok(f64::NAN)
                } else {
                    c.parse::<f64>()
                        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{c}: {e}")))
                }
            })
            .collect::<io::Result<Vec<f64>>>()?;
        rows.push(cells);
    }
    Ok((header, rows))
}
