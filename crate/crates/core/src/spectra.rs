//! Parameter scans, Lorentzian fits and EIT window metrics.
//!
//! Scan axes are given in internal units (rad/s for detunings and Rabi
//! frequencies, tesla for the field). Tables store frequency axes in Hz.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::atom::LevelScheme;
use crate::dynamics::{build_liouvillian, steady_state};
use crate::error::{Error, Result};
use crate::scattering::{
    analytic_excited_population, analytic_response, fluorescence_rate, relative_fluorescence,
    response_from_steady_state, transmission, ComplexResponse, CouplingGeometry,
};

/// Gauss-Newton iteration limit of [`fit_lorentzian`].
pub const FIT_MAX_ITERATIONS: usize = 200;
/// Relative parameter step at which the fit is converged.
pub const FIT_STEP_TOL: f64 = 1e-10;
/// Minimum number of samples for a fit.
pub const FIT_MIN_POINTS: usize = 8;
/// Extrema beyond this many rms of the detrended data count as peaks.
pub const AMBIGUITY_SIGMAS: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScanParameter {
    ProbeDetuning,
    ControlDetuning,
    /// δ = Δ_probe − Δ_control, swept by moving the control laser so that
    /// the probe's one-photon detuning stays fixed.
    TwoPhotonDetuning,
    ControlRabi,
    Bfield,
}

impl ScanParameter {
    pub const ALL: [ScanParameter; 5] = [
        ScanParameter::ProbeDetuning,
        ScanParameter::ControlDetuning,
        ScanParameter::TwoPhotonDetuning,
        ScanParameter::ControlRabi,
        ScanParameter::Bfield,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScanParameter::ProbeDetuning => "probe_detuning",
            ScanParameter::ControlDetuning => "control_detuning",
            ScanParameter::TwoPhotonDetuning => "two_photon_detuning",
            ScanParameter::ControlRabi => "control_rabi",
            ScanParameter::Bfield => "bfield",
        }
    }

    /// True for angular-frequency axes, which tables report in Hz.
    pub fn is_frequency(self) -> bool {
        !matches!(self, ScanParameter::Bfield)
    }

    /// CSV header of the axis column.
    pub fn column(self) -> String {
        if self.is_frequency() {
            format!("{}_hz", self.name())
        } else {
            format!("{}_t", self.name())
        }
    }

    /// Internal value → table value.
    pub fn to_table_units(self, value: f64) -> f64 {
        if self.is_frequency() {
            value / (2.0 * PI)
        } else {
            value
        }
    }

    /// The scheme rebuilt with this parameter set to `value` (internal units).
    pub fn apply(self, scheme: &LevelScheme, value: f64) -> Result<LevelScheme> {
        let probe = || {
            scheme
                .probe_laser()
                .ok_or_else(|| Error::validation("scheme has no probe laser"))
        };
        let control = || {
            scheme
                .control_laser()
                .ok_or_else(|| Error::validation("scheme has no control laser"))
        };
        match self {
            ScanParameter::ProbeDetuning => scheme.with_laser(&probe()?.name, |l| l.detuning = value),
            ScanParameter::ControlDetuning => scheme.with_laser(&control()?.name, |l| l.detuning = value),
            ScanParameter::TwoPhotonDetuning => {
                let target = probe()?.detuning - value;
                scheme.with_laser(&control()?.name, |l| l.detuning = target)
            }
            ScanParameter::ControlRabi => scheme.with_laser(&control()?.name, |l| l.rabi = value),
            ScanParameter::Bfield => scheme.with_bfield(value),
        }
    }
}

impl fmt::Display for ScanParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScanParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown scan parameter {s}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanAxis {
    pub parameter: ScanParameter,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl ScanAxis {
    pub fn new(parameter: ScanParameter, start: f64, stop: f64, points: usize) -> Result<Self> {
        let axis = Self {
            parameter,
            start,
            stop,
            points,
        };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.start < self.stop) {
            return Err(Error::validation(format!(
                "scan range must satisfy start < stop, got [{}, {}]",
                self.start, self.stop
            )));
        }
        if self.points < 2 {
            return Err(Error::validation("a scan needs at least 2 points"));
        }
        Ok(())
    }

    /// Uniform grid in internal units.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points - 1;
        (0..self.points)
            .map(|k| {
                if k == n {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * k as f64 / n as f64
                }
            })
            .collect()
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.points - 1) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    /// Closed-form responses (two-level and Λ only).
    Analytic,
    /// Steady state of the full master equation.
    Numeric,
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Engine::Analytic),
            "numeric" => Ok(Engine::Numeric),
            _ => Err(Error::validation(format!("unknown engine {s} (analytic|numeric)"))),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Analytic => "analytic",
            Engine::Numeric => "numeric",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumRow {
    /// Axis value in table units (Hz or tesla).
    pub axis: f64,
    pub transmission: f64,
    pub extinction: f64,
    pub phase_shift: f64,
    /// Detected photons per second.
    pub fluorescence_rate: f64,
    /// Fluorescence in units of 2γ.
    pub fluorescence_rel: f64,
    /// Total excited-state population.
    pub excited_population: f64,
    /// All level populations (numeric engine) or the excited one (analytic).
    pub populations: Vec<f64>,
    pub nonlinear: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumTable {
    pub parameter: ScanParameter,
    pub engine: Engine,
    pub level_labels: Vec<String>,
    pub rows: Vec<SpectrumRow>,
    /// Free-form description of the inputs, carried into outputs.
    pub metadata: Vec<(String, String)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    Transmission,
    Extinction,
    Fluorescence,
}

impl SpectrumTable {
    pub fn axis(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.axis).collect()
    }

    pub fn column(&self, column: Column) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match column {
                Column::Transmission => r.transmission,
                Column::Extinction => r.extinction,
                Column::Fluorescence => r.fluorescence_rel,
            })
            .collect()
    }

    /// Row whose axis value is nearest to `x` (table units).
    pub fn nearest_row(&self, x: f64) -> Option<usize> {
        self.rows
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.axis - x).abs().total_cmp(&(b.1.axis - x).abs()))
            .map(|(i, _)| i)
    }
}

/// Observables of one configuration; `axis` is stored verbatim in the row.
pub fn evaluate_point(
    scheme: &LevelScheme,
    geometry: &CouplingGeometry,
    engine: Engine,
    axis: f64,
) -> Result<SpectrumRow> {
    let eps = geometry.effective_epsilon();
    let probe_on = scheme.probe_laser().is_some_and(|p| p.rabi > 0.0);
    match engine {
        Engine::Analytic => {
            let response = analytic_response(scheme)?;
            let point = transmission(eps, response)?;
            let pe = if probe_on {
                analytic_excited_population(scheme)?
            } else {
                0.0
            };
            let gamma = scheme.gamma();
            let rate = pe * 2.0 * gamma * scheme.collection;
            Ok(SpectrumRow {
                axis,
                transmission: point.transmission,
                extinction: point.extinction,
                phase_shift: point.phase_shift,
                fluorescence_rate: rate,
                fluorescence_rel: rate / (2.0 * gamma),
                excited_population: pe,
                populations: vec![pe],
                nonlinear: false,
            })
        }
        Engine::Numeric => {
            let rho = steady_state(&build_liouvillian(scheme)?)?;
            let response = if probe_on {
                response_from_steady_state(&rho, scheme)?
            } else {
                ComplexResponse::new(crate::linalg::ZERO)
            };
            let point = transmission(eps, response)?;
            Ok(SpectrumRow {
                axis,
                transmission: point.transmission,
                extinction: point.extinction,
                phase_shift: point.phase_shift,
                fluorescence_rate: fluorescence_rate(&rho, scheme),
                fluorescence_rel: relative_fluorescence(&rho, scheme),
                excited_population: scheme.excited_levels().map(|u| rho.population(u)).sum(),
                populations: rho.populations(),
                nonlinear: response.nonlinear,
            })
        }
    }
}

/// Evaluates the observables at every grid point. Points are computed in
/// parallel and returned in axis order.
pub fn scan(
    scheme: &LevelScheme,
    axis: &ScanAxis,
    geometry: &CouplingGeometry,
    engine: Engine,
) -> Result<SpectrumTable> {
    axis.validate()?;
    let values = axis.values();
    let rows: Vec<Result<SpectrumRow>> = values
        .par_iter()
        .map(|&v| {
            let table_value = axis.parameter.to_table_units(v);
            axis.parameter
                .apply(scheme, v)
                .and_then(|s| evaluate_point(&s, geometry, engine, table_value))
                .and_then(|row| {
                    let finite = [
                        row.transmission,
                        row.extinction,
                        row.phase_shift,
                        row.fluorescence_rate,
                    ]
                    .iter()
                    .all(|x| x.is_finite());
                    if finite {
                        Ok(row)
                    } else {
                        Err(Error::validation("non-finite observable"))
                    }
                })
                .map_err(|e| Error::Scan {
                    axis: axis.parameter.name().to_string(),
                    value: table_value,
                    source: Box::new(e),
                })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let level_labels = match engine {
        Engine::Numeric => scheme.levels.iter().map(|l| l.label.clone()).collect(),
        Engine::Analytic => vec!["excited".to_string()],
    };
    Ok(SpectrumTable {
        parameter: axis.parameter,
        engine,
        level_labels,
        rows,
        metadata: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LorentzianFit {
    pub center: f64,
    pub fwhm: f64,
    /// Signed peak deviation from the baseline.
    pub depth: f64,
    pub baseline: f64,
    pub rms_residual: f64,
    pub iterations: usize,
}

impl LorentzianFit {
    pub fn evaluate(&self, x: f64) -> f64 {
        lorentzian(x, self.center, self.fwhm, self.depth, self.baseline)
    }
}

/// baseline + depth · (w/2)² / ((x − x₀)² + (w/2)²)
pub fn lorentzian(x: f64, center: f64, fwhm: f64, depth: f64, baseline: f64) -> f64 {
    let h = fwhm / 2.0;
    baseline + depth * h * h / ((x - center).powi(2) + h * h)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Extrema of `y` standing out by more than `AMBIGUITY_SIGMAS` rms of the
/// data about its median.
fn significant_extrema(y: &[f64]) -> usize {
    let m = median(y);
    let r: Vec<f64> = y.iter().map(|v| v - m).collect();
    let rms = (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt();
    if rms == 0.0 {
        return 0;
    }
    (1..y.len() - 1)
        .filter(|&i| {
            let max = y[i] > y[i - 1] && y[i] >= y[i + 1];
            let min = y[i] < y[i - 1] && y[i] <= y[i + 1];
            (max || min) && r[i].abs() > AMBIGUITY_SIGMAS * rms
        })
        .count()
}

/// Solves the 4×4 symmetric system `a x = b` by Gaussian elimination with
/// partial pivoting.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for c in 0..4 {
        let p = (c..4).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..4 {
            let f = a[r][c] / a[c][c];
            let pivot = a[c];
            for (x, y) in a[r][c..].iter_mut().zip(&pivot[c..]) {
                *x -= f * y;
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let s: f64 = (r + 1..4).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Best (baseline, depth) for fixed center and width by linear least squares.
fn linear_amplitudes(x: &[f64], y: &[f64], center: f64, fwhm: f64) -> (f64, f64, f64) {
    let h = fwhm / 2.0;
    let f: Vec<f64> = x.iter().map(|&xi| h * h / ((xi - center).powi(2) + h * h)).collect();
    let n = x.len() as f64;
    let (sf, sff) = (f.iter().sum::<f64>(), f.iter().map(|v| v * v).sum::<f64>());
    let (sy, sfy) = (y.iter().sum::<f64>(), f.iter().zip(y).map(|(a, b)| a * b).sum::<f64>());
    let det = n * sff - sf * sf;
    if det.abs() < 1e-300 {
        return (sy / n, 0.0, f64::INFINITY);
    }
    let depth = (n * sfy - sf * sy) / det;
    let baseline = (sy - depth * sf) / n;
    let sse = f
        .iter()
        .zip(y)
        .map(|(fi, yi)| (baseline + depth * fi - yi).powi(2))
        .sum();
    (baseline, depth, sse)
}

/// Least-squares Lorentzian fit of raw samples.
///
/// The data are rescaled to unit range, initialized on a grid of widths
/// centered on the dominant extremum, then refined by damped Gauss-Newton.
pub fn fit_lorentzian_xy(x: &[f64], y: &[f64]) -> Result<LorentzianFit> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} abscissae for {} samples", x.len(), y.len())));
    }
    if x.len() < FIT_MIN_POINTS {
        return Err(Error::validation(format!(
            "a Lorentzian fit needs at least {FIT_MIN_POINTS} points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::validation("fit data must be finite"));
    }
    let extrema = significant_extrema(y);
    if extrema > 1 {
        return Err(Error::Ambiguous { extrema });
    }

    let (xmin, xmax) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let xspan = xmax - xmin;
    if xspan <= 0.0 {
        return Err(Error::validation("fit abscissae span zero width"));
    }
    let xmid = 0.5 * (xmin + xmax);
    let ymean = y.iter().sum::<f64>() / y.len() as f64;
    let yscale = y.iter().map(|v| (v - ymean).abs()).fold(0.0, f64::max);
    if yscale == 0.0 {
        return Err(Error::validation("fit data are constant"));
    }
    let u: Vec<f64> = x.iter().map(|v| (v - xmid) / xspan).collect();
    let v: Vec<f64> = y.iter().map(|w| (w - ymean) / yscale).collect();

    // Coarse initialization: center at the dominant extremum, width on a
    // logarithmic grid, amplitudes by linear least squares.
    let med = median(&v);
    let k = (0..v.len())
        .max_by(|&i, &j| (v[i] - med).abs().total_cmp(&(v[j] - med).abs()))
        .unwrap_or(0);
    let min_step = u.windows(2).map(|w| (w[1] - w[0]).abs()).fold(f64::INFINITY, f64::min);
    let (w_lo, w_hi) = (min_step.max(1e-6), 4.0);
    let mut p = [u[k], w_lo, 0.0, 0.0];
    let mut best = f64::INFINITY;
    const WIDTH_GRID: usize = 80;
    for j in 0..WIDTH_GRID {
        let w = w_lo * (w_hi / w_lo).powf(j as f64 / (WIDTH_GRID - 1) as f64);
        let (b, d, sse) = linear_amplitudes(&u, &v, u[k], w);
        if sse < best {
            best = sse;
            p = [u[k], w, d, b];
        }
    }

    let sse_of = |p: &[f64; 4]| -> f64 {
        u.iter()
            .zip(&v)
            .map(|(&ui, &vi)| (lorentzian(ui, p[0], p[1], p[2], p[3]) - vi).powi(2))
            .sum()
    };
    let mut sse = sse_of(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < FIT_MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        let h = p[1] / 2.0;
        for (&ui, &vi) in u.iter().zip(&v) {
            let dx = ui - p[0];
            let q = dx * dx + h * h;
            let f = h * h / q;
            let row = [
                p[2] * 2.0 * h * h * dx / (q * q),
                p[2] * h * dx * dx / (q * q),
                f,
                1.0,
            ];
            let r = vi - (p[3] + p[2] * f);
            for a in 0..4 {
                jtr[a] += row[a] * r;
                for b in 0..4 {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        let mut accepted = false;
        while lambda < 1e20 {
            let mut damped = jtj;
            for (a, row) in damped.iter_mut().enumerate() {
                row[a] += lambda * jtj[a][a].max(1e-300);
            }
            let Some(step) = solve4(damped, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
            let trial_sse = sse_of(&trial);
            if trial_sse.is_finite() && trial_sse <= sse {
                let size = step.iter().map(|s| s * s).sum::<f64>().sqrt();
                let scale = trial.iter().map(|s| s * s).sum::<f64>().sqrt().max(1.0);
                p = trial;
                sse = trial_sse;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if size <= FIT_STEP_TOL * scale {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // No downhill step exists at any damping: a stationary point.
            converged = true;
            break;
        }
    }

    let rms = (sse / u.len() as f64).sqrt() * yscale;
    if !converged || p[1].abs().is_nan() || p[1] == 0.0 {
        return Err(Error::Fit { iterations, rms });
    }
    Ok(LorentzianFit {
        center: xmid + p[0] * xspan,
        fwhm: p[1].abs() * xspan,
        depth: p[2] * yscale,
        baseline: ymean + p[3] * yscale,
        rms_residual: rms,
        iterations,
    })
}

/// Lorentzian fit of one column of a scan.
pub fn fit_lorentzian(table: &SpectrumTable, column: Column) -> Result<LorentzianFit> {
    fit_lorentzian_xy(&table.axis(), &table.column(column))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EitMetrics {
    /// FWHM of the transparency window, axis units.
    pub window_fwhm: f64,
    /// 1 − extinction(δ = 0) / extinction without control.
    pub suppression: f64,
    /// Full fit of the transmission recovery peak.
    pub fit: LorentzianFit,
}

/// Window width and extinction suppression of a two-photon-detuning scan.
pub fn eit_metrics(table: &SpectrumTable, extinction_without_control: f64) -> Result<EitMetrics> {
    if table.parameter != ScanParameter::TwoPhotonDetuning {
        return Err(Error::validation("EIT metrics need a two_photon_detuning scan"));
    }
    if extinction_without_control.is_nan() || extinction_without_control <= 0.0 {
        return Err(Error::validation(format!(
            "reference extinction must be > 0, got {extinction_without_control}"
        )));
    }
    let i0 = table
        .nearest_row(0.0)
        .ok_or_else(|| Error::validation("empty table"))?;
    let step = table
        .rows
        .windows(2)
        .map(|w| (w[1].axis - w[0].axis).abs())
        .fold(f64::INFINITY, f64::min);
    if table.rows[i0].axis.abs() > 0.5 * step {
        return Err(Error::validation("scan does not contain two-photon resonance"));
    }
    let fit = fit_lorentzian(table, Column::Transmission)?;
    Ok(EitMetrics {
        window_fwhm: fit.fwhm,
        suppression: 1.0 - table.rows[i0].extinction / extinction_without_control,
        fit,
    })
}

/// Indices of local minima whose prominence exceeds `min_prominence`
/// times the data range.
pub fn local_minima(y: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = y.len();
    if n < 3 {
        return Vec::new();
    }
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let threshold = min_prominence * (hi - lo);
    let mut out = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if y[i] < y[i - 1] {
            // Walk across a flat bottom.
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] > y[i] {
                let left = y[..i].iter().rev().take_while(|&&v| v >= y[i]).fold(y[i], |a, &v| a.max(v));
                let right = y[j + 1..].iter().take_while(|&&v| v >= y[i]).fold(y[i], |a, &v| a.max(v));
                if left.min(right) - y[i] > threshold {
                    out.push((i + j) / 2);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Control Rabi frequency (rad/s) for which the EIT window of a
/// two-photon-detuning scan has the requested FWHM (axis units), found by
/// bisection between `rabi_lo` and `rabi_hi`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_control_rabi(
    scheme: &LevelScheme,
    axis: &ScanAxis,
    geometry: &CouplingGeometry,
    engine: Engine,
    target_fwhm: f64,
    rabi_lo: f64,
    rabi_hi: f64,
    rel_tol: f64,
) -> Result<f64> {
    if axis.parameter != ScanParameter::TwoPhotonDetuning {
        return Err(Error::validation("calibration needs a two_photon_detuning axis"));
    }
    let control = scheme
        .control_laser()
        .ok_or_else(|| Error::validation("scheme has no control laser"))?
        .name
        .clone();
    let width = |rabi: f64| -> Result<f64> {
        let s = scheme.with_laser(&control, |l| l.rabi = rabi)?;
        Ok(fit_lorentzian(&scan(&s, axis, geometry, engine)?, Column::Transmission)?.fwhm)
    };
    let (mut lo, mut hi) = (rabi_lo, rabi_hi);
    let (w_lo, w_hi) = (width(lo)?, width(hi)?);
    if !(w_lo <= target_fwhm && target_fwhm <= w_hi) {
        return Err(Error::validation(format!(
            "target width {target_fwhm} outside the bracket [{w_lo}, {w_hi}]"
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if width(mid)? < target_fwhm {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= rel_tol * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
