//! Executes a configuration: scan or single point, optional fits, minima
//! search and lock-in demodulation, then CSV/SVG output.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical or output
//! failure. Diagnostics go to stderr; the one-line summary to stdout.

use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use crate::config::{load_config, ConfigError, DemodPhase, FitSpec, RunConfig, SchemeConfig};
use crate::detection::{calibrate_phase, lockin_measure_with};
use crate::error::Result;
use crate::output::{to_csv, to_svg, Series, Table};
use crate::scattering::{analytic_response, transmission};
use crate::spectra::{
    eit_metrics, evaluate_point, fit_lorentzian, local_minima, scan, Column, EitMetrics, Engine, LorentzianFit,
    ScanParameter, SpectrumRow, SpectrumTable,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

/// Relative prominence a fluorescence dip needs to count as a minimum.
pub const MINIMA_PROMINENCE: f64 = 1e-3;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub engine: Option<Engine>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub quiet: bool,
}

/// Everything a run computes, before any file is written.
#[derive(Clone, Debug)]
pub struct Report {
    pub spectrum: Option<SpectrumTable>,
    pub single: Option<SpectrumRow>,
    pub fit: Option<LorentzianFit>,
    pub eit: Option<EitMetrics>,
    /// Axis values (table units) of fluorescence minima.
    pub minima: Option<Vec<f64>>,
    pub demod_phase: Option<f64>,
    /// Demodulated signal per row.
    pub lockin: Option<Vec<f64>>,
    pub table: Table,
    pub summary: String,
}

impl Report {
    pub fn csv(&self, digits: usize) -> String {
        to_csv(&self.table, digits)
    }
}

impl RunConfig {
    /// The configuration with the scan engine replaced and re-validated.
    pub fn with_engine(&self, engine: Engine) -> std::result::Result<RunConfig, ConfigError> {
        let mut c = self.clone();
        if let Some(scan) = c.scan.as_mut() {
            scan.engine = engine;
        }
        crate::config::parse_config(&c.to_ini())
    }
}

fn sig3(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let d = v.abs().log10().floor() as i32;
    let decimals = (2 - d).max(0) as usize;
    format!("{v:.decimals$}")
}

fn fmt_axis(parameter: ScanParameter, v: f64) -> String {
    if !parameter.is_frequency() {
        return format!("{} G", sig3(v * 1e4));
    }
    let a = v.abs();
    if a >= 1e6 {
        format!("{} MHz", sig3(v / 1e6))
    } else if a >= 1e3 {
        format!("{} kHz", sig3(v / 1e3))
    } else if a >= 1.0 {
        format!("{} Hz", sig3(v))
    } else {
        format!("{v:.2e} Hz")
    }
}

fn row_values(row: &SpectrumRow) -> Vec<f64> {
    let mut v = vec![
        row.transmission,
        row.extinction,
        row.phase_shift,
        row.fluorescence_rel,
        row.fluorescence_rate,
        row.excited_population,
    ];
    v.extend(&row.populations);
    v
}

fn base_headers(labels: &[String]) -> Vec<String> {
    let mut h: Vec<String> = [
        "transmission",
        "extinction",
        "phase_rad",
        "fluorescence_rel",
        "fluorescence_per_s",
        "excited_population",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(labels.iter().map(|l| format!("pop_{l}")));
    h
}

/// Extinction of the probe alone (control switched off) in the weak-probe
/// closed form, used as the EIT suppression reference.
fn reference_extinction(config: &RunConfig) -> Result<Option<f64>> {
    if matches!(config.scheme, SchemeConfig::Barium8 { .. }) {
        return Ok(None);
    }
    let scheme = config.build_scheme()?.control_off()?;
    let geometry = config.build_geometry()?;
    let point = transmission(geometry.effective_epsilon(), analytic_response(&scheme)?)?;
    Ok(Some(point.extinction))
}

/// Runs the computation described by `config` without touching the file
/// system.
pub fn execute(config: &RunConfig) -> Result<Report> {
    let scheme = config.build_scheme()?;
    let geometry = config.build_geometry()?;
    let mut summary = Vec::new();

    let (spectrum, single, schemes) = match config.build_axis() {
        Some(axis) => {
            let axis = axis?;
            let engine = config.scan.as_ref().map_or(Engine::Numeric, |s| s.engine);
            info!("scanning {} over {} points ({engine})", axis.parameter, axis.points);
            let mut table = scan(&scheme, &axis, &geometry, engine)?;
            table.metadata = vec![("config".into(), config.to_ini())];
            let schemes = if config.detection.is_some() {
                axis.values()
                    .iter()
                    .map(|&v| axis.parameter.apply(&scheme, v))
                    .collect::<Result<Vec<_>>>()?
            } else {
                Vec::new()
            };
            (Some(table), None, schemes)
        }
        None => {
            let row = evaluate_point(&scheme, &geometry, Engine::Numeric, 0.0)?;
            summary.push(format!(
                "transmission={} extinction={}%",
                sig3(row.transmission),
                sig3(100.0 * row.extinction)
            ));
            (None, Some(row), vec![scheme.clone()])
        }
    };

    let mut fit = None;
    let mut eit = None;
    let mut minima = None;
    if let (Some(table), Some(scan_cfg)) = (&spectrum, &config.scan) {
        let column = match scan_cfg.fit {
            FitSpec::Extinction => Some(Column::Extinction),
            FitSpec::Transmission => Some(Column::Transmission),
            FitSpec::Fluorescence => Some(Column::Fluorescence),
            FitSpec::None | FitSpec::Eit => None,
        };
        if let Some(column) = column {
            let f = fit_lorentzian(table, column)?;
            summary.push(format!(
                "fwhm={} depth={}% center={}",
                fmt_axis(table.parameter, f.fwhm),
                sig3(100.0 * f.depth),
                fmt_axis(table.parameter, f.center)
            ));
            fit = Some(f);
        }
        if scan_cfg.fit == FitSpec::Eit {
            let f = fit_lorentzian(table, Column::Transmission)?;
            let reference = match reference_extinction(config)? {
                Some(r) => r,
                None => 1.0 - f.baseline,
            };
            let m = eit_metrics(table, reference)?;
            summary.push(format!(
                "window_fwhm={} suppression={}%",
                fmt_axis(table.parameter, m.window_fwhm),
                sig3(100.0 * m.suppression)
            ));
            fit = Some(m.fit);
            eit = Some(m);
        }
        if scan_cfg.count_minima {
            let y = table.column(Column::Fluorescence);
            let idx = local_minima(&y, MINIMA_PROMINENCE);
            let at: Vec<f64> = idx.iter().map(|&i| table.rows[i].axis).collect();
            let listed: Vec<String> = at.iter().map(|&v| fmt_axis(table.parameter, v)).collect();
            summary.push(format!("minima={} [{}]", at.len(), listed.join(", ")));
            minima = Some(at);
        }
    }

    let mut demod_phase = None;
    let mut lockin = None;
    if let Some(det) = &config.detection {
        let phase = match det.demod_phase {
            DemodPhase::Fixed(p) => p,
            DemodPhase::Calibrate => calibrate_phase(&scheme, &det.chopper(0.0))?,
        };
        let chopper = det.chopper(phase);
        let detector = det.detector();
        let values = schemes
            .par_iter()
            .map(|on| {
                let off = on.control_off()?;
                Ok(lockin_measure_with(on, &off, &chopper, &geometry, &detector)?.dc_signal)
            })
            .collect::<Vec<Result<f64>>>()
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if values.len() == 1 {
            summary.push(format!("demod_phase={phase:.3} rad lockin_dc={lo:.4e}"));
        } else {
            summary.push(format!("demod_phase={phase:.3} rad lockin_dc=[{lo:.4e}, {hi:.4e}]"));
        }
        demod_phase = Some(phase);
        lockin = Some(values);
    }

    let table = match (&spectrum, &single) {
        (Some(t), _) => {
            let mut headers = vec![t.parameter.column()];
            headers.extend(base_headers(&t.level_labels));
            let mut rows: Vec<Vec<f64>> = t
                .rows
                .iter()
                .map(|r| {
                    let mut v = vec![r.axis];
                    v.extend(row_values(r));
                    v
                })
                .collect();
            if let Some(l) = &lockin {
                headers.push("lockin_dc".into());
                for (row, v) in rows.iter_mut().zip(l) {
                    row.push(*v);
                }
            }
            summary.push(format!("rows={} engine={}", t.rows.len(), t.engine));
            Table { headers, rows }
        }
        (None, Some(r)) => {
            let labels: Vec<String> = scheme.levels.iter().map(|l| l.label.clone()).collect();
            let mut headers = base_headers(&labels);
            let mut row = row_values(r);
            if let Some(l) = &lockin {
                headers.push("lockin_dc".into());
                row.push(l[0]);
            }
            summary.push("rows=1 engine=numeric".into());
            Table {
                headers,
                rows: vec![row],
            }
        }
        (None, None) => unreachable!("either a scan or a single point is evaluated"),
    };

    Ok(Report {
        spectrum,
        single,
        fit,
        eit,
        minima,
        demod_phase,
        lockin,
        table,
        summary: summary.join(" "),
    })
}

/// SVG plot of a scan report, or `None` for single-point runs.
pub fn plot(report: &Report, config: &RunConfig) -> Option<String> {
    let table = report.spectrum.as_ref()?;
    let (x, x_label): (Vec<f64>, String) = if table.parameter.is_frequency() {
        (table.axis().iter().map(|v| v / 1e6).collect(), format!("{} (MHz)", table.parameter))
    } else {
        (table.axis().iter().map(|v| v * 1e4).collect(), format!("{} (G)", table.parameter))
    };
    let transmission = Series {
        label: "transmission".into(),
        y: table.column(Column::Transmission),
    };
    let fluorescence = Series {
        label: "fluorescence (rel.)".into(),
        y: table.column(Column::Fluorescence),
    };
    let fluorescence_first = config
        .scan
        .as_ref()
        .is_some_and(|s| s.count_minima || s.fit == FitSpec::Fluorescence);
    let series = if fluorescence_first {
        vec![fluorescence, transmission]
    } else {
        vec![transmission, fluorescence]
    };
    Some(to_svg(&report.summary, &x_label, &x, &series, &config.to_ini()))
}

fn default_csv_path(config_path: &Path) -> PathBuf {
    let stem = config_path.file_stem().map_or("eitsim".into(), |s| s.to_string_lossy().into_owned());
    PathBuf::from(format!("{stem}.csv"))
}

fn write(path: &Path, content: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, content)
}

/// Validates a configuration file without running it.
pub fn check(config_path: &Path, options: &RunOptions) -> i32 {
    match load_config(config_path).and_then(|c| match options.engine {
        Some(e) => c.with_engine(e),
        None => Ok(c),
    }) {
        Ok(_) => {
            if !options.quiet {
                println!("{}: ok", config_path.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {}: {e}", config_path.display());
            EXIT_CONFIG
        }
    }
}

/// Loads, runs and writes outputs; returns the process exit code.
pub fn run(config_path: &Path, options: &RunOptions) -> i32 {
    let config = match load_config(config_path).and_then(|c| match options.engine {
        Some(e) => c.with_engine(e),
        None => Ok(c),
    }) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", config_path.display());
            return EXIT_CONFIG;
        }
    };
    let report = match execute(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: numerical failure: {e}");
            return EXIT_NUMERIC;
        }
    };
    let csv_path = options
        .out
        .clone()
        .or_else(|| config.output.csv.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| default_csv_path(config_path));
    if let Err(e) = write(&csv_path, &report.csv(config.output.precision)) {
        eprintln!("error: cannot write {}: {e}", csv_path.display());
        return EXIT_NUMERIC;
    }
    let svg_path = options.svg.clone().or_else(|| config.output.svg.as_ref().map(PathBuf::from));
    if let Some(path) = svg_path {
        match plot(&report, &config) {
            Some(svg) => {
                if let Err(e) = write(&path, &svg) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return EXIT_NUMERIC;
                }
            }
            None => log::warn!("no scan configured; skipping SVG output"),
        }
    }
    if !options.quiet {
        println!("{}", report.summary);
    }
    EXIT_OK
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(sig3(11.0), "11.0");
        assert_eq!(sig3(1.35), "1.35");
        assert_eq!(sig3(82.46), "82.5");
        assert_eq!(sig3(1234.0), "1234");
        assert_eq!(fmt_axis(ScanParameter::ProbeDetuning, 11.0e6), "11.0 MHz");
        assert_eq!(fmt_axis(ScanParameter::ProbeDetuning, 82.46e3), "82.5 kHz");
        assert_eq!(fmt_axis(ScanParameter::Bfield, 5e-4), "5.00 G");
    }
}
