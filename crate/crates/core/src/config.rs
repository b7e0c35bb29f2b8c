//! INI-style run configuration.
//!
//! Sections are `[scheme]`, `[geometry]`, one `[laser.<name>]` per laser,
//! and optionally `[scan]`, `[detection]` and `[output]`. Frequencies are
//! ordinary frequencies in MHz (Hz for the chopper), fields in gauss. Every
//! key is checked; unknown keys are errors. See `docs/config.md`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::atom::{
    build_barium8, build_lambda3, build_two_level, BariumRates, LaserField, LevelScheme, Polarization, Transition,
};
use crate::detection::{ChopperConfig, Detector, LockInMode, ShotNoise};
use crate::scattering::CouplingGeometry;
use crate::spectra::{Engine, ScanAxis, ScanParameter};

const MHZ: f64 = 2.0 * PI * 1e6;
const GAUSS: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { section: String, line: usize },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },

    #[error("missing required section(s): {}", .0.join(", "))]
    MissingSections(Vec<String>),

    #[error("missing required key `{0}`")]
    MissingKey(String),

    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn invalid(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SchemeConfig {
    TwoLevel {
        /// γ/2π, MHz.
        gamma_mhz: f64,
    },
    Lambda3 {
        gamma_g_mhz: f64,
        gamma_r_mhz: f64,
        gamma0_mhz: f64,
    },
    Barium8 {
        bfield_gauss: f64,
        total_decay_mhz: f64,
        branching_to_s: f64,
        g_s: f64,
        g_p: f64,
        g_d: f64,
        ground_dephasing_mhz: f64,
        motional_dephasing_mhz: f64,
        sublevel_mixing_mhz: f64,
    },
}

impl SchemeConfig {
    fn kind_name(&self) -> &'static str {
        match self {
            SchemeConfig::TwoLevel { .. } => "two_level",
            SchemeConfig::Lambda3 { .. } => "lambda3",
            SchemeConfig::Barium8 { .. } => "barium8",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PolarizationSpec {
    Pi,
    SigmaPlus,
    SigmaMinus,
    LinearPerpendicular,
}

impl PolarizationSpec {
    const NAMES: [(&'static str, PolarizationSpec); 4] = [
        ("pi", PolarizationSpec::Pi),
        ("sigma_plus", PolarizationSpec::SigmaPlus),
        ("sigma_minus", PolarizationSpec::SigmaMinus),
        ("linear_perpendicular", PolarizationSpec::LinearPerpendicular),
    ];

    fn name(self) -> &'static str {
        Self::NAMES.iter().find(|(_, p)| *p == self).map(|(n, _)| *n).unwrap_or("pi")
    }

    fn to_polarization(self) -> Polarization {
        match self {
            PolarizationSpec::Pi => Polarization::PI,
            PolarizationSpec::SigmaPlus => Polarization::SIGMA_PLUS,
            PolarizationSpec::SigmaMinus => Polarization::SIGMA_MINUS,
            PolarizationSpec::LinearPerpendicular => Polarization::linear_perpendicular(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaserConfig {
    pub name: String,
    pub transition: Transition,
    pub rabi_mhz: f64,
    pub detuning_mhz: f64,
    pub polarization: PolarizationSpec,
    pub linewidth_mhz: f64,
    pub links: Option<Vec<(String, String)>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Aperture {
    Na(f64),
    Epsilon(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryConfig {
    pub aperture: Aperture,
    pub mode_match: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitSpec {
    None,
    Extinction,
    Transmission,
    Fluorescence,
    /// Window width and suppression of a two-photon-detuning scan.
    Eit,
}

impl FitSpec {
    const NAMES: [(&'static str, FitSpec); 5] = [
        ("none", FitSpec::None),
        ("extinction", FitSpec::Extinction),
        ("transmission", FitSpec::Transmission),
        ("fluorescence", FitSpec::Fluorescence),
        ("eit", FitSpec::Eit),
    ];

    fn name(self) -> &'static str {
        Self::NAMES.iter().find(|(_, f)| *f == self).map(|(n, _)| *n).unwrap_or("none")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanConfig {
    pub parameter: ScanParameter,
    /// MHz for frequency axes, gauss for `bfield`.
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub engine: Engine,
    pub fit: FitSpec,
    /// Report local minima of the fluorescence.
    pub count_minima: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DemodPhase {
    Calibrate,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionConfig {
    pub frequency_hz: f64,
    pub duty: f64,
    pub demod_phase: DemodPhase,
    pub lowpass_cycles: usize,
    pub chopper_phase: f64,
    pub mode: LockInMode,
    pub probe_power: f64,
    pub forward_fluorescence: f64,
    /// Mean photons per half period at unit power; 0 disables shot noise.
    pub shot_noise_photons: f64,
    pub seed: u64,
}

impl DetectionConfig {
    pub fn chopper(&self, demod_phase: f64) -> ChopperConfig {
        ChopperConfig {
            frequency: self.frequency_hz,
            duty: self.duty,
            demod_phase,
            lowpass_cycles: self.lowpass_cycles,
            chopper_phase: self.chopper_phase,
            mode: self.mode,
        }
    }

    pub fn detector(&self) -> Detector {
        Detector {
            probe_power: self.probe_power,
            forward_fluorescence: self.forward_fluorescence,
            shot_noise: (self.shot_noise_photons > 0.0).then_some(ShotNoise {
                photons_per_unit: self.shot_noise_photons,
                seed: self.seed,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub csv: Option<String>,
    pub svg: Option<String>,
    /// Significant digits in the CSV.
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            csv: None,
            svg: None,
            precision: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scheme: SchemeConfig,
    /// Detection efficiency applied to fluorescence rates.
    pub collection: f64,
    pub lasers: Vec<LaserConfig>,
    pub geometry: GeometryConfig,
    pub scan: Option<ScanConfig>,
    pub detection: Option<DetectionConfig>,
    pub output: OutputConfig,
}

struct Entry {
    key: String,
    value: String,
    line: usize,
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

fn tokenize(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: format!("unterminated section header `{content}`"),
                })?
                .trim();
            if name.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "empty section name".into(),
                });
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("duplicate section [{name}]"),
                });
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ConfigError::Syntax {
                line,
                message: format!("invalid key `{key}`"),
            });
        }
        let section = sections.last_mut().ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("key `{key}` outside any section"),
        })?;
        if section.entries.iter().any(|e| e.key == key) {
            return Err(ConfigError::Syntax {
                line,
                message: format!("duplicate key `{}.{key}`", section.name),
            });
        }
        section.entries.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line,
        });
    }
    Ok(sections)
}

/// Strips `#` / `;` comments that start a line or follow whitespace.
fn strip_comment(line: &str) -> &str {
    let mut prev_ws = true;
    for (i, c) in line.char_indices() {
        if (c == '#' || c == ';') && prev_ws {
            return &line[..i];
        }
        prev_ws = c.is_whitespace();
    }
    line
}

/// Typed access to one section, tracking which keys were consumed.
struct Fields<'a> {
    section: &'a Section,
    used: BTreeSet<&'a str>,
}

impl<'a> Fields<'a> {
    fn new(section: &'a Section) -> Self {
        Self {
            section,
            used: BTreeSet::new(),
        }
    }

    fn qualified(&self, key: &str) -> String {
        format!("{}.{key}", self.section.name)
    }

    fn raw(&mut self, key: &str) -> Option<&'a str> {
        let e = self.section.entries.iter().find(|e| e.key == key)?;
        self.used.insert(e.key.as_str());
        Some(e.value.as_str())
    }

    fn has(&self, key: &str) -> bool {
        self.section.entries.iter().any(|e| e.key == key)
    }

    fn parse<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| invalid(self.qualified(key), format!("expected {what}, got `{v}`"))),
        }
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v = self.parse::<f64>(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(invalid(self.qualified(key), "must be finite")),
            _ => Ok(v),
        }
    }

    fn required_float(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.float(key)?.ok_or_else(|| ConfigError::MissingKey(self.qualified(key)))
    }

    fn rate(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.float(key)?.unwrap_or(default);
        if v < 0.0 {
            return Err(invalid(self.qualified(key), format!("must be >= 0, got {v}")));
        }
        Ok(v)
    }

    fn ranged(&mut self, key: &str, default: f64, lo: f64, hi: f64) -> Result<f64, ConfigError> {
        let v = self.float(key)?.unwrap_or(default);
        if !(lo..=hi).contains(&v) {
            return Err(invalid(self.qualified(key), format!("must lie in [{lo}, {hi}], got {v}")));
        }
        Ok(v)
    }

    fn choice<T: Copy>(&mut self, key: &str, names: &[(&str, T)]) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => names.iter().find(|(n, _)| *n == v).map(|(_, t)| Some(*t)).ok_or_else(|| {
                let options: Vec<&str> = names.iter().map(|(n, _)| *n).collect();
                invalid(self.qualified(key), format!("`{v}` is not one of {}", options.join("|")))
            }),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.section.entries.iter().find(|e| !self.used.contains(e.key.as_str())) {
            Some(e) => Err(ConfigError::UnknownKey {
                key: format!("{}.{}", self.section.name, e.key),
                line: e.line,
            }),
            None => Ok(()),
        }
    }
}

const TRANSITIONS: [(&str, Transition); 2] = [
    ("ground_excited", Transition::GroundExcited),
    ("metastable_excited", Transition::MetastableExcited),
];
const ENGINES: [(&str, Engine); 2] = [("analytic", Engine::Analytic), ("numeric", Engine::Numeric)];
const MODES: [(&str, LockInMode); 3] = [
    ("auto", LockInMode::Auto),
    ("quasi_static", LockInMode::QuasiStatic),
    ("transient", LockInMode::Transient),
];
const BOOLS: [(&str, bool); 2] = [("true", true), ("false", false)];

fn transition_name(t: Transition) -> &'static str {
    TRANSITIONS.iter().find(|(_, x)| *x == t).map(|(n, _)| *n).unwrap_or("ground_excited")
}

fn name_of<T: PartialEq + Copy>(names: &[(&'static str, T)], value: T) -> &'static str {
    names.iter().find(|(_, x)| *x == value).map(|(n, _)| *n).unwrap_or("")
}

fn parse_scheme(f: &mut Fields) -> Result<(SchemeConfig, f64), ConfigError> {
    let kind = f
        .raw("kind")
        .ok_or_else(|| ConfigError::MissingKey("scheme.kind".into()))?;
    let defaults = BariumRates::default();
    let scheme = match kind {
        "two_level" => {
            let gamma_mhz = f.required_float("gamma_mhz")?;
            if gamma_mhz <= 0.0 {
                return Err(invalid("scheme.gamma_mhz", "must be > 0"));
            }
            SchemeConfig::TwoLevel { gamma_mhz }
        }
        "lambda3" => {
            let gamma_g_mhz = f.rate("gamma_g_mhz", f64::NAN).and_then(|v| {
                if v.is_nan() {
                    Err(ConfigError::MissingKey("scheme.gamma_g_mhz".into()))
                } else {
                    Ok(v)
                }
            })?;
            let gamma_r_mhz = f.rate("gamma_r_mhz", 0.0)?;
            if gamma_g_mhz + gamma_r_mhz <= 0.0 {
                return Err(invalid("scheme.gamma_g_mhz", "excited level needs a nonzero decay rate"));
            }
            SchemeConfig::Lambda3 {
                gamma_g_mhz,
                gamma_r_mhz,
                gamma0_mhz: f.rate("gamma0_mhz", 0.0)?,
            }
        }
        "barium8" => SchemeConfig::Barium8 {
            bfield_gauss: f.required_float("bfield_gauss")?,
            total_decay_mhz: {
                let v = f.rate("total_decay_mhz", defaults.total_decay / MHZ)?;
                if v <= 0.0 {
                    return Err(invalid("scheme.total_decay_mhz", "must be > 0"));
                }
                v
            },
            branching_to_s: f.ranged("branching_to_s", defaults.branching_to_s, 0.0, 1.0)?,
            g_s: f.float("g_s")?.unwrap_or(defaults.g_s),
            g_p: f.float("g_p")?.unwrap_or(defaults.g_p),
            g_d: f.float("g_d")?.unwrap_or(defaults.g_d),
            ground_dephasing_mhz: f.rate("ground_dephasing_mhz", defaults.ground_dephasing / MHZ)?,
            motional_dephasing_mhz: f.rate("motional_dephasing_mhz", defaults.motional_dephasing / MHZ)?,
            sublevel_mixing_mhz: f.rate("sublevel_mixing_mhz", defaults.sublevel_mixing / MHZ)?,
        },
        other => {
            return Err(invalid(
                "scheme.kind",
                format!("`{other}` is not one of two_level|lambda3|barium8"),
            ))
        }
    };
    let collection = f.rate("collection", 1.0)?;
    Ok((scheme, collection))
}

fn parse_links(key: &str, value: &str) -> Result<Vec<(String, String)>, ConfigError> {
    value
        .split(',')
        .map(|pair| {
            let (l, u) = pair
                .split_once("->")
                .ok_or_else(|| invalid(key, format!("link `{}` must read `lower->upper`", pair.trim())))?;
            Ok((l.trim().to_string(), u.trim().to_string()))
        })
        .collect()
}

fn parse_laser(name: &str, f: &mut Fields) -> Result<LaserConfig, ConfigError> {
    let transition = f
        .choice("transition", &TRANSITIONS)?
        .ok_or_else(|| ConfigError::MissingKey(f.qualified("transition")))?;
    let rabi_mhz = f.required_float("rabi_mhz")?;
    if rabi_mhz < 0.0 {
        return Err(invalid(f.qualified("rabi_mhz"), "must be >= 0"));
    }
    let detuning_mhz = f.float("detuning_mhz")?.unwrap_or(0.0);
    let polarization = f.choice("polarization", &PolarizationSpec::NAMES)?.unwrap_or(PolarizationSpec::Pi);
    let linewidth_mhz = f.rate("linewidth_mhz", 0.0)?;
    let links = match f.raw("links") {
        Some(v) => Some(parse_links(&f.qualified("links"), v)?),
        None => None,
    };
    Ok(LaserConfig {
        name: name.to_string(),
        transition,
        rabi_mhz,
        detuning_mhz,
        polarization,
        linewidth_mhz,
        links,
    })
}

fn parse_geometry(f: &mut Fields) -> Result<GeometryConfig, ConfigError> {
    let aperture = match (f.has("na"), f.has("epsilon")) {
        (true, true) => return Err(invalid("geometry", "give exactly one of `na` and `epsilon`, not both")),
        (false, false) => return Err(invalid("geometry", "one of `na` or `epsilon` is required")),
        (true, false) => {
            let na = f.required_float("na")?;
            if !(na > 0.0 && na <= 1.0) {
                return Err(invalid("geometry.na", format!("must lie in (0, 1], got {na}")));
            }
            Aperture::Na(na)
        }
        (false, true) => {
            let eps = f.required_float("epsilon")?;
            if !(0.0..=0.5).contains(&eps) {
                return Err(invalid("geometry.epsilon", format!("must lie in [0, 0.5], got {eps}")));
            }
            Aperture::Epsilon(eps)
        }
    };
    Ok(GeometryConfig {
        aperture,
        mode_match: f.ranged("mode_match", 1.0, 0.0, 1.0)?,
    })
}

fn parse_scan(f: &mut Fields) -> Result<ScanConfig, ConfigError> {
    let parameter = f
        .choice("parameter", &ScanParameter::ALL.map(|p| (p.name(), p)))?
        .ok_or_else(|| ConfigError::MissingKey("scan.parameter".into()))?;
    let start = f.required_float("start")?;
    let stop = f.required_float("stop")?;
    if start >= stop {
        return Err(invalid("scan.stop", format!("must exceed start ({start}), got {stop}")));
    }
    let points = f
        .parse::<usize>("points", "a positive integer")?
        .ok_or_else(|| ConfigError::MissingKey("scan.points".into()))?;
    if points < 2 {
        return Err(invalid("scan.points", "must be >= 2"));
    }
    Ok(ScanConfig {
        parameter,
        start,
        stop,
        points,
        engine: f.choice("engine", &ENGINES)?.unwrap_or(Engine::Numeric),
        fit: f.choice("fit", &FitSpec::NAMES)?.unwrap_or(FitSpec::None),
        count_minima: f.choice("count_minima", &BOOLS)?.unwrap_or(false),
    })
}

fn parse_detection(f: &mut Fields) -> Result<DetectionConfig, ConfigError> {
    let frequency_hz = f.float("frequency_hz")?.unwrap_or(600.0);
    if frequency_hz <= 0.0 {
        return Err(invalid("detection.frequency_hz", "must be > 0"));
    }
    let duty = f.float("duty")?.unwrap_or(0.5);
    if !(duty > 0.0 && duty < 1.0) {
        return Err(invalid("detection.duty", format!("must lie in (0, 1), got {duty}")));
    }
    let demod_phase = match f.raw("demod_phase") {
        None | Some("calibrate") => DemodPhase::Calibrate,
        Some(v) => DemodPhase::Fixed(
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| invalid("detection.demod_phase", format!("expected `calibrate` or radians, got `{v}`")))?,
        ),
    };
    let lowpass_cycles = f.parse::<usize>("lowpass_cycles", "a positive integer")?.unwrap_or(1);
    if lowpass_cycles == 0 {
        return Err(invalid("detection.lowpass_cycles", "must be >= 1"));
    }
    Ok(DetectionConfig {
        frequency_hz,
        duty,
        demod_phase,
        lowpass_cycles,
        chopper_phase: f.float("chopper_phase")?.unwrap_or(0.0),
        mode: f.choice("mode", &MODES)?.unwrap_or(LockInMode::Auto),
        probe_power: f.rate("probe_power", 1.0)?,
        forward_fluorescence: f.rate("forward_fluorescence", 0.0)?,
        shot_noise_photons: f.rate("shot_noise_photons", 0.0)?,
        seed: f.parse::<u64>("seed", "a non-negative integer")?.unwrap_or(0),
    })
}

fn parse_output(f: &mut Fields) -> Result<OutputConfig, ConfigError> {
    let precision = f.parse::<usize>("precision", "a positive integer")?.unwrap_or(12);
    if !(1..=17).contains(&precision) {
        return Err(invalid("output.precision", "must lie in [1, 17]"));
    }
    Ok(OutputConfig {
        csv: f.raw("csv").map(str::to_string),
        svg: f.raw("svg").map(str::to_string),
        precision,
    })
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let sections = tokenize(text)?;
    for s in &sections {
        let known = matches!(
            s.name.as_str(),
            "scheme" | "geometry" | "scan" | "detection" | "output"
        ) || s.name.strip_prefix("laser.").is_some_and(|n| !n.is_empty());
        if !known {
            return Err(ConfigError::UnknownSection {
                section: s.name.clone(),
                line: s.line,
            });
        }
    }
    let find = |name: &str| sections.iter().find(|s| s.name == name);
    let mut missing = Vec::new();
    if find("scheme").is_none() {
        missing.push("[scheme]".to_string());
    }
    if find("geometry").is_none() {
        missing.push("[geometry]".to_string());
    }
    if !sections.iter().any(|s| s.name.starts_with("laser.")) {
        missing.push("[laser.<name>]".to_string());
    }
    if !missing.is_empty() {
        return Err(ConfigError::MissingSections(missing));
    }

    let mut f = Fields::new(find("scheme").expect("checked"));
    let (scheme, collection) = parse_scheme(&mut f)?;
    f.finish()?;

    let mut lasers = Vec::new();
    for s in sections.iter().filter(|s| s.name.starts_with("laser.")) {
        let mut f = Fields::new(s);
        lasers.push(parse_laser(&s.name["laser.".len()..], &mut f)?);
        f.finish()?;
    }

    let mut f = Fields::new(find("geometry").expect("checked"));
    let geometry = parse_geometry(&mut f)?;
    f.finish()?;

    let scan = match find("scan") {
        Some(s) => {
            let mut f = Fields::new(s);
            let c = parse_scan(&mut f)?;
            f.finish()?;
            Some(c)
        }
        None => None,
    };
    let detection = match find("detection") {
        Some(s) => {
            let mut f = Fields::new(s);
            let c = parse_detection(&mut f)?;
            f.finish()?;
            Some(c)
        }
        None => None,
    };
    let output = match find("output") {
        Some(s) => {
            let mut f = Fields::new(s);
            let c = parse_output(&mut f)?;
            f.finish()?;
            c
        }
        None => OutputConfig::default(),
    };

    let config = RunConfig {
        scheme,
        collection,
        lasers,
        geometry,
        scan,
        detection,
        output,
    };
    config.validate()?;
    Ok(config)
}

/// Reads and parses a configuration file.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

impl RunConfig {
    /// Cross-section checks: laser roles per scheme kind, buildable scheme,
    /// scan and fit requirements.
    fn validate(&self) -> Result<(), ConfigError> {
        let count = |t: Transition| self.lasers.iter().filter(|l| l.transition == t).count();
        let (ground, meta) = (count(Transition::GroundExcited), count(Transition::MetastableExcited));
        match self.scheme {
            SchemeConfig::TwoLevel { .. } if ground != 1 || meta != 0 => {
                return Err(invalid(
                    "laser",
                    "two_level needs exactly one ground_excited laser and no other",
                ))
            }
            SchemeConfig::Lambda3 { .. } if ground != 1 || meta != 1 => {
                return Err(invalid(
                    "laser",
                    "lambda3 needs exactly one ground_excited and one metastable_excited laser",
                ))
            }
            SchemeConfig::Barium8 { .. } if ground == 0 => {
                return Err(invalid("laser", "barium8 needs at least one ground_excited laser"))
            }
            _ => {}
        }
        if !matches!(self.scheme, SchemeConfig::Barium8 { .. }) {
            if let Some(l) = self.lasers.iter().find(|l| l.links.is_some()) {
                return Err(invalid(format!("laser.{}.links", l.name), "links apply to barium8 only"));
            }
        }
        self.build_scheme()
            .map_err(|e| invalid(format!("scheme ({})", self.scheme.kind_name()), e.to_string()))?;
        self.build_geometry()
            .map_err(|e| invalid("geometry", e.to_string()))?;
        if let Some(scan) = &self.scan {
            if scan.engine == Engine::Analytic && matches!(self.scheme, SchemeConfig::Barium8 { .. }) {
                return Err(invalid("scan.engine", "the analytic engine supports two_level and lambda3 only"));
            }
            let needs_control = matches!(
                scan.parameter,
                ScanParameter::ControlDetuning | ScanParameter::TwoPhotonDetuning | ScanParameter::ControlRabi
            );
            if needs_control && meta == 0 {
                return Err(invalid("scan.parameter", format!("{} needs a control laser", scan.parameter)));
            }
            if scan.parameter == ScanParameter::Bfield && !matches!(self.scheme, SchemeConfig::Barium8 { .. }) {
                return Err(invalid("scan.parameter", "bfield scans need the barium8 scheme"));
            }
            if scan.fit == FitSpec::Eit && scan.parameter != ScanParameter::TwoPhotonDetuning {
                return Err(invalid("scan.fit", "eit metrics need a two_photon_detuning scan"));
            }
            if scan.fit != FitSpec::None && scan.points < crate::spectra::FIT_MIN_POINTS {
                return Err(invalid("scan.points", "fits need at least 8 points"));
            }
        }
        if self.detection.is_some() && meta == 0 {
            return Err(invalid("detection", "lock-in detection chops a metastable_excited (repumper) laser"));
        }
        Ok(())
    }

    fn laser_fields(&self) -> Vec<LaserField> {
        self.lasers
            .iter()
            .map(|l| {
                let mut f = LaserField::new(l.name.clone(), l.transition, l.rabi_mhz * MHZ, l.detuning_mhz * MHZ)
                    .with_polarization(l.polarization.to_polarization())
                    .with_linewidth(l.linewidth_mhz * MHZ);
                if let Some(links) = &l.links {
                    f = f.with_links(links.clone());
                }
                f
            })
            .collect()
    }

    /// Scheme in internal (angular-frequency) units.
    pub fn build_scheme(&self) -> crate::Result<LevelScheme> {
        let mut lasers = self.laser_fields();
        let scheme = match &self.scheme {
            SchemeConfig::TwoLevel { gamma_mhz } => build_two_level(gamma_mhz * MHZ, lasers.remove(0))?,
            SchemeConfig::Lambda3 {
                gamma_g_mhz,
                gamma_r_mhz,
                gamma0_mhz,
            } => {
                let probe_first = lasers[0].transition == Transition::GroundExcited;
                let (probe, control) = if probe_first {
                    let c = lasers.remove(1);
                    (lasers.remove(0), c)
                } else {
                    let c = lasers.remove(0);
                    (lasers.remove(0), c)
                };
                build_lambda3(gamma_g_mhz * MHZ, gamma_r_mhz * MHZ, gamma0_mhz * MHZ, probe, control)?
            }
            SchemeConfig::Barium8 {
                bfield_gauss,
                total_decay_mhz,
                branching_to_s,
                g_s,
                g_p,
                g_d,
                ground_dephasing_mhz,
                motional_dephasing_mhz,
                sublevel_mixing_mhz,
            } => build_barium8(
                bfield_gauss * GAUSS,
                lasers,
                BariumRates {
                    total_decay: total_decay_mhz * MHZ,
                    branching_to_s: *branching_to_s,
                    g_s: *g_s,
                    g_p: *g_p,
                    g_d: *g_d,
                    ground_dephasing: ground_dephasing_mhz * MHZ,
                    motional_dephasing: motional_dephasing_mhz * MHZ,
                    sublevel_mixing: sublevel_mixing_mhz * MHZ,
                },
            )?,
        };
        scheme.with_collection(self.collection)
    }

    pub fn build_geometry(&self) -> crate::Result<CouplingGeometry> {
        match self.geometry.aperture {
            Aperture::Na(na) => CouplingGeometry::from_na(na, self.geometry.mode_match),
            Aperture::Epsilon(e) => CouplingGeometry::from_epsilon(e, self.geometry.mode_match),
        }
    }

    /// Scan axis in internal units, if a scan is configured.
    pub fn build_axis(&self) -> Option<crate::Result<ScanAxis>> {
        self.scan.as_ref().map(|s| {
            let unit = if s.parameter.is_frequency() { MHZ } else { GAUSS };
            ScanAxis::new(s.parameter, s.start * unit, s.stop * unit, s.points)
        })
    }

    /// Serializes the fully resolved configuration; parsing the result
    /// yields an equal `RunConfig`.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "[scheme]");
        let _ = writeln!(w, "kind = {}", self.scheme.kind_name());
        match &self.scheme {
            SchemeConfig::TwoLevel { gamma_mhz } => {
                let _ = writeln!(w, "gamma_mhz = {gamma_mhz}");
            }
            SchemeConfig::Lambda3 {
                gamma_g_mhz,
                gamma_r_mhz,
                gamma0_mhz,
            } => {
                let _ = writeln!(w, "gamma_g_mhz = {gamma_g_mhz}");
                let _ = writeln!(w, "gamma_r_mhz = {gamma_r_mhz}");
                let _ = writeln!(w, "gamma0_mhz = {gamma0_mhz}");
            }
            SchemeConfig::Barium8 {
                bfield_gauss,
                total_decay_mhz,
                branching_to_s,
                g_s,
                g_p,
                g_d,
                ground_dephasing_mhz,
                motional_dephasing_mhz,
                sublevel_mixing_mhz,
            } => {
                let _ = writeln!(w, "bfield_gauss = {bfield_gauss}");
                let _ = writeln!(w, "total_decay_mhz = {total_decay_mhz}");
                let _ = writeln!(w, "branching_to_s = {branching_to_s}");
                let _ = writeln!(w, "g_s = {g_s}");
                let _ = writeln!(w, "g_p = {g_p}");
                let _ = writeln!(w, "g_d = {g_d}");
                let _ = writeln!(w, "ground_dephasing_mhz = {ground_dephasing_mhz}");
                let _ = writeln!(w, "motional_dephasing_mhz = {motional_dephasing_mhz}");
                let _ = writeln!(w, "sublevel_mixing_mhz = {sublevel_mixing_mhz}");
            }
        }
        let _ = writeln!(w, "collection = {}", self.collection);
        for l in &self.lasers {
            let _ = writeln!(w, "\n[laser.{}]", l.name);
            let _ = writeln!(w, "transition = {}", transition_name(l.transition));
            let _ = writeln!(w, "rabi_mhz = {}", l.rabi_mhz);
            let _ = writeln!(w, "detuning_mhz = {}", l.detuning_mhz);
            let _ = writeln!(w, "polarization = {}", l.polarization.name());
            let _ = writeln!(w, "linewidth_mhz = {}", l.linewidth_mhz);
            if let Some(links) = &l.links {
                let joined: Vec<String> = links.iter().map(|(a, b)| format!("{a}->{b}")).collect();
                let _ = writeln!(w, "links = {}", joined.join(", "));
            }
        }
        let _ = writeln!(w, "\n[geometry]");
        match self.geometry.aperture {
            Aperture::Na(na) => {
                let _ = writeln!(w, "na = {na}");
            }
            Aperture::Epsilon(e) => {
                let _ = writeln!(w, "epsilon = {e}");
            }
        }
        let _ = writeln!(w, "mode_match = {}", self.geometry.mode_match);
        if let Some(s) = &self.scan {
            let _ = writeln!(w, "\n[scan]");
            let _ = writeln!(w, "parameter = {}", s.parameter.name());
            let _ = writeln!(w, "start = {}", s.start);
            let _ = writeln!(w, "stop = {}", s.stop);
            let _ = writeln!(w, "points = {}", s.points);
            let _ = writeln!(w, "engine = {}", s.engine);
            let _ = writeln!(w, "fit = {}", s.fit.name());
            let _ = writeln!(w, "count_minima = {}", s.count_minima);
        }
        if let Some(d) = &self.detection {
            let _ = writeln!(w, "\n[detection]");
            let _ = writeln!(w, "frequency_hz = {}", d.frequency_hz);
            let _ = writeln!(w, "duty = {}", d.duty);
            match d.demod_phase {
                DemodPhase::Calibrate => {
                    let _ = writeln!(w, "demod_phase = calibrate");
                }
                DemodPhase::Fixed(p) => {
                    let _ = writeln!(w, "demod_phase = {p}");
                }
            }
            let _ = writeln!(w, "lowpass_cycles = {}", d.lowpass_cycles);
            let _ = writeln!(w, "chopper_phase = {}", d.chopper_phase);
            let _ = writeln!(w, "mode = {}", name_of(&MODES, d.mode));
            let _ = writeln!(w, "probe_power = {}", d.probe_power);
            let _ = writeln!(w, "forward_fluorescence = {}", d.forward_fluorescence);
            let _ = writeln!(w, "shot_noise_photons = {}", d.shot_noise_photons);
            let _ = writeln!(w, "seed = {}", d.seed);
        }
        let _ = writeln!(w, "\n[output]");
        if let Some(c) = &self.output.csv {
            let _ = writeln!(w, "csv = {c}");
        }
        if let Some(s) = &self.output.svg {
            let _ = writeln!(w, "svg = {s}");
        }
        let _ = writeln!(w, "precision = {}", self.output.precision);
        out
    }
}
