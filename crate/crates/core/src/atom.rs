//! Atomic level schemes and the classical laser fields that drive them.
//!
//! Rate convention: every `gamma`-named argument is a coherence (amplitude)
//! decay rate in rad/s. Population decay through a channel is twice that, so
//! a two-level atom built with `gamma` has Γ = 2γ and an absorption
//! Lorentzian of FWHM 2γ.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::linalg::{C64, ONE, ZERO};

/// μ_B / ħ in rad s⁻¹ T⁻¹.
pub const BOHR_MAGNETON_OVER_HBAR: f64 = 2.0 * PI * 1.399_624_493_61e10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Manifold {
    S12,
    P12,
    D32,
    GenericG,
    GenericE,
    GenericM,
}

impl Manifold {
    /// 2J for the Zeeman manifolds; generic levels carry no angular momentum.
    pub fn twice_j(self) -> i32 {
        match self {
            Manifold::S12 | Manifold::P12 => 1,
            Manifold::D32 => 3,
            Manifold::GenericG | Manifold::GenericE | Manifold::GenericM => 0,
        }
    }

    pub fn is_excited(self) -> bool {
        matches!(self, Manifold::P12 | Manifold::GenericE)
    }

    pub fn is_metastable(self) -> bool {
        matches!(self, Manifold::D32 | Manifold::GenericM)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub label: String,
    pub manifold: Manifold,
    /// 2·m_J, so half-integers stay exact.
    pub twice_mj: i32,
    pub gj: f64,
    /// g_J m_J μ_B B / ħ in rad/s.
    pub zeeman_shift: f64,
}

impl Level {
    pub fn new(
        label: impl Into<String>,
        manifold: Manifold,
        twice_mj: i32,
        gj: f64,
        bfield: f64,
    ) -> Result<Self> {
        let label = label.into();
        let tj = manifold.twice_j();
        if twice_mj.abs() > tj || (tj - twice_mj).rem_euclid(2) != 0 {
            return Err(Error::validation(format!(
                "level {label}: m_J = {}/2 not allowed in a J = {tj}/2 manifold",
                twice_mj
            )));
        }
        Ok(Self {
            zeeman_shift: gj * twice_mj as f64 / 2.0 * BOHR_MAGNETON_OVER_HBAR * bfield,
            label,
            manifold,
            twice_mj,
            gj,
        })
    }

    pub fn mj(&self) -> f64 {
        self.twice_mj as f64 / 2.0
    }
}

/// Spontaneous decay `upper → lower`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayChannel {
    pub upper: usize,
    pub lower: usize,
    /// Population decay rate of this channel, rad/s.
    pub rate: f64,
    /// Signed Clebsch-Gordan coefficient; 1 for generic levels.
    pub relative_amplitude: f64,
}

/// Pure dephasing jump `√rate |level⟩⟨level|`; coherences between `level`
/// and any other level decay at `rate / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dephasing {
    pub level: usize,
    pub rate: f64,
}

/// Incoherent population transfer `√rate |to⟩⟨from|` between sublevels.
#[derive(Clone, Debug, PartialEq)]
pub struct Transfer {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

/// Which lower manifold a laser connects to the excited manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Transition {
    /// g ↔ e, or S1/2 ↔ P1/2 (493 nm) for barium.
    GroundExcited,
    /// m ↔ e, or D3/2 ↔ P1/2 (650 nm) for barium.
    MetastableExcited,
}

impl Transition {
    fn accepts_lower(self, m: Manifold) -> bool {
        match self {
            Transition::GroundExcited => matches!(m, Manifold::S12 | Manifold::GenericG),
            Transition::MetastableExcited => m.is_metastable(),
        }
    }
}

/// Spherical components of the field in the magnetic-field frame.
///
/// `q = m_upper − m_lower`, so σ⁺ drives Δm = +1 absorption.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Polarization {
    pub sigma_minus: C64,
    pub pi: C64,
    pub sigma_plus: C64,
}

impl Polarization {
    pub const SIGMA_PLUS: Self = Self {
        sigma_minus: ZERO,
        pi: ZERO,
        sigma_plus: ONE,
    };
    pub const SIGMA_MINUS: Self = Self {
        sigma_minus: ONE,
        pi: ZERO,
        sigma_plus: ZERO,
    };
    pub const PI: Self = Self {
        sigma_minus: ZERO,
        pi: ONE,
        sigma_plus: ZERO,
    };

    /// Linear polarization perpendicular to the field: equal σ⁺ and σ⁻.
    pub fn linear_perpendicular() -> Self {
        Self {
            sigma_minus: C64::new(FRAC_1_SQRT_2, 0.0),
            pi: ZERO,
            sigma_plus: C64::new(FRAC_1_SQRT_2, 0.0),
        }
    }

    /// Arbitrary mixture, normalized to unit total weight.
    pub fn mixture(sigma_minus: C64, pi: C64, sigma_plus: C64) -> Result<Self> {
        let norm = (sigma_minus.norm_sqr() + pi.norm_sqr() + sigma_plus.norm_sqr()).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::validation("polarization weights must not all vanish"));
        }
        Ok(Self {
            sigma_minus: sigma_minus / norm,
            pi: pi / norm,
            sigma_plus: sigma_plus / norm,
        })
    }

    pub fn amplitude(&self, q: i32) -> C64 {
        match q {
            -1 => self.sigma_minus,
            0 => self.pi,
            1 => self.sigma_plus,
            _ => ZERO,
        }
    }
}

impl Default for Polarization {
    fn default() -> Self {
        Self::PI
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaserField {
    pub name: String,
    pub transition: Transition,
    /// Rabi frequency Ω of the strongest component, rad/s.
    pub rabi: f64,
    /// Δ = ω_laser − ω_atom at zero field, rad/s; positive is blue.
    pub detuning: f64,
    pub polarization: Polarization,
    /// FWHM of the laser's Lorentzian spectrum, rad/s.
    pub linewidth: f64,
    /// Explicit `(lower, upper)` level labels; `None` drives every link the
    /// polarization allows.
    pub links: Option<Vec<(String, String)>>,
}

impl LaserField {
    pub fn new(name: impl Into<String>, transition: Transition, rabi: f64, detuning: f64) -> Self {
        Self {
            name: name.into(),
            transition,
            rabi,
            detuning,
            polarization: Polarization::default(),
            linewidth: 0.0,
            links: None,
        }
    }

    pub fn with_polarization(mut self, polarization: Polarization) -> Self {
        self.polarization = polarization;
        self
    }

    pub fn with_linewidth(mut self, linewidth: f64) -> Self {
        self.linewidth = linewidth;
        self
    }

    pub fn with_links(mut self, links: Vec<(String, String)>) -> Self {
        self.links = Some(links);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.rabi.is_finite() && self.rabi >= 0.0) {
            return Err(Error::validation(format!(
                "laser {}: rabi frequency must be finite and >= 0",
                self.name
            )));
        }
        if !(self.linewidth.is_finite() && self.linewidth >= 0.0) {
            return Err(Error::validation(format!(
                "laser {}: linewidth must be finite and >= 0",
                self.name
            )));
        }
        if !self.detuning.is_finite() {
            return Err(Error::validation(format!("laser {}: detuning must be finite", self.name)));
        }
        Ok(())
    }
}

/// A resolved laser link: the Hamiltonian carries `(Ω/2)·weight` at
/// `(upper, lower)` and its conjugate at `(lower, upper)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    pub laser: usize,
    pub lower: usize,
    pub upper: usize,
    pub weight: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    TwoLevel,
    Lambda3,
    Barium8,
}

/// Decay and structure constants for ¹³⁸Ba⁺. Defaults are literature values.
#[derive(Clone, Debug, PartialEq)]
pub struct BariumRates {
    /// Total P1/2 population decay rate Γ, rad/s.
    pub total_decay: f64,
    /// Fraction of P1/2 decays ending in S1/2.
    pub branching_to_s: f64,
    pub g_s: f64,
    pub g_p: f64,
    pub g_d: f64,
    /// Intrinsic S–D coherence decay, rad/s (added to the laser contribution).
    pub ground_dephasing: f64,
    /// Motion-induced S–D coherence decay, rad/s.
    pub motional_dephasing: f64,
    /// Incoherent exchange rate between sublevels of the same lower manifold.
    pub sublevel_mixing: f64,
}

impl Default for BariumRates {
    fn default() -> Self {
        Self {
            // τ(P1/2) ≈ 7.9 ns
            total_decay: 2.0 * PI * 20.1e6,
            branching_to_s: 0.73,
            g_s: 2.0,
            g_p: 2.0 / 3.0,
            g_d: 0.8,
            ground_dephasing: 0.0,
            motional_dephasing: 0.0,
            sublevel_mixing: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum SchemeParams {
    TwoLevel { gamma: f64 },
    Lambda3 { gamma_g: f64, gamma_r: f64, gamma0: f64 },
    Barium8 { rates: BariumRates },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelScheme {
    pub kind: SchemeKind,
    pub levels: Vec<Level>,
    pub decays: Vec<DecayChannel>,
    pub dephasing: Vec<Dephasing>,
    pub transfers: Vec<Transfer>,
    pub bfield: f64,
    pub lasers: Vec<LaserField>,
    pub couplings: Vec<Coupling>,
    /// Index of the probe laser in `lasers`.
    pub probe: Option<usize>,
    /// Index of the control (repumper) laser in `lasers`.
    pub control: Option<usize>,
    /// Detection efficiency applied by `fluorescence_rate`.
    pub collection: f64,
    params: SchemeParams,
}

impl LevelScheme {
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.label == label)
    }

    pub fn laser_index(&self, name: &str) -> Option<usize> {
        self.lasers.iter().position(|l| l.name == name)
    }

    pub fn excited_levels(&self) -> impl Iterator<Item = usize> + '_ {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.manifold.is_excited())
            .map(|(i, _)| i)
    }

    /// Σ of channel rates out of `upper`.
    pub fn total_decay(&self, upper: usize) -> f64 {
        self.decays
            .iter()
            .filter(|d| d.upper == upper)
            .map(|d| d.rate)
            .sum()
    }

    /// Natural coherence decay γ = Γ_total / 2 of the excited manifold.
    pub fn gamma(&self) -> f64 {
        self.excited_levels()
            .map(|u| self.total_decay(u) / 2.0)
            .fold(0.0, f64::max)
    }

    /// Smallest nonzero relaxation rate configured in the scheme, rad/s.
    pub fn min_relaxation_rate(&self) -> f64 {
        let decays = self.excited_levels().map(|u| self.total_decay(u) / 2.0);
        let deph = self.dephasing.iter().map(|d| d.rate / 2.0);
        let mix = self.transfers.iter().map(|t| t.rate);
        decays
            .chain(deph)
            .chain(mix)
            .filter(|&r| r > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn probe_laser(&self) -> Option<&LaserField> {
        self.probe.map(|i| &self.lasers[i])
    }

    pub fn control_laser(&self) -> Option<&LaserField> {
        self.control.map(|i| &self.lasers[i])
    }

    pub fn with_collection(mut self, collection: f64) -> Result<Self> {
        if !(collection.is_finite() && collection >= 0.0) {
            return Err(Error::validation("collection factor must be finite and >= 0"));
        }
        self.collection = collection;
        Ok(self)
    }

    /// Rebuilds the scheme after editing one laser.
    pub fn with_laser(&self, name: &str, edit: impl FnOnce(&mut LaserField)) -> Result<Self> {
        let idx = self
            .laser_index(name)
            .ok_or_else(|| Error::validation(format!("no laser named {name}")))?;
        let mut lasers = self.lasers.clone();
        edit(&mut lasers[idx]);
        self.rebuild(lasers, self.bfield)
    }

    pub fn with_bfield(&self, bfield: f64) -> Result<Self> {
        self.rebuild(self.lasers.clone(), bfield)
    }

    /// The same scheme with the control laser switched off.
    pub fn control_off(&self) -> Result<Self> {
        let name = self
            .control_laser()
            .ok_or_else(|| Error::validation("scheme has no control laser"))?
            .name
            .clone();
        self.with_laser(&name, |l| l.rabi = 0.0)
    }

    fn rebuild(&self, lasers: Vec<LaserField>, bfield: f64) -> Result<Self> {
        let rebuilt = match &self.params {
            SchemeParams::TwoLevel { gamma } => {
                let laser = lasers.into_iter().next().expect("two-level scheme has one laser");
                build_two_level(*gamma, laser)?
            }
            SchemeParams::Lambda3 {
                gamma_g,
                gamma_r,
                gamma0,
            } => {
                let mut it = lasers.into_iter();
                let probe = it.next().expect("lambda scheme has a probe");
                let control = it.next().expect("lambda scheme has a control");
                build_lambda3(*gamma_g, *gamma_r, *gamma0, probe, control)?
            }
            SchemeParams::Barium8 { rates } => build_barium8(bfield, lasers, rates.clone())?,
        };
        rebuilt.with_collection(self.collection)
    }
}

fn check_rate(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must be finite and >= 0, got {value}")))
    }
}

/// Two-photon linewidth (FWHM) of two uncorrelated lasers driving a Raman
/// pair, combined in quadrature.
pub fn raman_linewidth(linewidth_a: f64, linewidth_b: f64) -> f64 {
    linewidth_a.hypot(linewidth_b)
}

/// Lower-state coherence decay rate contributed by a Raman pair; half of
/// [`raman_linewidth`], so the EIT window FWHM tends to the Raman linewidth
/// as the control power vanishes.
pub fn raman_dephasing(linewidth_a: f64, linewidth_b: f64) -> f64 {
    raman_linewidth(linewidth_a, linewidth_b) / 2.0
}

/// Ω² / (γ² + Δ²).
pub fn saturation_parameter(omega: f64, gamma: f64, delta: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::validation("saturation parameter needs gamma > 0"));
    }
    Ok(omega * omega / (gamma * gamma + delta * delta))
}

/// Inverse of [`saturation_parameter`] for Ω.
pub fn rabi_for_saturation(s: f64, gamma: f64, delta: f64) -> Result<f64> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::validation("saturation parameter must be >= 0"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::validation("saturation parameter needs gamma > 0"));
    }
    Ok((s * (gamma * gamma + delta * delta)).sqrt())
}

fn factorial(n: i32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// ⟨j1 m1; j2 m2 | J M⟩ with all arguments doubled (Racah formula).
pub fn clebsch_gordan(tj1: i32, tm1: i32, tj2: i32, tm2: i32, tj: i32, tm: i32) -> f64 {
    if tm1 + tm2 != tm
        || tm1.abs() > tj1
        || tm2.abs() > tj2
        || tm.abs() > tj
        || tj > tj1 + tj2
        || tj < (tj1 - tj2).abs()
        || (tj1 + tj2 + tj) % 2 != 0
        || (tj1 + tm1) % 2 != 0
        || (tj2 + tm2) % 2 != 0
        || (tj + tm) % 2 != 0
    {
        return 0.0;
    }
    let h = |x: i32| x / 2;
    let pre = ((tj + 1) as f64 * factorial(h(tj + tj1 - tj2)) * factorial(h(tj - tj1 + tj2))
        * factorial(h(tj1 + tj2 - tj))
        / factorial(h(tj1 + tj2 + tj) + 1))
    .sqrt();
    let norm = (factorial(h(tj + tm))
        * factorial(h(tj - tm))
        * factorial(h(tj1 - tm1))
        * factorial(h(tj1 + tm1))
        * factorial(h(tj2 - tm2))
        * factorial(h(tj2 + tm2)))
    .sqrt();
    let mut sum = 0.0;
    for k in 0..=h(tj1 + tj2 + tj) {
        let args = [
            h(tj1 + tj2 - tj) - k,
            h(tj1 - tm1) - k,
            h(tj2 + tm2) - k,
            h(tj - tj2 + tm1) + k,
            h(tj - tj1 - tm2) + k,
        ];
        if args.iter().any(|&a| a < 0) {
            continue;
        }
        let denom: f64 = factorial(k) * args.iter().map(|&a| factorial(a)).product::<f64>();
        sum += if k % 2 == 0 { 1.0 } else { -1.0 } / denom;
    }
    pre * norm * sum
}

/// Dipole weight for `lower → upper` with q = m_upper − m_lower:
/// ⟨J_l m_l; 1 q | J_u m_u⟩. Squares sum to one over lower sublevels.
fn dipole_weight(lower: &Level, upper: &Level) -> f64 {
    let tq = upper.twice_mj - lower.twice_mj;
    if tq.abs() > 2 {
        return 0.0;
    }
    clebsch_gordan(
        lower.manifold.twice_j(),
        lower.twice_mj,
        2,
        tq,
        upper.manifold.twice_j(),
        upper.twice_mj,
    )
}

fn generic_couplings(
    levels: &[Level],
    laser_idx: usize,
    laser: &LaserField,
    lower: usize,
    upper: usize,
) -> Result<Vec<Coupling>> {
    if let Some(links) = &laser.links {
        for (l, u) in links {
            if l != &levels[lower].label || u != &levels[upper].label {
                return Err(Error::validation(format!(
                    "laser {} cannot drive {l} -> {u}",
                    laser.name
                )));
            }
        }
    }
    Ok(vec![Coupling {
        laser: laser_idx,
        lower,
        upper,
        weight: ONE,
    }])
}

pub fn build_two_level(gamma: f64, laser: LaserField) -> Result<LevelScheme> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::validation(format!("gamma must be > 0, got {gamma}")));
    }
    laser.validate()?;
    if laser.transition != Transition::GroundExcited {
        return Err(Error::validation("two-level laser must drive the ground-excited transition"));
    }
    let levels = vec![
        Level::new("g", Manifold::GenericG, 0, 0.0, 0.0)?,
        Level::new("e", Manifold::GenericE, 0, 0.0, 0.0)?,
    ];
    let couplings = generic_couplings(&levels, 0, &laser, 0, 1)?;
    let mut dephasing = Vec::new();
    if laser.linewidth > 0.0 {
        dephasing.push(Dephasing {
            level: 1,
            rate: laser.linewidth,
        });
    }
    Ok(LevelScheme {
        kind: SchemeKind::TwoLevel,
        levels,
        decays: vec![DecayChannel {
            upper: 1,
            lower: 0,
            rate: 2.0 * gamma,
            relative_amplitude: 1.0,
        }],
        dephasing,
        transfers: Vec::new(),
        bfield: 0.0,
        lasers: vec![laser],
        couplings,
        probe: Some(0),
        control: None,
        collection: 1.0,
        params: SchemeParams::TwoLevel { gamma },
    })
}

/// Λ scheme in the basis (g, e, m).
///
/// `gamma_g` and `gamma_r` are the coherence-rate contributions of the e→g
/// and e→m legs (channel population rates 2γ_g and 2γ_r), so the excited
/// coherence decays at γ = γ_g + γ_r. `gamma0` is the intrinsic g–m
/// coherence decay; the lasers' Raman linewidth is added on top.
pub fn build_lambda3(
    gamma_g: f64,
    gamma_r: f64,
    gamma0: f64,
    probe: LaserField,
    control: LaserField,
) -> Result<LevelScheme> {
    check_rate("gamma_g", gamma_g)?;
    check_rate("gamma_r", gamma_r)?;
    check_rate("gamma0", gamma0)?;
    if gamma_g + gamma_r <= 0.0 {
        return Err(Error::validation("excited level needs a nonzero decay rate"));
    }
    probe.validate()?;
    control.validate()?;
    if probe.transition == control.transition {
        return Err(Error::validation(format!(
            "probe {} and control {} are assigned to the same leg",
            probe.name, control.name
        )));
    }
    if probe.transition != Transition::GroundExcited {
        return Err(Error::validation("probe must drive g -> e and control m -> e"));
    }
    if probe.name == control.name {
        return Err(Error::validation("laser names must be unique"));
    }
    let levels = vec![
        Level::new("g", Manifold::GenericG, 0, 0.0, 0.0)?,
        Level::new("e", Manifold::GenericE, 0, 0.0, 0.0)?,
        Level::new("m", Manifold::GenericM, 0, 0.0, 0.0)?,
    ];
    let mut couplings = generic_couplings(&levels, 0, &probe, 0, 1)?;
    couplings.extend(generic_couplings(&levels, 1, &control, 2, 1)?);

    let mut dephasing = Vec::new();
    if probe.linewidth > 0.0 {
        dephasing.push(Dephasing {
            level: 1,
            rate: probe.linewidth,
        });
    }
    let ground = gamma0 + raman_dephasing(probe.linewidth, control.linewidth);
    if ground > 0.0 {
        dephasing.push(Dephasing {
            level: 2,
            rate: 2.0 * ground,
        });
    }

    Ok(LevelScheme {
        kind: SchemeKind::Lambda3,
        levels,
        decays: vec![
            DecayChannel {
                upper: 1,
                lower: 0,
                rate: 2.0 * gamma_g,
                relative_amplitude: 1.0,
            },
            DecayChannel {
                upper: 1,
                lower: 2,
                rate: 2.0 * gamma_r,
                relative_amplitude: 1.0,
            },
        ],
        dephasing,
        transfers: Vec::new(),
        bfield: 0.0,
        lasers: vec![probe, control],
        couplings,
        probe: Some(0),
        control: Some(1),
        collection: 1.0,
        params: SchemeParams::Lambda3 {
            gamma_g,
            gamma_r,
            gamma0,
        },
    })
}

/// Label used for barium sublevels, e.g. `S1/2(+1/2)`.
pub fn barium_label(manifold: Manifold, twice_mj: i32) -> String {
    let name = match manifold {
        Manifold::S12 => "S1/2",
        Manifold::P12 => "P1/2",
        Manifold::D32 => "D3/2",
        _ => "?",
    };
    let sign = if twice_mj < 0 { '-' } else { '+' };
    format!("{name}({sign}{}/2)", twice_mj.abs())
}

/// Eight-level ¹³⁸Ba⁺: S1/2 (2) + P1/2 (2) + D3/2 (4) sublevels, ordered
/// S, P, D with ascending m_J.
///
/// The first S↔P laser is the probe and the first D↔P laser the control
/// (repumper). Each laser's Rabi frequency refers to its strongest
/// Clebsch-Gordan component.
pub fn build_barium8(bfield: f64, lasers: Vec<LaserField>, rates: BariumRates) -> Result<LevelScheme> {
    if !bfield.is_finite() {
        return Err(Error::validation("magnetic field must be finite"));
    }
    if !(rates.total_decay.is_finite() && rates.total_decay > 0.0) {
        return Err(Error::validation("P1/2 total decay rate must be > 0"));
    }
    if !(0.0..=1.0).contains(&rates.branching_to_s) {
        return Err(Error::validation("branching ratio must lie in [0, 1]"));
    }
    check_rate("ground_dephasing", rates.ground_dephasing)?;
    check_rate("motional_dephasing", rates.motional_dephasing)?;
    check_rate("sublevel_mixing", rates.sublevel_mixing)?;
    for l in &lasers {
        l.validate()?;
    }
    for (i, a) in lasers.iter().enumerate() {
        if lasers[..i].iter().any(|b| b.name == a.name) {
            return Err(Error::validation(format!("duplicate laser name {}", a.name)));
        }
    }

    let mut levels = Vec::with_capacity(8);
    for tm in [-1, 1] {
        levels.push(Level::new(barium_label(Manifold::S12, tm), Manifold::S12, tm, rates.g_s, bfield)?);
    }
    for tm in [-1, 1] {
        levels.push(Level::new(barium_label(Manifold::P12, tm), Manifold::P12, tm, rates.g_p, bfield)?);
    }
    for tm in [-3, -1, 1, 3] {
        levels.push(Level::new(barium_label(Manifold::D32, tm), Manifold::D32, tm, rates.g_d, bfield)?);
    }
    let (s_range, p_range, d_range) = (0..2, 2..4, 4..8);

    let mut decays = Vec::new();
    for u in p_range.clone() {
        for (range, branch) in [
            (s_range.clone(), rates.branching_to_s),
            (d_range.clone(), 1.0 - rates.branching_to_s),
        ] {
            for l in range {
                let w = dipole_weight(&levels[l], &levels[u]);
                if w != 0.0 {
                    decays.push(DecayChannel {
                        upper: u,
                        lower: l,
                        rate: rates.total_decay * branch * w * w,
                        relative_amplitude: w,
                    });
                }
            }
        }
    }

    let mut couplings = Vec::new();
    for (li, laser) in lasers.iter().enumerate() {
        let lower_range = match laser.transition {
            Transition::GroundExcited => s_range.clone(),
            Transition::MetastableExcited => d_range.clone(),
        };
        let strongest = lower_range
            .clone()
            .flat_map(|l| p_range.clone().map(move |u| (l, u)))
            .map(|(l, u)| dipole_weight(&levels[l], &levels[u]).abs())
            .fold(0.0, f64::max);
        let pairs: Vec<(usize, usize)> = match &laser.links {
            None => lower_range
                .clone()
                .flat_map(|l| p_range.clone().map(move |u| (l, u)))
                .collect(),
            Some(links) => {
                let mut out = Vec::new();
                for (ll, ul) in links {
                    let find = |label: &str| {
                        levels
                            .iter()
                            .position(|x| x.label == label)
                            .ok_or_else(|| Error::validation(format!("unknown level {label}")))
                    };
                    let (l, u) = (find(ll)?, find(ul)?);
                    if !laser.transition.accepts_lower(levels[l].manifold) || !levels[u].manifold.is_excited() {
                        return Err(Error::validation(format!(
                            "laser {} cannot drive {ll} -> {ul}",
                            laser.name
                        )));
                    }
                    let tq = levels[u].twice_mj - levels[l].twice_mj;
                    if tq.abs() > 2 || laser.polarization.amplitude(tq / 2) == ZERO {
                        return Err(Error::validation(format!(
                            "laser {}: link {ll} -> {ul} has Δm = {}/2, not in its polarization",
                            laser.name, tq
                        )));
                    }
                    out.push((l, u));
                }
                out
            }
        };
        for (l, u) in pairs {
            let tq = levels[u].twice_mj - levels[l].twice_mj;
            if tq.abs() > 2 {
                continue;
            }
            let w = laser.polarization.amplitude(tq / 2) * dipole_weight(&levels[l], &levels[u]) / strongest;
            if w != ZERO {
                couplings.push(Coupling {
                    laser: li,
                    lower: l,
                    upper: u,
                    weight: w,
                });
            }
        }
    }

    let max_lw = |t: Transition| {
        lasers
            .iter()
            .filter(|l| l.transition == t)
            .map(|l| l.linewidth)
            .fold(0.0, f64::max)
    };
    let (green_lw, red_lw) = (max_lw(Transition::GroundExcited), max_lw(Transition::MetastableExcited));
    let mut dephasing = Vec::new();
    if green_lw > 0.0 {
        dephasing.extend(p_range.clone().map(|level| Dephasing { level, rate: green_lw }));
    }
    let sd = rates.ground_dephasing + rates.motional_dephasing + raman_dephasing(green_lw, red_lw);
    if sd > 0.0 {
        dephasing.extend(d_range.clone().map(|level| Dephasing { level, rate: 2.0 * sd }));
    }

    let mut transfers = Vec::new();
    if rates.sublevel_mixing > 0.0 {
        for range in [s_range.clone(), d_range.clone()] {
            for from in range.clone() {
                for to in range.clone().filter(|&t| t != from) {
                    transfers.push(Transfer {
                        from,
                        to,
                        rate: rates.sublevel_mixing,
                    });
                }
            }
        }
    }

    let probe = lasers.iter().position(|l| l.transition == Transition::GroundExcited);
    let control = lasers.iter().position(|l| l.transition == Transition::MetastableExcited);
    Ok(LevelScheme {
        kind: SchemeKind::Barium8,
        levels,
        decays,
        dephasing,
        transfers,
        bfield,
        lasers,
        couplings,
        probe,
        control,
        collection: 1.0,
        params: SchemeParams::Barium8 { rates },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    const TWO_PI: f64 = 2.0 * PI;

    fn green(rabi: f64, detuning: f64) -> LaserField {
        LaserField::new("green", Transition::GroundExcited, rabi, detuning)
            .with_polarization(Polarization::linear_perpendicular())
    }

    fn red(rabi: f64, detuning: f64) -> LaserField {
        LaserField::new("red", Transition::MetastableExcited, rabi, detuning)
            .with_polarization(Polarization::linear_perpendicular())
    }

    #[test]
    fn clebsch_gordan_known_values() {
        // ⟨1/2 1/2; 1 0 | 1/2 1/2⟩ = 1/√3, ⟨1/2 −1/2; 1 1 | 1/2 1/2⟩ = −√(2/3)
        assert!((clebsch_gordan(1, 1, 2, 0, 1, 1) - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!((clebsch_gordan(1, -1, 2, 2, 1, 1) + (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
        // D3/2 → P1/2(+1/2): 1/2, 1/3, 1/6
        let sq = |tm: i32| clebsch_gordan(3, tm, 2, 1 - tm, 1, 1).powi(2);
        assert!((sq(3) - 0.5).abs() < 1e-14);
        assert!((sq(1) - 1.0 / 3.0).abs() < 1e-14);
        assert!((sq(-1) - 1.0 / 6.0).abs() < 1e-14);
        assert_eq!(sq(-3), 0.0);
    }

    #[test]
    fn two_level_rejects_bad_gamma() {
        let l = LaserField::new("p", Transition::GroundExcited, 1.0, 0.0);
        assert!(matches!(build_two_level(0.0, l.clone()), Err(Error::Validation(_))));
        assert!(matches!(build_two_level(-1.0, l), Err(Error::Validation(_))));
    }

    #[test]
    fn two_level_stores_population_rate() {
        let s = build_two_level(3.0, LaserField::new("p", Transition::GroundExcited, 0.0, 0.0)).unwrap();
        assert_eq!(s.decays.len(), 1);
        assert_eq!(s.decays[0].rate, 6.0);
        assert_eq!(s.gamma(), 3.0);
    }

    #[test]
    fn lambda_rejects_same_leg() {
        let p = LaserField::new("p", Transition::GroundExcited, 1.0, 0.0);
        let c = LaserField::new("c", Transition::GroundExcited, 1.0, 0.0);
        assert!(matches!(build_lambda3(1.0, 1.0, 0.0, p, c), Err(Error::Validation(_))));
    }

    #[test]
    fn quadrature_linewidth_of_80_and_20_khz_lasers() {
        let lw = raman_linewidth(TWO_PI * 80e3, TWO_PI * 20e3);
        assert!((lw / TWO_PI - 82.462e3).abs() < 1.0);
        assert!((raman_dephasing(TWO_PI * 80e3, TWO_PI * 20e3) - lw / 2.0).abs() < 1e-9);
    }

    #[test]
    fn saturation_parameter_examples() {
        assert_eq!(saturation_parameter(2.0, 2.0, 0.0).unwrap(), 1.0);
        assert_eq!(saturation_parameter(0.0, 2.0, 5.0).unwrap(), 0.0);
        assert!(saturation_parameter(1.0, 0.0, 0.0).is_err());
        let (gamma, delta) = (TWO_PI * 7.6e6, -TWO_PI * 50e6);
        let omega = rabi_for_saturation(0.1, gamma, delta).unwrap();
        assert!((saturation_parameter(omega, gamma, delta).unwrap() - 0.1).abs() < 1e-14);
    }

    #[test]
    fn barium_structure() {
        let s = build_barium8(3e-4, vec![green(1e7, -1e8), red(1e7, -1e8)], BariumRates::default()).unwrap();
        assert_eq!(s.levels.len(), 8);
        let count = |m: Manifold| s.levels.iter().filter(|l| l.manifold == m).count();
        assert_eq!((count(Manifold::S12), count(Manifold::P12), count(Manifold::D32)), (2, 2, 4));
        // P(±1/2) each reach 2 S and 3 D sublevels.
        assert_eq!(s.decays.len(), 10);
        let mut labels: Vec<_> = s.levels.iter().map(|l| l.label.clone()).collect();
        labels.dedup();
        assert_eq!(labels.len(), 8);
    }

    #[test]
    fn barium_decay_sums_and_cg_normalization() {
        let rates = BariumRates::default();
        let s = build_barium8(5e-4, vec![green(1e7, 0.0)], rates.clone()).unwrap();
        for u in s.excited_levels() {
            assert!((s.total_decay(u) - rates.total_decay).abs() <= 1e-12 * rates.total_decay);
            let mut per_manifold: HashMap<Manifold, f64> = HashMap::new();
            for d in s.decays.iter().filter(|d| d.upper == u) {
                *per_manifold.entry(s.levels[d.lower].manifold).or_default() += d.relative_amplitude.powi(2);
            }
            for (_, w) in per_manifold {
                assert!((w - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zeeman_shifts_odd_in_mj() {
        let s = build_barium8(4e-4, vec![], BariumRates::default()).unwrap();
        for a in &s.levels {
            let partner = s
                .levels
                .iter()
                .find(|b| b.manifold == a.manifold && b.twice_mj == -a.twice_mj)
                .unwrap();
            assert!((a.zeeman_shift + partner.zeeman_shift).abs() < 1e-9);
            let expected = a.gj * a.mj() * BOHR_MAGNETON_OVER_HBAR * 4e-4;
            assert_eq!(a.zeeman_shift, expected);
        }
    }

    #[test]
    fn sigma_plus_green_couples_one_link() {
        let l = LaserField::new("g", Transition::GroundExcited, 1.0, 0.0).with_polarization(Polarization::SIGMA_PLUS);
        let s = build_barium8(0.0, vec![l], BariumRates::default()).unwrap();
        assert_eq!(s.couplings.len(), 1);
        let c = &s.couplings[0];
        assert_eq!(s.levels[c.lower].label, "S1/2(-1/2)");
        assert_eq!(s.levels[c.upper].label, "P1/2(+1/2)");
        // strongest component carries unit weight
        assert!((c.weight.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn explicit_link_violating_selection_rule_rejected() {
        let l = LaserField::new("g", Transition::GroundExcited, 1.0, 0.0)
            .with_polarization(Polarization::PI)
            .with_links(vec![("S1/2(-1/2)".into(), "P1/2(+1/2)".into())]);
        assert!(matches!(
            build_barium8(0.0, vec![l], BariumRates::default()),
            Err(Error::Validation(_))
        ));
        let ok = LaserField::new("g", Transition::GroundExcited, 1.0, 0.0)
            .with_polarization(Polarization::PI)
            .with_links(vec![("S1/2(+1/2)".into(), "P1/2(+1/2)".into())]);
        assert_eq!(build_barium8(0.0, vec![ok], BariumRates::default()).unwrap().couplings.len(), 1);
    }

    #[test]
    fn level_rejects_bad_mj() {
        assert!(Level::new("x", Manifold::S12, 3, 2.0, 0.0).is_err());
        assert!(Level::new("x", Manifold::D32, 2, 0.8, 0.0).is_err());
    }

    #[test]
    fn with_laser_rebuilds() {
        let p = LaserField::new("p", Transition::GroundExcited, 1.0, 0.0);
        let c = LaserField::new("c", Transition::MetastableExcited, 2.0, 0.0);
        let s = build_lambda3(1.0, 0.5, 0.1, p, c).unwrap();
        let off = s.control_off().unwrap();
        assert_eq!(off.lasers[1].rabi, 0.0);
        assert_eq!(off.decays, s.decays);
        let shifted = s.with_laser("c", |l| l.detuning = 3.0).unwrap();
        assert_eq!(shifted.lasers[1].detuning, 3.0);
    }
}
