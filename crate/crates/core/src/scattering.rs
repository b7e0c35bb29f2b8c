//! Probe transmission through the input-output relation
//! `a_out = a_in + i √(2 γ_in) σ`, with `γ_in = ε γ`.
//!
//! Every atomic model is reduced to a dimensionless response `L`, normalized
//! so that a weakly driven two-level atom on resonance gives `L = 1`. The
//! transmitted power fraction is then `T = |1 − 2εL|²`.
//!
//! # Calibrating ε from a measured line
//!
//! A weak probe gives the extinction `4ε(1 − ε)·Re L`, which is a Lorentzian
//! of depth `4ε(1 − ε)` and FWHM `2γ`. An observed depth `D` therefore fixes
//! the effective coupling as the smaller root of `4ε(1 − ε) = D`:
//!
//! ```text
//! ε_eff = (1 − √(1 − D)) / 2
//! ```
//!
//! For D = 1.35 % this gives ε_eff = 0.0033865 (`twolevel_extinction.cfg`),
//! and an 11 MHz line fixes γ = 2π·5.5 MHz. The small ε_eff relative to the
//! aperture value (0.0417 at NA 0.4) absorbs mode mismatch, ion motion and
//! laser linewidth. In a config, use either `epsilon` directly or `na`
//! with `mode_match = ε_eff / ε(NA)`.

use log::warn;

use crate::atom::{LevelScheme, SchemeKind};
use crate::dynamics::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{C64, I, ONE, ZERO};

/// Excited population above which the linear response is flagged.
pub const WEAK_PROBE_LIMIT: f64 = 0.05;
/// |denominator| below which [`lambda_response`] refuses to divide.
pub const LAMBDA_SINGULAR_TOL: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexResponse {
    pub value: C64,
    /// Set when the probe was strong enough that the linear treatment no
    /// longer holds.
    pub nonlinear: bool,
}

impl ComplexResponse {
    pub fn new(value: C64) -> Self {
        Self {
            value,
            nonlinear: false,
        }
    }
}

/// How well the probe couples to the atom's dipole field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingGeometry {
    pub numerical_aperture: Option<f64>,
    /// Solid-angle fraction before the mode-match factor.
    pub epsilon: f64,
    /// Multiplies ε to emulate imperfect polarization and spatial overlap.
    pub mode_match: f64,
}

impl CouplingGeometry {
    pub fn from_na(na: f64, mode_match: f64) -> Result<Self> {
        check_mode_match(mode_match)?;
        Ok(Self {
            numerical_aperture: Some(na),
            epsilon: epsilon_from_na(na)?,
            mode_match,
        })
    }

    pub fn from_epsilon(epsilon: f64, mode_match: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_mode_match(mode_match)?;
        Ok(Self {
            numerical_aperture: None,
            epsilon,
            mode_match,
        })
    }

    /// ε · mode_match.
    pub fn effective_epsilon(&self) -> f64 {
        self.epsilon * self.mode_match
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && (0.0..=0.5).contains(&epsilon) {
        Ok(())
    } else {
        Err(Error::validation(format!("epsilon must lie in [0, 0.5], got {epsilon}")))
    }
}

fn check_mode_match(mode_match: f64) -> Result<()> {
    if mode_match.is_finite() && (0.0..=1.0).contains(&mode_match) {
        Ok(())
    } else {
        Err(Error::validation(format!("mode_match must lie in [0, 1], got {mode_match}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransmissionPoint {
    pub transmission: f64,
    pub extinction: f64,
    /// arg(1 − 2εL), radians.
    pub phase_shift: f64,
    /// Detected photons per second; filled in by callers that know ρ.
    pub fluorescence_rate: f64,
}

/// Solid-angle fraction of a cone with half-angle arcsin(NA).
pub fn epsilon_from_na(na: f64) -> Result<f64> {
    if !(na.is_finite() && na > 0.0 && na <= 1.0) {
        return Err(Error::validation(format!("numerical aperture must lie in (0, 1], got {na}")));
    }
    Ok((1.0 - (1.0 - na * na).sqrt()) / 2.0)
}

/// γ / (γ + iΔ).
pub fn two_level_response(delta: f64, gamma: f64) -> Result<ComplexResponse> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::validation(format!("gamma must be > 0, got {gamma}")));
    }
    Ok(ComplexResponse::new(gamma / C64::new(gamma, delta)))
}

/// Λ-system response
///
/// ```text
/// L = γ (γ₀ − iδ) / ((γ₀ − iδ)(γ + iΔ_g) + Ω_r²)
/// ```
///
/// Here `omega_r` is the coupling that appears squared in the denominator,
/// i.e. half the Rabi frequency used by the Hamiltonian, and `delta2` enters
/// with the sign written above. [`analytic_response`] maps scheme parameters
/// onto these arguments.
pub fn lambda_response(
    delta2: f64,
    delta_g: f64,
    omega_r: f64,
    gamma: f64,
    gamma0: f64,
) -> Result<ComplexResponse> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::validation(format!("gamma must be > 0, got {gamma}")));
    }
    if !(gamma0.is_finite() && gamma0 >= 0.0) {
        return Err(Error::validation(format!("gamma0 must be >= 0, got {gamma0}")));
    }
    if !(omega_r.is_finite() && omega_r >= 0.0) {
        return Err(Error::validation(format!("omega_r must be >= 0, got {omega_r}")));
    }
    if omega_r == 0.0 {
        // The ground-coherence factor cancels exactly.
        return two_level_response(delta_g, gamma);
    }
    let ground = C64::new(gamma0, -delta2);
    let denom = ground * C64::new(gamma, delta_g) + omega_r * omega_r;
    if denom.norm() < LAMBDA_SINGULAR_TOL {
        return Err(Error::Singular {
            pivot: 0,
            magnitude: denom.norm(),
        });
    }
    Ok(ComplexResponse::new(gamma * ground / denom))
}

/// T = |1 − 2εL|², phase = arg(1 − 2εL).
pub fn transmission(epsilon: f64, response: ComplexResponse) -> Result<TransmissionPoint> {
    check_epsilon(epsilon)?;
    let field = ONE - 2.0 * epsilon * response.value;
    let t = field.norm_sqr();
    Ok(TransmissionPoint {
        transmission: t,
        extinction: 1.0 - t,
        phase_shift: field.arg(),
        fluorescence_rate: 0.0,
    })
}

fn dephasing_of(scheme: &LevelScheme, level: usize) -> f64 {
    scheme
        .dephasing
        .iter()
        .filter(|d| d.level == level)
        .map(|d| d.rate)
        .sum()
}

/// Closed-form response for two-level and Λ schemes.
///
/// The scheme's Hamiltonian puts −(Δ_g − Δ_r) on the metastable level, which
/// makes the closed form's two-photon argument Δ_r − Δ_g, and its coupling
/// Ω_r the Hamiltonian matrix element Ω_control / 2. Pure dephasing on the
/// excited level widens the probe coherence to γ_c and is carried through as
/// `(γ / γ_c) · L(γ_c)`.
pub fn analytic_response(scheme: &LevelScheme) -> Result<ComplexResponse> {
    let probe = scheme
        .probe_laser()
        .ok_or_else(|| Error::validation("scheme has no probe laser"))?;
    let gamma = scheme.gamma();
    match scheme.kind {
        SchemeKind::TwoLevel => {
            let gamma_c = gamma + (dephasing_of(scheme, 0) + dephasing_of(scheme, 1)) / 2.0;
            let l = two_level_response(probe.detuning, gamma_c)?;
            Ok(ComplexResponse::new(l.value * (gamma / gamma_c)))
        }
        SchemeKind::Lambda3 => {
            let control = scheme
                .control_laser()
                .ok_or_else(|| Error::validation("lambda scheme has no control laser"))?;
            let gamma_c = gamma + (dephasing_of(scheme, 0) + dephasing_of(scheme, 1)) / 2.0;
            let gamma0 = (dephasing_of(scheme, 0) + dephasing_of(scheme, 2)) / 2.0;
            let l = lambda_response(
                control.detuning - probe.detuning,
                probe.detuning,
                control.rabi / 2.0,
                gamma_c,
                gamma0,
            )?;
            Ok(ComplexResponse::new(l.value * (gamma / gamma_c)))
        }
        SchemeKind::Barium8 => Err(Error::validation(
            "no closed form for the eight-level scheme; use the numeric engine",
        )),
    }
}

/// Excited population from the closed forms: exact for two levels, the
/// weak-probe estimate |ρ_ge|² for Λ.
pub fn analytic_excited_population(scheme: &LevelScheme) -> Result<f64> {
    let probe = scheme
        .probe_laser()
        .ok_or_else(|| Error::validation("scheme has no probe laser"))?;
    let gamma = scheme.gamma();
    match scheme.kind {
        SchemeKind::TwoLevel => {
            let gamma_c = gamma + (dephasing_of(scheme, 0) + dephasing_of(scheme, 1)) / 2.0;
            let big_gamma = 2.0 * gamma;
            let a = probe.rabi * probe.rabi / 2.0 * gamma_c
                / (big_gamma * (gamma_c * gamma_c + probe.detuning * probe.detuning));
            Ok(a / (1.0 + 2.0 * a))
        }
        SchemeKind::Lambda3 => {
            let l = analytic_response(scheme)?;
            let coherence = l.value * (probe.rabi / (2.0 * gamma));
            Ok(coherence.norm_sqr())
        }
        SchemeKind::Barium8 => Err(Error::validation("no closed form for the eight-level scheme")),
    }
}

fn excited_population(rho: &DensityMatrix, scheme: &LevelScheme) -> f64 {
    scheme.excited_levels().map(|u| rho.population(u)).sum()
}

/// Response from a steady-state density matrix:
///
/// `L = (2γ / (iΩ_p)) · Σ_links weight · ρ_lower,upper`
///
/// over the links the probe drives. A weakly driven two-level atom returns
/// γ/(γ + iΔ) exactly.
pub fn response_from_steady_state(rho: &DensityMatrix, scheme: &LevelScheme) -> Result<ComplexResponse> {
    let probe_idx = scheme
        .probe
        .ok_or_else(|| Error::validation("scheme has no probe laser"))?;
    let probe = &scheme.lasers[probe_idx];
    if probe.rabi <= 0.0 {
        return Err(Error::validation("probe Rabi frequency is zero; response undefined"));
    }
    if rho.dim() != scheme.dim() {
        return Err(Error::Dimension(format!(
            "state of dimension {} for a {}-level scheme",
            rho.dim(),
            scheme.dim()
        )));
    }
    let gamma = scheme.gamma();
    let sum: C64 = scheme
        .couplings
        .iter()
        .filter(|c| c.laser == probe_idx)
        .map(|c| c.weight * rho.coherence(c.lower, c.upper))
        .fold(ZERO, |a, b| a + b);
    let value = sum * (2.0 * gamma) / (I * probe.rabi);
    let pe = excited_population(rho, scheme);
    let nonlinear = pe > WEAK_PROBE_LIMIT;
    if nonlinear {
        warn!(
            "probe {} leaves {:.3} of the population excited; linear response is approximate",
            probe.name, pe
        );
    }
    Ok(ComplexResponse { value, nonlinear })
}

/// Σ over excited sublevels of population × Γ_total × collection, photons/s.
pub fn fluorescence_rate(rho: &DensityMatrix, scheme: &LevelScheme) -> f64 {
    scheme
        .excited_levels()
        .map(|u| rho.population(u) * scheme.total_decay(u))
        .sum::<f64>()
        * scheme.collection
}

/// Fluorescence in units of the excited-state decay rate 2γ: the excited
/// population, weighted by collection, for a two-level atom.
pub fn relative_fluorescence(rho: &DensityMatrix, scheme: &LevelScheme) -> f64 {
    fluorescence_rate(rho, scheme) / (2.0 * scheme.gamma())
}
