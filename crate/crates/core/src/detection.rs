//! Chopped-repumper lock-in detection.
//!
//! The repumper is switched on for a fraction `duty` of every chop period.
//! The detector sees the transmitted probe plus, optionally, a fraction of
//! the ion's fluorescence. Its output is multiplied by a unit square-wave
//! reference and averaged over whole periods. Fluorescence rises while the
//! repumper is on but transmitted power falls, so the two channels come out
//! of the demodulator with opposite signs.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::atom::LevelScheme;
use crate::dynamics::{build_liouvillian, evolve_observed, steady_state, DensityMatrix, Liouvillian};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::scattering::{relative_fluorescence, response_from_steady_state, transmission, CouplingGeometry};

/// Relaxation times, in units of 1/γ_min, allowed for the atom to settle.
pub const RELAXATION_LIFETIMES: f64 = 10.0;
/// Settling must fit in this fraction of a half period to count as quasi-static.
pub const QUASI_STATIC_FRACTION: f64 = 0.1;
/// Grid points of the coarse phase search in [`calibrate_phase`].
const PHASE_GRID: usize = 360;
/// Target resolution of the refined phase, radians.
const PHASE_RESOLUTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LockInMode {
    /// Quasi-static when the atom settles quickly, transient otherwise.
    #[default]
    Auto,
    /// Two steady states only; slow relaxation is a stiffness error.
    QuasiStatic,
    /// Always integrate the settling transient at each switching edge.
    Transient,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChopperConfig {
    /// Chop frequency, Hz.
    pub frequency: f64,
    /// Fraction of each period with the repumper on.
    pub duty: f64,
    /// Reference phase of the demodulator, radians.
    pub demod_phase: f64,
    /// Number of chop periods averaged by the low-pass filter.
    pub lowpass_cycles: usize,
    /// Phase at which the repumper switches on, radians.
    pub chopper_phase: f64,
    pub mode: LockInMode,
}

impl Default for ChopperConfig {
    fn default() -> Self {
        Self {
            frequency: 600.0,
            duty: 0.5,
            demod_phase: 0.0,
            lowpass_cycles: 1,
            chopper_phase: 0.0,
            mode: LockInMode::Auto,
        }
    }
}

impl ChopperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(Error::validation(format!("chop frequency must be > 0, got {}", self.frequency)));
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(Error::validation(format!("duty must lie in (0, 1), got {}", self.duty)));
        }
        if self.lowpass_cycles == 0 {
            return Err(Error::validation("lowpass_cycles must be >= 1"));
        }
        if !(self.demod_phase.is_finite() && self.chopper_phase.is_finite()) {
            return Err(Error::validation("phases must be finite"));
        }
        Ok(())
    }
}

/// Photon-counting noise; used for illustration only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShotNoise {
    /// Mean detected photons per half period for unit detector power.
    pub photons_per_unit: f64,
    pub seed: u64,
}

/// Detector powers are dimensionless, in units of the incident probe power.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detector {
    /// Probe power reaching the atom; 0 turns the probe channel off.
    pub probe_power: f64,
    /// Fraction of the relative fluorescence that reaches the detector.
    pub forward_fluorescence: f64,
    pub shot_noise: Option<ShotNoise>,
}

impl Default for Detector {
    fn default() -> Self {
        Self {
            probe_power: 1.0,
            forward_fluorescence: 0.0,
            shot_noise: None,
        }
    }
}

impl Detector {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("probe_power", self.probe_power),
            ("forward_fluorescence", self.forward_fluorescence),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if let Some(n) = self.shot_noise {
            if !(n.photons_per_unit.is_finite() && n.photons_per_unit > 0.0) {
                return Err(Error::validation("shot-noise photon scale must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LockInResult {
    /// Demodulated signal, in units of the probe power.
    pub dc_signal: f64,
    /// Magnitude of the fluorescence channel alone.
    pub fluorescence_component: f64,
    /// Magnitude of the transmitted-probe channel alone.
    pub extinction_component: f64,
    /// True when the atom settles within a small fraction of a half period.
    pub settled: bool,
}

/// Detector reading split into its two channels.
#[derive(Clone, Copy, Debug, Default)]
struct Reading {
    probe: f64,
    fluorescence: f64,
}

impl Reading {
    fn scaled(self, w: f64) -> Self {
        Self {
            probe: self.probe * w,
            fluorescence: self.fluorescence * w,
        }
    }

    fn add(self, o: Self) -> Self {
        Self {
            probe: self.probe + o.probe,
            fluorescence: self.fluorescence + o.fluorescence,
        }
    }

    fn total(self) -> f64 {
        self.probe + self.fluorescence
    }
}

fn detector_reading(
    rho: &DensityMatrix,
    scheme: &LevelScheme,
    geometry: &CouplingGeometry,
    detector: &Detector,
) -> Result<Reading> {
    let probe = if detector.probe_power == 0.0 {
        0.0
    } else {
        let l = response_from_steady_state(rho, scheme)?;
        detector.probe_power * transmission(geometry.effective_epsilon(), l)?.transmission
    };
    Ok(Reading {
        probe,
        fluorescence: detector.forward_fluorescence * relative_fluorescence(rho, scheme),
    })
}

/// Antiderivative of the unit square-wave reference, in cycles: the
/// reference is +1 on [0, ½) and −1 on [½, 1) of each period.
fn reference_integral(x: f64) -> f64 {
    let u = x - x.floor();
    if u < 0.5 {
        u
    } else {
        1.0 - u
    }
}

/// ∫ reference over [a, b] (cycle units) with the reference delayed by `phase` cycles.
fn reference_over(a: f64, b: f64, phase: f64) -> f64 {
    reference_integral(b - phase) - reference_integral(a - phase)
}

struct Arm {
    liouvillian: Liouvillian,
    steady: DensityMatrix,
    reading: Reading,
}

fn prepare(scheme: &LevelScheme, geometry: &CouplingGeometry, detector: &Detector) -> Result<Arm> {
    let liouvillian = build_liouvillian(scheme)?;
    let steady = steady_state(&liouvillian)?;
    let reading = detector_reading(&steady, scheme, geometry, detector)?;
    Ok(Arm {
        liouvillian,
        steady,
        reading,
    })
}

/// Lock-in measurement with the default detector: probe on, no forward
/// fluorescence.
pub fn lockin_measure(
    scheme_on: &LevelScheme,
    scheme_off: &LevelScheme,
    chopper: &ChopperConfig,
    geometry: &CouplingGeometry,
) -> Result<LockInResult> {
    lockin_measure_with(scheme_on, scheme_off, chopper, geometry, &Detector::default())
}

/// Demodulated detector signal for a repumper chopped between `scheme_on`
/// and `scheme_off`.
pub fn lockin_measure_with(
    scheme_on: &LevelScheme,
    scheme_off: &LevelScheme,
    chopper: &ChopperConfig,
    geometry: &CouplingGeometry,
    detector: &Detector,
) -> Result<LockInResult> {
    chopper.validate()?;
    detector.validate()?;
    if scheme_on.dim() != scheme_off.dim() {
        return Err(Error::Dimension(format!(
            "repumper-on scheme has {} levels, repumper-off scheme {}",
            scheme_on.dim(),
            scheme_off.dim()
        )));
    }
    let on = prepare(scheme_on, geometry, detector)?;
    let off = prepare(scheme_off, geometry, detector)?;

    let gamma_min = scheme_on.min_relaxation_rate().min(scheme_off.min_relaxation_rate());
    let settle_time = RELAXATION_LIFETIMES / gamma_min;
    let period = 1.0 / chopper.frequency;
    let shortest_half = period * chopper.duty.min(1.0 - chopper.duty);
    let settled = settle_time <= QUASI_STATIC_FRACTION * shortest_half;

    let transient = match chopper.mode {
        LockInMode::Auto => !settled,
        LockInMode::QuasiStatic if !settled => {
            return Err(Error::Stiffness(format!(
                "atomic settling time {settle_time:e} s exceeds {QUASI_STATIC_FRACTION} of the \
                 {shortest_half:e} s half period and transients are disabled"
            )))
        }
        LockInMode::QuasiStatic => false,
        LockInMode::Transient => true,
    };

    let start = chopper.chopper_phase / (2.0 * PI);
    let phase = chopper.demod_phase / (2.0 * PI);
    let windows = [
        (&on, scheme_on, start, start + chopper.duty),
        (&off, scheme_off, start + chopper.duty, start + 1.0),
    ];

    let mut noise = detector
        .shot_noise
        .map(|n| (n, ChaCha8Rng::seed_from_u64(n.seed)));

    let mut sum = Reading::default();
    let mut state = off.steady.clone();
    for cycle in 0..chopper.lowpass_cycles {
        let offset = cycle as f64;
        for (arm, scheme, a, b) in windows {
            let (a, b) = (a + offset, b + offset);
            let mut contribution = Reading::default();
            let mut settled_from = a;
            if transient {
                let duration = (settle_time.min((b - a) * period)).max(0.0);
                let mut prev: Option<(f64, Reading)> = None;
                let mut failure = None;
                let end = evolve_observed(
                    &arm.liouvillian,
                    &state,
                    duration,
                    duration / 16.0 + f64::MIN_POSITIVE,
                    |t, m: &ComplexMatrix| {
                        if failure.is_some() {
                            return;
                        }
                        let rho = DensityMatrix::from_matrix_unchecked(m.clone());
                        match detector_reading(&rho, scheme, geometry, detector) {
                            Ok(r) => {
                                let x = a + t / period;
                                if let Some((x0, r0)) = prev {
                                    let w = reference_over(x0, x, phase);
                                    contribution = contribution.add(r0.add(r).scaled(0.5 * w));
                                }
                                prev = Some((x, r));
                            }
                            Err(e) => failure = Some(e),
                        }
                    },
                )?;
                if let Some(e) = failure {
                    return Err(e);
                }
                settled_from = a + duration / period;
                state = if settled_from < b { arm.steady.clone() } else { end };
            } else {
                state = arm.steady.clone();
            }
            if settled_from < b {
                contribution = contribution.add(arm.reading.scaled(reference_over(settled_from, b, phase)));
            }
            if let Some((n, rng)) = noise.as_mut() {
                // Counting fluctuation around the settled level of this window.
                let level = arm.reading.total() * n.photons_per_unit;
                let counts = if level > 0.0 {
                    Poisson::new(level)
                        .map_err(|e| Error::validation(format!("shot noise: {e}")))?
                        .sample(rng)
                } else {
                    0.0
                };
                let noisy = counts / n.photons_per_unit - arm.reading.total();
                contribution.probe += noisy * reference_over(a, b, phase);
            }
            sum = sum.add(contribution);
        }
    }
    let avg = sum.scaled(1.0 / chopper.lowpass_cycles as f64);
    Ok(LockInResult {
        dc_signal: avg.total(),
        fluorescence_component: avg.fluorescence.abs(),
        extinction_component: avg.probe.abs(),
        settled,
    })
}

/// Demodulator phase that maximizes the fluorescence-only signal of
/// `scheme_fluorescence` chopped against its repumper-off copy.
pub fn calibrate_phase(scheme_fluorescence: &LevelScheme, chopper: &ChopperConfig) -> Result<f64> {
    chopper.validate()?;
    let off = scheme_fluorescence.control_off()?;
    let detector = Detector {
        probe_power: 0.0,
        forward_fluorescence: 1.0,
        shot_noise: None,
    };
    // ε does not enter with the probe channel off.
    let geometry = CouplingGeometry::from_epsilon(0.0, 1.0)?;
    let on_reading = prepare(scheme_fluorescence, &geometry, &detector)?.reading.total();
    let off_reading = prepare(&off, &geometry, &detector)?.reading.total();
    let scale = on_reading.abs().max(off_reading.abs());
    if scale == 0.0 || (on_reading - off_reading).abs() <= 1e-12 * scale {
        return Err(Error::Calibration(
            "the repumper does not modulate the fluorescence".into(),
        ));
    }
    let measure = |phi: f64| -> Result<f64> {
        let c = ChopperConfig {
            demod_phase: phi,
            lowpass_cycles: 1,
            ..*chopper
        };
        Ok(lockin_measure_with(scheme_fluorescence, &off, &c, &geometry, &detector)?.dc_signal)
    };

    let step = 2.0 * PI / PHASE_GRID as f64;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..PHASE_GRID {
        let phi = k as f64 * step;
        let v = measure(phi)?;
        if v > best.1 {
            best = (phi, v);
        }
    }
    if best.1 <= 0.0 {
        return Err(Error::Calibration("no phase yields a positive signal".into()));
    }
    // Golden-section refinement around the best grid point.
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let (mut f1, mut f2) = (measure(x1)?, measure(x2)?);
    while hi - lo > PHASE_RESOLUTION {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = measure(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = measure(x2)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    let phi = if measure(mid)? >= best.1 { mid } else { best.0 };
    Ok(phi.rem_euclid(2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::{build_lambda3, LaserField, Transition};

    const GAMMA: f64 = 2.0 * PI * 10e6;

    fn ion(probe_rabi: f64, repump_rabi: f64) -> LevelScheme {
        build_lambda3(
            0.75 * GAMMA,
            0.25 * GAMMA,
            2.0 * PI * 50e3,
            LaserField::new("cool", Transition::GroundExcited, probe_rabi, -GAMMA),
            LaserField::new("repump", Transition::MetastableExcited, repump_rabi, 0.5 * GAMMA),
        )
        .unwrap()
    }

    fn geometry() -> CouplingGeometry {
        CouplingGeometry::from_epsilon(0.02, 1.0).unwrap()
    }

    #[test]
    fn reference_integral_is_triangle() {
        assert_eq!(reference_over(0.0, 0.5, 0.0), 0.5);
        assert_eq!(reference_over(0.5, 1.0, 0.0), -0.5);
        assert_eq!(reference_over(0.0, 1.0, 0.0), 0.0);
        assert!((reference_over(0.0, 0.5, 0.25) - 0.0).abs() < 1e-15);
        assert_eq!(reference_over(2.0, 2.25, 0.0), 0.25);
    }

    #[test]
    fn chopper_validation() {
        let ok = ChopperConfig::default();
        assert!(ok.validate().is_ok());
        assert!(ChopperConfig { duty: 1.0, ..ok }.validate().is_err());
        assert!(ChopperConfig { frequency: 0.0, ..ok }.validate().is_err());
        assert!(ChopperConfig { lowpass_cycles: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn no_modulation_gives_zero() {
        let s = ion(0.2 * GAMMA, 0.5 * GAMMA);
        let r = lockin_measure(&s, &s, &ChopperConfig::default(), &geometry()).unwrap();
        assert!(r.dc_signal.abs() <= 1e-12);
        assert!(r.settled);
    }

    #[test]
    fn extinction_is_negative_fluorescence_positive() {
        let on = ion(0.2 * GAMMA, 0.5 * GAMMA);
        let off = on.control_off().unwrap();
        let chopper = ChopperConfig::default();
        let ext = lockin_measure(&on, &off, &chopper, &geometry()).unwrap();
        assert!(ext.dc_signal < 0.0, "{ext:?}");
        let fl = lockin_measure_with(
            &on,
            &off,
            &chopper,
            &geometry(),
            &Detector {
                probe_power: 0.0,
                forward_fluorescence: 1.0,
                shot_noise: None,
            },
        )
        .unwrap();
        assert!(fl.dc_signal > 0.0);
    }

    #[test]
    fn calibration_recovers_constructed_offsets() {
        let on = ion(0.2 * GAMMA, 0.5 * GAMMA);
        let phi0 = calibrate_phase(&on, &ChopperConfig::default()).unwrap();
        assert!(phi0.min(2.0 * PI - phi0) < 2e-3, "{phi0}");
        let shifted = ChopperConfig {
            chopper_phase: PI / 2.0,
            ..Default::default()
        };
        let phi = calibrate_phase(&on, &shifted).unwrap();
        assert!((phi - PI / 2.0).abs() < 2e-3, "{phi}");
    }

    #[test]
    fn calibration_rejects_unmodulated_fluorescence() {
        let on = ion(0.2 * GAMMA, 0.0);
        assert!(matches!(
            calibrate_phase(&on, &ChopperConfig::default()),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn quasi_static_mode_refuses_slow_atoms() {
        let on = ion(0.2 * GAMMA, 0.5 * GAMMA);
        let off = on.control_off().unwrap();
        let fast = ChopperConfig {
            frequency: 1e6,
            mode: LockInMode::QuasiStatic,
            ..Default::default()
        };
        assert!(matches!(
            lockin_measure(&on, &off, &fast, &geometry()),
            Err(Error::Stiffness(_))
        ));
    }

    #[test]
    fn transient_correction_shrinks_with_chop_period() {
        let on = ion(0.2 * GAMMA, 0.5 * GAMMA);
        let off = on.control_off().unwrap();
        let gap = |frequency: f64| {
            let base = ChopperConfig {
                frequency,
                ..Default::default()
            };
            let qs = lockin_measure(&on, &off, &base, &geometry()).unwrap();
            let tr = lockin_measure(
                &on,
                &off,
                &ChopperConfig {
                    mode: LockInMode::Transient,
                    ..base
                },
                &geometry(),
            )
            .unwrap();
            assert!(qs.settled);
            (qs.dc_signal - tr.dc_signal).abs() / qs.dc_signal.abs()
        };
        let (fast, slow) = (gap(600.0), gap(60.0));
        assert!(fast < 0.02, "{fast}");
        assert!(slow < 0.2 * fast, "{slow} vs {fast}");
    }

    #[test]
    fn shot_noise_is_seeded() {
        let on = ion(0.2 * GAMMA, 0.5 * GAMMA);
        let off = on.control_off().unwrap();
        let det = Detector {
            shot_noise: Some(ShotNoise {
                photons_per_unit: 1e4,
                seed: 7,
            }),
            ..Default::default()
        };
        let c = ChopperConfig {
            lowpass_cycles: 20,
            ..Default::default()
        };
        let a = lockin_measure_with(&on, &off, &c, &geometry(), &det).unwrap();
        let b = lockin_measure_with(&on, &off, &c, &geometry(), &det).unwrap();
        assert_eq!(a, b);
        let clean = lockin_measure(&on, &off, &c, &geometry()).unwrap();
        assert!((a.dc_signal - clean.dc_signal).abs() < 0.05);
    }
}
