//! Two-beam neutron interferometer with an absorber in the left beam.
//!
//! The interferometer is a Mach-Zehnder over the modes `{left, right,
//! absorbed}`: an input splitter with transmittance `ψL²` prepares arm
//! amplitudes `(ψL, iψR)`, the absorber couples the left arm to the absorbed
//! mode, a phase `χ` is applied to the left arm and a balanced splitter
//! recombines the beams. The forward detector then fires with probability
//! `I/2`, where `I` is the closed-form intensity of [`neutron_intensity`].

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::montecarlo::{Ancilla, CdfSampler, EventRecord, Outcome};
use crate::optics::{
    absorber_unitary, balanced_beam_splitter, beam_splitter, chopper_state, phase_shifter,
    stochastic_absorber_amplitude, AbsorberMode, AbsorberSpec, Arm,
};
use crate::quantum::{apply_unitary, basis_probabilities, Factor, Space, StateVector, Subsystem};
use crate::rng::{trial_uniform, Channel};

/// Intensity at the forward detector.
///
/// Stochastic: `aψL² + ψR² + 2√a ψLψR cos χ`.
/// Chopper: `aψL² + ψR² + 2a ψLψR cos χ`.
pub fn neutron_intensity(spec: &AbsorberSpec, psi_l: f64, psi_r: f64, chi: f64) -> f64 {
    let a = spec.transmission;
    let cross = match spec.mode {
        AbsorberMode::Stochastic => a.sqrt(),
        AbsorberMode::DeterministicChopper => a,
    };
    (a * psi_l * psi_l + psi_r * psi_r + 2.0 * cross * psi_l * psi_r * chi.cos()).max(0.0)
}

/// Raw and arm-normalized fringe contrast of [`neutron_intensity`] over `χ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorberVisibility {
    /// `(I_max - I_min)/(I_max + I_min)`.
    pub raw: f64,
    /// Fringe amplitude divided by `2√(I_L I_R)` of the attenuated arms.
    pub normalized: f64,
}

pub fn absorber_visibility(spec: &AbsorberSpec, psi_l: f64, psi_r: f64) -> AbsorberVisibility {
    let a = spec.transmission;
    let cross = match spec.mode {
        AbsorberMode::Stochastic => a.sqrt(),
        AbsorberMode::DeterministicChopper => a,
    };
    let amplitude = 2.0 * cross * psi_l * psi_r;
    let mean = a * psi_l * psi_l + psi_r * psi_r;
    let geometric = 2.0 * (a * psi_l * psi_l * psi_r * psi_r).sqrt();
    AbsorberVisibility {
        raw: if mean > 0.0 { amplitude / mean } else { 0.0 },
        normalized: if geometric > 0.0 { (amplitude / geometric).min(1.0) } else { 0.0 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeutronPort {
    /// Port whose intensity follows the closed forms.
    Forward,
    /// Complementary port, `χ → χ + π`.
    Side,
}

impl NeutronPort {
    pub fn detector_id(self) -> u32 {
        match self {
            NeutronPort::Forward => 0,
            NeutronPort::Side => 1,
        }
    }
}

// Mode indices in the three-mode space.
const LEFT: usize = 0;
const RIGHT: usize = 1;
const ABSORBED: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeutronInterferometer {
    pub spec: AbsorberSpec,
    pub psi_l: f64,
    pub psi_r: f64,
}

/// Outcome distributions for one phase setting, ordered
/// `[forward, side, absorbed]`.
#[derive(Debug, Clone)]
pub struct PreparedNeutron {
    /// Stochastic mode, or chopper open.
    pub open: [f64; 3],
    /// Chopper closed; `None` in stochastic mode.
    pub closed: Option<[f64; 3]>,
    open_sampler: CdfSampler,
    closed_sampler: Option<CdfSampler>,
}

impl NeutronInterferometer {
    pub fn new(spec: AbsorberSpec, psi_l: f64, psi_r: f64) -> Result<Self> {
        check_range("psi_left", psi_l, "[0, inf)", psi_l >= 0.0)?;
        check_range("psi_right", psi_r, "[0, inf)", psi_r >= 0.0)?;
        let norm = psi_l * psi_l + psi_r * psi_r;
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "arm amplitudes must satisfy psi_left² + psi_right² = 1, got {norm}"
            )));
        }
        Ok(NeutronInterferometer { spec, psi_l, psi_r })
    }

    fn space() -> Space {
        Space::single(Factor::new(Subsystem::Path, &["left", "right", "absorbed"]))
    }

    /// Evolves the input neutron with the left arm transmitting amplitude
    /// fraction `sqrt(transmission)` and returns `[forward, side, absorbed]`.
    fn outcome_probabilities(&self, transmission: f64, chi: f64) -> Result<[f64; 3]> {
        let input = StateVector::basis_state(Self::space(), LEFT)?;
        let split = beam_splitter(self.psi_l * self.psi_l)?.padded(3)?;
        let chain = split
            .then(&absorber_unitary(transmission)?)?
            .then(&phase_shifter(chi, Arm::Upper).padded(3)?)?
            .then(&balanced_beam_splitter().padded(3)?)?;
        let p = basis_probabilities(&apply_unitary(&chain, &input)?)?;
        // After recombination the port fed as `right` is the forward detector.
        Ok([p[RIGHT], p[LEFT], p[ABSORBED]])
    }

    pub fn prepare(&self, chi: f64) -> Result<PreparedNeutron> {
        let (open, closed) = match self.spec.mode {
            AbsorberMode::Stochastic => {
                let t = stochastic_absorber_amplitude(&self.spec)?.amplitude.powi(2);
                (self.outcome_probabilities(t, chi)?, None)
            }
            AbsorberMode::DeterministicChopper => (
                self.outcome_probabilities(1.0, chi)?,
                Some(self.outcome_probabilities(0.0, chi)?),
            ),
        };
        Ok(PreparedNeutron {
            open_sampler: CdfSampler::new(&open)?,
            closed_sampler: closed.as_ref().map(|c| CdfSampler::new(c)).transpose()?,
            open,
            closed,
        })
    }

    /// Trial-averaged forward-detector probability; equals `I/2`.
    pub fn forward_probability(&self, chi: f64) -> Result<f64> {
        let p = self.prepare(chi)?;
        Ok(match p.closed {
            None => p.open[0],
            Some(closed) => {
                let a = self.spec.transmission;
                a * p.open[0] + (1.0 - a) * closed[0]
            }
        })
    }

    /// One neutron through a prepared phase setting.
    pub fn trial(&self, prepared: &PreparedNeutron, trial: u64, seed: u64) -> Result<EventRecord> {
        let (sampler, chopper) = match self.spec.mode {
            AbsorberMode::Stochastic => (&prepared.open_sampler, None),
            AbsorberMode::DeterministicChopper => {
                let open = chopper_state(&self.spec, trial, seed)?;
                let s = if open {
                    &prepared.open_sampler
                } else {
                    prepared.closed_sampler.as_ref().expect("chopper mode prepares both states")
                };
                (s, Some(open))
            }
        };
        let k = sampler.sample(trial_uniform(seed, trial, Channel::Detection));
        let outcome = match k {
            0 => Outcome::Detector(NeutronPort::Forward.detector_id()),
            1 => Outcome::Detector(NeutronPort::Side.detector_id()),
            _ => Outcome::Absorbed,
        };
        let mut record = EventRecord::new(trial, outcome).with(Ancilla::Absorbed, (k == 2) as u32);
        if let Some(open) = chopper {
            record = record.with(Ancilla::ChopperOpen, open as u32);
        }
        Ok(record)
    }
}

/// Single neutron trial at phase `χ`.
pub fn neutron_mc_trial(
    spec: &AbsorberSpec,
    psi_l: f64,
    psi_r: f64,
    chi: f64,
    trial: u64,
    seed: u64,
) -> Result<EventRecord> {
    let ni = NeutronInterferometer::new(*spec, psi_l, psi_r)?;
    ni.trial(&ni.prepare(chi)?, trial, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn spec(a: f64, mode: AbsorberMode) -> AbsorberSpec {
        AbsorberSpec::new(a, mode).unwrap()
    }

    #[test]
    fn full_transmission_modes_agree() {
        for chi in [0.0, 1.0, PI] {
            let s = neutron_intensity(&spec(1.0, AbsorberMode::Stochastic), 0.6, 0.8, chi);
            let d = neutron_intensity(&spec(1.0, AbsorberMode::DeterministicChopper), 0.6, 0.8, chi);
            assert_eq!(s, d);
        }
    }

    #[test]
    fn ninety_nine_percent_blocking() {
        let s = neutron_intensity(&spec(0.01, AbsorberMode::Stochastic), 1.0, 1.0, 0.0);
        let d = neutron_intensity(&spec(0.01, AbsorberMode::DeterministicChopper), 1.0, 1.0, 0.0);
        assert!((s - 1.21).abs() < 1e-12);
        assert!((d - 1.03).abs() < 1e-12);
    }

    #[test]
    fn blocked_left_beam_leaves_right_intensity() {
        for mode in [AbsorberMode::Stochastic, AbsorberMode::DeterministicChopper] {
            for chi in [0.0, 0.5, 2.0] {
                assert_eq!(neutron_intensity(&spec(0.0, mode), 0.6, 0.8, chi), 0.8 * 0.8);
            }
        }
    }

    #[test]
    fn operator_chain_reproduces_closed_forms() {
        let h = FRAC_1_SQRT_2;
        for mode in [AbsorberMode::Stochastic, AbsorberMode::DeterministicChopper] {
            for a in [0.0, 0.01, 0.25, 0.5, 1.0] {
                for (pl, pr) in [(h, h), (0.6, 0.8)] {
                    let ni = NeutronInterferometer::new(spec(a, mode), pl, pr).unwrap();
                    for k in 0..8 {
                        let chi = k as f64 * PI / 4.0;
                        let expected = neutron_intensity(&ni.spec, pl, pr, chi) / 2.0;
                        let got = ni.forward_probability(chi).unwrap();
                        assert!((got - expected).abs() < 1e-12, "{mode:?} a={a} chi={chi}");
                    }
                }
            }
        }
    }

    #[test]
    fn absorbed_weight_matches_blocked_fraction() {
        let ni = NeutronInterferometer::new(spec(0.25, AbsorberMode::Stochastic), 0.6, 0.8).unwrap();
        let p = ni.prepare(0.3).unwrap();
        assert!((p.open[2] - 0.75 * 0.36).abs() < 1e-12);
        assert!((p.open.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_transmission_never_absorbs() {
        let ni = NeutronInterferometer::new(spec(1.0, AbsorberMode::Stochastic), FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap();
        let p = ni.prepare(0.7).unwrap();
        assert!((0..20_000).all(|t| ni.trial(&p, t, 5).unwrap().outcome != Outcome::Absorbed));
    }

    #[test]
    fn mc_trials_follow_closed_forms() {
        let h = FRAC_1_SQRT_2;
        let n = 250_000u64;
        for mode in [AbsorberMode::Stochastic, AbsorberMode::DeterministicChopper] {
            let ni = NeutronInterferometer::new(spec(0.25, mode), h, h).unwrap();
            for chi in [0.0, PI / 2.0, PI] {
                let prepared = ni.prepare(chi).unwrap();
                let forward = (0..n)
                    .filter(|&t| {
                        ni.trial(&prepared, t, 17).unwrap().outcome == Outcome::Detector(0)
                    })
                    .count() as f64;
                let p = neutron_intensity(&ni.spec, h, h, chi) / 2.0;
                let sigma = (p * (1.0 - p) / n as f64).sqrt();
                assert!((forward / n as f64 - p).abs() < 3.0 * sigma, "{mode:?} chi={chi}");
            }
        }
    }

    #[test]
    fn rejects_unnormalized_arms() {
        assert!(NeutronInterferometer::new(spec(0.5, AbsorberMode::Stochastic), 1.0, 1.0).is_err());
    }

    #[test]
    fn visibility_estimators() {
        let h = FRAC_1_SQRT_2;
        let s = absorber_visibility(&spec(0.01, AbsorberMode::Stochastic), h, h);
        let d = absorber_visibility(&spec(0.01, AbsorberMode::DeterministicChopper), h, h);
        assert!((s.normalized - 1.0).abs() < 1e-12);
        assert!((d.normalized - 0.1).abs() < 1e-12);
        assert!((s.raw - 0.2 / 1.01).abs() < 1e-12);
        assert!((d.raw - 0.02 / 1.01).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn stochastic_cross_term_dominates(a in 1e-6f64..1.0, pl in 0.0f64..1.0) {
            let pr = (1.0 - pl * pl).sqrt();
            let s = absorber_visibility(&spec(a, AbsorberMode::Stochastic), pl, pr);
            let d = absorber_visibility(&spec(a, AbsorberMode::DeterministicChopper), pl, pr);
            prop_assert!(s.raw >= d.raw);
            let amp_s = neutron_intensity(&spec(a, AbsorberMode::Stochastic), pl, pr, 0.0)
                - neutron_intensity(&spec(a, AbsorberMode::Stochastic), pl, pr, PI / 2.0);
            let amp_d = neutron_intensity(&spec(a, AbsorberMode::DeterministicChopper), pl, pr, 0.0)
                - neutron_intensity(&spec(a, AbsorberMode::DeterministicChopper), pl, pr, PI / 2.0);
            if amp_d > 1e-9 {
                prop_assert!((amp_s / amp_d - 1.0 / a.sqrt()).abs() < 1e-6 / a.sqrt());
            }
        }
    }
}
