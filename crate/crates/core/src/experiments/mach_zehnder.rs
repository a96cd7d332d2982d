//! Balanced Mach-Zehnder interferometer and its delayed-choice variant.
//!
//! A photon enters the upper arm, the first balanced splitter puts it into
//! both arms, the lower arm picks up the phase `χ`, and the second splitter
//! (when in place) recombines the arms onto detectors `D_d` (port 0) and
//! `D_b` (port 1).

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::montecarlo::{Ancilla, CdfSampler, EventRecord, Outcome};
use crate::optics::{balanced_beam_splitter, phase_shifter, Arm};
use crate::quantum::{apply_unitary, born_probabilities, computational_projectors, Factor, Space, StateVector};
use crate::rng::{trial_uniform, Channel};

/// Detector that stays dark in the balanced configuration.
pub const DARK_PORT: usize = 0;
/// Detector that records every photon in the balanced configuration.
pub const BRIGHT_PORT: usize = 1;

/// Whether the second splitter is in place, per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondSplitter {
    Present,
    Absent,
    /// One entry per trial.
    Schedule(Vec<bool>),
    /// Inserted with probability `p_present`, drawn independently per trial.
    Random { p_present: f64 },
}

impl SecondSplitter {
    pub fn fixed(present: bool) -> Self {
        if present {
            SecondSplitter::Present
        } else {
            SecondSplitter::Absent
        }
    }

    fn validate(&self, n_trials: Option<u64>) -> Result<()> {
        match self {
            SecondSplitter::Schedule(s) => match n_trials {
                Some(n) if s.len() as u64 != n => Err(Error::InvalidConfig(format!(
                    "choice schedule has {} entries for {n} trials",
                    s.len()
                ))),
                _ => Ok(()),
            },
            SecondSplitter::Random { p_present } => check_range(
                "p_present",
                *p_present,
                "[0, 1]",
                (0.0..=1.0).contains(p_present),
            ),
            _ => Ok(()),
        }
    }

    /// Configuration chosen for `trial`.
    pub fn choice(&self, trial: u64, seed: u64) -> Result<bool> {
        Ok(match self {
            SecondSplitter::Present => true,
            SecondSplitter::Absent => false,
            SecondSplitter::Schedule(s) => *s.get(trial as usize).ok_or_else(|| {
                Error::InvalidConfig(format!("choice schedule has no entry for trial {trial}"))
            })?,
            SecondSplitter::Random { p_present } => {
                trial_uniform(seed, trial, Channel::Choice) < *p_present
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MzConfig {
    pub bs2: SecondSplitter,
    pub arm_phase: f64,
    /// Seed for the per-trial choice and detection substreams.
    pub choice_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MzProbabilities {
    pub bright: f64,
    pub dark: f64,
}

fn arms_state_after_propagation(chi: f64) -> Result<StateVector> {
    let input = StateVector::labelled(Factor::arms(), "upper")?;
    let propagate = balanced_beam_splitter().then(&phase_shifter(chi, Arm::Lower))?;
    apply_unitary(&propagate, &input)
}

fn detect(arms: &StateVector, bs2_present: bool) -> Result<[f64; 2]> {
    let out = if bs2_present {
        apply_unitary(&balanced_beam_splitter(), arms)?
    } else {
        arms.clone()
    };
    let p = born_probabilities(&out, &computational_projectors(&Space::single(Factor::arms())))?;
    Ok([p[0], p[1]])
}

/// Detection probabilities indexed by port (`DARK_PORT`, `BRIGHT_PORT`).
pub fn mz_port_probabilities(bs2_present: bool, chi: f64) -> Result<[f64; 2]> {
    detect(&arms_state_after_propagation(chi)?, bs2_present)
}

/// Analytic bright/dark probabilities; the second splitter must be fixed.
pub fn mz_probabilities(cfg: &MzConfig) -> Result<MzProbabilities> {
    let present = match cfg.bs2 {
        SecondSplitter::Present => true,
        SecondSplitter::Absent => false,
        _ => {
            return Err(Error::InvalidConfig(
                "analytic probabilities need a fixed second splitter".into(),
            ))
        }
    };
    let p = mz_port_probabilities(present, cfg.arm_phase)?;
    Ok(MzProbabilities {
        bright: p[BRIGHT_PORT],
        dark: p[DARK_PORT],
    })
}

/// Where in the per-trial pipeline the choice bit is materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineOrder {
    /// Before the photon enters the interferometer.
    ChoiceFirst,
    /// After propagation through both arms, just before detection.
    ChoiceLast,
}

/// Logical ticks of the pipeline stages within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub entered: u32,
    pub propagated: u32,
    pub choice: u32,
    pub detected: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayedChoiceEvent {
    pub record: EventRecord,
    pub timeline: Timeline,
}

/// Runs `n_trials` photons. The choice draws on its own substream, so the
/// records depend only on `(choice_seed, trial)` and not on `order`.
pub fn delayed_choice_run(
    cfg: &MzConfig,
    n_trials: u64,
    order: PipelineOrder,
) -> Result<Vec<DelayedChoiceEvent>> {
    cfg.bs2.validate(Some(n_trials))?;
    let seed = cfg.choice_seed;
    // The photon entering the upper arm evolves identically in every trial.
    let arms_template = arms_state_after_propagation(cfg.arm_phase)?;
    (0..n_trials)
        .map(|trial| {
            let mut tick = 0u32;
            let mut next = || {
                tick += 1;
                tick - 1
            };
            let entered = next();
            let (choice, arms, choice_tick, propagated) = match order {
                PipelineOrder::ChoiceFirst => {
                    let c = cfg.bs2.choice(trial, seed)?;
                    let ct = next();
                    let arms = arms_template.clone();
                    (c, arms, ct, next())
                }
                PipelineOrder::ChoiceLast => {
                    let arms = arms_template.clone();
                    let pt = next();
                    (cfg.bs2.choice(trial, seed)?, arms, next(), pt)
                }
            };
            let port = CdfSampler::new(&detect(&arms, choice)?)?
                .sample(trial_uniform(seed, trial, Channel::Detection));
            let record = EventRecord::new(trial, Outcome::Detector(port as u32))
                .with(Ancilla::Choice, choice as u32);
            Ok(DelayedChoiceEvent {
                record,
                timeline: Timeline {
                    entered,
                    propagated,
                    choice: choice_tick,
                    detected: next(),
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn cfg(bs2: SecondSplitter, chi: f64) -> MzConfig {
        MzConfig {
            bs2,
            arm_phase: chi,
            choice_seed: 11,
        }
    }

    #[test]
    fn balanced_is_exactly_dark() {
        let p = mz_probabilities(&cfg(SecondSplitter::Present, 0.0)).unwrap();
        assert_eq!(p.dark, 0.0);
        assert_eq!(p.bright, 1.0);
    }

    #[test]
    fn open_interferometer_splits_evenly() {
        for chi in [0.0, 1.0, PI] {
            let p = mz_probabilities(&cfg(SecondSplitter::Absent, chi)).unwrap();
            assert!((p.dark - 0.5).abs() < 1e-12 && (p.bright - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn pi_phase_swaps_ports() {
        let p = mz_probabilities(&cfg(SecondSplitter::Present, PI)).unwrap();
        assert!(p.bright < 1e-12 && (p.dark - 1.0).abs() < 1e-12);
        let q = mz_probabilities(&cfg(SecondSplitter::Present, FRAC_PI_2)).unwrap();
        assert!((q.bright - 0.5).abs() < 1e-12);
    }

    #[test]
    fn scheduled_choice_needs_fixed_config_for_analytic_form() {
        assert!(mz_probabilities(&cfg(SecondSplitter::Random { p_present: 0.5 }, 0.0)).is_err());
        let short = cfg(SecondSplitter::Schedule(vec![true; 3]), 0.0);
        assert!(delayed_choice_run(&short, 4, PipelineOrder::ChoiceFirst).is_err());
    }

    #[test]
    fn always_present_never_hits_dark() {
        let run = delayed_choice_run(&cfg(SecondSplitter::Present, 0.0), 10_000, PipelineOrder::ChoiceLast).unwrap();
        assert!(run.iter().all(|e| e.record.outcome == Outcome::Detector(BRIGHT_PORT as u32)));
    }

    #[test]
    fn orderings_give_identical_records() {
        let c = cfg(SecondSplitter::Random { p_present: 0.5 }, 0.3);
        let a = delayed_choice_run(&c, 5_000, PipelineOrder::ChoiceFirst).unwrap();
        let b = delayed_choice_run(&c, 5_000, PipelineOrder::ChoiceLast).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.record == y.record));
        assert!(a.iter().all(|e| e.timeline.entered < e.timeline.choice && e.timeline.choice < e.timeline.propagated));
        assert!(b.iter().all(|e| e.timeline.propagated < e.timeline.choice && e.timeline.choice < e.timeline.detected));
    }

    #[test]
    fn absent_branch_splits_evenly() {
        let n = 100_000;
        let run = delayed_choice_run(&cfg(SecondSplitter::Random { p_present: 0.5 }, 0.0), n, PipelineOrder::ChoiceLast).unwrap();
        let absent: Vec<_> = run.iter().filter(|e| e.record.flag(Ancilla::Choice) == Some(0)).collect();
        let dark = absent.iter().filter(|e| e.record.outcome == Outcome::Detector(0)).count() as f64;
        let m = absent.len() as f64;
        assert!((dark / m - 0.5).abs() < 4.0 * (0.25 / m).sqrt());
        let present_dark = run
            .iter()
            .filter(|e| e.record.flag(Ancilla::Choice) == Some(1) && e.record.outcome == Outcome::Detector(0))
            .count();
        assert_eq!(present_dark, 0);
    }

    proptest! {
        #[test]
        fn probabilities_conserved(chi in -10.0f64..10.0, present: bool) {
            let p = mz_port_probabilities(present, chi).unwrap();
            prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
            if present {
                prop_assert!((p[BRIGHT_PORT] - (chi / 2.0).cos().powi(2)).abs() < 1e-12);
            }
        }
    }
}
