//! Polarization-tag quantum eraser on the double slit.
//!
//! Without tags both slits emit `|H⟩`. With tags, slit S1 emits left and S2
//! right circular polarization, which makes the paths distinguishable. An
//! optional polarizer in front of the screen projects the polarization; with
//! post-selection only the transmitted subensemble is kept.

use serde::{Deserialize, Serialize};

use super::double_slit::pattern_from_path;
use super::{Normalization, Provenance, ScreenGrid, ScreenPattern};
use crate::error::{Error, Result};
use crate::montecarlo::{Ancilla, CdfSampler, EventRecord, Outcome};
use crate::optics::{attach_which_path, polarizer_projector, PolarizerSpec, SlitGeometry};
use crate::quantum::{
    density_from_pure, partial_trace, project_onto, Factor, Space, StateVector, Subsystem,
};
use crate::rng::{trial_uniform, Channel};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EraserConfig {
    pub tag_slits: bool,
    pub eraser: Option<PolarizerSpec>,
    pub post_select: bool,
}

impl EraserConfig {
    pub fn validate(&self) -> Result<()> {
        if self.post_select && self.eraser.is_none() {
            return Err(Error::InvalidConfig(
                "post-selection requires an eraser polarizer".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EraserPatterns {
    /// Every photon reaching the screen, per-event normalized.
    pub all: ScreenPattern,
    /// Polarizer-transmitted photons, on the same scale as `all` so that
    /// complementary selections add up to it. Present iff post-selecting.
    pub selected: Option<ScreenPattern>,
    /// Probability that a photon passes the eraser.
    pub selected_fraction: Option<f64>,
}

fn emitted_state(tag_slits: bool) -> Result<StateVector> {
    let one = C64::new(1.0, 0.0);
    let path = StateVector::superposition(Space::single(Factor::slits()), vec![one, one])?;
    let markers = if tag_slits {
        [
            PolarizerSpec::CircularLeft.state(),
            PolarizerSpec::CircularRight.state(),
        ]
    } else {
        let h = PolarizerSpec::linear(0.0).state();
        [h.clone(), h]
    };
    attach_which_path(&path, &markers)
}

fn path_intensities(s: &StateVector, g: &SlitGeometry, grid: &ScreenGrid) -> Result<Vec<f64>> {
    let path = partial_trace(&density_from_pure(s)?, &[Subsystem::Path])?;
    pattern_from_path(&path, g, grid)
}

pub fn eraser_patterns(
    cfg: &EraserConfig,
    g: &SlitGeometry,
    grid: &ScreenGrid,
) -> Result<EraserPatterns> {
    cfg.validate()?;
    let state = emitted_state(cfg.tag_slits)?;
    let all_raw = path_intensities(&state, g, grid)?;
    let total: f64 = all_raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroTotal);
    }
    let all = ScreenPattern::analytic(grid.centers(), all_raw)?;

    let (selected, selected_fraction) = match cfg.eraser {
        Some(spec) => {
            let projector = polarizer_projector(&spec).on_factor(state.space(), Subsystem::Polarization)?;
            let pass = project_onto(&state, &projector, true);
            let (raw, p) = match pass {
                Ok(pass) => {
                    let raw = path_intensities(&pass.collapsed, g, grid)?;
                    (raw.into_iter().map(|v| v * pass.probability).collect(), pass.probability)
                }
                Err(Error::ImpossibleOutcome) => (vec![0.0; grid.bins()], 0.0),
                Err(e) => return Err(e),
            };
            let pattern = cfg
                .post_select
                .then(|| {
                    ScreenPattern::new(
                        grid.centers(),
                        raw.iter().map(|v| v / total).collect(),
                        Normalization::RelativeIntensity,
                        Provenance::Analytic,
                    )
                })
                .transpose()?;
            (pattern, Some(p))
        }
        None => (None, None),
    };
    Ok(EraserPatterns {
        all,
        selected,
        selected_fraction,
    })
}

/// Seeded trial generator for one eraser configuration.
#[derive(Debug, Clone)]
pub struct EraserRun {
    patterns: EraserPatterns,
    screen: CdfSampler,
    pass_given_bin: Option<Vec<f64>>,
}

impl EraserRun {
    pub fn new(cfg: &EraserConfig, g: &SlitGeometry, grid: &ScreenGrid) -> Result<Self> {
        let mut with_selection = *cfg;
        with_selection.post_select = cfg.eraser.is_some();
        let patterns = eraser_patterns(&with_selection, g, grid)?;
        let pass_given_bin = patterns.selected.as_ref().map(|sel| {
            sel.intensities
                .iter()
                .zip(&patterns.all.intensities)
                .map(|(s, a)| if *a > 0.0 { (s / a).clamp(0.0, 1.0) } else { 0.0 })
                .collect()
        });
        let screen = CdfSampler::new(&patterns.all.intensities)?;
        let mut patterns = patterns;
        if !cfg.post_select {
            patterns.selected = None;
        }
        Ok(EraserRun {
            patterns,
            screen,
            pass_given_bin,
        })
    }

    pub fn patterns(&self) -> &EraserPatterns {
        &self.patterns
    }

    /// One photon: the screen bin is drawn from the full pattern and the
    /// eraser outcome from its conditional pass probability at that bin.
    pub fn trial(&self, trial: u64, seed: u64) -> EventRecord {
        let bin = self.screen.sample(trial_uniform(seed, trial, Channel::Screen));
        let position = self.patterns.all.positions[bin];
        let record = EventRecord::new(trial, Outcome::Screen { bin, position });
        match &self.pass_given_bin {
            Some(p) => {
                let pass = trial_uniform(seed, trial, Channel::Polarizer) < p[bin];
                record.with(Ancilla::PolarizerPass, pass as u32)
            }
            None => record,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::fringe_model;
    use crate::montecarlo::estimate_visibility;
    use std::f64::consts::FRAC_PI_4;

    fn setup() -> (SlitGeometry, ScreenGrid) {
        let g = SlitGeometry::new(10.0, 1.0, 10_000.0).unwrap();
        let grid = ScreenGrid::for_geometry(&g);
        (g, grid)
    }

    fn cfg(tag_slits: bool, eraser: Option<PolarizerSpec>, post_select: bool) -> EraserConfig {
        EraserConfig {
            tag_slits,
            eraser,
            post_select,
        }
    }

    #[test]
    fn tags_destroy_fringes() {
        let (g, grid) = setup();
        let p = eraser_patterns(&cfg(true, None, false), &g, &grid).unwrap();
        assert!(estimate_visibility(&p.all, &fringe_model(&g)).unwrap() < 1e-9);
        let q = eraser_patterns(&cfg(false, None, false), &g, &grid).unwrap();
        assert!((estimate_visibility(&q.all, &fringe_model(&g)).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_eraser_restores_fringes() {
        let (g, grid) = setup();
        let p = eraser_patterns(&cfg(true, Some(PolarizerSpec::linear(FRAC_PI_4)), true), &g, &grid)
            .unwrap();
        let sel = p.selected.unwrap();
        assert!((estimate_visibility(&sel, &fringe_model(&g)).unwrap() - 1.0).abs() < 1e-9);
        assert!((p.selected_fraction.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn untagged_eraser_keeps_fringes() {
        let (g, grid) = setup();
        let p = eraser_patterns(&cfg(false, Some(PolarizerSpec::linear(FRAC_PI_4)), true), &g, &grid)
            .unwrap();
        assert!((estimate_visibility(&p.selected.unwrap(), &fringe_model(&g)).unwrap() - 1.0).abs() < 1e-9);
        assert!((p.selected_fraction.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn complementary_selections_sum_to_total() {
        let (g, grid) = setup();
        let plus = eraser_patterns(&cfg(true, Some(PolarizerSpec::linear(FRAC_PI_4)), true), &g, &grid)
            .unwrap();
        let minus = eraser_patterns(&cfg(true, Some(PolarizerSpec::linear(-FRAC_PI_4)), true), &g, &grid)
            .unwrap();
        let sum = plus.selected.unwrap().sum(&minus.selected.unwrap()).unwrap();
        for (s, t) in sum.intensities.iter().zip(&plus.all.intensities) {
            assert!((s - t).abs() < 1e-10);
        }
    }

    #[test]
    fn post_select_needs_eraser() {
        let (g, grid) = setup();
        assert!(eraser_patterns(&cfg(true, None, true), &g, &grid).is_err());
    }

    #[test]
    fn sampled_pass_fraction_is_half() {
        let (g, grid) = setup();
        let run = EraserRun::new(&cfg(true, Some(PolarizerSpec::linear(FRAC_PI_4)), true), &g, &grid)
            .unwrap();
        let n = 100_000u64;
        let passed = (0..n)
            .filter(|&t| run.trial(t, 3).flag(Ancilla::PolarizerPass) == Some(1))
            .count() as f64;
        assert!((passed / n as f64 - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }
}
