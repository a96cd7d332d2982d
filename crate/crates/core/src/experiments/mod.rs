//! Analytic predictions for the canonical interference setups.

mod double_slit;
mod duality;
mod eraser;
mod mach_zehnder;
mod neutron;

pub use double_slit::{
    double_slit_intensity, double_slit_pattern, fringe_model, screen_intensity,
    single_slit_pattern, two_slit_pattern, which_path_trial, WhichPath,
};
pub use duality::{
    duality_params, two_beam_intensity, two_beam_pattern, fringe_visibility_and_w, DualityParams,
};
pub use eraser::{eraser_patterns, EraserConfig, EraserPatterns, EraserRun};
pub use mach_zehnder::{
    delayed_choice_run, mz_port_probabilities, mz_probabilities, DelayedChoiceEvent, MzConfig,
    MzProbabilities, PipelineOrder, SecondSplitter, Timeline, BRIGHT_PORT, DARK_PORT,
};
pub use neutron::{
    absorber_visibility, neutron_intensity, neutron_mc_trial, AbsorberVisibility,
    NeutronInterferometer, NeutronPort, PreparedNeutron,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Intensities are per-event probabilities summing to one.
    PerEventProbability,
    RelativeIntensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    MonteCarlo,
}

/// Tolerance on the unit sum of a per-event probability pattern.
pub const PATTERN_SUM_TOL: f64 = 1e-9;

/// Intensity profile sampled at screen bin centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenPattern {
    pub positions: Vec<f64>,
    pub intensities: Vec<f64>,
    pub normalization: Normalization,
    pub provenance: Provenance,
}

impl ScreenPattern {
    pub fn new(
        positions: Vec<f64>,
        intensities: Vec<f64>,
        normalization: Normalization,
        provenance: Provenance,
    ) -> Result<Self> {
        if positions.len() != intensities.len() {
            return Err(Error::DimensionMismatch {
                expected: positions.len(),
                found: intensities.len(),
            });
        }
        if positions.is_empty() {
            return Err(Error::InvalidConfig("pattern has no bins".into()));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) || positions.iter().any(|x| !x.is_finite())
        {
            return Err(Error::InvalidConfig("pattern positions must increase".into()));
        }
        if intensities.iter().any(|i| !i.is_finite() || *i < 0.0) {
            return Err(Error::InvalidConfig("pattern intensities must be non-negative".into()));
        }
        if normalization == Normalization::PerEventProbability {
            let total: f64 = intensities.iter().sum();
            if (total - 1.0).abs() > PATTERN_SUM_TOL {
                return Err(Error::InvalidConfig(format!(
                    "per-event pattern sums to {total}"
                )));
            }
        }
        Ok(ScreenPattern {
            positions,
            intensities,
            normalization,
            provenance,
        })
    }

    /// Normalizes raw analytic intensities into per-event probabilities.
    pub fn analytic(positions: Vec<f64>, intensities: Vec<f64>) -> Result<Self> {
        let total: f64 = intensities.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::ZeroTotal);
        }
        let probs = intensities.into_iter().map(|i| i / total).collect();
        ScreenPattern::new(
            positions,
            probs,
            Normalization::PerEventProbability,
            Provenance::Analytic,
        )
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.intensities.iter().sum()
    }

    /// Intensities rescaled to sum to one.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::ZeroTotal);
        }
        Ok(self.intensities.iter().map(|i| i / total).collect())
    }

    pub fn normalized(&self) -> Result<ScreenPattern> {
        ScreenPattern::new(
            self.positions.clone(),
            self.probabilities()?,
            Normalization::PerEventProbability,
            self.provenance,
        )
    }

    /// Bin-wise sum; the result is a relative-intensity pattern.
    pub fn sum(&self, other: &ScreenPattern) -> Result<ScreenPattern> {
        if self.positions != other.positions {
            return Err(Error::IncompatibleBinning("pattern positions differ".into()));
        }
        ScreenPattern::new(
            self.positions.clone(),
            self.intensities
                .iter()
                .zip(&other.intensities)
                .map(|(a, b)| a + b)
                .collect(),
            Normalization::RelativeIntensity,
            self.provenance,
        )
    }

    pub fn argmax(&self) -> usize {
        self.intensities
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0
    }
}

/// Uniform binning of a screen interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenGrid {
    edges: Vec<f64>,
}

/// Default bin count for screen patterns.
pub const DEFAULT_BINS: usize = 256;
/// Default half-width of the screen, in fringe periods.
pub const DEFAULT_PERIODS_EACH_SIDE: f64 = 4.0;

impl ScreenGrid {
    pub fn uniform(min: f64, max: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(max > min) || !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "invalid grid [{min}, {max}] with {bins} bins"
            )));
        }
        let h = (max - min) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| min + i as f64 * h).collect();
        edges.push(max);
        Ok(ScreenGrid { edges })
    }

    /// Grid symmetric about `x = 0`.
    pub fn centered(half_width: f64, bins: usize) -> Result<Self> {
        ScreenGrid::uniform(-half_width, half_width, bins)
    }

    /// 256 bins over ±4 fringe periods; falls back to ±1.5 diffraction
    /// zeros when the slits coincide.
    pub fn for_geometry(g: &crate::optics::SlitGeometry) -> Self {
        let half = if g.separation > 0.0 {
            DEFAULT_PERIODS_EACH_SIDE * g.fringe_spacing()
        } else {
            1.5 * g.first_diffraction_zero()
        };
        ScreenGrid::centered(half, DEFAULT_BINS).expect("geometry yields a finite grid")
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn bin_width(&self) -> f64 {
        (self.edges[self.bins()] - self.edges[0]) / self.bins() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_validation() {
        assert!(ScreenPattern::new(
            vec![0.0, 1.0],
            vec![0.5, 0.6],
            Normalization::PerEventProbability,
            Provenance::Analytic
        )
        .is_err());
        assert!(ScreenPattern::new(
            vec![0.0, 1.0],
            vec![-0.1, 1.1],
            Normalization::RelativeIntensity,
            Provenance::Analytic
        )
        .is_err());
        assert!(ScreenPattern::analytic(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        let p = ScreenPattern::analytic(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 1.0]).unwrap();
        assert_eq!(p.intensities, vec![0.25, 0.5, 0.25]);
        assert_eq!(p.argmax(), 1);
    }

    #[test]
    fn grid_centers() {
        let g = ScreenGrid::centered(2.0, 4).unwrap();
        assert_eq!(g.centers(), vec![-1.5, -0.5, 0.5, 1.5]);
        assert_eq!(g.bin_width(), 1.0);
        assert!(ScreenGrid::uniform(1.0, 1.0, 3).is_err());
    }
}
