//! Per-experiment parameter sets as they appear under `params`.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use super::ExperimentKind;
use crate::experiments::{PipelineOrder, ScreenGrid};
use crate::optics::{
    AbsorberMode, AbsorberSpec, DensityOfStates, PhotoDetectorSpec, PolarizerSpec, SlitGeometry,
};
use crate::Result;

/// Prefix of range-violation messages raised while deserializing; the parser
/// maps it to the `RANGE` diagnostic code.
pub(crate) const RANGE_TAG: &str = "range: ";

/// Upper bound on `n_events`.
pub const MAX_EVENTS: u64 = 10_000_000;

macro_rules! bounded_real {
    ($(#[$doc:meta])* $name:ident, $range:literal, |$v:ident| $ok:expr) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Serialize)]
        #[serde(transparent)]
        pub struct $name(pub f64);

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let $v = f64::deserialize(d)?;
                if $v.is_finite() && $ok {
                    Ok($name($v))
                } else {
                    Err(D::Error::custom(format_args!(
                        "{RANGE_TAG}{} is outside {}",
                        $v, $range
                    )))
                }
            }
        }
    };
}

bounded_real!(
    /// Real number in `[0, 1]`.
    UnitInterval, "[0, 1]", |v| (0.0..=1.0).contains(&v)
);
bounded_real!(NonNegative, "[0, inf)", |v| v >= 0.0);
bounded_real!(Positive, "(0, inf)", |v| v > 0.0);

/// Bin or point count in `[1, 1000000]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct BinCount(pub usize);

impl<'de> Deserialize<'de> for BinCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u64::deserialize(d)?;
        if (1..=1_000_000).contains(&v) {
            Ok(BinCount(v as usize))
        } else {
            Err(D::Error::custom(format_args!("{RANGE_TAG}{v} is outside [1, 1000000]")))
        }
    }
}

/// Event count in `[1, MAX_EVENTS]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub(crate) struct EventCount(pub u64);

impl<'de> Deserialize<'de> for EventCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u64::deserialize(d)?;
        if (1..=MAX_EVENTS).contains(&v) {
            Ok(EventCount(v))
        } else {
            Err(D::Error::custom(format_args!("{RANGE_TAG}{v} is outside [1, {MAX_EVENTS}]")))
        }
    }
}

/// Slit separation `d`, slit width `w` and screen distance `L`, in
/// wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryParams {
    pub d: NonNegative,
    pub w: Positive,
    #[serde(rename = "L")]
    pub l: Positive,
}

impl GeometryParams {
    pub fn geometry(&self) -> Result<SlitGeometry> {
        SlitGeometry::new(self.d.0, self.w.0, self.l.0)
    }
}

/// Screen interval `[-half_width, half_width]` split into `bins`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenParams {
    pub half_width: Positive,
    pub bins: BinCount,
}

fn grid(screen: &Option<ScreenParams>, g: &SlitGeometry) -> Result<ScreenGrid> {
    match screen {
        Some(s) => ScreenGrid::centered(s.half_width.0, s.bins.0),
        None => Ok(ScreenGrid::for_geometry(g)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleSlitParams {
    pub geometry: GeometryParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<ScreenParams>,
    /// Overlap of the which-path markers; 1 (unmarked) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker_overlap: Option<UnitInterval>,
}

impl DoubleSlitParams {
    pub fn grid(&self) -> Result<ScreenGrid> {
        grid(&self.screen, &self.geometry.geometry()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhichPathParams {
    pub geometry: GeometryParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<ScreenParams>,
}

impl WhichPathParams {
    pub fn grid(&self) -> Result<ScreenGrid> {
        grid(&self.screen, &self.geometry.geometry()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorberParams {
    /// Transmitted intensity fraction of the left beam.
    pub a: UnitInterval,
    pub mode: AbsorberMode,
}

impl AbsorberParams {
    pub fn spec(&self) -> Result<AbsorberSpec> {
        AbsorberSpec::new(self.a.0, self.mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeutronParams {
    pub absorber: AbsorberParams,
    /// Arm amplitudes; both or neither, defaulting to `1/√2` each.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_left: Option<NonNegative>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_right: Option<NonNegative>,
    /// Number of phase settings spread over `[0, 2π)`; 8 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_bins: Option<BinCount>,
}

impl NeutronParams {
    pub fn amplitudes(&self) -> (f64, f64) {
        match (self.psi_left, self.psi_right) {
            (Some(l), Some(r)) => (l.0, r.0),
            _ => (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
        }
    }

    pub fn phase_bins(&self) -> usize {
        self.phase_bins.map_or(8, |b| b.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachZehnderParams {
    /// Second beam splitter in place.
    pub bs2: bool,
    /// Phase on the lower arm; 0 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayedChoiceParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    /// Probability that the second splitter is inserted; 0.5 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_present: Option<UnitInterval>,
    /// Pipeline stage at which the choice is drawn; `choice_last` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<PipelineOrder>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EraserParams {
    pub geometry: GeometryParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<ScreenParams>,
    pub tag_slits: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eraser: Option<PolarizerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_select: Option<bool>,
}

impl EraserParams {
    pub fn grid(&self) -> Result<ScreenGrid> {
        grid(&self.screen, &self.geometry.geometry()?)
    }
}

/// Photon frequencies `[min, max]` split into `bins`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaRange {
    pub min: NonNegative,
    pub max: Positive,
    pub bins: BinCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotoelectricParams {
    pub work_function: NonNegative,
    pub coupling: NonNegative,
    pub ground_energy: f64,
    pub field_amplitude: NonNegative,
    /// `[energy, density]` points, energies increasing.
    pub density_of_states: Vec<[f64; 2]>,
    pub omega: OmegaRange,
}

impl PhotoelectricParams {
    pub fn detector(&self) -> Result<PhotoDetectorSpec> {
        let dos = DensityOfStates::tabulated(
            self.density_of_states.iter().map(|p| (p[0], p[1])).collect(),
        )?;
        PhotoDetectorSpec::new(
            self.work_function.0,
            self.coupling.0,
            self.ground_energy,
            self.field_amplitude.0,
            dos,
        )
    }

    pub fn omega_grid(&self) -> Result<ScreenGrid> {
        ScreenGrid::uniform(self.omega.min.0, self.omega.max.0, self.omega.bins.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExperimentParams {
    DoubleSlit(DoubleSlitParams),
    WhichPath(WhichPathParams),
    NeutronAbsorber(NeutronParams),
    MachZehnder(MachZehnderParams),
    DelayedChoice(DelayedChoiceParams),
    QuantumEraser(EraserParams),
    Photoelectric(PhotoelectricParams),
}

impl ExperimentParams {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            ExperimentParams::DoubleSlit(_) => ExperimentKind::DoubleSlit,
            ExperimentParams::WhichPath(_) => ExperimentKind::WhichPath,
            ExperimentParams::NeutronAbsorber(_) => ExperimentKind::NeutronAbsorber,
            ExperimentParams::MachZehnder(_) => ExperimentKind::MachZehnder,
            ExperimentParams::DelayedChoice(_) => ExperimentKind::DelayedChoice,
            ExperimentParams::QuantumEraser(_) => ExperimentKind::QuantumEraser,
            ExperimentParams::Photoelectric(_) => ExperimentKind::Photoelectric,
        }
    }
}
