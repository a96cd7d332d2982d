use super::{ScreenGrid, ScreenPattern};
use crate::error::{check_range, Error, Result};
use crate::montecarlo::{Ancilla, CdfSampler, EventRecord, Envelope, FringeModel, Outcome};
use crate::optics::{attach_which_path, markers_with_overlap, slit_amplitude, SlitGeometry, SlitId};
use crate::quantum::{
    density_from_pure, partial_trace, project_with_draw, DensityMatrix, Factor, Operator, Space,
    StateVector, Subsystem,
};
use crate::rng::{trial_uniform, Channel};
use crate::C64;

/// Relative intensity `1 + overlap·cos θ` of two equal-weight slit waves whose
/// which-path markers overlap by `overlap`.
pub fn double_slit_intensity(overlap: f64, theta: f64) -> f64 {
    1.0 + overlap * theta.cos()
}

fn equal_slits() -> StateVector {
    let one = C64::new(1.0, 0.0);
    StateVector::superposition(Space::single(Factor::slits()), vec![one, one])
        .expect("equal superposition is normalizable")
}

/// Screen intensity `Σ_ij A_i ρ_ij A_j*` for a reduced path density matrix and
/// the per-slit screen amplitudes at one position.
pub fn screen_intensity(path: &DensityMatrix, amplitudes: &[C64]) -> Result<f64> {
    if amplitudes.len() != path.dim() {
        return Err(Error::DimensionMismatch {
            expected: path.dim(),
            found: amplitudes.len(),
        });
    }
    let a = nalgebra::DVector::from_column_slice(amplitudes);
    let value = (a.transpose() * path.matrix() * a.map(|z| z.conj()))[(0, 0)];
    Ok(value.re.max(0.0))
}

/// Unnormalized screen intensities of a reduced path state at the bin centers.
pub(crate) fn pattern_from_path(
    path: &DensityMatrix,
    g: &SlitGeometry,
    grid: &ScreenGrid,
) -> Result<Vec<f64>> {
    grid.centers()
        .into_iter()
        .map(|x| {
            screen_intensity(
                path,
                &[slit_amplitude(x, SlitId::S1, g), slit_amplitude(x, SlitId::S2, g)],
            )
        })
        .collect()
}

/// Two open slits whose which-path markers overlap by `overlap ∈ [0, 1]`.
///
/// The path state is marked, the marker is traced out, and the reduced
/// density matrix is propagated to each bin center.
pub fn two_slit_pattern(g: &SlitGeometry, overlap: f64, grid: &ScreenGrid) -> Result<ScreenPattern> {
    check_range("overlap", overlap, "[0, 1]", (0.0..=1.0).contains(&overlap))?;
    let marked = attach_which_path(&equal_slits(), &markers_with_overlap(overlap)?)?;
    let path = partial_trace(&density_from_pure(&marked)?, &[Subsystem::Path])?;
    ScreenPattern::analytic(grid.centers(), pattern_from_path(&path, g, grid)?)
}

/// Unmarked: `|A₁ + A₂|²`. Marked with orthogonal detectors: `|A₁|² + |A₂|²`.
pub fn double_slit_pattern(g: &SlitGeometry, marked: bool, grid: &ScreenGrid) -> Result<ScreenPattern> {
    two_slit_pattern(g, if marked { 0.0 } else { 1.0 }, grid)
}

/// Pattern with only `open` admitting the wave.
pub fn single_slit_pattern(g: &SlitGeometry, open: SlitId, grid: &ScreenGrid) -> Result<ScreenPattern> {
    let s = StateVector::basis_state(Space::single(Factor::slits()), open.index())?;
    let rho = density_from_pure(&s)?;
    ScreenPattern::analytic(grid.centers(), pattern_from_path(&rho, g, grid)?)
}

/// Fringe period and envelope for visibility estimates on a two-slit screen.
pub fn fringe_model(g: &SlitGeometry) -> FringeModel {
    FringeModel {
        period: g.fringe_spacing(),
        center: 0.0,
        envelope: Envelope::Slit(*g),
    }
}

/// Double slit with a which-path detector behind each slit.
#[derive(Debug, Clone)]
pub struct WhichPath {
    state: StateVector,
    detector_projectors: [Operator; 2],
    conditional: [ScreenPattern; 2],
    samplers: [CdfSampler; 2],
}

impl WhichPath {
    pub fn new(g: &SlitGeometry, grid: &ScreenGrid) -> Result<Self> {
        let detectors = Space::single(Factor::detectors());
        let markers = [
            StateVector::basis_state(detectors.clone(), 0)?,
            StateVector::basis_state(detectors, 1)?,
        ];
        let state = attach_which_path(&equal_slits(), &markers)?;
        let project = |m: &StateVector| -> Result<Operator> {
            Operator::projector_onto(m)?.on_factor(state.space(), Subsystem::Marker)
        };
        let detector_projectors = [project(&markers[0])?, project(&markers[1])?];
        let conditional = [
            single_slit_pattern(g, SlitId::S1, grid)?,
            single_slit_pattern(g, SlitId::S2, grid)?,
        ];
        let samplers = [
            CdfSampler::new(&conditional[0].intensities)?,
            CdfSampler::new(&conditional[1].intensities)?,
        ];
        Ok(WhichPath {
            state,
            detector_projectors,
            conditional,
            samplers,
        })
    }

    /// Screen pattern seen behind slit `i` (0 or 1) once its detector fired.
    pub fn conditional_pattern(&self, detector: usize) -> &ScreenPattern {
        &self.conditional[detector]
    }

    /// Density of the joint path-detector state.
    pub fn joint_density(&self) -> Result<DensityMatrix> {
        density_from_pure(&self.state)
    }

    /// One trial: both detectors are read out in turn on the collapsing
    /// state, then the screen position is drawn from the slit the firing
    /// detector points to.
    pub fn trial(&self, trial: u64, seed: u64) -> Result<EventRecord> {
        let u = trial_uniform(seed, trial, Channel::WhichPath);
        let first = project_with_draw(&self.state, &self.detector_projectors[0], u)?;
        // D2 is read on the post-measurement state; it fires with certainty
        // exactly when D1 did not.
        let second = project_with_draw(&first.collapsed, &self.detector_projectors[1], u)?;
        let fired = [first.outcome, second.outcome];
        let detector = if fired[0] { 0 } else { 1 };
        let bin = self.samplers[detector].sample(trial_uniform(seed, trial, Channel::Screen));
        let position = self.conditional[detector].positions[bin];
        Ok(EventRecord::new(trial, Outcome::Screen { bin, position })
            .with(Ancilla::WhichPath, detector as u32 + 1)
            .with(Ancilla::D1Fired, fired[0] as u32)
            .with(Ancilla::D2Fired, fired[1] as u32))
    }
}

/// Convenience wrapper building the setup for a single trial.
pub fn which_path_trial(g: &SlitGeometry, grid: &ScreenGrid, trial: u64, seed: u64) -> Result<EventRecord> {
    WhichPath::new(g, grid)?.trial(trial, seed)
}
