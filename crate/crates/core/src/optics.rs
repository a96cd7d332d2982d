//! Optical elements as maps on path and polarization states.
//!
//! Units are dimensionless: the wavelength is 1, `ħ = 1`, and energies and
//! angular frequencies share one scale.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::quantum::{Factor, Operator, OperatorKind, Space, StateVector, Subsystem, EXACT_TOL};
use crate::rng::{trial_uniform, Channel};
use crate::C64;

pub const WAVELENGTH: f64 = 1.0;
/// Screen distance must exceed this multiple of the slit separation for the
/// far-field approximation to be trusted.
pub const FAR_FIELD_RATIO: f64 = 100.0;

pub fn wavenumber() -> f64 {
    2.0 * PI / WAVELENGTH
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Two-slit aperture and screen distance, in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlitGeometry {
    pub separation: f64,
    pub width: f64,
    pub screen_distance: f64,
}

impl SlitGeometry {
    pub fn new(separation: f64, width: f64, screen_distance: f64) -> Result<Self> {
        check_range("separation", separation, "[0, inf)", separation >= 0.0)?;
        check_range("width", width, "(0, inf)", width > 0.0)?;
        check_range(
            "screen_distance",
            screen_distance,
            "(0, inf)",
            screen_distance > 0.0,
        )?;
        let g = SlitGeometry {
            separation,
            width,
            screen_distance,
        };
        if !g.is_far_field() {
            log::warn!(
                "screen distance {screen_distance} is not far-field for separation {separation}"
            );
        }
        Ok(g)
    }

    pub fn is_far_field(&self) -> bool {
        self.screen_distance > FAR_FIELD_RATIO * self.separation
    }

    /// Distance between adjacent two-slit maxima, `λL/d`. Infinite for `d = 0`.
    pub fn fringe_spacing(&self) -> f64 {
        WAVELENGTH * self.screen_distance / self.separation
    }

    /// First zero of the single-slit envelope, `λL/w`.
    pub fn first_diffraction_zero(&self) -> f64 {
        WAVELENGTH * self.screen_distance / self.width
    }

    /// Single-slit intensity envelope `sinc²(π w x / λL)`.
    pub fn envelope(&self, x: f64) -> f64 {
        sinc(PI * self.width * x / (WAVELENGTH * self.screen_distance)).powi(2)
    }

    /// Two-slit phase difference `θ(x) = 2π d x / λL` between S1 and S2.
    pub fn phase_difference(&self, x: f64) -> f64 {
        wavenumber() * self.separation * x / self.screen_distance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlitId {
    S1,
    S2,
}

impl SlitId {
    pub fn index(self) -> usize {
        match self {
            SlitId::S1 => 0,
            SlitId::S2 => 1,
        }
    }

    /// Transverse slit position; S1 sits at `+d/2`.
    pub fn offset(self, g: &SlitGeometry) -> f64 {
        match self {
            SlitId::S1 => g.separation / 2.0,
            SlitId::S2 => -g.separation / 2.0,
        }
    }
}

/// Far-field amplitude at screen position `x` from one slit.
pub fn slit_amplitude(x: f64, which: SlitId, g: &SlitGeometry) -> C64 {
    let envelope = sinc(PI * g.width * x / (WAVELENGTH * g.screen_distance));
    let phase = wavenumber() * x * which.offset(g) / g.screen_distance;
    C64::from_polar(envelope, phase)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Upper,
    Lower,
}

impl Arm {
    pub fn index(self) -> usize {
        match self {
            Arm::Upper => 0,
            Arm::Lower => 1,
        }
    }
}

/// Lossless splitter `[[√t, i√(1-t)], [i√(1-t), √t]]`.
pub fn beam_splitter(transmittance: f64) -> Result<Operator> {
    check_range(
        "transmittance",
        transmittance,
        "[0, 1]",
        (0.0..=1.0).contains(&transmittance),
    )?;
    let t = C64::new(transmittance.sqrt(), 0.0);
    let r = C64::new(0.0, (1.0 - transmittance).sqrt());
    Operator::from_rows(2, &[t, r, r, t], OperatorKind::Unitary)
}

/// Balanced splitter with both amplitudes exactly `1/√2`.
pub fn balanced_beam_splitter() -> Operator {
    let t = C64::new(FRAC_1_SQRT_2, 0.0);
    let r = C64::new(0.0, FRAC_1_SQRT_2);
    Operator::from_rows(2, &[t, r, r, t], OperatorKind::Unitary)
        .expect("balanced splitter is unitary")
}

/// Diagonal phase `e^{iχ}` on one arm.
pub fn phase_shifter(chi: f64, arm: Arm) -> Operator {
    let mut diag = [C64::new(1.0, 0.0); 2];
    diag[arm.index()] = C64::from_polar(1.0, chi);
    let zero = C64::new(0.0, 0.0);
    Operator::from_rows(2, &[diag[0], zero, zero, diag[1]], OperatorKind::Unitary)
        .expect("phase shifter is unitary")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsorberMode {
    /// Static absorber attenuating every neutron's amplitude coherently.
    Stochastic,
    /// Rotating chopper that fully blocks the beam for a fraction of trials.
    DeterministicChopper,
}

/// Absorber in the left arm. `transmission` is the transmitted intensity
/// fraction `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorberSpec {
    pub transmission: f64,
    pub mode: AbsorberMode,
}

impl AbsorberSpec {
    pub fn new(transmission: f64, mode: AbsorberMode) -> Result<Self> {
        check_range("a", transmission, "[0, 1]", (0.0..=1.0).contains(&transmission))?;
        Ok(AbsorberSpec { transmission, mode })
    }
}

/// Split of an arm's intensity into a coherent transmitted part and an
/// incoherent absorbed weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attenuation {
    pub amplitude: f64,
    pub absorbed_weight: f64,
}

pub fn stochastic_absorber_amplitude(spec: &AbsorberSpec) -> Result<Attenuation> {
    if spec.mode != AbsorberMode::Stochastic {
        return Err(Error::ModeMismatch {
            expected: AbsorberMode::Stochastic,
        });
    }
    Ok(Attenuation {
        amplitude: spec.transmission.sqrt(),
        absorbed_weight: 1.0 - spec.transmission,
    })
}

/// Whether the chopper is open during `trial`. Open with probability `a`,
/// deterministic in `(seed, trial)`.
pub fn chopper_state(spec: &AbsorberSpec, trial: u64, seed: u64) -> Result<bool> {
    if spec.mode != AbsorberMode::DeterministicChopper {
        return Err(Error::ModeMismatch {
            expected: AbsorberMode::DeterministicChopper,
        });
    }
    Ok(trial_uniform(seed, trial, Channel::Chopper) < spec.transmission)
}

/// Three-mode unitary on `{left, right, absorbed}` sending the left arm to
/// `√a·left + √(1-a)·absorbed`.
pub fn absorber_unitary(transmission: f64) -> Result<Operator> {
    check_range("a", transmission, "[0, 1]", (0.0..=1.0).contains(&transmission))?;
    let t = transmission.sqrt();
    let s = (1.0 - transmission).sqrt();
    let r = |x: f64| C64::new(x, 0.0);
    Operator::from_rows(
        3,
        &[
            r(t),
            r(0.0),
            r(-s),
            r(0.0),
            r(1.0),
            r(0.0),
            r(s),
            r(0.0),
            r(t),
        ],
        OperatorKind::Unitary,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizerSpec {
    /// Transmission axis at the given angle from horizontal, radians.
    Linear(f64),
    CircularLeft,
    CircularRight,
}

impl PolarizerSpec {
    /// Linear polarizer with its angle folded into `[0, π)`.
    pub fn linear(angle: f64) -> Self {
        PolarizerSpec::Linear(angle.rem_euclid(PI))
    }

    pub fn normalized(self) -> Self {
        match self {
            PolarizerSpec::Linear(a) => PolarizerSpec::linear(a),
            other => other,
        }
    }

    /// The polarization state this element transmits.
    pub fn state(&self) -> StateVector {
        let h = FRAC_1_SQRT_2;
        let amps = match self.normalized() {
            PolarizerSpec::Linear(a) => vec![C64::new(a.cos(), 0.0), C64::new(a.sin(), 0.0)],
            PolarizerSpec::CircularLeft => vec![C64::new(h, 0.0), C64::new(0.0, h)],
            PolarizerSpec::CircularRight => vec![C64::new(h, 0.0), C64::new(0.0, -h)],
        };
        StateVector::new(Space::single(Factor::polarization()), amps)
            .expect("polarization states are two-dimensional")
    }
}

/// Rank-1 projector onto the transmitted polarization.
pub fn polarizer_projector(spec: &PolarizerSpec) -> Operator {
    Operator::projector_onto(&spec.state()).expect("polarizer states are normalized")
}

/// Entangles each path basis state with its marker:
/// `Σ c_i |S_i⟩ ↦ Σ c_i |S_i⟩⊗|M_i⟩`.
pub fn attach_which_path(s: &StateVector, markers: &[StateVector]) -> Result<StateVector> {
    let factors = s.space().factors();
    if factors.len() != 1 || factors[0].subsystem() != Subsystem::Path {
        return Err(Error::InvalidSelection(
            "which-path marking needs a path-only state".into(),
        ));
    }
    if markers.len() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: markers.len(),
        });
    }
    let marker_space = markers[0].space().clone();
    for m in markers {
        if m.space() != &marker_space {
            return Err(Error::BasisMismatch);
        }
        if (m.norm_sqr() - 1.0).abs() > EXACT_TOL {
            return Err(Error::NotNormalized(m.norm_sqr()));
        }
    }
    let space = s.space().tensor(&marker_space)?;
    let mdim = marker_space.dim();
    let mut amps = Vec::with_capacity(space.dim());
    for (i, c) in s.amplitudes().iter().enumerate() {
        amps.extend((0..mdim).map(|j| c * markers[i].amplitude(j)));
    }
    StateVector::new(space, amps)
}

/// Marker pair with real overlap `⟨M1|M2⟩ = overlap`.
pub fn markers_with_overlap(overlap: f64) -> Result<[StateVector; 2]> {
    check_range("overlap", overlap, "[0, 1]", (0.0..=1.0).contains(&overlap))?;
    let space = Space::single(Factor::detectors());
    let m1 = StateVector::basis_state(space.clone(), 0)?;
    let m2 = StateVector::new(
        space,
        vec![
            C64::new(overlap, 0.0),
            C64::new((1.0 - overlap * overlap).max(0.0).sqrt(), 0.0),
        ],
    )?;
    Ok([m1, m2])
}

/// Tabulated density of excited states `ρ(E_e)`, indexed by absolute energy.
///
/// Linear interpolation between points; zero below the first point and held
/// at the last value above the final point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityOfStates {
    points: Vec<(f64, f64)>,
}

impl DensityOfStates {
    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("density of states needs a point".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidConfig(
                    "density of states energies must increase".into(),
                ));
            }
        }
        for &(e, rho) in &points {
            check_range("energy", e, "finite", true)?;
            check_range("density", rho, "[0, inf)", rho >= 0.0)?;
        }
        Ok(DensityOfStates { points })
    }

    /// Constant density `value` from `onset` upwards.
    pub fn flat(onset: f64, value: f64) -> Result<Self> {
        DensityOfStates::tabulated(vec![(onset, value)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn at(&self, energy: f64) -> f64 {
        let pts = &self.points;
        if energy < pts[0].0 {
            return 0.0;
        }
        let last = pts[pts.len() - 1];
        if energy >= last.0 {
            return last.1;
        }
        let k = pts.partition_point(|p| p.0 <= energy);
        let (e0, r0) = pts[k - 1];
        let (e1, r1) = pts[k];
        r0 + (r1 - r0) * (energy - e0) / (e1 - e0)
    }
}

/// Atom with a ground state and a continuum above a work-function gap,
/// driven by a classical field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotoDetectorSpec {
    pub work_function: f64,
    /// `|⟨e|D|g⟩|²`.
    pub coupling: f64,
    pub ground_energy: f64,
    pub field_amplitude: f64,
    pub density_of_states: DensityOfStates,
}

impl PhotoDetectorSpec {
    pub fn new(
        work_function: f64,
        coupling: f64,
        ground_energy: f64,
        field_amplitude: f64,
        density_of_states: DensityOfStates,
    ) -> Result<Self> {
        check_range("work_function", work_function, "[0, inf)", work_function >= 0.0)?;
        check_range("coupling", coupling, "[0, inf)", coupling >= 0.0)?;
        check_range("ground_energy", ground_energy, "finite", true)?;
        check_range("field_amplitude", field_amplitude, "[0, inf)", field_amplitude >= 0.0)?;
        let gap_edge = ground_energy + work_function;
        if let Some(&(e, _)) = density_of_states
            .points()
            .iter()
            .find(|&&(e, rho)| e < gap_edge && rho > 0.0)
        {
            return Err(Error::InvalidConfig(format!(
                "density of states is non-zero at {e}, inside the gap below {gap_edge}"
            )));
        }
        Ok(PhotoDetectorSpec {
            work_function,
            coupling,
            ground_energy,
            field_amplitude,
            density_of_states,
        })
    }

    /// Density of states with the gap enforced.
    pub fn density_at(&self, energy: f64) -> f64 {
        if energy - self.ground_energy < self.work_function {
            0.0
        } else {
            self.density_of_states.at(energy)
        }
    }
}

/// Golden-rule transition rate `(π/2)|⟨e|D|g⟩|² E₀² ρ(E_g + ω)`.
pub fn photo_transition_rate(spec: &PhotoDetectorSpec, omega: f64) -> f64 {
    if omega < spec.work_function {
        return 0.0;
    }
    let e0 = spec.field_amplitude;
    FRAC_PI_2 * spec.coupling * e0 * e0 * spec.density_at(spec.ground_energy + omega)
}

/// Kinetic energy `ω - W_T` of the emitted electron, if any.
pub fn photo_electron_energy(omega: f64, work_function: f64) -> Option<f64> {
    (omega >= work_function).then_some(omega - work_function)
}
