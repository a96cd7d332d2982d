use serde::{Deserialize, Serialize};

use super::{ScreenGrid, ScreenPattern};
use crate::error::{check_range, Error, Result};
use crate::montecarlo::raw_visibility;

/// Wave-particle duality parameters of two beams with real amplitudes
/// `a = R cos β` and `b = R sin β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityParams {
    /// `W = 2ab/(a² + b²) = sin 2β`.
    pub visibility: f64,
    /// `P = (a² - b²)/(a² + b²) = cos 2β`.
    pub predictability: f64,
    pub beta: f64,
    pub radius: f64,
}

pub fn duality_params(a: f64, b: f64) -> Result<DualityParams> {
    check_range("a", a, "[0, inf)", a >= 0.0)?;
    check_range("b", b, "[0, inf)", b >= 0.0)?;
    let norm2 = a * a + b * b;
    if norm2 == 0.0 {
        return Err(Error::UndefinedDuality);
    }
    Ok(DualityParams {
        visibility: 2.0 * a * b / norm2,
        predictability: (a * a - b * b) / norm2,
        beta: b.atan2(a),
        radius: norm2.sqrt(),
    })
}

/// Detector intensity `a² + b² + 2ab cos(2 k_x x + φ)`.
pub fn two_beam_intensity(a: f64, b: f64, kx: f64, phi: f64, x: f64) -> f64 {
    a * a + b * b + 2.0 * a * b * (2.0 * kx * x + phi).cos()
}

pub fn two_beam_pattern(a: f64, b: f64, kx: f64, phi: f64, grid: &ScreenGrid) -> Result<ScreenPattern> {
    let centers = grid.centers();
    let values = centers.iter().map(|&x| two_beam_intensity(a, b, kx, phi, x).max(0.0)).collect();
    ScreenPattern::analytic(centers, values)
}

/// Points per period in the visibility scan; even, so the scan hits both the
/// maximum and the minimum of the cosine exactly.
const SCAN_POINTS: usize = 4096;

/// Visibility of the two-beam pattern, found by scanning one period, next to
/// the duality parameter `W`.
pub fn fringe_visibility_and_w(a: f64, b: f64) -> Result<(f64, f64)> {
    let w = duality_params(a, b)?.visibility;
    let kx = 0.5;
    let period = std::f64::consts::TAU / (2.0 * kx);
    let scan: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| two_beam_intensity(a, b, kx, 0.0, period * i as f64 / SCAN_POINTS as f64))
        .collect();
    Ok((raw_visibility(&scan), w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn balanced_beams_are_wave_like() {
        let d = duality_params(1.0, 1.0).unwrap();
        assert_eq!(d.visibility, 1.0);
        assert_eq!(d.predictability, 0.0);
        assert!((d.beta - FRAC_PI_4).abs() < 1e-15);
        assert!((d.radius - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn blocked_beam_is_particle_like() {
        let d = duality_params(1.0, 0.0).unwrap();
        assert_eq!(d.predictability, 1.0);
        assert_eq!(d.visibility, 0.0);
        assert_eq!(d.beta, 0.0);
    }

    #[test]
    fn three_four_five() {
        let d = duality_params(2.0, 1.0).unwrap();
        assert!((d.visibility - 0.8).abs() < 1e-15);
        assert!((d.predictability - 0.6).abs() < 1e-15);
    }

    #[test]
    fn zero_amplitudes_are_undefined() {
        assert_eq!(duality_params(0.0, 0.0), Err(Error::UndefinedDuality));
        assert!(duality_params(-1.0, 0.5).is_err());
    }

    #[test]
    fn scanned_visibility_examples() {
        assert_eq!(fringe_visibility_and_w(1.0, 1.0).unwrap().0, 1.0);
        assert_eq!(fringe_visibility_and_w(1.0, 0.0).unwrap().0, 0.0);
        let (v, w) = fringe_visibility_and_w(2.0, 1.0).unwrap();
        assert!((v - 0.8).abs() < 1e-12);
        assert!((v - w).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn duality_relation_holds(a in 0.0f64..100.0, b in 0.0f64..100.0) {
            prop_assume!(a + b > 1e-9);
            let d = duality_params(a, b).unwrap();
            prop_assert!((d.visibility.powi(2) + d.predictability.powi(2) - 1.0).abs() < 1e-12);
            prop_assert!((d.visibility - (2.0 * d.beta).sin()).abs() < 1e-12);
            prop_assert!((d.predictability - (2.0 * d.beta).cos()).abs() < 1e-12);
            let (v, w) = fringe_visibility_and_w(a, b).unwrap();
            prop_assert!((v - w).abs() < 1e-12);
        }
    }
}
