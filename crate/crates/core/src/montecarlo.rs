//! Seeded detection events, histograms and the estimators used to compare
//! them against analytic patterns.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::experiments::ScreenPattern;
use crate::optics::SlitGeometry;
use crate::rng::{trial_uniform, Channel};

/// Primary outcome of one trial. Exactly one per trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Detector(u32),
    Screen { bin: usize, position: f64 },
    Absorbed,
}

impl Outcome {
    /// Coordinate used for histogramming: the screen position, or the
    /// detector index.
    pub fn position(&self) -> Option<f64> {
        match *self {
            Outcome::Detector(d) => Some(d as f64),
            Outcome::Screen { position, .. } => Some(position),
            Outcome::Absorbed => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ancilla {
    /// Which-path detector that fired (1 or 2).
    WhichPath,
    D1Fired,
    D2Fired,
    ChopperOpen,
    /// Delayed-choice bit: 1 when the second splitter is in place.
    Choice,
    PolarizerPass,
    Absorbed,
    /// Phase bin of a scanned interferometer trial.
    PhaseBin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub trial: u64,
    pub outcome: Outcome,
    pub ancillary: BTreeMap<Ancilla, u32>,
}

impl EventRecord {
    pub fn new(trial: u64, outcome: Outcome) -> Self {
        EventRecord {
            trial,
            outcome,
            ancillary: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: Ancilla, value: u32) -> Self {
        self.ancillary.insert(key, value);
        self
    }

    pub fn flag(&self, key: Ancilla) -> Option<u32> {
        self.ancillary.get(&key).copied()
    }
}

/// Inverse-CDF sampler over non-negative weights.
#[derive(Debug, Clone)]
pub struct CdfSampler {
    cumulative: Vec<f64>,
}

impl CdfSampler {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig("weights must be finite and non-negative".into()));
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if acc <= 0.0 {
            return Err(Error::ZeroTotal);
        }
        Ok(CdfSampler { cumulative })
    }

    /// Index selected by a uniform draw `u ∈ [0, 1)`. Zero-weight entries are
    /// never returned.
    pub fn sample(&self, u: f64) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let target = u * total;
        let i = self.cumulative.partition_point(|&c| c <= target);
        if i < self.cumulative.len() {
            i
        } else {
            // u·total rounded up to total; fall back to the last populated entry
            let last = self.cumulative.len() - 1;
            (0..=last)
                .rev()
                .find(|&k| k == 0 || self.cumulative[k] > self.cumulative[k - 1])
                .unwrap_or(last)
        }
    }
}

/// Draws `n` screen events from `pattern`, one uniform per event from the
/// `(seed, trial)` substream.
pub fn sample_events(pattern: &ScreenPattern, n: u64, seed: u64) -> Result<Vec<EventRecord>> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one event".into()));
    }
    let sampler = CdfSampler::new(&pattern.intensities)?;
    Ok((0..n)
        .into_par_iter()
        .map(|trial| {
            let bin = sampler.sample(trial_uniform(seed, trial, Channel::Screen));
            EventRecord::new(
                trial,
                Outcome::Screen {
                    bin,
                    position: pattern.positions[bin],
                },
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn new(bin_edges: Vec<f64>) -> Result<Self> {
        if bin_edges.len() < 2 {
            return Err(Error::InvalidHistogram("need at least two edges".into()));
        }
        if bin_edges.windows(2).any(|w| !(w[1] > w[0])) || bin_edges.iter().any(|e| !e.is_finite())
        {
            return Err(Error::InvalidHistogram("edges must strictly increase".into()));
        }
        let bins = bin_edges.len() - 1;
        Ok(Histogram {
            bin_edges,
            counts: vec![0; bins],
            total: 0,
        })
    }

    /// Unit-width bins centered on detector indices `0..detectors`.
    pub fn for_detectors(detectors: usize) -> Result<Self> {
        Histogram::new((0..=detectors).map(|i| i as f64 - 0.5).collect())
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Bin containing `x`; bins are half-open except the last, which
    /// includes its right edge.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let e = &self.bin_edges;
        if !(x >= e[0] && x <= e[e.len() - 1]) {
            return None;
        }
        let i = e.partition_point(|&edge| edge <= x);
        Some(i.saturating_sub(1).min(self.bins() - 1))
    }

    pub fn add(&mut self, event: &EventRecord) -> Result<()> {
        let x = event
            .outcome
            .position()
            .ok_or(Error::NoPosition { trial: event.trial })?;
        let bin = self.bin_of(x).ok_or(Error::OutsideHistogram {
            trial: event.trial,
            position: x,
        })?;
        self.counts[bin] += 1;
        self.total += 1;
        Ok(())
    }

    pub fn merge(&self, other: &Histogram) -> Result<Histogram> {
        if self.bin_edges != other.bin_edges {
            return Err(Error::IncompatibleBinning("histogram edges differ".into()));
        }
        Ok(Histogram {
            bin_edges: self.bin_edges.clone(),
            counts: self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect(),
            total: self.total + other.total,
        })
    }

    /// Fraction of events per bin.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

pub fn accumulate<'a, I>(events: I, edges: &[f64]) -> Result<Histogram>
where
    I: IntoIterator<Item = &'a EventRecord>,
{
    let mut h = Histogram::new(edges.to_vec())?;
    for e in events {
        h.add(e)?;
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_events: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical_visibility: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_square: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees_of_freedom: Option<u64>,
    /// Experiment-specific scalar results.
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

/// Sampled intensity profile as `(position, value)` points.
pub trait Profile {
    fn points(&self) -> Vec<(f64, f64)>;
}

impl Profile for ScreenPattern {
    fn points(&self) -> Vec<(f64, f64)> {
        self.positions.iter().copied().zip(self.intensities.iter().copied()).collect()
    }
}

impl Profile for Histogram {
    fn points(&self) -> Vec<(f64, f64)> {
        self.centers()
            .into_iter()
            .zip(self.counts.iter().map(|&c| c as f64))
            .collect()
    }
}

/// Slowly varying envelope divided out before fitting fringes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    Flat,
    /// Single-slit `sinc²` envelope of the given geometry.
    Slit(SlitGeometry),
}

impl Envelope {
    pub fn at(&self, x: f64) -> f64 {
        match self {
            Envelope::Flat => 1.0,
            Envelope::Slit(g) => g.envelope(x),
        }
    }
}

/// Where the fringes are and how long one period is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeModel {
    pub period: f64,
    pub center: f64,
    pub envelope: Envelope,
}

impl FringeModel {
    pub fn flat(period: f64, center: f64) -> Self {
        FringeModel {
            period,
            center,
            envelope: Envelope::Flat,
        }
    }
}

/// Envelope points below this are skipped; dividing by them only amplifies noise.
const ENVELOPE_FLOOR: f64 = 1e-6;

/// Fringe visibility `(I_max - I_min)/(I_max + I_min)`.
///
/// The envelope-corrected profile is fitted over every whole period centered
/// on `model.center` with `c0 + c1 cos φ + c2 sin φ`; the extrema are those of
/// the fitted sinusoid, so `V = √(c1² + c2²)/c0`, clamped to `[0, 1]`.
pub fn estimate_visibility<P: Profile + ?Sized>(profile: &P, model: &FringeModel) -> Result<f64> {
    let points = profile.points();
    if points.len() < 2 {
        return Err(Error::UnderResolvedFringes { bins_per_period: 0.0 });
    }
    let spacing = (points[points.len() - 1].0 - points[0].0) / (points.len() - 1) as f64;
    let bins_per_period = model.period / spacing;
    if !(bins_per_period >= 3.0) {
        return Err(Error::UnderResolvedFringes { bins_per_period });
    }
    let lo = points[0].0 - 0.5 * spacing;
    let hi = points[points.len() - 1].0 + 0.5 * spacing;
    let reach = (model.center - lo).min(hi - model.center);
    let periods = (2.0 * reach / model.period + 1e-9).floor();
    if periods < 1.0 {
        return Err(Error::NoFullPeriod);
    }
    let half = 0.5 * periods * model.period;

    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for &(x, y) in &points {
        let offset = x - model.center;
        if offset < -half || offset >= half {
            continue;
        }
        let env = model.envelope.at(x);
        if env < ENVELOPE_FLOOR {
            continue;
        }
        let phase = 2.0 * PI * offset / model.period;
        let basis = Vector3::new(1.0, phase.cos(), phase.sin());
        normal += basis * basis.transpose();
        rhs += basis * (y / env);
    }
    let coeffs = normal
        .lu()
        .solve(&rhs)
        .ok_or(Error::UnderResolvedFringes { bins_per_period })?;
    if coeffs[0] <= 0.0 {
        return Ok(0.0);
    }
    Ok((coeffs[1].hypot(coeffs[2]) / coeffs[0]).clamp(0.0, 1.0))
}

/// Plain `(max - min)/(max + min)` over the given values.
pub fn raw_visibility(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max + min <= 0.0 {
        0.0
    } else {
        (max - min) / (max + min)
    }
}

pub const CHI_SQUARE_CONFIDENCE: f64 = 0.99;
/// Bins are merged until each carries at least this many expected counts.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: u64,
    pub pass: bool,
}

/// Pearson goodness-of-fit of `h` against the expected pattern, at 99%.
pub fn chi_square_test(h: &Histogram, expected: &ScreenPattern) -> Result<ChiSquareResult> {
    if h.bins() != expected.len() {
        return Err(Error::IncompatibleBinning(format!(
            "{} histogram bins vs {} pattern bins",
            h.bins(),
            expected.len()
        )));
    }
    for (i, &x) in expected.positions.iter().enumerate() {
        if !(x >= h.bin_edges[i] && x <= h.bin_edges[i + 1]) {
            return Err(Error::IncompatibleBinning(format!(
                "pattern position {x} is not inside histogram bin {i}"
            )));
        }
    }
    let probs = expected.probabilities()?;
    let n = h.total as f64;

    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&c, &p) in h.counts.iter().zip(&probs) {
        obs += c as f64;
        exp += p * n;
        if exp >= MIN_EXPECTED_COUNT {
            groups.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if obs > 0.0 || exp > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => groups.push((obs, exp)),
        }
    }
    if groups.len() < 2 {
        return Ok(ChiSquareResult {
            statistic: 0.0,
            dof: 0,
            pass: true,
        });
    }
    let statistic: f64 = groups
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else { 0.0 })
        .sum();
    let dof = (groups.len() - 1) as u64;
    let threshold = ChiSquared::new(dof as f64)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?
        .inverse_cdf(CHI_SQUARE_CONFIDENCE);
    Ok(ChiSquareResult {
        statistic,
        dof,
        pass: statistic < threshold,
    })
}
