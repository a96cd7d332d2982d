//! Executes a scenario: analytic prediction first, then seeded detection
//! events, then estimators comparing the two.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentKind, ExperimentParams, OutputKind, Scenario};
use crate::error::{Error, Result};
use crate::experiments::{
    absorber_visibility, delayed_choice_run, fringe_model, mz_port_probabilities,
    neutron_intensity, two_slit_pattern, DelayedChoiceEvent, EraserConfig, EraserRun, MzConfig,
    NeutronInterferometer, NeutronPort, Normalization, PipelineOrder, Provenance, ScreenGrid,
    ScreenPattern, SecondSplitter, WhichPath, BRIGHT_PORT, DARK_PORT,
};
use crate::montecarlo::{
    accumulate, chi_square_test, estimate_visibility, sample_events, Ancilla, EventRecord,
    FringeModel, Histogram, Outcome, RunSummary,
};
use crate::optics::{photo_electron_energy, photo_transition_rate, AbsorberMode};
use crate::rng::{trial_uniform, Channel};

use super::params::{
    DelayedChoiceParams, DoubleSlitParams, EraserParams, MachZehnderParams, NeutronParams,
    PhotoelectricParams, WhichPathParams,
};

/// Seed used when neither the scenario nor the caller provides one.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPattern {
    pub name: String,
    pub pattern: ScreenPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedHistogram {
    pub name: String,
    pub histogram: Histogram,
}

/// Everything a run produces, together with the scenario that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub scenario: Scenario,
    pub patterns: Vec<NamedPattern>,
    pub histograms: Vec<NamedHistogram>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<RunSummary>,
    pub tool_version: String,
}

/// A module error raised while running a named scenario.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("scenario `{scenario}` ({experiment}): {source}")]
pub struct RunError {
    pub scenario: String,
    pub experiment: ExperimentKind,
    pub source: Error,
}

/// Intermediate output of one experiment runner.
#[derive(Default)]
struct Products {
    patterns: Vec<NamedPattern>,
    histograms: Vec<NamedHistogram>,
    empirical_visibility: Option<f64>,
    chi_square: Option<(f64, u64)>,
    metrics: BTreeMap<String, f64>,
}

impl Products {
    fn pattern(&mut self, name: &str, pattern: ScreenPattern) {
        self.patterns.push(NamedPattern {
            name: name.into(),
            pattern,
        });
    }

    fn histogram(&mut self, name: &str, histogram: Histogram) {
        self.histograms.push(NamedHistogram {
            name: name.into(),
            histogram,
        });
    }

    fn metric(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.metrics.insert(name.into(), value);
        }
    }

    fn chi_square(&mut self, h: &Histogram, expected: &ScreenPattern) -> Result<()> {
        let r = chi_square_test(h, expected)?;
        if r.dof > 0 {
            self.chi_square = Some((r.statistic, r.dof));
            self.metric("chi_square_pass", r.pass as u8 as f64);
        }
        Ok(())
    }
}

/// What the runner has to produce.
#[derive(Clone, Copy)]
struct Plan {
    n: u64,
    seed: u64,
    sample: bool,
}

/// Runs `s`. Deterministic for a fixed scenario: the seed is
/// `s.seed` or [`DEFAULT_SEED`].
pub fn run_scenario(s: &Scenario) -> std::result::Result<ResultBundle, RunError> {
    let plan = Plan {
        n: s.n_events,
        seed: s.seed.unwrap_or(DEFAULT_SEED),
        sample: s.wants(OutputKind::Histogram) || s.wants(OutputKind::Summary),
    };
    log::info!("running `{}` ({}) with {} events, seed {}", s.name, s.experiment(), plan.n, plan.seed);
    let products = match &s.params {
        ExperimentParams::DoubleSlit(p) => double_slit(p, plan),
        ExperimentParams::WhichPath(p) => which_path(p, plan),
        ExperimentParams::NeutronAbsorber(p) => neutron(p, plan),
        ExperimentParams::MachZehnder(p) => mach_zehnder(p, plan),
        ExperimentParams::DelayedChoice(p) => delayed_choice(p, plan),
        ExperimentParams::QuantumEraser(p) => eraser(p, plan),
        ExperimentParams::Photoelectric(p) => photoelectric(p, plan),
    }
    .map_err(|source| RunError {
        scenario: s.name.clone(),
        experiment: s.experiment(),
        source,
    })?;

    let summary = s.wants(OutputKind::Summary).then(|| RunSummary {
        n_events: plan.n,
        seed: plan.seed,
        empirical_visibility: products.empirical_visibility,
        chi_square: products.chi_square.map(|c| c.0),
        degrees_of_freedom: products.chi_square.map(|c| c.1),
        metrics: products.metrics,
    });
    Ok(ResultBundle {
        scenario: s.clone(),
        patterns: if s.wants(OutputKind::AnalyticPattern) {
            products.patterns
        } else {
            Vec::new()
        },
        histograms: if s.wants(OutputKind::Histogram) {
            products.histograms
        } else {
            Vec::new()
        },
        summary,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

fn trials<F>(n: u64, f: F) -> Result<Vec<EventRecord>>
where
    F: Fn(u64) -> Result<EventRecord> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Visibility of a profile, or `None` when the binning cannot resolve it.
fn visibility<P: crate::montecarlo::Profile>(profile: &P, model: &FringeModel) -> Option<f64> {
    match estimate_visibility(profile, model) {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("visibility not estimated: {e}");
            None
        }
    }
}

fn fraction(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

fn double_slit(p: &DoubleSlitParams, plan: Plan) -> Result<Products> {
    let g = p.geometry.geometry()?;
    let grid = p.grid()?;
    let overlap = p.marker_overlap.map_or(1.0, |m| m.0);
    let pattern = two_slit_pattern(&g, overlap, &grid)?;
    let model = fringe_model(&g);
    let mut out = Products::default();
    out.metric("marker_overlap", overlap);
    out.metric("fringe_spacing", g.fringe_spacing());
    if let Some(v) = visibility(&pattern, &model) {
        out.metric("analytic_visibility", v);
    }
    if plan.sample {
        let events = sample_events(&pattern, plan.n, plan.seed)?;
        let h = accumulate(&events, grid.edges())?;
        out.empirical_visibility = visibility(&h, &model);
        out.chi_square(&h, &pattern)?;
        out.histogram("screen", h);
    }
    out.pattern("screen", pattern);
    Ok(out)
}

fn which_path(p: &WhichPathParams, plan: Plan) -> Result<Products> {
    let g = p.geometry.geometry()?;
    let grid = p.grid()?;
    let setup = WhichPath::new(&g, &grid)?;
    let total = two_slit_pattern(&g, 0.0, &grid)?;
    let model = fringe_model(&g);
    let mut out = Products::default();
    if let Some(v) = visibility(&total, &model) {
        out.metric("analytic_visibility", v);
    }
    if plan.sample {
        let events = trials(plan.n, |t| setup.trial(t, plan.seed))?;
        let fired = |e: &EventRecord, k: Ancilla| e.flag(k) == Some(1);
        let d1: Vec<&EventRecord> = events.iter().filter(|e| e.flag(Ancilla::WhichPath) == Some(1)).collect();
        let d2: Vec<&EventRecord> = events.iter().filter(|e| e.flag(Ancilla::WhichPath) == Some(2)).collect();
        let coincidences = events
            .iter()
            .filter(|e| fired(e, Ancilla::D1Fired) && fired(e, Ancilla::D2Fired))
            .count();
        let screen = accumulate(&events, grid.edges())?;
        let h1 = accumulate(d1.iter().copied(), grid.edges())?;
        let h2 = accumulate(d2.iter().copied(), grid.edges())?;
        let mut detectors = Histogram::for_detectors(2)?;
        detectors.counts = vec![d1.len() as u64, d2.len() as u64];
        detectors.total = events.len() as u64;

        out.metric("d1_fraction", fraction(d1.len(), events.len()));
        out.metric("d2_fraction", fraction(d2.len(), events.len()));
        out.metric("coincidences", coincidences as f64);
        out.metric(
            "chi_square_d2_pass",
            chi_square_test(&h2, setup.conditional_pattern(1))?.pass as u8 as f64,
        );
        out.empirical_visibility = visibility(&screen, &model);
        out.chi_square(&screen, &total)?;
        out.histogram("screen", screen);
        out.histogram("detector_1", h1);
        out.histogram("detector_2", h2);
        out.histogram("detectors", detectors);
    }
    out.pattern("screen", total);
    out.pattern("detector_1", setup.conditional_pattern(0).clone());
    out.pattern("detector_2", setup.conditional_pattern(1).clone());
    Ok(out)
}

/// Phase settings `χ_k = (k + 1/2)·2π/M` and the edges of their bins.
fn phase_grid(bins: usize) -> Result<ScreenGrid> {
    ScreenGrid::uniform(0.0, TAU, bins)
}

fn neutron(p: &NeutronParams, plan: Plan) -> Result<Products> {
    let spec = p.absorber.spec()?;
    let (psi_l, psi_r) = p.amplitudes();
    let ni = NeutronInterferometer::new(spec, psi_l, psi_r)?;
    let phases = phase_grid(p.phase_bins())?;
    let chis = phases.centers();
    let m = chis.len();
    let analytic: Vec<f64> = chis.iter().map(|&c| neutron_intensity(&spec, psi_l, psi_r, c)).collect();
    let pattern = ScreenPattern::new(
        chis.clone(),
        analytic,
        Normalization::RelativeIntensity,
        Provenance::Analytic,
    )?;
    let vis = absorber_visibility(&spec, psi_l, psi_r);
    let mut out = Products::default();
    out.metric("raw_visibility", vis.raw);
    out.metric("normalized_visibility", vis.normalized);
    let cross = match spec.mode {
        AbsorberMode::Stochastic => spec.transmission.sqrt(),
        AbsorberMode::DeterministicChopper => spec.transmission,
    };
    out.metric("interference_coefficient", 2.0 * cross * psi_l * psi_r);

    if plan.sample {
        let prepared = chis.iter().map(|&c| ni.prepare(c)).collect::<Result<Vec<_>>>()?;
        // Trials cycle through the phase settings.
        let events = trials(plan.n, |t| {
            let k = (t % m as u64) as usize;
            Ok(ni.trial(&prepared[k], t, plan.seed)?.with(Ancilla::PhaseBin, k as u32))
        })?;
        let mut counts = [vec![0u64; m], vec![0u64; m], vec![0u64; m]];
        let mut open = 0usize;
        for e in &events {
            let k = e.flag(Ancilla::PhaseBin).unwrap_or(0) as usize;
            let slot = match e.outcome {
                Outcome::Detector(d) if d == NeutronPort::Forward.detector_id() => 0,
                Outcome::Detector(_) => 1,
                _ => 2,
            };
            counts[slot][k] += 1;
            open += (e.flag(Ancilla::ChopperOpen) == Some(1)) as usize;
        }
        let per_bin: Vec<u64> = (0..m).map(|k| counts[0][k] + counts[1][k] + counts[2][k]).collect();
        let estimated: Vec<f64> = (0..m)
            .map(|k| 2.0 * counts[0][k] as f64 / per_bin[k].max(1) as f64)
            .collect();
        let empirical = ScreenPattern::new(
            chis.clone(),
            estimated,
            Normalization::RelativeIntensity,
            Provenance::MonteCarlo,
        )?;
        out.empirical_visibility = visibility(&empirical, &FringeModel::flat(TAU, std::f64::consts::PI));
        out.metric("absorbed_fraction", fraction(counts[2].iter().sum::<u64>() as usize, events.len()));
        if spec.mode == AbsorberMode::DeterministicChopper {
            out.metric("chopper_open_fraction", fraction(open, events.len()));
        }
        for (slot, name) in ["forward", "side", "absorbed"].iter().enumerate() {
            let mut h = Histogram::new(phases.edges().to_vec())?;
            h.total = counts[slot].iter().sum();
            h.counts = std::mem::take(&mut counts[slot]);
            out.histogram(name, h);
        }
    }
    out.pattern("intensity", pattern);
    Ok(out)
}

fn port_pattern(probs: [f64; 2]) -> Result<ScreenPattern> {
    ScreenPattern::analytic(vec![0.0, 1.0], probs.to_vec())
}

fn detector_histogram<'a>(events: impl IntoIterator<Item = &'a EventRecord>) -> Result<Histogram> {
    let mut h = Histogram::for_detectors(2)?;
    for e in events {
        h.add(e)?;
    }
    Ok(h)
}

fn mach_zehnder(p: &MachZehnderParams, plan: Plan) -> Result<Products> {
    let chi = p.chi.unwrap_or(0.0);
    let probs = mz_port_probabilities(p.bs2, chi)?;
    let mut out = Products::default();
    out.metric("p_dark", probs[DARK_PORT]);
    out.metric("p_bright", probs[BRIGHT_PORT]);
    let pattern = port_pattern(probs)?;
    if plan.sample {
        let cfg = MzConfig {
            bs2: SecondSplitter::fixed(p.bs2),
            arm_phase: chi,
            choice_seed: plan.seed,
        };
        let run = delayed_choice_run(&cfg, plan.n, PipelineOrder::ChoiceLast)?;
        let h = detector_histogram(run.iter().map(|e| &e.record))?;
        out.metric("dark_fraction", h.frequencies()[DARK_PORT]);
        out.metric("bright_fraction", h.frequencies()[BRIGHT_PORT]);
        out.chi_square(&h, &pattern)?;
        out.histogram("detectors", h);
    }
    out.pattern("ports", pattern);
    Ok(out)
}

fn delayed_choice(p: &DelayedChoiceParams, plan: Plan) -> Result<Products> {
    let chi = p.chi.unwrap_or(0.0);
    let present = mz_port_probabilities(true, chi)?;
    let absent = mz_port_probabilities(false, chi)?;
    let mut out = Products::default();
    out.metric("p_dark_present", present[DARK_PORT]);
    out.metric("p_dark_absent", absent[DARK_PORT]);
    if plan.sample {
        let cfg = MzConfig {
            bs2: SecondSplitter::Random {
                p_present: p.p_present.map_or(0.5, |v| v.0),
            },
            arm_phase: chi,
            choice_seed: plan.seed,
        };
        let order = p.order.unwrap_or(PipelineOrder::ChoiceLast);
        let other = match order {
            PipelineOrder::ChoiceFirst => PipelineOrder::ChoiceLast,
            PipelineOrder::ChoiceLast => PipelineOrder::ChoiceFirst,
        };
        let run = delayed_choice_run(&cfg, plan.n, order)?;
        let check = delayed_choice_run(&cfg, plan.n, other)?;
        let identical = run.iter().zip(&check).all(|(a, b)| a.record == b.record);
        out.metric("order_independent", identical as u8 as f64);
        let branch = |bit: u32| run.iter().filter(move |e: &&DelayedChoiceEvent| e.record.flag(Ancilla::Choice) == Some(bit));
        let hp = detector_histogram(branch(1).map(|e| &e.record))?;
        let ha = detector_histogram(branch(0).map(|e| &e.record))?;
        out.metric("present_fraction", fraction(hp.total as usize, run.len()));
        if hp.total > 0 {
            out.metric("dark_fraction_present", hp.frequencies()[DARK_PORT]);
        }
        if ha.total > 0 {
            out.metric("dark_fraction_absent", ha.frequencies()[DARK_PORT]);
        }
        out.histogram("present", hp);
        out.histogram("absent", ha);
    }
    out.pattern("present", port_pattern(present)?);
    out.pattern("absent", port_pattern(absent)?);
    Ok(out)
}

fn eraser(p: &EraserParams, plan: Plan) -> Result<Products> {
    let g = p.geometry.geometry()?;
    let grid = p.grid()?;
    let cfg = EraserConfig {
        tag_slits: p.tag_slits,
        eraser: p.eraser,
        post_select: p.post_select.unwrap_or(false),
    };
    let run = EraserRun::new(&cfg, &g, &grid)?;
    let model = fringe_model(&g);
    let patterns = run.patterns().clone();
    let mut out = Products::default();
    if let Some(v) = visibility(&patterns.all, &model) {
        out.metric("analytic_visibility_all", v);
    }
    if let Some(f) = patterns.selected_fraction {
        out.metric("selected_fraction", f);
    }
    if let Some(sel) = &patterns.selected {
        if let Some(v) = visibility(sel, &model) {
            out.metric("analytic_visibility_selected", v);
        }
    }
    if plan.sample {
        let events = trials(plan.n, |t| Ok(run.trial(t, plan.seed)))?;
        let all = accumulate(&events, grid.edges())?;
        out.chi_square(&all, &patterns.all)?;
        out.empirical_visibility = visibility(&all, &model);
        if patterns.selected.is_some() {
            let passed: Vec<&EventRecord> = events
                .iter()
                .filter(|e| e.flag(Ancilla::PolarizerPass) == Some(1))
                .collect();
            out.metric("empirical_selected_fraction", fraction(passed.len(), events.len()));
            let selected = accumulate(passed, grid.edges())?;
            out.empirical_visibility = visibility(&selected, &model);
            out.histogram("selected", selected);
        }
        out.histogram("all", all);
    }
    out.pattern("all", patterns.all);
    if let Some(sel) = patterns.selected {
        out.pattern("selected", sel);
    }
    Ok(out)
}

fn photoelectric(p: &PhotoelectricParams, plan: Plan) -> Result<Products> {
    let spec = p.detector()?;
    let grid = p.omega_grid()?;
    let omegas = grid.centers();
    let rates: Vec<f64> = omegas.iter().map(|&w| photo_transition_rate(&spec, w)).collect();
    let mut out = Products::default();
    out.metric("work_function", spec.work_function);
    out.metric("max_rate", rates.iter().copied().fold(0.0, f64::max));
    let total_rate: f64 = rates.iter().sum();
    if total_rate > 0.0 {
        let mean_energy = omegas
            .iter()
            .zip(&rates)
            .map(|(&w, r)| r * photo_electron_energy(w, spec.work_function).unwrap_or(0.0))
            .sum::<f64>()
            / total_rate;
        out.metric("mean_kinetic_energy", mean_energy);
    }
    let pattern = ScreenPattern::new(omegas.clone(), rates, Normalization::RelativeIntensity, Provenance::Analytic)?;
    if plan.sample {
        // Each event is one emitted electron; its photon frequency is drawn
        // in proportion to the transition rate.
        let emission = pattern.normalized()?;
        let sampler = crate::montecarlo::CdfSampler::new(&emission.intensities)?;
        let events = trials(plan.n, |t| {
            let bin = sampler.sample(trial_uniform(plan.seed, t, Channel::Detection));
            let energy = photo_electron_energy(omegas[bin], spec.work_function)
                .ok_or(Error::InvalidConfig(format!("trial {t}: emission below threshold")))?;
            Ok(EventRecord::new(t, Outcome::Screen { bin, position: energy }))
        })?;
        let mut h = Histogram::new(grid.edges().iter().map(|e| e - spec.work_function).collect())?;
        for e in &events {
            if let Outcome::Screen { bin, .. } = e.outcome {
                h.counts[bin] += 1;
                h.total += 1;
            }
        }
        let mean = events.iter().filter_map(|e| e.outcome.position()).sum::<f64>() / events.len() as f64;
        out.metric("empirical_mean_kinetic_energy", mean);
        out.chi_square(&h, &ScreenPattern::new(
            h.centers(),
            emission.intensities.clone(),
            Normalization::PerEventProbability,
            Provenance::Analytic,
        )?)?;
        out.histogram("electron_energy", h);
    }
    out.pattern("rate", pattern);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{catalog, parse_scenario};

    fn scenario(text: &str) -> Scenario {
        parse_scenario(text.as_bytes()).unwrap()
    }

    #[test]
    fn which_path_bundle_reports_anti_coincidence() {
        let s = scenario(r#"{"name": "wp", "experiment": "which_path",
            "params": {"geometry": {"d": 10, "w": 1, "L": 10000}}, "n_events": 20000, "seed": 1}"#);
        let b = run_scenario(&s).unwrap();
        let m = &b.summary.as_ref().unwrap().metrics;
        assert_eq!(m["coincidences"], 0.0);
        let names: Vec<_> = b.histograms.iter().map(|h| h.name.as_str()).collect();
        assert!(names.contains(&"detector_1") && names.contains(&"detector_2"));
    }

    #[test]
    fn balanced_mach_zehnder_is_dark() {
        let s = scenario(r#"{"name": "mz", "experiment": "mach_zehnder", "params": {"bs2": true}, "n_events": 1000}"#);
        let b = run_scenario(&s).unwrap();
        let summary = b.summary.unwrap();
        assert_eq!(summary.metrics["p_dark"], 0.0);
        assert_eq!(summary.metrics["dark_fraction"], 0.0);
        assert_eq!(summary.seed, DEFAULT_SEED);
    }

    #[test]
    fn outputs_filter_the_bundle() {
        let s = scenario(r#"{"name": "mz", "experiment": "mach_zehnder", "params": {"bs2": false},
            "n_events": 10, "outputs": ["analytic_pattern"]}"#);
        let b = run_scenario(&s).unwrap();
        assert!(b.summary.is_none() && b.histograms.is_empty());
        assert_eq!(b.patterns.len(), 1);
    }

    #[test]
    fn runtime_errors_name_the_scenario() {
        let s = scenario(r#"{"name": "dark-pe", "experiment": "photoelectric", "params": {
            "work_function": 2, "coupling": 1, "ground_energy": 0, "field_amplitude": 1,
            "density_of_states": [[2, 1]], "omega": {"min": 0.1, "max": 1, "bins": 10}},
            "n_events": 10}"#);
        let e = run_scenario(&s).unwrap_err();
        assert_eq!(e.scenario, "dark-pe");
        assert!(e.to_string().contains("dark-pe"));
    }

    #[test]
    fn catalog_runs_are_deterministic() {
        for entry in catalog() {
            let mut s = entry.scenario();
            s.n_events = s.n_events.min(5_000);
            assert_eq!(run_scenario(&s).unwrap(), run_scenario(&s).unwrap(), "{}", entry.file_name);
        }
    }
}
