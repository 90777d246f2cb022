//! Phonon-number-resolving readout of every ion in the chain.
//!
//! Mapping moves each Fock component of an ion's mode into an internal
//! level with the mode left in its ground state, so that later hopping
//! cannot disturb the record. Readout then walks the auxiliary levels with
//! state-dependent fluorescence detection.
//!
//! Conventions:
//!
//! - Simplified scheme (`n ≤ 2`): composite red sideband, shelve
//!   `down ↔ e0`, blue-sideband π pulse. Afterwards `n = 0 → |e0,0⟩`,
//!   `n = 1 → |up,0⟩`, `n = 2 → |down,0⟩`. Readout: bright means `n = 2`;
//!   otherwise unshelve `e0` and detect again: bright means `n = 0`, dark
//!   means `n = 1`.
//! - General scheme with `K` iterations (`n ≤ K`): iteration `i` is a red
//!   sideband transfer, shelving `down ↔ e_i`, and a carrier π pulse. Fock
//!   component `n < K` is parked in `|e_n,0⟩`, component `K` ends in
//!   `|down,0⟩`. Readout: bright means `n = K`; then `e_{K−1}, …, e_0` are
//!   unshelved in turn and the first bright detection after unshelving
//!   `e_j` means `n = j`. All dark is an invalid shot.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::dynamics::{DecoherenceParams, HoppingParams, Propagator};
use crate::error::{Error, Result};
use crate::fock::{level_mask, sample_index, standard_levels, DensityOperator, Level, Populations, StateVector};
use crate::linalg::ZERO;
use crate::pulses::{self, composite_sequence, PulseSpec, RabiParams, Segment, SweepSpec};
use crate::rng::shot_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Composite-pulse mapping resolving `n ∈ {0, 1, 2}`.
    Simplified,
    /// Iterated sideband transfer resolving `n ∈ 0..=max_n`.
    General { max_n: usize },
}

impl Scheme {
    pub fn max_n(&self) -> usize {
        match self {
            Scheme::Simplified => 2,
            Scheme::General { max_n } => *max_n,
        }
    }

    pub fn aux_levels_needed(&self) -> usize {
        match self {
            Scheme::Simplified => 1,
            Scheme::General { max_n } => *max_n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Timing {
    /// Pulses are instantaneous and there is no hopping during mapping.
    #[default]
    Ideal,
    /// Every pulse takes its physical duration and is co-evolved with the
    /// hopping Hamiltonian.
    HoppingAware,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Addressing {
    /// Map ion 0 completely, then ion 1, and so on.
    Sequential,
    /// Drive the same step on all ions at once.
    #[default]
    Simultaneous,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub scheme: Scheme,
    /// `e_0, e_1, …` in the order the scheme fills them.
    pub aux_levels: Vec<Level>,
    /// Fluorescing levels.
    pub bright: Vec<Level>,
    pub timing: Timing,
    pub addressing: Addressing,
    pub rabi: RabiParams,
    /// Red-sideband passage used by the general scheme under
    /// [`Timing::HoppingAware`].
    pub sweep: SweepSpec,
}

impl ProtocolConfig {
    pub fn new(scheme: Scheme) -> Self {
        let n_aux = scheme.aux_levels_needed();
        Self {
            scheme,
            aux_levels: (0..n_aux).map(|k| Level::Aux(k as u8)).collect(),
            bright: vec![Level::Down],
            timing: Timing::Ideal,
            addressing: Addressing::Simultaneous,
            rabi: RabiParams::experiment(),
            sweep: SweepSpec::transitionless(),
        }
    }

    pub fn simplified() -> Self {
        Self::new(Scheme::Simplified)
    }

    pub fn general(max_n: usize) -> Self {
        Self::new(Scheme::General { max_n })
    }

    /// Internal levels a basis needs for this configuration.
    pub fn levels(&self) -> Vec<Level> {
        let mut levels = standard_levels(0);
        for l in &self.aux_levels {
            if !levels.contains(l) {
                levels.push(*l);
            }
        }
        levels
    }

    pub fn validate(&self, basis_levels: &[Level]) -> Result<()> {
        let needed = self.scheme.aux_levels_needed();
        if self.aux_levels.len() < needed {
            return Err(Error::InsufficientAuxLevels { needed, available: self.aux_levels.len() });
        }
        if let Scheme::General { max_n: 0 } = self.scheme {
            return Err(crate::error::invalid("max_n", "general scheme needs at least one iteration"));
        }
        for l in self.aux_levels.iter().chain(&self.bright) {
            if !basis_levels.contains(l) {
                return Err(Error::UnknownLevel(*l));
            }
        }
        Ok(())
    }

    fn passage(&self, ion: usize) -> Segment {
        match self.timing {
            Timing::Ideal => Segment::IdealPassage { ion },
            Timing::HoppingAware => Segment::Sweep { ions: vec![ion], sweep: self.sweep },
        }
    }

    /// Mapping schedule for one ion.
    pub fn ion_segments(&self, ion: usize) -> Vec<Segment> {
        match self.scheme {
            Scheme::Simplified => {
                let mut segs: Vec<Segment> = composite_sequence(ion).into_iter().map(Segment::pulse).collect();
                segs.push(Segment::pulse(PulseSpec::shelve(ion, Level::Down, self.aux_levels[0])));
                segs.push(Segment::pulse(PulseSpec::blue(ion, PI, 0.0)));
                segs
            }
            Scheme::General { max_n } => (0..max_n)
                .flat_map(|i| {
                    [
                        self.passage(ion),
                        Segment::pulse(PulseSpec::shelve(ion, Level::Down, self.aux_levels[i])),
                        Segment::pulse(PulseSpec::carrier(ion, PI, 0.0)),
                    ]
                })
                .collect(),
        }
    }

    /// Mapping schedule for the whole chain.
    pub fn chain_segments(&self, n_ions: usize) -> Vec<Segment> {
        match self.addressing {
            Addressing::Sequential => (0..n_ions).flat_map(|j| self.ion_segments(j)).collect(),
            Addressing::Simultaneous => {
                let per_ion: Vec<Vec<Segment>> = (0..n_ions).map(|j| self.ion_segments(j)).collect();
                (0..per_ion[0].len())
                    .flat_map(|k| merge_simultaneous(per_ion.iter().map(|segs| &segs[k])))
                    .collect()
            }
        }
    }
}

fn merge_simultaneous<'a>(segs: impl Iterator<Item = &'a Segment>) -> Vec<Segment> {
    let segs: Vec<&Segment> = segs.collect();
    match segs[0] {
        Segment::Pulses(_) => {
            vec![Segment::Pulses(segs.iter().flat_map(|s| match s {
                Segment::Pulses(ps) => ps.clone(),
                _ => Vec::new(),
            }).collect())]
        }
        Segment::Sweep { sweep, .. } => vec![Segment::Sweep {
            ions: segs.iter().flat_map(|s| match s {
                Segment::Sweep { ions, .. } => ions.clone(),
                _ => Vec::new(),
            }).collect(),
            sweep: *sweep,
        }],
        // instantaneous steps commute across ions
        _ => segs.into_iter().cloned().collect(),
    }
}

fn run_segments(
    state: &StateVector,
    segments: &[Segment],
    config: &ProtocolConfig,
    hop: &HoppingParams,
) -> Result<StateVector> {
    config.validate(state.basis().levels())?;
    match config.timing {
        Timing::Ideal => pulses::apply_ideal(state, segments, &config.rabi),
        Timing::HoppingAware => pulses::schedule_with_hopping(state, segments, hop, &config.rabi),
    }
}

/// Simplified-scheme mapping of one ion.
pub fn simplified_map(
    state: &StateVector,
    ion: usize,
    config: &ProtocolConfig,
    hop: &HoppingParams,
) -> Result<StateVector> {
    state.basis().check_ion(ion)?;
    let config = ProtocolConfig { scheme: Scheme::Simplified, ..config.clone() };
    config.validate(state.basis().levels())?;
    run_segments(state, &config.ion_segments(ion), &config, hop)
}

/// General-scheme mapping of one ion with `max_n` iterations.
pub fn general_map(
    state: &StateVector,
    ion: usize,
    max_n: usize,
    config: &ProtocolConfig,
    hop: &HoppingParams,
) -> Result<StateVector> {
    state.basis().check_ion(ion)?;
    let config = ProtocolConfig { scheme: Scheme::General { max_n }, ..config.clone() };
    config.validate(state.basis().levels())?;
    run_segments(state, &config.ion_segments(ion), &config, hop)
}

/// Maps every ion according to `config`.
pub fn map_chain(state: &StateVector, config: &ProtocolConfig, hop: &HoppingParams) -> Result<StateVector> {
    config.validate(state.basis().levels())?;
    run_segments(state, &config.chain_segments(state.basis().n_ions()), config, hop)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Fluorescence {
    Bright,
    Dark,
}

/// States that support projective level measurements and level swaps.
pub trait Measurable: Populations + Clone + Sized {
    /// Keeps the component with `ion` inside (`inside = true`) or outside
    /// the masked levels, renormalized. `None` if that branch has zero weight.
    fn collapse(&self, ion: usize, mask: &[bool], inside: bool) -> Option<Self>;

    fn swap_levels(&self, ion: usize, a: Level, b: Level) -> Result<Self>;

    fn branch_weight(&self, ion: usize, mask: &[bool]) -> f64 {
        let basis = self.basis().clone();
        self.populations()
            .iter()
            .enumerate()
            .filter(|(i, _)| mask[basis.component(*i, ion).0])
            .map(|(_, p)| p)
            .sum()
    }
}

impl Measurable for StateVector {
    fn collapse(&self, ion: usize, mask: &[bool], inside: bool) -> Option<Self> {
        let basis = self.basis().clone();
        let mut out = self.clone();
        for (i, a) in out.amplitudes_mut().iter_mut().enumerate() {
            if mask[basis.component(i, ion).0] != inside {
                *a = ZERO;
            }
        }
        out.renormalize().ok()?;
        Some(out)
    }

    fn swap_levels(&self, ion: usize, a: Level, b: Level) -> Result<Self> {
        pulses::shelve_swap(self, ion, a, b)
    }
}

impl Measurable for DensityOperator {
    fn collapse(&self, ion: usize, mask: &[bool], inside: bool) -> Option<Self> {
        let basis = self.basis().clone();
        let keep: Vec<bool> = (0..basis.dim()).map(|i| mask[basis.component(i, ion).0] == inside).collect();
        let mut out = self.clone();
        let m = out.matrix_mut();
        let dim = keep.len();
        for r in 0..dim {
            for c in 0..dim {
                if !(keep[r] && keep[c]) {
                    m[(r, c)] = ZERO;
                }
            }
        }
        out.renormalize().ok()?;
        Some(out)
    }

    fn swap_levels(&self, ion: usize, a: Level, b: Level) -> Result<Self> {
        let basis = self.basis().clone();
        basis.check_ion(ion)?;
        let (ia, ib) = (basis.level_index(a)?, basis.level_index(b)?);
        let perm: Vec<usize> = (0..basis.dim())
            .map(|i| {
                let (l, n) = basis.component(i, ion);
                let target = if l == ia { ib } else if l == ib { ia } else { l };
                basis.with_component(i, ion, target, n)
            })
            .collect();
        let src = self.matrix().clone();
        let mut out = self.clone();
        let m = out.matrix_mut();
        for r in 0..perm.len() {
            for c in 0..perm.len() {
                m[(perm[r], perm[c])] = src[(r, c)];
            }
        }
        Ok(out)
    }
}

/// Projective detection on `ion`: bright if its internal level is in
/// `bright`, for any phonon number.
pub fn fluorescence_detect<S: Measurable, R: Rng + ?Sized>(
    state: &S,
    ion: usize,
    bright: &[Level],
    rng: &mut R,
) -> Result<(Fluorescence, S)> {
    let basis = state.basis().clone();
    basis.check_ion(ion)?;
    let mask = level_mask(&basis, bright)?;
    let p_bright = state.branch_weight(ion, &mask).clamp(0.0, 1.0);
    let outcome = match sample_index(&[p_bright, 1.0 - p_bright], rng) {
        0 => Fluorescence::Bright,
        _ => Fluorescence::Dark,
    };
    let inside = outcome == Fluorescence::Bright;
    let collapsed = state.collapse(ion, &mask, inside).ok_or(Error::ZeroNorm)?;
    Ok((outcome, collapsed))
}

/// Readout of one ion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IonReadout {
    /// `None` marks an invalid shot (no fluorescence after all levels).
    pub phonons: Option<usize>,
    pub detections: Vec<Fluorescence>,
}

/// Detection decision tree: `(n if bright, level to unshelve before this
/// detection)` in order.
fn decision_tree(config: &ProtocolConfig) -> (Vec<(usize, Option<Level>)>, Option<usize>) {
    match config.scheme {
        Scheme::Simplified => (vec![(2, None), (0, Some(config.aux_levels[0]))], Some(1)),
        Scheme::General { max_n } => {
            let mut steps = vec![(max_n, None)];
            steps.extend((0..max_n).rev().map(|j| (j, Some(config.aux_levels[j]))));
            (steps, None)
        }
    }
}

/// Reads out one mapped ion, collapsing `state` along the way.
pub fn readout<S: Measurable, R: Rng + ?Sized>(
    state: &S,
    ion: usize,
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<(IonReadout, S)> {
    config.validate(state.basis().levels())?;
    let (steps, all_dark) = decision_tree(config);
    let mut current = state.clone();
    let mut detections = Vec::with_capacity(steps.len());
    for (n, unshelve) in steps {
        if let Some(level) = unshelve {
            current = current.swap_levels(ion, Level::Down, level)?;
        }
        let (outcome, next) = fluorescence_detect(&current, ion, &config.bright, rng)?;
        current = next;
        detections.push(outcome);
        if outcome == Fluorescence::Bright {
            return Ok((IonReadout { phonons: Some(n), detections }, current));
        }
    }
    Ok((IonReadout { phonons: all_dark, detections }, current))
}

/// Exact probabilities of each joint readout outcome (`None` = invalid on
/// at least one ion), enumerating the decision trees of all ions.
pub fn outcome_distribution<S: Measurable>(
    state: &S,
    config: &ProtocolConfig,
) -> Result<BTreeMap<Option<Vec<usize>>, f64>> {
    config.validate(state.basis().levels())?;
    let mask = level_mask(state.basis(), &config.bright)?;
    let (steps, all_dark) = decision_tree(config);
    let n_ions = state.basis().n_ions();
    let mut out = BTreeMap::new();
    let mut stack: Vec<(S, usize, Vec<usize>, f64, bool)> = vec![(state.clone(), 0, Vec::new(), 1.0, true)];
    while let Some((s, ion, prefix, weight, valid)) = stack.pop() {
        if ion == n_ions {
            let key = if valid { Some(prefix) } else { None };
            *out.entry(key).or_insert(0.0) += weight;
            continue;
        }
        let mut current = s;
        let mut remaining = weight;
        let mut resolved = false;
        for &(n, unshelve) in &steps {
            if let Some(level) = unshelve {
                current = current.swap_levels(ion, Level::Down, level)?;
            }
            let p = current.branch_weight(ion, &mask).clamp(0.0, 1.0);
            if p > 0.0 {
                if let Some(bright) = current.collapse(ion, &mask, true) {
                    let mut next = prefix.clone();
                    next.push(n);
                    stack.push((bright, ion + 1, next, remaining * p, valid));
                }
            }
            remaining *= 1.0 - p;
            match current.collapse(ion, &mask, false) {
                Some(dark) if p < 1.0 => current = dark,
                _ => {
                    resolved = true;
                    break;
                }
            }
        }
        if !resolved && remaining > 0.0 {
            let mut next = prefix.clone();
            let ok = match all_dark {
                Some(n) => {
                    next.push(n);
                    valid
                }
                None => {
                    next.push(usize::MAX);
                    false
                }
            };
            stack.push((current, ion + 1, next, remaining, ok));
        }
    }
    Ok(out)
}

/// Identifies one shot: stream `index` of the run keyed by `master`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShotSeed {
    pub master: u64,
    pub index: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotRecord {
    pub phonons: Vec<Option<usize>>,
    pub detections: Vec<Vec<Fluorescence>>,
    pub seed: ShotSeed,
}

impl ShotRecord {
    /// Joint outcome, or `None` for an invalid shot.
    pub fn joint(&self) -> Option<Vec<usize>> {
        self.phonons.iter().copied().collect()
    }
}

/// State right before readout.
#[derive(Clone, Debug, PartialEq)]
pub enum Mapped {
    Pure(StateVector),
    Mixed(DensityOperator),
}

impl Mapped {
    pub fn outcome_distribution(&self, config: &ProtocolConfig) -> Result<BTreeMap<Option<Vec<usize>>, f64>> {
        match self {
            Mapped::Pure(s) => outcome_distribution(s, config),
            Mapped::Mixed(r) => outcome_distribution(r, config),
        }
    }
}

/// Hopping, mapping and readout settings shared by all shots of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub config: ProtocolConfig,
    pub hop: HoppingParams,
    pub decoherence: DecoherenceParams,
}

impl Experiment {
    pub fn new(config: ProtocolConfig, hop: HoppingParams, decoherence: DecoherenceParams) -> Self {
        Self { config, hop, decoherence }
    }

    /// Free hopping for `hop_time` followed by mapping of all ions. The
    /// result is deterministic; randomness enters only at readout.
    pub fn prepare(&self, input: &StateVector, hop_time: f64) -> Result<Mapped> {
        if !(hop_time >= 0.0 && hop_time.is_finite()) {
            return Err(crate::error::invalid("hop_time", alloc::format!("must be non-negative, got {hop_time}")));
        }
        let basis = input.basis().clone();
        self.config.validate(basis.levels())?;
        let segments = self.config.chain_segments(basis.n_ions());
        if !self.decoherence.enabled() {
            let h = crate::dynamics::build_hopping_hamiltonian(&basis, &self.hop)?;
            let evolved = Propagator::new(&h, hop_time)?.apply(input)?;
            return Ok(Mapped::Pure(run_segments(&evolved, &segments, &self.config, &self.hop)?));
        }
        self.prepare_density(&input.to_density(), hop_time).map(Mapped::Mixed)
    }

    /// [`Experiment::prepare`] for a mixed input, always through the
    /// master equation.
    pub fn prepare_density(&self, input: &DensityOperator, hop_time: f64) -> Result<DensityOperator> {
        if !(hop_time >= 0.0 && hop_time.is_finite()) {
            return Err(crate::error::invalid("hop_time", alloc::format!("must be non-negative, got {hop_time}")));
        }
        let basis = input.basis().clone();
        self.config.validate(basis.levels())?;
        let segments = self.config.chain_segments(basis.n_ions());
        let rho = pulses::schedule_density(
            input,
            &[Segment::Wait(hop_time)],
            Some(&self.hop),
            &self.config.rabi,
            &self.decoherence,
        )?;
        let hop = match self.config.timing {
            Timing::Ideal => None,
            Timing::HoppingAware => Some(&self.hop),
        };
        pulses::schedule_density(&rho, &segments, hop, &self.config.rabi, &self.decoherence)
    }

    /// Reads out every ion of a prepared state with shot stream `seed`.
    pub fn sample(&self, mapped: &Mapped, seed: ShotSeed) -> Result<ShotRecord> {
        let mut rng = shot_rng(seed.master, seed.index);
        match mapped {
            Mapped::Pure(s) => self.sample_with(s, seed, &mut rng),
            Mapped::Mixed(r) => self.sample_with(r, seed, &mut rng),
        }
    }

    fn sample_with<S: Measurable, R: Rng + ?Sized>(&self, state: &S, seed: ShotSeed, rng: &mut R) -> Result<ShotRecord> {
        let n_ions = state.basis().n_ions();
        let mut current = state.clone();
        let mut phonons = Vec::with_capacity(n_ions);
        let mut detections = Vec::with_capacity(n_ions);
        for ion in 0..n_ions {
            let (r, next) = readout(&current, ion, &self.config, rng)?;
            phonons.push(r.phonons);
            detections.push(r.detections);
            current = next;
        }
        Ok(ShotRecord { phonons, detections, seed })
    }

    /// `shots` shots with streams `0..shots` of `master_seed`.
    pub fn run_shots(&self, input: &StateVector, hop_time: f64, master_seed: u64, shots: u64) -> Result<Vec<ShotRecord>> {
        let mapped = self.prepare(input, hop_time)?;
        (0..shots).map(|index| self.sample(&mapped, ShotSeed { master: master_seed, index })).collect()
    }
}

/// One complete shot: hopping for `hop_time`, mapping, readout.
pub fn run_shot(input: &StateVector, hop_time: f64, experiment: &Experiment, seed: ShotSeed) -> Result<ShotRecord> {
    let mapped = experiment.prepare(input, hop_time)?;
    experiment.sample(&mapped, seed)
}

/// Joint-outcome counts with binomial errors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub n_ions: usize,
    pub shots: u64,
    pub counts: BTreeMap<Vec<usize>, u64>,
    pub invalid: u64,
}

impl Histogram {
    pub fn count(&self, outcome: &[usize]) -> u64 {
        self.counts.get(outcome).copied().unwrap_or(0)
    }

    pub fn probability(&self, outcome: &[usize]) -> f64 {
        self.count(outcome) as f64 / self.shots as f64
    }

    /// `√(p(1−p)/N)`
    pub fn sigma(&self, outcome: &[usize]) -> f64 {
        binomial_sigma(self.probability(outcome), self.shots)
    }

    pub fn invalid_rate(&self) -> f64 {
        self.invalid as f64 / self.shots as f64
    }

    /// Counts of `ion`'s inferred phonon number over valid shots.
    pub fn marginal(&self, ion: usize) -> BTreeMap<usize, u64> {
        let mut out = BTreeMap::new();
        for (k, c) in &self.counts {
            *out.entry(k[ion]).or_insert(0) += c;
        }
        out
    }
}

pub fn binomial_sigma(p: f64, shots: u64) -> f64 {
    (p * (1.0 - p) / shots as f64).sqrt()
}

pub fn estimate_distribution(records: &[ShotRecord]) -> Result<Histogram> {
    let first = records.first().ok_or(Error::EmptyRecords)?;
    let mut hist = Histogram { n_ions: first.phonons.len(), shots: 0, counts: BTreeMap::new(), invalid: 0 };
    for r in records {
        hist.shots += 1;
        match r.joint() {
            Some(k) => *hist.counts.entry(k).or_insert(0) += 1,
            None => hist.invalid += 1,
        }
    }
    Ok(hist)
}
