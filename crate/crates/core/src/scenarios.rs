//! Named experiments: Fock-state preparation, single-ion detection, the
//! two-ion hopping interference, the passage fidelity sweep and the
//! hopping-during-mapping error budget.
//!
//! Every function here is deterministic given its seed. Sampled results
//! use shot streams `0..shots` of a per-point seed derived from the run
//! seed, so points can be computed in any order.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::dynamics::{DecoherenceParams, HoppingParams};
use crate::error::{invalid, Result};
use crate::fock::{Basis, StateVector};
use crate::protocol::{
    estimate_distribution, Experiment, Histogram, Mapped, ProtocolConfig, ShotSeed, Timing,
};
use crate::pulses::{self, passage_fidelity, PulseSpec, Segment, SweepSpec};
use crate::rng::derive_seed;

/// Pulses taking `ion` from `|down,0⟩` to `|down,n⟩`: per step a blue
/// sideband π pulse calibrated for the manifold it drives, then a carrier
/// π pulse.
pub fn fock_preparation(ion: usize, n: usize) -> Vec<Segment> {
    (0..n)
        .flat_map(|k| {
            [
                Segment::pulse(PulseSpec::blue(ion, PI / ((k + 1) as f64).sqrt(), 0.0)),
                Segment::pulse(PulseSpec::carrier(ion, PI, 0.0)),
            ]
        })
        .collect()
}

/// Ideal Fock preparation of `ion`, which must start in `|down,0⟩`. Other
/// ions are untouched.
pub fn prepare_fock(state: &StateVector, ion: usize, n: usize) -> Result<StateVector> {
    let basis = state.basis();
    basis.check_ion(ion)?;
    if n > basis.n_max() {
        return Err(crate::Error::PhononOutOfRange { n, n_max: basis.n_max() });
    }
    let rabi = pulses::RabiParams::experiment();
    pulses::apply_ideal(state, &fock_preparation(ion, n), &rabi)
}

/// Shared physical settings of a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Setup {
    pub protocol: ProtocolConfig,
    pub hop: HoppingParams,
    pub decoherence: DecoherenceParams,
    /// Phonon truncation.
    pub n_max: usize,
}

impl Setup {
    pub fn new(protocol: ProtocolConfig, hop: HoppingParams) -> Self {
        let n_max = protocol.scheme.max_n() + 1;
        Self { protocol, hop, decoherence: DecoherenceParams::default(), n_max }
    }

    fn basis(&self, n_ions: usize) -> Result<Arc<Basis>> {
        Basis::new(n_ions, self.n_max, &self.protocol.levels())
    }

    fn experiment(&self) -> Experiment {
        Experiment::new(self.protocol.clone(), self.hop, self.decoherence)
    }
}

/// Sampled histogram and the exact outcome probabilities it estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampled {
    pub histogram: Histogram,
    /// Exact joint-outcome probabilities; key `None` collects invalid shots.
    pub exact: BTreeMap<Option<Vec<usize>>, f64>,
}

impl Sampled {
    pub fn exact_probability(&self, outcome: &[usize]) -> f64 {
        self.exact.get(&Some(outcome.to_vec())).copied().unwrap_or(0.0)
    }
}

fn sample(experiment: &Experiment, mapped: &Mapped, seed: u64, shots: u64) -> Result<Sampled> {
    if shots == 0 {
        return Err(invalid("shots", "must be at least 1"));
    }
    let records = (0..shots)
        .map(|index| experiment.sample(mapped, ShotSeed { master: seed, index }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sampled {
        histogram: estimate_distribution(&records)?,
        exact: mapped.outcome_distribution(&experiment.config)?,
    })
}

/// Single-ion detection of a prepared Fock state `|n⟩`. With decoherence
/// the preparation pulses dephase as well.
pub fn scenario_fig2(n: usize, shots: u64, seed: u64, setup: &Setup) -> Result<Sampled> {
    let setup = Setup { n_max: setup.n_max.max(n), ..setup.clone() };
    let basis = setup.basis(1)?;
    let ground = StateVector::fock(basis, &[0])?;
    let experiment = setup.experiment();
    let prep = fock_preparation(0, n);
    let mapped = if setup.decoherence.enabled() {
        let rho = pulses::schedule_density(&ground.to_density(), &prep, None, &setup.protocol.rabi, &setup.decoherence)?;
        Mapped::Mixed(experiment.prepare_density(&rho, 0.0)?)
    } else {
        let input = pulses::apply_ideal(&ground, &prep, &setup.protocol.rabi)?;
        experiment.prepare(&input, 0.0)?
    };
    sample(&experiment, &mapped, derive_seed(seed, n as u64), shots)
}

/// `[P(1,1), P(2,0), P(0,2)]` after hopping for `t` from `|1,1⟩`.
pub fn hom_analytic(kappa: f64, t: f64) -> [f64; 3] {
    let (s, c) = (kappa * t).sin_cos();
    [c * c, s * s / 2.0, s * s / 2.0]
}

/// Outcome order of the two-ion interference tables.
pub const HOM_OUTCOMES: [[usize; 2]; 3] = [[1, 1], [2, 0], [0, 2]];

#[derive(Clone, Debug, PartialEq)]
pub struct Fig3Point {
    pub time: f64,
    pub sampled: Sampled,
    /// Ideal hopping curves at `time`, in [`HOM_OUTCOMES`] order.
    pub analytic: [f64; 3],
}

impl Fig3Point {
    /// Exact probabilities in [`HOM_OUTCOMES`] order.
    pub fn direct(&self) -> [f64; 3] {
        HOM_OUTCOMES.map(|o| self.sampled.exact_probability(&o))
    }
}

/// Two ions start in `|1,1⟩`, hop for `time`, and are read out. `index`
/// selects the point's shot streams.
pub fn scenario_fig3_point(time: f64, index: usize, shots: u64, seed: u64, setup: &Setup) -> Result<Fig3Point> {
    let basis = setup.basis(2)?;
    let input = StateVector::fock(basis, &[1, 1])?;
    let experiment = setup.experiment();
    let mapped = experiment.prepare(&input, time)?;
    Ok(Fig3Point {
        time,
        sampled: sample(&experiment, &mapped, derive_seed(seed, index as u64), shots)?,
        analytic: hom_analytic(setup.hop.kappa, time),
    })
}

pub fn scenario_fig3(times: &[f64], shots: u64, seed: u64, setup: &Setup) -> Result<Vec<Fig3Point>> {
    check_time_grid(times)?;
    times.iter().enumerate().map(|(i, &t)| scenario_fig3_point(t, i, shots, seed, setup)).collect()
}

/// Grid must be sorted and non-negative.
pub fn check_time_grid(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(invalid("times", "must be finite and non-negative"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("times", "must be sorted"));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TqdRow {
    pub n: usize,
    /// Transfer fidelity `|down,n⟩ → |up,n−1⟩`; survival for `n = 0`.
    pub fidelity: f64,
}

/// Passage fidelity for each `n` in `n_range`.
pub fn scenario_tqd(sweep: &SweepSpec, n_range: core::ops::RangeInclusive<usize>) -> Result<Vec<TqdRow>> {
    n_range.map(|n| Ok(TqdRow { n, fidelity: passage_fidelity(sweep, n)? })).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BudgetRow {
    pub kappa: f64,
    /// Length of the hopping-aware mapping.
    pub duration: f64,
    /// Total-variation distance between the readout distribution with
    /// hopping during mapping and the instantaneous readout of the input.
    pub infidelity: f64,
    /// `1 − |⟨ideal|actual⟩|²` of the mapped states.
    pub state_infidelity: f64,
    /// Smallest total-variation distance to the instantaneous readout of
    /// the input after hopping for some `t` within the mapping window.
    pub offset_infidelity: f64,
    /// The `t` attaining `offset_infidelity`.
    pub effective_time: f64,
    /// Readout distribution with hopping during mapping.
    pub distribution: BTreeMap<Option<Vec<usize>>, f64>,
}

fn total_variation(a: &BTreeMap<Option<Vec<usize>>, f64>, b: &BTreeMap<Option<Vec<usize>>, f64>) -> f64 {
    let mut keys: Vec<&Option<Vec<usize>>> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.iter()
        .map(|k| (a.get(*k).unwrap_or(&0.0) - b.get(*k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
        / 2.0
}

/// Number of grid points used to locate the effective readout time.
const OFFSET_GRID: usize = 80;

/// Error budget of mapping two ions in `phonons` while they hop. The
/// timing in `setup` is ignored: the actual run co-evolves hopping with
/// the pulses, the reference is instantaneous.
pub fn scenario_mapping_budget(kappas: &[f64], phonons: [usize; 2], setup: &Setup) -> Result<Vec<BudgetRow>> {
    let basis = setup.basis(2)?;
    let input = StateVector::fock(basis.clone(), &phonons)?;
    let aware = ProtocolConfig { timing: Timing::HoppingAware, ..setup.protocol.clone() };
    let ideal = ProtocolConfig { timing: Timing::Ideal, ..setup.protocol.clone() };
    let duration = pulses::schedule_duration(&aware.chain_segments(2), &aware.rabi)?;
    let mut rows = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let hop = HoppingParams::new(kappa, setup.hop.omega_y)?.with_frame(setup.hop.frame);
        let actual = Experiment::new(aware.clone(), hop, DecoherenceParams::default()).prepare(&input, 0.0)?;
        let reference = Experiment::new(ideal.clone(), hop, DecoherenceParams::default());
        let Mapped::Pure(actual_state) = &actual else { unreachable!("no decoherence") };
        let Mapped::Pure(ideal_state) = reference.prepare(&input, 0.0)? else { unreachable!("no decoherence") };
        let distribution = actual.outcome_distribution(&aware)?;
        let instantaneous = |t: f64| reference.prepare(&input, t)?.outcome_distribution(&ideal);
        let infidelity = total_variation(&distribution, &instantaneous(0.0)?);
        let (mut offset_infidelity, mut effective_time) = (infidelity, 0.0);
        for k in 1..=OFFSET_GRID {
            let t = duration * k as f64 / OFFSET_GRID as f64;
            let d = total_variation(&distribution, &instantaneous(t)?);
            if d < offset_infidelity {
                (offset_infidelity, effective_time) = (d, t);
            }
        }
        rows.push(BudgetRow {
            kappa,
            duration,
            infidelity,
            state_infidelity: (1.0 - actual_state.fidelity(&ideal_state)).max(0.0),
            offset_infidelity,
            effective_time,
            distribution,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::standard_levels;
    use crate::pulses::RabiParams;

    fn hop(k_khz: f64) -> HoppingParams {
        HoppingParams::new(2.0 * PI * k_khz * 1e3, 2.0 * PI * 3e6).unwrap()
    }

    #[test]
    fn fock_preparation_is_exact() {
        let b = Basis::new(1, 4, &standard_levels(1)).unwrap();
        let ground = StateVector::fock(b.clone(), &[0]).unwrap();
        assert!(fock_preparation(0, 0).is_empty());
        for n in 0..=4 {
            let s = prepare_fock(&ground, 0, n).unwrap();
            let target = StateVector::fock(b.clone(), &[n]).unwrap();
            assert!((s.fidelity(&target) - 1.0).abs() < 1e-12, "n = {n}");
        }
        assert!(prepare_fock(&ground, 0, 5).is_err());
    }

    #[test]
    fn fig2_noiseless_is_certain() {
        let setup = Setup::new(ProtocolConfig::simplified(), hop(3.0));
        for n in 0..=2 {
            let r = scenario_fig2(n, 500, 1, &setup).unwrap();
            assert_eq!(r.histogram.count(&[n]), 500);
            assert_eq!(r.histogram.sigma(&[n]), 0.0);
        }
    }

    #[test]
    fn fig2_decoherence_leaks() {
        let mut setup = Setup::new(ProtocolConfig::simplified(), hop(3.0));
        setup.decoherence = DecoherenceParams::new(2e3).unwrap();
        let r = scenario_fig2(1, 200, 1, &setup).unwrap();
        let p1 = r.exact_probability(&[1]);
        assert!(p1 < 0.999 && p1 > 0.5, "{p1}");
        assert!(r.exact_probability(&[0]) + r.exact_probability(&[2]) > 1e-3);
        assert!((r.exact.values().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fig3_direct_matches_analytic() {
        let setup = Setup::new(ProtocolConfig::simplified(), hop(3.0));
        let times: Vec<f64> = (0..6).map(|k| k as f64 * 30e-6).collect();
        for p in scenario_fig3(&times, 10, 3, &setup).unwrap() {
            let d = p.direct();
            for i in 0..3 {
                assert!((d[i] - p.analytic[i]).abs() < 1e-9);
            }
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
        assert!(scenario_fig3(&[2.0, 1.0], 10, 3, &setup).is_err());
    }

    #[test]
    fn tqd_limits() {
        let rows = scenario_tqd(&SweepSpec::transitionless(), 0..=7).unwrap();
        assert!(rows.iter().all(|r| r.fidelity > 0.99));
        let off = SweepSpec { peak_rabi: 0.0, counterdiabatic: false, ..SweepSpec::transitionless() };
        let rows = scenario_tqd(&off, 0..=3).unwrap();
        assert_eq!(rows[0].fidelity, 1.0);
        assert!(rows[1..].iter().all(|r| r.fidelity < 1e-12));
    }

    #[test]
    fn budget_vanishes_without_hopping() {
        let mut protocol = ProtocolConfig::simplified();
        protocol.addressing = crate::protocol::Addressing::Simultaneous;
        let setup = Setup::new(protocol, hop(3.0));
        let rows = scenario_mapping_budget(&[0.0, 2.0 * PI * 1e3], [1, 1], &setup).unwrap();
        assert!(rows[0].infidelity < 1e-9);
        assert!(rows[0].state_infidelity < 1e-9);
        assert!(rows[1].infidelity > rows[0].infidelity);
        assert!(rows[1].offset_infidelity <= rows[1].infidelity);
    }

    #[test]
    fn shorter_mapping_has_smaller_budget() {
        let mut protocol = ProtocolConfig::simplified();
        protocol.addressing = crate::protocol::Addressing::Simultaneous;
        let mut last = f64::INFINITY;
        for scale in [1.0, 2.0, 4.0] {
            protocol.rabi = RabiParams::new(2.0 * PI * 500e3 * scale, 0.0427).unwrap();
            let setup = Setup::new(protocol.clone(), hop(3.0));
            let row = &scenario_mapping_budget(&[2.0 * PI * 3e3], [1, 1], &setup).unwrap()[0];
            assert!(row.infidelity < last);
            last = row.infidelity;
        }
    }
}
