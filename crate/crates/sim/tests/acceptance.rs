//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use phonon_core::dynamics::{DecoherenceParams, HoppingParams, PhysicalIonParams};
use phonon_core::fock::standard_levels;
use phonon_core::linalg::DenseMatrix;
use phonon_core::protocol::{
    estimate_distribution, map_chain, outcome_distribution, Experiment, Mapped, ProtocolConfig, ShotSeed,
};
use phonon_core::pulses::{composite_rsb, passage_fidelity, SweepSpec};
use phonon_core::rng::shot_rng;
use phonon_core::scenarios::{scenario_mapping_budget, Setup};
use phonon_core::{dynamics, Basis, DensityOperator, Level, StateVector, C64};
use phonon_sim::{Overrides, RunConfig, ScenarioKind};
use rand::Rng;

const KAPPA_21UM_KHZ: (f64, f64) = (2.9, 3.4);
const HALF_PERIOD_40UM_MS: (f64, f64) = (0.9, 1.1);
const HOM_GRID_POINTS: usize = 50;
const HOM_TOL: f64 = 1e-6;
const COMPOSITE_TOL: f64 = 1e-9;
const TQD_DURATION: f64 = 70e-6;
const TQD_PEAK_RABI: f64 = 2.0 * PI * 40e3;
const TQD_MIN_FIDELITY: f64 = 0.99;
const BORN_CASES: usize = 20;
const BORN_SHOTS: u64 = 10_000;
const BORN_SIGMAS: f64 = 3.0;
const BORN_MIN_PASSING: usize = 19;
const IMMUNITY_TOL: f64 = 1e-10;
const BUDGET_KAPPA: f64 = 2.0 * PI * 3e3;
const BUDGET_MAX_INFIDELITY: f64 = 0.1;
const BUDGET_MONOTONE_KHZ: [f64; 3] = [1.0, 2.0, 4.0];
const STAT_SHOTS: u64 = 500;

struct Outcome {
    pass: bool,
    detail: String,
}

fn omega_y() -> f64 {
    2.0 * PI * 3.0e6
}

fn hopping_rate_formula() -> Outcome {
    let k21 = dynamics::hopping_rate(&PhysicalIonParams::calcium40(21e-6, omega_y())).unwrap();
    let k40 = dynamics::hopping_rate(&PhysicalIonParams::calcium40(40e-6, omega_y())).unwrap();
    let khz = k21 / (2.0 * PI * 1e3);
    let half_ms = PI / k40 * 1e3;
    Outcome {
        pass: (KAPPA_21UM_KHZ.0..=KAPPA_21UM_KHZ.1).contains(&khz)
            && (HALF_PERIOD_40UM_MS.0..=HALF_PERIOD_40UM_MS.1).contains(&half_ms),
        detail: format!(
            "κ/2π(21 µm) = {khz:.3} kHz in {KAPPA_21UM_KHZ:?}; π/κ(40 µm) = {half_ms:.3} ms in {HALF_PERIOD_40UM_MS:?}"
        ),
    }
}

/// Eigen-decomposition of a real symmetric 3×3 matrix by cyclic Jacobi
/// rotations. Returns `(eigenvalues, eigenvectors as columns)`.
fn jacobi3(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..50 {
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

fn hom_oracle() -> Outcome {
    let kappa = 2.0 * PI * 3e3;
    let g = kappa / 2.0 * 2f64.sqrt();
    // block in the order |2,0⟩, |1,1⟩, |0,2⟩
    let (vals, vecs) = jacobi3([[0.0, g, 0.0], [g, 0.0, g], [0.0, g, 0.0]]);
    let oracle = |t: f64| -> [f64; 3] {
        let mut amp = [C64::new(0.0, 0.0); 3];
        for (k, &e) in vals.iter().enumerate() {
            let overlap = vecs[1][k];
            for (j, a) in amp.iter_mut().enumerate() {
                *a += C64::from_polar(1.0, -e * t) * overlap * vecs[j][k];
            }
        }
        [amp[1].norm_sqr(), amp[0].norm_sqr(), amp[2].norm_sqr()]
    };

    let setup = Setup::new(ProtocolConfig::simplified(), HoppingParams::new(kappa, omega_y()).unwrap());
    let experiment = Experiment::new(setup.protocol.clone(), setup.hop, DecoherenceParams::default());
    let basis = Basis::new(2, setup.n_max, &setup.protocol.levels()).unwrap();
    let input = StateVector::fock(basis, &[1, 1]).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_formula: f64 = 0.0;
    for k in 0..HOM_GRID_POINTS {
        let t = k as f64 * (2.0 * PI / kappa) / (HOM_GRID_POINTS - 1) as f64;
        let dist = experiment.prepare(&input, t).unwrap().outcome_distribution(&setup.protocol).unwrap();
        let got = [[1, 1], [2, 0], [0, 2]].map(|o: [usize; 2]| dist.get(&Some(o.to_vec())).copied().unwrap_or(0.0));
        let want = oracle(t);
        let (s, c) = (kappa * t).sin_cos();
        let formula = [c * c, s * s / 2.0, s * s / 2.0];
        for i in 0..3 {
            worst = worst.max((got[i] - want[i]).abs());
            worst_formula = worst_formula.max((want[i] - formula[i]).abs());
        }
    }
    Outcome {
        pass: worst < HOM_TOL && worst_formula < HOM_TOL,
        detail: format!(
            "{HOM_GRID_POINTS} points: max |detected − ED| = {worst:.2e}, max |ED − cos²/sin²| = {worst_formula:.2e} (tol {HOM_TOL:e})"
        ),
    }
}

fn composite_exactness() -> Outcome {
    let b = Basis::new(1, 3, &standard_levels(0)).unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for n in [1, 2] {
        let s = StateVector::product(b.clone(), &[(Level::Down, n)]).unwrap();
        let out = composite_rsb(&s, 0).unwrap();
        let target = StateVector::product(b.clone(), &[(Level::Up, n - 1)]).unwrap();
        let p = out.fidelity(&target);
        worst = worst.max((1.0 - p).abs());
        parts.push(format!("P(↓,{n} → ↑,{}) = {p:.12}", n - 1));
    }
    Outcome { pass: worst < COMPOSITE_TOL, detail: format!("{} (tol {COMPOSITE_TOL:e})", parts.join(", ")) }
}

fn tqd_claim() -> Outcome {
    let sweep = SweepSpec { duration: TQD_DURATION, peak_rabi: TQD_PEAK_RABI, ..SweepSpec::transitionless() };
    let fids: Vec<f64> = (1..=7).map(|n| passage_fidelity(&sweep, n).unwrap()).collect();
    let b = Basis::new(1, 7, &standard_levels(0)).unwrap();
    let ground = StateVector::fock(b, &[0]).unwrap();
    let survival = phonon_core::pulses::adiabatic_passage(&ground, 0, &sweep).unwrap().state.fidelity(&ground);
    let min = fids.iter().copied().fold(f64::INFINITY, f64::min);
    Outcome {
        pass: min > TQD_MIN_FIDELITY && survival > TQD_MIN_FIDELITY,
        detail: format!("min transfer fidelity n=1..7 = {min:.6}, ground survival = {survival:.6} (need > {TQD_MIN_FIDELITY})"),
    }
}

fn born_rule_statistics() -> Outcome {
    let cfg = ProtocolConfig::simplified();
    let basis = Basis::new(2, 2, &cfg.levels()).unwrap();
    let hop = HoppingParams::new(2.0 * PI * 3e3, omega_y()).unwrap();
    let experiment = Experiment::new(cfg.clone(), hop, DecoherenceParams::default());
    let mut rng = shot_rng(2024, 0);
    let mut passing = 0;
    let mut worst_z: f64 = 0.0;
    for case in 0..BORN_CASES {
        let weights: Vec<f64> = (0..9).map(|_| rng.random::<f64>().powi(2)).collect();
        let total: f64 = weights.iter().sum();
        let mut m = DenseMatrix::zeros(basis.dim());
        for (k, w) in weights.iter().enumerate() {
            let idx = basis.index_of(&[(0, k / 3), (0, k % 3)]);
            m[(idx, idx)] = C64::new(w / total, 0.0);
        }
        let rho = DensityOperator::new(basis.clone(), m).unwrap();
        let mapped = Mapped::Mixed(experiment.prepare_density(&rho, 0.0).unwrap());
        let records: Vec<_> = (0..BORN_SHOTS)
            .map(|index| experiment.sample(&mapped, ShotSeed { master: 77, index: index + case as u64 * BORN_SHOTS }))
            .collect::<Result<_, _>>()
            .unwrap();
        let hist = estimate_distribution(&records).unwrap();
        let mut ok = hist.invalid == 0;
        for (k, w) in weights.iter().enumerate() {
            let p = w / total;
            let observed = hist.probability(&[k / 3, k % 3]);
            let sigma = (p * (1.0 - p) / BORN_SHOTS as f64).sqrt();
            if sigma == 0.0 {
                ok &= observed == p;
            } else {
                let z = (observed - p).abs() / sigma;
                worst_z = worst_z.max(z);
                ok &= z <= BORN_SIGMAS;
            }
        }
        passing += usize::from(ok);
    }
    Outcome {
        pass: passing >= BORN_MIN_PASSING,
        detail: format!(
            "{passing}/{BORN_CASES} inputs within {BORN_SIGMAS}σ in every bin over {BORN_SHOTS} shots (need ≥ {BORN_MIN_PASSING}); worst |z| = {worst_z:.2}"
        ),
    }
}

fn hopping_immunity() -> Outcome {
    let hop = HoppingParams::new(2.0 * PI * 3e3, omega_y()).unwrap();
    let mut rng = shot_rng(99, 0);
    let mut worst: f64 = 0.0;
    for cfg in [ProtocolConfig::simplified(), ProtocolConfig::general(2), ProtocolConfig::general(3)] {
        let max_n = cfg.scheme.max_n();
        let basis = Basis::new(2, max_n + 1, &cfg.levels()).unwrap();
        let h = dynamics::build_hopping_hamiltonian(&basis, &hop).unwrap();
        for _ in 0..5 {
            let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
            for n0 in 0..=max_n {
                for n1 in 0..=max_n {
                    amps[basis.index_of(&[(0, n0), (0, n1)])] =
                        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                }
            }
            let s = StateVector::new(basis.clone(), amps).unwrap();
            let mapped = map_chain(&s, &cfg, &hop).unwrap();
            let before = outcome_distribution(&mapped, &cfg).unwrap();
            for t in [1e-6, 83e-6, 1e-3, 0.1] {
                let after = outcome_distribution(&dynamics::evolve_unitary(&mapped, &h, t).unwrap(), &cfg).unwrap();
                for (k, p) in &before {
                    worst = worst.max((after.get(k).copied().unwrap_or(0.0) - p).abs());
                }
            }
        }
    }
    Outcome {
        pass: worst < IMMUNITY_TOL,
        detail: format!("max outcome change after extra hopping up to 100 ms = {worst:.2e} (tol {IMMUNITY_TOL:e})"),
    }
}

fn timing_budget() -> Outcome {
    let setup = Setup::new(ProtocolConfig::simplified(), HoppingParams::new(BUDGET_KAPPA, omega_y()).unwrap());
    let composite = phonon_core::pulses::composite_duration(&setup.protocol.rabi);
    let at = scenario_mapping_budget(&[BUDGET_KAPPA], [1, 1], &setup).unwrap().remove(0);
    let kappas: Vec<f64> = BUDGET_MONOTONE_KHZ.iter().map(|k| 2.0 * PI * k * 1e3).collect();
    let rows = scenario_mapping_budget(&kappas, [1, 1], &setup).unwrap();
    let series: Vec<f64> = rows.iter().map(|r| r.infidelity).collect();
    let monotone = series.windows(2).all(|w| w[1] > w[0]);
    Outcome {
        pass: at.infidelity < BUDGET_MAX_INFIDELITY && monotone,
        detail: format!(
            "composite {:.2} µs at κ = 2π×3 kHz: end-to-end infidelity = {:.3} (need < {BUDGET_MAX_INFIDELITY}); \
             infidelity at κ = 2π×{BUDGET_MONOTONE_KHZ:?} kHz = [{}] monotone = {monotone}; \
             offset-corrected {:.3} at effective time {:.1} µs",
            composite * 1e6,
            at.infidelity,
            series.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", "),
            at.offset_infidelity,
            at.effective_time * 1e6,
        ),
    }
}

fn statistical_machinery() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let file = phonon_sim::config::parse_file("[fig3]\nstart = \"0 µs\"\nstop = \"160 µs\"\npoints = 9\n").unwrap();
    let run_into = |name: &str| {
        let flags = Overrides {
            scenario: Some(ScenarioKind::Fig3),
            shots: Some(STAT_SHOTS as i64),
            seed: Some(5),
            out: Some(dir.path().join(name)),
        };
        let cfg = RunConfig::resolve(&file, &flags).unwrap();
        phonon_sim::run(&cfg).unwrap();
        std::fs::read(dir.path().join(name).join("fig3.csv")).unwrap()
    };
    let (a, b) = (run_into("a"), run_into("b"));
    let identical = a == b;
    let mut reader = csv::Reader::from_reader(a.as_slice());
    let mut rows = 0;
    let mut exact = true;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let p: f64 = rec[2].parse().unwrap();
        let sigma: f64 = rec[3].parse().unwrap();
        let counts: u64 = rec[4].parse().unwrap();
        let shots: u64 = rec[5].parse().unwrap();
        let expected_p = counts as f64 / STAT_SHOTS as f64;
        exact &= shots == STAT_SHOTS && p == expected_p && sigma == (expected_p * (1.0 - expected_p) / 500.0).sqrt();
        rows += 1;
    }
    Outcome {
        pass: identical && exact && rows > 0,
        detail: format!("{rows} rows: σ = √(p(1−p)/500) exactly: {exact}; same seed byte-identical CSV: {identical}"),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("hopping rate formula", hopping_rate_formula),
        ("two-ion hopping against exact diagonalization", hom_oracle),
        ("composite pulse exactness", composite_exactness),
        ("transitionless passage fidelity", tqd_claim),
        ("end-to-end Born-rule statistics", born_rule_statistics),
        ("hopping immunity after mapping", hopping_immunity),
        ("timing budget of hopping during mapping", timing_budget),
        ("statistical machinery and determinism", statistical_machinery),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {} {name}: {} ({:.1} s)", k + 1, outcome.detail, started.elapsed().as_secs_f64());
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
