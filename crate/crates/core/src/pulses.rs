//! Laser pulses on a single ion: carrier and sideband rotations, the
//! three-pulse composite red sideband, shelving swaps and chirped adiabatic
//! passage with an optional counterdiabatic correction.
//!
//! A rotation on a transition couples pairs `|d⟩ = |down, n⟩` and
//! `|u⟩ = |up, n'⟩` (`n' = n` carrier, `n − 1` red, `n + 1` blue) and acts on
//! each pair as `exp[i (θ_eff/2) (e^{iφ}|u⟩⟨d| + e^{−iφ}|d⟩⟨u|)]`. The
//! nominal angle `θ` is calibrated to the pair containing one phonon, so the
//! effective angle in a sideband pair is `θ √m` with `m = max(n, n')`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::dynamics::{
    self, build_hopping_hamiltonian, with_step_halving, DecoherenceParams, HoppingParams, Propagator,
};
use crate::error::{invalid, Result};
use crate::fock::{Basis, DensityOperator, Level, Operator, StateVector};
use crate::linalg::{SparseMatrix, C64, I, ONE, ZERO};
use alloc::sync::Arc;

/// Carrier and sideband Rabi frequencies (rad/s) and the shelving pulse
/// length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RabiParams {
    /// Carrier Rabi frequency `Ω₀`.
    pub carrier_rabi: f64,
    /// Lamb-Dicke parameter `η`; the one-phonon sideband Rabi frequency is `η Ω₀`.
    pub lamb_dicke: f64,
    /// Duration of a finite-length shelving pulse.
    pub shelve_duration: f64,
}

impl RabiParams {
    pub fn new(carrier_rabi: f64, lamb_dicke: f64) -> Result<Self> {
        if !(carrier_rabi > 0.0 && carrier_rabi.is_finite()) {
            return Err(invalid("carrier_rabi", alloc::format!("must be positive, got {carrier_rabi}")));
        }
        if !(lamb_dicke > 0.0 && lamb_dicke < 1.0) {
            return Err(invalid("lamb_dicke", alloc::format!("must lie in (0, 1), got {lamb_dicke}")));
        }
        Ok(Self { carrier_rabi, lamb_dicke, shelve_duration: PI / carrier_rabi })
    }

    /// Ω₀ = 2π × 500 kHz (1 µs carrier π pulse) and η = 0.0427, which puts
    /// the composite red-sideband sequence at about 40 µs.
    pub fn experiment() -> Self {
        Self::new(2.0 * PI * 500e3, 0.0427).expect("valid constants")
    }

    /// One-phonon sideband Rabi frequency `η Ω₀`.
    pub fn sideband_rabi(&self) -> f64 {
        self.carrier_rabi * self.lamb_dicke
    }
}

impl Default for RabiParams {
    fn default() -> Self {
        Self::experiment()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PulseKind {
    Carrier,
    RedSideband,
    BlueSideband,
    /// Swap of two internal levels, phonon number untouched.
    Shelve(Level, Level),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSpec {
    pub ion: usize,
    pub kind: PulseKind,
    /// Nominal rotation angle (rad). Ignored for [`PulseKind::Shelve`].
    pub theta: f64,
    /// Rotation-axis phase (rad).
    pub phi: f64,
}

impl PulseSpec {
    pub fn carrier(ion: usize, theta: f64, phi: f64) -> Self {
        Self { ion, kind: PulseKind::Carrier, theta, phi }
    }

    pub fn red(ion: usize, theta: f64, phi: f64) -> Self {
        Self { ion, kind: PulseKind::RedSideband, theta, phi }
    }

    pub fn blue(ion: usize, theta: f64, phi: f64) -> Self {
        Self { ion, kind: PulseKind::BlueSideband, theta, phi }
    }

    pub fn shelve(ion: usize, a: Level, b: Level) -> Self {
        Self { ion, kind: PulseKind::Shelve(a, b), theta: PI, phi: 0.0 }
    }

    /// Pulse length from `θ = Ω t`.
    pub fn duration(&self, rabi: &RabiParams) -> f64 {
        match self.kind {
            PulseKind::Carrier => self.theta / rabi.carrier_rabi,
            PulseKind::RedSideband | PulseKind::BlueSideband => self.theta / rabi.sideband_rabi(),
            PulseKind::Shelve(..) => rabi.shelve_duration,
        }
    }

    fn validate(&self, basis: &Basis) -> Result<()> {
        basis.check_ion(self.ion)?;
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(invalid("theta", alloc::format!("must be non-negative, got {}", self.theta)));
        }
        if let PulseKind::Shelve(a, b) = self.kind {
            basis.level_index(a)?;
            basis.level_index(b)?;
            if a == b {
                return Err(invalid("shelve", "levels must differ"));
            }
        }
        Ok(())
    }
}

/// Coupled index pairs `(d, u, √m)` of a rotation on `ion`.
fn coupled_pairs(basis: &Basis, ion: usize, kind: PulseKind) -> Result<Vec<(usize, usize, f64)>> {
    let (lo, hi) = match kind {
        PulseKind::Shelve(a, b) => (basis.level_index(a)?, basis.level_index(b)?),
        _ => (basis.level_index(Level::Down)?, basis.level_index(Level::Up)?),
    };
    let n_max = basis.n_max();
    let mut pairs = Vec::new();
    for idx in 0..basis.dim() {
        let (level, n) = basis.component(idx, ion);
        if level != lo {
            continue;
        }
        let (partner_n, factor) = match kind {
            PulseKind::Carrier | PulseKind::Shelve(..) => (n, 1.0),
            PulseKind::RedSideband if n >= 1 => (n - 1, (n as f64).sqrt()),
            PulseKind::BlueSideband if n < n_max => (n + 1, ((n + 1) as f64).sqrt()),
            _ => continue,
        };
        pairs.push((idx, basis.with_component(idx, ion, hi, partner_n), factor));
    }
    Ok(pairs)
}

fn rotate_pairs(amps: &mut [C64], pairs: &[(usize, usize, f64)], theta: f64, phi: f64) {
    let e = C64::from_polar(1.0, phi);
    for &(d, u, f) in pairs {
        let alpha = theta * f / 2.0;
        let (c, s) = (alpha.cos(), alpha.sin());
        let (ad, au) = (amps[d], amps[u]);
        amps[d] = ad * c + I * s * e.conj() * au;
        amps[u] = au * c + I * s * e * ad;
    }
}

fn swap_pairs(amps: &mut [C64], pairs: &[(usize, usize, f64)]) {
    for &(a, b, _) in pairs {
        amps.swap(a, b);
    }
}

/// Applies one pulse exactly (block 2×2 rotations; shelving is an exact
/// permutation).
pub fn apply_pulse(state: &StateVector, spec: &PulseSpec) -> Result<StateVector> {
    let basis = state.basis().clone();
    spec.validate(&basis)?;
    let pairs = coupled_pairs(&basis, spec.ion, spec.kind)?;
    let mut out = state.clone();
    match spec.kind {
        PulseKind::Shelve(..) => swap_pairs(out.amplitudes_mut(), &pairs),
        _ => rotate_pairs(out.amplitudes_mut(), &pairs, spec.theta, spec.phi),
    }
    Ok(out)
}

/// Red- or blue-sideband rotation `R(θ, φ)`.
pub fn sideband_rotation(state: &StateVector, spec: &PulseSpec) -> Result<StateVector> {
    match spec.kind {
        PulseKind::RedSideband | PulseKind::BlueSideband => apply_pulse(state, spec),
        _ => Err(invalid("kind", "sideband_rotation needs a red or blue sideband pulse")),
    }
}

pub fn carrier_rotation(state: &StateVector, ion: usize, theta: f64, phi: f64) -> Result<StateVector> {
    apply_pulse(state, &PulseSpec::carrier(ion, theta, phi))
}

/// Ideal swap of two internal levels of `ion`, all phonon numbers.
pub fn shelve_swap(state: &StateVector, ion: usize, a: Level, b: Level) -> Result<StateVector> {
    apply_pulse(state, &PulseSpec::shelve(ion, a, b))
}

/// Rotating-frame Hamiltonian generating `spec` over `spec.duration(rabi)`.
pub fn pulse_hamiltonian(basis: &Arc<Basis>, spec: &PulseSpec, rabi: &RabiParams) -> Result<Operator> {
    spec.validate(basis)?;
    let pairs = coupled_pairs(basis, spec.ion, spec.kind)?;
    let mut entries = Vec::with_capacity(pairs.len() * 4);
    match spec.kind {
        PulseKind::Shelve(..) => {
            // (π/2T)(X − 1) on each pair exponentiates to an exact swap
            let w = C64::new(PI / (2.0 * rabi.shelve_duration), 0.0);
            for &(a, b, _) in &pairs {
                entries.extend([(a, b, w), (b, a, w), (a, a, -w), (b, b, -w)]);
            }
        }
        kind => {
            let omega = match kind {
                PulseKind::Carrier => rabi.carrier_rabi,
                _ => rabi.sideband_rabi(),
            };
            let e = C64::from_polar(1.0, spec.phi);
            for &(d, u, f) in &pairs {
                let g = -omega * f / 2.0;
                entries.push((u, d, e * g));
                entries.push((d, u, e.conj() * g));
            }
        }
    }
    Operator::new(basis.clone(), SparseMatrix::from_triplets(basis.dim(), entries))
}

/// `R_RSB(π/2, 0) R_RSB(π/√2, π/2) R_RSB(π/2, 0)` in application order.
pub fn composite_sequence(ion: usize) -> [PulseSpec; 3] {
    [
        PulseSpec::red(ion, PI / 2.0, 0.0),
        PulseSpec::red(ion, PI * FRAC_1_SQRT_2, PI / 2.0),
        PulseSpec::red(ion, PI / 2.0, 0.0),
    ]
}

pub fn composite_duration(rabi: &RabiParams) -> f64 {
    composite_sequence(0).iter().map(|p| p.duration(rabi)).sum()
}

/// Composite red-sideband transfer; exact for `n ∈ {1, 2}`.
pub fn composite_rsb(state: &StateVector, ion: usize) -> Result<StateVector> {
    composite_sequence(ion).iter().try_fold(state.clone(), |s, p| apply_pulse(&s, p))
}

/// Instantaneous ideal red-sideband transfer: a π rotation in every
/// manifold regardless of `√n`.
pub fn ideal_rsb_transfer(state: &StateVector, ion: usize) -> Result<StateVector> {
    let basis = state.basis().clone();
    basis.check_ion(ion)?;
    let pairs = coupled_pairs(&basis, ion, PulseKind::RedSideband)?;
    let flat: Vec<_> = pairs.into_iter().map(|(d, u, _)| (d, u, 1.0)).collect();
    let mut out = state.clone();
    rotate_pairs(out.amplitudes_mut(), &flat, PI, 0.0);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Envelope {
    /// `Ω(t) = Ω_sb sin²(πt/T)` with detuning
    /// `Δ(t) = (span/2) tanh(β(2t/T − 1)) / tanh β`.
    #[default]
    SinSquaredTanh,
}

/// Chirp steepness β of [`Envelope::SinSquaredTanh`].
pub const TANH_STEEPNESS: f64 = 4.0;

/// Chirped red-sideband adiabatic passage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSpec {
    /// Peak one-phonon sideband Rabi frequency (rad/s).
    pub peak_rabi: f64,
    /// Full detuning excursion (rad/s); the sweep runs from `−span/2` to `+span/2`.
    pub detuning_span: f64,
    pub duration: f64,
    pub envelope: Envelope,
    pub counterdiabatic: bool,
}

impl SweepSpec {
    /// 70 µs sweep at 2π × 40 kHz peak sideband Rabi frequency.
    pub fn transitionless() -> Self {
        Self {
            peak_rabi: 2.0 * PI * 40e3,
            detuning_span: 2.0 * PI * 200e3,
            duration: 70e-6,
            envelope: Envelope::SinSquaredTanh,
            counterdiabatic: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(invalid("duration", alloc::format!("must be non-negative, got {}", self.duration)));
        }
        if !(self.detuning_span > 0.0) {
            return Err(invalid("detuning_span", "must be positive"));
        }
        if !(self.peak_rabi >= 0.0 && self.peak_rabi.is_finite()) {
            return Err(invalid("peak_rabi", "must be non-negative"));
        }
        Ok(())
    }

    /// `(Ω, dΩ/dt, Δ, dΔ/dt)` at time `t`.
    fn controls(&self, t: f64) -> (f64, f64, f64, f64) {
        let big_t = self.duration;
        let x = PI * t / big_t;
        let omega = self.peak_rabi * x.sin().powi(2);
        let omega_dot = self.peak_rabi * (PI / big_t) * (2.0 * x).sin();
        let beta = TANH_STEEPNESS;
        let arg = beta * (2.0 * t / big_t - 1.0);
        let scale = self.detuning_span / 2.0 / beta.tanh();
        let delta = scale * arg.tanh();
        let sech = 1.0 / arg.cosh();
        let delta_dot = scale * (2.0 * beta / big_t) * sech * sech;
        (omega, omega_dot, delta, delta_dot)
    }

    /// Coefficients `(Δ/2, Ω_n/2, ϑ̇_n/2)` of the manifold with coupling `√n`.
    fn manifold_terms(&self, t: f64, sqrt_n: f64) -> (f64, f64, f64) {
        let (omega, omega_dot, delta, delta_dot) = self.controls(t);
        let (om, om_dot) = (omega * sqrt_n, omega_dot * sqrt_n);
        let cd = if self.counterdiabatic {
            let denom = delta * delta + om * om;
            if denom > 0.0 {
                (om_dot * delta - om * delta_dot) / denom
            } else {
                0.0
            }
        } else {
            0.0
        };
        (delta / 2.0, om / 2.0, cd / 2.0)
    }

    /// Bound on the angular frequencies in manifold `√n`, from a dense sample.
    fn max_frequency(&self, sqrt_n: f64) -> f64 {
        (0..=400)
            .map(|k| {
                let (a, b, c) = self.manifold_terms(self.duration * k as f64 / 400.0, sqrt_n);
                2.0 * (a * a + b * b + c * c).sqrt()
            })
            .fold(0.0, f64::max)
            * 1.5
    }
}

type Mat2 = [[C64; 2]; 2];

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

/// Propagator of one `{|up, n−1⟩, |down, n⟩}` manifold (row/column 0 is
/// `up`). The Hamiltonian is
/// `[[Δ/2, Ω_n/2 − iϑ̇/2], [Ω_n/2 + iϑ̇/2, −Δ/2]]`, where the `ϑ̇` terms
/// are the counterdiabatic correction for mixing angle `ϑ = atan2(Ω_n, Δ)`.
pub fn manifold_propagator(sweep: &SweepSpec, n: usize) -> Result<Mat2> {
    sweep.validate()?;
    let identity = [[ONE, ZERO], [ZERO, ONE]];
    if sweep.duration == 0.0 || n == 0 {
        return Ok(identity);
    }
    let sqrt_n = (n as f64).sqrt();
    let ham = |t: f64| -> Mat2 {
        let (dz, ox, cy) = sweep.manifold_terms(t, sqrt_n);
        [[C64::new(dz, 0.0), C64::new(ox, -cy)], [C64::new(ox, cy), C64::new(-dz, 0.0)]]
    };
    let rhs = |t: f64, u: &Mat2| -> Mat2 {
        let p = mat2_mul(&ham(t), u);
        [[-I * p[0][0], -I * p[0][1]], [-I * p[1][0], -I * p[1][1]]]
    };
    let add = |a: &Mat2, b: &Mat2, s: f64| -> Mat2 {
        let mut o = *a;
        for r in 0..2 {
            for c in 0..2 {
                o[r][c] += b[r][c] * s;
            }
        }
        o
    };
    let total = sweep.duration;
    let run = |steps: usize| {
        let h = total / steps as f64;
        let mut u = identity;
        for s in 0..steps {
            let t0 = s as f64 * h;
            let k1 = rhs(t0, &u);
            let k2 = rhs(t0 + h / 2.0, &add(&u, &k1, h / 2.0));
            let k3 = rhs(t0 + h / 2.0, &add(&u, &k2, h / 2.0));
            let k4 = rhs(t0 + h, &add(&u, &k3, h));
            for r in 0..2 {
                for c in 0..2 {
                    u[r][c] += (k1[r][c] + 2.0 * k2[r][c] + 2.0 * k3[r][c] + k4[r][c]) * (h / 6.0);
                }
            }
        }
        u
    };
    with_step_halving(total, sweep.max_frequency(sqrt_n), run, |a, b| {
        let mut d: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                d = d.max((a[r][c] - b[r][c]).norm());
            }
        }
        d
    })
}

/// Transfer fidelity `|⟨up, n−1| U |down, n⟩|²` of manifold `n`; for `n = 0`
/// the survival of `|down, 0⟩`, which the red sideband does not couple.
pub fn passage_fidelity(sweep: &SweepSpec, n: usize) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    Ok(manifold_propagator(sweep, n)?[0][1].norm_sqr())
}

/// Result of an adiabatic passage on a state.
#[derive(Clone, Debug, PartialEq)]
pub struct PassageReport {
    pub state: StateVector,
    /// Index `n`: transfer fidelity of manifold `n` (index 0: survival).
    pub fidelities: Vec<f64>,
}

/// Red-sideband adiabatic passage on `ion`, evolved manifold by manifold.
///
/// The odd detuning chirp integrates to zero, so unpaired `|down,0⟩` and
/// `|up,n_max⟩` components pick up no phase.
pub fn adiabatic_passage(state: &StateVector, ion: usize, sweep: &SweepSpec) -> Result<PassageReport> {
    let basis = state.basis().clone();
    basis.check_ion(ion)?;
    sweep.validate()?;
    let props: Vec<Mat2> = (0..=basis.n_max()).map(|n| manifold_propagator(sweep, n)).collect::<Result<_>>()?;
    let pairs = coupled_pairs(&basis, ion, PulseKind::RedSideband)?;
    let mut out = state.clone();
    let amps = out.amplitudes_mut();
    for (d, u, _) in pairs {
        let n = basis.component(d, ion).1;
        let p = &props[n];
        let (au, ad) = (amps[u], amps[d]);
        amps[u] = p[0][0] * au + p[0][1] * ad;
        amps[d] = p[1][0] * au + p[1][1] * ad;
    }
    let fidelities = props
        .iter()
        .enumerate()
        .map(|(n, p)| if n == 0 { 1.0 } else { p[0][1].norm_sqr() })
        .collect();
    Ok(PassageReport { state: out, fidelities })
}

/// Full-space sweep Hamiltonian on `ions` at time `t`.
fn sweep_hamiltonian(basis: &Arc<Basis>, ions: &[usize], sweep: &SweepSpec, t: f64) -> Result<SparseMatrix> {
    let down = basis.level_index(Level::Down)?;
    let up = basis.level_index(Level::Up)?;
    let (dz, _, _) = sweep.manifold_terms(t, 1.0);
    let mut entries = Vec::new();
    for &ion in ions {
        for idx in 0..basis.dim() {
            let (level, _) = basis.component(idx, ion);
            if level == up {
                entries.push((idx, idx, C64::new(dz, 0.0)));
            } else if level == down {
                entries.push((idx, idx, C64::new(-dz, 0.0)));
            }
        }
        for (d, u, f) in coupled_pairs(basis, ion, PulseKind::RedSideband)? {
            let (_, ox, cy) = sweep.manifold_terms(t, f);
            entries.push((u, d, C64::new(ox, -cy)));
            entries.push((d, u, C64::new(ox, cy)));
        }
    }
    Ok(SparseMatrix::from_triplets(basis.dim(), entries))
}

fn sweep_bound(basis: &Arc<Basis>, ions: &[usize], sweep: &SweepSpec) -> Result<f64> {
    sweep.validate()?;
    for (i, &ion) in ions.iter().enumerate() {
        basis.check_ion(ion)?;
        if ions[..i].contains(&ion) {
            return Err(invalid("sweep", "ions must be distinct"));
        }
    }
    sweep_hamiltonian(basis, ions, sweep, 0.0)?;
    Ok(sweep.max_frequency((basis.n_max() as f64).sqrt()) * ions.len().max(1) as f64)
}

/// One block of a pulse schedule.
#[derive(Clone, Debug, PartialEq)]
pub enum Segment {
    /// Pulses driven simultaneously on distinct ions; equal durations.
    Pulses(Vec<PulseSpec>),
    /// Instantaneous [`ideal_rsb_transfer`].
    IdealPassage { ion: usize },
    /// The same sweep driven on each listed ion.
    Sweep { ions: Vec<usize>, sweep: SweepSpec },
    /// Free evolution.
    Wait(f64),
}

impl Segment {
    pub fn pulse(spec: PulseSpec) -> Self {
        Segment::Pulses(vec![spec])
    }

    pub fn duration(&self, rabi: &RabiParams) -> Result<f64> {
        match self {
            Segment::Pulses(ps) => {
                let Some(first) = ps.first() else { return Ok(0.0) };
                let t = first.duration(rabi);
                for p in ps {
                    if (p.duration(rabi) - t).abs() > 1e-12 * t.max(1e-30) {
                        return Err(invalid("pulses", "simultaneous pulses need equal durations"));
                    }
                }
                for (i, p) in ps.iter().enumerate() {
                    if ps[..i].iter().any(|q| q.ion == p.ion) {
                        return Err(invalid("pulses", "simultaneous pulses must address distinct ions"));
                    }
                }
                Ok(t)
            }
            Segment::IdealPassage { .. } => Ok(0.0),
            Segment::Sweep { sweep, .. } => Ok(sweep.duration),
            Segment::Wait(t) => Ok(*t),
        }
    }

    fn driven_ions(&self) -> Vec<usize> {
        match self {
            Segment::Pulses(ps) => ps.iter().map(|p| p.ion).collect(),
            Segment::IdealPassage { ion } => vec![*ion],
            Segment::Sweep { ions, .. } => ions.clone(),
            Segment::Wait(_) => Vec::new(),
        }
    }
}

pub fn schedule_duration(segments: &[Segment], rabi: &RabiParams) -> Result<f64> {
    segments.iter().map(|s| s.duration(rabi)).sum()
}

/// Applies segments without hopping or decoherence. Pulses are exact,
/// sweeps are evolved per manifold, waits are the identity.
pub fn apply_ideal(state: &StateVector, segments: &[Segment], rabi: &RabiParams) -> Result<StateVector> {
    let mut s = state.clone();
    for seg in segments {
        seg.duration(rabi)?;
        s = match seg {
            Segment::Pulses(ps) => ps.iter().try_fold(s, |acc, p| apply_pulse(&acc, p))?,
            Segment::IdealPassage { ion } => ideal_rsb_transfer(&s, *ion)?,
            Segment::Sweep { ions, sweep } => ions
                .iter()
                .try_fold(s, |acc, &ion| adiabatic_passage(&acc, ion, sweep).map(|r| r.state))?,
            Segment::Wait(_) => s,
        };
    }
    Ok(s)
}

/// Segments undoing `segments` under [`apply_ideal`]. Sweeps have no
/// closed-form inverse and are rejected.
pub fn inverse_ideal(segments: &[Segment]) -> Result<Vec<Segment>> {
    let mut out = Vec::with_capacity(segments.len());
    for seg in segments.iter().rev() {
        match seg {
            Segment::Pulses(ps) => out.push(Segment::Pulses(
                ps.iter()
                    .map(|p| match p.kind {
                        PulseKind::Shelve(..) => *p,
                        _ => PulseSpec { phi: p.phi + PI, ..*p },
                    })
                    .collect(),
            )),
            // a π rotation has order four
            Segment::IdealPassage { ion } => out.extend(core::iter::repeat_n(Segment::IdealPassage { ion: *ion }, 3)),
            Segment::Sweep { .. } => return Err(invalid("segments", "sweeps cannot be inverted in closed form")),
            Segment::Wait(t) => out.push(Segment::Wait(*t)),
        }
    }
    Ok(out)
}

/// Co-evolves each segment's drive with the hopping Hamiltonian for the
/// segment's duration. With `κ = 0` this reduces to [`apply_ideal`].
pub fn schedule_with_hopping(
    state: &StateVector,
    segments: &[Segment],
    hop: &HoppingParams,
    rabi: &RabiParams,
) -> Result<StateVector> {
    let basis = state.basis().clone();
    let h_hop = build_hopping_hamiltonian(&basis, hop)?;
    let mut s = state.clone();
    for seg in segments {
        let t = seg.duration(rabi)?;
        s = match seg {
            Segment::Pulses(ps) => {
                let mut h = h_hop.clone();
                for p in ps {
                    h = h.add(&pulse_hamiltonian(&basis, p, rabi)?)?;
                }
                Propagator::new(&h, t)?.apply(&s)?
            }
            Segment::IdealPassage { ion } => ideal_rsb_transfer(&s, *ion)?,
            Segment::Sweep { ions, sweep } => {
                let hop_m = h_hop.matrix().clone();
                let bound = sweep_bound(&basis, ions, sweep)? + hop_m.norm_inf();
                dynamics::integrate_schrodinger(
                    &s,
                    |time| {
                        sweep_hamiltonian(&basis, ions, sweep, time)
                            .expect("levels validated above")
                            .add(&hop_m)
                    },
                    t,
                    bound,
                )?
            }
            Segment::Wait(_) => Propagator::new(&h_hop, t)?.apply(&s)?,
        };
    }
    Ok(s)
}

/// Density-operator version of the schedule. Pulses and sweeps dephase the
/// driven ions, waits dephase the phonon modes (see [`DecoherenceParams`]).
/// With `hop = None` there is no hopping at all.
pub fn schedule_density(
    rho: &DensityOperator,
    segments: &[Segment],
    hop: Option<&HoppingParams>,
    rabi: &RabiParams,
    decoherence: &DecoherenceParams,
) -> Result<DensityOperator> {
    let basis = rho.basis().clone();
    let h_hop = match hop {
        Some(h) => build_hopping_hamiltonian(&basis, h)?,
        None => Operator::zero(&basis),
    };
    let mut r = rho.clone();
    for seg in segments {
        let t = seg.duration(rabi)?;
        let mut jumps = Vec::new();
        for ion in seg.driven_ions() {
            jumps.extend(decoherence.pulse_jumps(&basis, ion)?);
        }
        r = match seg {
            Segment::Pulses(ps) => {
                let mut h = h_hop.clone();
                for p in ps {
                    h = h.add(&pulse_hamiltonian(&basis, p, rabi)?)?;
                }
                if jumps.is_empty() {
                    Propagator::new(&h, t)?.apply_density(&r)?
                } else {
                    dynamics::evolve_lindblad(&r, &h, &jumps, t)?
                }
            }
            Segment::IdealPassage { ion } => {
                let u = ideal_transfer_operator(&basis, *ion)?;
                let m = u.matrix().adjoint().left_mul_dense(&u.matrix().mul_dense(r.matrix()));
                DensityOperator::new(basis.clone(), m)?
            }
            Segment::Sweep { ions, sweep } => {
                let hop_m = h_hop.matrix().clone();
                let bound = sweep_bound(&basis, ions, sweep)? + hop_m.norm_inf();
                dynamics::evolve_lindblad_with(
                    &r,
                    |time| {
                        sweep_hamiltonian(&basis, ions, sweep, time)
                            .expect("levels validated above")
                            .add(&hop_m)
                    },
                    &jumps,
                    t,
                    bound,
                )?
            }
            Segment::Wait(_) => {
                let jumps = if hop.is_some() { decoherence.hopping_jumps(&basis)? } else { Vec::new() };
                if jumps.is_empty() {
                    Propagator::new(&h_hop, t)?.apply_density(&r)?
                } else {
                    dynamics::evolve_lindblad(&r, &h_hop, &jumps, t)?
                }
            }
        };
    }
    Ok(r)
}

fn ideal_transfer_operator(basis: &Arc<Basis>, ion: usize) -> Result<Operator> {
    let pairs = coupled_pairs(basis, ion, PulseKind::RedSideband)?;
    let mut paired = vec![false; basis.dim()];
    let mut entries = Vec::new();
    for &(d, u, _) in &pairs {
        paired[d] = true;
        paired[u] = true;
        entries.push((u, d, I));
        entries.push((d, u, I));
    }
    for (i, &p) in paired.iter().enumerate() {
        if !p {
            entries.push((i, i, ONE));
        }
    }
    Operator::new(basis.clone(), SparseMatrix::from_triplets(basis.dim(), entries))
}
