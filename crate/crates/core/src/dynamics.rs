//! Phonon hopping between neighboring ions and time evolution.
//!
//! The hopping Hamiltonian for `N` ions with nearest-neighbor coupling is
//!
//! ```text
//! H = Σ_j (ω_y − κ/2) â†_j â_j + (κ/2) Σ_j (â_j â†_{j+1} + â†_j â_{j+1})
//! ```
//!
//! In the default rotating frame the uniform diagonal term is dropped; it
//! only adds a phase that depends on the (conserved) total phonon number.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::fock::{self, check_same_basis, Basis, DensityOperator, Operator, StateVector};
use crate::linalg::{DenseMatrix, SparseMatrix, C64, I, ZERO};
use alloc::sync::Arc;

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_818_8e-12;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_068_92e-27;
pub const ELECTRON_MASS: f64 = 9.109_383_713_9e-31;
/// Mass of a singly ionized ⁴⁰Ca atom.
pub const CA40_ION_MASS: f64 = 39.962_590_85 * ATOMIC_MASS_UNIT - ELECTRON_MASS;

/// Ion species and trap geometry entering the hopping rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalIonParams {
    pub mass: f64,
    pub charge: f64,
    /// Inter-ion distance `d` in m.
    pub spacing: f64,
    /// Radial secular angular frequency in rad/s.
    pub omega_y: f64,
}

impl PhysicalIonParams {
    pub fn calcium40(spacing: f64, omega_y: f64) -> Self {
        Self { mass: CA40_ION_MASS, charge: ELEMENTARY_CHARGE, spacing, omega_y }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("charge", self.charge),
            ("spacing", self.spacing),
            ("omega_y", self.omega_y),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, alloc::format!("must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// `κ = e² / (4π ε₀ m d³ ω_y)` in rad/s.
pub fn hopping_rate(params: &PhysicalIonParams) -> Result<f64> {
    params.validate()?;
    let PhysicalIonParams { mass, charge, spacing, omega_y } = *params;
    Ok(charge * charge / (4.0 * PI * VACUUM_PERMITTIVITY * mass * spacing.powi(3) * omega_y))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Frame {
    /// Drop the uniform `(ω_y − κ/2) n̂` diagonal.
    #[default]
    Rotating,
    /// Keep it, for phase-sensitive checks.
    Lab,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoppingParams {
    /// Hopping rate in rad/s. Zero switches hopping off.
    pub kappa: f64,
    pub omega_y: f64,
    pub frame: Frame,
}

impl HoppingParams {
    pub fn new(kappa: f64, omega_y: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(invalid("kappa", alloc::format!("must be non-negative, got {kappa}")));
        }
        if !(omega_y > 0.0 && omega_y.is_finite()) {
            return Err(invalid("omega_y", alloc::format!("must be positive, got {omega_y}")));
        }
        if kappa > omega_y / 100.0 {
            log::warn!("hopping rate {kappa:e} rad/s is not small against omega_y {omega_y:e} rad/s");
        }
        Ok(Self { kappa, omega_y, frame: Frame::Rotating })
    }

    pub fn from_physical(params: &PhysicalIonParams) -> Result<Self> {
        Self::new(hopping_rate(params)?, params.omega_y)
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    /// Half of the single-phonon exchange period, `π/κ`.
    pub fn half_period(&self) -> f64 {
        PI / self.kappa
    }
}

/// Decoherence knob: one dephasing rate `γ` in 1/s.
///
/// During driven pulses the addressed ion's `{down, up}` coherence decays as
/// `e^{-γt}` (jump operator `√(γ/2) σ_z`). During free hopping each mode
/// dephases with jump operator `√γ n̂_j`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct DecoherenceParams {
    pub gamma: f64,
}

impl DecoherenceParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma", alloc::format!("must be non-negative, got {gamma}")));
        }
        Ok(Self { gamma })
    }

    pub fn enabled(&self) -> bool {
        self.gamma > 0.0
    }

    /// `√(γ/2) (|up⟩⟨up| − |down⟩⟨down|)` on `ion`.
    pub fn pulse_jumps(&self, basis: &Arc<Basis>, ion: usize) -> Result<Vec<Operator>> {
        if !self.enabled() {
            return Ok(Vec::new());
        }
        let up = fock::level_projector(basis, ion, &[crate::Level::Up])?;
        let down = fock::level_projector(basis, ion, &[crate::Level::Down])?;
        Ok(alloc::vec![up.sub(&down)?.scale(C64::new((self.gamma / 2.0).sqrt(), 0.0))])
    }

    /// `√γ n̂_j` for every ion.
    pub fn hopping_jumps(&self, basis: &Arc<Basis>) -> Result<Vec<Operator>> {
        if !self.enabled() {
            return Ok(Vec::new());
        }
        (0..basis.n_ions())
            .map(|j| Ok(fock::number(basis, j)?.scale(C64::new(self.gamma.sqrt(), 0.0))))
            .collect()
    }
}

/// Nearest-neighbor hopping Hamiltonian in the given basis.
pub fn build_hopping_hamiltonian(basis: &Arc<Basis>, hop: &HoppingParams) -> Result<Operator> {
    let mut h = Operator::zero(basis);
    let half_kappa = C64::new(hop.kappa / 2.0, 0.0);
    for j in 0..basis.n_ions().saturating_sub(1) {
        let a1 = fock::annihilation(basis, j)?;
        let a2 = fock::annihilation(basis, j + 1)?;
        let exchange = a1.mul(&a2.adjoint())?.add(&a1.adjoint().mul(&a2)?)?;
        h = h.add(&exchange.scale(half_kappa))?;
    }
    if hop.frame == Frame::Lab {
        let diag = C64::new(hop.omega_y - hop.kappa / 2.0, 0.0);
        h = h.add(&fock::total_number(basis)?.scale(diag))?;
    }
    Ok(h)
}

/// Dense `exp(−iHt)` for a time-independent Hermitian `H`.
#[derive(Clone, Debug)]
pub struct Propagator {
    basis: Arc<Basis>,
    matrix: DenseMatrix,
}

impl Propagator {
    pub fn new(h: &Operator, t: f64) -> Result<Self> {
        if !h.is_hermitian() {
            return Err(Error::NotHermitian);
        }
        let matrix = h.matrix().to_dense().scale(C64::new(0.0, -t)).expm();
        Ok(Self { basis: h.basis().clone(), matrix })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        check_same_basis(&self.basis, state.basis())?;
        Ok(StateVector::from_raw(self.basis.clone(), self.matrix.mul_vec(state.amplitudes())))
    }

    pub fn apply_density(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        check_same_basis(&self.basis, rho.basis())?;
        let m = self.matrix.matmul(rho.matrix()).matmul(&self.matrix.adjoint());
        DensityOperator::new(self.basis.clone(), m)
    }
}

/// `exp(−iHt)|ψ⟩`.
pub fn evolve_unitary(state: &StateVector, h: &Operator, t: f64) -> Result<StateVector> {
    check_same_basis(state.basis(), h.basis())?;
    if t == 0.0 {
        if !h.is_hermitian() {
            return Err(Error::NotHermitian);
        }
        return Ok(state.clone());
    }
    Propagator::new(h, t)?.apply(state)
}

/// Agreement required between an RK4 run and its step-halved rerun.
pub const CONVERGENCE_TOL: f64 = 1e-8;
/// Initial step satisfies `h · ω_max ≤ 2π / 50`.
const STEPS_PER_PERIOD: f64 = 50.0;
const MAX_STEPS: usize = 1 << 22;

fn initial_steps(t: f64, max_angular_freq: f64) -> usize {
    let period_count = t * max_angular_freq / (2.0 * PI);
    ((period_count * STEPS_PER_PERIOD).ceil() as usize).max(4)
}

/// Runs `integrate(n_steps)` with doubling step counts until two successive
/// results agree to [`CONVERGENCE_TOL`]; returns the finer result.
pub(crate) fn with_step_halving<T>(
    t: f64,
    max_angular_freq: f64,
    mut integrate: impl FnMut(usize) -> T,
    distance: impl Fn(&T, &T) -> f64,
) -> Result<T> {
    let mut steps = initial_steps(t, max_angular_freq);
    if steps > MAX_STEPS / 2 {
        // no room left for a single comparison
        return Err(Error::NonConvergence { deviation: f64::INFINITY });
    }
    let mut coarse = integrate(steps);
    loop {
        steps *= 2;
        let fine = integrate(steps);
        let deviation = distance(&coarse, &fine);
        if deviation <= CONVERGENCE_TOL {
            return Ok(fine);
        }
        if steps >= MAX_STEPS || !deviation.is_finite() {
            return Err(Error::NonConvergence { deviation });
        }
        coarse = fine;
    }
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Fixed-step RK4 for `i dψ/dt = H(t) ψ` over `[0, t]`, with a step-halving
/// convergence check. `max_angular_freq` bounds the spectral radius of
/// `H(t)` and sets the initial step.
pub fn integrate_schrodinger(
    state: &StateVector,
    hamiltonian: impl Fn(f64) -> SparseMatrix,
    t: f64,
    max_angular_freq: f64,
) -> Result<StateVector> {
    if t == 0.0 {
        return Ok(state.clone());
    }
    let dim = state.basis().dim();
    let rhs = |time: f64, psi: &[C64], out: &mut [C64]| {
        hamiltonian(time).mul_vec_into(psi, out);
        out.iter_mut().for_each(|x| *x *= -I);
    };
    let run = |steps: usize| {
        let h = t / steps as f64;
        let mut psi = state.amplitudes().to_vec();
        let mut k1 = alloc::vec![ZERO; dim];
        let mut k2 = k1.clone();
        let mut k3 = k1.clone();
        let mut k4 = k1.clone();
        let mut tmp = k1.clone();
        for s in 0..steps {
            let t0 = s as f64 * h;
            rhs(t0, &psi, &mut k1);
            axpy_into(&psi, h / 2.0, &k1, &mut tmp);
            rhs(t0 + h / 2.0, &tmp, &mut k2);
            axpy_into(&psi, h / 2.0, &k2, &mut tmp);
            rhs(t0 + h / 2.0, &tmp, &mut k3);
            axpy_into(&psi, h, &k3, &mut tmp);
            rhs(t0 + h, &tmp, &mut k4);
            for i in 0..dim {
                psi[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
            }
        }
        psi
    };
    let psi = with_step_halving(t, max_angular_freq, run, |a, b| max_diff(a, b))?;
    let mut out = StateVector::from_raw(state.basis().clone(), psi);
    out.renormalize()?;
    Ok(out)
}

fn axpy_into(x: &[C64], s: f64, y: &[C64], out: &mut [C64]) {
    for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
        *o = a + b * s;
    }
}

/// Lindblad generator for fixed jump operators and a possibly
/// time-dependent Hamiltonian.
struct Lindbladian {
    jumps: Vec<(SparseMatrix, SparseMatrix)>,
    /// `-(1/2) Σ L†L`
    damping: SparseMatrix,
}

impl Lindbladian {
    fn new(dim: usize, jumps: &[Operator]) -> Self {
        let mut damping = SparseMatrix::zeros(dim);
        let mut pairs = Vec::with_capacity(jumps.len());
        for l in jumps {
            let ld = l.matrix().adjoint();
            damping = damping.add(&ld.matmul(l.matrix()).scale(C64::new(-0.5, 0.0)));
            pairs.push((l.matrix().clone(), ld));
        }
        Self { jumps: pairs, damping }
    }

    fn rate(&self) -> f64 {
        self.damping.norm_inf() * 2.0
    }

    /// `dρ/dt = −i[H, ρ] + Σ L ρ L† − ½{L†L, ρ}`
    fn rhs(&self, h: &SparseMatrix, rho: &DenseMatrix) -> DenseMatrix {
        // G = -iH - ½ΣL†L ; dρ = Gρ + ρG† + Σ LρL†
        let g = h.scale(-I).add(&self.damping);
        // ρ is Hermitian, so ρG† = (Gρ)†
        let g_rho = g.mul_dense(rho);
        let mut out = g_rho.add(&g_rho.adjoint());
        for (l, ld) in &self.jumps {
            out = out.add(&ld.left_mul_dense(&l.mul_dense(rho)));
        }
        out
    }
}

/// Lindblad evolution with a time-independent Hamiltonian.
pub fn evolve_lindblad(
    rho: &DensityOperator,
    h: &Operator,
    jumps: &[Operator],
    t: f64,
) -> Result<DensityOperator> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    check_same_basis(rho.basis(), h.basis())?;
    let bound = h.matrix().norm_inf();
    let hm = h.matrix().clone();
    evolve_lindblad_with(rho, move |_| hm.clone(), jumps, t, bound)
}

/// Lindblad evolution with `H(t)` supplied per time; RK4 with the same
/// step-halving check as [`integrate_schrodinger`].
pub fn evolve_lindblad_with(
    rho: &DensityOperator,
    hamiltonian: impl Fn(f64) -> SparseMatrix,
    jumps: &[Operator],
    t: f64,
    max_angular_freq: f64,
) -> Result<DensityOperator> {
    for l in jumps {
        check_same_basis(rho.basis(), l.basis())?;
    }
    if t == 0.0 {
        return Ok(rho.clone());
    }
    let dim = rho.basis().dim();
    let lind = Lindbladian::new(dim, jumps);
    let freq = max_angular_freq + lind.rate();
    let run = |steps: usize| {
        let h = t / steps as f64;
        let mut r = rho.matrix().clone();
        for s in 0..steps {
            let t0 = s as f64 * h;
            let h0 = hamiltonian(t0);
            let hm = hamiltonian(t0 + h / 2.0);
            let h1 = hamiltonian(t0 + h);
            let k1 = lind.rhs(&h0, &r);
            let k2 = lind.rhs(&hm, &r.add(&k1.scale(C64::new(h / 2.0, 0.0))));
            let k3 = lind.rhs(&hm, &r.add(&k2.scale(C64::new(h / 2.0, 0.0))));
            let k4 = lind.rhs(&h1, &r.add(&k3.scale(C64::new(h, 0.0))));
            r.axpy(C64::new(h / 6.0, 0.0), &k1);
            r.axpy(C64::new(h / 3.0, 0.0), &k2);
            r.axpy(C64::new(h / 3.0, 0.0), &k3);
            r.axpy(C64::new(h / 6.0, 0.0), &k4);
        }
        r
    };
    let m = with_step_halving(t, freq, run, |a, b| a.max_abs_diff(b))?;
    // symmetrize away round-off
    let m = m.add(&m.adjoint()).scale(C64::new(0.5, 0.0));
    DensityOperator::new(rho.basis().clone(), m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{standard_levels, Populations};
    use crate::Level;

    fn two_ion(n_max: usize) -> Arc<Basis> {
        Basis::new(2, n_max, &standard_levels(0)).unwrap()
    }

    fn hop(kappa: f64) -> HoppingParams {
        HoppingParams::new(kappa, 2.0 * PI * 3.0e6).unwrap()
    }

    #[test]
    fn hopping_rate_scales_as_inverse_cube() {
        let p = PhysicalIonParams::calcium40(21e-6, 2.0 * PI * 3.0e6);
        let k1 = hopping_rate(&p).unwrap();
        let k2 = hopping_rate(&PhysicalIonParams { spacing: 42e-6, ..p }).unwrap();
        assert!((k1 / k2 - 8.0).abs() < 1e-12);
        assert!(hopping_rate(&PhysicalIonParams { spacing: 0.0, ..p }).is_err());
        assert!(hopping_rate(&PhysicalIonParams { mass: -1.0, ..p }).is_err());
    }

    #[test]
    fn hamiltonian_matrix_elements() {
        let kappa = 2.0 * PI * 3e3;
        let b = two_ion(3);
        let params = hop(kappa).with_frame(Frame::Lab);
        let h = build_hopping_hamiltonian(&b, &params).unwrap();
        assert!(h.is_hermitian());
        let s10 = StateVector::fock(b.clone(), &[1, 0]).unwrap();
        let s01 = StateVector::fock(b.clone(), &[0, 1]).unwrap();
        let s11 = StateVector::fock(b.clone(), &[1, 1]).unwrap();
        let elem = s01.inner(&StateVector::from_raw(b.clone(), h.apply(s10.amplitudes())));
        assert!((elem - C64::new(kappa / 2.0, 0.0)).norm() < 1e-9);
        let diag = s11.expectation(&h);
        assert!((diag.re - 2.0 * (params.omega_y - kappa / 2.0)).abs() < 1e-6);
    }

    #[test]
    fn hamiltonian_conserves_phonon_number() {
        let b = Basis::new(3, 2, &standard_levels(1)).unwrap();
        let h = build_hopping_hamiltonian(&b, &hop(1.0)).unwrap();
        let n = fock::total_number(&b).unwrap();
        let comm = h.mul(&n).unwrap().sub(&n.mul(&h).unwrap()).unwrap();
        assert!(comm.matrix().max_abs() < 1e-12);
    }

    #[test]
    fn single_phonon_swaps_at_half_period() {
        let kappa = 2.0 * PI * 3e3;
        let b = two_ion(2);
        let h = build_hopping_hamiltonian(&b, &hop(kappa)).unwrap();
        let s = StateVector::fock(b.clone(), &[1, 0]).unwrap();
        let out = evolve_unitary(&s, &h, PI / kappa).unwrap();
        let target = StateVector::fock(b, &[0, 1]).unwrap();
        assert!((out.fidelity(&target) - 1.0).abs() < 1e-10);
        let same = evolve_unitary(&s, &h, 0.0).unwrap();
        assert_eq!(same, s);
    }

    #[test]
    fn rejects_non_hermitian() {
        let b = two_ion(1);
        let a = fock::annihilation(&b, 0).unwrap();
        let s = StateVector::fock(b, &[1, 0]).unwrap();
        assert_eq!(evolve_unitary(&s, &a, 1.0).unwrap_err(), Error::NotHermitian);
    }

    #[test]
    fn lab_and_rotating_frames_agree_on_distributions() {
        let kappa = 2.0 * PI * 3e3;
        let b = two_ion(3);
        let s = StateVector::fock(b.clone(), &[1, 1]).unwrap();
        for t in [13e-6, 83e-6, 210e-6] {
            let rot = evolve_unitary(&s, &build_hopping_hamiltonian(&b, &hop(kappa)).unwrap(), t).unwrap();
            let lab_h = build_hopping_hamiltonian(&b, &hop(kappa).with_frame(Frame::Lab)).unwrap();
            let lab = evolve_unitary(&s, &lab_h, t).unwrap();
            let (pr, pl) = (rot.populations(), lab.populations());
            assert!(pr.iter().zip(&pl).all(|(a, b)| (a - b).abs() < 1e-10));
        }
    }

    #[test]
    fn rk4_matches_exact_propagator() {
        let kappa = 2.0 * PI * 3e3;
        let b = two_ion(2);
        let h = build_hopping_hamiltonian(&b, &hop(kappa)).unwrap();
        let s = StateVector::fock(b, &[1, 1]).unwrap();
        let t = 57e-6;
        let exact = evolve_unitary(&s, &h, t).unwrap();
        let hm = h.matrix().clone();
        let rk = integrate_schrodinger(&s, |_| hm.clone(), t, hm.norm_inf()).unwrap();
        assert!((exact.fidelity(&rk) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lindblad_without_jumps_is_unitary() {
        let kappa = 2.0 * PI * 3e3;
        let b = two_ion(2);
        let h = build_hopping_hamiltonian(&b, &hop(kappa)).unwrap();
        let s = StateVector::fock(b, &[1, 1]).unwrap();
        let t = 40e-6;
        let pure = evolve_unitary(&s, &h, t).unwrap().to_density();
        let mixed = evolve_lindblad(&s.to_density(), &h, &[], t).unwrap();
        assert!(pure.matrix().max_abs_diff(mixed.matrix()) < 1e-8);
    }

    #[test]
    fn dephasing_decays_coherence_exponentially() {
        let b = Basis::new(1, 1, &standard_levels(0)).unwrap();
        let gamma = 1.7e3;
        let jumps = DecoherenceParams::new(gamma).unwrap().pulse_jumps(&b, 0).unwrap();
        let d = StateVector::product(b.clone(), &[(Level::Down, 0)]).unwrap();
        let u = StateVector::product(b.clone(), &[(Level::Up, 0)]).unwrap();
        let plus = StateVector::new(
            b.clone(),
            d.amplitudes().iter().zip(u.amplitudes()).map(|(x, y)| x + y).collect(),
        )
        .unwrap();
        let (i_d, i_u) = (b.index_of(&[(0, 0)]), b.index_of(&[(1, 0)]));
        for t in [1e-4, 5e-4, 2e-3] {
            let rho = evolve_lindblad(&plus.to_density(), &Operator::zero(&b), &jumps, t).unwrap();
            let expected = 0.5 * (-gamma * t).exp();
            assert!((rho.matrix()[(i_d, i_u)].re - expected).abs() < 1e-8);
            assert!((rho.trace() - 1.0).abs() < 1e-8);
            assert!(rho.is_physical(1e-8));
        }
    }

    #[test]
    fn hopping_dephasing_preserves_trace_and_number() {
        let kappa = 2.0 * PI * 3e3;
        let b = two_ion(2);
        let h = build_hopping_hamiltonian(&b, &hop(kappa)).unwrap();
        let jumps = DecoherenceParams::new(2e3).unwrap().hopping_jumps(&b).unwrap();
        let rho0 = StateVector::fock(b.clone(), &[1, 1]).unwrap().to_density();
        let rho = evolve_lindblad(&rho0, &h, &jumps, 150e-6).unwrap();
        assert!(rho.is_physical(1e-8));
        let n = fock::total_number(&b).unwrap();
        assert!((rho.expectation(&n).re - 2.0).abs() < 1e-10);
        let joint = rho.joint_phonon_distribution();
        let total = joint.get(&[1, 1]) + joint.get(&[2, 0]) + joint.get(&[0, 2]);
        assert!((total - 1.0).abs() < 1e-10);
    }
}
