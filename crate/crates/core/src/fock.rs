//! Truncated product space of `N` ions, each carrying a set of internal
//! levels and one local phonon mode cut off at `n_max`.
//!
//! Basis ordering is fixed: ion-major (ion 0 is the most significant
//! digit), then internal level in the order given at construction, then
//! phonon number. For one ion with levels `[down, up]` and `n_max = 1` the
//! order is `|down,0⟩, |down,1⟩, |up,0⟩, |up,1⟩`.

use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{inner, norm, DenseMatrix, SparseMatrix, C64, ONE, ZERO};

/// Tolerance used when validating state normalization on input.
pub const NORM_TOL: f64 = 1e-10;

/// Internal level label of one ion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Down,
    Up,
    /// Long-lived auxiliary (shelving) level `e_k`.
    Aux(u8),
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Down => f.write_str("down"),
            Level::Up => f.write_str("up"),
            Level::Aux(k) => write!(f, "e{k}"),
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "down" => Ok(Level::Down),
            "up" => Ok(Level::Up),
            _ => s
                .strip_prefix('e')
                .and_then(|k| k.parse().ok())
                .map(Level::Aux)
                .ok_or_else(|| crate::error::invalid("level", s.to_string())),
        }
    }
}

/// `[down, up, e0, .., e_{n_aux-1}]`
pub fn standard_levels(n_aux: usize) -> Vec<Level> {
    let mut levels = vec![Level::Down, Level::Up];
    levels.extend((0..n_aux).map(|k| Level::Aux(k as u8)));
    levels
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    n_ions: usize,
    n_max: usize,
    levels: Vec<Level>,
}

impl Basis {
    /// Every ion shares the same ordered level list.
    pub fn new(n_ions: usize, n_max: usize, levels: &[Level]) -> Result<Arc<Self>> {
        if n_ions == 0 {
            return Err(Error::InvalidBasis("need at least one ion".into()));
        }
        if n_max == 0 {
            return Err(Error::InvalidBasis("n_max must be at least 1".into()));
        }
        for (i, l) in levels.iter().enumerate() {
            if levels[..i].contains(l) {
                return Err(Error::DuplicateLevel(*l));
            }
        }
        for required in [Level::Down, Level::Up] {
            if !levels.contains(&required) {
                return Err(Error::InvalidBasis(alloc::format!("level set must contain {required}")));
            }
        }
        let local = levels.len() * (n_max + 1);
        if local.checked_pow(n_ions as u32).is_none() {
            return Err(Error::InvalidBasis("dimension overflows".into()));
        }
        Ok(Arc::new(Self { n_ions, n_max, levels: levels.to_vec() }))
    }

    pub fn n_ions(&self) -> usize {
        self.n_ions
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn local_dim(&self) -> usize {
        self.levels.len() * (self.n_max + 1)
    }

    pub fn dim(&self) -> usize {
        self.local_dim().pow(self.n_ions as u32)
    }

    pub fn level_index(&self, level: Level) -> Result<usize> {
        self.levels.iter().position(|&l| l == level).ok_or(Error::UnknownLevel(level))
    }

    pub fn check_ion(&self, ion: usize) -> Result<()> {
        if ion < self.n_ions {
            Ok(())
        } else {
            Err(Error::InvalidIon { ion, n_ions: self.n_ions })
        }
    }

    fn stride(&self, ion: usize) -> usize {
        self.local_dim().pow((self.n_ions - 1 - ion) as u32)
    }

    /// `(level index, phonon number)` of `ion` in basis state `index`.
    pub fn component(&self, index: usize, ion: usize) -> (usize, usize) {
        let local = (index / self.stride(ion)) % self.local_dim();
        (local / (self.n_max + 1), local % (self.n_max + 1))
    }

    /// Index of the product basis state given per-ion `(level index, n)`.
    pub fn index_of(&self, parts: &[(usize, usize)]) -> usize {
        debug_assert_eq!(parts.len(), self.n_ions);
        parts.iter().fold(0, |acc, &(l, n)| acc * self.local_dim() + l * (self.n_max + 1) + n)
    }

    /// Index reached by replacing ion's component in `index`.
    pub fn with_component(&self, index: usize, ion: usize, level: usize, n: usize) -> usize {
        let stride = self.stride(ion);
        let old = (index / stride) % self.local_dim();
        index - old * stride + (level * (self.n_max + 1) + n) * stride
    }

    pub fn phonons(&self, index: usize) -> Vec<usize> {
        (0..self.n_ions).map(|j| self.component(index, j).1).collect()
    }

    /// Embeds a single-ion operator (dimension `local_dim`) acting on `ion`.
    pub(crate) fn embed(&self, ion: usize, local: &SparseMatrix) -> SparseMatrix {
        let left = SparseMatrix::identity(self.local_dim().pow(ion as u32));
        let right = SparseMatrix::identity(self.stride(ion));
        left.kron(local).kron(&right)
    }
}

/// Normalized pure state over a [`Basis`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    basis: Arc<Basis>,
    amps: Vec<C64>,
}

impl StateVector {
    /// Normalizes `amps`; fails on a zero vector.
    pub fn new(basis: Arc<Basis>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), got: amps.len() });
        }
        let nrm = norm(&amps);
        if !(nrm > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(Self { basis, amps: amps.into_iter().map(|a| a / nrm).collect() })
    }

    pub(crate) fn from_raw(basis: Arc<Basis>, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), basis.dim());
        Self { basis, amps }
    }

    /// Product state with each ion in `(level, n)`.
    pub fn product(basis: Arc<Basis>, parts: &[(Level, usize)]) -> Result<Self> {
        if parts.len() != basis.n_ions() {
            return Err(Error::DimensionMismatch { expected: basis.n_ions(), got: parts.len() });
        }
        let mut idx = Vec::with_capacity(parts.len());
        for &(level, n) in parts {
            if n > basis.n_max() {
                return Err(Error::PhononOutOfRange { n, n_max: basis.n_max() });
            }
            idx.push((basis.level_index(level)?, n));
        }
        let mut amps = vec![ZERO; basis.dim()];
        amps[basis.index_of(&idx)] = ONE;
        Ok(Self { basis, amps })
    }

    /// Every ion in `|down, n_j⟩`.
    pub fn fock(basis: Arc<Basis>, phonons: &[usize]) -> Result<Self> {
        let parts: Vec<_> = phonons.iter().map(|&n| (Level::Down, n)).collect();
        Self::product(basis, &parts)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    pub fn inner(&self, other: &Self) -> C64 {
        inner(&self.amps, &other.amps)
    }

    /// `|⟨self|other⟩|²`
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Applies a unitary operator.
    pub fn evolve_by(&self, op: &Operator) -> Result<Self> {
        check_same_basis(&self.basis, &op.basis)?;
        Ok(Self { basis: self.basis.clone(), amps: op.matrix.mul_vec(&self.amps) })
    }

    pub(crate) fn renormalize(&mut self) -> Result<()> {
        let nrm = self.norm();
        if !(nrm > 0.0) {
            return Err(Error::ZeroNorm);
        }
        self.amps.iter_mut().for_each(|a| *a /= nrm);
        Ok(())
    }

    pub fn expectation(&self, op: &Operator) -> C64 {
        inner(&self.amps, &op.matrix.mul_vec(&self.amps))
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator { basis: self.basis.clone(), matrix: DenseMatrix::outer(&self.amps) }
    }
}

/// Trace-one Hermitian operator for open-system runs.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    basis: Arc<Basis>,
    matrix: DenseMatrix,
}

impl DensityOperator {
    pub fn new(basis: Arc<Basis>, matrix: DenseMatrix) -> Result<Self> {
        if matrix.dim() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), got: matrix.dim() });
        }
        Ok(Self { basis, matrix })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut DenseMatrix {
        &mut self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.matrix.matmul(&self.matrix).trace().re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.matrix.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    /// `⟨ψ|ρ|ψ⟩`
    pub fn fidelity_with(&self, pure: &StateVector) -> f64 {
        inner(pure.amplitudes(), &self.matrix.mul_vec(pure.amplitudes())).re
    }

    /// Trace one, Hermitian, and no eigenvalue below `-tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        (self.trace() - 1.0).abs() <= tol && self.matrix.is_hermitian(tol) && self.matrix.cholesky_ok(tol)
    }

    pub fn expectation(&self, op: &Operator) -> C64 {
        op.matrix.mul_dense(&self.matrix).trace()
    }

    pub(crate) fn renormalize(&mut self) -> Result<()> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(Error::ZeroNorm);
        }
        self.matrix = self.matrix.scale(C64::new(1.0 / tr, 0.0));
        Ok(())
    }
}

/// Sparse operator bound to a basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    basis: Arc<Basis>,
    matrix: SparseMatrix,
    hermitian: bool,
}

impl Operator {
    /// Wraps a matrix; the Hermitian flag is computed, not trusted.
    pub fn new(basis: Arc<Basis>, matrix: SparseMatrix) -> Result<Self> {
        if matrix.dim() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), got: matrix.dim() });
        }
        let hermitian = matrix.is_hermitian(1e-12);
        Ok(Self { basis, matrix, hermitian })
    }

    pub fn identity(basis: &Arc<Basis>) -> Self {
        Self { basis: basis.clone(), matrix: SparseMatrix::identity(basis.dim()), hermitian: true }
    }

    pub fn zero(basis: &Arc<Basis>) -> Self {
        Self { basis: basis.clone(), matrix: SparseMatrix::zeros(basis.dim()), hermitian: true }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn adjoint(&self) -> Self {
        Self { basis: self.basis.clone(), matrix: self.matrix.adjoint(), hermitian: self.hermitian }
    }

    pub fn scale(&self, s: C64) -> Self {
        let matrix = self.matrix.scale(s);
        let hermitian = self.hermitian && s.im == 0.0;
        Self { basis: self.basis.clone(), matrix, hermitian }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_basis(&self.basis, &other.basis)?;
        Self::new(self.basis.clone(), self.matrix.add(&other.matrix))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_basis(&self.basis, &other.basis)?;
        Self::new(self.basis.clone(), self.matrix.sub(&other.matrix))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_same_basis(&self.basis, &other.basis)?;
        Self::new(self.basis.clone(), self.matrix.matmul(&other.matrix))
    }

    /// Raw matrix-vector product; the result is not renormalized.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.matrix.mul_vec(v)
    }

    fn local(basis: &Arc<Basis>, ion: usize, entries: impl IntoIterator<Item = (usize, usize, C64)>) -> Result<Self> {
        basis.check_ion(ion)?;
        let local = SparseMatrix::from_triplets(basis.local_dim(), entries);
        Self::new(basis.clone(), basis.embed(ion, &local))
    }
}

pub(crate) fn check_same_basis(a: &Arc<Basis>, b: &Arc<Basis>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() })
    }
}

/// Phonon annihilation operator `â_ion`, hard-truncated at `n_max`.
pub fn annihilation(basis: &Arc<Basis>, ion: usize) -> Result<Operator> {
    let np = basis.n_max() + 1;
    let entries = (0..basis.levels().len()).flat_map(|l| {
        (1..np).map(move |n| (l * np + n - 1, l * np + n, C64::new((n as f64).sqrt(), 0.0)))
    });
    Operator::local(basis, ion, entries)
}

/// `â†_ion`; `â†|n_max⟩ = 0`.
pub fn creation(basis: &Arc<Basis>, ion: usize) -> Result<Operator> {
    Ok(annihilation(basis, ion)?.adjoint())
}

/// `â†â` on `ion`.
pub fn number(basis: &Arc<Basis>, ion: usize) -> Result<Operator> {
    let np = basis.n_max() + 1;
    let entries = (0..basis.levels().len())
        .flat_map(|l| (0..np).map(move |n| (l * np + n, l * np + n, C64::new(n as f64, 0.0))));
    Operator::local(basis, ion, entries)
}

/// `Σ_j â†_j â_j`
pub fn total_number(basis: &Arc<Basis>) -> Result<Operator> {
    let mut acc = Operator::zero(basis);
    for j in 0..basis.n_ions() {
        acc = acc.add(&number(basis, j)?)?;
    }
    Ok(acc)
}

/// `|to⟩⟨from|` on the internal factor of `ion`.
pub fn internal_coupling(basis: &Arc<Basis>, ion: usize, from: Level, to: Level) -> Result<Operator> {
    let f = basis.level_index(from)?;
    let t = basis.level_index(to)?;
    if f == t {
        return Err(crate::error::invalid("to_level", "must differ from from_level"));
    }
    let np = basis.n_max() + 1;
    Operator::local(basis, ion, (0..np).map(|n| (t * np + n, f * np + n, ONE)))
}

/// Projector onto the internal levels in `levels` of `ion`, any phonon number.
pub fn level_projector(basis: &Arc<Basis>, ion: usize, levels: &[Level]) -> Result<Operator> {
    let np = basis.n_max() + 1;
    let mut idx = Vec::with_capacity(levels.len());
    for &l in levels {
        idx.push(basis.level_index(l)?);
    }
    let entries = idx.into_iter().flat_map(|l| (0..np).map(move |n| (l * np + n, l * np + n, ONE)));
    Operator::local(basis, ion, entries)
}

/// Joint distribution over phonon-number tuples.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    n_ions: usize,
    n_max: usize,
    probs: Vec<f64>,
}

impl JointDistribution {
    fn from_populations(basis: &Basis, pops: &[f64]) -> Self {
        let np = basis.n_max() + 1;
        let mut probs = vec![0.0; np.pow(basis.n_ions() as u32)];
        for (i, p) in pops.iter().enumerate() {
            let key = basis.phonons(i).iter().fold(0, |acc, &n| acc * np + n);
            probs[key] += p;
        }
        Self { n_ions: basis.n_ions(), n_max: basis.n_max(), probs }
    }

    pub fn get(&self, phonons: &[usize]) -> f64 {
        assert_eq!(phonons.len(), self.n_ions);
        if phonons.iter().any(|&n| n > self.n_max) {
            return 0.0;
        }
        self.probs[phonons.iter().fold(0, |acc, &n| acc * (self.n_max + 1) + n)]
    }

    /// Iterates over `(phonon tuple, probability)`.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let np = self.n_max + 1;
        self.probs.iter().enumerate().map(move |(k, &p)| {
            let mut tuple = vec![0; self.n_ions];
            let mut rest = k;
            for slot in tuple.iter_mut().rev() {
                *slot = rest % np;
                rest /= np;
            }
            (tuple, p)
        })
    }

    pub fn marginal(&self, ion: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_max + 1];
        for (tuple, p) in self.iter() {
            out[tuple[ion]] += p;
        }
        out
    }
}

/// Diagonal access shared by pure and mixed states.
pub trait Populations {
    fn basis(&self) -> &Arc<Basis>;
    fn populations(&self) -> Vec<f64>;

    fn joint_phonon_distribution(&self) -> JointDistribution {
        JointDistribution::from_populations(self.basis(), &self.populations())
    }

    /// Per-ion phonon-number tables over `0..=n_max`.
    fn phonon_marginals(&self) -> Vec<Vec<f64>> {
        let joint = self.joint_phonon_distribution();
        (0..self.basis().n_ions()).map(|j| joint.marginal(j)).collect()
    }

    /// Probability that `ion` is in one of `levels`.
    fn level_probability(&self, ion: usize, levels: &[Level]) -> Result<f64> {
        let basis = self.basis().clone();
        let mask = level_mask(&basis, levels)?;
        basis.check_ion(ion)?;
        Ok(self
            .populations()
            .iter()
            .enumerate()
            .filter(|(i, _)| mask[basis.component(*i, ion).0])
            .map(|(_, p)| p)
            .sum())
    }
}

impl Populations for StateVector {
    fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }
    fn populations(&self) -> Vec<f64> {
        StateVector::populations(self)
    }
}

impl Populations for DensityOperator {
    fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }
    fn populations(&self) -> Vec<f64> {
        DensityOperator::populations(self)
    }
}

pub(crate) fn level_mask(basis: &Basis, levels: &[Level]) -> Result<Vec<bool>> {
    let mut mask = vec![false; basis.levels().len()];
    for &l in levels {
        mask[basis.level_index(l)?] = true;
    }
    Ok(mask)
}

/// Born-rule measurement with an arbitrary complete set of orthogonal
/// projectors. Returns the outcome index and the collapsed, renormalized
/// state.
pub fn born_sample<R: Rng + ?Sized>(
    state: &StateVector,
    projectors: &[Operator],
    rng: &mut R,
) -> Result<(usize, StateVector)> {
    let basis = state.basis();
    for p in projectors {
        check_same_basis(basis, p.basis())?;
    }
    let sum = projectors
        .iter()
        .fold(SparseMatrix::zeros(basis.dim()), |acc, p| acc.add(p.matrix()));
    let mut deviation = sum.max_abs_diff(&SparseMatrix::identity(basis.dim()));
    for (i, a) in projectors.iter().enumerate() {
        for b in &projectors[i + 1..] {
            deviation = deviation.max(a.matrix().matmul(b.matrix()).max_abs());
        }
    }
    if projectors.is_empty() || deviation > 1e-10 {
        return Err(Error::IncompleteProjectors(deviation));
    }

    let branches: Vec<Vec<C64>> = projectors.iter().map(|p| p.apply(state.amplitudes())).collect();
    let probs: Vec<f64> = branches.iter().map(|b| b.iter().map(|a| a.norm_sqr()).sum()).collect();
    let outcome = sample_index(&probs, rng);
    let collapsed = StateVector::new(basis.clone(), branches[outcome].clone())?;
    Ok((outcome, collapsed))
}

/// Draws an index with probability proportional to `weights`.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_nonzero = i;
        }
        acc += w;
        if u < acc {
            return i;
        }
    }
    last_nonzero
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::shot_rng;

    fn basis(n_ions: usize, n_max: usize, n_aux: usize) -> Arc<Basis> {
        Basis::new(n_ions, n_max, &standard_levels(n_aux)).unwrap()
    }

    #[test]
    fn dimensions() {
        assert_eq!(basis(1, 1, 0).dim(), 4);
        assert_eq!(basis(2, 3, 2).dim(), 256);
        assert_eq!(basis(1, 2, 1).dim(), 9);
    }

    #[test]
    fn rejects_bad_bases() {
        assert_eq!(
            Basis::new(1, 1, &[Level::Down, Level::Up, Level::Down]).unwrap_err(),
            Error::DuplicateLevel(Level::Down)
        );
        assert!(Basis::new(0, 1, &standard_levels(0)).is_err());
        assert!(Basis::new(1, 0, &standard_levels(0)).is_err());
        assert!(Basis::new(1, 2, &[Level::Down, Level::Aux(0)]).is_err());
    }

    #[test]
    fn ordering_is_ion_major_level_then_phonon() {
        let b = basis(1, 1, 0);
        assert_eq!(b.index_of(&[(0, 1)]), 1);
        assert_eq!(b.index_of(&[(1, 0)]), 2);
        let b2 = basis(2, 1, 0);
        assert_eq!(b2.index_of(&[(0, 0), (0, 1)]), 1);
        assert_eq!(b2.index_of(&[(0, 1), (0, 0)]), 4);
        assert_eq!(b2.component(4, 0), (0, 1));
        assert_eq!(b2.with_component(4, 1, 1, 1), b2.index_of(&[(0, 1), (1, 1)]));
    }

    #[test]
    fn level_labels_round_trip() {
        for l in standard_levels(3) {
            assert_eq!(l.to_string().parse::<Level>().unwrap(), l);
        }
        assert!("x1".parse::<Level>().is_err());
    }

    #[test]
    fn annihilation_action() {
        let b = basis(1, 3, 0);
        let a = annihilation(&b, 0).unwrap();
        let v0 = StateVector::fock(b.clone(), &[0]).unwrap();
        assert!(a.apply(v0.amplitudes()).iter().all(|x| *x == ZERO));
        let v1 = StateVector::fock(b.clone(), &[1]).unwrap();
        let out = a.apply(v1.amplitudes());
        assert_eq!(out, StateVector::fock(b.clone(), &[0]).unwrap().amplitudes());
        let v2 = StateVector::fock(b.clone(), &[2]).unwrap();
        let out = a.apply(v2.amplitudes());
        let expected: Vec<C64> = StateVector::fock(b.clone(), &[1])
            .unwrap()
            .amplitudes()
            .iter()
            .map(|x| x * 2f64.sqrt())
            .collect();
        assert!(out.iter().zip(&expected).all(|(x, y)| (x - y).norm() < 1e-15));
        let ad = creation(&b, 0).unwrap();
        let top = StateVector::fock(b, &[3]).unwrap();
        assert!(ad.apply(top.amplitudes()).iter().all(|x| *x == ZERO));
    }

    #[test]
    fn bad_ion_rejected() {
        let b = basis(2, 1, 0);
        assert_eq!(annihilation(&b, 2).unwrap_err(), Error::InvalidIon { ion: 2, n_ions: 2 });
    }

    #[test]
    fn commutator_away_from_cutoff() {
        let b = basis(2, 4, 1);
        let a = annihilation(&b, 1).unwrap();
        let ad = creation(&b, 1).unwrap();
        let comm = a.mul(&ad).unwrap().sub(&ad.mul(&a).unwrap()).unwrap();
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                if b.component(i, 1).1 == b.n_max() || b.component(j, 1).1 == b.n_max() {
                    continue;
                }
                let expected = if i == j { ONE } else { ZERO };
                assert!((comm.matrix().get(i, j) - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn internal_coupling_examples() {
        let b = basis(1, 2, 1);
        let sp = internal_coupling(&b, 0, Level::Down, Level::Up).unwrap();
        let out = sp.apply(StateVector::product(b.clone(), &[(Level::Down, 1)]).unwrap().amplitudes());
        assert_eq!(out, StateVector::product(b.clone(), &[(Level::Up, 1)]).unwrap().amplitudes());
        let shelve = internal_coupling(&b, 0, Level::Down, Level::Aux(0)).unwrap();
        let out = shelve.apply(StateVector::product(b.clone(), &[(Level::Up, 0)]).unwrap().amplitudes());
        assert!(out.iter().all(|x| *x == ZERO));
        let back = internal_coupling(&b, 0, Level::Aux(0), Level::Down).unwrap();
        assert_eq!(shelve.adjoint(), back);
        assert_eq!(
            internal_coupling(&b, 0, Level::Down, Level::Aux(3)).unwrap_err(),
            Error::UnknownLevel(Level::Aux(3))
        );
    }

    #[test]
    fn marginals() {
        let b = basis(2, 2, 0);
        let s = StateVector::fock(b.clone(), &[1, 1]).unwrap();
        let m = s.phonon_marginals();
        assert_eq!(m[0][1], 1.0);
        assert_eq!(m[1][1], 1.0);
        let mut amps = StateVector::fock(b.clone(), &[2, 0]).unwrap().amplitudes().to_vec();
        let other = StateVector::fock(b.clone(), &[0, 2]).unwrap();
        amps.iter_mut().zip(other.amplitudes()).for_each(|(a, b)| *a += b);
        let s = StateVector::new(b, amps).unwrap();
        let m = s.phonon_marginals();
        assert!((m[0][2] - 0.5).abs() < 1e-12 && (m[0][0] - 0.5).abs() < 1e-12);
        assert!((m[0].iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!((s.joint_phonon_distribution().get(&[2, 0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn born_sampling() {
        let b = basis(1, 1, 0);
        let bright = level_projector(&b, 0, &[Level::Down]).unwrap();
        let dark = level_projector(&b, 0, &[Level::Up]).unwrap();
        let ground = StateVector::product(b.clone(), &[(Level::Down, 0)]).unwrap();
        let mut rng = shot_rng(1, 0);
        for _ in 0..100 {
            assert_eq!(born_sample(&ground, &[bright.clone(), dark.clone()], &mut rng).unwrap().0, 0);
        }

        let up = StateVector::product(b.clone(), &[(Level::Up, 0)]).unwrap();
        let sup = StateVector::new(
            b.clone(),
            ground.amplitudes().iter().zip(up.amplitudes()).map(|(x, y)| x + y).collect(),
        )
        .unwrap();
        let shots = 10_000;
        let mut bright_count = 0;
        for k in 0..shots {
            let mut rng = shot_rng(7, k);
            let (o, collapsed) = born_sample(&sup, &[bright.clone(), dark.clone()], &mut rng).unwrap();
            if o == 0 {
                bright_count += 1;
                assert!((collapsed.fidelity(&ground) - 1.0).abs() < 1e-12);
            }
        }
        let sigma = (0.25f64 / shots as f64).sqrt();
        assert!((bright_count as f64 / shots as f64 - 0.5).abs() < 3.0 * sigma);

        let run = |seed| {
            let mut rng = shot_rng(seed, 0);
            (0..32)
                .map(|_| born_sample(&sup, &[bright.clone(), dark.clone()], &mut rng).unwrap().0)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));

        assert!(matches!(
            born_sample(&sup, &[bright.clone()], &mut rng),
            Err(Error::IncompleteProjectors(_))
        ));
    }
}
