//! Occupation-number states and the dense exact-diagonalization oracle.
//!
//! Determinants are bitmasks with orbital 0 in the lowest bit. An elementary
//! operator acting on orbital `p` picks up `(-1)^k` with `k` the number of
//! occupied orbitals strictly below `p`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{parity_below, OperatorProduct, OperatorSum, ZERO};
use crate::error::{Error, Result};
use crate::par;

/// Drop tolerance for state amplitudes.
pub const STATE_DROP_TOL: f64 = 1e-14;

/// Largest dimension the dense oracle will build (2^12 Fock states).
pub const MAX_DENSE_DIM: usize = 4096;

/// Maximum Hermiticity residual accepted by the eigensolver.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Occupation-number basis state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Determinant(pub u64);

impl Determinant {
    pub fn from_occupied(orbitals: &[usize]) -> Self {
        Self(orbitals.iter().fold(0, |m, &p| m | (1 << p)))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_occupied(self, p: usize) -> bool {
        self.0 >> p & 1 == 1
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    /// `(N↑, N↓)` under the even = ↑, odd = ↓ packing.
    pub fn spin_counts(self) -> (u32, u32) {
        const EVEN: u64 = 0x5555_5555_5555_5555;
        ((self.0 & EVEN).count_ones(), (self.0 & !EVEN).count_ones())
    }

    pub fn occupied(self) -> Vec<usize> {
        (0..64).filter(|&p| self.is_occupied(p)).collect()
    }
}

/// Applies a canonical product to a determinant. Returns `None` on Pauli
/// blocking, otherwise the phase and the resulting determinant.
#[inline]
pub fn apply_product(p: OperatorProduct, d: Determinant) -> Option<(f64, Determinant)> {
    let (cre, ann) = (p.creator_mask(), p.annihilator_mask());
    let bits = d.0;
    if bits & ann != ann {
        return None;
    }
    let removed = bits & !ann;
    if removed & cre != 0 {
        return None;
    }
    // annihilators act smallest index first, creators largest index first
    let m = ann.count_ones();
    let parity = ((ann & parity_below(bits)).count_ones()
        + (m * m.saturating_sub(1) / 2)
        + (cre & parity_below(removed)).count_ones())
        & 1;
    let sign = if parity == 0 { 1.0 } else { -1.0 };
    Some((sign, Determinant(removed | cre)))
}

/// Sparse linear combination of determinants, sorted by bitmask.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<(Determinant, Complex64)>,
}

impl StateVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn basis(d: Determinant) -> Self {
        Self { amplitudes: vec![(d, Complex64::new(1.0, 0.0))] }
    }

    pub fn from_amplitudes<I>(it: I) -> Self
    where
        I: IntoIterator<Item = (Determinant, Complex64)>,
    {
        let mut v: Vec<_> = it.into_iter().collect();
        v.sort_by_key(|t| t.0);
        let mut out: Vec<(Determinant, Complex64)> = Vec::with_capacity(v.len());
        for (d, a) in v {
            match out.last_mut() {
                Some(last) if last.0 == d => last.1 += a,
                _ => out.push((d, a)),
            }
        }
        out.retain(|t| t.1.norm() >= STATE_DROP_TOL);
        Self { amplitudes: out }
    }

    /// Coefficients over a basis (same order as `basis.determinants()`).
    pub fn from_dense(basis: &SectorBasis, coeffs: &[Complex64]) -> Self {
        Self::from_amplitudes(basis.dets.iter().copied().zip(coeffs.iter().copied()))
    }

    pub fn amplitudes(&self) -> &[(Determinant, Complex64)] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn get(&self, d: Determinant) -> Complex64 {
        match self.amplitudes.binary_search_by_key(&d, |t| t.0) {
            Ok(i) => self.amplitudes[i].1,
            Err(_) => ZERO,
        }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|t| t.1.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n < STATE_DROP_TOL {
            return Err(Error::ZeroVector);
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_amplitudes(self.amplitudes.iter().map(|&(d, a)| (d, c * a)))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes.iter().map(|&(d, a)| a.conj() * other.get(d)).sum()
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: Complex64, other: &StateVector) -> Self {
        Self::from_amplitudes(
            self.amplitudes
                .iter()
                .copied()
                .chain(other.amplitudes.iter().map(|&(d, a)| (d, c * a))),
        )
    }

    pub fn to_dense(&self, basis: &SectorBasis) -> DVector<Complex64> {
        DVector::from_iterator(basis.len(), basis.dets.iter().map(|&d| self.get(d)))
    }

    pub fn max_bit(&self) -> Option<usize> {
        self.amplitudes
            .iter()
            .map(|t| t.0 .0)
            .filter(|&b| b != 0)
            .map(|b| 63 - b.leading_zeros() as usize)
            .max()
    }
}

/// One serialized amplitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeRecord {
    pub bits: u64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl Serialize for StateVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<AmplitudeRecord> = self
            .amplitudes
            .iter()
            .map(|&(d, a)| AmplitudeRecord { bits: d.0, re: a.re, im: a.im })
            .collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<AmplitudeRecord>::deserialize(d)?;
        Ok(StateVector::from_amplitudes(
            v.into_iter().map(|r| (Determinant(r.bits), Complex64::new(r.re, r.im))),
        ))
    }
}

/// `x |v⟩`.
pub fn apply_operator(x: &OperatorSum, v: &StateVector) -> StateVector {
    let amps = v.amplitudes();
    let raw = par::flat_map(x.terms(), |&(p, c), buf| {
        for &(d, a) in amps {
            if let Some((s, d2)) = apply_product(p, d) {
                buf.push((d2, c * a * s));
            }
        }
    });
    StateVector::from_amplitudes(raw)
}

/// `⟨bra| x |ket⟩`.
pub fn expectation(bra: &StateVector, x: &OperatorSum, ket: &StateVector) -> Complex64 {
    let amps = ket.amplitudes();
    par::sum(x.terms(), |&(p, c)| {
        let mut acc = ZERO;
        for &(d, a) in amps {
            if let Some((s, d2)) = apply_product(p, d) {
                let b = bra.get(d2);
                if b != ZERO {
                    acc += b.conj() * a * s;
                }
            }
        }
        c * acc
    })
}

/// Ordered list of determinants spanning a block of Fock space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectorBasis {
    n_orbitals: usize,
    dets: Vec<Determinant>,
}

impl SectorBasis {
    /// All `2^n` occupation patterns.
    pub fn full(n_orbitals: usize) -> Self {
        assert!(n_orbitals < 64);
        let dets = (0..1u64 << n_orbitals).map(Determinant).collect();
        Self { n_orbitals, dets }
    }

    /// Fixed `(N↑, N↓)` with even = ↑ and odd = ↓ packing.
    pub fn spin_sector(n_orbitals: usize, n_up: u32, n_dn: u32) -> Self {
        let even: Vec<usize> = (0..n_orbitals).step_by(2).collect();
        let odd: Vec<usize> = (1..n_orbitals).step_by(2).collect();
        let ups = combinations(&even, n_up as usize);
        let dns = combinations(&odd, n_dn as usize);
        let mut dets: Vec<Determinant> = ups
            .iter()
            .flat_map(|&u| dns.iter().map(move |&d| Determinant(u | d)))
            .collect();
        dets.sort();
        Self { n_orbitals, dets }
    }

    /// Fixed total particle number.
    pub fn particle_sector(n_orbitals: usize, n: u32) -> Self {
        let all: Vec<usize> = (0..n_orbitals).collect();
        let mut dets: Vec<Determinant> = combinations(&all, n as usize).into_iter().map(Determinant).collect();
        dets.sort();
        Self { n_orbitals, dets }
    }

    pub fn from_determinants(n_orbitals: usize, dets: &[Determinant]) -> Self {
        let mut dets = dets.to_vec();
        dets.sort();
        dets.dedup();
        Self { n_orbitals, dets }
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn determinants(&self) -> &[Determinant] {
        &self.dets
    }

    pub fn len(&self) -> usize {
        self.dets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dets.is_empty()
    }

    pub fn index_of(&self, d: Determinant) -> Option<usize> {
        self.dets.binary_search(&d).ok()
    }
}

fn combinations(items: &[usize], k: usize) -> Vec<u64> {
    fn rec(items: &[usize], k: usize, start: usize, mask: u64, out: &mut Vec<u64>) {
        if k == 0 {
            out.push(mask);
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k {
                break;
            }
            rec(items, k - 1, i + 1, mask | 1 << items[i], out);
        }
    }
    let mut out = Vec::new();
    rec(items, k, 0, 0, &mut out);
    out
}

/// `M[i][j] = ⟨d_i| x |d_j⟩` over `basis` (components leaving the basis are
/// projected out).
pub fn build_dense(x: &OperatorSum, basis: &SectorBasis) -> Result<DMatrix<Complex64>> {
    let n = basis.len();
    if n > MAX_DENSE_DIM {
        return Err(Error::InvalidConfig(format!(
            "dense oracle dimension {n} exceeds {MAX_DENSE_DIM}"
        )));
    }
    let columns = par::map_range(n, |j| {
        let mut col = vec![ZERO; n];
        let d = basis.dets[j];
        for &(p, c) in x.terms() {
            if let Some((s, d2)) = apply_product(p, d) {
                if let Some(i) = basis.index_of(d2) {
                    col[i] += c * s;
                }
            }
        }
        col
    });
    Ok(DMatrix::from_fn(n, n, |i, j| columns[j][i]))
}

/// True when `x` maps every basis state back into the basis.
pub fn is_closed(x: &OperatorSum, basis: &SectorBasis) -> bool {
    basis.dets.iter().all(|&d| {
        x.terms().iter().all(|&(p, _)| match apply_product(p, d) {
            Some((_, d2)) => basis.index_of(d2).is_some(),
            None => true,
        })
    })
}

/// `max |M_ij - conj(M_ji)|`.
pub fn hermiticity_residual(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: DMatrix<Complex64>,
}

pub fn eigensolve_hermitian(m: &DMatrix<Complex64>) -> Result<Eigen> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotHermitian(f64::INFINITY));
    }
    let res = hermiticity_residual(m);
    if res > HERMITICITY_TOL {
        return Err(Error::NotHermitian(res));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Eigen { values: vec![], vectors: DMatrix::zeros(0, 0) });
    }
    // symmetrize so the solver sees an exactly Hermitian input
    let herm = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    // fix the phase: largest-magnitude component real and positive
    for k in 0..n {
        let mut best = 0;
        for i in 0..n {
            if vectors[(i, k)].norm() > vectors[(best, k)].norm() + 1e-12 {
                best = i;
            }
        }
        let pivot = vectors[(best, k)];
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            for i in 0..n {
                vectors[(i, k)] *= phase;
            }
        }
    }
    Ok(Eigen { values, vectors })
}

/// Lowest eigenpair of `h` within a sector; the state is normalized.
pub fn ground_state(h: &OperatorSum, sector: &SectorBasis) -> Result<(f64, StateVector)> {
    if sector.is_empty() {
        return Err(Error::EmptySector);
    }
    let m = build_dense(h, sector)?;
    let eig = eigensolve_hermitian(&m)?;
    let coeffs: Vec<Complex64> = eig.vectors.column(0).iter().copied().collect();
    Ok((eig.values[0], StateVector::from_dense(sector, &coeffs).normalized()?))
}

/// Number of spinorbitals needed to represent all arguments.
pub fn orbital_count(ops: &[&OperatorSum], states: &[&StateVector]) -> usize {
    let a = ops.iter().filter_map(|o| o.max_index()).max();
    let b = states.iter().filter_map(|s| s.max_bit()).max();
    a.max(b).map_or(1, |m| m + 1)
}

/// Spin sector containing every determinant of `psi`.
pub fn sector_of(psi: &StateVector, n_orbitals: usize) -> Result<SectorBasis> {
    let first = psi.amplitudes().first().ok_or(Error::ZeroVector)?.0.spin_counts();
    if psi.amplitudes().iter().any(|t| t.0.spin_counts() != first) {
        return Err(Error::SectorMismatch);
    }
    Ok(SectorBasis::spin_sector(n_orbitals, first.0, first.1))
}

/// `⟨ψ0| e^{iHt} obs e^{-iHt} |ψ0⟩` by diagonalizing `h` in the sector of `psi0`.
pub fn exact_heisenberg(obs: &OperatorSum, h: &OperatorSum, psi0: &StateVector, times: &[f64]) -> Result<Vec<Complex64>> {
    let n_orb = orbital_count(&[obs, h], &[psi0]);
    let basis = sector_of(psi0, n_orb)?;
    if !is_closed(h, &basis) || !is_closed(obs, &basis) {
        return Err(Error::SectorMismatch);
    }
    let hm = build_dense(h, &basis)?;
    let om = build_dense(obs, &basis)?;
    let eig = eigensolve_hermitian(&hm)?;
    let v = &eig.vectors;
    let c0 = v.adjoint() * psi0.to_dense(&basis);
    // observable in the eigenbasis
    let o_eig = v.adjoint() * om * v;
    let n = basis.len();
    Ok(times
        .iter()
        .map(|&t| {
            let ct = DVector::from_fn(n, |k, _| c0[k] * Complex64::from_polar(1.0, -eig.values[k] * t));
            (ct.adjoint() * &o_eig * &ct)[(0, 0)]
        })
        .collect())
}

/// `exp(-i H t) |ψ0⟩` via the same eigendecomposition route (oracle helper).
pub fn exact_propagate(h: &OperatorSum, psi0: &StateVector, t: f64) -> Result<StateVector> {
    let n_orb = orbital_count(&[h], &[psi0]);
    let basis = sector_of(psi0, n_orb)?;
    if !is_closed(h, &basis) {
        return Err(Error::SectorMismatch);
    }
    let eig = eigensolve_hermitian(&build_dense(h, &basis)?)?;
    let v = &eig.vectors;
    let c0 = v.adjoint() * psi0.to_dense(&basis);
    let ct = DVector::from_fn(basis.len(), |k, _| c0[k] * Complex64::from_polar(1.0, -eig.values[k] * t));
    let out = v * ct;
    let coeffs: Vec<Complex64> = out.iter().copied().collect();
    Ok(StateVector::from_dense(&basis, &coeffs))
}
