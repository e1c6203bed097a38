//! Adaptive block-diagonalization by gradient-selected fermionic rotations.
//!
//! The transformed Hamiltonian is
//! `H̄ = e^{-θ_n A_n} ⋯ e^{-θ_1 A_1} H e^{θ_1 A_1} ⋯ e^{θ_n A_n}`,
//! built by conjugating with `j = 1..n` in turn. At every iteration the
//! reference `Ψ` is the lowest eigenvector of `H̄` projected on the active
//! determinants, the pool operator with the largest `|⟨Ψ|[H̄, A]|Ψ⟩|` is
//! appended, and its angle is optimized.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{OperatorProduct, OperatorSum};
use crate::error::{Error, Result};
use crate::par;
use crate::rotations::{rotate_sum, Generator};
use crate::states::{apply_operator, expectation, ground_state, Determinant, SectorBasis, StateVector};

/// Grid resolution of the θ scan.
pub const THETA_GRID: usize = 64;

/// Hermiticity tolerance checked on every iterate.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Cap on repeated sweeps in to-convergence mode.
pub const MAX_SWEEPS: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    #[default]
    None,
    OnePass,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DownfoldConfig {
    pub active: Vec<usize>,
    pub external: Vec<usize>,
    pub active_dets: Vec<Determinant>,
    pub grad_tol: f64,
    pub energy_tol: f64,
    /// Defaults to the pool size.
    pub max_operators: Option<usize>,
    pub sweep: SweepMode,
    /// Repeat one-pass sweeps until the energy change drops below `energy_tol`.
    pub sweep_to_convergence: bool,
    pub optimizer_tol: f64,
    /// Reference energy for the error column.
    pub exact_energy: Option<f64>,
}

impl DownfoldConfig {
    pub fn new(active: Vec<usize>, external: Vec<usize>, active_dets: Vec<Determinant>) -> Self {
        Self {
            active,
            external,
            active_dets,
            grad_tol: 1e-6,
            energy_tol: 1e-9,
            max_operators: None,
            sweep: SweepMode::None,
            sweep_to_convergence: false,
            optimizer_tol: 1e-10,
            exact_energy: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.active.is_empty() || self.external.is_empty() {
            return bad("active and external spinorbital sets must be nonempty".into());
        }
        if let Some(p) = self.active.iter().find(|p| self.external.contains(p)) {
            return bad(format!("spinorbital {p} is both active and external"));
        }
        let limit = crate::algebra::MAX_ORBITALS;
        if let Some(&index) = self.active.iter().chain(&self.external).find(|&&p| p >= limit) {
            return Err(Error::IndexOutOfRange { index, limit });
        }
        if self.active_dets.is_empty() {
            return Err(Error::EmptySector);
        }
        let active_mask = self.active.iter().fold(0u64, |m, &p| m | 1 << p);
        if let Some(d) = self.active_dets.iter().find(|d| d.bits() & !active_mask != 0) {
            return bad(format!("determinant {:?} occupies non-active spinorbitals", d.occupied()));
        }
        if !(self.grad_tol > 0.0 && self.energy_tol > 0.0 && self.optimizer_tol > 0.0) {
            return bad("thresholds must be positive".into());
        }
        Ok(())
    }
}

/// Candidate generator products.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pool(pub Vec<OperatorProduct>);

impl Pool {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &OperatorProduct> {
        self.0.iter()
    }
}

fn is_up(p: usize) -> bool {
    p.is_multiple_of(2)
}

/// Spin-conserving singles `a^x_i` followed by doubles `a^{xy}_{ij}`.
pub fn build_pool(cfg: &DownfoldConfig) -> Result<Pool> {
    if cfg.active.is_empty() || cfg.external.is_empty() {
        return Err(Error::InvalidConfig("operator pool is empty: no active or no external spinorbitals".into()));
    }
    let mut act = cfg.active.clone();
    let mut ext = cfg.external.clone();
    act.sort_unstable();
    act.dedup();
    ext.sort_unstable();
    ext.dedup();
    let mut pool = Vec::new();
    for &i in &act {
        for &x in &ext {
            if is_up(i) == is_up(x) && i != x {
                pool.push(OperatorProduct::excitation(x, i));
            }
        }
    }
    let ups = |a: usize, b: usize| is_up(a) as u8 + is_up(b) as u8;
    for (k, &i) in act.iter().enumerate() {
        for &j in &act[k + 1..] {
            for (l, &x) in ext.iter().enumerate() {
                for &y in &ext[l + 1..] {
                    if ups(i, j) == ups(x, y) && (1u64 << i | 1 << j) & (1 << x | 1 << y) == 0 {
                        pool.push(OperatorProduct::from_masks(1 << x | 1 << y, 1 << i | 1 << j));
                    }
                }
            }
        }
    }
    if pool.is_empty() {
        return Err(Error::InvalidConfig("operator pool is empty".into()));
    }
    Ok(Pool(pool))
}

/// Ordered `(T, θ)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformationSequence(pub Vec<(OperatorProduct, f64)>);

impl TransformationSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn generators(&self) -> impl Iterator<Item = Generator> + '_ {
        self.0.iter().map(|&(t, th)| Generator::anti_hermitian(t, th))
    }
}

pub fn transform_hamiltonian(h: &OperatorSum, seq: &TransformationSequence) -> Result<OperatorSum> {
    seq.generators().try_fold(h.clone(), |acc, g| rotate_sum(&acc, &g))
}

fn generator_sum(t: OperatorProduct) -> OperatorSum {
    crate::rotations::build_generator_sum(&Generator::anti_hermitian(t, 0.0))
}

/// `⟨Ψ|[H̄, A]|Ψ⟩` given `H̄|Ψ⟩`; real for Hermitian `H̄`.
fn gradient_with(hpsi: &StateVector, a: &OperatorSum, psi: &StateVector) -> Complex64 {
    let apsi = apply_operator(a, psi);
    hpsi.inner(&apsi) - expectation(psi, a, hpsi)
}

/// `Re ⟨Ψ|[H̄, A]|Ψ⟩` with `A = T - T†`.
pub fn gradient(hbar: &OperatorSum, t: OperatorProduct, psi: &StateVector) -> f64 {
    let hpsi = apply_operator(hbar, psi);
    gradient_with(&hpsi, &generator_sum(t), psi).re
}

/// All pool gradients, in pool order.
pub fn pool_gradients(hbar: &OperatorSum, pool: &Pool, psi: &StateVector) -> Vec<f64> {
    let hpsi = apply_operator(hbar, psi);
    par::map(&pool.0, |&t| gradient_with(&hpsi, &generator_sum(t), psi).re)
}

/// First index of the largest `|g|`.
fn argmax_abs(g: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, v) in g.iter().enumerate() {
        if best.is_none_or(|b| v.abs() > g[b].abs()) {
            best = Some(k);
        }
    }
    best
}

pub fn select_operator(hbar: &OperatorSum, pool: &Pool, psi: &StateVector) -> Result<(OperatorProduct, f64)> {
    let g = pool_gradients(hbar, pool, psi);
    let k = argmax_abs(&g).ok_or_else(|| Error::InvalidConfig("operator pool is empty".into()))?;
    Ok((pool.0[k], g[k]))
}

/// `E(θ) = ⟨Ψ| e^{-θA} H e^{θA} |Ψ⟩` in closed form.
///
/// With `e^{θA}Ψ = v0 + s v1 + c v2`, `s = sin θ`, `c = 1 - cos θ`,
/// `v1 = AΨ` and `v2 = A²Ψ`, the energy is a quadratic form in `(1, s, c)`
/// whose coefficients are `Re ⟨v_i|H|v_j⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyLandscape {
    /// `[h00, h11, h22, h01, h02, h12]`
    pub h: [f64; 6],
}

impl EnergyLandscape {
    pub fn new(hbar: &OperatorSum, t: OperatorProduct, psi: &StateVector) -> Self {
        let a = generator_sum(t);
        let v1 = apply_operator(&a, psi);
        let v2 = apply_operator(&a, &v1);
        Self::from_vectors(hbar, [psi, &v1, &v2])
    }

    /// From precomputed `[v0, v1, v2]`.
    pub fn from_vectors(h: &OperatorSum, v: [&StateVector; 3]) -> Self {
        let hv: Vec<StateVector> = v.iter().map(|x| apply_operator(h, x)).collect();
        let m = |i: usize, j: usize| v[i].inner(&hv[j]).re;
        Self { h: [m(0, 0), m(1, 1), m(2, 2), m(0, 1), m(0, 2), m(1, 2)] }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let [h00, h11, h22, h01, h02, h12] = self.h;
        let s = theta.sin();
        let half = (0.5 * theta).sin();
        let c = 2.0 * half * half;
        h00 + s * s * h11 + c * c * h22 + 2.0 * (s * h01 + c * h02 + s * c * h12)
    }

    /// First and second θ-derivatives.
    pub fn derivatives(&self, theta: f64) -> (f64, f64) {
        let [_, h11, h22, h01, h02, h12] = self.h;
        let (s, cs) = theta.sin_cos();
        let c = 1.0 - cs;
        // s' = cos, c' = sin, s'' = -sin, c'' = cos
        let (ds, dc, dds, ddc) = (cs, s, -s, cs);
        let d1 = 2.0 * (s * ds * h11 + c * dc * h22 + ds * h01 + dc * h02 + (ds * c + s * dc) * h12);
        let d2 = 2.0
            * ((ds * ds + s * dds) * h11
                + (dc * dc + c * ddc) * h22
                + dds * h01
                + ddc * h02
                + (dds * c + 2.0 * ds * dc + s * ddc) * h12);
        (d1, d2)
    }

    /// `E(θ) - E(0)` vanishes identically.
    pub fn is_flat(&self) -> bool {
        let [h00, h11, h22, h01, h02, h12] = self.h;
        let scale = 1e-14 * (1.0 + h00.abs());
        [h11, h22, h01, h02, h12].iter().all(|x| x.abs() < scale)
    }

    /// Global minimizer over `[-π, π)`: 64-point grid, golden-section
    /// refinement of the best cell, then Newton polishing. Never returns a
    /// point worse than the grid or `seed`; returns `seed` on a flat landscape.
    pub fn minimize(&self, tol: f64, seed: f64) -> f64 {
        if self.is_flat() {
            return seed;
        }
        let h = 2.0 * std::f64::consts::PI / THETA_GRID as f64;
        let mut best = (seed, self.eval(seed));
        for k in 0..THETA_GRID {
            let th = -std::f64::consts::PI + h * k as f64;
            let e = self.eval(th);
            if e < best.1 {
                best = (th, e);
            }
        }
        let mut x = golden_section(|x| self.eval(x), best.0 - h, best.0 + h, tol);
        for _ in 0..4 {
            let (d1, d2) = self.derivatives(x);
            if d2 <= 0.0 {
                break;
            }
            x -= d1 / d2;
        }
        let e = self.eval(x);
        if e <= best.1 {
            best = (x, e);
        }
        wrap_angle(best.0)
    }
}

/// Maps an angle into `[-π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let w = (theta + std::f64::consts::PI).rem_euclid(tau) - std::f64::consts::PI;
    if w >= std::f64::consts::PI {
        w - tau
    } else {
        w
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// θ minimizing `⟨Ψ| e^{-θA} H̄ e^{θA} |Ψ⟩`; 0 when the energy does not depend on θ.
pub fn optimize_theta(hbar: &OperatorSum, t: OperatorProduct, psi: &StateVector, tol: f64) -> f64 {
    EnergyLandscape::new(hbar, t, psi).minimize(tol, 0.0)
}

/// `e^{θA}|v⟩ = v + sin θ Av + (1 - cos θ) A²v` with `A = T - T†`.
pub fn apply_exp_generator(t: OperatorProduct, theta: f64, v: &StateVector) -> StateVector {
    let a = generator_sum(t);
    let av = apply_operator(&a, v);
    let aav = apply_operator(&a, &av);
    let half = (0.5 * theta).sin();
    v.axpy(Complex64::new(theta.sin(), 0.0), &av).axpy(Complex64::new(2.0 * half * half, 0.0), &aav)
}

/// One pass `j = 1..n` re-optimizing each angle with the others fixed and
/// `Ψ` held fixed.
///
/// The objective for `θ_j` is `⟨L U_j φ_j| H |L U_j φ_j⟩` with
/// `L = U_1 ⋯ U_{j-1}` (already updated) and `φ_j = U_{j+1} ⋯ U_n Ψ`, which
/// equals `⟨Ψ|H̄|Ψ⟩` without building `H̄`. Returns the new sequence and its
/// energy `⟨Ψ|H̄|Ψ⟩`.
pub fn sweep(
    h: &OperatorSum,
    seq: &TransformationSequence,
    psi: &StateVector,
    tol: f64,
) -> Result<(TransformationSequence, f64)> {
    let n = seq.len();
    if n == 0 {
        return Ok((seq.clone(), expectation(psi, h, psi).re));
    }
    let mut phi = vec![psi.clone(); n];
    for j in (0..n - 1).rev() {
        let (t, th) = seq.0[j + 1];
        phi[j] = apply_exp_generator(t, th, &phi[j + 1]);
    }
    let mut out = seq.clone();
    let mut energy = f64::NAN;
    #[allow(clippy::needless_range_loop)]
    for j in 0..n {
        let (t, old) = out.0[j];
        let a = generator_sum(t);
        let v1 = apply_operator(&a, &phi[j]);
        let v2 = apply_operator(&a, &v1);
        let mut v = [phi[j].clone(), v1, v2];
        for &(tk, thk) in out.0[..j].iter().rev() {
            for x in v.iter_mut() {
                *x = apply_exp_generator(tk, thk, x);
            }
        }
        let land = EnergyLandscape::from_vectors(h, [&v[0], &v[1], &v[2]]);
        let theta = land.minimize(tol, old);
        out.0[j].1 = theta;
        energy = land.eval(theta);
    }
    Ok((out, energy))
}


/// Lowest eigenpair of `H̄` projected on the active determinants.
pub fn subspace_ground_state(hbar: &OperatorSum, active_dets: &[Determinant]) -> Result<(f64, StateVector)> {
    if active_dets.is_empty() {
        return Err(Error::EmptySector);
    }
    let n_orb = active_dets.iter().map(|d| 64 - d.bits().leading_zeros() as usize).max().unwrap_or(0);
    ground_state(hbar, &SectorBasis::from_determinants(n_orb, active_dets))
}

/// Entry `(n, m)` is the Euclidean norm of all terms with `n` creators and
/// `m` annihilators.
pub fn rank_magnitude_matrix(hbar: &OperatorSum) -> DMatrix<f64> {
    let k = hbar
        .iter()
        .map(|(p, _)| p.n_creators().max(p.n_annihilators()) as usize)
        .max()
        .unwrap_or(0);
    let mut m = DMatrix::<f64>::zeros(k + 1, k + 1);
    for (p, c) in hbar.iter() {
        m[(p.n_creators() as usize, p.n_annihilators() as usize)] += c.norm_sqr();
    }
    m.map(f64::sqrt)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    GradientConverged,
    EnergyConverged,
    MaxOperators,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::GradientConverged => "gradient-converged",
            StopReason::EnergyConverged => "energy-converged",
            StopReason::MaxOperators => "max-operators",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `None` for the untransformed starting point.
    pub operator: Option<OperatorProduct>,
    pub theta: f64,
    pub gradient: f64,
    pub energy: f64,
    pub error: Option<f64>,
    pub terms: usize,
    pub hermiticity: f64,
}

#[derive(Clone, Debug)]
pub struct DownfoldReport {
    pub iterations: Vec<IterationRecord>,
    pub sequence: TransformationSequence,
    pub hbar: OperatorSum,
    pub psi: StateVector,
    pub rank_matrix: DMatrix<f64>,
    pub stop: StopReason,
    pub pool_size: usize,
    /// Pool gradients at the final iterate.
    pub final_gradients: Vec<f64>,
}

impl DownfoldReport {
    pub fn final_energy(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |r| r.energy)
    }
}

fn check_hermitian(x: &OperatorSum) -> Result<f64> {
    let r = x.hermiticity_residual();
    if r > HERMITICITY_TOL {
        return Err(Error::NonHermitianOperator(r));
    }
    Ok(r)
}

pub fn run_adaptive(h: &OperatorSum, cfg: &DownfoldConfig) -> Result<DownfoldReport> {
    cfg.validate()?;
    let pool = build_pool(cfg)?;
    let max_ops = cfg.max_operators.unwrap_or(pool.len());
    let err = |e: f64| cfg.exact_energy.map(|x| e - x);

    let mut hbar = h.clone();
    let herm = check_hermitian(&hbar)?;
    let mut seq = TransformationSequence::default();
    let (mut energy, mut psi) = subspace_ground_state(&hbar, &cfg.active_dets)?;
    let mut iterations = vec![IterationRecord {
        iteration: 0,
        operator: None,
        theta: 0.0,
        gradient: 0.0,
        energy,
        error: err(energy),
        terms: hbar.len(),
        hermiticity: herm,
    }];

    let (stop, final_gradients) = loop {
        let grads = pool_gradients(&hbar, &pool, &psi);
        let k = argmax_abs(&grads).expect("pool is nonempty");
        let (t, g) = (pool.0[k], grads[k]);
        if g.abs() < cfg.grad_tol {
            break (StopReason::GradientConverged, grads);
        }
        if seq.len() >= max_ops {
            break (StopReason::MaxOperators, grads);
        }
        let theta = optimize_theta(&hbar, t, &psi, cfg.optimizer_tol);
        seq.0.push((t, theta));
        if cfg.sweep == SweepMode::OnePass {
            let mut e_ref = EnergyLandscape::new(&hbar, t, &psi).eval(theta);
            let passes = if cfg.sweep_to_convergence { MAX_SWEEPS } else { 1 };
            for _ in 0..passes {
                let (s, e) = sweep(h, &seq, &psi, cfg.optimizer_tol)?;
                seq = s;
                let done = (e_ref - e).abs() < cfg.energy_tol;
                e_ref = e;
                if done {
                    break;
                }
            }
            hbar = transform_hamiltonian(h, &seq)?;
        } else {
            hbar = rotate_sum(&hbar, &Generator::anti_hermitian(t, theta))?;
        }
        let herm = check_hermitian(&hbar)?;
        let (e_new, psi_new) = subspace_ground_state(&hbar, &cfg.active_dets)?;
        psi = psi_new;
        iterations.push(IterationRecord {
            iteration: seq.len(),
            operator: Some(t),
            theta,
            gradient: g,
            energy: e_new,
            error: err(e_new),
            terms: hbar.len(),
            hermiticity: herm,
        });
        let de = (e_new - energy).abs();
        energy = e_new;
        if de < cfg.energy_tol {
            let grads = pool_gradients(&hbar, &pool, &psi);
            break (StopReason::EnergyConverged, grads);
        }
    };

    Ok(DownfoldReport {
        iterations,
        sequence: seq,
        rank_matrix: rank_magnitude_matrix(&hbar),
        hbar,
        psi,
        stop,
        pool_size: pool.len(),
        final_gradients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{commutator, ONE};
    use crate::models::{hubbard_chain, two_level, HubbardSpec};
    use crate::rotations::flow_derivative;

    fn det(o: &[usize]) -> Determinant {
        Determinant::from_occupied(o)
    }

    #[test]
    fn pool_counts() {
        // 2 active ↑ and 2 external ↑
        let cfg = DownfoldConfig::new(vec![0, 2], vec![4, 6], vec![det(&[0])]);
        let pool = build_pool(&cfg).unwrap();
        assert_eq!(pool.len(), 5);
        assert_eq!(pool.0.iter().filter(|p| p.len() == 2).count(), 4);
        let cfg = DownfoldConfig::new(vec![0, 1, 2, 3], vec![4, 5, 6, 7], vec![det(&[0, 1])]);
        let pool = build_pool(&cfg).unwrap();
        assert_eq!(pool.len(), 8 + 18);
        // pair double a^{4↑4↓}_{1↑1↓} in 1-based spatial labels
        assert!(pool.0.contains(&OperatorProduct::new(&[6, 7], &[0, 1]).unwrap()));
        let empty = DownfoldConfig::new(vec![0, 1], vec![], vec![det(&[0])]);
        assert!(build_pool(&empty).is_err());
    }

    #[test]
    fn gradient_matches_flow_and_flips_under_adjoint() {
        let h = hubbard_chain(&HubbardSpec::new(2, 1.0, 1.3).unwrap());
        let psi = StateVector::from_amplitudes([
            (det(&[0, 1]), Complex64::new(0.8, 0.0)),
            (det(&[0, 3]), Complex64::new(0.6, 0.0)),
        ]);
        let t = OperatorProduct::excitation(2, 0);
        let g = gradient(&h, t, &psi);
        let g_adj = gradient(&h, t.adjoint(), &psi);
        assert!((g + g_adj).abs() < 1e-14);
        let gen = Generator::anti_hermitian(t, 0.0);
        let flow: Complex64 = h
            .iter()
            .map(|&(p, c)| c * expectation(&psi, &flow_derivative(p, &gen).unwrap(), &psi))
            .sum();
        assert!((flow.re - g).abs() < 1e-12 && g.abs() > 1e-3);
        let comm = commutator(&h, &generator_sum(t));
        assert!((expectation(&psi, &comm, &psi).re - g).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_for_diagonal_hamiltonian() {
        let h = OperatorSum::from_terms([
            (OperatorProduct::number(0), Complex64::new(-1.0, 0.0)),
            (OperatorProduct::number(2), Complex64::new(0.5, 0.0)),
        ]);
        let psi = StateVector::basis(det(&[0]));
        assert_eq!(gradient(&h, OperatorProduct::excitation(2, 0), &psi), 0.0);
    }

    #[test]
    fn landscape_matches_direct_rotation() {
        let h = hubbard_chain(&HubbardSpec::new(2, 0.7, 1.9).unwrap());
        let psi = StateVector::basis(det(&[0, 1]));
        let t = OperatorProduct::from_masks(0b1100, 0b0011);
        let land = EnergyLandscape::new(&h, t, &psi);
        for k in 0..20 {
            let th = -3.0 + 0.31 * k as f64;
            let direct = expectation(&psi, &rotate_sum(&h, &Generator::anti_hermitian(t, th)).unwrap(), &psi).re;
            assert!((land.eval(th) - direct).abs() < 1e-13);
            let eps = 1e-5;
            let fd1 = (land.eval(th + eps) - land.eval(th - eps)) / (2.0 * eps);
            let fd2 = (land.eval(th + eps) - 2.0 * land.eval(th) + land.eval(th - eps)) / (eps * eps);
            let (d1, d2) = land.derivatives(th);
            assert!((d1 - fd1).abs() < 1e-8 && (d2 - fd2).abs() < 1e-4);
        }
    }

    #[test]
    fn optimizer_beats_fine_grid() {
        let h = hubbard_chain(&HubbardSpec::new(2, 1.0, 1.0).unwrap());
        let psi = StateVector::from_amplitudes([
            (det(&[0, 1]), Complex64::new(0.6, 0.0)),
            (det(&[1, 2]), Complex64::new(0.0, 0.8)),
        ]);
        for t in [OperatorProduct::excitation(2, 0), OperatorProduct::from_masks(0b1100, 0b0011)] {
            let land = EnergyLandscape::new(&h, t, &psi);
            let th = optimize_theta(&h, t, &psi, 1e-10);
            let grid = (0..1000)
                .map(|k| land.eval(-std::f64::consts::PI + 2.0 * std::f64::consts::PI * k as f64 / 1000.0))
                .fold(f64::INFINITY, f64::min);
            assert!(land.eval(th) <= grid + 1e-9);
            assert!(land.eval(th) <= land.eval(0.0));
        }
    }

    #[test]
    fn two_level_stationary_condition() {
        let (a, b, g) = (-0.4, 0.9, 0.35);
        let h = two_level(a, b, g, 0, 2).unwrap();
        let psi = StateVector::basis(det(&[0]));
        let th = optimize_theta(&h, OperatorProduct::excitation(0, 2), &psi, 1e-12);
        assert!(((2.0 * th).tan() - 2.0 * g / (b - a)).abs() < 1e-12);
        let lower = 0.5 * (a + b) - (0.25 * (a - b) * (a - b) + g * g).sqrt();
        let hbar = rotate_sum(&h, &Generator::anti_hermitian(OperatorProduct::excitation(0, 2), th)).unwrap();
        assert!((expectation(&psi, &hbar, &psi).re - lower).abs() < 1e-12);
    }

    #[test]
    fn flat_landscape_returns_zero() {
        let h = OperatorSum::from_product(OperatorProduct::number(5), ONE);
        let psi = StateVector::basis(det(&[0]));
        assert_eq!(optimize_theta(&h, OperatorProduct::excitation(2, 0), &psi, 1e-10), 0.0);
    }

    #[test]
    fn exp_generator_on_states_matches_operator_form() {
        let t = OperatorProduct::from_masks(0b1100, 0b0001);
        let v = StateVector::from_amplitudes([(det(&[0]), ONE), (det(&[2, 3]), Complex64::new(0.0, 0.5))]);
        let th = 0.77;
        let op = crate::rotations::exp_generator(&Generator::anti_hermitian(t, th)).unwrap();
        let a = apply_operator(&op, &v);
        let b = apply_exp_generator(t, th, &v);
        assert!(a.axpy(-ONE, &b).norm() < 1e-14);
    }

    #[test]
    fn sweep_single_operator_equals_optimize() {
        let h = hubbard_chain(&HubbardSpec::new(2, 1.0, 1.0).unwrap());
        let psi = StateVector::basis(det(&[0, 1]));
        let t = OperatorProduct::excitation(2, 0);
        let th = optimize_theta(&h, t, &psi, 1e-10);
        let (s, _) = sweep(&h, &TransformationSequence(vec![(t, 0.0)]), &psi, 1e-10).unwrap();
        assert!((s.0[0].1 - th).abs() < 1e-12);
        // already optimal: unchanged
        let (again, _) = sweep(&h, &s, &psi, 1e-10).unwrap();
        assert!((again.0[0].1 - th).abs() < 1e-12);
    }

    #[test]
    fn sweep_lowers_energy_and_reports_it() {
        let h = hubbard_chain(&HubbardSpec::new(3, 1.0, 2.0).unwrap());
        let psi = StateVector::basis(det(&[0, 1]));
        let seq = TransformationSequence(vec![
            (OperatorProduct::excitation(2, 0), 0.3),
            (OperatorProduct::excitation(3, 1), -0.2),
            (OperatorProduct::from_masks(0b11_0000, 0b11), 0.1),
        ]);
        let before = expectation(&psi, &transform_hamiltonian(&h, &seq).unwrap(), &psi).re;
        let (s1, e1) = sweep(&h, &seq, &psi, 1e-10).unwrap();
        let after = expectation(&psi, &transform_hamiltonian(&h, &s1).unwrap(), &psi).re;
        assert!((after - e1).abs() < 1e-12);
        assert!(after <= before + 1e-14);
        // passes never raise the energy and settle
        let mut cur = (s1, e1);
        for _ in 0..50 {
            let next = sweep(&h, &cur.0, &psi, 1e-10).unwrap();
            assert!(next.1 <= cur.1 + 1e-14);
            cur = next;
        }

    }

    #[test]
    fn block_diagonal_hamiltonian_needs_no_operators() {
        let h = OperatorSum::from_terms([
            (OperatorProduct::number(0), Complex64::new(-1.0, 0.0)),
            (OperatorProduct::number(2), Complex64::new(0.5, 0.0)),
        ]);
        let cfg = DownfoldConfig::new(vec![0], vec![2], vec![det(&[0])]);
        let rep = run_adaptive(&h, &cfg).unwrap();
        assert_eq!(rep.sequence.len(), 0);
        assert_eq!(rep.stop, StopReason::GradientConverged);
    }

    #[test]
    fn rank_matrix_partitions_norm() {
        let h = hubbard_chain(&HubbardSpec::new(3, 1.0, 2.0).unwrap());
        let m = rank_magnitude_matrix(&h);
        assert_eq!(m.shape(), (3, 3));
        assert!(m[(0, 0)] == 0.0 && m[(1, 1)] > 0.0 && m[(2, 2)] > 0.0);
        let total: f64 = m.iter().map(|x| x * x).sum();
        assert!((total - h.euclidean_norm().powi(2)).abs() < 1e-12);
        let id = rank_magnitude_matrix(&OperatorSum::identity());
        assert_eq!(id.shape(), (1, 1));
    }
}
