//! Heisenberg-picture evolution `O(t) = e^{iHt} O e^{-iHt}` with a symmetric
//! second-order Trotter product of exact single-term rotations.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{OperatorProduct, OperatorSum, Rank, DEFAULT_DROP_TOL};
use crate::error::{Error, Result};
use crate::rotations::{rotate_sum_with_tol, Generator};
use crate::states::{apply_operator, expectation, StateVector};

/// Imaginary parts and Hermiticity residuals above this reject a Hamiltonian.
pub const SPLIT_TOL: f64 = 1e-12;

/// One Hamiltonian term: `coeff (T + T†)` or, for number products, `coeff T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HamiltonianTerm {
    pub product: OperatorProduct,
    pub coeff: f64,
}

impl HamiltonianTerm {
    pub fn is_self_adjoint(&self) -> bool {
        self.product.is_number_product()
    }

    pub fn to_sum(&self) -> OperatorSum {
        let c = Complex64::new(self.coeff, 0.0);
        if self.is_self_adjoint() {
            OperatorSum::from_product(self.product, c)
        } else {
            OperatorSum::from_terms([(self.product, c), (self.product.adjoint(), c)])
        }
    }
}

/// Splits a Hermitian sum with real coefficients into adjoint pairs and
/// self-adjoint number products, in canonical order.
pub fn split_hamiltonian(h: &OperatorSum) -> Result<Vec<HamiltonianTerm>> {
    let res = h.hermiticity_residual();
    if res > SPLIT_TOL {
        return Err(Error::NonHermitianOperator(res));
    }
    let mut out = Vec::new();
    for &(p, c) in h.iter() {
        if c.im.abs() > SPLIT_TOL {
            return Err(Error::ComplexCoefficient(p.to_string()));
        }
        let adj = p.adjoint();
        if adj == p || p < adj {
            out.push(HamiltonianTerm { product: p, coeff: c.re });
        }
    }
    Ok(out)
}

/// Order `ℓ = 1..N` of the Trotter factors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermOrdering {
    /// Non-self-adjoint (hopping) terms first, then number products, each
    /// group by lowest spinorbital (site-major, spin-minor for the Hubbard
    /// packing).
    #[default]
    HoppingFirst,
    /// Canonical product order.
    Canonical,
}

pub fn order_terms(terms: &[HamiltonianTerm], ordering: TermOrdering) -> Vec<HamiltonianTerm> {
    let mut v = terms.to_vec();
    if ordering == TermOrdering::HoppingFirst {
        v.sort_by_key(|t| (t.is_self_adjoint(), t.product.support().trailing_zeros(), t.product));
    }
    v
}

/// Generators for one step, in conjugation order.
#[derive(Clone, Debug, PartialEq)]
pub struct TrotterSchedule {
    pub entries: Vec<Generator>,
    pub dt: f64,
}

/// Rotation angle for a half step of `coeff·(T + T†)` or `coeff·T`.
///
/// `rotate_sum` with a Hermitian generator computes `e^{iθH} O e^{-iθH}`
/// with `H = T + T†`, so a half step of `e^{-i coeff H Δt/2}` needs
/// `θ = coeff Δt/2`. For a number product `H = 2T`, which halves the angle.
pub fn half_step_angle(term: &HamiltonianTerm, dt: f64) -> f64 {
    if term.is_self_adjoint() {
        term.coeff * dt / 4.0
    } else {
        term.coeff * dt / 2.0
    }
}

/// `e^{-iHΔt} ≈ V_N ⋯ V_1 V_1 ⋯ V_N` with `V_ℓ = e^{-iH_ℓ Δt/2}`. In the
/// Heisenberg picture `O` is conjugated by `V_N` first, so the schedule is
/// the reversed half-step pass followed by the forward pass.
pub fn build_schedule(terms: &[HamiltonianTerm], dt: f64, ordering: TermOrdering) -> Result<TrotterSchedule> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")));
    }
    let ordered = order_terms(terms, ordering);
    let gens: Vec<Generator> = ordered
        .iter()
        .filter(|t| !t.product.is_identity() && t.coeff != 0.0)
        .map(|t| Generator::hermitian(t.product, half_step_angle(t, dt)))
        .collect();
    let mut entries: Vec<Generator> = gens.iter().rev().copied().collect();
    entries.extend(gens);
    Ok(TrotterSchedule { entries, dt })
}

/// Applies one schedule to `o`; returns the squared weight dropped by `trunc`.
pub fn apply_schedule(o: &OperatorSum, schedule: &TrotterSchedule, trunc: f64) -> Result<(OperatorSum, f64)> {
    let tol = trunc.max(DEFAULT_DROP_TOL);
    let mut cur = o.clone();
    let mut dropped = 0.0;
    for g in &schedule.entries {
        let next = rotate_sum_with_tol(&cur, g, DEFAULT_DROP_TOL)?;
        cur = if tol > DEFAULT_DROP_TOL {
            let (kept, w) = next.truncate(tol);
            dropped += w;
            kept
        } else {
            next
        };
    }
    Ok((cur, dropped))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveOptions {
    pub trunc: f64,
    pub ordering: TermOrdering,
    pub keep_snapshots: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { trunc: 0.0, ordering: TermOrdering::HoppingFirst, keep_snapshots: false }
    }
}

/// Per-time-point data of a Heisenberg run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    /// `⟨ψ0|O(t)|ψ0⟩`
    pub expectation: Complex64,
    pub terms: usize,
    pub norm: f64,
    /// Cumulative squared weight removed by truncation.
    pub dropped_weight: f64,
    pub hermiticity: f64,
    /// Euclidean norm per rank (keyed by twice the rank).
    pub rank_norms: BTreeMap<u32, f64>,
}

#[derive(Clone, Debug, Default)]
pub struct DynamicsReport {
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<OperatorSum>,
    pub final_operator: OperatorSum,
}

impl DynamicsReport {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn expectations(&self) -> Vec<Complex64> {
        self.records.iter().map(|r| r.expectation).collect()
    }
}

pub fn rank_norms(o: &OperatorSum) -> BTreeMap<u32, f64> {
    let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
    for &(p, c) in o.iter() {
        *acc.entry(Rank::of(p).twice()).or_default() += c.norm_sqr();
    }
    acc.into_iter().map(|(k, v)| (k, v.sqrt())).collect()
}

fn record(step: usize, time: f64, o: &OperatorSum, psi0: &StateVector, dropped: f64) -> StepRecord {
    StepRecord {
        step,
        time,
        expectation: expectation(psi0, o, psi0),
        terms: o.len(),
        norm: o.euclidean_norm(),
        dropped_weight: dropped,
        hermiticity: o.hermiticity_residual(),
        rank_norms: rank_norms(o),
    }
}

/// Evolves `obs` for `steps` steps of `total_t / steps`, calling `on_step`
/// after every step (and once for `t = 0`).
pub fn heisenberg_evolve_with(
    obs: &OperatorSum,
    h: &OperatorSum,
    psi0: &StateVector,
    total_t: f64,
    steps: usize,
    opts: &EvolveOptions,
    mut on_step: impl FnMut(&StepRecord, &OperatorSum),
) -> Result<OperatorSum> {
    if steps == 0 {
        return Err(Error::InvalidConfig("step count must be at least 1".into()));
    }
    if opts.trunc.is_nan() || opts.trunc < 0.0 {
        return Err(Error::InvalidConfig(format!("truncation threshold must be non-negative, got {}", opts.trunc)));
    }
    let terms = split_hamiltonian(h)?;
    let dt = total_t / steps as f64;
    let mut o = obs.clone();
    let mut dropped = 0.0;
    on_step(&record(0, 0.0, &o, psi0, 0.0), &o);
    if total_t == 0.0 {
        for k in 1..=steps {
            on_step(&record(k, 0.0, &o, psi0, 0.0), &o);
        }
        return Ok(o);
    }
    let schedule = build_schedule(&terms, dt, opts.ordering)?;
    for k in 1..=steps {
        let (next, w) = apply_schedule(&o, &schedule, opts.trunc)?;
        o = next;
        dropped += w;
        on_step(&record(k, dt * k as f64, &o, psi0, dropped), &o);
    }
    Ok(o)
}

pub fn heisenberg_evolve(
    obs: &OperatorSum,
    h: &OperatorSum,
    psi0: &StateVector,
    total_t: f64,
    steps: usize,
    opts: &EvolveOptions,
) -> Result<DynamicsReport> {
    let mut report = DynamicsReport::default();
    let keep = opts.keep_snapshots;
    report.final_operator = heisenberg_evolve_with(obs, h, psi0, total_t, steps, opts, |r, o| {
        report.records.push(r.clone());
        if keep {
            report.snapshots.push(o.clone());
        }
    })?;
    Ok(report)
}

/// Normalized `a_p |gs⟩`.
pub fn sudden_ionization_state(gs: &StateVector, orbital: usize) -> Result<StateVector> {
    if orbital >= crate::algebra::MAX_ORBITALS {
        return Err(Error::IndexOutOfRange { index: orbital, limit: crate::algebra::MAX_ORBITALS });
    }
    let a = OperatorSum::from_product(OperatorProduct::from_masks(0, 1 << orbital), crate::algebra::ONE);
    apply_operator(&a, gs).normalized()
}

/// `(t, 2k, ‖[O(t)]_k‖₂)` rows.
pub fn rank_norm_timeline(records: &[StepRecord]) -> Vec<(f64, u32, f64)> {
    records
        .iter()
        .flat_map(|r| r.rank_norms.iter().map(move |(&k, &v)| (r.time, k, v)))
        .collect()
}

/// Maximum and mean absolute deviation between two series on the same grid.
pub fn compare_exact(series: &[Complex64], oracle: &[Complex64]) -> Result<(f64, f64)> {
    if series.len() != oracle.len() {
        return Err(Error::GridMismatch(series.len(), oracle.len()));
    }
    if series.is_empty() {
        return Ok((0.0, 0.0));
    }
    let devs: Vec<f64> = series.iter().zip(oracle).map(|(a, b)| (a - b).norm()).collect();
    let max = devs.iter().copied().fold(0.0, f64::max);
    let mean = devs.iter().sum::<f64>() / devs.len() as f64;
    Ok((max, mean))
}
