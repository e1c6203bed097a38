use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::product::{multiply_products, OperatorProduct};
use crate::error::Result;
use crate::par;

/// Coefficients below this magnitude are removed after arithmetic.
pub const DEFAULT_DROP_TOL: f64 = 1e-14;

pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Finite linear combination of canonical products.
///
/// Terms are kept in a vector sorted strictly ascending by product, so
/// iteration order is deterministic and equal sums compare equal.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OperatorSum {
    terms: Vec<(OperatorProduct, Complex64)>,
}

/// Half the number of elementary operators in a product, stored doubled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rank {
    twice: u32,
}

impl Rank {
    pub fn of(p: OperatorProduct) -> Self {
        Self { twice: p.len() }
    }

    pub fn from_twice(twice: u32) -> Self {
        Self { twice }
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        f64::from(self.twice) / 2.0
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice.is_multiple_of(2) {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl OperatorSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::scalar(ONE)
    }

    pub fn scalar(c: Complex64) -> Self {
        Self::from_product(OperatorProduct::IDENTITY, c)
    }

    pub fn from_product(p: OperatorProduct, c: Complex64) -> Self {
        if c.norm() < DEFAULT_DROP_TOL {
            return Self::zero();
        }
        Self { terms: vec![(p, c)] }
    }

    /// Product given by (ascending) index lists with unit coefficient.
    pub fn product(creators: &[usize], annihilators: &[usize]) -> Result<Self> {
        Ok(Self::from_product(OperatorProduct::new(creators, annihilators)?, ONE))
    }

    /// Canonicalizes an arbitrary list of terms: merges duplicates in input
    /// order and drops coefficients below [`DEFAULT_DROP_TOL`].
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (OperatorProduct, Complex64)>,
    {
        Self::from_terms_with_tol(terms, DEFAULT_DROP_TOL)
    }

    pub fn from_terms_with_tol<I>(terms: I, drop_tol: f64) -> Self
    where
        I: IntoIterator<Item = (OperatorProduct, Complex64)>,
    {
        Self::from_unsorted(terms.into_iter().collect(), drop_tol)
    }

    pub(crate) fn from_unsorted(v: Vec<(OperatorProduct, Complex64)>, drop_tol: f64) -> Self {
        let mut terms = accumulate(v);
        terms.retain(|t| keep(t.1, drop_tol));
        Self { terms }
    }

    /// `base + Σ increments`, where only the increments need sorting.
    pub(crate) fn merge_increments(base: &OperatorSum, inc: Vec<(OperatorProduct, Complex64)>, drop_tol: f64) -> Self {
        let b = accumulate(inc);
        let a = base.terms();
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let (p, c) = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) if x.0 == y.0 => {
                    i += 1;
                    j += 1;
                    (x.0, x.1 + y.1)
                }
                (Some(x), Some(y)) if x.0 < y.0 => {
                    i += 1;
                    *x
                }
                (Some(x), None) => {
                    i += 1;
                    *x
                }
                (_, Some(y)) => {
                    j += 1;
                    *y
                }
                (None, None) => unreachable!(),
            };
            if keep(c, drop_tol) {
                out.push((p, c));
            }
        }
        Self { terms: out }
    }

    /// Wraps terms that are already sorted, unique and above tolerance.
    pub(crate) fn from_sorted_unchecked(terms: Vec<(OperatorProduct, Complex64)>) -> Self {
        debug_assert!(terms.windows(2).all(|w| w[0].0 < w[1].0));
        Self { terms }
    }

    pub fn terms(&self) -> &[(OperatorProduct, Complex64)] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<(OperatorProduct, Complex64)> {
        self.terms
    }

    pub fn iter(&self) -> impl Iterator<Item = &(OperatorProduct, Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, p: &OperatorProduct) -> Complex64 {
        match self.terms.binary_search_by(|t| t.0.cmp(p)) {
            Ok(i) => self.terms[i].1,
            Err(_) => ZERO,
        }
    }

    /// Hermitian conjugate: coefficients conjugated, index lists swapped.
    pub fn adjoint(&self) -> Self {
        let v = self.terms.iter().map(|(p, c)| (p.adjoint(), c.conj())).collect();
        Self::from_unsorted(v, 0.0)
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        if alpha == ZERO {
            return Self::zero();
        }
        let v = self.terms.iter().map(|&(p, c)| (p, alpha * c)).collect();
        Self::from_unsorted(v, DEFAULT_DROP_TOL)
    }

    pub fn scale_real(&self, alpha: f64) -> Self {
        self.scale(Complex64::new(alpha, 0.0))
    }

    /// ℓ₂ norm of the coefficient vector.
    pub fn euclidean_norm(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }

    /// Largest coefficient magnitude of `self - other`.
    pub fn max_abs_diff(&self, other: &OperatorSum) -> f64 {
        let mut i = 0;
        let mut j = 0;
        let (a, b) = (&self.terms, &other.terms);
        let mut worst = 0.0f64;
        while i < a.len() || j < b.len() {
            let d = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) if x.0 == y.0 => {
                    i += 1;
                    j += 1;
                    (x.1 - y.1).norm()
                }
                (Some(x), Some(y)) if x.0 < y.0 => {
                    i += 1;
                    x.1.norm()
                }
                (Some(_), Some(y)) => {
                    j += 1;
                    y.1.norm()
                }
                (Some(x), None) => {
                    i += 1;
                    x.1.norm()
                }
                (None, Some(y)) => {
                    j += 1;
                    y.1.norm()
                }
                (None, None) => unreachable!(),
            };
            worst = worst.max(d);
        }
        worst
    }

    /// `max |c(X) - c(X†)|`, zero for Hermitian sums.
    pub fn hermiticity_residual(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// Largest spinorbital index referenced, if any.
    pub fn max_index(&self) -> Option<usize> {
        self.terms.iter().filter_map(|(p, _)| p.max_index()).max()
    }

    /// Union of all spinorbitals touched.
    pub fn support(&self) -> u64 {
        self.terms.iter().fold(0, |m, (p, _)| m | p.support())
    }

    /// Groups terms by rank `(|creators| + |annihilators|) / 2`.
    pub fn rank_partition(&self) -> BTreeMap<Rank, OperatorSum> {
        let mut groups: BTreeMap<Rank, Vec<(OperatorProduct, Complex64)>> = BTreeMap::new();
        for &(p, c) in &self.terms {
            groups.entry(Rank::of(p)).or_default().push((p, c));
        }
        groups
            .into_iter()
            .map(|(r, v)| (r, OperatorSum::from_sorted_unchecked(v)))
            .collect()
    }

    /// Removes coefficients with magnitude below `tol`; returns the pruned sum
    /// and the total squared magnitude removed.
    pub fn truncate(&self, tol: f64) -> (Self, f64) {
        if tol <= 0.0 {
            return (self.clone(), 0.0);
        }
        let mut dropped = 0.0;
        let mut kept = Vec::with_capacity(self.terms.len());
        for &(p, c) in &self.terms {
            if c.norm() < tol {
                dropped += c.norm_sqr();
            } else {
                kept.push((p, c));
            }
        }
        (Self { terms: kept }, dropped)
    }

    /// True when every term has as many creators as annihilators.
    pub fn is_particle_conserving(&self) -> bool {
        self.terms.iter().all(|(p, _)| p.is_particle_conserving())
    }
}

#[inline]
/// Sums duplicate keys in input order and sorts the result.
fn accumulate(v: Vec<(OperatorProduct, Complex64)>) -> Vec<(OperatorProduct, Complex64)> {
    let mut acc: HashMap<OperatorProduct, Complex64> = HashMap::with_capacity(v.len());
    for (p, c) in v {
        *acc.entry(p).or_default() += c;
    }
    let mut out: Vec<(OperatorProduct, Complex64)> = acc.into_iter().collect();
    par::sort_unstable_by_key(&mut out, |t| t.0);
    out
}

fn keep(c: Complex64, tol: f64) -> bool {
    (c.re != 0.0 || c.im != 0.0) && c.norm() >= tol
}

/// Exact product `x · y`, normal-ordered.
pub fn multiply(x: &OperatorSum, y: &OperatorSum) -> OperatorSum {
    let yt = y.terms();
    let raw = par::flat_map(x.terms(), |&(p, a), buf| {
        for &(q, b) in yt {
            let ab = a * b;
            multiply_products(p, q, |r, s| buf.push((r, ab * s)));
        }
    });
    OperatorSum::from_unsorted(raw, DEFAULT_DROP_TOL)
}

/// `[x, y] = xy - yx`.
pub fn commutator(x: &OperatorSum, y: &OperatorSum) -> OperatorSum {
    let xt = x.terms();
    let yt = y.terms();
    let raw = par::flat_map(xt, |&(p, a), buf| {
        for &(q, b) in yt {
            let ab = a * b;
            multiply_products(p, q, |r, s| buf.push((r, ab * s)));
            multiply_products(q, p, |r, s| buf.push((r, -ab * s)));
        }
    });
    OperatorSum::from_unsorted(raw, DEFAULT_DROP_TOL)
}

/// `y + alpha · x`.
pub fn axpy(alpha: Complex64, x: &OperatorSum, y: &OperatorSum) -> OperatorSum {
    let mut v = Vec::with_capacity(x.len() + y.len());
    v.extend_from_slice(y.terms());
    if alpha != ZERO {
        v.extend(x.terms().iter().map(|&(p, c)| (p, alpha * c)));
    }
    OperatorSum::from_unsorted(v, DEFAULT_DROP_TOL)
}

impl Add for &OperatorSum {
    type Output = OperatorSum;
    fn add(self, rhs: &OperatorSum) -> OperatorSum {
        axpy(ONE, rhs, self)
    }
}

impl Sub for &OperatorSum {
    type Output = OperatorSum;
    fn sub(self, rhs: &OperatorSum) -> OperatorSum {
        axpy(-ONE, rhs, self)
    }
}

impl Neg for &OperatorSum {
    type Output = OperatorSum;
    fn neg(self) -> OperatorSum {
        self.scale(-ONE)
    }
}

impl Mul for &OperatorSum {
    type Output = OperatorSum;
    fn mul(self, rhs: &OperatorSum) -> OperatorSum {
        multiply(self, rhs)
    }
}

impl Mul<&OperatorSum> for Complex64 {
    type Output = OperatorSum;
    fn mul(self, rhs: &OperatorSum) -> OperatorSum {
        rhs.scale(self)
    }
}

impl fmt::Display for OperatorSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (p, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if c.im == 0.0 {
                write!(f, "({}) {}", c.re, p)?;
            } else {
                write!(f, "({}{:+}i) {}", c.re, c.im, p)?;
            }
        }
        Ok(())
    }
}

/// One serialized term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub creators: Vec<usize>,
    pub annihilators: Vec<usize>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl OperatorSum {
    pub fn to_records(&self) -> Vec<TermRecord> {
        self.terms
            .iter()
            .map(|(p, c)| TermRecord {
                creators: p.creators(),
                annihilators: p.annihilators(),
                re: c.re,
                im: c.im,
            })
            .collect()
    }

    /// Accepts index lists in any order (permutation signs applied).
    pub fn from_records(records: &[TermRecord]) -> Result<Self> {
        let mut v = Vec::with_capacity(records.len());
        for r in records {
            if let Some((p, s)) = OperatorProduct::from_indices(&r.creators, &r.annihilators)? {
                v.push((p, Complex64::new(r.re, r.im) * s));
            }
        }
        Ok(Self::from_unsorted(v, DEFAULT_DROP_TOL))
    }
}

impl Serialize for OperatorSum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_records().serialize(s)
    }
}

impl<'de> Deserialize<'de> for OperatorSum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let records = Vec::<TermRecord>::deserialize(d)?;
        OperatorSum::from_records(&records).map_err(serde::de::Error::custom)
    }
}
