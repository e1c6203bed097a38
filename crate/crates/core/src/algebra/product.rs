//! Canonical normal-ordered operator products.
//!
//! A product `a^{p1 p2 ...}_{q1 q2 ...}` is stored as two bitmasks over the
//! spinorbital index. The physical string is
//! `a†_{p1} a†_{p2} ··· a_{q2} a_{q1}` with both index lists ascending, so
//! the adjoint is a plain swap of the two masks.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported spinorbital index plus one.
pub const MAX_ORBITALS: usize = 64;

/// Spinorbital label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrbitalIndex(pub usize);

impl OrbitalIndex {
    pub fn new(value: usize) -> Result<Self> {
        if value >= MAX_ORBITALS {
            return Err(Error::IndexOutOfRange { index: value, limit: MAX_ORBITALS });
        }
        Ok(Self(value))
    }

    #[inline]
    pub fn bit(self) -> u64 {
        1u64 << self.0
    }
}

impl From<OrbitalIndex> for usize {
    fn from(i: OrbitalIndex) -> usize {
        i.0
    }
}

/// A normal-ordered product of creation and annihilation operators.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct OperatorProduct {
    cre: u64,
    ann: u64,
}

impl OperatorProduct {
    pub const IDENTITY: OperatorProduct = OperatorProduct { cre: 0, ann: 0 };

    /// Builds a product from raw masks. Every bit pattern is a valid product.
    #[inline]
    pub const fn from_masks(creators: u64, annihilators: u64) -> Self {
        Self { cre: creators, ann: annihilators }
    }

    /// Builds a product from index lists.
    ///
    /// Lists may come in any order; they are sorted into canonical form and the
    /// permutation sign is returned alongside. A repeated index inside one list
    /// makes the product vanish and yields `Ok(None)`.
    pub fn from_indices(creators: &[usize], annihilators: &[usize]) -> Result<Option<(Self, f64)>> {
        let (cre, s1) = match sort_with_sign(creators)? {
            Some(v) => v,
            None => return Ok(None),
        };
        let (ann, s2) = match sort_with_sign(annihilators)? {
            Some(v) => v,
            None => return Ok(None),
        };
        Ok(Some((Self { cre, ann }, s1 * s2)))
    }

    /// Builds a product from strictly ascending index lists; errors otherwise.
    pub fn new(creators: &[usize], annihilators: &[usize]) -> Result<Self> {
        let cre = ascending_mask(creators)?;
        let ann = ascending_mask(annihilators)?;
        Ok(Self { cre, ann })
    }

    /// Number operator `n_p`.
    pub fn number(p: usize) -> Self {
        Self { cre: 1 << p, ann: 1 << p }
    }

    /// `a^p_q = a†_p a_q`.
    pub fn excitation(p: usize, q: usize) -> Self {
        Self { cre: 1 << p, ann: 1 << q }
    }

    #[inline]
    pub const fn creator_mask(self) -> u64 {
        self.cre
    }

    #[inline]
    pub const fn annihilator_mask(self) -> u64 {
        self.ann
    }

    pub fn creators(self) -> Vec<usize> {
        mask_indices(self.cre)
    }

    pub fn annihilators(self) -> Vec<usize> {
        mask_indices(self.ann)
    }

    #[inline]
    pub fn n_creators(self) -> u32 {
        self.cre.count_ones()
    }

    #[inline]
    pub fn n_annihilators(self) -> u32 {
        self.ann.count_ones()
    }

    /// Total number of elementary operators (twice the rank).
    #[inline]
    pub fn len(self) -> u32 {
        self.n_creators() + self.n_annihilators()
    }

    /// True for the identity (no operators).
    #[inline]
    pub fn is_empty(self) -> bool {
        self.is_identity()
    }

    #[inline]
    pub fn is_identity(self) -> bool {
        self.cre == 0 && self.ann == 0
    }

    /// True when the product is a string of number operators only.
    #[inline]
    pub fn is_number_product(self) -> bool {
        self.cre == self.ann
    }

    /// Equal creator and annihilator counts.
    #[inline]
    pub fn is_particle_conserving(self) -> bool {
        self.n_creators() == self.n_annihilators()
    }

    #[inline]
    pub fn adjoint(self) -> Self {
        Self { cre: self.ann, ann: self.cre }
    }

    /// Every spinorbital touched by the product.
    #[inline]
    pub fn support(self) -> u64 {
        self.cre | self.ann
    }

    pub fn max_index(self) -> Option<usize> {
        let s = self.support();
        (s != 0).then(|| 63 - s.leading_zeros() as usize)
    }

    /// Number-operator part `n_{r1} n_{r2} ...` (indices present in both lists).
    #[inline]
    pub fn number_part(self) -> u64 {
        self.cre & self.ann
    }

    /// Sort key: length, creator count, then both index lists lexicographically.
    #[inline]
    fn order_key(self) -> (u32, u32, u64, u64) {
        (
            self.len(),
            self.n_creators(),
            !self.cre.reverse_bits(),
            !self.ann.reverse_bits(),
        )
    }
}

impl Ord for OperatorProduct {
    #[inline]
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

impl PartialOrd for OperatorProduct {
    #[inline]
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for OperatorProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Serialize, Deserialize)]
struct ProductRecord {
    creators: Vec<usize>,
    annihilators: Vec<usize>,
}

impl Serialize for OperatorProduct {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ProductRecord { creators: self.creators(), annihilators: self.annihilators() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for OperatorProduct {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ProductRecord::deserialize(d)?;
        OperatorProduct::new(&r.creators, &r.annihilators).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for OperatorProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "1");
        }
        let join = |m: u64| {
            mask_indices(m)
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "a^{{{}}}_{{{}}}", join(self.cre), join(self.ann))
    }
}

pub(crate) fn mask_indices(mut m: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(m.count_ones() as usize);
    while m != 0 {
        out.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    out
}

fn ascending_mask(indices: &[usize]) -> Result<u64> {
    let mut mask = 0u64;
    let mut prev: Option<usize> = None;
    for &i in indices {
        OrbitalIndex::new(i)?;
        if let Some(p) = prev {
            if i <= p {
                return Err(Error::NotAscending(indices.to_vec()));
            }
        }
        mask |= 1 << i;
        prev = Some(i);
    }
    Ok(mask)
}

fn sort_with_sign(indices: &[usize]) -> Result<Option<(u64, f64)>> {
    let mut mask = 0u64;
    let mut inversions = 0u32;
    for &i in indices {
        OrbitalIndex::new(i)?;
        if mask & (1 << i) != 0 {
            return Ok(None);
        }
        // earlier entries larger than i must be swapped past it
        inversions += (mask >> i).count_ones();
        mask |= 1 << i;
    }
    let sign = if inversions.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(Some((mask, sign)))
}

// ---------------------------------------------------------------------------
// Product of two canonical products.
//
// Both factors are rewritten in site order, `∏_p X_p` with `X_p` one of
// {1, a†_p, a_p, n_p}. Merging two site-ordered strings only costs the sign of
// moving odd site factors past each other; the single-site products are then
// closed except for `a_p a†_p = 1 - n_p`, which branches.
// ---------------------------------------------------------------------------

/// Bit `p` = parity of the bits of `x` strictly below `p`.
#[inline]
pub(crate) fn parity_below(mut x: u64) -> u64 {
    x ^= x << 1;
    x ^= x << 2;
    x ^= x << 4;
    x ^= x << 8;
    x ^= x << 16;
    x ^= x << 32;
    x << 1
}

/// Bit `p` = parity of the bits of `x` strictly above `p`.
#[inline]
fn parity_above(mut x: u64) -> u64 {
    x ^= x >> 1;
    x ^= x >> 2;
    x ^= x >> 4;
    x ^= x >> 8;
    x ^= x >> 16;
    x ^= x >> 32;
    x >> 1
}

/// Sign relating the normal-ordered string to the site-ordered string,
/// `a†(asc) a(desc) = σ · ∏_p X_p`. Returned as a parity bit (1 = negative).
#[inline]
fn site_order_parity(cre: u64, ann: u64) -> u32 {
    let m = ann.count_ones();
    let reverse = (m * m.saturating_sub(1) / 2) & 1;
    let interleave = (cre & parity_below(ann)).count_ones() & 1;
    reverse ^ interleave
}

/// Calls `emit(product, sign)` for each term of `x · y`. At most
/// `2^k` terms are produced where `k` counts sites with `a_p` in `x` meeting
/// `a†_p` in `y`.
#[inline]
pub fn multiply_products(x: OperatorProduct, y: OperatorProduct, mut emit: impl FnMut(OperatorProduct, f64)) {
    let (c1, a1, c2, a2) = (x.cre, x.ann, y.cre, y.ann);
    let xn = c1 & a1;
    let xc = c1 & !a1;
    let xa = a1 & !c1;
    let yn = c2 & a2;
    let yc = c2 & !a2;
    let ya = a2 & !c2;

    // a† a† , a† n , a a , n a vanish
    if (xc & (yc | yn)) != 0 || ((xa | xn) & ya) != 0 {
        return;
    }

    let xid = !(c1 | a1);
    let yid = !(c2 | a2);

    let res_n = (xc & ya) | (xn & yn) | (xn & yid) | (xid & yn);
    let res_c = (xc & yid) | (xid & yc) | (xn & yc);
    let res_a = (xa & yid) | (xid & ya) | (xa & yn);
    let branch = xa & yc;

    let base_cre = res_c | res_n;
    let base_ann = res_a | res_n;

    let odd_x = c1 ^ a1;
    let odd_y = c2 ^ a2;
    let merge = (odd_y & parity_above(odd_x)).count_ones() & 1;
    let parity0 = site_order_parity(c1, a1) ^ site_order_parity(c2, a2) ^ merge;

    // enumerate subsets of the branching sites; chosen sites become -n_p
    let mut sub = branch;
    loop {
        let cre = base_cre | sub;
        let ann = base_ann | sub;
        let parity = parity0 ^ (sub.count_ones() & 1) ^ site_order_parity(cre, ann);
        let sign = if parity == 0 { 1.0 } else { -1.0 };
        emit(OperatorProduct { cre, ann }, sign);
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & branch;
    }
}
