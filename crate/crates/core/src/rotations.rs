//! Closed-form fermionic rotations generated by a single product.
//!
//! For a product `T` the generator is either `A = T - T†` (anti-Hermitian,
//! conjugation `e^{-θA} O e^{θA}`) or `H = T + T†` (Hermitian, conjugation
//! `e^{iθH} O e^{-iθH}`). Since `A³ = -A` and `H³ = H`, the commutator series
//! closes after the double commutator; the middle product `G [O,G] G` fixes
//! which of the two closed forms applies.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::algebra::{multiply, multiply_products, OperatorProduct, OperatorSum, DEFAULT_DROP_TOL, ONE};
use crate::error::{Error, Result};
use crate::par;

/// Tolerance separating `G[O,G]G = ±[O,G]` from `G[O,G]G = 0`.
pub const CLASSIFY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationKind {
    AntiHermitian,
    Hermitian,
}

impl RotationKind {
    fn name(self) -> &'static str {
        match self {
            RotationKind::AntiHermitian => "anti-Hermitian",
            RotationKind::Hermitian => "Hermitian",
        }
    }
}

/// A single-product rotation. The product carries no coefficient; callers
/// fold any scalar prefactor into `theta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Generator {
    pub product: OperatorProduct,
    pub kind: RotationKind,
    pub theta: f64,
}

impl Generator {
    pub fn anti_hermitian(product: OperatorProduct, theta: f64) -> Self {
        Self { product, kind: RotationKind::AntiHermitian, theta }
    }

    pub fn hermitian(product: OperatorProduct, theta: f64) -> Self {
        Self { product, kind: RotationKind::Hermitian, theta }
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Self { theta, ..self }
    }

    /// Terms of `A = T - T†` or `H = T + T†` with real coefficients.
    fn terms(&self) -> SmallVec<[(OperatorProduct, f64); 2]> {
        let t = self.product;
        let mut v = SmallVec::new();
        match (self.kind, t.is_number_product()) {
            (RotationKind::AntiHermitian, true) => {}
            (RotationKind::AntiHermitian, false) => {
                v.push((t, 1.0));
                v.push((t.adjoint(), -1.0));
            }
            (RotationKind::Hermitian, true) => v.push((t, 2.0)),
            (RotationKind::Hermitian, false) => {
                v.push((t, 1.0));
                v.push((t.adjoint(), 1.0));
            }
        }
        v
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} (θ = {})", self.kind.name(), self.product, self.theta)
    }
}

/// Which closed form a product falls under for a given generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationClass {
    /// `[O, G] = 0`; the rotation leaves `O` unchanged.
    Trivial,
    /// Middle product vanishes (α or β equal to 1).
    Class1,
    /// Middle product reproduces `+[O,A]` or `-[O,H]` (α or β equal to 4).
    Class4,
}

impl RotationClass {
    /// The recursion constant α (anti-Hermitian) or β (Hermitian).
    pub fn alpha(self) -> Option<f64> {
        match self {
            RotationClass::Trivial => None,
            RotationClass::Class1 => Some(1.0),
            RotationClass::Class4 => Some(4.0),
        }
    }
}

impl fmt::Display for RotationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RotationClass::Trivial => "trivial",
            RotationClass::Class1 => "1",
            RotationClass::Class4 => "4",
        })
    }
}

/// `A = T - T†` or `H = T + T†` as an operator sum (θ not included).
pub fn build_generator_sum(g: &Generator) -> OperatorSum {
    OperatorSum::from_terms(g.terms().into_iter().map(|(p, c)| (p, Complex64::new(c, 0.0))))
}

// ---------------------------------------------------------------------------
// Small fixed-capacity accumulators for per-term work.
// ---------------------------------------------------------------------------

type Local = SmallVec<[(OperatorProduct, Complex64); 8]>;

#[inline]
fn local_add(acc: &mut Local, p: OperatorProduct, c: Complex64) {
    if let Some(slot) = acc.iter_mut().find(|t| t.0 == p) {
        slot.1 += c;
    } else {
        acc.push((p, c));
    }
}

fn local_prune(acc: &mut Local) {
    acc.retain(|t| t.1.norm() >= DEFAULT_DROP_TOL);
}

/// `[X, G]` for a small sum `X`.
fn local_commutator(x: &[(OperatorProduct, Complex64)], gen: &[(OperatorProduct, f64)]) -> Local {
    let mut out = Local::new();
    for &(p, c) in x {
        for &(q, gq) in gen {
            let cg = c * gq;
            multiply_products(p, q, |r, s| local_add(&mut out, r, cg * s));
            multiply_products(q, p, |r, s| local_add(&mut out, r, -cg * s));
        }
    }
    local_prune(&mut out);
    out
}

/// `G X G` for a small sum `X`.
fn local_sandwich(x: &[(OperatorProduct, Complex64)], gen: &[(OperatorProduct, f64)]) -> Local {
    let mut left = Local::new();
    for &(q, gq) in gen {
        for &(p, c) in x {
            let cg = c * gq;
            multiply_products(q, p, |r, s| local_add(&mut left, r, cg * s));
        }
    }
    let mut out = Local::new();
    for &(p, c) in &left {
        for &(q, gq) in gen {
            let cg = c * gq;
            multiply_products(p, q, |r, s| local_add(&mut out, r, cg * s));
        }
    }
    local_prune(&mut out);
    out
}

fn local_max_diff(x: &[(OperatorProduct, Complex64)], y: &[(OperatorProduct, Complex64)], sign: f64) -> f64 {
    let mut worst = 0.0f64;
    for &(p, c) in x {
        let other = y.iter().find(|t| t.0 == p).map_or(Complex64::new(0.0, 0.0), |t| t.1);
        worst = worst.max((c - other * sign).norm());
    }
    for &(p, c) in y {
        if !x.iter().any(|t| t.0 == p) {
            worst = worst.max(c.norm());
        }
    }
    worst
}

fn local_max_abs(x: &[(OperatorProduct, Complex64)]) -> f64 {
    x.iter().map(|t| t.1.norm()).fold(0.0, f64::max)
}

/// The pieces of a closed-form rotation of one product.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationAnalysis {
    pub class: RotationClass,
    /// `[O, G]`
    pub commutator: OperatorSum,
    /// `[[O, G], G]`
    pub double_commutator: OperatorSum,
}

struct LocalAnalysis {
    class: RotationClass,
    c: Local,
    d: Local,
}

#[inline]
fn is_odd(p: OperatorProduct) -> bool {
    p.len() % 2 == 1
}

/// Sufficient conditions for `[O, T] = [O, T†] = 0` read off site by site.
///
/// Number factors of `T` commute with `1` and `n` factors of `O`. When `O`
/// carries `n` on a creator site and on an annihilator site of `T`, all of
/// `TO`, `OT`, `T†O` and `OT†` vanish (`a† n = n a = 0`).
#[inline]
fn commutes_by_sites(o: OperatorProduct, t: OperatorProduct) -> bool {
    let (tc, ta) = (t.creator_mask(), t.annihilator_mask());
    let (oc, oa) = (o.creator_mask(), o.annihilator_mask());
    let o_num = oc & oa;
    let o_odd = oc ^ oa;
    let t_num = tc & ta;
    let (t_cre, t_ann) = (tc & !ta, ta & !tc);
    if t_cre == 0 && t_ann == 0 {
        return o_odd & t_num == 0;
    }
    t_cre & o_num != 0 && t_ann & o_num != 0
}

fn analyze_local(o: OperatorProduct, g: &Generator) -> Result<LocalAnalysis> {
    let trivial = || LocalAnalysis { class: RotationClass::Trivial, c: Local::new(), d: Local::new() };
    let t = g.product;
    if g.kind == RotationKind::AntiHermitian && t.is_number_product() {
        return Ok(trivial());
    }
    // disjoint supports: O and T commute unless both are odd
    if o.support() & t.support() == 0 && !(is_odd(o) && is_odd(t)) {
        return Ok(trivial());
    }
    if commutes_by_sites(o, t) {
        return Ok(trivial());
    }
    let gen = g.terms();
    let c = local_commutator(&[(o, ONE)], &gen);
    if c.is_empty() {
        return Ok(trivial());
    }
    let d = local_commutator(&c, &gen);
    if g.kind == RotationKind::Hermitian && t.is_number_product() {
        return Ok(LocalAnalysis { class: RotationClass::Class4, c, d });
    }
    let m = local_sandwich(&c, &gen);
    let sign = match g.kind {
        RotationKind::AntiHermitian => 1.0,
        RotationKind::Hermitian => -1.0,
    };
    let to_commutator = local_max_diff(&m, &c, sign);
    let to_zero = local_max_abs(&m);
    let class = if to_commutator <= CLASSIFY_TOL {
        RotationClass::Class4
    } else if to_zero <= CLASSIFY_TOL {
        RotationClass::Class1
    } else {
        return Err(Error::StructuralViolation {
            operator: o.to_string(),
            generator: g.to_string(),
            to_commutator,
            to_zero,
        });
    };
    Ok(LocalAnalysis { class, c, d })
}

fn to_sum(x: Local) -> OperatorSum {
    OperatorSum::from_terms(x)
}

/// Classifies `o` under `g` by direct evaluation of `G [O,G] G`.
pub fn classify(o: OperatorProduct, g: &Generator) -> Result<RotationClass> {
    Ok(analyze_local(o, g)?.class)
}

/// Class plus single and double commutators.
pub fn analyze(o: OperatorProduct, g: &Generator) -> Result<RotationAnalysis> {
    let a = analyze_local(o, g)?;
    Ok(RotationAnalysis { class: a.class, commutator: to_sum(a.c), double_commutator: to_sum(a.d) })
}

/// `G [O,G] G` for a single product, computed with full sums.
pub fn middle_product(o: OperatorProduct, g: &Generator) -> OperatorSum {
    let gs = build_generator_sum(g);
    let os = OperatorSum::from_product(o, ONE);
    let c = crate::algebra::commutator(&os, &gs);
    multiply(&multiply(&gs, &c), &gs)
}

/// Scalar prefactors `(f, g)` of `[O,G]` and `[[O,G],G]` in the closed form.
pub fn closed_form_coefficients(kind: RotationKind, class: RotationClass, theta: f64) -> (Complex64, f64) {
    let half = (0.5 * theta).sin();
    match (kind, class) {
        (_, RotationClass::Trivial) => (Complex64::new(0.0, 0.0), 0.0),
        // sin θ, 1 - cos θ
        (RotationKind::AntiHermitian, RotationClass::Class1) => (Complex64::new(theta.sin(), 0.0), 2.0 * half * half),
        // sin(2θ)/2, sin²θ/2
        (RotationKind::AntiHermitian, RotationClass::Class4) => {
            let s = theta.sin();
            (Complex64::new(0.5 * (2.0 * theta).sin(), 0.0), 0.5 * s * s)
        }
        // -i sin θ, cos θ - 1
        (RotationKind::Hermitian, RotationClass::Class1) => (Complex64::new(0.0, -theta.sin()), -2.0 * half * half),
        // -(i/2) sin(2θ), -sin²θ/2
        (RotationKind::Hermitian, RotationClass::Class4) => {
            let s = theta.sin();
            (Complex64::new(0.0, -0.5 * (2.0 * theta).sin()), -0.5 * s * s)
        }
    }
}

/// Exact conjugation of a single product.
pub fn rotate_product(o: OperatorProduct, g: &Generator) -> Result<OperatorSum> {
    let mut buf = vec![(o, ONE)];
    push_rotated(o, ONE, g, &mut buf)?;
    Ok(OperatorSum::from_terms(buf))
}

#[inline]
/// Pushes the commutator terms of the rotated `coeff·o` (not `o` itself).
fn push_rotated(o: OperatorProduct, coeff: Complex64, g: &Generator, buf: &mut Vec<(OperatorProduct, Complex64)>) -> Result<()> {
    let a = analyze_local(o, g)?;
    if a.class == RotationClass::Trivial {
        return Ok(());
    }
    let (f, h) = closed_form_coefficients(g.kind, a.class, g.theta);
    let fc = f * coeff;
    let hc = coeff * h;
    for (p, c) in a.c {
        buf.push((p, fc * c));
    }
    for (p, c) in a.d {
        buf.push((p, hc * c));
    }
    Ok(())
}

/// Term-wise exact conjugation of a sum.
pub fn rotate_sum(x: &OperatorSum, g: &Generator) -> Result<OperatorSum> {
    rotate_sum_with_tol(x, g, DEFAULT_DROP_TOL)
}

pub fn rotate_sum_with_tol(x: &OperatorSum, g: &Generator, drop_tol: f64) -> Result<OperatorSum> {
    if g.kind == RotationKind::AntiHermitian && g.product.is_number_product() {
        return Ok(x.clone());
    }
    let increments = par::try_flat_map(x.terms(), |&(p, c), buf| push_rotated(p, c, g, buf))?;
    Ok(OperatorSum::merge_increments(x, increments, drop_tol))
}

/// Commutator pieces of a term-wise rotation grouped by closed-form class.
///
/// Index 0 collects class-1 terms, index 1 class-4 terms. The rotated sum is
/// `x + Σ_k f_k(θ) commutator[k] + g_k(θ) double_commutator[k]` with
/// `(f_k, g_k)` from [`closed_form_coefficients`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClassSplit {
    pub commutator: [OperatorSum; 2],
    pub double_commutator: [OperatorSum; 2],
}

pub fn split_by_class(x: &OperatorSum, g: &Generator) -> Result<ClassSplit> {
    if g.kind == RotationKind::AntiHermitian && g.product.is_number_product() {
        return Ok(ClassSplit::default());
    }
    let raw = par::try_flat_map(x.terms(), |&(p, c), buf: &mut Vec<(u8, OperatorProduct, Complex64)>| {
        let a = analyze_local(p, g)?;
        let k = match a.class {
            RotationClass::Trivial => return Ok(()),
            RotationClass::Class1 => 0,
            RotationClass::Class4 => 2,
        };
        buf.extend(a.c.into_iter().map(|(q, v)| (k, q, v * c)));
        buf.extend(a.d.into_iter().map(|(q, v)| (k + 1, q, v * c)));
        Ok::<(), Error>(())
    })?;
    let mut parts: [Vec<(OperatorProduct, Complex64)>; 4] = Default::default();
    for (k, q, v) in raw {
        parts[k as usize].push((q, v));
    }
    let [c1, d1, c4, d4] = parts.map(|v| OperatorSum::from_unsorted(v, DEFAULT_DROP_TOL));
    Ok(ClassSplit { commutator: [c1, c4], double_commutator: [d1, d4] })
}

/// Term-wise classes, in term order.
pub fn classify_sum(x: &OperatorSum, g: &Generator) -> Result<Vec<RotationClass>> {
    x.terms().iter().map(|&(p, _)| classify(p, g)).collect()
}

/// θ-derivative of [`rotate_product`] (anti-Hermitian generators only).
pub fn flow_derivative(o: OperatorProduct, g: &Generator) -> Result<OperatorSum> {
    if g.kind != RotationKind::AntiHermitian {
        return Err(Error::UnsupportedKind { op: "flow_derivative", kind: g.kind.name() });
    }
    let a = analyze_local(o, g)?;
    let Some(alpha) = a.class.alpha() else {
        return Ok(OperatorSum::zero());
    };
    let s = alpha.sqrt();
    let fc = Complex64::new((s * g.theta).cos(), 0.0);
    let fd = Complex64::new((s * g.theta).sin() / s, 0.0);
    let terms = a.c.into_iter().map(|(p, c)| (p, fc * c)).chain(a.d.into_iter().map(|(p, c)| (p, fd * c)));
    Ok(OperatorSum::from_terms(terms))
}

/// `exp(θA) = 1 + sin θ A + (1 - cos θ) A²` (anti-Hermitian generators only).
pub fn exp_generator(g: &Generator) -> Result<OperatorSum> {
    if g.kind != RotationKind::AntiHermitian {
        return Err(Error::UnsupportedKind { op: "exp_generator", kind: g.kind.name() });
    }
    let a = build_generator_sum(g);
    let a2 = multiply(&a, &a);
    let half = (0.5 * g.theta).sin();
    let mut out = crate::algebra::axpy(Complex64::new(g.theta.sin(), 0.0), &a, &OperatorSum::identity());
    out = crate::algebra::axpy(Complex64::new(2.0 * half * half, 0.0), &a2, &out);
    Ok(out)
}
