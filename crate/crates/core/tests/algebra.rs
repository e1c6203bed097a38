mod common;

use common::*;
use proptest::prelude::*;

use fermirot::algebra::{commutator, multiply, normal_order, ElementaryOperator, ONE};
use fermirot::{OperatorProduct, OperatorSum};

/// Physical operator string of a product: creators ascending, then
/// annihilators descending.
fn elementary(p: OperatorProduct) -> Vec<ElementaryOperator> {
    let mut v: Vec<ElementaryOperator> = p.creators().into_iter().map(ElementaryOperator::cre).collect();
    v.extend(p.annihilators().into_iter().rev().map(ElementaryOperator::ann));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn product_kernel_matches_normal_ordering(p in product(5), q in product(5)) {
        let fast = multiply(&OperatorSum::from_product(p, ONE), &OperatorSum::from_product(q, ONE));
        let mut raw = elementary(p);
        raw.extend(elementary(q));
        let slow = normal_order(&raw, ONE).unwrap();
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn dense_representation_is_faithful(x in sum(4, 4), y in sum(4, 4)) {
        let (mx, my) = (dense(&x, 4), dense(&y, 4));
        prop_assert!(frobenius(&(dense(&multiply(&x, &y), 4) - &mx * &my)) < 1e-12);
        prop_assert!(frobenius(&(dense(&x.adjoint(), 4) - mx.adjoint())) < 1e-15);
        prop_assert!(frobenius(&(dense(&(&x + &y), 4) - (&mx + &my))) < 1e-15);
    }

    #[test]
    fn multiplication_is_associative(x in sum(4, 3), y in sum(4, 3), z in sum(4, 3)) {
        let left = multiply(&multiply(&x, &y), &z);
        let right = multiply(&x, &multiply(&y, &z));
        prop_assert!(left.max_abs_diff(&right) < 1e-12);
    }

    #[test]
    fn commutator_is_antisymmetric(x in sum(5, 4), y in sum(5, 4)) {
        let a = commutator(&x, &y);
        let b = commutator(&y, &x);
        prop_assert!((&a + &b).max_abs() < 1e-14);
    }

    #[test]
    fn adjoint_reverses_products(x in sum(5, 3), y in sum(5, 3)) {
        let lhs = multiply(&x, &y).adjoint();
        let rhs = multiply(&y.adjoint(), &x.adjoint());
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }

    #[test]
    fn canonical_form_ignores_insertion_order(terms in prop::collection::vec((product(6), coefficient()), 1..8)) {
        let forward = OperatorSum::from_terms(terms.clone());
        let backward = OperatorSum::from_terms(terms.into_iter().rev());
        prop_assert!(forward.max_abs_diff(&backward) < 1e-15);
        prop_assert!(forward.terms().windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn json_round_trip(x in sum(8, 6)) {
        let text = serde_json::to_string(&x).unwrap();
        let back: OperatorSum = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn from_indices_agrees_with_normal_ordering(
        cre in prop::collection::vec(0usize..6, 0..4),
        ann in prop::collection::vec(0usize..6, 0..4),
    ) {
        // a†_{c1}…a†_{ck} a_{ql}…a_{q1}, annihilators listed as q1..ql
        let mut raw: Vec<ElementaryOperator> = cre.iter().map(|&p| ElementaryOperator::cre(p)).collect();
        raw.extend(ann.iter().rev().map(|&q| ElementaryOperator::ann(q)));
        let oracle = normal_order(&raw, ONE).unwrap();
        match OperatorProduct::from_indices(&cre, &ann).unwrap() {
            None => prop_assert!(oracle.is_empty()),
            Some((p, sign)) => prop_assert_eq!(oracle, OperatorSum::from_product(p, ONE.scale(sign))),
        }
    }
}

#[test]
fn anticommutation_relations() {
    for p in 0..4 {
        for q in 0..4 {
            let cp = OperatorSum::from_product(OperatorProduct::new(&[p], &[]).unwrap(), ONE);
            let aq = OperatorSum::from_product(OperatorProduct::new(&[], &[q]).unwrap(), ONE);
            let anti = &multiply(&cp, &aq) + &multiply(&aq, &cp);
            let expect = if p == q { OperatorSum::identity() } else { OperatorSum::zero() };
            assert_eq!(anti, expect);
            let cc = &multiply(&cp, &cp) + &multiply(&cp, &cp);
            assert!(cc.is_empty());
        }
    }
}
