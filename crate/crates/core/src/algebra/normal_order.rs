//! Normal ordering of raw operator strings over the physical vacuum.
//!
//! Works directly on the operator sequence by adjacent transpositions, using
//! `{a_p, a†_q} = δ_pq` whenever an annihilator passes a creator of the same
//! index. This path shares nothing with the bitmask product kernel and is
//! used to cross-check it.

use num_complex::Complex64;

use super::product::{OperatorProduct, OrbitalIndex};
use super::sum::{OperatorSum, DEFAULT_DROP_TOL};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Create,
    Annihilate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ElementaryOperator {
    pub index: usize,
    pub action: Action,
}

impl ElementaryOperator {
    pub fn cre(index: usize) -> Self {
        Self { index, action: Action::Create }
    }

    pub fn ann(index: usize) -> Self {
        Self { index, action: Action::Annihilate }
    }

    /// Target order: creators ascending, then annihilators descending.
    fn key(self) -> (u8, i64) {
        match self.action {
            Action::Create => (0, self.index as i64),
            Action::Annihilate => (1, -(self.index as i64)),
        }
    }
}

/// Expands `coeff · raw[0] raw[1] ···` into canonical normal-ordered form.
pub fn normal_order(raw: &[ElementaryOperator], coeff: Complex64) -> Result<OperatorSum> {
    for op in raw {
        OrbitalIndex::new(op.index)?;
    }
    let mut out = Vec::new();
    let mut work: Vec<(Vec<ElementaryOperator>, Complex64)> = vec![(raw.to_vec(), coeff)];
    while let Some((seq, c)) = work.pop() {
        let disorder = seq.windows(2).position(|w| w[0].key() >= w[1].key());
        match disorder {
            None => {
                let mut cre = 0u64;
                let mut ann = 0u64;
                for op in &seq {
                    match op.action {
                        Action::Create => cre |= 1 << op.index,
                        Action::Annihilate => ann |= 1 << op.index,
                    }
                }
                out.push((OperatorProduct::from_masks(cre, ann), c));
            }
            Some(i) => {
                let (x, y) = (seq[i], seq[i + 1]);
                if x == y {
                    // (a†_p)^2 = (a_p)^2 = 0
                    continue;
                }
                if x.action == Action::Annihilate && y.action == Action::Create && x.index == y.index {
                    let mut contracted = seq.clone();
                    contracted.drain(i..i + 2);
                    work.push((contracted, c));
                }
                let mut swapped = seq;
                swapped.swap(i, i + 1);
                work.push((swapped, -c));
            }
        }
    }
    Ok(OperatorSum::from_terms_with_tol(out, DEFAULT_DROP_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::sum::ONE;

    use ElementaryOperator as E;

    #[test]
    fn single_transposition() {
        let r = normal_order(&[E::cre(2), E::cre(1)], ONE).unwrap();
        assert_eq!(r, OperatorSum::from_product(OperatorProduct::new(&[1, 2], &[]).unwrap(), -ONE));
    }

    #[test]
    fn nilpotency() {
        assert!(normal_order(&[E::cre(1), E::cre(1)], ONE).unwrap().is_empty());
        assert!(normal_order(&[E::ann(4), E::ann(4)], ONE).unwrap().is_empty());
    }

    #[test]
    fn contraction() {
        let r = normal_order(&[E::ann(1), E::cre(1)], ONE).unwrap();
        let expect = OperatorSum::from_terms([
            (OperatorProduct::IDENTITY, ONE),
            (OperatorProduct::number(1), -ONE),
        ]);
        assert_eq!(r, expect);
    }

    #[test]
    fn canonical_string_is_fixed_point() {
        // a†_0 a†_3 a_2 a_1 is already canonical
        let r = normal_order(&[E::cre(0), E::cre(3), E::ann(2), E::ann(1)], ONE).unwrap();
        assert_eq!(r, OperatorSum::from_product(OperatorProduct::new(&[0, 3], &[1, 2]).unwrap(), ONE));
    }

    #[test]
    fn anticommutation_relations() {
        for p in 0..6 {
            for q in 0..6 {
                let a = normal_order(&[E::ann(p), E::cre(q)], ONE).unwrap();
                let b = normal_order(&[E::cre(q), E::ann(p)], ONE).unwrap();
                let s = &a + &b;
                if p == q {
                    assert_eq!(s, OperatorSum::identity());
                } else {
                    assert!(s.is_empty());
                }
                let c = &normal_order(&[E::cre(p), E::cre(q)], ONE).unwrap()
                    + &normal_order(&[E::cre(q), E::cre(p)], ONE).unwrap();
                assert!(c.is_empty());
            }
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(normal_order(&[E::cre(70)], ONE).is_err());
    }
}
