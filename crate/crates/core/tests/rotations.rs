mod common;

use common::*;
use proptest::prelude::*;

use fermirot::algebra::{commutator, multiply, ONE};
use fermirot::rotations::{
    analyze, build_generator_sum, exp_generator, flow_derivative, rotate_sum, Generator, RotationClass, RotationKind,
};
use fermirot::OperatorSum;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_form_matches_dense_conjugation(o in sum(5, 3), g in generator(5)) {
        let r = rotate_sum(&o, &g).unwrap();
        let u = dense_unitary(&g, 5);
        let expect = u.adjoint() * dense(&o, 5) * &u;
        prop_assert!(frobenius(&(dense(&r, 5) - expect)) < 1e-10);
    }

    #[test]
    fn generator_powers(t in non_number_product(6)) {
        let a = build_generator_sum(&Generator::anti_hermitian(t, 0.0));
        let a2 = multiply(&a, &a);
        let a3 = multiply(&a2, &a);
        prop_assert!((&a3 + &a).max_abs() < 1e-12);
        let p = -&a2;
        prop_assert!(multiply(&p, &p).max_abs_diff(&p) < 1e-12);
        let h = build_generator_sum(&Generator::hermitian(t, 0.0));
        let h3 = multiply(&multiply(&h, &h), &h);
        prop_assert!(h3.max_abs_diff(&h) < 1e-12);
    }

    #[test]
    fn triple_commutator_closes(o in product(6), t in product(6), kind in kind()) {
        let g = Generator { product: t, kind, theta: 0.0 };
        let gs = build_generator_sum(&g);
        let a = analyze(o, &g).unwrap();
        let os = OperatorSum::from_product(o, ONE);
        let c1 = commutator(&os, &gs);
        prop_assert!(c1.max_abs_diff(&a.commutator) < 1e-12);
        let c2 = commutator(&c1, &gs);
        prop_assert!(c2.max_abs_diff(&a.double_commutator) < 1e-12);
        let c3 = commutator(&c2, &gs);
        let alpha = a.class.alpha().unwrap_or(0.0);
        // anti-Hermitian: [[[O,A],A],A] = -α[O,A]; Hermitian: [[[O,H],H],H] = β[O,H]
        let expect = match kind {
            RotationKind::AntiHermitian => c1.scale_real(-alpha),
            RotationKind::Hermitian => c1.scale_real(alpha),
        };
        prop_assert!(c3.max_abs_diff(&expect) < 1e-12, "{} under {}: {:?}", o, t, a.class);
        if a.class == RotationClass::Trivial {
            prop_assert!(c1.is_empty());
        }
    }

    #[test]
    fn rotations_compose(o in sum(6, 3), t in product(6), kind in kind(), x in -2.0..2.0f64, y in -2.0..2.0f64) {
        let g = Generator { product: t, kind, theta: x };
        let twice = rotate_sum(&rotate_sum(&o, &g).unwrap(), &g.with_theta(y)).unwrap();
        let once = rotate_sum(&o, &g.with_theta(x + y)).unwrap();
        prop_assert!(twice.max_abs_diff(&once) < 1e-12);
        let back = rotate_sum(&rotate_sum(&o, &g).unwrap(), &g.with_theta(-x)).unwrap();
        prop_assert!(back.max_abs_diff(&o) < 1e-12);
    }

    #[test]
    fn rotation_commutes_with_adjoint(o in sum(6, 4), g in generator(6)) {
        let lhs = rotate_sum(&o.adjoint(), &g).unwrap();
        let rhs = rotate_sum(&o, &g).unwrap().adjoint();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-13);
        let herm = &o + &o.adjoint();
        prop_assert!(rotate_sum(&herm, &g).unwrap().hermiticity_residual() < 1e-13);
    }

    #[test]
    fn flow_matches_finite_difference(o in product(5), t in product(5), theta in -2.0..2.0f64) {
        let g = Generator::anti_hermitian(t, theta);
        let h = 1e-5;
        let plus = rotate_sum(&OperatorSum::from_product(o, ONE), &g.with_theta(theta + h)).unwrap();
        let minus = rotate_sum(&OperatorSum::from_product(o, ONE), &g.with_theta(theta - h)).unwrap();
        let fd = (&plus - &minus).scale_real(0.5 / h);
        prop_assert!(flow_derivative(o, &g).unwrap().max_abs_diff(&fd) < 1e-8);
    }

    #[test]
    fn exponential_matches_dense(t in product(5), theta in -3.2..3.2f64) {
        let g = Generator::anti_hermitian(t, theta);
        let e = dense(&exp_generator(&g).unwrap(), 5);
        prop_assert!(frobenius(&(e - dense_unitary(&g, 5))) < 1e-10);
    }

    #[test]
    fn particle_conservation_is_kept(o in conserving_sum(6, 3), t in conserving_product(6), kind in kind(), theta in -3.2..3.2f64) {
        let g = Generator { product: t, kind, theta };
        prop_assert!(rotate_sum(&o, &g).unwrap().is_particle_conserving());
    }
}
