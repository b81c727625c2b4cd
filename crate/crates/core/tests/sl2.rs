use padyn_core::borel::BorelElem;
use padyn_core::padic::{Mat2, Prime, Rational, Valuation};
use padyn_core::rng;
use padyn_core::sl2::{
    conj_stability, in_borel_integral, iwasawa, iwasawa_ht, commute_borel, Factorization,
    Sl2Context,
};
use padyn_core::types1::ScaleLadder;
use proptest::prelude::*;

fn p5() -> Prime {
    Prime::new(5).unwrap()
}

/// Nonzero `u * 5^v`.
fn scalar(spread: i64) -> impl Strategy<Value = Rational> {
    (
        prop_oneof![-99i64..=-1, 1i64..=99],
        1i64..=99,
        -spread..=spread,
    )
        .prop_map(|(a, b, v)| Rational::from_signeds(a, b) * p5().pow(v))
}

fn sl2(spread: i64) -> impl Strategy<Value = Mat2> {
    (scalar(spread), scalar(spread), scalar(spread)).prop_filter_map("d = 0", |(a, b, c)| {
        let d = (Rational::from(1) + &b * &c) / &a;
        (d != 0u32).then(|| Mat2::new(p5(), [[a, b], [c, d]]))
    })
}

fn sl2_zp() -> impl Strategy<Value = Mat2> {
    sl2(3).prop_map(|g| iwasawa(&g).unwrap().0)
}

fn borel() -> impl Strategy<Value = BorelElem> {
    (scalar(6), prop_oneof![Just(Rational::from(0)), scalar(6)])
        .prop_map(|(a, c)| BorelElem::new(a, c).unwrap())
}

fn is_sl2_zp(t: &Mat2) -> bool {
    t.is_sl2() && t.is_integral()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn iwasawa_reconstructs(g in sl2(4)) {
        let (t, h) = iwasawa(&g).unwrap();
        prop_assert!(is_sl2_zp(&t));
        prop_assert_eq!(t.mul(&h.to_matrix(p5())), g.clone());

        let (h, t) = iwasawa_ht(&g).unwrap();
        prop_assert!(is_sl2_zp(&t));
        prop_assert_eq!(h.to_matrix(p5()).mul(&t), g);
    }

    #[test]
    fn borel_integral_membership(b in borel()) {
        let g = b.to_matrix(p5());
        let integral_diagonal = p5().valuation(b.a()) == Valuation::Finite(0);
        let integral_corner = p5().valuation(b.c()) >= Valuation::Finite(0);
        prop_assert_eq!(in_borel_integral(&g), integral_diagonal && integral_corner);
        if in_borel_integral(&g) {
            let (t, h) = iwasawa(&g).unwrap();
            prop_assert!(is_sl2_zp(&t) && is_sl2_zp(&h.to_matrix(p5())));
        }
    }

    #[test]
    fn borel_times_compact_refactors(h in borel(), t in sl2_zp()) {
        let f = match commute_borel(&h, &t) {
            Ok(f) => f,
            Err(padyn_core::Error::Degenerate(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let p = p5();
        prop_assert_eq!(h.to_matrix(p).mul(&t), f.t().mul(&f.h().to_matrix(p)));
        match &f {
            Factorization::Lower { t: tp, .. } => {
                prop_assert!(tp.get(0, 0) == &Rational::from(1) && tp.get(0, 1) == &Rational::from(0));
                prop_assert!(tp.get(1, 1) == &Rational::from(1));
            }
            Factorization::Borel { t: tp, .. } => prop_assert_eq!(tp, &t),
        }
    }
}

#[test]
fn conjugation_keeps_small_elements_small() {
    let p = p5();
    let g = Mat2::new(
        p,
        [
            [Rational::from_signeds(2, 5), Rational::from(5)],
            [Rational::from(1), Rational::from(15)],
        ],
    );
    assert!(g.is_sl2());
    let t = Mat2::new(
        p,
        [
            [Rational::from(1), p.pow(6)],
            [Rational::from(0), Rational::from(1)],
        ],
    );
    let out = conj_stability(&t, &g, 6, 1).unwrap();
    assert!(out.congruent_to_identity(1));
    assert!(conj_stability(&t, &g, 3, 1).is_err());
}

#[test]
fn sampled_products_agree_with_the_witness_paths() {
    let ladder = ScaleLadder::new(8, 2, 6).unwrap();
    for (m, n) in [(1, 2), (2, 2), (1, 3)] {
        let ctx = Sl2Context::new(p5(), m, n, 2, ladder.clone()).unwrap();
        let check = ctx
            .sampled_star_check(60, &mut rng::stream(7 + m as u64 + n as u64))
            .unwrap();
        assert!(check.ok(), "(m, n) = ({m}, {n}): {:?}", check.mismatches);
    }
}
