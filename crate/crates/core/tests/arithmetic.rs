use padyn_core::padic::{Prime, Rational, Valuation};
use padyn_core::residues::{build_group, PowerClasses};
use proptest::prelude::*;

fn nonzero() -> impl Strategy<Value = i64> {
    prop_oneof![-1_000_000i64..=-1, 1i64..=1_000_000]
}

fn prime() -> impl Strategy<Value = Prime> {
    prop::sample::select(vec![2u64, 3, 5, 7, 11]).prop_map(|p| Prime::new(p).unwrap())
}

fn frac(a: i64, b: i64) -> Rational {
    Rational::from_signeds(a, b)
}

proptest! {
    #[test]
    fn valuation_is_multiplicative(p in prime(), a in nonzero(), b in 1i64..=1_000_000, c in nonzero(), d in 1i64..=1_000_000) {
        let (x, y) = (frac(a, b), frac(c, d));
        prop_assert_eq!(p.valuation(&(&x * &y)), p.valuation(&x) + p.valuation(&y));
    }

    #[test]
    fn valuation_is_ultrametric(p in prime(), a in nonzero(), b in 1i64..=1_000_000, c in nonzero(), d in 1i64..=1_000_000) {
        let (x, y) = (frac(a, b), frac(c, d));
        let (vx, vy) = (p.valuation(&x), p.valuation(&y));
        let vs = p.valuation(&(&x + &y));
        prop_assert!(vs >= vx.min(vy));
        if vx != vy {
            prop_assert_eq!(vs, vx.min(vy));
        }
    }

    #[test]
    fn unit_part_recovers_the_number(p in prime(), a in nonzero(), b in 1i64..=1_000_000) {
        let x = frac(a, b);
        let u = p.unit_part(&x).unwrap();
        prop_assert_eq!(p.valuation(&u), Valuation::Finite(0));
        let v = p.valuation(&x).finite().unwrap();
        prop_assert_eq!(u * p.pow(v), x);
    }

    #[test]
    fn residue_is_a_ring_map(p in prime(), a in nonzero(), c in nonzero(), k in 1u32..=4) {
        let unit = |n: i64| if n % p.get() as i64 == 0 { n + 1 } else { n };
        let (x, y) = (frac(a, unit(c)), frac(c, unit(a)));
        let q = p.checked_pow(k).unwrap();
        let rx = p.residue(&x, k).unwrap();
        let ry = p.residue(&y, k).unwrap();
        prop_assert_eq!(p.residue(&(&x * &y), k).unwrap(), rx * ry % q);
        prop_assert_eq!(p.residue(&(&x + &y), k).unwrap(), (rx + ry) % q);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn class_is_multiplicative(
        p in prop::sample::select(vec![3u64, 5, 7]),
        n in 1u32..=6,
        a in nonzero(), b in 1i64..=1_000_000, c in nonzero(), d in 1i64..=1_000_000,
    ) {
        let classes = PowerClasses::new(Prime::new(p).unwrap(), n).unwrap();
        let (x, y) = (frac(a, b), frac(c, d));
        let lhs = classes.mul(&classes.class_of(&x).unwrap(), &classes.class_of(&y).unwrap());
        prop_assert_eq!(lhs, classes.class_of(&(x * y)).unwrap());
    }
}

#[test]
fn powers_of_p_to_multiples_of_n_are_trivial() {
    for p in [2u64, 3, 5, 7] {
        let prime = Prime::new(p).unwrap();
        for n in 1..=6 {
            let classes = PowerClasses::new(prime, n).unwrap();
            for k in -4i64..=4 {
                let c = classes.class_of(&prime.pow(n as i64 * k)).unwrap();
                assert!(c.is_identity(), "p = {p}, n = {n}, k = {k}");
            }
        }
    }
}

#[test]
fn group_axioms_hold_for_small_levels() {
    for p in [2u64, 3, 5, 7] {
        for n in 1..=6 {
            let g = build_group(Prime::new(p).unwrap(), n).unwrap();
            assert!(g.verify_axioms(), "p = {p}, n = {n}");
        }
    }
}

#[test]
fn residue_group_orders_match_the_index_formula() {
    // [Q_p^* : (Q_p^*)^n] = n |mu_n(Q_p)| / |n|_p.
    let order = |p, n| build_group(Prime::new(p).unwrap(), n).unwrap().order();
    assert_eq!(order(5, 1), 1);
    assert_eq!(order(5, 2), 4);
    assert_eq!(order(5, 3), 3);
    assert_eq!(order(2, 2), 8);
    assert_eq!(order(3, 3), 9);
    assert_eq!(order(7, 3), 9);
    assert_eq!(order(3, 2), 4);
}
