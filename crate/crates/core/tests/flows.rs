use padyn_core::flows::{act_add, oracle_act, AffineFlow, GroupTag};
use padyn_core::padic::{Config, Prime, Rational};
use padyn_core::residues::build_group;
use padyn_core::types1::{classify, enumerate_types, realize, BaseSet, ScaleLadder, TruncType1};
use proptest::prelude::*;

fn p5() -> Prime {
    Prime::new(5).unwrap()
}

/// `u * 5^v` with a small unit `u`.
fn element() -> impl Strategy<Value = Rational> {
    (prop_oneof![-60i64..=-1, 1i64..=60], 1i64..=60, -3i64..=3)
        .prop_filter_map("unit numerator and denominator", |(a, b, v)| {
            (a % 5 != 0 && b % 5 != 0).then(|| Rational::from_signeds(a, b) * p5().pow(v))
        })
}

/// A tag with an element of its group.
fn tagged_element() -> impl Strategy<Value = (GroupTag, Rational)> {
    (prop::sample::select(GroupTag::ALL.to_vec()), element()).prop_map(|(tag, g)| {
        let v = p5().valuation(&g).finite().unwrap();
        let g = match tag {
            GroupTag::Ga | GroupTag::Gm => g,
            GroupTag::ZpAdd => g * p5().pow(v.abs() - v),
            GroupTag::ZpMul => g * p5().pow(-v),
        };
        (tag, g)
    })
}

/// The flow's base set, enlarged by `extra` when it is separated from the others.
fn bases_with(flow: &AffineFlow, extra: Option<&Rational>) -> Option<BaseSet> {
    let bases = flow.bases();
    match extra {
        Some(b) if !bases.contains(b) => {
            let mut points = bases.points().to_vec();
            points.push(b.clone());
            BaseSet::new(points, bases.window(), bases.prime()).ok()
        }
        _ => Some(bases.clone()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn symbolic_action_matches_the_oracle(
        (tag, g) in tagged_element(),
        index in any::<prop::sample::Index>(),
        double_gap in any::<bool>(),
    ) {
        let gap = if double_gap { 16 } else { 8 };
        let config = Config::new(5, 2, 1, 1, gap).unwrap();
        let flow = AffineFlow::new(tag, &config).unwrap();
        let t = index.get(flow.states());
        let magnitude = ScaleLadder::new(gap, 1, 3).unwrap().rung(2).unwrap();
        let want = flow.act(&g, t).unwrap();
        // A moved base that collides with another base point has no classification.
        let Some(bases) = bases_with(&flow, want.base()) else {
            return Ok(());
        };
        let got = oracle_act(tag, &g, t, magnitude, &bases, flow.group().classes()).unwrap();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn infinity_is_fixed_by_translations(g in element(), c in 0usize..4) {
        let c = build_group(p5(), 2).unwrap().elements()[c];
        let t = TruncType1::AtInfinity(c);
        prop_assert_eq!(act_add(&g, &t), t);
    }
}

#[test]
fn roundtrip_over_two_gaps() {
    let group = build_group(p5(), 2).unwrap();
    let bases = BaseSet::integers(25, 2, p5()).unwrap();
    for gap in [8, 16] {
        let ladder = ScaleLadder::new(gap, 2, 3).unwrap();
        for t in enumerate_types(&bases, group.elements()) {
            for i in 1..ladder.len() {
                let x = realize(&t, i, &ladder).unwrap();
                assert_eq!(
                    classify(&x, &bases, group.classes()).unwrap(),
                    t,
                    "gap {gap}, rung {i}"
                );
            }
        }
    }
}

#[test]
fn fgeneric_flags_match_the_minimal_families() {
    let config = Config::new(5, 2, 1, 2, 8).unwrap();
    let gm = AffineFlow::new(GroupTag::Gm, &config)
        .unwrap()
        .report()
        .unwrap();
    for (name, flagged) in &gm.fgeneric_flags {
        let expected = name.starts_with("at_infinity") || name.starts_with("near(0,");
        assert_eq!(*flagged, expected, "{name}");
    }
    let ga = AffineFlow::new(GroupTag::Ga, &config)
        .unwrap()
        .report()
        .unwrap();
    for (name, flagged) in &ga.fgeneric_flags {
        assert_eq!(*flagged, name.starts_with("at_infinity"), "{name}");
    }
}
