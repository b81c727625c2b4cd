//! Actions of (Q_p,+), Q_p^*, (Z_p,+) and Z_p^* on truncated 1-types.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::padic::{Config, Prime, Rational, Valuation};
use crate::residues::{build_group, PowerClasses, ResidueGroup};
use crate::rng;
use crate::types1::{
    classify, large_in_class, realize_at, small_in_class, BaseSet, ScaleLadder, TruncType1,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupTag {
    Ga,
    Gm,
    ZpAdd,
    ZpMul,
}

impl GroupTag {
    pub const ALL: [GroupTag; 4] = [GroupTag::Ga, GroupTag::Gm, GroupTag::ZpAdd, GroupTag::ZpMul];

    fn additive(self) -> bool {
        matches!(self, GroupTag::Ga | GroupTag::ZpAdd)
    }
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupTag::Ga => "ga",
            GroupTag::Gm => "gm",
            GroupTag::ZpAdd => "zp-add",
            GroupTag::ZpMul => "zp-mul",
        })
    }
}

impl FromStr for GroupTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ga" => Ok(GroupTag::Ga),
            "gm" => Ok(GroupTag::Gm),
            "zp-add" => Ok(GroupTag::ZpAdd),
            "zp-mul" => Ok(GroupTag::ZpMul),
            _ => Err(Error::Parse(format!("unknown group {s:?}"))),
        }
    }
}

/// Translation by `b`. Types at infinity are fixed.
pub fn act_add(b: &Rational, t: &TruncType1) -> TruncType1 {
    match t {
        TruncType1::Realized(a) => TruncType1::Realized(a + b),
        TruncType1::Near(a, c) => TruncType1::Near(a + b, *c),
        TruncType1::AtInfinity(c) => TruncType1::AtInfinity(*c),
    }
}

/// Multiplication by `g != 0`; classes pick up `class(g)`.
pub fn act_mul(g: &Rational, t: &TruncType1, classes: &PowerClasses) -> Result<TruncType1> {
    let cg = classes.class_of(g)?;
    Ok(match t {
        TruncType1::Realized(a) => TruncType1::Realized(g * a),
        TruncType1::Near(a, c) => TruncType1::Near(g * a, classes.mul(&cg, c)),
        TruncType1::AtInfinity(c) => TruncType1::AtInfinity(classes.mul(&cg, c)),
    })
}

/// Applies a group element of the given kind to a witness.
pub fn apply(tag: GroupTag, g: &Rational, x: &Rational) -> Rational {
    if tag.additive() {
        x + g
    } else {
        x * g
    }
}

/// Truncated type space of one of the four affine groups, with orbit and
/// closure structure.
#[derive(Clone, Debug)]
pub struct AffineFlow {
    tag: GroupTag,
    group: ResidueGroup,
    bases: BaseSet,
    states: Vec<TruncType1>,
    index: HashMap<TruncType1, usize>,
    /// Extreme valuation used for closure witnesses.
    extreme: u64,
}

impl AffineFlow {
    /// Builds the state space over the base set `{0, ..., p^w - 1}`.
    pub fn new(tag: GroupTag, config: &Config) -> Result<Self> {
        let bases = BaseSet::zp_residues(config.window, config.prime)?;
        Self::with_bases(tag, config, bases)
    }

    pub fn with_bases(tag: GroupTag, config: &Config, bases: BaseSet) -> Result<Self> {
        let group = build_group(config.prime, config.residue_level)?;
        let p = config.prime;
        let classes = group.elements().to_vec();
        let is_unit = |a: &Rational| p.valuation(a) == Valuation::Finite(0);
        let admits = |a: &Rational| match tag {
            GroupTag::Ga => true,
            GroupTag::Gm => true,
            GroupTag::ZpAdd => p.valuation(a) >= Valuation::Finite(0),
            GroupTag::ZpMul => is_unit(a),
        };
        let mut states = Vec::new();
        for a in bases.points().iter().filter(|a| admits(a)) {
            if !(tag == GroupTag::Gm && *a == 0u32) {
                states.push(TruncType1::Realized(a.clone()));
            }
            states.extend(classes.iter().map(|c| TruncType1::Near(a.clone(), *c)));
        }
        if matches!(tag, GroupTag::Ga | GroupTag::Gm) {
            states.extend(classes.iter().map(|c| TruncType1::AtInfinity(*c)));
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let n = config.residue_level as u64;
        Ok(AffineFlow {
            tag,
            group,
            bases,
            states,
            index,
            extreme: config.window as u64 + 2 * n + 5,
        })
    }

    pub fn tag(&self) -> GroupTag {
        self.tag
    }

    pub fn states(&self) -> &[TruncType1] {
        &self.states
    }

    pub fn bases(&self) -> &BaseSet {
        &self.bases
    }

    pub fn group(&self) -> &ResidueGroup {
        &self.group
    }

    fn classes(&self) -> &PowerClasses {
        self.group.classes()
    }

    fn prime(&self) -> Prime {
        self.group.prime()
    }

    fn is_zero(a: &Rational) -> bool {
        *a == 0u32
    }

    /// Symbolic action of a group element.
    pub fn act(&self, g: &Rational, t: &TruncType1) -> Result<TruncType1> {
        if self.tag.additive() {
            Ok(act_add(g, t))
        } else {
            act_mul(g, t, self.classes())
        }
    }

    fn in_group(&self, g: &Rational) -> bool {
        let v = self.prime().valuation(g);
        match self.tag {
            GroupTag::Ga => true,
            GroupTag::Gm => !v.is_infinite(),
            GroupTag::ZpAdd => v >= Valuation::Finite(0),
            GroupTag::ZpMul => v == Valuation::Finite(0),
        }
    }

    /// A group element carrying `s` exactly onto `t`, if one exists.
    pub fn transporter(&self, s: &TruncType1, t: &TruncType1) -> Result<Option<Rational>> {
        use TruncType1::*;
        let classes = self.classes();
        let candidate = match (s, t) {
            (Realized(a), Realized(b)) | (Near(a, _), Near(b, _)) => {
                if self.tag.additive() {
                    Some(b - a)
                } else if Self::is_zero(a) && Self::is_zero(b) {
                    match (s.class(), t.class()) {
                        (Some(c), Some(d)) => {
                            Some(classes.mul(&d, &classes.inv(&c)).rep_rational())
                        }
                        _ => Some(Rational::from(1)),
                    }
                } else if Self::is_zero(a) || Self::is_zero(b) {
                    None
                } else {
                    Some(b / a)
                }
            }
            (AtInfinity(c), AtInfinity(d)) => Some(if self.tag.additive() {
                Rational::from(0)
            } else {
                classes.mul(d, &classes.inv(c)).rep_rational()
            }),
            _ => None,
        };
        match candidate {
            Some(g) if self.in_group(&g) && self.act(&g, s)? == *t => Ok(Some(g)),
            _ => Ok(None),
        }
    }

    /// Limit types adjoined when group elements run off to valuation `+-infinity`.
    pub fn closure_transitions(&self, t: &TruncType1) -> BTreeSet<TruncType1> {
        use TruncType1::*;
        let all_near = || {
            self.states
                .iter()
                .filter(|s| s.is_near())
                .cloned()
                .collect::<BTreeSet<_>>()
        };
        let at_infinity = || {
            self.states
                .iter()
                .filter(|s| s.is_at_infinity())
                .cloned()
                .collect::<BTreeSet<_>>()
        };
        match (self.tag, t) {
            (GroupTag::Ga, Realized(_) | Near(..)) => {
                let mut out = all_near();
                out.extend(at_infinity());
                out
            }
            (GroupTag::Ga, AtInfinity(_)) => BTreeSet::new(),
            (GroupTag::Gm, Realized(a) | Near(a, _)) if !Self::is_zero(a) => {
                let mut out = all_near();
                out.extend(at_infinity());
                out
            }
            (GroupTag::Gm, Near(..)) => self
                .states
                .iter()
                .filter(|s| matches!(s, Near(b, _) if Self::is_zero(b)))
                .cloned()
                .collect(),
            (GroupTag::Gm, _) => at_infinity(),
            (GroupTag::ZpAdd | GroupTag::ZpMul, _) => all_near(),
        }
    }

    /// Action-plus-closure graph on the state indices.
    pub fn graph(&self) -> Result<Digraph> {
        let mut g = Digraph::new(self.states.len());
        for (i, s) in self.states.iter().enumerate() {
            for (j, t) in self.states.iter().enumerate() {
                if i != j && self.transporter(s, t)?.is_some() {
                    g.add_edge(i, j);
                }
            }
            for t in self.closure_transitions(s) {
                g.add_edge(i, self.index[&t]);
            }
        }
        Ok(g)
    }

    /// Partition of the states into exact orbits.
    pub fn orbits(&self) -> Result<Vec<Vec<TruncType1>>> {
        let mut seen = vec![false; self.states.len()];
        let mut out = Vec::new();
        for (i, s) in self.states.iter().enumerate() {
            if seen[i] {
                continue;
            }
            let mut orbit = Vec::new();
            for (j, t) in self.states.iter().enumerate() {
                if !seen[j] && self.transporter(s, t)?.is_some() {
                    seen[j] = true;
                    orbit.push(t.clone());
                }
            }
            out.push(orbit);
        }
        Ok(out)
    }

    /// The minimal closed invariant sets: bottom components of the action-plus-closure graph.
    pub fn minimal_subflows(&self) -> Result<Vec<Vec<TruncType1>>> {
        Ok(self
            .graph()?
            .bottom_components()
            .into_iter()
            .map(|c| c.into_iter().map(|i| self.states[i].clone()).collect())
            .collect())
    }

    pub fn report(&self) -> Result<AffineFlowReport> {
        let minimal = self.minimal_subflows()?;
        let members: BTreeSet<&TruncType1> = minimal.iter().flatten().collect();
        let fgeneric_flags = self
            .states
            .iter()
            .map(|s| (s.to_string(), members.contains(s)))
            .collect();
        Ok(AffineFlowReport {
            group_tag: self.tag,
            prime: self.prime(),
            n: self.group.level(),
            window: self.bases.window(),
            states: self.states.len(),
            minimal_subflows: minimal.clone(),
            orbits: self.orbits()?,
            fgeneric_flags,
        })
    }

    /// A group element of extreme valuation whose action carries a witness of
    /// `s` to a witness of the closure target `t`.
    pub fn closure_witness(&self, s: &TruncType1, t: &TruncType1) -> Option<Rational> {
        use TruncType1::*;
        let big = self.extreme;
        let base = s.base();
        match (self.tag.additive(), t) {
            (true, Near(c, d)) => Some(c - base? + small_in_class(d, big)),
            (true, AtInfinity(d)) => Some(large_in_class(d, big)),
            (false, Near(c, d)) => {
                let a = base?;
                if Self::is_zero(a) {
                    let cs = s.class()?;
                    let q = self.classes().mul(d, &self.classes().inv(&cs));
                    return Some(q.rep_rational());
                }
                if Self::is_zero(c) {
                    Some(small_in_class(d, big) / a)
                } else {
                    Some((c + small_in_class(d, big)) / a)
                }
            }
            (false, AtInfinity(d)) => match s {
                AtInfinity(cs) => Some(
                    self.classes()
                        .mul(d, &self.classes().inv(cs))
                        .rep_rational(),
                ),
                _ => Some(large_in_class(d, big) / base?),
            },
            (_, Realized(_)) => None,
        }
    }

    fn witness_rung(&self) -> u64 {
        let n = self.group.level() as u64;
        let k = self.classes().precision() as u64;
        2 * self.extreme + 3 * self.bases.window() as u64 + n + k + 1
    }

    /// Realizes `s` deep enough that every closure witness acts on it cleanly.
    pub fn deep_witness(&self, s: &TruncType1, ladder: &ScaleLadder) -> Result<Rational> {
        let i = ladder.first_at_least(self.witness_rung())?;
        Ok(realize_at(s, ladder.rung(i)?))
    }

    /// Checks the closure table by extreme-valuation sampling: every claimed
    /// transition is produced by an explicit witness, and sampled extreme
    /// elements never leave the claimed reach of a nonrealized state.
    pub fn validate_closure(
        &self,
        ladder: &ScaleLadder,
        samples: usize,
    ) -> Result<ClosureValidation> {
        let classes = self.classes();
        let mut checked = 0;
        let mut failures = Vec::new();
        let mut pool = BTreeSet::new();
        for s in &self.states {
            let x = self.deep_witness(s, ladder)?;
            for t in self.closure_transitions(s) {
                let g = self.closure_witness(s, &t).ok_or_else(|| {
                    Error::Precondition(format!("no closure witness from {s} to {t}"))
                })?;
                if !self.in_group(&g) {
                    failures.push(format!("{s} -> {t}: witness outside the group"));
                    continue;
                }
                let got = classify(&apply(self.tag, &g, &x), &self.bases, classes)?;
                checked += 1;
                if got != t {
                    failures.push(format!("{s} -> {t}: witness lands on {got}"));
                }
                pool.insert(g);
            }
        }
        let mut pool: Vec<Rational> = pool.into_iter().collect();
        pool.shuffle(&mut rng::stream(0xf10));
        pool.truncate(samples);
        let mut sampled = 0;
        for s in self.states.iter().filter(|s| !s.is_realized()) {
            let x = self.deep_witness(s, ladder)?;
            let reach = self.closure_transitions(s);
            for g in &pool {
                let got = classify(&apply(self.tag, g, &x), &self.bases, classes)?;
                if got.is_realized() && !self.index.contains_key(&got) {
                    continue;
                }
                sampled += 1;
                let in_orbit =
                    self.index.contains_key(&got) && self.transporter(s, &got)?.is_some();
                if !(in_orbit || reach.contains(&got)) {
                    failures.push(format!(
                        "{s}: sampled element lands outside its reach on {got}"
                    ));
                }
            }
        }
        Ok(ClosureValidation {
            claims_checked: checked,
            samples_checked: sampled,
            failures,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosureValidation {
    pub claims_checked: usize,
    pub samples_checked: usize,
    pub failures: Vec<String>,
}

impl ClosureValidation {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AffineFlowReport {
    pub group_tag: GroupTag,
    pub prime: Prime,
    pub n: u32,
    pub window: u32,
    pub states: usize,
    pub minimal_subflows: Vec<Vec<TruncType1>>,
    pub orbits: Vec<Vec<TruncType1>>,
    pub fgeneric_flags: BTreeMap<String, bool>,
}

/// Realize, act, classify: the oracle that the symbolic actions must match.
pub fn oracle_act(
    tag: GroupTag,
    g: &Rational,
    t: &TruncType1,
    magnitude: u64,
    bases: &BaseSet,
    classes: &PowerClasses,
) -> Result<TruncType1> {
    classify(&apply(tag, g, &realize_at(t, magnitude)), bases, classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::rat;

    fn cfg(n: u32, w: u32) -> Config {
        Config::new(5, n, 1, w, 8).unwrap()
    }

    #[test]
    fn add_examples() {
        let c = PowerClasses::new(Prime::new(5).unwrap(), 2).unwrap();
        let one = c.identity();
        let two = c.class_of_int(2).unwrap();
        assert_eq!(
            act_add(&rat(3), &TruncType1::AtInfinity(one)),
            TruncType1::AtInfinity(one)
        );
        let t = TruncType1::Near(rat(7), two);
        assert_eq!(act_add(&rat(0), &t), t);
        assert_eq!(act_add(&rat(3), &t), TruncType1::Near(rat(10), two));
    }

    #[test]
    fn mul_examples() {
        let c = PowerClasses::new(Prime::new(5).unwrap(), 2).unwrap();
        let one = c.identity();
        let t = TruncType1::Near(rat(0), one);
        assert_eq!(
            act_mul(&rat(5), &t, &c).unwrap(),
            TruncType1::Near(rat(0), c.class_of_int(5).unwrap())
        );
        assert_eq!(act_mul(&rat(1), &t, &c).unwrap(), t);
        assert_eq!(
            act_mul(&rat(2), &TruncType1::Near(rat(1), one), &c).unwrap(),
            TruncType1::Near(rat(2), c.class_of_int(2).unwrap())
        );
        assert_eq!(act_mul(&rat(0), &t, &c), Err(Error::ZeroInput));
    }

    #[test]
    fn gm_has_two_minimal_subflows() {
        let flow = AffineFlow::new(GroupTag::Gm, &cfg(2, 2)).unwrap();
        let minimal = flow.minimal_subflows().unwrap();
        assert_eq!(minimal.len(), 2);
        assert!(minimal.iter().all(|m| m.len() == 4));
        assert!(minimal[0]
            .iter()
            .all(|t| t.is_near() && t.base() == Some(&rat(0))));
        assert!(minimal[1].iter().all(|t| t.is_at_infinity()));
    }

    #[test]
    fn ga_trivial_level_has_one_fixed_point() {
        let flow = AffineFlow::new(GroupTag::Ga, &cfg(1, 1)).unwrap();
        let minimal = flow.minimal_subflows().unwrap();
        assert_eq!(minimal.len(), 1);
        assert_eq!(minimal[0].len(), 1);
        assert!(minimal[0][0].is_at_infinity());
    }

    #[test]
    fn zp_add_orbits_by_class() {
        let flow = AffineFlow::new(GroupTag::ZpAdd, &cfg(2, 1)).unwrap();
        let minimal = flow.minimal_subflows().unwrap();
        assert_eq!(minimal.len(), 1);
        assert_eq!(minimal[0].len(), 20);
        let near_orbits: Vec<_> = flow
            .orbits()
            .unwrap()
            .into_iter()
            .filter(|o| o[0].is_near())
            .collect();
        assert_eq!(near_orbits.len(), 4);
    }

    #[test]
    fn zp_mul_orbits_follow_the_base_class() {
        let flow = AffineFlow::new(GroupTag::ZpMul, &cfg(2, 1)).unwrap();
        let c = flow.classes().clone();
        for orbit in flow.orbits().unwrap().iter().filter(|o| o[0].is_near()) {
            // {p_{a, aC}}: class(x - a) / class(a) is constant along the orbit.
            let tags: BTreeSet<_> = orbit
                .iter()
                .map(|t| {
                    let a = t.base().unwrap();
                    c.mul(&t.class().unwrap(), &c.inv(&c.class_of(a).unwrap()))
                })
                .collect();
            assert_eq!(tags.len(), 1);
        }
    }

    #[test]
    fn closure_table_matches_sampling() {
        let ladder = ScaleLadder::new(8, 2, 4).unwrap();
        for tag in GroupTag::ALL {
            let flow = AffineFlow::new(tag, &cfg(2, 1)).unwrap();
            let v = flow.validate_closure(&ladder, 64).unwrap();
            assert!(
                v.ok(),
                "{tag}: {:?}",
                &v.failures[..v.failures.len().min(3)]
            );
            assert!(v.claims_checked > 0);
        }
    }
}
