//! The SL(2, Q_p) action on truncated types of the projective line, the operators
//! `p0 *` and `q0 *`, and the finite-level minimality and proximality checks.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use malachite_base::num::arithmetic::traits::Reciprocal;
use malachite_base::num::basic::traits::{One, Zero};
use serde::ser::SerializeMap;
use serde::Serialize;

use crate::borel::{borel_witness, BorelTruncType};
use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::padic::{format_rational, Mat2, Prime, Rational, Valuation};
use crate::residues::{build_group, ResidueClass, ResidueGroup};
use crate::sl2::{generators, perturbation};
use crate::types1::{small_in_class, ScaleLadder};

/// A point of P^1(Q_p) as `[x : 1]` or `[1 : 0]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProjPoint {
    Finite(Rational),
    Infinity,
}

/// Affine chart: `x` near points of `Z_p`, `y = 1/x` near points outside it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    Finite,
    Infinite,
}

impl ProjPoint {
    pub fn from_homogeneous(x: &Rational, y: &Rational) -> Result<Self> {
        if *y == 0u32 {
            if *x == 0u32 {
                return Err(Error::ZeroInput);
            }
            return Ok(ProjPoint::Infinity);
        }
        Ok(ProjPoint::Finite(x / y))
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, ProjPoint::Infinity)
    }

    /// `g . [x : y] = [a x + b y : c x + d y]`.
    pub fn act(&self, g: &Mat2) -> ProjPoint {
        let x = match self {
            ProjPoint::Finite(x) => Some(x),
            ProjPoint::Infinity => None,
        };
        match g.mobius(x) {
            Some(z) => ProjPoint::Finite(z),
            None => ProjPoint::Infinity,
        }
    }

    /// The chart containing the point and its coordinate there.
    pub fn chart(&self, prime: Prime) -> (Chart, Rational) {
        match self {
            ProjPoint::Infinity => (Chart::Infinite, Rational::ZERO),
            ProjPoint::Finite(x) => match prime.valuation(x) {
                Valuation::Finite(v) if v < 0 => (Chart::Infinite, x.reciprocal()),
                _ => (Chart::Finite, x.clone()),
            },
        }
    }

    pub fn from_chart(chart: Chart, z: Rational) -> ProjPoint {
        match chart {
            Chart::Finite => ProjPoint::Finite(z),
            Chart::Infinite if z == 0u32 => ProjPoint::Infinity,
            Chart::Infinite => ProjPoint::Finite(z.reciprocal()),
        }
    }
}

impl fmt::Display for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjPoint::Finite(x) => write!(f, "{}", format_rational(x)),
            ProjPoint::Infinity => write!(f, "inf"),
        }
    }
}

/// A truncated type on P^1: a realized point, or a point infinitesimally near a base
/// with the class of the displacement measured in the base's chart.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProjTruncType {
    Realized(ProjPoint),
    Near(ProjPoint, ResidueClass),
}

impl ProjTruncType {
    pub fn base(&self) -> &ProjPoint {
        match self {
            ProjTruncType::Realized(p) | ProjTruncType::Near(p, _) => p,
        }
    }

    pub fn class(&self) -> Option<ResidueClass> {
        match self {
            ProjTruncType::Realized(_) => None,
            ProjTruncType::Near(_, c) => Some(*c),
        }
    }

    /// `Near(inf, C)` or the realized point at infinity.
    pub fn is_infinity_based(&self) -> bool {
        self.base().is_infinity()
    }
}

impl fmt::Display for ProjTruncType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjTruncType::Realized(p) => write!(f, "realized({p})"),
            ProjTruncType::Near(p, c) => write!(f, "near({p}, {c})"),
        }
    }
}

impl Serialize for ProjTruncType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        match self {
            ProjTruncType::Realized(p) => {
                map.serialize_entry("kind", "realized")?;
                map.serialize_entry("point", &p.to_string())?;
            }
            ProjTruncType::Near(p, c) => {
                map.serialize_entry("kind", "near")?;
                map.serialize_entry("base", &p.to_string())?;
                map.serialize_entry("class", c)?;
                map.serialize_entry("n", &c.level())?;
            }
        }
        map.end()
    }
}

fn chart_matrix(prime: Prime, chart: Chart) -> Mat2 {
    match chart {
        Chart::Finite => Mat2::identity(prime),
        Chart::Infinite => Mat2::from_ints(prime, [[0, 1], [1, 0]]),
    }
}

/// Derivative of `g` at `pt`, read in the charts of `pt` and of `g . pt`.
pub fn chart_derivative(g: &Mat2, pt: &ProjPoint) -> Result<Rational> {
    let p = g.prime();
    let (src, z) = pt.chart(p);
    let (dst, _) = pt.act(g).chart(p);
    let m = chart_matrix(p, dst).mul(g).mul(&chart_matrix(p, src));
    let den = m.get(1, 0) * &z + m.get(1, 1);
    if den == 0u32 {
        return Err(Error::Degenerate(format!("{g} sends {pt} off its chart")));
    }
    Ok(m.det() / (&den * &den))
}

/// Truncated P^1-types at `(p, n, w)`: base points are `P^1(Z/p^w)`, listed by
/// representatives `a` in `[0, p^w)` and `1/y` for `y` in `pZ/p^w` (with `y = 0` the point at infinity).
#[derive(Clone, Debug)]
pub struct ProjSpace {
    prime: Prime,
    window: u32,
    m: u32,
    group: ResidueGroup,
    ladder: ScaleLadder,
    points: Vec<ProjPoint>,
}

impl ProjSpace {
    pub fn new(prime: Prime, n: u32, w: u32, m: u32, ladder: ScaleLadder) -> Result<Self> {
        if w == 0 {
            return Err(Error::LevelOutOfBounds("window must be at least 1".into()));
        }
        if ladder.len() < 3 {
            return Err(Error::LadderExhausted {
                need: 3,
                from: 0,
                have: ladder.len(),
            });
        }
        let q = prime
            .checked_pow(w)
            .filter(|&q| q <= 1 << 16)
            .ok_or_else(|| Error::LevelOutOfBounds(format!("p^{w} is too large")))?;
        let p = prime.get();
        let mut points: Vec<ProjPoint> = (0..q)
            .map(|a| ProjPoint::Finite(Rational::from(a)))
            .collect();
        points.push(ProjPoint::Infinity);
        for b in 1..q / p {
            points.push(ProjPoint::Finite(Rational::from_unsigneds(1, p * b)));
        }
        Ok(ProjSpace {
            prime,
            window: w,
            m,
            group: build_group(prime, n)?,
            ladder,
            points,
        })
    }

    pub fn from_config(config: &crate::padic::Config) -> Result<Self> {
        Self::new(
            config.prime,
            config.residue_level,
            config.window,
            config.matrix_level,
            crate::borel::default_ladder(config)?,
        )
    }

    pub fn with_ladder(&self, ladder: ScaleLadder) -> Result<Self> {
        Self::new(self.prime, self.group.level(), self.window, self.m, ladder)
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn group(&self) -> &ResidueGroup {
        &self.group
    }

    pub fn ladder(&self) -> &ScaleLadder {
        &self.ladder
    }

    pub fn points(&self) -> &[ProjPoint] {
        &self.points
    }

    /// Nonalgebraic states `Near(a, C)`.
    pub fn states(&self) -> Vec<ProjTruncType> {
        let mut out = Vec::with_capacity(self.points.len() * self.group.order());
        for a in &self.points {
            for c in self.group.elements() {
                out.push(ProjTruncType::Near(a.clone(), *c));
            }
        }
        out
    }

    /// Realized base points followed by the nonalgebraic states.
    pub fn all_types(&self) -> Vec<ProjTruncType> {
        let mut out: Vec<ProjTruncType> = self
            .points
            .iter()
            .cloned()
            .map(ProjTruncType::Realized)
            .collect();
        out.extend(self.states());
        out
    }

    /// Reduces a point to its representative in `P^1(Z/p^w)`.
    pub fn canonical_point(&self, pt: &ProjPoint) -> Result<ProjPoint> {
        let (chart, z) = pt.chart(self.prime);
        let r = self.prime.residue(&z, self.window).ok_or_else(|| {
            Error::OutsideFamily(format!("chart coordinate of {pt} is not integral"))
        })?;
        Ok(ProjPoint::from_chart(chart, Rational::from(r)))
    }

    pub fn canonicalize(&self, t: &ProjTruncType) -> Result<ProjTruncType> {
        Ok(match t {
            ProjTruncType::Realized(p) => ProjTruncType::Realized(self.canonical_point(p)?),
            ProjTruncType::Near(p, c) => ProjTruncType::Near(self.canonical_point(p)?, *c),
        })
    }

    /// Moves the base by the Möbius map and the class by the derivative's class.
    pub fn act_exact(&self, g: &Mat2, t: &ProjTruncType) -> Result<ProjTruncType> {
        if !g.is_sl2() {
            return Err(Error::NotUnimodular(format_rational(&g.det())));
        }
        Ok(match t {
            ProjTruncType::Realized(p) => ProjTruncType::Realized(p.act(g)),
            ProjTruncType::Near(p, c) => {
                let d = self.group.classes().class_of(&chart_derivative(g, p)?)?;
                ProjTruncType::Near(p.act(g), self.group.classes().mul(&d, c))
            }
        })
    }

    /// `act_exact` followed by reduction of the base to `P^1(Z/p^w)`.
    pub fn act(&self, g: &Mat2, t: &ProjTruncType) -> Result<ProjTruncType> {
        self.canonicalize(&self.act_exact(g, t)?)
    }

    /// Exact witness with displacement of valuation at least `magnitude`.
    pub fn realize_at(&self, t: &ProjTruncType, magnitude: u64) -> ProjPoint {
        match t {
            ProjTruncType::Realized(p) => p.clone(),
            ProjTruncType::Near(p, c) => {
                let (chart, z) = p.chart(self.prime);
                ProjPoint::from_chart(chart, z + small_in_class(c, magnitude))
            }
        }
    }

    /// Classifies `z` against an exact base point: `Near(base, class of the displacement)`.
    pub fn classify_near(&self, z: &ProjPoint, base: &ProjPoint) -> Result<ProjTruncType> {
        let (chart, b) = base.chart(self.prime);
        let zc = match (chart, z) {
            (Chart::Infinite, ProjPoint::Infinity) => Rational::ZERO,
            (Chart::Infinite, ProjPoint::Finite(x)) if *x != 0u32 => x.reciprocal(),
            (Chart::Finite, ProjPoint::Finite(x)) => x.clone(),
            _ => return Err(Error::OutsideFamily(format!("{z} is far from {base}"))),
        };
        let eps = zc - b;
        if eps == 0u32 {
            return Ok(ProjTruncType::Realized(base.clone()));
        }
        if self.prime.valuation(&eps) <= Valuation::Finite(self.window as i64) {
            return Err(Error::OutsideFamily(format!(
                "{z} is not infinitesimally near {base}"
            )));
        }
        Ok(ProjTruncType::Near(
            base.clone(),
            self.group.classes().class_of(&eps)?,
        ))
    }

    /// Classifies `z` against the representatives of `P^1(Z/p^w)`.
    pub fn classify(&self, z: &ProjPoint) -> Result<ProjTruncType> {
        let base = self.canonical_point(z)?;
        self.classify_near(z, &base)
    }

    /// Realization oracle for `g . t`: a witness on a rung dominating `g`, moved and reclassified.
    pub fn oracle_act(&self, g: &Mat2, t: &ProjTruncType) -> Result<ProjTruncType> {
        let base = t.base().act(g);
        let d = g.max_abs_valuation() + self.base_scale(t.base());
        let k = self.group.classes().precision() as u64;
        let from = self
            .ladder
            .first_at_least(2 * d + self.window as u64 + k + 1)?;
        let z = self.realize_at(t, self.ladder.rung(from)?);
        self.classify_near(&z.act(g), &base)
    }

    fn base_scale(&self, p: &ProjPoint) -> u64 {
        match p.chart(self.prime) {
            (_, z) if z == 0u32 => 0,
            (_, z) => self
                .prime
                .valuation(&z)
                .finite()
                .map_or(0, |v| v.unsigned_abs()),
        }
    }

    /// `p0 * t`: `h t` with `h` the identity-class Borel witness on rungs 0, 1 and
    /// `t` realized on rung 2.
    pub fn p0_star(&self, t: &ProjTruncType) -> Result<ProjTruncType> {
        let classes = self.group.classes();
        let h = borel_witness(&BorelTruncType::new(classes.identity()), &self.ladder, 0)?;
        let z = self.realize_at(t, self.ladder.rung(2)?);
        self.classify(&z.act(&h.to_matrix(self.prime)))
    }

    /// `q0 * t`: a generic perturbation of the identity on rung 0 applied to `t`
    /// realized on rung 1. For `t` based at infinity the realization is
    /// `[[1, 0], [1/x, 1]] . inf` and both matrices are checked to be `≡ I mod p^m`.
    pub fn q0_star(&self, t: &ProjTruncType) -> Result<ProjTruncType> {
        let e = perturbation(self.prime, self.group.level(), self.ladder.rung(0)?);
        if !e.congruent_to_identity(self.m) {
            return Err(Error::OutsideFamily(format!(
                "{e} is not ≡ I mod p^{}",
                self.m
            )));
        }
        let z = self.realize_at(t, self.ladder.rung(1)?);
        if t.is_infinity_based() {
            if let ProjPoint::Finite(x) = &z {
                let one = Rational::ONE;
                let u = Mat2::new(
                    self.prime,
                    [[one.clone(), Rational::ZERO], [x.reciprocal(), one]],
                );
                if !u.congruent_to_identity(self.m) || ProjPoint::Infinity.act(&u) != z {
                    return Err(Error::OutsideFamily(format!("{u} does not witness {t}")));
                }
            }
        }
        self.classify(&z.act(&e))
    }

    /// `q0 * inf`.
    pub fn q0_infinity(&self) -> Result<ProjTruncType> {
        self.q0_star(&ProjTruncType::Realized(ProjPoint::Infinity))
    }

    pub fn collapse_check(&self) -> Result<CollapseReport> {
        self.collapse_over(&self.all_types())
    }

    /// `q0 * (p0 * t)` over the given types, with the two intermediate checks.
    pub fn collapse_over(&self, types: &[ProjTruncType]) -> Result<CollapseReport> {
        let mut images = BTreeSet::new();
        let mut p0_lands_at_infinity = true;
        let mut q0_constant_at_infinity = true;
        let q0_inf = self.q0_infinity()?;
        let mut flagged = Vec::new();
        for t in types {
            let s = self.p0_star(t)?;
            if t.is_infinity_based() {
                p0_lands_at_infinity &= s.is_infinity_based() && s.class() == t.class();
            } else {
                p0_lands_at_infinity &= matches!(&s, ProjTruncType::Near(ProjPoint::Infinity, _));
            }
            if s.is_infinity_based() {
                q0_constant_at_infinity &= self.q0_star(&s)? == q0_inf;
            }
            images.insert(self.q0_star(&s)?);
            if self.near_window_edge(t.base()) {
                flagged.push(t.to_string());
            }
        }
        let collapsed = match images.len() {
            1 => images.into_iter().next(),
            _ => None,
        };
        let collapses = types.is_empty() || collapsed.is_some();
        Ok(CollapseReport {
            states: types.len(),
            collapses,
            collapsed_type: collapsed,
            p0_lands_at_infinity,
            q0_constant_at_infinity,
            boundary_inputs: flagged,
        })
    }

    /// Bases whose valuation is within 1 of the window edge.
    fn near_window_edge(&self, p: &ProjPoint) -> bool {
        match p {
            ProjPoint::Finite(x) if *x != 0u32 => self
                .prime
                .valuation(x)
                .finite()
                .is_some_and(|v| v.unsigned_abs() + 1 >= self.window as u64),
            _ => false,
        }
    }

    /// Translation in the chart of `from`, carrying `from` to `target` plus `delta`.
    fn chart_translation(&self, from: &ProjPoint, target: &ProjPoint, delta: &Rational) -> Mat2 {
        let (chart, a) = from.chart(self.prime);
        let (_, c) = target.chart(self.prime);
        let s = c - a + delta;
        let one = Rational::ONE;
        let zero = Rational::ZERO;
        match chart {
            Chart::Finite => Mat2::new(self.prime, [[one.clone(), s], [zero, one]]),
            Chart::Infinite => Mat2::new(self.prime, [[one.clone(), zero], [s, one]]),
        }
    }

    /// Closure edges: from each state, a translation in its chart by `c - a + delta`
    /// with `delta` standard of class `C'` and valuation above the window reaches
    /// `Near(c, C')` for every `c` in the same chart. Each edge is computed on a witness.
    pub fn closure_edges(&self) -> Result<(Vec<(ProjTruncType, ProjTruncType)>, usize)> {
        let n = self.group.level() as u64;
        let extreme = self.window as u64 + 2 * n + 5;
        let k = self.group.classes().precision() as u64;
        let rung = self.ladder.rung(
            self.ladder
                .first_at_least(2 * extreme + self.window as u64 + k + 1)?,
        )?;
        let mut edges = Vec::new();
        let mut failures = 0;
        for s in self.states() {
            let (chart, _) = s.base().chart(self.prime);
            let z = self.realize_at(&s, rung);
            for c in self
                .points
                .iter()
                .filter(|c| c.chart(self.prime).0 == chart)
            {
                for cls in self.group.elements() {
                    let delta = small_in_class(cls, extreme);
                    let g = self.chart_translation(s.base(), c, &delta);
                    let expected = ProjTruncType::Near(c.clone(), *cls);
                    match self.classify(&z.act(&g)) {
                        Ok(t) if t == expected => edges.push((s.clone(), t)),
                        _ => failures += 1,
                    }
                }
            }
        }
        Ok((edges, failures))
    }

    pub fn graph(&self) -> Result<(Digraph, usize)> {
        let states = self.states();
        let index: HashMap<&ProjTruncType, usize> =
            states.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let mut g = Digraph::new(states.len());
        for gen in generators(self.prime, self.m, self.window) {
            for (i, s) in states.iter().enumerate() {
                let t = self.act(&gen, s)?;
                g.add_edge(i, index[&t]);
            }
        }
        let (edges, failures) = self.closure_edges()?;
        for (a, b) in &edges {
            g.add_edge(index[a], index[b]);
        }
        Ok((g, failures))
    }

    pub fn minimality_report(&self) -> Result<ProjReport> {
        let (g, closure_failures) = self.graph()?;
        let collapse = self.collapse_check()?;
        Ok(ProjReport {
            prime: self.prime,
            n: self.group.level(),
            w: self.window,
            m: self.m,
            states: g.node_count(),
            strongly_connected: g.is_strongly_connected() && closure_failures == 0,
            proximal: collapse.collapses,
            collapsed_type: collapse.collapsed_type.clone(),
            closure_failures,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CollapseReport {
    pub states: usize,
    pub collapses: bool,
    pub collapsed_type: Option<ProjTruncType>,
    pub p0_lands_at_infinity: bool,
    pub q0_constant_at_infinity: bool,
    pub boundary_inputs: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjReport {
    pub prime: Prime,
    pub n: u32,
    pub w: u32,
    pub m: u32,
    pub states: usize,
    pub strongly_connected: bool,
    pub proximal: bool,
    pub collapsed_type: Option<ProjTruncType>,
    pub closure_failures: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::rat;

    fn space(n: u32, w: u32) -> ProjSpace {
        ProjSpace::new(
            Prime::new(5).unwrap(),
            n,
            w,
            1,
            ScaleLadder::new(8, w, 6).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn state_counts() {
        assert_eq!(space(2, 2).states().len(), 120);
        assert_eq!(space(1, 1).states().len(), 6);
        assert_eq!(space(2, 2).all_types().len(), 150);
    }

    #[test]
    fn action_examples() {
        let s = space(2, 2);
        let p = s.prime();
        let c = s.group().classes();
        let t = ProjTruncType::Near(ProjPoint::Finite(rat(0)), c.class_of_int(2).unwrap());
        assert_eq!(s.act(&Mat2::identity(p), &t).unwrap(), t);
        let shift = Mat2::from_ints(p, [[1, 1], [0, 1]]);
        assert_eq!(
            s.act(&shift, &t).unwrap(),
            ProjTruncType::Near(ProjPoint::Finite(rat(1)), c.class_of_int(2).unwrap())
        );
        let w = Mat2::from_ints(p, [[0, -1], [1, 0]]);
        let t1 = ProjTruncType::Near(ProjPoint::Finite(rat(0)), c.identity());
        let got = s.act(&w, &t1).unwrap();
        assert_eq!(got, s.oracle_act(&w, &t1).unwrap());
        assert_eq!(
            got,
            ProjTruncType::Near(ProjPoint::Infinity, c.class_of_int(-1).unwrap())
        );
    }

    #[test]
    fn operator_examples() {
        let s = space(2, 2);
        let c = s.group().classes();
        let inf_id = ProjTruncType::Near(ProjPoint::Infinity, c.identity());
        assert_eq!(
            s.p0_star(&ProjTruncType::Realized(ProjPoint::Finite(rat(0))))
                .unwrap(),
            inf_id
        );
        let inf = ProjTruncType::Realized(ProjPoint::Infinity);
        assert_eq!(s.p0_star(&inf).unwrap(), inf);
        let near3 = ProjTruncType::Near(ProjPoint::Finite(rat(3)), c.class_of_int(2).unwrap());
        assert_eq!(s.p0_star(&near3).unwrap(), inf_id);
        let q = s.q0_infinity().unwrap();
        for k in [1, 10] {
            let t = ProjTruncType::Near(ProjPoint::Infinity, c.class_of_int(k).unwrap());
            assert_eq!(s.q0_star(&t).unwrap(), q);
        }
        assert_eq!(q, inf_id);
    }

    #[test]
    fn collapse_and_minimality() {
        for (n, w) in [(1, 1), (2, 2)] {
            let s = space(n, w);
            let r = s.collapse_check().unwrap();
            assert!(r.collapses && r.p0_lands_at_infinity && r.q0_constant_at_infinity);
            let m = s.minimality_report().unwrap();
            assert!(m.strongly_connected && m.proximal);
            assert_eq!(m.closure_failures, 0);
        }
        assert!(space(2, 2).collapse_over(&[]).unwrap().collapses);
    }
}
