//! Truncated complete 1-types over Q_p and their rational witnesses.

use std::fmt;

use serde::ser::SerializeMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::padic::{format_rational, Prime, Rational, Valuation};
use crate::residues::{PowerClasses, ResidueClass};

/// A 1-type at finite resolution: realized, infinitesimally near a base point
/// with a class tag on `x - a`, or at infinity with the class of `x`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TruncType1 {
    Realized(Rational),
    Near(Rational, ResidueClass),
    AtInfinity(ResidueClass),
}

impl TruncType1 {
    pub fn base(&self) -> Option<&Rational> {
        match self {
            TruncType1::Realized(a) | TruncType1::Near(a, _) => Some(a),
            TruncType1::AtInfinity(_) => None,
        }
    }

    pub fn class(&self) -> Option<ResidueClass> {
        match self {
            TruncType1::Realized(_) => None,
            TruncType1::Near(_, c) | TruncType1::AtInfinity(c) => Some(*c),
        }
    }

    pub fn is_realized(&self) -> bool {
        matches!(self, TruncType1::Realized(_))
    }

    pub fn is_near(&self) -> bool {
        matches!(self, TruncType1::Near(..))
    }

    pub fn is_at_infinity(&self) -> bool {
        matches!(self, TruncType1::AtInfinity(_))
    }
}

impl fmt::Display for TruncType1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruncType1::Realized(a) => write!(f, "realized({})", format_rational(a)),
            TruncType1::Near(a, c) => write!(f, "near({}, {})", format_rational(a), c),
            TruncType1::AtInfinity(c) => write!(f, "at_infinity({c})"),
        }
    }
}

impl Serialize for TruncType1 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        match self {
            TruncType1::Realized(a) => {
                map.serialize_entry("kind", "realized")?;
                map.serialize_entry("value", &format_rational(a))?;
            }
            TruncType1::Near(a, c) => {
                map.serialize_entry("kind", "near")?;
                map.serialize_entry("base", &format_rational(a))?;
                map.serialize_entry("class", c)?;
                map.serialize_entry("n", &c.level())?;
            }
            TruncType1::AtInfinity(c) => {
                map.serialize_entry("kind", "at_infinity")?;
                map.serialize_entry("class", c)?;
                map.serialize_entry("n", &c.level())?;
            }
        }
        map.end()
    }
}

/// Strictly separated valuation magnitudes. A witness placed on a later rung
/// dominates every scale derived from earlier rungs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScaleLadder {
    rungs: Vec<u64>,
    gap: u64,
    window: u32,
}

impl ScaleLadder {
    /// Ladder starting just above the window: `r_0 = w + 1`, `r_{i+1} = gap (r_i + w)`.
    pub fn new(gap: u64, window: u32, len: usize) -> Result<Self> {
        Self::starting_at(window as u64 + 1, gap, window, len)
    }

    pub fn starting_at(first: u64, gap: u64, window: u32, len: usize) -> Result<Self> {
        if gap < 2 {
            return Err(Error::InvalidLadder(format!(
                "gap {gap} must be at least 2"
            )));
        }
        let mut rungs = Vec::with_capacity(len);
        let mut r = first;
        for _ in 0..len {
            rungs.push(r);
            r = gap
                .checked_mul(r + window as u64)
                .ok_or_else(|| Error::InvalidLadder("rung magnitude overflows".into()))?;
        }
        Self::from_rungs(rungs, gap, window)
    }

    /// Validates an explicit list of rungs against the separation rule.
    pub fn from_rungs(rungs: Vec<u64>, gap: u64, window: u32) -> Result<Self> {
        if rungs.first().is_some_and(|&r| r <= window as u64) {
            return Err(Error::InvalidLadder(format!(
                "first rung {} must exceed the window {window}",
                rungs[0]
            )));
        }
        for pair in rungs.windows(2) {
            let need = gap.saturating_mul(pair[0] + window as u64);
            if pair[1] < need {
                return Err(Error::InvalidLadder(format!(
                    "rung {} is below {gap} * ({} + {window})",
                    pair[1], pair[0]
                )));
            }
        }
        Ok(ScaleLadder { rungs, gap, window })
    }

    pub fn rungs(&self) -> &[u64] {
        &self.rungs
    }

    pub fn len(&self) -> usize {
        self.rungs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rungs.is_empty()
    }

    pub fn gap(&self) -> u64 {
        self.gap
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn rung(&self, i: usize) -> Result<u64> {
        self.rungs.get(i).copied().ok_or(Error::LadderExhausted {
            need: 1,
            from: i,
            have: self.rungs.len(),
        })
    }

    /// `need` consecutive rungs starting at index `from`.
    pub fn take(&self, from: usize, need: usize) -> Result<&[u64]> {
        self.rungs
            .get(from..from + need)
            .ok_or(Error::LadderExhausted {
                need,
                from,
                have: self.rungs.len(),
            })
    }

    /// Same ladder with every magnitude doubled (still separated).
    pub fn doubled(&self) -> Self {
        ScaleLadder {
            rungs: self.rungs.iter().map(|r| 2 * r).collect(),
            gap: self.gap,
            window: self.window,
        }
    }

    /// Index of the first rung at least `bound`.
    pub fn first_at_least(&self, bound: u64) -> Result<usize> {
        self.rungs
            .iter()
            .position(|&r| r >= bound)
            .ok_or(Error::LadderExhausted {
                need: 1,
                from: self.rungs.len(),
                have: self.rungs.len(),
            })
    }
}

/// Least multiple of `n` that is at least `r`.
pub fn multiple_at_least(n: u32, r: u64) -> u64 {
    r.div_ceil(n as u64) * n as u64
}

/// `rep(C) * p^e` with `e` the least multiple of `n` at least `magnitude`:
/// an element of `C` with valuation `v(rep) + e`.
pub fn small_in_class(c: &ResidueClass, magnitude: u64) -> Rational {
    let e = multiple_at_least(c.level(), magnitude);
    c.rep_rational() * c.prime().pow(e as i64)
}

/// An element of `C` with valuation at most `-magnitude`.
pub fn large_in_class(c: &ResidueClass, magnitude: u64) -> Rational {
    let e = multiple_at_least(c.level(), magnitude + c.exp() as u64);
    c.rep_rational() * c.prime().pow(-(e as i64))
}

/// Witness for `t` at the given valuation magnitude.
pub fn realize_at(t: &TruncType1, magnitude: u64) -> Rational {
    match t {
        TruncType1::Realized(a) => a.clone(),
        TruncType1::Near(a, c) => a + small_in_class(c, magnitude),
        TruncType1::AtInfinity(c) => large_in_class(c, magnitude),
    }
}

/// Witness for `t` on rung `index` of the ladder.
pub fn realize(t: &TruncType1, index: usize, ladder: &ScaleLadder) -> Result<Rational> {
    Ok(realize_at(t, ladder.rung(index)?))
}

/// Finite set of p-adically separated base points at resolution `w`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseSet {
    points: Vec<Rational>,
    window: u32,
    prime: Prime,
}

impl BaseSet {
    /// Requires distinct points with `v(a - b) <= w` pairwise and `v(a) >= -w`.
    pub fn new(points: Vec<Rational>, window: u32, prime: Prime) -> Result<Self> {
        let w = window as i64;
        for (i, a) in points.iter().enumerate() {
            if let Valuation::Finite(v) = prime.valuation(a) {
                if v < -w {
                    return Err(Error::BadBaseSet(format!(
                        "{} lies beyond the window at infinity",
                        format_rational(a)
                    )));
                }
            }
            for b in &points[..i] {
                match prime.valuation(&(a - b)) {
                    Valuation::Infinite => {
                        return Err(Error::BadBaseSet(format!(
                            "duplicate point {}",
                            format_rational(a)
                        )))
                    }
                    Valuation::Finite(v) if v > w => {
                        return Err(Error::BadBaseSet(format!(
                            "{} and {} are not separated at window {window}",
                            format_rational(a),
                            format_rational(b)
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(BaseSet {
            points,
            window,
            prime,
        })
    }

    /// Integers `0..count`.
    pub fn integers(count: u64, window: u32, prime: Prime) -> Result<Self> {
        Self::new((0..count).map(Rational::from).collect(), window, prime)
    }

    /// `{0, 1, ..., p^w - 1}`, the residues of Z_p at resolution `w`.
    pub fn zp_residues(window: u32, prime: Prime) -> Result<Self> {
        let count = prime
            .checked_pow(window)
            .ok_or_else(|| Error::LevelOutOfBounds("p^w overflows".into()))?;
        Self::integers(count, window, prime)
    }

    pub fn points(&self) -> &[Rational] {
        &self.points
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn contains(&self, a: &Rational) -> bool {
        self.points.contains(a)
    }
}

/// Classifies a rational witness against base points at window `w`.
pub fn classify(x: &Rational, bases: &BaseSet, classes: &PowerClasses) -> Result<TruncType1> {
    let prime = bases.prime;
    let w = bases.window as i64;
    if bases.contains(x) {
        return Ok(TruncType1::Realized(x.clone()));
    }
    if let Valuation::Finite(v) = prime.valuation(x) {
        if v < -w {
            return Ok(TruncType1::AtInfinity(classes.class_of(x)?));
        }
    }
    let mut near: Option<&Rational> = None;
    for a in &bases.points {
        if prime.valuation(&(x - a)) > Valuation::Finite(w) {
            if let Some(b) = near {
                return Err(Error::WindowTooCoarse(
                    format_rational(b),
                    format_rational(a),
                    format_rational(x),
                ));
            }
            near = Some(a);
        }
    }
    match near {
        Some(a) => Ok(TruncType1::Near(a.clone(), classes.class_of(&(x - a))?)),
        None => Ok(TruncType1::Realized(x.clone())),
    }
}

/// Every type over the base set: realized base points, `Near(a, C)` and `AtInfinity(C)`.
pub fn enumerate_types(bases: &BaseSet, classes: &[ResidueClass]) -> Vec<TruncType1> {
    let mut out: Vec<TruncType1> = bases
        .points
        .iter()
        .map(|a| TruncType1::Realized(a.clone()))
        .collect();
    out.extend(enumerate_nonrealized(bases, classes));
    out
}

/// The `(|base| + 1) * |classes|` nonrealized types over the base set.
pub fn enumerate_nonrealized(bases: &BaseSet, classes: &[ResidueClass]) -> Vec<TruncType1> {
    let mut out = Vec::with_capacity((bases.points.len() + 1) * classes.len());
    for a in &bases.points {
        for c in classes {
            out.push(TruncType1::Near(a.clone(), *c));
        }
    }
    out.extend(classes.iter().map(|c| TruncType1::AtInfinity(*c)));
    out
}

/// `classify(realize(t, r)) == t` for every rung after the first.
pub fn roundtrip_check(
    t: &TruncType1,
    bases: &BaseSet,
    ladder: &ScaleLadder,
    classes: &PowerClasses,
) -> Result<bool> {
    for &r in ladder.rungs().iter().skip(1) {
        if classify(&realize_at(t, r), bases, classes)? != *t {
            return Ok(false);
        }
    }
    Ok(true)
}
