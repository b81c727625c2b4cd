//! The Borel group B(Q_p) as pairs `(a, c)`, its type `p0` and the group `J` at level n.

use std::fmt;

use malachite_base::num::arithmetic::traits::Reciprocal;
use malachite_base::num::basic::traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::padic::{format_rational, Config, Mat2, Prime, Rational, Valuation};
use crate::residues::{build_group, verify_group_table, PowerClasses, ResidueClass, ResidueGroup};
use crate::types1::{multiple_at_least, small_in_class, ScaleLadder};

/// `[[a, c], [0, 1/a]]`, written `(a, c)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BorelElem {
    a: Rational,
    c: Rational,
}

impl BorelElem {
    pub fn new(a: Rational, c: Rational) -> Result<Self> {
        if a == 0u32 {
            return Err(Error::ZeroInput);
        }
        Ok(BorelElem { a, c })
    }

    pub fn identity() -> Self {
        BorelElem {
            a: Rational::ONE,
            c: Rational::ZERO,
        }
    }

    pub fn a(&self) -> &Rational {
        &self.a
    }

    pub fn c(&self) -> &Rational {
        &self.c
    }

    /// `(a, c)(alpha, beta) = (a alpha, a beta + c / alpha)`.
    pub fn mul(&self, rhs: &BorelElem) -> BorelElem {
        BorelElem {
            a: &self.a * &rhs.a,
            c: &self.a * &rhs.c + &self.c / &rhs.a,
        }
    }

    pub fn inv(&self) -> BorelElem {
        BorelElem {
            a: (&self.a).reciprocal(),
            c: -&self.c,
        }
    }

    pub fn to_matrix(&self, prime: Prime) -> Mat2 {
        Mat2::new(
            prime,
            [
                [self.a.clone(), self.c.clone()],
                [Rational::ZERO, (&self.a).reciprocal()],
            ],
        )
    }

    /// Reads an upper-triangular matrix of determinant 1.
    pub fn from_matrix(m: &Mat2) -> Result<Self> {
        if !m.is_upper_triangular() {
            return Err(Error::Precondition(format!("{m} is not upper triangular")));
        }
        if !m.is_sl2() {
            return Err(Error::NotUnimodular(format_rational(&m.det())));
        }
        BorelElem::new(m.get(0, 0).clone(), m.get(0, 1).clone())
    }
}

impl fmt::Display for BorelElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {})",
            format_rational(&self.a),
            format_rational(&self.c)
        )
    }
}

/// A point of `J` at level n: the translate of `p0` by any `(a, c)` with `a` in the class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BorelTruncType {
    pub a_class: ResidueClass,
}

impl BorelTruncType {
    pub fn new(a_class: ResidueClass) -> Self {
        BorelTruncType { a_class }
    }
}

impl fmt::Display for BorelTruncType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p0[{}]", self.a_class)
    }
}

/// Witness `(rep alpha, rep beta)` with `alpha = p^e`, `e` the least multiple of n at
/// least `alpha_rung`, and `beta = p^-f`, `f` the least multiple of n at least `beta_rung`.
pub fn borel_witness_at(t: &BorelTruncType, alpha_rung: u64, beta_rung: u64) -> BorelElem {
    let c = &t.a_class;
    let n = c.level();
    let rep = c.rep_rational();
    let beta = c.prime().pow(-(multiple_at_least(n, beta_rung) as i64));
    BorelElem {
        a: small_in_class(c, alpha_rung),
        c: rep * beta,
    }
}

/// Witness on rungs `from` (for `alpha`) and `from + 1` (for `beta`). The later
/// rung carries `beta`: `v(beta)` lies below every value definable from `alpha`.
pub fn borel_witness(t: &BorelTruncType, ladder: &ScaleLadder, from: usize) -> Result<BorelElem> {
    let r = ladder.take(from, 2)?;
    Ok(borel_witness_at(t, r[0], r[1]))
}

/// Recovers the `J`-point of a witness, checking it has the shape of a translate of `p0`:
/// `a` infinitesimal, `c` at infinity beyond `v(a) + w`, both in the same class.
pub fn classify_borel(
    h: &BorelElem,
    classes: &PowerClasses,
    window: u32,
) -> Result<BorelTruncType> {
    let p = classes.prime();
    let w = window as i64;
    let va = match p.valuation(&h.a) {
        Valuation::Finite(v) if v > w => v,
        _ => return Err(Error::OutsideFamily(format!("{h}: a is not near 0"))),
    };
    let vc = match p.valuation(&h.c) {
        Valuation::Finite(v) if v < -(va + w) => v,
        _ => return Err(Error::OutsideFamily(format!("{h}: c does not dominate a"))),
    };
    debug_assert!(vc < -w);
    let ca = classes.class_of(&h.a)?;
    let cc = classes.class_of(&h.c)?;
    if ca != cc {
        return Err(Error::OutsideFamily(format!(
            "{h}: class of a is {ca}, class of c is {cc}"
        )));
    }
    Ok(BorelTruncType::new(ca))
}

/// `s * t`: `s` realized on rungs `from, from+1`, `t` on the two rungs above.
pub fn star_b_from(
    s: &BorelTruncType,
    t: &BorelTruncType,
    ladder: &ScaleLadder,
    from: usize,
    classes: &PowerClasses,
) -> Result<BorelTruncType> {
    let x = borel_witness(s, ladder, from)?;
    let y = borel_witness(t, ladder, from + 2)?;
    classify_borel(&x.mul(&y), classes, ladder.window())
}

pub fn star_b(
    s: &BorelTruncType,
    t: &BorelTruncType,
    ladder: &ScaleLadder,
    classes: &PowerClasses,
) -> Result<BorelTruncType> {
    star_b_from(s, t, ladder, 0, classes)
}

/// Left translate of `t` by a standard element, computed on a witness.
pub fn left_translate_b(
    g: &BorelElem,
    t: &BorelTruncType,
    ladder: &ScaleLadder,
    classes: &PowerClasses,
) -> Result<BorelTruncType> {
    let scale = max_abs_valuation(g, classes.prime());
    let from = ladder.first_at_least(ladder.window() as u64 + scale + 1)?;
    let h = borel_witness(t, ladder, from)?;
    classify_borel(&g.mul(&h), classes, ladder.window())
}

fn max_abs_valuation(g: &BorelElem, p: Prime) -> u64 {
    [&g.a, &g.c]
        .iter()
        .filter_map(|x| p.valuation(x).finite())
        .map(|v| v.unsigned_abs())
        .max()
        .unwrap_or(0)
}

/// `J` at level n with the table of `star_b`.
#[derive(Clone, Debug)]
pub struct BorelJ {
    group: ResidueGroup,
    elements: Vec<BorelTruncType>,
    table: Vec<Vec<usize>>,
}

impl BorelJ {
    pub fn build(config: &Config, ladder: &ScaleLadder) -> Result<Self> {
        let group = build_group(config.prime, config.residue_level)?;
        let elements: Vec<BorelTruncType> = group
            .elements()
            .iter()
            .map(|c| BorelTruncType::new(*c))
            .collect();
        let mut table = vec![vec![0; elements.len()]; elements.len()];
        for (i, s) in elements.iter().enumerate() {
            for (j, t) in elements.iter().enumerate() {
                let prod = star_b(s, t, ladder, group.classes())?;
                table[i][j] = group
                    .index_of(&prod.a_class)
                    .expect("classes are drawn from the group");
            }
        }
        Ok(BorelJ {
            group,
            elements,
            table,
        })
    }

    pub fn elements(&self) -> &[BorelTruncType] {
        &self.elements
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn residue_group(&self) -> &ResidueGroup {
        &self.group
    }

    fn identity_index(&self) -> usize {
        self.group.index_of(&self.group.identity()).unwrap()
    }

    /// `p0 * p0 = p0`.
    pub fn idempotent_check(&self) -> bool {
        let e = self.identity_index();
        self.table[e][e] == e
    }

    pub fn is_group(&self) -> bool {
        verify_group_table(&self.table, self.identity_index())
    }

    /// `a_class` is a homomorphism onto the residue group (bijective by construction).
    pub fn iso_to_residue_group(&self) -> bool {
        self.table == self.group.table()
    }

    pub fn report(&self) -> BorelReport {
        let name = |k: usize| self.elements[k].a_class.to_string();
        BorelReport {
            prime: self.group.prime(),
            n: self.group.level(),
            order: self.order(),
            elements: (0..self.order()).map(name).collect(),
            table: self
                .table
                .iter()
                .map(|row| row.iter().map(|&k| name(k)).collect())
                .collect(),
            idempotent_check: self.idempotent_check(),
            is_group: self.is_group(),
            iso_to_residue_group: self.iso_to_residue_group(),
            cyclic: self.group.is_cyclic(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BorelReport {
    pub prime: Prime,
    pub n: u32,
    pub order: usize,
    pub elements: Vec<String>,
    pub table: Vec<Vec<String>>,
    pub idempotent_check: bool,
    pub is_group: bool,
    pub iso_to_residue_group: bool,
    pub cyclic: bool,
}

/// Default ladder for a configuration: six rungs from just above the window.
pub fn default_ladder(config: &Config) -> Result<ScaleLadder> {
    ScaleLadder::new(config.ladder_gap.max(2), config.window, 6)
}
