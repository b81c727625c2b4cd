//! The finite groups Q_p^* / (Q_p^*)^n.
//!
//! A unit `u` is an n-th power in Z_p^* exactly when it is one modulo
//! `p^(2 v_p(n) + 1)` (Hensel), so every class is decided by a residue at that
//! precision together with the valuation modulo `n`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_integer::Integer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::padic::{
    check_residue_level, mod_inverse, mul_mod, pow_mod, val_u64, PadicNumber, Prime, Rational,
    Valuation,
};

/// Residue tables above this modulus are replaced by on-demand search.
const TABLE_LIMIT: u64 = 1 << 20;

/// A class of `Q_p^* / (Q_p^*)^n`, stored by its canonical representative
/// `unit * p^exp` with `0 <= exp < n` and `unit` the least positive integer unit in the class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ResidueClass {
    level: u32,
    prime: Prime,
    unit: u64,
    exp: u32,
    rep: u64,
}

impl ResidueClass {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    /// Canonical integer representative.
    pub fn representative(&self) -> u64 {
        self.rep
    }

    pub fn rep_rational(&self) -> Rational {
        Rational::from(self.rep)
    }

    pub fn unit(&self) -> u64 {
        self.unit
    }

    /// Valuation of the representative, i.e. the valuation modulo `n`.
    pub fn exp(&self) -> u32 {
        self.exp
    }

    pub fn is_identity(&self) -> bool {
        self.rep == 1
    }
}

impl PartialOrd for ResidueClass {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ResidueClass {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.level, self.rep).cmp(&(other.level, other.rep))
    }
}

impl fmt::Display for ResidueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.rep)
    }
}

impl Serialize for ResidueClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.rep.to_string())
    }
}

/// Membership and canonicalization for the n-th power classes at one prime.
#[derive(Clone, Debug)]
pub struct PowerClasses {
    prime: Prime,
    n: u32,
    precision: u32,
    modulus: u64,
    euler_exponent: Option<u64>,
    powers: Option<Vec<bool>>,
    canonical: Option<Vec<u32>>,
}

impl PowerClasses {
    pub fn new(prime: Prime, n: u32) -> Result<Self> {
        check_residue_level(prime, n)?;
        let p = prime.get();
        let precision = 2 * val_u64(n as u64, p) + 1;
        let modulus = prime
            .checked_pow(precision)
            .ok_or_else(|| Error::LevelOutOfBounds("Hensel modulus overflows".into()))?;
        let coprime = (n as u64) % p != 0;
        let euler_exponent = coprime.then(|| (p - 1) / (n as u64).gcd(&(p - 1)));
        let powers = (!coprime).then(|| {
            let mut set = vec![false; modulus as usize];
            for y in 1..modulus {
                if y % p != 0 {
                    set[pow_mod(y, n as u64, modulus) as usize] = true;
                }
            }
            set
        });
        let mut classes = PowerClasses {
            prime,
            n,
            precision,
            modulus,
            euler_exponent,
            powers,
            canonical: None,
        };
        if modulus <= TABLE_LIMIT {
            let canon = (0..modulus)
                .map(|r| {
                    if r % p == 0 {
                        0
                    } else {
                        classes.search_canonical_unit(r) as u32
                    }
                })
                .collect();
            classes.canonical = Some(canon);
        }
        Ok(classes)
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn level(&self) -> u32 {
        self.n
    }

    /// Exponent `k` of the Hensel modulus `p^k`.
    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Whether the unit residue `r` (mod `p^k`) is an n-th power residue.
    pub fn unit_residue_is_power(&self, r: u64) -> bool {
        debug_assert!(r % self.prime.get() != 0);
        match (&self.powers, self.euler_exponent) {
            (Some(set), _) => set[(r % self.modulus) as usize],
            (None, Some(e)) => pow_mod(r, e, self.modulus) == 1 % self.modulus,
            (None, None) => unreachable!(),
        }
    }

    fn search_canonical_unit(&self, r: u64) -> u64 {
        let p = self.prime.get();
        let r_inv = mod_inverse(r % self.modulus, self.modulus).expect("unit residue");
        (1..)
            .filter(|u| u % p != 0)
            .find(|&u| self.unit_residue_is_power(mul_mod(u % self.modulus, r_inv, self.modulus)))
            .expect("the residue itself is a candidate")
    }

    fn canonical_unit(&self, r: u64) -> u64 {
        match &self.canonical {
            Some(table) => table[r as usize] as u64,
            None => self.search_canonical_unit(r),
        }
    }

    /// Class with unit residue `r` (mod `p^k`) and valuation `v`.
    pub fn from_parts(&self, r: u64, v: i64) -> ResidueClass {
        let unit = self.canonical_unit(r % self.modulus);
        let exp = v.rem_euclid(self.n as i64) as u32;
        let rep = unit * self.prime.checked_pow(exp).expect("bounded by level check");
        ResidueClass {
            level: self.n,
            prime: self.prime,
            unit,
            exp,
            rep,
        }
    }

    fn split(&self, x: &Rational) -> Result<(u64, i64)> {
        let (num, den) = x.numerator_and_denominator_ref();
        if let (Ok(a), Ok(b)) = (i64::try_from(num), u64::try_from(den)) {
            return self.split_small(if *x < 0u32 { -a } else { a }, b);
        }
        let v = match self.prime.valuation(x) {
            Valuation::Infinite => return Err(Error::ZeroInput),
            Valuation::Finite(v) => v,
        };
        let unit = self.prime.unit_part(x)?;
        let r = self
            .prime
            .residue(&unit, self.precision)
            .expect("unit part has valuation zero");
        Ok((r, v))
    }

    fn split_small(&self, a: i64, b: u64) -> Result<(u64, i64)> {
        if a == 0 {
            return Err(Error::ZeroInput);
        }
        let p = self.prime.get();
        let q = self.modulus;
        let (va, vb) = (val_u64(a.unsigned_abs(), p), val_u64(b, p));
        let ua = a.unsigned_abs() / p.pow(va) % q;
        let num = if a < 0 { (q - ua) % q } else { ua };
        let den = b / p.pow(vb) % q;
        let r = mul_mod(num, mod_inverse(den, q).expect("unit denominator"), q);
        Ok((r, va as i64 - vb as i64))
    }

    /// Whether `x` lies in `(Q_p^*)^n`.
    pub fn is_nth_power(&self, x: &Rational) -> Result<bool> {
        let (r, v) = self.split(x)?;
        Ok(v.rem_euclid(self.n as i64) == 0 && self.unit_residue_is_power(r))
    }

    pub fn class_of(&self, x: &Rational) -> Result<ResidueClass> {
        let (r, v) = self.split(x)?;
        Ok(self.from_parts(r, v))
    }

    pub fn identity(&self) -> ResidueClass {
        self.from_parts(1, 0)
    }

    pub fn mul(&self, a: &ResidueClass, b: &ResidueClass) -> ResidueClass {
        let r = mul_mod(a.unit % self.modulus, b.unit % self.modulus, self.modulus);
        self.from_parts(r, a.exp as i64 + b.exp as i64)
    }

    pub fn inv(&self, a: &ResidueClass) -> ResidueClass {
        let r = mod_inverse(a.unit % self.modulus, self.modulus).expect("unit");
        self.from_parts(r, -(a.exp as i64))
    }

    /// Class of a machine integer (nonzero).
    pub fn class_of_int(&self, x: i64) -> Result<ResidueClass> {
        self.class_of(&Rational::from(x))
    }
}

/// Whether `x` is an n-th power in Q_p.
pub fn is_nth_power(x: &PadicNumber, n: u32) -> Result<bool> {
    if n == 0 {
        return Err(Error::LevelOutOfBounds("n must be at least 1".into()));
    }
    PowerClasses::new(x.prime(), n)?.is_nth_power(x.value())
}

pub fn class_of(x: &PadicNumber, n: u32) -> Result<ResidueClass> {
    PowerClasses::new(x.prime(), n)?.class_of(x.value())
}

/// `Q_p^* / (Q_p^*)^n` with its full multiplication table.
#[derive(Clone, Debug)]
pub struct ResidueGroup {
    classes: PowerClasses,
    elements: Vec<ResidueClass>,
    index: HashMap<ResidueClass, usize>,
    table: Vec<Vec<usize>>,
}

impl ResidueGroup {
    pub fn classes(&self) -> &PowerClasses {
        &self.classes
    }

    pub fn level(&self) -> u32 {
        self.classes.n
    }

    pub fn prime(&self) -> Prime {
        self.classes.prime
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[ResidueClass] {
        &self.elements
    }

    pub fn index_of(&self, c: &ResidueClass) -> Option<usize> {
        self.index.get(c).copied()
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    pub fn mul(&self, a: &ResidueClass, b: &ResidueClass) -> ResidueClass {
        let (i, j) = (self.index[a], self.index[b]);
        self.elements[self.table[i][j]]
    }

    pub fn identity(&self) -> ResidueClass {
        self.classes.identity()
    }

    /// Exhaustive check of closure, identity, inverses and associativity.
    pub fn verify_axioms(&self) -> bool {
        verify_group_table(&self.table, self.index[&self.identity()])
    }

    /// Whether the group is cyclic (some element has order equal to the group order).
    pub fn is_cyclic(&self) -> bool {
        let e = self.index[&self.identity()];
        (0..self.order()).any(|g| element_order(&self.table, e, g) == self.order())
    }

    /// Multiset of element orders, sorted; a cheap isomorphism invariant for abelian groups.
    pub fn order_profile(&self) -> Vec<usize> {
        let e = self.index[&self.identity()];
        let mut v: Vec<usize> = (0..self.order())
            .map(|g| element_order(&self.table, e, g))
            .collect();
        v.sort_unstable();
        v
    }
}

pub(crate) fn element_order(table: &[Vec<usize>], e: usize, g: usize) -> usize {
    let mut x = g;
    let mut k = 1;
    while x != e {
        x = table[x][g];
        k += 1;
    }
    k
}

/// Exhaustive group-axiom check on an index table with identity `e`.
pub fn verify_group_table(table: &[Vec<usize>], e: usize) -> bool {
    let n = table.len();
    if table
        .iter()
        .any(|row| row.len() != n || row.iter().any(|&x| x >= n))
    {
        return false;
    }
    let identity = (0..n).all(|a| table[e][a] == a && table[a][e] == a);
    let inverses = (0..n).all(|a| (0..n).any(|b| table[a][b] == e && table[b][a] == e));
    let assoc = (0..n)
        .all(|a| (0..n).all(|b| (0..n).all(|c| table[table[a][b]][c] == table[a][table[b][c]])));
    identity && inverses && assoc
}

/// Builds the group by classifying every candidate `u * p^e` (u a unit below the
/// Hensel modulus, `0 <= e < n`) and tabulating products of representatives.
pub fn build_group(prime: Prime, n: u32) -> Result<ResidueGroup> {
    let classes = PowerClasses::new(prime, n)?;
    let p = prime.get();
    let mut found = BTreeSet::new();
    for e in 0..n {
        let pe = prime.pow(e as i64);
        for u in (1..classes.modulus).filter(|u| u % p != 0) {
            let x = Rational::from(u) * &pe;
            found.insert(classes.class_of(&x)?);
        }
    }
    let elements: Vec<ResidueClass> = found.into_iter().collect();
    let index: HashMap<ResidueClass, usize> =
        elements.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let mut table = vec![vec![0; elements.len()]; elements.len()];
    for (i, a) in elements.iter().enumerate() {
        for (j, b) in elements.iter().enumerate() {
            let prod = classes.class_of(&(a.rep_rational() * b.rep_rational()))?;
            table[i][j] = index[&prod];
        }
    }
    let group = ResidueGroup {
        classes,
        elements,
        index,
        table,
    };
    if !group.verify_axioms() {
        return Err(Error::Degenerate(format!(
            "residue table at p = {prime}, n = {n} fails the group axioms"
        )));
    }
    Ok(group)
}

/// The map `class -> v(representative) mod n`.
#[derive(Clone, Debug, Serialize)]
pub struct ValuationMap {
    pub level: u32,
    pub values: BTreeMap<ResidueClass, u32>,
    pub kernel: Vec<ResidueClass>,
    pub injective: bool,
    pub surjective: bool,
}

pub fn induced_valuation_map(group: &ResidueGroup) -> ValuationMap {
    let values: BTreeMap<ResidueClass, u32> = group.elements.iter().map(|c| (*c, c.exp)).collect();
    let kernel: Vec<ResidueClass> = group
        .elements
        .iter()
        .filter(|c| c.exp == 0)
        .copied()
        .collect();
    let image: BTreeSet<u32> = values.values().copied().collect();
    ValuationMap {
        level: group.level(),
        injective: kernel.len() == 1,
        surjective: image.len() == group.level() as usize,
        values,
        kernel,
    }
}

/// JSON shape printed by the `residues` subcommand.
#[derive(Clone, Debug, Serialize)]
pub struct ResidueReport {
    pub prime: Prime,
    pub n: u32,
    pub order: usize,
    pub representatives: Vec<String>,
    pub table: Vec<Vec<String>>,
    pub v_map: BTreeMap<String, u32>,
    pub v_map_kernel: Vec<String>,
    pub v_map_injective: bool,
    pub v_map_surjective: bool,
    pub axioms_hold: bool,
}

impl ResidueReport {
    pub fn new(group: &ResidueGroup) -> Self {
        let vmap = induced_valuation_map(group);
        let name = |c: &ResidueClass| c.to_string();
        ResidueReport {
            prime: group.prime(),
            n: group.level(),
            order: group.order(),
            representatives: group.elements.iter().map(name).collect(),
            table: group
                .table
                .iter()
                .map(|row| row.iter().map(|&k| name(&group.elements[k])).collect())
                .collect(),
            v_map: vmap.values.iter().map(|(c, v)| (name(c), *v)).collect(),
            v_map_kernel: vmap.kernel.iter().map(name).collect(),
            v_map_injective: vmap.injective,
            v_map_surjective: vmap.surjective,
            axioms_hold: group.verify_axioms(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{rat, ratio};

    fn p5() -> Prime {
        Prime::new(5).unwrap()
    }

    fn num(x: i64) -> PadicNumber {
        PadicNumber::from_int(x, p5())
    }

    #[test]
    fn nth_power_examples() {
        assert!(is_nth_power(&num(4), 2).unwrap());
        assert!(!is_nth_power(&num(5), 2).unwrap());
        assert!(is_nth_power(&num(6), 2).unwrap());
        assert_eq!(is_nth_power(&num(0), 2), Err(Error::ZeroInput));
    }

    #[test]
    fn six_is_a_square_mod_125() {
        // Independent check of the Hensel step: some y has y^2 ≡ 6 (mod 5^3).
        assert!((1..125u64).any(|y| (y * y) % 125 == 6));
    }

    #[test]
    fn class_examples() {
        assert!(class_of(&num(25), 2).unwrap().is_identity());
        assert_eq!(class_of(&num(10), 2).unwrap().representative(), 10);
        assert!(class_of(&num(54), 2).unwrap().is_identity());
        let pc = PowerClasses::new(p5(), 2).unwrap();
        assert_eq!(pc.class_of(&ratio(1, 10)).unwrap().representative(), 10);
        assert_eq!(pc.class_of(&rat(-1)).unwrap().representative(), 1);
    }

    #[test]
    fn group_examples() {
        let g1 = build_group(p5(), 1).unwrap();
        assert_eq!(g1.order(), 1);
        let g2 = build_group(p5(), 2).unwrap();
        let reps: Vec<u64> = g2.elements().iter().map(|c| c.representative()).collect();
        assert_eq!(reps, vec![1, 2, 5, 10]);
        assert!(!g2.is_cyclic());
        assert_eq!(g2.order_profile(), vec![1, 2, 2, 2]);
        let g3 = build_group(p5(), 3).unwrap();
        assert_eq!(g3.order(), 3);
        assert!(g3.is_cyclic());
    }

    #[test]
    fn valuation_map_examples() {
        let g2 = build_group(p5(), 2).unwrap();
        let vm = induced_valuation_map(&g2);
        let kernel: Vec<u64> = vm.kernel.iter().map(|c| c.representative()).collect();
        assert_eq!(kernel, vec![1, 2]);
        assert!(!vm.injective);
        let g1 = build_group(p5(), 1).unwrap();
        assert!(induced_valuation_map(&g1).injective);
        let vm3 = induced_valuation_map(&build_group(p5(), 3).unwrap());
        assert!(vm3.injective && vm3.surjective);
    }

    #[test]
    fn dyadic_squares() {
        // Q_2^* / squares has order 8.
        let g = build_group(Prime::new(2).unwrap(), 2).unwrap();
        assert_eq!(g.order(), 8);
        assert!(g.verify_axioms());
    }

    #[test]
    fn fast_multiplication_matches_table() {
        for n in 1..=6 {
            let g = build_group(p5(), n).unwrap();
            for a in g.elements() {
                for b in g.elements() {
                    assert_eq!(g.classes().mul(a, b), g.mul(a, b));
                }
                assert!(g.classes().mul(a, &g.classes().inv(a)).is_identity());
            }
        }
    }

    #[test]
    fn nth_powers_of_p_are_trivial() {
        for n in 1..=6u32 {
            let pc = PowerClasses::new(p5(), n).unwrap();
            for k in -4i64..=4 {
                let x = p5().pow(n as i64 * k);
                assert!(pc.class_of(&x).unwrap().is_identity());
            }
        }
    }
}
