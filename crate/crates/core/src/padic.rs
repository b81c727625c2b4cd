//! Exact p-adic arithmetic over the rationals.
//!
//! Every quantity is an exact [`Rational`]; the prime only enters through
//! valuations, unit parts and reductions modulo prime powers. Nothing here
//! ever approximates.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use malachite_base::num::arithmetic::traits::{DivExact, DivisibleBy, Pow, Reciprocal};
use malachite_base::num::basic::traits::{One, Zero};
use malachite_base::num::logic::traits::SignificantBits;
use malachite_nz::integer::Integer;
use malachite_nz::natural::Natural;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub use malachite_q::Rational;

/// Highest power-residue level accepted by [`Config`].
pub const MAX_RESIDUE_LEVEL: u32 = 12;
/// Highest congruence level accepted for SL(2, Z/p^m).
pub const MAX_MATRIX_LEVEL: u32 = 4;

/// A verified prime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prime(u64);

impl Prime {
    pub fn new(p: u64) -> Result<Self> {
        if is_prime(p) {
            Ok(Prime(p))
        } else {
            Err(Error::NotPrime(p))
        }
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }

    /// `p^e` for a non-negative exponent, as a machine integer if it fits.
    pub fn checked_pow(self, e: u32) -> Option<u64> {
        self.0.checked_pow(e)
    }

    pub fn pow_natural(self, e: u64) -> Natural {
        Natural::from(self.0).pow(e)
    }

    /// `p^e` for any integer exponent.
    pub fn pow(self, e: i64) -> Rational {
        let mag = self.pow_natural(e.unsigned_abs());
        if e >= 0 {
            Rational::from(mag)
        } else {
            Rational::from_naturals(Natural::ONE, mag)
        }
    }

    /// Exponent of `p` in a nonzero natural number.
    pub fn valuation_natural(self, n: &Natural) -> Valuation {
        if *n == 0u32 {
            return Valuation::Infinite;
        }
        Valuation::Finite(val_natural(n, self.0) as i64)
    }

    pub fn valuation(self, x: &Rational) -> Valuation {
        if *x == 0u32 {
            return Valuation::Infinite;
        }
        let (num, den) = x.numerator_and_denominator_ref();
        Valuation::Finite(val_natural(num, self.0) as i64 - val_natural(den, self.0) as i64)
    }

    /// `u` with `x = u * p^v(x)` and `v(u) = 0`.
    pub fn unit_part(self, x: &Rational) -> Result<Rational> {
        match self.valuation(x) {
            Valuation::Infinite => Err(Error::NoUnitPart),
            Valuation::Finite(v) => Ok(x * self.pow(-v)),
        }
    }

    /// Residue of `x` modulo `p^k` in `[0, p^k)`; `None` when `v(x) < 0`.
    ///
    /// Panics if `p^k` does not fit in a `u64`.
    pub fn residue(self, x: &Rational, k: u32) -> Option<u64> {
        let modulus = self.checked_pow(k).expect("modulus overflows u64");
        if modulus == 1 {
            return Some(0);
        }
        let (num, den) = x.numerator_and_denominator_ref();
        let den = natural_mod(den, modulus);
        if den % self.0 == 0 {
            // Fractions are kept reduced, so p divides the denominator only when v(x) < 0.
            return None;
        }
        let mut num = natural_mod(num, modulus);
        if *x < 0u32 && num != 0 {
            num = modulus - num;
        }
        let inv = mod_inverse(den, modulus).expect("unit denominator");
        Some(mul_mod(num, inv, modulus))
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Prime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u64(self.0)
    }
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    if p < 4 {
        return true;
    }
    if p % 2 == 0 {
        return false;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

fn val_natural(n: &Natural, p: u64) -> u64 {
    if let Ok(mut small) = u128::try_from(n) {
        let p = p as u128;
        let mut v = 0;
        while small % p == 0 {
            small /= p;
            v += 1;
        }
        return v;
    }
    let pn = Natural::from(p);
    if !n.divisible_by(&pn) {
        return 0;
    }
    // Strip p^(2^i) greedily from the largest power down.
    let mut powers = vec![pn];
    while powers.last().unwrap().significant_bits() * 2 <= n.significant_bits() + 1 {
        let last = powers.last().unwrap();
        let sq = last * last;
        powers.push(sq);
    }
    let mut m = n.clone();
    let mut v = 0u64;
    for (i, pw) in powers.iter().enumerate().rev() {
        while (&m).divisible_by(pw) {
            m = m.div_exact(pw);
            v += 1 << i;
        }
    }
    v
}

pub(crate) fn natural_mod(n: &Natural, modulus: u64) -> u64 {
    u64::try_from(&(n % Natural::from(modulus))).expect("remainder below a u64 modulus")
}

#[inline]
pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

pub(crate) fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    let (mut old_r, mut r) = (a as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// Exponent of `p` in a machine integer.
pub(crate) fn val_u64(mut n: u64, p: u64) -> u32 {
    debug_assert!(n != 0);
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// `v(0) = Infinite`, ordered above every finite value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Valuation {
    Finite(i64),
    Infinite,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Valuation::Infinite)
    }
}

impl Add for Valuation {
    type Output = Valuation;
    fn add(self, rhs: Valuation) -> Valuation {
        match (self, rhs) {
            (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a + b),
            _ => Valuation::Infinite,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Valuation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Valuation::Finite(v) => s.serialize_i64(*v),
            Valuation::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Parses `"num/den"` or `"num"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num = Integer::from_str(num).map_err(|_| bad())?;
    let den = Integer::from_str(den).map_err(|_| bad())?;
    if den == 0u32 {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::from_integers(num, den))
}

/// Prints `"num/den"`, or `"num"` for integers.
pub fn format_rational(x: &Rational) -> String {
    x.to_string()
}

pub(crate) fn rat(n: i64) -> Rational {
    Rational::from(n)
}

#[cfg(test)]
pub(crate) fn ratio(n: i64, d: i64) -> Rational {
    Rational::from_signeds(n, d)
}

pub mod rational_serde {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(x))
    }
}

/// Session parameters: the prime and the truncation dials.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Config {
    pub prime: Prime,
    /// Power-residue level `n`.
    pub residue_level: u32,
    /// Congruence level `m` for SL(2, Z/p^m).
    pub matrix_level: u32,
    /// Valuation window `w`.
    pub window: u32,
    /// Multiplicative separation between consecutive ladder rungs.
    pub ladder_gap: u64,
}

impl Config {
    pub fn new(prime: u64, n: u32, m: u32, w: u32, ladder_gap: u64) -> Result<Self> {
        let prime = Prime::new(prime)?;
        if n == 0 || m == 0 || w == 0 || ladder_gap == 0 {
            return Err(Error::LevelOutOfBounds(
                "all levels and the ladder gap must be positive".into(),
            ));
        }
        check_residue_level(prime, n)?;
        if m > MAX_MATRIX_LEVEL {
            return Err(Error::LevelOutOfBounds(format!(
                "matrix level {m} exceeds {MAX_MATRIX_LEVEL}"
            )));
        }
        if prime.checked_pow(m + w).is_none() {
            return Err(Error::LevelOutOfBounds(format!(
                "p^(m+w) = {prime}^{} overflows",
                m + w
            )));
        }
        Ok(Config {
            prime,
            residue_level: n,
            matrix_level: m,
            window: w,
            ladder_gap,
        })
    }

    pub fn with_gap(&self, gap: u64) -> Self {
        Config {
            ladder_gap: gap,
            ..self.clone()
        }
    }

    pub fn with_level(&self, n: u32) -> Result<Self> {
        Config::new(
            self.prime.get(),
            n,
            self.matrix_level,
            self.window,
            self.ladder_gap,
        )
    }
}

impl Default for Config {
    fn default() -> Self {
        Config::new(5, 2, 1, 2, 8).expect("default configuration is valid")
    }
}

/// Checks that classes at level `n` have machine-sized canonical representatives.
pub fn check_residue_level(prime: Prime, n: u32) -> Result<()> {
    if n == 0 || n > MAX_RESIDUE_LEVEL {
        return Err(Error::LevelOutOfBounds(format!(
            "residue level {n} outside 1..={MAX_RESIDUE_LEVEL}"
        )));
    }
    let k = 2 * val_u64(n as u64, prime.get()) + 1;
    match prime.checked_pow(k + n - 1) {
        Some(bound) if bound <= u32::MAX as u64 * 16 => Ok(()),
        _ => Err(Error::LevelOutOfBounds(format!(
            "class representatives at p = {prime}, n = {n} do not fit the table bound"
        ))),
    }
}

/// An exact rational viewed as an element of Q_p.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PadicNumber {
    value: Rational,
    prime: Prime,
}

impl PadicNumber {
    pub fn new(value: Rational, prime: Prime) -> Self {
        PadicNumber { value, prime }
    }

    pub fn from_int(n: i64, prime: Prime) -> Self {
        PadicNumber::new(rat(n), prime)
    }

    pub fn parse(s: &str, prime: Prime) -> Result<Self> {
        Ok(PadicNumber::new(parse_rational(s)?, prime))
    }

    pub fn value(&self) -> &Rational {
        &self.value
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0u32
    }

    pub fn valuation(&self) -> Valuation {
        self.prime.valuation(&self.value)
    }

    pub fn unit_part(&self) -> Result<PadicNumber> {
        Ok(PadicNumber::new(
            self.prime.unit_part(&self.value)?,
            self.prime,
        ))
    }

    pub fn recip(&self) -> Result<PadicNumber> {
        if self.is_zero() {
            return Err(Error::ZeroInput);
        }
        Ok(PadicNumber::new((&self.value).reciprocal(), self.prime))
    }
}

impl fmt::Display for PadicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_rational(&self.value))
    }
}

macro_rules! padic_binop {
    ($trait:ident, $method:ident) => {
        impl<'a> $trait<&'a PadicNumber> for &'a PadicNumber {
            type Output = PadicNumber;
            fn $method(self, rhs: &'a PadicNumber) -> PadicNumber {
                assert_eq!(self.prime, rhs.prime, "mixed primes");
                PadicNumber::new((&self.value).$method(&rhs.value), self.prime)
            }
        }
    };
}

padic_binop!(Add, add);
padic_binop!(Sub, sub);
padic_binop!(Mul, mul);
padic_binop!(Div, div);

impl Neg for &PadicNumber {
    type Output = PadicNumber;
    fn neg(self) -> PadicNumber {
        PadicNumber::new(-&self.value, self.prime)
    }
}

/// A 2x2 matrix of exact rationals.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mat2 {
    e: [[Rational; 2]; 2],
    prime: Prime,
}

impl Mat2 {
    pub fn new(prime: Prime, e: [[Rational; 2]; 2]) -> Self {
        Mat2 { e, prime }
    }

    pub fn from_ints(prime: Prime, e: [[i64; 2]; 2]) -> Self {
        Mat2::new(
            prime,
            [[rat(e[0][0]), rat(e[0][1])], [rat(e[1][0]), rat(e[1][1])]],
        )
    }

    pub fn identity(prime: Prime) -> Self {
        Mat2::from_ints(prime, [[1, 0], [0, 1]])
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.e[i][j]
    }

    pub fn entries(&self) -> &[[Rational; 2]; 2] {
        &self.e
    }

    pub fn det(&self) -> Rational {
        &self.e[0][0] * &self.e[1][1] - &self.e[0][1] * &self.e[1][0]
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let a = &self.e;
        let b = &rhs.e;
        let cell = |i: usize, j: usize| &a[i][0] * &b[0][j] + &a[i][1] * &b[1][j];
        Mat2::new(
            self.prime,
            [[cell(0, 0), cell(0, 1)], [cell(1, 0), cell(1, 1)]],
        )
    }

    pub fn inv(&self) -> Result<Mat2> {
        let d = self.det();
        if d == 0u32 {
            return Err(Error::Singular);
        }
        let e = &self.e;
        Ok(Mat2::new(
            self.prime,
            [
                [&e[1][1] / &d, -&e[0][1] / &d],
                [-&e[1][0] / &d, &e[0][0] / &d],
            ],
        ))
    }

    /// `self * g * self^-1`.
    pub fn conjugate(&self, g: &Mat2) -> Result<Mat2> {
        Ok(self.mul(g).mul(&self.inv()?))
    }

    pub fn is_sl2(&self) -> bool {
        self.det() == 1u32
    }

    pub fn is_integral(&self) -> bool {
        self.e
            .iter()
            .flatten()
            .all(|x| self.prime.valuation(x) >= Valuation::Finite(0))
    }

    pub fn is_upper_triangular(&self) -> bool {
        self.e[1][0] == 0u32
    }

    pub fn is_identity(&self) -> bool {
        self.e[0][0] == 1u32 && self.e[1][1] == 1u32 && self.e[0][1] == 0u32 && self.e[1][0] == 0u32
    }

    /// Largest `|v|` over the nonzero entries.
    pub fn max_abs_valuation(&self) -> u64 {
        self.e
            .iter()
            .flatten()
            .filter_map(|x| self.prime.valuation(x).finite())
            .map(|v| v.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// Whether `self ≡ I (mod p^m)`, i.e. every entry of `self - I` has valuation at least `m`.
    pub fn congruent_to_identity(&self, m: u32) -> bool {
        let one = Rational::ONE;
        (0..2).all(|i| {
            (0..2).all(|j| {
                let d = if i == j {
                    &self.e[i][j] - &one
                } else {
                    self.e[i][j].clone()
                };
                self.prime.valuation(&d) >= Valuation::Finite(m as i64)
            })
        })
    }

    /// Entries modulo `p^m`; `None` unless integral.
    pub fn reduce(&self, m: u32) -> Option<[[u64; 2]; 2]> {
        let r = |x: &Rational| self.prime.residue(x, m);
        Some([
            [r(&self.e[0][0])?, r(&self.e[0][1])?],
            [r(&self.e[1][0])?, r(&self.e[1][1])?],
        ])
    }

    /// Möbius action on an affine coordinate; `None` means the point at infinity.
    pub fn mobius(&self, x: Option<&Rational>) -> Option<Rational> {
        let e = &self.e;
        let (num, den) = match x {
            Some(x) => (&e[0][0] * x + &e[0][1], &e[1][0] * x + &e[1][1]),
            None => (e[0][0].clone(), e[1][0].clone()),
        };
        if den == 0u32 {
            None
        } else {
            Some(num / den)
        }
    }

    /// Row-major entries as `"num/den"` strings.
    pub fn to_strings(&self) -> [[String; 2]; 2] {
        [
            [
                format_rational(&self.e[0][0]),
                format_rational(&self.e[0][1]),
            ],
            [
                format_rational(&self.e[1][0]),
                format_rational(&self.e[1][1]),
            ],
        ]
    }

    /// Parses a row-major JSON array such as `[["1","0"],["1/5","1"]]`.
    /// Bare JSON integers are accepted alongside strings.
    pub fn from_json(prime: Prime, s: &str) -> Result<Mat2> {
        let v: serde_json::Value =
            serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let rows = v
            .as_array()
            .filter(|r| r.len() == 2)
            .ok_or_else(|| Error::Parse("expected a 2x2 array".into()))?;
        let mut out: [[Rational; 2]; 2] = [
            [Rational::ZERO, Rational::ZERO],
            [Rational::ZERO, Rational::ZERO],
        ];
        for (i, row) in rows.iter().enumerate() {
            let row = row
                .as_array()
                .filter(|r| r.len() == 2)
                .ok_or_else(|| Error::Parse("expected rows of length 2".into()))?;
            for (j, cell) in row.iter().enumerate() {
                out[i][j] = match cell {
                    serde_json::Value::String(s) => parse_rational(s)?,
                    serde_json::Value::Number(n) => parse_rational(&n.to_string())?,
                    other => return Err(Error::Parse(format!("bad matrix entry {other}"))),
                };
            }
        }
        Ok(Mat2::new(prime, out))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!(self.to_strings())
    }
}

impl Serialize for Mat2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.to_strings();
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            s[0][0], s[0][1], s[1][0], s[1][1]
        )
    }
}
