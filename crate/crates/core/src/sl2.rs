//! SL(2, Q_p): Iwasawa decomposition, the factorization `h t = t' h'`, the level-m
//! model of SL(2, Z_p) generics, the minimal flow of pairs `(k, j)` and its Ellis group.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use malachite_base::num::arithmetic::traits::Reciprocal;
use malachite_base::num::basic::traits::{One, Zero};
use serde::Serialize;

use crate::borel::{borel_witness, classify_borel, BorelElem, BorelTruncType};
use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::padic::{mod_inverse, mul_mod, pow_mod, Mat2, Prime, Rational, Valuation};
use crate::residues::{
    build_group, induced_valuation_map, verify_group_table, PowerClasses, ResidueClass,
    ResidueGroup,
};
use crate::types1::{large_in_class, multiple_at_least, small_in_class, ScaleLadder};

/// Matrix over `Z/p^m`, entries in `[0, p^m)`.
pub type KMat = [[u64; 2]; 2];

/// Enumeration is refused above this many elements.
const ENUMERATION_LIMIT: u64 = 2_000_000;

/// SL(2, Z/p^m): the level-m stand-in for the generic types of SL(2, Z_p).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KLevel {
    prime: Prime,
    m: u32,
    modulus: u64,
}

impl KLevel {
    pub fn new(prime: Prime, m: u32) -> Result<Self> {
        let modulus = prime
            .checked_pow(m)
            .filter(|q| q.checked_mul(*q).is_some())
            .ok_or_else(|| Error::LevelOutOfBounds(format!("p^{m} is too large")))?;
        Ok(KLevel { prime, m, modulus })
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn level(&self) -> u32 {
        self.m
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn identity(&self) -> KMat {
        let one = 1 % self.modulus;
        [[one, 0], [0, one]]
    }

    /// `p^(3m) (1 - p^-2)`, or 1 at level 0.
    pub fn order(&self) -> u64 {
        if self.m == 0 {
            return 1;
        }
        let p = self.prime.get();
        self.modulus.pow(3) / (p * p) * (p * p - 1)
    }

    pub fn det(&self, k: &KMat) -> u64 {
        let q = self.modulus;
        (mul_mod(k[0][0], k[1][1], q) + q - mul_mod(k[0][1], k[1][0], q)) % q
    }

    pub fn contains(&self, k: &KMat) -> bool {
        k.iter().flatten().all(|&x| x < self.modulus) && self.det(k) == 1 % self.modulus
    }

    pub fn mul(&self, a: &KMat, b: &KMat) -> KMat {
        let q = self.modulus;
        let cell =
            |i: usize, j: usize| (mul_mod(a[i][0], b[0][j], q) + mul_mod(a[i][1], b[1][j], q)) % q;
        [[cell(0, 0), cell(0, 1)], [cell(1, 0), cell(1, 1)]]
    }

    pub fn inv(&self, k: &KMat) -> KMat {
        let q = self.modulus;
        let neg = |x: u64| (q - x % q) % q;
        [[k[1][1], neg(k[0][1])], [neg(k[1][0]), k[0][0]]]
    }

    fn is_unit(&self, x: u64) -> bool {
        self.m == 0 || x % self.prime.get() != 0
    }

    /// All elements, in lexicographic order of `(a, c, b, d)`.
    pub fn enumerate(&self) -> Result<Vec<KMat>> {
        if self.order() > ENUMERATION_LIMIT {
            return Err(Error::LevelOutOfBounds(format!(
                "SL(2, Z/{}) has {} elements",
                self.modulus,
                self.order()
            )));
        }
        let q = self.modulus;
        let mut out = Vec::with_capacity(self.order() as usize);
        for a in 0..q {
            for c in 0..q {
                if !self.is_unit(a) && !self.is_unit(c) {
                    continue;
                }
                for free in 0..q {
                    let k = if self.is_unit(a) {
                        let a_inv = mod_inverse(a, q).unwrap_or(0);
                        let d = mul_mod((1 + mul_mod(free, c, q)) % q, a_inv, q);
                        [[a, free], [c, d]]
                    } else {
                        let c_inv = mod_inverse(c, q).unwrap_or(0);
                        let b = mul_mod((mul_mod(a, free, q) + q - 1 % q) % q, c_inv, q);
                        [[a, b], [c, free]]
                    };
                    debug_assert!(self.contains(&k));
                    out.push(k);
                }
            }
        }
        out.sort_unstable_by_key(|k| (k[0][0], k[1][0], k[0][1], k[1][1]));
        Ok(out)
    }

    /// Canonical lift to SL(2, Z): entries in `[0, p^m)`, then `d = (1 + bc)/a`
    /// when `a` is a unit and `b = (ad - 1)/c` otherwise. The lower-left entry is kept.
    pub fn lift(&self, k: &KMat) -> Mat2 {
        let r = |x: u64| Rational::from(x);
        let (a, b, c, d) = (r(k[0][0]), r(k[0][1]), r(k[1][0]), r(k[1][1]));
        let one = Rational::ONE;
        let e = if self.is_unit(k[0][0]) && a != 0u32 {
            let d = (&one + &b * &c) / &a;
            [[a, b], [c, d]]
        } else if c != 0u32 {
            let b = (&a * &d - &one) / &c;
            [[a, b], [c, d]]
        } else {
            // Level 0: the only element is the identity.
            [[one.clone(), Rational::ZERO], [Rational::ZERO, one]]
        };
        Mat2::new(self.prime, e)
    }

    pub fn reduce(&self, g: &Mat2) -> Option<KMat> {
        g.reduce(self.m)
    }

    /// Writes `k = k0 b` with `b` upper triangular and `k0` determined by the
    /// line through the first column; returns `(k0, b11)`.
    pub fn coset_normal_form(&self, k: &KMat) -> (KMat, u64) {
        let q = self.modulus;
        if self.m == 0 {
            return (self.identity(), 0);
        }
        let neg_one = q - 1;
        if self.is_unit(k[0][0]) {
            let ratio = mul_mod(k[1][0], mod_inverse(k[0][0], q).unwrap(), q);
            ([[1, 0], [ratio, 1]], k[0][0])
        } else {
            let ratio = mul_mod(k[0][0], mod_inverse(k[1][0], q).unwrap(), q);
            ([[ratio, neg_one], [1, 0]], k[1][0])
        }
    }
}

/// Left-column pivot: `g = t h` with `t` in SL(2, Z_p) and `h` upper triangular.
pub fn iwasawa(g: &Mat2) -> Result<(Mat2, BorelElem)> {
    if !g.is_sl2() {
        return Err(Error::NotUnimodular(crate::padic::format_rational(
            &g.det(),
        )));
    }
    let p = g.prime();
    if g.is_upper_triangular() {
        return Ok((Mat2::identity(p), BorelElem::from_matrix(g)?));
    }
    if g.is_integral() {
        return Ok((g.clone(), BorelElem::identity()));
    }
    let (g11, g21) = (g.get(0, 0), g.get(1, 0));
    let zero = Rational::ZERO;
    let one = Rational::ONE;
    let t = if p.valuation(g21) >= p.valuation(g11) {
        Mat2::new(p, [[one.clone(), zero], [g21 / g11, one]])
    } else {
        Mat2::new(p, [[g11 / g21, -one.clone()], [one, zero]])
    };
    let h = t.inv()?.mul(g);
    Ok((t, BorelElem::from_matrix(&h)?))
}

/// Bottom-row pivot: `g = h t` with `h` upper triangular and `t` in SL(2, Z_p).
pub fn iwasawa_ht(g: &Mat2) -> Result<(BorelElem, Mat2)> {
    if !g.is_sl2() {
        return Err(Error::NotUnimodular(crate::padic::format_rational(
            &g.det(),
        )));
    }
    let p = g.prime();
    if g.is_upper_triangular() {
        return Ok((BorelElem::from_matrix(g)?, Mat2::identity(p)));
    }
    if g.is_integral() {
        return Ok((BorelElem::identity(), g.clone()));
    }
    let (g21, g22) = (g.get(1, 0), g.get(1, 1));
    let zero = Rational::ZERO;
    let one = Rational::ONE;
    let t = if p.valuation(g21) >= p.valuation(g22) {
        Mat2::new(p, [[one.clone(), zero], [g21 / g22, one]])
    } else {
        Mat2::new(p, [[zero, -one.clone()], [one, g22 / g21]])
    };
    let h = g.mul(&t.inv()?);
    Ok((BorelElem::from_matrix(&h)?, t))
}

/// Both constituents at once: `B(Q_p) ∩ SL(2, Z_p)`.
pub fn in_borel_integral(g: &Mat2) -> bool {
    g.is_sl2() && g.is_upper_triangular() && g.is_integral()
}

/// `h t = t' h'` for a `p0`-witness `h`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Factorization {
    /// `u3 != 0`: `t' = [[1, 0], [u3 / (a X), 1]]`, `h' = (X, a u2 + c u4)`, `X = a u1 + c u3`.
    Lower { t: Mat2, h: BorelElem },
    /// `t` upper triangular: `t' = t`, `h' = t^-1 h t`.
    Borel { t: Mat2, h: BorelElem },
}

impl Factorization {
    pub fn t(&self) -> &Mat2 {
        match self {
            Factorization::Lower { t, .. } | Factorization::Borel { t, .. } => t,
        }
    }

    pub fn h(&self) -> &BorelElem {
        match self {
            Factorization::Lower { h, .. } | Factorization::Borel { h, .. } => h,
        }
    }
}

pub fn commute_borel(h: &BorelElem, t: &Mat2) -> Result<Factorization> {
    let p = t.prime();
    let (u1, u2, u3, u4) = (t.get(0, 0), t.get(0, 1), t.get(1, 0), t.get(1, 1));
    let (a, c) = (h.a(), h.c());
    let out = if *u3 == 0u32 {
        let hp = t.inv()?.mul(&h.to_matrix(p)).mul(t);
        Factorization::Borel {
            t: t.clone(),
            h: BorelElem::from_matrix(&hp)?,
        }
    } else {
        let x = a * u1 + c * u3;
        if x == 0u32 {
            return Err(Error::Degenerate("a u1 + c u3 = 0".into()));
        }
        let y = u3 / (a * &x);
        let tp = Mat2::new(p, [[Rational::ONE, Rational::ZERO], [y, Rational::ONE]]);
        let hp = BorelElem::new(x, a * u2 + c * u4)?;
        Factorization::Lower { t: tp, h: hp }
    };
    if h.to_matrix(p).mul(t) != out.t().mul(&out.h().to_matrix(p)) {
        return Err(Error::Degenerate("h t != t' h'".into()));
    }
    Ok(out)
}

/// Conjugates a congruence-small `t` by `g`; requires `t ≡ I (mod p^s)` with
/// `s > 2 d(g) + m` and checks `g t g^-1 ≡ I (mod p^m)`.
pub fn conj_stability(t_small: &Mat2, g: &Mat2, s: u32, m: u32) -> Result<Mat2> {
    let d = g.max_abs_valuation();
    if (s as u64) <= 2 * d + m as u64 {
        return Err(Error::Precondition(format!(
            "congruence level {s} does not exceed 2 * {d} + {m}"
        )));
    }
    if !t_small.congruent_to_identity(s) {
        return Err(Error::Precondition(format!(
            "{t_small} is not ≡ I mod p^{s}"
        )));
    }
    let out = g.conjugate(t_small)?;
    if !out.congruent_to_identity(m) {
        return Err(Error::OutsideFamily(format!("{out} is not ≡ I mod p^{m}")));
    }
    Ok(out)
}

/// `[[1, p^e], [p^e, 1 + p^2e]]` with `e` the least multiple of `n` at least `rung`:
/// a determinant-one element infinitesimally close to the identity.
pub fn perturbation(prime: Prime, n: u32, rung: u64) -> Mat2 {
    let e = multiple_at_least(n, rung) as i64;
    let s = prime.pow(e);
    let one = Rational::ONE;
    Mat2::new(
        prime,
        [[one.clone(), s.clone()], [s.clone(), &one + &s * &s]],
    )
}

/// A point `(k, j)` of the level-(m, n) flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GFlowPoint {
    pub k: KMat,
    pub j: ResidueClass,
}

impl fmt::Display for GFlowPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = &self.k;
        write!(
            f,
            "([[{}, {}], [{}, {}]], {})",
            k[0][0], k[0][1], k[1][0], k[1][1], self.j
        )
    }
}

impl Serialize for GFlowPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            k: &'a KMat,
            j: &'a ResidueClass,
        }
        Repr {
            k: &self.k,
            j: &self.j,
        }
        .serialize(s)
    }
}

/// Parameters for the SL(2) computations at level `(m, n)`.
#[derive(Clone, Debug)]
pub struct Sl2Context {
    k: KLevel,
    group: ResidueGroup,
    window: u32,
    ladder: ScaleLadder,
}

impl Sl2Context {
    pub fn new(prime: Prime, m: u32, n: u32, window: u32, ladder: ScaleLadder) -> Result<Self> {
        if ladder.len() < 4 {
            return Err(Error::LadderExhausted {
                need: 4,
                from: 0,
                have: ladder.len(),
            });
        }
        Ok(Sl2Context {
            k: KLevel::new(prime, m)?,
            group: build_group(prime, n)?,
            window,
            ladder,
        })
    }

    pub fn from_config(config: &crate::padic::Config) -> Result<Self> {
        Self::new(
            config.prime,
            config.matrix_level,
            config.residue_level,
            config.window,
            crate::borel::default_ladder(config)?,
        )
    }

    pub fn with_ladder(&self, ladder: ScaleLadder) -> Result<Self> {
        Self::new(
            self.prime(),
            self.k.m,
            self.group.level(),
            self.window,
            ladder,
        )
    }

    pub fn prime(&self) -> Prime {
        self.k.prime
    }

    pub fn klevel(&self) -> &KLevel {
        &self.k
    }

    pub fn group(&self) -> &ResidueGroup {
        &self.group
    }

    pub fn classes(&self) -> &PowerClasses {
        self.group.classes()
    }

    pub fn ladder(&self) -> &ScaleLadder {
        &self.ladder
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn identity_point(&self) -> GFlowPoint {
        GFlowPoint {
            k: self.k.identity(),
            j: self.group.identity(),
        }
    }

    /// Class of a unit residue read off an integer lift, at level n.
    fn class_of_residue(&self, x: u64) -> Result<ResidueClass> {
        self.classes().class_of(&Rational::from(x))
    }

    /// Symbolic product: `(k1 k2, j1 j2)` when `lift(k2)` is upper triangular,
    /// otherwise `(k1, j1 class(u3) j2)` with `u3` the lower-left entry of `lift(k2)`.
    pub fn star_symbolic(&self, x: &GFlowPoint, y: &GFlowPoint) -> Result<GFlowPoint> {
        let c = self.classes();
        let u3 = y.k[1][0];
        if u3 == 0 {
            Ok(GFlowPoint {
                k: self.k.mul(&x.k, &y.k),
                j: c.mul(&x.j, &y.j),
            })
        } else {
            let cu = self.class_of_residue(u3)?;
            Ok(GFlowPoint {
                k: x.k,
                j: c.mul(&c.mul(&x.j, &cu), &y.j),
            })
        }
    }

    fn witness(&self, j: &ResidueClass, from: usize) -> Result<BorelElem> {
        borel_witness(&BorelTruncType::new(*j), &self.ladder, from)
    }

    /// Factors `H1 lift(k2)` and returns the reduced `t'` with the Borel factor.
    fn factor_step(&self, j1: &ResidueClass, k2: &KMat, from: usize) -> Result<(KMat, BorelElem)> {
        let h1 = self.witness(j1, from)?;
        let f = commute_borel(&h1, &self.k.lift(k2))?;
        let t = self
            .k
            .reduce(f.t())
            .ok_or_else(|| Error::OutsideFamily(format!("t' = {} is not integral", f.t())))?;
        if let Factorization::Lower { t: tp, .. } = &f {
            if !tp.congruent_to_identity(self.k.m) {
                return Err(Error::OutsideFamily(format!("t' = {tp} is not ≡ I")));
            }
        }
        Ok((t, f.h().clone()))
    }

    /// Witness-path product without perturbations: `x` on rungs `from, from+1`,
    /// `y` on the next two; the exact identity `T1 H1 T2 H2 = T H` is checked.
    pub fn star_witness(&self, x: &GFlowPoint, y: &GFlowPoint, from: usize) -> Result<GFlowPoint> {
        let p = self.prime();
        let t1 = self.k.lift(&x.k);
        let t2 = self.k.lift(&y.k);
        let h1 = self.witness(&x.j, from)?;
        let h2 = self.witness(&y.j, from + 2)?;
        let f = commute_borel(&h1, &t2)?;
        let t = t1.mul(f.t());
        let h = f.h().mul(&h2);
        let lhs = t1.mul(&h1.to_matrix(p)).mul(&t2).mul(&h2.to_matrix(p));
        if lhs != t.mul(&h.to_matrix(p)) {
            return Err(Error::Degenerate(
                "witness product does not refactor".into(),
            ));
        }
        self.classify(&t, &h)
    }

    /// Witness-path product with generic perturbations `E` on the K side:
    /// `x = lift(k1) E1 H1`, `y = lift(k2) E2 H2`, each `E` sharing the rung of its `alpha`.
    pub fn star_witness_perturbed(
        &self,
        x: &GFlowPoint,
        y: &GFlowPoint,
        from: usize,
    ) -> Result<GFlowPoint> {
        let p = self.prime();
        let n = self.group.level();
        let r = self.ladder.take(from, 4)?;
        let t1 = self.k.lift(&x.k).mul(&perturbation(p, n, r[0]));
        let t2 = self.k.lift(&y.k).mul(&perturbation(p, n, r[2]));
        let h1 = self.witness(&x.j, from)?;
        let h2 = self.witness(&y.j, from + 2)?;
        let f = commute_borel(&h1, &t2)?;
        let t = t1.mul(f.t());
        let h = f.h().mul(&h2);
        let lhs = t1.mul(&h1.to_matrix(p)).mul(&t2).mul(&h2.to_matrix(p));
        if lhs != t.mul(&h.to_matrix(p)) {
            return Err(Error::Degenerate(
                "witness product does not refactor".into(),
            ));
        }
        self.classify(&t, &h)
    }

    fn classify(&self, t: &Mat2, h: &BorelElem) -> Result<GFlowPoint> {
        let k = self
            .k
            .reduce(t)
            .ok_or_else(|| Error::OutsideFamily(format!("{t} is not integral")))?;
        let j = classify_borel(h, self.classes(), self.window)?.a_class;
        Ok(GFlowPoint { k, j })
    }

    /// Identifies `(k0 b, j)` with `(k0, class(b11) j)`: both name the same type,
    /// since a B(Z_p) factor on the K side moves into the Borel side.
    pub fn normalize(&self, x: &GFlowPoint) -> Result<GFlowPoint> {
        if self.k.m < self.classes().precision() {
            return Err(Error::Precondition(format!(
                "classes at level {} need congruence level {}",
                self.group.level(),
                self.classes().precision()
            )));
        }
        let (k0, b11) = self.k.coset_normal_form(&x.k);
        let cb = self.class_of_residue(b11)?;
        Ok(GFlowPoint {
            k: k0,
            j: self.classes().mul(&cb, &x.j),
        })
    }

    /// All pairs `(k, j)`.
    pub fn points(&self) -> Result<Vec<GFlowPoint>> {
        let ks = self.k.enumerate()?;
        let mut out = Vec::with_capacity(ks.len() * self.group.order());
        for k in &ks {
            for j in self.group.elements() {
                out.push(GFlowPoint { k: *k, j: *j });
            }
        }
        Ok(out)
    }

    /// Exhaustive comparison of the symbolic product with the witness path on all
    /// pairs. The product `T1 (H1 T2) H2` is evaluated once per `(j1, k2)` factor
    /// and once per `(j1, k2, j2)` Borel product; the K part is `k1 * (t' mod p^m)`.
    pub fn exhaustive_star_check(&self) -> Result<StarCheck> {
        let ks = self.k.enumerate()?;
        let js = self.group.elements();
        let mut mismatches = Vec::new();
        let mut pairs = 0u64;
        let h2s: Vec<BorelElem> = js
            .iter()
            .map(|j| self.witness(j, 2))
            .collect::<Result<_>>()?;
        for j1 in js {
            for k2 in &ks {
                let (tp, hp) = self.factor_step(j1, k2, 0)?;
                let mut jprod = Vec::with_capacity(js.len());
                for h2 in &h2s {
                    jprod.push(classify_borel(&hp.mul(h2), self.classes(), self.window)?.a_class);
                }
                for k1 in &ks {
                    let x = GFlowPoint { k: *k1, j: *j1 };
                    let kk = self.k.mul(k1, &tp);
                    for (j2, jj) in js.iter().zip(&jprod) {
                        let y = GFlowPoint { k: *k2, j: *j2 };
                        let sym = self.star_symbolic(&x, &y)?;
                        pairs += 1;
                        if (sym.k != kk || sym.j != *jj) && mismatches.len() < 8 {
                            mismatches.push(format!("{x} * {y}: symbolic {sym}"));
                        }
                    }
                }
            }
        }
        Ok(StarCheck { pairs, mismatches })
    }
}

impl Sl2Context {
    /// Symbolic product against both witness paths on random pairs; the perturbed
    /// path is compared after normalization when that is defined.
    pub fn sampled_star_check(
        &self,
        samples: usize,
        rng: &mut impl rand::Rng,
    ) -> Result<StarCheck> {
        use rand::seq::SliceRandom;
        let ks = self.k.enumerate()?;
        let js = self.group.elements();
        let normalizable = self.k.m >= self.classes().precision();
        let mut mismatches = Vec::new();
        for _ in 0..samples {
            let x = GFlowPoint {
                k: *ks.choose(rng).unwrap(),
                j: *js.choose(rng).unwrap(),
            };
            let y = GFlowPoint {
                k: *ks.choose(rng).unwrap(),
                j: *js.choose(rng).unwrap(),
            };
            let sym = self.star_symbolic(&x, &y)?;
            let mut ok = self.star_witness(&x, &y, 0)? == sym;
            if normalizable {
                let pert = self.star_witness_perturbed(&x, &y, 0)?;
                ok &= self.normalize(&pert)? == self.normalize(&sym)?;
            }
            if !ok && mismatches.len() < 8 {
                mismatches.push(format!("{x} * {y}: symbolic {sym}"));
            }
        }
        Ok(StarCheck {
            pairs: samples as u64,
            mismatches,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StarCheck {
    pub pairs: u64,
    pub mismatches: Vec<String>,
}

impl StarCheck {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// A unit of maximal multiplicative order modulo `p^e`.
pub fn max_order_unit(prime: Prime, e: u32) -> u64 {
    let p = prime.get();
    let q = prime.checked_pow(e).expect("modulus fits");
    if q <= 2 {
        return 1;
    }
    if p == 2 {
        return 3;
    }
    let phi = q / p * (p - 1);
    let mut factors = Vec::new();
    let mut r = p - 1;
    let mut d = 2;
    while d * d <= r {
        if r % d == 0 {
            factors.push(d);
            while r % d == 0 {
                r /= d;
            }
        }
        d += 1;
    }
    if r > 1 {
        factors.push(r);
    }
    if e > 1 {
        factors.push(p);
    }
    (2..q)
        .filter(|g| g % p != 0)
        .find(|&g| factors.iter().all(|&f| pow_mod(g, phi / f, q) != 1))
        .expect("odd prime powers have primitive roots")
}

/// The documented generator set.
pub fn generators(prime: Prime, m: u32, w: u32) -> Vec<Mat2> {
    let u0 = max_order_unit(prime, m + w) as i64;
    let r = |x: i64| Rational::from(x);
    let p = prime.get() as i64;
    vec![
        Mat2::from_ints(prime, [[1, 1], [0, 1]]),
        Mat2::from_ints(prime, [[1, 0], [1, 1]]),
        Mat2::new(prime, [[r(u0), r(0)], [r(0), r(1) / r(u0)]]),
        Mat2::new(prime, [[r(p), r(0)], [r(0), r(1) / r(p)]]),
        Mat2::from_ints(prime, [[0, -1], [1, 0]]),
    ]
}

/// Extreme elements standing in for limits: diagonal `rep p^(+-N)` and unipotents
/// with entry `rep p^-N`, one per class.
pub fn closure_elements(prime: Prime, classes: &[ResidueClass], extreme: u64) -> Vec<Mat2> {
    let zero = Rational::ZERO;
    let one = Rational::ONE;
    let mut out = Vec::new();
    for c in classes {
        for x in [small_in_class(c, extreme), large_in_class(c, extreme)] {
            out.push(Mat2::new(
                prime,
                [[x.clone(), zero.clone()], [zero.clone(), x.reciprocal()]],
            ));
        }
        let big = large_in_class(c, extreme);
        out.push(Mat2::new(
            prime,
            [[one.clone(), big.clone()], [zero.clone(), one.clone()]],
        ));
        out.push(Mat2::new(
            prime,
            [[one.clone(), zero.clone()], [big, one.clone()]],
        ));
    }
    out
}

/// The level-(m, n) flow on pairs with its action and closure edges.
#[derive(Clone, Debug)]
pub struct GFlow {
    ctx: Sl2Context,
    points: Vec<GFlowPoint>,
    index: HashMap<GFlowPoint, usize>,
    generators: Vec<Mat2>,
    closure: Vec<Mat2>,
}

impl GFlow {
    pub fn new(ctx: Sl2Context) -> Result<Self> {
        let points = ctx.points()?;
        let index = points.iter().enumerate().map(|(i, x)| (*x, i)).collect();
        let n = ctx.group.level() as u64;
        let extreme = ctx.window as u64 + 2 * n + 5;
        let generators = generators(ctx.prime(), ctx.k.m, ctx.window);
        let closure = closure_elements(ctx.prime(), ctx.group.elements(), extreme);
        Ok(GFlow {
            ctx,
            points,
            index,
            generators,
            closure,
        })
    }

    pub fn context(&self) -> &Sl2Context {
        &self.ctx
    }

    pub fn points(&self) -> &[GFlowPoint] {
        &self.points
    }

    pub fn generators(&self) -> &[Mat2] {
        &self.generators
    }

    /// `g (k, j) = (t mod p^m, class(a_h) j)` where `g lift(k) = t h`; the new class
    /// is read off the witness product `h H_j`.
    pub fn act(&self, g: &Mat2, x: &GFlowPoint) -> Result<GFlowPoint> {
        let ctx = &self.ctx;
        let l = g.mul(&ctx.k.lift(&x.k));
        let (t, h) = iwasawa(&l)?;
        let from = self.dominating_rung(&h)?;
        let hj = ctx.witness(&x.j, from)?;
        let j = classify_borel(&h.mul(&hj), ctx.classes(), ctx.window)?.a_class;
        let k = ctx
            .k
            .reduce(&t)
            .ok_or_else(|| Error::OutsideFamily(format!("{t} is not integral")))?;
        Ok(GFlowPoint { k, j })
    }

    fn dominating_rung(&self, h: &BorelElem) -> Result<usize> {
        let p = self.ctx.prime();
        let d = [h.a(), h.c()]
            .iter()
            .filter_map(|x| p.valuation(x).finite())
            .map(|v| v.unsigned_abs())
            .max()
            .unwrap_or(0);
        let k = self.ctx.classes().precision() as u64;
        self.ctx
            .ladder
            .first_at_least(2 * d + 2 * self.ctx.window as u64 + k + 1)
    }

    /// Image indices of every point under each generator, then each closure element.
    pub fn action_table(&self) -> Result<Vec<Vec<usize>>> {
        self.generators
            .iter()
            .chain(&self.closure)
            .map(|elem| {
                self.points
                    .iter()
                    .map(|x| Ok(self.index[&self.act(elem, x)?]))
                    .collect()
            })
            .collect()
    }

    /// Action edges (generators) and closure edges (extreme elements).
    pub fn graph(&self) -> Result<Digraph> {
        let mut g = Digraph::new(self.points.len());
        for row in self.action_table()? {
            for (i, j) in row.into_iter().enumerate() {
                g.add_edge(i, j);
            }
        }
        Ok(g)
    }

    pub fn is_strongly_connected(&self) -> Result<bool> {
        Ok(self.graph()?.is_strongly_connected())
    }

    /// `(I, id) * (I, id) = (I, id)` on the witness path, with and without perturbations.
    pub fn idempotent_check(&self) -> Result<bool> {
        let e = self.ctx.identity_point();
        Ok(self.ctx.star_witness(&e, &e, 0)? == e
            && self.ctx.star_witness_perturbed(&e, &e, 0)? == e)
    }

    pub fn report(&self, tower: bool) -> Result<MinimalFlowReport> {
        Ok(MinimalFlowReport {
            prime: self.ctx.prime(),
            m: self.ctx.k.m,
            n: self.ctx.group.level(),
            size: self.points.len(),
            strongly_connected: self.is_strongly_connected()?,
            idempotent: self.idempotent_check()?,
            ellis: ellis_group(&self.ctx, tower)?,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimalFlowReport {
    pub prime: Prime,
    pub m: u32,
    pub n: u32,
    pub size: usize,
    pub strongly_connected: bool,
    pub idempotent: bool,
    pub ellis: EllisReport,
}

/// Level-0 flow: a single point, trivially minimal.
pub fn trivial_flow_size(prime: Prime, n: u32) -> Result<usize> {
    Ok(KLevel::new(prime, 0)?.order() as usize * build_group(prime, n)?.order())
}

/// Map `J_n -> J_n'` for `n' | n`: reduce the representative.
#[derive(Clone, Debug, Serialize)]
pub struct TowerMap {
    pub from_n: u32,
    pub to_n: u32,
    pub map: BTreeMap<String, String>,
    pub homomorphism: bool,
    pub surjective: bool,
}

pub fn tower_map(prime: Prime, from_n: u32, to_n: u32) -> Result<(TowerMap, Vec<usize>)> {
    if to_n == 0 || from_n % to_n != 0 {
        return Err(Error::Precondition(format!(
            "{to_n} does not divide {from_n}"
        )));
    }
    let g = build_group(prime, from_n)?;
    let h = build_group(prime, to_n)?;
    let img: Vec<usize> = g
        .elements()
        .iter()
        .map(|c| {
            h.index_of(&h.classes().class_of(&c.rep_rational()).unwrap())
                .unwrap()
        })
        .collect();
    let ord = g.order();
    let homomorphism =
        (0..ord).all(|a| (0..ord).all(|b| img[g.table()[a][b]] == h.table()[img[a]][img[b]]));
    let mut hit = vec![false; h.order()];
    for &i in &img {
        hit[i] = true;
    }
    let map = g
        .elements()
        .iter()
        .zip(&img)
        .map(|(c, &i)| (c.to_string(), h.elements()[i].to_string()))
        .collect();
    Ok((
        TowerMap {
            from_n,
            to_n,
            map,
            homomorphism,
            surjective: hit.into_iter().all(|b| b),
        },
        img,
    ))
}

/// Whether reducing `n -> n' -> n''` agrees with reducing `n -> n''` for every chain of divisors of `n`.
pub fn tower_commutes(prime: Prime, n: u32) -> Result<bool> {
    let divisors: Vec<u32> = (1..=n).filter(|d| n % d == 0).collect();
    for &a in &divisors {
        for &b in divisors.iter().filter(|&&b| a % b == 0) {
            for &c in divisors.iter().filter(|&&c| b % c == 0) {
                let (_, ab) = tower_map(prime, a, b)?;
                let (_, bc) = tower_map(prime, b, c)?;
                let (_, ac) = tower_map(prime, a, c)?;
                if (0..ab.len()).any(|i| bc[ab[i]] != ac[i]) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, Serialize)]
pub struct EllisReport {
    pub order: usize,
    pub elements: Vec<String>,
    pub table: Vec<Vec<String>>,
    pub iso_checks: IsoChecks,
    pub cyclic: bool,
    pub order_profile: Vec<usize>,
    pub valuation_map_injective: bool,
    pub valuation_map_kernel: Vec<String>,
    pub tower: Vec<TowerMap>,
    pub tower_commutes: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IsoChecks {
    /// Group axioms on `(q0 * J, star)`.
    pub group_axioms: bool,
    /// `j -> q0 * j` is injective.
    pub injective: bool,
    /// `q0 * (j1 j2) = (q0 * j1) * (q0 * j2)`.
    pub homomorphism: bool,
    /// Symbolic and witness products agree on `q0 * J`.
    pub witness_agrees: bool,
    /// `q0 * p0 * M` lands in `q0 * J` after normalization, when normalization is defined.
    pub absorbs_borel: Option<bool>,
}

impl IsoChecks {
    pub fn all(&self) -> bool {
        self.group_axioms
            && self.injective
            && self.homomorphism
            && self.witness_agrees
            && self.absorbs_borel.unwrap_or(true)
    }
}

/// The Ellis group `q0 * J = {(I, j)}` under the witness-path product.
pub fn ellis_group(ctx: &Sl2Context, tower: bool) -> Result<EllisReport> {
    let js = ctx.group.elements();
    let one = ctx.k.identity();
    let pts: Vec<GFlowPoint> = js.iter().map(|j| GFlowPoint { k: one, j: *j }).collect();
    let index: HashMap<GFlowPoint, usize> = pts.iter().enumerate().map(|(i, x)| (*x, i)).collect();
    let mut table = vec![vec![0; pts.len()]; pts.len()];
    let mut closed = true;
    let mut witness_agrees = true;
    for (a, x) in pts.iter().enumerate() {
        for (b, y) in pts.iter().enumerate() {
            let z = ctx.star_witness(x, y, 0)?;
            witness_agrees &= z == ctx.star_symbolic(x, y)?;
            match index.get(&z) {
                Some(&c) => table[a][b] = c,
                None => closed = false,
            }
        }
    }
    let e = index[&ctx.identity_point()];
    let group_axioms = closed && verify_group_table(&table, e);
    let injective = {
        let mut seen: Vec<&GFlowPoint> = pts.iter().collect();
        seen.sort();
        seen.dedup();
        seen.len() == js.len()
    };
    let homomorphism = table.as_slice() == ctx.group.table();
    let absorbs_borel = if ctx.k.m >= ctx.classes().precision() && ctx.k.order() <= 20_000 {
        let mut ok = true;
        let e_pt = ctx.identity_point();
        for y in ctx.points()? {
            let z = ctx.normalize(&ctx.star_symbolic(&e_pt, &y)?)?;
            ok &= z.k == one;
        }
        Some(ok)
    } else {
        None
    };
    let vmap = induced_valuation_map(&ctx.group);
    let n = ctx.group.level();
    let mut maps = Vec::new();
    if tower {
        for d in (1..=n).filter(|d| n % d == 0) {
            maps.push(tower_map(ctx.prime(), n, d)?.0);
        }
    }
    let name = |i: usize| js[i].to_string();
    Ok(EllisReport {
        order: pts.len(),
        elements: (0..pts.len()).map(name).collect(),
        table: table
            .iter()
            .map(|row| row.iter().map(|&i| name(i)).collect())
            .collect(),
        iso_checks: IsoChecks {
            group_axioms,
            injective,
            homomorphism,
            witness_agrees,
            absorbs_borel,
        },
        cyclic: ctx.group.is_cyclic(),
        order_profile: ctx.group.order_profile(),
        valuation_map_injective: vmap.injective,
        valuation_map_kernel: vmap.kernel.iter().map(|c| c.to_string()).collect(),
        tower: maps,
        tower_commutes: tower_commutes(ctx.prime(), n)?,
    })
}

/// Random determinant-one matrix with entry valuations roughly in `-spread..=spread`.
pub fn random_sl2(rng: &mut impl rand::Rng, prime: Prime, spread: i64) -> Mat2 {
    loop {
        let a = crate::rng::rational_with_valuation(rng, prime, 50, spread);
        let b = crate::rng::rational_with_valuation(rng, prime, 50, spread);
        let c = crate::rng::rational_with_valuation(rng, prime, 50, spread);
        let d = (Rational::ONE + &b * &c) / &a;
        if d == 0u32 {
            continue;
        }
        if let Valuation::Finite(v) = prime.valuation(&d) {
            if v.abs() <= 2 * spread {
                return Mat2::new(prime, [[a, b], [c, d]]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::rat;

    fn p5() -> Prime {
        Prime::new(5).unwrap()
    }

    fn ctx(m: u32, n: u32) -> Sl2Context {
        Sl2Context::new(p5(), m, n, 2, ScaleLadder::new(8, 2, 6).unwrap()).unwrap()
    }

    #[test]
    fn level_one_group() {
        let k = KLevel::new(p5(), 1).unwrap();
        let all = k.enumerate().unwrap();
        assert_eq!(all.len(), 120);
        assert_eq!(k.order(), 120);
        for x in all.iter().step_by(7) {
            let l = k.lift(x);
            assert!(l.is_sl2() && l.is_integral());
            assert_eq!(k.reduce(&l).unwrap(), *x);
            assert_eq!(k.mul(x, &k.inv(x)), k.identity());
            let (k0, _) = k.coset_normal_form(x);
            let b = k.mul(&k.inv(&k0), x);
            assert_eq!(b[1][0], 0);
        }
        assert_eq!(KLevel::new(p5(), 0).unwrap().order(), 1);
    }

    #[test]
    fn iwasawa_examples() {
        let p = p5();
        let up = Mat2::new(p, [[rat(2), rat(3)], [rat(0), rat(1) / rat(2)]]);
        let (t, h) = iwasawa(&up).unwrap();
        assert!(t.is_identity());
        assert_eq!(h.to_matrix(p), up);
        let g = Mat2::new(p, [[rat(1), rat(0)], [rat(1) / rat(5), rat(1)]]);
        let (t, h) = iwasawa(&g).unwrap();
        assert_eq!(t, Mat2::from_ints(p, [[5, -1], [1, 0]]));
        assert_eq!(
            h.to_matrix(p),
            Mat2::new(p, [[rat(1) / rat(5), rat(1)], [rat(0), rat(5)]])
        );
        let k = Mat2::from_ints(p, [[2, 1], [1, 1]]);
        let (t, h) = iwasawa(&k).unwrap();
        assert_eq!(t, k);
        assert_eq!(h, BorelElem::identity());
        assert!(matches!(
            iwasawa(&Mat2::from_ints(p, [[2, 0], [0, 2]])),
            Err(Error::NotUnimodular(_))
        ));
        let (h, t) = iwasawa_ht(&g).unwrap();
        assert_eq!(h.to_matrix(p).mul(&t), g);
        assert!(t.is_integral());
    }

    #[test]
    fn commute_borel_examples() {
        let p = p5();
        let c = PowerClasses::new(p, 2).unwrap();
        let h = crate::borel::borel_witness_at(&BorelTruncType::new(c.identity()), 20, 40);
        let w = Mat2::from_ints(p, [[0, -1], [1, 0]]);
        let f = commute_borel(&h, &w).unwrap();
        let (alpha, beta) = (h.a().clone(), h.c().clone());
        assert_eq!(f.t().get(1, 0), &((&alpha).reciprocal() / &beta));
        assert_eq!(f.h(), &BorelElem::new(beta.clone(), -alpha).unwrap());
        assert!(f.t().congruent_to_identity(2));
        let b = Mat2::new(p, [[rat(2), rat(1)], [rat(0), rat(1) / rat(2)]]);
        let f = commute_borel(&h, &b).unwrap();
        assert!(matches!(f, Factorization::Borel { .. }));
        assert_eq!(c.class_of(f.h().a()).unwrap(), c.class_of(h.a()).unwrap());
    }

    #[test]
    fn conjugation_examples() {
        let p = p5();
        let one = Rational::ONE;
        let t = Mat2::new(p, [[one.clone(), rat(0)], [p.pow(10), one.clone()]]);
        assert_eq!(conj_stability(&t, &Mat2::identity(p), 10, 2).unwrap(), t);
        let g = Mat2::new(p, [[rat(5), rat(0)], [rat(0), rat(1) / rat(5)]]);
        let out = conj_stability(&t, &g, 10, 2).unwrap();
        assert_eq!(
            out,
            Mat2::new(p, [[one.clone(), rat(0)], [p.pow(8), one.clone()]])
        );
        let w = Mat2::from_ints(p, [[0, -1], [1, 0]]);
        let out = conj_stability(&t, &w, 10, 2).unwrap();
        assert!(out.congruent_to_identity(10));
        assert!(matches!(
            conj_stability(&t, &g, 4, 2),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn star_examples() {
        let c = ctx(1, 2);
        let e = c.identity_point();
        assert_eq!(c.star_witness(&e, &e, 0).unwrap(), e);
        let cl = |x: i64| c.classes().class_of_int(x).unwrap();
        let two = GFlowPoint { k: e.k, j: cl(2) };
        let five = GFlowPoint { k: e.k, j: cl(5) };
        assert_eq!(c.star_witness(&two, &five, 0).unwrap().j, cl(10));
        let k = GFlowPoint {
            k: [[2, 1], [1, 1]],
            j: e.j,
        };
        assert_eq!(c.star_witness(&k, &e, 0).unwrap(), k);
        assert_eq!(c.star_symbolic(&k, &e).unwrap(), k);
    }

    #[test]
    fn perturbed_products_agree_after_normalization() {
        let c = ctx(1, 2);
        let pts = c.points().unwrap();
        for (i, x) in pts.iter().enumerate().step_by(53) {
            let y = pts[(i * 7 + 11) % pts.len()];
            let a = c.star_witness_perturbed(x, &y, 0).unwrap();
            let b = c.star_symbolic(x, &y).unwrap();
            assert_eq!(
                c.normalize(&a).unwrap(),
                c.normalize(&b).unwrap(),
                "{x} * {y}"
            );
        }
    }

    #[test]
    fn ellis_examples() {
        for (n, order, cyclic) in [(1, 1, true), (2, 4, false), (3, 3, true)] {
            let r = ellis_group(&ctx(1, n), true).unwrap();
            assert_eq!(r.order, order);
            assert!(r.iso_checks.all(), "{:?}", r.iso_checks);
            assert_eq!(r.cyclic, cyclic);
            assert!(r.tower_commutes);
        }
        let (t, _) = tower_map(p5(), 3, 1).unwrap();
        assert!(t.map.values().all(|v| v == "1"));
    }

    #[test]
    fn minimal_flow_levels() {
        for (n, size) in [(1, 120), (2, 480)] {
            let f = GFlow::new(ctx(1, n)).unwrap();
            let r = f.report(false).unwrap();
            assert_eq!(r.size, size);
            assert!(r.strongly_connected && r.idempotent);
        }
        assert_eq!(trivial_flow_size(p5(), 1).unwrap(), 1);
    }

    #[test]
    fn star_checks() {
        let c = ctx(1, 2);
        let r = c.exhaustive_star_check().unwrap();
        assert_eq!(r.pairs, 480 * 480);
        assert!(r.ok(), "{:?}", r.mismatches);
        let c = ctx(2, 4);
        let r = c
            .sampled_star_check(40, &mut crate::rng::stream(9))
            .unwrap();
        assert!(r.ok(), "{:?}", r.mismatches);
    }

    #[test]
    fn primitive_roots() {
        assert_eq!(max_order_unit(p5(), 3), 2);
        let g = max_order_unit(Prime::new(7).unwrap(), 2);
        assert_eq!((1..=42).find(|&e| pow_mod(g, e, 49) == 1), Some(42));
    }
}
