//! The ten acceptance suites. Each returns a [`CriterionResult`] whose `detail`
//! holds the symbolic outputs; timings are left to the caller.

use malachite_base::num::arithmetic::traits::Reciprocal;
use malachite_base::num::basic::traits::{One, Zero};
use num_integer::Integer;
use serde::Serialize;
use serde_json::{json, Value};

use crate::borel::{borel_witness, default_ladder, BorelJ, BorelTruncType};
use crate::error::Result;
use crate::flows::{oracle_act, AffineFlow, GroupTag};
use crate::padic::{mul_mod, pow_mod, val_u64, Config, Mat2, Prime, Rational};
use crate::proj::ProjSpace;
use crate::residues::{build_group, verify_group_table, PowerClasses};
use crate::rng;
use crate::sl2::{
    ellis_group, iwasawa, commute_borel, random_sl2, Factorization, GFlow, KLevel, Sl2Context,
};
use crate::types1::{enumerate_types, roundtrip_check, BaseSet, ScaleLadder, TruncType1};

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "residue groups agree with brute force"),
    (2, "witness roundtrip"),
    (3, "affine flows"),
    (4, "Borel idempotent and group"),
    (5, "Iwasawa and the h t = t' h' factorization"),
    (6, "idempotent and minimal SL(2) flow"),
    (7, "Ellis group and tower"),
    (8, "collapse on the projective line"),
    (9, "projective minimality and proximality"),
    (10, "stabilization under ladder changes"),
];

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub checks: u64,
    pub detail: Value,
}

impl CriterionResult {
    fn new(id: u8, passed: bool, checks: u64, detail: Value) -> Self {
        let name = CRITERIA[id as usize - 1].1;
        CriterionResult {
            id,
            name,
            passed,
            checks,
            detail,
        }
    }
}

pub fn run(id: u8, config: &Config) -> Result<CriterionResult> {
    match id {
        1 => residue_oracle(),
        2 => roundtrip(config),
        3 => affine_flows(config),
        4 => borel_group(config),
        5 => iwasawa_factorization(config),
        6 => minimal_flow(config),
        7 => ellis(config),
        8 => collapse(config),
        9 => proj_minimality(config),
        10 => stabilization(config),
        _ => Err(crate::Error::Precondition(format!("no criterion {id}"))),
    }
}

/// n-th powers among units, found by raising every unit residue modulo `p^K`
/// with `K` two above the Hensel bound.
struct BruteForcePowers {
    p: u64,
    n: u32,
    modulus: u64,
    powers: Vec<bool>,
}

impl BruteForcePowers {
    fn new(p: u64, n: u32) -> Self {
        let k = 2 * val_u64(n as u64, p) + 3;
        let modulus = p.pow(k);
        let mut powers = vec![false; modulus as usize];
        for y in (1..modulus).filter(|y| y % p != 0) {
            powers[pow_mod(y, n as u64, modulus) as usize] = true;
        }
        BruteForcePowers {
            p,
            n,
            modulus,
            powers,
        }
    }

    fn strip(&self, mut x: u64) -> (u64, i64) {
        let mut v = 0;
        while x % self.p == 0 {
            x /= self.p;
            v += 1;
        }
        (x, v)
    }

    fn is_power(&self, num: i64, den: u64) -> bool {
        let (a, va) = self.strip(num.unsigned_abs());
        let (b, vb) = self.strip(den);
        if (va - vb).rem_euclid(self.n as i64) != 0 {
            return false;
        }
        let q = self.modulus;
        let a = if num < 0 { q - a % q } else { a % q };
        // b^(phi(q) - 1) is the inverse of the unit b.
        let phi = q / self.p * (self.p - 1);
        let b_inv = pow_mod(b, phi - 1, q);
        self.powers[mul_mod(a, b_inv, q) as usize]
    }

    /// Number of unit classes: units modulo `p^K` over the n-th power residues.
    fn unit_class_count(&self) -> usize {
        let units = (1..self.modulus).filter(|y| y % self.p != 0).count();
        units / self.powers.iter().filter(|&&b| b).count()
    }
}

/// Criterion 1.
pub fn residue_oracle() -> Result<CriterionResult> {
    let mut checks = 0u64;
    let mut failures = Vec::new();
    let mut orders = Vec::new();
    for p in [3u64, 5, 7] {
        let prime = Prime::new(p)?;
        let bound = p.pow(4) as i64;
        for n in 1..=6 {
            let classes = PowerClasses::new(prime, n)?;
            let oracle = BruteForcePowers::new(p, n);
            for a in 1..=bound {
                for b in 1..=bound {
                    if a.gcd(&b) != 1 {
                        continue;
                    }
                    for num in [a, -a] {
                        let x = Rational::from_signeds(num, b);
                        let got = classes.is_nth_power(&x)?;
                        let want = oracle.is_power(num, b as u64);
                        checks += 1;
                        if got != want && failures.len() < 10 {
                            failures.push(format!("p={p} n={n} x={num}/{b}: {got} vs {want}"));
                        }
                    }
                }
            }
            let group = build_group(prime, n)?;
            let e = group.index_of(&group.identity()).expect("identity");
            let expected = n as usize * oracle.unit_class_count();
            if !(group.verify_axioms() && verify_group_table(group.table(), e)) {
                failures.push(format!("p={p} n={n}: group axioms fail"));
            }
            if group.order() != expected {
                failures.push(format!(
                    "p={p} n={n}: order {} vs {expected}",
                    group.order()
                ));
            }
            orders.push(json!({"p": p, "n": n, "order": group.order()}));
        }
    }
    Ok(CriterionResult::new(
        1,
        failures.is_empty(),
        checks,
        json!({"orders": orders, "failures": failures}),
    ))
}

/// Criterion 2.
pub fn roundtrip(config: &Config) -> Result<CriterionResult> {
    let prime = config.prime;
    let mut checks = 0;
    let mut failures = Vec::new();
    for gap in [config.ladder_gap, 2 * config.ladder_gap] {
        for w in 1..=3 {
            let count = prime.checked_pow(w).map_or(25, |q| q.min(25));
            let bases = BaseSet::integers(count, w, prime)?;
            let ladder = ScaleLadder::new(gap, w, 4)?;
            for n in 1..=4 {
                let group = build_group(prime, n)?;
                for t in enumerate_types(&bases, group.elements()) {
                    checks += 1;
                    if !roundtrip_check(&t, &bases, &ladder, group.classes())? {
                        failures.push(format!("gap={gap} w={w} n={n}: {t}"));
                    }
                }
            }
        }
    }
    Ok(CriterionResult::new(
        2,
        failures.is_empty(),
        checks,
        json!({"failures": failures}),
    ))
}

/// Criterion 3.
pub fn affine_flows(config: &Config) -> Result<CriterionResult> {
    let ga = AffineFlow::new(GroupTag::Ga, config)?;
    let mut rng = rng::stream(3);
    let ladder = default_ladder(config)?;
    let magnitude = ladder.rung(2)?;
    let mut checks = 0;
    let mut moved = Vec::new();
    let at_infinity: Vec<TruncType1> = ga
        .states()
        .iter()
        .filter(|t| t.is_at_infinity())
        .cloned()
        .collect();
    for t in &at_infinity {
        for _ in 0..1000 {
            let b = rng::rational_with_valuation(&mut rng, config.prime, 10_000, 8);
            let sym = ga.act(&b, t)?;
            let orc = oracle_act(
                GroupTag::Ga,
                &b,
                t,
                magnitude,
                ga.bases(),
                ga.group().classes(),
            )?;
            checks += 1;
            if sym != *t || orc != *t {
                moved.push(format!("{t} moved by {b}"));
            }
        }
    }
    let gm = AffineFlow::new(GroupTag::Gm, config)?;
    let minimal = gm.minimal_subflows()?;
    let order = gm.group().order();
    let sizes: Vec<usize> = minimal.iter().map(Vec::len).collect();
    let passed = moved.is_empty()
        && !at_infinity.is_empty()
        && minimal.len() == 2
        && sizes.iter().all(|&s| s == order);
    Ok(CriterionResult::new(
        3,
        passed,
        checks,
        json!({
            "ga_fixed_types": at_infinity.len(),
            "ga_failures": moved,
            "gm_minimal_subflows": minimal,
            "residue_group_order": order,
        }),
    ))
}

fn borel_outputs(config: &Config, ladder: &ScaleLadder) -> Result<Value> {
    let mut out = Vec::new();
    for n in 1..=6 {
        out.push(BorelJ::build(&config.with_level(n)?, ladder)?.report());
    }
    Ok(serde_json::to_value(out).expect("serializable"))
}

/// Criterion 4.
pub fn borel_group(config: &Config) -> Result<CriterionResult> {
    let ladder = default_ladder(config)?;
    let doubled = default_ladder(&config.with_gap(2 * config.ladder_gap))?;
    let mut passed = true;
    let mut checks = 0;
    let mut orders = Vec::new();
    for n in 1..=6 {
        let c = config.with_level(n)?;
        let j = BorelJ::build(&c, &ladder)?;
        let j2 = BorelJ::build(&c, &doubled)?;
        checks += 2 * (j.order() * j.order()) as u64;
        passed &= j.idempotent_check() && j.is_group() && j.iso_to_residue_group();
        passed &= j.report() == j2.report();
        orders.push(json!({"n": n, "order": j.order(), "cyclic": j.residue_group().is_cyclic()}));
    }
    Ok(CriterionResult::new(
        4,
        passed,
        checks,
        json!({"levels": orders}),
    ))
}

/// Criterion 5.
pub fn iwasawa_factorization(config: &Config) -> Result<CriterionResult> {
    let p = config.prime;
    let mut rng = rng::stream(5);
    let mut failures = Vec::new();
    let mut checks = 0;
    for _ in 0..10_000 {
        let g = random_sl2(&mut rng, p, 6);
        let (t, h) = iwasawa(&g)?;
        let hm = h.to_matrix(p);
        checks += 1;
        if t.mul(&hm) != g || !t.is_integral() || !t.is_sl2() || !hm.is_upper_triangular() {
            failures.push(format!("iwasawa {g}"));
        }
    }
    let ladder = default_ladder(config)?;
    let group = build_group(p, config.residue_level)?;
    let k = KLevel::new(p, config.matrix_level)?;
    let mut factorizations = 0;
    for j in group.elements() {
        let h = borel_witness(&BorelTruncType::new(*j), &ladder, 0)?;
        for kk in k.enumerate()? {
            let t = k.lift(&kk);
            let f = commute_borel(&h, &t)?;
            factorizations += 1;
            checks += 1;
            let [[u1, u2], [u3, u4]] = t.entries().clone();
            let (a, c) = (h.a().clone(), h.c().clone());
            let ok = if u3 == 0u32 {
                let cls = group.classes();
                matches!(f, Factorization::Borel { .. })
                    && cls.class_of(f.h().a())? == cls.class_of(&a)?
            } else {
                let x = &a * &u1 + &c * &u3;
                let lower = (&a).reciprocal() * &u3 / &x;
                let one = Rational::ONE;
                let expected_t = Mat2::new(p, [[one.clone(), Rational::ZERO], [lower, one]]);
                *f.t() == expected_t
                    && f.h().a() == &x
                    && *f.h().c() == &a * &u2 + &c * &u4
                    && f.t().congruent_to_identity(config.matrix_level)
            };
            let exact = h.to_matrix(p).mul(&t) == f.t().mul(&f.h().to_matrix(p));
            if !(ok && exact) {
                failures.push(format!("factorization at {t}, class {j}"));
            }
        }
    }
    Ok(CriterionResult::new(
        5,
        failures.is_empty(),
        checks,
        json!({"iwasawa_samples": 10_000, "factorizations": factorizations, "failures": failures}),
    ))
}

fn flow_outputs(config: &Config, ladder: &ScaleLadder) -> Result<(Value, bool)> {
    let ctx = Sl2Context::from_config(config)?.with_ladder(ladder.clone())?;
    let e = ctx.identity_point();
    let plain = ctx.star_witness(&e, &e, 0)?;
    let perturbed = ctx.star_witness_perturbed(&e, &e, 0)?;
    let flow = GFlow::new(ctx)?;
    let table = flow.action_table()?;
    let mut g = crate::graph::Digraph::new(flow.points().len());
    for row in &table {
        for (i, &j) in row.iter().enumerate() {
            g.add_edge(i, j);
        }
    }
    let connected = g.is_strongly_connected();
    let idempotent = plain == e && perturbed == e;
    Ok((
        json!({
            "size": flow.points().len(),
            "e_star_e": plain.to_string(),
            "e_star_e_perturbed": perturbed.to_string(),
            "strongly_connected": connected,
            "action_table": table,
        }),
        idempotent && connected,
    ))
}

/// Criterion 6.
pub fn minimal_flow(config: &Config) -> Result<CriterionResult> {
    let ctx = Sl2Context::from_config(config)?;
    let expected = ctx.klevel().order() as usize * ctx.group().order();
    let (out, ok) = flow_outputs(config, ctx.ladder())?;
    let mut checks = expected as u64;
    let star = if expected <= 2000 {
        let r = ctx.exhaustive_star_check()?;
        checks += r.pairs;
        Some(r)
    } else {
        None
    };
    let star_ok = star.as_ref().is_none_or(|r| r.ok());
    let passed = ok && star_ok && out["size"] == json!(expected);
    Ok(CriterionResult::new(
        6,
        passed,
        checks,
        json!({
            "size": out["size"],
            "strongly_connected": out["strongly_connected"],
            "idempotent": out["e_star_e"],
            "star_check": star,
        }),
    ))
}

fn ellis_outputs(config: &Config, ladder: &ScaleLadder) -> Result<(Value, bool)> {
    let mut reports = Vec::new();
    let mut ok = true;
    for n in 1..=4 {
        let ctx = Sl2Context::new(
            config.prime,
            config.matrix_level,
            n,
            config.window,
            ladder.clone(),
        )?;
        let r = ellis_group(&ctx, true)?;
        ok &= r.iso_checks.all()
            && r.order == ctx.group().order()
            && r.tower_commutes
            && r.tower.iter().all(|t| t.homomorphism && t.surjective);
        reports.push(r);
    }
    Ok((serde_json::to_value(reports).expect("serializable"), ok))
}

/// Criterion 7.
pub fn ellis(config: &Config) -> Result<CriterionResult> {
    let (out, ok) = ellis_outputs(config, &default_ladder(config)?)?;
    let orders: Vec<Value> = out
        .as_array()
        .expect("list")
        .iter()
        .map(|r| json!({"order": r["order"], "cyclic": r["cyclic"], "iso_checks": r["iso_checks"]}))
        .collect();
    let checks = orders
        .iter()
        .map(|r| r["order"].as_u64().unwrap_or(0).pow(2))
        .sum();
    Ok(CriterionResult::new(
        7,
        ok,
        checks,
        json!({"levels": orders}),
    ))
}

fn collapse_outputs(space: &ProjSpace) -> Result<(Value, bool)> {
    let r = space.collapse_check()?;
    let mut images = Vec::new();
    for t in space.all_types() {
        let s = space.p0_star(&t)?;
        images.push(json!([
            t.to_string(),
            s.to_string(),
            space.q0_star(&s)?.to_string()
        ]));
    }
    let ok = r.collapses && r.p0_lands_at_infinity && r.q0_constant_at_infinity;
    Ok((json!({"report": r, "images": images}), ok))
}

/// Criterion 8.
pub fn collapse(config: &Config) -> Result<CriterionResult> {
    let space = ProjSpace::from_config(config)?;
    let r = space.collapse_check()?;
    let ok = r.collapses && r.p0_lands_at_infinity && r.q0_constant_at_infinity;
    Ok(CriterionResult::new(
        8,
        ok,
        r.states as u64,
        serde_json::to_value(r).expect("serializable"),
    ))
}

/// Criterion 9.
pub fn proj_minimality(config: &Config) -> Result<CriterionResult> {
    let space = ProjSpace::from_config(config)?;
    let r = space.minimality_report()?;
    let expected = space.points().len() * space.group().order();
    let ok = r.strongly_connected && r.proximal && r.states == expected;
    Ok(CriterionResult::new(
        9,
        ok,
        r.states as u64,
        serde_json::to_value(r).expect("serializable"),
    ))
}

fn symbolic_outputs(config: &Config, ladder: &ScaleLadder) -> Result<(Value, bool)> {
    let (flow, flow_ok) = flow_outputs(config, ladder)?;
    let (ellis, ellis_ok) = ellis_outputs(config, ladder)?;
    let space = ProjSpace::from_config(config)?.with_ladder(ladder.clone())?;
    let (collapse, collapse_ok) = collapse_outputs(&space)?;
    Ok((
        json!({
            "borel": borel_outputs(config, ladder)?,
            "flow": flow,
            "ellis": ellis,
            "collapse": collapse,
        }),
        flow_ok && ellis_ok && collapse_ok,
    ))
}

/// Criterion 10: the outputs behind criteria 4, 6, 7 and 8 are recomputed with the
/// ladder gap doubled and with every rung doubled, and compared.
pub fn stabilization(config: &Config) -> Result<CriterionResult> {
    let base = default_ladder(config)?;
    let variants = [
        (
            "gap doubled",
            default_ladder(&config.with_gap(2 * config.ladder_gap))?,
        ),
        ("rungs doubled", base.doubled()),
    ];
    let (reference, ok) = symbolic_outputs(config, &base)?;
    let mut passed = ok;
    let mut detail = Vec::new();
    for (name, ladder) in variants {
        let (out, ok) = symbolic_outputs(config, &ladder)?;
        let same = out == reference;
        passed &= ok && same;
        detail.push(json!({"variant": name, "rungs": ladder.rungs(), "identical": same}));
    }
    Ok(CriterionResult::new(
        10,
        passed,
        3,
        json!({"variants": detail}),
    ))
}
