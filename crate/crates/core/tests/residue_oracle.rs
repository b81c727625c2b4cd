use num_integer::Integer;
use padyn_core::padic::{Prime, Rational};
use padyn_core::residues::PowerClasses;

/// `x` is an n-th power in Q_p iff its valuation is divisible by n and its unit part
/// is an n-th power modulo `p^(2 v_p(n) + 3)`. The table lists the n-th powers of units.
struct Table {
    p: i64,
    n: i64,
    q: i64,
    powers: Vec<bool>,
}

impl Table {
    fn new(p: i64, n: u32) -> Self {
        let mut k = 3;
        let mut m = n as i64;
        while m % p == 0 {
            m /= p;
            k += 2;
        }
        let q = p.pow(k);
        let mut powers = vec![false; q as usize];
        for y in (1..q).filter(|y| y % p != 0) {
            let mut acc = 1i64;
            for _ in 0..n {
                acc = acc * y % q;
            }
            powers[acc as usize] = true;
        }
        Table {
            p,
            n: n as i64,
            q,
            powers,
        }
    }

    fn strip(&self, mut x: i64) -> (i64, i64) {
        let mut v = 0;
        while x % self.p == 0 {
            x /= self.p;
            v += 1;
        }
        (x, v)
    }

    fn is_power(&self, num: i64, den: i64) -> bool {
        let (a, va) = self.strip(num);
        let (b, vb) = self.strip(den);
        if (va - vb).rem_euclid(self.n) != 0 {
            return false;
        }
        // y^n = a / b  <=>  (y b)^n = a b^(n-1).
        let mut rhs = a.rem_euclid(self.q);
        for _ in 0..self.n - 1 {
            rhs = rhs * b % self.q;
        }
        self.powers[rhs as usize]
    }
}

#[test]
fn high_levels_agree_with_brute_force() {
    for p in [3i64, 5, 7] {
        let bound = p.pow(4);
        for n in [7u32, 8] {
            let classes = PowerClasses::new(Prime::new(p as u64).unwrap(), n).unwrap();
            let table = Table::new(p, n);
            for a in 1..=bound {
                for b in (1..=bound).filter(|b| a.gcd(b) == 1) {
                    for num in [a, -a] {
                        let x = Rational::from_signeds(num, b);
                        assert_eq!(
                            classes.is_nth_power(&x).unwrap(),
                            table.is_power(num, b),
                            "p = {p}, n = {n}, x = {num}/{b}"
                        );
                    }
                }
            }
        }
    }
}
