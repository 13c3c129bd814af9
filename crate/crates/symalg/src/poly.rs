//! Exponential polynomials `Σ c · ε^n · e^{qε}` in canonical form.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::{fmt_q, Q};

/// Monomial key. Ordered by exponent rate first, then by the power of ε,
/// so the last key is the term that dominates as ε → ∞.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Key {
    pub expo: Q,
    pub pow: u32,
}

impl Key {
    pub fn new(pow: u32, expo: Q) -> Self {
        Key { expo, pow }
    }
}

/// One term `coef · ε^pow · e^{expo·ε}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoTerm {
    pub coef: Q,
    pub pow: u32,
    pub expo: Q,
}

/// Canonical map `(pow, expo) → coef` with no zero coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PseudoPoly {
    terms: BTreeMap<Key, Q>,
}

impl PseudoPoly {
    pub fn zero() -> Self {
        PseudoPoly::default()
    }

    pub fn one() -> Self {
        PseudoPoly::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        PseudoPoly::monomial(c, 0, Q::zero())
    }

    pub fn monomial(coef: Q, pow: u32, expo: Q) -> Self {
        let mut p = PseudoPoly::zero();
        p.add_term(Key::new(pow, expo), coef);
        p
    }

    /// e^{qε}
    pub fn exp(expo: Q) -> Self {
        PseudoPoly::monomial(Q::one(), 0, expo)
    }

    /// ε
    pub fn eps() -> Self {
        PseudoPoly::monomial(Q::one(), 1, Q::zero())
    }

    pub fn from_terms<I: IntoIterator<Item = PseudoTerm>>(it: I) -> Self {
        let mut p = PseudoPoly::zero();
        for t in it {
            p.add_term(Key::new(t.pow, t.expo), t.coef);
        }
        p
    }

    pub fn add_term(&mut self, key: Key, coef: Q) {
        if coef.is_zero() {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(c) => {
                *c += coef;
                if c.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, coef);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .next()
                .is_some_and(|(k, c)| k.pow == 0 && k.expo.is_zero() && c.is_one())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Key, &Q)> {
        self.terms.iter()
    }

    pub fn terms(&self) -> Vec<PseudoTerm> {
        self.terms
            .iter()
            .map(|(k, c)| PseudoTerm { coef: c.clone(), pow: k.pow, expo: k.expo.clone() })
            .collect()
    }

    /// Term that dominates at +∞ (largest rate, then largest power).
    pub fn leading(&self) -> Option<(&Key, &Q)> {
        self.terms.iter().next_back()
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    /// True when no term carries an exponential factor.
    pub fn is_exp_free(&self) -> bool {
        self.terms.keys().all(|k| k.expo.is_zero())
    }

    pub fn min_expo(&self) -> Option<Q> {
        self.terms.keys().map(|k| k.expo.clone()).min()
    }

    pub fn max_expo(&self) -> Option<Q> {
        self.terms.keys().map(|k| k.expo.clone()).max()
    }

    pub fn min_pow(&self) -> Option<u32> {
        self.terms.keys().map(|k| k.pow).min()
    }

    pub fn max_pow(&self) -> Option<u32> {
        self.terms.keys().map(|k| k.pow).max()
    }

    pub fn neg(&self) -> Self {
        PseudoPoly { terms: self.terms.iter().map(|(k, c)| (k.clone(), -c)).collect() }
    }

    pub fn add(&self, o: &Self) -> Self {
        let (big, small) = if self.len() >= o.len() { (self, o) } else { (o, self) };
        let mut r = big.clone();
        for (k, c) in &small.terms {
            r.add_term(k.clone(), c.clone());
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (k, c) in &o.terms {
            r.add_term(k.clone(), -c);
        }
        r
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut r = PseudoPoly::zero();
        for (k1, c1) in &self.terms {
            for (k2, c2) in &o.terms {
                r.add_term(Key::new(k1.pow + k2.pow, &k1.expo + &k2.expo), c1 * c2);
            }
        }
        r
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return PseudoPoly::zero();
        }
        PseudoPoly { terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect() }
    }

    /// Multiply by `ε^dpow · e^{dexpo·ε}`.
    pub fn shift(&self, dpow: u32, dexpo: &Q) -> Self {
        PseudoPoly {
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (Key::new(k.pow + dpow, &k.expo + dexpo), v.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut r = PseudoPoly::one();
        for _ in 0..n {
            r = r.mul(self);
        }
        r
    }

    /// d/dε.
    pub fn derivative(&self) -> Self {
        let mut r = PseudoPoly::zero();
        for (k, c) in &self.terms {
            if k.pow > 0 {
                r.add_term(Key::new(k.pow - 1, k.expo.clone()), c * Q::from_integer(BigInt::from(k.pow)));
            }
            if !k.expo.is_zero() {
                r.add_term(Key::new(k.pow, k.expo.clone()), c * &k.expo);
            }
        }
        r
    }

    pub fn nth_derivative(&self, n: u32) -> Self {
        let mut r = self.clone();
        for _ in 0..n {
            r = r.derivative();
        }
        r
    }

    /// Substitute ε ↦ a·ε.
    pub fn rescale_eps(&self, a: &Q) -> Self {
        PseudoPoly {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| {
                    let mut f = Q::one();
                    for _ in 0..k.pow {
                        f *= a;
                    }
                    (Key::new(k.pow, &k.expo * a), c * f)
                })
                .collect(),
        }
    }

    /// Exact Taylor coefficient of ε^k at ε = 0.
    pub fn taylor_coeff(&self, k: u32) -> Q {
        let mut s = Q::zero();
        for (key, c) in &self.terms {
            if key.pow > k {
                continue;
            }
            let j = k - key.pow;
            let mut t = c.clone();
            for i in 1..=j {
                t = t * &key.expo / Q::from_integer(BigInt::from(i));
            }
            s += t;
        }
        s
    }

    /// Upper bound on the number of zeros on (0,∞), counted with multiplicity:
    /// Σ over distinct rates of (degree + 1), minus one.
    pub fn root_count_bound(&self) -> u32 {
        let mut deg: BTreeMap<&Q, u32> = BTreeMap::new();
        for k in self.terms.keys() {
            let e = deg.entry(&k.expo).or_insert(0);
            *e = (*e).max(k.pow);
        }
        let total: u32 = deg.values().map(|d| d + 1).sum();
        total.saturating_sub(1)
    }

    /// Exact value when the polynomial has no exponential factors.
    pub fn eval_exact_exp_free(&self, x: &Q) -> Option<Q> {
        if !self.is_exp_free() {
            return None;
        }
        let mut s = Q::zero();
        for (k, c) in &self.terms {
            let mut t = c.clone();
            for _ in 0..k.pow {
                t *= x;
            }
            s += t;
        }
        Some(s)
    }

    /// Common denominator of all rates (the N of the z = e^{ε/N} substitution).
    pub fn expo_denominator_lcm(&self) -> BigInt {
        let mut l = BigInt::one();
        for k in self.terms.keys() {
            l = l.lcm(k.expo.denom());
        }
        l
    }

    /// Split into `c · ε^p · e^{qε} · P` with `P` primitive: integer
    /// coefficients with gcd 1, positive leading coefficient, minimal power 0
    /// and minimal rate 0. Returns `None` for the zero polynomial.
    pub fn split_content(&self) -> Option<(Q, u32, Q, PseudoPoly)> {
        let p = self.min_pow()?;
        let e = self.min_expo()?;
        let mut den_lcm = BigInt::one();
        let mut num_gcd = BigInt::zero();
        for c in self.terms.values() {
            den_lcm = den_lcm.lcm(c.denom());
            num_gcd = num_gcd.gcd(c.numer());
        }
        let mut content = Q::new(num_gcd, den_lcm);
        if self.leading().map(|(_, c)| c.is_negative()).unwrap_or(false) {
            content = -content;
        }
        let neg_e = -&e;
        let prim = PseudoPoly {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (Key::new(k.pow - p, &k.expo + &neg_e), c / &content))
                .collect(),
        };
        Some((content, p, e, prim))
    }

    /// Exact division in Q[ε, e^{ε/N}] (lexicographic by rate, then power).
    /// Returns `None` when `d` does not divide `self`.
    pub fn try_div(&self, d: &PseudoPoly) -> Option<PseudoPoly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(PseudoPoly::zero());
        }
        let (lk, lc) = d.leading().map(|(k, c)| (k.clone(), c.clone()))?;
        let floor = self.min_expo()? - d.min_expo()?;
        let mut r = self.clone();
        let mut q = PseudoPoly::zero();
        let budget = 4 * (self.len() + 1) * (d.len() + 1) + 64;
        let mut steps = 0usize;
        while let Some((rk, rc)) = r.leading().map(|(k, c)| (k.clone(), c.clone())) {
            steps += 1;
            if steps > budget || rk.pow < lk.pow {
                return None;
            }
            let de = &rk.expo - &lk.expo;
            if de < floor {
                return None;
            }
            let m = PseudoPoly::monomial(rc / &lc, rk.pow - lk.pow, de);
            r = r.sub(&m.mul(d));
            q = q.add(&m);
        }
        Some(q)
    }
}

impl fmt::Display for PseudoPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            first = false;
            let a = c.abs();
            let mut parts: Vec<String> = Vec::new();
            if !a.is_one() || (k.pow == 0 && k.expo.is_zero()) {
                parts.push(fmt_q(&a));
            }
            match k.pow {
                0 => {}
                1 => parts.push("eps".into()),
                n => parts.push(format!("eps^{n}")),
            }
            if !k.expo.is_zero() {
                parts.push(format!("exp({}*eps)", fmt_q(&k.expo)));
            }
            write!(f, "{}", parts.join(" * "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::q;

    #[test]
    fn cancellation_and_keys() {
        let a = PseudoPoly::monomial(q(2, 1), 1, q(1, 2));
        let b = PseudoPoly::monomial(q(-2, 1), 1, q(1, 2));
        assert!(a.add(&b).is_zero());
        let c = PseudoPoly::monomial(q(1, 1), 1, q(1, 3));
        assert!(!a.add(&c).is_zero());
    }

    #[test]
    fn exp_square() {
        let h = PseudoPoly::exp(q(1, 2));
        assert!(h.mul(&h).sub(&PseudoPoly::exp(q(1, 1))).is_zero());
    }

    #[test]
    fn derivative_and_taylor() {
        // e^ε - 1 - ε: Taylor 0, 0, 1/2, 1/6
        let f = PseudoPoly::exp(q(1, 1)).sub(&PseudoPoly::one()).sub(&PseudoPoly::eps());
        assert_eq!(f.taylor_coeff(0), q(0, 1));
        assert_eq!(f.taylor_coeff(1), q(0, 1));
        assert_eq!(f.taylor_coeff(2), q(1, 2));
        assert_eq!(f.taylor_coeff(3), q(1, 6));
        let d = f.derivative();
        assert!(d.sub(&PseudoPoly::exp(q(1, 1)).sub(&PseudoPoly::one())).is_zero());
    }

    #[test]
    fn exact_division() {
        let a = PseudoPoly::exp(q(1, 1)).sub(&PseudoPoly::one());
        let b = PseudoPoly::exp(q(1, 1)).add(&PseudoPoly::eps());
        let p = a.mul(&b);
        assert_eq!(p.try_div(&a), Some(b.clone()));
        assert_eq!(p.try_div(&b), Some(a.clone()));
        let c = PseudoPoly::exp(q(1, 2)).add(&PseudoPoly::one());
        let two = PseudoPoly::exp(q(1, 2)).add(&PseudoPoly::constant(q(2, 1)));
        assert_eq!(p.try_div(&two), None);
        // e^{ε} - 1 = (e^{ε/2} - 1)(e^{ε/2} + 1)
        assert!(a.try_div(&c).is_some());
    }

    #[test]
    fn content_split() {
        let p = PseudoPoly::monomial(q(-4, 3), 2, q(1, 2)).add(&PseudoPoly::monomial(q(2, 3), 3, q(3, 2)));
        let (c, pw, e, prim) = p.split_content().unwrap();
        assert_eq!(c, q(2, 3));
        assert_eq!(pw, 2);
        assert_eq!(e, q(1, 2));
        let rebuilt = prim.shift(pw, &e).scale(&c);
        assert!(rebuilt.sub(&p).is_zero());
    }
}
