//! Ratios of exponential polynomials.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::poly::PseudoPoly;
use crate::{SymError, Q};

/// `num / den`, both exponential polynomials.
///
/// Normal form: `den = ε^a · e^{bε} · D` with `D` primitive (integer
/// coefficients, gcd 1, positive leading coefficient, minimal power and
/// rate 0), every rate in `num` and `den` non-negative, and the monomial
/// parts of numerator and denominator never both nontrivial in the same
/// variable. Exact common factors found by division are cancelled.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PseudoRational {
    num: PseudoPoly,
    den: PseudoPoly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl PseudoRational {
    pub fn zero() -> Self {
        PseudoRational { num: PseudoPoly::zero(), den: PseudoPoly::one() }
    }

    pub fn one() -> Self {
        PseudoRational::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        PseudoRational::from_poly(PseudoPoly::constant(c))
    }

    pub fn from_poly(p: PseudoPoly) -> Self {
        PseudoRational::new(p, PseudoPoly::one()).expect("unit denominator")
    }

    pub fn eps() -> Self {
        PseudoRational::from_poly(PseudoPoly::eps())
    }

    pub fn exp(q: Q) -> Self {
        PseudoRational::from_poly(PseudoPoly::exp(q))
    }

    pub fn new(num: PseudoPoly, den: PseudoPoly) -> Result<Self, SymError> {
        if den.is_zero() {
            return Err(SymError::ZeroDivision);
        }
        Ok(normalize(num, den))
    }

    pub fn num(&self) -> &PseudoPoly {
        &self.num
    }

    pub fn den(&self) -> &PseudoPoly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    /// Denominator is a single monomial (ε^a e^{bε} with positive coefficient).
    pub fn has_monomial_den(&self) -> bool {
        self.den.is_monomial()
    }

    pub fn as_constant(&self) -> Option<Q> {
        if !self.den.is_one() || self.num.len() > 1 {
            return None;
        }
        match self.num.iter().next() {
            None => Some(Q::zero()),
            Some((k, c)) if k.pow == 0 && k.expo.is_zero() => Some(c.clone()),
            _ => None,
        }
    }

    pub fn neg(&self) -> Self {
        PseudoRational { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn add(&self, o: &Self) -> Self {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        if self.den == o.den {
            return normalize(self.num.add(&o.num), self.den.clone());
        }
        if let Some(k) = o.den.try_div(&self.den) {
            return normalize(self.num.mul(&k).add(&o.num), o.den.clone());
        }
        if let Some(k) = self.den.try_div(&o.den) {
            return normalize(self.num.add(&o.num.mul(&k)), self.den.clone());
        }
        normalize(
            self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            self.den.mul(&o.den),
        )
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return PseudoRational::zero();
        }
        let (n1, d2) = cancel(&self.num, &o.den);
        let (n2, d1) = cancel(&o.num, &self.den);
        normalize(n1.mul(&n2), d1.mul(&d2))
    }

    pub fn recip(&self) -> Result<Self, SymError> {
        if self.is_zero() {
            return Err(SymError::ZeroDivision);
        }
        Ok(normalize(self.den.clone(), self.num.clone()))
    }

    pub fn div(&self, o: &Self) -> Result<Self, SymError> {
        Ok(self.mul(&o.recip()?))
    }

    pub fn combine(&self, o: &Self, op: Op) -> Result<Self, SymError> {
        match op {
            Op::Add => Ok(self.add(o)),
            Op::Sub => Ok(self.sub(o)),
            Op::Mul => Ok(self.mul(o)),
            Op::Div => self.div(o),
        }
    }

    pub fn scale(&self, c: &Q) -> Self {
        normalize(self.num.scale(c), self.den.clone())
    }

    /// Multiply by e^{qε}.
    pub fn mul_exp(&self, q: &Q) -> Self {
        normalize(self.num.shift(0, q), self.den.clone())
    }

    /// Substitute ε ↦ a·ε.
    pub fn rescale_eps(&self, a: &Q) -> Self {
        normalize(self.num.rescale_eps(a), self.den.rescale_eps(a))
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut r = PseudoRational::one();
        for _ in 0..n {
            r = r.mul(self);
        }
        r
    }

    /// Number of terms in numerator plus denominator (pivot heuristic size).
    pub fn size(&self) -> usize {
        self.num.len() + self.den.len()
    }
}

/// Remove the exact common factor of `a` and `b` when one divides the other
/// (after stripping monomial content).
fn cancel(a: &PseudoPoly, b: &PseudoPoly) -> (PseudoPoly, PseudoPoly) {
    if b.is_one() || a.is_zero() {
        return (a.clone(), b.clone());
    }
    if a == b {
        return (PseudoPoly::one(), PseudoPoly::one());
    }
    let (Some((ca, pa, ea, pra)), Some((cb, pb, eb, prb))) = (a.split_content(), b.split_content())
    else {
        return (a.clone(), b.clone());
    };
    if prb.is_one() || pra.is_one() {
        return (a.clone(), b.clone());
    }
    if let Some(k) = pra.try_div(&prb) {
        return (k.shift(pa, &ea).scale(&ca), PseudoPoly::one().shift(pb, &eb).scale(&cb));
    }
    if let Some(k) = prb.try_div(&pra) {
        return (PseudoPoly::one().shift(pa, &ea).scale(&ca), k.shift(pb, &eb).scale(&cb));
    }
    (a.clone(), b.clone())
}

fn normalize(num: PseudoPoly, den: PseudoPoly) -> PseudoRational {
    assert!(!den.is_zero(), "identically zero denominator");
    let Some((cn, pn, en, mut n)) = num.split_content() else {
        return PseudoRational::zero();
    };
    let (cd, pd, ed, mut d) = den.split_content().expect("nonzero denominator");
    if n == d {
        n = PseudoPoly::one();
        d = PseudoPoly::one();
    } else if !d.is_one() {
        if let Some(k) = n.try_div(&d) {
            n = k;
            d = PseudoPoly::one();
        } else if let Some(k) = d.try_div(&n) {
            n = PseudoPoly::one();
            d = k;
        }
    }
    let c = cn / cd;
    let p = pn as i64 - pd as i64;
    let e = en - ed;
    let zero = Q::zero();
    let (np, dp) = if p >= 0 { (p as u32, 0) } else { (0, (-p) as u32) };
    let (ne, de) = if e >= zero { (e, zero) } else { (zero, -e) };
    PseudoRational { num: n.shift(np, &ne).scale(&c), den: d.shift(dp, &de) }
}

impl fmt::Display for PseudoRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "({})", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}

impl Serialize for PseudoRational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PseudoRational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        crate::text::parse_pseudo_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Sign of the leading coefficient of the numerator (the sign at +∞ when the
/// denominator is positive there).
pub fn leading_sign(p: &PseudoPoly) -> i32 {
    match p.leading() {
        Some((_, c)) if c.is_positive() => 1,
        Some(_) => -1,
        None => 0,
    }
}
