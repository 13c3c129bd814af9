//! Pseudo-polynomials with negative powers of ε: `ε^shift · p(ε)`.
//!
//! Real-sort integrals only ever divide by powers of `γε`, so their
//! coefficients stay in this ring and avoid general fraction arithmetic.

use std::fmt;

use dip_symalg::{PseudoPoly, PseudoRational, Q};

/// `ε^shift · poly`, canonical with `poly` either zero (and `shift = 0`) or
/// having a term of ε-power 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EpsLaurent {
    shift: i32,
    poly: PseudoPoly,
}

impl EpsLaurent {
    pub fn zero() -> Self {
        EpsLaurent { shift: 0, poly: PseudoPoly::zero() }
    }

    pub fn one() -> Self {
        EpsLaurent { shift: 0, poly: PseudoPoly::one() }
    }

    pub fn constant(c: Q) -> Self {
        EpsLaurent::new(0, PseudoPoly::constant(c))
    }

    pub fn new(shift: i32, poly: PseudoPoly) -> Self {
        match poly.min_pow() {
            None => EpsLaurent::zero(),
            Some(0) => EpsLaurent { shift, poly },
            Some(m) => EpsLaurent { shift: shift + m as i32, poly: lower(&poly, m) },
        }
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let m = self.shift.min(o.shift);
        let a = self.poly.shift((self.shift - m) as u32, &Q::default());
        let b = o.poly.shift((o.shift - m) as u32, &Q::default());
        EpsLaurent::new(m, a.add(&b))
    }

    pub fn mul(&self, o: &Self) -> Self {
        EpsLaurent::new(self.shift + o.shift, self.poly.mul(&o.poly))
    }

    pub fn scale(&self, c: &Q) -> Self {
        EpsLaurent::new(self.shift, self.poly.scale(c))
    }

    /// Multiply by `e^{qε}`.
    pub fn mul_exp(&self, q: &Q) -> Self {
        EpsLaurent { shift: self.shift, poly: self.poly.shift(0, q) }
    }

    /// Multiply by `ε^k`.
    pub fn mul_eps_pow(&self, k: i32) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        EpsLaurent { shift: self.shift + k, poly: self.poly.clone() }
    }

    pub fn to_ratfn(&self) -> PseudoRational {
        if self.shift >= 0 {
            PseudoRational::from_poly(self.poly.shift(self.shift as u32, &Q::default()))
        } else {
            let den = PseudoPoly::monomial(Q::from_integer(1.into()), (-self.shift) as u32, Q::default());
            PseudoRational::new(self.poly.clone(), den).expect("monomial denominator is nonzero")
        }
    }
}

/// Divide every term by `ε^m` (all powers are at least `m`).
fn lower(p: &PseudoPoly, m: u32) -> PseudoPoly {
    let mut out = PseudoPoly::zero();
    for (k, c) in p.iter() {
        out.add_term(dip_symalg::Key::new(k.pow - m, k.expo.clone()), c.clone());
    }
    out
}

impl fmt::Display for EpsLaurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_ratfn())
    }
}
