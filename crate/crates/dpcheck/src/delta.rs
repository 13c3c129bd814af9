//! The additive slack δ(ε) of (ε, δ)-privacy.

use std::fmt;

use dip_symalg::{eval_interval, fmt_q, parse_value, Interval, PseudoRational, SymError, Q};
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// `δ(ε) = f(ε) · e^{k}`: a pseudo-rational function times an exact
/// constant `e^{k}` with rational `k`. With `k = 0` the slack is purely
/// symbolic; otherwise `e^{k}` is handled through rational enclosures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaSpec {
    pub f: PseudoRational,
    pub k: Q,
}

impl DeltaSpec {
    pub fn zero() -> Self {
        DeltaSpec { f: PseudoRational::zero(), k: Q::zero() }
    }

    pub fn function(f: PseudoRational) -> Self {
        DeltaSpec { f, k: Q::zero() }
    }

    /// The constant `e^{k}`.
    pub fn exp_const(k: Q) -> Self {
        DeltaSpec { f: PseudoRational::one(), k }
    }

    /// Text form: `0`, `exp(-2)`, `exp(-17/8)`, `eps/(1+exp(eps))`, ….
    pub fn parse(s: &str) -> Result<Self, SymError> {
        let v = parse_value(s)?;
        if v.f.is_zero() {
            return Ok(DeltaSpec::zero());
        }
        Ok(DeltaSpec { f: v.f, k: v.k })
    }

    pub fn is_zero(&self) -> bool {
        self.f.is_zero()
    }

    /// Whether the slack is exactly a pseudo-rational function.
    pub fn is_symbolic(&self) -> bool {
        self.k.is_zero()
    }

    /// Rational enclosure of `e^{k}` at working precision `prec`.
    pub fn factor(&self, prec: u32) -> Result<Interval, SymError> {
        eval_interval(&PseudoRational::exp(self.k.clone()), &Q::one(), prec)
    }

    /// Pseudo-rational functions bracketing δ, valid where `f ≥ 0`:
    /// `f·L ≤ δ ≤ f·U` for the enclosure `[L, U]` of `e^{k}`.
    pub fn bounds(&self, prec: u32) -> Result<(PseudoRational, PseudoRational), SymError> {
        if self.is_symbolic() {
            return Ok((self.f.clone(), self.f.clone()));
        }
        let e = self.factor(prec)?;
        Ok((self.f.scale(&e.lo_q()), self.f.scale(&e.hi_q())))
    }

    /// Enclosure of `δ(eps)`.
    pub fn eval(&self, eps: &Q, prec: u32) -> Result<Interval, SymError> {
        let v = eval_interval(&self.f, eps, prec)?;
        if self.is_symbolic() {
            return Ok(v);
        }
        Ok(v.mul(&self.factor(prec)?, prec))
    }
}

impl Default for DeltaSpec {
    fn default() -> Self {
        DeltaSpec::zero()
    }
}

impl fmt::Display for DeltaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_symbolic() {
            write!(f, "{}", self.f)
        } else if self.f.is_one() {
            write!(f, "exp({})", fmt_q(&self.k))
        } else {
            write!(f, "({})*exp({})", self.f, fmt_q(&self.k))
        }
    }
}

impl Serialize for DeltaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DeltaSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        DeltaSpec::parse(&s).map_err(serde::de::Error::custom)
    }
}
