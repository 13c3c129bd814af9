//! Exact algebra of exponential polynomials `Σ c · ε^n · e^{qε}` and their
//! ratios, with certified interval evaluation and a sign decision over
//! intervals of `(0, ∞)`.
//!
//! Everything here is exact: coefficients and rates are big rationals,
//! transcendental values are enclosed by outward-rounded dyadic intervals.

pub mod dyadic;
pub mod eval;
pub mod poly;
pub mod qserde;
pub mod ratfn;
pub mod sign;
pub mod text;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub use dyadic::{Dyadic, Interval, Round};
pub use eval::{eval_interval, eval_poly, Compiled};
pub use poly::{Key, PseudoPoly, PseudoTerm};
pub use ratfn::{Op, PseudoRational};
pub use sign::{isolate_roots, refine_root, sign_on_interval, EpsInterval, RootInterval, SignConfig, SignVerdict};
pub use text::{parse_pseudo_rational, parse_value, Val};

/// Exact rationals.
pub type Q = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SymError {
    #[error("division by an identically zero function")]
    ZeroDivision,
    #[error("possible pole: denominator enclosure contains 0 at {precision} bits")]
    PossiblePole { precision: u32 },
    #[error("parse error at offset {offset}: {msg}")]
    Parse { offset: usize, msg: String },
}

/// `n / d` as an exact rational.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// `p/q` text form, or `p` for integers.
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parse `p`, `-p`, `p/q` (whitespace tolerated around the slash).
pub fn parse_q(s: &str) -> Result<Q, SymError> {
    let err = |msg: &str| SymError::Parse { offset: 0, msg: format!("{msg}: {s:?}") };
    let t = s.trim();
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| err("invalid rational"))?;
    let d: BigInt = d.parse().map_err(|_| err("invalid rational"))?;
    if d.is_zero() {
        return Err(err("zero denominator"));
    }
    Ok(Q::new(n, d))
}

/// Smallest integer `k ≥ 0` with `2^k ≥ x` for positive `x`.
pub(crate) fn ceil_log2(x: &Q) -> i64 {
    let mut k = 0i64;
    let mut p = Q::one();
    if x.is_positive() && *x < p {
        while &p / qi(2) >= *x {
            p /= qi(2);
            k -= 1;
        }
        return k;
    }
    while p < *x {
        p *= qi(2);
        k += 1;
    }
    k
}
