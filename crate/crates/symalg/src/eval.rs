//! Certified interval evaluation.
//!
//! A polynomial is compiled once into terms `c · ε^p · z^m` with
//! `z = e^{ε/N}` (N the common denominator of all rates, m an integer), so one
//! evaluation needs only two interval exponentials.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::dyadic::Interval;
use crate::poly::PseudoPoly;
use crate::ratfn::PseudoRational;
use crate::{SymError, Q};

/// Highest precision tried by the auto-refining evaluators.
pub const MAX_PRECISION: u32 = 1024;

#[derive(Clone, Debug)]
struct CTerm {
    coef: Q,
    pow: u32,
    m: i64,
}

/// Polynomial in `ε`, `z = e^{ε/N}` and `w = 1/z`.
#[derive(Clone, Debug)]
pub struct Compiled {
    n: Q,
    terms: Vec<CTerm>,
    exp_free: bool,
    source: PseudoPoly,
}

impl Compiled {
    pub fn new(p: &PseudoPoly) -> Self {
        Compiled::with_denominator(p, &p.expo_denominator_lcm())
    }

    /// Compile against `z = e^{ε/n}`; `n` must be a multiple of every rate
    /// denominator of `p`.
    pub fn with_denominator(p: &PseudoPoly, n: &BigInt) -> Self {
        let nq = Q::from_integer(n.clone());
        let terms = p
            .iter()
            .map(|(k, c)| {
                let m = &k.expo * &nq;
                assert!(m.is_integer(), "rate denominator does not divide n");
                CTerm { coef: c.clone(), pow: k.pow, m: m.to_integer().to_i64().expect("rate numerator fits in i64") }
            })
            .collect();
        Compiled { n: nq, terms, exp_free: p.is_exp_free(), source: p.clone() }
    }

    pub fn poly(&self) -> &PseudoPoly {
        &self.source
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Exact value at a rational point when there are no exponentials.
    pub fn exact(&self, x: &Q) -> Option<Q> {
        if !self.exp_free {
            return None;
        }
        self.source.eval_exact_exp_free(x)
    }

    fn basis(&self, x: &Interval, wp: u32) -> Basis {
        let need_z = self.terms.iter().any(|t| t.m > 0);
        let need_w = self.terms.iter().any(|t| t.m < 0);
        Basis::new(x, &self.n, need_z, need_w, wp)
    }

    /// Enclosure over `x` (a point or a range inside `[0, ∞)`).
    pub fn eval(&self, x: &Interval, prec: u32) -> Interval {
        if self.terms.is_empty() {
            return Interval::zero();
        }
        let wp = prec + 16;
        let b = self.basis(x, wp);
        round_out(&self.eval_basis(&b, wp), prec)
    }

    fn eval_basis(&self, b: &Basis, wp: u32) -> Interval {
        let max_pow = self.terms.iter().map(|t| t.pow).max().unwrap_or(0);
        let mut xp = Vec::with_capacity(max_pow as usize + 1);
        xp.push(Interval::one());
        for i in 1..=max_pow as usize {
            let next = xp[i - 1].mul(&b.x, wp);
            xp.push(next);
        }
        let mut acc = Interval::zero();
        for t in &self.terms {
            let mut v = Interval::from_q(&t.coef, wp).mul(&xp[t.pow as usize], wp);
            if t.m > 0 {
                v = v.mul(&b.z.pow_nonneg(t.m as u32, wp), wp);
            } else if t.m < 0 {
                v = v.mul(&b.w.pow_nonneg((-t.m) as u32, wp), wp);
            }
            acc = acc.add(&v, wp);
        }
        acc
    }
}

/// `x`, `z = e^{x/N}` and `w = e^{-x/N}` at working precision.
struct Basis {
    x: Interval,
    z: Interval,
    w: Interval,
}

impl Basis {
    fn new(x: &Interval, n: &Q, need_z: bool, need_w: bool, wp: u32) -> Self {
        if !need_z && !need_w {
            return Basis { x: x.clone(), z: Interval::one(), w: Interval::one() };
        }
        let y = x.div(&Interval::from_q(n, wp), wp).expect("N > 0");
        let z = y.exp(wp);
        let w = if need_w {
            Interval::one().div(&z, wp).expect("exp is positive")
        } else {
            Interval::one()
        };
        Basis { x: x.clone(), z, w }
    }
}

fn round_out(x: &Interval, prec: u32) -> Interval {
    use crate::dyadic::Round;
    Interval::new(x.lo.round(prec, Round::Down), x.hi.round(prec, Round::Up))
}

/// Enclosure of a polynomial at a rational point.
pub fn eval_poly(p: &PseudoPoly, eps: &Q, prec: u32) -> Interval {
    Compiled::new(p).eval(&Interval::from_q(eps, prec + 16), prec)
}

/// Compiled numerator/denominator pair together with the numerator's
/// derivative, used by the sign analysis.
#[derive(Clone, Debug)]
pub struct CompiledRatio {
    pub num: Compiled,
    pub den: Compiled,
}

impl CompiledRatio {
    pub fn new(f: &PseudoRational) -> Self {
        let n = f.num().expo_denominator_lcm().lcm(&f.den().expo_denominator_lcm());
        CompiledRatio { num: Compiled::with_denominator(f.num(), &n), den: Compiled::with_denominator(f.den(), &n) }
    }

    /// Enclosure at a rational point, escalating precision from `prec` up to
    /// `max_prec` until the denominator excludes zero.
    pub fn eval_point(&self, eps: &Q, prec: u32, max_prec: u32) -> Result<Interval, SymError> {
        let need_z = self.num.terms.iter().chain(&self.den.terms).any(|t| t.m > 0);
        let need_w = self.num.terms.iter().chain(&self.den.terms).any(|t| t.m < 0);
        let mut p = prec;
        loop {
            let wp = p + 16;
            let x = Interval::from_q(eps, wp);
            let b = Basis::new(&x, &self.num.n, need_z, need_w, wp);
            let d = self.den.eval_basis(&b, wp);
            if !d.contains_zero() {
                let n = self.num.eval_basis(&b, wp);
                return Ok(round_out(&n.div(&d, wp).expect("denominator excludes zero"), p));
            }
            if p >= max_prec {
                return Err(SymError::PossiblePole { precision: p });
            }
            p = (p * 2).min(max_prec);
        }
    }
}

/// Certified enclosure of `f(eps)` for rational `eps > 0`.
///
/// Starts at `precision_bits` and refines while the denominator enclosure
/// contains zero, up to [`MAX_PRECISION`] bits.
pub fn eval_interval(f: &PseudoRational, eps: &Q, precision_bits: u32) -> Result<Interval, SymError> {
    assert!(eps.is_positive() || eps.is_zero(), "evaluation point must be non-negative");
    CompiledRatio::new(f).eval_point(eps, precision_bits, MAX_PRECISION.max(precision_bits))
}

/// Width of an enclosure as an exact rational.
pub fn width_q(x: &Interval) -> Q {
    x.width().to_q()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{parse_pseudo_rational, q};

    #[test]
    fn e_at_one() {
        let f = PseudoRational::exp(q(1, 1));
        let v = eval_interval(&f, &q(1, 1), 128).unwrap();
        let e_lo = q(27182818284, 10000000000);
        let e_hi = q(27182818285, 10000000000);
        assert!(v.lo_q() > e_lo && v.hi_q() < e_hi);
        assert!(width_q(&v) <= Q::new(BigInt::from(4), BigInt::from(1) << 128usize));
    }

    #[test]
    fn small_eps_difference_quotient() {
        let f = parse_pseudo_rational("(exp(eps) - 1)/eps").unwrap();
        let v = eval_interval(&f, &q(1, 1000), 128).unwrap();
        assert!(v.lo_q() > q(10005, 10000) && v.hi_q() < q(100051, 100000));
    }

    #[test]
    fn negative_rates() {
        let p = PseudoPoly::exp(q(-3, 2)).add(&PseudoPoly::monomial(q(2, 1), 2, q(1, 3)));
        let v = eval_poly(&p, &q(2, 1), 128);
        // e^{-3} + 8 e^{2/3}
        assert!(v.lo_q() > q(156316, 10000) && v.hi_q() < q(156317, 10000));
    }

    #[test]
    fn range_enclosure_contains_points() {
        let p = parse_pseudo_rational("exp(eps) - 2*eps^2 - 1").unwrap();
        let c = Compiled::new(p.num());
        let r = c.eval(&Interval::from_q_range(&q(1, 2), &q(3, 1), 64), 64);
        for k in 1..=12 {
            let x = q(1, 2) + q(k, 5) * q(1, 2);
            let v = c.eval(&Interval::from_q(&x, 80), 64);
            assert!(r.lo <= v.lo && v.hi <= r.hi);
        }
    }
}
