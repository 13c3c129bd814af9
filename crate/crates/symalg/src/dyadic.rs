//! Dyadic rationals `m · 2^e` and outward-rounded intervals over them.
//!
//! Every value here is an exact rational; "precision" only controls how far
//! endpoints are rounded (always away from the enclosed set), so enclosures
//! stay certified regardless of the working precision.

use std::cmp::Ordering;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::Q;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round {
    Down,
    Up,
}

/// Exact value `m · 2^e`. Kept with odd mantissa (or zero) so equality is structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    m: BigInt,
    e: i64,
}

fn shr_round(m: &BigInt, k: u64, dir: Round) -> BigInt {
    if k == 0 {
        return m.clone();
    }
    let mag = m.magnitude();
    let q = mag >> k;
    let exact = (&q << k) == *mag;
    let neg = m.sign() == Sign::Minus;
    // round the magnitude according to direction and sign
    let bump = !exact && ((dir == Round::Up) != neg);
    let q = if bump { q + 1u32 } else { q };
    let q = BigInt::from(q);
    if neg {
        -q
    } else {
        q
    }
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic { m: BigInt::zero(), e: 0 }
    }

    pub fn one() -> Self {
        Dyadic { m: BigInt::one(), e: 0 }
    }

    pub fn new(m: BigInt, e: i64) -> Self {
        let mut d = Dyadic { m, e };
        d.canon();
        d
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic::new(BigInt::from(v), 0)
    }

    fn canon(&mut self) {
        if self.m.is_zero() {
            self.e = 0;
            return;
        }
        let tz = self.m.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.m >>= tz;
            self.e += tz as i64;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.m.is_zero()
    }

    pub fn signum(&self) -> i32 {
        match self.m.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    /// Ceiling of log2 |x| style magnitude: |x| < 2^mag. Zero yields i64::MIN.
    pub fn mag(&self) -> i64 {
        if self.m.is_zero() {
            return i64::MIN;
        }
        self.m.bits() as i64 + self.e
    }

    pub fn neg(&self) -> Self {
        Dyadic { m: -&self.m, e: self.e }
    }

    pub fn abs(&self) -> Self {
        Dyadic { m: self.m.abs(), e: self.e }
    }

    pub fn add(&self, o: &Self) -> Self {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let e = self.e.min(o.e);
        let a = &self.m << (self.e - e) as u64;
        let b = &o.m << (o.e - e) as u64;
        Dyadic::new(a + b, e)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        Dyadic::new(&self.m * &o.m, self.e + o.e)
    }

    /// Multiply by 2^k exactly.
    pub fn shl(&self, k: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Dyadic { m: self.m.clone(), e: self.e + k }
    }

    /// Round to at most `prec` significant bits in direction `dir`.
    pub fn round(&self, prec: u32, dir: Round) -> Self {
        let bits = self.m.bits();
        if bits <= prec as u64 {
            return self.clone();
        }
        let k = bits - prec as u64;
        Dyadic::new(shr_round(&self.m, k, dir), self.e + k as i64)
    }

    pub fn from_q(q: &Q, prec: u32, dir: Round) -> Self {
        let n = q.numer();
        let d = q.denom();
        if n.is_zero() {
            return Dyadic::zero();
        }
        if d.is_one() {
            return Dyadic::new(n.clone(), 0).round(prec, dir);
        }
        // choose s so that n·2^s / d carries about prec+2 bits
        let s = prec as i64 + 2 + d.bits() as i64 - n.bits() as i64;
        let (num, den) = if s >= 0 {
            (n << s as u64, d.clone())
        } else {
            (n.clone(), d << (-s) as u64)
        };
        let (quo, rem) = num.div_mod_floor(&den);
        let quo = if !rem.is_zero() && dir == Round::Up { quo + 1 } else { quo };
        Dyadic::new(quo, -s).round(prec, dir)
    }

    pub fn to_q(&self) -> Q {
        if self.e >= 0 {
            Q::from_integer(&self.m << self.e as u64)
        } else {
            Q::new(self.m.clone(), BigInt::one() << (-self.e) as u64)
        }
    }

    /// `self / o` rounded to `prec` bits.
    pub fn div(&self, o: &Self, prec: u32, dir: Round) -> Self {
        assert!(!o.is_zero(), "dyadic division by zero");
        if self.is_zero() {
            return Dyadic::zero();
        }
        let s = prec as i64 + 2 + o.m.bits() as i64 - self.m.bits() as i64;
        let s = s.max(0);
        let num = &self.m << s as u64;
        let (quo, rem) = num.div_mod_floor(&o.m);
        let quo = if !rem.is_zero() && dir == Round::Up { quo + 1 } else { quo };
        Dyadic::new(quo, self.e - o.e - s).round(prec, dir)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.signum(), other.signum());
        if sa != sb {
            return sa.cmp(&sb);
        }
        if sa == 0 {
            return Ordering::Equal;
        }
        // same nonzero sign: compare magnitudes quickly, then exactly
        let (ma, mb) = (self.mag(), other.mag());
        if ma != mb {
            let o = ma.cmp(&mb);
            return if sa > 0 { o } else { o.reverse() };
        }
        self.sub(other).signum().cmp(&0)
    }
}

/// Closed interval `[lo, hi]` with dyadic endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Dyadic,
    pub hi: Dyadic,
}

impl Interval {
    pub fn point(d: Dyadic) -> Self {
        Interval { lo: d.clone(), hi: d }
    }

    pub fn zero() -> Self {
        Interval::point(Dyadic::zero())
    }

    pub fn one() -> Self {
        Interval::point(Dyadic::one())
    }

    pub fn new(lo: Dyadic, hi: Dyadic) -> Self {
        debug_assert!(lo <= hi, "inverted interval");
        Interval { lo, hi }
    }

    pub fn from_q(q: &Q, prec: u32) -> Self {
        let lo = Dyadic::from_q(q, prec, Round::Down);
        let hi = Dyadic::from_q(q, prec, Round::Up);
        Interval { lo, hi }
    }

    pub fn from_q_range(lo: &Q, hi: &Q, prec: u32) -> Self {
        Interval {
            lo: Dyadic::from_q(lo, prec, Round::Down),
            hi: Dyadic::from_q(hi, prec, Round::Up),
        }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.lo.signum() <= 0 && self.hi.signum() >= 0
    }

    pub fn is_positive(&self) -> bool {
        self.lo.signum() > 0
    }

    pub fn is_negative(&self) -> bool {
        self.hi.signum() < 0
    }

    pub fn is_nonneg(&self) -> bool {
        self.lo.signum() >= 0
    }

    pub fn width(&self) -> Dyadic {
        self.hi.sub(&self.lo)
    }

    pub fn mid(&self) -> Dyadic {
        self.lo.add(&self.hi).shl(-1)
    }

    pub fn neg(&self) -> Self {
        Interval { lo: self.hi.neg(), hi: self.lo.neg() }
    }

    pub fn add(&self, o: &Self, prec: u32) -> Self {
        Interval {
            lo: self.lo.add(&o.lo).round(prec, Round::Down),
            hi: self.hi.add(&o.hi).round(prec, Round::Up),
        }
    }

    pub fn sub(&self, o: &Self, prec: u32) -> Self {
        self.add(&o.neg(), prec)
    }

    pub fn mul(&self, o: &Self, prec: u32) -> Self {
        if self.lo.signum() >= 0 && o.lo.signum() >= 0 {
            return Interval {
                lo: self.lo.mul(&o.lo).round(prec, Round::Down),
                hi: self.hi.mul(&o.hi).round(prec, Round::Up),
            };
        }
        let c = [
            self.lo.mul(&o.lo),
            self.lo.mul(&o.hi),
            self.hi.mul(&o.lo),
            self.hi.mul(&o.hi),
        ];
        let lo = c.iter().min().unwrap().round(prec, Round::Down);
        let hi = c.iter().max().unwrap().round(prec, Round::Up);
        Interval { lo, hi }
    }

    /// Division by an interval that excludes zero; `None` otherwise.
    pub fn div(&self, o: &Self, prec: u32) -> Option<Self> {
        if o.contains_zero() {
            return None;
        }
        let candidates = |dir: Round| {
            [
                self.lo.div(&o.lo, prec, dir),
                self.lo.div(&o.hi, prec, dir),
                self.hi.div(&o.lo, prec, dir),
                self.hi.div(&o.hi, prec, dir),
            ]
        };
        let lo = candidates(Round::Down).into_iter().min().unwrap();
        let hi = candidates(Round::Up).into_iter().max().unwrap();
        Some(Interval { lo, hi })
    }

    /// Power of an interval with non-negative lower end.
    pub fn pow_nonneg(&self, n: u32, prec: u32) -> Self {
        debug_assert!(self.lo.signum() >= 0);
        let mut result = Interval::one();
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base, prec);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base, prec);
            }
        }
        result
    }

    pub fn hull(&self, o: &Self) -> Self {
        Interval {
            lo: self.lo.clone().min(o.lo.clone()),
            hi: self.hi.clone().max(o.hi.clone()),
        }
    }

    pub fn intersect(&self, o: &Self) -> Option<Self> {
        let lo = self.lo.clone().max(o.lo.clone());
        let hi = self.hi.clone().min(o.hi.clone());
        if lo <= hi {
            Some(Interval { lo, hi })
        } else {
            None
        }
    }

    /// Enclosure of `exp` over the interval (monotone, so endpoints suffice).
    pub fn exp(&self, prec: u32) -> Self {
        if self.is_point() {
            return exp_point(&self.lo, prec);
        }
        let lo = exp_point(&self.lo, prec).lo;
        let hi = exp_point(&self.hi, prec).hi;
        Interval { lo, hi }
    }

    pub fn lo_q(&self) -> Q {
        self.lo.to_q()
    }

    pub fn hi_q(&self) -> Q {
        self.hi.to_q()
    }
}

/// Certified enclosure of e^x for a dyadic point.
///
/// Range reduction by halving until |y| < 2^-8, a fixed-point Taylor sum with
/// directed truncation and an explicit tail bound, then repeated squaring.
/// Negative arguments go through the reciprocal.
pub fn exp_point(x: &Dyadic, prec: u32) -> Interval {
    if x.is_zero() {
        return Interval::one();
    }
    let ax = x.abs();
    let s = (ax.mag() + 8).max(0) as u64;
    let wp = prec as u64 + s + 32;
    let y = ax.shl(-(s as i64));
    let (ylo, yhi) = to_fixed(&y, wp);
    let mut lo = taylor_fixed(&ylo, wp, Round::Down);
    let mut hi = taylor_fixed(&yhi, wp, Round::Up);
    for _ in 0..s {
        lo = shr_round(&(&lo * &lo), wp, Round::Down);
        hi = shr_round(&(&hi * &hi), wp, Round::Up);
    }
    let lo = Dyadic::new(lo, -(wp as i64));
    let hi = Dyadic::new(hi, -(wp as i64));
    let (lo, hi) = if x.signum() < 0 {
        let one = Dyadic::one();
        (one.div(&hi, prec, Round::Down), one.div(&lo, prec, Round::Up))
    } else {
        (lo.round(prec, Round::Down), hi.round(prec, Round::Up))
    };
    Interval { lo, hi }
}

/// Floor and ceiling of `y · 2^wp` for non-negative `y`.
fn to_fixed(y: &Dyadic, wp: u64) -> (BigInt, BigInt) {
    let sh = y.e + wp as i64;
    if sh >= 0 {
        let v = &y.m << sh as u64;
        (v.clone(), v)
    } else {
        (shr_round(&y.m, (-sh) as u64, Round::Down), shr_round(&y.m, (-sh) as u64, Round::Up))
    }
}

/// Σ y^k/k! in fixed point with `wp` fractional bits, for 0 ≤ y < 2^-8.
/// `Down` truncates every term down and drops the (positive) tail; `Up`
/// rounds every term up and adds a bound for the tail.
fn taylor_fixed(y: &BigInt, wp: u64, dir: Round) -> BigInt {
    let one = BigInt::one() << wp;
    let mut sum = one.clone();
    let mut term = one;
    let mut k: u32 = 1;
    loop {
        let t = shr_round(&(&term * y), wp, dir);
        let kk = BigInt::from(k);
        term = match dir {
            Round::Down => t.div_floor(&kk),
            Round::Up => t.div_ceil(&kk),
        };
        if term.is_zero() {
            break;
        }
        sum += &term;
        if dir == Round::Up && term <= BigInt::one() {
            // remaining terms sum to at most the last one
            sum += BigInt::from(2);
            break;
        }
        k += 1;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn q(n: i64, d: i64) -> Q {
        Q::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn rounding_brackets_value() {
        let third = q(1, 3);
        let iv = Interval::from_q(&third, 64);
        assert!(iv.lo_q() < third && third < iv.hi_q());
        let neg = q(-7, 3);
        let iv = Interval::from_q(&neg, 20);
        assert!(iv.lo_q() <= neg && neg <= iv.hi_q());
    }

    #[test]
    fn exp_one_contains_e() {
        let iv = exp_point(&Dyadic::one(), 128);
        // e = 2.718281828459045235360287...
        let lo = q(2718281828459045235, 1_000_000_000_000_000_000);
        let hi = q(2718281828459045236, 1_000_000_000_000_000_000);
        assert!(iv.lo_q() > lo && iv.hi_q() < hi);
        let w = iv.width().to_q();
        assert!(w <= Q::new(BigInt::from(4), BigInt::from(1) << 128u32));
    }

    #[test]
    fn exp_of_negative_and_large() {
        let iv = exp_point(&Dyadic::from_int(-3), 100);
        // e^-3 = 0.049787068367863942979...
        assert!(iv.lo_q() > q(49787068367863, 1_000_000_000_000_000));
        assert!(iv.hi_q() < q(49787068367864, 1_000_000_000_000_000));
        let big = exp_point(&Dyadic::from_int(81), 128);
        assert!(big.is_positive() && big.lo < big.hi);
    }

    #[test]
    fn div_matches_rational() {
        let a = Dyadic::from_int(1);
        let b = Dyadic::from_int(3);
        let lo = a.div(&b, 50, Round::Down).to_q();
        let hi = a.div(&b, 50, Round::Up).to_q();
        assert!(lo < q(1, 3) && q(1, 3) < hi);
    }
}
