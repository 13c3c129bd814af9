//! Sign decision and root isolation for pseudo-rational functions on
//! intervals of `(0, ∞)`.
//!
//! The numerator is an exponential polynomial `E(ε) = Σ P_j(ε) e^{r_j ε}`.
//! Its behaviour is settled at the two ends exactly — near `0⁺` from the
//! first nonzero Taylor coefficient, near `∞` from the dominant term with an
//! explicit rational bound `L` — and on the bounded middle part by adaptive
//! interval subdivision with mean-value enclosures and monotonicity tests.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::dyadic::Interval;
use crate::eval::{Compiled, CompiledRatio};
use crate::poly::PseudoPoly;
use crate::ratfn::PseudoRational;
use crate::{ceil_log2, fmt_q, qi, Q};

/// Sub-interval of `(0, ∞)`. `lo = None` is `0⁺` (open), `hi = None` is `∞`;
/// finite endpoints are included.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EpsInterval {
    #[serde(with = "crate::qserde::opt")]
    pub lo: Option<Q>,
    #[serde(with = "crate::qserde::opt")]
    pub hi: Option<Q>,
}

impl EpsInterval {
    /// The whole half-line `(0, ∞)`.
    pub fn all() -> Self {
        EpsInterval { lo: None, hi: None }
    }

    pub fn new(lo: Option<Q>, hi: Option<Q>) -> Result<Self, String> {
        if let Some(l) = &lo {
            if !l.is_positive() {
                return Err(format!("lower end {} must be positive (use 0+ for the open end)", fmt_q(l)));
            }
        }
        if let (Some(l), Some(h)) = (&lo, &hi) {
            if l > h {
                return Err(format!("empty interval [{}, {}]", fmt_q(l), fmt_q(h)));
            }
        }
        if let Some(h) = &hi {
            if !h.is_positive() {
                return Err(format!("upper end {} must be positive", fmt_q(h)));
            }
        }
        Ok(EpsInterval { lo, hi })
    }

    /// `(0, hi]`.
    pub fn up_to(hi: Q) -> Self {
        EpsInterval::new(None, Some(hi)).expect("positive upper end")
    }

    /// `[lo, hi]`.
    pub fn closed(lo: Q, hi: Q) -> Self {
        EpsInterval::new(Some(lo), Some(hi)).expect("valid closed interval")
    }

    pub fn point(x: Q) -> Self {
        EpsInterval::closed(x.clone(), x)
    }

    pub fn contains(&self, x: &Q) -> bool {
        let above = match &self.lo {
            Some(l) => x >= l,
            None => x.is_positive(),
        };
        let below = match &self.hi {
            Some(h) => x <= h,
            None => true,
        };
        above && below
    }

    /// A rational point strictly inside (or the point itself for degenerate
    /// intervals).
    pub fn sample(&self) -> Q {
        match (&self.lo, &self.hi) {
            (Some(l), Some(h)) => (l + h) / qi(2),
            (Some(l), None) => l + Q::one(),
            (None, Some(h)) => h / qi(2),
            (None, None) => Q::one(),
        }
    }
}

impl fmt::Display for EpsInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.lo {
            Some(l) => write!(f, "[{}, ", fmt_q(l))?,
            None => write!(f, "(0, ")?,
        }
        match &self.hi {
            Some(h) => write!(f, "{}]", fmt_q(h)),
            None => write!(f, "inf)"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignConfig {
    /// Starting working precision in bits.
    pub precision: u32,
    /// Precision cap for point evaluations.
    pub max_precision: u32,
    /// Bisection depth per sub-interval.
    pub depth: u32,
}

impl Default for SignConfig {
    fn default() -> Self {
        SignConfig { precision: 128, max_precision: 1024, depth: 40 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SignVerdict {
    NonNegativeEverywhere,
    /// `f(eps0)` lies in `enclosure`, whose upper end is negative.
    Witness { eps0: Q, enclosure: Interval },
    /// The sign could not be settled on `[lo, hi]` (`hi = None` is ∞).
    Inconclusive { lo: Q, hi: Option<Q>, reason: String },
}

impl SignVerdict {
    pub fn is_nonneg(&self) -> bool {
        matches!(self, SignVerdict::NonNegativeEverywhere)
    }
}

/// An isolating interval: `lo == hi` is an exact rational root, otherwise the
/// open interval `(lo, hi)` contains exactly one simple root.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RootInterval {
    #[serde(with = "crate::qserde")]
    pub lo: Q,
    #[serde(with = "crate::qserde")]
    pub hi: Q,
}

impl RootInterval {
    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }
}

/// Outcome of the analysis of one exponential polynomial.
#[derive(Clone, Debug)]
enum Core {
    Holds,
    Negative(Q),
    Unknown(Q, Option<Q>, String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    NonNeg,
    Positive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PointSign {
    Pos,
    Neg,
    Zero,
    Unknown,
}

/// Exponential polynomial prepared for repeated interval evaluation.
struct Prepared {
    poly: PseudoPoly,
    g: Compiled,
    dg: Compiled,
    cfg: SignConfig,
}

impl Prepared {
    fn new(poly: &PseudoPoly, cfg: SignConfig) -> Self {
        Prepared { poly: poly.clone(), g: Compiled::new(poly), dg: Compiled::new(&poly.derivative()), cfg }
    }

    fn range(&self, a: &Q, b: &Q) -> Interval {
        Interval::from_q_range(a, b, self.cfg.precision + 16)
    }

    fn point_sign(&self, x: &Q) -> PointSign {
        if let Some(v) = self.g.exact(x) {
            return match v.signum() {
                s if s.is_positive() => PointSign::Pos,
                s if s.is_negative() => PointSign::Neg,
                _ => PointSign::Zero,
            };
        }
        let mut p = self.cfg.precision;
        loop {
            let v = self.g.eval(&Interval::from_q(x, p + 16), p);
            if v.is_positive() {
                return PointSign::Pos;
            }
            if v.is_negative() {
                return PointSign::Neg;
            }
            if p >= self.cfg.max_precision {
                return PointSign::Unknown;
            }
            p = (p * 2).min(self.cfg.max_precision);
        }
    }

    /// Enclosures of `g` and `g'` over `[a, b]`, the former tightened with the
    /// mean-value form around the midpoint.
    fn enclose(&self, a: &Q, b: &Q) -> (Interval, Interval, Interval) {
        let prec = self.cfg.precision;
        let x = self.range(a, b);
        let m = (a + b) / qi(2);
        let gm = self.g.eval(&Interval::from_q(&m, prec + 16), prec);
        let naive = self.g.eval(&x, prec);
        let dgx = self.dg.eval(&x, prec);
        let off = x.sub(&Interval::from_q(&m, prec + 16), prec + 16);
        let mv = gm.add(&dgx.mul(&off, prec), prec);
        let enc = naive.intersect(&mv).unwrap_or(naive);
        (enc, gm, dgx)
    }

    fn first_taylor(&self) -> (u32, Q) {
        let bound = self.poly.root_count_bound() + 1;
        for k in 0..=bound {
            let c = self.poly.taylor_coeff(k);
            if !c.is_zero() {
                return (k, c);
            }
        }
        unreachable!("nonzero exponential polynomial vanishing to order > its root bound")
    }

    /// Largest `h ≤ cap` (by halving) on which the K-th derivative keeps the
    /// sign `s` on `[0, h]`.
    fn zero_neighbourhood(&self, k: u32, s: i32, cap: &Q) -> Option<Q> {
        let dk = Compiled::new(&self.poly.nth_derivative(k));
        let mut h = cap.clone();
        for _ in 0..=self.cfg.depth {
            let enc = dk.eval(&self.range(&Q::zero(), &h), self.cfg.precision);
            if (s > 0 && enc.is_positive()) || (s < 0 && enc.is_negative()) {
                return Some(h);
            }
            h /= qi(2);
        }
        None
    }

    /// Rational `L ≥ 1` beyond which the dominant term decides the sign, and
    /// that sign.
    fn infinity_bound(&self) -> Option<(Q, i32)> {
        let (lead, a) = self.poly.leading()?;
        let (r, d) = (lead.expo.clone(), lead.pow as i64);
        let abs_a = a.abs();
        let sign = if a.is_positive() { 1 } else { -1 };
        // remaining terms as |c| ε^m e^{-s ε}
        let rest: Vec<(Q, i64, Q)> = self
            .poly
            .iter()
            .filter(|(k, _)| *k != lead)
            .map(|(k, c)| (c.abs(), k.pow as i64 - d, &r - &k.expo))
            .collect();
        let mut l0 = Q::one();
        for (_, m, s) in &rest {
            if s.is_positive() && *m > 0 {
                let t = qi(*m) / s;
                if t > l0 {
                    l0 = t;
                }
            }
        }
        let mut l = pow2(ceil_log2(&l0).max(0));
        let prec = self.cfg.precision;
        for _ in 0..256 {
            let mut acc = Interval::zero();
            for (c, m, s) in &rest {
                let mut coef = c.clone();
                if *m >= 0 {
                    for _ in 0..*m {
                        coef *= &l;
                    }
                } else {
                    for _ in 0..(-*m) {
                        coef /= &l;
                    }
                }
                let mut t = Interval::from_q(&coef, prec);
                if s.is_positive() {
                    let e = Interval::from_q(&(-(s * &l)), prec).exp(prec);
                    t = t.mul(&e, prec);
                }
                acc = acc.add(&t, prec);
            }
            if acc.hi_q() < abs_a {
                return Some((l, sign));
            }
            l *= qi(2);
        }
        None
    }

    /// Check one closed piece `[a, b]` by bisection. Returns on the first
    /// negative point; records the first undecided sub-piece.
    fn check_piece(&self, a: Q, b: Q, mode: Mode, unknown: &mut Option<(Q, Q)>) -> Option<Q> {
        let mut stack = vec![(a, b, 0u32)];
        while let Some((a, b, depth)) = stack.pop() {
            let (enc, gm, dg) = self.enclose(&a, &b);
            if enc.is_positive() || (mode == Mode::NonNeg && enc.is_nonneg()) {
                continue;
            }
            let m = (&a + &b) / qi(2);
            if enc.is_negative() || gm.is_negative() {
                return Some(m);
            }
            let monotone_end = if dg.is_nonneg() {
                Some(&a)
            } else if dg.hi.signum() <= 0 {
                Some(&b)
            } else {
                None
            };
            if let Some(x) = monotone_end {
                match self.point_sign(x) {
                    PointSign::Pos => continue,
                    PointSign::Zero if mode == Mode::NonNeg => continue,
                    PointSign::Neg => return Some(x.clone()),
                    _ => {}
                }
            }
            if depth >= self.cfg.depth || a == b {
                if unknown.is_none() {
                    *unknown = Some((a, b));
                }
                continue;
            }
            stack.push((m.clone(), b, depth + 1));
            stack.push((a, m, depth + 1));
        }
        None
    }

    fn analyze(&self, iv: &EpsInterval, mode: Mode) -> Core {
        if self.poly.is_zero() {
            return if mode == Mode::NonNeg {
                Core::Holds
            } else {
                Core::Unknown(Q::zero(), iv.hi.clone(), "identically zero".into())
            };
        }
        let start = match &iv.lo {
            Some(l) => l.clone(),
            None => {
                let cap = match &iv.hi {
                    Some(h) if *h < Q::one() => h.clone(),
                    _ => Q::one(),
                };
                let (k, c) = self.first_taylor();
                if c.is_negative() {
                    for j in 2..=(self.cfg.depth + 2) {
                        let x = &cap / pow2(j as i64);
                        if self.point_sign(&x) == PointSign::Neg {
                            return Core::Negative(x);
                        }
                    }
                    return Core::Unknown(Q::zero(), Some(cap), "negative near 0+ but no certified point".into());
                }
                match self.zero_neighbourhood(k, 1, &cap) {
                    Some(h) => h,
                    None => {
                        return Core::Unknown(Q::zero(), Some(cap), "behaviour near 0+ unresolved".into());
                    }
                }
            }
        };
        let (end, tail) = match &iv.hi {
            Some(h) => (h.clone(), None),
            None => match self.infinity_bound() {
                Some((l, s)) => {
                    let l = if l < start { start.clone() } else { l };
                    (l.clone(), Some((l, s)))
                }
                None => return Core::Unknown(start, None, "no dominance bound at infinity".into()),
            },
        };
        let mut unknown = None;
        let mut a = start;
        while a < end {
            let mut b = &a * qi(2);
            if b > end {
                b = end.clone();
            }
            if let Some(x) = self.check_piece(a.clone(), b.clone(), mode, &mut unknown) {
                return Core::Negative(x);
            }
            a = b;
        }
        if a == end && iv.hi.is_some() && iv.lo.as_ref() == Some(&end) {
            // degenerate point interval
            match self.point_sign(&end) {
                PointSign::Pos => {}
                PointSign::Zero if mode == Mode::NonNeg => {}
                PointSign::Neg => return Core::Negative(end),
                _ => unknown = Some((end.clone(), end.clone())),
            }
        }
        if let Some((l, s)) = tail {
            if s < 0 {
                return Core::Negative(l);
            }
        }
        match unknown {
            Some((a, b)) => Core::Unknown(a, Some(b), "subdivision depth exhausted (possible tangency)".into()),
            None => Core::Holds,
        }
    }
}

fn pow2(k: i64) -> Q {
    if k >= 0 {
        Q::from_integer(num_bigint::BigInt::one() << k as u64)
    } else {
        Q::new(num_bigint::BigInt::one(), num_bigint::BigInt::one() << (-k) as u64)
    }
}

/// `+1` / `-1` when the denominator is certified strictly positive / negative
/// on `iv`.
fn denominator_sign(den: &PseudoPoly, iv: &EpsInterval, cfg: SignConfig) -> Option<i32> {
    if den.iter().all(|(_, c)| c.is_positive()) {
        return Some(1);
    }
    if den.iter().all(|(_, c)| c.is_negative()) {
        return Some(-1);
    }
    if matches!(Prepared::new(den, cfg).analyze(iv, Mode::Positive), Core::Holds) {
        return Some(1);
    }
    if matches!(Prepared::new(&den.neg(), cfg).analyze(iv, Mode::Positive), Core::Holds) {
        return Some(-1);
    }
    None
}

/// Decide `f ≥ 0` on `iv`.
pub fn sign_on_interval(f: &PseudoRational, iv: &EpsInterval, cfg: &SignConfig) -> SignVerdict {
    if f.is_zero() {
        return SignVerdict::NonNegativeEverywhere;
    }
    let lo0 = iv.lo.clone().unwrap_or_else(Q::zero);
    let Some(s) = denominator_sign(f.den(), iv, *cfg) else {
        return SignVerdict::Inconclusive {
            lo: lo0,
            hi: iv.hi.clone(),
            reason: "denominator sign not certified".into(),
        };
    };
    let g = if s > 0 { f.num().clone() } else { f.num().neg() };
    match Prepared::new(&g, *cfg).analyze(iv, Mode::NonNeg) {
        Core::Holds => SignVerdict::NonNegativeEverywhere,
        Core::Unknown(lo, hi, reason) => SignVerdict::Inconclusive { lo, hi, reason },
        Core::Negative(x) => {
            let ratio = CompiledRatio::new(f);
            match ratio.eval_point(&x, cfg.precision, cfg.max_precision) {
                Ok(enc) if enc.is_negative() => SignVerdict::Witness { eps0: x, enclosure: enc },
                _ => SignVerdict::Inconclusive {
                    lo: x.clone(),
                    hi: Some(x),
                    reason: "negative numerator but enclosure of the ratio not certified".into(),
                },
            }
        }
    }
}

/// Isolate the zeros of `f` on `iv`. Returns the unresolved sub-interval
/// on failure.
pub fn isolate_roots(
    f: &PseudoRational,
    iv: &EpsInterval,
    cfg: &SignConfig,
) -> Result<Vec<RootInterval>, SignVerdict> {
    assert!(!f.is_zero(), "root isolation of the zero function");
    let lo0 = iv.lo.clone().unwrap_or_else(Q::zero);
    let inconclusive = |lo: Q, hi: Option<Q>, reason: &str| SignVerdict::Inconclusive { lo, hi, reason: reason.into() };
    if denominator_sign(f.den(), iv, *cfg).is_none() {
        return Err(inconclusive(lo0, iv.hi.clone(), "denominator sign not certified"));
    }
    let p = Prepared::new(f.num(), *cfg);
    let mut roots = Vec::new();
    let start = match &iv.lo {
        Some(l) => l.clone(),
        None => {
            let cap = match &iv.hi {
                Some(h) if *h < Q::one() => h.clone(),
                _ => Q::one(),
            };
            let (k, c) = p.first_taylor();
            let s = if c.is_positive() { 1 } else { -1 };
            match p.zero_neighbourhood(k, s, &cap) {
                Some(h) => h,
                None => return Err(inconclusive(Q::zero(), Some(cap), "behaviour near 0+ unresolved")),
            }
        }
    };
    let end = match &iv.hi {
        Some(h) => h.clone(),
        None => match p.infinity_bound() {
            Some((l, _)) => l.max(start.clone()),
            None => return Err(inconclusive(start, None, "no dominance bound at infinity")),
        },
    };
    if start == end {
        if p.point_sign(&start) == PointSign::Zero {
            roots.push(RootInterval { lo: start.clone(), hi: start });
        }
        return Ok(roots);
    }
    let mut a = start;
    while a < end {
        let mut b = &a * qi(2);
        if b > end {
            b = end.clone();
        }
        let mut stack = vec![(a.clone(), b.clone(), 0u32)];
        while let Some((x, y, depth)) = stack.pop() {
            let (enc, _, dg) = p.enclose(&x, &y);
            if !enc.contains_zero() {
                continue;
            }
            if dg.is_positive() || dg.is_negative() {
                let (sx, sy) = (p.point_sign(&x), p.point_sign(&y));
                match (sx, sy) {
                    (PointSign::Zero, _) | (_, PointSign::Zero) => {
                        if sx == PointSign::Zero {
                            roots.push(RootInterval { lo: x.clone(), hi: x.clone() });
                        }
                        if sy == PointSign::Zero {
                            roots.push(RootInterval { lo: y.clone(), hi: y.clone() });
                        }
                        continue;
                    }
                    (PointSign::Pos, PointSign::Neg) | (PointSign::Neg, PointSign::Pos) => {
                        roots.push(RootInterval { lo: x, hi: y });
                        continue;
                    }
                    (PointSign::Pos, PointSign::Pos) | (PointSign::Neg, PointSign::Neg) => continue,
                    _ => {}
                }
            }
            if depth >= cfg.depth {
                return Err(inconclusive(x, Some(y), "root not separated (possible tangency)"));
            }
            let m = (&x + &y) / qi(2);
            stack.push((m.clone(), y, depth + 1));
            stack.push((x, m, depth + 1));
        }
        a = b;
    }
    roots.sort();
    roots.dedup();
    Ok(roots)
}

/// Shrink an isolating interval of a root of `f` to width at most `width`.
pub fn refine_root(f: &PseudoRational, r: &RootInterval, width: &Q, cfg: &SignConfig) -> Option<RootInterval> {
    if r.is_exact() {
        return Some(r.clone());
    }
    let p = Prepared::new(f.num(), *cfg);
    let (mut a, mut b) = (r.lo.clone(), r.hi.clone());
    let sa = p.point_sign(&a);
    if !matches!(sa, PointSign::Pos | PointSign::Neg) {
        return None;
    }
    while &b - &a > *width {
        let m = (&a + &b) / qi(2);
        match p.point_sign(&m) {
            PointSign::Zero => return Some(RootInterval { lo: m.clone(), hi: m }),
            PointSign::Unknown => return None,
            s if s == sa => a = m,
            _ => b = m,
        }
    }
    Some(RootInterval { lo: a, hi: b })
}
