//! Variable-by-variable closed-form integration (real sort) or summation
//! (integer sort) over a difference-form component.
//!
//! The integrand is a sum of terms `coef(ε) · Π x_i^{k_i} · e^{ε Σ γ_i x_i}`.
//! Eliminating `x_v` splits the current region at the kink of its density
//! and at the choice of which lower and upper bound binds; on every piece
//! the antiderivative of `x^k e^{γεx}` is substituted at the bounds
//! `x_w + c`, which keeps the integrand in the same shape.

use std::collections::BTreeMap;

use dip_symalg::{PseudoRational, Q};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::dbm::Dbm;
use crate::laurent::EpsLaurent;
use crate::normal::Component;
use crate::{ProbError, Sort};

pub(crate) trait Coef: Clone + PartialEq {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn scale(&self, c: &Q) -> Self;
    /// Multiply by `e^{qε}`.
    fn mul_exp(&self, q: &Q) -> Self;
    fn to_ratfn(&self) -> PseudoRational;
}

impl Coef for EpsLaurent {
    fn zero() -> Self {
        EpsLaurent::zero()
    }
    fn one() -> Self {
        EpsLaurent::one()
    }
    fn is_zero(&self) -> bool {
        EpsLaurent::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        EpsLaurent::add(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        EpsLaurent::mul(self, o)
    }
    fn scale(&self, c: &Q) -> Self {
        EpsLaurent::scale(self, c)
    }
    fn mul_exp(&self, q: &Q) -> Self {
        EpsLaurent::mul_exp(self, q)
    }
    fn to_ratfn(&self) -> PseudoRational {
        EpsLaurent::to_ratfn(self)
    }
}

impl Coef for PseudoRational {
    fn zero() -> Self {
        PseudoRational::zero()
    }
    fn one() -> Self {
        PseudoRational::one()
    }
    fn is_zero(&self) -> bool {
        PseudoRational::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        PseudoRational::add(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        PseudoRational::mul(self, o)
    }
    fn scale(&self, c: &Q) -> Self {
        PseudoRational::scale(self, c)
    }
    fn mul_exp(&self, q: &Q) -> Self {
        PseudoRational::mul_exp(self, q)
    }
    fn to_ratfn(&self) -> PseudoRational {
        self.clone()
    }
}

/// One half of a density split at its kink: the region constraint
/// `x_u − x_w ≤ c` (one of u, w is the variable, the other node 0), the rate
/// added to the variable and the constant factor.
struct Piece<C> {
    region: (bool, Q),
    rate: Q,
    coef: C,
}

trait Kind {
    type C: Coef;
    const INT: bool;
    fn pieces(scale: &Q, mean: &Q) -> [Piece<Self::C>; 2];
    /// Coefficients `α_i` of `A(x) = e^{γεx} Σ α_i x^i` with
    /// `A' = x^k e^{γεx}` (real) or `A(x+1) − A(x) = x^k e^{γεx}` (integer).
    fn anti(k: u32, gamma: &Q) -> Vec<Self::C>;
}

struct RealKind;
struct IntKind;

impl Kind for RealKind {
    type C = EpsLaurent;
    const INT: bool = false;

    fn pieces(a: &Q, mu: &Q) -> [Piece<EpsLaurent>; 2] {
        let half = EpsLaurent::constant(a / Q::from_integer(2.into())).mul_eps_pow(1);
        [
            Piece { region: (true, mu.clone()), rate: a.clone(), coef: half.mul_exp(&-(a * mu)) },
            Piece { region: (false, mu.clone()), rate: -a.clone(), coef: half.mul_exp(&(a * mu)) },
        ]
    }

    fn anti(k: u32, gamma: &Q) -> Vec<EpsLaurent> {
        if gamma.is_zero() {
            let mut v = vec![EpsLaurent::zero(); k as usize + 2];
            v[k as usize + 1] = EpsLaurent::constant(Q::one() / Q::from_integer((k + 1).into()));
            return v;
        }
        // α_i = (−1)^{k−i} k!/i! / (γε)^{k−i+1}
        let mut v = Vec::with_capacity(k as usize + 1);
        for i in 0..=k {
            let j = k - i;
            let mut c = Q::one();
            for t in (i + 1)..=k {
                c *= Q::from_integer(t.into());
            }
            if j % 2 == 1 {
                c = -c;
            }
            let g = pow_q(gamma, j + 1);
            v.push(EpsLaurent::constant(c / g).mul_eps_pow(-(j as i32 + 1)));
        }
        v
    }
}

impl Kind for IntKind {
    type C = PseudoRational;
    const INT: bool = true;

    fn pieces(a: &Q, mu: &Q) -> [Piece<PseudoRational>; 2] {
        let w = PseudoRational::exp(a.clone());
        let norm = w
            .sub(&PseudoRational::one())
            .div(&w.add(&PseudoRational::one()))
            .expect("e^{aε} + 1 is nonzero");
        [
            Piece { region: (true, mu.clone()), rate: a.clone(), coef: norm.mul_exp(&-(a * mu)) },
            Piece { region: (false, mu + Q::one()), rate: -a.clone(), coef: norm.mul_exp(&(a * mu)) },
        ]
    }

    fn anti(k: u32, gamma: &Q) -> Vec<PseudoRational> {
        let k = k as usize;
        if gamma.is_zero() {
            // Σ f_i x^i with F(x+1) − F(x) = x^k
            let mut f = vec![Q::zero(); k + 2];
            for t in (0..=k).rev() {
                let mut acc = if t == k { Q::one() } else { Q::zero() };
                for (i, fi) in f.iter().enumerate().skip(t + 2) {
                    acc -= fi * Q::from_integer(binom(i, t));
                }
                f[t + 1] = acc / Q::from_integer((t + 1).into());
            }
            return f.into_iter().map(PseudoRational::constant).collect();
        }
        // w Q(x+1) − Q(x) = x^k
        let w = PseudoRational::exp(gamma.clone());
        let inv = w.sub(&PseudoRational::one()).recip().expect("γ ≠ 0");
        let mut qs = vec![PseudoRational::zero(); k + 1];
        for i in (0..=k).rev() {
            let mut s = PseudoRational::zero();
            for (j, qj) in qs.iter().enumerate().skip(i + 1) {
                s = s.add(&qj.scale(&Q::from_integer(binom(j, i))));
            }
            let rhs = if i == k { PseudoRational::one() } else { PseudoRational::zero() }.sub(&w.mul(&s));
            qs[i] = rhs.mul(&inv);
        }
        qs
    }
}

fn pow_q(x: &Q, n: u32) -> Q {
    let mut r = Q::one();
    for _ in 0..n {
        r *= x;
    }
    r
}

fn binom(n: usize, k: usize) -> BigInt {
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Mono {
    pows: Vec<u32>,
    rates: Vec<Q>,
}

type Integrand<C> = BTreeMap<Mono, C>;

fn accumulate<C: Coef>(into: &mut Integrand<C>, m: Mono, c: C) {
    if c.is_zero() {
        return;
    }
    match into.get_mut(&m) {
        Some(e) => {
            let s = e.add(&c);
            if s.is_zero() {
                into.remove(&m);
            } else {
                *e = s;
            }
        }
        None => {
            into.insert(m, c);
        }
    }
}

/// Bound `x_w + c` (node 0 is the constant zero).
type Bound = (usize, Q);

pub(crate) fn component_probability(c: &Component) -> Result<PseudoRational, ProbError> {
    match c.sort {
        Sort::Real => run::<RealKind>(c),
        Sort::Int => run::<IntKind>(c),
    }
}

/// Greedy minimum-degree elimination order over the constraint graph.
fn elimination_order(c: &Component) -> Vec<usize> {
    let n = c.vars.len();
    let mut adj = vec![std::collections::BTreeSet::new(); n + 1];
    for (u, w, _) in &c.cons {
        if *u != 0 && *w != 0 {
            adj[*u].insert(*w);
            adj[*w].insert(*u);
        }
    }
    let mut left: Vec<usize> = (1..=n).collect();
    let mut order = Vec::with_capacity(n);
    while !left.is_empty() {
        let (pos, &v) = left.iter().enumerate().min_by_key(|(_, &v)| (adj[v].len(), v)).expect("non-empty");
        left.remove(pos);
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        for &a in &nb {
            adj[a].remove(&v);
            for &b in &nb {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        order.push(v);
    }
    order
}

fn run<K: Kind>(c: &Component) -> Result<PseudoRational, ProbError> {
    let n = c.vars.len();
    let mut start = Dbm::new(n + 1);
    for (u, w, k) in &c.cons {
        if !start.add(*u, *w, k) {
            return Ok(PseudoRational::zero());
        }
    }
    let mut cells: BTreeMap<Dbm, Integrand<K::C>> = BTreeMap::new();
    let one = Mono { pows: vec![0; n + 1], rates: vec![Q::zero(); n + 1] };
    cells.insert(start, BTreeMap::from([(one.clone(), K::C::one())]));
    for v in elimination_order(c) {
        let (scale, mean) = &c.vars[v - 1];
        let pieces = K::pieces(scale, mean);
        let mut next: BTreeMap<Dbm, Integrand<K::C>> = BTreeMap::new();
        for (dbm, integrand) in &cells {
            for piece in &pieces {
                let mut d2 = dbm.clone();
                let ok = if piece.region.0 { d2.add(v, 0, &piece.region.1) } else { d2.add(0, v, &-piece.region.1.clone()) };
                if !ok {
                    continue;
                }
                let weighted: Vec<(Mono, K::C)> = integrand
                    .iter()
                    .map(|(m, k)| {
                        let mut m = m.clone();
                        m.rates[v] += &piece.rate;
                        (m, k.mul(&piece.coef))
                    })
                    .collect();
                eliminate::<K>(v, &d2, &weighted, &mut next)?;
            }
        }
        cells = next;
    }
    let mut total = K::C::zero();
    for (_, integrand) in cells {
        for (m, k) in integrand {
            debug_assert!(m == one, "all variables eliminated");
            total = total.add(&k);
        }
    }
    Ok(total.to_ratfn())
}

/// Non-dominated bounds on `v`. `lower` selects `x_v ≥ x_w + c`; otherwise
/// `x_v ≤ x_w + c`.
fn bounds(d: &Dbm, v: usize, lower: bool) -> Vec<Bound> {
    let all: Vec<Bound> = d
        .alive()
        .filter(|&w| w != v)
        .filter_map(|w| if lower { d.get(w, v).map(|c| (w, -c.clone())) } else { d.get(v, w).map(|c| (w, c.clone())) })
        .collect();
    // i dominates j when bound i is always at least as tight as bound j.
    let dominates = |i: &Bound, j: &Bound| -> bool {
        if lower {
            d.get(j.0, i.0).map(|c| *c <= &i.1 - &j.1).unwrap_or(false)
        } else {
            d.get(i.0, j.0).map(|c| *c <= &j.1 - &i.1).unwrap_or(false)
        }
    };
    let mut keep = Vec::new();
    for (j, bj) in all.iter().enumerate() {
        let beaten = all
            .iter()
            .enumerate()
            .any(|(i, bi)| i != j && dominates(bi, bj) && (!dominates(bj, bi) || i < j));
        if !beaten {
            keep.push(bj.clone());
        }
    }
    keep
}

fn eliminate<K: Kind>(v: usize, d: &Dbm, terms: &[(Mono, K::C)], out: &mut BTreeMap<Dbm, Integrand<K::C>>) -> Result<(), ProbError> {
    let strict = if K::INT { Q::one() } else { Q::zero() };
    let lows = bounds(d, v, true);
    let ups = bounds(d, v, false);
    let lows: Vec<Option<&Bound>> = if lows.is_empty() { vec![None] } else { lows.iter().map(Some).collect() };
    let ups: Vec<Option<&Bound>> = if ups.is_empty() { vec![None] } else { ups.iter().map(Some).collect() };
    for (i, lo) in lows.iter().enumerate() {
        'upper: for (k, up) in ups.iter().enumerate() {
            let mut d3 = d.clone();
            if let Some((wi, bi)) = lo {
                for (j, other) in lows.iter().enumerate() {
                    let Some((wj, bj)) = other else { continue };
                    if j == i {
                        continue;
                    }
                    let tie = if j < i { &strict } else { &Q::zero() };
                    if !d3.add(*wj, *wi, &(bi - bj - tie)) {
                        continue 'upper;
                    }
                }
            }
            if let Some((wk, dk)) = up {
                for (j, other) in ups.iter().enumerate() {
                    let Some((wj, dj)) = other else { continue };
                    if j == k {
                        continue;
                    }
                    let tie = if j < k { &strict } else { &Q::zero() };
                    if !d3.add(*wk, *wj, &(dj - dk - tie)) {
                        continue 'upper;
                    }
                }
            }
            if let (Some((wi, bi)), Some((wk, dk))) = (lo, up) {
                if !d3.add(*wi, *wk, &(dk - bi)) {
                    continue;
                }
            }
            d3.remove(v);
            let slot = out.entry(d3).or_default();
            for (m, coef) in terms {
                integrate_term::<K>(v, m, coef, *lo, *up, slot)?;
            }
        }
    }
    Ok(())
}

fn integrate_term<K: Kind>(
    v: usize,
    m: &Mono,
    coef: &K::C,
    lo: Option<&Bound>,
    up: Option<&Bound>,
    out: &mut Integrand<K::C>,
) -> Result<(), ProbError> {
    let k = m.pows[v];
    let gamma = m.rates[v].clone();
    let mut rest = m.clone();
    rest.pows[v] = 0;
    rest.rates[v] = Q::zero();
    let alpha = K::anti(k, &gamma);
    let shift = if K::INT { Q::one() } else { Q::zero() };
    match up {
        Some((w, c)) => substitute::<K>(&rest, coef, &alpha, &gamma, *w, &(c + &shift), true, out),
        None if gamma.is_negative() => {}
        None => return Err(ProbError::Divergent("upper tail does not decay".into())),
    }
    match lo {
        Some((w, c)) => substitute::<K>(&rest, coef, &alpha, &gamma, *w, c, false, out),
        None if gamma.is_positive() => {}
        None => return Err(ProbError::Divergent("lower tail does not decay".into())),
    }
    Ok(())
}

/// Add `± coef · A(x_w + c)` to `out`.
#[allow(clippy::too_many_arguments)]
fn substitute<K: Kind>(rest: &Mono, coef: &K::C, alpha: &[K::C], gamma: &Q, w: usize, c: &Q, plus: bool, out: &mut Integrand<K::C>) {
    let base = coef.mul_exp(&(gamma * c));
    let base = if plus { base } else { base.scale(&-Q::one()) };
    for (i, a) in alpha.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let ai = base.mul(a);
        let top = if w == 0 { 0 } else { i };
        for t in 0..=top {
            let factor = Q::from_integer(binom(i, t)) * pow_q(c, (i - t) as u32);
            if factor.is_zero() {
                continue;
            }
            let mut mono = rest.clone();
            if w != 0 {
                mono.pows[w] += t as u32;
                mono.rates[w] += gamma;
            }
            accumulate(out, mono, ai.scale(&factor));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dip_symalg::q;

    #[test]
    fn integer_antidifference() {
        // Σ_{x=0}^{3} x^2 = 14 via F(4) − F(0)
        let f = IntKind::anti(2, &Q::zero());
        let at = |x: i64| -> Q {
            f.iter().enumerate().map(|(i, c)| c.as_constant().unwrap() * pow_q(&Q::from_integer(x.into()), i as u32)).sum()
        };
        assert_eq!(at(4) - at(0), q(14, 1));
        // w^x (q1 x + q0): difference is x e^{γεx}
        let qs = IntKind::anti(1, &q(-1, 1));
        let w = PseudoRational::exp(q(-1, 1));
        // F(x) at x = 2 and x = 1, times w^x
        let f2 = qs[0].add(&qs[1].scale(&q(2, 1))).mul(&w.pow(2));
        let f1 = qs[0].add(&qs[1]).mul(&w);
        assert_eq!(f2.sub(&f1), w.clone());
    }

    #[test]
    fn binomials() {
        assert_eq!(binom(5, 2), BigInt::from(10));
        assert_eq!(binom(4, 0), BigInt::from(1));
    }
}
