//! Certified enclosure of integer-sort probabilities at a fixed ε by
//! enumerating a box around the means and bounding the mass outside it.
//! This covers comparisons with arbitrary integer coefficients, which the
//! symbolic path does not.

use dip_symalg::{Dyadic, Interval, Q};
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::{ConstraintSystem, ProbError, Rel, Sort};

const PREC: u32 = 160;
/// Largest number of box points enumerated.
const MAX_POINTS: u128 = 20_000_000;

/// Enclosure of `P(sys)` at `eps` whose width is at most about `2·tail`.
pub fn prob_int_truncated(sys: &ConstraintSystem, eps: &Q, tail: &Q) -> Result<Interval, ProbError> {
    sys.check()?;
    if !eps.is_positive() || !tail.is_positive() {
        return Err(ProbError::Unsupported("ε and the tail tolerance must be positive".into()));
    }
    let names: Vec<&String> = {
        let mut s = std::collections::BTreeSet::new();
        for c in &sys.constraints {
            s.extend(c.form.vars());
        }
        s.into_iter().collect()
    };
    if names.iter().any(|v| sys.vars[*v].sort != Sort::Int) {
        return Err(ProbError::MixedSort("real variable in an integer system".into()));
    }
    // Mass outside the box is only bounded, so an unsatisfiable system is
    // recognised exactly when the symbolic path can decide it.
    if let Ok(p) = crate::prob_int_system(sys) {
        if p.is_zero() {
            return Ok(Interval::zero());
        }
    }
    // Integer-coefficient constraints over box offsets.
    let mut rows: Vec<(Vec<i128>, i128, Rel)> = Vec::new();
    for c in &sys.constraints {
        let mut l = c.form.konst.denom().clone();
        for a in c.form.coefs.values() {
            l = l.lcm(a.denom());
        }
        let lq = Q::from_integer(l);
        let mut konst = &c.form.konst * &lq;
        let mut coefs = Vec::with_capacity(names.len());
        for v in &names {
            let a = c.form.coefs.get(*v).map(|a| a * &lq).unwrap_or_else(Q::zero);
            // offset coordinates: z = μ + d
            konst += &a * &sys.vars[*v].mean;
            coefs.push(to_i128(&a)?);
        }
        rows.push((coefs, to_i128(&konst)?, c.rel));
    }
    let share = tail / Q::from_integer((names.len().max(1) as i64).into());
    let mut radius = Vec::new();
    let mut pmfs: Vec<Vec<Interval>> = Vec::new();
    let mut tail_hi = Interval::zero();
    let mut points: u128 = 1;
    for v in &names {
        let a = &sys.vars[*v].scale;
        let r = Interval::from_q(&-(a * eps), PREC).exp(PREC);
        let one = Interval::one();
        let norm = one.sub(&r, PREC).div(&one.add(&r, PREC), PREC).expect("1 + r > 0");
        // P(|Z − μ| > K) = 2 r^{K+1} / (1 + r)
        let target = Dyadic::from_q(&share, PREC, dip_symalg::Round::Down);
        let mut k: u32 = 0;
        let mut rk1 = r.clone();
        loop {
            let t = rk1.mul(&Interval::from_q(&Q::from_integer(2.into()), PREC), PREC).div(&one.add(&r, PREC), PREC).expect("positive");
            if t.hi <= target {
                tail_hi = tail_hi.add(&t, PREC);
                break;
            }
            k += 1;
            rk1 = rk1.mul(&r, PREC);
            if k > 1_000_000 {
                return Err(ProbError::TooLarge("tail radius".into()));
            }
        }
        let mut pmf = Vec::with_capacity(2 * k as usize + 1);
        let mut pw = norm.clone();
        let mut side = vec![pw.clone()];
        for _ in 0..k {
            pw = pw.mul(&r, PREC);
            side.push(pw.clone());
        }
        for d in -(k as i64)..=(k as i64) {
            pmf.push(side[d.unsigned_abs() as usize].clone());
        }
        points = points.saturating_mul(2 * k as u128 + 1);
        radius.push(k as i64);
        pmfs.push(pmf);
    }
    if points > MAX_POINTS {
        return Err(ProbError::TooLarge(format!("{points} box points")));
    }
    let mut inside = Interval::zero();
    let mut d: Vec<i64> = radius.iter().map(|k| -k).collect();
    let n = names.len();
    loop {
        let ok = rows.iter().all(|(coefs, konst, rel)| {
            let s: i128 = coefs.iter().zip(&d).map(|(a, x)| a * *x as i128).sum::<i128>() + konst;
            rel.holds(&Q::from_integer(s.into()))
        });
        if ok {
            let mut w = Interval::one();
            for i in 0..n {
                w = w.mul(&pmfs[i][(d[i] + radius[i]) as usize], PREC);
            }
            inside = inside.add(&w, PREC);
        }
        let mut i = 0;
        while i < n {
            d[i] += 1;
            if d[i] <= radius[i] {
                break;
            }
            d[i] = -radius[i];
            i += 1;
        }
        if i == n {
            break;
        }
    }
    let hi = inside.hi.add(&tail_hi.hi);
    let hi = if hi > Dyadic::one() { Dyadic::one() } else { hi };
    Ok(Interval::new(inside.lo, hi))
}

fn to_i128(x: &Q) -> Result<i128, ProbError> {
    debug_assert!(x.is_integer());
    x.to_integer().to_i128().ok_or_else(|| ProbError::TooLarge("coefficient overflow".into()))
}
