//! Worst output subsets for the (ε, δ) inequality.
//!
//! For a fixed ε the set of outputs maximizing `Prob(in ∈ O) − e^{tε}
//! Prob(in′ ∈ O)` is `{v : d_v(ε) > 0}` with `d_v = p1(v) − e^{tε}p2(v)`.
//! It can only change at zeros of some `d_v`, so the interval is cut at
//! isolated roots: between root clusters the subset is fixed, and inside a
//! cluster every combination of the outputs whose roots lie there is a
//! candidate.

use std::collections::BTreeSet;

use dip_reach::OutputDistribution;
use dip_symalg::{eval_interval, isolate_roots, q, refine_root, EpsInterval, PseudoRational, RootInterval, SignConfig, SignVerdict, Q};
use num_traits::Zero;

/// Outputs whose roots share one cluster are enumerated exhaustively up to
/// this many.
pub const MAX_AMBIGUOUS: usize = 12;

/// One piece of the profile: on `interval`, `subset` is (a candidate for)
/// the maximizing output set and `deficit = Σ_{subset} (p1 − e^{tε} p2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Piece {
    pub interval: EpsInterval,
    pub subset: Vec<Vec<i64>>,
    pub deficit: PseudoRational,
}

/// Per-output differences `p1 − e^{tε} p2` that are not identically zero.
pub fn differences(d1: &OutputDistribution, d2: &OutputDistribution, t: &Q) -> Vec<(Vec<i64>, PseudoRational)> {
    let outs: BTreeSet<&Vec<i64>> = d1.probs.keys().chain(d2.probs.keys()).collect();
    outs.into_iter()
        .map(|o| (o.clone(), d1.get(o).sub(&d2.get(o).mul_exp(t))))
        .filter(|(_, d)| !d.is_zero())
        .collect()
}

struct Cluster {
    lo: Q,
    hi: Q,
    members: BTreeSet<usize>,
}

fn inconclusive(iv: &EpsInterval, reason: &str) -> SignVerdict {
    SignVerdict::Inconclusive { lo: iv.lo.clone().unwrap_or_else(Q::zero), hi: iv.hi.clone(), reason: reason.into() }
}

/// Sign of a function known to be nonzero at `x`.
fn sign_at(f: &PseudoRational, x: &Q, cfg: &SignConfig) -> Option<bool> {
    let mut prec = cfg.precision;
    loop {
        if let Ok(v) = eval_interval(f, x, prec) {
            if v.is_positive() {
                return Some(true);
            }
            if v.is_negative() {
                return Some(false);
            }
        }
        if prec >= cfg.max_precision {
            return None;
        }
        prec = (prec * 2).min(cfg.max_precision);
    }
}

fn piece(interval: EpsInterval, diffs: &[(Vec<i64>, PseudoRational)], chosen: &[usize]) -> Piece {
    let subset = chosen.iter().map(|&i| diffs[i].0.clone()).collect();
    let deficit = chosen.iter().fold(PseudoRational::zero(), |a, &i| a.add(&diffs[i].1));
    Piece { interval, subset, deficit }
}

/// Partition `iv` into pieces with their maximizing subsets. Fails with the
/// unresolved sub-interval when some root cannot be isolated.
pub fn worst_subset_profile(
    d1: &OutputDistribution,
    d2: &OutputDistribution,
    t: &Q,
    iv: &EpsInterval,
    cfg: &SignConfig,
) -> Result<Vec<Piece>, SignVerdict> {
    let diffs = differences(d1, d2, t);
    let width = q(1, 1 << 24);
    let mut roots: Vec<(RootInterval, usize)> = Vec::new();
    for (i, (_, d)) in diffs.iter().enumerate() {
        for r in isolate_roots(d, iv, cfg)? {
            let r = refine_root(d, &r, &width, cfg).unwrap_or(r);
            roots.push((r, i));
        }
    }
    roots.sort();
    let mut clusters: Vec<Cluster> = Vec::new();
    for (r, i) in roots {
        match clusters.last_mut() {
            Some(c) if r.lo <= c.hi => {
                if r.hi > c.hi {
                    c.hi = r.hi.clone();
                }
                c.members.insert(i);
            }
            _ => clusters.push(Cluster { lo: r.lo.clone(), hi: r.hi.clone(), members: [i].into() }),
        }
    }
    let positive_at = |x: &Q, skip: &BTreeSet<usize>| -> Result<Vec<usize>, SignVerdict> {
        let mut out = Vec::new();
        for (i, (_, d)) in diffs.iter().enumerate() {
            if skip.contains(&i) {
                continue;
            }
            match sign_at(d, x, cfg) {
                Some(true) => out.push(i),
                Some(false) => {}
                None => return Err(inconclusive(&EpsInterval::point(x.clone()), "sign between roots not certified")),
            }
        }
        Ok(out)
    };
    let mut pieces = Vec::new();
    let mut left = iv.lo.clone();
    let none = BTreeSet::new();
    for c in &clusters {
        if left.as_ref().is_none_or(|l| *l < c.lo) {
            let gap = EpsInterval { lo: left.clone(), hi: Some(c.lo.clone()) };
            let pos = positive_at(&gap.sample(), &none)?;
            pieces.push(piece(gap, &diffs, &pos));
        }
        let lo = match &iv.lo {
            Some(l) if *l > c.lo => l.clone(),
            _ => c.lo.clone(),
        };
        let hi = match &iv.hi {
            Some(h) if *h < c.hi => h.clone(),
            _ => c.hi.clone(),
        };
        let span = EpsInterval::closed(lo, hi);
        let fixed = positive_at(&span.sample(), &c.members)?;
        let amb: Vec<usize> = c.members.iter().copied().collect();
        if amb.len() > MAX_AMBIGUOUS {
            return Err(inconclusive(&span, "too many outputs change sign together"));
        }
        for mask in 0u32..(1 << amb.len()) {
            let mut chosen = fixed.clone();
            chosen.extend(amb.iter().enumerate().filter(|(b, _)| mask & (1 << b) != 0).map(|(_, i)| *i));
            chosen.sort();
            pieces.push(piece(span.clone(), &diffs, &chosen));
        }
        left = Some(c.hi.clone());
    }
    let tail_open = match (&left, &iv.hi) {
        (Some(l), Some(h)) => l < h,
        _ => true,
    };
    if tail_open || clusters.is_empty() {
        let gap = EpsInterval { lo: left, hi: iv.hi.clone() };
        let pos = positive_at(&gap.sample(), &none)?;
        pieces.push(piece(gap, &diffs, &pos));
    }
    Ok(pieces)
}

/// All nonempty subsets of the outputs where `p1 − e^{tε} p2` is not
/// identically zero — the exhaustive fallback when a profile cannot be
/// built. `None` when there are too many outputs.
pub fn all_subsets(d1: &OutputDistribution, d2: &OutputDistribution, t: &Q, iv: &EpsInterval, limit: usize) -> Option<Vec<Piece>> {
    let diffs = differences(d1, d2, t);
    if diffs.len() > limit {
        return None;
    }
    let mut out = Vec::new();
    for mask in 1u64..(1 << diffs.len()) {
        let chosen: Vec<usize> = (0..diffs.len()).filter(|b| mask & (1 << b) != 0).collect();
        out.push(piece(iv.clone(), &diffs, &chosen));
    }
    Some(out)
}
