//! Decomposition of a difference-form system into order regions: total
//! orders of the variables (real sort) or weak orders (integer sort) that
//! are consistent with the constraints.

use std::collections::BTreeMap;

use dip_symalg::Q;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::{ConstraintSystem, LinearConstraint, LinearForm, ProbError, Rel, Sort};

/// Most variables whose orders are enumerated.
const MAX_ORDER_VARS: usize = 7;

/// Variables listed from smallest to largest; `ties[i]` says whether
/// `order[i] == order[i + 1]` (integer sort only) instead of `<`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrderRegion {
    pub order: Vec<String>,
    pub ties: Vec<bool>,
}

impl OrderRegion {
    /// The chain `order[0] ⋈ order[1] ⋈ …` as constraints.
    pub fn constraints(&self) -> Vec<LinearConstraint> {
        self.order
            .windows(2)
            .zip(&self.ties)
            .map(|(w, &tie)| {
                LinearConstraint::new(&LinearForm::var(&w[0]), if tie { Rel::Eq } else { Rel::Lt }, &LinearForm::var(&w[1]))
            })
            .collect()
    }

    /// `sys` restricted to this region.
    pub fn system(&self, sys: &ConstraintSystem) -> ConstraintSystem {
        let mut s = sys.clone();
        for c in self.constraints() {
            s.push(c);
        }
        s
    }
}

/// Difference weight `(c, strict)` meaning `≤ c` or `< c`.
type W = (Q, bool);

fn lt(a: &W, b: &W) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 && !b.1)
}

/// Strictness-aware feasibility of `x_u − x_w ⋈ c` over nodes `0..n`.
fn feasible(n: usize, edges: &[(usize, usize, W)]) -> bool {
    let mut m: Vec<Vec<Option<W>>> = vec![vec![None; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Some((Q::zero(), false));
    }
    for (u, w, c) in edges {
        let slot = &mut m[*u][*w];
        if slot.as_ref().map(|cur| lt(c, cur)).unwrap_or(true) {
            *slot = Some(c.clone());
        }
    }
    for k in 0..n {
        for i in 0..n {
            let Some(ik) = m[i][k].clone() else { continue };
            for j in 0..n {
                let Some(kj) = m[k][j].clone() else { continue };
                let cand = (&ik.0 + &kj.0, ik.1 || kj.1);
                if m[i][j].as_ref().map(|cur| lt(&cand, cur)).unwrap_or(true) {
                    m[i][j] = Some(cand);
                }
            }
        }
    }
    (0..n).all(|i| m[i][i].as_ref().map(|d| !lt(d, &(Q::zero(), false))).unwrap_or(true))
}

/// Difference edges of one constraint, which must have the shape
/// `a·(x − y) + c ⋈ 0` or `a·x + c ⋈ 0`.
fn edges_of(c: &LinearConstraint, index: &BTreeMap<&str, usize>, sort: Sort) -> Result<Vec<(usize, usize, W)>, ProbError> {
    let unsupported = || ProbError::Unsupported(format!("not a unit difference constraint: {c}"));
    let terms: Vec<(usize, &Q)> = c.form.coefs.iter().map(|(v, a)| (index[v.as_str()], a)).collect();
    // Normalize to  x_u − x_w + k ⋈ 0  with node 0 the zero variable.
    let (u, w, a) = match terms.as_slice() {
        [] => {
            return Ok(if c.rel.holds(&c.form.konst) { vec![] } else { vec![(0, 0, (-Q::one(), false))] });
        }
        [(u, a)] => (*u, 0, (*a).clone()),
        [(u, a), (w, b)] if *a == &-(*b).clone() => (*u, *w, (*a).clone()),
        _ => return Err(unsupported()),
    };
    let k = &c.form.konst / &a;
    let rel = if a.is_negative() { flip(c.rel) } else { c.rel };
    let int = sort == Sort::Int;
    let mk = |strict: bool, bound: Q| -> W {
        if int && strict {
            ((bound - Q::one()).floor(), false)
        } else if int {
            (bound.floor(), false)
        } else {
            (bound, strict)
        }
    };
    // x_u − x_w ⋈ −k
    Ok(match rel {
        Rel::Le => vec![(u, w, mk(false, -k.clone()))],
        Rel::Lt => vec![(u, w, mk(true, -k.clone()))],
        Rel::Ge => vec![(w, u, mk(false, k.clone()))],
        Rel::Gt => vec![(w, u, mk(true, k.clone()))],
        Rel::Eq => vec![(u, w, mk(false, -k.clone())), (w, u, mk(false, k.clone()))],
        Rel::Ne => vec![],
    })
}

fn flip(r: Rel) -> Rel {
    match r {
        Rel::Lt => Rel::Gt,
        Rel::Le => Rel::Ge,
        Rel::Gt => Rel::Lt,
        Rel::Ge => Rel::Le,
        other => other,
    }
}

/// All order regions of the declared variables consistent with `sys`.
/// Their probabilities sum to the probability of `sys`.
pub fn decompose_orders(sys: &ConstraintSystem) -> Result<Vec<OrderRegion>, ProbError> {
    sys.check()?;
    let names: Vec<&str> = sys.vars.keys().map(|s| s.as_str()).collect();
    if names.len() > MAX_ORDER_VARS {
        return Err(ProbError::TooLarge(format!("{} variables", names.len())));
    }
    let sorts: Vec<Sort> = sys.vars.values().map(|v| v.sort).collect();
    let sort = sorts.first().copied().unwrap_or(Sort::Real);
    if sorts.iter().any(|s| *s != sort) {
        return Err(ProbError::MixedSort("order decomposition over both sorts".into()));
    }
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, v)| (*v, i + 1)).collect();
    let mut base = Vec::new();
    for c in &sys.constraints {
        base.extend(edges_of(c, &index, sort)?);
    }
    let n = names.len();
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (1..=n).collect();
    let mut cur: Vec<usize> = Vec::new();
    let mut ties: Vec<bool> = Vec::new();
    let allow_ties = sort == Sort::Int;
    chains(&mut perm, &mut cur, &mut ties, allow_ties, &mut |order, ties| {
        let mut edges = base.clone();
        for (i, w) in order.windows(2).enumerate() {
            if ties[i] {
                edges.push((w[0], w[1], (Q::zero(), false)));
                edges.push((w[1], w[0], (Q::zero(), false)));
            } else if allow_ties {
                edges.push((w[0], w[1], (-Q::one(), false)));
            } else {
                edges.push((w[0], w[1], (Q::zero(), true)));
            }
        }
        if feasible(n + 1, &edges) {
            out.push(OrderRegion { order: order.iter().map(|&i| names[i - 1].to_string()).collect(), ties: ties.to_vec() });
        }
    });
    Ok(out)
}

/// Enumerate chains over the remaining nodes. Ties only join a node to a
/// larger-numbered predecessor so every weak order appears once.
fn chains(
    rest: &mut Vec<usize>,
    cur: &mut Vec<usize>,
    ties: &mut Vec<bool>,
    allow_ties: bool,
    emit: &mut dyn FnMut(&[usize], &[bool]),
) {
    if rest.is_empty() {
        emit(cur, ties);
        return;
    }
    for i in 0..rest.len() {
        let v = rest.remove(i);
        let options: &[bool] = if cur.is_empty() {
            &[false]
        } else if allow_ties && *cur.last().expect("non-empty") < v {
            &[false, true]
        } else {
            &[false]
        };
        for &tie in options {
            if !cur.is_empty() {
                ties.push(tie);
            }
            cur.push(v);
            chains(rest, cur, ties, allow_ties, emit);
            cur.pop();
            if !cur.is_empty() {
                ties.pop();
            }
        }
        rest.insert(i, v);
    }
}
