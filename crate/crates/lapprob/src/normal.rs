//! Reduction of a constraint system to independent difference-form
//! components over rescaled variables.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use dip_symalg::Q;
use num_integer::Integer;
use num_traits::{One, Signed};

use crate::{ConstraintSystem, LinearForm, ProbError, Rel, Sort};

/// Most `!=` constraints expanded into disjoint cases.
const MAX_DISEQUALITIES: usize = 12;

/// One independent block: variables `1..=n` (node 0 is the constant zero)
/// with constraints `x_u − x_w ≤ c`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Component {
    pub sort: Sort,
    /// `(scale, mean)` of variable `i + 1` after rescaling.
    pub vars: Vec<(Q, Q)>,
    pub cons: Vec<(usize, usize, Q)>,
}

/// A conjunction split into independent components. The probability of
/// the original system is the sum over alternatives of the product over
/// components.
#[derive(Clone, Debug)]
pub(crate) struct Normalized {
    pub components: Vec<Component>,
}

/// `form ≤ 0`.
struct LeZero {
    form: LinearForm,
}

/// Split into alternatives (only integer `!=` splits) of `≤ 0` forms.
/// An empty result means probability zero.
pub(crate) fn normalize(sys: &ConstraintSystem) -> Result<Vec<Normalized>, ProbError> {
    let mut fixed: Vec<LeZero> = Vec::new();
    let mut choices: Vec<[LeZero; 2]> = Vec::new();
    for c in &sys.constraints {
        if c.form.is_constant() {
            if !c.rel.holds(&c.form.konst) {
                return Ok(Vec::new());
            }
            continue;
        }
        let sort = sys.vars[c.form.vars().next().expect("non-constant")].sort;
        match sort {
            Sort::Real => match c.rel {
                Rel::Eq => return Ok(Vec::new()),
                Rel::Ne => {}
                Rel::Lt | Rel::Le => fixed.push(LeZero { form: c.form.clone() }),
                Rel::Gt | Rel::Ge => fixed.push(LeZero { form: neg(&c.form) }),
            },
            Sort::Int => {
                let f = integral(&c.form);
                let one = Q::one();
                match c.rel {
                    Rel::Le => fixed.push(LeZero { form: f }),
                    Rel::Lt => fixed.push(LeZero { form: f.plus_const(&one) }),
                    Rel::Ge => fixed.push(LeZero { form: neg(&f) }),
                    Rel::Gt => fixed.push(LeZero { form: neg(&f).plus_const(&one) }),
                    Rel::Eq => {
                        fixed.push(LeZero { form: neg(&f) });
                        fixed.push(LeZero { form: f });
                    }
                    Rel::Ne => choices.push([LeZero { form: f.plus_const(&one) }, LeZero { form: neg(&f).plus_const(&one) }]),
                }
            }
        }
    }
    if choices.len() > MAX_DISEQUALITIES {
        return Err(ProbError::TooLarge(format!("{} integer disequalities", choices.len())));
    }
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << choices.len()) {
        let mut forms: Vec<&LeZero> = fixed.iter().collect();
        for (i, ch) in choices.iter().enumerate() {
            forms.push(&ch[((mask >> i) & 1) as usize]);
        }
        out.push(conjunction(sys, &forms)?);
    }
    Ok(out)
}

fn neg(f: &LinearForm) -> LinearForm {
    f.scale(&-Q::one())
}

/// Scale an integer-sort form to integer coefficients.
fn integral(f: &LinearForm) -> LinearForm {
    let mut l = f.konst.denom().clone();
    for c in f.coefs.values() {
        l = l.lcm(c.denom());
    }
    f.scale(&Q::from_integer(l))
}

/// Rescale and group one conjunction.
fn conjunction(sys: &ConstraintSystem, forms: &[&LeZero]) -> Result<Normalized, ProbError> {
    let mut adj: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, f) in forms.iter().enumerate() {
        if f.form.coefs.len() > 2 {
            return Err(ProbError::Unsupported(format!("comparison over more than two noise variables: {} <= 0", f.form)));
        }
        for v in f.form.vars() {
            adj.entry(v.as_str()).or_default().push(i);
        }
    }
    let mut mult: BTreeMap<&str, Q> = BTreeMap::new();
    let mut comps = Vec::new();
    for &root in adj.keys() {
        if mult.contains_key(root) {
            continue;
        }
        mult.insert(root, Q::one());
        let mut members = vec![root];
        let mut queue = VecDeque::from([root]);
        let mut cons_idx = BTreeSet::new();
        while let Some(u) = queue.pop_front() {
            for &ci in &adj[u] {
                cons_idx.insert(ci);
                let form = &forms[ci].form;
                let Some((w, beta)) = form.coefs.iter().find(|(k, _)| k.as_str() != u) else { continue };
                let alpha = &form.coefs[u];
                let mw = -(beta * &mult[u]) / alpha;
                let sort = sys.vars[w].sort;
                if sort == Sort::Int && mw.abs() != Q::one() {
                    return Err(ProbError::Unsupported(format!("integer comparison with unequal coefficients: {form} <= 0")));
                }
                match mult.get(w.as_str()) {
                    Some(m) if *m != mw => {
                        return Err(ProbError::Unsupported(format!(
                            "comparisons are not simultaneously reducible to difference form near {form} <= 0"
                        )))
                    }
                    Some(_) => {}
                    None => {
                        mult.insert(w.as_str(), mw);
                        members.push(w.as_str());
                        queue.push_back(w.as_str());
                    }
                }
            }
        }
        members.sort();
        let index: BTreeMap<&str, usize> = members.iter().enumerate().map(|(i, v)| (*v, i + 1)).collect();
        let sort = sys.vars[members[0]].sort;
        let vars = members
            .iter()
            .map(|v| {
                let nv = &sys.vars[*v];
                let m = &mult[v];
                (&nv.scale / m.abs(), &nv.mean * m)
            })
            .collect();
        let mut cons: BTreeMap<(usize, usize), Q> = BTreeMap::new();
        for ci in cons_idx {
            let form = &forms[ci].form;
            let terms: Vec<(usize, Q)> =
                form.coefs.iter().map(|(v, a)| (index[v.as_str()], a / &mult[v.as_str()])).collect();
            let (u, w, a) = match terms.as_slice() {
                [(u, a)] => {
                    if a.is_positive() {
                        (*u, 0, a.clone())
                    } else {
                        (0, *u, -a.clone())
                    }
                }
                [(u, a), (w, _)] => {
                    if a.is_positive() {
                        (*u, *w, a.clone())
                    } else {
                        (*w, *u, -a.clone())
                    }
                }
                _ => unreachable!("one or two variables"),
            };
            let mut c = -&form.konst / a;
            if sort == Sort::Int {
                c = c.floor();
            }
            let e = cons.entry((u, w)).or_insert_with(|| c.clone());
            if c < *e {
                *e = c;
            }
        }
        comps.push(Component { sort, vars, cons: cons.into_iter().map(|((u, w), c)| (u, w, c)).collect() });
    }
    Ok(Normalized { components: comps })
}

/// The part of `sys` whose constraints are connected (through shared
/// variables) to `touched`, plus all constant constraints.
pub(crate) fn restrict_to_touched(sys: &ConstraintSystem, touched: &BTreeSet<String>) -> ConstraintSystem {
    let mut reach: BTreeSet<String> = touched.clone();
    let mut keep = vec![false; sys.constraints.len()];
    let cons: Vec<_> = sys.constraints.iter().collect();
    loop {
        let mut grew = false;
        for (i, c) in cons.iter().enumerate() {
            if keep[i] {
                continue;
            }
            if c.form.is_constant() || c.form.vars().any(|v| reach.contains(v)) {
                keep[i] = true;
                for v in c.form.vars() {
                    grew |= reach.insert(v.clone());
                }
            }
        }
        if !grew {
            break;
        }
    }
    let mut out = ConstraintSystem { vars: sys.vars.clone(), constraints: BTreeSet::new() };
    for (i, c) in cons.into_iter().enumerate() {
        if keep[i] {
            out.constraints.insert(c.clone());
        }
    }
    out
}
