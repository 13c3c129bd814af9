//! Reachability probabilities in parametrized chains, as pseudo-rational
//! functions of ε, and the per-input output distributions built on them.
//!
//! Values are computed component by component in reverse topological order
//! of the strongly connected components: an acyclic component is a plain
//! weighted sum of its successors' values, a cyclic one is solved exactly by
//! Gaussian elimination over the field of pseudo-rational functions and the
//! solution is substituted back into every equation.

use std::collections::{BTreeMap, BTreeSet};

use dip_frontend::Program;
use dip_semantics::{build_dtmc_with, output_of, BuildConfig, Pdtmc, SemError};
use dip_symalg::{isolate_roots, EpsInterval, PseudoRational, RootInterval, SignConfig, SignVerdict};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReachError {
    #[error("the chain has a cycle through {0}; use reach_solve")]
    Cycle(String),
    #[error("singular system in the component of {0}")]
    Singular(String),
    #[error("solution failed verification at {0}")]
    Unverified(String),
    #[error("exit state without an output value at {0}")]
    UnsetOutput(String),
    #[error(transparent)]
    Semantics(#[from] SemError),
}

/// `output valuation ↦ Prob(P_ε(in) = out)`; outputs of probability
/// identically zero are absent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OutputDistribution {
    pub probs: BTreeMap<Vec<i64>, PseudoRational>,
    /// Whether the chain had cycles (termination then is checked
    /// numerically, not symbolically).
    pub cyclic: bool,
}

impl OutputDistribution {
    pub fn get(&self, out: &[i64]) -> PseudoRational {
        self.probs.get(out).cloned().unwrap_or_else(PseudoRational::zero)
    }

    /// Total mass, the termination probability.
    pub fn total(&self) -> PseudoRational {
        self.probs.values().fold(PseudoRational::zero(), |a, p| a.add(p))
    }
}

/// Sparse vector of per-column values.
type Vals = BTreeMap<usize, PseudoRational>;

fn axpy(acc: &mut Vals, p: &PseudoRational, x: &Vals) {
    for (k, v) in x {
        let t = p.mul(v);
        let e = acc.entry(*k).or_insert_with(PseudoRational::zero);
        *e = e.add(&t);
        if e.is_zero() {
            acc.remove(k);
        }
    }
}

/// Strongly connected components in reverse topological order (every
/// component comes after all components it can reach).
pub fn components(d: &Pdtmc) -> Vec<Vec<usize>> {
    // iterative Tarjan
    let n = d.len();
    let (mut index, mut low) = (vec![usize::MAX; n], vec![0usize; n]);
    let mut on_stack = vec![false; n];
    let (mut stack, mut out) = (Vec::new(), Vec::new());
    let mut next = 0usize;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut ei)) = call.last_mut() {
            if let Some(&(w, _)) = d.edges[v].get(*ei) {
                *ei += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort();
                    out.push(comp);
                }
            }
        }
    }
    out
}

fn is_cyclic_component(d: &Pdtmc, comp: &[usize]) -> bool {
    comp.len() > 1 || (!d.absorbing[comp[0]] && d.edges[comp[0]].iter().any(|(j, _)| *j == comp[0]))
}

/// Whether every cycle of the chain is an exit self-loop.
pub fn is_acyclic(d: &Pdtmc) -> bool {
    components(d).iter().all(|c| !is_cyclic_component(d, c))
}

/// Values of all states, given the values of the absorbing ones.
fn solve_all(d: &Pdtmc, leaf: &dyn Fn(usize) -> Result<Vals, ReachError>, allow_cycles: bool) -> Result<Vec<Vals>, ReachError> {
    let mut val: Vec<Option<Vals>> = vec![None; d.len()];
    for comp in components(d) {
        if !is_cyclic_component(d, &comp) {
            let z = comp[0];
            let v = if d.absorbing[z] {
                leaf(z)?
            } else {
                let mut acc = Vals::new();
                for (j, p) in &d.edges[z] {
                    axpy(&mut acc, p, val[*j].as_ref().expect("successor solved"));
                }
                acc
            };
            val[z] = Some(v);
            continue;
        }
        if !allow_cycles {
            return Err(ReachError::Cycle(d.label(comp[0]).to_string()));
        }
        for (z, v) in comp.iter().zip(solve_component(d, &comp, &val)?) {
            val[*z] = Some(v);
        }
    }
    Ok(val.into_iter().map(|v| v.expect("all solved")).collect())
}

/// Solve `x_z = Σ_{z'} p_{zz'} x_{z'}` for the states of one cyclic component.
fn solve_component(d: &Pdtmc, comp: &[usize], val: &[Option<Vals>]) -> Result<Vec<Vals>, ReachError> {
    let n = comp.len();
    let pos: BTreeMap<usize, usize> = comp.iter().enumerate().map(|(i, z)| (*z, i)).collect();
    let cols: BTreeSet<usize> = comp
        .iter()
        .flat_map(|z| d.edges[*z].iter())
        .filter(|(j, _)| !pos.contains_key(j))
        .flat_map(|(j, _)| val[*j].as_ref().expect("successor solved").keys().copied())
        .collect();
    let cols: Vec<usize> = cols.into_iter().collect();
    // rows: (I − P_CC) x = P_C,out · v_out
    let mut a = vec![vec![PseudoRational::zero(); n]; n];
    let mut b = vec![vec![PseudoRational::zero(); cols.len()]; n];
    for (i, z) in comp.iter().enumerate() {
        a[i][i] = PseudoRational::one();
        for (j, p) in &d.edges[*z] {
            match pos.get(j) {
                Some(&k) => a[i][k] = a[i][k].sub(p),
                None => {
                    let vj = val[*j].as_ref().expect("successor solved");
                    for (c, col) in cols.iter().enumerate() {
                        if let Some(x) = vj.get(col) {
                            b[i][c] = b[i][c].add(&p.mul(x));
                        }
                    }
                }
            }
        }
    }
    let (a0, b0) = (a.clone(), b.clone());
    let singular = || ReachError::Singular(d.label(comp[0]).to_string());
    // forward elimination with the smallest available pivot
    for k in 0..n {
        let pr = (k..n).filter(|&r| !a[r][k].is_zero()).min_by_key(|&r| a[r][k].size()).ok_or_else(singular)?;
        a.swap(k, pr);
        b.swap(k, pr);
        let piv = a[k][k].clone();
        for r in k + 1..n {
            if a[r][k].is_zero() {
                continue;
            }
            let f = a[r][k].div(&piv).expect("nonzero pivot");
            for c in k..n {
                if !a[k][c].is_zero() {
                    a[r][c] = a[r][c].sub(&f.mul(&a[k][c]));
                }
            }
            for c in 0..cols.len() {
                if !b[k][c].is_zero() {
                    b[r][c] = b[r][c].sub(&f.mul(&b[k][c]));
                }
            }
        }
    }
    let mut x = vec![vec![PseudoRational::zero(); cols.len()]; n];
    for k in (0..n).rev() {
        for c in 0..cols.len() {
            let mut s = b[k][c].clone();
            for j in k + 1..n {
                if !a[k][j].is_zero() {
                    s = s.sub(&a[k][j].mul(&x[j][c]));
                }
            }
            x[k][c] = s.div(&a[k][k]).expect("nonzero pivot");
        }
    }
    // verify against the original system
    for i in 0..n {
        for c in 0..cols.len() {
            let mut lhs = PseudoRational::zero();
            for j in 0..n {
                if !a0[i][j].is_zero() {
                    lhs = lhs.add(&a0[i][j].mul(&x[j][c]));
                }
            }
            if !lhs.sub(&b0[i][c]).is_zero() {
                return Err(ReachError::Unverified(d.label(comp[i]).to_string()));
            }
        }
    }
    Ok(x.into_iter()
        .map(|row| cols.iter().zip(row).filter(|(_, v)| !v.is_zero()).map(|(c, v)| (*c, v)).collect())
        .collect())
}

fn indicator(targets: &[usize]) -> impl Fn(usize) -> Result<Vals, ReachError> + '_ {
    move |z| Ok(if targets.contains(&z) { [(0, PseudoRational::one())].into() } else { Vals::new() })
}

/// Probability of reaching `targets` (absorbing states) from `start` on an
/// acyclic chain, as a sum over paths.
pub fn reach_acyclic(d: &Pdtmc, start: usize, targets: &[usize]) -> Result<PseudoRational, ReachError> {
    let val = solve_all(d, &indicator(targets), false)?;
    Ok(val[start].get(&0).cloned().unwrap_or_else(PseudoRational::zero))
}

/// Probability of reaching `targets` from `start` on any chain.
pub fn reach_solve(d: &Pdtmc, start: usize, targets: &[usize]) -> Result<PseudoRational, ReachError> {
    let val = solve_all(d, &indicator(targets), true)?;
    Ok(val[start].get(&0).cloned().unwrap_or_else(PseudoRational::zero))
}

/// Distribution of outputs at the chain's exit states.
pub fn chain_distribution(d: &Pdtmc) -> Result<OutputDistribution, ReachError> {
    let mut outs: Vec<Vec<i64>> = Vec::new();
    for z in 0..d.len() {
        if d.absorbing[z] {
            let o = output_of(d, z).ok_or_else(|| ReachError::UnsetOutput(d.label(z).to_string()))?;
            if !outs.contains(&o) {
                outs.push(o);
            }
        }
    }
    outs.sort();
    let col = |z: usize| -> Result<Vals, ReachError> {
        let o = output_of(d, z).ok_or_else(|| ReachError::UnsetOutput(d.label(z).to_string()))?;
        Ok([(outs.binary_search(&o).expect("listed"), PseudoRational::one())].into())
    };
    let cyclic = !is_acyclic(d);
    let val = solve_all(d, &col, true)?;
    let probs = val[d.initial].iter().map(|(c, p)| (outs[*c].clone(), p.clone())).collect();
    Ok(OutputDistribution { probs, cyclic })
}

pub fn output_distribution(p: &Program, input: &[i64]) -> Result<OutputDistribution, ReachError> {
    output_distribution_with(p, input, &BuildConfig::default())
}

pub fn output_distribution_with(p: &Program, input: &[i64], cfg: &BuildConfig) -> Result<OutputDistribution, ReachError> {
    let d = build_dtmc_with(p, input, cfg)?;
    chain_distribution(&d)
}

/// Output distributions of several inputs, built in parallel.
pub fn output_distributions(
    p: &Program,
    inputs: &[Vec<i64>],
    cfg: &BuildConfig,
) -> Vec<Result<OutputDistribution, ReachError>> {
    inputs.par_iter().map(|i| output_distribution_with(p, i, cfg)).collect()
}

/// Points of `iv` where an edge inside a cycle vanishes. Elimination
/// results are valid as functions away from these points only; acyclic
/// parts are path sums and need no exceptions.
pub fn exceptional_points(d: &Pdtmc, iv: &EpsInterval, cfg: &SignConfig) -> Result<Vec<RootInterval>, SignVerdict> {
    let mut out = Vec::new();
    for comp in components(d) {
        if !is_cyclic_component(d, &comp) {
            continue;
        }
        for z in &comp {
            for (_, p) in &d.edges[*z] {
                if p.as_constant().is_none() {
                    out.extend(isolate_roots(p, iv, cfg)?);
                }
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}
