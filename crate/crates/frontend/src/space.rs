//! Finite input and output spaces and adjacency relations over inputs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ast::{Dom, Program};
use crate::FrontendError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Inputs,
    Outputs,
}

/// All tuples in `dom^arity`, in lexicographic order.
pub fn product(dom: Dom, arity: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                dom.values().map(move |v| {
                    let mut t = prefix.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
    }
    out
}

/// Every valuation of the program's inputs (or outputs) in lexicographic
/// order; more than `cap` valuations is an error.
pub fn enumerate_valuations(p: &Program, which: Which, cap: usize) -> Result<Vec<Vec<i64>>, FrontendError> {
    let arity = match which {
        Which::Inputs => p.inputs.len(),
        Which::Outputs => p.outputs.len(),
    };
    let size = (p.dom.len() as u128).checked_pow(arity as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(FrontendError::SpaceTooLarge {
            what: match which {
                Which::Inputs => "input",
                Which::Outputs => "output",
            },
            size: size.to_string(),
            cap,
        });
    }
    Ok(product(p.dom, arity))
}

/// Which pairs of inputs are neighbours.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencySpec {
    /// The listed pairs, in either order.
    Explicit(Vec<(Vec<i64>, Vec<i64>)>),
    /// Every coordinate differs by at most one.
    LInf1,
    /// The coordinates differ by at most one in total.
    L1_1,
}

/// Unordered adjacent pairs `(x, y)` with `x < y` lexicographically, each
/// listed once. Both directions must be checked by the caller.
pub fn adjacent_pairs(spec: &AdjacencySpec, inputs: &[Vec<i64>]) -> Result<Vec<(Vec<i64>, Vec<i64>)>, FrontendError> {
    let dist = |x: &[i64], y: &[i64]| -> Vec<u64> { x.iter().zip(y).map(|(a, b)| (a - b).unsigned_abs()).collect() };
    match spec {
        AdjacencySpec::Explicit(pairs) => {
            let known: BTreeSet<&Vec<i64>> = inputs.iter().collect();
            let mut out = BTreeSet::new();
            for (x, y) in pairs {
                for v in [x, y] {
                    if !known.contains(v) {
                        return Err(FrontendError::Adjacency(format!("{v:?} is not a valid input")));
                    }
                }
                if x == y {
                    return Err(FrontendError::Adjacency(format!("{x:?} is paired with itself")));
                }
                out.insert(if x < y { (x.clone(), y.clone()) } else { (y.clone(), x.clone()) });
            }
            Ok(out.into_iter().collect())
        }
        AdjacencySpec::LInf1 | AdjacencySpec::L1_1 => {
            let mut out = Vec::new();
            for (i, x) in inputs.iter().enumerate() {
                for y in &inputs[i + 1..] {
                    let ok = match spec {
                        AdjacencySpec::LInf1 => dist(x, y).into_iter().max().unwrap_or(0) <= 1,
                        _ => dist(x, y).iter().sum::<u64>() <= 1,
                    };
                    if ok && x != y {
                        let (a, b) = if x < y { (x, y) } else { (y, x) };
                        out.push((a.clone(), b.clone()));
                    }
                }
            }
            Ok(out)
        }
    }
}
