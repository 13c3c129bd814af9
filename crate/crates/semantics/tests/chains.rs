//! Chain construction on worked programs and the bundled corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use dip_frontend::{parse_program, Program, ScoreTable};
use dip_lapprob::prob_system;
use dip_semantics::{build_dtmc, build_dtmc_with, exp_mech_pmf, terminal_states, BuildConfig, Pdtmc, SemError};
use dip_symalg::{parse_pseudo_rational, q, qi, PseudoRational};

const SVT_N2: &str = "
domain 0..1
input q1, q2
output out1, out2
1: T <- 0
2: out1 <- 0
3: out2 <- 0
4: rT <- Lap(eps/2, T)
5: r1 <- Lap(eps/4, q1)
6: b <- r1 >= rT
7: if b {
  8: out1 <- 1
} else {
  9: r2 <- Lap(eps/4, q2)
  10: b <- r2 >= rT
  11: if b {
    12: out2 <- 1
  }
}
13: exit
";

const RAND1_ONE: &str = "
input q[1..1]
output out[1..1]
choose Flip(1) {
  (0) -> 0: exp(eps)/(1+exp(eps)); 1: 1/(1+exp(eps))
  (1) -> 1: exp(eps)/(1+exp(eps)); 0: 1/(1+exp(eps))
}
out[1] <- choose(Flip, eps, q[1])
";

fn parse(src: &str) -> Program {
    parse_program(src).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

fn corpus() -> Vec<(String, Program)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/corpus");
    let mut out = Vec::new();
    for e in std::fs::read_dir(&dir).unwrap() {
        let path = e.unwrap().path();
        if path.extension().is_some_and(|x| x == "dip") {
            let src = std::fs::read_to_string(&path).unwrap();
            out.push((path.file_stem().unwrap().to_string_lossy().into_owned(), parse(&src)));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    assert!(out.len() >= 15);
    out
}

fn states_labelled(d: &Pdtmc, label: &str) -> Vec<usize> {
    (0..d.len()).filter(|&s| d.label(s) == label).collect()
}

/// Sum over all paths from the initial state of the product of edge
/// probabilities, for paths ending in a state where `stop` holds.
fn path_sum(d: &Pdtmc, stop: &dyn Fn(usize) -> bool) -> PseudoRational {
    fn go(d: &Pdtmc, s: usize, acc: PseudoRational, stop: &dyn Fn(usize) -> bool, total: &mut PseudoRational) {
        if stop(s) {
            *total = total.add(&acc);
            return;
        }
        if d.absorbing[s] {
            return;
        }
        for (t, f) in &d.edges[s] {
            go(d, *t, acc.mul(f), stop, total);
        }
    }
    let mut total = PseudoRational::zero();
    go(d, d.initial, PseudoRational::one(), stop, &mut total);
    total
}

#[test]
fn line_ten_splits_on_the_second_query_given_the_first_failed() {
    let p = parse(SVT_N2);
    let d = build_dtmc(&p, &[1, 1]).unwrap();
    let at10 = states_labelled(&d, "10");
    assert_eq!(at10.len(), 1, "only the else-branch of the first test reaches line 10");
    let s = at10[0];
    assert_eq!(d.edges[s].len(), 2);
    let (p_yes, p_no) = (&d.edges[s][0].1, &d.edges[s][1].1);
    assert!(p_yes.add(p_no).is_one());
    assert!(p_yes.as_constant().is_none());
    // the state carries exactly r1 < rT, with scales 1/2 (threshold) and 1/4
    let conds = &d.states[s].conds;
    assert_eq!(conds.constraints.len(), 1);
    assert_eq!(conds.vars["rT"].scale, q(1, 2));
    assert_eq!(conds.vars["r1"].scale, q(1, 4));
    assert_eq!(conds.vars["r1"].mean, qi(1));
    // the split is conditional: the product with P(r1 < rT) is the joint
    // probability of writing ⊤ only at the second position
    let r2 = parse_pseudo_rational("(-22 + 32*exp(eps/4) - 3*eps)/(48*exp(eps/2))").unwrap();
    let joint = path_sum(&d, &|t| d.label(t) == "12");
    assert!(joint.sub(&r2).is_zero(), "{joint}");
    let before = path_sum(&d, &|t| t == s);
    assert!(before.mul(p_yes).sub(&r2).is_zero());
}

#[test]
fn input_zero_one_gives_the_corrected_closed_form() {
    let d = build_dtmc(&parse(SVT_N2), &[0, 1]).unwrap();
    let r1 = parse_pseudo_rational("(24*exp(3*eps/4) - 21*exp(eps/2) + 8*exp(eps/4) - 1)/(48*exp(3*eps/4))").unwrap();
    let joint = path_sum(&d, &|t| d.label(t) == "12");
    assert!(joint.sub(&r1).is_zero(), "{joint}");
}

#[test]
fn exit_alone_is_one_absorbing_state() {
    let d = build_dtmc(&parse("1: exit"), &[]).unwrap();
    assert_eq!(d.len(), 1);
    assert!(d.absorbing[0]);
    assert_eq!(d.edges[0].len(), 1);
    assert_eq!(d.edges[0][0].0, 0);
    assert!(d.edges[0][0].1.is_one());
    assert_eq!(terminal_states(&d, &[]), [0]);
}

#[test]
fn randomized_response_branches_on_the_pmf() {
    let d = build_dtmc(&parse(RAND1_ONE), &[0]).unwrap();
    let keep = parse_pseudo_rational("exp(eps)/(1+exp(eps))").unwrap();
    let flip = parse_pseudo_rational("1/(1+exp(eps))").unwrap();
    let es = &d.edges[d.initial];
    assert_eq!(es.len(), 2);
    let by_out: BTreeMap<i64, &PseudoRational> =
        es.iter().map(|(t, f)| (d.states[*t].f_dom["out1"], f)).collect();
    assert_eq!(*by_out[&0], keep);
    assert_eq!(*by_out[&1], flip);
}

#[test]
fn exponential_mechanism_weights() {
    let table = |scores: &[(i64, i64, i64)]| ScoreTable {
        arity: 0,
        entries: scores.iter().map(|&(v, n, d)| ((vec![], v), q(n, d))).collect(),
    };
    let half = PseudoRational::constant(q(1, 2));
    let uniform = exp_mech_pmf(&table(&[(0, 0, 1), (1, 0, 1)]), &qi(1), &[]);
    assert_eq!(uniform, [(0, half.clone()), (1, half)].into());
    let e = parse_pseudo_rational("exp(eps)/(1+exp(eps))").unwrap();
    let o = parse_pseudo_rational("1/(1+exp(eps))").unwrap();
    let skew = exp_mech_pmf(&table(&[(0, 1, 1), (1, 0, 1)]), &qi(1), &[]);
    assert_eq!(skew, [(0, e.clone()), (1, o.clone())].into());
    let scaled = exp_mech_pmf(&table(&[(0, 1, 2), (1, 0, 1)]), &qi(2), &[]);
    assert_eq!(scaled, [(0, e), (1, o)].into());
    let three = exp_mech_pmf(&table(&[(-1, -1, 1), (0, 1, 3), (1, 2, 1)]), &q(3, 2), &[]);
    let total = three.values().fold(PseudoRational::zero(), |a, f| a.add(f));
    assert!(total.is_one());
}

#[test]
fn terminal_states_select_by_output() {
    let p = parse(SVT_N2);
    let d = build_dtmc(&p, &[0, 1]).unwrap();
    // oracle: exit states reachable without passing a statement that writes ⊤
    let mut seen = BTreeSet::new();
    let mut stack = vec![d.initial];
    while let Some(s) = stack.pop() {
        if !seen.insert(s) || matches!(d.label(s), "8" | "12") {
            continue;
        }
        stack.extend(d.edges[s].iter().map(|(t, _)| *t));
    }
    let quiet: Vec<usize> = seen.into_iter().filter(|&s| d.absorbing[s]).collect();
    assert!(!quiet.is_empty());
    assert_eq!(terminal_states(&d, &[0, 0]), quiet);
    assert!(terminal_states(&d, &[2, 0]).is_empty());
    assert!(terminal_states(&d, &[0]).is_empty());
    let all: Vec<usize> = (0..d.len()).filter(|&s| d.absorbing[s]).collect();
    let mut union: Vec<usize> = [[0, 0], [0, 1], [1, 0], [1, 1]].iter().flat_map(|o| terminal_states(&d, o)).collect();
    union.sort();
    assert_eq!(union, all);
}

fn check_chain(name: &str, d: &Pdtmc) {
    for s in 0..d.len() {
        let es = &d.edges[s];
        assert!(!es.is_empty(), "{name}: state {s} has no successors");
        let total = es.iter().fold(PseudoRational::zero(), |a, (_, f)| a.add(f));
        assert!(total.is_one(), "{name}: edges of {s} sum to {total}");
        if d.absorbing[s] {
            assert_eq!(es.len(), 1);
            assert_eq!(es[0].0, s);
        }
        if es.iter().any(|(_, f)| f.is_one()) {
            assert_eq!(es.len(), 1, "{name}: deterministic and probabilistic edges mixed at {s}");
        }
        let distinct: BTreeSet<usize> = es.iter().map(|(t, _)| *t).collect();
        assert_eq!(distinct.len(), es.len(), "{name}: duplicate successor at {s}");
    }
}

/// Along every path, the product of comparison-split probabilities equals
/// the probability of the final state's conditions computed directly.
fn check_telescoping(name: &str, d: &Pdtmc) {
    let mut stack = vec![(d.initial, PseudoRational::one())];
    let mut checked = BTreeSet::new();
    while let Some((s, acc)) = stack.pop() {
        if checked.insert((s, acc.to_string())) {
            let direct = prob_system(&d.states[s].conds).unwrap();
            assert!(acc.sub(&direct).is_zero(), "{name}: state {s}: {acc} vs {direct}");
        }
        if d.absorbing[s] {
            continue;
        }
        let n = d.states[s].conds.constraints.len();
        for (t, f) in &d.edges[s] {
            let grew = d.states[*t].conds.constraints.len() > n;
            stack.push((*t, if grew { acc.mul(f) } else { acc.clone() }));
        }
    }
}

#[test]
fn corpus_chains_are_stochastic_and_telescope() {
    for (name, p) in corpus() {
        let inputs = dip_frontend::enumerate_valuations(&p, dip_frontend::Which::Inputs, 100).unwrap();
        for input in inputs.iter().take(4) {
            let d = build_dtmc(&p, input).unwrap();
            check_chain(&name, &d);
            check_telescoping(&name, &d);
        }
    }
}

#[test]
fn loops_and_dom_arithmetic() {
    let p = parse("domain 0..3\ninput a\noutput o\no <- a\nwhile o != 0 { o <- o - 1 }\nexit");
    let d = build_dtmc(&p, &[3]).unwrap();
    check_chain("countdown", &d);
    let exits: Vec<usize> = (0..d.len()).filter(|&s| d.absorbing[s]).collect();
    assert_eq!(exits.len(), 1);
    assert_eq!(d.states[exits[0]].f_dom["o"], 0);
    let sat = parse("domain 0..2\ninput a\noutput o\no <- a + 5\nexit");
    let d = build_dtmc(&sat, &[1]).unwrap();
    assert_eq!(terminal_states(&d, &[2]).len(), 1, "DOM arithmetic saturates");
    let half = parse("domain 0..2\ninput a\noutput o\no <- a * 1/2\nexit");
    assert!(matches!(build_dtmc(&half, &[1]), Err(SemError::Runtime { .. })));
}

#[test]
fn state_cap_and_bad_inputs() {
    let p = parse(SVT_N2);
    let n = build_dtmc(&p, &[0, 0]).unwrap().len();
    assert!(n < BuildConfig::default().max_states);
    assert!(matches!(
        build_dtmc_with(&p, &[0, 0], &BuildConfig { max_states: 3 }),
        Err(SemError::StateExplosion { cap: 3 })
    ));
    assert!(matches!(build_dtmc(&p, &[0]), Err(SemError::BadInput(_))));
    assert!(matches!(build_dtmc(&p, &[0, 7]), Err(SemError::BadInput(_))));
}

#[test]
fn dot_export_lists_every_edge() {
    let d = build_dtmc(&parse(SVT_N2), &[0, 1]).unwrap();
    let dot = d.to_dot();
    assert!(dot.starts_with("digraph"));
    let edges: usize = d.edges.iter().map(Vec::len).sum();
    assert_eq!(dot.matches(" -> ").count(), edges);
    assert!(dot.contains("doublecircle"));
}
