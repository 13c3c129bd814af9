//! Parsing, desugaring, static checks and printing on worked programs.

use dip_frontend::{
    adjacent_pairs, enumerate_valuations, parse_program, parse_program_with, print_program, static_check,
    AdjacencySpec, Expr, FrontendError, Program, StmtKind, VarSort, Which,
};
use dip_symalg::{parse_pseudo_rational, q};

const SVT_N2: &str = "
# threshold 0, two 1-sensitive queries, stop after the first one above
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

const RAND2_ONE: &str = "
input q[1..1]
output out[1..1]
choose Flip(1) {
  (0) -> 0: (1+eps)/2; 1: (1-eps)/2
  (1) -> 1: (1+eps)/2; 0: (1-eps)/2
}
out[1] <- choose(Flip, eps, q[1])
exit
";

/// Every construct the surface language has, for round trips.
const KITCHEN: &str = "
domain -1..1
const N = 2
input q[1..N]
output o, k, m
score F(1) {
  (-1) -> -1: 1; 0: 0; 1: -1/2
  (0) -> -1: 0; 0: 1; 1: 0
  (1) -> -1: -1; 0: 0; 1: 1
}
rT <- LapPos(1/2 * eps, 0)
for i in 1..N {
  z[i] <- DLap(eps, q[i])
}
c <- z1 - 2 * z2 + 1 >= 0 and not (q1 == q2)
if c or GT(q1, 0) { o <- expmech(F, eps/3, q2) } else if q1 < 0 { o <- -1 } else { o <- 0 }
x <- Lap(2 * eps, q1 + q2)
k <- disc(max(x, rT), [-1, 0, 1])
m <- argmax(x, rT, q2)
w <- q1
while w != 0 { w <- w - 1 }
";

fn parse(src: &str) -> Program {
    parse_program(src).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

fn kinds(p: &Program) -> Vec<&'static str> {
    p.statements()
        .iter()
        .map(|s| match &s.kind {
            StmtKind::Assign { .. } => "assign",
            StmtKind::Lap { .. } => "lap",
            StmtKind::DLap { .. } => "dlap",
            StmtKind::ExpMech { .. } => "expmech",
            StmtKind::Choose { .. } => "choose",
            StmtKind::If { .. } => "if",
            StmtKind::While { .. } => "while",
            StmtKind::Exit => "exit",
        })
        .collect()
}

#[test]
fn svt_with_two_queries_has_thirteen_labeled_statements() {
    let p = parse(SVT_N2);
    let labels: Vec<&str> = p.statements().iter().map(|s| s.label.as_str()).collect();
    let expected: Vec<String> = (1..=13).map(|i| i.to_string()).collect();
    assert_eq!(labels, expected);
    assert_eq!(p.inputs, ["q1", "q2"]);
    assert_eq!(p.outputs, ["out1", "out2"]);
    assert_eq!(p.sort_of("rT"), Some(VarSort::Real));
    assert_eq!(p.sort_of("b"), Some(VarSort::Bool));
    assert_eq!(p.sort_of("T"), Some(VarSort::Dom));
    match &p.stmt("4").unwrap().kind {
        StmtKind::Lap { scale, mean, .. } => {
            assert_eq!(*scale, q(1, 2));
            assert_eq!(*mean, Expr::var("T"));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(static_check(&p), vec![]);
}

#[test]
fn minimal_program() {
    let p = parse("1: exit");
    assert_eq!(p.body.len(), 1);
    assert_eq!(p.body[0].label, "1");
    assert_eq!(p.body[0].kind, StmtKind::Exit);
    assert!(p.inputs.is_empty() && p.outputs.is_empty() && p.vars.is_empty());
    assert!(static_check(&p).is_empty());
}

#[test]
fn randomized_response_with_one_query() {
    let p = parse(RAND2_ONE);
    assert_eq!(kinds(&p), ["choose", "exit"]);
    let d = &p.choose_defs["Flip"];
    assert_eq!(d.arity, 1);
    assert_eq!(d.pmf[&(vec![0], 0)], parse_pseudo_rational("(1+eps)/2").unwrap());
    assert_eq!(d.pmf[&(vec![1], 0)], parse_pseudo_rational("1/2 - eps/2").unwrap());
    assert!(static_check(&p).is_empty());
}

#[test]
fn implicit_exit_and_fresh_labels() {
    let p = parse("input a\noutput o\nl1: o <- a\nr <- Lap(eps, a)");
    let labels: Vec<&str> = p.statements().iter().map(|s| s.label.as_str()).collect();
    assert_eq!(labels, ["l1", "l2", "l3"]);
    assert_eq!(kinds(&p), ["assign", "lap", "exit"]);
}

#[test]
fn for_loops_unroll_with_label_suffixes() {
    let p = parse("const N = 3\ninput q[1..N]\noutput o[1..N]\nfor i in 1..N { s: o[i] <- q[i] }");
    let labels: Vec<&str> = p.statements().iter().map(|s| s.label.as_str()).collect();
    assert_eq!(&labels[..3], ["s_1", "s_2", "s_3"]);
    let p5 = parse_program_with(
        "const N = 3\ninput q[1..N]\noutput o[1..N]\nfor i in 1..N { o[i] <- q[i] }",
        &[("N".to_string(), 5)].into(),
    )
    .unwrap();
    assert_eq!(p5.inputs.len(), 5);
    assert_eq!(kinds(&p5).len(), 6);
}

#[test]
fn repeated_real_assignments_become_single_assignment() {
    let p = parse("input a\noutput o\nr <- Lap(eps, a)\nb <- r >= 0\nr <- Lap(eps, 0)\nc <- r >= 1\no <- 0");
    let targets: Vec<&str> = p.statements().iter().filter_map(|s| s.target()).collect();
    assert_eq!(targets, ["r", "b", "r_1", "c", "o"]);
    assert!(static_check(&p).is_empty());
}

#[test]
fn one_sided_laplace_desugars_to_a_sign_flip() {
    let p = parse("output o\nt <- LapPos(eps, 0)\nb <- t >= 0\nif b { o <- 1 } else { o <- 0 }");
    assert_eq!(&kinds(&p)[..4], ["lap", "assign", "if", "assign"]);
    assert!(static_check(&p).is_empty(), "{:?}", static_check(&p));
}

#[test]
fn noise_comparison_in_a_condition_is_hoisted() {
    let p = parse("input a\noutput o\nr <- Lap(eps, a)\nif r >= 0 and a == 1 { o <- 1 } else { o <- 0 }");
    assert_eq!(&kinds(&p)[..3], ["lap", "assign", "if"]);
    assert_eq!(p.sort_of("_c1"), Some(VarSort::Bool));
    assert!(static_check(&p).is_empty());
}

#[test]
fn discretization_expands_to_a_comparison_chain() {
    let p = parse("output o\nr <- Lap(eps, 0)\nt <- Lap(eps, 1)\no <- disc(max(r, t), [0, 1])");
    // two comparisons against the first cut, one branch, then the last point
    assert_eq!(kinds(&p), ["lap", "lap", "assign", "assign", "if", "assign", "assign", "exit"]);
    assert!(static_check(&p).is_empty(), "{:?}", static_check(&p));
}

#[test]
fn argmax_reports_positions_as_domain_values() {
    let p = parse("domain -1..1\noutput o\na <- Lap(eps, 0)\nb <- Lap(eps, 0)\nc <- Lap(eps, 0)\no <- argmax(a, b, c)");
    let mut stored = Vec::new();
    for s in p.statements() {
        if let StmtKind::Assign { target, expr: Expr::Num(v) } = &s.kind {
            if target == "o" {
                stored.push(v.clone());
            }
        }
    }
    // positions 0, 1, 2 become the domain values −1, 0, 1
    assert_eq!(stored, [q(-1, 1), q(0, 1), q(1, 1)]);
    let err = parse_program("output o\na <- Lap(eps, 0)\nb <- Lap(eps, 0)\nc <- Lap(eps, 0)\no <- argmax(a, b, c)").unwrap_err();
    assert!(matches!(err, FrontendError::Syntax { .. }), "{err}");
}

#[test]
fn sampling_inside_a_loop_is_rejected() {
    let p = parse("input a\noutput o\no <- a\nw <- 1\nwhile w == 1 {\n  L: r <- Lap(eps, 0)\n  w <- 0\n}");
    let d = static_check(&p);
    assert_eq!(d.len(), 1, "{d:?}");
    assert_eq!(d[0].label, "L");
    assert_eq!(d[0].message, "sampling in loop scope");
}

#[test]
fn real_integer_comparison_is_rejected() {
    let p = parse("input a\noutput o\nr <- Lap(eps, a)\nz <- DLap(eps, a)\nM: b <- r >= z\no <- 0");
    let d = static_check(&p);
    assert_eq!(d.len(), 1, "{d:?}");
    assert_eq!(d[0].label, "M");
    assert_eq!(d[0].message, "mixed-sort comparison");
}

#[test]
fn other_restrictions_are_reported() {
    let cases = [
        ("input a\noutput o\ndom c\nL: o <- c\nc <- 1", "o <- c before c is assigned", "used before"),
        ("input a\noutput o\nr <- Lap(eps, a)\ns <- Lap(eps, a)\nL: t <- r * s\no <- 0", "product of two noisy values", "non-linear"),
        ("input a\noutput o\nif a == 0 { o <- 1 }\nL: exit", "o unset on one path", "uninitialized"),
        ("output o\nz <- DLap(eps, 0)\nL: b <- z >= 1/2\no <- 0", "fractional integer coefficient", "non-integer"),
        (
            "output o\nchoose D(0) {\n () -> 0: 1/2; 1: 1/3\n}\no <- choose(D, eps)",
            "pmf not summing to one",
            "sums to",
        ),
        ("output o\nscore F(0) {\n () -> 0: 1\n}\no <- expmech(F, eps)", "partial score table", "no score"),
    ];
    for (src, what, needle) in cases {
        let d = static_check(&parse(src));
        assert!(d.iter().any(|d| d.message.contains(needle)), "{what}: {d:?}");
    }
    assert!(static_check(&parse("input a\noutput o\nwhile a == 0 {\n  L: o <- 1\n}\no <- 0")).is_empty());
}

#[test]
fn errors_carry_positions() {
    assert!(matches!(parse_program("x <- "), Err(FrontendError::Syntax { line: 1, .. })));
    assert!(matches!(
        parse_program("output o\n\no <- zz"),
        Err(FrontendError::UnknownIdent { ref name, line: 3, col: 6 }) if name == "zz"
    ));
    assert!(matches!(parse_program("r <- Lap(eps * eps, 0)"), Err(FrontendError::NonRational { line: 1, .. })));
    assert!(matches!(parse_program("r <- Lap(-eps, 0)"), Err(FrontendError::NonRational { .. })));
    assert!(matches!(parse_program("r <- Lap(1, 0)"), Err(FrontendError::NonRational { .. })));
    assert!(matches!(parse_program("o <- 1.5"), Err(FrontendError::Syntax { line: 1, col: 6, .. })));
}

#[test]
fn valuation_spaces() {
    let p = parse(SVT_N2);
    assert_eq!(enumerate_valuations(&p, Which::Inputs, 1000).unwrap(), [vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    let none = parse("domain -1..1\ninput a\nexit");
    assert_eq!(enumerate_valuations(&none, Which::Outputs, 1).unwrap(), [Vec::<i64>::new()]);
    assert_eq!(enumerate_valuations(&none, Which::Inputs, 10).unwrap(), [vec![-1], vec![0], vec![1]]);
    assert!(matches!(enumerate_valuations(&p, Which::Inputs, 3), Err(FrontendError::SpaceTooLarge { .. })));
}

#[test]
fn adjacency_relations() {
    let two = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
    // oracle: brute force over ordered pairs, keep x < y
    let brute = |pred: &dyn Fn(&[i64], &[i64]) -> bool, space: &[Vec<i64>]| {
        let mut out = Vec::new();
        for x in space {
            for y in space {
                if x < y && pred(x, y) {
                    out.push((x.clone(), y.clone()));
                }
            }
        }
        out
    };
    let linf = |x: &[i64], y: &[i64]| x.iter().zip(y).all(|(a, b)| (a - b).abs() <= 1);
    let l1 = |x: &[i64], y: &[i64]| x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<i64>() <= 1;
    let pairs = adjacent_pairs(&AdjacencySpec::LInf1, &two).unwrap();
    assert_eq!(pairs.len(), 6);
    assert_eq!(pairs, brute(&linf, &two));
    let one = vec![vec![-1], vec![0], vec![1]];
    assert_eq!(adjacent_pairs(&AdjacencySpec::L1_1, &one).unwrap(), [(vec![-1], vec![0]), (vec![0], vec![1])]);
    assert_eq!(adjacent_pairs(&AdjacencySpec::L1_1, &two).unwrap(), brute(&l1, &two));
    let bits = vec![vec![0], vec![1]];
    let explicit = AdjacencySpec::Explicit(vec![(vec![0], vec![1])]);
    assert_eq!(adjacent_pairs(&explicit, &bits).unwrap(), [(vec![0], vec![1])]);
    let both_ways = AdjacencySpec::Explicit(vec![(vec![1], vec![0]), (vec![0], vec![1])]);
    assert_eq!(adjacent_pairs(&both_ways, &bits).unwrap(), [(vec![0], vec![1])]);
    let outside = AdjacencySpec::Explicit(vec![(vec![0], vec![2])]);
    assert!(matches!(adjacent_pairs(&outside, &bits), Err(FrontendError::Adjacency(_))));
}

#[test]
fn printing_round_trips() {
    for src in [SVT_N2, RAND2_ONE, KITCHEN, "1: exit"] {
        let p = parse(src);
        let text = print_program(&p);
        let back = parse_program(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(back, p, "{text}");
        assert_eq!(print_program(&back), text);
    }
}

#[test]
fn kitchen_sink_is_accepted() {
    let p = parse(KITCHEN);
    assert_eq!(static_check(&p), vec![]);
    assert_eq!(p.dom.lo, -1);
    assert_eq!(p.sort_of("z1"), Some(VarSort::Int));
    assert_eq!(p.sort_of("m"), Some(VarSort::Dom));
}
