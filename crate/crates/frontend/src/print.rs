//! Source text for desugared programs. The output parses back to an equal
//! [`Program`]: every variable is declared, every statement is labeled and
//! non-natural literals are parenthesized.

use std::collections::BTreeMap;
use std::fmt::Write;

use dip_symalg::{fmt_q, Q};
use num_traits::Signed;

use crate::ast::{Expr, Program, Stmt, StmtKind, VarSort};

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    writeln!(out, "domain {}..{}", p.dom.lo, p.dom.hi).unwrap();
    if !p.inputs.is_empty() {
        writeln!(out, "input {}", p.inputs.join(", ")).unwrap();
    }
    if !p.outputs.is_empty() {
        writeln!(out, "output {}", p.outputs.join(", ")).unwrap();
    }
    let mut by_sort: BTreeMap<VarSort, Vec<&str>> = BTreeMap::new();
    for (v, s) in &p.vars {
        if !p.inputs.contains(v) && !p.outputs.contains(v) {
            by_sort.entry(*s).or_default().push(v);
        }
    }
    for (s, names) in by_sort {
        writeln!(out, "{} {}", s.keyword(), names.join(", ")).unwrap();
    }
    for (name, t) in &p.score_tables {
        let rows = group(t.entries.iter().map(|(k, v)| (k, fmt_q(v))));
        write_table(&mut out, "score", name, t.arity, rows);
    }
    for (name, d) in &p.choose_defs {
        let rows = group(d.pmf.iter().map(|(k, v)| (k, v.to_string())));
        write_table(&mut out, "choose", name, d.arity, rows);
    }
    for s in &p.body {
        stmt(&mut out, s, 0);
    }
    out
}

fn group<'a>(entries: impl Iterator<Item = (&'a (Vec<i64>, i64), String)>) -> BTreeMap<&'a Vec<i64>, Vec<(i64, String)>> {
    let mut rows: BTreeMap<&Vec<i64>, Vec<(i64, String)>> = BTreeMap::new();
    for ((args, v), text) in entries {
        rows.entry(args).or_default().push((*v, text));
    }
    rows
}

fn write_table(out: &mut String, kw: &str, name: &str, arity: usize, rows: BTreeMap<&Vec<i64>, Vec<(i64, String)>>) {
    writeln!(out, "{kw} {name}({arity}) {{").unwrap();
    for (args, entries) in rows {
        let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
        let entries: Vec<String> = entries.iter().map(|(v, t)| format!("{v}: {t}")).collect();
        writeln!(out, "  ({}) -> {}", args.join(", "), entries.join("; ")).unwrap();
    }
    writeln!(out, "}}").unwrap();
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "  ".repeat(depth);
    write!(out, "{pad}{}: ", s.label).unwrap();
    match &s.kind {
        StmtKind::Assign { target, expr } => writeln!(out, "{target} <- {}", print_expr(expr)).unwrap(),
        StmtKind::Lap { target, scale, mean } => {
            writeln!(out, "{target} <- Lap({}, {})", scale_text(scale), print_expr(mean)).unwrap()
        }
        StmtKind::DLap { target, scale, mean } => {
            writeln!(out, "{target} <- DLap({}, {})", scale_text(scale), print_expr(mean)).unwrap()
        }
        StmtKind::ExpMech { target, scale, score, args } => {
            writeln!(out, "{target} <- expmech({score}, {}{})", scale_text(scale), arg_list(args)).unwrap()
        }
        StmtKind::Choose { target, scale, dist, args } => {
            writeln!(out, "{target} <- choose({dist}, {}{})", scale_text(scale), arg_list(args)).unwrap()
        }
        StmtKind::If { cond, then_branch, else_branch } => {
            writeln!(out, "if {} {{", print_expr(cond)).unwrap();
            for t in then_branch {
                stmt(out, t, depth + 1);
            }
            if else_branch.is_empty() {
                writeln!(out, "{pad}}}").unwrap();
            } else {
                writeln!(out, "{pad}}} else {{").unwrap();
                for t in else_branch {
                    stmt(out, t, depth + 1);
                }
                writeln!(out, "{pad}}}").unwrap();
            }
        }
        StmtKind::While { cond, body } => {
            writeln!(out, "while {} {{", print_expr(cond)).unwrap();
            for t in body {
                stmt(out, t, depth + 1);
            }
            writeln!(out, "{pad}}}").unwrap();
        }
        StmtKind::Exit => writeln!(out, "exit").unwrap(),
    }
}

fn scale_text(c: &Q) -> String {
    format!("{} * eps", num_text(c))
}

fn arg_list(args: &[Expr]) -> String {
    args.iter().map(|a| format!(", {}", print_expr(a))).collect()
}

fn num_text(q: &Q) -> String {
    if q.is_integer() && !q.is_negative() {
        fmt_q(q)
    } else {
        format!("({})", fmt_q(q))
    }
}

/// Expression text with the minimal parentheses for the grammar's
/// precedence levels.
pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr(&mut s, e, 0);
    s
}

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Or(..) => 1,
        Expr::And(..) => 2,
        Expr::Not(..) => 3,
        Expr::Cmp(..) => 4,
        Expr::Add(..) | Expr::Sub(..) => 5,
        Expr::Mul(..) => 6,
        Expr::Neg(..) => 7,
        Expr::Num(..) | Expr::Bool(..) | Expr::Var(..) => 8,
    }
}

fn expr(out: &mut String, e: &Expr, min: u8) {
    let paren = level(e) < min;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Num(q) => out.push_str(&num_text(q)),
        Expr::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Var(v) => out.push_str(v),
        Expr::Neg(a) => {
            out.push('-');
            expr(out, a, 7);
        }
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            expr(out, a, 5);
            out.push_str(if matches!(e, Expr::Add(..)) { " + " } else { " - " });
            expr(out, b, 6);
        }
        Expr::Mul(a, b) => {
            expr(out, a, 6);
            out.push_str(" * ");
            expr(out, b, 7);
        }
        Expr::Cmp(op, a, b) => {
            expr(out, a, 5);
            write!(out, " {} ", op.symbol()).unwrap();
            expr(out, b, 5);
        }
        Expr::Not(a) => {
            out.push_str("not ");
            expr(out, a, 3);
        }
        Expr::And(a, b) => {
            expr(out, a, 2);
            out.push_str(" and ");
            expr(out, b, 3);
        }
        Expr::Or(a, b) => {
            expr(out, a, 1);
            out.push_str(" or ");
            expr(out, b, 2);
        }
    }
    if paren {
        out.push(')');
    }
}
