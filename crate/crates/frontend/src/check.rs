//! Static restrictions on desugared programs. Every violation is reported
//! with the label of the offending statement (or the table name).

use std::collections::BTreeSet;
use std::fmt;

use dip_symalg::PseudoRational;

use crate::ast::{Expr, Program, Stmt, StmtKind, VarSort};
use crate::space::product;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    /// Statement label, or `score F` / `choose D` for table problems.
    pub label: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.label, self.message)
    }
}

/// Sort of an expression as seen by the checker.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ESort {
    /// Literal arithmetic.
    Const,
    Dom,
    Int,
    Real,
    Bool,
}

impl ESort {
    fn numeric(self) -> bool {
        !matches!(self, ESort::Bool)
    }

    fn noisy(self) -> bool {
        matches!(self, ESort::Int | ESort::Real)
    }
}

/// All violated restrictions; empty means the program is accepted.
pub fn static_check(p: &Program) -> Vec<Diagnostic> {
    let mut c = Checker { p, out: Vec::new() };
    c.tables();
    let mut seen = BTreeSet::new();
    for s in p.statements() {
        if !seen.insert(s.label.as_str()) {
            c.diag(s, format!("duplicate label {}", s.label));
        }
    }
    for s in &p.body {
        c.sorts(s, false);
    }
    let inputs: BTreeSet<String> = p.inputs.iter().cloned().collect();
    c.flow(&p.body, &mut inputs.clone(), &mut BTreeSet::new());
    c.out
}

struct Checker<'a> {
    p: &'a Program,
    out: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn diag(&mut self, s: &Stmt, message: impl Into<String>) {
        self.out.push(Diagnostic { label: s.label.clone(), message: message.into() });
    }

    fn tables(&mut self) {
        let dom = self.p.dom;
        for (name, t) in &self.p.score_tables {
            let label = format!("score {name}");
            for args in product(dom, t.arity) {
                for v in dom.values() {
                    if !t.entries.contains_key(&(args.clone(), v)) {
                        self.out.push(Diagnostic { label: label.clone(), message: format!("no score for {args:?} -> {v}") });
                    }
                }
            }
            for (args, v) in t.entries.keys() {
                if !dom.contains(*v) || args.iter().any(|a| !dom.contains(*a)) {
                    self.out.push(Diagnostic { label: label.clone(), message: format!("entry {args:?} -> {v} outside the domain") });
                }
            }
        }
        for (name, d) in &self.p.choose_defs {
            let label = format!("choose {name}");
            for (args, v) in d.pmf.keys() {
                if !dom.contains(*v) || args.iter().any(|a| !dom.contains(*a)) {
                    self.out.push(Diagnostic { label: label.clone(), message: format!("entry {args:?} -> {v} outside the domain") });
                }
            }
            for args in product(dom, d.arity) {
                let mut total = PseudoRational::zero();
                for ((a, _), f) in &d.pmf {
                    if *a == args {
                        total = total.add(f);
                    }
                }
                if !total.is_one() {
                    self.out.push(Diagnostic {
                        label: label.clone(),
                        message: format!("pmf at {args:?} sums to {total}, not 1"),
                    });
                }
            }
        }
    }

    fn esort(&self, e: &Expr) -> Result<ESort, String> {
        let join = |a: ESort, b: ESort| -> Result<ESort, String> {
            use ESort::*;
            Ok(match (a, b) {
                (Real, Int) | (Int, Real) => return Err("mixed-sort expression".into()),
                (Real, _) | (_, Real) => Real,
                (Int, _) | (_, Int) => Int,
                (Dom, _) | (_, Dom) => Dom,
                _ => Const,
            })
        };
        match e {
            Expr::Num(_) => Ok(ESort::Const),
            Expr::Bool(_) => Ok(ESort::Bool),
            Expr::Var(v) => match self.p.sort_of(v) {
                Some(VarSort::Bool) => Ok(ESort::Bool),
                Some(VarSort::Dom) => Ok(ESort::Dom),
                Some(VarSort::Int) => Ok(ESort::Int),
                Some(VarSort::Real) => Ok(ESort::Real),
                None => Err(format!("unknown variable {v}")),
            },
            Expr::Neg(a) => {
                let s = self.esort(a)?;
                if !s.numeric() {
                    return Err("arithmetic on a Boolean".into());
                }
                Ok(s)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                let (x, y) = (self.esort(a)?, self.esort(b)?);
                if !x.numeric() || !y.numeric() {
                    return Err("arithmetic on a Boolean".into());
                }
                if matches!(e, Expr::Mul(..)) && x.noisy() && y.noisy() {
                    return Err("non-linear product of noisy values".into());
                }
                join(x, y)
            }
            Expr::Cmp(_, a, b) => {
                let (x, y) = (self.esort(a)?, self.esort(b)?);
                if !x.numeric() || !y.numeric() {
                    return Err("comparison of Boolean values".into());
                }
                if (x == ESort::Real && y == ESort::Int) || (x == ESort::Int && y == ESort::Real) {
                    return Err("mixed-sort comparison".into());
                }
                Ok(ESort::Bool)
            }
            Expr::Not(a) => {
                if self.esort(a)? != ESort::Bool {
                    return Err("`not` of a non-Boolean".into());
                }
                Ok(ESort::Bool)
            }
            Expr::And(a, b) | Expr::Or(a, b) => {
                if self.esort(a)? != ESort::Bool || self.esort(b)? != ESort::Bool {
                    return Err("Boolean operator on a non-Boolean".into());
                }
                Ok(ESort::Bool)
            }
        }
    }

    /// Comparisons of noisy values must be the entire right-hand side of a
    /// Boolean assignment, never nested in a condition.
    fn nested_noise_cmp(&self, e: &Expr) -> bool {
        match e {
            Expr::Cmp(_, a, b) => {
                self.esort(a).map(|s| s.noisy()).unwrap_or(false) || self.esort(b).map(|s| s.noisy()).unwrap_or(false)
            }
            Expr::Not(a) => self.nested_noise_cmp(a),
            Expr::And(a, b) | Expr::Or(a, b) => self.nested_noise_cmp(a) || self.nested_noise_cmp(b),
            _ => false,
        }
    }

    /// Integer-sort arithmetic must keep integer coefficients.
    fn fractional_literal(e: &Expr) -> bool {
        match e {
            Expr::Num(q) => !q.is_integer(),
            Expr::Var(_) | Expr::Bool(_) => false,
            Expr::Neg(a) | Expr::Not(a) => Self::fractional_literal(a),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Cmp(_, a, b) | Expr::And(a, b) | Expr::Or(a, b) => {
                Self::fractional_literal(a) || Self::fractional_literal(b)
            }
        }
    }

    fn expect_dom(&mut self, s: &Stmt, e: &Expr, what: &str) {
        match self.esort(e) {
            Ok(ESort::Dom | ESort::Const) => {}
            Ok(other) => self.diag(s, format!("{what} must be a DOM expression, found {other:?}")),
            Err(m) => self.diag(s, m),
        }
    }

    fn sorts(&mut self, s: &Stmt, in_loop: bool) {
        let sort = |v: &str| self.p.sort_of(v);
        match &s.kind {
            StmtKind::Assign { target, expr } => {
                let ts = sort(target);
                if in_loop && matches!(ts, Some(VarSort::Real | VarSort::Int)) {
                    self.diag(s, "real or integer assignment in loop scope");
                }
                match (ts, self.esort(expr)) {
                    (_, Err(m)) => self.diag(s, m),
                    (None, _) => self.diag(s, format!("unknown variable {target}")),
                    (Some(VarSort::Bool), Ok(ESort::Bool)) => {
                        let top_noise = matches!(expr, Expr::Cmp(..)) && self.nested_noise_cmp(expr);
                        let inner = match expr {
                            Expr::Cmp(..) => false,
                            e => self.nested_noise_cmp(e),
                        };
                        if inner {
                            self.diag(s, "comparison of noisy values must be assigned on its own");
                        }
                        if top_noise {
                            if let Expr::Cmp(_, a, b) = expr {
                                let int = self.esort(a).ok() == Some(ESort::Int) || self.esort(b).ok() == Some(ESort::Int);
                                if int && Self::fractional_literal(expr) {
                                    self.diag(s, "non-integer coefficient in an integer comparison");
                                }
                            }
                        }
                    }
                    (Some(VarSort::Dom), Ok(ESort::Dom | ESort::Const)) => {}
                    (Some(VarSort::Real), Ok(ESort::Real | ESort::Dom | ESort::Const)) => {}
                    (Some(VarSort::Int), Ok(ESort::Int | ESort::Dom | ESort::Const)) => {
                        if Self::fractional_literal(expr) {
                            self.diag(s, "non-integer coefficient in an integer expression");
                        }
                    }
                    (Some(t), Ok(e)) => self.diag(s, format!("cannot assign a {e:?} expression to {t} variable {target}")),
                }
            }
            StmtKind::Lap { target, mean, scale } | StmtKind::DLap { target, mean, scale } => {
                let want = if matches!(s.kind, StmtKind::Lap { .. }) { VarSort::Real } else { VarSort::Int };
                if in_loop {
                    self.diag(s, "sampling in loop scope");
                }
                if sort(target) != Some(want) {
                    self.diag(s, format!("{target} must be a {want} variable"));
                }
                if *scale <= num_traits::Zero::zero() {
                    self.diag(s, "scale must be positive");
                }
                self.expect_dom(s, mean, "mean");
            }
            StmtKind::ExpMech { target, score, args, scale } => {
                if sort(target) != Some(VarSort::Dom) {
                    self.diag(s, format!("{target} must be a DOM variable"));
                }
                if *scale <= num_traits::Zero::zero() {
                    self.diag(s, "scale must be positive");
                }
                match self.p.score_tables.get(score) {
                    None => self.diag(s, format!("unknown score table {score}")),
                    Some(t) if t.arity != args.len() => {
                        self.diag(s, format!("{score} takes {} arguments, given {}", t.arity, args.len()))
                    }
                    _ => {}
                }
                for a in args {
                    self.expect_dom(s, a, "argument");
                }
            }
            StmtKind::Choose { target, dist, args, scale } => {
                if sort(target) != Some(VarSort::Dom) {
                    self.diag(s, format!("{target} must be a DOM variable"));
                }
                if *scale <= num_traits::Zero::zero() {
                    self.diag(s, "scale must be positive");
                }
                match self.p.choose_defs.get(dist) {
                    None => self.diag(s, format!("unknown distribution {dist}")),
                    Some(d) if d.arity != args.len() => {
                        self.diag(s, format!("{dist} takes {} arguments, given {}", d.arity, args.len()))
                    }
                    _ => {}
                }
                for a in args {
                    self.expect_dom(s, a, "argument");
                }
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                self.condition(s, cond);
                for t in then_branch.iter().chain(else_branch) {
                    self.sorts(t, in_loop);
                }
            }
            StmtKind::While { cond, body } => {
                self.condition(s, cond);
                for t in body {
                    self.sorts(t, true);
                }
            }
            StmtKind::Exit => {}
        }
    }

    fn condition(&mut self, s: &Stmt, cond: &Expr) {
        match self.esort(cond) {
            Ok(ESort::Bool) => {
                if self.nested_noise_cmp(cond) {
                    self.diag(s, "comparison of noisy values must be assigned to a Boolean variable first");
                }
            }
            Ok(other) => self.diag(s, format!("condition must be Boolean, found {other:?}")),
            Err(m) => self.diag(s, m),
        }
    }

    /// Definition-before-use and single assignment along every path.
    /// `defined` holds variables defined on every path to this point,
    /// `assigned` the real/integer variables assigned on some path.
    fn flow(&mut self, stmts: &[Stmt], defined: &mut BTreeSet<String>, assigned: &mut BTreeSet<String>) -> bool {
        for s in stmts {
            let mut reads = Vec::new();
            match &s.kind {
                StmtKind::Assign { expr, .. } => expr.vars(&mut reads),
                StmtKind::Lap { mean, .. } | StmtKind::DLap { mean, .. } => mean.vars(&mut reads),
                StmtKind::ExpMech { args, .. } | StmtKind::Choose { args, .. } => args.iter().for_each(|a| a.vars(&mut reads)),
                StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => cond.vars(&mut reads),
                StmtKind::Exit => {}
            }
            reads.sort();
            reads.dedup();
            for r in reads {
                if !defined.contains(&r) {
                    self.diag(s, format!("{r} may be used before it is assigned"));
                }
            }
            match &s.kind {
                StmtKind::If { then_branch, else_branch, .. } => {
                    let (mut d1, mut d2) = (defined.clone(), defined.clone());
                    let (mut a1, mut a2) = (assigned.clone(), assigned.clone());
                    let t1 = self.flow(then_branch, &mut d1, &mut a1);
                    let t2 = self.flow(else_branch, &mut d2, &mut a2);
                    assigned.extend(a1);
                    assigned.extend(a2);
                    *defined = match (t1, t2) {
                        (true, true) => return true,
                        (true, false) => d2,
                        (false, true) => d1,
                        (false, false) => d1.intersection(&d2).cloned().collect(),
                    };
                }
                StmtKind::While { body, .. } => {
                    let mut inner = defined.clone();
                    let mut scratch = BTreeSet::new();
                    self.flow(body, &mut inner, &mut scratch);
                }
                StmtKind::Exit => {
                    for o in &self.p.outputs {
                        if !defined.contains(o) {
                            self.diag(s, format!("output {o} may be uninitialized at exit"));
                        }
                    }
                    return true;
                }
                _ => {
                    let t = s.target().expect("assignment").to_string();
                    let numeric = matches!(self.p.sort_of(&t), Some(VarSort::Real | VarSort::Int));
                    if numeric && !assigned.insert(t.clone()) {
                        self.diag(s, format!("{t} is assigned more than once on a path"));
                    }
                    defined.insert(t);
                }
            }
        }
        false
    }
}
