//! Typed syntax of desugared programs.

use std::collections::BTreeMap;
use std::fmt;

use dip_symalg::{PseudoRational, Q};

/// Sort of a program variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarSort {
    Bool,
    Dom,
    Int,
    Real,
}

impl VarSort {
    pub fn keyword(self) -> &'static str {
        match self {
            VarSort::Bool => "bool",
            VarSort::Dom => "dom",
            VarSort::Int => "int",
            VarSort::Real => "real",
        }
    }
}

impl fmt::Display for VarSort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Comparison operator, shared by DOM tests and noise comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    /// Name of the built-in Boolean function with this meaning.
    pub fn builtin(self) -> &'static str {
        match self {
            CmpOp::Lt => "LT",
            CmpOp::Le => "LE",
            CmpOp::Eq => "EQ",
            CmpOp::Ne => "NEQ",
            CmpOp::Ge => "GE",
            CmpOp::Gt => "GT",
        }
    }

    pub fn from_builtin(name: &str) -> Option<CmpOp> {
        Some(match name {
            "LT" => CmpOp::Lt,
            "LE" => CmpOp::Le,
            "EQ" => CmpOp::Eq,
            "NEQ" => CmpOp::Ne,
            "GE" => CmpOp::Ge,
            "GT" => CmpOp::Gt,
            _ => return None,
        })
    }

    pub fn holds<T: Ord>(self, a: &T, b: &T) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Le,
        }
    }
}

/// Expressions of every sort. Which sort an expression has follows from
/// the sorts of the variables it mentions (see [`crate::check`]).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    /// Rational literal; DOM-valued in DOM contexts.
    Num(Q),
    Bool(bool),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    /// Products where at most one factor mentions real or integer
    /// variables; division by a constant is folded into a rational factor.
    Mul(Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn num(q: Q) -> Expr {
        Expr::Num(q)
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Expr {
        Expr::Cmp(op, Box::new(a), Box::new(b))
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::And(Box::new(a), Box::new(b))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    /// Names of all variables read by the expression.
    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Num(_) | Expr::Bool(_) => {}
            Expr::Var(v) => out.push(v.clone()),
            Expr::Neg(a) | Expr::Not(a) => a.vars(out),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Cmp(_, a, b)
            | Expr::And(a, b)
            | Expr::Or(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    /// Rename variables in place.
    pub fn rename(&mut self, f: &dyn Fn(&str) -> Option<String>) {
        match self {
            Expr::Num(_) | Expr::Bool(_) => {}
            Expr::Var(v) => {
                if let Some(n) = f(v) {
                    *v = n;
                }
            }
            Expr::Neg(a) | Expr::Not(a) => a.rename(f),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Cmp(_, a, b)
            | Expr::And(a, b)
            | Expr::Or(a, b) => {
                a.rename(f);
                b.rename(f);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    /// `x <- e`; the sort of the assignment is the sort of `x`.
    Assign { target: String, expr: Expr },
    /// `r <- Lap(a·eps, mean)`.
    Lap { target: String, scale: Q, mean: Expr },
    /// `z <- DLap(a·eps, mean)`.
    DLap { target: String, scale: Q, mean: Expr },
    /// `x <- expmech(F, a·eps, args…)`.
    ExpMech { target: String, scale: Q, score: String, args: Vec<Expr> },
    /// `x <- choose(D, a·eps, args…)`.
    Choose { target: String, scale: Q, dist: String, args: Vec<Expr> },
    If { cond: Expr, then_branch: Vec<Stmt>, else_branch: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    Exit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub label: String,
    pub kind: StmtKind,
}

impl Stmt {
    /// The variable written by the statement, if any.
    pub fn target(&self) -> Option<&str> {
        match &self.kind {
            StmtKind::Assign { target, .. }
            | StmtKind::Lap { target, .. }
            | StmtKind::DLap { target, .. }
            | StmtKind::ExpMech { target, .. }
            | StmtKind::Choose { target, .. } => Some(target),
            _ => None,
        }
    }

    /// Visit this statement and every nested one in program order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::If { then_branch, else_branch, .. } => {
                for s in then_branch.iter().chain(else_branch) {
                    s.walk(f);
                }
            }
            StmtKind::While { body, .. } => {
                for s in body {
                    s.walk(f);
                }
            }
            _ => {}
        }
    }
}

/// Finite integer range `lo..=hi` of DOM values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dom {
    pub lo: i64,
    pub hi: i64,
}

impl Dom {
    pub fn contains(&self, v: i64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn values(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    /// Nearest DOM value (DOM arithmetic saturates at the range ends).
    pub fn clamp(&self, v: i64) -> i64 {
        v.clamp(self.lo, self.hi)
    }
}

/// Rational scores `F(args, v)` for the exponential mechanism.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScoreTable {
    pub arity: usize,
    pub entries: BTreeMap<(Vec<i64>, i64), Q>,
}

/// A user-defined finite distribution: for each argument tuple, a pmf over
/// DOM values given by pseudo-rational functions of ε. Missing entries are 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChooseDef {
    pub arity: usize,
    pub pmf: BTreeMap<(Vec<i64>, i64), PseudoRational>,
}

impl ChooseDef {
    /// The pmf at one argument tuple, listing only nonzero entries.
    pub fn row(&self, args: &[i64]) -> Vec<(i64, &PseudoRational)> {
        self.pmf.iter().filter(|((a, _), p)| a == args && !p.is_zero()).map(|((_, v), p)| (*v, p)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub dom: Dom,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// Sort of every variable, inputs and outputs (DOM) included.
    pub vars: BTreeMap<String, VarSort>,
    pub score_tables: BTreeMap<String, ScoreTable>,
    pub choose_defs: BTreeMap<String, ChooseDef>,
    pub body: Vec<Stmt>,
}

impl Program {
    pub fn sort_of(&self, v: &str) -> Option<VarSort> {
        self.vars.get(v).copied()
    }

    /// All statements, nested ones included, in program order.
    pub fn statements(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        for s in &self.body {
            s.walk(&mut |s| out.push(s));
        }
        out
    }

    /// Look up a statement by label.
    pub fn stmt(&self, label: &str) -> Option<&Stmt> {
        self.statements().into_iter().find(|s| s.label == label)
    }
}
