//! From surface items to a desugared [`Program`]: constants and `for`
//! loops are expanded, indexed names are flattened (`q[2]` → `q2`),
//! sugar is rewritten into core statements, real and integer variables
//! are renamed to single-assignment form, and unlabeled statements get
//! fresh labels.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use dip_symalg::Q;
use num_traits::{One, Signed, Zero};

use crate::ast::{ChooseDef, CmpOp, Dom, Expr, Program, ScoreTable, Stmt, StmtKind, VarSort};
use crate::parser::{Bound, DeclName, Index, Item, Name, Pos, Rhs, Row, SExpr, SKind, SStmt};
use crate::FrontendError;

/// Domain used when a program does not declare one.
pub const DEFAULT_DOM: Dom = Dom { lo: 0, hi: 1 };

pub(crate) fn build(items: Vec<Item>, overrides: &BTreeMap<String, i64>) -> Result<Program, FrontendError> {
    let mut lw = Lower {
        consts: HashMap::new(),
        sorts: BTreeMap::new(),
        loopvars: Vec::new(),
        suffix: Vec::new(),
        tables: HashSet::new(),
        dists: HashSet::new(),
        dom: DEFAULT_DOM,
    };
    // constants first: they may be used anywhere
    for it in &items {
        if let Item::Const { name, value, pos } = it {
            let v = overrides.get(name).copied().unwrap_or(*value);
            if lw.consts.insert(name.clone(), v).is_some() {
                return Err(syntax(pos, format!("constant {name} defined twice")));
            }
        }
    }
    let mut dom = None;
    let (mut inputs, mut outputs) = (Vec::new(), Vec::new());
    let mut score_tables = BTreeMap::new();
    let mut choose_defs = BTreeMap::new();
    for it in &items {
        match it {
            Item::Domain { lo, hi, pos } => {
                let (lo, hi) = (lw.bound(lo)?, lw.bound(hi)?);
                if lo > hi || dom.is_some() {
                    return Err(syntax(pos, "empty or repeated domain declaration"));
                }
                dom = Some(Dom { lo, hi });
            }
            Item::Input(names) => {
                for n in lw.decl_names(names)? {
                    lw.declare(&n, VarSort::Dom, &names[0].pos)?;
                    inputs.push(n);
                }
            }
            Item::Output(names) => {
                for n in lw.decl_names(names)? {
                    lw.declare(&n, VarSort::Dom, &names[0].pos)?;
                    outputs.push(n);
                }
            }
            Item::Decl(sort, names) => {
                for n in lw.decl_names(names)? {
                    lw.declare(&n, *sort, &names[0].pos)?;
                }
            }
            Item::Score { name, .. } => {
                lw.tables.insert(name.clone());
            }
            Item::Choose { name, .. } => {
                lw.dists.insert(name.clone());
            }
            Item::Const { .. } | Item::Stmt(_) => {}
        }
    }
    for it in &items {
        match it {
            Item::Score { name, arity, rows, pos } => {
                let entries = lw.table(*arity, rows)?;
                if score_tables.insert(name.clone(), ScoreTable { arity: *arity, entries }).is_some() {
                    return Err(syntax(pos, format!("score table {name} defined twice")));
                }
            }
            Item::Choose { name, arity, rows, pos } => {
                let pmf = lw.table(*arity, rows)?;
                if choose_defs.insert(name.clone(), ChooseDef { arity: *arity, pmf }).is_some() {
                    return Err(syntax(pos, format!("distribution {name} defined twice")));
                }
            }
            _ => {}
        }
    }
    let dom = dom.unwrap_or(DEFAULT_DOM);
    lw.dom = dom;
    let mut body = Vec::new();
    for it in items {
        if let Item::Stmt(s) = it {
            body.extend(lw.stmt(s)?);
        }
    }
    let mut ssa = Ssa { sorts: &mut lw.sorts, next: HashMap::new() };
    let mut env = Env::default();
    let (mut body, terminates) = ssa.block(body, &mut env, false);
    if !terminates {
        body.push(Stmt { label: String::new(), kind: StmtKind::Exit });
    }
    fill_labels(&mut body);
    Ok(Program {
        dom,
        inputs,
        outputs,
        vars: lw.sorts,
        score_tables,
        choose_defs,
        body,
    })
}

fn syntax(pos: &Pos, msg: impl Into<String>) -> FrontendError {
    FrontendError::Syntax { line: pos.line, col: pos.col, msg: msg.into() }
}

fn non_rational(pos: &Pos, msg: impl Into<String>) -> FrontendError {
    FrontendError::NonRational { line: pos.line, col: pos.col, msg: msg.into() }
}

struct Lower {
    consts: HashMap<String, i64>,
    sorts: BTreeMap<String, VarSort>,
    loopvars: Vec<(String, i64)>,
    /// Iteration values of the enclosing `for` loops, appended to labels.
    suffix: Vec<i64>,
    dom: Dom,
    tables: HashSet<String>,
    dists: HashSet<String>,
}

impl Lower {
    fn lookup_int(&self, name: &str) -> Option<i64> {
        self.loopvars.iter().rev().find(|(n, _)| n == name).map(|(_, v)| *v).or_else(|| self.consts.get(name).copied())
    }

    fn bound(&self, b: &Bound) -> Result<i64, FrontendError> {
        match b {
            Bound::Lit(v) => Ok(*v),
            Bound::Const(n, pos) => self
                .lookup_int(n)
                .ok_or_else(|| FrontendError::UnknownIdent { name: n.clone(), line: pos.line, col: pos.col }),
        }
    }

    fn decl_names(&self, names: &[DeclName]) -> Result<Vec<String>, FrontendError> {
        let mut out = Vec::new();
        for d in names {
            match &d.range {
                None => out.push(d.base.clone()),
                Some((lo, hi)) => {
                    for i in self.bound(lo)?..=self.bound(hi)? {
                        out.push(format!("{}{i}", d.base));
                    }
                }
            }
        }
        Ok(out)
    }

    fn declare(&mut self, name: &str, sort: VarSort, pos: &Pos) -> Result<(), FrontendError> {
        if name == "eps" {
            return Err(syntax(pos, "`eps` is reserved for the privacy parameter"));
        }
        match self.sorts.insert(name.to_string(), sort) {
            Some(old) if old != sort => Err(syntax(pos, format!("{name} declared as both {old} and {sort}"))),
            _ => Ok(()),
        }
    }

    fn table<T: Clone>(&self, arity: usize, rows: &[Row<T>]) -> Result<BTreeMap<(Vec<i64>, i64), T>, FrontendError> {
        let mut out = BTreeMap::new();
        for r in rows {
            if r.args.len() != arity {
                return Err(syntax(&r.pos, format!("row has {} arguments, table arity is {arity}", r.args.len())));
            }
            let args = r.args.iter().map(|b| self.bound(b)).collect::<Result<Vec<_>, _>>()?;
            for (v, val) in &r.entries {
                if out.insert((args.clone(), self.bound(v)?), val.clone()).is_some() {
                    return Err(syntax(&r.pos, "repeated table entry"));
                }
            }
        }
        Ok(out)
    }

    fn name(&self, n: &Name) -> Result<String, FrontendError> {
        Ok(match &n.index {
            None => n.base.clone(),
            Some(Index::Lit(i)) => format!("{}{i}", n.base),
            Some(Index::Name(v, off)) => {
                let i = self
                    .lookup_int(v)
                    .ok_or_else(|| FrontendError::UnknownIdent { name: v.clone(), line: n.pos.line, col: n.pos.col })?;
                format!("{}{}", n.base, i + off)
            }
        })
    }

    fn fresh(&mut self, stem: &str, sort: VarSort) -> String {
        let mut k = 1;
        loop {
            let n = format!("_{stem}{k}");
            if !self.sorts.contains_key(&n) {
                self.sorts.insert(n.clone(), sort);
                return n;
            }
            k += 1;
        }
    }

    fn label(&self, l: &Option<String>) -> String {
        match l {
            None => String::new(),
            Some(l) => {
                let mut s = l.clone();
                for i in &self.suffix {
                    s.push_str(&format!("_{i}"));
                }
                s
            }
        }
    }

    fn expr(&self, e: &SExpr) -> Result<Expr, FrontendError> {
        let b = |x: &SExpr| self.expr(x).map(Box::new);
        Ok(match e {
            SExpr::Num(q) => Expr::Num(q.clone()),
            SExpr::Bool(v) => Expr::Bool(*v),
            SExpr::Var(n) => {
                if n.index.is_none() {
                    if let Some(v) = self.lookup_int(&n.base) {
                        return Ok(Expr::Num(Q::from_integer(v.into())));
                    }
                    if n.base == "eps" {
                        return Err(non_rational(&n.pos, "`eps` may only appear in a noise scale"));
                    }
                }
                let name = self.name(n)?;
                if !self.sorts.contains_key(&name) {
                    return Err(FrontendError::UnknownIdent { name, line: n.pos.line, col: n.pos.col });
                }
                Expr::Var(name)
            }
            SExpr::Neg(a) => match self.expr(a)? {
                Expr::Num(q) => Expr::Num(-q),
                x => Expr::Neg(Box::new(x)),
            },
            SExpr::Add(x, y) => Expr::Add(b(x)?, b(y)?),
            SExpr::Sub(x, y) => Expr::Sub(b(x)?, b(y)?),
            SExpr::Mul(x, y) => Expr::Mul(b(x)?, b(y)?),
            SExpr::Div(x, y, pos) => {
                let d = match self.expr(y)? {
                    Expr::Num(d) if !d.is_zero() => d,
                    Expr::Num(_) => return Err(non_rational(pos, "division by zero")),
                    _ => return Err(non_rational(pos, "division by a non-constant expression")),
                };
                match self.expr(x)? {
                    Expr::Num(n) => Expr::Num(n / d),
                    x => Expr::Mul(Box::new(x), Box::new(Expr::Num(Q::one() / d))),
                }
            }
            SExpr::Cmp(op, x, y) => Expr::Cmp(*op, b(x)?, b(y)?),
            SExpr::Not(x) => Expr::Not(b(x)?),
            SExpr::And(x, y) => Expr::And(b(x)?, b(y)?),
            SExpr::Or(x, y) => Expr::Or(b(x)?, b(y)?),
            SExpr::Max(_, pos) => return Err(syntax(pos, "max(…) is only allowed as the argument of disc")),
        })
    }

    /// `c` from a scale expression equal to `c·eps` with `c > 0`.
    fn scale(&self, e: &SExpr) -> Result<Q, FrontendError> {
        let (c0, c1) = self.affine_eps(e)?;
        let pos = first_pos(e);
        if !c0.is_zero() || !c1.is_positive() {
            return Err(non_rational(&pos, "noise scale must be a positive rational multiple of eps"));
        }
        Ok(c1)
    }

    /// `(c0, c1)` with `e = c0 + c1·eps`.
    fn affine_eps(&self, e: &SExpr) -> Result<(Q, Q), FrontendError> {
        let bad = |msg: &str| Err(non_rational(&first_pos(e), msg));
        match e {
            SExpr::Num(q) => Ok((q.clone(), Q::zero())),
            SExpr::Var(n) if n.index.is_none() && n.base == "eps" => Ok((Q::zero(), Q::one())),
            SExpr::Var(n) if n.index.is_none() && self.lookup_int(&n.base).is_some() => {
                Ok((Q::from_integer(self.lookup_int(&n.base).expect("checked").into()), Q::zero()))
            }
            SExpr::Neg(a) => {
                let (x, y) = self.affine_eps(a)?;
                Ok((-x, -y))
            }
            SExpr::Add(a, b) | SExpr::Sub(a, b) => {
                let (x0, x1) = self.affine_eps(a)?;
                let (y0, y1) = self.affine_eps(b)?;
                Ok(if matches!(e, SExpr::Add(..)) { (x0 + y0, x1 + y1) } else { (x0 - y0, x1 - y1) })
            }
            SExpr::Mul(a, b) => {
                let (x0, x1) = self.affine_eps(a)?;
                let (y0, y1) = self.affine_eps(b)?;
                if !x1.is_zero() && !y1.is_zero() {
                    return bad("noise scale must be linear in eps");
                }
                Ok((&x0 * &y0, &x0 * &y1 + &x1 * &y0))
            }
            SExpr::Div(a, b, _) => {
                let (x0, x1) = self.affine_eps(a)?;
                let (y0, y1) = self.affine_eps(b)?;
                if !y1.is_zero() || y0.is_zero() {
                    return bad("noise scale must be a rational multiple of eps (no division by eps)");
                }
                Ok((x0 / &y0, x1 / &y0))
            }
            _ => bad("noise scale must be a rational multiple of eps"),
        }
    }

    fn expr_sort(&self, e: &Expr) -> Option<VarSort> {
        sort_join(&self.sorts, e)
    }

    /// Replace comparisons of noisy values nested in `e` by fresh Boolean
    /// variables assigned just before.
    fn hoist(&mut self, e: Expr, pre: &mut Vec<Stmt>) -> Expr {
        match e {
            Expr::Cmp(op, a, b) => {
                let s = match (self.expr_sort(&a), self.expr_sort(&b)) {
                    (Some(VarSort::Real | VarSort::Int), _) | (_, Some(VarSort::Real | VarSort::Int)) => true,
                    _ => false,
                };
                if s {
                    let c = self.fresh("c", VarSort::Bool);
                    pre.push(plain(StmtKind::Assign { target: c.clone(), expr: Expr::Cmp(op, a, b) }));
                    Expr::Var(c)
                } else {
                    Expr::Cmp(op, a, b)
                }
            }
            Expr::Not(a) => Expr::Not(Box::new(self.hoist(*a, pre))),
            Expr::And(a, b) => {
                let a = self.hoist(*a, pre);
                Expr::And(Box::new(a), Box::new(self.hoist(*b, pre)))
            }
            Expr::Or(a, b) => {
                let a = self.hoist(*a, pre);
                Expr::Or(Box::new(a), Box::new(self.hoist(*b, pre)))
            }
            other => other,
        }
    }

    fn target(&mut self, n: &Name, sort: VarSort) -> Result<String, FrontendError> {
        let name = self.name(n)?;
        if n.index.is_none() && self.lookup_int(&name).is_some() {
            return Err(syntax(&n.pos, format!("cannot assign to constant {name}")));
        }
        if name == "eps" {
            return Err(syntax(&n.pos, "`eps` is reserved for the privacy parameter"));
        }
        self.sorts.entry(name.clone()).or_insert(sort);
        Ok(name)
    }

    fn block(&mut self, stmts: Vec<SStmt>) -> Result<Vec<Stmt>, FrontendError> {
        let mut out = Vec::new();
        for s in stmts {
            out.extend(self.stmt(s)?);
        }
        Ok(out)
    }

    fn stmt(&mut self, s: SStmt) -> Result<Vec<Stmt>, FrontendError> {
        let label = self.label(&s.label);
        let mut out = match s.kind {
            SKind::Exit => vec![plain(StmtKind::Exit)],
            SKind::If { cond, then_branch, else_branch } => {
                let mut pre = Vec::new();
                let cond = self.expr(&cond)?;
                let cond = self.hoist(cond, &mut pre);
                let then_branch = self.block(then_branch)?;
                let else_branch = self.block(else_branch)?;
                pre.push(plain(StmtKind::If { cond, then_branch, else_branch }));
                pre
            }
            SKind::While { cond, body } => {
                let mut pre = Vec::new();
                let cond = self.expr(&cond)?;
                let cond = self.hoist(cond, &mut pre);
                let mut body = self.block(body)?;
                body.extend(pre.iter().cloned());
                pre.push(plain(StmtKind::While { cond, body }));
                pre
            }
            SKind::For { var, lo, hi, body } => {
                let (lo, hi) = (self.bound(&lo)?, self.bound(&hi)?);
                let mut out = Vec::new();
                for i in lo..=hi {
                    self.loopvars.push((var.clone(), i));
                    self.suffix.push(i);
                    let r = self.block(body.clone());
                    self.loopvars.pop();
                    self.suffix.pop();
                    out.extend(r?);
                }
                out
            }
            SKind::Assign { target, rhs } => self.assign(&target, rhs, &s.pos)?,
        };
        if let Some(first) = out.first_mut() {
            if !label.is_empty() {
                first.label = label;
            }
        }
        Ok(out)
    }

    fn assign(&mut self, target: &Name, rhs: Rhs, pos: &Pos) -> Result<Vec<Stmt>, FrontendError> {
        let mut out = Vec::new();
        match rhs {
            Rhs::Expr(e) => {
                let e = self.expr(&e)?;
                let sort = self.expr_sort(&e).unwrap_or(VarSort::Dom);
                let t = self.target(target, sort)?;
                let e = match (self.sorts[&t], e) {
                    (VarSort::Bool, c @ Expr::Cmp(..)) => c,
                    (_, e) => self.hoist(e, &mut out),
                };
                out.push(plain(StmtKind::Assign { target: t, expr: e }));
            }
            Rhs::Lap { scale, mean } => {
                let (scale, mean) = (self.scale(&scale)?, self.expr(&mean)?);
                let t = self.target(target, VarSort::Real)?;
                out.push(plain(StmtKind::Lap { target: t, scale, mean }));
            }
            Rhs::DLap { scale, mean } => {
                let (scale, mean) = (self.scale(&scale)?, self.expr(&mean)?);
                let t = self.target(target, VarSort::Int)?;
                out.push(plain(StmtKind::DLap { target: t, scale, mean }));
            }
            Rhs::LapPos { scale, mean } => {
                // |X| + mean with X ~ Lap(a·eps, 0) has density a·eps·e^{−a·eps·(x − mean)} on [mean, ∞)
                let (scale, mean) = (self.scale(&scale)?, self.expr(&mean)?);
                let t = self.target(target, VarSort::Real)?;
                let x = self.fresh("x", VarSort::Real);
                let c = self.fresh("c", VarSort::Bool);
                let zero = Expr::Num(Q::zero());
                out.push(plain(StmtKind::Lap { target: x.clone(), scale, mean: zero.clone() }));
                out.push(plain(StmtKind::Assign { target: c.clone(), expr: Expr::cmp(CmpOp::Le, Expr::var(&x), zero) }));
                let neg = Expr::add(Expr::Neg(Box::new(Expr::var(&x))), mean.clone());
                let pos = Expr::add(Expr::var(&x), mean);
                out.push(plain(StmtKind::If {
                    cond: Expr::var(&c),
                    then_branch: vec![plain(StmtKind::Assign { target: t.clone(), expr: neg })],
                    else_branch: vec![plain(StmtKind::Assign { target: t, expr: pos })],
                }));
            }
            Rhs::ExpMech { name, scale, args } | Rhs::Choose { name, scale, args } => {
                let is_exp = self.tables.contains(&name.base);
                let known = if is_exp { true } else { self.dists.contains(&name.base) };
                if !known || name.index.is_some() {
                    return Err(FrontendError::UnknownIdent { name: name.base, line: name.pos.line, col: name.pos.col });
                }
                let scale = self.scale(&scale)?;
                let args = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
                let t = self.target(target, VarSort::Dom)?;
                out.push(plain(if is_exp {
                    StmtKind::ExpMech { target: t, scale, score: name.base, args }
                } else {
                    StmtKind::Choose { target: t, scale, dist: name.base, args }
                }));
            }
            Rhs::Disc { arg, seq } => {
                let mut cuts = Vec::new();
                for e in &seq {
                    match self.expr(e)? {
                        Expr::Num(q) if q.is_integer() => cuts.push(q),
                        _ => return Err(non_rational(pos, "disc points must be integer constants")),
                    }
                }
                if cuts.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(syntax(pos, "disc points must be strictly increasing"));
                }
                let args = match &arg {
                    SExpr::Max(xs, _) => xs.iter().map(|x| self.expr(x)).collect::<Result<Vec<_>, _>>()?,
                    a => vec![self.expr(a)?],
                };
                let t = self.target(target, VarSort::Dom)?;
                out.extend(self.disc_chain(&t, &args, &cuts));
            }
            Rhs::Argmax { args } => {
                // the k-th argument (from 0) is reported as the k-th DOM value
                if args.len() > self.dom.len() {
                    return Err(syntax(pos, format!("argmax of {} values needs a domain with as many values", args.len())));
                }
                let args = args.iter().map(|x| self.expr(x)).collect::<Result<Vec<_>, _>>()?;
                let lo = self.dom.lo;
                let index = |k: usize| Expr::Num(Q::from_integer((lo + k as i64).into()));
                let t = self.target(target, VarSort::Dom)?;
                let sort = args.iter().filter_map(|a| self.expr_sort(a)).max_by_key(|s| match s {
                    VarSort::Real => 3,
                    VarSort::Int => 2,
                    _ => 1,
                });
                let sort = sort.unwrap_or(VarSort::Dom);
                out.push(plain(StmtKind::Assign { target: t.clone(), expr: index(0) }));
                let mut best = args[0].clone();
                for (k, a) in args.iter().enumerate().skip(1) {
                    let c = self.fresh("c", VarSort::Bool);
                    out.push(plain(StmtKind::Assign { target: c.clone(), expr: Expr::cmp(CmpOp::Gt, a.clone(), best.clone()) }));
                    let mut then_branch = vec![plain(StmtKind::Assign { target: t.clone(), expr: index(k) })];
                    let mut else_branch = Vec::new();
                    if k + 1 < args.len() {
                        let m = self.fresh("m", sort);
                        then_branch.push(plain(StmtKind::Assign { target: m.clone(), expr: a.clone() }));
                        else_branch.push(plain(StmtKind::Assign { target: m.clone(), expr: best.clone() }));
                        best = Expr::var(&m);
                    }
                    out.push(plain(StmtKind::If { cond: Expr::var(&c), then_branch, else_branch }));
                }
            }
        }
        Ok(out)
    }

    /// `target` gets `cuts[i]` for the first `i` with `max(args) ≤ cuts[i]`,
    /// and the last point when there is none.
    fn disc_chain(&mut self, target: &str, args: &[Expr], cuts: &[Q]) -> Vec<Stmt> {
        let value = |q: &Q| plain(StmtKind::Assign { target: target.to_string(), expr: Expr::Num(q.clone()) });
        if cuts.len() == 1 {
            return vec![value(&cuts[0])];
        }
        let mut out = Vec::new();
        let mut cond: Option<Expr> = None;
        for a in args {
            let c = self.fresh("c", VarSort::Bool);
            out.push(plain(StmtKind::Assign { target: c.clone(), expr: Expr::cmp(CmpOp::Le, a.clone(), Expr::Num(cuts[0].clone())) }));
            cond = Some(match cond {
                None => Expr::var(&c),
                Some(p) => Expr::and(p, Expr::var(&c)),
            });
        }
        let rest = self.disc_chain(target, args, &cuts[1..]);
        out.push(plain(StmtKind::If { cond: cond.expect("at least one argument"), then_branch: vec![value(&cuts[0])], else_branch: rest }));
        out
    }
}

fn plain(kind: StmtKind) -> Stmt {
    Stmt { label: String::new(), kind }
}

fn first_pos(e: &SExpr) -> Pos {
    match e {
        SExpr::Var(n) => n.pos.clone(),
        SExpr::Div(_, _, p) | SExpr::Max(_, p) => p.clone(),
        SExpr::Neg(a) | SExpr::Not(a) => first_pos(a),
        SExpr::Add(a, _) | SExpr::Sub(a, _) | SExpr::Mul(a, _) | SExpr::Cmp(_, a, _) | SExpr::And(a, _) | SExpr::Or(a, _) => {
            first_pos(a)
        }
        SExpr::Num(_) | SExpr::Bool(_) => Pos { line: 0, col: 0 },
    }
}

/// Sort an expression takes from its variables: real or integer if any
/// such variable occurs, DOM if only DOM variables occur, `None` for
/// constants. Boolean operators and comparisons are Boolean.
pub(crate) fn sort_join(sorts: &BTreeMap<String, VarSort>, e: &Expr) -> Option<VarSort> {
    fn rank(s: Option<VarSort>) -> u8 {
        match s {
            None => 0,
            Some(VarSort::Bool) => 1,
            Some(VarSort::Dom) => 2,
            Some(VarSort::Int) => 3,
            Some(VarSort::Real) => 4,
        }
    }
    match e {
        Expr::Num(_) => None,
        Expr::Bool(_) | Expr::Cmp(..) | Expr::Not(_) | Expr::And(..) | Expr::Or(..) => Some(VarSort::Bool),
        Expr::Var(v) => sorts.get(v).copied(),
        Expr::Neg(a) => sort_join(sorts, a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
            let (x, y) = (sort_join(sorts, a), sort_join(sorts, b));
            if rank(x) >= rank(y) {
                x
            } else {
                y
            }
        }
    }
}

/// Unique labels for statements that have none.
fn fill_labels(body: &mut [Stmt]) {
    fn collect(stmts: &[Stmt], used: &mut BTreeSet<String>) {
        for s in stmts {
            s.walk(&mut |s| {
                if !s.label.is_empty() {
                    used.insert(s.label.clone());
                }
            });
        }
    }
    fn assign(stmts: &mut [Stmt], used: &BTreeSet<String>, k: &mut usize) {
        for s in stmts {
            if s.label.is_empty() {
                loop {
                    *k += 1;
                    let l = format!("l{k}");
                    if !used.contains(&l) {
                        s.label = l;
                        break;
                    }
                }
            }
            match &mut s.kind {
                StmtKind::If { then_branch, else_branch, .. } => {
                    assign(then_branch, used, k);
                    assign(else_branch, used, k);
                }
                StmtKind::While { body, .. } => assign(body, used, k),
                _ => {}
            }
        }
    }
    let mut used = BTreeSet::new();
    collect(body, &mut used);
    let mut k = 0;
    assign(body, &used, &mut k);
}

/// Renaming state along one control path.
#[derive(Clone, Default)]
struct Env {
    /// Current name of each renamed variable.
    cur: HashMap<String, String>,
    /// Names assigned on this path.
    names: HashSet<String>,
    /// Source variables assigned on this path.
    bases: HashSet<String>,
}

struct Ssa<'a> {
    sorts: &'a mut BTreeMap<String, VarSort>,
    next: HashMap<String, usize>,
}

impl<'a> Ssa<'a> {
    fn renamed(&self, env: &Env, e: &mut Expr) {
        let cur = &env.cur;
        e.rename(&|v| cur.get(v).cloned());
    }

    fn def(&mut self, base: &str, env: &mut Env) -> String {
        let name = if env.bases.contains(base) {
            let k = self.next.entry(base.to_string()).or_insert(0);
            loop {
                *k += 1;
                let n = format!("{base}_{k}");
                if !self.sorts.contains_key(&n) {
                    let sort = self.sorts[base];
                    self.sorts.insert(n.clone(), sort);
                    break n;
                }
            }
        } else {
            base.to_string()
        };
        env.bases.insert(base.to_string());
        env.names.insert(name.clone());
        env.cur.insert(base.to_string(), name.clone());
        name
    }

    fn numeric(&self, v: &str) -> bool {
        matches!(self.sorts.get(v), Some(VarSort::Real | VarSort::Int))
    }

    /// Returns the rewritten block and whether every path through it ends
    /// in `exit`.
    fn block(&mut self, stmts: Vec<Stmt>, env: &mut Env, in_loop: bool) -> (Vec<Stmt>, bool) {
        let mut out = Vec::new();
        let mut terminated = false;
        for mut s in stmts {
            match &mut s.kind {
                StmtKind::Assign { target, expr } => {
                    self.renamed(env, expr);
                    if !in_loop && self.numeric(target) {
                        *target = self.def(target, env);
                    }
                }
                StmtKind::Lap { target, mean, .. } | StmtKind::DLap { target, mean, .. } => {
                    self.renamed(env, mean);
                    if !in_loop && self.numeric(target) {
                        *target = self.def(target, env);
                    }
                }
                StmtKind::ExpMech { args, .. } | StmtKind::Choose { args, .. } => {
                    for a in args {
                        self.renamed(env, a);
                    }
                }
                StmtKind::While { cond, body } => {
                    self.renamed(env, cond);
                    let mut inner = env.clone();
                    let b = std::mem::take(body);
                    *body = self.block(b, &mut inner, true).0;
                }
                StmtKind::If { cond, then_branch, else_branch } => {
                    self.renamed(env, cond);
                    let mut e1 = env.clone();
                    let (mut t, term1) = self.block(std::mem::take(then_branch), &mut e1, in_loop);
                    let mut e2 = env.clone();
                    let (mut f, term2) = self.block(std::mem::take(else_branch), &mut e2, in_loop);
                    match (term1, term2) {
                        (true, true) => {
                            terminated = true;
                            *env = e1;
                        }
                        (true, false) => *env = e2,
                        (false, true) => *env = e1,
                        (false, false) => {
                            let keys: BTreeSet<String> = e1.cur.keys().chain(e2.cur.keys()).cloned().collect();
                            let mut merged = HashMap::new();
                            for k in keys {
                                let name = match (e1.cur.get(&k).cloned(), e2.cur.get(&k).cloned()) {
                                    (Some(x), Some(y)) if x != y => {
                                        if !e2.names.contains(&x) {
                                            f.push(copy(&x, &y));
                                            e2.names.insert(x.clone());
                                            x
                                        } else {
                                            t.push(copy(&y, &x));
                                            e1.names.insert(y.clone());
                                            y
                                        }
                                    }
                                    (Some(x), _) => x,
                                    (None, Some(y)) => y,
                                    (None, None) => unreachable!("key from one side"),
                                };
                                merged.insert(k, name);
                            }
                            env.cur = merged;
                            env.names = e1.names.union(&e2.names).cloned().collect();
                            env.bases = e1.bases.union(&e2.bases).cloned().collect();
                        }
                    }
                    *then_branch = t;
                    *else_branch = f;
                }
                StmtKind::Exit => terminated = true,
            }
            out.push(s);
        }
        (out, terminated)
    }
}

fn copy(target: &str, from: &str) -> Stmt {
    plain(StmtKind::Assign { target: target.to_string(), expr: Expr::Var(from.to_string()) })
}
