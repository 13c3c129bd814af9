//! The finite parametrized Markov chain of a DiPWhile program on one input.
//!
//! A state records the program point, the concrete Boolean and DOM
//! valuation, the symbolic value of every real and integer variable as a
//! linear form over the noise variables sampled so far, and the set of
//! noise comparisons that hold along the path. Sampling only records the
//! noise parameters; probability enters at comparisons, whose two outcomes
//! are weighted by the probability of the comparison conditioned on the
//! path's comparisons. DOM-valued draws (exponential mechanism, `choose`)
//! branch on every value of positive weight.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write;

use dip_frontend::{CmpOp, Expr, Program, ScoreTable, Stmt, StmtKind, VarSort};
use dip_lapprob::{conditional_prob, ConstraintSystem, LinearConstraint, LinearForm, NoiseVar, ProbError, Rel};
use dip_symalg::{fmt_q, PseudoRational, Q};
use num_traits::One;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SemError {
    #[error("state explosion: more than {cap} states")]
    StateExplosion { cap: usize },
    #[error("at {label}: {source}")]
    Prob { label: String, source: ProbError },
    #[error("at {label}: {msg}")]
    Runtime { label: String, msg: String },
    #[error("bad input valuation: {0}")]
    BadInput(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildConfig {
    pub max_states: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig { max_states: 200_000 }
    }
}

/// One state of the chain. Equal states are merged, so the map from states
/// to indices acts as a hash-consing table.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SymState {
    /// Index of the program point in the flattened control-flow graph.
    pub pc: usize,
    pub f_bool: BTreeMap<String, bool>,
    pub f_dom: BTreeMap<String, i64>,
    pub f_int: BTreeMap<String, LinearForm>,
    pub f_real: BTreeMap<String, LinearForm>,
    /// Sampled noise variables (with their parameters) and the comparisons
    /// that hold along the path.
    pub conds: ConstraintSystem,
}

/// Control-flow graph node: one per statement.
#[derive(Clone, Debug)]
enum Node {
    /// An assignment or draw, continuing at `next`.
    Step { stmt: Stmt, next: Option<usize> },
    Branch { cond: Expr, then_to: Option<usize>, else_to: Option<usize> },
    Exit,
}

struct Cfg {
    labels: Vec<String>,
    nodes: Vec<Node>,
}

impl Cfg {
    fn new(body: &[Stmt]) -> (Cfg, Option<usize>) {
        let mut cfg = Cfg { labels: Vec::new(), nodes: Vec::new() };
        let entry = cfg.block(body, None);
        (cfg, entry)
    }

    fn alloc(&mut self, label: &str) -> usize {
        self.labels.push(label.to_string());
        self.nodes.push(Node::Exit);
        self.nodes.len() - 1
    }

    fn block(&mut self, stmts: &[Stmt], cont: Option<usize>) -> Option<usize> {
        let ids: Vec<usize> = stmts.iter().map(|s| self.alloc(&s.label)).collect();
        for (k, s) in stmts.iter().enumerate() {
            let next = ids.get(k + 1).copied().or(cont);
            let node = match &s.kind {
                StmtKind::Exit => Node::Exit,
                StmtKind::If { cond, then_branch, else_branch } => {
                    let t = self.block(then_branch, next).or(next);
                    let e = self.block(else_branch, next).or(next);
                    Node::Branch { cond: cond.clone(), then_to: t, else_to: e }
                }
                StmtKind::While { cond, body } => {
                    let b = self.block(body, Some(ids[k])).or(Some(ids[k]));
                    Node::Branch { cond: cond.clone(), then_to: b, else_to: next }
                }
                _ => Node::Step { stmt: s.clone(), next },
            };
            self.nodes[ids[k]] = node;
        }
        ids.first().copied()
    }
}

/// Finite parametrized chain reachable from one input valuation.
#[derive(Clone, Debug)]
pub struct Pdtmc {
    pub states: Vec<SymState>,
    /// Outgoing edges per state; functions are never identically zero.
    pub edges: Vec<Vec<(usize, PseudoRational)>>,
    pub initial: usize,
    /// States at an `exit`; they carry a probability-one self-loop.
    pub absorbing: Vec<bool>,
    /// Statement label of every program point.
    pub labels: Vec<String>,
    pub outputs: Vec<String>,
}

impl Pdtmc {
    pub fn label(&self, s: usize) -> &str {
        &self.labels[self.states[s].pc]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Graphviz rendering with edge functions as labels.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph pdtmc {\n");
        for (i, s) in self.states.iter().enumerate() {
            let mut desc = format!("{}", self.labels[s.pc]);
            for (v, x) in &s.f_dom {
                write!(desc, " {v}={x}").unwrap();
            }
            for (v, x) in &s.f_bool {
                write!(desc, " {v}={x}").unwrap();
            }
            for c in &s.conds.constraints {
                write!(desc, "\\n{c}").unwrap();
            }
            let shape = if self.absorbing[i] { "doublecircle" } else { "box" };
            writeln!(out, "  s{i} [shape={shape}, label=\"{}\"];", desc.replace('"', "'")).unwrap();
        }
        for (i, es) in self.edges.iter().enumerate() {
            for (j, p) in es {
                writeln!(out, "  s{i} -> s{j} [label=\"{p}\"];").unwrap();
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Exit states whose outputs equal `output`.
pub fn terminal_states(d: &Pdtmc, output: &[i64]) -> Vec<usize> {
    if output.len() != d.outputs.len() {
        return Vec::new();
    }
    (0..d.states.len())
        .filter(|&i| {
            d.absorbing[i]
                && d.outputs.iter().zip(output).all(|(o, v)| d.states[i].f_dom.get(o) == Some(v))
        })
        .collect()
}

/// Output valuation of an exit state (`None` if an output is unset).
pub fn output_of(d: &Pdtmc, s: usize) -> Option<Vec<i64>> {
    d.outputs.iter().map(|o| d.states[s].f_dom.get(o).copied()).collect()
}

/// `v ↦ e^{aεF(args, v)} / Σ_w e^{aεF(args, w)}` over the table's outputs.
pub fn exp_mech_pmf(table: &ScoreTable, a: &Q, args: &[i64]) -> BTreeMap<i64, PseudoRational> {
    let weights: BTreeMap<i64, PseudoRational> = table
        .entries
        .iter()
        .filter(|((u, _), _)| u.as_slice() == args)
        .map(|((_, v), f)| (*v, PseudoRational::exp(a * f)))
        .collect();
    let total = weights.values().fold(PseudoRational::zero(), |acc, w| acc.add(w));
    weights.into_iter().map(|(v, w)| (v, w.div(&total).expect("positive total weight"))).collect()
}

pub fn build_dtmc(p: &Program, input: &[i64]) -> Result<Pdtmc, SemError> {
    build_dtmc_with(p, input, &BuildConfig::default())
}

pub fn build_dtmc_with(p: &Program, input: &[i64], cfg: &BuildConfig) -> Result<Pdtmc, SemError> {
    if input.len() != p.inputs.len() {
        return Err(SemError::BadInput(format!("{} values for {} inputs", input.len(), p.inputs.len())));
    }
    if let Some(v) = input.iter().find(|v| !p.dom.contains(**v)) {
        return Err(SemError::BadInput(format!("{v} is outside the domain")));
    }
    let (graph, entry) = Cfg::new(&p.body);
    let entry = entry.ok_or_else(|| SemError::BadInput("empty program".into()))?;
    let init = SymState {
        pc: entry,
        f_bool: BTreeMap::new(),
        f_dom: p.inputs.iter().cloned().zip(input.iter().copied()).collect(),
        f_int: BTreeMap::new(),
        f_real: BTreeMap::new(),
        conds: ConstraintSystem::new(),
    };
    let mut b = Builder { p, graph: &graph, index: HashMap::new(), states: Vec::new(), queue: VecDeque::new(), cap: cfg.max_states };
    let initial = b.intern(init)?;
    let mut edges: Vec<Vec<(usize, PseudoRational)>> = Vec::new();
    let mut absorbing = Vec::new();
    while let Some(i) = b.queue.pop_front() {
        let st = b.states[i].clone();
        let succ = b.step(&st)?;
        let absorbs = succ.is_none();
        let succ = match succ {
            None => vec![(st, PseudoRational::one())],
            Some(s) => s,
        };
        let mut out: Vec<(usize, PseudoRational)> = Vec::new();
        for (s, f) in succ {
            if f.is_zero() {
                continue;
            }
            let j = b.intern(s)?;
            match out.iter_mut().find(|(k, _)| *k == j) {
                Some((_, g)) => *g = g.add(&f),
                None => out.push((j, f)),
            }
        }
        if edges.len() <= i {
            edges.resize(i + 1, Vec::new());
            absorbing.resize(i + 1, false);
        }
        edges[i] = out;
        absorbing[i] = absorbs;
    }
    edges.resize(b.states.len(), Vec::new());
    absorbing.resize(b.states.len(), false);
    Ok(Pdtmc { states: b.states, edges, initial, absorbing, labels: graph.labels, outputs: p.outputs.clone() })
}

struct Builder<'a> {
    p: &'a Program,
    graph: &'a Cfg,
    index: HashMap<SymState, usize>,
    states: Vec<SymState>,
    queue: VecDeque<usize>,
    cap: usize,
}

fn rel_of(op: CmpOp) -> Rel {
    match op {
        CmpOp::Lt => Rel::Lt,
        CmpOp::Le => Rel::Le,
        CmpOp::Eq => Rel::Eq,
        CmpOp::Ne => Rel::Ne,
        CmpOp::Ge => Rel::Ge,
        CmpOp::Gt => Rel::Gt,
    }
}

impl<'a> Builder<'a> {
    fn intern(&mut self, s: SymState) -> Result<usize, SemError> {
        if let Some(&i) = self.index.get(&s) {
            return Ok(i);
        }
        if self.states.len() >= self.cap {
            return Err(SemError::StateExplosion { cap: self.cap });
        }
        let i = self.states.len();
        self.index.insert(s.clone(), i);
        self.states.push(s);
        self.queue.push_back(i);
        Ok(i)
    }

    fn label(&self, st: &SymState) -> String {
        self.graph.labels[st.pc].clone()
    }

    fn runtime(&self, st: &SymState, msg: impl Into<String>) -> SemError {
        SemError::Runtime { label: self.label(st), msg: msg.into() }
    }

    fn goto(&self, st: &SymState, to: Option<usize>) -> Result<SymState, SemError> {
        let pc = to.ok_or_else(|| self.runtime(st, "control falls off the end of the program"))?;
        Ok(SymState { pc, ..st.clone() })
    }

    /// Successors with their probabilities; `None` for absorbing states.
    fn step(&self, st: &SymState) -> Result<Option<Vec<(SymState, PseudoRational)>>, SemError> {
        let one = PseudoRational::one();
        match &self.graph.nodes[st.pc] {
            Node::Exit => Ok(None),
            Node::Branch { cond, then_to, else_to } => {
                let to = if self.eval_bool(st, cond)? { then_to } else { else_to };
                Ok(Some(vec![(self.goto(st, *to)?, one)]))
            }
            Node::Step { stmt, next } => {
                let mut s = self.goto(st, *next)?;
                match &stmt.kind {
                    StmtKind::Assign { target, expr } => match self.p.sort_of(target) {
                        Some(VarSort::Bool) => {
                            if let Expr::Cmp(op, a, b) = expr {
                                if self.noisy(a) || self.noisy(b) {
                                    return self.split(st, s, target, *op, a, b).map(Some);
                                }
                            }
                            let v = self.eval_bool(st, expr)?;
                            s.f_bool.insert(target.clone(), v);
                        }
                        Some(VarSort::Dom) => {
                            let v = self.eval_dom(st, expr)?;
                            let v = self.to_dom(st, &v)?;
                            s.f_dom.insert(target.clone(), v);
                        }
                        Some(VarSort::Int) => {
                            let f = self.eval_lin(st, expr)?;
                            s.f_int.insert(target.clone(), f);
                        }
                        Some(VarSort::Real) => {
                            let f = self.eval_lin(st, expr)?;
                            s.f_real.insert(target.clone(), f);
                        }
                        None => return Err(self.runtime(st, format!("undeclared variable {target}"))),
                    },
                    StmtKind::Lap { target, scale, mean } | StmtKind::DLap { target, scale, mean } => {
                        let mu = self.eval_dom(st, mean)?;
                        if matches!(stmt.kind, StmtKind::Lap { .. }) {
                            s.conds.declare(NoiseVar::real(target, scale.clone(), mu));
                            s.f_real.insert(target.clone(), LinearForm::var(target));
                        } else {
                            if !mu.is_integer() {
                                return Err(self.runtime(st, "discrete Laplace mean must be an integer"));
                            }
                            s.conds.declare(NoiseVar::int(target, scale.clone(), mu));
                            s.f_int.insert(target.clone(), LinearForm::var(target));
                        }
                    }
                    StmtKind::ExpMech { target, scale, score, args } => {
                        let args = self.dom_args(st, args)?;
                        let table = &self.p.score_tables[score];
                        return Ok(Some(self.branches(&s, target, exp_mech_pmf(table, scale, &args))));
                    }
                    StmtKind::Choose { target, scale, dist, args } => {
                        let args = self.dom_args(st, args)?;
                        let pmf = self.p.choose_defs[dist]
                            .row(&args)
                            .into_iter()
                            .map(|(v, f)| (v, if scale.is_one() { f.clone() } else { f.rescale_eps(scale) }))
                            .collect();
                        return Ok(Some(self.branches(&s, target, pmf)));
                    }
                    StmtKind::If { .. } | StmtKind::While { .. } | StmtKind::Exit => unreachable!("not a step"),
                }
                Ok(Some(vec![(s, one)]))
            }
        }
    }

    fn branches(&self, s: &SymState, target: &str, pmf: BTreeMap<i64, PseudoRational>) -> Vec<(SymState, PseudoRational)> {
        pmf.into_iter()
            .map(|(v, f)| {
                let mut t = s.clone();
                t.f_dom.insert(target.to_string(), v);
                (t, f)
            })
            .collect()
    }

    /// Two-way split on a noise comparison, conditioned on the path.
    fn split(
        &self,
        st: &SymState,
        s: SymState,
        target: &str,
        op: CmpOp,
        a: &Expr,
        b: &Expr,
    ) -> Result<Vec<(SymState, PseudoRational)>, SemError> {
        let form = self.eval_lin(st, a)?.sub(&self.eval_lin(st, b)?);
        let c = LinearConstraint { form, rel: rel_of(op) };
        if c.form.is_constant() {
            let mut t = s;
            t.f_bool.insert(target.to_string(), c.rel.holds(&c.form.konst));
            return Ok(vec![(t, PseudoRational::one())]);
        }
        let p = conditional_prob(&st.conds, &c).map_err(|e| SemError::Prob { label: self.label(st), source: e })?;
        let mut yes = s.clone();
        yes.f_bool.insert(target.to_string(), true);
        yes.conds.push(c.clone());
        let mut no = s;
        no.f_bool.insert(target.to_string(), false);
        no.conds.push(c.negate());
        let q = PseudoRational::one().sub(&p);
        Ok(vec![(yes, p), (no, q)])
    }

    fn noisy(&self, e: &Expr) -> bool {
        let mut vs = Vec::new();
        e.vars(&mut vs);
        vs.iter().any(|v| matches!(self.p.sort_of(v), Some(VarSort::Real | VarSort::Int)))
    }

    fn dom_args(&self, st: &SymState, args: &[Expr]) -> Result<Vec<i64>, SemError> {
        args.iter().map(|a| self.eval_dom(st, a).and_then(|v| self.to_dom(st, &v))).collect()
    }

    /// DOM arithmetic saturates at the ends of the domain.
    fn to_dom(&self, st: &SymState, v: &Q) -> Result<i64, SemError> {
        if !v.is_integer() {
            return Err(self.runtime(st, format!("DOM value {} is not an integer", fmt_q(v))));
        }
        let (lo, hi) = (Q::from_integer(self.p.dom.lo.into()), Q::from_integer(self.p.dom.hi.into()));
        Ok(if *v < lo {
            self.p.dom.lo
        } else if *v > hi {
            self.p.dom.hi
        } else {
            num_traits::ToPrimitive::to_i64(&v.to_integer()).expect("within the domain")
        })
    }

    fn eval_dom(&self, st: &SymState, e: &Expr) -> Result<Q, SemError> {
        Ok(match e {
            Expr::Num(q) => q.clone(),
            Expr::Var(v) => match st.f_dom.get(v) {
                Some(x) => Q::from_integer((*x).into()),
                None => return Err(self.runtime(st, format!("{v} has no DOM value"))),
            },
            Expr::Neg(a) => -self.eval_dom(st, a)?,
            Expr::Add(a, b) => self.eval_dom(st, a)? + self.eval_dom(st, b)?,
            Expr::Sub(a, b) => self.eval_dom(st, a)? - self.eval_dom(st, b)?,
            Expr::Mul(a, b) => self.eval_dom(st, a)? * self.eval_dom(st, b)?,
            _ => return Err(self.runtime(st, "Boolean expression where a DOM value is expected")),
        })
    }

    fn eval_bool(&self, st: &SymState, e: &Expr) -> Result<bool, SemError> {
        Ok(match e {
            Expr::Bool(b) => *b,
            Expr::Var(v) => match st.f_bool.get(v) {
                Some(b) => *b,
                None => return Err(self.runtime(st, format!("{v} has no Boolean value"))),
            },
            Expr::Cmp(op, a, b) => {
                if self.noisy(a) || self.noisy(b) {
                    return Err(self.runtime(st, "noise comparison inside a condition"));
                }
                op.holds(&self.eval_dom(st, a)?, &self.eval_dom(st, b)?)
            }
            Expr::Not(a) => !self.eval_bool(st, a)?,
            Expr::And(a, b) => self.eval_bool(st, a)? && self.eval_bool(st, b)?,
            Expr::Or(a, b) => self.eval_bool(st, a)? || self.eval_bool(st, b)?,
            _ => return Err(self.runtime(st, "numeric expression where a Boolean is expected")),
        })
    }

    /// Linear form over noise variables; DOM variables contribute constants.
    fn eval_lin(&self, st: &SymState, e: &Expr) -> Result<LinearForm, SemError> {
        Ok(match e {
            Expr::Num(q) => LinearForm::constant(q.clone()),
            Expr::Var(v) => match self.p.sort_of(v) {
                Some(VarSort::Real) => st.f_real.get(v).cloned().ok_or_else(|| self.runtime(st, format!("{v} is unset")))?,
                Some(VarSort::Int) => st.f_int.get(v).cloned().ok_or_else(|| self.runtime(st, format!("{v} is unset")))?,
                _ => LinearForm::constant(self.eval_dom(st, e)?),
            },
            Expr::Neg(a) => self.eval_lin(st, a)?.scale(&-Q::one()),
            Expr::Add(a, b) => self.eval_lin(st, a)?.add(&self.eval_lin(st, b)?),
            Expr::Sub(a, b) => self.eval_lin(st, a)?.sub(&self.eval_lin(st, b)?),
            Expr::Mul(a, b) => {
                let (x, y) = (self.eval_lin(st, a)?, self.eval_lin(st, b)?);
                if x.is_constant() {
                    y.scale(&x.konst)
                } else if y.is_constant() {
                    x.scale(&y.konst)
                } else {
                    return Err(self.runtime(st, "product of two noisy values"));
                }
            }
            _ => return Err(self.runtime(st, "Boolean expression where a number is expected")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dip_frontend::parse_program;

    #[test]
    fn while_loops_link_back_to_their_head() {
        let p = parse_program("input a\noutput o\no <- 0\nw <- a\nwhile w == 1 { w <- 0 }\nexit").unwrap();
        let (cfg, entry) = Cfg::new(&p.body);
        assert_eq!(entry, Some(0));
        let head = cfg.labels.iter().position(|l| l == "l3").unwrap();
        let Node::Branch { then_to: Some(body), else_to: Some(after), .. } = &cfg.nodes[head] else { panic!() };
        assert!(matches!(cfg.nodes[*after], Node::Exit));
        match &cfg.nodes[*body] {
            Node::Step { next, .. } => assert_eq!(*next, Some(head)),
            other => panic!("{other:?}"),
        }
    }
}
