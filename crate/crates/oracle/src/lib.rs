//! Monte-Carlo interpreter for DiPWhile programs.
//!
//! This is the independent cross-check of the exact engine. It runs the
//! desugared program concretely. Noise is sampled with floating point,
//! DOM arithmetic stays exact, and output frequencies are counted over
//! many seeded runs. Batches run in parallel. Batch `b` draws from a
//! ChaCha stream keyed by `(seed, b)`, so estimates do not depend on the
//! number of worker threads.

use std::collections::{BTreeMap, HashMap};

use dip_frontend::{CmpOp, Expr, Program, Stmt, StmtKind, VarSort};
use dip_symalg::{eval_interval, PseudoRational, Q};
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rand::distributions::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const BATCH: u64 = 8192;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("bad input valuation: {0}")]
    BadInput(String),
    #[error("at {label}: {msg}")]
    Runtime { label: String, msg: String },
    #[error("run did not terminate within {fuel} steps")]
    OutOfFuel { fuel: u64 },
    #[error("epsilon must be positive")]
    BadEpsilon,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(with = "dip_symalg::qserde")]
    pub eps: Q,
    pub samples: u64,
    pub seed: u64,
    /// Statement budget of a single run (guards `while` loops).
    pub fuel: u64,
}

impl RunConfig {
    pub fn new(eps: Q, samples: u64, seed: u64) -> Self {
        RunConfig { eps, samples, seed, fuel: 1_000_000 }
    }
}

/// Output counts over `samples` runs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Estimate {
    pub samples: u64,
    pub counts: BTreeMap<Vec<i64>, u64>,
}

impl Estimate {
    pub fn freq(&self, output: &[i64]) -> f64 {
        self.counts.get(output).copied().unwrap_or(0) as f64 / self.samples as f64
    }

    /// Standard error of [`Estimate::freq`]. It uses the binomial variance
    /// at the observed frequency, with a floor of one count so that unseen
    /// outputs still get a meaningful error bar.
    pub fn stderr(&self, output: &[i64]) -> f64 {
        let n = self.samples as f64;
        let p = self.freq(output).max(1.0 / n);
        (p * (1.0 - p) / n).sqrt()
    }

    /// Frequency and standard error of every observed output.
    pub fn summary(&self) -> BTreeMap<Vec<i64>, (f64, f64)> {
        self.counts.keys().map(|o| (o.clone(), (self.freq(o), self.stderr(o)))).collect()
    }
}

/// One output cell compared against a reference value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub output: Vec<i64>,
    pub expected: f64,
    pub freq: f64,
    pub stderr: f64,
    /// Deviation in units of the combined standard error.
    pub z: f64,
}

/// Compare `est` cell by cell with `reference`. Each reference cell is
/// `(value, standard error)`, where the error is 0 for exact values. Every
/// cell that either side populates is compared.
pub fn compare(est: &Estimate, reference: &BTreeMap<Vec<i64>, (f64, f64)>) -> Vec<CellCheck> {
    let mut cells: Vec<&Vec<i64>> = est.counts.keys().chain(reference.keys()).collect();
    cells.sort();
    cells.dedup();
    cells
        .into_iter()
        .map(|o| {
            let (expected, ref_se) = reference.get(o).copied().unwrap_or((0.0, 0.0));
            let (freq, stderr) = (est.freq(o), est.stderr(o));
            let se = (stderr * stderr + ref_se * ref_se).sqrt();
            let z = if se > 0.0 { (freq - expected) / se } else if freq == expected { 0.0 } else { f64::INFINITY };
            CellCheck { output: o.clone(), expected, freq, stderr, z }
        })
        .collect()
}

/// Outcome of a two-stage agreement test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub passed: bool,
    pub first: Vec<CellCheck>,
    /// Re-tests of the cells the first stage flagged, on fresh draws.
    pub retest: Vec<CellCheck>,
}

/// Per-cell agreement within `k` standard errors. Across many cells a few
/// excursions beyond `k` are expected by chance alone. A flagged cell is
/// therefore re-estimated once from independent draws (`attempt` 1), and
/// the test passes when every flagged cell is within `k` on that second
/// look. A systematic bias fails both stages.
pub fn agreement<F>(k: f64, mut estimate: F) -> Result<Agreement, OracleError>
where
    F: FnMut(u64) -> Result<Vec<CellCheck>, OracleError>,
{
    let first = estimate(0)?;
    let flagged: Vec<&Vec<i64>> = first.iter().filter(|c| !(c.z.abs() <= k)).map(|c| &c.output).collect();
    if flagged.is_empty() {
        return Ok(Agreement { passed: true, first, retest: Vec::new() });
    }
    let retest: Vec<CellCheck> = estimate(1)?.into_iter().filter(|c| flagged.contains(&&c.output)).collect();
    let passed = flagged.iter().all(|o| retest.iter().any(|c| &c.output == *o && c.z.abs() <= k));
    Ok(Agreement { passed, first, retest })
}

/// Floating-point value of a pseudo-rational function at `eps`.
pub fn eval_f64(f: &PseudoRational, eps: &Q) -> f64 {
    match eval_interval(f, eps, 64) {
        Ok(iv) => ((iv.lo_q() + iv.hi_q()) / Q::from_integer(2.into())).to_f64().unwrap_or(f64::NAN),
        Err(_) => f64::NAN,
    }
}

fn to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Sample `X ~ Lap(rate, mu)` with density `(rate/2)·e^{−rate·|x − mu|}`.
pub fn sample_laplace<R: Rng>(rng: &mut R, rate: f64, mu: f64) -> f64 {
    let u: f64 = Open01.sample(rng);
    let u = u - 0.5;
    mu - u.signum() * (1.0 - 2.0 * u.abs()).ln() / rate
}

/// Sample `Z ~ DLap(rate, mu)` with `P(Z = z) ∝ e^{−rate·|z − mu|}`. This is
/// the difference of two geometric variables with success rate `1 − e^{−rate}`.
pub fn sample_discrete_laplace<R: Rng>(rng: &mut R, rate: f64, mu: i64) -> i64 {
    let geo = |rng: &mut R| -> i64 {
        let u: f64 = Open01.sample(rng);
        (u.ln() / -rate).floor() as i64
    };
    mu + geo(rng) - geo(rng)
}

type R = Ratio<i128>;

/// Runtime value of a variable slot.
#[derive(Clone, Copy, Debug)]
enum Val {
    Unset,
    Bool(bool),
    Dom(i64),
    Num(f64),
}

/// Expressions with variables resolved to slots.
#[derive(Clone, Debug)]
enum E {
    Const(R, f64),
    Bool(bool),
    Slot(usize),
    Neg(Box<E>),
    Add(Box<E>, Box<E>),
    Sub(Box<E>, Box<E>),
    Mul(Box<E>, Box<E>),
    /// The flag marks comparisons that involve noise values.
    Cmp(CmpOp, Box<E>, Box<E>, bool),
    Not(Box<E>),
    And(Box<E>, Box<E>),
    Or(Box<E>, Box<E>),
}

/// Pmf rows of a DOM-valued draw, keyed by the argument tuple.
type Rows = HashMap<Vec<i64>, Vec<(i64, f64)>>;

#[derive(Clone, Debug)]
enum S {
    Assign { slot: usize, sort: VarSort, e: E },
    Lap { slot: usize, rate: f64, mean: E },
    DLap { slot: usize, rate: f64, mean: E },
    Draw { slot: usize, args: Vec<E>, rows: Rows },
    If { c: E, t: Vec<(String, S)>, e: Vec<(String, S)> },
    While { c: E, body: Vec<(String, S)> },
    Exit,
}

/// A program compiled for sampling at one fixed ε.
#[derive(Clone, Debug)]
pub struct Compiled {
    dom: (i64, i64),
    n_slots: usize,
    inputs: Vec<usize>,
    outputs: Vec<(String, usize)>,
    body: Vec<(String, S)>,
}

fn to_r(q: &Q) -> Result<R, OracleError> {
    match (q.numer().to_i128(), q.denom().to_i128()) {
        (Some(n), Some(d)) => Ok(R::new(n, d)),
        _ => Err(OracleError::Runtime { label: String::new(), msg: "constant too large for the sampler".into() }),
    }
}

struct Compiler<'a> {
    p: &'a Program,
    eps: &'a Q,
    slots: HashMap<&'a str, usize>,
}

impl<'a> Compiler<'a> {
    fn slot(&mut self, v: &'a str) -> usize {
        let n = self.slots.len();
        *self.slots.entry(v).or_insert(n)
    }

    fn noisy(&self, e: &Expr) -> bool {
        let mut vs = Vec::new();
        e.vars(&mut vs);
        vs.iter().any(|v| matches!(self.p.sort_of(v), Some(VarSort::Real | VarSort::Int)))
    }

    fn expr(&mut self, e: &'a Expr) -> Result<E, OracleError> {
        let b = |c: &mut Self, x: &'a Expr| c.expr(x).map(Box::new);
        Ok(match e {
            Expr::Num(q) => E::Const(to_r(q)?, to_f64(q)),
            Expr::Bool(v) => E::Bool(*v),
            Expr::Var(v) => E::Slot(self.slot(v)),
            Expr::Neg(x) => E::Neg(b(self, x)?),
            Expr::Add(x, y) => E::Add(b(self, x)?, b(self, y)?),
            Expr::Sub(x, y) => E::Sub(b(self, x)?, b(self, y)?),
            Expr::Mul(x, y) => E::Mul(b(self, x)?, b(self, y)?),
            Expr::Cmp(op, x, y) => {
                let noisy = self.noisy(x) || self.noisy(y);
                E::Cmp(*op, b(self, x)?, b(self, y)?, noisy)
            }
            Expr::Not(x) => E::Not(b(self, x)?),
            Expr::And(x, y) => E::And(b(self, x)?, b(self, y)?),
            Expr::Or(x, y) => E::Or(b(self, x)?, b(self, y)?),
        })
    }

    fn block(&mut self, stmts: &'a [Stmt]) -> Result<Vec<(String, S)>, OracleError> {
        stmts.iter().map(|s| Ok((s.label.clone(), self.stmt(s)?))).collect()
    }

    fn stmt(&mut self, s: &'a Stmt) -> Result<S, OracleError> {
        let eps_f = to_f64(self.eps);
        Ok(match &s.kind {
            StmtKind::Exit => S::Exit,
            StmtKind::If { cond, then_branch, else_branch } => {
                S::If { c: self.expr(cond)?, t: self.block(then_branch)?, e: self.block(else_branch)? }
            }
            StmtKind::While { cond, body } => S::While { c: self.expr(cond)?, body: self.block(body)? },
            StmtKind::Assign { target, expr } => {
                let sort = self.p.sort_of(target).ok_or_else(|| OracleError::Runtime {
                    label: s.label.clone(),
                    msg: format!("undeclared variable {target}"),
                })?;
                S::Assign { slot: self.slot(target), sort, e: self.expr(expr)? }
            }
            StmtKind::Lap { target, scale, mean } => {
                S::Lap { slot: self.slot(target), rate: to_f64(scale) * eps_f, mean: self.expr(mean)? }
            }
            StmtKind::DLap { target, scale, mean } => {
                S::DLap { slot: self.slot(target), rate: to_f64(scale) * eps_f, mean: self.expr(mean)? }
            }
            StmtKind::ExpMech { target, scale, score, args } => {
                let rate = to_f64(scale) * eps_f;
                let mut rows: Rows = HashMap::new();
                for ((u, v), f) in &self.p.score_tables[score].entries {
                    rows.entry(u.clone()).or_default().push((*v, (rate * to_f64(f)).exp()));
                }
                let args = args.iter().map(|a| self.expr(a)).collect::<Result<_, _>>()?;
                S::Draw { slot: self.slot(target), args, rows }
            }
            StmtKind::Choose { target, scale, dist, args } => {
                let at = scale * self.eps;
                let mut rows: Rows = HashMap::new();
                for ((u, v), f) in &self.p.choose_defs[dist].pmf {
                    if !f.is_zero() {
                        rows.entry(u.clone()).or_default().push((*v, eval_f64(f, &at)));
                    }
                }
                let args = args.iter().map(|a| self.expr(a)).collect::<Result<_, _>>()?;
                S::Draw { slot: self.slot(target), args, rows }
            }
        })
    }
}

/// Resolve variables to slots and tabulate every DOM-valued draw at `eps`.
pub fn compile(p: &Program, eps: &Q) -> Result<Compiled, OracleError> {
    if *eps <= Q::zero() {
        return Err(OracleError::BadEpsilon);
    }
    let mut c = Compiler { p, eps, slots: HashMap::new() };
    let inputs = p.inputs.iter().map(|v| c.slot(v)).collect();
    let outputs = p.outputs.iter().map(|v| (v.clone(), c.slot(v))).collect();
    let body = c.block(&p.body)?;
    Ok(Compiled { dom: (p.dom.lo, p.dom.hi), n_slots: c.slots.len(), inputs, outputs, body })
}

enum Flow {
    Next,
    Exit,
}

struct Run<'a, G: Rng> {
    c: &'a Compiled,
    rng: &'a mut G,
    env: Vec<Val>,
    fuel: u64,
}

fn rt(label: &str, msg: impl Into<String>) -> OracleError {
    OracleError::Runtime { label: label.to_string(), msg: msg.into() }
}

impl<'a, G: Rng> Run<'a, G> {
    fn block(&mut self, stmts: &'a [(String, S)]) -> Result<Flow, OracleError> {
        for (label, s) in stmts {
            if self.fuel == 0 {
                return Err(OracleError::OutOfFuel { fuel: 0 });
            }
            self.fuel -= 1;
            if let Flow::Exit = self.stmt(label, s)? {
                return Ok(Flow::Exit);
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, l: &str, s: &'a S) -> Result<Flow, OracleError> {
        match s {
            S::Exit => return Ok(Flow::Exit),
            S::If { c, t, e } => {
                let b = self.eval_bool(l, c)?;
                return self.block(if b { t } else { e });
            }
            S::While { c, body } => {
                while self.eval_bool(l, c)? {
                    if self.fuel == 0 {
                        return Err(OracleError::OutOfFuel { fuel: 0 });
                    }
                    self.fuel -= 1;
                    if let Flow::Exit = self.block(body)? {
                        return Ok(Flow::Exit);
                    }
                }
            }
            S::Assign { slot, sort, e } => {
                self.env[*slot] = match sort {
                    VarSort::Bool => Val::Bool(self.eval_bool(l, e)?),
                    VarSort::Dom => Val::Dom(self.to_dom(l, self.eval_dom(l, e)?)?),
                    VarSort::Int | VarSort::Real => Val::Num(self.eval_num(l, e)?),
                };
            }
            S::Lap { slot, rate, mean } => {
                let mu = self.eval_dom(l, mean)?;
                let mu = *mu.numer() as f64 / *mu.denom() as f64;
                self.env[*slot] = Val::Num(sample_laplace(self.rng, *rate, mu));
            }
            S::DLap { slot, rate, mean } => {
                let mu = self.eval_dom(l, mean)?;
                if !mu.is_integer() {
                    return Err(rt(l, "discrete Laplace mean must be an integer"));
                }
                let z = sample_discrete_laplace(self.rng, *rate, mu.to_integer() as i64);
                self.env[*slot] = Val::Num(z as f64);
            }
            S::Draw { slot, args, rows } => {
                let args = args.iter().map(|a| self.eval_dom(l, a).and_then(|v| self.to_dom(l, v))).collect::<Result<Vec<_>, _>>()?;
                let weights = rows.get(&args).map(|r| r.as_slice()).unwrap_or(&[]);
                self.env[*slot] = Val::Dom(self.pick(l, weights)?);
            }
        }
        Ok(Flow::Next)
    }

    /// Draw a value with probability proportional to its weight.
    fn pick(&mut self, l: &str, weights: &[(i64, f64)]) -> Result<i64, OracleError> {
        let total: f64 = weights.iter().map(|w| w.1).sum();
        if weights.iter().any(|w| !(w.1 >= 0.0)) || !(total > 0.0) {
            return Err(rt(l, "weights are not a distribution"));
        }
        let mut u = self.rng.gen::<f64>() * total;
        for &(v, w) in weights {
            if u < w {
                return Ok(v);
            }
            u -= w;
        }
        Ok(weights.iter().rev().find(|w| w.1 > 0.0).expect("positive total").0)
    }

    /// DOM values saturate at the ends of the domain.
    fn to_dom(&self, l: &str, v: R) -> Result<i64, OracleError> {
        if !v.is_integer() {
            return Err(rt(l, "DOM value is not an integer"));
        }
        Ok(v.to_integer().clamp(self.c.dom.0 as i128, self.c.dom.1 as i128) as i64)
    }

    fn eval_dom(&self, l: &str, e: &E) -> Result<R, OracleError> {
        Ok(match e {
            E::Const(r, _) => *r,
            E::Slot(i) => match self.env[*i] {
                Val::Dom(x) => R::from_integer(x as i128),
                _ => return Err(rt(l, "variable has no DOM value")),
            },
            E::Neg(a) => -self.eval_dom(l, a)?,
            E::Add(a, b) => self.eval_dom(l, a)? + self.eval_dom(l, b)?,
            E::Sub(a, b) => self.eval_dom(l, a)? - self.eval_dom(l, b)?,
            E::Mul(a, b) => self.eval_dom(l, a)? * self.eval_dom(l, b)?,
            _ => return Err(rt(l, "Boolean expression where a DOM value is expected")),
        })
    }

    fn eval_num(&self, l: &str, e: &E) -> Result<f64, OracleError> {
        Ok(match e {
            E::Const(_, f) => *f,
            E::Slot(i) => match self.env[*i] {
                Val::Num(x) => x,
                Val::Dom(x) => x as f64,
                _ => return Err(rt(l, "variable is unset")),
            },
            E::Neg(a) => -self.eval_num(l, a)?,
            E::Add(a, b) => self.eval_num(l, a)? + self.eval_num(l, b)?,
            E::Sub(a, b) => self.eval_num(l, a)? - self.eval_num(l, b)?,
            E::Mul(a, b) => self.eval_num(l, a)? * self.eval_num(l, b)?,
            _ => return Err(rt(l, "Boolean expression where a number is expected")),
        })
    }

    fn eval_bool(&self, l: &str, e: &E) -> Result<bool, OracleError> {
        Ok(match e {
            E::Bool(b) => *b,
            E::Slot(i) => match self.env[*i] {
                Val::Bool(b) => b,
                _ => return Err(rt(l, "variable has no Boolean value")),
            },
            E::Cmp(op, a, b, true) => holds_f64(*op, self.eval_num(l, a)?, self.eval_num(l, b)?),
            E::Cmp(op, a, b, false) => op.holds(&self.eval_dom(l, a)?, &self.eval_dom(l, b)?),
            E::Not(a) => !self.eval_bool(l, a)?,
            E::And(a, b) => self.eval_bool(l, a)? && self.eval_bool(l, b)?,
            E::Or(a, b) => self.eval_bool(l, a)? || self.eval_bool(l, b)?,
            _ => return Err(rt(l, "numeric expression where a Boolean is expected")),
        })
    }
}

fn holds_f64(op: CmpOp, x: f64, y: f64) -> bool {
    match op {
        CmpOp::Lt => x < y,
        CmpOp::Le => x <= y,
        CmpOp::Eq => x == y,
        CmpOp::Ne => x != y,
        CmpOp::Ge => x >= y,
        CmpOp::Gt => x > y,
    }
}

fn check_input(p: &Program, input: &[i64]) -> Result<(), OracleError> {
    if input.len() != p.inputs.len() {
        return Err(OracleError::BadInput(format!("{} values for {} inputs", input.len(), p.inputs.len())));
    }
    if let Some(v) = input.iter().find(|v| !p.dom.contains(**v)) {
        return Err(OracleError::BadInput(format!("{v} is outside the domain")));
    }
    Ok(())
}

/// One run of a compiled program on `input`; returns the output valuation at `exit`.
pub fn run_compiled<G: Rng>(c: &Compiled, input: &[i64], fuel: u64, rng: &mut G) -> Result<Vec<i64>, OracleError> {
    let mut env = vec![Val::Unset; c.n_slots];
    for (&i, &v) in c.inputs.iter().zip(input) {
        env[i] = Val::Dom(v);
    }
    let mut run = Run { c, rng, env, fuel };
    match run.block(&c.body) {
        Ok(Flow::Exit) => {}
        Ok(Flow::Next) => return Err(rt("", "control falls off the end of the program")),
        Err(OracleError::OutOfFuel { .. }) => return Err(OracleError::OutOfFuel { fuel }),
        Err(e) => return Err(e),
    }
    c.outputs
        .iter()
        .map(|(o, i)| match run.env[*i] {
            Val::Dom(v) => Ok(v),
            _ => Err(rt("", format!("output {o} is unset at exit"))),
        })
        .collect()
}

/// One run of `p` on `input` at `eps`.
pub fn sample_run<G: Rng>(p: &Program, input: &[i64], eps: &Q, fuel: u64, rng: &mut G) -> Result<Vec<i64>, OracleError> {
    check_input(p, input)?;
    run_compiled(&compile(p, eps)?, input, fuel, rng)
}

/// Estimate the output distribution of `p` on `input` from `cfg.samples` runs.
pub fn estimate_distribution(p: &Program, input: &[i64], cfg: &RunConfig) -> Result<Estimate, OracleError> {
    check_input(p, input)?;
    if cfg.samples == 0 {
        return Err(OracleError::BadInput("at least one sample is required".into()));
    }
    let c = compile(p, &cfg.eps)?;
    let batches = cfg.samples.div_ceil(BATCH);
    let parts: Vec<BTreeMap<Vec<i64>, u64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b);
            let n = BATCH.min(cfg.samples - b * BATCH);
            let mut counts = BTreeMap::new();
            for _ in 0..n {
                *counts.entry(run_compiled(&c, input, cfg.fuel, &mut rng)?).or_insert(0) += 1;
            }
            Ok(counts)
        })
        .collect::<Result<_, OracleError>>()?;
    let mut counts = BTreeMap::new();
    for part in parts {
        for (o, c) in part {
            *counts.entry(o).or_insert(0) += c;
        }
    }
    Ok(Estimate { samples: cfg.samples, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_sampler_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_laplace(&mut rng, 2.0, 1.0)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        // mean mu, variance 2/rate²
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        assert!((var - 0.5).abs() < 0.01, "{var}");
    }

    #[test]
    fn discrete_laplace_sampler_pmf() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 200_000;
        let rate: f64 = 1.0;
        let zeros = (0..n).filter(|_| sample_discrete_laplace(&mut rng, rate, 3) == 3).count();
        // P(Z = mu) = (1 − e^{−rate}) / (1 + e^{−rate})
        let want = (1.0 - (-rate).exp()) / (1.0 + (-rate).exp());
        let got = zeros as f64 / n as f64;
        assert!((got - want).abs() < 4.0 * (want * (1.0 - want) / n as f64).sqrt(), "{got} vs {want}");
    }

    fn est(pairs: &[(i64, u64)]) -> Estimate {
        let counts: BTreeMap<Vec<i64>, u64> = pairs.iter().map(|&(o, c)| (vec![o], c)).collect();
        Estimate { samples: counts.values().sum(), counts }
    }

    #[test]
    fn two_stage_agreement() {
        let fair: BTreeMap<Vec<i64>, (f64, f64)> = [(vec![0], (0.5, 0.0)), (vec![1], (0.5, 0.0))].into();
        // a biased coin fails both looks
        let biased = agreement(3.0, |_| Ok(compare(&est(&[(0, 5200), (1, 4800)]), &fair))).unwrap();
        assert!(!biased.passed && biased.retest.len() == 2);
        // a chance excursion on the first look is cleared by the second
        let lucky = agreement(3.0, |a| Ok(compare(&est(if a == 0 { &[(0, 5200), (1, 4800)] } else { &[(0, 5010), (1, 4990)] }), &fair)))
            .unwrap();
        assert!(lucky.passed && !lucky.first.iter().all(|c| c.z.abs() <= 3.0));
        // unseen cells with positive reference mass are compared too
        let missing = compare(&est(&[(0, 10_000)]), &fair);
        assert_eq!(missing.len(), 2);
        assert!(missing.iter().all(|c| c.z.abs() > 3.0));
    }
}
