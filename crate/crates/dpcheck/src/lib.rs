//! Exact decision of (tε, δ(ε))-differential privacy for DiPWhile programs
//! over finite input domains, for one ε or for every ε in an interval.
//!
//! The output distribution of every input is computed once as closed-form
//! functions of ε. For every ordered adjacent pair `(in, in′)` and every
//! output set `O` the check decides
//! `e^{tε}·Prob(in′ ∈ O) + δ(ε) − Prob(in ∈ O) ≥ 0` on the interval. With
//! δ ≡ 0 singleton sets suffice; otherwise the maximizing sets are found
//! piecewise between the roots of the per-output differences. A failed
//! inequality yields a counter-example whose violation is re-derived from
//! scratch and certified by interval evaluation.

pub mod delta;
pub mod profile;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use dip_frontend::{adjacent_pairs, enumerate_valuations, parse_program_with, AdjacencySpec, FrontendError, Program, Which};
use dip_reach::{exceptional_points, output_distribution_with, output_distributions, OutputDistribution, ReachError};
use dip_semantics::{build_dtmc_with, BuildConfig};
use dip_symalg::{eval_interval, fmt_q, qserde, sign_on_interval, EpsInterval, PseudoRational, RootInterval, SignConfig, SignVerdict, Q};
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use delta::DeltaSpec;
pub use profile::{all_subsets, differences, worst_subset_profile, Piece};

/// Exhaustive subset enumeration is used as a fallback up to this many
/// outputs.
pub const SUBSET_FALLBACK_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DpError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error("bad query: {0}")]
    BadQuery(String),
    #[error("counter-example failed certification: {0}")]
    Certification(String),
}

/// Which ε the question is about.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsRange {
    Fixed(#[serde(with = "qserde")] Q),
    Interval(EpsInterval),
}

impl EpsRange {
    pub fn interval(&self) -> EpsInterval {
        match self {
            EpsRange::Fixed(x) => EpsInterval::point(x.clone()),
            EpsRange::Interval(iv) => iv.clone(),
        }
    }
}

/// Is `program` (t·ε, δ(ε))-private for the ε in `eps`?
#[derive(Clone, Debug)]
pub struct DpQuery {
    pub program: Program,
    pub adjacency: AdjacencySpec,
    /// Budget factor; the privacy budget is `t·ε`.
    pub t: Q,
    pub delta: DeltaSpec,
    pub eps: EpsRange,
    pub sign: SignConfig,
    pub build: BuildConfig,
    /// Largest input space that is enumerated.
    pub max_inputs: usize,
}

impl DpQuery {
    /// ε-privacy (t = 1, δ = 0) for every ε > 0.
    pub fn new(program: Program, adjacency: AdjacencySpec) -> Self {
        DpQuery {
            program,
            adjacency,
            t: Q::one(),
            delta: DeltaSpec::zero(),
            eps: EpsRange::Interval(EpsInterval::all()),
            sign: SignConfig::default(),
            build: BuildConfig::default(),
            max_inputs: 100_000,
        }
    }

    fn validate(&self) -> Result<(), DpError> {
        if !self.t.is_positive() {
            return Err(DpError::BadQuery(format!("budget factor {} must be positive", fmt_q(&self.t))));
        }
        if let EpsRange::Fixed(x) = &self.eps {
            if !x.is_positive() {
                return Err(DpError::BadQuery(format!("epsilon {} must be positive", fmt_q(x))));
            }
        }
        Ok(())
    }
}

/// Certified enclosure `[lo, hi]` of a real number.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enclosure {
    #[serde(with = "qserde")]
    pub lo: Q,
    #[serde(with = "qserde")]
    pub hi: Q,
}

/// `(in, in′, O, ε₀)` with `Prob(P_{ε₀}(in) ∈ O) > e^{tε₀}·Prob(P_{ε₀}(in′) ∈ O) + δ(ε₀)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterExample {
    pub input: Vec<i64>,
    pub input2: Vec<i64>,
    pub outputs: Vec<Vec<i64>>,
    #[serde(with = "qserde")]
    pub eps0: Q,
    /// Enclosure of `e^{tε₀}·Prob(in′ ∈ O) + δ(ε₀) − Prob(in ∈ O)`; its
    /// upper end is negative.
    pub margin: Enclosure,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum CheckResult {
    Holds,
    Fails {
        #[serde(with = "qserde")]
        eps0: Q,
    },
    Unknown {
        reason: String,
    },
}

/// One decided inequality.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub input: Vec<i64>,
    pub input2: Vec<i64>,
    pub outputs: Vec<Vec<i64>>,
    pub interval: EpsInterval,
    /// `e^{tε}·Prob(in′ ∈ O) − Prob(in ∈ O)`, to which δ is added.
    pub expr: PseudoRational,
    #[serde(flatten)]
    pub result: CheckResult,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Outcome {
    Private,
    Violation { counter_example: CounterExample },
    Inconclusive { reasons: Vec<String> },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timings {
    pub distributions_ms: u64,
    pub inequalities_ms: u64,
    pub certification_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub outcome: Outcome,
    /// Ordered pairs whose inequalities were decided.
    pub pairs_checked: usize,
    pub audit: Vec<AuditEntry>,
    /// Isolated ε where an edge inside a loop vanishes; the verdict holds
    /// away from these points.
    pub exceptional_points: Vec<RootInterval>,
    pub timings: Timings,
}

impl Verdict {
    pub fn is_private(&self) -> bool {
        matches!(self.outcome, Outcome::Private)
    }

    pub fn counter_example(&self) -> Option<&CounterExample> {
        match &self.outcome {
            Outcome::Violation { counter_example } => Some(counter_example),
            _ => None,
        }
    }
}

fn inconclusive_reason(v: &SignVerdict) -> String {
    match v {
        SignVerdict::Inconclusive { lo, hi, reason } => {
            let hi = hi.as_ref().map_or_else(|| "inf".to_string(), fmt_q);
            format!("{reason} on [{}, {hi}]", fmt_q(lo))
        }
        _ => String::new(),
    }
}

/// Decide `base(ε) + δ(ε) ≥ 0` on `iv`. For a transcendental constant in
/// δ, the lower bracket proves the inequality and the upper bracket
/// certifies violations; the brackets tighten until one of them settles.
pub fn decide(base: &PseudoRational, delta: &DeltaSpec, iv: &EpsInterval, cfg: &SignConfig) -> SignVerdict {
    if delta.is_symbolic() {
        return sign_on_interval(&base.add(&delta.f), iv, cfg);
    }
    let mut prec = 64;
    loop {
        let Ok((lo, hi)) = delta.bounds(prec) else {
            return SignVerdict::Inconclusive {
                lo: iv.lo.clone().unwrap_or_else(Q::zero),
                hi: iv.hi.clone(),
                reason: "no enclosure of the constant in delta".into(),
            };
        };
        let weak = sign_on_interval(&base.add(&lo), iv, cfg);
        if weak.is_nonneg() {
            return weak;
        }
        let strong = sign_on_interval(&base.add(&hi), iv, cfg);
        if let SignVerdict::Witness { .. } = strong {
            return strong;
        }
        if prec >= cfg.max_precision {
            return if matches!(strong, SignVerdict::Inconclusive { .. }) { strong } else { weak };
        }
        prec = (prec * 2).min(cfg.max_precision);
    }
}

/// Sign of `e^{tε}·p2 + δ − p1` on `iv`: one instance of the privacy
/// inequality for a fixed pair and output set.
pub fn check_pair_output(
    p1: &PseudoRational,
    p2: &PseudoRational,
    t: &Q,
    delta: &DeltaSpec,
    iv: &EpsInterval,
    cfg: &SignConfig,
) -> SignVerdict {
    decide(&p2.mul_exp(t).sub(p1), delta, iv, cfg)
}

/// Probability of an output set.
pub fn prob_of(d: &OutputDistribution, outputs: &[Vec<i64>]) -> PseudoRational {
    outputs.iter().fold(PseudoRational::zero(), |a, o| a.add(&d.get(o)))
}

struct PairResult {
    audit: Vec<AuditEntry>,
    witness: Option<(Vec<Vec<i64>>, Q)>,
    unknown: Vec<String>,
}

fn check_ordered_pair(
    q: &DpQuery,
    iv: &EpsInterval,
    x: &[i64],
    y: &[i64],
    d1: &OutputDistribution,
    d2: &OutputDistribution,
) -> PairResult {
    let mut res = PairResult { audit: Vec::new(), witness: None, unknown: Vec::new() };
    let candidates: Vec<(Vec<Vec<i64>>, EpsInterval)> = if q.delta.is_zero() {
        d1.probs.keys().map(|o| (vec![o.clone()], iv.clone())).collect()
    } else {
        let pieces = match worst_subset_profile(d1, d2, &q.t, iv, &q.sign) {
            Ok(p) => p,
            Err(v) => match all_subsets(d1, d2, &q.t, iv, SUBSET_FALLBACK_LIMIT) {
                Some(p) => p,
                None => {
                    res.unknown.push(format!("{x:?} vs {y:?}: {}", inconclusive_reason(&v)));
                    return res;
                }
            },
        };
        pieces.into_iter().filter(|p| !p.subset.is_empty()).map(|p| (p.subset, p.interval)).collect()
    };
    for (outs, piece) in candidates {
        let expr = prob_of(d2, &outs).mul_exp(&q.t).sub(&prob_of(d1, &outs));
        let v = decide(&expr, &q.delta, &piece, &q.sign);
        let result = match &v {
            SignVerdict::NonNegativeEverywhere => CheckResult::Holds,
            SignVerdict::Witness { eps0, .. } => CheckResult::Fails { eps0: eps0.clone() },
            SignVerdict::Inconclusive { .. } => {
                let reason = inconclusive_reason(&v);
                res.unknown.push(format!("{x:?} vs {y:?}, outputs {outs:?}: {reason}"));
                CheckResult::Unknown { reason }
            }
        };
        let witness = match &result {
            CheckResult::Fails { eps0 } => Some((outs.clone(), eps0.clone())),
            _ => None,
        };
        res.audit.push(AuditEntry {
            input: x.to_vec(),
            input2: y.to_vec(),
            outputs: outs,
            interval: piece,
            expr,
            result,
        });
        if witness.is_some() {
            res.witness = witness;
            break;
        }
    }
    res
}

/// Ordered adjacent pairs in lexicographic order.
pub fn ordered_pairs(q: &DpQuery) -> Result<Vec<(Vec<i64>, Vec<i64>)>, DpError> {
    let inputs = enumerate_valuations(&q.program, Which::Inputs, q.max_inputs)?;
    let mut pairs: Vec<(Vec<i64>, Vec<i64>)> = adjacent_pairs(&q.adjacency, &inputs)?
        .into_iter()
        .flat_map(|(x, y)| [(x.clone(), y.clone()), (y, x)])
        .collect();
    pairs.sort();
    Ok(pairs)
}

/// Range check: every output probability lies in [0, 1] on the interval.
/// A refuted range is an input error; one the sign budget cannot settle is
/// returned as a reason for an inconclusive verdict.
fn check_ranges(
    dists: &BTreeMap<Vec<i64>, OutputDistribution>,
    iv: &EpsInterval,
    cfg: &SignConfig,
) -> Result<Vec<String>, DpError> {
    let mut unsettled = Vec::new();
    for (input, d) in dists {
        for (o, p) in &d.probs {
            if p.as_constant().is_some() {
                continue;
            }
            for (f, what) in [(p.clone(), "negative"), (PseudoRational::one().sub(p), "above one")] {
                match sign_on_interval(&f, iv, cfg) {
                    SignVerdict::NonNegativeEverywhere => {}
                    SignVerdict::Witness { eps0, .. } => {
                        return Err(DpError::BadQuery(format!(
                            "Prob({input:?} -> {o:?}) is {what} at eps = {}; restrict the epsilon interval",
                            fmt_q(&eps0)
                        )))
                    }
                    v @ SignVerdict::Inconclusive { .. } => unsettled.push(format!(
                        "cannot certify Prob({input:?} -> {o:?}) is a probability: {}",
                        inconclusive_reason(&v)
                    )),
                }
            }
        }
    }
    Ok(unsettled)
}

fn check_delta(delta: &DeltaSpec, iv: &EpsInterval, cfg: &SignConfig) -> Result<(), DpError> {
    if delta.is_zero() {
        return Ok(());
    }
    if !sign_on_interval(&delta.f, iv, cfg).is_nonneg() {
        return Err(DpError::BadQuery(format!("delta {delta} is not certified non-negative on {iv}")));
    }
    let hi = delta.bounds(cfg.precision).map_err(|e| DpError::BadQuery(e.to_string()))?.1;
    if !sign_on_interval(&PseudoRational::one().sub(&hi), iv, cfg).is_nonneg() {
        return Err(DpError::BadQuery(format!("delta {delta} is not certified at most 1 on {iv}")));
    }
    Ok(())
}

/// Output distributions of every input appearing in `pairs`.
pub fn distributions(
    q: &DpQuery,
    pairs: &[(Vec<i64>, Vec<i64>)],
) -> Result<BTreeMap<Vec<i64>, OutputDistribution>, DpError> {
    let inputs: Vec<Vec<i64>> = pairs.iter().map(|(x, _)| x.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let dists = output_distributions(&q.program, &inputs, &q.build);
    let mut out = BTreeMap::new();
    for (i, d) in inputs.into_iter().zip(dists) {
        out.insert(i, d?);
    }
    Ok(out)
}

/// Decide the query. Pairs are checked in parallel; the reported witness is
/// the first in lexicographic order of `(in, in′)` and, within a pair, of
/// the output sets as enumerated.
pub fn check(q: &DpQuery) -> Result<Verdict, DpError> {
    q.validate()?;
    let iv = q.eps.interval();
    check_delta(&q.delta, &iv, &q.sign)?;
    let pairs = ordered_pairs(q)?;
    let t0 = Instant::now();
    let dists = distributions(q, &pairs)?;
    let mut exceptional = Vec::new();
    for (input, d) in &dists {
        if d.cyclic {
            let chain = build_dtmc_with(&q.program, input, &q.build).map_err(ReachError::from)?;
            match exceptional_points(&chain, &iv, &q.sign) {
                Ok(pts) => exceptional.extend(pts),
                Err(v) => return Err(DpError::BadQuery(format!("loop edges: {}", inconclusive_reason(&v)))),
            }
        }
    }
    exceptional.sort();
    exceptional.dedup();
    let unsettled_ranges = check_ranges(&dists, &iv, &q.sign)?;
    let distributions_ms = t0.elapsed().as_millis() as u64;

    let t1 = Instant::now();
    let first_witness = AtomicUsize::new(usize::MAX);
    let results: Vec<Option<PairResult>> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (x, y))| {
            if i > first_witness.load(Ordering::Relaxed) {
                return None;
            }
            let r = check_ordered_pair(q, &iv, x, y, &dists[x], &dists[y]);
            if r.witness.is_some() {
                first_witness.fetch_min(i, Ordering::Relaxed);
            }
            Some(r)
        })
        .collect();
    let inequalities_ms = t1.elapsed().as_millis() as u64;

    let stop = first_witness.load(Ordering::Relaxed);
    let mut audit = Vec::new();
    let mut unknown = unsettled_ranges;
    let mut witness = None;
    let mut pairs_checked = 0;
    for (i, r) in results.into_iter().enumerate() {
        if i > stop {
            break;
        }
        let r = r.expect("pairs up to the first witness are all checked");
        pairs_checked += 1;
        audit.extend(r.audit);
        unknown.extend(r.unknown);
        if let Some((outs, eps0)) = r.witness {
            witness = Some((pairs[i].0.clone(), pairs[i].1.clone(), outs, eps0));
        }
    }
    let t2 = Instant::now();
    let outcome = match witness {
        Some((input, input2, outputs, eps0)) => {
            let mut ce = CounterExample {
                input,
                input2,
                outputs,
                eps0,
                margin: Enclosure { lo: Q::zero(), hi: Q::zero() },
            };
            ce.margin = certify(&ce, q)?;
            Outcome::Violation { counter_example: ce }
        }
        None if unknown.is_empty() => Outcome::Private,
        None => Outcome::Inconclusive { reasons: unknown },
    };
    let certification_ms = t2.elapsed().as_millis() as u64;
    Ok(Verdict {
        outcome,
        pairs_checked,
        audit,
        exceptional_points: exceptional,
        timings: Timings { distributions_ms, inequalities_ms, certification_ms },
    })
}

/// Re-derive both probabilities of a counter-example from scratch and
/// enclose `e^{tε₀}·Prob(in′ ∈ O) + δ(ε₀) − Prob(in ∈ O)`, doubling the
/// precision until the enclosure is strictly negative.
pub fn certify(ce: &CounterExample, q: &DpQuery) -> Result<Enclosure, DpError> {
    let adjacent = ordered_pairs(q)?.iter().any(|(x, y)| *x == ce.input && *y == ce.input2);
    if !adjacent {
        return Err(DpError::Certification(format!("{:?} and {:?} are not adjacent", ce.input, ce.input2)));
    }
    if !q.eps.interval().contains(&ce.eps0) {
        return Err(DpError::Certification(format!("eps0 = {} is outside the query interval", fmt_q(&ce.eps0))));
    }
    let d1 = output_distribution_with(&q.program, &ce.input, &q.build)?;
    let d2 = output_distribution_with(&q.program, &ce.input2, &q.build)?;
    let base = prob_of(&d2, &ce.outputs).mul_exp(&q.t).sub(&prob_of(&d1, &ce.outputs));
    let mut prec = 64u32;
    let cap = q.sign.max_precision.max(4096);
    loop {
        let b = eval_interval(&base, &ce.eps0, prec);
        let dl = q.delta.eval(&ce.eps0, prec);
        if let (Ok(b), Ok(dl)) = (b, dl) {
            let m = b.add(&dl, prec);
            if m.is_negative() {
                return Ok(Enclosure { lo: m.lo_q(), hi: m.hi_q() });
            }
            if !m.contains_zero() || prec >= cap {
                return Err(DpError::Certification(format!(
                    "margin at eps0 = {} encloses [{}, {}]",
                    fmt_q(&ce.eps0),
                    fmt_q(&m.lo_q()),
                    fmt_q(&m.hi_q())
                )));
            }
        } else if prec >= cap {
            return Err(DpError::Certification("evaluation failed".into()));
        }
        prec *= 2;
    }
}

/// Re-run a violated query with fewer queries: `text` is re-parsed with
/// the constant `N` set to 1, 2, … up to `max_n`, and the first length
/// with a violation is returned with its verdict.
pub fn smallest_violation(
    text: &str,
    consts: &BTreeMap<String, i64>,
    template: &DpQuery,
    max_n: i64,
) -> Result<Option<(i64, Verdict)>, DpError> {
    for n in 1..=max_n {
        let mut c = consts.clone();
        c.insert("N".to_string(), n);
        let program = parse_program_with(text, &c)?;
        let q = DpQuery { program, ..template.clone() };
        let v = check(&q)?;
        if v.counter_example().is_some() {
            return Ok(Some((n, v)));
        }
    }
    Ok(None)
}
