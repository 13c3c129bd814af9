//! Exact probabilities of conjunctions of linear comparisons over independent
//! Laplace and discrete Laplace variables, as pseudo-rational functions of ε.
//!
//! Systems are first brought to difference form (`X − Y ≤ c`, `±X ≤ c`) by
//! rescaling variables, split into independent components, and each
//! component is integrated (or summed) variable by variable. Every
//! elimination step splits the domain at the density kink and at the choice
//! of the binding lower/upper bound, so each piece integrates a
//! polynomial-times-exponential in closed form.

mod dbm;
mod integrate;
mod laurent;
mod normal;
mod orders;
mod truncated;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Mutex, OnceLock};

use dip_symalg::{fmt_q, PseudoRational, Q};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

pub use laurent::EpsLaurent;
pub use orders::{decompose_orders, OrderRegion};
pub use truncated::prob_int_truncated;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    Real,
    Int,
}

/// `Lap(aε, μ)` for the real sort, `DLap(aε, μ)` for the integer sort.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NoiseVar {
    pub id: String,
    pub sort: Sort,
    #[serde(with = "dip_symalg::qserde")]
    pub scale: Q,
    #[serde(with = "dip_symalg::qserde")]
    pub mean: Q,
}

impl NoiseVar {
    pub fn real(id: &str, scale: Q, mean: Q) -> Self {
        NoiseVar { id: id.into(), sort: Sort::Real, scale, mean }
    }

    pub fn int(id: &str, scale: Q, mean: Q) -> Self {
        NoiseVar { id: id.into(), sort: Sort::Int, scale, mean }
    }
}

/// `Σ c_i · x_i + konst`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearForm {
    pub coefs: BTreeMap<String, Q>,
    pub konst: Q,
}

impl LinearForm {
    pub fn constant(c: Q) -> Self {
        LinearForm { coefs: BTreeMap::new(), konst: c }
    }

    pub fn var(id: &str) -> Self {
        let mut coefs = BTreeMap::new();
        coefs.insert(id.to_string(), Q::from_integer(1.into()));
        LinearForm { coefs, konst: Q::zero() }
    }

    pub fn add(&self, o: &LinearForm) -> LinearForm {
        let mut coefs = self.coefs.clone();
        for (k, v) in &o.coefs {
            let e = coefs.entry(k.clone()).or_insert_with(Q::zero);
            *e += v;
            if e.is_zero() {
                coefs.remove(k);
            }
        }
        LinearForm { coefs, konst: &self.konst + &o.konst }
    }

    pub fn scale(&self, c: &Q) -> LinearForm {
        if c.is_zero() {
            return LinearForm::default();
        }
        LinearForm { coefs: self.coefs.iter().map(|(k, v)| (k.clone(), v * c)).collect(), konst: &self.konst * c }
    }

    pub fn sub(&self, o: &LinearForm) -> LinearForm {
        self.add(&o.scale(&Q::from_integer((-1).into())))
    }

    pub fn plus_const(&self, c: &Q) -> LinearForm {
        LinearForm { coefs: self.coefs.clone(), konst: &self.konst + c }
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.coefs.keys()
    }

    pub fn is_constant(&self) -> bool {
        self.coefs.is_empty()
    }
}

impl fmt::Display for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.coefs {
            let neg = c.is_negative();
            if !first {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            } else if neg {
                write!(f, "-")?;
            }
            let a = c.abs();
            if a == Q::from_integer(1.into()) {
                write!(f, "{v}")?;
            } else {
                write!(f, "{}*{v}", fmt_q(&a))?;
            }
            first = false;
        }
        if first {
            return write!(f, "{}", fmt_q(&self.konst));
        }
        if !self.konst.is_zero() {
            let neg = self.konst.is_negative();
            write!(f, "{}{}", if neg { " - " } else { " + " }, fmt_q(&self.konst.abs()))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rel {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Rel {
    pub fn negate(self) -> Rel {
        match self {
            Rel::Lt => Rel::Ge,
            Rel::Le => Rel::Gt,
            Rel::Eq => Rel::Ne,
            Rel::Ne => Rel::Eq,
            Rel::Ge => Rel::Lt,
            Rel::Gt => Rel::Le,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Eq => "==",
            Rel::Ne => "!=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        }
    }

    /// Truth value of `x rel 0` for a constant `x`.
    pub fn holds(self, x: &Q) -> bool {
        match self {
            Rel::Lt => x.is_negative(),
            Rel::Le => !x.is_positive(),
            Rel::Eq => x.is_zero(),
            Rel::Ne => !x.is_zero(),
            Rel::Ge => !x.is_negative(),
            Rel::Gt => x.is_positive(),
        }
    }
}

/// `lhs rel rhs`, stored as `form rel 0` with `form = lhs − rhs`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearConstraint {
    pub form: LinearForm,
    pub rel: Rel,
}

impl LinearConstraint {
    pub fn new(lhs: &LinearForm, rel: Rel, rhs: &LinearForm) -> Self {
        LinearConstraint { form: lhs.sub(rhs), rel }
    }

    pub fn negate(&self) -> Self {
        LinearConstraint { form: self.form.clone(), rel: self.rel.negate() }
    }
}

impl fmt::Display for LinearConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} 0", self.form, self.rel.symbol())
    }
}

impl Serialize for LinearConstraint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Conjunction of constraints over declared noise variables.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ConstraintSystem {
    pub vars: BTreeMap<String, NoiseVar>,
    pub constraints: BTreeSet<LinearConstraint>,
}

impl ConstraintSystem {
    pub fn new() -> Self {
        ConstraintSystem::default()
    }

    pub fn with_vars<I: IntoIterator<Item = NoiseVar>>(vars: I) -> Self {
        ConstraintSystem { vars: vars.into_iter().map(|v| (v.id.clone(), v)).collect(), constraints: BTreeSet::new() }
    }

    pub fn declare(&mut self, v: NoiseVar) {
        self.vars.insert(v.id.clone(), v);
    }

    pub fn push(&mut self, c: LinearConstraint) {
        self.constraints.insert(c);
    }

    pub fn and(&self, c: &LinearConstraint) -> Self {
        let mut s = self.clone();
        s.push(c.clone());
        s
    }

    fn check(&self) -> Result<(), ProbError> {
        for c in &self.constraints {
            let mut sort = None;
            for v in c.form.vars() {
                let nv = self.vars.get(v).ok_or_else(|| ProbError::UnknownVar(v.clone()))?;
                if !nv.scale.is_positive() {
                    return Err(ProbError::Unsupported(format!("non-positive scale for {v}")));
                }
                if nv.sort == Sort::Int && !nv.mean.is_integer() {
                    return Err(ProbError::Unsupported(format!("non-integer mean for {v}")));
                }
                match sort {
                    None => sort = Some(nv.sort),
                    Some(s) if s != nv.sort => return Err(ProbError::MixedSort(c.to_string())),
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProbError {
    #[error("unsupported system: {0}")]
    Unsupported(String),
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("undeclared variable {0}")]
    UnknownVar(String),
    #[error("comparison mixes real and integer variables: {0}")]
    MixedSort(String),
    #[error("enumeration too large: {0}")]
    TooLarge(String),
}

type Cache = Mutex<HashMap<normal::Component, PseudoRational>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn component_prob(c: &normal::Component) -> Result<PseudoRational, ProbError> {
    if let Some(p) = cache().lock().expect("cache lock").get(c) {
        return Ok(p.clone());
    }
    let p = integrate::component_probability(c)?;
    cache().lock().expect("cache lock").insert(c.clone(), p.clone());
    Ok(p)
}

fn prob_normalized(parts: &[normal::Normalized]) -> Result<PseudoRational, ProbError> {
    let mut total = PseudoRational::zero();
    for part in parts {
        let mut p = PseudoRational::one();
        for c in &part.components {
            let cp = component_prob(c)?;
            p = p.mul(&cp);
            if p.is_zero() {
                break;
            }
        }
        total = total.add(&p);
    }
    Ok(total)
}

/// Probability of a system whose constraints may mix sorts across
/// (necessarily independent) constraints.
pub fn prob_system(sys: &ConstraintSystem) -> Result<PseudoRational, ProbError> {
    sys.check()?;
    let parts = normal::normalize(sys)?;
    prob_normalized(&parts)
}

/// Probability of a real-sort system.
pub fn prob_real_system(sys: &ConstraintSystem) -> Result<PseudoRational, ProbError> {
    sys.check()?;
    if sys.vars.values().any(|v| v.sort != Sort::Real) {
        return Err(ProbError::MixedSort("integer variable in a real system".into()));
    }
    prob_system(sys)
}

/// Probability of an integer-sort system (difference form up to one-variable
/// rescaling; other shapes are `Unsupported`, see [`prob_int_truncated`]).
pub fn prob_int_system(sys: &ConstraintSystem) -> Result<PseudoRational, ProbError> {
    sys.check()?;
    if sys.vars.values().any(|v| v.sort != Sort::Int) {
        return Err(ProbError::MixedSort("real variable in an integer system".into()));
    }
    prob_system(sys)
}

/// `P(sys ∧ extra) / P(sys)`, or 0 when `P(sys) ≡ 0`.
///
/// Only the independent components that `extra` touches are recomputed.
pub fn conditional_prob(sys: &ConstraintSystem, extra: &LinearConstraint) -> Result<PseudoRational, ProbError> {
    sys.check()?;
    let both = sys.and(extra);
    both.check()?;
    let touched: BTreeSet<String> = extra.form.vars().cloned().collect();
    let relevant = normal::restrict_to_touched(sys, &touched);
    let relevant_both = relevant.and(extra);
    let denom = prob_system(&relevant)?;
    if denom.is_zero() {
        return Ok(PseudoRational::zero());
    }
    let num = prob_system(&relevant_both)?;
    Ok(num.div(&denom).expect("nonzero denominator"))
}
