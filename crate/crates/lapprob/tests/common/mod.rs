//! Shared helpers: system builders, floating evaluation and samplers used
//! as independent oracles.

#![allow(dead_code)]

use dip_lapprob::{ConstraintSystem, LinearConstraint, LinearForm, NoiseVar, Rel, Sort};
use dip_symalg::{eval_interval, PseudoRational, Q};
use num_traits::ToPrimitive;
use rand::Rng;

pub fn var(v: &str) -> LinearForm {
    LinearForm::var(v)
}

pub fn num(c: Q) -> LinearForm {
    LinearForm::constant(c)
}

pub fn cmp(l: LinearForm, rel: Rel, r: LinearForm) -> LinearConstraint {
    LinearConstraint::new(&l, rel, &r)
}

/// Midpoint of a tight enclosure, as a float.
pub fn at(f: &PseudoRational, eps: &Q) -> f64 {
    let iv = eval_interval(f, eps, 128).expect("no pole");
    ((iv.lo_q() + iv.hi_q()) / Q::from_integer(2.into())).to_f64().expect("finite")
}

pub fn qf(x: &Q) -> f64 {
    x.to_f64().expect("finite")
}

/// Inverse-CDF Laplace sample with rate `b` about `mu`.
pub fn laplace<R: Rng>(rng: &mut R, b: f64, mu: f64) -> f64 {
    let u: f64 = rng.gen::<f64>() - 0.5;
    mu - u.signum() * (1.0 - 2.0 * u.abs()).ln() / b
}

/// Two-sided geometric: difference of two geometric counts with ratio e^{−b}.
pub fn dlaplace<R: Rng>(rng: &mut R, b: f64, mu: i64) -> i64 {
    let r = (-b).exp();
    let geo = |rng: &mut R| -> i64 {
        let u: f64 = rng.gen();
        ((1.0 - u).ln() / r.ln()).floor() as i64
    };
    mu + geo(rng) - geo(rng)
}

/// Monte-Carlo frequency of `sys` at `eps`.
pub fn monte_carlo<R: Rng>(rng: &mut R, sys: &ConstraintSystem, eps: f64, n: usize) -> f64 {
    let vars: Vec<&NoiseVar> = sys.vars.values().collect();
    let cons: Vec<(Vec<(usize, f64)>, f64, Rel)> = sys
        .constraints
        .iter()
        .map(|c| {
            let coefs = c
                .form
                .coefs
                .iter()
                .map(|(v, a)| (vars.iter().position(|x| &x.id == v).expect("declared"), qf(a)))
                .collect();
            (coefs, qf(&c.form.konst), c.rel)
        })
        .collect();
    let mut hits = 0usize;
    let mut xs = vec![0.0f64; vars.len()];
    for _ in 0..n {
        for (i, v) in vars.iter().enumerate() {
            let b = qf(&v.scale) * eps;
            xs[i] = match v.sort {
                Sort::Real => laplace(rng, b, qf(&v.mean)),
                Sort::Int => dlaplace(rng, b, qf(&v.mean) as i64) as f64,
            };
        }
        let ok = cons.iter().all(|(coefs, k, rel)| {
            let s: f64 = coefs.iter().map(|(i, a)| a * xs[*i]).sum::<f64>() + k;
            match rel {
                Rel::Lt => s < 0.0,
                Rel::Le => s <= 0.0,
                Rel::Eq => s == 0.0,
                Rel::Ne => s != 0.0,
                Rel::Ge => s >= 0.0,
                Rel::Gt => s > 0.0,
            }
        });
        hits += ok as usize;
    }
    hits as f64 / n as f64
}

/// `|p̂ − p| ≤ k·σ` for a binomial frequency over `n` samples.
pub fn within_sigma(p_hat: f64, p: f64, n: usize, k: f64) -> bool {
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    (p_hat - p).abs() <= k * sigma.max(1e-12)
}
