//! Worked values: closed forms checked by `is_zero` identities, and the
//! two threshold-query probabilities checked against sampling.

mod common;

use common::*;
use dip_lapprob::{
    conditional_prob, decompose_orders, prob_int_system, prob_int_truncated, prob_real_system, ConstraintSystem, NoiseVar,
    ProbError, Rel,
};
use dip_symalg::{eval_interval, parse_pseudo_rational, q, PseudoRational, Q};
use num_traits::{Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Threshold `X0 ~ Lap(ε/2, 0)`, answers `X1, X2 ~ Lap(ε/4, u/v)`; the event
/// "first answer below, second at or above the threshold".
fn bottom_then_top(u: i64, v: i64) -> ConstraintSystem {
    ConstraintSystem::with_vars([
        NoiseVar::real("x0", q(1, 2), q(0, 1)),
        NoiseVar::real("x1", q(1, 4), q(u, 1)),
        NoiseVar::real("x2", q(1, 4), q(v, 1)),
    ])
    .and(&cmp(var("x1"), Rel::Lt, var("x0")))
    .and(&cmp(var("x2"), Rel::Ge, var("x0")))
}

/// `lim_{ε→0⁺}` from the lowest nonvanishing Taylor coefficients.
fn limit_at_zero(f: &PseudoRational) -> Q {
    let first = |p: &dip_symalg::PseudoPoly| (0..64).find(|k| !p.taylor_coeff(*k).is_zero()).expect("nonzero");
    let kn = f.num().taylor_coeff(0);
    if f.is_zero() {
        return kn;
    }
    let (a, b) = (first(f.num()), first(f.den()));
    assert!(a >= b, "limit is infinite");
    if a > b {
        return Q::zero();
    }
    f.num().taylor_coeff(a) / f.den().taylor_coeff(b)
}

#[test]
fn laplace_tail_closed_form() {
    for (a, mu) in [(q(1, 1), q(1, 1)), (q(1, 4), q(3, 1)), (q(2, 1), q(1, 3))] {
        let sys = ConstraintSystem::with_vars([NoiseVar::real("x", a.clone(), mu.clone())])
            .and(&cmp(var("x"), Rel::Ge, num(q(0, 1))));
        let want = PseudoRational::one().sub(&PseudoRational::exp(-(&a * &mu)).scale(&q(1, 2)));
        assert!(prob_real_system(&sys).unwrap().sub(&want).is_zero());
    }
}

#[test]
fn symmetric_difference_is_half() {
    let sys = ConstraintSystem::with_vars([NoiseVar::real("x1", q(1, 4), q(0, 1)), NoiseVar::real("x0", q(1, 2), q(0, 1))])
        .and(&cmp(var("x1"), Rel::Lt, var("x0")));
    assert_eq!(prob_real_system(&sys).unwrap(), PseudoRational::constant(q(1, 2)));
}

#[test]
fn threshold_pair_on_equal_inputs() {
    let r2 = prob_real_system(&bottom_then_top(1, 1)).unwrap();
    let want = parse_pseudo_rational("(-22 + 32*exp(eps/4) - 3*eps)/(48*exp(eps/2))").unwrap();
    assert!(r2.sub(&want).is_zero(), "got {r2}");
}

#[test]
fn threshold_pair_on_shifted_inputs() {
    let sys = bottom_then_top(0, 1);
    let r1 = prob_real_system(&sys).unwrap();
    assert_eq!(limit_at_zero(&r1), q(5, 24));
    let form = parse_pseudo_rational("(24*exp(3*eps/4) - 21*exp(eps/2) + 8*exp(eps/4) - 1)/(48*exp(3*eps/4))").unwrap();
    assert!(r1.sub(&form).is_zero(), "got {r1}");
    assert_eq!(limit_at_zero(&prob_real_system(&bottom_then_top(1, 1)).unwrap()), q(5, 24));
    // the conditional given the first comparison, times P(x1 < x0) = 1/2
    let base = ConstraintSystem::with_vars(sys.vars.values().cloned()).and(&cmp(var("x1"), Rel::Lt, var("x0")));
    let v = conditional_prob(&base, &cmp(var("x2"), Rel::Ge, var("x0"))).unwrap();
    assert!(v.scale(&q(1, 2)).sub(&r1).is_zero());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    for eps in [q(1, 2), q(1, 1), q(2, 1)] {
        let p = at(&r1, &eps);
        let n = 1_000_000;
        let p_hat = monte_carlo(&mut rng, &sys, qf(&eps), n);
        assert!(within_sigma(p_hat, p, n, 3.0), "eps={eps}: exact {p}, sampled {p_hat}");
    }
}

#[test]
fn discrete_laplace_masses() {
    for a in [q(1, 1), q(1, 2), q(3, 1)] {
        let z = NoiseVar::int("z", a.clone(), q(-2, 1));
        let base = ConstraintSystem::with_vars([z]);
        let r = PseudoRational::exp(-a.clone());
        let one = PseudoRational::one();
        let point = one.sub(&r).div(&one.add(&r)).unwrap();
        let eq = prob_int_system(&base.and(&cmp(var("z"), Rel::Eq, num(q(-2, 1))))).unwrap();
        assert!(eq.sub(&point).is_zero());
        let ge = prob_int_system(&base.and(&cmp(var("z"), Rel::Ge, num(q(-2, 1))))).unwrap();
        assert!(ge.sub(&one.div(&one.add(&r)).unwrap()).is_zero());
    }
}

#[test]
fn discrete_tie_probability_matches_truncation() {
    let sys = ConstraintSystem::with_vars([NoiseVar::int("z1", q(1, 1), q(0, 1)), NoiseVar::int("z2", q(1, 1), q(0, 1))])
        .and(&cmp(var("z1"), Rel::Eq, var("z2")));
    let exact = prob_int_system(&sys).unwrap();
    // Σ f(i)² = C² (1 + r²)/(1 − r²), C = (1 − r)/(1 + r), r = e^{−ε}
    let closed = parse_pseudo_rational("((1 - exp(-eps))/(1 + exp(-eps)))^2 * (1 + exp(-2*eps))/(1 - exp(-2*eps))").unwrap();
    assert!(exact.sub(&closed).is_zero());
    let tail = Q::new(1.into(), num_bigint::BigInt::from(10).pow(30));
    for eps in [q(1, 2), q(1, 1), q(2, 1)] {
        let t = prob_int_truncated(&sys, &eps, &tail).unwrap();
        let e = eval_interval(&exact, &eps, 256).unwrap();
        assert!(t.lo_q() <= e.hi_q() && e.lo_q() <= t.hi_q(), "enclosures disagree at {eps}");
        assert!(t.hi_q() - t.lo_q() <= &tail * q(2, 1) + q(1, 1) / Q::from_integer(num_bigint::BigInt::from(1) << 100usize));
    }
}

#[test]
fn truncated_trivial_cases() {
    let z = NoiseVar::int("z", q(1, 1), q(0, 1));
    let tail = q(1, 1_000_000);
    let empty = prob_int_truncated(&ConstraintSystem::with_vars([z.clone()]), &q(1, 1), &tail).unwrap();
    assert_eq!((empty.lo_q(), empty.hi_q()), (q(1, 1), q(1, 1)));
    let contra = ConstraintSystem::with_vars([z])
        .and(&cmp(var("z"), Rel::Lt, num(q(0, 1))))
        .and(&cmp(var("z"), Rel::Gt, num(q(0, 1))));
    let c = prob_int_truncated(&contra, &q(1, 1), &tail).unwrap();
    assert_eq!((c.lo_q(), c.hi_q()), (q(0, 1), q(0, 1)));
}

#[test]
fn general_integer_coefficients_are_routed_to_truncation() {
    let sys = ConstraintSystem::with_vars([NoiseVar::int("z1", q(1, 1), q(0, 1)), NoiseVar::int("z2", q(1, 1), q(0, 1))])
        .and(&cmp(var("z1").scale(&q(2, 1)), Rel::Le, var("z2")));
    assert!(matches!(prob_int_system(&sys), Err(ProbError::Unsupported(_))));
    let t = prob_int_truncated(&sys, &q(1, 1), &q(1, 1_000_000_000)).unwrap();
    assert!(t.lo_q().is_positive() && t.hi_q() < q(1, 1));
}

#[test]
fn order_regions() {
    let two = ConstraintSystem::with_vars([NoiseVar::real("x0", q(1, 1), q(0, 1)), NoiseVar::real("x1", q(1, 1), q(0, 1))]);
    assert_eq!(decompose_orders(&two).unwrap().len(), 2);
    let one = decompose_orders(&two.and(&cmp(var("x1"), Rel::Lt, var("x0")))).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].order, vec!["x1", "x0"]);
    let ints = ConstraintSystem::with_vars([NoiseVar::int("z1", q(1, 1), q(0, 1)), NoiseVar::int("z2", q(1, 1), q(0, 1))])
        .and(&cmp(var("z1"), Rel::Le, var("z2")))
        .and(&cmp(var("z2"), Rel::Le, var("z1")));
    let r = decompose_orders(&ints).unwrap();
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].ties, vec![true]);
}

#[test]
fn conditional_examples() {
    let sys = ConstraintSystem::with_vars([NoiseVar::real("x0", q(1, 1), q(0, 1)), NoiseVar::real("x1", q(1, 1), q(0, 1))]);
    assert_eq!(conditional_prob(&sys, &cmp(var("x1"), Rel::Lt, var("x0"))).unwrap(), PseudoRational::constant(q(1, 2)));
    let null = sys.and(&cmp(var("x1"), Rel::Eq, var("x0")));
    assert!(conditional_prob(&null, &cmp(var("x1"), Rel::Lt, var("x0"))).unwrap().is_zero());
}
