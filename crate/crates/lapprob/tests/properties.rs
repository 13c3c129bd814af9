//! Completeness of order decompositions, range and monotonicity of
//! returned probabilities, and agreement with sampling on random systems.

mod common;

use common::*;
use dip_lapprob::{decompose_orders, prob_system, ConstraintSystem, LinearConstraint, NoiseVar, Rel, Sort};
use dip_symalg::{eval_interval, q, Dyadic, PseudoRational, Q};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SCALES: [(i64, i64); 4] = [(1, 4), (1, 2), (1, 1), (2, 1)];

fn sample_eps(i: usize) -> Q {
    // 50 points spread over (0, 8]
    q(1 + (i as i64 * i as i64) % 97 + i as i64 * 7, 48)
}

fn random_vars(rng: &mut ChaCha8Rng, n: usize, sort: Sort) -> Vec<NoiseVar> {
    (0..n)
        .map(|i| {
            let (a, b) = SCALES[rng.gen_range(0..SCALES.len())];
            let mean = match sort {
                Sort::Real => q(rng.gen_range(-4..=4), 2),
                Sort::Int => q(rng.gen_range(-2..=2), 1),
            };
            let id = format!("v{i}");
            match sort {
                Sort::Real => NoiseVar::real(&id, q(a, b), mean),
                Sort::Int => NoiseVar::int(&id, q(a, b), mean),
            }
        })
        .collect()
}

const RELS: [Rel; 5] = [Rel::Lt, Rel::Le, Rel::Ge, Rel::Gt, Rel::Eq];

fn random_constraint(rng: &mut ChaCha8Rng, n: usize, sort: Sort) -> LinearConstraint {
    let u = rng.gen_range(0..n);
    let rel = match sort {
        Sort::Real => RELS[rng.gen_range(0..4)],
        Sort::Int => RELS[rng.gen_range(0..5)],
    };
    let c = match sort {
        Sort::Real => q(rng.gen_range(-3..=3), 2),
        Sort::Int => q(rng.gen_range(-2..=2), 1),
    };
    let lhs = var(&format!("v{u}"));
    if n > 1 && rng.gen_bool(0.7) {
        let mut w = rng.gen_range(0..n - 1);
        if w >= u {
            w += 1;
        }
        cmp(lhs, rel, var(&format!("v{w}")).plus_const(&c))
    } else {
        cmp(lhs, rel, num(c))
    }
}

fn assert_in_unit(f: &PseudoRational) {
    let slack = Dyadic::new(1.into(), -100);
    for i in 0..50 {
        let eps = sample_eps(i);
        let v = eval_interval(f, &eps, 128).unwrap();
        assert!(v.lo >= slack.neg() && v.hi <= Dyadic::one().add(&slack), "{f} at {eps} is {}..{}", v.lo_q(), v.hi_q());
    }
}

#[test]
fn real_orders_are_complete() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=4 {
        for _ in 0..3 {
            let sys = ConstraintSystem::with_vars(random_vars(&mut rng, n, Sort::Real));
            let regions = decompose_orders(&sys).unwrap();
            assert_eq!(regions.len(), (1..=n).product::<usize>());
            let mut total = PseudoRational::zero();
            for r in &regions {
                total = total.add(&prob_system(&r.system(&sys)).unwrap());
            }
            assert!(total.sub(&PseudoRational::one()).is_zero(), "n={n}: {total}");
        }
    }
}

#[test]
fn integer_weak_orders_are_complete() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let fubini = [1, 1, 3, 13];
    for n in 1..=3 {
        for _ in 0..3 {
            let sys = ConstraintSystem::with_vars(random_vars(&mut rng, n, Sort::Int));
            let regions = decompose_orders(&sys).unwrap();
            assert_eq!(regions.len(), fubini[n]);
            let mut total = PseudoRational::zero();
            for r in &regions {
                total = total.add(&prob_system(&r.system(&sys)).unwrap());
            }
            assert!(total.sub(&PseudoRational::one()).is_zero(), "n={n}: {total}");
        }
    }
}

#[test]
fn range_and_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for round in 0..24 {
        let sort = if round % 2 == 0 { Sort::Real } else { Sort::Int };
        let n = rng.gen_range(1..=3);
        let mut sys = ConstraintSystem::with_vars(random_vars(&mut rng, n, sort));
        let mut prev = PseudoRational::one();
        for _ in 0..3 {
            sys.push(random_constraint(&mut rng, n, sort));
            let p = prob_system(&sys).unwrap();
            assert_in_unit(&p);
            let gap = prev.sub(&p);
            for i in (0..50).step_by(5) {
                let v = eval_interval(&gap, &sample_eps(i), 128).unwrap();
                assert!(v.hi >= Dyadic::zero(), "adding a constraint increased the probability: {gap}");
            }
            prev = p;
        }
    }
}

#[test]
fn random_systems_agree_with_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut sampler = ChaCha8Rng::seed_from_u64(15);
    let n_samples = 1_000_000;
    for round in 0..20 {
        let sort = if round % 2 == 0 { Sort::Real } else { Sort::Int };
        let n = rng.gen_range(1..=3);
        let mut sys = ConstraintSystem::with_vars(random_vars(&mut rng, n, sort));
        for _ in 0..rng.gen_range(1..=3) {
            sys.push(random_constraint(&mut rng, n, sort));
        }
        let p = at(&prob_system(&sys).unwrap(), &q(1, 1));
        let p_hat = monte_carlo(&mut sampler, &sys, 1.0, n_samples);
        assert!(within_sigma(p_hat, p, n_samples, 3.0), "system {round} {:?}: exact {p}, sampled {p_hat}", sys.constraints);
    }
}
