use dip_symalg::{
    eval_interval, isolate_roots, parse_pseudo_rational, q, sign_on_interval, EpsInterval, PseudoPoly, PseudoRational,
    SignConfig, SignVerdict, Q,
};
use proptest::prelude::*;

fn rates() -> Vec<Q> {
    vec![q(0, 1), q(1, 4), q(1, 2), q(1, 1), q(3, 2), q(-1, 2)]
}

fn arb_numerator() -> impl Strategy<Value = PseudoPoly> {
    prop::collection::vec((-6i64..=6, 1i64..=4, 0u32..=2, 0usize..6), 1..=4).prop_map(|ts| {
        let r = rates();
        let mut p = PseudoPoly::zero();
        for (n, d, pow, e) in ts {
            p = p.add(&PseudoPoly::monomial(q(n, d), pow, r[e].clone()));
        }
        p
    })
}

fn arb_interval() -> impl Strategy<Value = EpsInterval> {
    prop_oneof![
        Just(EpsInterval::all()),
        (1i64..=20).prop_map(|h| EpsInterval::up_to(q(h, 4))),
        (1i64..=10, 1i64..=20).prop_map(|(l, w)| EpsInterval::closed(q(l, 8), q(l, 8) + q(w, 4))),
        (1i64..=10).prop_map(|l| EpsInterval::new(Some(q(l, 4)), None).unwrap()),
    ]
}

/// `n` rational points of `iv`; unbounded ends are sampled up to 64.
fn sample_points(iv: &EpsInterval, n: i64) -> Vec<Q> {
    let lo = iv.lo.clone().unwrap_or_else(|| q(0, 1));
    let hi = iv.hi.clone().unwrap_or_else(|| q(64, 1));
    (1..=n)
        .map(|k| {
            let x = &lo + (&hi - &lo) * q(k, n);
            if x == q(0, 1) { q(1, 1 << 20) } else { x }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sign_decision_is_sound(num in arb_numerator(), iv in arb_interval(), den_kind in 0usize..3) {
        let den = match den_kind {
            0 => PseudoPoly::one(),
            1 => parse_pseudo_rational("1 + exp(eps/2)").unwrap().num().clone(),
            _ => parse_pseudo_rational("2 + eps").unwrap().num().clone(),
        };
        let f = PseudoRational::new(num, den).unwrap();
        let cfg = SignConfig { depth: 24, ..SignConfig::default() };
        match sign_on_interval(&f, &iv, &cfg) {
            SignVerdict::NonNegativeEverywhere => {
                for x in sample_points(&iv, 1000) {
                    let v = eval_interval(&f, &x, 64).unwrap();
                    prop_assert!(!v.is_negative(), "certified negative at {} for {} on {}", x, f, iv);
                }
            }
            SignVerdict::Witness { eps0, enclosure } => {
                prop_assert!(iv.contains(&eps0));
                prop_assert!(enclosure.is_negative());
                let v = eval_interval(&f, &eps0, 256).unwrap();
                prop_assert!(v.is_negative());
            }
            SignVerdict::Inconclusive { .. } => {}
        }
    }

    #[test]
    fn isolated_roots_bracket_sign_changes(num in arb_numerator(), iv in arb_interval()) {
        prop_assume!(!num.is_zero());
        let f = PseudoRational::from_poly(num);
        let cfg = SignConfig { depth: 24, ..SignConfig::default() };
        if let Ok(roots) = isolate_roots(&f, &iv, &cfg) {
            // between consecutive isolating intervals the sign is constant:
            // every certified sign change among the samples lies in a root interval
            let pts = sample_points(&iv, 250);
            let mut last: Option<(Q, bool)> = None;
            for x in pts {
                let v = eval_interval(&f, &x, 96).unwrap();
                if v.contains_zero() { continue; }
                let pos = v.is_positive();
                if let Some((px, ppos)) = &last {
                    if *ppos != pos {
                        let hit = roots.iter().any(|r| r.hi >= *px && r.lo <= x);
                        prop_assert!(hit, "sign change in [{}, {}] not covered by {:?}", px, x, roots);
                    }
                }
                last = Some((x, pos));
            }
        }
    }
}

#[test]
fn decision_examples() {
    let cfg = SignConfig::default();
    let f = parse_pseudo_rational("exp(eps) - 1 - eps").unwrap();
    assert_eq!(sign_on_interval(&f, &EpsInterval::all(), &cfg), SignVerdict::NonNegativeEverywhere);
    let g = parse_pseudo_rational("exp(eps)*(1 - eps) - (1 + eps)").unwrap();
    match sign_on_interval(&g, &EpsInterval::up_to(q(1, 1)), &cfg) {
        SignVerdict::Witness { eps0, enclosure } => {
            assert!(eps0 <= q(9, 34));
            assert!(enclosure.is_negative());
        }
        v => panic!("{v:?}"),
    }
    assert!(sign_on_interval(&PseudoRational::zero(), &EpsInterval::up_to(q(1, 1)), &cfg).is_nonneg());
}

#[test]
fn root_examples() {
    let cfg = SignConfig::default();
    let f = parse_pseudo_rational("exp(eps) - 2").unwrap();
    let r = isolate_roots(&f, &EpsInterval::all(), &cfg).unwrap();
    assert_eq!(r.len(), 1);
    // ln 2 = 0.693147...
    assert!(r[0].lo <= q(693147, 1000000) && q(693148, 1000000) <= r[0].hi);
    assert!(isolate_roots(&parse_pseudo_rational("exp(eps)").unwrap(), &EpsInterval::all(), &cfg).unwrap().is_empty());
    let h = parse_pseudo_rational("(1 + eps) - exp(eps)*(1 - eps)").unwrap();
    assert!(isolate_roots(&h, &EpsInterval::up_to(q(1, 1)), &cfg).unwrap().is_empty());
}
