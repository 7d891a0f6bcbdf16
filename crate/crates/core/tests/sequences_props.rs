use forchflow::sequences::{
    iterate_recurrence, limsup_integral, multiseq_threshold, oriseq_bound, oriseq_threshold, IterationMode,
};
use forchflow::{GeometricRecurrence, LogValue, RecurrenceTerm};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn term() -> impl Strategy<Value = RecurrenceTerm<f64>> {
    (-1.0f64..1.0, 1.1f64..10.0, 0.1f64..3.0).prop_map(|(la, b, mu)| RecurrenceTerm {
        a: 10f64.powf(la),
        b,
        mu,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn threshold_start_stays_below_geometric_envelope(t in term()) {
        let th = oriseq_threshold(t.a, t.b, t.mu).unwrap();
        for i in 0..=200u32 {
            let envelope = th.ln() - f64::from(i) * t.b.ln() / t.mu;
            let bound = oriseq_bound(t.a, t.b, t.mu, th, i).unwrap();
            prop_assert!((bound.ln() - envelope).abs() <= 1e-12 * envelope.abs().max(1.0));
        }
        // exactly at the threshold the iterate is an unstable fixed point of
        // the normalized map, so start a hair below it
        let start = LogValue(th.ln() + (1.0f64 - 1e-6).ln());
        let rec = GeometricRecurrence::from_log(vec![t], start).unwrap();
        let seq = iterate_recurrence(&rec, 200, IterationMode::Equality, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for (i, y) in seq.iter().enumerate() {
            let envelope = th.ln() - i as f64 * t.b.ln() / t.mu;
            prop_assert!(y.ln() <= envelope, "i = {i}");
        }
    }

    #[test]
    fn below_multiseq_threshold_converges(terms in prop::collection::vec(term(), 1..=4), frac in 0.0f64..1.0, seed in any::<u64>()) {
        let probe = GeometricRecurrence::new(terms.clone(), 0.0).unwrap();
        let th = multiseq_threshold(&probe).unwrap();
        prop_assert!(th.closed_form.ln() <= th.root.ln() + 1e-12 * th.root.ln().abs().max(1.0));
        let y0 = LogValue(th.closed_form.ln() + frac.ln());
        let rec = GeometricRecurrence::from_log(terms, y0).unwrap();
        prop_assert!(multiseq_threshold(&rec).unwrap().predicate);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eq = iterate_recurrence(&rec, 200, IterationMode::Equality, &mut rng).unwrap();
        prop_assert!(eq[200].value() < 1e-20);
        // eventually monotone
        let tail = &eq[100..];
        prop_assert!(tail.windows(2).all(|w| w[1] <= w[0]));
        let sampled = iterate_recurrence(&rec, 200, IterationMode::InequalitySampler, &mut rng).unwrap();
        prop_assert!(sampled[200].value() < 1e-20);
    }

    #[test]
    fn threshold_shrinks_when_a_grows(terms in prop::collection::vec(term(), 1..=4)) {
        let rec = GeometricRecurrence::new(terms.clone(), 0.0).unwrap();
        let doubled: Vec<_> = terms.iter().map(|t| RecurrenceTerm { a: 2.0 * t.a, ..*t }).collect();
        let rec2 = GeometricRecurrence::new(doubled, 0.0).unwrap();
        let (t1, t2) = (multiseq_threshold(&rec).unwrap(), multiseq_threshold(&rec2).unwrap());
        prop_assert!(t2.closed_form.ln() < t1.closed_form.ln());
        prop_assert!(t2.root.ln() < t1.root.ln());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn limsup_respects_limit(h in 0.2f64..5.0, f in 0.0f64..5.0, g in 0.5f64..4.0, decay in 1.0f64..5.0) {
        // h, g constant; f relaxes to its limit fast enough to be settled in the tail
        let ff = move |t: f64| f * (1.0 + (-decay * t).exp());
        let out = limsup_integral(&|_| h, &ff, &|_| g, 0.0, 50.0 / g, 0.01).unwrap();
        prop_assert!(out.hypothesis_ok);
        let limit = h * f / g;
        prop_assert!(out.observed_limsup <= limit * (1.0 + 5e-3) + 1e-12);
    }
}

#[test]
fn hypothesis_flags_short_horizon() {
    let out = limsup_integral(&|_: f64| 1.0, &|_| 1.0, &|_| 1.0, 0.0, 5.0, 0.01).unwrap();
    assert!(!out.hypothesis_ok);
    let growing_h = limsup_integral(&|t: f64| (0.5 * t).exp(), &|_| 1.0, &|_| 0.4, 0.0, 100.0, 0.01).unwrap();
    assert!(!growing_h.hypothesis_ok);
}

#[test]
fn bound_is_zero_for_zero_start() {
    let b = oriseq_bound(2.0, 3.0, 0.5, LogValue::zero(), 17).unwrap();
    assert!(b.is_zero());
    assert_eq!(b.value(), 0.0);
}
