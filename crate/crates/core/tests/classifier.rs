use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thinlab_core::classifier::{
    classify_sequence, compare_weight_classes, weight_regime, ClassOutcome, ClassifyOptions, Regime,
    SequenceDecision, SequenceSource,
};
use thinlab_core::geometry::{pow2_neg, DiskPoint, PointSequence};
use thinlab_core::series::{classify_bertrand, Decision};
use thinlab_core::weights::{RhoSpec, ThetaSpec};
use thinlab_core::witnesses::summatory_theta;

fn th(s: &str) -> ThetaSpec {
    ThetaSpec::parse(s).unwrap()
}

fn bertrand_truth(alpha: f64, beta: f64) -> Decision {
    if alpha > 1.0 || (alpha == 1.0 && beta > 1.0) {
        Decision::Convergent
    } else {
        Decision::Divergent
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn certified_bertrand_verdicts_are_never_wrong(a in 0u32..9, b in 0u32..9) {
        let (alpha, beta) = (0.5 + a as f64 * 0.125, b as f64 * 0.5 - 1.0);
        let v = classify_bertrand(alpha, beta, 1 << 14).unwrap();
        if v.tier.is_certified() {
            prop_assert_eq!(v.decision, bertrand_truth(alpha, beta));
        }
    }

    #[test]
    fn compare_is_reflexive(alpha in 0.0f64..1.0, beta in -2.0f64..2.0, c in 0.1f64..5.0) {
        let t = ThetaSpec::log_power(c, alpha, beta).unwrap();
        prop_assert_eq!(compare_weight_classes(&t, &t, 1 << 12).outcome, ClassOutcome::SameClass);
    }

    #[test]
    fn bounded_gap_means_same_class(a in 0.0f64..10.0, b in 0.0f64..10.0, c in 0.1f64..4.0) {
        for (x, y) in [
            (ThetaSpec::constant(a).unwrap(), ThetaSpec::constant(b).unwrap()),
            (ThetaSpec::log_power(a, 0.0, 0.0).unwrap(), ThetaSpec::constant(b).unwrap()),
            (ThetaSpec::log_l(c).unwrap(), ThetaSpec::log_power(c, 0.0, 1.0).unwrap()),
        ] {
            prop_assert_eq!(compare_weight_classes(&x, &y, 1 << 12).outcome, ClassOutcome::SameClass);
        }
    }

    #[test]
    fn regime_agrees_with_its_series(alpha in 0.0f64..1.5, beta in -1.0f64..3.0) {
        let t = ThetaSpec::log_power(1.0, alpha, beta).unwrap();
        let r = weight_regime(&t, &RhoSpec::infer(t.clone(), 4096), 1 << 12);
        let conv = |v: &Option<thinlab_core::series::SeriesVerdict>| {
            v.as_ref().is_some_and(|v| v.decision == Decision::Convergent && v.tier.is_certified())
        };
        match r.regime {
            Regime::AllThickSide => prop_assert!(conv(&r.thin) && !conv(&r.thick)),
            Regime::AllThinSide => prop_assert!(conv(&r.thick) && !conv(&r.thin)),
            Regime::Mixed => prop_assert!(!conv(&r.thin) && !conv(&r.thick)),
            Regime::Undecided => {}
        }
        prop_assert!(!(conv(&r.thin) && conv(&r.thick)));
    }
}

#[test]
fn thin_witness_replays_for_every_smaller_weight() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let big = th("logpow:2,1,0");
    let smaller = [th("logpow:1,1,0"), th("logpow:2,0.5,0"), th("const:1"), th("logl:1")];
    let mut checked = 0;
    for _ in 0..10 {
        let pts: Vec<DiskPoint> = (0..300)
            .map(|_| {
                let m = rng.gen_range(1..14);
                DiskPoint::new(pow2_neg(m) * rng.gen_range(0.5..1.0), rng.gen::<f64>() * std::f64::consts::TAU).unwrap()
            })
            .collect();
        let seq = PointSequence::new(pts);
        let v = classify_sequence(SequenceSource::Points(&seq), &big, &ClassifyOptions::default()).unwrap();
        if v.decision != SequenceDecision::ThinWitnessed {
            continue;
        }
        let w = v.evidence.witness.as_ref().unwrap();
        let total = v.replay_witness(&seq).unwrap().unwrap();
        for s in &smaller {
            let sub = summatory_theta(&w.function, s, &seq).unwrap().total;
            assert!(sub <= total * (1.0 + 1e-12), "{s}: {sub} > {total}");
        }
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn no_sequence_is_both_thin_and_thick() {
    for t in ["logpow:1,1,0", "const:1", "logl:-2", "logpow:1,0.5,0"] {
        let theta = th(t);
        for from in [1, 4, 10] {
            let v = classify_sequence(SequenceSource::FullCircles { from }, &theta, &ClassifyOptions::default()).unwrap();
            match v.decision {
                SequenceDecision::ThinWitnessed => assert!(v.evidence.witness.is_some(), "{t}"),
                SequenceDecision::ThickIndicated => assert!(v.evidence.witness.is_none() && v.criterion.is_some(), "{t}"),
                SequenceDecision::Undecided => {}
            }
        }
    }
}
