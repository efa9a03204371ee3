use std::f64::consts::TAU;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thinlab_core::geometry::{pow2_neg, pseudo_distance, DiskPoint, PointSequence};
use thinlab_core::weights::ThetaSpec;
use thinlab_core::witnesses::{
    blaschke_filter_transform, eta_measure, eval_log_modulus, exceptional_indices, nevanlinna_t,
    nevanlinna_t_reciprocal, power_trick_exponent, summatory_theta, EtaRegion, ExceptionalScale, HInftyFunction,
};

fn random_point(rng: &mut ChaCha8Rng, max_level: u32) -> DiskPoint {
    let delta = pow2_neg(rng.gen_range(0..=max_level)) * rng.gen_range(0.5..1.0);
    DiskPoint::new(delta, rng.gen::<f64>() * TAU).unwrap()
}

fn random_product(rng: &mut ChaCha8Rng, n: usize) -> HInftyFunction {
    HInftyFunction::blaschke((0..n).map(|_| random_point(rng, 6)).collect())
}

fn circles(levels: std::ops::RangeInclusive<u32>) -> PointSequence {
    PointSequence::new(
        levels
            .flat_map(|m| (0..1u64 << m).map(move |j| DiskPoint::full_circle(m, j).unwrap()))
            .collect(),
    )
}

#[test]
fn modulus_never_exceeds_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fs = [
        random_product(&mut rng, 5),
        HInftyFunction::power(random_product(&mut rng, 3), 4).unwrap(),
        HInftyFunction::product(vec![random_product(&mut rng, 2), HInftyFunction::constant(0.3, -0.4).unwrap()]),
    ];
    for f in &fs {
        for _ in 0..10_000 {
            let z = random_point(&mut rng, 50);
            assert!(eval_log_modulus(f, &z) <= 0.0);
        }
    }
}

#[test]
fn single_factor_is_the_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let a = random_point(&mut rng, 30);
        let z = random_point(&mut rng, 30);
        let b = HInftyFunction::blaschke_factor(a);
        let got = eval_log_modulus(&b, &z).exp();
        let want = pseudo_distance(&a, &z);
        assert!((got - want).abs() <= 4.0 * f64::EPSILON * want.max(f64::EPSILON), "{got} vs {want}");
    }
}

#[test]
fn filter_transform_certifies_every_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let theta = ThetaSpec::parse("logpow:1,1,0").unwrap();
    for _ in 0..20 {
        let seq = PointSequence::new((0..200).map(|_| random_point(&mut rng, 12)).collect());
        let f = random_product(&mut rng, 3);
        let res = blaschke_filter_transform(&f, &theta, &seq).unwrap();
        assert!(res.all_ok());
        assert_eq!(res.kept.len() + res.remainder.len(), seq.len());
        // independent rescan of the product
        for (k, p) in seq.points.iter().enumerate() {
            let bound = -theta.theta_at_gap(p.delta()).unwrap();
            assert!(eval_log_modulus(&res.f1, p) <= bound, "point {k}");
        }
        for &k in &res.remainder {
            assert_eq!(eval_log_modulus(&res.f1, &seq.points[k]), f64::NEG_INFINITY);
        }
        let rem: f64 = res.remainder.iter().map(|&k| seq.points[k].delta()).sum();
        assert!((rem - res.remainder_blaschke_sum).abs() <= 1e-12 * rem.max(1.0));
    }
}

#[test]
fn reciprocal_characteristic_matches_eta() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let zeros: Vec<DiskPoint> = (0..6)
            .map(|_| DiskPoint::new(rng.gen_range(0.05..0.9), rng.gen::<f64>() * TAU).unwrap())
            .collect();
        let f = HInftyFunction::blaschke(zeros);
        let eta = eta_measure(&f, &EtaRegion::ClosedUnitDisk).unwrap();
        for r in [0.5, 0.99, 1.0 - pow2_neg(10)] {
            let t = nevanlinna_t_reciprocal(&f, r, 1 << 16).unwrap();
            // on circles inside the outermost zero only the pole term differs; Jensen makes the total constant
            assert!((t.value - eta.value).abs() <= 1e-8 * eta.value.max(1.0), "r={r}: {} vs {}", t.value, eta.value);
        }
        assert_eq!(nevanlinna_t(&f, 0.99, 1024).unwrap().value, 0.0);
    }
}

#[test]
fn exceptional_sets_shrink_with_c() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let seq = circles(3..=10);
    for scale in [ExceptionalScale::DyadicGap, ExceptionalScale::MeanSpacing] {
        let f = random_product(&mut rng, 4);
        let mut prev: Option<(std::collections::BTreeSet<u32>, f64)> = None;
        for e in 0..=10 {
            let rep = exceptional_indices(&f, &seq, (1u32 << e) as f64, scale).unwrap();
            if let Some((j, d)) = &prev {
                assert!(rep.j.is_subset(j));
                assert!(rep.excluded_density <= *d);
            }
            prev = Some((rep.j, rep.excluded_density));
        }
    }
}

proptest! {
    #[test]
    fn summatory_is_additive(seed in any::<u64>(), split in 1usize..99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<DiskPoint> = (0..100).map(|_| random_point(&mut rng, 20)).collect();
        let f = random_product(&mut rng, 2);
        let theta = ThetaSpec::parse("const:1").unwrap();
        let whole = summatory_theta(&f, &theta, &PointSequence::new(pts.clone())).unwrap();
        let a = summatory_theta(&f, &theta, &PointSequence::new(pts[..split].to_vec())).unwrap();
        let b = summatory_theta(&f, &theta, &PointSequence::new(pts[split..].to_vec())).unwrap();
        prop_assert!((whole.total - (a.total + b.total)).abs() <= 1e-13 * whole.total.max(1e-300));
        let by_level: f64 = whole.per_annulus.values().sum();
        prop_assert!((whole.total - by_level).abs() <= 1e-13 * whole.total.max(1e-300));
        prop_assert_eq!(whole.running.last().map(|r| r.0), Some(100));
    }

    #[test]
    fn power_exponent_is_minimal(l in 1e-3f64..10.0) {
        let m = power_trick_exponent(l).unwrap();
        prop_assert!((m - 1) as f64 * l / 2.0 > 1.0);
        prop_assert!(m == 2 || (m - 2) as f64 * l / 2.0 <= 1.0);
    }
}
