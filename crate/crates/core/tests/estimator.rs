mod common;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use proptest::prelude::*;
use wosno::estimator::{
    estimate, running_average, EstimateCache, EstimateKeys, ExactSum, PointEstimate,
};
use wosno::geometry::Ball;
use wosno::walker::{FnProblem, WalkConfig};

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Exact rational sum rounded once to the nearest double.
fn oracle_sum(xs: &[f64]) -> f64 {
    let total = xs
        .iter()
        .fold(BigRational::zero(), |acc, x| acc + rational(*x));
    let approx = total.to_f64().unwrap();
    // Nudge to the nearest representable value if the conversion truncated.
    let candidates = [
        approx,
        next_toward(approx, f64::INFINITY),
        next_toward(approx, f64::NEG_INFINITY),
    ];
    *candidates
        .iter()
        .filter(|c| c.is_finite())
        .min_by(|a, b| {
            let da = (rational(**a) - &total).abs();
            let db = (rational(**b) - &total).abs();
            da.cmp(&db)
                .then_with(|| (a.to_bits() & 1).cmp(&(b.to_bits() & 1)))
        })
        .unwrap()
}

fn next_toward(x: f64, dir: f64) -> f64 {
    if x == dir {
        return x;
    }
    if x == 0.0 {
        return if dir > 0.0 {
            f64::from_bits(1)
        } else {
            -f64::from_bits(1)
        };
    }
    let bits = x.to_bits();
    let up = (dir > x) == (x > 0.0);
    f64::from_bits(if up { bits + 1 } else { bits - 1 })
}

proptest! {
    #[test]
    fn exact_sum_is_correctly_rounded(xs in prop::collection::vec(
        prop_oneof![-1e20f64..1e20, -1.0f64..1.0, -1e-20f64..1e-20], 0..60)) {
        let mut s = ExactSum::new();
        xs.iter().for_each(|x| s.add(*x));
        prop_assert_eq!(s.value(), oracle_sum(&xs));
    }

    #[test]
    fn exact_sum_ignores_order_and_grouping(xs in prop::collection::vec(-1e6f64..1e6, 1..80), split in 0usize..80) {
        let split = split.min(xs.len());
        let mut whole = ExactSum::new();
        xs.iter().rev().for_each(|x| whole.add(*x));
        let (mut a, mut b) = (ExactSum::new(), ExactSum::new());
        xs[..split].iter().for_each(|x| a.add(*x));
        xs[split..].iter().for_each(|x| b.add(*x));
        a.merge(&b);
        prop_assert_eq!(a.value(), whole.value());
    }

    #[test]
    fn merged_variance_is_nonnegative(xs in prop::collection::vec(-1e3f64..1e3, 2..50), split in 1usize..49) {
        let split = split.min(xs.len() - 1);
        let mut a = PointEstimate::from_values(xs[..split].iter().copied());
        a.merge(&PointEstimate::from_values(xs[split..].iter().copied()));
        prop_assert!(a.m2() >= 0.0);
        prop_assert_eq!(a.n_samples(), xs.len() as u64);
    }
}

#[test]
fn oracle_sanity() {
    assert_eq!(oracle_sum(&[0.1; 10]), 1.0);
    assert_eq!(oracle_sum(&[1e100, 1.0, -1e100]), 1.0);
    let _ = BigInt::from(0);
}

fn disk() -> FnProblem<Ball<2>, impl Fn(&[f64]) -> f64 + Sync, impl Fn(&[f64]) -> f64 + Sync> {
    FnProblem::poisson(Ball::<2>::unit(), |_: &[f64]| 1.0, |x: &[f64]| 0.5 * x[0])
}

/// Runs `k` cache epochs of `l` walks at `points` of instance `inst`.
fn cached(k: u64, l: usize, inst: u32, points: &[[f64; 2]], seed: u64) -> EstimateCache {
    let cfg = WalkConfig::new(1e-3, 1000, seed);
    let mut cache = EstimateCache::with_keys((0..points.len() as u32).map(|i| (inst, i)));
    for epoch in 0..k {
        let fresh = estimate(
            &disk(),
            points,
            l,
            &cfg,
            EstimateKeys::new(inst as u64, epoch * l as u64),
        )
        .unwrap();
        let keyed: Vec<_> = fresh
            .into_iter()
            .enumerate()
            .map(|(i, e)| ((inst, i as u32), e))
            .collect();
        cache.update(&keyed).unwrap();
    }
    cache
}

#[test]
fn cache_bit_equals_one_pass_mean() {
    let points = [[0.0, 0.0], [0.5, -0.2], [-0.7, 0.1]];
    for (k, l) in [(1, 10), (7, 10), (16, 3)] {
        let cache = cached(k, l, 4, &points, 21);
        let cfg = WalkConfig::new(1e-3, 1000, 21);
        let batch = estimate(
            &disk(),
            &points,
            k as usize * l,
            &cfg,
            EstimateKeys::new(4, 0),
        )
        .unwrap();
        for (i, b) in batch.iter().enumerate() {
            let c = cache.get((4, i as u32)).unwrap();
            assert_eq!(
                c.mean().to_bits(),
                b.mean().to_bits(),
                "k={k} l={l} point {i}"
            );
            assert_eq!(c.n_samples(), k * l as u64);
        }
        assert_eq!(cache.epoch(), k);
    }
}

#[test]
fn running_average_recursion_matches_cache() {
    let points = [[0.1, 0.3]];
    let cfg = WalkConfig::new(1e-3, 1000, 22);
    let mut y = 0.0;
    let mut cache = EstimateCache::with_keys([(0, 0)]);
    for k in 1..=12u64 {
        let fresh = estimate(
            &disk(),
            &points,
            10,
            &cfg,
            EstimateKeys::new(0, (k - 1) * 10),
        )
        .unwrap();
        y = running_average(y, fresh[0].mean(), k);
        cache.update(&[((0, 0), fresh[0].clone())]).unwrap();
        assert!((cache.target((0, 0)).unwrap() - y).abs() < 1e-12);
    }
}

#[test]
fn cache_mean_is_unbiased_across_epochs() {
    let truth = -0.25;
    let one = cached(1, 2000, 0, &[[0.0, 0.0]], 23);
    let many = cached(50, 2000, 1, &[[0.0, 0.0]], 23);
    for c in [one.get((0, 0)).unwrap(), many.get((1, 0)).unwrap()] {
        assert!((c.mean() - truth).abs() <= 3.0 * c.standard_error().unwrap());
    }
}

#[test]
fn cross_replica_variance_decays_as_one_over_k() {
    let replicas = 200u32;
    let var_at = |k| {
        let ys: Vec<f64> = (0..replicas)
            .map(|r| cached(k, 10, r, &[[0.0, 0.0]], 24).target((r, 0)).unwrap())
            .collect();
        common::variance(&ys)
    };
    let v1 = var_at(1);
    for k in [4u64, 16] {
        let ratio = v1 / var_at(k) / k as f64;
        assert!(
            (1.0 / 1.3..=1.3).contains(&ratio),
            "k={k}: scaled ratio {ratio}"
        );
    }
}

#[test]
fn cache_survives_disk_roundtrip_and_resumes() {
    let points = [[0.2, 0.2], [-0.3, 0.0]];
    let cfg = WalkConfig::new(1e-3, 1000, 25);
    let cache = cached(3, 5, 2, &points, 25);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.bin");
    cache
        .write_to(std::fs::File::create(&path).unwrap(), "test")
        .unwrap();
    let (mut resumed, _) =
        EstimateCache::read_from(std::io::BufReader::new(std::fs::File::open(&path).unwrap()))
            .unwrap();
    let fresh = estimate(&disk(), &points, 5, &cfg, EstimateKeys::new(2, 15)).unwrap();
    let keyed: Vec<_> = fresh
        .into_iter()
        .enumerate()
        .map(|(i, e)| ((2, i as u32), e))
        .collect();
    resumed.update(&keyed).unwrap();
    let straight = cached(4, 5, 2, &points, 25);
    for i in 0..2 {
        assert_eq!(resumed.target((2, i)), straight.target((2, i)));
    }
}

#[test]
fn estimate_matches_analytic_disk() {
    let cfg = WalkConfig::new(1e-4, 1000, 26);
    let p = FnProblem::poisson(Ball::<2>::unit(), |_: &[f64]| 1.0, |_: &[f64]| 0.0);
    let e = estimate(&p, &[[0.0, 0.0]], 100_000, &cfg, EstimateKeys::default()).unwrap();
    assert!((e[0].mean() + 0.25).abs() <= 3.0 * e[0].standard_error().unwrap());
}
