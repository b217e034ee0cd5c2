mod common;

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use raylign::datagen::{random_transform, PairSpec};
use raylign::{alpha_recall, evaluate, rotation_angle, PointCloud, RecallMetric, RigidTransform};

fn transform_strategy() -> impl Strategy<Value = RigidTransform> {
    (any::<u64>(), 0.0..3.1f64, 0.0..2.0f64).prop_map(|(seed, angle, shift)| {
        common::random_transform(&mut ChaCha8Rng::seed_from_u64(seed), angle, shift)
    })
}

fn cloud_strategy() -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(prop::array::uniform3(-2.0..2.0f64), 1..40)
        .prop_map(|rows| PointCloud::new(rows.iter().map(|r| Vector3::from(*r)).collect()))
}

proptest! {
    #[test]
    fn rotation_error_is_symmetric(a in transform_strategy(), b in transform_strategy(), cloud in cloud_strategy()) {
        let ab = evaluate(&a, &b, &cloud).unwrap();
        let ba = evaluate(&b, &a, &cloud).unwrap();
        prop_assert!((ab.err_r_deg - ba.err_r_deg).abs() < 1e-9);
        prop_assert!((0.0..=180.0).contains(&ab.err_r_deg));
    }

    #[test]
    fn norm_ordering(a in transform_strategy(), b in transform_strategy(), cloud in cloud_strategy()) {
        let r = evaluate(&a, &b, &cloud).unwrap();
        let tol = 1e-12;
        prop_assert!(r.err_t_l2 <= r.err_t_l1 + tol);
        prop_assert!(r.err_t_l1 <= 3f64.sqrt() * r.err_t_l2 + tol);
        prop_assert!(r.err_pw_l2 <= r.err_pw_l1 + tol);
        prop_assert!(r.err_pw_l1 <= 3f64.sqrt() * r.err_pw_l2 + tol);
    }

    #[test]
    fn pointwise_error_ignores_order(a in transform_strategy(), b in transform_strategy(), cloud in cloud_strategy()) {
        let mut reversed: Vec<_> = cloud.points().to_vec();
        reversed.reverse();
        let x = evaluate(&a, &b, &cloud).unwrap();
        let y = evaluate(&a, &b, &PointCloud::new(reversed)).unwrap();
        prop_assert!((x.err_pw_l2 - y.err_pw_l2).abs() <= 1e-12 * x.err_pw_l2.max(1.0));
    }

    #[test]
    fn angle_matches_axis_angle(seed in any::<u64>(), angle in 0.0..3.1f64) {
        let axis = common::random_unit(&mut ChaCha8Rng::seed_from_u64(seed));
        let r = RigidTransform::from_axis_angle(&axis, angle).rotation;
        prop_assert!((rotation_angle(&r) - angle.to_degrees()).abs() < 1e-9);
    }

    #[test]
    fn recall_is_monotone(errors in prop::collection::vec(0.0..1.0f64, 1..30), alphas in prop::collection::vec(0.0..1.2f64, 1..10)) {
        let reports: Vec<_> = errors
            .iter()
            .map(|&e| raylign::EvalReport {
                pair_id: String::new(),
                err_r_deg: 0.0,
                err_t_l1: 0.0,
                err_t_l2: 0.0,
                err_pw_l1: e,
                err_pw_l2: e,
            })
            .collect();
        let curve = alpha_recall(&reports, &alphas, RecallMetric::PwL2).unwrap();
        for w in curve.recalls.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        prop_assert!(curve.recalls.iter().all(|r| (0.0..=1.0).contains(r)));
    }
}

/// Kolmogorov-Smirnov distance of `samples` from U[0, max].
fn ks_uniform(mut samples: Vec<f64>, max: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (x / max).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn euler_angles_are_uniform() {
    let spec = PairSpec::default();
    let max = spec.rotation_max_deg.to_radians();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 10_000;
    let (mut yaw, mut pitch, mut roll) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let r = random_transform(&spec, &mut rng).rotation;
        // Inverse of R = Rz(yaw) Ry(pitch) Rx(roll) away from gimbal lock.
        pitch.push((-r[(2, 0)]).asin());
        yaw.push(r[(1, 0)].atan2(r[(0, 0)]));
        roll.push(r[(2, 1)].atan2(r[(2, 2)]));
    }
    // Critical value at p = 0.001.
    let critical = 1.95 / (n as f64).sqrt();
    for (name, s) in [("yaw", yaw), ("pitch", pitch), ("roll", roll)] {
        let d = ks_uniform(s, max);
        assert!(d < critical, "{name}: KS distance {d} >= {critical}");
    }
}
