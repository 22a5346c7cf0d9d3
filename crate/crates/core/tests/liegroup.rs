use std::f64::consts::PI;

use artreg::liegroup::{exp_se3, inv_retract, log_se3, retract, Pose, Twist};
use nalgebra::Vector3;
use proptest::prelude::*;

fn vec3(bound: f64) -> impl Strategy<Value = Vector3<f64>> {
    [-bound..bound, -bound..bound, -bound..bound].prop_map(|[x, y, z]| Vector3::new(x, y, z))
}

/// Twists with rotation angle below pi - 0.1, where log is single valued.
fn twist() -> impl Strategy<Value = Twist> {
    (vec3(1.0), 0.0..PI - 0.1, vec3(2.0)).prop_map(|(dir, angle, v)| {
        let axis = if dir.norm() < 1e-6 { Vector3::z() } else { dir.normalize() };
        Twist::new(axis * angle, v)
    })
}

fn pose() -> impl Strategy<Value = Pose> {
    twist().prop_map(|xi| exp_se3(&xi))
}

fn pose_distance(a: &Pose, b: &Pose) -> f64 {
    (a.rotation - b.rotation).norm() + (a.translation - b.translation).norm()
}

proptest! {
    #[test]
    fn log_inverts_exp(xi in twist()) {
        let back = log_se3(&exp_se3(&xi));
        prop_assert!((back.to_vector() - xi.to_vector()).norm() < 1e-9);
    }

    #[test]
    fn exp_is_a_valid_rigid_transform(xi in twist()) {
        prop_assert!(exp_se3(&xi).is_valid(1e-9));
    }

    #[test]
    fn inv_retract_inverts_retract(base in pose(), xi in twist()) {
        let target = retract(&base, &xi);
        let back = inv_retract(&base, &target);
        prop_assert!((back.to_vector() - xi.to_vector()).norm() < 1e-8);
    }

    #[test]
    fn composition_is_associative(a in pose(), b in pose(), c in pose()) {
        let left = a.compose(&b).compose(&c);
        let right = a.compose(&b.compose(&c));
        prop_assert!(pose_distance(&left, &right) < 1e-12);
    }

    #[test]
    fn inverse_undoes_apply(p in pose(), x in vec3(1.0)) {
        let back = p.inverse().apply(&p.apply(&x));
        prop_assert!((back - x).norm() < 1e-12);
        prop_assert!(pose_distance(&p.compose(&p.inverse()), &Pose::identity()) < 1e-12);
    }

    #[test]
    fn quaternion_roundtrip(p in pose()) {
        let back = Pose::from_quaternion_wxyz(p.translation, p.quaternion_wxyz());
        prop_assert!(pose_distance(&p, &back) < 1e-12);
    }
}

#[test]
fn small_angle_branch_is_continuous() {
    let v = Vector3::new(0.1, -0.2, 0.3);
    for angle in [0.0, 1e-12, 1e-9, 1e-7, 1e-5] {
        let xi = Twist::new(Vector3::new(angle, 0.0, 0.0), v);
        let back = log_se3(&exp_se3(&xi));
        assert!((back.to_vector() - xi.to_vector()).norm() < 1e-12, "angle {angle}");
    }
}
