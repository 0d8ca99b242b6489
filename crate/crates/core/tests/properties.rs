use nalgebra::Matrix3;
use proptest::prelude::*;

use vtol_nav::controller::{
    desired_quaternion, saturation_psi, thrust_command, AuxiliaryState,
    ControllerGains, DesiredTrajectory, Trajectory,
};
use vtol_nav::dynamics::{integrate_step, ControlCommand, TrueState, VehicleParams};
use vtol_nav::liegroup::{
    attitude_distance, e3, pa_vex, se23_exp, skew, so3_exp, vex, Mat3, Mat5, Rotation,
    TangentElement, UnitQuaternion, Vec3,
};
use vtol_nav::sensing::{svd_attitude, WeightedPair};

fn vec3(scale: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-scale..scale).prop_map(Vec3::from)
}

fn rotation() -> impl Strategy<Value = Rotation> {
    (vec3(1.0), 0.0..std::f64::consts::PI).prop_filter_map("axis", |(axis, angle)| {
        let n = axis.norm();
        (n > 1e-3).then(|| so3_exp(&(axis / n * angle)))
    })
}

fn quaternion() -> impl Strategy<Value = UnitQuaternion> {
    (-1.0..1.0f64, vec3(1.0)).prop_filter_map("zero", |(w, v)| UnitQuaternion::new(w, v).ok())
}

fn ortho_error(m: &Mat3) -> f64 {
    (m * m.transpose() - Mat3::identity()).abs().max()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn so3_exp_is_a_rotation(y in vec3(10.0)) {
        let r = so3_exp(&y);
        prop_assert!(ortho_error(r.matrix()) < 1e-12);
        prop_assert!((r.matrix().determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lemma_distance_identity(r in rotation()) {
        let d = attitude_distance(&r);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((pa_vex(r.matrix()).norm_squared() - 4.0 * (1.0 - d) * d).abs() < 1e-12);
    }

    #[test]
    fn vex_inverts_skew(y in vec3(100.0)) {
        prop_assert_eq!(vex(&skew(&y)).unwrap(), y);
    }

    #[test]
    fn skew_conjugation(r in rotation(), y in vec3(5.0)) {
        let m = r.matrix();
        prop_assert!((skew(&(m * y)) - m * skew(&y) * m.transpose()).abs().max() < 1e-12);
    }

    #[test]
    fn trace_identity(a in prop::array::uniform9(-5.0..5.0f64), y in vec3(5.0)) {
        let a = Matrix3::from_row_slice(&a);
        prop_assert!(((a * skew(&y)).trace() + 2.0 * pa_vex(&a).dot(&y)).abs() < 1e-12);
    }

    #[test]
    fn se23_exp_inverts_with_negated_step(
        w in vec3(5.0), v in vec3(5.0), a in vec3(5.0), kappa in -2.0..2.0f64, dt in 1e-4..0.05f64
    ) {
        let u = TangentElement::new(w, v, a, kappa);
        let prod = se23_exp(&u, dt) * se23_exp(&u, -dt);
        prop_assert!((prod - Mat5::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn quaternion_sign_invariance(q in quaternion()) {
        let neg = UnitQuaternion::from_raw(-q.w, -q.v);
        prop_assert!((q.to_rotation().matrix() - neg.to_rotation().matrix()).abs().max() < 1e-14);
        prop_assert!(q.w >= 0.0);
    }

    #[test]
    fn quaternion_composition_reverses_order(a in quaternion(), b in quaternion()) {
        let lhs = a.product(&b).to_rotation();
        let rhs = b.to_rotation().matrix() * a.to_rotation().matrix();
        prop_assert!((lhs.matrix() - rhs).abs().max() < 1e-12);
    }

    #[test]
    fn quaternion_roundtrip(r in rotation()) {
        let back = UnitQuaternion::from_rotation(&r).to_rotation();
        prop_assert!((back.matrix() - r.matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn svd_attitude_is_proper(r in rotation(), noise in prop::array::uniform3(vec3(0.3))) {
        let refs = [Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, -1.0, -1.0), Vec3::new(1.0, 2.0, 0.5)];
        let pairs: Vec<WeightedPair> = refs
            .iter()
            .zip(noise.iter())
            .map(|(v, n)| WeightedPair { body: r.matrix() * v + n, inertial: *v, weight: 1.0 })
            .collect();
        if let Ok(ry) = svd_attitude(&pairs) {
            prop_assert!((ry.matrix().determinant() - 1.0).abs() < 1e-10);
            prop_assert!(ortho_error(ry.matrix()) < 1e-10);
        }
    }

    #[test]
    fn psi_stays_in_open_interval(x in vec3(50.0)) {
        let (psi, factor) = saturation_psi(&x);
        prop_assert!(psi.iter().all(|p| p.abs() <= 1.0));
        prop_assert!(factor.iter().all(|f| (0.0..=1.0).contains(f)));
    }

    #[test]
    fn thrust_within_analytic_bound(theta in vec3(100.0), theta_dot in vec3(100.0), t in 0.0..50.0f64) {
        let (p, g) = (VehicleParams::default(), ControllerGains::default());
        let traj = Trajectory::figure_eight();
        let aux = AuxiliaryState { theta, theta_dot, theta_ddot: Vec3::zeros() };
        let des = traj.eval(t);
        let (_, thrust) = thrust_command(&aux, &des, &g, &p);
        // ψ saturates per component, so ‖ψ‖ reaches √3
        let sharp = p.mass()
            * (p.gravity() + des.acceleration.norm() + 3f64.sqrt() * (g.k_theta1() + g.k_theta2()));
        prop_assert!(thrust >= 0.0 && thrust <= sharp + 1e-12);
    }

    #[test]
    fn desired_attitude_aligns_thrust(f in vec3(5.0)) {
        let p = VehicleParams::default();
        let thrust = p.mass() * (p.gravity() * e3() - f).norm();
        let q = desired_quaternion(&f, thrust, &p).unwrap();
        let r = q.to_rotation();
        let lhs = thrust / p.mass() * r.matrix().transpose() * e3();
        prop_assert!((lhs - (p.gravity() * e3() - f)).norm() < 1e-10);
    }

    #[test]
    fn torque_free_step_conserves_energy(w in vec3(3.0), r in rotation()) {
        let p = VehicleParams::default();
        let s = TrueState { attitude: r, omega: w, position: Vec3::zeros(), velocity: Vec3::zeros() };
        let u = ControlCommand { torque: Vec3::zeros(), thrust: 0.0 };
        let next = integrate_step(&s, &u, &p, 1e-3);
        let j = p.inertia();
        let e = |w: &Vec3| 0.5 * w.dot(&(j * w));
        prop_assert!((e(&next.omega) - e(&w)).abs() <= 1e-12 * e(&w).max(1e-12));
        prop_assert!(ortho_error(next.attitude.matrix()) < 1e-12);
    }
}
