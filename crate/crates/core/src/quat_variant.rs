//! Unit-quaternion form of the observer and the torque law.
//!
//! With `R(Q) = (q0² − ‖q‖²)I + 2qqᵀ − 2q0[q]×` one has
//! `vex(P_a(R(Q))) = −2 q0 q`, so every `vex(P_a(R̃))` of the matrix form is
//! replaced by `Υ(Q̃) = −2 q̃0 q̃`.

use crate::controller::{torque_with_axis, ControllerGains};
use crate::dynamics::VehicleParams;
use crate::liegroup::{e3, Mat3, Rotation, UnitQuaternion, Vec3};
use crate::observer::{predict_correct_step, CorrectionTerms, ObserverGains, ObserverState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuatObserverState {
    pub q_hat: UnitQuaternion,
    pub omega: Vec3,
    pub position: Vec3,
    pub velocity: Vec3,
}

impl QuatObserverState {
    /// Equivalent rotation-matrix state.
    pub fn as_matrix_state(&self) -> ObserverState {
        ObserverState {
            attitude: self.q_hat.to_rotation(),
            omega: self.omega,
            position: self.position,
            velocity: self.velocity,
        }
    }

    pub fn from_matrix_state(s: &ObserverState) -> Self {
        Self {
            q_hat: UnitQuaternion::from_rotation(&s.attitude),
            omega: s.omega,
            position: s.position,
            velocity: s.velocity,
        }
    }
}

/// `Q̃_o = Q̂⁻¹ ⊙ Q_y` and `Q̃_c = Q_d⁻¹ ⊙ Q̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuatErrors {
    pub q_tilde_o: UnitQuaternion,
    pub q_tilde_c: UnitQuaternion,
}

pub fn quat_errors(q_hat: &UnitQuaternion, q_y: &UnitQuaternion, q_d: &UnitQuaternion) -> QuatErrors {
    QuatErrors {
        q_tilde_o: q_hat.inverse().product(q_y),
        q_tilde_c: q_d.inverse().product(q_hat),
    }
}

/// `Υ(Q) = −2 q0 q`, equal to `vex(P_a(R(Q)))`.
pub fn upsilon(q: &UnitQuaternion) -> Vec3 {
    -2.0 * q.w * q.v
}

/// How the attitude quaternion is advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integration {
    /// `Q̂ ← normalize(Q̂ + ½Δt(Φ − Ψ)Q̂)`, with P̂, V̂ by explicit Euler.
    #[default]
    Euler,
    /// `Q̂ ← exp(−w_Ω Δt) ⊙ Q̂ ⊙ exp(Ω̂ Δt)`, with P̂, V̂ on the same
    /// exponential path as the matrix observer.
    Matched,
}

/// Correction terms built from quaternion errors.
pub fn quat_correction_factors(
    q_y: &UnitQuaternion,
    p_y: &Vec3,
    s: &QuatObserverState,
    thrust: f64,
    p: &VehicleParams,
    g: &ObserverGains,
) -> CorrectionTerms {
    let q_tilde = s.q_hat.inverse().product(q_y);
    let r_tilde = q_tilde.to_rotation();
    let r_y = q_y.to_rotation();
    let r_hat = s.q_hat.to_rotation();
    let axis = upsilon(&q_tilde);
    let p_tilde = p_y - s.position;
    let w_o = -g.gamma_o() * (r_tilde.matrix().transpose() * axis);
    let w_omega = g.k_o1() * (r_y.matrix().transpose() * axis);
    let w_v = -w_omega.cross(&s.position) - g.k_o2() * p_tilde;
    let w_a = -(thrust / p.mass())
        * (r_hat.matrix().transpose() * ((Mat3::identity() - r_tilde.matrix().transpose()) * e3()))
        - p.gravity() * e3()
        - w_omega.cross(&s.velocity)
        - g.k_o3() * p_tilde;
    CorrectionTerms {
        w_o,
        w_omega,
        w_v,
        w_a,
        r_tilde,
        p_tilde,
    }
}

/// `½(Φ − Ψ)Q̂`, the attitude-quaternion rate.
pub fn quat_rate(q: &UnitQuaternion, omega_hat: &Vec3, w_omega: &Vec3) -> UnitQuaternion {
    // ΦQ̂ = [−Ω̂ᵀq̂, q̂0Ω̂ − Ω̂×q̂] and ΨQ̂ = [−w_Ωᵀq̂, q̂0w_Ω + w_Ω×q̂]
    let phi_w = -omega_hat.dot(&q.v);
    let phi_v = q.w * omega_hat - omega_hat.cross(&q.v);
    let psi_w = -w_omega.dot(&q.v);
    let psi_v = q.w * w_omega + w_omega.cross(&q.v);
    UnitQuaternion::from_raw(0.5 * (phi_w - psi_w), 0.5 * (phi_v - psi_v))
}

/// Navigation part of one observer tick (Ω̂ untouched). Returns the new state
/// and the pre-renormalization norm drift of `Q̂`.
pub fn quat_observer_step(
    s: &QuatObserverState,
    w: &CorrectionTerms,
    thrust: f64,
    p: &VehicleParams,
    dt: f64,
    mode: Integration,
) -> (QuatObserverState, f64) {
    match mode {
        Integration::Euler => {
            let rate = quat_rate(&s.q_hat, &s.omega, &w.w_omega);
            let raw = UnitQuaternion::from_raw(s.q_hat.w + rate.w * dt, s.q_hat.v + rate.v * dt);
            let drift = (raw.norm() - 1.0).abs();
            if drift > 0.0 {
                log::trace!("renormalizing attitude quaternion, drift {drift:.3e}");
            }
            let r_hat = s.q_hat.to_rotation();
            let p_dot = s.velocity - w.w_omega.cross(&s.position) - w.w_v;
            let v_dot = -(thrust / p.mass()) * (r_hat.matrix().transpose() * e3())
                - w.w_omega.cross(&s.velocity)
                - w.w_a;
            (
                QuatObserverState {
                    q_hat: raw.normalized().canonical(),
                    omega: s.omega,
                    position: s.position + p_dot * dt,
                    velocity: s.velocity + v_dot * dt,
                },
                drift,
            )
        }
        Integration::Matched => {
            let left = UnitQuaternion::exp(&(-w.w_omega * dt));
            let right = UnitQuaternion::exp(&(s.omega * dt));
            let raw = left.product_uncanonical(&s.q_hat).product_uncanonical(&right);
            let drift = (raw.norm() - 1.0).abs();
            let (nav, _) = predict_correct_step(&s.as_matrix_state(), w, thrust, p, dt);
            (
                QuatObserverState {
                    q_hat: raw.normalized().canonical(),
                    omega: s.omega,
                    position: nav.position,
                    velocity: nav.velocity,
                },
                drift,
            )
        }
    }
}

/// Torque law with the attitude-error axis `Υ(Q̃_c) = −2 q̃_c0 q̃_c`.
pub fn quat_torque(
    errors: &QuatErrors,
    omega_hat: &Vec3,
    omega_d: &Vec3,
    omega_d_dot: &Vec3,
    p: &VehicleParams,
    g: &ControllerGains,
) -> Vec3 {
    let r_tilde_c: Rotation = errors.q_tilde_c.to_rotation();
    let r_tilde_o: Rotation = errors.q_tilde_o.to_rotation();
    torque_with_axis(
        &upsilon(&errors.q_tilde_c),
        &r_tilde_c,
        &r_tilde_o,
        omega_hat,
        omega_d,
        omega_d_dot,
        p,
        g,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::torque;
    use crate::liegroup::{pa_vex, so3_exp};
    use crate::observer::correction_factors;
    use crate::sensing::ReconstructedPose;

    fn q(phi: [f64; 3]) -> UnitQuaternion {
        UnitQuaternion::from_rotation(&so3_exp(&Vec3::from(phi)))
    }

    #[test]
    fn upsilon_matches_matrix_axis() {
        for phi in [[0.3, -0.2, 0.9], [2.5, 0.1, -0.4], [0.0, 0.0, 3.0]] {
            let qq = q(phi);
            let axis = pa_vex(qq.to_rotation().matrix());
            assert!((upsilon(&qq) - axis).norm() < 1e-14);
        }
    }

    #[test]
    fn rest_quaternion_unchanged() {
        let p = VehicleParams::default();
        let s = QuatObserverState {
            q_hat: q([0.2, 0.4, -0.1]),
            omega: Vec3::zeros(),
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
        };
        let w = CorrectionTerms::zero_innovation(&p);
        for mode in [Integration::Euler, Integration::Matched] {
            let (next, _) = quat_observer_step(&s, &w, p.mass() * p.gravity(), &p, 1e-3, mode);
            assert!((next.q_hat.w - s.q_hat.w).abs() < 1e-15);
            assert!((next.q_hat.v - s.q_hat.v).norm() < 1e-15);
        }
    }

    #[test]
    fn corrections_match_matrix_form() {
        let p = VehicleParams::default();
        let g = ObserverGains::default();
        let s = QuatObserverState {
            q_hat: q([0.2, 0.4, -0.1]),
            omega: Vec3::new(0.1, 0.0, 0.3),
            position: Vec3::new(1.0, 2.0, 0.5),
            velocity: Vec3::new(0.0, -1.0, 0.2),
        };
        let q_y = q([-1.0, 0.5, 0.8]);
        let p_y = Vec3::new(0.5, 1.0, 1.5);
        let wq = quat_correction_factors(&q_y, &p_y, &s, 27.0, &p, &g);
        let pose = ReconstructedPose {
            attitude: q_y.to_rotation(),
            position: p_y,
        };
        let wm = correction_factors(&pose, &s.as_matrix_state(), 27.0, &p, &g);
        assert!((wq.w_o - wm.w_o).norm() < 1e-13);
        assert!((wq.w_omega - wm.w_omega).norm() < 1e-13);
        assert!((wq.w_v - wm.w_v).norm() < 1e-13);
        assert!((wq.w_a - wm.w_a).norm() < 1e-13);
    }

    #[test]
    fn perfect_estimate_only_gravity() {
        let p = VehicleParams::default();
        let s = QuatObserverState {
            q_hat: q([0.2, 0.4, -0.1]),
            omega: Vec3::zeros(),
            position: Vec3::new(1.0, 1.0, 1.0),
            velocity: Vec3::zeros(),
        };
        let w = quat_correction_factors(&s.q_hat, &s.position, &s, 20.0, &p, &ObserverGains::default());
        assert!(w.w_o.norm() < 1e-15 && w.w_omega.norm() < 1e-15 && w.w_v.norm() < 1e-15);
        assert!((w.w_a + p.gravity() * e3()).norm() < 1e-14);
    }

    #[test]
    fn torque_matches_matrix_form() {
        let p = VehicleParams::default();
        let g = ControllerGains::default();
        let (qh, qy, qd) = (q([0.2, 0.4, -0.1]), q([0.3, 0.1, 0.0]), q([-0.5, 0.2, 0.0]));
        let e = quat_errors(&qh, &qy, &qd);
        let (wh, wd, wdd) = (
            Vec3::new(0.1, -0.2, 0.3),
            Vec3::new(0.05, 0.1, 0.0),
            Vec3::new(0.0, 0.01, -0.02),
        );
        let tq = quat_torque(&e, &wh, &wd, &wdd, &p, &g);
        let rc = qh.to_rotation() * qd.to_rotation().transpose();
        let ro = qy.to_rotation() * qh.to_rotation().transpose();
        let tm = torque(&rc, &ro, &wh, &wd, &wdd, &p, &g);
        assert!((tq - tm).norm() < 1e-13);
    }

    #[test]
    fn double_cover_invariance() {
        let p = VehicleParams::default();
        let g = ObserverGains::default();
        let mut s = QuatObserverState {
            q_hat: q([0.2, 0.4, -0.1]),
            omega: Vec3::zeros(),
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
        };
        let q_y = q([1.0, -0.5, 0.2]);
        let a = quat_correction_factors(&q_y, &Vec3::zeros(), &s, 20.0, &p, &g);
        s.q_hat = UnitQuaternion::from_raw(-s.q_hat.w, -s.q_hat.v);
        let b = quat_correction_factors(&q_y, &Vec3::zeros(), &s, 20.0, &p, &g);
        assert!((a.w_o - b.w_o).norm() < 1e-15);
        assert!((a.w_omega - b.w_omega).norm() < 1e-15);
    }
}
