//! Observer-based tracking controller: auxiliary position filter, intermediary
//! acceleration command, singularity-free desired attitude and torque law.

use thiserror::Error;

use crate::dynamics::VehicleParams;
use crate::liegroup::{e3, pa_vex, Mat3, Rotation, UnitQuaternion, Vec3};
use crate::{check_gain, GainError};

/// Relative (to g) floor on `α₁`, `α₂` below which `Ξ` is not evaluated.
pub const XI_TOLERANCE: f64 = 1e-6;

/// Floor on the scalar part of the desired quaternion.
pub const QD0_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("thrust direction is singular: F = [{0:.6}, {1:.6}, {2:.6}] points along e3 at or beyond g")]
    SingularThrustDirection(f64, f64, f64),
    #[error("desired attitude is near-singular (q_d0 = {q_d0:.3e}, thrust = {thrust:.3e})")]
    NearSingular { q_d0: f64, thrust: f64 },
    #[error("Xi(F) is undefined: alpha1 = {alpha1:.3e}, alpha2 = {alpha2:.3e}")]
    SingularXi { alpha1: f64, alpha2: f64 },
    #[error("trajectory derivative of order {order} is inconsistent at t = {t} (relative error {error:.3e})")]
    InconsistentTrajectory { t: f64, order: usize, error: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    k_c1: f64,
    k_c2: f64,
    k_c3: f64,
    k_c4: f64,
    k_theta1: f64,
    k_theta2: f64,
}

impl ControllerGains {
    pub fn new(
        k_c1: f64,
        k_c2: f64,
        k_c3: f64,
        k_c4: f64,
        k_theta1: f64,
        k_theta2: f64,
    ) -> Result<Self, GainError> {
        Ok(Self {
            k_c1: check_gain("k_c1", k_c1)?,
            k_c2: check_gain("k_c2", k_c2)?,
            k_c3: check_gain("k_c3", k_c3)?,
            k_c4: check_gain("k_c4", k_c4)?,
            k_theta1: check_gain("k_theta1", k_theta1)?,
            k_theta2: check_gain("k_theta2", k_theta2)?,
        })
    }

    pub fn k_c1(&self) -> f64 {
        self.k_c1
    }
    pub fn k_c2(&self) -> f64 {
        self.k_c2
    }
    pub fn k_c3(&self) -> f64 {
        self.k_c3
    }
    pub fn k_c4(&self) -> f64 {
        self.k_c4
    }
    pub fn k_theta1(&self) -> f64 {
        self.k_theta1
    }
    pub fn k_theta2(&self) -> f64 {
        self.k_theta2
    }
}

impl Default for ControllerGains {
    /// Attitude loop `k_c1 = 10`, `k_c2 = 0.1`; position loop `k_c3 = 2`,
    /// `k_c4 = 4`; saturation gains `k_θ1 = k_θ2 = 1`.
    fn default() -> Self {
        Self::new(10.0, 0.1, 2.0, 4.0, 1.0, 1.0).expect("default gains are positive")
    }
}

/// Auxiliary filter state. `theta_ddot` holds the last computed acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AuxiliaryState {
    pub theta: Vec3,
    pub theta_dot: Vec3,
    pub theta_ddot: Vec3,
}

/// Desired position and its first four derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub jerk: Vec3,
    pub snap: Vec3,
}

impl TrajectoryPoint {
    pub fn derivative(&self, order: usize) -> Vec3 {
        match order {
            0 => self.position,
            1 => self.velocity,
            2 => self.acceleration,
            3 => self.jerk,
            _ => self.snap,
        }
    }
}

pub trait DesiredTrajectory: Send + Sync {
    fn eval(&self, t: f64) -> TrajectoryPoint;
}

/// Built-in desired trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trajectory {
    /// `[A sin ωt, (A/2) sin 2ωt, z₀ + c t]`, a climbing figure eight.
    FigureEight {
        amplitude: f64,
        rate: f64,
        z0: f64,
        climb: f64,
    },
    /// Fixed set point.
    Hover { position: Vec3 },
}

impl Trajectory {
    /// `A = 6`, `ω = 0.2`, `z₀ = 4`, `c = 0.15`.
    pub fn figure_eight() -> Self {
        Trajectory::FigureEight {
            amplitude: 6.0,
            rate: 0.2,
            z0: 4.0,
            climb: 0.15,
        }
    }
}

impl DesiredTrajectory for Trajectory {
    fn eval(&self, t: f64) -> TrajectoryPoint {
        match *self {
            Trajectory::FigureEight {
                amplitude: a,
                rate: w,
                z0,
                climb,
            } => {
                let (s1, c1) = (w * t).sin_cos();
                let (s2, c2) = (2.0 * w * t).sin_cos();
                let b = 0.5 * a;
                let w2 = 2.0 * w;
                TrajectoryPoint {
                    position: Vec3::new(a * s1, b * s2, z0 + climb * t),
                    velocity: Vec3::new(a * w * c1, b * w2 * c2, climb),
                    acceleration: Vec3::new(-a * w.powi(2) * s1, -b * w2.powi(2) * s2, 0.0),
                    jerk: Vec3::new(-a * w.powi(3) * c1, -b * w2.powi(3) * c2, 0.0),
                    snap: Vec3::new(a * w.powi(4) * s1, b * w2.powi(4) * s2, 0.0),
                }
            }
            Trajectory::Hover { position } => TrajectoryPoint {
                position,
                velocity: Vec3::zeros(),
                acceleration: Vec3::zeros(),
                jerk: Vec3::zeros(),
                snap: Vec3::zeros(),
            },
        }
    }
}

/// Central-difference check of every derivative order on a grid over `[0, t_end]`.
pub fn validate_trajectory<T: DesiredTrajectory + ?Sized>(
    traj: &T,
    t_end: f64,
) -> Result<(), ControlError> {
    const SAMPLES: usize = 64;
    const H: f64 = 1e-4;
    const TOL: f64 = 1e-4;
    for i in 0..=SAMPLES {
        let t = t_end * i as f64 / SAMPLES as f64;
        let (lo, mid, hi) = (traj.eval(t - H), traj.eval(t), traj.eval(t + H));
        for order in 1..=4 {
            let fd = (hi.derivative(order - 1) - lo.derivative(order - 1)) / (2.0 * H);
            let exact = mid.derivative(order);
            let scale = exact.norm().max(fd.norm()).max(1.0);
            let error = (fd - exact).norm() / scale;
            if !(error <= TOL) {
                return Err(ControlError::InconsistentTrajectory { t, order, error });
            }
        }
    }
    Ok(())
}

/// Largest `‖P̈_d‖` on a fine grid over `[0, t_end]`.
pub fn max_acceleration<T: DesiredTrajectory + ?Sized>(traj: &T, t_end: f64, dt: f64) -> f64 {
    let n = (t_end / dt).floor() as usize;
    (0..=n)
        .map(|k| traj.eval(k as f64 * dt).acceleration.norm())
        .fold(0.0, f64::max)
}

/// Upper bound on the commanded thrust, `m(g + max‖P̈_d‖ + k_θ1 + k_θ2)`.
pub fn thrust_bound(p: &VehicleParams, gains: &ControllerGains, max_acc: f64) -> f64 {
    p.mass() * (p.gravity() + max_acc + gains.k_theta1 + gains.k_theta2)
}

/// Componentwise `tanh(x)` and `1 − tanh²(x)`.
pub fn saturation_psi(x: &Vec3) -> (Vec3, Vec3) {
    let psi = x.map(f64::tanh);
    let factor = psi.map(|p| 1.0 - p * p);
    (psi, factor)
}

/// `d/dt ψ(x) = (1 − ψ²)ẋ`.
pub fn psi_rate(x: &Vec3, x_dot: &Vec3) -> Vec3 {
    let (_, f) = saturation_psi(x);
    f.component_mul(x_dot)
}

/// `d²/dt² ψ(x) = (1 − ψ²)(ẍ − 2ψẋ²)`.
pub fn psi_second_rate(x: &Vec3, x_dot: &Vec3, x_ddot: &Vec3) -> Vec3 {
    let (psi, f) = saturation_psi(x);
    f.component_mul(&(x_ddot - 2.0 * psi.component_mul(&x_dot.component_mul(x_dot))))
}

/// `θ̈ = −k_θ1ψ(θ) − k_θ2ψ(θ̇) + k_c3(P̂ − P_d − θ) + k_c4(V̂ − V_d − θ̇)`.
pub fn theta_accel(
    aux: &AuxiliaryState,
    p_hat: &Vec3,
    v_hat: &Vec3,
    des: &TrajectoryPoint,
    g: &ControllerGains,
) -> Vec3 {
    let (psi_t, _) = saturation_psi(&aux.theta);
    let (psi_td, _) = saturation_psi(&aux.theta_dot);
    -g.k_theta1 * psi_t - g.k_theta2 * psi_td
        + g.k_c3 * (p_hat - des.position - aux.theta)
        + g.k_c4 * (v_hat - des.velocity - aux.theta_dot)
}

/// Semi-implicit Euler: `θ̈` first, then `θ̇ ← θ̇ + Δt θ̈`, then `θ ← θ + Δt θ̇`.
pub fn aux_theta_step(
    aux: &AuxiliaryState,
    p_hat: &Vec3,
    v_hat: &Vec3,
    des: &TrajectoryPoint,
    g: &ControllerGains,
    dt: f64,
) -> AuxiliaryState {
    let theta_ddot = theta_accel(aux, p_hat, v_hat, des, g);
    let theta_dot = aux.theta_dot + theta_ddot * dt;
    AuxiliaryState {
        theta: aux.theta + theta_dot * dt,
        theta_dot,
        theta_ddot,
    }
}

/// `θ⁽³⁾`, the derivative of [`theta_accel`] given the estimate rates.
pub fn theta_jerk(
    aux: &AuxiliaryState,
    theta_ddot: &Vec3,
    p_hat_dot: &Vec3,
    v_hat_dot: &Vec3,
    des: &TrajectoryPoint,
    g: &ControllerGains,
) -> Vec3 {
    -g.k_theta1 * psi_rate(&aux.theta, &aux.theta_dot)
        - g.k_theta2 * psi_rate(&aux.theta_dot, theta_ddot)
        + g.k_c3 * (p_hat_dot - des.velocity - aux.theta_dot)
        + g.k_c4 * (v_hat_dot - des.acceleration - theta_ddot)
}

/// `F`, its first two derivatives and the quantities derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntermediaryControl {
    pub f: Vec3,
    pub f_dot: Vec3,
    pub f_ddot: Vec3,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha1_dot: f64,
    pub alpha2_dot: f64,
    pub thrust: f64,
}

/// `F = P̈_d − k_θ1ψ(θ) − k_θ2ψ(θ̇)` and `ℑ = m‖g e₃ − F‖`.
pub fn thrust_command(
    aux: &AuxiliaryState,
    des: &TrajectoryPoint,
    g: &ControllerGains,
    p: &VehicleParams,
) -> (Vec3, f64) {
    let (psi_t, _) = saturation_psi(&aux.theta);
    let (psi_td, _) = saturation_psi(&aux.theta_dot);
    let f = des.acceleration - g.k_theta1 * psi_t - g.k_theta2 * psi_td;
    (f, p.mass() * (p.gravity() * e3() - f).norm())
}

/// Evaluates `F`, `Ḟ`, `F̈`, `α₁`, `α₂` and their rates at the state
/// `(θ, θ̇)` with `θ̈`, `θ⁽³⁾` supplied.
pub fn intermediary_f(
    aux: &AuxiliaryState,
    theta_ddot: &Vec3,
    theta_dddot: &Vec3,
    des: &TrajectoryPoint,
    g: &ControllerGains,
    p: &VehicleParams,
) -> Result<IntermediaryControl, ControlError> {
    let (f, thrust) = thrust_command(aux, des, g, p);
    let grav = p.gravity();
    if f.x == 0.0 && f.y == 0.0 && f.z >= grav {
        return Err(ControlError::SingularThrustDirection(f.x, f.y, f.z));
    }
    let f_dot = des.jerk
        - g.k_theta1 * psi_rate(&aux.theta, &aux.theta_dot)
        - g.k_theta2 * psi_rate(&aux.theta_dot, theta_ddot);
    let f_ddot = des.snap
        - g.k_theta1 * psi_second_rate(&aux.theta, &aux.theta_dot, theta_ddot)
        - g.k_theta2 * psi_second_rate(&aux.theta_dot, theta_ddot, theta_dddot);
    let alpha1 = (grav * e3() - f).norm();
    let alpha2 = alpha1 + grav - f.z;
    let alpha1_dot = Vec3::new(f.x, f.y, f.z - grav).dot(&f_dot) / alpha1;
    let alpha2_dot = alpha1_dot - f_dot.z;
    Ok(IntermediaryControl {
        f,
        f_dot,
        f_ddot,
        alpha1,
        alpha2,
        alpha1_dot,
        alpha2_dot,
        thrust,
    })
}

/// Desired attitude with its rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredAttitude {
    pub q_d: UnitQuaternion,
    pub r_d: Rotation,
    pub omega_d: Vec3,
    pub omega_d_dot: Vec3,
}

/// Desired quaternion such that `(ℑ/m) R_dᵀ e₃ = g e₃ − F`.
pub fn desired_quaternion(
    f: &Vec3,
    thrust: f64,
    p: &VehicleParams,
) -> Result<UnitQuaternion, ControlError> {
    let g = p.gravity();
    if f.x == 0.0 && f.y == 0.0 && f.z >= g {
        return Err(ControlError::SingularThrustDirection(f.x, f.y, f.z));
    }
    let m = p.mass();
    let arg = m * (g - f.z) / (2.0 * thrust) + 0.5;
    let q_d0 = arg.max(0.0).sqrt();
    if !(thrust > 0.0) || !(q_d0 >= QD0_TOLERANCE) {
        return Err(ControlError::NearSingular { q_d0, thrust });
    }
    let k = m / (2.0 * thrust * q_d0);
    let q = Vec3::new(k * f.y, -k * f.x, 0.0);
    // renormalize away the rounding in the two square roots
    Ok(UnitQuaternion::from_raw(q_d0, q).normalized().canonical())
}

/// `(Q_d, R_d)` from the intermediary control; rates are zero until filled in.
pub fn desired_attitude(
    ic: &IntermediaryControl,
    p: &VehicleParams,
) -> Result<DesiredAttitude, ControlError> {
    let q_d = desired_quaternion(&ic.f, ic.thrust, p)?;
    Ok(DesiredAttitude {
        q_d,
        r_d: q_d.to_rotation(),
        omega_d: Vec3::zeros(),
        omega_d_dot: Vec3::zeros(),
    })
}

fn xi_numerator(f: &Vec3, a1: f64, a2: f64) -> Mat3 {
    let (f1, f2) = (f.x, f.y);
    Mat3::new(
        -f1 * f2,
        -f2 * f2 + a1 * a2,
        f2 * a2,
        f1 * f1 - a1 * a2,
        f1 * f2,
        -f1 * a2,
        f2 * a1,
        -f1 * a1,
        0.0,
    )
}

fn xi_check(ic: &IntermediaryControl, p: &VehicleParams) -> Result<(), ControlError> {
    let tol = XI_TOLERANCE * p.gravity();
    if !(ic.alpha1 > tol) || !(ic.alpha2 > tol) {
        return Err(ControlError::SingularXi {
            alpha1: ic.alpha1,
            alpha2: ic.alpha2,
        });
    }
    Ok(())
}

/// `Ξ(F)` and `Ξ̇(F)`, the latter by the quotient rule on each entry.
pub fn xi_matrix(ic: &IntermediaryControl, p: &VehicleParams) -> Result<(Mat3, Mat3), ControlError> {
    xi_check(ic, p)?;
    let (f1, f2) = (ic.f.x, ic.f.y);
    let (d1, d2) = (ic.f_dot.x, ic.f_dot.y);
    let (a1, a2, a1d, a2d) = (ic.alpha1, ic.alpha2, ic.alpha1_dot, ic.alpha2_dot);
    let n = xi_numerator(&ic.f, a1, a2);
    let a12 = a1d * a2 + a1 * a2d;
    let n_dot = Mat3::new(
        -(d1 * f2 + f1 * d2),
        -2.0 * f2 * d2 + a12,
        d2 * a2 + f2 * a2d,
        2.0 * f1 * d1 - a12,
        d1 * f2 + f1 * d2,
        -d1 * a2 - f1 * a2d,
        d2 * a1 + f2 * a1d,
        -d1 * a1 - f1 * a1d,
        0.0,
    );
    let den = a1 * a1 * a2;
    let den_dot = 2.0 * a1 * a1d * a2 + a1 * a1 * a2d;
    let xi = n / den;
    let xi_dot = n_dot / den - n * (den_dot / (den * den));
    Ok((xi, xi_dot))
}

/// `Ω_d = ΞḞ` and `Ω̇_d = Ξ̇Ḟ + ΞF̈`.
pub fn desired_angular_velocity(
    ic: &IntermediaryControl,
    p: &VehicleParams,
) -> Result<(Vec3, Vec3), ControlError> {
    let (xi, xi_dot) = xi_matrix(ic, p)?;
    Ok((xi * ic.f_dot, xi_dot * ic.f_dot + xi * ic.f_ddot))
}

/// `𝒯 = k_c1 vex(P_a(R̃_c)) − k_c2(R̃_oΩ̂ − R̃_cΩ_d) + JR̃_cΩ̇_d + [R̃_cΩ_d]×JR̃_cΩ_d`.
pub fn torque(
    r_tilde_c: &Rotation,
    r_tilde_o: &Rotation,
    omega_hat: &Vec3,
    omega_d: &Vec3,
    omega_d_dot: &Vec3,
    p: &VehicleParams,
    g: &ControllerGains,
) -> Vec3 {
    torque_with_axis(
        &pa_vex(r_tilde_c.matrix()),
        r_tilde_c,
        r_tilde_o,
        omega_hat,
        omega_d,
        omega_d_dot,
        p,
        g,
    )
}

/// [`torque`] with the attitude-error axis `vex(P_a(R̃_c))` supplied, so other
/// parameterizations can reuse the law.
#[allow(clippy::too_many_arguments)]
pub fn torque_with_axis(
    axis: &Vec3,
    r_tilde_c: &Rotation,
    r_tilde_o: &Rotation,
    omega_hat: &Vec3,
    omega_d: &Vec3,
    omega_d_dot: &Vec3,
    p: &VehicleParams,
    g: &ControllerGains,
) -> Vec3 {
    let rc = r_tilde_c.matrix();
    let rc_wd = rc * omega_d;
    let j = p.inertia();
    g.k_c1 * axis - g.k_c2 * (r_tilde_o.matrix() * omega_hat - rc_wd)
        + j * (rc * omega_d_dot)
        + rc_wd.cross(&(j * rc_wd))
}

/// Tracking errors of a state against the desired one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlErrors {
    /// `R R_dᵀ`
    pub r_tilde: Rotation,
    /// `Ω − R̃ Ω_d`
    pub omega_tilde: Vec3,
    /// `P − P_d`
    pub p_tilde: Vec3,
    /// `V − V_d`
    pub v_tilde: Vec3,
}

pub fn control_errors(
    attitude: &Rotation,
    omega: &Vec3,
    position: &Vec3,
    velocity: &Vec3,
    r_d: &Rotation,
    omega_d: &Vec3,
    des: &TrajectoryPoint,
) -> ControlErrors {
    let r_tilde = *attitude * r_d.transpose();
    ControlErrors {
        omega_tilde: omega - r_tilde.matrix() * omega_d,
        r_tilde,
        p_tilde: position - des.position,
        v_tilde: velocity - des.velocity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hover_point() -> TrajectoryPoint {
        Trajectory::Hover {
            position: Vec3::zeros(),
        }
        .eval(0.0)
    }

    #[test]
    fn gains_defaults() {
        let g = ControllerGains::default();
        assert_eq!(
            (g.k_c1(), g.k_c2(), g.k_c3(), g.k_c4(), g.k_theta1(), g.k_theta2()),
            (10.0, 0.1, 2.0, 4.0, 1.0, 1.0)
        );
        assert!(ControllerGains::new(1.0, 1.0, 1.0, 1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn psi_values() {
        let (psi, f) = saturation_psi(&Vec3::zeros());
        assert_eq!(psi, Vec3::zeros());
        assert_eq!(f, Vec3::repeat(1.0));
        let (psi, f) = saturation_psi(&Vec3::new(50.0, -50.0, 3.0));
        assert!(psi.iter().all(|p| p.abs() <= 1.0 && p.is_finite()));
        assert!(f.iter().all(|x| x.is_finite() && *x >= 0.0));
    }

    #[test]
    fn aux_rest_state() {
        let aux = AuxiliaryState::default();
        let des = hover_point();
        let next = aux_theta_step(
            &aux,
            &des.position,
            &des.velocity,
            &des,
            &ControllerGains::default(),
            1e-3,
        );
        assert_eq!(next, aux);
    }

    #[test]
    fn aux_position_offset() {
        let aux = AuxiliaryState::default();
        let des = hover_point();
        let acc = theta_accel(
            &aux,
            &Vec3::new(1.0, 0.0, 0.0),
            &Vec3::zeros(),
            &des,
            &ControllerGains::default(),
        );
        assert_eq!(acc, Vec3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn aux_accel_bounded() {
        let g = ControllerGains::default();
        let aux = AuxiliaryState {
            theta: Vec3::new(30.0, -4.0, 2.0),
            theta_dot: Vec3::new(-9.0, 1.0, 100.0),
            theta_ddot: Vec3::zeros(),
        };
        let (ph, vh) = (Vec3::new(-50.0, 3.0, 8.0), Vec3::new(4.0, 4.0, -40.0));
        let des = Trajectory::figure_eight().eval(3.0);
        let acc = theta_accel(&aux, &ph, &vh, &des, &g);
        let bound = (g.k_theta1() + g.k_theta2()) * 3f64.sqrt()
            + g.k_c3() * (ph - des.position - aux.theta).norm()
            + g.k_c4() * (vh - des.velocity - aux.theta_dot).norm();
        assert!(acc.norm() <= bound);
    }

    #[test]
    fn hover_thrust_and_alphas() {
        let p = VehicleParams::default();
        let ic = intermediary_f(
            &AuxiliaryState::default(),
            &Vec3::zeros(),
            &Vec3::zeros(),
            &hover_point(),
            &ControllerGains::default(),
            &p,
        )
        .unwrap();
        assert_eq!(ic.f, Vec3::zeros());
        assert!((ic.thrust - 24.525).abs() < 1e-12);
        assert_eq!(ic.alpha1, 9.81);
        assert_eq!(ic.alpha2, 2.0 * 9.81);
        let d = desired_attitude(&ic, &p).unwrap();
        assert_eq!(d.q_d, UnitQuaternion::identity());
        assert_eq!(*d.r_d.matrix(), Mat3::identity());
        let (xi, _) = xi_matrix(&ic, &p).unwrap();
        let expected = Mat3::new(0.0, 1.0 / 9.81, 0.0, -1.0 / 9.81, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!((xi - expected).norm() < 1e-15);
        let (wd, wdd) = desired_angular_velocity(&ic, &p).unwrap();
        assert_eq!(wd, Vec3::zeros());
        assert_eq!(wdd, Vec3::zeros());
    }

    #[test]
    fn singular_direction_rejected() {
        let p = VehicleParams::default();
        let f = Vec3::new(0.0, 0.0, p.gravity() + 1.0);
        let thrust = p.mass() * (p.gravity() * e3() - f).norm();
        assert!(matches!(
            desired_quaternion(&f, thrust, &p),
            Err(ControlError::SingularThrustDirection(..))
        ));
    }

    #[test]
    fn lemma_property_for_tilted_command() {
        let p = VehicleParams::default();
        let f = Vec3::new(1.5, -2.0, 0.7);
        let thrust = p.mass() * (p.gravity() * e3() - f).norm();
        let q = desired_quaternion(&f, thrust, &p).unwrap();
        let r = q.to_rotation();
        let lhs = (thrust / p.mass()) * (r.matrix().transpose() * e3());
        assert!((lhs - (p.gravity() * e3() - f)).norm() < 1e-12);
        assert!((q.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn torque_special_cases() {
        let p = VehicleParams::default();
        let g = ControllerGains::default();
        let id = Rotation::identity();
        let z = Vec3::zeros();
        assert_eq!(torque(&id, &id, &z, &z, &z, &p, &g), z);
        let wd = Vec3::new(0.3, -0.2, 0.5);
        let t = torque(&id, &id, &wd, &wd, &z, &p, &g);
        assert!((t - wd.cross(&(p.inertia() * wd))).norm() < 1e-15);
    }

    #[test]
    fn control_error_definitions() {
        let des = Trajectory::Hover {
            position: Vec3::new(1.0, 1.0, 1.0),
        }
        .eval(0.0);
        let id = Rotation::identity();
        let e = control_errors(
            &id,
            &Vec3::zeros(),
            &Vec3::new(1.0, 2.0, 3.0),
            &Vec3::zeros(),
            &id,
            &Vec3::zeros(),
            &des,
        );
        assert_eq!(e.p_tilde, Vec3::new(0.0, 1.0, 2.0));
        assert_eq!(e.r_tilde, id);
    }

    #[test]
    fn builtin_trajectories_are_consistent() {
        assert!(validate_trajectory(&Trajectory::figure_eight(), 50.0).is_ok());
        let hover = Trajectory::Hover {
            position: Vec3::new(1.0, 2.0, 3.0),
        };
        assert!(validate_trajectory(&hover, 50.0).is_ok());
        let p0 = Trajectory::figure_eight().eval(0.0);
        assert_eq!(p0.position, Vec3::new(0.0, 0.0, 4.0));
    }

    struct Broken;
    impl DesiredTrajectory for Broken {
        fn eval(&self, t: f64) -> TrajectoryPoint {
            let mut p = Trajectory::figure_eight().eval(t);
            p.jerk *= 2.0;
            p
        }
    }

    #[test]
    fn inconsistent_trajectory_rejected() {
        assert!(matches!(
            validate_trajectory(&Broken, 10.0),
            Err(ControlError::InconsistentTrajectory { order: 3, .. })
        ));
    }

    #[test]
    fn thrust_bound_value() {
        let p = VehicleParams::default();
        let g = ControllerGains::default();
        assert!((thrust_bound(&p, &g, 0.0) - 2.5 * (9.81 + 2.0)).abs() < 1e-12);
        let m = max_acceleration(&Trajectory::figure_eight(), 50.0, 1e-3);
        assert!(m > 0.0 && m <= 6.0 * 0.04 + 3.0 * 0.16 + 1e-12);
    }
}
