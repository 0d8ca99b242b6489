//! Rigid-body VTOL dynamics and the truth integrator.

use thiserror::Error;

use crate::liegroup::{e3, skew, so3_exp, Mat3, Mat5, NavState, Rotation, TangentElement, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("mass must be positive, got {0}")]
    Mass(f64),
    #[error("gravity must be positive, got {0}")]
    Gravity(f64),
    #[error("inertia must be symmetric (asymmetry {0:.3e})")]
    InertiaAsymmetric(f64),
    #[error("inertia must be positive definite (smallest eigenvalue {0:.3e})")]
    InertiaNotPositive(f64),
}

/// Mass, inertia and gravity of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    mass: f64,
    inertia: Mat3,
    inertia_inv: Mat3,
    gravity: f64,
}

impl VehicleParams {
    pub fn new(mass: f64, inertia: Mat3, gravity: f64) -> Result<Self, ParamsError> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(ParamsError::Mass(mass));
        }
        if !(gravity > 0.0 && gravity.is_finite()) {
            return Err(ParamsError::Gravity(gravity));
        }
        let asym = (inertia - inertia.transpose()).norm();
        if asym > 1e-12 {
            return Err(ParamsError::InertiaAsymmetric(asym));
        }
        let min_eig = inertia.symmetric_eigenvalues().min();
        if !(min_eig > 0.0) {
            return Err(ParamsError::InertiaNotPositive(min_eig));
        }
        let inertia_inv = inertia
            .try_inverse()
            .ok_or(ParamsError::InertiaNotPositive(min_eig))?;
        Ok(Self {
            mass,
            inertia,
            inertia_inv,
            gravity,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn inertia(&self) -> &Mat3 {
        &self.inertia
    }

    pub fn inertia_inv(&self) -> &Mat3 {
        &self.inertia_inv
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }
}

impl Default for VehicleParams {
    /// 2.5 kg, `J = diag(0.14, 0.2, 0.12)`, `g = 9.81`.
    fn default() -> Self {
        Self::new(2.5, Mat3::from_diagonal(&Vec3::new(0.14, 0.2, 0.12)), 9.81)
            .expect("default parameters are valid")
    }
}

/// True attitude, body angular velocity, inertial position and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueState {
    pub attitude: Rotation,
    pub omega: Vec3,
    pub position: Vec3,
    pub velocity: Vec3,
}

impl TrueState {
    pub fn nav(&self) -> NavState {
        NavState::new(self.attitude, self.position, self.velocity)
    }
}

/// Body torque (N·m) and thrust magnitude (N).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    pub torque: Vec3,
    pub thrust: f64,
}

/// Time derivative of a [`TrueState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub attitude: Mat3,
    pub omega: Vec3,
    pub position: Vec3,
    pub velocity: Vec3,
}

/// `𝒢 = u(0, 0, −g e₃, 1)`.
pub fn gravity_tangent(p: &VehicleParams) -> TangentElement {
    TangentElement::new(Vec3::zeros(), Vec3::zeros(), -p.gravity * e3(), 1.0)
}

/// `u([Ω]×, 0, −(ℑ/m)e₃, 1)`, the input-driven part of the navigation kinematics.
pub fn input_tangent(omega: &Vec3, thrust: f64, p: &VehicleParams) -> TangentElement {
    TangentElement::new(*omega, Vec3::zeros(), -(thrust / p.mass) * e3(), 1.0)
}

fn angular_acceleration(omega: &Vec3, torque: &Vec3, p: &VehicleParams) -> Vec3 {
    p.inertia_inv * ((p.inertia * omega).cross(omega) + torque)
}

fn linear_acceleration(r: &Rotation, thrust: f64, p: &VehicleParams) -> Vec3 {
    p.gravity * e3() - (thrust / p.mass) * (r.matrix().transpose() * e3())
}

pub fn dynamics_derivative(
    s: &TrueState,
    u: &ControlCommand,
    p: &VehicleParams,
) -> StateDerivative {
    StateDerivative {
        attitude: -skew(&s.omega) * s.attitude.matrix(),
        omega: angular_acceleration(&s.omega, &u.torque, p),
        position: s.velocity,
        velocity: linear_acceleration(&s.attitude, u.thrust, p),
    }
}

/// `Ẋ` in navigation-matrix form, `X·U − 𝒢·X`.
pub fn nav_derivative(s: &TrueState, u: &ControlCommand, p: &VehicleParams) -> Mat5 {
    let x = s.nav().to_matrix();
    x * input_tangent(&s.omega, u.thrust, p).to_matrix() - gravity_tangent(p).to_matrix() * x
}

/// One RK4 step. Ω, P, V use classical RK4; the attitude is advanced by the
/// exponential of the stage-averaged angular velocity so it stays on SO(3).
pub fn integrate_step(s: &TrueState, u: &ControlCommand, p: &VehicleParams, dt: f64) -> TrueState {
    let h = dt;
    let (r, w, x, v) = (s.attitude, s.omega, s.position, s.velocity);

    let w1 = w;
    let dw1 = angular_acceleration(&w1, &u.torque, p);
    let dv1 = linear_acceleration(&r, u.thrust, p);
    let v1 = v;

    let r2 = so3_exp(&(-w1 * (0.5 * h))) * r;
    let w2 = w + dw1 * (0.5 * h);
    let v2 = v + dv1 * (0.5 * h);
    let dw2 = angular_acceleration(&w2, &u.torque, p);
    let dv2 = linear_acceleration(&r2, u.thrust, p);

    let r3 = so3_exp(&(-w2 * (0.5 * h))) * r;
    let w3 = w + dw2 * (0.5 * h);
    let v3 = v + dv2 * (0.5 * h);
    let dw3 = angular_acceleration(&w3, &u.torque, p);
    let dv3 = linear_acceleration(&r3, u.thrust, p);

    let r4 = so3_exp(&(-w3 * h)) * r;
    let w4 = w + dw3 * h;
    let v4 = v + dv3 * h;
    let dw4 = angular_acceleration(&w4, &u.torque, p);
    let dv4 = linear_acceleration(&r4, u.thrust, p);

    let w_bar = (w1 + w2 * 2.0 + w3 * 2.0 + w4) / 6.0;
    TrueState {
        attitude: so3_exp(&(-w_bar * h)) * r,
        omega: w + (dw1 + dw2 * 2.0 + dw3 * 2.0 + dw4) * (h / 6.0),
        position: x + (v1 + v2 * 2.0 + v3 * 2.0 + v4) * (h / 6.0),
        velocity: v + (dv1 + dv2 * 2.0 + dv3 * 2.0 + dv4) * (h / 6.0),
    }
}
