//! Full-state observer on SE₂(3) driven by reconstructed poses.

use crate::dynamics::{input_tangent, TrueState, VehicleParams};
use crate::liegroup::{
    e3, pa_vex, se23_exp, skew, Mat3, NavState, Rotation, TangentElement, Vec3,
};
use crate::sensing::ReconstructedPose;
use crate::{check_gain, GainError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverGains {
    gamma_o: f64,
    k_o1: f64,
    k_o2: f64,
    k_o3: f64,
}

impl ObserverGains {
    pub fn new(gamma_o: f64, k_o1: f64, k_o2: f64, k_o3: f64) -> Result<Self, GainError> {
        Ok(Self {
            gamma_o: check_gain("gamma_o", gamma_o)?,
            k_o1: check_gain("k_o1", k_o1)?,
            k_o2: check_gain("k_o2", k_o2)?,
            k_o3: check_gain("k_o3", k_o3)?,
        })
    }

    pub fn gamma_o(&self) -> f64 {
        self.gamma_o
    }
    pub fn k_o1(&self) -> f64 {
        self.k_o1
    }
    pub fn k_o2(&self) -> f64 {
        self.k_o2
    }
    pub fn k_o3(&self) -> f64 {
        self.k_o3
    }
}

impl Default for ObserverGains {
    /// `γ_o = 0.1`, `k_o1 = 10`, `k_o2 = 10`, `k_o3 = 5`.
    fn default() -> Self {
        Self::new(0.1, 10.0, 10.0, 5.0).expect("default gains are positive")
    }
}

/// Estimated attitude, body angular velocity, position and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub attitude: Rotation,
    pub omega: Vec3,
    pub position: Vec3,
    pub velocity: Vec3,
}

impl ObserverState {
    pub fn nav(&self) -> NavState {
        NavState::new(self.attitude, self.position, self.velocity)
    }
}

impl Default for ObserverState {
    fn default() -> Self {
        Self {
            attitude: Rotation::identity(),
            omega: Vec3::zeros(),
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
        }
    }
}

/// Innovation terms of one tick, with the errors they were built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionTerms {
    pub w_o: Vec3,
    pub w_omega: Vec3,
    pub w_v: Vec3,
    pub w_a: Vec3,
    /// `R_y R̂ᵀ`
    pub r_tilde: Rotation,
    /// `P_y − P̂`
    pub p_tilde: Vec3,
}

impl CorrectionTerms {
    /// `W = u([w_Ω]×, w_V, w_a, 1)`.
    pub fn tangent(&self) -> TangentElement {
        TangentElement::new(self.w_omega, self.w_v, self.w_a, 1.0)
    }

    /// Terms for a tick without a usable measurement: the innovation is taken
    /// as zero, which leaves only the gravity part `w_a = −g e₃`. The observer
    /// then integrates its own model open loop.
    pub fn zero_innovation(p: &VehicleParams) -> Self {
        Self {
            w_o: Vec3::zeros(),
            w_omega: Vec3::zeros(),
            w_v: Vec3::zeros(),
            w_a: -p.gravity() * e3(),
            r_tilde: Rotation::identity(),
            p_tilde: Vec3::zeros(),
        }
    }
}

/// True-versus-estimated errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverErrors {
    /// `R R̂ᵀ`
    pub r_tilde: Rotation,
    /// `Ω − R̃ Ω̂`
    pub omega_tilde: Vec3,
    /// `P − P̂`
    pub p_tilde: Vec3,
    /// `V − V̂`
    pub v_tilde: Vec3,
}

/// Time derivatives of the continuous observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverRates {
    pub attitude: Mat3,
    pub omega: Vec3,
    pub position: Vec3,
    pub velocity: Vec3,
}

pub fn correction_factors(
    pose: &ReconstructedPose,
    s: &ObserverState,
    thrust: f64,
    p: &VehicleParams,
    g: &ObserverGains,
) -> CorrectionTerms {
    let r_hat = s.attitude.matrix();
    let r_tilde = Rotation::from_matrix_unchecked(pose.attitude.matrix() * r_hat.transpose());
    let p_tilde = pose.position - s.position;
    let axis = pa_vex(r_tilde.matrix());
    let w_o = -g.gamma_o * (r_tilde.matrix().transpose() * axis);
    let w_omega = g.k_o1 * (pose.attitude.matrix().transpose() * axis);
    let w_v = -w_omega.cross(&s.position) - g.k_o2 * p_tilde;
    let w_a = -(thrust / p.mass())
        * (r_hat.transpose() * ((Mat3::identity() - r_tilde.matrix().transpose()) * e3()))
        - p.gravity() * e3()
        - w_omega.cross(&s.velocity)
        - g.k_o3 * p_tilde;
    CorrectionTerms {
        w_o,
        w_omega,
        w_v,
        w_a,
        r_tilde,
        p_tilde,
    }
}

/// `Û = u([Ω̂]×, 0, −(ℑ/m)e₃, 1)`.
pub fn prediction_tangent(s: &ObserverState, thrust: f64, p: &VehicleParams) -> TangentElement {
    input_tangent(&s.omega, thrust, p)
}

/// Prediction then correction of the navigation part:
/// `X̂ ← exp(−W dt) X̂ exp(Û dt)`. Ω̂ is left untouched.
///
/// Returns the new state and whether the attitude block had to be re-projected.
pub fn predict_correct_step(
    s: &ObserverState,
    w: &CorrectionTerms,
    thrust: f64,
    p: &VehicleParams,
    dt: f64,
) -> (ObserverState, bool) {
    let u = prediction_tangent(s, thrust, p);
    let predicted = s.nav().to_matrix() * se23_exp(&u, dt);
    let corrected = se23_exp(&(-w.tangent()), dt) * predicted;
    let (nav, repaired) =
        NavState::from_matrix_repaired(&corrected).expect("κ = 1 in both factors keeps the embedding");
    (
        ObserverState {
            attitude: nav.attitude,
            omega: s.omega,
            position: nav.position,
            velocity: nav.velocity,
        },
        repaired,
    )
}

/// Right-hand side of the angular-velocity estimate,
/// `Ĵ⁻¹([ĴΩ̂]×Ω̂ + R̃ᵀ𝒯 − Ĵ[Ω̂]×R̂w_Ω + w_o)` with `Ĵ = R̃ᵀJR̃`.
pub fn omega_rate(s: &ObserverState, w: &CorrectionTerms, torque: &Vec3, p: &VehicleParams) -> Vec3 {
    let rt = w.r_tilde.matrix();
    let j_hat = rt.transpose() * p.inertia() * rt;
    let j_hat_inv = rt.transpose() * p.inertia_inv() * rt;
    let omega = s.omega;
    let torque_hat = rt.transpose() * torque;
    let rhs = (j_hat * omega).cross(&omega) + torque_hat
        - j_hat * omega.cross(&(s.attitude.matrix() * w.w_omega))
        + w.w_o;
    j_hat_inv * rhs
}

/// Explicit Euler step of the angular-velocity estimate.
pub fn angular_velocity_step(
    s: &ObserverState,
    w: &CorrectionTerms,
    torque: &Vec3,
    p: &VehicleParams,
    dt: f64,
) -> Vec3 {
    s.omega + omega_rate(s, w, torque, p) * dt
}

/// The continuous observer: `R̂˙ = R̂[w_Ω]× − [Ω̂]×R̂`, `P̂˙ = V̂ − [w_Ω]×P̂ − w_V`,
/// `V̂˙ = −(ℑ/m)R̂ᵀe₃ − [w_Ω]×V̂ − w_a`, and [`omega_rate`].
pub fn continuous_rates(
    s: &ObserverState,
    w: &CorrectionTerms,
    torque: &Vec3,
    thrust: f64,
    p: &VehicleParams,
) -> ObserverRates {
    let r = s.attitude.matrix();
    let (position, velocity) = translational_rates(s, w, thrust, p);
    ObserverRates {
        attitude: r * skew(&w.w_omega) - skew(&s.omega) * r,
        omega: omega_rate(s, w, torque, p),
        position,
        velocity,
    }
}

/// `(P̂˙, V̂˙)` of the continuous observer.
pub fn translational_rates(
    s: &ObserverState,
    w: &CorrectionTerms,
    thrust: f64,
    p: &VehicleParams,
) -> (Vec3, Vec3) {
    let p_dot = s.velocity - w.w_omega.cross(&s.position) - w.w_v;
    let v_dot = -(thrust / p.mass()) * (s.attitude.matrix().transpose() * e3())
        - w.w_omega.cross(&s.velocity)
        - w.w_a;
    (p_dot, v_dot)
}

pub fn observer_errors(truth: &TrueState, s: &ObserverState) -> ObserverErrors {
    let r_tilde = truth.attitude * s.attitude.transpose();
    ObserverErrors {
        omega_tilde: truth.omega - r_tilde.matrix() * s.omega,
        r_tilde,
        p_tilde: truth.position - s.position,
        v_tilde: truth.velocity - s.velocity,
    }
}
