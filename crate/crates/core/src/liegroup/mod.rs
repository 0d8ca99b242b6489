//! SO(3), SE₂(3) and unit-quaternion algebra.
//!
//! Attitude follows the passive (body-frame) convention used throughout the
//! crate: a rotation `R` maps inertial vectors into the body frame and evolves
//! as `Ṙ = −[Ω]×R`. The navigation matrix stores `Rᵀ` in its upper-left block.

mod quaternion;
mod se23;
mod so3;

pub use quaternion::{quat_product, quat_to_rotation, UnitQuaternion};
pub use se23::{se23_exp, NavState, TangentElement};
pub use so3::{
    attitude_distance, in_unstable_set, pa_vex, psi_matrix, skew, so3_exp, unstable_set, vex,
    Rotation,
};

use nalgebra::{Matrix3, Matrix5, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat5 = Matrix5<f64>;

/// Standard basis vector e₃; gravity acts along +e₃.
pub fn e3() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("matrix is not antisymmetric (symmetric part norm {0:.3e})")]
    NotAntisymmetric(f64),
    #[error("matrix is not a rotation (orthonormality residual {residual:.3e}, det {det:.6})")]
    NotRotation { residual: f64, det: f64 },
    #[error("matrix is not in SE2(3): bottom rows deviate by {0:.3e}")]
    NotNavigationMatrix(f64),
    #[error("quaternion has zero norm")]
    ZeroQuaternion,
}
