//! Gyro-free, GPS-free navigation observer and observer-based tracking
//! controller for VTOL UAVs, formulated on SE₂(3).
//!
//! The estimator consumes only body-frame vector and landmark measurements.
//! Angular velocity, position and linear velocity are all reconstructed by
//! the observer; the controller runs on those estimates.

pub mod dynamics;
pub mod liegroup;
pub mod controller;
pub mod observer;
pub mod quat_variant;
pub mod sensing;
pub mod sim;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GainError {
    #[error("gain {name} must be strictly positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

pub(crate) fn check_gain(name: &'static str, value: f64) -> Result<f64, GainError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(GainError::NonPositive { name, value })
    }
}
