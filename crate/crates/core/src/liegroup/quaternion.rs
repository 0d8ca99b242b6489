use std::ops::Mul;

use super::so3::{skew, Rotation};
use super::{AlgebraError, Mat3, Vec3};

/// Norm drift above which a product is renormalized.
const RENORM_THRESHOLD: f64 = 1e-12;

/// Unit quaternion `[q0, q]`, stored with `q0 ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    pub w: f64,
    pub v: Vec3,
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self {
            w: 1.0,
            v: Vec3::zeros(),
        }
    }

    /// Normalizes and canonicalizes the sign.
    pub fn new(w: f64, v: Vec3) -> Result<Self, AlgebraError> {
        let n = (w * w + v.norm_squared()).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(AlgebraError::ZeroQuaternion);
        }
        Ok(Self::from_raw(w / n, v / n).canonical())
    }

    /// Wraps components without normalizing or sign canonicalization.
    pub fn from_raw(w: f64, v: Vec3) -> Self {
        Self { w, v }
    }

    pub fn canonical(self) -> Self {
        if self.w < 0.0 {
            Self::from_raw(-self.w, -self.v)
        } else {
            self
        }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.v.norm_squared()).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::from_raw(self.w / n, self.v / n)
    }

    pub fn inverse(&self) -> Self {
        Self::from_raw(self.w, -self.v)
    }

    /// `[q01 q02 − q1ᵀq2, q01 q2 + q02 q1 + q1 × q2]`, renormalized on drift.
    pub fn product(&self, rhs: &Self) -> Self {
        self.product_uncanonical(rhs).canonical()
    }

    /// Same as [`product`](Self::product) but keeps the sign of the raw result,
    /// which kinematic differences need.
    pub fn product_uncanonical(&self, rhs: &Self) -> Self {
        let raw = raw_product(self, rhs);
        let drift = (raw.norm() - 1.0).abs();
        if drift > RENORM_THRESHOLD {
            raw.normalized()
        } else {
            raw
        }
    }

    /// `(q0² − ‖q‖²)I + 2qqᵀ − 2q0[q]×`.
    ///
    /// This map reverses order: `R(Q1 ⊙ Q2) = R(Q2)·R(Q1)`.
    pub fn to_rotation(&self) -> Rotation {
        let q0 = self.w;
        let q = self.v;
        let m = Mat3::identity() * (q0 * q0 - q.norm_squared()) + q * q.transpose() * 2.0
            - skew(&q) * (2.0 * q0);
        Rotation::from_matrix_unchecked(m)
    }

    /// Inverse of [`to_rotation`](Self::to_rotation), canonical sign.
    pub fn from_rotation(r: &Rotation) -> Self {
        // R(Q) is the transpose of the usual active map, so decompose Rᵀ.
        let m = r.matrix().transpose();
        let tr = m.trace();
        let (w, x, y, z);
        if tr > m[(0, 0)] && tr > m[(1, 1)] && tr > m[(2, 2)] {
            let s = (1.0 + tr).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m[(2, 1)] - m[(1, 2)]) / s;
            y = (m[(0, 2)] - m[(2, 0)]) / s;
            z = (m[(1, 0)] - m[(0, 1)]) / s;
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            w = (m[(2, 1)] - m[(1, 2)]) / s;
            x = 0.25 * s;
            y = (m[(0, 1)] + m[(1, 0)]) / s;
            z = (m[(0, 2)] + m[(2, 0)]) / s;
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            w = (m[(0, 2)] - m[(2, 0)]) / s;
            x = (m[(0, 1)] + m[(1, 0)]) / s;
            y = 0.25 * s;
            z = (m[(1, 2)] + m[(2, 1)]) / s;
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            w = (m[(1, 0)] - m[(0, 1)]) / s;
            x = (m[(0, 2)] + m[(2, 0)]) / s;
            y = (m[(1, 2)] + m[(2, 1)]) / s;
            z = 0.25 * s;
        }
        Self::from_raw(w, Vec3::new(x, y, z)).normalized().canonical()
    }

    /// `[cos(‖φ‖/2), sin(‖φ‖/2) φ/‖φ‖]`; its rotation is `so3_exp(−φ)`.
    pub fn exp(phi: &Vec3) -> Self {
        let angle = phi.norm();
        let half = 0.5 * angle;
        // sin(half)/angle, with its series near zero
        let k = if angle < 1e-4 {
            0.5 - angle * angle / 48.0
        } else {
            half.sin() / angle
        };
        Self::from_raw(half.cos(), phi * k)
    }
}

fn raw_product(a: &UnitQuaternion, b: &UnitQuaternion) -> UnitQuaternion {
    UnitQuaternion::from_raw(
        a.w * b.w - a.v.dot(&b.v),
        b.v * a.w + a.v * b.w + a.v.cross(&b.v),
    )
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;
    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        self.product(&rhs)
    }
}

pub fn quat_product(a: &UnitQuaternion, b: &UnitQuaternion) -> UnitQuaternion {
    a.product(b)
}

pub fn quat_to_rotation(q: &UnitQuaternion) -> Rotation {
    q.to_rotation()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::so3_exp;

    fn sample() -> UnitQuaternion {
        UnitQuaternion::new(0.7, Vec3::new(0.1, -0.5, 0.3)).unwrap()
    }

    #[test]
    fn identity_is_neutral() {
        let q = sample();
        let p = q * UnitQuaternion::identity();
        assert!((p.w - q.w).abs() < 1e-15);
        assert!((p.v - q.v).norm() < 1e-15);
    }

    #[test]
    fn inverse_cancels() {
        let q = sample();
        let p = q * q.inverse();
        assert!((p.w - 1.0).abs() < 1e-15);
        assert!(p.v.norm() < 1e-15);
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(
            *UnitQuaternion::identity().to_rotation().matrix(),
            Mat3::identity()
        );
        let r = UnitQuaternion::from_raw(0.0, Vec3::new(1.0, 0.0, 0.0)).to_rotation();
        assert_eq!(
            *r.matrix(),
            Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0))
        );
    }

    #[test]
    fn rotation_roundtrip_and_sign() {
        let q = sample();
        let back = UnitQuaternion::from_rotation(&q.to_rotation());
        assert!((back.w - q.w).abs() < 1e-14);
        assert!((back.v - q.v).norm() < 1e-14);
        let neg = UnitQuaternion::from_raw(-q.w, -q.v);
        assert!((neg.to_rotation().matrix() - q.to_rotation().matrix()).norm() < 1e-15);
    }

    #[test]
    fn zero_quaternion_rejected() {
        assert_eq!(
            UnitQuaternion::new(0.0, Vec3::zeros()),
            Err(AlgebraError::ZeroQuaternion)
        );
    }

    #[test]
    fn exp_maps_to_passive_rotation() {
        let phi = Vec3::new(0.3, -0.2, 0.9);
        let r = UnitQuaternion::exp(&phi).to_rotation();
        assert!((r.matrix() - so3_exp(&(-phi)).matrix()).norm() < 1e-15);
        let tiny = Vec3::new(1e-6, 0.0, -2e-6);
        let r = UnitQuaternion::exp(&tiny).to_rotation();
        assert!((r.matrix() - so3_exp(&(-tiny)).matrix()).norm() < 1e-15);
    }
}
