use std::ops::Neg;

use super::so3::{skew, ExpCoefficients, Rotation};
use super::{AlgebraError, Mat3, Mat5, Vec3};

/// Tolerance on the constant bottom rows of a navigation matrix.
const NAV_ROW_TOLERANCE: f64 = 1e-9;

/// Attitude, position and velocity bundled as an SE₂(3) element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub attitude: Rotation,
    pub position: Vec3,
    pub velocity: Vec3,
}

impl NavState {
    pub fn new(attitude: Rotation, position: Vec3, velocity: Vec3) -> Self {
        Self {
            attitude,
            position,
            velocity,
        }
    }

    /// `[[Rᵀ, P, V], [0, 1, 0], [0, 0, 1]]`
    pub fn to_matrix(&self) -> Mat5 {
        let mut x = Mat5::identity();
        x.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.attitude.matrix().transpose());
        x.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        x.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.velocity);
        x
    }

    /// Unpacks a navigation matrix; the attitude is the transposed upper-left block.
    pub fn from_matrix(x: &Mat5) -> Result<Self, AlgebraError> {
        let mut expected = Mat5::identity();
        expected
            .fixed_view_mut::<3, 5>(0, 0)
            .copy_from(&x.fixed_view::<3, 5>(0, 0));
        let dev = (x - expected).norm();
        if dev > NAV_ROW_TOLERANCE {
            return Err(AlgebraError::NotNavigationMatrix(dev));
        }
        let block: Mat3 = x.fixed_view::<3, 3>(0, 0).into_owned();
        Ok(Self {
            attitude: Rotation::new(block.transpose())?,
            position: x.fixed_view::<3, 1>(0, 3).into_owned(),
            velocity: x.fixed_view::<3, 1>(0, 4).into_owned(),
        })
    }

    /// Like [`from_matrix`](Self::from_matrix) but re-projects a drifted attitude
    /// block instead of rejecting it. Returns whether a repair happened.
    pub fn from_matrix_repaired(x: &Mat5) -> Result<(Self, bool), AlgebraError> {
        let mut expected = Mat5::identity();
        expected
            .fixed_view_mut::<3, 5>(0, 0)
            .copy_from(&x.fixed_view::<3, 5>(0, 0));
        let dev = (x - expected).norm();
        if dev > NAV_ROW_TOLERANCE {
            return Err(AlgebraError::NotNavigationMatrix(dev));
        }
        let block: Mat3 = x.fixed_view::<3, 3>(0, 0).into_owned();
        let mut attitude = Rotation::from_matrix_unchecked(block.transpose());
        let repaired = attitude.repair_if_drifted();
        Ok((
            Self {
                attitude,
                position: x.fixed_view::<3, 1>(0, 3).into_owned(),
                velocity: x.fixed_view::<3, 1>(0, 4).into_owned(),
            },
            repaired,
        ))
    }
}

/// Element `u([ω]×, v, a, κ)` of the tangent space:
/// `[[ [ω]×, v, a ], [0, 0, 0], [0, κ, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentElement {
    pub omega: Vec3,
    pub v: Vec3,
    pub a: Vec3,
    pub kappa: f64,
}

impl TangentElement {
    pub fn new(omega: Vec3, v: Vec3, a: Vec3, kappa: f64) -> Self {
        Self { omega, v, a, kappa }
    }

    pub fn zero() -> Self {
        Self::new(Vec3::zeros(), Vec3::zeros(), Vec3::zeros(), 0.0)
    }

    pub fn to_matrix(&self) -> Mat5 {
        let mut m = Mat5::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&self.omega));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.v);
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.a);
        m[(4, 3)] = self.kappa;
        m
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.omega * s, self.v * s, self.a * s, self.kappa * s)
    }
}

impl Neg for TangentElement {
    type Output = TangentElement;
    fn neg(self) -> TangentElement {
        self.scaled(-1.0)
    }
}

/// Exact `exp(U·dt)` of the 5×5 embedding, in closed form.
///
/// With `S = [ω dt]×`, `Γ₁ = I + bS + cS²` and `Γ₂ = ½I + cS + dS²` the result is
/// `[[exp(S), (Γ₁v + κΓ₂a·dt)dt, Γ₁a·dt], [0, 1, 0], [0, κdt, 1]]`.
pub fn se23_exp(u: &TangentElement, dt: f64) -> Mat5 {
    let phi = u.omega * dt;
    let k = ExpCoefficients::new(phi.norm());
    let s = skew(&phi);
    let s2 = s * s;
    let id = Mat3::identity();
    let rot = id + s * k.a + s2 * k.b;
    let gamma1 = id + s * k.b + s2 * k.c;
    let gamma2 = id * 0.5 + s * k.c + s2 * k.d;
    let v = u.v * dt;
    let a = u.a * dt;
    let kappa = u.kappa * dt;

    let mut e = Mat5::identity();
    e.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
    e.fixed_view_mut::<3, 1>(0, 3)
        .copy_from(&(gamma1 * v + gamma2 * a * kappa));
    e.fixed_view_mut::<3, 1>(0, 4).copy_from(&(gamma1 * a));
    e[(4, 3)] = kappa;
    e
}
