use std::ops::Mul;

use super::{AlgebraError, Mat3, Vec3};

/// Antisymmetry tolerance accepted by [`vex`].
pub const VEX_TOLERANCE: f64 = 1e-9;

/// Largest ‖RRᵀ − I‖_F a [`Rotation`] may carry before it is re-projected.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-9;

/// Below this angle the exponential coefficients come from their Taylor series.
const SERIES_ANGLE: f64 = 0.1;

/// Element of SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Validates orthonormality and a positive determinant.
    pub fn new(m: Mat3) -> Result<Self, AlgebraError> {
        let residual = (m * m.transpose() - Mat3::identity()).norm();
        let det = m.determinant();
        if residual > ORTHONORMALITY_TOLERANCE || (det - 1.0).abs() > ORTHONORMALITY_TOLERANCE {
            return Err(AlgebraError::NotRotation { residual, det });
        }
        Ok(Self(m))
    }

    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Self(m)
    }

    /// Nearest rotation in the Frobenius sense (polar decomposition).
    pub fn project(m: &Mat3) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd computed with u");
        let v_t = svd.v_t.expect("svd computed with v_t");
        // the reflection, if any, goes on the smallest singular direction
        let k = smallest_index(&svd.singular_values);
        let mut fix = Mat3::identity();
        fix[(k, k)] = (u * v_t).determinant().signum();
        Self(u * fix * v_t)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_inner(self) -> Mat3 {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// ‖RRᵀ − I‖_F
    pub fn orthonormality_error(&self) -> f64 {
        (self.0 * self.0.transpose() - Mat3::identity()).norm()
    }

    /// Re-projects onto SO(3) when drift exceeds the tolerance; returns whether it did.
    pub fn repair_if_drifted(&mut self) -> bool {
        let err = self.orthonormality_error();
        if err > ORTHONORMALITY_TOLERANCE {
            log::debug!("re-projecting rotation, orthonormality residual {err:.3e}");
            *self = Self::project(&self.0);
            true
        } else {
            false
        }
    }
}

fn smallest_index(s: &Vec3) -> usize {
    let mut idx = 0;
    for i in 1..3 {
        if s[i] < s[idx] {
            idx = i;
        }
    }
    idx
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for &Rotation {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// `[y]×`, so that `skew(y) * z == y.cross(z)`.
pub fn skew(y: &Vec3) -> Mat3 {
    Mat3::new(0.0, -y.z, y.y, y.z, 0.0, -y.x, -y.y, y.x, 0.0)
}

/// Inverse of [`skew`]; rejects inputs whose symmetric part exceeds [`VEX_TOLERANCE`].
pub fn vex(m: &Mat3) -> Result<Vec3, AlgebraError> {
    let sym = (m + m.transpose()).norm() * 0.5;
    if sym > VEX_TOLERANCE {
        return Err(AlgebraError::NotAntisymmetric(sym));
    }
    Ok(Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

/// `vex(P_a(A))` with `P_a(A) = ½(A − Aᵀ)`.
pub fn pa_vex(a: &Mat3) -> Vec3 {
    0.5 * Vec3::new(
        a[(2, 1)] - a[(1, 2)],
        a[(0, 2)] - a[(2, 0)],
        a[(1, 0)] - a[(0, 1)],
    )
}

/// Normalized distance `¼Tr{I − R}` in `[0, 1]`.
pub fn attitude_distance(r: &Rotation) -> f64 {
    0.25 * (3.0 - r.trace())
}

/// `Ψ(R) = Tr{R}·I − R`, the Jacobian of `vex(P_a(R))` along `Ṙ = −[ω]×R` (up to −½).
pub fn psi_matrix(r: &Rotation) -> Mat3 {
    Mat3::identity() * r.trace() - r.matrix()
}

/// Rodrigues coefficients shared by the SO(3) and SE₂(3) exponentials.
///
/// `a = sinθ/θ`, `b = (1−cosθ)/θ²`, `c = (θ−sinθ)/θ³`, `d = (θ²/2 + cosθ − 1)/θ⁴`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ExpCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl ExpCoefficients {
    pub fn new(theta: f64) -> Self {
        let t2 = theta * theta;
        if theta < SERIES_ANGLE {
            let t4 = t2 * t2;
            let t6 = t4 * t2;
            let t8 = t4 * t4;
            Self {
                a: 1.0 - t2 / 6.0 + t4 / 120.0 - t6 / 5040.0 + t8 / 362_880.0,
                b: 0.5 - t2 / 24.0 + t4 / 720.0 - t6 / 40_320.0 + t8 / 3_628_800.0,
                c: 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0 - t6 / 362_880.0 + t8 / 39_916_800.0,
                d: 1.0 / 24.0 - t2 / 720.0 + t4 / 40_320.0 - t6 / 3_628_800.0
                    + t8 / 479_001_600.0,
            }
        } else {
            let s = theta.sin();
            let half = (0.5 * theta).sin();
            let one_minus_cos = 2.0 * half * half;
            Self {
                a: s / theta,
                b: one_minus_cos / t2,
                c: (theta - s) / (t2 * theta),
                d: (0.5 * t2 - one_minus_cos) / (t2 * t2),
            }
        }
    }
}

/// `exp([y]×)`, closed form.
pub fn so3_exp(y: &Vec3) -> Rotation {
    let k = ExpCoefficients::new(y.norm());
    let s = skew(y);
    Rotation(Mat3::identity() + s * k.a + s * s * k.b)
}

/// The three non-attractive equilibria `Tr{R} = −1` on the coordinate axes.
pub fn unstable_set() -> [Rotation; 3] {
    [
        Rotation(Mat3::from_diagonal(&Vec3::new(-1.0, -1.0, 1.0))),
        Rotation(Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, -1.0))),
        Rotation(Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0))),
    ]
}

/// True when `Tr{R} = −1` within `tol`.
pub fn in_unstable_set(r: &Rotation, tol: f64) -> bool {
    (r.trace() + 1.0).abs() <= tol
}
