//! Reference computations that share no code path with `vtol-nav`.

use nalgebra::{Quaternion, SMatrix, UnitQuaternion as NaQuat, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

pub type V3 = Vector3<f64>;
pub type M3 = SMatrix<f64, 3, 3>;
pub type M5 = SMatrix<f64, 5, 5>;

/// `Σ_{k<terms} Mᵏ/k!` by repeated multiplication.
pub fn series_exp<const N: usize>(m: &SMatrix<f64, N, N>, terms: usize) -> SMatrix<f64, N, N> {
    let mut sum = SMatrix::<f64, N, N>::identity();
    let mut term = SMatrix::<f64, N, N>::identity();
    for k in 1..terms {
        term = term * m / k as f64;
        sum += term;
    }
    sum
}

/// Cross-product matrix written entry by entry.
pub fn skew(y: &V3) -> M3 {
    let mut m = M3::zeros();
    m[(0, 1)] = -y[2];
    m[(0, 2)] = y[1];
    m[(1, 0)] = y[2];
    m[(1, 2)] = -y[0];
    m[(2, 0)] = -y[1];
    m[(2, 1)] = y[0];
    m
}

/// `vex(½(A − Aᵀ))` from the off-diagonal entries.
pub fn pa_vex(a: &M3) -> V3 {
    V3::new(
        0.5 * (a[(2, 1)] - a[(1, 2)]),
        0.5 * (a[(0, 2)] - a[(2, 0)]),
        0.5 * (a[(1, 0)] - a[(0, 1)]),
    )
}

/// `¼ Tr(I − R)`.
pub fn normalized_distance(r: &M3) -> f64 {
    0.25 * (3.0 - r[(0, 0)] - r[(1, 1)] - r[(2, 2)])
}

/// 5×5 embedding `[[ [ω]×, v, a ], [0, 0, 0], [0, κ, 0]]`.
pub fn tangent_matrix(omega: &V3, v: &V3, a: &V3, kappa: f64) -> M5 {
    let mut m = M5::zeros();
    let s = skew(omega);
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = s[(i, j)];
        }
        m[(i, 3)] = v[i];
        m[(i, 4)] = a[i];
    }
    m[(4, 3)] = kappa;
    m
}

/// Hamilton product on `[w, x, y, z]`.
pub fn hamilton(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    let [a0, a1, a2, a3] = *a;
    let [b0, b1, b2, b3] = *b;
    [
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    ]
}

pub fn conjugate(q: &[f64; 4]) -> [f64; 4] {
    [q[0], -q[1], -q[2], -q[3]]
}

/// Uniformly distributed rotation matrix.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> M3 {
    let q = Quaternion::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    );
    NaQuat::from_quaternion(q).to_rotation_matrix().into_inner()
}

/// Vector with components uniform in `[-scale, scale)`.
pub fn random_vec<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> V3 {
    V3::from_fn(|_, _| rng.random_range(-scale..scale))
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> M3 {
    M3::from_fn(|_, _| rng.random_range(-scale..scale))
}

/// Largest absolute entry.
pub fn max_abs<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_matches_rotation_about_z() {
        let e = series_exp(&skew(&V3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2)), 30);
        let expected = M3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!(max_abs(&(e - expected)) < 1e-14);
    }

    #[test]
    fn skew_is_cross_product() {
        let (a, b) = (V3::new(1.0, -2.0, 0.5), V3::new(0.3, 4.0, -1.0));
        assert!((skew(&a) * b - a.cross(&b)).norm() < 1e-15);
    }

    #[test]
    fn hamilton_unit_elements() {
        let i = [0.0, 1.0, 0.0, 0.0];
        let j = [0.0, 0.0, 1.0, 0.0];
        assert_eq!(hamilton(&i, &j), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(hamilton(&j, &i), [0.0, 0.0, 0.0, -1.0]);
        assert_eq!(hamilton(&i, &i), [-1.0, 0.0, 0.0, 0.0]);
    }
}
