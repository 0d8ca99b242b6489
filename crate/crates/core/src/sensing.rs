//! Body-frame vector and landmark measurements, pose reconstruction and
//! observability classification.

use nalgebra::{Dyn, OMatrix, U3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::liegroup::{Mat3, Rotation, Vec3};

/// Relative singular-value floor used for rank and collinearity decisions.
pub const COLLINEARITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensingError {
    #[error("attitude reconstruction is degenerate (singular value ratio {0:.3e})")]
    Degenerate(f64),
    #[error("position reconstruction needs at least one landmark with positive total weight")]
    NoLandmarks,
    #[error("frame has {got} {kind} measurements, suite expects {expected}")]
    LengthMismatch {
        kind: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("sensor configuration is unobservable")]
    Unobservable,
    #[error("invalid reference: {0}")]
    InvalidReference(String),
}

/// A known inertial direction observed in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertialReference {
    pub direction: Vec3,
    pub bias: Vec3,
    pub noise_std: f64,
    pub weight: f64,
}

/// A known inertial point observed relative to the vehicle in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkReference {
    pub position: Vec3,
    pub bias: Vec3,
    pub noise_std: f64,
    pub weight: f64,
}

/// One sample of every sensor in a suite.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFrame {
    pub timestamp: f64,
    pub vectors: Vec<Vec3>,
    pub landmarks: Vec<Vec3>,
}

/// Attitude and position recovered from a single frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructedPose {
    pub attitude: Rotation,
    pub position: Vec3,
}

/// Which sufficient condition for pose recovery a configuration meets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observability {
    /// At least one landmark and two non-collinear vectors.
    A1,
    /// Two landmarks and one vector, not collinear with the landmark baseline.
    A2,
    /// Three or more non-collinear landmarks.
    A3,
    Unobservable,
}

impl Observability {
    pub fn is_observable(self) -> bool {
        self != Observability::Unobservable
    }
}

/// Inertial direction, body direction, weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPair {
    pub inertial: Vec3,
    pub body: Vec3,
    pub weight: f64,
}

fn gaussian<R: Rng + ?Sized>(std: f64, rng: &mut R) -> Vec3 {
    if std == 0.0 {
        return Vec3::zeros();
    }
    let n = Normal::new(0.0, std).expect("noise std is finite and non-negative");
    Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng))
}

/// `y = R v + b + n`.
pub fn synth_vector_meas<R: Rng + ?Sized>(
    attitude: &Rotation,
    reference: &InertialReference,
    rng: &mut R,
) -> Vec3 {
    attitude.matrix() * reference.direction + reference.bias + gaussian(reference.noise_std, rng)
}

/// `z = R (p − P) + b + n`.
pub fn synth_landmark_meas<R: Rng + ?Sized>(
    attitude: &Rotation,
    position: &Vec3,
    reference: &LandmarkReference,
    rng: &mut R,
) -> Vec3 {
    attitude.matrix() * (reference.position - position)
        + reference.bias
        + gaussian(reference.noise_std, rng)
}

/// Weighted least-squares attitude from direction pairs.
///
/// Both directions of each pair are unit-normalized. With
/// `B = Σ sᵢ yᵢ rᵢᵀ = U S Vᵀ` the result is `U diag(1, 1, det U det V) Vᵀ`,
/// the proper rotation closest to mapping each `rᵢ` onto `yᵢ`.
pub fn svd_attitude(pairs: &[WeightedPair]) -> Result<Rotation, SensingError> {
    let mut b = Mat3::zeros();
    for p in pairs {
        let (nr, ny) = (p.inertial.norm(), p.body.norm());
        if nr == 0.0 || ny == 0.0 {
            continue;
        }
        b += (p.body / ny) * (p.inertial / nr).transpose() * p.weight;
    }
    let svd = b.svd(true, true);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let ratio = if s[0] > 0.0 { s[1] / s[0] } else { 0.0 };
    if !(ratio > COLLINEARITY_TOLERANCE) {
        return Err(SensingError::Degenerate(ratio));
    }
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let k = smallest_index(&svd.singular_values);
    let mut fix = Mat3::identity();
    fix[(k, k)] = u.determinant() * v_t.determinant();
    Ok(Rotation::from_matrix_unchecked(u * fix * v_t))
}

fn smallest_index(s: &Vec3) -> usize {
    (1..3).fold(0, |idx, i| if s[i] < s[idx] { i } else { idx })
}

/// Weighted centroids `p_c`, `z_c` and `P_y = p_c − R_yᵀ z_c`.
///
/// Each entry is `(landmark position, measurement, weight)`.
pub fn reconstruct_position(
    landmarks: &[(Vec3, Vec3, f64)],
    attitude: &Rotation,
) -> Result<Vec3, SensingError> {
    let (pc, zc) = weighted_centroids(landmarks)?;
    Ok(pc - attitude.matrix().transpose() * zc)
}

fn weighted_centroids(landmarks: &[(Vec3, Vec3, f64)]) -> Result<(Vec3, Vec3), SensingError> {
    let sc: f64 = landmarks.iter().map(|l| l.2).sum();
    if landmarks.is_empty() || !(sc > 0.0) {
        return Err(SensingError::NoLandmarks);
    }
    let pc = landmarks.iter().map(|l| l.0 * l.2).sum::<Vec3>() / sc;
    let zc = landmarks.iter().map(|l| l.1 * l.2).sum::<Vec3>() / sc;
    Ok((pc, zc))
}

/// Second singular value of the stacked unit directions, relative to the first.
/// Zero-length directions are ignored.
fn spread(directions: &[Vec3]) -> f64 {
    let units: Vec<Vec3> = directions
        .iter()
        .filter(|d| d.norm() > 0.0)
        .map(|d| d.normalize())
        .collect();
    if units.len() < 2 {
        return 0.0;
    }
    let m = OMatrix::<f64, Dyn, U3>::from_fn(units.len(), |i, j| units[i][j]);
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s[1] / s[0]
}

fn non_collinear(directions: &[Vec3]) -> bool {
    spread(directions) > COLLINEARITY_TOLERANCE
}

/// Distinct landmarks up to an absolute position tolerance.
fn distinct(points: &[Vec3]) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::new();
    for p in points {
        if out.iter().all(|q| (p - q).norm() > COLLINEARITY_TOLERANCE) {
            out.push(*p);
        }
    }
    out
}

/// Classifies a reference configuration, trying A1, then A2, then A3.
pub fn observability_check(landmarks: &[Vec3], vectors: &[Vec3]) -> Observability {
    let points = distinct(landmarks);
    let vectors: Vec<Vec3> = vectors.iter().filter(|v| v.norm() > 0.0).copied().collect();
    if !points.is_empty() && non_collinear(&vectors) {
        return Observability::A1;
    }
    if points.len() >= 2 && !vectors.is_empty() {
        let baselines: Vec<Vec3> = points[1..].iter().map(|p| p - points[0]).collect();
        if vectors
            .iter()
            .any(|v| baselines.iter().any(|b| non_collinear(&[*b, *v])))
        {
            return Observability::A2;
        }
    }
    if points.len() >= 3 {
        let baselines: Vec<Vec3> = points[1..].iter().map(|p| p - points[0]).collect();
        if non_collinear(&baselines) {
            return Observability::A3;
        }
    }
    Observability::Unobservable
}

/// The full set of references a vehicle carries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SensorSuite {
    pub vectors: Vec<InertialReference>,
    pub landmarks: Vec<LandmarkReference>,
}

impl SensorSuite {
    /// Two inertial directions with constant biases and seven landmarks, all
    /// with the given noise level.
    pub fn reference(noise_std: f64, biased: bool) -> Self {
        let vb = |b: [f64; 3]| if biased { Vec3::from(b) } else { Vec3::zeros() };
        let vectors = vec![
            InertialReference {
                direction: Vec3::new(0.0, 0.0, 1.0),
                bias: vb([0.0, 0.0, -0.15]),
                noise_std,
                weight: 1.0,
            },
            InertialReference {
                direction: Vec3::new(1.0, -1.0, -1.0),
                bias: vb([0.1, 0.09, -0.11]),
                noise_std,
                weight: 1.0,
            },
        ];
        let positions = [
            [5.0, 4.0, 3.0],
            [-4.5, 3.5, 5.5],
            [3.5, -5.0, 8.0],
            [-5.5, -4.0, 2.5],
            [0.5, 6.0, 10.5],
            [6.5, -1.0, 11.0],
            [-2.0, -6.5, 7.0],
        ];
        let biases = [
            [0.05, -0.03, 0.02],
            [-0.04, 0.06, -0.01],
            [0.02, 0.01, -0.05],
            [-0.06, -0.02, 0.03],
            [0.03, -0.05, 0.04],
            [-0.01, 0.04, -0.06],
            [0.04, 0.02, 0.01],
        ];
        let landmarks = positions
            .iter()
            .zip(biases.iter())
            .map(|(p, b)| LandmarkReference {
                position: Vec3::from(*p),
                bias: vb(*b),
                noise_std,
                weight: 1.0,
            })
            .collect();
        Self { vectors, landmarks }
    }

    /// Same geometry without vector references.
    pub fn landmarks_only(&self) -> Self {
        Self {
            vectors: Vec::new(),
            landmarks: self.landmarks.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), SensingError> {
        for (i, v) in self.vectors.iter().enumerate() {
            if !(v.direction.norm() > 0.0) {
                return Err(SensingError::InvalidReference(format!(
                    "vector {i} has zero direction"
                )));
            }
            if !(v.weight > 0.0) || !(v.noise_std >= 0.0) {
                return Err(SensingError::InvalidReference(format!(
                    "vector {i} needs weight > 0 and noise std >= 0"
                )));
            }
        }
        for (j, l) in self.landmarks.iter().enumerate() {
            if !(l.weight > 0.0) || !(l.noise_std >= 0.0) || !l.position.iter().all(|c| c.is_finite()) {
                return Err(SensingError::InvalidReference(format!(
                    "landmark {j} needs finite position, weight > 0 and noise std >= 0"
                )));
            }
        }
        Ok(())
    }

    pub fn observability(&self) -> Observability {
        let p: Vec<Vec3> = self.landmarks.iter().map(|l| l.position).collect();
        let v: Vec<Vec3> = self.vectors.iter().map(|r| r.direction).collect();
        observability_check(&p, &v)
    }

    /// Samples every sensor. Draw order: vectors, then landmarks, x/y/z per sensor.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        attitude: &Rotation,
        position: &Vec3,
        timestamp: f64,
        rng: &mut R,
    ) -> MeasurementFrame {
        let vectors = self
            .vectors
            .iter()
            .map(|r| synth_vector_meas(attitude, r, rng))
            .collect();
        let landmarks = self
            .landmarks
            .iter()
            .map(|r| synth_landmark_meas(attitude, position, r, rng))
            .collect();
        MeasurementFrame {
            timestamp,
            vectors,
            landmarks,
        }
    }

    /// Recovers `(R_y, P_y)` from a frame.
    ///
    /// Attitude comes from the vector references (augmented with the cross
    /// product of the first two) when they are non-collinear. Otherwise
    /// landmark offsets from the weighted centroid supply the directions.
    /// Position always comes from the landmarks.
    pub fn reconstruct(&self, frame: &MeasurementFrame) -> Result<ReconstructedPose, SensingError> {
        if frame.vectors.len() != self.vectors.len() {
            return Err(SensingError::LengthMismatch {
                kind: "vector",
                got: frame.vectors.len(),
                expected: self.vectors.len(),
            });
        }
        if frame.landmarks.len() != self.landmarks.len() {
            return Err(SensingError::LengthMismatch {
                kind: "landmark",
                got: frame.landmarks.len(),
                expected: self.landmarks.len(),
            });
        }
        let marks: Vec<(Vec3, Vec3, f64)> = self
            .landmarks
            .iter()
            .zip(frame.landmarks.iter())
            .map(|(r, z)| (r.position, *z, r.weight))
            .collect();
        let vector_pairs = self.vector_pairs(&frame.vectors);
        let directions: Vec<Vec3> = self.vectors.iter().map(|r| r.direction).collect();
        let attitude = if non_collinear(&directions) {
            svd_attitude(&vector_pairs)?
        } else {
            let (pc, zc) = weighted_centroids(&marks)?;
            let mut pairs = vector_pairs;
            pairs.extend(marks.iter().map(|(p, z, s)| WeightedPair {
                inertial: p - pc,
                body: z - zc,
                weight: *s,
            }));
            svd_attitude(&pairs)?
        };
        let position = reconstruct_position(&marks, &attitude)?;
        Ok(ReconstructedPose { attitude, position })
    }

    fn vector_pairs(&self, measured: &[Vec3]) -> Vec<WeightedPair> {
        let mut pairs: Vec<WeightedPair> = self
            .vectors
            .iter()
            .zip(measured.iter())
            .map(|(r, y)| WeightedPair {
                inertial: r.direction,
                body: *y,
                weight: r.weight,
            })
            .collect();
        if pairs.len() >= 2 {
            let v3 = pairs[0].inertial.cross(&pairs[1].inertial);
            let y3 = pairs[0].body.cross(&pairs[1].body);
            pairs.push(WeightedPair {
                inertial: v3,
                body: y3,
                weight: 1.0,
            });
        }
        pairs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::so3_exp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn clean_vector_measurement() {
        let r = InertialReference {
            direction: Vec3::new(0.0, 0.0, 1.0),
            bias: Vec3::zeros(),
            noise_std: 0.0,
            weight: 1.0,
        };
        assert_eq!(
            synth_vector_meas(&Rotation::identity(), &r, &mut rng()),
            Vec3::new(0.0, 0.0, 1.0)
        );
        let biased = InertialReference {
            bias: Vec3::new(0.0, 0.0, -0.15),
            ..r
        };
        let y = synth_vector_meas(&Rotation::identity(), &biased, &mut rng());
        assert!((y - Vec3::new(0.0, 0.0, 0.85)).norm() < 1e-15);
    }

    #[test]
    fn clean_landmark_measurement() {
        let l = LandmarkReference {
            position: Vec3::new(1.0, 2.0, 3.0),
            bias: Vec3::zeros(),
            noise_std: 0.0,
            weight: 1.0,
        };
        let z = synth_landmark_meas(&Rotation::identity(), &Vec3::zeros(), &l, &mut rng());
        assert_eq!(z, l.position);
        let r = so3_exp(&Vec3::new(0.3, 1.0, -0.4));
        assert_eq!(synth_landmark_meas(&r, &l.position, &l, &mut rng()), Vec3::zeros());
    }

    #[test]
    fn single_landmark_position() {
        let p = Vec3::new(-2.0, -1.0, 0.0);
        let mark = Vec3::new(1.0, 1.0, 1.0);
        let y = reconstruct_position(&[(mark, mark - p, 1.0)], &Rotation::identity()).unwrap();
        assert_eq!(y, p);
        assert_eq!(
            reconstruct_position(&[], &Rotation::identity()),
            Err(SensingError::NoLandmarks)
        );
    }

    #[test]
    fn identity_pairs_recover_identity() {
        let pairs = [Vec3::x(), Vec3::y(), Vec3::z()].map(|d| WeightedPair {
            inertial: d,
            body: d,
            weight: 1.0,
        });
        let r = svd_attitude(&pairs).unwrap();
        assert!((r.matrix() - Mat3::identity()).norm() < 1e-14);
    }

    #[test]
    fn collinear_pairs_are_degenerate() {
        let pairs = [Vec3::x(), -Vec3::x() * 2.0].map(|d| WeightedPair {
            inertial: d,
            body: d,
            weight: 1.0,
        });
        assert!(matches!(svd_attitude(&pairs), Err(SensingError::Degenerate(_))));
    }

    #[test]
    fn reference_suite_recovers_pose() {
        let suite = SensorSuite::reference(0.0, false);
        let r = so3_exp(&Vec3::new(2.0, -1.0, 0.5));
        let p = Vec3::new(-2.0, -1.0, 0.0);
        let frame = suite.measure(&r, &p, 0.0, &mut rng());
        let pose = suite.reconstruct(&frame).unwrap();
        assert!((pose.attitude.matrix() - r.matrix()).norm() < 1e-10);
        assert!((pose.position - p).norm() < 1e-10);

        let lm = suite.landmarks_only();
        let frame = lm.measure(&r, &p, 0.0, &mut rng());
        let pose = lm.reconstruct(&frame).unwrap();
        assert!((pose.attitude.matrix() - r.matrix()).norm() < 1e-10);
        assert!((pose.position - p).norm() < 1e-10);
    }

    #[test]
    fn reconstruction_rejects_wrong_lengths() {
        let suite = SensorSuite::reference(0.0, false);
        let frame = MeasurementFrame {
            timestamp: 0.0,
            vectors: vec![],
            landmarks: vec![],
        };
        assert!(matches!(
            suite.reconstruct(&frame),
            Err(SensingError::LengthMismatch { kind: "vector", .. })
        ));
    }

    #[test]
    fn observability_classes() {
        let v = [Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, -1.0, -1.0)];
        assert_eq!(observability_check(&[Vec3::new(1.0, 2.0, 3.0)], &v), Observability::A1);
        let line = [Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        assert_eq!(observability_check(&line, &[]), Observability::Unobservable);
        assert_eq!(
            observability_check(&line[..2], &[Vec3::y()]),
            Observability::A2
        );
        assert_eq!(
            observability_check(&line[..2], &[Vec3::x()]),
            Observability::Unobservable
        );
        assert_eq!(
            SensorSuite::reference(0.0, false).landmarks_only().observability(),
            Observability::A3
        );
        assert_eq!(SensorSuite::reference(0.05, true).observability(), Observability::A1);
        // repeated landmarks do not count as distinct
        let dup = [Vec3::x(), Vec3::x(), Vec3::y()];
        assert_eq!(observability_check(&dup, &[]), Observability::Unobservable);
    }

    #[test]
    fn validation() {
        let mut s = SensorSuite::reference(0.05, true);
        assert!(s.validate().is_ok());
        s.vectors[0].direction = Vec3::zeros();
        assert!(s.validate().is_err());
    }
}
