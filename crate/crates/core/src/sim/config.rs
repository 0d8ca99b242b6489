//! Scenario configuration and its text format.
//!
//! A configuration file is TOML restricted to dotted `key = value` pairs such
//! as `observer.k_o1 = 10`. Every key is optional; missing keys take the
//! value of [`SimConfig::reference`]. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;
use toml::Value;

use crate::controller::{validate_trajectory, ControllerGains, Trajectory};
use crate::dynamics::{ParamsError, TrueState, VehicleParams};
use crate::liegroup::{Mat3, Rotation, Vec3};
use crate::observer::{ObserverGains, ObserverState};
use crate::quat_variant::Integration;
use crate::sensing::{InertialReference, LandmarkReference, SensingError, SensorSuite};
use crate::GainError;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config is not valid TOML: {0}")]
    Syntax(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: expected {expected}")]
    Type { key: String, expected: &'static str },
    #[error("config key `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error(transparent)]
    Gain(#[from] GainError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Sensors(#[from] SensingError),
}

/// Which attitude the torque law compares against the desired attitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RTildeSource {
    /// `R̃_c = R̂ R_dᵀ` with the corrected estimate.
    #[default]
    Estimate,
    /// `R̃_c = R_y R_dᵀ` with the reconstructed attitude.
    Reconstruction,
}

/// Attitude parameterization of the observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObserverVariant {
    #[default]
    Matrix,
    Quaternion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub vehicle: VehicleParams,
    pub observer_gains: ObserverGains,
    pub controller_gains: ControllerGains,
    pub truth: TrueState,
    pub estimate: ObserverState,
    pub theta: Vec3,
    pub theta_dot: Vec3,
    pub sensors: SensorSuite,
    pub trajectory: Trajectory,
    pub rtilde_source: RTildeSource,
    pub variant: ObserverVariant,
    pub quat_integration: Integration,
}

/// Initial attitude of the reference scenario as printed to four decimals.
pub const REFERENCE_R0: [[f64; 3]; 3] = [
    [-0.2712, -0.7130, 0.6466],
    [0.8655, -0.4746, -0.1603],
    [0.4212, 0.5162, 0.7458],
];

fn mat3(rows: &[[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| rows[i][j])
}

impl SimConfig {
    /// The reference scenario: 50 s at 1 kHz along the climbing figure eight,
    /// large initial attitude and position error, biased noisy sensors.
    pub fn reference() -> Self {
        Self {
            dt: 1e-3,
            t_end: 50.0,
            seed: 1,
            vehicle: VehicleParams::default(),
            observer_gains: ObserverGains::default(),
            controller_gains: ControllerGains::default(),
            truth: TrueState {
                attitude: Rotation::project(&mat3(&REFERENCE_R0)),
                omega: Vec3::zeros(),
                position: Vec3::new(-2.0, -1.0, 0.0),
                velocity: Vec3::zeros(),
            },
            estimate: ObserverState::default(),
            theta: Vec3::zeros(),
            theta_dot: Vec3::zeros(),
            sensors: SensorSuite::reference(0.05, true),
            trajectory: Trajectory::figure_eight(),
            rtilde_source: RTildeSource::Estimate,
            variant: ObserverVariant::Matrix,
            quat_integration: Integration::Euler,
        }
    }

    /// [`reference`](Self::reference) with noise-free, bias-free sensors.
    pub fn reference_clean() -> Self {
        Self {
            sensors: SensorSuite::reference(0.0, false),
            ..Self::reference()
        }
    }

    /// Number of recorded rows, `floor(t_end / dt) + 1`.
    pub fn rows(&self) -> usize {
        // the small slack keeps e.g. 50 / 0.001 from flooring to 49999
        (self.t_end / self.dt * (1.0 + 1e-12)).floor() as usize + 1
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("sim.dt", "must be positive"));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(invalid("sim.t_end", "must be at least one time step"));
        }
        self.sensors.validate()?;
        validate_trajectory(&self.trajectory, self.t_end)
            .map_err(|e| invalid("trajectory", &e.to_string()))?;
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);
        let mut keys = Keys(flat);
        let cfg = Self::from_keys(&mut keys)?;
        if let Some(k) = keys.0.keys().next() {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_keys(k: &mut Keys) -> Result<Self, ConfigError> {
        let d = Self::reference();

        let dt = k.f64("sim.dt")?.unwrap_or(d.dt);
        let t_end = k.f64("sim.t_end")?.unwrap_or(d.t_end);
        let seed = k.u64("sim.seed")?.unwrap_or(d.seed);

        let vehicle = VehicleParams::new(
            k.f64("vehicle.mass")?.unwrap_or(d.vehicle.mass()),
            k.inertia("vehicle.inertia")?.unwrap_or(*d.vehicle.inertia()),
            k.f64("vehicle.gravity")?.unwrap_or(d.vehicle.gravity()),
        )?;

        let og = d.observer_gains;
        let observer_gains = ObserverGains::new(
            k.f64("observer.gamma_o")?.unwrap_or(og.gamma_o()),
            k.f64("observer.k_o1")?.unwrap_or(og.k_o1()),
            k.f64("observer.k_o2")?.unwrap_or(og.k_o2()),
            k.f64("observer.k_o3")?.unwrap_or(og.k_o3()),
        )?;
        let variant = match k.str("observer.variant")?.as_deref() {
            None | Some("matrix") => ObserverVariant::Matrix,
            Some("quaternion") => ObserverVariant::Quaternion,
            Some(other) => return Err(invalid("observer.variant", &format!("`{other}` is not matrix|quaternion"))),
        };
        let quat_integration = match k.str("observer.quat_integration")?.as_deref() {
            None | Some("euler") => Integration::Euler,
            Some("matched") => Integration::Matched,
            Some(other) => {
                return Err(invalid(
                    "observer.quat_integration",
                    &format!("`{other}` is not euler|matched"),
                ))
            }
        };

        let cg = d.controller_gains;
        let controller_gains = ControllerGains::new(
            k.f64("controller.k_c1")?.unwrap_or(cg.k_c1()),
            k.f64("controller.k_c2")?.unwrap_or(cg.k_c2()),
            k.f64("controller.k_c3")?.unwrap_or(cg.k_c3()),
            k.f64("controller.k_c4")?.unwrap_or(cg.k_c4()),
            k.f64("controller.k_theta1")?.unwrap_or(cg.k_theta1()),
            k.f64("controller.k_theta2")?.unwrap_or(cg.k_theta2()),
        )?;
        let rtilde_source = match k.str("controller.rtilde_source")?.as_deref() {
            None | Some("estimate") => RTildeSource::Estimate,
            Some("reconstruction") => RTildeSource::Reconstruction,
            Some(other) => {
                return Err(invalid(
                    "controller.rtilde_source",
                    &format!("`{other}` is not estimate|reconstruction"),
                ))
            }
        };

        let truth = TrueState {
            attitude: k.rotation("truth.attitude")?.unwrap_or(d.truth.attitude),
            omega: k.vec3("truth.omega")?.unwrap_or(d.truth.omega),
            position: k.vec3("truth.position")?.unwrap_or(d.truth.position),
            velocity: k.vec3("truth.velocity")?.unwrap_or(d.truth.velocity),
        };
        let estimate = ObserverState {
            attitude: k.rotation("estimate.attitude")?.unwrap_or(d.estimate.attitude),
            omega: k.vec3("estimate.omega")?.unwrap_or(d.estimate.omega),
            position: k.vec3("estimate.position")?.unwrap_or(d.estimate.position),
            velocity: k.vec3("estimate.velocity")?.unwrap_or(d.estimate.velocity),
        };
        let theta = k.vec3("aux.theta")?.unwrap_or(d.theta);
        let theta_dot = k.vec3("aux.theta_dot")?.unwrap_or(d.theta_dot);

        let trajectory = match k.str("trajectory.kind")?.as_deref() {
            None | Some("figure_eight") => {
                let Trajectory::FigureEight {
                    amplitude,
                    rate,
                    z0,
                    climb,
                } = Trajectory::figure_eight()
                else {
                    unreachable!()
                };
                Trajectory::FigureEight {
                    amplitude: k.f64("trajectory.amplitude")?.unwrap_or(amplitude),
                    rate: k.f64("trajectory.rate")?.unwrap_or(rate),
                    z0: k.f64("trajectory.z0")?.unwrap_or(z0),
                    climb: k.f64("trajectory.climb")?.unwrap_or(climb),
                }
            }
            Some("hover") => Trajectory::Hover {
                position: k.vec3("trajectory.position")?.unwrap_or_else(Vec3::zeros),
            },
            Some(other) => {
                return Err(invalid(
                    "trajectory.kind",
                    &format!("`{other}` is not figure_eight|hover"),
                ))
            }
        };

        let sensors = sensors_from_keys(k, &d.sensors)?;

        Ok(Self {
            dt,
            t_end,
            seed,
            vehicle,
            observer_gains,
            controller_gains,
            truth,
            estimate,
            theta,
            theta_dot,
            sensors,
            trajectory,
            rtilde_source,
            variant,
            quat_integration,
        })
    }
}

fn sensors_from_keys(k: &mut Keys, d: &SensorSuite) -> Result<SensorSuite, ConfigError> {
    let vectors = k.vec3_list("sensors.vectors")?;
    let custom_vectors = vectors.is_some();
    let directions = vectors.unwrap_or_else(|| d.vectors.iter().map(|r| r.direction).collect());
    let n = directions.len();
    let biases = k
        .vec3_list("sensors.vector_biases")?
        .unwrap_or_else(|| {
            if custom_vectors {
                vec![Vec3::zeros(); n]
            } else {
                d.vectors.iter().map(|r| r.bias).collect()
            }
        });
    let weights = k
        .f64_list("sensors.vector_weights")?
        .unwrap_or_else(|| vec![1.0; n]);
    let v_std = k
        .f64("sensors.vector_noise_std")?
        .unwrap_or_else(|| d.vectors.first().map_or(0.0, |r| r.noise_std));
    check_len("sensors.vector_biases", biases.len(), n)?;
    check_len("sensors.vector_weights", weights.len(), n)?;

    let marks = k.vec3_list("sensors.landmarks")?;
    let custom_marks = marks.is_some();
    let positions = marks.unwrap_or_else(|| d.landmarks.iter().map(|r| r.position).collect());
    let m = positions.len();
    let l_biases = k
        .vec3_list("sensors.landmark_biases")?
        .unwrap_or_else(|| {
            if custom_marks {
                vec![Vec3::zeros(); m]
            } else {
                d.landmarks.iter().map(|r| r.bias).collect()
            }
        });
    let l_weights = k
        .f64_list("sensors.landmark_weights")?
        .unwrap_or_else(|| vec![1.0; m]);
    let l_std = k
        .f64("sensors.landmark_noise_std")?
        .unwrap_or_else(|| d.landmarks.first().map_or(0.0, |r| r.noise_std));
    check_len("sensors.landmark_biases", l_biases.len(), m)?;
    check_len("sensors.landmark_weights", l_weights.len(), m)?;

    Ok(SensorSuite {
        vectors: (0..n)
            .map(|i| InertialReference {
                direction: directions[i],
                bias: biases[i],
                noise_std: v_std,
                weight: weights[i],
            })
            .collect(),
        landmarks: (0..m)
            .map(|j| LandmarkReference {
                position: positions[j],
                bias: l_biases[j],
                noise_std: l_std,
                weight: l_weights[j],
            })
            .collect(),
    })
}

fn check_len(key: &str, got: usize, expected: usize) -> Result<(), ConfigError> {
    if got != expected {
        return Err(invalid(key, &format!("has {got} entries, expected {expected}")));
    }
    Ok(())
}

fn invalid(key: &str, message: &str) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.to_string(),
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

/// Flattened keys, consumed as they are read.
struct Keys(BTreeMap<String, Value>);

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_f64_array(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(as_f64).collect()
}

fn as_vec3(v: &Value) -> Option<Vec3> {
    let a = as_f64_array(v)?;
    (a.len() == 3).then(|| Vec3::new(a[0], a[1], a[2]))
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.0.remove(key)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.take(key)
            .map(|v| as_f64(&v).ok_or_else(|| type_err(key, "a number")))
            .transpose()
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.take(key)
            .map(|v| match v {
                Value::Integer(i) if i >= 0 => Ok(i as u64),
                _ => Err(type_err(key, "a non-negative integer")),
            })
            .transpose()
    }

    fn str(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        self.take(key)
            .map(|v| match v {
                Value::String(s) => Ok(s),
                _ => Err(type_err(key, "a string")),
            })
            .transpose()
    }

    fn vec3(&mut self, key: &str) -> Result<Option<Vec3>, ConfigError> {
        self.take(key)
            .map(|v| as_vec3(&v).ok_or_else(|| type_err(key, "an array of 3 numbers")))
            .transpose()
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.take(key)
            .map(|v| as_f64_array(&v).ok_or_else(|| type_err(key, "an array of numbers")))
            .transpose()
    }

    fn vec3_list(&mut self, key: &str) -> Result<Option<Vec<Vec3>>, ConfigError> {
        self.take(key)
            .map(|v| {
                v.as_array()
                    .and_then(|a| a.iter().map(as_vec3).collect::<Option<Vec<_>>>())
                    .ok_or_else(|| type_err(key, "an array of 3-number arrays"))
            })
            .transpose()
    }

    fn mat3(&mut self, key: &str) -> Result<Option<Mat3>, ConfigError> {
        match self.vec3_list(key) {
            Ok(Some(rows)) if rows.len() == 3 => Ok(Some(Mat3::from_rows(&[
                rows[0].transpose(),
                rows[1].transpose(),
                rows[2].transpose(),
            ]))),
            Ok(None) => Ok(None),
            _ => Err(type_err(key, "a 3x3 array of numbers")),
        }
    }

    /// Inertia as a full 3×3 matrix or a 3-element diagonal.
    fn inertia(&mut self, key: &str) -> Result<Option<Mat3>, ConfigError> {
        let Some(v) = self.0.get(key) else {
            return Ok(None);
        };
        if let Some(diag) = as_vec3(v) {
            self.take(key);
            return Ok(Some(Mat3::from_diagonal(&diag)));
        }
        self.mat3(key)
    }

    /// A 3×3 matrix projected onto SO(3); values printed to a few decimals are
    /// accepted and moved to the nearest rotation.
    fn rotation(&mut self, key: &str) -> Result<Option<Rotation>, ConfigError> {
        let Some(m) = self.mat3(key)? else {
            return Ok(None);
        };
        if !(m.determinant() > 0.0) {
            return Err(invalid(key, "determinant must be positive"));
        }
        let r = Rotation::project(&m);
        let moved = (r.matrix() - m).norm();
        if moved > 1e-2 {
            return Err(invalid(key, &format!("is {moved:.3e} away from a rotation")));
        }
        if moved > 1e-9 {
            log::info!("{key} projected onto SO(3) (moved by {moved:.3e})");
        }
        Ok(Some(r))
    }
}

fn type_err(key: &str, expected: &'static str) -> ConfigError {
    ConfigError::Type {
        key: key.to_string(),
        expected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference() {
        assert_eq!(SimConfig::parse("").unwrap(), SimConfig::reference());
    }

    #[test]
    fn reference_row_count() {
        assert_eq!(SimConfig::reference().rows(), 50_001);
    }

    #[test]
    fn reference_r0_is_close_to_printed() {
        let r = SimConfig::reference().truth.attitude;
        assert!(r.orthonormality_error() < 1e-14);
        assert!((r.matrix() - mat3(&REFERENCE_R0)).norm() < 1e-3);
    }

    #[test]
    fn dotted_and_table_keys() {
        let a = SimConfig::parse("observer.k_o1 = 3\nsim.t_end = 1.0").unwrap();
        let b = SimConfig::parse("[observer]\nk_o1 = 3.0\n[sim]\nt_end = 1").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.observer_gains.k_o1(), 3.0);
        assert_eq!(a.rows(), 1001);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(
            SimConfig::parse("observer.k_o9 = 1"),
            Err(ConfigError::UnknownKey(k)) if k == "observer.k_o9"
        ));
    }

    #[test]
    fn zero_tick_rejected() {
        assert!(matches!(
            SimConfig::parse("sim.t_end = 0"),
            Err(ConfigError::Invalid { .. })
        ));
        assert!(SimConfig::parse("sim.dt = -1").is_err());
    }

    #[test]
    fn bad_values_rejected() {
        assert!(matches!(SimConfig::parse("observer.k_o2 = 0"), Err(ConfigError::Gain(_))));
        assert!(matches!(
            SimConfig::parse("vehicle.mass = \"heavy\""),
            Err(ConfigError::Type { .. })
        ));
        assert!(SimConfig::parse("controller.rtilde_source = \"truth\"").is_err());
        assert!(SimConfig::parse("sensors.vector_biases = [[0,0,0]]").is_err());
    }

    #[test]
    fn enums_and_lists() {
        let c = SimConfig::parse(
            r#"
controller.rtilde_source = "reconstruction"
observer.variant = "quaternion"
observer.quat_integration = "matched"
trajectory.kind = "hover"
trajectory.position = [1, 2, 3]
sensors.vectors = []
sensors.landmarks = [[1,0,0],[0,1,0],[0,0,1]]
sensors.landmark_noise_std = 0.0
vehicle.inertia = [0.1, 0.2, 0.3]
"#,
        )
        .unwrap();
        assert_eq!(c.rtilde_source, RTildeSource::Reconstruction);
        assert_eq!(c.variant, ObserverVariant::Quaternion);
        assert_eq!(c.quat_integration, Integration::Matched);
        assert_eq!(
            c.trajectory,
            Trajectory::Hover {
                position: Vec3::new(1.0, 2.0, 3.0)
            }
        );
        assert!(c.sensors.vectors.is_empty());
        assert_eq!(c.sensors.landmarks.len(), 3);
        assert_eq!(c.sensors.landmarks[0].bias, Vec3::zeros());
        assert_eq!(c.vehicle.inertia()[(2, 2)], 0.3);
    }
}
