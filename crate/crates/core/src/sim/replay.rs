//! Observer-only replay of recorded landmark logs.
//!
//! The replayed observer runs on a uniform grid of step `cfg.dt` starting at
//! the first logged timestamp. Grid points without a frame, and frames whose
//! landmarks do not determine the pose, run as prediction-only ticks and are
//! listed in [`RunRecord::dropouts`].
//!
//! Torque and thrust come from an optional inputs file (any CSV with columns
//! `t, Tx, Ty, Tz, thrust`, so a `run.csv` works). Ticks without a matching
//! input use zero torque and zero thrust; the Ω̂ update then reduces to its
//! correction-driven part.

use std::collections::HashMap;
use std::path::Path;

use super::closed_loop::Estimator;
use super::config::SimConfig;
use super::record::{quat_array, Counters, Row, RunRecord, Summary};
use super::SimError;
use crate::dynamics::TrueState;
use crate::liegroup::{attitude_distance, UnitQuaternion, Vec3};
use crate::observer::{angular_velocity_step, observer_errors, CorrectionTerms};
use crate::sensing::{
    observability_check, LandmarkReference, MeasurementFrame, ReconstructedPose, SensorSuite,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoggedLandmark {
    pub j: usize,
    pub position: Vec3,
    pub measurement: Vec3,
    pub weight: f64,
}

/// All landmark rows sharing one timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedFrame {
    pub t: f64,
    pub landmarks: Vec<LoggedLandmark>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    pub q: UnitQuaternion,
    pub state: TrueState,
    /// Whether the file carried `Wx, Wy, Wz`; otherwise `state.omega` is NaN.
    pub has_omega: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputSample {
    pub t: f64,
    pub torque: Vec3,
    pub thrust: f64,
}

/// Rows of a headed CSV, selected columns by name, with their line numbers.
/// Optional columns read as NaN when absent.
fn read_columns(
    path: &Path,
    required: &[&str],
    optional: &[&str],
) -> Result<(Vec<(u64, Vec<f64>)>, Vec<bool>), SimError> {
    let name = path.display().to_string();
    let csv_error = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line());
        match e.into_kind() {
            csv::ErrorKind::Io(source) => SimError::Io {
                path: name.clone(),
                source,
            },
            kind => SimError::Csv {
                path: name.clone(),
                line,
                msg: format!("{kind:?}"),
            },
        }
    };
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_error)?;
    let header: HashMap<String, usize> = r
        .headers()
        .map_err(csv_error)?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let mut index = Vec::new();
    for c in required {
        let i = header.get(*c).ok_or_else(|| SimError::Csv {
            path: name.clone(),
            line: 1,
            msg: format!("missing column `{c}`"),
        })?;
        index.push(Some(*i));
    }
    let present: Vec<bool> = optional.iter().map(|c| header.contains_key(*c)).collect();
    index.extend(optional.iter().map(|c| header.get(*c).copied()));

    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut values = Vec::with_capacity(index.len());
        for (c, i) in required.iter().chain(optional.iter()).zip(index.iter()) {
            let v = match i {
                None => f64::NAN,
                Some(i) => {
                    let field = rec.get(*i).ok_or_else(|| SimError::Csv {
                        path: name.clone(),
                        line,
                        msg: format!("missing field `{c}`"),
                    })?;
                    field.parse().map_err(|_| SimError::Csv {
                        path: name.clone(),
                        line,
                        msg: format!("`{c}` = `{field}` is not a number"),
                    })?
                }
            };
            values.push(v);
        }
        rows.push((line, values));
    }
    if rows.is_empty() {
        return Err(SimError::EmptyLog(name));
    }
    Ok((rows, present))
}

fn not_increasing(path: &Path, line: u64) -> SimError {
    SimError::Csv {
        path: path.display().to_string(),
        line,
        msg: "timestamps must be non-decreasing".into(),
    }
}

/// Reads a `t, j, px, py, pz, zx, zy, zz, s` landmark log, grouping rows by timestamp.
pub fn read_landmark_log(path: &Path) -> Result<Vec<LoggedFrame>, SimError> {
    let (rows, _) = read_columns(path, &["t", "j", "px", "py", "pz", "zx", "zy", "zz", "s"], &[])?;
    let mut frames: Vec<LoggedFrame> = Vec::new();
    for (line, v) in rows {
        if !(v[1] >= 0.0 && v[1].fract() == 0.0) {
            return Err(SimError::Csv {
                path: path.display().to_string(),
                line,
                msg: format!("landmark index `{}` is not a non-negative integer", v[1]),
            });
        }
        let mark = LoggedLandmark {
            j: v[1] as usize,
            position: Vec3::new(v[2], v[3], v[4]),
            measurement: Vec3::new(v[5], v[6], v[7]),
            weight: v[8],
        };
        match frames.last_mut() {
            Some(f) if f.t == v[0] => f.landmarks.push(mark),
            Some(f) if f.t > v[0] || v[0].is_nan() => return Err(not_increasing(path, line)),
            _ => frames.push(LoggedFrame {
                t: v[0],
                landmarks: vec![mark],
            }),
        }
    }
    for f in &mut frames {
        f.landmarks.sort_by_key(|l| l.j);
    }
    Ok(frames)
}

/// Reads ground truth by column name: `t, qw, qx, qy, qz, Px, Py, Pz, Vx, Vy, Vz`
/// and optionally `Wx, Wy, Wz`.
pub fn read_truth(path: &Path) -> Result<Vec<TruthSample>, SimError> {
    let (rows, present) = read_columns(
        path,
        &["t", "qw", "qx", "qy", "qz", "Px", "Py", "Pz", "Vx", "Vy", "Vz"],
        &["Wx", "Wy", "Wz"],
    )?;
    let has_omega = present.iter().all(|p| *p);
    let mut out: Vec<TruthSample> = Vec::with_capacity(rows.len());
    for (line, v) in rows {
        if out.last().is_some_and(|s| s.t > v[0]) || v[0].is_nan() {
            return Err(not_increasing(path, line));
        }
        let q = UnitQuaternion::new(v[1], Vec3::new(v[2], v[3], v[4])).map_err(|e| SimError::Csv {
            path: path.display().to_string(),
            line,
            msg: e.to_string(),
        })?;
        out.push(TruthSample {
            t: v[0],
            q,
            state: TrueState {
                attitude: q.to_rotation(),
                omega: Vec3::new(v[11], v[12], v[13]),
                position: Vec3::new(v[5], v[6], v[7]),
                velocity: Vec3::new(v[8], v[9], v[10]),
            },
            has_omega,
        });
    }
    Ok(out)
}

/// Reads commanded inputs from any CSV with columns `t, Tx, Ty, Tz, thrust`.
pub fn read_inputs(path: &Path) -> Result<Vec<InputSample>, SimError> {
    let (rows, _) = read_columns(path, &["t", "Tx", "Ty", "Tz", "thrust"], &[])?;
    let mut out: Vec<InputSample> = Vec::with_capacity(rows.len());
    for (line, v) in rows {
        if out.last().is_some_and(|s| s.t > v[0]) || v[0].is_nan() {
            return Err(not_increasing(path, line));
        }
        out.push(InputSample {
            t: v[0],
            torque: Vec3::new(v[1], v[2], v[3]),
            thrust: v[4],
        });
    }
    Ok(out)
}

/// Index of the sample nearest to `t` within `tol`, in a list sorted by time.
fn nearest<T>(samples: &[T], time: impl Fn(&T) -> f64, t: f64, tol: f64) -> Option<usize> {
    let i = samples.partition_point(|s| time(s) < t);
    [i.checked_sub(1), Some(i)]
        .into_iter()
        .flatten()
        .filter(|&j| j < samples.len())
        .map(|j| (j, (time(&samples[j]) - t).abs()))
        .filter(|&(_, d)| d <= tol)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(j, _)| j)
}

fn frame_pose(frame: &LoggedFrame) -> Option<ReconstructedPose> {
    let positions: Vec<Vec3> = frame.landmarks.iter().map(|l| l.position).collect();
    if !observability_check(&positions, &[]).is_observable() {
        return None;
    }
    let suite = SensorSuite {
        vectors: Vec::new(),
        landmarks: frame
            .landmarks
            .iter()
            .map(|l| LandmarkReference {
                position: l.position,
                bias: Vec3::zeros(),
                noise_std: 0.0,
                weight: l.weight,
            })
            .collect(),
    };
    let measured = MeasurementFrame {
        timestamp: frame.t,
        vectors: Vec::new(),
        landmarks: frame.landmarks.iter().map(|l| l.measurement).collect(),
    };
    match suite.reconstruct(&measured) {
        Ok(pose) => Some(pose),
        Err(e) => {
            log::warn!("t = {}: reconstruction failed ({e}), prediction only", frame.t);
            None
        }
    }
}

/// Runs the observer alone over logged frames. Uses the observer gains,
/// vehicle parameters, initial estimate, `dt` and observer variant of `cfg`.
pub fn run_replay(
    frames: &[LoggedFrame],
    truth: &[TruthSample],
    inputs: Option<&[InputSample]>,
    cfg: &SimConfig,
) -> Result<RunRecord, SimError> {
    let first = frames
        .first()
        .ok_or_else(|| SimError::EmptyLog("landmark log".into()))?;
    let dt = cfg.dt;
    let tol = 0.5 * dt;
    let t0 = first.t;
    let span = frames.last().map_or(0.0, |f| f.t) - t0;
    let n = (span / dt).round() as usize + 1;

    let mut slots: Vec<Option<&LoggedFrame>> = vec![None; n];
    for f in frames {
        let k = ((f.t - t0) / dt).round() as usize;
        if slots[k].is_some() {
            return Err(SimError::Csv {
                path: "landmark log".into(),
                line: 0,
                msg: format!("frames at t = {} and an earlier one fall on the same tick", f.t),
            });
        }
        slots[k] = Some(f);
    }

    let (vp, og) = (&cfg.vehicle, &cfg.observer_gains);
    let mut est = Estimator::new(cfg.estimate, cfg.variant, cfg.quat_integration);
    let mut counters = Counters::default();
    let mut rows = Vec::with_capacity(n);
    let mut dropouts = Vec::new();
    let mut missing_inputs = 0usize;

    for (k, slot) in slots.iter().enumerate() {
        let t = slot.map_or(t0 + k as f64 * dt, |f| f.t);
        let (torque, thrust) = match inputs.and_then(|s| nearest(s, |x| x.t, t, tol)) {
            Some(i) => {
                let s = inputs.expect("index came from inputs")[i];
                (s.torque, s.thrust)
            }
            None => {
                missing_inputs += 1;
                (Vec3::zeros(), 0.0)
            }
        };

        let pre = est.state();
        let mut row = Row::nan(t);
        row.q_hat = quat_array(&est.quaternion());
        row.position_hat = pre.position;
        row.velocity_hat = pre.velocity;
        row.torque = torque;
        row.thrust = thrust;
        if let Some(i) = nearest(truth, |x| x.t, t, tol) {
            let s = &truth[i];
            let e = observer_errors(&s.state, &pre);
            row.q = quat_array(&s.q);
            row.position = s.state.position;
            row.velocity = s.state.velocity;
            row.errors[0] = attitude_distance(&e.r_tilde);
            row.errors[1] = if s.has_omega {
                e.omega_tilde.norm()
            } else {
                f64::NAN
            };
            row.errors[2] = e.p_tilde.norm();
            row.errors[3] = e.v_tilde.norm();
        }

        let w = match slot.and_then(frame_pose) {
            Some(pose) => est.corrections(&pose, thrust, vp, og),
            None => {
                dropouts.push(k);
                CorrectionTerms::zero_innovation(vp)
            }
        };
        let (repaired, drift) = est.predict_correct(&w, thrust, vp, dt);
        counters.estimate_repairs += repaired as usize;
        counters.max_quat_drift = counters.max_quat_drift.max(drift);
        let omega = angular_velocity_step(&est.state(), &w, &torque, vp, dt);
        est.set_omega(omega);
        rows.push(row);
    }
    if missing_inputs > 0 {
        log::info!("{missing_inputs} of {n} replay ticks had no input sample; used zero torque and thrust");
    }
    let summary = Summary::from_rows(&rows, dropouts.len(), f64::NAN, counters);
    Ok(RunRecord {
        rows,
        dropouts,
        summary,
        log: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_within_tolerance() {
        let ts = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(nearest(&ts, |x| *x, 1.2, 0.5), Some(1));
        assert_eq!(nearest(&ts, |x| *x, 1.7, 0.5), Some(2));
        assert_eq!(nearest(&ts, |x| *x, 3.6, 0.5), None);
        assert_eq!(nearest(&ts, |x| *x, -0.4, 0.5), Some(0));
        assert_eq!(nearest::<f64>(&[], |x| *x, 0.0, 0.5), None);
    }
}
