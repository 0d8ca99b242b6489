//! Per-tick records, summary metrics and their file formats.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::SimError;
use crate::liegroup::{UnitQuaternion, Vec3};
use crate::sensing::{LandmarkReference, MeasurementFrame};

pub const CSV_HEADER: &str = "t,qw,qx,qy,qz,Px,Py,Pz,Vx,Vy,Vz,qw_hat,qx_hat,qy_hat,qz_hat,Px_hat,Py_hat,Pz_hat,Vx_hat,Vy_hat,Vz_hat,Pd_x,Pd_y,Pd_z,eR_o,eOm_o,eP_o,eV_o,eR_c,eP_c,eV_c,Tx,Ty,Tz,thrust";
pub const LANDMARK_LOG_HEADER: &str = "t,j,px,py,pz,zx,zy,zz,s";
pub const TRUTH_HEADER: &str = "t,qw,qx,qy,qz,Px,Py,Pz,Vx,Vy,Vz,Wx,Wy,Wz";

const COLUMNS: usize = 35;
const ERROR_NAMES: [&str; 7] = ["eR_o", "eOm_o", "eP_o", "eV_o", "eR_c", "eP_c", "eV_c"];

/// One output row. Quaternions are `[w, x, y, z]`; unknown values are NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub t: f64,
    pub q: [f64; 4],
    pub position: Vec3,
    pub velocity: Vec3,
    pub q_hat: [f64; 4],
    pub position_hat: Vec3,
    pub velocity_hat: Vec3,
    pub position_d: Vec3,
    /// `‖R̃_o‖_I, ‖Ω̃_o‖, ‖P̃_o‖, ‖Ṽ_o‖, ‖R̃_c‖_I, ‖P̃_c‖, ‖Ṽ_c‖`
    pub errors: [f64; 7],
    pub torque: Vec3,
    pub thrust: f64,
}

pub(crate) fn quat_array(q: &UnitQuaternion) -> [f64; 4] {
    [q.w, q.v.x, q.v.y, q.v.z]
}

fn nan3() -> Vec3 {
    Vec3::repeat(f64::NAN)
}

impl Row {
    pub fn nan(t: f64) -> Self {
        Self {
            t,
            q: [f64::NAN; 4],
            position: nan3(),
            velocity: nan3(),
            q_hat: [f64::NAN; 4],
            position_hat: nan3(),
            velocity_hat: nan3(),
            position_d: nan3(),
            errors: [f64::NAN; 7],
            torque: nan3(),
            thrust: f64::NAN,
        }
    }

    pub fn observer_errors(&self) -> [f64; 4] {
        [self.errors[0], self.errors[1], self.errors[2], self.errors[3]]
    }

    pub fn control_errors(&self) -> [f64; 3] {
        [self.errors[4], self.errors[5], self.errors[6]]
    }

    /// Values in header order.
    pub fn values(&self) -> [f64; COLUMNS] {
        let mut out = [0.0; COLUMNS];
        let mut i = 0;
        let mut push = |xs: &[f64]| {
            out[i..i + xs.len()].copy_from_slice(xs);
            i += xs.len();
        };
        push(&[self.t]);
        push(&self.q);
        push(self.position.as_slice());
        push(self.velocity.as_slice());
        push(&self.q_hat);
        push(self.position_hat.as_slice());
        push(self.velocity_hat.as_slice());
        push(self.position_d.as_slice());
        push(&self.errors);
        push(self.torque.as_slice());
        push(&[self.thrust]);
        out
    }

    pub fn from_values(v: &[f64; COLUMNS]) -> Self {
        let v3 = |i: usize| Vec3::new(v[i], v[i + 1], v[i + 2]);
        let q = |i: usize| [v[i], v[i + 1], v[i + 2], v[i + 3]];
        let mut errors = [0.0; 7];
        errors.copy_from_slice(&v[24..31]);
        Self {
            t: v[0],
            q: q(1),
            position: v3(5),
            velocity: v3(8),
            q_hat: q(11),
            position_hat: v3(15),
            velocity_hat: v3(18),
            position_d: v3(21),
            errors,
            torque: v3(31),
            thrust: v[34],
        }
    }
}

/// Sensor log of a run, kept when requested so it can be replayed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub landmarks: Vec<LandmarkReference>,
    pub frames: Vec<MeasurementFrame>,
    /// True body angular velocity per row.
    pub omega: Vec<Vec3>,
}

/// Final metrics of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub final_errors: [f64; 7],
    /// Means over the last 20 % of the run.
    pub steady_state_mean: [f64; 7],
    pub observer_max_after_10s: [f64; 4],
    pub control_max_after_25s: [f64; 3],
    pub max_abs_error: [f64; 7],
    pub max_thrust: f64,
    pub min_thrust: f64,
    pub thrust_bound: f64,
    pub truth_repairs: usize,
    pub estimate_repairs: usize,
    pub xi_guard_events: usize,
    pub dropouts: usize,
    pub max_quat_drift: f64,
}

/// Max that propagates NaN; NaN for an empty input.
fn nan_max<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut it = xs.into_iter().peekable();
    if it.peek().is_none() {
        return f64::NAN;
    }
    it.fold(f64::NEG_INFINITY, |a, b| {
        if a.is_nan() || b.is_nan() {
            f64::NAN
        } else {
            a.max(b)
        }
    })
}

fn mean<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Counters {
    pub truth_repairs: usize,
    pub estimate_repairs: usize,
    pub xi_guard_events: usize,
    pub max_quat_drift: f64,
}

impl Summary {
    pub(crate) fn from_rows(rows: &[Row], dropouts: usize, thrust_bound: f64, c: Counters) -> Self {
        let t_start = rows.first().map_or(f64::NAN, |r| r.t);
        let t_end = rows.last().map_or(f64::NAN, |r| r.t);
        let slack = 1e-9;
        let steady_from = t_start + 0.8 * (t_end - t_start) - slack;
        let steady: Vec<&Row> = rows.iter().filter(|r| r.t >= steady_from).collect();
        let after = |t0: f64| rows.iter().filter(move |r| r.t >= t0 - slack);
        let final_errors = rows.last().map_or([f64::NAN; 7], |r| r.errors);
        Self {
            rows: rows.len(),
            t_start,
            t_end,
            final_errors,
            steady_state_mean: std::array::from_fn(|i| mean(steady.iter().map(|r| r.errors[i]))),
            observer_max_after_10s: std::array::from_fn(|i| nan_max(after(10.0).map(|r| r.errors[i]))),
            control_max_after_25s: std::array::from_fn(|i| {
                nan_max(after(25.0).map(|r| r.errors[4 + i]))
            }),
            max_abs_error: std::array::from_fn(|i| nan_max(rows.iter().map(|r| r.errors[i]))),
            max_thrust: nan_max(rows.iter().map(|r| r.thrust)),
            min_thrust: -nan_max(rows.iter().map(|r| -r.thrust)),
            thrust_bound,
            truth_repairs: c.truth_repairs,
            estimate_repairs: c.estimate_repairs,
            xi_guard_events: c.xi_guard_events,
            dropouts,
            max_quat_drift: c.max_quat_drift,
        }
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("rows", self.rows.to_string());
        kv("t_start", self.t_start.to_string());
        kv("t_end", self.t_end.to_string());
        for (i, name) in ERROR_NAMES.iter().enumerate() {
            kv(&format!("final.{name}"), format!("{:e}", self.final_errors[i]));
        }
        for (i, name) in ERROR_NAMES.iter().enumerate() {
            kv(&format!("steady_mean.{name}"), format!("{:e}", self.steady_state_mean[i]));
        }
        for (i, name) in ERROR_NAMES.iter().enumerate() {
            kv(&format!("max.{name}"), format!("{:e}", self.max_abs_error[i]));
        }
        for (i, name) in ERROR_NAMES[..4].iter().enumerate() {
            kv(&format!("max_after_10s.{name}"), format!("{:e}", self.observer_max_after_10s[i]));
        }
        for (i, name) in ERROR_NAMES[4..].iter().enumerate() {
            kv(&format!("max_after_25s.{name}"), format!("{:e}", self.control_max_after_25s[i]));
        }
        kv("thrust.max", self.max_thrust.to_string());
        kv("thrust.min", self.min_thrust.to_string());
        kv("thrust.bound", self.thrust_bound.to_string());
        kv("repairs.truth", self.truth_repairs.to_string());
        kv("repairs.estimate", self.estimate_repairs.to_string());
        kv("xi_guard_events", self.xi_guard_events.to_string());
        kv("dropouts", self.dropouts.to_string());
        kv("quat_drift.max", format!("{:e}", self.max_quat_drift));
        s
    }
}

/// Result of a closed-loop run or a replay.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<Row>,
    /// Row indices of ticks run without a correction.
    pub dropouts: Vec<usize>,
    pub summary: Summary,
    pub log: Option<RunLog>,
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> SimError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => SimError::Io {
            path: path.display().to_string(),
            source,
        },
        kind => SimError::Csv {
            path: path.display().to_string(),
            line,
            msg: format!("{kind:?}"),
        },
    }
}

fn write_csv<I>(path: &Path, header: &str, records: I) -> Result<(), SimError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header.split(',')).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `run.csv` and `summary.txt`, `dropouts.csv` when any tick ran
/// without a correction, and `landmarks.csv` plus `truth.csv` when the record
/// carries its sensor log. Returns the written paths.
pub fn write_run(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>, SimError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let run = dir.join("run.csv");
    write_csv(
        &run,
        CSV_HEADER,
        record.rows.iter().map(|r| r.values().iter().map(|x| fmt(*x)).collect()),
    )?;
    written.push(run);

    let summary = dir.join("summary.txt");
    fs::write(&summary, record.summary.to_text()).map_err(io_err(&summary))?;
    written.push(summary);

    if !record.dropouts.is_empty() {
        let path = dir.join("dropouts.csv");
        write_csv(
            &path,
            "tick,t",
            record
                .dropouts
                .iter()
                .map(|&k| vec![k.to_string(), fmt(record.rows[k].t)]),
        )?;
        written.push(path);
    }

    if let Some(log) = &record.log {
        let path = dir.join("landmarks.csv");
        let rows = log.frames.iter().flat_map(|f| {
            log.landmarks.iter().zip(f.landmarks.iter()).enumerate().map(move |(j, (l, z))| {
                vec![
                    fmt(f.timestamp),
                    j.to_string(),
                    fmt(l.position.x),
                    fmt(l.position.y),
                    fmt(l.position.z),
                    fmt(z.x),
                    fmt(z.y),
                    fmt(z.z),
                    fmt(l.weight),
                ]
            })
        });
        write_csv(&path, LANDMARK_LOG_HEADER, rows)?;
        written.push(path);

        let path = dir.join("truth.csv");
        let rows = record.rows.iter().zip(log.omega.iter()).map(|(r, w)| {
            let v = r.values();
            v[..11]
                .iter()
                .chain(w.iter())
                .map(|x| fmt(*x))
                .collect()
        });
        write_csv(&path, TRUTH_HEADER, rows)?;
        written.push(path);
    }
    Ok(written)
}

/// Reads a `run.csv` back into rows.
pub fn read_run_csv(path: &Path) -> Result<Vec<Row>, SimError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got.join(",") != CSV_HEADER {
        return Err(SimError::Csv {
            path: path.display().to_string(),
            line: 1,
            msg: "header does not match the run format".into(),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != COLUMNS {
            return Err(SimError::Csv {
                path: path.display().to_string(),
                line,
                msg: format!("expected {COLUMNS} fields, got {}", rec.len()),
            });
        }
        let mut v = [0.0; COLUMNS];
        for (i, field) in rec.iter().enumerate() {
            v[i] = field.trim().parse().map_err(|_| SimError::Csv {
                path: path.display().to_string(),
                line,
                msg: format!("field {i} `{field}` is not a number"),
            })?;
        }
        rows.push(Row::from_values(&v));
    }
    if rows.is_empty() {
        return Err(SimError::EmptyLog(path.display().to_string()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_columns() {
        assert_eq!(CSV_HEADER.split(',').count(), COLUMNS);
        assert_eq!(&CSV_HEADER.split(',').collect::<Vec<_>>()[24..31], &ERROR_NAMES);
    }

    #[test]
    fn values_roundtrip() {
        let mut v = [0.0; COLUMNS];
        for (i, x) in v.iter_mut().enumerate() {
            *x = i as f64 * 0.37 - 3.0;
        }
        assert_eq!(Row::from_values(&v).values(), v);
    }

    #[test]
    fn nan_max_propagates() {
        assert_eq!(nan_max([1.0, 3.0, 2.0]), 3.0);
        assert!(nan_max([1.0, f64::NAN]).is_nan());
        assert!(nan_max(std::iter::empty()).is_nan());
    }

    #[test]
    fn printed_digits_roundtrip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt(x).parse::<f64>().unwrap(), x);
        }
    }
}
