//! One function per acceptance criterion. Every threshold is a constant here.

use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vtol_nav::controller::{
    desired_angular_velocity, desired_quaternion, intermediary_f, psi_rate, psi_second_rate,
    xi_matrix, AuxiliaryState, ControllerGains, DesiredTrajectory, IntermediaryControl,
    Trajectory,
};
use vtol_nav::dynamics::{integrate_step, ControlCommand, TrueState, VehicleParams};
use vtol_nav::liegroup::{
    attitude_distance, pa_vex, se23_exp, skew, so3_exp, vex, Rotation, TangentElement, Vec3,
};
use vtol_nav::quat_variant::Integration;
use vtol_nav::sensing::{MeasurementFrame, SensorSuite};
use vtol_nav::sim::{
    read_inputs, read_landmark_log, read_truth, run_batch, run_closed_loop,
    run_closed_loop_logged, run_replay, write_run, ClosedLoop, ObserverVariant, RunRecord,
    SimConfig,
};

use crate::fit::{convergence_order, linear_fit};
use crate::oracle::{self, max_abs, M3, V3};
use crate::CriterionResult;

const ALGEBRA_SAMPLES: usize = 10_000;
const ALGEBRA_TOL: f64 = 1e-12;
const ALGEBRA_RUNTIME: Duration = Duration::from_secs(5);

const EXP_SAMPLES: usize = 1_000;
const EXP_TOL: f64 = 1e-12;
const EXP_STEPS: [f64; 2] = [1e-3, 1e-2];
const SERIES_TERMS: usize = 30;

const POSE_SAMPLES: usize = 1_000;
const POSE_TOL: f64 = 1e-10;
const NOISY_TRIALS: usize = 10_000;
const NOISE_STD: f64 = 0.05;
const DET_TOL: f64 = 1e-10;

const OBSERVER_SETTLE: f64 = 10.0;
const OBS_ATTITUDE_TOL: f64 = 1e-3;
const OBS_POSITION_TOL: f64 = 1e-2;
const OBS_VELOCITY_TOL: f64 = 1e-2;
const SLOPE_WINDOW: (f64, f64) = (0.5, 5.0);
const SLOPE_MIN_R2: f64 = 0.9;
const CLEAN_RUNTIME: Duration = Duration::from_secs(30);

const TRACKING_SETTLE: f64 = 25.0;
const TRACK_POSITION_TOL: f64 = 0.05;
const TRACK_ATTITUDE_TOL: f64 = 1e-3;

const ROBUST_SEEDS: u64 = 20;
const ROBUST_MEAN_TOL: f64 = 0.5;
/// Largest error norm (m, m/s, rad/s) still counted as bounded.
const ROBUST_BOUND: f64 = 100.0;

const ORDER_TOL: f64 = 0.3;

const EQUIVALENCE_T_END: f64 = 5.0;
const EQUIVALENCE_TOL: f64 = 1e-6;

const SPIN_STEPS: usize = 10_000;
const SPIN_DT: f64 = 1e-3;
const SPIN_DRIFT_TOL: f64 = 1e-8;
const SPIN_ORTHO_TOL: f64 = 1e-10;

const REPLAY_T_END: f64 = 10.0;
const REPLAY_TOL: f64 = 1e-9;

fn result(id: u32, name: &'static str, passed: bool, detail: String) -> CriterionResult {
    CriterionResult {
        id,
        name,
        passed,
        detail,
    }
}

fn rotation(m: M3) -> Rotation {
    Rotation::new(m).expect("oracle rotation is orthonormal")
}

pub fn algebra() -> CriterionResult {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut lemma, mut id1, mut id2, mut roundtrip, mut range) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut out_of_range = 0usize;
    for _ in 0..ALGEBRA_SAMPLES {
        let rm = oracle::random_rotation(&mut rng);
        let r = rotation(rm);
        let y = oracle::random_vec(&mut rng, 5.0);
        let a = oracle::random_matrix(&mut rng, 5.0);

        let d = attitude_distance(&r);
        lemma = lemma.max((pa_vex(r.matrix()).norm_squared() - 4.0 * (1.0 - d) * d).abs());

        id1 = id1.max(max_abs(&(skew(&(rm * y)) - rm * oracle::skew(&y) * rm.transpose())));
        id2 = id2.max(((a * skew(&y)).trace() + 2.0 * pa_vex(&a).dot(&y)).abs());
        id2 = id2.max((pa_vex(&a) - oracle::pa_vex(&a)).norm());

        let back = vex(&skew(&y)).expect("skew output is antisymmetric");
        roundtrip = roundtrip.max((back - y).norm());
        roundtrip = roundtrip.max(max_abs(&(skew(&y) - oracle::skew(&y))));

        if !(0.0..=1.0).contains(&d) {
            out_of_range += 1;
        }
        let frob = (M3::identity() - rm).norm_squared() / 8.0;
        range = range.max((d - frob).abs()).max((d - oracle::normalized_distance(&rm)).abs());
    }
    let elapsed = start.elapsed();
    let worst = lemma.max(id1).max(id2).max(roundtrip).max(range);
    let passed = worst <= ALGEBRA_TOL && out_of_range == 0 && elapsed < ALGEBRA_RUNTIME;
    result(
        1,
        "algebra suite",
        passed,
        format!(
            "lemma {lemma:.2e}, conjugation {id1:.2e}, trace {id2:.2e}, vex/skew {roundtrip:.2e}, \
             distance {range:.2e} (tol {ALGEBRA_TOL:.0e}), {out_of_range} out of [0,1], {:.2} s (< {} s)",
            elapsed.as_secs_f64(),
            ALGEBRA_RUNTIME.as_secs()
        ),
    )
}

pub fn exponentials() -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut so3, mut se23, mut ortho) = (0.0f64, 0.0f64, 0.0f64);
    for &dt in &EXP_STEPS {
        for _ in 0..EXP_SAMPLES {
            let w = oracle::random_vec(&mut rng, 10.0);
            let v = oracle::random_vec(&mut rng, 10.0);
            let a = oracle::random_vec(&mut rng, 10.0);
            let kappa = rng.random_range(-2.0..2.0);

            let r = so3_exp(&(w * dt));
            let r_ref = oracle::series_exp(&oracle::skew(&(w * dt)), SERIES_TERMS);
            so3 = so3.max(max_abs(&(r.matrix() - r_ref)));
            ortho = ortho.max(max_abs(&(r.matrix() * r.matrix().transpose() - M3::identity())));
            ortho = ortho.max((r.matrix().determinant() - 1.0).abs());

            let e = se23_exp(&TangentElement::new(w, v, a, kappa), dt);
            let e_ref = oracle::series_exp(&(oracle::tangent_matrix(&w, &v, &a, kappa) * dt), SERIES_TERMS);
            se23 = se23.max(max_abs(&(e - e_ref)));
        }
    }
    let passed = so3 <= EXP_TOL && se23 <= EXP_TOL && ortho <= EXP_TOL;
    result(
        2,
        "exponential oracle",
        passed,
        format!("so3 {so3:.2e}, se23 {se23:.2e}, group {ortho:.2e} (tol {EXP_TOL:.0e}), dt in {EXP_STEPS:?}"),
    )
}

/// Body-frame measurements `R v` and `R(p − P)` without noise or bias.
fn exact_frame(suite: &SensorSuite, r: &M3, p: &V3) -> MeasurementFrame {
    MeasurementFrame {
        timestamp: 0.0,
        vectors: suite.vectors.iter().map(|s| r * s.direction).collect(),
        landmarks: suite.landmarks.iter().map(|s| r * (s.position - p)).collect(),
    }
}

pub fn reconstruction() -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let clean = SensorSuite::reference(0.0, false);
    let (mut att, mut pos) = (0.0f64, 0.0f64);
    let mut failures = 0usize;
    for _ in 0..POSE_SAMPLES {
        let r = oracle::random_rotation(&mut rng);
        let p = V3::new(
            rng.random_range(-8.0..8.0),
            rng.random_range(-8.0..8.0),
            rng.random_range(0.0..12.0),
        );
        match clean.reconstruct(&exact_frame(&clean, &r, &p)) {
            Ok(pose) => {
                att = att.max(max_abs(&(pose.attitude.matrix() - r)));
                pos = pos.max((pose.position - p).norm());
            }
            Err(_) => failures += 1,
        }
    }

    let noisy = SensorSuite::reference(NOISE_STD, false);
    let mut det = 0.0f64;
    for _ in 0..NOISY_TRIALS {
        let r = rotation(oracle::random_rotation(&mut rng));
        let p = oracle::random_vec(&mut rng, 6.0);
        let frame = noisy.measure(&r, &p, 0.0, &mut rng);
        match noisy.reconstruct(&frame) {
            Ok(pose) => det = det.max((pose.attitude.matrix().determinant() - 1.0).abs()),
            Err(_) => failures += 1,
        }
    }
    let passed = failures == 0 && att <= POSE_TOL && pos <= POSE_TOL && det <= DET_TOL;
    result(
        3,
        "reconstruction exactness",
        passed,
        format!(
            "attitude {att:.2e}, position {pos:.2e} (tol {POSE_TOL:.0e}), noisy |det-1| {det:.2e}, {failures} failures"
        ),
    )
}

/// The noise-free reference run, computed once per process.
pub fn clean_reference_run() -> &'static (Result<RunRecord, String>, Duration) {
    static RUN: OnceLock<(Result<RunRecord, String>, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let run = run_closed_loop(&SimConfig::reference_clean()).map_err(|e| e.to_string());
        (run, start.elapsed())
    })
}

fn max_column(run: &RunRecord, column: usize, t_from: f64) -> f64 {
    run.rows
        .iter()
        .filter(|r| r.t >= t_from - 1e-9)
        .map(|r| r.errors[column])
        .fold(0.0, |acc, x| if x.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(x) })
}

pub fn observer_convergence() -> CriterionResult {
    let (run, elapsed) = clean_reference_run();
    let run = match run {
        Ok(r) => r,
        Err(e) => return result(4, "observer convergence", false, e.clone()),
    };
    let er = max_column(run, 0, OBSERVER_SETTLE);
    let ep = max_column(run, 2, OBSERVER_SETTLE);
    let ev = max_column(run, 3, OBSERVER_SETTLE);
    let (ts, ys): (Vec<f64>, Vec<f64>) = run
        .rows
        .iter()
        .filter(|r| r.t >= SLOPE_WINDOW.0 - 1e-9 && r.t <= SLOPE_WINDOW.1 + 1e-9)
        .map(|r| (r.t, (r.errors[2] + r.errors[3]).ln()))
        .unzip();
    let f = linear_fit(&ts, &ys);
    let passed = er <= OBS_ATTITUDE_TOL
        && ep <= OBS_POSITION_TOL
        && ev <= OBS_VELOCITY_TOL
        && f.slope < 0.0
        && f.r_squared > SLOPE_MIN_R2
        && *elapsed < CLEAN_RUNTIME;
    result(
        4,
        "observer convergence",
        passed,
        format!(
            "t>={OBSERVER_SETTLE} s: R {er:.2e} (<= {OBS_ATTITUDE_TOL:.0e}), P {ep:.2e} (<= {OBS_POSITION_TOL:.0e}), \
             V {ev:.2e} (<= {OBS_VELOCITY_TOL:.0e}); log slope {:.3}/s, R2 {:.5} (> {SLOPE_MIN_R2}); run {:.2} s (< {} s)",
            f.slope,
            f.r_squared,
            elapsed.as_secs_f64(),
            CLEAN_RUNTIME.as_secs()
        ),
    )
}

/// `m(g + max‖P̈_d‖ + k_θ1 + k_θ2)` with the maximum taken on a 0.1 ms grid.
fn analytic_thrust_bound(cfg: &SimConfig) -> f64 {
    let n = (cfg.t_end / 1e-4).round() as usize;
    let acc = (0..=n)
        .map(|k| cfg.trajectory.eval(k as f64 * 1e-4).acceleration.norm())
        .fold(0.0, f64::max);
    let p = &cfg.vehicle;
    let g = &cfg.controller_gains;
    p.mass() * (p.gravity() + acc + g.k_theta1() + g.k_theta2())
}

pub fn tracking_convergence() -> CriterionResult {
    let (run, _) = clean_reference_run();
    let run = match run {
        Ok(r) => r,
        Err(e) => return result(5, "tracking convergence", false, e.clone()),
    };
    let er = max_column(run, 4, TRACKING_SETTLE);
    let ep = max_column(run, 5, TRACKING_SETTLE);
    let bound = analytic_thrust_bound(&SimConfig::reference_clean());
    let (lo, hi) = run.rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r.thrust), hi.max(r.thrust))
    });
    let thrust_ok = lo >= 0.0 && hi <= bound;
    let passed = ep <= TRACK_POSITION_TOL && er <= TRACK_ATTITUDE_TOL && thrust_ok;
    result(
        5,
        "tracking convergence",
        passed,
        format!(
            "t>={TRACKING_SETTLE} s: P {ep:.3e} (<= {TRACK_POSITION_TOL}), R {er:.2e} (<= {TRACK_ATTITUDE_TOL:.0e}); \
             thrust in [{lo:.3}, {hi:.3}] N, bound {bound:.3} N"
        ),
    )
}

pub fn noisy_robustness() -> CriterionResult {
    let configs: Vec<SimConfig> = (1..=ROBUST_SEEDS)
        .map(|seed| SimConfig {
            seed,
            ..SimConfig::reference()
        })
        .collect();
    let runs = run_batch(&configs);
    let mut unbounded = Vec::new();
    let mut over_mean = Vec::new();
    let mut worst_mean = 0.0f64;
    let mut worst_norm = 0.0f64;
    for (cfg, run) in configs.iter().zip(&runs) {
        match run {
            Ok(run) => {
                let peak = run
                    .rows
                    .iter()
                    .flat_map(|r| r.errors.iter().copied())
                    .fold(0.0, |acc: f64, x| if x.is_finite() { acc.max(x) } else { f64::INFINITY });
                worst_norm = worst_norm.max(peak);
                if !(peak <= ROBUST_BOUND) {
                    unbounded.push(cfg.seed);
                }
                let mean = run.summary.steady_state_mean[5];
                worst_mean = if mean.is_nan() { f64::NAN } else { worst_mean.max(mean) };
                if !(mean <= ROBUST_MEAN_TOL) {
                    over_mean.push(cfg.seed);
                }
            }
            Err(_) => {
                unbounded.push(cfg.seed);
                over_mean.push(cfg.seed);
            }
        }
    }
    let passed = unbounded.is_empty() && over_mean.is_empty();
    result(
        6,
        "noisy robustness",
        passed,
        format!(
            "{ROBUST_SEEDS} seeds: unbounded (> {ROBUST_BOUND} or error) {unbounded:?}, peak norm {worst_norm:.3e}; \
             steady mean P above {ROBUST_MEAN_TOL} m {over_mean:?}, worst {worst_mean:.3}"
        ),
    )
}

/// Smooth auxiliary path with analytic derivatives up to third order.
fn theta_path(t: f64) -> [Vec3; 4] {
    let (a, b, c) = (0.3, -0.2, 0.25);
    let (wa, wb, wc) = (1.3, 0.7, 0.9);
    let pc = 0.4;
    let (sa, ca) = (wa * t).sin_cos();
    let (sb, cb) = (wb * t).sin_cos();
    let (sc, cc) = (wc * t + pc).sin_cos();
    [
        Vec3::new(a * sa, b * cb, c * sc),
        Vec3::new(a * wa * ca, -b * wb * sb, c * wc * cc),
        Vec3::new(-a * wa.powi(2) * sa, -b * wb.powi(2) * cb, -c * wc.powi(2) * sc),
        Vec3::new(-a * wa.powi(3) * ca, b * wb.powi(3) * sb, -c * wc.powi(3) * cc),
    ]
}

fn control_along_path(t: f64) -> IntermediaryControl {
    let [th, thd, thdd, thddd] = theta_path(t);
    let aux = AuxiliaryState {
        theta: th,
        theta_dot: thd,
        theta_ddot: thdd,
    };
    intermediary_f(
        &aux,
        &thdd,
        &thddd,
        &Trajectory::figure_eight().eval(t),
        &ControllerGains::default(),
        &VehicleParams::default(),
    )
    .expect("path stays away from the singular thrust direction")
}

fn tanh3(x: &Vec3) -> Vec3 {
    Vec3::new(x.x.tanh(), x.y.tanh(), x.z.tanh())
}

fn quat_of(ic: &IntermediaryControl) -> [f64; 4] {
    let q = desired_quaternion(&ic.f, ic.thrust, &VehicleParams::default())
        .expect("path is regular");
    [q.w, q.v.x, q.v.y, q.v.z]
}

/// Central difference errors for `h = h0, h0/2, …`.
fn orders(h0: f64, levels: usize, err: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
    let h: Vec<f64> = (0..levels).map(|i| h0 / 2f64.powi(i as i32)).collect();
    let e = h.iter().map(|&h| err(h)).collect();
    (h, e)
}

pub fn derivative_oracles() -> CriterionResult {
    let p = VehicleParams::default();
    let t0 = 2.3;
    let ic0 = control_along_path(t0);
    let (om0, omd0) = desired_angular_velocity(&ic0, &p).expect("regular");
    let (_, xid0) = xi_matrix(&ic0, &p).expect("regular");
    let [x0, xd0, xdd0, _] = theta_path(t0);

    let mut checks: Vec<(&str, f64, f64)> = Vec::new();

    // first order: forward quaternion difference, Ω = 2 vec(Q⁻¹ Q̇)
    let (h, e) = orders(2e-2, 6, |h| {
        let q0 = quat_of(&ic0);
        let q1 = quat_of(&control_along_path(t0 + h));
        let dq: [f64; 4] = std::array::from_fn(|i| (q1[i] - q0[i]) / h);
        let w = oracle::hamilton(&oracle::conjugate(&q0), &dq);
        (Vec3::new(2.0 * w[1], 2.0 * w[2], 2.0 * w[3]) - om0).norm()
    });
    checks.push(("Omega_d", 1.0, convergence_order(&h, &e)));

    let (h, e) = orders(4e-2, 6, |h| {
        let (a, _) = desired_angular_velocity(&control_along_path(t0 + h), &p).expect("regular");
        let (b, _) = desired_angular_velocity(&control_along_path(t0 - h), &p).expect("regular");
        ((a - b) / (2.0 * h) - omd0).norm()
    });
    checks.push(("Omega_d_dot", 2.0, convergence_order(&h, &e)));

    let (h, e) = orders(4e-2, 6, |h| {
        let (a, _) = xi_matrix(&control_along_path(t0 + h), &p).expect("regular");
        let (b, _) = xi_matrix(&control_along_path(t0 - h), &p).expect("regular");
        ((a - b) / (2.0 * h) - xid0).norm()
    });
    checks.push(("Xi_dot", 2.0, convergence_order(&h, &e)));

    let (h, e) = orders(4e-2, 6, |h| {
        let a = control_along_path(t0 + h).f;
        let b = control_along_path(t0 - h).f;
        ((a - b) / (2.0 * h) - ic0.f_dot).norm()
    });
    checks.push(("F_dot", 2.0, convergence_order(&h, &e)));

    let (h, e) = orders(4e-2, 6, |h| {
        let a = control_along_path(t0 + h).f;
        let b = control_along_path(t0 - h).f;
        ((a - 2.0 * ic0.f + b) / (h * h) - ic0.f_ddot).norm()
    });
    checks.push(("F_ddot", 2.0, convergence_order(&h, &e)));

    let rate = psi_rate(&x0, &xd0);
    let (h, e) = orders(4e-2, 6, |h| {
        let a = tanh3(&theta_path(t0 + h)[0]);
        let b = tanh3(&theta_path(t0 - h)[0]);
        ((a - b) / (2.0 * h) - rate).norm()
    });
    checks.push(("psi'", 2.0, convergence_order(&h, &e)));

    let second = psi_second_rate(&x0, &xd0, &xdd0);
    let (h, e) = orders(4e-2, 6, |h| {
        let a = tanh3(&theta_path(t0 + h)[0]);
        let b = tanh3(&theta_path(t0 - h)[0]);
        ((a - 2.0 * tanh3(&x0) + b) / (h * h) - second).norm()
    });
    checks.push(("psi''", 2.0, convergence_order(&h, &e)));

    let passed = checks
        .iter()
        .all(|(_, nominal, order)| (order - nominal).abs() <= ORDER_TOL);
    let detail = checks
        .iter()
        .map(|(name, nominal, order)| format!("{name} {order:.3} (nominal {nominal})"))
        .collect::<Vec<_>>()
        .join(", ");
    result(7, "derivative oracles", passed, format!("{detail}; tol +-{ORDER_TOL}"))
}

pub fn quaternion_equivalence() -> CriterionResult {
    let base = SimConfig {
        t_end: EQUIVALENCE_T_END,
        ..SimConfig::reference_clean()
    };
    let quat = SimConfig {
        variant: ObserverVariant::Quaternion,
        quat_integration: Integration::Matched,
        ..base.clone()
    };
    let (mut a, mut b) = match (ClosedLoop::new(&base), ClosedLoop::new(&quat)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return result(8, "quaternion/matrix equivalence", false, e.to_string()),
    };
    let (mut att, mut pos) = (0.0f64, 0.0f64);
    while !a.is_finished() {
        match (a.step(), b.step()) {
            (Ok(x), Ok(y)) => {
                att = att.max((x.post.attitude.matrix() - y.post.attitude.matrix()).norm());
                pos = pos.max((x.post.position - y.post.position).norm());
            }
            (Err(e), _) | (_, Err(e)) => {
                return result(8, "quaternion/matrix equivalence", false, e.to_string())
            }
        }
    }
    let passed = att <= EQUIVALENCE_TOL && pos <= EQUIVALENCE_TOL;
    result(
        8,
        "quaternion/matrix equivalence",
        passed,
        format!(
            "{EQUIVALENCE_T_END} s: attitude {att:.2e} Frobenius, position {pos:.2e} m (tol {EQUIVALENCE_TOL:.0e})"
        ),
    )
}

pub fn integrator_physics() -> CriterionResult {
    let p = VehicleParams::default();
    let j = *p.inertia();
    let mut s = TrueState {
        attitude: Rotation::identity(),
        omega: Vec3::new(1.0, 2.0, 3.0),
        position: Vec3::zeros(),
        velocity: Vec3::zeros(),
    };
    let u = ControlCommand {
        torque: Vec3::zeros(),
        thrust: 0.0,
    };
    let energy = |w: &Vec3| 0.5 * w.dot(&(j * w));
    let (e0, h0) = (energy(&s.omega), (j * s.omega).norm());
    let (mut de, mut dh, mut ortho) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..SPIN_STEPS {
        s = integrate_step(&s, &u, &p, SPIN_DT);
        de = de.max((energy(&s.omega) - e0).abs() / e0);
        dh = dh.max(((j * s.omega).norm() - h0).abs() / h0);
        let r = s.attitude.matrix();
        ortho = ortho.max(max_abs(&(r * r.transpose() - M3::identity())));
    }
    let passed = de <= SPIN_DRIFT_TOL && dh <= SPIN_DRIFT_TOL && ortho <= SPIN_ORTHO_TOL;
    result(
        9,
        "integrator physics",
        passed,
        format!(
            "{} s spin: energy {de:.2e}, momentum {dh:.2e} (tol {SPIN_DRIFT_TOL:.0e}), orthogonality {ortho:.2e} (tol {SPIN_ORTHO_TOL:.0e})",
            SPIN_STEPS as f64 * SPIN_DT
        ),
    )
}

fn replay_check(dir: &Path) -> Result<(bool, String), String> {
    let cfg = SimConfig::reference();
    let first = run_closed_loop(&cfg).map_err(|e| e.to_string())?;
    let second = run_closed_loop(&cfg).map_err(|e| e.to_string())?;
    let (da, db) = (dir.join("a"), dir.join("b"));
    write_run(&first, &da).map_err(|e| e.to_string())?;
    write_run(&second, &db).map_err(|e| e.to_string())?;
    let read = |p: &Path| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    let identical = read(&da.join("run.csv"))? == read(&db.join("run.csv"))?;

    let logged_cfg = SimConfig {
        t_end: REPLAY_T_END,
        sensors: cfg.sensors.landmarks_only(),
        ..cfg.clone()
    };
    let logged = run_closed_loop_logged(&logged_cfg).map_err(|e| e.to_string())?;
    let dl = dir.join("logged");
    write_run(&logged, &dl).map_err(|e| e.to_string())?;
    let frames = read_landmark_log(&dl.join("landmarks.csv")).map_err(|e| e.to_string())?;
    let truth = read_truth(&dl.join("truth.csv")).map_err(|e| e.to_string())?;
    let inputs = read_inputs(&dl.join("run.csv")).map_err(|e| e.to_string())?;
    let replay = run_replay(&frames, &truth, Some(&inputs), &logged_cfg).map_err(|e| e.to_string())?;

    let mut diff = if replay.rows.len() == logged.rows.len() { 0.0f64 } else { f64::INFINITY };
    for (a, b) in logged.rows.iter().zip(&replay.rows) {
        for (x, y) in a.observer_errors().iter().zip(b.observer_errors().iter()) {
            let d = (x - y).abs();
            diff = if d.is_nan() { f64::NAN } else { diff.max(d) };
        }
    }
    let passed = identical && diff <= REPLAY_TOL && replay.dropouts.is_empty();
    Ok((
        passed,
        format!(
            "run.csv byte-identical: {identical}; self-replay ({} rows, {} dropouts) max observer error difference {diff:.2e} (tol {REPLAY_TOL:.0e})",
            replay.rows.len(),
            replay.dropouts.len()
        ),
    ))
}

pub fn determinism_and_replay() -> CriterionResult {
    let outcome = tempfile::tempdir()
        .map_err(|e| e.to_string())
        .and_then(|dir| replay_check(dir.path()));
    match outcome {
        Ok((passed, detail)) => result(10, "determinism and self-replay", passed, detail),
        Err(e) => result(10, "determinism and self-replay", false, e),
    }
}
