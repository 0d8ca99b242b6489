use std::path::{Path, PathBuf};

use vtol_nav::controller::Trajectory;
use vtol_nav::dynamics::TrueState;
use vtol_nav::liegroup::{Rotation, Vec3};
use vtol_nav::observer::{angular_velocity_step, correction_factors, predict_correct_step, ObserverState};
use vtol_nav::sensing::SensorSuite;
use vtol_nav::sim::{
    read_inputs, read_landmark_log, read_run_csv, read_truth, run_batch, run_closed_loop,
    run_closed_loop_logged, run_replay, write_run, ClosedLoop, ConfigError, LoggedFrame,
    LoggedLandmark, SimConfig, SimError, TruthSample, CSV_HEADER,
};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn short(t_end: f64) -> SimConfig {
    SimConfig {
        t_end,
        ..SimConfig::reference()
    }
}

#[test]
fn shipped_configs_parse_to_presets() {
    let dir = configs_dir();
    let reference = SimConfig::from_file(&dir.join("reference.toml")).unwrap();
    assert_eq!(reference, SimConfig::reference());
    let clean = SimConfig::from_file(&dir.join("reference_clean.toml")).unwrap();
    assert_eq!(clean, SimConfig::reference_clean());
    let landmarks = SimConfig::from_file(&dir.join("landmarks_only.toml")).unwrap();
    assert!(landmarks.sensors.vectors.is_empty());
    assert_eq!(landmarks.sensors.landmarks, SimConfig::reference().sensors.landmarks);
}

#[test]
fn flat_dotted_keys() {
    let cfg = SimConfig::parse("observer.k_o1 = 12\nsim.seed = 9\ncontroller.rtilde_source = \"reconstruction\"\n").unwrap();
    assert_eq!(cfg.observer_gains.k_o1(), 12.0);
    assert_eq!(cfg.seed, 9);
    assert!(matches!(
        SimConfig::parse("observer.k_o9 = 1"),
        Err(ConfigError::UnknownKey(k)) if k == "observer.k_o9"
    ));
}

#[test]
fn fifty_second_run_has_50001_rows() {
    let run = run_closed_loop(&SimConfig::reference_clean()).unwrap();
    assert_eq!(run.rows.len(), 50_001);
    assert_eq!(run.summary.rows, 50_001);
    assert!(run.rows.windows(2).all(|w| w[1].t > w[0].t));
    assert!((run.rows.last().unwrap().t - 50.0).abs() < 1e-9);
}

#[test]
fn default_scenario_rows_are_finite() {
    let run = run_closed_loop(&SimConfig::reference()).unwrap();
    assert!(run.rows.iter().all(|r| r.values().iter().all(|v| v.is_finite())));
}

#[test]
fn hundred_noisy_seeds_emit_finite_rows() {
    let configs: Vec<SimConfig> = (0..100)
        .map(|seed| SimConfig {
            seed,
            sensors: SensorSuite::reference(0.05, false),
            ..SimConfig::reference()
        })
        .collect();
    for (seed, run) in run_batch(&configs).into_iter().enumerate() {
        let run = run.unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert_eq!(run.rows.len(), 50_001);
        let bad = run.rows.iter().position(|r| !r.values().iter().all(|v| v.is_finite()));
        assert!(bad.is_none(), "seed {seed}: non-finite row {bad:?}");
    }
}

#[test]
fn biased_seeds_finish_finite_or_report_divergence() {
    let configs: Vec<SimConfig> = (0..100)
        .map(|seed| SimConfig {
            seed,
            ..SimConfig::reference()
        })
        .collect();
    let mut diverged = Vec::new();
    for (seed, run) in run_batch(&configs).into_iter().enumerate() {
        match run {
            Ok(run) => {
                assert_eq!(run.rows.len(), 50_001);
                assert!(run.rows.iter().all(|r| r.values().iter().all(|v| v.is_finite())));
            }
            Err(SimError::Diverged { .. }) => diverged.push(seed),
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    println!("diverged seeds: {diverged:?}");
}

#[test]
fn equilibrium_persists_for_one_second() {
    let position = Vec3::new(1.0, -2.0, 3.0);
    let cfg = SimConfig {
        t_end: 1.0,
        truth: TrueState {
            attitude: Rotation::identity(),
            omega: Vec3::zeros(),
            position,
            velocity: Vec3::zeros(),
        },
        estimate: ObserverState {
            attitude: Rotation::identity(),
            omega: Vec3::zeros(),
            position,
            velocity: Vec3::zeros(),
        },
        trajectory: Trajectory::Hover { position },
        sensors: SensorSuite::reference(0.0, false),
        ..SimConfig::reference()
    };
    let run = run_closed_loop(&cfg).unwrap();
    let worst = run
        .rows
        .iter()
        .flat_map(|r| r.errors)
        .fold(0.0f64, f64::max);
    assert!(worst <= 1e-6, "worst error {worst:e}");
}

#[test]
fn tick_follows_step_order() {
    let cfg = short(0.2);
    let mut sim = ClosedLoop::new(&cfg).unwrap();
    let (vp, og) = (&cfg.vehicle, &cfg.observer_gains);
    let mut previous_post: Option<ObserverState> = None;
    while !sim.is_finished() {
        let out = sim.step().unwrap();
        if let Some(prev) = previous_post {
            assert_eq!(out.pre, prev);
        }
        // corrections use the estimate entering the tick
        let w = correction_factors(&out.pose, &out.pre, out.command.thrust, vp, og);
        assert_eq!(out.corrections, w);
        // prediction and correction, then the angular-velocity update from the corrected estimate
        let (corrected, _) = predict_correct_step(&out.pre, &w, out.command.thrust, vp, cfg.dt);
        assert_eq!(out.post.attitude, corrected.attitude);
        assert_eq!(out.post.position, corrected.position);
        assert_eq!(out.post.velocity, corrected.velocity);
        let omega = angular_velocity_step(&corrected, &w, &out.command.torque, vp, cfg.dt);
        assert_eq!(out.post.omega, omega);
        // row reports the estimate entering the tick
        assert_eq!(out.row.position_hat, out.pre.position);
        assert_eq!(out.row.thrust, out.command.thrust);
        previous_post = Some(out.post);
    }
}

#[test]
fn csv_is_deterministic_and_roundtrips() {
    let cfg = short(2.0);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_closed_loop(&cfg).unwrap();
    write_run(&first, a.path()).unwrap();
    write_run(&run_closed_loop(&cfg).unwrap(), b.path()).unwrap();
    let bytes = std::fs::read(a.path().join("run.csv")).unwrap();
    assert_eq!(bytes, std::fs::read(b.path().join("run.csv")).unwrap());
    assert!(String::from_utf8(bytes).unwrap().starts_with(&format!("{CSV_HEADER}\n")));

    let back = read_run_csv(&a.path().join("run.csv")).unwrap();
    assert_eq!(back.len(), first.rows.len());
    for (x, y) in first.rows.iter().zip(&back) {
        for (u, v) in x.values().iter().zip(y.values().iter()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }
    let summary = std::fs::read_to_string(a.path().join("summary.txt")).unwrap();
    assert!(summary.contains("rows = 2001"));
}

#[test]
fn other_seed_changes_output() {
    let a = run_closed_loop(&short(0.1)).unwrap();
    let b = run_closed_loop(&SimConfig { seed: 2, ..short(0.1) }).unwrap();
    assert_ne!(a.rows[5].errors, b.rows[5].errors);
}

fn logged_run(dir: &Path) -> (SimConfig, vtol_nav::sim::RunRecord) {
    let base = short(3.0);
    let cfg = SimConfig {
        sensors: base.sensors.landmarks_only(),
        ..base
    };
    let run = run_closed_loop_logged(&cfg).unwrap();
    write_run(&run, dir).unwrap();
    (cfg, run)
}

#[test]
fn self_replay_reproduces_observer_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, run) = logged_run(dir.path());
    let frames = read_landmark_log(&dir.path().join("landmarks.csv")).unwrap();
    let truth = read_truth(&dir.path().join("truth.csv")).unwrap();
    let inputs = read_inputs(&dir.path().join("run.csv")).unwrap();
    assert_eq!(frames.len(), run.rows.len());
    let replay = run_replay(&frames, &truth, Some(&inputs), &cfg).unwrap();
    assert!(replay.dropouts.is_empty());
    assert_eq!(replay.rows.len(), run.rows.len());
    for (a, b) in run.rows.iter().zip(&replay.rows) {
        for (x, y) in a.observer_errors().iter().zip(b.observer_errors().iter()) {
            assert!((x - y).abs() <= 1e-9, "t = {}: {x} vs {y}", a.t);
        }
        assert!(b.errors[4..].iter().all(|v| v.is_nan()));
    }
}

#[test]
fn replay_without_truth_omega_reports_nan() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = logged_run(dir.path());
    let frames = read_landmark_log(&dir.path().join("landmarks.csv")).unwrap();
    let truth: Vec<TruthSample> = read_truth(&dir.path().join("truth.csv"))
        .unwrap()
        .into_iter()
        .map(|mut s| {
            s.has_omega = false;
            s
        })
        .collect();
    let replay = run_replay(&frames, &truth, None, &cfg).unwrap();
    assert!(replay.rows.iter().all(|r| r.errors[1].is_nan() && r.errors[0].is_finite()));
}

#[test]
fn single_frame_log_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = logged_run(dir.path());
    let frames = read_landmark_log(&dir.path().join("landmarks.csv")).unwrap();
    let truth = read_truth(&dir.path().join("truth.csv")).unwrap();
    let replay = run_replay(&frames[..1], &truth, None, &cfg).unwrap();
    assert_eq!(replay.rows.len(), 1);
    assert!(replay.dropouts.is_empty());
}

#[test]
fn dropout_gap_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = logged_run(dir.path());
    let frames = read_landmark_log(&dir.path().join("landmarks.csv")).unwrap();
    let truth = read_truth(&dir.path().join("truth.csv")).unwrap();
    // remove ticks 100..110 and degrade tick 200 to two landmarks
    let mut gapped: Vec<LoggedFrame> = frames
        .iter()
        .enumerate()
        .filter(|(k, _)| !(100..110).contains(k))
        .map(|(_, f)| f.clone())
        .collect();
    let k200 = gapped.iter().position(|f| (f.t - 0.2).abs() < 1e-9).unwrap();
    gapped[k200].landmarks.truncate(2);
    let replay = run_replay(&gapped, &truth, None, &cfg).unwrap();
    assert_eq!(replay.rows.len(), frames.len());
    let mut expected: Vec<usize> = (100..110).collect();
    expected.push(200);
    assert_eq!(replay.dropouts, expected);

    let out = tempfile::tempdir().unwrap();
    write_run(&replay, out.path()).unwrap();
    let flagged = std::fs::read_to_string(out.path().join("dropouts.csv")).unwrap();
    assert_eq!(flagged.lines().count(), 1 + expected.len());
    assert!(flagged.starts_with("tick,t\n100,"));
}

#[test]
fn malformed_log_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "t,j,px,py,pz,zx,zy,zz,s\n0,0,1,2,3,4,5,6,1\n0,1,1,2,x,4,5,6,1\n").unwrap();
    match read_landmark_log(&path) {
        Err(SimError::Csv { line, .. }) => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
    std::fs::write(&path, "t,j,px,py,pz,zx,zy,zz,s\n").unwrap();
    assert!(matches!(read_landmark_log(&path), Err(SimError::EmptyLog(_))));
}

#[test]
fn landmarks_group_by_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    std::fs::write(
        &path,
        "t,j,px,py,pz,zx,zy,zz,s\n0.5,1,1,0,0,1,0,0,2\n0.5,0,0,1,0,0,1,0,1\n0.6,0,0,0,1,0,0,1,1\n",
    )
    .unwrap();
    let frames = read_landmark_log(&path).unwrap();
    assert_eq!(frames.len(), 2);
    assert_eq!(
        frames[0].landmarks[1],
        LoggedLandmark {
            j: 1,
            position: Vec3::new(1.0, 0.0, 0.0),
            measurement: Vec3::new(1.0, 0.0, 0.0),
            weight: 2.0,
        }
    );
}

#[test]
fn unobservable_suite_rejected() {
    let mut cfg = short(0.1);
    cfg.sensors.vectors.clear();
    cfg.sensors.landmarks.truncate(2);
    assert!(matches!(run_closed_loop(&cfg), Err(SimError::Unobservable(_))));
}
