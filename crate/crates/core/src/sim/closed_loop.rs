//! The closed loop: sensors, observer, controller and truth, one tick at a time.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ObserverVariant, RTildeSource, SimConfig};
use super::record::{quat_array, Counters, Row, RunLog, RunRecord, Summary};
use super::SimError;
use crate::controller::{
    aux_theta_step, control_errors, desired_angular_velocity, desired_attitude, intermediary_f,
    max_acceleration, theta_jerk, thrust_bound, thrust_command, torque, AuxiliaryState,
    ControlError, DesiredAttitude, DesiredTrajectory, IntermediaryControl, TrajectoryPoint,
};
use crate::dynamics::{integrate_step, ControlCommand, TrueState, VehicleParams};
use crate::liegroup::{attitude_distance, UnitQuaternion, Vec3};
use crate::observer::{
    angular_velocity_step, correction_factors, observer_errors, predict_correct_step,
    translational_rates, CorrectionTerms, ObserverErrors, ObserverGains, ObserverState,
};
use crate::quat_variant::{
    quat_correction_factors, quat_observer_step, quat_torque, Integration, QuatErrors,
    QuatObserverState,
};
use crate::sensing::{MeasurementFrame, ReconstructedPose};

/// Observer state in either parameterization.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Estimator {
    Matrix(ObserverState),
    Quaternion(QuatObserverState, Integration),
}

impl Estimator {
    pub(crate) fn new(s: ObserverState, variant: ObserverVariant, mode: Integration) -> Self {
        match variant {
            ObserverVariant::Matrix => Self::Matrix(s),
            ObserverVariant::Quaternion => {
                Self::Quaternion(QuatObserverState::from_matrix_state(&s), mode)
            }
        }
    }

    pub(crate) fn state(&self) -> ObserverState {
        match self {
            Self::Matrix(s) => *s,
            Self::Quaternion(q, _) => q.as_matrix_state(),
        }
    }

    pub(crate) fn quaternion(&self) -> UnitQuaternion {
        match self {
            Self::Matrix(s) => UnitQuaternion::from_rotation(&s.attitude),
            Self::Quaternion(q, _) => q.q_hat,
        }
    }

    pub(crate) fn corrections(
        &self,
        pose: &ReconstructedPose,
        thrust: f64,
        p: &VehicleParams,
        g: &ObserverGains,
    ) -> CorrectionTerms {
        match self {
            Self::Matrix(s) => correction_factors(pose, s, thrust, p, g),
            Self::Quaternion(q, _) => quat_correction_factors(
                &UnitQuaternion::from_rotation(&pose.attitude),
                &pose.position,
                q,
                thrust,
                p,
                g,
            ),
        }
    }

    /// Prediction and correction of attitude, position and velocity.
    /// Returns whether a re-projection happened and the quaternion norm drift.
    pub(crate) fn predict_correct(
        &mut self,
        w: &CorrectionTerms,
        thrust: f64,
        p: &VehicleParams,
        dt: f64,
    ) -> (bool, f64) {
        match self {
            Self::Matrix(s) => {
                let (next, repaired) = predict_correct_step(s, w, thrust, p, dt);
                *s = next;
                (repaired, 0.0)
            }
            Self::Quaternion(q, mode) => {
                let (next, drift) = quat_observer_step(q, w, thrust, p, dt, *mode);
                *q = next;
                (false, drift)
            }
        }
    }

    pub(crate) fn set_omega(&mut self, omega: Vec3) {
        match self {
            Self::Matrix(s) => s.omega = omega,
            Self::Quaternion(q, _) => q.omega = omega,
        }
    }
}

/// Everything computed during one tick, for inspection and tests.
#[derive(Debug, Clone)]
pub struct TickOutput {
    pub tick: usize,
    pub t: f64,
    pub frame: MeasurementFrame,
    pub pose: ReconstructedPose,
    pub truth: TrueState,
    /// Estimate entering the tick.
    pub pre: ObserverState,
    pub corrections: CorrectionTerms,
    /// Estimate after prediction, correction and the Ω̂ update.
    pub post: ObserverState,
    pub observer_errors: ObserverErrors,
    pub aux_before: AuxiliaryState,
    pub aux_after: AuxiliaryState,
    pub theta_jerk: Vec3,
    pub desired: TrajectoryPoint,
    pub intermediary: IntermediaryControl,
    pub attitude_d: DesiredAttitude,
    /// The Ξ guard fired and the previous Ω_d, Ω̇_d were held.
    pub xi_guarded: bool,
    pub command: ControlCommand,
    pub row: Row,
}

/// Stepwise closed-loop simulation.
pub struct ClosedLoop<'a> {
    cfg: &'a SimConfig,
    truth: TrueState,
    estimator: Estimator,
    aux: AuxiliaryState,
    rng: ChaCha8Rng,
    tick: usize,
    last_rates: (Vec3, Vec3),
    counters: Counters,
}

impl<'a> ClosedLoop<'a> {
    pub fn new(cfg: &'a SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let obs = cfg.sensors.observability();
        if !obs.is_observable() {
            return Err(SimError::Unobservable(obs));
        }
        Ok(Self {
            cfg,
            truth: cfg.truth,
            estimator: Estimator::new(cfg.estimate, cfg.variant, cfg.quat_integration),
            aux: AuxiliaryState {
                theta: cfg.theta,
                theta_dot: cfg.theta_dot,
                theta_ddot: Vec3::zeros(),
            },
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            tick: 0,
            last_rates: (Vec3::zeros(), Vec3::zeros()),
            counters: Counters::default(),
        })
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    pub fn truth(&self) -> &TrueState {
        &self.truth
    }

    pub fn estimate(&self) -> ObserverState {
        self.estimator.state()
    }

    pub fn is_finished(&self) -> bool {
        self.tick >= self.cfg.rows()
    }

    /// Runs one tick and then advances the truth by one step, except after
    /// the final row.
    pub fn step(&mut self) -> Result<TickOutput, SimError> {
        let cfg = self.cfg;
        let (vp, og, cg) = (&cfg.vehicle, &cfg.observer_gains, &cfg.controller_gains);
        let dt = cfg.dt;
        let k = self.tick;
        let t = k as f64 * dt;
        let control = |source: ControlError| SimError::Control { tick: k, source };

        let truth = self.truth;
        if !truth_is_finite(&truth) {
            return Err(SimError::Diverged { tick: k, what: "true state" });
        }

        // measurement and reconstruction
        let frame = cfg.sensors.measure(&truth.attitude, &truth.position, t, &mut self.rng);
        let pose = cfg
            .sensors
            .reconstruct(&frame)
            .map_err(|source| SimError::Reconstruction { tick: k, source })?;

        // errors of the estimate entering the tick
        let pre = self.estimator.state();
        let q_hat_pre = self.estimator.quaternion();
        let obs_err = observer_errors(&truth, &pre);

        // thrust from the auxiliary state entering the tick, then its update
        let desired = cfg.trajectory.eval(t);
        let aux_before = self.aux;
        let (_, thrust) = thrust_command(&aux_before, &desired, cg, vp);
        let aux_after = aux_theta_step(&aux_before, &pre.position, &pre.velocity, &desired, cg, dt);
        let theta_ddot = aux_after.theta_ddot;

        // correction terms from the pre-prediction estimate, then predict and correct
        let w = self.estimator.corrections(&pose, thrust, vp, og);
        let (repaired, drift) = self.estimator.predict_correct(&w, thrust, vp, dt);
        self.counters.estimate_repairs += repaired as usize;
        self.counters.max_quat_drift = self.counters.max_quat_drift.max(drift);

        // F and its derivatives
        let (p_dot, v_dot) = translational_rates(&pre, &w, thrust, vp);
        let jerk = theta_jerk(&aux_before, &theta_ddot, &p_dot, &v_dot, &desired, cg);
        let ic = intermediary_f(&aux_before, &theta_ddot, &jerk, &desired, cg, vp).map_err(control)?;

        // desired attitude and angular velocity
        let mut att_d = desired_attitude(&ic, vp).map_err(control)?;
        let xi_guarded = match desired_angular_velocity(&ic, vp) {
            Ok(rates) => {
                self.last_rates = rates;
                false
            }
            Err(ControlError::SingularXi { alpha1, alpha2 }) => {
                log::warn!("tick {k}: Xi guard (alpha1 = {alpha1:e}, alpha2 = {alpha2:e}), holding rates");
                self.counters.xi_guard_events += 1;
                true
            }
            Err(e) => return Err(control(e)),
        };
        (att_d.omega_d, att_d.omega_d_dot) = self.last_rates;

        // torque
        let corrected = self.estimator.state();
        let tau = match self.estimator {
            Estimator::Matrix(_) => {
                let r_src = match cfg.rtilde_source {
                    RTildeSource::Estimate => corrected.attitude,
                    RTildeSource::Reconstruction => pose.attitude,
                };
                let r_c = r_src * att_d.r_d.transpose();
                torque(&r_c, &w.r_tilde, &pre.omega, &att_d.omega_d, &att_d.omega_d_dot, vp, cg)
            }
            Estimator::Quaternion(..) => {
                let q_y = UnitQuaternion::from_rotation(&pose.attitude);
                let q_src = match cfg.rtilde_source {
                    RTildeSource::Estimate => self.estimator.quaternion(),
                    RTildeSource::Reconstruction => q_y,
                };
                let errors = QuatErrors {
                    q_tilde_o: q_hat_pre.inverse().product(&q_y),
                    q_tilde_c: att_d.q_d.inverse().product(&q_src),
                };
                quat_torque(&errors, &pre.omega, &att_d.omega_d, &att_d.omega_d_dot, vp, cg)
            }
        };

        // angular-velocity estimate
        let omega_next = angular_velocity_step(&corrected, &w, &tau, vp, dt);
        self.estimator.set_omega(omega_next);
        let post = self.estimator.state();

        let command = ControlCommand {
            torque: tau,
            thrust,
        };
        let ctrl_err = control_errors(
            &truth.attitude,
            &truth.omega,
            &truth.position,
            &truth.velocity,
            &att_d.r_d,
            &att_d.omega_d,
            &desired,
        );
        let row = Row {
            t,
            q: quat_array(&UnitQuaternion::from_rotation(&truth.attitude)),
            position: truth.position,
            velocity: truth.velocity,
            q_hat: quat_array(&q_hat_pre),
            position_hat: pre.position,
            velocity_hat: pre.velocity,
            position_d: desired.position,
            errors: [
                attitude_distance(&obs_err.r_tilde),
                obs_err.omega_tilde.norm(),
                obs_err.p_tilde.norm(),
                obs_err.v_tilde.norm(),
                attitude_distance(&ctrl_err.r_tilde),
                ctrl_err.p_tilde.norm(),
                ctrl_err.v_tilde.norm(),
            ],
            torque: tau,
            thrust,
        };

        if !row.values().iter().all(|v| v.is_finite()) {
            return Err(SimError::Diverged { tick: k, what: "output row" });
        }

        self.aux = aux_after;
        self.tick += 1;
        if !self.is_finished() {
            let mut next = integrate_step(&truth, &command, vp, dt);
            if next.attitude.repair_if_drifted() {
                self.counters.truth_repairs += 1;
            }
            self.truth = next;
        }

        Ok(TickOutput {
            tick: k,
            t,
            frame,
            pose,
            truth,
            pre,
            corrections: w,
            post,
            observer_errors: obs_err,
            aux_before,
            aux_after,
            theta_jerk: jerk,
            desired,
            intermediary: ic,
            attitude_d: att_d,
            xi_guarded,
            command,
            row,
        })
    }
}

fn truth_is_finite(s: &TrueState) -> bool {
    s.attitude.matrix().iter().all(|v| v.is_finite())
        && s.omega.iter().chain(s.position.iter()).chain(s.velocity.iter()).all(|v| v.is_finite())
}

fn run(cfg: &SimConfig, keep_log: bool) -> Result<RunRecord, SimError> {
    let mut sim = ClosedLoop::new(cfg)?;
    let n = cfg.rows();
    let mut rows = Vec::with_capacity(n);
    let mut log = keep_log.then(|| RunLog {
        landmarks: cfg.sensors.landmarks.clone(),
        frames: Vec::with_capacity(n),
        omega: Vec::with_capacity(n),
    });
    while !sim.is_finished() {
        let out = sim.step()?;
        rows.push(out.row);
        if let Some(log) = log.as_mut() {
            log.frames.push(out.frame);
            log.omega.push(out.truth.omega);
        }
    }
    let bound = thrust_bound(
        &cfg.vehicle,
        &cfg.controller_gains,
        max_acceleration(&cfg.trajectory, cfg.t_end, cfg.dt),
    );
    let summary = Summary::from_rows(&rows, 0, bound, sim.counters);
    Ok(RunRecord {
        rows,
        dropouts: Vec::new(),
        summary,
        log,
    })
}

/// Runs the whole scenario.
pub fn run_closed_loop(cfg: &SimConfig) -> Result<RunRecord, SimError> {
    run(cfg, false)
}

/// [`run_closed_loop`] keeping the sensor log and truth angular velocity,
/// which [`write_run`](super::write_run) then emits for replay.
pub fn run_closed_loop_logged(cfg: &SimConfig) -> Result<RunRecord, SimError> {
    run(cfg, true)
}
