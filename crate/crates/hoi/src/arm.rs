//! Simulated arm: TCP kinematic state, the fixed-rate servo loop, velocity
//! limits, the open-loop gripper, and the hand-anchored safety zone.
//!
//! The simulation is kinematic at TCP level: each servo tick moves the pose
//! straight toward the active target with speed clamped to the configured
//! limits, reaching it exactly once within one step's reach. Commands picked
//! up at the end of a tick drive the following tick, so a command posted at
//! tick k first moves the arm at tick k+1.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::clock::TickSource;
use crate::geom::{Pose, Vec3};
use crate::mailbox::Mailbox;

/// Servo period (500 Hz).
pub const SERVO_DT: f64 = 0.002;
/// Default linear speed limit, m/s.
pub const DEFAULT_LINEAR_LIMIT: f64 = 0.25;
/// Default angular speed limit, rad/s.
pub const DEFAULT_ANGULAR_LIMIT: f64 = 1.0;
/// Gripper actuation delay, seconds.
pub const GRIPPER_DELAY: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ArmError {
    #[error("safety stop: target enters the safety zone outside the approach cone")]
    SafetyStop,
    #[error("non-finite target pose")]
    BadTarget,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GripperState {
    Open,
    Closed,
}

/// TCP kinematic state plus actuation limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcpState {
    pub pose: Pose,
    pub linear_limit: f64,
    pub angular_limit: f64,
    pub gripper: GripperState,
}

impl TcpState {
    pub fn new(pose: Pose) -> TcpState {
        TcpState {
            pose,
            linear_limit: DEFAULT_LINEAR_LIMIT,
            angular_limit: DEFAULT_ANGULAR_LIMIT,
            gripper: GripperState::Closed,
        }
    }
}

/// Hand-anchored exclusion sphere with an exemption cone along the approach
/// axis. Positions inside the sphere are forbidden unless they sit within
/// the cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyZone {
    pub center: Vec3,
    pub radius: f64,
    pub cone_axis: Vec3,
    pub cone_half_angle: f64,
}

impl SafetyZone {
    pub fn new(center: Vec3, cone_axis: Vec3) -> SafetyZone {
        SafetyZone {
            center,
            radius: 0.05,
            cone_axis,
            cone_half_angle: 15.0_f64.to_radians(),
        }
    }

    pub fn violates(&self, position: Vec3) -> bool {
        let rel = position - self.center;
        let dist = rel.norm();
        if dist >= self.radius {
            return false;
        }
        match rel.normalized(1e-12) {
            Some(dir) => {
                let axis = match self.cone_axis.normalized(1e-12) {
                    Some(a) => a,
                    None => return true,
                };
                let angle = dir.dot(axis).clamp(-1.0, 1.0).acos();
                angle > self.cone_half_angle
            }
            // Exactly at the center: no direction, always a violation.
            None => true,
        }
    }
}

/// Move one step toward `target`: straight-line translation and shortest-arc
/// rotation, each clamped to its speed limit. Arrives exactly when within one
/// step's reach. Errors if the step or target violates the safety zone.
pub fn servo_to(
    state: &TcpState,
    target: &Pose,
    zone: Option<&SafetyZone>,
    dt: f64,
) -> Result<TcpState, ArmError> {
    if !target.is_finite() {
        return Err(ArmError::BadTarget);
    }
    if let Some(zone) = zone {
        if zone.violates(target.position) {
            return Err(ArmError::SafetyStop);
        }
    }
    let delta = target.position - state.pose.position;
    let dist = delta.norm();
    let max_step = state.linear_limit * dt;
    let position = if dist <= max_step {
        target.position
    } else {
        state.pose.position + delta * (max_step / dist)
    };
    if let Some(zone) = zone {
        if zone.violates(position) {
            return Err(ArmError::SafetyStop);
        }
    }
    let orientation = state
        .pose
        .orientation
        .rotate_toward(&target.orientation, state.angular_limit * dt);
    Ok(TcpState {
        pose: Pose {
            position,
            orientation,
        },
        ..*state
    })
}

/// A command consumed by the servo loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmCommand {
    pub id: u64,
    pub target: Pose,
    pub gripper: Option<GripperState>,
    /// Clears a latched safety stop.
    pub reset_safety: bool,
}

impl ArmCommand {
    pub fn move_to(id: u64, target: Pose) -> ArmCommand {
        ArmCommand {
            id,
            target,
            gripper: None,
            reset_safety: false,
        }
    }
}

/// One per-tick trace record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub tick: u64,
    pub time: f64,
    pub pose: Pose,
    pub gripper: GripperState,
    pub command_id: u64,
    pub safety_stopped: bool,
}

/// Loop status included in state reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServoStatus {
    Ok,
    SafetyStopped,
}

/// The servo loop owns the TCP state exclusively; commands arrive through a
/// latest-value mailbox and the trace is appended per tick.
#[derive(Debug)]
pub struct ServoLoop {
    state: TcpState,
    zone: Option<SafetyZone>,
    mailbox: Mailbox<ArmCommand>,
    zone_mailbox: Mailbox<Option<SafetyZone>>,
    active: Option<ArmCommand>,
    pending_gripper: Option<(GripperState, f64)>,
    safety_latched: bool,
    tick: u64,
    trace: Vec<TraceEntry>,
}

impl ServoLoop {
    pub fn new(initial: TcpState) -> ServoLoop {
        ServoLoop {
            state: initial,
            zone: None,
            mailbox: Mailbox::new(),
            zone_mailbox: Mailbox::new(),
            active: None,
            pending_gripper: None,
            safety_latched: false,
            tick: 0,
            trace: Vec::new(),
        }
    }

    /// Command mailbox handle for producers.
    pub fn commands(&self) -> Mailbox<ArmCommand> {
        self.mailbox.clone()
    }

    /// Safety-zone mailbox handle; `None` disables the zone.
    pub fn zone_updates(&self) -> Mailbox<Option<SafetyZone>> {
        self.zone_mailbox.clone()
    }

    pub fn state(&self) -> &TcpState {
        &self.state
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<TraceEntry> {
        std::mem::take(&mut self.trace)
    }

    pub fn safety_stopped(&self) -> bool {
        self.safety_latched
    }

    pub fn status(&self) -> ServoStatus {
        if self.safety_latched {
            ServoStatus::SafetyStopped
        } else {
            ServoStatus::Ok
        }
    }

    /// Run one tick at time `now`: track the active target, actuate the
    /// gripper after its delay, record the trace, then poll mailboxes so new
    /// input takes effect next tick.
    pub fn step(&mut self, now: f64, dt: f64) -> TraceEntry {
        if let Some((target, ready_at)) = self.pending_gripper {
            if now >= ready_at {
                self.state.gripper = target;
                self.pending_gripper = None;
            }
        }

        if let Some(cmd) = self.active {
            if !self.safety_latched {
                match servo_to(&self.state, &cmd.target, self.zone.as_ref(), dt) {
                    Ok(next) => self.state = next,
                    Err(ArmError::SafetyStop) => self.safety_latched = true,
                    Err(_) => {}
                }
            }
        }

        let entry = TraceEntry {
            tick: self.tick,
            time: now + dt,
            pose: self.state.pose,
            gripper: self.state.gripper,
            command_id: self.active.map(|c| c.id).unwrap_or(0),
            safety_stopped: self.safety_latched,
        };
        self.trace.push(entry);
        self.tick += 1;

        if let Some(zone) = self.zone_mailbox.take() {
            self.zone = zone;
        }
        if let Some(cmd) = self.mailbox.take() {
            if cmd.reset_safety {
                self.safety_latched = false;
            }
            if let Some(action) = cmd.gripper {
                self.request_gripper(action, now + dt);
            }
            self.active = Some(cmd);
        }
        entry
    }

    /// Open-loop gripper actuation: the state flips after a fixed delay.
    /// Repeating the current (or already pending) action is a no-op, and a
    /// release is honored even while safety-stopped.
    fn request_gripper(&mut self, action: GripperState, now: f64) {
        if self.state.gripper == action {
            if matches!(self.pending_gripper, Some((pending, _)) if pending != action) {
                self.pending_gripper = None;
            }
            return;
        }
        if matches!(self.pending_gripper, Some((pending, _)) if pending == action) {
            return;
        }
        self.pending_gripper = Some((action, now + GRIPPER_DELAY));
    }
}

/// Drive a servo loop from a tick source until it is exhausted. With a
/// simulated clock the run is bit-reproducible; with a wall clock missed
/// ticks are skipped, never double-stepped.
pub fn run_servo_loop(
    servo: &mut ServoLoop,
    clock: &mut dyn TickSource,
    dt: f64,
) -> Vec<TraceEntry> {
    while let Some(now) = clock.next_tick() {
        servo.step(now, dt);
    }
    servo.take_trace()
}

/// Write a trace as CSV: tick, time, position, axis-angle, gripper, command.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[TraceEntry]) -> Result<(), ArmError> {
    writeln!(w, "tick,time,x,y,z,rx,ry,rz,gripper,command_id")?;
    for e in trace {
        let rv = e.pose.orientation.to_rotation_vector();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            e.tick,
            e.time,
            e.pose.position.x,
            e.pose.position.y,
            e.pose.position.z,
            rv.x,
            rv.y,
            rv.z,
            if e.gripper == GripperState::Open {
                "open"
            } else {
                "closed"
            },
            e.command_id,
        )?;
    }
    Ok(())
}

pub fn save_trace_csv(path: &Path, trace: &[TraceEntry]) -> Result<(), ArmError> {
    let file = std::fs::File::create(path)?;
    write_trace_csv(std::io::BufWriter::new(file), trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::SimClock;
    use crate::geom::Quat;
    use proptest::prelude::*;

    fn state_at(position: Vec3) -> TcpState {
        TcpState::new(Pose::new(position, Quat::IDENTITY))
    }

    #[test]
    fn servo_to_fixed_point() {
        let state = state_at(Vec3::new(0.1, 0.2, 0.3));
        let next = servo_to(&state, &state.pose, None, SERVO_DT).unwrap();
        assert_eq!(next.pose, state.pose);
    }

    #[test]
    fn servo_to_clamped_step_is_half_millimeter() {
        let state = state_at(Vec3::ZERO);
        let target = Pose::new(Vec3::new(1.0, 0.0, 0.0), Quat::IDENTITY);
        let next = servo_to(&state, &target, None, SERVO_DT).unwrap();
        assert!((next.pose.position.x - 0.0005).abs() < 1e-15);
        assert_eq!(next.pose.position.y, 0.0);
    }

    #[test]
    fn servo_to_snaps_when_within_reach() {
        let state = state_at(Vec3::ZERO);
        let target = Pose::new(Vec3::new(0.0001, 0.0, 0.0), Quat::IDENTITY);
        let next = servo_to(&state, &target, None, SERVO_DT).unwrap();
        assert_eq!(next.pose.position, target.position);
    }

    #[test]
    fn servo_to_safety_stop_outside_cone() {
        let state = state_at(Vec3::ZERO);
        let zone = SafetyZone::new(Vec3::new(0.0, 0.1, 0.0), Vec3::Y);
        // Target inside the sphere but off-axis: forbidden.
        let bad = Pose::new(Vec3::new(0.03, 0.1, 0.0), Quat::IDENTITY);
        assert!(matches!(
            servo_to(&state, &bad, Some(&zone), SERVO_DT),
            Err(ArmError::SafetyStop)
        ));
        // Target inside the sphere along the cone axis: allowed.
        let ok = Pose::new(Vec3::new(0.0, 0.14, 0.0), Quat::IDENTITY);
        assert!(servo_to(&state, &ok, Some(&zone), SERVO_DT).is_ok());
    }

    #[test]
    fn one_second_run_has_exactly_500_ticks() {
        let mut servo = ServoLoop::new(state_at(Vec3::ZERO));
        let mut clock = SimClock::new(SERVO_DT, 1.0);
        let trace = run_servo_loop(&mut servo, &mut clock, SERVO_DT);
        assert_eq!(trace.len(), 500);
    }

    #[test]
    fn no_commands_means_constant_pose() {
        let start = Vec3::new(0.4, -0.1, 0.3);
        let mut servo = ServoLoop::new(state_at(start));
        let mut clock = SimClock::new(SERVO_DT, 0.5);
        let trace = run_servo_loop(&mut servo, &mut clock, SERVO_DT);
        assert!(trace.iter().all(|e| e.pose.position == start));
        assert!(trace.iter().all(|e| e.command_id == 0));
    }

    #[test]
    fn command_at_tick_100_moves_pose_at_tick_101() {
        let mut servo = ServoLoop::new(state_at(Vec3::ZERO));
        let commands = servo.commands();
        let target = Pose::new(Vec3::new(0.1, 0.0, 0.0), Quat::IDENTITY);
        for tick in 0..200u64 {
            let now = tick as f64 * SERVO_DT;
            if tick == 100 {
                commands.post(ArmCommand::move_to(1, target));
            }
            servo.step(now, SERVO_DT);
        }
        let trace = servo.trace();
        assert_eq!(trace[100].pose.position, Vec3::ZERO);
        assert_eq!(trace[100].command_id, 0);
        assert!(trace[101].pose.position.x > 0.0);
        assert_eq!(trace[101].command_id, 1);
    }

    #[test]
    fn identical_command_streams_are_bit_identical() {
        let run = || {
            let mut servo = ServoLoop::new(state_at(Vec3::ZERO));
            let commands = servo.commands();
            for tick in 0..750u64 {
                let now = tick as f64 * SERVO_DT;
                if tick == 10 {
                    commands.post(ArmCommand::move_to(
                        1,
                        Pose::new(
                            Vec3::new(0.05, -0.02, 0.01),
                            Quat::from_axis_angle(Vec3::Z, 0.4),
                        ),
                    ));
                }
                if tick == 300 {
                    commands.post(ArmCommand::move_to(
                        2,
                        Pose::new(Vec3::new(-0.03, 0.04, 0.0), Quat::IDENTITY),
                    ));
                }
                servo.step(now, SERVO_DT);
            }
            servo.take_trace()
        };
        let a = run();
        let b = run();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.pose.position.x.to_bits(), y.pose.position.x.to_bits());
            assert_eq!(
                x.pose.orientation.w.to_bits(),
                y.pose.orientation.w.to_bits()
            );
            assert_eq!(x.command_id, y.command_id);
        }
    }

    #[test]
    fn per_tick_speed_never_exceeds_limits() {
        let mut servo = ServoLoop::new(state_at(Vec3::ZERO));
        let commands = servo.commands();
        commands.post(ArmCommand::move_to(
            1,
            Pose::new(
                Vec3::new(0.5, 0.5, -0.5),
                Quat::from_axis_angle(Vec3::new(1.0, 1.0, 0.0), 3.0),
            ),
        ));
        let mut clock = SimClock::new(SERVO_DT, 2.0);
        let trace = run_servo_loop(&mut servo, &mut clock, SERVO_DT);
        for pair in trace.windows(2) {
            let dp = (pair[1].pose.position - pair[0].pose.position).norm() / SERVO_DT;
            assert!(dp <= DEFAULT_LINEAR_LIMIT + 1e-12, "linear speed {dp}");
            let da = pair[0].pose.orientation.angle_to(&pair[1].pose.orientation) / SERVO_DT;
            assert!(da <= DEFAULT_ANGULAR_LIMIT + 1e-9, "angular speed {da}");
        }
    }

    #[test]
    fn quaternion_norm_drift_stays_tiny_over_a_million_ticks() {
        let mut state = state_at(Vec3::ZERO);
        let target = Pose::new(
            Vec3::new(10.0, -10.0, 5.0),
            Quat::from_axis_angle(Vec3::new(0.2, 1.0, -0.4), 3.1),
        );
        for _ in 0..1_000_000 {
            state = servo_to(&state, &target, None, SERVO_DT).unwrap();
            // Keep rotating: bounce between two far orientations.
            if state.pose.orientation.angle_to(&target.orientation) < 1e-6 {
                state.pose.orientation = Quat::IDENTITY;
            }
        }
        assert!((state.pose.orientation.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gripper_actuates_after_delay_and_is_idempotent() {
        let mut servo = ServoLoop::new(state_at(Vec3::ZERO));
        let commands = servo.commands();
        let mut opened_at = None;
        for tick in 0..600u64 {
            let now = tick as f64 * SERVO_DT;
            if tick == 0 {
                let mut cmd = ArmCommand::move_to(1, Pose::IDENTITY);
                cmd.gripper = Some(GripperState::Open);
                commands.post(cmd);
            }
            if tick == 50 {
                // Repeat same action: must not extend the delay.
                let mut cmd = ArmCommand::move_to(2, Pose::IDENTITY);
                cmd.gripper = Some(GripperState::Open);
                commands.post(cmd);
            }
            let entry = servo.step(now, SERVO_DT);
            if entry.gripper == GripperState::Open && opened_at.is_none() {
                opened_at = Some(entry.time);
            }
        }
        let t = opened_at.expect("gripper opened");
        // Command picked up at the end of tick 0 (t = dt), actuates 0.5 s on.
        assert!(
            (t - (SERVO_DT + GRIPPER_DELAY)).abs() <= 2.0 * SERVO_DT,
            "opened at {t}"
        );

        // (closed, close) is a no-op.
        let mut servo2 = ServoLoop::new(state_at(Vec3::ZERO));
        let commands2 = servo2.commands();
        let mut cmd = ArmCommand::move_to(1, Pose::IDENTITY);
        cmd.gripper = Some(GripperState::Closed);
        commands2.post(cmd);
        for tick in 0..400u64 {
            servo2.step(tick as f64 * SERVO_DT, SERVO_DT);
        }
        assert_eq!(servo2.state().gripper, GripperState::Closed);
    }

    #[test]
    fn safety_stop_latches_until_reset_and_release_is_honored() {
        let mut servo = ServoLoop::new(state_at(Vec3::ZERO));
        let commands = servo.commands();
        let zones = servo.zone_updates();
        zones.post(Some(SafetyZone::new(Vec3::new(0.0, 0.05, 0.0), Vec3::Y)));
        // Drive straight at the zone center, off-cone.
        commands.post(ArmCommand::move_to(
            1,
            Pose::new(Vec3::new(0.0, 0.05, 0.0), Quat::IDENTITY),
        ));
        for tick in 0..200u64 {
            servo.step(tick as f64 * SERVO_DT, SERVO_DT);
        }
        assert!(servo.safety_stopped());
        let frozen = servo.state().pose.position;

        // Ordinary motion commands are ignored while latched.
        commands.post(ArmCommand::move_to(
            2,
            Pose::new(Vec3::new(-0.1, 0.0, 0.0), Quat::IDENTITY),
        ));
        for tick in 200..260u64 {
            servo.step(tick as f64 * SERVO_DT, SERVO_DT);
        }
        assert_eq!(servo.state().pose.position, frozen);

        // A release is still honored.
        let mut open = ArmCommand::move_to(3, Pose::new(frozen, Quat::IDENTITY));
        open.gripper = Some(GripperState::Open);
        commands.post(open);
        for tick in 260..600u64 {
            servo.step(tick as f64 * SERVO_DT, SERVO_DT);
        }
        assert_eq!(servo.state().gripper, GripperState::Open);
        assert!(servo.safety_stopped());

        // Reset unlatches.
        let mut reset =
            ArmCommand::move_to(4, Pose::new(Vec3::new(-0.1, 0.0, 0.0), Quat::IDENTITY));
        reset.reset_safety = true;
        commands.post(reset);
        for tick in 600..700u64 {
            servo.step(tick as f64 * SERVO_DT, SERVO_DT);
        }
        assert!(!servo.safety_stopped());
        assert!(servo.state().pose.position.x < 0.0);
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let mut servo = ServoLoop::new(state_at(Vec3::ZERO));
        let mut clock = SimClock::new(SERVO_DT, 0.01);
        let trace = run_servo_loop(&mut servo, &mut clock, SERVO_DT);
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("tick,time,x,y,z,rx,ry,rz,gripper,command_id")
        );
        assert_eq!(lines.count(), 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn random_targets_respect_limits(
            tx in -0.5f64..0.5, ty in -0.5f64..0.5, tz in -0.5f64..0.5,
            angle in 0.0f64..3.0,
        ) {
            let mut state = state_at(Vec3::ZERO);
            let target = Pose::new(
                Vec3::new(tx, ty, tz),
                Quat::from_axis_angle(Vec3::new(0.3, -1.0, 0.2), angle),
            );
            for _ in 0..50 {
                let before = state.pose;
                state = servo_to(&state, &target, None, SERVO_DT).unwrap();
                let speed = (state.pose.position - before.position).norm() / SERVO_DT;
                prop_assert!(speed <= DEFAULT_LINEAR_LIMIT + 1e-12);
                let rate = before.orientation.angle_to(&state.pose.orientation) / SERVO_DT;
                prop_assert!(rate <= DEFAULT_ANGULAR_LIMIT + 1e-9);
            }
        }
    }
}
