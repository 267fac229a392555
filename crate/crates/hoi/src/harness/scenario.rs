//! Scenario scripts and the simulated-clock pipeline runner.
//!
//! A scenario drives three contexts on one deterministic timeline:
//!
//! * a 30 Hz pose producer replaying scripted hand behavior through the
//!   smoother and onto the pose link,
//! * the recognition/control context (window assembly, classification, the
//!   stability gate, the mode machine, and the cooperation controller),
//! * the 500 Hz servo loop consuming the latest command.
//!
//! All three communicate over loopback wire sessions. Events interleave by
//! timestamp (servo first on ties), so runs are bit-reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::align::{
    measure_alignment, target_orientation, ApproachPolicy, CoopPhase, CooperationController,
    ObjectFrame,
};
use crate::arm::{ArmCommand, GripperState, SafetyZone, ServoLoop, TcpState, TraceEntry, SERVO_DT};
use crate::dataset::{gesture_joints, MotionClass};
use crate::fsm::{default_bindings, step_fsm, ControllerMode};
use crate::geom::{Pose, Quat, Vec3};
use crate::harness::metrics::{
    compute_metrics, CommandKind, CommandRecord, CoopPhaseTag, HandTraceRow, MetricsReport,
    TcpTraceRow, Thresholds,
};
use crate::harness::HarnessError;
use crate::mpm::{MpmNetwork, StabilityGate};
use crate::pose::{
    hand_frame, HandPose, StreamSmoother, WindowBuffer, INDEX_DIP, INDEX_MCP, INDEX_PIP, INDEX_TIP,
    JOINT_COUNT, MIDDLE_MCP, WRIST,
};
use crate::wire::{
    ConsumerSession, LoopbackTransport, MessageKind, ProducerSession, WireMessage, GRIP_CLOSE,
    GRIP_HOLD, GRIP_OPEN,
};

/// One scripted stretch of hand behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Segment {
    /// Hold a gesture for a duration.
    Gesture { class: MotionClass, seconds: f64 },
    /// Pointing pose with a bend-then-lift disturbance profile.
    Cooperate {
        seconds: f64,
        lift_mm: f64,
        bend_deg: f64,
    },
}

impl Segment {
    pub fn seconds(&self) -> f64 {
        match self {
            Segment::Gesture { seconds, .. } | Segment::Cooperate { seconds, .. } => *seconds,
        }
    }

    pub fn scripted_class(&self) -> Option<MotionClass> {
        match self {
            Segment::Gesture { class, .. } => Some(*class),
            Segment::Cooperate { .. } => None,
        }
    }
}

/// Approach-policy numbers in serializable form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub v_h: f64,
    pub v_v: f64,
    pub release_gap_m: f64,
    pub angular_tolerance_rad: f64,
    pub lateral_tolerance_m: f64,
    pub rotation_gain: f64,
    pub rotation_rate_cap_deg_s: f64,
    pub stale_timeout_s: f64,
    pub timeout_s: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        let p = ApproachPolicy::default();
        PolicyConfig {
            v_h: p.v_h,
            v_v: p.v_v,
            release_gap_m: p.release_gap,
            angular_tolerance_rad: p.angular_tolerance,
            lateral_tolerance_m: p.lateral_tolerance,
            rotation_gain: p.rotation_gain,
            rotation_rate_cap_deg_s: p.rotation_rate_cap.to_degrees(),
            stale_timeout_s: p.stale_timeout,
            timeout_s: p.timeout,
        }
    }
}

impl PolicyConfig {
    pub fn to_policy(self) -> ApproachPolicy {
        ApproachPolicy {
            v_h: self.v_h,
            v_v: self.v_v,
            release_gap: self.release_gap_m,
            angular_tolerance: self.angular_tolerance_rad,
            lateral_tolerance: self.lateral_tolerance_m,
            rotation_gain: self.rotation_gain,
            rotation_rate_cap: self.rotation_rate_cap_deg_s.to_radians(),
            stale_timeout: self.stale_timeout_s,
            timeout: self.timeout_s,
        }
    }
}

/// A complete scenario: timeline, pipeline configuration, and pass bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub name: String,
    pub seed: u64,
    pub pose_rate_hz: f64,
    pub smoothing_window: usize,
    /// Stability-gate length for the live pipeline.
    pub gate_len: usize,
    /// In-window stride of the live window assembler.
    pub window_stride: usize,
    /// Jitter sigma applied to scripted poses, meters.
    pub jitter: f64,
    /// Sensor-frame to robot-frame translation.
    pub calibration_offset: [f64; 3],
    pub initial_tcp_position: [f64; 3],
    /// Axis-angle initial TCP orientation.
    pub initial_tcp_rotation: [f64; 3],
    /// Time at which the pre-programmed pick closes the gripper.
    pub pick_close_at: Option<f64>,
    pub segments: Vec<Segment>,
    pub policy: PolicyConfig,
    pub thresholds: Thresholds,
    /// Extra runtime allowed past the scripted end.
    pub grace_seconds: f64,
    /// Dwell after release before the run stops.
    pub post_release_seconds: f64,
}

impl ScenarioScript {
    pub fn total_seconds(&self) -> f64 {
        self.segments.iter().map(Segment::seconds).sum()
    }

    /// Segment index and local time at `now`; clamps to the last segment.
    fn segment_at(&self, now: f64) -> Option<(usize, &Segment, f64)> {
        let mut start = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let end = start + seg.seconds();
            if now < end || i + 1 == self.segments.len() {
                return Some((i, seg, now - start));
            }
            start = end;
        }
        None
    }

    /// Most recent segment at or before `now` whose scripted class matches.
    fn provenance_segment(&self, class: MotionClass, now: f64, current: usize) -> usize {
        let mut start = 0.0;
        let mut found = None;
        for (i, seg) in self.segments.iter().enumerate() {
            if start > now {
                break;
            }
            if seg.scripted_class() == Some(class) {
                found = Some(i);
            }
            start += seg.seconds();
        }
        found.unwrap_or(current)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), HarnessError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<ScenarioScript, HarnessError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// The default tele-interaction + ring-wearing timeline: pick, a pair of
    /// come/back adjustments, another approach, the ring trigger, then
    /// closed-loop cooperation to release.
    pub fn ring_default(seed: u64) -> ScenarioScript {
        let calibration = Vec3::new(0.0, 0.55, 0.30);
        let (fingertip, finger_axis) = neutral_pointing_geometry(calibration);
        let aligned = pointing_target_orientation();
        // Start slightly misaligned and short of the hand; teleop closes
        // most of the range before the ring trigger.
        let initial_orientation =
            Quat::from_axis_angle(Vec3::Z, 8.0_f64.to_radians()).mul(&aligned);
        let initial_position = fingertip + finger_axis * 0.06 + Vec3::new(0.0, -0.16, 0.0);
        ScenarioScript {
            name: "ring".into(),
            seed,
            pose_rate_hz: 30.0,
            smoothing_window: 2,
            gate_len: 4,
            window_stride: 1,
            jitter: 0.001,
            calibration_offset: [calibration.x, calibration.y, calibration.z],
            initial_tcp_position: [initial_position.x, initial_position.y, initial_position.z],
            initial_tcp_rotation: vec3_arr(initial_orientation.to_rotation_vector()),
            pick_close_at: Some(0.2),
            segments: vec![
                Segment::Gesture {
                    class: MotionClass::Keep,
                    seconds: 2.0,
                },
                Segment::Gesture {
                    class: MotionClass::Come,
                    seconds: 0.8,
                },
                Segment::Gesture {
                    class: MotionClass::Keep,
                    seconds: 1.0,
                },
                Segment::Gesture {
                    class: MotionClass::Back,
                    seconds: 0.8,
                },
                Segment::Gesture {
                    class: MotionClass::Keep,
                    seconds: 1.0,
                },
                Segment::Gesture {
                    class: MotionClass::Come,
                    seconds: 0.8,
                },
                Segment::Gesture {
                    class: MotionClass::Keep,
                    seconds: 1.0,
                },
                Segment::Gesture {
                    class: MotionClass::Ring,
                    seconds: 1.2,
                },
                Segment::Cooperate {
                    seconds: 22.0,
                    lift_mm: 0.0,
                    bend_deg: 0.0,
                },
            ],
            policy: PolicyConfig::default(),
            thresholds: Thresholds::default(),
            grace_seconds: 5.0,
            post_release_seconds: 1.2,
        }
    }

    /// Disturbance-rejection scenario: enter cooperation immediately, then
    /// bend the finger 18 degrees and lift 74.23 mm over 30 seconds while
    /// the approach runs from far away.
    pub fn disturbance_default(seed: u64) -> ScenarioScript {
        let calibration = Vec3::new(0.0, 0.55, 0.30);
        let (fingertip, finger_axis) = neutral_pointing_geometry(calibration);
        let initial_position = fingertip + finger_axis * 0.35;
        ScenarioScript {
            name: "disturbance".into(),
            seed,
            pose_rate_hz: 30.0,
            smoothing_window: 2,
            gate_len: 4,
            window_stride: 1,
            jitter: 0.0005,
            calibration_offset: [calibration.x, calibration.y, calibration.z],
            initial_tcp_position: [initial_position.x, initial_position.y, initial_position.z],
            initial_tcp_rotation: vec3_arr(pointing_target_orientation().to_rotation_vector()),
            pick_close_at: Some(0.2),
            segments: vec![
                Segment::Gesture {
                    class: MotionClass::Keep,
                    seconds: 1.5,
                },
                Segment::Gesture {
                    class: MotionClass::Ring,
                    seconds: 1.2,
                },
                Segment::Cooperate {
                    seconds: 30.0,
                    lift_mm: 74.23,
                    bend_deg: 18.0,
                },
            ],
            policy: PolicyConfig::default(),
            thresholds: Thresholds {
                require_release: false,
                ..Default::default()
            },
            grace_seconds: 2.0,
            post_release_seconds: 1.2,
        }
    }
}

fn vec3_arr(v: Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn arr_vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Fingertip position and pointing axis of the neutral pointing pose in the
/// robot frame.
fn neutral_pointing_geometry(calibration: Vec3) -> (Vec3, Vec3) {
    let joints = gesture_joints(MotionClass::Ring, 0.0);
    let pose = HandPose::new(0.0, joints).expect("neutral pose is finite");
    let frame = hand_frame(&pose).expect("neutral pose is non-degenerate");
    (frame.origin + calibration, frame.y_axis())
}

fn pointing_target_orientation() -> Quat {
    let joints = gesture_joints(MotionClass::Ring, 0.0);
    let pose = HandPose::new(0.0, joints).expect("neutral pose is finite");
    let frame = hand_frame(&pose).expect("neutral pose is non-degenerate");
    target_orientation(&frame)
}

fn smoothstep(t: f64, start: f64, end: f64) -> f64 {
    if t <= start {
        0.0
    } else if t >= end {
        1.0
    } else {
        let s = (t - start) / (end - start);
        0.5 - 0.5 * (std::f64::consts::PI * s).cos()
    }
}

/// Noise-free scripted joints for one segment at local time `t`.
fn scripted_joints(segment: &Segment, t: f64) -> [Vec3; JOINT_COUNT] {
    match segment {
        Segment::Gesture { class, .. } => gesture_joints(*class, t),
        Segment::Cooperate {
            seconds,
            lift_mm,
            bend_deg,
        } => {
            let mut joints = gesture_joints(MotionClass::Ring, t);
            // Bend first, then lift.
            let bend = bend_deg.to_radians() * smoothstep(t, 0.10 * seconds, 0.45 * seconds);
            if bend != 0.0 {
                let pivot = joints[INDEX_MCP];
                let q = Quat::from_axis_angle(Vec3::X, bend);
                for idx in [INDEX_PIP, INDEX_DIP, INDEX_TIP] {
                    joints[idx] = pivot + q.rotate(joints[idx] - pivot);
                }
            }
            let lift = lift_mm * 1e-3 * smoothstep(t, 0.55 * seconds, 0.90 * seconds);
            if lift != 0.0 {
                for j in joints.iter_mut() {
                    j.z += lift;
                }
            }
            joints
        }
    }
}

/// Everything a scenario run produces.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub report: MetricsReport,
    pub hand_rows: Vec<HandTraceRow>,
    pub commands: Vec<CommandRecord>,
    pub tcp_rows: Vec<TcpTraceRow>,
    /// The servo ended the run with its safety stop latched.
    pub safety_stopped: bool,
}

pub fn trace_to_rows(trace: &[TraceEntry]) -> Vec<TcpTraceRow> {
    trace
        .iter()
        .map(|e| TcpTraceRow {
            tick: e.tick,
            time: e.time,
            position: e.pose.position,
            rotation: e.pose.orientation.to_rotation_vector(),
            gripper_closed: e.gripper == GripperState::Closed,
            command_id: e.command_id,
        })
        .collect()
}

/// Run a scenario end to end on the simulated clock.
pub fn run_scenario(
    script: &ScenarioScript,
    network: &MpmNetwork,
) -> Result<ScenarioOutcome, HarnessError> {
    if script.pose_rate_hz <= 0.0 {
        return Err(HarnessError::Config("pose rate must be positive".into()));
    }
    if script.segments.is_empty() {
        let report = compute_metrics(
            &script.name,
            &script.thresholds,
            script.gate_len,
            script.pose_rate_hz,
            &[],
            &[],
            &[],
        );
        return Ok(ScenarioOutcome {
            report,
            hand_rows: vec![],
            commands: vec![],
            tcp_rows: vec![],
            safety_stopped: false,
        });
    }

    let pose_period = 1.0 / script.pose_rate_hz;
    let calibration = arr_vec3(script.calibration_offset);
    let policy = script.policy.to_policy();

    // Perception side.
    let mut smoother = StreamSmoother::new(script.smoothing_window)?;
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(script.seed);
    let noise = if script.jitter > 0.0 {
        Some(Normal::new(0.0, script.jitter).map_err(|e| HarnessError::Config(e.to_string()))?)
    } else {
        None
    };

    // Control side.
    let mut window_buffer = WindowBuffer::new(script.window_stride);
    let mut gate = StabilityGate::new(script.gate_len);
    let registry = default_bindings();
    let mut mode = ControllerMode::Teleop;
    let mut coop: Option<CooperationController> = None;
    let mut ring_segment = 0usize;
    let mut commanded_target: Option<Pose> = None;
    let mut reported: Option<(Pose, bool)> = None;
    let mut released_at: Option<f64> = None;
    let mut pick_issued = false;

    // Servo side.
    let initial_pose = Pose::new(
        arr_vec3(script.initial_tcp_position),
        Quat::from_rotation_vector(arr_vec3(script.initial_tcp_rotation)),
    );
    let mut servo = ServoLoop::new(TcpState {
        gripper: GripperState::Open,
        ..TcpState::new(initial_pose)
    });
    let servo_commands = servo.commands();
    let zone_updates = servo.zone_updates();

    // Wire links: pose producer -> control, control -> servo, servo -> control.
    let (pose_tx, pose_rx) = LoopbackTransport::pair();
    let mut pose_producer = ProducerSession::new(pose_tx);
    let mut pose_consumer = ConsumerSession::new(pose_rx);
    let (cmd_tx, cmd_rx) = LoopbackTransport::pair();
    let mut cmd_producer = ProducerSession::new(cmd_tx);
    let mut cmd_consumer = ConsumerSession::new(cmd_rx);
    let (report_tx, report_rx) = LoopbackTransport::pair();
    let mut report_producer = ProducerSession::new(report_tx);
    let mut report_consumer = ConsumerSession::new(report_rx);

    let mut hand_rows: Vec<HandTraceRow> = Vec::new();
    let mut commands: Vec<CommandRecord> = Vec::new();

    let script_end = script.total_seconds();
    let hard_end = script_end + script.grace_seconds;
    let mut pose_n: u64 = 0;
    let mut servo_k: u64 = 0;

    loop {
        let end = match released_at {
            Some(t) => hard_end.min(t + script.post_release_seconds),
            None => hard_end,
        };
        let t_pose = pose_n as f64 / script.pose_rate_hz;
        let t_servo = servo_k as f64 * SERVO_DT;
        if t_pose > end && t_servo > end {
            break;
        }

        if t_servo <= t_pose {
            // Servo tick: deliver pending commands first; they become active
            // at the end of the step and move the arm next tick.
            let _ = cmd_consumer.pump(t_servo);
            if let Some(msg) = cmd_consumer.take_latest(MessageKind::ServoCommand) {
                if let (Some(target), crate::wire::WirePayload::ServoCommand { gripper, .. }) =
                    (msg.to_pose(), &msg.payload)
                {
                    let gripper = match *gripper {
                        GRIP_OPEN => Some(GripperState::Open),
                        GRIP_CLOSE => Some(GripperState::Closed),
                        _ => None,
                    };
                    servo_commands.post(ArmCommand {
                        id: msg.timestamp_us,
                        target,
                        gripper,
                        reset_safety: false,
                    });
                }
            }
            let entry = servo.step(t_servo, SERVO_DT);
            report_producer.send(&WireMessage::state_report(
                crate::wire::seconds_to_us(t_servo),
                &entry.pose,
                entry.gripper == GripperState::Closed,
                entry.safety_stopped as u8,
            ))?;
            servo_k += 1;
            continue;
        }

        // Pose step.
        let now = t_pose;
        let (segment_idx, segment, t_local) = script
            .segment_at(now.min(script_end - 1e-9))
            .expect("non-empty script");
        let mut joints = scripted_joints(segment, t_local);
        if let Some(n) = &noise {
            for j in joints.iter_mut() {
                *j = *j
                    + Vec3::new(
                        n.sample(&mut jitter_rng),
                        n.sample(&mut jitter_rng),
                        n.sample(&mut jitter_rng),
                    );
            }
        }
        let raw = HandPose::new(now, joints)?;
        let smoothed = smoother.push(&raw)?;
        pose_producer.send(&WireMessage::pose_sample(&smoothed))?;

        // Control context: consume the latest pose and servo feedback.
        let _ = pose_consumer.pump(now);
        let _ = report_consumer.pump(now);
        if let Some(msg) = report_consumer.take_latest(MessageKind::StateReport) {
            if let (Some(pose), crate::wire::WirePayload::StateReport { gripper, .. }) =
                (msg.to_pose(), &msg.payload)
            {
                reported = Some((pose, *gripper == 1));
            }
        }
        let received = match pose_consumer.take_latest(MessageKind::PoseSample) {
            Some(msg) => msg
                .to_hand_pose()
                .ok_or_else(|| HarnessError::Trace("pose sample failed to convert".into()))?,
            None => {
                pose_n += 1;
                continue;
            }
        };
        let world = world_pose(&received, calibration);
        let world_frame = hand_frame(&world).ok();

        // Keep the safety zone anchored to the palm, cone along the finger.
        if let Some(frame) = &world_frame {
            let palm = (world.joints[WRIST] + world.joints[MIDDLE_MCP]) * 0.5;
            zone_updates.post(Some(SafetyZone::new(palm, frame.y_axis())));
        }

        let mut issued_this_step = false;
        let issue = |target: Pose,
                     gripper: u8,
                     kind: CommandKind,
                     segment: usize,
                     issued: &mut bool,
                     commands: &mut Vec<CommandRecord>,
                     cmd_producer: &mut ProducerSession<LoopbackTransport>|
         -> Result<(), HarnessError> {
            if *issued {
                return Ok(());
            }
            let timestamp_us = crate::wire::seconds_to_us(now);
            cmd_producer.send(&WireMessage::servo_command(timestamp_us, &target, gripper))?;
            commands.push(CommandRecord {
                id: timestamp_us,
                issue_time: now,
                segment,
                kind,
                target_position: target.position,
                target_rotation: target.orientation.to_rotation_vector(),
                gripper,
            });
            *issued = true;
            Ok(())
        };

        // Pre-programmed pick: close the gripper in place.
        if let Some(close_at) = script.pick_close_at {
            if !pick_issued && now >= close_at {
                let hold = reported.map(|(p, _)| p).unwrap_or(initial_pose);
                issue(
                    hold,
                    GRIP_CLOSE,
                    CommandKind::Pick,
                    segment_idx,
                    &mut issued_this_step,
                    &mut commands,
                    &mut cmd_producer,
                )?;
                commanded_target = Some(hold);
                pick_issued = true;
            }
        }

        // Classification.
        let decision = match window_buffer.push(received.clone()) {
            Some(window) => Some(network.decide(&window)?),
            None => None,
        };
        let confirmed = decision.and_then(|d| gate.push(d));
        if let Some(code) = confirmed {
            cmd_producer.send(&WireMessage::gate_decision(
                crate::wire::seconds_to_us(now),
                code,
            ))?;
        }

        // Mode machine.
        let mut coop_phase_tag: Option<CoopPhaseTag> = None;
        let mut tracking_loss = false;
        let mut alignment = None;

        if mode == ControllerMode::Teleop {
            if let Some(code) = confirmed {
                let class = MotionClass::from_code(code)
                    .ok_or_else(|| HarnessError::Trace(format!("bad class code {code}")))?;
                let (next_mode, action) = step_fsm(mode, Some(class), &registry)?;
                gate.flush();
                if let Some(displacement) = action {
                    if !displacement.is_zero() {
                        let base = commanded_target
                            .or(reported.map(|(p, _)| p))
                            .unwrap_or(initial_pose);
                        let target = Pose {
                            position: base.position + displacement.translation,
                            orientation: Quat::from_rotation_vector(displacement.rotation)
                                .mul(&base.orientation),
                        };
                        issue(
                            target,
                            GRIP_HOLD,
                            CommandKind::Teleop(class),
                            script.provenance_segment(class, now, segment_idx),
                            &mut issued_this_step,
                            &mut commands,
                            &mut cmd_producer,
                        )?;
                        commanded_target = Some(target);
                    }
                }
                if next_mode == ControllerMode::Cooperation {
                    mode = ControllerMode::Cooperation;
                    coop = Some(CooperationController::new(policy));
                    ring_segment = script.provenance_segment(MotionClass::Ring, now, segment_idx);
                }
            }
        }

        if mode == ControllerMode::Cooperation {
            if let (Some(controller), Some((tcp, _))) = (coop.as_mut(), reported) {
                let (cmd, phase) = controller.step(&tcp, Some(&world), now, pose_period);
                tracking_loss = cmd.tracking_loss;
                if !cmd.tracking_loss {
                    issue(
                        cmd.target,
                        if cmd.open_gripper {
                            GRIP_OPEN
                        } else {
                            GRIP_HOLD
                        },
                        CommandKind::Coop,
                        ring_segment,
                        &mut issued_this_step,
                        &mut commands,
                        &mut cmd_producer,
                    )?;
                    commanded_target = Some(cmd.target);
                }
                coop_phase_tag = Some(match phase {
                    CoopPhase::Approaching => CoopPhaseTag::Approaching,
                    CoopPhase::Aligned => CoopPhaseTag::Aligned,
                    CoopPhase::Released => CoopPhaseTag::Released,
                });
                if let Some(frame) = &world_frame {
                    let deviation = measure_alignment(&ObjectFrame::from_tcp(&tcp), frame);
                    alignment = Some((
                        (std::f64::consts::PI - deviation.alpha).to_degrees(),
                        deviation.beta.to_degrees(),
                        deviation.lateral_offset * 1000.0,
                        deviation.axial_gap * 1000.0,
                    ));
                }
                if phase == CoopPhase::Released && released_at.is_none() {
                    mode = ControllerMode::Done;
                    released_at = Some(now);
                }
                if controller.timed_out(now) {
                    // Leave cooperation incomplete; the report flags it.
                    mode = ControllerMode::Done;
                    released_at = Some(now);
                }
            }
        }

        hand_rows.push(HandTraceRow {
            time: now,
            segment: segment_idx,
            scripted_class: segment.scripted_class(),
            fingertip: world.fingertip(),
            finger_axis: world_frame
                .as_ref()
                .map(|f| f.y_axis())
                .unwrap_or(Vec3::ZERO),
            decision,
            confirmed,
            mode,
            coop_phase: coop_phase_tag,
            tracking_loss,
            alignment,
        });
        pose_n += 1;
    }

    let tcp_rows = trace_to_rows(servo.trace());
    let report = compute_metrics(
        &script.name,
        &script.thresholds,
        script.gate_len,
        script.pose_rate_hz,
        &hand_rows,
        &commands,
        &tcp_rows,
    );
    Ok(ScenarioOutcome {
        report,
        hand_rows,
        commands,
        tcp_rows,
        safety_stopped: servo.safety_stopped(),
    })
}

fn world_pose(camera: &HandPose, calibration: Vec3) -> HandPose {
    let mut joints = camera.joints;
    for j in joints.iter_mut() {
        *j = *j + calibration;
    }
    HandPose {
        timestamp: camera.timestamp,
        joints,
    }
}
