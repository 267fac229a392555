//! Closed-loop cooperation controller: frame transformation, angular
//! deviations, and the alignment/approach law that turns live hand frames
//! into TCP setpoints.
//!
//! The object (ring) frame is rigidly attached to the TCP while the gripper
//! is closed: origin at the TCP position, axes equal to the TCP orientation,
//! with x along the ring normal and y along the gripper's central line. The
//! controller drives the ring normal anti-parallel to the fingertip direction
//! (`cos α → −1`) and the gripper line parallel to the hand z-axis
//! (`cos β → 1`) while closing the axial gap at constant speed.

use thiserror::Error;

use crate::geom::{Mat3, Pose, Quat, Vec3};
use crate::pose::{hand_frame, HandFrame, HandPose};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("{0} frame is not orthonormal")]
    NonOrthonormal(&'static str),
}

const INPUT_TOL: f64 = 1e-6;

/// Ring-anchored orthonormal frame (columns x_o, y_o, z_o).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectFrame {
    pub origin: Vec3,
    pub axes: Mat3,
}

impl ObjectFrame {
    pub fn x_axis(&self) -> Vec3 {
        self.axes.col(0)
    }
    pub fn y_axis(&self) -> Vec3 {
        self.axes.col(1)
    }
    pub fn z_axis(&self) -> Vec3 {
        self.axes.col(2)
    }

    /// Rigid attachment to the TCP while the gripper is closed.
    pub fn from_tcp(tcp: &Pose) -> ObjectFrame {
        ObjectFrame {
            origin: tcp.position,
            axes: tcp.orientation.to_rotation_matrix(),
        }
    }
}

/// Rotation matrix mapping the object frame's axes onto the hand frame's
/// axes: `T = A_hand · A_objectᵀ`.
pub fn rotation_between_frames(from: &ObjectFrame, to: &HandFrame) -> Result<Mat3, AlignError> {
    if !from.axes.is_proper_rotation(INPUT_TOL) {
        return Err(AlignError::NonOrthonormal("object"));
    }
    if !to.axes.is_proper_rotation(INPUT_TOL) {
        return Err(AlignError::NonOrthonormal("hand"));
    }
    Ok(to.axes.mul_mat(&from.axes.transpose()))
}

/// `α = arccos⟨x_o, y_h⟩`, `β = arccos⟨y_o, z_h⟩`, inner products clamped
/// to [−1, 1].
pub fn angular_deviations(object: &ObjectFrame, hand: &HandFrame) -> (f64, f64) {
    let alpha = object.x_axis().dot(hand.y_axis()).clamp(-1.0, 1.0).acos();
    let beta = object.y_axis().dot(hand.z_axis()).clamp(-1.0, 1.0).acos();
    (alpha, beta)
}

/// Measured misalignment between ring and finger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentDeviation {
    /// arccos⟨x_o, y_h⟩, radians; aligned at π.
    pub alpha: f64,
    /// arccos⟨y_o, z_h⟩, radians; aligned at 0.
    pub beta: f64,
    /// Offset of the ring center from the finger axis, meters.
    pub lateral_offset: f64,
    /// Signed gap along the fingertip direction, meters.
    pub axial_gap: f64,
}

pub fn measure_alignment(object: &ObjectFrame, hand: &HandFrame) -> AlignmentDeviation {
    let (alpha, beta) = angular_deviations(object, hand);
    let rel = object.origin - hand.origin;
    let axial_gap = rel.dot(hand.y_axis());
    let lateral = rel - hand.y_axis() * axial_gap;
    AlignmentDeviation {
        alpha,
        beta,
        lateral_offset: lateral.norm(),
        axial_gap,
    }
}

/// Approach speeds, tolerances, and timeouts.
#[derive(Debug, Clone, Copy)]
pub struct ApproachPolicy {
    /// Constant approach speed along the finger axis, m/s.
    pub v_h: f64,
    /// Cap on the perpendicular (vertical/lateral) correction speed, m/s.
    pub v_v: f64,
    /// Gap at which the object is released, meters.
    pub release_gap: f64,
    /// Angular alignment tolerance, radians.
    pub angular_tolerance: f64,
    /// Lateral alignment tolerance, meters.
    pub lateral_tolerance: f64,
    /// Proportional gain on the orientation error, 1/s.
    pub rotation_gain: f64,
    /// Angular rate saturation, rad/s.
    pub rotation_rate_cap: f64,
    /// Hand frames older than this are treated as lost, seconds.
    pub stale_timeout: f64,
    /// Cooperation attempts longer than this are flagged, seconds.
    pub timeout: f64,
}

impl Default for ApproachPolicy {
    fn default() -> Self {
        ApproachPolicy {
            v_h: 0.01,
            v_v: 0.05,
            release_gap: 0.002,
            angular_tolerance: 0.026,
            lateral_tolerance: 0.001,
            rotation_gain: 2.0,
            rotation_rate_cap: 30.0_f64.to_radians(),
            stale_timeout: 0.2,
            timeout: 120.0,
        }
    }
}

/// TCP orientation that aligns the ring with the finger: x_o anti-parallel
/// to y_h and y_o along z_h.
pub fn target_orientation(hand: &HandFrame) -> Quat {
    let x_o = -hand.y_axis();
    let y_o = hand.z_axis();
    let z_o = x_o.cross(y_o);
    Quat::from_rotation_matrix(&Mat3::from_cols(x_o, y_o, z_o))
}

/// One-step pose increment toward alignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentCommand {
    /// Translation to apply this step, meters.
    pub translation: Vec3,
    /// Rotation to apply this step, axis-angle vector in radians.
    pub rotation: Vec3,
    /// Gap and angular/lateral errors are all within release tolerances.
    pub release_ready: bool,
}

impl AlignmentCommand {
    pub const HOLD: AlignmentCommand = AlignmentCommand {
        translation: Vec3::ZERO,
        rotation: Vec3::ZERO,
        release_ready: false,
    };
}

/// Compute the increment that (i) pulls the lateral offset to zero at up to
/// `v_v`, (ii) closes the axial gap toward `release_gap` at `v_h`,
/// (iii) rotates toward [`target_orientation`] under proportional control
/// with rate saturation. All increments scale with `dt`.
pub fn alignment_setpoint(
    object: &ObjectFrame,
    hand: &HandFrame,
    policy: &ApproachPolicy,
    dt: f64,
) -> AlignmentCommand {
    assert!(dt > 0.0, "dt must be positive");
    let deviation = measure_alignment(object, hand);

    let rel = object.origin - hand.origin;
    let lateral_vec = rel - hand.y_axis() * deviation.axial_gap;

    // Perpendicular correction, capped at v_v.
    let lateral_step = (policy.v_v * dt).min(deviation.lateral_offset);
    let translation_lat = match lateral_vec.normalized(1e-12) {
        Some(dir) => -dir * lateral_step,
        None => Vec3::ZERO,
    };

    // Constant-speed approach along the finger axis, stopping at the
    // release gap. GAP_EPS absorbs rounding so the gap comparison settles.
    let gap_excess = (deviation.axial_gap - policy.release_gap).max(0.0);
    let axial_step = (policy.v_h * dt).min(gap_excess);
    let translation_ax = -hand.y_axis() * axial_step;

    // Proportional orientation control with rate saturation.
    let current = Quat::from_rotation_matrix(&object.axes);
    let error = current.rotation_to(&target_orientation(hand));
    let angle = error.norm();
    let rotation = if angle > 0.0 {
        let rate = (policy.rotation_gain * angle).min(policy.rotation_rate_cap);
        let step = (rate * dt).min(angle);
        error * (step / angle)
    } else {
        Vec3::ZERO
    };

    let aligned = (std::f64::consts::PI - deviation.alpha) <= policy.angular_tolerance
        && deviation.beta <= policy.angular_tolerance
        && deviation.lateral_offset <= policy.lateral_tolerance;
    let release_ready = aligned && deviation.axial_gap <= policy.release_gap + GAP_EPS;

    AlignmentCommand {
        translation: translation_lat + translation_ax,
        rotation,
        release_ready,
    }
}

const GAP_EPS: f64 = 1e-9;

/// Cooperation progress as reported per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoopPhase {
    Approaching,
    Aligned,
    Released,
}

/// Absolute setpoint handed to the servo for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoopCommand {
    pub target: Pose,
    pub open_gripper: bool,
    /// The hand frame was lost or stale; the target holds position.
    pub tracking_loss: bool,
}

/// Stateful cooperation loop: consumes the latest hand pose and the current
/// TCP pose, emits absolute setpoints, and latches the release.
#[derive(Debug, Clone)]
pub struct CooperationController {
    policy: ApproachPolicy,
    phase: CoopPhase,
    last_frame: Option<(HandFrame, f64)>,
    started_at: Option<f64>,
}

impl CooperationController {
    pub fn new(policy: ApproachPolicy) -> Self {
        CooperationController {
            policy,
            phase: CoopPhase::Approaching,
            last_frame: None,
            started_at: None,
        }
    }

    pub fn policy(&self) -> &ApproachPolicy {
        &self.policy
    }

    pub fn phase(&self) -> CoopPhase {
        self.phase
    }

    pub fn timed_out(&self, now: f64) -> bool {
        matches!(self.started_at, Some(start) if now - start > self.policy.timeout)
            && self.phase != CoopPhase::Released
    }

    /// Advance one control step at time `now`. A degenerate or stale hand
    /// frame yields a hold-position command flagged as tracking loss; the
    /// phase is preserved.
    pub fn step(
        &mut self,
        tcp: &Pose,
        hand: Option<&HandPose>,
        now: f64,
        dt: f64,
    ) -> (CoopCommand, CoopPhase) {
        self.started_at.get_or_insert(now);

        if let Some(pose) = hand {
            if let Ok(frame) = hand_frame(pose) {
                self.last_frame = Some((frame, now));
            }
        }
        let frame = match &self.last_frame {
            Some((frame, seen)) if now - seen <= self.policy.stale_timeout => *frame,
            _ => {
                return (
                    CoopCommand {
                        target: *tcp,
                        open_gripper: false,
                        tracking_loss: true,
                    },
                    self.phase,
                );
            }
        };

        if self.phase == CoopPhase::Released {
            return (
                CoopCommand {
                    target: *tcp,
                    open_gripper: true,
                    tracking_loss: false,
                },
                CoopPhase::Released,
            );
        }

        let object = ObjectFrame::from_tcp(tcp);
        let command = alignment_setpoint(&object, &frame, &self.policy, dt);
        let deviation = measure_alignment(&object, &frame);
        let aligned = (std::f64::consts::PI - deviation.alpha) <= self.policy.angular_tolerance
            && deviation.beta <= self.policy.angular_tolerance
            && deviation.lateral_offset <= self.policy.lateral_tolerance;

        if command.release_ready {
            self.phase = CoopPhase::Released;
        } else if aligned {
            self.phase = CoopPhase::Aligned;
        } else {
            self.phase = CoopPhase::Approaching;
        }

        let target = Pose {
            position: tcp.position + command.translation,
            orientation: Quat::from_rotation_vector(command.rotation).mul(&tcp.orientation),
        };
        (
            CoopCommand {
                target,
                open_gripper: self.phase == CoopPhase::Released,
                tracking_loss: false,
            },
            self.phase,
        )
    }
}
