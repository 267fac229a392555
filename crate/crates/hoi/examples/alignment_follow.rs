//! Closed-loop cooperation: the controller aligns the ring with a slowly
//! moving finger, approaches, and releases.
//!
//! ```bash
//! cargo run -p hoi --example alignment_follow
//! ```

use hoi::align::{target_orientation, ApproachPolicy, CoopPhase, CooperationController};
use hoi::geom::{Pose, Quat, Vec3};
use hoi::pose::{hand_frame, HandPose, JOINT_COUNT};

/// Minimal pointing hand sufficient for the fingertip frame.
fn pointing_pose(tip: Vec3, dir: Vec3, bend: Vec3, t: f64) -> HandPose {
    let mut joints = [Vec3::ZERO; JOINT_COUNT];
    joints[hoi::pose::INDEX_TIP] = tip;
    joints[hoi::pose::INDEX_DIP] = tip - dir * 0.02;
    joints[hoi::pose::INDEX_PIP] = tip - dir * 0.045;
    joints[hoi::pose::INDEX_MCP] = tip - dir * 0.077 + bend * 0.02;
    HandPose::new(t, joints).unwrap()
}

fn main() {
    let dt = 1.0 / 30.0;
    let policy = ApproachPolicy::default();
    let mut controller = CooperationController::new(policy);

    let base_tip = Vec3::new(0.0, 0.35, 0.25);
    let hand0 = hand_frame(&pointing_pose(base_tip, -Vec3::Y, Vec3::X, 0.0)).unwrap();
    // Start 60 mm in front of the fingertip, slightly misaligned.
    let mut tcp = Pose::new(
        hand0.origin + hand0.y_axis() * 0.06 + Vec3::new(0.004, 0.0, 0.0),
        Quat::from_axis_angle(Vec3::Z, 0.2).mul(&target_orientation(&hand0)),
    );

    for step in 0..600 {
        let now = step as f64 * dt;
        // The hand drifts up a little while the robot approaches.
        let tip = base_tip + Vec3::Z * (0.01 * (now / 5.0).min(1.0));
        let pose = pointing_pose(tip, -Vec3::Y, Vec3::X, now);
        let (cmd, phase) = controller.step(&tcp, Some(&pose), now, dt);
        tcp = cmd.target;
        if step % 30 == 0 || phase == CoopPhase::Released {
            println!(
                "t {now:5.2}  phase {phase:?}  tcp z {:+.4}  gap to tip {:6.1} mm",
                tcp.position.z,
                (tcp.position - tip).norm() * 1000.0
            );
        }
        if phase == CoopPhase::Released {
            println!("released (gripper open) at t = {now:.2} s");
            break;
        }
    }
}
