//! One second of the 500 Hz servo loop: a step command arrives mid-run and
//! the TCP tracks it under the velocity limits. Exports the trace as CSV.
//!
//! ```bash
//! cargo run -p hoi --example servo_loop
//! ```

use hoi::arm::{save_trace_csv, ArmCommand, GripperState, ServoLoop, TcpState, SERVO_DT};
use hoi::geom::{Pose, Quat, Vec3};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut servo = ServoLoop::new(TcpState::new(Pose::IDENTITY));
    let commands = servo.commands();

    for tick in 0..500u64 {
        let now = tick as f64 * SERVO_DT;
        if tick == 100 {
            let mut cmd = ArmCommand::move_to(
                1,
                Pose::new(
                    Vec3::new(0.08, -0.03, 0.02),
                    Quat::from_axis_angle(Vec3::Z, 0.5),
                ),
            );
            cmd.gripper = Some(GripperState::Open);
            commands.post(cmd);
        }
        servo.step(now, SERVO_DT);
    }

    let trace = servo.trace();
    println!("ticks: {}", trace.len());
    for tick in [0usize, 100, 101, 200, 350, 499] {
        let e = &trace[tick];
        println!(
            "tick {:>3}  t {:.3}  pos ({:+.4}, {:+.4}, {:+.4})  gripper {:?}  cmd {}",
            e.tick,
            e.time,
            e.pose.position.x,
            e.pose.position.y,
            e.pose.position.z,
            e.gripper,
            e.command_id
        );
    }

    let path = std::env::temp_dir().join("hoi-servo-trace.csv");
    save_trace_csv(&path, trace)?;
    println!("trace csv: {}", path.display());
    Ok(())
}
