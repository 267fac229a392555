//! Smooth a noisy pose stream and extract the fingertip frame.
//!
//! The raw stream carries estimator jitter; the moving average steadies the
//! fingertip direction before the frame is built.
//!
//! ```bash
//! cargo run -p hoi --example smooth_and_frame
//! ```

use hoi::dataset::{generate_motion_trajectory, MotionClass};
use hoi::pose::{hand_frame, StreamSmoother, INDEX_TIP};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A jittery "come" trajectory, as the pose estimator would produce it.
    let raw = generate_motion_trajectory(MotionClass::Come, 120, 7, 0.003)?;
    let clean = generate_motion_trajectory(MotionClass::Come, 120, 7, 0.0)?;

    let mut smoother = StreamSmoother::new(5)?;
    println!(
        "{:>6} {:>10} {:>10} {:>12} {:>12}",
        "t", "raw y", "smooth y", "raw axis°", "smooth axis°"
    );
    for (pose, truth) in raw.iter().zip(clean.iter()) {
        let smoothed = smoother.push(pose)?;
        let true_axis = hand_frame(truth)?.y_axis();
        let angle = |p: &hoi::pose::HandPose| -> Result<f64, Box<dyn std::error::Error>> {
            Ok(hand_frame(p)?
                .y_axis()
                .dot(true_axis)
                .clamp(-1.0, 1.0)
                .acos()
                .to_degrees())
        };
        if ((pose.timestamp * 30.0).round() as u64).is_multiple_of(12) {
            println!(
                "{:6.2} {:10.4} {:10.4} {:12.2} {:12.2}",
                pose.timestamp,
                pose.joints[INDEX_TIP].y,
                smoothed.joints[INDEX_TIP].y,
                angle(pose)?,
                angle(&smoothed)?,
            );
        }
    }
    Ok(())
}
