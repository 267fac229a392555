//! Drive the two-mode state machine with a sequence of confirmed gestures.
//!
//! ```bash
//! cargo run -p hoi --example teleop_fsm
//! ```

use hoi::dataset::MotionClass;
use hoi::fsm::{default_bindings, step_fsm, ControllerMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = default_bindings();
    let mut mode = ControllerMode::Teleop;

    let confirmations = [
        Some(MotionClass::Keep),
        Some(MotionClass::Come),
        Some(MotionClass::Come),
        None,
        Some(MotionClass::Back),
        Some(MotionClass::Ring),
        Some(MotionClass::Come), // ignored: cooperation owns motion now
    ];

    for confirmed in confirmations {
        let (next, action) = step_fsm(mode, confirmed, &registry)?;
        println!(
            "{mode:?} + {:<12} -> {next:?} {}",
            confirmed.map(|c| c.name()).unwrap_or("(no output)"),
            match action {
                Some(d) if !d.is_zero() =>
                    format!("move ({:+.0} mm along y)", d.translation.y * 1000.0),
                Some(_) => "hold".to_string(),
                None => "-".to_string(),
            }
        );
        mode = next;
    }
    Ok(())
}
