//! The confirmation gate on a noisy decision stream: output appears only
//! after a full queue of identical decisions.
//!
//! ```bash
//! cargo run -p hoi --example stability_gate
//! ```

use hoi::mpm::StabilityGate;

fn main() {
    let mut gate = StabilityGate::new(5);
    // A gesture transition: stable, a noisy flicker, then stable again.
    let stream: &[u8] = &[0, 0, 0, 0, 0, 0, 1, 0, 1, 1, 1, 1, 1, 1, 1];
    println!("gate capacity {}", gate.capacity());
    for (i, decision) in stream.iter().enumerate() {
        let confirmed = gate.push(*decision);
        println!(
            "step {i:>2}  decision {decision}  -> {}",
            match confirmed {
                Some(class) => format!("confirmed {class}"),
                None => "no output".to_string(),
            }
        );
    }
    // After acting on a confirmation the caller flushes, forcing the gate
    // to re-confirm before the next action.
    gate.flush();
    assert_eq!(gate.push(1), None);
    println!("flushed: next confirmation needs a full queue again");
}
