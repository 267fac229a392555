//! Desk-scale hand-object-interaction control stack.
//!
//! The crate wires a hand-gesture pipeline to a simulated robot arm:
//! joint-stream smoothing, a bidirectional-LSTM motion classifier behind a
//! stability gate, a two-mode (teleop / cooperation) primitive state machine,
//! a closed-loop fingertip-alignment controller, and a 500 Hz TCP servo, all
//! connected by a small binary wire protocol and runnable end to end on a
//! deterministic simulated clock.
//!
//! # Modules
//!
//! | module    | what it owns |
//! |-----------|--------------|
//! | [`geom`]    | vectors, rotation matrices, unit quaternions, poses |
//! | [`pose`]    | hand samples, smoothing, feature windows, fingertip frame |
//! | [`dataset`] | synthetic gesture trajectories, window datasets, splits |
//! | [`mpm`]     | the classifier, training, the stability gate, checkpoints |
//! | [`fsm`]     | motion-primitive registry and the mode state machine |
//! | [`align`]   | frame alignment math and the cooperation controller |
//! | [`arm`]     | simulated TCP state, servo loop, gripper, safety zone |
//! | [`wire`]    | binary message framing and streaming sessions |
//! | [`harness`] | scenario scripts, the simulated-clock pipeline, metrics |
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run -p hoi --example smooth_and_frame    # smoothing + fingertip frame
//! cargo run -p hoi --example gen_dataset         # synthetic dataset on disk
//! cargo run -p hoi --example train_and_eval      # small training run
//! cargo run -p hoi --example stability_gate      # gate behavior
//! cargo run -p hoi --example teleop_fsm          # confirmed gestures -> actions
//! cargo run -p hoi --example servo_loop          # 1 s of 500 Hz servo
//! cargo run -p hoi --example alignment_follow    # cooperation controller
//! cargo run -p hoi --example wire_loopback       # framing + session
//! cargo run -p hoi --example ring_scenario       # the full pipeline
//! ```
//!
//! The `hoi` binary exposes the same plumbing as subcommands
//! (`gen-data`, `train`, `eval`, `run-scenario`, `replay`).

pub mod align;
pub mod arm;
pub mod clock;
pub mod dataset;
pub mod fsm;
pub mod geom;
pub mod harness;
pub mod mailbox;
pub mod mpm;
pub mod pose;
pub mod wire;
