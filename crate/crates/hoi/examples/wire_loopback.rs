//! Frame a few messages, push them through a loopback session, and show
//! latest-value delivery plus resynchronization after garbage bytes.
//!
//! ```bash
//! cargo run -p hoi --example wire_loopback
//! ```

use hoi::geom::Pose;
use hoi::wire::{
    encode, ConsumerSession, LoopbackTransport, MessageKind, ProducerSession, Transport,
    WireMessage, GRIP_HOLD,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let msg = WireMessage::servo_command(1_000, &Pose::IDENTITY, GRIP_HOLD);
    println!("servo command encodes to {} bytes", encode(&msg)?.len());

    let (mut tx, rx) = LoopbackTransport::pair();
    let mut consumer = ConsumerSession::new(rx);

    // Some line noise, then real traffic.
    tx.send(&[0xBA, 0xD0])?;
    let mut producer = ProducerSession::new(tx);
    for i in 0..5u64 {
        producer.send(&WireMessage::gate_decision(i * 33_333, (i % 4) as u8))?;
    }
    let delivered = consumer.pump(0.2)?;
    println!(
        "delivered {delivered} messages, {} protocol error(s) skipped",
        consumer.protocol_errors().len()
    );
    let latest = consumer.latest(MessageKind::GateDecision).unwrap();
    println!("latest gate decision: timestamp {} us", latest.timestamp_us);
    println!(
        "ordered log kinds: {:?}",
        consumer
            .log()
            .iter()
            .map(|(_, m)| m.kind())
            .collect::<Vec<_>>()
    );
    println!(
        "one-way latencies (s): {:?}",
        consumer
            .latencies()
            .iter()
            .map(|l| (l * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
    Ok(())
}
