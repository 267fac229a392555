//! Binary streaming protocol between the perception side and the control /
//! servo side.
//!
//! Frame layout, little-endian throughout:
//!
//! ```text
//! magic    4 bytes  "HOI1"
//! type     1 byte   1 PoseSample | 2 ServoCommand | 3 StateReport | 4 GateDecision
//! time     u64      microseconds
//! length   u32      payload bytes
//! payload  type-specific
//! ```
//!
//! Payloads (floats are f32):
//!
//! * `PoseSample`: 21 joints x 3 coordinates = 252 bytes.
//! * `ServoCommand`: position + axis-angle (6 floats) + 1 gripper request
//!   byte (0 hold, 1 open, 2 close) = 25 bytes.
//! * `StateReport`: same 6 floats + 1 gripper state byte (0 open, 1 closed)
//!   + 1 status byte (0 ok, 1 safety-stopped) = 26 bytes.
//! * `GateDecision`: 1 class code byte.

mod session;

pub use session::{
    connect_tcp, listen_tcp, ConsumerSession, LoopbackTransport, ProducerSession, TcpTransport,
    Transport,
};

use thiserror::Error;

use crate::geom::{Pose, Quat, Vec3};
use crate::pose::{HandPose, JOINT_COUNT};

pub const MAGIC: [u8; 4] = *b"HOI1";
pub const HEADER_LEN: usize = 17;
/// Default TCP port for live deployments.
pub const DEFAULT_PORT: u16 = 30301;

pub const POSE_PAYLOAD: usize = JOINT_COUNT * 3 * 4;
pub const COMMAND_PAYLOAD: usize = 6 * 4 + 1;
pub const REPORT_PAYLOAD: usize = 6 * 4 + 2;
pub const GATE_PAYLOAD: usize = 1;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("invalid message: {0}")]
    Invalid(&'static str),
    #[error("session closed")]
    SessionClosed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("bad magic at offset {offset}")]
    BadMagic { offset: usize },
    #[error("unknown message type {kind} at offset {offset}")]
    UnknownType { kind: u8, offset: usize },
    #[error("payload length {got} for type {kind} (expected {expected}) at offset {offset}")]
    LengthMismatch {
        kind: u8,
        expected: usize,
        got: usize,
        offset: usize,
    },
}

/// Message type tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MessageKind {
    PoseSample = 1,
    ServoCommand = 2,
    StateReport = 3,
    GateDecision = 4,
}

impl MessageKind {
    pub fn from_byte(b: u8) -> Option<MessageKind> {
        match b {
            1 => Some(MessageKind::PoseSample),
            2 => Some(MessageKind::ServoCommand),
            3 => Some(MessageKind::StateReport),
            4 => Some(MessageKind::GateDecision),
            _ => None,
        }
    }

    pub fn payload_len(self) -> usize {
        match self {
            MessageKind::PoseSample => POSE_PAYLOAD,
            MessageKind::ServoCommand => COMMAND_PAYLOAD,
            MessageKind::StateReport => REPORT_PAYLOAD,
            MessageKind::GateDecision => GATE_PAYLOAD,
        }
    }
}

/// Gripper request carried by a servo command.
pub const GRIP_HOLD: u8 = 0;
pub const GRIP_OPEN: u8 = 1;
pub const GRIP_CLOSE: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum WirePayload {
    /// 21 joints, (x, y, z) meters.
    PoseSample(Box<[[f32; 3]; JOINT_COUNT]>),
    /// Absolute TCP target: position + axis-angle, plus a gripper request.
    ServoCommand { pose: [f32; 6], gripper: u8 },
    /// Servo feedback: pose, gripper state (0 open / 1 closed), status byte.
    StateReport {
        pose: [f32; 6],
        gripper: u8,
        status: u8,
    },
    /// Confirmed class code.
    GateDecision(u8),
}

impl WirePayload {
    pub fn kind(&self) -> MessageKind {
        match self {
            WirePayload::PoseSample(_) => MessageKind::PoseSample,
            WirePayload::ServoCommand { .. } => MessageKind::ServoCommand,
            WirePayload::StateReport { .. } => MessageKind::StateReport,
            WirePayload::GateDecision(_) => MessageKind::GateDecision,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub timestamp_us: u64,
    pub payload: WirePayload,
}

impl WireMessage {
    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }

    /// Total encoded length.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.kind().payload_len()
    }

    pub fn pose_sample(pose: &HandPose) -> WireMessage {
        let mut joints = Box::new([[0.0f32; 3]; JOINT_COUNT]);
        for (slot, j) in joints.iter_mut().zip(pose.joints.iter()) {
            *slot = [j.x as f32, j.y as f32, j.z as f32];
        }
        WireMessage {
            timestamp_us: seconds_to_us(pose.timestamp),
            payload: WirePayload::PoseSample(joints),
        }
    }

    /// Back to a pose sample; the header timestamp becomes the pose time.
    pub fn to_hand_pose(&self) -> Option<HandPose> {
        match &self.payload {
            WirePayload::PoseSample(joints) => {
                let mut out = [Vec3::ZERO; JOINT_COUNT];
                for (slot, j) in out.iter_mut().zip(joints.iter()) {
                    *slot = Vec3::new(j[0] as f64, j[1] as f64, j[2] as f64);
                }
                HandPose::new(us_to_seconds(self.timestamp_us), out).ok()
            }
            _ => None,
        }
    }

    pub fn servo_command(timestamp_us: u64, target: &Pose, gripper: u8) -> WireMessage {
        WireMessage {
            timestamp_us,
            payload: WirePayload::ServoCommand {
                pose: pack_pose(target),
                gripper,
            },
        }
    }

    pub fn state_report(
        timestamp_us: u64,
        pose: &Pose,
        gripper_closed: bool,
        status: u8,
    ) -> WireMessage {
        WireMessage {
            timestamp_us,
            payload: WirePayload::StateReport {
                pose: pack_pose(pose),
                gripper: if gripper_closed { 1 } else { 0 },
                status,
            },
        }
    }

    pub fn gate_decision(timestamp_us: u64, class: u8) -> WireMessage {
        WireMessage {
            timestamp_us,
            payload: WirePayload::GateDecision(class),
        }
    }

    /// Unpack the 6-float pose of a command or report.
    pub fn to_pose(&self) -> Option<Pose> {
        match &self.payload {
            WirePayload::ServoCommand { pose, .. } | WirePayload::StateReport { pose, .. } => {
                Some(unpack_pose(pose))
            }
            _ => None,
        }
    }
}

pub fn seconds_to_us(seconds: f64) -> u64 {
    (seconds * 1e6).round().max(0.0) as u64
}

pub fn us_to_seconds(us: u64) -> f64 {
    us as f64 / 1e6
}

fn pack_pose(pose: &Pose) -> [f32; 6] {
    let rv = pose.orientation.to_rotation_vector();
    [
        pose.position.x as f32,
        pose.position.y as f32,
        pose.position.z as f32,
        rv.x as f32,
        rv.y as f32,
        rv.z as f32,
    ]
}

fn unpack_pose(packed: &[f32; 6]) -> Pose {
    Pose {
        position: Vec3::new(packed[0] as f64, packed[1] as f64, packed[2] as f64),
        orientation: Quat::from_rotation_vector(Vec3::new(
            packed[3] as f64,
            packed[4] as f64,
            packed[5] as f64,
        )),
    }
}

/// Encode a message. Never emits malformed bytes: non-finite floats and
/// out-of-range enum bytes are rejected.
pub fn encode(message: &WireMessage) -> Result<Vec<u8>, WireError> {
    let kind = message.kind();
    let payload_len = kind.payload_len();
    let mut out = Vec::with_capacity(HEADER_LEN + payload_len);
    out.extend_from_slice(&MAGIC);
    out.push(kind as u8);
    out.extend_from_slice(&message.timestamp_us.to_le_bytes());
    out.extend_from_slice(&(payload_len as u32).to_le_bytes());
    match &message.payload {
        WirePayload::PoseSample(joints) => {
            for j in joints.iter() {
                for v in j {
                    if !v.is_finite() {
                        return Err(WireError::Invalid("non-finite joint coordinate"));
                    }
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        WirePayload::ServoCommand { pose, gripper } => {
            if *gripper > GRIP_CLOSE {
                return Err(WireError::Invalid("gripper request out of range"));
            }
            for v in pose {
                if !v.is_finite() {
                    return Err(WireError::Invalid("non-finite pose component"));
                }
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.push(*gripper);
        }
        WirePayload::StateReport {
            pose,
            gripper,
            status,
        } => {
            if *gripper > 1 {
                return Err(WireError::Invalid("gripper state out of range"));
            }
            for v in pose {
                if !v.is_finite() {
                    return Err(WireError::Invalid("non-finite pose component"));
                }
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.push(*gripper);
            out.push(*status);
        }
        WirePayload::GateDecision(class) => out.push(*class),
    }
    debug_assert_eq!(out.len(), HEADER_LEN + payload_len);
    Ok(out)
}

/// Result of one decode attempt against the front of a buffer.
#[derive(Debug, Clone, PartialEq)]
pub enum DecodeOutcome {
    /// A complete message; drop `consumed` bytes before the next attempt.
    Message {
        message: WireMessage,
        consumed: usize,
    },
    /// The buffer holds a valid prefix; feed more bytes, nothing consumed.
    NeedMore,
    /// Corrupt input; drop `consumed` bytes (positioned at the next magic
    /// candidate) and retry.
    Corrupt {
        consumed: usize,
        error: ProtocolError,
    },
}

/// Offset of the next possible frame start after a corrupt prefix.
fn resync_offset(buffer: &[u8]) -> usize {
    for i in 1..buffer.len() {
        let tail = &buffer[i..];
        let check = tail.len().min(4);
        if tail[..check] == MAGIC[..check] {
            return i;
        }
    }
    buffer.len()
}

/// Incremental decode of the first frame in `buffer`. Never reads past the
/// consumed length it reports.
pub fn decode(buffer: &[u8]) -> DecodeOutcome {
    if buffer.is_empty() {
        return DecodeOutcome::NeedMore;
    }
    let magic_check = buffer.len().min(4);
    if buffer[..magic_check] != MAGIC[..magic_check] {
        return DecodeOutcome::Corrupt {
            consumed: resync_offset(buffer),
            error: ProtocolError::BadMagic { offset: 0 },
        };
    }
    if buffer.len() < HEADER_LEN {
        return DecodeOutcome::NeedMore;
    }
    let kind_byte = buffer[4];
    let Some(kind) = MessageKind::from_byte(kind_byte) else {
        return DecodeOutcome::Corrupt {
            consumed: resync_offset(buffer),
            error: ProtocolError::UnknownType {
                kind: kind_byte,
                offset: 4,
            },
        };
    };
    let timestamp_us = u64::from_le_bytes(buffer[5..13].try_into().unwrap());
    let declared = u32::from_le_bytes(buffer[13..17].try_into().unwrap()) as usize;
    if declared != kind.payload_len() {
        return DecodeOutcome::Corrupt {
            consumed: resync_offset(buffer),
            error: ProtocolError::LengthMismatch {
                kind: kind_byte,
                expected: kind.payload_len(),
                got: declared,
                offset: 13,
            },
        };
    }
    let total = HEADER_LEN + declared;
    if buffer.len() < total {
        return DecodeOutcome::NeedMore;
    }
    let body = &buffer[HEADER_LEN..total];
    let f32_at = |i: usize| f32::from_le_bytes(body[4 * i..4 * i + 4].try_into().unwrap());
    let payload = match kind {
        MessageKind::PoseSample => {
            let mut joints = Box::new([[0.0f32; 3]; JOINT_COUNT]);
            for (j, slot) in joints.iter_mut().enumerate() {
                *slot = [f32_at(3 * j), f32_at(3 * j + 1), f32_at(3 * j + 2)];
            }
            WirePayload::PoseSample(joints)
        }
        MessageKind::ServoCommand => {
            let mut pose = [0.0f32; 6];
            for (i, slot) in pose.iter_mut().enumerate() {
                *slot = f32_at(i);
            }
            WirePayload::ServoCommand {
                pose,
                gripper: body[24],
            }
        }
        MessageKind::StateReport => {
            let mut pose = [0.0f32; 6];
            for (i, slot) in pose.iter_mut().enumerate() {
                *slot = f32_at(i);
            }
            WirePayload::StateReport {
                pose,
                gripper: body[24],
                status: body[25],
            }
        }
        MessageKind::GateDecision => WirePayload::GateDecision(body[0]),
    };
    DecodeOutcome::Message {
        message: WireMessage {
            timestamp_us,
            payload,
        },
        consumed: total,
    }
}

/// Buffered incremental decoder.
#[derive(Debug, Default)]
pub struct Decoder {
    buffer: Vec<u8>,
    protocol_errors: Vec<ProtocolError>,
}

impl Decoder {
    pub fn new() -> Decoder {
        Decoder::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buffer.extend_from_slice(bytes);
    }

    /// Next complete message, skipping corrupt stretches.
    pub fn next_message(&mut self) -> Option<WireMessage> {
        loop {
            match decode(&self.buffer) {
                DecodeOutcome::Message { message, consumed } => {
                    self.buffer.drain(..consumed);
                    return Some(message);
                }
                DecodeOutcome::NeedMore => return None,
                DecodeOutcome::Corrupt { consumed, error } => {
                    self.protocol_errors.push(error);
                    self.buffer.drain(..consumed.max(1).min(self.buffer.len()));
                }
            }
        }
    }

    pub fn protocol_errors(&self) -> &[ProtocolError] {
        &self.protocol_errors
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_pose_message(t: u64) -> WireMessage {
        let mut joints = Box::new([[0.0f32; 3]; JOINT_COUNT]);
        for (i, j) in joints.iter_mut().enumerate() {
            *j = [i as f32 * 0.01, -(i as f32) * 0.02, 0.5 + i as f32];
        }
        WireMessage {
            timestamp_us: t,
            payload: WirePayload::PoseSample(joints),
        }
    }

    #[test]
    fn encoded_sizes_match_layout() {
        let pose = sample_pose_message(123);
        assert_eq!(encode(&pose).unwrap().len(), 269);

        let gate = WireMessage::gate_decision(5, 2);
        assert_eq!(encode(&gate).unwrap().len(), 18);

        let cmd = WireMessage::servo_command(9, &Pose::IDENTITY, GRIP_HOLD);
        assert_eq!(encode(&cmd).unwrap().len(), HEADER_LEN + 25);

        let report = WireMessage::state_report(9, &Pose::IDENTITY, true, 0);
        assert_eq!(encode(&report).unwrap().len(), HEADER_LEN + 26);
    }

    #[test]
    fn roundtrip_identity() {
        let messages = vec![
            sample_pose_message(1),
            WireMessage::servo_command(2, &Pose::IDENTITY, GRIP_CLOSE),
            WireMessage::state_report(3, &Pose::IDENTITY, false, 1),
            WireMessage::gate_decision(u64::MAX, 255),
        ];
        for m in messages {
            let bytes = encode(&m).unwrap();
            match decode(&bytes) {
                DecodeOutcome::Message { message, consumed } => {
                    assert_eq!(message, m);
                    assert_eq!(consumed, bytes.len());
                }
                other => panic!("unexpected outcome {other:?}"),
            }
        }
    }

    #[test]
    fn short_input_needs_more_without_consuming() {
        let bytes = encode(&sample_pose_message(7)).unwrap();
        for cut in [0, 1, 3, 10, 16, 17, 100, 268] {
            assert_eq!(decode(&bytes[..cut]), DecodeOutcome::NeedMore, "cut {cut}");
        }
    }

    #[test]
    fn garbage_then_frame_yields_one_error_then_message() {
        let frame = encode(&WireMessage::gate_decision(1, 3)).unwrap();
        let mut stream = vec![0xDE, 0xAD, 0xBE, 0xEF];
        stream.extend_from_slice(&frame);

        let mut decoder = Decoder::new();
        decoder.push(&stream);
        let msg = decoder.next_message().expect("recovered message");
        assert_eq!(msg, WireMessage::gate_decision(1, 3));
        assert_eq!(decoder.protocol_errors().len(), 1);
        assert!(matches!(
            decoder.protocol_errors()[0],
            ProtocolError::BadMagic { offset: 0 }
        ));
    }

    #[test]
    fn unknown_type_and_length_mismatch_are_reported() {
        let mut bytes = encode(&WireMessage::gate_decision(1, 3)).unwrap();
        bytes[4] = 9;
        match decode(&bytes) {
            DecodeOutcome::Corrupt {
                error: ProtocolError::UnknownType { kind: 9, offset: 4 },
                ..
            } => {}
            other => panic!("unexpected {other:?}"),
        }

        let mut bytes = encode(&WireMessage::gate_decision(1, 3)).unwrap();
        bytes[13] = 200;
        match decode(&bytes) {
            DecodeOutcome::Corrupt {
                error:
                    ProtocolError::LengthMismatch {
                        kind: 4,
                        expected: 1,
                        got: 200,
                        offset: 13,
                    },
                ..
            } => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn encode_rejects_invariant_violations() {
        let bad = WireMessage {
            timestamp_us: 0,
            payload: WirePayload::ServoCommand {
                pose: [f32::NAN; 6],
                gripper: GRIP_HOLD,
            },
        };
        assert!(matches!(encode(&bad), Err(WireError::Invalid(_))));
        let bad = WireMessage {
            timestamp_us: 0,
            payload: WirePayload::ServoCommand {
                pose: [0.0; 6],
                gripper: 7,
            },
        };
        assert!(matches!(encode(&bad), Err(WireError::Invalid(_))));
    }

    #[test]
    fn hand_pose_conversion_preserves_mm_precision() {
        let mut joints = [Vec3::ZERO; JOINT_COUNT];
        for (i, j) in joints.iter_mut().enumerate() {
            *j = Vec3::new(0.123456 + i as f64 * 0.01, -0.54321, 0.25);
        }
        let pose = HandPose::new(1.5, joints).unwrap();
        let msg = WireMessage::pose_sample(&pose);
        let back = msg.to_hand_pose().unwrap();
        assert_eq!(back.timestamp, 1.5);
        for (a, b) in pose.joints.iter().zip(back.joints.iter()) {
            assert!((*a - *b).norm() < 1e-6);
        }
    }

    fn arbitrary_message() -> impl Strategy<Value = WireMessage> {
        let pose =
            (any::<u64>(), proptest::collection::vec(-10.0f32..10.0, 63)).prop_map(|(t, v)| {
                let mut joints = Box::new([[0.0f32; 3]; JOINT_COUNT]);
                for (i, j) in joints.iter_mut().enumerate() {
                    *j = [v[3 * i], v[3 * i + 1], v[3 * i + 2]];
                }
                WireMessage {
                    timestamp_us: t,
                    payload: WirePayload::PoseSample(joints),
                }
            });
        let cmd = (
            any::<u64>(),
            proptest::collection::vec(-5.0f32..5.0, 6),
            0u8..3,
        )
            .prop_map(|(t, v, g)| WireMessage {
                timestamp_us: t,
                payload: WirePayload::ServoCommand {
                    pose: [v[0], v[1], v[2], v[3], v[4], v[5]],
                    gripper: g,
                },
            });
        let report = (
            any::<u64>(),
            proptest::collection::vec(-5.0f32..5.0, 6),
            0u8..2,
            0u8..2,
        )
            .prop_map(|(t, v, g, s)| WireMessage {
                timestamp_us: t,
                payload: WirePayload::StateReport {
                    pose: [v[0], v[1], v[2], v[3], v[4], v[5]],
                    gripper: g,
                    status: s,
                },
            });
        let gate = (any::<u64>(), any::<u8>()).prop_map(|(t, c)| WireMessage {
            timestamp_us: t,
            payload: WirePayload::GateDecision(c),
        });
        prop_oneof![pose, cmd, report, gate]
    }

    proptest! {
        #[test]
        fn roundtrip_property(m in arbitrary_message()) {
            let bytes = encode(&m).unwrap();
            prop_assert_eq!(bytes.len(), m.encoded_len());
            match decode(&bytes) {
                DecodeOutcome::Message { message, consumed } => {
                    prop_assert_eq!(message, m);
                    prop_assert_eq!(consumed, bytes.len());
                }
                other => prop_assert!(false, "unexpected {:?}", other),
            }
        }

        #[test]
        fn rechunking_invariance(
            msgs in proptest::collection::vec(arbitrary_message(), 1..8),
            chunk in 1usize..64,
        ) {
            let mut stream = Vec::new();
            for m in &msgs {
                stream.extend_from_slice(&encode(m).unwrap());
            }
            let mut decoder = Decoder::new();
            let mut got = Vec::new();
            for piece in stream.chunks(chunk) {
                decoder.push(piece);
                while let Some(m) = decoder.next_message() {
                    got.push(m);
                }
            }
            prop_assert_eq!(got, msgs);
            prop_assert_eq!(decoder.protocol_errors().len(), 0);
        }
    }
}
