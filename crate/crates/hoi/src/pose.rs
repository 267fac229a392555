//! Hand pose domain types, stream smoothing, window assembly, and the
//! fingertip coordinate frame.
//!
//! A [`HandPose`] is one timestamped sample of 21 hand joints in meters,
//! ordered wrist-first with four joints per finger:
//!
//! ```text
//!  0        wrist
//!  1..=4    thumb  (CMC, MCP, IP, tip)
//!  5..=8    index  (MCP, PIP, DIP, tip)
//!  9..=12   middle (MCP, PIP, DIP, tip)
//! 13..=16   ring   (MCP, PIP, DIP, tip)
//! 17..=20   pinky  (MCP, PIP, DIP, tip)
//! ```
//!
//! The index-finger chain 5..=8 is the one the downstream controller cares
//! about: the fingertip frame originates at joint 8.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::geom::{Mat3, Vec3};

/// Joints per hand.
pub const JOINT_COUNT: usize = 21;
/// Flattened features per frame (x, y, z per joint).
pub const FEATURES_PER_FRAME: usize = 3 * JOINT_COUNT;
/// Rows per classification window.
pub const WINDOW_LEN: usize = 10;

pub const WRIST: usize = 0;
pub const INDEX_MCP: usize = 5;
pub const INDEX_PIP: usize = 6;
pub const INDEX_DIP: usize = 7;
pub const INDEX_TIP: usize = 8;
pub const MIDDLE_MCP: usize = 9;

/// Trajectory file header; bump when the line layout changes.
pub const TRAJECTORY_SCHEMA: &str = "hoi-trajectory,1";

#[derive(Debug, Error)]
pub enum PoseError {
    #[error("rejected sample: non-finite coordinate at joint {joint}")]
    RejectedSample { joint: usize },
    #[error("rejected sample: non-finite timestamp")]
    BadTimestamp,
    #[error("degenerate hand frame: {reason}")]
    DegenerateFrame { reason: &'static str },
    #[error("smoothing window must be >= 1")]
    BadWindow,
    #[error("trajectory file: {0}")]
    TrajectoryFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One timestamped hand sample. Construction validates finiteness.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPose {
    pub timestamp: f64,
    pub joints: [Vec3; JOINT_COUNT],
}

impl HandPose {
    pub fn new(timestamp: f64, joints: [Vec3; JOINT_COUNT]) -> Result<Self, PoseError> {
        if !timestamp.is_finite() {
            return Err(PoseError::BadTimestamp);
        }
        for (i, j) in joints.iter().enumerate() {
            if !j.is_finite() {
                return Err(PoseError::RejectedSample { joint: i });
            }
        }
        Ok(HandPose { timestamp, joints })
    }

    /// Joint-major flattening: (x1, y1, z1, ..., x21, y21, z21).
    pub fn flatten(&self) -> [f64; FEATURES_PER_FRAME] {
        let mut out = [0.0; FEATURES_PER_FRAME];
        for (i, j) in self.joints.iter().enumerate() {
            out[3 * i] = j.x;
            out[3 * i + 1] = j.y;
            out[3 * i + 2] = j.z;
        }
        out
    }

    /// Inverse of [`HandPose::flatten`].
    pub fn unflatten(
        timestamp: f64,
        features: &[f64; FEATURES_PER_FRAME],
    ) -> Result<Self, PoseError> {
        let mut joints = [Vec3::ZERO; JOINT_COUNT];
        for (i, joint) in joints.iter_mut().enumerate() {
            *joint = Vec3::new(features[3 * i], features[3 * i + 1], features[3 * i + 2]);
        }
        HandPose::new(timestamp, joints)
    }

    pub fn fingertip(&self) -> Vec3 {
        self.joints[INDEX_TIP]
    }
}

/// N consecutive smoothed poses flattened to a `(WINDOW_LEN, 63)` block.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub rows: [[f64; FEATURES_PER_FRAME]; WINDOW_LEN],
    pub start_timestamp: f64,
}

impl FeatureWindow {
    pub fn row_vecs(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.to_vec()).collect()
    }
}

/// Per-coordinate moving-average filter over the last `window` samples.
///
/// Warm-up averages over however many samples exist, so output starts with
/// the first sample. A non-finite sample is rejected without touching state.
#[derive(Debug, Clone)]
pub struct StreamSmoother {
    window: usize,
    history: VecDeque<[f64; FEATURES_PER_FRAME]>,
}

impl StreamSmoother {
    pub fn new(window: usize) -> Result<Self, PoseError> {
        if window == 0 {
            return Err(PoseError::BadWindow);
        }
        Ok(StreamSmoother {
            window,
            history: VecDeque::with_capacity(window),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Push a sample and return its smoothed version. The timestamp passes
    /// through unchanged.
    pub fn push(&mut self, pose: &HandPose) -> Result<HandPose, PoseError> {
        if !pose.timestamp.is_finite() {
            return Err(PoseError::BadTimestamp);
        }
        for (i, j) in pose.joints.iter().enumerate() {
            if !j.is_finite() {
                return Err(PoseError::RejectedSample { joint: i });
            }
        }
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(pose.flatten());

        let n = self.history.len() as f64;
        let mut mean = [0.0; FEATURES_PER_FRAME];
        for frame in &self.history {
            for (m, v) in mean.iter_mut().zip(frame.iter()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        HandPose::unflatten(pose.timestamp, &mean)
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }
}

/// Samples needed before a window with the given in-window stride is ready.
pub fn window_span(stride: usize) -> usize {
    WINDOW_LEN * stride - (stride - 1)
}

/// Build a feature window from the front of a time-ordered buffer.
///
/// Picks `WINDOW_LEN` poses spaced `stride` entries apart starting at index 0
/// and flattens each joint-major. Returns `None` while the buffer holds fewer
/// than `window_span(stride)` poses.
pub fn make_window(buffer: &[HandPose], stride: usize) -> Option<FeatureWindow> {
    assert!(stride >= 1, "stride must be >= 1");
    if buffer.len() < window_span(stride) {
        return None;
    }
    let mut rows = [[0.0; FEATURES_PER_FRAME]; WINDOW_LEN];
    for (r, row) in rows.iter_mut().enumerate() {
        *row = buffer[r * stride].flatten();
    }
    Some(FeatureWindow {
        rows,
        start_timestamp: buffer[0].timestamp,
    })
}

/// Streaming wrapper around [`make_window`]: retains the most recent
/// `window_span(stride)` poses and emits a window per push once full.
#[derive(Debug, Clone)]
pub struct WindowBuffer {
    stride: usize,
    buffer: VecDeque<HandPose>,
}

impl WindowBuffer {
    pub fn new(stride: usize) -> Self {
        assert!(stride >= 1, "stride must be >= 1");
        WindowBuffer {
            stride,
            buffer: VecDeque::with_capacity(window_span(stride)),
        }
    }

    pub fn push(&mut self, pose: HandPose) -> Option<FeatureWindow> {
        let span = window_span(self.stride);
        if self.buffer.len() == span {
            self.buffer.pop_front();
        }
        self.buffer.push_back(pose);
        if self.buffer.len() < span {
            return None;
        }
        let slice: Vec<HandPose> = self.buffer.iter().cloned().collect();
        make_window(&slice, self.stride)
    }

    pub fn clear(&mut self) {
        self.buffer.clear();
    }
}

/// Fingertip-anchored orthonormal frame.
///
/// Columns of `axes` are x_h, y_h, z_h: y along the fingertip direction,
/// x toward the bending side, z completing the right-handed set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandFrame {
    pub origin: Vec3,
    pub axes: Mat3,
}

impl HandFrame {
    pub fn x_axis(&self) -> Vec3 {
        self.axes.col(0)
    }
    pub fn y_axis(&self) -> Vec3 {
        self.axes.col(1)
    }
    pub fn z_axis(&self) -> Vec3 {
        self.axes.col(2)
    }
}

const FRAME_EPS: f64 = 1e-6;

/// Extract the fingertip frame from a pose.
///
/// y_h points from the distal index joint toward the fingertip; x_h is the
/// fingertip→MCP direction orthogonalized against y_h (the side the finger
/// bends toward); z_h = x_h × y_h.
pub fn hand_frame(pose: &HandPose) -> Result<HandFrame, PoseError> {
    let tip = pose.joints[INDEX_TIP];
    let dip = pose.joints[INDEX_DIP];
    let mcp = pose.joints[INDEX_MCP];

    let y = (tip - dip)
        .normalized(FRAME_EPS)
        .ok_or(PoseError::DegenerateFrame {
            reason: "fingertip coincides with distal joint",
        })?;
    let toward_mcp = mcp - tip;
    let x_raw = toward_mcp - y * toward_mcp.dot(y);
    let x = x_raw
        .normalized(FRAME_EPS)
        .ok_or(PoseError::DegenerateFrame {
            reason: "index joints are collinear",
        })?;
    let z = x.cross(y);
    Ok(HandFrame {
        origin: tip,
        axes: Mat3::from_cols(x, y, z),
    })
}

/// Write poses as text: a schema header, then one line per sample with the
/// timestamp followed by 63 comma-separated coordinates.
pub fn write_trajectory<W: Write>(mut w: W, poses: &[HandPose]) -> Result<(), PoseError> {
    writeln!(w, "{TRAJECTORY_SCHEMA}")?;
    for pose in poses {
        let flat = pose.flatten();
        write!(w, "{}", pose.timestamp)?;
        for v in flat.iter() {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn save_trajectory(path: &Path, poses: &[HandPose]) -> Result<(), PoseError> {
    let file = std::fs::File::create(path)?;
    write_trajectory(std::io::BufWriter::new(file), poses)
}

pub fn read_trajectory<R: std::io::Read>(r: R) -> Result<Vec<HandPose>, PoseError> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| PoseError::TrajectoryFormat("empty file".into()))??;
    if header.trim() != TRAJECTORY_SCHEMA {
        return Err(PoseError::TrajectoryFormat(format!(
            "unknown schema header {header:?}, expected {TRAJECTORY_SCHEMA:?}"
        )));
    }
    let mut poses = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let ts: f64 = fields
            .next()
            .unwrap()
            .trim()
            .parse()
            .map_err(|e| PoseError::TrajectoryFormat(format!("line {}: {e}", lineno + 2)))?;
        let mut flat = [0.0; FEATURES_PER_FRAME];
        let mut count = 0;
        for (slot, field) in flat.iter_mut().zip(fields.by_ref()) {
            *slot = field
                .trim()
                .parse()
                .map_err(|e| PoseError::TrajectoryFormat(format!("line {}: {e}", lineno + 2)))?;
            count += 1;
        }
        if count != FEATURES_PER_FRAME || fields.next().is_some() {
            return Err(PoseError::TrajectoryFormat(format!(
                "line {}: expected {} coordinates",
                lineno + 2,
                FEATURES_PER_FRAME
            )));
        }
        poses.push(HandPose::unflatten(ts, &flat)?);
    }
    Ok(poses)
}

pub fn load_trajectory(path: &Path) -> Result<Vec<HandPose>, PoseError> {
    read_trajectory(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pose_with_all(timestamp: f64, value: f64) -> HandPose {
        HandPose::new(timestamp, [Vec3::new(value, value, value); JOINT_COUNT]).unwrap()
    }

    #[test]
    fn smoother_constant_stream_is_constant() {
        let mut s = StreamSmoother::new(5).unwrap();
        for i in 0..20 {
            let out = s.push(&pose_with_all(i as f64, 0.1)).unwrap();
            assert!((out.joints[0].x - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn smoother_window_two_hand_computed() {
        // Coordinate stream [0, 1, 1] with W=2 averages to [0, 0.5, 1].
        let mut s = StreamSmoother::new(2).unwrap();
        let out0 = s.push(&pose_with_all(0.0, 0.0)).unwrap();
        let out1 = s.push(&pose_with_all(1.0, 1.0)).unwrap();
        let out2 = s.push(&pose_with_all(2.0, 1.0)).unwrap();
        assert_eq!(out0.joints[3].y, 0.0);
        assert_eq!(out1.joints[3].y, 0.5);
        assert_eq!(out2.joints[3].y, 1.0);
        // Timestamps pass through unchanged.
        assert_eq!(out2.timestamp, 2.0);
    }

    #[test]
    fn smoother_rejects_non_finite_without_state_change() {
        let mut s = StreamSmoother::new(3).unwrap();
        s.push(&pose_with_all(0.0, 1.0)).unwrap();
        let mut bad = pose_with_all(1.0, 1.0);
        bad.joints[7].z = f64::NAN;
        assert!(matches!(
            s.push(&bad),
            Err(PoseError::RejectedSample { joint: 7 })
        ));
        // Stream continues from the previous state.
        let out = s.push(&pose_with_all(2.0, 3.0)).unwrap();
        assert!((out.joints[0].x - 2.0).abs() < 1e-15);
    }

    #[test]
    fn make_window_picks_strided_frames() {
        let poses: Vec<HandPose> = (0..100)
            .map(|i| pose_with_all(i as f64, i as f64))
            .collect();
        let w = make_window(&poses, 10).expect("ready");
        assert_eq!(w.start_timestamp, 0.0);
        for (r, row) in w.rows.iter().enumerate() {
            assert_eq!(row[0], (r * 10) as f64);
        }
    }

    #[test]
    fn make_window_not_ready_and_zero_case() {
        let poses: Vec<HandPose> = (0..5).map(|i| pose_with_all(i as f64, 0.0)).collect();
        assert!(make_window(&poses, 10).is_none());

        let zeros: Vec<HandPose> = (0..10).map(|i| pose_with_all(i as f64, 0.0)).collect();
        let w = make_window(&zeros, 1).expect("ready");
        assert!(w.rows.iter().all(|row| row.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn window_buffer_emits_after_span() {
        let mut wb = WindowBuffer::new(10);
        let span = window_span(10);
        assert_eq!(span, 91);
        for i in 0..span - 1 {
            assert!(wb.push(pose_with_all(i as f64, i as f64)).is_none());
        }
        let w = wb
            .push(pose_with_all((span - 1) as f64, 0.0))
            .expect("full");
        assert_eq!(w.start_timestamp, 0.0);
    }

    fn synthetic_index_pose(mcp: Vec3, pip: Vec3, dip: Vec3, tip: Vec3) -> HandPose {
        let mut joints = [Vec3::ZERO; JOINT_COUNT];
        joints[INDEX_MCP] = mcp;
        joints[INDEX_PIP] = pip;
        joints[INDEX_DIP] = dip;
        joints[INDEX_TIP] = tip;
        HandPose::new(0.0, joints).unwrap()
    }

    #[test]
    fn hand_frame_straight_finger_bending_x() {
        // Finger along +Y, proximal joint offset toward +X (the bending side).
        let pose = synthetic_index_pose(
            Vec3::new(0.02, 0.04, 0.0),
            Vec3::new(0.0, 0.06, 0.0),
            Vec3::new(0.0, 0.08, 0.0),
            Vec3::new(0.0, 0.10, 0.0),
        );
        let f = hand_frame(&pose).unwrap();
        assert!((f.y_axis() - Vec3::Y).norm() < 1e-12);
        assert!((f.x_axis() - Vec3::X).norm() < 1e-12);
        assert!((f.z_axis() - Vec3::Z).norm() < 1e-12);
        assert_eq!(f.origin, Vec3::new(0.0, 0.10, 0.0));
    }

    #[test]
    fn hand_frame_degenerate_cases() {
        let coincident = synthetic_index_pose(
            Vec3::new(0.02, 0.04, 0.0),
            Vec3::new(0.0, 0.06, 0.0),
            Vec3::new(0.0, 0.10, 0.0),
            Vec3::new(0.0, 0.10, 0.0),
        );
        assert!(matches!(
            hand_frame(&coincident),
            Err(PoseError::DegenerateFrame { .. })
        ));

        let collinear = synthetic_index_pose(
            Vec3::new(0.0, 0.04, 0.0),
            Vec3::new(0.0, 0.06, 0.0),
            Vec3::new(0.0, 0.08, 0.0),
            Vec3::new(0.0, 0.10, 0.0),
        );
        assert!(matches!(
            hand_frame(&collinear),
            Err(PoseError::DegenerateFrame { .. })
        ));
    }

    #[test]
    fn trajectory_roundtrip_exact() {
        let poses: Vec<HandPose> = (0..7)
            .map(|i| {
                let mut joints = [Vec3::ZERO; JOINT_COUNT];
                for (j, joint) in joints.iter_mut().enumerate() {
                    *joint = Vec3::new(
                        (i * j) as f64 * 0.001 + 0.1234567890123,
                        -(j as f64) * 0.01,
                        i as f64 / 30.0,
                    );
                }
                HandPose::new(i as f64 / 30.0, joints).unwrap()
            })
            .collect();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &poses).unwrap();
        let back = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(poses, back);
    }

    #[test]
    fn trajectory_rejects_bad_header() {
        let err = read_trajectory("nope,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, PoseError::TrajectoryFormat(_)));
    }

    proptest! {
        #[test]
        fn smoother_output_within_window_bounds(values in proptest::collection::vec(-1.0f64..1.0, 1..40)) {
            let mut s = StreamSmoother::new(5).unwrap();
            let mut recent: Vec<f64> = Vec::new();
            for (i, v) in values.iter().enumerate() {
                recent.push(*v);
                if recent.len() > 5 {
                    recent.remove(0);
                }
                let out = s.push(&pose_with_all(i as f64, *v)).unwrap();
                let lo = recent.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(out.joints[0].x >= lo - 1e-12 && out.joints[0].x <= hi + 1e-12);
            }
        }

        #[test]
        fn smoother_window_one_is_identity(values in proptest::collection::vec(-5.0f64..5.0, 1..20)) {
            let mut s = StreamSmoother::new(1).unwrap();
            for (i, v) in values.iter().enumerate() {
                let pose = pose_with_all(i as f64, *v);
                let out = s.push(&pose).unwrap();
                prop_assert_eq!(out, pose);
            }
        }

        #[test]
        fn flatten_unflatten_roundtrip(seed in 0u64..1000) {
            let mut joints = [Vec3::ZERO; JOINT_COUNT];
            let mut x = seed as f64;
            for joint in joints.iter_mut() {
                x = (x * 1.1 + 0.7) % 13.0;
                *joint = Vec3::new(x, x * 0.5 - 1.0, -x);
            }
            let pose = HandPose::new(1.5, joints).unwrap();
            let back = HandPose::unflatten(pose.timestamp, &pose.flatten()).unwrap();
            prop_assert_eq!(pose, back);
        }

        #[test]
        fn window_rows_strictly_increasing_in_time(n in 91usize..140, stride in 1usize..11) {
            let poses: Vec<HandPose> = (0..n).map(|i| pose_with_all(i as f64 * 0.033, 0.0)).collect();
            if let Some(w) = make_window(&poses, stride) {
                // Row r comes from buffer index r*stride; timestamps are the x
                // here because pose_with_all stores time separately. Check via
                // reconstructed source indices instead.
                for r in 1..WINDOW_LEN {
                    let t_prev = poses[(r - 1) * stride].timestamp;
                    let t_cur = poses[r * stride].timestamp;
                    prop_assert!(t_cur > t_prev);
                }
                prop_assert_eq!(w.start_timestamp, poses[0].timestamp);
            }
        }

        #[test]
        fn hand_frame_orthonormal_right_handed(
            mx in -0.05f64..0.05, my in -0.05f64..0.05, mz in -0.05f64..0.05,
            tx in -0.05f64..0.05, ty in 0.06f64..0.12, tz in -0.05f64..0.05,
            bend in 0.005f64..0.04,
        ) {
            let tip = Vec3::new(tx, ty, tz);
            let dip = tip - Vec3::new(0.0, 0.02, 0.0);
            let mcp = Vec3::new(mx + bend, my, mz);
            let pose = synthetic_index_pose(mcp, dip - Vec3::new(0.0, 0.02, 0.0), dip, tip);
            match hand_frame(&pose) {
                Ok(f) => {
                    prop_assert!(f.axes.orthonormality_error() <= 1e-9);
                    prop_assert!((f.axes.det() - 1.0).abs() <= 1e-9);
                }
                Err(PoseError::DegenerateFrame { .. }) => {}
                Err(e) => prop_assert!(false, "unexpected error {e:?}"),
            }
        }
    }
}
