//! Scenario traces, the metrics report, and the trace file formats.
//!
//! Metrics are always computed from the serialized trace representation
//! (positions plus axis-angle rotation vectors), so recomputing them from
//! saved trace files reproduces the original report exactly.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::MotionClass;
use crate::fsm::ControllerMode;
use crate::geom::{Quat, Vec3};
use crate::harness::HarnessError;

/// One row per pose step on the control side.
#[derive(Debug, Clone, PartialEq)]
pub struct HandTraceRow {
    pub time: f64,
    pub segment: usize,
    pub scripted_class: Option<MotionClass>,
    /// Fingertip in the robot frame.
    pub fingertip: Vec3,
    /// Finger pointing axis in the robot frame (zero when degenerate).
    pub finger_axis: Vec3,
    pub decision: Option<u8>,
    pub confirmed: Option<u8>,
    pub mode: ControllerMode,
    pub coop_phase: Option<CoopPhaseTag>,
    pub tracking_loss: bool,
    /// Alignment measurements while cooperating: (alpha, beta) degrees of
    /// residual error, lateral offset mm, axial gap mm.
    pub alignment: Option<(f64, f64, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoopPhaseTag {
    Approaching,
    Aligned,
    Released,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Pick,
    Teleop(MotionClass),
    Coop,
}

/// One issued servo command with its gesture provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandRecord {
    pub id: u64,
    pub issue_time: f64,
    /// Index of the gesture segment this command derives from.
    pub segment: usize,
    pub kind: CommandKind,
    pub target_position: Vec3,
    /// Axis-angle target orientation.
    pub target_rotation: Vec3,
    /// 0 hold, 1 open, 2 close.
    pub gripper: u8,
}

/// One row per servo tick, the serialized form of the arm trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TcpTraceRow {
    pub tick: u64,
    pub time: f64,
    pub position: Vec3,
    /// Axis-angle orientation.
    pub rotation: Vec3,
    pub gripper_closed: bool,
    pub command_id: u64,
}

/// Pass/fail bounds a scenario is judged against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub max_latency_s: f64,
    pub max_translational_error_mm: f64,
    pub max_rotational_error_deg: f64,
    pub require_release: bool,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            max_latency_s: 0.3,
            max_translational_error_mm: 2.5,
            max_rotational_error_deg: 1.5,
            require_release: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureLatency {
    pub segment: usize,
    pub class: MotionClass,
    pub onset: f64,
    pub first_action: f64,
    pub latency_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimestamps {
    pub pick_completed: Option<f64>,
    pub first_teleop_action: Option<f64>,
    pub cooperation_started: Option<f64>,
    pub aligned: Option<f64>,
    pub released: Option<f64>,
    pub done: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub thresholds: Thresholds,
    pub gate_len: usize,
    pub pose_rate_hz: f64,
    pub command_latencies: Vec<GestureLatency>,
    pub max_latency_s: Option<f64>,
    pub max_translational_error_mm: f64,
    pub mean_translational_error_mm: f64,
    pub max_rotational_error_deg: f64,
    pub mean_rotational_error_deg: f64,
    /// Peak vertical TCP displacement while cooperating, mm.
    pub max_z_displacement_mm: f64,
    /// Peak TCP orientation sweep while cooperating, degrees.
    pub max_rotation_sweep_deg: f64,
    pub phases: PhaseTimestamps,
    pub gate_confirmations: BTreeMap<String, usize>,
    pub reached_cooperation: bool,
    pub released: bool,
    pub release_axial_gap_mm: Option<f64>,
    pub release_angular_error_deg: Option<(f64, f64)>,
    pub passed: bool,
}

/// Derive the report from traces. Deterministic in its inputs.
pub fn compute_metrics(
    scenario: &str,
    thresholds: &Thresholds,
    gate_len: usize,
    pose_rate_hz: f64,
    hand_rows: &[HandTraceRow],
    commands: &[CommandRecord],
    tcp_trace: &[TcpTraceRow],
) -> MetricsReport {
    // Gesture latency: segment onset -> first servo tick driven by a command
    // attributed to that segment.
    let mut segment_onset: BTreeMap<usize, f64> = BTreeMap::new();
    for row in hand_rows {
        segment_onset.entry(row.segment).or_insert(row.time);
    }
    let mut first_tick_of_command: BTreeMap<u64, f64> = BTreeMap::new();
    for row in tcp_trace {
        if row.command_id != 0 {
            first_tick_of_command
                .entry(row.command_id)
                .or_insert(row.time);
        }
    }
    let mut by_segment: BTreeMap<usize, (MotionClass, f64)> = BTreeMap::new();
    for cmd in commands {
        let class = match cmd.kind {
            CommandKind::Teleop(class) => class,
            CommandKind::Coop => MotionClass::Ring,
            CommandKind::Pick => continue,
        };
        if let Some(t) = first_tick_of_command.get(&cmd.id) {
            let slot = by_segment.entry(cmd.segment).or_insert((class, *t));
            if *t < slot.1 {
                *slot = (class, *t);
            }
        }
    }
    let mut command_latencies = Vec::new();
    for (segment, (class, first_action)) in by_segment {
        let onset = *segment_onset.get(&segment).unwrap_or(&0.0);
        command_latencies.push(GestureLatency {
            segment,
            class,
            onset,
            first_action,
            latency_s: first_action - onset,
        });
    }
    let max_latency_s = command_latencies
        .iter()
        .map(|l| l.latency_s)
        .fold(None, |acc: Option<f64>, l| {
            Some(acc.map_or(l, |a| a.max(l)))
        });

    // Tracking error against the active commanded target while cooperating.
    let coop_ids: std::collections::BTreeSet<u64> = commands
        .iter()
        .filter(|c| c.kind == CommandKind::Coop)
        .map(|c| c.id)
        .collect();
    let target_of: BTreeMap<u64, (&Vec3, &Vec3)> = commands
        .iter()
        .map(|c| (c.id, (&c.target_position, &c.target_rotation)))
        .collect();
    let mut trans_sum = 0.0;
    let mut trans_max = 0.0f64;
    let mut rot_sum = 0.0;
    let mut rot_max = 0.0f64;
    let mut error_ticks = 0usize;
    let mut coop_start_pose: Option<(Vec3, Quat)> = None;
    let mut max_dz = 0.0f64;
    let mut max_sweep = 0.0f64;
    for row in tcp_trace {
        if !coop_ids.contains(&row.command_id) {
            continue;
        }
        let (target_pos, target_rot) = target_of[&row.command_id];
        let trans = (row.position - *target_pos).norm() * 1000.0;
        let rot = Quat::from_rotation_vector(row.rotation)
            .angle_to(&Quat::from_rotation_vector(*target_rot))
            .to_degrees();
        trans_sum += trans;
        rot_sum += rot;
        trans_max = trans_max.max(trans);
        rot_max = rot_max.max(rot);
        error_ticks += 1;

        let (start_pos, start_q) =
            coop_start_pose.get_or_insert((row.position, Quat::from_rotation_vector(row.rotation)));
        max_dz = max_dz.max((row.position.z - start_pos.z).abs() * 1000.0);
        max_sweep = max_sweep.max(
            Quat::from_rotation_vector(row.rotation)
                .angle_to(start_q)
                .to_degrees(),
        );
    }
    let (mean_trans, mean_rot) = if error_ticks > 0 {
        (trans_sum / error_ticks as f64, rot_sum / error_ticks as f64)
    } else {
        (0.0, 0.0)
    };

    // Phase timestamps.
    let mut phases = PhaseTimestamps::default();
    let started_closed = tcp_trace.first().map(|r| r.gripper_closed).unwrap_or(true);
    for row in tcp_trace {
        if phases.pick_completed.is_none() && !started_closed && row.gripper_closed {
            phases.pick_completed = Some(row.time);
        }
    }
    let teleop_ids: std::collections::BTreeSet<u64> = commands
        .iter()
        .filter(|c| matches!(c.kind, CommandKind::Teleop(_)))
        .map(|c| c.id)
        .collect();
    for row in tcp_trace {
        if teleop_ids.contains(&row.command_id) {
            phases.first_teleop_action = Some(row.time);
            break;
        }
    }
    let mut gate_confirmations: BTreeMap<String, usize> = BTreeMap::new();
    let mut release_row: Option<&HandTraceRow> = None;
    for row in hand_rows {
        if phases.cooperation_started.is_none() && row.mode >= ControllerMode::Cooperation {
            phases.cooperation_started = Some(row.time);
        }
        if phases.aligned.is_none()
            && matches!(
                row.coop_phase,
                Some(CoopPhaseTag::Aligned | CoopPhaseTag::Released)
            )
        {
            phases.aligned = Some(row.time);
        }
        if phases.released.is_none() && row.coop_phase == Some(CoopPhaseTag::Released) {
            phases.released = Some(row.time);
            release_row = Some(row);
        }
        if phases.done.is_none() && row.mode == ControllerMode::Done {
            phases.done = Some(row.time);
        }
        if let Some(code) = row.confirmed {
            let name = MotionClass::from_code(code)
                .map(|c| c.name().to_string())
                .unwrap_or_else(|| format!("class-{code}"));
            *gate_confirmations.entry(name).or_insert(0) += 1;
        }
    }

    let release_axial_gap_mm = release_row.and_then(|r| r.alignment.map(|a| a.3));
    let release_angular_error_deg = release_row.and_then(|r| r.alignment.map(|a| (a.0, a.1)));

    let released = phases.released.is_some();
    let reached_cooperation = phases.cooperation_started.is_some();
    let latencies_ok = command_latencies
        .iter()
        .all(|l| l.latency_s <= thresholds.max_latency_s);
    let errors_ok = trans_max <= thresholds.max_translational_error_mm
        && rot_max <= thresholds.max_rotational_error_deg;
    let release_ok = !thresholds.require_release || released;
    let passed = latencies_ok && errors_ok && release_ok;

    MetricsReport {
        scenario: scenario.to_string(),
        thresholds: *thresholds,
        gate_len,
        pose_rate_hz,
        command_latencies,
        max_latency_s,
        max_translational_error_mm: trans_max,
        mean_translational_error_mm: mean_trans,
        max_rotational_error_deg: rot_max,
        mean_rotational_error_deg: mean_rot,
        max_z_displacement_mm: max_dz,
        max_rotation_sweep_deg: max_sweep,
        phases,
        gate_confirmations,
        reached_cooperation,
        released,
        release_axial_gap_mm,
        release_angular_error_deg,
        passed,
    }
}

/// Human-readable summary.
pub fn summarize(report: &MetricsReport) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!("scenario: {}", report.scenario));
    line(format!(
        "result: {}",
        if report.passed { "PASS" } else { "FAIL" }
    ));
    line(format!(
        "gate length {} at {} Hz pose rate",
        report.gate_len, report.pose_rate_hz
    ));
    line("command latencies (s):".into());
    for l in &report.command_latencies {
        line(format!(
            "  segment {:>2} {:<5} onset {:>7.3} action {:>7.3} latency {:.3}",
            l.segment,
            l.class.name(),
            l.onset,
            l.first_action,
            l.latency_s
        ));
    }
    line(format!(
        "max latency: {} (bound {})",
        report
            .max_latency_s
            .map_or("n/a".into(), |v| format!("{v:.3} s")),
        report.thresholds.max_latency_s
    ));
    line(format!(
        "tracking error: max {:.3} mm / mean {:.3} mm (bound {:.1} mm), max {:.3} deg / mean {:.3} deg (bound {:.1} deg)",
        report.max_translational_error_mm,
        report.mean_translational_error_mm,
        report.thresholds.max_translational_error_mm,
        report.max_rotational_error_deg,
        report.mean_rotational_error_deg,
        report.thresholds.max_rotational_error_deg,
    ));
    line(format!(
        "cooperation sweep: dz {:.2} mm, rotation {:.2} deg",
        report.max_z_displacement_mm, report.max_rotation_sweep_deg
    ));
    let p = &report.phases;
    line(format!(
        "phases: pick {:?} teleop {:?} cooperation {:?} aligned {:?} released {:?} done {:?}",
        p.pick_completed,
        p.first_teleop_action,
        p.cooperation_started,
        p.aligned,
        p.released,
        p.done
    ));
    line(format!(
        "gate confirmations: {:?}",
        report.gate_confirmations
    ));
    if let Some(gap) = report.release_axial_gap_mm {
        line(format!("release gap: {gap:.3} mm"));
    }
    out
}

fn opt_to_field<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>, HarnessError>
where
    T::Err: std::fmt::Display,
{
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse::<T>()
            .map(Some)
            .map_err(|e| HarnessError::Trace(format!("bad field {s:?}: {e}")))
    }
}

fn mode_name(mode: ControllerMode) -> &'static str {
    match mode {
        ControllerMode::Teleop => "teleop",
        ControllerMode::Cooperation => "cooperation",
        ControllerMode::Done => "done",
    }
}

fn mode_from(s: &str) -> Result<ControllerMode, HarnessError> {
    match s {
        "teleop" => Ok(ControllerMode::Teleop),
        "cooperation" => Ok(ControllerMode::Cooperation),
        "done" => Ok(ControllerMode::Done),
        other => Err(HarnessError::Trace(format!("unknown mode {other:?}"))),
    }
}

fn phase_name(p: Option<CoopPhaseTag>) -> &'static str {
    match p {
        None => "",
        Some(CoopPhaseTag::Approaching) => "approaching",
        Some(CoopPhaseTag::Aligned) => "aligned",
        Some(CoopPhaseTag::Released) => "released",
    }
}

fn phase_from(s: &str) -> Result<Option<CoopPhaseTag>, HarnessError> {
    match s {
        "" => Ok(None),
        "approaching" => Ok(Some(CoopPhaseTag::Approaching)),
        "aligned" => Ok(Some(CoopPhaseTag::Aligned)),
        "released" => Ok(Some(CoopPhaseTag::Released)),
        other => Err(HarnessError::Trace(format!("unknown phase {other:?}"))),
    }
}

pub const HAND_TRACE_HEADER: &str = "time,segment,scripted_class,fx,fy,fz,ax,ay,az,decision,confirmed,mode,phase,tracking_loss,alpha_err_deg,beta_err_deg,lateral_mm,gap_mm";

pub fn write_hand_trace<W: Write>(mut w: W, rows: &[HandTraceRow]) -> Result<(), HarnessError> {
    writeln!(w, "{HAND_TRACE_HEADER}")?;
    for r in rows {
        let (a, b, lat, gap) = match r.alignment {
            Some((a, b, l, g)) => (a.to_string(), b.to_string(), l.to_string(), g.to_string()),
            None => (String::new(), String::new(), String::new(), String::new()),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.time,
            r.segment,
            r.scripted_class.map(|c| c.name()).unwrap_or(""),
            r.fingertip.x,
            r.fingertip.y,
            r.fingertip.z,
            r.finger_axis.x,
            r.finger_axis.y,
            r.finger_axis.z,
            opt_to_field(&r.decision),
            opt_to_field(&r.confirmed),
            mode_name(r.mode),
            phase_name(r.coop_phase),
            r.tracking_loss as u8,
            a,
            b,
            lat,
            gap,
        )?;
    }
    Ok(())
}

pub fn read_hand_trace<R: std::io::Read>(r: R) -> Result<Vec<HandTraceRow>, HarnessError> {
    let mut lines = std::io::BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Trace("empty hand trace".into()))??;
    if header != HAND_TRACE_HEADER {
        return Err(HarnessError::Trace("unexpected hand trace header".into()));
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 18 {
            return Err(HarnessError::Trace(format!(
                "expected 18 fields, got {}",
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64, HarnessError> {
            s.parse()
                .map_err(|e| HarnessError::Trace(format!("bad number {s:?}: {e}")))
        };
        let alignment = if f[14].is_empty() {
            None
        } else {
            Some((num(f[14])?, num(f[15])?, num(f[16])?, num(f[17])?))
        };
        rows.push(HandTraceRow {
            time: num(f[0])?,
            segment: f[1]
                .parse()
                .map_err(|e| HarnessError::Trace(format!("{e}")))?,
            scripted_class: if f[2].is_empty() {
                None
            } else {
                Some(MotionClass::from_name(f[2]).map_err(|e| HarnessError::Trace(e.to_string()))?)
            },
            fingertip: Vec3::new(num(f[3])?, num(f[4])?, num(f[5])?),
            finger_axis: Vec3::new(num(f[6])?, num(f[7])?, num(f[8])?),
            decision: parse_opt(f[9])?,
            confirmed: parse_opt(f[10])?,
            mode: mode_from(f[11])?,
            coop_phase: phase_from(f[12])?,
            tracking_loss: f[13] == "1",
            alignment,
        });
    }
    Ok(rows)
}

pub const COMMANDS_HEADER: &str = "id,issue_time,segment,kind,x,y,z,rx,ry,rz,gripper";

pub fn write_commands<W: Write>(mut w: W, commands: &[CommandRecord]) -> Result<(), HarnessError> {
    writeln!(w, "{COMMANDS_HEADER}")?;
    for c in commands {
        let kind = match c.kind {
            CommandKind::Pick => "pick".to_string(),
            CommandKind::Teleop(class) => format!("teleop:{}", class.name()),
            CommandKind::Coop => "coop".to_string(),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.id,
            c.issue_time,
            c.segment,
            kind,
            c.target_position.x,
            c.target_position.y,
            c.target_position.z,
            c.target_rotation.x,
            c.target_rotation.y,
            c.target_rotation.z,
            c.gripper,
        )?;
    }
    Ok(())
}

pub fn read_commands<R: std::io::Read>(r: R) -> Result<Vec<CommandRecord>, HarnessError> {
    let mut lines = std::io::BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Trace("empty commands".into()))??;
    if header != COMMANDS_HEADER {
        return Err(HarnessError::Trace("unexpected commands header".into()));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(HarnessError::Trace(format!(
                "expected 11 fields, got {}",
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64, HarnessError> {
            s.parse()
                .map_err(|e| HarnessError::Trace(format!("bad number {s:?}: {e}")))
        };
        let kind = match f[3] {
            "pick" => CommandKind::Pick,
            "coop" => CommandKind::Coop,
            other => match other.strip_prefix("teleop:") {
                Some(name) => CommandKind::Teleop(
                    MotionClass::from_name(name).map_err(|e| HarnessError::Trace(e.to_string()))?,
                ),
                None => return Err(HarnessError::Trace(format!("unknown kind {other:?}"))),
            },
        };
        out.push(CommandRecord {
            id: f[0]
                .parse()
                .map_err(|e| HarnessError::Trace(format!("{e}")))?,
            issue_time: num(f[1])?,
            segment: f[2]
                .parse()
                .map_err(|e| HarnessError::Trace(format!("{e}")))?,
            kind,
            target_position: Vec3::new(num(f[4])?, num(f[5])?, num(f[6])?),
            target_rotation: Vec3::new(num(f[7])?, num(f[8])?, num(f[9])?),
            gripper: f[10]
                .parse()
                .map_err(|e| HarnessError::Trace(format!("{e}")))?,
        });
    }
    Ok(out)
}

pub const TCP_TRACE_HEADER: &str = "tick,time,x,y,z,rx,ry,rz,gripper,command_id";

pub fn write_tcp_trace<W: Write>(mut w: W, rows: &[TcpTraceRow]) -> Result<(), HarnessError> {
    writeln!(w, "{TCP_TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.tick,
            r.time,
            r.position.x,
            r.position.y,
            r.position.z,
            r.rotation.x,
            r.rotation.y,
            r.rotation.z,
            if r.gripper_closed { "closed" } else { "open" },
            r.command_id,
        )?;
    }
    Ok(())
}

pub fn read_tcp_trace<R: std::io::Read>(r: R) -> Result<Vec<TcpTraceRow>, HarnessError> {
    let mut lines = std::io::BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Trace("empty tcp trace".into()))??;
    if header != TCP_TRACE_HEADER {
        return Err(HarnessError::Trace("unexpected tcp trace header".into()));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(HarnessError::Trace(format!(
                "expected 10 fields, got {}",
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64, HarnessError> {
            s.parse()
                .map_err(|e| HarnessError::Trace(format!("bad number {s:?}: {e}")))
        };
        out.push(TcpTraceRow {
            tick: f[0]
                .parse()
                .map_err(|e| HarnessError::Trace(format!("{e}")))?,
            time: num(f[1])?,
            position: Vec3::new(num(f[2])?, num(f[3])?, num(f[4])?),
            rotation: Vec3::new(num(f[5])?, num(f[6])?, num(f[7])?),
            gripper_closed: f[8] == "closed",
            command_id: f[9]
                .parse()
                .map_err(|e| HarnessError::Trace(format!("{e}")))?,
        });
    }
    Ok(out)
}

pub fn save_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> (Vec<HandTraceRow>, Vec<CommandRecord>, Vec<TcpTraceRow>) {
        let hand = vec![
            HandTraceRow {
                time: 0.0,
                segment: 0,
                scripted_class: Some(MotionClass::Come),
                fingertip: Vec3::new(0.1, 0.2, 0.3),
                finger_axis: Vec3::new(0.0, -1.0, 0.0),
                decision: Some(1),
                confirmed: None,
                mode: ControllerMode::Teleop,
                coop_phase: None,
                tracking_loss: false,
                alignment: None,
            },
            HandTraceRow {
                time: 0.2,
                segment: 0,
                scripted_class: Some(MotionClass::Come),
                fingertip: Vec3::new(0.1, 0.2, 0.3),
                finger_axis: Vec3::new(0.0, -1.0, 0.0),
                decision: Some(1),
                confirmed: Some(1),
                mode: ControllerMode::Teleop,
                coop_phase: None,
                tracking_loss: false,
                alignment: Some((1.5, 0.25, 0.75, 48.0)),
            },
        ];
        let commands = vec![CommandRecord {
            id: 1,
            issue_time: 0.2,
            segment: 0,
            kind: CommandKind::Teleop(MotionClass::Come),
            target_position: Vec3::new(0.0, 0.22, 0.3),
            target_rotation: Vec3::new(0.0, 0.0, 0.1),
            gripper: 0,
        }];
        let tcp = vec![
            TcpTraceRow {
                tick: 0,
                time: 0.002,
                position: Vec3::ZERO,
                rotation: Vec3::ZERO,
                gripper_closed: true,
                command_id: 0,
            },
            TcpTraceRow {
                tick: 101,
                time: 0.204,
                position: Vec3::new(0.0, 0.2195, 0.3),
                rotation: Vec3::new(0.0, 0.0, 0.1),
                gripper_closed: true,
                command_id: 1,
            },
        ];
        (hand, commands, tcp)
    }

    #[test]
    fn trace_files_roundtrip_exactly() {
        let (hand, commands, tcp) = sample_rows();

        let mut buf = Vec::new();
        write_hand_trace(&mut buf, &hand).unwrap();
        assert_eq!(read_hand_trace(buf.as_slice()).unwrap(), hand);

        let mut buf = Vec::new();
        write_commands(&mut buf, &commands).unwrap();
        assert_eq!(read_commands(buf.as_slice()).unwrap(), commands);

        let mut buf = Vec::new();
        write_tcp_trace(&mut buf, &tcp).unwrap();
        assert_eq!(read_tcp_trace(buf.as_slice()).unwrap(), tcp);
    }

    #[test]
    fn latency_is_onset_to_first_derived_tick() {
        let (hand, commands, tcp) = sample_rows();
        let report = compute_metrics(
            "test",
            &Thresholds {
                require_release: false,
                ..Default::default()
            },
            5,
            30.0,
            &hand,
            &commands,
            &tcp,
        );
        assert_eq!(report.command_latencies.len(), 1);
        let l = &report.command_latencies[0];
        assert_eq!(l.class, MotionClass::Come);
        assert!((l.latency_s - 0.204).abs() < 1e-12);
        assert!(report.passed);
        assert_eq!(report.gate_confirmations["come"], 1);
    }

    #[test]
    fn empty_traces_give_empty_metrics() {
        let report = compute_metrics(
            "empty",
            &Thresholds {
                require_release: false,
                ..Default::default()
            },
            5,
            30.0,
            &[],
            &[],
            &[],
        );
        assert!(report.command_latencies.is_empty());
        assert_eq!(report.max_latency_s, None);
        assert_eq!(report.max_translational_error_mm, 0.0);
        assert!(report.passed);
    }
}
