//! CSV log schemas.
//!
//! Sensor logs use the fixed header
//! `t,gx,gy,gz,ax,ay,az,mx,my,mz,gps_speed,truth_roll,truth_pitch,truth_yaw`
//! with units s, rad/s, m/s^2, gauss, m/s and rad; GPS and truth cells
//! are empty when absent. Values are written with Rust's shortest
//! round-trip float formatting, so emit -> parse is lossless and
//! identical inputs produce byte-identical files.

use ahrs_core::{EulerAngles, SensorFrame, Vec3};
use ahrs_sim::TruthSample;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

pub const SENSOR_LOG_HEADER: &str =
    "t,gx,gy,gz,ax,ay,az,mx,my,mz,gps_speed,truth_roll,truth_pitch,truth_yaw";

pub const REPLAY_HEADER: &str =
    "t,roll,pitch,yaw,bias_x,bias_y,bias_z,correction_applied,skip_reason";

#[derive(Debug)]
pub struct CsvError {
    pub line: usize,
    pub message: String,
}

impl CsvError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for CsvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for CsvError {}

/// One parsed log row: the sensor frame plus optional truth angles.
#[derive(Debug, Clone, Copy)]
pub struct LogRow {
    pub frame: SensorFrame,
    pub truth: Option<EulerAngles>,
    pub line: usize,
}

/// Parse a sensor log. `gps_age` is reconstructed from the delivery
/// pattern: zero on rows carrying a speed, growing in between.
pub fn parse_sensor_log(text: &str) -> Result<Vec<LogRow>, CsvError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CsvError::at(1, "empty log file".to_string()))?;
    if header.trim() != SENSOR_LOG_HEADER {
        return Err(CsvError::at(
            1,
            format!("unexpected header; want `{SENSOR_LOG_HEADER}`"),
        ));
    }

    let mut rows = Vec::new();
    let mut last_delivery: Option<f64> = None;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 14 {
            return Err(CsvError::at(
                line_no,
                format!("expected 14 fields, found {}", fields.len()),
            ));
        }
        let num = |i: usize| -> Result<f64, CsvError> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| CsvError::at(line_no, format!("field {} `{}` is not a number", i + 1, fields[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>, CsvError> {
            if fields[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };

        let t = num(0)?;
        let gps_speed = opt(10)?;
        if gps_speed.is_some() {
            last_delivery = Some(t);
        }
        let gps_age = match last_delivery {
            Some(at) => t - at,
            None => t + 1.0,
        };
        let truth = match (opt(11)?, opt(12)?, opt(13)?) {
            (Some(roll), Some(pitch), Some(yaw)) => Some(EulerAngles::new(roll, pitch, yaw)),
            (None, None, None) => None,
            _ => {
                return Err(CsvError::at(
                    line_no,
                    "truth columns must be all present or all empty",
                ));
            }
        };
        rows.push(LogRow {
            frame: SensorFrame {
                t,
                gyro: Vec3::new(num(1)?, num(2)?, num(3)?),
                accel: Vec3::new(num(4)?, num(5)?, num(6)?),
                mag: Vec3::new(num(7)?, num(8)?, num(9)?),
                gps_speed,
                gps_age,
            },
            truth,
            line: line_no,
        });
    }
    if rows.is_empty() {
        return Err(CsvError::at(1, "log contains no data rows".to_string()));
    }
    Ok(rows)
}

/// Render a combined truth + corrupted-sensor log.
pub fn render_sensor_log(truth: &[TruthSample], frames: &[SensorFrame]) -> String {
    let mut out = String::with_capacity(frames.len() * 96);
    out.push_str(SENSOR_LOG_HEADER);
    out.push('\n');
    for (sample, frame) in truth.iter().zip(frames.iter()) {
        let e = sample.attitude.to_euler();
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},",
            frame.t,
            frame.gyro.x,
            frame.gyro.y,
            frame.gyro.z,
            frame.accel.x,
            frame.accel.y,
            frame.accel.z,
            frame.mag.x,
            frame.mag.y,
            frame.mag.z,
        );
        if let Some(u) = frame.gps_speed {
            let _ = write!(out, "{u}");
        }
        let _ = writeln!(out, ",{},{},{}", e.roll, e.pitch, e.yaw);
    }
    out
}

/// One replay output row.
pub fn render_replay_row(
    out: &mut String,
    t: f64,
    euler: EulerAngles,
    bias: Vec3,
    corrected: bool,
    skip_reason: Option<&str>,
) {
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{}",
        t,
        euler.roll,
        euler.pitch,
        euler.yaw,
        bias.x,
        bias.y,
        bias.z,
        u8::from(corrected),
        skip_reason.unwrap_or(""),
    );
}

pub fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)
}
