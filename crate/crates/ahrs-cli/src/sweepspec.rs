//! Sweep specification files: one sweep per line.
//!
//! ```text
//! channel=yaw_rate      kind=bias  upper_dps=20     trials=10
//! channel=accelerometer kind=noise upper_mps2=1.5   trials=10
//! channel=magnetometer  kind=bias  upper_mgauss=120 trials=10
//! channel=gps_speed     kind=bias  upper_mps=8      trials=10
//! ```
//!
//! The upper-bound key carries the channel's display unit and is
//! validated against the channel, so a magnitude can never be fed into
//! the wrong scale.

use ahrs_sim::{SweepSpec, SweptChannel, SweptKind};
use std::fmt;

#[derive(Debug)]
pub struct SpecError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for SpecError {}

fn err(line: usize, message: impl Into<String>) -> SpecError {
    SpecError {
        line,
        message: message.into(),
    }
}

/// One parsed sweep request, still in display units where relevant.
#[derive(Debug, Clone, Copy)]
pub struct SweepRequest {
    pub channel: SweptChannel,
    pub kind: SweptKind,
    /// Upper bound in channel-native SI units.
    pub upper_si: f64,
    pub trials: u32,
}

impl SweepRequest {
    pub fn to_spec(self, seed: u64) -> SweepSpec {
        SweepSpec::new(self.channel, self.kind, self.upper_si, self.trials, seed)
    }
}

/// Display unit name and SI conversion for a channel's magnitudes.
pub fn channel_unit(channel: SweptChannel) -> (&'static str, f64) {
    match channel {
        SweptChannel::RollRate | SweptChannel::PitchRate | SweptChannel::YawRate => {
            ("dps", std::f64::consts::PI / 180.0)
        }
        SweptChannel::Accelerometer => ("mps2", 1.0),
        SweptChannel::Magnetometer => ("mgauss", 1e-3),
        SweptChannel::GpsSpeed => ("mps", 1.0),
    }
}

pub fn parse_sweep_spec(text: &str) -> Result<Vec<SweepRequest>, SpecError> {
    let mut requests = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }

        let mut channel = None;
        let mut kind = None;
        let mut upper: Option<(String, f64)> = None;
        let mut trials: u32 = 10;
        for token in line.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected key=value, got `{token}`")))?;
            match key {
                "channel" => {
                    channel = Some(match value {
                        "roll_rate" => SweptChannel::RollRate,
                        "pitch_rate" => SweptChannel::PitchRate,
                        "yaw_rate" => SweptChannel::YawRate,
                        "accelerometer" => SweptChannel::Accelerometer,
                        "magnetometer" => SweptChannel::Magnetometer,
                        "gps_speed" => SweptChannel::GpsSpeed,
                        other => return Err(err(line_no, format!("unknown channel `{other}`"))),
                    });
                }
                "kind" => {
                    kind = Some(match value {
                        "bias" => SweptKind::Bias,
                        "noise" => SweptKind::Noise,
                        other => return Err(err(line_no, format!("unknown kind `{other}`"))),
                    });
                }
                "trials" => {
                    trials = value
                        .parse()
                        .map_err(|_| err(line_no, format!("`{value}` is not a trial count")))?;
                    if trials == 0 {
                        return Err(err(line_no, "trials must be >= 1"));
                    }
                }
                key if key.starts_with("upper_") => {
                    let magnitude: f64 = value
                        .parse()
                        .map_err(|_| err(line_no, format!("`{value}` is not a number")))?;
                    if magnitude <= 0.0 {
                        return Err(err(line_no, "upper bound must be positive"));
                    }
                    upper = Some((key["upper_".len()..].to_string(), magnitude));
                }
                other => return Err(err(line_no, format!("unknown field `{other}`"))),
            }
        }

        let channel = channel.ok_or_else(|| err(line_no, "missing channel"))?;
        let kind = kind.ok_or_else(|| err(line_no, "missing kind"))?;
        let (unit, scale) = channel_unit(channel);
        let (given_unit, magnitude) =
            upper.ok_or_else(|| err(line_no, format!("missing upper_{unit}")))?;
        if given_unit != unit {
            return Err(err(
                line_no,
                format!("channel `{channel}` takes upper_{unit}, not upper_{given_unit}"),
            ));
        }
        requests.push(SweepRequest {
            channel,
            kind,
            upper_si: magnitude * scale,
            trials,
        });
    }
    if requests.is_empty() {
        return Err(err(1, "sweep spec contains no sweeps"));
    }
    Ok(requests)
}
