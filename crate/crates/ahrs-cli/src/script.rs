//! Maneuver script files: one maneuver per line, `#` comments.
//!
//! ```text
//! steady        duration_s=70  speed_mps=20
//! turn          duration_s=20  yaw_rate_dps=-6.1  bank_deg=-12
//! gust          duration_s=30  rms_dps=1.5
//! pitch_doublet duration_s=12  amplitude_deg=4
//! ```

use ahrs_sim::Maneuver;
use std::fmt;

#[derive(Debug)]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ScriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ScriptError {}

fn err(line: usize, message: impl Into<String>) -> ScriptError {
    ScriptError {
        line,
        message: message.into(),
    }
}

pub fn parse_script(text: &str) -> Result<Vec<Maneuver>, ScriptError> {
    let mut script = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut tokens = line.split_whitespace();
        let Some(kind) = tokens.next() else { continue };

        let mut fields = Fields::default();
        for token in tokens {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected key=value, got `{token}`")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| err(line_no, format!("`{value}` is not a number")))?;
            fields.set(key, value, line_no)?;
        }

        let duration_s = fields
            .duration_s
            .ok_or_else(|| err(line_no, "missing duration_s"))?;
        if duration_s <= 0.0 {
            return Err(err(line_no, "duration_s must be positive"));
        }
        let maneuver = match kind {
            "steady" => Maneuver::SteadyFlight {
                duration_s,
                speed_mps: fields
                    .speed_mps
                    .ok_or_else(|| err(line_no, "steady needs speed_mps"))?,
            },
            "turn" => Maneuver::CoordinatedTurn {
                duration_s,
                yaw_rate_rps: fields
                    .yaw_rate_dps
                    .ok_or_else(|| err(line_no, "turn needs yaw_rate_dps"))?
                    .to_radians(),
                bank_rad: fields
                    .bank_deg
                    .ok_or_else(|| err(line_no, "turn needs bank_deg"))?
                    .to_radians(),
            },
            "pitch_doublet" => Maneuver::PitchDoublet {
                duration_s,
                amplitude_rad: fields
                    .amplitude_deg
                    .ok_or_else(|| err(line_no, "pitch_doublet needs amplitude_deg"))?
                    .to_radians(),
            },
            "gust" => Maneuver::Gust {
                duration_s,
                rms_rps: fields
                    .rms_dps
                    .ok_or_else(|| err(line_no, "gust needs rms_dps"))?
                    .to_radians(),
            },
            other => return Err(err(line_no, format!("unknown maneuver `{other}`"))),
        };
        script.push(maneuver);
    }
    if script.is_empty() {
        return Err(err(1, "script contains no maneuvers"));
    }
    Ok(script)
}

#[derive(Default)]
struct Fields {
    duration_s: Option<f64>,
    speed_mps: Option<f64>,
    yaw_rate_dps: Option<f64>,
    bank_deg: Option<f64>,
    amplitude_deg: Option<f64>,
    rms_dps: Option<f64>,
}

impl Fields {
    fn set(&mut self, key: &str, value: f64, line: usize) -> Result<(), ScriptError> {
        let slot = match key {
            "duration_s" => &mut self.duration_s,
            "speed_mps" => &mut self.speed_mps,
            "yaw_rate_dps" => &mut self.yaw_rate_dps,
            "bank_deg" => &mut self.bank_deg,
            "amplitude_deg" => &mut self.amplitude_deg,
            "rms_dps" => &mut self.rms_dps,
            other => return Err(err(line, format!("unknown field `{other}`"))),
        };
        if slot.is_some() {
            return Err(err(line, format!("duplicate field `{key}`")));
        }
        *slot = Some(value);
        Ok(())
    }
}

/// Render the canonical script in this file format.
#[cfg(test)]
pub fn render_canonical() -> String {
    let mut out = String::from("# canonical evaluation flight\n");
    for m in ahrs_sim::canonical_flight_script() {
        match m {
            Maneuver::SteadyFlight {
                duration_s,
                speed_mps,
            } => out.push_str(&format!("steady duration_s={duration_s} speed_mps={speed_mps}\n")),
            Maneuver::CoordinatedTurn {
                duration_s,
                yaw_rate_rps,
                bank_rad,
            } => out.push_str(&format!(
                "turn duration_s={duration_s} yaw_rate_dps={} bank_deg={}\n",
                yaw_rate_rps.to_degrees(),
                bank_rad.to_degrees()
            )),
            Maneuver::PitchDoublet {
                duration_s,
                amplitude_rad,
            } => out.push_str(&format!(
                "pitch_doublet duration_s={duration_s} amplitude_deg={}\n",
                amplitude_rad.to_degrees()
            )),
            Maneuver::Gust {
                duration_s,
                rms_rps,
            } => out.push_str(&format!(
                "gust duration_s={duration_s} rms_dps={}\n",
                rms_rps.to_degrees()
            )),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_maneuver_kinds() {
        let text = "\
# comment
steady duration_s=10 speed_mps=20
turn duration_s=5 yaw_rate_dps=-6 bank_deg=-12
pitch_doublet duration_s=12 amplitude_deg=4
gust duration_s=30 rms_dps=1.5
";
        let script = parse_script(text).unwrap();
        assert_eq!(script.len(), 4);
        assert!(matches!(script[0], Maneuver::SteadyFlight { .. }));
        assert!(matches!(script[3], Maneuver::Gust { .. }));
    }

    #[test]
    fn rejects_empty_unknown_and_duplicate() {
        assert!(parse_script("# nothing\n").is_err());
        assert!(parse_script("loop duration_s=5\n").is_err());
        assert!(parse_script("steady duration_s=5 duration_s=6 speed_mps=20\n").is_err());
        assert!(parse_script("steady duration_s=-2 speed_mps=20\n").is_err());
    }

    #[test]
    fn canonical_round_trips_through_the_format() {
        let script = parse_script(&render_canonical()).unwrap();
        assert_eq!(script.len(), ahrs_sim::canonical_flight_script().len());
    }
}
