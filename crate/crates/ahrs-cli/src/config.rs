//! Sectioned key-value configuration files.
//!
//! The format is deliberately strict: `[section]` headers, one
//! `key = value` per line, `#` comments, units spelled out in key names
//! (`gyro_bias_dps`, `mag_field_gauss`), and *unknown keys are errors* —
//! a silently ignored typo in a noise magnitude is exactly the kind of
//! mistake this tool exists to catch.

use ahrs_core::{
    EstimatorKind, MagneticReference, NoiseCovariances, PipelineConfig, Vec3,
};
use ahrs_sim::{CorruptionConfig, EvalConfig, MagAnomaly, WorldConfig};
use std::fmt;
use std::path::Path;

/// Everything a run needs: estimator configuration, world references,
/// corruption model and error-evaluation settings.
#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub world: WorldConfig,
    pub corruption: CorruptionConfig,
    pub eval: EvalConfig,
    /// Set when `[corruption] preset = typical_mems` was used: a later
    /// `--seed` override re-draws the bias pattern under the new seed.
    pub typical_preset: bool,
}

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

impl Default for RunConfig {
    fn default() -> Self {
        let world = WorldConfig::default();
        let mag_ref = MagneticReference::new(world.mag_ref).expect("default field is nonzero");
        Self {
            pipeline: PipelineConfig::new(EstimatorKind::Ukf, mag_ref),
            world,
            corruption: CorruptionConfig::pristine(0),
            eval: EvalConfig::default(),
            typical_preset: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut noise = NoiseSettings::default();
        let mut section = String::new();
        let mut anomaly_window: Option<(f64, f64)> = None;
        let mut anomaly_gain: Option<f64> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line_no, "unterminated section header"))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line_no, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            apply_key(
                &mut cfg,
                &mut noise,
                &mut anomaly_window,
                &mut anomaly_gain,
                &section,
                key,
                value,
                line_no,
            )?;
        }

        cfg.pipeline.noise = NoiseCovariances::split(
            noise.process_quaternion,
            noise.process_bias,
            noise.observation_tilt,
            noise.observation_heading,
        );
        match (anomaly_window, anomaly_gain) {
            (Some((start_s, end_s)), gain) => {
                cfg.corruption.mag_anomaly = Some(MagAnomaly {
                    start_s,
                    end_s,
                    gain: gain.unwrap_or(1.5),
                });
            }
            (None, Some(_)) => {
                return Err(ConfigError::general(
                    "mag_anomaly_gain given without mag_anomaly_window_s",
                ));
            }
            (None, None) => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.pipeline;
        if p.params.validate().is_err() {
            return Err(ConfigError::general(
                "sigma-point parameters invalid: need 0 < alpha <= 1 and L + lambda > 0",
            ));
        }
        if p.gravity_mps2 <= 0.0 {
            return Err(ConfigError::general("gravity must be positive"));
        }
        if !(p.lowpass_cutoff_hz > 0.0 && p.lowpass_cutoff_hz < p.sample_rate_hz / 2.0) {
            return Err(ConfigError::general(
                "lowpass cutoff must lie in (0, sample_rate / 2)",
            ));
        }
        if p.noise.observation.diagonal().iter().any(|v| *v <= 0.0) {
            return Err(ConfigError::general(
                "observation noise variances must be positive",
            ));
        }
        let c = &self.corruption;
        if c.gyro_sigma_rps < 0.0
            || c.accel_sigma_mps2 < 0.0
            || c.mag_sigma_gauss < 0.0
            || c.gps_sigma_mps < 0.0
        {
            return Err(ConfigError::general("noise sigmas must be >= 0"));
        }
        if c.gps_delay_s < 0.0 {
            return Err(ConfigError::general("gps delay must be >= 0"));
        }
        if self.world.dt <= 0.0 {
            return Err(ConfigError::general("sample rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct NoiseSettings {
    process_quaternion: f64,
    process_bias: f64,
    observation_tilt: f64,
    observation_heading: f64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        let defaults = NoiseCovariances::default();
        Self {
            process_quaternion: defaults.process[(0, 0)],
            process_bias: defaults.process[(4, 4)],
            observation_tilt: defaults.observation[(0, 0)],
            observation_heading: defaults.observation[(2, 2)],
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

fn parse_f64(value: &str, line: usize) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .map_err(|_| ConfigError::at(line, format!("`{value}` is not a number")))
}

fn parse_vec3(value: &str, line: usize) -> Result<Vec3, ConfigError> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(ConfigError::at(
            line,
            format!("`{value}` is not three space-separated numbers"),
        ));
    }
    Ok(Vec3::new(
        parse_f64(parts[0], line)?,
        parse_f64(parts[1], line)?,
        parse_f64(parts[2], line)?,
    ))
}

#[allow(clippy::too_many_arguments)]
fn apply_key(
    cfg: &mut RunConfig,
    noise: &mut NoiseSettings,
    anomaly_window: &mut Option<(f64, f64)>,
    anomaly_gain: &mut Option<f64>,
    section: &str,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ConfigError> {
    let d = std::f64::consts::PI / 180.0;
    match (section, key) {
        ("estimator", "kind") => {
            cfg.pipeline.estimator = match value {
                "ukf" => EstimatorKind::Ukf,
                "ekf" => EstimatorKind::Ekf,
                other => {
                    return Err(ConfigError::at(
                        line,
                        format!("estimator kind must be `ukf` or `ekf`, got `{other}`"),
                    ));
                }
            };
        }
        ("sigma_points", "alpha") => cfg.pipeline.params.alpha = parse_f64(value, line)?,
        ("sigma_points", "beta") => cfg.pipeline.params.beta = parse_f64(value, line)?,
        ("sigma_points", "kappa") => cfg.pipeline.params.kappa = parse_f64(value, line)?,
        ("noise", "process_quaternion") => noise.process_quaternion = parse_f64(value, line)?,
        ("noise", "process_bias") => noise.process_bias = parse_f64(value, line)?,
        ("noise", "observation_tilt") => noise.observation_tilt = parse_f64(value, line)?,
        ("noise", "observation_heading") => noise.observation_heading = parse_f64(value, line)?,
        ("noise", "mag_primary_scale") => {
            cfg.pipeline.mag_primary_r_scale = parse_f64(value, line)?
        }
        ("reference", "mag_field_gauss") => {
            let field = parse_vec3(value, line)?;
            cfg.world.mag_ref = field;
            cfg.pipeline.mag_ref = MagneticReference::new(field)
                .map_err(|_| ConfigError::at(line, "magnetic reference must be nonzero"))?;
        }
        ("reference", "gravity_mps2") => {
            let g = parse_f64(value, line)?;
            cfg.world.gravity = g;
            cfg.pipeline.gravity_mps2 = g;
        }
        ("pipeline", "lowpass_cutoff_hz") => {
            cfg.pipeline.lowpass_cutoff_hz = parse_f64(value, line)?
        }
        ("pipeline", "sample_rate_hz") => {
            let rate = parse_f64(value, line)?;
            if rate <= 0.0 {
                return Err(ConfigError::at(line, "sample rate must be positive"));
            }
            cfg.pipeline.sample_rate_hz = rate;
            cfg.world.dt = 1.0 / rate;
        }
        ("pipeline", "gps_max_age_s") => cfg.pipeline.gps_max_age_s = parse_f64(value, line)?,
        ("pipeline", "gps_smoothing_tau_s") => {
            cfg.pipeline.gps_smoothing_tau_s = parse_f64(value, line)?
        }
        ("init", "quaternion_variance") => {
            cfg.pipeline.initial_quat_var = parse_f64(value, line)?
        }
        ("init", "bias_std_dps") => {
            cfg.pipeline.initial_bias_std_rps = parse_f64(value, line)? * d
        }
        ("eval", "settle_s") => cfg.eval.settle_s = parse_f64(value, line)?,
        ("eval", "divergence_deg") => cfg.eval.divergence_deg = parse_f64(value, line)?,
        ("corruption", "preset") => match value {
            "pristine" => {
                let seed = cfg.corruption.seed;
                cfg.corruption = CorruptionConfig::pristine(seed);
                cfg.typical_preset = false;
            }
            "typical_mems" => {
                let seed = cfg.corruption.seed;
                cfg.corruption = CorruptionConfig::typical_mems(seed);
                cfg.typical_preset = true;
            }
            other => {
                return Err(ConfigError::at(
                    line,
                    format!("corruption preset must be `pristine` or `typical_mems`, got `{other}`"),
                ));
            }
        },
        ("corruption", "seed") => {
            let seed = value
                .parse::<u64>()
                .map_err(|_| ConfigError::at(line, format!("`{value}` is not a seed")))?;
            if cfg.typical_preset {
                let anomaly = cfg.corruption.mag_anomaly;
                cfg.corruption = CorruptionConfig::typical_mems(seed);
                cfg.corruption.mag_anomaly = anomaly;
            } else {
                cfg.corruption = reseed(&cfg.corruption, seed);
            }
        }
        ("corruption", "gyro_bias_dps") => {
            cfg.corruption.gyro_bias_rps = parse_vec3(value, line)? * d
        }
        ("corruption", "gyro_noise_dps") => {
            cfg.corruption.gyro_sigma_rps = parse_f64(value, line)? * d
        }
        ("corruption", "accel_bias_mps2") => {
            cfg.corruption.accel_bias_mps2 = parse_vec3(value, line)?
        }
        ("corruption", "accel_noise_mps2") => {
            cfg.corruption.accel_sigma_mps2 = parse_f64(value, line)?
        }
        ("corruption", "accel_noise_color_hz") => {
            cfg.corruption.accel_color_hz = parse_f64(value, line)?
        }
        ("corruption", "mag_bias_mgauss") => {
            cfg.corruption.mag_bias_gauss = parse_vec3(value, line)? * 1e-3
        }
        ("corruption", "mag_noise_mgauss") => {
            cfg.corruption.mag_sigma_gauss = parse_f64(value, line)? * 1e-3
        }
        ("corruption", "gps_bias_mps") => cfg.corruption.gps_bias_mps = parse_f64(value, line)?,
        ("corruption", "gps_noise_mps") => cfg.corruption.gps_sigma_mps = parse_f64(value, line)?,
        ("corruption", "gps_delay_s") => cfg.corruption.gps_delay_s = parse_f64(value, line)?,
        ("corruption", "mag_anomaly_window_s") => {
            let parts: Vec<&str> = value.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(ConfigError::at(line, "expected `start end` in seconds"));
            }
            *anomaly_window = Some((parse_f64(parts[0], line)?, parse_f64(parts[1], line)?));
        }
        ("corruption", "mag_anomaly_gain") => *anomaly_gain = Some(parse_f64(value, line)?),
        ("", key) => {
            return Err(ConfigError::at(
                line,
                format!("key `{key}` appears before any [section] header"),
            ));
        }
        (section, key) => {
            return Err(ConfigError::at(
                line,
                format!("unknown key `{key}` in section [{section}]"),
            ));
        }
    }
    Ok(())
}

/// Rebuild a corruption config under a new seed. Presets re-draw their
/// bias patterns; explicitly set values are kept.
fn reseed(current: &CorruptionConfig, seed: u64) -> CorruptionConfig {
    let mut next = *current;
    next.seed = seed;
    next
}

/// Apply a `--seed` override on top of the parsed configuration: the
/// draw-based preset is re-drawn under the new seed if it was active.
pub fn override_seed(cfg: &mut RunConfig, seed: u64) {
    if cfg.typical_preset {
        let anomaly = cfg.corruption.mag_anomaly;
        cfg.corruption = CorruptionConfig::typical_mems(seed);
        cfg.corruption.mag_anomaly = anomaly;
    } else {
        cfg.corruption.seed = seed;
    }
}
