use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shearflow::{Physics, SolverOptions};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileSection,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub trace: TraceSection,
    #[serde(default)]
    pub census: CensusSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    /// Velocity `U(x2)` in the profile expression language.
    pub expr: String,
    /// Depth, so the fluid occupies `-h <= x2 <= 0`.
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub g: f64,
    pub sigma: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self { g: 1.0, sigma: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub rtol: f64,
    pub atol: f64,
    pub r_loc_factor: f64,
    pub series_terms: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self { rtol: d.rtol, atol: d.atol, r_loc_factor: d.r_loc_factor, series_terms: d.series_terms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSection {
    pub k_min: f64,
    pub k_max: f64,
    pub step_max: f64,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self { k_min: 0.0, k_max: 6.0, step_max: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CensusSection {
    pub k_list: Vec<f64>,
}

impl Default for CensusSection {
    fn default() -> Self {
        Self { k_list: vec![0.5, 1.0, 2.0, 4.0] }
    }
}

/// Grid of `c` values for the `scan` subcommand, at each `census.k_list` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub re_points: usize,
    pub im_points: usize,
    /// Largest `Im c` sampled, as a multiple of `Umax - Umin`.
    pub im_extent: f64,
    /// Padding on each side of the range of `U`, as a multiple of `Umax - Umin`.
    pub re_padding: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self { re_points: 41, im_points: 11, im_extent: 0.5, re_padding: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), format: OutputFormat::Csv }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// The config with every default written out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("profile.h", self.profile.h),
            ("physics.g", self.physics.g),
            ("solver.rtol", self.solver.rtol),
            ("solver.atol", self.solver.atol),
            ("solver.r_loc_factor", self.solver.r_loc_factor),
            ("trace.step_max", self.trace.step_max),
            ("scan.im_extent", self.scan.im_extent),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::Invalid(format!("{name} must be positive, got {value}")));
            }
        }
        let non_negative = [
            ("physics.sigma", self.physics.sigma),
            ("trace.k_min", self.trace.k_min),
            ("scan.re_padding", self.scan.re_padding),
        ];
        for (name, value) in non_negative {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ConfigError::Invalid(format!("{name} must be non-negative, got {value}")));
            }
        }
        if self.solver.series_terms < 2 {
            return Err(ConfigError::Invalid("solver.series_terms must be at least 2".into()));
        }
        if self.trace.k_max.partial_cmp(&self.trace.k_min) != Some(std::cmp::Ordering::Greater)
            || !self.trace.k_max.is_finite()
        {
            return Err(ConfigError::Invalid(format!(
                "trace range [{}, {}] is empty",
                self.trace.k_min, self.trace.k_max
            )));
        }
        if self.census.k_list.is_empty() {
            return Err(ConfigError::Invalid("census.k_list is empty".into()));
        }
        if let Some(k) = self.census.k_list.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
            return Err(ConfigError::Invalid(format!("census.k_list entries must be non-negative, got {k}")));
        }
        if self.scan.re_points < 2 || self.scan.im_points < 1 {
            return Err(ConfigError::Invalid("scan needs at least 2 real and 1 imaginary points".into()));
        }
        Ok(())
    }

    pub fn physics(&self) -> Physics {
        Physics { g: self.physics.g, sigma: self.physics.sigma }
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            rtol: self.solver.rtol,
            atol: self.solver.atol,
            r_loc_factor: self.solver.r_loc_factor,
            series_terms: self.solver.series_terms,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[profile]\nexpr = \"x2\"\nh = 1.0\n";

    #[test]
    fn defaults_fill_missing_sections() {
        let config = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(config.physics.g, 1.0);
        assert_eq!(config.solver.rtol, 1e-10);
        assert_eq!(config.output.format, OutputFormat::Csv);
    }

    #[test]
    fn effective_config_round_trips() {
        let config = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(RunConfig::from_toml(&config.to_toml()).unwrap(), config);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}[physics]\ngravity = 2.0\n");
        assert!(matches!(RunConfig::from_toml(&text), Err(ConfigError::Syntax(_))));
    }

    #[test]
    fn bad_values_are_rejected() {
        for extra in ["[solver]\nrtol = -1.0\n", "[trace]\nk_min = 2.0\nk_max = 1.0\n", "[census]\nk_list = []\n"] {
            let text = format!("{MINIMAL}{extra}");
            assert!(matches!(RunConfig::from_toml(&text), Err(ConfigError::Invalid(_))), "{extra}");
        }
    }
}
