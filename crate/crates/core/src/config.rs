//! Flat `key=value` configuration shared by every module.
//!
//! Keys are namespaced by module (`core.escapeRadius`, `rays.gridFactor`,
//! ...). Blank lines and lines starting with `#` are ignored. Unknown keys
//! are rejected so that typos surface instead of silently keeping defaults.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key=value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value {value:?} for `{key}`")]
    InvalidValue { key: String, value: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Escape/attraction parameters for the singular orbit classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    pub escape_radius: f64,
    pub escape_steps: usize,
    pub max_iter: usize,
    /// Proximity used by the cycle detector before Newton refinement.
    pub attract_tol: f64,
    /// Width of the indifferent band around `|mu| = 1`.
    pub indifferent_tol: f64,
    pub newton_max_iter: usize,
    pub newton_tol: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            escape_radius: 50.0,
            escape_steps: 3,
            max_iter: 10_000,
            attract_tol: 1e-6,
            indifferent_tol: 1e-6,
            newton_max_iter: 64,
            newton_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayConfig {
    /// Pullbacks start once the model orbit `F^N(t)` exceeds this.
    pub depth_radius: f64,
    pub max_depth: usize,
    pub grid_factor: f64,
    pub max_iter: usize,
    /// Largest fixed-point residual accepted for a ray sample.
    pub residual_tol: f64,
    pub landing_samples: usize,
    pub landing_degree: usize,
    /// Landing estimates with a wider error bar are reported as failures.
    pub landing_tol: f64,
    pub max_refinements: usize,
}

impl Default for RayConfig {
    fn default() -> Self {
        Self {
            depth_radius: 50.0,
            max_depth: 200,
            grid_factor: 1.1,
            max_iter: 100,
            residual_tol: 1e-9,
            landing_samples: 8,
            landing_degree: 2,
            landing_tol: 1e-2,
            max_refinements: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentConfig {
    /// Largest continuation step in the half-plane coordinate.
    pub max_step: f64,
    pub max_steps: usize,
    pub newton_max_iter: usize,
    pub newton_tol: f64,
    /// Internal rays stop refining here and extrapolate to `t = 0`.
    pub parabolic_stop: f64,
    pub dedup_tol: f64,
    /// Largest `|kappa|` accepted along an internal ray tail.
    pub divergence_radius: f64,
    pub landing_samples: usize,
}

impl Default for ComponentConfig {
    fn default() -> Self {
        Self {
            max_step: 0.05,
            max_steps: 1000,
            newton_max_iter: 64,
            newton_tol: 1e-13,
            parabolic_stop: 1e-4,
            dedup_tol: 1e-6,
            divergence_radius: 1e6,
            landing_samples: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub max_iter: usize,
    pub period_cap: usize,
    /// Worker threads for rendering; 0 means the rayon default.
    pub threads: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            period_cap: 8,
            threads: 0,
        }
    }
}

/// The full configuration record.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Config {
    pub dynamics: DynamicsConfig,
    pub rays: RayConfig,
    pub components: ComponentConfig,
    pub render: RenderConfig,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl Config {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        text.parse()
    }

    /// Applies one `key=value` assignment on top of the current values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        let d = &mut self.dynamics;
        let r = &mut self.rays;
        let c = &mut self.components;
        let p = &mut self.render;
        match key.trim() {
            "core.escapeRadius" => d.escape_radius = parse_value(key, value)?,
            "core.escapeSteps" => d.escape_steps = parse_value(key, value)?,
            "core.maxIter" => d.max_iter = parse_value(key, value)?,
            "core.attractTol" => d.attract_tol = parse_value(key, value)?,
            "core.indifferentTol" => d.indifferent_tol = parse_value(key, value)?,
            "core.newtonMaxIter" => d.newton_max_iter = parse_value(key, value)?,
            "core.newtonTol" => d.newton_tol = parse_value(key, value)?,
            "rays.depthRadius" => r.depth_radius = parse_value(key, value)?,
            "rays.maxDepth" => r.max_depth = parse_value(key, value)?,
            "rays.gridFactor" => r.grid_factor = parse_value(key, value)?,
            "rays.maxIter" => r.max_iter = parse_value(key, value)?,
            "rays.residualTol" => r.residual_tol = parse_value(key, value)?,
            "rays.landingSamples" => r.landing_samples = parse_value(key, value)?,
            "rays.landingDegree" => r.landing_degree = parse_value(key, value)?,
            "rays.landingTol" => r.landing_tol = parse_value(key, value)?,
            "rays.maxRefinements" => r.max_refinements = parse_value(key, value)?,
            "components.maxStep" => c.max_step = parse_value(key, value)?,
            "components.maxSteps" => c.max_steps = parse_value(key, value)?,
            "components.newtonMaxIter" => c.newton_max_iter = parse_value(key, value)?,
            "components.newtonTol" => c.newton_tol = parse_value(key, value)?,
            "components.parabolicStop" => c.parabolic_stop = parse_value(key, value)?,
            "components.dedupTol" => c.dedup_tol = parse_value(key, value)?,
            "components.divergenceRadius" => c.divergence_radius = parse_value(key, value)?,
            "components.landingSamples" => c.landing_samples = parse_value(key, value)?,
            "render.maxIter" => p.max_iter = parse_value(key, value)?,
            "render.periodCap" => p.period_cap = parse_value(key, value)?,
            "render.threads" => p.threads = parse_value(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let d = &self.dynamics;
        let r = &self.rays;
        let c = &self.components;
        let p = &self.render;
        vec![
            ("core.escapeRadius", d.escape_radius.to_string()),
            ("core.escapeSteps", d.escape_steps.to_string()),
            ("core.maxIter", d.max_iter.to_string()),
            ("core.attractTol", d.attract_tol.to_string()),
            ("core.indifferentTol", d.indifferent_tol.to_string()),
            ("core.newtonMaxIter", d.newton_max_iter.to_string()),
            ("core.newtonTol", d.newton_tol.to_string()),
            ("rays.depthRadius", r.depth_radius.to_string()),
            ("rays.maxDepth", r.max_depth.to_string()),
            ("rays.gridFactor", r.grid_factor.to_string()),
            ("rays.maxIter", r.max_iter.to_string()),
            ("rays.residualTol", r.residual_tol.to_string()),
            ("rays.landingSamples", r.landing_samples.to_string()),
            ("rays.landingDegree", r.landing_degree.to_string()),
            ("rays.landingTol", r.landing_tol.to_string()),
            ("rays.maxRefinements", r.max_refinements.to_string()),
            ("components.maxStep", c.max_step.to_string()),
            ("components.maxSteps", c.max_steps.to_string()),
            ("components.newtonMaxIter", c.newton_max_iter.to_string()),
            ("components.newtonTol", c.newton_tol.to_string()),
            ("components.parabolicStop", c.parabolic_stop.to_string()),
            ("components.dedupTol", c.dedup_tol.to_string()),
            ("components.divergenceRadius", c.divergence_radius.to_string()),
            ("components.landingSamples", c.landing_samples.to_string()),
            ("render.maxIter", p.max_iter.to_string()),
            ("render.periodCap", p.period_cap.to_string()),
            ("render.threads", p.threads.to_string()),
        ]
    }
}

impl FromStr for Config {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut config = Config::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                text: raw.to_string(),
            })?;
            config.set(key, value)?;
        }
        Ok(config)
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (key, value) in self.entries() {
            writeln!(f, "{key}={value}")?;
        }
        Ok(())
    }
}
