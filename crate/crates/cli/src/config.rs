//! The JSON run configuration. Every key is optional.

use std::path::Path;

use anyhow::{bail, Context};
use graphstab::catalog::{bouncing_ball, constant_drift};
use graphstab::example::build_example;
use graphstab::hypotheses::CheckOptions;
use graphstab::{Config64, ExampleParams64, System64};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemConfig {
    ImpactOscillator(ExampleParams64),
    BouncingBall {
        #[serde(default = "half")]
        restitution: f64,
        #[serde(default)]
        threshold: f64,
    },
    Drift {
        #[serde(default = "one")]
        rate: f64,
    },
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::ImpactOscillator(ExampleParams64::default())
    }
}

impl SystemConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        match self {
            Self::ImpactOscillator(p) => p.validate()?,
            Self::BouncingBall { restitution, threshold } => {
                if !(*restitution > 0.0 && *restitution <= 1.0) || !(*threshold >= 0.0) {
                    bail!("bouncing_ball needs restitution in (0, 1] and threshold >= 0");
                }
            }
            Self::Drift { rate } => {
                if !rate.is_finite() {
                    bail!("drift rate must be finite");
                }
            }
        }
        Ok(())
    }

    /// The system without any feedback.
    pub fn plant(&self) -> System64 {
        match self {
            Self::ImpactOscillator(p) => build_example(p, None),
            Self::BouncingBall { restitution, threshold } => bouncing_ball(*restitution, *threshold),
            Self::Drift { rate } => constant_drift(*rate),
        }
    }

    pub fn example(&self) -> anyhow::Result<&ExampleParams64> {
        match self {
            Self::ImpactOscillator(p) => Ok(p),
            _ => bail!("this command needs system kind impact_oscillator"),
        }
    }

    pub fn default_x0(&self) -> Vec<f64> {
        match self {
            Self::ImpactOscillator(p) => p.reference_x0.clone(),
            Self::BouncingBall { .. } => vec![1.0, 0.0],
            Self::Drift { .. } => vec![0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub radii: Vec<f64>,
    pub samples_per_radius: usize,
    /// Tail start times; defaults to `{0, H/4, H/2, 3H/4}`.
    pub t_grid: Option<Vec<f64>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            radii: vec![0.1, 0.05, 0.01],
            samples_per_radius: 20,
            t_grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub eps: Vec<f64>,
    pub samples_per_eps: usize,
    /// Longest flow explored per probe.
    pub max_time: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            eps: vec![0.1, 0.01, 0.001],
            samples_per_eps: 200,
            max_time: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub system: SystemConfig,
    /// Initial state for `simulate`; defaults per system.
    pub x0: Option<Vec<f64>>,
    /// Offset from the reference's initial state for `track`.
    pub offset: Vec<f64>,
    pub integrator: Config64,
    /// Dense-output step for the closeness metrics.
    pub grid_step: f64,
    pub seed: u64,
    pub check: CheckOptions<f64>,
    pub sweep: SweepConfig,
    pub probe: ProbeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            x0: None,
            offset: vec![0.05, 0.0],
            integrator: Config64::default(),
            grid_step: graphstab::metrics::DEFAULT_GRID_STEP,
            seed: 0,
            check: CheckOptions::default(),
            sweep: SweepConfig::default(),
            probe: ProbeConfig::default(),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid: Option<f64>,
    pub horizon: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Self> {
        let mut config: RunConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(grid) = overrides.grid {
            config.grid_step = grid;
        }
        if let Some(h) = overrides.horizon {
            config.integrator.horizon = h;
            if let SystemConfig::ImpactOscillator(p) = &mut config.system {
                p.horizon = h;
            }
        }
        config.check.seed = config.seed;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.system.validate()?;
        self.integrator.validate().map_err(anyhow::Error::msg)?;
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            bail!("grid step must be positive");
        }
        let dim = self.system.plant().dimension();
        if let Some(x0) = &self.x0 {
            if x0.len() != dim {
                bail!("x0 has {} entries, system dimension is {dim}", x0.len());
            }
        }
        if self.offset.len() > dim || self.offset.iter().any(|v| !v.is_finite()) {
            bail!("offset must be a finite vector of at most {dim} entries");
        }
        if self.sweep.radii.is_empty() || self.sweep.radii.iter().any(|r| !(*r >= 0.0)) {
            bail!("sweep radii must be non-empty and non-negative");
        }
        if self.probe.eps.windows(2).any(|w| w[1] >= w[0]) || self.probe.eps.iter().any(|e| !(*e > 0.0)) {
            bail!("probe eps must be positive and strictly decreasing");
        }
        Ok(())
    }

    /// Horizon for runs on the example: the example's own, else the integrator's.
    pub fn horizon(&self) -> f64 {
        match &self.system {
            SystemConfig::ImpactOscillator(p) => p.horizon,
            _ => self.integrator.horizon,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_fills_defaults() {
        let c: RunConfig =
            serde_json::from_str(r#"{"system": {"kind": "impact_oscillator", "restitution": 0.7}, "seed": 4}"#).unwrap();
        let p = c.system.example().unwrap();
        assert_eq!(p.restitution, 0.7);
        assert_eq!(p.jump_threshold, 0.5);
        assert_eq!(c.seed, 4);
        assert_eq!(c.integrator, Config64::default());
    }

    #[test]
    fn horizon_override_reaches_example() {
        let c = RunConfig::load(
            None,
            &Overrides {
                horizon: Some(5.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(c.horizon(), 5.0);
        assert_eq!(c.integrator.horizon, 5.0);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut c = RunConfig::default();
        c.probe.eps = vec![0.01, 0.1];
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.system = SystemConfig::BouncingBall {
            restitution: 1.5,
            threshold: 0.0,
        };
        assert!(c.validate().is_err());
    }
}
