//! Run configuration: command-line flags layered over an optional TOML file
//! layered over library defaults.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use scenegraph_vad::pipeline::ModelConfig;
use scenegraph_vad::scenegraph::default_edge_threshold;
use scenegraph_vad::scoring::DEFAULT_ANOMALY_THRESHOLD;
use scenegraph_vad::Execution;

/// Tunables shared by every subcommand. Each one can come from a flag or
/// from the `--config` file; a flag wins.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// Edge threshold in pixels [default: 250 scaled by frame-height/1080]
    #[arg(long, global = true)]
    pub edge_threshold_px: Option<f64>,
    /// Frame height used to scale the default edge threshold [default: 1080]
    #[arg(long, global = true)]
    pub frame_height: Option<f64>,
    /// Exemplar selection threshold [default: 0.65]
    #[arg(long, global = true)]
    pub exemplar_threshold: Option<f64>,
    /// Trajectory look-ahead length in frames [default: 30]
    #[arg(long, global = true)]
    pub trajectory_length: Option<usize>,
    /// Region score above which a region counts as a detection [default: 0.5]
    #[arg(long, global = true)]
    pub anomaly_threshold: Option<f64>,
    /// Maximum number of node pairs used to estimate normalization [default: 100000]
    #[arg(long, global = true)]
    pub normalization_sample: Option<usize>,
    /// Seed for the normalization sample
    #[arg(long, global = true)]
    pub sample_seed: Option<u64>,
    /// Run on the calling thread only
    #[arg(long, global = true)]
    #[serde(default)]
    pub sequential: bool,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Fill every unset field of `self` from `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        Settings {
            edge_threshold_px: self.edge_threshold_px.or(lower.edge_threshold_px),
            frame_height: self.frame_height.or(lower.frame_height),
            exemplar_threshold: self.exemplar_threshold.or(lower.exemplar_threshold),
            trajectory_length: self.trajectory_length.or(lower.trajectory_length),
            anomaly_threshold: self.anomaly_threshold.or(lower.anomaly_threshold),
            normalization_sample: self.normalization_sample.or(lower.normalization_sample),
            sample_seed: self.sample_seed.or(lower.sample_seed),
            sequential: self.sequential || lower.sequential,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("edge-threshold-px", self.edge_threshold_px),
            ("frame-height", self.frame_height),
            ("exemplar-threshold", self.exemplar_threshold),
            ("anomaly-threshold", self.anomaly_threshold),
        ];
        for (name, value) in positive {
            if let Some(v) = value {
                if !(v.is_finite() && v > 0.0) {
                    bail!("{name} must be positive, got {v}");
                }
            }
        }
        if let Some(t) = self.trajectory_length {
            if t < 2 {
                bail!("trajectory-length must be at least 2, got {t}");
            }
        }
        if self.normalization_sample == Some(0) {
            bail!("normalization-sample must be positive");
        }
        Ok(())
    }

    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    /// Edge threshold given explicitly or through the frame height.
    pub fn edge_threshold(&self) -> Option<f64> {
        self.edge_threshold_px
            .or(self.frame_height.map(default_edge_threshold))
    }

    pub fn anomaly_threshold(&self) -> f64 {
        self.anomaly_threshold.unwrap_or(DEFAULT_ANOMALY_THRESHOLD)
    }

    pub fn model_config(&self) -> ModelConfig {
        let d = ModelConfig::default();
        ModelConfig {
            edge_threshold: self.edge_threshold().unwrap_or(d.edge_threshold),
            exemplar_threshold: self.exemplar_threshold.unwrap_or(d.exemplar_threshold),
            trajectory_len: self.trajectory_length.unwrap_or(d.trajectory_len),
            normalization_sample: self.normalization_sample.unwrap_or(d.normalization_sample),
            sample_seed: self.sample_seed.unwrap_or(d.sample_seed),
        }
    }
}
