//! Aggregate JSON configuration for the planner, harness and CLI.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::collision::{
    sample_dataset, train_mlp, LegGeometry, Mlp, SampleRanges, TrainConfig, TrainReport,
};
use crate::harness::SweepConfig;
use crate::locomotion::{FootBound, GaitParams};
use crate::model::ModelParams;
use crate::mpc::MpcConfig;

fn d_margin() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiemannianConfig {
    /// Half-width of the region as a fraction of the nominal orbital energy.
    #[serde(default = "d_margin")]
    pub margin: f64,
    /// Also bound the lateral CoM speed at the keyframe.
    #[serde(default = "d_true")]
    pub sync_lateral: bool,
}

fn d_true() -> bool {
    true
}

impl Default for RiemannianConfig {
    fn default() -> Self {
        Self {
            margin: d_margin(),
            sync_lateral: true,
        }
    }
}

fn d_length() -> f64 {
    2.0
}
fn d_width() -> f64 {
    1.0
}
fn d_bound_scale() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreadmillConfig {
    #[serde(default = "d_length")]
    pub length: f64,
    #[serde(default = "d_width")]
    pub width: f64,
    /// Belt speed in m/s; defaults to the nominal walking speed so that the
    /// robot stays in place.
    #[serde(default)]
    pub belt_speed: Option<f64>,
    #[serde(default = "d_bound_scale")]
    pub atom_scale: f64,
}

impl Default for TreadmillConfig {
    fn default() -> Self {
        Self {
            length: d_length(),
            width: d_width(),
            belt_speed: None,
            atom_scale: d_bound_scale(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionConfig {
    #[serde(default)]
    pub geometry: LegGeometry,
    #[serde(default)]
    pub ranges: SampleRanges,
    #[serde(default)]
    pub training: TrainConfig,
    /// Pretrained network; trained on the fly when absent.
    #[serde(default)]
    pub model_path: Option<String>,
}

impl CollisionConfig {
    /// Trains a network on a fresh dataset drawn with the training seed.
    pub fn train(&self) -> anyhow::Result<(Mlp, TrainReport)> {
        let data = sample_dataset(
            self.training.samples,
            &self.geometry,
            &self.ranges,
            self.training.seed,
        )?;
        Ok(train_mlp(&data, &self.training)?)
    }

    /// Network stored at `path`, or a freshly trained one written there.
    pub fn load_or_train(&self, path: &Path) -> anyhow::Result<Mlp> {
        if path.exists() {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let net: Mlp = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            net.validate()?;
            return Ok(net);
        }
        let (net, _) = self.train()?;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        // concurrent writers each rename a complete file
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_string(&net)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(net)
    }

    /// The configured network: loaded from (or trained into) `model_path`, or
    /// trained in memory when no path is set.
    pub fn network(&self) -> anyhow::Result<Mlp> {
        match &self.model_path {
            Some(p) => self.load_or_train(Path::new(p)),
            None => Ok(self.train()?.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub gait: GaitParams,
    #[serde(default)]
    pub riemannian: RiemannianConfig,
    #[serde(default)]
    pub treadmill: TreadmillConfig,
    #[serde(default)]
    pub mpc: MpcConfig,
    #[serde(default)]
    pub collision: CollisionConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

impl Config {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        serde_json::from_str(text).context("parsing configuration")
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn belt_speed(&self) -> f64 {
        self.treadmill
            .belt_speed
            .unwrap_or(self.gait.step_length / self.gait.nominal_t)
    }

    pub fn foot_bound(&self) -> FootBound {
        FootBound::centered(
            self.treadmill.length,
            self.treadmill.width,
            self.belt_speed(),
            self.treadmill.atom_scale,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c = Config::from_json("{}").unwrap();
        assert_eq!(c, Config::default());
        assert!((c.belt_speed() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn partial_sections_and_unknown_keys() {
        let c =
            Config::from_json(r#"{"gait": {"step_width": 0.25}, "mpc": {"beta": 30}}"#).unwrap();
        assert_eq!(c.gait.step_width, 0.25);
        assert_eq!(c.gait.nominal_t, 0.4);
        assert_eq!(c.mpc.beta, 30.0);
        assert!(Config::from_json(r#"{"gait": {"stride": 1}}"#).is_err());
        assert!(Config::from_json(r#"{"planner": {}}"#).is_err());
    }

    #[test]
    fn round_trip() {
        let c = Config::default();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(Config::from_json(&text).unwrap(), c);
    }
}
