//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{StrainGains, TaskGains};
use crate::error::{Error, Result};
use crate::ik::IkSettings;
use crate::liegroup::Twist;
use crate::rod::{RodSpec, StrainVector};
use crate::sim::{shape_regulation_targets, CircleTrajectory, SimConfig};

/// Scalar gains; the matrices are `k * I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsConfig {
    /// Strain-space gain, 1/s.
    pub strain: f64,
    /// Task-space gain, 1/s.
    pub task: f64,
}

impl Default for GainsConfig {
    fn default() -> Self {
        Self { strain: 2.0, task: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub csv: bool,
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            csv: true,
            svg: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rod: RodSpec,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub ik: IkSettings,
    #[serde(default)]
    pub gains: GainsConfig,
    #[serde(default)]
    pub trajectory: CircleTrajectory,
    /// Desired strain twists for shape regulation, one per section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_strain: Option<Vec<[f64; 6]>>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.rod.validate()?;
        self.sim.validate()?;
        self.ik.validate()?;
        self.trajectory.validate()?;
        self.strain_gains()?;
        self.task_gains()?;
        if let Some(t) = &self.target_strain {
            if t.len() != self.rod.num_sections() {
                return Err(Error::Config(format!(
                    "target_strain has {} twists but the rod has {} sections",
                    t.len(),
                    self.rod.num_sections()
                )));
            }
        }
        Ok(())
    }

    pub fn strain_gains(&self) -> Result<StrainGains> {
        StrainGains::scalar(self.gains.strain, self.rod.dof())
    }

    pub fn task_gains(&self) -> Result<TaskGains> {
        TaskGains::scalar(self.gains.task)
    }

    /// Desired strain for shape regulation; defaults to the two-section
    /// targets when the rod has two sections.
    pub fn target_strain(&self) -> Result<StrainVector> {
        match &self.target_strain {
            Some(t) => Ok(StrainVector::from_twists(
                &t.iter().map(|v| Twist::from_slice(v)).collect::<Vec<_>>(),
            )),
            None if self.rod.num_sections() == 2 => Ok(StrainVector::from_twists(&shape_regulation_targets())),
            None => Err(Error::Config(
                "target_strain is required unless the rod has exactly two sections".into(),
            )),
        }
    }
}
