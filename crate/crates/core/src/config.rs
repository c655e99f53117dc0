//! Aggregate pipeline configuration: selection and grasp scoring weights,
//! gantry model, planner parameters, and the execution offsets. All fields
//! have embedded defaults; a JSON config file overrides them wholesale.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grasp::GraspConfig;
use crate::motion::gantry::GantryModel;
use crate::motion::planner::PlannerParams;
use crate::selection::LeafSelectionConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionConfig {
    pub model: GantryModel,
    pub planner: PlannerParams,
    /// Hover height of the pre-grasp pose above the grasp point (m).
    pub pre_grasp_offset_m: f64,
    /// How far the tool presses below the observed leaf surface (m).
    pub contact_interference_m: f64,
    /// Occupancy voxel edge length (m).
    pub voxel_size_m: f64,
    /// Parking configuration the plan starts from; coincides with the
    /// reload station.
    pub home: [f64; 6],
    /// Reload station location in the workspace (m).
    pub reload_station: [f64; 3],
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            model: GantryModel::default(),
            planner: PlannerParams::default(),
            pre_grasp_offset_m: 0.05,
            contact_interference_m: 0.005,
            voxel_size_m: 0.005,
            home: [0.1, 0.1, 1.2, 0.0, 0.0, 0.0],
            reload_station: [0.1, 0.1, 1.2],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub selection: LeafSelectionConfig,
    pub grasp: GraspConfig,
    pub motion: MotionConfig,
    pub cartridge_capacity: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            selection: LeafSelectionConfig::default(),
            grasp: GraspConfig::default(),
            motion: MotionConfig::default(),
            cartridge_capacity: crate::reload::DEFAULT_CAPACITY,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.selection.validate()?;
        self.grasp.validate()?;
        self.motion.model.validate()?;
        self.motion.planner.validate()?;
        if self.motion.voxel_size_m <= 0.0 {
            return Err(crate::error::Error::Input(
                "voxel_size_m must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| crate::error::Error::Input(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
