//! Point placement and the end-to-end upsampling pipeline.

mod budget;
pub mod delaunay;
mod pipeline;
mod placement;

pub use budget::{apportion, new_point_total, plan_budget};
pub use delaunay::{check_triangulable, delaunay, edge_midpoints, Midpoint, Triangulation};
pub use pipeline::{upsample_cloud, BlockStats, UpsampleReport, UpsampleResult};
pub use placement::{upsample_block, BlockPlacement, MAX_ROUNDS};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::partition::auto_grid_resolution;
use crate::spectral_model::ModelConfig;

/// Blocks per axis, either fixed or derived from the cloud size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridResolution {
    #[default]
    Auto,
    Fixed(usize),
}

impl GridResolution {
    pub fn resolve(self, n_points: usize) -> usize {
        match self {
            GridResolution::Auto => auto_grid_resolution(n_points),
            GridResolution::Fixed(g) => g,
        }
    }
}

impl fmt::Display for GridResolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridResolution::Auto => f.write_str("auto"),
            GridResolution::Fixed(g) => write!(f, "{g}"),
        }
    }
}

impl FromStr for GridResolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(GridResolution::Auto);
        }
        match s.parse::<usize>() {
            Ok(g) if g > 0 => Ok(GridResolution::Fixed(g)),
            _ => Err(Error::invalid(format!(
                "grid must be a positive integer or `auto`, got `{s}`"
            ))),
        }
    }
}

impl Serialize for GridResolution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GridResolution::Auto => s.serialize_str("auto"),
            GridResolution::Fixed(g) => s.serialize_u64(*g as u64),
        }
    }
}

impl<'de> Deserialize<'de> for GridResolution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(0) => Err(serde::de::Error::custom("grid must be positive")),
            Raw::Int(g) => Ok(GridResolution::Fixed(g as usize)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpsampleConfig {
    /// Target ratio of output to input point count.
    pub scale: f64,
    pub model: ModelConfig,
    pub grid: GridResolution,
    pub min_block_points: usize,
    /// Clamp margin for new heights, as a fraction of the block's height range.
    pub clamp_margin: f64,
}

impl Default for UpsampleConfig {
    fn default() -> Self {
        Self {
            scale: 2.0,
            model: ModelConfig::default(),
            grid: GridResolution::Auto,
            min_block_points: 3,
            clamp_margin: 0.5,
        }
    }
}

impl UpsampleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 1.0) || !self.scale.is_finite() {
            return Err(Error::invalid(format!(
                "scale {} must exceed 1",
                self.scale
            )));
        }
        if self.min_block_points < 3 {
            return Err(Error::invalid("min_block_points must be at least 3"));
        }
        if !(self.clamp_margin >= 0.0) {
            return Err(Error::invalid("clamp_margin must be non-negative"));
        }
        if self.grid == GridResolution::Fixed(0) {
            return Err(Error::invalid("grid resolution must be positive"));
        }
        self.model.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(
            "auto".parse::<GridResolution>().unwrap(),
            GridResolution::Auto
        );
        assert_eq!(
            "12".parse::<GridResolution>().unwrap(),
            GridResolution::Fixed(12)
        );
        assert!("0".parse::<GridResolution>().is_err());
        assert!("x".parse::<GridResolution>().is_err());
        assert_eq!(GridResolution::Fixed(7).to_string(), "7");
    }

    #[test]
    fn config_validation() {
        assert!(UpsampleConfig::default().validate().is_ok());
        let bad = [
            UpsampleConfig {
                scale: 1.0,
                ..Default::default()
            },
            UpsampleConfig {
                min_block_points: 2,
                ..Default::default()
            },
            UpsampleConfig {
                clamp_margin: -0.1,
                ..Default::default()
            },
            UpsampleConfig {
                grid: GridResolution::Fixed(0),
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
