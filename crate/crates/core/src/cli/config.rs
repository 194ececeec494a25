use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cloud_io::{PlyFormat, PlyPrecision};
use crate::error::{Error, Result};
use crate::metrics::{Aggregation, MetricOptions};
use crate::resample::{GridResolution, UpsampleConfig};

/// Flat `key = value` run configuration shared by all commands.
///
/// Every key is optional; unset keys fall back to the library defaults.
/// Command-line flags override values read from a file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridResolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_block_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<Aggregation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normals_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<PlyFormat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<PlyPrecision>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($field:ident),*) => {
        $(if $src.$field.is_some() { $dst.$field = $src.$field.clone(); })*
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Replaces every field that is set in `other`.
    pub fn merge(&mut self, other: &RunConfig) {
        overlay!(self, other; input, output, reference, report, scale, grid, kmax, max_iter,
            gamma, rho, rho_f, stop_eps, min_block_points, clamp_margin, aggregation,
            normals_k, format, precision);
    }

    pub fn upsample_config(&self) -> Result<UpsampleConfig> {
        let mut cfg = UpsampleConfig::default();
        let m = &mut cfg.model;
        if let Some(v) = self.kmax {
            m.k_max = v;
        }
        if let Some(v) = self.max_iter {
            m.max_iter = v;
        }
        if let Some(v) = self.gamma {
            m.gamma = v;
        }
        if let Some(v) = self.rho {
            m.rho = v;
        }
        if let Some(v) = self.rho_f {
            m.rho_f = v;
        }
        if let Some(v) = self.stop_eps {
            m.stop_eps = v;
        }
        if let Some(v) = self.scale {
            cfg.scale = v;
        }
        if let Some(v) = self.grid {
            cfg.grid = v;
        }
        if let Some(v) = self.min_block_points {
            cfg.min_block_points = v;
        }
        if let Some(v) = self.clamp_margin {
            cfg.clamp_margin = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn metric_options(&self) -> Result<MetricOptions> {
        let mut opts = MetricOptions::default();
        if let Some(a) = self.aggregation {
            opts.aggregation = a;
        }
        if let Some(k) = self.normals_k {
            if k < 3 {
                return Err(Error::invalid("normals_k must be at least 3"));
            }
            opts.normals_k = k;
        }
        Ok(opts)
    }

    pub fn ply_format(&self) -> PlyFormat {
        self.format.unwrap_or(PlyFormat::Ascii)
    }

    pub fn ply_precision(&self) -> PlyPrecision {
        self.precision.unwrap_or(PlyPrecision::F64)
    }

    pub(crate) fn require<'a>(field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        field
            .as_deref()
            .ok_or_else(|| Error::Config(format!("missing required `{name}`")))
    }
}
