//! Point cloud container, unit-cube normalization and PLY I/O.

mod ply;

pub use ply::{read_ply, read_ply_from, write_ply, write_ply_to, PlyFormat, PlyPrecision};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered 3-D positions with optional per-point unit normals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self {
            points,
            normals: None,
        }
    }

    /// Builds a cloud with normals. Lengths must agree; normals are renormalized.
    pub fn with_normals(points: Vec<Point3<f64>>, normals: Vec<Vector3<f64>>) -> Result<Self> {
        if normals.len() != points.len() {
            return Err(Error::SizeMismatch {
                expected: points.len(),
                found: normals.len(),
            });
        }
        Ok(Self {
            points,
            normals: Some(normals.into_iter().map(unit_or_default).collect()),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    /// Axis-aligned bounding box as (min corner, max corner).
    pub fn bounds(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (
                Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        }))
    }
}

/// Renormalizes a normal; zero or non-finite vectors become +z.
pub(crate) fn unit_or_default(n: Vector3<f64>) -> Vector3<f64> {
    let len = n.norm();
    if len > 0.0 && len.is_finite() {
        n / len
    } else {
        log::warn!("zero-length normal replaced by (0, 0, 1)");
        Vector3::z()
    }
}

/// Uniform affine map between original units and the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormTransform {
    /// Minimum corner, in original units.
    pub offset: [f64; 3],
    /// Original units per normalized unit.
    pub scale: f64,
}

impl NormTransform {
    pub const IDENTITY: NormTransform = NormTransform {
        offset: [0.0; 3],
        scale: 1.0,
    };

    pub fn forward(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::new(
            (p.x - self.offset[0]) / self.scale,
            (p.y - self.offset[1]) / self.scale,
            (p.z - self.offset[2]) / self.scale,
        )
    }

    pub fn inverse(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::new(
            p.x * self.scale + self.offset[0],
            p.y * self.scale + self.offset[1],
            p.z * self.scale + self.offset[2],
        )
    }

    /// Applies the forward map to every point of `cloud`; normals are untouched.
    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud.points.iter().map(|p| self.forward(p)).collect(),
            normals: cloud.normals.clone(),
        }
    }
}

/// Moves the minimum corner to the origin and divides by the largest extent.
pub fn normalize_unit_cube(cloud: &PointCloud) -> Result<(PointCloud, NormTransform)> {
    let (lo, hi) = cloud.bounds().ok_or(Error::EmptyCloud)?;
    let extent = hi - lo;
    let scale = extent.x.max(extent.y).max(extent.z);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::DegenerateCloud);
    }
    let t = NormTransform {
        offset: [lo.x, lo.y, lo.z],
        scale,
    };
    Ok((t.apply(cloud), t))
}

pub fn denormalize(cloud: &PointCloud, t: &NormTransform) -> PointCloud {
    debug_assert!(t.scale > 0.0);
    PointCloud {
        points: cloud.points.iter().map(|p| t.inverse(p)).collect(),
        normals: cloud.normals.clone(),
    }
}
