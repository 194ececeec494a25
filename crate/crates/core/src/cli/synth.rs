use std::f64::consts::{PI, TAU};

use nalgebra::{Point3, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud_io::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// `z = height` over the unit square.
    Plane,
    /// `z = offset + amplitude·cos(π·f·x)·cos(π·f·y)` over the unit square.
    CosineSurface,
    /// Cap of a sphere centred at the origin around +z.
    SpherePatch,
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plane" => Ok(Shape::Plane),
            "cosine-surface" | "cosine" => Ok(Shape::CosineSurface),
            "sphere-patch" | "sphere" => Ok(Shape::SpherePatch),
            _ => Err(Error::invalid(format!(
                "shape must be plane, cosine-surface or sphere-patch, got `{s}`"
            ))),
        }
    }
}

/// Analytic surface sampled uniformly in its parameter domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub shape: Shape,
    pub n_points: usize,
    pub seed: u64,
    pub height: f64,
    pub offset: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub radius: f64,
    /// Half-angle of the sphere cap, in degrees.
    pub cap_angle: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            shape: Shape::Plane,
            n_points: 1000,
            seed: 0,
            height: 0.3,
            offset: 0.25,
            amplitude: 0.1,
            frequency: 1.0,
            radius: 0.5,
            cap_angle: 60.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.height,
            self.offset,
            self.amplitude,
            self.frequency,
            self.radius,
            self.cap_angle,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("shape parameters must be finite"));
        }
        if self.n_points == 0 {
            return Err(Error::invalid("n_points must be positive"));
        }
        if self.shape == Shape::SpherePatch {
            if !(self.radius > 0.0) {
                return Err(Error::invalid("radius must be positive"));
            }
            if !(self.cap_angle > 0.0 && self.cap_angle <= 180.0) {
                return Err(Error::invalid("cap_angle must lie in (0, 180]"));
            }
        }
        Ok(())
    }

    /// Samples the surface with exact analytic normals. Deterministic per seed.
    pub fn generate(&self) -> Result<PointCloud> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut points = Vec::with_capacity(self.n_points);
        let mut normals = Vec::with_capacity(self.n_points);
        for _ in 0..self.n_points {
            let (p, n) = match self.shape {
                Shape::Plane => {
                    let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
                    (Point3::new(x, y, self.height), Vector3::z())
                }
                Shape::CosineSurface => {
                    let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
                    self.cosine_at(x, y)
                }
                Shape::SpherePatch => {
                    let lo = self.cap_angle.to_radians().cos();
                    let cos_t: f64 = lo + (1.0 - lo) * rng.random::<f64>();
                    let phi = TAU * rng.random::<f64>();
                    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
                    let dir = Vector3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t);
                    (Point3::from(dir * self.radius), dir)
                }
            };
            points.push(p);
            normals.push(n);
        }
        PointCloud::with_normals(points, normals)
    }

    /// Surface point and unit normal of the cosine surface at `(x, y)`.
    pub fn cosine_at(&self, x: f64, y: f64) -> (Point3<f64>, Vector3<f64>) {
        let w = PI * self.frequency;
        let (cx, cy) = ((w * x).cos(), (w * y).cos());
        let z = self.offset + self.amplitude * cx * cy;
        let dzdx = -self.amplitude * w * (w * x).sin() * cy;
        let dzdy = -self.amplitude * w * cx * (w * y).sin();
        (
            Point3::new(x, y, z),
            Vector3::new(-dzdx, -dzdy, 1.0).normalize(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_is_exact() {
        let c = SyntheticSpec::default().generate().unwrap();
        assert_eq!(c.len(), 1000);
        assert!(c.points.iter().all(|p| p.z == 0.3));
        assert!(c.normals.unwrap().iter().all(|n| *n == Vector3::z()));
    }

    #[test]
    fn sphere_points_lie_on_sphere() {
        let spec = SyntheticSpec {
            shape: Shape::SpherePatch,
            radius: 0.7,
            cap_angle: 45.0,
            ..Default::default()
        };
        let c = spec.generate().unwrap();
        let lo = 45f64.to_radians().cos();
        for (p, n) in c.points.iter().zip(c.normals.as_ref().unwrap()) {
            assert!((p.coords.norm() - 0.7).abs() <= 1e-12);
            assert!(p.z / 0.7 >= lo - 1e-12);
            assert!((n - p.coords / 0.7).norm() <= 1e-12);
        }
    }

    #[test]
    fn cosine_normals_are_orthogonal_to_tangents() {
        let spec = SyntheticSpec {
            shape: Shape::CosineSurface,
            frequency: 2.0,
            ..Default::default()
        };
        let h = 1e-6;
        for &(x, y) in &[(0.1, 0.2), (0.5, 0.9), (0.33, 0.71)] {
            let (p, n) = spec.cosine_at(x, y);
            assert_eq!(
                p.z,
                0.25 + 0.1 * (2.0 * PI * x).cos() * (2.0 * PI * y).cos()
            );
            let tx = spec.cosine_at(x + h, y).0 - spec.cosine_at(x - h, y).0;
            let ty = spec.cosine_at(x, y + h).0 - spec.cosine_at(x, y - h).0;
            assert!(n.dot(&tx.normalize()).abs() < 1e-8);
            assert!(n.dot(&ty.normalize()).abs() < 1e-8);
        }
    }

    #[test]
    fn seeds_are_reproducible() {
        let spec = SyntheticSpec {
            shape: Shape::CosineSurface,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(
            spec.generate().unwrap().points,
            spec.generate().unwrap().points
        );
        let other = SyntheticSpec { seed: 10, ..spec };
        assert_ne!(
            spec.generate().unwrap().points,
            other.generate().unwrap().points
        );
    }

    #[test]
    fn invalid_parameters() {
        for spec in [
            SyntheticSpec {
                n_points: 0,
                ..Default::default()
            },
            SyntheticSpec {
                shape: Shape::SpherePatch,
                radius: 0.0,
                ..Default::default()
            },
            SyntheticSpec {
                shape: Shape::SpherePatch,
                cap_angle: 190.0,
                ..Default::default()
            },
            SyntheticSpec {
                height: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(spec.generate().is_err(), "{spec:?}");
        }
    }
}
