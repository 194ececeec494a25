use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use super::kdtree::KdTree;
use crate::cloud_io::PointCloud;
use crate::error::{Error, Result};

/// Relative eigenvalue gap below which the normal direction is ambiguous.
const AMBIGUITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct NormalEstimate {
    pub normals: Vec<Vector3<f64>>,
    /// Set where the neighbourhood is a line or a single point.
    pub low_confidence: Vec<bool>,
    pub k: usize,
}

impl NormalEstimate {
    pub fn low_confidence_count(&self) -> usize {
        self.low_confidence.iter().filter(|&&b| b).count()
    }
}

/// PCA normals from the `k` nearest neighbours of every point (the point
/// itself included).
///
/// Each normal is the eigenvector of the smallest covariance eigenvalue,
/// oriented away from the neighbourhood centroid. When the point sits on the
/// centroid plane the first nonzero component in z, y, x order is made
/// positive. Orientation is not consistent across the cloud.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<NormalEstimate> {
    if k < 3 || cloud.len() <= k {
        return Err(Error::invalid(format!(
            "normal estimation needs 3 <= k < {} points, got k = {k}",
            cloud.len()
        )));
    }
    let tree = KdTree::new(&cloud.points);
    let (normals, low_confidence) = cloud
        .points
        .par_iter()
        .map(|p| {
            let nbrs = tree.k_nearest(p, k);
            let pts: Vec<Point3<f64>> = nbrs.iter().map(|&i| cloud.points[i]).collect();
            local_normal(p, &pts)
        })
        .unzip();
    Ok(NormalEstimate {
        normals,
        low_confidence,
        k,
    })
}

fn local_normal(p: &Point3<f64>, nbrs: &[Point3<f64>]) -> (Vector3<f64>, bool) {
    let inv = 1.0 / nbrs.len() as f64;
    let centroid = nbrs.iter().fold(Vector3::zeros(), |acc, q| acc + q.coords) * inv;
    let mut cov = Matrix3::zeros();
    for q in nbrs {
        let d = q.coords - centroid;
        cov += d * d.transpose();
    }
    cov *= inv;

    let eig = SymmetricEigen::new(cov);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l0, l1, l2) = (
        eig.eigenvalues[idx[0]],
        eig.eigenvalues[idx[1]],
        eig.eigenvalues[idx[2]],
    );

    let (mut n, low) = if l2 <= 0.0 {
        (Vector3::z(), true)
    } else if l1 - l0 <= AMBIGUITY_TOLERANCE * l2 {
        // line-like: take the coordinate axis least aligned with the line
        // (first in x, y, z order on ties) and remove its line component
        let dir: Vector3<f64> = eig.eigenvectors.column(idx[2]).into();
        let axis = (0..3)
            .min_by(|&a, &b| dir[a].abs().total_cmp(&dir[b].abs()).then(a.cmp(&b)))
            .unwrap();
        let e = Vector3::ith(axis, 1.0);
        ((e - dir * dir.dot(&e)).normalize(), true)
    } else {
        (eig.eigenvectors.column(idx[0]).into(), false)
    };
    n = n.normalize();

    let offset = p.coords - centroid;
    let dot = n.dot(&offset);
    let spread = l2.sqrt();
    if dot.abs() > 1e-12 * spread {
        if dot < 0.0 {
            n = -n;
        }
    } else if let Some(c) = [n.z, n.y, n.x].into_iter().find(|&c| c != 0.0) {
        if c < 0.0 {
            n = -n;
        }
    }
    (n, low)
}
