//! Point-to-point and point-to-plane distortion between two clouds.

mod kdtree;
mod normals;

pub use kdtree::KdTree;
pub use normals::{estimate_normals, NormalEstimate};

use std::fmt;
use std::str::FromStr;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud_io::PointCloud;
use crate::error::{Error, Result};

pub const DEFAULT_NORMALS_K: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// `Σ‖e‖ / N`.
    #[default]
    MeanNorm,
    /// `sqrt(Σ‖e‖² / N)`.
    Rms,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::MeanNorm => "mean-norm",
            Aggregation::Rms => "rms",
        }
    }

    fn aggregate(self, d: &[f64]) -> f64 {
        let n = d.len() as f64;
        match self {
            Aggregation::MeanNorm => d.iter().sum::<f64>() / n,
            Aggregation::Rms => (d.iter().map(|v| v * v).sum::<f64>() / n).sqrt(),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-norm" | "mean" => Ok(Aggregation::MeanNorm),
            "rms" => Ok(Aggregation::Rms),
            _ => Err(Error::invalid(format!(
                "aggregation must be `mean-norm` or `rms`, got `{s}`"
            ))),
        }
    }
}

/// Nearest reference point to `query` and the error vector `nearest − query`.
///
/// Builds a throwaway index; use [`KdTree`] directly for many queries.
pub fn nearest_neighbor(refset: &PointCloud, query: &Point3<f64>) -> Result<(usize, Vector3<f64>)> {
    let tree = KdTree::new(&refset.points);
    let (i, _) = tree.nearest(query).ok_or(Error::EmptyCloud)?;
    Ok((i, refset.points[i] - query))
}

/// Nearest-neighbour index and error vector for every test point.
fn matches(test: &PointCloud, tree: &KdTree) -> Result<Vec<(usize, Vector3<f64>)>> {
    if test.is_empty() || tree.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(test
        .points
        .par_iter()
        .map(|q| {
            let (i, _) = tree.nearest(q).unwrap();
            (i, tree.points()[i] - q)
        })
        .collect())
}

fn p2point_with(test: &PointCloud, tree: &KdTree, agg: Aggregation) -> Result<f64> {
    let d: Vec<f64> = matches(test, tree)?.iter().map(|(_, e)| e.norm()).collect();
    Ok(agg.aggregate(&d))
}

fn p2plane_with(
    test: &PointCloud,
    tree: &KdTree,
    normals: &[Vector3<f64>],
    agg: Aggregation,
) -> Result<f64> {
    if normals.len() != tree.len() {
        return Err(Error::SizeMismatch {
            expected: tree.len(),
            found: normals.len(),
        });
    }
    let d: Vec<f64> = matches(test, tree)?
        .iter()
        .map(|(i, e)| e.dot(&normals[*i]).abs())
        .collect();
    Ok(agg.aggregate(&d))
}

/// Directional point-to-point error from `test` to `reference`.
pub fn p2point(test: &PointCloud, reference: &PointCloud, agg: Aggregation) -> Result<f64> {
    p2point_with(test, &KdTree::new(&reference.points), agg)
}

/// Directional point-to-plane error: each test point's error vector projected
/// (in absolute value) onto the normal of its nearest reference point.
pub fn p2plane(
    test: &PointCloud,
    reference: &PointCloud,
    ref_normals: &[Vector3<f64>],
    agg: Aggregation,
) -> Result<f64> {
    p2plane_with(test, &KdTree::new(&reference.points), ref_normals, agg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricOptions {
    pub aggregation: Aggregation,
    /// Neighbourhood size for clouds without normals.
    pub normals_k: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            aggregation: Aggregation::MeanNorm,
            normals_k: DEFAULT_NORMALS_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub p2point_ab: f64,
    pub p2point_ba: f64,
    pub p2point_sym: f64,
    pub p2plane_ab: f64,
    pub p2plane_ba: f64,
    pub p2plane_sym: f64,
    pub aggregation: Aggregation,
    pub normal_source: String,
    pub n_test: usize,
    pub n_ref: usize,
}

impl MetricReport {
    /// `key: value` lines in JSON key order.
    pub fn to_text(&self) -> String {
        format!(
            "p2point_ab: {:e}\np2point_ba: {:e}\np2point_sym: {:e}\n\
             p2plane_ab: {:e}\np2plane_ba: {:e}\np2plane_sym: {:e}\n\
             aggregation: {}\nnormal_source: {}\nn_test: {}\nn_ref: {}\n",
            self.p2point_ab,
            self.p2point_ba,
            self.p2point_sym,
            self.p2plane_ab,
            self.p2plane_ba,
            self.p2plane_sym,
            self.aggregation,
            self.normal_source,
            self.n_test,
            self.n_ref,
        )
    }
}

fn normals_for(cloud: &PointCloud, k: usize) -> Result<(Vec<Vector3<f64>>, String)> {
    match &cloud.normals {
        Some(n) => Ok((n.clone(), "provided".to_string())),
        None => {
            let est = estimate_normals(cloud, k)?;
            if est.low_confidence_count() > 0 {
                log::warn!(
                    "{} of {} estimated normals are low confidence",
                    est.low_confidence_count(),
                    cloud.len()
                );
            }
            Ok((est.normals, format!("estimated, k={k}")))
        }
    }
}

/// Both directions and the symmetric maxima of both metrics.
///
/// The a→b direction projects onto reference normals, b→a onto test normals.
/// Normals are taken from the clouds when present and estimated otherwise.
pub fn metric_report(
    test: &PointCloud,
    reference: &PointCloud,
    opts: &MetricOptions,
) -> Result<MetricReport> {
    if test.is_empty() || reference.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let agg = opts.aggregation;
    let ref_tree = KdTree::new(&reference.points);
    let test_tree = KdTree::new(&test.points);
    let (ref_normals, ref_src) = normals_for(reference, opts.normals_k)?;
    let (test_normals, test_src) = normals_for(test, opts.normals_k)?;

    let p2point_ab = p2point_with(test, &ref_tree, agg)?;
    let p2point_ba = p2point_with(reference, &test_tree, agg)?;
    let p2plane_ab = p2plane_with(test, &ref_tree, &ref_normals, agg)?;
    let p2plane_ba = p2plane_with(reference, &test_tree, &test_normals, agg)?;
    let normal_source = if ref_src == test_src {
        ref_src
    } else {
        format!("reference {ref_src}; test {test_src}")
    };
    Ok(MetricReport {
        p2point_ab,
        p2point_ba,
        p2point_sym: p2point_ab.max(p2point_ba),
        p2plane_ab,
        p2plane_ba,
        p2plane_sym: p2plane_ab.max(p2plane_ba),
        aggregation: agg,
        normal_source,
        n_test: test.len(),
        n_ref: reference.len(),
    })
}
