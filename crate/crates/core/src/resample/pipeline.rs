use log::{debug, warn};
use nalgebra::Point3;
use rayon::prelude::*;
use serde::Serialize;

use super::budget::{apportion, new_point_total};
use super::delaunay::check_triangulable;
use super::placement::upsample_block;
use super::UpsampleConfig;
use crate::cloud_io::PointCloud;
use crate::error::Result;
use crate::partition::{
    partition_blocks, select_model_axis, to_local_frame, Axis, CellIndex, LocalSamples,
};
use crate::spectral_model::{fit_model, FitStatus};

/// Per-block record of one upsampling run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockStats {
    pub cell: CellIndex,
    pub linear_index: usize,
    pub q_axis: Axis,
    pub points_in: usize,
    /// False when the block is too small or its samples are collinear.
    pub eligible: bool,
    pub quota: usize,
    pub achieved: usize,
    pub rounds: usize,
    pub iterations: usize,
    pub initial_energy: Option<f64>,
    pub final_energy: Option<f64>,
    pub fit_status: Option<FitStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpsampleReport {
    pub n_input: usize,
    pub n_output: usize,
    pub scale: f64,
    pub achieved_scale: f64,
    pub requested_new: usize,
    pub achieved_new: usize,
    pub shortfall: usize,
    pub grid_resolution: usize,
    pub blocks_occupied: usize,
    pub blocks_eligible: usize,
    pub blocks: Vec<BlockStats>,
}

#[derive(Debug, Clone)]
pub struct UpsampleResult {
    /// Input points in their original order, followed by the new points.
    pub cloud: PointCloud,
    pub report: UpsampleReport,
}

struct Prepared {
    stats: BlockStats,
    samples: LocalSamples,
}

/// Upsamples a unit-cube normalized cloud.
///
/// New points are ordered by block linear index, then generation order. The
/// output carries no normals. Blocks are processed in parallel; the result
/// does not depend on scheduling.
pub fn upsample_cloud(cloud: &PointCloud, cfg: &UpsampleConfig) -> Result<UpsampleResult> {
    cfg.validate()?;
    let n = cloud.len();
    let resolution = cfg.grid.resolve(n);
    let grid = partition_blocks(cloud, resolution)?;

    let prepared: Vec<Prepared> = grid
        .blocks
        .values()
        .map(|block| {
            let frame = select_model_axis(block);
            let samples = to_local_frame(block, frame);
            let eligible = block.len() >= cfg.min_block_points && {
                let pts: Vec<[f64; 2]> = samples
                    .o
                    .iter()
                    .zip(&samples.p)
                    .map(|(&o, &p)| [o, p])
                    .collect();
                check_triangulable(&pts).is_ok()
            };
            Prepared {
                stats: BlockStats {
                    cell: block.cell,
                    linear_index: grid.linear_index(block.cell),
                    q_axis: frame.q_axis,
                    points_in: block.len(),
                    eligible,
                    quota: 0,
                    achieved: 0,
                    rounds: 0,
                    iterations: 0,
                    initial_energy: None,
                    final_energy: None,
                    fit_status: None,
                },
                samples,
            }
        })
        .collect();

    let weights: Vec<usize> = prepared
        .iter()
        .map(|b| {
            if b.stats.eligible {
                b.stats.points_in
            } else {
                0
            }
        })
        .collect();
    let requested_new = new_point_total(n, cfg.scale);
    let quotas = apportion(&weights, requested_new);
    if requested_new > 0 && weights.iter().all(|&w| w == 0) {
        warn!("no block can be triangulated; no points will be added");
    }

    let results: Vec<(BlockStats, Vec<Point3<f64>>)> = prepared
        .into_par_iter()
        .zip(quotas)
        .map(|(mut b, quota)| {
            b.stats.quota = quota;
            if quota == 0 {
                return Ok((b.stats, Vec::new()));
            }
            let fit = fit_model(&b.samples, &cfg.model)?;
            b.stats.iterations = fit.iterations();
            b.stats.initial_energy = Some(fit.initial_energy());
            b.stats.final_energy = Some(fit.final_energy());
            b.stats.fit_status = Some(fit.status);
            let points = match upsample_block(&b.samples, &fit.model, quota, cfg) {
                Ok(placed) => {
                    b.stats.rounds = placed.rounds;
                    placed.points
                }
                Err(e) => {
                    debug!("block {:?} skipped: {e}", b.stats.cell);
                    Vec::new()
                }
            };
            b.stats.achieved = points.len();
            Ok((b.stats, points))
        })
        .collect::<Result<_>>()?;

    let mut out = cloud.points.clone();
    let mut blocks = Vec::with_capacity(results.len());
    for (stats, points) in results {
        out.extend(points);
        blocks.push(stats);
    }
    let achieved_new = out.len() - n;
    let report = UpsampleReport {
        n_input: n,
        n_output: out.len(),
        scale: cfg.scale,
        achieved_scale: out.len() as f64 / n as f64,
        requested_new,
        achieved_new,
        shortfall: requested_new - achieved_new,
        grid_resolution: resolution,
        blocks_occupied: blocks.len(),
        blocks_eligible: blocks.iter().filter(|b| b.eligible).count(),
        blocks,
    };
    if report.shortfall > 0 {
        warn!(
            "requested {} new points, placed {}",
            report.requested_new, report.achieved_new
        );
    }
    Ok(UpsampleResult {
        cloud: PointCloud::new(out),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resample::GridResolution;
    use crate::spectral_model::ModelConfig;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane(n: usize, z: f64, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts: Vec<Point3<f64>> = (0..n)
            .map(|_| Point3::new(rng.random::<f64>(), rng.random::<f64>(), z))
            .collect();
        // pin the extent so the cloud is already normalized
        pts[0] = Point3::new(0.0, 0.0, z);
        pts[1] = Point3::new(1.0, 1.0, z);
        PointCloud::new(pts)
    }

    fn exact_cfg(scale: f64) -> UpsampleConfig {
        UpsampleConfig {
            scale,
            model: ModelConfig {
                gamma: 1.0,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn plane_scale_two_and_four() {
        let cloud = plane(1000, 0.3, 1);
        for scale in [2.0, 4.0] {
            let res = upsample_cloud(&cloud, &exact_cfg(scale)).unwrap();
            let target = (scale * 1000.0) as usize;
            assert_eq!(res.cloud.len(), target);
            assert_eq!(res.report.shortfall, 0);
            for p in &res.cloud.points[1000..] {
                assert!((p.z - 0.3).abs() <= 1e-9, "{p}");
            }
        }
    }

    #[test]
    fn originals_pass_through() {
        let cloud = plane(600, 0.7, 2);
        let res = upsample_cloud(&cloud, &UpsampleConfig::default()).unwrap();
        for (a, b) in cloud.points.iter().zip(&res.cloud.points) {
            assert_eq!(a.coords.map(f64::to_bits), b.coords.map(f64::to_bits));
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts: Vec<Point3<f64>> = (0..1500)
            .map(|_| {
                let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
                Point3::new(x, y, 0.5 + 0.2 * (3.0 * x).sin() * y)
            })
            .collect();
        pts[0] = Point3::new(0.0, 0.0, 0.5);
        pts[1] = Point3::new(1.0, 1.0, 0.5);
        let cloud = PointCloud::new(pts);
        let cfg = UpsampleConfig {
            scale: 2.5,
            ..Default::default()
        };
        let a = upsample_cloud(&cloud, &cfg).unwrap();
        let b = upsample_cloud(&cloud, &cfg).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.cloud.points, b.cloud.points);
        assert_eq!(a.cloud.len(), 1500 + a.report.achieved_new);
        assert_eq!(a.report.requested_new, 2250);
    }

    #[test]
    fn small_blocks_get_no_quota() {
        let mut pts = plane(400, 0.2, 4).points;
        // a lone point in the far corner cell
        pts.push(Point3::new(0.99, 0.99, 0.99));
        let cloud = PointCloud::new(pts);
        let cfg = UpsampleConfig {
            grid: GridResolution::Fixed(4),
            ..Default::default()
        };
        let res = upsample_cloud(&cloud, &cfg).unwrap();
        let lone = res
            .report
            .blocks
            .iter()
            .find(|b| b.cell == [3, 3, 3])
            .unwrap();
        assert!(!lone.eligible);
        assert_eq!(lone.quota, 0);
        assert_eq!(res.report.achieved_new, 401);
    }

    #[test]
    fn rejects_unnormalized_input() {
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)]);
        assert!(upsample_cloud(&cloud, &UpsampleConfig::default()).is_err());
    }
}
