use nalgebra::Point3;

use super::delaunay::{delaunay, edge_midpoints};
use super::UpsampleConfig;
use crate::error::Result;
use crate::partition::LocalSamples;
use crate::spectral_model::SurfaceModel;

/// Maximum number of triangulate-and-split rounds per block.
pub const MAX_ROUNDS: usize = 8;

/// New points produced for one block.
#[derive(Debug, Clone, Default)]
pub struct BlockPlacement {
    /// New points in global coordinates, in generation order.
    pub points: Vec<Point3<f64>>,
    /// Parameter-plane positions of the new points.
    pub positions: Vec<[f64; 2]>,
    pub rounds: usize,
    /// `quota − points.len()`.
    pub shortfall: usize,
}

/// Places `quota` new points in a block.
///
/// Candidates are the midpoints of all Delaunay edges over the current
/// vertex set. While a round yields fewer candidates than still required,
/// all of them are accepted and become vertices for the next round. In the
/// final round the candidates with the longest parent edges are taken.
/// Heights come from the fitted model, clamped to the block's height range
/// widened by `clamp_margin` on both sides.
pub fn upsample_block(
    samples: &LocalSamples,
    model: &SurfaceModel,
    quota: usize,
    cfg: &UpsampleConfig,
) -> Result<BlockPlacement> {
    let mut out = BlockPlacement::default();
    if quota == 0 {
        return Ok(out);
    }

    let mut vertices: Vec<[f64; 2]> = samples
        .o
        .iter()
        .zip(&samples.p)
        .map(|(&o, &p)| [o, p])
        .collect();
    let mut remaining = quota;
    while remaining > 0 && out.rounds < MAX_ROUNDS {
        let tri = delaunay(&vertices)?;
        let mut mids = edge_midpoints(&tri);
        out.rounds += 1;
        if mids.len() >= remaining {
            // stable sort keeps lexicographic order among equal lengths
            mids.sort_by(|a, b| b.edge_length.total_cmp(&a.edge_length));
            out.positions
                .extend(mids.iter().take(remaining).map(|m| m.position));
            remaining = 0;
        } else {
            remaining -= mids.len();
            out.positions.extend(mids.iter().map(|m| m.position));
            vertices.extend(mids.iter().map(|m| m.position));
        }
    }
    out.shortfall = remaining;

    let (q_min, q_max) = samples.q_range();
    let margin = cfg.clamp_margin * (q_max - q_min);
    let (lo, hi) = (q_min - margin, q_max + margin);
    out.points = out
        .positions
        .iter()
        .map(|&[o, p]| {
            let q = model.eval(o, p).clamp(lo, hi);
            samples.to_global(o, p, q)
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::spectral_model::{basis_eval, fit_model, Term};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dc(c: f64) -> SurfaceModel {
        SurfaceModel {
            terms: vec![Term {
                k: 0,
                l: 0,
                coeff: c,
            }],
        }
    }

    #[test]
    fn zero_quota_is_noop() {
        let s = LocalSamples::unit(vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.1; 3]);
        let out = upsample_block(&s, &dc(0.1), 0, &UpsampleConfig::default()).unwrap();
        assert!(out.points.is_empty());
        assert_eq!(out.rounds, 0);
    }

    #[test]
    fn fan_block_with_constant_model() {
        let s = LocalSamples::unit(
            vec![0.0, 1.0, 0.5, 0.5],
            vec![0.0, 0.0, 1.0, 0.3],
            vec![0.2; 4],
        );
        let out = upsample_block(&s, &dc(0.2), 6, &UpsampleConfig::default()).unwrap();
        assert_eq!(out.points.len(), 6);
        assert_eq!(out.rounds, 1);
        assert!(out.points.iter().all(|p| p.z == 0.2));
    }

    #[test]
    fn collinear_block_is_not_triangulable() {
        let s = LocalSamples::unit(vec![0.1, 0.2, 0.3], vec![0.1, 0.2, 0.3], vec![0.0; 3]);
        assert!(matches!(
            upsample_block(&s, &dc(0.0), 3, &UpsampleConfig::default()),
            Err(Error::NotTriangulable(_))
        ));
    }

    #[test]
    fn cosine_block_heights_match_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let o: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
        let p: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
        let q = o
            .iter()
            .zip(&p)
            .map(|(&a, &b)| 0.5 + 0.1 * basis_eval(1, 1, a, b))
            .collect();
        let s = LocalSamples::unit(o, p, q);
        let cfg = UpsampleConfig::default();
        let model = fit_model(&s, &cfg.model).unwrap().model;
        let out = upsample_block(&s, &model, 64, &cfg).unwrap();
        assert_eq!(out.rounds, 1);
        assert_eq!(out.points.len(), 64);
        let (q_lo, q_hi) = s.q_range();
        let m = 0.5 * (q_hi - q_lo);
        for (pt, pos) in out.points.iter().zip(&out.positions) {
            let direct: f64 = model
                .terms
                .iter()
                .map(|t| {
                    t.coeff
                        * (std::f64::consts::PI * t.k as f64 * pos[0]).cos()
                        * (std::f64::consts::PI * t.l as f64 * pos[1]).cos()
                })
                .sum();
            let expected = direct.clamp(q_lo - m, q_hi + m);
            assert!((pt.z - expected).abs() <= 1e-12);
            assert_eq!((pt.x, pt.y), (pos[0], pos[1]));
        }
    }

    #[test]
    fn recursion_and_longest_edge_selection() {
        let s = LocalSamples::unit(vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0; 3]);
        // one triangle gives 3 midpoints; 5 more need a second round
        let out = upsample_block(&s, &dc(0.0), 8, &UpsampleConfig::default()).unwrap();
        assert_eq!(out.rounds, 2);
        assert_eq!(out.points.len(), 8);
        assert_eq!(&out.positions[..3], &[[0.0, 0.5], [0.5, 0.0], [0.5, 0.5]]);

        // a single candidate from the first round: the hypotenuse midpoint
        let one = upsample_block(&s, &dc(0.0), 1, &UpsampleConfig::default()).unwrap();
        assert_eq!(one.positions, vec![[0.5, 0.5]]);
    }

    #[test]
    fn heights_are_clamped() {
        let s = LocalSamples::unit(
            vec![0.0, 1.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![0.0, 0.1, 0.1, 0.0],
        );
        let wild = dc(5.0);
        let out = upsample_block(&s, &wild, 5, &UpsampleConfig::default()).unwrap();
        let hi = 0.1 + 0.5 * 0.1;
        assert!(out.points.iter().all(|p| p.z == hi));
    }
}
