//! Regular dicing of the unit cube and per-block axis selection.
//!
//! Points keep their real-valued positions; the grid only decides which
//! points are modelled together. Within a block, the axis with the smallest
//! population variance becomes the modelled height `q`, and the other two
//! axes span the `(o, p)` parameter plane.

use std::collections::BTreeMap;

use nalgebra::Point3;
use serde::Serialize;

use crate::cloud_io::PointCloud;
use crate::error::{Error, Result};

/// Tolerance for coordinates that stray outside the unit cube.
pub const NORMALIZED_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Modelled axis `q` plus the two parameter axes `o`, `p` (in x, y, z order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AxisFrame {
    pub q_axis: Axis,
    pub o_axis: Axis,
    pub p_axis: Axis,
}

impl AxisFrame {
    pub fn with_q(q_axis: Axis) -> Self {
        let mut rest = Axis::ALL.into_iter().filter(|a| *a != q_axis);
        let o_axis = rest.next().unwrap();
        let p_axis = rest.next().unwrap();
        Self {
            q_axis,
            o_axis,
            p_axis,
        }
    }
}

/// Integer cell coordinates `(i, j, k)` along x, y, z.
pub type CellIndex = [usize; 3];

/// Points that fall into one dice, in cloud order.
#[derive(Debug, Clone)]
pub struct Block {
    pub cell: CellIndex,
    pub min_corner: [f64; 3],
    pub size: f64,
    /// Indices into the source cloud.
    pub indices: Vec<usize>,
    pub points: Vec<Point3<f64>>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct BlockGrid {
    pub resolution: usize,
    pub block_size: f64,
    /// Occupied cells only, iterated in lexicographic `(i, j, k)` order.
    pub blocks: BTreeMap<CellIndex, Block>,
}

impl BlockGrid {
    pub fn total_points(&self) -> usize {
        self.blocks.values().map(Block::len).sum()
    }

    /// Row-major linear index of a cell.
    pub fn linear_index(&self, cell: CellIndex) -> usize {
        (cell[0] * self.resolution + cell[1]) * self.resolution + cell[2]
    }
}

/// Heuristic grid resolution giving roughly 512·G² points per grid, clamped to [4, 64].
pub fn auto_grid_resolution(n_points: usize) -> usize {
    let g = (n_points as f64 / 512.0).sqrt().round() as usize;
    g.clamp(4, 64)
}

fn cell_coord(v: f64, resolution: usize) -> usize {
    let c = (v * resolution as f64).floor();
    if c <= 0.0 {
        0
    } else {
        (c as usize).min(resolution - 1)
    }
}

pub fn partition_blocks(cloud: &PointCloud, resolution: usize) -> Result<BlockGrid> {
    if resolution == 0 {
        return Err(Error::invalid("grid resolution must be at least 1"));
    }
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let block_size = 1.0 / resolution as f64;
    let mut blocks: BTreeMap<CellIndex, Block> = BTreeMap::new();
    for (idx, p) in cloud.points.iter().enumerate() {
        for &v in p.iter() {
            if !(-NORMALIZED_SLACK..=1.0 + NORMALIZED_SLACK).contains(&v) {
                return Err(Error::NotNormalized { value: v });
            }
        }
        let cell = [
            cell_coord(p.x, resolution),
            cell_coord(p.y, resolution),
            cell_coord(p.z, resolution),
        ];
        let block = blocks.entry(cell).or_insert_with(|| Block {
            cell,
            min_corner: cell.map(|c| c as f64 / resolution as f64),
            size: block_size,
            indices: Vec::new(),
            points: Vec::new(),
        });
        block.indices.push(idx);
        block.points.push(*p);
    }
    Ok(BlockGrid {
        resolution,
        block_size,
        blocks,
    })
}

/// Two-pass population variance, `Σ(v − mean)² / n`.
pub fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Picks the lowest-variance axis as `q`. Ties prefer z, then y, then x.
pub fn select_model_axis(block: &Block) -> AxisFrame {
    let variance = |axis: Axis| {
        let column: Vec<f64> = block.points.iter().map(|p| p[axis.index()]).collect();
        population_variance(&column)
    };
    let mut best = Axis::Z;
    let mut best_var = variance(Axis::Z);
    for axis in [Axis::Y, Axis::X] {
        let v = variance(axis);
        if v < best_var {
            best = axis;
            best_var = v;
        }
    }
    AxisFrame::with_q(best)
}

/// Block samples in the block's `(ō, p̄, q)` frame.
#[derive(Debug, Clone)]
pub struct LocalSamples {
    pub o: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub frame: AxisFrame,
    pub dice_min: [f64; 3],
    pub block_size: f64,
}

impl LocalSamples {
    /// Samples already expressed in a unit block (`q` along z, dice at the origin).
    pub fn unit(o: Vec<f64>, p: Vec<f64>, q: Vec<f64>) -> Self {
        assert!(o.len() == q.len() && p.len() == q.len());
        Self {
            o,
            p,
            q,
            frame: AxisFrame::with_q(Axis::Z),
            dice_min: [0.0; 3],
            block_size: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Maps a local `(ō, p̄, q)` triple back to global coordinates.
    pub fn to_global(&self, o_bar: f64, p_bar: f64, q: f64) -> Point3<f64> {
        let (oi, pi, qi) = (
            self.frame.o_axis.index(),
            self.frame.p_axis.index(),
            self.frame.q_axis.index(),
        );
        let mut out = [0.0; 3];
        out[oi] = self.dice_min[oi] + o_bar * self.block_size;
        out[pi] = self.dice_min[pi] + p_bar * self.block_size;
        out[qi] = q;
        Point3::from(out)
    }

    pub fn q_range(&self) -> (f64, f64) {
        self.q
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

pub fn to_local_frame(block: &Block, frame: AxisFrame) -> LocalSamples {
    let (oi, pi, qi) = (
        frame.o_axis.index(),
        frame.p_axis.index(),
        frame.q_axis.index(),
    );
    let local = |v: f64, axis: usize| ((v - block.min_corner[axis]) / block.size).clamp(0.0, 1.0);
    LocalSamples {
        o: block.points.iter().map(|p| local(p[oi], oi)).collect(),
        p: block.points.iter().map(|p| local(p[pi], pi)).collect(),
        q: block.points.iter().map(|p| p[qi]).collect(),
        frame,
        dice_min: block.min_corner,
        block_size: block.size,
    }
}
