use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Point3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static kd-tree over a point set with exact nearest-neighbour queries.
///
/// Distances are squared Euclidean distances computed as `dx² + dy² + dz²`
/// in that order, so results agree bit for bit with a linear scan using the
/// same formula. Equal distances resolve to the lowest point index.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3<f64>>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
pub(crate) fn dist2(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KdTree {
    pub fn new(points: &[Point3<f64>]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
            .unwrap();
        if hi[axis] == lo[axis] {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Index and squared distance of the nearest point, or `None` when empty.
    pub fn nearest(&self, query: &Point3<f64>) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Candidate {
            d2: f64::INFINITY,
            index: usize::MAX,
        };
        self.nearest_in(0, query, &mut best);
        Some((best.index, best.d2))
    }

    fn nearest_in(&self, node: usize, q: &Point3<f64>, best: &mut Candidate) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        d2: dist2(&self.points[i], q),
                        index: i,
                    };
                    if c < *best {
                        *best = c;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_in(near, q, best);
                // `value` is a coordinate of a stored point, so diff² never
                // exceeds the rounded distance to any point beyond the plane;
                // equality must still be visited for the index tie-break.
                if diff * diff <= best.d2 {
                    self.nearest_in(far, q, best);
                }
            }
        }
    }

    /// The `k` nearest points ordered by (distance, index).
    pub fn k_nearest(&self, query: &Point3<f64>, k: usize) -> Vec<usize> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_in(0, query, k, &mut heap);
        heap.into_sorted_vec()
            .into_iter()
            .map(|c| c.index)
            .collect()
    }

    fn knn_in(&self, node: usize, q: &Point3<f64>, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        d2: dist2(&self.points[i], q),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_in(near, q, k, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
                    self.knn_in(far, q, k, heap);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Point3<f64>], q: &Point3<f64>) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = dist2(p, q);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3<f64>> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                )
            })
            .collect()
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let pts = random_points(&mut rng, 300);
            let tree = KdTree::new(&pts);
            for q in random_points(&mut rng, 100) {
                assert_eq!(tree.nearest(&q).unwrap(), brute(&pts, &q));
            }
        }
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        // duplicated points and a lattice full of equidistant neighbours
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                pts.push(Point3::new(i as f64, j as f64, 0.0));
            }
        }
        pts.extend(pts.clone());
        let tree = KdTree::new(&pts);
        for i in 0..5 {
            for j in 0..5 {
                let q = Point3::new(i as f64 + 0.5, j as f64 + 0.5, 0.0);
                assert_eq!(tree.nearest(&q).unwrap(), brute(&pts, &q));
                let q = Point3::new(i as f64, j as f64, 0.0);
                assert_eq!(tree.nearest(&q).unwrap().0, i * 6 + j);
            }
        }
    }

    #[test]
    fn k_nearest_matches_sorted_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts = random_points(&mut rng, 200);
        let tree = KdTree::new(&pts);
        for q in random_points(&mut rng, 30) {
            let mut all: Vec<(f64, usize)> = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (dist2(p, &q), i))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let want: Vec<usize> = all.iter().take(16).map(|a| a.1).collect();
            assert_eq!(tree.k_nearest(&q, 16), want);
        }
        assert_eq!(tree.k_nearest(&Point3::origin(), 500).len(), 200);
    }

    #[test]
    fn empty_and_single() {
        assert!(KdTree::new(&[]).nearest(&Point3::origin()).is_none());
        let t = KdTree::new(&[Point3::new(1.0, 2.0, 3.0)]);
        assert_eq!(t.nearest(&Point3::origin()), Some((0, 14.0)));
    }
}
