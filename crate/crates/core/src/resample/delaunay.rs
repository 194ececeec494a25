//! Planar Delaunay triangulation.
//!
//! Points are inserted in lexicographic order, so every new point lies
//! outside the current convex hull and is joined to the hull edges it can
//! see. New edges are legalized by Lawson flips, and a final sweep over all
//! interior edges re-checks the empty-circumcircle condition. Orientation and
//! in-circle tests use exact adaptive predicates. Exactly cocircular quads
//! keep whichever diagonal has the lexicographically smaller sorted index
//! pair, which makes the output independent of insertion history.

use std::collections::HashMap;

use robust::{incircle, orient2d, Coord};

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Point sets whose points all lie within this distance of a line are rejected.
pub const COLLINEAR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Triangulation {
    /// Input positions, in input order.
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Undirected edges as sorted index pairs, sorted lexicographically.
    pub edges: Vec<[usize; 2]>,
}

#[inline]
fn coord(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

/// Fails if the point set has fewer than three distinct points or is
/// (numerically) collinear.
pub fn check_triangulable(points: &[[f64; 2]]) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::NotTriangulable("fewer than three points"));
    }
    if points
        .iter()
        .any(|p| !p[0].is_finite() || !p[1].is_finite())
    {
        return Err(Error::NotTriangulable("non-finite coordinate"));
    }
    let lex = |a: &&[f64; 2], b: &&[f64; 2]| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]));
    let lo = *points.iter().min_by(lex).unwrap();
    let hi = *points.iter().max_by(lex).unwrap();
    let (dx, dy) = (hi[0] - lo[0], hi[1] - lo[1]);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return Err(Error::NotTriangulable("all points coincide"));
    }
    let off_line = points
        .iter()
        .map(|p| ((p[0] - lo[0]) * dy - (p[1] - lo[1]) * dx).abs() / len)
        .fold(0.0, f64::max);
    if off_line <= COLLINEAR_TOLERANCE {
        return Err(Error::NotTriangulable("all points are collinear"));
    }
    Ok(())
}

struct Mesh<'a> {
    pts: &'a [[f64; 2]],
    tri: Vec<[usize; 3]>,
    /// `nbr[t][i]` is the triangle across the edge opposite `tri[t][i]`.
    nbr: Vec<[usize; 3]>,
    hull_next: Vec<usize>,
    hull_prev: Vec<usize>,
    /// Directed counter-clockwise hull edge → the triangle on its inner side.
    hull_tri: HashMap<(usize, usize), usize>,
}

impl<'a> Mesh<'a> {
    fn new(pts: &'a [[f64; 2]]) -> Self {
        Self {
            pts,
            tri: Vec::with_capacity(2 * pts.len()),
            nbr: Vec::with_capacity(2 * pts.len()),
            hull_next: vec![NONE; pts.len()],
            hull_prev: vec![NONE; pts.len()],
            hull_tri: HashMap::new(),
        }
    }

    fn orient(&self, a: usize, b: usize, c: usize) -> f64 {
        orient2d(coord(self.pts[a]), coord(self.pts[b]), coord(self.pts[c]))
    }

    fn add(&mut self, v: [usize; 3]) -> usize {
        debug_assert!(self.orient(v[0], v[1], v[2]) > 0.0);
        self.tri.push(v);
        self.nbr.push([NONE; 3]);
        self.tri.len() - 1
    }

    fn replace_neighbor(&mut self, t: usize, old: usize, new: usize) {
        for slot in self.nbr[t].iter_mut() {
            if *slot == old {
                *slot = new;
            }
        }
    }

    /// Slot of `t` whose opposite edge is `{a, b}`.
    fn slot_opposite(&self, t: usize, a: usize, b: usize) -> usize {
        (0..3)
            .find(|&i| self.tri[t][i] != a && self.tri[t][i] != b)
            .expect("triangle shares the edge")
    }

    /// Whether edge `(v1, v2)` of CCW triangle `(v0, v1, v2)` should be
    /// replaced by `(v0, w)`, where `w` is across the edge.
    fn should_flip(&self, v0: usize, v1: usize, v2: usize, w: usize) -> bool {
        let p = self.pts;
        let ic = incircle(coord(p[v0]), coord(p[v1]), coord(p[v2]), coord(p[w]));
        if ic > 0.0 {
            true
        } else if ic < 0.0 {
            false
        } else {
            (v0.min(w), v0.max(w)) < (v1.min(v2), v1.max(v2))
        }
    }

    /// Flips the edge opposite `tri[t][i]` if it is not locally Delaunay.
    /// Afterwards `t = (v0, v1, w)` and `u = (v0, w, v2)`.
    fn try_flip(&mut self, t: usize, i: usize) -> Option<usize> {
        let u = self.nbr[t][i];
        if u == NONE {
            return None;
        }
        let v0 = self.tri[t][i];
        let v1 = self.tri[t][(i + 1) % 3];
        let v2 = self.tri[t][(i + 2) % 3];
        let j = self.slot_opposite(u, v1, v2);
        let w = self.tri[u][j];
        if !self.should_flip(v0, v1, v2, w) {
            return None;
        }
        debug_assert_eq!(self.tri[u][(j + 1) % 3], v2);
        let a = self.nbr[t][(i + 2) % 3]; // v0-v1
        let b = self.nbr[t][(i + 1) % 3]; // v2-v0
        let c = self.nbr[u][(j + 1) % 3]; // v1-w
        let d = self.nbr[u][(j + 2) % 3]; // w-v2

        self.tri[t] = [v0, v1, w];
        self.nbr[t] = [c, u, a];
        self.tri[u] = [v0, w, v2];
        self.nbr[u] = [d, b, t];

        if c == NONE {
            self.hull_tri.insert((v1, w), t);
        } else {
            self.replace_neighbor(c, u, t);
        }
        if b == NONE {
            self.hull_tri.insert((v2, v0), u);
        } else {
            self.replace_neighbor(b, t, u);
        }
        Some(u)
    }

    /// Seeds the mesh with a fan from `apex` over the collinear `chain`.
    fn seed(&mut self, chain: &[usize], apex: usize) {
        let left = self.orient(chain[0], chain[1], apex) > 0.0;
        let m = chain.len() - 1;
        let mut fan = Vec::with_capacity(m);
        for j in 0..m {
            let (a, b) = (chain[j], chain[j + 1]);
            let t = if left {
                self.add([a, b, apex])
            } else {
                self.add([b, a, apex])
            };
            fan.push(t);
        }
        for j in 0..m {
            let t = fan[j];
            let prev = if j > 0 { fan[j - 1] } else { NONE };
            let next = if j + 1 < m { fan[j + 1] } else { NONE };
            // left: t = (c_j, c_j+1, apex); right: t = (c_j+1, c_j, apex)
            if left {
                self.nbr[t] = [next, prev, NONE];
            } else {
                self.nbr[t] = [prev, next, NONE];
            }
        }

        let first = chain[0];
        let last = chain[m];
        let link = |from: usize, to: usize, t: usize, mesh: &mut Self| {
            mesh.hull_next[from] = to;
            mesh.hull_prev[to] = from;
            mesh.hull_tri.insert((from, to), t);
        };
        if left {
            for j in 0..m {
                link(chain[j], chain[j + 1], fan[j], self);
            }
            link(last, apex, fan[m - 1], self);
            link(apex, first, fan[0], self);
        } else {
            for j in 0..m {
                link(chain[j + 1], chain[j], fan[j], self);
            }
            link(first, apex, fan[0], self);
            link(apex, last, fan[m - 1], self);
        }
    }

    fn edge_visible(&self, from: usize, p: usize) -> bool {
        self.orient(from, self.hull_next[from], p) < 0.0
    }

    /// Joins `p`, which lies outside the hull, to every hull edge it sees.
    fn insert_outside(&mut self, p: usize, near: usize) {
        let start = if self.edge_visible(near, p) {
            near
        } else if self.edge_visible(self.hull_prev[near], p) {
            self.hull_prev[near]
        } else {
            let mut v = self.hull_next[near];
            while !self.edge_visible(v, p) {
                v = self.hull_next[v];
                assert_ne!(v, near, "point outside the hull sees no hull edge");
            }
            v
        };

        let mut first = start;
        while self.edge_visible(self.hull_prev[first], p) && self.hull_prev[first] != start {
            first = self.hull_prev[first];
        }
        let mut chain = vec![first];
        let mut v = first;
        while self.edge_visible(v, p) {
            v = self.hull_next[v];
            chain.push(v);
        }

        let mut fan = Vec::with_capacity(chain.len() - 1);
        for w in chain.windows(2) {
            let (a, b) = (w[0], w[1]);
            let t = self.add([p, b, a]);
            let inner = self
                .hull_tri
                .remove(&(a, b))
                .expect("hull edge has an inner triangle");
            self.nbr[t][0] = inner;
            let s = self.slot_opposite(inner, a, b);
            self.nbr[inner][s] = t;
            fan.push(t);
        }
        for w in fan.windows(2) {
            self.nbr[w[0]][2] = w[1];
            self.nbr[w[1]][1] = w[0];
        }

        let (head, tail) = (chain[0], *chain.last().unwrap());
        for &inner in &chain[1..chain.len() - 1] {
            self.hull_next[inner] = NONE;
            self.hull_prev[inner] = NONE;
        }
        self.hull_next[head] = p;
        self.hull_prev[p] = head;
        self.hull_next[p] = tail;
        self.hull_prev[tail] = p;
        self.hull_tri.insert((head, p), fan[0]);
        self.hull_tri.insert((p, tail), *fan.last().unwrap());

        let mut stack = fan;
        while let Some(t) = stack.pop() {
            if let Some(u) = self.try_flip(t, 0) {
                stack.push(t);
                stack.push(u);
            }
        }
    }

    /// Lawson sweep until every interior edge is locally Delaunay.
    fn legalize_all(&mut self) {
        let mut stack: Vec<(usize, usize)> = (0..self.tri.len())
            .flat_map(|t| (0..3).map(move |i| (t, i)))
            .filter(|&(t, i)| self.nbr[t][i] != NONE)
            .collect();
        while let Some((t, i)) = stack.pop() {
            if let Some(u) = self.try_flip(t, i) {
                stack.extend_from_slice(&[(t, 0), (t, 2), (u, 0), (u, 1)]);
            }
        }
    }
}

pub fn delaunay(points: &[[f64; 2]]) -> Result<Triangulation> {
    check_triangulable(points)?;

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
            .then(a.cmp(&b))
    });
    order.dedup_by(|b, a| points[*a] == points[*b]);

    let mut mesh = Mesh::new(points);
    let apex_pos = (2..order.len())
        .find(|&k| mesh.orient(order[0], order[1], order[k]) != 0.0)
        .ok_or(Error::NotTriangulable("all points are collinear"))?;
    mesh.seed(&order[..apex_pos], order[apex_pos]);

    let mut last = order[apex_pos];
    for &p in &order[apex_pos + 1..] {
        mesh.insert_outside(p, last);
        last = p;
    }
    mesh.legalize_all();

    let mut edges: Vec<[usize; 2]> = mesh
        .tri
        .iter()
        .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])].map(|(a, b)| [a.min(b), a.max(b)]))
        .collect();
    edges.sort_unstable();
    edges.dedup();

    Ok(Triangulation {
        vertices: points.to_vec(),
        triangles: mesh.tri,
        edges,
    })
}

/// One candidate insertion position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Midpoint {
    pub position: [f64; 2],
    /// Length of the parent edge.
    pub edge_length: f64,
    pub edge: [usize; 2],
}

/// Midpoint of every undirected edge, sorted lexicographically by position.
pub fn edge_midpoints(tri: &Triangulation) -> Vec<Midpoint> {
    let mut mids: Vec<Midpoint> = tri
        .edges
        .iter()
        .map(|&[a, b]| {
            let (pa, pb) = (tri.vertices[a], tri.vertices[b]);
            Midpoint {
                position: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
                edge_length: (pb[0] - pa[0]).hypot(pb[1] - pa[1]),
                edge: [a, b],
            }
        })
        .collect();
    mids.sort_by(|a, b| {
        a.position[0]
            .total_cmp(&b.position[0])
            .then(a.position[1].total_cmp(&b.position[1]))
            .then(a.edge.cmp(&b.edge))
    });
    mids
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    /// Plain floating-point in-circle determinant, positive when `d` is inside.
    fn incircle_det(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
        let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
        let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
        let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
        let (ad, bd, cd) = (
            adx * adx + ady * ady,
            bdx * bdx + bdy * bdy,
            cdx * cdx + cdy * cdy,
        );
        adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
    }

    fn assert_delaunay(tri: &Triangulation) {
        for t in &tri.triangles {
            let [a, b, c] = t.map(|i| tri.vertices[i]);
            let area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            assert!(area > 0.0, "triangle not counter-clockwise");
            for (i, &d) in tri.vertices.iter().enumerate() {
                if t.contains(&i) {
                    continue;
                }
                assert!(
                    incircle_det(a, b, c, d) <= 1e-12,
                    "vertex {i} inside circumcircle"
                );
            }
        }
    }

    fn random_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
        (0..n)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect()
    }

    #[test]
    fn single_triangle() {
        let tri = delaunay(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(tri.triangles.len(), 1);
        assert_eq!(tri.edges.len(), 3);
    }

    #[test]
    fn fan_around_interior_point() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, 0.3]];
        let tri = delaunay(&pts).unwrap();
        assert_eq!(tri.triangles.len(), 3);
        assert_eq!(tri.edges.len(), 6);
        assert_eq!(edge_midpoints(&tri).len(), 6);
    }

    #[test]
    fn errors_for_degenerate_input() {
        assert!(matches!(
            delaunay(&[[0.0, 0.0], [1.0, 1.0]]),
            Err(Error::NotTriangulable(_))
        ));
        let line: Vec<_> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert!(matches!(delaunay(&line), Err(Error::NotTriangulable(_))));
        let near_line = [[0.0, 0.0], [0.5, 1e-14], [1.0, 0.0]];
        assert!(delaunay(&near_line).is_err());
        let dupes = [[0.2, 0.2], [0.2, 0.2], [0.2, 0.2]];
        assert!(delaunay(&dupes).is_err());
    }

    #[test]
    fn collinear_prefix_then_apex() {
        let mut pts: Vec<_> = (0..6).map(|i| [0.0, i as f64 * 0.2]).collect();
        pts.push([0.7, 0.5]);
        pts.push([-0.4, 0.3]);
        let tri = delaunay(&pts).unwrap();
        assert_delaunay(&tri);
        // hull is (0,0), (0.7,0.5), (0,1), (-0.4,0.3); T = 2n - h - 2
        assert_eq!(tri.triangles.len(), 2 * 8 - 4 - 2);
    }

    #[test]
    fn duplicates_are_ignored() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let tri = delaunay(&pts).unwrap();
        assert_eq!(tri.triangles.len(), 2);
        assert!(tri.triangles.iter().all(|t| !t.contains(&3)));
    }

    #[test]
    fn cocircular_square_grid_is_deterministic() {
        let pts: Vec<_> = (0..5)
            .flat_map(|i| (0..5).map(move |j| [i as f64 * 0.25, j as f64 * 0.25]))
            .collect();
        let a = delaunay(&pts).unwrap();
        assert_delaunay(&a);
        assert_eq!(a.triangles.len(), 32);
        // each cell keeps the diagonal with the smaller index pair
        for i in 0..4 {
            for j in 0..4 {
                let (p00, p01, p10, p11) = (
                    i * 5 + j,
                    i * 5 + j + 1,
                    (i + 1) * 5 + j,
                    (i + 1) * 5 + j + 1,
                );
                let d1 = [p00, p11];
                let d2 = [p01.min(p10), p01.max(p10)];
                let keep = d1.min(d2);
                assert!(a.edges.binary_search(&keep).is_ok());
            }
        }
        let b = delaunay(&pts).unwrap();
        assert_eq!(a.triangles, b.triangles);
    }

    #[test]
    fn random_instances_are_delaunay() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..30 {
            let n = rng.random_range(3..150);
            let pts = random_points(n, &mut rng);
            let tri = delaunay(&pts).unwrap();
            assert_delaunay(&tri);
        }
    }

    #[test]
    fn euler_counts_and_edge_dedup() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = random_points(200, &mut rng);
        let tri = delaunay(&pts).unwrap();
        let brute: BTreeSet<[usize; 2]> = tri
            .triangles
            .iter()
            .flat_map(|t| {
                let mut out = Vec::new();
                for i in 0..3 {
                    for j in 0..3 {
                        if i < j {
                            out.push([t[i].min(t[j]), t[i].max(t[j])]);
                        }
                    }
                }
                out
            })
            .collect();
        assert_eq!(brute.len(), tri.edges.len());
        assert_eq!(edge_midpoints(&tri).len(), brute.len());
        // V - E + F = 2 with the outer face
        assert_eq!(200 + tri.triangles.len() + 1, tri.edges.len() + 2);
    }

    #[test]
    fn triangle_midpoints() {
        let tri = delaunay(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let mids: Vec<_> = edge_midpoints(&tri).iter().map(|m| m.position).collect();
        assert_eq!(mids, vec![[0.0, 0.5], [0.5, 0.0], [0.5, 0.5]]);
        let lens: Vec<_> = edge_midpoints(&tri).iter().map(|m| m.edge_length).collect();
        assert_eq!(lens[0], 1.0);
        assert!((lens[2] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn clustered_and_gridded_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut pts: Vec<[f64; 2]> = (0..20)
            .flat_map(|i| (0..20).map(move |j| [i as f64 / 19.0, j as f64 / 19.0]))
            .collect();
        pts.extend((0..100).map(|_| {
            [
                0.5 + 1e-6 * rng.random::<f64>(),
                0.5 + 1e-6 * rng.random::<f64>(),
            ]
        }));
        let tri = delaunay(&pts).unwrap();
        assert_delaunay(&tri);
    }
}
