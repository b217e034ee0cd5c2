//! Static kd-tree over a point set.
//!
//! Supports exact k-nearest-neighbor queries (ties broken by the smaller point
//! index) and closed-cylinder queries around a line segment. The tree is
//! immutable after construction and may be queried from many threads.

use std::cmp::Ordering;

use crate::geometry::{aabb_of, Point, PointCloud};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
struct Node {
    center: Point,
    half_diagonal: f64,
    lo: Point,
    hi: Point,
    start: usize,
    end: usize,
    /// Child node indices; `None` for leaves.
    children: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point>,
    /// Original index of each stored point.
    indices: Vec<usize>,
    nodes: Vec<Node>,
}

/// A neighbor returned by [`KdTree::knn`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[inline]
fn key_cmp(a: (f64, usize), b: (f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl KdTree {
    pub fn new(cloud: &PointCloud) -> Self {
        Self::from_points(cloud.points())
    }

    pub fn from_points(points: &[Point]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        if !points.is_empty() {
            build(points, &mut order, 0, &mut nodes);
        }
        Self {
            points: order.iter().map(|&i| points[i]).collect(),
            indices: order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `min(k, n)` nearest points to `query`, sorted by distance then index.
    pub fn knn(&self, query: &Point, k: usize) -> Vec<Neighbor> {
        self.knn_excluding(query, k, None)
    }

    /// As [`knn`](Self::knn) but never returns the point with index `exclude`.
    pub fn knn_excluding(&self, query: &Point, k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.knn_node(0, query, k, exclude, &mut best);
        }
        best.into_iter()
            .map(|(d2, index)| Neighbor {
                index,
                distance: d2.sqrt(),
            })
            .collect()
    }

    /// Nearest point to `query`; `None` on an empty tree.
    pub fn nearest(&self, query: &Point) -> Option<Neighbor> {
        self.knn(query, 1).into_iter().next()
    }

    fn knn_node(
        &self,
        node: usize,
        query: &Point,
        k: usize,
        exclude: Option<usize>,
        best: &mut Vec<(f64, usize)>,
    ) {
        let n = &self.nodes[node];
        if best.len() == k {
            let bound = aabb_distance2(query, &n.lo, &n.hi);
            if bound > best[k - 1].0 {
                return;
            }
        }
        match n.children {
            None => {
                for slot in n.start..n.end {
                    let index = self.indices[slot];
                    if Some(index) == exclude {
                        continue;
                    }
                    let key = ((self.points[slot] - query).norm_squared(), index);
                    if best.len() == k && key_cmp(key, best[k - 1]) != Ordering::Less {
                        continue;
                    }
                    let pos = best
                        .binary_search_by(|probe| key_cmp(*probe, key))
                        .unwrap_or_else(|p| p);
                    best.insert(pos, key);
                    best.truncate(k);
                }
            }
            Some((left, right)) => {
                let dl = aabb_distance2(query, &self.nodes[left].lo, &self.nodes[left].hi);
                let dr = aabb_distance2(query, &self.nodes[right].lo, &self.nodes[right].hi);
                let (first, second) = if dl <= dr {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_node(first, query, k, exclude, best);
                self.knn_node(second, query, k, exclude, best);
            }
        }
    }

    /// Indices of all points inside the closed cylinder of radius `radius`
    /// around segment `[start, start + length * direction]`, capped by the
    /// planes through the endpoints. `direction` must be unit length.
    /// Result is sorted by point index.
    pub fn cylinder(
        &self,
        start: &Point,
        direction: &Point,
        length: f64,
        radius: f64,
    ) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.nodes.is_empty() {
            self.cylinder_node(0, start, direction, length, radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn cylinder_node(
        &self,
        node: usize,
        start: &Point,
        direction: &Point,
        length: f64,
        radius: f64,
        out: &mut Vec<usize>,
    ) {
        let n = &self.nodes[node];
        let rel = n.center - start;
        let s = rel.dot(direction).clamp(0.0, length);
        let seg_dist2 = (rel - direction * s).norm_squared();
        let reach = n.half_diagonal + radius;
        if seg_dist2 > reach * reach {
            return;
        }
        match n.children {
            None => {
                for slot in n.start..n.end {
                    if in_cylinder(&self.points[slot], start, direction, length, radius) {
                        out.push(self.indices[slot]);
                    }
                }
            }
            Some((left, right)) => {
                self.cylinder_node(left, start, direction, length, radius, out);
                self.cylinder_node(right, start, direction, length, radius, out);
            }
        }
    }
}

/// Closed-cylinder membership test shared by the tree and brute-force scans.
#[inline]
pub fn in_cylinder(p: &Point, start: &Point, direction: &Point, length: f64, radius: f64) -> bool {
    let rel = p - start;
    let s = rel.dot(direction);
    if !(0.0..=length).contains(&s) {
        return false;
    }
    (rel - direction * s).norm_squared() <= radius * radius
}

#[inline]
fn aabb_distance2(p: &Point, lo: &Point, hi: &Point) -> f64 {
    let mut d2 = 0.0;
    for axis in 0..3 {
        let v = p[axis];
        let excess = if v < lo[axis] {
            lo[axis] - v
        } else if v > hi[axis] {
            v - hi[axis]
        } else {
            0.0
        };
        d2 += excess * excess;
    }
    d2
}

fn build(points: &[Point], order: &mut [usize], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let (lo, hi) = aabb_of(order.iter().map(|&i| &points[i])).expect("non-empty node");
    let id = nodes.len();
    nodes.push(Node {
        center: (lo + hi) * 0.5,
        half_diagonal: (hi - lo).norm() * 0.5,
        lo,
        hi,
        start: offset,
        end: offset + order.len(),
        children: None,
    });
    if order.len() > LEAF_SIZE {
        let extent = hi - lo;
        let axis = extent.imax();
        if extent[axis] > 0.0 {
            let mid = order.len() / 2;
            order.select_nth_unstable_by(mid, |&a, &b| {
                points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
            });
            let (left, right) = order.split_at_mut(mid);
            let l = build(points, left, offset, nodes);
            let r = build(points, right, offset + mid, nodes);
            nodes[id].children = Some((l, r));
        }
    }
    id
}
