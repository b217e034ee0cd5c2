//! Soft intersection of a chord with a discrete point cloud.
//!
//! Points inside a closed cylinder around the chord are candidates. Every
//! candidate whose k nearest neighbors are all candidates too yields one
//! intersection point: the combination of itself and those neighbors weighted
//! by each point's distance to the line.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::geometry::{Point, PointCloud};
use crate::lines::Chord;
use crate::spatial::KdTree;
use crate::stats::{knn_stats_with, neighbor_table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntersectionMode {
    /// Distance-weighted combination of a candidate and its neighbors.
    #[default]
    ConvexCombination,
    /// Every candidate point is an intersection as-is.
    AllCandidates,
}

/// Combination weights used in `ConvexCombination` mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinationWeights {
    /// Weight is the point's distance to the line.
    #[default]
    LineDistance,
    /// Weight is the reciprocal distance (experimental).
    InverseLineDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionParams {
    /// Cylinder radius.
    pub delta: f64,
    /// Neighbor count.
    pub k: usize,
    pub mode: IntersectionMode,
    pub weights: CombinationWeights,
}

pub const DEFAULT_NEIGHBORS: usize = 2;

impl IntersectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cylinder radius must be positive, got {}",
                self.delta
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter(
                "neighbor count must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// `delta = (√3/2)·d_nei` with `k = 2` and convex combinations.
pub fn default_params(cloud: &PointCloud) -> Result<IntersectionParams> {
    params_with_k(cloud, DEFAULT_NEIGHBORS)
}

/// As [`default_params`] but with `k` neighbors for both `d_nei` and the combination.
pub fn params_with_k(cloud: &PointCloud, k: usize) -> Result<IntersectionParams> {
    let d_nei = knn_stats_with(cloud, &KdTree::new(cloud), k)?;
    if d_nei <= 0.0 {
        return Err(Error::DegenerateCloud("mean neighbor distance is zero"));
    }
    Ok(IntersectionParams {
        delta: 3f64.sqrt() / 2.0 * d_nei,
        k,
        mode: IntersectionMode::ConvexCombination,
        weights: CombinationWeights::LineDistance,
    })
}

/// A cloud with its kd-tree and nearest-neighbor table.
#[derive(Debug, Clone)]
pub struct IndexedCloud {
    cloud: PointCloud,
    tree: KdTree,
    k: usize,
    neighbors: Vec<Vec<usize>>,
}

impl IndexedCloud {
    pub fn new(cloud: PointCloud, k: usize) -> Self {
        let tree = KdTree::new(&cloud);
        let neighbors = neighbor_table(&cloud, &tree, k);
        Self {
            cloud,
            tree,
            k,
            neighbors,
        }
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn tree(&self) -> &KdTree {
        &self.tree
    }

    pub fn points(&self) -> &[Point] {
        self.cloud.points()
    }

    /// The `k` nearest neighbors of point `i`, self excluded.
    pub fn neighbors(&self, i: usize, k: usize) -> Cow<'_, [usize]> {
        if k <= self.k {
            let stored = &self.neighbors[i];
            Cow::Borrowed(&stored[..k.min(stored.len())])
        } else {
            Cow::Owned(
                self.tree
                    .knn_excluding(&self.cloud.points()[i], k, Some(i))
                    .into_iter()
                    .map(|n| n.index)
                    .collect(),
            )
        }
    }
}

/// One intersection point with the cloud points it was combined from.
#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub point: Point,
    /// Scalar projection onto the chord direction, measured from `chord.a`.
    pub param: f64,
    /// `(point index, barycentric weight)`; weights sum to one.
    pub support: SmallVec<[(usize, f64); 4]>,
}

/// Intersections of one chord with one cloud, sorted along the chord.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntersectionSet {
    pub items: Vec<Intersection>,
}

impl IntersectionSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> + '_ {
        self.items.iter().map(|i| &i.point)
    }

    pub fn source_indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.items
            .iter()
            .map(|i| i.support.iter().map(|s| s.0).collect())
    }
}

/// Indices of cloud points in the closed cylinder of radius `delta` around
/// the chord segment, ascending.
pub fn candidate_points(chord: &Chord, cloud: &IndexedCloud, delta: f64) -> Vec<usize> {
    let length = chord.length();
    cloud
        .tree
        .cylinder(&chord.a, &chord.direction(), length, delta)
}

/// Soft intersection points of `chord` with `cloud`.
pub fn intersect(
    chord: &Chord,
    cloud: &IndexedCloud,
    params: &IntersectionParams,
) -> IntersectionSet {
    let dir = chord.direction();
    let candidates = candidate_points(chord, cloud, params.delta);
    let points = cloud.points();
    let line_distance = |p: &Point| {
        let rel = p - chord.a;
        (rel - dir * rel.dot(&dir)).norm()
    };

    let mut items: Vec<Intersection> = match params.mode {
        IntersectionMode::AllCandidates => candidates
            .iter()
            .map(|&i| Intersection {
                point: points[i],
                param: (points[i] - chord.a).dot(&dir),
                support: SmallVec::from_slice(&[(i, 1.0)]),
            })
            .collect(),
        IntersectionMode::ConvexCombination => {
            let mut out = Vec::new();
            for &center in &candidates {
                let neighbors = cloud.neighbors(center, params.k);
                if neighbors.len() < params.k
                    || !neighbors
                        .iter()
                        .all(|j| candidates.binary_search(j).is_ok())
                {
                    continue;
                }
                let mut support: SmallVec<[(usize, f64); 4]> = SmallVec::new();
                support.push((center, line_distance(&points[center])));
                support.extend(neighbors.iter().map(|&j| (j, line_distance(&points[j]))));
                if params.weights == CombinationWeights::InverseLineDistance {
                    for s in support.iter_mut() {
                        s.1 = 1.0 / (s.1 + 1e-12 * params.delta);
                    }
                }
                let total: f64 = support.iter().map(|s| s.1).sum();
                if total > 0.0 {
                    for s in support.iter_mut() {
                        s.1 /= total;
                    }
                } else {
                    let uniform = 1.0 / support.len() as f64;
                    for s in support.iter_mut() {
                        s.1 = uniform;
                    }
                }
                let point = support
                    .iter()
                    .fold(Point::zeros(), |acc, &(j, w)| acc + points[j] * w);
                out.push(Intersection {
                    point,
                    param: (point - chord.a).dot(&dir),
                    support,
                });
            }
            out
        }
    };
    items.sort_by(|x, y| {
        x.param
            .total_cmp(&y.param)
            .then(x.support[0].0.cmp(&y.support[0].0))
    });
    IntersectionSet { items }
}
