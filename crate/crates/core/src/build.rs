//! Tree embeddings of a point cloud.
//!
//! Both builders emit nodes in breadth-first order (so parents precede
//! children), map every point to the leaf of its final cell or cluster, and
//! seed the edge weights with a default metric: `2^-depth` for the QuadTree,
//! parent-to-child center distance for the ClusterTree.

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{GroundMetric, PointCloud};
use crate::error::{Error, Result};
use crate::tree::Tree;

pub const DEFAULT_DEPTH: usize = 6;
pub const DEFAULT_BRANCHING: usize = 4;

/// Deepest supported QuadTree level; cell codes are stored as `u64`.
pub const MAX_QUADTREE_DEPTH: usize = 52;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadTreeConfig {
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for QuadTreeConfig {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_DEPTH,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClusterTreeConfig {
    pub branching: usize,
    pub max_depth: usize,
    pub seed: u64,
    pub metric: GroundMetric,
}

impl Default for ClusterTreeConfig {
    fn default() -> Self {
        Self {
            branching: DEFAULT_BRANCHING,
            max_depth: DEFAULT_DEPTH,
            seed: 0,
            metric: GroundMetric::Euclidean,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TreeMethod {
    QuadTree,
    Cluster,
}

impl TreeMethod {
    pub fn name(self) -> &'static str {
        match self {
            TreeMethod::QuadTree => "quadtree",
            TreeMethod::Cluster => "cluster",
        }
    }
}

impl FromStr for TreeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadtree" => Ok(Self::QuadTree),
            "cluster" => Ok(Self::Cluster),
            other => Err(Error::InvalidConfig(format!("unknown tree method `{other}`"))),
        }
    }
}

/// Everything needed to build one tree of either kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeSpec {
    pub method: TreeMethod,
    pub max_depth: usize,
    pub branching: usize,
    pub metric: GroundMetric,
    pub seed: u64,
}

impl TreeSpec {
    pub fn new(method: TreeMethod) -> Self {
        Self {
            method,
            max_depth: DEFAULT_DEPTH,
            branching: DEFAULT_BRANCHING,
            metric: GroundMetric::Euclidean,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn build(&self, cloud: &PointCloud) -> Result<Tree> {
        match self.method {
            TreeMethod::QuadTree => build_quadtree(
                cloud,
                &QuadTreeConfig {
                    max_depth: self.max_depth,
                    seed: self.seed,
                },
            ),
            TreeMethod::Cluster => build_clustertree(
                cloud,
                &ClusterTreeConfig {
                    branching: self.branching,
                    max_depth: self.max_depth,
                    seed: self.seed,
                    metric: self.metric,
                },
            ),
        }
    }
}

/// Seed of slice `t` given a base seed. Slice 0 uses the base seed itself.
pub fn slice_seed(base: u64, t: usize) -> u64 {
    if t == 0 {
        return base;
    }
    // splitmix64 finalizer
    let mut z = base ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-dimension offsets uniform in `[0, side)`; all zero when `side` is 0.
pub fn random_shift(seed: u64, side: f64, dim: usize) -> Vec<f64> {
    if side <= 0.0 {
        return vec![0.0; dim];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random::<f64>() * side).collect()
}

/// Per-dimension minimum and the largest per-dimension extent.
fn bounding_box(cloud: &PointCloud) -> (Vec<f64>, f64) {
    let dim = cloud.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in cloud.points() {
        for d in 0..dim {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let side = lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max);
    (lo, side)
}

fn all_coincide(cloud: &PointCloud, pts: &[usize]) -> bool {
    let first = cloud.point(pts[0]);
    pts[1..].iter().all(|&p| cloud.point(p) == first)
}

/// Randomly shifted QuadTree over occupied cells only.
///
/// With `L` the largest extent of the bounding box and `s` a random shift in
/// `[0, L)^d`, the root cell is the cube of side `2L` with lower corner
/// `min - s`, which always contains every point. A cell at depth `ℓ` is split
/// at its midpoint along every dimension and only the occupied children are
/// materialized, so the node count stays below `N · max_depth + 1` whatever
/// the dimension. A non-root cell becomes a leaf when it holds one distinct
/// point or sits at `max_depth`.
pub fn build_quadtree(cloud: &PointCloud, cfg: &QuadTreeConfig) -> Result<Tree> {
    if cfg.max_depth == 0 || cfg.max_depth > MAX_QUADTREE_DEPTH {
        return Err(Error::InvalidConfig(format!(
            "quadtree depth must be in 1..={MAX_QUADTREE_DEPTH}, got {}",
            cfg.max_depth
        )));
    }
    let (_, side) = bounding_box(cloud);
    let shift = random_shift(cfg.seed, side, cloud.dim());
    Ok(quadtree_with_shift(cloud, cfg.max_depth, &shift))
}

pub(crate) fn quadtree_with_shift(cloud: &PointCloud, max_depth: usize, shift: &[f64]) -> Tree {
    let dim = cloud.dim();
    let (lo, side) = bounding_box(cloud);

    // Position of each coordinate inside the root cube, in [0, 1).
    let unit: Vec<f64> = cloud
        .points()
        .flat_map(|p| {
            (0..dim).map(|d| {
                if side > 0.0 {
                    ((p[d] - lo[d] + shift[d]) / (2.0 * side)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
        })
        .collect();
    // Bit of the cell code along dimension `d` chosen when splitting at `level`.
    let child_bit = |p: usize, d: usize, level: usize| -> u8 {
        let scaled = unit[p * dim + d] * (1u64 << (level + 1)) as f64;
        let code = (scaled as u64).min((1u64 << (level + 1)) - 1);
        (code & 1) as u8
    };

    let mut parents = vec![None];
    let mut weights = vec![0.0];
    let mut points = Vec::with_capacity(cloud.n_points());
    let mut queue = VecDeque::from([(0usize, 0usize, (0..cloud.n_points()).collect::<Vec<_>>())]);
    while let Some((node, level, members)) = queue.pop_front() {
        if level > 0 && (level == max_depth || all_coincide(cloud, &members)) {
            points.extend(members.iter().map(|&p| (p, node)));
            continue;
        }
        let mut cells: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
        for p in members {
            let key = (0..dim).map(|d| child_bit(p, d, level)).collect();
            cells.entry(key).or_default().push(p);
        }
        let child_weight = 0.5f64.powi(level as i32 + 1);
        for (_, inside) in cells {
            let id = parents.len();
            parents.push(Some(node));
            weights.push(child_weight);
            queue.push_back((id, level + 1, inside));
        }
    }
    Tree::from_parts(parents, weights, &points).expect("quadtree is valid")
}

/// Recursive farthest-point clustering tree.
///
/// At each internal node up to `branching` centers are picked among the
/// node's points: the first uniformly at random, each next one the point
/// farthest from the centers chosen so far (lowest index on ties), stopping
/// early once every point coincides with a center. Points join their nearest
/// center (lowest center on ties) and each cluster becomes a child whose
/// default weight is the distance from its center to the parent's center. The
/// root's center is the centroid of the cloud.
pub fn build_clustertree(cloud: &PointCloud, cfg: &ClusterTreeConfig) -> Result<Tree> {
    if cfg.branching < 2 {
        return Err(Error::InvalidConfig(format!(
            "branching must be at least 2, got {}",
            cfg.branching
        )));
    }
    if cfg.max_depth == 0 {
        return Err(Error::InvalidConfig(
            "cluster tree depth must be at least 1".into(),
        ));
    }
    let metric = cfg.metric;
    let dim = cloud.dim();
    let n = cloud.n_points();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut centroid = vec![0.0; dim];
    for p in cloud.points() {
        for (c, x) in centroid.iter_mut().zip(p) {
            *c += x;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n as f64);

    let mut parents = vec![None];
    let mut weights = vec![0.0];
    let mut points = Vec::with_capacity(n);
    let mut queue = VecDeque::from([(0usize, 0usize, centroid, (0..n).collect::<Vec<_>>())]);
    let mut min_dist = vec![0.0; n];
    while let Some((node, level, center, members)) = queue.pop_front() {
        if level > 0 && (level == cfg.max_depth || all_coincide(cloud, &members)) {
            points.extend(members.iter().map(|&p| (p, node)));
            continue;
        }
        let first = members[rng.random_range(0..members.len())];
        let mut centers = vec![first];
        for &p in &members {
            min_dist[p] = metric.between(cloud, p, first);
        }
        while centers.len() < cfg.branching {
            let mut best = members[0];
            for &p in &members[1..] {
                if min_dist[p] > min_dist[best] {
                    best = p;
                }
            }
            if min_dist[best] <= 0.0 {
                break;
            }
            centers.push(best);
            for &p in &members {
                min_dist[p] = min_dist[p].min(metric.between(cloud, p, best));
            }
        }

        let mut clusters = vec![Vec::new(); centers.len()];
        for &p in &members {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, &c) in centers.iter().enumerate() {
                let d = metric.between(cloud, p, c);
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            clusters[best].push(p);
        }
        for (c, inside) in centers.into_iter().zip(clusters) {
            let id = parents.len();
            let child_center = cloud.point(c).to_vec();
            parents.push(Some(node));
            weights.push(metric.distance_unchecked(&child_center, &center));
            queue.push_back((id, level + 1, child_center, inside));
        }
    }
    Tree::from_parts(parents, weights, &points)
}
