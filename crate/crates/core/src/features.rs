//! Shortest-path features and training pairs for the weight regression.
//!
//! For points `i`, `j` with ancestor indicator vectors `b_i`, `b_j`, the
//! feature `z_ij = b_i + b_j − 2 b_i∘b_j` marks the nodes whose parent edges
//! lie on the tree path between them, so `⟨w, z_ij⟩ = d_T(x_i, x_j)` for any
//! weights `w`. Each feature has at most `2·depth` nonzeros, all equal to 1.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{GroundMetric, PointCloud};
use crate::error::{Error, Result};
use crate::tree::Tree;

/// Sorted node ids on the path between two points; the implicit value of each
/// listed entry is 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathFeature {
    nodes: Vec<usize>,
}

impl PathFeature {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.nodes.iter().map(|&v| w[v]).sum()
    }
}

pub fn path_feature(tree: &Tree, i: usize, j: usize) -> Result<PathFeature> {
    let (mut nodes, right) = tree.path_sides(i, j)?;
    nodes.extend(right);
    nodes.sort_unstable();
    Ok(PathFeature { nodes })
}

/// Unordered training pairs `i < j` with their ground distances.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    pub pairs: Vec<(usize, usize)>,
    pub targets: Vec<f64>,
    pub seed: u64,
}

impl PairSample {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Explicit pairs; targets are the ground distances.
    pub fn from_pairs(cloud: &PointCloud, metric: GroundMetric, pairs: Vec<(usize, usize)>) -> Self {
        let targets = pairs.iter().map(|&(i, j)| metric.between(cloud, i, j)).collect();
        Self {
            pairs,
            targets,
            seed: 0,
        }
    }
}

/// Draws `min(m, n(n-1)/2)` distinct unordered pairs over `0..n` uniformly
/// without replacement; returned in lexicographic order.
pub fn sample_unordered_pairs(n: usize, m: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    let take = m.min(total);
    if take == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, total, take).into_vec();
    picks.sort_unstable();

    // Linear index k enumerates (0,1), (0,2), ..., (0,n-1), (1,2), ...
    let mut out = Vec::with_capacity(take);
    let mut row = 0;
    let mut row_start = 0;
    let mut row_len = n - 1;
    for k in picks {
        while k >= row_start + row_len {
            row_start += row_len;
            row += 1;
            row_len -= 1;
        }
        out.push((row, row + 1 + (k - row_start)));
    }
    out
}

pub fn sample_pairs(cloud: &PointCloud, metric: GroundMetric, m: usize, seed: u64) -> Result<PairSample> {
    if m == 0 {
        return Err(Error::InvalidConfig("pair count must be at least 1".into()));
    }
    let mut sample = PairSample::from_pairs(cloud, metric, sample_unordered_pairs(cloud.n_points(), m, seed));
    sample.seed = seed;
    Ok(sample)
}

/// Binary design matrix of a pair sample against a tree's nodes, held both by
/// rows (pairs) and by columns (nodes).
#[derive(Clone, Debug)]
pub struct FeatureMatrix {
    n_nodes: usize,
    row_ptr: Vec<usize>,
    row_nodes: Vec<usize>,
    col_ptr: Vec<usize>,
    col_rows: Vec<usize>,
}

impl FeatureMatrix {
    pub fn build(tree: &Tree, sample: &PairSample) -> Result<Self> {
        let n_nodes = tree.n_nodes();
        let mut row_ptr = Vec::with_capacity(sample.len() + 1);
        let mut row_nodes = Vec::with_capacity(sample.len() * 2 * tree.max_depth());
        row_ptr.push(0);
        for &(i, j) in &sample.pairs {
            let f = path_feature(tree, i, j)?;
            row_nodes.extend_from_slice(f.nodes());
            row_ptr.push(row_nodes.len());
        }

        let mut col_ptr = vec![0; n_nodes + 1];
        for &v in &row_nodes {
            col_ptr[v + 1] += 1;
        }
        for v in 0..n_nodes {
            col_ptr[v + 1] += col_ptr[v];
        }
        let mut fill = col_ptr.clone();
        let mut col_rows = vec![0; row_nodes.len()];
        for r in 0..sample.len() {
            for &v in &row_nodes[row_ptr[r]..row_ptr[r + 1]] {
                col_rows[fill[v]] = r;
                fill[v] += 1;
            }
        }
        Ok(Self {
            n_nodes,
            row_ptr,
            row_nodes,
            col_ptr,
            col_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_nodes
    }

    pub fn nnz(&self) -> usize {
        self.row_nodes.len()
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.row_nodes[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn col(&self, v: usize) -> &[usize] {
        &self.col_rows[self.col_ptr[v]..self.col_ptr[v + 1]]
    }

    /// `Z w`.
    pub fn predict(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n_rows())
            .map(|r| self.row(r).iter().map(|&v| w[v]).sum())
            .collect()
    }
}
