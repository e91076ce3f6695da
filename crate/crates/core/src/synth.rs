//! Seeded synthetic inputs: point clouds, sparse measures, random trees.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Measure, PointCloud};
use crate::tree::Tree;

/// `n` points uniform in `[0, 1]^dim`.
pub fn uniform_cloud<R: Rng>(rng: &mut R, n: usize, dim: usize) -> PointCloud {
    let coords = (0..n * dim).map(|_| rng.random::<f64>()).collect();
    PointCloud::new(dim, coords).expect("n and dim are positive")
}

/// `n` standard Gaussian points in `R^dim`.
pub fn gaussian_cloud<R: Rng>(rng: &mut R, n: usize, dim: usize) -> PointCloud {
    let coords = (0..n * dim).map(|_| StandardNormal.sample(rng)).collect();
    PointCloud::new(dim, coords).expect("n and dim are positive")
}

/// Measure on `support` distinct points chosen uniformly from `0..n_points`,
/// with masses drawn uniformly from `(0, 1]` and normalized.
pub fn random_measure<R: Rng>(rng: &mut R, n_points: usize, support: usize) -> Measure {
    let support = support.clamp(1, n_points);
    let picks = index::sample(rng, n_points, support);
    Measure::from_weights(
        picks
            .into_iter()
            .map(|i| (i, 1.0 - rng.random::<f64>()))
            .collect(),
    )
    .expect("positive weights")
}

/// Random recursive tree with `n_nodes` nodes (each node's parent uniform among
/// earlier nodes), weights uniform in `[0.1, 2)`, and one point per leaf,
/// numbered in node order.
pub fn random_tree<R: Rng>(rng: &mut R, n_nodes: usize) -> Tree {
    let n_nodes = n_nodes.max(2);
    let mut parents = vec![None];
    let mut weights = vec![0.0];
    let mut has_child = vec![false; n_nodes];
    for v in 1..n_nodes {
        let p = rng.random_range(0..v);
        has_child[p] = true;
        parents.push(Some(p));
        weights.push(rng.random_range(0.1..2.0));
    }
    let points: Vec<(usize, usize)> = (1..n_nodes).filter(|&v| !has_child[v]).enumerate().collect();
    Tree::from_parts(parents, weights, &points).expect("random tree is valid")
}
