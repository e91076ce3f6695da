pub(crate) use crate::synth::{random_measure, random_tree};
use crate::tree::Tree;

/// The five-node example tree: root(0) -> {n1, n2}, n1 -> {n3, n4}.
/// Point 1 sits on n3, point 2 on n4, point 3 on n2.
pub(crate) fn fig1_tree(w: [f64; 5]) -> Tree {
    Tree::from_parts(
        vec![None, Some(0), Some(0), Some(1), Some(1)],
        w.to_vec(),
        &[(1, 3), (2, 4), (3, 2)],
    )
    .unwrap()
}
