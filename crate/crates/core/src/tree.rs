//! Rooted weighted trees over a point cloud and the tree-Wasserstein distance.
//!
//! Node `0` is the root and every other node's parent has a smaller id, so a
//! forward pass over the nodes visits parents before children. Each node
//! stores the weight of the edge to its parent; the root weight is always 0.
//!
//! The node-by-leaf incidence matrix `B` (column `b_i` = inclusive ancestors of
//! the node holding point `i`) is never materialized. Instead [`Tree::twd`]
//! pushes each support mass up its ancestor chain into a sparse accumulator,
//! which gives `‖diag(w) B (a - b)‖₁` in time proportional to the summed path
//! lengths of the support points.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{self, fmt17, Measure};
use crate::error::{Error, Result};

const NO_PARENT: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    parent: Vec<usize>,
    weight: Vec<f64>,
    depth: Vec<usize>,
    n_children: Vec<usize>,
    /// Node holding each point, indexed by point id.
    point_node: Vec<Option<usize>>,
}

impl Tree {
    /// Assembles and validates a tree.
    ///
    /// `parents[v]` is `None` only for the root, which must be node 0; every
    /// other parent id must be smaller than its child's id. `points` lists
    /// `(point, node)` pairs; a point may appear at most once.
    pub fn from_parts(
        parents: Vec<Option<usize>>,
        mut weights: Vec<f64>,
        points: &[(usize, usize)],
    ) -> Result<Self> {
        let n = parents.len();
        if n == 0 {
            return Err(Error::InvalidTree("no nodes".into()));
        }
        if weights.len() != n {
            return Err(Error::LengthMismatch(n, weights.len()));
        }
        let roots: Vec<usize> = (0..n).filter(|&v| parents[v].is_none()).collect();
        match roots.len() {
            0 => return Err(Error::InvalidTree("no root".into())),
            1 => {}
            _ => {
                return Err(Error::InvalidTree(format!(
                    "multiple roots: {:?}",
                    &roots[..roots.len().min(8)]
                )))
            }
        }
        if let Some(v) = (0..n).find(|&v| parents[v].is_some_and(|p| p >= n)) {
            return Err(Error::InvalidTree(format!("node {v} has out-of-range parent")));
        }
        if let Some(v) = find_cycle(&parents) {
            return Err(Error::InvalidTree(format!(
                "parent links of node {v} form a cycle"
            )));
        }
        if roots[0] != 0 {
            return Err(Error::InvalidTree("root must be node 0".into()));
        }
        if let Some(v) = (1..n).find(|&v| parents[v].is_some_and(|p| p >= v)) {
            return Err(Error::InvalidTree(format!(
                "node {v} precedes its parent; nodes must be numbered parents-before-children"
            )));
        }
        if let Some(v) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidTree(format!(
                "weight {} of node {v} is not a finite non-negative number",
                weights[v]
            )));
        }
        weights[0] = 0.0;

        let parent: Vec<usize> = parents.iter().map(|p| p.unwrap_or(NO_PARENT)).collect();
        let mut depth = vec![0; n];
        let mut n_children = vec![0; n];
        for v in 1..n {
            depth[v] = depth[parent[v]] + 1;
            n_children[parent[v]] += 1;
        }

        let capacity = points.iter().map(|&(p, _)| p + 1).max().unwrap_or(0);
        let mut point_node = vec![None; capacity];
        for &(p, node) in points {
            if node >= n {
                return Err(Error::InvalidTree(format!(
                    "point {p} mapped to missing node {node}"
                )));
            }
            if point_node[p].replace(node).is_some() {
                return Err(Error::InvalidTree(format!("point {p} mapped twice")));
            }
        }

        Ok(Self {
            parent,
            weight: weights,
            depth,
            n_children,
            point_node,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.parent.len()
    }

    /// Number of childless nodes.
    pub fn n_leaves(&self) -> usize {
        self.n_children.iter().filter(|&&c| c == 0).count()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (self.parent[v] != NO_PARENT).then_some(self.parent[v])
    }

    pub fn weight(&self, v: usize) -> f64 {
        self.weight[v]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn n_children(&self, v: usize) -> usize {
        self.n_children[v]
    }

    /// One past the largest mapped point id.
    pub fn point_capacity(&self) -> usize {
        self.point_node.len()
    }

    pub fn node_of_point(&self, p: usize) -> Result<usize> {
        self.point_node
            .get(p)
            .copied()
            .flatten()
            .ok_or(Error::UnmappedPoint(p))
    }

    /// `(point, node)` pairs in point order.
    pub fn mapped_points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.point_node
            .iter()
            .enumerate()
            .filter_map(|(p, n)| n.map(|n| (p, n)))
    }

    /// True when every mapped point sits on a childless node.
    pub fn points_on_leaves(&self) -> bool {
        self.mapped_points().all(|(_, v)| self.n_children[v] == 0)
    }

    /// Number of nodes with a nonzero edge weight. The root never counts.
    pub fn nonzero_weights(&self) -> usize {
        self.weight.iter().filter(|&&w| w != 0.0).count()
    }

    /// Same topology and point map with a new weight vector.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_nodes() {
            return Err(Error::LengthMismatch(self.n_nodes(), weights.len()));
        }
        if let Some(v) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidTree(format!(
                "weight {} of node {v} is not a finite non-negative number",
                weights[v]
            )));
        }
        let mut t = self.clone();
        t.weight = weights;
        t.weight[0] = 0.0;
        Ok(t)
    }

    /// Node ids from the point's node up to and including the root.
    pub fn ancestor_set(&self, p: usize) -> Result<Vec<usize>> {
        let mut v = self.node_of_point(p)?;
        let mut out = Vec::with_capacity(self.depth[v] + 1);
        loop {
            out.push(v);
            if v == 0 {
                return Ok(out);
            }
            v = self.parent[v];
        }
    }

    /// Nodes whose edges lie on the path between the nodes of points `i` and
    /// `j`, split into the `i` side and the `j` side, each ordered upward and
    /// stopping below the lowest common ancestor. Together they form the
    /// symmetric difference of the two ancestor sets.
    pub fn path_sides(&self, i: usize, j: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut u = self.node_of_point(i)?;
        let mut v = self.node_of_point(j)?;
        let mut left = Vec::with_capacity(self.depth[u]);
        let mut right = Vec::with_capacity(self.depth[v]);
        while u != v {
            if self.depth[u] >= self.depth[v] {
                left.push(u);
                u = self.parent[u];
            } else {
                right.push(v);
                v = self.parent[v];
            }
        }
        Ok((left, right))
    }

    /// Shortest-path distance between the nodes of two points.
    ///
    /// Each side is summed upward on its own, so inserting or contracting
    /// zero-weight edges leaves the result bit-identical.
    pub fn path_distance(&self, i: usize, j: usize) -> Result<f64> {
        let (left, right) = self.path_sides(i, j)?;
        let side = |s: Vec<usize>| s.into_iter().map(|v| self.weight[v]).sum::<f64>();
        Ok(side(left) + side(right))
    }

    /// Tree-Wasserstein distance using a caller-owned scratch buffer.
    pub fn twd_with(&self, acc: &mut SubtreeMassAccumulator, mu: &Measure, nu: &Measure) -> Result<f64> {
        acc.ensure(self.n_nodes());
        let pushed = self.push_up(acc, mu, 0).and_then(|()| self.push_up(acc, nu, 1));
        let total = acc
            .touched
            .iter()
            .map(|&v| self.weight[v] * (acc.mass[v][0] - acc.mass[v][1]).abs())
            .sum();
        acc.reset();
        pushed.map(|()| total)
    }

    /// Tree-Wasserstein distance `Σ_e w_e |μ(Γ(v_e)) − ν(Γ(v_e))|`.
    pub fn twd(&self, mu: &Measure, nu: &Measure) -> Result<f64> {
        self.twd_with(&mut SubtreeMassAccumulator::new(self.n_nodes()), mu, nu)
    }

    fn push_up(&self, acc: &mut SubtreeMassAccumulator, m: &Measure, side: usize) -> Result<()> {
        for &(p, mass) in m.entries() {
            let mut v = self.node_of_point(p)?;
            while v != 0 {
                if !acc.seen[v] {
                    acc.seen[v] = true;
                    acc.touched.push(v);
                }
                acc.mass[v][side] += mass;
                v = self.parent[v];
            }
        }
        Ok(())
    }

    /// Contracts every non-root edge of weight exactly 0, merging the child
    /// into its parent. Points on a removed node move to its nearest kept
    /// ancestor, so every pairwise path distance is unchanged.
    pub fn prune_zero_weights(&self) -> Tree {
        let n = self.n_nodes();
        let mut rep = vec![0; n];
        let mut new_id = vec![NO_PARENT; n];
        let mut parents = vec![None];
        let mut weights = vec![0.0];
        new_id[0] = 0;
        for v in 1..n {
            if self.weight[v] != 0.0 {
                new_id[v] = parents.len();
                parents.push(Some(new_id[rep[self.parent[v]]]));
                weights.push(self.weight[v]);
                rep[v] = v;
            } else {
                rep[v] = rep[self.parent[v]];
            }
        }
        let points: Vec<(usize, usize)> = self.mapped_points().map(|(p, v)| (p, new_id[rep[v]])).collect();
        Tree::from_parts(parents, weights, &points).expect("contraction preserves validity")
    }

    /// Text form: `N M`, then `N` rows `node parent weight` (root parent `-1`),
    /// then `M` rows `node point`.
    pub fn to_text(&self) -> String {
        let mapped: Vec<(usize, usize)> = self.mapped_points().collect();
        let mut out = format!("{} {}\n", self.n_nodes(), mapped.len());
        for v in 0..self.n_nodes() {
            let p = self.parent(v).map_or(-1, |p| p as i64);
            let _ = writeln!(out, "{v} {p} {}", fmt17(self.weight[v]));
        }
        for (p, v) in mapped {
            let _ = writeln!(out, "{v} {p}");
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());

        let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty tree file".into()))?;
        let (n, m) = match header.split_whitespace().collect::<Vec<_>>()[..] {
            [a, b] => (num::<usize>(a, hl, &perr)?, num::<usize>(b, hl, &perr)?),
            _ => return Err(perr(hl, "header must be `N N_leaf`".into())),
        };
        if n == 0 {
            return Err(perr(hl, "tree must have at least one node".into()));
        }

        let mut parents: Vec<Option<Option<usize>>> = vec![None; n];
        let mut weights = vec![0.0; n];
        for _ in 0..n {
            let (l, row) = lines
                .next()
                .ok_or_else(|| perr(text.lines().count() + 1, format!("expected {n} node rows")))?;
            let [id, par, w] = row.split_whitespace().collect::<Vec<_>>()[..] else {
                return Err(perr(l, "node row must be `node parent weight`".into()));
            };
            let id: usize = num(id, l, &perr)?;
            let par: i64 = num(par, l, &perr)?;
            let w: f64 = num(w, l, &perr)?;
            if id >= n {
                return Err(perr(l, format!("node id {id} out of range")));
            }
            let par = match par {
                -1 => None,
                p if p >= 0 => Some(p as usize),
                p => return Err(perr(l, format!("invalid parent {p}"))),
            };
            if parents[id].replace(par).is_some() {
                return Err(perr(l, format!("node {id} listed twice")));
            }
            weights[id] = w;
        }
        let parents: Vec<Option<usize>> = parents.into_iter().map(|p| p.flatten()).collect();

        let mut points = Vec::with_capacity(m);
        for _ in 0..m {
            let (l, row) = lines
                .next()
                .ok_or_else(|| perr(text.lines().count() + 1, format!("expected {m} point rows")))?;
            let [node, point] = row.split_whitespace().collect::<Vec<_>>()[..] else {
                return Err(perr(l, "point row must be `node point`".into()));
            };
            points.push((num(point, l, &perr)?, num(node, l, &perr)?));
        }
        if let Some((l, _)) = lines.next() {
            return Err(perr(l, "trailing content".into()));
        }
        Tree::from_parts(parents, weights, &points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&data::read(path)?, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        data::write(path.as_ref(), &self.to_text())
    }
}

fn num<T: std::str::FromStr>(tok: &str, line: usize, perr: &impl Fn(usize, String) -> Error) -> Result<T> {
    tok.parse()
        .map_err(|_| perr(line, format!("cannot parse `{tok}`")))
}

/// Returns a node whose parent chain never reaches a root, if any.
fn find_cycle(parents: &[Option<usize>]) -> Option<usize> {
    // 0 = unvisited, 1 = on current walk, 2 = reaches a root
    let mut state = vec![0u8; parents.len()];
    for start in 0..parents.len() {
        let mut walk = Vec::new();
        let mut v = start;
        loop {
            match state[v] {
                2 => break,
                1 => return Some(v),
                _ => {}
            }
            state[v] = 1;
            walk.push(v);
            match parents[v] {
                Some(p) => v = p,
                None => break,
            }
        }
        for w in walk {
            state[w] = 2;
        }
    }
    None
}

/// Scratch space for [`Tree::twd_with`]: per-node subtree masses of both
/// measures, kept apart so that equal measures give exactly zero. Reset
/// sparsely after each evaluation so the cost does not depend on tree size.
#[derive(Clone, Debug, Default)]
pub struct SubtreeMassAccumulator {
    mass: Vec<[f64; 2]>,
    seen: Vec<bool>,
    touched: Vec<usize>,
}

impl SubtreeMassAccumulator {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            mass: vec![[0.0; 2]; n_nodes],
            seen: vec![false; n_nodes],
            touched: Vec::new(),
        }
    }

    fn ensure(&mut self, n_nodes: usize) {
        if self.mass.len() < n_nodes {
            self.mass.resize(n_nodes, [0.0; 2]);
            self.seen.resize(n_nodes, false);
        }
    }

    fn reset(&mut self) {
        for v in self.touched.drain(..) {
            self.mass[v] = [0.0; 2];
            self.seen[v] = false;
        }
    }
}
