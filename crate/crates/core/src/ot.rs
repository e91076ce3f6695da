//! Exact discrete optimal transport and the tree induced by an optimal plan.
//!
//! [`exact_w1`] solves the transportation problem with the network simplex on
//! the bipartite supply/demand graph. The basis is kept as a spanning tree of
//! `n + n' − 1` cells, initialized by the northwest-corner rule. Pivots follow
//! Bland's rule: the entering cell is the first (row-major) cell with negative
//! reduced cost, and among tied blocking cells the lowest index leaves. This
//! terminates on degenerate problems and makes the result a deterministic
//! function of the input. The returned plan is the positive part of the final
//! basis and is therefore cycle-free.

use std::collections::{BTreeMap, VecDeque};

use crate::data::{GroundMetric, Measure, PointCloud};
use crate::error::{Error, Result};
use crate::tree::Tree;

/// Largest combined support `n + n'` accepted by [`exact_w1`].
pub const MAX_SUPPORT: usize = 4096;

/// Dense row-major `rows × cols` cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch(rows * cols, data.len()));
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("cost matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Self::new(rows, cols, data)
    }

    /// Ground distances between the supports of `mu` (rows) and `nu` (columns).
    pub fn between(cloud: &PointCloud, metric: GroundMetric, mu: &Measure, nu: &Measure) -> Result<Self> {
        mu.check_cloud(cloud)?;
        nu.check_cloud(cloud)?;
        let (a, b) = (mu.entries(), nu.entries());
        Self::from_fn(a.len(), b.len(), |i, j| metric.between(cloud, a[i].0, b[j].0))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// Sparse coupling; `i` and `j` index the supports of the two measures.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub entries: Vec<(usize, usize, f64)>,
}

impl TransportPlan {
    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        self.entries.iter().map(|&(i, j, m)| m * cost.get(i, j)).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactW1Result {
    pub value: f64,
    pub plan: TransportPlan,
}

/// Minimum-cost coupling of the mass vectors `a` (rows) and `b` (columns).
pub fn exact_transport(a: &[f64], b: &[f64], cost: &CostMatrix) -> Result<ExactW1Result> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::Infeasible("empty support".into()));
    }
    if n + m > MAX_SUPPORT {
        return Err(Error::SupportTooLarge(n + m, MAX_SUPPORT));
    }
    if cost.rows() != n || cost.cols() != m {
        return Err(Error::DimensionMismatch {
            left: n * m,
            right: cost.rows() * cost.cols(),
        });
    }
    if a.iter().chain(b).any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::Infeasible("masses must be finite and non-negative".into()));
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > 1e-9 * sa.max(sb).max(1.0) {
        return Err(Error::Infeasible(format!("total masses differ: {sa} vs {sb}")));
    }

    let mut basis = Basis::northwest_corner(a, b);
    let scale = cost.data.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let eps = 1e-12 * scale.max(1.0);
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    loop {
        basis.potentials(cost, &mut u, &mut v);
        let entering = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .find(|&(i, j)| cost.get(i, j) - u[i] - v[j] < -eps && !basis.contains(i, j));
        match entering {
            Some((i, j)) => basis.pivot(i, j),
            None => break,
        }
    }

    let mut entries: Vec<(usize, usize, f64)> = basis
        .cells
        .iter()
        .filter(|c| c.flow > 0.0)
        .map(|c| (c.row, c.col, c.flow))
        .collect();
    entries.sort_by_key(|&(i, j, _)| (i, j));
    let plan = TransportPlan { entries };
    Ok(ExactW1Result {
        value: plan.cost(cost),
        plan,
    })
}

/// Exact 1-Wasserstein value and plan between two measures for a given cost
/// matrix over their supports (rows follow `mu`'s entries, columns `nu`'s).
pub fn exact_w1(mu: &Measure, nu: &Measure, cost: &CostMatrix) -> Result<ExactW1Result> {
    let a: Vec<f64> = mu.entries().iter().map(|e| e.1).collect();
    let b: Vec<f64> = nu.entries().iter().map(|e| e.1).collect();
    exact_transport(&a, &b, cost)
}

/// Exact 1-Wasserstein distance under a ground metric on the shared cloud.
pub fn w1_distance(cloud: &PointCloud, metric: GroundMetric, mu: &Measure, nu: &Measure) -> Result<f64> {
    let cost = CostMatrix::between(cloud, metric, mu, nu)?;
    Ok(exact_w1(mu, nu, &cost)?.value)
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    row: usize,
    col: usize,
    flow: f64,
}

/// Spanning-tree basis over `n` row nodes (ids `0..n`) and `m` column nodes
/// (ids `n..n+m`).
struct Basis {
    n: usize,
    m: usize,
    cells: Vec<Cell>,
    /// Cells incident to each node.
    adj: Vec<Vec<usize>>,
}

impl Basis {
    fn northwest_corner(a: &[f64], b: &[f64]) -> Self {
        let (n, m) = (a.len(), b.len());
        let mut supply = a.to_vec();
        let mut demand = b.to_vec();
        let mut cells = Vec::with_capacity(n + m - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            if i == n - 1 && j == m - 1 {
                cells.push(Cell {
                    row: i,
                    col: j,
                    flow: supply[i].min(demand[j]).max(0.0),
                });
                break;
            }
            if i == n - 1 {
                let x = demand[j].min(supply[i]).max(0.0);
                supply[i] -= x;
                cells.push(Cell {
                    row: i,
                    col: j,
                    flow: x,
                });
                j += 1;
            } else if j == m - 1 || supply[i] <= demand[j] {
                let x = supply[i].min(demand[j]).max(0.0);
                demand[j] -= x;
                cells.push(Cell {
                    row: i,
                    col: j,
                    flow: x,
                });
                i += 1;
            } else {
                let x = demand[j];
                supply[i] -= x;
                cells.push(Cell {
                    row: i,
                    col: j,
                    flow: x,
                });
                j += 1;
            }
        }
        debug_assert_eq!(cells.len(), n + m - 1);
        let mut adj = vec![Vec::new(); n + m];
        for (k, c) in cells.iter().enumerate() {
            adj[c.row].push(k);
            adj[n + c.col].push(k);
        }
        Self { n, m, cells, adj }
    }

    fn contains(&self, i: usize, j: usize) -> bool {
        // Scan the shorter incidence list.
        let (node, other) = if self.adj[i].len() <= self.adj[self.n + j].len() {
            (i, j)
        } else {
            (self.n + j, i)
        };
        self.adj[node].iter().any(|&k| {
            let c = self.cells[k];
            if node < self.n {
                c.col == other
            } else {
                c.row == other
            }
        })
    }

    fn other_end(&self, k: usize, node: usize) -> usize {
        let c = self.cells[k];
        if node < self.n {
            self.n + c.col
        } else {
            c.row
        }
    }

    /// Solves `u_i + v_j = c_ij` on basic cells with `u_0 = 0`.
    fn potentials(&self, cost: &CostMatrix, u: &mut [f64], v: &mut [f64]) {
        let total = self.n + self.m;
        let mut done = vec![false; total];
        let mut queue = VecDeque::from([0usize]);
        done[0] = true;
        u[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &k in &self.adj[node] {
                let next = self.other_end(k, node);
                if done[next] {
                    continue;
                }
                let c = self.cells[k];
                let cij = cost.get(c.row, c.col);
                if next < self.n {
                    u[next] = cij - v[c.col];
                } else {
                    v[next - self.n] = cij - u[c.row];
                }
                done[next] = true;
                queue.push_back(next);
            }
        }
    }

    /// Cells on the basis path from node `from` to node `to`.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let total = self.n + self.m;
        let mut via = vec![usize::MAX; total];
        let mut seen = vec![false; total];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &k in &self.adj[node] {
                let next = self.other_end(k, node);
                if !seen[next] {
                    seen[next] = true;
                    via[next] = k;
                    queue.push_back(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = to;
        while node != from {
            let k = via[node];
            cells.push(k);
            node = self.other_end(k, node);
        }
        cells.reverse();
        cells
    }

    fn pivot(&mut self, i: usize, j: usize) {
        // Entering cell (i, j) gains θ; along the basis path from row i to
        // column j the cells alternately lose and gain θ, starting with a loss.
        let path = self.path(i, self.n + j);
        let cell_index = |c: &Cell| c.row * self.m + c.col;
        let mut leave = usize::MAX;
        for &k in path.iter().step_by(2) {
            let better = leave == usize::MAX || {
                let (ck, cl) = (self.cells[k], self.cells[leave]);
                ck.flow < cl.flow || (ck.flow == cl.flow && cell_index(&ck) < cell_index(&cl))
            };
            if better {
                leave = k;
            }
        }
        let theta = self.cells[leave].flow;
        for (step, &k) in path.iter().enumerate() {
            if step % 2 == 0 {
                self.cells[k].flow -= theta;
            } else {
                self.cells[k].flow += theta;
            }
        }

        let old = self.cells[leave];
        self.adj[old.row].retain(|&x| x != leave);
        self.adj[self.n + old.col].retain(|&x| x != leave);
        self.cells[leave] = Cell {
            row: i,
            col: j,
            flow: theta,
        };
        self.adj[i].push(leave);
        self.adj[self.n + j].push(leave);
    }
}

/// Tree realizing a basic optimal plan exactly.
///
/// Every distinct support point becomes a graph node (a point in both
/// supports is one node) and every plan entry `(i, j)` between distinct
/// points becomes an edge weighted by `cost(i, j)`. The resulting forest is
/// rooted at its lowest point id; further components hang off an artificial
/// root through zero-weight edges. Points on nodes that end up with children
/// get a zero-weight pendant leaf, so all points sit on leaves. With a metric
/// cost the tree distance of every plan edge equals its cost and no other
/// coupling is cheaper on the tree, so the tree-Wasserstein distance equals
/// the plan cost.
pub fn tree_from_plan(plan: &TransportPlan, mu: &Measure, nu: &Measure, cost: &CostMatrix) -> Result<Tree> {
    let (a, b) = (mu.entries(), nu.entries());
    if cost.rows() != a.len() || cost.cols() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len() * b.len(),
            right: cost.rows() * cost.cols(),
        });
    }
    // Graph nodes in point order.
    let mut id_of: BTreeMap<usize, usize> = BTreeMap::new();
    for &(p, _) in a.iter().chain(b) {
        id_of.insert(p, 0);
    }
    let point_of: Vec<usize> = id_of.keys().copied().collect();
    for (k, id) in id_of.values_mut().enumerate() {
        *id = k;
    }
    let g = point_of.len();

    let mut dsu: Vec<usize> = (0..g).collect();
    fn find(dsu: &mut [usize], mut x: usize) -> usize {
        while dsu[x] != x {
            dsu[x] = dsu[dsu[x]];
            x = dsu[x];
        }
        x
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g];
    for &(i, j, mass) in &plan.entries {
        if i >= a.len() || j >= b.len() {
            return Err(Error::InvalidConfig(format!(
                "plan entry ({i}, {j}) out of range"
            )));
        }
        if mass.is_nan() || mass <= 0.0 {
            continue;
        }
        let (u, v) = (id_of[&a[i].0], id_of[&b[j].0]);
        if u == v {
            continue;
        }
        let (ru, rv) = (find(&mut dsu, u), find(&mut dsu, v));
        if ru == rv {
            return Err(Error::CyclicSupport);
        }
        dsu[ru] = rv;
        let w = cost.get(i, j);
        adj[u].push((v, w));
        adj[v].push((u, w));
    }
    for list in &mut adj {
        list.sort_by_key(|&(x, _)| x);
    }

    // Component roots: lowest graph node of each component, in order.
    let mut comp_roots = Vec::new();
    let mut seen_comp = vec![false; g];
    for x in 0..g {
        let r = find(&mut dsu, x);
        if !seen_comp[r] {
            seen_comp[r] = true;
            comp_roots.push(x);
        }
    }

    let mut parents: Vec<Option<usize>> = Vec::new();
    let mut weights = Vec::new();
    let mut tree_id = vec![usize::MAX; g];
    let mut queue = VecDeque::new();
    if comp_roots.len() == 1 {
        parents.push(None);
        weights.push(0.0);
        tree_id[comp_roots[0]] = 0;
        queue.push_back(comp_roots[0]);
    } else {
        parents.push(None);
        weights.push(0.0);
        for &r in &comp_roots {
            tree_id[r] = parents.len();
            parents.push(Some(0));
            weights.push(0.0);
            queue.push_back(r);
        }
    }
    while let Some(x) = queue.pop_front() {
        for &(y, w) in &adj[x] {
            if tree_id[y] == usize::MAX {
                tree_id[y] = parents.len();
                parents.push(Some(tree_id[x]));
                weights.push(w);
                queue.push_back(y);
            }
        }
    }

    let mut has_child = vec![false; parents.len()];
    for p in parents.iter().flatten() {
        has_child[*p] = true;
    }
    let mut points = Vec::with_capacity(g);
    for x in 0..g {
        let node = tree_id[x];
        if has_child[node] {
            let leaf = parents.len();
            parents.push(Some(node));
            weights.push(0.0);
            points.push((point_of[x], leaf));
        } else {
            points.push((point_of[x], node));
        }
    }
    Tree::from_parts(parents, weights, &points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gaussian_cloud, random_measure, random_tree};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute force over all spanning trees of the complete bipartite graph:
    /// each spanning tree determines at most one plan; keep the cheapest
    /// feasible one.
    fn brute_force(a: &[f64], b: &[f64], cost: &CostMatrix) -> f64 {
        let (n, m) = (a.len(), b.len());
        let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
        let k = n + m - 1;
        let mut best = f64::INFINITY;
        let mut chosen = Vec::with_capacity(k);
        fn rec(
            start: usize,
            cells: &[(usize, usize)],
            k: usize,
            chosen: &mut Vec<usize>,
            f: &mut dyn FnMut(&[usize]),
        ) {
            if chosen.len() == k {
                f(chosen);
                return;
            }
            for c in start..cells.len() {
                if cells.len() - c < k - chosen.len() {
                    break;
                }
                chosen.push(c);
                rec(c + 1, cells, k, chosen, f);
                chosen.pop();
            }
        }
        let mut eval = |sel: &[usize]| {
            // Solve flows by repeatedly peeling leaves of the candidate tree.
            let mut supply = a.to_vec();
            let mut demand = b.to_vec();
            let mut alive = sel.to_vec();
            let mut flows = Vec::new();
            while !alive.is_empty() {
                let deg = |node: usize, alive: &[usize]| {
                    alive
                        .iter()
                        .filter(|&&c| {
                            if node < n {
                                cells[c].0 == node
                            } else {
                                cells[c].1 == node - n
                            }
                        })
                        .count()
                };
                let mut progressed = false;
                for idx in 0..alive.len() {
                    let (i, j) = cells[alive[idx]];
                    let x = if deg(i, &alive) == 1 {
                        supply[i]
                    } else if deg(n + j, &alive) == 1 {
                        demand[j]
                    } else {
                        continue;
                    };
                    supply[i] -= x;
                    demand[j] -= x;
                    flows.push((i, j, x));
                    alive.remove(idx);
                    progressed = true;
                    break;
                }
                if !progressed {
                    return; // contains a cycle
                }
            }
            if supply.iter().chain(&demand).any(|r| r.abs() > 1e-9) {
                return; // not spanning
            }
            if flows.iter().any(|f| f.2 < -1e-12) {
                return;
            }
            let c: f64 = flows.iter().map(|&(i, j, x)| x * cost.get(i, j)).sum();
            best = best.min(c);
        };
        rec(0, &cells, k, &mut chosen, &mut eval);
        best
    }

    fn random_masses(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    }

    fn check_plan(res: &ExactW1Result, a: &[f64], b: &[f64], cost: &CostMatrix) {
        let mut rows = vec![0.0; a.len()];
        let mut cols = vec![0.0; b.len()];
        for &(i, j, x) in &res.plan.entries {
            assert!(x > 0.0);
            rows[i] += x;
            cols[j] += x;
        }
        for (r, x) in rows.iter().zip(a) {
            assert!((r - x).abs() <= 1e-9);
        }
        for (c, x) in cols.iter().zip(b) {
            assert!((c - x).abs() <= 1e-9);
        }
        assert!(res.plan.entries.len() < a.len() + b.len());
        assert!((res.value - res.plan.cost(cost)).abs() <= 1e-10);
    }

    #[test]
    fn dirac_to_dirac() {
        let cost = CostMatrix::new(1, 1, vec![2.5]).unwrap();
        let r = exact_w1(&Measure::dirac(0), &Measure::dirac(1), &cost).unwrap();
        assert_eq!(r.value, 2.5);
        assert_eq!(r.plan.entries, vec![(0, 0, 1.0)]);
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cloud = gaussian_cloud(&mut rng, 10, 3);
        let mu = random_measure(&mut rng, 10, 6);
        let v = w1_distance(&cloud, GroundMetric::Euclidean, &mu, &mu).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn matches_brute_force_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for case in 0..60 {
            let n = 1 + case % 4;
            let m = 1 + (case / 4) % 4;
            let a = random_masses(&mut rng, n);
            let b = random_masses(&mut rng, m);
            // Integer costs produce ties and degenerate pivots.
            let integer = case % 2 == 0;
            let cost = CostMatrix::from_fn(n, m, |_, _| 0.0).unwrap();
            let data: Vec<f64> = (0..n * m)
                .map(|_| {
                    if integer {
                        rng.random_range(0..4) as f64
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            let cost = CostMatrix::new(n, m, data).unwrap_or(cost);
            let res = exact_transport(&a, &b, &cost).unwrap();
            check_plan(&res, &a, &b, &cost);
            let bf = brute_force(&a, &b, &cost);
            assert!(
                (res.value - bf).abs() <= 1e-10,
                "case {case}: {} vs {bf}",
                res.value
            );
        }
    }

    #[test]
    fn degenerate_masses_terminate() {
        // Equal masses force degenerate northwest-corner bases.
        for n in 1..12 {
            let a = vec![1.0 / n as f64; n];
            let cost = CostMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 5) as f64).unwrap();
            let res = exact_transport(&a, &a, &cost).unwrap();
            check_plan(&res, &a, &a, &cost);
        }
    }

    #[test]
    fn rejects_bad_problems() {
        let cost = CostMatrix::new(1, 2, vec![1.0, 2.0]).unwrap();
        assert!(exact_transport(&[1.0], &[0.5, 0.6], &cost).is_err());
        assert!(exact_transport(&[1.0], &[1.0], &cost).is_err());
        let big = vec![1.0 / 4000.0; 4000];
        let one = CostMatrix::new(4000, 100, vec![0.0; 400_000]).unwrap();
        assert!(matches!(
            exact_transport(&big, &[0.01; 100], &one),
            Err(Error::SupportTooLarge(4100, MAX_SUPPORT))
        ));
        assert!(CostMatrix::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn two_point_plan_tree() {
        let cloud = PointCloud::new(1, vec![0.0, 3.0]).unwrap();
        let (mu, nu) = (Measure::dirac(0), Measure::dirac(1));
        let cost = CostMatrix::between(&cloud, GroundMetric::Euclidean, &mu, &nu).unwrap();
        let res = exact_w1(&mu, &nu, &cost).unwrap();
        let t = tree_from_plan(&res.plan, &mu, &nu, &cost).unwrap();
        // Root is x; y hangs below with weight d(x, y); x gets a zero pendant.
        let y = t.node_of_point(1).unwrap();
        assert_eq!(t.parent(y), Some(0));
        assert_eq!(t.weight(y), 3.0);
        assert_eq!(t.parent(t.node_of_point(0).unwrap()), Some(0));
        assert!(t.points_on_leaves());
        assert_eq!(t.twd(&mu, &nu).unwrap(), 3.0);
    }

    #[test]
    fn cyclic_plan_is_rejected() {
        let mu = Measure::new(vec![(0, 0.5), (1, 0.5)]).unwrap();
        let nu = Measure::new(vec![(2, 0.5), (3, 0.5)]).unwrap();
        let cost = CostMatrix::new(2, 2, vec![1.0; 4]).unwrap();
        let plan = TransportPlan {
            entries: vec![(0, 0, 0.25), (0, 1, 0.25), (1, 0, 0.25), (1, 1, 0.25)],
        };
        assert!(matches!(
            tree_from_plan(&plan, &mu, &nu, &cost),
            Err(Error::CyclicSupport)
        ));
    }

    #[test]
    fn plan_tree_reproduces_w1() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for metric in [GroundMetric::Euclidean, GroundMetric::Manhattan] {
            for _ in 0..20 {
                let cloud = gaussian_cloud(&mut rng, 32, 4);
                let mu =
                    Measure::from_weights((0..16).map(|i| (i, 1.0 - rng.random::<f64>())).collect()).unwrap();
                let nu = Measure::from_weights((16..32).map(|i| (i, 1.0 - rng.random::<f64>())).collect())
                    .unwrap();
                let cost = CostMatrix::between(&cloud, metric, &mu, &nu).unwrap();
                let res = exact_w1(&mu, &nu, &cost).unwrap();
                let t = tree_from_plan(&res.plan, &mu, &nu, &cost).unwrap();
                assert!(t.points_on_leaves());
                assert!((t.twd(&mu, &nu).unwrap() - res.value).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn plan_tree_with_shared_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        for _ in 0..40 {
            let cloud = gaussian_cloud(&mut rng, 12, 2);
            let mu = random_measure(&mut rng, 12, 6);
            let nu = random_measure(&mut rng, 12, 6);
            let cost = CostMatrix::between(&cloud, GroundMetric::Euclidean, &mu, &nu).unwrap();
            let res = exact_w1(&mu, &nu, &cost).unwrap();
            match tree_from_plan(&res.plan, &mu, &nu, &cost) {
                Ok(t) => {
                    assert!((t.twd(&mu, &nu).unwrap() - res.value).abs() <= 1e-8);
                    checked += 1;
                }
                Err(Error::CyclicSupport) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn twd_equals_ot_under_tree_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..30 {
            let t = random_tree(&mut rng, 40);
            let n = t.point_capacity();
            let mu = random_measure(&mut rng, n, 8);
            let nu = random_measure(&mut rng, n, 8);
            let (a, b) = (mu.entries(), nu.entries());
            let cost = CostMatrix::from_fn(a.len(), b.len(), |i, j| t.path_distance(a[i].0, b[j].0).unwrap())
                .unwrap();
            let ot = exact_w1(&mu, &nu, &cost).unwrap().value;
            assert!((t.twd(&mu, &nu).unwrap() - ot).abs() <= 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn beats_random_feasible_plans(seed in any::<u64>(), n in 1usize..7, m in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_masses(&mut rng, n);
            let b = random_masses(&mut rng, m);
            let cost = CostMatrix::from_fn(n, m, |_, _| 0.0).unwrap();
            let cost = CostMatrix::new(n, m, (0..n * m).map(|_| rng.random::<f64>()).collect()).unwrap_or(cost);
            let best = exact_transport(&a, &b, &cost).unwrap();
            check_plan(&best, &a, &b, &cost);
            for _ in 0..200 {
                // Sinkhorn scaling of a random positive matrix gives a feasible plan.
                let mut p: Vec<f64> = (0..n * m).map(|_| 0.05 + rng.random::<f64>()).collect();
                for _ in 0..500 {
                    for i in 0..n {
                        let s: f64 = p[i * m..(i + 1) * m].iter().sum();
                        for j in 0..m { p[i * m + j] *= a[i] / s; }
                    }
                    for j in 0..m {
                        let s: f64 = (0..n).map(|i| p[i * m + j]).sum();
                        for i in 0..n { p[i * m + j] *= b[j] / s; }
                    }
                }
                let c: f64 = (0..n * m).map(|k| p[k] * cost.get(k / m, k % m)).sum();
                prop_assert!(best.value <= c + 1e-9);
            }
        }
    }
}
