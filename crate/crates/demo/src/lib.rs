//! Browser demo over a 2-D point cloud. Each exported function takes flat
//! `x0 y0 x1 y1 ...` coordinates and returns a JSON string; the `*_json`
//! functions hold the logic so they can be tested natively.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use twd::build::{TreeMethod, TreeSpec};
use twd::eval::evaluate;
use twd::features::sample_pairs;
use twd::fit::{fit_weights, FitConfig};
use twd::ot::{exact_w1, tree_from_plan, CostMatrix};
use twd::synth::random_measure;
use twd::{GroundMetric, Measure, PointCloud, Tree};

type Result<T> = std::result::Result<T, String>;

fn cloud(coords: &[f64]) -> Result<PointCloud> {
    PointCloud::new(2, coords.to_vec()).map_err(|e| e.to_string())
}

fn spec(method: &str, depth: u32, seed: u32) -> Result<TreeSpec> {
    let method: TreeMethod = method.parse().map_err(|e: twd::Error| e.to_string())?;
    let mut spec = TreeSpec::new(method).with_seed(seed.into());
    spec.max_depth = depth as usize;
    Ok(spec)
}

/// Default tree and its fitted copy.
fn build_and_fit(pc: &PointCloud, spec: &TreeSpec, lambda: f64, pairs: u32) -> Result<(Tree, Tree, Value)> {
    let tree = spec.build(pc).map_err(|e| e.to_string())?;
    let sample =
        sample_pairs(pc, GroundMetric::Euclidean, pairs as usize, spec.seed).map_err(|e| e.to_string())?;
    let cfg = FitConfig {
        lambda,
        ..Default::default()
    };
    let (fitted, report) = fit_weights(&tree, &sample, &cfg).map_err(|e| e.to_string())?;
    let report = json!({
        "objective": report.objective,
        "sweeps": report.sweeps_used,
        "nonzeros": report.nonzero_weights,
        "converged": report.converged,
    });
    Ok((tree, fitted, report))
}

/// Mean position of the points below each node.
fn node_positions(tree: &Tree, pc: &PointCloud) -> Vec<[f64; 3]> {
    let mut acc = vec![[0.0; 3]; tree.n_nodes()];
    for (p, node) in tree.mapped_points() {
        let xy = pc.point(p);
        let mut v = Some(node);
        while let Some(u) = v {
            acc[u][0] += xy[0];
            acc[u][1] += xy[1];
            acc[u][2] += 1.0;
            v = tree.parent(u);
        }
    }
    acc
}

pub fn sample_points(n: u32, clusters: u32, seed: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.into());
    let centers: Vec<(f64, f64)> = (0..clusters.max(1))
        .map(|_| (rng.random_range(0.15..0.85), rng.random_range(0.15..0.85)))
        .collect();
    let mut out = Vec::with_capacity(2 * n as usize);
    for _ in 0..n {
        let (cx, cy) = centers[rng.random_range(0..centers.len())];
        let r = 0.12 * rng.random::<f64>().sqrt();
        let a = std::f64::consts::TAU * rng.random::<f64>();
        out.push((cx + r * a.cos()).clamp(0.0, 1.0));
        out.push((cy + r * a.sin()).clamp(0.0, 1.0));
    }
    out
}

pub fn tree_view_json(
    coords: &[f64],
    method: &str,
    depth: u32,
    seed: u32,
    lambda: f64,
    pairs: u32,
) -> Result<String> {
    let pc = cloud(coords)?;
    let (tree, fitted, report) = build_and_fit(&pc, &spec(method, depth, seed)?, lambda, pairs)?;
    let pos = node_positions(&tree, &pc);
    let nodes: Vec<Value> = (0..tree.n_nodes())
        .map(|v| {
            json!({
                "parent": tree.parent(v),
                "x": pos[v][0] / pos[v][2],
                "y": pos[v][1] / pos[v][2],
                "depth": tree.depth(v),
                "default": tree.weight(v),
                "fitted": fitted.weight(v),
            })
        })
        .collect();
    Ok(json!({
        "nodes": nodes,
        "report": report,
        "default_nonzeros": tree.nonzero_weights(),
    })
    .to_string())
}

#[allow(clippy::too_many_arguments)]
pub fn compare_json(
    coords: &[f64],
    method: &str,
    depth: u32,
    seed: u32,
    lambda: f64,
    pairs: u32,
    n_pairs: u32,
    support: u32,
) -> Result<String> {
    let pc = cloud(coords)?;
    let (tree, fitted, report) = build_and_fit(&pc, &spec(method, depth, seed)?, lambda, pairs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(seed) ^ 0x5eed);
    let support = (support as usize).clamp(1, pc.n_points());
    let (mut exact, mut default, mut learned) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n_pairs.max(2) {
        let mu = random_measure(&mut rng, pc.n_points(), support);
        let nu = random_measure(&mut rng, pc.n_points(), support);
        let cost = CostMatrix::between(&pc, GroundMetric::Euclidean, &mu, &nu).map_err(|e| e.to_string())?;
        exact.push(exact_w1(&mu, &nu, &cost).map_err(|e| e.to_string())?.value);
        default.push(tree.twd(&mu, &nu).map_err(|e| e.to_string())?);
        learned.push(fitted.twd(&mu, &nu).map_err(|e| e.to_string())?);
    }
    let score = |pred: &[f64], nodes| -> Result<Value> {
        let r = evaluate(&exact, pred, nodes).map_err(|e| e.to_string())?;
        Ok(json!({ "mae": r.mae, "pcc": r.pcc, "nodes": r.nodes }))
    };
    Ok(json!({
        "exact": exact,
        "default": default,
        "fitted": learned,
        "default_score": score(&default, tree.nonzero_weights())?,
        "fitted_score": score(&learned, fitted.nonzero_weights())?,
        "report": report,
    })
    .to_string())
}

/// Uniform measures on two index sets, their optimal plan and plan tree.
pub fn transport_json(coords: &[f64], mu_points: &[u32], nu_points: &[u32]) -> Result<String> {
    let pc = cloud(coords)?;
    let uniform = |pts: &[u32]| {
        Measure::from_weights(pts.iter().map(|&p| (p as usize, 1.0)).collect()).map_err(|e| e.to_string())
    };
    let (mu, nu) = (uniform(mu_points)?, uniform(nu_points)?);
    mu.check_cloud(&pc).map_err(|e| e.to_string())?;
    nu.check_cloud(&pc).map_err(|e| e.to_string())?;
    let cost = CostMatrix::between(&pc, GroundMetric::Euclidean, &mu, &nu).map_err(|e| e.to_string())?;
    let res = exact_w1(&mu, &nu, &cost).map_err(|e| e.to_string())?;
    let tree = tree_from_plan(&res.plan, &mu, &nu, &cost).map_err(|e| e.to_string())?;
    let plan: Vec<Value> = res
        .plan
        .entries
        .iter()
        .map(|&(i, j, m)| json!({ "from": mu.entries()[i].0, "to": nu.entries()[j].0, "mass": m }))
        .collect();
    let mut point_at = vec![None; tree.n_nodes()];
    for (p, node) in tree.mapped_points() {
        point_at[node] = Some(p);
    }
    let nodes: Vec<Value> = (0..tree.n_nodes())
        .map(|v| json!({ "parent": tree.parent(v), "weight": tree.weight(v), "point": point_at[v] }))
        .collect();
    Ok(json!({
        "w1": res.value,
        "tree_distance": tree.twd(&mu, &nu).map_err(|e| e.to_string())?,
        "plan": plan,
        "tree": nodes,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn random_points(n: u32, clusters: u32, seed: u32) -> Vec<f64> {
    sample_points(n, clusters, seed)
}

#[wasm_bindgen]
pub fn tree_view(
    coords: &[f64],
    method: &str,
    depth: u32,
    seed: u32,
    lambda: f64,
    pairs: u32,
) -> std::result::Result<String, JsError> {
    tree_view_json(coords, method, depth, seed, lambda, pairs).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn compare(
    coords: &[f64],
    method: &str,
    depth: u32,
    seed: u32,
    lambda: f64,
    pairs: u32,
    n_pairs: u32,
    support: u32,
) -> std::result::Result<String, JsError> {
    compare_json(coords, method, depth, seed, lambda, pairs, n_pairs, support).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn transport(
    coords: &[f64],
    mu_points: &[u32],
    nu_points: &[u32],
) -> std::result::Result<String, JsError> {
    transport_json(coords, mu_points, nu_points).map_err(|e| JsError::new(&e))
}
