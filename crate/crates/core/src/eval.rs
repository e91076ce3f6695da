//! Approximation quality of tree distances against exact transport.
//!
//! A benchmark fixes one set of evaluation measure pairs and their exact
//! 1-Wasserstein distances, then for every seed builds (and optionally fits)
//! trees and scores their distances by MAE and Pearson correlation. Means are
//! plain arithmetic means over seeds, PCC included.

use std::fmt::Write as _;
use std::path::Path;

use crate::build::{TreeMethod, TreeSpec, DEFAULT_BRANCHING, DEFAULT_DEPTH};
use crate::data::{fmt17, read, write, GroundMetric, Measure, PointCloud};
use crate::error::{Error, Result};
use crate::features::{sample_pairs, sample_unordered_pairs};
use crate::fit::{fit_sliced, FitConfig, SlicedFit};
use crate::ot::w1_distance;
use crate::tree::{SubtreeMassAccumulator, Tree};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub mae: f64,
    pub pcc: f64,
    pub nodes: usize,
    pub n_pairs: usize,
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "mae={} pcc={} nodes={}",
            fmt17(self.mae),
            fmt17(self.pcc),
            self.nodes
        )
    }
}

/// MAE and Pearson correlation of `predicted` against `reference`.
///
/// A constant prediction has correlation 0.
pub fn evaluate(reference: &[f64], predicted: &[f64], nodes: usize) -> Result<EvalReport> {
    if reference.len() != predicted.len() {
        return Err(Error::LengthMismatch(reference.len(), predicted.len()));
    }
    let n = reference.len();
    if n < 2 {
        return Err(Error::TooFew { needed: 2, got: n });
    }
    let mae = reference
        .iter()
        .zip(predicted)
        .map(|(r, p)| (r - p).abs())
        .sum::<f64>()
        / n as f64;
    let mean = |x: &[f64]| x.iter().sum::<f64>() / n as f64;
    let (mr, mp) = (mean(reference), mean(predicted));
    let (mut srr, mut spp, mut srp) = (0.0, 0.0, 0.0);
    for (r, p) in reference.iter().zip(predicted) {
        let (dr, dp) = (r - mr, p - mp);
        srr += dr * dr;
        spp += dp * dp;
        srp += dr * dp;
    }
    if srr == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let pcc = if spp == 0.0 {
        0.0
    } else {
        (srp / (srr.sqrt() * spp.sqrt())).clamp(-1.0, 1.0)
    };
    Ok(EvalReport {
        mae,
        pcc,
        nodes,
        n_pairs: n,
    })
}

/// Up to `count` distinct unordered measure pairs, uniformly and reproducibly.
pub fn sample_measure_pairs(n_measures: usize, count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if n_measures < 2 {
        return Err(Error::TooFew {
            needed: 2,
            got: n_measures,
        });
    }
    Ok(sample_unordered_pairs(n_measures, count, seed))
}

/// Exact distances for a list of measure pairs, storable as `i j value` TSV.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDistances {
    pub pairs: Vec<(usize, usize)>,
    pub values: Vec<f64>,
}

impl PairDistances {
    pub fn exact(
        cloud: &PointCloud,
        metric: GroundMetric,
        measures: &[Measure],
        pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let values = pairs
            .iter()
            .map(|&(i, j)| w1_distance(cloud, metric, measure(measures, i)?, measure(measures, j)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pairs, values })
    }

    /// Tree-Wasserstein distances averaged over `trees`.
    pub fn trees(trees: &[Tree], measures: &[Measure], pairs: Vec<(usize, usize)>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::TooFew { needed: 1, got: 0 });
        }
        let mut acc = SubtreeMassAccumulator::default();
        let values = pairs
            .iter()
            .map(|&(i, j)| {
                let (mu, nu) = (measure(measures, i)?, measure(measures, j)?);
                let mut total = 0.0;
                for t in trees {
                    total += t.twd_with(&mut acc, mu, nu)?;
                }
                Ok(total / trees.len() as f64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pairs, values })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (&(i, j), v) in self.pairs.iter().zip(&self.values) {
            let _ = writeln!(out, "{i}\t{j}\t{}", fmt17(*v));
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut pairs = Vec::new();
        let mut values = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(
                    k + 1,
                    format!("expected `i j value`, got {} fields", fields.len()),
                ));
            }
            let i = fields[0]
                .parse()
                .map_err(|e| err(k + 1, format!("bad index: {e}")))?;
            let j = fields[1]
                .parse()
                .map_err(|e| err(k + 1, format!("bad index: {e}")))?;
            let v: f64 = fields[2]
                .parse()
                .map_err(|e| err(k + 1, format!("bad value: {e}")))?;
            if !v.is_finite() {
                return Err(err(k + 1, "value is not finite".into()));
            }
            pairs.push((i, j));
            values.push(v);
        }
        Ok(Self { pairs, values })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read(path)?, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write(path.as_ref(), &self.to_tsv())
    }
}

fn measure(measures: &[Measure], i: usize) -> Result<&Measure> {
    measures.get(i).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "measure index {i} out of range ({} measures)",
            measures.len()
        ))
    })
}

/// Parses pairs from whitespace-separated `i j` lines (extra columns ignored).
pub fn parse_pairs(text: &str, origin: &Path) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let (Some(a), Some(b)) = (fields.next(), fields.next()) else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: k + 1,
                msg: "expected `i j`".into(),
            });
        };
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: k + 1,
                msg: format!("bad index `{s}`: {e}"),
            })
        };
        out.push((parse(a)?, parse(b)?));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub methods: Vec<TreeMethod>,
    pub lambdas: Vec<f64>,
    /// Slice counts; 1 gives the single-tree rows.
    pub slices: Vec<usize>,
    pub seeds: usize,
    pub base_seed: u64,
    /// Training pairs per fit.
    pub train_pairs: usize,
    /// Evaluation measure pairs.
    pub eval_pairs: usize,
    pub depth: usize,
    pub branching: usize,
    pub metric: GroundMetric,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        Self {
            methods: vec![TreeMethod::QuadTree, TreeMethod::Cluster],
            lambdas: vec![1e-3, 1e-2, 1e-1],
            slices: vec![1, 3],
            seeds: 10,
            base_seed: 0,
            train_pairs: 100_000,
            eval_pairs: 100,
            depth: DEFAULT_DEPTH,
            branching: DEFAULT_BRANCHING,
            metric: GroundMetric::Euclidean,
            tol: fit.tol,
            max_sweeps: fit.max_sweeps,
        }
    }
}

impl BenchConfig {
    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.seeds == 0 || self.slices.is_empty() {
            return Err(Error::InvalidConfig(
                "bench needs a method, a seed and a slice count".into(),
            ));
        }
        if self.slices.contains(&0) {
            return Err(Error::InvalidConfig("slice counts must be at least 1".into()));
        }
        for &lambda in &self.lambdas {
            FitConfig {
                lambda,
                tol: self.tol,
                max_sweeps: self.max_sweeps,
            }
            .validate()?;
        }
        Ok(())
    }
}

/// One table row: averages over seeds. `lambda == None` is the unfitted tree.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub method: TreeMethod,
    pub lambda: Option<f64>,
    pub slices: usize,
    pub mae: f64,
    pub pcc: f64,
    pub nodes: f64,
}

impl BenchRow {
    pub fn label(&self) -> String {
        match self.lambda {
            None => self.method.name().to_string(),
            Some(l) => format!("{}-lambda{}-T{}", self.method.name(), l, self.slices),
        }
    }
}

/// `(reference, predicted)` points of one row for the first seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Scatter {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Scatter {
    pub fn to_tsv(&self) -> String {
        self.points
            .iter()
            .map(|(r, p)| format!("{}\t{}\n", fmt17(*r), fmt17(*p)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    pub scatter: Vec<Scatter>,
    pub reference: PairDistances,
}

impl BenchTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("method\tlambda\tslices\tmae\tpcc\tnodes\n");
        for r in &self.rows {
            let lambda = r.lambda.map_or_else(|| "none".to_string(), fmt17);
            let _ = writeln!(
                out,
                "{}\t{lambda}\t{}\t{}\t{}\t{}",
                r.method.name(),
                r.slices,
                fmt17(r.mae),
                fmt17(r.pcc),
                fmt17(r.nodes)
            );
        }
        out
    }
}

/// Runs the protocol: exact reference distances once, then per seed one
/// unfitted tree per method and one fit per `(method, λ)` with as many slices
/// as the largest requested count. A `T`-slice row uses the first `T`
/// slices. `reference` may carry precomputed exact distances for the
/// evaluation pairs.
pub fn run_benchmark(
    cloud: &PointCloud,
    measures: &[Measure],
    cfg: &BenchConfig,
    reference: Option<PairDistances>,
) -> Result<BenchTable> {
    cfg.validate()?;
    let reference = match reference {
        Some(r) => r,
        None => {
            let pairs = sample_measure_pairs(measures.len(), cfg.eval_pairs, cfg.base_seed)?;
            PairDistances::exact(cloud, cfg.metric, measures, pairs)?
        }
    };
    let max_slices = *cfg.slices.iter().max().expect("validated");

    struct Acc {
        row: BenchRow,
        n: usize,
    }
    let mut accs: Vec<Acc> = Vec::new();
    let mut scatter = Vec::new();
    let mut push = |k: usize, method, lambda, slices, rep: &EvalReport, first: bool, pred: &[f64]| {
        if accs.len() == k {
            accs.push(Acc {
                row: BenchRow {
                    method,
                    lambda,
                    slices,
                    mae: 0.0,
                    pcc: 0.0,
                    nodes: 0.0,
                },
                n: 0,
            });
        }
        let a = &mut accs[k];
        a.row.mae += rep.mae;
        a.row.pcc += rep.pcc;
        a.row.nodes += rep.nodes as f64;
        a.n += 1;
        if first {
            scatter.push(Scatter {
                label: a.row.label(),
                points: reference
                    .values
                    .iter()
                    .copied()
                    .zip(pred.iter().copied())
                    .collect(),
            });
        }
    };

    for r in 0..cfg.seeds {
        let seed = cfg.base_seed.wrapping_add(r as u64);
        let first = r == 0;
        let sample = sample_pairs(cloud, cfg.metric, cfg.train_pairs, seed)?;
        let mut k = 0;
        for &method in &cfg.methods {
            let spec = TreeSpec {
                method,
                max_depth: cfg.depth,
                branching: cfg.branching,
                metric: cfg.metric,
                seed,
            };
            let base = spec.build(cloud)?;
            let pred =
                PairDistances::trees(std::slice::from_ref(&base), measures, reference.pairs.clone())?.values;
            let rep = evaluate(&reference.values, &pred, base.nonzero_weights())?;
            push(k, method, None, 1, &rep, first, &pred);
            k += 1;
            for &lambda in &cfg.lambdas {
                let fit_cfg = FitConfig {
                    lambda,
                    tol: cfg.tol,
                    max_sweeps: cfg.max_sweeps,
                };
                let all: SlicedFit = fit_sliced(cloud, &spec, max_slices, &sample, &fit_cfg)?;
                for &t in &cfg.slices {
                    let trees: Vec<Tree> = all.trees[..t].iter().map(|(tree, _)| tree.clone()).collect();
                    let nodes = trees.iter().map(Tree::nonzero_weights).sum();
                    let pred = PairDistances::trees(&trees, measures, reference.pairs.clone())?.values;
                    let rep = evaluate(&reference.values, &pred, nodes)?;
                    push(k, method, Some(lambda), t, &rep, first, &pred);
                    k += 1;
                }
            }
        }
    }

    let rows = accs
        .into_iter()
        .map(|a| {
            let n = a.n as f64;
            BenchRow {
                mae: a.row.mae / n,
                pcc: a.row.pcc / n,
                nodes: a.row.nodes / n,
                ..a.row
            }
        })
        .collect();
    Ok(BenchTable {
        rows,
        scatter,
        reference,
    })
}
