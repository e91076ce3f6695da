use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use twd::build::{TreeMethod, TreeSpec, DEFAULT_BRANCHING, DEFAULT_DEPTH};
use twd::data::{fmt17, load_measures, GroundMetric, Measure, PointCloud};
use twd::eval::{evaluate, parse_pairs, run_benchmark, BenchConfig, PairDistances};
use twd::features::sample_pairs;
use twd::fit::{fit_sliced, fit_weights, FitConfig};
use twd::ot::{exact_w1, CostMatrix};
use twd::{Error, Result, Tree};

/// Tree-Wasserstein distances with fitted edge weights.
#[derive(Parser)]
#[command(name = "twd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a QuadTree or ClusterTree over a point cloud.
    BuildTree(BuildTreeArgs),
    /// Fit the edge weights of an existing tree.
    Fit(FitArgs),
    /// Build and fit several independently seeded trees.
    FitSliced(FitSlicedArgs),
    /// Tree-Wasserstein distances between measures (averaged over trees).
    Dist(DistArgs),
    /// Exact 1-Wasserstein distances between measures.
    ExactW1(ExactArgs),
    /// Compare predicted distances against reference distances.
    Eval(EvalArgs),
    /// Run the full comparison over methods, λ values and slice counts.
    Bench(BenchArgs),
}

#[derive(Args)]
struct TreeShape {
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
    #[arg(long, default_value_t = DEFAULT_BRANCHING)]
    branching: usize,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-3, value_parser = non_negative)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-8, value_parser = positive)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_sweeps: usize,
}

impl SolverArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            lambda: self.lambda,
            tol: self.tol,
            max_sweeps: self.max_sweeps,
        }
    }
}

#[derive(Args)]
struct BuildTreeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "quadtree")]
    method: TreeMethod,
    #[command(flatten)]
    shape: TreeShape,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "euclidean")]
    metric: GroundMetric,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    vectors: PathBuf,
    /// Number of sampled training pairs.
    #[arg(long, default_value_t = 100_000)]
    pairs: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "euclidean")]
    metric: GroundMetric,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitSlicedArgs {
    #[arg(long, default_value = "quadtree")]
    method: TreeMethod,
    #[arg(long, default_value_t = 3)]
    slices: usize,
    #[command(flatten)]
    shape: TreeShape,
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pairs: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "euclidean")]
    metric: GroundMetric,
    /// Output prefix; slice `t` is written to `<out>.<t>`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DistArgs {
    /// One or more tree files; distances are averaged over them.
    #[arg(long, num_args = 1.., required = true)]
    trees: Vec<PathBuf>,
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long)]
    measures: PathBuf,
    /// `i j` lines; defaults to all measure pairs `i < j`.
    #[arg(long)]
    pairs_file: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long)]
    measures: PathBuf,
    #[arg(long, default_value = "euclidean")]
    metric: GroundMetric,
    #[arg(long)]
    pairs_file: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Trees whose nonzero weights are reported as the node count.
    #[arg(long, num_args = 1..)]
    trees: Vec<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long)]
    measures: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "quadtree,cluster")]
    methods: Vec<TreeMethod>,
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1", value_parser = non_negative)]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,3")]
    slices: Vec<usize>,
    /// Number of seeds; run `r` uses `seed + r`.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pairs: usize,
    #[arg(long, default_value_t = 100)]
    eval_pairs: usize,
    #[command(flatten)]
    shape: TreeShape,
    #[arg(long, default_value = "euclidean")]
    metric: GroundMetric,
    #[arg(long, default_value_t = 1e-8, value_parser = positive)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_sweeps: usize,
    /// Exact reference distances; read if present, written otherwise.
    #[arg(long)]
    ref_cache: Option<PathBuf>,
    /// Directory for per-row `reference predicted` TSV files (first seed).
    #[arg(long)]
    scatter_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() && x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("must be a finite number >= 0, got {s}"))
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be a finite number > 0, got {s}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::BuildTree(a) => {
            let cloud = PointCloud::load(&a.input)?;
            let spec = TreeSpec {
                method: a.method,
                max_depth: a.shape.depth,
                branching: a.shape.branching,
                metric: a.metric,
                seed: a.seed,
            };
            spec.build(&cloud)?.save(&a.out)
        }
        Command::Fit(a) => {
            let cloud = PointCloud::load(&a.vectors)?;
            let tree = Tree::load(&a.tree)?;
            check_tree(&tree, &cloud, &a.tree)?;
            let sample = sample_pairs(&cloud, a.metric, a.pairs, a.seed)?;
            let (fitted, report) = fit_weights(&tree, &sample, &a.solver.config())?;
            fitted.save(&a.out)?;
            println!("{report}");
            Ok(())
        }
        Command::FitSliced(a) => {
            let cloud = PointCloud::load(&a.vectors)?;
            let spec = TreeSpec {
                method: a.method,
                max_depth: a.shape.depth,
                branching: a.shape.branching,
                metric: a.metric,
                seed: a.seed,
            };
            let sample = sample_pairs(&cloud, a.metric, a.pairs, a.seed)?;
            let fit = fit_sliced(&cloud, &spec, a.slices, &sample, &a.solver.config())?;
            for (t, (tree, report)) in fit.trees.iter().enumerate() {
                tree.save(suffixed(&a.out, t))?;
                println!("slice={t} {report}");
            }
            Ok(())
        }
        Command::Dist(a) => {
            let cloud = PointCloud::load(&a.vectors)?;
            let measures = load_measures(&a.measures, &cloud)?;
            let mut trees = Vec::new();
            for path in &a.trees {
                let tree = Tree::load(path)?;
                check_tree(&tree, &cloud, path)?;
                trees.push(tree);
            }
            let pairs = measure_pairs(a.pairs_file.as_deref(), &measures)?;
            PairDistances::trees(&trees, &measures, pairs)?.save(&a.out)
        }
        Command::ExactW1(a) => {
            let cloud = PointCloud::load(&a.vectors)?;
            let measures = load_measures(&a.measures, &cloud)?;
            let pairs = measure_pairs(a.pairs_file.as_deref(), &measures)?;
            let values = pairs
                .iter()
                .map(|&(i, j)| {
                    let cost = CostMatrix::between(&cloud, a.metric, &measures[i], &measures[j])?;
                    Ok(exact_w1(&measures[i], &measures[j], &cost)?.value)
                })
                .collect::<Result<Vec<_>>>()?;
            PairDistances { pairs, values }.save(&a.out)
        }
        Command::Eval(a) => {
            let reference = PairDistances::load(&a.reference)?;
            let pred = PairDistances::load(&a.pred)?;
            if reference.pairs != pred.pairs {
                return Err(Error::InvalidConfig(format!(
                    "{} and {} list different pairs",
                    a.reference.display(),
                    a.pred.display()
                )));
            }
            let mut nodes = 0;
            for path in &a.trees {
                nodes += Tree::load(path)?.nonzero_weights();
            }
            let report = evaluate(&reference.values, &pred.values, nodes)?;
            println!(
                "mae={} pcc={} nodes={}",
                fmt17(report.mae),
                fmt17(report.pcc),
                report.nodes
            );
            Ok(())
        }
        Command::Bench(a) => {
            let cloud = PointCloud::load(&a.vectors)?;
            let measures = load_measures(&a.measures, &cloud)?;
            let cfg = BenchConfig {
                methods: a.methods,
                lambdas: a.lambdas,
                slices: a.slices,
                seeds: a.seeds,
                base_seed: a.seed,
                train_pairs: a.pairs,
                eval_pairs: a.eval_pairs,
                depth: a.shape.depth,
                branching: a.shape.branching,
                metric: a.metric,
                tol: a.tol,
                max_sweeps: a.max_sweeps,
            };
            let cached = match &a.ref_cache {
                Some(p) if p.exists() => Some(PairDistances::load(p)?),
                _ => None,
            };
            let fresh = cached.is_none();
            let table = run_benchmark(&cloud, &measures, &cfg, cached)?;
            if let (Some(p), true) = (&a.ref_cache, fresh) {
                table.reference.save(p)?;
            }
            if let Some(dir) = &a.scatter_dir {
                fs::create_dir_all(dir).map_err(|source| Error::Io {
                    path: dir.clone(),
                    source,
                })?;
                for s in &table.scatter {
                    let path = dir.join(format!("{}.tsv", s.label));
                    fs::write(&path, s.to_tsv()).map_err(|source| Error::Io { path, source })?;
                }
            }
            let text = table.to_tsv();
            fs::write(&a.out, &text).map_err(|source| Error::Io {
                path: a.out.clone(),
                source,
            })?;
            print!("{text}");
            Ok(())
        }
    }
}

fn suffixed(prefix: &Path, t: usize) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(format!(".{t}"));
    PathBuf::from(s)
}

fn check_tree(tree: &Tree, cloud: &PointCloud, path: &Path) -> Result<()> {
    match tree
        .mapped_points()
        .map(|(p, _)| p)
        .find(|&p| p >= cloud.n_points())
    {
        Some(p) => Err(Error::InvalidTree(format!(
            "{} maps point {p} but the cloud has {} points",
            path.display(),
            cloud.n_points()
        ))),
        None => Ok(()),
    }
}

fn measure_pairs(file: Option<&Path>, measures: &[Measure]) -> Result<Vec<(usize, usize)>> {
    let pairs = match file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            parse_pairs(&text, path)?
        }
        None => {
            let n = measures.len();
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
        }
    };
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i.max(j) >= measures.len()) {
        return Err(Error::InvalidConfig(format!(
            "pair ({i}, {j}) out of range for {} measures",
            measures.len()
        )));
    }
    Ok(pairs)
}
