use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use twd::data::{load_measures, save_measures};
use twd::eval::PairDistances;
use twd::synth::{random_measure, uniform_cloud};
use twd::{PointCloud, Tree};

/// Runs the binary in `dir` with whitespace-separated `args`.
fn twd(dir: &Path, args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twd"))
        .current_dir(dir)
        .args(args.split_whitespace())
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// 40 points in 3-d and 6 measures over them.
fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    uniform_cloud(&mut rng, 40, 3)
        .save(dir.path().join("v.txt"))
        .unwrap();
    let measures: Vec<_> = (0..6).map(|_| random_measure(&mut rng, 40, 5)).collect();
    save_measures(dir.path().join("m.txt"), &measures).unwrap();
    dir
}

#[test]
fn build_tree_writes_a_loadable_tree() {
    let dir = workspace();
    let out = twd(
        dir.path(),
        "build-tree --input v.txt --method quadtree --depth 6 --seed 7 --out t.txt",
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let tree = Tree::load(dir.path().join("t.txt")).unwrap();
    assert!(tree.max_depth() <= 6);
    assert_eq!(tree.mapped_points().count(), 40);

    let out = twd(
        dir.path(),
        "build-tree --input v.txt --method cluster --branching 4 --out c.txt",
    );
    assert_eq!(code(&out), 0);
    let cluster = Tree::load(dir.path().join("c.txt")).unwrap();
    assert!((0..cluster.n_nodes()).all(|v| cluster.n_children(v) <= 4));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = workspace();
    assert_eq!(
        code(&twd(dir.path(), "build-tree --method quadtree --out t.txt")),
        2
    );
    assert_eq!(
        code(&twd(dir.path(), "build-tree --input v.txt --out t.txt --bogus")),
        2
    );
    assert_eq!(
        code(&twd(
            dir.path(),
            "build-tree --input v.txt --method kd --out t.txt"
        )),
        2
    );
    assert_eq!(code(&twd(dir.path(), "frobnicate")), 2);
    let negative = twd(
        dir.path(),
        "fit --tree t.txt --vectors v.txt --lambda -0.1 --out x",
    );
    assert_eq!(code(&negative), 2);
    assert!(!dir.path().join("x").exists());
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = workspace();
    let out = twd(dir.path(), "build-tree --input missing.txt --out t.txt");
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));
    assert_eq!(
        code(&twd(dir.path(), "build-tree --input v.txt --depth 0 --out t.txt")),
        1
    );
}

#[test]
fn fit_reports_and_writes_weights() {
    let dir = workspace();
    twd(dir.path(), "build-tree --input v.txt --seed 7 --out t.txt");
    let out = twd(
        dir.path(),
        "fit --tree t.txt --vectors v.txt --pairs 500 --lambda 0.001 --seed 7 --out tw.txt",
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let line = stdout(&out);
    for key in ["objective=", "sweeps=", "nonzeros=", "converged="] {
        assert!(line.contains(key), "{line}");
    }
    let before = Tree::load(dir.path().join("t.txt")).unwrap();
    let after = Tree::load(dir.path().join("tw.txt")).unwrap();
    assert_eq!(before.n_nodes(), after.n_nodes());
    assert_ne!(before.weights(), after.weights());
}

#[test]
fn fit_that_stops_early_still_succeeds() {
    let dir = workspace();
    twd(dir.path(), "build-tree --input v.txt --out t.txt");
    let out = twd(
        dir.path(),
        "fit --tree t.txt --vectors v.txt --pairs 500 --max-sweeps 1 --out tw.txt",
    );
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("converged=false"));
}

#[test]
fn fit_sliced_writes_suffixed_files() {
    let dir = workspace();
    let out = twd(
        dir.path(),
        "fit-sliced --method cluster --slices 3 --vectors v.txt --pairs 500 --seed 3 --out s.txt",
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().count(), 3);
    for t in 0..3 {
        Tree::load(dir.path().join(format!("s.txt.{t}"))).unwrap();
    }
    assert!(!dir.path().join("s.txt.3").exists());
}

#[test]
fn dist_single_and_sliced() {
    let dir = workspace();
    twd(
        dir.path(),
        "fit-sliced --slices 3 --vectors v.txt --pairs 500 --seed 3 --out s.txt",
    );
    let one = twd(
        dir.path(),
        "dist --trees s.txt.0 --vectors v.txt --measures m.txt --out d1.tsv",
    );
    assert_eq!(code(&one), 0, "{}", String::from_utf8_lossy(&one.stderr));
    let three = twd(
        dir.path(),
        "dist --trees s.txt.0 s.txt.1 s.txt.2 --vectors v.txt --measures m.txt --out d3.tsv",
    );
    assert_eq!(code(&three), 0);

    let cloud = PointCloud::load(dir.path().join("v.txt")).unwrap();
    let measures = load_measures(dir.path().join("m.txt"), &cloud).unwrap();
    let trees: Vec<Tree> = (0..3)
        .map(|t| Tree::load(dir.path().join(format!("s.txt.{t}"))).unwrap())
        .collect();
    let d1 = PairDistances::load(dir.path().join("d1.tsv")).unwrap();
    let d3 = PairDistances::load(dir.path().join("d3.tsv")).unwrap();
    assert_eq!(d1.pairs.len(), 15);
    for (k, &(i, j)) in d3.pairs.iter().enumerate() {
        let single = trees[0].twd(&measures[i], &measures[j]).unwrap();
        assert_eq!(d1.values[k], single);
        let mean = trees
            .iter()
            .map(|t| t.twd(&measures[i], &measures[j]).unwrap())
            .sum::<f64>()
            / 3.0;
        assert!((d3.values[k] - mean).abs() <= 1e-12);
    }

    fs::write(dir.path().join("p.txt"), "0 5\n2 3\n").unwrap();
    let out = twd(
        dir.path(),
        "dist --trees s.txt.0 --vectors v.txt --measures m.txt --pairs-file p.txt --out dp.tsv",
    );
    assert_eq!(code(&out), 0);
    assert_eq!(
        PairDistances::load(dir.path().join("dp.tsv")).unwrap().pairs,
        vec![(0, 5), (2, 3)]
    );
}

#[test]
fn dist_rejects_mismatched_files() {
    let dir = workspace();
    twd(dir.path(), "build-tree --input v.txt --out t.txt");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    uniform_cloud(&mut rng, 10, 3)
        .save(dir.path().join("small.txt"))
        .unwrap();
    let out = twd(
        dir.path(),
        "dist --trees t.txt --vectors small.txt --measures m.txt --out d.tsv",
    );
    assert_eq!(code(&out), 1);
    assert!(!dir.path().join("d.tsv").exists());
}

#[test]
fn exact_and_eval_round_trip() {
    let dir = workspace();
    let out = twd(
        dir.path(),
        "exact-w1 --vectors v.txt --measures m.txt --metric euclidean --out ref.tsv",
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let reference = PairDistances::load(dir.path().join("ref.tsv")).unwrap();
    assert_eq!(reference.pairs.len(), 15);
    assert!(reference.values.iter().all(|&v| v > 0.0));

    let out = twd(dir.path(), "eval --ref ref.tsv --pred ref.tsv");
    assert_eq!(code(&out), 0);
    let line = stdout(&out);
    assert!(line.starts_with("mae=0.0000000000000000e0 pcc=1.0"), "{line}");
    assert!(line.trim_end().ends_with("nodes=0"));

    twd(dir.path(), "build-tree --input v.txt --out t.txt");
    twd(
        dir.path(),
        "dist --trees t.txt --vectors v.txt --measures m.txt --out pred.tsv",
    );
    let out = twd(dir.path(), "eval --ref ref.tsv --pred pred.tsv --trees t.txt");
    assert_eq!(code(&out), 0);
    let nodes = Tree::load(dir.path().join("t.txt")).unwrap().nonzero_weights();
    assert!(stdout(&out).trim_end().ends_with(&format!("nodes={nodes}")));

    fs::write(dir.path().join("short.tsv"), "0\t1\t1.0\n").unwrap();
    assert_eq!(code(&twd(dir.path(), "eval --ref ref.tsv --pred short.tsv")), 1);
}

#[test]
fn bench_is_reproducible_and_uses_the_cache() {
    let dir = workspace();
    let args = "bench --vectors v.txt --measures m.txt --methods quadtree --lambdas 0.001,0.1 --slices 1,3 --seeds 2 --seed 7 --pairs 300 --eval-pairs 15 --depth 4 --ref-cache cache.tsv --scatter-dir sc --out table.tsv";
    let first = twd(dir.path(), args);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let table = fs::read_to_string(dir.path().join("table.tsv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "method\tlambda\tslices\tmae\tpcc\tnodes");
    assert_eq!(lines.len(), 1 + 1 + 2 * 2);
    assert!(lines[1].starts_with("quadtree\tnone\t1\t"));
    assert_eq!(fs::read_dir(dir.path().join("sc")).unwrap().count(), 5);

    let cache = fs::read(dir.path().join("cache.tsv")).unwrap();
    let second = twd(dir.path(), args);
    assert_eq!(code(&second), 0);
    assert_eq!(fs::read_to_string(dir.path().join("table.tsv")).unwrap(), table);
    assert_eq!(fs::read(dir.path().join("cache.tsv")).unwrap(), cache);
    assert_eq!(first.stdout, second.stdout);
}
