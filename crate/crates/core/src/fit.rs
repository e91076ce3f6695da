//! Non-negative Lasso fit of tree edge weights.
//!
//! For a fixed tree and a pair sample Ω the weights solve
//!
//! ```text
//! min_{w ≥ 0}  Σ_{(i,j)∈Ω} (d(x_i, x_j) − ⟨w, z_ij⟩)² + λ‖w‖₁
//! ```
//!
//! with no ½ or `1/|Ω|` factor. The solver is cyclic coordinate descent over
//! the non-root nodes with maintained residuals; because every feature entry
//! is 0 or 1, node `k`'s curvature `a_k` is simply the number of sampled paths
//! through its edge.

use std::fmt;

use crate::build::{slice_seed, TreeSpec};
use crate::data::{Measure, PointCloud};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, PairSample};
use crate::tree::{SubtreeMassAccumulator, Tree};

/// Fitted weights below this are set to exactly zero.
pub const ZERO_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitConfig {
    pub lambda: f64,
    /// Convergence threshold on the largest coordinate change in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            tol: 1e-8,
            max_sweeps: 1000,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub objective: f64,
    pub sweeps_used: usize,
    pub nonzero_weights: usize,
    pub converged: bool,
    /// Objective at the warm start followed by its value after each sweep.
    pub trace: Vec<f64>,
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "objective={} sweeps={} nonzeros={} converged={}",
            crate::data::fmt17(self.objective),
            self.sweeps_used,
            self.nonzero_weights,
            self.converged
        )
    }
}

/// Smallest λ for which `w = 0` is optimal: `2 · max_k Σ_Ω z_ij,k d_ij`.
pub fn lambda_max(z: &FeatureMatrix, targets: &[f64]) -> f64 {
    (0..z.n_cols())
        .map(|k| 2.0 * z.col(k).iter().map(|&r| targets[r]).sum::<f64>())
        .fold(0.0, f64::max)
}

fn objective(residual: &[f64], w: &[f64], lambda: f64) -> f64 {
    residual.iter().map(|r| r * r).sum::<f64>() + lambda * w.iter().sum::<f64>()
}

fn residuals(z: &FeatureMatrix, targets: &[f64], w: &[f64]) -> Vec<f64> {
    z.predict(w)
        .into_iter()
        .zip(targets)
        .map(|(p, d)| d - p)
        .collect()
}

/// Coordinate descent on a prebuilt design matrix from the warm start `w`.
/// Column 0 (the root) and empty columns are pinned to zero.
pub fn solve_nonneg_lasso(
    z: &FeatureMatrix,
    targets: &[f64],
    mut w: Vec<f64>,
    cfg: &FitConfig,
) -> Result<(Vec<f64>, FitReport)> {
    cfg.validate()?;
    if z.n_rows() == 0 {
        return Err(Error::EmptySample);
    }
    if targets.len() != z.n_rows() {
        return Err(Error::LengthMismatch(z.n_rows(), targets.len()));
    }
    if w.len() != z.n_cols() {
        return Err(Error::LengthMismatch(z.n_cols(), w.len()));
    }
    let half_lambda = cfg.lambda / 2.0;
    let active: Vec<usize> = (1..z.n_cols()).filter(|&k| !z.col(k).is_empty()).collect();
    let mut pinned = vec![true; z.n_cols()];
    for &k in &active {
        pinned[k] = false;
    }
    for (wk, pin) in w.iter_mut().zip(&pinned) {
        if *pin || wk.is_nan() || *wk < 0.0 {
            *wk = 0.0;
        }
    }

    let mut r = residuals(z, targets, &w);
    let mut trace = vec![objective(&r, &w, cfg.lambda)];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut max_delta: f64 = 0.0;
        for &k in &active {
            let col = z.col(k);
            let a = col.len() as f64;
            let g: f64 = col.iter().map(|&i| r[i]).sum();
            let next = ((g + a * w[k] - half_lambda) / a).max(0.0);
            let delta = next - w[k];
            if delta != 0.0 {
                for &i in col {
                    r[i] -= delta;
                }
                w[k] = next;
                max_delta = max_delta.max(delta.abs());
            }
        }
        // Refresh residuals so rounding does not accumulate across sweeps.
        r = residuals(z, targets, &w);
        let obj = objective(&r, &w, cfg.lambda);
        let prev = *trace.last().unwrap();
        debug_assert!(
            obj <= prev + 1e-12 * prev.abs().max(1.0),
            "objective rose from {prev} to {obj} in sweep {sweeps}"
        );
        trace.push(obj);
        if max_delta <= cfg.tol {
            converged = true;
            break;
        }
    }

    for wk in &mut w {
        if *wk < ZERO_THRESHOLD {
            *wk = 0.0;
        }
    }
    let r = residuals(z, targets, &w);
    let report = FitReport {
        objective: objective(&r, &w, cfg.lambda),
        sweeps_used: sweeps,
        nonzero_weights: w.iter().filter(|&&x| x != 0.0).count(),
        converged,
        trace,
    };
    Ok((w, report))
}

/// Fits the edge weights of `tree` on `sample`, warm-starting from the
/// tree's current weights.
pub fn fit_weights(tree: &Tree, sample: &PairSample, cfg: &FitConfig) -> Result<(Tree, FitReport)> {
    cfg.validate()?;
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(k) = sample.targets.iter().position(|d| !d.is_finite()) {
        let (i, j) = sample.pairs[k];
        return Err(Error::NonFiniteTarget(i, j));
    }
    let z = FeatureMatrix::build(tree, sample)?;
    let (w, report) = solve_nonneg_lasso(&z, &sample.targets, tree.weights().to_vec(), cfg)?;
    Ok((tree.with_weights(w)?, report))
}

/// `T` independently built and fitted trees over one point cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct SlicedFit {
    pub trees: Vec<(Tree, FitReport)>,
}

impl SlicedFit {
    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Total nonzero weights over all slices.
    pub fn nonzero_weights(&self) -> usize {
        self.trees.iter().map(|(t, _)| t.nonzero_weights()).sum()
    }

    /// Mean tree-Wasserstein distance over the slices.
    pub fn twd(&self, mu: &Measure, nu: &Measure) -> Result<f64> {
        let mut acc = SubtreeMassAccumulator::default();
        self.twd_with(&mut acc, mu, nu)
    }

    pub fn twd_with(&self, acc: &mut SubtreeMassAccumulator, mu: &Measure, nu: &Measure) -> Result<f64> {
        if self.trees.is_empty() {
            return Err(Error::TooFew { needed: 1, got: 0 });
        }
        let mut total = 0.0;
        for (t, _) in &self.trees {
            total += t.twd_with(acc, mu, nu)?;
        }
        Ok(total / self.trees.len() as f64)
    }

    /// Tree files of all slices, concatenated in slice order.
    pub fn to_text(&self) -> String {
        self.trees.iter().map(|(t, _)| t.to_text()).collect()
    }
}

/// Mean of per-tree distances; free-function form of [`SlicedFit::twd`].
pub fn sliced_twd(fit: &SlicedFit, mu: &Measure, nu: &Measure) -> Result<f64> {
    fit.twd(mu, nu)
}

/// Builds `slices` trees (slice `t` seeded by [`slice_seed`]`(spec.seed, t)`)
/// and fits each one on the same pair sample.
pub fn fit_sliced(
    cloud: &PointCloud,
    spec: &TreeSpec,
    slices: usize,
    sample: &PairSample,
    cfg: &FitConfig,
) -> Result<SlicedFit> {
    if slices == 0 {
        return Err(Error::InvalidConfig("need at least one slice".into()));
    }
    let trees = (0..slices)
        .map(|t| {
            let tree = spec.with_seed(slice_seed(spec.seed, t)).build(cloud)?;
            fit_weights(&tree, sample, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SlicedFit { trees })
}
