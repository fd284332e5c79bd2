//! Group projected subspace pursuit.
//!
//! Each group of columns is scored against a vector `r` by the norm of the
//! orthogonal projection of `r` onto the group's column space. Starting from
//! the `theta` best-scoring groups against `b`, every iteration merges in
//! the `theta` best groups against the current residual, fits least squares
//! on the union, keeps the `theta` groups with the largest contribution
//! `||F_i c_i||`, and refits. The loop stops as soon as the residual grows,
//! in which case the previous support is returned.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lstsq, range_basis};

/// Iteration cap per sparsity level.
pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSolution {
    pub theta: usize,
    /// Active group indices, ascending.
    pub support: Vec<usize>,
    /// Full-length coefficient vector, zero outside the support columns.
    pub coeffs: Vec<f64>,
    pub residual_norm: f64,
    pub rank_deficient: bool,
    pub hit_iteration_cap: bool,
    /// Residual norms of the accepted iterates, initial fit first.
    pub history: Vec<f64>,
}

/// Column lists per group from a column-to-group map.
pub fn group_columns(groups: &[usize]) -> Vec<Vec<usize>> {
    let k = groups.iter().map(|g| g + 1).max().unwrap_or(0);
    let mut cols = vec![Vec::new(); k];
    for (c, &g) in groups.iter().enumerate() {
        cols[g].push(c);
    }
    cols
}

/// Least-squares fit of `b` on the columns of the given groups.
pub fn fit_support(
    f: &DMatrix<f64>,
    b: &DVector<f64>,
    cols: &[Vec<usize>],
    support: &[usize],
) -> GroupSolution {
    let mut support = support.to_vec();
    support.sort_unstable();
    support.dedup();
    let active: Vec<usize> = support.iter().flat_map(|&g| cols[g].iter().copied()).collect();
    let sub = f.select_columns(&active);
    let sol = lstsq(&sub, b);
    let mut coeffs = vec![0.0; f.ncols()];
    for (j, &c) in active.iter().enumerate() {
        coeffs[c] = sol.x[j];
    }
    let residual_norm = (&sub * &sol.x - b).norm();
    GroupSolution {
        theta: support.len(),
        support,
        coeffs,
        residual_norm,
        rank_deficient: sol.rank_deficient,
        hit_iteration_cap: false,
        history: vec![residual_norm],
    }
}

/// Indices of the `theta` largest scores, ties broken by lower index.
/// Groups with zero (or non-finite) score are skipped when `skip_zero`.
fn top(scores: &[(usize, f64)], theta: usize, skip_zero: bool) -> Vec<usize> {
    let mut order: Vec<(usize, f64)> = scores
        .iter()
        .copied()
        .filter(|(_, s)| s.is_finite() && (!skip_zero || *s > 0.0))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<usize> = order.into_iter().take(theta).map(|(g, _)| g).collect();
    out.sort_unstable();
    out
}

/// Precomputed per-group projectors.
pub struct GroupProjector {
    cols: Vec<Vec<usize>>,
    bases: Vec<DMatrix<f64>>,
}

impl GroupProjector {
    pub fn new(f: &DMatrix<f64>, groups: &[usize]) -> Result<Self> {
        if groups.len() != f.ncols() {
            return Err(Error::Config(format!(
                "group map has {} entries for {} columns",
                groups.len(),
                f.ncols()
            )));
        }
        let cols = group_columns(groups);
        if cols.iter().any(|c| c.is_empty()) {
            return Err(Error::Config("every group needs at least one column".into()));
        }
        let bases = cols.iter().map(|c| range_basis(&f.select_columns(c))).collect();
        Ok(Self { cols, bases })
    }

    pub fn n_groups(&self) -> usize {
        self.cols.len()
    }

    /// `||P_i r||` for every group.
    pub fn scores(&self, r: &DVector<f64>) -> Vec<(usize, f64)> {
        self.bases
            .iter()
            .enumerate()
            .map(|(i, q)| (i, if q.ncols() == 0 { 0.0 } else { q.tr_mul(r).norm() }))
            .collect()
    }
}

/// Best `theta`-group support found by subspace pursuit.
pub fn gpsp_solve(f: &DMatrix<f64>, b: &DVector<f64>, groups: &[usize], theta: usize) -> Result<GroupSolution> {
    let proj = GroupProjector::new(f, groups)?;
    solve_with(f, b, &proj, theta)
}

fn solve_with(f: &DMatrix<f64>, b: &DVector<f64>, proj: &GroupProjector, theta: usize) -> Result<GroupSolution> {
    let k = proj.n_groups();
    if theta == 0 || theta > k {
        return Err(Error::Config(format!("theta must lie in 1..={k}, got {theta}")));
    }
    if b.len() != f.nrows() {
        return Err(Error::Config("right-hand side length does not match F".into()));
    }
    let cols = &proj.cols;
    let mut support = top(&proj.scores(b), theta, true);
    if support.is_empty() {
        // b is orthogonal to every group; any support is optimal.
        support = (0..theta).collect();
    }
    let mut current = fit_support(f, b, cols, &support);
    let mut history = vec![current.residual_norm];
    let mut capped = true;
    for _ in 0..MAX_ITERATIONS {
        let residual = b - f * DVector::from_column_slice(&current.coeffs);
        let mut expanded = current.support.clone();
        expanded.extend(top(&proj.scores(&residual), theta, true));
        expanded.sort_unstable();
        expanded.dedup();
        let wide = fit_support(f, b, cols, &expanded);
        let contrib: Vec<(usize, f64)> = expanded
            .iter()
            .map(|&g| {
                let idx = &cols[g];
                let fg = f.select_columns(idx);
                let cg = DVector::from_iterator(idx.len(), idx.iter().map(|&c| wide.coeffs[c]));
                (g, (fg * cg).norm())
            })
            .collect();
        let pruned = top(&contrib, theta, false);
        let next = fit_support(f, b, cols, &pruned);
        if next.residual_norm > current.residual_norm {
            capped = false;
            break;
        }
        let same = next.support == current.support;
        current = next;
        history.push(current.residual_norm);
        if same {
            capped = false;
            break;
        }
    }
    current.theta = theta;
    current.hit_iteration_cap = capped;
    current.history = history;
    Ok(current)
}

/// Runs the solver for every `theta = 1..=K`, ordered by `theta`.
pub fn gpsp_sweep(f: &DMatrix<f64>, b: &DVector<f64>, groups: &[usize]) -> Result<Vec<GroupSolution>> {
    let proj = GroupProjector::new(f, groups)?;
    (1..=proj.n_groups())
        .into_par_iter()
        .map(|theta| solve_with(f, b, &proj, theta))
        .collect()
}
