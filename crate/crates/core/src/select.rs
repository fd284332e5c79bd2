//! Group trimming, sparsity selection and coefficient reconstruction.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bspline::SplineBasis;
use crate::error::{Error, Result};
use crate::gpsp::{fit_support, group_columns, GroupSolution};
use crate::weak::WeakSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimReport {
    pub theta: usize,
    /// `(group, chi)` for every group of the input support.
    pub scores: Vec<(usize, f64)>,
    pub removed: Vec<usize>,
    pub refit: GroupSolution,
    /// Set when every group fell below the threshold and the strongest one
    /// was kept anyway.
    pub all_trimmed: bool,
}

/// Contribution `||F_v c_v||` of each active group.
pub fn group_contributions(system: &WeakSystem, sol: &GroupSolution) -> Vec<(usize, f64)> {
    sol.support
        .iter()
        .map(|&g| {
            let cols = system.group_columns(g);
            let cg = DVector::from_column_slice(&sol.coeffs[cols.clone()]);
            (g, (system.f.columns(cols.start, cols.len()) * cg).norm())
        })
        .collect()
}

/// Drops active groups whose normalised contribution is below `tau` and
/// refits on the rest.
pub fn gf_trim(system: &WeakSystem, sol: &GroupSolution, tau: f64) -> Result<TrimReport> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::Config(format!("trim threshold must lie in [0, 1), got {tau}")));
    }
    let contrib = group_contributions(system, sol);
    let max = contrib.iter().map(|c| c.1).fold(0.0, f64::max);
    let scores: Vec<(usize, f64)> = contrib
        .iter()
        .map(|&(g, a)| (g, if max > 0.0 { a / max } else { 1.0 }))
        .collect();
    let mut removed: Vec<usize> = scores.iter().filter(|s| s.1 < tau).map(|s| s.0).collect();
    let mut survivors: Vec<usize> = scores.iter().filter(|s| s.1 >= tau).map(|s| s.0).collect();
    let mut all_trimmed = false;
    if survivors.is_empty() && !scores.is_empty() {
        let best = scores
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|s| s.0)
            .unwrap_or(0);
        survivors.push(best);
        removed.retain(|&g| g != best);
        all_trimmed = true;
    }
    let refit = if removed.is_empty() {
        sol.clone()
    } else {
        let cols = group_columns(&system.group_of_column);
        fit_support(&system.f, &system.b, &cols, &survivors)
    };
    Ok(TrimReport {
        theta: sol.theta,
        scores,
        removed,
        refit,
        all_trimmed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrOutcome {
    pub theta_star: usize,
    /// `s[theta - 1]` for `theta = 1..=K-L`.
    pub s: Vec<f64>,
    /// No `s` fell below the threshold and the minimum-residual level was
    /// taken instead.
    pub fallback: bool,
}

/// Smallest `theta` whose average residual reduction over the next `l`
/// levels, relative to `q[0]`, is below `rho`.
pub fn rr_select(q: &[f64], l: usize, rho: f64) -> Result<RrOutcome> {
    let k = q.len();
    if l == 0 || l >= k {
        return Err(Error::Config(format!("lookahead L must satisfy 1 <= L < K = {k}, got {l}")));
    }
    if q[0] == 0.0 {
        return Ok(RrOutcome {
            theta_star: 1,
            s: vec![0.0; k - l],
            fallback: false,
        });
    }
    let s: Vec<f64> = (0..k - l).map(|i| (q[i] - q[i + l]) / (l as f64 * q[0])).collect();
    if let Some(i) = s.iter().position(|&v| v < rho) {
        return Ok(RrOutcome {
            theta_star: i + 1,
            s,
            fallback: false,
        });
    }
    let best = q
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(RrOutcome {
        theta_star: best + 1,
        s,
        fallback: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientCurve {
    pub group: usize,
    pub values: Vec<f64>,
}

/// Samples `c_k(x) = sum_m c_{k,m} psi_m(x)` for every active group.
pub fn reconstruct_coefficients(sol: &GroupSolution, basis: &SplineBasis, x_grid: &[f64]) -> Vec<CoefficientCurve> {
    let m = basis.count();
    sol.support
        .iter()
        .map(|&g| CoefficientCurve {
            group: g,
            values: basis.combine(&sol.coeffs[g * m..(g + 1) * m], x_grid),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// `q[theta - 1] = ||F c - b||^2` after trimming.
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    pub l: usize,
    pub rho: f64,
    pub theta_star: usize,
    pub fallback: bool,
    pub trims: Vec<TrimReport>,
    pub final_solution: GroupSolution,
}

/// Trims every candidate, computes the residual table and picks `theta*`.
pub fn select_model(
    system: &WeakSystem,
    candidates: &[GroupSolution],
    tau: f64,
    l: usize,
    rho: f64,
) -> Result<SelectionReport> {
    let trims = candidates
        .iter()
        .map(|c| gf_trim(system, c, tau))
        .collect::<Result<Vec<_>>>()?;
    let q: Vec<f64> = trims.iter().map(|t| t.refit.residual_norm.powi(2)).collect();
    let rr = rr_select(&q, l, rho)?;
    let final_solution = trims[rr.theta_star - 1].refit.clone();
    Ok(SelectionReport {
        q,
        s: rr.s,
        l,
        rho,
        theta_star: rr.theta_star,
        fallback: rr.fallback,
        trims,
        final_solution,
    })
}
