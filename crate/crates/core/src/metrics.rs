//! Evaluation against a known truth.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::bspline::SplineBasis;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::weak::{find_group, FeatureGroup};

/// True support and projected coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub support: Vec<usize>,
    pub c_star: Vec<f64>,
}

impl GroundTruth {
    /// Projects each true coefficient function onto `basis`; all other
    /// groups are zero.
    pub fn project(
        n_groups: usize,
        basis: &SplineBasis,
        terms: &[(usize, &dyn Fn(f64) -> f64)],
    ) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Domain("ground truth needs at least one term".into()));
        }
        let m = basis.count();
        let mut c_star = vec![0.0; n_groups * m];
        let mut support = Vec::new();
        for (g, f) in terms {
            if *g >= n_groups {
                return Err(Error::Domain(format!("truth group {g} outside dictionary")));
            }
            let c = basis.l2_project(f)?;
            c_star[g * m..(g + 1) * m].copy_from_slice(&c);
            support.push(*g);
        }
        support.sort_unstable();
        support.dedup();
        Ok(Self { support, c_star })
    }

    /// Truth from `(label, coefficient expression)` pairs, resolved against
    /// a dictionary.
    pub fn from_labels(dict: &[FeatureGroup], basis: &SplineBasis, terms: &[(String, String)]) -> Result<Self> {
        let mut parsed = Vec::with_capacity(terms.len());
        for (label, text) in terms {
            let g = find_group(dict, label)
                .ok_or_else(|| Error::Domain(format!("truth term '{label}' is not in the dictionary")))?;
            parsed.push((g, Expr::parse(text)?));
        }
        let fns: Vec<(usize, Box<dyn Fn(f64) -> f64 + '_>)> = parsed
            .iter()
            .map(|(g, e)| (*g, Box::new(move |x| e.eval(x)) as Box<dyn Fn(f64) -> f64>))
            .collect();
        let refs: Vec<(usize, &dyn Fn(f64) -> f64)> = fns.iter().map(|(g, f)| (*g, f.as_ref())).collect();
        Self::project(dict.len(), basis, &refs)
    }
}

/// `||c* - c|| / ||c*||`.
pub fn e2(c: &[f64], c_star: &[f64]) -> Result<f64> {
    if c.len() != c_star.len() {
        return Err(Error::Domain("coefficient vectors differ in length".into()));
    }
    let den = c_star.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::Domain("true coefficient vector is zero".into()));
    }
    let num = c.iter().zip(c_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(num / den)
}

/// `||F c - b|| / ||b||`.
pub fn e_res(f: &DMatrix<f64>, c: &[f64], b: &DVector<f64>) -> Result<f64> {
    if c.len() != f.ncols() || b.len() != f.nrows() {
        return Err(Error::Domain("dimension mismatch".into()));
    }
    let bn = b.norm();
    if bn == 0.0 {
        return Err(Error::Domain("right-hand side is zero".into()));
    }
    Ok((f * DVector::from_column_slice(c) - b).norm() / bn)
}

fn overlap(a: &[usize], b: &[usize]) -> usize {
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    a.intersection(&b).count()
}

fn distinct(a: &[usize]) -> usize {
    a.iter().collect::<BTreeSet<_>>().len()
}

/// Fraction of true groups that were found.
pub fn tpr(support: &[usize], true_support: &[usize]) -> Result<f64> {
    if true_support.is_empty() {
        return Err(Error::Domain("true support is empty".into()));
    }
    Ok(overlap(support, true_support) as f64 / distinct(true_support) as f64)
}

/// Fraction of found groups that are true.
pub fn ppv(support: &[usize], true_support: &[usize]) -> Result<f64> {
    if support.is_empty() {
        return Err(Error::Domain("identified support is empty".into()));
    }
    Ok(overlap(support, true_support) as f64 / distinct(support) as f64)
}
