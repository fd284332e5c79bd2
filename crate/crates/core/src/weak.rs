//! Feature dictionary and weak-form system assembly.
//!
//! For test functions `phi_r(x, t) = B_rx(x) B_rt(t)` and coefficient basis
//! functions `psi_m(x)`, row `r` of the system reads
//!
//! ```text
//! b_r        = -<d_t phi_r, u>
//! F[r, (k,m)] = (-1)^a_k <d_x^a_k (phi_r psi_m), f_k(u)>
//! ```
//!
//! All derivatives fall on the splines and are expanded by the Leibniz rule;
//! the data only enter through pointwise monomials. Inner products use the
//! rectangle rule in x (periodic) and the trapezoid rule in t.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bspline::SplineBasis;
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::spectrum::TestFunctionPlan;

/// One candidate term `d^a/dx^a f(u)` with `f` a monomial in the channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub monomial: Vec<u32>,
    pub deriv_order: usize,
    pub label: String,
}

/// Channel names used in labels.
pub fn channel_names(n_channels: usize) -> Vec<String> {
    match n_channels {
        1 => vec!["u".into()],
        2 => vec!["v".into(), "w".into()],
        n => (0..n).map(|c| format!("u{c}")).collect(),
    }
}

impl FeatureGroup {
    pub fn new(monomial: Vec<u32>, deriv_order: usize) -> Self {
        let label = format_label(&monomial, deriv_order);
        Self {
            monomial,
            deriv_order,
            label,
        }
    }

    /// Total polynomial degree of the monomial.
    pub fn degree(&self) -> u32 {
        self.monomial.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    /// Parses labels such as `1`, `u`, `u^2_xx`, `v^2w_x`.
    pub fn parse(label: &str, n_channels: usize) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("bad feature label '{label}': {msg}"));
        let label = label.trim();
        let (body, deriv) = match label.find('_') {
            Some(pos) => {
                let suffix = &label[pos + 1..];
                if suffix.is_empty() || !suffix.bytes().all(|c| c == b'x') {
                    return Err(bad("derivative suffix must be x's"));
                }
                (&label[..pos], suffix.len())
            }
            None => (label, 0),
        };
        let names = channel_names(n_channels);
        let mut monomial = vec![0u32; n_channels];
        if body != "1" {
            let mut rest = body;
            while !rest.is_empty() {
                // Longest channel name first so that "u1" wins over "u".
                let (c, name) = names
                    .iter()
                    .enumerate()
                    .filter(|(_, n)| rest.starts_with(n.as_str()))
                    .max_by_key(|(_, n)| n.len())
                    .ok_or_else(|| bad("unknown variable"))?;
                rest = &rest[name.len()..];
                let mut exp = 1u32;
                if let Some(r) = rest.strip_prefix('^') {
                    let end = r.find(|ch: char| !ch.is_ascii_digit()).unwrap_or(r.len());
                    exp = r[..end].parse().map_err(|_| bad("bad exponent"))?;
                    if exp == 0 {
                        return Err(bad("zero exponent"));
                    }
                    rest = &r[end..];
                }
                if monomial[c] != 0 {
                    return Err(bad("repeated variable"));
                }
                monomial[c] = exp;
            }
            if monomial.iter().all(|&e| e == 0) {
                return Err(bad("empty monomial"));
            }
        }
        Ok(Self::new(monomial, deriv))
    }
}

fn format_label(monomial: &[u32], deriv: usize) -> String {
    let names = channel_names(monomial.len());
    let mut s = String::new();
    for (name, &e) in names.iter().zip(monomial) {
        match e {
            0 => {}
            1 => s.push_str(name),
            _ => {
                let _ = write!(s, "{name}^{e}");
            }
        }
    }
    if s.is_empty() {
        s.push('1');
    }
    if deriv > 0 {
        s.push('_');
        s.extend(std::iter::repeat('x').take(deriv));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DictionaryPreset {
    Poly3Deriv4,
    Poly3Deriv4Complex,
    Poly2Deriv2,
    Poly6Deriv6,
}

impl DictionaryPreset {
    pub fn name(self) -> &'static str {
        match self {
            Self::Poly3Deriv4 => "poly3-deriv4",
            Self::Poly3Deriv4Complex => "poly3-deriv4-complex",
            Self::Poly2Deriv2 => "poly2-deriv2",
            Self::Poly6Deriv6 => "poly6-deriv6",
        }
    }

    pub fn n_channels(self) -> usize {
        match self {
            Self::Poly3Deriv4Complex => 2,
            _ => 1,
        }
    }
}

impl FromStr for DictionaryPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "poly3-deriv4" => Self::Poly3Deriv4,
            "poly3-deriv4-complex" => Self::Poly3Deriv4Complex,
            "poly2-deriv2" => Self::Poly2Deriv2,
            "poly6-deriv6" => Self::Poly6Deriv6,
            _ => return Err(Error::Config(format!("unknown dictionary preset '{s}'"))),
        })
    }
}

/// Either a named preset or an explicit list of labels.
#[derive(Debug, Clone, PartialEq)]
pub enum DictionarySpec {
    Preset(DictionaryPreset),
    Explicit(Vec<FeatureGroup>),
}

/// Builds the ordered group list. The constant comes first, then for each
/// monomial its derivatives of order `0..=a_max`. Derivatives of the
/// constant are identically zero and are left out.
pub fn build_dictionary(spec: &DictionarySpec) -> Result<Vec<FeatureGroup>> {
    match spec {
        DictionarySpec::Preset(p) => Ok(preset_groups(*p)),
        DictionarySpec::Explicit(list) => {
            if list.is_empty() {
                return Err(Error::Config("explicit dictionary is empty".into()));
            }
            let nc = list[0].monomial.len();
            for (i, g) in list.iter().enumerate() {
                if g.monomial.len() != nc {
                    return Err(Error::Config("dictionary mixes channel counts".into()));
                }
                if list[..i].iter().any(|h| h.monomial == g.monomial && h.deriv_order == g.deriv_order) {
                    return Err(Error::Config(format!("duplicate feature '{}'", g.label)));
                }
            }
            Ok(list.clone())
        }
    }
}

fn preset_groups(p: DictionaryPreset) -> Vec<FeatureGroup> {
    let (monomials, a_max): (Vec<Vec<u32>>, usize) = match p {
        DictionaryPreset::Poly3Deriv4 => ((1..=3).map(|e| vec![e]).collect(), 4),
        DictionaryPreset::Poly2Deriv2 => ((1..=2).map(|e| vec![e]).collect(), 2),
        DictionaryPreset::Poly6Deriv6 => ((1..=6).map(|e| vec![e]).collect(), 6),
        DictionaryPreset::Poly3Deriv4Complex => (
            vec![
                vec![1, 0],
                vec![2, 0],
                vec![3, 0],
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 1],
                vec![2, 1],
                vec![1, 2],
            ],
            4,
        ),
    };
    let nc = p.n_channels();
    let mut out = vec![FeatureGroup::new(vec![0; nc], 0)];
    for mono in monomials {
        for a in 0..=a_max {
            out.push(FeatureGroup::new(mono.clone(), a));
        }
    }
    out
}

/// Index of the group with the given label, if any.
pub fn find_group(dict: &[FeatureGroup], label: &str) -> Option<usize> {
    let n = dict.first()?.monomial.len();
    let g = FeatureGroup::parse(label, n).ok()?;
    dict.iter()
        .position(|h| h.monomial == g.monomial && h.deriv_order == g.deriv_order)
}

/// Assembled linear system for one evolution equation.
#[derive(Debug, Clone)]
pub struct WeakSystem {
    /// `S x (K M)`, columns ordered by group then basis index.
    pub f: DMatrix<f64>,
    pub b: DVector<f64>,
    pub group_of_column: Vec<usize>,
    /// Columns per group.
    pub m: usize,
    pub plan: TestFunctionPlan,
    pub dictionary: Vec<FeatureGroup>,
    /// Channel whose time derivative forms `b`.
    pub channel: usize,
}

impl WeakSystem {
    pub fn n_groups(&self) -> usize {
        self.dictionary.len()
    }

    /// Column indices of group `k`.
    pub fn group_columns(&self, k: usize) -> std::ops::Range<usize> {
        k * self.m..(k + 1) * self.m
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Assembles one system per channel of `field`; all share the same `F`.
pub fn assemble(
    field: &GridField,
    dict: &[FeatureGroup],
    coeff_basis: &SplineBasis,
    plan: &TestFunctionPlan,
) -> Result<Vec<WeakSystem>> {
    if dict.is_empty() {
        return Err(Error::Config("empty dictionary".into()));
    }
    if !field.is_periodic() {
        return Err(Error::Config("weak assembly needs a spatially periodic grid".into()));
    }
    let nc = field.n_channels();
    if dict.iter().any(|g| g.monomial.len() != nc) {
        return Err(Error::Config(format!(
            "dictionary is built for a different number of channels than the data ({nc})"
        )));
    }
    let test_x = plan.space_basis(field)?;
    let test_t = plan.time_basis(field)?;
    let a_max = dict.iter().map(|g| g.deriv_order).max().unwrap_or(0);
    if a_max > test_x.degree() || a_max > coeff_basis.degree() {
        return Err(Error::Config(format!(
            "derivative order {a_max} exceeds spline degree (test {}, coefficient {})",
            test_x.degree(),
            coeff_basis.degree()
        )));
    }

    let (nx, nt) = (field.nx(), field.nt());
    let (dx, dt) = (field.dx(), field.dt());
    let (jx, jt, m_count) = (test_x.count(), test_t.count(), coeff_basis.count());
    let xs = field.x_grid();

    // Spline values on the grid, indexed [deriv][function][point].
    let eval_all = |basis: &SplineBasis, pts: &[f64], max_d: usize| -> Vec<Vec<Vec<f64>>> {
        (0..=max_d)
            .map(|d| {
                (0..basis.count())
                    .map(|j| pts.iter().map(|&x| basis.eval_unchecked(j, d, x)).collect())
                    .collect()
            })
            .collect()
    };
    let bx = eval_all(&test_x, &xs, a_max);
    let psi = eval_all(coeff_basis, &xs, a_max);

    // Spatial weights dx * d^a(B_rx psi_m)(x_i), indexed [a][rx * M + m][i].
    let alphas_used: Vec<bool> = (0..=a_max).map(|a| dict.iter().any(|g| g.deriv_order == a)).collect();
    let wx: Vec<Vec<Vec<f64>>> = (0..=a_max)
        .map(|a| {
            if !alphas_used[a] {
                return Vec::new();
            }
            (0..jx * m_count)
                .into_par_iter()
                .map(|idx| {
                    let (rx, m) = (idx / m_count, idx % m_count);
                    (0..nx)
                        .map(|i| {
                            let mut s = 0.0;
                            for j in 0..=a {
                                s += binomial(a, j) * bx[j][rx][i] * psi[a - j][m][i];
                            }
                            dx * s
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    // Time weights with the trapezoid factor folded in.
    let trap = |n: usize| if n == 0 || n == nt - 1 { 0.5 * dt } else { dt };
    let ts: Vec<f64> = (0..nt).map(|n| field.t(n)).collect();
    let bt: Vec<Vec<f64>> = (0..jt)
        .map(|r| ts.iter().enumerate().map(|(n, &t)| trap(n) * test_t.eval_unchecked(r, 0, t)).collect())
        .collect();
    let btd: Vec<Vec<f64>> = (0..jt)
        .map(|r| ts.iter().enumerate().map(|(n, &t)| trap(n) * test_t.eval_unchecked(r, 1, t)).collect())
        .collect();

    // Distinct monomials evaluated on the grid.
    let mut monos: Vec<Vec<u32>> = Vec::new();
    for g in dict {
        if !monos.contains(&g.monomial) {
            monos.push(g.monomial.clone());
        }
    }
    let mono_vals: Vec<Vec<f64>> = monos
        .par_iter()
        .map(|mono| {
            (0..nt * nx)
                .map(|idx| {
                    let (n, i) = (idx / nx, idx % nx);
                    mono.iter()
                        .enumerate()
                        .fold(1.0, |acc, (c, &e)| acc * field.get(c, n, i).powi(e as i32))
                })
                .collect()
        })
        .collect();
    let mono_of_group: Vec<usize> = dict
        .iter()
        .map(|g| monos.iter().position(|m| *m == g.monomial).unwrap_or(0))
        .collect();

    // Time-integrated profiles sum_n w_t[n] f(n, i), indexed [q][rt][i].
    let time_integrate = |weights: &[Vec<f64>], vals: &[f64]| -> Vec<Vec<f64>> {
        weights
            .par_iter()
            .map(|w| {
                let mut out = vec![0.0; nx];
                for (n, &wn) in w.iter().enumerate() {
                    if wn == 0.0 {
                        continue;
                    }
                    let row = &vals[n * nx..(n + 1) * nx];
                    for (o, v) in out.iter_mut().zip(row) {
                        *o += wn * v;
                    }
                }
                out
            })
            .collect()
    };
    let g_int: Vec<Vec<Vec<f64>>> = mono_vals.iter().map(|v| time_integrate(&bt, v)).collect();
    let h_int: Vec<Vec<Vec<f64>>> = (0..nc).map(|c| time_integrate(&btd, field.channel(c))).collect();

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0, |s, (x, y)| s + x * y);
    let s_rows = jx * jt;
    let k_groups = dict.len();
    let cols = k_groups * m_count;

    // Row r = rt * J_x + rx.
    let rows: Vec<Result<Vec<f64>>> = (0..s_rows)
        .into_par_iter()
        .map(|r| {
            let (rt, rx) = (r / jx, r % jx);
            let mut row = vec![0.0; cols];
            for (k, g) in dict.iter().enumerate() {
                let sign = if g.deriv_order % 2 == 0 { 1.0 } else { -1.0 };
                let prof = &g_int[mono_of_group[k]][rt];
                for m in 0..m_count {
                    let v = sign * dot(&wx[g.deriv_order][rx * m_count + m], prof);
                    if !v.is_finite() {
                        return Err(Error::Numeric {
                            row: r,
                            group: k,
                            basis: m,
                            msg: "non-finite matrix entry".into(),
                        });
                    }
                    row[k * m_count + m] = v;
                }
            }
            Ok(row)
        })
        .collect();
    let mut f = DMatrix::zeros(s_rows, cols);
    for (r, row) in rows.into_iter().enumerate() {
        let row = row?;
        for (c, v) in row.into_iter().enumerate() {
            f[(r, c)] = v;
        }
    }

    let bx_w: Vec<Vec<f64>> = bx[0].iter().map(|v| v.iter().map(|b| dx * b).collect()).collect();
    let group_of_column: Vec<usize> = (0..cols).map(|c| c / m_count).collect();
    let mut out = Vec::with_capacity(nc);
    for c in 0..nc {
        let mut b = DVector::zeros(s_rows);
        for r in 0..s_rows {
            let (rt, rx) = (r / jx, r % jx);
            let v = -dot(&bx_w[rx], &h_int[c][rt]);
            if !v.is_finite() {
                return Err(Error::Numeric {
                    row: r,
                    group: usize::MAX,
                    basis: usize::MAX,
                    msg: "non-finite right-hand side".into(),
                });
            }
            b[r] = v;
        }
        out.push(WeakSystem {
            f: f.clone(),
            b,
            group_of_column: group_of_column.clone(),
            m: m_count,
            plan: plan.clone(),
            dictionary: dict.to_vec(),
            channel: c,
        });
    }
    Ok(out)
}
