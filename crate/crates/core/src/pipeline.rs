//! End-to-end identification: plan, assemble, sweep, trim, select.

use serde::{Deserialize, Serialize};

use crate::bspline::make_coefficient_basis;
use crate::error::{Error, Result};
use crate::gpsp::{gpsp_sweep, GroupSolution};
use crate::grid::GridField;
use crate::metrics;
use crate::select::{reconstruct_coefficients, select_model, CoefficientCurve};
use crate::spectrum::{plan_test_functions, TestFunctionPlan};
use crate::weak::{assemble, build_dictionary, DictionaryPreset, DictionarySpec, FeatureGroup};

/// Hyper-parameters of one identification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dictionary: String,
    /// Coefficient basis size.
    pub m: usize,
    /// Spline degree for test functions and coefficients.
    pub d: usize,
    pub tau_x: f64,
    pub tau_t: f64,
    /// Trim threshold.
    pub tau: f64,
    pub l: usize,
    pub rho: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dictionary: "poly3-deriv4".into(),
            m: 7,
            d: 6,
            tau_x: 3.5,
            tau_t: 0.6,
            tau: 0.1,
            l: 3,
            rho: 0.01,
        }
    }
}

impl RunConfig {
    /// Defaults with the looser threshold used for two-channel data.
    pub fn complex() -> Self {
        Self {
            dictionary: "poly3-deriv4-complex".into(),
            rho: 0.1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d + 1 > crate::bspline::MAX_ORDER {
            return Err(Error::Config(format!("spline degree {} out of range", self.d)));
        }
        if self.m < self.d + 1 {
            return Err(Error::Config(format!("M = {} must be at least d + 1 = {}", self.m, self.d + 1)));
        }
        if !(self.tau_x > 0.0 && self.tau_t > 0.0) {
            return Err(Error::Config("tau_x and tau_t must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::Config(format!("trim tau must lie in [0, 1), got {}", self.tau)));
        }
        if self.l == 0 {
            return Err(Error::Config("L must be at least 1".into()));
        }
        if !(self.rho > 0.0) {
            return Err(Error::Config("rho must be positive".into()));
        }
        Ok(())
    }

    /// Dictionary from a preset name or a comma-separated label list.
    pub fn dictionary_groups(&self, n_channels: usize) -> Result<Vec<FeatureGroup>> {
        let spec = match self.dictionary.parse::<DictionaryPreset>() {
            Ok(p) => {
                if p.n_channels() != n_channels {
                    return Err(Error::Config(format!(
                        "preset '{}' expects {} channel(s), data has {n_channels}",
                        p.name(),
                        p.n_channels()
                    )));
                }
                DictionarySpec::Preset(p)
            }
            Err(_) if self.dictionary.contains(',') || self.dictionary.contains('_') || self.dictionary.contains('u') => {
                let list = self
                    .dictionary
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| FeatureGroup::parse(s, n_channels))
                    .collect::<Result<Vec<_>>>()?;
                DictionarySpec::Explicit(list)
            }
            Err(e) => return Err(e),
        };
        build_dictionary(&spec)
    }
}

/// Identification result for one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub channel: usize,
    pub theta_star: usize,
    pub support: Vec<usize>,
    pub support_labels: Vec<String>,
    pub labels: Vec<String>,
    pub m: usize,
    pub coefficients: Vec<f64>,
    pub curves: Vec<CoefficientCurve>,
    pub x_grid: Vec<f64>,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    pub e_res: f64,
    pub plan: TestFunctionPlan,
    pub candidates: Vec<Vec<usize>>,
    pub trimmed: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
    pub config_echo: RunConfig,
}

/// Everything produced by a run, before reduction to reports.
pub struct Identification {
    pub reports: Vec<Report>,
    pub sweeps: Vec<Vec<GroupSolution>>,
}

/// Runs the whole pipeline on every channel of `field`.
pub fn identify(field: &GridField, cfg: &RunConfig) -> Result<Identification> {
    cfg.validate()?;
    let dict = cfg.dictionary_groups(field.n_channels())?;
    if dict.len() <= cfg.l {
        return Err(Error::Config(format!(
            "L = {} must be smaller than the dictionary size {}",
            cfg.l,
            dict.len()
        )));
    }
    let plan = plan_test_functions(field, cfg.d + 1, cfg.tau_x, cfg.tau_t)?;
    let basis = make_coefficient_basis(field.x0(), field.spatial_length(), cfg.m, cfg.d)?;
    let systems = assemble(field, &dict, &basis, &plan)?;
    let x_grid = field.x_grid();
    let mut reports = Vec::with_capacity(systems.len());
    let mut sweeps = Vec::with_capacity(systems.len());
    for sys in &systems {
        let mut warnings = Vec::new();
        if sys.b.norm() == 0.0 {
            return Err(Error::Domain(format!("channel {} has a zero right-hand side", sys.channel)));
        }
        let sweep = gpsp_sweep(&sys.f, &sys.b, &sys.group_of_column)?;
        let sel = select_model(sys, &sweep, cfg.tau, cfg.l, cfg.rho)?;
        if sel.fallback {
            warnings.push("no sparsity level met the RR threshold; using the minimum-residual level".into());
        }
        if sweep.iter().any(|s| s.hit_iteration_cap) {
            warnings.push("subspace pursuit hit its iteration cap".into());
        }
        if sel.trims.iter().any(|t| t.all_trimmed) {
            warnings.push("trimming removed every group at some level; strongest group kept".into());
        }
        if sel.final_solution.rank_deficient {
            warnings.push("final least-squares fit was rank deficient".into());
        }
        let fin = &sel.final_solution;
        let e_res = metrics::e_res(&sys.f, &fin.coeffs, &sys.b)?;
        reports.push(Report {
            channel: sys.channel,
            theta_star: sel.theta_star,
            support: fin.support.clone(),
            support_labels: fin.support.iter().map(|&g| dict[g].label.clone()).collect(),
            labels: dict.iter().map(|g| g.label.clone()).collect(),
            m: cfg.m,
            coefficients: fin.coeffs.clone(),
            curves: reconstruct_coefficients(fin, &basis, &x_grid),
            x_grid: x_grid.clone(),
            q: sel.q.clone(),
            s: sel.s.clone(),
            e_res,
            plan: plan.clone(),
            candidates: sweep.iter().map(|c| c.support.clone()).collect(),
            trimmed: sel.trims.iter().map(|t| t.refit.support.clone()).collect(),
            warnings,
            config_echo: cfg.clone(),
        });
        sweeps.push(sweep);
    }
    Ok(Identification { reports, sweeps })
}
