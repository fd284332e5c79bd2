//! Pseudo-spectral benchmark generators on periodic domains.
//!
//! Space is discretised with FFT derivatives; time uses fourth-order
//! Runge-Kutta in integrating-factor (Lawson) form. The stiff
//! constant-coefficient part (diffusion and the mean of a dispersive
//! coefficient) is integrated exactly, the rest explicitly. Nonlinear and
//! variable-coefficient terms are dealiased with the 2/3 rule.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::GridField;

pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Growth of `max |u|` beyond this factor counts as a blow-up.
pub const BLOWUP_FACTOR: f64 = 1e6;
/// Smallest internal resolution used by the solver.
const MIN_SOLVER_POINTS: usize = 512;
/// Fraction of the explicit stability limit used for automatic steps.
const SAFETY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeKind {
    /// `u_t = a(x) u_x + c u_xx`
    AdvectionDiffusion,
    /// `u_t = a(x) u u_x + c u_xx`
    ViscousBurgers,
    /// `u_t = a(x) u u_x + b(x) u_xxx`
    KdV,
    /// `u_t = a(x) u u_x`, spectrally filtered
    InviscidBurgers,
}

impl PdeKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::AdvectionDiffusion => "advection-diffusion",
            Self::ViscousBurgers => "burgers",
            Self::KdV => "kdv",
            Self::InviscidBurgers => "inviscid-burgers",
        }
    }

    fn nonlinear(self) -> bool {
        !matches!(self, Self::AdvectionDiffusion)
    }
}

impl FromStr for PdeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "advection-diffusion" | "advection" => Self::AdvectionDiffusion,
            "burgers" | "viscous-burgers" => Self::ViscousBurgers,
            "kdv" => Self::KdV,
            "inviscid-burgers" => Self::InviscidBurgers,
            _ => return Err(Error::Config(format!("unknown PDE '{s}'"))),
        })
    }
}

/// Coefficient or initial profile, with its text form when it has one.
#[derive(Clone)]
pub struct NamedProfile {
    pub text: String,
    pub f: Profile,
}

impl NamedProfile {
    pub fn parse(text: &str) -> Result<Self> {
        let e = Expr::parse(text)?;
        Ok(Self {
            text: text.to_string(),
            f: Arc::new(move |x| e.eval(x)),
        })
    }

    pub fn constant(v: f64) -> Self {
        Self {
            text: format!("{v}"),
            f: Arc::new(move |_| v),
        }
    }

    pub fn from_fn(text: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            text: text.to_string(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for NamedProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.text)
    }
}

#[derive(Debug, Clone)]
pub struct PdeSpec {
    pub kind: PdeKind,
    /// Coefficient of the transport term.
    pub a: NamedProfile,
    /// Diffusion coefficient.
    pub c: f64,
    /// Dispersion coefficient (KdV only).
    pub b: Option<NamedProfile>,
    pub initial: NamedProfile,
    pub x0: f64,
    pub length: f64,
    pub t_end: f64,
    pub nx: usize,
    pub nt: usize,
    /// Fixed internal step; chosen automatically when absent.
    pub dt: Option<f64>,
}

impl PdeSpec {
    pub fn advection_diffusion(nx: usize, nt: usize) -> Self {
        Self {
            kind: PdeKind::AdvectionDiffusion,
            a: NamedProfile::from_fn("3*(sin(2*pi*x)+3)", |x| 3.0 * ((2.0 * PI * x).sin() + 3.0)),
            c: 0.2,
            b: None,
            initial: NamedProfile::from_fn("sin(4*pi*x)^2*cos(2*pi*x)+sin(6*pi*x)", |x| {
                (4.0 * PI * x).sin().powi(2) * (2.0 * PI * x).cos() + (6.0 * PI * x).sin()
            }),
            x0: 0.0,
            length: 2.0,
            t_end: 0.05,
            nx,
            nt,
            dt: None,
        }
    }

    pub fn viscous_burgers(nx: usize, nt: usize) -> Self {
        Self {
            kind: PdeKind::ViscousBurgers,
            a: NamedProfile::from_fn("0.8*(sin(2*pi*x)+1)", |x| 0.8 * ((2.0 * PI * x).sin() + 1.0)),
            c: 0.1,
            b: None,
            initial: NamedProfile::from_fn("4*(sin(2*pi*x)^2*2*cos(2*pi*x)+sin(2*pi*x+0.2))", |x| {
                4.0 * ((2.0 * PI * x).sin().powi(2) * 2.0 * (2.0 * PI * x).cos() + (2.0 * PI * x + 0.2).sin())
            }),
            x0: 0.0,
            length: 2.0,
            t_end: 0.15,
            nx,
            nt,
            dt: None,
        }
    }

    pub fn kdv(nx: usize, nt: usize) -> Self {
        Self {
            kind: PdeKind::KdV,
            a: NamedProfile::from_fn("0.5*(2+0.3*cos(pi*x/2))", |x| 0.5 * (2.0 + 0.3 * (PI * x / 2.0).cos())),
            c: 0.0,
            b: Some(NamedProfile::from_fn("0.01*(0.5+0.1*sin(pi*x/2))", |x| {
                0.01 * (0.5 + 0.1 * (PI * x / 2.0).sin())
            })),
            initial: NamedProfile::from_fn("2*(6*sin(pi*x)*cos(pi*x)+2*sin(pi*x)+2)", |x| {
                2.0 * (6.0 * (PI * x).sin() * (PI * x).cos() + 2.0 * (PI * x).sin() + 2.0)
            }),
            x0: -2.0,
            length: 4.0,
            t_end: 0.1,
            nx,
            nt,
            dt: None,
        }
    }

    pub fn inviscid_burgers(nx: usize, nt: usize) -> Self {
        let raw = |x: f64| 0.2 + 1.2 * (2.0 * PI * x).sin() + 0.7 * (6.0 * PI * x).sin() + 0.35 * (12.0 * PI * x).sin();
        // All sine modes have zero mean over [0, 2), leaving the constant.
        let mean = 0.2;
        Self {
            kind: PdeKind::InviscidBurgers,
            a: NamedProfile::from_fn("exp(sin(pi*x))", |x| (PI * x).sin().exp()),
            c: 0.0,
            b: None,
            initial: NamedProfile::from_fn(
                "1.2*sin(2*pi*x)+0.7*sin(6*pi*x)+0.35*sin(12*pi*x)",
                move |x| raw(x) - mean,
            ),
            x0: 0.0,
            length: 2.0,
            t_end: 0.1,
            nx,
            nt,
            dt: None,
        }
    }

    pub fn for_kind(kind: PdeKind, nx: usize, nt: usize) -> Self {
        match kind {
            PdeKind::AdvectionDiffusion => Self::advection_diffusion(nx, nt),
            PdeKind::ViscousBurgers => Self::viscous_burgers(nx, nt),
            PdeKind::KdV => Self::kdv(nx, nt),
            PdeKind::InviscidBurgers => Self::inviscid_burgers(nx, nt),
        }
    }

    /// True terms as `(label, coefficient expression)` in the default
    /// dictionary. `a u u_x` is written as `(a / 2) (u^2)_x`.
    pub fn truth_terms(&self) -> Vec<(String, String)> {
        let a = self.a.text.clone();
        let half = format!("0.5*({a})");
        match self.kind {
            PdeKind::AdvectionDiffusion => vec![("u_x".into(), a), ("u_xx".into(), format!("{}", self.c))],
            PdeKind::ViscousBurgers => vec![("u^2_x".into(), half), ("u_xx".into(), format!("{}", self.c))],
            PdeKind::KdV => vec![
                ("u^2_x".into(), half),
                (
                    "u_xxx".into(),
                    self.b.as_ref().map(|b| b.text.clone()).unwrap_or_else(|| "0".into()),
                ),
            ],
            PdeKind::InviscidBurgers => vec![("u^2_x".into(), half)],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.nx < GridField::MIN_POINTS || self.nt < GridField::MIN_POINTS {
            return Err(Error::Config("grid needs at least 8 points per axis".into()));
        }
        if !(self.length > 0.0 && self.t_end > 0.0) {
            return Err(Error::Config("domain length and duration must be positive".into()));
        }
        if self.c < 0.0 {
            return Err(Error::Config("diffusion coefficient must be non-negative".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("invalid time step {dt}")));
            }
        }
        Ok(())
    }
}

struct Solver {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Angular wavenumbers.
    k: Vec<f64>,
    /// Retained by the 2/3 rule.
    keep: Vec<bool>,
    filter: Vec<f64>,
    linear: Vec<f64>,
    imag_linear: Vec<f64>,
    a: Vec<f64>,
    b_rest: Option<Vec<f64>>,
    nonlinear: bool,
}

impl Solver {
    fn new(spec: &PdeSpec, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let dx = spec.length / n as f64;
        let xs: Vec<f64> = (0..n).map(|j| spec.x0 + j as f64 * dx).collect();
        let k: Vec<f64> = (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                2.0 * PI * m / spec.length
            })
            .collect();
        let cutoff = n as f64 / 3.0;
        let keep: Vec<bool> = (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j } else { n - j };
                (m as f64) < cutoff && !(n % 2 == 0 && j == n / 2)
            })
            .collect();
        let kmax = PI * n as f64 / spec.length;
        let filter: Vec<f64> = k
            .iter()
            .map(|&kk| {
                if spec.kind == PdeKind::InviscidBurgers {
                    (-36.0 * (kk.abs() / kmax).powi(36)).exp()
                } else {
                    1.0
                }
            })
            .collect();
        let (b_mean, b_rest) = match &spec.b {
            Some(b) => {
                let vals: Vec<f64> = xs.iter().map(|&x| b.eval(x)).collect();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let rest: Vec<f64> = vals.iter().map(|v| v - mean).collect();
                let any = rest.iter().any(|v| v.abs() > 0.0);
                (mean, if any { Some(rest) } else { None })
            }
            None => (0.0, None),
        };
        // L = c (ik)^2 + b_mean (ik)^3 = -c k^2 - i b_mean k^3
        let linear = k.iter().map(|&kk| -spec.c * kk * kk).collect();
        let imag_linear = k.iter().map(|&kk| -b_mean * kk * kk * kk).collect();
        Self {
            n,
            fwd,
            inv,
            k,
            keep,
            filter,
            linear,
            imag_linear,
            a: xs.iter().map(|&x| spec.a.eval(x)).collect(),
            b_rest,
            nonlinear: spec.kind.nonlinear(),
        }
    }

    fn to_physical(&self, hat: &[Complex<f64>]) -> Vec<f64> {
        let mut buf = hat.to_vec();
        self.inv.process(&mut buf);
        buf.iter().map(|z| z.re / self.n as f64).collect()
    }

    fn to_spectral(&self, u: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = u.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    fn derivative(&self, hat: &[Complex<f64>], order: u32) -> Vec<f64> {
        let d: Vec<Complex<f64>> = hat
            .iter()
            .zip(&self.k)
            .map(|(z, &kk)| z * Complex::new(0.0, kk).powu(order))
            .collect();
        self.to_physical(&d)
    }

    /// Explicit part of the right-hand side, in spectral space.
    fn explicit(&self, hat: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let ux = self.derivative(hat, 1);
        let mut rhs: Vec<f64> = if self.nonlinear {
            let u = self.to_physical(hat);
            (0..self.n).map(|j| self.a[j] * u[j] * ux[j]).collect()
        } else {
            (0..self.n).map(|j| self.a[j] * ux[j]).collect()
        };
        if let Some(rest) = &self.b_rest {
            let uxxx = self.derivative(hat, 3);
            for j in 0..self.n {
                rhs[j] += rest[j] * uxxx[j];
            }
        }
        let mut out = self.to_spectral(&rhs);
        for (z, &keep) in out.iter_mut().zip(&self.keep) {
            if !keep {
                *z = Complex::new(0.0, 0.0);
            }
        }
        out
    }

    fn integrating_factor(&self, dt: f64) -> Vec<Complex<f64>> {
        self.linear
            .iter()
            .zip(&self.imag_linear)
            .map(|(&re, &im)| Complex::new(re * dt, im * dt).exp())
            .collect()
    }

    /// Explicit stability estimate from the current state.
    fn max_step(&self, u: &[f64]) -> f64 {
        let kmax = self.k.iter().zip(&self.keep).filter(|(_, k)| **k).map(|(k, _)| k.abs()).fold(0.0, f64::max);
        let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let amax = self.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let transport = if self.nonlinear { amax * umax } else { amax };
        let disp = self
            .b_rest
            .as_ref()
            .map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs())) * kmax.powi(3))
            .unwrap_or(0.0);
        let lambda = transport * kmax + disp;
        if lambda > 0.0 {
            SAFETY * 2.8 / lambda
        } else {
            f64::INFINITY
        }
    }

    fn step(&self, v: &mut Vec<Complex<f64>>, dt: f64, e_half: &[Complex<f64>]) {
        let h = Complex::new(dt, 0.0);
        let half = Complex::new(0.5 * dt, 0.0);
        let k1 = self.explicit(v);
        let s2: Vec<Complex<f64>> = (0..self.n).map(|j| e_half[j] * (v[j] + half * k1[j])).collect();
        let k2 = self.explicit(&s2);
        let s3: Vec<Complex<f64>> = (0..self.n).map(|j| e_half[j] * v[j] + half * k2[j]).collect();
        let k3 = self.explicit(&s3);
        let s4: Vec<Complex<f64>> = (0..self.n)
            .map(|j| e_half[j] * e_half[j] * v[j] + h * e_half[j] * k3[j])
            .collect();
        let k4 = self.explicit(&s4);
        let sixth = Complex::new(dt / 6.0, 0.0);
        for j in 0..self.n {
            let e1 = e_half[j] * e_half[j];
            v[j] = e1 * v[j]
                + sixth * (e1 * k1[j] + Complex::new(2.0, 0.0) * e_half[j] * (k2[j] + k3[j]) + k4[j]);
            v[j] *= self.filter[j];
        }
    }
}

/// Integrates `spec` and samples the clean solution on an `nx x nt` grid
/// covering `[x0, x0 + length) x [0, t_end]`.
pub fn simulate(spec: &PdeSpec) -> Result<GridField> {
    spec.validate()?;
    let mut factor = 1;
    while spec.nx * factor < MIN_SOLVER_POINTS {
        factor *= 2;
    }
    let n = spec.nx * factor;
    let solver = Solver::new(spec, n);
    let dx = spec.length / n as f64;
    let u0: Vec<f64> = (0..n).map(|j| spec.initial.eval(spec.x0 + j as f64 * dx)).collect();
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("initial condition is not finite on the grid".into()));
    }
    let scale0 = u0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let limit = BLOWUP_FACTOR * scale0.max(1.0);
    let mut v = solver.to_spectral(&u0);

    let dt_out = spec.t_end / (spec.nt - 1) as f64;
    if let Some(dt) = spec.dt {
        let stable = solver.max_step(&u0) / SAFETY;
        if dt.min(dt_out) > stable {
            return Err(Error::Simulation(format!(
                "time step {dt:e} exceeds the explicit stability limit {stable:e}; try a smaller --dt"
            )));
        }
    }
    let mut values = Vec::with_capacity(spec.nx * spec.nt);
    let sample = |u: &[f64], out: &mut Vec<f64>| {
        out.extend((0..spec.nx).map(|i| u[i * factor]));
    };
    sample(&u0, &mut values);
    let mut u = u0;
    let mut cached: Option<(f64, Vec<Complex<f64>>)> = None;
    for _ in 1..spec.nt {
        let target = match spec.dt {
            Some(dt) => dt,
            None => solver.max_step(&u),
        };
        let ratio = dt_out / target;
        let nearest = ratio.round();
        let substeps = if (ratio - nearest).abs() < 1e-9 * ratio.max(1.0) {
            nearest.max(1.0) as usize
        } else {
            ratio.ceil().max(1.0) as usize
        };
        let h = dt_out / substeps as f64;
        let e_half = match &cached {
            Some((hh, e)) if *hh == h => e.clone(),
            _ => {
                let e = solver.integrating_factor(0.5 * h);
                cached = Some((h, e.clone()));
                e
            }
        };
        for _ in 0..substeps {
            solver.step(&mut v, h, &e_half);
        }
        u = solver.to_physical(&v);
        let umax = u.iter().fold(0.0f64, |m, x| if x.is_finite() { m.max(x.abs()) } else { f64::INFINITY });
        if !(umax <= limit) {
            return Err(Error::Simulation(format!(
                "solution grew beyond {BLOWUP_FACTOR:e} times its initial size; try a smaller --dt"
            )));
        }
        sample(&u, &mut values);
    }
    let dx_out = spec.length / spec.nx as f64;
    GridField::new(
        1,
        spec.nx,
        spec.nt,
        (spec.x0, spec.x0 + spec.length - dx_out),
        (0.0, spec.t_end),
        true,
        values,
    )
}
