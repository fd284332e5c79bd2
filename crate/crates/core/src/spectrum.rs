//! Noise cutoff estimation and test-function sizing.
//!
//! The critical frequency of an axis is the breakpoint of a continuous
//! two-piece linear fit to the cumulative sum of the averaged DFT magnitude.
//! Below it the spectrum is signal dominated; above it the cumulative sum
//! grows at the constant rate of the noise floor.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bspline::SplineBasis;
use crate::error::{Error, Result};
use crate::grid::GridField;

/// Shortest axis on which a cutoff is estimated.
pub const MIN_AXIS_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Space,
    Time,
}

/// Test-function sizes and counts along both axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionPlan {
    /// Half-support widths from the cutoff formula (after clamping).
    pub alpha_x: f64,
    pub alpha_t: f64,
    pub k_x_star: usize,
    pub k_t_star: usize,
    pub tau_x: f64,
    pub tau_t: f64,
    /// Spline order of the test functions.
    pub p: usize,
    pub j_x: usize,
    pub j_t: usize,
    /// Realised knot spacings. In space the spacing is stretched to
    /// `length / j_x` so the translates tile the period exactly.
    pub h_x: f64,
    pub h_t: f64,
}

impl TestFunctionPlan {
    /// Total number of test functions.
    pub fn s(&self) -> usize {
        self.j_x * self.j_t
    }

    pub fn space_basis(&self, field: &GridField) -> Result<SplineBasis> {
        SplineBasis::periodic(field.x0(), field.spatial_length(), self.p - 1, self.j_x)
    }

    pub fn time_basis(&self, field: &GridField) -> Result<SplineBasis> {
        SplineBasis::dirichlet_interior(field.t0(), field.t1(), self.p - 1, self.h_t)
    }

    /// Builds a plan from known cutoffs instead of estimating them.
    pub fn from_cutoffs(
        field: &GridField,
        p: usize,
        tau_x: f64,
        tau_t: f64,
        k_x_star: usize,
        k_t_star: usize,
    ) -> Result<Self> {
        check_plan_args(p, tau_x, tau_t)?;
        let length = field.spatial_length();
        let duration = field.duration();
        let alpha_x = support_half_width(p, field.nx(), field.dx(), tau_x, k_x_star)?.min(0.5 * length);
        let alpha_t = support_half_width(p, field.nt(), field.dt(), tau_t, k_t_star)?.min(0.5 * duration);
        let j_x = periodic_count(length, p, alpha_x);
        let h_t = 2.0 * alpha_t / p as f64;
        let j_t = SplineBasis::dirichlet_interior(field.t0(), field.t1(), p - 1, h_t)?.count();
        Ok(Self {
            alpha_x,
            alpha_t,
            k_x_star,
            k_t_star,
            tau_x,
            tau_t,
            p,
            j_x,
            j_t,
            h_x: length / j_x as f64,
            h_t,
        })
    }
}

fn check_plan_args(p: usize, tau_x: f64, tau_t: f64) -> Result<()> {
    if p < 2 {
        return Err(Error::Config(format!("test-function order must be >= 2, got {p}")));
    }
    if !(tau_x > 0.0 && tau_t > 0.0) {
        return Err(Error::Config(format!(
            "tau_x and tau_t must be positive (got {tau_x}, {tau_t})"
        )));
    }
    Ok(())
}

/// Half-support width that places cutoff bin `k_star` `tau` standard
/// deviations into the spectral tail of the moment-matched Gaussian:
/// `sqrt(3 p) (n - 1) step tau / (2 pi k_star)`.
pub fn support_half_width(p: usize, n_points: usize, step: f64, tau: f64, k_star: usize) -> Result<f64> {
    if k_star == 0 {
        return Err(Error::Domain("critical frequency must be at least 1".into()));
    }
    Ok((3.0 * p as f64).sqrt() * (n_points - 1) as f64 * step * tau / (2.0 * PI * k_star as f64))
}

/// Number of translates covering a periodic axis: `ceil(length p / (2 alpha))`.
pub fn periodic_count(length: f64, p: usize, alpha: f64) -> usize {
    // Guard against 27.999999 -> 28 turning into 29 through rounding noise.
    let raw = length * p as f64 / (2.0 * alpha);
    let r = raw.round();
    if (raw - r).abs() < 1e-9 * raw.max(1.0) {
        (r as usize).max(1)
    } else {
        (raw.ceil() as usize).max(1)
    }
}

/// Average DFT magnitude along `axis` for bins `0..=n/2`, averaged over the
/// orthogonal axis and the given channels.
pub fn mean_spectrum(field: &GridField, axis: Axis, channels: &[usize]) -> Result<Vec<f64>> {
    let (len, lines) = match axis {
        Axis::Space => (field.nx(), field.nt()),
        Axis::Time => (field.nt(), field.nx()),
    };
    if len < MIN_AXIS_LEN {
        return Err(Error::Domain(format!(
            "axis has {len} samples, need at least {MIN_AXIS_LEN}"
        )));
    }
    if channels.is_empty() || channels.iter().any(|&c| c >= field.n_channels()) {
        return Err(Error::Domain("invalid channel selection".into()));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let bins = len / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for &c in channels {
        for line in 0..lines {
            for (k, slot) in buf.iter_mut().enumerate() {
                let v = match axis {
                    Axis::Space => field.get(c, line, k),
                    Axis::Time => field.get(c, k, line),
                };
                *slot = Complex::new(v, 0.0);
            }
            fft.process(&mut buf);
            for (a, z) in acc.iter_mut().zip(&buf) {
                *a += z.norm();
            }
        }
    }
    let denom = (lines * channels.len()) as f64;
    acc.iter_mut().for_each(|a| *a /= denom);
    Ok(acc)
}

/// Result of a hinge fit at one breakpoint.
#[derive(Debug, Clone, Copy)]
pub struct HingeFit {
    pub breakpoint: usize,
    pub sse: f64,
}

/// Sum of squared errors of the least-squares continuous hinge
/// `a + b min(k, bp) + c max(k - bp, 0)` fitted to `y[k]`.
pub fn hinge_sse(y: &[f64], bp: usize) -> f64 {
    let n = y.len();
    let scale_x = n as f64;
    let scale_y = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    let row = |k: usize| -> [f64; 3] {
        let k = k as f64;
        let b = bp as f64;
        [1.0, k.min(b) / scale_x, (k - b).max(0.0) / scale_x]
    };
    for (k, &yk) in y.iter().enumerate() {
        let r = row(k);
        let yk = yk / scale_y;
        for i in 0..3 {
            aty[i] += r[i] * yk;
            for j in 0..3 {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    let coef = solve3(ata, aty);
    let sse: f64 = y
        .iter()
        .enumerate()
        .map(|(k, &yk)| {
            let r = row(k);
            let fit = r[0] * coef[0] + r[1] * coef[1] + r[2] * coef[2];
            (yk / scale_y - fit).powi(2)
        })
        .sum();
    sse * scale_y * scale_y
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        a.swap(col, piv);
        b.swap(col, piv);
        if a[col][col].abs() < 1e-300 {
            continue;
        }
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|j| a[i][j] * x[j]).sum();
        x[i] = if a[i][i].abs() < 1e-300 { 0.0 } else { (b[i] - s) / a[i][i] };
    }
    x
}

/// Exhaustive search over interior breakpoints `1..=n-2`; ties go to the
/// smallest breakpoint.
pub fn changepoint(y: &[f64]) -> Result<HingeFit> {
    if y.len() < 3 {
        return Err(Error::Domain("need at least three points for a hinge fit".into()));
    }
    let mut best = HingeFit {
        breakpoint: 1,
        sse: f64::INFINITY,
    };
    for bp in 1..y.len() - 1 {
        let sse = hinge_sse(y, bp);
        if sse < best.sse {
            best = HingeFit { breakpoint: bp, sse };
        }
    }
    Ok(best)
}

fn cumulative(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Critical frequency (DFT bin) along `axis` for one channel.
pub fn critical_frequency(field: &GridField, axis: Axis, channel: usize) -> Result<usize> {
    critical_frequency_of(field, axis, &[channel])
}

/// Critical frequency with the spectrum averaged over several channels.
pub fn critical_frequency_of(field: &GridField, axis: Axis, channels: &[usize]) -> Result<usize> {
    let mut spec = mean_spectrum(field, axis, channels)?;
    // Accumulate from the Nyquist bin down to zero: the noise floor forms
    // the long straight run and the corner is where the signal takes over.
    spec.reverse();
    let top = spec.len() - 1;
    let bp = changepoint(&cumulative(&spec))?.breakpoint;
    Ok((top - bp).max(1))
}

/// Estimates both cutoffs (averaging all channels) and sizes the test
/// functions from them.
pub fn plan_test_functions(field: &GridField, p: usize, tau_x: f64, tau_t: f64) -> Result<TestFunctionPlan> {
    check_plan_args(p, tau_x, tau_t)?;
    let channels: Vec<usize> = (0..field.n_channels()).collect();
    let k_x = critical_frequency_of(field, Axis::Space, &channels)?;
    let k_t = critical_frequency_of(field, Axis::Time, &channels)?;
    TestFunctionPlan::from_cutoffs(field, p, tau_x, tau_t, k_x, k_t)
}
