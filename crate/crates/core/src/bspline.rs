//! Uniform-knot B-spline bases.
//!
//! Degree convention: a basis of degree `d` has order `p = d + 1`; each
//! function is a translate of the cardinal B-spline supported on `p`
//! consecutive knot intervals, `[z_m, z_m + p h)`. Supports are half-open so
//! that a periodic family sums to exactly one at every point.
//!
//! Two boundary variants exist. `Periodic` wraps the evaluation coordinate
//! into one period, so functions whose support crosses the right end of the
//! domain reappear on the left. `DirichletInterior` keeps every support
//! inside a closed interval, so all exported functions vanish (with their
//! first `d - 1` derivatives) at both endpoints.

use crate::error::{Error, Result};

/// Largest supported order `p = d + 1`.
pub const MAX_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Periodic { period: f64 },
    DirichletInterior { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    degree: usize,
    h: f64,
    origin: f64,
    count: usize,
    boundary: Boundary,
}

impl SplineBasis {
    fn check_degree(degree: usize) -> Result<()> {
        if degree + 1 > MAX_ORDER {
            return Err(Error::Config(format!(
                "spline degree {degree} exceeds the supported maximum {}",
                MAX_ORDER - 1
            )));
        }
        Ok(())
    }

    /// `count` periodic functions tiling `[x0, x0 + period)` with spacing
    /// `period / count`. Function `m` starts at knot `x0 + m h`.
    pub fn periodic(x0: f64, period: f64, degree: usize, count: usize) -> Result<Self> {
        Self::check_degree(degree)?;
        if count == 0 || !(period > 0.0) || !period.is_finite() {
            return Err(Error::Config(format!(
                "periodic basis needs count >= 1 and a positive period (got {count}, {period})"
            )));
        }
        Ok(Self {
            degree,
            h: period / count as f64,
            origin: x0,
            count,
            boundary: Boundary::Periodic { period },
        })
    }

    /// As many translates with spacing `h` as fit inside `[lo, hi]`, centred
    /// in the interval.
    pub fn dirichlet_interior(lo: f64, hi: f64, degree: usize, h: f64) -> Result<Self> {
        Self::check_degree(degree)?;
        let p = (degree + 1) as f64;
        let width = p * h;
        if !(h > 0.0) || !(lo < hi) || width > (hi - lo) * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "support {width} does not fit in [{lo}, {hi}]"
            )));
        }
        // Small tolerance so that an exact fit is not lost to rounding.
        let count = (((hi - lo - width) / h) * (1.0 + 1e-12)).floor() as usize + 1;
        let used = width + (count - 1) as f64 * h;
        let origin = lo + 0.5 * (hi - lo - used).max(0.0);
        Ok(Self {
            degree,
            h,
            origin,
            count,
            boundary: Boundary::DirichletInterior { lo, hi },
        })
    }

    /// A single function centred at the origin, support `[-p h / 2, p h / 2]`.
    pub fn centered(degree: usize, h: f64) -> Result<Self> {
        let half = 0.5 * (degree + 1) as f64 * h;
        Self::dirichlet_interior(-half, half, degree, h)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn order(&self) -> usize {
        self.degree + 1
    }
    pub fn knot_spacing(&self) -> f64 {
        self.h
    }
    pub fn count(&self) -> usize {
        self.count
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Left knot of function `m`.
    pub fn start(&self, m: usize) -> f64 {
        self.origin + m as f64 * self.h
    }

    /// Unwrapped support `[z_m, z_m + p h)`.
    pub fn support(&self, m: usize) -> (f64, f64) {
        let a = self.start(m);
        (a, a + self.order() as f64 * self.h)
    }

    pub fn support_width(&self) -> f64 {
        self.order() as f64 * self.h
    }

    /// Value of the `deriv`-th derivative of function `m` at `x`.
    pub fn eval(&self, m: usize, deriv: usize, x: f64) -> Result<f64> {
        if deriv > self.degree {
            return Err(Error::Domain(format!(
                "derivative order {deriv} exceeds spline degree {}",
                self.degree
            )));
        }
        if m >= self.count {
            return Err(Error::Domain(format!(
                "basis index {m} out of range (count {})",
                self.count
            )));
        }
        Ok(self.eval_unchecked(m, deriv, x))
    }

    pub(crate) fn eval_unchecked(&self, m: usize, deriv: usize, x: f64) -> f64 {
        let p = self.order();
        let scale = self.h.powi(deriv as i32);
        match self.boundary {
            Boundary::Periodic { period } => {
                let offset = (x - self.start(m)).rem_euclid(period);
                // Supports longer than one period overlap themselves.
                let mut s = offset / self.h;
                let step = period / self.h;
                let mut acc = 0.0;
                while s < p as f64 {
                    acc += cardinal(p, deriv, s);
                    s += step;
                }
                acc / scale
            }
            Boundary::DirichletInterior { .. } => {
                cardinal(p, deriv, (x - self.start(m)) / self.h) / scale
            }
        }
    }

    /// Normalised moments of function `m` computed by Gauss-Legendre
    /// quadrature on every knot interval of its (unwrapped) support.
    pub fn moments(&self, m: usize) -> Result<Moments> {
        if m >= self.count {
            return Err(Error::Domain(format!("basis index {m} out of range")));
        }
        let p = self.order();
        let (nodes, weights) = gauss_legendre(MAX_ORDER);
        let a = self.start(m);
        let mut raw = [0.0; 4];
        for j in 0..p {
            let lo = a + j as f64 * self.h;
            let half = 0.5 * self.h;
            for (t, w) in nodes.iter().zip(&weights) {
                let x = lo + half * (t + 1.0);
                let b = cardinal(p, 0, (x - a) / self.h) * w * half;
                raw[0] += b;
                raw[1] += b * x;
                raw[2] += b * x * x;
                raw[3] += b * x * x * x;
            }
        }
        // Exact mass of a uniform B-spline: (z_{m+p} - z_m) / p = h.
        let mass = self.h;
        Ok(Moments {
            m0: raw[0] / mass,
            m1: raw[1] / mass,
            m2: raw[2] / mass,
            m3: raw[3] / mass,
        })
    }
}

/// Raw moments of a B-spline normalised to unit mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

impl SplineBasis {
    /// L2-orthogonal projection of `f` onto a periodic basis, returned as
    /// basis coefficients. Integrals use Gauss-Legendre on every knot
    /// interval of one period.
    pub fn l2_project(&self, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let Boundary::Periodic { .. } = self.boundary else {
            return Err(Error::Config("L2 projection needs a periodic basis".into()));
        };
        let n = self.count;
        let (nodes, weights) = gauss_legendre(MAX_ORDER);
        let mut gram = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut rhs = nalgebra::DVector::<f64>::zeros(n);
        let half = 0.5 * self.h;
        let mut vals = vec![0.0; n];
        for j in 0..n {
            let lo = self.origin + j as f64 * self.h;
            for (t, w) in nodes.iter().zip(&weights) {
                let x = lo + half * (t + 1.0);
                let wq = w * half;
                for (m, v) in vals.iter_mut().enumerate() {
                    *v = self.eval_unchecked(m, 0, x);
                }
                let fx = f(x);
                for a in 0..n {
                    if vals[a] == 0.0 {
                        continue;
                    }
                    rhs[a] += wq * vals[a] * fx;
                    for b in 0..n {
                        gram[(a, b)] += wq * vals[a] * vals[b];
                    }
                }
            }
        }
        let sol = gram
            .cholesky()
            .ok_or_else(|| Error::Domain("singular Gram matrix".into()))?
            .solve(&rhs);
        Ok(sol.iter().copied().collect())
    }

    /// `sum_m c_m psi_m(x)` at every point.
    pub fn combine(&self, coeffs: &[f64], xs: &[f64]) -> Vec<f64> {
        xs.iter()
            .map(|&x| {
                coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(m, c)| c * self.eval_unchecked(m, 0, x))
                    .sum()
            })
            .collect()
    }
}

/// Periodic coefficient basis with `count` functions on `[x0, x0 + period)`.
pub fn make_coefficient_basis(x0: f64, period: f64, count: usize, degree: usize) -> Result<SplineBasis> {
    if count < degree + 1 {
        return Err(Error::Config(format!(
            "coefficient basis needs at least degree + 1 = {} functions, got {count}",
            degree + 1
        )));
    }
    SplineBasis::periodic(x0, period, degree, count)
}

/// Fourier transform of the unit-mass centred B-spline of order `p` and
/// knot spacing `h`: `(sin(h w / 2) / (h w / 2))^p`.
pub fn fourier_magnitude(p: usize, h: f64, omega: f64) -> f64 {
    let z = 0.5 * h * omega;
    let sinc = if z.abs() < 1e-8 { 1.0 - z * z / 6.0 } else { z.sin() / z };
    sinc.powi(p as i32)
}

/// Transform of the Gaussian whose variance `p h^2 / 12` matches the
/// B-spline's.
pub fn gaussian_fourier(p: usize, h: f64, omega: f64) -> f64 {
    (-(p as f64) * h * h * omega * omega / 24.0).exp()
}

/// Standard deviation of the moment-matched Gaussian, `sqrt(p) h / (2 sqrt 3)`.
pub fn matched_gaussian_sigma(p: usize, h: f64) -> f64 {
    (p as f64).sqrt() * h / (2.0 * 3f64.sqrt())
}

/// Uniform bound on `|gaussian_fourier - fourier_magnitude|` for
/// `|w| <= (2 / h) sqrt(12 ln p / p)`, together with that frequency limit.
pub fn gaussian_fourier_bound(p: usize, h: f64) -> (f64, f64) {
    let pf = p as f64;
    let lnp = pf.ln();
    let bound = 4.0 / (5.0 * std::f64::consts::E.powi(2) * pf) * (1.0 + 17.0 * lnp / (7.0 * pf));
    let limit = 2.0 / h * (12.0 * lnp / pf).sqrt();
    (bound, limit)
}

/// `r`-th derivative of the cardinal B-spline of order `p` (integer knots
/// `0..=p`) at `s`, via the local de Boor triangle on the containing
/// interval.
pub fn cardinal(p: usize, r: usize, s: f64) -> f64 {
    debug_assert!(p >= 1 && p <= MAX_ORDER && r < p);
    if !(s >= 0.0) || s >= p as f64 {
        return 0.0;
    }
    let j = s.floor();
    let f = s - j;
    let j = j as usize;
    let q = p - r;
    // tri[o] holds N_k(s - (j - o)) for offsets o = 0..k at the current level.
    let mut tri = [0.0f64; MAX_ORDER];
    tri[0] = 1.0;
    for k in 2..=q {
        let inv = 1.0 / (k - 1) as f64;
        for o in (0..k).rev() {
            let left = if o + 1 < k { (f + o as f64) * tri[o] } else { 0.0 };
            let right = if o >= 1 { (k as f64 - f - o as f64) * tri[o - 1] } else { 0.0 };
            tri[o] = (left + right) * inv;
        }
    }
    // N_p^{(r)}(s) = sum_i (-1)^i C(r, i) N_q(s - i)
    let mut acc = 0.0;
    let mut binom = 1.0;
    for i in 0..=r {
        if i <= j && j - i < q {
            let v = tri[j - i];
            acc += if i % 2 == 0 { binom * v } else { -binom * v };
        }
        binom = binom * (r - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}
