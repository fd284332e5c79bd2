//! Sampled space-time data, noise injection and the text grid format.
//!
//! Values are stored channel-major, then time-major, then space:
//! `values[(c * nt + n) * nx + i]` is channel `c` at time index `n` and
//! space index `i`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &str = "wgident-grid";
const VERSION: u32 = 1;

/// A real multi-channel field sampled on a uniform space-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    n_channels: usize,
    nx: usize,
    nt: usize,
    x0: f64,
    x1: f64,
    t0: f64,
    t1: f64,
    periodic: bool,
    values: Vec<f64>,
}

impl GridField {
    pub const MIN_POINTS: usize = 8;

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_channels: usize,
        nx: usize,
        nt: usize,
        (x0, x1): (f64, f64),
        (t0, t1): (f64, f64),
        periodic: bool,
        values: Vec<f64>,
    ) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::Domain("a grid needs at least one channel".into()));
        }
        if nx < Self::MIN_POINTS || nt < Self::MIN_POINTS {
            return Err(Error::Domain(format!(
                "grid {nx}x{nt} is too small (need at least {} points per axis)",
                Self::MIN_POINTS
            )));
        }
        if !(x0.is_finite() && x1.is_finite() && x0 < x1) {
            return Err(Error::Domain(format!("invalid spatial domain [{x0}, {x1}]")));
        }
        if !(t0.is_finite() && t1.is_finite() && 0.0 <= t0 && t0 < t1) {
            return Err(Error::Domain(format!("invalid temporal domain [{t0}, {t1}]")));
        }
        let expected = n_channels * nt * nx;
        if values.len() != expected {
            return Err(Error::Domain(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at flat index {pos}")));
        }
        Ok(Self {
            n_channels,
            nx,
            nt,
            x0,
            x1,
            t0,
            t1,
            periodic,
            values,
        })
    }

    /// Builds a periodic field on `[x0, x0 + period)` x `[t0, t1]` by
    /// sampling `f(channel, x, t)`.
    pub fn from_fn(
        n_channels: usize,
        nx: usize,
        nt: usize,
        x0: f64,
        period: f64,
        (t0, t1): (f64, f64),
        f: impl Fn(usize, f64, f64) -> f64,
    ) -> Result<Self> {
        let dx = period / nx as f64;
        let dt = (t1 - t0) / (nt - 1).max(1) as f64;
        let mut values = Vec::with_capacity(n_channels * nt * nx);
        for c in 0..n_channels {
            for n in 0..nt {
                let t = t0 + n as f64 * dt;
                for i in 0..nx {
                    values.push(f(c, x0 + i as f64 * dx, t));
                }
            }
        }
        Self::new(
            n_channels,
            nx,
            nt,
            (x0, x0 + (nx - 1) as f64 * dx),
            (t0, t1),
            true,
            values,
        )
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn t1(&self) -> f64 {
        self.t1
    }
    pub fn is_periodic(&self) -> bool {
        self.periodic
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dx(&self) -> f64 {
        (self.x1 - self.x0) / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / (self.nt - 1) as f64
    }

    /// Length of the spatial domain. For half-open periodic grids the last
    /// sample sits one `dx` before the wrap point.
    pub fn spatial_length(&self) -> f64 {
        if self.periodic {
            self.x1 - self.x0 + self.dx()
        } else {
            self.x1 - self.x0
        }
    }

    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx()
    }

    pub fn t(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt()
    }

    pub fn x_grid(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn get(&self, channel: usize, n: usize, i: usize) -> f64 {
        self.values[(channel * self.nt + n) * self.nx + i]
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let len = self.nt * self.nx;
        &self.values[channel * len..(channel + 1) * len]
    }

    /// Spatial profile of `channel` at time index `n`.
    pub fn row(&self, channel: usize, n: usize) -> &[f64] {
        let start = (channel * self.nt + n) * self.nx;
        &self.values[start..start + self.nx]
    }

    /// Same geometry, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.n_channels,
            self.nx,
            self.nt,
            (self.x0, self.x1),
            (self.t0, self.t1),
            self.periodic,
            values,
        )
    }

    /// Multiplies every sample by `gamma`.
    pub fn scaled(&self, gamma: f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|v| v * gamma).collect())
    }
}

/// How the noise standard deviation is derived from the NSR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaMode {
    /// `nsr * mean(|U - mid|^2)`, no square root.
    #[default]
    Paper,
    /// `nsr * sqrt(mean(|U - mid|^2))`.
    Rms,
}

impl std::str::FromStr for SigmaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "rms" => Ok(Self::Rms),
            other => Err(Error::Config(format!(
                "unknown noise_sigma_mode '{other}' (expected paper or rms)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub nsr: f64,
    pub seed: u64,
    pub mode: SigmaMode,
}

impl NoiseSpec {
    pub fn new(nsr: f64, seed: u64) -> Self {
        Self {
            nsr,
            seed,
            mode: SigmaMode::Paper,
        }
    }
}

fn check_nsr(nsr: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&nsr) {
        return Err(Error::Config(format!("nsr {nsr} outside [0, 1]")));
    }
    Ok(())
}

/// Noise standard deviation for one channel.
///
/// Extrema are taken over the field as given (the clean data).
pub fn compute_noise_sigma(
    field: &GridField,
    channel: usize,
    nsr: f64,
    mode: SigmaMode,
) -> Result<f64> {
    check_nsr(nsr)?;
    if channel >= field.n_channels() {
        return Err(Error::Domain(format!("channel {channel} out of range")));
    }
    let data = field.channel(channel);
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("field contains non-finite values".into()));
    }
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mid = 0.5 * (hi + lo);
    let mean_sq = data.iter().map(|v| (v - mid) * (v - mid)).sum::<f64>() / data.len() as f64;
    Ok(match mode {
        SigmaMode::Paper => nsr * mean_sq,
        SigmaMode::Rms => nsr * mean_sq.sqrt(),
    })
}

/// Adds i.i.d. zero-mean Gaussian noise to each channel. The input is left
/// untouched; `nsr = 0` returns an exact copy.
pub fn add_noise(field: &GridField, spec: &NoiseSpec) -> Result<GridField> {
    check_nsr(spec.nsr)?;
    if spec.nsr == 0.0 {
        return Ok(field.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = field.values().to_vec();
    let len = field.nt() * field.nx();
    for c in 0..field.n_channels() {
        let sigma = compute_noise_sigma(field, c, spec.nsr, spec.mode)?;
        for v in &mut values[c * len..(c + 1) * len] {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * z;
        }
    }
    field.with_values(values)
}

/// Serializes a field in the text grid format.
pub fn format_grid(field: &GridField) -> String {
    let mut out = String::with_capacity(field.values().len() * 25 + 128);
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "fields {}", field.n_channels());
    let _ = writeln!(out, "nx {} nt {}", field.nx(), field.nt());
    let _ = writeln!(
        out,
        "x0 {:.16e} x1 {:.16e} t0 {:.16e} t1 {:.16e}",
        field.x0(),
        field.x1(),
        field.t0(),
        field.t1()
    );
    let _ = writeln!(out, "periodic {}", u8::from(field.is_periodic()));
    for c in 0..field.n_channels() {
        for n in 0..field.nt() {
            let row = field.row(c, n);
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v:.16e}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_grid(field: &GridField, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_grid(field))?;
    Ok(())
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<GridField> {
    parse_grid(&fs::read_to_string(path)?)
}

struct Tokens<'a> {
    iter: Box<dyn Iterator<Item = (usize, &'a str)> + 'a>,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let iter = text
            .lines()
            .enumerate()
            .flat_map(|(ln, line)| line.split_whitespace().map(move |tok| (ln + 1, tok)));
        Self {
            iter: Box::new(iter),
            last_line: 1,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.iter.next() {
            Some((ln, tok)) => {
                self.last_line = ln;
                Ok((ln, tok))
            }
            None => Err(Error::Parse {
                line: self.last_line,
                msg: format!("unexpected end of file, expected {what}"),
            }),
        }
    }

    fn keyword(&mut self, key: &str) -> Result<()> {
        let (ln, tok) = self.next(key)?;
        if tok != key {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected '{key}', found '{tok}'"),
            });
        }
        Ok(())
    }

    fn value<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let (ln, tok) = self.next(what)?;
        tok.parse().map_err(|_| Error::Parse {
            line: ln,
            msg: format!("invalid {what} '{tok}'"),
        })
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        self.keyword(key)?;
        self.value(key)
    }
}

pub fn parse_grid(text: &str) -> Result<GridField> {
    let mut toks = Tokens::new(text);
    toks.keyword(MAGIC)?;
    let version: u32 = toks.value("format version")?;
    if version != VERSION {
        return Err(Error::Parse {
            line: toks.last_line,
            msg: format!("unsupported format version {version}"),
        });
    }
    let n_channels: usize = toks.keyed("fields")?;
    let nx: usize = toks.keyed("nx")?;
    let nt: usize = toks.keyed("nt")?;
    let x0: f64 = toks.keyed("x0")?;
    let x1: f64 = toks.keyed("x1")?;
    let t0: f64 = toks.keyed("t0")?;
    let t1: f64 = toks.keyed("t1")?;
    let periodic: u8 = toks.keyed("periodic")?;
    let header_line = toks.last_line;
    if periodic > 1 {
        return Err(Error::Parse {
            line: header_line,
            msg: format!("periodic flag must be 0 or 1, got {periodic}"),
        });
    }
    let expected = n_channels * nt * nx;
    let mut values = Vec::with_capacity(expected);
    for (ln, tok) in toks.iter.by_ref() {
        if values.len() == expected {
            return Err(Error::Parse {
                line: ln,
                msg: format!("more than the {expected} values declared in the header"),
            });
        }
        let v: f64 = tok.parse().map_err(|_| Error::Parse {
            line: ln,
            msg: format!("invalid value '{tok}'"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line: ln,
                msg: format!("non-finite value '{tok}'"),
            });
        }
        values.push(v);
        toks.last_line = ln;
    }
    if values.len() != expected {
        return Err(Error::Parse {
            line: toks.last_line,
            msg: format!(
                "header declares {expected} values ({n_channels} x {nt} x {nx}), found {}",
                values.len()
            ),
        });
    }
    GridField::new(n_channels, nx, nt, (x0, x1), (t0, t1), periodic == 1, values).map_err(|e| {
        Error::Parse {
            line: header_line,
            msg: e.to_string(),
        }
    })
}
