use std::collections::BTreeMap;
use std::path::Path;

use wgident::grid::SigmaMode;
use wgident::pipeline::RunConfig;
use wgident::{Error, Result};

/// Values read from a flat `key = value` config file.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    entries: BTreeMap<String, (usize, String)>,
}

const KEYS: &[&str] = &[
    "dictionary",
    "m",
    "d",
    "tau_x",
    "tau_t",
    "tau",
    "l",
    "rho",
    "rho_r",
    "nsr",
    "seed",
    "trials",
    "noise_sigma_mode",
];

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "expected key = value".into(),
                });
            };
            let key = k.trim().to_ascii_lowercase();
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("unknown key '{key}'"),
                });
            }
            entries.insert(key, (i + 1, v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| Error::Parse {
                line: *line,
                msg: format!("bad value '{v}' for '{key}'"),
            }),
        }
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.entries.get(key).map(|(_, v)| v.clone())
    }

    pub fn sigma_mode(&self) -> Result<Option<SigmaMode>> {
        self.string("noise_sigma_mode").map(|s| s.parse()).transpose()
    }

    /// Run configuration from the file, starting at the defaults for the
    /// given channel count.
    pub fn run_config(&self, n_channels: usize) -> Result<RunConfig> {
        let mut cfg = if n_channels > 1 { RunConfig::complex() } else { RunConfig::default() };
        if let Some(v) = self.string("dictionary") {
            cfg.dictionary = v;
        }
        if let Some(v) = self.get("m")? {
            cfg.m = v;
        }
        if let Some(v) = self.get("d")? {
            cfg.d = v;
        }
        if let Some(v) = self.get("tau_x")? {
            cfg.tau_x = v;
        }
        if let Some(v) = self.get("tau_t")? {
            cfg.tau_t = v;
        }
        if let Some(v) = self.get("tau")? {
            cfg.tau = v;
        }
        if let Some(v) = self.get("l")? {
            cfg.l = v;
        }
        if let Some(v) = self.get("rho")? {
            cfg.rho = v;
        }
        if let Some(v) = self.get("rho_r")? {
            cfg.rho = v;
        }
        Ok(cfg)
    }
}
