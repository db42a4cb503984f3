//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored; arrays are
//! comma-separated. Recognized keys:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `bins` | preset name or comma-separated endpoints | `paper14` |
//! | `n` | sequences per statistic | 200 |
//! | `k` | number of statistics | 20 |
//! | `level` | test level | 0.05 |
//! | `seed` | master seed | 0 |
//! | `em_tol`, `em_max_iter` | EM stopping rule | 1e-3, 500 |
//! | `compensator` | `untruncated` or `exact` | `untruncated` |
//! | `dof_override` | degrees of freedom instead of the bin count | unset |
//! | `ridge` | relative ridge on the middle matrix | unset |
//! | `d1`, `d2`, `out` | input files and output directory | unset |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::em::{Compensator, EmOptions};
use crate::error::{Error, Result};
use crate::gs::GsOptions;
use crate::kernel::BinGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub endpoints: Vec<f64>,
    pub n: usize,
    pub k: usize,
    pub level: f64,
    pub seed: u64,
    pub em: EmOptions,
    pub gs: GsOptions,
    pub d1: Option<PathBuf>,
    pub d2: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            endpoints: BinGrid::preset("paper14").expect("preset exists").endpoints().to_vec(),
            n: 200,
            k: 20,
            level: 0.05,
            seed: 0,
            em: EmOptions::default(),
            gs: GsOptions::default(),
            d1: None,
            d2: None,
            out: None,
        }
    }
}

/// A preset name or a comma-separated list of endpoints.
pub fn parse_grid(value: &str) -> Result<BinGrid> {
    if let Some(g) = BinGrid::preset(value.trim()) {
        return Ok(g);
    }
    let endpoints = value
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad bin endpoint '{x}'"))))
        .collect::<Result<Vec<_>>>()?;
    BinGrid::new(endpoints)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("bad value '{value}' for '{key}'")))
}

impl TestConfig {
    pub fn grid(&self) -> Result<BinGrid> {
        BinGrid::new(self.endpoints.clone())
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "bins" => self.endpoints = parse_grid(value)?.endpoints().to_vec(),
            "n" => self.n = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "level" => self.level = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "em_tol" => self.em.tol = parse(key, value)?,
            "em_max_iter" => self.em.max_iter = parse(key, value)?,
            "compensator" => self.em.compensator = value.parse::<Compensator>()?,
            "dof_override" => self.gs.dof_override = Some(parse(key, value)?),
            "ridge" => self.gs.ridge = Some(parse(key, value)?),
            "d1" => self.d1 = Some(value.into()),
            "d2" => self.d2 = Some(value.into()),
            "out" => self.out = Some(value.into()),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
            cfg.set(key, value).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse_str(&text)
    }

    /// Checks the invariants `N ≥ n0`, `K ≥ 1`, `level ∈ (0, 1)`.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        if self.n < grid.n_bins() {
            return Err(Error::Config(format!("n = {} is below the bin count {}", self.n, grid.n_bins())));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if !(self.em.tol > 0.0) {
            return Err(Error::Config("em_tol must be positive".into()));
        }
        if self.gs.dof_override == Some(0) {
            return Err(Error::Config("dof_override must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let text = "# run\nbins = 0, 0.2, 0.6, 2\nn = 50\nk = 7\nlevel=0.01\nseed = 9\nem_tol = 1e-5\n\
                    em_max_iter = 50\ncompensator = exact\ndof_override = 4\nridge = 0.001\nd1 = a.jsonl\nd2 = b.jsonl\nout = res\n";
        let c = TestConfig::parse_str(text).unwrap();
        assert_eq!(c.endpoints, vec![0.0, 0.2, 0.6, 2.0]);
        assert_eq!((c.n, c.k, c.seed), (50, 7, 9));
        assert_eq!(c.level, 0.01);
        assert_eq!(c.em, EmOptions { tol: 1e-5, max_iter: 50, compensator: Compensator::Exact });
        assert_eq!(c.gs, GsOptions { dof_override: Some(4), ridge: Some(0.001) });
        assert_eq!(c.out, Some(PathBuf::from("res")));
        c.validate().unwrap();
    }

    #[test]
    fn presets_and_errors() {
        let c = TestConfig::parse_str("bins = paper3").unwrap();
        assert_eq!(c.grid().unwrap().n_bins(), 3);
        assert!(matches!(TestConfig::parse_str("colour = red"), Err(Error::Config(_))));
        assert!(matches!(TestConfig::parse_str("n"), Err(Error::Config(_))));
        assert!(matches!(TestConfig::parse_str("n = -3"), Err(Error::Config(_))));
        assert!(TestConfig::parse_str("bins = 0, 0.5, 0.4").is_err());
        let mut c = TestConfig::default();
        c.n = 5;
        assert!(c.validate().is_err());
    }
}
