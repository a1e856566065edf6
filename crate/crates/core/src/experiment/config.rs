//! Run configuration: a flat `key = value` file whose entries can be
//! overridden individually from the command line.
//!
//! Recognized keys (dashes and underscores are interchangeable):
//!
//! | key           | meaning                                   | default      |
//! |---------------|-------------------------------------------|--------------|
//! | `L`           | number of matter sites (even, >= 4)       | 8            |
//! | `x`           | hopping coupling `1/(a g)^2`              | 0.5          |
//! | `m_over_g`    | mass ratio                                | 1            |
//! | `gamma`       | measurement rate                          | 0            |
//! | `measure`     | `flux` or `density`                       | `flux`       |
//! | `dt`          | time step                                 | 0.1          |
//! | `T`           | total time                                | 60           |
//! | `cut`         | bond index of the entanglement cut        | `L/2 - 1`    |
//! | `window`      | saturation window `t1:t2`                 | `T-20:T`     |
//! | `gauss_every` | Gauss-law check cadence in steps (0 = off)| 1            |
//! | `krylov_tol`  | Krylov per-step tolerance                 | 1e-10        |
//! | `workers`     | sweep worker threads                      | 1            |
//! | `out`         | output path                               | none         |
//!
//! Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::entanglement::Bipartition;
use crate::error::{Error, Result};
use crate::model::{CouplingParams, LatticeSpec, MeasurementKind, TimeGrid};
use crate::propagator::KrylovOptions;

pub const KNOWN_KEYS: &[&str] = &[
    "L", "x", "m_over_g", "gamma", "measure", "dt", "T", "cut", "window", "gauss_every",
    "krylov_tol", "workers", "out",
];

/// Raw key/value settings; later insertions override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn canonical_key(key: &str) -> Result<String> {
    let k = key.trim().replace('-', "_");
    KNOWN_KEYS
        .iter()
        .find(|known| known.eq_ignore_ascii_case(&k) && (known.len() > 1 || **known == k))
        .map(|s| s.to_string())
        .ok_or_else(|| Error::Config(format!("unknown configuration key {key:?}")))
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            s.set(k, v.trim())?;
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        self.values.insert(canonical_key(key)?, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("invalid value {v:?} for {key}")))
            })
            .transpose()
    }

    /// `workers` with a default of one.
    pub fn workers(&self) -> Result<usize> {
        let w = self.parsed::<usize>("workers")?.unwrap_or(1);
        if w == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(w)
    }

    pub fn out(&self) -> Option<PathBuf> {
        self.get("out").map(PathBuf::from)
    }
}

/// Fully validated configuration of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lattice: LatticeSpec,
    pub params: CouplingParams,
    pub grid: TimeGrid,
    pub cut: Bipartition,
    /// Saturation window `[t1, t2]`.
    pub window: (f64, f64),
    pub gauss_every: usize,
    pub krylov: KrylovOptions,
    pub output: Option<PathBuf>,
}

/// `[T - 20, T]`, or the last third of the run when `T <= 30`.
pub fn default_window(total: f64) -> (f64, f64) {
    if total > 30.0 {
        (total - 20.0, total)
    } else {
        (2.0 * total / 3.0, total)
    }
}

pub fn parse_window(text: &str) -> Result<(f64, f64)> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("window must be t1:t2, got {text:?}")))?;
    let t1: f64 = a.trim().parse().map_err(|_| Error::Config(format!("bad window start {a:?}")))?;
    let t2: f64 = b.trim().parse().map_err(|_| Error::Config(format!("bad window end {b:?}")))?;
    Ok((t1, t2))
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let sites = s.parsed::<usize>("L")?.unwrap_or(8);
        let lattice = LatticeSpec::new(sites)?;
        let measure = match s.get("measure") {
            Some(m) => m.parse::<MeasurementKind>()?,
            None => MeasurementKind::ElectricFlux,
        };
        let params = CouplingParams::new(
            s.parsed("x")?.unwrap_or(0.5),
            s.parsed("m_over_g")?.unwrap_or(1.0),
            s.parsed("gamma")?.unwrap_or(0.0),
            measure,
        )?;
        let grid = TimeGrid::new(s.parsed("dt")?.unwrap_or(0.1), s.parsed("T")?.unwrap_or(60.0))?;
        let cut = match s.parsed::<usize>("cut")? {
            Some(b) => Bipartition::new(lattice, b)?,
            None => Bipartition::central(lattice),
        };
        let window = match s.get("window") {
            Some(w) => parse_window(w)?,
            None => default_window(grid.total()),
        };
        let krylov = KrylovOptions {
            tol: s.parsed("krylov_tol")?.unwrap_or(KrylovOptions::default().tol),
            ..KrylovOptions::default()
        };
        let cfg = Self {
            lattice,
            params,
            grid,
            cut,
            window,
            gauss_every: s.parsed("gauss_every")?.unwrap_or(1),
            krylov,
            output: s.out(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults with the given chain length and couplings.
    pub fn new(sites: usize, params: CouplingParams) -> Result<Self> {
        let lattice = LatticeSpec::new(sites)?;
        let grid = TimeGrid::default();
        Ok(Self {
            lattice,
            params,
            grid,
            cut: Bipartition::central(lattice),
            window: default_window(grid.total()),
            gauss_every: 1,
            krylov: KrylovOptions::default(),
            output: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (t1, t2) = self.window;
        if !(t1 < t2) || t1 < 0.0 || t2 > self.grid.total() + 1e-9 {
            return Err(Error::Config(format!(
                "window {t1}:{t2} must satisfy 0 <= t1 < t2 <= T = {}",
                self.grid.total()
            )));
        }
        if !(self.krylov.tol > 0.0) {
            return Err(Error::Config("krylov_tol must be > 0".into()));
        }
        Ok(())
    }

    /// Copy with a different chain length; the cut moves to the new center.
    pub fn with_sites(&self, sites: usize) -> Result<Self> {
        let lattice = LatticeSpec::new(sites)?;
        Ok(Self { lattice, cut: Bipartition::central(lattice), ..self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::from_settings(&Settings::new()).unwrap();
        assert_eq!(c.lattice.sites(), 8);
        assert_eq!(c.cut.bond(), 3);
        assert_eq!(c.grid.n_steps(), 600);
        assert_eq!(c.window, (40.0, 60.0));
        assert_eq!(c.params.measurement(), MeasurementKind::ElectricFlux);
    }

    #[test]
    fn file_then_override() {
        let mut s = Settings::parse("# comment\nL = 10\nx=1.0\nmeasure = density\nm-over-g = 2\n").unwrap();
        s.set("x", "0.25").unwrap();
        let c = RunConfig::from_settings(&s).unwrap();
        assert_eq!(c.lattice.sites(), 10);
        assert_eq!(c.params.x(), 0.25);
        assert_eq!(c.params.m_over_g(), 2.0);
        assert_eq!(c.params.measurement(), MeasurementKind::ParticleDensity);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Settings::parse("bogus = 1").is_err());
        assert!(Settings::parse("L 8").is_err());
        // single-letter keys are case sensitive: `l` is not `L`
        assert!(Settings::parse("l = 8").is_err());
        for text in ["L = 7", "x = -1", "gamma = nan", "window = 50:40", "cut = 7", "T = 60.05"] {
            let s = Settings::parse(text).unwrap();
            assert!(RunConfig::from_settings(&s).is_err(), "{text}");
        }
    }

    #[test]
    fn windows() {
        assert_eq!(parse_window("10:20").unwrap(), (10.0, 20.0));
        assert!(parse_window("10").is_err());
        assert_eq!(default_window(60.0), (40.0, 60.0));
        assert_eq!(default_window(6.0), (4.0, 6.0));
    }
}
