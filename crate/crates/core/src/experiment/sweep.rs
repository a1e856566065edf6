use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::entanglement::format_float;
use crate::error::{Error, Result};

use super::config::RunConfig;
use super::fit::FitResult;
use super::run::{simulate, temp_sibling, write_series_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Gamma,
    X,
    L,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Gamma => "gamma",
            SweepAxis::X => "x",
            SweepAxis::L => "L",
        }
    }

    /// `base` with the swept parameter set to `value`.
    pub fn apply(self, base: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Gamma => cfg.params = cfg.params.with_gamma(value)?,
            SweepAxis::X => cfg.params = cfg.params.with_x(value)?,
            SweepAxis::L => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(Error::Config(format!("L must be an integer, got {value}")));
                }
                cfg = cfg.with_sites(value as usize)?;
            }
        }
        cfg.output = None;
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gamma" => Ok(SweepAxis::Gamma),
            "x" => Ok(SweepAxis::X),
            "L" | "l" => Ok(SweepAxis::L),
            other => Err(Error::Config(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub s_sat_mean: f64,
    pub s_sat_std: f64,
    pub saturated: bool,
    /// Set when the point failed; the statistics are then `NaN`.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    /// Sorted by swept value.
    pub points: Vec<SweepPoint>,
    pub fit: Option<FitResult>,
}

/// File name of the per-point time series.
pub fn point_file_name(axis: SweepAxis, value: f64) -> String {
    format!("{}_{}.csv", axis.name(), value)
}

/// Run every point on a pool of `workers` threads. Each worker owns its
/// trajectory; results are gathered in value order, so the output does not
/// depend on the worker count. With `out_dir`, each point's time series is
/// written there.
pub fn run_sweep(
    base: &RunConfig,
    axis: SweepAxis,
    values: &[f64],
    workers: usize,
    out_dir: Option<&Path>,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let run_point = |value: f64| -> SweepPoint {
        let outcome = axis.apply(base, value).and_then(|cfg| {
            let out = simulate(&cfg)?;
            if let Some(dir) = out_dir {
                write_series_atomic(&dir.join(point_file_name(axis, value)), &out.series)?;
            }
            Ok(out)
        });
        match outcome {
            Ok(out) => SweepPoint {
                value,
                s_sat_mean: out.saturation.mean,
                s_sat_std: out.saturation.std,
                saturated: out.saturated,
                error: None,
            },
            Err(e) => SweepPoint {
                value,
                s_sat_mean: f64::NAN,
                s_sat_std: f64::NAN,
                saturated: false,
                error: Some(e.to_string()),
            },
        }
    };
    let points: Vec<SweepPoint> = pool.install(|| values.par_iter().map(|&v| run_point(v)).collect());
    Ok(SweepResult { axis, points, fit: None })
}

pub const SUMMARY_HEADER: &str = "axis_value,s_sat_mean,s_sat_std,saturated";

impl SweepResult {
    pub fn write_summary<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SUMMARY_HEADER}")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{}",
                format_float(p.value),
                format_float(p.s_sat_mean),
                format_float(p.s_sat_std),
                u8::from(p.saturated)
            )?;
        }
        Ok(())
    }

    pub fn write_summary_file(&self, path: &Path) -> Result<()> {
        let tmp = temp_sibling(path);
        let mut buf = Vec::new();
        self.write_summary(&mut buf)?;
        fs::write(&tmp, buf)?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(|p| p.error.is_some())
    }

    /// `(value, s_sat_mean)` for the points that completed.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.error.is_none())
            .map(|p| (p.value, p.s_sat_mean))
            .collect()
    }
}

/// Parse a summary CSV into `(value, mean, std, saturated)` rows.
pub fn read_summary<R: Read>(input: R) -> Result<Vec<SweepPoint>> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty summary".into()))??;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let expected: Vec<&str> = SUMMARY_HEADER.split(',').collect();
    if cols != expected {
        return Err(Error::Parse(format!("summary header {cols:?}, expected {expected:?}")));
    }
    let mut points = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(Error::Parse(format!("summary row {} has {} fields", n + 1, f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", n + 1)));
        let saturated = match f[3] {
            "0" | "false" => false,
            "1" | "true" => true,
            other => return Err(Error::Parse(format!("row {}: saturated flag {other:?}", n + 1))),
        };
        points.push(SweepPoint {
            value: num(f[0])?,
            s_sat_mean: num(f[1])?,
            s_sat_std: num(f[2])?,
            saturated,
            error: None,
        });
    }
    Ok(points)
}

/// Summary path inside a sweep output directory.
pub fn summary_path(dir: &Path) -> PathBuf {
    dir.join("summary.csv")
}

pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad sweep value {s:?}")))
        })
        .collect()
}
