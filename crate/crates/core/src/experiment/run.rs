use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::basis::{enumerate_basis, PhysicalBasis};
use crate::entanglement::{time_average, Recorder, TimeSeries, WindowStats, SATURATION_THRESHOLD};
use crate::error::Result;
use crate::hamiltonian::build_operators;
use crate::propagator::{evolve, StateVector};

use super::config::RunConfig;

/// Outcome of one trajectory from the strong-coupling vacuum.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub saturation: WindowStats,
    pub saturated: bool,
}

/// Evolve the vacuum under `config` and collect the time series. No files
/// are touched.
pub fn simulate(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let basis = enumerate_basis(config.lattice);
    simulate_on(config, &basis)
}

pub fn simulate_on(config: &RunConfig, basis: &PhysicalBasis) -> Result<RunOutput> {
    let (h0, _, heff) = build_operators(basis, &config.params)?;
    let mut recorder = Recorder::new(basis, &h0, config.cut, config.gauss_every);
    evolve(&StateVector::vacuum(basis), &heff, &config.grid, &config.krylov, &mut recorder)?;
    let series = recorder.into_series();
    let saturation = time_average(&series, config.window.0, config.window.1)?;
    let saturated = saturation.is_saturated(SATURATION_THRESHOLD);
    Ok(RunOutput { series, saturation, saturated })
}

/// Write `series` to `path` through a temporary sibling so that a failed
/// run never leaves a partial file behind.
pub fn write_series_atomic(path: &Path, series: &TimeSeries) -> Result<()> {
    let tmp = temp_sibling(path);
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        series.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            fs::rename(&tmp, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

pub(crate) fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

/// Simulate and, when the config names an output path, write the CSV.
pub fn run_single(config: &RunConfig) -> Result<RunOutput> {
    let out = simulate(config)?;
    if let Some(path) = &config.output {
        write_series_atomic(path, &out.series)?;
    }
    Ok(out)
}
