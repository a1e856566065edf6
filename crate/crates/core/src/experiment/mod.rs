//! Run configuration, single trajectories, parameter sweeps, saturation fits
//! and the oracle verification suite behind the command line driver.

pub mod config;
pub mod fit;
pub mod run;
pub mod sweep;
pub mod verify;

pub use config::{RunConfig, Settings};
pub use fit::{fit_saturation, linear_fit, FitModel, FitResult};
pub use run::{run_single, simulate, write_series_atomic, RunOutput};
pub use sweep::{run_sweep, SweepAxis, SweepPoint, SweepResult};
pub use verify::{verify, VerifyReport};
