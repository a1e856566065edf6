//! Physical parameters, lattice geometry and spin-encoding conventions.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Local observable monitored by the no-click measurement record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasurementKind {
    /// Number of flux-carrying links, `sum_links (1 + tau^Z) / 2`.
    ElectricFlux,
    /// Number of particles plus antiparticles, `sum_i (1 - (-1)^i sigma^Z_i) / 2`.
    ParticleDensity,
}

impl MeasurementKind {
    pub fn name(self) -> &'static str {
        match self {
            MeasurementKind::ElectricFlux => "flux",
            MeasurementKind::ParticleDensity => "density",
        }
    }
}

impl fmt::Display for MeasurementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasurementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "flux" | "electric-flux" | "electricflux" => Ok(MeasurementKind::ElectricFlux),
            "density" | "particle-density" | "particledensity" => {
                Ok(MeasurementKind::ParticleDensity)
            }
            other => Err(Error::Config(format!(
                "unknown measurement kind {other:?} (expected flux or density)"
            ))),
        }
    }
}

/// Dimensionless couplings of the lattice Hamiltonian and the monitoring rate.
///
/// The staggered mass is not stored: [`CouplingParams::mu`] always recomputes
/// `2 (m/g) sqrt(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    x: f64,
    m_over_g: f64,
    gamma: f64,
    measurement: MeasurementKind,
}

impl CouplingParams {
    /// `x = 0` is accepted as the static strong-coupling limit (hopping and
    /// mass both vanish); negative or non-finite values are rejected.
    pub fn new(x: f64, m_over_g: f64, gamma: f64, measurement: MeasurementKind) -> Result<Self> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::Config(format!("x must be finite and >= 0, got {x}")));
        }
        if !m_over_g.is_finite() || m_over_g < 0.0 {
            return Err(Error::Config(format!("m/g must be finite and >= 0, got {m_over_g}")));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::Config(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        Ok(Self { x, m_over_g, gamma, measurement })
    }

    /// Parameters with `m/g = 1`.
    pub fn with_unit_mass(x: f64, gamma: f64, measurement: MeasurementKind) -> Result<Self> {
        Self::new(x, 1.0, gamma, measurement)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn m_over_g(&self) -> f64 {
        self.m_over_g
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn measurement(&self) -> MeasurementKind {
        self.measurement
    }

    pub fn mu(&self) -> f64 {
        2.0 * self.m_over_g * self.x.sqrt()
    }

    pub fn with_x(self, x: f64) -> Result<Self> {
        Self::new(x, self.m_over_g, self.gamma, self.measurement)
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        Self::new(self.x, self.m_over_g, gamma, self.measurement)
    }

    pub fn with_measurement(self, measurement: MeasurementKind) -> Self {
        Self { measurement, ..self }
    }
}

/// Staggered mass `mu = 2 (m/g) sqrt(x)`. Requires `x > 0`.
pub fn derive_mu(params: &CouplingParams) -> Result<f64> {
    if params.x <= 0.0 {
        return Err(Error::Config(format!("derive_mu requires x > 0, got {}", params.x)));
    }
    Ok(params.mu())
}

/// Open chain of `L` matter sites joined by `L - 1` links.
///
/// Both boundary fluxes are fixed to "no flux" (`s = -1/2`), which selects the
/// single zero-charge sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeSpec {
    sites: usize,
}

impl LatticeSpec {
    /// Largest chain whose full matter+link register fits in a `u64` index.
    pub const MAX_SITES: usize = 32;

    pub fn new(sites: usize) -> Result<Self> {
        if sites < 4 {
            return Err(Error::Config(format!("L must be >= 4, got {sites}")));
        }
        if !sites.is_multiple_of(2) {
            return Err(Error::Config(format!("L must be even, got {sites}")));
        }
        if sites > Self::MAX_SITES {
            return Err(Error::Config(format!(
                "L = {sites} exceeds the supported maximum {}",
                Self::MAX_SITES
            )));
        }
        Ok(Self { sites })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn n_links(&self) -> usize {
        self.sites - 1
    }

    /// Flux bit on the (virtual) link entering site 0.
    pub fn left_boundary_flux(&self) -> bool {
        false
    }

    /// Flux bit on the (virtual) link leaving site `L - 1`.
    pub fn right_boundary_flux(&self) -> bool {
        false
    }

    /// Central bond `L/2 - 1`.
    pub fn central_bond(&self) -> usize {
        self.sites / 2 - 1
    }
}

/// Bit encoding of the two spin species.
///
/// Matter bit 1 is `sigma^Z = +1` (fermion on an odd site, no antifermion on
/// an even site). Link bit 0 is "no flux" and carries `tau^Z = no_flux_tau_z`,
/// which is `-1` in the standard convention so the electric term favors the
/// flux-free vacuum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinConventions {
    no_flux_tau_z: f64,
}

impl Default for SpinConventions {
    fn default() -> Self {
        Self { no_flux_tau_z: -1.0 }
    }
}

impl SpinConventions {
    /// Convention with the link eigenvalues swapped. Used only to check that
    /// the verification suite detects a wrong encoding.
    pub fn flipped_links() -> Self {
        Self { no_flux_tau_z: 1.0 }
    }

    pub fn is_standard(&self) -> bool {
        self.no_flux_tau_z < 0.0
    }

    pub fn sigma_z(&self, matter_bit: bool) -> f64 {
        if matter_bit {
            1.0
        } else {
            -1.0
        }
    }

    pub fn tau_z(&self, link_bit: bool) -> f64 {
        if link_bit {
            -self.no_flux_tau_z
        } else {
            self.no_flux_tau_z
        }
    }

    /// Matter bit of the strong-coupling vacuum at `site`: occupied on odd
    /// sites, empty on even sites.
    pub fn vacuum_matter_bit(site: usize) -> bool {
        site % 2 == 1
    }

    /// Whether `site` holds an excitation (particle or antiparticle) for the
    /// given matter bit.
    pub fn is_excited(site: usize, matter_bit: bool) -> bool {
        matter_bit != Self::vacuum_matter_bit(site)
    }

    /// Matter bit for a `sigma^Z` eigenvalue of `+1` or `-1`.
    pub fn matter_bit_from_spin(spin: i8) -> Result<bool> {
        match spin {
            1 => Ok(true),
            -1 => Ok(false),
            other => Err(Error::Parse(format!("spin must be +1 or -1, got {other}"))),
        }
    }

    pub fn spin_from_matter_bit(bit: bool) -> i8 {
        if bit {
            1
        } else {
            -1
        }
    }
}

/// Uniform time grid `t_k = k dt`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    total: f64,
    n_steps: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { dt: 0.1, total: 60.0, n_steps: 600 }
    }
}

impl TimeGrid {
    pub fn new(dt: f64, total: f64) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::Config(format!("dt must be > 0, got {dt}")));
        }
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::Config(format!("T must be > 0, got {total}")));
        }
        let n_steps = (total / dt).round() as usize;
        if n_steps == 0 || (n_steps as f64 * dt - total).abs() > 1e-9 * total.max(1.0) {
            return Err(Error::Config(format!(
                "T = {total} is not an integer multiple of dt = {dt}"
            )));
        }
        Ok(Self { dt, total, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Time of grid point `k`, computed as `k * dt` so it never accumulates
    /// rounding.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(x: f64) -> CouplingParams {
        CouplingParams::with_unit_mass(x, 0.0, MeasurementKind::ElectricFlux).unwrap()
    }

    #[test]
    fn mu_examples() {
        assert_eq!(derive_mu(&params(0.25)).unwrap(), 1.0);
        assert_eq!(derive_mu(&params(1.0)).unwrap(), 2.0);
        let mu = derive_mu(&params(0.5)).unwrap();
        assert!((mu - 2.0 * 0.5f64.sqrt()).abs() < 1e-15);
        assert!((mu - std::f64::consts::SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn mu_rejects_nonpositive_x() {
        assert!(derive_mu(&params(0.0)).is_err());
        assert!(CouplingParams::with_unit_mass(-0.1, 0.0, MeasurementKind::ElectricFlux).is_err());
        assert!(CouplingParams::with_unit_mass(0.5, -1.0, MeasurementKind::ElectricFlux).is_err());
    }

    #[test]
    fn mu_monotone_in_x() {
        let xs: Vec<f64> = (1..200).map(|k| k as f64 * 0.013).collect();
        for w in xs.windows(2) {
            assert!(derive_mu(&params(w[0])).unwrap() < derive_mu(&params(w[1])).unwrap());
        }
    }

    #[test]
    fn lattice_validation() {
        assert!(LatticeSpec::new(3).is_err());
        assert!(LatticeSpec::new(2).is_err());
        assert!(LatticeSpec::new(7).is_err());
        let l = LatticeSpec::new(8).unwrap();
        assert_eq!(l.n_links(), 7);
        assert_eq!(l.central_bond(), 3);
    }

    #[test]
    fn time_grid_defaults() {
        let g = TimeGrid::default();
        assert_eq!(g, TimeGrid::new(0.1, 60.0).unwrap());
        assert_eq!(g.n_steps(), 600);
        assert!((g.time(600) - 60.0).abs() < 1e-12);
        assert!(TimeGrid::new(0.1, 0.05).is_err());
        assert!(TimeGrid::new(0.0, 1.0).is_err());
        assert!(TimeGrid::new(0.3, 1.0).is_err());
    }

    #[test]
    fn conventions() {
        let c = SpinConventions::default();
        assert_eq!(c.tau_z(false), -1.0);
        assert_eq!(c.tau_z(true), 1.0);
        assert_eq!(c.sigma_z(true), 1.0);
        assert!(!SpinConventions::is_excited(1, true));
        assert!(!SpinConventions::is_excited(0, false));
        assert!(SpinConventions::is_excited(2, true));
        assert_eq!(SpinConventions::flipped_links().tau_z(false), 1.0);
    }

    #[test]
    fn measurement_kind_parse() {
        assert_eq!("flux".parse::<MeasurementKind>().unwrap(), MeasurementKind::ElectricFlux);
        assert_eq!(
            "Density".parse::<MeasurementKind>().unwrap(),
            MeasurementKind::ParticleDensity
        );
        assert!("charge".parse::<MeasurementKind>().is_err());
    }
}
