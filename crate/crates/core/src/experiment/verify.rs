//! Oracle suite comparing the reduced-basis engine with brute-force
//! constructions on the full matter+link register.

use std::fmt;

use rand::{Rng, SeedableRng};

use crate::basis::{enumerate_basis, PhysicalBasis};
use crate::entanglement::{entropy_at_cut, entropy_cut_assignment_check, Bipartition};
use crate::error::{Error, Result};
use crate::fullspace::{
    commutator_with_gauss, full_h0, gauss_check, gauss_eigenvalue, project_to_basis, FullLayout,
};
use crate::hamiltonian::{build_h0_with, build_h1, build_heff, SparseOperator};
use crate::model::{SpinConventions, TimeGrid};
use crate::propagator::{DenseStepper, KrylovOptions, KrylovStepper, StateVector, Stepper};
use crate::C64;

use super::config::RunConfig;

/// Largest chain the oracle suite accepts.
pub const MAX_VERIFY_SITES: usize = 8;

pub const HAMILTONIAN_TOL: f64 = 1e-13;
pub const PROPAGATOR_TOL: f64 = 1e-7;
pub const ENTROPY_TOL: f64 = 1e-10;
pub const GAUSS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.checks.push(CheckOutcome { name, passed, detail });
    }
}

/// Krylov and dense trajectories from the same initial state.
#[derive(Debug, Clone)]
pub struct PropagatorComparison {
    /// Largest `||psi_krylov(t_k) - psi_dense(t_k)||` over the grid.
    pub max_deviation: f64,
    /// Krylov states on every grid point, starting with the initial state.
    pub krylov_states: Vec<StateVector>,
}

pub fn compare_propagators(
    initial: &StateVector,
    heff: &SparseOperator,
    grid: &TimeGrid,
    opts: &KrylovOptions,
) -> Result<PropagatorComparison> {
    let mut dense = DenseStepper::new(heff, grid.dt())?;
    let mut krylov = KrylovStepper::new(heff, grid.dt(), *opts)?;
    let mut a = initial.clone();
    let mut b = initial.clone();
    let mut max_deviation: f64 = 0.0;
    let mut krylov_states = Vec::with_capacity(grid.n_steps() + 1);
    krylov_states.push(a.clone());
    for k in 1..=grid.n_steps() {
        a = krylov.step(&a)?.0.with_time(grid.time(k));
        b = dense.step(&b)?.0.with_time(grid.time(k));
        max_deviation = max_deviation.max(a.distance(&b));
        krylov_states.push(a.clone());
    }
    Ok(PropagatorComparison { max_deviation, krylov_states })
}

/// Normalized state with independent uniform real and imaginary parts.
pub fn random_state<R: Rng>(dim: usize, rng: &mut R) -> StateVector {
    let amps = (0..dim)
        .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    StateVector::normalized(amps).expect("nonzero random vector")
}

/// Worst disagreement between blocked-SVD and full-register entropies,
/// including the two cut-link assignments.
pub fn entropy_oracle_deviation(
    state: &StateVector,
    basis: &PhysicalBasis,
    cut: Bipartition,
) -> Result<f64> {
    let blocked = entropy_at_cut(state, basis, cut)?.entropy;
    let (in_a, in_b) = entropy_cut_assignment_check(state, basis, cut)?;
    Ok((blocked - in_b).abs().max((blocked - in_a).abs()).max((in_a - in_b).abs()))
}

/// Run the oracle suite for `config`. `conventions` replaces the standard
/// link encoding in the reduced Hamiltonian; the full-register oracles always
/// use the standard one.
pub fn verify(config: &RunConfig, conventions: SpinConventions) -> Result<VerifyReport> {
    let l = config.lattice.sites();
    if l > MAX_VERIFY_SITES {
        return Err(Error::Config(format!(
            "verification is limited to L <= {MAX_VERIFY_SITES}, got L = {l}"
        )));
    }
    let layout = FullLayout::new(l);
    let basis = enumerate_basis(config.lattice);
    let mut report = VerifyReport::default();

    // basis: brute-force filter of the full register by every Gauss law
    let mut invariant: Vec<u64> = (0..1u64 << layout.n_qubits())
        .filter(|&i| (0..l).all(|s| (gauss_eigenvalue(layout, i, s) - 1.0).norm() < 1e-12))
        .collect();
    invariant.sort_unstable();
    let mut image: Vec<u64> =
        basis.configs().map(|(m, lk)| layout.full_index(m.bits(), lk.bits())).collect();
    image.sort_unstable();
    report.push(
        "basis",
        invariant == image && basis.dim() == 1 << (l - 1),
        format!("dim {} (brute force {})", basis.dim(), invariant.len()),
    );

    // hamiltonian: projection of the full register operator and closure
    let h0 = build_h0_with(&basis, &config.params, conventions);
    let full = full_h0(layout, &config.params)?;
    let proj = project_to_basis(&full, &basis);
    let diff = (proj - h0.to_dense()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let comm = (0..l).map(|s| commutator_with_gauss(&full, layout, s)).fold(0.0, f64::max);
    report.push(
        "hamiltonian",
        diff < HAMILTONIAN_TOL && comm < HAMILTONIAN_TOL,
        format!("max |P'HP - H0| = {diff:.2e}, max |[H, G_i]| = {comm:.2e}"),
    );

    // propagator: Krylov against the dense exponential over the whole grid
    let h1 = build_h1(&basis, config.params.measurement());
    let heff = build_heff(&h0, &h1, config.params.gamma())?;
    let cmp = compare_propagators(&StateVector::vacuum(&basis), &heff, &config.grid, &config.krylov)?;
    report.push(
        "propagator",
        cmp.max_deviation < PROPAGATOR_TOL,
        format!("max per-step deviation {:.2e} over {} steps", cmp.max_deviation, config.grid.n_steps()),
    );

    // entropy: random states plus evolved states
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        worst = worst.max(entropy_oracle_deviation(&random_state(basis.dim(), &mut rng), &basis, config.cut)?);
    }
    let n = cmp.krylov_states.len();
    for k in [n / 6, n / 2, n - 1] {
        worst = worst.max(entropy_oracle_deviation(&cmp.krylov_states[k], &basis, config.cut)?);
    }
    report.push("entropy", worst < ENTROPY_TOL, format!("max deviation {worst:.2e}"));

    // gauss law along the evolved trajectory
    let mut gauss: f64 = 0.0;
    for s in &cmp.krylov_states {
        gauss = gauss.max(gauss_check(s, &basis)?);
    }
    report.push("gauss", gauss < GAUSS_TOL, format!("max violation {gauss:.2e}"));

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CouplingParams, MeasurementKind};

    fn config(l: usize) -> RunConfig {
        let p = CouplingParams::with_unit_mass(0.5, 0.7, MeasurementKind::ElectricFlux).unwrap();
        let mut c = RunConfig::new(l, p).unwrap();
        c.grid = TimeGrid::new(0.1, 6.0).unwrap();
        c
    }

    #[test]
    fn default_configuration_passes() {
        let report = verify(&config(6), SpinConventions::default()).unwrap();
        assert!(report.all_passed(), "{report:?}");
        assert_eq!(report.checks.len(), 5);
    }

    #[test]
    fn broken_convention_is_detected() {
        let report = verify(&config(4), SpinConventions::flipped_links()).unwrap();
        let h = report.checks.iter().find(|c| c.name == "hamiltonian").unwrap();
        assert!(!h.passed);
        assert!(!report.all_passed());
    }

    #[test]
    fn refuses_large_chains() {
        assert!(matches!(
            verify(&config(10), SpinConventions::default()),
            Err(Error::Config(_))
        ));
    }
}
