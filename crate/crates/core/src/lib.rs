//! Exact state-vector simulation of the 1+1D Z2 lattice gauge theory coupled
//! to staggered fermions, evolved under continuous monitoring in the no-click
//! limit.
//!
//! The physical (gauge-invariant) sector is enumerated exactly by solving the
//! Gauss law for the link spins, which leaves `2^(L-1)` matter configurations
//! for an `L`-site open chain. Dynamics use the non-Hermitian generator
//! `H_eff = H0 - i * gamma * H1` with renormalization after every step, and
//! the half-chain von Neumann entropy is read off a flux-sector-blocked
//! Schmidt decomposition.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod entanglement;
pub mod error;
pub mod experiment;
pub mod fullspace;
pub mod hamiltonian;
pub mod model;
pub mod propagator;

pub use num_complex::Complex64 as C64;

pub use basis::{derive_links, enumerate_basis, LinkConfig, MatterConfig, PhysicalBasis};
pub use entanglement::{
    entropy_at_cut, entropy_cut_assignment_check, local_expectations, time_average,
    Bipartition, EntropyResult, LocalExpectations, Sample, TimeSeries, WindowStats,
};
pub use error::{Error, Result};
pub use hamiltonian::{build_h0, build_h1, build_heff, SparseOperator, Symmetry};
pub use model::{
    derive_mu, CouplingParams, LatticeSpec, MeasurementKind, SpinConventions, TimeGrid,
};
pub use propagator::{
    dense_step, evolve, krylov_step, DenseStepper, KrylovOptions, Observer, StateVector,
    StepDiagnostics,
};
