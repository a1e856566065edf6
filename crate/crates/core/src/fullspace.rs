//! The unconstrained tensor-product register of `L` matter qubits and
//! `L - 1` link qubits, used to cross-check everything built in the reduced
//! basis.
//!
//! Register layout: matter site `i` is bit `i` of the full index, link
//! `(j, j+1)` is bit `L + j`. In every qubit, bit 1 is the `+1` eigenvector of
//! the corresponding `Z` operator, so `Z = diag(-1, +1)` in bit order.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::basis::PhysicalBasis;
use crate::entanglement::Bipartition;
use crate::error::{Error, Result};
use crate::hamiltonian::SparseOperator;
use crate::model::CouplingParams;
use crate::propagator::StateVector;
use crate::C64;

/// Largest register materialized as a dense vector or sparse matrix.
pub const MAX_DENSE_QUBITS: usize = 15;

type Mat2 = [[C64; 2]; 2];

const fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Matrices in bit order: entry `[out][in]`.
const PAULI_Z: Mat2 = [[c(-1.0), c(0.0)], [c(0.0), c(1.0)]];
const PAULI_X: Mat2 = [[c(0.0), c(1.0)], [c(1.0), c(0.0)]];
/// Raises bit 0 (`Z = -1`) to bit 1 (`Z = +1`).
const RAISE: Mat2 = [[c(0.0), c(0.0)], [c(1.0), c(0.0)]];
const LOWER: Mat2 = [[c(0.0), c(1.0)], [c(0.0), c(0.0)]];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FullLayout {
    sites: usize,
}

impl FullLayout {
    pub fn new(sites: usize) -> Self {
        Self { sites }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.sites - 1
    }

    pub fn matter_qubit(&self, site: usize) -> usize {
        site
    }

    pub fn link_qubit(&self, link: usize) -> usize {
        self.sites + link
    }

    pub fn full_index(&self, matter_bits: u64, link_bits: u64) -> u64 {
        matter_bits | (link_bits << self.sites)
    }

    fn qubit(&self, index: u64, q: usize) -> bool {
        (index >> q) & 1 == 1
    }
}

/// Product of single-qubit operators times a coefficient.
#[derive(Debug, Clone)]
pub struct PauliTerm {
    coeff: C64,
    factors: Vec<(usize, Mat2)>,
}

impl PauliTerm {
    /// Image of a computational basis state, if nonzero.
    fn apply(&self, index: u64) -> Option<(u64, C64)> {
        let mut out = index;
        let mut amp = self.coeff;
        for &(q, m) in &self.factors {
            let b_in = ((out >> q) & 1) as usize;
            let (b_out, v) = if m[0][b_in] != c(0.0) {
                (0, m[0][b_in])
            } else if m[1][b_in] != c(0.0) {
                (1, m[1][b_in])
            } else {
                return None;
            };
            // operators used here have at most one nonzero per column
            debug_assert!(m[1 - b_out][b_in] == c(0.0));
            out = (out & !(1 << q)) | ((b_out as u64) << q);
            amp *= v;
        }
        Some((out, amp))
    }
}

/// Pauli-product expansion of the gauge Hamiltonian on the full register.
pub fn full_h0_terms(layout: FullLayout, params: &CouplingParams) -> Vec<PauliTerm> {
    let l = layout.sites();
    let mut terms = Vec::new();
    for i in 0..l - 1 {
        let (a, link, b) = (layout.matter_qubit(i), layout.link_qubit(i), layout.matter_qubit(i + 1));
        terms.push(PauliTerm {
            coeff: c(params.x()),
            factors: vec![(a, RAISE), (link, PAULI_X), (b, LOWER)],
        });
        terms.push(PauliTerm {
            coeff: c(params.x()),
            factors: vec![(a, LOWER), (link, PAULI_X), (b, RAISE)],
        });
    }
    for i in 0..l {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(PauliTerm {
            coeff: c(params.mu() * sign),
            factors: vec![(layout.matter_qubit(i), PAULI_Z)],
        });
    }
    for j in 0..l - 1 {
        terms.push(PauliTerm { coeff: c(1.0), factors: vec![(layout.link_qubit(j), PAULI_Z)] });
    }
    terms
}

/// Image of one full-register basis state under a sum of terms.
pub fn apply_terms(terms: &[PauliTerm], index: u64) -> Vec<(u64, C64)> {
    let mut out: Vec<(u64, C64)> = terms.iter().filter_map(|t| t.apply(index)).collect();
    out.sort_by_key(|&(i, _)| i);
    out.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
    out
}

fn check_dense_size(layout: FullLayout) -> Result<usize> {
    if layout.n_qubits() > MAX_DENSE_QUBITS {
        return Err(Error::TooLarge { dim: 1 << layout.n_qubits(), limit: 1 << MAX_DENSE_QUBITS });
    }
    Ok(1 << layout.n_qubits())
}

/// Full-register gauge Hamiltonian as a sparse matrix (`L <= 8`).
pub fn full_h0(layout: FullLayout, params: &CouplingParams) -> Result<SparseOperator> {
    let dim = check_dense_size(layout)?;
    let terms = full_h0_terms(layout, params);
    let mut triplets = Vec::new();
    for col in 0..dim as u64 {
        for (row, v) in apply_terms(&terms, col) {
            triplets.push((row as usize, col as usize, v));
        }
    }
    SparseOperator::from_triplets(dim, triplets)
}

/// Eigenvalue of `G_site = tZ_{site-1,site} tZ_{site,site+1} exp(-i pi (n - (1 - (-1)^site)/2))` on a
/// full-register basis state. Boundary links outside the register carry the
/// fixed no-flux value `tZ = -1`, and `n` is the fermion occupation read
/// from the Jordan-Wigner spin (`sigma^Z = +1` means occupied).
pub fn gauss_eigenvalue(layout: FullLayout, index: u64, site: usize) -> C64 {
    let l = layout.sites();
    let tau_z = |link: usize| {
        let b = layout.qubit(index, layout.link_qubit(link)) as usize;
        PAULI_Z[b][b].re
    };
    let left = if site == 0 { -1.0 } else { tau_z(site - 1) };
    let right = if site == l - 1 { -1.0 } else { tau_z(site) };
    let n = if layout.qubit(index, layout.matter_qubit(site)) { 1.0 } else { 0.0 };
    let offset = (1.0 - (-1f64).powi(site as i32)) / 2.0;
    C64::from_polar(left * right, -std::f64::consts::PI * (n - offset))
}

/// Amplitudes of a reduced-basis state placed at their full-register indices.
pub fn embed_full_sparse(state: &StateVector, basis: &PhysicalBasis) -> Result<Vec<(u64, C64)>> {
    basis.check_dim(state.dim())?;
    let layout = FullLayout::new(basis.sites());
    Ok(basis
        .configs()
        .zip(state.amplitudes())
        .map(|((m, lk), &a)| (layout.full_index(m.bits(), lk.bits()), a))
        .collect())
}

/// Dense full-register amplitude vector (`L <= 8`).
pub fn embed_full(state: &StateVector, basis: &PhysicalBasis) -> Result<Vec<C64>> {
    let dim = check_dense_size(FullLayout::new(basis.sites()))?;
    let mut full = vec![c(0.0); dim];
    for (idx, a) in embed_full_sparse(state, basis)? {
        full[idx as usize] = a;
    }
    Ok(full)
}

/// `max_i ||(G_i - 1) psi||` for a full-register state given by its nonzero
/// amplitudes.
pub fn gauss_violation_full(layout: FullLayout, entries: &[(u64, C64)]) -> f64 {
    (0..layout.sites())
        .map(|site| {
            entries
                .iter()
                .map(|&(idx, a)| ((gauss_eigenvalue(layout, idx, site) - c(1.0)) * a).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Gauss-law violation of a reduced-basis state after embedding it in the
/// full register. `G_i` is diagonal there, so only the populated amplitudes
/// are visited and the check scales to any `L`.
pub fn gauss_check(state: &StateVector, basis: &PhysicalBasis) -> Result<f64> {
    let entries = embed_full_sparse(state, basis)?;
    Ok(gauss_violation_full(FullLayout::new(basis.sites()), &entries))
}

/// `P^dag H_full P` where `P` embeds the physical basis.
pub fn project_to_basis(full: &SparseOperator, basis: &PhysicalBasis) -> DMatrix<C64> {
    let layout = FullLayout::new(basis.sites());
    let idx: Vec<usize> = basis
        .configs()
        .map(|(m, lk)| layout.full_index(m.bits(), lk.bits()) as usize)
        .collect();
    DMatrix::from_fn(basis.dim(), basis.dim(), |r, c| full.get(idx[r], idx[c]))
}

/// Largest entry of `[H, G_site]`; `G_site` is diagonal so
/// `[H, G]_{rc} = H_{rc} (g_c - g_r)`.
pub fn commutator_with_gauss(full: &SparseOperator, layout: FullLayout, site: usize) -> f64 {
    full.iter()
        .map(|(r, c, v)| {
            (v * (gauss_eigenvalue(layout, c as u64, site) - gauss_eigenvalue(layout, r as u64, site)))
                .norm()
        })
        .fold(0.0, f64::max)
}

/// Von Neumann entropy (nats) of subsystem A built on the full register:
/// A holds matter sites `0..=cut`, links `0..cut`, and the cut link itself
/// when `cut_link_in_a`. The reduced density matrix is diagonalized on the
/// support of the state, which leaves its nonzero spectrum unchanged.
pub fn full_space_entropy(
    state: &StateVector,
    basis: &PhysicalBasis,
    cut: Bipartition,
    cut_link_in_a: bool,
) -> Result<f64> {
    let entries = embed_full_sparse(state, basis)?;
    let layout = FullLayout::new(basis.sites());
    let b = cut.bond();
    let mut a_mask = 0u64;
    for s in 0..=b {
        a_mask |= 1 << layout.matter_qubit(s);
    }
    for j in 0..b {
        a_mask |= 1 << layout.link_qubit(j);
    }
    if cut_link_in_a {
        a_mask |= 1 << layout.link_qubit(b);
    }
    let mut rows: HashMap<u64, usize> = HashMap::new();
    let mut cols: HashMap<u64, usize> = HashMap::new();
    let mut placed = Vec::with_capacity(entries.len());
    for &(idx, amp) in &entries {
        let (ka, kb) = (idx & a_mask, idx & !a_mask);
        let n = rows.len();
        let r = *rows.entry(ka).or_insert(n);
        let n = cols.len();
        let cidx = *cols.entry(kb).or_insert(n);
        placed.push((r, cidx, amp));
    }
    let mut m = DMatrix::<C64>::zeros(rows.len(), cols.len());
    for (r, cidx, amp) in placed {
        m[(r, cidx)] += amp;
    }
    let rho = &m * m.adjoint();
    let eig = rho.symmetric_eigenvalues();
    Ok(eig.iter().filter(|&&p| p > 1e-16).map(|&p| -p * p.ln()).sum())
}
