//! Sparse operators on the physical basis: the gauge Hamiltonian `H0`, the
//! monitored observable `H1`, and the no-click generator `H0 - i gamma H1`.

use std::io::Write;

use nalgebra::DMatrix;

use crate::basis::PhysicalBasis;
use crate::error::{Error, Result};
use crate::model::{CouplingParams, MeasurementKind, SpinConventions};
use crate::C64;

/// Tolerance used when tagging an operator as (anti-)Hermitian.
const SYMMETRY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Hermitian,
    AntiHermitian,
    General,
}

/// Complex sparse matrix kept in compressed-row form with sorted column
/// indices and no duplicate entries.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    symmetry: Symmetry,
}

impl SparseOperator {
    /// Assemble from coordinate triplets. Duplicate `(row, col)` pairs are
    /// summed; exact zeros are dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= dim || c >= dim) {
            return Err(Error::Dimension { expected: dim, got: r.max(c) + 1 });
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut op = Self { dim, row_ptr, cols, vals, symmetry: Symmetry::General };
        op.prune_zeros();
        op.symmetry = op.detect_symmetry();
        Ok(op)
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let triplets = values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(values.len(), triplets).expect("indices in range")
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_triplets(dim, Vec::new()).expect("empty")
    }

    fn prune_zeros(&mut self) {
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k] != C64::new(0.0, 0.0) {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    fn detect_symmetry(&self) -> Symmetry {
        let mut herm = true;
        let mut anti = true;
        for (r, c, v) in self.iter() {
            let t = self.get(c, r);
            if (v - t.conj()).norm() > SYMMETRY_TOL {
                herm = false;
            }
            if (v + t.conj()).norm() > SYMMETRY_TOL {
                anti = false;
            }
            if !herm && !anti {
                break;
            }
        }
        match (herm, anti) {
            // the zero operator counts as Hermitian
            (true, _) => Symmetry::Hermitian,
            (false, true) => Symmetry::AntiHermitian,
            _ => Symmetry::General,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::Dimension { expected: self.dim, got });
        }
        Ok(())
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn is_hermitian(&self) -> bool {
        self.symmetry == Symmetry::Hermitian
    }

    /// Entry `(row, col)`, zero when not stored.
    pub fn get(&self, row: usize, col: usize) -> C64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    /// `out = A v`.
    pub fn matvec_into(&self, v: &[C64], out: &mut [C64]) {
        debug_assert_eq!(v.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            *o = acc;
        }
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        self.matvec_into(v, &mut out);
        out
    }

    /// `<v|A|v>` (not divided by the norm).
    pub fn expectation(&self, v: &[C64]) -> C64 {
        let av = self.matvec(v);
        v.iter().zip(&av).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn adjoint(&self) -> Self {
        let triplets = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.dim, triplets).expect("same dimension")
    }

    /// `alpha A + beta B`.
    pub fn linear_combination(&self, alpha: C64, other: &Self, beta: C64) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: other.dim });
        }
        let triplets = self
            .iter()
            .map(|(r, c, v)| (r, c, alpha * v))
            .chain(other.iter().map(|(r, c, v)| (r, c, beta * v)))
            .collect();
        Self::from_triplets(self.dim, triplets)
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// Text dump: `row col re im`, one stored entry per line.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# dim {} nnz {}", self.dim, self.nnz())?;
        for (r, c, v) in self.iter() {
            writeln!(out, "{r} {c} {:.17e} {:.17e}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Gauge Hamiltonian in the spin form with the standard link convention.
pub fn build_h0(basis: &PhysicalBasis, params: &CouplingParams) -> SparseOperator {
    build_h0_with(basis, params, SpinConventions::default())
}

/// Gauge Hamiltonian
/// `x sum (s+_i tX_{i,i+1} s-_{i+1} + h.c.) + mu sum (-1)^i sZ_i + sum tZ_{i,i+1}`.
///
/// Hopping across bond `(i, i+1)` flips both matter bits when they differ;
/// the link flip is implicit because the target's derived links differ from
/// the source's exactly on that bond.
pub fn build_h0_with(
    basis: &PhysicalBasis,
    params: &CouplingParams,
    conventions: SpinConventions,
) -> SparseOperator {
    let l = basis.sites();
    let x = params.x();
    let mu = params.mu();
    let mut triplets = Vec::with_capacity(basis.dim() * l);
    for (k, (m, lk)) in basis.configs().enumerate() {
        let mass: f64 = (0..l)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * conventions.sigma_z(m.bit(i)))
            .sum();
        let electric: f64 = (0..l - 1).map(|j| conventions.tau_z(lk.bit(j))).sum();
        triplets.push((k, k, C64::new(mu * mass + electric, 0.0)));
        if x != 0.0 {
            for i in 0..l - 1 {
                if m.bit(i) != m.bit(i + 1) {
                    let target = basis
                        .index_of(m.flipped(&[i, i + 1]))
                        .expect("hopping preserves the gauge sector");
                    triplets.push((target, k, C64::new(x, 0.0)));
                }
            }
        }
    }
    SparseOperator::from_triplets(basis.dim(), triplets).expect("indices from basis")
}

/// Eigenvalue of the measured observable on basis state `k`.
pub fn h1_eigenvalue(basis: &PhysicalBasis, kind: MeasurementKind, k: usize) -> u32 {
    match kind {
        MeasurementKind::ElectricFlux => basis.links(k).flux_count(),
        MeasurementKind::ParticleDensity => basis.matter(k).excitations().count_ones(),
    }
}

/// Diagonal excitation counter for the monitored observable. Its vacuum
/// eigenvalue is zero.
pub fn build_h1(basis: &PhysicalBasis, kind: MeasurementKind) -> SparseOperator {
    let diag: Vec<C64> = (0..basis.dim())
        .map(|k| C64::new(h1_eigenvalue(basis, kind, k) as f64, 0.0))
        .collect();
    SparseOperator::diagonal(&diag)
}

/// `H0 - i gamma H1`.
pub fn build_heff(h0: &SparseOperator, h1: &SparseOperator, gamma: f64) -> Result<SparseOperator> {
    if h0.dim() != h1.dim() {
        return Err(Error::Dimension { expected: h0.dim(), got: h1.dim() });
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::Config(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    if !h0.is_hermitian() || !h1.is_hermitian() {
        return Err(Error::Config("H0 and H1 must both be Hermitian".into()));
    }
    h0.linear_combination(C64::new(1.0, 0.0), h1, C64::new(0.0, -gamma))
}

/// Build `H0`, `H1` and `H_eff` for one parameter point.
pub fn build_operators(
    basis: &PhysicalBasis,
    params: &CouplingParams,
) -> Result<(SparseOperator, SparseOperator, SparseOperator)> {
    let h0 = build_h0(basis, params);
    let h1 = build_h1(basis, params.measurement());
    let heff = build_heff(&h0, &h1, params.gamma())?;
    Ok((h0, h1, heff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::MatterConfig;

    fn params(x: f64) -> CouplingParams {
        CouplingParams::with_unit_mass(x, 0.0, MeasurementKind::ElectricFlux).unwrap()
    }

    #[test]
    fn vacuum_diagonal_element() {
        let b = PhysicalBasis::new(4).unwrap();
        let h0 = build_h0(&b, &params(0.5));
        let v = b.vacuum_index();
        let expected = -4.0 * 2.0f64.sqrt() - 3.0;
        assert!((h0.get(v, v).re - expected).abs() < 1e-13);
        assert!((expected - -8.656_854_249_492_38).abs() < 1e-12);
    }

    #[test]
    fn hopping_structure() {
        let b = PhysicalBasis::new(4).unwrap();
        let h0 = build_h0(&b, &params(0.5));
        assert!(h0.is_hermitian());
        for r in 0..b.dim() {
            let off: Vec<C64> = h0.row(r).filter(|&(c, _)| c != r).map(|(_, v)| v).collect();
            assert!(off.len() <= 3);
            assert!(off.iter().all(|v| *v == C64::new(0.5, 0.0)));
        }
    }

    #[test]
    fn strong_coupling_limit_is_diagonal() {
        let b = PhysicalBasis::new(6).unwrap();
        let h0 = build_h0(&b, &params(0.0));
        assert!(h0.iter().all(|(r, c, _)| r == c));
        let v = b.vacuum_index();
        let min = (0..b.dim()).map(|k| h0.get(k, k).re).fold(f64::INFINITY, f64::min);
        assert_eq!(h0.get(v, v).re, min);
        // unique minimum
        assert_eq!((0..b.dim()).filter(|&k| h0.get(k, k).re == min).count(), 1);
    }

    #[test]
    fn h1_vacuum_is_dark() {
        let b = PhysicalBasis::new(6).unwrap();
        for kind in [MeasurementKind::ElectricFlux, MeasurementKind::ParticleDensity] {
            let h1 = build_h1(&b, kind);
            assert_eq!(h1.get(b.vacuum_index(), b.vacuum_index()), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn h1_on_pair_states() {
        let b = PhysicalBasis::new(6).unwrap();
        let flux = build_h1(&b, MeasurementKind::ElectricFlux);
        let dens = build_h1(&b, MeasurementKind::ParticleDensity);
        // one pair on sites 2, 3
        let psi1 = b.index_of(MatterConfig::vacuum(6).flipped(&[2, 3])).unwrap();
        assert_eq!(flux.get(psi1, psi1).re, 1.0);
        assert_eq!(dens.get(psi1, psi1).re, 2.0);
        // three adjacent pairs filling the chain: links (0,1), (2,3), (4,5) carry flux
        let psi2 = b.index_of(MatterConfig::vacuum(6).flipped(&[0, 1, 2, 3, 4, 5])).unwrap();
        assert_eq!(dens.get(psi2, psi2).re, 6.0);
        assert_eq!(b.links(psi2).to_string(), "10101");
        assert_eq!(flux.get(psi2, psi2).re, 3.0);
    }

    #[test]
    fn heff_examples() {
        let b = PhysicalBasis::new(4).unwrap();
        let h0 = build_h0(&b, &params(0.5));
        let h1 = build_h1(&b, MeasurementKind::ParticleDensity);
        let heff = build_heff(&h0, &h1, 0.0).unwrap();
        assert_eq!(heff.symmetry(), Symmetry::Hermitian);
        for (r, c, v) in h0.iter() {
            assert_eq!(heff.get(r, c), v);
        }
        assert_eq!(heff.nnz(), h0.nnz());

        let zero = SparseOperator::zeros(8);
        let id = SparseOperator::identity(8);
        let heff = build_heff(&zero, &id, 1.0).unwrap();
        assert_eq!(heff.symmetry(), Symmetry::AntiHermitian);
        for k in 0..8 {
            assert_eq!(heff.get(k, k), C64::new(0.0, -1.0));
        }

        let heff = build_heff(&h0, &h1, 0.7).unwrap();
        assert_eq!(heff.symmetry(), Symmetry::General);
        assert!(build_heff(&h0, &SparseOperator::identity(4), 1.0).is_err());
    }

    #[test]
    fn heff_antihermitian_part() {
        let b = PhysicalBasis::new(6).unwrap();
        let h0 = build_h0(&b, &params(0.8));
        let h1 = build_h1(&b, MeasurementKind::ElectricFlux);
        for gamma in [0.13, 1.7, 4.2] {
            let heff = build_heff(&h0, &h1, gamma).unwrap();
            let adj = heff.adjoint();
            for r in 0..b.dim() {
                for c in 0..b.dim() {
                    let anti = (heff.get(r, c) - adj.get(r, c)) * 0.5;
                    let expected = C64::new(0.0, -gamma) * h1.get(r, c);
                    assert!((anti - expected).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn h0_spectrum_is_real() {
        let b = PhysicalBasis::new(6).unwrap();
        let h0 = build_h0(&b, &params(0.5)).to_dense();
        let eig = h0.schur().eigenvalues().expect("triangular schur form");
        let max_im = eig.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(max_im < 1e-12, "max imaginary part {max_im}");
    }

    #[test]
    fn triplets_are_deduplicated() {
        let one = C64::new(1.0, 0.0);
        let op = SparseOperator::from_triplets(3, vec![(0, 1, one), (2, 2, one), (0, 1, one)])
            .unwrap();
        assert_eq!(op.nnz(), 2);
        assert_eq!(op.get(0, 1), C64::new(2.0, 0.0));
        assert!(SparseOperator::from_triplets(2, vec![(0, 2, one)]).is_err());
    }
}
