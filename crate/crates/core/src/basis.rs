//! Gauge-invariant basis of the zero-charge sector.
//!
//! With the left boundary flux fixed, the Gauss law at sites `0..L-1`
//! determines every interior link from the matter configuration, so a
//! physical basis state is labelled by its matter bits alone. The remaining
//! constraint at site `L - 1` (outgoing flux equals the right boundary flux)
//! keeps exactly half of the `2^L` matter configurations.

use std::fmt::{self, Write as _};
use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{LatticeSpec, SpinConventions};

/// Matter register: bit `i` is the `sigma^Z` bit of site `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatterConfig {
    bits: u64,
    len: usize,
}

impl MatterConfig {
    pub fn new(bits: u64, len: usize) -> Self {
        debug_assert!(len < 64 && bits >> len == 0);
        Self { bits, len }
    }

    /// Strong-coupling vacuum: odd sites occupied, even sites empty.
    pub fn vacuum(len: usize) -> Self {
        let bits = (0..len)
            .filter(|&i| SpinConventions::vacuum_matter_bit(i))
            .fold(0u64, |acc, i| acc | (1 << i));
        Self { bits, len }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, site: usize) -> bool {
        (self.bits >> site) & 1 == 1
    }

    /// Mask of sites carrying a particle or antiparticle.
    pub fn excitations(&self) -> u64 {
        self.bits ^ Self::vacuum(self.len).bits
    }

    pub fn excited(&self, site: usize) -> bool {
        (self.excitations() >> site) & 1 == 1
    }

    /// Configuration with the bits at `sites` flipped.
    pub fn flipped(&self, sites: &[usize]) -> Self {
        let mask = sites.iter().fold(0u64, |acc, &s| acc | (1 << s));
        Self { bits: self.bits ^ mask, len: self.len }
    }

    /// Build from `sigma^Z` eigenvalues (`+1` / `-1`), site 0 first.
    pub fn from_spins(spins: &[i8]) -> Result<Self> {
        let mut bits = 0u64;
        for (i, &s) in spins.iter().enumerate() {
            if SpinConventions::matter_bit_from_spin(s)? {
                bits |= 1 << i;
            }
        }
        Ok(Self { bits, len: spins.len() })
    }

    pub fn to_spins(&self) -> Vec<i8> {
        (0..self.len).map(|i| SpinConventions::spin_from_matter_bit(self.bit(i))).collect()
    }
}

impl fmt::Display for MatterConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_char(if self.bit(i) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// Link register: bit `i` is the flux on link `(i, i + 1)`; 1 = flux present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkConfig {
    bits: u64,
    len: usize,
}

impl LinkConfig {
    pub fn new(bits: u64, len: usize) -> Self {
        debug_assert!(len < 64 && bits >> len == 0);
        Self { bits, len }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, link: usize) -> bool {
        (self.bits >> link) & 1 == 1
    }

    pub fn flux_count(&self) -> u32 {
        self.bits.count_ones()
    }
}

impl fmt::Display for LinkConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_char(if self.bit(i) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// Solve the Gauss law left to right: the flux leaving site `i` equals the
/// flux entering it, flipped when site `i` holds an excitation.
pub fn derive_links(matter: MatterConfig, left_flux: bool) -> LinkConfig {
    let n_links = matter.len().saturating_sub(1);
    let exc = matter.excitations();
    let mut flux = left_flux;
    let mut bits = 0u64;
    for i in 0..n_links {
        flux ^= (exc >> i) & 1 == 1;
        if flux {
            bits |= 1 << i;
        }
    }
    LinkConfig { bits, len: n_links }
}

/// Flux leaving the last site for the given interior links.
fn outgoing_flux(matter: MatterConfig, links: LinkConfig) -> bool {
    let last = matter.len() - 1;
    let incoming = links.bit(last - 1);
    incoming ^ matter.excited(last)
}

/// Physical basis, ordered by ascending matter bit-string value.
#[derive(Debug, Clone)]
pub struct PhysicalBasis {
    lattice: LatticeSpec,
    matter: Vec<MatterConfig>,
    links: Vec<LinkConfig>,
}

/// Enumerate the zero-charge sector with both boundary fluxes absent.
pub fn enumerate_basis(lattice: LatticeSpec) -> PhysicalBasis {
    let l = lattice.sites();
    let mut matter = Vec::with_capacity(1 << (l - 1));
    let mut links = Vec::with_capacity(1 << (l - 1));
    for bits in 0..(1u64 << l) {
        let m = MatterConfig::new(bits, l);
        let lk = derive_links(m, lattice.left_boundary_flux());
        if outgoing_flux(m, lk) == lattice.right_boundary_flux() {
            matter.push(m);
            links.push(lk);
        }
    }
    PhysicalBasis { lattice, matter, links }
}

impl PhysicalBasis {
    /// Enumerate with a validated chain length.
    pub fn new(sites: usize) -> Result<Self> {
        Ok(enumerate_basis(LatticeSpec::new(sites)?))
    }

    pub fn lattice(&self) -> LatticeSpec {
        self.lattice
    }

    pub fn sites(&self) -> usize {
        self.lattice.sites()
    }

    pub fn dim(&self) -> usize {
        self.matter.len()
    }

    pub fn matter(&self, k: usize) -> MatterConfig {
        self.matter[k]
    }

    pub fn links(&self, k: usize) -> LinkConfig {
        self.links[k]
    }

    pub fn configs(&self) -> impl Iterator<Item = (MatterConfig, LinkConfig)> + '_ {
        self.matter.iter().copied().zip(self.links.iter().copied())
    }

    pub fn index_of(&self, matter: MatterConfig) -> Option<usize> {
        if matter.len() != self.sites() {
            return None;
        }
        self.matter.binary_search(&matter).ok()
    }

    pub fn index_of_bits(&self, bits: u64) -> Option<usize> {
        self.index_of(MatterConfig::new(bits, self.sites()))
    }

    pub fn vacuum_index(&self) -> usize {
        self.index_of(MatterConfig::vacuum(self.sites()))
            .expect("vacuum is gauge invariant")
    }

    pub fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got });
        }
        Ok(())
    }

    /// Text dump, one line per configuration: `index matter_bits link_bits`,
    /// bits written site 0 (link 0) first.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# index matter link")?;
        for (k, (m, lk)) in self.configs().enumerate() {
            writeln!(out, "{k} {m} {lk}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Gauss factor at `site` evaluated directly from `tau^Z` and the
    /// staggered fermion phase, independently of `derive_links`.
    fn gauss_eigenvalue(m: MatterConfig, lk: LinkConfig, site: usize) -> f64 {
        let c = SpinConventions::default();
        let l = m.len();
        let tau_left = if site == 0 { c.tau_z(false) } else { c.tau_z(lk.bit(site - 1)) };
        let tau_right = if site == l - 1 { c.tau_z(false) } else { c.tau_z(lk.bit(site)) };
        let n = if m.bit(site) { 1.0 } else { 0.0 };
        let offset = (1.0 - (-1f64).powi(site as i32)) / 2.0;
        let phase = (std::f64::consts::PI * (n - offset)).cos();
        tau_left * tau_right * phase
    }

    #[test]
    fn vacuum_has_no_flux() {
        let m = MatterConfig::vacuum(4);
        assert_eq!(m.to_string(), "0101");
        let lk = derive_links(m, false);
        assert_eq!(lk.bits(), 0);
        assert_eq!(lk.len(), 3);
    }

    #[test]
    fn single_pair_carries_one_flux_link() {
        let m = MatterConfig::vacuum(4).flipped(&[1, 2]);
        let lk = derive_links(m, false);
        assert_eq!(lk.to_string(), "010");
    }

    #[test]
    fn derived_links_satisfy_gauss_at_interior_sites() {
        for bits in 0..(1u64 << 6) {
            let m = MatterConfig::new(bits, 6);
            let lk = derive_links(m, false);
            for site in 0..5 {
                assert!((gauss_eigenvalue(m, lk, site) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derived_links_are_unique() {
        // brute force over every link register
        for l in [4usize, 6] {
            for bits in 0..(1u64 << l) {
                let m = MatterConfig::new(bits, l);
                let solutions: Vec<u64> = (0..(1u64 << (l - 1)))
                    .filter(|&lb| {
                        let lk = LinkConfig::new(lb, l - 1);
                        (0..l - 1).all(|s| (gauss_eigenvalue(m, lk, s) - 1.0).abs() < 1e-12)
                    })
                    .collect();
                assert_eq!(solutions, vec![derive_links(m, false).bits()]);
            }
        }
    }

    #[test]
    fn basis_dimension() {
        for l in [4usize, 6, 8, 10] {
            let b = PhysicalBasis::new(l).unwrap();
            assert_eq!(b.dim(), 1 << (l - 1));
        }
    }

    #[test]
    fn basis_matches_brute_force_filter() {
        for l in [4usize, 6] {
            let expected: Vec<u64> = (0..(1u64 << l))
                .filter(|&bits| {
                    let m = MatterConfig::new(bits, l);
                    let lk = derive_links(m, false);
                    (0..l).all(|s| (gauss_eigenvalue(m, lk, s) - 1.0).abs() < 1e-12)
                })
                .collect();
            let b = PhysicalBasis::new(l).unwrap();
            let got: Vec<u64> = b.configs().map(|(m, _)| m.bits()).collect();
            assert_eq!(got, expected);
            assert_eq!(got.len(), [8, 32][(l - 4) / 2]);
        }
    }

    #[test]
    fn basis_entries_consistent() {
        let b = PhysicalBasis::new(8).unwrap();
        for (k, (m, lk)) in b.configs().enumerate() {
            assert_eq!(b.index_of(m), Some(k));
            assert_eq!(lk, derive_links(m, false));
        }
        let v = b.vacuum_index();
        assert_eq!(b.matter(v), MatterConfig::vacuum(8));
        assert_eq!(b.links(v).bits(), 0);
    }

    #[test]
    fn rejects_bad_lattices() {
        assert!(PhysicalBasis::new(5).is_err());
        assert!(PhysicalBasis::new(2).is_err());
    }

    #[test]
    fn dump_format() {
        let b = PhysicalBasis::new(4).unwrap();
        let mut buf = Vec::new();
        b.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 9);
        assert!(lines.contains(&format!("{} 0101 000", b.vacuum_index()).as_str()));
    }

    proptest! {
        #[test]
        fn spin_round_trip(bits in 0u64..(1 << 16), len in 1usize..=16) {
            let m = MatterConfig::new(bits & ((1 << len) - 1), len);
            let back = MatterConfig::from_spins(&m.to_spins()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
