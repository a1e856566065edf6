//! Half-chain entanglement, local profiles and time-window statistics.
//!
//! Links to the right of the cut depend on the left half only through the
//! flux on the cut link, and that flux is fixed by the parity of the left
//! half's excitations. The coefficient matrix `psi[a, b]` (left matter `a`,
//! right matter `b`) is therefore block diagonal in the cut-flux sector, and
//! the Schmidt spectrum of the full matter+link state is the union of the
//! singular values of the two blocks.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::DMatrix;

use crate::basis::PhysicalBasis;
use crate::error::{Error, Result};
use crate::fullspace::{full_space_entropy, gauss_check};
use crate::hamiltonian::SparseOperator;
use crate::model::LatticeSpec;
use crate::propagator::{Observer, StateVector, StepDiagnostics};
use crate::C64;

/// Norm tolerance for entropy inputs.
pub const NORM_TOL: f64 = 1e-8;
/// Schmidt weights below this are dropped (`0 ln 0 = 0`).
pub const SCHMIDT_CUTOFF: f64 = 1e-16;
/// Default saturation classifier threshold on `std / mean`.
pub const SATURATION_THRESHOLD: f64 = 0.05;
/// Gauss violation that aborts an evolution.
pub const GAUSS_ABORT: f64 = 1e-8;

/// Cut through link `bond`: sites `0..=bond` form A, the rest form B.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bipartition {
    bond: usize,
}

impl Bipartition {
    pub fn new(lattice: LatticeSpec, bond: usize) -> Result<Self> {
        if bond > lattice.sites() - 2 {
            return Err(Error::Config(format!(
                "cut bond {bond} out of range 0..={}",
                lattice.sites() - 2
            )));
        }
        Ok(Self { bond })
    }

    pub fn central(lattice: LatticeSpec) -> Self {
        Self { bond: lattice.central_bond() }
    }

    pub fn bond(&self) -> usize {
        self.bond
    }

    /// Matter sites in A.
    pub fn left_sites(&self) -> usize {
        self.bond + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyResult {
    /// Von Neumann entropy in nats.
    pub entropy: f64,
    /// Nonzero Schmidt weights, descending, summing to one.
    pub schmidt_spectrum: Vec<f64>,
    /// Number of nonzero Schmidt weights in the no-flux and flux sectors of
    /// the cut link.
    pub sector_sizes: [usize; 2],
}

/// Schmidt decomposition at `cut`, blocked by the cut-link flux.
pub fn entropy_at_cut(
    state: &StateVector,
    basis: &PhysicalBasis,
    cut: Bipartition,
) -> Result<EntropyResult> {
    basis.check_dim(state.dim())?;
    state.check_normalized(NORM_TOL)?;
    let l = basis.sites();
    let na = cut.left_sites();
    let a_mask = (1u64 << na) - 1;

    // compact row/column labels per sector, assigned in ascending bit order
    let mut row_of = vec![[usize::MAX; 2]; 1 << na];
    let mut col_of = vec![[usize::MAX; 2]; 1 << (l - na)];
    let mut dims = [[0usize; 2]; 2];
    let mut left_sector = vec![0usize; 1 << na];
    for a in 0..(1u64 << na) {
        let s = ((a ^ vacuum_bits(na)).count_ones() % 2) as usize;
        left_sector[a as usize] = s;
        row_of[a as usize][s] = dims[s][0];
        dims[s][0] += 1;
    }
    let right_vac = vacuum_bits(l) >> na;
    for b in 0..(1u64 << (l - na)) {
        let s = ((b ^ right_vac).count_ones() % 2) as usize;
        col_of[b as usize][s] = dims[s][1];
        dims[s][1] += 1;
    }

    let mut blocks = [
        DMatrix::<C64>::zeros(dims[0][0], dims[0][1]),
        DMatrix::<C64>::zeros(dims[1][0], dims[1][1]),
    ];
    for (k, amp) in state.amplitudes().iter().enumerate() {
        let m = basis.matter(k);
        let s = basis.links(k).bit(cut.bond()) as usize;
        let (a, b) = ((m.bits() & a_mask) as usize, (m.bits() >> na) as usize);
        debug_assert_eq!(left_sector[a], s);
        blocks[s][(row_of[a][s], col_of[b][s])] = *amp;
    }

    let mut spectrum = Vec::new();
    let mut sector_sizes = [0usize; 2];
    for (s, block) in blocks.into_iter().enumerate() {
        if block.is_empty() || block.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            continue;
        }
        for sv in block.singular_values_unordered().iter() {
            let w = sv * sv;
            if w > SCHMIDT_CUTOFF {
                spectrum.push(w);
                sector_sizes[s] += 1;
            }
        }
    }
    spectrum.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = spectrum.iter().sum();
    for w in &mut spectrum {
        *w /= total;
    }
    let entropy = spectrum.iter().map(|&w| -w * w.ln()).sum::<f64>().max(0.0);
    Ok(EntropyResult { entropy, schmidt_spectrum: spectrum, sector_sizes })
}

fn vacuum_bits(len: usize) -> u64 {
    crate::basis::MatterConfig::vacuum(len).bits()
}

/// Full-register entropies with the cut link assigned to A and to B.
pub fn entropy_cut_assignment_check(
    state: &StateVector,
    basis: &PhysicalBasis,
    cut: Bipartition,
) -> Result<(f64, f64)> {
    state.check_normalized(NORM_TOL)?;
    Ok((
        full_space_entropy(state, basis, cut, true)?,
        full_space_entropy(state, basis, cut, false)?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalExpectations {
    /// `<(1 + tZ)/2>` per link.
    pub flux: Vec<f64>,
    /// `<(1 - (-1)^i sZ_i)/2>` per site.
    pub occupation: Vec<f64>,
    /// `<H0>`.
    pub energy: f64,
}

/// Diagonal profiles from `|amplitude|^2` and the energy from one matvec.
pub fn local_expectations(
    state: &StateVector,
    basis: &PhysicalBasis,
    h0: &SparseOperator,
) -> Result<LocalExpectations> {
    basis.check_dim(state.dim())?;
    h0.check_dim(state.dim())?;
    let l = basis.sites();
    let norm2: f64 = state.amplitudes().iter().map(|a| a.norm_sqr()).sum();
    let mut flux = vec![0.0; l - 1];
    let mut occupation = vec![0.0; l];
    for (k, amp) in state.amplitudes().iter().enumerate() {
        let p = amp.norm_sqr() / norm2;
        if p == 0.0 {
            continue;
        }
        let (m, lk) = (basis.matter(k), basis.links(k));
        for (j, f) in flux.iter_mut().enumerate() {
            if lk.bit(j) {
                *f += p;
            }
        }
        for (i, o) in occupation.iter_mut().enumerate() {
            if m.excited(i) {
                *o += p;
            }
        }
    }
    let energy = h0.expectation(state.amplitudes()).re / norm2;
    Ok(LocalExpectations { flux, occupation, energy })
}

/// One row of a time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub entropy: f64,
    pub pre_norm: f64,
    /// `NaN` on steps where the Gauss check was skipped.
    pub gauss_violation: f64,
    pub energy: f64,
    pub flux: Vec<f64>,
    pub occupation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    sites: usize,
    samples: Vec<Sample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

impl WindowStats {
    /// `std / mean < threshold`; an exactly constant window is saturated.
    pub fn is_saturated(&self, threshold: f64) -> bool {
        self.std == 0.0 || self.std < threshold * self.mean.abs()
    }
}

/// Mean and standard deviation of the entropy over grid points in `[t1, t2]`.
pub fn time_average(series: &TimeSeries, t1: f64, t2: f64) -> Result<WindowStats> {
    if !(t1 < t2) {
        return Err(Error::Config(format!("window start {t1} must precede end {t2}")));
    }
    let eps = 1e-9 * t2.abs().max(1.0);
    let values: Vec<f64> = series
        .samples
        .iter()
        .filter(|s| s.t >= t1 - eps && s.t <= t2 + eps)
        .map(|s| s.entropy)
        .collect();
    if values.is_empty() {
        return Err(Error::EmptyWindow(t1, t2));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(WindowStats { mean, std: var.sqrt(), count: values.len() })
}

const FLOAT_PREC: usize = 16;

impl TimeSeries {
    pub fn new(sites: usize) -> Self {
        Self { sites, samples: Vec::new() }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        if sample.flux.len() != self.sites - 1 || sample.occupation.len() != self.sites {
            return Err(Error::Dimension { expected: self.sites, got: sample.occupation.len() });
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn last_time(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t)
    }

    pub fn header(sites: usize) -> Vec<String> {
        let mut cols: Vec<String> =
            ["t", "entropy_nats", "pre_norm", "gauss_violation", "energy"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        cols.extend((0..sites - 1).map(|j| format!("flux_{j}")));
        cols.extend((0..sites).map(|i| format!("occ_{i}")));
        cols
    }

    /// CSV with a header row; floats carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", Self::header(self.sites).join(","))?;
        let mut line = String::new();
        for s in &self.samples {
            line.clear();
            let fields = [s.t, s.entropy, s.pre_norm, s.gauss_violation, s.energy]
                .into_iter()
                .chain(s.flux.iter().copied())
                .chain(s.occupation.iter().copied());
            for (i, v) in fields.enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&format_float(v));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input).lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty time series".into()))??;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        // 5 scalar columns + (L - 1) flux + L occupation
        if cols.len() < 5 + 7 || !(cols.len() - 4).is_multiple_of(2) {
            return Err(Error::Parse(format!("unexpected column count {}", cols.len())));
        }
        let sites = (cols.len() - 4) / 2;
        let expected = Self::header(sites);
        if let Some((got, want)) = cols.iter().zip(&expected).find(|(g, w)| **g != w.as_str()) {
            return Err(Error::Parse(format!("column {got:?} where {want:?} expected")));
        }
        let mut series = Self::new(sites);
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", n + 1)))?;
            if vals.len() != expected.len() {
                return Err(Error::Parse(format!("row {} has {} fields", n + 1, vals.len())));
            }
            series.push(Sample {
                t: vals[0],
                entropy: vals[1],
                pre_norm: vals[2],
                gauss_violation: vals[3],
                energy: vals[4],
                flux: vals[5..5 + sites - 1].to_vec(),
                occupation: vals[5 + sites - 1..].to_vec(),
            })?;
        }
        Ok(series)
    }
}

pub(crate) fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.FLOAT_PREC$e}")
    } else {
        format!("{v}")
    }
}

/// Observer that fills a [`TimeSeries`] and enforces the Gauss law.
pub struct Recorder<'a> {
    basis: &'a PhysicalBasis,
    h0: &'a SparseOperator,
    cut: Bipartition,
    gauss_every: usize,
    series: TimeSeries,
}

impl<'a> Recorder<'a> {
    /// `gauss_every = 0` disables the Gauss check; otherwise it runs on
    /// every `gauss_every`-th sample, always including the first.
    pub fn new(
        basis: &'a PhysicalBasis,
        h0: &'a SparseOperator,
        cut: Bipartition,
        gauss_every: usize,
    ) -> Self {
        Self { basis, h0, cut, gauss_every, series: TimeSeries::new(basis.sites()) }
    }

    pub fn into_series(self) -> TimeSeries {
        self.series
    }

    pub fn series(&self) -> &TimeSeries {
        &self.series
    }
}

impl Observer for Recorder<'_> {
    fn observe(&mut self, step: usize, state: &StateVector, diag: &StepDiagnostics) -> Result<()> {
        let gauss_violation = if self.gauss_every > 0 && step.is_multiple_of(self.gauss_every) {
            let v = gauss_check(state, self.basis)?;
            if !(v <= GAUSS_ABORT) {
                return Err(Error::GaussViolation { violation: v, time: state.time() });
            }
            v
        } else {
            f64::NAN
        };
        let ent = entropy_at_cut(state, self.basis, self.cut)?;
        let loc = local_expectations(state, self.basis, self.h0)?;
        self.series.push(Sample {
            t: state.time(),
            entropy: ent.entropy,
            pre_norm: diag.pre_norm,
            gauss_violation,
            energy: loc.energy,
            flux: loc.flux,
            occupation: loc.occupation,
        })
    }
}
