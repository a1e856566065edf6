//! One-step propagation under `exp(-i H_eff dt)` followed by renormalization.
//!
//! Two steppers share the [`Stepper`] interface: [`DenseStepper`] forms the
//! dense matrix exponential once (scaling and squaring with a Padé
//! approximant) and serves as the oracle; [`KrylovStepper`] builds an
//! Arnoldi basis with full modified Gram-Schmidt orthogonalization, since
//! `H_eff` is non-normal whenever `gamma > 0`.

use nalgebra::DMatrix;

use crate::basis::PhysicalBasis;
use crate::error::{Error, Result};
use crate::hamiltonian::SparseOperator;
use crate::model::TimeGrid;
use crate::C64;

/// Largest dimension accepted by the dense oracle.
pub const DENSE_DIM_LIMIT: usize = 4096;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Complex amplitudes over the physical basis at simulation time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
    time: f64,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>, time: f64) -> Result<Self> {
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite(time));
        }
        Ok(Self { amplitudes, time })
    }

    /// Normalized copy of the given amplitudes at `t = 0`.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let mut s = Self::new(amplitudes, 0.0)?;
        let n = s.norm();
        if n == 0.0 {
            return Err(Error::NormCollapse(0.0));
        }
        s.scale(1.0 / n);
        Ok(s)
    }

    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[k] = ONE;
        Self { amplitudes, time: 0.0 }
    }

    /// Strong-coupling vacuum at `t = 0`.
    pub fn vacuum(basis: &PhysicalBasis) -> Self {
        Self::basis_state(basis.dim(), basis.vacuum_index())
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|<self|other>|^2` for normalized states.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Euclidean distance `||self - other||`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let dev = (self.norm() - 1.0).abs();
        if dev > tol {
            return Err(Error::Unnormalized(dev));
        }
        Ok(())
    }
}

/// Per-step record of the no-click weight and the Krylov work done.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// `||exp(-i H_eff dt) psi||` before renormalization.
    pub pre_norm: f64,
    /// Largest Arnoldi basis used over all substeps (0 for the dense path).
    pub krylov_dim_used: usize,
    /// Accumulated a posteriori error estimate over the substeps.
    pub error_estimate: f64,
    /// Number of internal substeps (1 unless dt had to be halved).
    pub substeps: usize,
}

impl StepDiagnostics {
    /// Diagnostics attached to the initial state.
    pub fn initial() -> Self {
        Self { pre_norm: 1.0, krylov_dim_used: 0, error_estimate: 0.0, substeps: 0 }
    }
}

pub trait Stepper {
    /// Advance a normalized state by one step and renormalize.
    fn step(&mut self, state: &StateVector) -> Result<(StateVector, StepDiagnostics)>;

    fn dt(&self) -> f64;
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn renormalize(mut v: Vec<C64>, time: f64) -> Result<(StateVector, f64)> {
    if v.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::NonFinite(time));
    }
    let n = norm(&v);
    if n < f64::MIN_POSITIVE.sqrt() {
        return Err(Error::NormCollapse(n));
    }
    let inv = 1.0 / n;
    for a in &mut v {
        *a *= inv;
    }
    Ok((StateVector { amplitudes: v, time }, n))
}

fn check_dt(dt: f64) -> Result<()> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::Config(format!("dt must be > 0, got {dt}")));
    }
    Ok(())
}

/// Dense propagator `exp(-i H_eff dt)`, formed once and reused.
#[derive(Debug, Clone)]
pub struct DenseStepper {
    propagator: DMatrix<C64>,
    dt: f64,
}

impl DenseStepper {
    pub fn new(heff: &SparseOperator, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        if heff.dim() > DENSE_DIM_LIMIT {
            return Err(Error::TooLarge { dim: heff.dim(), limit: DENSE_DIM_LIMIT });
        }
        let generator = heff.to_dense() * C64::new(0.0, -dt);
        Ok(Self { propagator: generator.exp(), dt })
    }

    pub fn propagator(&self) -> &DMatrix<C64> {
        &self.propagator
    }
}

impl Stepper for DenseStepper {
    fn step(&mut self, state: &StateVector) -> Result<(StateVector, StepDiagnostics)> {
        if state.dim() != self.propagator.nrows() {
            return Err(Error::Dimension { expected: self.propagator.nrows(), got: state.dim() });
        }
        let n = state.dim();
        let mut out = vec![ZERO; n];
        // row-major accumulation in a fixed order keeps the result reproducible
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (c, a) in state.amplitudes.iter().enumerate() {
                acc += self.propagator[(r, c)] * a;
            }
            *o = acc;
        }
        let (next, pre_norm) = renormalize(out, state.time + self.dt)?;
        Ok((next, StepDiagnostics { pre_norm, krylov_dim_used: 0, error_estimate: 0.0, substeps: 1 }))
    }

    fn dt(&self) -> f64 {
        self.dt
    }
}

/// One dense-exponential step. Builds the propagator on every call; use
/// [`DenseStepper`] for trajectories.
pub fn dense_step(
    state: &StateVector,
    heff: &SparseOperator,
    dt: f64,
) -> Result<(StateVector, StepDiagnostics)> {
    DenseStepper::new(heff, dt)?.step(state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Relative tolerance on the a posteriori error estimate of one substep.
    pub tol: f64,
    /// Maximum Arnoldi basis size.
    pub m_max: usize,
    /// Maximum number of times dt is halved before giving up.
    pub max_halvings: u32,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { tol: 1e-10, m_max: 40, max_halvings: 12 }
    }
}

/// Outcome of a single Arnoldi approximation of `exp(-i H tau) v`.
struct KrylovApprox {
    result: Vec<C64>,
    dim: usize,
    error: f64,
}

/// Arnoldi approximation of `exp(-i tau H) v`; `None` when the tolerance is
/// not met within `m_max` vectors.
fn arnoldi_exp(
    heff: &SparseOperator,
    v: &[C64],
    tau: f64,
    opts: &KrylovOptions,
    anorm: f64,
) -> Option<KrylovApprox> {
    let n = v.len();
    let beta = norm(v);
    if beta == 0.0 {
        return Some(KrylovApprox { result: vec![ZERO; n], dim: 0, error: 0.0 });
    }
    let m_max = opts.m_max.min(n).max(1);
    let breakdown = 1e-14 * anorm.max(1.0);

    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m_max + 1);
    basis.push(v.iter().map(|a| a / beta).collect());
    let mut hess = DMatrix::<C64>::zeros(m_max + 1, m_max);
    let mut w = vec![ZERO; n];

    for j in 0..m_max {
        heff.matvec_into(&basis[j], &mut w);
        // modified Gram-Schmidt, two passes
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let h: C64 = q.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                hess[(i, j)] += h;
                for (wk, qk) in w.iter_mut().zip(q) {
                    *wk -= h * qk;
                }
            }
        }
        let h_next = norm(&w);
        let m = j + 1;

        if h_next <= breakdown {
            // invariant subspace: the projection is exact
            let small = small_exponential(&hess, m, tau);
            let result = combine(&basis, &small, m, beta, n);
            return Some(KrylovApprox { result, dim: m, error: 0.0 });
        }

        let (small, phi_last) = small_exponential_with_phi(&hess, m, tau);
        let error = tau * h_next * phi_last.norm();
        if error <= opts.tol {
            let result = combine(&basis, &small, m, beta, n);
            return Some(KrylovApprox { result, dim: m, error: error * beta });
        }
        if m == m_max {
            return None;
        }
        hess[(m, j)] = C64::new(h_next, 0.0);
        basis.push(w.iter().map(|a| a / h_next).collect());
    }
    None
}

/// First column of `exp(-i tau H_m)`.
fn small_exponential(hess: &DMatrix<C64>, m: usize, tau: f64) -> Vec<C64> {
    let h = hess.view((0, 0), (m, m)).into_owned() * C64::new(0.0, -tau);
    let e = h.exp();
    (0..m).map(|i| e[(i, 0)]).collect()
}

/// First column of `exp(-i tau H_m)` and the last entry of
/// `phi_1(-i tau H_m) e_1`, both read off the exponential of the augmented
/// matrix `[[-i tau H_m, e_1], [0, 0]]`.
fn small_exponential_with_phi(hess: &DMatrix<C64>, m: usize, tau: f64) -> (Vec<C64>, C64) {
    let mut aug = DMatrix::<C64>::zeros(m + 1, m + 1);
    for r in 0..m {
        for c in 0..m {
            aug[(r, c)] = hess[(r, c)] * C64::new(0.0, -tau);
        }
    }
    aug[(0, m)] = ONE;
    let e = aug.exp();
    ((0..m).map(|i| e[(i, 0)]).collect(), e[(m - 1, m)])
}

fn combine(basis: &[Vec<C64>], coeffs: &[C64], m: usize, beta: f64, n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; n];
    for (q, &c) in basis.iter().take(m).zip(coeffs) {
        let c = c * beta;
        for (o, qk) in out.iter_mut().zip(q) {
            *o += c * qk;
        }
    }
    out
}

/// Arnoldi propagator; dt is halved internally when the tolerance cannot be
/// met at `m_max`.
#[derive(Debug, Clone)]
pub struct KrylovStepper<'a> {
    heff: &'a SparseOperator,
    dt: f64,
    opts: KrylovOptions,
    anorm: f64,
}

impl<'a> KrylovStepper<'a> {
    pub fn new(heff: &'a SparseOperator, dt: f64, opts: KrylovOptions) -> Result<Self> {
        check_dt(dt)?;
        if !(opts.tol > 0.0) || opts.m_max == 0 {
            return Err(Error::Config(format!(
                "krylov tolerance must be > 0 and m_max >= 1 (got {:e}, {})",
                opts.tol, opts.m_max
            )));
        }
        Ok(Self { heff, dt, opts, anorm: heff.norm_inf() })
    }

    /// Apply `exp(-i H tau)` as `2^level` equal substeps.
    fn propagate(&self, v: &[C64], tau: f64, level: u32, diag: &mut StepDiagnostics) -> Option<Vec<C64>> {
        let substeps = 1usize << level;
        let sub_tau = tau / substeps as f64;
        let mut cur = v.to_vec();
        let mut used = 0usize;
        let mut err = 0.0;
        for _ in 0..substeps {
            let approx = arnoldi_exp(self.heff, &cur, sub_tau, &self.opts, self.anorm)?;
            used = used.max(approx.dim);
            err += approx.error;
            cur = approx.result;
        }
        diag.krylov_dim_used = used;
        diag.error_estimate = err;
        diag.substeps = substeps;
        Some(cur)
    }
}

impl Stepper for KrylovStepper<'_> {
    fn step(&mut self, state: &StateVector) -> Result<(StateVector, StepDiagnostics)> {
        if state.dim() != self.heff.dim() {
            return Err(Error::Dimension { expected: self.heff.dim(), got: state.dim() });
        }
        let mut diag = StepDiagnostics::initial();
        for level in 0..=self.opts.max_halvings {
            if let Some(out) = self.propagate(&state.amplitudes, self.dt, level, &mut diag) {
                let (next, pre_norm) = renormalize(out, state.time + self.dt)?;
                diag.pre_norm = pre_norm;
                return Ok((next, diag));
            }
        }
        Err(Error::KrylovNoConvergence { tol: self.opts.tol, halvings: self.opts.max_halvings })
    }

    fn dt(&self) -> f64 {
        self.dt
    }
}

/// One Arnoldi step with default `m_max` and halving limits.
pub fn krylov_step(
    state: &StateVector,
    heff: &SparseOperator,
    dt: f64,
    tol: f64,
) -> Result<(StateVector, StepDiagnostics)> {
    let opts = KrylovOptions { tol, ..KrylovOptions::default() };
    KrylovStepper::new(heff, dt, opts)?.step(state)
}

/// Callback invoked on the initial state (`step = 0`) and after every step.
/// Returning an error aborts the evolution.
pub trait Observer {
    fn observe(&mut self, step: usize, state: &StateVector, diag: &StepDiagnostics) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(usize, &StateVector, &StepDiagnostics) -> Result<()>,
{
    fn observe(&mut self, step: usize, state: &StateVector, diag: &StepDiagnostics) -> Result<()> {
        self(step, state, diag)
    }
}

/// Observers run in order on every sample.
impl Observer for [&mut dyn Observer] {
    fn observe(&mut self, step: usize, state: &StateVector, diag: &StepDiagnostics) -> Result<()> {
        for o in self.iter_mut() {
            o.observe(step, state, diag)?;
        }
        Ok(())
    }
}

/// Run `grid.n_steps()` steps of `stepper`, sampling on the grid. The
/// initial state must be normalized; the returned state is the final one.
pub fn evolve_with<S: Stepper + ?Sized, O: Observer + ?Sized>(
    initial: &StateVector,
    stepper: &mut S,
    grid: &TimeGrid,
    observer: &mut O,
) -> Result<StateVector> {
    initial.check_normalized(1e-10)?;
    if (stepper.dt() - grid.dt()).abs() > 1e-15 * grid.dt() {
        return Err(Error::Config(format!(
            "stepper dt {} does not match grid dt {}",
            stepper.dt(),
            grid.dt()
        )));
    }
    let mut state = initial.clone().with_time(grid.time(0));
    observer.observe(0, &state, &StepDiagnostics::initial())?;
    for k in 1..=grid.n_steps() {
        let (next, diag) = stepper.step(&state)?;
        state = next.with_time(grid.time(k));
        observer.observe(k, &state, &diag)?;
    }
    Ok(state)
}

/// Krylov evolution on the grid.
pub fn evolve<O: Observer + ?Sized>(
    initial: &StateVector,
    heff: &SparseOperator,
    grid: &TimeGrid,
    opts: &KrylovOptions,
    observer: &mut O,
) -> Result<StateVector> {
    let mut stepper = KrylovStepper::new(heff, grid.dt(), *opts)?;
    evolve_with(initial, &mut stepper, grid, observer)
}
