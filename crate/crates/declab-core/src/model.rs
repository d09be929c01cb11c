//! Domain types shared by all engines: product states, diagonal pair-coupling
//! Hamiltonians, decompositions, observables and expectation series.
//!
//! Conventions fixed here and relied on everywhere else:
//! * sites are indexed A-side first (`0..m`), then B-side (`m..m+n`);
//! * in basis indices, site 0 is the most significant bit and bit value 0
//!   means spin-up;
//! * `hbar = 1`, so couplings and times are reciprocal units.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const EIGENVALUE_TOL: f64 = 1e-10;
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Spin direction of a single site in the pointer (sigma_z product) basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    /// Bit encoding: up = 0, down = 1.
    pub fn from_bit(bit: usize) -> Spin {
        if bit == 0 {
            Spin::Up
        } else {
            Spin::Down
        }
    }

    /// Sign encoding: up = +1, down = -1.
    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }
}

/// One qubit's normalized amplitudes in a product state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinFactor {
    up_amp: Complex64,
    down_amp: Complex64,
}

impl SpinFactor {
    /// Normalizes the supplied amplitudes, preserving their relative phase.
    pub fn new(up_amp: Complex64, down_amp: Complex64) -> Result<SpinFactor> {
        let norm = (up_amp.norm_sqr() + down_amp.norm_sqr()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidAmplitudes);
        }
        Ok(SpinFactor {
            up_amp: up_amp / norm,
            down_amp: down_amp / norm,
        })
    }

    /// The |up> eigenstate.
    pub fn up() -> SpinFactor {
        SpinFactor {
            up_amp: Complex64::new(1.0, 0.0),
            down_amp: Complex64::new(0.0, 0.0),
        }
    }

    /// The |down> eigenstate.
    pub fn down() -> SpinFactor {
        SpinFactor {
            up_amp: Complex64::new(0.0, 0.0),
            down_amp: Complex64::new(1.0, 0.0),
        }
    }

    /// Equal-weight superposition (|up> + |down>)/sqrt(2).
    pub fn balanced() -> SpinFactor {
        let x = std::f64::consts::FRAC_1_SQRT_2;
        SpinFactor {
            up_amp: Complex64::new(x, 0.0),
            down_amp: Complex64::new(x, 0.0),
        }
    }

    pub fn up_amp(&self) -> Complex64 {
        self.up_amp
    }

    pub fn down_amp(&self) -> Complex64 {
        self.down_amp
    }

    pub fn amp(&self, spin: Spin) -> Complex64 {
        match spin {
            Spin::Up => self.up_amp,
            Spin::Down => self.down_amp,
        }
    }

    /// (|up|^2, |down|^2) occupation probabilities.
    pub fn probabilities(&self) -> (f64, f64) {
        (self.up_amp.norm_sqr(), self.down_amp.norm_sqr())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.up_amp.norm_sqr() + self.down_amp.norm_sqr()
    }
}

/// Convenience wrapper matching the constructor-style operation name.
pub fn make_spin_factor(up_amp: Complex64, down_amp: Complex64) -> Result<SpinFactor> {
    SpinFactor::new(up_amp, down_amp)
}

/// Full closed-system description: A-side factors, B-side factors and the
/// couplings attached to each B-side site.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    a_side: Vec<SpinFactor>,
    b_side: Vec<SpinFactor>,
    couplings: Vec<f64>,
}

impl ModelSpec {
    pub fn new(
        a_side: Vec<SpinFactor>,
        b_side: Vec<SpinFactor>,
        couplings: Vec<f64>,
    ) -> Result<ModelSpec> {
        if a_side.is_empty() {
            return Err(Error::ModelMismatch("a_side must be non-empty".into()));
        }
        if b_side.is_empty() {
            return Err(Error::ModelMismatch("b_side must be non-empty".into()));
        }
        if couplings.len() != b_side.len() {
            return Err(Error::ModelMismatch(format!(
                "couplings length {} != b_side length {}",
                couplings.len(),
                b_side.len()
            )));
        }
        Ok(ModelSpec {
            a_side,
            b_side,
            couplings,
        })
    }

    /// Traditional spin-bath model: one observed particle coupled to a bath.
    pub fn traditional(
        particle: SpinFactor,
        bath: Vec<SpinFactor>,
        couplings: Vec<f64>,
    ) -> Result<ModelSpec> {
        ModelSpec::new(vec![particle], bath, couplings)
    }

    pub fn m(&self) -> usize {
        self.a_side.len()
    }

    pub fn n(&self) -> usize {
        self.b_side.len()
    }

    pub fn num_sites(&self) -> usize {
        self.m() + self.n()
    }

    pub fn a_side(&self) -> &[SpinFactor] {
        &self.a_side
    }

    pub fn b_side(&self) -> &[SpinFactor] {
        &self.b_side
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn is_a_site(&self, site: usize) -> bool {
        site < self.m()
    }

    /// The product-state factor attached to a global site index.
    pub fn factor(&self, site: usize) -> Result<&SpinFactor> {
        if site < self.m() {
            Ok(&self.a_side[site])
        } else if site < self.num_sites() {
            Ok(&self.b_side[site - self.m()])
        } else {
            Err(Error::UnknownSite {
                site,
                num_sites: self.num_sites(),
            })
        }
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site < self.num_sites() {
            Ok(())
        } else {
            Err(Error::UnknownSite {
                site,
                num_sites: self.num_sites(),
            })
        }
    }
}

/// Diagonal pair-coupling Hamiltonian with eigenvalue rule
/// `E(eps, sigma) = (1/2 sum_i eps_i) * (sum_k g_k sigma_k)`.
///
/// All computational (sigma_z product) basis states are eigenstates; for
/// `m = 1` the spectrum is `+-1/2 sum_k g_k sigma_k`.
#[derive(Debug, Clone)]
pub struct PairCouplingHamiltonian {
    model: ModelSpec,
}

impl PairCouplingHamiltonian {
    pub fn new(model: ModelSpec) -> PairCouplingHamiltonian {
        PairCouplingHamiltonian { model }
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    /// Eigenvalue for explicit spin assignments (`a_spins` on the A side,
    /// `b_spins` on the B side).
    pub fn eigenvalue_for_spins(&self, a_spins: &[Spin], b_spins: &[Spin]) -> Result<f64> {
        if a_spins.len() != self.model.m() || b_spins.len() != self.model.n() {
            return Err(Error::ModelMismatch(format!(
                "spin assignment ({}, {}) does not match model ({}, {})",
                a_spins.len(),
                b_spins.len(),
                self.model.m(),
                self.model.n()
            )));
        }
        let half_mag: f64 = 0.5 * a_spins.iter().map(|s| s.sign()).sum::<f64>();
        let field: f64 = b_spins
            .iter()
            .zip(self.model.couplings())
            .map(|(s, g)| g * s.sign())
            .sum();
        Ok(half_mag * field)
    }

    /// Eigenvalue for a computational basis index (site 0 = MSB, bit 0 = up).
    pub fn eigenvalue(&self, basis_index: usize) -> f64 {
        let n_sites = self.model.num_sites();
        let m = self.model.m();
        let mut half_mag = 0.0;
        for site in 0..m {
            let bit = (basis_index >> (n_sites - 1 - site)) & 1;
            half_mag += 0.5 * Spin::from_bit(bit).sign();
        }
        let mut field = 0.0;
        for (k, g) in self.model.couplings().iter().enumerate() {
            let site = m + k;
            let bit = (basis_index >> (n_sites - 1 - site)) & 1;
            field += g * Spin::from_bit(bit).sign();
        }
        half_mag * field
    }
}

/// Self-Hamiltonians vanish, so the full Hamiltonian is fixed by the model.
pub fn build_hamiltonian(model: &ModelSpec) -> PairCouplingHamiltonian {
    PairCouplingHamiltonian::new(model.clone())
}

/// A tensor product structure: which sites form the observed system and
/// which form its environment. Both parts must be non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    system_sites: BTreeSet<usize>,
    environment_sites: BTreeSet<usize>,
}

impl Decomposition {
    pub fn new(system_sites: impl IntoIterator<Item = usize>, num_sites: usize) -> Result<Decomposition> {
        let system: BTreeSet<usize> = system_sites.into_iter().collect();
        if system.is_empty() {
            return Err(Error::EmptySubsystem);
        }
        if let Some(&site) = system.iter().find(|&&s| s >= num_sites) {
            return Err(Error::UnknownSite {
                site,
                num_sites,
            });
        }
        let environment: BTreeSet<usize> = (0..num_sites).filter(|s| !system.contains(s)).collect();
        if environment.is_empty() {
            return Err(Error::ModelMismatch(
                "environment is empty; the system must be a proper subsystem".into(),
            ));
        }
        Ok(Decomposition {
            system_sites: system,
            environment_sites: environment,
        })
    }

    pub fn system_sites(&self) -> &BTreeSet<usize> {
        &self.system_sites
    }

    pub fn environment_sites(&self) -> &BTreeSet<usize> {
        &self.environment_sites
    }

    pub fn system_dim(&self) -> usize {
        1usize << self.system_sites.len()
    }
}

/// A 2x2 Hermitian observable attached to one site.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalObservable {
    pub site: usize,
    pub matrix: Matrix2<Complex64>,
}

impl LocalObservable {
    pub fn new(site: usize, matrix: Matrix2<Complex64>) -> Result<LocalObservable> {
        check_hermitian_2x2(&matrix)?;
        Ok(LocalObservable { site, matrix })
    }
}

fn check_hermitian_2x2(m: &Matrix2<Complex64>) -> Result<()> {
    let dev = (m[(0, 1)] - m[(1, 0)].conj()).norm().max(
        m[(0, 0)].im.abs().max(m[(1, 1)].im.abs()),
    );
    if dev > HERMITICITY_TOL {
        return Err(Error::InvalidDensityMatrix(format!(
            "2x2 factor is not Hermitian (deviation {dev:e})"
        )));
    }
    Ok(())
}

fn is_identity_2x2(m: &Matrix2<Complex64>) -> bool {
    (m[(0, 0)] - Complex64::new(1.0, 0.0)).norm() <= HERMITICITY_TOL
        && (m[(1, 1)] - Complex64::new(1.0, 0.0)).norm() <= HERMITICITY_TOL
        && m[(0, 1)].norm() <= HERMITICITY_TOL
        && m[(1, 0)].norm() <= HERMITICITY_TOL
}

/// An observable of the whole closed system that acts non-trivially only on
/// the keyed sites; every other site carries the identity. The empty map is
/// the global identity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelevantObservable {
    factors: BTreeMap<usize, Matrix2<Complex64>>,
}

impl RelevantObservable {
    pub fn identity() -> RelevantObservable {
        RelevantObservable::default()
    }

    pub fn factors(&self) -> &BTreeMap<usize, Matrix2<Complex64>> {
        &self.factors
    }

    /// Sites carrying a non-identity factor, in ascending order.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.factors.keys().copied()
    }

    pub fn factor(&self, site: usize) -> Option<&Matrix2<Complex64>> {
        self.factors.get(&site)
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }
}

/// Embeds local observables on distinct sites into the closed system.
/// Identity factors are dropped, so embedding the identity yields the
/// global identity.
pub fn embed_observable(
    model: &ModelSpec,
    locals: &[LocalObservable],
) -> Result<RelevantObservable> {
    let mut factors = BTreeMap::new();
    for local in locals {
        model.check_site(local.site)?;
        check_hermitian_2x2(&local.matrix)?;
        if factors.contains_key(&local.site) {
            return Err(Error::DuplicateSite(local.site));
        }
        if is_identity_2x2(&local.matrix) {
            continue;
        }
        factors.insert(local.site, local.matrix);
    }
    Ok(RelevantObservable { factors })
}

pub fn pauli_x() -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
    )
}

pub fn pauli_y() -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(0.0, 0.0),
    )
}

pub fn pauli_z() -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(-1.0, 0.0),
    )
}

/// One expectation-value sample: the time-independent diagonal sum and the
/// complex non-diagonal contribution `z(t)`; the physical value is
/// `diag + 2 Re z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub diag: f64,
    pub nondiag: Complex64,
}

impl SeriesPoint {
    pub fn total(&self) -> f64 {
        self.diag + 2.0 * self.nondiag.re
    }
}

/// Expectation values on a time grid, split into the time-independent
/// diagonal sum and the complex non-diagonal contribution per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationSeries {
    pub times: Vec<f64>,
    pub total: Vec<f64>,
    pub diag_part: f64,
    pub nondiag_part: Vec<Complex64>,
}

impl ExpectationSeries {
    pub fn from_points(times: Vec<f64>, points: &[SeriesPoint]) -> Result<ExpectationSeries> {
        if times.len() != points.len() {
            return Err(Error::ModelMismatch(format!(
                "times length {} != points length {}",
                times.len(),
                points.len()
            )));
        }
        let diag_part = points.first().map(|p| p.diag).unwrap_or(0.0);
        Ok(ExpectationSeries {
            times,
            total: points.iter().map(|p| p.total()).collect(),
            diag_part,
            nondiag_part: points.iter().map(|p| p.nondiag).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Max over the grid of |total - (diag + 2 Re z)|.
    pub fn consistency_residual(&self) -> f64 {
        self.total
            .iter()
            .zip(&self.nondiag_part)
            .map(|(tot, z)| (tot - (self.diag_part + 2.0 * z.re)).abs())
            .fold(0.0, f64::max)
    }

    /// Normalized coherence envelope |z(t)| / |z(0)|; `None` when z(0) = 0.
    pub fn envelope(&self) -> Option<Vec<f64>> {
        let z0 = self.nondiag_part.first()?.norm();
        if z0 < 1e-300 {
            return None;
        }
        Some(self.nondiag_part.iter().map(|z| z.norm() / z0).collect())
    }
}

/// Pointer-basis weights P_i with their configuration labels
/// (strings of `u`/`d` per system site).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalWeights {
    pub weights: Vec<f64>,
    pub labels: Vec<String>,
}

impl DiagonalWeights {
    pub fn new(weights: Vec<f64>, labels: Vec<String>) -> Result<DiagonalWeights> {
        if weights.len() != labels.len() {
            return Err(Error::ModelMismatch(format!(
                "weights length {} != labels length {}",
                weights.len(),
                labels.len()
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDensityMatrix(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        if let Some(w) = weights
            .iter()
            .find(|&&w| !(-EIGENVALUE_TOL..=1.0 + EIGENVALUE_TOL).contains(&w))
        {
            return Err(Error::InvalidDensityMatrix(format!(
                "weight {w} outside [0, 1]"
            )));
        }
        Ok(DiagonalWeights { weights, labels })
    }
}

/// Label for a pointer-basis configuration of `len` sites encoded in `index`
/// (MSB = first site, bit 0 = up).
pub fn configuration_label(index: usize, len: usize) -> String {
    (0..len)
        .map(|pos| {
            if (index >> (len - 1 - pos)) & 1 == 0 {
                'u'
            } else {
                'd'
            }
        })
        .collect()
}

/// A dim x dim density matrix. Construction checks Hermiticity and unit
/// trace; positivity is exposed through [`DensityMatrix::min_eigenvalue`]
/// since partial traces of floating-point pure states may carry eigenvalues
/// slightly below zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(mat: DMatrix<Complex64>) -> Result<DensityMatrix> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::InvalidDensityMatrix(format!(
                "matrix is {}x{}, expected square non-empty",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let mut herm_dev = 0.0f64;
        for i in 0..mat.nrows() {
            for j in i..mat.ncols() {
                herm_dev = herm_dev.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
            }
        }
        if herm_dev > HERMITICITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (deviation {herm_dev:e})"
            )));
        }
        let trace: Complex64 = (0..mat.nrows()).map(|i| mat[(i, i)]).sum();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace is {trace}, expected 1"
            )));
        }
        Ok(DensityMatrix { mat })
    }

    /// From diagonal probabilities (must sum to 1 within tolerance).
    pub fn from_diagonal(probs: &[f64]) -> Result<DensityMatrix> {
        let mat = DMatrix::from_fn(probs.len(), probs.len(), |i, j| {
            if i == j {
                Complex64::new(probs[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        DensityMatrix::new(mat)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.mat[(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    /// Smallest eigenvalue; used to verify positive semidefiniteness within
    /// `-EIGENVALUE_TOL`.
    pub fn min_eigenvalue(&self) -> f64 {
        let eig = self.mat.clone().symmetric_eigen();
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_offdiag_magnitude(&self) -> f64 {
        let mut dev = 0.0f64;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                if i != j {
                    dev = dev.max(self.mat[(i, j)].norm());
                }
            }
        }
        dev
    }
}
