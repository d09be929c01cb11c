//! Exact dense state-vector engine for small closed systems.
//!
//! Ground truth for every closed-form and analysis result. The Hamiltonian is
//! diagonal in the computational basis, so time evolution is a pure phase per
//! amplitude. Reductions (norms, traces, expectations) run in a fixed
//! sequential order so results are bit-identical across runs.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{
    build_hamiltonian, Decomposition, DensityMatrix, ExpectationSeries, ModelSpec,
    PairCouplingHamiltonian, RelevantObservable, SeriesPoint,
};

/// Largest number of sites the dense engine will represent (2^24 amplitudes).
pub const MAX_DENSE_SITES: usize = 24;
/// Largest subsystem a partial trace may keep (2^12 x 2^12 matrix).
pub const MAX_REDUCED_SITES: usize = 12;

const IMAG_RESIDUE_ERROR: f64 = 1e-8;

/// A pure state of `num_sites` qubits: `2^num_sites` amplitudes with site 0
/// as the most significant bit and bit value 0 meaning spin-up.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    num_sites: usize,
    amplitudes: Vec<Complex64>,
}

impl DenseState {
    pub fn new(num_sites: usize, amplitudes: Vec<Complex64>) -> Result<DenseState> {
        if num_sites == 0 || num_sites > MAX_DENSE_SITES {
            return Err(Error::TooManySites(format!(
                "{num_sites} sites exceeds the dense cap of {MAX_DENSE_SITES}"
            )));
        }
        if amplitudes.len() != 1usize << num_sites {
            return Err(Error::ModelMismatch(format!(
                "{} amplitudes for {} sites",
                amplitudes.len(),
                num_sites
            )));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::ModelMismatch(format!(
                "state norm is {norm}, expected 1"
            )));
        }
        Ok(DenseState {
            num_sites,
            amplitudes,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Builds the initial product state of a model.
pub fn product_state(model: &ModelSpec) -> Result<DenseState> {
    let n_sites = model.num_sites();
    if n_sites > MAX_DENSE_SITES {
        return Err(Error::TooManySites(format!(
            "{n_sites} sites exceeds the dense cap of {MAX_DENSE_SITES}"
        )));
    }
    let mut amps = vec![Complex64::new(1.0, 0.0)];
    for site in 0..n_sites {
        let factor = model.factor(site)?;
        let mut next = Vec::with_capacity(amps.len() * 2);
        for a in &amps {
            next.push(a * factor.up_amp());
            next.push(a * factor.down_amp());
        }
        amps = next;
    }
    DenseState::new(n_sites, amps)
}

/// Per-configuration eigenvalue tables: `a_half[a_cfg] * b_field[b_cfg]`
/// with `a_cfg` the leading M bits and `b_cfg` the trailing N bits.
fn energy_tables(h: &PairCouplingHamiltonian) -> (Vec<f64>, Vec<f64>) {
    let model = h.model();
    let mut a_half = vec![0.0f64];
    for _ in 0..model.m() {
        let mut next = Vec::with_capacity(a_half.len() * 2);
        for v in &a_half {
            next.push(v + 0.5);
            next.push(v - 0.5);
        }
        a_half = next;
    }
    let mut b_field = vec![0.0f64];
    for g in model.couplings() {
        let mut next = Vec::with_capacity(b_field.len() * 2);
        for v in &b_field {
            next.push(v + g);
            next.push(v - g);
        }
        b_field = next;
    }
    (a_half, b_field)
}

/// Evolves a state for time `t`: each amplitude is multiplied by
/// `exp(-i E(config) t)`. Norm is preserved.
pub fn evolve(state0: &DenseState, h: &PairCouplingHamiltonian, t: f64) -> Result<DenseState> {
    let model = h.model();
    if state0.num_sites() != model.num_sites() {
        return Err(Error::ModelMismatch(format!(
            "state has {} sites, Hamiltonian has {}",
            state0.num_sites(),
            model.num_sites()
        )));
    }
    let (a_half, b_field) = energy_tables(h);
    let n_b = model.n();
    let b_mask = (1usize << n_b) - 1;
    let amps: Vec<Complex64> = state0
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(idx, amp)| {
            let energy = a_half[idx >> n_b] * b_field[idx & b_mask];
            amp * Complex64::from_polar(1.0, -energy * t)
        })
        .collect();
    Ok(DenseState {
        num_sites: state0.num_sites(),
        amplitudes: amps,
    })
}

/// Applies a 2x2 matrix to one site of an amplitude vector in place.
fn apply_local(amps: &mut [Complex64], num_sites: usize, site: usize, m: &nalgebra::Matrix2<Complex64>) {
    let half_block = 1usize << (num_sites - 1 - site);
    let mut base = 0;
    while base < amps.len() {
        for off in 0..half_block {
            let i0 = base + off;
            let i1 = i0 + half_block;
            let up = amps[i0];
            let down = amps[i1];
            amps[i0] = m[(0, 0)] * up + m[(0, 1)] * down;
            amps[i1] = m[(1, 0)] * up + m[(1, 1)] * down;
        }
        base += 2 * half_block;
    }
}

/// Expectation value of a relevant observable on a dense state.
pub fn expectation(state: &DenseState, obs: &RelevantObservable) -> Result<f64> {
    for site in obs.support() {
        if site >= state.num_sites() {
            return Err(Error::UnknownSite {
                site,
                num_sites: state.num_sites(),
            });
        }
    }
    let mut transformed = state.amplitudes().to_vec();
    for (&site, matrix) in obs.factors() {
        apply_local(&mut transformed, state.num_sites(), site, matrix);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in state.amplitudes().iter().zip(&transformed) {
        acc += a.conj() * b;
    }
    if acc.im.abs() > IMAG_RESIDUE_ERROR {
        return Err(Error::NonHermitianResult(acc.im));
    }
    Ok(acc.re)
}

/// Partial trace keeping the given sites; the kept sites become the rows of
/// the reduced matrix in ascending site order (first kept site = MSB).
pub fn reduced_density(state: &DenseState, keep: &BTreeSet<usize>) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::EmptySubsystem);
    }
    let n = state.num_sites();
    for &site in keep {
        if site >= n {
            return Err(Error::UnknownSite { site, num_sites: n });
        }
    }
    let k = keep.len();
    if k > MAX_REDUCED_SITES {
        return Err(Error::TooManySites(format!(
            "keeping {k} sites exceeds the reduced cap of {MAX_REDUCED_SITES}"
        )));
    }
    let keep_shift: Vec<usize> = keep.iter().map(|&s| n - 1 - s).collect();
    let comp_shift: Vec<usize> = (0..n)
        .filter(|s| !keep.contains(s))
        .map(|s| n - 1 - s)
        .collect();
    let dim = 1usize << k;
    let n_comp = comp_shift.len();
    let mut rho = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    let mut slice = vec![Complex64::new(0.0, 0.0); dim];
    for c in 0..(1usize << n_comp) {
        let mut c_bits = 0usize;
        for (l, &shift) in comp_shift.iter().enumerate() {
            c_bits |= ((c >> (n_comp - 1 - l)) & 1) << shift;
        }
        for (s, entry) in slice.iter_mut().enumerate() {
            let mut idx = c_bits;
            for (j, &shift) in keep_shift.iter().enumerate() {
                idx |= ((s >> (k - 1 - j)) & 1) << shift;
            }
            *entry = state.amplitudes()[idx];
        }
        for i in 0..dim {
            for j in 0..dim {
                rho[(i, j)] += slice[i] * slice[j].conj();
            }
        }
    }
    DensityMatrix::new(rho)
}

/// Splits `Tr(rho O)` in the given orthonormal basis (columns are the basis
/// vectors) into the diagonal sum and the non-diagonal remainder.
pub fn split_expectation(
    rho: &DensityMatrix,
    obs: &DMatrix<Complex64>,
    basis: &DMatrix<Complex64>,
) -> Result<(f64, f64)> {
    let dim = rho.dim();
    if obs.nrows() != dim || obs.ncols() != dim || basis.nrows() != dim || basis.ncols() != dim {
        return Err(Error::ModelMismatch(format!(
            "dimension mismatch: rho {dim}, obs {}x{}, basis {}x{}",
            obs.nrows(),
            obs.ncols(),
            basis.nrows(),
            basis.ncols()
        )));
    }
    let gram = basis.adjoint() * basis;
    let mut unitary_dev = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let expected = if i == j { 1.0 } else { 0.0 };
            unitary_dev = unitary_dev.max((gram[(i, j)] - Complex64::new(expected, 0.0)).norm());
        }
    }
    if unitary_dev > 1e-10 {
        return Err(Error::InvalidBasis(unitary_dev));
    }
    let rho_b = basis.adjoint() * rho.matrix() * basis;
    let obs_b = basis.adjoint() * obs * basis;
    let mut diag = Complex64::new(0.0, 0.0);
    let mut total = Complex64::new(0.0, 0.0);
    for i in 0..dim {
        diag += rho_b[(i, i)] * obs_b[(i, i)];
        for j in 0..dim {
            total += rho_b[(j, i)] * obs_b[(i, j)];
        }
    }
    Ok((diag.re, (total - diag).re))
}

/// `rho_s_diag (x) I_env / env_dim`: the coarse-grained closed-system state.
/// Tracing the environment back off recovers `rho_s_diag` exactly.
pub fn coarse_grained_state(rho_s_diag: &DensityMatrix, env_dim: usize) -> Result<DensityMatrix> {
    if env_dim == 0 {
        return Err(Error::InvalidArgument("env_dim must be >= 1".into()));
    }
    let offdiag = rho_s_diag.max_offdiag_magnitude();
    if offdiag > 1e-10 {
        return Err(Error::NotDiagonal(offdiag));
    }
    let d_s = rho_s_diag.dim();
    let dim = d_s * env_dim;
    let inv = 1.0 / env_dim as f64;
    let mut mat = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for i in 0..d_s {
        let p = rho_s_diag.entry(i, i);
        for e in 0..env_dim {
            mat[(i * env_dim + e, i * env_dim + e)] = p * inv;
        }
    }
    DensityMatrix::new(mat)
}

/// Traces out the trailing environment factor of a bipartite density matrix
/// with dimensions `sys_dim * env_dim`.
pub fn trace_out_environment(
    rho: &DensityMatrix,
    sys_dim: usize,
    env_dim: usize,
) -> Result<DensityMatrix> {
    if sys_dim * env_dim != rho.dim() {
        return Err(Error::ModelMismatch(format!(
            "{} x {} != density dimension {}",
            sys_dim,
            env_dim,
            rho.dim()
        )));
    }
    let mut mat = DMatrix::from_element(sys_dim, sys_dim, Complex64::new(0.0, 0.0));
    for i in 0..sys_dim {
        for j in 0..sys_dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for e in 0..env_dim {
                acc += rho.entry(i * env_dim + e, j * env_dim + e);
            }
            mat[(i, j)] = acc;
        }
    }
    DensityMatrix::new(mat)
}

/// `Tr(rho^2)`, in `[1/dim, 1]`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            acc += rho.entry(i, j).norm_sqr();
        }
    }
    acc
}

/// Kron product of the observable's factors over the given ordered sites
/// (identity on sites without a factor). Errors if the observable touches a
/// site outside the list.
pub fn system_observable_matrix(
    obs: &RelevantObservable,
    sys_sites: &BTreeSet<usize>,
) -> Result<DMatrix<Complex64>> {
    for site in obs.support() {
        if !sys_sites.contains(&site) {
            return Err(Error::UnsupportedSupport(format!(
                "observable touches site {site} outside the system"
            )));
        }
    }
    let ident = nalgebra::Matrix2::identity();
    let mut mat = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for &site in sys_sites {
        let factor = obs.factor(site).copied().unwrap_or(ident);
        let factor_dyn = DMatrix::from_fn(2, 2, |i, j| factor[(i, j)]);
        mat = mat.kronecker(&factor_dyn);
    }
    Ok(mat)
}

/// Dense-engine expectation series of an observable supported on the system
/// side of a decomposition.
///
/// `total` is computed independently on the full state; the diagonal /
/// non-diagonal split comes from the reduced density matrix in the pointer
/// basis: `diag = sum_i rho_ii O_ii`, `z = sum_{i<j} rho_ij O_ji`, so that
/// `total = diag + 2 Re z`.
pub fn expectation_series(
    model: &ModelSpec,
    decomposition: &Decomposition,
    obs: &RelevantObservable,
    times: &[f64],
) -> Result<ExpectationSeries> {
    let sys = decomposition.system_sites();
    let obs_matrix = system_observable_matrix(obs, sys)?;
    let h = build_hamiltonian(model);
    let psi0 = product_state(model)?;
    let dim = obs_matrix.nrows();
    let mut totals = Vec::with_capacity(times.len());
    let mut points = Vec::with_capacity(times.len());
    for &t in times {
        let psi = evolve(&psi0, &h, t)?;
        let rho = reduced_density(&psi, sys)?;
        let mut diag = Complex64::new(0.0, 0.0);
        let mut z = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            diag += rho.entry(i, i) * obs_matrix[(i, i)];
            for j in (i + 1)..dim {
                z += rho.entry(i, j) * obs_matrix[(j, i)];
            }
        }
        totals.push(expectation(&psi, obs)?);
        points.push(SeriesPoint {
            diag: diag.re,
            nondiag: z,
        });
    }
    let mut series = ExpectationSeries::from_points(times.to_vec(), &points)?;
    series.total = totals;
    Ok(series)
}
