//! Cosmological perturbation modes: integrates `f'' + (k^2 - a''/a) f = 0`,
//! enforces the Wronskian/commutator invariant `2 (f1 g1 + f2 g2) = 1`, and
//! computes the decaying/growing-branch classicality diagnostics together
//! with the classical-ensemble equivalence check.
//!
//! Momentum convention: `p = y'`, so the companion components are
//! `g1 = -f2'` and `g2 = f1'`. Integration is fixed-step 4th order with a
//! user-set step count, keeping trajectories bit-reproducible.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Background scale factor a(eta) in conformal time.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleFactorModel {
    /// a = 1, a''/a = 0, all eta.
    Minkowski,
    /// a = -1/(H eta), a''/a = 2/eta^2, eta < 0.
    DeSitter { hubble: f64 },
    /// Sampled a(eta) on a strictly increasing grid; a''/a from second
    /// differences, both linearly interpolated.
    Tabulated { etas: Vec<f64>, scale_factors: Vec<f64> },
}

impl ScaleFactorModel {
    pub fn de_sitter(hubble: f64) -> Result<ScaleFactorModel> {
        if hubble <= 0.0 || hubble.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "Hubble rate {hubble} must be positive"
            )));
        }
        Ok(ScaleFactorModel::DeSitter { hubble })
    }

    pub fn tabulated(etas: Vec<f64>, scale_factors: Vec<f64>) -> Result<ScaleFactorModel> {
        if etas.len() < 3 || etas.len() != scale_factors.len() {
            return Err(Error::InvalidArgument(
                "tabulated model needs >= 3 matching samples".into(),
            ));
        }
        if etas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "tabulated eta grid must be strictly increasing".into(),
            ));
        }
        if scale_factors.iter().any(|&a| a <= 0.0 || a.is_nan()) {
            return Err(Error::InvalidArgument(
                "tabulated scale factors must be positive".into(),
            ));
        }
        Ok(ScaleFactorModel::Tabulated { etas, scale_factors })
    }

    pub fn contains(&self, eta: f64) -> bool {
        match self {
            ScaleFactorModel::Minkowski => eta.is_finite(),
            ScaleFactorModel::DeSitter { .. } => eta < 0.0,
            ScaleFactorModel::Tabulated { etas, .. } => {
                eta >= etas[0] && eta <= *etas.last().unwrap()
            }
        }
    }
}

/// Returns `(a, a''/a)` at the given conformal time.
pub fn scale_factor_terms(model: &ScaleFactorModel, eta: f64) -> Result<(f64, f64)> {
    if !model.contains(eta) {
        return Err(Error::OutOfDomain { eta });
    }
    match model {
        ScaleFactorModel::Minkowski => Ok((1.0, 0.0)),
        ScaleFactorModel::DeSitter { hubble } => {
            if *hubble <= 0.0 || hubble.is_nan() {
                return Err(Error::InvalidArgument(format!(
                    "Hubble rate {hubble} must be positive"
                )));
            }
            Ok((-1.0 / (hubble * eta), 2.0 / (eta * eta)))
        }
        ScaleFactorModel::Tabulated { etas, scale_factors } => {
            let n = etas.len();
            // Nodewise a'' via nonuniform second differences.
            let a_pp_at = |i: usize| -> f64 {
                let i = i.clamp(1, n - 2);
                let h0 = etas[i] - etas[i - 1];
                let h1 = etas[i + 1] - etas[i];
                2.0 * ((scale_factors[i + 1] - scale_factors[i]) / h1
                    - (scale_factors[i] - scale_factors[i - 1]) / h0)
                    / (h0 + h1)
            };
            let j = match etas.binary_search_by(|x| x.partial_cmp(&eta).unwrap()) {
                Ok(j) => j.min(n - 2),
                Err(j) => j.saturating_sub(1).min(n - 2),
            };
            let frac = (eta - etas[j]) / (etas[j + 1] - etas[j]);
            let a = scale_factors[j] + frac * (scale_factors[j + 1] - scale_factors[j]);
            let app = a_pp_at(j) + frac * (a_pp_at(j + 1) - a_pp_at(j));
            Ok((a, app / a))
        }
    }
}

/// Mode components at one conformal time: `f = f1 + i f2` with the vacuum
/// normalization units of `k^{-1/2}`, companions `g1 = -f2'`, `g2 = f1'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeState {
    pub f1: f64,
    pub f2: f64,
    pub g1: f64,
    pub g2: f64,
    pub eta: f64,
    pub k: f64,
}

impl ModeState {
    pub fn wronskian(&self) -> f64 {
        self.f1 * self.g1 + self.f2 * self.g2
    }

    pub fn wronskian_residual(&self) -> f64 {
        (self.wronskian() - 0.5).abs()
    }
}

/// Canonical commutator coefficient `2 (f1 g1 + f2 g2)`; exactly 1 for a
/// true mode pair, however small the decaying branch has become.
pub fn commutator_coefficient(state: &ModeState) -> f64 {
    2.0 * state.wronskian()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeTrajectory {
    pub k: f64,
    pub model: ScaleFactorModel,
    pub states: Vec<ModeState>,
}

impl ModeTrajectory {
    pub fn etas(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.eta)
    }

    pub fn max_wronskian_residual(&self) -> f64 {
        self.states
            .iter()
            .map(|s| s.wronskian_residual())
            .fold(0.0, f64::max)
    }

    /// Index of the grid state nearest to `eta`.
    pub fn nearest_index(&self, eta: f64) -> Result<usize> {
        if self.states.is_empty() {
            return Err(Error::OutOfDomain { eta });
        }
        let first = self.states[0].eta;
        let last = self.states[self.states.len() - 1].eta;
        let step = if self.states.len() > 1 {
            (last - first) / (self.states.len() - 1) as f64
        } else {
            f64::INFINITY
        };
        if eta < first - step || eta > last + step {
            return Err(Error::OutOfDomain { eta });
        }
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, s) in self.states.iter().enumerate() {
            let d = (s.eta - eta).abs();
            if d < best_dist {
                best_dist = d;
                best = i;
            }
        }
        Ok(best)
    }
}

const WRONSKIAN_FAIL: f64 = 1e-6;

/// Integrates the mode equation with vacuum initial conditions
/// `f(eta0) = 1/sqrt(2k)`, `f'(eta0) = -i k/sqrt(2k)` over `steps` fixed
/// 4th-order steps, recording every grid point and checking the Wronskian
/// residual at each.
pub fn evolve_mode(
    k: f64,
    model: &ScaleFactorModel,
    eta0: f64,
    eta1: f64,
    steps: usize,
) -> Result<ModeTrajectory> {
    if k <= 0.0 || k.is_nan() {
        return Err(Error::InvalidArgument(format!("k = {k} must be positive")));
    }
    if steps < 100 {
        return Err(Error::InvalidArgument(format!(
            "steps = {steps}; at least 100 required"
        )));
    }
    if eta1 <= eta0 {
        return Err(Error::InvalidArgument(format!(
            "empty integration range [{eta0}, {eta1}]"
        )));
    }
    if !model.contains(eta0) {
        return Err(Error::OutOfDomain { eta: eta0 });
    }
    if !model.contains(eta1) {
        return Err(Error::OutOfDomain { eta: eta1 });
    }

    let omega_sqr = |eta: f64| -> Result<f64> {
        let (_, app_over_a) = scale_factor_terms(model, eta)?;
        Ok(k * k - app_over_a)
    };

    // State vector (f1, f2, f1', f2').
    let sqrt_2k = (2.0 * k).sqrt();
    let mut y = [1.0 / sqrt_2k, 0.0, 0.0, -k / sqrt_2k];
    let h = (eta1 - eta0) / steps as f64;

    let deriv = |eta: f64, y: &[f64; 4]| -> Result<[f64; 4]> {
        let w2 = omega_sqr(eta)?;
        Ok([y[2], y[3], -w2 * y[0], -w2 * y[1]])
    };

    let to_state = |eta: f64, y: &[f64; 4]| ModeState {
        f1: y[0],
        f2: y[1],
        g1: -y[3],
        g2: y[2],
        eta,
        k,
    };

    let mut states = Vec::with_capacity(steps + 1);
    states.push(to_state(eta0, &y));
    for i in 0..steps {
        let eta = eta0 + h * i as f64;
        let k1 = deriv(eta, &y)?;
        let y2 = add_scaled(&y, &k1, 0.5 * h);
        let k2 = deriv(eta + 0.5 * h, &y2)?;
        let y3 = add_scaled(&y, &k2, 0.5 * h);
        let k3 = deriv(eta + 0.5 * h, &y3)?;
        let y4 = add_scaled(&y, &k3, h);
        let k4 = deriv(eta + h, &y4)?;
        for j in 0..4 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let eta_next = if i + 1 == steps { eta1 } else { eta0 + h * (i + 1) as f64 };
        let state = to_state(eta_next, &y);
        let residual = state.wronskian_residual();
        if residual > WRONSKIAN_FAIL {
            return Err(Error::IntegrationFailure(residual));
        }
        states.push(state);
    }
    Ok(ModeTrajectory {
        k,
        model: model.clone(),
        states,
    })
}

fn add_scaled(y: &[f64; 4], dy: &[f64; 4], s: f64) -> [f64; 4] {
    [
        y[0] + s * dy[0],
        y[1] + s * dy[1],
        y[2] + s * dy[2],
        y[3] + s * dy[3],
    ]
}

fn rotate_state(state: &ModeState, theta: f64) -> ModeState {
    let (sin, cos) = theta.sin_cos();
    ModeState {
        f1: cos * state.f1 - sin * state.f2,
        f2: sin * state.f1 + cos * state.f2,
        g1: cos * state.g1 - sin * state.g2,
        g2: sin * state.g1 + cos * state.g2,
        eta: state.eta,
        k: state.k,
    }
}

/// Rotates a whole trajectory by the mode-phase freedom `f -> e^{i theta} f`
/// (which carries `(g1, g2)` along with `(f1, f2)` and preserves the
/// Wronskian exactly).
pub fn rotate_trajectory(traj: &ModeTrajectory, theta: f64) -> ModeTrajectory {
    ModeTrajectory {
        k: traj.k,
        model: traj.model.clone(),
        states: traj.states.iter().map(|s| rotate_state(s, theta)).collect(),
    }
}

/// Applies the global phase rotation minimizing `|f2| + |g1|` at the
/// reference time, separating the decaying branch from the growing one.
pub fn fix_phase(traj: &ModeTrajectory, reference_eta: f64) -> Result<ModeTrajectory> {
    let idx = traj.nearest_index(reference_eta)?;
    let s = traj.states[idx];
    let objective = |theta: f64| -> f64 {
        let r = rotate_state(&s, theta);
        r.f2.abs() + r.g1.abs()
    };
    // The objective has period pi. Coarse grid, then ternary refinement on
    // the bracketing interval.
    let grid = 8192usize;
    let step = std::f64::consts::PI / grid as f64;
    let mut best_theta = 0.0;
    let mut best_value = objective(0.0);
    for i in 1..grid {
        let theta = step * i as f64;
        let value = objective(theta);
        if value < best_value {
            best_value = value;
            best_theta = theta;
        }
    }
    let mut lo = best_theta - step;
    let mut hi = best_theta + step;
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if objective(m1) <= objective(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let theta = 0.5 * (lo + hi);
    Ok(rotate_trajectory(traj, theta))
}

/// Decaying- and growing-branch weights of one mode state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalityReport {
    /// |f2| + |g1|: the branch whose disappearance makes the mode look
    /// classical.
    pub decaying_branch: f64,
    /// |f1| + |g2|.
    pub growing_branch: f64,
    /// decaying / growing.
    pub ratio: f64,
    /// Classical squeezing slope p/y = g2/f1, when f1 is nondegenerate.
    pub p_over_y: Option<f64>,
}

pub fn classicality_diagnostics(state: &ModeState) -> ClassicalityReport {
    let decaying = state.f2.abs() + state.g1.abs();
    let growing = state.f1.abs() + state.g2.abs();
    let ratio = if growing > 0.0 {
        decaying / growing
    } else {
        f64::INFINITY
    };
    let p_over_y = if state.f1.abs() > 1e-12 {
        Some(state.g2 / state.f1)
    } else {
        None
    };
    ClassicalityReport {
        decaying_branch: decaying,
        growing_branch: growing,
        ratio,
        p_over_y,
    }
}

/// Monte Carlo comparison of the quantum mode statistics with the classical
/// random ensemble propagated by the same transfer matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub k: f64,
    pub eta: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub sample_var_y: f64,
    /// Quantum prediction |f_k|^2 = f1^2 + f2^2.
    pub quantum_var_y: f64,
    /// Standard error of the sample variance under the Gaussian model.
    pub var_y_standard_error: f64,
    pub sample_var_p: f64,
    pub quantum_var_p: f64,
    pub sample_corr: f64,
    /// Squeezing prediction (f1 g2 - f2 g1) / sqrt(var_y var_p).
    pub predicted_corr: f64,
}

const MIN_ENSEMBLE_SAMPLES: usize = 10_000;

/// Samples the vacuum Gaussian `(y, p)` with `Var(y) = 1/(2k)`,
/// `Var(p) = k/2`, `Cov = 0`, pushes each sample through the linear transfer
/// built from `(f1, f2, g1, g2)` at the grid point nearest `eta`, and
/// reports sampled vs quantum second moments. Seeded and reproducible.
pub fn classical_ensemble_compare(
    traj: &ModeTrajectory,
    eta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<EnsembleReport> {
    if n_samples < MIN_ENSEMBLE_SAMPLES {
        return Err(Error::InvalidSampleCount {
            got: n_samples,
            need: MIN_ENSEMBLE_SAMPLES,
        });
    }
    let state = traj.states[traj.nearest_index(eta)?];
    let k = traj.k;
    let sd_y0 = (1.0 / (2.0 * k)).sqrt();
    let sd_p0 = (k / 2.0).sqrt();
    let c_yy = (2.0 * k).sqrt() * state.f1;
    let c_yp = -(2.0 / k).sqrt() * state.f2;
    let c_pp = (2.0 / k).sqrt() * state.g1;
    let c_py = (2.0 * k).sqrt() * state.g2;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum_y, mut sum_yy) = (0.0f64, 0.0f64);
    let (mut sum_p, mut sum_pp) = (0.0f64, 0.0f64);
    let mut sum_yp = 0.0f64;
    for _ in 0..n_samples {
        let y0: f64 = sd_y0 * rng.sample::<f64, _>(StandardNormal);
        let p0: f64 = sd_p0 * rng.sample::<f64, _>(StandardNormal);
        let y = c_yy * y0 + c_yp * p0;
        let p = c_pp * p0 + c_py * y0;
        sum_y += y;
        sum_yy += y * y;
        sum_p += p;
        sum_pp += p * p;
        sum_yp += y * p;
    }
    let n = n_samples as f64;
    let var_y = (sum_yy - sum_y * sum_y / n) / (n - 1.0);
    let var_p = (sum_pp - sum_p * sum_p / n) / (n - 1.0);
    let cov = (sum_yp - sum_y * sum_p / n) / (n - 1.0);
    let quantum_var_y = state.f1 * state.f1 + state.f2 * state.f2;
    let quantum_var_p = state.g1 * state.g1 + state.g2 * state.g2;
    let predicted_corr =
        (state.f1 * state.g2 - state.f2 * state.g1) / (quantum_var_y * quantum_var_p).sqrt();
    Ok(EnsembleReport {
        k,
        eta: state.eta,
        n_samples,
        seed,
        sample_var_y: var_y,
        quantum_var_y,
        var_y_standard_error: quantum_var_y * (2.0 / (n - 1.0)).sqrt(),
        sample_var_p: var_p,
        quantum_var_p,
        sample_corr: cov / (var_y * var_p).sqrt(),
        predicted_corr,
    })
}

/// Exact plane-wave solution for Minkowski backgrounds with the vacuum
/// initial conditions at `eta0`.
pub fn minkowski_analytic(k: f64, eta0: f64, eta: f64) -> ModeState {
    let sqrt_2k = (2.0 * k).sqrt();
    let phase = k * (eta - eta0);
    ModeState {
        f1: phase.cos() / sqrt_2k,
        f2: -phase.sin() / sqrt_2k,
        g1: (k / 2.0).sqrt() * phase.cos(),
        g2: -(k / 2.0).sqrt() * phase.sin(),
        eta,
        k,
    }
}

/// Exact solution for de Sitter backgrounds: the vacuum initial data at a
/// finite `eta0` is matched onto the two Bunch-Davies branches
/// `u = e^{-ik eta}(1 - i/(k eta))/sqrt(2k)` and `u*`.
pub fn de_sitter_analytic(k: f64, eta0: f64, eta: f64) -> ModeState {
    let sqrt_2k = (2.0 * k).sqrt();
    let u = |eta: f64| -> Complex64 {
        Complex64::from_polar(1.0, -k * eta)
            * (Complex64::new(1.0, 0.0) - Complex64::new(0.0, 1.0) / (k * eta))
            / sqrt_2k
    };
    let u_prime = |eta: f64| -> Complex64 {
        Complex64::from_polar(1.0, -k * eta)
            * Complex64::new(-1.0 / eta, -k + 1.0 / (k * eta * eta))
            / sqrt_2k
    };
    let f0 = Complex64::new(1.0 / sqrt_2k, 0.0);
    let f0p = Complex64::new(0.0, -k / sqrt_2k);
    let (u0, u0p) = (u(eta0), u_prime(eta0));
    let (v0, v0p) = (u0.conj(), u0p.conj());
    let wronskian = u0 * v0p - u0p * v0;
    let c1 = (f0 * v0p - f0p * v0) / wronskian;
    let c2 = (f0p * u0 - f0 * u0p) / wronskian;
    let f = c1 * u(eta) + c2 * u(eta).conj();
    let fp = c1 * u_prime(eta) + c2 * u_prime(eta).conj();
    ModeState {
        f1: f.re,
        f2: f.im,
        g1: -fp.im,
        g2: fp.re,
        eta,
        k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_factor_terms_examples() {
        assert_eq!(
            scale_factor_terms(&ScaleFactorModel::Minkowski, 3.7).unwrap(),
            (1.0, 0.0)
        );
        let ds = ScaleFactorModel::de_sitter(1.0).unwrap();
        let (a, app) = scale_factor_terms(&ds, -1.0).unwrap();
        assert!((a - 1.0).abs() < 1e-15);
        assert!((app - 2.0).abs() < 1e-15);
        let ds2 = ScaleFactorModel::de_sitter(2.0).unwrap();
        let (a, app) = scale_factor_terms(&ds2, -0.5).unwrap();
        assert!((a - 1.0).abs() < 1e-15);
        assert!((app - 8.0).abs() < 1e-15);
        assert!(matches!(
            scale_factor_terms(&ds, 0.5),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn tabulated_model_reproduces_de_sitter_terms() {
        let etas: Vec<f64> = (0..2001).map(|i| -4.0 + 3.0 * i as f64 / 2000.0).collect();
        let a: Vec<f64> = etas.iter().map(|&e| -1.0 / e).collect();
        let tab = ScaleFactorModel::tabulated(etas, a).unwrap();
        let (a, app) = scale_factor_terms(&tab, -2.0).unwrap();
        assert!((a - 0.5).abs() < 1e-6);
        assert!((app - 2.0 / 4.0).abs() < 1e-3);
    }

    #[test]
    fn initial_state_is_vacuum_normalized() {
        let traj = evolve_mode(2.0, &ScaleFactorModel::Minkowski, 0.0, 1.0, 100).unwrap();
        let s = traj.states[0];
        assert_eq!(s.f1, 1.0 / 2.0);
        assert_eq!(s.f2, 0.0);
        assert_eq!(s.g1, 1.0);
        assert_eq!(s.g2, 0.0);
        assert_eq!(s.wronskian(), 0.5);
        assert_eq!(commutator_coefficient(&s), 1.0);
    }

    #[test]
    fn minkowski_matches_plane_wave() {
        let k = 1.0;
        let eta1 = std::f64::consts::PI;
        let traj = evolve_mode(k, &ScaleFactorModel::Minkowski, 0.0, eta1, 10_000).unwrap();
        let last = traj.states.last().unwrap();
        let exact = minkowski_analytic(k, 0.0, eta1);
        assert!((last.f1 - exact.f1).abs() < 1e-8);
        assert!((last.f2 - exact.f2).abs() < 1e-8);
        assert!((last.f1 + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        assert!(last.f2.abs() < 1e-8);
        for (i, s) in traj.states.iter().enumerate().step_by(500) {
            let exact = minkowski_analytic(k, 0.0, s.eta);
            assert!(
                (s.f1 - exact.f1).abs() < 1e-8 && (s.g2 - exact.g2).abs() < 1e-8,
                "mismatch at node {i}"
            );
        }
    }

    #[test]
    fn de_sitter_matches_analytic_solution() {
        let k = 1.0;
        let model = ScaleFactorModel::de_sitter(1.0).unwrap();
        let traj = evolve_mode(k, &model, -20.0, -0.01, 50_000).unwrap();
        for s in traj.states.iter().step_by(1000) {
            let exact = de_sitter_analytic(k, -20.0, s.eta);
            let mag = (exact.f1 * exact.f1 + exact.f2 * exact.f2).sqrt();
            let err = ((s.f1 - exact.f1).powi(2) + (s.f2 - exact.f2).powi(2)).sqrt() / mag;
            assert!(err < 1e-6, "relative error {err:e} at eta = {}", s.eta);
        }
    }

    #[test]
    fn de_sitter_mode_grows_superhorizon() {
        let model = ScaleFactorModel::de_sitter(1.0).unwrap();
        let traj = evolve_mode(1.0, &model, -20.0, -0.01, 20_000).unwrap();
        let early = traj.states[0];
        let late = traj.states.last().unwrap();
        let mag = |s: &ModeState| (s.f1 * s.f1 + s.f2 * s.f2).sqrt();
        // |f| ~ 1/|k eta| superhorizon.
        assert!(mag(late) / mag(&early) > 50.0);
        assert!((mag(late) * 0.01 * (2.0f64).sqrt() - 1.0).abs() < 0.05);
    }

    #[test]
    fn wronskian_conserved_along_trajectories() {
        let model = ScaleFactorModel::de_sitter(1.0).unwrap();
        let traj = evolve_mode(1.0, &model, -20.0, -0.01, 50_000).unwrap();
        assert!(traj.max_wronskian_residual() <= 1e-9);
        for s in traj.states.iter().step_by(700) {
            assert!((commutator_coefficient(s) - 1.0).abs() <= 2e-9);
        }
    }

    #[test]
    fn broken_invariant_is_visible() {
        // Artificially zeroing components breaks the commutator coefficient.
        let s = ModeState {
            f1: 1.0,
            f2: 0.0,
            g1: 0.0,
            g2: 0.0,
            eta: 0.0,
            k: 1.0,
        };
        assert!((commutator_coefficient(&s) - 1.0).abs() > 0.9);
    }

    #[test]
    fn fix_phase_is_idempotent_and_rotation_invariant() {
        let model = ScaleFactorModel::de_sitter(1.0).unwrap();
        let traj = evolve_mode(1.0, &model, -20.0, -0.05, 20_000).unwrap();
        let fixed = fix_phase(&traj, -0.05).unwrap();
        let fixed_again = fix_phase(&fixed, -0.05).unwrap();
        let pre_rotated = fix_phase(&rotate_trajectory(&traj, 0.83), -0.05).unwrap();
        let last = fixed.states.last().unwrap();
        let ratio = |t: &ModeTrajectory| {
            let s = t.states.last().unwrap();
            classicality_diagnostics(s).ratio
        };
        assert!((ratio(&fixed) - ratio(&fixed_again)).abs() < 1e-10);
        assert!((ratio(&fixed) - ratio(&pre_rotated)).abs() < 1e-10);
        let last_again = fixed_again.states.last().unwrap();
        assert!((last.f1.abs() - last_again.f1.abs()).abs() < 1e-9);
        // Wronskian untouched by the rotations.
        assert!(fixed.max_wronskian_residual() <= 1.1 * traj.max_wronskian_residual() + 1e-12);
    }

    #[test]
    fn phase_fixed_de_sitter_ratio_collapses_superhorizon() {
        let model = ScaleFactorModel::de_sitter(1.0).unwrap();
        let traj = evolve_mode(1.0, &model, -20.0, -0.01, 40_000).unwrap();
        let fixed = fix_phase(&traj, -0.01).unwrap();
        let last = fixed.states.last().unwrap();
        let report = classicality_diagnostics(last);
        assert!(report.ratio < 1e-3, "ratio = {:e}", report.ratio);
        // Ratio decreases toward eta -> 0 on the superhorizon stretch.
        let ratio_at = |eta: f64| {
            let idx = fixed.nearest_index(eta).unwrap();
            classicality_diagnostics(&fixed.states[idx]).ratio
        };
        let (r1, r2, r3) = (ratio_at(-1.0), ratio_at(-0.1), ratio_at(-0.01));
        assert!(r1 > r2 && r2 > r3, "ratios {r1:e} {r2:e} {r3:e}");
    }

    #[test]
    fn minkowski_ratio_stays_away_from_zero() {
        let traj = evolve_mode(1.0, &ScaleFactorModel::Minkowski, 0.0, 20.0, 20_000).unwrap();
        let fixed = fix_phase(&traj, 20.0).unwrap();
        for s in fixed.states.iter().step_by(500) {
            let report = classicality_diagnostics(s);
            assert!(report.ratio > 0.1, "ratio {} at eta {}", report.ratio, s.eta);
        }
    }

    #[test]
    fn initial_diagnostics_match_construction() {
        let traj = evolve_mode(2.0, &ScaleFactorModel::Minkowski, 0.0, 1.0, 100).unwrap();
        let report = classicality_diagnostics(&traj.states[0]);
        assert_eq!(report.decaying_branch, 1.0); // sqrt(k/2) with k = 2
        assert_eq!(report.growing_branch, 0.5);
        assert_eq!(report.p_over_y, Some(0.0));
    }

    #[test]
    fn ensemble_identity_transfer_at_eta0() {
        let k = 1.0;
        let traj = evolve_mode(k, &ScaleFactorModel::Minkowski, 0.0, 1.0, 100).unwrap();
        let report = classical_ensemble_compare(&traj, 0.0, 20_000, 11).unwrap();
        assert!((report.quantum_var_y - 1.0 / (2.0 * k)).abs() < 1e-15);
        assert!((report.sample_var_y - report.quantum_var_y).abs() < 4.0 * report.var_y_standard_error);
        assert!(report.sample_corr.abs() < 0.03);
        assert!((report.predicted_corr).abs() < 1e-12);
    }

    #[test]
    fn minkowski_variance_is_constant() {
        let k = 1.0;
        let traj = evolve_mode(k, &ScaleFactorModel::Minkowski, 0.0, 15.0, 15_000).unwrap();
        for &eta in &[3.0, 9.0, 15.0] {
            let report = classical_ensemble_compare(&traj, eta, 50_000, 3).unwrap();
            assert!((report.quantum_var_y - 0.5).abs() < 1e-7);
            assert!((report.sample_var_y - 0.5).abs() < 4.0 * report.var_y_standard_error);
        }
    }

    #[test]
    fn superhorizon_ensemble_is_squeezed() {
        let model = ScaleFactorModel::de_sitter(1.0).unwrap();
        let traj = evolve_mode(1.0, &model, -20.0, -0.01, 40_000).unwrap();
        let report = classical_ensemble_compare(&traj, -0.01, 100_000, 42).unwrap();
        assert!(report.predicted_corr.abs() > 0.999);
        assert!(report.sample_corr.abs() > 0.999);
        assert!((report.sample_var_y - report.quantum_var_y).abs() < 4.0 * report.var_y_standard_error);
    }

    #[test]
    fn ensemble_rejects_small_samples() {
        let traj = evolve_mode(1.0, &ScaleFactorModel::Minkowski, 0.0, 1.0, 100).unwrap();
        assert!(matches!(
            classical_ensemble_compare(&traj, 0.5, 100, 1),
            Err(Error::InvalidSampleCount { .. })
        ));
    }

    #[test]
    fn evolve_mode_validates_inputs() {
        let model = ScaleFactorModel::de_sitter(1.0).unwrap();
        assert!(evolve_mode(0.0, &model, -10.0, -1.0, 1000).is_err());
        assert!(evolve_mode(1.0, &model, -10.0, -1.0, 10).is_err());
        assert!(matches!(
            evolve_mode(1.0, &model, -10.0, 1.0, 1000),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn coarse_grids_fail_loudly() {
        let model = ScaleFactorModel::de_sitter(1.0).unwrap();
        assert!(matches!(
            evolve_mode(1.0, &model, -20.0, -0.01, 100),
            Err(Error::IntegrationFailure(_))
        ));
    }

    #[test]
    fn degenerate_amplitude_has_no_slope() {
        let s = ModeState {
            f1: 0.0,
            f2: 0.5,
            g1: 1.0,
            g2: 0.3,
            eta: 0.0,
            k: 1.0,
        };
        assert_eq!(classicality_diagnostics(&s).p_over_y, None);
    }
}
