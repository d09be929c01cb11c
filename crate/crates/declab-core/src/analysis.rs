//! Turns expectation-value series into verdicts: decoherence time,
//! decohering/oscillatory classification, asymptotic pointer weights,
//! pointer-basis checks and dynamical-invariance detection.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::closedform::{coherence_kernel_generalized, gaussian_decay_rate, log_coherence_magnitude};
use crate::error::{Error, Result};
use crate::model::{
    build_hamiltonian, configuration_label, Decomposition, DiagonalWeights, ExpectationSeries,
    ModelSpec, Spin,
};
use crate::oracle::{evolve, product_state, purity, reduced_density};

/// Qualitative behavior of a non-diagonal expectation-value contribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsClass {
    Decohering,
    Oscillatory,
    Frozen,
    Indeterminate,
}

impl DynamicsClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            DynamicsClass::Decohering => "DECOHERING",
            DynamicsClass::Oscillatory => "OSCILLATORY",
            DynamicsClass::Frozen => "FROZEN",
            DynamicsClass::Indeterminate => "INDETERMINATE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeStats {
    pub mean_tail: f64,
    pub max_tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsVerdict {
    pub class: DynamicsClass,
    pub t_d: Option<f64>,
    pub recurrence_time: Option<f64>,
    pub envelope_stats: EnvelopeStats,
}

/// Numeric criteria separating the qualitative regimes. The defaults are
/// desk-scale choices; all are configurable from the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisThresholds {
    /// Envelope level defining the decoherence time (first crossing).
    pub decoherence_threshold: f64,
    /// Tail mean below which the envelope counts as decohered.
    pub tol_dec: f64,
    /// Tail mean above which the envelope counts as oscillatory.
    pub tol_osc: f64,
}

impl Default for AnalysisThresholds {
    fn default() -> Self {
        AnalysisThresholds {
            decoherence_threshold: (-1.0f64).exp(),
            tol_dec: 0.01,
            tol_osc: 0.1,
        }
    }
}

/// Default scan window: `20 sqrt(2/Gamma)` in the Gaussian regime, else four
/// periods of the slowest coupling.
pub fn default_scan_window(env: &[crate::model::SpinFactor], g: &[f64]) -> Result<f64> {
    let gamma = gaussian_decay_rate(env, g)?;
    if gamma > 0.0 {
        Ok(20.0 * (2.0 / gamma).sqrt())
    } else {
        let g_min = g
            .iter()
            .map(|x| x.abs())
            .filter(|&x| x > 0.0)
            .fold(f64::INFINITY, f64::min);
        let g_min = if g_min.is_finite() { g_min } else { 1.0 };
        Ok(4.0 * std::f64::consts::PI / g_min)
    }
}

/// Smallest `t` in `(0, t_max]` at which the coherence magnitude `|r(t)|`
/// falls to `threshold`, located by a coarse scan plus bisection on the
/// first crossing.
pub fn estimate_decoherence_time(
    env: &[crate::model::SpinFactor],
    g: &[f64],
    threshold: f64,
    t_max: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&threshold) || threshold == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} must lie in (0, 1)"
        )));
    }
    if t_max <= 0.0 || t_max.is_nan() {
        return Err(Error::InvalidArgument(format!("t_max {t_max} must be positive")));
    }
    let log_threshold = threshold.ln();
    let magnitude_ln = |t: f64| log_coherence_magnitude(env, g, t);
    let scan_points = 4096usize;
    let mut t_lo = 0.0f64;
    let mut t_hi = None;
    for i in 1..=scan_points {
        let t = t_max * i as f64 / scan_points as f64;
        if magnitude_ln(t)? <= log_threshold {
            t_hi = Some(t);
            break;
        }
        t_lo = t;
    }
    let mut t_hi = t_hi.ok_or(Error::NoCrossing)?;
    for _ in 0..80 {
        let mid = 0.5 * (t_lo + t_hi);
        if magnitude_ln(mid)? <= log_threshold {
            t_hi = mid;
        } else {
            t_lo = mid;
        }
    }
    Ok(0.5 * (t_lo + t_hi))
}

/// First time at which the normalized envelope of a series crosses below
/// `threshold`, linearly interpolated between grid points.
pub fn estimate_decoherence_time_series(
    series: &ExpectationSeries,
    threshold: f64,
) -> Result<f64> {
    let envelope = series.envelope().ok_or(Error::NoCrossing)?;
    for i in 1..envelope.len() {
        if envelope[i] <= threshold && envelope[i - 1] > threshold {
            let (e0, e1) = (envelope[i - 1], envelope[i]);
            let (t0, t1) = (series.times[i - 1], series.times[i]);
            let frac = if (e0 - e1).abs() > 0.0 {
                (e0 - threshold) / (e0 - e1)
            } else {
                1.0
            };
            return Ok(t0 + frac * (t1 - t0));
        }
    }
    Err(Error::NoCrossing)
}

fn first_recurrence(times: &[f64], envelope: &[f64], from: usize) -> Option<f64> {
    // Next local maximum of the envelope above 0.5 after the first crossing.
    for i in (from + 1).max(1)..envelope.len().saturating_sub(1) {
        if envelope[i] > 0.5 && envelope[i] >= envelope[i - 1] && envelope[i] >= envelope[i + 1] {
            return Some(times[i]);
        }
    }
    None
}

/// Classifies the non-diagonal contribution of a series over a window.
///
/// The envelope is `e(t) = |z(t)| / |z(t_lo)|`, so the verdict is invariant
/// under rescaling the observable. DECOHERING requires the last-quarter mean
/// below `tol_dec` and the last-quarter max below `10 tol_dec`; OSCILLATORY
/// requires the mean above `tol_osc`; a unit envelope (or an identically
/// zero `z`) is FROZEN; anything else is INDETERMINATE.
pub fn classify_dynamics(
    series: &ExpectationSeries,
    window: (f64, f64),
    thresholds: &AnalysisThresholds,
) -> Result<DynamicsVerdict> {
    let (t_lo, t_hi) = window;
    let idx: Vec<usize> = (0..series.len())
        .filter(|&i| series.times[i] >= t_lo && series.times[i] <= t_hi)
        .collect();
    if idx.len() < 100 {
        return Err(Error::InsufficientData {
            got: idx.len(),
            need: 100,
        });
    }
    let z0 = series.nondiag_part[idx[0]].norm();
    if z0 < 1e-300 {
        return Ok(DynamicsVerdict {
            class: DynamicsClass::Frozen,
            t_d: None,
            recurrence_time: None,
            envelope_stats: EnvelopeStats {
                mean_tail: 0.0,
                max_tail: 0.0,
            },
        });
    }
    let times: Vec<f64> = idx.iter().map(|&i| series.times[i]).collect();
    let envelope: Vec<f64> = idx
        .iter()
        .map(|&i| series.nondiag_part[i].norm() / z0)
        .collect();
    let tail_start = 3 * envelope.len() / 4;
    let tail = &envelope[tail_start..];
    let mean_tail = tail.iter().sum::<f64>() / tail.len() as f64;
    let max_tail = tail.iter().copied().fold(0.0, f64::max);
    let stats = EnvelopeStats { mean_tail, max_tail };

    if envelope.iter().all(|e| (e - 1.0).abs() <= 1e-9) {
        return Ok(DynamicsVerdict {
            class: DynamicsClass::Frozen,
            t_d: None,
            recurrence_time: None,
            envelope_stats: stats,
        });
    }
    if mean_tail < thresholds.tol_dec && max_tail < 10.0 * thresholds.tol_dec {
        let threshold = thresholds.decoherence_threshold;
        let mut t_d = None;
        let mut crossing_idx = 0;
        for i in 1..envelope.len() {
            if envelope[i] <= threshold && envelope[i - 1] > threshold {
                let (e0, e1) = (envelope[i - 1], envelope[i]);
                let frac = if (e0 - e1).abs() > 0.0 {
                    (e0 - threshold) / (e0 - e1)
                } else {
                    1.0
                };
                t_d = Some(times[i - 1] + frac * (times[i] - times[i - 1]));
                crossing_idx = i;
                break;
            }
        }
        // A tail mean below tol_dec < threshold guarantees a crossing.
        let t_d = t_d.ok_or(Error::NoCrossing)?;
        return Ok(DynamicsVerdict {
            class: DynamicsClass::Decohering,
            t_d: Some(t_d.max(f64::MIN_POSITIVE)),
            recurrence_time: first_recurrence(&times, &envelope, crossing_idx),
            envelope_stats: stats,
        });
    }
    if mean_tail > thresholds.tol_osc {
        return Ok(DynamicsVerdict {
            class: DynamicsClass::Oscillatory,
            t_d: None,
            recurrence_time: first_recurrence(&times, &envelope, 0),
            envelope_stats: stats,
        });
    }
    Ok(DynamicsVerdict {
        class: DynamicsClass::Indeterminate,
        t_d: None,
        recurrence_time: None,
        envelope_stats: stats,
    })
}

/// Times suitable for asymptotic sampling: well past the estimated
/// decoherence time. Propagates `NoCrossing` when no decoherence time
/// exists.
pub fn asymptotic_sample_times(model: &ModelSpec, count: usize) -> Result<Vec<f64>> {
    let window = default_scan_window(model.b_side(), model.couplings())?;
    let t_d = estimate_decoherence_time(
        model.b_side(),
        model.couplings(),
        (-1.0f64).exp(),
        window,
    )?;
    Ok((0..count.max(1))
        .map(|i| t_d * (5.0 + 0.37 * i as f64))
        .collect())
}

/// Time-averaged diagonal of the reduced density matrix in the pointer
/// basis, labelled by configuration.
pub fn asymptotic_weights(
    model: &ModelSpec,
    decomposition: &Decomposition,
    samples: &[f64],
) -> Result<DiagonalWeights> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no sample times supplied".into()));
    }
    let h = build_hamiltonian(model);
    let psi0 = product_state(model)?;
    let sys = decomposition.system_sites();
    let dim = decomposition.system_dim();
    let mut acc = vec![0.0f64; dim];
    for &t in samples {
        let rho = reduced_density(&evolve(&psi0, &h, t)?, sys)?;
        for (i, slot) in acc.iter_mut().enumerate() {
            *slot += rho.entry(i, i).re;
        }
    }
    let inv = 1.0 / samples.len() as f64;
    let weights: Vec<f64> = acc.iter().map(|w| w * inv).collect();
    let labels: Vec<String> = (0..dim)
        .map(|i| configuration_label(i, sys.len()))
        .collect();
    DiagonalWeights::new(weights, labels)
}

/// Outcome of a pointer-basis check over a decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerBasisReport {
    /// Max drift of any diagonal entry relative to its t = t0 value.
    pub max_diagonal_drift: f64,
    /// Max deviation of off-diagonal magnitudes from the predicted
    /// coherence kernels; `None` when no prediction applies (rotated basis
    /// or a system straddling both sides).
    pub max_offdiag_deviation: Option<f64>,
    /// Whether the basis behaves as a pointer basis (diagonal constant).
    pub is_pointer_basis: bool,
}

const POINTER_DIAG_TOL: f64 = 1e-10;

fn spin_sign(config: usize, pos: usize, len: usize) -> f64 {
    Spin::from_bit((config >> (len - 1 - pos)) & 1).sign()
}

/// Predicted off-diagonal magnitude of the reduced state between two
/// pointer configurations, for systems lying wholly on one side.
fn predicted_offdiag_magnitude(
    model: &ModelSpec,
    sys: &[usize],
    p: usize,
    q: usize,
    t: f64,
) -> Result<f64> {
    let len = sys.len();
    let mut amp_mag = 1.0f64;
    for (j, &site) in sys.iter().enumerate() {
        let factor = model.factor(site)?;
        let p_amp = factor.amp(Spin::from_bit((p >> (len - 1 - j)) & 1));
        let q_amp = factor.amp(Spin::from_bit((q >> (len - 1 - j)) & 1));
        amp_mag *= p_amp.norm() * q_amp.norm();
    }
    let all_a = sys.iter().all(|&s| model.is_a_site(s));
    let kernel_mag = if all_a {
        let delta = (q.count_ones() as i64) - (p.count_ones() as i64);
        coherence_kernel_generalized(delta, model.b_side(), model.couplings(), t)?.norm()
    } else {
        // System wholly on the B side: every A factor carries the phase
        // angle theta = 1/2 sum_k g_k (sigma_k(p) - sigma_k(q)).
        let mut theta = 0.0;
        for (j, &site) in sys.iter().enumerate() {
            let g_k = model.couplings()[site - model.m()];
            theta += 0.5 * g_k * (spin_sign(p, j, len) - spin_sign(q, j, len));
        }
        let mut acc = Complex64::new(1.0, 0.0);
        let phase = Complex64::from_polar(1.0, -theta * t);
        for factor in model.a_side() {
            let (w, v) = factor.probabilities();
            acc *= w * phase + v * phase.conj();
        }
        acc.norm()
    };
    Ok(amp_mag * kernel_mag)
}

/// Verifies that in the chosen single-site basis (default sigma_z) the
/// reduced state's diagonal is constant in time, and — in the pointer basis,
/// for single-side systems — that off-diagonal magnitudes follow the
/// predicted coherence kernels.
pub fn pointer_basis_check(
    model: &ModelSpec,
    decomposition: &Decomposition,
    t_grid: &[f64],
    site_basis: Option<&Matrix2<Complex64>>,
) -> Result<PointerBasisReport> {
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    let h = build_hamiltonian(model);
    let psi0 = product_state(model)?;
    let sys_set = decomposition.system_sites();
    let sys: Vec<usize> = sys_set.iter().copied().collect();
    let dim = decomposition.system_dim();

    let rotation = site_basis.map(|u| {
        let u_dyn = DMatrix::from_fn(2, 2, |i, j| u[(i, j)]);
        let mut full = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for _ in 0..sys.len() {
            full = full.kronecker(&u_dyn);
        }
        full
    });

    let pure_side = sys.iter().all(|&s| model.is_a_site(s))
        || sys.iter().all(|&s| !model.is_a_site(s));
    let predict = site_basis.is_none() && pure_side;

    let mut base_diag: Option<Vec<f64>> = None;
    let mut max_drift = 0.0f64;
    let mut max_offdiag_dev = 0.0f64;
    for &t in t_grid {
        let rho = reduced_density(&evolve(&psi0, &h, t)?, sys_set)?;
        let mat = match &rotation {
            Some(u) => u.adjoint() * rho.matrix() * u,
            None => rho.matrix().clone(),
        };
        let diag: Vec<f64> = (0..dim).map(|i| mat[(i, i)].re).collect();
        match &base_diag {
            None => base_diag = Some(diag),
            Some(base) => {
                for (a, b) in base.iter().zip(&diag) {
                    max_drift = max_drift.max((a - b).abs());
                }
            }
        }
        if predict {
            for p in 0..dim {
                for q in (p + 1)..dim {
                    let predicted = predicted_offdiag_magnitude(model, &sys, p, q, t)?;
                    max_offdiag_dev = max_offdiag_dev.max((mat[(p, q)].norm() - predicted).abs());
                }
            }
        }
    }
    Ok(PointerBasisReport {
        max_diagonal_drift: max_drift,
        max_offdiag_deviation: predict.then_some(max_offdiag_dev),
        is_pointer_basis: max_drift <= POINTER_DIAG_TOL,
    })
}

/// Outcome of the dynamical-invariance check of a decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    /// True iff no nonzero coupling crosses the cut.
    pub invariant: bool,
    /// Oracle evidence when invariant: max purity drift of the system-side
    /// reduced state over the test grid.
    pub purity_drift_system: Option<f64>,
    /// Same for the environment side.
    pub purity_drift_environment: Option<f64>,
}

/// A decomposition is dynamically invariant iff every coupled pair of sites
/// lies on one side of the cut; its subsystems then evolve unitarily and
/// their reduced-state purities stay constant.
pub fn check_dynamical_invariance(
    model: &ModelSpec,
    decomposition: &Decomposition,
) -> Result<InvarianceReport> {
    let sys = decomposition.system_sites();
    let mut invariant = true;
    'outer: for i in 0..model.m() {
        for (k, &g_k) in model.couplings().iter().enumerate() {
            if g_k != 0.0 && sys.contains(&i) != sys.contains(&(model.m() + k)) {
                invariant = false;
                break 'outer;
            }
        }
    }
    if !invariant {
        return Ok(InvarianceReport {
            invariant: false,
            purity_drift_system: None,
            purity_drift_environment: None,
        });
    }
    let h = build_hamiltonian(model);
    let psi0 = product_state(model)?;
    let times: Vec<f64> = (0..26).map(|i| i as f64 * 0.4).collect();
    let mut drift_sys = 0.0f64;
    let mut drift_env = 0.0f64;
    let mut base: Option<(f64, f64)> = None;
    let env_traceable = decomposition.environment_sites().len() <= crate::oracle::MAX_REDUCED_SITES;
    for &t in &times {
        let psi = evolve(&psi0, &h, t)?;
        let p_sys = purity(&reduced_density(&psi, sys)?);
        // For a pure global state both reduced purities coincide.
        let p_env = if env_traceable {
            purity(&reduced_density(&psi, decomposition.environment_sites())?)
        } else {
            p_sys
        };
        match base {
            None => base = Some((p_sys, p_env)),
            Some((b_sys, b_env)) => {
                drift_sys = drift_sys.max((p_sys - b_sys).abs());
                drift_env = drift_env.max((p_env - b_env).abs());
            }
        }
    }
    Ok(InvarianceReport {
        invariant: true,
        purity_drift_system: Some(drift_sys),
        purity_drift_environment: Some(drift_env),
    })
}
