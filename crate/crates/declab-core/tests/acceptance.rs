//! Acceptance suite: one test per criterion, each printing a PASS line on
//! success (run with `--nocapture` to see them). Tolerances are pinned in
//! the assertions.

use std::collections::BTreeSet;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use declab_core::analysis::{
    check_dynamical_invariance, classify_dynamics, default_scan_window,
    estimate_decoherence_time, AnalysisThresholds, DynamicsClass,
};
use declab_core::closedform::{
    self, expectation_env_particle, expectation_traditional, gaussian_decay_rate,
    log_coherence_magnitude, single_site_coherence,
};
use declab_core::cosmo::{
    classical_ensemble_compare, classicality_diagnostics, commutator_coefficient,
    de_sitter_analytic, evolve_mode, fix_phase, minkowski_analytic, ScaleFactorModel,
};
use declab_core::model::{
    build_hamiltonian, embed_observable, pauli_x, Decomposition, DensityMatrix, LocalObservable,
    ModelSpec, RelevantObservable, SpinFactor,
};
use declab_core::oracle::{
    self, coarse_grained_state, evolve, expectation, product_state, purity, reduced_density,
    system_observable_matrix, trace_out_environment,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn grid(t_max: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| t_max * i as f64 / (points - 1) as f64)
        .collect()
}

fn random_factor(rng: &mut ChaCha8Rng) -> SpinFactor {
    loop {
        let f = SpinFactor::new(
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        );
        if let Ok(f) = f {
            return f;
        }
    }
}

fn random_model(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ModelSpec {
    let a: Vec<SpinFactor> = (0..m).map(|_| random_factor(rng)).collect();
    let b: Vec<SpinFactor> = (0..n).map(|_| random_factor(rng)).collect();
    let g: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    ModelSpec::new(a, b, g).unwrap()
}

fn balanced_model(m: usize, n: usize, couplings_seed: u64) -> ModelSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(couplings_seed);
    let g: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    ModelSpec::new(
        vec![SpinFactor::balanced(); m],
        vec![SpinFactor::balanced(); n],
        g,
    )
    .unwrap()
}

fn sigma_x_on(model: &ModelSpec, sites: &[usize]) -> RelevantObservable {
    let locals: Vec<LocalObservable> = sites
        .iter()
        .map(|&s| LocalObservable::new(s, pauli_x()).unwrap())
        .collect();
    embed_observable(model, &locals).unwrap()
}

fn assert_series_agreement(
    model: &ModelSpec,
    system: Vec<usize>,
    obs: &RelevantObservable,
    times: &[f64],
    tol: f64,
    label: &str,
) -> f64 {
    let dec = Decomposition::new(system, model.num_sites()).unwrap();
    let fast = closedform::expectation_series(model, &dec, obs, times).unwrap();
    let exact = oracle::expectation_series(model, &dec, obs, times).unwrap();
    let mut max_err = 0.0f64;
    for i in 0..times.len() {
        max_err = max_err.max((fast.total[i] - exact.total[i]).abs());
        max_err = max_err.max((fast.nondiag_part[i] - exact.nondiag_part[i]).norm());
    }
    assert!(
        max_err < tol,
        "{label}: closed form deviates from oracle by {max_err:e}"
    );
    max_err
}

#[test]
fn criterion_01_oracle_closedform_equivalence() {
    let times = grid(8.0, 200);
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = 1 + (seed % 3) as usize;
        let n_max = 14 - m;
        let n = 2 + (rng.gen_range(0..(n_max - 1) as u64)) as usize;
        let model = random_model(&mut rng, m, n);

        // Single observed A particle.
        let obs_a = sigma_x_on(&model, &[0]);
        worst = worst.max(assert_series_agreement(
            &model,
            vec![0],
            &obs_a,
            &times,
            1e-10,
            &format!("seed {seed} single-A"),
        ));

        // Single observed bath particle.
        let b_site = m + (seed as usize % n);
        let obs_b = sigma_x_on(&model, &[b_site]);
        worst = worst.max(assert_series_agreement(
            &model,
            vec![b_site],
            &obs_b,
            &times,
            1e-10,
            &format!("seed {seed} single-B"),
        ));

        if m == 1 {
            // The traditional-model point forms, checked directly.
            let dec = Decomposition::new([0], model.num_sites()).unwrap();
            let exact = oracle::expectation_series(&model, &dec, &obs_a, &times).unwrap();
            let j = seed as usize % n;
            let dec_b = Decomposition::new([1 + j], model.num_sites()).unwrap();
            let obs_j = sigma_x_on(&model, &[1 + j]);
            let exact_b = oracle::expectation_series(&model, &dec_b, &obs_j, &times).unwrap();
            for &i in &[0usize, 57, 143, 199] {
                let p = expectation_traditional(
                    &model.a_side()[0],
                    &pauli_x(),
                    model.b_side(),
                    model.couplings(),
                    times[i],
                )
                .unwrap();
                assert!((p.total() - exact.total[i]).abs() < 1e-10);
                let q = expectation_env_particle(&model, j, &pauli_x(), times[i]).unwrap();
                assert!((q.total() - exact_b.total[i]).abs() < 1e-10);
            }
        } else {
            // Product observable over the whole A side.
            let a_sites: Vec<usize> = (0..m).collect();
            let obs_aa = sigma_x_on(&model, &a_sites);
            worst = worst.max(assert_series_agreement(
                &model,
                a_sites,
                &obs_aa,
                &times,
                1e-10,
                &format!("seed {seed} whole-A"),
            ));
        }
    }
    println!("criterion 1 (oracle/closed-form equivalence, 50 models, max |err| = {worst:.2e}): PASS");
}

#[test]
fn criterion_02_relevant_observable_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for case in 0..100 {
        let m = 1 + (case % 2);
        let n = 1 + (case % 6);
        let model = random_model(&mut rng, m, n);
        let h = build_hamiltonian(&model);
        let t = rng.gen_range(0.0..10.0);
        let psi = evolve(&product_state(&model).unwrap(), &h, t).unwrap();
        let site = rng.gen_range(0..model.num_sites());
        let diag_a = rng.gen_range(-1.0..1.0);
        let diag_b = rng.gen_range(-1.0..1.0);
        let off = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let matrix = Matrix2::new(c(diag_a, 0.0), off, off.conj(), c(diag_b, 0.0));
        let obs = embed_observable(&model, &[LocalObservable::new(site, matrix).unwrap()]).unwrap();
        let keep = BTreeSet::from([site]);
        let via_state = expectation(&psi, &obs).unwrap();
        let rho = reduced_density(&psi, &keep).unwrap();
        let obs_mat = system_observable_matrix(&obs, &keep).unwrap();
        let via_reduced = (rho.matrix() * obs_mat).trace();
        assert!(
            (via_state - via_reduced.re).abs() < 1e-12,
            "case {case}: {via_state} vs {via_reduced}"
        );
        assert!(via_reduced.im.abs() < 1e-12);
    }
    println!("criterion 2 (full-state vs reduced-trace expectation, 100 cases): PASS");
}

#[test]
fn criterion_03_coarse_grained_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for &env_dim in &[1usize, 2, 3, 5, 8, 16, 32, 64] {
        for _ in 0..4 {
            let sys_dim = rng.gen_range(2..=8);
            let raw: Vec<f64> = (0..sys_dim).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
            let rho = DensityMatrix::from_diagonal(&probs).unwrap();
            let cg = coarse_grained_state(&rho, env_dim).unwrap();
            let back = trace_out_environment(&cg, sys_dim, env_dim).unwrap();
            for i in 0..sys_dim {
                for j in 0..sys_dim {
                    assert!(
                        (back.entry(i, j) - rho.entry(i, j)).norm() < 1e-14,
                        "entry ({i},{j}) deviates for env_dim {env_dim}"
                    );
                }
            }
        }
    }
    println!("criterion 3 (coarse-grained state round trip, env dims to 64): PASS");
}

#[test]
fn criterion_04_traditional_model_verdicts() {
    let model = balanced_model(1, 20, 7);
    let thresholds = AnalysisThresholds::default();

    // Decomposition 1: the observed particle decoheres...
    let dec1 = Decomposition::new([0], model.num_sites()).unwrap();
    let obs1 = sigma_x_on(&model, &[0]);
    let times = grid(50.0, 400);
    let series = closedform::expectation_series(&model, &dec1, &obs1, &times).unwrap();
    let verdict = classify_dynamics(&series, (0.0, 50.0), &thresholds).unwrap();
    assert_eq!(verdict.class, DynamicsClass::Decohering);

    // ...with a decoherence time matching the Gaussian-envelope prediction.
    let gamma = gaussian_decay_rate(model.b_side(), model.couplings()).unwrap();
    let window = default_scan_window(model.b_side(), model.couplings()).unwrap();
    let t_d = estimate_decoherence_time(
        model.b_side(),
        model.couplings(),
        thresholds.decoherence_threshold,
        window,
    )
    .unwrap();
    let predicted = (2.0 / gamma).sqrt();
    let rel = (t_d - predicted).abs() / predicted;
    assert!(rel < 0.1, "t_d = {t_d}, Gaussian prediction {predicted}, rel {rel}");

    // Decomposition 2: an observed bath particle keeps oscillating.
    let dec2 = Decomposition::new([4], model.num_sites()).unwrap();
    let obs2 = sigma_x_on(&model, &[4]);
    let series = closedform::expectation_series(&model, &dec2, &obs2, &times).unwrap();
    let verdict2 = classify_dynamics(&series, (0.0, 50.0), &thresholds).unwrap();
    assert_eq!(verdict2.class, DynamicsClass::Oscillatory);

    println!(
        "criterion 4 (N=20: dec1 DECOHERING, t_d {t_d:.4} vs {predicted:.4}; dec2 OSCILLATORY): PASS"
    );
}

#[test]
fn criterion_05_relativity_of_decoherence() {
    // One model, one run; the verdict depends on the decomposition. At
    // N = 8 the single-particle envelope floor is (2/pi)^8 ~ 0.027, so the
    // decohered-tail tolerance is set to 0.05 for this desk-size model.
    let model = balanced_model(8, 8, 7);
    let thresholds = AnalysisThresholds {
        tol_dec: 0.05,
        ..Default::default()
    };
    let times = grid(60.0, 600);

    // Single A particle decoheres.
    let dec_a1 = Decomposition::new([0], model.num_sites()).unwrap();
    let obs_a1 = sigma_x_on(&model, &[0]);
    let series = closedform::expectation_series(&model, &dec_a1, &obs_a1, &times).unwrap();
    let v_single = classify_dynamics(&series, (0.0, 60.0), &thresholds).unwrap();
    assert_eq!(v_single.class, DynamicsClass::Decohering);

    // The whole A subsystem does not: equal-magnetization coherences
    // persist.
    let a_sites: Vec<usize> = (0..8).collect();
    let dec_a = Decomposition::new(a_sites.clone(), model.num_sites()).unwrap();
    let obs_a = sigma_x_on(&model, &a_sites);
    let series_a = closedform::expectation_series(&model, &dec_a, &obs_a, &times).unwrap();
    let v_whole = classify_dynamics(&series_a, (0.0, 60.0), &thresholds).unwrap();
    assert_ne!(v_whole.class, DynamicsClass::Decohering);

    // Symmetric statement for a single B particle. Its coherence is
    // |cos(g_n t)|^M, exactly periodic with period pi/g_n, so the window
    // must close before the first full revival.
    let (b_idx, g_max) = model
        .couplings()
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let b_site = model.m() + b_idx;
    let window_b = 0.7 * std::f64::consts::PI / g_max;
    let times_b = grid(window_b, 400);
    let dec_b = Decomposition::new([b_site], model.num_sites()).unwrap();
    let obs_b = sigma_x_on(&model, &[b_site]);
    let series_b = closedform::expectation_series(&model, &dec_b, &obs_b, &times_b).unwrap();
    let v_b = classify_dynamics(&series_b, (0.0, window_b), &thresholds).unwrap();
    assert_eq!(v_b.class, DynamicsClass::Decohering);

    println!(
        "criterion 5 (M=N=8: dec2(A1) {:?} / dec1(whole A) {:?} / dec2(B) {:?}): PASS",
        v_single.class, v_whole.class, v_b.class
    );
}

#[test]
fn criterion_06_m_independence_of_single_particle_coherence() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let b_side: Vec<SpinFactor> = (0..6).map(|_| random_factor(&mut rng)).collect();
    let g: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.5)).collect();
    let times = grid(5.0, 50);

    // The literal kernel has no M dependence: identical across M.
    let reference: Vec<Complex64> = {
        let model = ModelSpec::new(vec![SpinFactor::balanced()], b_side.clone(), g.clone()).unwrap();
        times
            .iter()
            .map(|&t| single_site_coherence(&model, 0, t).unwrap())
            .collect()
    };
    for m in [5usize, 9] {
        let model =
            ModelSpec::new(vec![SpinFactor::balanced(); m], b_side.clone(), g.clone()).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let k = single_site_coherence(&model, 0, t).unwrap();
            assert!(
                (k - reference[i]).norm() <= 1e-12,
                "kernel differs at m = {m}, t = {t}"
            );
        }
    }

    // Oracle verification for small M: the reduced one-site coherence
    // magnitude equals |a b|.|K(t)|.
    let mut rng = ChaCha8Rng::seed_from_u64(607);
    let b_small: Vec<SpinFactor> = (0..5).map(|_| random_factor(&mut rng)).collect();
    let g_small: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.5)).collect();
    for m in 1..=3usize {
        let a_side: Vec<SpinFactor> = (0..m).map(|_| random_factor(&mut rng)).collect();
        let model = ModelSpec::new(a_side.clone(), b_small.clone(), g_small.clone()).unwrap();
        let h = build_hamiltonian(&model);
        let psi0 = product_state(&model).unwrap();
        let keep = BTreeSet::from([0usize]);
        for &t in &times {
            let rho = reduced_density(&evolve(&psi0, &h, t).unwrap(), &keep).unwrap();
            let predicted = a_side[0].up_amp().norm()
                * a_side[0].down_amp().norm()
                * single_site_coherence(&model, 0, t).unwrap().norm();
            assert!(
                (rho.entry(0, 1).norm() - predicted).abs() < 1e-10,
                "m = {m}, t = {t}"
            );
        }
    }
    println!("criterion 6 (single-particle A coherence independent of M): PASS");
}

#[test]
fn criterion_07_uncoupled_cut_preserves_purity() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let model = ModelSpec::new(
        (0..2).map(|_| random_factor(&mut rng)).collect(),
        (0..3).map(|_| random_factor(&mut rng)).collect(),
        vec![0.0; 3],
    )
    .unwrap();
    let h = build_hamiltonian(&model);
    let psi0 = product_state(&model).unwrap();
    let dec = Decomposition::new([0, 1], model.num_sites()).unwrap();
    let mut drift_sys = 0.0f64;
    let mut drift_env = 0.0f64;
    let mut base: Option<(f64, f64)> = None;
    for &t in &grid(10.0, 100) {
        let psi = evolve(&psi0, &h, t).unwrap();
        let p_sys = purity(&reduced_density(&psi, dec.system_sites()).unwrap());
        let p_env = purity(&reduced_density(&psi, dec.environment_sites()).unwrap());
        match base {
            None => base = Some((p_sys, p_env)),
            Some((bs, be)) => {
                drift_sys = drift_sys.max((p_sys - bs).abs());
                drift_env = drift_env.max((p_env - be).abs());
            }
        }
    }
    assert!(drift_sys <= 1e-12, "system purity drift {drift_sys:e}");
    assert!(drift_env <= 1e-12, "environment purity drift {drift_env:e}");
    let report = check_dynamical_invariance(&model, &dec).unwrap();
    assert!(report.invariant);
    println!("criterion 7 (zero couplings: reduced purities constant to 1e-12): PASS");
}

#[test]
fn criterion_08_gaussian_envelope_and_log_domain() {
    // Fitted decay rate at N = 10^4.
    let model = balanced_model(1, 10_000, 8);
    let gamma = gaussian_decay_rate(model.b_side(), model.couplings()).unwrap();
    let t_max = 0.3 / gamma.sqrt();
    let mut sum_xy = 0.0;
    let mut sum_xx = 0.0;
    for i in 1..=25 {
        let t = t_max * i as f64 / 25.0;
        let y = -2.0 * log_coherence_magnitude(model.b_side(), model.couplings(), t).unwrap();
        let x = t * t;
        sum_xy += x * y;
        sum_xx += x * x;
    }
    let slope = sum_xy / sum_xx;
    let rel = (slope - gamma).abs() / gamma;
    assert!(rel < 0.05, "fitted {slope}, predicted {gamma}, rel {rel}");

    // No underflow at N = 10^6.
    let big = balanced_model(1, 1_000_000, 9);
    let gamma_big = gaussian_decay_rate(big.b_side(), big.couplings()).unwrap();
    let t = 0.01;
    let log_mag = log_coherence_magnitude(big.b_side(), big.couplings(), t).unwrap();
    assert!(log_mag.is_finite(), "log magnitude underflowed");
    let expected = -gamma_big * t * t / 2.0;
    let rel_big = (log_mag - expected).abs() / expected.abs();
    assert!(rel_big < 0.05, "ln|r| = {log_mag}, Gaussian {expected}");
    println!(
        "criterion 8 (Gaussian envelope: fit rel err {rel:.3}, N=10^6 ln|r| = {log_mag:.2}): PASS"
    );
}

#[test]
fn criterion_09_mode_integration_invariants() {
    // de Sitter: Wronskian and commutator invariants at 10^5 steps.
    let ds = ScaleFactorModel::de_sitter(1.0).unwrap();
    let traj = evolve_mode(1.0, &ds, -20.0, -0.01, 100_000).unwrap();
    let residual = traj.max_wronskian_residual();
    assert!(residual <= 1e-9, "max Wronskian residual {residual:e}");
    let mut max_comm_dev = 0.0f64;
    for s in &traj.states {
        max_comm_dev = max_comm_dev.max((commutator_coefficient(s) - 1.0).abs());
    }
    assert!(max_comm_dev <= 2e-9, "commutator deviation {max_comm_dev:e}");

    // de Sitter analytic agreement, relative.
    let mut max_rel = 0.0f64;
    for s in traj.states.iter().step_by(250) {
        let exact = de_sitter_analytic(1.0, -20.0, s.eta);
        let mag = (exact.f1 * exact.f1 + exact.f2 * exact.f2).sqrt();
        let err = ((s.f1 - exact.f1).powi(2) + (s.f2 - exact.f2).powi(2)).sqrt() / mag;
        max_rel = max_rel.max(err);
    }
    assert!(max_rel <= 1e-6, "de Sitter analytic error {max_rel:e}");

    // Minkowski analytic agreement, absolute.
    let traj_m = evolve_mode(1.0, &ScaleFactorModel::Minkowski, 0.0, 20.0, 20_000).unwrap();
    let mut max_abs = 0.0f64;
    for s in traj_m.states.iter().step_by(100) {
        let exact = minkowski_analytic(1.0, 0.0, s.eta);
        max_abs = max_abs
            .max((s.f1 - exact.f1).abs())
            .max((s.f2 - exact.f2).abs())
            .max((s.g1 - exact.g1).abs())
            .max((s.g2 - exact.g2).abs());
    }
    assert!(max_abs <= 1e-8, "Minkowski analytic error {max_abs:e}");
    println!(
        "criterion 9 (Wronskian {residual:.1e}, commutator {max_comm_dev:.1e}, \
         dS rel {max_rel:.1e}, Minkowski {max_abs:.1e}): PASS"
    );
}

#[test]
fn criterion_10_classicality_diagnostics() {
    // Phase-fixed de Sitter: decaying/growing ratio collapses superhorizon.
    let ds = ScaleFactorModel::de_sitter(1.0).unwrap();
    let traj = evolve_mode(1.0, &ds, -20.0, -0.01, 100_000).unwrap();
    let fixed = fix_phase(&traj, -0.01).unwrap();
    let ratio = classicality_diagnostics(fixed.states.last().unwrap()).ratio;
    assert!(ratio < 1e-3, "de Sitter phase-fixed ratio {ratio:e}");

    // Minkowski never looks classical.
    let traj_m = evolve_mode(1.0, &ScaleFactorModel::Minkowski, 0.0, 20.0, 20_000).unwrap();
    let fixed_m = fix_phase(&traj_m, 20.0).unwrap();
    let mut min_ratio = f64::INFINITY;
    for s in fixed_m.states.iter().step_by(200) {
        min_ratio = min_ratio.min(classicality_diagnostics(s).ratio);
    }
    assert!(min_ratio > 0.1, "Minkowski ratio dipped to {min_ratio}");

    // Classical ensemble: variance matches |f_k|^2, strongly squeezed
    // correlation superhorizon.
    let report = classical_ensemble_compare(&traj, -0.01, 100_000, 2024).unwrap();
    let var_dev = (report.sample_var_y - report.quantum_var_y).abs();
    assert!(
        var_dev < 4.0 * report.var_y_standard_error,
        "Var(y): sampled {} vs quantum {} (4 SE = {})",
        report.sample_var_y,
        report.quantum_var_y,
        4.0 * report.var_y_standard_error
    );
    assert!(
        report.sample_corr.abs() > 0.999,
        "superhorizon |corr| = {}",
        report.sample_corr.abs()
    );
    assert!(report.predicted_corr.abs() > 0.999);
    println!(
        "criterion 10 (dS ratio {ratio:.1e}, Minkowski min ratio {min_ratio:.2}, \
         |corr| {:.5}): PASS",
        report.sample_corr.abs()
    );
}
