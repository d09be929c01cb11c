//! Artifact emission: CSV series, verdict JSON, sweep summaries, mode
//! trajectories. Numbers carry 17 significant digits and lines end in LF so
//! identical runs emit byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use declab_core::analysis::DynamicsVerdict;
use declab_core::cosmo::{classicality_diagnostics, EnsembleReport, ModeTrajectory};
use declab_core::model::ExpectationSeries;

use crate::error::CliError;

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(contents)?;
    Ok(())
}

/// Normalized coherence envelope |z(t)|/|z(0)|, zero when z(0) vanishes.
pub fn envelope_column(series: &ExpectationSeries) -> Vec<f64> {
    match series.envelope() {
        Some(env) => env,
        None => vec![0.0; series.len()],
    }
}

pub fn write_series_csv(path: &Path, series: &ExpectationSeries) -> Result<(), CliError> {
    let envelope = envelope_column(series);
    let mut out = String::from("t,total,sum_d,re_sum_nd,im_sum_nd,abs_coherence\n");
    for (i, env) in envelope.iter().enumerate() {
        out.push_str(&fmt_f64(series.times[i]));
        out.push(',');
        out.push_str(&fmt_f64(series.total[i]));
        out.push(',');
        out.push_str(&fmt_f64(series.diag_part));
        out.push(',');
        out.push_str(&fmt_f64(series.nondiag_part[i].re));
        out.push(',');
        out.push_str(&fmt_f64(series.nondiag_part[i].im));
        out.push(',');
        out.push_str(&fmt_f64(*env));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

#[derive(Serialize)]
struct EnvelopeStatsJson {
    mean_tail: f64,
    max_tail: f64,
}

#[derive(Serialize)]
struct VerdictJson<'a> {
    class: &'a str,
    #[serde(rename = "t_D")]
    t_d: Option<f64>,
    recurrence_time: Option<f64>,
    envelope_stats: EnvelopeStatsJson,
    engine: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_agreement_max_abs_err: Option<f64>,
}

pub fn write_verdict_json(
    path: &Path,
    verdict: &DynamicsVerdict,
    engine: &str,
    cross_check_err: Option<f64>,
) -> Result<(), CliError> {
    let doc = VerdictJson {
        class: verdict.class.as_str(),
        t_d: verdict.t_d,
        recurrence_time: verdict.recurrence_time,
        envelope_stats: EnvelopeStatsJson {
            mean_tail: verdict.envelope_stats.mean_tail,
            max_tail: verdict.envelope_stats.max_tail,
        },
        engine,
        oracle_agreement_max_abs_err: cross_check_err,
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::other(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// One summary row of a sweep.
pub struct SweepRow {
    pub m: usize,
    pub n: usize,
    pub seed: Option<u64>,
    pub class: &'static str,
    /// First envelope crossing of the decoherence threshold, if any.
    pub t_d: Option<f64>,
    pub gamma: f64,
    pub mean_tail: f64,
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut out = String::from("M,N,seed,class,t_D,gamma,mean_tail\n");
    for row in rows {
        out.push_str(&row.m.to_string());
        out.push(',');
        out.push_str(&row.n.to_string());
        out.push(',');
        if let Some(seed) = row.seed {
            out.push_str(&seed.to_string());
        }
        out.push(',');
        out.push_str(row.class);
        out.push(',');
        if let Some(t_d) = row.t_d {
            out.push_str(&fmt_f64(t_d));
        }
        out.push(',');
        out.push_str(&fmt_f64(row.gamma));
        out.push(',');
        out.push_str(&fmt_f64(row.mean_tail));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn trajectory_csv_bytes(traj: &ModeTrajectory) -> Vec<u8> {
    let mut out = String::from("eta,f1,f2,g1,g2,wronskian_residual,decaying_ratio\n");
    for state in &traj.states {
        let report = classicality_diagnostics(state);
        for (i, value) in [
            state.eta,
            state.f1,
            state.f2,
            state.g1,
            state.g2,
            state.wronskian_residual(),
            report.ratio,
        ]
        .iter()
        .enumerate()
        {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(*value));
        }
        out.push('\n');
    }
    out.into_bytes()
}

pub fn write_bytes(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    write_atomic(path, contents)
}

#[derive(Serialize)]
struct EnsembleJson<'a> {
    reports: &'a [EnsembleEntry],
}

#[derive(Serialize)]
pub struct EnsembleEntry {
    pub k: f64,
    pub eta: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub sample_var_y: f64,
    pub quantum_var_y: f64,
    pub var_y_standard_error: f64,
    pub sample_var_p: f64,
    pub quantum_var_p: f64,
    pub sample_corr: f64,
    pub predicted_corr: f64,
}

impl From<&EnsembleReport> for EnsembleEntry {
    fn from(r: &EnsembleReport) -> EnsembleEntry {
        EnsembleEntry {
            k: r.k,
            eta: r.eta,
            n_samples: r.n_samples,
            seed: r.seed,
            sample_var_y: r.sample_var_y,
            quantum_var_y: r.quantum_var_y,
            var_y_standard_error: r.var_y_standard_error,
            sample_var_p: r.sample_var_p,
            quantum_var_p: r.quantum_var_p,
            sample_corr: r.sample_corr,
            predicted_corr: r.predicted_corr,
        }
    }
}

pub fn write_ensemble_json(path: &Path, entries: &[EnsembleEntry]) -> Result<(), CliError> {
    let doc = EnsembleJson { reports: entries };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::other(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes())
}
