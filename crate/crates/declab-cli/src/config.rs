//! JSON configuration schema for scenarios, sweeps and mode runs.

use serde::Deserialize;

fn default_threshold() -> f64 {
    (-1.0f64).exp()
}

fn default_tol_dec() -> f64 {
    0.01
}

fn default_tol_osc() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelConfig,
    pub decomposition: DecompositionConfig,
    #[serde(default)]
    pub observable: ObservableConfig,
    pub time_grid: TimeGridConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub generate: Option<GenerateConfig>,
    #[serde(default)]
    pub explicit: Option<ExplicitModelConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub m: usize,
    pub n: usize,
    pub amplitudes: AmplitudeMode,
    pub couplings: CouplingMode,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeMode {
    Balanced,
    Random,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    Uniform(f64),
    Random([f64; 2]),
}

impl GenerateConfig {
    pub fn needs_seed(&self) -> bool {
        self.amplitudes == AmplitudeMode::Random
            || matches!(self.couplings, CouplingMode::Random(_))
    }
}

/// Explicit factors as `[re_up, im_up, re_down, im_down]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitModelConfig {
    pub a_side: Vec<[f64; 4]>,
    pub b_side: Vec<[f64; 4]>,
    pub couplings: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionConfig {
    /// One of `traditional-dec1`, `traditional-dec2`, `generalized-dec1`,
    /// `generalized-dec2`.
    #[serde(default)]
    pub preset: Option<String>,
    /// B-side particle index for `traditional-dec2`.
    #[serde(default)]
    pub index: Option<usize>,
    /// Global site index for `generalized-dec2`.
    #[serde(default)]
    pub site: Option<usize>,
    /// Explicit system sites instead of a preset.
    #[serde(default)]
    pub system_sites: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    /// `x`, `y` or `z`; defaults to `x`.
    #[serde(default)]
    pub pauli: Option<String>,
    /// Sites carrying the Pauli factor; defaults to every system site.
    #[serde(default)]
    pub sites: Option<Vec<usize>>,
    /// A custom Hermitian 2x2 factor on one site; entries are
    /// `[[ [re, im], [re, im] ], [ [re, im], [re, im] ]]` rows.
    #[serde(default)]
    pub matrix: Option<MatrixConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub site: usize,
    pub entries: [[[f64; 2]; 2]; 2],
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridConfig {
    pub t_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_threshold")]
    pub decoherence_threshold: f64,
    #[serde(default = "default_tol_dec")]
    pub tol_dec: f64,
    #[serde(default = "default_tol_osc")]
    pub tol_osc: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            decoherence_threshold: default_threshold(),
            tol_dec: default_tol_dec(),
            tol_osc: default_tol_osc(),
        }
    }
}

fn default_series_csv() -> String {
    "series.csv".into()
}

fn default_verdict_json() -> String {
    "verdict.json".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_series_csv")]
    pub series_csv: String,
    #[serde(default = "default_verdict_json")]
    pub verdict_json: String,
    /// Optional line plot of the coherence envelope.
    #[serde(default)]
    pub svg: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            series_csv: default_series_csv(),
            verdict_json: default_verdict_json(),
            svg: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub template: SweepTemplate,
    pub axis: AxisConfig,
    #[serde(default = "default_summary_csv")]
    pub summary_csv: String,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_summary_csv() -> String {
    "sweep.csv".into()
}

/// A scenario without per-point output paths; sweep points only contribute
/// summary rows.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTemplate {
    pub model: ModelConfig,
    pub decomposition: DecompositionConfig,
    #[serde(default)]
    pub observable: ObservableConfig,
    pub time_grid: TimeGridConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    /// `m`, `n` or `seed`.
    pub parameter: String,
    pub values: Vec<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosmoConfig {
    pub model: CosmoModelConfig,
    pub k_list: Vec<f64>,
    pub eta0: f64,
    pub eta1: f64,
    pub steps: usize,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub output: CosmoOutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CosmoModelConfig {
    Minkowski,
    DeSitter { hubble: f64 },
    Tabulated { etas: Vec<f64>, scale_factors: Vec<f64> },
}

fn default_trajectory_prefix() -> String {
    "mode".into()
}

fn default_ensemble_json() -> String {
    "ensemble.json".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosmoOutputConfig {
    /// Per-k trajectory CSVs are written as `{prefix}_k{index}.csv` in
    /// k-list order.
    #[serde(default = "default_trajectory_prefix")]
    pub trajectory_csv_prefix: String,
    #[serde(default = "default_ensemble_json")]
    pub ensemble_json: String,
}

impl Default for CosmoOutputConfig {
    fn default() -> Self {
        CosmoOutputConfig {
            trajectory_csv_prefix: default_trajectory_prefix(),
            ensemble_json: default_ensemble_json(),
        }
    }
}
