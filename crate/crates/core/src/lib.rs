//! Repetition counting for periodic motion captured as per-frame feature
//! matrices.
//!
//! The pipeline: project the matrix onto its first principal component to
//! get a scalar waveform, suppress high-frequency content with an adaptive
//! band-keep filter, then count prominent peaks. [`counter::count_repetitions`]
//! runs the whole chain; the stages are public for callers that need only a
//! piece of it. [`eval`] batches runs over fixture manifests and aggregates
//! error statistics; [`synth`] generates seeded fixtures with known counts
//! and holds the brute-force reference implementations the tests check
//! against.

pub mod counter;
pub mod error;
pub mod eval;
pub mod matrix_io;
pub mod pca;
pub mod spectral;
pub mod synth;

pub use counter::{count_repetitions, detect_peaks, CountReport, FusionMode, PeakParams};
pub use error::{Error, Result};
pub use eval::{
    ablate_fmf, evaluate, load_manifest, metrics, overall_summary, render_ablation_table,
    render_eval_table, render_sweep_table, sweep_thresholds, AblationCell, ConfigEcho, DatasetRow,
    EntryFailure, EvalReport, ManifestEntry, Metrics, OverallSummary, SweepRow, VideoResult,
};
pub use matrix_io::{
    load_binary_matrix, load_matrix_auto, load_text_matrix, save_binary_matrix, save_text_matrix,
    FeatureMatrix, StreamKind,
};
pub use pca::{first_component_waveform, fit_pca, project, PcaModel, Waveform};
pub use spectral::{
    band_keep_filter, dft, fmf, high_band_count, idft, max_keep_alpha, select_alpha, FmfConfig,
    FmfTrace, LadderStep, Spectrum,
};
pub use synth::{
    generate, oracle_dft, oracle_eig, oracle_peaks, Distractor, SynthSpec, WaveShape,
    ORACLE_DFT_MAX, ORACLE_EIG_MAX,
};
