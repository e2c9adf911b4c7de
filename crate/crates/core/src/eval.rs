//! Batch evaluation: run the counter over a manifest of fixtures with known
//! ground truth, aggregate the error statistics, sweep the band-limit
//! setting, and compare filtered against unfiltered runs per stream.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::counter::{count_repetitions, CountReport, FusionMode, PeakParams};
use crate::error::{Error, Result};
use crate::matrix_io::{load_matrix_auto, FeatureMatrix};
use crate::spectral::FmfConfig;

/// One fixture in an evaluation manifest. Relative paths are resolved
/// against the manifest's own directory by [`load_manifest`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal: Option<PathBuf>,
    pub ground_truth: u32,
}

/// Reads a JSON array of entries and resolves each relative path against the
/// manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let bytes = std::fs::read(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile {
                path: path.to_path_buf(),
            }
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    let mut entries: Vec<ManifestEntry> =
        serde_json::from_slice(&bytes).map_err(|source| Error::ManifestParse {
            path: path.to_path_buf(),
            source,
        })?;
    let base = path.parent().unwrap_or(Path::new(""));
    for entry in &mut entries {
        for p in [&mut entry.spatial, &mut entry.temporal]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
    }
    Ok(entries)
}

/// Outcome for one successfully counted fixture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoResult {
    pub id: String,
    pub ground_truth: u32,
    pub predicted: usize,
    /// `|ground_truth - predicted| / ground_truth * 100`.
    pub percent_error: f64,
}

/// A fixture that could not be counted, with the reason; failures are
/// reported, never silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryFailure {
    pub id: String,
    pub error: String,
}

/// The three aggregate error statistics. `sigma_counts` is the root mean
/// square count error in repetitions; `sigma_percent` is the population
/// standard deviation of the per-video percent errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub mae: f64,
    pub sigma_counts: f64,
    pub sigma_percent: f64,
}

/// Aggregates results; `None` when there is nothing to aggregate.
pub fn metrics(results: &[VideoResult]) -> Option<Metrics> {
    if results.is_empty() {
        return None;
    }
    let n = results.len() as f64;
    let mae = results.iter().map(|r| r.percent_error).sum::<f64>() / n;
    let mean_sq_counts = results
        .iter()
        .map(|r| {
            let diff = r.ground_truth as f64 - r.predicted as f64;
            diff * diff
        })
        .sum::<f64>()
        / n;
    let var_percent = results
        .iter()
        .map(|r| {
            let d = r.percent_error - mae;
            d * d
        })
        .sum::<f64>()
        / n;
    Some(Metrics {
        mae,
        sigma_counts: mean_sq_counts.sqrt(),
        sigma_percent: var_percent.sqrt(),
    })
}

/// The configuration an evaluation ran under, echoed into its report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub fmf: FmfConfig,
    pub peaks: PeakParams,
    pub fusion: FusionMode,
}

/// Full evaluation output: per-video rows, the aggregate statistics
/// (absent when no entry succeeded), failures, and the configuration echo.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_video: Vec<VideoResult>,
    pub mae: Option<f64>,
    pub sigma_counts: Option<f64>,
    pub sigma_percent: Option<f64>,
    pub failures: Vec<EntryFailure>,
    pub config: ConfigEcho,
}

fn run_entry(
    entry: &ManifestEntry,
    fusion: FusionMode,
    cfg: &FmfConfig,
    params: &PeakParams,
) -> Result<CountReport> {
    if entry.ground_truth == 0 {
        return Err(Error::SpecInvalid {
            reason: format!("entry {:?} has ground_truth 0", entry.id),
        });
    }
    let load = |p: &Option<PathBuf>| -> Result<Option<FeatureMatrix>> {
        p.as_deref().map(load_matrix_auto).transpose()
    };
    let spatial = load(&entry.spatial)?;
    let temporal = load(&entry.temporal)?;
    count_repetitions(spatial.as_ref(), temporal.as_ref(), fusion, cfg, params)
}

/// Counts every manifest entry and aggregates. Infallible by design:
/// per-entry problems (missing files, degenerate matrices, bad ground
/// truth) become [`EntryFailure`] rows instead of aborting the run.
pub fn evaluate(
    entries: &[ManifestEntry],
    fusion: FusionMode,
    cfg: &FmfConfig,
    params: &PeakParams,
) -> EvalReport {
    let mut per_video = Vec::new();
    let mut failures = Vec::new();
    for entry in entries {
        match run_entry(entry, fusion, cfg, params) {
            Ok(report) => {
                let g = entry.ground_truth as f64;
                let percent_error = (g - report.count as f64).abs() / g * 100.0;
                per_video.push(VideoResult {
                    id: entry.id.clone(),
                    ground_truth: entry.ground_truth,
                    predicted: report.count,
                    percent_error,
                });
            }
            Err(e) => failures.push(EntryFailure {
                id: entry.id.clone(),
                error: e.to_string(),
            }),
        }
    }
    let stats = metrics(&per_video);
    EvalReport {
        per_video,
        mae: stats.map(|m| m.mae),
        sigma_counts: stats.map(|m| m.sigma_counts),
        sigma_percent: stats.map(|m| m.sigma_percent),
        failures,
        config: ConfigEcho {
            fmf: cfg.clone(),
            peaks: *params,
            fusion,
        },
    }
}

/// One row of a band-limit sweep: a fixed setting, or the adaptive
/// multi-stage selection when `alpha` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub label: String,
    pub alpha: Option<u32>,
    pub mae: Option<f64>,
    pub sigma_counts: Option<f64>,
    pub sigma_percent: Option<f64>,
    pub evaluated: usize,
    pub failures: usize,
}

/// Evaluates once per fixed band limit (in the order given) and once with
/// the adaptive multi-stage selection, which is always the last row.
pub fn sweep_thresholds(
    entries: &[ManifestEntry],
    alphas: &[u32],
    fusion: FusionMode,
    cfg: &FmfConfig,
    params: &PeakParams,
) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(alphas.len() + 1);
    let mut run = |label: String, alpha: Option<u32>| {
        let run_cfg = FmfConfig {
            fixed_alpha: alpha,
            enabled: true,
            ..cfg.clone()
        };
        let report = evaluate(entries, fusion, &run_cfg, params);
        rows.push(SweepRow {
            label,
            alpha,
            mae: report.mae,
            sigma_counts: report.sigma_counts,
            sigma_percent: report.sigma_percent,
            evaluated: report.per_video.len(),
            failures: report.failures.len(),
        });
    };
    for &alpha in alphas {
        run(format!("fixed {alpha}"), Some(alpha));
    }
    run("multi-stage".to_string(), None);
    rows
}

/// One cell of the filter ablation grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationCell {
    pub stream: FusionMode,
    pub fmf_enabled: bool,
    pub mae: Option<f64>,
    pub sigma_counts: Option<f64>,
    pub sigma_percent: Option<f64>,
    pub evaluated: usize,
    pub failures: usize,
}

/// Runs the 2x3 grid {filter off, filter on} x {spatial, temporal, concat}
/// over the manifest; cells come back in that order.
pub fn ablate_fmf(
    entries: &[ManifestEntry],
    cfg: &FmfConfig,
    params: &PeakParams,
) -> Vec<AblationCell> {
    let mut cells = Vec::with_capacity(6);
    for enabled in [false, true] {
        for fusion in [
            FusionMode::Spatial,
            FusionMode::Temporal,
            FusionMode::Concat,
        ] {
            let run_cfg = FmfConfig {
                enabled,
                ..cfg.clone()
            };
            let report = evaluate(entries, fusion, &run_cfg, params);
            cells.push(AblationCell {
                stream: fusion,
                fmf_enabled: enabled,
                mae: report.mae,
                sigma_counts: report.sigma_counts,
                sigma_percent: report.sigma_percent,
                evaluated: report.per_video.len(),
                failures: report.failures.len(),
            });
        }
    }
    cells
}

/// Per-dataset summary row used by [`overall_summary`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetRow {
    pub name: String,
    pub mae: Option<f64>,
    pub sigma_counts: Option<f64>,
    pub evaluated: usize,
}

/// Cross-dataset rollup offering both common aggregations explicitly:
/// the unweighted mean of per-dataset MAEs, and the statistics pooled over
/// every video as if they were one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverallSummary {
    pub per_dataset: Vec<DatasetRow>,
    pub mean_of_dataset_maes: Option<f64>,
    pub pooled: Option<Metrics>,
}

pub fn overall_summary(named: &[(&str, &EvalReport)]) -> OverallSummary {
    let per_dataset: Vec<DatasetRow> = named
        .iter()
        .map(|(name, report)| DatasetRow {
            name: (*name).to_string(),
            mae: report.mae,
            sigma_counts: report.sigma_counts,
            evaluated: report.per_video.len(),
        })
        .collect();
    let dataset_maes: Vec<f64> = per_dataset.iter().filter_map(|r| r.mae).collect();
    let mean_of_dataset_maes = if dataset_maes.is_empty() {
        None
    } else {
        Some(dataset_maes.iter().sum::<f64>() / dataset_maes.len() as f64)
    };
    let all_videos: Vec<VideoResult> = named
        .iter()
        .flat_map(|(_, report)| report.per_video.iter().cloned())
        .collect();
    OverallSummary {
        per_dataset,
        mean_of_dataset_maes,
        pooled: metrics(&all_videos),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "-".to_string(),
    }
}

/// Plain-text table for an evaluation report: one row per video, then the
/// aggregate line and any failures.
pub fn render_eval_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>12} {:>10} {:>12}\n",
        "id", "ground_truth", "predicted", "pct_error"
    ));
    for r in &report.per_video {
        out.push_str(&format!(
            "{:<24} {:>12} {:>10} {:>12.4}\n",
            r.id, r.ground_truth, r.predicted, r.percent_error
        ));
    }
    out.push_str(&format!(
        "mae {} | sigma_counts {} | sigma_percent {} | evaluated {} | failed {}\n",
        fmt_opt(report.mae),
        fmt_opt(report.sigma_counts),
        fmt_opt(report.sigma_percent),
        report.per_video.len(),
        report.failures.len()
    ));
    for f in &report.failures {
        out.push_str(&format!("failed {:<20} {}\n", f.id, f.error));
    }
    out
}

/// Plain-text table for a band-limit sweep.
pub fn render_sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:>10} {:>14} {:>14} {:>10} {:>8}\n",
        "setting", "mae", "sigma_counts", "sigma_percent", "evaluated", "failed"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<14} {:>10} {:>14} {:>14} {:>10} {:>8}\n",
            r.label,
            fmt_opt(r.mae),
            fmt_opt(r.sigma_counts),
            fmt_opt(r.sigma_percent),
            r.evaluated,
            r.failures
        ));
    }
    out
}

/// Plain-text table for the filter ablation grid.
pub fn render_ablation_table(cells: &[AblationCell]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<10} {:>8} {:>10} {:>14} {:>14} {:>10} {:>8}\n",
        "stream", "filter", "mae", "sigma_counts", "sigma_percent", "evaluated", "failed"
    ));
    for c in cells {
        out.push_str(&format!(
            "{:<10} {:>8} {:>10} {:>14} {:>14} {:>10} {:>8}\n",
            c.stream.to_string(),
            if c.fmf_enabled { "on" } else { "off" },
            fmt_opt(c.mae),
            fmt_opt(c.sigma_counts),
            fmt_opt(c.sigma_percent),
            c.evaluated,
            c.failures
        ));
    }
    out
}
