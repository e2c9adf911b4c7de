//! `repcount`: counts repetitions of periodic motion in per-frame feature
//! matrices, and drives the batch evaluation tooling.
//!
//! Exit codes: 0 on success, 1 for usage problems (bad flags or option
//! values), 2 for data problems (missing or malformed input files).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use repcount_core::{
    ablate_fmf, count_repetitions, dft, evaluate, first_component_waveform, fmf, generate,
    high_band_count, load_manifest, load_matrix_auto, render_ablation_table, render_eval_table,
    render_sweep_table, save_binary_matrix, save_text_matrix, select_alpha, sweep_thresholds,
    FeatureMatrix, FmfConfig, FmfTrace, FusionMode, LadderStep, PeakParams, SynthSpec,
};

#[derive(Parser)]
#[command(
    name = "repcount",
    version,
    about = "Count repetitions of periodic motion from per-frame feature matrices"
)]
struct Cli {
    /// More logging to stderr (repeat for debug output).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count repetitions in one recording.
    Count(CountArgs),
    /// Evaluate every entry of a fixture manifest against its known count.
    Eval(EvalArgs),
    /// Compare fixed filter widths against the adaptive selection.
    Sweep(SweepArgs),
    /// Compare filtered and unfiltered runs across all streams.
    Ablate(AblateArgs),
    /// Generate a synthetic fixture with a known repetition count.
    Synth(SynthArgs),
    /// Dump the projected waveform before and after filtering.
    ExportWaveform(ExportWaveformArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

/// Filter and peak-detection settings shared by the analysis subcommands.
#[derive(Args)]
struct TuningArgs {
    /// Fixed keep-band width, bypassing adaptive selection.
    #[arg(long, value_name = "BINS")]
    alpha: Option<u32>,

    /// JSON file holding the selection ladder, an array of
    /// {"bound": N|null, "alpha": M} steps ending with a null bound.
    #[arg(long, value_name = "FILE")]
    ladder: Option<PathBuf>,

    /// Fraction of the spectral maximum a bin must reach to count as
    /// significant when measuring the high band.
    #[arg(long, value_name = "FRACTION")]
    beta: Option<f64>,

    /// Where the high band begins, as a fraction of the spectrum length.
    #[arg(long, value_name = "FRACTION")]
    high_band_start: Option<f64>,

    /// Skip the filter entirely (the selection is still reported).
    #[arg(long)]
    no_fmf: bool,

    /// Minimum peak prominence as a fraction of the waveform's robust range.
    #[arg(long, value_name = "FRACTION")]
    gamma: Option<f64>,

    /// Minimum distance between two reported peaks, in frames.
    #[arg(long, value_name = "FRAMES")]
    min_separation: Option<usize>,
}

#[derive(Args)]
struct CountArgs {
    /// Feature matrix of the appearance stream (text or binary).
    #[arg(long, value_name = "FILE")]
    spatial: Option<PathBuf>,

    /// Feature matrix of the motion stream (text or binary).
    #[arg(long, value_name = "FILE")]
    temporal: Option<PathBuf>,

    /// Stream selection: spatial, temporal, concat, or auto (use whatever
    /// was given, concatenating when both are).
    #[arg(long, default_value = "auto")]
    fusion: String,

    #[command(flatten)]
    tuning: TuningArgs,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write the report to this file instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// JSON manifest: [{"id", "spatial"?, "temporal"?, "ground_truth"}].
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,

    /// Stream selection: spatial, temporal, or concat.
    #[arg(long, default_value = "spatial")]
    fusion: String,

    #[command(flatten)]
    tuning: TuningArgs,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,

    /// Comma-separated fixed widths to try; the adaptive selection is
    /// always appended as the final row.
    #[arg(long, value_delimiter = ',', required = true, value_name = "A,B,...")]
    alphas: Vec<u32>,

    #[arg(long, default_value = "spatial")]
    fusion: String,

    #[command(flatten)]
    tuning: TuningArgs,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,

    #[command(flatten)]
    tuning: TuningArgs,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON recipe for the fixture (see the library's SynthSpec fields).
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,

    /// Output base path: writes BASE.csv, BASE.bin and a BASE.json sidecar
    /// with the recipe and the ground-truth count.
    #[arg(long, value_name = "BASE")]
    out: PathBuf,

    /// Override the recipe's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ExportWaveformArgs {
    #[arg(long, value_name = "FILE")]
    spatial: Option<PathBuf>,

    #[arg(long, value_name = "FILE")]
    temporal: Option<PathBuf>,

    #[arg(long, default_value = "auto")]
    fusion: String,

    #[command(flatten)]
    tuning: TuningArgs,

    /// Columnar text output: index, raw sample, filtered sample, spectrum
    /// magnitude at that bin.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

/// Failures split by exit code.
enum CliError {
    Usage(String),
    Data(String),
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Count(args) => run_count(args),
        Command::Eval(args) => run_eval(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Ablate(args) => run_ablate(args),
        Command::Synth(args) => run_synth(args),
        Command::ExportWaveform(args) => run_export(args),
    }
}

impl TuningArgs {
    fn fmf_config(&self) -> Result<FmfConfig, CliError> {
        let mut cfg = FmfConfig::default();
        if let Some(path) = &self.ladder {
            let bytes = fs::read(path)
                .map_err(|e| usage(format!("cannot read ladder file {}: {e}", path.display())))?;
            let ladder: Vec<LadderStep> = serde_json::from_slice(&bytes)
                .map_err(|e| usage(format!("bad ladder file {}: {e}", path.display())))?;
            cfg.ladder = ladder;
        }
        cfg.fixed_alpha = self.alpha;
        if let Some(beta) = self.beta {
            cfg.beta = beta;
        }
        if let Some(f) = self.high_band_start {
            cfg.high_band_start_fraction = f;
        }
        cfg.enabled = !self.no_fmf;
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }

    fn peak_params(&self) -> Result<PeakParams, CliError> {
        let mut params = PeakParams::default();
        if let Some(gamma) = self.gamma {
            params.min_prominence_fraction = gamma;
        }
        if let Some(sep) = self.min_separation {
            params.min_separation = sep;
        }
        params.validate().map_err(usage)?;
        Ok(params)
    }
}

/// Parses the fusion flag; `auto` follows which streams were provided.
fn resolve_fusion(arg: &str, spatial: bool, temporal: bool) -> Result<FusionMode, CliError> {
    if arg == "auto" {
        return match (spatial, temporal) {
            (true, true) => Ok(FusionMode::Concat),
            (true, false) => Ok(FusionMode::Spatial),
            (false, true) => Ok(FusionMode::Temporal),
            (false, false) => Err(CliError::Usage(
                "provide --spatial and/or --temporal".to_string(),
            )),
        };
    }
    arg.parse().map_err(usage)
}

fn load_streams(
    spatial: &Option<PathBuf>,
    temporal: &Option<PathBuf>,
) -> Result<(Option<FeatureMatrix>, Option<FeatureMatrix>), CliError> {
    let load = |p: &Option<PathBuf>| -> Result<Option<FeatureMatrix>, CliError> {
        p.as_deref().map(load_matrix_auto).transpose().map_err(data)
    };
    Ok((load(spatial)?, load(temporal)?))
}

/// Writes to the chosen sink with a trailing newline.
fn emit(out: &Option<PathBuf>, body: &str) -> Result<(), CliError> {
    let text = if body.ends_with('\n') {
        body.to_string()
    } else {
        format!("{body}\n")
    };
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| data(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("report serialization cannot fail")
}

fn run_count(args: CountArgs) -> Result<(), CliError> {
    let cfg = args.tuning.fmf_config()?;
    let params = args.tuning.peak_params()?;
    let fusion = resolve_fusion(
        &args.fusion,
        args.spatial.is_some(),
        args.temporal.is_some(),
    )?;
    let (spatial, temporal) = load_streams(&args.spatial, &args.temporal)?;
    let report = count_repetitions(spatial.as_ref(), temporal.as_ref(), fusion, &cfg, &params)
        .map_err(data)?;
    let body = match args.format {
        Format::Json => to_json(&report),
        Format::Table => {
            let peaks: Vec<String> = report.peaks.iter().map(|p| p.to_string()).collect();
            let mut t = String::new();
            let _ = writeln!(t, "count                {}", report.count);
            let _ = writeln!(t, "peaks                {}", peaks.join(","));
            let _ = writeln!(t, "alpha                {}", report.trace.alpha);
            let _ = writeln!(t, "band_count           {}", report.trace.band_count);
            let _ = writeln!(
                t,
                "kept_energy_fraction {:.4}",
                report.trace.kept_energy_fraction
            );
            let _ = writeln!(t, "stream               {}", report.stream);
            t
        }
    };
    emit(&args.out, &body)
}

fn load_entries(manifest: &Path) -> Result<Vec<repcount_core::ManifestEntry>, CliError> {
    load_manifest(manifest).map_err(data)
}

fn parse_eval_fusion(arg: &str) -> Result<FusionMode, CliError> {
    arg.parse().map_err(usage)
}

fn run_eval(args: EvalArgs) -> Result<(), CliError> {
    let cfg = args.tuning.fmf_config()?;
    let params = args.tuning.peak_params()?;
    let fusion = parse_eval_fusion(&args.fusion)?;
    let entries = load_entries(&args.manifest)?;
    let report = evaluate(&entries, fusion, &cfg, &params);
    let body = match args.format {
        Format::Json => to_json(&report),
        Format::Table => render_eval_table(&report),
    };
    emit(&args.out, &body)
}

fn run_sweep(args: SweepArgs) -> Result<(), CliError> {
    if let Some(bad) = args.alphas.iter().find(|&&a| a < 2) {
        return Err(CliError::Usage(format!(
            "--alphas values must be at least 2, got {bad}"
        )));
    }
    let cfg = args.tuning.fmf_config()?;
    let params = args.tuning.peak_params()?;
    let fusion = parse_eval_fusion(&args.fusion)?;
    let entries = load_entries(&args.manifest)?;
    let rows = sweep_thresholds(&entries, &args.alphas, fusion, &cfg, &params);
    let body = match args.format {
        Format::Json => to_json(&rows),
        Format::Table => render_sweep_table(&rows),
    };
    emit(&args.out, &body)
}

fn run_ablate(args: AblateArgs) -> Result<(), CliError> {
    let cfg = args.tuning.fmf_config()?;
    let params = args.tuning.peak_params()?;
    let entries = load_entries(&args.manifest)?;
    let cells = ablate_fmf(&entries, &cfg, &params);
    let body = match args.format {
        Format::Json => to_json(&cells),
        Format::Table => render_ablation_table(&cells),
    };
    emit(&args.out, &body)
}

#[derive(Serialize)]
struct SynthSidecar<'a> {
    spec: &'a SynthSpec,
    ground_truth: u32,
}

fn run_synth(args: SynthArgs) -> Result<(), CliError> {
    let bytes = fs::read(&args.spec)
        .map_err(|e| data(format!("cannot read spec {}: {e}", args.spec.display())))?;
    let mut spec: SynthSpec = serde_json::from_slice(&bytes)
        .map_err(|e| data(format!("bad spec {}: {e}", args.spec.display())))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let (matrix, ground_truth) = generate(&spec).map_err(data)?;

    let base = args.out.as_os_str().to_owned();
    let with_ext = |ext: &str| -> PathBuf {
        let mut s = base.clone();
        s.push(ext);
        PathBuf::from(s)
    };
    let csv = with_ext(".csv");
    let bin = with_ext(".bin");
    let sidecar = with_ext(".json");
    save_text_matrix(&matrix, &csv).map_err(data)?;
    save_binary_matrix(&matrix, &bin).map_err(data)?;
    let meta = SynthSidecar {
        spec: &spec,
        ground_truth,
    };
    fs::write(&sidecar, format!("{}\n", to_json(&meta)))
        .map_err(|e| data(format!("cannot write {}: {e}", sidecar.display())))?;
    println!(
        "wrote {} + {} + {} ({} frames x {} features, {} repetitions)",
        csv.display(),
        bin.display(),
        sidecar.display(),
        matrix.n_frames(),
        matrix.dim(),
        ground_truth
    );
    Ok(())
}

fn run_export(args: ExportWaveformArgs) -> Result<(), CliError> {
    let cfg = args.tuning.fmf_config()?;
    let fusion = resolve_fusion(
        &args.fusion,
        args.spatial.is_some(),
        args.temporal.is_some(),
    )?;
    let (spatial, temporal) = load_streams(&args.spatial, &args.temporal)?;
    let working = match fusion {
        FusionMode::Spatial => spatial.ok_or_else(|| data("missing spatial stream"))?,
        FusionMode::Temporal => temporal.ok_or_else(|| data("missing temporal stream"))?,
        FusionMode::Concat => {
            let s = spatial.ok_or_else(|| data("missing spatial stream"))?;
            let t = temporal.ok_or_else(|| data("missing temporal stream"))?;
            s.concat_features(&t).map_err(data)?
        }
    };
    let raw = first_component_waveform(&working).map_err(data)?;
    let spectrum = dft(&raw);
    let (filtered, _trace) = if cfg.enabled {
        fmf(&raw, &cfg).map_err(data)?
    } else {
        let trace = FmfTrace {
            alpha: select_alpha(&spectrum, &cfg),
            band_count: high_band_count(&spectrum, &cfg),
            kept_energy_fraction: 1.0,
        };
        (raw.clone(), trace)
    };
    let mut body = String::from("# index raw filtered magnitude\n");
    for (i, ((r, f), c)) in raw
        .samples()
        .iter()
        .zip(filtered.samples())
        .zip(spectrum.coefficients())
        .enumerate()
    {
        let _ = writeln!(body, "{i} {r} {f} {}", c.norm());
    }
    fs::write(&args.out, body)
        .map_err(|e| data(format!("cannot write {}: {e}", args.out.display())))?;
    println!("wrote {} ({} rows)", args.out.display(), raw.len());
    Ok(())
}
