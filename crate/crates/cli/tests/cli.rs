//! End-to-end tests for the `repcount` binary: output shapes, exit codes,
//! and byte-level determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use repcount_core::{generate, load_binary_matrix, save_binary_matrix, SynthSpec};
use tempfile::TempDir;

fn repcount() -> Command {
    Command::new(env!("CARGO_BIN_EXE_repcount"))
}

fn run(args: &[&str]) -> Output {
    repcount().args(args).output().expect("binary should spawn")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout should be UTF-8")
}

fn assert_exit(output: &Output, code: i32, context: &str) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "{context}: stdout={:?} stderr={:?}",
        stdout_of(output),
        String::from_utf8_lossy(&output.stderr)
    );
}

/// Writes a clean five-repetition fixture and returns its path.
fn write_sine_fixture(dir: &Path) -> PathBuf {
    let spec = SynthSpec::clean_sine(80, 8, 5.0, 11);
    let (matrix, ground_truth) = generate(&spec).expect("fixture generation");
    assert_eq!(ground_truth, 5);
    let path = dir.join("sine5.bin");
    save_binary_matrix(&matrix, &path).expect("fixture write");
    path
}

fn write_manifest(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("manifest.json");
    fs::write(&path, body).expect("manifest write");
    path
}

#[test]
fn count_reports_the_repetitions_as_json() {
    let dir = TempDir::new().unwrap();
    let fixture = write_sine_fixture(dir.path());

    let output = run(&["count", "--spatial", fixture.to_str().unwrap()]);
    assert_exit(&output, 0, "count on a clean fixture");

    let text = stdout_of(&output);
    let report: serde_json::Value = serde_json::from_str(&text).expect("JSON report");
    assert_eq!(report["count"], 5);
    assert_eq!(report["peaks"].as_array().unwrap().len(), 5);
    assert_eq!(report["stream"], "spatial");
    assert_eq!(report["band_count"], 1);
    assert!(report["alpha"].as_u64().unwrap() >= 2);

    // The report keeps a fixed key order so diffs of stored runs stay small.
    let count_at = text.find("\"count\"").unwrap();
    let peaks_at = text.find("\"peaks\"").unwrap();
    let alpha_at = text.find("\"alpha\"").unwrap();
    let stream_at = text.find("\"stream\"").unwrap();
    assert!(count_at < peaks_at && peaks_at < alpha_at && alpha_at < stream_at);
}

#[test]
fn count_table_format_lists_every_field() {
    let dir = TempDir::new().unwrap();
    let fixture = write_sine_fixture(dir.path());

    let output = run(&[
        "count",
        "--spatial",
        fixture.to_str().unwrap(),
        "--format",
        "table",
    ]);
    assert_exit(&output, 0, "count --format table");
    let text = stdout_of(&output);
    for field in [
        "count",
        "peaks",
        "alpha",
        "band_count",
        "kept_energy_fraction",
        "stream",
    ] {
        assert!(text.contains(field), "missing {field} in table:\n{text}");
    }
}

#[test]
fn auto_fusion_follows_the_provided_streams() {
    let dir = TempDir::new().unwrap();
    let fixture = write_sine_fixture(dir.path());
    let fixture = fixture.to_str().unwrap();

    let spatial = run(&["count", "--spatial", fixture]);
    let temporal = run(&["count", "--temporal", fixture]);
    let both = run(&["count", "--spatial", fixture, "--temporal", fixture]);
    for output in [&spatial, &temporal, &both] {
        assert_exit(output, 0, "auto fusion");
    }
    let stream = |o: &Output| {
        let v: serde_json::Value = serde_json::from_str(&stdout_of(o)).unwrap();
        v["stream"].as_str().unwrap().to_string()
    };
    assert_eq!(stream(&spatial), "spatial");
    assert_eq!(stream(&temporal), "temporal");
    assert_eq!(stream(&both), "concat");
}

#[test]
fn usage_problems_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let fixture = write_sine_fixture(dir.path());
    let fixture = fixture.to_str().unwrap();

    assert_exit(&run(&["count"]), 1, "no streams at all");
    assert_exit(
        &run(&["count", "--spatial", fixture, "--fusion", "bogus"]),
        1,
        "unknown fusion",
    );
    assert_exit(
        &run(&["count", "--spatial", fixture, "--gamma", "2.0"]),
        1,
        "gamma out of range",
    );
    assert_exit(
        &run(&["count", "--spatial", fixture, "--beta", "0.0"]),
        1,
        "beta out of range",
    );
    assert_exit(&run(&["count", "--no-such-flag"]), 1, "unknown flag");
    assert_exit(&run(&["frobnicate"]), 1, "unknown subcommand");
}

#[test]
fn data_problems_exit_with_two() {
    let dir = TempDir::new().unwrap();

    let missing = dir.path().join("missing.bin");
    let output = run(&["count", "--spatial", missing.to_str().unwrap()]);
    assert_exit(&output, 2, "missing input file");

    let corrupt = dir.path().join("corrupt.bin");
    fs::write(&corrupt, b"RPMX").unwrap();
    let output = run(&["count", "--spatial", corrupt.to_str().unwrap()]);
    assert_exit(&output, 2, "corrupt input file");

    let missing_manifest = dir.path().join("nope.json");
    let output = run(&["eval", "--manifest", missing_manifest.to_str().unwrap()]);
    assert_exit(&output, 2, "missing manifest");
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_exit(&run(&["--help"]), 0, "--help");
    assert_exit(&run(&["--version"]), 0, "--version");
    assert_exit(&run(&["count", "--help"]), 0, "count --help");
}

#[test]
fn eval_scores_a_manifest() {
    let dir = TempDir::new().unwrap();
    write_sine_fixture(dir.path());
    let manifest = write_manifest(
        dir.path(),
        r#"[{"id": "sine5", "spatial": "sine5.bin", "ground_truth": 5}]"#,
    );

    let output = run(&["eval", "--manifest", manifest.to_str().unwrap()]);
    assert_exit(&output, 0, "eval");
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(report["mae"], 0.0);
    assert_eq!(report["sigma_counts"], 0.0);
    assert_eq!(report["per_video"][0]["predicted"], 5);
    assert_eq!(report["failures"].as_array().unwrap().len(), 0);

    let table = run(&[
        "eval",
        "--manifest",
        manifest.to_str().unwrap(),
        "--format",
        "table",
    ]);
    assert_exit(&table, 0, "eval --format table");
    let text = stdout_of(&table);
    assert!(text.contains("sine5"));
    assert!(text.contains("mae 0.0000"));
}

#[test]
fn eval_collects_per_entry_failures_without_dying() {
    let dir = TempDir::new().unwrap();
    write_sine_fixture(dir.path());
    let manifest = write_manifest(
        dir.path(),
        r#"[
            {"id": "good", "spatial": "sine5.bin", "ground_truth": 5},
            {"id": "gone", "spatial": "absent.bin", "ground_truth": 3}
        ]"#,
    );

    let output = run(&["eval", "--manifest", manifest.to_str().unwrap()]);
    assert_exit(&output, 0, "eval with one broken entry");
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(report["per_video"].as_array().unwrap().len(), 1);
    assert_eq!(report["failures"].as_array().unwrap().len(), 1);
    assert_eq!(report["failures"][0]["id"], "gone");
}

#[test]
fn sweep_appends_the_adaptive_row_last() {
    let dir = TempDir::new().unwrap();
    write_sine_fixture(dir.path());
    let manifest = write_manifest(
        dir.path(),
        r#"[{"id": "sine5", "spatial": "sine5.bin", "ground_truth": 5}]"#,
    );

    let output = run(&[
        "sweep",
        "--manifest",
        manifest.to_str().unwrap(),
        "--alphas",
        "10,20",
    ]);
    assert_exit(&output, 0, "sweep");
    let rows: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["label"], "fixed 10");
    assert_eq!(rows[1]["label"], "fixed 20");
    assert_eq!(rows[2]["label"], "multi-stage");

    let bad = run(&[
        "sweep",
        "--manifest",
        manifest.to_str().unwrap(),
        "--alphas",
        "1,10",
    ]);
    assert_exit(&bad, 1, "sweep with alpha below 2");
}

#[test]
fn ablate_produces_all_six_cells() {
    let dir = TempDir::new().unwrap();
    write_sine_fixture(dir.path());
    let manifest = write_manifest(
        dir.path(),
        r#"[{"id": "sine5", "spatial": "sine5.bin", "ground_truth": 5}]"#,
    );

    let output = run(&["ablate", "--manifest", manifest.to_str().unwrap()]);
    assert_exit(&output, 0, "ablate");
    let cells: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    let cells = cells.as_array().unwrap();
    assert_eq!(cells.len(), 6);
    assert_eq!(cells[0]["fmf_enabled"], false);
    assert_eq!(cells[3]["fmf_enabled"], true);
    let streams: Vec<&str> = cells
        .iter()
        .map(|c| c["stream"].as_str().unwrap())
        .collect();
    assert_eq!(
        streams,
        ["spatial", "temporal", "concat", "spatial", "temporal", "concat"]
    );
}

#[test]
fn synth_writes_matrix_pair_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"n_frames": 96, "dim": 4, "cycles": 6.0, "shape": "triangle", "seed": 7}"#,
    )
    .unwrap();
    let base = dir.path().join("tri6");

    let output = run(&[
        "synth",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        base.to_str().unwrap(),
    ]);
    assert_exit(&output, 0, "synth");

    let bin = load_binary_matrix(dir.path().join("tri6.bin")).expect("binary output loads");
    assert_eq!((bin.n_frames(), bin.dim()), (96, 4));
    let csv =
        repcount_core::load_matrix_auto(dir.path().join("tri6.csv")).expect("text output loads");
    assert_eq!(csv.values(), bin.values(), "text and binary outputs agree");

    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("tri6.json")).unwrap()).unwrap();
    assert_eq!(sidecar["ground_truth"], 6);
    assert_eq!(sidecar["spec"]["shape"], "triangle");

    // Counting the generated fixture recovers the sidecar's ground truth.
    let counted = run(&[
        "count",
        "--spatial",
        dir.path().join("tri6.bin").to_str().unwrap(),
    ]);
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&counted)).unwrap();
    assert_eq!(report["count"], 6);
}

#[test]
fn synth_seed_flag_overrides_the_spec() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"n_frames": 64, "dim": 3, "cycles": 4.0, "shape": "sine", "noise_snr_db": 10.0, "seed": 1}"#,
    )
    .unwrap();

    for (base, seed) in [("a", None), ("b", None), ("c", Some("5"))] {
        let out = dir.path().join(base);
        let mut args = vec![
            "synth".to_string(),
            "--spec".to_string(),
            spec.to_str().unwrap().to_string(),
            "--out".to_string(),
            out.to_str().unwrap().to_string(),
        ];
        if let Some(seed) = seed {
            args.push("--seed".to_string());
            args.push(seed.to_string());
        }
        let output = repcount().args(&args).output().unwrap();
        assert_exit(&output, 0, "synth run");
    }
    let read = |name: &str| fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("a.bin"), read("b.bin"), "same seed, same bytes");
    assert_ne!(read("a.bin"), read("c.bin"), "--seed changes the noise");
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    assert_eq!(
        sidecar["spec"]["seed"], 5,
        "sidecar records the actual seed"
    );
}

#[test]
fn export_waveform_writes_columnar_text() {
    let dir = TempDir::new().unwrap();
    let fixture = write_sine_fixture(dir.path());
    let out = dir.path().join("wave.txt");

    let output = run(&[
        "export-waveform",
        "--spatial",
        fixture.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0, "export-waveform");

    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# index raw filtered magnitude"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 80, "one row per frame");
    for (i, row) in rows.iter().enumerate() {
        let fields: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(fields.len(), 4, "bad row: {row}");
        assert_eq!(fields[0].parse::<usize>().unwrap(), i);
        for field in &fields[1..] {
            field
                .parse::<f64>()
                .unwrap_or_else(|_| panic!("bad number in: {row}"));
        }
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    write_sine_fixture(dir.path());
    let manifest = write_manifest(
        dir.path(),
        r#"[{"id": "sine5", "spatial": "sine5.bin", "ground_truth": 5}]"#,
    );
    let manifest = manifest.to_str().unwrap();

    let twice = |args: &[&str]| {
        let a = run(args);
        let b = run(args);
        assert_exit(&a, 0, "deterministic run");
        assert_eq!(a.stdout, b.stdout, "stdout differed for {args:?}");
        a.stdout
    };
    twice(&["eval", "--manifest", manifest]);
    twice(&["sweep", "--manifest", manifest, "--alphas", "5,10,20"]);
    twice(&["ablate", "--manifest", manifest]);
}

#[test]
fn out_flag_writes_the_same_bytes_as_stdout() {
    let dir = TempDir::new().unwrap();
    let fixture = write_sine_fixture(dir.path());
    let out = dir.path().join("report.json");

    let to_stdout = run(&["count", "--spatial", fixture.to_str().unwrap()]);
    let to_file = run(&[
        "count",
        "--spatial",
        fixture.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&to_file, 0, "count --out");
    assert_eq!(fs::read(&out).unwrap(), to_stdout.stdout);
}

#[test]
fn ladder_file_reconfigures_selection() {
    let dir = TempDir::new().unwrap();
    let fixture = write_sine_fixture(dir.path());
    let ladder = dir.path().join("ladder.json");
    fs::write(
        &ladder,
        r#"[{"bound": 2, "alpha": 8}, {"bound": null, "alpha": 12}]"#,
    )
    .unwrap();

    let output = run(&[
        "count",
        "--spatial",
        fixture.to_str().unwrap(),
        "--ladder",
        ladder.to_str().unwrap(),
    ]);
    assert_exit(&output, 0, "count with a custom ladder");
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(report["alpha"], 8, "quiet high band picks the first step");

    let broken = dir.path().join("broken.json");
    fs::write(
        &broken,
        r#"[{"bound": null, "alpha": 8}, {"bound": 2, "alpha": 12}]"#,
    )
    .unwrap();
    let output = run(&[
        "count",
        "--spatial",
        fixture.to_str().unwrap(),
        "--ladder",
        broken.to_str().unwrap(),
    ]);
    assert_exit(&output, 1, "open bound before the end is a usage error");
}

#[test]
fn fixed_alpha_flag_reaches_the_report() {
    let dir = TempDir::new().unwrap();
    let fixture = write_sine_fixture(dir.path());

    let output = run(&[
        "count",
        "--spatial",
        fixture.to_str().unwrap(),
        "--alpha",
        "17",
    ]);
    assert_exit(&output, 0, "count --alpha");
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(report["alpha"], 17);
}

/// The corpus under fixtures/ is stored output of `repcount synth`; these
/// values are frozen so regressions anywhere in the pipeline show up as a
/// diff against files that are actually checked in.
#[test]
fn shipped_fixture_corpus_scores_exactly() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/manifest.json");
    let manifest = manifest.to_str().unwrap();

    let output = run(&["eval", "--manifest", manifest]);
    assert_exit(&output, 0, "eval on the shipped corpus");
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();

    let per_video = report["per_video"].as_array().unwrap();
    assert_eq!(per_video.len(), 9);
    assert_eq!(report["failures"].as_array().unwrap().len(), 0);
    for row in per_video {
        assert_eq!(
            row["predicted"], row["ground_truth"],
            "count drifted for {}",
            row["id"]
        );
    }
    assert_eq!(report["mae"], 0.0);
    assert_eq!(report["sigma_counts"], 0.0);

    // Narrow fixed filters clip the fast fixtures' fundamentals; the
    // adaptive selection does not.  Frozen from a reference run.
    let sweep = run(&["sweep", "--manifest", manifest, "--alphas", "10,20,40"]);
    assert_exit(&sweep, 0, "sweep on the shipped corpus");
    let rows: serde_json::Value = serde_json::from_str(&stdout_of(&sweep)).unwrap();
    let rows = rows.as_array().unwrap();
    let maes: Vec<f64> = rows.iter().map(|r| r["mae"].as_f64().unwrap()).collect();
    let frozen = [
        26.296296296296294,
        9.166666666666666,
        3.3333333333333335,
        0.0,
    ];
    for (i, (&got, &want)) in maes.iter().zip(&frozen).enumerate() {
        assert!(
            (got - want).abs() < 1e-12,
            "sweep row {i}: mae {got} != {want}"
        );
    }
}

#[test]
fn shipped_pair_fixture_counts_through_concat_fusion() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/manifest.json");

    let output = run(&[
        "eval",
        "--manifest",
        manifest.to_str().unwrap(),
        "--fusion",
        "concat",
    ]);
    assert_exit(&output, 0, "eval --fusion concat");
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    // Only the two-stream entry has a motion matrix; the rest fail softly.
    let per_video = report["per_video"].as_array().unwrap();
    assert_eq!(per_video.len(), 1);
    assert_eq!(per_video[0]["id"], "pair_k9");
    assert_eq!(per_video[0]["predicted"], 9);
    assert_eq!(report["failures"].as_array().unwrap().len(), 8);
}

#[test]
fn no_fmf_still_reports_the_selection() {
    let dir = TempDir::new().unwrap();
    let fixture = write_sine_fixture(dir.path());

    let filtered = run(&["count", "--spatial", fixture.to_str().unwrap()]);
    let unfiltered = run(&["count", "--spatial", fixture.to_str().unwrap(), "--no-fmf"]);
    assert_exit(&unfiltered, 0, "count --no-fmf");
    let f: serde_json::Value = serde_json::from_str(&stdout_of(&filtered)).unwrap();
    let u: serde_json::Value = serde_json::from_str(&stdout_of(&unfiltered)).unwrap();
    assert_eq!(f["alpha"], u["alpha"], "selection is still diagnosed");
    assert_eq!(u["kept_energy_fraction"], 1.0);
    // A clean fixture counts right either way.
    assert_eq!(u["count"], 5);
}
