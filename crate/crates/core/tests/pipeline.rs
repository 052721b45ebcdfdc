//! Command-level integration tests over the fixture corpus: segmentation
//! into manifests, the resumable transpile stage, metric table generation
//! with its error sidecar, selection, tuning, and evaluation.

use std::fs;
use std::path::{Path, PathBuf};

use repset_core::cli::{self, PipelineConfig};
use repset_core::corpus::CorpusManifest;
use repset_core::metrics;
use repset_core::select::{SelectionConfig, SelectionResult};
use repset_core::transpile::{self, BackendConfig, BackendKind};

fn fixture_corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus")
}

fn write_script(dir: &Path, responses: &[String]) -> PathBuf {
    let path = dir.join("script.json");
    fs::write(&path, serde_json::to_string(responses).unwrap()).unwrap();
    path
}

/// A compiling response whose metrics vary with `i`.
fn good_response(i: usize) -> String {
    let lets: String = (0..=(i % 4))
        .map(|k| format!("let v{k} = {};\n    ", k + i))
        .collect();
    let unsafe_part = if i % 3 == 0 {
        "unsafe { core::ptr::null_mut::<i32>(); }\n    "
    } else {
        ""
    };
    format!(
        "```rust\n#[no_mangle]\npub extern \"C\" fn t{i}(x: i32) -> i32 {{\n    {lets}{unsafe_part}x + {i}\n}}\n```"
    )
}

fn mock_config(corpus_dir: PathBuf, work_dir: PathBuf, script: PathBuf) -> PipelineConfig {
    PipelineConfig {
        corpus_dir,
        work_dir,
        backend: BackendConfig {
            kind: BackendKind::Mock,
            mock_script: Some(script),
            ..BackendConfig::default()
        },
        ..PipelineConfig::default()
    }
}

#[test]
fn segment_extracts_twelve_functions_from_five_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig {
        corpus_dir: fixture_corpus(),
        work_dir: dir.path().to_path_buf(),
        ..PipelineConfig::default()
    };
    let manifest = cli::cmd_segment(&config, None, 0).unwrap();
    assert_eq!(manifest.total_functions, 12);
    assert_eq!(manifest.samples.len(), 12);
    let programs: Vec<&str> = manifest
        .samples
        .iter()
        .map(|e| e.program.as_str())
        .collect();
    assert!(programs.contains(&"alpha") && programs.contains(&"beta"));
    let names: Vec<&str> = manifest
        .samples
        .iter()
        .map(|e| e.function.as_str())
        .collect();
    for expected in [
        "accumulate",
        "clamp",
        "checked_div",
        "hash_bytes",
        "is_power_of_two",
        "magnitude2",
        "swap_axes",
        "manhattan",
        "dominates",
        "count_lines",
        "last_char",
        "gcd",
    ] {
        assert!(names.contains(&expected), "missing {expected}");
    }
    assert_eq!(
        manifest.total_sloc,
        manifest.samples.iter().map(|e| u64::from(e.sloc)).sum::<u64>()
    );
}

#[test]
fn segment_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let config = PipelineConfig {
        corpus_dir: empty,
        work_dir: dir.path().join("work"),
        ..PipelineConfig::default()
    };
    let err = cli::cmd_segment(&config, None, 0).unwrap_err();
    assert!(err.to_string().contains("no functions"));
}

#[test]
fn segment_skips_broken_files_but_keeps_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus/prog");
    fs::create_dir_all(&corpus).unwrap();
    fs::write(corpus.join("good.c"), "int ok(void){return 1;}\n").unwrap();
    fs::write(corpus.join("broken.c"), "int nope(void){ {\n").unwrap();
    let config = PipelineConfig {
        corpus_dir: dir.path().join("corpus"),
        work_dir: dir.path().join("work"),
        ..PipelineConfig::default()
    };
    let manifest = cli::cmd_segment(&config, None, 0).unwrap();
    assert_eq!(manifest.total_functions, 1);
    assert_eq!(manifest.samples[0].function, "ok");
}

#[test]
fn segment_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig {
        corpus_dir: fixture_corpus(),
        work_dir: dir.path().to_path_buf(),
        ..PipelineConfig::default()
    };
    cli::cmd_segment(&config, None, 0).unwrap();
    let first = fs::read(dir.path().join(cli::MANIFEST_FILE)).unwrap();
    cli::cmd_segment(&config, None, 0).unwrap();
    let second = fs::read(dir.path().join(cli::MANIFEST_FILE)).unwrap();
    assert_eq!(first, second);
}

#[test]
fn subsampled_manifest_records_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig {
        corpus_dir: fixture_corpus(),
        work_dir: dir.path().to_path_buf(),
        ..PipelineConfig::default()
    };
    let manifest = cli::cmd_segment(&config, Some(0.5), 42).unwrap();
    assert_eq!(manifest.total_functions, 6);
    assert_eq!(manifest.seed, Some(42));
}

/// Four-sample corpus driven to attempts (0, 2, 20, 5) by the script.
#[test]
fn transpile_scripted_attempt_counts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_dir = dir.path().join("corpus");
    fs::create_dir_all(corpus_dir.join("p")).unwrap();
    for (i, name) in ["a", "b", "c", "d"].iter().enumerate() {
        fs::write(
            corpus_dir.join(format!("p/{name}.c")),
            format!("int f{i}(int x){{\n  return x + {i};\n}}\n"),
        )
        .unwrap();
    }
    const GOOD: &str = "pub fn ok() -> i32 { 1 }";
    const BAD: &str = "pub fn bad() -> i32 { }";
    let mut script: Vec<String> = Vec::new();
    script.push(GOOD.into()); // a: 0 attempts
    script.extend([BAD.into(), BAD.into(), GOOD.into()]); // b: 2
    script.extend(std::iter::repeat_n(String::from(BAD), 21)); // c: 20, failure
    script.extend(std::iter::repeat_n(String::from(BAD), 5)); // d: 5
    script.push(GOOD.into());
    let script_path = write_script(dir.path(), &script);

    let config = mock_config(corpus_dir, dir.path().join("work"), script_path);
    fs::create_dir_all(&config.work_dir).unwrap();
    cli::cmd_segment(&config, None, 0).unwrap();
    let records = cli::cmd_transpile(&config).unwrap();

    let attempts: Vec<u32> = records.iter().map(|r| r.attempts_used).collect();
    assert_eq!(attempts, vec![0, 2, 20, 5]);
    for r in &records {
        assert_eq!(!r.success, r.attempts_used == 20);
        assert!(r.total_seconds >= r.initial_translation_seconds + r.fixing_seconds);
    }
}

#[test]
fn transpile_resumes_without_touching_existing_records() {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().join("work");
    fs::create_dir_all(&work).unwrap();
    let script: Vec<String> = (0..12).map(good_response).collect();
    let config = mock_config(fixture_corpus(), work.clone(), write_script(dir.path(), &script));
    cli::cmd_segment(&config, None, 0).unwrap();
    cli::cmd_transpile(&config).unwrap();

    let records_path = work.join(cli::RECORDS_FILE);
    let full = fs::read_to_string(&records_path).unwrap();
    let lines: Vec<&str> = full.lines().collect();
    assert_eq!(lines.len(), 12);

    // Simulate an interrupted run: keep only the first eight records.
    let truncated = lines[..8].join("\n") + "\n";
    fs::write(&records_path, &truncated).unwrap();
    // The resumed run only needs responses for the four missing samples.
    let resume_script: Vec<String> = (8..12).map(good_response).collect();
    let config = mock_config(
        fixture_corpus(),
        work.clone(),
        write_script(dir.path(), &resume_script),
    );
    let records = cli::cmd_transpile(&config).unwrap();
    assert_eq!(records.len(), 12);

    let resumed = fs::read_to_string(&records_path).unwrap();
    assert!(
        resumed.starts_with(&truncated),
        "existing records were rewritten"
    );
}

/// Full mock pipeline shared by the metric/select/evaluate tests.
fn pipeline_through_metrics(dir: &Path) -> PipelineConfig {
    let work = dir.join("work");
    fs::create_dir_all(&work).unwrap();
    let script: Vec<String> = (0..12).map(good_response).collect();
    let config = mock_config(fixture_corpus(), work, write_script(dir, &script));
    cli::cmd_segment(&config, None, 0).unwrap();
    cli::cmd_transpile(&config).unwrap();
    cli::cmd_metrics(&config).unwrap();
    config
}

#[test]
fn metrics_rows_cover_every_transpiled_sample() {
    let dir = tempfile::tempdir().unwrap();
    let config = pipeline_through_metrics(dir.path());
    let rows = metrics::read_metric_table(&config.work_dir.join(cli::METRICS_FILE)).unwrap();
    assert_eq!(rows.len(), 12);
    let manifest = CorpusManifest::load(&config.work_dir.join(cli::MANIFEST_FILE)).unwrap();
    for (row, entry) in rows.iter().zip(&manifest.samples) {
        assert_eq!(row.id, entry.id);
        assert_eq!(row.sloc, entry.sloc);
        assert!(row.mi_c.is_finite() && row.mi_rust.is_finite());
    }
    // Mock responses 0, 3, 6, 9 carry an unsafe block.
    assert_eq!(rows.iter().filter(|r| r.unsafe_complexity > 0.0).count(), 4);
}

#[test]
fn metrics_sidecar_lists_missing_rust_sources() {
    let dir = tempfile::tempdir().unwrap();
    let config = pipeline_through_metrics(dir.path());
    // Remove one stored translation.
    let manifest = CorpusManifest::load(&config.work_dir.join(cli::MANIFEST_FILE)).unwrap();
    let victim = &manifest.samples[5];
    let rust_file = config
        .work_dir
        .join(cli::RUST_DIR)
        .join(format!("{}.rs", cli::sanitize_id(&victim.id)));
    fs::remove_file(&rust_file).unwrap();

    let summary = cli::cmd_metrics(&config).unwrap();
    assert_eq!(summary.rows, 11);
    assert_eq!(summary.failures, 1);
    let sidecar =
        fs::read_to_string(config.work_dir.join(cli::METRICS_ERRORS_FILE)).unwrap();
    assert!(sidecar.contains(&victim.id));
    let rows = metrics::read_metric_table(&config.work_dir.join(cli::METRICS_FILE)).unwrap();
    assert!(rows.iter().all(|r| r.id != victim.id));
}

#[test]
fn metrics_measure_uncompilable_last_attempts() {
    // A failed loop keeps its last (uncompilable but parseable) attempt,
    // and the metric stage must still measure it.
    let dir = tempfile::tempdir().unwrap();
    let corpus_dir = dir.path().join("corpus");
    fs::create_dir_all(corpus_dir.join("p")).unwrap();
    fs::write(corpus_dir.join("p/a.c"), "int f(void){\n  return 1;\n}\n").unwrap();
    let bad = "pub fn broken(x: i32) -> i32 { let y: i64 = x; unsafe { touch(y); } y }";
    let script: Vec<String> = vec![bad.to_string(); 3];
    let mut config = mock_config(
        corpus_dir,
        dir.path().join("work"),
        write_script(dir.path(), &script),
    );
    config.backend.max_fix_attempts = 2;
    fs::create_dir_all(&config.work_dir).unwrap();
    cli::cmd_segment(&config, None, 0).unwrap();
    let records = cli::cmd_transpile(&config).unwrap();
    assert!(!records[0].success);

    let summary = cli::cmd_metrics(&config).unwrap();
    assert_eq!(summary.rows, 1);
    let rows = metrics::read_metric_table(&config.work_dir.join(cli::METRICS_FILE)).unwrap();
    assert_eq!(rows[0].unsafe_complexity, 1.0);
    assert_eq!(rows[0].type_complexity, 1);
}

#[test]
fn select_trivial_config_reports_zero_reduction() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = pipeline_through_metrics(dir.path());
    config.selection = SelectionConfig {
        n: 1,
        r: 1.0,
        seed: 0,
    };
    let result = cli::cmd_select(&config).unwrap();
    assert_eq!(result.reduction.functions_before, result.reduction.functions_after);
    assert_eq!(cli::reduction_percent(12, 12), 0.0);
    let report = SelectionResult::load(&config.work_dir.join(cli::SELECTION_FILE)).unwrap();
    assert_eq!(report, result);
}

#[test]
fn select_report_counts_match_bins() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = pipeline_through_metrics(dir.path());
    config.selection = SelectionConfig {
        n: 2,
        r: 0.5,
        seed: 0,
    };
    let result = cli::cmd_select(&config).unwrap();
    let from_bins: usize = result.bins.iter().map(|b| b.selected).sum();
    assert_eq!(result.selected_ids.len(), from_bins);
    let law: usize = result
        .bins
        .iter()
        .map(|b| ((b.population as f64 * 0.5).ceil() as usize).max(1))
        .sum();
    assert_eq!(result.selected_ids.len(), law);
}

#[test]
fn tune_single_cell_and_evaluate_full_set_score_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = pipeline_through_metrics(dir.path());
    config.tune_grid = Some(repset_core::evaluate::TuneGridSpec {
        n_min: 1,
        n_max: 1,
        r_min: 1.0,
        r_max: 1.0,
        r_step: 1.0,
    });
    let tuned = cli::cmd_tune(&config).unwrap();
    assert_eq!(tuned.best, (1, 1.0));
    assert!(tuned.best_score.abs() < 1e-12);

    config.selection = SelectionConfig {
        n: 1,
        r: 1.0,
        seed: 0,
    };
    cli::cmd_select(&config).unwrap();
    let report = cli::cmd_evaluate(&config).unwrap();
    assert!(report.relative_difference.abs() < 1e-12);
    assert_eq!(report.expected, report.observed);
}

#[test]
fn evaluate_rejects_selection_without_feedback() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = pipeline_through_metrics(dir.path());
    config.selection = SelectionConfig {
        n: 1,
        r: 1.0,
        seed: 0,
    };
    cli::cmd_select(&config).unwrap();
    // Drop one record the selection needs.
    let records_path = config.work_dir.join(cli::RECORDS_FILE);
    let records = transpile::read_records(&records_path).unwrap();
    transpile::write_records(&records_path, &records[1..]).unwrap();
    let err = cli::cmd_evaluate(&config).unwrap_err();
    assert!(err.to_string().contains("missing feedback"));
    assert!(err.to_string().contains(&records[0].sample_id));
}

#[test]
fn mock_pipeline_records_are_stable_across_runs() {
    // Same script, two runs: records must agree on everything but
    // timings.
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for dir in [&dir_a, &dir_b] {
        let work = dir.path().join("work");
        fs::create_dir_all(&work).unwrap();
        let script: Vec<String> = (0..12).map(good_response).collect();
        let config = mock_config(fixture_corpus(), work, write_script(dir.path(), &script));
        cli::cmd_segment(&config, None, 0).unwrap();
        let records = cli::cmd_transpile(&config).unwrap();
        outputs.push(
            records
                .iter()
                .map(|r| (r.sample_id.clone(), r.attempts_used, r.success))
                .collect::<Vec<_>>(),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}
