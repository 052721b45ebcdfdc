//! Pipeline commands behind the `repset` binary: each stage reads and
//! writes plain files under the work directory, so every command is
//! re-entrant and the whole pipeline is diffable.
//!
//! Stage outputs: `manifest.json`, `records.jsonl` plus `rust/*.rs`,
//! `metrics.csv` (+ `metrics_errors.txt`), `selection.json`, `tune.csv` +
//! `tune_summary.json`, and `evaluate.json`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::corpus::{self, CorpusManifest, FunctionSample, ManifestEntry, SourceUnit};
use crate::evaluate::{self, DiffReport, TuneGrid, TuneGridSpec, TuneResult};
use crate::metrics::{self, MetricRow};
use crate::select::{self, SelectionConfig, SelectionResult};
use crate::transpile::{
    self, backend_from_config, BackendConfig, BackendKind, CompilerConfig, TranspileRecord,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const RUST_DIR: &str = "rust";
pub const COMPILE_DIR: &str = "compile";
pub const METRICS_FILE: &str = "metrics.csv";
pub const METRICS_ERRORS_FILE: &str = "metrics_errors.txt";
pub const SELECTION_FILE: &str = "selection.json";
pub const TUNE_CSV_FILE: &str = "tune.csv";
pub const TUNE_SUMMARY_FILE: &str = "tune_summary.json";
pub const EVALUATE_FILE: &str = "evaluate.json";

/// Everything a pipeline run needs; usually loaded from a JSON file and
/// overridden by command-line flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_corpus_dir")]
    pub corpus_dir: PathBuf,
    #[serde(default = "default_work_dir")]
    pub work_dir: PathBuf,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub tune_grid: Option<TuneGridSpec>,
    #[serde(default = "default_worker_limit")]
    pub worker_limit: usize,
}

fn default_corpus_dir() -> PathBuf {
    PathBuf::from("corpus")
}

fn default_work_dir() -> PathBuf {
    PathBuf::from("work")
}

fn default_worker_limit() -> usize {
    1
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus_dir: default_corpus_dir(),
            work_dir: default_work_dir(),
            backend: BackendConfig::default(),
            selection: SelectionConfig::default(),
            tune_grid: None,
            worker_limit: default_worker_limit(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: PipelineConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if config.worker_limit == 0 {
            bail!("worker_limit must be at least 1");
        }
        Ok(config)
    }
}

/// Reduction percentage as reported: (1 - after/before) * 100.
pub fn reduction_percent(before: u64, after: u64) -> f64 {
    if before == 0 {
        return 0.0;
    }
    (1.0 - after as f64 / before as f64) * 100.0
}

/// 64-bit FNV-1a, used to keep sanitized file names collision-free.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Filesystem-safe name for a sample id.
pub fn sanitize_id(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}-{:08x}", fnv1a(id.as_bytes()) as u32)
}

/// Walk the corpus tree and load every `.c` file, one program per
/// subdirectory, in path order.
fn load_source_units(corpus_dir: &Path) -> Result<Vec<SourceUnit>> {
    let mut paths: Vec<PathBuf> = walkdir::WalkDir::new(corpus_dir)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "c"))
        .collect();
    paths.sort();
    let mut units = Vec::with_capacity(paths.len());
    for path in paths {
        let relative = path.strip_prefix(corpus_dir).unwrap_or(&path).to_path_buf();
        let program_name = relative
            .components()
            .next()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .filter(|_| relative.components().count() > 1)
            .unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "program".into())
            });
        let raw_text = fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        units.push(SourceUnit {
            path: relative,
            program_name,
            raw_text,
            preprocessed: true,
        });
    }
    Ok(units)
}

/// Segment every corpus file into the manifest. Per-file failures are
/// logged and skipped; extracting nothing at all is an error.
pub fn cmd_segment(
    config: &PipelineConfig,
    sample_fraction: Option<f64>,
    seed: u64,
) -> Result<CorpusManifest> {
    let units = load_source_units(&config.corpus_dir)?;
    let mut entries: Vec<ManifestEntry> = Vec::new();
    for unit in &units {
        match corpus::segment_c_file(unit) {
            Ok(samples) => entries.extend(samples.iter().map(ManifestEntry::from)),
            Err(e) => eprintln!("skipping {}: {e}", unit.path.display()),
        }
    }
    if entries.is_empty() {
        bail!(
            "no functions extracted from {}",
            config.corpus_dir.display()
        );
    }
    let mut manifest = CorpusManifest::from_entries(entries, None)?;
    if let Some(fraction) = sample_fraction {
        let full_count = manifest.total_functions;
        manifest = corpus::sample_microbenchmark(&manifest, fraction, seed)?;
        println!(
            "microbenchmark draw: {} of {full_count} functions (fraction {fraction}, seed {seed})",
            manifest.total_functions
        );
    }
    fs::create_dir_all(&config.work_dir)?;
    let path = config.work_dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_json()?)?;
    println!(
        "{} functions, {} SLoC -> {}",
        manifest.total_functions,
        manifest.total_sloc,
        path.display()
    );
    Ok(manifest)
}

/// Re-run segmentation to recover the in-memory samples behind manifest
/// entries (the manifest stores spans, not text).
fn resegment_corpus(
    config: &PipelineConfig,
    manifest: &CorpusManifest,
) -> Result<(HashMap<String, FunctionSample>, Vec<(String, String)>)> {
    let mut by_id = HashMap::new();
    let mut failures = Vec::new();
    let wanted_paths: HashSet<&str> = manifest.samples.iter().map(|e| e.path.as_str()).collect();
    for relative in &wanted_paths {
        let full = config.corpus_dir.join(relative);
        let raw_text = match fs::read_to_string(&full) {
            Ok(t) => t,
            Err(e) => {
                failures.push((relative.to_string(), format!("reading source: {e}")));
                continue;
            }
        };
        let program_name = manifest
            .samples
            .iter()
            .find(|s| s.path == *relative)
            .map(|s| s.program.clone())
            .unwrap_or_default();
        let unit = SourceUnit {
            path: PathBuf::from(relative),
            program_name,
            raw_text,
            preprocessed: true,
        };
        match corpus::segment_c_file(&unit) {
            Ok(samples) => {
                for s in samples {
                    by_id.insert(s.id.clone(), s);
                }
            }
            Err(e) => failures.push((relative.to_string(), e.to_string())),
        }
    }
    Ok((by_id, failures))
}

/// Transpile every sample that has no record yet; records and Rust sources
/// land under the work directory. Already-recorded samples are untouched,
/// so an interrupted run resumes where it stopped.
pub fn cmd_transpile(config: &PipelineConfig) -> Result<Vec<TranspileRecord>> {
    let manifest = CorpusManifest::load(&config.work_dir.join(MANIFEST_FILE))
        .context("loading manifest (run segment first)")?;
    let records_path = config.work_dir.join(RECORDS_FILE);
    let mut records: Vec<TranspileRecord> = if records_path.exists() {
        transpile::read_records(&records_path)?
    } else {
        Vec::new()
    };
    let done: HashSet<String> = records.iter().map(|r| r.sample_id.clone()).collect();

    let (samples_by_id, failures) = resegment_corpus(config, &manifest)?;
    for (path, error) in &failures {
        eprintln!("skipping {path}: {error}");
    }
    let mut pending: Vec<&FunctionSample> = Vec::new();
    for entry in manifest.samples.iter().filter(|e| !done.contains(&e.id)) {
        match samples_by_id.get(&entry.id) {
            Some(sample) => pending.push(sample),
            None => eprintln!("skipping {}: not found on re-segmentation", entry.id),
        }
    }

    let rust_dir = config.work_dir.join(RUST_DIR);
    fs::create_dir_all(&rust_dir)?;
    let compiler = CompilerConfig::default();

    let outcome_error: Mutex<Option<anyhow::Error>> = Mutex::new(None);
    let mut new_records: Vec<Option<TranspileRecord>> = vec![None; pending.len()];

    match config.backend.kind {
        BackendKind::Mock => {
            // The mock script is a single ordered stream, so mock runs are
            // strictly sequential regardless of worker_limit.
            let mut backend = backend_from_config(&config.backend)?;
            for (slot, sample) in new_records.iter_mut().zip(&pending) {
                match run_one(sample, backend.as_mut(), &compiler, config, &rust_dir) {
                    Ok(record) => *slot = Some(record),
                    Err(e) => {
                        *outcome_error.lock().unwrap() = Some(e);
                        break;
                    }
                }
            }
        }
        BackendKind::Http => {
            let next = AtomicUsize::new(0);
            let slots: Vec<Mutex<Option<TranspileRecord>>> =
                (0..pending.len()).map(|_| Mutex::new(None)).collect();
            std::thread::scope(|scope| {
                for _ in 0..config.worker_limit.max(1) {
                    scope.spawn(|| {
                        let mut backend = match backend_from_config(&config.backend) {
                            Ok(b) => b,
                            Err(e) => {
                                *outcome_error.lock().unwrap() = Some(e.into());
                                return;
                            }
                        };
                        loop {
                            let i = next.fetch_add(1, Ordering::SeqCst);
                            if i >= pending.len() || outcome_error.lock().unwrap().is_some() {
                                return;
                            }
                            match run_one(pending[i], backend.as_mut(), &compiler, config, &rust_dir)
                            {
                                Ok(record) => *slots[i].lock().unwrap() = Some(record),
                                Err(e) => {
                                    *outcome_error.lock().unwrap() = Some(e);
                                    return;
                                }
                            }
                        }
                    });
                }
            });
            for (slot, cell) in new_records.iter_mut().zip(slots) {
                *slot = cell.into_inner().unwrap();
            }
        }
    }

    let completed: Vec<TranspileRecord> = new_records.into_iter().flatten().collect();
    let newly_done = completed.len();
    records.extend(completed);
    transpile::write_records(&records_path, &records)?;

    if let Some(e) = outcome_error.into_inner().unwrap() {
        return Err(e.context(format!(
            "aborted after {newly_done} new samples; progress kept in {}",
            records_path.display()
        )));
    }
    let succeeded = records.iter().filter(|r| r.success).count();
    println!(
        "{} samples recorded ({newly_done} new), {succeeded} compiled -> {}",
        records.len(),
        records_path.display()
    );
    Ok(records)
}

fn run_one(
    sample: &FunctionSample,
    backend: &mut dyn transpile::Backend,
    compiler: &CompilerConfig,
    config: &PipelineConfig,
    rust_dir: &Path,
) -> Result<TranspileRecord> {
    let safe = sanitize_id(&sample.id);
    let workdir = config.work_dir.join(COMPILE_DIR).join(&safe);
    let outcome = transpile::transpile_function(
        &sample.id,
        &sample.c_source,
        backend,
        compiler,
        &workdir,
        config.backend.max_fix_attempts,
    )
    .with_context(|| format!("transpiling {}", sample.id))?;
    fs::write(rust_dir.join(format!("{safe}.rs")), &outcome.rust_source)?;
    Ok(outcome.record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricsSummary {
    pub rows: usize,
    pub failures: usize,
}

/// Compute the metric table for every manifest sample with a stored Rust
/// translation; failures go to the sidecar file and their rows are
/// omitted.
pub fn cmd_metrics(config: &PipelineConfig) -> Result<MetricsSummary> {
    let manifest = CorpusManifest::load(&config.work_dir.join(MANIFEST_FILE))
        .context("loading manifest (run segment first)")?;
    let (samples_by_id, file_failures) = resegment_corpus(config, &manifest)?;
    let rust_dir = config.work_dir.join(RUST_DIR);

    // Measurement is pure per sample; run data-parallel and reassemble in
    // manifest order.
    use rayon::prelude::*;
    let measured: Vec<Result<MetricRow, (String, String)>> = manifest
        .samples
        .par_iter()
        .map(|entry| {
            let sample = samples_by_id
                .get(&entry.id)
                .ok_or_else(|| (entry.id.clone(), "not found on re-segmentation".to_string()))?;
            let rust_path = rust_dir.join(format!("{}.rs", sanitize_id(&entry.id)));
            let mut sample = sample.clone();
            sample.rust_source = Some(fs::read_to_string(&rust_path).map_err(|e| {
                (entry.id.clone(), format!("missing Rust source: {e}"))
            })?);
            let v = metrics::metric_vector(&sample)
                .map_err(|e| (entry.id.clone(), e.to_string()))?;
            Ok(MetricRow {
                id: entry.id.clone(),
                program: entry.program.clone(),
                mi_c: v.mi_c,
                mi_rust: v.mi_rust,
                unsafe_complexity: v.unsafe_complexity,
                type_complexity: v.type_complexity,
                sloc: entry.sloc,
            })
        })
        .collect();

    let mut rows: Vec<MetricRow> = Vec::new();
    let mut errors: Vec<(String, String)> = file_failures;
    for result in measured {
        match result {
            Ok(row) => rows.push(row),
            Err(failure) => errors.push(failure),
        }
    }

    let sidecar: String = errors
        .iter()
        .map(|(id, e)| format!("{id}\t{e}\n"))
        .collect();
    fs::write(config.work_dir.join(METRICS_ERRORS_FILE), sidecar)?;
    if rows.is_empty() {
        bail!("no sample could be measured ({} failures)", errors.len());
    }
    metrics::write_metric_table(&config.work_dir.join(METRICS_FILE), &rows)?;
    println!(
        "{} metric rows, {} failures -> {}",
        rows.len(),
        errors.len(),
        config.work_dir.join(METRICS_FILE).display()
    );
    Ok(MetricsSummary {
        rows: rows.len(),
        failures: errors.len(),
    })
}

/// Run selection at the configured (n, r) and report the reduction.
pub fn cmd_select(config: &PipelineConfig) -> Result<SelectionResult> {
    let rows = metrics::read_metric_table(&config.work_dir.join(METRICS_FILE))
        .context("loading metric table (run metrics first)")?;
    let result = select::select(&rows, &config.selection)?;
    fs::write(config.work_dir.join(SELECTION_FILE), result.to_json()?)?;
    let red = &result.reduction;
    println!(
        "functions {} -> {} ({:.1}% reduction), SLoC {} -> {} ({:.1}% reduction) -> {}",
        red.functions_before,
        red.functions_after,
        reduction_percent(red.functions_before, red.functions_after),
        red.sloc_before,
        red.sloc_after,
        reduction_percent(red.sloc_before, red.sloc_after),
        config.work_dir.join(SELECTION_FILE).display()
    );
    Ok(result)
}

fn feedback_from_records(records: &[TranspileRecord]) -> BTreeMap<String, u32> {
    records
        .iter()
        .map(|r| (r.sample_id.clone(), r.attempts_used))
        .collect()
}

/// Grid-search the two hyperparameters against recorded fix attempts.
pub fn cmd_tune(config: &PipelineConfig) -> Result<TuneResult> {
    let rows = metrics::read_metric_table(&config.work_dir.join(METRICS_FILE))
        .context("loading metric table (run metrics first)")?;
    let records = transpile::read_records(&config.work_dir.join(RECORDS_FILE))
        .context("loading transpile records (run transpile first)")?;
    let feedback = feedback_from_records(&records);
    let grid = match &config.tune_grid {
        Some(spec) => TuneGrid::from_spec(spec)?,
        None => TuneGrid::default(),
    };
    let result = evaluate::tune(&rows, &feedback, &grid)?;
    evaluate::write_tune_csv(&config.work_dir.join(TUNE_CSV_FILE), &result)?;
    evaluate::write_tune_summary(&config.work_dir.join(TUNE_SUMMARY_FILE), &result)?;
    println!(
        "{} cells -> best (n={}, r={}) at relative difference {:.4} -> {}",
        result.grid.len(),
        result.best.0,
        result.best.1,
        result.best_score,
        config.work_dir.join(TUNE_CSV_FILE).display()
    );
    Ok(result)
}

/// Score the stored selection against the stored records and print both
/// distributions.
pub fn cmd_evaluate(config: &PipelineConfig) -> Result<DiffReport> {
    let selection = SelectionResult::load(&config.work_dir.join(SELECTION_FILE))
        .context("loading selection report (run select first)")?;
    let records = transpile::read_records(&config.work_dir.join(RECORDS_FILE))
        .context("loading transpile records (run transpile first)")?;
    let feedback = feedback_from_records(&records);
    let missing: Vec<&String> = selection
        .selected_ids
        .iter()
        .filter(|id| !feedback.contains_key(*id))
        .collect();
    if !missing.is_empty() {
        bail!(
            "missing feedback for {} selected ids: {}",
            missing.len(),
            missing
                .iter()
                .take(10)
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    let report = evaluate::diff_report(&selection, &feedback)?;
    fs::write(
        config.work_dir.join(EVALUATE_FILE),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!("relative difference: {:.4}", report.relative_difference);
    println!("expected: {}", format_buckets(&report.expected.buckets));
    println!("observed: {}", format_buckets(&report.observed.buckets));
    Ok(report)
}

fn format_buckets(buckets: &[f64]) -> String {
    let parts: Vec<String> = buckets.iter().map(|b| format!("{b:.2}")).collect();
    format!("[{}]", parts.join(", "))
}
