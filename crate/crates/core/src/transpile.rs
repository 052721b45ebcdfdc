//! C-to-Rust translation loop against a pluggable backend.
//!
//! One sample runs strictly sequentially: initial prompt, compile check,
//! then up to `max_fix_attempts` rounds of fix prompt + compile check, each
//! fix fed by the previous round's compiler diagnostics. Failed runs keep
//! the last attempt's Rust text so complexity metrics can still be taken
//! from it.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TranspileError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed backend response: {0}")]
    MalformedBackendResponse(String),
    #[error("backend returned an empty response")]
    EmptyResponse,
    #[error("rust compiler not found: {0}")]
    CompilerNotFound(String),
    #[error("compiler exceeded the {}s limit", .0.as_secs())]
    CompilerTimeout(Duration),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("mock script: {0}")]
    Script(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

/// Backend selection plus loop limits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint_url: Option<String>,
    #[serde(default)]
    pub model_name: Option<String>,
    /// Per-request timeout in seconds.
    #[serde(default = "default_timeout_s")]
    pub request_timeout_s: f64,
    #[serde(default = "default_max_fix_attempts")]
    pub max_fix_attempts: u32,
    /// Scripted responses for the mock backend.
    #[serde(default)]
    pub mock_script: Option<PathBuf>,
}

fn default_timeout_s() -> f64 {
    300.0
}

pub fn default_max_fix_attempts() -> u32 {
    20
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint_url: None,
            model_name: None,
            request_timeout_s: default_timeout_s(),
            max_fix_attempts: default_max_fix_attempts(),
            mock_script: None,
        }
    }
}

/// Outcome of the compile-fix loop for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranspileRecord {
    #[serde(rename = "id")]
    pub sample_id: String,
    #[serde(rename = "attempts")]
    pub attempts_used: u32,
    pub success: bool,
    #[serde(rename = "initial_s")]
    pub initial_translation_seconds: f64,
    #[serde(rename = "fixing_s")]
    pub fixing_seconds: f64,
    #[serde(rename = "total_s")]
    pub total_seconds: f64,
}

/// One compiler invocation's result.
#[derive(Debug, Clone)]
pub struct CompileResult {
    pub compiled: bool,
    pub diagnostics: String,
    pub elapsed: Duration,
}

/// Instruction block appended to the C source for the initial translation
/// request. Reproduced character-for-character from the harness scripts
/// this tool replays, typos included, because backends were prompted with
/// exactly this text.
const INITIAL_INSTRUCTIONS: &str = "\
Behave like you are an expert of C and Rust. Behave like you are a translator from C language to Rust language. Can you translate C code given above into Rust code?

Do not explain the code to me! Only return Rust code correspoding to the given C code.

Follow these intructions strictly in translation:

(1) Do not add any extra error handling,

(2) Do not merge functions,

(3) Do not change variable names,

(4) Use no_mangle for each function,

(5) Make each function public,

(6) Translate the standard C library function calls by placing a decoy function call (leave the decoy function body empty if possible) with the same name, and

(7) Only return a Rust code and nothing else!";

/// Instruction block appended to the Rust source and diagnostics on every
/// fixing round.
const FIXING_INSTRUCTIONS: &str = "\
When attempted to compile the recently generated rust code, I obtained the compilation errors given above. Fix those errors and only return the modified Rust code. Do not explain the code or changes to me!";

/// C source first, then the seven-point instruction block.
pub fn build_initial_prompt(c_source: &str) -> String {
    format!("{c_source}\n\n{INITIAL_INSTRUCTIONS}\n")
}

/// Rust source, then the compiler diagnostics, then the fixing
/// instructions, all byte-preserved.
pub fn build_fix_prompt(rust_source: &str, diagnostics: &str) -> String {
    format!("{rust_source}\n\n{diagnostics}\n\n{FIXING_INSTRUCTIONS}\n")
}

/// Pull code out of a backend response: the concatenated contents of all
/// fenced blocks when fences are present, the trimmed response otherwise.
pub fn extract_code(response: &str) -> Result<String, TranspileError> {
    let mut blocks: Vec<&str> = Vec::new();
    let mut block_start: Option<usize> = None;
    let mut cursor = 0;
    for line in response.split_inclusive('\n') {
        let at = cursor;
        cursor += line.len();
        if line.trim_start().starts_with("```") {
            match block_start.take() {
                None => block_start = Some(cursor),
                Some(start) => blocks.push(&response[start..at]),
            }
        }
    }
    // An unclosed fence runs to the end of the response.
    if let Some(start) = block_start {
        blocks.push(&response[start..]);
    }
    let code = if blocks.is_empty() {
        trim_blank_lines(response).to_string()
    } else {
        blocks
            .iter()
            .map(|b| b.strip_suffix('\n').unwrap_or(b))
            .collect::<Vec<_>>()
            .join("\n")
    };
    if code.trim().is_empty() {
        return Err(TranspileError::EmptyResponse);
    }
    Ok(code)
}

fn trim_blank_lines(text: &str) -> &str {
    let mut start = 0;
    let mut end = text.len();
    for line in text.split_inclusive('\n') {
        if line.trim().is_empty() {
            start += line.len();
        } else {
            break;
        }
    }
    for line in text[start..].split_inclusive('\n').rev() {
        if line.trim().is_empty() {
            end -= line.len();
        } else {
            break;
        }
    }
    &text[start..end]
}

/// External compiler invocation settings.
#[derive(Debug, Clone)]
pub struct CompilerConfig {
    pub program: PathBuf,
    pub timeout: Duration,
}

impl Default for CompilerConfig {
    fn default() -> Self {
        CompilerConfig {
            program: PathBuf::from("rustc"),
            timeout: Duration::from_secs(300),
        }
    }
}

/// Write the source to a standalone file and compile it in library mode
/// (`--crate-type=lib --emit=metadata`), so a missing `main` is not an
/// error and no linker runs.
pub fn compile_check(
    rust_source: &str,
    workdir: &Path,
    compiler: &CompilerConfig,
) -> Result<CompileResult, TranspileError> {
    fs::create_dir_all(workdir)?;
    let source_path = workdir.join("sample.rs");
    fs::write(&source_path, rust_source)?;
    let started = Instant::now();
    let mut child = Command::new(&compiler.program)
        .arg("--edition=2021")
        .arg("--crate-type=lib")
        .arg("--emit=metadata")
        .arg("--out-dir")
        .arg(workdir)
        .arg(&source_path)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                TranspileError::CompilerNotFound(compiler.program.display().to_string())
            } else {
                TranspileError::Io(e)
            }
        })?;

    let status = loop {
        match child.try_wait()? {
            Some(status) => break status,
            None => {
                if started.elapsed() > compiler.timeout {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(TranspileError::CompilerTimeout(compiler.timeout));
                }
                std::thread::sleep(Duration::from_millis(10));
            }
        }
    };
    let mut diagnostics = String::new();
    if let Some(mut stderr) = child.stderr.take() {
        stderr.read_to_string(&mut diagnostics)?;
    }
    Ok(CompileResult {
        compiled: status.success(),
        diagnostics,
        elapsed: started.elapsed(),
    })
}

/// A translation backend; one call per prompt.
pub trait Backend: Send {
    fn translate(&mut self, prompt: &str) -> Result<String, TranspileError>;
}

/// Replays a fixed list of responses in order; exhaustion is an error.
pub struct MockBackend {
    responses: std::collections::VecDeque<String>,
}

impl MockBackend {
    pub fn new(responses: Vec<String>) -> Self {
        MockBackend {
            responses: responses.into(),
        }
    }

    /// Load a JSON array of response strings.
    pub fn from_script_file(path: &Path) -> Result<Self, TranspileError> {
        let text = fs::read_to_string(path)?;
        let responses: Vec<String> = serde_json::from_str(&text)?;
        Ok(MockBackend::new(responses))
    }

    pub fn remaining(&self) -> usize {
        self.responses.len()
    }
}

impl Backend for MockBackend {
    fn translate(&mut self, _prompt: &str) -> Result<String, TranspileError> {
        self.responses
            .pop_front()
            .ok_or_else(|| TranspileError::BackendUnavailable("mock script exhausted".into()))
    }
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    stream: bool,
}

/// Minimal JSON-over-HTTP generate client: POST `{"model", "prompt",
/// "stream": false}`, read the `"response"` text field.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint_url: String,
    model_name: String,
}

impl HttpBackend {
    pub fn new(
        endpoint_url: String,
        model_name: String,
        timeout: Duration,
    ) -> Result<Self, TranspileError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TranspileError::BackendUnavailable(e.to_string()))?;
        Ok(HttpBackend {
            client,
            endpoint_url,
            model_name,
        })
    }
}

impl Backend for HttpBackend {
    fn translate(&mut self, prompt: &str) -> Result<String, TranspileError> {
        let body = GenerateRequest {
            model: &self.model_name,
            prompt,
            stream: false,
        };
        let response = self
            .client
            .post(&self.endpoint_url)
            .json(&body)
            .send()
            .map_err(|e| TranspileError::BackendUnavailable(e.to_string()))?;
        if !response.status().is_success() {
            return Err(TranspileError::BackendUnavailable(format!(
                "{} returned {}",
                self.endpoint_url,
                response.status()
            )));
        }
        let value: serde_json::Value = response
            .json()
            .map_err(|e| TranspileError::MalformedBackendResponse(e.to_string()))?;
        match value.get("response").and_then(|v| v.as_str()) {
            Some(text) => Ok(text.to_string()),
            None => Err(TranspileError::MalformedBackendResponse(
                "missing \"response\" text field".into(),
            )),
        }
    }
}

/// Build the configured backend.
pub fn backend_from_config(config: &BackendConfig) -> Result<Box<dyn Backend>, TranspileError> {
    match config.kind {
        BackendKind::Mock => {
            let script = config.mock_script.as_ref().ok_or_else(|| {
                TranspileError::InvalidConfig("mock backend requires a mock_script path".into())
            })?;
            Ok(Box::new(MockBackend::from_script_file(script)?))
        }
        BackendKind::Http => {
            let endpoint = config.endpoint_url.clone().ok_or_else(|| {
                TranspileError::InvalidConfig("http backend requires endpoint_url".into())
            })?;
            let model = config.model_name.clone().ok_or_else(|| {
                TranspileError::InvalidConfig("http backend requires model_name".into())
            })?;
            Ok(Box::new(HttpBackend::new(
                endpoint,
                model,
                Duration::from_secs_f64(config.request_timeout_s),
            )?))
        }
    }
}

/// Rust text plus the loop record for one sample.
#[derive(Debug, Clone)]
pub struct TranspileOutcome {
    pub record: TranspileRecord,
    pub rust_source: String,
}

/// Run the full loop for one function: translate, compile, and fix until
/// the code compiles or the attempt limit is reached. Compiler timeouts and
/// empty responses count as failed rounds, not crashes; the last attempt's
/// text is kept either way.
pub fn transpile_function(
    sample_id: &str,
    c_source: &str,
    backend: &mut dyn Backend,
    compiler: &CompilerConfig,
    workdir: &Path,
    max_fix_attempts: u32,
) -> Result<TranspileOutcome, TranspileError> {
    let total_start = Instant::now();

    let initial_start = Instant::now();
    let response = backend.translate(&build_initial_prompt(c_source))?;
    let initial_translation_seconds = initial_start.elapsed().as_secs_f64();

    let mut rust_source = match extract_code(&response) {
        Ok(code) => code,
        Err(TranspileError::EmptyResponse) => String::new(),
        Err(e) => return Err(e),
    };
    let mut result = check_round(&rust_source, workdir, compiler)?;

    let mut attempts_used = 0u32;
    let mut fixing_seconds = 0.0f64;
    while !result.compiled && attempts_used < max_fix_attempts {
        let prompt = build_fix_prompt(&rust_source, &result.diagnostics);
        let fix_start = Instant::now();
        let response = backend.translate(&prompt)?;
        fixing_seconds += fix_start.elapsed().as_secs_f64();
        attempts_used += 1;
        match extract_code(&response) {
            Ok(code) => rust_source = code,
            Err(TranspileError::EmptyResponse) => {
                result = empty_response_round();
                continue;
            }
            Err(e) => return Err(e),
        }
        result = check_round(&rust_source, workdir, compiler)?;
    }

    Ok(TranspileOutcome {
        record: TranspileRecord {
            sample_id: sample_id.to_string(),
            attempts_used,
            success: result.compiled,
            initial_translation_seconds,
            fixing_seconds,
            total_seconds: total_start.elapsed().as_secs_f64(),
        },
        rust_source,
    })
}

/// One compile round; a timeout or an empty source is a failed round.
fn check_round(
    rust_source: &str,
    workdir: &Path,
    compiler: &CompilerConfig,
) -> Result<CompileResult, TranspileError> {
    if rust_source.trim().is_empty() {
        return Ok(empty_response_round());
    }
    match compile_check(rust_source, workdir, compiler) {
        Ok(result) => Ok(result),
        Err(TranspileError::CompilerTimeout(limit)) => Ok(CompileResult {
            compiled: false,
            diagnostics: format!("error: compilation exceeded the {}s limit", limit.as_secs()),
            elapsed: limit,
        }),
        Err(e) => Err(e),
    }
}

fn empty_response_round() -> CompileResult {
    CompileResult {
        compiled: false,
        diagnostics: "error: backend returned an empty response".to_string(),
        elapsed: Duration::ZERO,
    }
}

/// Append-oriented JSON-lines records file.
pub fn write_records(path: &Path, records: &[TranspileRecord]) -> Result<(), TranspileError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<TranspileRecord>, TranspileError> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(line)?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_prompt_contains_all_instructions() {
        let prompt = build_initial_prompt("int f(void){return 0;}");
        assert!(prompt.starts_with("int f(void){return 0;}"));
        assert!(prompt.contains("Do not merge functions"));
        assert!(prompt.contains("no_mangle for each function"));
        assert!(prompt.contains("Only return a Rust code and nothing else!"));
        for n in 1..=7 {
            assert!(prompt.contains(&format!("({n})")), "missing point ({n})");
        }
    }

    #[test]
    fn fix_prompt_passes_diagnostics_through() {
        let diag = "error[E0308]: mismatched types\nerror: aborting";
        let prompt = build_fix_prompt("fn f() {}", diag);
        assert!(prompt.contains("Fix those errors"));
        assert!(prompt.contains(diag));
        let unusual = "fn f() { /* ünïcødé ✓ */ }";
        assert!(build_fix_prompt(unusual, "e").contains(unusual));
    }

    #[test]
    fn extract_single_fence() {
        assert_eq!(extract_code("```rust\nfn f(){}\n```").unwrap(), "fn f(){}");
    }

    #[test]
    fn extract_bare_code_passthrough() {
        assert_eq!(extract_code("fn f(){}").unwrap(), "fn f(){}");
        assert_eq!(extract_code("\n\nfn f(){}\n\n").unwrap(), "fn f(){}\n");
    }

    #[test]
    fn extract_concatenates_multiple_fences() {
        assert_eq!(
            extract_code("text\n```\na\n```\nmid\n```\nb\n```").unwrap(),
            "a\nb"
        );
    }

    #[test]
    fn extract_unclosed_fence_runs_to_end() {
        assert_eq!(extract_code("```rust\nfn f(){}\n").unwrap(), "fn f(){}");
    }

    #[test]
    fn extract_rejects_empty() {
        assert!(matches!(
            extract_code("```\n```"),
            Err(TranspileError::EmptyResponse)
        ));
        assert!(matches!(
            extract_code("   \n  "),
            Err(TranspileError::EmptyResponse)
        ));
    }

    #[test]
    fn mock_backend_replays_and_exhausts() {
        let mut mock = MockBackend::new(vec!["A".into(), "B".into()]);
        assert_eq!(mock.translate("x").unwrap(), "A");
        assert_eq!(mock.translate("x").unwrap(), "B");
        assert!(matches!(
            mock.translate("x"),
            Err(TranspileError::BackendUnavailable(_))
        ));
    }

    #[test]
    fn compile_check_accepts_a_unit() {
        let dir = tempfile::tempdir().unwrap();
        let result =
            compile_check("pub fn f() -> i32 { 0 }", dir.path(), &CompilerConfig::default())
                .unwrap();
        assert!(result.compiled, "diagnostics: {}", result.diagnostics);
    }

    #[test]
    fn compile_check_reports_type_errors() {
        let dir = tempfile::tempdir().unwrap();
        let result =
            compile_check("pub fn f() -> i32 { \"x\" }", dir.path(), &CompilerConfig::default())
                .unwrap();
        assert!(!result.compiled);
        assert!(result.diagnostics.contains("mismatched types"));
    }

    #[test]
    fn compile_check_missing_compiler() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = CompilerConfig {
            program: PathBuf::from("definitely-not-a-rustc"),
            timeout: Duration::from_secs(5),
        };
        assert!(matches!(
            compile_check("pub fn f() {}", dir.path(), &cfg),
            Err(TranspileError::CompilerNotFound(_))
        ));
    }

    /// Labels fixed by compiling each snippet once by hand.
    #[test]
    fn compile_check_matches_labeled_fixtures() {
        let fixtures: [(&str, bool); 10] = [
            ("pub fn a() -> i32 { 0 }", true),
            ("pub fn b(x: i32) -> i32 { x + 1 }", true),
            ("#[no_mangle]\npub extern \"C\" fn c(x: u8) -> u8 { x }", true),
            ("pub fn d() {}", true),
            ("pub fn e(p: *const i32) -> i32 { unsafe { *p } }", true),
            ("pub fn f() -> i32 { \"x\" }", false),
            ("pub fn g( { }", false),
            ("pub fn h() { undefined_symbol(); }", false),
            ("pub fn i() -> NoSuchType { 0 }", false),
            ("pub fn j(x: i32) -> i32 { x; }", false),
        ];
        let dir = tempfile::tempdir().unwrap();
        let compiler = CompilerConfig::default();
        for (i, (source, expected)) in fixtures.iter().enumerate() {
            let workdir = dir.path().join(format!("w{i}"));
            let result = compile_check(source, &workdir, &compiler).unwrap();
            assert_eq!(result.compiled, *expected, "fixture {i}: {source}");
        }
    }

    const GOOD: &str = "pub fn ok() -> i32 { 1 }";
    const BAD: &str = "pub fn bad() -> i32 { }";

    struct CountingBackend {
        inner: MockBackend,
        calls: usize,
    }

    impl Backend for CountingBackend {
        fn translate(&mut self, prompt: &str) -> Result<String, TranspileError> {
            self.calls += 1;
            self.inner.translate(prompt)
        }
    }

    fn run_scripted(script: Vec<&str>, max: u32) -> (TranspileOutcome, usize) {
        let dir = tempfile::tempdir().unwrap();
        let mut backend = CountingBackend {
            inner: MockBackend::new(script.into_iter().map(String::from).collect()),
            calls: 0,
        };
        let outcome = transpile_function(
            "p/a/f:1",
            "int f(void){return 1;}",
            &mut backend,
            &CompilerConfig::default(),
            dir.path(),
            max,
        )
        .unwrap();
        (outcome, backend.calls)
    }

    #[test]
    fn immediate_success_uses_zero_attempts() {
        let (outcome, calls) = run_scripted(vec![GOOD], 20);
        assert_eq!(outcome.record.attempts_used, 0);
        assert!(outcome.record.success);
        assert_eq!(outcome.rust_source, GOOD);
        assert_eq!(calls, 1);
    }

    #[test]
    fn scripted_recovery_after_two_failures() {
        let (outcome, calls) = run_scripted(vec![BAD, BAD, GOOD], 20);
        assert_eq!(outcome.record.attempts_used, 2);
        assert!(outcome.record.success);
        assert_eq!(outcome.rust_source, GOOD);
        assert_eq!(calls, 3);
    }

    #[test]
    fn failure_at_the_limit_keeps_last_attempt() {
        let script = vec![BAD; 4];
        let (outcome, calls) = run_scripted(script, 3);
        assert_eq!(outcome.record.attempts_used, 3);
        assert!(!outcome.record.success);
        assert_eq!(outcome.rust_source, BAD);
        assert_eq!(calls, 4);
        assert!(
            outcome.record.total_seconds
                >= outcome.record.initial_translation_seconds + outcome.record.fixing_seconds
        );
    }

    #[test]
    fn zero_attempt_limit_fails_without_fixing() {
        let (outcome, calls) = run_scripted(vec![BAD], 0);
        assert_eq!(outcome.record.attempts_used, 0);
        assert!(!outcome.record.success);
        assert_eq!(calls, 1);
    }

    #[test]
    fn records_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let records = vec![
            TranspileRecord {
                sample_id: "p/a/f:1".into(),
                attempts_used: 0,
                success: true,
                initial_translation_seconds: 0.5,
                fixing_seconds: 0.0,
                total_seconds: 0.75,
            },
            TranspileRecord {
                sample_id: "p/a/g:9".into(),
                attempts_used: 20,
                success: false,
                initial_translation_seconds: 1.5,
                fixing_seconds: 30.0,
                total_seconds: 35.0,
            },
        ];
        write_records(&path, &records).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let first_line = text.lines().next().unwrap();
        assert!(first_line.contains("\"id\":"));
        assert!(first_line.contains("\"attempts\":"));
        assert!(first_line.contains("\"initial_s\":"));
        assert_eq!(read_records(&path).unwrap(), records);
    }
}
