//! Corpus ingestion: segment preprocessed C files into single-function
//! samples, count source lines, and manage corpus manifests.
//!
//! The segmenter is lexer-driven: it matches braces on the token stream
//! (so string literals, char literals, comments, and preprocessor
//! linemarkers can never unbalance it) and recognizes a top-level
//! `... name ( params ) { body }` shape as a function definition.
//! Everything before the first definition in a file is treated as a shared
//! prelude (typedefs, globals, declarations) and is prepended to every
//! sample so each extracted function keeps its compilation context.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::{self, Lang, LexError, Token, TokenKind};
use crate::transpile::TranspileRecord;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: unbalanced braces at line {line}")]
    UnbalancedBraces { path: PathBuf, line: u32 },
    #[error("{path}: no function definitions found")]
    NoFunctionsFound { path: PathBuf },
    #[error("{path}: {source}")]
    Lex {
        path: PathBuf,
        #[source]
        source: LexError,
    },
    #[error("sampling fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
}

/// One preprocessed C input file.
#[derive(Debug, Clone)]
pub struct SourceUnit {
    pub path: PathBuf,
    pub program_name: String,
    pub raw_text: String,
    pub preprocessed: bool,
}

/// One extracted C function plus its (possibly failed) Rust translation.
#[derive(Debug, Clone)]
pub struct FunctionSample {
    pub id: String,
    pub program_name: String,
    pub function_name: String,
    /// Shared file prelude followed by the function definition text.
    pub c_source: String,
    /// Byte offset in `c_source` where the definition starts.
    pub prelude_len: usize,
    /// 1-based line span of the definition in the original file.
    pub start_line: u32,
    pub end_line: u32,
    /// Lines of the definition with at least one non-comment,
    /// non-whitespace character.
    pub sloc: u32,
    pub path: PathBuf,
    pub rust_source: Option<String>,
    pub transpile: Option<TranspileRecord>,
}

impl FunctionSample {
    /// The function definition alone, without the shared prelude.
    pub fn definition(&self) -> &str {
        &self.c_source[self.prelude_len..]
    }
}

/// Manifest row, serialized exactly as the manifest file expects it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub program: String,
    pub function: String,
    pub path: String,
    pub start_line: u32,
    pub end_line: u32,
    pub sloc: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub samples: Vec<ManifestEntry>,
    pub total_functions: u64,
    pub total_sloc: u64,
    pub seed: Option<u64>,
}

impl CorpusManifest {
    /// Build a manifest from entries, computing the totals and checking id
    /// uniqueness.
    pub fn from_entries(
        samples: Vec<ManifestEntry>,
        seed: Option<u64>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for e in &samples {
            if !seen.insert(e.id.as_str()) {
                return Err(CorpusError::DuplicateId(e.id.clone()));
            }
        }
        let total_functions = samples.len() as u64;
        let total_sloc = samples.iter().map(|e| u64::from(e.sloc)).sum();
        Ok(CorpusManifest {
            samples,
            total_functions,
            total_sloc,
            seed,
        })
    }

    pub fn to_json(&self) -> Result<String, CorpusError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

impl From<&FunctionSample> for ManifestEntry {
    fn from(s: &FunctionSample) -> Self {
        ManifestEntry {
            id: s.id.clone(),
            program: s.program_name.clone(),
            function: s.function_name.clone(),
            path: s.path.to_string_lossy().into_owned(),
            start_line: s.start_line,
            end_line: s.end_line,
            sloc: s.sloc,
        }
    }
}

/// Count lines containing at least one non-whitespace, non-comment
/// character. Blank lines and comment-only lines are excluded; `//` and
/// `/* ... */` comments are recognized, string and char literals are
/// respected (a `//` inside a string does not start a comment).
pub fn count_sloc(text: &str) -> u32 {
    #[derive(PartialEq)]
    enum State {
        Code,
        LineComment,
        BlockComment,
        Str { raw_hashes: Option<usize> },
    }
    let mut state = State::Code;
    let mut count = 0u32;
    let mut line_has_code = false;
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'\n' {
            if line_has_code {
                count += 1;
            }
            line_has_code = false;
            if state == State::LineComment {
                state = State::Code;
            }
            i += 1;
            continue;
        }
        match state {
            State::Code => match b {
                b'/' if bytes.get(i + 1) == Some(&b'/') => {
                    state = State::LineComment;
                    i += 2;
                }
                b'/' if bytes.get(i + 1) == Some(&b'*') => {
                    state = State::BlockComment;
                    i += 2;
                }
                b'"' => {
                    line_has_code = true;
                    state = State::Str { raw_hashes: None };
                    i += 1;
                }
                b'r' | b'b'
                    if !prev_is_ident(bytes, i) && raw_string_open(bytes, i).is_some() =>
                {
                    let hashes = raw_string_open(bytes, i).unwrap();
                    line_has_code = true;
                    state = State::Str {
                        raw_hashes: Some(hashes),
                    };
                    // Skip past prefix, hashes, and opening quote.
                    while bytes[i] != b'"' {
                        i += 1;
                    }
                    i += 1;
                }
                b'\'' => {
                    line_has_code = true;
                    // Treat as a char literal only when it closes like one;
                    // otherwise it is a lifetime tick.
                    if let Some(end) = char_literal_end(bytes, i) {
                        i = end;
                    } else {
                        i += 1;
                    }
                }
                _ => {
                    if !b.is_ascii_whitespace() {
                        line_has_code = true;
                    }
                    i += 1;
                }
            },
            State::LineComment => i += 1,
            State::BlockComment => {
                if b == b'*' && bytes.get(i + 1) == Some(&b'/') {
                    state = State::Code;
                    i += 2;
                } else {
                    i += 1;
                }
            }
            State::Str { raw_hashes } => {
                if !b.is_ascii_whitespace() {
                    line_has_code = true;
                }
                match raw_hashes {
                    None => match b {
                        b'\\' => i += 2,
                        b'"' => {
                            state = State::Code;
                            i += 1;
                        }
                        _ => i += 1,
                    },
                    Some(h) => {
                        if b == b'"'
                            && bytes[i + 1..].iter().take(h).filter(|&&c| c == b'#').count() == h
                        {
                            state = State::Code;
                            i += 1 + h;
                        } else {
                            i += 1;
                        }
                    }
                }
            }
        }
    }
    if line_has_code {
        count += 1;
    }
    count
}

fn prev_is_ident(bytes: &[u8], i: usize) -> bool {
    i > 0 && (bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'_')
}

/// If `bytes[i..]` opens a Rust raw/byte string (`r"`, `b"`, `br"`,
/// `r#...#"`), return the number of hashes.
fn raw_string_open(bytes: &[u8], i: usize) -> Option<usize> {
    let mut j = i + 1;
    if bytes[i] == b'b' && bytes.get(j) == Some(&b'r') {
        j += 1;
    }
    let mut hashes = 0;
    while bytes.get(j) == Some(&b'#') {
        hashes += 1;
        j += 1;
    }
    if bytes.get(j) == Some(&b'"') {
        Some(hashes)
    } else {
        None
    }
}

/// End index (exclusive) of a char literal starting at the quote, or None
/// when the quote is a lifetime tick or unterminated.
fn char_literal_end(bytes: &[u8], i: usize) -> Option<usize> {
    let mut j = i + 1;
    let mut len = 0;
    while j < bytes.len() && len < 12 {
        match bytes[j] {
            b'\\' => j += 2,
            b'\'' => return Some(j + 1),
            b'\n' => return None,
            _ => j += 1,
        }
        len += 1;
    }
    None
}

/// Split a preprocessed C file into single-function samples, ordered by
/// start line. Non-function top-level content is excluded from the
/// definitions, but everything before the first function is attached to
/// each sample as a shared prelude.
pub fn segment_c_file(unit: &SourceUnit) -> Result<Vec<FunctionSample>, CorpusError> {
    let tokens = lexer::tokenize(&unit.raw_text, Lang::C).map_err(|source| CorpusError::Lex {
        path: unit.path.clone(),
        source,
    })?;

    struct Definition {
        name: String,
        first_token: usize,
        close_brace: usize,
    }

    let mut defs: Vec<Definition> = Vec::new();
    let mut span_start: Option<usize> = None;
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.is("{") {
            let close = lexer::matching_brace(&tokens, i).ok_or(CorpusError::UnbalancedBraces {
                path: unit.path.clone(),
                line: t.line,
            })?;
            if let Some(start) = span_start {
                if let Some(name) = function_name(&tokens[start..i]) {
                    defs.push(Definition {
                        name,
                        first_token: start,
                        close_brace: close,
                    });
                }
            }
            span_start = None;
            i = close + 1;
        } else if t.is(";") {
            span_start = None;
            i += 1;
        } else if t.is("}") {
            return Err(CorpusError::UnbalancedBraces {
                path: unit.path.clone(),
                line: t.line,
            });
        } else {
            if span_start.is_none() {
                span_start = Some(i);
            }
            i += 1;
        }
    }

    if defs.is_empty() {
        return Err(CorpusError::NoFunctionsFound {
            path: unit.path.clone(),
        });
    }

    let prelude_end = tokens[defs[0].first_token].offset;
    let prelude = &unit.raw_text[..prelude_end];
    let file_stem = unit
        .path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "file".to_string());

    let samples = defs
        .into_iter()
        .map(|d| {
            let first = &tokens[d.first_token];
            let close = &tokens[d.close_brace];
            let definition = &unit.raw_text[first.offset..close.end()];
            let mut c_source = String::with_capacity(prelude.len() + definition.len() + 1);
            c_source.push_str(prelude);
            if !prelude.is_empty() && !prelude.ends_with('\n') {
                c_source.push('\n');
            }
            let prelude_len = c_source.len();
            c_source.push_str(definition);
            FunctionSample {
                id: format!(
                    "{}/{}/{}:{}",
                    unit.program_name, file_stem, d.name, first.line
                ),
                program_name: unit.program_name.clone(),
                function_name: d.name,
                c_source,
                prelude_len,
                start_line: first.line,
                end_line: close.line,
                sloc: count_sloc(definition),
                path: unit.path.clone(),
                rust_source: None,
                transpile: None,
            }
        })
        .collect();
    Ok(samples)
}

/// Specifier-like identifiers whose parenthesized payload must be skipped
/// when hunting for the declarator name.
const PAREN_SPECIFIERS: &[&str] = &["__attribute__", "__declspec", "__asm", "__asm__"];

/// Decide whether `span` (the tokens between the previous top-level
/// boundary and an opening brace) is a function declarator, and extract
/// the function name.
fn function_name(span: &[Token<'_>]) -> Option<String> {
    let last = span.last()?;
    if !last.is(")") {
        return None;
    }
    if span[0].is("typedef") {
        return None;
    }
    // An initializer (`int x[] = {...}`, compound literals) has a top-level
    // `=`; a definition never does.
    let mut depth = 0i32;
    for t in span {
        match t.text {
            "(" | "[" => depth += 1,
            ")" | "]" => depth -= 1,
            "=" if depth == 0 => return None,
            _ => {}
        }
    }
    // Find the parameter-list `(`: the first top-level `(` that does not
    // belong to a specifier like __attribute__((...)).
    let mut i = 0;
    let mut first_paren = None;
    while i < span.len() {
        if PAREN_SPECIFIERS.contains(&span[i].text)
            && span.get(i + 1).is_some_and(|t| t.is("("))
        {
            i = skip_paren_group(span, i + 1)?;
            continue;
        }
        if span[i].is("(") {
            first_paren = Some(i);
            break;
        }
        i += 1;
    }
    let open = first_paren?;
    if open == 0 {
        return None;
    }
    let before = &span[open - 1];
    if before.kind == TokenKind::Ident {
        return Some(before.text.to_string());
    }
    // Parenthesized declarators: `int (f)(void)`, `int (*f)(void)`.
    if before.is(")") {
        return None;
    }
    let close = skip_paren_group(span, open)? - 1;
    span[open + 1..close]
        .iter()
        .find(|t| t.kind == TokenKind::Ident)
        .map(|t| t.text.to_string())
}

/// Index just past the group closing the `(` at `open`.
fn skip_paren_group(span: &[Token<'_>], open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (j, t) in span.iter().enumerate().skip(open) {
        if t.is("(") {
            depth += 1;
        } else if t.is(")") {
            depth -= 1;
            if depth == 0 {
                return Some(j + 1);
            }
        }
    }
    None
}

/// Number of samples a microbenchmark draw keeps: the integer part of
/// `fraction * total`, floored at one. The integer part (rather than
/// half-up rounding) is what reproduces the documented reference draw of
/// 1,573 from 15,503 at fraction 0.1015.
pub fn subsample_size(total: usize, fraction: f64) -> usize {
    ((total as f64 * fraction) as usize).max(1)
}

/// Draw a uniform random subset of the manifest without replacement.
/// Deterministic for a fixed (manifest order, fraction, seed); the result
/// keeps the input order and records the seed.
pub fn sample_microbenchmark(
    corpus: &CorpusManifest,
    fraction: f64,
    seed: u64,
) -> Result<CorpusManifest, CorpusError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CorpusError::InvalidFraction(fraction));
    }
    if corpus.samples.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let size = subsample_size(corpus.samples.len(), fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, corpus.samples.len(), size).into_vec();
    picked.sort_unstable();
    let samples = picked
        .into_iter()
        .map(|i| corpus.samples[i].clone())
        .collect();
    CorpusManifest::from_entries(samples, Some(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(text: &str) -> SourceUnit {
        SourceUnit {
            path: PathBuf::from("prog/a.c"),
            program_name: "prog".to_string(),
            raw_text: text.to_string(),
            preprocessed: true,
        }
    }

    #[test]
    fn sloc_empty_is_zero() {
        assert_eq!(count_sloc(""), 0);
    }

    #[test]
    fn sloc_counts_code_lines_only() {
        // Hand count: all three lines carry code; the trailing comment does
        // not add a line.
        assert_eq!(count_sloc("int f(void){\n  return 0; // done\n}\n"), 3);
    }

    #[test]
    fn sloc_excludes_comment_block_and_blank() {
        // Hand count: the block comment spans two lines, then a blank line,
        // then one code line.
        assert_eq!(count_sloc("/* a\n b */\n\nint f(void){return 0;}"), 1);
    }

    #[test]
    fn sloc_string_contents_are_code() {
        assert_eq!(count_sloc("char *s = \"// not a comment\";"), 1);
        assert_eq!(count_sloc("/* only a comment */"), 0);
    }

    #[test]
    fn segments_two_definitions() {
        let samples =
            segment_c_file(&unit("int f(void){return 0;}\nint g(int x){return x;}\n")).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].function_name, "f");
        assert_eq!(samples[1].function_name, "g");
        assert_eq!(samples[0].definition(), "int f(void){return 0;}");
        assert_eq!(samples[1].definition(), "int g(int x){return x;}");
    }

    #[test]
    fn declaration_only_file_has_no_functions() {
        let err = segment_c_file(&unit("extern int f(void);\n")).unwrap_err();
        assert!(matches!(err, CorpusError::NoFunctionsFound { .. }));
    }

    #[test]
    fn unbalanced_braces_error_carries_line() {
        let err = segment_c_file(&unit("int f(void){\n  if (1) {\n}\n")).unwrap_err();
        match err {
            CorpusError::UnbalancedBraces { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    /// 40-line fixture with three functions and interleaved globals.
    /// Spans below were marked by hand on the numbered source.
    const ANNOTATED: &str = "\
# 1 \"fix.c\"
typedef unsigned long size_t;

int counter = 0;

static int add(int a, int b)
{
    return a + b; /* sum */
}

extern int use_me(void);

char *names[] = { \"x\", \"y\" };

/* a comment
   between things */
int scale(int v)
{
    int k = 2;
    // doubles
    return v * k;
}

struct pair { int a; int b; };

static struct pair
make_pair(int a, int b)
{
    struct pair p;
    p.a = a;
    p.b = b;
    return p;
}

int tail_decl(void);
";

    #[test]
    fn annotated_fixture_spans_match_hand_marks() {
        let samples = segment_c_file(&unit(ANNOTATED)).unwrap();
        let got: Vec<(&str, u32, u32, u32)> = samples
            .iter()
            .map(|s| (s.function_name.as_str(), s.start_line, s.end_line, s.sloc))
            .collect();
        // Hand annotation: add lines 6-9 (4 code lines), scale lines 17-22
        // (5 code lines, the // comment line is not code), make_pair lines
        // 26-33 (8 code lines).
        assert_eq!(
            got,
            vec![
                ("add", 6, 9, 4),
                ("scale", 17, 22, 5),
                ("make_pair", 26, 33, 8),
            ]
        );
    }

    #[test]
    fn segmentation_is_lossless_over_definitions() {
        let samples = segment_c_file(&unit(ANNOTATED)).unwrap();
        let raw_lines: Vec<&str> = ANNOTATED.lines().collect();
        for s in &samples {
            let span = raw_lines[(s.start_line as usize - 1)..(s.end_line as usize)].join("\n");
            assert_eq!(s.definition(), span.as_str());
        }
    }

    #[test]
    fn prelude_is_attached_to_every_sample() {
        let samples = segment_c_file(&unit(ANNOTATED)).unwrap();
        for s in &samples {
            assert!(s.c_source.starts_with("# 1 \"fix.c\"\ntypedef unsigned long size_t;"));
            assert!(s.c_source[..s.prelude_len].contains("int counter = 0;"));
        }
        // The prelude stops at the first definition.
        assert!(!samples[0].c_source[..samples[0].prelude_len].contains("static int add"));
    }

    #[test]
    fn initializers_and_aggregates_are_not_functions() {
        let src = "int xs[] = {1, 2, 3};\nstruct s { int a; } v = {0};\nint f(void){return 1;}\n";
        let samples = segment_c_file(&unit(src)).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].function_name, "f");
    }

    #[test]
    fn attribute_after_params_is_skipped_for_name() {
        let src = "__attribute__((noinline)) int f(void) { return 0; }\n";
        let samples = segment_c_file(&unit(src)).unwrap();
        assert_eq!(samples[0].function_name, "f");
    }

    #[test]
    fn pointer_declarator_name() {
        let src = "int (*handler(int sig))(int) { return 0; }\nchar *dup(char c) { return 0; }\n";
        let samples = segment_c_file(&unit(src)).unwrap();
        let names: Vec<&str> = samples.iter().map(|s| s.function_name.as_str()).collect();
        assert_eq!(names, vec!["handler", "dup"]);
    }

    #[test]
    fn manifest_totals_are_consistent() {
        let samples = segment_c_file(&unit(ANNOTATED)).unwrap();
        let entries: Vec<ManifestEntry> = samples.iter().map(ManifestEntry::from).collect();
        let manifest = CorpusManifest::from_entries(entries, None).unwrap();
        assert_eq!(manifest.total_functions, 3);
        assert_eq!(
            manifest.total_sloc,
            manifest.samples.iter().map(|e| u64::from(e.sloc)).sum::<u64>()
        );
    }

    #[test]
    fn subsample_size_matches_reference_draw() {
        // Documented reference: 15,503 functions at fraction 0.1015 keep
        // 1,573 samples.
        assert_eq!(subsample_size(15_503, 0.1015), 1_573);
        assert_eq!(subsample_size(200, 0.1), 20);
        assert_eq!(subsample_size(10, 0.01), 1);
        assert_eq!(subsample_size(7, 1.0), 7);
    }

    fn synthetic_manifest(n: usize) -> CorpusManifest {
        let entries = (0..n)
            .map(|i| ManifestEntry {
                id: format!("p/f/fn{i}:1"),
                program: "p".into(),
                function: format!("fn{i}"),
                path: "p/f.c".into(),
                start_line: 1,
                end_line: 3,
                sloc: 3,
            })
            .collect();
        CorpusManifest::from_entries(entries, None).unwrap()
    }

    #[test]
    fn microbenchmark_sampling_is_deterministic() {
        let corpus = synthetic_manifest(200);
        let a = sample_microbenchmark(&corpus, 0.1, 7).unwrap();
        let b = sample_microbenchmark(&corpus, 0.1, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples.len(), 20);
        assert_eq!(a.seed, Some(7));
    }

    #[test]
    fn different_seeds_same_size() {
        let corpus = synthetic_manifest(123);
        let a = sample_microbenchmark(&corpus, 0.25, 1).unwrap();
        let b = sample_microbenchmark(&corpus, 0.25, 2).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
    }

    #[test]
    fn full_fraction_keeps_every_sample() {
        let corpus = synthetic_manifest(31);
        let a = sample_microbenchmark(&corpus, 1.0, 9).unwrap();
        assert_eq!(a.samples, corpus.samples);
    }

    #[test]
    fn invalid_fractions_are_rejected() {
        let corpus = synthetic_manifest(5);
        assert!(matches!(
            sample_microbenchmark(&corpus, 0.0, 0),
            Err(CorpusError::InvalidFraction(_))
        ));
        assert!(matches!(
            sample_microbenchmark(&corpus, 1.5, 0),
            Err(CorpusError::InvalidFraction(_))
        ));
    }
}
