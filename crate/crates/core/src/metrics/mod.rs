//! Per-function complexity metrics: maintainability index of the C and of
//! the transpiled Rust source, unsafe operation complexity, and data type
//! complexity.
//!
//! Halstead classification is fixed so that counts are exactly testable:
//! operators are all punctuation tokens and all keywords except primitive
//! type names; operands are identifiers, type names, lifetimes, and
//! numeric/string/char literals. (Rust `true`/`false` lex as keywords and
//! therefore land on the operator side.)
//!
//! Cyclomatic decision points, also fixed: for C `if`, `for`, `while`,
//! `case`, `&&`, `||`, `?`; for Rust `if`, `for`, `while`, `loop`, `&&`,
//! `||`, and match arms beyond the first.

mod rust_analysis;

pub use rust_analysis::{type_complexity, unsafe_complexity, UnsafeProfile};

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{count_sloc, FunctionSample};
use crate::lexer::{self, Lang, LexError, Token, TokenKind};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("no function body located (offset {offset})")]
    Parse { offset: usize },
    #[error("empty {what} source")]
    EmptySource { what: &'static str },
    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<MetricsError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("metric table: {0}")]
    Csv(#[from] csv::Error),
    #[error("metric table row {row}: {message}")]
    Table { row: usize, message: String },
}

impl MetricsError {
    fn for_sample(self, id: &str) -> MetricsError {
        MetricsError::Sample {
            id: id.to_string(),
            source: Box::new(self),
        }
    }
}

/// Operator/operand tallies behind Halstead's volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalsteadCounts {
    pub distinct_operators: u64,
    pub distinct_operands: u64,
    pub total_operators: u64,
    pub total_operands: u64,
}

impl HalsteadCounts {
    /// V = (N1+N2) * log2(eta1+eta2); zero for an empty vocabulary.
    pub fn volume(&self) -> f64 {
        let vocabulary = self.distinct_operators + self.distinct_operands;
        if vocabulary == 0 {
            return 0.0;
        }
        let length = self.total_operators + self.total_operands;
        length as f64 * (vocabulary as f64).log2()
    }
}

/// Inputs of the maintainability index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricInputs {
    pub halstead_volume: f64,
    pub cyclomatic_complexity: u32,
    pub sloc: u32,
}

/// The 4-D point used by selection, in fixed dimension order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub mi_c: f64,
    pub mi_rust: f64,
    pub unsafe_complexity: f64,
    pub type_complexity: u32,
}

impl MetricVector {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.mi_c,
            self.mi_rust,
            self.unsafe_complexity,
            f64::from(self.type_complexity),
        ]
    }
}

fn classify_is_operand(token: &Token<'_>) -> bool {
    matches!(
        token.kind,
        TokenKind::Ident
            | TokenKind::TypeKeyword
            | TokenKind::Int
            | TokenKind::Float
            | TokenKind::Str
            | TokenKind::Char
            | TokenKind::Lifetime
    )
}

/// Tally Halstead operators and operands over the token stream.
pub fn halstead_counts(source: &str, lang: Lang) -> Result<HalsteadCounts, MetricsError> {
    let tokens = lexer::tokenize(source, lang)?;
    let mut operators: HashSet<&str> = HashSet::new();
    let mut operands: HashSet<&str> = HashSet::new();
    let mut total_operators = 0u64;
    let mut total_operands = 0u64;
    for t in &tokens {
        if classify_is_operand(t) {
            operands.insert(t.text);
            total_operands += 1;
        } else {
            operators.insert(t.text);
            total_operators += 1;
        }
    }
    Ok(HalsteadCounts {
        distinct_operators: operators.len() as u64,
        distinct_operands: operands.len() as u64,
        total_operators,
        total_operands,
    })
}

/// Halstead volume of one function source.
pub fn halstead_volume(source: &str, lang: Lang) -> Result<f64, MetricsError> {
    Ok(halstead_counts(source, lang)?.volume())
}

const C_DECISION_KEYWORDS: &[&str] = &["if", "for", "while", "case"];
const C_DECISION_PUNCTS: &[&str] = &["&&", "||", "?"];
const RUST_DECISION_KEYWORDS: &[&str] = &["if", "for", "while", "loop"];
const RUST_DECISION_PUNCTS: &[&str] = &["&&", "||"];

/// 1 + number of decision points.
pub fn cyclomatic_complexity(source: &str, lang: Lang) -> Result<u32, MetricsError> {
    let tokens = lexer::tokenize(source, lang)?;
    let (keywords, puncts) = match lang {
        Lang::C => (C_DECISION_KEYWORDS, C_DECISION_PUNCTS),
        Lang::Rust => (RUST_DECISION_KEYWORDS, RUST_DECISION_PUNCTS),
    };
    let mut decisions = 0u32;
    for (i, t) in tokens.iter().enumerate() {
        match t.kind {
            TokenKind::Keyword if keywords.contains(&t.text) => decisions += 1,
            TokenKind::Keyword if lang == Lang::Rust && t.text == "match" => {
                decisions += match_arm_decisions(&tokens, i);
            }
            TokenKind::Punct if puncts.contains(&t.text) => decisions += 1,
            _ => {}
        }
    }
    Ok(1 + decisions)
}

/// Arms beyond the first in the match whose keyword sits at `match_idx`.
fn match_arm_decisions(tokens: &[Token<'_>], match_idx: usize) -> u32 {
    // The body is the first top-level `{` after the scrutinee.
    let mut depth = 0i32;
    let mut body_open = None;
    for (i, t) in tokens.iter().enumerate().skip(match_idx + 1) {
        match t.text {
            "(" | "[" => depth += 1,
            ")" | "]" => depth -= 1,
            "{" if depth == 0 => {
                body_open = Some(i);
                break;
            }
            _ => {}
        }
    }
    let Some(open) = body_open else { return 0 };
    let close = lexer::matching_brace(tokens, open).unwrap_or(tokens.len());
    let mut arms = 0u32;
    let mut depth = 0i32;
    for t in &tokens[open + 1..close.min(tokens.len())] {
        match t.text {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            "=>" if depth == 0 => arms += 1,
            _ => {}
        }
    }
    arms.saturating_sub(1)
}

/// Unclamped maintainability index:
/// `171 - 5.2*ln(max(V,1)) - 0.23*CC - 16.2*ln(max(SLoC,1))`.
pub fn maintainability_index(inputs: &MetricInputs) -> f64 {
    171.0 - 5.2 * inputs.halstead_volume.max(1.0).ln()
        - 0.23 * f64::from(inputs.cyclomatic_complexity)
        - 16.2 * f64::from(inputs.sloc.max(1)).ln()
}

fn language_mi(source: &str, lang: Lang) -> Result<f64, MetricsError> {
    let inputs = MetricInputs {
        halstead_volume: halstead_volume(source, lang)?,
        cyclomatic_complexity: cyclomatic_complexity(source, lang)?,
        sloc: count_sloc(source),
    };
    Ok(maintainability_index(&inputs))
}

/// Assemble the four metrics for one sample: MI over the C definition, MI
/// over the Rust translation (last attempt when transpilation failed),
/// unsafe operation complexity, and unique-type count.
pub fn metric_vector(sample: &FunctionSample) -> Result<MetricVector, MetricsError> {
    let build = || -> Result<MetricVector, MetricsError> {
        let c_source = sample.definition();
        if c_source.trim().is_empty() {
            return Err(MetricsError::EmptySource { what: "C" });
        }
        let rust_source = sample
            .rust_source
            .as_deref()
            .filter(|s| !s.trim().is_empty())
            .ok_or(MetricsError::EmptySource { what: "Rust" })?;
        Ok(MetricVector {
            mi_c: language_mi(c_source, Lang::C)?,
            mi_rust: language_mi(rust_source, Lang::Rust)?,
            unsafe_complexity: unsafe_complexity(rust_source)?.complexity(),
            type_complexity: type_complexity(rust_source)?,
        })
    };
    build().map_err(|e| e.for_sample(&sample.id))
}

/// One row of the metric table file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub id: String,
    pub program: String,
    pub mi_c: f64,
    pub mi_rust: f64,
    pub unsafe_complexity: f64,
    pub type_complexity: u32,
    pub sloc: u32,
}

impl MetricRow {
    pub fn vector(&self) -> MetricVector {
        MetricVector {
            mi_c: self.mi_c,
            mi_rust: self.mi_rust,
            unsafe_complexity: self.unsafe_complexity,
            type_complexity: self.type_complexity,
        }
    }
}

pub const METRIC_TABLE_HEADER: [&str; 7] = [
    "id",
    "program",
    "mi_c",
    "mi_rust",
    "unsafe_complexity",
    "type_complexity",
    "sloc",
];

/// Write the metric table CSV (UTF-8, '.' decimal separator).
pub fn write_metric_table(path: &Path, rows: &[MetricRow]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRIC_TABLE_HEADER)?;
    for r in rows {
        w.write_record([
            r.id.as_str(),
            r.program.as_str(),
            &format_float(r.mi_c),
            &format_float(r.mi_rust),
            &format_float(r.unsafe_complexity),
            &r.type_complexity.to_string(),
            &r.sloc.to_string(),
        ])?;
    }
    let bytes = w.into_inner().expect("csv buffer");
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_metric_table(path: &Path) -> Result<Vec<MetricRow>, MetricsError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let field = |j: usize| -> Result<&str, MetricsError> {
            record.get(j).ok_or(MetricsError::Table {
                row: i + 2,
                message: format!("missing column {}", METRIC_TABLE_HEADER[j]),
            })
        };
        let parse_f64 = |j: usize| -> Result<f64, MetricsError> {
            field(j)?.parse().map_err(|e| MetricsError::Table {
                row: i + 2,
                message: format!("column {}: {e}", METRIC_TABLE_HEADER[j]),
            })
        };
        let parse_u32 = |j: usize| -> Result<u32, MetricsError> {
            field(j)?.parse().map_err(|e| MetricsError::Table {
                row: i + 2,
                message: format!("column {}: {e}", METRIC_TABLE_HEADER[j]),
            })
        };
        rows.push(MetricRow {
            id: field(0)?.to_string(),
            program: field(1)?.to_string(),
            mi_c: parse_f64(2)?,
            mi_rust: parse_f64(3)?,
            unsafe_complexity: parse_f64(4)?,
            type_complexity: parse_u32(5)?,
            sloc: parse_u32(6)?,
        });
    }
    Ok(rows)
}

/// Shortest round-trip decimal form, with a '.' kept for whole floats so
/// the column stays visibly real-valued.
fn format_float(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}
