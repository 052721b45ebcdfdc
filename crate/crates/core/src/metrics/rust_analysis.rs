//! Tolerant scanners over Rust token streams for the two Rust-only
//! metrics: unsafe operation complexity and data type complexity.
//!
//! These must work on uncompilable Rust (failed fix attempts stay in the
//! candidate set), so they run on a lossy token stream, recover at
//! statement boundaries, and treat end-of-input as closing any open block.

use std::collections::BTreeSet;

use crate::lexer::{self, Lang, Token, TokenKind};
use crate::metrics::MetricsError;

/// Unsafe block census of one function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnsafeProfile {
    pub block_count: usize,
    pub statements_per_block: Vec<usize>,
}

impl UnsafeProfile {
    /// Mean statements per unsafe block; zero when no unsafe code exists.
    pub fn complexity(&self) -> f64 {
        if self.block_count == 0 {
            return 0.0;
        }
        self.statements_per_block.iter().sum::<usize>() as f64 / self.block_count as f64
    }
}

/// Error unless some `fn` with a body can be located.
fn ensure_function_body(tokens: &[Token<'_>]) -> Result<(), MetricsError> {
    if let Some(i) = tokens.iter().position(|t| t.is("fn")) {
        if tokens[i..].iter().any(|t| t.is("{")) {
            return Ok(());
        }
    }
    Err(MetricsError::Parse {
        offset: tokens.last().map_or(0, |t| t.end()),
    })
}

/// Index just past the group opened at `open` (any of `(`, `[`, `{`);
/// unterminated groups close at end of input.
fn skip_group(tokens: &[Token<'_>], open: usize) -> usize {
    let mut depth = 0i64;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        match t.text {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => {
                depth -= 1;
                if depth <= 0 {
                    return i + 1;
                }
            }
            _ => {}
        }
    }
    tokens.len()
}

/// Does `text` continue the same statement when it follows a `}` group?
fn continues_expression(text: &str) -> bool {
    matches!(
        text,
        ";" | "else"
            | "."
            | "?"
            | ","
            | "+"
            | "-"
            | "*"
            | "/"
            | "%"
            | "&"
            | "|"
            | "^"
            | "&&"
            | "||"
            | "=="
            | "!="
            | "<"
            | ">"
            | "<="
            | ">="
            | "<<"
            | ">>"
            | "="
            | "as"
    )
}

/// Count top-level statements of a block body. A nested block-shaped
/// statement (if/else, match, loop, an inner unsafe block) counts as one;
/// its own contents are not re-counted here.
fn count_statements(tokens: &[Token<'_>]) -> usize {
    let mut count = 0usize;
    let mut pending = false;
    let mut k = 0;
    while k < tokens.len() {
        match tokens[k].text {
            ";" => {
                if pending {
                    count += 1;
                    pending = false;
                }
                k += 1;
            }
            "(" | "[" => {
                k = skip_group(tokens, k);
                pending = true;
            }
            "{" => {
                k = skip_group(tokens, k);
                pending = true;
                let continues = tokens.get(k).is_some_and(|t| continues_expression(t.text));
                if !continues {
                    count += 1;
                    pending = false;
                }
            }
            ")" | "]" | "}" => k += 1,
            _ => {
                pending = true;
                k += 1;
            }
        }
    }
    if pending {
        count += 1;
    }
    count
}

/// Locate every `unsafe { ... }` block (nested ones included) and count
/// the statements directly inside each.
pub fn unsafe_complexity(rust_source: &str) -> Result<UnsafeProfile, MetricsError> {
    let tokens = lexer::tokenize_lossy(rust_source, Lang::Rust);
    ensure_function_body(&tokens)?;
    let mut statements_per_block = Vec::new();
    for i in 0..tokens.len() {
        if tokens[i].is("unsafe") && tokens.get(i + 1).is_some_and(|t| t.is("{")) {
            let open = i + 1;
            let close = lexer::matching_brace(&tokens, open).unwrap_or(tokens.len());
            statements_per_block.push(count_statements(&tokens[open + 1..close]));
        }
    }
    Ok(UnsafeProfile {
        block_count: statements_per_block.len(),
        statements_per_block,
    })
}

/// Map a lone-literal initializer to its inferred type.
fn literal_type(token: &Token<'_>) -> &'static str {
    match token.kind {
        TokenKind::Int => "i32",
        TokenKind::Float => "f64",
        TokenKind::Str => "&str",
        TokenKind::Char => "char",
        TokenKind::Keyword if token.text == "true" || token.text == "false" => "bool",
        _ => "unknown",
    }
}

/// Render annotation tokens with normalized whitespace: `Vec< i32 >` and
/// `Vec<i32>` produce the same text.
fn canonicalize_type(tokens: &[Token<'_>]) -> String {
    let mut out = String::new();
    for t in tokens {
        let needs_space = out
            .chars()
            .last()
            .is_some_and(|c| c.is_alphanumeric() || c == '_')
            && t.text
                .chars()
                .next()
                .is_some_and(|c| c.is_alphanumeric() || c == '_');
        if needs_space {
            out.push(' ');
        }
        out.push_str(t.text);
    }
    out
}

/// Number of unique variable types over the `let` bindings of a function:
/// the explicit annotation when present, otherwise the literal-inferred
/// type of a lone-literal initializer, otherwise a single "unknown"
/// bucket.
pub fn type_complexity(rust_source: &str) -> Result<u32, MetricsError> {
    let tokens = lexer::tokenize_lossy(rust_source, Lang::Rust);
    ensure_function_body(&tokens)?;
    let mut types: BTreeSet<String> = BTreeSet::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i].is("let") && !is_let_expression(&tokens, i) {
            let (ty, next) = parse_let_binding(&tokens, i);
            types.insert(ty);
            i = next;
        } else {
            i += 1;
        }
    }
    Ok(types.len() as u32)
}

/// `if let` / `while let` / let-chain positions introduce pattern matches,
/// not variable declarations; only declarations feed the type metric.
fn is_let_expression(tokens: &[Token<'_>], let_idx: usize) -> bool {
    let_idx > 0
        && matches!(
            tokens[let_idx - 1].text,
            "if" | "while" | "&&" | "||" | "("
        )
}

/// Parse one `let` statement starting at `let_idx`; returns the recorded
/// type text and the index where scanning resumes (the right-hand side
/// when present, so bindings nested in initializers are still visited).
fn parse_let_binding(tokens: &[Token<'_>], let_idx: usize) -> (String, usize) {
    let mut i = let_idx + 1;
    // Pattern region: skip to `:`, `=`, or `;` at top level.
    let mut annotation: Option<(usize, usize)> = None;
    while i < tokens.len() {
        match tokens[i].text {
            "(" | "[" | "{" => i = skip_group(tokens, i),
            ":" => {
                let start = i + 1;
                let end = annotation_end(tokens, start);
                annotation = Some((start, end));
                i = end;
                break;
            }
            "=" | ";" => break,
            _ => i += 1,
        }
    }
    // Right-hand side region.
    let mut rhs: Option<(usize, usize)> = None;
    if tokens.get(i).is_some_and(|t| t.is("=")) {
        let start = i + 1;
        let mut j = start;
        while j < tokens.len() {
            match tokens[j].text {
                "(" | "[" | "{" => j = skip_group(tokens, j),
                ";" => break,
                _ => j += 1,
            }
        }
        rhs = Some((start, j));
    } else {
        // No initializer: step past the terminating semicolon.
        while i < tokens.len() && !tokens[i].is(";") {
            i += 1;
        }
    }

    let ty = match annotation {
        Some((s, e)) if e > s => canonicalize_type(&tokens[s..e]),
        _ => match rhs {
            Some((s, e)) if e == s + 1 => literal_type(&tokens[s]).to_string(),
            _ => "unknown".to_string(),
        },
    };
    let resume = rhs.map_or_else(|| (i + 1).min(tokens.len()), |(s, _)| s);
    (ty, resume.max(let_idx + 1))
}

/// End of a type annotation: the `=` or `;` at paren/bracket and angle
/// depth zero. Inside an annotation `<` is always a generic opener, so
/// angle depth is well-defined there.
fn annotation_end(tokens: &[Token<'_>], start: usize) -> usize {
    let mut depth = 0i64;
    let mut angle = 0i64;
    let mut i = start;
    while i < tokens.len() {
        match tokens[i].text {
            "(" | "[" => depth += 1,
            ")" | "]" => depth -= 1,
            "<" => angle += 1,
            ">" => angle -= 1,
            ">>" => angle -= 2,
            "=" | ";" if depth <= 0 && angle <= 0 => return i,
            "{" => return i,
            _ => {}
        }
        i += 1;
    }
    i
}
