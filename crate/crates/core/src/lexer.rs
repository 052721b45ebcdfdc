//! Token scanner shared by the C segmenter and the complexity metrics.
//!
//! This is not a conforming lexer for either language; it is a fixed,
//! documented tokenization good enough to match braces, tally Halstead
//! operators/operands, and find decision points. It understands comments,
//! string/char literals (including Rust raw strings and lifetimes), numeric
//! literals with suffixes, and multi-character punctuation with maximal
//! munch. C preprocessor directives and linemarkers are consumed as trivia.

use thiserror::Error;

/// Source language selector for keyword and punctuation tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lang {
    C,
    Rust,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    /// Keyword that is not a primitive type name.
    Keyword,
    /// Primitive type keyword (C only; Rust primitive types lex as idents).
    TypeKeyword,
    Int,
    Float,
    Str,
    Char,
    /// Rust lifetime such as `'a` or `'static`.
    Lifetime,
    Punct,
}

/// One lexical unit, borrowing its text from the source.
#[derive(Debug, Clone, PartialEq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    /// 1-based source line of the first character.
    pub line: u32,
    /// Byte offset of the first character.
    pub offset: usize,
}

impl Token<'_> {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }

    /// End byte offset (exclusive).
    pub fn end(&self) -> usize {
        self.offset + self.text.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot tokenize input at line {line} near {fragment:?}")]
pub struct LexError {
    pub line: u32,
    pub fragment: String,
}

const C_KEYWORDS: &[&str] = &[
    "auto", "break", "case", "const", "continue", "default", "do", "else",
    "enum", "extern", "for", "goto", "if", "inline", "register", "restrict",
    "return", "sizeof", "static", "struct", "switch", "typedef", "union",
    "volatile", "while", "_Alignas", "_Alignof", "_Atomic", "_Generic",
    "_Noreturn", "_Static_assert", "_Thread_local", "__asm", "__asm__",
    "__attribute__", "__extension__", "__inline", "__inline__", "__restrict",
    "__restrict__", "__volatile__", "__typeof__", "typeof",
];

/// C primitive type keywords; these classify as Halstead operands.
const C_TYPE_KEYWORDS: &[&str] = &[
    "char", "double", "float", "int", "long", "short", "signed", "unsigned",
    "void", "_Bool", "_Complex", "_Imaginary",
];

const RUST_KEYWORDS: &[&str] = &[
    "as", "async", "await", "break", "const", "continue", "crate", "dyn",
    "else", "enum", "extern", "false", "fn", "for", "if", "impl", "in",
    "let", "loop", "match", "mod", "move", "mut", "pub", "ref", "return",
    "self", "Self", "static", "struct", "super", "trait", "true", "type",
    "unsafe", "use", "where", "while",
];

// Ordered longest-first so the scanner can take the first prefix match.
const C_PUNCTS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==",
    "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", ";",
    ",", ".", "(", ")", "[", "]", "{", "}", "?", ":", "+", "-", "*", "/",
    "%", "&", "|", "^", "~", "!", "<", ">", "=", "#",
];

const RUST_PUNCTS: &[&str] = &[
    "<<=", ">>=", "..=", "...", "::", "->", "=>", "..", "<<", ">>", "<=",
    ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=",
    "^=", ";", ",", ".", "(", ")", "[", "]", "{", "}", "@", "#", "?", ":",
    "$", "+", "-", "*", "/", "%", "&", "|", "^", "!", "<", ">", "=",
];

fn keyword_kind(lang: Lang, word: &str) -> Option<TokenKind> {
    match lang {
        Lang::C => {
            if C_TYPE_KEYWORDS.contains(&word) {
                Some(TokenKind::TypeKeyword)
            } else if C_KEYWORDS.contains(&word) {
                Some(TokenKind::Keyword)
            } else {
                None
            }
        }
        Lang::Rust => {
            if RUST_KEYWORDS.contains(&word) {
                Some(TokenKind::Keyword)
            } else {
                None
            }
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// Tokenize strictly: any byte that cannot start a token is an error.
pub fn tokenize(source: &str, lang: Lang) -> Result<Vec<Token<'_>>, LexError> {
    Scanner::new(source, lang).run(true)
}

/// Tokenize leniently: bytes that cannot start a token are skipped.
/// Unterminated literals are truncated at end of input.
pub fn tokenize_lossy(source: &str, lang: Lang) -> Vec<Token<'_>> {
    Scanner::new(source, lang)
        .run(false)
        .expect("lossy scan does not fail")
}

struct Scanner<'a> {
    src: &'a str,
    bytes: &'a [u8],
    lang: Lang,
    pos: usize,
    line: u32,
    /// True until a non-whitespace character is seen on the current line;
    /// used to recognize C preprocessor directives.
    at_line_start: bool,
}

impl<'a> Scanner<'a> {
    fn new(src: &'a str, lang: Lang) -> Self {
        Scanner {
            src,
            bytes: src.as_bytes(),
            lang,
            pos: 0,
            line: 1,
            at_line_start: true,
        }
    }

    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.pos + ahead).copied()
    }

    fn error(&self) -> LexError {
        let rest = &self.src[self.pos..];
        let fragment: String = rest.chars().take(12).collect();
        LexError {
            line: self.line,
            fragment,
        }
    }

    fn bump_char(&mut self) {
        if let Some(c) = self.src[self.pos..].chars().next() {
            if c == '\n' {
                self.line += 1;
                self.at_line_start = true;
            }
            self.pos += c.len_utf8();
        }
    }

    fn count_newlines(&mut self, start: usize, end: usize) {
        self.line += self.bytes[start..end].iter().filter(|&&b| b == b'\n').count() as u32;
    }

    fn run(mut self, strict: bool) -> Result<Vec<Token<'a>>, LexError> {
        let mut tokens = Vec::new();
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            match b {
                b' ' | b'\t' | b'\r' => {
                    self.pos += 1;
                }
                b'\n' => {
                    self.pos += 1;
                    self.line += 1;
                    self.at_line_start = true;
                }
                b'/' if self.peek(1) == Some(b'/') => {
                    self.skip_line_comment();
                }
                b'/' if self.peek(1) == Some(b'*') => {
                    if !self.skip_block_comment() && strict {
                        return Err(self.error());
                    }
                }
                b'#' if self.lang == Lang::C && self.at_line_start => {
                    self.skip_directive();
                }
                b'"' => {
                    let tok = self.lex_string(self.pos, 0, false);
                    match tok {
                        Some(t) => tokens.push(t),
                        None if strict => return Err(self.error()),
                        None => self.pos = self.bytes.len(),
                    }
                }
                b'\'' => match self.lex_quote() {
                    Some(t) => tokens.push(t),
                    None if strict => return Err(self.error()),
                    None => self.bump_char(),
                },
                b'0'..=b'9' => {
                    tokens.push(self.lex_number());
                }
                b'.' if self.lang == Lang::C
                    && self.peek(1).is_some_and(|c| c.is_ascii_digit()) =>
                {
                    tokens.push(self.lex_number());
                }
                _ => {
                    let c = self.src[self.pos..].chars().next().unwrap();
                    if is_ident_start(c) {
                        match self.lex_word_or_prefixed_literal() {
                            Ok(t) => tokens.push(t),
                            Err(e) if strict => return Err(e),
                            Err(_) => self.pos = self.bytes.len(),
                        }
                    } else if let Some(t) = self.lex_punct() {
                        tokens.push(t);
                    } else if strict {
                        return Err(self.error());
                    } else {
                        self.bump_char();
                    }
                }
            }
            if b != b' ' && b != b'\t' && b != b'\r' && b != b'\n' {
                self.at_line_start = false;
            }
        }
        Ok(tokens)
    }

    fn skip_line_comment(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
            self.pos += 1;
        }
    }

    /// Returns false when the comment is unterminated.
    fn skip_block_comment(&mut self) -> bool {
        let start = self.pos;
        self.pos += 2;
        let mut depth = 1u32;
        while self.pos < self.bytes.len() {
            if self.bytes[self.pos] == b'*' && self.peek(1) == Some(b'/') {
                depth -= 1;
                self.pos += 2;
                if depth == 0 {
                    self.count_newlines(start, self.pos);
                    return true;
                }
            } else if self.lang == Lang::Rust
                && self.bytes[self.pos] == b'/'
                && self.peek(1) == Some(b'*')
            {
                depth += 1;
                self.pos += 2;
            } else {
                self.pos += 1;
            }
        }
        self.count_newlines(start, self.pos);
        false
    }

    /// Consume a `#...` directive or linemarker, honoring backslash
    /// continuations.
    fn skip_directive(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'\\' if self.peek(1) == Some(b'\n') => {
                    self.pos += 2;
                    self.line += 1;
                }
                b'\n' => break,
                _ => self.pos += 1,
            }
        }
    }

    /// Lex a string literal starting at `prefix_start`; `hashes` is the
    /// number of `#` in a Rust raw-string opener, `raw` disables escapes.
    /// Returns None when unterminated.
    fn lex_string(&mut self, prefix_start: usize, hashes: usize, raw: bool) -> Option<Token<'a>> {
        let line = self.line;
        debug_assert_eq!(self.bytes[self.pos], b'"');
        let mut i = self.pos + 1;
        while i < self.bytes.len() {
            match self.bytes[i] {
                b'\\' if !raw => i += 2,
                b'"' => {
                    let closed = if hashes == 0 {
                        true
                    } else {
                        self.bytes[i + 1..]
                            .iter()
                            .take(hashes)
                            .filter(|&&b| b == b'#')
                            .count()
                            == hashes
                    };
                    if closed {
                        let end = i + 1 + hashes;
                        let text = &self.src[prefix_start..end];
                        self.count_newlines(self.pos, end);
                        self.pos = end;
                        return Some(Token {
                            kind: TokenKind::Str,
                            text,
                            line,
                            offset: prefix_start,
                        });
                    }
                    i += 1;
                }
                _ => i += 1,
            }
        }
        None
    }

    /// Lex either a char literal or a Rust lifetime, starting at `'`.
    fn lex_quote(&mut self) -> Option<Token<'a>> {
        let start = self.pos;
        let line = self.line;
        let rest = &self.src[self.pos + 1..];
        let mut chars = rest.char_indices();
        let (_, first) = chars.next()?;
        if self.lang == Lang::Rust && first != '\\' && is_ident_start(first) {
            // `'a` with no closing quote right after is a lifetime.
            let next = chars.next().map(|(_, c)| c);
            if next != Some('\'') {
                let mut end = self.pos + 1 + first.len_utf8();
                while self.src[end..]
                    .chars()
                    .next()
                    .is_some_and(is_ident_continue)
                {
                    end += self.src[end..].chars().next().unwrap().len_utf8();
                }
                let text = &self.src[start..end];
                self.pos = end;
                return Some(Token {
                    kind: TokenKind::Lifetime,
                    text,
                    line,
                    offset: start,
                });
            }
        }
        // Char literal: scan to the closing quote, skipping escapes.
        let mut i = self.pos + 1;
        while i < self.bytes.len() {
            match self.bytes[i] {
                b'\\' => i += 2,
                b'\'' => {
                    let end = i + 1;
                    let text = &self.src[start..end];
                    self.count_newlines(start, end);
                    self.pos = end;
                    return Some(Token {
                        kind: TokenKind::Char,
                        text,
                        line,
                        offset: start,
                    });
                }
                b'\n' => return None,
                _ => i += 1,
            }
        }
        None
    }

    fn lex_number(&mut self) -> Token<'a> {
        let start = self.pos;
        let line = self.line;
        let mut i = self.pos;
        let mut is_float = false;
        let n = self.bytes.len();

        let hex = self.bytes[i] == b'0'
            && matches!(self.bytes.get(i + 1), Some(b'x') | Some(b'X'));
        if hex {
            i += 2;
            while i < n && (self.bytes[i].is_ascii_hexdigit() || self.bytes[i] == b'_') {
                i += 1;
            }
            // C hex floats: 0x1.8p3
            if self.lang == Lang::C && i < n && self.bytes[i] == b'.' {
                is_float = true;
                i += 1;
                while i < n && self.bytes[i].is_ascii_hexdigit() {
                    i += 1;
                }
            }
            if self.lang == Lang::C && i < n && matches!(self.bytes[i], b'p' | b'P') {
                is_float = true;
                i += 1;
                if i < n && matches!(self.bytes[i], b'+' | b'-') {
                    i += 1;
                }
            }
        } else {
            while i < n && (self.bytes[i].is_ascii_digit() || self.bytes[i] == b'_') {
                i += 1;
            }
            let dot_ok = i < n
                && self.bytes[i] == b'.'
                && match self.lang {
                    // Rust: only `1.5`, never `1..2` or `1.method()`.
                    Lang::Rust => self.bytes.get(i + 1).is_some_and(|c| c.is_ascii_digit()),
                    // C: `1.`, `1.5`, `.5` (leading dot handled by caller).
                    Lang::C => self.bytes.get(i + 1) != Some(&b'.'),
                };
            if dot_ok {
                is_float = true;
                i += 1;
                while i < n && (self.bytes[i].is_ascii_digit() || self.bytes[i] == b'_') {
                    i += 1;
                }
            }
            if i < n && matches!(self.bytes[i], b'e' | b'E') {
                let sign = matches!(self.bytes.get(i + 1), Some(b'+') | Some(b'-'));
                let digit_at = i + 1 + usize::from(sign);
                if self.bytes.get(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                    is_float = true;
                    i = digit_at;
                }
            }
        }
        // Trailing suffix letters and digits: u, UL, f, i32, usize, ...
        while i < n && (self.bytes[i].is_ascii_alphanumeric() || self.bytes[i] == b'_') {
            if matches!(self.bytes[i], b'f' | b'F') && self.lang == Lang::C {
                is_float = true;
            }
            if self.lang == Lang::Rust && self.bytes[i] == b'f' && i + 1 < n {
                // f32/f64 suffix marks a float
                is_float = true;
            }
            i += 1;
        }
        let text = &self.src[start..i];
        self.pos = i;
        Token {
            kind: if is_float {
                TokenKind::Float
            } else {
                TokenKind::Int
            },
            text,
            line,
            offset: start,
        }
    }

    /// Lex an identifier, keyword, or a Rust prefixed literal (`r"..."`,
    /// `b"..."`, `r#"..."#`, `r#ident`).
    fn lex_word_or_prefixed_literal(&mut self) -> Result<Token<'a>, LexError> {
        let start = self.pos;
        let line = self.line;
        if self.lang == Lang::Rust {
            if let Some(tok) = self.try_prefixed_string(start)? {
                return Ok(tok);
            }
            // Raw identifier r#foo
            if self.src[start..].starts_with("r#")
                && self.src[start + 2..].chars().next().is_some_and(is_ident_start)
            {
                let mut end = start + 2;
                while self.src[end..].chars().next().is_some_and(is_ident_continue) {
                    end += self.src[end..].chars().next().unwrap().len_utf8();
                }
                self.pos = end;
                return Ok(Token {
                    kind: TokenKind::Ident,
                    text: &self.src[start..end],
                    line,
                    offset: start,
                });
            }
        }
        let mut end = start;
        while self.src[end..].chars().next().is_some_and(is_ident_continue) {
            end += self.src[end..].chars().next().unwrap().len_utf8();
        }
        let text = &self.src[start..end];
        self.pos = end;
        let kind = keyword_kind(self.lang, text).unwrap_or(TokenKind::Ident);
        Ok(Token {
            kind,
            text,
            line,
            offset: start,
        })
    }

    /// Handle `r"`, `b"`, `br"`, `c"`, and hash-delimited raw forms.
    fn try_prefixed_string(&mut self, start: usize) -> Result<Option<Token<'a>>, LexError> {
        let rest = &self.bytes[start..];
        let mut raw = false;
        let i = match rest.first() {
            Some(b'r') => {
                raw = true;
                1
            }
            Some(b'b') | Some(b'c') => {
                if rest.get(1) == Some(&b'r') {
                    raw = true;
                    2
                } else {
                    1
                }
            }
            _ => return Ok(None),
        };
        let mut hashes = 0;
        if raw {
            while rest.get(i + hashes) == Some(&b'#') {
                hashes += 1;
            }
        }
        if rest.get(i + hashes) != Some(&b'"') {
            return Ok(None);
        }
        self.pos = start + i + hashes;
        match self.lex_string(start, hashes, raw) {
            Some(t) => Ok(Some(t)),
            None => {
                self.pos = start;
                Err(self.error())
            }
        }
    }

    fn lex_punct(&mut self) -> Option<Token<'a>> {
        let table = match self.lang {
            Lang::C => C_PUNCTS,
            Lang::Rust => RUST_PUNCTS,
        };
        let rest = &self.src[self.pos..];
        for p in table {
            if rest.starts_with(p) {
                let tok = Token {
                    kind: TokenKind::Punct,
                    text: &self.src[self.pos..self.pos + p.len()],
                    line: self.line,
                    offset: self.pos,
                };
                self.pos += p.len();
                return Some(tok);
            }
        }
        None
    }
}

/// Find the index of the `}` matching the `{` at `open`, scanning only
/// tokens. Returns None when the stream ends first.
pub fn matching_brace(tokens: &[Token<'_>], open: usize) -> Option<usize> {
    debug_assert!(tokens[open].is("{"));
    let mut depth = 1usize;
    for (i, t) in tokens.iter().enumerate().skip(open + 1) {
        if t.is("{") {
            depth += 1;
        } else if t.is("}") {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}
