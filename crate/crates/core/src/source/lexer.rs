//! Comment lexer for C and C++.
//!
//! Only the lexical structure that decides where comments start and end is
//! modelled: string and character literals (including raw strings and
//! digit separators), line comments with backslash continuation, and
//! block comments. Everything else is treated as opaque code bytes.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommentStyle {
    /// `// ...`, possibly continued over several lines with `\`.
    Line,
    /// `/* ... */`
    Block,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommentSpan {
    pub range: Range<usize>,
    pub style: CommentStyle,
}

/// Returns every comment in `text`, in source order.
pub fn scan_comments(text: &str) -> Vec<CommentSpan> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    // Start of the current identifier/number run, used to tell digit
    // separators (1'000) from character literals.
    let mut word_start: Option<usize> = None;

    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                let start = i;
                i += 2;
                while i < bytes.len() {
                    if bytes[i] == b'\n' {
                        if continued(bytes, i) {
                            i += 1;
                            continue;
                        }
                        break;
                    }
                    i += 1;
                }
                let mut end = i;
                if end > start && bytes[end - 1] == b'\r' {
                    end -= 1;
                }
                out.push(CommentSpan {
                    range: start..end,
                    style: CommentStyle::Line,
                });
                word_start = None;
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let start = i;
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        i = bytes.len();
                        break;
                    }
                    if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        i += 2;
                        break;
                    }
                    i += 1;
                }
                out.push(CommentSpan {
                    range: start..i,
                    style: CommentStyle::Block,
                });
                word_start = None;
            }
            b'"' => {
                i = if raw_string_prefix(bytes, word_start, i) {
                    skip_raw_string(bytes, i)
                } else {
                    skip_quoted(bytes, i, b'"')
                };
                word_start = None;
            }
            b'\'' => {
                let separator = word_start
                    .map(|s| bytes[s].is_ascii_digit())
                    .unwrap_or(false);
                if separator {
                    i += 1;
                } else {
                    i = skip_quoted(bytes, i, b'\'');
                    word_start = None;
                }
            }
            _ => {
                if b.is_ascii_alphanumeric() || b == b'_' {
                    word_start.get_or_insert(i);
                } else if !(b == b'.'
                    && word_start
                        .map(|s| bytes[s].is_ascii_digit())
                        .unwrap_or(false))
                {
                    word_start = None;
                }
                i += 1;
            }
        }
    }
    out
}

/// True when the newline at `nl` is preceded by a line-splicing backslash.
fn continued(bytes: &[u8], nl: usize) -> bool {
    let mut j = nl;
    if j > 0 && bytes[j - 1] == b'\r' {
        j -= 1;
    }
    j > 0 && bytes[j - 1] == b'\\'
}

fn skip_quoted(bytes: &[u8], open: usize, quote: u8) -> usize {
    let mut i = open + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'\n' => return i, // unterminated literal ends at the line
            c if c == quote => return i + 1,
            _ => i += 1,
        }
    }
    bytes.len()
}

fn raw_string_prefix(bytes: &[u8], word_start: Option<usize>, quote: usize) -> bool {
    let Some(start) = word_start else {
        return false;
    };
    matches!(&bytes[start..quote], b"R" | b"LR" | b"uR" | b"UR" | b"u8R")
}

fn skip_raw_string(bytes: &[u8], quote: usize) -> usize {
    let mut i = quote + 1;
    let delim_start = i;
    while i < bytes.len() && bytes[i] != b'(' {
        if bytes[i] == b'"' || bytes[i] == b'\n' || i - delim_start > 16 {
            // Not a well-formed raw string; fall back to an ordinary literal.
            return skip_quoted(bytes, quote, b'"');
        }
        i += 1;
    }
    if i >= bytes.len() {
        return bytes.len();
    }
    let delim = &bytes[delim_start..i];
    let mut closing = Vec::with_capacity(delim.len() + 2);
    closing.push(b')');
    closing.extend_from_slice(delim);
    closing.push(b'"');
    let body = i + 1;
    bytes[body..]
        .windows(closing.len())
        .position(|w| w == closing.as_slice())
        .map(|p| body + p + closing.len())
        .unwrap_or(bytes.len())
}
