//! Source files, the line index, and snippet extraction.
//!
//! A [`SourceFile`] keeps the exact decoded text of the input along with a
//! 1-based line index. Everything downstream (prompting, weaving, density
//! analysis) addresses code by line number through this index.

mod extract;
pub mod lexer;
mod strip;

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_snippets, extract_with, Diagnostic, ExtractOptions, Extraction};
pub use strip::{line_classes, strip_comments, LineClass};

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: unrecoverable parse failure ({detail})")]
    Parse { path: PathBuf, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NewlineStyle {
    Lf,
    CrLf,
}

impl NewlineStyle {
    pub fn as_str(self) -> &'static str {
        match self {
            NewlineStyle::Lf => "\n",
            NewlineStyle::CrLf => "\r\n",
        }
    }
}

/// Input language, chosen from the file extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Language {
    C,
    Cpp,
}

impl Language {
    pub fn from_path(path: &Path) -> Language {
        match path.extension().and_then(|e| e.to_str()) {
            Some("c") => Language::C,
            _ => Language::Cpp,
        }
    }
}

/// Extensions the tool treats as C/C++ sources or headers.
pub const SOURCE_EXTENSIONS: &[&str] = &[
    "c", "cc", "cpp", "cxx", "c++", "h", "hh", "hpp", "hxx", "h++",
];

pub fn is_source_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| SOURCE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    path: PathBuf,
    text: String,
    /// Byte range of each line, terminator included.
    lines: Vec<Range<usize>>,
    newline_style: NewlineStyle,
    /// Set when invalid UTF-8 was replaced during decoding.
    lossy: bool,
}

impl SourceFile {
    pub fn from_text(path: impl Into<PathBuf>, text: impl Into<String>) -> SourceFile {
        let text = text.into();
        let lines = index_lines(&text);
        let newline_style = detect_newline(&text);
        SourceFile {
            path: path.into(),
            text,
            lines,
            newline_style,
            lossy: false,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn newline_style(&self) -> NewlineStyle {
        self.newline_style
    }

    pub fn is_lossy(&self) -> bool {
        self.lossy
    }

    pub fn language(&self) -> Language {
        Language::from_path(&self.path)
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    /// Byte range of a 1-based line, terminator included.
    pub fn line_range(&self, line: usize) -> Range<usize> {
        self.lines[line - 1].clone()
    }

    /// Line content without its terminator.
    pub fn line(&self, line: usize) -> &str {
        let raw = &self.text[self.line_range(line)];
        strip_terminator(raw)
    }

    /// Line content including its terminator, if any.
    pub fn raw_line(&self, line: usize) -> &str {
        &self.text[self.line_range(line)]
    }

    pub fn lines(&self) -> impl Iterator<Item = &str> + '_ {
        (1..=self.line_count()).map(move |n| self.line(n))
    }

    /// Text of lines `start..=end` (1-based), without the final terminator.
    pub fn slice_lines(&self, start: usize, end: usize) -> &str {
        let from = self.lines[start - 1].start;
        let last = &self.lines[end - 1];
        let to = last.start + strip_terminator(&self.text[last.clone()]).len();
        &self.text[from..to]
    }

    /// 1-based line containing the byte offset.
    pub fn line_of_offset(&self, offset: usize) -> usize {
        match self.lines.binary_search_by(|r| {
            if offset < r.start {
                std::cmp::Ordering::Greater
            } else if offset >= r.end {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Equal
            }
        }) {
            Ok(i) => i + 1,
            Err(i) => i.max(1),
        }
    }

    /// Leading spaces and tabs of a line.
    pub fn indentation(&self, line: usize) -> &str {
        let content = self.line(line);
        let n = content.len() - content.trim_start_matches([' ', '\t']).len();
        &content[..n]
    }
}

impl fmt::Display for SourceFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Reads a file from disk. Invalid UTF-8 is replaced (with a warning)
/// rather than rejected.
pub fn parse_file(path: impl AsRef<Path>) -> Result<SourceFile, SourceError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| SourceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (text, lossy) = match String::from_utf8(bytes) {
        Ok(text) => (text, false),
        Err(err) => {
            log::warn!("{}: invalid UTF-8, decoding lossily", path.display());
            (String::from_utf8_lossy(err.as_bytes()).into_owned(), true)
        }
    };
    let mut file = SourceFile::from_text(path, text);
    file.lossy = lossy;
    Ok(file)
}

pub(crate) fn strip_terminator(raw: &str) -> &str {
    raw.strip_suffix("\r\n")
        .or_else(|| raw.strip_suffix('\n'))
        .unwrap_or(raw)
}

fn index_lines(text: &str) -> Vec<Range<usize>> {
    let mut lines = Vec::new();
    let mut start = 0;
    for (i, b) in text.bytes().enumerate() {
        if b == b'\n' {
            lines.push(start..i + 1);
            start = i + 1;
        }
    }
    if start < text.len() {
        lines.push(start..text.len());
    }
    lines
}

fn detect_newline(text: &str) -> NewlineStyle {
    let total = text.matches('\n').count();
    let crlf = text.matches("\r\n").count();
    if crlf > total - crlf {
        NewlineStyle::CrLf
    } else {
        NewlineStyle::Lf
    }
}

/// Syntactic granularity of a snippet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SnippetKind {
    FunctionDef,
    Conditional,
    Loop,
    TryCatch,
    Declaration,
}

impl SnippetKind {
    pub const ALL: [SnippetKind; 5] = [
        SnippetKind::FunctionDef,
        SnippetKind::Conditional,
        SnippetKind::Loop,
        SnippetKind::TryCatch,
        SnippetKind::Declaration,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SnippetKind::FunctionDef => "FunctionDef",
            SnippetKind::Conditional => "Conditional",
            SnippetKind::Loop => "Loop",
            SnippetKind::TryCatch => "TryCatch",
            SnippetKind::Declaration => "Declaration",
        }
    }
}

impl fmt::Display for SnippetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A commentable span of source, addressed by whole lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub id: usize,
    pub kind: SnippetKind,
    pub start_line: usize,
    pub end_line: usize,
    pub anchor_line: usize,
    pub text: String,
    /// Number of enclosing snippets.
    pub depth: usize,
    /// Parameter count, for function definitions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arity: Option<usize>,
    #[serde(skip)]
    pub(crate) byte_range: Range<usize>,
}

impl Snippet {
    pub fn record(&self) -> SnippetRecord {
        SnippetRecord {
            id: self.id,
            kind: self.kind,
            start_line: self.start_line,
            end_line: self.end_line,
            anchor_line: self.anchor_line,
        }
    }

    pub fn byte_range(&self) -> Range<usize> {
        self.byte_range.clone()
    }

    /// True when `other` lies within this snippet's line range.
    pub fn contains(&self, other: &Snippet) -> bool {
        self.start_line <= other.start_line && other.end_line <= self.end_line
    }
}

/// The line-level listing format used for golden files and `extract` output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetRecord {
    pub id: usize,
    pub kind: SnippetKind,
    pub start_line: usize,
    pub end_line: usize,
    pub anchor_line: usize,
}
