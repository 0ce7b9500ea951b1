//! Documentation density, function coverage and annotation agreement.

mod agreement;
mod dataset;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::classify::{Classifier, CommentType};
use crate::source::lexer::{scan_comments, CommentStyle};
use crate::source::{
    extract_snippets, line_classes, LineClass, Snippet, SnippetKind, SourceError, SourceFile,
};
use crate::weave::has_generated_marker;

pub use agreement::{
    fleiss_kappa, krippendorff_alpha, ranked_choice, AgreementError, RankedOutcome, RatingMatrix,
};
pub use dataset::{parse_dataset, read_dataset, DatasetError, DatasetRecord};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{0}: no lines of code, densities are undefined")]
    EmptyFile(String),
    #[error("comment line {line} is outside the file ({lines} lines)")]
    OutOfBounds { line: usize, lines: usize },
    #[error(transparent)]
    Source(#[from] SourceError),
}

/// A comment block found in a file, with its type when it fits the schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExistingComment {
    pub start_line: usize,
    pub end_line: usize,
    pub comment_type: Option<CommentType>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub path: String,
    /// Non-blank lines that are not comment-only.
    pub loc: usize,
    pub counts: BTreeMap<CommentType, usize>,
    /// Comments per 100 LOC.
    pub per_type_density: BTreeMap<CommentType, f64>,
    pub function_total: usize,
    pub function_documented: usize,
    /// `None` when the file defines no functions.
    pub coverage: Option<f64>,
}

impl DensityReport {
    fn from_counts(
        path: String,
        loc: usize,
        counts: BTreeMap<CommentType, usize>,
        function_total: usize,
        function_documented: usize,
    ) -> DensityReport {
        let per_type_density = counts
            .iter()
            .map(|(&t, &c)| (t, 100.0 * c as f64 / loc as f64))
            .collect();
        DensityReport {
            path,
            loc,
            counts,
            per_type_density,
            function_total,
            function_documented,
            coverage: (function_total > 0)
                .then(|| function_documented as f64 / function_total as f64),
        }
    }
}

/// Counts code lines: non-blank and not comment-only.
pub fn logical_loc(file: &SourceFile) -> usize {
    line_classes(file)
        .iter()
        .filter(|c| **c == LineClass::Code)
        .count()
}

/// Densities for `typed_comments`, given as `(type, first line)` pairs. A
/// function counts as documented when a Function comment starts inside the
/// unbroken run of comment lines directly above it.
pub fn density(
    file: &SourceFile,
    typed_comments: &[(CommentType, usize)],
) -> Result<DensityReport, AnalysisError> {
    let snippets = extract_snippets(file)?;
    density_with_snippets(file, &snippets, typed_comments)
}

pub fn density_with_snippets(
    file: &SourceFile,
    snippets: &[Snippet],
    typed_comments: &[(CommentType, usize)],
) -> Result<DensityReport, AnalysisError> {
    let lines = file.line_count();
    if let Some(&(_, line)) = typed_comments.iter().find(|(_, l)| *l == 0 || *l > lines) {
        return Err(AnalysisError::OutOfBounds { line, lines });
    }
    let classes = line_classes(file);
    let loc = classes.iter().filter(|c| **c == LineClass::Code).count();
    let path = file.path().display().to_string();
    if loc == 0 {
        return Err(AnalysisError::EmptyFile(path));
    }

    let mut counts: BTreeMap<CommentType, usize> =
        CommentType::ALL.iter().map(|&t| (t, 0)).collect();
    for (t, _) in typed_comments {
        *counts.entry(*t).or_default() += 1;
    }

    let function_lines: Vec<usize> = typed_comments
        .iter()
        .filter(|(t, _)| *t == CommentType::Function)
        .map(|(_, l)| *l)
        .collect();
    let functions: Vec<&Snippet> = snippets
        .iter()
        .filter(|s| s.kind == SnippetKind::FunctionDef)
        .collect();
    let documented = functions
        .iter()
        .filter(|f| {
            let mut line = f.start_line;
            while line > 1 && classes[line - 2] == LineClass::Comment {
                line -= 1;
            }
            function_lines
                .iter()
                .any(|&l| l >= line && l < f.start_line)
        })
        .count();

    Ok(DensityReport::from_counts(
        path,
        loc,
        counts,
        functions.len(),
        documented,
    ))
}

/// Pools several reports into one (densities over the summed LOC).
pub fn aggregate(reports: &[DensityReport]) -> Option<DensityReport> {
    let loc: usize = reports.iter().map(|r| r.loc).sum();
    if loc == 0 {
        return None;
    }
    let mut counts: BTreeMap<CommentType, usize> = BTreeMap::new();
    for r in reports {
        for (&t, &c) in &r.counts {
            *counts.entry(t).or_default() += c;
        }
    }
    Some(DensityReport::from_counts(
        "(total)".into(),
        loc,
        counts,
        reports.iter().map(|r| r.function_total).sum(),
        reports.iter().map(|r| r.function_documented).sum(),
    ))
}

/// Plain-text table of a report: one row per comment type.
pub fn render_table(report: &DensityReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", report.path);
    let _ = writeln!(out, "{:<22}{:>7}{:>14}", "type", "count", "per 100 LOC");
    for t in CommentType::ALL {
        let count = report.counts.get(&t).copied().unwrap_or(0);
        let d = report.per_type_density.get(&t).copied().unwrap_or(0.0);
        let _ = writeln!(out, "{:<22}{:>7}{:>14.2}", t.as_str(), count, d);
    }
    let coverage = match report.coverage {
        Some(c) => format!("{:.2}%", 100.0 * c),
        None => "n/a".into(),
    };
    let _ = writeln!(
        out,
        "LOC {}; functions documented {}/{} ({coverage})",
        report.loc, report.function_documented, report.function_total
    );
    out
}

const OUT_OF_SCHEMA: &[&str] = &["TODO", "FIXME", "XXX", "HACK"];

struct Group {
    start: usize,
    end: usize,
    start_line: usize,
    end_line: usize,
    style: CommentStyle,
    own_line: bool,
}

fn comment_body_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| {
            let mut t = l.trim();
            t = t.strip_suffix("*/").unwrap_or(t).trim_end();
            if let Some(rest) = t.strip_prefix("//") {
                t = rest.trim_start_matches('/');
            } else if let Some(rest) = t.strip_prefix("/*") {
                t = rest.trim_start_matches(['*', '!']);
            } else if let Some(rest) = t.strip_prefix('*') {
                t = rest;
            }
            t.trim().to_string()
        })
        .filter(|l| !l.is_empty())
        .collect()
}

fn content_type(text: &str) -> Result<Option<CommentType>, ()> {
    let body = comment_body_lines(text);
    if let Some(first) = body.first() {
        let word = first
            .split(|c: char| !c.is_ascii_alphanumeric() && c != '_')
            .next()
            .unwrap_or("");
        if OUT_OF_SCHEMA.contains(&word) {
            return Err(());
        }
    }
    if body
        .iter()
        .any(|l| l.contains("@brief") || l.contains("@param") || l.contains("@return"))
    {
        return Ok(Some(CommentType::Function));
    }
    if body.iter().any(|l| l.starts_with("Cond:")) {
        return Ok(Some(CommentType::Branch));
    }
    if body.iter().any(|l| l.starts_with("Approach:")) {
        return Ok(Some(CommentType::SnippetFunctionality));
    }
    Ok(None)
}

/// Types every comment block in `file`.
///
/// Comments that state their structure (`@brief`, `Cond:`, `Approach:`)
/// are typed by content. Otherwise a block directly above code takes the
/// classifier's type for the snippet anchored on that code line; stacked
/// blocks pair bottom-up with the snippets there, innermost first. Other
/// comments inside a function body count as SnippetFunctionality, and the
/// rest, along with TODO-style notes, stay untyped.
pub fn classify_existing_comments(
    file: &SourceFile,
    classifier: &Classifier,
) -> Result<Vec<ExistingComment>, AnalysisError> {
    let snippets = extract_snippets(file)?;
    Ok(classify_existing_with(file, &snippets, classifier))
}

pub fn classify_existing_with(
    file: &SourceFile,
    snippets: &[Snippet],
    classifier: &Classifier,
) -> Vec<ExistingComment> {
    let text = file.text();
    let classes = line_classes(file);
    let own_line = |a: usize, b: usize| (a..=b).all(|l| classes[l - 1] == LineClass::Comment);

    let mut groups: Vec<Group> = Vec::new();
    for span in scan_comments(text) {
        let start_line = file.line_of_offset(span.range.start);
        let end_line = file.line_of_offset(span.range.end.saturating_sub(1).max(span.range.start));
        let own = own_line(start_line, end_line);
        if let Some(g) = groups.last_mut() {
            let same_line = g.own_line && own && start_line == g.end_line;
            let continues = g.own_line
                && own
                && g.style == CommentStyle::Line
                && span.style == CommentStyle::Line
                && start_line == g.end_line + 1
                && !has_generated_marker(file.line(start_line));
            if same_line || continues {
                g.end = span.range.end;
                g.end_line = end_line;
                continue;
            }
        }
        groups.push(Group {
            start: span.range.start,
            end: span.range.end,
            start_line,
            end_line,
            style: span.style,
            own_line: own,
        });
    }

    let mut by_anchor: HashMap<usize, Vec<&Snippet>> = HashMap::new();
    for s in snippets {
        by_anchor.entry(s.anchor_line).or_default().push(s);
    }
    for v in by_anchor.values_mut() {
        v.sort_by_key(|s| (s.depth, s.id));
    }
    let mut cache: HashMap<usize, CommentType> = HashMap::new();
    let mut type_of = |s: &Snippet| {
        *cache
            .entry(s.id)
            .or_insert_with(|| classifier.classify(s).0.comment_type)
    };

    let in_function = |a: usize, b: usize| {
        snippets
            .iter()
            .any(|s| s.kind == SnippetKind::FunctionDef && s.start_line < a && b < s.end_line)
    };

    let mut out = Vec::with_capacity(groups.len());
    for (gi, g) in groups.iter().enumerate() {
        let comment_type = match content_type(&text[g.start..g.end]) {
            Err(()) => None,
            Ok(Some(t)) => Some(t),
            Ok(None) => {
                let adjacent = if g.own_line {
                    let mut line = g.end_line + 1;
                    while line <= classes.len() && classes[line - 1] == LineClass::Comment {
                        line += 1;
                    }
                    let code = line <= classes.len() && classes[line - 1] == LineClass::Code;
                    code.then(|| {
                        let below = groups[gi + 1..]
                            .iter()
                            .take_while(|h| h.start_line < line)
                            .filter(|h| h.own_line && h.start_line > g.end_line)
                            .count();
                        (line, below)
                    })
                } else {
                    Some((g.start_line, 0))
                };
                let snippet = adjacent.and_then(|(line, below)| {
                    let at = by_anchor.get(&line)?;
                    let idx = at.len().checked_sub(1 + below).unwrap_or(0);
                    Some(at[idx])
                });
                match snippet {
                    Some(s) => Some(type_of(s)),
                    None if in_function(g.start_line, g.end_line) => {
                        Some(CommentType::SnippetFunctionality)
                    }
                    None => None,
                }
            }
        };
        out.push(ExistingComment {
            start_line: g.start_line,
            end_line: g.end_line,
            comment_type,
        });
    }
    out
}

/// The `(type, line)` pairs of the typed comments, as [`density`] expects.
pub fn typed_lines(comments: &[ExistingComment]) -> Vec<(CommentType, usize)> {
    comments
        .iter()
        .filter_map(|c| c.comment_type.map(|t| (t, c.start_line)))
        .collect()
}

/// Classifies the file's own comments and reports their density.
pub fn analyze_file(
    file: &SourceFile,
    classifier: &Classifier,
) -> Result<DensityReport, AnalysisError> {
    let snippets = extract_snippets(file)?;
    let comments = classify_existing_with(file, &snippets, classifier);
    density_with_snippets(file, &snippets, &typed_lines(&comments))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn existing(src: &str) -> Vec<(Option<CommentType>, usize)> {
        let f = SourceFile::from_text("t.cpp", src);
        classify_existing_comments(&f, &Classifier::Baseline)
            .unwrap()
            .into_iter()
            .map(|c| (c.comment_type, c.start_line))
            .collect()
    }

    #[test]
    fn doc_block_above_function() {
        let got = existing("/**\n * @param a x\n */\nint f(int a) {\n  return a;\n}\n");
        assert_eq!(got, vec![(Some(CommentType::Function), 1)]);
    }

    #[test]
    fn adjacency_and_todo() {
        let src = "void g() {\n  // i: loop index\n  int i = 0;\n  i++; // TODO fix\n  // stray note\n\n  i--;\n}\n";
        let got = existing(src);
        assert_eq!(
            got,
            vec![
                (Some(CommentType::Variable), 2),
                (None, 4),
                (Some(CommentType::SnippetFunctionality), 5),
            ]
        );
    }

    #[test]
    fn stacked_blocks_pair_bottom_up() {
        let src = "/**\n * f\n * @brief b\n */\n// Function: spin. [comcat:2]\n// Approach: loop.\nint f() { for (;;) {} }\n";
        let got = existing(src);
        assert_eq!(
            got,
            vec![
                (Some(CommentType::Function), 1),
                (Some(CommentType::SnippetFunctionality), 5)
            ]
        );
        let src = "// outer\n// inner [comcat:1]\nint f() { for (;;) {} }\n";
        assert_eq!(
            existing(src),
            vec![
                (Some(CommentType::Function), 1),
                (Some(CommentType::SnippetFunctionality), 2)
            ]
        );
    }

    #[test]
    fn top_level_note_is_untyped() {
        assert_eq!(existing("// file header\n\nint a;\n"), vec![(None, 1)]);
    }

    #[test]
    fn density_arithmetic() {
        let mut src = String::new();
        for i in 0..50 {
            src.push_str(&format!("int v{i} = {i};\n"));
        }
        src.push_str("// only a comment\n\n");
        let f = SourceFile::from_text("d.c", src);
        assert_eq!(logical_loc(&f), 50);
        let r = density(
            &f,
            &[(CommentType::Variable, 1), (CommentType::Variable, 2)],
        )
        .unwrap();
        assert_eq!(r.per_type_density[&CommentType::Variable], 4.0);
        assert_eq!(r.per_type_density[&CommentType::Branch], 0.0);
        assert_eq!(r.coverage, None);
        assert!(matches!(
            density(&f, &[(CommentType::Variable, 99)]),
            Err(AnalysisError::OutOfBounds { .. })
        ));
        assert!(matches!(
            density(&SourceFile::from_text("e.c", "// x\n"), &[]),
            Err(AnalysisError::EmptyFile(_))
        ));
    }

    #[test]
    fn coverage_ratio() {
        let mut src = String::new();
        let mut typed = Vec::new();
        for i in 0..38 {
            if i < 7 {
                typed.push((CommentType::Function, src.lines().count() + 1));
                src.push_str("/** @brief doc */\n");
            }
            src.push_str(&format!("int f{i}(void) {{ return {i}; }}\n"));
        }
        let f = SourceFile::from_text("c.c", src);
        let r = density(&f, &typed).unwrap();
        assert_eq!((r.function_total, r.function_documented), (38, 7));
        assert!((r.coverage.unwrap() - 0.1842).abs() < 5e-5);
    }

    #[test]
    fn table_lists_every_type() {
        let f = SourceFile::from_text("d.c", "int a;\n");
        let t = render_table(&density(&f, &[(CommentType::Variable, 1)]).unwrap());
        for ty in CommentType::ALL {
            assert!(t.contains(ty.as_str()));
        }
        assert!(t.contains("100.00"));
    }
}
