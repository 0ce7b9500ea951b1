//! Inserting generated comments above their snippets, and removing them again.
//!
//! Every inserted block tags its first line with `[comcat:N]`, where `N` is
//! the block's line count. [`strip_generated`] deletes exactly those lines,
//! which makes weaving reversible and re-runs idempotent.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;
use thiserror::Error;

use crate::classify::CommentType;
use crate::llm::GeneratedComment;
use crate::source::{line_classes, LineClass, Snippet, SourceFile};

pub const MARKER_TAG: &str = "comcat";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WeaveError {
    #[error("comment refers to unknown snippet {0}")]
    UnresolvedSnippet(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Insertion {
    pub anchor_line: usize,
    pub comment_text: String,
    pub snippet_id: usize,
    pub comment_type: CommentType,
}

#[derive(Debug, Clone)]
pub struct AnnotatedFile {
    pub original: SourceFile,
    /// Sorted by anchor line, outermost snippet first within a line.
    pub insertions: Vec<Insertion>,
    pub output_text: String,
    /// Anchor lines whose preceding line already held a comment.
    pub collisions: Vec<usize>,
    /// Snippets whose comment failed validation and was left out.
    pub skipped: Vec<usize>,
}

fn marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[comcat:(\d+)\]\s*$").expect("marker regex"))
}

pub fn marker(lines: usize) -> String {
    format!("[{MARKER_TAG}:{lines}]")
}

/// True when `line` carries a generated-block marker.
pub fn has_generated_marker(line: &str) -> bool {
    marker_re().is_match(line)
}

/// Block length recorded on a marked comment line.
fn marked_length(line: &str) -> Option<usize> {
    let t = line.trim_start();
    if !(t.starts_with("//") || t.starts_with("/*")) {
        return None;
    }
    marker_re()
        .captures(line)
        .and_then(|c| c[1].parse().ok())
        .filter(|&n| n >= 1)
}

/// Comment lines as they will appear in the file: indented and with the
/// marker on the first line.
fn render_block(comment: &str, indent: &str) -> Vec<String> {
    let lines: Vec<&str> = comment.lines().collect();
    let n = lines.len();
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                let sep = if l.trim_start().starts_with("/*") && l.contains("*/") {
                    " // "
                } else {
                    " "
                };
                format!("{indent}{l}{sep}{}", marker(n))
            } else {
                format!("{indent}{l}")
            }
        })
        .collect()
}

/// Inserts each valid comment directly above its snippet's anchor line.
/// Invalid comments are skipped and listed in [`AnnotatedFile::skipped`].
pub fn weave(
    file: &SourceFile,
    comments: &[GeneratedComment],
    snippets: &[Snippet],
) -> Result<AnnotatedFile, WeaveError> {
    let by_id: HashMap<usize, &Snippet> = snippets.iter().map(|s| (s.id, s)).collect();
    let mut placed: Vec<(usize, usize, usize, Insertion)> = Vec::new();
    let mut skipped = Vec::new();
    for c in comments {
        let snippet = by_id
            .get(&c.snippet_id)
            .ok_or(WeaveError::UnresolvedSnippet(c.snippet_id))?;
        if !c.valid || c.rendered_text.trim().is_empty() {
            skipped.push(c.snippet_id);
            continue;
        }
        placed.push((
            snippet.anchor_line,
            snippet.depth,
            snippet.id,
            Insertion {
                anchor_line: snippet.anchor_line,
                comment_text: c.rendered_text.clone(),
                snippet_id: c.snippet_id,
                comment_type: c.comment_type,
            },
        ));
    }
    placed.sort_by_key(|p| (p.0, p.1, p.2));
    let insertions: Vec<Insertion> = placed.into_iter().map(|p| p.3).collect();

    let classes = line_classes(file);
    let newline = file.newline_style().as_str();
    let text = file.text();
    let mut out = String::with_capacity(text.len() + insertions.len() * 80);
    let mut collisions = Vec::new();
    let mut next = 0;
    for line in 1..=file.line_count() {
        let first_here = next;
        while next < insertions.len() && insertions[next].anchor_line == line {
            for l in render_block(&insertions[next].comment_text, file.indentation(line)) {
                out.push_str(&l);
                out.push_str(newline);
            }
            next += 1;
        }
        if next > first_here && line > 1 && classes[line - 2] == LineClass::Comment {
            collisions.push(line);
        }
        out.push_str(file.raw_line(line));
    }

    Ok(AnnotatedFile {
        original: file.clone(),
        insertions,
        output_text: out,
        collisions,
        skipped,
    })
}

/// Removes every marked block, leaving all other text untouched.
pub fn strip_generated(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut skip = 0usize;
    for raw in text.split_inclusive('\n') {
        if skip > 0 {
            skip -= 1;
            continue;
        }
        let content = raw.trim_end_matches(['\n', '\r']);
        if let Some(n) = marked_length(content) {
            skip = n - 1;
            continue;
        }
        out.push_str(raw);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::extract_snippets;

    fn comment(id: usize, ty: CommentType, text: &str) -> GeneratedComment {
        GeneratedComment {
            snippet_id: id,
            comment_type: ty,
            raw_text: text.into(),
            rendered_text: text.into(),
            attempts: 1,
            valid: true,
            problems: Vec::new(),
        }
    }

    #[test]
    fn indentation_follows_anchor() {
        let f = SourceFile::from_text("a.c", "void f(void) {\n    int x = 0;\n}\n");
        let s = extract_snippets(&f).unwrap();
        let var = s.iter().find(|s| s.start_line == 2).unwrap();
        let a = weave(
            &f,
            &[comment(var.id, CommentType::Variable, "// x: zero.")],
            &s,
        )
        .unwrap();
        assert_eq!(
            a.output_text,
            "void f(void) {\n    // x: zero. [comcat:1]\n    int x = 0;\n}\n"
        );
        assert_eq!(strip_generated(&a.output_text), f.text());
    }

    #[test]
    fn outermost_first_on_shared_anchor() {
        let f = SourceFile::from_text("a.c", "int f(int n) { for (;;) {} }\n");
        let s = extract_snippets(&f).unwrap();
        assert_eq!(s.len(), 2);
        let func = s
            .iter()
            .find(|s| s.kind == crate::source::SnippetKind::FunctionDef)
            .unwrap()
            .id;
        let lp = s
            .iter()
            .find(|s| s.kind == crate::source::SnippetKind::Loop)
            .unwrap()
            .id;
        let cs = [
            comment(
                lp,
                CommentType::SnippetFunctionality,
                "// Function: spin.\n// Approach: forever.",
            ),
            comment(func, CommentType::Function, "/**\n * f\n * @brief b\n */"),
        ];
        let a = weave(&f, &cs, &s).unwrap();
        assert_eq!(a.insertions[0].comment_type, CommentType::Function);
        let lines: Vec<&str> = a.output_text.lines().collect();
        assert_eq!(lines[0], "/** [comcat:4]");
        assert_eq!(lines[4], "// Function: spin. [comcat:2]");
        assert_eq!(a.output_text.lines().count(), 1 + 4 + 2);
        assert_eq!(strip_generated(&a.output_text), f.text());
    }

    #[test]
    fn crlf_and_missing_final_newline() {
        let f = SourceFile::from_text("a.c", "int a;\r\nint b;");
        let s = extract_snippets(&f).unwrap();
        let cs: Vec<_> = s
            .iter()
            .map(|s| comment(s.id, CommentType::Variable, "// v: value."))
            .collect();
        let a = weave(&f, &cs, &s).unwrap();
        assert_eq!(
            a.output_text,
            "// v: value. [comcat:1]\r\nint a;\r\n// v: value. [comcat:1]\r\nint b;"
        );
        assert_eq!(strip_generated(&a.output_text), f.text());
    }

    #[test]
    fn human_comments_survive_and_collide() {
        let f = SourceFile::from_text("a.c", "// the counter\nint a;\n");
        let s = extract_snippets(&f).unwrap();
        let a = weave(&f, &[comment(0, CommentType::Variable, "// a: count.")], &s).unwrap();
        assert_eq!(a.collisions, vec![2]);
        assert!(a.output_text.starts_with("// the counter\n// a: count."));
        assert_eq!(strip_generated(&a.output_text), f.text());
        assert_eq!(strip_generated(f.text()), f.text());
    }

    #[test]
    fn single_line_block_comment_marker() {
        let f = SourceFile::from_text("a.c", "int g() { return 1; }\n");
        let s = extract_snippets(&f).unwrap();
        let a = weave(
            &f,
            &[comment(0, CommentType::Function, "/** g @brief one */")],
            &s,
        )
        .unwrap();
        assert!(a
            .output_text
            .starts_with("/** g @brief one */ // [comcat:1]\n"));
        assert_eq!(strip_generated(&a.output_text), f.text());
    }

    #[test]
    fn invalid_skipped_and_dangling_rejected() {
        let f = SourceFile::from_text("a.c", "int a;\n");
        let s = extract_snippets(&f).unwrap();
        let mut c = comment(0, CommentType::Variable, "// a: b.");
        c.valid = false;
        let a = weave(&f, &[c], &s).unwrap();
        assert_eq!(a.output_text, f.text());
        assert_eq!(a.skipped, vec![0]);
        let err = weave(&f, &[comment(7, CommentType::Variable, "// a: b.")], &s).unwrap_err();
        assert_eq!(err, WeaveError::UnresolvedSnippet(7));
    }

    #[test]
    fn marker_detection() {
        assert!(has_generated_marker("// x [comcat:3]"));
        assert!(!has_generated_marker("// see [comcat:3] above"));
        assert_eq!(marked_length("int a; // [comcat:2]"), None);
    }
}
