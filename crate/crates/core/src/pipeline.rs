//! The per-file `comment` run: extract, classify, prompt, generate, weave.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::classify::{classify_all, Classifier, CommentType};
use crate::llm::{run_plan_with, ChatBackend, RunOptions};
use crate::prompt::{build_plan_with, DEFAULT_WORD_LIMIT};
use crate::source::{extract_with, strip_comments, ExtractOptions, SnippetKind, SourceFile};
use crate::templates::TemplateCatalog;
use crate::weave::{strip_generated, weave};

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub word_limit: usize,
    pub function_word_limit: Option<usize>,
    pub run: RunOptions,
    pub extract: ExtractOptions,
    /// Drop the file's existing comments before generating new ones.
    pub replace_existing: bool,
    pub catalog: TemplateCatalog,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            word_limit: DEFAULT_WORD_LIMIT,
            function_word_limit: None,
            run: RunOptions::default(),
            extract: ExtractOptions::default(),
            replace_existing: false,
            catalog: TemplateCatalog::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnippetReport {
    pub snippet_id: usize,
    pub kind: SnippetKind,
    pub start_line: usize,
    pub comment_type: CommentType,
    pub attempts: usize,
    pub valid: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub problems: Vec<String>,
}

/// What happened to one file; serialized as one JSONL report line.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct FileReport {
    pub path: String,
    pub backend: String,
    pub snippets: usize,
    pub types: BTreeMap<String, usize>,
    pub comments: Vec<SnippetReport>,
    /// Snippets whose comment failed validation after all retries.
    pub failures: Vec<usize>,
    /// Anchor lines that already had a comment directly above them.
    pub collisions: Vec<usize>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

impl FileReport {
    pub fn has_invalid(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn has_error(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct FileOutcome {
    pub report: FileReport,
    /// Woven text; `None` when the file could not be processed at all.
    pub output: Option<String>,
}

/// Runs the whole pipeline on one file. Earlier generated blocks are removed
/// first, so feeding the output back in reproduces it.
pub fn comment_file(
    file: &SourceFile,
    classifier: &Classifier,
    backend: &dyn ChatBackend,
    options: &PipelineOptions,
) -> FileOutcome {
    let mut report = FileReport {
        path: file.path().display().to_string(),
        backend: backend.identity().to_string(),
        ..FileReport::default()
    };
    let fail = |mut report: FileReport, msg: String| {
        report.error = Some(msg);
        FileOutcome {
            report,
            output: None,
        }
    };

    let base = SourceFile::from_text(file.path(), strip_generated(file.text()));
    let base = if options.replace_existing {
        strip_comments(&base)
    } else {
        base
    };

    let extraction = match extract_with(&base, &options.extract) {
        Ok(e) => e,
        Err(e) => return fail(report, e.to_string()),
    };
    report.warnings.extend(
        extraction
            .diagnostics
            .iter()
            .map(|d| format!("lines {}-{}: {}", d.start_line, d.end_line, d.message)),
    );
    let snippets = extraction.snippets;
    report.snippets = snippets.len();
    if snippets.is_empty() {
        return FileOutcome {
            output: Some(base.text().to_string()),
            report,
        };
    }

    let batch = classify_all(&snippets, classifier);
    report.warnings.extend(
        batch
            .warnings
            .iter()
            .map(|(id, e)| format!("snippet {id}: {e}")),
    );
    for c in &batch.classifications {
        *report
            .types
            .entry(c.comment_type.as_str().to_string())
            .or_default() += 1;
    }

    let plan = match build_plan_with(
        &base,
        &batch.classifications,
        &snippets,
        &options.catalog,
        options.word_limit,
        options.function_word_limit,
    ) {
        Ok(p) => p,
        Err(e) => return fail(report, e.to_string()),
    };
    let outcome = run_plan_with(&plan, backend, &options.run);
    if let Some(e) = &outcome.error {
        report.error = Some(e.to_string());
    }

    let by_id: BTreeMap<usize, &crate::source::Snippet> =
        snippets.iter().map(|s| (s.id, s)).collect();
    for c in &outcome.comments {
        let s = by_id[&c.snippet_id];
        report.comments.push(SnippetReport {
            snippet_id: c.snippet_id,
            kind: s.kind,
            start_line: s.start_line,
            comment_type: c.comment_type,
            attempts: c.attempts,
            valid: c.valid,
            problems: c.problems.clone(),
        });
        if !c.valid {
            report.failures.push(c.snippet_id);
        }
    }

    match weave(&base, &outcome.comments, &snippets) {
        Ok(annotated) => {
            report.collisions = annotated.collisions;
            FileOutcome {
                report,
                output: Some(annotated.output_text),
            }
        }
        Err(e) => fail(report, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::FixtureBackend;

    const SRC: &str = "int total = 0;\n\nint sum(int n) {\n  for (int i = 0; i < n; i++) {\n    if (i % 2) {\n      total += i;\n    }\n  }\n  return total;\n}\n";

    #[test]
    fn idempotent_with_synthetic_backend() {
        let backend = FixtureBackend::synthetic();
        let opts = PipelineOptions::default();
        let first = comment_file(
            &SourceFile::from_text("a.c", SRC),
            &Classifier::Baseline,
            &backend,
            &opts,
        );
        assert!(first.report.error.is_none(), "{:?}", first.report);
        assert!(first.report.failures.is_empty(), "{:?}", first.report);
        let out = first.output.unwrap();
        assert_eq!(strip_generated(&out), SRC);
        let second = comment_file(
            &SourceFile::from_text("a.c", out.as_str()),
            &Classifier::Baseline,
            &backend,
            &opts,
        );
        assert_eq!(second.output.unwrap(), out);
        assert_eq!(first.report.snippets, 4);
    }

    #[test]
    fn unparseable_file_reports_error() {
        let backend = FixtureBackend::synthetic();
        let bad = SourceFile::from_text("b.c", "}}}} ))) ;;; {{ <<<>>> @@@ ### $$$ ~~~\n");
        let out = comment_file(
            &bad,
            &Classifier::Baseline,
            &backend,
            &PipelineOptions::default(),
        );
        assert!(out.report.has_error());
        assert!(out.output.is_none());
    }
}
