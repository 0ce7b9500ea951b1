//! The comment template catalog and output validation.
//!
//! Each [`CommentType`] owns one skeleton. Text in square brackets is a
//! placeholder the model must replace; the remaining marker lines (`@brief`,
//! `// Cond:`, ...) are the stable structure that validation checks for.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::CommentType;

pub const FUNCTION_TEMPLATE: &str = "/**
 * [Function name]
 * @brief [Brief description of the function]
 *
 * [Provide a detailed explanation of the function's purpose and functionality]
 *
 * @param [param1] [Description of the first parameter]
 * @param [param2] [Description of the second parameter]
 * @return [Description of the return value]
 *
 * @exception [ExceptionType] [Description of the exception and when it can occur]
 */";

pub const VARIABLE_TEMPLATE: &str =
    "// [Variable/Constant/Literal Name]: [Description and purpose].";

pub const SNIPPET_FUNCTIONALITY_TEMPLATE: &str = "// Function: [Functionality and purpose].
// Approach: [Approach or strategy].";

pub const BRANCH_TEMPLATE: &str = "// Cond: [Conditions]
// Function: [Functionality and Purpose]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Template {
    pub comment_type: CommentType,
    pub body: String,
    pub placeholders: Vec<String>,
    pub inline: bool,
}

impl Template {
    pub fn new(comment_type: CommentType, body: impl Into<String>) -> Template {
        let body = body.into();
        let placeholders = placeholders_in(&body);
        Template {
            comment_type,
            inline: comment_type.is_inline(),
            body,
            placeholders,
        }
    }
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([^\[\]\n]+)\]").unwrap())
}

/// Distinct bracketed placeholder names, in order of first appearance.
fn placeholders_in(body: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for cap in placeholder_re().captures_iter(body) {
        let name = cap[1].to_string();
        if !out.contains(&name) {
            out.push(name);
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read template overrides {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid template overrides: {0}")]
    Format(String),
}

/// Fixed mapping from comment type to template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateCatalog {
    templates: BTreeMap<CommentType, Template>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideFile {
    #[serde(default)]
    templates: BTreeMap<String, OverrideEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideEntry {
    body: String,
}

impl TemplateCatalog {
    pub fn builtin() -> &'static TemplateCatalog {
        static CATALOG: OnceLock<TemplateCatalog> = OnceLock::new();
        CATALOG.get_or_init(|| {
            let templates = [
                (CommentType::Function, FUNCTION_TEMPLATE),
                (CommentType::Variable, VARIABLE_TEMPLATE),
                (
                    CommentType::SnippetFunctionality,
                    SNIPPET_FUNCTIONALITY_TEMPLATE,
                ),
                (CommentType::Branch, BRANCH_TEMPLATE),
            ]
            .into_iter()
            .map(|(t, body)| (t, Template::new(t, body)))
            .collect();
            TemplateCatalog { templates }
        })
    }

    pub fn lookup(&self, comment_type: CommentType) -> &Template {
        &self.templates[&comment_type]
    }

    /// Builds a catalog from the built-in set with bodies replaced by a TOML
    /// document of the form `[templates.Branch] body = "..."`.
    pub fn with_overrides_toml(toml_text: &str) -> Result<TemplateCatalog, CatalogError> {
        let parsed: OverrideFile =
            toml::from_str(toml_text).map_err(|e| CatalogError::Format(e.to_string()))?;
        let mut catalog = TemplateCatalog::builtin().clone();
        for (name, entry) in parsed.templates {
            let comment_type: CommentType = name
                .parse()
                .map_err(|_| CatalogError::Format(format!("unknown comment type {name:?}")))?;
            if entry.body.trim().is_empty() {
                return Err(CatalogError::Format(format!(
                    "empty template body for {name}"
                )));
            }
            catalog
                .templates
                .insert(comment_type, Template::new(comment_type, entry.body));
        }
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<TemplateCatalog, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::with_overrides_toml(&text)
    }
}

impl Default for TemplateCatalog {
    fn default() -> Self {
        TemplateCatalog::builtin().clone()
    }
}

/// Shorthand for `TemplateCatalog::builtin().lookup(t)`.
pub fn lookup(comment_type: CommentType) -> &'static Template {
    TemplateCatalog::builtin().lookup(comment_type)
}

/// Whitespace-separated words after comment markers (`//`, `/*`, `*/`, a
/// leading `*`) are removed.
pub fn word_count(comment: &str) -> usize {
    comment
        .lines()
        .map(|line| {
            let mut l = line.trim();
            if let Some(rest) = l.strip_suffix("*/") {
                l = rest;
            }
            if l.starts_with("//") {
                l = l.trim_start_matches('/');
            } else if let Some(rest) = l.strip_prefix("/*") {
                l = rest.trim_start_matches('*');
            } else {
                l = l.trim_start_matches('*');
            }
            l.split_whitespace()
                .filter(|w| !matches!(*w, "//" | "/*" | "*/" | "*" | "/**"))
                .count()
        })
        .sum()
}

/// What the validator needs beyond the template itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationOptions {
    /// Word cap applied to inline templates.
    pub word_limit: usize,
    /// Optional cap for non-inline (function) comments.
    pub function_word_limit: Option<usize>,
    /// Whether the documented function takes parameters; `@param` lines are
    /// only required when it does. `None` means unknown (not required).
    pub has_params: Option<bool>,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            word_limit: crate::prompt::DEFAULT_WORD_LIMIT,
            function_word_limit: None,
            has_params: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub structure_ok: bool,
    pub placeholders_ok: bool,
    pub length_ok: bool,
    pub word_count: usize,
    /// Human-readable reasons for every failed check.
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.structure_ok && self.placeholders_ok && self.length_ok
    }
}

/// Checks a generated comment against its template: marker lines present in
/// order, no placeholder left unreplaced, and the word cap respected.
pub fn validate_against_template(
    comment_text: &str,
    template: &Template,
    options: &ValidationOptions,
) -> ValidationReport {
    let mut problems = Vec::new();
    let lines: Vec<&str> = comment_text.lines().map(str::trim).collect();

    if comment_text.trim().is_empty() {
        problems.push("comment is empty".to_string());
    } else {
        check_structure(&lines, template, options, &mut problems);
    }
    let structure_ok = problems.is_empty();

    let leaked: Vec<&String> = template
        .placeholders
        .iter()
        .filter(|p| comment_text.contains(&format!("[{p}]")))
        .collect();
    let placeholders_ok = leaked.is_empty();
    for p in leaked {
        problems.push(format!("unreplaced placeholder [{p}]"));
    }

    let words = word_count(comment_text);
    let cap = if template.inline {
        Some(options.word_limit)
    } else {
        options.function_word_limit
    };
    let length_ok = cap.map_or(true, |cap| words <= cap);
    if let Some(cap) = cap.filter(|_| !length_ok) {
        problems.push(format!("{words} words exceeds the limit of {cap}"));
    }

    ValidationReport {
        structure_ok,
        placeholders_ok,
        length_ok,
        word_count: words,
        problems,
    }
}

/// Marker prefixes that must appear, in order, for an inline template.
fn inline_markers(template: &Template) -> Vec<String> {
    template
        .body
        .lines()
        .filter_map(|line| {
            let l = line.trim();
            let after = l.strip_prefix("//")?.trim_start();
            let marker_end = after.find(':')?;
            let marker = &after[..=marker_end];
            // Lines whose "marker" is itself a placeholder carry no fixed text.
            (!marker.contains('[')).then(|| marker.to_string())
        })
        .collect()
}

fn check_structure(
    lines: &[&str],
    template: &Template,
    options: &ValidationOptions,
    problems: &mut Vec<String>,
) {
    if lines.iter().any(|l| l.ends_with('\\')) {
        problems.push("a line ends with a backslash continuation".into());
    }
    if lines.iter().any(|l| crate::weave::has_generated_marker(l)) {
        problems.push("comment contains the generated-block marker".into());
    }

    if template.inline {
        if let Some(bad) = lines.iter().find(|l| !l.starts_with("//")) {
            problems.push(format!("inline comment line is not a // comment: {bad:?}"));
            return;
        }
        let markers = inline_markers(template);
        if markers.is_empty() {
            // Single-line "name: description" form.
            if lines.len() != 1 {
                problems.push(format!(
                    "expected a single comment line, found {}",
                    lines.len()
                ));
            } else {
                let body = lines[0].trim_start_matches('/').trim();
                match body.split_once(':') {
                    Some((name, desc)) if !name.trim().is_empty() && !desc.trim().is_empty() => {}
                    _ => problems.push("expected \"// name: description\"".into()),
                }
            }
            return;
        }
        let mut next = 0;
        for line in lines {
            let body = line.trim_start_matches('/').trim_start();
            if next < markers.len() && body.starts_with(markers[next].as_str()) {
                next += 1;
            }
        }
        if next < markers.len() {
            problems.push(format!("missing marker line \"// {}\"", markers[next]));
        }
        return;
    }

    // Function (block) template.
    let first = lines.first().copied().unwrap_or("");
    let last = lines.last().copied().unwrap_or("");
    if !first.starts_with("/*") {
        problems.push("function comment must open with /**".into());
    }
    if !last.ends_with("*/") {
        problems.push("function comment must close with */".into());
    }
    let body_text = lines.join("\n");
    let inner = body_text
        .strip_prefix("/*")
        .and_then(|b| b.strip_suffix("*/"))
        .unwrap_or("");
    if inner.contains("*/") {
        problems.push("comment closes before its last line".into());
    }

    let position = |tag: &str| lines.iter().position(|l| l.contains(tag));
    let brief = position("@brief");
    if brief.is_none() {
        problems.push("missing @brief".into());
    }
    let params: Vec<usize> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.contains("@param"))
        .map(|(i, _)| i)
        .collect();
    if options.has_params == Some(true) && params.is_empty() {
        problems.push("missing @param for a function with parameters".into());
    }
    let ret = position("@return");
    let exception = position("@exception");
    // Present markers must keep the template's order.
    let mut order: Vec<(usize, &str)> = Vec::new();
    if let Some(b) = brief {
        order.push((b, "@brief"));
    }
    if let Some(&p) = params.first() {
        order.push((p, "@param"));
    }
    if let Some(r) = ret {
        order.push((r, "@return"));
    }
    if let Some(e) = exception {
        order.push((e, "@exception"));
    }
    if order.windows(2).any(|w| w[0].0 > w[1].0) {
        problems.push("markers out of order (expected @brief, @param, @return, @exception)".into());
    }
}
