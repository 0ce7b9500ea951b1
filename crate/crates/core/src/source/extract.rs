use std::collections::HashSet;
use std::ops::Range;

use serde::Serialize;
use tree_sitter::{Node, Parser};

use super::{Language, Snippet, SnippetKind, SourceError, SourceFile};

/// Share of the file that may sit inside parse-error regions before the
/// whole file is rejected.
const MAX_ERROR_FRACTION: f64 = 0.5;

/// Parents under which a declaration is a statement of its own (as opposed
/// to a `for` initializer, a condition, a parameter, ...).
const STATEMENT_CONTEXTS: &[&str] = &[
    "translation_unit",
    "declaration_list",
    "compound_statement",
    "field_declaration_list",
    "linkage_specification",
    "template_declaration",
    "case_statement",
    "labeled_statement",
    "preproc_if",
    "preproc_ifdef",
    "preproc_else",
    "preproc_elif",
    "preproc_elifdef",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractOptions {
    /// Drop snippets nested deeper than this.
    pub max_depth: Option<usize>,
    /// Skip declarations that sit inside function bodies.
    pub top_level_declarations_only: bool,
}

/// A region that was skipped during extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub start_line: usize,
    pub end_line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub snippets: Vec<Snippet>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Extracts every commentable construct with default options.
pub fn extract_snippets(file: &SourceFile) -> Result<Vec<Snippet>, SourceError> {
    extract_with(file, &ExtractOptions::default()).map(|e| e.snippets)
}

pub fn extract_with(
    file: &SourceFile,
    options: &ExtractOptions,
) -> Result<Extraction, SourceError> {
    if file.is_empty() {
        return Ok(Extraction::default());
    }
    let language: tree_sitter::Language = match file.language() {
        Language::C => tree_sitter_c::LANGUAGE.into(),
        Language::Cpp => tree_sitter_cpp::LANGUAGE.into(),
    };
    let mut parser = Parser::new();
    parser
        .set_language(&language)
        .expect("bundled grammar is ABI compatible");
    let tree = parser
        .parse(file.text(), None)
        .ok_or_else(|| SourceError::Parse {
            path: file.path().to_path_buf(),
            detail: "parser returned no tree".into(),
        })?;

    let mut walker = Walker {
        file,
        found: Vec::new(),
        seen: HashSet::new(),
        diagnostics: Vec::new(),
        error_bytes: 0,
    };
    walker.visit(tree.root_node(), 0, false);

    let code_bytes = file
        .text()
        .bytes()
        .filter(|b| !b.is_ascii_whitespace())
        .count();
    if code_bytes > 0 && walker.error_bytes as f64 > MAX_ERROR_FRACTION * code_bytes as f64 {
        return Err(SourceError::Parse {
            path: file.path().to_path_buf(),
            detail: format!(
                "{} of {} non-blank bytes are unparseable",
                walker.error_bytes, code_bytes
            ),
        });
    }

    let mut found = walker.found;
    found.retain(|f| {
        options.max_depth.map_or(true, |max| f.depth <= max)
            && !(options.top_level_declarations_only
                && f.kind == SnippetKind::Declaration
                && f.in_function)
    });
    found.sort_by(|a, b| {
        a.start_line
            .cmp(&b.start_line)
            .then(b.depth.cmp(&a.depth))
            .then(a.bytes.start.cmp(&b.bytes.start))
            .then(a.kind.cmp(&b.kind))
    });

    let snippets = found
        .into_iter()
        .enumerate()
        .map(|(id, f)| Snippet {
            id,
            kind: f.kind,
            start_line: f.start_line,
            end_line: f.end_line,
            anchor_line: f.start_line,
            text: file.slice_lines(f.start_line, f.end_line).to_string(),
            depth: f.depth,
            arity: f.arity,
            byte_range: f.bytes,
        })
        .collect();

    Ok(Extraction {
        snippets,
        diagnostics: walker.diagnostics,
    })
}

struct Found {
    kind: SnippetKind,
    start_line: usize,
    end_line: usize,
    bytes: Range<usize>,
    depth: usize,
    in_function: bool,
    arity: Option<usize>,
}

struct Walker<'a> {
    file: &'a SourceFile,
    found: Vec<Found>,
    seen: HashSet<(SnippetKind, usize, usize)>,
    diagnostics: Vec<Diagnostic>,
    error_bytes: usize,
}

impl Walker<'_> {
    fn visit(&mut self, node: Node<'_>, depth: usize, in_function: bool) {
        if node.is_error() {
            let (start_line, end_line) = self.lines(node);
            self.error_bytes += node
                .utf8_text(self.file.text().as_bytes())
                .map(|t| t.bytes().filter(|b| !b.is_ascii_whitespace()).count())
                .unwrap_or(0);
            self.diagnostics.push(Diagnostic {
                start_line,
                end_line,
                message: "unparseable region skipped".into(),
            });
            return;
        }

        let mut child_depth = depth;
        if let Some(kind) = snippet_kind(node, in_function) {
            let span = span_node(node);
            let key = (kind, span.start_byte(), span.end_byte());
            if self.seen.insert(key) {
                let (start_line, end_line) = self.lines(span);
                self.found.push(Found {
                    kind,
                    start_line,
                    end_line,
                    bytes: span.start_byte()..span.end_byte(),
                    depth,
                    in_function,
                    arity: (kind == SnippetKind::FunctionDef)
                        .then(|| arity(node))
                        .flatten(),
                });
                child_depth = depth + 1;
            }
        }

        let body_scope = in_function || node.kind() == "function_definition";
        let mut cursor = node.walk();
        for child in node.children(&mut cursor) {
            self.visit(child, child_depth, body_scope);
        }
    }

    fn lines(&self, node: Node<'_>) -> (usize, usize) {
        let start = node.start_position();
        let end = node.end_position();
        let end_line = if end.column == 0 && end.row > start.row {
            end.row
        } else {
            end.row + 1
        };
        (start.row + 1, end_line.min(self.file.line_count()))
    }
}

fn snippet_kind(node: Node<'_>, in_function: bool) -> Option<SnippetKind> {
    let parent_kind = node.parent().map(|p| p.kind()).unwrap_or("");
    match node.kind() {
        "function_definition" => Some(SnippetKind::FunctionDef),
        // else-if arms belong to the chain started by the outermost `if`
        "if_statement" if parent_kind != "else_clause" => Some(SnippetKind::Conditional),
        "switch_statement" => Some(SnippetKind::Conditional),
        "for_statement" | "for_range_loop" | "while_statement" | "do_statement" => {
            Some(SnippetKind::Loop)
        }
        "try_statement" | "seh_try_statement" => Some(SnippetKind::TryCatch),
        "declaration" if STATEMENT_CONTEXTS.contains(&parent_kind) => {
            // Block-scope declarations are variables even when they look like
            // prototypes (`std::ifstream in(path);`).
            if !in_function && declares_function(node) {
                None
            } else {
                Some(SnippetKind::Declaration)
            }
        }
        "field_declaration" => {
            if declares_function(node) {
                None
            } else if node.child_by_field_name("declarator").is_some() || type_has_body(node) {
                Some(SnippetKind::Declaration)
            } else {
                None
            }
        }
        "type_definition" | "alias_declaration" if STATEMENT_CONTEXTS.contains(&parent_kind) => {
            Some(SnippetKind::Declaration)
        }
        "class_specifier" | "struct_specifier" | "union_specifier" | "enum_specifier"
            if STATEMENT_CONTEXTS.contains(&parent_kind) && has_body(node) =>
        {
            Some(SnippetKind::Declaration)
        }
        _ => None,
    }
}

/// Templates own the span of what they declare.
fn span_node(node: Node<'_>) -> Node<'_> {
    let mut span = node;
    while let Some(parent) = span.parent() {
        if parent.kind() == "template_declaration" {
            span = parent;
        } else {
            break;
        }
    }
    span
}

fn has_body(node: Node<'_>) -> bool {
    node.child_by_field_name("body").is_some()
}

fn type_has_body(node: Node<'_>) -> bool {
    node.child_by_field_name("type")
        .map(|t| {
            matches!(
                t.kind(),
                "class_specifier" | "struct_specifier" | "union_specifier" | "enum_specifier"
            ) && has_body(t)
        })
        .unwrap_or(false)
}

/// True when every declarator of the node is a function declarator.
fn declares_function(node: Node<'_>) -> bool {
    let mut cursor = node.walk();
    let declarators: Vec<Node<'_>> = node
        .children_by_field_name("declarator", &mut cursor)
        .collect();
    !declarators.is_empty()
        && declarators
            .iter()
            .all(|d| innermost_declarator(*d).kind() == "function_declarator")
}

/// Unwraps pointer/reference/init wrappers down to the declarator that names
/// the entity.
fn innermost_declarator(mut node: Node<'_>) -> Node<'_> {
    loop {
        match node.kind() {
            "pointer_declarator"
            | "reference_declarator"
            | "init_declarator"
            | "attributed_declarator" => match node.child_by_field_name("declarator") {
                Some(inner) => node = inner,
                None => {
                    // reference_declarator has no field name for its child
                    let mut cursor = node.walk();
                    match node.named_children(&mut cursor).last() {
                        Some(inner) => node = inner,
                        None => return node,
                    }
                }
            },
            _ => return node,
        }
    }
}

fn arity(function: Node<'_>) -> Option<usize> {
    let declarator = innermost_declarator(function.child_by_field_name("declarator")?);
    if declarator.kind() != "function_declarator" {
        return None;
    }
    let params = declarator.child_by_field_name("parameters")?;
    let mut cursor = params.walk();
    let named: Vec<Node<'_>> = params
        .named_children(&mut cursor)
        .filter(|n| n.kind() != "comment")
        .collect();
    // `f(void)` takes no parameters
    if named.len() == 1
        && named[0].kind() == "parameter_declaration"
        && named[0].child_by_field_name("declarator").is_none()
        && named[0]
            .child_by_field_name("type")
            .map(|t| t.kind() == "primitive_type" && t.byte_range().len() == 4)
            .unwrap_or(false)
    {
        return Some(0);
    }
    Some(named.len())
}
