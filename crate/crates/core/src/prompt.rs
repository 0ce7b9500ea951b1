//! Prompt construction.
//!
//! A file is documented in one conversation: a system message that sets the
//! generator role and carries the whole file, then one user message per
//! snippet embedding the instructions, the template and the snippet code.
//! All wording lives in the constants below and is part of the tool's
//! external behaviour; changing it changes every generated prompt.

use serde::Serialize;
use thiserror::Error;

use crate::classify::{Classification, CommentType};
use crate::source::{Snippet, SourceFile};
use crate::templates::{Template, TemplateCatalog};

pub const DEFAULT_WORD_LIMIT: usize = 30;

pub const SYSTEM_PREAMBLE: &str = "You are a software comment generator for C and C++ code. \
You will first receive a complete source file, then a series of requests, each asking for one \
comment on one code snippet from that file. Use the whole file as context. Answer every request \
with only the requested comment: no code, no Markdown, no explanations.";

pub const FILE_HEADER: &str = "The complete file to be commented:";

pub const TASK_INSTRUCTION: &str = "Write a comment for the code snippet below. The comment must \
describe the code's functionality and purpose: what the code does and why it is there.";

pub const TEMPLATE_INSTRUCTION: &str = "Fill in the template below. Replace every bracketed \
placeholder, brackets included, with information specific to the snippet. Keep all text outside \
the brackets exactly as written and do not add lines the template does not have.";

pub const FUNCTION_TEMPLATE_NOTE: &str = "Repeat the @param line once per parameter and leave it \
out if the function takes none. Repeat the @exception line once per exception type and leave it \
out if the function cannot throw. Leave out @return for functions that return nothing.";

pub const REPLY_INSTRUCTION: &str = "Reply with the comment only.";

pub const COMMENT_TYPE_LABEL: &str = "Comment type:";
pub const TEMPLATE_LABEL: &str = "Template:";
pub const SNIPPET_LABEL: &str = "Code snippet:";

pub fn word_limit_instruction(limit: usize) -> String {
    format!("Keep the comment to at most {limit} words.")
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("cannot build a prompt for an empty file")]
    EmptyFile,
    #[error("snippet {snippet_id}: classified as {classified} but template is for {template}")]
    TypeMismatch {
        snippet_id: usize,
        classified: CommentType,
        template: CommentType,
    },
    #[error("classifications and snippets do not align: {0}")]
    Alignment(String),
    #[error("word limit must be at least 1")]
    ZeroWordLimit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserPrompt {
    pub snippet_id: usize,
    pub comment_type: CommentType,
    pub content: String,
    /// Template the reply is validated against.
    #[serde(skip)]
    pub template: Template,
    /// Whether the snippet is a function taking parameters, when known.
    #[serde(skip)]
    pub has_params: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptPlan {
    pub system_message: String,
    pub user_messages: Vec<UserPrompt>,
    pub word_limit: usize,
    #[serde(skip)]
    pub function_word_limit: Option<usize>,
}

/// One line of the `prompts` dump.
#[derive(Debug, Serialize)]
pub struct PlanRecord<'a> {
    pub role: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snippet_id: Option<usize>,
    pub content: &'a str,
}

impl PromptPlan {
    pub fn records(&self) -> Vec<PlanRecord<'_>> {
        let mut out = Vec::with_capacity(self.user_messages.len() + 1);
        out.push(PlanRecord {
            role: "system",
            snippet_id: None,
            content: &self.system_message,
        });
        out.extend(self.user_messages.iter().map(|m| PlanRecord {
            role: "user",
            snippet_id: Some(m.snippet_id),
            content: &m.content,
        }));
        out
    }

    pub fn to_jsonl(&self) -> String {
        self.records()
            .iter()
            .map(|r| serde_json::to_string(r).expect("plan records serialize") + "\n")
            .collect()
    }
}

/// Wraps `body` in a Markdown fence longer than any backtick run inside it.
fn fenced(body: &str, info: &str) -> String {
    let mut longest = 0;
    let mut run = 0;
    for c in body.chars() {
        if c == '`' {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    let fence = "`".repeat((longest + 1).max(3));
    format!("{fence}{info}\n{body}\n{fence}")
}

pub fn build_system_prompt(file: &SourceFile) -> Result<String, PromptError> {
    if file.text().trim().is_empty() {
        return Err(PromptError::EmptyFile);
    }
    Ok(format!(
        "{SYSTEM_PREAMBLE}\n\n{FILE_HEADER}\n{}",
        fenced(file.text(), "cpp")
    ))
}

/// Builds the request for one snippet. `function_word_limit` optionally caps
/// function comments too; by default they are uncapped.
pub fn build_user_prompt(
    snippet: &Snippet,
    classification: &Classification,
    template: &Template,
    word_limit: usize,
) -> Result<String, PromptError> {
    build_user_prompt_with(snippet, classification, template, word_limit, None)
}

pub fn build_user_prompt_with(
    snippet: &Snippet,
    classification: &Classification,
    template: &Template,
    word_limit: usize,
    function_word_limit: Option<usize>,
) -> Result<String, PromptError> {
    if word_limit == 0 {
        return Err(PromptError::ZeroWordLimit);
    }
    if template.comment_type != classification.comment_type {
        return Err(PromptError::TypeMismatch {
            snippet_id: snippet.id,
            classified: classification.comment_type,
            template: template.comment_type,
        });
    }
    let mut out = String::new();
    out.push_str(TASK_INSTRUCTION);
    out.push_str("\n\n");
    out.push_str(COMMENT_TYPE_LABEL);
    out.push(' ');
    out.push_str(template.comment_type.as_str());
    out.push_str("\n\n");
    out.push_str(TEMPLATE_INSTRUCTION);
    if !template.inline {
        out.push(' ');
        out.push_str(FUNCTION_TEMPLATE_NOTE);
    }
    let cap = if template.inline {
        Some(word_limit)
    } else {
        function_word_limit
    };
    if let Some(cap) = cap {
        out.push(' ');
        out.push_str(&word_limit_instruction(cap));
    }
    out.push_str("\n\n");
    out.push_str(TEMPLATE_LABEL);
    out.push('\n');
    out.push_str(&fenced(&template.body, ""));
    out.push_str("\n\n");
    out.push_str(SNIPPET_LABEL);
    out.push('\n');
    out.push_str(&fenced(&snippet.text, "cpp"));
    out.push_str("\n\n");
    out.push_str(REPLY_INSTRUCTION);
    Ok(out)
}

/// Returns the code embedded in a user prompt built by [`build_user_prompt`].
pub fn embedded_snippet(prompt: &str) -> Option<&str> {
    fenced_after(prompt, SNIPPET_LABEL)
}

/// Returns the template body embedded in a user prompt.
pub fn embedded_template(prompt: &str) -> Option<&str> {
    fenced_after(prompt, TEMPLATE_LABEL)
}

/// Returns the comment type named in a user prompt.
pub fn embedded_comment_type(prompt: &str) -> Option<CommentType> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix(COMMENT_TYPE_LABEL))
        .and_then(|t| t.trim().parse().ok())
}

fn fenced_after<'a>(prompt: &'a str, label: &str) -> Option<&'a str> {
    let at = prompt.find(&format!("\n{label}\n"))? + label.len() + 2;
    let rest = &prompt[at..];
    let fence_len = rest.chars().take_while(|&c| c == '`').count();
    if fence_len < 3 {
        return None;
    }
    let body_start = rest.find('\n')? + 1;
    let closing = format!("\n{}", "`".repeat(fence_len));
    let body_end = rest[body_start - 1..].find(&closing)? + body_start - 1;
    Some(&rest[body_start..body_end.max(body_start)])
}

/// Builds the full conversation plan for a file. `classified` and `snippets`
/// must be parallel lists in extraction order.
pub fn build_plan(
    file: &SourceFile,
    classified: &[Classification],
    snippets: &[Snippet],
    catalog: &TemplateCatalog,
    word_limit: usize,
) -> Result<PromptPlan, PromptError> {
    build_plan_with(file, classified, snippets, catalog, word_limit, None)
}

pub fn build_plan_with(
    file: &SourceFile,
    classified: &[Classification],
    snippets: &[Snippet],
    catalog: &TemplateCatalog,
    word_limit: usize,
    function_word_limit: Option<usize>,
) -> Result<PromptPlan, PromptError> {
    if classified.len() != snippets.len() {
        return Err(PromptError::Alignment(format!(
            "{} classifications for {} snippets",
            classified.len(),
            snippets.len()
        )));
    }
    if let Some(w) = snippets.windows(2).find(|w| w[0].id >= w[1].id) {
        return Err(PromptError::Alignment(format!(
            "snippet {} follows snippet {}; expected extraction order",
            w[1].id, w[0].id
        )));
    }
    let system_message = build_system_prompt(file)?;
    let mut user_messages = Vec::with_capacity(snippets.len());
    for (snippet, classification) in snippets.iter().zip(classified) {
        if snippet.id != classification.snippet_id {
            return Err(PromptError::Alignment(format!(
                "classification for snippet {} paired with snippet {}",
                classification.snippet_id, snippet.id
            )));
        }
        let template = catalog.lookup(classification.comment_type);
        let content = build_user_prompt_with(
            snippet,
            classification,
            template,
            word_limit,
            function_word_limit,
        )?;
        user_messages.push(UserPrompt {
            snippet_id: snippet.id,
            comment_type: classification.comment_type,
            content,
            template: template.clone(),
            has_params: snippet.arity.map(|n| n > 0),
        });
    }
    Ok(PromptPlan {
        system_message,
        user_messages,
        word_limit,
        function_word_limit,
    })
}
