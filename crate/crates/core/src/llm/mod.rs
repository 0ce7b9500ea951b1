//! Running a prompt plan against a chat-completion backend.
//!
//! One file is one conversation. The system message goes first, then each
//! user prompt in plan order; every assistant reply stays in the context for
//! the prompts that follow. Replies are normalized and validated against
//! their template, and a failing reply is re-requested with the problems
//! spelled out, up to the retry limit.

mod fixture;
mod openai;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::CommentType;
use crate::prompt::PromptPlan;
use crate::templates::{validate_against_template, ValidationOptions};

pub use fixture::{fixture_backend, synthetic_reply, FixtureBackend, Responder, Script};
pub use openai::{openai_compatible_backend, OpenAiBackend, OpenAiSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request rejected: {0}")]
    BadRequest(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("fixture script has no reply for user message {index}")]
    ScriptExhausted { index: usize },
    #[error("conversation needs ~{estimated} tokens but the model window is {limit}")]
    ContextOverflow { estimated: usize, limit: usize },
    #[error("backend misconfigured: {0}")]
    Config(String),
}

/// A chat-completion service. Implementations must not retain or alter the
/// conversation they are handed, and must tolerate concurrent conversations.
pub trait ChatBackend: Send + Sync {
    fn identity(&self) -> &str;

    fn send(&self, conversation: &[ChatMessage]) -> Result<String, BackendError>;

    /// Model context window in tokens, when known.
    fn context_limit(&self) -> Option<usize> {
        None
    }
}

/// Rough token estimate (four characters per token).
pub fn estimate_tokens(messages: &[ChatMessage]) -> usize {
    messages
        .iter()
        .map(|m| m.content.chars().count().div_ceil(4) + 4)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeneratedComment {
    pub snippet_id: usize,
    pub comment_type: CommentType,
    pub raw_text: String,
    pub rendered_text: String,
    pub attempts: usize,
    pub valid: bool,
    /// Validation problems of the last attempt.
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub retry_limit: usize,
    /// First rate-limit pause; doubles on each consecutive rate limit.
    pub backoff: Duration,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            retry_limit: 2,
            backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub comments: Vec<GeneratedComment>,
    /// The full conversation as it stood when the run ended.
    pub transcript: Vec<ChatMessage>,
    /// Set when the backend failed and the run stopped early.
    pub error: Option<BackendError>,
}

pub fn run_plan(plan: &PromptPlan, backend: &dyn ChatBackend, retry_limit: usize) -> RunOutcome {
    run_plan_with(
        plan,
        backend,
        &RunOptions {
            retry_limit,
            ..RunOptions::default()
        },
    )
}

pub fn run_plan_with(
    plan: &PromptPlan,
    backend: &dyn ChatBackend,
    options: &RunOptions,
) -> RunOutcome {
    let mut conversation = vec![ChatMessage::system(plan.system_message.clone())];
    let mut comments = Vec::with_capacity(plan.user_messages.len());

    let fail = |conversation: Vec<ChatMessage>, comments, error| RunOutcome {
        comments,
        transcript: conversation,
        error: Some(error),
    };

    for prompt in &plan.user_messages {
        let validation = ValidationOptions {
            word_limit: plan.word_limit,
            function_word_limit: plan.function_word_limit,
            has_params: prompt.has_params,
        };
        let mut attempts = 0;
        let mut rate_limits = 0u32;
        let mut problems: Vec<String> = Vec::new();
        let mut last_raw = String::new();
        let mut last_rendered = String::new();
        let mut valid = false;

        while attempts <= options.retry_limit {
            let content = if problems.is_empty() {
                prompt.content.clone()
            } else {
                format!(
                    "{}\n\n{}",
                    prompt.content,
                    corrective_instruction(&problems)
                )
            };
            conversation.push(ChatMessage::user(content));

            if let Some(limit) = backend.context_limit() {
                let estimated = estimate_tokens(&conversation);
                if estimated > limit {
                    conversation.pop();
                    return fail(
                        conversation,
                        comments,
                        BackendError::ContextOverflow { estimated, limit },
                    );
                }
            }

            match backend.send(&conversation) {
                Ok(reply) => {
                    attempts += 1;
                    rate_limits = 0;
                    conversation.push(ChatMessage::assistant(reply.clone()));
                    let rendered = normalize_reply(&reply, prompt.comment_type);
                    let report =
                        validate_against_template(&rendered, &prompt.template, &validation);
                    last_raw = reply;
                    last_rendered = rendered;
                    problems = report.problems.clone();
                    if report.passed() {
                        valid = true;
                        break;
                    }
                }
                Err(BackendError::RateLimited(msg)) => {
                    conversation.pop();
                    attempts += 1;
                    if attempts > options.retry_limit {
                        return fail(conversation, comments, BackendError::RateLimited(msg));
                    }
                    let pause = options.backoff.saturating_mul(1u32 << rate_limits.min(16));
                    log::warn!("rate limited; retrying in {pause:?}");
                    std::thread::sleep(pause);
                    rate_limits += 1;
                }
                Err(err) => {
                    conversation.pop();
                    return fail(conversation, comments, err);
                }
            }
        }

        comments.push(GeneratedComment {
            snippet_id: prompt.snippet_id,
            comment_type: prompt.comment_type,
            raw_text: last_raw,
            rendered_text: last_rendered,
            attempts,
            valid,
            problems: if valid { Vec::new() } else { problems },
        });
    }

    RunOutcome {
        comments,
        transcript: conversation,
        error: None,
    }
}

pub fn corrective_instruction(problems: &[String]) -> String {
    format!(
        "Your previous reply did not follow the template: {}. Write the comment again so that it \
follows the template exactly. Reply with the comment only.",
        problems.join("; ")
    )
}

/// Cleans a model reply into comment text: takes the first fenced block if
/// there is one, trims blank edges, normalizes indentation, and makes every
/// inline line a `//` comment.
pub fn normalize_reply(raw: &str, comment_type: CommentType) -> String {
    let body = fenced_body(raw).unwrap_or(raw);
    let mut lines: Vec<&str> = body.lines().map(|l| l.trim_end()).collect();
    while lines.first().is_some_and(|l| l.trim().is_empty()) {
        lines.remove(0);
    }
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }

    let out: Vec<String> = if comment_type.is_inline() {
        lines
            .iter()
            .map(|l| l.trim_start())
            .filter(|l| !l.is_empty())
            .map(|l| {
                if l.starts_with("//") {
                    l.to_string()
                } else {
                    format!("// {l}")
                }
            })
            .collect()
    } else {
        lines
            .iter()
            .map(|l| {
                let t = l.trim_start();
                if t.starts_with('*') {
                    format!(" {t}")
                } else {
                    t.to_string()
                }
            })
            .collect()
    };
    out.join("\n")
}

fn fenced_body(raw: &str) -> Option<&str> {
    let open = raw.find("```")?;
    let after = &raw[open..];
    let body_start = open + after.find('\n')? + 1;
    let close = raw[body_start..].find("```")?;
    Some(&raw[body_start..body_start + close])
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::classify::classify_baseline;
    use crate::prompt::build_plan;
    use crate::source::{extract_snippets, SourceFile};
    use crate::templates::{word_count, TemplateCatalog};

    fn plan_for(src: &str) -> PromptPlan {
        let file = SourceFile::from_text("t.c", src);
        let snippets = extract_snippets(&file).unwrap();
        let classes: Vec<_> = snippets.iter().map(classify_baseline).collect();
        build_plan(&file, &classes, &snippets, TemplateCatalog::builtin(), 30).unwrap()
    }

    fn script(replies: &[(usize, &str)]) -> FixtureBackend {
        fixture_backend(
            replies
                .iter()
                .map(|(i, r)| (*i, r.to_string()))
                .collect::<BTreeMap<_, _>>(),
        )
    }

    #[test]
    fn happy_path_single_attempt() {
        let plan = plan_for("int x = 0;\n");
        let backend = script(&[(0, "// x: counter.")]);
        let out = run_plan(&plan, &backend, 2);
        assert!(out.error.is_none());
        assert_eq!(out.comments.len(), 1);
        assert_eq!(out.comments[0].attempts, 1);
        assert!(out.comments[0].valid);
        assert_eq!(out.comments[0].rendered_text, "// x: counter.");
        let t = backend.transcript();
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].role, Role::System);
        assert_eq!(t[1].role, Role::User);
        assert_eq!(t[2].role, Role::Assistant);
    }

    #[test]
    fn over_long_then_compliant() {
        let long = format!("// x: {}", vec!["word"; 39].join(" "));
        let short = format!("// x: {}", vec!["word"; 19].join(" "));
        // Independent count: tokens after the leading "//".
        assert_eq!(long.split_whitespace().skip(1).count(), 40);
        assert_eq!(short.split_whitespace().skip(1).count(), 20);
        assert_eq!(word_count(&long), 40);
        assert_eq!(word_count(&short), 20);

        let plan = plan_for("int x = 0;\n");
        let backend = script(&[(0, &long), (1, &short)]);
        let out = run_plan(&plan, &backend, 2);
        assert_eq!(out.comments[0].attempts, 2);
        assert!(out.comments[0].valid);
        assert_eq!(out.comments[0].rendered_text, short);
        // The retry re-issues the prompt with a corrective note appended.
        let requests = backend.requests();
        let retry = &requests[1].last().unwrap().content;
        assert!(retry.starts_with(&plan.user_messages[0].content));
        assert!(retry.contains("exceeds the limit of 30"));
    }

    #[test]
    fn exhaustion_marks_invalid() {
        let plan = plan_for("int x = 0;\n");
        let leak = "// [Variable/Constant/Literal Name]: [Description and purpose].";
        let backend = script(&[(0, leak), (1, leak), (2, leak)]);
        let out = run_plan(&plan, &backend, 2);
        let c = &out.comments[0];
        assert_eq!(c.attempts, 3);
        assert!(!c.valid);
        assert_eq!(c.raw_text, leak);
        assert!(!c.problems.is_empty());
    }

    #[test]
    fn backend_error_keeps_partial_results() {
        let plan = plan_for("int a = 0;\nint b = 1;\n");
        let backend = script(&[(0, "// a: first.")]);
        let out = run_plan(&plan, &backend, 0);
        assert_eq!(out.comments.len(), 1);
        assert_eq!(out.error, Some(BackendError::ScriptExhausted { index: 1 }));
    }

    #[test]
    fn conversation_is_monotonic() {
        let plan = plan_for("int a = 0;\nint b = 1;\nint c = 2;\n");
        let backend = FixtureBackend::synthetic();
        let out = run_plan(&plan, &backend, 2);
        assert!(out.comments.iter().all(|c| c.valid));
        let reqs = backend.requests();
        for w in reqs.windows(2) {
            assert!(w[0].len() < w[1].len());
            assert_eq!(&w[1][..w[0].len()], &w[0][..]);
        }
    }

    struct Limited;
    impl ChatBackend for Limited {
        fn identity(&self) -> &str {
            "limited"
        }
        fn send(&self, _: &[ChatMessage]) -> Result<String, BackendError> {
            Ok("// x: y.".into())
        }
        fn context_limit(&self) -> Option<usize> {
            Some(10)
        }
    }

    #[test]
    fn context_overflow_rejects_file() {
        let plan = plan_for("int x = 0;\n");
        let out = run_plan(&plan, &Limited, 2);
        assert!(matches!(
            out.error,
            Some(BackendError::ContextOverflow { .. })
        ));
        assert!(out.comments.is_empty());
    }

    #[test]
    fn normalization() {
        assert_eq!(
            normalize_reply(
                "```cpp\n  // Cond: x > 0\n  // Function: go\n```\n",
                CommentType::Branch
            ),
            "// Cond: x > 0\n// Function: go"
        );
        assert_eq!(
            normalize_reply("Cond: ready\nFunction: start", CommentType::Branch),
            "// Cond: ready\n// Function: start"
        );
        assert_eq!(
            normalize_reply(
                "\n   /**\n   * f\n   * @brief b\n   */\n",
                CommentType::Function
            ),
            "/**\n * f\n * @brief b\n */"
        );
    }
}
