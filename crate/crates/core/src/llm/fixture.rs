//! Offline backends for tests and dry runs.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::Deserialize;

use super::{BackendError, ChatBackend, ChatMessage, Role};
use crate::classify::CommentType;
use crate::prompt::{embedded_comment_type, embedded_snippet};

/// Replies keyed by the index of the user message they answer. Retries
/// count as user messages, so a retried snippet consumes extra entries.
pub type Script = BTreeMap<usize, String>;

#[derive(Debug, Clone)]
pub enum Responder {
    Script(Script),
    /// Builds a template-conforming comment from the prompt itself.
    Synthetic,
}

#[derive(Debug)]
pub struct FixtureBackend {
    responder: Responder,
    identity: String,
    requests: Mutex<Vec<Vec<ChatMessage>>>,
    replies: Mutex<Vec<Result<String, BackendError>>>,
}

pub fn fixture_backend(script: Script) -> FixtureBackend {
    FixtureBackend::new(Responder::Script(script))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    List(Vec<String>),
    Map(BTreeMap<String, String>),
}

impl FixtureBackend {
    pub fn new(responder: Responder) -> Self {
        let identity = match responder {
            Responder::Script(_) => "fixture:script",
            Responder::Synthetic => "fixture:synthetic",
        };
        FixtureBackend {
            responder,
            identity: identity.to_string(),
            requests: Mutex::new(Vec::new()),
            replies: Mutex::new(Vec::new()),
        }
    }

    pub fn synthetic() -> Self {
        FixtureBackend::new(Responder::Synthetic)
    }

    /// Reads a script from JSON: either a list of replies or an object whose
    /// keys are user-message indices.
    pub fn from_script_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        let parsed: ScriptFile = serde_json::from_str(&text)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        let script = match parsed {
            ScriptFile::List(v) => v.into_iter().enumerate().collect(),
            ScriptFile::Map(m) => m
                .into_iter()
                .map(|(k, v)| {
                    k.parse::<usize>().map(|k| (k, v)).map_err(|_| {
                        BackendError::Config(format!("script key {k:?} is not an index"))
                    })
                })
                .collect::<Result<_, _>>()?,
        };
        Ok(fixture_backend(script))
    }

    /// Every conversation passed to [`ChatBackend::send`], in call order.
    pub fn requests(&self) -> Vec<Vec<ChatMessage>> {
        self.requests.lock().expect("fixture log poisoned").clone()
    }

    pub fn calls(&self) -> usize {
        self.requests.lock().expect("fixture log poisoned").len()
    }

    /// The last conversation sent, followed by the reply it received.
    pub fn transcript(&self) -> Vec<ChatMessage> {
        let requests = self.requests.lock().expect("fixture log poisoned");
        let replies = self.replies.lock().expect("fixture log poisoned");
        let mut out = requests.last().cloned().unwrap_or_default();
        if let Some(Ok(reply)) = replies.last() {
            out.push(ChatMessage::assistant(reply.clone()));
        }
        out
    }

    fn respond(&self, conversation: &[ChatMessage]) -> Result<String, BackendError> {
        match &self.responder {
            Responder::Script(script) => {
                let users = conversation.iter().filter(|m| m.role == Role::User).count();
                let index = users.saturating_sub(1);
                script
                    .get(&index)
                    .cloned()
                    .ok_or(BackendError::ScriptExhausted { index })
            }
            Responder::Synthetic => {
                let prompt = conversation
                    .iter()
                    .rev()
                    .find(|m| m.role == Role::User)
                    .map(|m| m.content.as_str())
                    .unwrap_or("");
                let comment_type = embedded_comment_type(prompt).ok_or_else(|| {
                    BackendError::BadRequest("prompt names no comment type".into())
                })?;
                let snippet = embedded_snippet(prompt).unwrap_or("");
                Ok(synthetic_reply(comment_type, snippet))
            }
        }
    }
}

impl ChatBackend for FixtureBackend {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn send(&self, conversation: &[ChatMessage]) -> Result<String, BackendError> {
        let reply = self.respond(conversation);
        self.requests
            .lock()
            .expect("fixture log poisoned")
            .push(conversation.to_vec());
        self.replies
            .lock()
            .expect("fixture log poisoned")
            .push(reply.clone());
        reply
    }
}

/// A deterministic comment that satisfies the built-in template for
/// `comment_type`, derived only from the snippet text.
pub fn synthetic_reply(comment_type: CommentType, snippet: &str) -> String {
    match comment_type {
        CommentType::Function => {
            let (name, params, returns) = signature_of(snippet);
            let mut out = vec![
                "/**".to_string(),
                format!(" * {name}"),
                format!(" * @brief Implements {name}."),
                " *".to_string(),
                format!(" * Carries out the work of {name} for its callers."),
                " *".to_string(),
            ];
            for p in &params {
                out.push(format!(" * @param {p} The {p} argument."));
            }
            if returns {
                out.push(format!(" * @return The result of {name}."));
            }
            out.push(" */".to_string());
            out.join("\n")
        }
        CommentType::Variable => {
            let name = declared_name(snippet).unwrap_or_else(|| "value".to_string());
            format!("// {name}: Holds state used by the surrounding code.")
        }
        CommentType::SnippetFunctionality => {
            "// Function: Repeats the enclosed statements for each step.\n\
             // Approach: Iterates until the loop condition no longer holds."
                .to_string()
        }
        CommentType::Branch => {
            let cond = condition_words(snippet);
            format!("// Cond: {cond}\n// Function: Selects the code path for this case.")
        }
    }
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Name, parameter names and whether a value is returned.
fn signature_of(snippet: &str) -> (String, Vec<String>, bool) {
    let head = snippet.split('{').next().unwrap_or(snippet);
    let head: String = head
        .lines()
        .filter(|l| !l.trim_start().starts_with("template"))
        .collect::<Vec<_>>()
        .join(" ");
    let Some(open) = head.find('(') else {
        return ("function".into(), Vec::new(), false);
    };
    let before = head[..open].trim_end();
    let name_start = before
        .rfind(|c: char| !(is_ident(c) || c == ':' || c == '~'))
        .map_or(0, |i| i + 1);
    let name = &before[name_start..];
    let name = name.rsplit("::").next().unwrap_or(name);
    let name = if name.is_empty() { "function" } else { name }.to_string();
    let prefix = &before[..name_start];
    let returns = !prefix.split(|c: char| !is_ident(c)).any(|w| w == "void")
        && !prefix.trim().is_empty()
        && !name.starts_with('~');

    let mut depth = 0usize;
    let mut end = head.len();
    for (i, c) in head[open..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    end = open + i;
                    break;
                }
            }
            _ => {}
        }
    }
    let inner = &head[(open + 1).min(end)..end];
    let mut params = Vec::new();
    let mut nest = 0i32;
    let mut current = String::new();
    for c in inner.chars().chain(std::iter::once(',')) {
        match c {
            '(' | '<' | '[' => nest += 1,
            ')' | '>' | ']' => nest -= 1,
            _ => {}
        }
        if c == ',' && nest == 0 {
            let p = current.split('=').next().unwrap_or("").trim().to_string();
            current.clear();
            if p.is_empty() || p == "void" {
                continue;
            }
            let ident = p
                .split(|c: char| !is_ident(c))
                .filter(|w| !w.is_empty() && !w.chars().all(|c| c.is_ascii_digit()))
                .last()
                .unwrap_or("arg");
            params.push(ident.to_string());
        } else {
            current.push(c);
        }
    }
    (name, params, returns)
}

fn declared_name(snippet: &str) -> Option<String> {
    let first = snippet.lines().next()?;
    let words: Vec<&str> = first
        .split(|c: char| !is_ident(c))
        .filter(|w| !w.is_empty())
        .collect();
    for kw in ["class", "struct", "union", "enum", "using", "typedef"] {
        if let Some(i) = words.iter().position(|w| *w == kw) {
            if kw == "typedef" {
                break;
            }
            let next = words.get(i + 1).copied();
            return match next {
                Some("class") | Some("struct") => words.get(i + 2).map(|s| s.to_string()),
                other => other.map(str::to_string),
            };
        }
    }
    let cut = snippet
        .find(|c| matches!(c, '=' | ';' | '[' | '{' | '('))
        .unwrap_or(snippet.len());
    snippet[..cut]
        .split(|c: char| !is_ident(c))
        .filter(|w| !w.is_empty())
        .last()
        .map(str::to_string)
}

fn condition_words(snippet: &str) -> String {
    let first = snippet.lines().next().unwrap_or("");
    let cleaned: String = first
        .chars()
        .map(|c| {
            if is_ident(c) || " <>=!&|+-.".contains(c) {
                c
            } else {
                ' '
            }
        })
        .collect();
    let words: Vec<&str> = cleaned.split_whitespace().take(10).collect();
    if words.is_empty() {
        "the guarded case".into()
    } else {
        words.join(" ")
    }
}
