//! Comment-type selection for snippets.
//!
//! Two classifiers share one contract: a syntactic baseline that maps the
//! snippet kind to a comment type, and a client for a remote learned model.
//! The remote path always degrades to the baseline, so every snippet ends up
//! with one of the four [`CommentType`]s.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::source::{strip_comments, Snippet, SnippetKind, SourceFile};

/// Remote labels below this confidence are replaced by the baseline.
pub const REMOTE_ACCEPT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CommentType {
    Function,
    Variable,
    SnippetFunctionality,
    Branch,
}

impl CommentType {
    pub const ALL: [CommentType; 4] = [
        CommentType::Function,
        CommentType::Variable,
        CommentType::SnippetFunctionality,
        CommentType::Branch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CommentType::Function => "Function",
            CommentType::Variable => "Variable",
            CommentType::SnippetFunctionality => "SnippetFunctionality",
            CommentType::Branch => "Branch",
        }
    }

    /// Inline comments live inside function bodies and carry the word cap.
    pub fn is_inline(self) -> bool {
        self != CommentType::Function
    }
}

impl fmt::Display for CommentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommentType {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CommentType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| ClassifierError::Schema(format!("unknown comment type {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassificationSource {
    Baseline,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub snippet_id: usize,
    pub comment_type: CommentType,
    pub confidence: f64,
    pub source: ClassificationSource,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("remote classifier unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("malformed classifier response: {0}")]
    Schema(String),
    #[error("remote confidence {0} below acceptance threshold")]
    LowConfidence(f64),
    #[error("snippet {0} has no code to classify")]
    EmptySnippet(usize),
}

/// Kind-to-type mapping used when no learned model is consulted.
pub fn baseline_type(kind: SnippetKind) -> CommentType {
    match kind {
        SnippetKind::FunctionDef => CommentType::Function,
        SnippetKind::Declaration => CommentType::Variable,
        SnippetKind::Conditional | SnippetKind::TryCatch => CommentType::Branch,
        SnippetKind::Loop => CommentType::SnippetFunctionality,
    }
}

pub fn classify_baseline(snippet: &Snippet) -> Classification {
    Classification {
        snippet_id: snippet.id,
        comment_type: baseline_type(snippet.kind),
        confidence: 1.0,
        source: ClassificationSource::Baseline,
    }
}

#[derive(Debug, Serialize)]
struct RemoteRequest<'a> {
    code: &'a str,
    kind: &'a str,
}

#[derive(Debug, Deserialize)]
struct RemoteResponse {
    #[serde(rename = "type")]
    comment_type: String,
    confidence: f64,
}

/// HTTP client for a learned snippet classifier.
///
/// Wire format: `POST {"code": ..., "kind": ...}` answered by
/// `{"type": <CommentType>, "confidence": <0..1>}`.
#[derive(Debug, Clone)]
pub struct RemoteClassifier {
    endpoint: String,
    client: reqwest::blocking::Client,
    max_in_flight: usize,
}

impl RemoteClassifier {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, ClassifierError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ClassifierError::RemoteUnavailable(e.to_string()))?;
        Ok(RemoteClassifier {
            endpoint: endpoint.into(),
            client,
            max_in_flight: 4,
        })
    }

    pub fn with_max_in_flight(mut self, limit: usize) -> Self {
        self.max_in_flight = limit.max(1);
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Raw service answer for one snippet; comments are stripped from the
    /// code before it is sent.
    pub fn query(&self, snippet: &Snippet) -> Result<(CommentType, f64), ClassifierError> {
        let code = strip_comments(&SourceFile::from_text("snippet", snippet.text.as_str()));
        if code.text().trim().is_empty() {
            return Err(ClassifierError::EmptySnippet(snippet.id));
        }
        let response = self
            .client
            .post(&self.endpoint)
            .json(&RemoteRequest {
                code: code.text(),
                kind: snippet.kind.as_str(),
            })
            .send()
            .map_err(|e| ClassifierError::RemoteUnavailable(e.to_string()))?;
        if !response.status().is_success() {
            return Err(ClassifierError::RemoteUnavailable(format!(
                "HTTP {}",
                response.status()
            )));
        }
        let body = response
            .text()
            .map_err(|e| ClassifierError::RemoteUnavailable(e.to_string()))?;
        let parsed: RemoteResponse =
            serde_json::from_str(&body).map_err(|e| ClassifierError::Schema(e.to_string()))?;
        let comment_type: CommentType = parsed.comment_type.parse()?;
        if !(0.0..=1.0).contains(&parsed.confidence) {
            return Err(ClassifierError::Schema(format!(
                "confidence {} outside [0, 1]",
                parsed.confidence
            )));
        }
        Ok((comment_type, parsed.confidence))
    }

    /// Classifies one snippet, falling back to the baseline on any failure.
    /// The error that forced the fallback, if any, is returned alongside.
    pub fn classify(&self, snippet: &Snippet) -> (Classification, Option<ClassifierError>) {
        let outcome = self.query(snippet).and_then(|(comment_type, confidence)| {
            if confidence >= REMOTE_ACCEPT_THRESHOLD {
                Ok(Classification {
                    snippet_id: snippet.id,
                    comment_type,
                    confidence,
                    source: ClassificationSource::Remote,
                })
            } else {
                Err(ClassifierError::LowConfidence(confidence))
            }
        });
        match outcome {
            Ok(c) => (c, None),
            Err(err) => {
                log::warn!("snippet {}: {err}; using baseline", snippet.id);
                (classify_baseline(snippet), Some(err))
            }
        }
    }
}

/// Free-function form of [`RemoteClassifier::classify`].
pub fn classify_remote(
    snippet: &Snippet,
    classifier: &RemoteClassifier,
) -> (Classification, Option<ClassifierError>) {
    classifier.classify(snippet)
}

#[derive(Debug, Clone)]
pub enum Classifier {
    Baseline,
    Remote(RemoteClassifier),
}

impl Classifier {
    pub fn classify(&self, snippet: &Snippet) -> (Classification, Option<ClassifierError>) {
        match self {
            Classifier::Baseline => (classify_baseline(snippet), None),
            Classifier::Remote(remote) => remote.classify(snippet),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ClassifiedBatch {
    pub classifications: Vec<Classification>,
    /// `(snippet_id, error)` for every remote fallback.
    pub warnings: Vec<(usize, ClassifierError)>,
}

/// Classifies snippets in order. Remote calls run concurrently up to the
/// classifier's in-flight limit; the output order always matches the input.
pub fn classify_all(snippets: &[Snippet], classifier: &Classifier) -> ClassifiedBatch {
    let results: Vec<(Classification, Option<ClassifierError>)> = match classifier {
        Classifier::Baseline => snippets
            .iter()
            .map(|s| (classify_baseline(s), None))
            .collect(),
        Classifier::Remote(remote) => {
            match rayon::ThreadPoolBuilder::new()
                .num_threads(remote.max_in_flight)
                .build()
            {
                Ok(pool) => {
                    pool.install(|| snippets.par_iter().map(|s| remote.classify(s)).collect())
                }
                Err(_) => snippets.iter().map(|s| remote.classify(s)).collect(),
            }
        }
    };
    let mut batch = ClassifiedBatch::default();
    for (c, warning) in results {
        if let Some(w) = warning {
            batch.warnings.push((c.snippet_id, w));
        }
        batch.classifications.push(c);
    }
    batch
}
